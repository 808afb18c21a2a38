//! Curvature of left-invariant diagonal metrics on three-dimensional unimodular
//! Lie groups, the Bach tensor of 1×3 and 2×2 products, and the per-geometry
//! closed forms used as an independent route.

use serde::{Deserialize, Serialize};

use crate::error::{BachError, Result};
use crate::geometry::{
    rel_eq, BianchiMatrix, DiagonalMetric3, DiagonalMetric4, ModelGeometry, SurfaceKind, Sym3,
    Sym4,
};
use crate::polynomials::{p2, p3, q2, q3};

pub type Mat3 = [[f64; 3]; 3];
pub type Mat4 = [[f64; 4]; 4];

/// Relative tolerance for the diagonality assertion on engine output.
pub const DIAGONAL_TOL: f64 = 1e-12;

/// C[i][j][k] = C_{ij}^k, zero-based indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureTensor {
    pub c: [[[f64; 3]; 3]; 3],
}

fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

pub fn structure_tensor(e: &BianchiMatrix) -> StructureTensor {
    let mut c = [[[0.0; 3]; 3]; 3];
    for (i, ci) in c.iter_mut().enumerate() {
        for (j, cij) in ci.iter_mut().enumerate() {
            for (k, v) in cij.iter_mut().enumerate() {
                // E is diagonal, so only s = k contributes.
                let eps = levi_civita(i, j, k);
                if eps != 0.0 && e.e[k] != 0.0 {
                    *v = eps * e.e[k];
                }
            }
        }
    }
    StructureTensor { c }
}

/// All eight index placements of C with a diagonal metric.
/// `v[mask][a][b][c]` has index slot n raised when bit (2 - n) of mask is set.
struct Placements {
    v: [[[[f64; 3]; 3]; 3]; 8],
}

impl Placements {
    fn new(c: &StructureTensor, g: &[f64; 3]) -> Self {
        let mut v = [[[[0.0; 3]; 3]; 3]; 8];
        for (mask, vm) in v.iter_mut().enumerate() {
            for a in 0..3 {
                for b in 0..3 {
                    for k in 0..3 {
                        let mut x = c.c[a][b][k] * g[k];
                        if mask & 4 != 0 {
                            x /= g[a];
                        }
                        if mask & 2 != 0 {
                            x /= g[b];
                        }
                        if mask & 1 != 0 {
                            x /= g[k];
                        }
                        vm[a][b][k] = x;
                    }
                }
            }
        }
        Placements { v }
    }

    #[inline]
    fn at(&self, mask: usize, a: usize, b: usize, c: usize) -> f64 {
        self.v[mask][a][b][c]
    }
}

const DDD: usize = 0b000;
const DDU: usize = 0b001;
const DUD: usize = 0b010;
const DUU: usize = 0b011;
const UDD: usize = 0b100;
const UDU: usize = 0b101;
const UUD: usize = 0b110;
const UUU: usize = 0b111;

/// Full 3×3 Ricci tensor, no diagonality assumed.
pub fn ricci_full(c: &StructureTensor, g: &DiagonalMetric3) -> Mat3 {
    let pl = Placements::new(c, &g.0);
    let mut ric = [[0.0; 3]; 3];
    for j in 0..3 {
        for k in 0..3 {
            let mut s = 0.0;
            for l in 0..3 {
                for p in 0..3 {
                    s -= 0.5 * (pl.at(UDU, l, j, p) + pl.at(UDU, p, j, l)) * pl.at(DDD, l, k, p);
                    s += 0.25 * pl.at(UUD, l, p, j) * pl.at(DDD, l, p, k);
                    s += 0.5
                        * pl.at(UUD, l, p, l)
                        * (pl.at(DDD, p, j, k) + pl.at(DDD, p, k, j));
                }
            }
            ric[j][k] = s;
        }
    }
    ric
}

pub fn scalar_structure(c: &StructureTensor, g: &DiagonalMetric3) -> f64 {
    let pl = Placements::new(c, &g.0);
    let mut s = 0.0;
    for l in 0..3 {
        for k in 0..3 {
            for p in 0..3 {
                s -= 0.25 * pl.at(UUU, l, k, p) * pl.at(DDD, l, k, p);
                s -= 0.5 * pl.at(UUU, p, k, l) * pl.at(DDD, l, k, p);
                s -= pl.at(UUD, l, p, l) * pl.at(UDD, k, p, k);
            }
        }
    }
    s
}

/// Rough Laplacian of a left-invariant symmetric 2-tensor, full 3×3 output.
pub fn laplacian_full(c: &StructureTensor, g: &DiagonalMetric3, t: &Mat3) -> Mat3 {
    let pl = Placements::new(c, &g.0);
    let f = |m: usize, a: usize, b: usize, cc: usize| pl.at(m, a, b, cc);
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut s = 0.0;
            for p in 0..3 {
                for q in 0..3 {
                    if t[p][q] == 0.0 {
                        continue;
                    }
                    let mut acc = 0.0;
                    for k in 0..3 {
                        acc += f(UDU, k, i, p) * f(DDU, k, j, q)
                            + f(UUD, k, p, i) * f(DUD, k, q, j)
                            + f(DUU, i, p, k) * f(DUD, j, q, k)
                            - f(UDU, k, i, p) * f(DUD, k, q, j)
                            - f(UDU, k, j, p) * f(DUD, k, q, i)
                            - f(UDU, k, i, p) * f(DUD, j, q, k)
                            - f(UDU, k, j, p) * f(DUD, i, q, k)
                            + f(UUD, k, p, i) * f(DUD, j, q, k)
                            + f(UUD, k, p, j) * f(DUD, i, q, k);
                    }
                    s += 0.5 * t[p][q] * acc;
                }
            }
            for q in 0..3 {
                for k in 0..3 {
                    for p in 0..3 {
                        let tail = f(DUD, k, q, p) - f(DDU, k, p, q) + f(DUD, p, q, k);
                        let trace = 2.0 * f(UUD, k, p, k);
                        let a_i = (f(UUD, k, p, i) - f(UDU, k, i, p) + f(DUU, i, p, k)) * tail
                            + trace * (f(DUD, p, q, i) - f(DDU, p, i, q));
                        let a_j = (f(UUD, k, p, j) - f(UDU, k, j, p) + f(DUU, j, p, k)) * tail
                            + trace * (f(DUD, p, q, j) - f(DDU, p, j, q));
                        s += 0.25 * (t[q][j] * a_i + t[q][i] * a_j);
                    }
                }
            }
            out[i][j] = s;
        }
    }
    out
}

fn diag_of<const N: usize>(m: &[[f64; N]; N]) -> Result<[f64; N]> {
    let mut d = [0.0; N];
    let mut scale = 0.0_f64;
    let mut off = 0.0_f64;
    for i in 0..N {
        d[i] = m[i][i];
        scale = scale.max(m[i][i].abs());
        for j in 0..N {
            if i != j {
                off = off.max(m[i][j].abs());
            }
        }
    }
    let tol = DIAGONAL_TOL * scale;
    if off > tol {
        return Err(BachError::NotDiagonal { off, tol });
    }
    Ok(d)
}

fn diag_mat3(t: &Sym3) -> Mat3 {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        m[i][i] = t.0[i];
    }
    m
}

/// Diagonal Ricci tensor; the full tensor is computed and its off-diagonal part
/// must vanish to the diagonality tolerance.
pub fn ricci_structure(c: &StructureTensor, g: &DiagonalMetric3) -> Result<Sym3> {
    Ok(Sym3::from_array(diag_of(&ricci_full(c, g))?))
}

pub fn laplacian_sym2(c: &StructureTensor, g: &DiagonalMetric3, t: &Sym3) -> Result<Sym3> {
    Ok(Sym3::from_array(diag_of(&laplacian_full(
        c,
        g,
        &diag_mat3(t),
    ))?))
}

/// Sectional curvatures (K12, K13, K23) of the coordinate planes of a 3-slice.
pub fn sectional(g: &DiagonalMetric3, ric: &Sym3, s: f64) -> Result<[f64; 3]> {
    let g = DiagonalMetric3::new(g.0)?;
    let r = [ric[0] / g.0[0], ric[1] / g.0[1], ric[2] / g.0[2]];
    Ok([r[0] + r[1] - s / 2.0, r[0] + r[2] - s / 2.0, r[1] + r[2] - s / 2.0])
}

/// Full Bach tensor of a 1×3 product with homogeneous slice, from full slice tensors.
pub fn bach_1x3_full(ric: &Mat3, s: f64, lap_ric: &Mat3, g: &DiagonalMetric4) -> Mat4 {
    let g = g.0;
    let ginv = [1.0 / g[1], 1.0 / g[2], 1.0 / g[3]];
    let mut norm2 = 0.0;
    for j in 0..3 {
        for l in 0..3 {
            norm2 += ric[j][l] * ric[j][l] * ginv[j] * ginv[l];
        }
    }
    let mut b = [[0.0; 4]; 4];
    b[0][0] = -0.25 * (norm2 - s * s / 3.0) * g[0];
    for j in 0..3 {
        for k in 0..3 {
            let mut sq = 0.0;
            for l in 0..3 {
                sq += ric[j][l] * ginv[l] * ric[l][k];
            }
            let mut v = 0.5 * lap_ric[j][k] - 2.0 * sq + 7.0 / 6.0 * s * ric[j][k];
            if j == k {
                v += (0.75 * norm2 - 5.0 / 12.0 * s * s) * g[j + 1];
            }
            b[j + 1][k + 1] = v;
        }
    }
    b
}

/// Diagonal Bach tensor of a 1×3 product. The slice scalar curvature is
/// constant, so its Laplacian and Hessian terms are absent.
pub fn bach_1x3(ric: &Sym3, s: f64, lap_ric: &Sym3, g: &DiagonalMetric4) -> Sym4 {
    let b = bach_1x3_full(&diag_mat3(ric), s, &diag_mat3(lap_ric), g);
    Sym4::from_array([b[0][0], b[1][1], b[2][2], b[3][3]])
}

/// Full engine route: structure constants to the 4×4 Bach tensor, no diagonal
/// assumption anywhere.
pub fn bach_engine_full(e: &BianchiMatrix, g: &DiagonalMetric4) -> Mat4 {
    let c = structure_tensor(e);
    let g3 = g.slice();
    let ric = ricci_full(&c, &g3);
    let s = scalar_structure(&c, &g3);
    let lap = laplacian_full(&c, &g3, &ric);
    bach_1x3_full(&ric, s, &lap, g)
}

pub fn bach_engine(e: &BianchiMatrix, g: &DiagonalMetric4) -> Result<Sym4> {
    Ok(Sym4::from_array(diag_of(&bach_engine_full(e, g))?))
}

/// Bach tensor of a 2×2 product of constant-curvature surfaces with scalar
/// curvatures S1, S2, returned as the rates of the two slice scales.
pub fn bach_2x2(s1: f64, s2: f64, g1_scale: f64, g2_scale: f64) -> (f64, f64) {
    let k = (s1 * s1 - s2 * s2) / 24.0;
    (k * g1_scale, -k * g2_scale)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureReport {
    pub ric: Sym3,
    pub scalar: f64,
    /// K12, K13, K23.
    pub sectional: [f64; 3],
}

/// Exact differences d12 = g22 − g11 and d23 = g33 − g22, carried separately when
/// the integrator tracks a merging pair below the resolution of the components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaps {
    pub d12: f64,
    pub d23: f64,
}

impl Gaps {
    pub fn of(g: &[f64; 3]) -> Self {
        Gaps {
            d12: g[1] - g[0],
            d23: g[2] - g[1],
        }
    }
}

pub fn closed_form_curvature(geom: ModelGeometry, g: &DiagonalMetric3) -> Result<CurvatureReport> {
    closed_form_curvature_with_gaps(geom, g, Gaps::of(&g.0))
}

/// Closed-form curvature written so that every vanishing difference enters
/// through `gaps` rather than through a subtraction of nearly equal components.
pub fn closed_form_curvature_with_gaps(
    geom: ModelGeometry,
    g: &DiagonalMetric3,
    gaps: Gaps,
) -> Result<CurvatureReport> {
    let [x, y, z] = g.0;
    let Gaps { d12, d23 } = gaps;
    let (ric, s) = match geom {
        ModelGeometry::R3 => ([0.0; 3], 0.0),
        ModelGeometry::Nil => (
            [x * x / (2.0 * y * z), -x / (2.0 * z), -x / (2.0 * y)],
            -x / (2.0 * y * z),
        ),
        ModelGeometry::Solv => {
            let sum = x + y;
            (
                [
                    -d12 * sum / (2.0 * y * z),
                    d12 * sum / (2.0 * x * z),
                    -sum * sum / (2.0 * x * y),
                ],
                -sum * sum / (2.0 * x * y * z),
            )
        }
        ModelGeometry::E2 => {
            let sum = x + y;
            (
                [
                    -d12 * sum / (2.0 * y * z),
                    d12 * sum / (2.0 * x * z),
                    -d12 * d12 / (2.0 * x * y),
                ],
                -d12 * d12 / (2.0 * x * y * z),
            )
        }
        ModelGeometry::Sl2 => {
            let all = x + y + z;
            let ric = [
                (x - d23) * (x + d23) / (2.0 * y * z),
                -(x + d23) * all / (2.0 * x * z),
                -(x - d23) * all / (2.0 * x * y),
            ];
            let s = ric[0] / x + ric[1] / y + ric[2] / z;
            (ric, s)
        }
        ModelGeometry::S3 => {
            let w = y + z - x;
            let ric = [
                (x + d23) * (x - d23) / (2.0 * y * z),
                w * (x - d23) / (2.0 * x * z),
                w * (x + d23) / (2.0 * x * y),
            ];
            let s = ric[0] / x + ric[1] / y + ric[2] / z;
            (ric, s)
        }
        ModelGeometry::H3 => {
            if !(rel_eq(x, y, 1e-12) && rel_eq(y, z, 1e-12)) {
                return Err(BachError::Domain(
                    "hyperbolic 3-space requires equal slice components".into(),
                ));
            }
            ([-2.0; 3], -6.0 / x)
        }
        _ => {
            let (k1, k2) = geom
                .product_factors()
                .ok_or(BachError::UnsupportedGeometry(geom.tag(), "closed_form_curvature"))?;
            return Ok(product_curvature(k1, k2, x, (y * z).sqrt()));
        }
    };
    let ric = Sym3::from_array(ric);
    let sectional = sectional(g, &ric, s)?;
    Ok(CurvatureReport {
        ric,
        scalar: s,
        sectional,
    })
}

/// Curvature of a 2×2 product restricted to frame directions 1..3, where
/// direction 1 lies in the first factor (scale f1) and 2, 3 span the second.
fn product_curvature(k1: SurfaceKind, k2: SurfaceKind, f1: f64, f2: f64) -> CurvatureReport {
    let (s1, s2) = (k1.sign(), k2.sign());
    CurvatureReport {
        ric: Sym3::from_array([s1, s2, s2]),
        scalar: 2.0 * s1 / f1 + 2.0 * s2 / f2,
        sectional: [0.0, 0.0, s2 / f2],
    }
}

/// Closed-form Bach tensor from the per-geometry listings.
pub fn closed_form_bach(geom: ModelGeometry, g: &DiagonalMetric4) -> Result<Sym4> {
    let [g0, x, y, z] = g.0;
    let det = g.det();
    let beta = 1.0 / (6.0 * det * det);
    let g02 = g0 * g0;
    let b = match geom {
        ModelGeometry::R3 | ModelGeometry::H3 => [0.0; 4],
        ModelGeometry::Nil => {
            let k = beta * g02 * x.powi(4);
            [-k * g0, -5.0 * k * x, 3.0 * k * y, 3.0 * k * z]
        }
        ModelGeometry::Solv => {
            let p = p2(x, y);
            [
                -beta * p * g02 * g0,
                -beta * q2(x, y) * g02 * x,
                -beta * q2(y, x) * g02 * y,
                3.0 * beta * p * g02 * z,
            ]
        }
        ModelGeometry::E2 => {
            let p = p2(-x, y);
            [
                -beta * p * g02 * g0,
                -beta * q2(-x, y) * g02 * x,
                -beta * q2(y, -x) * g02 * y,
                3.0 * beta * p * g02 * z,
            ]
        }
        ModelGeometry::Sl2 => [
            -beta * p3(-x, y, z) * g02 * g0,
            -beta * q3(-x, y, z) * g02 * x,
            -beta * q3(y, -x, z) * g02 * y,
            -beta * q3(z, -x, y) * g02 * z,
        ],
        ModelGeometry::S3 => [
            -beta * p3(x, y, z) * g02 * g0,
            -beta * q3(x, y, z) * g02 * x,
            -beta * q3(y, z, x) * g02 * y,
            -beta * q3(z, x, y) * g02 * z,
        ],
        ModelGeometry::Rxs2 | ModelGeometry::Rxh2 => {
            let sign = if geom == ModelGeometry::Rxs2 { 1.0 } else { -1.0 };
            let f2 = (y * z).sqrt();
            let (r1, r2) = bach_2x2(0.0, 2.0 * sign / f2, 1.0, 1.0);
            [r1 * g0, r1 * x, r2 * y, r2 * z]
        }
        _ => {
            let (k1, k2) = geom
                .product_factors()
                .ok_or(BachError::UnsupportedGeometry(geom.tag(), "closed_form_bach"))?;
            let f1 = (g0 * x).sqrt();
            let f2 = (y * z).sqrt();
            let (r1, r2) = bach_2x2(2.0 * k1.sign() / f1, 2.0 * k2.sign() / f2, 1.0, 1.0);
            [r1 * g0, r1 * x, r2 * y, r2 * z]
        }
    };
    Ok(Sym4::from_array(b))
}

/// Worst disagreements between the structure-constant engine and the closed forms
/// for one geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCheck {
    pub geometry: ModelGeometry,
    pub samples: usize,
    /// max |B/g (engine) − B/g (closed form)| over the largest closed-form rate.
    pub bach_rel: f64,
    /// Same for Ric and S against the larger of |S| and max |Ric_ii|.
    pub curvature_rel: f64,
    /// max |B_ij| / √(g_ii g_jj), i ≠ j, over the rate scale.
    pub off_diagonal: f64,
    /// |Σ B_ii / g_ii| over the rate scale.
    pub trace: f64,
}

fn relative(x: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        x / scale
    } else {
        x
    }
}

/// Compares both routes on `samples` log-uniform metrics with components in
/// [10⁻², 10²] for each Lie geometry.
pub fn cross_validate(samples: usize, seed: u64) -> Vec<CrossCheck> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    ModelGeometry::LIE_GROUPS
        .iter()
        .map(|&geom| {
            let e = geom.bianchi().expect("Lie group");
            let c = structure_tensor(&e);
            let mut out = CrossCheck {
                geometry: geom,
                samples,
                bach_rel: 0.0,
                curvature_rel: 0.0,
                off_diagonal: 0.0,
                trace: 0.0,
            };
            for _ in 0..samples {
                let g: [f64; 4] = std::array::from_fn(|_| 10f64.powf(rng.gen_range(-2.0..2.0)));
                let g4 = DiagonalMetric4(g);
                let full = bach_engine_full(&e, &g4);
                let cf = closed_form_bach(geom, &g4).expect("Lie group closed form");
                let scale = (0..4).fold(0.0_f64, |m, i| m.max((cf[i] / g[i]).abs()));
                let mut tr = 0.0;
                for i in 0..4 {
                    let r = full[i][i] / g[i];
                    tr += r;
                    out.bach_rel = out.bach_rel.max(relative((r - cf[i] / g[i]).abs(), scale));
                    for j in 0..4 {
                        if i != j {
                            let off = full[i][j].abs() / (g[i] * g[j]).sqrt();
                            out.off_diagonal = out.off_diagonal.max(relative(off, scale));
                        }
                    }
                }
                out.trace = out.trace.max(relative(tr.abs(), scale));

                let g3 = g4.slice();
                let ric = ricci_full(&c, &g3);
                let sc = scalar_structure(&c, &g3);
                let cfc = closed_form_curvature(geom, &g3).expect("Lie group curvature");
                let rs = cfc.scalar.abs().max(cfc.ric.max_abs());
                let mut worst = (sc - cfc.scalar).abs();
                for i in 0..3 {
                    worst = worst.max((ric[i][i] - cfc.ric[i]).abs());
                }
                out.curvature_rel = out.curvature_rel.max(relative(worst, rs));
            }
            out
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    fn c_of(g: ModelGeometry) -> StructureTensor {
        structure_tensor(&g.bianchi().unwrap())
    }

    #[test]
    fn structure_constants_by_hand() {
        let c = structure_tensor(&BianchiMatrix { e: [0.0; 3] });
        assert!(c.c.iter().flatten().flatten().all(|v| *v == 0.0));

        let c = c_of(ModelGeometry::S3).c;
        assert_eq!((c[0][1][2], c[1][2][0], c[2][0][1]), (1.0, 1.0, 1.0));
        assert_eq!((c[1][0][2], c[2][1][0], c[0][2][1]), (-1.0, -1.0, -1.0));
        assert_eq!(c[0][1][1], 0.0);

        let c = c_of(ModelGeometry::Solv).c;
        assert_eq!(c[1][2][0], -1.0);
        assert_eq!(c[2][0][1], 1.0);
        assert_eq!(c[0][1][2], 0.0);
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    assert_eq!(c[i][j][k], -c[j][i][k]);
                }
            }
        }
    }

    #[test]
    fn ricci_and_scalar_examples() {
        let id = DiagonalMetric3::identity();
        let r = ricci_structure(&c_of(ModelGeometry::S3), &id).unwrap();
        assert_eq!(r.0, [0.5, 0.5, 0.5]);
        let r = ricci_structure(&c_of(ModelGeometry::Nil), &id).unwrap();
        assert_eq!(r.0, [0.5, -0.5, -0.5]);
        let r = ricci_structure(&c_of(ModelGeometry::R3), &DiagonalMetric3([2.0, 3.0, 5.0]))
            .unwrap();
        assert_eq!(r.0, [0.0; 3]);

        assert_eq!(scalar_structure(&c_of(ModelGeometry::R3), &id), 0.0);
        assert_eq!(scalar_structure(&c_of(ModelGeometry::S3), &id), 1.5);
        assert_eq!(scalar_structure(&c_of(ModelGeometry::Solv), &id), -2.0);
    }

    #[test]
    fn ricci_rejects_nonpositive_metric() {
        assert!(DiagonalMetric3::new([1.0, -1.0, 1.0]).is_err());
        assert!(sectional(&DiagonalMetric3([1.0, 0.0, 1.0]), &Sym3::zero(), 0.0).is_err());
    }

    #[test]
    fn laplacian_kills_metric_and_flat_structure() {
        let g = DiagonalMetric3([0.7, 1.9, 3.1]);
        for geom in ModelGeometry::LIE_GROUPS {
            let lap = laplacian_sym2(&c_of(geom), &g, &Sym3::from_array(g.0)).unwrap();
            assert!(lap.max_abs() < 1e-13, "{geom}: {lap:?}");
        }
        let lap =
            laplacian_sym2(&c_of(ModelGeometry::R3), &g, &Sym3::from_array([1.0, 2.0, 3.0]))
                .unwrap();
        assert_eq!(lap.0, [0.0; 3]);
    }

    #[test]
    fn nil_identity_bach() {
        let c = c_of(ModelGeometry::Nil);
        let id = DiagonalMetric3::identity();
        let ric = ricci_structure(&c, &id).unwrap();
        let s = scalar_structure(&c, &id);
        let lap = laplacian_sym2(&c, &id, &ric).unwrap();
        let b = bach_1x3(&ric, s, &lap, &DiagonalMetric4::identity());
        let want = [-1.0 / 6.0, -5.0 / 6.0, 0.5, 0.5];
        for i in 0..4 {
            assert!(close(b[i], want[i], 1e-14), "{b:?}");
        }
        let cf = closed_form_bach(ModelGeometry::Nil, &DiagonalMetric4::identity()).unwrap();
        for i in 0..4 {
            assert!(close(cf[i], want[i], 1e-15));
        }
    }

    #[test]
    fn sectional_examples() {
        let id = DiagonalMetric3::identity();
        assert_eq!(sectional(&id, &Sym3::zero(), 0.0).unwrap(), [0.0; 3]);
        assert_eq!(
            sectional(&id, &Sym3::from_array([0.5; 3]), 1.5).unwrap(),
            [0.25; 3]
        );
        assert_eq!(
            sectional(&id, &Sym3::from_array([0.0, 0.0, -2.0]), -2.0).unwrap(),
            [1.0, -1.0, -1.0]
        );
    }

    #[test]
    fn einstein_slices_have_zero_bach() {
        let g4 = DiagonalMetric4([3.3, 2.0, 2.0, 2.0]);
        let ric = Sym3::from_array([0.5; 3]);
        let b = bach_1x3(&ric, 0.75, &Sym3::zero(), &g4);
        assert!(b.max_abs() < 1e-15);
        let b = closed_form_bach(ModelGeometry::S3, &g4).unwrap();
        assert!(b.max_abs() < 1e-15);
    }

    #[test]
    fn bach_2x2_examples() {
        assert_eq!(bach_2x2(2.0, 2.0, 1.0, 1.0), (0.0, 0.0));
        assert_eq!(bach_2x2(2.0, -2.0, 1.0, 1.0), (0.0, 0.0));
        let (a, b) = bach_2x2(0.0, 2.0, 1.0, 1.0);
        assert!(close(a, -1.0 / 6.0, 1e-15) && close(b, 1.0 / 6.0, 1e-15));
    }

    #[test]
    fn closed_form_curvature_examples() {
        let id = DiagonalMetric3::identity();
        let c = closed_form_curvature(ModelGeometry::Nil, &id).unwrap();
        assert_eq!((c.ric.0, c.scalar), ([0.5, -0.5, -0.5], -0.5));
        let c = closed_form_curvature(ModelGeometry::E2, &DiagonalMetric3([2.0, 2.0, 5.0])).unwrap();
        assert_eq!((c.ric.max_abs(), c.scalar), (0.0, 0.0));
        let c = closed_form_curvature(ModelGeometry::Sl2, &id).unwrap();
        assert_eq!((c.ric.0, c.scalar), ([0.5, -1.5, -1.5], -2.5));
    }

    #[test]
    fn closed_form_bach_examples() {
        let b = closed_form_bach(ModelGeometry::Solv, &DiagonalMetric4::identity()).unwrap();
        let want = [-2.0 / 3.0, -2.0 / 3.0, -2.0 / 3.0, 2.0];
        for i in 0..4 {
            assert!(close(b[i], want[i], 1e-15));
        }
        let b = closed_form_bach(ModelGeometry::E2, &DiagonalMetric4([1.3, 2.0, 2.0, 0.4])).unwrap();
        assert_eq!(b.max_abs(), 0.0);
    }

    #[test]
    fn engine_matches_closed_forms_on_random_metrics() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for geom in ModelGeometry::LIE_GROUPS {
            let e = geom.bianchi().unwrap();
            let c = structure_tensor(&e);
            let mut worst = 0.0_f64;
            for _ in 0..100 {
                let g: [f64; 4] = std::array::from_fn(|_| 10f64.powf(rng.gen_range(-2.0..2.0)));
                let g4 = DiagonalMetric4::new(g).unwrap();
                let eng = bach_engine(&e, &g4).unwrap();
                let cf = closed_form_bach(geom, &g4).unwrap();
                let rates = |b: &Sym4| -> [f64; 4] { std::array::from_fn(|i| b[i] / g[i]) };
                let (re, rc) = (rates(&eng), rates(&cf));
                let scale = rc.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                for i in 0..4 {
                    if scale > 0.0 {
                        worst = worst.max((re[i] - rc[i]).abs() / scale);
                    } else {
                        assert_eq!(re[i], 0.0);
                    }
                }
                let ric = ricci_structure(&c, &g4.slice()).unwrap();
                let cfc = closed_form_curvature(geom, &g4.slice()).unwrap();
                let s = scalar_structure(&c, &g4.slice());
                let rs = cfc.scalar.abs().max(cfc.ric.max_abs());
                for i in 0..3 {
                    assert!((ric[i] - cfc.ric[i]).abs() <= 1e-12 * rs, "{geom} {ric:?} {cfc:?}");
                }
                assert!((s - cfc.scalar).abs() <= 1e-12 * rs.max(1e-300));
            }
            assert!(worst <= 1e-12, "{geom}: {worst:e}");
        }
    }

    #[test]
    fn cross_validation_report() {
        let report = cross_validate(100, 11);
        assert_eq!(report.len(), 6);
        for c in report {
            assert!(c.bach_rel <= 1e-12 && c.curvature_rel <= 1e-12, "{c:?}");
            assert!(c.off_diagonal <= 1e-12 && c.trace <= 1e-12, "{c:?}");
        }
    }

    #[test]
    fn product_slices_agree_with_1x3_assembly() {
        // ℝ×S² and ℝ×ℍ² have parallel Ricci tensor, so the 1×3 assembly applies
        // with a vanishing Laplacian term.
        for geom in [ModelGeometry::Rxs2, ModelGeometry::Rxh2] {
            let g4 = DiagonalMetric4([0.8, 1.7, 2.5, 2.5]);
            let cr = closed_form_curvature(geom, &g4.slice()).unwrap();
            let b = bach_1x3(&cr.ric, cr.scalar, &Sym3::zero(), &g4);
            let want = closed_form_bach(geom, &g4).unwrap();
            for i in 0..4 {
                assert!(close(b[i], want[i], 1e-14), "{geom} {b:?} {want:?}");
            }
        }
    }
}
