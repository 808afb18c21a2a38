//! The homogeneous quartics that drive every Lie-group flow, evaluated from one
//! coefficient table per polynomial in either `f64` or exact rationals.

use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BachError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolyId {
    P2,
    Q2,
    P3,
    Q3,
    R3,
    #[serde(rename = "S_SL2")]
    SSl2,
    U3,
    #[serde(rename = "S3COMB")]
    S3Comb,
}

impl PolyId {
    pub const ALL: [PolyId; 8] = [
        PolyId::P2,
        PolyId::Q2,
        PolyId::P3,
        PolyId::Q3,
        PolyId::R3,
        PolyId::SSl2,
        PolyId::U3,
        PolyId::S3Comb,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            PolyId::P2 => "P2",
            PolyId::Q2 => "Q2",
            PolyId::P3 => "P3",
            PolyId::Q3 => "Q3",
            PolyId::R3 => "R3",
            PolyId::SSl2 => "S_SL2",
            PolyId::U3 => "U3",
            PolyId::S3Comb => "S3COMB",
        }
    }

    pub fn from_tag(tag: &str) -> Option<PolyId> {
        PolyId::ALL.into_iter().find(|p| p.tag().eq_ignore_ascii_case(tag))
    }

    pub fn arity(self) -> usize {
        match self {
            PolyId::P2 | PolyId::Q2 => 2,
            _ => 3,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// (coefficient, exponents of x, y, z).
pub type Term = (i64, [u8; 3]);

// p(x, y) = x⁴ + x³y + xy³ + y⁴
const P2_TERMS: &[Term] = &[(1, [4, 0, 0]), (1, [3, 1, 0]), (1, [1, 3, 0]), (1, [0, 4, 0])];

// q(x, y) = 5x⁴ + 3x³y − xy³ − 3y⁴
const Q2_TERMS: &[Term] = &[(5, [4, 0, 0]), (3, [3, 1, 0]), (-1, [1, 3, 0]), (-3, [0, 4, 0])];

// p(x, y, z) = x⁴ − x³(y + z) + x²yz + x(−y³ + y²z + yz² − z³) + y⁴ − y³z − yz³ + z⁴
const P3_TERMS: &[Term] = &[
    (1, [4, 0, 0]),
    (-1, [3, 1, 0]),
    (-1, [3, 0, 1]),
    (1, [2, 1, 1]),
    (-1, [1, 3, 0]),
    (1, [1, 2, 1]),
    (1, [1, 1, 2]),
    (-1, [1, 0, 3]),
    (1, [0, 4, 0]),
    (-1, [0, 3, 1]),
    (-1, [0, 1, 3]),
    (1, [0, 0, 4]),
];

// q(x, y, z) = 5x⁴ − 3x³(y + z) + x²yz + x(y³ − y²z − yz² + z³) − 3y⁴ + 3y³z + 3yz³ − 3z⁴
const Q3_TERMS: &[Term] = &[
    (5, [4, 0, 0]),
    (-3, [3, 1, 0]),
    (-3, [3, 0, 1]),
    (1, [2, 1, 1]),
    (1, [1, 3, 0]),
    (-1, [1, 2, 1]),
    (-1, [1, 1, 2]),
    (1, [1, 0, 3]),
    (-3, [0, 4, 0]),
    (3, [0, 3, 1]),
    (3, [0, 1, 3]),
    (-3, [0, 0, 4]),
];

// r(x, y, z) = 8x⁴ − 5x³(y + z) + 2x²yz + x(y³ − y²z − yz² + z³) − 4y⁴ + 4y³z + 4yz³ − 4z⁴
const R3_TERMS: &[Term] = &[
    (8, [4, 0, 0]),
    (-5, [3, 1, 0]),
    (-5, [3, 0, 1]),
    (2, [2, 1, 1]),
    (1, [1, 3, 0]),
    (-1, [1, 2, 1]),
    (-1, [1, 1, 2]),
    (1, [1, 0, 3]),
    (-4, [0, 4, 0]),
    (4, [0, 3, 1]),
    (4, [0, 1, 3]),
    (-4, [0, 0, 4]),
];

// s(x, y, z) = −3x⁴ − x³(y + z) − x²yz + x(3y³ + 5y²z + 5yz² + 3z³)
//              + 5y⁴ + 5y³z + 4y²z² + 5yz³ + 5z⁴
const S_SL2_TERMS: &[Term] = &[
    (-3, [4, 0, 0]),
    (-1, [3, 1, 0]),
    (-1, [3, 0, 1]),
    (-1, [2, 1, 1]),
    (3, [1, 3, 0]),
    (5, [1, 2, 1]),
    (5, [1, 1, 2]),
    (3, [1, 0, 3]),
    (5, [0, 4, 0]),
    (5, [0, 3, 1]),
    (4, [0, 2, 2]),
    (5, [0, 1, 3]),
    (5, [0, 0, 4]),
];

// u(x, y, z) = −4x⁴ + x³(y + z) − x²yz − x(5y³ + 7y²z + 7yz² + 5z³)
//              + 8y⁴ + 7y³z + 6y²z² + 7yz³ + 8z⁴
const U3_TERMS: &[Term] = &[
    (-4, [4, 0, 0]),
    (1, [3, 1, 0]),
    (1, [3, 0, 1]),
    (-1, [2, 1, 1]),
    (-5, [1, 3, 0]),
    (-7, [1, 2, 1]),
    (-7, [1, 1, 2]),
    (-5, [1, 0, 3]),
    (8, [0, 4, 0]),
    (7, [0, 3, 1]),
    (6, [0, 2, 2]),
    (7, [0, 1, 3]),
    (8, [0, 0, 4]),
];

// 2p(x, y, z) + 3q(y, x, z) = −[(z − y)(7z³ + 6yz² + 6y²z + 17y³ − x(7z² + 6yz + 11y²))
//                              + x²(yz − xy − 7xz + 7x²)], expanded
const S3COMB_TERMS: &[Term] = &[
    (-7, [4, 0, 0]),
    (1, [3, 1, 0]),
    (7, [3, 0, 1]),
    (-1, [2, 1, 1]),
    (-11, [1, 3, 0]),
    (5, [1, 2, 1]),
    (-1, [1, 1, 2]),
    (7, [1, 0, 3]),
    (17, [0, 4, 0]),
    (-11, [0, 3, 1]),
    (1, [0, 1, 3]),
    (-7, [0, 0, 4]),
];

/// Dense coefficients c[ex][ey]; every table is homogeneous of degree 4 so the
/// z exponent is 4 − ex − ey.
pub type Dense = [[i64; 5]; 5];

const fn dense(terms: &[Term]) -> Dense {
    let mut d = [[0i64; 5]; 5];
    let mut i = 0;
    while i < terms.len() {
        let (c, e) = terms[i];
        assert!(e[0] + e[1] + e[2] == 4);
        d[e[0] as usize][e[1] as usize] += c;
        i += 1;
    }
    d
}

const P2_D: Dense = dense(P2_TERMS);
const Q2_D: Dense = dense(Q2_TERMS);
pub(crate) const P3_D: Dense = dense(P3_TERMS);
pub(crate) const Q3_D: Dense = dense(Q3_TERMS);
const R3_D: Dense = dense(R3_TERMS);
pub(crate) const S_SL2_D: Dense = dense(S_SL2_TERMS);
const U3_D: Dense = dense(U3_TERMS);

/// Arithmetic needed by the evaluator.
pub trait Ring:
    Clone
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    fn from_i64(v: i64) -> Self;
}

impl Ring for f64 {
    fn from_i64(v: i64) -> Self {
        v as f64
    }
}

impl Ring for BigRational {
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
}

/// Nested Horner evaluation: outer in x, inner in y, z through its powers.
pub fn horner<T: Ring>(d: &Dense, x: &T, y: &T, z: &T) -> T {
    let mut zp = vec![T::one()];
    for k in 1..5 {
        let next = zp[k - 1].clone() * z.clone();
        zp.push(next);
    }
    let mut acc_x = T::zero();
    for ex in (0..5).rev() {
        let n = 4 - ex;
        let mut acc_y = T::zero();
        for ey in (0..=n).rev() {
            acc_y = acc_y * y.clone() + T::from_i64(d[ex][ey]) * zp[n - ey].clone();
        }
        acc_x = acc_x * x.clone() + acc_y;
    }
    acc_x
}

#[inline]
fn horner_f64(d: &Dense, x: f64, y: f64, z: f64) -> f64 {
    let zp = [1.0, z, z * z, z * z * z, z * z * z * z];
    let mut acc_x = 0.0;
    for ex in (0..5).rev() {
        let n = 4 - ex;
        let mut acc_y = 0.0;
        for ey in (0..=n).rev() {
            acc_y = acc_y * y + d[ex][ey] as f64 * zp[n - ey];
        }
        acc_x = acc_x * x + acc_y;
    }
    acc_x
}

pub fn p2(x: f64, y: f64) -> f64 {
    horner_f64(&P2_D, x, y, 1.0)
}
pub fn q2(x: f64, y: f64) -> f64 {
    horner_f64(&Q2_D, x, y, 1.0)
}
pub fn p3(x: f64, y: f64, z: f64) -> f64 {
    horner_f64(&P3_D, x, y, z)
}
pub fn q3(x: f64, y: f64, z: f64) -> f64 {
    horner_f64(&Q3_D, x, y, z)
}
pub fn r3(x: f64, y: f64, z: f64) -> f64 {
    horner_f64(&R3_D, x, y, z)
}
pub fn s_sl2(x: f64, y: f64, z: f64) -> f64 {
    horner_f64(&S_SL2_D, x, y, z)
}
pub fn u3(x: f64, y: f64, z: f64) -> f64 {
    horner_f64(&U3_D, x, y, z)
}

/// Linear argument of a shifted evaluation in the variables (x, y, δ), with the
/// third slot standing for z = y + δ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arg {
    X,
    NegX,
    Y,
    Z,
}

impl Arg {
    fn form(self) -> [i64; 3] {
        match self {
            Arg::X => [1, 0, 0],
            Arg::NegX => [-1, 0, 0],
            Arg::Y => [0, 1, 0],
            Arg::Z => [0, 1, 1],
        }
    }
}

type Cube = [[[i64; 5]; 5]; 5];

fn cube_mul_linear(p: &Cube, l: [i64; 3]) -> Cube {
    let mut out = [[[0i64; 5]; 5]; 5];
    for a in 0..5 {
        for b in 0..5 {
            for c in 0..5 {
                let v = p[a][b][c];
                if v == 0 {
                    continue;
                }
                if l[0] != 0 {
                    out[a + 1][b][c] += v * l[0];
                }
                if l[1] != 0 {
                    out[a][b + 1][c] += v * l[1];
                }
                if l[2] != 0 {
                    out[a][b][c + 1] += v * l[2];
                }
            }
        }
    }
    out
}

/// Re-expands a quartic table at linear arguments in (x, y, δ). The result is a
/// table in the same layout, evaluated by [`eval_shifted`] with δ in the z slot.
/// Cancellations among the leading terms at y = z happen in the integer
/// coefficients instead of in floating point.
pub fn shift(d: &Dense, args: [Arg; 3]) -> Dense {
    let mut out = [[0i64; 5]; 5];
    for ex in 0..5 {
        for ey in 0..=4 - ex {
            let c = d[ex][ey];
            if c == 0 {
                continue;
            }
            let mut p: Cube = [[[0; 5]; 5]; 5];
            p[0][0][0] = c;
            for (arg, e) in args.iter().zip([ex, ey, 4 - ex - ey]) {
                for _ in 0..e {
                    p = cube_mul_linear(&p, arg.form());
                }
            }
            for a in 0..5 {
                for b in 0..=4 - a {
                    out[a][b] += p[a][b][4 - a - b];
                }
            }
        }
    }
    out
}

/// Evaluates a table produced by [`shift`] at (x, y, δ).
pub fn eval_shifted(d: &Dense, x: f64, y: f64, delta: f64) -> f64 {
    horner_f64(d, x, y, delta)
}

/// Coefficient tables for all polynomials. The default is the transcription
/// above; tests and the CLI can perturb a copy to exercise failure reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyTables {
    dense: [Dense; 8],
}

impl Default for PolyTables {
    fn default() -> Self {
        PolyTables {
            dense: [
                P2_D,
                Q2_D,
                P3_D,
                Q3_D,
                R3_D,
                S_SL2_D,
                U3_D,
                dense(S3COMB_TERMS),
            ],
        }
    }
}

impl PolyTables {
    /// Adds `delta` to the leading (x⁴ or highest-order) coefficient of `id`.
    pub fn with_fault(mut self, id: PolyId, delta: i64) -> Self {
        let d = &mut self.dense[id.index()];
        let (ex, ey) = (0..5)
            .rev()
            .flat_map(|ex| (0..=4 - ex).rev().map(move |ey| (ex, ey)))
            .find(|&(ex, ey)| d[ex][ey] != 0)
            .unwrap_or((4, 0));
        d[ex][ey] += delta;
        self
    }

    pub fn table(&self, id: PolyId) -> &Dense {
        &self.dense[id.index()]
    }

    pub fn eval<T: Ring>(&self, id: PolyId, args: &[T]) -> Result<T> {
        if args.len() != id.arity() {
            return Err(BachError::ArityMismatch {
                name: id.tag(),
                expected: id.arity(),
                got: args.len(),
            });
        }
        let z = if args.len() == 3 {
            args[2].clone()
        } else {
            T::one()
        };
        Ok(horner(self.table(id), &args[0], &args[1], &z))
    }
}

/// Evaluate with the transcribed tables.
pub fn eval<T: Ring>(id: PolyId, args: &[T]) -> Result<T> {
    PolyTables::default().eval(id, args)
}

fn q2_cubic(x: f64) -> f64 {
    ((5.0 * x - 2.0) * x + 2.0) * x - 3.0
}

/// Bracket [lo, hi] with cubic(lo) < 0 < cubic(hi) around the real root of the
/// Q2 cubic factor 5x³ − 2x² + 2x − 3, bisected to width 1e−12.
pub fn q2_root_bracket() -> (f64, f64) {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if q2_cubic(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi)
}

/// Unique real root of 5x³ − 2x² + 2x − 3.
pub fn q2_real_root() -> f64 {
    let (lo, hi) = q2_root_bracket();
    0.5 * (lo + hi)
}

/// Slope α of the real linear factor (αx − y) of the cubic 5x³ − 2x²y + 2xy² − 3y³.
pub fn q2_factor_slope() -> f64 {
    1.0 / q2_real_root()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub passed: bool,
    pub points: usize,
    pub worst_residual: f64,
    pub exact: bool,
}

type Q = BigRational;

fn q(v: i64) -> Q {
    Q::from_i64(v)
}

fn random_rational(rng: &mut ChaCha8Rng) -> Q {
    let num: i64 = rng.gen_range(-1000..=1000);
    let den: i64 = rng.gen_range(1..=97);
    Q::new(BigInt::from(num), BigInt::from(den))
}

fn abs_f64(v: &Q) -> f64 {
    v.abs().to_f64().unwrap_or(f64::INFINITY)
}

/// Number of random rational points used by each exact identity.
pub const IDENTITY_POINTS: usize = 64;

struct Checker<'a> {
    t: &'a PolyTables,
    rng: ChaCha8Rng,
    out: Vec<IdentityCheck>,
}

impl<'a> Checker<'a> {
    fn e(&self, id: PolyId, args: &[&Q]) -> Q {
        let args: Vec<Q> = args.iter().map(|a| (*a).clone()).collect();
        self.t.eval(id, &args).expect("arity fixed by construction")
    }

    /// Exact identity lhs(x, y, z) == rhs(x, y, z) at random rational points.
    fn exact(&mut self, name: &str, f: impl Fn(&Self, &Q, &Q, &Q) -> (Q, Q)) {
        let mut worst = Q::zero();
        for _ in 0..IDENTITY_POINTS {
            let (x, y, z) = (
                random_rational(&mut self.rng),
                random_rational(&mut self.rng),
                random_rational(&mut self.rng),
            );
            let (l, r) = f(self, &x, &y, &z);
            let d = (l - r).abs();
            if d > worst {
                worst = d;
            }
        }
        self.out.push(IdentityCheck {
            name: name.to_string(),
            passed: worst.is_zero(),
            points: IDENTITY_POINTS,
            worst_residual: abs_f64(&worst),
            exact: true,
        });
    }
}

/// Runs every registered polynomial identity against `tables`.
pub fn verify_identities_with(tables: &PolyTables) -> Vec<IdentityCheck> {
    use PolyId::*;
    let mut c = Checker {
        t: tables,
        rng: ChaCha8Rng::seed_from_u64(0x5eed_bac4),
        out: Vec::new(),
    };

    c.exact("p2_factorization", |c, x, y, _| {
        let s = x + y;
        (c.e(P2, &[x, y]), &s * &s * (x * x - x * y + y * y))
    });
    c.exact("q2_factorization", |c, x, y, _| {
        let cubic = q(5) * x * x * x - q(2) * x * x * y + q(2) * x * y * y - q(3) * y * y * y;
        (c.e(Q2, &[x, y]), (x + y) * cubic)
    });
    c.exact("p3_permutation_invariance", |c, x, y, z| {
        let base = c.e(P3, &[x, y, z]);
        let perms = [[x, z, y], [y, x, z], [y, z, x], [z, x, y], [z, y, x]];
        let worst = perms
            .iter()
            .map(|p| (c.e(P3, p) - &base).abs())
            .fold(Q::zero(), |a, b| if b > a { b } else { a });
        (worst, Q::zero())
    });
    c.exact("p3_sign_flip", |c, x, y, z| {
        (c.e(P3, &[&-x, &-y, &-z]), c.e(P3, &[x, y, z]))
    });
    c.exact("p3_zero_locus", |c, x, _, _| {
        let zero = Q::zero();
        let a = c.e(P3, &[x, x, &zero]).abs();
        let b = c.e(P3, &[x, x, x]).abs();
        let d = c.e(P3, &[&zero, x, x]).abs();
        (a + b + d, Q::zero())
    });
    c.exact("q3_last_two_symmetry", |c, x, y, z| {
        (c.e(Q3, &[x, y, z]), c.e(Q3, &[x, z, y]))
    });
    c.exact("s3comb_is_2p_plus_3q", |c, x, y, z| {
        (
            c.e(S3Comb, &[x, y, z]),
            q(2) * c.e(P3, &[x, y, z]) + q(3) * c.e(Q3, &[y, x, z]),
        )
    });
    c.exact("r3_is_half_p3_plus_3q3", |c, x, y, z| {
        (
            q(2) * c.e(R3, &[x, y, z]),
            c.e(P3, &[x, y, z]) + q(3) * c.e(Q3, &[x, y, z]),
        )
    });
    c.exact("q3_difference_expansion", |c, x, y, z| {
        let mx = -x;
        let lhs = c.e(Q3, &[z, &mx, y]) - c.e(Q3, &[y, &mx, z]);
        let bracket = q(4) * z * z * z + q(2) * z * z * y + q(2) * z * y * y + q(4) * y * y * y
            + x * (q(3) * z * z + q(2) * z * y + q(3) * y * y)
            + x * x * x;
        (lhs, q(2) * (z - y) * bracket)
    });
    c.exact("p3_plus_q3_expansion", |c, x, y, z| {
        let mx = -x;
        let lhs = c.e(P3, &[&mx, y, z]) + c.e(Q3, &[y, &mx, z]);
        let bracket = (z - y)
            * (z * z * z + z * z * y + z * y * y + q(3) * y * y * y
                + x * (z * z + z * y + q(2) * y * y))
            + x * x * x * (x + z);
        (lhs, -q(2) * bracket)
    });
    c.exact("q3_combination_expansion", |c, x, y, z| {
        let mx = -x;
        let lhs = q(3) * c.e(Q3, &[&mx, y, z]) + q(5) * c.e(Q3, &[y, &mx, z]);
        let bracket = (z - y)
            * (q(12) * z * z * z + q(5) * z * z * y + q(5) * z * y * y + q(8) * y * y * y
                + x * (q(9) * z * z + q(5) * z * y + q(6) * y * y))
            + x * x * (z * y + x * (q(3) * z - q(2) * y));
        (lhs, -q(2) * bracket)
    });
    c.exact("s_sl2_gap_factor", |c, x, y, z| {
        let mx = -x;
        let lhs = c.e(Q3, &[z, &mx, y]) * z - c.e(Q3, &[y, &mx, z]) * y;
        (lhs, c.e(SSl2, &[x, y, z]) * (z - y))
    });
    c.exact("u3_gap_factor", |c, a, b, cc| {
        let lhs = c.e(R3, &[cc, a, b]) * cc - c.e(R3, &[b, a, cc]) * b;
        (lhs, c.e(U3, &[a, b, cc]) * (cc - b))
    });
    c.exact("r3_vanishes_on_4a_eq_b_eq_c", |c, a, _, _| {
        let b = q(4) * a;
        let r1 = c.e(R3, &[a, &b, &b]).abs();
        let r2 = c.e(R3, &[&b, a, &b]).abs();
        let fixed = c.e(R3, &[&q(1), &q(4), &q(4)]).abs() + c.e(R3, &[&q(4), &q(1), &q(4)]).abs();
        (r1 + r2 + fixed, Q::zero())
    });
    c.exact("degree_four_homogeneity", |c, x, y, z| {
        let lambda = y.clone() + q(1001);
        let l4 = &lambda * &lambda * &lambda * &lambda;
        let mut worst = Q::zero();
        for id in PolyId::ALL {
            let (base, scaled) = if id.arity() == 2 {
                (c.e(id, &[x, z]), c.e(id, &[&(&lambda * x), &(&lambda * z)]))
            } else {
                (
                    c.e(id, &[x, y, z]),
                    c.e(id, &[&(&lambda * x), &(&lambda * y), &(&lambda * z)]),
                )
            };
            let d = (scaled - &l4 * base).abs();
            if d > worst {
                worst = d;
            }
        }
        (worst, Q::zero())
    });

    // The Q2 cubic factor is strictly increasing (15x² − 4x + 2 has negative
    // discriminant), so its real root is unique; record the sign pattern.
    let cubic_exact = |x: &Q| {
        let cubic = [q(5), q(-2), q(2), q(-3)];
        let l = Q::one();
        // Evaluate the cubic factor of the tables through Q2(x, 1) / (x + 1).
        let v = tables.eval(Q2, &[x.clone(), l.clone()]).unwrap() / (x + &l);
        let direct = ((&cubic[0] * x + &cubic[1]) * x + &cubic[2]) * x + &cubic[3];
        (v, direct)
    };
    let (lo, hi) = q2_root_bracket();
    let lo_q = Q::from_float(lo).expect("finite");
    let hi_q = Q::from_float(hi).expect("finite");
    let (v0, d0) = cubic_exact(&Q::zero());
    let (vl, dl) = cubic_exact(&lo_q);
    let (vh, dh) = cubic_exact(&hi_q);
    let passed = v0 == d0
        && vl == dl
        && vh == dh
        && v0.is_negative()
        && vl.is_negative()
        && vh.is_positive()
        && q(4 * 4) - q(4 * 15 * 2) < q(0);
    c.out.push(IdentityCheck {
        name: "q2_cubic_unique_real_root".into(),
        passed,
        points: 3,
        worst_residual: q2_cubic(q2_real_root()).abs(),
        exact: true,
    });

    // Nonnegativity of P3 cannot be checked exactly at finitely many points in
    // a meaningful way; sample it in floating point.
    let mut rng = ChaCha8Rng::seed_from_u64(0x9e3779b9);
    let p3t = tables.table(P3);
    let mut worst = 0.0_f64;
    for _ in 0..10_000 {
        let x: f64 = rng.gen_range(-10.0..10.0);
        let y: f64 = rng.gen_range(-10.0..10.0);
        let z: f64 = rng.gen_range(-10.0..10.0);
        let v = horner_f64(p3t, x, y, z);
        let scale = (x * x + y * y + z * z).powi(2);
        worst = worst.min(v / scale);
    }
    c.out.push(IdentityCheck {
        name: "p3_nonnegative_samples".into(),
        passed: worst >= -1e-12,
        points: 10_000,
        worst_residual: -worst.min(0.0),
        exact: false,
    });

    c.out
}

pub fn verify_identities() -> Vec<IdentityCheck> {
    verify_identities_with(&PolyTables::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(eval(PolyId::P2, &[1.0, 1.0]).unwrap(), 4.0);
        assert_eq!(eval(PolyId::R3, &[1.0, 4.0, 4.0]).unwrap(), 0.0);
        assert_eq!(eval(PolyId::R3, &[4.0, 1.0, 4.0]).unwrap(), 0.0);
        assert_eq!(eval(PolyId::Q3, &[1.0, 1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(eval(PolyId::P3, &[1.0, 1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(eval(PolyId::P3, &[1.0, 1.0, 1.0]).unwrap(), 0.0);
        let v: Q = eval(PolyId::P2, &[q(2), q(3)]).unwrap();
        assert_eq!(v, q(175));
        assert_eq!(q(25) * q(4 - 6 + 9), q(175));
    }

    #[test]
    fn arity_is_checked() {
        assert!(matches!(
            eval(PolyId::P3, &[1.0, 2.0]),
            Err(BachError::ArityMismatch { expected: 3, got: 2, .. })
        ));
        assert!(eval(PolyId::Q2, &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn fast_paths_match_tables() {
        let (x, y, z) = (0.37, -1.9, 2.6);
        let t = PolyTables::default();
        assert_eq!(p3(x, y, z), t.eval(PolyId::P3, &[x, y, z]).unwrap());
        assert_eq!(u3(x, y, z), t.eval(PolyId::U3, &[x, y, z]).unwrap());
        assert_eq!(q2(x, y), t.eval(PolyId::Q2, &[x, y]).unwrap());
    }

    #[test]
    fn q2_root_and_slope() {
        let (lo, hi) = q2_root_bracket();
        assert!(q2_cubic(lo) < 0.0 && q2_cubic(hi) > 0.0 && hi - lo <= 1e-12);
        let root = q2_real_root();
        assert!(q2_cubic(root).abs() <= 1e-10);
        assert!((root - 0.814049091136634).abs() < 1e-11);
        // The linear factor (αx − y) has α = 1/root ≈ 1.2284; Q2(1, y) changes
        // sign there, not on (1.224, 1.226).
        let alpha = q2_factor_slope();
        assert!(q2(1.0, 1.228) > 0.0 && q2(1.0, 1.229) < 0.0);
        assert!((1.228..1.229).contains(&alpha));
        assert!(q2(1.224, 1.0) > 0.0 && q2(1.226, 1.0) > 0.0);
    }

    #[test]
    fn all_identities_pass() {
        let report = verify_identities();
        for check in &report {
            assert!(check.passed, "{check:?}");
        }
        assert!(report.iter().filter(|c| c.exact).all(|c| c.points >= 3));
    }

    #[test]
    fn fault_injection_is_reported_by_name() {
        let report = verify_identities_with(&PolyTables::default().with_fault(PolyId::Q3, 1));
        let failed: Vec<_> = report.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        assert!(failed.contains(&"q3_difference_expansion"), "{failed:?}");
        let report = verify_identities_with(&PolyTables::default().with_fault(PolyId::P2, -1));
        assert!(report.iter().any(|c| c.name == "p2_factorization" && !c.passed));
    }

    fn rat() -> impl Strategy<Value = Q> {
        (-500i64..500, 1i64..60).prop_map(|(n, d)| Q::new(BigInt::from(n), BigInt::from(d)))
    }

    proptest! {
        #[test]
        fn homogeneous_of_degree_four(x in rat(), y in rat(), z in rat(), l in rat()) {
            let l4 = &l * &l * &l * &l;
            for id in PolyId::ALL {
                let args: Vec<Q> = [&x, &y, &z][..id.arity()].iter().map(|v| (*v).clone()).collect();
                let scaled: Vec<Q> = args.iter().map(|v| v * &l).collect();
                prop_assert_eq!(eval(id, &scaled).unwrap(), &l4 * eval(id, &args).unwrap());
            }
        }

        #[test]
        fn p3_symmetric_and_q3_symmetric_in_last_two(x in rat(), y in rat(), z in rat()) {
            let p = |a: &Q, b: &Q, c: &Q| eval(PolyId::P3, &[a.clone(), b.clone(), c.clone()]).unwrap();
            let base = p(&x, &y, &z);
            prop_assert_eq!(&p(&z, &x, &y), &base);
            prop_assert_eq!(&p(&y, &x, &z), &base);
            prop_assert_eq!(&p(&-x.clone(), &-y.clone(), &-z.clone()), &base);
            let qq = |a: &Q, b: &Q, c: &Q| eval(PolyId::Q3, &[a.clone(), b.clone(), c.clone()]).unwrap();
            prop_assert_eq!(qq(&x, &y, &z), qq(&x, &z, &y));
        }

        #[test]
        fn shifted_tables_agree_exactly(x in rat(), y in rat(), d in rat()) {
            let z = &y + &d;
            let val = |a: Arg| match a {
                Arg::X => x.clone(),
                Arg::NegX => -x.clone(),
                Arg::Y => y.clone(),
                Arg::Z => z.clone(),
            };
            let orders = [
                [Arg::X, Arg::Y, Arg::Z],
                [Arg::NegX, Arg::Y, Arg::Z],
                [Arg::Y, Arg::NegX, Arg::Z],
                [Arg::Z, Arg::NegX, Arg::Y],
                [Arg::Y, Arg::Z, Arg::X],
                [Arg::Z, Arg::X, Arg::Y],
            ];
            for d_tab in [P3_D, Q3_D, S_SL2_D] {
                for args in orders {
                    let direct = horner(&d_tab, &val(args[0]), &val(args[1]), &val(args[2]));
                    prop_assert_eq!(horner(&shift(&d_tab, args), &x, &y, &d), direct);
                }
            }
        }

        #[test]
        fn p3_nonnegative(x in -10.0f64..10.0, y in -10.0f64..10.0, z in -10.0f64..10.0) {
            let scale = (x * x + y * y + z * z).powi(2);
            prop_assert!(p3(x, y, z) >= -1e-12 * scale);
        }
    }
}
