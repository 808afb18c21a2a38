//! Geometry tags and the small value types shared by every module.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{BachError, Result};

/// The nine universal covers of 1×3 products plus the six 2×2 product families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelGeometry {
    R3,
    Nil,
    Solv,
    E2,
    Sl2,
    S3,
    H3,
    Rxs2,
    Rxh2,
    R2xr2,
    R2xs2,
    R2xh2,
    S2xs2,
    S2xh2,
    H2xh2,
}

/// Sign of the curvature of a two-dimensional constant-curvature factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceKind {
    Flat,
    Sphere,
    Hyperbolic,
}

impl SurfaceKind {
    pub fn sign(self) -> f64 {
        match self {
            SurfaceKind::Flat => 0.0,
            SurfaceKind::Sphere => 1.0,
            SurfaceKind::Hyperbolic => -1.0,
        }
    }
}

impl ModelGeometry {
    pub const ALL: [ModelGeometry; 15] = [
        ModelGeometry::R3,
        ModelGeometry::Nil,
        ModelGeometry::Solv,
        ModelGeometry::E2,
        ModelGeometry::Sl2,
        ModelGeometry::S3,
        ModelGeometry::H3,
        ModelGeometry::Rxs2,
        ModelGeometry::Rxh2,
        ModelGeometry::R2xr2,
        ModelGeometry::R2xs2,
        ModelGeometry::R2xh2,
        ModelGeometry::S2xs2,
        ModelGeometry::S2xh2,
        ModelGeometry::H2xh2,
    ];

    pub const LIE_GROUPS: [ModelGeometry; 6] = [
        ModelGeometry::R3,
        ModelGeometry::Nil,
        ModelGeometry::Solv,
        ModelGeometry::E2,
        ModelGeometry::Sl2,
        ModelGeometry::S3,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            ModelGeometry::R3 => "r3",
            ModelGeometry::Nil => "nil",
            ModelGeometry::Solv => "solv",
            ModelGeometry::E2 => "e2",
            ModelGeometry::Sl2 => "sl2",
            ModelGeometry::S3 => "s3",
            ModelGeometry::H3 => "h3",
            ModelGeometry::Rxs2 => "rxs2",
            ModelGeometry::Rxh2 => "rxh2",
            ModelGeometry::R2xr2 => "r2xr2",
            ModelGeometry::R2xs2 => "r2xs2",
            ModelGeometry::R2xh2 => "r2xh2",
            ModelGeometry::S2xs2 => "s2xs2",
            ModelGeometry::S2xh2 => "s2xh2",
            ModelGeometry::H2xh2 => "h2xh2",
        }
    }

    /// Diagonal of the matrix E for the six unimodular Lie groups.
    pub fn bianchi(self) -> Option<BianchiMatrix> {
        let e = match self {
            ModelGeometry::R3 => [0.0, 0.0, 0.0],
            ModelGeometry::Nil => [1.0, 0.0, 0.0],
            ModelGeometry::Solv => [-1.0, 1.0, 0.0],
            ModelGeometry::E2 => [-1.0, -1.0, 0.0],
            ModelGeometry::Sl2 => [-1.0, 1.0, 1.0],
            ModelGeometry::S3 => [1.0, 1.0, 1.0],
            _ => return None,
        };
        Some(BianchiMatrix { e })
    }

    pub fn is_lie_group(self) -> bool {
        self.bianchi().is_some()
    }

    /// The two surface factors when the geometry is handled as a 2×2 product.
    /// ℝ×S² and ℝ×ℍ² are routed here as ℝ²×S² and ℝ²×ℍ².
    pub fn product_factors(self) -> Option<(SurfaceKind, SurfaceKind)> {
        use SurfaceKind::*;
        match self {
            ModelGeometry::R2xr2 => Some((Flat, Flat)),
            ModelGeometry::Rxs2 | ModelGeometry::R2xs2 => Some((Flat, Sphere)),
            ModelGeometry::Rxh2 | ModelGeometry::R2xh2 => Some((Flat, Hyperbolic)),
            ModelGeometry::S2xs2 => Some((Sphere, Sphere)),
            ModelGeometry::S2xh2 => Some((Sphere, Hyperbolic)),
            ModelGeometry::H2xh2 => Some((Hyperbolic, Hyperbolic)),
            _ => None,
        }
    }

    /// Families whose initial data may be given as two scales (f1, f2).
    pub fn is_pure_2x2(self) -> bool {
        matches!(
            self,
            ModelGeometry::R2xr2
                | ModelGeometry::R2xs2
                | ModelGeometry::R2xh2
                | ModelGeometry::S2xs2
                | ModelGeometry::S2xh2
                | ModelGeometry::H2xh2
        )
    }
}

impl fmt::Display for ModelGeometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ModelGeometry {
    type Err = BachError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        ModelGeometry::ALL
            .iter()
            .copied()
            .find(|g| g.tag() == key)
            .ok_or_else(|| BachError::Domain(format!("unknown geometry tag `{s}`")))
    }
}

/// Diagonal entries of the 3×3 matrix E with [e_i, e_j] = ε_{ijs} E^{ks} e_k.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BianchiMatrix {
    pub e: [f64; 3],
}

/// Diagonal symmetric 2-tensor in a diagonalizing frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sym2Diag<const N: usize>(pub [f64; N]);

impl<const N: usize> Serialize for Sym2Diag<N> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.as_slice().serialize(s)
    }
}

impl<'de, const N: usize> Deserialize<'de> for Sym2Diag<N> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        let a: [f64; N] = v
            .try_into()
            .map_err(|_| serde::de::Error::custom(format!("expected {N} components")))?;
        Ok(Sym2Diag(a))
    }
}

pub type Sym3 = Sym2Diag<3>;
pub type Sym4 = Sym2Diag<4>;

impl<const N: usize> Sym2Diag<N> {
    pub fn zero() -> Self {
        Sym2Diag([0.0; N])
    }

    pub fn from_array(a: [f64; N]) -> Self {
        Sym2Diag(a)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

impl<const N: usize> std::ops::Index<usize> for Sym2Diag<N> {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

fn check_positive(g: &[f64]) -> Result<()> {
    for (i, v) in g.iter().enumerate() {
        if !(v.is_finite() && *v > 0.0) {
            return Err(BachError::Domain(format!(
                "metric component {i} must be positive and finite, got {v}"
            )));
        }
    }
    Ok(())
}

/// Left-invariant metric on the three-dimensional slice: (g11, g22, g33).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagonalMetric3(pub(crate) [f64; 3]);

impl DiagonalMetric3 {
    pub fn new(g: [f64; 3]) -> Result<Self> {
        check_positive(&g)?;
        Ok(DiagonalMetric3(g))
    }

    pub fn identity() -> Self {
        DiagonalMetric3([1.0; 3])
    }

    pub fn components(&self) -> [f64; 3] {
        self.0
    }

    pub fn det(&self) -> f64 {
        self.0.iter().product()
    }
}

/// Full product metric (g00, g11, g22, g33).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagonalMetric4(pub(crate) [f64; 4]);

impl DiagonalMetric4 {
    pub fn new(g: [f64; 4]) -> Result<Self> {
        check_positive(&g)?;
        Ok(DiagonalMetric4(g))
    }

    pub fn identity() -> Self {
        DiagonalMetric4([1.0; 4])
    }

    pub fn components(&self) -> [f64; 4] {
        self.0
    }

    pub fn det(&self) -> f64 {
        self.0.iter().product()
    }

    pub fn slice(&self) -> DiagonalMetric3 {
        DiagonalMetric3([self.0[1], self.0[2], self.0[3]])
    }
}

/// Relative equality used by every symbolic decision on metric components.
pub fn rel_eq(a: f64, b: f64, rtol: f64) -> bool {
    (a - b).abs() <= rtol * a.abs().max(b.abs())
}
