//! Complex vectors of transmit-antenna dimension.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest antenna count the two-user model supports.
pub const MIN_ANTENNAS: usize = 2;

/// A finite complex column vector with at least [`MIN_ANTENNAS`] entries.
///
/// Serialized as a list of `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct ComplexVec(Vec<Complex64>);

impl ComplexVec {
    pub fn new(entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() < MIN_ANTENNAS {
            return Err(Error::Invalid(format!(
                "vector needs at least {MIN_ANTENNAS} entries, got {}",
                entries.len()
            )));
        }
        if let Some(i) = entries.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Invalid(format!("entry {i} is not finite")));
        }
        Ok(Self(entries))
    }

    /// Builds a vector from real entries.
    pub fn from_real(entries: &[f64]) -> Result<Self> {
        Self::new(entries.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `self^H other`, i.e. `sum_i conj(self_i) * other_i`.
    pub fn dot(&self, other: &ComplexVec) -> Result<Complex64> {
        inner_product(self, other)
    }

    pub fn scaled(&self, factor: f64) -> ComplexVec {
        ComplexVec(self.0.iter().map(|z| z * factor).collect())
    }

    /// Unit-norm copy; `None` for the zero vector.
    pub fn normalized(&self) -> Option<ComplexVec> {
        let n = self.norm();
        (n > 0.0).then(|| self.scaled(1.0 / n))
    }

    /// `self + other * coeff` for equal-length vectors.
    pub(crate) fn add_scaled(&self, other: &ComplexVec, coeff: Complex64) -> ComplexVec {
        debug_assert_eq!(self.len(), other.len());
        ComplexVec(self.0.iter().zip(&other.0).map(|(a, b)| a + b * coeff).collect())
    }
}

impl TryFrom<Vec<[f64; 2]>> for ComplexVec {
    type Error = Error;

    fn try_from(pairs: Vec<[f64; 2]>) -> Result<Self> {
        Self::new(pairs.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
    }
}

impl From<ComplexVec> for Vec<[f64; 2]> {
    fn from(v: ComplexVec) -> Self {
        v.0.into_iter().map(|z| [z.re, z.im]).collect()
    }
}

/// Conjugate-linear inner product `a^H b`.
pub fn inner_product(a: &ComplexVec, b: &ComplexVec) -> Result<Complex64> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(a.0.iter().zip(&b.0).map(|(x, y)| x.conj() * y).sum())
}
