//! Discrete field containers.
//!
//! All point families (cell centers `c`, east faces `e`, north faces `n`)
//! carry `mx * my` samples indexed `i = ix + mx * iy` with periodic wrap.

use serde::{Deserialize, Serialize};

/// Scalar samples on the pressure (cell-center) points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellField(pub Vec<f64>);

impl CellField {
    pub fn zeros(n: usize) -> Self {
        CellField(vec![0.0; n])
    }

    pub fn constant(n: usize, value: f64) -> Self {
        CellField(vec![value; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Apply `f` elementwise.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> CellField {
        CellField(self.0.iter().map(|&x| f(x)).collect())
    }
}

impl std::ops::Deref for CellField {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::DerefMut for CellField {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// Paired scalar samples on the east and north face points.
///
/// This is the operand of the scalar advection operator: a scalar quantity
/// sampled on the whole velocity grid rather than at cell centers.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceField {
    pub e: Vec<f64>,
    pub n: Vec<f64>,
}

impl FaceField {
    pub fn constant(n: usize, value: f64) -> Self {
        FaceField {
            e: vec![value; n],
            n: vec![value; n],
        }
    }

    /// Concatenated `[e; n]` layout used by the operators.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = self.e.clone();
        out.extend_from_slice(&self.n);
        out
    }

    pub fn from_flat(flat: &[f64]) -> Self {
        let m = flat.len() / 2;
        FaceField {
            e: flat[..m].to_vec(),
            n: flat[m..].to_vec(),
        }
    }
}

/// Staggered vector field: x-component at e-points, y-component at n-points,
/// both expressed in the local grid orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagVecField {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl StagVecField {
    pub fn zeros(n: usize) -> Self {
        StagVecField {
            x: vec![0.0; n],
            y: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Concatenated `[x; y]` layout used by the operators.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = self.x.clone();
        out.extend_from_slice(&self.y);
        out
    }

    pub fn from_flat(flat: &[f64]) -> Self {
        let m = flat.len() / 2;
        StagVecField {
            x: flat[..m].to_vec(),
            y: flat[m..].to_vec(),
        }
    }
}

/// `a + s * b` elementwise.
pub(crate) fn axpy(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x + s * y).collect()
}

/// Elementwise product.
pub(crate) fn hadamard(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_round_trip() {
        let v = StagVecField {
            x: vec![1.0, 2.0, 3.0],
            y: vec![-1.0, 0.5, 4.0],
        };
        assert_eq!(StagVecField::from_flat(&v.to_flat()), v);

        let f = FaceField {
            e: vec![0.25, -0.125],
            n: vec![7.0, 8.0],
        };
        assert_eq!(FaceField::from_flat(&f.to_flat()), f);
    }
}
