//! Sparse linear operators tagged with integration weights.
//!
//! The adjoint with respect to the weighted inner products is
//! `A* = diag(w_in)^-1 A^T diag(w_out)`. Taking an adjoint only flips a flag
//! (the entries are reused), so `adjoint(adjoint(A))` returns the original
//! entries bit for bit and composite operators like `GRAD = -DIV*` satisfy
//! `DIV + GRAD* = 0` exactly. Entries are materialized lazily when an
//! operator enters a sum or a product.

use std::io::Write;
use std::sync::Arc;

use crate::{Error, Result};

/// Shared integration-weight vector.
pub type Weights = Arc<Vec<f64>>;

pub fn unit_weights(n: usize) -> Weights {
    Arc::new(vec![1.0; n])
}

fn check_weights(w: &Weights, n: usize, context: &str) -> Result<()> {
    if w.len() != n {
        return Err(Error::SizeMismatch {
            context: format!("{context} weights"),
            expected: n,
            got: w.len(),
        });
    }
    if let Some((i, &v)) = w.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonPositive {
            what: "integration weight",
            index: i,
            value: v,
        });
    }
    Ok(())
}

/// Sparse operator between weighted spaces.
#[derive(Debug, Clone)]
pub struct LinOp {
    // CSR storage of the *base* matrix (before the adjoint flag).
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
    w_out: Weights,
    w_in: Weights,
    /// Apply as the weighted adjoint of the stored matrix.
    adj: bool,
    /// Scalar multiplier folded into application.
    scale: f64,
}

impl LinOp {
    /// Build from (row, col, value) triplets. Duplicate entries are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
        w_out: Weights,
        w_in: Weights,
    ) -> Result<LinOp> {
        check_weights(&w_out, nrows, "codomain")?;
        check_weights(&w_in, ncols, "domain")?;
        let mut buckets: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nrows];
        for &(r, c, v) in triplets {
            debug_assert!(r < nrows && c < ncols);
            buckets[r].push((c, v));
        }
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in &mut buckets {
            row.sort_unstable_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for &(c, v) in row.iter() {
                if last == Some(c) {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    values.push(v);
                    last = Some(c);
                }
            }
            indptr.push(indices.len());
        }
        Ok(LinOp {
            nrows,
            ncols,
            indptr,
            indices,
            values,
            w_out,
            w_in,
            adj: false,
            scale: 1.0,
        })
    }

    pub fn identity(n: usize, w: Weights) -> Result<LinOp> {
        let trips: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        LinOp::from_triplets(n, n, &trips, w.clone(), w)
    }

    /// Diagonal operator between equally-sized spaces.
    pub fn diag(d: &[f64], w_out: Weights, w_in: Weights) -> Result<LinOp> {
        let trips: Vec<_> = d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        LinOp::from_triplets(d.len(), d.len(), &trips, w_out, w_in)
    }

    /// Logical row count (respects the adjoint flag).
    pub fn rows(&self) -> usize {
        if self.adj {
            self.ncols
        } else {
            self.nrows
        }
    }

    pub fn cols(&self) -> usize {
        if self.adj {
            self.nrows
        } else {
            self.ncols
        }
    }

    pub fn weights_out(&self) -> &Weights {
        if self.adj {
            &self.w_in
        } else {
            &self.w_out
        }
    }

    pub fn weights_in(&self) -> &Weights {
        if self.adj {
            &self.w_out
        } else {
            &self.w_in
        }
    }

    /// Weighted adjoint. Only flips a flag; involutive bit for bit.
    pub fn adjoint(&self) -> LinOp {
        let mut out = self.clone();
        out.adj = !out.adj;
        out
    }

    pub fn scaled(&self, s: f64) -> LinOp {
        let mut out = self.clone();
        out.scale *= s;
        out
    }

    /// Apply to a flat vector.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols(), "LinOp::apply dimension mismatch");
        if !self.adj {
            let mut y = vec![0.0; self.nrows];
            for r in 0..self.nrows {
                let mut acc = 0.0;
                for k in self.indptr[r]..self.indptr[r + 1] {
                    acc += self.values[k] * x[self.indices[k]];
                }
                y[r] = self.scale * acc;
            }
            y
        } else {
            // y = scale * w_in^-1 (M^T (w_out o x))
            let mut y = vec![0.0; self.ncols];
            for r in 0..self.nrows {
                let xr = self.w_out[r] * x[r];
                if xr == 0.0 {
                    continue;
                }
                for k in self.indptr[r]..self.indptr[r + 1] {
                    y[self.indices[k]] += self.values[k] * xr;
                }
            }
            for (yi, wi) in y.iter_mut().zip(self.w_in.iter()) {
                *yi = self.scale * *yi / wi;
            }
            y
        }
    }

    /// Apply the plain structural transpose `M^T x` (no weights, no flag).
    pub(crate) fn apply_structural_transpose(&self, x: &[f64]) -> Vec<f64> {
        debug_assert!(!self.adj, "structural transpose of a flagged adjoint");
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for r in 0..self.nrows {
            let xr = self.scale * x[r];
            if xr == 0.0 {
                continue;
            }
            for k in self.indptr[r]..self.indptr[r + 1] {
                y[self.indices[k]] += self.values[k] * xr;
            }
        }
        y
    }

    /// Resolve the adjoint flag and scale into explicit entries.
    pub fn materialize(&self) -> LinOp {
        if !self.adj && self.scale == 1.0 {
            return self.clone();
        }
        if !self.adj {
            let mut out = self.clone();
            for v in &mut out.values {
                *v *= out.scale;
            }
            out.scale = 1.0;
            return out;
        }
        // Entries of diag(w_in)^-1 M^T diag(w_out), scaled.
        let mut trips = Vec::with_capacity(self.values.len());
        for r in 0..self.nrows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let c = self.indices[k];
                trips.push((
                    c,
                    r,
                    self.scale * self.values[k] * self.w_out[r] / self.w_in[c],
                ));
            }
        }
        LinOp::from_triplets(
            self.ncols,
            self.nrows,
            &trips,
            self.w_in.clone(),
            self.w_out.clone(),
        )
        .expect("weights already validated")
    }

    /// Materialized structural transpose; swaps the weight tags.
    pub fn transpose_structural(&self) -> LinOp {
        let m = self.materialize();
        let mut trips = Vec::with_capacity(m.values.len());
        for r in 0..m.nrows {
            for k in m.indptr[r]..m.indptr[r + 1] {
                trips.push((m.indices[k], r, m.values[k]));
            }
        }
        LinOp::from_triplets(m.ncols, m.nrows, &trips, m.w_in.clone(), m.w_out.clone())
            .expect("weights already validated")
    }

    /// `self * rhs`.
    pub fn matmul(&self, rhs: &LinOp) -> LinOp {
        assert_eq!(self.cols(), rhs.rows(), "LinOp::matmul dimension mismatch");
        let a = self.materialize();
        let b = rhs.materialize();
        let mut indptr = Vec::with_capacity(a.nrows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        let mut acc = vec![0.0; b.ncols];
        let mut touched: Vec<usize> = Vec::new();
        for r in 0..a.nrows {
            for k in a.indptr[r]..a.indptr[r + 1] {
                let mid = a.indices[k];
                let av = a.values[k];
                for k2 in b.indptr[mid]..b.indptr[mid + 1] {
                    let c = b.indices[k2];
                    if acc[c] == 0.0 && !touched.contains(&c) {
                        touched.push(c);
                    }
                    acc[c] += av * b.values[k2];
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                indices.push(c);
                values.push(acc[c]);
                acc[c] = 0.0;
            }
            touched.clear();
            indptr.push(indices.len());
        }
        LinOp {
            nrows: a.nrows,
            ncols: b.ncols,
            indptr,
            indices,
            values,
            w_out: a.w_out.clone(),
            w_in: b.w_in.clone(),
            adj: false,
            scale: 1.0,
        }
    }

    /// `self + rhs`.
    pub fn add(&self, rhs: &LinOp) -> LinOp {
        assert_eq!(self.rows(), rhs.rows());
        assert_eq!(self.cols(), rhs.cols());
        let a = self.materialize();
        let b = rhs.materialize();
        let mut trips = Vec::with_capacity(a.values.len() + b.values.len());
        for m in [&a, &b] {
            for r in 0..m.nrows {
                for k in m.indptr[r]..m.indptr[r + 1] {
                    trips.push((r, m.indices[k], m.values[k]));
                }
            }
        }
        LinOp::from_triplets(a.nrows, a.ncols, &trips, a.w_out.clone(), a.w_in.clone())
            .expect("weights already validated")
    }

    pub fn sub(&self, rhs: &LinOp) -> LinOp {
        self.add(&rhs.scaled(-1.0))
    }

    /// Left multiply by `diag(d)`.
    pub fn scale_rows(&self, d: &[f64]) -> LinOp {
        let mut m = self.materialize();
        assert_eq!(d.len(), m.nrows);
        for r in 0..m.nrows {
            for k in m.indptr[r]..m.indptr[r + 1] {
                m.values[k] *= d[r];
            }
        }
        m
    }

    /// Right multiply by `diag(d)`.
    pub fn scale_cols(&self, d: &[f64]) -> LinOp {
        let mut m = self.materialize();
        assert_eq!(d.len(), m.ncols);
        for k in 0..m.values.len() {
            m.values[k] *= d[m.indices[k]];
        }
        m
    }

    /// Re-tag the weight vectors (entries unchanged).
    pub fn with_weights(&self, w_out: Weights, w_in: Weights) -> Result<LinOp> {
        let mut m = self.materialize();
        check_weights(&w_out, m.nrows, "codomain")?;
        check_weights(&w_in, m.ncols, "domain")?;
        m.w_out = w_out;
        m.w_in = w_in;
        Ok(m)
    }

    /// Horizontal block `[a | b]`.
    pub fn hstack(a: &LinOp, b: &LinOp, w_in: Weights) -> Result<LinOp> {
        assert_eq!(a.rows(), b.rows());
        let (am, bm) = (a.materialize(), b.materialize());
        let mut trips = Vec::with_capacity(am.values.len() + bm.values.len());
        for r in 0..am.nrows {
            for k in am.indptr[r]..am.indptr[r + 1] {
                trips.push((r, am.indices[k], am.values[k]));
            }
            for k in bm.indptr[r]..bm.indptr[r + 1] {
                trips.push((r, am.ncols + bm.indices[k], bm.values[k]));
            }
        }
        LinOp::from_triplets(
            am.nrows,
            am.ncols + bm.ncols,
            &trips,
            am.w_out.clone(),
            w_in,
        )
    }

    /// Vertical block `[a; b]`.
    pub fn vstack(a: &LinOp, b: &LinOp, w_out: Weights) -> Result<LinOp> {
        assert_eq!(a.cols(), b.cols());
        let (am, bm) = (a.materialize(), b.materialize());
        let mut trips = Vec::with_capacity(am.values.len() + bm.values.len());
        for r in 0..am.nrows {
            for k in am.indptr[r]..am.indptr[r + 1] {
                trips.push((r, am.indices[k], am.values[k]));
            }
        }
        for r in 0..bm.nrows {
            for k in bm.indptr[r]..bm.indptr[r + 1] {
                trips.push((am.nrows + r, bm.indices[k], bm.values[k]));
            }
        }
        LinOp::from_triplets(
            am.nrows + bm.nrows,
            am.ncols,
            &trips,
            w_out,
            am.w_in.clone(),
        )
    }

    /// Materialized logical entries `(row, col, value)`, row-major sorted.
    pub fn entries(&self) -> Vec<(usize, usize, f64)> {
        let m = self.materialize();
        let mut out = Vec::with_capacity(m.values.len());
        for r in 0..m.nrows {
            for k in m.indptr[r]..m.indptr[r + 1] {
                out.push((r, m.indices[k], m.values[k]));
            }
        }
        out
    }

    /// Largest absolute difference between entries of two operators.
    pub fn max_entry_diff(&self, other: &LinOp) -> f64 {
        let d = self.sub(other);
        d.values
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    /// Infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        let m = self.materialize();
        (0..m.nrows)
            .map(|r| {
                m.values[m.indptr[r]..m.indptr[r + 1]]
                    .iter()
                    .map(|v| v.abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let m = self.materialize();
        (0..m.nrows)
            .map(|r| m.values[m.indptr[r]..m.indptr[r + 1]].iter().sum())
            .collect()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Coordinate text dump: `row col value` per line.
    pub fn write_coo<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (r, c, v) in self.entries() {
            writeln!(out, "{r} {c} {v:.17e}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::weighted_inner;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_op(seed: u64, n: usize) -> (LinOp, Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w_out: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..2.0)).collect();
        let w_in: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..2.0)).collect();
        let mut trips = Vec::new();
        for r in 0..n {
            for _ in 0..3 {
                trips.push((r, rng.gen_range(0..n), rng.gen_range(-1.0..1.0)));
            }
        }
        let op = LinOp::from_triplets(
            n,
            n,
            &trips,
            Arc::new(w_out.clone()),
            Arc::new(w_in.clone()),
        )
        .unwrap();
        (op, w_out, w_in)
    }

    #[test]
    fn identity_adjoint_is_identity() {
        let w = Arc::new(vec![0.7; 5]);
        let id = LinOp::identity(5, w).unwrap();
        let x = vec![1.0, -2.0, 3.0, 0.5, 0.0];
        assert_eq!(id.adjoint().apply(&x), x);
    }

    #[test]
    fn adjoint_satisfies_inner_product_identity() {
        let (a, w_out, w_in) = random_op(12, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..5 {
            let x: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lhs = weighted_inner(&x, &w_out, &a.apply(&y));
            let rhs = weighted_inner(&a.adjoint().apply(&x), &w_in, &y);
            assert_relative_eq!(lhs, rhs, max_relative = 1e-13, epsilon = 1e-15);
        }
    }

    #[test]
    fn adjoint_is_involutive_exactly() {
        let (a, _, _) = random_op(5, 9);
        let back = a.adjoint().adjoint();
        assert_eq!(a.entries(), back.entries());
        // The materialized double adjoint matches too (weights cancel).
        let mat = a.adjoint().materialize().adjoint().materialize();
        for ((r1, c1, v1), (r2, c2, v2)) in a.entries().iter().zip(mat.entries().iter()) {
            assert_eq!((r1, c1), (r2, c2));
            assert_relative_eq!(v1, v2, max_relative = 1e-15);
        }
    }

    #[test]
    fn rejects_non_positive_weights() {
        let bad = Arc::new(vec![1.0, 0.0]);
        let err = LinOp::identity(2, bad).unwrap_err();
        assert!(matches!(err, crate::Error::NonPositive { .. }));
    }

    #[test]
    fn matmul_and_add_against_dense() {
        let (a, _, w_in) = random_op(3, 8);
        let (b, _, _) = random_op(4, 8);
        let b = b.with_weights(Arc::new(w_in.to_vec()), b.weights_in().clone()).unwrap();
        let prod = a.matmul(&b);
        let sum = a.add(&b);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let via_chain = a.apply(&b.apply(&x));
        assert_relative_eq!(
            prod.apply(&x).as_slice(),
            via_chain.as_slice(),
            max_relative = 1e-12,
            epsilon = 1e-14
        );
        let via_sum: Vec<f64> = a
            .apply(&x)
            .iter()
            .zip(b.apply(&x))
            .map(|(p, q)| p + q)
            .collect();
        assert_relative_eq!(
            sum.apply(&x).as_slice(),
            via_sum.as_slice(),
            max_relative = 1e-12,
            epsilon = 1e-14
        );
    }

    #[test]
    fn structural_transpose_apply_matches_materialized() {
        let (a, _, _) = random_op(21, 7);
        let x: Vec<f64> = (0..7).map(|i| i as f64 - 3.0).collect();
        let yt = a.apply_structural_transpose(&x);
        let t = a.transpose_structural();
        assert_relative_eq!(
            t.apply(&x).as_slice(),
            yt.as_slice(),
            max_relative = 1e-13,
            epsilon = 1e-15
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn adjoint_identity_random(seed in 0u64..1000) {
            let (a, w_out, w_in) = random_op(seed, 10);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
            let x: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lhs = weighted_inner(&x, &w_out, &a.apply(&y));
            let rhs = weighted_inner(&a.adjoint().apply(&x), &w_in, &y);
            prop_assert!((lhs - rhs).abs() <= 1e-13 * (1.0 + lhs.abs().max(rhs.abs())));
        }
    }
}
