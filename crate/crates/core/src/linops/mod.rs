//! Weighted linear algebra: inner products, sparse operators with weighted
//! adjoints, interpolation and difference matrices, differentiation weights.

mod alpha;
mod diff;
mod interp;
mod linop;

pub use alpha::alpha_coefficients;
pub use diff::{build_diff_set, DiffSet};
pub use interp::{build_interp_set, ConstraintPolicy, InterpSet};
pub use linop::{unit_weights, LinOp, Weights};

use crate::field::{CellField, StagVecField};
use crate::grid::StaggeredGrid;
use crate::{Error, Result};

/// `sum_i a_i w_i b_i`.
pub fn weighted_inner(a: &[f64], w: &[f64], b: &[f64]) -> f64 {
    debug_assert!(a.len() == w.len() && b.len() == w.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * w[i] * b[i];
    }
    acc
}

/// Scalar product of two cell fields, `<a, b>_c = sum a_i dVc_i b_i`.
pub fn inner_c(a: &CellField, b: &CellField, grid: &StaggeredGrid) -> Result<f64> {
    let m = grid.num_cells();
    for (len, name) in [(a.len(), "a"), (b.len(), "b")] {
        if len != m {
            return Err(Error::SizeMismatch {
                context: format!("inner_c field {name}"),
                expected: m,
                got: len,
            });
        }
    }
    Ok(weighted_inner(a, &grid.dvc, b))
}

/// Scalar product of two staggered vector fields,
/// `<v, w>_v = sum vx dVe wx + sum vy dVn wy`.
pub fn inner_v(v: &StagVecField, w: &StagVecField, grid: &StaggeredGrid) -> Result<f64> {
    let m = grid.num_cells();
    for (len, name) in [(v.len(), "v"), (w.len(), "w")] {
        if len != m {
            return Err(Error::SizeMismatch {
                context: format!("inner_v field {name}"),
                expected: m,
                got: len,
            });
        }
    }
    Ok(weighted_inner(&v.x, &grid.dve, &w.x) + weighted_inner(&v.y, &grid.dvn, &w.y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::MappingSpec;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unit_field_integrates_to_domain_volume() {
        let grid = StaggeredGrid::build(&MappingSpec::uniform(1.0), 8, 8, 2).unwrap();
        let one = grid.c1();
        assert_relative_eq!(inner_c(&one, &one, &grid).unwrap(), 1.0, max_relative = 1e-13);
    }

    #[test]
    fn inner_products_match_brute_force_loops() {
        // Independent oracle: explicit (ix, iy)-indexed summation.
        let grid =
            StaggeredGrid::build(&MappingSpec::sinusoidal_skew(1.0, 0.08, 0.05), 8, 8, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = grid.num_cells();
        let a = CellField((0..m).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let b = CellField((0..m).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let mut oracle = 0.0;
        for iy in 0..grid.my {
            for ix in 0..grid.mx {
                let i = ix + grid.mx * iy;
                oracle += a[i] * grid.dvc[i] * b[i];
            }
        }
        let got = inner_c(&a, &b, &grid).unwrap();
        assert_relative_eq!(got, oracle, max_relative = 1e-15);
        // Symmetry.
        assert_eq!(got, inner_c(&b, &a, &grid).unwrap());

        let v = StagVecField {
            x: (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            y: (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        };
        let w = StagVecField {
            x: (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            y: (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        };
        let mut oracle_v = 0.0;
        for i in 0..m {
            oracle_v += v.x[i] * grid.dve[i] * w.x[i] + v.y[i] * grid.dvn[i] * w.y[i];
        }
        assert_relative_eq!(inner_v(&v, &w, &grid).unwrap(), oracle_v, max_relative = 1e-15);
    }

    #[test]
    fn size_mismatch_is_reported() {
        let grid = StaggeredGrid::build(&MappingSpec::uniform(1.0), 4, 4, 2).unwrap();
        let short = CellField::zeros(7);
        assert!(inner_c(&short, &grid.c1(), &grid).is_err());
    }
}
