//! Elementary staggered difference matrices.
//!
//! For each half-integer offset `eps`, `DIFFX(eps)` takes face fluxes to
//! cell centers: `(DIFFX(eps) F)_i = F_{i + eps - 1/2} - F_{i - eps - 1/2}`
//! with periodic wrap in `ix`; `DIFFY` works the same along `iy` (stride
//! `mx`). Every row holds exactly one `+1` and one `-1`, so columns sum to
//! zero and `1^T DIFF = 0` exactly — the telescoping that makes the
//! divergence integrate to zero.

use crate::grid::StaggeredGrid;
use crate::linops::{alpha_coefficients, LinOp};
use crate::Result;

/// Difference matrices and stencil weights for one grid and order.
#[derive(Debug, Clone)]
pub struct DiffSet {
    /// `DIFFX(eps)` per eps index (`eps = index + 1/2`), e-fluxes to cells.
    pub diffx: Vec<LinOp>,
    /// `DIFFY(eps)` per eps index, n-fluxes to cells.
    pub diffy: Vec<LinOp>,
    /// Differentiation weights `alpha(eps)`.
    pub alpha: Vec<f64>,
}

pub fn build_diff_set(grid: &StaggeredGrid, order: usize) -> Result<DiffSet> {
    let alpha = alpha_coefficients(order)?;
    let (mx, my) = (grid.mx as i64, grid.my as i64);
    let m = grid.num_cells();
    let mut diffx = Vec::with_capacity(alpha.len());
    let mut diffy = Vec::with_capacity(alpha.len());
    for k in 0..alpha.len() as i64 {
        // eps = k + 1/2: +1 at offset k, -1 at offset -(k+1).
        let mut tx = Vec::with_capacity(2 * m);
        let mut ty = Vec::with_capacity(2 * m);
        for iy in 0..my {
            for ix in 0..mx {
                let i = (ix + mx * iy) as usize;
                let cx = |jx: i64| (jx.rem_euclid(mx) + mx * iy) as usize;
                let cy = |jy: i64| (ix + mx * jy.rem_euclid(my)) as usize;
                tx.push((i, cx(ix + k), 1.0));
                tx.push((i, cx(ix - k - 1), -1.0));
                ty.push((i, cy(iy + k), 1.0));
                ty.push((i, cy(iy - k - 1), -1.0));
            }
        }
        diffx.push(LinOp::from_triplets(
            m,
            m,
            &tx,
            grid.dvc.clone(),
            grid.dve.clone(),
        )?);
        diffy.push(LinOp::from_triplets(
            m,
            m,
            &ty,
            grid.dvc.clone(),
            grid.dvn.clone(),
        )?);
    }
    Ok(DiffSet {
        diffx,
        diffy,
        alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::MappingSpec;

    #[test]
    fn diffx_half_offset_entries() {
        let grid = StaggeredGrid::build(&MappingSpec::uniform(1.0), 4, 4, 2).unwrap();
        let d = build_diff_set(&grid, 2).unwrap();
        let entries = d.diffx[0].entries();
        // Row 5 = (ix=1, iy=1): +1 at column 5, -1 at column 4.
        let row5: Vec<_> = entries.iter().filter(|(r, _, _)| *r == 5).collect();
        assert_eq!(row5.len(), 2);
        assert!(row5.contains(&&(5, 5, 1.0)));
        assert!(row5.contains(&&(5, 4, -1.0)));
        // Periodic wrap: row 4 = (0,1) reaches back to (3,1) = column 7.
        let row4: Vec<_> = entries.iter().filter(|(r, _, _)| *r == 4).collect();
        assert!(row4.contains(&&(4, 7, -1.0)));
    }

    #[test]
    fn columns_sum_to_zero_exactly() {
        let grid = StaggeredGrid::build(&MappingSpec::uniform(1.0), 8, 8, 6).unwrap();
        let d = build_diff_set(&grid, 6).unwrap();
        let ones = vec![1.0; grid.num_cells()];
        for op in d.diffx.iter().chain(&d.diffy) {
            let col_sums = op.apply_structural_transpose(&ones);
            assert!(col_sums.iter().all(|&s| s == 0.0));
        }
    }

    #[test]
    fn staggered_derivative_reaches_nominal_order() {
        // sum_eps alpha(eps) DIFFX(eps) / dxi applied to e-samples of
        // sin(2 pi x / L) approximates the derivative at c-points.
        for order in [2usize, 4, 6] {
            let mut errors = Vec::new();
            for m in [16usize, 32, 64] {
                let grid = StaggeredGrid::build(&MappingSpec::uniform(1.0), m, m, order).unwrap();
                let d = build_diff_set(&grid, order).unwrap();
                let tau = std::f64::consts::TAU;
                let f_e: Vec<f64> = (0..m * m)
                    .map(|i| (tau * ((i % m) as f64 + 0.5) * grid.dxi).sin())
                    .collect();
                let mut got = vec![0.0; m * m];
                for (k, &a) in d.alpha.iter().enumerate() {
                    let dv = d.diffx[k].apply(&f_e);
                    for (g, t) in got.iter_mut().zip(dv) {
                        *g += a * t / grid.dxi;
                    }
                }
                let err = (0..m * m)
                    .map(|i| {
                        let x = (i % m) as f64 * grid.dxi;
                        (got[i] - tau * (tau * x).cos()).abs()
                    })
                    .fold(0.0f64, f64::max);
                errors.push(err);
            }
            let slope = (errors[0] / errors[2]).log2() / 2.0;
            assert!(
                (slope - order as f64).abs() < 0.4,
                "order {order}: observed {slope}, errors {errors:?}"
            );
        }
    }
}
