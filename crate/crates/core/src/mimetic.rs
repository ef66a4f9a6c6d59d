//! Assembly of the discrete mimetic operators.
//!
//! `DIV` is assembled from flux coefficients, staggering interpolations and
//! elementary differences; `GRAD := -DIV*` is its negative weighted adjoint,
//! taken symbolically so the pair identity is exact. The density-weighted
//! pairs insert face densities — ratios of differenced state functions,
//! built so the discrete chain rules hold by construction — between the
//! geometric and the difference factors. The advection operator is the
//! skew-symmetrized composition of scalar advection applied to the Cartesian
//! components of the field.
//!
//! State-dependent operators can either be materialized as sparse matrices
//! (diagnostics want entries) or applied factor by factor (time stepping
//! wants speed); both routes share the same pieces and a test pins their
//! equality.

use std::sync::Arc;

use crate::field::{hadamard, CellField, StagVecField};
use crate::grid::StaggeredGrid;
use crate::linops::{build_diff_set, build_interp_set, ConstraintPolicy, DiffSet, InterpSet, LinOp};
use crate::models::StateEquation;
use crate::{Error, Result};

/// Grid-bound operator set: the state-independent operators plus builders
/// for the state-dependent ones.
#[derive(Debug, Clone)]
pub struct OperatorBundle {
    pub grid: Arc<StaggeredGrid>,
    pub order: usize,
    pub interp: InterpSet,
    pub diffs: DiffSet,
    /// Discrete divergence, staggered vector fields to cell fields.
    pub div: LinOp,
    /// `GRAD = -DIV*` (kept in adjoint form; the pair identity is exact).
    pub grad: LinOp,
    /// `Interp_{v<-c} = [E2C*; N2C*]`, cell fields to the velocity grid.
    pub interp_vc: LinOp,
}

fn ensure_positive(field: &[f64], what: &'static str) -> Result<()> {
    if let Some((i, &v)) = field.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonPositive {
            what,
            index: i,
            value: v,
        });
    }
    Ok(())
}

impl OperatorBundle {
    pub fn build(grid: Arc<StaggeredGrid>, order: usize, policy: ConstraintPolicy) -> Result<Self> {
        let interp = build_interp_set(&grid, order, policy)?;
        let diffs = build_diff_set(&grid, order)?;
        let div = build_div(&grid, &interp, &diffs)?;
        let grad = div.adjoint().scaled(-1.0);
        let interp_vc = LinOp::vstack(
            &interp.e2c.adjoint(),
            &interp.n2c.adjoint(),
            grid.dvv.clone(),
        )?;
        Ok(OperatorBundle {
            grid,
            order,
            interp,
            diffs,
            div,
            grad,
            interp_vc,
        })
    }

    pub fn apply_div(&self, v: &StagVecField) -> CellField {
        CellField(self.div.apply(&v.to_flat()))
    }

    pub fn apply_grad(&self, p: &CellField) -> StagVecField {
        StagVecField::from_flat(&self.grad.apply(p))
    }

    /// Face fluxes of `v` per offset: `F_e(eps), F_n(eps)`.
    fn fluxes(&self, v: &StagVecField) -> Vec<(Vec<f64>, Vec<f64>)> {
        let g = &self.grid;
        let vy_at_e = self.interp.n2e.apply(&v.y);
        let vx_at_n = self.interp.e2n.apply(&v.x);
        (0..self.diffs.alpha.len())
            .map(|k| {
                let m = g.num_cells();
                let mut fe = vec![0.0; m];
                let mut fnn = vec![0.0; m];
                for i in 0..m {
                    fe[i] = g.nx_e[k][i] * v.x[i] + g.ny_e[k][i] * vy_at_e[i];
                    fnn[i] = g.nx_n[k][i] * vx_at_n[i] + g.ny_n[k][i] * v.y[i];
                }
                (fe, fnn)
            })
            .collect()
    }

    /// Intermediate face densities `(DIFF^T num) / (DIFF^T den)` per offset,
    /// with the analytic limit `R(p)` substituted where the denominator
    /// difference degenerates.
    fn face_densities(
        &self,
        num: &[f64],
        den: &[f64],
        p: &[f64],
        eq: &StateEquation,
    ) -> Vec<(Vec<f64>, Vec<f64>)> {
        (0..self.diffs.alpha.len())
            .map(|k| {
                (
                    face_density(&self.diffs.diffx[k], num, den, p, eq),
                    face_density(&self.diffs.diffy[k], num, den, p, eq),
                )
            })
            .collect()
    }

    /// Densities used by `rGRAD`/`DIVr`/`ADVEC`: `(DIFF^T p) / (DIFF^T Q(p))`.
    pub fn euler_face_densities(
        &self,
        p: &CellField,
        eq: &StateEquation,
    ) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        ensure_positive(p, "pressure")?;
        let q: Vec<f64> = p.iter().map(|&x| eq.q(x)).collect();
        Ok(self.face_densities(p, &q, p, eq))
    }

    /// Densities used by `rGRAD~`/`DIVr~`: `(DIFF^T Q(p)) / (DIFF^T S(p))`.
    pub fn compressible_face_densities(
        &self,
        p: &CellField,
        eq: &StateEquation,
    ) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        ensure_positive(p, "pressure")?;
        let q: Vec<f64> = p.iter().map(|&x| eq.q(x)).collect();
        let s: Vec<f64> = p.iter().map(|&x| eq.s(x)).collect();
        Ok(self.face_densities(&q, &s, p, eq))
    }

    /// Density-weighted gradient as a matrix, from per-offset face densities;
    /// the induced divergence is the exact negative adjoint.
    fn build_weighted_pair(&self, densities: &[(Vec<f64>, Vec<f64>)]) -> Result<(LinOp, LinOp)> {
        let g = &self.grid;
        let mut acc: Option<LinOp> = None;
        for (k, &a) in self.diffs.alpha.iter().enumerate() {
            let dxt = self.diffs.diffx[k].transpose_structural();
            let dyt = self.diffs.diffy[k].transpose_structural();
            let dxt = dxt.scale_rows(&densities[k].0);
            let dyt = dyt.scale_rows(&densities[k].1);
            // K(eps): flux coefficients + the transposed staggering moves.
            let top = LinOp::hstack(
                &LinOp::diag(&g.nx_e[k], g.dve.clone(), g.dve.clone())?,
                &self
                    .interp
                    .e2n
                    .transpose_structural()
                    .scale_rows_noop()
                    .scale_cols(&g.nx_n[k]),
                g.dvv.clone(),
            )?;
            let bottom = LinOp::hstack(
                &self
                    .interp
                    .n2e
                    .transpose_structural()
                    .scale_cols(&g.ny_e[k]),
                &LinOp::diag(&g.ny_n[k], g.dvn.clone(), g.dvn.clone())?,
                g.dvv.clone(),
            )?;
            let kmat = LinOp::vstack(&top, &bottom, g.dvv.clone())?;
            let stacked = LinOp::vstack(&dxt, &dyt, g.dvv.clone())?;
            let term = kmat.matmul(&stacked).scaled(-a / 2.0);
            acc = Some(match acc {
                None => term,
                Some(s) => s.add(&term),
            });
        }
        let inv_wv: Vec<f64> = g.dvv.iter().map(|w| 1.0 / w).collect();
        let rgrad = acc
            .expect("at least one offset")
            .scale_rows(&inv_wv)
            .with_weights(g.dvv.clone(), g.dvc.clone())?;
        let divr = rgrad.adjoint().scaled(-1.0);
        Ok((rgrad, divr))
    }

    /// Compressible pair `(rGRAD~, DIVr~)`; chain rule
    /// `rGRAD~ S(p) = GRAD Q(p)` holds by construction.
    pub fn build_rgrad_tilde(&self, p: &CellField, eq: &StateEquation) -> Result<(LinOp, LinOp)> {
        let densities = self.compressible_face_densities(p, eq)?;
        self.build_weighted_pair(&densities)
    }

    /// Euler pair `(rGRAD, DIVr)`; chain rule `rGRAD Q(p) = GRAD p`.
    pub fn build_rgrad(&self, p: &CellField, eq: &StateEquation) -> Result<(LinOp, LinOp)> {
        let densities = self.euler_face_densities(p, eq)?;
        self.build_weighted_pair(&densities)
    }

    /// Mass-flux divergence `DIVr(p) v` without materializing the operator.
    pub fn apply_div_r(&self, p: &CellField, v: &StagVecField, eq: &StateEquation) -> Result<CellField> {
        let densities = self.euler_face_densities(p, eq)?;
        Ok(self.weighted_divergence(&densities, v))
    }

    /// `DIVr~(p) v` without materializing the operator.
    pub fn apply_div_rtilde(
        &self,
        p: &CellField,
        v: &StagVecField,
        eq: &StateEquation,
    ) -> Result<CellField> {
        let densities = self.compressible_face_densities(p, eq)?;
        Ok(self.weighted_divergence(&densities, v))
    }

    /// `1/2 diag(dVc)^-1 sum_eps alpha [DIFFX (rho_e o F_e) + DIFFY (rho_n o F_n)]`.
    fn weighted_divergence(
        &self,
        densities: &[(Vec<f64>, Vec<f64>)],
        v: &StagVecField,
    ) -> CellField {
        let fluxes = self.fluxes(v);
        self.weighted_divergence_of_faces(densities, &fluxes, None)
    }

    fn weighted_divergence_of_faces(
        &self,
        densities: &[(Vec<f64>, Vec<f64>)],
        fluxes: &[(Vec<f64>, Vec<f64>)],
        face_scalar: Option<(&[f64], &[f64])>,
    ) -> CellField {
        let g = &self.grid;
        let m = g.num_cells();
        let mut out = vec![0.0; m];
        for (k, &a) in self.diffs.alpha.iter().enumerate() {
            let mut fe = hadamard(&densities[k].0, &fluxes[k].0);
            let mut fnn = hadamard(&densities[k].1, &fluxes[k].1);
            if let Some((se, sn)) = face_scalar {
                fe = hadamard(&fe, se);
                fnn = hadamard(&fnn, sn);
            }
            let dx = self.diffs.diffx[k].apply(&fe);
            let dy = self.diffs.diffy[k].apply(&fnn);
            for i in 0..m {
                out[i] += a * (dx[i] + dy[i]);
            }
        }
        for i in 0..m {
            out[i] *= 0.5 / g.dvc[i];
        }
        CellField(out)
    }

    /// Full advection operator for the state `(v, p)`, materialized together
    /// with its building blocks.
    pub fn build_advec(
        &self,
        v: &StagVecField,
        p: &CellField,
        eq: &StateEquation,
    ) -> Result<AdvectionOperator<'_>> {
        let applier = self.advec_applier(v, p, eq)?;
        let g = &self.grid;
        let m = g.num_cells();

        // ADVEC_s as a matrix: columns scaled by rho o F per offset.
        let mut advec_s: Option<LinOp> = None;
        for (k, &a) in self.diffs.alpha.iter().enumerate() {
            let left = self.diffs.diffx[k]
                .scale_cols(&hadamard(&applier.densities[k].0, &applier.fluxes[k].0));
            let right = self.diffs.diffy[k]
                .scale_cols(&hadamard(&applier.densities[k].1, &applier.fluxes[k].1));
            let term = LinOp::hstack(&left, &right, g.dvv.clone())?.scaled(a);
            advec_s = Some(match advec_s {
                None => term,
                Some(s) => s.add(&term),
            });
        }
        let half_inv_dvc: Vec<f64> = g.dvc.iter().map(|w| 0.5 / w).collect();
        let advec_s = advec_s
            .expect("at least one offset")
            .scale_rows(&half_inv_dvc)
            .with_weights(g.dvc.clone(), g.dvv.clone())?;

        // Rotation to Cartesian components on the faces.
        let dve = g.dve.clone();
        let dvn = g.dvn.clone();
        let t_mat = |re: &[f64], rn: &[f64], se: &[f64], sn: &[f64]| -> Result<LinOp> {
            let top = LinOp::hstack(
                &LinOp::diag(re, dve.clone(), dve.clone())?,
                &self.interp.n2e.scale_rows(se),
                g.dvv.clone(),
            )?;
            let bottom = LinOp::hstack(
                &self.interp.e2n.scale_rows(rn),
                &LinOp::diag(sn, dvn.clone(), dvn.clone())?,
                g.dvv.clone(),
            )?;
            LinOp::vstack(&top, &bottom, g.dvv.clone())
        };
        // w_{v,(1,0)} = rxx o wx + ryx o wy_at_(.); w_{v,(0,1)} analogous.
        let t1 = t_mat(&g.rxx_at_e, &g.rxx_at_n, &g.ryx_at_e, &g.ryx_at_n)?;
        let t2 = t_mat(&g.rxy_at_e, &g.rxy_at_n, &g.ryy_at_e, &g.ryy_at_n)?;

        let ac1 = advec_s.matmul(&t1);
        let ac2 = advec_s.matmul(&t2);

        // Back to the velocity grid with the adjoint destaggerings, then to
        // local orientation.
        let e2c_adj = self.interp.e2c.adjoint().materialize();
        let n2c_adj = self.interp.n2c.adjoint().materialize();
        let e_rows = e2c_adj
            .matmul(&ac1)
            .scale_rows(&g.rxx_at_e)
            .add(&e2c_adj.matmul(&ac2).scale_rows(&g.rxy_at_e));
        let n_rows = n2c_adj
            .matmul(&ac1)
            .scale_rows(&g.ryx_at_n)
            .add(&n2c_adj.matmul(&ac2).scale_rows(&g.ryy_at_n));
        let advec_a = LinOp::vstack(&e_rows, &n_rows, g.dvv.clone())?
            .with_weights(g.dvv.clone(), g.dvv.clone())?;

        let diag_term = LinOp::diag(&applier.diag_term, g.dvv.clone(), g.dvv.clone())?;
        let advec = advec_a
            .sub(&advec_a.adjoint())
            .add(&diag_term)
            .scaled(0.5)
            .materialize();
        let _ = m;
        Ok(AdvectionOperator {
            advec,
            advec_a,
            advec_s,
            divr_v: applier.divr_v.clone(),
            applier,
        })
    }

    /// Factored advection application for the state `(v, p)`; no matrices
    /// beyond the fixed interpolation/difference pieces are formed.
    pub fn advec_applier(
        &self,
        v: &StagVecField,
        p: &CellField,
        eq: &StateEquation,
    ) -> Result<AdvecApplier<'_>> {
        if self.interp.constraint_residual > self.interp.threshold {
            return Err(Error::GridQuality {
                residual: self.interp.constraint_residual,
                threshold: self.interp.threshold,
                context: "advection needs product-exact interpolation; momentum conservation \
                          would silently break"
                    .into(),
            });
        }
        let densities = self.euler_face_densities(p, eq)?;
        let fluxes = self.fluxes(v);
        let divr_v = self.weighted_divergence_of_faces(&densities, &fluxes, None);
        let diag_term = self.interp_vc.apply(&divr_v);
        Ok(AdvecApplier {
            bundle: self,
            densities,
            fluxes,
            divr_v,
            diag_term,
        })
    }
}

/// Materialized advection operator plus its building blocks.
#[derive(Debug)]
pub struct AdvectionOperator<'a> {
    /// `ADVEC = 1/2 (ADVEC_a - ADVEC_a* + diag(Interp_vc DIVr v))`.
    pub advec: LinOp,
    /// Pre-symmetrization operator.
    pub advec_a: LinOp,
    /// Scalar advection on face fields.
    pub advec_s: LinOp,
    /// `DIVr(p) v` of the advecting state.
    pub divr_v: CellField,
    pub applier: AdvecApplier<'a>,
}

/// Factored application of the advection operator of a frozen state.
#[derive(Debug)]
pub struct AdvecApplier<'a> {
    bundle: &'a OperatorBundle,
    densities: Vec<(Vec<f64>, Vec<f64>)>,
    fluxes: Vec<(Vec<f64>, Vec<f64>)>,
    pub divr_v: CellField,
    diag_term: Vec<f64>,
}

impl AdvecApplier<'_> {
    /// `ADVEC w` for any staggered field `w`.
    pub fn apply(&self, w: &StagVecField) -> StagVecField {
        let a = self.apply_a(w);
        let astar = self.apply_a_star(w);
        let m = w.len();
        let mut out = StagVecField::zeros(m);
        for i in 0..m {
            out.x[i] = 0.5 * (a.x[i] - astar.x[i] + self.diag_term[i] * w.x[i]);
            out.y[i] = 0.5 * (a.y[i] - astar.y[i] + self.diag_term[m + i] * w.y[i]);
        }
        out
    }

    /// `ADVEC_a w`.
    pub fn apply_a(&self, w: &StagVecField) -> StagVecField {
        let b = self.bundle;
        let g = &b.grid;
        let m = g.num_cells();
        let wy_at_e = b.interp.n2e.apply(&w.y);
        let wx_at_n = b.interp.e2n.apply(&w.x);
        let mut w10 = (vec![0.0; m], vec![0.0; m]);
        let mut w01 = (vec![0.0; m], vec![0.0; m]);
        for i in 0..m {
            w10.0[i] = g.rxx_at_e[i] * w.x[i] + g.ryx_at_e[i] * wy_at_e[i];
            w10.1[i] = g.rxx_at_n[i] * wx_at_n[i] + g.ryx_at_n[i] * w.y[i];
            w01.0[i] = g.rxy_at_e[i] * w.x[i] + g.ryy_at_e[i] * wy_at_e[i];
            w01.1[i] = g.rxy_at_n[i] * wx_at_n[i] + g.ryy_at_n[i] * w.y[i];
        }
        let a1 = b.weighted_divergence_of_faces(&self.densities, &self.fluxes, Some((&w10.0, &w10.1)));
        let a2 = b.weighted_divergence_of_faces(&self.densities, &self.fluxes, Some((&w01.0, &w01.1)));
        let a1e = b.interp.e2c.adjoint().apply(&a1);
        let a2e = b.interp.e2c.adjoint().apply(&a2);
        let a1n = b.interp.n2c.adjoint().apply(&a1);
        let a2n = b.interp.n2c.adjoint().apply(&a2);
        let mut out = StagVecField::zeros(m);
        for i in 0..m {
            out.x[i] = g.rxx_at_e[i] * a1e[i] + g.rxy_at_e[i] * a2e[i];
            out.y[i] = g.ryx_at_n[i] * a1n[i] + g.ryy_at_n[i] * a2n[i];
        }
        out
    }

    /// `ADVEC_a* w` via the exact transpose chain of the same factors.
    pub fn apply_a_star(&self, w: &StagVecField) -> StagVecField {
        let b = self.bundle;
        let g = &b.grid;
        let m = g.num_cells();
        // Weighted adjoint: w_v^-1 (A^T (w_v o w)).
        let ue: Vec<f64> = (0..m).map(|i| g.dve[i] * w.x[i]).collect();
        let un: Vec<f64> = (0..m).map(|i| g.dvn[i] * w.y[i]).collect();

        // Transpose of the final rotation + adjoint-destaggering stage.
        // (E2C*)^T x = dVc o E2C (x / dVe), likewise for N2C*.
        let stage = |re: &[f64], rn: &[f64]| -> Vec<f64> {
            let xe: Vec<f64> = (0..m).map(|i| re[i] * ue[i] / g.dve[i]).collect();
            let xn: Vec<f64> = (0..m).map(|i| rn[i] * un[i] / g.dvn[i]).collect();
            let ce = b.interp.e2c.apply(&xe);
            let cn = b.interp.n2c.apply(&xn);
            (0..m).map(|i| g.dvc[i] * (ce[i] + cn[i])).collect()
        };
        let z1 = stage(&g.rxx_at_e, &g.ryx_at_n);
        let z2 = stage(&g.rxy_at_e, &g.ryy_at_n);

        // Transpose of ADVEC_s: back to face fields.
        let advec_s_t = |z: &[f64]| -> (Vec<f64>, Vec<f64>) {
            let zz: Vec<f64> = (0..m).map(|i| z[i] / g.dvc[i]).collect();
            let mut fe = vec![0.0; m];
            let mut fnn = vec![0.0; m];
            for (k, &a) in b.diffs.alpha.iter().enumerate() {
                let tx = b.diffs.diffx[k].apply_structural_transpose(&zz);
                let ty = b.diffs.diffy[k].apply_structural_transpose(&zz);
                for i in 0..m {
                    fe[i] += 0.5
                        * a
                        * self.densities[k].0[i]
                        * self.fluxes[k].0[i]
                        * tx[i];
                    fnn[i] += 0.5
                        * a
                        * self.densities[k].1[i]
                        * self.fluxes[k].1[i]
                        * ty[i];
                }
            }
            (fe, fnn)
        };
        let (b1e, b1n) = advec_s_t(&z1);
        let (b2e, b2n) = advec_s_t(&z2);

        // Transpose of the face rotation stage.
        let exn_t_1 = b
            .interp
            .e2n
            .apply_structural_transpose(&hadamard(&g.rxx_at_n, &b1n));
        let exn_t_2 = b
            .interp
            .e2n
            .apply_structural_transpose(&hadamard(&g.rxy_at_n, &b2n));
        let nye_t_1 = b
            .interp
            .n2e
            .apply_structural_transpose(&hadamard(&g.ryx_at_e, &b1e));
        let nye_t_2 = b
            .interp
            .n2e
            .apply_structural_transpose(&hadamard(&g.ryy_at_e, &b2e));
        let mut out = StagVecField::zeros(m);
        for i in 0..m {
            let tx = g.rxx_at_e[i] * b1e[i] + g.rxy_at_e[i] * b2e[i] + exn_t_1[i] + exn_t_2[i];
            let ty = g.ryx_at_n[i] * b1n[i] + g.ryy_at_n[i] * b2n[i] + nye_t_1[i] + nye_t_2[i];
            out.x[i] = tx / g.dve[i];
            out.y[i] = ty / g.dvn[i];
        }
        out
    }
}

/// Per-face ratio of two cell-value differences with a stable fallback.
///
/// Every column of a difference matrix couples exactly two cells; the ratio
/// `(num_a - num_b) / (den_a - den_b)` degenerates when the denominators
/// agree, and is then replaced by its analytic limit `R(p)` at the mean
/// pressure.
fn face_density(
    diff: &LinOp,
    num: &[f64],
    den: &[f64],
    p: &[f64],
    eq: &StateEquation,
) -> Vec<f64> {
    let m = num.len();
    let mut plus = vec![usize::MAX; m];
    let mut minus = vec![usize::MAX; m];
    for (r, c, v) in diff.entries() {
        if v > 0.0 {
            plus[c] = r;
        } else {
            minus[c] = r;
        }
    }
    let mut out = vec![0.0; m];
    for j in 0..m {
        let (a, b) = (plus[j], minus[j]);
        debug_assert!(a != usize::MAX && b != usize::MAX);
        let d = den[a] - den[b];
        let scale = den[a].abs() + den[b].abs();
        if d.abs() <= 1e-12 * scale {
            out[j] = eq.r(0.5 * (p[a] + p[b]));
        } else {
            out[j] = (num[a] - num[b]) / d;
        }
    }
    out
}

/// Build the discrete divergence from grid geometry, interpolations and
/// elementary differences.
pub fn build_div(grid: &StaggeredGrid, interp: &InterpSet, diffs: &DiffSet) -> Result<LinOp> {
    let m = grid.num_cells();
    let mut acc: Option<LinOp> = None;
    for (k, &a) in diffs.alpha.iter().enumerate() {
        let e_block = LinOp::hstack(
            &LinOp::diag(&grid.nx_e[k], grid.dve.clone(), grid.dve.clone())?,
            &interp.n2e.scale_rows(&grid.ny_e[k]),
            grid.dvv.clone(),
        )?;
        let n_block = LinOp::hstack(
            &interp.e2n.scale_rows(&grid.nx_n[k]),
            &LinOp::diag(&grid.ny_n[k], grid.dvn.clone(), grid.dvn.clone())?,
            grid.dvv.clone(),
        )?;
        let term = diffs.diffx[k]
            .matmul(&e_block)
            .add(&diffs.diffy[k].matmul(&n_block))
            .scaled(a);
        acc = Some(match acc {
            None => term,
            Some(s) => s.add(&term),
        });
    }
    let half_inv_dvc: Vec<f64> = grid.dvc.iter().map(|w| 0.5 / w).collect();
    acc.expect("at least one offset")
        .scale_rows(&half_inv_dvc)
        .with_weights(grid.dvc.clone(), grid.dvv.clone())
        .map(|op| {
            debug_assert_eq!(op.rows(), m);
            op
        })
}

// Small helper so the weighted-pair assembly reads block by block.
trait NoopScale {
    fn scale_rows_noop(self) -> Self;
}
impl NoopScale for LinOp {
    fn scale_rows_noop(self) -> Self {
        self
    }
}
