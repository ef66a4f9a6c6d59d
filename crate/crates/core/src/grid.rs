//! Staggered curvilinear grid geometry.
//!
//! Scalars live at cell centers (`c`-points), vector components at east and
//! north cell-face centers (`e`- and `n`-points). All families are indexed
//! `i = ix + mx * iy` with periodic wrap in both directions.
//!
//! Besides point locations the grid stores, per point:
//! - the local orientation `(r_x, r_y)`, the orthogonal polar factor of the
//!   mapping Jacobian — an exactly orthonormal frame that compromises
//!   between the covariant and contravariant grid directions;
//! - the integration weight `dV = dxi * deta * |det J|`;
//! - for every half-integer offset `eps`, the geometric flux coefficients
//!   `Nx, Ny` that turn sampled velocity components into cell-face fluxes.

use nalgebra::{Matrix2, Vector2};
use std::io::Write;
use std::sync::Arc;

use crate::field::{CellField, StagVecField};
use crate::mapping::MappingSpec;
use crate::{Error, Result};

/// Orthogonal polar factor of a 2x2 Jacobian.
///
/// For `J = P diag(h) Q` (an SVD), the factor is `P Q`: the rotation closest
/// to `J` in the Frobenius norm. For 2x2 matrices it has a closed form; with
/// `det J > 0` the minimizer is the rotation by `atan2(c - b, a + d)`.
pub fn polar_orientation(j: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    let det = j[(0, 0)] * j[(1, 1)] - j[(0, 1)] * j[(1, 0)];
    if !(det > 0.0) {
        return Err(Error::Geometry {
            location: "jacobian".into(),
            detail: format!("determinant {det:.3e} is not positive"),
        });
    }
    let p = j[(0, 0)] + j[(1, 1)];
    let q = j[(1, 0)] - j[(0, 1)];
    let r = p.hypot(q);
    if r == 0.0 {
        return Err(Error::Geometry {
            location: "jacobian".into(),
            detail: "polar factor is undefined".into(),
        });
    }
    let (c, s) = (p / r, q / r);
    Ok(Matrix2::new(c, -s, s, c))
}

/// All geometric data of a periodic staggered grid.
#[derive(Debug, Clone)]
pub struct StaggeredGrid {
    pub mx: usize,
    pub my: usize,
    /// Computational cell widths.
    pub dxi: f64,
    pub deta: f64,
    /// Even consistency order; determines the number of flux offsets.
    pub order: usize,
    /// Domain side (computational and physical period).
    pub length: f64,

    /// Physical point coordinates.
    pub xc: Vec<Vector2<f64>>,
    pub xe: Vec<Vector2<f64>>,
    pub xn: Vec<Vector2<f64>>,

    // Local orientation samples: r_x = (rxx, rxy), r_y = (ryx, ryy).
    pub rxx_at_c: Vec<f64>,
    pub rxy_at_c: Vec<f64>,
    pub ryx_at_c: Vec<f64>,
    pub ryy_at_c: Vec<f64>,
    pub rxx_at_e: Vec<f64>,
    pub rxy_at_e: Vec<f64>,
    pub ryx_at_e: Vec<f64>,
    pub ryy_at_e: Vec<f64>,
    pub rxx_at_n: Vec<f64>,
    pub rxy_at_n: Vec<f64>,
    pub ryx_at_n: Vec<f64>,
    pub ryy_at_n: Vec<f64>,

    /// Integration weights per point family (shared with the operators).
    pub dvc: Arc<Vec<f64>>,
    pub dve: Arc<Vec<f64>>,
    pub dvn: Arc<Vec<f64>>,
    /// Stacked `[dve; dvn]` weights of the staggered vector space.
    pub dvv: Arc<Vec<f64>>,

    /// Flux coefficients, indexed `[eps_index][point]` with
    /// `eps = eps_index + 1/2`.
    pub nx_e: Vec<Vec<f64>>,
    pub ny_e: Vec<Vec<f64>>,
    pub nx_n: Vec<Vec<f64>>,
    pub ny_n: Vec<Vec<f64>>,
}

impl StaggeredGrid {
    /// Build the full geometry of a `mx x my` grid of consistency order
    /// `order` from a mapping.
    pub fn build(spec: &MappingSpec, mx: usize, my: usize, order: usize) -> Result<Self> {
        if order < 2 || order % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "order must be even and >= 2, got {order}"
            )));
        }
        if mx < 2 * order || my < 2 * order {
            return Err(Error::InvalidInput(format!(
                "grid {mx}x{my} too small for order {order} (need >= {})",
                2 * order
            )));
        }
        let map = spec.build()?;
        let length = map.length();
        let dxi = length / mx as f64;
        let deta = length / my as f64;
        let m = mx * my;

        let mut grid = StaggeredGrid {
            mx,
            my,
            dxi,
            deta,
            order,
            length,
            xc: Vec::with_capacity(m),
            xe: Vec::with_capacity(m),
            xn: Vec::with_capacity(m),
            rxx_at_c: vec![0.0; m],
            rxy_at_c: vec![0.0; m],
            ryx_at_c: vec![0.0; m],
            ryy_at_c: vec![0.0; m],
            rxx_at_e: vec![0.0; m],
            rxy_at_e: vec![0.0; m],
            ryx_at_e: vec![0.0; m],
            ryy_at_e: vec![0.0; m],
            rxx_at_n: vec![0.0; m],
            rxy_at_n: vec![0.0; m],
            ryx_at_n: vec![0.0; m],
            ryy_at_n: vec![0.0; m],
            dvc: Arc::new(Vec::new()),
            dve: Arc::new(Vec::new()),
            dvn: Arc::new(Vec::new()),
            dvv: Arc::new(Vec::new()),
            nx_e: Vec::new(),
            ny_e: Vec::new(),
            nx_n: Vec::new(),
            ny_n: Vec::new(),
        };

        let mut dvc = vec![0.0; m];
        let mut dve = vec![0.0; m];
        let mut dvn = vec![0.0; m];

        for iy in 0..my {
            for ix in 0..mx {
                let i = ix + mx * iy;
                let (xi_c, eta_c) = (ix as f64 * dxi, iy as f64 * deta);
                let (xi_e, eta_e) = (xi_c + 0.5 * dxi, eta_c);
                let (xi_n, eta_n) = (xi_c, eta_c + 0.5 * deta);

                grid.xc.push(map.position(xi_c, eta_c));
                grid.xe.push(map.position(xi_e, eta_e));
                grid.xn.push(map.position(xi_n, eta_n));

                for (family, xi, eta) in [("c", xi_c, eta_c), ("e", xi_e, eta_e), ("n", xi_n, eta_n)]
                {
                    let jac = map.jacobian(xi, eta);
                    let det = jac[(0, 0)] * jac[(1, 1)] - jac[(0, 1)] * jac[(1, 0)];
                    if !(det > 0.0) {
                        return Err(Error::Geometry {
                            location: format!("{family}-point ({ix},{iy})"),
                            detail: format!("Jacobian determinant {det:.3e} is not positive"),
                        });
                    }
                    let rot = polar_orientation(&jac).map_err(|_| Error::Geometry {
                        location: format!("{family}-point ({ix},{iy})"),
                        detail: "degenerate Jacobian".into(),
                    })?;
                    let dv = dxi * deta * det.abs();
                    match family {
                        "c" => {
                            dvc[i] = dv;
                            grid.rxx_at_c[i] = rot[(0, 0)];
                            grid.rxy_at_c[i] = rot[(1, 0)];
                            grid.ryx_at_c[i] = rot[(0, 1)];
                            grid.ryy_at_c[i] = rot[(1, 1)];
                        }
                        "e" => {
                            dve[i] = dv;
                            grid.rxx_at_e[i] = rot[(0, 0)];
                            grid.rxy_at_e[i] = rot[(1, 0)];
                            grid.ryx_at_e[i] = rot[(0, 1)];
                            grid.ryy_at_e[i] = rot[(1, 1)];
                        }
                        _ => {
                            dvn[i] = dv;
                            grid.rxx_at_n[i] = rot[(0, 0)];
                            grid.rxy_at_n[i] = rot[(1, 0)];
                            grid.ryx_at_n[i] = rot[(0, 1)];
                            grid.ryy_at_n[i] = rot[(1, 1)];
                        }
                    }
                }
            }
        }

        // Flux coefficients: coordinate differences across the face at
        // stretch eps, rotated by the perp operator and projected on the
        // local orientation. (x, y)^perp = (-y, x).
        let n_eps = order / 2;
        for k in 0..n_eps {
            let eps = k as f64 + 0.5;
            let mut nx_e = vec![0.0; m];
            let mut ny_e = vec![0.0; m];
            let mut nx_n = vec![0.0; m];
            let mut ny_n = vec![0.0; m];
            for iy in 0..my {
                for ix in 0..mx {
                    let i = ix + mx * iy;
                    let (xi_e, eta_e) = (ix as f64 * dxi + 0.5 * dxi, iy as f64 * deta);
                    let d = map.position(xi_e, eta_e + eps * deta)
                        - map.position(xi_e, eta_e - eps * deta);
                    let ne = -Vector2::new(-d.y, d.x) / eps;
                    nx_e[i] = ne.x * grid.rxx_at_e[i] + ne.y * grid.rxy_at_e[i];
                    ny_e[i] = ne.x * grid.ryx_at_e[i] + ne.y * grid.ryy_at_e[i];

                    let (xi_n, eta_n) = (ix as f64 * dxi, iy as f64 * deta + 0.5 * deta);
                    let d = map.position(xi_n + eps * dxi, eta_n)
                        - map.position(xi_n - eps * dxi, eta_n);
                    let nn = Vector2::new(-d.y, d.x) / eps;
                    nx_n[i] = nn.x * grid.rxx_at_n[i] + nn.y * grid.rxy_at_n[i];
                    ny_n[i] = nn.x * grid.ryx_at_n[i] + nn.y * grid.ryy_at_n[i];
                }
            }
            grid.nx_e.push(nx_e);
            grid.ny_e.push(ny_e);
            grid.nx_n.push(nx_n);
            grid.ny_n.push(ny_n);
        }

        grid.dvc = Arc::new(dvc);
        grid.dve = Arc::new(dve);
        grid.dvn = Arc::new(dvn);
        let mut dvv = grid.dve.as_ref().clone();
        dvv.extend_from_slice(&grid.dvn);
        grid.dvv = Arc::new(dvv);
        Ok(grid)
    }

    pub fn num_cells(&self) -> usize {
        self.mx * self.my
    }

    /// Half-integer flux offsets `1/2, 3/2, ..., (order-1)/2`.
    pub fn eps_values(&self) -> Vec<f64> {
        (0..self.order / 2).map(|k| k as f64 + 0.5).collect()
    }

    /// Total discrete volume (trapezoidal integral of `det J`).
    pub fn total_volume(&self) -> f64 {
        self.dvc.iter().sum()
    }

    /// Discrete representation of the constant scalar field 1.
    pub fn c1(&self) -> CellField {
        CellField::constant(self.num_cells(), 1.0)
    }

    /// Discrete representation of the constant vector field `direction`.
    ///
    /// On curvilinear grids this is not a constant vector: each component is
    /// the projection of `direction` on the local orientation at that point.
    pub fn constant_field_repr(&self, direction: [f64; 2]) -> Result<StagVecField> {
        let norm = direction[0].hypot(direction[1]);
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "direction must be a unit vector, |d| = {norm}"
            )));
        }
        let (dx, dy) = (direction[0], direction[1]);
        let m = self.num_cells();
        let mut v = StagVecField::zeros(m);
        for i in 0..m {
            v.x[i] = dx * self.rxx_at_e[i] + dy * self.rxy_at_e[i];
            v.y[i] = dx * self.ryx_at_n[i] + dy * self.ryy_at_n[i];
        }
        Ok(v)
    }

    /// Representation of (1,0).
    pub fn c100(&self) -> StagVecField {
        self.constant_field_repr([1.0, 0.0]).expect("unit vector")
    }

    /// Representation of (0,1).
    pub fn c010(&self) -> StagVecField {
        self.constant_field_repr([0.0, 1.0]).expect("unit vector")
    }

    /// Dump points, weights and orientations as CSV for plotting.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "family,ix,iy,x,y,dV,rxx,rxy,ryx,ryy")?;
        let rows: [(&str, &[Vector2<f64>], &[f64], [&[f64]; 4]); 3] = [
            (
                "c",
                &self.xc,
                &self.dvc,
                [&self.rxx_at_c, &self.rxy_at_c, &self.ryx_at_c, &self.ryy_at_c],
            ),
            (
                "e",
                &self.xe,
                &self.dve,
                [&self.rxx_at_e, &self.rxy_at_e, &self.ryx_at_e, &self.ryy_at_e],
            ),
            (
                "n",
                &self.xn,
                &self.dvn,
                [&self.rxx_at_n, &self.rxy_at_n, &self.ryx_at_n, &self.ryy_at_n],
            ),
        ];
        for (family, pts, dv, r) in rows {
            for iy in 0..self.my {
                for ix in 0..self.mx {
                    let i = ix + self.mx * iy;
                    writeln!(
                        out,
                        "{family},{ix},{iy},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                        pts[i].x, pts[i].y, dv[i], r[0][i], r[1][i], r[2][i], r[3][i]
                    )?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::MappingKind;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn rot(theta: f64) -> Matrix2<f64> {
        Matrix2::new(theta.cos(), -theta.sin(), theta.sin(), theta.cos())
    }

    #[test]
    fn polar_of_identity_and_diagonal() {
        let r = polar_orientation(&Matrix2::identity()).unwrap();
        assert_relative_eq!(r, Matrix2::identity(), epsilon = 1e-15);
        // Polar factor of a positive diagonal matrix is the identity.
        let r = polar_orientation(&Matrix2::new(2.0, 0.0, 0.0, 0.5)).unwrap();
        assert_relative_eq!(r, Matrix2::identity(), epsilon = 1e-15);
    }

    #[test]
    fn polar_of_rotation_times_stretch() {
        // Brute-force oracle: minimize ||J - Rot(theta)||_F over a fine grid.
        let j = rot(30f64.to_radians()) * Matrix2::new(2.0, 0.0, 0.0, 1.0);
        let r = polar_orientation(&j).unwrap();

        let mut best = (f64::INFINITY, 0.0);
        let step = 0.01f64.to_radians();
        let mut theta = -std::f64::consts::PI;
        while theta < std::f64::consts::PI {
            let d = (j - rot(theta)).norm();
            if d < best.0 {
                best = (d, theta);
            }
            theta += step;
        }
        assert_relative_eq!(r, rot(best.1), epsilon = 1e-3);
        assert_relative_eq!(r, rot(30f64.to_radians()), epsilon = 1e-14);
    }

    #[test]
    fn polar_rejects_degenerate() {
        assert!(polar_orientation(&Matrix2::new(1.0, 0.0, 0.0, 0.0)).is_err());
        assert!(polar_orientation(&Matrix2::new(1.0, 0.0, 0.0, -1.0)).is_err());
    }

    proptest! {
        // polar(R0 * S) = R0 for any rotation R0 and SPD S.
        #[test]
        fn polar_recovers_rotation(theta in -3.1f64..3.1, a in 0.2f64..3.0, d in 0.2f64..3.0, c in -0.9f64..0.9) {
            let off = c * (a * d).sqrt(); // keeps S positive definite
            let s = Matrix2::new(a, off, off, d);
            let j = rot(theta) * s;
            let r = polar_orientation(&j).unwrap();
            prop_assert!((r - rot(theta)).norm() < 1e-12);
        }
    }

    #[test]
    fn uniform_grid_geometry() {
        let spec = MappingSpec::uniform(1.0);
        let g = StaggeredGrid::build(&spec, 4, 4, 2).unwrap();
        for i in 0..16 {
            assert_relative_eq!(g.dvc[i], 1.0 / 16.0, max_relative = 1e-15);
            assert_eq!(g.rxx_at_c[i], 1.0);
            assert_eq!(g.rxy_at_c[i], 0.0);
            // Cartesian geometry: Nx_e(1/2) = 2 * deta, Ny_e(1/2) = 0.
            assert_relative_eq!(g.nx_e[0][i], 0.5, max_relative = 1e-14);
            assert_relative_eq!(g.ny_e[0][i], 0.0, epsilon = 1e-15);
            assert_relative_eq!(g.ny_n[0][i], 2.0 * g.dxi, max_relative = 1e-14);
            assert_relative_eq!(g.nx_n[0][i], 0.0, epsilon = 1e-15);
        }
        // c-points sit on the uniform lattice.
        let i = 2 + 4 * 3;
        assert_relative_eq!(g.xc[i].x, 0.5, max_relative = 1e-15);
        assert_relative_eq!(g.xc[i].y, 0.75, max_relative = 1e-15);
    }

    #[test]
    fn orientations_are_orthonormal_everywhere() {
        let spec = MappingSpec::sinusoidal_skew(1.0, 0.08, 0.05);
        let g = StaggeredGrid::build(&spec, 12, 12, 2).unwrap();
        for i in 0..g.num_cells() {
            for (rxx, rxy, ryx, ryy) in [
                (g.rxx_at_c[i], g.rxy_at_c[i], g.ryx_at_c[i], g.ryy_at_c[i]),
                (g.rxx_at_e[i], g.rxy_at_e[i], g.ryx_at_e[i], g.ryy_at_e[i]),
                (g.rxx_at_n[i], g.rxy_at_n[i], g.ryx_at_n[i], g.ryy_at_n[i]),
            ] {
                assert!((rxx * rxx + rxy * rxy - 1.0).abs() < 1e-13);
                assert!((ryx * ryx + ryy * ryy - 1.0).abs() < 1e-13);
                assert!((rxx * ryx + rxy * ryy).abs() < 1e-13);
                let det = rxx * ryy - rxy * ryx;
                assert!((det - 1.0).abs() < 1e-13);
            }
            assert!(g.dvc[i] > 0.0 && g.dve[i] > 0.0 && g.dvn[i] > 0.0);
        }
    }

    #[test]
    fn volume_matches_domain_area() {
        // Both mappings have exactly area L^2 (the periodic perturbations
        // integrate to zero).
        for spec in [
            MappingSpec::uniform(1.0),
            MappingSpec::sinusoidal_skew(1.0, 0.1, 0.07),
        ] {
            let g = StaggeredGrid::build(&spec, 16, 16, 2).unwrap();
            assert_relative_eq!(g.total_volume(), 1.0, max_relative = 1e-10);
        }
    }

    #[test]
    fn geometry_is_mapping_covariant() {
        // Scaling the whole mapping by s scales dV by s^2 and leaves the
        // orientations unchanged.
        let s = 2.5;
        let g1 = StaggeredGrid::build(&MappingSpec::sinusoidal_skew(1.0, 0.1, 0.06), 12, 12, 2)
            .unwrap();
        let g2 =
            StaggeredGrid::build(&MappingSpec::sinusoidal_skew(s, s * 0.1, s * 0.06), 12, 12, 2)
                .unwrap();
        for i in 0..g1.num_cells() {
            assert_relative_eq!(g2.dvc[i], s * s * g1.dvc[i], max_relative = 1e-12);
            assert_relative_eq!(g2.rxx_at_c[i], g1.rxx_at_c[i], epsilon = 1e-12);
            assert_relative_eq!(g2.rxy_at_c[i], g1.rxy_at_c[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn uniform_constant_representations() {
        let g = StaggeredGrid::build(&MappingSpec::uniform(1.0), 8, 8, 2).unwrap();
        let c100 = g.c100();
        assert!(c100.x.iter().all(|&v| v == 1.0));
        assert!(c100.y.iter().all(|&v| v == 0.0));
        let c010 = g.c010();
        assert!(c010.x.iter().all(|&v| v == 0.0));
        assert!(c010.y.iter().all(|&v| v == 1.0));
        // On the uniform mapping the skewed flux coefficients vanish.
        for k in 0..g.nx_n.len() {
            assert!(g.ny_e[k].iter().all(|&v| v.abs() < 1e-15));
            assert!(g.nx_n[k].iter().all(|&v| v.abs() < 1e-15));
        }
    }

    #[test]
    fn flux_coefficients_match_direct_reevaluation() {
        // Independent oracle: rebuild the defining coordinate differences at
        // a handful of points straight from the mapping.
        let spec = MappingSpec::sinusoidal_skew(1.0, 0.09, 0.04);
        let map = spec.build().unwrap();
        let g = StaggeredGrid::build(&spec, 10, 10, 4).unwrap();
        let pts = [(0usize, 0usize), (3, 1), (7, 2), (2, 9), (5, 5), (9, 9), (1, 4), (8, 6), (4, 3), (6, 7)];
        for (ix, iy) in pts {
            let i = ix + g.mx * iy;
            for (k, &eps) in g.eps_values().iter().enumerate() {
                let xi = ix as f64 * g.dxi + 0.5 * g.dxi;
                let eta = iy as f64 * g.deta;
                let d = map.position(xi, eta + eps * g.deta) - map.position(xi, eta - eps * g.deta);
                let ne = Vector2::new(d.y, -d.x) / eps; // -perp(d)/eps
                let nx = ne.x * g.rxx_at_e[i] + ne.y * g.rxy_at_e[i];
                let ny = ne.x * g.ryx_at_e[i] + ne.y * g.ryy_at_e[i];
                assert_relative_eq!(g.nx_e[k][i], nx, epsilon = 1e-14);
                assert_relative_eq!(g.ny_e[k][i], ny, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn build_rejects_bad_input() {
        let spec = MappingSpec::uniform(1.0);
        assert!(StaggeredGrid::build(&spec, 4, 4, 3).is_err());
        assert!(StaggeredGrid::build(&spec, 6, 6, 4).is_err());
        // Excessive skew folds the mapping onto itself.
        let folded = MappingSpec::sinusoidal_skew(1.0, 0.4, 0.4);
        let err = StaggeredGrid::build(&folded, 8, 8, 2).unwrap_err();
        assert!(matches!(err, Error::Geometry { .. }));
    }

    #[test]
    fn spec_kind_names() {
        assert_eq!(
            serde_json::to_string(&MappingKind::FourierPerturbation).unwrap(),
            "\"fourier-perturbation\""
        );
    }
}
