//! Conserved-quantity functionals and the operator-identity audit.
//!
//! The audit evaluates every structural identity the operator set is
//! supposed to satisfy (null spaces, chain rules, symmetries, the advection
//! identity) at random states and reports normalized max residuals. It
//! reports rather than throws: a broken identity shows up as a large
//! residual, which the tests and the experiment harness assert on.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::field::{axpy, CellField, StagVecField};
use crate::grid::StaggeredGrid;
use crate::linops::{inner_c, inner_v, weighted_inner, LinOp};
use crate::mimetic::OperatorBundle;
use crate::models::{interpolated_density, Model, ModelDef, ModelState, StateEquation};
use crate::Result;

/// Conserved quantities of a state, plus relative losses against a
/// reference (usually the initial state).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConservationReport {
    pub t: f64,
    pub mass: f64,
    pub momentum_x: f64,
    pub momentum_y: f64,
    pub energy: f64,
}

/// Relative losses `|X(t) - X(0)| / max(|X(0)|, scale_floor)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Losses {
    pub mass: f64,
    pub momentum_x: f64,
    pub momentum_y: f64,
    pub energy: f64,
}

impl Losses {
    /// Largest of the two momentum-component losses.
    pub fn momentum(&self) -> f64 {
        self.momentum_x.max(self.momentum_y)
    }
}

impl ConservationReport {
    pub fn relative_losses(&self, initial: &ConservationReport, scale_floor: f64) -> Losses {
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(scale_floor);
        Losses {
            mass: rel(self.mass, initial.mass),
            momentum_x: rel(self.momentum_x, initial.momentum_x),
            momentum_y: rel(self.momentum_y, initial.momentum_y),
            energy: rel(self.energy, initial.energy),
        }
    }
}

/// Discrete mass, momentum and total energy of a state.
pub fn conserved_quantities(
    state: &ModelState,
    bundle: &OperatorBundle,
    def: &ModelDef,
    t: f64,
) -> Result<ConservationReport> {
    let g = &bundle.grid;
    let eq = &def.eq;
    let mass = inner_c(&g.c1(), &state.rho, g)?;
    let (c100, c010) = (g.c100(), g.c010());
    let p = def.pressure(state);
    let (momentum_x, momentum_y, energy) = match def.model {
        Model::Linear => {
            let e_int: f64 = state
                .rho
                .iter()
                .zip(g.dvc.iter())
                .map(|(&r, &w)| {
                    let c = eq.sound_speed().unwrap_or(1.0);
                    w * c * c * r * r / (2.0 * eq.rho0)
                })
                .sum();
            (
                eq.rho0 * inner_v(&c100, &state.vel, g)?,
                eq.rho0 * inner_v(&c010, &state.vel, g)?,
                e_int + 0.5 * eq.rho0 * inner_v(&state.vel, &state.vel, g)?,
            )
        }
        Model::Compressible => {
            let e_int: f64 = p
                .iter()
                .zip(g.dvc.iter())
                .map(|(&pi, &w)| w * eq.e_int_compressible(pi))
                .sum();
            (
                eq.rho0 * inner_v(&c100, &state.vel, g)?,
                eq.rho0 * inner_v(&c010, &state.vel, g)?,
                e_int + 0.5 * eq.rho0 * inner_v(&state.vel, &state.vel, g)?,
            )
        }
        Model::Euler => {
            let v = def.velocity(state, bundle)?;
            let e_int: f64 = p
                .iter()
                .zip(g.dvc.iter())
                .map(|(&pi, &w)| w * eq.e_int_euler(pi))
                .sum();
            (
                inner_v(&c100, &state.vel, g)?,
                inner_v(&c010, &state.vel, g)?,
                e_int + 0.5 * inner_v(&state.vel, &v, g)?,
            )
        }
    };
    Ok(ConservationReport {
        t,
        mass,
        momentum_x,
        momentum_y,
        energy,
    })
}

/// Normalized instantaneous time derivatives of the conserved quantities,
/// computed by applying the conservation functionals to the semi-discrete
/// right-hand side. Each residual is divided by the summed magnitude of its
/// contributions (floor 1), the natural cancellation scale.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConservedDerivatives {
    pub mass: f64,
    pub momentum_x: f64,
    pub momentum_y: f64,
    pub energy: f64,
}

pub fn conserved_derivative_residuals(
    state: &ModelState,
    bundle: &OperatorBundle,
    def: &ModelDef,
) -> Result<ConservedDerivatives> {
    let g = &bundle.grid;
    let eq = &def.eq;
    let m = g.num_cells();
    let d = def.rhs(state, bundle)?;

    let normalized = |value: f64, scale: f64| value.abs() / scale.max(1.0);

    // Mass: d/dt <c1, rho>.
    let dm: f64 = d.rho.iter().zip(g.dvc.iter()).map(|(r, w)| r * w).sum();
    let dm_scale: f64 = d.rho.iter().zip(g.dvc.iter()).map(|(r, w)| (r * w).abs()).sum();

    // Momentum: the Table-row functional applied to the velocity/momentum
    // derivative, projected on the constant representations.
    let (c100, c010) = (g.c100(), g.c010());
    let mom_factor = match def.model {
        Model::Euler => 1.0,
        _ => eq.rho0,
    };
    let dmx = mom_factor * inner_v(&c100, &d.vel, g)?;
    let dmy = mom_factor * inner_v(&c010, &d.vel, g)?;
    let mom_scale: f64 = (0..m)
        .map(|i| {
            mom_factor
                * (g.dve[i] * (c100.x[i] * d.vel.x[i]).abs()
                    + g.dvn[i] * (c100.y[i] * d.vel.y[i]).abs()
                    + g.dve[i] * (c010.x[i] * d.vel.x[i]).abs()
                    + g.dvn[i] * (c010.y[i] * d.vel.y[i]).abs())
        })
        .sum();

    // Energy: chain rule through the model's energy functional.
    let p = def.pressure(state);
    let (de, de_scale) = match def.model {
        Model::Linear => {
            let c = eq.sound_speed().unwrap_or(1.0);
            let mut acc = 0.0;
            let mut scale = 0.0;
            for i in 0..m {
                let term = g.dvc[i] * c * c * state.rho[i] * d.rho[i] / eq.rho0;
                acc += term;
                scale += term.abs();
            }
            for i in 0..m {
                let tx = eq.rho0 * g.dve[i] * state.vel.x[i] * d.vel.x[i];
                let ty = eq.rho0 * g.dvn[i] * state.vel.y[i] * d.vel.y[i];
                acc += tx + ty;
                scale += tx.abs() + ty.abs();
            }
            (acc, scale)
        }
        Model::Compressible => {
            let mut acc = 0.0;
            let mut scale = 0.0;
            for i in 0..m {
                let dp = d.rho[i] / eq.r_prime(p[i]);
                let term = g.dvc[i] * eq.e_int_compressible_prime(p[i]) * dp;
                acc += term;
                scale += term.abs();
            }
            for i in 0..m {
                let tx = eq.rho0 * g.dve[i] * state.vel.x[i] * d.vel.x[i];
                let ty = eq.rho0 * g.dvn[i] * state.vel.y[i] * d.vel.y[i];
                acc += tx + ty;
                scale += tx.abs() + ty.abs();
            }
            (acc, scale)
        }
        Model::Euler => {
            let m_rho = interpolated_density(&state.rho, bundle)?;
            let dm_rho = bundle.interp_vc.apply(&d.rho);
            let v = def.velocity(state, bundle)?;
            let mut acc = 0.0;
            let mut scale = 0.0;
            for i in 0..m {
                let dp = d.rho[i] / eq.r_prime(p[i]);
                let term = g.dvc[i] * eq.e_int_euler_prime(p[i]) * dp;
                acc += term;
                scale += term.abs();
            }
            // d(1/2 <rv, v>) = 1/2 (<drv, v> + <rv, dv>),
            // dv = (drv - v o d(Interp rho)) / Interp rho.
            for i in 0..m {
                let dvx = (d.vel.x[i] - v.x[i] * dm_rho[i]) / m_rho[i];
                let dvy = (d.vel.y[i] - v.y[i] * dm_rho[i + m]) / m_rho[i + m];
                let tx = 0.5 * g.dve[i] * (d.vel.x[i] * v.x[i] + state.vel.x[i] * dvx);
                let ty = 0.5 * g.dvn[i] * (d.vel.y[i] * v.y[i] + state.vel.y[i] * dvy);
                acc += tx + ty;
                scale += tx.abs() + ty.abs();
            }
            (acc, scale)
        }
    };

    Ok(ConservedDerivatives {
        mass: normalized(dm, dm_scale),
        momentum_x: normalized(dmx, mom_scale),
        momentum_y: normalized(dmy, mom_scale),
        energy: normalized(de, de_scale),
    })
}

/// One identity's worst residual over the audit trials.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentityResidual {
    pub identity: String,
    pub residual: f64,
}

/// Residual report of the full identity suite.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentityReport {
    pub mx: usize,
    pub my: usize,
    pub order: usize,
    pub trials: usize,
    pub seed: u64,
    pub residuals: Vec<IdentityResidual>,
}

impl IdentityReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |a, r| a.max(r.residual))
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.residuals
            .iter()
            .find(|r| r.identity == name)
            .map(|r| r.residual)
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

/// Evaluate every discrete operator identity at `trials` random states.
/// Never fails: a refused advection build is itself recorded as a residual.
pub fn check_operator_identities(
    bundle: &OperatorBundle,
    eq: &StateEquation,
    trials: usize,
    seed: u64,
) -> IdentityReport {
    let g = &bundle.grid;
    let mut res: Vec<(String, f64)> = Vec::new();
    let push_max = |list: &mut Vec<(String, f64)>, name: &str, value: f64| {
        match list.iter_mut().find(|(n, _)| n == name) {
            Some((_, v)) => *v = v.max(value),
            None => list.push((name.to_string(), value)),
        }
    };

    let div_scale = bundle.div.norm_inf().max(1.0);
    let c1 = g.c1();
    let (c100, c010) = (g.c100(), g.c010());

    // State-independent identities.
    push_max(
        &mut res,
        "div_star_c1",
        sup(&bundle.div.adjoint().apply(&c1)) / div_scale,
    );
    push_max(
        &mut res,
        "div_c100",
        sup(&bundle.div.apply(&c100.to_flat())) / div_scale,
    );
    push_max(
        &mut res,
        "div_c010",
        sup(&bundle.div.apply(&c010.to_flat())) / div_scale,
    );
    push_max(
        &mut res,
        "grad_c1",
        sup(&bundle.grad.apply(&c1)) / div_scale,
    );
    push_max(
        &mut res,
        "grad_star_c100",
        sup(&bundle.grad.adjoint().apply(&c100.to_flat())) / div_scale,
    );
    push_max(
        &mut res,
        "grad_star_c010",
        sup(&bundle.grad.adjoint().apply(&c010.to_flat())) / div_scale,
    );
    push_max(
        &mut res,
        "sym_div_grad",
        bundle.div.add(&bundle.grad.adjoint()).norm_inf() / div_scale,
    );

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for trial in 0..trials.max(1) {
        let tseed = rng.gen::<u64>() ^ trial as u64;
        let p = random_positive_cell_field(g, tseed, 1.0, 0.3);
        let v = random_vec_field(g, tseed ^ 0x5555);
        let w = random_vec_field(g, tseed ^ 0xaaaa);

        // Adjoint identity <x, A y> = <A* x, y> for the weighted pairs.
        let x = random_cell_field(g, tseed ^ 0x1234);
        let lhs = weighted_inner(&x, &g.dvc, &bundle.div.apply(&v.to_flat()));
        let rhs = weighted_inner(&bundle.div.adjoint().apply(&x), &g.dvv, &v.to_flat());
        push_max(
            &mut res,
            "adjoint_div",
            (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1.0),
        );

        // Chain rules.
        let q = p.map(|t| eq.q(t));
        let s = p.map(|t| eq.s(t));
        match bundle.build_rgrad_tilde(&p, eq) {
            Ok((rgt, divrt)) => {
                let lhs = rgt.apply(&s);
                let rhs = bundle.grad.apply(&q);
                let scale = sup(&rhs).max(1.0);
                push_max(&mut res, "chain_rgrad_tilde", sup(&axpy(&lhs, -1.0, &rhs)) / scale);
                push_max(
                    &mut res,
                    "sym_divr_tilde",
                    divrt.add(&rgt.adjoint()).norm_inf() / rgt.norm_inf().max(1.0),
                );
                push_max(
                    &mut res,
                    "divr_tilde_star_c1",
                    sup(&divrt.adjoint().apply(&c1)) / rgt.norm_inf().max(1.0),
                );
            }
            Err(e) => push_max(&mut res, &format!("rgrad_tilde_build_failed({e})"), 1.0),
        }
        match bundle.build_rgrad(&p, eq) {
            Ok((rg, divr)) => {
                let lhs = rg.apply(&q);
                let rhs = bundle.grad.apply(&p);
                let scale = sup(&rhs).max(1.0);
                push_max(&mut res, "chain_rgrad", sup(&axpy(&lhs, -1.0, &rhs)) / scale);
                push_max(
                    &mut res,
                    "sym_divr",
                    divr.add(&rg.adjoint()).norm_inf() / rg.norm_inf().max(1.0),
                );
            }
            Err(e) => push_max(&mut res, &format!("rgrad_build_failed({e})"), 1.0),
        }

        // Advection identities.
        match bundle.build_advec(&v, &p, eq) {
            Ok(op) => {
                let a_scale = op.advec.norm_inf().max(1.0);
                let ones = vec![1.0; 2 * g.num_cells()];
                let advs_c1 = op.advec_s.apply(&ones);
                push_max(
                    &mut res,
                    "advec_s_c1_is_divr_v",
                    sup(&axpy(&advs_c1, -1.0, &op.divr_v)) / sup(&op.divr_v).max(1.0),
                );
                push_max(
                    &mut res,
                    "advec_s_left_null",
                    inner_c(&c1, &CellField(advs_c1), g).unwrap().abs()
                        / op.advec_s.norm_inf().max(1.0),
                );
                let diag_vec = bundle.interp_vc.apply(&op.divr_v);
                let diag = LinOp::diag(&diag_vec, g.dvv.clone(), g.dvv.clone()).unwrap();
                push_max(
                    &mut res,
                    "sym_advec",
                    op.advec.add(&op.advec.adjoint()).sub(&diag).norm_inf() / a_scale,
                );
                let aw = StagVecField::from_flat(&op.advec.apply(&w.to_flat()));
                push_max(
                    &mut res,
                    "advec_left_null_c100",
                    inner_v(&c100, &aw, g).unwrap().abs() / a_scale,
                );
                push_max(
                    &mut res,
                    "advec_left_null_c010",
                    inner_v(&c010, &aw, g).unwrap().abs() / a_scale,
                );
                let aaw = StagVecField::from_flat(&op.advec_a.apply(&w.to_flat()));
                push_max(
                    &mut res,
                    "advec_a_left_null_c100",
                    inner_v(&c100, &aaw, g).unwrap().abs() / a_scale,
                );
                // <x, (A - A*) x> = 0, the identity behind energy
                // conservation.
                let xf = w.to_flat();
                let ax = op.advec.apply(&xf);
                let asx = op.advec.adjoint().apply(&xf);
                push_max(
                    &mut res,
                    "skew_quadratic_advec",
                    weighted_inner(&xf, &g.dvv, &axpy(&ax, -1.0, &asx)).abs() / a_scale,
                );
            }
            Err(e) => {
                let residual = bundle.interp.constraint_residual.max(1.0);
                push_max(&mut res, &format!("advec_build_refused({e})"), residual);
            }
        }
    }

    IdentityReport {
        mx: g.mx,
        my: g.my,
        order: bundle.order,
        trials,
        seed,
        residuals: res
            .into_iter()
            .map(|(identity, residual)| IdentityResidual { identity, residual })
            .collect(),
    }
}

// ---------------------------------------------------------------------------
// Seeded smooth random fields (shared by the audit and the test suites).

fn fourier_value(rng_modes: &[(f64, f64, f64, f64)], xi: f64, eta: f64, l: f64) -> f64 {
    let mut acc = 0.0;
    for &(kx, ky, amp, phase) in rng_modes {
        acc += amp * (TAU * (kx * xi + ky * eta) / l + phase).cos();
    }
    acc
}

fn draw_modes(seed: u64) -> Vec<(f64, f64, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut modes = Vec::new();
    for kx in -2i32..=2 {
        for ky in -2i32..=2 {
            if kx == 0 && ky == 0 {
                continue;
            }
            let fall = 1.0 + (kx * kx + ky * ky) as f64;
            modes.push((
                kx as f64,
                ky as f64,
                rng.gen_range(-1.0..1.0) / fall,
                rng.gen_range(0.0..TAU),
            ));
        }
    }
    modes
}

/// Smooth periodic random field on the cell centers, roughly unit amplitude.
pub fn random_cell_field(grid: &StaggeredGrid, seed: u64) -> CellField {
    let modes = draw_modes(seed);
    let mut out = vec![0.0; grid.num_cells()];
    for iy in 0..grid.my {
        for ix in 0..grid.mx {
            out[ix + grid.mx * iy] = fourier_value(
                &modes,
                ix as f64 * grid.dxi,
                iy as f64 * grid.deta,
                grid.length,
            );
        }
    }
    CellField(out)
}

/// Strictly positive smooth field `base * (1 + amplitude * noise)`.
pub fn random_positive_cell_field(
    grid: &StaggeredGrid,
    seed: u64,
    base: f64,
    amplitude: f64,
) -> CellField {
    let f = random_cell_field(grid, seed);
    let peak = f.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1e-12);
    f.map(|x| base * (1.0 + amplitude * x / peak))
}

/// Smooth random staggered vector field.
pub fn random_vec_field(grid: &StaggeredGrid, seed: u64) -> StagVecField {
    let mx_modes = draw_modes(seed.wrapping_mul(3).wrapping_add(1));
    let my_modes = draw_modes(seed.wrapping_mul(3).wrapping_add(2));
    let mut v = StagVecField::zeros(grid.num_cells());
    for iy in 0..grid.my {
        for ix in 0..grid.mx {
            let i = ix + grid.mx * iy;
            v.x[i] = fourier_value(
                &mx_modes,
                (ix as f64 + 0.5) * grid.dxi,
                iy as f64 * grid.deta,
                grid.length,
            );
            v.y[i] = fourier_value(
                &my_modes,
                ix as f64 * grid.dxi,
                (iy as f64 + 0.5) * grid.deta,
                grid.length,
            );
        }
    }
    v
}

/// Random admissible state for a model (positive density; Euler momentum
/// built from the interpolated density).
pub fn random_state(
    def: &ModelDef,
    bundle: &OperatorBundle,
    seed: u64,
) -> Result<ModelState> {
    let g = &bundle.grid;
    let rho = random_positive_cell_field(g, seed, 1.0, 0.25);
    let v = {
        let raw = random_vec_field(g, seed ^ 0x9e3779b9);
        let m = g.num_cells();
        let mut v = StagVecField::zeros(m);
        for i in 0..m {
            v.x[i] = 0.3 * raw.x[i];
            v.y[i] = 0.3 * raw.y[i];
        }
        v
    };
    let vel = match def.model {
        Model::Euler => {
            let m_rho = interpolated_density(&rho, bundle)?;
            let m = g.num_cells();
            let mut rv = StagVecField::zeros(m);
            for i in 0..m {
                rv.x[i] = m_rho[i] * v.x[i];
                rv.y[i] = m_rho[i + m] * v.y[i];
            }
            rv
        }
        _ => v,
    };
    Ok(ModelState::new(def.model, rho, vel))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::ConstraintPolicy;
    use crate::mapping::MappingSpec;
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn bundle(
        spec: &MappingSpec,
        mx: usize,
        my: usize,
        order: usize,
        policy: ConstraintPolicy,
    ) -> OperatorBundle {
        let grid = Arc::new(StaggeredGrid::build(spec, mx, my, order).unwrap());
        OperatorBundle::build(grid, order, policy).unwrap()
    }

    #[test]
    fn mass_of_unit_density_is_domain_volume() {
        let b = bundle(&MappingSpec::uniform(1.0), 8, 8, 2, ConstraintPolicy::default());
        let m = b.grid.num_cells();
        let def = ModelDef::linear(1.0, 1.0);
        let state = ModelState::new(
            Model::Linear,
            CellField::constant(m, 1.0),
            StagVecField::zeros(m),
        );
        let rep = conserved_quantities(&state, &b, &def, 0.0).unwrap();
        assert_relative_eq!(rep.mass, 1.0, max_relative = 1e-13);
    }

    #[test]
    fn momentum_of_constant_unit_velocity() {
        let b = bundle(&MappingSpec::uniform(1.0), 8, 8, 2, ConstraintPolicy::default());
        let m = b.grid.num_cells();
        let def = ModelDef::linear(1.0, 1.0);
        let state = ModelState::new(Model::Linear, CellField::constant(m, 1.0), b.grid.c100());
        let rep = conserved_quantities(&state, &b, &def, 0.0).unwrap();
        assert_relative_eq!(rep.momentum_x, 1.0, max_relative = 1e-13);
        assert!(rep.momentum_y.abs() < 1e-14);
    }

    #[test]
    fn shallow_energy_matches_brute_force_loop() {
        let b = bundle(
            &MappingSpec::sinusoidal_skew(1.0, 0.08, 0.05),
            12,
            12,
            4,
            ConstraintPolicy::default(),
        );
        let def = ModelDef::shallow_water(1.3);
        let state = random_state(&def, &b, 7).unwrap();
        let rep = conserved_quantities(&state, &b, &def, 0.0).unwrap();

        // Independent summation straight from the definitions.
        let g = &b.grid;
        let eq = &def.eq;
        let m = g.num_cells();
        let m_rho = interpolated_density(&state.rho, &b).unwrap();
        let mut energy = 0.0;
        for i in 0..m {
            let p = eq.p_from_rho(state.rho[i]);
            energy += g.dvc[i] * eq.e_int_euler(p);
        }
        for i in 0..m {
            energy += 0.5 * g.dve[i] * state.vel.x[i] * state.vel.x[i] / m_rho[i];
            energy += 0.5 * g.dvn[i] * state.vel.y[i] * state.vel.y[i] / m_rho[i + m];
        }
        assert_relative_eq!(rep.energy, energy, max_relative = 1e-14);
    }

    #[test]
    fn semi_discrete_conservation_for_all_models() {
        let b = bundle(
            &MappingSpec::sinusoidal_skew(1.0, 0.08, 0.05),
            16,
            16,
            4,
            ConstraintPolicy::default(),
        );
        for def in [
            ModelDef::linear(1.0, 1.0),
            ModelDef::compressible(1.0, 1.0),
            ModelDef::shallow_water(1.0),
        ] {
            for seed in 0..5u64 {
                let state = random_state(&def, &b, seed).unwrap();
                let r = conserved_derivative_residuals(&state, &b, &def).unwrap();
                for (name, v) in [
                    ("mass", r.mass),
                    ("mom_x", r.momentum_x),
                    ("mom_y", r.momentum_y),
                    ("energy", r.energy),
                ] {
                    assert!(
                        v < 1e-11,
                        "{:?} {name} residual {v:.3e} (seed {seed})",
                        def.model
                    );
                }
            }
        }
    }

    #[test]
    fn identity_audit_is_clean_and_deterministic() {
        let b = bundle(
            &MappingSpec::sinusoidal_skew(1.0, 0.08, 0.05),
            12,
            12,
            4,
            ConstraintPolicy::default(),
        );
        let eq = StateEquation::shallow_water(1.0);
        let rep1 = check_operator_identities(&b, &eq, 2, 5);
        let rep2 = check_operator_identities(&b, &eq, 2, 5);
        assert!(rep1.max_residual() < 1e-12, "{:#?}", rep1.residuals);
        assert_eq!(
            serde_json::to_string(&rep1).unwrap(),
            serde_json::to_string(&rep2).unwrap()
        );
    }

    #[test]
    fn audit_detects_skipped_constraints() {
        // Fault injection: plain Lagrange interpolation breaks the
        // constant-field null space on a curvilinear grid.
        let b = bundle(
            &MappingSpec::sinusoidal_skew(1.0, 0.08, 0.05),
            12,
            12,
            2,
            ConstraintPolicy::PlainLagrange,
        );
        let eq = StateEquation::shallow_water(1.0);
        let rep = check_operator_identities(&b, &eq, 1, 1);
        assert!(
            rep.get("div_c100").unwrap() > 1e-6,
            "fault not detected: {:#?}",
            rep.residuals
        );
    }
}
