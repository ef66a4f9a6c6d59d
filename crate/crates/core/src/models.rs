//! State equations and semi-discrete right-hand sides for the three models:
//! linear wave, compressible wave (no advection), and isentropic Euler.
//! The shallow-water equations are the Euler model with `R(p) = sqrt(2p/g)`.

use serde::{Deserialize, Serialize};

use crate::field::{CellField, StagVecField};
use crate::mimetic::OperatorBundle;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    Linear,
    Compressible,
    Euler,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum StateEqKind {
    /// `p = c^2 rho`.
    IdealGas { c: f64 },
    /// `rho = sqrt(2p/g)`, i.e. `p = g rho^2 / 2` (shallow water).
    ShallowWater { g: f64 },
}

/// Pressure-density relation plus the integrated functions the operators
/// and the energy diagnostics need.
///
/// `q = int 1/R`, `s = int 1/R^2`; the lower integration limits are anchored
/// at `p_ref` (shallow-water `q` at zero, where the integral converges).
/// Only differences of `q` and `s` enter the operators, so the anchors only
/// fix where the internal energy vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateEquation {
    kind: StateEqKind,
    /// Reference density of the linear/compressible models.
    pub rho0: f64,
    /// Anchor pressure for the integration constants.
    pub p_ref: f64,
}

impl StateEquation {
    pub fn ideal_gas(c: f64, rho0: f64) -> Self {
        StateEquation {
            kind: StateEqKind::IdealGas { c },
            rho0,
            p_ref: 1.0,
        }
    }

    pub fn shallow_water(g: f64) -> Self {
        StateEquation {
            kind: StateEqKind::ShallowWater { g },
            rho0: 1.0,
            p_ref: 1.0,
        }
    }

    pub fn with_p_ref(mut self, p_ref: f64) -> Self {
        assert!(p_ref > 0.0, "reference pressure must be positive");
        self.p_ref = p_ref;
        self
    }

    pub fn sound_speed(&self) -> Option<f64> {
        match self.kind {
            StateEqKind::IdealGas { c } => Some(c),
            StateEqKind::ShallowWater { .. } => None,
        }
    }

    pub fn gravity(&self) -> Option<f64> {
        match self.kind {
            StateEqKind::ShallowWater { g } => Some(g),
            StateEqKind::IdealGas { .. } => None,
        }
    }

    /// Density `R(p)`.
    pub fn r(&self, p: f64) -> f64 {
        match self.kind {
            StateEqKind::IdealGas { c } => p / (c * c),
            StateEqKind::ShallowWater { g } => (2.0 * p / g).sqrt(),
        }
    }

    pub fn r_prime(&self, p: f64) -> f64 {
        match self.kind {
            StateEqKind::IdealGas { c } => 1.0 / (c * c),
            StateEqKind::ShallowWater { g } => 1.0 / (2.0 * g * p).sqrt(),
        }
    }

    /// `Q(p) = int 1/R`.
    pub fn q(&self, p: f64) -> f64 {
        match self.kind {
            StateEqKind::IdealGas { c } => c * c * (p.ln() - self.p_ref.ln()),
            StateEqKind::ShallowWater { g } => (2.0 * g * p).sqrt(),
        }
    }

    /// `S(p) = int 1/R^2`.
    pub fn s(&self, p: f64) -> f64 {
        match self.kind {
            StateEqKind::IdealGas { c } => c.powi(4) * (1.0 / self.p_ref - 1.0 / p),
            StateEqKind::ShallowWater { g } => 0.5 * g * (p.ln() - self.p_ref.ln()),
        }
    }

    pub fn p_from_rho(&self, rho: f64) -> f64 {
        match self.kind {
            StateEqKind::IdealGas { c } => c * c * rho,
            StateEqKind::ShallowWater { g } => 0.5 * g * rho * rho,
        }
    }

    /// Internal energy density of the compressible-wave model,
    /// `rho0 int_pref^p (R(p) - R(q)) / R^2(q) dq = rho0 (R s - q)`.
    pub fn e_int_compressible(&self, p: f64) -> f64 {
        self.rho0 * (self.r(p) * self.s(p) - self.q(p))
    }

    pub fn e_int_compressible_prime(&self, p: f64) -> f64 {
        self.rho0 * self.r_prime(p) * self.s(p)
    }

    /// Internal energy density of the Euler model,
    /// `int (R(p) - R(q)) / R(q) dq = R q - (p - anchor)`.
    /// The shallow-water integral converges at zero and reduces to `p`.
    pub fn e_int_euler(&self, p: f64) -> f64 {
        match self.kind {
            StateEqKind::IdealGas { .. } => self.r(p) * self.q(p) - (p - self.p_ref),
            StateEqKind::ShallowWater { .. } => self.r(p) * self.q(p) - p,
        }
    }

    pub fn e_int_euler_prime(&self, p: f64) -> f64 {
        self.r_prime(p) * self.q(p)
    }
}

/// Model tag plus prognostic fields. `vel` holds the velocity `v` for the
/// linear and compressible models and the local momentum `rv` for Euler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub model: Model,
    pub rho: CellField,
    pub vel: StagVecField,
}

impl ModelState {
    pub fn new(model: Model, rho: CellField, vel: StagVecField) -> Self {
        ModelState { model, rho, vel }
    }

    pub fn zeros(model: Model, m: usize) -> Self {
        ModelState {
            model,
            rho: CellField::zeros(m),
            vel: StagVecField::zeros(m),
        }
    }

    /// Flat `[rho; vel.x; vel.y]` layout for the time integrator.
    pub fn pack(&self) -> Vec<f64> {
        let mut out = self.rho.0.clone();
        out.extend_from_slice(&self.vel.x);
        out.extend_from_slice(&self.vel.y);
        out
    }

    pub fn unpack(model: Model, flat: &[f64]) -> Self {
        let m = flat.len() / 3;
        ModelState {
            model,
            rho: CellField(flat[..m].to_vec()),
            vel: StagVecField {
                x: flat[m..2 * m].to_vec(),
                y: flat[2 * m..].to_vec(),
            },
        }
    }
}

/// A model bound to its physical parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ModelDef {
    pub model: Model,
    pub eq: StateEquation,
}

impl ModelDef {
    pub fn linear(c: f64, rho0: f64) -> Self {
        ModelDef {
            model: Model::Linear,
            eq: StateEquation::ideal_gas(c, rho0),
        }
    }

    pub fn compressible(c: f64, rho0: f64) -> Self {
        ModelDef {
            model: Model::Compressible,
            eq: StateEquation::ideal_gas(c, rho0),
        }
    }

    pub fn shallow_water(g: f64) -> Self {
        ModelDef {
            model: Model::Euler,
            eq: StateEquation::shallow_water(g),
        }
    }

    /// Semi-discrete time derivative of `state`.
    pub fn rhs(&self, state: &ModelState, bundle: &OperatorBundle) -> Result<ModelState> {
        match self.model {
            Model::Linear => rhs_linear(state, bundle, self.eq.rho0, self.eq.sound_speed().unwrap_or(1.0)),
            Model::Compressible => rhs_compressible(state, bundle, &self.eq),
            Model::Euler => rhs_euler(state, bundle, &self.eq),
        }
    }

    /// Pressure field of a state.
    pub fn pressure(&self, state: &ModelState) -> CellField {
        state.rho.map(|r| self.eq.p_from_rho(r))
    }

    /// Velocity field of a state (Euler divides the momentum by the
    /// interpolated density).
    pub fn velocity(&self, state: &ModelState, bundle: &OperatorBundle) -> Result<StagVecField> {
        match self.model {
            Model::Linear | Model::Compressible => Ok(state.vel.clone()),
            Model::Euler => {
                let m_rho = interpolated_density(&state.rho, bundle)?;
                let m = state.vel.len();
                let mut v = StagVecField::zeros(m);
                for i in 0..m {
                    v.x[i] = state.vel.x[i] / m_rho[i];
                    v.y[i] = state.vel.y[i] / m_rho[i + m];
                }
                Ok(v)
            }
        }
    }
}

/// `Interp_{v<-c} rho`, checked positive (a negative value means the cell
/// density dipped low enough for the interpolation to produce an unusable
/// face density).
pub fn interpolated_density(rho: &CellField, bundle: &OperatorBundle) -> Result<Vec<f64>> {
    let m_rho = bundle.interp_vc.apply(rho);
    if let Some((i, &v)) = m_rho.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonPositive {
            what: "interpolated density",
            index: i,
            value: v,
        });
    }
    Ok(m_rho)
}

/// Linear wave: `drho/dt = -rho0 DIV v`, `dv/dt = -(1/rho0) GRAD p` with
/// `p = c^2 rho`.
pub fn rhs_linear(
    state: &ModelState,
    bundle: &OperatorBundle,
    rho0: f64,
    c: f64,
) -> Result<ModelState> {
    let div_v = bundle.apply_div(&state.vel);
    let drho = div_v.map(|d| -rho0 * d);
    let grad_rho = bundle.apply_grad(&state.rho);
    let scale = -c * c / rho0;
    let m = state.vel.len();
    let mut dvel = StagVecField::zeros(m);
    for i in 0..m {
        dvel.x[i] = scale * grad_rho.x[i];
        dvel.y[i] = scale * grad_rho.y[i];
    }
    Ok(ModelState::new(Model::Linear, drho, dvel))
}

/// Compressible wave: `drho/dt = -DIVr~ v`, `dv/dt = -GRAD Q(p)` with
/// `rho = R(p)`.
pub fn rhs_compressible(
    state: &ModelState,
    bundle: &OperatorBundle,
    eq: &StateEquation,
) -> Result<ModelState> {
    let p = state.rho.map(|r| eq.p_from_rho(r));
    let drho = bundle.apply_div_rtilde(&p, &state.vel, eq)?.map(|d| -d);
    let q = p.map(|x| eq.q(x));
    let grad_q = bundle.apply_grad(&q);
    let m = state.vel.len();
    let mut dvel = StagVecField::zeros(m);
    for i in 0..m {
        dvel.x[i] = -grad_q.x[i];
        dvel.y[i] = -grad_q.y[i];
    }
    Ok(ModelState::new(Model::Compressible, drho, dvel))
}

/// Isentropic Euler: `drho/dt = -DIVr v`, `drv/dt = -ADVEC v - GRAD p`,
/// with `v` recovered from the momentum via the interpolated density.
pub fn rhs_euler(
    state: &ModelState,
    bundle: &OperatorBundle,
    eq: &StateEquation,
) -> Result<ModelState> {
    let m = state.vel.len();
    let m_rho = interpolated_density(&state.rho, bundle)?;
    let mut v = StagVecField::zeros(m);
    for i in 0..m {
        v.x[i] = state.vel.x[i] / m_rho[i];
        v.y[i] = state.vel.y[i] / m_rho[i + m];
    }
    let p = state.rho.map(|r| eq.p_from_rho(r));

    let applier = bundle.advec_applier(&v, &p, eq)?;
    let advec_v = applier.apply(&v);
    let drho = applier.divr_v.map(|d| -d);
    let grad_p = bundle.apply_grad(&p);
    let mut dvel = StagVecField::zeros(m);
    for i in 0..m {
        dvel.x[i] = -advec_v.x[i] - grad_p.x[i];
        dvel.y[i] = -advec_v.y[i] - grad_p.y[i];
    }
    Ok(ModelState::new(Model::Euler, drho, dvel))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::{random_positive_cell_field, random_vec_field};
    use crate::grid::StaggeredGrid;
    use crate::linops::{inner_c, ConstraintPolicy};
    use crate::mapping::MappingSpec;
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn bundle(m: usize, order: usize) -> OperatorBundle {
        let grid = Arc::new(
            StaggeredGrid::build(&MappingSpec::sinusoidal_skew(1.0, 0.08, 0.05), m, m, order)
                .unwrap(),
        );
        OperatorBundle::build(grid, order, ConstraintPolicy::default()).unwrap()
    }

    fn sup(v: &[f64]) -> f64 {
        v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
    }

    #[test]
    fn state_equation_calculus() {
        // Q' = 1/R and S' = 1/R^2 by finite-difference spot check; R
        // positive and non-decreasing.
        for eq in [
            StateEquation::ideal_gas(1.3, 1.0),
            StateEquation::shallow_water(0.7),
        ] {
            let h = 1e-6;
            for p in [0.4, 1.0, 2.7] {
                let qp = (eq.q(p + h) - eq.q(p - h)) / (2.0 * h);
                let sp = (eq.s(p + h) - eq.s(p - h)) / (2.0 * h);
                assert_relative_eq!(qp, 1.0 / eq.r(p), max_relative = 1e-8);
                assert_relative_eq!(sp, 1.0 / (eq.r(p) * eq.r(p)), max_relative = 1e-8);
                assert!(eq.r(p) > 0.0);
                assert!(eq.r(p + h) >= eq.r(p));
                assert_relative_eq!(eq.r(eq.p_from_rho(0.9)), 0.9, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn shallow_water_closed_forms_match_quadrature() {
        // Oracle: integrate 1/R and (R(p)-R(q))/R(q) from 0 with the
        // substitution q = u^2 (the integrand is 1/sqrt(q)-singular).
        let g = 1.7;
        let eq = StateEquation::shallow_water(g);
        let p: f64 = 0.83;
        let n = 20_000;
        let du = p.sqrt() / n as f64;
        let mut q_int = 0.0;
        let mut e_int = 0.0;
        for k in 0..n {
            let u = (k as f64 + 0.5) * du;
            let q = u * u;
            q_int += 2.0 * u * du / eq.r(q);
            e_int += 2.0 * u * du * (eq.r(p) - eq.r(q)) / eq.r(q);
        }
        assert_relative_eq!(eq.q(p), q_int, max_relative = 1e-6);
        assert_relative_eq!(eq.q(p), (2.0 * g * p).sqrt(), max_relative = 1e-14);
        // Q(p) = g * rho.
        assert_relative_eq!(eq.q(p), g * eq.r(p), max_relative = 1e-14);
        assert_relative_eq!(eq.e_int_euler(p), e_int, max_relative = 1e-6);
        assert_relative_eq!(eq.e_int_euler(p), p, max_relative = 1e-14);
    }

    #[test]
    fn pack_round_trip_is_lossless() {
        let b = bundle(12, 2);
        let m = b.grid.num_cells();
        let state = ModelState::new(
            Model::Euler,
            random_positive_cell_field(&b.grid, 1, 1.0, 0.3),
            random_vec_field(&b.grid, 2),
        );
        let back = ModelState::unpack(Model::Euler, &state.pack());
        assert_eq!(state, back);
        assert_eq!(state.pack().len(), 3 * m);
    }

    #[test]
    fn equilibria_have_zero_derivative() {
        let b = bundle(12, 4);
        let m = b.grid.num_cells();
        let rest = |model| ModelState::new(model, CellField::constant(m, 1.2), StagVecField::zeros(m));

        let d = ModelDef::linear(1.0, 1.0)
            .rhs(&rest(Model::Linear), &b)
            .unwrap();
        assert!(sup(&d.pack()) < 1e-12);

        let d = ModelDef::compressible(1.0, 1.0)
            .rhs(&rest(Model::Compressible), &b)
            .unwrap();
        assert!(sup(&d.pack()) < 1e-12);

        // Lake at rest.
        let d = ModelDef::shallow_water(1.0)
            .rhs(&rest(Model::Euler), &b)
            .unwrap();
        assert!(sup(&d.pack()) < 1e-12);
    }

    #[test]
    fn linear_mass_derivative_vanishes() {
        let b = bundle(12, 4);
        let def = ModelDef::linear(1.0, 1.0);
        let state = ModelState::new(
            Model::Linear,
            random_positive_cell_field(&b.grid, 3, 1.0, 0.4),
            random_vec_field(&b.grid, 4),
        );
        let d = def.rhs(&state, &b).unwrap();
        let dm = inner_c(&b.grid.c1(), &d.rho, &b.grid).unwrap();
        let scale: f64 = d.rho.iter().zip(b.grid.dvc.iter()).map(|(r, w)| (r * w).abs()).sum();
        assert!(dm.abs() < 1e-13 * scale.max(1.0));
    }

    #[test]
    fn compressible_grad_q_of_constant_pressure_vanishes() {
        // Q(p) for p = c^2 rho is c^2 ln(p) + const, so GRAD Q(const) = 0.
        let b = bundle(12, 4);
        let eq = StateEquation::ideal_gas(1.0, 1.0);
        let m = b.grid.num_cells();
        let state = ModelState::new(
            Model::Compressible,
            CellField::constant(m, 0.7),
            random_vec_field(&b.grid, 5),
        );
        let d = rhs_compressible(&state, &b, &eq).unwrap();
        assert!(sup(&d.vel.to_flat()) < 1e-12);
    }

    #[test]
    fn euler_rejects_non_positive_density() {
        let b = bundle(12, 2);
        let m = b.grid.num_cells();
        let mut rho = CellField::constant(m, 1.0);
        rho[3] = -2.0;
        let state = ModelState::new(Model::Euler, rho, StagVecField::zeros(m));
        let err = ModelDef::shallow_water(1.0).rhs(&state, &b).unwrap_err();
        assert!(matches!(err, Error::NonPositive { .. }));
    }
}
