//! Exact reference solutions.
//!
//! All references are one-dimensional waves along the grid diagonal
//! `d = (1, -1)/sqrt(2)`: the closed-form linear traveling wave, and simple
//! waves for the nonlinear models built from the characteristic speeds and
//! Riemann invariants (backward invariant constant everywhere, forward
//! invariant constant along characteristics). Simple waves steepen and
//! become multivalued at the shock time; evaluation past it is refused.

use crate::field::{CellField, StagVecField};
use crate::mimetic::OperatorBundle;
use crate::models::{interpolated_density, Model, ModelDef, ModelState, StateEquation};
use crate::{Error, Result};

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Closed-form linear-wave solution: pressure and velocity at `(x, y, t)`.
///
/// The pulse travels in the (1,-1) diagonal at speed `c sqrt(2)` in `x`;
/// its period along the diagonal is `1/sqrt(2)`, so it is exactly periodic
/// on a square domain of side `sqrt(2)`.
pub fn linear_exact(x: f64, y: f64, t: f64, rho0: f64, c: f64) -> (f64, [f64; 2]) {
    let phase = SQRT2 * std::f64::consts::PI * (x - y - SQRT2 * c * t);
    let p = (-(2.0 / (9.0 * std::f64::consts::PI.powi(2))) * phase.sin().powi(2)).exp();
    let k = SQRT2 / (2.0 * c * rho0);
    (p, [k * p, -k * p])
}

/// Sample the linear-wave solution as a model state.
pub fn linear_state(grid: &crate::grid::StaggeredGrid, t: f64, rho0: f64, c: f64) -> ModelState {
    let m = grid.num_cells();
    let mut rho = CellField::zeros(m);
    let mut vel = StagVecField::zeros(m);
    for i in 0..m {
        let (p, _) = linear_exact(grid.xc[i].x, grid.xc[i].y, t, rho0, c);
        rho[i] = p / (c * c);
        let (_, ve) = linear_exact(grid.xe[i].x, grid.xe[i].y, t, rho0, c);
        vel.x[i] = grid.rxx_at_e[i] * ve[0] + grid.rxy_at_e[i] * ve[1];
        let (_, vn) = linear_exact(grid.xn[i].x, grid.xn[i].y, t, rho0, c);
        vel.y[i] = grid.ryx_at_n[i] * vn[0] + grid.ryy_at_n[i] * vn[1];
    }
    ModelState::new(Model::Linear, rho, vel)
}

/// Smooth periodic 1D density profile along the diagonal coordinate.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Profile {
    Constant { value: f64 },
    /// `base + amplitude * exp(-(2/(9 pi^2)) sin^2(pi s sqrt(2)/length))`,
    /// the same pulse shape as the linear reference; period `length/sqrt(2)`.
    Bump {
        base: f64,
        amplitude: f64,
        length: f64,
    },
}

impl Profile {
    pub fn period(&self) -> f64 {
        match self {
            Profile::Constant { .. } => 1.0,
            Profile::Bump { length, .. } => length / SQRT2,
        }
    }

    pub fn value(&self, s: f64) -> f64 {
        match *self {
            Profile::Constant { value } => value,
            Profile::Bump {
                base,
                amplitude,
                length,
            } => {
                let arg = std::f64::consts::PI * s * SQRT2 / length;
                base + amplitude
                    * (-(2.0 / (9.0 * std::f64::consts::PI.powi(2))) * arg.sin().powi(2)).exp()
            }
        }
    }

    /// Density the invariant is anchored at (fluid at rest there).
    pub fn reference_density(&self) -> f64 {
        match *self {
            Profile::Constant { value } => value,
            Profile::Bump { base, .. } => base,
        }
    }
}

/// Exact simple-wave solution for the compressible-wave or shallow-water
/// model: the backward Riemann invariant is constant everywhere, so density
/// and velocity are transported rigidly along forward characteristics.
#[derive(Debug, Clone)]
pub struct SimpleWave {
    pub model: Model,
    pub eq: StateEquation,
    pub profile: Profile,
    /// The constant backward invariant `F_-`.
    pub invariant: f64,
    /// Earliest characteristic-crossing time; `None` if none forms.
    pub t_shock: Option<f64>,
    period: f64,
    v_plus_min: f64,
    v_plus_max: f64,
}

impl SimpleWave {
    pub fn new(model: Model, eq: StateEquation, profile: Profile) -> Result<Self> {
        if model == Model::Linear {
            return Err(Error::InvalidInput(
                "the linear model has its own closed-form reference".into(),
            ));
        }
        let rho_ref = profile.reference_density();
        let invariant = match model {
            Model::Euler => {
                let g = eq.gravity().ok_or_else(|| {
                    Error::InvalidInput("simple Euler wave needs the shallow-water state equation".into())
                })?;
                -2.0 * (g * rho_ref).sqrt()
            }
            Model::Compressible => {
                let c = eq
                    .sound_speed()
                    .ok_or_else(|| Error::InvalidInput("compressible wave needs a sound speed".into()))?;
                (rho_ref / c).ln()
            }
            Model::Linear => unreachable!(),
        };
        let mut wave = SimpleWave {
            model,
            eq,
            profile,
            invariant,
            t_shock: None,
            period: profile.period(),
            v_plus_min: 0.0,
            v_plus_max: 0.0,
        };
        let n = 2048;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for k in 0..n {
            let vp = wave.v_plus_at(k as f64 * wave.period / n as f64);
            lo = lo.min(vp);
            hi = hi.max(vp);
        }
        wave.v_plus_min = lo;
        wave.v_plus_max = hi;
        wave.t_shock = wave.compute_shock_time();
        Ok(wave)
    }

    /// Velocity from the constant backward invariant.
    pub fn velocity_of_rho(&self, rho: f64) -> Result<f64> {
        match self.model {
            Model::Euler => {
                let g = self.eq.gravity().expect("validated in new");
                Ok(self.invariant + 2.0 * (g * rho).sqrt())
            }
            Model::Compressible => {
                // Solve ln(rho / V+) - v V+ / (2 c^2) = F- for v; the left
                // side is strictly decreasing, so Newton from 0 with a
                // bisection safeguard converges.
                let c = self.eq.sound_speed().expect("validated in new");
                let g_of = |v: f64| {
                    let w = (v * v + 4.0 * c * c).sqrt();
                    let vp = 0.5 * (v + w);
                    (rho / vp).ln() - v * vp / (2.0 * c * c) - self.invariant
                };
                let (mut lo, mut hi) = (-20.0 * c, 20.0 * c);
                if g_of(lo) < 0.0 || g_of(hi) > 0.0 {
                    return Err(Error::Numerical(
                        "invariant equation has no root in the search bracket".into(),
                    ));
                }
                let mut v = 0.0;
                for _ in 0..50 {
                    let w = (v * v + 4.0 * c * c).sqrt();
                    let vp = 0.5 * (v + w);
                    let gv = (rho / vp).ln() - v * vp / (2.0 * c * c) - self.invariant;
                    if gv.abs() < 1e-14 * (1.0 + v.abs()) {
                        return Ok(v);
                    }
                    if gv > 0.0 {
                        lo = v;
                    } else {
                        hi = v;
                    }
                    let dg = -(1.0 + vp * vp / (c * c)) / w;
                    let mut next = v - gv / dg;
                    if !(next > lo && next < hi) {
                        next = 0.5 * (lo + hi);
                    }
                    v = next;
                }
                Err(Error::Numerical(
                    "velocity-from-invariant Newton did not converge in 50 iterations".into(),
                ))
            }
            Model::Linear => unreachable!(),
        }
    }

    /// Forward propagation speed at state `(rho, v)`.
    pub fn v_plus(&self, rho: f64, v: f64) -> f64 {
        match self.model {
            Model::Euler => {
                let g = self.eq.gravity().expect("validated in new");
                v + (g * rho).sqrt()
            }
            Model::Compressible => {
                let c = self.eq.sound_speed().expect("validated in new");
                0.5 * (v + (v * v + 4.0 * c * c).sqrt())
            }
            Model::Linear => unreachable!(),
        }
    }

    /// Forward speed along the initial profile.
    pub fn v_plus_at(&self, s: f64) -> f64 {
        let rho = self.profile.value(s);
        let v = self.velocity_of_rho(rho).expect("profile densities are admissible");
        self.v_plus(rho, v)
    }

    fn v_plus_slope(&self, s: f64) -> f64 {
        let h = 1e-6 * self.period;
        (self.v_plus_at(s + h) - self.v_plus_at(s - h)) / (2.0 * h)
    }

    fn compute_shock_time(&self) -> Option<f64> {
        let n = 4096;
        let p = self.period;
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..n {
            let s = k as f64 * p / n as f64;
            let slope = self.v_plus_slope(s);
            if slope < best.0 {
                best = (slope, s);
            }
        }
        // Golden-section refinement of the steepest-compression point.
        let (mut a, mut b) = (best.1 - 2.0 * p / n as f64, best.1 + 2.0 * p / n as f64);
        let phi = 0.5 * (3.0 - 5f64.sqrt());
        let (mut x1, mut x2) = (a + phi * (b - a), b - phi * (b - a));
        let (mut f1, mut f2) = (self.v_plus_slope(x1), self.v_plus_slope(x2));
        while b - a > 1e-10 * p {
            if f1 < f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = a + phi * (b - a);
                f1 = self.v_plus_slope(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = b - phi * (b - a);
                f2 = self.v_plus_slope(x2);
            }
        }
        let min_slope = f1.min(f2);
        let scale = ((self.v_plus_max - self.v_plus_min) / p).max(1e-12);
        if min_slope >= -1e-9 * scale {
            None
        } else {
            Some(-1.0 / min_slope)
        }
    }

    /// Earliest crossing time of forward characteristics.
    pub fn shock_time(&self) -> Result<f64> {
        self.t_shock.ok_or(Error::NoShock)
    }

    /// Foot point `sigma` with `sigma + V+(sigma) t = s` (periodically
    /// lifted). Safeguarded Newton; falls back to bisection whenever the
    /// Newton step leaves the bracket.
    pub fn foot_point(&self, s: f64, t: f64) -> Result<f64> {
        if t == 0.0 {
            return Ok(s);
        }
        if t < 0.0 {
            return Err(Error::InvalidInput("foot point requires t >= 0".into()));
        }
        let pad = 1e-3 * self.period;
        let mut lo = s - self.v_plus_max * t - pad;
        let mut hi = s - self.v_plus_min * t + pad;
        let g_of = |sig: f64| sig + self.v_plus_at(sig) * t - s;
        debug_assert!(g_of(lo) < 0.0 && g_of(hi) > 0.0);
        let mut sigma = (s - self.v_plus_at(s) * t).clamp(lo, hi);
        for _ in 0..50 {
            let g = g_of(sigma);
            if g.abs() < 1e-13 * self.period.max(s.abs()).max(1.0) {
                return Ok(sigma);
            }
            if g > 0.0 {
                hi = sigma;
            } else {
                lo = sigma;
            }
            let slope = 1.0 + t * self.v_plus_slope(sigma);
            let mut next = if slope > 0.0 { sigma - g / slope } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            sigma = next;
        }
        Err(Error::Numerical(
            "foot-point Newton did not converge in 50 iterations".into(),
        ))
    }

    /// Density and velocity vector at `(x, y, t)`, `0 <= t < t_shock`.
    pub fn eval(&self, x: f64, y: f64, t: f64) -> Result<(f64, [f64; 2])> {
        if let Some(ts) = self.t_shock {
            if t >= ts {
                return Err(Error::Multivalued { t, t_shock: ts });
            }
        }
        let s = (x - y) / SQRT2;
        let sigma = self.foot_point(s, t)?;
        let rho = self.profile.value(sigma);
        let v = self.velocity_of_rho(rho)?;
        let k = v / SQRT2;
        Ok((rho, [k, -k]))
    }

    /// Sample the wave at time `t` as a model state on a grid.
    pub fn state_at(&self, bundle: &OperatorBundle, t: f64) -> Result<ModelState> {
        let g = &bundle.grid;
        let m = g.num_cells();
        let mut rho = CellField::zeros(m);
        let mut vel = StagVecField::zeros(m);
        for i in 0..m {
            let (r, _) = self.eval(g.xc[i].x, g.xc[i].y, t)?;
            rho[i] = r;
            let (_, ve) = self.eval(g.xe[i].x, g.xe[i].y, t)?;
            vel.x[i] = g.rxx_at_e[i] * ve[0] + g.rxy_at_e[i] * ve[1];
            let (_, vn) = self.eval(g.xn[i].x, g.xn[i].y, t)?;
            vel.y[i] = g.ryx_at_n[i] * vn[0] + g.ryy_at_n[i] * vn[1];
        }
        if self.model == Model::Euler {
            let m_rho = interpolated_density(&rho, bundle)?;
            for i in 0..m {
                vel.x[i] *= m_rho[i];
                vel.y[i] *= m_rho[i + m];
            }
        }
        Ok(ModelState::new(self.model, rho, vel))
    }
}

/// Reference simple wave for a model definition and domain length.
pub fn default_wave(def: &ModelDef, length: f64, base: f64, amplitude: f64) -> Result<SimpleWave> {
    SimpleWave::new(
        def.model,
        def.eq,
        Profile::Bump {
            base,
            amplitude,
            length,
        },
    )
}

/// Relative 2-norm difference of two sample vectors.
pub fn rel_l2_error(got: &[f64], want: &[f64]) -> f64 {
    debug_assert_eq!(got.len(), want.len());
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, b) in got.iter().zip(want) {
        num += (a - b) * (a - b);
        den += b * b;
    }
    (num / den.max(1e-300)).sqrt()
}
