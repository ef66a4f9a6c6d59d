//! Smooth periodic mappings from computational to physical space.
//!
//! A mapping `X: [0,L)^2 -> R^2` is shift-periodic,
//! `X(xi + L, eta) = X(xi, eta) + (L, 0)` and analogously in `eta`, and must
//! have a positive Jacobian determinant wherever the grid samples it. The
//! Jacobian is evaluated analytically, not by differencing grid points.

use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::TAU;

use crate::{Error, Result};

/// Serializable description of a mapping.
///
/// `params` carries named real parameters; every kind understands `length`
/// (the domain side `L`, default `sqrt(2)`). `sinusoidal-skew` reads the
/// amplitudes `a` and `b`; `fourier-perturbation` reads `amplitude` and
/// `max_mode` and draws its modes from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingSpec {
    pub kind: MappingKind,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MappingKind {
    Uniform,
    SinusoidalSkew,
    FourierPerturbation,
}

/// Default domain side. The built-in linear-wave solution has period
/// `1/sqrt(2)` along the grid diagonal, so a side of `sqrt(2)` makes it
/// exactly periodic on the domain.
pub const DEFAULT_LENGTH: f64 = std::f64::consts::SQRT_2;

impl MappingSpec {
    pub fn uniform(length: f64) -> Self {
        let mut params = BTreeMap::new();
        params.insert("length".into(), length);
        MappingSpec {
            kind: MappingKind::Uniform,
            params,
            seed: 0,
        }
    }

    pub fn sinusoidal_skew(length: f64, a: f64, b: f64) -> Self {
        let mut params = BTreeMap::new();
        params.insert("length".into(), length);
        params.insert("a".into(), a);
        params.insert("b".into(), b);
        MappingSpec {
            kind: MappingKind::SinusoidalSkew,
            params,
            seed: 0,
        }
    }

    pub fn fourier_perturbation(length: f64, amplitude: f64, seed: u64) -> Self {
        let mut params = BTreeMap::new();
        params.insert("length".into(), length);
        params.insert("amplitude".into(), amplitude);
        MappingSpec {
            kind: MappingKind::FourierPerturbation,
            params,
            seed,
        }
    }

    fn param(&self, name: &str, default: f64) -> f64 {
        self.params.get(name).copied().unwrap_or(default)
    }

    /// Resolve the spec into an evaluator.
    pub fn build(&self) -> Result<Mapping> {
        let length = self.param("length", DEFAULT_LENGTH);
        if !(length > 0.0) {
            return Err(Error::InvalidInput(format!(
                "mapping length must be positive, got {length}"
            )));
        }
        let kind = match self.kind {
            MappingKind::Uniform => Evaluator::Uniform,
            MappingKind::SinusoidalSkew => Evaluator::SinusoidalSkew {
                a: self.param("a", 0.1),
                b: self.param("b", 0.1),
            },
            MappingKind::FourierPerturbation => {
                let amplitude = self.param("amplitude", 0.02);
                let max_mode = self.param("max_mode", 2.0).round().max(1.0) as i64;
                Evaluator::Fourier {
                    modes: draw_modes(self.seed, amplitude * length, max_mode),
                }
            }
        };
        Ok(Mapping { length, kind })
    }
}

/// One Fourier mode of the coordinate perturbation.
#[derive(Debug, Clone)]
struct Mode {
    k: i64,
    l: i64,
    amp: Vector2<f64>,
    phase: Vector2<f64>,
}

fn draw_modes(seed: u64, scale: f64, max_mode: i64) -> Vec<Mode> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut modes = Vec::new();
    for k in 0..=max_mode {
        for l in -max_mode..=max_mode {
            if k == 0 && l <= 0 {
                continue; // (0,0) is a shift; (0,-l) duplicates (0,l)
            }
            let fall_off = ((k * k + l * l) as f64).sqrt();
            let amp = Vector2::new(
                rng.gen_range(-1.0..1.0) * scale / fall_off,
                rng.gen_range(-1.0..1.0) * scale / fall_off,
            );
            let phase = Vector2::new(rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU));
            modes.push(Mode { k, l, amp, phase });
        }
    }
    modes
}

#[derive(Debug, Clone)]
enum Evaluator {
    Uniform,
    SinusoidalSkew { a: f64, b: f64 },
    Fourier { modes: Vec<Mode> },
}

/// Resolved mapping evaluator: positions and analytic Jacobians.
#[derive(Debug, Clone)]
pub struct Mapping {
    length: f64,
    kind: Evaluator,
}

impl Mapping {
    pub fn length(&self) -> f64 {
        self.length
    }

    /// Physical position `X(xi, eta)`. Accepts coordinates outside `[0,L)`;
    /// shift-periodicity is inherent in the formulas.
    pub fn position(&self, xi: f64, eta: f64) -> Vector2<f64> {
        let w = TAU / self.length;
        match &self.kind {
            Evaluator::Uniform => Vector2::new(xi, eta),
            Evaluator::SinusoidalSkew { a, b } => {
                let s = (w * xi).sin() * (w * eta).sin();
                Vector2::new(xi + a * s, eta + b * s)
            }
            Evaluator::Fourier { modes } => {
                let mut p = Vector2::new(xi, eta);
                for m in modes {
                    let arg = w * (m.k as f64 * xi + m.l as f64 * eta);
                    p.x += m.amp.x * (arg + m.phase.x).cos();
                    p.y += m.amp.y * (arg + m.phase.y).cos();
                }
                p
            }
        }
    }

    /// Analytic Jacobian `dX/d(xi,eta)`.
    pub fn jacobian(&self, xi: f64, eta: f64) -> Matrix2<f64> {
        let w = TAU / self.length;
        match &self.kind {
            Evaluator::Uniform => Matrix2::identity(),
            Evaluator::SinusoidalSkew { a, b } => {
                let ds_dxi = w * (w * xi).cos() * (w * eta).sin();
                let ds_deta = w * (w * xi).sin() * (w * eta).cos();
                Matrix2::new(
                    1.0 + a * ds_dxi,
                    a * ds_deta,
                    b * ds_dxi,
                    1.0 + b * ds_deta,
                )
            }
            Evaluator::Fourier { modes } => {
                let mut j = Matrix2::identity();
                for m in modes {
                    let arg = w * (m.k as f64 * xi + m.l as f64 * eta);
                    let dx = -m.amp.x * (arg + m.phase.x).sin() * w;
                    let dy = -m.amp.y * (arg + m.phase.y).sin() * w;
                    j[(0, 0)] += dx * m.k as f64;
                    j[(0, 1)] += dx * m.l as f64;
                    j[(1, 0)] += dy * m.k as f64;
                    j[(1, 1)] += dy * m.l as f64;
                }
                j
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn spec_json_round_trip() {
        let spec = MappingSpec::sinusoidal_skew(1.5, 0.1, 0.05);
        let text = serde_json::to_string(&spec).unwrap();
        let back: MappingSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(spec, back);
        assert!(text.contains("sinusoidal-skew"));
    }

    #[test]
    fn shift_periodicity() {
        for spec in [
            MappingSpec::uniform(1.3),
            MappingSpec::sinusoidal_skew(1.3, 0.12, 0.07),
            MappingSpec::fourier_perturbation(1.3, 0.02, 42),
        ] {
            let map = spec.build().unwrap();
            let l = map.length();
            for &(xi, eta) in &[(0.1, 0.7), (0.63, 0.2), (1.1, 1.25)] {
                let p = map.position(xi, eta);
                let px = map.position(xi + l, eta);
                let py = map.position(xi, eta + l);
                assert_relative_eq!(px.x, p.x + l, max_relative = 1e-13);
                assert_relative_eq!(px.y, p.y, epsilon = 1e-13);
                assert_relative_eq!(py.x, p.x, epsilon = 1e-13);
                assert_relative_eq!(py.y, p.y + l, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        for spec in [
            MappingSpec::sinusoidal_skew(1.0, 0.1, 0.05),
            MappingSpec::fourier_perturbation(1.0, 0.02, 7),
        ] {
            let map = spec.build().unwrap();
            let h = 1e-6;
            for &(xi, eta) in &[(0.21, 0.34), (0.8, 0.05)] {
                let j = map.jacobian(xi, eta);
                let dxi = (map.position(xi + h, eta) - map.position(xi - h, eta)) / (2.0 * h);
                let deta = (map.position(xi, eta + h) - map.position(xi, eta - h)) / (2.0 * h);
                assert_relative_eq!(j[(0, 0)], dxi.x, epsilon = 1e-8);
                assert_relative_eq!(j[(1, 0)], dxi.y, epsilon = 1e-8);
                assert_relative_eq!(j[(0, 1)], deta.x, epsilon = 1e-8);
                assert_relative_eq!(j[(1, 1)], deta.y, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn fourier_is_seed_deterministic() {
        let a = MappingSpec::fourier_perturbation(1.0, 0.02, 3).build().unwrap();
        let b = MappingSpec::fourier_perturbation(1.0, 0.02, 3).build().unwrap();
        let p = a.position(0.3, 0.4);
        let q = b.position(0.3, 0.4);
        assert_eq!(p, q);
    }
}
