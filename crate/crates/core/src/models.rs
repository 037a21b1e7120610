//! Vector fields and Jacobians: the full prey/susceptible/infected predator
//! system, its disease-free restriction, and the van der Pol counterexample
//! with a radius-dependent vertical coordinate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("parameter `{name}` must be strictly positive (got {value})")]
    NonPositiveParameter { name: &'static str, value: f64 },
}

/// The five positive constants of the predator-disease system.
///
/// `r` prey logistic growth rate, `h` half-saturation constant of the
/// Holling type II response, `m` predator decay rate, `mu` disease-induced
/// mortality, `beta` transmissibility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub r: f64,
    pub h: f64,
    pub m: f64,
    pub mu: f64,
    pub beta: f64,
}

impl ModelParams {
    pub fn new(r: f64, h: f64, m: f64, mu: f64, beta: f64) -> Result<Self, ModelError> {
        let p = Self { r, h, m, mu, beta };
        p.validate()?;
        Ok(p)
    }

    /// Baseline parameter set used throughout the tests and examples:
    /// r = 2, h = 0.3, m = 0.3, mu = 0.5, beta = 1.3.
    pub fn baseline() -> Self {
        Self {
            r: 2.0,
            h: 0.3,
            m: 0.3,
            mu: 0.5,
            beta: 1.3,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, value) in [
            ("r", self.r),
            ("h", self.h),
            ("m", self.m),
            ("mu", self.mu),
            ("beta", self.beta),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(ModelError::NonPositiveParameter { name, value });
            }
        }
        Ok(())
    }
}

/// A point (N, S, I) in the nonnegative orthant: prey, susceptible predators,
/// infected predators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State3 {
    pub n: f64,
    pub s: f64,
    pub i: f64,
}

impl State3 {
    pub fn new(n: f64, s: f64, i: f64) -> Self {
        Self { n, s, i }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.n, self.s, self.i]
    }

    pub fn from_slice(y: &[f64]) -> Self {
        Self {
            n: y[0],
            s: y[1],
            i: y[2],
        }
    }

    pub fn in_orthant(&self) -> bool {
        self.n >= 0.0 && self.s >= 0.0 && self.i >= 0.0
    }

    pub fn norm(&self) -> f64 {
        (self.n * self.n + self.s * self.s + self.i * self.i).sqrt()
    }
}

/// Right-hand side of the full system:
///
/// ```text
/// dN/dt = r N (1 - N) - N (S + I) / (h + N)
/// dS/dt = N (S + I) / (h + N) - m S - beta S I
/// dI/dt = beta S I - (m + mu) I
/// ```
pub fn rhs_full(p: &ModelParams, x: &State3) -> [f64; 3] {
    let predation = x.n * (x.s + x.i) / (p.h + x.n);
    let infection = p.beta * x.s * x.i;
    [
        p.r * x.n * (1.0 - x.n) - predation,
        predation - p.m * x.s - infection,
        infection - (p.m + p.mu) * x.i,
    ]
}

/// Disease-free restriction (I = 0), written in Kolmogorov form
/// N' = N [r(1-N) - S/(h+N)], S' = S [N/(h+N) - m].
pub fn rhs_disease_free(p: &ModelParams, n: f64, s: f64) -> [f64; 2] {
    [
        n * (p.r * (1.0 - n) - s / (p.h + n)),
        s * (n / (p.h + n) - p.m),
    ]
}

/// Jacobian of [`rhs_full`] at `x`.
pub fn jacobian_full(p: &ModelParams, x: &State3) -> [[f64; 3]; 3] {
    let d = p.h + x.n;
    let hyz = p.h * (x.s + x.i) / (d * d);
    let nd = x.n / d;
    [
        [p.r * (1.0 - 2.0 * x.n) - hyz, -nd, -nd],
        [hyz, nd - p.m - p.beta * x.i, nd - p.beta * x.s],
        [0.0, p.beta * x.i, p.beta * x.s - (p.m + p.mu)],
    ]
}

/// Stiffness/coupling constants of the counterexample system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleParams {
    pub eps: f64,
    pub delta: f64,
}

impl CounterexampleParams {
    pub fn new(eps: f64, delta: f64) -> Result<Self, ModelError> {
        if !(eps > 0.0) {
            return Err(ModelError::NonPositiveParameter {
                name: "eps",
                value: eps,
            });
        }
        if !(delta > 0.0) {
            return Err(ModelError::NonPositiveParameter {
                name: "delta",
                value: delta,
            });
        }
        Ok(Self { eps, delta })
    }
}

/// Piecewise-linear clamp max{min{s - 2, 0.5}, -1}: negative near the origin,
/// positive for squared radii past 2, saturating at 0.5.
pub fn radial_gain(s: f64) -> f64 {
    (s - 2.0).min(0.5).max(-1.0)
}

/// Van der Pol oscillator in the Liénard plane coupled with a vertical
/// coordinate whose growth rate depends on the squared planar radius:
///
/// ```text
/// dx/dt = y - eps (x^3/3 - x)
/// dy/dt = -x
/// dz/dt = delta * radial_gain(x^2 + y^2) * z
/// ```
pub fn rhs_counterexample(c: &CounterexampleParams, v: &[f64; 3]) -> [f64; 3] {
    let [x, y, z] = *v;
    [
        y - c.eps * (x * x * x / 3.0 - x),
        -x,
        c.delta * radial_gain(x * x + y * y) * z,
    ]
}

/// The full system as a dimension-3 vector field usable by the integrator.
pub fn full_system(p: ModelParams) -> impl Fn(&[f64], &mut [f64]) + Copy {
    move |y, dy| {
        let d = rhs_full(&p, &State3::from_slice(y));
        dy.copy_from_slice(&d);
    }
}

/// The disease-free subsystem as a dimension-2 vector field.
pub fn disease_free_system(p: ModelParams) -> impl Fn(&[f64], &mut [f64]) + Copy {
    move |y, dy| {
        let d = rhs_disease_free(&p, y[0], y[1]);
        dy.copy_from_slice(&d);
    }
}

/// The counterexample as a dimension-3 vector field.
pub fn counterexample_system(c: CounterexampleParams) -> impl Fn(&[f64], &mut [f64]) + Copy {
    move |y, dy| {
        let d = rhs_counterexample(&c, &[y[0], y[1], y[2]]);
        dy.copy_from_slice(&d);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rhs_full_vanishes_at_origin_and_logistic_point() {
        let p = ModelParams::baseline();
        assert_eq!(rhs_full(&p, &State3::new(0.0, 0.0, 0.0)), [0.0, 0.0, 0.0]);
        assert_eq!(rhs_full(&p, &State3::new(1.0, 0.0, 0.0)), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn rhs_full_matches_hand_substitution() {
        // Direct arithmetic at (0.5, 0.2, 0.1): predation = 0.5*0.3/0.8,
        // infection = 1.3*0.2*0.1.
        let p = ModelParams::baseline();
        let d = rhs_full(&p, &State3::new(0.5, 0.2, 0.1));
        assert!((d[0] - 0.3125).abs() < 1e-15);
        assert!((d[1] - 0.1015).abs() < 1e-15);
        assert!((d[2] - (-0.054)).abs() < 1e-15);
    }

    #[test]
    fn disease_free_agrees_with_full_at_zero_infection() {
        let p = ModelParams::baseline();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let n = rng.random_range(0.0..2.0);
            let s = rng.random_range(0.0..2.0);
            let full = rhs_full(&p, &State3::new(n, s, 0.0));
            let df = rhs_disease_free(&p, n, s);
            assert!((full[0] - df[0]).abs() <= 1e-14 * (1.0 + full[0].abs()));
            assert!((full[1] - df[1]).abs() <= 1e-14 * (1.0 + full[1].abs()));
        }
    }

    #[test]
    fn prey_extinct_axis_decays_exponentially() {
        let p = ModelParams::baseline();
        let d = rhs_disease_free(&p, 0.0, 0.7);
        assert_eq!(d[0], 0.0);
        assert!((d[1] - (-p.m * 0.7)).abs() < 1e-15);
    }

    #[test]
    fn kolmogorov_faces_are_invariant() {
        let p = ModelParams::baseline();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let a = rng.random_range(0.0..2.0);
            let b = rng.random_range(0.0..2.0);
            // I = 0 forces dI/dt = 0 and N = 0 forces dN/dt = 0, exactly.
            assert_eq!(rhs_full(&p, &State3::new(a, b, 0.0))[2], 0.0);
            assert_eq!(rhs_full(&p, &State3::new(0.0, a, b))[0], 0.0);
        }
    }

    #[test]
    fn simplex_flux_is_negative_above_dissipativity_bound() {
        // On N+S+I = k with k > 1 + r/(4m) the flow points inward.
        let p = ModelParams::baseline();
        let k = 1.0 + p.r / (4.0 * p.m) + 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            // Uniform over the simplex slice via sorted uniforms.
            let mut u = [rng.random::<f64>(), rng.random::<f64>()];
            u.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let x = State3::new(k * u[0], k * (u[1] - u[0]), k * (1.0 - u[1]));
            let d = rhs_full(&p, &x);
            assert!(
                d[0] + d[1] + d[2] < 0.0,
                "outward flux at {x:?}: {}",
                d[0] + d[1] + d[2]
            );
        }
    }

    #[test]
    fn susceptible_face_flows_inward() {
        let p = ModelParams::baseline();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let n = rng.random_range(1e-6..2.0);
            let i = rng.random_range(1e-6..2.0);
            let d = rhs_full(&p, &State3::new(n, 0.0, i));
            assert!(d[1] > 0.0);
        }
    }

    #[test]
    fn predator_face_contracts_at_rate_m() {
        let p = ModelParams::baseline();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let s = rng.random_range(0.0..2.0);
            let i = rng.random_range(0.0..2.0);
            let d = rhs_full(&p, &State3::new(0.0, s, i));
            assert!(d[1] + d[2] <= -p.m * (s + i) + 1e-14);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let p = ModelParams::baseline();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let x = State3::new(
                rng.random_range(0.0..2.0),
                rng.random_range(0.0..2.0),
                rng.random_range(0.0..2.0),
            );
            let jac = jacobian_full(&p, &x);
            let fd = finite_difference_jacobian(&p, &x);
            for r in 0..3 {
                for c in 0..3 {
                    assert!(
                        (jac[r][c] - fd[r][c]).abs() <= 1e-6,
                        "entry ({r},{c}) at {x:?}: analytic {} vs fd {}",
                        jac[r][c],
                        fd[r][c]
                    );
                }
            }
        }
    }

    pub(crate) fn finite_difference_jacobian(p: &ModelParams, x: &State3) -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        let base = x.as_array();
        for c in 0..3 {
            let step = 1e-6 * (1.0 + base[c].abs());
            let mut plus = base;
            let mut minus = base;
            plus[c] += step;
            minus[c] -= step;
            let fp = rhs_full(p, &State3::from_slice(&plus));
            let fm = rhs_full(p, &State3::from_slice(&minus));
            for r in 0..3 {
                out[r][c] = (fp[r] - fm[r]) / (2.0 * step);
            }
        }
        out
    }

    #[test]
    fn radial_gain_kinks_and_clamps() {
        assert_eq!(radial_gain(2.0), 0.0);
        assert_eq!(radial_gain(0.0), -1.0);
        assert_eq!(radial_gain(4.0), 0.5);
        assert_eq!(radial_gain(2.25), 0.25);
        assert_eq!(radial_gain(10.0), 0.5);
        assert_eq!(radial_gain(-5.0), -1.0);
    }

    #[test]
    fn counterexample_rhs_hand_values() {
        let c = CounterexampleParams::new(0.1, 0.1).unwrap();
        // z-axis decays at rate delta.
        let d = rhs_counterexample(&c, &[0.0, 0.0, 15.0]);
        assert_eq!(d[0], 0.0);
        assert_eq!(d[1], 0.0);
        assert!((d[2] - (-0.1 * 15.0)).abs() < 1e-15);
        // Hand substitution at (2, 0, 1).
        let d = rhs_counterexample(&c, &[2.0, 0.0, 1.0]);
        assert!((d[0] - (-0.1 * (8.0 / 3.0 - 2.0))).abs() < 1e-15);
        assert_eq!(d[1], -2.0);
        assert!((d[2] - 0.05).abs() < 1e-15);
        // z = 0 plane is invariant.
        let d = rhs_counterexample(&c, &[0.7, -0.4, 0.0]);
        assert_eq!(d[2], 0.0);
    }

    #[test]
    fn params_reject_nonpositive_fields() {
        assert!(ModelParams::new(2.0, 0.3, 0.3, 0.5, 1.3).is_ok());
        assert!(matches!(
            ModelParams::new(2.0, 0.0, 0.3, 0.5, 1.3),
            Err(ModelError::NonPositiveParameter { name: "h", .. })
        ));
        assert!(ModelParams::new(2.0, 0.3, 0.3, 0.5, -1.0).is_err());
        assert!(ModelParams::new(f64::NAN, 0.3, 0.3, 0.5, 1.3).is_err());
        assert!(CounterexampleParams::new(0.0, 0.1).is_err());
    }
}
