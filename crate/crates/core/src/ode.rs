//! Adaptive explicit Runge–Kutta integration (Dormand–Prince 5(4)) with a
//! free 4th-order dense interpolant, section-crossing detection on the dense
//! solution, and an optional running-quadrature channel carried alongside the
//! state.
//!
//! All entry points are pure functions of their inputs; identical inputs give
//! bit-identical results.

use serde::{Deserialize, Serialize};
use thiserror::Error;

// Dormand-Prince 5(4) tableau (autonomous form; stage time offsets unused).
const A: [[f64; 6]; 6] = [
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// Difference between the 5th- and embedded 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// Weights of the extra dense-output polynomial term.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

const SAFETY: f64 = 0.9;
const MIN_SCALE: f64 = 0.2;
const MAX_SCALE: f64 = 5.0;
// PI step controller exponents (order 5).
const K_I: f64 = 0.7 / 5.0;
const K_P: f64 = 0.4 / 5.0;

#[derive(Debug, Error, PartialEq)]
pub enum OdeError {
    #[error("invalid solver settings: {0}")]
    InvalidSettings(String),
    #[error("step budget of {max_steps} exceeded at t = {t}")]
    StepBudgetExceeded { t: f64, max_steps: usize },
    #[error("step size underflow at t = {t} (h = {h:e}); stiffness or singularity suspected")]
    StepUnderflow { t: f64, h: f64 },
    #[error("non-finite state encountered at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("section root refinement failed in [{t_lo}, {t_hi}]")]
    RootRefinementFailed { t_lo: f64, t_hi: f64 },
}

/// Tolerances and step bounds for [`integrate`] and friends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Relative tolerance.
    pub rtol: f64,
    /// Absolute tolerance.
    pub atol: f64,
    /// Initial step size.
    pub h_init: f64,
    /// Maximum step size.
    pub h_max: f64,
    /// Budget of attempted steps.
    pub max_steps: usize,
    /// Reject steps that drive a state component below `-atol`, and clamp
    /// components of magnitude below `atol` to exactly zero whenever their
    /// derivative keeps them nonpositive. Keeps the coordinate faces of the
    /// positive orthant machine-exact.
    pub nonneg_guard: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
            h_init: 1e-4,
            h_max: 1.0,
            max_steps: 10_000_000,
            nonneg_guard: false,
        }
    }
}

impl SolverSettings {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }

    pub fn guarded(mut self) -> Self {
        self.nonneg_guard = true;
        self
    }

    pub fn validate(&self) -> Result<(), OdeError> {
        if !(self.rtol > 0.0) || !(self.atol > 0.0) {
            return Err(OdeError::InvalidSettings(format!(
                "tolerances must be positive (rtol = {}, atol = {})",
                self.rtol, self.atol
            )));
        }
        if !(self.h_init > 0.0) || !(self.h_init <= self.h_max) {
            return Err(OdeError::InvalidSettings(format!(
                "need 0 < h_init <= h_max (h_init = {}, h_max = {})",
                self.h_init, self.h_max
            )));
        }
        if self.max_steps == 0 {
            return Err(OdeError::InvalidSettings("max_steps must be >= 1".into()));
        }
        Ok(())
    }
}

/// Dense-output coefficients of a single accepted step over [t0, t0 + h].
#[derive(Debug, Clone, PartialEq)]
struct Segment {
    t0: f64,
    h: f64,
    // y(t0 + theta h) = r0 + theta (r1 + (1-theta)(r2 + theta (r3 + (1-theta) r4)))
    rcont: [Vec<f64>; 5],
}

impl Segment {
    fn eval_into(&self, t: f64, out: &mut [f64]) {
        let theta = (t - self.t0) / self.h;
        let omt = 1.0 - theta;
        for (j, v) in out.iter_mut().enumerate() {
            *v = self.rcont[0][j]
                + theta
                    * (self.rcont[1][j]
                        + omt
                            * (self.rcont[2][j]
                                + theta * (self.rcont[3][j] + omt * self.rcont[4][j])));
        }
    }
}

/// Time-stamped solution samples with per-step dense output and an optional
/// running integral of a scalar along the solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    state_dim: usize,
    full_dim: usize,
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    segments: Vec<Segment>,
    quad: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.state_dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Grid states, one per time, `dim()` components each.
    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    /// Running integral values aligned with `times()`, when a quadrature
    /// channel was requested.
    pub fn quad(&self) -> Option<&[f64]> {
        self.quad.as_deref()
    }

    pub fn start_time(&self) -> f64 {
        self.times[0]
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn end_state(&self) -> &[f64] {
        self.states.last().unwrap()
    }

    fn segment_index(&self, t: f64) -> usize {
        // Segment i spans [times[i], times[i+1]].
        let idx = self.times.partition_point(|&ti| ti <= t);
        idx.saturating_sub(1).min(self.segments.len() - 1)
    }

    fn eval_full(&self, t: f64, out: &mut [f64]) {
        self.segments[self.segment_index(t)].eval_into(t, out);
    }

    /// Dense evaluation of the state at any `t` within the covered span.
    pub fn state_at(&self, t: f64) -> Vec<f64> {
        let mut buf = vec![0.0; self.full_dim];
        self.eval_full(t, &mut buf);
        buf.truncate(self.state_dim);
        buf
    }

    /// Dense evaluation of the running integral at `t`. `None` when no
    /// quadrature channel is present.
    pub fn quad_at(&self, t: f64) -> Option<f64> {
        self.quad.as_ref()?;
        let mut buf = vec![0.0; self.full_dim];
        self.eval_full(t, &mut buf);
        Some(buf[self.state_dim])
    }

    /// All sign changes of `section(state)` along the dense solution whose
    /// crossing direction matches `direction`.
    pub fn section_crossings<S>(
        &self,
        section: S,
        direction: SectionDirection,
    ) -> Result<Vec<SectionEvent>, OdeError>
    where
        S: Fn(&[f64]) -> f64,
    {
        const SUBSAMPLES: usize = 8;
        let mut events = Vec::new();
        let mut buf = vec![0.0; self.full_dim];

        // Sample section values across every segment, then refine brackets.
        let mut samples: Vec<(f64, f64)> = Vec::with_capacity(self.segments.len() * SUBSAMPLES + 1);
        let s0 = section(&self.states[0]);
        samples.push((self.times[0], s0));
        for seg in &self.segments {
            for j in 1..=SUBSAMPLES {
                let t = seg.t0 + seg.h * (j as f64 / SUBSAMPLES as f64);
                seg.eval_into(t, &mut buf);
                samples.push((t, section(&buf[..self.state_dim])));
            }
        }
        let scale = 1.0 + samples.iter().fold(0.0f64, |acc, &(_, s)| acc.max(s.abs()));
        let tol = 1e-10 * scale;

        let mut prev: Option<(f64, f64)> = None;
        for &(t, s) in &samples {
            if s == 0.0 {
                // Exact hit on a sample; direction from the approach side.
                if let Some((_, sp)) = prev {
                    if sp != 0.0 {
                        let rising = sp < 0.0;
                        if direction.matches(rising) {
                            events.push(self.make_event(t, rising, &mut buf));
                        }
                    }
                }
                prev = Some((t, s));
                continue;
            }
            if let Some((tp, sp)) = prev {
                if sp != 0.0 && sp.signum() != s.signum() {
                    let rising = s > 0.0;
                    if direction.matches(rising) {
                        let t_root = self.refine_root(&section, tp, t, sp, s, tol, &mut buf)?;
                        events.push(self.make_event(t_root, rising, &mut buf));
                    }
                }
            }
            prev = Some((t, s));
        }
        Ok(events)
    }

    fn make_event(&self, t: f64, rising: bool, buf: &mut [f64]) -> SectionEvent {
        self.eval_full(t, buf);
        SectionEvent {
            t,
            state: buf[..self.state_dim].to_vec(),
            rising,
        }
    }

    /// Hybrid bisection/secant refinement of a bracketed sign change.
    fn refine_root<S>(
        &self,
        section: &S,
        mut a: f64,
        mut b: f64,
        mut fa: f64,
        mut fb: f64,
        tol: f64,
        buf: &mut [f64],
    ) -> Result<f64, OdeError>
    where
        S: Fn(&[f64]) -> f64,
    {
        let (t_lo, t_hi) = (a, b);
        for _ in 0..80 {
            // Secant candidate, falling back to bisection when it leaves the
            // bracket or stalls.
            let mut t = b - fb * (b - a) / (fb - fa);
            if !t.is_finite() || t <= a.min(b) || t >= a.max(b) {
                t = 0.5 * (a + b);
            }
            self.eval_full(t, buf);
            let ft = section(&buf[..self.state_dim]);
            if ft.abs() <= tol || (b - a).abs() <= f64::EPSILON * (1.0 + t.abs()) {
                return Ok(t);
            }
            if ft.signum() == fa.signum() {
                a = t;
                fa = ft;
            } else {
                b = t;
                fb = ft;
            }
        }
        // Accept the midpoint if the bracket collapsed far enough anyway.
        let t = 0.5 * (a + b);
        self.eval_full(t, buf);
        if section(&buf[..self.state_dim]).abs() <= tol * 10.0 {
            return Ok(t);
        }
        Err(OdeError::RootRefinementFailed { t_lo, t_hi })
    }
}

/// Which sign changes of the section function to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SectionDirection {
    Rising,
    Falling,
    Both,
}

impl SectionDirection {
    fn matches(self, rising: bool) -> bool {
        match self {
            SectionDirection::Rising => rising,
            SectionDirection::Falling => !rising,
            SectionDirection::Both => true,
        }
    }
}

/// A refined crossing of a section function along a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectionEvent {
    /// Crossing time.
    pub t: f64,
    /// Interpolated state at the crossing.
    pub state: Vec<f64>,
    /// True when the section function increases through zero.
    pub rising: bool,
}

/// Integrate `rhs` from `y0` over `t_span`.
pub fn integrate<F>(
    rhs: F,
    y0: &[f64],
    t_span: [f64; 2],
    settings: &SolverSettings,
) -> Result<Trajectory, OdeError>
where
    F: Fn(&[f64], &mut [f64]),
{
    integrate_impl(rhs, y0, t_span, settings, y0.len(), false)
}

/// Integrate `rhs` while accumulating the running integral of `g` along the
/// solution. The quadrature channel is carried as an extra solution component
/// under the same error control, so `quad(t0) = 0` and the channel is
/// continuous and piecewise smooth.
pub fn integrate_with_quadrature<F, G>(
    rhs: F,
    g: G,
    y0: &[f64],
    t_span: [f64; 2],
    settings: &SolverSettings,
) -> Result<Trajectory, OdeError>
where
    F: Fn(&[f64], &mut [f64]),
    G: Fn(&[f64]) -> f64,
{
    let n = y0.len();
    let aug = |y: &[f64], dy: &mut [f64]| {
        rhs(&y[..n], &mut dy[..n]);
        dy[n] = g(&y[..n]);
    };
    let mut y0_aug = y0.to_vec();
    y0_aug.push(0.0);
    integrate_impl(aug, &y0_aug, t_span, settings, n, true)
}

/// Integrate and report all matching section crossings, refined on the dense
/// output.
pub fn find_section_crossings<F, S>(
    rhs: F,
    y0: &[f64],
    t_span: [f64; 2],
    section: S,
    direction: SectionDirection,
    settings: &SolverSettings,
) -> Result<Vec<SectionEvent>, OdeError>
where
    F: Fn(&[f64], &mut [f64]),
    S: Fn(&[f64]) -> f64,
{
    integrate(rhs, y0, t_span, settings)?.section_crossings(section, direction)
}

/// Fixed-step driver over the same 5(4) step kernel; used for convergence
/// studies. No error control or guard is applied.
pub fn integrate_fixed<F>(rhs: F, y0: &[f64], t_span: [f64; 2], h: f64) -> Trajectory
where
    F: Fn(&[f64], &mut [f64]),
{
    let dim = y0.len();
    let n_steps = (((t_span[1] - t_span[0]) / h).round() as usize).max(1);
    let h = (t_span[1] - t_span[0]) / n_steps as f64;

    let mut stepper = Stepper::new(dim);
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; dim];
    rhs(&y, &mut k1);

    let mut traj = Trajectory {
        state_dim: dim,
        full_dim: dim,
        times: vec![t_span[0]],
        states: vec![y.clone()],
        segments: Vec::with_capacity(n_steps),
        quad: None,
    };
    for i in 0..n_steps {
        let t = t_span[0] + i as f64 * h;
        let out = stepper.step(&rhs, &y, &k1, h);
        traj.segments.push(stepper.segment(t, h, &y, &out.y_next));
        y = out.y_next;
        k1 = out.k_last;
        traj.times.push(t + h);
        traj.states.push(y.clone());
    }
    // Land exactly on the requested endpoint.
    *traj.times.last_mut().unwrap() = t_span[1];
    traj
}

struct StepOutput {
    y_next: Vec<f64>,
    k_last: Vec<f64>,
}

/// Workspace for one Dormand–Prince step; holds the seven stage derivatives.
struct Stepper {
    dim: usize,
    k: [Vec<f64>; 7],
    y_stage: Vec<f64>,
}

impl Stepper {
    fn new(dim: usize) -> Self {
        Self {
            dim,
            k: std::array::from_fn(|_| vec![0.0; dim]),
            y_stage: vec![0.0; dim],
        }
    }

    /// One 5th-order step from (t, y) with first stage `k1` (FSAL). The error
    /// returned is the raw weighted estimate; the caller normalizes it.
    fn step<F>(&mut self, rhs: &F, y: &[f64], k1: &[f64], h: f64) -> StepOutput
    where
        F: Fn(&[f64], &mut [f64]),
    {
        self.k[0].copy_from_slice(k1);
        for stage in 1..6 {
            for j in 0..self.dim {
                let mut acc = 0.0;
                for (prev, a) in A[stage - 1].iter().enumerate().take(stage) {
                    acc += a * self.k[prev][j];
                }
                self.y_stage[j] = y[j] + h * acc;
            }
            let (computed, rest) = self.k.split_at_mut(stage);
            let _ = computed;
            rhs(&self.y_stage, &mut rest[0]);
        }
        // 5th-order solution (row 6 of A doubles as the b weights).
        let mut y_next = vec![0.0; self.dim];
        for j in 0..self.dim {
            let mut acc = 0.0;
            for (prev, a) in A[5].iter().enumerate() {
                acc += a * self.k[prev][j];
            }
            y_next[j] = y[j] + h * acc;
        }
        let mut k_last = vec![0.0; self.dim];
        rhs(&y_next, &mut k_last);
        self.k[6].copy_from_slice(&k_last);

        StepOutput { y_next, k_last }
    }

    /// Weighted RMS norm of the embedded error estimate for the step just
    /// taken.
    fn error_norm(&self, y: &[f64], y_next: &[f64], h: f64, rtol: f64, atol: f64) -> f64 {
        let mut acc = 0.0;
        for j in 0..self.dim {
            let mut e = 0.0;
            for (i, w) in E.iter().enumerate() {
                e += w * self.k[i][j];
            }
            e *= h;
            let sc = atol + rtol * y[j].abs().max(y_next[j].abs());
            acc += (e / sc) * (e / sc);
        }
        (acc / self.dim as f64).sqrt()
    }

    /// Dense-output coefficients for the accepted step.
    fn segment(&self, t0: f64, h: f64, y: &[f64], y_next: &[f64]) -> Segment {
        let dim = self.dim;
        let mut rcont: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; dim]);
        for j in 0..dim {
            let ydiff = y_next[j] - y[j];
            let bspl = h * self.k[0][j] - ydiff;
            rcont[0][j] = y[j];
            rcont[1][j] = ydiff;
            rcont[2][j] = bspl;
            rcont[3][j] = ydiff - h * self.k[6][j] - bspl;
            let mut extra = 0.0;
            for (i, d) in D.iter().enumerate() {
                extra += d * self.k[i][j];
            }
            rcont[4][j] = h * extra;
        }
        Segment { t0, h, rcont }
    }
}

fn integrate_impl<F>(
    rhs: F,
    y0: &[f64],
    t_span: [f64; 2],
    settings: &SolverSettings,
    state_dim: usize,
    has_quad: bool,
) -> Result<Trajectory, OdeError>
where
    F: Fn(&[f64], &mut [f64]),
{
    settings.validate()?;
    let [t0, t1] = t_span;
    if !(t1 > t0) {
        return Err(OdeError::InvalidSettings(format!(
            "need t1 > t0 (got [{t0}, {t1}])"
        )));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(OdeError::NonFiniteState { t: t0 });
    }

    let dim = y0.len();
    let mut stepper = Stepper::new(dim);
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; dim];
    rhs(&y, &mut k1);

    let mut traj = Trajectory {
        state_dim,
        full_dim: dim,
        times: vec![t0],
        states: vec![y[..state_dim].to_vec()],
        segments: Vec::new(),
        quad: has_quad.then(|| vec![y[state_dim]]),
    };

    let mut h = settings.h_init.min(t1 - t0);
    let mut err_prev: f64 = 1e-4;
    let mut attempts = 0usize;

    while t < t1 {
        if attempts >= settings.max_steps {
            return Err(OdeError::StepBudgetExceeded {
                t,
                max_steps: settings.max_steps,
            });
        }
        attempts += 1;

        let h_floor = 1e-14 * t.abs().max(1.0);
        if h < h_floor {
            return Err(OdeError::StepUnderflow { t, h });
        }
        let last = t + h >= t1;
        let h_try = if last { t1 - t } else { h };

        let out = stepper.step(&rhs, &y, &k1, h_try);
        let finite = out.y_next.iter().all(|v| v.is_finite());
        let err = if finite {
            stepper.error_norm(&y, &out.y_next, h_try, settings.rtol, settings.atol)
        } else {
            f64::INFINITY
        };

        if !err.is_finite() {
            if !finite && h_try <= h_floor * 2.0 {
                return Err(OdeError::NonFiniteState { t });
            }
            h = h_try * MIN_SCALE;
            continue;
        }

        let guard_hit = settings.nonneg_guard
            && out.y_next[..state_dim]
                .iter()
                .any(|&v| v < -settings.atol);

        if err <= 1.0 && !guard_hit {
            // Accept. Dense output is built from the unclamped endpoint; the
            // clamp below moves components by at most atol.
            traj.segments.push(stepper.segment(t, h_try, &y, &out.y_next));
            let mut y_next = out.y_next;
            let mut k_next = out.k_last;
            if settings.nonneg_guard {
                let mut clamped = false;
                for j in 0..state_dim {
                    if y_next[j].abs() < settings.atol && k_next[j] <= 0.0 {
                        if y_next[j] != 0.0 {
                            clamped = true;
                        }
                        y_next[j] = 0.0;
                    }
                }
                if clamped {
                    rhs(&y_next, &mut k_next);
                }
            }
            t = if last { t1 } else { t + h_try };
            y = y_next;
            k1 = k_next;
            traj.times.push(t);
            traj.states.push(y[..state_dim].to_vec());
            if let Some(q) = traj.quad.as_mut() {
                q.push(y[state_dim]);
            }
            let scale = (SAFETY * err.powf(-K_I) * err_prev.powf(K_P)).clamp(MIN_SCALE, MAX_SCALE);
            err_prev = err.max(1e-4);
            h = (h_try * scale).min(settings.h_max);
        } else if guard_hit {
            h = h_try * 0.5;
        } else {
            let scale = (SAFETY * err.powf(-0.2)).clamp(MIN_SCALE, 1.0);
            h = h_try * scale;
        }
    }
    Ok(traj)
}
