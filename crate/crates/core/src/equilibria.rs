//! Closed-form equilibria of the predator-disease system, their eigenvalue
//! analysis and classification, stable-manifold tangent directions, and the
//! scalar markers (basic reproduction number at the disease-free equilibrium,
//! dissipativity bound).
//!
//! Eigenvalues at the three boundary equilibria come from their exact
//! diagonal/triangular/block structure, not a general eigen-solver; a
//! closed-form cubic on the characteristic polynomial backs arbitrary points.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{jacobian_full, rhs_full, ModelParams, State3};

#[derive(Debug, Error, PartialEq)]
pub enum EquilibriaError {
    #[error("interior disease-free equilibrium absent: m = {m} >= 1/(1+h) = {threshold}")]
    InteriorEquilibriumAbsent { m: f64, threshold: f64 },
    #[error("point is not an equilibrium (|rhs| = {residual:e})")]
    NotAnEquilibrium { residual: f64 },
    #[error("point does not match any boundary equilibrium")]
    UnknownEquilibrium,
    #[error("closed-form tangent formula degenerate and numeric fallback failed: {0}")]
    DegenerateFormula(String),
}

/// Stability regime of the disease-free plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegimeTag {
    /// m > 1/(1+h): the prey-only logistic point is stable.
    LogisticStable,
    /// (1-h)/(1+h) < m < 1/(1+h): the interior planar equilibrium is stable.
    InteriorEquilibriumStable,
    /// m < (1-h)/(1+h): both planar equilibria unstable, a stable limit
    /// cycle carries the disease-free dynamics.
    LimitCycle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub tag: RegimeTag,
    /// (1-h)/(1+h), the cycle threshold.
    pub threshold_low: f64,
    /// 1/(1+h), the logistic-stability threshold.
    pub threshold_high: f64,
    /// Set when m sits within 1e-12 of either threshold; the strict
    /// inequalities behind `tag` are then not decidable at working precision.
    pub near_boundary: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Saddle,
    Stable,
    Unstable,
    NonHyperbolic,
}

/// A real eigenvalue paired with a unit eigenvector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TangentDirection {
    pub eigenvalue: f64,
    pub direction: [f64; 3],
}

/// Equilibrium point with its Jacobian, spectrum, and classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub point: State3,
    pub jacobian: [[f64; 3]; 3],
    /// Ordered by descending real part, ties by ascending imaginary part.
    pub eigenvalues: [Complex64; 3],
    pub classification: Classification,
    pub tangent_directions: Vec<TangentDirection>,
}

const NEAR_BOUNDARY_TOL: f64 = 1e-12;

/// The interior disease-free equilibrium (N*, S*) with N* = mh/(1-m) and
/// S* = r(1-N*)(h+N*), when it lies in the open quadrant.
pub fn interior_equilibrium(p: &ModelParams) -> Result<(f64, f64), EquilibriaError> {
    let threshold = 1.0 / (1.0 + p.h);
    if p.m >= threshold {
        return Err(EquilibriaError::InteriorEquilibriumAbsent {
            m: p.m,
            threshold,
        });
    }
    let n_star = p.m * p.h / (1.0 - p.m);
    let s_star = p.r * (1.0 - n_star) * (p.h + n_star);
    Ok((n_star, s_star))
}

/// Boundary equilibria of the full system: the origin, the prey-only
/// logistic point (1,0,0), and — when it exists — the interior disease-free
/// point (N*, S*, 0).
pub fn boundary_equilibria(p: &ModelParams) -> Vec<State3> {
    let mut out = vec![State3::new(0.0, 0.0, 0.0), State3::new(1.0, 0.0, 0.0)];
    if let Ok((n_star, s_star)) = interior_equilibrium(p) {
        out.push(State3::new(n_star, s_star, 0.0));
    }
    out
}

/// Classify the disease-free regime from the threshold table.
pub fn classify_regime(p: &ModelParams) -> Regime {
    let threshold_low = (1.0 - p.h) / (1.0 + p.h);
    let threshold_high = 1.0 / (1.0 + p.h);
    let tag = if p.m < threshold_low {
        RegimeTag::LimitCycle
    } else if p.m < threshold_high {
        RegimeTag::InteriorEquilibriumStable
    } else {
        RegimeTag::LogisticStable
    };
    let near_boundary = (p.m - threshold_low).abs() < NEAR_BOUNDARY_TOL
        || (p.m - threshold_high).abs() < NEAR_BOUNDARY_TOL;
    Regime {
        tag,
        threshold_low,
        threshold_high,
        near_boundary,
    }
}

/// Basic reproduction number at the interior disease-free equilibrium,
/// beta S* / (m + mu).
pub fn r0_star(p: &ModelParams) -> Result<f64, EquilibriaError> {
    let (_, s_star) = interior_equilibrium(p)?;
    Ok(p.beta * s_star / (p.m + p.mu))
}

/// Lower bound 1 + r/(4m) on the simplex size k making N+S+I <= k absorbing.
pub fn dissipativity_bound(p: &ModelParams) -> f64 {
    1.0 + p.r / (4.0 * p.m)
}

fn frobenius(j: &[[f64; 3]; 3]) -> f64 {
    j.iter()
        .flatten()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}

fn matvec(j: &[[f64; 3]; 3], v: &[f64; 3]) -> [f64; 3] {
    std::array::from_fn(|r| j[r][0] * v[0] + j[r][1] * v[1] + j[r][2] * v[2])
}

fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Residual ||J v - lambda v|| of the eigenpair.
pub fn eigen_residual(j: &[[f64; 3]; 3], lambda: f64, v: &[f64; 3]) -> f64 {
    let jv = matvec(j, v);
    norm3(&[
        jv[0] - lambda * v[0],
        jv[1] - lambda * v[1],
        jv[2] - lambda * v[2],
    ])
}

/// Eigenvector for a real eigenvalue via the largest cross product of rows
/// of J - lambda I. Returns a unit vector with a deterministic sign.
fn eigenvector_for(j: &[[f64; 3]; 3], lambda: f64) -> Option<[f64; 3]> {
    let m: [[f64; 3]; 3] = std::array::from_fn(|r| {
        std::array::from_fn(|c| j[r][c] - if r == c { lambda } else { 0.0 })
    });
    let cross = |a: &[f64; 3], b: &[f64; 3]| -> [f64; 3] {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    };
    let candidates = [
        cross(&m[0], &m[1]),
        cross(&m[1], &m[2]),
        cross(&m[0], &m[2]),
    ];
    let best = candidates
        .into_iter()
        .max_by(|a, b| norm3(a).partial_cmp(&norm3(b)).unwrap())?;
    let n = norm3(&best);
    if n == 0.0 {
        return None;
    }
    let mut v = [best[0] / n, best[1] / n, best[2] / n];
    // Sign convention: first component of largest magnitude is positive.
    let lead = (0..3).max_by(|&a, &b| v[a].abs().partial_cmp(&v[b].abs()).unwrap())?;
    if v[lead] < 0.0 {
        v = [-v[0], -v[1], -v[2]];
    }
    Some(v)
}

/// Roots of lambda^2 - tr lambda + det.
fn quadratic_eigenvalues(tr: f64, det: f64) -> (Complex64, Complex64) {
    let disc = tr * tr - 4.0 * det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        (
            Complex64::new(0.5 * (tr + s), 0.0),
            Complex64::new(0.5 * (tr - s), 0.0),
        )
    } else {
        let s = (-disc).sqrt();
        (
            Complex64::new(0.5 * tr, 0.5 * s),
            Complex64::new(0.5 * tr, -0.5 * s),
        )
    }
}

/// Real-coefficient cubic roots of lambda^3 + a lambda^2 + b lambda + c.
fn cubic_roots(a: f64, b: f64, c: f64) -> [Complex64; 3] {
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let shift = -a / 3.0;
    let disc = 0.25 * q * q + p * p * p / 27.0;
    if disc > 0.0 {
        let s = disc.sqrt();
        let u = (-0.5 * q + s).cbrt();
        let v = (-0.5 * q - s).cbrt();
        let real = u + v + shift;
        let re = -(u + v) / 2.0 + shift;
        let im = (u - v) * 3.0f64.sqrt() / 2.0;
        [
            Complex64::new(real, 0.0),
            Complex64::new(re, im),
            Complex64::new(re, -im),
        ]
    } else if p == 0.0 {
        let r = (-q).cbrt() + shift;
        [Complex64::new(r, 0.0); 3]
    } else {
        let rho = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * rho)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        std::array::from_fn(|k| {
            let angle = theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0;
            Complex64::new(rho * angle.cos() + shift, 0.0)
        })
    }
}

fn order_eigenvalues(mut eig: [Complex64; 3]) -> [Complex64; 3] {
    eig.sort_by(|a, b| {
        b.re.partial_cmp(&a.re)
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
    });
    eig
}

fn classify(eig: &[Complex64; 3], scale: f64) -> Classification {
    let tol = 1e-9 * (1.0 + scale);
    if eig.iter().any(|l| l.re.abs() <= tol) {
        return Classification::NonHyperbolic;
    }
    let pos = eig.iter().filter(|l| l.re > 0.0).count();
    match pos {
        0 => Classification::Stable,
        3 => Classification::Unstable,
        _ => Classification::Saddle,
    }
}

/// Which boundary equilibrium a point is, if any.
enum Known {
    Origin,
    Logistic,
    Interior { tr: f64, det: f64, lambda3: f64 },
}

fn recognize(p: &ModelParams, point: &State3, j: &[[f64; 3]; 3]) -> Option<Known> {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (1.0 + b.abs());
    if close(point.n, 0.0) && close(point.s, 0.0) && close(point.i, 0.0) {
        return Some(Known::Origin);
    }
    if close(point.n, 1.0) && close(point.s, 0.0) && close(point.i, 0.0) {
        return Some(Known::Logistic);
    }
    if let Ok((n_star, s_star)) = interior_equilibrium(p) {
        if close(point.n, n_star) && close(point.s, s_star) && close(point.i, 0.0) {
            return Some(Known::Interior {
                tr: j[0][0] + j[1][1],
                det: j[0][0] * j[1][1] - j[0][1] * j[1][0],
                lambda3: j[2][2],
            });
        }
    }
    None
}

/// Full eigen-analysis of an equilibrium point of the system.
pub fn analyze_equilibrium(
    p: &ModelParams,
    point: &State3,
) -> Result<EquilibriumReport, EquilibriaError> {
    let rhs = rhs_full(p, point);
    let residual = norm3(&rhs);
    if residual > 1e-8 {
        return Err(EquilibriaError::NotAnEquilibrium { residual });
    }

    let jacobian = jacobian_full(p, point);
    let eigenvalues = match recognize(p, point, &jacobian) {
        Some(Known::Origin) => [
            Complex64::new(p.r, 0.0),
            Complex64::new(-p.m, 0.0),
            Complex64::new(-(p.m + p.mu), 0.0),
        ],
        Some(Known::Logistic) => [
            Complex64::new(-p.r, 0.0),
            Complex64::new(1.0 / (p.h + 1.0) - p.m, 0.0),
            Complex64::new(-(p.m + p.mu), 0.0),
        ],
        Some(Known::Interior { tr, det, lambda3 }) => {
            let (l1, l2) = quadratic_eigenvalues(tr, det);
            [l1, l2, Complex64::new(lambda3, 0.0)]
        }
        None => {
            // Characteristic polynomial of the 3x3 Jacobian.
            let j = &jacobian;
            let tr = j[0][0] + j[1][1] + j[2][2];
            let minors = j[0][0] * j[1][1] - j[0][1] * j[1][0]
                + j[0][0] * j[2][2]
                - j[0][2] * j[2][0]
                + j[1][1] * j[2][2]
                - j[1][2] * j[2][1];
            let det = j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1])
                - j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0])
                + j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0]);
            cubic_roots(-tr, minors, -det)
        }
    };
    let eigenvalues = order_eigenvalues(eigenvalues);
    let scale = frobenius(&jacobian);
    let classification = classify(&eigenvalues, scale);

    let mut tangent_directions = Vec::new();
    for l in &eigenvalues {
        if l.im != 0.0 {
            continue;
        }
        if let Some(v) = eigenvector_for(&jacobian, l.re) {
            if eigen_residual(&jacobian, l.re, &v) <= 1e-8 * (1.0 + scale) {
                tangent_directions.push(TangentDirection {
                    eigenvalue: l.re,
                    direction: v,
                });
            }
        }
    }

    Ok(EquilibriumReport {
        point: *point,
        jacobian,
        eigenvalues,
        classification,
        tangent_directions,
    })
}

/// Tangent directions of the stable manifold at a boundary equilibrium.
///
/// At the origin the stable plane is the prey-extinct face, spanned by the
/// S and I axes. At (1,0,0) the stable plane is spanned by the N axis and a
/// closed-form eigenvector of the infection eigenvalue -(m+mu). At the
/// interior disease-free point a single transverse direction exists exactly
/// when the reproduction number at that point is below one.
///
/// Where the closed forms are singular (m + mu = r, or the transverse
/// eigenvalue colliding with the planar pair) the directions fall back to
/// numerically computed eigenvectors. Every returned vector is checked
/// against the eigen-equation.
pub fn stable_manifold_tangents(
    p: &ModelParams,
    point: &State3,
) -> Result<Vec<[f64; 3]>, EquilibriaError> {
    let jacobian = jacobian_full(p, point);
    let scale = frobenius(&jacobian);
    let verify = |v: [f64; 3], lambda: f64| -> Option<[f64; 3]> {
        (eigen_residual(&jacobian, lambda, &v) <= 1e-8 * (1.0 + scale)).then_some(v)
    };
    let numeric = |lambda: f64| -> Result<[f64; 3], EquilibriaError> {
        eigenvector_for(&jacobian, lambda)
            .and_then(|v| verify(v, lambda))
            .ok_or_else(|| {
                EquilibriaError::DegenerateFormula(format!(
                    "no numeric eigenvector for lambda = {lambda}"
                ))
            })
    };

    match recognize(p, point, &jacobian) {
        Some(Known::Origin) => Ok(vec![[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]),
        Some(Known::Logistic) => {
            let mut out = vec![[1.0, 0.0, 0.0]];
            let lambda3 = -(p.m + p.mu);
            let denom = p.m + p.mu - p.r;
            let scale_v = 1.0 + p.mu * (p.h + 1.0);
            let closed = (denom.abs() > 1e-12).then(|| {
                [
                    p.mu / (scale_v * denom),
                    -1.0 / scale_v,
                    1.0,
                ]
            });
            let v = match closed.and_then(|v| verify(v, lambda3)) {
                Some(v) => v,
                None => numeric(lambda3)?,
            };
            out.push(v);
            Ok(out)
        }
        Some(Known::Interior { tr, det, lambda3 }) => {
            if lambda3 >= 0.0 {
                // Reproduction number at the point is >= 1: no stable
                // transverse direction.
                return Ok(Vec::new());
            }
            // Solve (J - lambda3 I) v = 0 with v = (a, b, 1); the divisor
            // vanishes exactly when lambda3 collides with the planar pair.
            let f = tr * lambda3 - det - lambda3 * lambda3;
            let closed = (f.abs() > 1e-12 * (1.0 + scale * scale)).then(|| {
                let a = -p.m * p.mu / f;
                let b = (jacobian[1][0] * a + jacobian[1][2]) / lambda3;
                [a, b, 1.0]
            });
            let v = match closed.and_then(|v| verify(v, lambda3)) {
                Some(v) => v,
                None => numeric(lambda3)?,
            };
            Ok(vec![v])
        }
        None => Err(EquilibriaError::UnknownEquilibrium),
    }
}
