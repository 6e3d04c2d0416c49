//! Annealed log-moment generating function on a face, its Legendre transform
//! and the closed-form rate `sum_i delta_i log(delta_i / alpha(s_i e_i))`.
//!
//! On a face the tilted walk only sees the `d` jumps `s_i e_i`, projected to
//! `e_1, ..., e_{d-1}` and `-(1, ..., 1)`, so
//! `psi(theta) = sum_{i<d} a_i e^{theta_i} + a_d e^{-sum theta}` with
//! `a_i = alpha(s_i e_i)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::environment::{Environment, JumpLaw};
use crate::error::{Error, Result};
use crate::exact_kernel::partition_function;
use crate::geometry::{projected_dot, BoundaryPoint, Face, ProjectedVector};
use crate::scalar::{lit, tol, Real};

pub const NEWTON_MAX_ITER: usize = 100;
pub const NEWTON_GRAD_TOL: f64 = 1e-12;
const BISECTION_STEPS: usize = 200;

/// Outcome of the Legendre supremum at a boundary point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TiltResult<T> {
    /// Maximizing tilt; `None` when the supremum is not attained (facet points).
    pub theta: Option<ProjectedVector<T>>,
    pub value: T,
    pub attained: bool,
    pub iterations: usize,
    /// `|| grad log psi(theta) - pi(x) ||_inf` at the returned tilt.
    pub residual: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct FaceSummary<T> {
    pub face: Face,
    pub min_value: T,
    pub minimizer: BoundaryPoint<T>,
}

fn check_theta<T: Real>(face: &Face, theta: &[T]) {
    assert_eq!(theta.len() + 1, face.dim(), "theta must have d-1 entries");
}

/// Tilted weights `a_i e^{<theta, pi(s_i e_i)>}` before normalization.
fn tilted_terms<T: Real>(alpha: &JumpLaw<T>, face: &Face, theta: &[T]) -> Vec<T> {
    check_theta(face, theta);
    (0..face.dim())
        .map(|i| alpha.get(face.jump(i)) * projected_dot(theta, i).exp())
        .collect()
}

pub fn psi<T: Real>(alpha: &JumpLaw<T>, face: &Face, theta: &[T]) -> T {
    tilted_terms(alpha, face, theta).into_iter().sum()
}

/// `log psi(theta)`, evaluated with a max shift so large tilts do not overflow.
pub fn log_psi<T: Real>(alpha: &JumpLaw<T>, face: &Face, theta: &[T]) -> T {
    check_theta(face, theta);
    let logs: Vec<T> = (0..face.dim())
        .map(|i| alpha.get(face.jump(i)).ln() + projected_dot(theta, i))
        .collect();
    crate::scalar::log_sum_exp(&logs)
}

/// Tilted probability vector `alpha(e) e^{<theta, pi(e)>} / psi(theta)` over `V(s)`.
pub fn tilted_weights<T: Real>(alpha: &JumpLaw<T>, face: &Face, theta: &[T]) -> Vec<T> {
    check_theta(face, theta);
    let logs: Vec<T> = (0..face.dim())
        .map(|i| alpha.get(face.jump(i)).ln() + projected_dot(theta, i))
        .collect();
    let lp = crate::scalar::log_sum_exp(&logs);
    logs.into_iter().map(|l| (l - lp).exp()).collect()
}

/// `grad log psi(theta)_i = (a_i e^{theta_i} - a_d e^{-sum theta}) / psi(theta)`.
pub fn grad_log_psi<T: Real>(alpha: &JumpLaw<T>, face: &Face, theta: &[T]) -> ProjectedVector<T> {
    let w = tilted_weights(alpha, face, theta);
    let k = face.dim() - 1;
    ProjectedVector((0..k).map(|i| w[i] - w[k]).collect())
}

/// Hessian of `log psi`: the covariance of the projected jump under the tilted law,
/// `H_ij = w_i [i = j] + w_d - m_i m_j`.
pub fn hess_log_psi<T: Real>(alpha: &JumpLaw<T>, face: &Face, theta: &[T]) -> Vec<Vec<T>> {
    let w = tilted_weights(alpha, face, theta);
    let k = face.dim() - 1;
    let m: Vec<T> = (0..k).map(|i| w[i] - w[k]).collect();
    (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    let diag = if i == j { w[i] } else { T::zero() };
                    diag + w[k] - m[i] * m[j]
                })
                .collect()
        })
        .collect()
}

/// `lambda(theta) = sum_e alpha(e) e^{<theta, e>}` over all `2d` directions.
pub fn lambda_mgf<T: Real>(alpha: &JumpLaw<T>, theta: &[T]) -> T {
    assert_eq!(theta.len(), alpha.dim(), "theta must have d entries");
    theta
        .iter()
        .enumerate()
        .map(|(i, &t)| alpha.at(2 * i) * t.exp() + alpha.at(2 * i + 1) * (-t).exp())
        .sum()
}

/// `sum_i delta_i log(delta_i / alpha(s_i e_i))` with `0 log 0 = 0`.
pub fn annealed_rate_boundary<T: Real>(alpha: &JumpLaw<T>, x: &BoundaryPoint<T>) -> T {
    x.delta()
        .iter()
        .enumerate()
        .filter(|(_, &d)| d > T::zero())
        .map(|(i, &d)| d * (d / alpha.get(x.face().jump(i))).ln())
        .sum()
}

/// `theta_i = log(delta_i C / a_i)` with `C = (prod_i a_i / delta_i)^{1/d}`.
pub fn exposing_tilt<T: Real>(alpha: &JumpLaw<T>, x: &BoundaryPoint<T>) -> Result<ProjectedVector<T>> {
    if let Some(index) = x.delta().iter().position(|&v| v == T::zero()) {
        return Err(Error::OnFacet { index });
    }
    let d = x.dim();
    let face = x.face();
    // log(delta_i / a_i) for every i; log C is minus their mean.
    let l: Vec<T> = (0..d)
        .map(|i| (x.delta()[i] / alpha.get(face.jump(i))).ln())
        .collect();
    let log_c = -l.iter().copied().sum::<T>() / lit(d as f64);
    Ok(ProjectedVector(l[..d - 1].iter().map(|&v| v + log_c).collect()))
}

/// Objective `<theta, pi(x)> - log psi(theta)`.
pub fn legendre_objective<T: Real>(alpha: &JumpLaw<T>, x: &BoundaryPoint<T>, theta: &[T]) -> T {
    let px = x.projected();
    px.dot(theta) - log_psi(alpha, x.face(), theta)
}

fn residual<T: Real>(alpha: &JumpLaw<T>, x: &BoundaryPoint<T>, theta: &[T]) -> T {
    let g = grad_log_psi(alpha, x.face(), theta);
    g.0.iter()
        .zip(x.projected().0.iter())
        .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
}

fn newton_step<T: Real>(alpha: &JumpLaw<T>, x: &BoundaryPoint<T>, theta: &[T]) -> Option<Vec<T>> {
    let k = theta.len();
    let h = hess_log_psi(alpha, x.face(), theta);
    let g = grad_log_psi(alpha, x.face(), theta);
    let px = x.projected();
    let hm = DMatrix::from_fn(k, k, |i, j| h[i][j].to_f64().unwrap_or(f64::NAN));
    let rhs = DVector::from_fn(k, |i, _| (px.0[i] - g.0[i]).to_f64().unwrap_or(f64::NAN));
    let step = hm.cholesky()?.solve(&rhs);
    Some(step.iter().map(|&v| lit(v)).collect())
}

/// Maximizes `<theta, pi(x)> - log psi(theta)`.
///
/// Off facets the supremum is attained; Newton with backtracking starts at
/// the closed-form exposing tilt. On facets the value is the closed-form limit
/// and `attained = false`.
pub fn legendre_sup<T: Real>(alpha: &JumpLaw<T>, x: &BoundaryPoint<T>) -> Result<TiltResult<T>> {
    if x.on_facet() {
        return Ok(TiltResult {
            theta: None,
            value: annealed_rate_boundary(alpha, x),
            attained: false,
            iterations: 0,
            residual: T::zero(),
        });
    }
    let start = exposing_tilt(alpha, x)?;
    legendre_sup_from(alpha, x, start.0)
}

/// Safeguarded Newton from an arbitrary start (off-facet points only).
pub fn legendre_sup_from<T: Real>(
    alpha: &JumpLaw<T>,
    x: &BoundaryPoint<T>,
    start: Vec<T>,
) -> Result<TiltResult<T>> {
    if let Some(index) = x.delta().iter().position(|&v| v == T::zero()) {
        return Err(Error::OnFacet { index });
    }
    let gtol = tol::<T>(NEWTON_GRAD_TOL);
    let mut theta = start;
    let mut f = legendre_objective(alpha, x, &theta);
    let mut res = residual(alpha, x, &theta);
    let mut iterations = 0;
    let mut stalled = false;
    while res > gtol && iterations < NEWTON_MAX_ITER {
        iterations += 1;
        let Some(step) = newton_step(alpha, x, &theta) else {
            stalled = true;
            break;
        };
        let mut t = T::one();
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<T> = theta.iter().zip(&step).map(|(&a, &s)| a + t * s).collect();
            let ft = legendre_objective(alpha, x, &trial);
            let rt = residual(alpha, x, &trial);
            if ft >= f || rt < res {
                theta = trial;
                f = ft;
                res = rt;
                accepted = true;
                break;
            }
            t = t * lit(0.5);
        }
        if !accepted {
            stalled = true;
            break;
        }
    }
    if res > gtol && stalled {
        // Bisection on the directional derivative along the ray through the exposing tilt.
        let dir = exposing_tilt(alpha, x)?.0;
        let slope = |s: T| {
            let th: Vec<T> = dir.iter().map(|&v| v * s).collect();
            let g = grad_log_psi(alpha, x.face(), &th);
            x.projected()
                .0
                .iter()
                .zip(&g.0)
                .zip(&dir)
                .map(|((&p, &q), &v)| (p - q) * v)
                .sum::<T>()
        };
        let (mut lo, mut hi) = (T::zero(), T::one());
        while slope(hi) > T::zero() && hi < lit(1e6) {
            hi = hi * lit(2.0);
        }
        for _ in 0..BISECTION_STEPS {
            let mid = (lo + hi) * lit(0.5);
            if slope(mid) > T::zero() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let s = (lo + hi) * lit(0.5);
        let cand: Vec<T> = dir.iter().map(|&v| v * s).collect();
        let rc = residual(alpha, x, &cand);
        if rc < res {
            theta = cand;
            f = legendre_objective(alpha, x, &theta);
            res = rc;
        }
    }
    if res > gtol && !(res <= tol::<T>(1e-9)) {
        return Err(Error::NoConvergence {
            iterations,
            residual: res.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(TiltResult {
        theta: Some(ProjectedVector(theta)),
        value: f,
        attained: true,
        iterations,
        residual: res,
    })
}

/// Minimizer `delta_i = a_i / sum_j a_j` of the annealed rate on the face, with
/// minimum `-log sum_i a_i`.
pub fn face_minimizer<T: Real>(alpha: &JumpLaw<T>, face: &Face) -> Result<FaceSummary<T>> {
    let w = alpha.face_weights(face);
    let total: T = w.iter().copied().sum();
    let delta: Vec<T> = w.iter().map(|&a| a / total).collect();
    Ok(FaceSummary {
        face: face.clone(),
        min_value: -total.ln(),
        minimizer: BoundaryPoint::new(face.clone(), delta)?,
    })
}

/// `(1/n) log E_{0,omega}[e^{<theta, S_n>} 1_{B_n}] = log psi(theta) + (1/n) log Z_{n,theta}`.
pub fn finite_log_mgf<T: Real, E: Environment<T>>(
    env: &E,
    alpha: &JumpLaw<T>,
    face: &Face,
    theta: &[T],
    n: usize,
    budget_bytes: u128,
) -> Result<T> {
    if n == 0 {
        return Err(Error::invalid("finite_log_mgf needs n >= 1"));
    }
    let log_z = partition_function(env, alpha, face, theta, n, budget_bytes)?;
    Ok(log_psi(alpha, face, theta) + log_z / lit(n as f64))
}
