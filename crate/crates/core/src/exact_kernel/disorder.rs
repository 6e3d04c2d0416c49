use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::paths::{annealed_point_log_prob, quenched_point_log_prob, CountBox};
use crate::environment::{for_each_assignment, DisorderEnvironment, DisorderSpec, SeededEnvironment};
use crate::error::{Error, Result};
use crate::geometry::Face;
use crate::rng::task_seed;
use crate::scalar::{lit, log_sum_exp, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    Mc,
}

/// How the expectation over environments is taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sampling {
    /// Enumerate every `eta` assignment on the relevant sites.
    Exact { max_assignments: u128 },
    /// Average over `samples` seeded environments split from `seed`.
    MonteCarlo { samples: usize, seed: u64 },
    /// Exact when the enumeration fits in `max_assignments`, otherwise Monte Carlo.
    Auto {
        max_assignments: u128,
        samples: usize,
        seed: u64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DnEstimate<T> {
    pub value: T,
    pub stderr: T,
    pub mode: Mode,
    /// Number of assignments (exact) or replicas (mc).
    pub samples: u128,
}

/// Sites whose environment enters the point probability: counts `c <= target`
/// strictly below the endpoint level, in box order.
pub fn relevant_sites(face: &Face, counts: &[usize]) -> Vec<Vec<i64>> {
    let n: usize = counts.iter().sum();
    let d = face.dim();
    let bx = CountBox::new(counts, u128::MAX, 0).expect("unbounded budget");
    let mut c = vec![0u32; d];
    let mut out = Vec::new();
    loop {
        if c.iter().map(|&v| v as usize).sum::<usize>() < n {
            let mut site = vec![0i64; d];
            face.site_from_counts(&c, &mut site);
            out.push(site);
        }
        if !bx.advance(&mut c) {
            return out;
        }
    }
}

/// `log P_{0,omega}(X_n = x_n)` and its derivative in `eps`.
///
/// Carries the path mass `m` in log domain together with `r = m' / m`:
/// `r(c) = sum_i share_i (r(c - u_i) + eta_i / (1 + eps eta_i))`.
pub fn log_prob_and_derivative<T: Real, E: DisorderEnvironment<T>>(
    env: &E,
    face: &Face,
    counts: &[usize],
) -> Result<(T, T)> {
    let d = face.dim();
    if counts.len() != d {
        return Err(Error::invalid("counts must have d entries"));
    }
    let eps = env.spec().eps;
    let bx = CountBox::new(counts, u128::MAX, (2 * d + 2) * std::mem::size_of::<T>())?;
    let mut lmass = vec![T::neg_infinity(); bx.size];
    let mut ratio = vec![T::zero(); bx.size];
    let mut lw = vec![T::zero(); bx.size * d];
    let mut dlw = vec![T::zero(); bx.size * d];
    let mut c = vec![0u32; d];
    let mut site = vec![0i64; d];
    let mut terms: Vec<T> = Vec::with_capacity(d);
    let mut idx = 0usize;
    loop {
        if idx == 0 {
            lmass[0] = T::zero();
        } else {
            terms.clear();
            for i in 0..d {
                if c[i] > 0 {
                    let p = idx - bx.strides[i];
                    terms.push(lmass[p] + lw[p * d + i]);
                }
            }
            let total = log_sum_exp(&terms);
            lmass[idx] = total;
            let mut r = T::zero();
            let mut t = 0;
            for i in 0..d {
                if c[i] > 0 {
                    let p = idx - bx.strides[i];
                    let share = (terms[t] - total).exp();
                    r += share * (ratio[p] + dlw[p * d + i]);
                    t += 1;
                }
            }
            ratio[idx] = r;
        }
        face.site_from_counts(&c, &mut site);
        for i in 0..d {
            if (c[i] as usize) < counts[i] {
                let e = face.jump(i).index();
                lw[idx * d + i] = env.omega(&site, e).ln();
                let eta = env.eta(&site, e);
                dlw[idx * d + i] = eta / (T::one() + eps * eta);
            }
        }
        idx += 1;
        if !bx.advance(&mut c) {
            break;
        }
    }
    Ok((lmass[bx.size - 1], ratio[bx.size - 1]))
}

fn resolve(spec_sites: usize, k: usize, sampling: Sampling) -> Sampling {
    match sampling {
        Sampling::Auto {
            max_assignments,
            samples,
            seed,
        } => {
            let total = (k as u128).checked_pow(spec_sites as u32).unwrap_or(u128::MAX);
            if total <= max_assignments {
                Sampling::Exact { max_assignments }
            } else {
                Sampling::MonteCarlo { samples, seed }
            }
        }
        s => s,
    }
}

fn mean_and_stderr<T: Real>(xs: &[T]) -> (T, T) {
    let m = lit::<T>(xs.len() as f64);
    let mean = xs.iter().copied().sum::<T>() / m;
    if xs.len() < 2 {
        return (mean, T::zero());
    }
    let var = xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / (m - T::one());
    (mean, (var / m).sqrt())
}

/// Expectation of `f(env)` over the environment, exact or by Monte Carlo.
fn expectation<T: Real, F>(spec: &DisorderSpec<T>, face: &Face, counts: &[usize], sampling: Sampling, f: F) -> Result<DnEstimate<T>>
where
    F: Fn(&dyn DisorderEnvironmentDyn<T>) -> Result<T> + Sync,
{
    let sites = relevant_sites(face, counts);
    match resolve(sites.len(), spec.eta.len(), sampling) {
        Sampling::Exact { max_assignments } => {
            let mut acc = T::zero();
            let mut count: u128 = 0;
            let mut failure = None;
            for_each_assignment(spec, &sites, max_assignments, |env, p| {
                count += 1;
                match f(env) {
                    Ok(v) => acc += p * v,
                    Err(e) => failure = Some(e),
                }
            })?;
            if let Some(e) = failure {
                return Err(e);
            }
            Ok(DnEstimate {
                value: acc,
                stderr: T::zero(),
                mode: Mode::Exact,
                samples: count,
            })
        }
        Sampling::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(Error::invalid("Monte Carlo needs at least one sample"));
            }
            let values: Vec<T> = (0..samples)
                .into_par_iter()
                .map(|m| {
                    let env = SeededEnvironment::new(spec, task_seed(seed, m as u64));
                    f(&env)
                })
                .collect::<Result<Vec<T>>>()?;
            let (mean, se) = mean_and_stderr(&values);
            Ok(DnEstimate {
                value: mean,
                stderr: se,
                mode: Mode::Mc,
                samples: samples as u128,
            })
        }
        Sampling::Auto { .. } => unreachable!("resolved above"),
    }
}

/// Object-safe view used to share one closure between exact and seeded environments.
pub trait DisorderEnvironmentDyn<T: Real>: Sync {
    fn log_prob(&self, face: &Face, counts: &[usize]) -> Result<T>;
    fn log_prob_and_derivative(&self, face: &Face, counts: &[usize]) -> Result<(T, T)>;
}

impl<T: Real, E: DisorderEnvironment<T>> DisorderEnvironmentDyn<T> for E {
    fn log_prob(&self, face: &Face, counts: &[usize]) -> Result<T> {
        quenched_point_log_prob(self, face, counts)
    }

    fn log_prob_and_derivative(&self, face: &Face, counts: &[usize]) -> Result<(T, T)> {
        log_prob_and_derivative(self, face, counts)
    }
}

/// `D_n(eps) = (1/n) (E log P_{0,omega}(X_n = x_n) - log P_0(X_n = x_n))`.
pub fn dn_value<T: Real>(
    spec: &DisorderSpec<T>,
    face: &Face,
    counts: &[usize],
    sampling: Sampling,
) -> Result<DnEstimate<T>> {
    let n: usize = counts.iter().sum();
    if n == 0 || counts.len() != face.dim() {
        return Err(Error::invalid("counts must have d entries and a positive sum"));
    }
    if spec.eps == T::zero() {
        // omega = alpha: the quenched and annealed probabilities coincide.
        let sites = relevant_sites(face, counts);
        let mode = match resolve(sites.len(), spec.eta.len(), sampling) {
            Sampling::Exact { .. } => Mode::Exact,
            _ => Mode::Mc,
        };
        return Ok(DnEstimate {
            value: T::zero(),
            stderr: T::zero(),
            mode,
            samples: 0,
        });
    }
    let annealed = annealed_point_log_prob(&spec.alpha, face, counts)?;
    let scale = lit::<T>(n as f64);
    let est = expectation(spec, face, counts, sampling, |env| {
        Ok((env.log_prob(face, counts)? - annealed) / scale)
    })?;
    Ok(est)
}

/// `dD_n / d eps = (1/n) E[ sum_j eta / (1 + eps eta) ]` under the quenched path measure.
pub fn dn_derivative<T: Real>(
    spec: &DisorderSpec<T>,
    face: &Face,
    counts: &[usize],
    sampling: Sampling,
) -> Result<DnEstimate<T>> {
    if !(spec.eps > T::zero() && spec.eps < T::one()) {
        return Err(Error::invalid(format!("derivative needs eps in (0, 1), got {}", spec.eps)));
    }
    let n: usize = counts.iter().sum();
    if n == 0 || counts.len() != face.dim() {
        return Err(Error::invalid("counts must have d entries and a positive sum"));
    }
    let scale = lit::<T>(n as f64);
    expectation(spec, face, counts, sampling, |env| {
        Ok(env.log_prob_and_derivative(face, counts)?.1 / scale)
    })
}
