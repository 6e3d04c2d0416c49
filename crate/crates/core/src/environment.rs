//! Environment laws and realizations.
//!
//! The parametrized family is `omega_eps(x, e) = alpha(e) (1 + eps * eta(x, e))`
//! with `eta(x)` i.i.d. over sites, drawn from a finite support in `E_alpha`.
//! A realized environment is never stored in full: the atom at a site is a
//! pure function of `(seed, site)` (see [`crate::rng`]), and kernels query it
//! through the [`Environment`] trait.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Direction, Face, LatticeSite};
use crate::rng::{keyed_hash, unit_f64, STREAM_ENVIRONMENT};
use crate::scalar::{lit, tol, Real};

/// Mean kernel `alpha(e) = E[omega(x, e)]`, stored as a `2d` vector in
/// [`Direction::index`] order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
#[serde(bound = "T: Real")]
pub struct JumpLaw<T> {
    alpha: Vec<T>,
}

impl<T: Real> JumpLaw<T> {
    pub fn new(alpha: Vec<T>) -> Result<Self> {
        let law = Self { alpha };
        law.validate()?;
        Ok(law)
    }

    pub fn uniform(d: usize) -> Result<Self> {
        Self::new(vec![T::one() / lit((2 * d) as f64); 2 * d])
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.alpha.len();
        if n % 2 != 0 || !(4..=16).contains(&n) {
            return Err(Error::invalid(format!(
                "alpha needs 2d entries with 2 <= d <= 8, got {n}"
            )));
        }
        if self.alpha.iter().any(|&a| !(a > T::zero()) || !a.is_finite()) {
            return Err(Error::invalid("alpha entries must be strictly positive"));
        }
        let s: T = self.alpha.iter().copied().sum();
        if (s - T::one()).abs() > tol::<T>(1e-12) {
            return Err(Error::invalid(format!("alpha sums to {s}, expected 1")));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.alpha.len() / 2
    }

    #[inline]
    pub fn get(&self, dir: Direction) -> T {
        self.alpha[dir.index()]
    }

    #[inline]
    pub fn at(&self, index: usize) -> T {
        self.alpha[index]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.alpha
    }

    /// `alpha(s_i e_i)` for `i = 1..d`.
    pub fn face_weights(&self, face: &Face) -> Vec<T> {
        (0..face.dim()).map(|i| self.get(face.jump(i))).collect()
    }

    pub fn min(&self) -> T {
        self.alpha.iter().copied().fold(T::infinity(), T::min)
    }
}

/// Finite-support law of `eta(x)`: atoms `r` in `[-1, 1]^{2d}` with weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct EtaLaw<T> {
    pub support: Vec<Vec<T>>,
    pub weights: Vec<T>,
}

impl<T: Real> EtaLaw<T> {
    /// Unvalidated constructor; see [`validate_assumption_b`].
    pub fn new(support: Vec<Vec<T>>, weights: Vec<T>) -> Self {
        Self { support, weights }
    }

    /// Symmetric two-point law `{r, -r}` with equal weights, where `raw` is
    /// centred so that `sum alpha r = 0` and scaled so that `sup |r| = 1`.
    pub fn two_point(alpha: &JumpLaw<T>, raw: &[T]) -> Result<Self> {
        if raw.len() != alpha.as_slice().len() {
            return Err(Error::invalid("two-point vector must have 2d entries"));
        }
        let m: T = raw.iter().zip(alpha.as_slice()).map(|(&r, &a)| r * a).sum();
        let centred: Vec<T> = raw.iter().map(|&r| r - m).collect();
        let sup = centred.iter().fold(T::zero(), |s, r| s.max(r.abs()));
        if sup <= T::epsilon() {
            return Err(Error::invalid("two-point vector is constant after centring"));
        }
        let r: Vec<T> = centred.iter().map(|&x| x / sup).collect();
        let neg: Vec<T> = r.iter().map(|&x| -x).collect();
        let half = lit(0.5);
        Ok(Self {
            support: vec![r, neg],
            weights: vec![half, half],
        })
    }

    /// Default two-point preset: `+1` on `+e_i`, `-1` on `-e_i`, then centred and scaled.
    pub fn default_two_point(alpha: &JumpLaw<T>) -> Result<Self> {
        let raw: Vec<T> = (0..alpha.as_slice().len())
            .map(|k| if k % 2 == 0 { T::one() } else { -T::one() })
            .collect();
        Self::two_point(alpha, &raw)
    }

    /// Uniform law over a user-given finite set, validated against Assumption B.
    pub fn uniform(alpha: &JumpLaw<T>, support: Vec<Vec<T>>) -> Result<Self> {
        let k = support.len();
        if k == 0 {
            return Err(Error::invalid("empty eta support"));
        }
        let w = T::one() / lit(k as f64);
        let law = Self {
            support,
            weights: vec![w; k],
        };
        let report = validate_assumption_b(&law, alpha);
        if !report.passes() {
            return Err(Error::invalid(format!("eta law rejected: {report:?}")));
        }
        Ok(law)
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn mean(&self) -> Vec<T> {
        let n = self.support.first().map_or(0, Vec::len);
        (0..n)
            .map(|e| {
                self.support
                    .iter()
                    .zip(&self.weights)
                    .map(|(r, &w)| w * r[e])
                    .sum()
            })
            .collect()
    }

    /// `E[eta(e) eta(e')]`.
    pub fn second_moment(&self, e: usize, e2: usize) -> T {
        self.support
            .iter()
            .zip(&self.weights)
            .map(|(r, &w)| w * r[e] * r[e2])
            .sum()
    }

    /// Cumulative weights as `f64`, for inverse-CDF sampling.
    fn cumulative(&self) -> Vec<f64> {
        let total: f64 = self.weights.iter().map(|w| w.to_f64().unwrap_or(0.0)).sum();
        let mut acc = 0.0;
        self.weights
            .iter()
            .map(|w| {
                acc += w.to_f64().unwrap_or(0.0) / total;
                acc
            })
            .collect()
    }
}

/// Outcome of the Assumption-B checks, one flag per condition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssumptionBReport {
    pub support_not_singleton: bool,
    /// Always true: sites are drawn independently from one law.
    pub iid: bool,
    pub mean_zero: bool,
    pub in_e_alpha: bool,
    pub weights_valid: bool,
}

impl AssumptionBReport {
    pub fn passes(&self) -> bool {
        self.support_not_singleton && self.iid && self.mean_zero && self.in_e_alpha && self.weights_valid
    }
}

pub fn validate_assumption_b<T: Real>(eta: &EtaLaw<T>, alpha: &JumpLaw<T>) -> AssumptionBReport {
    let n = alpha.as_slice().len();
    let tolerance = tol::<T>(1e-12);
    let shapes_ok = eta.support.iter().all(|r| r.len() == n) && eta.support.len() == eta.weights.len();

    let weights_valid = shapes_ok
        && !eta.weights.is_empty()
        && eta.weights.iter().all(|&w| w > T::zero())
        && (eta.weights.iter().copied().sum::<T>() - T::one()).abs() <= tolerance;

    let mut distinct: Vec<&Vec<T>> = Vec::new();
    for r in &eta.support {
        if !distinct.iter().any(|q| *q == r) {
            distinct.push(r);
        }
    }
    let support_not_singleton = distinct.len() >= 2;

    let in_e_alpha = shapes_ok
        && eta.support.iter().all(|r| {
            let s: T = r.iter().zip(alpha.as_slice()).map(|(&x, &a)| x * a).sum();
            let sup = r.iter().fold(T::zero(), |m, x| m.max(x.abs()));
            s.abs() <= tolerance && (sup - T::one()).abs() <= tolerance
        });

    let mean_zero = shapes_ok && eta.mean().iter().all(|m| m.abs() <= tolerance);

    AssumptionBReport {
        support_not_singleton,
        iid: true,
        mean_zero,
        in_e_alpha,
        weights_valid,
    }
}

/// A parametrized environment law `(alpha, eta, eps)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DisorderSpec<T> {
    pub alpha: JumpLaw<T>,
    pub eta: EtaLaw<T>,
    pub eps: T,
    /// Ellipticity floor requested by the caller; checked against `(1 - eps) min alpha`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<T>,
}

impl<T: Real> DisorderSpec<T> {
    pub fn new(alpha: JumpLaw<T>, eta: EtaLaw<T>, eps: T) -> Result<Self> {
        let spec = Self {
            alpha,
            eta,
            eps,
            kappa: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.alpha.validate()?;
        if !(self.eps >= T::zero() && self.eps < T::one()) {
            return Err(Error::invalid(format!("eps = {} outside [0, 1)", self.eps)));
        }
        let report = validate_assumption_b(&self.eta, &self.alpha);
        if !report.passes() {
            return Err(Error::invalid(format!("eta law fails Assumption B: {report:?}")));
        }
        if let Some(kappa) = self.kappa {
            if !(kappa > T::zero()) || self.ellipticity() < kappa - tol::<T>(1e-12) {
                return Err(Error::invalid(format!(
                    "ellipticity (1-eps) min alpha = {} below kappa = {kappa}",
                    self.ellipticity()
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.alpha.dim()
    }

    /// Same law at another disorder strength.
    pub fn with_eps(&self, eps: T) -> Self {
        Self {
            eps,
            ..self.clone()
        }
    }

    /// `kappa = (1 - eps) min_e alpha(e)`.
    pub fn ellipticity(&self) -> T {
        (T::one() - self.eps) * self.alpha.min()
    }

    /// `omega` at a site carrying atom `k`.
    pub fn atom_omega(&self, k: usize) -> Vec<T> {
        self.alpha
            .as_slice()
            .iter()
            .zip(&self.eta.support[k])
            .map(|(&a, &r)| a * (T::one() + self.eps * r))
            .collect()
    }

    /// Spec-level disorder: `dis(P_eps) = eps`.
    pub fn disorder(&self) -> T {
        self.eps
    }
}

/// `E[omega(0, e) omega(0, e')]`, exact over the finite support.
pub fn pair_moment<T: Real>(spec: &DisorderSpec<T>, e: Direction, e2: Direction) -> T {
    let (i, j) = (e.index(), e2.index());
    let (a, b) = (spec.alpha.at(i), spec.alpha.at(j));
    spec.eta
        .support
        .iter()
        .zip(&spec.eta.weights)
        .map(|(r, &w)| w * a * (T::one() + spec.eps * r[i]) * b * (T::one() + spec.eps * r[j]))
        .sum()
}

/// Read access to an environment `omega(x, e)`.
pub trait Environment<T: Real>: Sync {
    fn dim(&self) -> usize;

    /// `omega(site, e)` with `e` given by [`Direction::index`].
    fn omega(&self, site: &[i64], dir_index: usize) -> T;

    fn omega_vec(&self, site: &[i64]) -> Vec<T> {
        (0..2 * self.dim()).map(|k| self.omega(site, k)).collect()
    }
}

/// Environments of the `omega_eps` family, exposing the underlying `eta`.
pub trait DisorderEnvironment<T: Real>: Environment<T> {
    fn spec(&self) -> &DisorderSpec<T>;

    /// Index of the support atom carried by `site`.
    fn atom(&self, site: &[i64]) -> usize;

    #[inline]
    fn eta(&self, site: &[i64], dir_index: usize) -> T {
        self.spec().eta.support[self.atom(site)][dir_index]
    }
}

/// The non-random environment `omega = alpha`.
#[derive(Clone, Debug)]
pub struct Homogeneous<T> {
    pub alpha: JumpLaw<T>,
}

impl<T: Real> Environment<T> for Homogeneous<T> {
    fn dim(&self) -> usize {
        self.alpha.dim()
    }

    #[inline]
    fn omega(&self, _site: &[i64], dir_index: usize) -> T {
        self.alpha.at(dir_index)
    }
}

/// Realization of a [`DisorderSpec`] keyed by a seed, regenerated on demand.
#[derive(Clone, Debug)]
pub struct SeededEnvironment<T> {
    spec: DisorderSpec<T>,
    seed: u64,
    atoms: Vec<Vec<T>>,
    cumulative: Vec<f64>,
}

impl<T: Real> SeededEnvironment<T> {
    pub fn new(spec: &DisorderSpec<T>, seed: u64) -> Self {
        let atoms = (0..spec.eta.len()).map(|k| spec.atom_omega(k)).collect();
        Self {
            cumulative: spec.eta.cumulative(),
            spec: spec.clone(),
            seed,
            atoms,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Atom index drawn for `site` under `seed`.
pub fn seeded_atom(cumulative: &[f64], seed: u64, site: &[i64]) -> usize {
    let u = unit_f64(keyed_hash(seed, STREAM_ENVIRONMENT, site));
    cumulative
        .iter()
        .position(|&c| u < c)
        .unwrap_or(cumulative.len() - 1)
}

impl<T: Real> Environment<T> for SeededEnvironment<T> {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    #[inline]
    fn omega(&self, site: &[i64], dir_index: usize) -> T {
        self.atoms[self.atom(site)][dir_index]
    }
}

impl<T: Real> DisorderEnvironment<T> for SeededEnvironment<T> {
    fn spec(&self) -> &DisorderSpec<T> {
        &self.spec
    }

    #[inline]
    fn atom(&self, site: &[i64]) -> usize {
        if self.atoms.len() == 1 {
            return 0;
        }
        seeded_atom(&self.cumulative, self.seed, site)
    }
}

/// An explicit atom assignment on finitely many sites, used by exact
/// expectation over all `eta` configurations.
#[derive(Clone, Debug)]
pub struct AssignedEnvironment<T> {
    spec: DisorderSpec<T>,
    atoms: Vec<Vec<T>>,
    assignment: HashMap<Vec<i64>, usize>,
}

impl<T: Real> AssignedEnvironment<T> {
    pub fn new(spec: &DisorderSpec<T>, assignment: HashMap<Vec<i64>, usize>) -> Self {
        Self {
            atoms: (0..spec.eta.len()).map(|k| spec.atom_omega(k)).collect(),
            spec: spec.clone(),
            assignment,
        }
    }

    pub fn set(&mut self, site: &[i64], atom: usize) {
        if let Some(slot) = self.assignment.get_mut(site) {
            *slot = atom;
        } else {
            self.assignment.insert(site.to_vec(), atom);
        }
    }
}

impl<T: Real> Environment<T> for AssignedEnvironment<T> {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    #[inline]
    fn omega(&self, site: &[i64], dir_index: usize) -> T {
        self.atoms[self.atom(site)][dir_index]
    }
}

impl<T: Real> DisorderEnvironment<T> for AssignedEnvironment<T> {
    fn spec(&self) -> &DisorderSpec<T> {
        &self.spec
    }

    #[inline]
    fn atom(&self, site: &[i64]) -> usize {
        *self
            .assignment
            .get(site)
            .unwrap_or_else(|| panic!("site {site:?} has no eta assignment"))
    }
}

/// Calls `f(env, probability)` for every atom assignment on `sites`.
///
/// Assignments are visited in mixed-radix order with the first site varying
/// slowest. Fails when the number of assignments exceeds `max_assignments`.
pub fn for_each_assignment<T: Real, F>(
    spec: &DisorderSpec<T>,
    sites: &[Vec<i64>],
    max_assignments: u128,
    mut f: F,
) -> Result<()>
where
    F: FnMut(&AssignedEnvironment<T>, T),
{
    let k = spec.eta.len();
    let total = (k as u128).checked_pow(sites.len() as u32).unwrap_or(u128::MAX);
    if total > max_assignments {
        return Err(Error::ResourceLimit {
            what: "eta enumeration",
            needed: total,
            budget: max_assignments,
        });
    }
    let mut digits = vec![0usize; sites.len()];
    let mut env = AssignedEnvironment::new(
        spec,
        sites.iter().map(|s| (s.clone(), 0usize)).collect(),
    );
    loop {
        let p: T = digits.iter().map(|&a| spec.eta.weights[a]).fold(T::one(), |acc, w| acc * w);
        f(&env, p);
        let mut pos = sites.len();
        loop {
            if pos == 0 {
                return Ok(());
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < k {
                env.set(&sites[pos], digits[pos]);
                break;
            }
            digits[pos] = 0;
            env.set(&sites[pos], 0);
        }
    }
}

/// A realized environment stored on a finite region.
#[derive(Clone, Debug, Serialize)]
#[serde(bound = "T: Real")]
pub struct EnvironmentWindow<T> {
    pub region: Vec<LatticeSite>,
    pub omega: Vec<Vec<T>>,
    pub seed: u64,
    pub spec: DisorderSpec<T>,
    #[serde(skip)]
    index: HashMap<Vec<i64>, usize>,
    #[serde(skip)]
    source: Option<SeededEnvironment<T>>,
}

/// Default memory budget for stored windows and DP state, in bytes.
pub const DEFAULT_BUDGET_BYTES: u128 = 1 << 30;

/// Realizes `spec` under `seed` on `region`.
pub fn sample_window<T: Real>(
    spec: &DisorderSpec<T>,
    seed: u64,
    region: &[LatticeSite],
    budget_bytes: u128,
) -> Result<EnvironmentWindow<T>> {
    let d = spec.dim();
    let needed = region.len() as u128 * (2 * d * std::mem::size_of::<T>() + d * 8 + 64) as u128;
    if needed > budget_bytes {
        return Err(Error::ResourceLimit {
            what: "environment window",
            needed,
            budget: budget_bytes,
        });
    }
    if let Some(bad) = region.iter().find(|s| s.coords.len() != d) {
        return Err(Error::invalid(format!("site {:?} is not {d}-dimensional", bad.coords)));
    }
    let src = SeededEnvironment::new(spec, seed);
    let omega: Vec<Vec<T>> = region.iter().map(|s| src.omega_vec(&s.coords)).collect();
    let index = region
        .iter()
        .enumerate()
        .map(|(i, s)| (s.coords.clone(), i))
        .collect();
    Ok(EnvironmentWindow {
        region: region.to_vec(),
        omega,
        seed,
        spec: spec.clone(),
        index,
        source: Some(src),
    })
}

impl<T: Real> EnvironmentWindow<T> {
    pub fn len(&self) -> usize {
        self.region.len()
    }

    pub fn is_empty(&self) -> bool {
        self.region.is_empty()
    }

    pub fn get(&self, site: &[i64]) -> Option<&[T]> {
        self.index.get(site).map(|&i| self.omega[i].as_slice())
    }

    /// Debug export: one row per site, coordinates then the `2d` weights.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let d = self.spec.dim();
        let mut wtr = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
        header.extend(Direction::all(d).map(|e| format!("w{e}")));
        wtr.write_record(&header)?;
        for (site, om) in self.region.iter().zip(&self.omega) {
            let mut row: Vec<String> = site.coords.iter().map(|c| c.to_string()).collect();
            row.extend(om.iter().map(|v| format!("{v:e}")));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

impl<T: Real> Environment<T> for EnvironmentWindow<T> {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// Stored value inside the region, regenerated from `(seed, site)` outside.
    fn omega(&self, site: &[i64], dir_index: usize) -> T {
        match self.index.get(site) {
            Some(&i) => self.omega[i][dir_index],
            None => match &self.source {
                Some(src) => src.omega(site, dir_index),
                None => SeededEnvironment::new(&self.spec, self.seed).omega(site, dir_index),
            },
        }
    }
}

/// Empirical disorder `sup |omega(x, e) / alpha(e) - 1|` over the window.
pub fn disorder<T: Real>(window: &EnvironmentWindow<T>) -> T {
    let alpha = window.spec.alpha.as_slice();
    window
        .omega
        .iter()
        .flat_map(|om| om.iter().zip(alpha).map(|(&w, &a)| (w / a - T::one()).abs()))
        .fold(T::zero(), T::max)
}

/// Empirical imbalance `sup |zeta_s(x) - 1|` on `face`.
pub fn imbalance<T: Real>(window: &EnvironmentWindow<T>, face: &Face) -> T {
    let alpha_face: T = window.spec.alpha.face_weights(face).into_iter().sum();
    window
        .omega
        .iter()
        .map(|om| {
            let s: T = (0..face.dim()).map(|i| om[face.jump(i).index()]).sum();
            (s / alpha_face - T::one()).abs()
        })
        .fold(T::zero(), T::max)
}

/// Closed-form imbalance of the law: `max_r |eps sum_i alpha(s_i e_i) r(s_i e_i)| / sum_i alpha(s_i e_i)`.
pub fn imbalance_of_law<T: Real>(spec: &DisorderSpec<T>, face: &Face) -> T {
    let fw = spec.alpha.face_weights(face);
    let total: T = fw.iter().copied().sum();
    spec.eta
        .support
        .iter()
        .map(|r| {
            let s: T = (0..face.dim())
                .map(|i| fw[i] * r[face.jump(i).index()])
                .sum();
            (spec.eps * s).abs() / total
        })
        .fold(T::zero(), T::max)
}
