//! Disorder sweeps of `D_n(eps)` along a family `eps -> omega_eps` and a
//! finite-n bracket for the critical disorder.
//!
//! Every cell uses the same master seed, so Monte Carlo cells at different
//! `eps` see the same `eta` field (common random numbers).

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environment::DisorderSpec;
use crate::error::{Error, Result};
use crate::exact_kernel::{dn_value, Mode, Sampling};
use crate::geometry::{admissible_sequence, BoundaryPoint};
use crate::scalar::{lit, Real};

pub const SURROGATE_LABEL: &str = "finite-n surrogate";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ScanCell<T> {
    pub eps: T,
    pub n: usize,
    pub value: T,
    pub stderr: T,
    pub mode: Mode,
    pub samples: u128,
}

/// `D_n(eps)` on a grid; `cells` is row-major with rows `eps` and columns `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ScanResult<T> {
    pub point: BoundaryPoint<T>,
    pub eps_grid: Vec<T>,
    pub n_list: Vec<usize>,
    pub counts: Vec<Vec<usize>>,
    pub cells: Vec<ScanCell<T>>,
}

impl<T: Real> ScanResult<T> {
    pub fn cell(&self, eps_index: usize, n_index: usize) -> &ScanCell<T> {
        &self.cells[eps_index * self.n_list.len() + n_index]
    }

    pub fn column(&self, n_index: usize) -> Vec<&ScanCell<T>> {
        (0..self.eps_grid.len()).map(|e| self.cell(e, n_index)).collect()
    }

    /// Wide table: one row per `eps`, one column per `n`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["eps".to_string()];
        header.extend(self.n_list.iter().map(|n| format!("n={n}")));
        wtr.write_record(&header)?;
        for (e, eps) in self.eps_grid.iter().enumerate() {
            let mut row = vec![format!("{eps}")];
            row.extend((0..self.n_list.len()).map(|k| format!("{:e}", self.cell(e, k).value)));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Long format: `eps,n,value,stderr,mode,samples`.
    pub fn write_long_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["eps", "n", "value", "stderr", "mode", "samples"])?;
        for c in &self.cells {
            let mode = match c.mode {
                Mode::Exact => "exact",
                Mode::Mc => "mc",
            };
            wtr.write_record([
                format!("{}", c.eps),
                c.n.to_string(),
                format!("{:e}", c.value),
                format!("{:e}", c.stderr),
                mode.to_string(),
                c.samples.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ScanOptions {
    pub samples: usize,
    pub seed: u64,
    /// Exact mode is used when the `eta` enumeration has at most this many assignments.
    pub max_assignments: u128,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            samples: 1000,
            seed: 0,
            max_assignments: 1 << 16,
        }
    }
}

/// Default grid: 21 points on `[0, 0.95]`.
pub fn default_eps_grid<T: Real>() -> Vec<T> {
    (0..21).map(|i| lit(0.95 * i as f64 / 20.0)).collect()
}

pub fn scan<T: Real>(
    family: &DisorderSpec<T>,
    x: &BoundaryPoint<T>,
    n_list: &[usize],
    eps_grid: &[T],
    opts: ScanOptions,
) -> Result<ScanResult<T>> {
    if x.dim() != family.dim() {
        return Err(Error::invalid("boundary point and family dimensions differ"));
    }
    if n_list.is_empty() || n_list.contains(&0) {
        return Err(Error::invalid("n_list must be nonempty with n >= 1"));
    }
    if eps_grid.is_empty()
        || eps_grid.iter().any(|&e| !(e >= T::zero() && e < T::one()))
        || eps_grid.windows(2).any(|w| !(w[0] < w[1]))
    {
        return Err(Error::invalid("eps grid must be strictly increasing inside [0, 1)"));
    }
    let counts: Vec<Vec<usize>> = n_list.iter().map(|&n| admissible_sequence(x, n)).collect();
    let tasks: Vec<(usize, usize)> = (0..eps_grid.len())
        .flat_map(|e| (0..n_list.len()).map(move |k| (e, k)))
        .collect();
    let sampling = Sampling::Auto {
        max_assignments: opts.max_assignments,
        samples: opts.samples,
        seed: opts.seed,
    };
    let cells = tasks
        .par_iter()
        .map(|&(e, k)| {
            let spec = family.with_eps(eps_grid[e]);
            let est = dn_value(&spec, x.face(), &counts[k], sampling)?;
            Ok(ScanCell {
                eps: eps_grid[e],
                n: n_list[k],
                value: est.value,
                stderr: est.stderr,
                mode: est.mode,
                samples: est.samples,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScanResult {
        point: x.clone(),
        eps_grid: eps_grid.to_vec(),
        n_list: n_list.to_vec(),
        counts,
        cells,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct EpsCEstimate<T> {
    pub eps_c_hat: T,
    pub lower: T,
    pub upper: T,
    /// Detection threshold on `|D_n|`.
    pub tau: T,
    pub n: usize,
    /// False when no grid point crossed `-tau`; the interval is then `[last grid point, 1)`.
    pub crossing: bool,
    pub label: String,
}

/// `max(10 * pooled standard error, 1e-4)` over one column.
pub fn default_tau<T: Real>(scan: &ScanResult<T>, n_index: usize) -> T {
    let col = scan.column(n_index);
    let ms: T = col.iter().map(|c| c.stderr * c.stderr).sum::<T>() / lit(col.len() as f64);
    (lit::<T>(10.0) * ms.sqrt()).max(lit(1e-4))
}

/// Brackets the first `eps` where the largest-`n` column drops below `-tau` at 3 sigma.
pub fn estimate_eps_c<T: Real>(scan: &ScanResult<T>, tau: Option<T>) -> Result<EpsCEstimate<T>> {
    let k = scan
        .n_list
        .iter()
        .enumerate()
        .max_by_key(|(_, &n)| n)
        .map(|(i, _)| i)
        .ok_or_else(|| Error::invalid("empty scan"))?;
    let tau = tau.unwrap_or_else(|| default_tau(scan, k));
    let col = scan.column(k);
    let three: T = lit(3.0);
    let cross = col.iter().position(|c| c.value + three * c.stderr < -tau);
    let n = scan.n_list[k];
    let label = SURROGATE_LABEL.to_string();
    match cross {
        None => {
            let last = *scan.eps_grid.last().expect("nonempty grid");
            Ok(EpsCEstimate {
                eps_c_hat: last,
                lower: last,
                upper: T::one(),
                tau,
                n,
                crossing: false,
                label,
            })
        }
        Some(i) => {
            let upper = scan.eps_grid[i];
            let lower = (0..i)
                .rev()
                .find(|&j| col[j].value.abs() <= tau)
                .map_or(T::zero(), |j| scan.eps_grid[j]);
            Ok(EpsCEstimate {
                eps_c_hat: (lower + upper) * lit(0.5),
                lower,
                upper,
                tau,
                n,
                crossing: true,
                label,
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LipschitzColumn<T> {
    pub n: usize,
    /// Largest `|D_n(eps_{i+1}) - D_n(eps_i)| / (eps_{i+1} - eps_i)`.
    pub c_hat: T,
    /// Largest `|D_n(eps_{i+1}) - D_n(eps_i)|`.
    pub max_increment: T,
    pub within_bound: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LipschitzReport<T> {
    pub eps_prime: T,
    /// `1 / (1 - eps')`, the bound on `|eta / (1 + eps eta)|` for `eps <= eps'`.
    pub analytic_bound: T,
    pub columns: Vec<LipschitzColumn<T>>,
    pub finite: bool,
}

pub fn lipschitz_check<T: Real>(scan: &ScanResult<T>, eps_prime: T) -> Result<LipschitzReport<T>> {
    if !(eps_prime < T::one()) || scan.eps_grid.iter().any(|&e| e > eps_prime) {
        return Err(Error::invalid("eps grid must lie in [0, eps'] with eps' < 1"));
    }
    let analytic_bound = T::one() / (T::one() - eps_prime);
    let columns: Vec<LipschitzColumn<T>> = (0..scan.n_list.len())
        .map(|k| {
            let col = scan.column(k);
            let mut c_hat = T::zero();
            let mut max_increment = T::zero();
            for w in col.windows(2) {
                let inc = (w[1].value - w[0].value).abs();
                max_increment = max_increment.max(inc);
                c_hat = c_hat.max(inc / (w[1].eps - w[0].eps));
            }
            LipschitzColumn {
                n: scan.n_list[k],
                c_hat,
                max_increment,
                within_bound: c_hat <= analytic_bound,
            }
        })
        .collect();
    let finite = columns.iter().all(|c| c.c_hat.is_finite());
    Ok(LipschitzReport {
        eps_prime,
        analytic_bound,
        columns,
        finite,
    })
}

/// Heuristic `n -> infinity` extrapolation assuming `D_n = D + c / n`, from the two largest `n`.
pub fn richardson<T: Real>(ns: &[usize], values: &[T]) -> Option<T> {
    if ns.len() < 2 || ns.len() != values.len() {
        return None;
    }
    let mut order: Vec<usize> = (0..ns.len()).collect();
    order.sort_by_key(|&i| ns[i]);
    let (a, b) = (order[ns.len() - 2], order[ns.len() - 1]);
    if ns[a] == ns[b] {
        return None;
    }
    let (na, nb) = (lit::<T>(ns[a] as f64), lit::<T>(ns[b] as f64));
    Some((nb * values[b] - na * values[a]) / (nb - na))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Face;

    fn synthetic(values: &[f64], se: f64) -> ScanResult<f64> {
        let grid: Vec<f64> = (0..values.len()).map(|i| i as f64 / 20.0).collect();
        ScanResult {
            point: BoundaryPoint::new(Face::positive(4).unwrap(), vec![0.25; 4]).unwrap(),
            eps_grid: grid.clone(),
            n_list: vec![8],
            counts: vec![vec![2, 2, 2, 2]],
            cells: grid
                .iter()
                .zip(values)
                .map(|(&eps, &value)| ScanCell {
                    eps,
                    n: 8,
                    value,
                    stderr: se,
                    mode: Mode::Mc,
                    samples: 100,
                })
                .collect(),
        }
    }

    #[test]
    fn step_at_half_is_bracketed() {
        let vals: Vec<f64> = (0..20).map(|i| if i < 10 { 0.0 } else { -1.0 }).collect();
        let est = estimate_eps_c(&synthetic(&vals, 0.001), None).unwrap();
        assert!(est.crossing);
        assert!(est.lower <= 0.5 && 0.5 <= est.upper);
        assert!(est.lower <= est.eps_c_hat && est.eps_c_hat <= est.upper);
        assert_eq!(est.label, SURROGATE_LABEL);
    }

    #[test]
    fn no_crossing_is_flagged() {
        let vals = vec![0.0; 10];
        let est = estimate_eps_c(&synthetic(&vals, 0.0), None).unwrap();
        assert!(!est.crossing);
        assert_eq!(est.upper, 1.0);
        assert_eq!(est.lower, 0.45);
    }

    #[test]
    fn lipschitz_of_linear_table() {
        let vals: Vec<f64> = (0..10).map(|i| -0.3 * i as f64 / 20.0).collect();
        let rep = lipschitz_check(&synthetic(&vals, 0.0), 0.5).unwrap();
        assert!((rep.columns[0].c_hat - 0.3).abs() < 1e-12);
        assert!(rep.finite && rep.columns[0].within_bound);
        assert!(lipschitz_check(&synthetic(&vals, 0.0), 0.3).is_err());
    }

    #[test]
    fn richardson_recovers_linear_model() {
        let ns = [4, 8, 16];
        let vals: Vec<f64> = ns.iter().map(|&n| -0.1 + 0.4 / n as f64).collect();
        assert!((richardson(&ns, &vals).unwrap() + 0.1).abs() < 1e-14);
    }
}
