use crate::environment::{Environment, JumpLaw};
use crate::error::{Error, Result};
use crate::geometry::{level_size, projected_dot, Face, LatticeSite, LevelIndex};
use crate::rate_functions::log_psi;
use crate::scalar::{lit, log_sum_exp, LnFactorial, Real};

fn check_counts(face: &Face, counts: &[usize]) -> Result<usize> {
    if counts.len() != face.dim() {
        return Err(Error::invalid(format!(
            "counts have {} entries, face has dimension {}",
            counts.len(),
            face.dim()
        )));
    }
    Ok(counts.iter().sum())
}

/// `log[ n! / prod n_i! prod_i alpha(s_i e_i)^{n_i} ]`.
pub fn annealed_point_log_prob<T: Real>(alpha: &JumpLaw<T>, face: &Face, counts: &[usize]) -> Result<T> {
    let n = check_counts(face, counts)?;
    let lf = LnFactorial::<T>::new(n);
    let mut v = lf.ln_multinomial(counts);
    for (i, &c) in counts.iter().enumerate() {
        if c > 0 {
            v += lit::<T>(c as f64) * alpha.get(face.jump(i)).ln();
        }
    }
    Ok(v)
}

/// Box of count vectors `c <= target` in mixed-radix order, first entry fastest.
pub(crate) struct CountBox {
    pub d: usize,
    pub target: Vec<usize>,
    pub strides: Vec<usize>,
    pub size: usize,
}

impl CountBox {
    pub fn new(target: &[usize], budget_bytes: u128, bytes_per_cell: usize) -> Result<Self> {
        let d = target.len();
        let mut strides = vec![1usize; d];
        let mut size: u128 = 1;
        for i in 0..d {
            strides[i] = size as usize;
            size = size.saturating_mul(target[i] as u128 + 1);
        }
        let needed = size.saturating_mul(bytes_per_cell as u128);
        if needed > budget_bytes || size > usize::MAX as u128 {
            return Err(Error::ResourceLimit {
                what: "point-probability count box",
                needed,
                budget: budget_bytes,
            });
        }
        Ok(Self {
            d,
            target: target.to_vec(),
            strides,
            size: size as usize,
        })
    }

    /// Advances `c` to the next count vector; returns false after the last.
    pub fn advance(&self, c: &mut [u32]) -> bool {
        for i in 0..self.d {
            if (c[i] as usize) < self.target[i] {
                c[i] += 1;
                return true;
            }
            c[i] = 0;
        }
        false
    }
}

/// Default budget for library calls that do not take one explicitly.
const UNBOUNDED: u128 = u128::MAX;

/// `log sum_paths prod omega(z_{j-1}, Delta_j)` over face paths from the origin
/// with the given jump counts.
pub fn quenched_point_log_prob<T: Real, E: Environment<T>>(env: &E, face: &Face, counts: &[usize]) -> Result<T> {
    check_counts(face, counts)?;
    let d = face.dim();
    let bx = CountBox::new(counts, UNBOUNDED, (d + 1) * std::mem::size_of::<T>())?;
    let mut lmass = vec![T::neg_infinity(); bx.size];
    let mut lw = vec![T::zero(); bx.size * d];
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
            lmass[idx] = log_sum_exp(&terms);
        }
        face.site_from_counts(&c, &mut site);
        for i in 0..d {
            if (c[i] as usize) < counts[i] {
                lw[idx * d + i] = env.omega(&site, face.jump(i).index()).ln();
            }
        }
        idx += 1;
        if !bx.advance(&mut c) {
            break;
        }
    }
    Ok(lmass[bx.size - 1])
}

/// As [`quenched_point_log_prob`], with the endpoint given as a lattice site.
pub fn quenched_point_log_prob_site<T: Real, E: Environment<T>>(
    env: &E,
    face: &Face,
    site: &LatticeSite,
) -> Result<T> {
    let counts = face
        .counts_of_site(site)
        .ok_or_else(|| Error::invalid(format!("site {:?} is not on the face boundary", site.coords)))?;
    let counts: Vec<usize> = counts.into_iter().map(|c| c as usize).collect();
    quenched_point_log_prob(env, face, &counts)
}

/// `log Z_{n,theta}` for walks started at the origin.
pub fn partition_function<T: Real, E: Environment<T>>(
    env: &E,
    alpha: &JumpLaw<T>,
    face: &Face,
    theta: &[T],
    n: usize,
    budget_bytes: u128,
) -> Result<T> {
    let origin = vec![0i64; face.dim()];
    partition_function_from(env, alpha, face, theta, n, &origin, budget_bytes)
}

/// `log Z_{n,theta}` for walks started at `origin` (the shifted environment).
pub fn partition_function_from<T: Real, E: Environment<T>>(
    env: &E,
    alpha: &JumpLaw<T>,
    face: &Face,
    theta: &[T],
    n: usize,
    origin: &[i64],
    budget_bytes: u128,
) -> Result<T> {
    let d = face.dim();
    if theta.len() + 1 != d {
        return Err(Error::invalid("theta must have d-1 entries"));
    }
    if n == 0 {
        return Ok(T::zero());
    }
    let widest = level_size(d, n).unwrap_or(u128::MAX);
    let needed = widest.saturating_mul(((d + 2) * std::mem::size_of::<T>()) as u128);
    if needed > budget_bytes {
        return Err(Error::ResourceLimit {
            what: "partition-function level",
            needed,
            budget: budget_bytes,
        });
    }
    let lp = log_psi(alpha, face, theta);
    let tilt: Vec<T> = (0..d).map(|i| projected_dot(theta, i) - lp).collect();
    let idx = LevelIndex::new(d, n);
    let mut site = vec![0i64; d];
    let mut prev = vec![T::zero()];
    let mut pred = vec![0u32; d];
    let mut terms: Vec<T> = Vec::with_capacity(d);
    for level in 0..n {
        // Per-source log step weights at this level.
        let sources = idx.compositions(level);
        let mut lw = vec![T::zero(); prev.len() * d];
        for (r, c) in sources.chunks_exact(d).enumerate() {
            face.site_from_counts(c, &mut site);
            for (s, o) in site.iter_mut().zip(origin) {
                *s += o;
            }
            for i in 0..d {
                lw[r * d + i] = env.omega(&site, face.jump(i).index()).ln() + tilt[i];
            }
        }
        let targets = idx.compositions(level + 1);
        let mut next = Vec::with_capacity(idx.len(level + 1));
        for c in targets.chunks_exact(d) {
            terms.clear();
            for i in 0..d {
                if c[i] > 0 {
                    pred.copy_from_slice(c);
                    pred[i] -= 1;
                    let r = idx.rank(&pred);
                    terms.push(prev[r] + lw[r * d + i]);
                }
            }
            next.push(log_sum_exp(&terms));
        }
        prev = next;
    }
    Ok(log_sum_exp(&prev))
}

fn for_each_path<F: FnMut(&[usize])>(d: usize, n: usize, max_paths: u128, mut f: F) -> Result<()> {
    let total = (d as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if total > max_paths {
        return Err(Error::ResourceLimit {
            what: "path enumeration",
            needed: total,
            budget: max_paths,
        });
    }
    let mut seq = vec![0usize; n];
    loop {
        f(&seq);
        let mut p = n;
        loop {
            if p == 0 {
                return Ok(());
            }
            p -= 1;
            seq[p] += 1;
            if seq[p] < d {
                break;
            }
            seq[p] = 0;
        }
    }
}

/// Path-by-path evaluation of `log Z_{n,theta}`; cost `d^n`.
pub fn brute_force_log_partition<T: Real, E: Environment<T>>(
    env: &E,
    alpha: &JumpLaw<T>,
    face: &Face,
    theta: &[T],
    n: usize,
    max_paths: u128,
) -> Result<T> {
    let d = face.dim();
    let lp = log_psi(alpha, face, theta);
    let mut logs = Vec::new();
    for_each_path(d, n, max_paths, |seq| {
        let mut x = vec![0i64; d];
        let mut acc = T::zero();
        for &i in seq {
            let e = face.jump(i);
            acc += env.omega(&x, e.index()).ln() + projected_dot(theta, i) - lp;
            x[i] += face.sign(i) as i64;
        }
        logs.push(acc);
    })?;
    Ok(log_sum_exp(&logs))
}

/// Path-by-path evaluation of the quenched point probability; cost `d^n`.
pub fn brute_force_point_log_prob<T: Real, E: Environment<T>>(
    env: &E,
    face: &Face,
    counts: &[usize],
    max_paths: u128,
) -> Result<T> {
    let n = check_counts(face, counts)?;
    let d = face.dim();
    let mut logs = Vec::new();
    for_each_path(d, n, max_paths, |seq| {
        let mut tally = vec![0usize; d];
        for &i in seq {
            tally[i] += 1;
        }
        if tally != counts {
            return;
        }
        let mut x = vec![0i64; d];
        let mut acc = T::zero();
        for &i in seq {
            acc += env.omega(&x, face.jump(i).index()).ln();
            x[i] += face.sign(i) as i64;
        }
        logs.push(acc);
    })?;
    Ok(log_sum_exp(&logs))
}
