//! Tilted face walks, collision Green functions of the difference walk and
//! the bounds built on them.
//!
//! Two independent tilted walks `X, Y` on the face meet at time `j` exactly
//! when their jump counts agree, since the projection is injective on a
//! level. Hence `P(Z_j = 0) = sum_c M(j; c)^2` for the multinomial `M` of the
//! tilted weights, and conditioning on the count of the last jump gives
//! `S_k(j) = sum_m Bin(j, m; q_k)^2 S_{k-1}(j - m)` with `q_k = w_k / sum_{i<=k} w_i`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::environment::{pair_moment, DisorderSpec, Environment, JumpLaw};
use crate::error::{Error, Result};
use crate::geometry::{projected_jump_int, Direction, Face, LatticeSite, ProjectedVector};
use crate::rate_functions::{log_psi, tilted_weights};
use crate::scalar::{lit, LnFactorial, Real};

/// Tilted law over the `d` projected face jumps, in axis order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TiltedLaw<T> {
    pub face: Face,
    pub theta: ProjectedVector<T>,
    pub weights: Vec<T>,
}

impl<T: Real> TiltedLaw<T> {
    pub fn new(alpha: &JumpLaw<T>, face: &Face, theta: &[T]) -> Self {
        Self {
            face: face.clone(),
            theta: ProjectedVector(theta.to_vec()),
            weights: tilted_weights(alpha, face, theta),
        }
    }

    /// Projected dimension `d - 1`.
    pub fn projected_dim(&self) -> usize {
        self.weights.len() - 1
    }
}

/// Mean and covariance of `Z = pi(e) - pi(e')` for independent tilted jumps.
pub fn difference_moments<T: Real>(law: &TiltedLaw<T>) -> (Vec<T>, Vec<Vec<T>>) {
    let d = law.weights.len();
    let k = d - 1;
    let jumps: Vec<Vec<i32>> = (0..d).map(|i| projected_jump_int(i, d)).collect();
    let mut mean = vec![T::zero(); k];
    let mut cov = vec![vec![T::zero(); k]; k];
    for i in 0..d {
        for j in 0..d {
            let p = law.weights[i] * law.weights[j];
            let z: Vec<T> = (0..k).map(|a| lit((jumps[i][a] - jumps[j][a]) as f64)).collect();
            for a in 0..k {
                mean[a] += p * z[a];
                for b in 0..k {
                    cov[a][b] += p * z[a] * z[b];
                }
            }
        }
    }
    (mean, cov)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct GreenResult<T> {
    /// `sum_{j <= J} P(Z_j = 0)`.
    pub partial_sum: T,
    /// `P(Z_j = 0)` for `j = 0..=J`.
    pub terms: Vec<T>,
    pub truncation: usize,
    /// Heuristic power-law extrapolation of the remaining tail.
    pub tail_estimate: T,
    /// Fitted decay exponent of the last terms.
    pub tail_exponent: T,
    /// Set when the projected dimension is below 3 or the fitted exponent is at most 1.
    pub divergent: bool,
}

/// Log binomial pmf of `m` successes in `j` trials.
#[inline]
fn ln_binom_pmf<T: Real>(lf: &LnFactorial<T>, j: usize, m: usize, lq: T, l1q: T) -> T {
    let mut v = lf.ln_binomial(j, m);
    if m > 0 {
        v += lit::<T>(m as f64) * lq;
    }
    if j > m {
        v += lit::<T>((j - m) as f64) * l1q;
    }
    v
}

/// Exact `P(Z_j = 0)` for `j <= J` through the dimension recursion.
///
/// Terms below `e^{-80}` times the largest squared binomial weight are dropped.
pub fn green_terms<T: Real>(law: &TiltedLaw<T>, truncation: usize, budget_bytes: u128) -> Result<Vec<T>> {
    let d = law.weights.len();
    let needed = 3 * (truncation as u128 + 1) * std::mem::size_of::<T>() as u128;
    if needed > budget_bytes {
        return Err(Error::ResourceLimit {
            what: "green function table",
            needed,
            budget: budget_bytes,
        });
    }
    let lf = LnFactorial::<T>::new(truncation);
    let cut: T = lit(80.0);
    let mut s = vec![T::one(); truncation + 1];
    let mut mass = law.weights[0];
    for k in 1..d {
        mass += law.weights[k];
        let q = law.weights[k] / mass;
        let (lq, l1q) = (q.ln(), (T::one() - q).ln());
        let mut next = vec![T::zero(); truncation + 1];
        for (j, slot) in next.iter_mut().enumerate() {
            let mode = ((q * lit::<T>((j + 1) as f64)).floor().to_usize().unwrap_or(0)).min(j);
            let peak = lit::<T>(2.0) * ln_binom_pmf(&lf, j, mode, lq, l1q);
            let mut acc = T::zero();
            // Walk down from the mode, then up, until the weight is negligible.
            let mut m = mode as isize;
            while m >= 0 {
                let lw = lit::<T>(2.0) * ln_binom_pmf(&lf, j, m as usize, lq, l1q);
                if lw < peak - cut {
                    break;
                }
                acc += lw.exp() * s[j - m as usize];
                m -= 1;
            }
            for m in mode + 1..=j {
                let lw = lit::<T>(2.0) * ln_binom_pmf(&lf, j, m, lq, l1q);
                if lw < peak - cut {
                    break;
                }
                acc += lw.exp() * s[j - m];
            }
            *slot = acc;
        }
        s = next;
    }
    Ok(s)
}

/// Collision Green function truncated at `J`, with a labeled heuristic tail.
pub fn green_function<T: Real>(law: &TiltedLaw<T>, truncation: usize, budget_bytes: u128) -> Result<GreenResult<T>> {
    if truncation < 1 {
        return Err(Error::invalid("green_function needs J >= 1"));
    }
    let terms = green_terms(law, truncation, budget_bytes)?;
    let partial_sum: T = terms.iter().copied().sum();
    let (tail_exponent, tail_estimate, fit_ok) = if truncation >= 4 {
        let half = terms[truncation / 2];
        let last = terms[truncation];
        let ratio = lit::<T>(truncation as f64) / lit::<T>((truncation / 2) as f64);
        let p = (half / last).ln() / ratio.ln();
        if p > T::one() && last > T::zero() {
            (p, last * lit::<T>(truncation as f64) / (p - T::one()), true)
        } else {
            (p, T::infinity(), false)
        }
    } else {
        (T::nan(), T::infinity(), false)
    };
    Ok(GreenResult {
        partial_sum,
        terms,
        truncation,
        tail_estimate,
        tail_exponent,
        divergent: law.projected_dim() < 3 || !fit_ok,
    })
}

/// `1 / (1 - C eta)`, or an error when `C eta >= 1`.
pub fn khasminskii_bound<T: Real>(c: T, eta_green: T) -> Result<T> {
    let product = c * eta_green;
    if !(product < T::one()) {
        return Err(Error::BoundInapplicable {
            product: product.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(T::one() / (T::one() - product))
}

/// `V = log(E[omega(0,e) omega(0,e')] / (alpha(e) alpha(e')))`.
pub fn collision_potential<T: Real>(spec: &DisorderSpec<T>, e: Direction, e2: Direction) -> T {
    (pair_moment(spec, e, e2) / (spec.alpha.get(e) * spec.alpha.get(e2))).ln()
}

/// Largest collision potential over pairs of face jumps.
pub fn max_collision_potential<T: Real>(spec: &DisorderSpec<T>, face: &Face) -> T {
    let d = face.dim();
    let mut v = T::neg_infinity();
    for i in 0..d {
        for j in 0..d {
            v = v.max(collision_potential(spec, face.jump(i), face.jump(j)));
        }
    }
    v
}

/// Dense box of differences `D` in `Z^k` with `|D_a| <= radius`.
struct PairGrid {
    k: usize,
    side: usize,
    radius: i64,
    strides: Vec<usize>,
}

impl PairGrid {
    fn new(k: usize, radius: i64, budget_bytes: u128, scalar_bytes: usize) -> Result<Self> {
        let side = (2 * radius + 1) as usize;
        let cells = (side as u128).checked_pow(k as u32).unwrap_or(u128::MAX);
        let needed = cells.saturating_mul(2 * scalar_bytes as u128);
        if needed > budget_bytes {
            return Err(Error::ResourceLimit {
                what: "pair-walk state space",
                needed,
                budget: budget_bytes,
            });
        }
        let mut strides = vec![1usize; k];
        for a in 1..k {
            strides[a] = strides[a - 1] * side;
        }
        Ok(Self {
            k,
            side,
            radius,
            strides,
        })
    }

    fn cells(&self) -> usize {
        self.side.pow(self.k as u32)
    }

    fn origin(&self) -> usize {
        self.strides.iter().map(|&s| s * self.radius as usize).sum()
    }

    /// Offsets of all cells within `|D_a| <= r`, visited in fixed order.
    fn box_cells(&self, r: i64) -> Vec<usize> {
        let r = r.min(self.radius);
        let width = (2 * r + 1) as usize;
        let total = width.pow(self.k as u32);
        let base = (self.radius - r) as usize;
        (0..total)
            .map(|mut t| {
                let mut off = 0;
                for a in 0..self.k {
                    off += (base + t % width) * self.strides[a];
                    t /= width;
                }
                off
            })
            .collect()
    }
}

/// Generic pair-walk DP: two independent walks with jump law `weights`, where
/// each step taken from the same site (difference `0`) is multiplied by
/// `collision(i, j)` for the jump pair `(i, j)`.
///
/// Returns the total weight after each level `0..=n`, and the mass sitting at
/// difference `0` at each level.
pub fn pair_walk<T: Real, F>(
    weights: &[T],
    n: usize,
    collision: F,
    budget_bytes: u128,
) -> Result<(Vec<T>, Vec<T>)>
where
    F: Fn(usize, usize) -> T,
{
    let d = weights.len();
    let k = d - 1;
    // Each coordinate moves by at most 2 per step.
    let grid = PairGrid::new(k, 2 * n as i64, budget_bytes, std::mem::size_of::<T>())?;
    let jumps: Vec<Vec<i32>> = (0..d).map(|i| projected_jump_int(i, d)).collect();
    let mut shifts: Vec<(usize, usize, isize, T)> = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            let off: isize = (0..k)
                .map(|a| (jumps[i][a] - jumps[j][a]) as isize * grid.strides[a] as isize)
                .sum();
            shifts.push((i, j, off, weights[i] * weights[j]));
        }
    }
    let o = grid.origin();
    let mut cur = vec![T::zero(); grid.cells()];
    let mut next = vec![T::zero(); grid.cells()];
    cur[o] = T::one();
    let mut totals = vec![T::one()];
    let mut at_zero = vec![T::one()];
    for level in 0..n {
        let active = grid.box_cells(2 * level as i64);
        for &c in &grid.box_cells(2 * (level as i64 + 1)) {
            next[c] = T::zero();
        }
        for &c in &active {
            let m = cur[c];
            if m == T::zero() {
                continue;
            }
            let hit = c == o;
            for &(i, j, off, w) in &shifts {
                let f = if hit { w * collision(i, j) } else { w };
                let t = (c as isize + off) as usize;
                next[t] += m * f;
            }
        }
        std::mem::swap(&mut cur, &mut next);
        let live = grid.box_cells(2 * (level as i64 + 1));
        totals.push(live.iter().map(|&c| cur[c]).sum());
        at_zero.push(cur[o]);
    }
    Ok((totals, at_zero))
}

/// `E[exp(V sum_{j<n} 1{Z_j = 0})]` for the tilted difference walk.
pub fn occupation_exponential<T: Real>(law: &TiltedLaw<T>, potential: T, n: usize, budget_bytes: u128) -> Result<T> {
    let f = potential.exp();
    let (totals, _) = pair_walk(&law.weights, n, |_, _| f, budget_bytes)?;
    Ok(totals[n])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct FourierBound<T> {
    pub bound: T,
    /// `C_d = (d-1)^{(d-1)/2}`, from inscribing the cube `[-r/sqrt(d-1), r/sqrt(d-1)]^{d-1}` in `B_r`.
    pub constant: T,
    pub radius: T,
    pub inner_radius: T,
    pub c0: T,
    /// False when a caller-supplied `c0` exceeds the certified minorant.
    pub rigorous: bool,
    pub inner_contribution: T,
    pub outer_contribution: T,
}

/// `chi(xi) = |sum_e w_e e^{i xi . pi(e)}|^2`.
pub fn chi<T: Real>(weights: &[T], xi: &[T]) -> T {
    let d = weights.len();
    let (mut re, mut im) = (T::zero(), T::zero());
    for (i, &w) in weights.iter().enumerate() {
        let phase = if i < d - 1 { xi[i] } else { -xi.iter().copied().sum::<T>() };
        re += w * phase.cos();
        im += w * phase.sin();
    }
    re * re + im * im
}

fn unit_sphere_area(k: usize) -> f64 {
    // |S^{k-1}| = 2 pi^{k/2} / Gamma(k/2)
    let half = k as f64 / 2.0;
    let gamma = if k % 2 == 0 {
        (1..k / 2).map(|i| i as f64).product::<f64>()
    } else {
        // Gamma(m + 1/2) = (2m)! sqrt(pi) / (4^m m!)
        let m = (k - 1) / 2;
        let mut g = std::f64::consts::PI.sqrt();
        for i in 0..m {
            g *= i as f64 + 0.5;
        }
        g
    };
    2.0 * std::f64::consts::PI.powf(half) / gamma
}

/// Upper bound on `sum_j P(Z_j = 0)`:
/// `C_d r^{-(d-1)} int_{B_r} d xi / (1 - chi(xi))`.
///
/// The inner ball `|xi| <= r0` uses the minorant `1 - chi >= c0 |xi|^2` with
/// `c0 = lambda_min / 2 - r0^2 E|Z|^4 / 24`; the annulus is integrated by the
/// midpoint rule on `grid^(d-1)` cells, refined dyadically near the origin.
pub fn fourier_bound<T: Real>(
    law: &TiltedLaw<T>,
    radius: T,
    grid: usize,
    c0_override: Option<T>,
) -> Result<FourierBound<T>> {
    let k = law.projected_dim();
    let w: Vec<f64> = law.weights.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect();
    let r = radius.to_f64().unwrap_or(f64::NAN);
    if !(r > 0.0) || grid < 2 {
        return Err(Error::invalid("fourier_bound needs r > 0 and grid >= 2"));
    }
    // The cube must avoid the other zeros of 1 - chi at a (1, ..., 1), a = 2 pi / d.
    let half_side = r / (k as f64).sqrt();
    if half_side >= 2.0 * std::f64::consts::PI / (k as f64 + 1.0) {
        return Err(Error::invalid(format!(
            "radius {r} too large: the inscribed cube reaches a periodic zero of 1 - chi"
        )));
    }
    let constant = (k as f64).powf(k as f64 / 2.0);
    if k < 3 {
        return Ok(FourierBound {
            bound: T::infinity(),
            constant: lit(constant),
            radius,
            inner_radius: T::zero(),
            c0: T::zero(),
            rigorous: true,
            inner_contribution: T::infinity(),
            outer_contribution: T::zero(),
        });
    }

    let law64 = TiltedLaw {
        face: law.face.clone(),
        theta: ProjectedVector(law.theta.0.iter().map(|v| v.to_f64().unwrap_or(0.0)).collect()),
        weights: w.clone(),
    };
    let (_, cov) = difference_moments(&law64);
    let cm = nalgebra::DMatrix::from_fn(k, k, |i, j| cov[i][j]);
    let lambda_min = cm.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
    let d = k + 1;
    let mut m4 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let (a, b) = (projected_jump_int(i, d), projected_jump_int(j, d));
            let n2: f64 = (0..k).map(|t| ((a[t] - b[t]) as f64).powi(2)).sum();
            m4 += w[i] * w[j] * n2 * n2;
        }
    }
    let r0 = (3.0 * lambda_min / m4).sqrt().min(r);
    let c0_cert = lambda_min / 2.0 - r0 * r0 * m4 / 24.0;
    let (c0, rigorous) = match c0_override {
        Some(c) => {
            let c = c.to_f64().unwrap_or(f64::NAN);
            (c, c <= c0_cert + 1e-15)
        }
        None => (c0_cert, true),
    };
    if !(c0 > 0.0) {
        return Err(Error::invalid("quadratic minorant coefficient must be positive"));
    }
    let inner = unit_sphere_area(k) * r0.powi(k as i32 - 2) / (c0 * (k as f64 - 2.0));

    // Midpoint rule over the annulus r0 <= |xi| <= r.
    let h = 2.0 * r / grid as f64;
    let cells = grid.pow(k as u32);
    let mut outer = 0.0;
    let mut stack: Vec<(Vec<f64>, f64, u32)> = Vec::new();
    for mut t in 0..cells {
        let centre: Vec<f64> = (0..k)
            .map(|_| {
                let c = -r + h * (t % grid) as f64 + h / 2.0;
                t /= grid;
                c
            })
            .collect();
        stack.push((centre, h, 0));
        while let Some((c, size, depth)) = stack.pop() {
            let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            let diag = size * (k as f64).sqrt() / 2.0;
            if norm - diag > r || norm + diag < r0 {
                continue;
            }
            if depth < 6 && norm < 4.0 * diag {
                let q = size / 4.0;
                for mask in 0..(1usize << k) {
                    let child: Vec<f64> = (0..k)
                        .map(|a| c[a] + if mask >> a & 1 == 1 { q } else { -q })
                        .collect();
                    stack.push((child, size / 2.0, depth + 1));
                }
                continue;
            }
            if norm < r0 || norm > r {
                continue;
            }
            let one_minus = 1.0 - chi(&w, &c);
            outer += size.powi(k as i32) / one_minus;
        }
    }
    let bound = constant * r.powi(-(k as i32)) * (inner + outer);
    Ok(FourierBound {
        bound: lit(bound),
        constant: lit(constant),
        radius,
        inner_radius: lit(r0),
        c0: lit(c0),
        rigorous,
        inner_contribution: lit(inner),
        outer_contribution: lit(outer),
    })
}

/// One quenched trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub path: Vec<LatticeSite>,
    pub jumps: Vec<Direction>,
    /// Every jump belonged to `V(s)`.
    pub in_face: bool,
    /// Projected endpoint `pi(X_n)`, present when `in_face`.
    pub projected_end: Option<Vec<i64>>,
}

/// Runs the walk for `n` steps under `omega`, drawing jumps from a ChaCha stream keyed by `seed`.
pub fn simulate_walk<T: Real, E: Environment<T>>(env: &E, face: &Face, n: usize, seed: u64) -> Trajectory {
    let d = env.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = LatticeSite::origin(d);
    let mut path = Vec::with_capacity(n + 1);
    let mut jumps = Vec::with_capacity(n);
    path.push(x.clone());
    let mut in_face = true;
    for _ in 0..n {
        let om = env.omega_vec(&x.coords);
        let u: f64 = rng.gen();
        let total: f64 = om.iter().map(|v| v.to_f64().unwrap_or(0.0)).sum();
        let mut acc = 0.0;
        let mut pick = om.len() - 1;
        for (e, v) in om.iter().enumerate() {
            acc += v.to_f64().unwrap_or(0.0) / total;
            if u < acc {
                pick = e;
                break;
            }
        }
        let dir = Direction::from_index(pick);
        in_face &= face.jump_axis(dir).is_some();
        x = x.step(dir);
        jumps.push(dir);
        path.push(x.clone());
    }
    let projected_end = in_face.then(|| {
        let last = x.coords[d - 1].abs();
        (0..d - 1).map(|i| x.coords[i].abs() - last).collect()
    });
    Trajectory {
        path,
        jumps,
        in_face,
        projected_end,
    }
}

/// `e^{<theta, S_n>} 1_{B_n} / psi(theta)^n` for one trajectory.
pub fn tilted_weight<T: Real>(traj: &Trajectory, alpha: &JumpLaw<T>, face: &Face, theta: &[T]) -> T {
    match &traj.projected_end {
        None => T::zero(),
        Some(s) => {
            let dot: T = s.iter().zip(theta).map(|(&a, &t)| lit::<T>(a as f64) * t).sum();
            let n = lit::<T>(traj.jumps.len() as f64);
            (dot - n * log_psi(alpha, face, theta)).exp()
        }
    }
}
