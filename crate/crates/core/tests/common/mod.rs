//! Independent reference computations used by the integration tests.
//!
//! Nothing here calls the library's dynamic programs: paths are enumerated
//! one by one, expectations over eta are taken by explicit enumeration and
//! return probabilities by dense convolution.

#![allow(dead_code)]

use std::collections::HashMap;

use rwre_boundary::environment::{DisorderSpec, Environment, EtaLaw, JumpLaw};
use rwre_boundary::geometry::Face;

pub fn two_point_spec(d: usize, eps: f64) -> DisorderSpec<f64> {
    let alpha = JumpLaw::uniform(d).unwrap();
    let eta = EtaLaw::default_two_point(&alpha).unwrap();
    DisorderSpec::new(alpha, eta, eps).unwrap()
}

/// A skewed law with a three-atom eta, for tests that should not rely on symmetry.
pub fn skewed_spec(eps: f64) -> DisorderSpec<f64> {
    let alpha = JumpLaw::new(vec![0.2, 0.05, 0.1, 0.1, 0.15, 0.1, 0.25, 0.05]).unwrap();
    let a = alpha.as_slice().to_vec();
    // Three atoms in E_alpha with zero mixture mean: r1, r2, -(r1 + r2) scaled.
    let centre = |v: Vec<f64>| {
        let m: f64 = v.iter().zip(&a).map(|(x, w)| x * w).sum();
        v.into_iter().map(|x| x - m).collect::<Vec<f64>>()
    };
    let r1 = centre(vec![1.0, -0.4, 0.3, 0.0, -0.6, 0.2, 0.5, -1.0]);
    let r2 = centre(vec![-0.3, 0.8, -0.5, 0.4, 0.2, -0.7, 0.1, 0.6]);
    let r3: Vec<f64> = r1.iter().zip(&r2).map(|(x, y)| -(x + y)).collect();
    let sup = [&r1, &r2, &r3]
        .iter()
        .map(|r| r.iter().fold(0.0f64, |m, x| m.max(x.abs())))
        .collect::<Vec<_>>();
    // Scale each to sup 1 and reweight so the mixture mean stays zero.
    let support: Vec<Vec<f64>> = [&r1, &r2, &r3]
        .iter()
        .zip(&sup)
        .map(|(r, s)| r.iter().map(|x| x / s).collect())
        .collect();
    let w: Vec<f64> = sup.iter().map(|s| *s).collect();
    let total: f64 = w.iter().sum();
    let weights = w.iter().map(|x| x / total).collect();
    DisorderSpec::new(alpha, EtaLaw::new(support, weights), eps).unwrap()
}

/// Environment with an explicit omega table; missing sites panic.
pub struct TableEnv {
    pub d: usize,
    pub table: HashMap<Vec<i64>, Vec<f64>>,
}

impl Environment<f64> for TableEnv {
    fn dim(&self) -> usize {
        self.d
    }

    fn omega(&self, site: &[i64], dir_index: usize) -> f64 {
        self.table.get(site).unwrap_or_else(|| panic!("no omega at {site:?}"))[dir_index]
    }
}

/// All sites of the face with l1 norm below `n`, by brute-force search over a cube.
pub fn face_sites_below(face: &Face, n: usize) -> Vec<Vec<i64>> {
    let d = face.dim();
    let mut out = Vec::new();
    let side = n.max(1);
    let total = side.pow(d as u32);
    for mut t in 0..total {
        let c: Vec<i64> = (0..d)
            .map(|i| {
                let v = (t % side) as i64;
                t /= side;
                v * face.sign(i) as i64
            })
            .collect();
        if c.iter().map(|v| v.abs()).sum::<i64>() < n as i64 {
            out.push(c);
        }
    }
    out.sort();
    out
}

/// Calls `f(env, prob)` for every eta assignment on `sites`.
pub fn enumerate_eta<F: FnMut(&TableEnv, f64)>(spec: &DisorderSpec<f64>, sites: &[Vec<i64>], mut f: F) {
    let k = spec.eta.support.len();
    let d = spec.dim();
    let atoms: Vec<Vec<f64>> = spec
        .eta
        .support
        .iter()
        .map(|r| {
            spec.alpha
                .as_slice()
                .iter()
                .zip(r)
                .map(|(a, x)| a * (1.0 + spec.eps * x))
                .collect()
        })
        .collect();
    let total = k.pow(sites.len() as u32);
    for code in 0..total {
        let mut c = code;
        let mut p = 1.0;
        let mut table = HashMap::new();
        for s in sites {
            let a = c % k;
            c /= k;
            p *= spec.eta.weights[a];
            table.insert(s.clone(), atoms[a].clone());
        }
        f(&TableEnv { d, table }, p);
    }
}

/// One enumerated face path: jump axes, visited sites and `log prod omega`.
pub struct Path {
    pub axes: Vec<usize>,
    pub sites: Vec<Vec<i64>>,
    pub log_weight: f64,
}

/// Every face path of length `n` from the origin, with the non-crossing property asserted.
pub fn enumerate_paths<E: Environment<f64>>(env: &E, face: &Face, n: usize) -> Vec<Path> {
    let d = face.dim();
    let mut out = Vec::with_capacity(d.pow(n as u32));
    for code in 0..d.pow(n as u32) {
        let mut c = code;
        let mut x = vec![0i64; d];
        let mut axes = Vec::with_capacity(n);
        let mut sites = vec![x.clone()];
        let mut lw = 0.0;
        for _ in 0..n {
            let i = c % d;
            c /= d;
            let dir = 2 * i + usize::from(face.sign(i) < 0);
            lw += env.omega(&x, dir).ln();
            x[i] += face.sign(i) as i64;
            axes.push(i);
            sites.push(x.clone());
        }
        for (j, s) in sites.iter().enumerate() {
            assert_eq!(s.iter().map(|v| v.abs()).sum::<i64>(), j as i64, "path left the face levels");
        }
        out.push(Path {
            axes,
            sites,
            log_weight: lw,
        });
    }
    out
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `log psi(theta)` written out directly.
pub fn log_psi_direct(alpha: &JumpLaw<f64>, face: &Face, theta: &[f64]) -> f64 {
    let d = face.dim();
    let mut s = 0.0;
    for i in 0..d {
        let a = alpha.as_slice()[2 * i + usize::from(face.sign(i) < 0)];
        let t = if i < d - 1 { theta[i] } else { -theta.iter().sum::<f64>() };
        s += a * t.exp();
    }
    s.ln()
}

/// `<theta, pi(s_i e_i)>` written out directly.
pub fn tilt_of_axis(theta: &[f64], i: usize) -> f64 {
    if i < theta.len() {
        theta[i]
    } else {
        -theta.iter().sum::<f64>()
    }
}

/// Brute-force `log Z_{n,theta}`.
pub fn brute_log_partition<E: Environment<f64>>(env: &E, alpha: &JumpLaw<f64>, face: &Face, theta: &[f64], n: usize) -> f64 {
    let lp = log_psi_direct(alpha, face, theta);
    let logs: Vec<f64> = enumerate_paths(env, face, n)
        .iter()
        .map(|p| p.log_weight + p.axes.iter().map(|&i| tilt_of_axis(theta, i)).sum::<f64>() - n as f64 * lp)
        .collect();
    log_sum_exp(&logs)
}

/// Brute-force quenched point log-probabilities grouped by endpoint.
pub fn brute_point_log_probs<E: Environment<f64>>(env: &E, face: &Face, n: usize) -> HashMap<Vec<usize>, f64> {
    let d = face.dim();
    let mut groups: HashMap<Vec<usize>, Vec<f64>> = HashMap::new();
    for p in enumerate_paths(env, face, n) {
        let mut counts = vec![0usize; d];
        for &i in &p.axes {
            counts[i] += 1;
        }
        groups.entry(counts).or_default().push(p.log_weight);
    }
    groups.into_iter().map(|(k, v)| (k, log_sum_exp(&v))).collect()
}

/// `P(Z_j = 0)` for `j <= jmax` by dense convolution of the difference walk on `Z^{d-1}`.
pub fn convolution_return_probs(weights: &[f64], jmax: usize) -> Vec<f64> {
    let d = weights.len();
    let k = d - 1;
    let jump = |i: usize| -> Vec<i64> {
        if i < k {
            let mut v = vec![0; k];
            v[i] = 1;
            v
        } else {
            vec![-1; k]
        }
    };
    let mut step: HashMap<Vec<i64>, f64> = HashMap::new();
    for i in 0..d {
        for j in 0..d {
            let z: Vec<i64> = jump(i).iter().zip(jump(j)).map(|(a, b)| a - b).collect();
            *step.entry(z).or_default() += weights[i] * weights[j];
        }
    }
    let mut dist: HashMap<Vec<i64>, f64> = HashMap::new();
    dist.insert(vec![0; k], 1.0);
    let mut out = vec![1.0];
    for _ in 0..jmax {
        let mut next: HashMap<Vec<i64>, f64> = HashMap::new();
        for (x, p) in &dist {
            for (z, q) in &step {
                let y: Vec<i64> = x.iter().zip(z).map(|(a, b)| a + b).collect();
                *next.entry(y).or_default() += p * q;
            }
        }
        dist = next;
        out.push(*dist.get(&vec![0; k]).unwrap_or(&0.0));
    }
    out
}

/// Multinomial log-probability computed with `ln_gamma`-free integer loops.
pub fn multinomial_log_prob(counts: &[usize], probs: &[f64]) -> f64 {
    let n: usize = counts.iter().sum();
    let lf = |m: usize| (1..=m).map(|v| (v as f64).ln()).sum::<f64>();
    let mut v = lf(n);
    for (&c, &p) in counts.iter().zip(probs) {
        v -= lf(c);
        if c > 0 {
            v += c as f64 * p.ln();
        }
    }
    v
}

/// Small deterministic generator for test inputs (xorshift64*).
pub struct TestRng(pub u64);

impl TestRng {
    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.0 = x;
        x.wrapping_mul(0x2545_f491_4f6c_dd1d)
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Random point of the open simplex, bounded away from the facets by `floor`.
    pub fn simplex(&mut self, d: usize, floor: f64) -> Vec<f64> {
        let raw: Vec<f64> = (0..d).map(|_| -(self.uniform().max(1e-300)).ln()).collect();
        let s: f64 = raw.iter().sum();
        let v: Vec<f64> = raw.iter().map(|x| floor + (1.0 - d as f64 * floor) * x / s).collect();
        let t: f64 = v.iter().sum();
        v.iter().map(|x| x / t).collect()
    }

    pub fn face(&mut self, d: usize) -> Face {
        Face::new((0..d).map(|_| if self.next_u64() & 1 == 1 { -1 } else { 1 }).collect()).unwrap()
    }
}

/// Brute-force point log-probability touching only sites on paths to `counts`.
pub fn brute_point_log_prob<E: Environment<f64>>(env: &E, face: &Face, counts: &[usize]) -> f64 {
    let d = face.dim();
    let n: usize = counts.iter().sum();
    let mut logs = Vec::new();
    'paths: for code in 0..d.pow(n as u32) {
        let mut c = code;
        let mut seq = Vec::with_capacity(n);
        let mut tally = vec![0usize; d];
        for _ in 0..n {
            let i = c % d;
            c /= d;
            tally[i] += 1;
            if tally[i] > counts[i] {
                continue 'paths;
            }
            seq.push(i);
        }
        let mut x = vec![0i64; d];
        let mut lw = 0.0;
        for i in seq {
            lw += env.omega(&x, 2 * i + usize::from(face.sign(i) < 0)).ln();
            x[i] += face.sign(i) as i64;
        }
        logs.push(lw);
    }
    log_sum_exp(&logs)
}
