//! Faces of the l1 unit sphere, the affine projection onto `{x_d = 0}`,
//! admissible lattice sequences and level-major enumeration of boundary sites.
//!
//! A site reachable from the origin with `j` face jumps is written
//! `x = sum_i s_i c_i e_i` with nonnegative counts `c` summing to `j`. Levels
//! are laid out in lexicographic order of `(c_1, ..., c_{d-1})`; `c_d` is
//! implied by the level.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, tol, Real};

pub const MIN_DIM: usize = 2;
pub const MAX_DIM: usize = 8;

/// Sign pattern `s` selecting the face `{|x|_1 = 1, s_j x_j >= 0}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct Face {
    signs: Vec<i8>,
}

impl Face {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if !(MIN_DIM..=MAX_DIM).contains(&signs.len()) {
            return Err(Error::invalid(format!(
                "dimension {} outside {MIN_DIM}..={MAX_DIM}",
                signs.len()
            )));
        }
        if let Some(bad) = signs.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::invalid(format!("face sign {bad} is not +1 or -1")));
        }
        Ok(Self { signs })
    }

    /// The all-plus face in dimension `d`.
    pub fn positive(d: usize) -> Result<Self> {
        Self::new(vec![1; d])
    }

    pub fn dim(&self) -> usize {
        self.signs.len()
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    #[inline]
    pub fn sign(&self, axis: usize) -> i8 {
        self.signs[axis]
    }

    /// The allowed jump `s_i e_i`.
    #[inline]
    pub fn jump(&self, axis: usize) -> Direction {
        Direction {
            axis,
            sign: self.signs[axis],
        }
    }

    /// Whether `dir` belongs to `V(s)`; returns its axis if so.
    pub fn jump_axis(&self, dir: Direction) -> Option<usize> {
        (dir.axis < self.dim() && self.signs[dir.axis] == dir.sign).then_some(dir.axis)
    }

    /// Lattice site `sum_i s_i counts_i e_i`, written into `out`.
    #[inline]
    pub fn site_from_counts(&self, counts: &[u32], out: &mut [i64]) {
        for ((o, &c), &s) in out.iter_mut().zip(counts).zip(&self.signs) {
            *o = s as i64 * c as i64;
        }
    }

    /// Counts of a site on this face, or `None` if a coordinate has the wrong sign.
    pub fn counts_of_site(&self, site: &LatticeSite) -> Option<Vec<u32>> {
        if site.coords.len() != self.dim() {
            return None;
        }
        site.coords
            .iter()
            .zip(&self.signs)
            .map(|(&x, &s)| {
                let c = x * s as i64;
                (c >= 0).then_some(c as u32)
            })
            .collect()
    }
}

impl TryFrom<Vec<i8>> for Face {
    type Error = Error;
    fn try_from(v: Vec<i8>) -> Result<Self> {
        Face::new(v)
    }
}

impl From<Face> for Vec<i8> {
    fn from(f: Face) -> Self {
        f.signs
    }
}

impl fmt::Display for Face {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, s) in self.signs.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", if *s > 0 { '+' } else { '-' })?;
        }
        write!(f, ")")
    }
}

/// A unit lattice direction `sign * e_axis`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Direction {
    pub axis: usize,
    pub sign: i8,
}

impl Direction {
    pub fn new(axis: usize, sign: i8) -> Self {
        debug_assert!(sign == 1 || sign == -1);
        Self { axis, sign }
    }

    /// Position in the 2d-vector layout: `+e_i -> 2i`, `-e_i -> 2i+1`.
    #[inline]
    pub fn index(self) -> usize {
        2 * self.axis + usize::from(self.sign < 0)
    }

    #[inline]
    pub fn from_index(index: usize) -> Self {
        Self {
            axis: index / 2,
            sign: if index % 2 == 0 { 1 } else { -1 },
        }
    }

    /// All `2d` directions in index order.
    pub fn all(d: usize) -> impl Iterator<Item = Direction> {
        (0..2 * d).map(Direction::from_index)
    }

    pub fn vector(self, d: usize) -> Vec<i64> {
        let mut v = vec![0; d];
        v[self.axis] = self.sign as i64;
        v
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}e{}", if self.sign > 0 { '+' } else { '-' }, self.axis + 1)
    }
}

/// Integer lattice site.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticeSite {
    pub coords: Vec<i64>,
}

impl LatticeSite {
    pub fn new(coords: Vec<i64>) -> Self {
        Self { coords }
    }

    pub fn origin(d: usize) -> Self {
        Self { coords: vec![0; d] }
    }

    pub fn l1_norm(&self) -> i64 {
        self.coords.iter().map(|c| c.abs()).sum()
    }

    pub fn step(&self, dir: Direction) -> Self {
        let mut coords = self.coords.clone();
        coords[dir.axis] += dir.sign as i64;
        Self { coords }
    }
}

/// A point of `R^{d-1}`, identified with the hyperplane `{x_d = 0}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
#[serde(bound = "T: Real")]
pub struct ProjectedVector<T>(pub Vec<T>);

impl<T: Real> ProjectedVector<T> {
    pub fn zeros(k: usize) -> Self {
        Self(vec![T::zero(); k])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn dot(&self, other: &[T]) -> T {
        self.0.iter().zip(other).map(|(&a, &b)| a * b).sum()
    }

    pub fn norm_inf(&self) -> T {
        self.0.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }
}

/// `pi(s_i e_i)` as integers: `e_i` for `i < d-1` and `-(1, ..., 1)` for `i = d-1`.
pub fn projected_jump_int(axis: usize, d: usize) -> Vec<i32> {
    let k = d - 1;
    if axis < k {
        let mut v = vec![0; k];
        v[axis] = 1;
        v
    } else {
        vec![-1; k]
    }
}

/// `<theta, pi(s_axis e_axis)>`.
#[inline]
pub fn projected_dot<T: Real>(theta: &[T], axis: usize) -> T {
    if axis < theta.len() {
        theta[axis]
    } else {
        -theta.iter().copied().sum::<T>()
    }
}

/// The affine projection of a face jump onto `R^{d-1}`.
pub fn project<T: Real>(dir: Direction, face: &Face) -> Result<ProjectedVector<T>> {
    let axis = face
        .jump_axis(dir)
        .ok_or_else(|| Error::DirectionNotOnFace {
            direction: dir.to_string(),
            face: face.to_string(),
        })?;
    Ok(ProjectedVector(
        projected_jump_int(axis, face.dim())
            .into_iter()
            .map(|v| lit(v as f64))
            .collect(),
    ))
}

/// The `d` allowed jumps `V(s) = {s_i e_i}`.
pub fn face_jump_set(face: &Face) -> Vec<Direction> {
    (0..face.dim()).map(|i| face.jump(i)).collect()
}

/// `x = sum_i delta_i s_i e_i` on the face `s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct BoundaryPoint<T> {
    face: Face,
    delta: Vec<T>,
}

impl<T: Real> BoundaryPoint<T> {
    pub fn new(face: Face, delta: Vec<T>) -> Result<Self> {
        if delta.len() != face.dim() {
            return Err(Error::invalid(format!(
                "delta has {} entries, face has dimension {}",
                delta.len(),
                face.dim()
            )));
        }
        if delta.iter().any(|&x| !(x >= T::zero()) || !x.is_finite()) {
            return Err(Error::invalid("delta entries must be finite and nonnegative"));
        }
        let sum: T = delta.iter().copied().sum();
        if (sum - T::one()).abs() > tol::<T>(1e-12) {
            return Err(Error::invalid(format!("delta sums to {sum}, expected 1")));
        }
        Ok(Self { face, delta })
    }

    /// Builds a boundary point from Cartesian coordinates; zero coordinates take sign `+`.
    pub fn from_coords(x: &[T]) -> Result<Self> {
        let signs = x
            .iter()
            .map(|&v| if v < T::zero() { -1 } else { 1 })
            .collect();
        let face = Face::new(signs)?;
        Self::new(face, x.iter().map(|v| v.abs()).collect())
    }

    pub fn face(&self) -> &Face {
        &self.face
    }

    pub fn delta(&self) -> &[T] {
        &self.delta
    }

    pub fn dim(&self) -> usize {
        self.delta.len()
    }

    /// Membership in the `(d-2)`-dimensional facets: some `delta_i = 0`.
    pub fn on_facet(&self) -> bool {
        self.delta.iter().any(|&x| x == T::zero())
    }

    pub fn coords(&self) -> Vec<T> {
        self.delta
            .iter()
            .zip(self.face.signs())
            .map(|(&d, &s)| if s > 0 { d } else { -d })
            .collect()
    }

    /// `pi(x) = sum_{i<d} (delta_i - delta_d) e_i`.
    pub fn projected(&self) -> ProjectedVector<T> {
        let d = self.dim();
        let last = self.delta[d - 1];
        ProjectedVector(self.delta[..d - 1].iter().map(|&x| x - last).collect())
    }
}

/// Largest-remainder apportionment of `n * delta` (ties to the lowest index).
///
/// The result satisfies `sum = n`, zero entries wherever `delta_i = 0`, and
/// `max_i |n_i / n - delta_i| <= d / n`.
pub fn admissible_sequence<T: Real>(x: &BoundaryPoint<T>, n: usize) -> Vec<usize> {
    let target: Vec<f64> = x
        .delta()
        .iter()
        .map(|v| v.to_f64().unwrap_or(0.0) * n as f64)
        .collect();
    let mut counts: Vec<usize> = target.iter().map(|t| t.floor().max(0.0) as usize).collect();
    let assigned: usize = counts.iter().sum();
    if assigned > n {
        // Rounding pushed a floor past n (only possible through representation error).
        let mut excess = assigned - n;
        for c in counts.iter_mut().rev() {
            let take = excess.min(*c);
            *c -= take;
            excess -= take;
            if excess == 0 {
                break;
            }
        }
        return counts;
    }
    let mut order: Vec<usize> = (0..counts.len())
        .filter(|&i| x.delta()[i] > T::zero())
        .collect();
    order.sort_by(|&a, &b| {
        let ra = target[a] - counts[a] as f64;
        let rb = target[b] - counts[b] as f64;
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    let mut remaining = n - assigned;
    let mut k = 0;
    while remaining > 0 && !order.is_empty() {
        counts[order[k % order.len()]] += 1;
        remaining -= 1;
        k += 1;
    }
    counts
}

/// Binomial coefficients `C(n, k)` for `k <= kmax`, saturating at `u64::MAX`.
#[derive(Debug, Clone)]
struct BinomialTable {
    kmax: usize,
    rows: Vec<Vec<u64>>,
}

impl BinomialTable {
    fn new(nmax: usize, kmax: usize) -> Self {
        let mut rows = Vec::with_capacity(nmax + 1);
        for n in 0..=nmax {
            let mut row = vec![0u64; kmax + 1];
            row[0] = 1;
            if n > 0 {
                let prev: &Vec<u64> = &rows[n - 1];
                for k in 1..=kmax.min(n) {
                    row[k] = prev[k - 1].saturating_add(prev[k]);
                }
            }
            rows.push(row);
        }
        Self { kmax, rows }
    }

    #[inline]
    fn get(&self, n: usize, k: usize) -> u64 {
        debug_assert!(k <= self.kmax);
        if k > n {
            0
        } else {
            self.rows[n][k]
        }
    }
}

/// Number of compositions of `n` into `d` nonnegative parts, `C(n+d-1, d-1)`,
/// or `None` on overflow.
pub fn level_size(d: usize, n: usize) -> Option<u128> {
    let k = (d - 1) as u128;
    let mut acc: u128 = 1;
    for i in 1..=k {
        acc = acc.checked_mul(n as u128 + i)? / i;
    }
    Some(acc)
}

/// Level-major ranking of the compositions `c` of a level `j` into `d` parts.
#[derive(Debug, Clone)]
pub struct LevelIndex {
    d: usize,
    max_level: usize,
    binom: BinomialTable,
}

impl LevelIndex {
    pub fn new(d: usize, max_level: usize) -> Self {
        Self {
            d,
            max_level,
            binom: BinomialTable::new(max_level + d + 1, d),
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn max_level(&self) -> usize {
        self.max_level
    }

    /// Number of sites on level `j`.
    #[inline]
    pub fn len(&self, level: usize) -> usize {
        self.binom.get(level + self.d - 1, self.d - 1) as usize
    }

    /// Lexicographic rank of `counts` (`d` entries) within its level.
    #[inline]
    pub fn rank(&self, counts: &[u32]) -> usize {
        let level: usize = counts.iter().map(|&c| c as usize).sum();
        let mut budget = level;
        let mut r: u64 = 0;
        for (p, &c) in counts[..self.d - 1].iter().enumerate() {
            let c = c as usize;
            if c > 0 {
                let k = self.d - 2 - p;
                // sum_{v<c} C(budget - v + k, k) via the hockey-stick identity.
                r += self.binom.get(budget + k + 1, k + 1) - self.binom.get(budget - c + k + 1, k + 1);
            }
            budget -= c;
        }
        r as usize
    }

    /// All compositions of `level` in rank order, flattened `d` entries per site.
    pub fn compositions(&self, level: usize) -> Vec<u32> {
        let d = self.d;
        let mut out = Vec::with_capacity(self.len(level) * d);
        let mut cur = vec![0u32; d];
        cur[d - 1] = level as u32;
        loop {
            out.extend_from_slice(&cur);
            // Odometer on the first d-1 entries with sum <= level.
            let mut p = d - 1;
            loop {
                if p == 0 {
                    return out;
                }
                p -= 1;
                if cur[d - 1] > 0 {
                    cur[p] += 1;
                    cur[d - 1] -= 1;
                    break;
                }
                cur[d - 1] += cur[p];
                cur[p] = 0;
            }
        }
    }
}

/// All sites of `partial R_n` for `face`, in level-major order.
pub fn boundary_sites(face: &Face, n: usize) -> Vec<LatticeSite> {
    let d = face.dim();
    let idx = LevelIndex::new(d, n);
    let comps = idx.compositions(n);
    comps
        .chunks_exact(d)
        .map(|c| {
            let mut coords = vec![0i64; d];
            face.site_from_counts(c, &mut coords);
            LatticeSite { coords }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bp(delta: &[f64]) -> BoundaryPoint<f64> {
        BoundaryPoint::new(Face::positive(delta.len()).unwrap(), delta.to_vec()).unwrap()
    }

    #[test]
    fn projection_examples() {
        let f = Face::positive(4).unwrap();
        let p: ProjectedVector<f64> = project(f.jump(0), &f).unwrap();
        assert_eq!(p.0, vec![1.0, 0.0, 0.0]);
        let p: ProjectedVector<f64> = project(f.jump(3), &f).unwrap();
        assert_eq!(p.0, vec![-1.0, -1.0, -1.0]);

        let f2 = Face::new(vec![1, -1]).unwrap();
        let p: ProjectedVector<f64> = project(Direction::new(1, -1), &f2).unwrap();
        assert_eq!(p.0, vec![-1.0]);
    }

    #[test]
    fn projection_rejects_foreign_direction() {
        let f = Face::positive(4).unwrap();
        let err = project::<f64>(Direction::new(0, -1), &f).unwrap_err();
        assert!(matches!(err, Error::DirectionNotOnFace { .. }));
    }

    #[test]
    fn jump_sets() {
        let f = Face::positive(4).unwrap();
        let v = face_jump_set(&f);
        assert_eq!(v.len(), 4);
        assert!(v.iter().all(|d| d.sign == 1));
        let g = Face::new(vec![-1, 1, 1, 1]).unwrap();
        let v = face_jump_set(&g);
        assert_eq!(v[0], Direction::new(0, -1));
        assert_eq!(v[1], Direction::new(1, 1));
    }

    #[test]
    fn face_validation() {
        assert!(Face::new(vec![1]).is_err());
        assert!(Face::new(vec![1; 9]).is_err());
        assert!(Face::new(vec![1, 0, 1]).is_err());
        assert_eq!(Face::new(vec![1, -1]).unwrap().to_string(), "(+,-)");
    }

    #[test]
    fn admissible_examples() {
        assert_eq!(admissible_sequence(&bp(&[1.0, 0.0, 0.0, 0.0]), 5), vec![5, 0, 0, 0]);
        assert_eq!(admissible_sequence(&bp(&[0.25; 4]), 8), vec![2, 2, 2, 2]);
        assert_eq!(admissible_sequence(&bp(&[0.5, 0.3, 0.2, 0.0]), 7), vec![4, 2, 1, 0]);
    }

    #[test]
    fn admissible_matches_exhaustive_minimax() {
        // Exhaustive argmin of the max deviation over all compositions of 7.
        let x = bp(&[0.5, 0.3, 0.2, 0.0]);
        let n = 7usize;
        let mut best = (f64::INFINITY, vec![]);
        for a in 0..=n {
            for b in 0..=n - a {
                for c in 0..=n - a - b {
                    let v = [a, b, c, n - a - b - c];
                    if v[3] != 0 {
                        continue;
                    }
                    let dev = v
                        .iter()
                        .zip(x.delta())
                        .map(|(&k, &d)| (k as f64 / n as f64 - d).abs())
                        .fold(0.0, f64::max);
                    if dev < best.0 - 1e-15 {
                        best = (dev, v.to_vec());
                    }
                }
            }
        }
        assert_eq!(admissible_sequence(&x, n), best.1);
    }

    #[test]
    fn boundary_site_examples() {
        let f = Face::positive(4).unwrap();
        assert_eq!(boundary_sites(&f, 0), vec![LatticeSite::origin(4)]);
        assert_eq!(boundary_sites(&f, 2).len(), 10);
        let f2 = Face::positive(2).unwrap();
        let s: Vec<Vec<i64>> = boundary_sites(&f2, 3).into_iter().map(|s| s.coords).collect();
        assert_eq!(s, vec![vec![0, 3], vec![1, 2], vec![2, 1], vec![3, 0]]);
    }

    #[test]
    fn rank_is_position_in_enumeration() {
        for d in 2..=5 {
            let idx = LevelIndex::new(d, 7);
            for level in 0..=7 {
                let comps = idx.compositions(level);
                assert_eq!(comps.len() / d, idx.len(level));
                for (i, c) in comps.chunks_exact(d).enumerate() {
                    assert_eq!(idx.rank(c), i, "d={d} level={level} c={c:?}");
                }
            }
        }
    }

    #[test]
    fn boundary_point_checks() {
        let f = Face::positive(3).unwrap();
        assert!(BoundaryPoint::new(f.clone(), vec![0.5, 0.5, 0.1]).is_err());
        assert!(BoundaryPoint::new(f.clone(), vec![0.5, 0.6, -0.1]).is_err());
        let x = BoundaryPoint::new(f, vec![0.5, 0.5, 0.0]).unwrap();
        assert!(x.on_facet());
        let y = BoundaryPoint::<f64>::from_coords(&[-0.25, 0.5, 0.25]).unwrap();
        assert_eq!(y.face().signs(), &[-1, 1, 1]);
        assert!(!y.on_facet());
        assert_eq!(y.coords(), vec![-0.25, 0.5, 0.25]);
    }

    #[test]
    fn level_size_formula() {
        assert_eq!(level_size(4, 2), Some(10));
        assert_eq!(level_size(2, 3), Some(4));
        assert_eq!(level_size(4, 0), Some(1));
    }
}
