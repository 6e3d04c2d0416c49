//! Scalar abstraction shared by every numerical module.
//!
//! All kernels are written against [`Real`], implemented for `f32` and `f64`.
//! The acceptance tolerances (1e-12 and tighter) are only meaningful for `f64`;
//! `f32` instantiations use tolerances floored at a small multiple of machine
//! epsilon (see [`tol`]).

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

#[inline]
pub fn from_usize<T: Real>(x: usize) -> T {
    T::from_usize(x).expect("integer representable in scalar type")
}

/// Tolerance `base`, floored at 64 machine epsilons of `T`.
#[inline]
pub fn tol<T: Real>(base: f64) -> T {
    let floor = T::epsilon() * lit(64.0);
    let b = lit::<T>(base);
    if b > floor {
        b
    } else {
        floor
    }
}

/// `log(exp(a) + exp(b))`, with `-inf` as the additive identity.
#[inline]
pub fn log_add_exp<T: Real>(a: T, b: T) -> T {
    if a == T::neg_infinity() {
        return b;
    }
    if b == T::neg_infinity() {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Log-sum-exp over a slice, in slice order.
pub fn log_sum_exp<T: Real>(xs: &[T]) -> T {
    let m = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if m == T::neg_infinity() {
        return m;
    }
    if m == T::infinity() {
        return m;
    }
    let s: T = xs.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

/// Table of `ln k!` for `k = 0..=n`, accumulated as sums of logarithms.
#[derive(Debug, Clone)]
pub struct LnFactorial<T> {
    table: Vec<T>,
}

impl<T: Real> LnFactorial<T> {
    pub fn new(n: usize) -> Self {
        let mut table = Vec::with_capacity(n + 1);
        let mut acc = T::zero();
        table.push(acc);
        // Accumulate in f64 so that f32 tables are rounded once per entry.
        let mut acc64 = 0.0f64;
        for k in 1..=n {
            acc64 += (k as f64).ln();
            acc = lit(acc64);
            table.push(acc);
        }
        Self { table }
    }

    #[inline]
    pub fn get(&self, k: usize) -> T {
        self.table[k]
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// `ln(n! / (k_1! ... k_m!))` for counts summing to `n`.
    pub fn ln_multinomial(&self, counts: &[usize]) -> T {
        let n: usize = counts.iter().sum();
        counts
            .iter()
            .fold(self.get(n), |acc, &k| acc - self.get(k))
    }

    #[inline]
    pub fn ln_binomial(&self, n: usize, k: usize) -> T {
        self.get(n) - self.get(k) - self.get(n - k)
    }
}
