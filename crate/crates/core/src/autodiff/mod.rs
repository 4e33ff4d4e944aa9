//! Scalar reverse-mode differentiation.
//!
//! Numeric code in this crate is written once against the [`Real`] trait and
//! instantiated twice: with `f64` for plain evaluation, and with [`Var`] to
//! record a [`Tape`] whose backward sweep yields exact gradients.
//!
//! Branch decisions (collision tests, object selection, sample counts) are
//! taken on plain values via [`Real::value`], so they are baked into the tape
//! as constants.

mod check;
mod tape;

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub use check::{grad_check, grad_check_components, gradient, GradCheckReport, Objective};
pub use tape::{AdError, Op, Tape, Var};

/// Scalar arithmetic shared by `f64` and tape variables.
pub trait Real:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn value(self) -> f64;

    /// A constant living in the same context as `self` (same tape, if any).
    fn constant(self, v: f64) -> Self;

    fn exp(self) -> Self;
    fn sqrt(self) -> Self;
    fn pow2(self) -> Self;
    fn ln(self) -> Self;
    fn tanh(self) -> Self;

    /// Logistic function `1 / (1 + e^-x)`, stable for large `|x|`.
    fn logistic(self) -> Self;

    /// Returns the smaller argument; the gradient flows only into the
    /// selected one (the first on ties).
    fn min_select(self, other: Self) -> Self;
    fn max_select(self, other: Self) -> Self;

    /// Passes the value through and blocks the gradient.
    fn stop_gradient(self) -> Self;

    /// Euclidean norm with a zero subgradient at the origin.
    fn norm(xs: &[Self]) -> Self;

    fn abs(self) -> Self {
        if self.value() < 0.0 {
            -self
        } else {
            self
        }
    }

    fn zero_like(self) -> Self {
        self.constant(0.0)
    }
}

impl Real for f64 {
    #[inline]
    fn value(self) -> f64 {
        self
    }

    #[inline]
    fn constant(self, v: f64) -> Self {
        v
    }

    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }

    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }

    #[inline]
    fn pow2(self) -> Self {
        self * self
    }

    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }

    #[inline]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }

    #[inline]
    fn logistic(self) -> Self {
        logistic(self)
    }

    #[inline]
    fn min_select(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    #[inline]
    fn max_select(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    #[inline]
    fn stop_gradient(self) -> Self {
        self
    }

    #[inline]
    fn norm(xs: &[Self]) -> Self {
        xs.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Sum of a non-empty slice; `None` when empty.
pub fn sum<S: Real>(xs: &[S]) -> Option<S> {
    let (first, rest) = xs.split_first()?;
    Some(rest.iter().fold(*first, |acc, &x| acc + x))
}
