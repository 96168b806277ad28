//! Closed-form proximity operators of separable functions.
//!
//! `prox_{γf}(y) = argmin_x f(x) + ‖x − y‖² / (2γ)`, applied componentwise.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A separable function with a cheap proximity operator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProxFn {
    Zero,
    /// `λ‖x‖₁`
    L1(f64),
    /// `−a Σ log xᵢ`
    NegLog(f64),
    /// Indicator of the nonnegative orthant.
    NonNeg,
    /// Indicator of the box `[lo, hi]`.
    Box(f64, f64),
}

impl ProxFn {
    pub fn validate(&self) -> Result<()> {
        let bad = match *self {
            Self::L1(l) => !(l >= 0.0),
            Self::NegLog(a) => !(a >= 0.0),
            Self::Box(lo, hi) => !(lo <= hi),
            Self::Zero | Self::NonNeg => false,
        };
        if bad {
            return Err(Error::Config(format!("invalid parameters for {self:?}")));
        }
        Ok(())
    }

    /// Scalar proximity operator with step `gamma`.
    #[inline]
    pub fn prox_scalar<T: Scalar>(&self, y: T, gamma: T) -> T {
        match *self {
            Self::Zero => y,
            Self::L1(l) => crate::distmat::soft_threshold(y, T::lit(l) * gamma),
            Self::NegLog(a) => {
                if a == 0.0 {
                    y
                } else {
                    let four = T::lit(4.0);
                    (y + (y * y + four * gamma * T::lit(a)).sqrt()) / T::lit(2.0)
                }
            }
            Self::NonNeg => y.max(T::zero()),
            Self::Box(lo, hi) => y.max(T::lit(lo)).min(T::lit(hi)),
        }
    }

    /// Scalar proximity operator of the convex conjugate, by Moreau's
    /// decomposition `prox_{γf*}(x) = x − γ prox_{f/γ}(x/γ)`; exact forms are
    /// used where the conjugate is an indicator or zero.
    #[inline]
    pub fn prox_conjugate_scalar<T: Scalar>(&self, x: T, gamma: T) -> T {
        match *self {
            Self::Zero => T::zero(),
            Self::L1(l) => x.max(-T::lit(l)).min(T::lit(l)),
            Self::NonNeg => x.min(T::zero()),
            _ => x - gamma * self.prox_scalar(x / gamma, T::one() / gamma),
        }
    }

    /// Function value at a scalar; indicators give `+∞` outside their set.
    #[inline]
    pub fn value_scalar<T: Scalar>(&self, x: T) -> f64 {
        let x = x.as_f64();
        match *self {
            Self::Zero => 0.0,
            Self::L1(l) => l * x.abs(),
            Self::NegLog(0.0) => 0.0,
            Self::NegLog(_) if x < 0.0 => f64::INFINITY,
            Self::NegLog(a) => -a * x.ln(),
            Self::NonNeg => {
                if x >= 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Self::Box(lo, hi) => {
                if (lo..=hi).contains(&x) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    pub fn prox<T: Scalar>(&self, y: &[T], gamma: T) -> Vec<T> {
        y.iter().map(|&v| self.prox_scalar(v, gamma)).collect()
    }

    pub fn prox_conjugate<T: Scalar>(&self, x: &[T], gamma: T) -> Vec<T> {
        x.iter().map(|&v| self.prox_conjugate_scalar(v, gamma)).collect()
    }

    pub fn value<T: Scalar>(&self, x: &[T]) -> f64 {
        x.iter().map(|&v| self.value_scalar(v)).sum()
    }
}

/// Functions whose proximity operator acts coordinate by coordinate.
/// `offset` is the global index of `y[0]`, for callers holding a slice of
/// a longer vector.
pub trait Proximable {
    fn prox_into<T: Scalar>(&self, y: &mut [T], gamma: T, offset: usize);
    fn prox_conjugate_into<T: Scalar>(&self, x: &mut [T], gamma: T, offset: usize);
    fn value_at<T: Scalar>(&self, x: &[T], offset: usize) -> f64;
}

impl Proximable for ProxFn {
    fn prox_into<T: Scalar>(&self, y: &mut [T], gamma: T, _offset: usize) {
        for v in y {
            *v = self.prox_scalar(*v, gamma);
        }
    }

    fn prox_conjugate_into<T: Scalar>(&self, x: &mut [T], gamma: T, _offset: usize) {
        for v in x {
            *v = self.prox_conjugate_scalar(*v, gamma);
        }
    }

    fn value_at<T: Scalar>(&self, x: &[T], _offset: usize) -> f64 {
        self.value(x)
    }
}

/// A different [`ProxFn`] for every coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct Separable(pub Vec<ProxFn>);

impl Separable {
    /// `λ|xᵢ|` on every coordinate except those listed in `exempt`.
    pub fn l1_except(len: usize, lambda: f64, exempt: &[usize]) -> Self {
        let mut fns = vec![ProxFn::L1(lambda); len];
        for &i in exempt {
            if i < len {
                fns[i] = ProxFn::Zero;
            }
        }
        Self(fns)
    }
}

impl Proximable for Separable {
    fn prox_into<T: Scalar>(&self, y: &mut [T], gamma: T, offset: usize) {
        for (i, v) in y.iter_mut().enumerate() {
            *v = self.0[offset + i].prox_scalar(*v, gamma);
        }
    }

    fn prox_conjugate_into<T: Scalar>(&self, x: &mut [T], gamma: T, offset: usize) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = self.0[offset + i].prox_conjugate_scalar(*v, gamma);
        }
    }

    fn value_at<T: Scalar>(&self, x: &[T], offset: usize) -> f64 {
        x.iter()
            .enumerate()
            .map(|(i, &v)| self.0[offset + i].value_scalar(v))
            .sum()
    }
}
