//! Evaluable scalar functions of time.
//!
//! Everything that plays the role of a(t), b(t), gamma(t), a particular
//! solution p(t) or a shifted coefficient a(t) - 2p(t) implements
//! [`Coefficient`], so the quadrature-based solvers do not care whether a
//! function was parsed, built in code, or interpolated from a trajectory.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Real;

pub trait Coefficient<T: Real>: Send + Sync {
    fn eval(&self, t: T) -> Result<T>;

    /// `Some(c)` when the function is known to be identically `c`.
    fn constant_value(&self) -> Option<T> {
        None
    }

    fn describe(&self) -> String {
        "<function>".to_string()
    }
}

/// Shared, type-erased coefficient.
pub type Coef<T> = Arc<dyn Coefficient<T>>;

impl<T: Real, C: Coefficient<T> + ?Sized> Coefficient<T> for Arc<C> {
    fn eval(&self, t: T) -> Result<T> {
        (**self).eval(t)
    }
    fn constant_value(&self) -> Option<T> {
        (**self).constant_value()
    }
    fn describe(&self) -> String {
        (**self).describe()
    }
}

impl<T: Real, C: Coefficient<T> + ?Sized> Coefficient<T> for &C {
    fn eval(&self, t: T) -> Result<T> {
        (**self).eval(t)
    }
    fn constant_value(&self) -> Option<T> {
        (**self).constant_value()
    }
    fn describe(&self) -> String {
        (**self).describe()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constant<T>(pub T);

impl<T: Real> Coefficient<T> for Constant<T> {
    fn eval(&self, _t: T) -> Result<T> {
        Ok(self.0)
    }
    fn constant_value(&self) -> Option<T> {
        Some(self.0)
    }
    fn describe(&self) -> String {
        self.0.to_string()
    }
}

/// Wraps an infallible closure.
pub struct FnCoefficient<F> {
    f: F,
    label: String,
}

impl<F> FnCoefficient<F> {
    pub fn new(label: impl Into<String>, f: F) -> Self {
        Self { f, label: label.into() }
    }
}

impl<F> fmt::Debug for FnCoefficient<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnCoefficient").field("label", &self.label).finish()
    }
}

impl<T: Real, F: Fn(T) -> T + Send + Sync> Coefficient<T> for FnCoefficient<F> {
    fn eval(&self, t: T) -> Result<T> {
        let v = (self.f)(t);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { t: t.as_f64(), value: v.as_f64() })
        }
    }
    fn describe(&self) -> String {
        self.label.clone()
    }
}

pub fn constant<T: Real>(c: T) -> Coef<T> {
    Arc::new(Constant(c))
}

pub fn from_fn<T: Real, F>(label: &str, f: F) -> Coef<T>
where
    F: Fn(T) -> T + Send + Sync + 'static,
{
    Arc::new(FnCoefficient::new(label, f))
}

