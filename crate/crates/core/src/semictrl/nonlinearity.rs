use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::SpaceTimeField;

/// Below this |s| the quotient g(s) is replaced by f′(0).
pub const QUOTIENT_S_TOL: f64 = 1e-8;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A C¹ nonlinearity f together with f(0) and f′(0).
///
/// The growth condition f(s)/(|s|√ln(1+|s|)) → 0 is not checked; violating
/// it shows up as blow-up or non-convergence of the fixed point.
#[derive(Clone)]
pub struct Nonlinearity {
    f: ScalarFn,
    pub f0: f64,
    pub fprime0: f64,
    pub description: String,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        fm.debug_struct("Nonlinearity")
            .field("description", &self.description)
            .field("f0", &self.f0)
            .field("fprime0", &self.fprime0)
            .finish()
    }
}

impl Nonlinearity {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static, fprime0: f64, description: impl Into<String>) -> Result<Self> {
        let f0 = f(0.0);
        if !f0.is_finite() {
            return Err(Error::NonFiniteValue { s: 0.0 });
        }
        if !fprime0.is_finite() {
            return Err(Error::Validation(vec!["f'(0) must be finite".into()]));
        }
        Ok(Nonlinearity {
            f: Arc::new(f),
            f0,
            fprime0,
            description: description.into(),
        })
    }

    pub fn zero() -> Self {
        Self::new(|_| 0.0, 0.0, "f(s) = 0").expect("finite")
    }

    /// f(s) = sin(s) + shift
    pub fn sine_plus(shift: f64) -> Self {
        Self::new(move |s| s.sin() + shift, 1.0, format!("f(s) = sin(s) + {shift}")).expect("finite")
    }

    /// f(s) = slope·s + intercept
    pub fn affine(slope: f64, intercept: f64) -> Self {
        Self::new(move |s| slope * s + intercept, slope, format!("f(s) = {slope}*s + {intercept}")).expect("finite")
    }

    /// f(s) = coeff·s^p for an integer p ≥ 1.
    pub fn power(coeff: f64, p: u32) -> Self {
        let fp0 = if p == 1 { coeff } else { 0.0 };
        Self::new(move |s| coeff * s.powi(p as i32), fp0, format!("f(s) = {coeff}*s^{p}")).expect("finite")
    }

    pub fn eval(&self, s: f64) -> f64 {
        (self.f)(s)
    }

}

/// g(s) = (f(s) − f(0))/s, with g = f′(0) for |s| < 1e-8.
pub fn g_eval(nl: &Nonlinearity, s: f64) -> Result<f64> {
    if s.abs() < QUOTIENT_S_TOL {
        return Ok(nl.fprime0);
    }
    let fs = nl.eval(s);
    if !fs.is_finite() {
        return Err(Error::NonFiniteValue { s });
    }
    Ok((fs - nl.f0) / s)
}

/// g applied pointwise.
pub fn g_field(nl: &Nonlinearity, u: &SpaceTimeField) -> Result<SpaceTimeField> {
    let vals = u.values().iter().map(|&s| g_eval(nl, s)).collect::<Result<Vec<_>>>()?;
    SpaceTimeField::from_values(u.nx(), u.slices(), vals)
}

/// max over all nodes and levels of |g(u)|.
pub fn g_norm_inf(nl: &Nonlinearity, u: &SpaceTimeField) -> Result<f64> {
    u.values()
        .iter()
        .try_fold(0.0f64, |m, &s| Ok(m.max(g_eval(nl, s)?.abs())))
}
