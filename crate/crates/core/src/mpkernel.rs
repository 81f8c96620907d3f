//! Arbitrary-precision real arithmetic.
//!
//! Reals are MPFR floats ([`rug::Float`]); every value produced inside a
//! computation carries the binary precision derived from the active
//! [`PrecisionContext`]. Precision is accounted in decimal digits at the
//! interface.

use rug::ops::Pow;
use rug::Float;

use crate::error::{Result, ScattError};

pub type Real = Float;

/// log2(10), used to turn decimal digits into mantissa bits.
const BITS_PER_DIGIT: f64 = std::f64::consts::LOG2_10;

/// Extra mantissa bits on top of the requested working digits.
const EXTRA_BITS: u32 = 16;

/// Environment variable overriding [`PrecisionContext::DEFAULT_GUARD`].
pub const GUARD_ENV: &str = "SCATT_PRECISION_GUARD";

/// Precision policy shared by all arithmetic in one computation.
///
/// Working digits start at `2 * target + guard` and double on each
/// escalation, at most `max_escalations` times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrecisionContext {
    target_digits: u32,
    working_digits: u32,
    max_escalations: u32,
    escalations: u32,
}

impl PrecisionContext {
    pub const DEFAULT_GUARD: u32 = 30;
    pub const DEFAULT_MAX_ESCALATIONS: u32 = 3;

    pub fn new(target_digits: u32) -> Result<Self> {
        Self::with_guard(target_digits, Self::DEFAULT_GUARD)
    }

    /// Guards below [`Self::DEFAULT_GUARD`] are raised to it.
    pub fn with_guard(target_digits: u32, guard: u32) -> Result<Self> {
        if target_digits == 0 {
            return Err(ScattError::InvalidArgument(
                "target digits must be positive".into(),
            ));
        }
        let guard = guard.max(Self::DEFAULT_GUARD);
        Ok(Self {
            target_digits,
            working_digits: 2 * target_digits + guard,
            max_escalations: Self::DEFAULT_MAX_ESCALATIONS,
            escalations: 0,
        })
    }

    /// Like [`Self::new`], honouring `SCATT_PRECISION_GUARD` when it holds an
    /// integer.
    pub fn from_env(target_digits: u32) -> Result<Self> {
        let guard = std::env::var(GUARD_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<u32>().ok())
            .unwrap_or(Self::DEFAULT_GUARD);
        Self::with_guard(target_digits, guard)
    }

    pub fn with_max_escalations(mut self, max_escalations: u32) -> Self {
        self.max_escalations = max_escalations;
        self
    }

    /// Raises the working digits. Lowering below the creation floor is rejected.
    pub fn with_working_digits(mut self, working_digits: u32) -> Result<Self> {
        let floor = 2 * self.target_digits + Self::DEFAULT_GUARD;
        if working_digits < floor {
            return Err(ScattError::InvalidArgument(format!(
                "working digits {working_digits} below floor {floor}"
            )));
        }
        self.working_digits = working_digits;
        Ok(self)
    }

    pub fn target_digits(&self) -> u32 {
        self.target_digits
    }

    pub fn working_digits(&self) -> u32 {
        self.working_digits
    }

    pub fn max_escalations(&self) -> u32 {
        self.max_escalations
    }

    pub fn escalations(&self) -> u32 {
        self.escalations
    }

    /// Same context with a different accuracy target; working digits are
    /// raised if needed to keep the creation invariant.
    pub fn retarget(&self, target_digits: u32) -> Result<Self> {
        let mut fresh = Self::new(target_digits)?;
        fresh.working_digits = fresh.working_digits.max(self.working_digits);
        fresh.max_escalations = self.max_escalations;
        Ok(fresh)
    }

    /// Mantissa bits for the working digits.
    pub fn bits(&self) -> u32 {
        (self.working_digits as f64 * BITS_PER_DIGIT).ceil() as u32 + EXTRA_BITS
    }

    /// Doubles the working digits. The receiver is left untouched.
    pub fn escalate(&self) -> Result<Self> {
        if self.escalations >= self.max_escalations {
            return Err(ScattError::PrecisionExhausted {
                working_digits: self.working_digits,
                escalations: self.escalations,
                detail: format!(
                    "target {} digits, escalation budget {}",
                    self.target_digits, self.max_escalations
                ),
            });
        }
        Ok(Self {
            working_digits: self.working_digits * 2,
            escalations: self.escalations + 1,
            ..*self
        })
    }

    pub fn real<T>(&self, value: T) -> Real
    where
        Float: rug::Assign<T>,
    {
        Float::with_val(self.bits(), value)
    }

    pub fn zero(&self) -> Real {
        Float::new(self.bits())
    }

    /// 10^(-target_digits).
    pub fn target_eps(&self) -> Real {
        self.pow10(-(self.target_digits as i32))
    }

    /// 10^(-working_digits).
    pub fn working_eps(&self) -> Real {
        self.pow10(-(self.working_digits as i32))
    }

    pub fn pow10(&self, exponent: i32) -> Real {
        Float::with_val(self.bits(), Float::with_val(self.bits(), 10).pow(exponent))
    }
}

/// Gamma function on the positive real axis.
pub fn gamma(x: &Real, ctx: &PrecisionContext) -> Result<Real> {
    if !x.is_finite() || *x <= 0 {
        return Err(ScattError::Domain {
            op: "gamma",
            detail: format!("argument {} is not a positive real", x.to_f64()),
        });
    }
    Ok(Float::with_val(ctx.bits(), x.gamma_ref()))
}

/// `x^y` for positive `x`.
pub fn pow_real(x: &Real, y: &Real, ctx: &PrecisionContext) -> Result<Real> {
    if !x.is_finite() || *x <= 0 {
        return Err(ScattError::Domain {
            op: "pow_real",
            detail: format!("base {} is not a positive real", x.to_f64()),
        });
    }
    Ok(Float::with_val(ctx.bits(), x.pow(y)))
}

/// `|a - b| / |b|` at the larger of the two precisions.
pub fn rel_diff(a: &Real, b: &Real) -> Real {
    let bits = a.prec().max(b.prec());
    let diff = Float::with_val(bits, a - b).abs();
    diff / Float::with_val(bits, b.abs_ref())
}

pub fn escalate(ctx: &PrecisionContext) -> Result<PrecisionContext> {
    ctx.escalate()
}
