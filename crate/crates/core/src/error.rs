use thiserror::Error;

use crate::roots::RootRecord;

pub type Result<T> = std::result::Result<T, ScattError>;

#[derive(Debug, Clone, Error)]
pub enum ScattError {
    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "precision budget exhausted after {escalations} escalations \
         (working digits {working_digits}): {detail}"
    )]
    PrecisionExhausted {
        working_digits: u32,
        escalations: u32,
        detail: String,
    },

    /// The Wronskian evaluated with two admissible truncation orders did not
    /// agree even at the largest precision allowed.
    #[error(
        "W[w_{j}, w_reg] not n-independent at {working_digits} digits: \
         n = {n} gives {value_n:e}, n + 1 gives {value_next:e} (mismatch {mismatch:e})"
    )]
    Inconsistent {
        j: u8,
        n: u32,
        value_n: f64,
        value_next: f64,
        mismatch: f64,
        working_digits: u32,
    },

    #[error("term budget of {budget} exhausted while summing {what}")]
    TermBudget { what: &'static str, budget: usize },

    #[error(
        "Thome expansion too coarse at z = {z}: truncation error {trunc_err:e} \
         is not below {tolerance:e}"
    )]
    ZTooLarge {
        z: f64,
        trunc_err: f64,
        tolerance: f64,
    },

    #[error("scattering length diverges at sqrt(lambda) = {sqrt_lambda} (|W2|/scale = {ratio:e})")]
    AtPole { sqrt_lambda: f64, ratio: f64 },

    #[error("integration step underflow at z = {z}")]
    StepUnderflow { z: f64 },

    #[error(
        "integration accuracy: matching at z = {z_first} gives {a_first:e}, \
         at z = {z_second} gives {a_second:e}"
    )]
    IntegrationAccuracy {
        z_first: f64,
        z_second: f64,
        a_first: f64,
        a_second: f64,
    },

    #[error(
        "root scan reached sqrt(lambda) = {reached} with {} of {wanted} roots found",
        partial.len()
    )]
    RangeExhausted {
        reached: f64,
        wanted: usize,
        partial: Vec<RootRecord>,
    },
}
