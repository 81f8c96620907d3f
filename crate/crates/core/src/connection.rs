//! Wronskians `W[w_j, w_reg]` between the basic solutions at infinity and the
//! regular Thomé solution, and the scattering length as their quotient.
//!
//! With `v_j = exp(sqrt(lambda) z^-5 / 10) w_j` and the matching `v_reg`, the
//! product `exp(sqrt(lambda) z^-5 / 5) W[w_j, w_reg]` is a formal Laurent series
//! `sum_p gamma_{p,j} z^(p + nu_j + mu)`. Reading off the coefficients of the
//! five Heaviside expansions of the exponential gives, for any integer
//! `n > sqrt(lambda)`,
//!
//! ```text
//! W[w_j, w_reg] = sum_{k=0..4} Gamma(n + 1 + d_k) / (sqrt(lambda)/5)^(n + d_k) * gamma_{-5n-k, j},
//! d_k = (k - nu_j - mu) / 5.
//! ```
//!
//! The right-hand side does not depend on `n`; evaluating it at `n` and `n + 1`
//! is the built-in accuracy test.

use std::cmp::Ordering;
use std::sync::Arc;

use rayon::prelude::*;
use rug::{Assign, Float};

use crate::error::{Result, ScattError};
use crate::mpkernel::{gamma, pow_real, PrecisionContext, Real};
use crate::series::{
    a_coeffs, b_coeffs, Basis, Branch, PotentialSpec, SeriesTabulation, ThomeTabulation,
    NEGLIGIBLE_RUN, TERM_BUDGET,
};

/// `2^(-1/5) / (1 - 2^(-1/5))`: geometric tail factor for the gamma sums.
const TAIL_FACTOR: f64 = 6.725_023;

/// One coefficient `gamma_{p,j}` of the Wronskian Laurent series.
#[derive(Debug, Clone)]
pub struct GammaCoefficient {
    pub p: i64,
    pub j: Basis,
    pub value: Real,
    pub terms_used: usize,
    /// Geometric extrapolation of the omitted tail.
    pub est_err: Real,
    /// Largest term magnitude met in the sum (sets the rounding floor).
    pub max_term: Real,
}

#[derive(Debug, Clone)]
pub struct WronskianResult {
    pub j: Basis,
    pub value: Real,
    pub n_used: u32,
    /// `|W(n) - W(n+1)|` plus the rounding and truncation floor of `W(n)`.
    pub consistency_err: Real,
    pub working_digits: u32,
}

impl WronskianResult {
    pub fn value_f64(&self) -> f64 {
        self.value.to_f64()
    }

    /// Sign, when the value is separated from zero by more than twice its error.
    pub fn certain_sign(&self) -> Option<Ordering> {
        let margin = Float::with_val(self.value.prec(), &self.consistency_err * 2u32);
        match self.value.cmp_abs(&margin) {
            Some(Ordering::Greater) => self.value.cmp0(),
            _ => None,
        }
    }
}

/// Both Wronskians at one intensity, accepted against a common scale.
#[derive(Debug, Clone)]
pub struct WronskianPair {
    pub w1: WronskianResult,
    pub w2: WronskianResult,
    /// `hypot(W1, W2)`: size of `w_reg` in the basis `(w_1, w_2)`.
    pub scale: Real,
}

impl WronskianPair {
    pub fn get(&self, j: Basis) -> &WronskianResult {
        match j {
            Basis::W1 => &self.w1,
            Basis::W2 => &self.w2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScatteringResult {
    pub spec: PotentialSpec,
    /// `a / r0 = W[w_1, w_reg] / W[w_2, w_reg]`.
    pub a_over_r0: Real,
    pub err_est: f64,
    pub w1: WronskianResult,
    pub w2: WronskianResult,
}

impl ScatteringResult {
    pub fn a_over_r0_f64(&self) -> f64 {
        self.a_over_r0.to_f64()
    }

    /// Dimensional scattering length, `a_over_r0 * r0`.
    pub fn a(&self) -> f64 {
        self.a_over_r0.to_f64() * self.spec.r0()
    }
}

/// Admissible truncation order `ceil(sqrt(lambda)) + 2`.
pub fn default_n(spec: &PotentialSpec) -> u32 {
    spec.sqrt_lambda_f64().ceil() as u32 + 2
}

fn term_budget(ctx: &PrecisionContext) -> usize {
    (40 * ctx.working_digits() as usize + 2000).min(TERM_BUDGET)
}

/// Coefficient tabulations shared by all gamma sums at one intensity.
#[derive(Clone)]
struct Tabs {
    a: [Arc<SeriesTabulation>; 2],
    b: Arc<ThomeTabulation>,
}

impl Tabs {
    fn new(spec: &PotentialSpec, a_len: usize, b_len: usize, ctx: &PrecisionContext) -> Self {
        Self {
            a: [
                a_coeffs(spec, Basis::W1, a_len, ctx),
                a_coeffs(spec, Basis::W2, a_len, ctx),
            ],
            b: b_coeffs(spec, Branch::Regular, b_len, ctx),
        }
    }

    fn a(&self, j: Basis) -> &SeriesTabulation {
        &self.a[(j.index() - 1) as usize]
    }
}

fn gamma_sum(
    spec: &PotentialSpec,
    j: Basis,
    p: i64,
    ctx: &PrecisionContext,
    tabs: &mut Tabs,
) -> Result<GammaCoefficient> {
    let bits = ctx.bits();
    let budget = term_budget(ctx);
    let eps = ctx.working_eps();
    let sqrt_lambda = spec.sqrt_lambda_at(ctx);
    let nu = j.nu();
    // first m at which a_{m-p-1} exists
    let first_live = (p + 1).max(0) as usize;

    let mut sum = ctx.zero();
    let mut term = ctx.zero();
    let mut coef = ctx.zero();
    let mut part = ctx.zero();
    let mut bound = ctx.zero();
    let mut max_term = ctx.zero();
    // largest term of the current run of negligible terms
    let mut run_max = ctx.zero();
    let mut quiet = 0usize;
    let mut m = 0usize;
    loop {
        if m >= budget {
            return Err(ScattError::TermBudget {
                what: "Wronskian coefficient gamma_p",
                budget,
            });
        }
        let hi = m as i64 - p - 1;
        if m >= tabs.b.coeffs.len() {
            tabs.b = b_coeffs(spec, Branch::Regular, 2 * m + 64, ctx);
        }
        if hi >= tabs.a(j).coeffs.len() as i64 {
            let len = 2 * hi as usize + 64;
            tabs.a[(j.index() - 1) as usize] = a_coeffs(spec, j, len, ctx);
        }
        let b = &tabs.b.coeffs[m];
        term.assign(0);
        if !b.is_zero() {
            let a_tab = tabs.a(j);
            // sqrt(lambda) a_{m-p-6} + (-p + 2m - 1 + mu - nu) a_{m-p-1}
            if let Some(a6) = a_tab.get(m as i64 - p - 6) {
                term.assign(&sqrt_lambda * a6);
            }
            if let Some(a1) = a_tab.get(hi) {
                coef.assign(&tabs.b.mu + (2 * m as i64 - p - 1 - nu));
                part.assign(&coef * a1);
                term += &part;
            }
            term *= b;
        }
        sum += &term;
        if term.cmp_abs(&max_term) == Some(Ordering::Greater) {
            max_term.assign(term.abs_ref());
        }
        if m >= first_live {
            bound.assign(&eps * &sum);
            if term.cmp_abs(&bound) != Some(Ordering::Greater) {
                if quiet == 0 || term.cmp_abs(&run_max) == Some(Ordering::Greater) {
                    run_max.assign(term.abs_ref());
                }
                quiet += 1;
            } else {
                quiet = 0;
            }
            if quiet >= NEGLIGIBLE_RUN {
                break;
            }
        }
        m += 1;
    }
    Ok(GammaCoefficient {
        p,
        j,
        value: sum,
        terms_used: m + 1,
        est_err: Float::with_val(bits, &run_max * TAIL_FACTOR),
        max_term,
    })
}

/// `gamma_{p,j}` summed to the working precision of `ctx`.
pub fn gamma_p(spec: &PotentialSpec, j: Basis, p: i64, ctx: &PrecisionContext) -> Result<GammaCoefficient> {
    let mut tabs = Tabs::new(spec, 256, 256, ctx);
    gamma_sum(spec, j, p, ctx, &mut tabs)
}

/// Value of the Heaviside-series formula at one `n`, with its rounding and
/// truncation floor.
fn evaluate_at_n(
    spec: &PotentialSpec,
    j: Basis,
    n: u32,
    ctx: &PrecisionContext,
    tabs: &mut Tabs,
) -> Result<(Real, Real)> {
    let bits = ctx.bits();
    let eps = ctx.working_eps();
    let base = Float::with_val(bits, spec.sqrt_lambda_at(ctx) / 5u32);
    let mu = tabs.b.mu.clone();
    let mut value = ctx.zero();
    let mut floor = ctx.zero();
    for k in 0..5i64 {
        // d_k = (k - nu - mu) / 5
        let delta = Float::with_val(bits, (k - j.nu()) - &mu) / 5u32;
        let exponent = Float::with_val(bits, &delta + n);
        let g_arg = Float::with_val(bits, &exponent + 1u32);
        let factor = gamma(&g_arg, ctx)? / pow_real(&base, &exponent, ctx)?;
        let p = -5 * n as i64 - k;
        let coeff = gamma_sum(spec, j, p, ctx, tabs)?;
        value += Float::with_val(bits, &factor * &coeff.value);
        let rounding = Float::with_val(bits, &coeff.max_term * &eps) * 10u32;
        let local = Float::with_val(bits, rounding + &coeff.est_err);
        floor += Float::with_val(bits, factor.abs() * local);
    }
    Ok((value, floor))
}

/// `W[w_j, w_reg]` from one fixed `n > sqrt(lambda)`, without the `n + 1`
/// cross-check; `consistency_err` holds only the rounding/truncation floor.
pub fn wronskian_at_n(
    spec: &PotentialSpec,
    j: Basis,
    n: u32,
    ctx: &PrecisionContext,
) -> Result<WronskianResult> {
    if n as f64 <= spec.sqrt_lambda_f64() {
        return Err(ScattError::InvalidArgument(format!(
            "n = {n} must exceed sqrt(lambda) = {}",
            spec.sqrt_lambda_f64()
        )));
    }
    let mut tabs = Tabs::new(spec, 256, 256, ctx);
    let (value, floor) = evaluate_at_n(spec, j, n, ctx, &mut tabs)?;
    Ok(WronskianResult {
        j,
        value,
        n_used: n,
        consistency_err: floor,
        working_digits: ctx.working_digits(),
    })
}

struct Attempt {
    pair: WronskianPair,
    /// `(j, value at n + 1)` for the first basis that failed its check.
    failure: Option<(Basis, Real)>,
}

fn attempt_pair(spec: &PotentialSpec, ctx: &PrecisionContext) -> Result<Attempt> {
    let bits = ctx.bits();
    let n = default_n(spec);
    let guess = 17 * (ctx.working_digits() as usize + 10) + 200;
    let tabs = Tabs::new(spec, guess + 5 * (n as usize + 2) + 16, guess, ctx);

    let jobs = [
        (Basis::W1, n),
        (Basis::W1, n + 1),
        (Basis::W2, n),
        (Basis::W2, n + 1),
    ];
    let evaluated: Vec<Result<(Real, Real)>> = jobs
        .par_iter()
        .map(|&(j, n_k)| {
            let mut local = tabs.clone();
            evaluate_at_n(spec, j, n_k, ctx, &mut local)
        })
        .collect();
    let mut evaluated = evaluated.into_iter();
    let mut next = || evaluated.next().expect("four jobs");
    let (w1_n, w1_floor) = next()?;
    let (w1_next, _) = next()?;
    let (w2_n, w2_floor) = next()?;
    let (w2_next, _) = next()?;

    let scale = Float::with_val(bits, w1_n.hypot_ref(&w2_n));
    let eps_t = ctx.target_eps();
    let floor_scale = Float::with_val(bits, &eps_t * &scale);

    let mut failure = None;
    let mut build = |j: Basis, at_n: Real, at_next: Real, floor: Real| {
        let err = Float::with_val(bits, &at_n - &at_next).abs() + floor;
        let reference = if at_n.cmp_abs(&floor_scale) == Some(Ordering::Greater) {
            Float::with_val(bits, at_n.abs_ref())
        } else {
            floor_scale.clone()
        };
        let tol = Float::with_val(bits, &eps_t * &reference);
        if err > tol && failure.is_none() {
            failure = Some((j, at_next));
        }
        WronskianResult {
            j,
            value: at_n,
            n_used: n,
            consistency_err: err,
            working_digits: ctx.working_digits(),
        }
    };
    let w1 = build(Basis::W1, w1_n, w1_next, w1_floor);
    let w2 = build(Basis::W2, w2_n, w2_next, w2_floor);
    Ok(Attempt {
        pair: WronskianPair { w1, w2, scale },
        failure,
    })
}

/// Both Wronskians, escalating precision until `n` and `n + 1` agree.
///
/// Acceptance: `|W_j(n) - W_j(n+1)| + floor <= 10^-T * max(|W_j|, 10^-T * hypot(W_1, W_2))`.
pub fn wronskian_pair(spec: &PotentialSpec, ctx: &PrecisionContext) -> Result<WronskianPair> {
    let mut current = *ctx;
    loop {
        let outcome = match attempt_pair(spec, &current) {
            Ok(attempt) => attempt,
            Err(ScattError::TermBudget { .. }) => {
                current = current.escalate()?;
                continue;
            }
            Err(e) => return Err(e),
        };
        let Some((j, at_next)) = outcome.failure else {
            return Ok(outcome.pair);
        };
        match current.escalate() {
            Ok(up) => current = up,
            Err(_) => {
                let w = outcome.pair.get(j);
                return Err(ScattError::Inconsistent {
                    j: j.index(),
                    n: w.n_used,
                    value_n: w.value.to_f64(),
                    value_next: at_next.to_f64(),
                    mismatch: Float::with_val(current.bits(), &w.value - &at_next)
                        .abs()
                        .to_f64(),
                    working_digits: current.working_digits(),
                });
            }
        }
    }
}

pub fn wronskian(spec: &PotentialSpec, j: Basis, ctx: &PrecisionContext) -> Result<WronskianResult> {
    let pair = wronskian_pair(spec, ctx)?;
    Ok(match j {
        Basis::W1 => pair.w1,
        Basis::W2 => pair.w2,
    })
}

/// `a / r0 = W[w_1, w_reg] / W[w_2, w_reg]`.
pub fn scattering_length(spec: &PotentialSpec, ctx: &PrecisionContext) -> Result<ScatteringResult> {
    let pair = wronskian_pair(spec, ctx)?;
    let bits = pair.w1.value.prec().max(ctx.bits());
    let w2_abs = Float::with_val(bits, pair.w2.value.abs_ref());
    let pole_floor = Float::with_val(bits, &ctx.target_eps() * &pair.scale);
    if w2_abs <= pole_floor || w2_abs <= pair.w2.consistency_err {
        let ratio = if pair.scale.is_zero() {
            0.0
        } else {
            Float::with_val(bits, &w2_abs / &pair.scale).to_f64()
        };
        return Err(ScattError::AtPole {
            sqrt_lambda: spec.sqrt_lambda_f64(),
            ratio,
        });
    }
    let a = Float::with_val(bits, &pair.w1.value / &pair.w2.value);
    let err = Float::with_val(bits, &a * &pair.w2.consistency_err).abs() + &pair.w1.consistency_err;
    let err_est = Float::with_val(bits, err / &w2_abs).to_f64();
    Ok(ScatteringResult {
        spec: spec.clone(),
        a_over_r0: a,
        err_est,
        w1: pair.w1,
        w2: pair.w2,
    })
}
