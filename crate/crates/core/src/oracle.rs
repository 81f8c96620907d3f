//! Independent scattering length by direct outward integration.
//!
//! The zero-energy equation `w'' = lambda (z^-12 - z^-s) w` is started deep in
//! the classically forbidden region from the logarithmic derivative of the
//! regular Thomé solution, integrated outward with an adaptive high-order
//! Taylor method, and matched to `A w_1 + B w_2` at `z_match`. Any irregular
//! admixture in the initial data decays outward like `exp(-2t)`, with
//! `t = sqrt(lambda) z_start^-5 / 5`.

use std::cmp::Ordering;

use rug::{Assign, Float};

use crate::error::{Result, ScattError};
use crate::mpkernel::{PrecisionContext, Real};
use crate::series::{eval_w, thome_logderiv, Basis, PotentialSpec};

pub const DEFAULT_Z_MATCH: f64 = 2.0;

/// Second matching point used for the self-consistency check.
pub const CHECK_Z_MATCH: f64 = 2.5;

/// Relative agreement required between the two matching points.
pub const MATCH_AGREEMENT: f64 = 1e-9;

const MIN_EXPONENT_SCALE: f64 = 20.0;
const MAX_EXPONENT_SCALE: f64 = 160.0;

#[derive(Debug, Clone)]
pub struct IntegrationSetup {
    pub spec: PotentialSpec,
    pub z_start: Real,
    pub z_match: Real,
    /// Local relative error allowed per Taylor step.
    pub step_control: Real,
}

impl IntegrationSetup {
    /// Start point with `sqrt(lambda) z^-5 / 5` in `[20, 160]`, the smallest
    /// such scale (from about 26 upward) at which the Thomé truncation error is
    /// below the step control. Large intensities need deeper starts.
    pub fn new(spec: &PotentialSpec, ctx: &PrecisionContext) -> Result<Self> {
        let digits = ctx.target_digits() as f64 + 5.0;
        let step_control = ctx.pow10(-(digits as i32));
        // smallest Thome term ~ exp(-2t)
        let mut t = (digits * std::f64::consts::LN_10 / 2.0 + 3.0).clamp(MIN_EXPONENT_SCALE, MAX_EXPONENT_SCALE);
        loop {
            let setup = Self::with_exponent_scale(spec, t, ctx)?.with_step_control(step_control.clone());
            match thome_logderiv(spec, &setup.z_start, ctx) {
                Ok((_, err)) if err < step_control => return Ok(setup),
                Ok(_) | Err(ScattError::ZTooLarge { .. }) if t < MAX_EXPONENT_SCALE => {
                    t = (t * 1.5).min(MAX_EXPONENT_SCALE);
                }
                Ok((_, err)) => {
                    return Err(ScattError::ZTooLarge {
                        z: setup.z_start.to_f64(),
                        trunc_err: err.to_f64(),
                        tolerance: step_control.to_f64(),
                    })
                }
                Err(e) => return Err(e),
            }
        }
    }

    /// Start point at a prescribed exponent scale `t = sqrt(lambda) z^-5 / 5`.
    pub fn with_exponent_scale(spec: &PotentialSpec, t: f64, ctx: &PrecisionContext) -> Result<Self> {
        let bits = ctx.bits();
        let ratio = Float::with_val(bits, spec.sqrt_lambda_at(ctx) / (5.0 * t));
        let z_start = ratio.root(5);
        if z_start >= DEFAULT_Z_MATCH.min(1.0) {
            return Err(ScattError::InvalidArgument(format!(
                "start point z = {} is not inside (0, 1); sqrt(lambda) too large",
                z_start.to_f64()
            )));
        }
        Ok(Self {
            spec: spec.clone(),
            z_start,
            z_match: ctx.real(DEFAULT_Z_MATCH),
            step_control: ctx.pow10(-(ctx.target_digits() as i32 + 5)),
        })
    }

    pub fn with_z_match(mut self, z_match: f64) -> Result<Self> {
        if z_match < 1.5 {
            return Err(ScattError::InvalidArgument(format!(
                "matching point must be >= 1.5, got {z_match}"
            )));
        }
        self.z_match = Float::with_val(self.z_start.prec(), z_match);
        Ok(self)
    }

    pub fn with_step_control(mut self, step_control: Real) -> Self {
        self.step_control = step_control;
        self
    }
}

/// Coefficients of the Taylor expansion of `w` around `z0` up to `order`.
fn taylor_coefficients(
    lambda: &Real,
    s: u32,
    z0: &Real,
    w: &Real,
    dw: &Real,
    order: usize,
    bits: u32,
) -> Vec<Real> {
    let zinv = Float::with_val(bits, z0.recip_ref());
    // lambda (z0+h)^-12 - lambda (z0+h)^-s = sum q_i h^i
    let mut rep = Float::with_val(bits, zinv.pow_ref_u(12)) * lambda;
    let mut att = Float::with_val(bits, zinv.pow_ref_u(s)) * lambda;
    let mut q = Vec::with_capacity(order);
    for i in 0..order {
        if i > 0 {
            rep *= -((12 + i - 1) as i64);
            rep /= i as u64;
            rep *= &zinv;
            att *= -((s as usize + i - 1) as i64);
            att /= i as u64;
            att *= &zinv;
        }
        q.push(Float::with_val(bits, &rep - &att));
    }
    let mut c = Vec::with_capacity(order + 1);
    c.push(w.clone());
    c.push(dw.clone());
    let mut acc = Float::new(bits);
    let mut prod = Float::new(bits);
    for k in 0..order.saturating_sub(1) {
        acc.assign(0);
        for i in 0..=k {
            prod.assign(&q[i] * &c[k - i]);
            acc += &prod;
        }
        c.push(Float::with_val(bits, &acc / ((k + 1) * (k + 2)) as u64));
    }
    c
}

trait PowRefU {
    fn pow_ref_u(&self, e: u32) -> Real;
}

impl PowRefU for Real {
    fn pow_ref_u(&self, e: u32) -> Real {
        use rug::ops::Pow;
        Float::with_val(self.prec(), self.pow(e))
    }
}

/// Integrates from `setup.z_start` with `w = initial_scale`,
/// `w' = initial_scale * logderiv`, returning `(w, w')` at each of `targets`
/// (sorted ascending, all above the start point).
pub fn integrate_to(
    setup: &IntegrationSetup,
    targets: &[Real],
    initial_scale: &Real,
    ctx: &PrecisionContext,
) -> Result<Vec<(Real, Real)>> {
    let bits = ctx.bits();
    let spec = &setup.spec;
    let lambda = spec.lambda_at(ctx);
    let (logderiv, _) = thome_logderiv(spec, &setup.z_start, ctx)?;

    let mut z = Float::with_val(bits, &setup.z_start);
    let mut w = Float::with_val(bits, initial_scale);
    let mut dw = Float::with_val(bits, &logderiv * &w);

    let tol = Float::with_val(bits, &setup.step_control);
    let tol_digits = -tol.to_f64().log10();
    let order = ((1.2 * tol_digits).ceil() as usize + 10).max(16);
    let mut out = Vec::with_capacity(targets.len());
    let mut next = 0usize;

    let mut term = Float::new(bits);
    let mut h = Float::new(bits);
    let mut hpow = Float::new(bits);
    while next < targets.len() {
        let target = &targets[next];
        if *target <= z {
            return Err(ScattError::InvalidArgument(format!(
                "integration target {} is not beyond {}",
                target.to_f64(),
                z.to_f64()
            )));
        }
        let c = taylor_coefficients(&lambda, spec.s(), &z, &w, &dw, order, bits);
        // scale-invariant size of the state
        let size = Float::with_val(bits, w.abs_ref()) + Float::with_val(bits, &dw * &z).abs();
        let allowed = Float::with_val(bits, &tol * &size);

        // step from the decay of the two highest coefficients
        let mut hf = 0.7 * z.to_f64();
        for k in [order - 1, order] {
            let ck = c[k].to_f64().abs();
            if ck > 0.0 {
                let hk = 0.9 * (allowed.to_f64() / ck).powf(1.0 / k as f64);
                if hk.is_finite() {
                    hf = hf.min(hk);
                }
            }
        }
        let remaining = Float::with_val(bits, target - &z);
        let mut reaches;
        loop {
            h.assign(hf);
            reaches = h >= remaining;
            if reaches {
                h.assign(&remaining);
            }
            if h.is_zero() || hf < 1e-15 * z.to_f64() {
                return Err(ScattError::StepUnderflow { z: z.to_f64() });
            }
            // tail check on value and on z times the derivative
            let z_scale = Float::with_val(bits, &z / &h);
            let mut ok = true;
            for k in [order - 1, order] {
                hpow.assign(h.pow_ref_u(k as u32));
                term.assign(&c[k] * &hpow);
                let mut dterm = Float::with_val(bits, &term * k as u64);
                dterm *= &z_scale;
                if term.cmp_abs(&allowed) == Some(Ordering::Greater)
                    || dterm.cmp_abs(&allowed) == Some(Ordering::Greater)
                {
                    ok = false;
                }
            }
            if ok {
                break;
            }
            hf = h.to_f64() * 0.5;
        }

        // Horner for value and derivative
        let mut value = Float::with_val(bits, &c[order]);
        let mut deriv = Float::with_val(bits, &c[order] * order as u64);
        for k in (0..order).rev() {
            value *= &h;
            value += &c[k];
            if k > 0 {
                deriv *= &h;
                term.assign(&c[k] * k as u64);
                deriv += &term;
            }
        }
        w = value;
        dw = deriv;
        if reaches {
            z.assign(target);
            out.push((w.clone(), dw.clone()));
            next += 1;
        } else {
            z += &h;
        }
    }
    Ok(out)
}

/// `(w, w')` at `setup.z_match`, normalised to `w(z_start) = 1`.
pub fn integrate_zero_energy(setup: &IntegrationSetup, ctx: &PrecisionContext) -> Result<(Real, Real)> {
    let mut states = integrate_to(setup, std::slice::from_ref(&setup.z_match), &ctx.real(1), ctx)?;
    Ok(states.remove(0))
}

#[derive(Debug, Clone)]
pub struct MatchResult {
    /// Coefficient of `w_1`.
    pub coeff_a: Real,
    /// Coefficient of `w_2`.
    pub coeff_b: Real,
    /// `-B / A`; infinite when `A` vanishes exactly.
    pub a_over_r0: Real,
    /// `||M||_F^2 / |det M|` for `M = [w1 w2; w1' w2']`.
    pub condition_estimate: f64,
}

impl MatchResult {
    /// `|A| <= 10^-T hypot(A, B)`: the state is pure `w_2` at target precision.
    pub fn is_pole(&self, ctx: &PrecisionContext) -> bool {
        let bits = self.coeff_a.prec();
        let scale = Float::with_val(bits, self.coeff_a.hypot_ref(&self.coeff_b));
        let floor = Float::with_val(bits, &scale * &ctx.target_eps());
        self.coeff_a.cmp_abs(&floor) != Some(Ordering::Greater)
    }
}

/// Solves `[w1 w2; w1' w2'] [A; B] = [w; w']` at `z_match`.
pub fn match_coefficients(
    spec: &PotentialSpec,
    z_match: &Real,
    w: &Real,
    dw: &Real,
    ctx: &PrecisionContext,
) -> Result<MatchResult> {
    let bits = ctx.bits();
    let (w1, dw1) = eval_w(spec, Basis::W1, z_match, ctx)?;
    let (w2, dw2) = eval_w(spec, Basis::W2, z_match, ctx)?;
    let det = Float::with_val(bits, &w1 * &dw2) - Float::with_val(bits, &w2 * &dw1);
    let coeff_a = (Float::with_val(bits, w * &dw2) - Float::with_val(bits, &w2 * dw)) / &det;
    let coeff_b = (Float::with_val(bits, &w1 * dw) - Float::with_val(bits, &dw1 * w)) / &det;
    let a_over_r0 = if coeff_a.is_zero() {
        let mut inf = Float::with_val(bits, rug::float::Special::Infinity);
        if coeff_b.is_sign_positive() {
            inf = -inf;
        }
        inf
    } else {
        Float::with_val(bits, -&coeff_b) / &coeff_a
    };
    let frob = [&w1, &w2, &dw1, &dw2]
        .iter()
        .map(|x| Float::with_val(bits, x.square_ref()))
        .fold(Float::new(bits), |acc, x| acc + x);
    let condition_estimate = (frob / det.abs()).to_f64();
    Ok(MatchResult {
        coeff_a,
        coeff_b,
        a_over_r0,
        condition_estimate,
    })
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub a_over_r0: Real,
    /// Difference between the two matching points.
    pub err_est: f64,
    pub primary: MatchResult,
    pub check: MatchResult,
    pub z_start: f64,
}

impl OracleResult {
    pub fn a_over_r0_f64(&self) -> f64 {
        self.a_over_r0.to_f64()
    }
}

/// Scattering length by integration, matched at z = 2 and checked at z = 2.5.
pub fn oracle_scattering(spec: &PotentialSpec, ctx: &PrecisionContext) -> Result<OracleResult> {
    let setup = IntegrationSetup::new(spec, ctx)?;
    let z_check = ctx.real(CHECK_Z_MATCH);
    let states = integrate_to(
        &setup,
        &[setup.z_match.clone(), z_check.clone()],
        &ctx.real(1),
        ctx,
    )?;
    let primary = match_coefficients(spec, &setup.z_match, &states[0].0, &states[0].1, ctx)?;
    let check = match_coefficients(spec, &z_check, &states[1].0, &states[1].1, ctx)?;

    let a1 = primary.a_over_r0.to_f64();
    let a2 = check.a_over_r0.to_f64();
    let diff = (a1 - a2).abs();
    if !(diff <= MATCH_AGREEMENT * a1.abs().max(1.0)) {
        return Err(ScattError::IntegrationAccuracy {
            z_first: DEFAULT_Z_MATCH,
            z_second: CHECK_Z_MATCH,
            a_first: a1,
            a_second: a2,
        });
    }
    Ok(OracleResult {
        a_over_r0: primary.a_over_r0.clone(),
        err_est: diff,
        primary,
        check,
        z_start: setup.z_start.to_f64(),
    })
}

pub fn oracle_scattering_length(spec: &PotentialSpec, ctx: &PrecisionContext) -> Result<Real> {
    Ok(oracle_scattering(spec, ctx)?.a_over_r0)
}
