//! Convergent solutions at infinity and formal Thomé solutions at the origin.
//!
//! In the reduced variable `z = r / r0` the zero-energy radial equation reads
//!
//! ```text
//! -z^2 w''(z) + lambda (z^-10 - z^(2-s)) w(z) = 0.
//! ```
//!
//! `w_1(z) = z * sum a_{n,1} z^-n` and `w_2(z) = sum a_{n,2} z^-n` converge for
//! every `z > 0`. At the irregular singular point `z = 0` the two formal
//! solutions `exp(beta z^-5 / 5) z^mu sum b_n z^n` have `beta = -sqrt(lambda)`
//! (regular) and `beta = +sqrt(lambda)` (irregular).

use std::collections::{HashMap, VecDeque};
use std::hash::Hash;
use std::sync::{Arc, LazyLock, Mutex};

use rug::ops::Pow;
use rug::{Assign, Float};

use crate::error::{Result, ScattError};
use crate::mpkernel::{PrecisionContext, Real};

/// Consecutive negligible terms required before a series is cut.
pub const NEGLIGIBLE_RUN: usize = 25;

/// Hard cap on the number of terms of any single series summation.
pub const TERM_BUDGET: usize = 1 << 17;

/// Precision used to hold the exact square of a user-supplied `sqrt(lambda)`.
pub const SPEC_BITS: u32 = 4096;

/// One (12, s) Lennard-Jones potential `lambda ((r0/r)^12 - (r0/r)^s)` in units
/// of hbar^2 / (2 m r0^2).
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    s: u32,
    lambda: Real,
    r0: f64,
}

impl PotentialSpec {
    pub fn new(s: u32, lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(ScattError::InvalidArgument(format!(
                "lambda must be positive and finite, got {lambda}"
            )));
        }
        Self::from_lambda_real(s, Float::with_val(53, lambda))
    }

    /// `lambda` is taken as the exact square of `sqrt_lambda`.
    pub fn from_sqrt_lambda(s: u32, sqrt_lambda: f64) -> Result<Self> {
        if !sqrt_lambda.is_finite() || sqrt_lambda <= 0.0 {
            return Err(ScattError::InvalidArgument(format!(
                "sqrt(lambda) must be positive and finite, got {sqrt_lambda}"
            )));
        }
        Self::from_sqrt_lambda_real(s, &Float::with_val(53, sqrt_lambda))
    }

    pub fn from_sqrt_lambda_real(s: u32, sqrt_lambda: &Real) -> Result<Self> {
        let bits = (2 * sqrt_lambda.prec()).max(SPEC_BITS);
        Self::from_lambda_real(s, Float::with_val(bits, sqrt_lambda.square_ref()))
    }

    pub fn from_lambda_real(s: u32, lambda: Real) -> Result<Self> {
        if !(4..=7).contains(&s) {
            return Err(ScattError::InvalidArgument(format!(
                "attractive exponent s must be 4, 5, 6 or 7, got {s}"
            )));
        }
        if !lambda.is_finite() || lambda <= 0 {
            return Err(ScattError::InvalidArgument(format!(
                "lambda must be positive and finite, got {}",
                lambda.to_f64()
            )));
        }
        Ok(Self { s, lambda, r0: 1.0 })
    }

    pub fn with_r0(mut self, r0: f64) -> Result<Self> {
        if !r0.is_finite() || r0 <= 0.0 {
            return Err(ScattError::InvalidArgument(format!(
                "r0 must be positive and finite, got {r0}"
            )));
        }
        self.r0 = r0;
        Ok(self)
    }

    pub fn s(&self) -> u32 {
        self.s
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn lambda(&self) -> &Real {
        &self.lambda
    }

    pub fn lambda_f64(&self) -> f64 {
        self.lambda.to_f64()
    }

    pub fn sqrt_lambda_f64(&self) -> f64 {
        Float::with_val(64, self.lambda.sqrt_ref()).to_f64()
    }

    pub fn lambda_at(&self, ctx: &PrecisionContext) -> Real {
        Float::with_val(ctx.bits(), &self.lambda)
    }

    pub fn sqrt_lambda_at(&self, ctx: &PrecisionContext) -> Real {
        Float::with_val(ctx.bits(), self.lambda.sqrt_ref())
    }

    /// Exact textual identity of lambda, used as a cache key.
    fn lambda_key(&self) -> String {
        self.lambda.to_string_radix(16, None)
    }
}

/// Basic solution at infinity: `w_1 ~ z`, `w_2 ~ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    W1,
    W2,
}

impl Basis {
    pub const BOTH: [Basis; 2] = [Basis::W1, Basis::W2];

    pub fn index(self) -> u8 {
        match self {
            Basis::W1 => 1,
            Basis::W2 => 2,
        }
    }

    /// Leading exponent at infinity.
    pub fn nu(self) -> i64 {
        match self {
            Basis::W1 => 1,
            Basis::W2 => 0,
        }
    }
}

/// Thomé solution at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Regular,
    Irregular,
}

#[derive(Debug, Clone)]
pub struct SeriesTabulation {
    pub spec: PotentialSpec,
    pub j: Basis,
    pub nu: i64,
    /// `a_{0..=N, j}`.
    pub coeffs: Vec<Real>,
}

impl SeriesTabulation {
    /// Coefficient with index `n`; negative indices are zero.
    pub fn get(&self, n: i64) -> Option<&Real> {
        if n < 0 {
            None
        } else {
            self.coeffs.get(n as usize)
        }
    }

    fn extended(&self, last: usize, ctx: &PrecisionContext) -> Self {
        let mut coeffs = self.coeffs.clone();
        let lambda = self.spec.lambda_at(ctx);
        let s = self.spec.s as i64;
        let nu = self.nu;
        let mut diff = ctx.zero();
        for n in coeffs.len()..=last {
            let n = n as i64;
            let value = if n == 0 {
                ctx.real(1)
            } else if n == 1 && nu == 1 {
                ctx.zero()
            } else {
                let at = |k: i64| (k >= 0).then(|| &coeffs[k as usize]);
                diff.assign(0);
                if let Some(x) = at(n - 10) {
                    diff += x;
                }
                if let Some(x) = at(n - s + 2) {
                    diff -= x;
                }
                let denom = (n - nu) * (n + 1 - nu);
                Float::with_val(ctx.bits(), &lambda * &diff) / denom
            };
            coeffs.push(value);
        }
        Self {
            spec: self.spec.clone(),
            j: self.j,
            nu,
            coeffs,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ThomeTabulation {
    pub spec: PotentialSpec,
    pub branch: Branch,
    pub beta: Real,
    pub mu: Real,
    /// `b_{0..=N}`.
    pub coeffs: Vec<Real>,
}

impl ThomeTabulation {
    pub fn get(&self, n: i64) -> Option<&Real> {
        if n < 0 {
            None
        } else {
            self.coeffs.get(n as usize)
        }
    }

    fn empty(spec: &PotentialSpec, branch: Branch, ctx: &PrecisionContext) -> Self {
        let sqrt_lambda = spec.sqrt_lambda_at(ctx);
        let beta = match branch {
            Branch::Regular => -sqrt_lambda,
            Branch::Irregular => sqrt_lambda,
        };
        let mu = if spec.s == 7 {
            Float::with_val(ctx.bits(), &beta / 2u32) + 3u32
        } else {
            ctx.real(3)
        };
        Self {
            spec: spec.clone(),
            branch,
            beta,
            mu,
            coeffs: Vec::new(),
        }
    }

    fn extended(&self, last: usize, ctx: &PrecisionContext) -> Self {
        let mut coeffs = self.coeffs.clone();
        let lambda = self.spec.lambda_at(ctx);
        let s = self.spec.s as i64;
        let half_beta = Float::with_val(ctx.bits(), &self.beta / 2u32);
        let mut acc = ctx.zero();
        let mut f1 = ctx.zero();
        let mut f2 = ctx.zero();
        for n in coeffs.len()..=last {
            let n = n as i64;
            if n == 0 {
                coeffs.push(ctx.real(1));
                continue;
            }
            let at = |k: i64| (k >= 0).then(|| &coeffs[k as usize]);
            acc.assign(0);
            if s == 7 {
                if let Some(prev) = at(n - 5) {
                    f1.assign(&half_beta + (n - 2));
                    f2.assign(&half_beta + (n - 3));
                    acc.assign(&f1 * &f2);
                    acc *= prev;
                }
            } else {
                if let Some(prev) = at(n + s - 7) {
                    acc.assign(&lambda * prev);
                }
                if let Some(prev) = at(n - 5) {
                    f1.assign(prev * ((n - 2) * (n - 3)));
                    acc += &f1;
                }
            }
            let denom = Float::with_val(ctx.bits(), &self.beta * (2 * n));
            coeffs.push(Float::with_val(ctx.bits(), &acc / &denom));
        }
        Self {
            spec: self.spec.clone(),
            branch: self.branch,
            beta: self.beta.clone(),
            mu: self.mu.clone(),
            coeffs,
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct TabKey<T> {
    s: u32,
    lambda: String,
    which: T,
    working_digits: u32,
}

/// Small FIFO-bounded map of shared tabulations.
struct TabCache<K, V> {
    capacity: usize,
    inner: Mutex<(HashMap<K, Arc<V>>, VecDeque<K>)>,
}

impl<K: Clone + Eq + Hash, V> TabCache<K, V> {
    fn new(capacity: usize) -> Self {
        Self {
            capacity,
            inner: Mutex::new((HashMap::new(), VecDeque::new())),
        }
    }

    fn get(&self, key: &K) -> Option<Arc<V>> {
        let guard = self.inner.lock().unwrap_or_else(|e| e.into_inner());
        guard.0.get(key).cloned()
    }

    fn put(&self, key: K, value: Arc<V>) {
        let mut guard = self.inner.lock().unwrap_or_else(|e| e.into_inner());
        let (map, order) = &mut *guard;
        if map.insert(key.clone(), value).is_none() {
            order.push_back(key);
            while order.len() > self.capacity {
                if let Some(old) = order.pop_front() {
                    map.remove(&old);
                }
            }
        }
    }
}

const CACHE_CAPACITY: usize = 96;

static SERIES_CACHE: LazyLock<TabCache<TabKey<Basis>, SeriesTabulation>> =
    LazyLock::new(|| TabCache::new(CACHE_CAPACITY));
static THOME_CACHE: LazyLock<TabCache<TabKey<Branch>, ThomeTabulation>> =
    LazyLock::new(|| TabCache::new(CACHE_CAPACITY));

/// Coefficients `a_{0..=n_max, j}`; the returned tabulation may be longer.
pub fn a_coeffs(
    spec: &PotentialSpec,
    j: Basis,
    n_max: usize,
    ctx: &PrecisionContext,
) -> Arc<SeriesTabulation> {
    let key = TabKey {
        s: spec.s,
        lambda: spec.lambda_key(),
        which: j,
        working_digits: ctx.working_digits(),
    };
    let cached = SERIES_CACHE.get(&key);
    if let Some(tab) = &cached {
        if tab.coeffs.len() > n_max {
            return Arc::clone(tab);
        }
    }
    let base = match cached {
        Some(tab) => (*tab).clone(),
        None => SeriesTabulation {
            spec: spec.clone(),
            j,
            nu: j.nu(),
            coeffs: Vec::new(),
        },
    };
    let tab = Arc::new(base.extended(n_max, ctx));
    SERIES_CACHE.put(key, Arc::clone(&tab));
    tab
}

/// Coefficients `b_{0..=n_max}` of the Thomé solution on `branch`.
pub fn b_coeffs(
    spec: &PotentialSpec,
    branch: Branch,
    n_max: usize,
    ctx: &PrecisionContext,
) -> Arc<ThomeTabulation> {
    let key = TabKey {
        s: spec.s,
        lambda: spec.lambda_key(),
        which: branch,
        working_digits: ctx.working_digits(),
    };
    let cached = THOME_CACHE.get(&key);
    if let Some(tab) = &cached {
        if tab.coeffs.len() > n_max {
            return Arc::clone(tab);
        }
    }
    let base = match cached {
        Some(tab) => (*tab).clone(),
        None => ThomeTabulation::empty(spec, branch, ctx),
    };
    let tab = Arc::new(base.extended(n_max, ctx));
    THOME_CACHE.put(key, Arc::clone(&tab));
    tab
}

/// `w_j(z)` and its first two derivatives.
pub fn eval_w_derivatives(
    spec: &PotentialSpec,
    j: Basis,
    z: &Real,
    ctx: &PrecisionContext,
) -> Result<[Real; 3]> {
    if *z < 1 {
        return Err(ScattError::InvalidArgument(format!(
            "basic solutions are evaluated for z >= 1, got {}",
            z.to_f64()
        )));
    }
    let bits = ctx.bits();
    let z = Float::with_val(bits, z);
    let zinv = Float::with_val(bits, z.recip_ref());
    let eps = ctx.working_eps();
    let nu = j.nu();

    // z^(nu - n)
    let mut zpow = if nu == 1 { z.clone() } else { ctx.real(1) };
    let mut sums = [ctx.zero(), ctx.zero(), ctx.zero()];
    let mut term = ctx.zero();
    let mut bound = ctx.zero();
    let mut quiet = 0usize;
    let mut tab = a_coeffs(spec, j, 64, ctx);
    let mut n = 0usize;
    loop {
        if n >= TERM_BUDGET {
            return Err(ScattError::TermBudget {
                what: "basic solution series",
                budget: TERM_BUDGET,
            });
        }
        if n >= tab.coeffs.len() {
            tab = a_coeffs(spec, j, 2 * tab.coeffs.len(), ctx);
        }
        let e = nu - n as i64;
        let mut negligible = true;
        // value, first and second derivative terms: a_n z^e, e a_n z^(e-1), e(e-1) a_n z^(e-2)
        term.assign(&tab.coeffs[n] * &zpow);
        for (order, sum) in sums.iter_mut().enumerate() {
            if order > 0 {
                let factor = e - order as i64 + 1;
                term *= factor;
                term *= &zinv;
            }
            *sum += &term;
            bound.assign(&eps * &*sum);
            if term.cmp_abs(&bound) == Some(std::cmp::Ordering::Greater) {
                negligible = false;
            }
        }
        quiet = if negligible { quiet + 1 } else { 0 };
        if quiet >= NEGLIGIBLE_RUN {
            break;
        }
        zpow *= &zinv;
        n += 1;
    }
    Ok(sums)
}

/// `(w_j(z), w_j'(z))` for `z >= 1`.
pub fn eval_w(
    spec: &PotentialSpec,
    j: Basis,
    z: &Real,
    ctx: &PrecisionContext,
) -> Result<(Real, Real)> {
    let [w, dw, _] = eval_w_derivatives(spec, j, z, ctx)?;
    Ok((w, dw))
}

/// Logarithmic derivative of the regular Thomé solution at small `z`, with the
/// asymptotic series cut at its smallest term.
///
/// Returns `(w_reg'/w_reg, truncation error)`, the latter being the smallest
/// term relative to the partial sum.
pub fn thome_logderiv(spec: &PotentialSpec, z: &Real, ctx: &PrecisionContext) -> Result<(Real, Real)> {
    if *z <= 0 || *z >= 1 {
        return Err(ScattError::InvalidArgument(format!(
            "Thome expansion is used for 0 < z < 1, got {}",
            z.to_f64()
        )));
    }
    let bits = ctx.bits();
    let z = Float::with_val(bits, z);
    let zf = z.to_f64();
    // exponent scale t = sqrt(lambda) z^-5 / 5; the smallest term sits near n = 10 t
    let t = spec.sqrt_lambda_f64() * zf.powi(-5) / 5.0;
    let n_max = ((12.0 * t).ceil() as usize + 60).min(TERM_BUDGET);
    let tab = b_coeffs(spec, Branch::Regular, n_max, ctx);
    let step = if spec.s == 7 { 5 } else { 1 };

    let mut zpow = ctx.real(1);
    let mut terms = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        terms.push(Float::with_val(bits, &tab.coeffs[n] * &zpow));
        zpow *= &z;
    }
    // isolated zero coefficients occur; only a zero tail means the series ends
    let terminated = terms[n_max.saturating_sub(4 * step)..].iter().all(|x| x.is_zero());
    let (cut, smallest) = terms
        .iter()
        .enumerate()
        .step_by(step)
        .filter(|(_, x)| !x.is_zero())
        .min_by(|a, b| a.1.cmp_abs(b.1).unwrap_or(std::cmp::Ordering::Equal))
        .map(|(i, x)| (i, x.clone().abs()))
        .unwrap_or((terms.len(), ctx.zero()));
    let end = if terminated { terms.len() } else { cut };

    let mut sum = ctx.zero();
    let mut dsum = ctx.zero();
    for (n, term) in terms.iter().enumerate().take(end) {
        sum += term;
        if n > 0 {
            dsum += Float::with_val(bits, term * n as u64) / &z;
        }
    }
    let trunc_err = if terminated {
        ctx.zero()
    } else {
        Float::with_val(bits, &smallest / &sum).abs()
    };
    if trunc_err >= ctx.target_eps() {
        return Err(ScattError::ZTooLarge {
            z: zf,
            trunc_err: trunc_err.to_f64(),
            tolerance: ctx.target_eps().to_f64(),
        });
    }

    // -beta z^-6 + mu / z + S'/S
    let z6 = Float::with_val(bits, (&z).pow(6u32)); // z^6
    let mut logderiv = Float::with_val(bits, -&tab.beta) / &z6;
    logderiv += Float::with_val(bits, &tab.mu / &z);
    logderiv += Float::with_val(bits, &dsum / &sum);
    Ok((logderiv, trunc_err))
}
