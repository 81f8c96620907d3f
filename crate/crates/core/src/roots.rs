//! Zeros and poles of the scattering length on the √λ axis.
//!
//! A zero is a sign change of `W[w_1, w_reg]`, a pole one of `W[w_2, w_reg]`.
//! Brackets come from a uniform grid; refinement is bisection with Illinois
//! steps kept strictly inside the current bracket.

use std::cmp::Ordering;
use std::fmt;

use rayon::prelude::*;
use rug::Float;

use crate::connection::{wronskian_pair, WronskianPair};
use crate::error::{Result, ScattError};
use crate::mpkernel::{PrecisionContext, Real};
use crate::series::{Basis, PotentialSpec};

pub const MAX_SQRT_LAMBDA: f64 = 100.0;
pub const MAX_GRID_STEP: f64 = 0.25;
pub const SCAN_CHUNK: f64 = 15.0;

const MAX_REFINE_ITERATIONS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RootKind {
    Zero,
    Pole,
}

impl RootKind {
    /// Basic solution whose Wronskian vanishes at this kind of root.
    pub fn basis(self) -> Basis {
        match self {
            RootKind::Zero => Basis::W1,
            RootKind::Pole => Basis::W2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RootKind::Zero => "zero",
            RootKind::Pole => "pole",
        }
    }
}

impl fmt::Display for RootKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KindSelection {
    Zeros,
    Poles,
    Both,
}

impl KindSelection {
    pub fn kinds(self) -> &'static [RootKind] {
        match self {
            KindSelection::Zeros => &[RootKind::Zero],
            KindSelection::Poles => &[RootKind::Pole],
            KindSelection::Both => &[RootKind::Zero, RootKind::Pole],
        }
    }
}

#[derive(Debug, Clone)]
pub struct RootRecord {
    pub s: u32,
    pub kind: RootKind,
    /// Ordinal among roots of the same kind, from 0.
    pub index: usize,
    /// Midpoint of the final bracket.
    pub sqrt_lambda: Real,
    /// Half-width of the final bracket.
    pub certified_err: f64,
}

impl RootRecord {
    pub fn sqrt_lambda_f64(&self) -> f64 {
        self.sqrt_lambda.to_f64()
    }
}

fn pair_at(s: u32, x: &Real, ctx: &PrecisionContext) -> Result<WronskianPair> {
    let spec = PotentialSpec::from_sqrt_lambda_real(s, x)?;
    wronskian_pair(&spec, ctx)
}

/// Certain signs of both Wronskians at each grid point, `None` where the value
/// is not distinguishable from zero.
fn grid_signs(s: u32, points: &[f64], ctx: &PrecisionContext) -> Result<Vec<[Option<Ordering>; 2]>> {
    points
        .par_iter()
        .map(|&x| {
            let pair = pair_at(s, &ctx.real(x), ctx)?;
            Ok([pair.w1.certain_sign(), pair.w2.certain_sign()])
        })
        .collect()
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let start = if lo <= 0.0 { step } else { lo };
    let count = ((hi - start) / step + 1e-9).floor() as usize;
    let mut points: Vec<f64> = (0..=count).map(|i| start + i as f64 * step).collect();
    if points.last().is_some_and(|&last| hi - last > 1e-9 * step) {
        points.push(hi);
    }
    points
}

fn check_range(lo: f64, hi: f64, step: f64) -> Result<()> {
    if !(lo >= 0.0 && hi > lo && hi <= MAX_SQRT_LAMBDA) {
        return Err(ScattError::InvalidArgument(format!(
            "sqrt(lambda) range [{lo}, {hi}] must lie within (0, {MAX_SQRT_LAMBDA}]"
        )));
    }
    if !(step > 0.0 && step <= MAX_GRID_STEP) {
        return Err(ScattError::InvalidArgument(format!(
            "grid step {step} must be in (0, {MAX_GRID_STEP}]"
        )));
    }
    Ok(())
}

fn sign_changes(points: &[f64], signs: &[Option<Ordering>]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut last: Option<(f64, Ordering)> = None;
    for (&x, sign) in points.iter().zip(signs) {
        let Some(sign) = *sign else { continue };
        if let Some((x0, s0)) = last {
            if s0 != sign {
                out.push((x0, x));
            }
        }
        last = Some((x, sign));
    }
    out
}

/// Sign-change intervals of the relevant Wronskian on a uniform grid over
/// `range`. A lower end of 0 starts the grid at `grid_step`.
pub fn bracket_roots(
    s: u32,
    kind: RootKind,
    range: (f64, f64),
    grid_step: f64,
    ctx: &PrecisionContext,
) -> Result<Vec<(f64, f64)>> {
    let (lo, hi) = range;
    check_range(lo, hi, grid_step)?;
    let points = grid(lo, hi, grid_step);
    let idx = kind.basis().index() as usize - 1;
    let signs: Vec<_> = grid_signs(s, &points, ctx)?.iter().map(|p| p[idx]).collect();
    Ok(sign_changes(&points, &signs))
}

struct Probe {
    value: Real,
    sign: Option<Ordering>,
}

fn probe(s: u32, kind: RootKind, x: &Real, ctx: &PrecisionContext) -> Result<Probe> {
    let pair = pair_at(s, x, ctx)?;
    let w = pair.get(kind.basis());
    Ok(Probe {
        sign: w.certain_sign(),
        value: w.value.clone(),
    })
}

/// Shrinks a sign-change bracket until its half-width is below `10^-digits`.
pub fn refine_root(
    s: u32,
    kind: RootKind,
    bracket: (f64, f64),
    digits: u32,
    ctx: &PrecisionContext,
) -> Result<RootRecord> {
    let rctx = ctx.retarget(ctx.target_digits().max(digits + 4))?;
    let bits = rctx.bits();
    let tol = rctx.pow10(-(digits as i32));
    let (lo, hi) = if bracket.0 <= bracket.1 { bracket } else { (bracket.1, bracket.0) };
    let mut a = rctx.real(lo);
    let mut b = rctx.real(hi);
    let pa = probe(s, kind, &a, &rctx)?;
    let pb = probe(s, kind, &b, &rctx)?;
    let (Some(sa), Some(sb)) = (pa.sign, pb.sign) else {
        return Err(ScattError::InvalidArgument(format!(
            "bracket [{lo}, {hi}] has an endpoint where W is indistinguishable from zero"
        )));
    };
    if sa == sb {
        return Err(ScattError::InvalidArgument(format!(
            "bracket [{lo}, {hi}] shows no sign change of the {kind} Wronskian"
        )));
    }
    let mut fa = pa.value;
    let mut fb = pb.value;
    // -1: last moved end was a, +1: b
    let mut side = 0i8;
    let mut use_secant = true;

    for _ in 0..MAX_REFINE_ITERATIONS {
        let width = Float::with_val(bits, &b - &a);
        let half = Float::with_val(bits, &width / 2u32);
        if half < tol {
            let mid = Float::with_val(bits, &a + &half);
            return Ok(RootRecord {
                s,
                kind,
                index: 0,
                sqrt_lambda: mid,
                certified_err: half.to_f64(),
            });
        }
        let mid = Float::with_val(bits, &a + &half);
        let x = if use_secant {
            let slope_den = Float::with_val(bits, &fb - &fa);
            let x = Float::with_val(bits, &fa * &width) / slope_den;
            let x = Float::with_val(bits, &a - &x);
            if x > a && x < b && x.is_finite() {
                x
            } else {
                mid
            }
        } else {
            mid
        };

        let px = probe(s, kind, &x, &rctx)?;
        match px.sign {
            Some(sign) if sign == sa => {
                a = x;
                fa = px.value;
                if side == -1 {
                    fb /= 2u32;
                }
                side = -1;
            }
            Some(_) => {
                b = x;
                fb = px.value;
                if side == 1 {
                    fa /= 2u32;
                }
                side = 1;
            }
            None => {
                // root within noise of x: straddle it
                let step = Float::with_val(bits, &tol / 2u32);
                let left = Float::with_val(bits, &x - &step).max(&a);
                let right = Float::with_val(bits, &x + &step).min(&b);
                for end in [left, right] {
                    if end == a || end == b {
                        continue;
                    }
                    let pe = probe(s, kind, &end, &rctx)?;
                    match pe.sign {
                        Some(sign) if sign == sa && end > a => {
                            a = end;
                            fa = pe.value;
                        }
                        Some(sign) if sign != sa && end < b => {
                            b = end;
                            fb = pe.value;
                        }
                        _ => {}
                    }
                }
                side = 0;
            }
        }
        let new_width = Float::with_val(bits, &b - &a);
        use_secant = new_width <= Float::with_val(bits, &width / 2u32);
    }
    Err(ScattError::PrecisionExhausted {
        working_digits: rctx.working_digits(),
        escalations: rctx.escalations(),
        detail: format!("root refinement in [{lo}, {hi}] did not converge"),
    })
}

/// First `count` roots of each selected kind, ordered by √λ.
pub fn zeros_poles_table(
    s: u32,
    kinds: KindSelection,
    count: usize,
    digits: u32,
    ctx: &PrecisionContext,
) -> Result<Vec<RootRecord>> {
    if count == 0 {
        return Err(ScattError::InvalidArgument("count must be at least 1".into()));
    }
    let cap = (10.0 * count as f64 + 20.0).min(MAX_SQRT_LAMBDA);
    table_up_to(s, kinds, count, digits, cap, ctx)
}

fn table_up_to(
    s: u32,
    kinds: KindSelection,
    count: usize,
    digits: u32,
    cap: f64,
    ctx: &PrecisionContext,
) -> Result<Vec<RootRecord>> {
    let wanted = kinds.kinds();
    let mut brackets: Vec<Vec<(f64, f64)>> = vec![Vec::new(); wanted.len()];
    let mut lo = 0.0;
    while brackets.iter().any(|b| b.len() < count) && lo < cap {
        let hi = (lo + SCAN_CHUNK).min(cap);
        let points = grid(lo, hi, MAX_GRID_STEP);
        let signs = grid_signs(s, &points, ctx)?;
        for (kind, found) in wanted.iter().zip(brackets.iter_mut()) {
            let idx = kind.basis().index() as usize - 1;
            let column: Vec<_> = signs.iter().map(|p| p[idx]).collect();
            found.extend(sign_changes(&points, &column));
        }
        lo = hi;
    }

    let jobs: Vec<(RootKind, usize, (f64, f64))> = wanted
        .iter()
        .zip(&brackets)
        .flat_map(|(&kind, found)| {
            found
                .iter()
                .take(count)
                .enumerate()
                .map(move |(i, &br)| (kind, i, br))
        })
        .collect();
    let mut records: Vec<RootRecord> = jobs
        .par_iter()
        .map(|&(kind, index, br)| {
            let mut rec = refine_root(s, kind, br, digits, ctx)?;
            rec.index = index;
            Ok(rec)
        })
        .collect::<Result<_>>()?;
    records.sort_by(|x, y| x.sqrt_lambda.partial_cmp(&y.sqrt_lambda).unwrap_or(Ordering::Equal));

    if brackets.iter().any(|b| b.len() < count) {
        return Err(ScattError::RangeExhausted {
            reached: lo,
            wanted: count * wanted.len(),
            partial: records,
        });
    }
    Ok(records)
}

#[derive(Debug, Clone)]
pub struct QuasiLinearFit {
    pub s: u32,
    pub kind: RootKind,
    pub slope_a: f64,
    /// `sqrt_lambda[n] - slope_a * n`.
    pub intercepts_b: Vec<f64>,
    /// Largest distance of a root from the least-squares line.
    pub residual: f64,
}

/// Least-squares line through `(n, sqrt_lambda_n)`.
pub fn fit_quasilinear(records: &[RootRecord]) -> Result<QuasiLinearFit> {
    if records.len() < 3 {
        return Err(ScattError::InvalidArgument(format!(
            "fit needs at least 3 roots, got {}",
            records.len()
        )));
    }
    let first = &records[0];
    if records.iter().any(|r| r.kind != first.kind || r.s != first.s) {
        return Err(ScattError::InvalidArgument(
            "fit input mixes kinds or exponents".into(),
        ));
    }
    let n: Vec<f64> = records.iter().map(|r| r.index as f64).collect();
    let y: Vec<f64> = records.iter().map(|r| r.sqrt_lambda_f64()).collect();
    let len = n.len() as f64;
    let n_mean = n.iter().sum::<f64>() / len;
    let y_mean = y.iter().sum::<f64>() / len;
    let sxx: f64 = n.iter().map(|v| (v - n_mean).powi(2)).sum();
    if sxx == 0.0 {
        return Err(ScattError::InvalidArgument(
            "fit needs at least two distinct indices".into(),
        ));
    }
    let sxy: f64 = n.iter().zip(&y).map(|(v, w)| (v - n_mean) * (w - y_mean)).sum();
    let slope = sxy / sxx;
    let intercepts: Vec<f64> = n.iter().zip(&y).map(|(v, w)| w - slope * v).collect();
    let line_b = y_mean - slope * n_mean;
    let residual = intercepts
        .iter()
        .map(|b| (b - line_b).abs())
        .fold(0.0, f64::max);
    Ok(QuasiLinearFit {
        s: first.s,
        kind: first.kind,
        slope_a: slope,
        intercepts_b: intercepts,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> PrecisionContext {
        PrecisionContext::new(12).unwrap()
    }

    #[test]
    fn brackets_for_first_roots() {
        let c = ctx();
        let z = bracket_roots(6, RootKind::Zero, (0.0, 5.0), 0.25, &c).unwrap();
        assert_eq!(z.len(), 1);
        assert!(z[0].0 < 2.944907 && 2.944907 < z[0].1);
        let p = bracket_roots(4, RootKind::Pole, (0.0, 3.0), 0.25, &c).unwrap();
        assert_eq!(p.len(), 1);
        assert!(p[0].0 < 2.650141 && 2.650141 < p[0].1);
        assert!(bracket_roots(7, RootKind::Zero, (0.0, 1.0), 0.25, &c).unwrap().is_empty());
    }

    #[test]
    fn bracket_preconditions() {
        let c = ctx();
        assert!(bracket_roots(6, RootKind::Zero, (0.0, 101.0), 0.25, &c).is_err());
        assert!(bracket_roots(6, RootKind::Zero, (0.0, 5.0), 0.3, &c).is_err());
        assert!(bracket_roots(6, RootKind::Zero, (5.0, 2.0), 0.1, &c).is_err());
    }

    #[test]
    fn grid_includes_upper_end() {
        assert_eq!(grid(0.0, 1.0, 0.25), vec![0.25, 0.5, 0.75, 1.0]);
        assert_eq!(grid(1.0, 1.6, 0.25), vec![1.0, 1.25, 1.5, 1.6]);
    }

    #[test]
    fn sign_changes_skip_undetermined() {
        use Ordering::*;
        let pts = [1.0, 2.0, 3.0, 4.0, 5.0];
        let signs = [Some(Less), None, Some(Greater), Some(Greater), Some(Less)];
        assert_eq!(sign_changes(&pts, &signs), vec![(1.0, 3.0), (4.0, 5.0)]);
    }

    #[test]
    fn refine_examples() {
        let c = ctx();
        let r = refine_root(7, RootKind::Zero, (3.75, 4.25), 9, &c).unwrap();
        assert!(r.certified_err < 1e-9);
        assert!((r.sqrt_lambda_f64() - 4.0).abs() < 1e-9);

        let r = refine_root(6, RootKind::Pole, (4.5, 4.75), 6, &c).unwrap();
        // printed values are rounded to 6 decimals
        assert!((r.sqrt_lambda_f64() - 4.728696).abs() < r.certified_err + 5e-7);
        assert!(r.certified_err < 1e-6);

        let r = refine_root(4, RootKind::Zero, (31.0, 31.25), 6, &c).unwrap();
        assert!((r.sqrt_lambda_f64() - 31.225862).abs() < r.certified_err + 5e-7);
        let fine = refine_root(4, RootKind::Zero, (31.0, 31.25), 10, &c).unwrap();
        assert!((fine.sqrt_lambda_f64() - r.sqrt_lambda_f64()).abs() <= r.certified_err);
    }

    #[test]
    fn refine_rejects_bracket_without_change() {
        let c = ctx();
        assert!(refine_root(6, RootKind::Zero, (1.0, 2.0), 6, &c).is_err());
    }

    #[test]
    fn s7_table_is_exact() {
        let c = ctx();
        let zeros = zeros_poles_table(7, KindSelection::Zeros, 3, 9, &c).unwrap();
        for (n, r) in zeros.iter().enumerate() {
            assert_eq!(r.index, n);
            assert!((r.sqrt_lambda_f64() - (4.0 + 10.0 * n as f64)).abs() < 1e-9);
        }
    }

    #[test]
    fn both_kinds_merge_in_order() {
        let c = ctx();
        let t = zeros_poles_table(6, KindSelection::Both, 2, 6, &c).unwrap();
        let kinds: Vec<_> = t.iter().map(|r| r.kind).collect();
        assert_eq!(kinds, [RootKind::Zero, RootKind::Pole, RootKind::Zero, RootKind::Pole]);
        assert!((t[0].sqrt_lambda_f64() - 2.944907).abs() < t[0].certified_err + 5e-7);
        assert!((t[1].sqrt_lambda_f64() - 4.728696).abs() < t[1].certified_err + 5e-7);
    }

    #[test]
    fn range_exhaustion_keeps_partial_results() {
        let c = ctx();
        assert!(zeros_poles_table(7, KindSelection::Zeros, 0, 6, &c).is_err());
        match table_up_to(7, KindSelection::Poles, 2, 6, 10.0, &c) {
            Err(ScattError::RangeExhausted { reached, wanted, partial }) => {
                assert_eq!(reached, 10.0);
                assert_eq!(wanted, 2);
                assert_eq!(partial.len(), 1);
                assert!((partial[0].sqrt_lambda_f64() - 6.0).abs() < 1e-6);
            }
            other => panic!("{other:?}"),
        }
    }

    fn synthetic(kind: RootKind, values: &[f64]) -> Vec<RootRecord> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| RootRecord {
                s: 7,
                kind,
                index: i,
                sqrt_lambda: Float::with_val(64, v),
                certified_err: 0.0,
            })
            .collect()
    }

    #[test]
    fn fit_exact_line() {
        let recs = synthetic(RootKind::Pole, &[6.0, 16.0, 26.0, 36.0]);
        let fit = fit_quasilinear(&recs).unwrap();
        assert!((fit.slope_a - 10.0).abs() < 1e-12);
        assert!(fit.intercepts_b.iter().all(|b| (b - 6.0).abs() < 1e-12));
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn fit_intercepts_identity() {
        let vals = [1.1, 4.3, 7.2, 10.9, 13.8];
        let fit = fit_quasilinear(&synthetic(RootKind::Zero, &vals)).unwrap();
        for (n, (b, v)) in fit.intercepts_b.iter().zip(vals).enumerate() {
            assert_eq!(*b, v - fit.slope_a * n as f64);
        }
        assert!(fit.residual > 0.0);
    }

    #[test]
    fn fit_rejects_bad_input() {
        let mut recs = synthetic(RootKind::Zero, &[4.0, 14.0, 24.0]);
        assert!(fit_quasilinear(&recs[..2]).is_err());
        recs[1].kind = RootKind::Pole;
        assert!(fit_quasilinear(&recs).is_err());
    }
}
