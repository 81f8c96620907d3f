//! Self-checks run by `scatt validate`.

use std::fmt;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rug::Float;

use crate::cli::{scan_rows, ScanValue};
use crate::connection::{default_n, scattering_length, wronskian_at_n, wronskian_pair};
use crate::error::Result;
use crate::mpkernel::PrecisionContext;
use crate::oracle::oracle_scattering;
use crate::roots::{fit_quasilinear, zeros_poles_table, KindSelection, RootKind, RootRecord};
use crate::series::{eval_w, Basis, PotentialSpec};

/// Published √λ of the first ten zeros and poles, six decimals (s = 7 exact).
pub mod reference {
    pub const ZEROS_S4: [f64; 10] = [
        1.135708, 4.281230, 7.627058, 10.991652, 14.361060, 17.732554, 21.105133, 24.478348,
        27.851968, 31.225862,
    ];
    pub const ZEROS_S6: [f64; 10] = [
        2.944907, 10.307414, 17.758560, 25.220363, 32.685259, 40.151469, 47.618360, 55.085650,
        62.553194, 70.020910,
    ];
    pub const POLES_S4: [f64; 10] = [
        2.650141, 5.949138, 9.308435, 12.675992, 16.046629, 19.418744, 22.791679, 26.165118,
        29.538887, 32.912885,
    ];
    pub const POLES_S6: [f64; 10] = [
        4.728696, 12.165518, 19.622908, 27.086171, 34.551611, 42.018080, 49.485114, 56.952491,
        64.420092, 71.887847,
    ];

    pub fn s7(kind: super::RootKind, n: usize) -> f64 {
        let offset = match kind {
            super::RootKind::Zero => 4.0,
            super::RootKind::Pole => 6.0,
        };
        offset + 10.0 * n as f64
    }

    /// Cross-method grid, each point at least 0.5 from any zero or pole.
    pub const CROSS_GRID: [(u32, f64); 12] = [
        (4, 3.5),
        (4, 13.5),
        (4, 28.7),
        (5, 5.5),
        (5, 16.0),
        (5, 37.0),
        (6, 7.5),
        (6, 22.5),
        (6, 45.0),
        (7, 9.0),
        (7, 30.0),
        (7, 50.0),
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Quick,
    Full,
}

#[derive(Debug, Clone)]
pub struct CriterionReport {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {} ({}): {} [{:.1}s] {}",
            self.id,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}

pub const CRITERIA: [(u8, &str); 7] = [
    (1, "table reproduction"),
    (2, "s=7 exactness"),
    (3, "n-independence"),
    (4, "cross-method agreement"),
    (5, "Wronskian normalization"),
    (6, "quasi-linear fit"),
    (7, "scan sanity"),
];

pub const SEED: u64 = 0x5ca7_7e12;

fn report(id: u8, start: Instant, outcome: Result<(bool, String)>) -> CriterionReport {
    let name = CRITERIA[id as usize - 1].1;
    let (passed, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    CriterionReport {
        id,
        name,
        passed,
        detail,
        elapsed: start.elapsed(),
    }
}

pub fn run_criterion(id: u8, level: Level) -> CriterionReport {
    let start = Instant::now();
    let outcome = match id {
        1 => table_reproduction(level),
        2 => s7_exactness(level),
        3 => n_independence(level),
        4 => cross_method(level),
        5 => normalization(level),
        6 => quasilinear_fit(level),
        7 => scan_sanity(),
        _ => Ok((false, format!("no criterion {id}"))),
    };
    report(id, start, outcome)
}

pub fn run_all(level: Level) -> Vec<CriterionReport> {
    CRITERIA.iter().map(|&(id, _)| run_criterion(id, level)).collect()
}

fn table_ctx() -> Result<PrecisionContext> {
    PrecisionContext::from_env(12)
}

fn column(records: &[RootRecord], kind: RootKind) -> Vec<f64> {
    records
        .iter()
        .filter(|r| r.kind == kind)
        .map(RootRecord::sqrt_lambda_f64)
        .collect()
}

/// Largest distance of computed roots from the reference values, or a count
/// mismatch.
fn compare(records: &[RootRecord], kind: RootKind, expected: &[f64]) -> (bool, f64) {
    let got = column(records, kind);
    if got.len() != expected.len() {
        return (false, f64::INFINITY);
    }
    let worst = got
        .iter()
        .zip(expected)
        .map(|(g, e)| (g - e).abs())
        .fold(0.0, f64::max);
    (true, worst)
}

fn table_reproduction(level: Level) -> Result<(bool, String)> {
    let ctx = table_ctx()?;
    let count = match level {
        Level::Quick => 3,
        Level::Full => 10,
    };
    let mut ok = true;
    let mut worst = 0.0f64;
    let mut entries = 0;
    let mut offenders = Vec::new();
    let mut columns = vec![
        (4, reference::ZEROS_S4, reference::POLES_S4),
        (6, reference::ZEROS_S6, reference::POLES_S6),
    ];
    if level == Level::Full {
        let z7: Vec<f64> = (0..10).map(|n| reference::s7(RootKind::Zero, n)).collect();
        let p7: Vec<f64> = (0..10).map(|n| reference::s7(RootKind::Pole, n)).collect();
        columns.push((7, z7.try_into().unwrap(), p7.try_into().unwrap()));
    }
    for (s, zeros, poles) in columns {
        // 8 digits keeps the bracket well inside the 6-decimal rounding
        let recs = zeros_poles_table(s, KindSelection::Both, count, 8, &ctx)?;
        for (kind, expected) in [(RootKind::Zero, &zeros[..count]), (RootKind::Pole, &poles[..count])] {
            let (same_len, dev) = compare(&recs, kind, expected);
            ok &= same_len && dev < 1e-6;
            worst = worst.max(dev);
            entries += expected.len();
            for (n, (g, p)) in column(&recs, kind).iter().zip(expected).enumerate() {
                if (g - p).abs() >= 1e-6 {
                    offenders.push(format!("s={s} {kind} #{n}: {g:.8} vs {p:.6}"));
                }
            }
        }
    }
    let mut detail = format!("{entries} entries, max deviation {worst:.2e} (tolerance 1e-6)");
    if !offenders.is_empty() {
        detail.push_str(&format!("; outside tolerance: {}", offenders.join(", ")));
    }
    Ok((ok, detail))
}

fn s7_exactness(level: Level) -> Result<(bool, String)> {
    let ctx = table_ctx()?;
    let count = match level {
        Level::Quick => 3,
        Level::Full => 10,
    };
    let recs = zeros_poles_table(7, KindSelection::Both, count, 11, &ctx)?;
    let mut ok = recs.len() == 2 * count;
    let mut worst = 0.0f64;
    for r in &recs {
        let dev = (r.sqrt_lambda_f64() - reference::s7(r.kind, r.index)).abs();
        worst = worst.max(dev);
        ok &= dev < 1e-9;
    }
    Ok((ok, format!("{} roots, max deviation {worst:.2e} (tolerance 1e-9)", recs.len())))
}

/// Random `(s, sqrt_lambda)` with s in 4..=7 and sqrt_lambda in (0.5, 50).
pub fn random_specs(count: usize, seed: u64) -> Vec<(u32, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (rng.gen_range(4..=7), rng.gen_range(0.5..50.0)))
        .collect()
}

/// Relative disagreement of `W_j(n)` and `W_j(n+1)` at the precision the
/// accepted pair was computed with.
pub fn n_disagreement(spec: &PotentialSpec, ctx: &PrecisionContext) -> Result<f64> {
    let pair = wronskian_pair(spec, ctx)?;
    let wctx = ctx.with_working_digits(pair.w1.working_digits)?;
    let n = default_n(spec);
    let mut worst = 0.0f64;
    for j in Basis::BOTH {
        let a = wronskian_at_n(spec, j, n, &wctx)?;
        let b = wronskian_at_n(spec, j, n + 1, &wctx)?;
        let rel = crate::mpkernel::rel_diff(&b.value, &a.value).to_f64();
        worst = worst.max(rel);
    }
    Ok(worst)
}

fn n_independence(level: Level) -> Result<(bool, String)> {
    let count = match level {
        Level::Quick => 5,
        Level::Full => 20,
    };
    let ctx = PrecisionContext::from_env(15)?;
    let points = random_specs(count, SEED);
    let worst = points
        .par_iter()
        .map(|&(s, x)| n_disagreement(&PotentialSpec::from_sqrt_lambda(s, x)?, &ctx))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok((worst < 1e-15, format!("{count} points, max relative mismatch {worst:.2e} (tolerance 1e-15)")))
}

fn cross_method(level: Level) -> Result<(bool, String)> {
    let ctx = PrecisionContext::from_env(15)?;
    let grid: Vec<(u32, f64)> = match level {
        Level::Quick => reference::CROSS_GRID.iter().step_by(3).copied().collect(),
        Level::Full => reference::CROSS_GRID.to_vec(),
    };
    let worst = grid
        .par_iter()
        .map(|&(s, x)| {
            let spec = PotentialSpec::from_sqrt_lambda(s, x)?;
            let conn = scattering_length(&spec, &ctx)?.a_over_r0;
            let orc = oracle_scattering(&spec, &ctx)?.a_over_r0;
            Ok(crate::mpkernel::rel_diff(&orc, &conn).to_f64())
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok((worst < 1e-8, format!("{} points, max relative difference {worst:.2e} (tolerance 1e-8)", grid.len())))
}

/// `max |w_1 w_2' - w_2 w_1' + 1|` over `zs`.
pub fn normalization_defect(spec: &PotentialSpec, zs: &[f64], ctx: &PrecisionContext) -> Result<f64> {
    let bits = ctx.bits();
    let mut worst = 0.0f64;
    for &z in zs {
        let z = ctx.real(z);
        let (w1, dw1) = eval_w(spec, Basis::W1, &z, ctx)?;
        let (w2, dw2) = eval_w(spec, Basis::W2, &z, ctx)?;
        let wr = Float::with_val(bits, &w1 * &dw2) - Float::with_val(bits, &w2 * &dw1);
        worst = worst.max((wr + 1u32).abs().to_f64());
    }
    Ok(worst)
}

fn normalization(level: Level) -> Result<(bool, String)> {
    let count = match level {
        Level::Quick => 4,
        Level::Full => 10,
    };
    let ctx = PrecisionContext::from_env(15)?;
    let mut worst = 0.0f64;
    for (s, x) in random_specs(count, SEED ^ 0x9e37) {
        let spec = PotentialSpec::from_sqrt_lambda(s, x)?;
        worst = worst.max(normalization_defect(&spec, &[1.2, 2.0, 4.0], &ctx)?);
    }
    Ok((worst < 1e-15, format!("{count} specs, max defect {worst:.2e} (tolerance 1e-15)")))
}

fn quasilinear_fit(level: Level) -> Result<(bool, String)> {
    let ctx = table_ctx()?;
    let count = match level {
        Level::Quick => 4,
        Level::Full => 10,
    };
    let recs = zeros_poles_table(7, KindSelection::Both, count, 11, &ctx)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for (kind, intercept) in [(RootKind::Zero, 4.0), (RootKind::Pole, 6.0)] {
        let subset: Vec<RootRecord> = recs.iter().filter(|r| r.kind == kind).cloned().collect();
        let fit = fit_quasilinear(&subset)?;
        let worst_b = fit
            .intercepts_b
            .iter()
            .map(|b| (b - intercept).abs())
            .fold(0.0, f64::max);
        ok &= (fit.slope_a - 10.0).abs() < 1e-6 && worst_b < 1e-6;
        parts.push(format!("s=7 {kind}s slope {:.9} max |B-{intercept}| {worst_b:.1e}", fit.slope_a));
    }
    let zeros6 = zeros_poles_table(6, KindSelection::Zeros, 10, 8, &ctx)?;
    let y: Vec<f64> = zeros6.iter().map(RootRecord::sqrt_lambda_f64).collect();
    let d9 = y[9] - y[8];
    let d8 = y[8] - y[7];
    let dd = (d9 - d8).abs();
    ok &= dd < 1e-3;
    parts.push(format!("s=6 |D9-D8| {dd:.2e}"));
    Ok((ok, parts.join("; ")))
}

fn scan_sanity() -> Result<(bool, String)> {
    let ctx = PrecisionContext::from_env(15)?;
    let rows = scan_rows(6, 0.1, 50.0, 499, &ctx)?;
    let step = (50.0 - 0.1) / 499.0;
    let poles: Vec<f64> = rows
        .iter()
        .filter(|r| matches!(r.value, ScanValue::Pole { .. }))
        .map(|r| r.sqrt_lambda)
        .collect();
    let expected = &reference::POLES_S6[..7];
    let mut ok = rows.len() == 500 && poles.len() == expected.len();
    if ok {
        ok = poles
            .iter()
            .zip(expected)
            .all(|(p, e)| (p - e).abs() <= 0.5 * step + 1e-12);
    }
    let bound = std::f64::consts::FRAC_PI_2;
    let finite_ok = rows.iter().all(|r| match r.value {
        ScanValue::Finite(_) => r.atan_a() > -bound && r.atan_a() < bound,
        ScanValue::Pole { .. } => true,
    });
    ok &= finite_ok;
    Ok((
        ok,
        format!(
            "{} rows, {} pole tokens at {:?}, finite atan in open interval: {finite_ok}",
            rows.len(),
            poles.len(),
            poles
        ),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_specs_are_seeded_and_in_range() {
        let a = random_specs(20, 7);
        assert_eq!(a, random_specs(20, 7));
        assert_ne!(a, random_specs(20, 8));
        assert!(a.iter().all(|&(s, x)| (4..=7).contains(&s) && x > 0.5 && x < 50.0));
    }

    #[test]
    fn cross_grid_avoids_tabulated_roots() {
        for &(s, x) in &reference::CROSS_GRID {
            let near: Vec<f64> = match s {
                4 => reference::ZEROS_S4.iter().chain(&reference::POLES_S4).copied().collect(),
                6 => reference::ZEROS_S6.iter().chain(&reference::POLES_S6).copied().collect(),
                7 => (0..10)
                    .flat_map(|n| [reference::s7(RootKind::Zero, n), reference::s7(RootKind::Pole, n)])
                    .collect(),
                _ => continue,
            };
            assert!(near.iter().all(|r| (r - x).abs() >= 0.5), "s={s} x={x}");
        }
    }

    #[test]
    fn compare_detects_count_mismatch() {
        assert_eq!(compare(&[], RootKind::Zero, &[1.0]), (false, f64::INFINITY));
    }

    #[test]
    fn quick_normalization_passes() {
        let r = run_criterion(5, Level::Quick);
        assert!(r.passed, "{r}");
    }
}
