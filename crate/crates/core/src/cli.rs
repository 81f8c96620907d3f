//! Command-line front end: `scatt compute | scan | roots | fit | validate`.
//!
//! Exit codes: 0 success, 1 failure (validation or computation), 2 at-pole,
//! 64 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use rug::Float;
use serde_json::{json, Value};

use crate::connection::{scattering_length, wronskian_pair};
use crate::error::{Result, ScattError};
use crate::mpkernel::{rel_diff, PrecisionContext, Real};
use crate::oracle::oracle_scattering;
use crate::roots::{fit_quasilinear, zeros_poles_table, KindSelection, QuasiLinearFit, RootKind, RootRecord};
use crate::series::{PotentialSpec, SPEC_BITS};
use crate::validation::{self, Level};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_POLE: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

/// Literal written for `atan_a` on pole rows.
pub const HALF_PI_TOKEN: &str = "1.5707963";

#[derive(Debug, Parser)]
#[command(name = "scatt", version, about = "Scattering lengths of (12, s) Lennard-Jones potentials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scattering length at one intensity (JSON).
    Compute(ComputeArgs),
    /// a/r0 and arctan(a/r0) on a uniform √λ grid (CSV).
    Scan(ScanArgs),
    /// First zeros and/or poles in √λ (JSON or CSV).
    Roots(RootsArgs),
    /// Least-squares lines through the zeros and poles (JSON).
    Fit(FitArgs),
    /// Run the built-in acceptance checks.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Connection,
    Oracle,
    Both,
}

impl Method {
    fn as_str(self) -> &'static str {
        match self {
            Method::Connection => "connection",
            Method::Oracle => "oracle",
            Method::Both => "both",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Zeros,
    Poles,
    Both,
}

impl From<KindArg> for KindSelection {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Zeros => KindSelection::Zeros,
            KindArg::Poles => KindSelection::Poles,
            KindArg::Both => KindSelection::Both,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LevelArg {
    Quick,
    Full,
}

#[derive(Debug, Args)]
struct ComputeArgs {
    /// Attractive exponent (4 to 7).
    #[arg(long)]
    s: u32,
    /// Square root of the intensity, as a decimal string.
    #[arg(long = "sqrt-lambda", conflicts_with = "lambda", required_unless_present = "lambda")]
    sqrt_lambda: Option<String>,
    /// Intensity; alias for --sqrt-lambda with its square root.
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long, default_value_t = 15, value_parser = clap::value_parser!(u32).range(1..=300))]
    digits: u32,
    #[arg(long, value_enum, default_value_t = Method::Connection)]
    method: Method,
    /// Length unit r0; `a` is reported as a_over_r0 * r0.
    #[arg(long, default_value_t = 1.0)]
    r0: f64,
}

#[derive(Debug, Args)]
struct ScanArgs {
    #[arg(long)]
    s: u32,
    #[arg(long = "sqrt-lambda-min")]
    sqrt_lambda_min: f64,
    #[arg(long = "sqrt-lambda-max")]
    sqrt_lambda_max: f64,
    /// Number of intervals; the grid has steps + 1 rows.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    steps: u32,
    #[arg(long, default_value_t = 15, value_parser = clap::value_parser!(u32).range(1..=300))]
    digits: u32,
}

#[derive(Debug, Args)]
struct RootsArgs {
    #[arg(long)]
    s: u32,
    #[arg(long, value_enum, default_value_t = KindArg::Both)]
    kind: KindArg,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
    count: u32,
    #[arg(long, default_value_t = 6, value_parser = clap::value_parser!(u32).range(1..=100))]
    digits: u32,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long)]
    s: u32,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(3..))]
    count: u32,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..=100))]
    digits: u32,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long, value_enum, default_value_t = LevelArg::Quick)]
    level: LevelArg,
}

/// One row of a scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub sqrt_lambda: f64,
    pub value: ScanValue,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScanValue {
    Finite(f64),
    /// Row nearest a pole; `sign` is the sign of the branch it sits on.
    Pole { sign: f64 },
}

impl ScanRow {
    pub fn atan_a(&self) -> f64 {
        match self.value {
            ScanValue::Finite(a) => a.atan(),
            ScanValue::Pole { sign } => sign * std::f64::consts::FRAC_PI_2,
        }
    }

    fn csv_fields(&self) -> [String; 3] {
        match self.value {
            ScanValue::Finite(a) => [self.sqrt_lambda.to_string(), a.to_string(), a.atan().to_string()],
            ScanValue::Pole { sign } => [
                self.sqrt_lambda.to_string(),
                "pole".to_string(),
                if sign < 0.0 { format!("-{HALF_PI_TOKEN}") } else { HALF_PI_TOKEN.to_string() },
            ],
        }
    }
}

/// `a/r0` on `steps + 1` uniform √λ points in `[lo, hi]`. Each sign change of
/// `W[w_2, w_reg]` marks exactly one row, the one nearest the linearly
/// interpolated pole.
pub fn scan_rows(s: u32, lo: f64, hi: f64, steps: u32, ctx: &PrecisionContext) -> Result<Vec<ScanRow>> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(ScattError::InvalidArgument(format!(
            "scan range [{lo}, {hi}] must satisfy 0 < min < max"
        )));
    }
    if steps == 0 {
        return Err(ScattError::InvalidArgument("steps must be at least 1".into()));
    }
    let xs: Vec<f64> = (0..=steps)
        .map(|i| if i == steps { hi } else { lo + (hi - lo) * i as f64 / steps as f64 })
        .collect();
    // (W2 value, W2 sign, a) per row
    let evals = xs
        .par_iter()
        .map(|&x| {
            let spec = PotentialSpec::from_sqrt_lambda(s, x)?;
            let pair = wronskian_pair(&spec, ctx)?;
            let w2 = pair.w2.value.to_f64();
            let sign = pair.w2.certain_sign();
            let a = sign.map(|_| Float::with_val(ctx.bits(), &pair.w1.value / &pair.w2.value).to_f64());
            Ok((w2, sign, a))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows: Vec<ScanRow> = xs
        .iter()
        .zip(&evals)
        .map(|(&x, &(_, _, a))| ScanRow {
            sqrt_lambda: x,
            value: a.map_or(ScanValue::Pole { sign: 1.0 }, ScanValue::Finite),
        })
        .collect();

    let mut marked = vec![false; rows.len()];
    let mut last: Option<usize> = None;
    for (i, &(_, sign, _)) in evals.iter().enumerate() {
        let Some(sign) = sign else { continue };
        if let Some(k) = last {
            if evals[k].1 != Some(sign) {
                let (wa, wb) = (evals[k].0, evals[i].0);
                let t = wa / (wa - wb);
                let pole = xs[k] + t * (xs[i] - xs[k]);
                let nearest = (k..=i)
                    .min_by(|&p, &q| (xs[p] - pole).abs().total_cmp(&(xs[q] - pole).abs()))
                    .unwrap_or(k);
                marked[nearest] = true;
            }
        }
        last = Some(i);
    }
    for (i, row) in rows.iter_mut().enumerate() {
        let undetermined = evals[i].1.is_none();
        if marked[i] || undetermined {
            let own = evals[i].2;
            let left = (0..i).rev().find_map(|p| evals[p].2);
            let sign = own.or(left).map_or(1.0, |a| if a < 0.0 { -1.0 } else { 1.0 });
            row.value = ScanValue::Pole { sign };
        }
    }
    Ok(rows)
}

/// `x` with `decimals` digits after the point.
pub fn fmt_fixed(x: &Real, decimals: u32) -> String {
    let magnitude = x.to_f64().abs();
    if x.is_zero() || !x.is_finite() {
        return format!("{:.*}", decimals as usize, x.to_f64());
    }
    let int_digits = magnitude.log10().floor() as i64 + 1;
    let sig = int_digits + decimals as i64;
    if sig < 1 {
        return format!("{:.*}", decimals as usize, x.to_f64());
    }
    let text = x.to_string_radix(10, Some(sig as usize));
    let (negative, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.as_str()),
    };
    let (mantissa, exponent) = match body.split_once('e') {
        Some((m, e)) => (m, e.parse::<i64>().unwrap_or(0)),
        None => (body, 0),
    };
    let point = mantissa.find('.').unwrap_or(mantissa.len()) as i64 + exponent;
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let digit_at = |i: i64| {
        if i >= 0 && (i as usize) < digits.len() {
            digits.as_bytes()[i as usize] as char
        } else {
            '0'
        }
    };
    let whole: String = (0..point.max(0)).map(digit_at).collect();
    let frac: String = (point..point + decimals as i64).map(digit_at).collect();
    let whole = whole.trim_start_matches('0');
    let whole = if whole.is_empty() { "0" } else { whole };
    let sign = if negative { "-" } else { "" };
    if decimals == 0 {
        format!("{sign}{whole}")
    } else {
        format!("{sign}{whole}.{frac}")
    }
}

fn parse_real(text: &str, what: &str) -> Result<Real> {
    let parsed = Float::parse(text.trim())
        .map_err(|e| ScattError::InvalidArgument(format!("{what} '{text}': {e}")))?;
    Ok(Float::with_val(SPEC_BITS, parsed))
}

fn spec_from_args(args: &ComputeArgs) -> Result<PotentialSpec> {
    let spec = match (&args.sqrt_lambda, &args.lambda) {
        (Some(x), _) => PotentialSpec::from_sqrt_lambda_real(args.s, &parse_real(x, "sqrt-lambda")?)?,
        (None, Some(l)) => PotentialSpec::from_lambda_real(args.s, parse_real(l, "lambda")?)?,
        (None, None) => return Err(ScattError::InvalidArgument("--sqrt-lambda or --lambda is required".into())),
    };
    spec.with_r0(args.r0)
}

fn exit_code(err: &ScattError) -> i32 {
    match err {
        ScattError::InvalidArgument(_) | ScattError::Domain { .. } => EXIT_USAGE,
        ScattError::AtPole { .. } => EXIT_POLE,
        _ => EXIT_FAILURE,
    }
}

fn pole_document(spec: &PotentialSpec, method: Method, detail: String) -> Value {
    json!({
        "s": spec.s(),
        "sqrt_lambda": spec.sqrt_lambda_f64(),
        "method": method.as_str(),
        "pole": true,
        "detail": detail,
    })
}

fn run_compute(args: &ComputeArgs, out: &mut dyn Write) -> Result<i32> {
    let spec = spec_from_args(args)?;
    let ctx = PrecisionContext::from_env(args.digits)?;
    let start = Instant::now();
    let digits = args.digits as usize;

    let conn = match args.method {
        Method::Connection | Method::Both => match scattering_length(&spec, &ctx) {
            Ok(r) => Some(r),
            Err(e @ ScattError::AtPole { .. }) => {
                emit_json(out, &pole_document(&spec, args.method, e.to_string()))?;
                return Ok(EXIT_POLE);
            }
            Err(e) => return Err(e),
        },
        Method::Oracle => None,
    };
    let orc = match args.method {
        Method::Oracle | Method::Both => {
            let r = oracle_scattering(&spec, &ctx)?;
            if r.primary.is_pole(&ctx) {
                emit_json(out, &pole_document(&spec, args.method, "matched solution is pure w_2".into()))?;
                return Ok(EXIT_POLE);
            }
            Some(r)
        }
        Method::Connection => None,
    };
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;

    let (value, err_est, n_used, working_digits) = match (&conn, &orc) {
        (Some(c), _) => (c.a_over_r0.clone(), c.err_est, Some(c.w1.n_used), c.w1.working_digits),
        (None, Some(o)) => (o.a_over_r0.clone(), o.err_est, None, ctx.working_digits()),
        (None, None) => unreachable!("method selects at least one computation"),
    };
    let mut doc = json!({
        "s": spec.s(),
        "sqrt_lambda": spec.sqrt_lambda_f64(),
        "a_over_r0": value.to_f64(),
        "a_over_r0_digits": value.to_string_radix(10, Some(digits)),
        "a": value.to_f64() * spec.r0(),
        "r0": spec.r0(),
        "err_est": err_est,
        "method": args.method.as_str(),
        "n_used": n_used,
        "working_digits": working_digits,
        "elapsed_ms": elapsed_ms,
    });
    if let (Some(c), Some(o)) = (&conn, &orc) {
        doc["connection_a_over_r0"] = json!(c.a_over_r0.to_f64());
        doc["oracle_a_over_r0"] = json!(o.a_over_r0.to_f64());
        doc["rel_diff"] = json!(rel_diff(&o.a_over_r0, &c.a_over_r0).to_f64());
    }
    emit_json(out, &doc)?;
    Ok(EXIT_OK)
}

fn run_scan(args: &ScanArgs, out: &mut dyn Write) -> Result<i32> {
    PotentialSpec::new(args.s, 1.0)?;
    let ctx = PrecisionContext::from_env(args.digits)?;
    let rows = scan_rows(args.s, args.sqrt_lambda_min, args.sqrt_lambda_max, args.steps, &ctx)?;
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let io = |e: csv::Error| ScattError::InvalidArgument(format!("write failed: {e}"));
    writer.write_record(["sqrt_lambda", "a_over_r0", "atan_a"]).map_err(io)?;
    for row in &rows {
        writer.write_record(row.csv_fields()).map_err(io)?;
    }
    writer.flush().map_err(|e| ScattError::InvalidArgument(format!("write failed: {e}")))?;
    Ok(EXIT_OK)
}

fn root_json(r: &RootRecord, digits: u32) -> Value {
    json!({
        "kind": r.kind.as_str(),
        "index": r.index,
        "sqrt_lambda": r.sqrt_lambda_f64(),
        "sqrt_lambda_digits": fmt_fixed(&r.sqrt_lambda, digits),
        "certified_err": r.certified_err,
    })
}

fn roots_ctx(digits: u32) -> Result<PrecisionContext> {
    PrecisionContext::from_env(digits.clamp(10, 15))
}

fn run_roots(args: &RootsArgs, out: &mut dyn Write) -> Result<i32> {
    let ctx = roots_ctx(args.digits)?;
    let records = zeros_poles_table(args.s, args.kind.into(), args.count as usize, args.digits, &ctx)?;
    match args.format {
        Format::Json => {
            let doc = json!({
                "s": args.s,
                "kind": format!("{:?}", args.kind).to_lowercase(),
                "count": args.count,
                "digits": args.digits,
                "roots": records.iter().map(|r| root_json(r, args.digits)).collect::<Vec<_>>(),
            });
            emit_json(out, &doc)?;
        }
        Format::Csv => {
            let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
            let io = |e: csv::Error| ScattError::InvalidArgument(format!("write failed: {e}"));
            writer.write_record(["kind", "index", "sqrt_lambda", "certified_err"]).map_err(io)?;
            for r in &records {
                writer
                    .write_record([
                        r.kind.as_str().to_string(),
                        r.index.to_string(),
                        fmt_fixed(&r.sqrt_lambda, args.digits),
                        format!("{:e}", r.certified_err),
                    ])
                    .map_err(io)?;
            }
            writer.flush().map_err(|e| ScattError::InvalidArgument(format!("write failed: {e}")))?;
        }
    }
    Ok(EXIT_OK)
}

fn fit_json(fit: &QuasiLinearFit, records: &[RootRecord]) -> Value {
    let y: Vec<f64> = records.iter().map(RootRecord::sqrt_lambda_f64).collect();
    let spacings: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
    json!({
        "slope_A": fit.slope_a,
        "intercepts_B": fit.intercepts_b,
        "residual": fit.residual,
        "spacings": spacings,
        "last_spacing": spacings.last(),
        "sqrt_lambda": y,
    })
}

fn run_fit(args: &FitArgs, out: &mut dyn Write) -> Result<i32> {
    let ctx = roots_ctx(args.digits)?;
    let records = zeros_poles_table(args.s, KindSelection::Both, args.count as usize, args.digits, &ctx)?;
    let mut doc = json!({ "s": args.s, "count": args.count, "digits": args.digits });
    let mut worst = 0.0f64;
    for (kind, key) in [(RootKind::Zero, "zeros"), (RootKind::Pole, "poles")] {
        let subset: Vec<RootRecord> = records.iter().filter(|r| r.kind == kind).cloned().collect();
        let fit = fit_quasilinear(&subset)?;
        worst = worst.max(fit.residual);
        doc[key] = fit_json(&fit, &subset);
    }
    doc["max_residual"] = json!(worst);
    emit_json(out, &doc)?;
    Ok(EXIT_OK)
}

fn run_validate(args: &ValidateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let level = match args.level {
        LevelArg::Quick => Level::Quick,
        LevelArg::Full => Level::Full,
    };
    let mut first_failure = None;
    for &(id, _) in &validation::CRITERIA {
        let report = validation::run_criterion(id, level);
        let _ = writeln!(out, "{report}");
        let _ = out.flush();
        if !report.passed && first_failure.is_none() {
            first_failure = Some(report);
        }
    }
    match first_failure {
        None => Ok(EXIT_OK),
        Some(r) => {
            let _ = writeln!(err, "first failing criterion: {} ({})", r.id, r.name);
            Ok(EXIT_FAILURE)
        }
    }
}

fn emit_json(out: &mut dyn Write, doc: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(doc).expect("JSON values always serialise");
    writeln!(out, "{text}").map_err(|e| ScattError::InvalidArgument(format!("write failed: {e}")))
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            if code == EXIT_OK {
                let _ = write!(out, "{rendered}");
            } else {
                let _ = write!(err, "{rendered}");
            }
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::Compute(a) => run_compute(a, out),
        Command::Scan(a) => run_scan(a, out),
        Command::Roots(a) => run_roots(a, out),
        Command::Fit(a) => run_fit(a, out),
        Command::Validate(a) => run_validate(a, out, err),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}
