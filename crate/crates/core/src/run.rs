//! Batch runner: one JSON config in, CSV rows and a JSON report out.
//!
//! A config is a flat object: `equation`, optional `equation_params`,
//! `precision`, `guard_bits` and `id`, the `experiment` name, and that
//! experiment's parameters. Unknown keys are schema errors.

use std::f64::consts::SQRT_2;
use std::time::Instant;

use num_complex::Complex64;
use rug::{Complex, Float, Integer, Rational};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::berry::{self, BerryReference};
use crate::borel::{averaged_sum, borel_jump_check, borel_transform, lateral_laplace, AverageSpec, Side};
use crate::equations::{build_catalog_equation, EquationSpec};
use crate::error::{Error, Result};
use crate::numerics::erf_f64;
use crate::numerics::precision::{abs, c64, fmt_complex, fmt_float, PrecisionContext};
use crate::stokes::{self, Direction};
use crate::truncation::{exponential_mode, truncation_error, Reference};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Coeffs,
    Truncate,
    Sum,
    Stokes,
    Jump,
    Berry,
    AlphaSweep,
    ResonantFit,
    ResonantBerry,
    Dingle,
    Antistokes,
}

impl Experiment {
    pub const ALL: [Experiment; 11] = [
        Experiment::Coeffs,
        Experiment::Truncate,
        Experiment::Sum,
        Experiment::Stokes,
        Experiment::Jump,
        Experiment::Berry,
        Experiment::AlphaSweep,
        Experiment::ResonantFit,
        Experiment::ResonantBerry,
        Experiment::Dingle,
        Experiment::Antistokes,
    ];

    pub fn name(self) -> String {
        serde_json::to_value(self).unwrap().as_str().unwrap().to_string()
    }

    pub fn parse(s: &str) -> Result<Self> {
        serde_json::from_value(Value::String(s.into())).map_err(|_| Error::Schema(format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub id: Option<String>,
    pub equation: String,
    pub equation_params: Value,
    pub precision: Option<u32>,
    pub guard_bits: Option<u32>,
    pub experiment: Experiment,
    /// Output directory for the CSV and JSON report.
    pub output: Option<String>,
    pub params: Map<String, Value>,
}

const TOP_KEYS: [&str; 7] = ["id", "equation", "equation_params", "precision", "guard_bits", "experiment", "output"];

fn schema<E: std::fmt::Display>(what: &str) -> impl Fn(E) -> Error + '_ {
    move |e| Error::Schema(format!("{what}: {e}"))
}

impl RunConfig {
    pub fn from_value(v: &Value) -> Result<Self> {
        let obj = v.as_object().ok_or_else(|| Error::Schema("config must be a JSON object".into()))?;
        let equation = obj
            .get("equation")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Schema("missing string field `equation`".into()))?
            .to_string();
        let experiment = obj
            .get("experiment")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Schema("missing string field `experiment`".into()))?;
        let experiment = Experiment::parse(experiment)?;
        let uint = |k: &str| -> Result<Option<u32>> {
            match obj.get(k) {
                None | Some(Value::Null) => Ok(None),
                Some(v) => v
                    .as_u64()
                    .and_then(|n| u32::try_from(n).ok())
                    .map(Some)
                    .ok_or_else(|| Error::Schema(format!("`{k}` must be a non-negative integer"))),
            }
        };
        let id = match obj.get("id") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => return Err(Error::Schema("`id` must be a string".into())),
        };
        let output = match obj.get("output") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => return Err(Error::Schema("`output` must be a directory path".into())),
        };
        let equation_params = obj.get("equation_params").cloned().unwrap_or(Value::Null);
        if !(equation_params.is_null() || equation_params.is_object()) {
            return Err(Error::Schema("`equation_params` must be an object".into()));
        }
        let params: Map<String, Value> = obj
            .iter()
            .filter(|(k, _)| !TOP_KEYS.contains(&k.as_str()))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        let cfg = RunConfig {
            id,
            equation,
            equation_params,
            precision: uint("precision")?,
            guard_bits: uint("guard_bits")?,
            experiment,
            output,
            params,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_value(&self) -> Value {
        let mut m = Map::new();
        if let Some(id) = &self.id {
            m.insert("id".into(), json!(id));
        }
        m.insert("equation".into(), json!(self.equation));
        if !self.equation_params.is_null() {
            m.insert("equation_params".into(), self.equation_params.clone());
        }
        if let Some(p) = self.precision {
            m.insert("precision".into(), json!(p));
        }
        if let Some(g) = self.guard_bits {
            m.insert("guard_bits".into(), json!(g));
        }
        m.insert("experiment".into(), json!(self.experiment));
        if let Some(o) = &self.output {
            m.insert("output".into(), json!(o));
        }
        for (k, v) in &self.params {
            m.insert(k.clone(), v.clone());
        }
        Value::Object(m)
    }

    /// Output file stem.
    pub fn stem(&self) -> String {
        self.id
            .clone()
            .unwrap_or_else(|| format!("{}_{}", self.equation, self.experiment.name()))
    }

    pub fn context(&self) -> Result<PrecisionContext> {
        PrecisionContext::new(self.precision.unwrap_or(256), self.guard_bits.unwrap_or(64))
    }

    /// Everything that can be checked without computing: equation,
    /// precision and the experiment's parameter schema.
    pub fn validate(&self) -> Result<()> {
        self.context()?;
        build_catalog_equation(&self.equation, &self.equation_params)?;
        let v = Value::Object(self.params.clone());
        match self.experiment {
            Experiment::Coeffs => parse::<CoeffsParams>(&v).map(drop),
            Experiment::Truncate => parse::<TruncateParams>(&v).map(drop),
            Experiment::Sum => parse::<SumParams>(&v).map(drop),
            Experiment::Stokes => parse::<StokesParams>(&v).map(drop),
            Experiment::Jump => parse::<JumpParams>(&v).map(drop),
            Experiment::Berry => parse::<BerryParams>(&v).map(drop),
            Experiment::AlphaSweep => parse::<AlphaParams>(&v).map(drop),
            Experiment::ResonantFit => parse::<ResonantFitParams>(&v).map(drop),
            Experiment::ResonantBerry => parse::<ResonantBerryParams>(&v).map(drop),
            Experiment::Dingle => parse::<DingleParams>(&v).map(drop),
            Experiment::Antistokes => parse::<AntiStokesParams>(&v).map(drop),
        }
    }
}

/// A config file holds one run or `{"runs": [...]}`.
pub fn parse_config_file(v: &Value) -> Result<Vec<Value>> {
    match v.get("runs") {
        Some(Value::Array(runs)) => {
            if v.as_object().map(|o| o.len()) != Some(1) {
                return Err(Error::Schema("a suite file holds only `runs`".into()));
            }
            Ok(runs.clone())
        }
        Some(_) => Err(Error::Schema("`runs` must be an array".into())),
        None => Ok(vec![v.clone()]),
    }
}

fn parse<T: DeserializeOwned>(v: &Value) -> Result<T> {
    serde_json::from_value(v.clone()).map_err(schema("experiment parameters"))
}

/// Either an explicit list or `{"from", "to", "count"}` (inclusive ends).
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Range { from: f64, to: f64, count: usize },
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>> {
        match self {
            Grid::List(v) if !v.is_empty() => Ok(v.clone()),
            Grid::List(_) => Err(Error::Schema("empty grid".into())),
            Grid::Range { from, to, count } => {
                if *count < 2 {
                    return Err(Error::Schema("grid count must be at least 2".into()));
                }
                Ok((0..*count)
                    .map(|i| from + (to - from) * i as f64 / (*count - 1) as f64)
                    .collect())
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoeffsParams {
    k_max: usize,
    /// "factorial": a_k = k!; "scaled_recurrence": the three-term law of
    /// b_k = a_k/(k−1)! for the resonant family.
    #[serde(default)]
    check: Option<CoeffCheck>,
    #[serde(default)]
    check_from: usize,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize, PartialEq)]
#[serde(rename_all = "snake_case")]
enum CoeffCheck {
    Factorial,
    ScaledRecurrence,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct TruncateParams {
    radii: Vec<f64>,
    angles: Vec<f64>,
    #[serde(default = "Reference::exact")]
    reference: Reference,
    #[serde(default)]
    max_ratio: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SumParams {
    points: Vec<[f64; 2]>,
    #[serde(default = "AverageSpec::balanced")]
    average: AverageSpec,
    #[serde(default = "default_k")]
    k_max: usize,
    /// Exact expected values as rationals ("1/4"), one per point.
    #[serde(default)]
    expected: Option<Vec<String>>,
    /// Relative tolerance; defaults to the context tolerance.
    #[serde(default)]
    tolerance: Option<f64>,
}

fn default_k() -> usize {
    200
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize, PartialEq)]
#[serde(rename_all = "snake_case")]
enum JumpMode {
    Laplace,
    Borel,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct JumpParams {
    mode: JumpMode,
    /// Real x values (laplace mode).
    #[serde(default)]
    x_values: Vec<f64>,
    /// Offsets past the singularity (borel mode).
    #[serde(default)]
    z_grid: Vec<f64>,
    #[serde(default = "default_k")]
    k_max: usize,
    #[serde(default)]
    tolerance: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct StokesParams {
    r_window: [usize; 2],
    #[serde(default = "default_order")]
    order: usize,
    #[serde(default = "one")]
    j: usize,
    #[serde(default)]
    tolerance: Option<f64>,
    #[serde(default = "yes")]
    relative: bool,
}

fn default_order() -> usize {
    4
}
fn one() -> usize {
    1
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize, PartialEq)]
#[serde(rename_all = "snake_case")]
enum RefKind {
    Averaged,
    Exact,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct BerryParams {
    r: f64,
    #[serde(default = "default_omega")]
    omega: Grid,
    #[serde(default = "averaged")]
    reference: RefKind,
    #[serde(default = "half")]
    alpha: f64,
    /// Summation ray of the averaged reference.
    #[serde(default)]
    ray: f64,
    /// Bounds as fractions of |S|, and on |center|.
    #[serde(default)]
    max_deviation: Option<f64>,
    #[serde(default)]
    s_tolerance: Option<f64>,
    #[serde(default)]
    center_tolerance: Option<f64>,
}

fn default_omega() -> Grid {
    Grid::Range {
        from: -3.5,
        to: 3.5,
        count: 25,
    }
}
fn averaged() -> RefKind {
    RefKind::Averaged
}
fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct AlphaParams {
    r_grid: Vec<f64>,
    alphas: Vec<f64>,
    /// Allowed slope band per α, aligned with `alphas`.
    #[serde(default)]
    bands: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ResonantFitParams {
    k_window: [usize; 2],
    #[serde(default)]
    max_relative_residual: Option<f64>,
    #[serde(default)]
    max_conjugacy: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ResonantBerryParams {
    r: f64,
    beta: Grid,
    #[serde(default = "default_half_width")]
    half_width: f64,
    /// Fit residual bound as a fraction of the fitted jump.
    #[serde(default)]
    max_relative_residual: Option<f64>,
    #[serde(default)]
    width_target: Option<f64>,
    #[serde(default)]
    width_tolerance: Option<f64>,
    /// End-to-end jump against the fitted amplitude.
    #[serde(default)]
    jump_tolerance: Option<f64>,
    /// Allowed backward step along the jump direction, fraction of |jump|.
    #[serde(default)]
    monotone_slack: Option<f64>,
}

fn default_half_width() -> f64 {
    berry::PROJECTION_HALF_WIDTH
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct DingleParams {
    radius: f64,
    /// Offsets from arg λ_j of points expected on the Stokes line …
    #[serde(default)]
    on_line: Vec<f64>,
    /// … and off it.
    #[serde(default)]
    off_line: Vec<f64>,
    #[serde(default = "default_width")]
    width: usize,
    #[serde(default = "one")]
    j: usize,
    #[serde(default)]
    on_line_max: Option<f64>,
    #[serde(default)]
    off_line_min: Option<f64>,
}

fn default_width() -> usize {
    20
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct AntiStokesParams {
    r_grid: Vec<f64>,
    #[serde(default)]
    c_reference: [f64; 2],
    #[serde(default = "both_directions")]
    directions: Vec<Direction>,
    #[serde(default)]
    tolerance: Option<f64>,
}

fn both_directions() -> Vec<Direction> {
    vec![Direction::Plus, Direction::Minus]
}

/// A measured value with its acceptance band.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, measured: f64, lower: Option<f64>, upper: Option<f64>) -> Self {
        let pass = measured.is_finite()
            && lower.is_none_or(|l| measured >= l)
            && upper.is_none_or(|u| measured <= u);
        Check {
            name: name.into(),
            measured,
            lower,
            upper,
            pass,
        }
    }

    pub fn at_most(name: impl Into<String>, measured: f64, upper: f64) -> Self {
        Check::new(name, measured, None, Some(upper))
    }

    pub fn at_least(name: impl Into<String>, measured: f64, lower: f64) -> Self {
        Check::new(name, measured, Some(lower), None)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Csv {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Csv {
    fn new(header: &[&str]) -> Self {
        Csv {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub config: RunConfig,
    pub ctx: PrecisionContext,
    pub summary: Value,
    pub csv: Csv,
    pub checks: Vec<Check>,
    pub wall_time_s: f64,
}

impl RunOutcome {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn report(&self) -> Value {
        json!({
            "schema": 1,
            "status": "ok",
            "config": self.config.to_value(),
            "precision": {"bits": self.ctx.bits, "guard_bits": self.ctx.guard_bits},
            "summary": self.summary,
            "checks": self.checks,
            "pass": self.pass(),
            "metadata": {"wall_time_s": self.wall_time_s},
        })
    }
}

/// Report for a run that stopped on a numerical error.
pub fn error_report(config: &RunConfig, err: &Error, wall_time_s: f64) -> Value {
    let ctx = config.context().unwrap_or_default();
    json!({
        "schema": 1,
        "status": "error",
        "config": config.to_value(),
        "precision": {"bits": ctx.bits, "guard_bits": ctx.guard_bits},
        "error": {"kind": error_kind(err), "message": err.to_string()},
        "pass": false,
        "metadata": {"wall_time_s": wall_time_s},
    })
}

pub fn error_kind(err: &Error) -> String {
    let dbg = format!("{err:?}");
    let end = dbg.find(|c: char| !c.is_alphanumeric()).unwrap_or(dbg.len());
    let name = &dbg[..end];
    let mut out = String::new();
    for (i, ch) in name.chars().enumerate() {
        if ch.is_uppercase() && i > 0 {
            out.push('_');
        }
        out.push(ch.to_ascii_lowercase());
    }
    out
}

struct Fmt {
    digits: usize,
}

impl Fmt {
    fn new(ctx: &PrecisionContext) -> Self {
        Fmt {
            digits: (ctx.bits as f64 * 0.302).ceil() as usize,
        }
    }

    fn float(&self, v: &Float) -> String {
        fmt_float(v, self.digits)
    }

    fn complex(&self, z: &Complex) -> [String; 2] {
        [self.float(z.real()), self.float(z.imag())]
    }

    /// Values that only carry f64 accuracy are written with 17 digits.
    fn f(&self, v: f64) -> String {
        format!("{v:.16e}")
    }

    fn c(&self, z: Complex64) -> [String; 2] {
        [self.f(z.re), self.f(z.im)]
    }
}

fn cj(z: Complex64) -> Value {
    json!([z.re, z.im])
}

pub fn execute(config: &RunConfig) -> Result<RunOutcome> {
    let start = Instant::now();
    config.validate()?;
    let ctx = config.context()?;
    let spec = build_catalog_equation(&config.equation, &config.equation_params)?;
    let v = Value::Object(config.params.clone());
    let fmt = Fmt::new(&ctx);
    let (summary, csv, checks) = match config.experiment {
        Experiment::Coeffs => run_coeffs(&spec, parse(&v)?, &ctx, &fmt)?,
        Experiment::Truncate => run_truncate(&spec, parse(&v)?, &ctx, &fmt)?,
        Experiment::Sum => run_sum(&spec, parse(&v)?, &ctx, &fmt)?,
        Experiment::Stokes => run_stokes(&spec, parse(&v)?, &ctx, &fmt)?,
        Experiment::Jump => run_jump(&spec, parse(&v)?, &ctx, &fmt)?,
        Experiment::Berry => run_berry(&spec, parse(&v)?, &ctx, &fmt)?,
        Experiment::AlphaSweep => run_alpha(&spec, parse(&v)?, &ctx, &fmt)?,
        Experiment::ResonantFit => run_resonant_fit(&spec, parse(&v)?, &ctx, &fmt)?,
        Experiment::ResonantBerry => run_resonant_berry(&spec, parse(&v)?, &ctx, &fmt)?,
        Experiment::Dingle => run_dingle(&spec, parse(&v)?, &ctx, &fmt)?,
        Experiment::Antistokes => run_antistokes(&spec, parse(&v)?, &ctx, &fmt)?,
    };
    Ok(RunOutcome {
        config: config.clone(),
        ctx,
        summary,
        csv,
        checks,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

type Parts = (Value, Csv, Vec<Check>);

fn resonant_m(spec: &EquationSpec) -> Result<f64> {
    if !spec.resonant {
        return Err(Error::InvalidParameter(format!("{} is not the resonant family", spec.name)));
    }
    let m2 = spec.m2.clone().unwrap_or_default();
    Ok(m2.to_f64().sqrt())
}

/// Table long enough to hold the least term at |x| = radius plus `extra`
/// terms: the least term sits near |λ x| for the nearest singularity λ.
fn table_size(spec: &EquationSpec, radius: f64, extra: usize) -> usize {
    let lam = spec
        .singularities
        .iter()
        .map(|s| s.location.norm())
        .fold(f64::INFINITY, f64::min);
    let lam = if lam.is_finite() { lam.max(1.0) } else { 1.0 };
    (radius * lam).ceil() as usize + 40 + extra
}

fn run_coeffs(spec: &EquationSpec, p: CoeffsParams, ctx: &PrecisionContext, fmt: &Fmt) -> Result<Parts> {
    let t = spec.generate_coefficients(p.k_max)?;
    let mut csv = Csv::new(&["k", "a_k"]);
    for (k, a) in t.values.iter().enumerate() {
        csv.push(vec![k.to_string(), fmt.float(&Float::with_val(ctx.working(), a))]);
    }
    let mut checks = Vec::new();
    let mut mismatches = 0usize;
    let mut first_bad = None;
    match p.check {
        None => {}
        Some(CoeffCheck::Factorial) => {
            let mut f = Integer::from(1);
            for k in 0..=p.k_max {
                if k > 0 {
                    f *= k as u32;
                }
                if k >= p.check_from && t.values[k] != f {
                    mismatches += 1;
                    first_bad.get_or_insert(k);
                }
            }
            checks.push(Check::at_most("factorial mismatches", mismatches as f64, 0.0));
        }
        Some(CoeffCheck::ScaledRecurrence) => {
            if !spec.resonant {
                return Err(Error::InvalidParameter("scaled_recurrence applies to the resonant family".into()));
            }
            let m2 = spec.m2.clone().unwrap_or_default();
            let b = t.scaled(); // b[i] = b_{i+1}
            for k in p.check_from.max(2)..p.k_max {
                let lhs = &b[k];
                let coef = Rational::from(2) - Rational::from(&m2 / k as u64);
                let rhs = Rational::from(&coef * &b[k - 1]) - &b[k - 2];
                if *lhs != rhs {
                    mismatches += 1;
                    first_bad.get_or_insert(k);
                }
            }
            checks.push(Check::at_most("scaled recurrence mismatches", mismatches as f64, 0.0));
        }
    }
    let summary = json!({
        "k_max": p.k_max,
        "offset": t.offset,
        "check": p.check,
        "check_from": p.check_from,
        "mismatches": mismatches,
        "first_mismatch": first_bad,
    });
    Ok((summary, csv, checks))
}

fn run_truncate(spec: &EquationSpec, p: TruncateParams, ctx: &PrecisionContext, fmt: &Fmt) -> Result<Parts> {
    let rmax = p.radii.iter().cloned().fold(0.0, f64::max);
    let t = spec.generate_coefficients(table_size(spec, rmax, 0))?;
    let mut csv = Csv::new(&["radius", "angle", "N", "remainder_re", "remainder_im", "least_term_abs", "ratio"]);
    let mut worst = 0.0f64;
    let mut rows = Vec::new();
    for &r in &p.radii {
        for &a in &p.angles {
            let z = Complex64::from_polar(r, a);
            let x = ctx.complex(z.re, z.im);
            let rep = truncation_error(spec, &t, &x, &p.reference, ctx)?;
            let ratio = rep.ratio.unwrap_or(f64::NAN);
            worst = worst.max(ratio);
            let rem = rep.remainder.clone().unwrap_or_else(|| Complex::new(ctx.working()));
            let [re, im] = fmt.complex(&rem);
            csv.push(vec![
                fmt.f(r),
                fmt.f(a),
                rep.n.to_string(),
                re,
                im,
                fmt.float(&abs(&rep.least_term)),
                fmt.f(ratio),
            ]);
            rows.push(json!({"radius": r, "angle": a, "n": rep.n, "ratio": ratio}));
        }
    }
    let mut checks = Vec::new();
    if let Some(m) = p.max_ratio {
        checks.push(Check::at_most("max remainder / least term", worst, m));
    }
    Ok((json!({"points": rows, "max_ratio": worst, "reference": p.reference}), csv, checks))
}

fn parse_rational(s: &str) -> Result<Rational> {
    s.trim()
        .parse::<Rational>()
        .map_err(|e| Error::Schema(format!("expected value `{s}`: {e}")))
}

fn run_sum(spec: &EquationSpec, p: SumParams, ctx: &PrecisionContext, fmt: &Fmt) -> Result<Parts> {
    p.average.validate()?;
    if let Some(e) = &p.expected {
        if e.len() != p.points.len() {
            return Err(Error::Schema("`expected` needs one value per point".into()));
        }
    }
    let t = spec.generate_coefficients(p.k_max)?;
    let bf = borel_transform(spec, &t, ctx)?;
    let prec = ctx.working();
    let mut csv = Csv::new(&["x_re", "x_im", "sum_re", "sum_im", "rel_error"]);
    let mut worst = 0.0f64;
    let mut rows = Vec::new();
    for (i, pt) in p.points.iter().enumerate() {
        let x = ctx.complex(pt[0], pt[1]);
        let y = averaged_sum(&bf, &x, &p.average, ctx)?;
        let err = match &p.expected {
            Some(e) => {
                let want = Complex::with_val(prec, Float::with_val(prec, &parse_rational(&e[i])?));
                let d = Float::with_val(prec, Complex::with_val(prec, &y - &want).abs_ref()) / abs(&want);
                d.to_f64()
            }
            None => f64::NAN,
        };
        worst = worst.max(err);
        let [re, im] = fmt.complex(&y);
        csv.push(vec![fmt.f(pt[0]), fmt.f(pt[1]), re, im, fmt.f(err)]);
        rows.push(json!({"x": pt, "value": fmt_complex(&y, fmt.digits), "relative_error": err}));
    }
    let mut checks = Vec::new();
    if p.expected.is_some() {
        let tol = p.tolerance.unwrap_or_else(|| ctx.tolerance().to_f64());
        checks.push(Check::at_most("max relative error vs closed form", worst, tol));
    }
    Ok((json!({"points": rows, "average": p.average}), csv, checks))
}

fn run_stokes(spec: &EquationSpec, p: StokesParams, ctx: &PrecisionContext, fmt: &Fmt) -> Result<Parts> {
    let [r0, r1] = p.r_window;
    let t = spec.generate_coefficients(r1 + 2)?;
    let est = stokes::extract_stokes(&t, spec, p.j, (r0, r1), p.order, ctx)?;
    let mut csv = Csv::new(&["r", "s_est_re", "s_est_im"]);
    for (i, v) in est.raw_sequence.iter().enumerate() {
        let [re, im] = fmt.complex(v);
        csv.push(vec![(r0 + i).to_string(), re, im]);
    }
    let mut checks = Vec::new();
    let oracle = spec.stokes_oracle(ctx).ok();
    let mut deviation = None;
    if let Some(o) = &oracle {
        let prec = ctx.working();
        let mut d = Float::with_val(prec, Complex::with_val(prec, &est.value - o).abs_ref());
        if p.relative {
            d /= abs(o);
        }
        deviation = Some(d.to_f64());
        if let Some(tol) = p.tolerance {
            let label = if p.relative { "relative" } else { "absolute" };
            checks.push(Check::at_most(format!("{label} deviation from oracle S"), d.to_f64(), tol));
        }
    }
    let summary = json!({
        "j": est.j,
        "r_window": [r0, r1],
        "richardson_order": est.richardson_order,
        "value": fmt_complex(&est.value, fmt.digits),
        "value_f64": cj(c64(&est.value)),
        "error_estimate": est.error_estimate.to_f64(),
        "oracle": oracle.as_ref().map(|o| cj(c64(o))),
        "deviation": deviation,
    });
    Ok((summary, csv, checks))
}

fn run_jump(spec: &EquationSpec, p: JumpParams, ctx: &PrecisionContext, fmt: &Fmt) -> Result<Parts> {
    let t = spec.generate_coefficients(p.k_max)?;
    let bf = borel_transform(spec, &t, ctx)?;
    let s = spec.stokes_oracle(ctx)?;
    let prec = ctx.working();
    let mut checks = Vec::new();
    match p.mode {
        JumpMode::Laplace => {
            if p.x_values.is_empty() {
                return Err(Error::Schema("laplace jump needs `x_values`".into()));
            }
            let mut csv = Csv::new(&["x", "jump_re", "jump_im", "ratio"]);
            let mut worst = 0.0f64;
            let mut rows = Vec::new();
            for &xv in &p.x_values {
                let x = ctx.complex(xv, 0.0);
                let up = lateral_laplace(&bf, &x, Side::Above, ctx)?;
                let down = lateral_laplace(&bf, &x, Side::Below, ctx)?;
                let jump = Complex::with_val(prec, &up - &down);
                let mode = exponential_mode(spec, &x, ctx)?;
                let ratio = (abs(&jump) / (abs(&s) * abs(&mode))).to_f64();
                worst = worst.max((ratio - 1.0).abs());
                let [re, im] = fmt.complex(&jump);
                csv.push(vec![fmt.f(xv), re, im, fmt.f(ratio)]);
                rows.push(json!({"x": xv, "ratio": ratio}));
            }
            if let Some(tol) = p.tolerance {
                checks.push(Check::at_most("max |ratio − 1|", worst, tol));
            }
            Ok((json!({"mode": p.mode, "points": rows, "stokes": cj(c64(&s))}), csv, checks))
        }
        JumpMode::Borel => {
            let rep = borel_jump_check(&bf, spec, &s, &p.z_grid, ctx)?;
            let mut csv = Csv::new(&["z", "measured_re", "measured_im", "model_re", "model_im"]);
            for q in &rep.points {
                let [a, b] = fmt.c(q.measured);
                let [c, d] = fmt.c(q.model);
                csv.push(vec![fmt.f(q.z), a, b, c, d]);
            }
            if let Some(tol) = p.tolerance {
                checks.push(Check::at_most("relative deviation from resurgence model", rep.relative_deviation, tol));
            }
            Ok((json!({"mode": p.mode, "report": rep}), csv, checks))
        }
    }
}

fn run_berry(spec: &EquationSpec, p: BerryParams, ctx: &PrecisionContext, fmt: &Fmt) -> Result<Parts> {
    let grid = p.omega.values()?;
    let reference = match p.reference {
        RefKind::Averaged => BerryReference::Averaged(AverageSpec {
            alpha: p.alpha,
            depth: 1,
            ray: Some(p.ray),
        }),
        RefKind::Exact => BerryReference::Exact,
    };
    let scan = berry::berry_scan(spec, p.r, &grid, reference, ctx)?;
    let s = spec.stokes_oracle(ctx).ok().map(|s| c64(&s));
    let mut csv = Csv::new(&["omega", "c_re", "c_im", "model_re", "model_im"]);
    let mut worst = 0.0f64;
    for (w, c) in grid.iter().zip(&scan.measured_c) {
        let model = s.map(|s| s * 0.5 * erf_f64(w / SQRT_2));
        if let Some(m) = model {
            worst = worst.max((c - m).norm());
        }
        let [a, b] = fmt.c(*c);
        let [mr, mi] = model.map(|m| fmt.c(m)).unwrap_or_else(|| ["".into(), "".into()]);
        csv.push(vec![fmt.f(*w), a, b, mr, mi]);
    }
    let mut checks = Vec::new();
    if let Some(s) = s {
        if let Some(t) = p.max_deviation {
            checks.push(Check::at_most("max |C − (S/2)erf(Ω/√2)| / |S|", worst / s.norm(), t));
        }
        if let Some(t) = p.s_tolerance {
            checks.push(Check::at_most("|S_fit − S| / |S|", (scan.fit.jump - s).norm() / s.norm(), t));
        }
    }
    if let Some(t) = p.center_tolerance {
        checks.push(Check::at_most("|center|", scan.fit.center.abs(), t));
    }
    let summary = json!({
        "r": p.r,
        "reference": p.reference,
        "alpha": p.alpha,
        "stokes": s.map(cj),
        "fit": {"s_fit": cj(scan.fit.jump), "center": scan.fit.center, "width": scan.fit.width,
                "offset": cj(scan.fit.offset), "residual_rms": scan.fit.residual_rms},
        "max_model_deviation": worst,
    });
    Ok((summary, csv, checks))
}

fn run_alpha(spec: &EquationSpec, p: AlphaParams, ctx: &PrecisionContext, fmt: &Fmt) -> Result<Parts> {
    if let Some(b) = &p.bands {
        if b.len() != p.alphas.len() {
            return Err(Error::Schema("`bands` needs one [lo, hi] per alpha".into()));
        }
    }
    let sweep = berry::alpha_sweep(spec, &p.r_grid, &p.alphas, ctx)?;
    let mut csv = Csv::new(&["alpha", "r", "ratio"]);
    for row in &sweep.rows {
        csv.push(vec![fmt.f(row.alpha), fmt.f(row.r), fmt.f(row.ratio)]);
    }
    let mut checks = Vec::new();
    if let Some(bands) = &p.bands {
        for ((a, slope), [lo, hi]) in sweep.slopes.iter().zip(bands) {
            checks.push(Check::new(format!("log-log slope at α = {a}"), *slope, Some(*lo), Some(*hi)));
        }
    }
    let slopes: Vec<Value> = sweep.slopes.iter().map(|(a, s)| json!({"alpha": a, "slope": s})).collect();
    Ok((json!({"slopes": slopes, "rows": sweep.rows}), csv, checks))
}

fn run_resonant_fit(spec: &EquationSpec, p: ResonantFitParams, ctx: &PrecisionContext, fmt: &Fmt) -> Result<Parts> {
    let m = resonant_m(spec)?;
    let f = berry::resonant_coefficient_fit(m, (p.k_window[0], p.k_window[1]), ctx)?;
    let rel = f.residual_rms / f.window_rms;
    let conj = (f.a_minus - f.a_plus.conj()).norm() / f.a_plus.norm();
    let mut checks = Vec::new();
    if let Some(t) = p.max_relative_residual {
        checks.push(Check::at_most("residual RMS / window RMS", rel, t));
    }
    if let Some(t) = p.max_conjugacy {
        checks.push(Check::at_most("|A_- − conj(A_+)| / |A_+|", conj, t));
    }
    let mut csv = Csv::new(&["quantity", "re", "im"]);
    let [a, b] = fmt.c(f.a_plus);
    csv.push(vec!["a_plus".into(), a, b]);
    let [a, b] = fmt.c(f.a_minus);
    csv.push(vec!["a_minus".into(), a, b]);
    let summary = json!({
        "m": m,
        "k_window": p.k_window,
        "a_plus": cj(f.a_plus),
        "a_minus": cj(f.a_minus),
        "residual_rms": f.residual_rms,
        "window_rms": f.window_rms,
        "relative_residual": rel,
        "conjugacy": conj,
    });
    Ok((summary, csv, checks))
}

fn run_resonant_berry(spec: &EquationSpec, p: ResonantBerryParams, ctx: &PrecisionContext, fmt: &Fmt) -> Result<Parts> {
    let m = resonant_m(spec)?;
    let grid = p.beta.values()?;
    let rb = berry::resonant_berry_scan_with(m, p.r, &grid, p.half_width, ctx)?;
    let mut csv = Csv::new(&[
        "beta", "c_plus_re", "c_plus_im", "c_minus_re", "c_minus_im", "fit_plus_re", "fit_plus_im", "fit_minus_re",
        "fit_minus_im",
    ]);
    for (i, b) in grid.iter().enumerate() {
        let mut row = vec![fmt.f(*b)];
        for v in [
            rb.plus.measured_c[i],
            rb.minus.measured_c[i],
            rb.plus.fit.model(*b),
            rb.minus.fit.model(*b),
        ] {
            row.extend(fmt.c(v));
        }
        csv.push(row);
    }
    let mut checks = Vec::new();
    let mut modes = Vec::new();
    for (label, scan) in [("+", &rb.plus), ("-", &rb.minus)] {
        let f = &scan.fit;
        let jn = f.jump.norm();
        let end_to_end = (scan.measured_c.last().unwrap() - scan.measured_c[0]).norm();
        let rel = f.residual_rms / jn;
        let slack = p.monotone_slack.unwrap_or(0.0);
        let back = max_backstep(&scan.measured_c, f.jump) / jn;
        checks.push(Check::at_most(format!("C_{label}: largest backward step / |jump|"), back, slack));
        if let Some(t) = p.max_relative_residual {
            checks.push(Check::at_most(format!("C_{label}: fit residual / |jump|"), rel, t));
        }
        if let (Some(w), Some(t)) = (p.width_target, p.width_tolerance) {
            checks.push(Check::new(format!("C_{label}: fitted width"), f.width, Some(w * (1.0 - t)), Some(w * (1.0 + t))));
        }
        if let Some(t) = p.jump_tolerance {
            checks.push(Check::at_most(format!("C_{label}: |end-to-end − |jump|| / |jump|"), (end_to_end - jn).abs() / jn, t));
        }
        modes.push(json!({
            "mode": label,
            "jump": cj(f.jump),
            "center": [f.center, f.center_imag],
            "width": f.width,
            "offset": cj(f.offset),
            "residual_rms": f.residual_rms,
            "end_to_end": end_to_end,
            "max_backward_step": back,
        }));
    }
    let summary = json!({
        "m": m,
        "r": p.r,
        "half_width": p.half_width,
        "max_condition": rb.max_condition,
        "modes": modes,
    });
    Ok((summary, csv, checks))
}

/// Largest decrease of the projection onto the jump direction between
/// any earlier and any later grid point.
fn max_backstep(vals: &[Complex64], jump: Complex64) -> f64 {
    let u = jump / jump.norm();
    let mut peak = f64::NEG_INFINITY;
    let mut worst = 0.0f64;
    for v in vals {
        let p = (v * u.conj()).re;
        peak = peak.max(p);
        worst = worst.max(peak - p);
    }
    worst
}

fn run_dingle(spec: &EquationSpec, p: DingleParams, ctx: &PrecisionContext, fmt: &Fmt) -> Result<Parts> {
    let phi = spec
        .singularities
        .get(p.j.max(1) - 1)
        .map(|s| s.location.arg())
        .ok_or_else(|| Error::ModelUnavailable(format!("{}: no singularity data", spec.name)))?;
    let t = spec.generate_coefficients(table_size(spec, p.radius, p.width))?;
    let mut csv = Csv::new(&["offset", "on_line", "center", "spread", "model_mismatch"]);
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    for (on, offs) in [(true, &p.on_line), (false, &p.off_line)] {
        for &o in offs {
            // the Stokes line of λ sits at arg x = −arg λ
            let z = Complex64::from_polar(p.radius, -phi + o);
            let rep = stokes::dingle_phase_check(&t, spec, p.j, &ctx.complex(z.re, z.im), p.width, ctx)?;
            csv.push(vec![fmt.f(o), on.to_string(), rep.center.to_string(), fmt.f(rep.spread), fmt.f(rep.model_mismatch)]);
            match (on, p.on_line_max, p.off_line_min) {
                (true, Some(t), _) => checks.push(Check::at_most(format!("spread at offset {o}"), rep.spread, t)),
                (false, _, Some(t)) => checks.push(Check::at_least(format!("spread at offset {o}"), rep.spread, t)),
                _ => {}
            }
            rows.push(json!({"offset": o, "on_line": on, "spread": rep.spread, "center": rep.center,
                             "model_mismatch": rep.model_mismatch}));
        }
    }
    Ok((json!({"radius": p.radius, "width": p.width, "points": rows}), csv, checks))
}

fn run_antistokes(spec: &EquationSpec, p: AntiStokesParams, ctx: &PrecisionContext, fmt: &Fmt) -> Result<Parts> {
    let rmax = p.r_grid.iter().cloned().fold(0.0, f64::max);
    let t = spec.generate_coefficients(table_size(spec, rmax, 0))?;
    let c = Complex64::new(p.c_reference[0], p.c_reference[1]);
    let s = spec.stokes_oracle(ctx).ok().map(|s| c64(&s));
    let mut csv = Csv::new(&["direction", "r", "x_re", "x_im", "value_re", "value_im", "raw_re", "raw_im"]);
    let mut checks = Vec::new();
    let mut out = Vec::new();
    let mut values = Vec::new();
    for &d in &p.directions {
        let rep = stokes::antistokes_constant(spec, &t, c, d, &p.r_grid, ctx)?;
        for q in &rep.points {
            let mut row = vec![format!("{d:?}").to_lowercase(), fmt.f(q.r)];
            row.extend(fmt.c(q.x));
            row.extend(fmt.c(q.value));
            row.extend(fmt.c(q.raw));
            csv.push(row);
        }
        let expected = s.map(|s| match d {
            Direction::Plus => c + s * 0.5,
            Direction::Minus => c - s * 0.5,
        });
        if let (Some(e), Some(tol)) = (expected, p.tolerance) {
            checks.push(Check::at_most(
                format!("{d:?}: |value − (C ± S/2)| / |C ± S/2|").to_lowercase(),
                (rep.value - e).norm() / e.norm(),
                tol,
            ));
        }
        values.push((d, rep.value));
        out.push(json!({"direction": d, "value": cj(rep.value), "spread": rep.spread, "expected": expected.map(cj)}));
    }
    let difference = match (values.iter().find(|v| v.0 == Direction::Plus), values.iter().find(|v| v.0 == Direction::Minus)) {
        (Some(a), Some(b)) => Some(cj(a.1 - b.1)),
        _ => None,
    };
    let summary = json!({"c_reference": p.c_reference, "stokes": s.map(cj), "directions": out,
                         "plus_minus_difference": difference});
    Ok((summary, csv, checks))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(v: Value) -> Result<RunConfig> {
        RunConfig::from_value(&v)
    }

    #[test]
    fn schema_errors() {
        assert!(matches!(cfg(json!({"experiment": "berry"})), Err(Error::Schema(_))));
        let e = cfg(json!({"equation": "toy", "experiment": "berry"})).unwrap_err();
        assert!(e.is_schema(), "{e}");
        let e = cfg(json!({"equation": "toy", "experiment": "stokes", "r_window": [1, 2], "bogus": 1})).unwrap_err();
        assert!(e.is_schema());
        assert!(cfg(json!({"equation": "nope", "experiment": "coeffs", "k_max": 3})).unwrap_err().is_schema());
        assert!(cfg(json!({"equation": "toy", "experiment": "coeffs", "k_max": 3, "precision": 16}))
            .unwrap_err()
            .is_schema());
    }

    #[test]
    fn round_trip_and_determinism() {
        let c = cfg(json!({"equation": "toy", "experiment": "coeffs", "k_max": 12, "check": "factorial"})).unwrap();
        assert_eq!(RunConfig::from_value(&c.to_value()).unwrap(), c);
        let a = execute(&c).unwrap();
        let b = execute(&c).unwrap();
        assert!(a.pass());
        assert_eq!(a.csv.render(), b.csv.render());
        assert_eq!(a.csv.rows.len(), 13);
    }

    #[test]
    fn toy_stokes_run() {
        let c = cfg(json!({"equation": "toy", "experiment": "stokes", "r_window": [40, 60], "tolerance": 1e-8,
                           "relative": false}))
        .unwrap();
        let out = execute(&c).unwrap();
        assert!(out.pass(), "{}", out.report());
        assert_eq!(out.report()["schema"], 1);
    }

    #[test]
    fn oscillation_is_a_numerical_error() {
        let c = cfg(json!({"equation": "resonant", "equation_params": {"m": 1}, "experiment": "stokes",
                           "r_window": [150, 200]}))
        .unwrap();
        let e = execute(&c).unwrap_err();
        assert!(!e.is_schema());
        assert_eq!(error_kind(&e), "oscillation_detected");
        assert_eq!(error_report(&c, &e, 0.0)["status"], "error");
    }

    #[test]
    fn suites_and_grids() {
        let v = json!({"runs": [{"equation": "toy"}, {"equation": "airy"}]});
        assert_eq!(parse_config_file(&v).unwrap().len(), 2);
        assert!(parse_config_file(&json!({"runs": [], "x": 1})).is_err());
        let g = Grid::Range {
            from: -1.0,
            to: 1.0,
            count: 5,
        };
        assert_eq!(g.values().unwrap(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }

    #[test]
    fn backstep_detects_overshoot() {
        let v = [0.0, 0.5, 1.2, 1.0].map(|x| Complex64::new(x, 0.0));
        assert!((max_backstep(&v, Complex64::new(1.0, 0.0)) - 0.2).abs() < 1e-12);
    }
}
