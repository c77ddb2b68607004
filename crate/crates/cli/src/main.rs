use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::Parser;
use exasym_core::equations::list_catalog;
use exasym_core::run::{error_report, execute, parse_config_file, Experiment, RunConfig};
use serde_json::{Map, Value};

const PRECISION_ENV: &str = "EXASYM_PRECISION";

/// Run exponential-asymptotics experiments from JSON configs.
///
/// TARGET is an experiment name, `run` (use the experiment named in the
/// config, suites allowed) or `list` (print the equation catalog).
#[derive(Debug, Parser)]
#[command(name = "exasym", version)]
struct Cli {
    target: String,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    equation: Option<String>,
    /// Equation parameter, e.g. `--param m=1.0`.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    /// Experiment parameter, e.g. `--set r=400` or `--set r_window=[150,200]`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[arg(long)]
    precision: Option<u32>,
    #[arg(long)]
    guard_bits: Option<u32>,
    #[arg(long)]
    id: Option<String>,
    /// Output directory [default: out].
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Schema(anyhow::Error),
    Other(anyhow::Error),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.target == "list" {
        for line in list_catalog() {
            println!("{line}");
        }
        return ExitCode::SUCCESS;
    }
    match run(&cli) {
        Ok(code) => code,
        Err(Failure::Schema(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// `key=value`; the value is JSON when it parses, a string otherwise.
fn key_value(s: &str) -> anyhow::Result<(String, Value)> {
    let Some((k, v)) = s.split_once('=') else {
        bail!("expected KEY=VALUE, got `{s}`");
    };
    let v = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.trim().to_string(), v))
}

fn apply_overrides(cli: &Cli, run: &mut Map<String, Value>) -> anyhow::Result<()> {
    if let Some(e) = &cli.equation {
        run.insert("equation".into(), Value::String(e.clone()));
    }
    if !cli.params.is_empty() {
        let mut eq = match run.remove("equation_params") {
            Some(Value::Object(m)) => m,
            None | Some(Value::Null) => Map::new(),
            Some(_) => bail!("`equation_params` must be an object"),
        };
        for p in &cli.params {
            let (k, v) = key_value(p)?;
            eq.insert(k, v);
        }
        run.insert("equation_params".into(), Value::Object(eq));
    }
    for s in &cli.sets {
        let (k, v) = key_value(s)?;
        run.insert(k, v);
    }
    if let Some(p) = cli.precision {
        run.insert("precision".into(), p.into());
    }
    if let Some(g) = cli.guard_bits {
        run.insert("guard_bits".into(), g.into());
    }
    if let Some(id) = &cli.id {
        run.insert("id".into(), Value::String(id.clone()));
    }
    if let Some(o) = &cli.out {
        run.insert("output".into(), Value::String(o.display().to_string()));
    }
    // the environment only fills a gap; a config that names its precision wins
    if !run.contains_key("precision") {
        if let Ok(p) = std::env::var(PRECISION_ENV) {
            let bits: u32 = p.trim().parse().with_context(|| format!("{PRECISION_ENV}={p}"))?;
            run.insert("precision".into(), bits.into());
        }
    }
    Ok(())
}

fn load_configs(cli: &Cli) -> anyhow::Result<Vec<RunConfig>> {
    let raw = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let v: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            parse_config_file(&v)?
        }
        None => vec![Value::Object(Map::new())],
    };
    let experiment = match cli.target.as_str() {
        "run" => None,
        name => Some(Experiment::parse(name)?),
    };
    let mut out = Vec::new();
    for v in raw {
        let Value::Object(mut m) = v else {
            bail!("each run must be a JSON object");
        };
        if let Some(e) = experiment {
            match m.get("experiment").and_then(Value::as_str) {
                // in a suite the positional experiment selects runs
                Some(name) if name != e.name() && cli.config.is_some() => continue,
                _ => {
                    m.insert("experiment".into(), Value::String(e.name()));
                }
            }
        }
        apply_overrides(cli, &mut m)?;
        out.push(RunConfig::from_value(&Value::Object(m))?);
    }
    if out.is_empty() {
        bail!("no run in the config matches `{}`", cli.target);
    }
    Ok(out)
}

struct Emission {
    dir: PathBuf,
    stem: String,
    csv: Option<String>,
    json: Value,
}

fn run(cli: &Cli) -> Result<ExitCode, Failure> {
    // every config is validated before anything is computed or written
    let configs = load_configs(cli).map_err(Failure::Schema)?;
    let mut emissions = Vec::new();
    let mut numerical_error = false;
    for cfg in &configs {
        let start = Instant::now();
        let dir = PathBuf::from(cfg.output.as_deref().unwrap_or("out"));
        match execute(cfg) {
            Ok(outcome) => {
                println!("{}: {}", cfg.stem(), if outcome.pass() { "PASS" } else { "FAIL" });
                for c in &outcome.checks {
                    let band = match (c.lower, c.upper) {
                        (Some(l), Some(u)) => format!("in [{}, {}]", num(l), num(u)),
                        (Some(l), None) => format!(">= {}", num(l)),
                        (None, Some(u)) => format!("<= {}", num(u)),
                        (None, None) => String::new(),
                    };
                    let flag = if c.pass { "ok  " } else { "FAIL" };
                    println!("  {flag} {} = {:.6e} {band}", c.name, c.measured);
                }
                emissions.push(Emission {
                    dir,
                    stem: cfg.stem(),
                    csv: Some(outcome.csv.render()),
                    json: outcome.report(),
                });
            }
            Err(e) if e.is_schema() => return Err(Failure::Schema(e.into())),
            Err(e) => {
                println!("{}: ERROR {e}", cfg.stem());
                numerical_error = true;
                emissions.push(Emission {
                    dir,
                    stem: cfg.stem(),
                    csv: None,
                    json: error_report(cfg, &e, start.elapsed().as_secs_f64()),
                });
            }
        }
    }
    for e in &emissions {
        write(e).map_err(Failure::Other)?;
    }
    Ok(if numerical_error { ExitCode::from(3) } else { ExitCode::SUCCESS })
}

fn num(v: f64) -> String {
    if v == 0.0 || (1e-3..1e4).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn write(e: &Emission) -> anyhow::Result<()> {
    fs::create_dir_all(&e.dir).with_context(|| format!("creating {}", e.dir.display()))?;
    let path = |ext: &str| -> PathBuf { Path::new(&e.dir).join(format!("{}.{ext}", e.stem)) };
    if let Some(csv) = &e.csv {
        fs::write(path("csv"), csv).with_context(|| format!("writing {}", path("csv").display()))?;
    }
    let mut json = serde_json::to_string_pretty(&e.json)?;
    json.push('\n');
    fs::write(path("json"), json).with_context(|| format!("writing {}", path("json").display()))?;
    log::info!("wrote {}", path("json").display());
    Ok(())
}

