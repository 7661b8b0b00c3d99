//! Command-line front end: inline grammar for functions and phases, single
//! evaluations and named experiments.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::experiments::{self, write_atomic, ExperimentId, ExperimentReport};
use crate::maximal::{maximal_value, MCut, SearchConfig};
use crate::norms::norm_report;
use crate::oscquad::average;
use crate::phase::{Phase, PhaseSpec};
use crate::testfns::{atom_fbeta, char_fn, smooth_bump, PiecewiseConstantFn, TestFn};

/// Exit status when a bound-checking experiment produced FAIL rows.
pub const EXIT_FAIL_ROWS: i32 = 1;
/// Exit status for configuration and runtime errors.
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "oscimax", version, about = "Oscillatory maximal operators: evaluation and experiments")]
pub struct Cli {
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long, global = true, env = "OSCIMAX_WORKERS")]
    pub workers: Option<usize>,
    /// Output file, written atomically; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct Target {
    /// Phase: `zero`, `laurent:t^3`, `quadratic:1`, `curved:|t|^2.5`, or a JSON file.
    #[arg(long)]
    pub phase: String,
    /// Function: `atom:β`, `char:β`, `bump:c,s,h`, `step:b0,b1,..;v0,..`, or a JSON file.
    #[arg(long = "fn")]
    pub function: String,
    #[arg(long, allow_hyphen_values = true)]
    pub x: f64,
    #[arg(long, default_value_t = crate::oscquad::DEFAULT_TOL)]
    pub tol: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Oscillatory average at a single radius.
    Eval {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        r: f64,
    },
    /// Maximal value at a point.
    Maximal {
        #[command(flatten)]
        target: Target,
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
        /// `auto` or a number >= 1.
        #[arg(long, default_value = "auto")]
        m_cut: String,
    },
    /// Norm report of a function.
    Norm {
        #[arg(long = "fn")]
        function: String,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 1.5)]
        l: f64,
    },
    /// Named experiment.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// logbeta, remark, counterexample, positive, census, oracle, lemmas or weights.
    pub name: String,
    /// JSON file with config overrides.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override `key=value`; dotted keys reach nested fields, values are JSON.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Quadrature tolerance of the maximal search.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Degree of the monomial phase `t^d` (logbeta).
    #[arg(long)]
    pub d: Option<u32>,
    #[arg(long, value_delimiter = ',')]
    pub betas: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub ks: Vec<usize>,
    /// part1 or part2 (counterexample).
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long = "phase")]
    pub phase: Option<String>,
    #[arg(long = "fn")]
    pub function: Option<String>,
}

fn number(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("'{s}' is not a number")))
}

fn numbers(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(number).collect()
}

fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Parses the inline function grammar or reads a JSON file.
pub fn parse_function(spec: &str) -> Result<TestFn> {
    let Some((kind, rest)) = spec.split_once(':') else {
        let v = read_json(Path::new(spec))?;
        return serde_json::from_value(v).map_err(|e| Error::Config(e.to_string()));
    };
    match kind {
        "atom" => Ok(atom_fbeta(number(rest)?)?.into()),
        "char" => Ok(char_fn(number(rest)?)?.into()),
        "bump" => match numbers(rest)?.as_slice() {
            [c, s, h] => Ok(smooth_bump(*c, *s, *h)?.into()),
            _ => Err(Error::Parse("bump needs c,s,h".into())),
        },
        "indicator" => match numbers(rest)?.as_slice() {
            [a, b] => Ok(PiecewiseConstantFn::indicator(*a, *b)?.into()),
            _ => Err(Error::Parse("indicator needs a,b".into())),
        },
        "step" => {
            let (b, v) = rest.split_once(';').ok_or_else(|| Error::Parse("step needs breakpoints;values".into()))?;
            Ok(PiecewiseConstantFn::new(numbers(b)?, numbers(v)?)?.into())
        }
        _ => Err(Error::Parse(format!("unknown function kind '{kind}'"))),
    }
}

/// Splits `2t^3+-t^-1` style sums into `(coefficient, exponent)` pairs with
/// `var` as the variable token.
fn power_terms(src: &str, var: &str) -> Result<Vec<(f64, f64)>> {
    src.split('+')
        .map(|term| {
            let term = term.trim();
            let Some(pos) = term.find(var) else {
                return Ok((number(term)?, 0.0));
            };
            let coeff = term[..pos].trim_end_matches('*').trim();
            let c = match coeff {
                "" => 1.0,
                "-" => -1.0,
                s => number(s)?,
            };
            let tail = &term[pos + var.len()..];
            let e = match tail.strip_prefix('^') {
                Some(e) => number(e)?,
                None if tail.is_empty() => 1.0,
                None => return Err(Error::Parse(format!("bad term '{term}'"))),
            };
            Ok((c, e))
        })
        .collect()
}

/// Parses the inline phase grammar or reads a JSON file.
pub fn parse_phase(spec: &str) -> Result<Phase> {
    if spec == "zero" {
        return Ok(Phase::Zero);
    }
    let Some((kind, rest)) = spec.split_once(':') else {
        let v = read_json(Path::new(spec))?;
        let ps: PhaseSpec = serde_json::from_value(v).map_err(|e| Error::Config(e.to_string()))?;
        return ps.to_phase();
    };
    match kind {
        "quadratic" => Phase::quadratic_constant(number(rest)?),
        "laurent" => {
            let terms = power_terms(rest, "t")?;
            let mut pairs = Vec::new();
            for (c, e) in terms {
                if e.fract() != 0.0 {
                    return Err(Error::Parse(format!("laurent exponent {e} is not an integer")));
                }
                pairs.push((e as i32, c));
            }
            Phase::laurent(&pairs)
        }
        "curved" => {
            let mut terms = power_terms(rest, "|t|")?;
            terms.sort_by(|a, b| a.1.total_cmp(&b.1));
            Phase::curved_constant(&terms)
        }
        _ => Err(Error::Parse(format!("unknown phase kind '{kind}'"))),
    }
    .map_err(|e| match e {
        Error::Parse(_) => e,
        other => Error::Config(other.to_string()),
    })
}

fn parse_m_cut(s: &str) -> Result<MCut> {
    if s == "auto" {
        Ok(MCut::Auto)
    } else {
        Ok(MCut::Value(number(s)?))
    }
}

/// Sets `path` (dot-separated) in `root`, which must already contain it.
fn set_path(root: &mut Value, path: &str, value: Value) -> Result<()> {
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = cur.as_object_mut().ok_or_else(|| Error::Config(format!("'{path}' is not an object path")))?;
        if !obj.contains_key(*part) {
            return Err(Error::Config(format!("unknown config key '{path}'")));
        }
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj.get_mut(*part).expect("checked above");
    }
    unreachable!("split yields at least one part")
}

fn has_path(root: &Value, path: &str) -> bool {
    path.split('.').try_fold(root, |v, p| v.get(p)).is_some()
}

/// Effective experiment config: defaults, then the config file, then flags.
pub fn experiment_config(args: &ExperimentArgs, id: ExperimentId) -> Result<Value> {
    let mut cfg = experiments::default_config(id)?;
    if let Some(path) = &args.config {
        let Value::Object(o) = read_json(path)? else {
            return Err(Error::Config("config file must hold a JSON object".into()));
        };
        for (k, v) in o {
            set_path(&mut cfg, &k, v)?;
        }
    }
    let flag = |cfg: &mut Value, keys: &[&str], v: Value, name: &str| -> Result<()> {
        let key = keys
            .iter()
            .find(|k| has_path(cfg, k))
            .ok_or_else(|| Error::Config(format!("--{name} does not apply to experiment '{}'", id.name())))?;
        set_path(cfg, key, v)
    };
    if let Some(seed) = args.seed {
        flag(&mut cfg, &["seed"], json!(seed), "seed")?;
    }
    if let Some(e) = args.epsilon {
        flag(&mut cfg, &["epsilon", "search.epsilon"], json!(e), "epsilon")?;
    }
    if let Some(t) = args.tol {
        flag(&mut cfg, &["search.quad_tol"], json!(t), "tol")?;
    }
    if let Some(d) = args.d {
        let phase = Phase::laurent(&[(d as i32, 1.0)]).map_err(|e| Error::Config(e.to_string()))?;
        flag(&mut cfg, &["phase"], serde_json::to_value(phase)?, "d")?;
    }
    if let Some(p) = &args.phase {
        let phase = parse_phase(p)?;
        flag(&mut cfg, &["phase"], serde_json::to_value(phase)?, "phase")?;
    }
    if let Some(f) = &args.function {
        let f = parse_function(f)?;
        flag(&mut cfg, &["f"], serde_json::to_value(f)?, "fn")?;
    }
    if !args.betas.is_empty() {
        flag(&mut cfg, &["betas"], json!(args.betas), "betas")?;
    }
    if !args.ks.is_empty() {
        flag(&mut cfg, &["ks"], json!(args.ks), "ks")?;
    }
    if let Some(v) = &args.variant {
        flag(&mut cfg, &["variant"], json!(v), "variant")?;
    }
    for s in &args.set {
        let (k, v) = s.split_once('=').ok_or_else(|| Error::Config(format!("--set needs KEY=VALUE, got '{s}'")))?;
        let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
        set_path(&mut cfg, k, value)?;
    }
    Ok(cfg)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn summary_path(path: &Path) -> PathBuf {
    let mut name = path.file_stem().unwrap_or_default().to_os_string();
    name.push(".summary.json");
    path.with_file_name(name)
}

fn emit_report(cli: &Cli, report: &ExperimentReport) -> Result<()> {
    let summary = serde_json::to_string_pretty(&report.summary_json())? + "\n";
    match cli.format {
        Format::Csv => {
            emit(cli.out.as_deref(), &report.to_csv()?)?;
            match &cli.out {
                Some(path) => write_atomic(&summary_path(path), summary.as_bytes()),
                None => {
                    eprint!("{summary}");
                    Ok(())
                }
            }
        }
        Format::Json => {
            let mut v = report.summary_json();
            v["rows"] = serde_json::to_value(&report.rows)?;
            emit(cli.out.as_deref(), &(serde_json::to_string_pretty(&v)? + "\n"))
        }
    }
}

fn emit_value(cli: &Cli, v: &Map<String, Value>) -> Result<()> {
    let text = match cli.format {
        Format::Json => serde_json::to_string_pretty(v)? + "\n",
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(v.keys())?;
            w.write_record(v.values().map(|x| match x {
                Value::Number(n) => format!("{:.16e}", n.as_f64().unwrap_or(f64::NAN)),
                Value::String(s) => s.clone(),
                other => other.to_string(),
            }))?;
            String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.to_string()))?).expect("utf-8")
        }
    };
    emit(cli.out.as_deref(), &text)
}

fn execute(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Eval { target, r } => {
            let f = parse_function(&target.function)?;
            let phase = parse_phase(&target.phase)?;
            let q = average(&f, &phase, target.x, *r, target.tol)?;
            let mut m = Map::new();
            m.insert("x".into(), json!(target.x));
            m.insert("r".into(), json!(r));
            m.insert("average".into(), json!(q.value.norm()));
            m.insert("re".into(), json!(q.value.re));
            m.insert("im".into(), json!(q.value.im));
            m.insert("err".into(), json!(q.abs_error_estimate));
            emit_value(cli, &m)?;
            Ok(0)
        }
        Command::Maximal { target, epsilon, m_cut } => {
            let f = parse_function(&target.function)?;
            let phase = parse_phase(&target.phase)?;
            let cfg = SearchConfig { quad_tol: target.tol, epsilon: *epsilon, m_cut: parse_m_cut(m_cut)?, ..SearchConfig::default() };
            cfg.validate().map_err(|e| Error::Config(e.to_string()))?;
            let s = maximal_value(&f, &phase, target.x, &cfg)?;
            let Value::Object(mut m) = serde_json::to_value(s)? else { unreachable!("samples serialize to objects") };
            m.insert("case_label".into(), json!(s.case_label.as_str()));
            emit_value(cli, &m)?;
            Ok(0)
        }
        Command::Norm { function, p, l } => {
            let f = parse_function(function)?;
            let report = norm_report(&f, *p, *l)?;
            let Value::Object(mut m) = serde_json::to_value(&report)? else { unreachable!("reports serialize to objects") };
            // flatten computed quantities to their values
            for v in m.values_mut() {
                if let Some(x) = v.get("value").cloned() {
                    *v = x;
                }
            }
            emit_value(cli, &m)?;
            Ok(0)
        }
        Command::Experiment(args) => {
            let id: ExperimentId = args.name.parse()?;
            let cfg = experiment_config(args, id)?;
            let report = experiments::run_experiment(id, Some(&cfg))?;
            emit_report(cli, &report)?;
            Ok(if report.has_failures() { EXIT_FAIL_ROWS } else { 0 })
        }
    }
}

/// Runs the parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("oscimax-error: config error: --workers must be positive");
            return EXIT_ERROR;
        }
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("oscimax-error: config error: {e}");
            return EXIT_ERROR;
        }
    };
    match pool.install(|| execute(&cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("oscimax-error: {e}");
            EXIT_ERROR
        }
    }
}
