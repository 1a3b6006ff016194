//! The `stormlet` command line: load a model, check properties, report.
//!
//! Exit codes: 0 when every check completed, 1 for usage and parse errors,
//! 2 when `--fail-on-false` is set and a bounded property is false in some
//! initial state, 3 when a solver did not converge, 4 for semantic errors
//! (deadlocks, non-stochastic rows, unknown labels, unsupported property and
//! model combinations).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Parser, ValueEnum};
use serde_json::{json, Map, Value};

use crate::checkers::{check_property, CheckError, CheckResult, Quantity};
use crate::explicit::{read_model, write_model, ExplicitBundle, ExplicitError, RewardTexts};
use crate::model::Model;
use crate::prism::{build_model, ExploreOptions, PrismError, StateMap};
use crate::property::{parse_properties, parse_property, Property, PropertyError};
use crate::scalar::{Rational, Scalar};
use crate::solvers::{Criterion, LinearMethod, MinMaxMethod, Solve, SolverEnvironment, SolverError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FALSE: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;
pub const EXIT_SEMANTIC: i32 = 4;

/// Environment variable capping the worker threads (0 = automatic).
pub const THREADS_VAR: &str = "STORMLET_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SolverArg {
    Jacobi,
    GaussSeidel,
    Exact,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MinMaxArg {
    Vi,
    Pi,
}

/// Probabilistic model checker for DTMCs, CTMCs and MDPs.
#[derive(Debug, Parser)]
#[command(name = "stormlet", version, group(ArgGroup::new("input").required(true).args(["explicit", "prism"])))]
struct Args {
    /// Explicit model: transitions file and labels file.
    #[arg(long, num_args = 2, value_names = ["TRA", "LAB"])]
    explicit: Option<Vec<PathBuf>>,
    /// State rewards for an explicit model; the file stem names the reward
    /// structure. Repeatable.
    #[arg(long, value_name = "FILE", requires = "explicit")]
    srew: Vec<PathBuf>,
    /// Action rewards for an explicit model; pairs with the state rewards
    /// of the same stem. Repeatable.
    #[arg(long, value_name = "FILE", requires = "explicit")]
    trew: Vec<PathBuf>,
    /// PRISM model file.
    #[arg(long, value_name = "FILE")]
    prism: Option<PathBuf>,
    /// Constant values, e.g. `N=5,p=0.3`.
    #[arg(long, value_name = "K=V,...", requires = "prism")]
    constants: Option<String>,
    /// Property to check. Repeatable; checked before those of `--prop-file`.
    #[arg(long, value_name = "PROPERTY")]
    prop: Vec<String>,
    /// File with one property per line; `//` starts a comment.
    #[arg(long, value_name = "FILE")]
    prop_file: Option<PathBuf>,
    /// Linear equation solver.
    #[arg(long, value_enum, default_value = "gauss-seidel")]
    solver: SolverArg,
    /// Min/max equation solver for MDPs.
    #[arg(long, value_enum, default_value = "vi")]
    minmax: MinMaxArg,
    /// Convergence threshold of iterative solvers.
    #[arg(long, default_value_t = 1e-6)]
    precision: f64,
    /// Use an absolute instead of a relative convergence criterion.
    #[arg(long)]
    absolute: bool,
    /// Iteration limit of iterative solvers.
    #[arg(long, default_value_t = 1_000_000)]
    max_iter: u64,
    /// Exact rational arithmetic throughout.
    #[arg(long)]
    exact: bool,
    /// Add self-loops to deadlock states of PRISM models.
    #[arg(long)]
    fix_deadlocks: bool,
    /// Exit with code 2 if a bounded property is false in an initial state.
    #[arg(long)]
    fail_on_false: bool,
    /// Write the built model in explicit format to this directory.
    #[arg(long, value_name = "DIR")]
    export_model: Option<PathBuf>,
    /// Machine-readable output.
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    Explicit {
        transitions: PathBuf,
        labels: PathBuf,
        state_rewards: Vec<PathBuf>,
        action_rewards: Vec<PathBuf>,
    },
    Prism {
        path: PathBuf,
        constants: BTreeMap<String, String>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Human,
    Json,
}

/// Validated command line.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub source: Source,
    pub properties: Vec<String>,
    pub property_file: Option<PathBuf>,
    pub env: SolverEnvironment,
    pub exact: bool,
    pub fix_deadlocks: bool,
    pub fail_on_false: bool,
    pub export_model: Option<PathBuf>,
    pub format: OutputFormat,
}

/// Why [`parse_args`] did not produce a configuration.
#[derive(Clone, Debug, PartialEq)]
pub enum ArgsOutcome {
    /// `--help` or `--version`: print to stdout and exit 0.
    Info(String),
    /// Invalid arguments: print to stderr and exit 1.
    Usage(String),
}

/// Parses `--constants N=5,p=0.3`.
pub fn parse_constants(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for item in text.split(',').filter(|s| !s.is_empty()) {
        let (name, value) = item
            .split_once('=')
            .ok_or_else(|| format!("constant binding `{}` is not of the form NAME=VALUE", item))?;
        if name.is_empty() || value.is_empty() {
            return Err(format!("constant binding `{}` is incomplete", item));
        }
        if out.insert(name.to_string(), value.to_string()).is_some() {
            return Err(format!("constant `{}` bound twice", name));
        }
    }
    Ok(out)
}

pub fn parse_args<I, S>(argv: I) -> Result<RunConfig, ArgsOutcome>
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let args = Args::try_parse_from(argv).map_err(|e| {
        use clap::error::ErrorKind;
        match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ArgsOutcome::Info(e.to_string()),
            _ => ArgsOutcome::Usage(e.to_string()),
        }
    })?;
    if args.prop.is_empty() && args.prop_file.is_none() {
        return Err(ArgsOutcome::Usage(
            "error: no property given; use --prop or --prop-file".into(),
        ));
    }
    let source = match (args.explicit, args.prism) {
        (Some(paths), None) => Source::Explicit {
            transitions: paths[0].clone(),
            labels: paths[1].clone(),
            state_rewards: args.srew,
            action_rewards: args.trew,
        },
        (None, Some(path)) => Source::Prism {
            path,
            constants: match &args.constants {
                Some(text) => parse_constants(text).map_err(|e| ArgsOutcome::Usage(format!("error: {}", e)))?,
                None => BTreeMap::new(),
            },
        },
        _ => unreachable!("clap enforces exactly one input"),
    };
    let env = SolverEnvironment {
        linear_method: match args.solver {
            SolverArg::Jacobi => LinearMethod::Jacobi,
            SolverArg::GaussSeidel => LinearMethod::GaussSeidel,
            SolverArg::Exact => LinearMethod::Exact,
        },
        minmax_method: match args.minmax {
            MinMaxArg::Vi => MinMaxMethod::ValueIteration,
            MinMaxArg::Pi => MinMaxMethod::PolicyIteration,
        },
        precision: args.precision,
        criterion: if args.absolute {
            Criterion::Absolute
        } else {
            Criterion::Relative
        },
        max_iterations: args.max_iter,
    };
    env.validate()
        .map_err(|e| ArgsOutcome::Usage(format!("error: {}", e)))?;
    Ok(RunConfig {
        source,
        properties: args.prop,
        property_file: args.prop_file,
        env,
        exact: args.exact,
        fix_deadlocks: args.fix_deadlocks,
        fail_on_false: args.fail_on_false,
        export_model: args.export_model,
        format: if args.json {
            OutputFormat::Json
        } else {
            OutputFormat::Human
        },
    })
}

/// A failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn semantic(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_SEMANTIC,
            message: message.into(),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read {}: {}", path.display(), e)))
}

fn explicit_failure(path: &Path, e: ExplicitError) -> Failure {
    let message = format!("{}: {}", path.display(), e);
    match e {
        ExplicitError::NonStochasticRow { .. }
        | ExplicitError::GapInStateIndices { .. }
        | ExplicitError::NegativeReward { .. }
        | ExplicitError::Model(_) => Failure::semantic(message),
        _ => Failure::usage(message),
    }
}

fn prism_failure(path: &Path, e: PrismError) -> Failure {
    let message = format!("{}: {}", path.display(), e);
    if e.is_semantic() {
        Failure::semantic(message)
    } else {
        Failure::usage(message)
    }
}

fn check_failure(text: &str, e: CheckError) -> Failure {
    let message = format!("property `{}`: {}", text, e);
    match e {
        CheckError::Solver(SolverError::NotConverged { .. }) => Failure {
            code: EXIT_NOT_CONVERGED,
            message,
        },
        CheckError::Property(PropertyError::Syntax { .. }) => Failure::usage(message),
        _ => Failure::semantic(message),
    }
}

/// Groups reward files by stem into reward structures.
fn reward_bundle(state: &[PathBuf], action: &[PathBuf]) -> Result<Vec<RewardTexts>, Failure> {
    let mut by_name: BTreeMap<String, RewardTexts> = BTreeMap::new();
    for (paths, is_state) in [(state, true), (action, false)] {
        for path in paths {
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .ok_or_else(|| Failure::usage(format!("{}: not a file name", path.display())))?;
            let entry = by_name.entry(name.clone()).or_insert_with(|| RewardTexts {
                name,
                state_rewards: None,
                action_rewards: None,
            });
            let slot = if is_state {
                &mut entry.state_rewards
            } else {
                &mut entry.action_rewards
            };
            if slot.is_some() {
                return Err(Failure::usage(format!(
                    "{}: reward structure `{}` given twice",
                    path.display(),
                    entry.name
                )));
            }
            *slot = Some(read(path)?);
        }
    }
    Ok(by_name.into_values().collect())
}

fn load<T: Scalar>(config: &RunConfig) -> Result<(Model<T>, Option<StateMap<T>>), Failure> {
    match &config.source {
        Source::Explicit {
            transitions,
            labels,
            state_rewards,
            action_rewards,
        } => {
            let bundle = ExplicitBundle {
                transitions: read(transitions)?,
                labels: read(labels)?,
                rewards: reward_bundle(state_rewards, action_rewards)?,
            };
            let model = read_model::<T>(&bundle).map_err(|e| {
                let path = match &e {
                    ExplicitError::UndeclaredLabel { .. } | ExplicitError::MissingDeclarationBlock { .. } => labels,
                    _ => transitions,
                };
                explicit_failure(path, e)
            })?;
            Ok((model, None))
        }
        Source::Prism { path, constants } => {
            let source = read(path)?;
            let options = ExploreOptions {
                fix_deadlocks: config.fix_deadlocks,
                ..ExploreOptions::default()
            };
            let (model, states) = build_model::<T>(&source, constants, &options).map_err(|e| prism_failure(path, e))?;
            Ok((model, Some(states)))
        }
    }
}

/// File stem used when exporting a reward structure.
fn reward_stem(name: &str) -> &str {
    if name.is_empty() {
        "default"
    } else {
        name
    }
}

/// Writes `model.tra`, `model.lab` and `<reward>.srew` / `<reward>.trew`.
pub fn export_model<T: Scalar>(model: &Model<T>, dir: &Path) -> std::io::Result<()> {
    let bundle = write_model(model);
    fs::create_dir_all(dir)?;
    fs::write(dir.join("model.tra"), &bundle.transitions)?;
    fs::write(dir.join("model.lab"), &bundle.labels)?;
    for r in &bundle.rewards {
        let stem = reward_stem(&r.name);
        if let Some(text) = &r.state_rewards {
            fs::write(dir.join(format!("{}.srew", stem)), text)?;
        }
        if let Some(text) = &r.action_rewards {
            fs::write(dir.join(format!("{}.trew", stem)), text)?;
        }
    }
    Ok(())
}

fn collect_properties(config: &RunConfig) -> Result<Vec<(String, Property)>, Failure> {
    let mut out = Vec::new();
    for text in &config.properties {
        let p = parse_property(text).map_err(|e| Failure::usage(format!("property `{}`: {}", text, e)))?;
        out.push((text.trim().to_string(), p));
    }
    if let Some(path) = &config.property_file {
        let text = read(path)?;
        let props = parse_properties(&text).map_err(|e| Failure::usage(format!("{}: {}", path.display(), e)))?;
        out.extend(props);
    }
    if out.is_empty() {
        return Err(Failure::usage("no properties to check"));
    }
    Ok(out)
}

fn json_value<T: Scalar>(q: &Quantity<T>) -> Value {
    match q {
        Quantity::Finite(v) if T::EXACT => Value::String(v.to_canonical()),
        Quantity::Finite(v) => serde_json::Number::from_f64(v.to_f64())
            .map(Value::Number)
            .unwrap_or_else(|| Value::String(v.to_canonical())),
        Quantity::Infinite => Value::String("inf".into()),
        Quantity::Undefined => Value::String("NaN".into()),
    }
}

/// Renders one property result.
pub fn format_result<T: Scalar>(
    text: &str,
    result: &CheckResult<T>,
    initial: &[usize],
    format: OutputFormat,
) -> String {
    match format {
        OutputFormat::Human => {
            let mut out = format!("Property: {}\n", text);
            for &s in initial {
                let value = match &result.truth {
                    Some(t) => t[s].to_string(),
                    None => result.values[s].to_string(),
                };
                let _ = writeln!(out, "Result (state {}): {}", s, value);
            }
            if !result.metadata.condition_zero.is_empty() {
                let _ = writeln!(
                    out,
                    "Condition has probability zero in {} state(s)",
                    result.metadata.condition_zero.len()
                );
            }
            out
        }
        OutputFormat::Json => {
            let mut values = Map::new();
            for &s in initial {
                let v = match &result.truth {
                    Some(t) => Value::Bool(t[s]),
                    None => json_value(&result.values[s]),
                };
                values.insert(s.to_string(), v);
            }
            let mut metadata = Map::new();
            metadata.insert("iterations".into(), json!(result.metadata.iterations));
            metadata.insert("method".into(), json!(result.metadata.method));
            metadata.insert(
                "time_ms".into(),
                json!(result.metadata.elapsed.as_secs_f64() * 1000.0),
            );
            if !result.metadata.condition_zero.is_empty() {
                metadata.insert("condition_zero".into(), json!(result.metadata.condition_zero));
            }
            json!({ "property": text, "values": values, "metadata": metadata }).to_string()
        }
    }
}

struct Report {
    stdout: String,
    any_false: bool,
}

fn run_typed<T: Solve>(config: &RunConfig, err: &mut dyn Write) -> Result<Report, Failure> {
    let properties = collect_properties(config)?;
    let (model, states) = load::<T>(config)?;
    let _ = writeln!(
        err,
        "{} with {} states, {} choices, {} transitions",
        model.kind().keyword(),
        model.state_count(),
        model.choice_count(),
        model.matrix().nnz()
    );
    if let Some(dir) = &config.export_model {
        export_model(&model, dir).map_err(|e| Failure::usage(format!("cannot export to {}: {}", dir.display(), e)))?;
    }
    let initial: Vec<usize> = model.initial_states().ones().collect();
    let mut stdout = String::new();
    let mut json_results = Vec::new();
    let mut any_false = false;
    for (text, property) in &properties {
        let result =
            check_property(&model, states.as_ref(), property, &config.env).map_err(|e| check_failure(text, e))?;
        if let Some(t) = &result.truth {
            any_false |= initial.iter().any(|&s| !t[s]);
        }
        match config.format {
            OutputFormat::Human => {
                if !stdout.is_empty() {
                    stdout.push('\n');
                }
                stdout.push_str(&format_result(text, &result, &initial, OutputFormat::Human));
            }
            OutputFormat::Json => json_results.push(format_result(text, &result, &initial, OutputFormat::Json)),
        }
    }
    if config.format == OutputFormat::Json {
        stdout = format!("[{}]\n", json_results.join(","));
    }
    Ok(Report { stdout, any_false })
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(text) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = text
        .trim()
        .parse()
        .map_err(|_| Failure::usage(format!("{} must be a non-negative integer", THREADS_VAR)))?;
    // A pool may already exist when running several times in one process.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Runs a configuration. Results go to `out` only if every property was
/// checked; diagnostics go to `err`. Returns the exit code.
pub fn run(config: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let outcome = configure_threads().and_then(|_| {
        if config.exact {
            run_typed::<Rational>(config, err)
        } else {
            run_typed::<f64>(config, err)
        }
    });
    match outcome {
        Ok(report) => {
            if out.write_all(report.stdout.as_bytes()).and_then(|_| out.flush()).is_err() {
                return EXIT_USAGE;
            }
            if config.fail_on_false && report.any_false {
                EXIT_FALSE
            } else {
                EXIT_OK
            }
        }
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

/// Parses `argv` and runs it.
pub fn main_with_args<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    match parse_args(argv) {
        Ok(config) => run(&config, out, err),
        Err(ArgsOutcome::Info(text)) => {
            let _ = out.write_all(text.as_bytes());
            EXIT_OK
        }
        Err(ArgsOutcome::Usage(text)) => {
            let _ = err.write_all(text.as_bytes());
            if !text.ends_with('\n') {
                let _ = err.write_all(b"\n");
            }
            EXIT_USAGE
        }
    }
}
