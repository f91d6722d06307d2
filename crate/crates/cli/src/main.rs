//! `woc`: social-weight, threshold-sweep and unimodality analysis of crowd
//! prediction data.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{Map, Value};

use woc_core::report::{self, AlphaGrid, Command, Input, ReportError, RunConfig};
use woc_core::{ErrorMode, ResampleMode, Scenario};

#[derive(Parser)]
#[command(name = "woc", version, about = "Social learning analysis for crowd predictions")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Social weights, exclusions and the sign/outcome table.
    Analyze(Opts),
    /// `analyze` plus the bootstrapped threshold sweep.
    Sweep(Opts),
    /// `analyze` plus the dip-test split and proportions tests.
    Unimodality(Opts),
    /// Generate a synthetic dataset with its true social weights.
    Simulate(Opts),
    /// Every analysis.
    All(Opts),
}

#[derive(Clone, Copy, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum ErrorModeArg {
    Absolute,
    Percent,
}

#[derive(Clone, Copy, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum ResampleArg {
    Pooled,
    Stratified,
}

#[derive(Args, Default)]
struct Opts {
    /// Records CSV.
    #[arg(long)]
    records: Option<PathBuf>,
    /// Truths CSV.
    #[arg(long)]
    truths: Option<PathBuf>,
    /// Scenario file (JSON, or TOML by extension) to simulate instead of
    /// reading data.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// TOML or JSON file with any of these options; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = "WOC_OUT_DIR")]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    min_prior: Option<usize>,
    /// Number of evenly spaced points, or comma-separated values.
    #[arg(long, allow_hyphen_values = true)]
    alpha_grid: Option<AlphaGrid>,
    #[arg(long)]
    bootstrap: Option<usize>,
    #[arg(long)]
    dip_replicates: Option<usize>,
    #[arg(long)]
    n_min: Option<usize>,
    #[arg(long, value_enum)]
    error_mode: Option<ErrorModeArg>,
    #[arg(long, value_enum)]
    resample_mode: Option<ResampleArg>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Cache file for simulated null distributions.
    #[arg(long)]
    null_cache: Option<PathBuf>,
}

/// The option keys a config file may set, spelled as the flags.
#[derive(Deserialize, Default)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct FileOpts {
    records: Option<PathBuf>,
    truths: Option<PathBuf>,
    scenario: Option<PathBuf>,
    out_dir: Option<PathBuf>,
    min_prior: Option<usize>,
    alpha_grid: Option<AlphaGrid>,
    bootstrap: Option<usize>,
    dip_replicates: Option<usize>,
    n_min: Option<usize>,
    error_mode: Option<ErrorModeArg>,
    resample_mode: Option<ResampleArg>,
    seed: Option<u64>,
    threads: Option<usize>,
    null_cache: Option<PathBuf>,
}

const OPTION_KEYS: &[&str] = &[
    "records",
    "truths",
    "out-dir",
    "min-prior",
    "alpha-grid",
    "bootstrap",
    "dip-replicates",
    "n-min",
    "error-mode",
    "resample-mode",
    "seed",
    "threads",
    "null-cache",
];

const DEFAULT_OUT_DIR: &str = "woc-out";

fn config_error(msg: impl std::fmt::Display) -> ReportError {
    ReportError::Config(msg.to_string())
}

/// Options from a config file, plus a scenario when the file carries one,
/// either as a `scenario` table or as the whole file.
fn read_config(path: &Path) -> Result<(FileOpts, Option<Scenario>), ReportError> {
    let text = fs::read_to_string(path)
        .map_err(|e| ReportError::Io { path: path.to_path_buf(), message: e.to_string() })?;
    let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    let value: Value = if is_toml {
        toml::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?
    } else {
        serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?
    };
    let Value::Object(mut table) = value else {
        return Err(config_error(format!("{}: expected a table", path.display())));
    };
    let inline = match table.remove("scenario") {
        Some(Value::String(p)) => {
            table.insert("scenario".into(), Value::String(p));
            None
        }
        other => other,
    };
    let mut opts = Map::new();
    for key in OPTION_KEYS.iter().chain(["scenario"].iter()) {
        if let Some(v) = table.remove(*key) {
            opts.insert(key.to_string(), v);
        }
    }
    let file_opts: FileOpts =
        serde_json::from_value(Value::Object(opts)).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    let scenario_value = match (inline, table.is_empty()) {
        (Some(v), true) => Some(v),
        (None, false) => Some(Value::Object(table)),
        (None, true) => None,
        (Some(_), false) => {
            let keys: Vec<_> = table.keys().cloned().collect();
            return Err(config_error(format!("{}: unknown keys {}", path.display(), keys.join(", "))));
        }
    };
    let scenario = scenario_value
        .map(serde_json::from_value::<Scenario>)
        .transpose()
        .map_err(|e| config_error(format!("{}: scenario: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let rebase = |p: Option<PathBuf>| p.map(|p| if p.is_relative() { base.join(p) } else { p });
    let file_opts = FileOpts {
        records: rebase(file_opts.records),
        truths: rebase(file_opts.truths),
        scenario: rebase(file_opts.scenario),
        out_dir: rebase(file_opts.out_dir),
        null_cache: rebase(file_opts.null_cache),
        ..file_opts
    };
    Ok((file_opts, scenario))
}

fn build_config(command: Command, opts: Opts) -> Result<RunConfig, ReportError> {
    let (file, file_scenario) = match &opts.config {
        Some(p) => read_config(p)?,
        None => (FileOpts::default(), None),
    };
    let records = opts.records.or(file.records);
    let truths = opts.truths.or(file.truths);
    let scenario_path = opts.scenario.or(file.scenario);
    let seed = opts.seed.or(file.seed);

    let input = match (records, truths) {
        (Some(records), Some(truths)) => Input::Files { records, truths },
        (Some(_), None) | (None, Some(_)) => {
            return Err(config_error("--records and --truths must be given together"));
        }
        (None, None) => {
            let scenario = match scenario_path {
                Some(p) => report::load_scenario(&p)?,
                None => file_scenario.ok_or_else(|| config_error("no input: give --records/--truths or a scenario"))?,
            };
            Input::Scenario(match seed {
                Some(s) => scenario.with_seed(s),
                None => scenario,
            })
        }
    };
    let out_dir = opts.out_dir.or(file.out_dir).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    let mut config = RunConfig::new(command, input, out_dir);
    macro_rules! layer {
        ($($field:ident),*) => {
            $(if let Some(v) = opts.$field.or(file.$field) { config.$field = v; })*
        };
    }
    layer!(min_prior, alpha_grid, bootstrap, dip_replicates, n_min);
    if let Some(m) = opts.error_mode.or(file.error_mode) {
        config.error_mode = match m {
            ErrorModeArg::Absolute => ErrorMode::Absolute,
            ErrorModeArg::Percent => ErrorMode::Percent,
        };
    }
    if let Some(m) = opts.resample_mode.or(file.resample_mode) {
        config.resample_mode = match m {
            ResampleArg::Pooled => ResampleMode::Pooled,
            ResampleArg::Stratified => ResampleMode::Stratified,
        };
    }
    config.seed = seed.unwrap_or(report::DEFAULT_SEED);
    config.threads = opts.threads.or(file.threads);
    config.null_cache = opts.null_cache.or(file.null_cache);
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, opts) = match cli.command {
        Cmd::Analyze(o) => (Command::Analyze, o),
        Cmd::Sweep(o) => (Command::Sweep, o),
        Cmd::Unimodality(o) => (Command::Unimodality, o),
        Cmd::Simulate(o) => (Command::Simulate, o),
        Cmd::All(o) => (Command::All, o),
    };
    let result = build_config(command, opts).and_then(|config| report::run(&config).map(|_| config.out_dir));
    match result {
        Ok(out) => {
            println!("wrote {}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("woc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
