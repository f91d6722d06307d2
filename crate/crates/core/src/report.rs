//! End-to-end runs and report files.
//!
//! A run reads or simulates a dataset, computes social weights, and
//! depending on the command runs the threshold sweep and the unimodality
//! analysis. Everything is written into a staging directory next to the
//! output directory and renamed into place once complete, so a failed run
//! leaves no partial output.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::alpha_sweep::{self, AlphaError, AlphaSweepPoint, BootstrapConfig, ResampleMode};
use crate::dataset::{self, Dataset, DatasetError};
use crate::dip::{self, DipError, DipResult, NullCache};
use crate::sim::{self, Scenario, SimError};
use crate::social_weight::{self, ErrorMode, Exclusion, SignSummary};
use crate::unimodality::{self, UnimodalityClass, UnimodalityError};

pub const SCHEMA_VERSION: u32 = 1;
pub const REPORT_FILE: &str = "report.json";
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("{}: {source}", path.display())]
    Dataset { path: PathBuf, source: DatasetError },
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error(transparent)]
    Dip(#[from] DipError),
    #[error(transparent)]
    Alpha(#[from] AlphaError),
    #[error(transparent)]
    Unimodality(#[from] UnimodalityError),
}

impl ReportError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            ReportError::Config(_) => 2,
            ReportError::Io { .. } => 3,
            ReportError::Dataset { .. } => 4,
            ReportError::Simulation(_) => 5,
            ReportError::Dip(_) => 6,
            ReportError::Alpha(_) => 7,
            ReportError::Unimodality(_) => 8,
        }
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> ReportError {
    ReportError::Io { path: path.to_path_buf(), message: e.to_string() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Analyze,
    Sweep,
    Unimodality,
    Simulate,
    All,
}

impl Command {
    fn sweeps(self) -> bool {
        matches!(self, Command::Sweep | Command::All)
    }

    fn tests_unimodality(self) -> bool {
        matches!(self, Command::Unimodality | Command::All)
    }
}

/// Either an evenly spaced grid over `[-1, 1]` or explicit values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaGrid {
    Points(usize),
    Values(Vec<f64>),
}

impl Default for AlphaGrid {
    fn default() -> Self {
        AlphaGrid::Points(alpha_sweep::DEFAULT_GRID_POINTS)
    }
}

impl AlphaGrid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            AlphaGrid::Points(n) => alpha_sweep::default_grid(*n),
            AlphaGrid::Values(v) => v.clone(),
        }
    }
}

impl std::str::FromStr for AlphaGrid {
    type Err = String;

    /// `41` or `-1,-0.5,0,0.5,1`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Ok(n) = s.parse::<usize>() {
            return Ok(AlphaGrid::Points(n));
        }
        s.split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|e| format!("bad alpha value {v:?}: {e}")))
            .collect::<Result<Vec<_>, _>>()
            .map(AlphaGrid::Values)
    }
}

/// Where the dataset comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum Input {
    Files { records: PathBuf, truths: PathBuf },
    Scenario(Scenario),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub input: Input,
    pub out_dir: PathBuf,
    pub min_prior: usize,
    pub alpha_grid: AlphaGrid,
    pub bootstrap: usize,
    pub dip_replicates: usize,
    pub n_min: usize,
    pub error_mode: ErrorMode,
    pub resample_mode: ResampleMode,
    pub seed: u64,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    /// Null distributions reused across runs.
    pub null_cache: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(command: Command, input: Input, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            command,
            input,
            out_dir: out_dir.into(),
            min_prior: dataset::DEFAULT_MIN_PRIOR,
            alpha_grid: AlphaGrid::default(),
            bootstrap: alpha_sweep::DEFAULT_BOOTSTRAP,
            dip_replicates: dip::DEFAULT_REPLICATES,
            n_min: dip::DEFAULT_MIN_SAMPLE,
            error_mode: ErrorMode::Absolute,
            resample_mode: ResampleMode::Pooled,
            seed: DEFAULT_SEED,
            threads: None,
            null_cache: None,
        }
    }

    /// Checks counts and paths before any work starts.
    pub fn validate(&self) -> Result<(), ReportError> {
        let positive = [
            ("min-prior", self.min_prior),
            ("bootstrap", self.bootstrap),
            ("dip-replicates", self.dip_replicates),
            ("n-min", self.n_min),
            ("threads", self.threads.unwrap_or(1)),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(ReportError::Config(format!("{name} must be at least 1")));
        }
        if self.command.tests_unimodality() && self.dip_replicates < dip::MIN_REPLICATES {
            return Err(ReportError::Config(format!("dip-replicates must be at least {}", dip::MIN_REPLICATES)));
        }
        if let Some(a) = self.alpha_grid.values().into_iter().find(|a| !(-1.0..=1.0).contains(a)) {
            return Err(ReportError::Config(format!("alpha {a} outside [-1, 1]")));
        }
        match &self.input {
            Input::Files { records, truths } => {
                if self.command == Command::Simulate {
                    return Err(ReportError::Config("simulate needs a scenario, not input files".into()));
                }
                for p in [records, truths] {
                    File::open(p).map_err(|e| io_error(p, e))?;
                }
            }
            Input::Scenario(s) => s.validate()?,
        }
        let parent = staging_parent(&self.out_dir);
        if !parent.is_dir() {
            return Err(io_error(&parent, "output parent directory does not exist"));
        }
        if self.out_dir.exists() && !self.out_dir.is_dir() {
            return Err(io_error(&self.out_dir, "exists and is not a directory"));
        }
        Ok(())
    }
}

fn staging_parent(out_dir: &Path) -> PathBuf {
    match out_dir.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// Reads a scenario from JSON, or TOML when the extension is `.toml`.
pub fn load_scenario(path: &Path) -> Result<Scenario, ReportError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    let parsed = if is_toml {
        toml::from_str(&text).map_err(|e| e.to_string())
    } else {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| ReportError::Config(format!("{}: {e}", path.display())))
}

/// Serializes and re-parses, so a simulated dataset is analysed exactly as
/// it would be after a round trip through files.
pub fn canonicalize(dataset: &Dataset) -> Result<Dataset, ReportError> {
    let (mut records, mut truths) = (Vec::new(), Vec::new());
    let csv_path = Path::new("<memory>");
    let wrap = |source| ReportError::Dataset { path: csv_path.to_path_buf(), source };
    dataset.write_csv(&mut records, &mut truths).map_err(wrap)?;
    let mut parsed = dataset::parse_dataset(records.as_slice(), truths.as_slice()).map_err(wrap)?;
    parsed.meta = dataset.meta.clone();
    Ok(parsed)
}

fn read_dataset(records: &Path, truths: &Path) -> Result<Dataset, ReportError> {
    let open = |p: &Path| File::open(p).map(BufReader::new).map_err(|e| io_error(p, e));
    let (r, t) = (open(records)?, open(truths)?);
    let mut ds = dataset::parse_dataset(r, t).map_err(|source| {
        let path = match &source {
            DatasetError::MalformedRow { file: dataset::Source::Truths, .. }
            | DatasetError::NonPositivePrice { file: dataset::Source::Truths, .. } => truths,
            _ => records,
        };
        ReportError::Dataset { path: path.to_path_buf(), source }
    })?;
    ds.meta = vec![format!("records {}", records.display()), format!("truths {}", truths.display())];
    Ok(ds)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExclusionEntry {
    pub record_id: String,
    pub reason: Exclusion,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Counts {
    pub rounds: usize,
    pub records: usize,
    pub sw_defined: usize,
    /// Defined weights outside `[-1, 1]`, never selected by any threshold.
    pub sw_out_of_range: usize,
    pub insufficient_prior: usize,
    pub undefined_sw: usize,
    pub dip_indeterminate: usize,
    pub uni: usize,
    pub non_uni: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassSummary {
    pub k: UnimodalityClass,
    pub n_improved: usize,
    pub n_worsened: usize,
    pub n_unchanged: usize,
    pub test: Option<unimodality::ProportionTestResult>,
    pub curve_mean: Option<f64>,
    pub per_round: Vec<unimodality::RoundProportion>,
}

/// Summary of one run, as written to `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: Command,
    pub settings: serde_json::Value,
    pub counts: Counts,
    pub exclusions: Vec<ExclusionEntry>,
    pub sign_summary: SignSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Vec<AlphaSweepPoint>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unimodality: Option<Vec<ClassSummary>>,
    /// Where the data came from; differs between otherwise identical runs.
    pub provenance: Vec<String>,
}

/// Files produced by a run, keyed by relative path.
type Outputs = BTreeMap<String, Vec<u8>>;

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing CSV to memory");
    buf
}

fn settings(config: &RunConfig) -> serde_json::Value {
    json!({
        "min_prior": config.min_prior,
        "alpha_grid": config.alpha_grid,
        "bootstrap": config.bootstrap,
        "dip_replicates": config.dip_replicates,
        "n_min": config.n_min,
        "error_mode": config.error_mode,
        "resample_mode": config.resample_mode,
        "seed": config.seed,
    })
}

fn write_dataset_files(outputs: &mut Outputs, prefix: &str, ds: &Dataset) -> Result<(), ReportError> {
    let (mut records, mut truths) = (Vec::new(), Vec::new());
    ds.write_csv(&mut records, &mut truths)
        .map_err(|source| ReportError::Dataset { path: PathBuf::from(prefix), source })?;
    outputs.insert(format!("{prefix}records.csv"), records);
    outputs.insert(format!("{prefix}truths.csv"), truths);
    Ok(())
}

fn load_cache(config: &RunConfig) -> Result<NullCache, ReportError> {
    match &config.null_cache {
        Some(path) if path.exists() => {
            let file = File::open(path).map_err(|e| io_error(path, e))?;
            Ok(NullCache::load(BufReader::new(file), config.dip_replicates, config.seed)?)
        }
        _ => Ok(NullCache::new(config.dip_replicates, config.seed)?),
    }
}

fn save_cache(path: &Path, cache: &NullCache) -> Result<(), ReportError> {
    let dir = staging_parent(path);
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| io_error(&dir, e))?;
    cache.save(BufWriter::new(tmp.as_file_mut()))?;
    tmp.persist(path).map_err(|e| io_error(path, e))?;
    Ok(())
}

fn analyse(config: &RunConfig, outputs: &mut Outputs) -> Result<Report, ReportError> {
    let dataset = match &config.input {
        Input::Files { records, truths } => read_dataset(records, truths)?,
        Input::Scenario(scenario) => {
            let simulated = scenario.generate()?;
            let prefix = if config.command == Command::Simulate { "" } else { "data/" };
            write_dataset_files(outputs, prefix, &simulated.dataset)?;
            outputs.insert(
                format!("{prefix}ground_truth.csv"),
                csv_bytes(|b| sim::write_ground_truth_csv(&simulated.ground_truth, b)),
            );
            canonicalize(&simulated.dataset)?
        }
    };
    let mut report = Report {
        schema_version: SCHEMA_VERSION,
        command: config.command,
        settings: settings(config),
        counts: Counts { rounds: dataset.rounds.len(), records: dataset.n_records(), ..Counts::default() },
        exclusions: Vec::new(),
        sign_summary: SignSummary::default(),
        sweep: None,
        unimodality: None,
        provenance: dataset.meta.clone(),
    };
    if config.command == Command::Simulate {
        return Ok(report);
    }

    let mut results = social_weight::classify_records(&dataset, config.min_prior, config.error_mode);
    report.sign_summary = social_weight::sw_sign_summary(&results);
    outputs.insert("fig1a_sign_counts.csv".into(), csv_bytes(|b| report.sign_summary.write_csv(b)));

    if config.command.sweeps() {
        let bootstrap = BootstrapConfig {
            replicates: config.bootstrap,
            seed: config.seed,
            resample: config.resample_mode,
            error_mode: config.error_mode,
        };
        let points = alpha_sweep::sweep_alpha(&dataset, &results, &config.alpha_grid.values(), &bootstrap)?;
        outputs.insert("fig1b_alpha_sweep.csv".into(), csv_bytes(|b| alpha_sweep::write_sweep_csv(&points, b)));
        report.sweep = Some(points);
    }

    if config.command.tests_unimodality() {
        let mut cache = load_cache(config)?;
        let flags = unimodality::dip_flags(&dataset, &results, config.min_prior, config.n_min, &mut cache)?;
        if let Some(path) = &config.null_cache {
            save_cache(path, &cache)?;
        }
        let entries = unimodality::user_subset_improvements(&results, &flags)?;
        let mut classes = Vec::new();
        let mut curves = Vec::new();
        let mut table = Vec::new();
        for k in UnimodalityClass::ALL {
            let (i, w, u) = unimodality::class_counts(&entries, k);
            let test = unimodality::ProportionTestResult::from_counts(k, i, w, u).ok();
            let curve = unimodality::sorted_improvement_curve(&entries, k);
            table.push((k, test.clone(), (i, w, u)));
            classes.push(ClassSummary {
                k,
                n_improved: i,
                n_worsened: w,
                n_unchanged: u,
                test,
                curve_mean: curve.mean,
                per_round: unimodality::per_round_proportions(&entries, k),
            });
            curves.push(curve);
        }
        let by_round: Vec<_> = classes.iter().flat_map(|c| c.per_round.iter().cloned()).collect();
        outputs.insert("fig1c_proportions.csv".into(), csv_bytes(|b| unimodality::write_proportions_csv(&table, b)));
        outputs.insert("fig1c_proportions_by_round.csv".into(), csv_bytes(|b| write_round_proportions(&by_round, b)));
        outputs.insert("fig1d_sorted_improvements.csv".into(), csv_bytes(|b| unimodality::write_curves_csv(&curves, b)));
        outputs.insert("user_improvements.csv".into(), csv_bytes(|b| unimodality::write_entries_csv(&entries, b)));
        outputs.insert("dip_results.csv".into(), csv_bytes(|b| write_dip_csv(&flags, b)));
        for d in flags.values() {
            match UnimodalityClass::of(d.flag) {
                Some(UnimodalityClass::Uni) => report.counts.uni += 1,
                Some(UnimodalityClass::NonUni) => report.counts.non_uni += 1,
                None => {}
            }
        }
        for r in results.iter_mut().filter(|r| r.exclusion.is_none()) {
            if flags.get(&r.record_id).is_some_and(|d| d.flag == dip::DipFlag::Indeterminate) {
                r.exclusion = Some(Exclusion::DipIndeterminate);
            }
        }
        report.unimodality = Some(classes);
    }

    for r in &results {
        if let Some(w) = r.sw {
            report.counts.sw_defined += 1;
            if w.abs() > 1.0 {
                report.counts.sw_out_of_range += 1;
            }
        }
        if let Some(reason) = r.exclusion {
            match reason {
                Exclusion::InsufficientPrior => report.counts.insufficient_prior += 1,
                Exclusion::UndefinedSw => report.counts.undefined_sw += 1,
                Exclusion::DipIndeterminate => report.counts.dip_indeterminate += 1,
            }
            report.exclusions.push(ExclusionEntry { record_id: r.record_id.clone(), reason });
        }
    }
    outputs.insert("sw_results.csv".into(), csv_bytes(|b| social_weight::write_results_csv(&results, b)));
    Ok(report)
}

fn write_round_proportions(rows: &[unimodality::RoundProportion], writer: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["round_id", "k", "n_improved", "n_worsened", "n_unchanged", "p_hat", "z", "p_value"])?;
    for r in rows {
        let stats = match &r.test {
            Some(t) => [t.p_hat.to_string(), t.z.to_string(), t.p_value.to_string()],
            None => Default::default(),
        };
        w.write_record(
            [r.round_id.clone(), r.k.as_str().into(), r.n_improved.to_string(), r.n_worsened.to_string(), r.n_unchanged.to_string()]
                .into_iter()
                .chain(stats),
        )?;
    }
    w.flush()?;
    Ok(())
}

/// `record_id,n,dip,p_value,flag`
fn write_dip_csv(flags: &BTreeMap<String, DipResult>, writer: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["record_id", "n", "dip", "p_value", "flag"])?;
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for (id, d) in flags {
        w.write_record([id.clone(), d.n.to_string(), opt(d.dip), opt(d.p_value), d.flag.as_str().into()])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `outputs` to a fresh directory beside `out_dir`, then swaps it
/// into place.
fn commit(out_dir: &Path, outputs: &Outputs) -> Result<(), ReportError> {
    let parent = staging_parent(out_dir);
    let staging = tempfile::Builder::new()
        .prefix(".woc-staging-")
        .tempdir_in(&parent)
        .map_err(|e| io_error(&parent, e))?;
    for (name, bytes) in outputs {
        let path = staging.path().join(name);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        }
        fs::write(&path, bytes).map_err(|e| io_error(&path, e))?;
    }
    let mut old = None;
    if out_dir.exists() {
        let backup = tempfile::Builder::new()
            .prefix(".woc-previous-")
            .tempdir_in(&parent)
            .map_err(|e| io_error(&parent, e))?;
        // Only the unique name is needed; the rename replaces the empty dir.
        fs::rename(out_dir, backup.path()).map_err(|e| io_error(out_dir, e))?;
        old = Some(backup);
    }
    let staged = staging.keep();
    if let Err(e) = fs::rename(&staged, out_dir) {
        if let Some(backup) = &old {
            let _ = fs::rename(backup.path(), out_dir);
        }
        let _ = fs::remove_dir_all(&staged);
        return Err(io_error(out_dir, e));
    }
    drop(old);
    Ok(())
}

/// Runs the configured command and writes its outputs.
pub fn run(config: &RunConfig) -> Result<Report, ReportError> {
    config.validate()?;
    let work = || -> Result<(Report, Outputs), ReportError> {
        let mut outputs = Outputs::new();
        let report = analyse(config, &mut outputs)?;
        if config.command != Command::Simulate {
            let mut json = serde_json::to_vec_pretty(&report).map_err(|e| ReportError::Config(e.to_string()))?;
            json.push(b'\n');
            outputs.insert(REPORT_FILE.into(), json);
        }
        Ok((report, outputs))
    };
    let (report, outputs) = match config.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| ReportError::Config(e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    commit(&config.out_dir, &outputs)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{CrowdMode, ScenarioSpec, SwDistribution};

    fn scenario() -> Scenario {
        Scenario::Single(ScenarioSpec {
            n_rounds: 2,
            truth_per_round: vec![100.0, 40.0],
            n_agents: 30,
            sw_distribution: SwDistribution::TwoPoint { low: 0.0, high: 0.6, p_high: 0.7 },
            pre_bias: 0.1,
            pre_sigma: 0.3,
            crowd_mode: CrowdMode::Accurate,
            noise_sigma: 0.0,
            seed: 2,
            min_prior: 3,
        })
    }

    fn config(dir: &Path, command: Command) -> RunConfig {
        let mut c = RunConfig::new(command, Input::Scenario(scenario()), dir.join("out"));
        c.alpha_grid = AlphaGrid::Values(vec![-1.0, 0.0, 1.0]);
        c.bootstrap = 20;
        c.dip_replicates = 200;
        c
    }

    #[test]
    fn grid_parsing() {
        assert_eq!("41".parse::<AlphaGrid>(), Ok(AlphaGrid::Points(41)));
        assert_eq!("-1, 0.5".parse::<AlphaGrid>(), Ok(AlphaGrid::Values(vec![-1.0, 0.5])));
        assert!("a,b".parse::<AlphaGrid>().is_err());
    }

    #[test]
    fn every_exclusion_listed_once() {
        let dir = tempfile::tempdir().unwrap();
        let report = run(&config(dir.path(), Command::All)).unwrap();
        let ids: std::collections::BTreeSet<_> = report.exclusions.iter().map(|e| &e.record_id).collect();
        assert_eq!(ids.len(), report.exclusions.len());
        // Three cold-start agents per round, and shown crowds of size 3
        // are below the dip minimum.
        assert_eq!(report.counts.insufficient_prior, 6);
        assert_eq!(report.counts.dip_indeterminate, 2);
        let c = &report.counts;
        assert_eq!(c.uni + c.non_uni + c.dip_indeterminate + c.insufficient_prior + c.undefined_sw, c.records);
        for f in ["report.json", "sw_results.csv", "fig1b_alpha_sweep.csv", "data/records.csv", "dip_results.csv"] {
            assert!(dir.path().join("out").join(f).is_file(), "{f}");
        }
    }

    #[test]
    fn rerun_replaces_output() {
        let dir = tempfile::tempdir().unwrap();
        let c = config(dir.path(), Command::Analyze);
        fs::create_dir(&c.out_dir).unwrap();
        fs::write(c.out_dir.join("stale.txt"), "x").unwrap();
        run(&c).unwrap();
        assert!(!c.out_dir.join("stale.txt").exists());
        assert!(c.out_dir.join("report.json").is_file());
        let leftovers = fs::read_dir(dir.path()).unwrap().count();
        assert_eq!(leftovers, 1);
    }

    #[test]
    fn failure_leaves_no_output() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = config(dir.path(), Command::All);
        c.alpha_grid = AlphaGrid::Values(vec![2.0]);
        assert!(matches!(run(&c), Err(ReportError::Config(_))));
        assert!(!c.out_dir.exists());
        c.alpha_grid = AlphaGrid::default();
        c.input = Input::Files { records: dir.path().join("r.csv"), truths: dir.path().join("missing.csv") };
        let err = run(&c).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("r.csv"));
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn simulate_writes_dataset_only() {
        let dir = tempfile::tempdir().unwrap();
        run(&config(dir.path(), Command::Simulate)).unwrap();
        let mut names: Vec<_> =
            fs::read_dir(dir.path().join("out")).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
        names.sort();
        assert_eq!(names, ["ground_truth.csv", "records.csv", "truths.csv"]);
    }

    #[test]
    fn null_cache_is_reused() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = config(dir.path(), Command::Unimodality);
        c.null_cache = Some(dir.path().join("null.json"));
        let a = run(&c).unwrap();
        assert!(dir.path().join("null.json").is_file());
        let b = run(&c).unwrap();
        assert_eq!(a, b);
    }
}
