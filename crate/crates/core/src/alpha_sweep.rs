//! Threshold subsets and the bootstrap distribution of mean improvement.
//!
//! For a threshold `alpha` the subset holds records with social weight
//! between zero and `alpha` (same sign). Within each round the subset's
//! pre- and post-social predictions are averaged, and the round improves
//! when the averaged post-social prediction is closer to the truth. The
//! sweep statistic is the unweighted mean of round improvements.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, Round};
use crate::rng;
use crate::social_weight::{ErrorMode, SocialWeightResult};

pub const DEFAULT_BOOTSTRAP: usize = 100;
pub const DEFAULT_GRID_POINTS: usize = 41;
pub const CI_LOW: f64 = 0.025;
pub const CI_HIGH: f64 = 0.975;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlphaError {
    #[error("alpha {0} outside [-1, 1]")]
    AlphaOutOfRange(f64),
    #[error("no rounds to average")]
    NoRounds,
    #[error("alpha {0} selects no records")]
    EmptySubset(f64),
    #[error("bootstrap count must be at least 1")]
    NoReplicates,
    #[error("record {0} not found in dataset")]
    UnknownRecord(String),
}

fn check_alpha(alpha: f64) -> Result<(), AlphaError> {
    if (-1.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(AlphaError::AlphaOutOfRange(alpha))
    }
}

/// Band membership for a single social weight.
pub fn admits(alpha: f64, sw: f64) -> bool {
    if alpha > 0.0 {
        (0.0..=alpha).contains(&sw)
    } else if alpha < 0.0 {
        (alpha..=0.0).contains(&sw)
    } else {
        sw == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilteredSubset {
    pub alpha: f64,
    pub record_ids: BTreeSet<String>,
}

impl FilteredSubset {
    pub fn len(&self) -> usize {
        self.record_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.record_ids.is_empty()
    }
}

/// Usable records whose social weight falls in the `alpha` band.
pub fn filter_by_alpha(results: &[SocialWeightResult], alpha: f64) -> Result<FilteredSubset, AlphaError> {
    check_alpha(alpha)?;
    let record_ids = results
        .iter()
        .filter(|r| r.is_usable() && r.sw.is_some_and(|sw| admits(alpha, sw)))
        .map(|r| r.record_id.clone())
        .collect();
    Ok(FilteredSubset { alpha, record_ids })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundImprovement {
    pub round_id: String,
    pub mean_pre: f64,
    pub mean_post: f64,
    pub err_pre: f64,
    pub err_post: f64,
    pub improvement: f64,
    pub n: usize,
}

impl RoundImprovement {
    fn from_sums(round: &Round, sum_pre: f64, sum_post: f64, n: usize, mode: ErrorMode) -> Self {
        let mean_pre = sum_pre / n as f64;
        let mean_post = sum_post / n as f64;
        let err_pre = mode.error(mean_pre, round.truth);
        let err_post = mode.error(mean_post, round.truth);
        Self {
            round_id: round.round_id.clone(),
            mean_pre,
            mean_post,
            err_pre,
            err_post,
            improvement: err_pre - err_post,
            n,
        }
    }
}

/// Aggregate improvement of one round restricted to the subset, or `None`
/// when no record of the round is in it.
pub fn round_improvement(round: &Round, subset: &FilteredSubset, mode: ErrorMode) -> Option<RoundImprovement> {
    let (mut sum_pre, mut sum_post, mut n) = (0.0, 0.0, 0);
    for r in round.records.iter().filter(|r| subset.record_ids.contains(&r.record_id)) {
        sum_pre += r.pre_social;
        sum_post += r.post_social;
        n += 1;
    }
    (n > 0).then(|| RoundImprovement::from_sums(round, sum_pre, sum_post, n, mode))
}

/// Each round counts once regardless of its size.
pub fn mean_improvement(per_round: &[RoundImprovement]) -> Result<f64, AlphaError> {
    if per_round.is_empty() {
        return Err(AlphaError::NoRounds);
    }
    Ok(per_round.iter().map(|r| r.improvement).sum::<f64>() / per_round.len() as f64)
}

/// What a bootstrap replicate resamples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleMode {
    /// Draw from all subset records at once, then regroup by round.
    #[default]
    Pooled,
    /// Draw within each round, keeping its subset size.
    Stratified,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub seed: u64,
    pub resample: ResampleMode,
    pub error_mode: ErrorMode,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self { replicates: DEFAULT_BOOTSTRAP, seed: 0, resample: ResampleMode::Pooled, error_mode: ErrorMode::Absolute }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointFlag {
    Ok,
    /// `alpha = 0`: only records that did not move.
    Degenerate,
    EmptySubset,
}

impl PointFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            PointFlag::Ok => "ok",
            PointFlag::Degenerate => "degenerate",
            PointFlag::EmptySubset => "empty_subset",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSweepPoint {
    pub alpha: f64,
    pub mean_improvement: Option<f64>,
    pub bootstrap_samples: Vec<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub n_records: usize,
    /// Rounds contributing to the plug-in estimate.
    pub n_rounds: usize,
    /// Rounds with no subset member.
    pub n_empty_rounds: usize,
    pub flag: PointFlag,
}

impl AlphaSweepPoint {
    fn empty(alpha: f64, n_rounds: usize) -> Self {
        Self {
            alpha,
            mean_improvement: None,
            bootstrap_samples: Vec::new(),
            ci_low: None,
            ci_high: None,
            n_records: 0,
            n_rounds: 0,
            n_empty_rounds: n_rounds,
            flag: PointFlag::EmptySubset,
        }
    }

    pub fn bootstrap_mean(&self) -> Option<f64> {
        (!self.bootstrap_samples.is_empty())
            .then(|| self.bootstrap_samples.iter().sum::<f64>() / self.bootstrap_samples.len() as f64)
    }
}

/// Percentile with linear interpolation between order statistics
/// (`h = (n - 1) q`). `sorted` must be non-empty and ascending.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Subset members grouped by round, ready for resampling.
struct Members<'a> {
    rounds: Vec<&'a Round>,
    /// `(pre, post)` per round, parallel to `rounds`.
    values: Vec<Vec<(f64, f64)>>,
    /// `(round slot, position)` for pooled draws.
    flat: Vec<(usize, usize)>,
}

impl<'a> Members<'a> {
    fn collect(dataset: &'a Dataset, results: &[SocialWeightResult], alpha: f64) -> Result<Self, AlphaError> {
        let subset = filter_by_alpha(results, alpha)?;
        let mut rounds = Vec::new();
        let mut values = Vec::new();
        for round in &dataset.rounds {
            let v: Vec<(f64, f64)> = round
                .records
                .iter()
                .filter(|r| subset.record_ids.contains(&r.record_id))
                .map(|r| (r.pre_social, r.post_social))
                .collect();
            if !v.is_empty() {
                rounds.push(round);
                values.push(v);
            }
        }
        let found: usize = values.iter().map(Vec::len).sum();
        if found != subset.len() {
            let known: HashMap<&str, ()> = dataset.records().map(|(_, r)| (r.record_id.as_str(), ())).collect();
            let missing = subset.record_ids.iter().find(|id| !known.contains_key(id.as_str()));
            return Err(AlphaError::UnknownRecord(missing.cloned().unwrap_or_default()));
        }
        let flat = values.iter().enumerate().flat_map(|(s, v)| (0..v.len()).map(move |i| (s, i))).collect();
        Ok(Self { rounds, values, flat })
    }

    fn plug_in(&self, mode: ErrorMode) -> f64 {
        let per_round: Vec<f64> = self
            .values
            .iter()
            .zip(&self.rounds)
            .map(|(v, round)| {
                let (sp, sq) = v.iter().fold((0.0, 0.0), |(a, b), &(p, q)| (a + p, b + q));
                RoundImprovement::from_sums(round, sp, sq, v.len(), mode).improvement
            })
            .collect();
        per_round.iter().sum::<f64>() / per_round.len() as f64
    }

    fn replicate(&self, rng: &mut impl Rng, config: &BootstrapConfig) -> f64 {
        let slots = self.rounds.len();
        let mut sums = vec![(0.0f64, 0.0f64, 0usize); slots];
        match config.resample {
            ResampleMode::Pooled => {
                for _ in 0..self.flat.len() {
                    let (s, i) = self.flat[rng.random_range(0..self.flat.len())];
                    let (p, q) = self.values[s][i];
                    let e = &mut sums[s];
                    e.0 += p;
                    e.1 += q;
                    e.2 += 1;
                }
            }
            ResampleMode::Stratified => {
                for (s, v) in self.values.iter().enumerate() {
                    for _ in 0..v.len() {
                        let (p, q) = v[rng.random_range(0..v.len())];
                        let e = &mut sums[s];
                        e.0 += p;
                        e.1 += q;
                        e.2 += 1;
                    }
                }
            }
        }
        let (mut total, mut count) = (0.0, 0usize);
        for (round, &(sp, sq, n)) in self.rounds.iter().zip(&sums) {
            if n > 0 {
                total += RoundImprovement::from_sums(round, sp, sq, n, config.error_mode).improvement;
                count += 1;
            }
        }
        total / count as f64
    }
}

/// Replicates for different thresholds use different streams; the same
/// threshold always gets the same one.
fn alpha_seed(seed: u64, alpha: f64) -> u64 {
    seed ^ rng::mix(alpha.to_bits())
}

fn bootstrap_point(
    dataset: &Dataset,
    results: &[SocialWeightResult],
    alpha: f64,
    config: &BootstrapConfig,
) -> Result<AlphaSweepPoint, AlphaError> {
    if config.replicates == 0 {
        return Err(AlphaError::NoReplicates);
    }
    let members = Members::collect(dataset, results, alpha)?;
    if members.flat.is_empty() {
        return Ok(AlphaSweepPoint::empty(alpha, dataset.rounds.len()));
    }
    let seed = alpha_seed(config.seed, alpha);
    let samples: Vec<f64> = (0..config.replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng::stream(seed, rng::domain::BOOTSTRAP, b as u64);
            members.replicate(&mut rng, config)
        })
        .collect();
    let mut sorted = samples.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(AlphaSweepPoint {
        alpha,
        mean_improvement: Some(members.plug_in(config.error_mode)),
        bootstrap_samples: samples,
        ci_low: Some(percentile(&sorted, CI_LOW)),
        ci_high: Some(percentile(&sorted, CI_HIGH)),
        n_records: members.flat.len(),
        n_rounds: members.rounds.len(),
        n_empty_rounds: dataset.rounds.len() - members.rounds.len(),
        flag: if alpha == 0.0 { PointFlag::Degenerate } else { PointFlag::Ok },
    })
}

/// Plug-in mean improvement for the `alpha` subset with its bootstrap
/// distribution and 95% percentile interval.
pub fn bootstrap_improvement(
    dataset: &Dataset,
    results: &[SocialWeightResult],
    alpha: f64,
    config: &BootstrapConfig,
) -> Result<AlphaSweepPoint, AlphaError> {
    let point = bootstrap_point(dataset, results, alpha, config)?;
    if point.flag == PointFlag::EmptySubset {
        return Err(AlphaError::EmptySubset(alpha));
    }
    Ok(point)
}

/// One point per grid value, ordered by alpha. Empty subsets yield
/// flagged points instead of errors.
pub fn sweep_alpha(
    dataset: &Dataset,
    results: &[SocialWeightResult],
    grid: &[f64],
    config: &BootstrapConfig,
) -> Result<Vec<AlphaSweepPoint>, AlphaError> {
    grid.iter().try_for_each(|&a| check_alpha(a))?;
    let mut points = grid
        .par_iter()
        .map(|&alpha| bootstrap_point(dataset, results, alpha, config))
        .collect::<Result<Vec<_>, _>>()?;
    points.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    Ok(points)
}

/// `points` evenly spaced values from -1 to 1, with exact endpoints and
/// an exact zero when `points` is odd.
pub fn default_grid(points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => {
            let half = (points - 1) as f64 / 2.0;
            (0..points).map(|k| (k as f64 - half) / half).collect()
        }
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// `alpha,mean_improvement,ci_low,ci_high,n_records,flag`
pub fn write_sweep_csv(points: &[AlphaSweepPoint], writer: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["alpha", "mean_improvement", "ci_low", "ci_high", "n_records", "flag"])?;
    for p in points {
        w.write_record([
            p.alpha.to_string(),
            opt(p.mean_improvement),
            opt(p.ci_low),
            opt(p.ci_high),
            p.n_records.to_string(),
            p.flag.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_json(points: &[AlphaSweepPoint], writer: impl Write) -> serde_json::Result<()> {
    serde_json::to_writer_pretty(writer, points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::PredictionRecord;
    use crate::social_weight::Direction;
    use proptest::prelude::*;

    fn result(id: &str, sw: Option<f64>) -> SocialWeightResult {
        SocialWeightResult {
            record_id: id.into(),
            round_id: "r1".into(),
            user_id: id.into(),
            sw,
            direction: Direction::of(sw),
            individual_improvement: 0.0,
            geomean: Some(1.0),
            exclusion: None,
        }
    }

    fn ids(s: &FilteredSubset) -> Vec<&str> {
        s.record_ids.iter().map(String::as_str).collect()
    }

    #[test]
    fn filter_examples() {
        let rs = [result("a", Some(-0.5)), result("b", Some(0.0)), result("c", Some(0.3)), result("d", Some(0.9))];
        assert_eq!(ids(&filter_by_alpha(&rs, 0.5).unwrap()), ["b", "c"]);
        assert_eq!(ids(&filter_by_alpha(&rs, -0.5).unwrap()), ["a", "b"]);
        assert_eq!(ids(&filter_by_alpha(&rs, 0.0).unwrap()), ["b"]);
        assert_eq!(filter_by_alpha(&rs, 1.5), Err(AlphaError::AlphaOutOfRange(1.5)));
        let undefined = [result("u", None)];
        assert!(filter_by_alpha(&undefined, 1.0).unwrap().is_empty());
    }

    fn rec(id: &str, pre: f64, post: f64) -> PredictionRecord {
        PredictionRecord {
            record_id: id.into(),
            round_id: "r1".into(),
            user_id: id.into(),
            timestamp: 0,
            pre_social: pre,
            post_social: post,
            confidence: None,
            shown_sample: None,
            shown_geomean: None,
        }
    }

    fn subset(ids: &[&str]) -> FilteredSubset {
        FilteredSubset { alpha: 1.0, record_ids: ids.iter().map(|s| s.to_string()).collect() }
    }

    #[test]
    fn round_improvement_examples() {
        let round = Round::new("r1", 100.0, vec![rec("a", 80.0, 90.0), rec("b", 90.0, 100.0), rec("c", 500.0, 1.0)])
            .unwrap();
        let ri = round_improvement(&round, &subset(&["a", "b"]), ErrorMode::Absolute).unwrap();
        assert_eq!((ri.mean_pre, ri.err_pre, ri.mean_post, ri.err_post), (85.0, 15.0, 95.0, 5.0));
        assert_eq!(ri.improvement, 10.0);
        assert_eq!(ri.n, 2);

        let still = Round::new("r1", 100.0, vec![rec("a", 80.0, 80.0), rec("b", 130.0, 130.0)]).unwrap();
        assert_eq!(round_improvement(&still, &subset(&["a", "b"]), ErrorMode::Absolute).unwrap().improvement, 0.0);
        assert_eq!(round_improvement(&round, &subset(&["zz"]), ErrorMode::Absolute), None);
    }

    fn ri(improvement: f64) -> RoundImprovement {
        RoundImprovement {
            round_id: "r".into(),
            mean_pre: 0.0,
            mean_post: 0.0,
            err_pre: 0.0,
            err_post: 0.0,
            improvement,
            n: 1,
        }
    }

    #[test]
    fn mean_improvement_examples() {
        assert_eq!(mean_improvement(&[ri(10.0), ri(-4.0)]), Ok(3.0));
        assert_eq!(mean_improvement(&[ri(7.0)]), Ok(7.0));
        assert_eq!(mean_improvement(&[ri(0.0), ri(0.0)]), Ok(0.0));
        assert_eq!(mean_improvement(&[]), Err(AlphaError::NoRounds));
    }

    fn small_dataset() -> (Dataset, Vec<SocialWeightResult>) {
        let r1 = Round::new("r1", 100.0, vec![rec("a", 80.0, 90.0), rec("b", 90.0, 100.0), rec("c", 120.0, 95.0)])
            .unwrap();
        let mut r2_recs = vec![rec("d", 60.0, 70.0), rec("e", 150.0, 120.0)];
        for r in &mut r2_recs {
            r.round_id = "r2".into();
        }
        let r2 = Round::new("r2", 100.0, r2_recs).unwrap();
        let ds = Dataset::new(vec![r1, r2], vec![]).unwrap();
        let sws = [0.2, 0.4, 0.6, -0.3, 0.8];
        let results =
            ["a", "b", "c", "d", "e"].iter().zip(sws).map(|(id, sw)| result(id, Some(sw))).collect();
        (ds, results)
    }

    #[test]
    fn singleton_subset_is_constant() {
        let (ds, results) = small_dataset();
        let cfg = BootstrapConfig { replicates: 50, seed: 3, ..Default::default() };
        let p = bootstrap_improvement(&ds, &results, -0.3, &cfg).unwrap();
        assert_eq!(p.n_records, 1);
        let m = p.mean_improvement.unwrap();
        assert!(p.bootstrap_samples.iter().all(|&x| x == m));
        assert_eq!((p.ci_low, p.ci_high), (Some(m), Some(m)));
        assert_eq!(p.n_empty_rounds, 1);
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let (ds, results) = small_dataset();
        for resample in [ResampleMode::Pooled, ResampleMode::Stratified] {
            let cfg = BootstrapConfig { replicates: 200, seed: 11, resample, ..Default::default() };
            let a = bootstrap_improvement(&ds, &results, 1.0, &cfg).unwrap();
            let b = bootstrap_improvement(&ds, &results, 1.0, &cfg).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.bootstrap_samples.len(), 200);
            assert!(a.ci_low <= a.ci_high);
        }
    }

    #[test]
    fn empty_subset() {
        let (ds, results) = small_dataset();
        let cfg = BootstrapConfig::default();
        assert_eq!(bootstrap_improvement(&ds, &results, -0.1, &cfg), Err(AlphaError::EmptySubset(-0.1)));
        let pts = sweep_alpha(&ds, &results, &[-0.1, 0.0], &cfg).unwrap();
        assert!(pts.iter().all(|p| p.flag == PointFlag::EmptySubset));
    }

    #[test]
    fn sweep_composition_and_order() {
        let (ds, results) = small_dataset();
        let cfg = BootstrapConfig { replicates: 30, seed: 5, ..Default::default() };
        assert!(sweep_alpha(&ds, &results, &[], &cfg).unwrap().is_empty());
        let single = sweep_alpha(&ds, &results, &[0.5], &cfg).unwrap();
        assert_eq!(single[0], bootstrap_improvement(&ds, &results, 0.5, &cfg).unwrap());
        let pts = sweep_alpha(&ds, &results, &[1.0, -1.0, 0.5], &cfg).unwrap();
        assert_eq!(pts.iter().map(|p| p.alpha).collect::<Vec<_>>(), [-1.0, 0.5, 1.0]);
        assert!(sweep_alpha(&ds, &results, &[2.0], &cfg).is_err());
    }

    #[test]
    fn percentile_matches_linear_interpolation() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile(&xs, 0.0), 1.0);
        assert_eq!(percentile(&xs, 1.0), 5.0);
        assert_eq!(percentile(&xs, 0.5), 3.0);
        assert!((percentile(&xs, 0.025) - 1.1).abs() < 1e-12);
        assert_eq!(percentile(&[7.0], 0.975), 7.0);
    }

    #[test]
    fn grid() {
        let g = default_grid(41);
        assert_eq!(g.len(), 41);
        assert_eq!((g[0], g[20], g[40]), (-1.0, 0.0, 1.0));
        assert_eq!(g[25], 0.25);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn csv_output() {
        let (ds, results) = small_dataset();
        let cfg = BootstrapConfig { replicates: 10, seed: 1, ..Default::default() };
        let pts = sweep_alpha(&ds, &results, &[-0.1, 1.0], &cfg).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&pts, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "alpha,mean_improvement,ci_low,ci_high,n_records,flag");
        assert_eq!(lines[1], "-0.1,,,,0,empty_subset");
        assert!(lines[2].ends_with(",4,ok"));
    }

    proptest! {
        #[test]
        fn subsets_nest(sws in prop::collection::vec(-1.5..1.5f64, 0..40), a1 in 0.0..1.0f64, a2 in 0.0..1.0f64) {
            let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
            prop_assume!(lo > 0.0);
            let rs: Vec<_> = sws.iter().enumerate().map(|(i, &s)| result(&i.to_string(), Some(s))).collect();
            let small = filter_by_alpha(&rs, lo).unwrap();
            let big = filter_by_alpha(&rs, hi).unwrap();
            prop_assert!(small.record_ids.is_subset(&big.record_ids));
            let small = filter_by_alpha(&rs, -lo).unwrap();
            let big = filter_by_alpha(&rs, -hi).unwrap();
            prop_assert!(small.record_ids.is_subset(&big.record_ids));
        }

        #[test]
        fn improvement_identity(pre in prop::collection::vec(1.0..500.0f64, 1..10), shift in -50.0..50.0f64, truth in 1.0..500.0f64) {
            let recs: Vec<_> = pre.iter().enumerate().map(|(i, &p)| rec(&i.to_string(), p, (p + shift).max(0.5))).collect();
            let all: Vec<String> = recs.iter().map(|r| r.record_id.clone()).collect();
            let round = Round::new("r1", truth, recs).unwrap();
            let s = FilteredSubset { alpha: 1.0, record_ids: all.into_iter().collect() };
            for mode in [ErrorMode::Absolute, ErrorMode::Percent] {
                let ri = round_improvement(&round, &s, mode).unwrap();
                prop_assert_eq!(ri.improvement, ri.err_pre - ri.err_post);
            }
        }

        #[test]
        fn replicates_stay_in_range(seed in any::<u64>()) {
            // Both members sit 10 below their post-social value and under
            // the truth, so any mix of them improves the round by 10.
            let (ds, results) = small_dataset();
            let cfg = BootstrapConfig { replicates: 20, seed, ..Default::default() };
            let p = bootstrap_improvement(&ds, &results, 0.5, &cfg).unwrap();
            prop_assert_eq!(p.n_records, 2);
            prop_assert!(p.bootstrap_samples.iter().all(|&x| (x - 10.0).abs() < 1e-12));
        }
    }
}
