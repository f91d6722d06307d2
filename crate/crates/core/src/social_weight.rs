//! Social weight of a prediction revision.
//!
//! Under the log-linear revision model
//! `ln post = (1 - sw) ln pre + sw ln crowd`, the social weight is
//! `sw = (ln post - ln pre) / (ln crowd - ln pre)`, where `crowd` is the
//! geometric mean of the crowd sample the predictor saw. Positive values
//! move toward the crowd, negative values away from it. Values outside
//! `[-1, 1]` are kept as computed.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{self, Dataset, Snapshot};

pub const DEFAULT_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum SwError {
    #[error("prices must be positive (pre {pre}, post {post}, crowd {geomean})")]
    NonPositiveInput { pre: f64, post: f64, geomean: f64 },
}

/// Social weight, or `None` when the crowd sits on the pre-social
/// prediction (within `eps` in log space) but the prediction still moved.
/// No movement with no reference direction counts as zero weight.
pub fn compute_sw(pre: f64, post: f64, geomean: f64, eps: f64) -> Result<Option<f64>, SwError> {
    let positive = |x: f64| x.is_finite() && x > 0.0;
    if !(positive(pre) && positive(post) && positive(geomean)) {
        return Err(SwError::NonPositiveInput { pre, post, geomean });
    }
    let moved = post.ln() - pre.ln();
    let reference = geomean.ln() - pre.ln();
    if reference.abs() < eps {
        return Ok((moved.abs() < eps).then_some(0.0));
    }
    // `+ 0.0` folds a negative zero into zero.
    Ok(Some(moved / reference + 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    TowardCrowd,
    AwayFromCrowd,
    NoChange,
    Undefined,
}

impl Direction {
    pub fn of(sw: Option<f64>) -> Self {
        match sw {
            None => Direction::Undefined,
            Some(w) if w > 0.0 => Direction::TowardCrowd,
            Some(w) if w < 0.0 => Direction::AwayFromCrowd,
            Some(_) => Direction::NoChange,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::TowardCrowd => "toward_crowd",
            Direction::AwayFromCrowd => "away_from_crowd",
            Direction::NoChange => "no_change",
            Direction::Undefined => "undefined",
        }
    }
}

/// How a prediction's distance from the truth is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMode {
    /// `|p - truth|` in price units.
    #[default]
    Absolute,
    /// `100 |p - truth| / truth`.
    Percent,
}

impl ErrorMode {
    pub fn error(self, prediction: f64, truth: f64) -> f64 {
        let abs = (prediction - truth).abs();
        match self {
            ErrorMode::Absolute => abs,
            ErrorMode::Percent => 100.0 * abs / truth,
        }
    }

    /// Error before minus error after; positive means the revision helped.
    pub fn improvement(self, pre: f64, post: f64, truth: f64) -> f64 {
        self.error(pre, truth) - self.error(post, truth)
    }
}

/// Why a record drops out of part of the analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exclusion {
    /// Fewer than `min_prior` crowd predictions were available.
    InsufficientPrior,
    /// The crowd coincided with the pre-social prediction but the
    /// prediction moved.
    UndefinedSw,
    /// The shown sample was too small for the dip test.
    DipIndeterminate,
}

impl Exclusion {
    pub fn as_str(self) -> &'static str {
        match self {
            Exclusion::InsufficientPrior => "insufficient_prior",
            Exclusion::UndefinedSw => "undefined_sw",
            Exclusion::DipIndeterminate => "dip_indeterminate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocialWeightResult {
    pub record_id: String,
    pub round_id: String,
    pub user_id: String,
    pub sw: Option<f64>,
    pub direction: Direction,
    pub individual_improvement: f64,
    /// Geometric mean of the shown crowd, when there was one.
    pub geomean: Option<f64>,
    pub exclusion: Option<Exclusion>,
}

impl SocialWeightResult {
    /// Eligible for threshold filtering and the unimodality split.
    pub fn is_usable(&self) -> bool {
        self.exclusion.is_none() && self.sw.is_some()
    }
}

/// One result per record, in dataset order.
pub fn classify_records(dataset: &Dataset, min_prior: usize, mode: ErrorMode) -> Vec<SocialWeightResult> {
    dataset
        .rounds
        .par_iter()
        .flat_map_iter(|round| {
            (0..round.records.len()).map(move |i| {
                let r = &round.records[i];
                let improvement = mode.improvement(r.pre_social, r.post_social, round.truth);
                let (sw, geomean, exclusion) = match dataset::shown_crowd(round, i, min_prior) {
                    Snapshot::Insufficient { .. } => (None, None, Some(Exclusion::InsufficientPrior)),
                    Snapshot::Shown(crowd) => {
                        // Prices were validated positive on construction.
                        let sw = compute_sw(r.pre_social, r.post_social, crowd.geomean, DEFAULT_EPS)
                            .expect("validated prices");
                        let exclusion = sw.is_none().then_some(Exclusion::UndefinedSw);
                        (sw, Some(crowd.geomean), exclusion)
                    }
                };
                SocialWeightResult {
                    record_id: r.record_id.clone(),
                    round_id: round.round_id.clone(),
                    user_id: r.user_id.clone(),
                    sw,
                    direction: Direction::of(sw),
                    individual_improvement: improvement,
                    geomean,
                    exclusion,
                }
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Improved,
    Worsened,
    Unchanged,
}

impl Outcome {
    pub fn of(improvement: f64) -> Self {
        if improvement > 0.0 {
            Outcome::Improved
        } else if improvement < 0.0 {
            Outcome::Worsened
        } else {
            Outcome::Unchanged
        }
    }
}

/// Direction of movement against outcome, over records with a defined
/// social weight.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignSummary {
    pub toward_crowd: OutcomeCounts,
    pub away_from_crowd: OutcomeCounts,
    pub no_change: OutcomeCounts,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub improved: usize,
    pub worsened: usize,
    pub unchanged: usize,
}

impl OutcomeCounts {
    fn add(&mut self, outcome: Outcome) {
        match outcome {
            Outcome::Improved => self.improved += 1,
            Outcome::Worsened => self.worsened += 1,
            Outcome::Unchanged => self.unchanged += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.improved + self.worsened + self.unchanged
    }
}

impl SignSummary {
    pub fn get(&self, direction: Direction) -> Option<&OutcomeCounts> {
        match direction {
            Direction::TowardCrowd => Some(&self.toward_crowd),
            Direction::AwayFromCrowd => Some(&self.away_from_crowd),
            Direction::NoChange => Some(&self.no_change),
            Direction::Undefined => None,
        }
    }

    pub fn total(&self) -> usize {
        self.toward_crowd.total() + self.away_from_crowd.total() + self.no_change.total()
    }

    pub fn write_csv(&self, writer: impl Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["direction", "improved", "worsened", "unchanged"])?;
        for d in [Direction::TowardCrowd, Direction::AwayFromCrowd, Direction::NoChange] {
            let c = self.get(d).expect("defined direction");
            w.write_record([
                d.as_str().to_string(),
                c.improved.to_string(),
                c.worsened.to_string(),
                c.unchanged.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn sw_sign_summary(results: &[SocialWeightResult]) -> SignSummary {
    let mut summary = SignSummary::default();
    for r in results.iter().filter(|r| r.is_usable()) {
        let outcome = Outcome::of(r.individual_improvement);
        match r.direction {
            Direction::TowardCrowd => summary.toward_crowd.add(outcome),
            Direction::AwayFromCrowd => summary.away_from_crowd.add(outcome),
            Direction::NoChange => summary.no_change.add(outcome),
            Direction::Undefined => {}
        }
    }
    summary
}

/// `record_id,sw,direction,improvement,excluded_reason`
pub fn write_results_csv(results: &[SocialWeightResult], writer: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["record_id", "sw", "direction", "improvement", "excluded_reason"])?;
    for r in results {
        w.write_record([
            r.record_id.clone(),
            r.sw.map(|x| x.to_string()).unwrap_or_default(),
            r.direction.as_str().to_string(),
            r.individual_improvement.to_string(),
            r.exclusion.map(|e| e.as_str().to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{PredictionRecord, Round};
    use proptest::prelude::*;

    fn sw(pre: f64, post: f64, g: f64) -> Option<f64> {
        compute_sw(pre, post, g, DEFAULT_EPS).unwrap()
    }

    #[test]
    fn closed_form_cases() {
        assert_eq!(sw(100.0, 100.0, 200.0), Some(0.0));
        assert_eq!(sw(100.0, 200.0, 200.0), Some(1.0));
        let mid = (100.0f64 * 200.0).sqrt();
        assert!((sw(100.0, mid, 200.0).unwrap() - 0.5).abs() < 1e-12);
        assert!((sw(100.0, 50.0, 200.0).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(sw(100.0, 120.0, 100.0), None);
        // 0/0: no movement and no reference.
        assert_eq!(sw(100.0, 100.0, 100.0), Some(0.0));
    }

    #[test]
    fn rejects_non_positive() {
        assert!(compute_sw(0.0, 1.0, 1.0, DEFAULT_EPS).is_err());
        assert!(compute_sw(1.0, -1.0, 1.0, DEFAULT_EPS).is_err());
        assert!(compute_sw(1.0, 1.0, f64::NAN, DEFAULT_EPS).is_err());
    }

    #[test]
    fn not_clamped() {
        assert!((sw(100.0, 400.0, 200.0).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn improvement_modes() {
        assert_eq!(ErrorMode::Absolute.improvement(80.0, 95.0, 100.0), 15.0);
        assert_eq!(ErrorMode::Percent.improvement(80.0, 95.0, 200.0), 7.5);
    }

    fn rec(id: &str, user: &str, ts: i64, pre: f64, post: f64, shown: Option<Vec<f64>>) -> PredictionRecord {
        PredictionRecord {
            record_id: id.into(),
            round_id: "r".into(),
            user_id: user.into(),
            timestamp: ts,
            pre_social: pre,
            post_social: post,
            confidence: None,
            shown_sample: shown,
            shown_geomean: None,
        }
    }

    #[test]
    fn classify_examples() {
        let round = Round::new(
            "r",
            100.0,
            vec![
                rec("a", "u1", 1, 80.0, 95.0, Some(vec![100.0])),
                rec("b", "u2", 2, 95.0, 80.0, Some(vec![110.0])),
                rec("c", "u3", 3, 90.0, 90.0, Some(vec![120.0])),
                rec("d", "u4", 4, 90.0, 91.0, None),
            ],
        )
        .unwrap();
        let ds = Dataset::new(vec![round], vec![]).unwrap();
        let res = classify_records(&ds, 1, ErrorMode::Absolute);
        assert_eq!(res.len(), 4);
        // Frozen from log10(95/80) / log10(100/80).
        assert!((res[0].sw.unwrap() - 0.770_133_198_627_263_3).abs() < 1e-12);
        assert_eq!(res[0].individual_improvement, 15.0);
        assert_eq!(res[0].direction, Direction::TowardCrowd);
        // Frozen from ln(80/95) / ln(110/95).
        assert!((res[1].sw.unwrap() + 1.172_211_353_611_857).abs() < 1e-12);
        assert_eq!(res[1].individual_improvement, -15.0);
        assert_eq!(res[1].direction, Direction::AwayFromCrowd);
        assert_eq!(res[2].direction, Direction::NoChange);
        assert_eq!(res[2].individual_improvement, 0.0);
        // d reconstructs its crowd from a, b, c.
        assert!(res[3].geomean.is_some());

        let strict = classify_records(&ds, 2, ErrorMode::Absolute);
        assert_eq!(strict[0].exclusion, Some(Exclusion::InsufficientPrior));
        assert_eq!(strict[0].direction, Direction::Undefined);
    }

    #[test]
    fn undefined_is_flagged() {
        let round = Round::new("r", 100.0, vec![rec("a", "u1", 1, 100.0, 120.0, Some(vec![100.0, 100.0]))]).unwrap();
        let ds = Dataset::new(vec![round], vec![]).unwrap();
        let res = classify_records(&ds, 2, ErrorMode::Absolute);
        assert_eq!(res[0].exclusion, Some(Exclusion::UndefinedSw));
        assert!(!res[0].is_usable());
    }

    fn result(sw: Option<f64>, improvement: f64) -> SocialWeightResult {
        SocialWeightResult {
            record_id: "x".into(),
            round_id: "r".into(),
            user_id: "u".into(),
            sw,
            direction: Direction::of(sw),
            individual_improvement: improvement,
            geomean: Some(1.0),
            exclusion: if sw.is_none() { Some(Exclusion::UndefinedSw) } else { None },
        }
    }

    #[test]
    fn sign_summary() {
        assert_eq!(sw_sign_summary(&[]), SignSummary::default());
        let s = sw_sign_summary(&[result(Some(0.5), 2.0)]);
        assert_eq!(s.toward_crowd.improved, 1);
        assert_eq!(s.total(), 1);
        let s = sw_sign_summary(&[result(Some(-0.5), -2.0), result(Some(0.0), 0.0), result(None, 3.0)]);
        assert_eq!(s.away_from_crowd.worsened, 1);
        assert_eq!(s.no_change.unchanged, 1);
        assert_eq!(s.total(), 2);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("direction,improved,worsened,unchanged\n"));
    }

    proptest! {
        #[test]
        fn scale_invariant(pre in 1.0..1e4f64, post in 1.0..1e4f64, g in 1.0..1e4f64, c in 1e-3..1e3f64) {
            prop_assume!((g.ln() - pre.ln()).abs() > 1e-3);
            let a = sw(pre, post, g).unwrap();
            let b = sw(pre * c, post * c, g * c).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }

        #[test]
        fn anchors(pre in 1.0..1e4f64, g in 1.0..1e4f64) {
            prop_assume!((g.ln() - pre.ln()).abs() > DEFAULT_EPS);
            prop_assert_eq!(sw(pre, g, g), Some(1.0));
            prop_assert_eq!(sw(pre, pre, g), Some(0.0));
        }

        #[test]
        fn monotone_in_post(pre in 1.0..1e4f64, g in 1.0..1e4f64, p1 in 1.0..1e4f64, p2 in 1.0..1e4f64) {
            prop_assume!((g.ln() - pre.ln()).abs() > 1e-6 && p1 < p2);
            let (a, b) = (sw(pre, p1, g).unwrap(), sw(pre, p2, g).unwrap());
            if g > pre { prop_assert!(a < b) } else { prop_assert!(a > b) }
        }
    }
}
