//! Improvement split by the shape of the crowd a predictor saw.
//!
//! Each usable record is assigned to the `uni` or `non_uni` class by the
//! dip test on its shown sample. Within a round, a user's records in one
//! class are averaged into a single improvement. The share of users who
//! improved, among those who improved or worsened, is tested against one
//! half with a normal approximation and no continuity correction.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{self, Dataset};
use crate::dip::{DipError, DipFlag, DipResult, NullCache};
use crate::social_weight::{Outcome, SocialWeightResult};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UnimodalityError {
    #[error("no dip result for record {0}")]
    MissingFlag(String),
    #[error("no improved or worsened entries in class {0}")]
    NoDecisiveEntries(UnimodalityClass),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnimodalityClass {
    Uni,
    NonUni,
}

impl UnimodalityClass {
    pub const ALL: [UnimodalityClass; 2] = [UnimodalityClass::Uni, UnimodalityClass::NonUni];

    pub fn of(flag: DipFlag) -> Option<Self> {
        match flag {
            DipFlag::Unimodal => Some(UnimodalityClass::Uni),
            DipFlag::NonUnimodal => Some(UnimodalityClass::NonUni),
            DipFlag::Indeterminate => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            UnimodalityClass::Uni => "uni",
            UnimodalityClass::NonUni => "non_uni",
        }
    }
}

impl std::fmt::Display for UnimodalityClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Dip test on the shown crowd of every usable record. Null distributions
/// for the needed sample sizes are added to `cache`.
pub fn dip_flags(
    dataset: &Dataset,
    results: &[SocialWeightResult],
    min_prior: usize,
    n_min: usize,
    cache: &mut NullCache,
) -> Result<BTreeMap<String, DipResult>, DipError> {
    let usable: HashMap<&str, ()> =
        results.iter().filter(|r| r.is_usable()).map(|r| (r.record_id.as_str(), ())).collect();
    let samples: Vec<(String, Vec<f64>)> = dataset
        .rounds
        .iter()
        .flat_map(|round| {
            round.records.iter().enumerate().filter_map(|(i, r)| {
                if !usable.contains_key(r.record_id.as_str()) {
                    return None;
                }
                let crowd = dataset::shown_crowd(round, i, min_prior);
                crowd.shown().map(|c| (r.record_id.clone(), c.sample.clone()))
            })
        })
        .collect();
    cache.ensure(samples.iter().map(|(_, s)| s.len()).filter(|&n| n >= n_min.max(1)))?;
    let cache = &*cache;
    samples
        .into_par_iter()
        .map(|(id, sample)| cache.flag(&sample, n_min).map(|d| (id, d)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserSubsetImprovement {
    pub round_id: String,
    pub user_id: String,
    pub k: UnimodalityClass,
    pub mean_improvement: f64,
    pub n: usize,
}

/// Per `(round, user, class)` mean of individual improvements over usable
/// records. Indeterminate records belong to neither class. Output is
/// ordered by round id, user id and class.
pub fn user_subset_improvements(
    results: &[SocialWeightResult],
    dip_flags: &BTreeMap<String, DipResult>,
) -> Result<Vec<UserSubsetImprovement>, UnimodalityError> {
    let mut groups: BTreeMap<(&str, &str, UnimodalityClass), (f64, usize)> = BTreeMap::new();
    for r in results.iter().filter(|r| r.is_usable()) {
        let flag = dip_flags.get(&r.record_id).ok_or_else(|| UnimodalityError::MissingFlag(r.record_id.clone()))?;
        let Some(k) = UnimodalityClass::of(flag.flag) else { continue };
        let e = groups.entry((&r.round_id, &r.user_id, k)).or_default();
        e.0 += r.individual_improvement;
        e.1 += 1;
    }
    Ok(groups
        .into_iter()
        .map(|((round_id, user_id, k), (sum, n))| UserSubsetImprovement {
            round_id: round_id.to_string(),
            user_id: user_id.to_string(),
            k,
            mean_improvement: sum / n as f64,
            n,
        })
        .collect())
}

/// Two-sided tail probability of the standard normal beyond `|z|`.
pub fn normal_two_sided(z: f64) -> f64 {
    libm::erfc(z.abs() / std::f64::consts::SQRT_2)
}

/// Standard normal distribution function.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProportionTestResult {
    pub k: UnimodalityClass,
    pub n_improved: usize,
    pub n_worsened: usize,
    pub n_unchanged: usize,
    pub p_hat: f64,
    pub z: f64,
    pub p_value: f64,
}

impl ProportionTestResult {
    /// Test of `improved / (improved + worsened) = 1/2`.
    pub fn from_counts(
        k: UnimodalityClass,
        n_improved: usize,
        n_worsened: usize,
        n_unchanged: usize,
    ) -> Result<Self, UnimodalityError> {
        let m = n_improved + n_worsened;
        if m == 0 {
            return Err(UnimodalityError::NoDecisiveEntries(k));
        }
        let p_hat = n_improved as f64 / m as f64;
        // (p_hat - 1/2) / sqrt(1 / (4m)), rearranged to stay exact on counts.
        let z = (2.0 * n_improved as f64 - m as f64) / (m as f64).sqrt();
        Ok(Self { k, n_improved, n_worsened, n_unchanged, p_hat, z, p_value: normal_two_sided(z) })
    }
}

fn count_outcomes<'a>(entries: impl Iterator<Item = &'a UserSubsetImprovement>) -> (usize, usize, usize) {
    entries.fold((0, 0, 0), |(i, w, u), e| match Outcome::of(e.mean_improvement) {
        Outcome::Improved => (i + 1, w, u),
        Outcome::Worsened => (i, w + 1, u),
        Outcome::Unchanged => (i, w, u + 1),
    })
}

/// Pooled over all rounds and users of class `k`.
pub fn proportion_test(
    entries: &[UserSubsetImprovement],
    k: UnimodalityClass,
) -> Result<ProportionTestResult, UnimodalityError> {
    let (i, w, u) = count_outcomes(entries.iter().filter(|e| e.k == k));
    ProportionTestResult::from_counts(k, i, w, u)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundProportion {
    pub round_id: String,
    pub k: UnimodalityClass,
    pub n_improved: usize,
    pub n_worsened: usize,
    pub n_unchanged: usize,
    /// Absent when the round has no decisive entry in this class.
    pub test: Option<ProportionTestResult>,
}

/// The same test within each round, for inspection.
pub fn per_round_proportions(entries: &[UserSubsetImprovement], k: UnimodalityClass) -> Vec<RoundProportion> {
    let mut by_round: BTreeMap<&str, Vec<&UserSubsetImprovement>> = BTreeMap::new();
    for e in entries.iter().filter(|e| e.k == k) {
        by_round.entry(&e.round_id).or_default().push(e);
    }
    by_round
        .into_iter()
        .map(|(round_id, es)| {
            let (i, w, u) = count_outcomes(es.into_iter());
            RoundProportion {
                round_id: round_id.to_string(),
                k,
                n_improved: i,
                n_worsened: w,
                n_unchanged: u,
                test: ProportionTestResult::from_counts(k, i, w, u).ok(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementCurve {
    pub k: UnimodalityClass,
    /// Descending.
    pub values: Vec<f64>,
    pub mean: Option<f64>,
}

pub fn sorted_improvement_curve(entries: &[UserSubsetImprovement], k: UnimodalityClass) -> ImprovementCurve {
    let mut values: Vec<f64> = entries.iter().filter(|e| e.k == k).map(|e| e.mean_improvement).collect();
    values.sort_by(|a, b| b.total_cmp(a));
    let mean = (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64);
    ImprovementCurve { k, values, mean }
}

/// `round_id,user_id,k,mean_improvement,n`
pub fn write_entries_csv(entries: &[UserSubsetImprovement], writer: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["round_id", "user_id", "k", "mean_improvement", "n"])?;
    for e in entries {
        w.write_record([
            e.round_id.as_str(),
            e.user_id.as_str(),
            e.k.as_str(),
            &e.mean_improvement.to_string(),
            &e.n.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `k,n_improved,n_worsened,n_unchanged,p_hat,z,p_value`; classes with no
/// decisive entry get empty statistics.
pub fn write_proportions_csv(
    tests: &[(UnimodalityClass, Option<ProportionTestResult>, (usize, usize, usize))],
    writer: impl Write,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["k", "n_improved", "n_worsened", "n_unchanged", "p_hat", "z", "p_value"])?;
    for (k, test, (i, wo, u)) in tests {
        let stats = match test {
            Some(t) => [t.p_hat.to_string(), t.z.to_string(), t.p_value.to_string()],
            None => Default::default(),
        };
        w.write_record(
            [k.as_str().to_string(), i.to_string(), wo.to_string(), u.to_string()].into_iter().chain(stats),
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Counts per class, whether or not a test is possible.
pub fn class_counts(entries: &[UserSubsetImprovement], k: UnimodalityClass) -> (usize, usize, usize) {
    count_outcomes(entries.iter().filter(|e| e.k == k))
}

/// `k,rank,improvement` with rank starting at 1.
pub fn write_curves_csv(curves: &[ImprovementCurve], writer: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["k", "rank", "improvement"])?;
    for c in curves {
        for (i, v) in c.values.iter().enumerate() {
            w.write_record([c.k.as_str().to_string(), (i + 1).to_string(), v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
