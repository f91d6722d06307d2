//! Synthetic crowds with known social weights.
//!
//! Each round, agents act one at a time in a random order. An agent draws
//! a pre-social prediction, sees the pre-social predictions of everyone
//! who acted before it, and revises in log space:
//! `ln post = (1 - w) ln pre + w ln crowd + noise`.
//!
//! In the accurate and biased modes agents come in mirror pairs placed
//! symmetrically (in log space) about the crowd centre, sharing one social
//! weight and acting back to back. The crowd a pair leaves behind is then
//! centred exactly, and a threshold subset always holds whole pairs.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{self, Dataset, DatasetError, PredictionRecord, Round};
use crate::rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    SpecInvalid(String),
    #[error("prices must be positive (pre {pre}, crowd {geomean})")]
    NonPositiveInput { pre: f64, geomean: f64 },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SwDistribution {
    Constant { value: f64 },
    Uniform { low: f64, high: f64 },
    /// `high` with probability `p_high`, otherwise `low`.
    TwoPoint { low: f64, high: f64, p_high: f64 },
}

impl SwDistribution {
    fn validate(&self) -> Result<(), String> {
        let in_range = |x: f64| (-1.0..=1.0).contains(&x);
        match *self {
            SwDistribution::Constant { value } if in_range(value) => Ok(()),
            SwDistribution::Uniform { low, high } if in_range(low) && in_range(high) && low <= high => Ok(()),
            SwDistribution::TwoPoint { low, high, p_high }
                if in_range(low) && in_range(high) && (0.0..=1.0).contains(&p_high) =>
            {
                Ok(())
            }
            _ => Err(format!("social weight distribution {self:?} must stay within [-1, 1]")),
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            SwDistribution::Constant { value } => value,
            SwDistribution::Uniform { low, high } => rng.random_range(low..=high),
            SwDistribution::TwoPoint { low, high, p_high } => {
                if rng.random_bool(p_high) {
                    high
                } else {
                    low
                }
            }
        }
    }
}

/// Where pre-social predictions sit relative to the truth. Offsets and
/// separations are in log-price units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CrowdMode {
    /// Pairs centred on the truth.
    Accurate,
    /// Pairs centred on `ln truth + offset`.
    Biased { offset: f64 },
    /// Two clusters at `ln truth ± (separation / 2 + pre_bias)`; an agent
    /// joins the upper one with probability `upper_weight`.
    Bimodal { separation: f64, upper_weight: f64 },
}

fn default_min_prior() -> usize {
    dataset::DEFAULT_MIN_PRIOR
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub n_rounds: usize,
    pub truth_per_round: Vec<f64>,
    pub n_agents: usize,
    pub sw_distribution: SwDistribution,
    /// Log-space distance added between each agent and its crowd centre.
    #[serde(default)]
    pub pre_bias: f64,
    /// Log-space dispersion of pre-social predictions.
    pub pre_sigma: f64,
    pub crowd_mode: CrowdMode,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
    /// Agents acting before this many others get no social exposure.
    #[serde(default = "default_min_prior")]
    pub min_prior: usize,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::SpecInvalid(msg));
        if self.n_rounds == 0 {
            return bad("n_rounds must be at least 1".into());
        }
        if self.truth_per_round.len() != self.n_rounds {
            return bad(format!(
                "truth_per_round has {} entries for {} rounds",
                self.truth_per_round.len(),
                self.n_rounds
            ));
        }
        if let Some(t) = self.truth_per_round.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return bad(format!("truth {t} is not a positive price"));
        }
        if self.n_agents == 0 {
            return bad("n_agents must be at least 1".into());
        }
        if self.min_prior == 0 {
            return bad("min_prior must be at least 1".into());
        }
        for (name, v) in [("pre_sigma", self.pre_sigma), ("noise_sigma", self.noise_sigma)] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and non-negative"));
            }
        }
        if !self.pre_bias.is_finite() {
            return bad("pre_bias must be finite".into());
        }
        match self.crowd_mode {
            CrowdMode::Accurate => {}
            CrowdMode::Biased { offset } if offset.is_finite() => {}
            CrowdMode::Bimodal { separation, upper_weight }
                if separation.is_finite() && separation >= 0.0 && (0.0..=1.0).contains(&upper_weight) => {}
            ref m => return bad(format!("crowd mode {m:?} has invalid parameters")),
        }
        self.sw_distribution.validate().map_err(SimError::SpecInvalid)
    }
}

/// A single scenario, or several whose rounds are concatenated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scenario {
    Composite { parts: Vec<ScenarioSpec> },
    Single(ScenarioSpec),
}

impl Scenario {
    /// Replaces every part's seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        match &mut self {
            Scenario::Single(s) => s.seed = seed,
            Scenario::Composite { parts } => parts.iter_mut().for_each(|p| p.seed = seed),
        }
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        match self {
            Scenario::Single(s) => s.validate(),
            Scenario::Composite { parts } if parts.is_empty() => {
                Err(SimError::SpecInvalid("composite scenario has no parts".into()))
            }
            Scenario::Composite { parts } => parts.iter().try_for_each(ScenarioSpec::validate),
        }
    }

    pub fn generate(&self) -> Result<Simulated, SimError> {
        match self {
            Scenario::Single(s) => generate_dataset(s),
            Scenario::Composite { parts } => generate_composite(parts),
        }
    }
}

/// `post = exp((1 - sw) ln pre + sw ln geomean + noise)`.
pub fn apply_social_update(pre: f64, geomean: f64, sw: f64, noise: f64) -> Result<f64, SimError> {
    if !(pre.is_finite() && pre > 0.0 && geomean.is_finite() && geomean > 0.0) {
        return Err(SimError::NonPositiveInput { pre, geomean });
    }
    Ok(((1.0 - sw) * pre.ln() + sw * geomean.ln() + noise).exp())
}

/// Assigned social weight per record; `None` for agents that saw no crowd.
pub type GroundTruth = BTreeMap<String, Option<f64>>;

#[derive(Debug, Clone, PartialEq)]
pub struct Simulated {
    pub dataset: Dataset,
    pub ground_truth: GroundTruth,
}

/// An agent's position in the acting order with its pre-social log price
/// and social weight.
struct Agent {
    id: usize,
    log_pre: f64,
    sw: f64,
}

fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn draw_agents(spec: &ScenarioSpec, truth: f64, rng: &mut impl Rng) -> Vec<Agent> {
    let n = spec.n_agents;
    match spec.crowd_mode {
        CrowdMode::Bimodal { separation, upper_weight } => {
            let mut agents: Vec<Agent> = (0..n)
                .map(|id| {
                    let side = if rng.random_bool(upper_weight) { 1.0 } else { -1.0 };
                    let log_pre = truth.ln() + side * (separation / 2.0 + spec.pre_bias) + spec.pre_sigma * normal(rng);
                    Agent { id, log_pre, sw: spec.sw_distribution.sample(rng) }
                })
                .collect();
            agents.shuffle(rng);
            agents
        }
        CrowdMode::Accurate | CrowdMode::Biased { .. } => {
            let offset = match spec.crowd_mode {
                CrowdMode::Biased { offset } => offset,
                _ => 0.0,
            };
            let centre = truth.ln() + offset;
            let mut units: Vec<Vec<Agent>> = (0..n.div_ceil(2))
                .map(|p| {
                    let d = spec.pre_bias + spec.pre_sigma * normal(rng).abs();
                    let sw = spec.sw_distribution.sample(rng);
                    let mut unit = vec![Agent { id: 2 * p, log_pre: centre + d, sw }];
                    if 2 * p + 1 < n {
                        unit.push(Agent { id: 2 * p + 1, log_pre: centre - d, sw });
                    }
                    unit.shuffle(rng);
                    unit
                })
                .collect();
            units.shuffle(rng);
            units.into_iter().flatten().collect()
        }
    }
}

fn simulate_round(
    spec: &ScenarioSpec,
    round_id: &str,
    truth: f64,
    rng: &mut impl Rng,
) -> Result<(Round, Vec<(String, Option<f64>)>), SimError> {
    let agents = draw_agents(spec, truth, rng);
    let mut shown: Vec<f64> = Vec::with_capacity(agents.len());
    let mut records = Vec::with_capacity(agents.len());
    let mut truth_sw = Vec::with_capacity(agents.len());
    for (position, agent) in agents.iter().enumerate() {
        let pre = agent.log_pre.exp();
        let record_id = format!("{round_id}-a{:04}", agent.id);
        let (post, sw) = if shown.len() < spec.min_prior {
            (pre, None)
        } else {
            let geomean = dataset::geometric_mean(&shown);
            let noise = if spec.noise_sigma > 0.0 { spec.noise_sigma * normal(rng) } else { 0.0 };
            (apply_social_update(pre, geomean, agent.sw, noise)?, Some(agent.sw))
        };
        records.push(PredictionRecord {
            record_id: record_id.clone(),
            round_id: round_id.to_string(),
            user_id: format!("a{:04}", agent.id),
            timestamp: position as i64 + 1,
            pre_social: pre,
            post_social: post,
            confidence: None,
            shown_sample: None,
            shown_geomean: None,
        });
        truth_sw.push((record_id, sw));
        shown.push(pre);
    }
    Ok((Round::new(round_id, truth, records)?, truth_sw))
}

fn generate_part(spec: &ScenarioSpec, part: u64, prefix: &str) -> Result<(Vec<Round>, GroundTruth), SimError> {
    spec.validate()?;
    let mut rounds = Vec::with_capacity(spec.n_rounds);
    let mut ground_truth = GroundTruth::new();
    for (i, &truth) in spec.truth_per_round.iter().enumerate() {
        let mut rng = rng::stream(spec.seed, rng::domain::SIMULATION, (part << 32) | i as u64);
        let (round, truth_sw) = simulate_round(spec, &format!("{prefix}r{}", i + 1), truth, &mut rng)?;
        rounds.push(round);
        ground_truth.extend(truth_sw);
    }
    Ok((rounds, ground_truth))
}

/// Values are kept at full precision; serialization rounds prices.
pub fn generate_dataset(spec: &ScenarioSpec) -> Result<Simulated, SimError> {
    let (rounds, ground_truth) = generate_part(spec, 0, "")?;
    let dataset = Dataset::new(rounds, vec![format!("simulated scenario, seed {}", spec.seed)])?;
    Ok(Simulated { dataset, ground_truth })
}

/// Round ids of part `p` are prefixed `s{p+1}`.
pub fn generate_composite(parts: &[ScenarioSpec]) -> Result<Simulated, SimError> {
    if parts.is_empty() {
        return Err(SimError::SpecInvalid("composite scenario has no parts".into()));
    }
    let mut rounds = Vec::new();
    let mut ground_truth = GroundTruth::new();
    let mut meta = Vec::new();
    for (p, spec) in parts.iter().enumerate() {
        let (r, g) = generate_part(spec, p as u64, &format!("s{}", p + 1))?;
        rounds.extend(r);
        ground_truth.extend(g);
        meta.push(format!("simulated scenario part {}, seed {}", p + 1, spec.seed));
    }
    let dataset = Dataset::new(rounds, meta)?;
    Ok(Simulated { dataset, ground_truth })
}

/// `record_id,true_sw`; empty for agents that saw no crowd.
pub fn write_ground_truth_csv(ground_truth: &GroundTruth, writer: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["record_id", "true_sw"])?;
    for (id, sw) in ground_truth {
        w.write_record([id.clone(), sw.map(|x| x.to_string()).unwrap_or_default()])?;
    }
    w.flush()?;
    Ok(())
}
