//! Hartigan's dip test of unimodality.
//!
//! The dip of a sample is the sup-norm distance between its empirical CDF and
//! the closest unimodal CDF. [`dip_statistic`] computes it with the
//! greatest-convex-minorant / least-concave-majorant iteration of Hartigan &
//! Hartigan (1985), algorithm AS 217. P-values come from a Monte-Carlo null
//! distribution of dips of uniform samples of the same size.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

pub const DEFAULT_MIN_SAMPLE: usize = 4;
pub const DEFAULT_REPLICATES: usize = 10_000;
pub const MIN_REPLICATES: usize = 100;
/// Samples whose p-value falls below this level are flagged non-unimodal.
pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DipError {
    #[error("dip statistic of an empty sample")]
    EmptySample,
    #[error("sample contains a non-finite value")]
    NonFinite,
    #[error("sample of size {n} is below the minimum of {n_min} for a p-value")]
    TooFewPoints { n: usize, n_min: usize },
    #[error("{m} Monte-Carlo replicates requested, at least {MIN_REPLICATES} required")]
    TooFewReplicates { m: usize },
    #[error("null cache: {0}")]
    Cache(String),
}

/// Dip statistic of an unsorted sample. Ties are allowed.
pub fn dip_statistic(sample: &[f64]) -> Result<f64, DipError> {
    if sample.is_empty() {
        return Err(DipError::EmptySample);
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(DipError::NonFinite);
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(dip_statistic_sorted(&sorted))
}

/// Dip statistic of an ascending, finite, non-empty sample.
///
/// Works in units of counts (2n times the dip) until the final division.
/// The result is never below `1/(2n)`.
pub fn dip_statistic_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    debug_assert!(n > 0);
    debug_assert!(sorted.windows(2).all(|w| w[0] <= w[1]));
    let scale = 2.0 * n as f64;
    if n < 2 || sorted[0] == sorted[n - 1] {
        return 1.0 / scale;
    }

    // 1-based view so hull bookkeeping can use 0 as "none".
    let mut x = Vec::with_capacity(n + 1);
    x.push(f64::NAN);
    x.extend_from_slice(sorted);

    // mn[j]: predecessor of j on the convex minorant of points (x_i, i), i <= j.
    let mut mn = vec![0usize; n + 1];
    mn[1] = 1;
    for j in 2..=n {
        mn[j] = j - 1;
        loop {
            let a = mn[j];
            let b = mn[a];
            if a == 1 || (x[j] - x[a]) * ((a - b) as f64) < (x[a] - x[b]) * ((j - a) as f64) {
                break;
            }
            mn[j] = b;
        }
    }

    // mj[k]: successor of k on the concave majorant of points (x_i, i), i >= k.
    let mut mj = vec![0usize; n + 1];
    mj[n] = n;
    for k in (1..n).rev() {
        mj[k] = k + 1;
        loop {
            let a = mj[k];
            let b = mj[a];
            // (k - a) and (a - b) are both negative; their product is positive.
            if a == n || (x[k] - x[a]) * ((b - a) as f64) > (x[a] - x[b]) * ((a - k) as f64) {
                break;
            }
            mj[k] = b;
        }
    }

    let mut gcm = vec![0usize; n + 1];
    let mut lcm = vec![0usize; n + 1];
    let mut low = 1usize;
    let mut high = n;
    let mut dip = 1.0f64;

    loop {
        // Knots of the minorant from high down to low.
        gcm[1] = high;
        let mut i = 1;
        while gcm[i] > low {
            gcm[i + 1] = mn[gcm[i]];
            i += 1;
        }
        let l_gcm = i;
        let mut ig = l_gcm;
        let mut ix = ig - 1;

        // Knots of the majorant from low up to high.
        lcm[1] = low;
        i = 1;
        while lcm[i] < high {
            lcm[i + 1] = mj[lcm[i]];
            i += 1;
        }
        let l_lcm = i;
        let mut ih = l_lcm;
        let mut iv = 2;

        // Largest vertical distance between the two hulls over [low, high].
        let d = if l_gcm != 2 || l_lcm != 2 {
            let mut d = 0.0f64;
            loop {
                let gcm_ix = gcm[ix];
                let lcm_iv = lcm[iv];
                if gcm_ix > lcm_iv {
                    let gcm_next = gcm[ix + 1];
                    let dx = lcm_iv as f64 - gcm_next as f64 + 1.0
                        - (x[lcm_iv] - x[gcm_next]) * ((gcm_ix - gcm_next) as f64)
                            / (x[gcm_ix] - x[gcm_next]);
                    iv += 1;
                    if dx >= d {
                        d = dx;
                        ig = ix + 1;
                        ih = iv - 1;
                    }
                } else {
                    let lcm_prev = lcm[iv - 1];
                    let dx = (x[gcm_ix] - x[lcm_prev]) * ((lcm_iv - lcm_prev) as f64)
                        / (x[lcm_iv] - x[lcm_prev])
                        - (gcm_ix as f64 - lcm_prev as f64 - 1.0);
                    ix -= 1;
                    if dx >= d {
                        d = dx;
                        ig = ix + 1;
                        ih = iv;
                    }
                }
                ix = ix.max(1);
                iv = iv.min(l_lcm);
                if gcm[ix] == lcm[iv] {
                    break;
                }
            }
            d
        } else {
            1.0
        };

        if d < dip {
            break;
        }

        // Dip of the minorant part: ECDF above the chord between knots.
        let mut dip_l = 0.0f64;
        for j in ig..l_gcm {
            let (jb, je) = (gcm[j + 1], gcm[j]);
            let mut max_t = 1.0f64;
            if je - jb > 1 && x[je] != x[jb] {
                let slope = (je - jb) as f64 / (x[je] - x[jb]);
                for jj in jb..=je {
                    let t = (jj + 1 - jb) as f64 - (x[jj] - x[jb]) * slope;
                    max_t = max_t.max(t);
                }
            }
            dip_l = dip_l.max(max_t);
        }

        // Dip of the majorant part: chord above the ECDF between knots.
        let mut dip_u = 0.0f64;
        for j in ih..l_lcm {
            let (jb, je) = (lcm[j], lcm[j + 1]);
            let mut max_t = 1.0f64;
            if je - jb > 1 && x[je] != x[jb] {
                let slope = (je - jb) as f64 / (x[je] - x[jb]);
                for jj in jb..=je {
                    let t = (x[jj] - x[jb]) * slope - (jj - jb) as f64 + 1.0;
                    max_t = max_t.max(t);
                }
            }
            dip_u = dip_u.max(max_t);
        }

        dip = dip.max(dip_u.max(dip_l));

        // Without this check the iteration can cycle forever.
        if low == gcm[ig] && high == lcm[ih] {
            break;
        }
        low = gcm[ig];
        high = lcm[ih];
    }

    dip / scale
}

/// Sorted dips of `m` uniform samples of size `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullDistribution {
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    dips: Vec<f64>,
}

impl NullDistribution {
    /// Replicate `i` draws from its own stream, so the result does not depend
    /// on how the work is scheduled.
    pub fn simulate(n: usize, m: usize, seed: u64) -> Result<Self, DipError> {
        if n == 0 {
            return Err(DipError::EmptySample);
        }
        if m < MIN_REPLICATES {
            return Err(DipError::TooFewReplicates { m });
        }
        let base = seed ^ (n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let mut dips: Vec<f64> = (0..m)
            .into_par_iter()
            .map_init(
                || Vec::with_capacity(n),
                |buf, i| {
                    let mut rng = rng::stream(base, rng::domain::DIP_NULL, i as u64);
                    buf.clear();
                    buf.extend((0..n).map(|_| rng.random::<f64>()));
                    buf.sort_by(f64::total_cmp);
                    dip_statistic_sorted(buf)
                },
            )
            .collect();
        dips.sort_by(f64::total_cmp);
        Ok(Self { n, m, seed, dips })
    }

    /// Add-one estimate `(1 + #{null >= dip}) / (m + 1)`.
    pub fn p_value(&self, dip: f64) -> f64 {
        let below = self.dips.partition_point(|&d| d < dip);
        let at_least = self.dips.len() - below;
        (1 + at_least) as f64 / (self.m + 1) as f64
    }

    pub fn dips(&self) -> &[f64] {
        &self.dips
    }

    fn is_consistent(&self) -> bool {
        self.dips.len() == self.m && self.dips.windows(2).all(|w| w[0] <= w[1])
    }
}

/// Monte-Carlo p-value of an observed dip for samples of size `n`.
pub fn dip_pvalue(dip: f64, n: usize, m: usize, seed: u64) -> Result<f64, DipError> {
    if n < DEFAULT_MIN_SAMPLE {
        return Err(DipError::TooFewPoints {
            n,
            n_min: DEFAULT_MIN_SAMPLE,
        });
    }
    Ok(NullDistribution::simulate(n, m, seed)?.p_value(dip))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DipFlag {
    Unimodal,
    NonUnimodal,
    Indeterminate,
}

impl DipFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            DipFlag::Unimodal => "unimodal",
            DipFlag::NonUnimodal => "non_unimodal",
            DipFlag::Indeterminate => "indeterminate",
        }
    }
}

/// Outcome of the dip test on one shown sample. `dip` and `p_value` are
/// absent for indeterminate samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipResult {
    pub n: usize,
    pub dip: Option<f64>,
    pub p_value: Option<f64>,
    pub flag: DipFlag,
}

impl DipResult {
    pub fn indeterminate(n: usize) -> Self {
        Self {
            n,
            dip: None,
            p_value: None,
            flag: DipFlag::Indeterminate,
        }
    }

    fn from_p(n: usize, dip: f64, p_value: f64) -> Self {
        let flag = if p_value < SIGNIFICANCE_LEVEL {
            DipFlag::NonUnimodal
        } else {
            DipFlag::Unimodal
        };
        Self {
            n,
            dip: Some(dip),
            p_value: Some(p_value),
            flag,
        }
    }
}

pub fn flag_unimodality(sample: &[f64], n_min: usize, m: usize, seed: u64) -> Result<DipResult, DipError> {
    if sample.len() < n_min.max(1) {
        return Ok(DipResult::indeterminate(sample.len()));
    }
    let dip = dip_statistic(sample)?;
    let null = NullDistribution::simulate(sample.len(), m, seed)?;
    Ok(DipResult::from_p(sample.len(), dip, null.p_value(dip)))
}

const CACHE_SCHEMA_VERSION: u32 = 1;

/// Null distributions for one `(m, seed)` pair, keyed by sample size.
///
/// Built once, then shared read-only across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullCache {
    schema_version: u32,
    pub m: usize,
    pub seed: u64,
    entries: BTreeMap<usize, NullDistribution>,
}

impl NullCache {
    pub fn new(m: usize, seed: u64) -> Result<Self, DipError> {
        if m < MIN_REPLICATES {
            return Err(DipError::TooFewReplicates { m });
        }
        Ok(Self {
            schema_version: CACHE_SCHEMA_VERSION,
            m,
            seed,
            entries: BTreeMap::new(),
        })
    }

    /// Simulates every missing size in `sizes`.
    pub fn ensure(&mut self, sizes: impl IntoIterator<Item = usize>) -> Result<(), DipError> {
        let missing: Vec<usize> = sizes
            .into_iter()
            .filter(|n| *n > 0 && !self.entries.contains_key(n))
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let built = missing
            .into_par_iter()
            .map(|n| NullDistribution::simulate(n, self.m, self.seed))
            .collect::<Result<Vec<_>, _>>()?;
        for null in built {
            self.entries.insert(null.n, null);
        }
        Ok(())
    }

    pub fn get(&self, n: usize) -> Option<&NullDistribution> {
        self.entries.get(&n)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Flags a sample using a cached null; the size must already be present.
    pub fn flag(&self, sample: &[f64], n_min: usize) -> Result<DipResult, DipError> {
        if sample.len() < n_min.max(1) {
            return Ok(DipResult::indeterminate(sample.len()));
        }
        let dip = dip_statistic(sample)?;
        let null = self
            .get(sample.len())
            .ok_or_else(|| DipError::Cache(format!("no null distribution for n = {}", sample.len())))?;
        Ok(DipResult::from_p(sample.len(), dip, null.p_value(dip)))
    }

    /// Reads a cache file. Entries are only reused when `(m, seed)` match.
    pub fn load(reader: impl Read, m: usize, seed: u64) -> Result<Self, DipError> {
        let cache: NullCache =
            serde_json::from_reader(reader).map_err(|e| DipError::Cache(e.to_string()))?;
        if cache.schema_version != CACHE_SCHEMA_VERSION {
            return Err(DipError::Cache(format!(
                "unsupported schema version {}",
                cache.schema_version
            )));
        }
        if cache.m != m || cache.seed != seed {
            return NullCache::new(m, seed);
        }
        if let Some((n, _)) = cache
            .entries
            .iter()
            .find(|(n, e)| **n != e.n || e.m != m || e.seed != seed || !e.is_consistent())
        {
            return Err(DipError::Cache(format!("corrupt entry for n = {n}")));
        }
        Ok(cache)
    }

    pub fn save(&self, writer: impl Write) -> Result<(), DipError> {
        serde_json::to_writer(writer, self).map_err(|e| DipError::Cache(e.to_string()))
    }
}
