//! Countermeasure evaluation: equal error rate and the minimum normalized
//! tandem detection cost.
//!
//! Scores are "higher = more bona fide". At threshold `s` a bona fide trial
//! is missed when its score is `< s` and a spoof trial is falsely accepted
//! when its score is `>= s`.
//!
//! All rates are piecewise constant in `s`, changing only at the distinct
//! score values `u_0 < ... < u_{m-1}`. The sweep therefore visits the `m + 1`
//! threshold intervals `(-inf, u_0], (u_0, u_1], ..., (u_{m-1}, +inf]` and
//! reports each by a representative threshold: `-inf`, the interval
//! midpoints, and `+inf`.

use std::fmt;

use crate::{Error, Result};

/// Detection scores split by ground truth.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreSet {
    pub bona_scores: Vec<f64>,
    pub spoof_scores: Vec<f64>,
}

impl ScoreSet {
    pub fn new(bona_scores: Vec<f64>, spoof_scores: Vec<f64>) -> Self {
        Self {
            bona_scores,
            spoof_scores,
        }
    }

    fn check(&self) -> Result<()> {
        if self.bona_scores.is_empty() {
            return Err(Error::EmptyScores("bona fide"));
        }
        if self.spoof_scores.is_empty() {
            return Err(Error::EmptyScores("spoof"));
        }
        if self
            .bona_scores
            .iter()
            .chain(&self.spoof_scores)
            .any(|s| !s.is_finite())
        {
            return Err(Error::InvalidConfig("scores must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdcfParams {
    pub beta: f64,
}

impl Default for TdcfParams {
    fn default() -> Self {
        Self { beta: 1.0 }
    }
}

/// One operating point of the sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetPoint {
    pub threshold: f64,
    /// Spoof false-acceptance rate.
    pub far: f64,
    /// Bona fide false-rejection (miss) rate.
    pub frr: f64,
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Raw counts `(bona missed, spoof accepted)` per threshold interval.
fn sweep(scores: &ScoreSet) -> Vec<(f64, usize, usize)> {
    let bona = sorted(&scores.bona_scores);
    let spoof = sorted(&scores.spoof_scores);
    let mut distinct: Vec<f64> = bona.iter().chain(&spoof).copied().collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();

    let mut out = Vec::with_capacity(distinct.len() + 1);
    let (mut missed, mut below_spoof) = (0usize, 0usize);
    out.push((f64::NEG_INFINITY, 0, spoof.len()));
    for (j, &u) in distinct.iter().enumerate() {
        // Moving the threshold just above u rejects every trial scored u.
        while missed < bona.len() && bona[missed] <= u {
            missed += 1;
        }
        while below_spoof < spoof.len() && spoof[below_spoof] <= u {
            below_spoof += 1;
        }
        let threshold = match distinct.get(j + 1) {
            Some(&next) => u + (next - u) / 2.0,
            None => f64::INFINITY,
        };
        out.push((threshold, missed, spoof.len() - below_spoof));
    }
    out
}

/// Every operating point, thresholds ascending.
pub fn det_points(scores: &ScoreSet) -> Result<Vec<DetPoint>> {
    scores.check()?;
    let nb = scores.bona_scores.len() as f64;
    let ns = scores.spoof_scores.len() as f64;
    Ok(sweep(scores)
        .into_iter()
        .map(|(threshold, missed, accepted)| DetPoint {
            threshold,
            far: accepted as f64 / ns,
            frr: missed as f64 / nb,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EerResult {
    pub eer: f64,
    pub threshold: f64,
}

/// `(FAR + FRR) / 2` at the operating point minimizing `|FAR - FRR|`.
///
/// `|FAR - FRR|` is compared exactly on counts. Two distinct operating points
/// can only tie when they straddle the crossing (`FAR - FRR = +d` and `-d`);
/// the crossing then sits halfway between them and the EER is the mean of
/// their two midpoints. The reported threshold is the lower one.
pub fn compute_eer(scores: &ScoreSet) -> Result<EerResult> {
    scores.check()?;
    let nb = scores.bona_scores.len();
    let ns = scores.spoof_scores.len();
    // |FAR - FRR| * nb * ns
    let gap = |missed: usize, accepted: usize| (accepted * nb).abs_diff(missed * ns);
    let midpoint = |missed: usize, accepted: usize| {
        (accepted as f64 / ns as f64 + missed as f64 / nb as f64) / 2.0
    };

    let points = sweep(scores);
    let best = points
        .iter()
        .map(|&(_, m, a)| gap(m, a))
        .min()
        .expect("sweep has at least two points");
    let mut tied = points.iter().filter(|&&(_, m, a)| gap(m, a) == best);
    let &(threshold, m0, a0) = tied.next().expect("minimum is attained");
    let eer = match tied.next() {
        Some(&(_, m1, a1)) => (midpoint(m0, a0) + midpoint(m1, a1)) / 2.0,
        None => midpoint(m0, a0),
    };
    Ok(EerResult { eer, threshold })
}

/// `min_s { beta * P_miss(s) + P_fa(s) }` over the operating points.
pub fn min_tdcf(scores: &ScoreSet, params: TdcfParams) -> Result<f64> {
    if params.beta.is_nan() || params.beta < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "beta {} must be >= 0",
            params.beta
        )));
    }
    Ok(det_points(scores)?
        .iter()
        .map(|p| params.beta * p.frr + p.far)
        .fold(f64::INFINITY, f64::min))
}

/// The `eer=`, `min_tdcf=`, `threshold=` report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub eer: f64,
    pub min_tdcf: f64,
    pub threshold: f64,
}

impl MetricReport {
    pub fn compute(scores: &ScoreSet, params: TdcfParams) -> Result<Self> {
        let eer = compute_eer(scores)?;
        Ok(Self {
            eer: eer.eer,
            min_tdcf: min_tdcf(scores, params)?,
            threshold: eer.threshold,
        })
    }
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "eer={}", self.eer)?;
        writeln!(f, "min_tdcf={}", self.min_tdcf)?;
        write!(f, "threshold={}", self.threshold)
    }
}
