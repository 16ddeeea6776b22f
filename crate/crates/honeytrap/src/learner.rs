//! Recalibration of the behavioral model from flagged users' histories.
//!
//! Flagged cheaters' check-ins, together with the venue lists they chose
//! from, form a discrete-choice dataset. The weights are re-estimated by
//! maximum likelihood under the linear share model, searching exhaustively
//! over the normalized weight simplex: the weight dimension is tiny, the
//! grid is exact and language-neutral, and it doubles as the test oracle.
//! Only the direction of the weight vector is identifiable, so results live
//! on the unit simplex.

use crate::behavior::{self, BehaviorWeights};
use crate::detector::SuspicionRecord;
use crate::error::{Error, Result};
use crate::world::{CheckInEvent, UserId, VenueFeatures, VenueId, WorldState};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Likelihood-ratio gain (in log-likelihood units) above which an extension
/// feature is recommended: half the 95% chi-square(1) critical value.
pub const DEFAULT_GAIN_THRESHOLD: f64 = 1.92;

/// Hard cap on enumerated grid points.
const MAX_GRID_POINTS: u128 = 20_000_000;

/// A weight component the grid search can free.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureKey {
    Points,
    Mayor,
    Type(String),
    DealCount,
    DealType(usize),
}

impl std::fmt::Display for FeatureKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FeatureKey::Points => write!(f, "points"),
            FeatureKey::Mayor => write!(f, "mayorship"),
            FeatureKey::Type(t) => write!(f, "venue_type[{t}]"),
            FeatureKey::DealCount => write!(f, "deal_count"),
            FeatureKey::DealType(i) => write!(f, "deal_type[{i}]"),
        }
    }
}

/// One observed choice: the candidate features the user saw and the index
/// they picked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub candidates: Vec<CandidateFeatures>,
    pub chosen: usize,
}

/// A candidate's features at choice time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateFeatures {
    pub features: VenueFeatures,
    pub first_visit: bool,
}

/// The choice dataset distilled from flagged users' histories.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CalibrationDataset {
    pub observations: Vec<Observation>,
}

impl CalibrationDataset {
    pub fn validate(&self) -> Result<()> {
        if self.observations.is_empty() {
            return Err(Error::InvalidConfig {
                path: "dataset".into(),
                message: "at least one observation is required".into(),
            });
        }
        for (i, obs) in self.observations.iter().enumerate() {
            if obs.candidates.is_empty() || obs.chosen >= obs.candidates.len() {
                return Err(Error::InvalidConfig {
                    path: format!("dataset.observations[{i}]"),
                    message: format!(
                        "chosen index {} out of range for {} candidates",
                        obs.chosen,
                        obs.candidates.len()
                    ),
                });
            }
        }
        Ok(())
    }
}

/// Result of a maximum-likelihood fit over the weight simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Fitted weights, normalized to sum 1.
    pub weights: BehaviorWeights,
    pub log_likelihood: f64,
    /// Effective grid step (1 / grid resolution).
    pub grid_step: f64,
    pub n_observations: usize,
}

impl FitResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Extracts the calibration dataset from a run: every check-in by a flagged
/// user, with the features of the full list presented at that choice.
/// First-visit status is reconstructed by replaying visited sets from the
/// world's initial state through the log.
pub fn collect_flagged_histories(
    events: &[CheckInEvent],
    records: &BTreeMap<UserId, SuspicionRecord>,
    world: &WorldState,
) -> Result<CalibrationDataset> {
    let flagged: BTreeSet<UserId> = records
        .iter()
        .filter(|(_, r)| r.flagged)
        .map(|(u, _)| *u)
        .collect();
    if flagged.is_empty() {
        return Err(Error::NoFlaggedUsers);
    }
    let venue_by_id: BTreeMap<VenueId, &crate::world::Venue> =
        world.venues.iter().map(|v| (v.id, v)).collect();
    let mut visited: BTreeMap<UserId, BTreeSet<VenueId>> = world
        .users
        .iter()
        .map(|u| (u.id, u.visited.clone()))
        .collect();

    let all_ids: Vec<VenueId> = world.venues.iter().map(|v| v.id).collect();
    let mut observations = Vec::new();
    for event in events {
        if flagged.contains(&event.user) {
            let candidate_ids: &[VenueId] = if event.presented.is_empty() {
                &all_ids
            } else {
                &event.presented
            };
            let seen = visited.entry(event.user).or_default();
            let mut candidates = Vec::with_capacity(candidate_ids.len());
            let mut chosen = None;
            for (i, id) in candidate_ids.iter().enumerate() {
                let venue = match venue_by_id.get(id) {
                    Some(v) => v,
                    None => continue,
                };
                if *id == event.venue {
                    chosen = Some(i);
                }
                candidates.push(CandidateFeatures {
                    features: venue.features.clone(),
                    first_visit: !seen.contains(id),
                });
            }
            if let Some(chosen) = chosen {
                observations.push(Observation { candidates, chosen });
            }
        }
        visited.entry(event.user).or_default().insert(event.venue);
    }
    Ok(CalibrationDataset { observations })
}

/// Log-likelihood of the dataset under the share model with the given
/// weights. Equally attractive candidates (including the all-zero case)
/// contribute the exact uniform probability.
pub fn log_likelihood(data: &CalibrationDataset, weights: &BehaviorWeights) -> f64 {
    let mut ll = 0.0;
    for obs in &data.observations {
        let k = obs.candidates.len();
        let mut total = 0.0;
        let mut chosen_attr = 0.0;
        let mut first = None;
        let mut all_equal = true;
        for (i, c) in obs.candidates.iter().enumerate() {
            let a = behavior::attractiveness(&c.features, c.first_visit, weights);
            total += a;
            if i == obs.chosen {
                chosen_attr = a;
            }
            match first {
                None => first = Some(a),
                Some(f) if f != a => all_equal = false,
                _ => {}
            }
        }
        let p = if all_equal {
            1.0 / k as f64
        } else {
            chosen_attr / total
        };
        if p <= 0.0 {
            return f64::NEG_INFINITY;
        }
        ll += p.ln();
    }
    ll
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    let mut out: u128 = 1;
    for i in 0..k {
        out = out.saturating_mul(n - i) / (i + 1);
    }
    out
}

/// All compositions of `n` into `d` nonnegative parts, in lexicographic
/// order (the tie-break order of the fit).
fn compositions(n: u64, d: usize) -> Vec<Vec<u64>> {
    fn rec(i: usize, remaining: u64, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if i == cur.len() - 1 {
            cur[i] = remaining;
            out.push(cur.clone());
            return;
        }
        for k in 0..=remaining {
            cur[i] = k;
            rec(i + 1, remaining - k, cur, out);
        }
    }
    let mut out = Vec::new();
    let mut cur = vec![0u64; d];
    rec(0, n, &mut cur, &mut out);
    out
}

fn weights_from_point(features: &[FeatureKey], point: &[u64], n: u64) -> BehaviorWeights {
    let deal_vec_len = features
        .iter()
        .filter_map(|f| match f {
            FeatureKey::DealType(i) => Some(i + 1),
            _ => None,
        })
        .max()
        .unwrap_or(0);
    let mut w = BehaviorWeights {
        w_points: 0.0,
        w_mayor: 0.0,
        w_type: BTreeMap::new(),
        w_deal_count: 0.0,
        w_deal_types: vec![0.0; deal_vec_len],
    };
    for (f, &k) in features.iter().zip(point) {
        let value = k as f64 / n as f64;
        match f {
            FeatureKey::Points => w.w_points = value,
            FeatureKey::Mayor => w.w_mayor = value,
            FeatureKey::Type(t) => {
                w.w_type.insert(t.clone(), value);
            }
            FeatureKey::DealCount => w.w_deal_count = value,
            FeatureKey::DealType(i) => w.w_deal_types[*i] = value,
        }
    }
    w
}

/// Maximum-likelihood fit over the simplex of the given weight components.
/// Ties break toward the lexicographically smallest weight vector. A flat
/// likelihood surface is reported as non-identifiable.
pub fn fit_weights_over(
    data: &CalibrationDataset,
    grid_step: f64,
    features: &[FeatureKey],
) -> Result<FitResult> {
    data.validate()?;
    if !(grid_step > 0.0 && grid_step <= 0.5) {
        return Err(Error::InvalidConfig {
            path: "learner.grid_step".into(),
            message: format!("{grid_step} outside (0, 0.5]"),
        });
    }
    if features.is_empty() {
        return Err(Error::InvalidConfig {
            path: "learner.features".into(),
            message: "at least one weight component must be free".into(),
        });
    }
    let n = (1.0 / grid_step).round() as u64;
    let d = features.len();
    let points = binomial(n as u128 + d as u128 - 1, d as u128 - 1);
    if points > MAX_GRID_POINTS {
        return Err(Error::GridTooLarge {
            points,
            limit: MAX_GRID_POINTS,
        });
    }

    let grid = compositions(n, d);
    // (log-likelihood, lexicographic position) per point; the reduce is a
    // total order, so the parallel fold is deterministic.
    let evaluated: Vec<f64> = grid
        .par_iter()
        .map(|point| log_likelihood(data, &weights_from_point(features, point, n)))
        .collect();

    let mut best_idx = 0usize;
    let mut best_ll = f64::NEG_INFINITY;
    let mut worst_ll = f64::INFINITY;
    for (i, &ll) in evaluated.iter().enumerate() {
        if ll > best_ll {
            best_ll = ll;
            best_idx = i;
        }
        if ll < worst_ll {
            worst_ll = ll;
        }
    }
    if best_ll == f64::NEG_INFINITY || best_ll - worst_ll <= 1e-9 {
        return Err(Error::NonIdentifiable);
    }
    Ok(FitResult {
        weights: weights_from_point(features, &grid[best_idx], n),
        log_likelihood: best_ll,
        grid_step: 1.0 / n as f64,
        n_observations: data.observations.len(),
    })
}

/// Fit over the base two-feature model (points and mayorship weights).
pub fn fit_weights(data: &CalibrationDataset, grid_step: f64) -> Result<FitResult> {
    fit_weights_over(data, grid_step, &[FeatureKey::Points, FeatureKey::Mayor])
}

/// Convex blend of the current estimate toward a new fit, renormalized.
/// `blend = 0` keeps the current estimate; `blend = 1` adopts the fit.
pub fn blend_estimate(
    current: &BehaviorWeights,
    fitted: &BehaviorWeights,
    blend: f64,
) -> Result<BehaviorWeights> {
    if !(0.0..=1.0).contains(&blend) {
        return Err(Error::InvalidConfig {
            path: "learner.blend".into(),
            message: format!("{blend} outside [0, 1]"),
        });
    }
    let mix = |a: f64, b: f64| (1.0 - blend) * a + blend * b;
    let mut w_type = BTreeMap::new();
    for key in current.w_type.keys().chain(fitted.w_type.keys()) {
        let a = current.w_type.get(key).copied().unwrap_or(0.0);
        let b = fitted.w_type.get(key).copied().unwrap_or(0.0);
        w_type.insert(key.clone(), mix(a, b));
    }
    let deal_len = current.w_deal_types.len().max(fitted.w_deal_types.len());
    let w_deal_types = (0..deal_len)
        .map(|i| {
            mix(
                current.w_deal_types.get(i).copied().unwrap_or(0.0),
                fitted.w_deal_types.get(i).copied().unwrap_or(0.0),
            )
        })
        .collect();
    BehaviorWeights {
        w_points: mix(current.w_points, fitted.w_points),
        w_mayor: mix(current.w_mayor, fitted.w_mayor),
        w_type,
        w_deal_count: mix(current.w_deal_count, fitted.w_deal_count),
        w_deal_types,
    }
    .normalized()
}

/// Likelihood gain from freeing one extension feature on top of the base
/// model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureGain {
    pub feature: FeatureKey,
    pub log_likelihood_gain: f64,
    pub recommended: bool,
}

/// For each candidate feature, refits with that feature's weight freed and
/// reports the log-likelihood improvement over the base fit. Gains above
/// the threshold are recommended for inclusion in the model.
pub fn extend_feature_set(
    data: &CalibrationDataset,
    candidates: &[FeatureKey],
    grid_step: f64,
    gain_threshold: f64,
) -> Result<Vec<FeatureGain>> {
    if candidates.is_empty() {
        return Ok(Vec::new());
    }
    let base = fit_weights(data, grid_step)?;
    let mut out = Vec::with_capacity(candidates.len());
    for candidate in candidates {
        let mut features = vec![FeatureKey::Points, FeatureKey::Mayor];
        features.push(candidate.clone());
        let ext = fit_weights_over(data, grid_step, &features)?;
        let gain = ext.log_likelihood - base.log_likelihood;
        out.push(FeatureGain {
            feature: candidate.clone(),
            log_likelihood_gain: gain,
            recommended: gain > gain_threshold,
        });
    }
    Ok(out)
}
