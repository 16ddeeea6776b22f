//! Check-in choice models for cheaters and honest users.
//!
//! The linear attractiveness model scores a venue as a weighted sum of its
//! features; a cheater's check-in probability is the venue's share of total
//! attractiveness over the candidate set. With all candidates equally
//! appealing this reduces to the uniform model, whose honeypot mass has the
//! closed form `lambda / (lambda + phi)`.
//!
//! All operations are pure functions of their inputs plus an explicitly
//! passed random source.

use crate::detector::DetectorConfig;
use crate::error::{Error, Result};
use crate::honeypots::PositionBias;
use crate::rng::SimRng;
use crate::world::{User, UserClass, Venue, VenueFeatures, VenueId};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Parameter vector of the linear choice model: weights on check-in points
/// and mayorship probability, plus the categorical and deal extensions.
/// Only the direction of the vector is identifiable (the choice
/// probabilities are scale invariant), so the canonical form normalizes the
/// weights to sum 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BehaviorWeights {
    pub w_points: f64,
    pub w_mayor: f64,
    pub w_type: BTreeMap<String, f64>,
    pub w_deal_count: f64,
    pub w_deal_types: Vec<f64>,
}

impl Default for BehaviorWeights {
    /// The initial model: equal weight on points and mayorship, no
    /// extensions.
    fn default() -> Self {
        BehaviorWeights {
            w_points: 0.5,
            w_mayor: 0.5,
            w_type: BTreeMap::new(),
            w_deal_count: 0.0,
            w_deal_types: Vec::new(),
        }
    }
}

impl BehaviorWeights {
    /// Deal-focused weights: much higher weight on the offer variables, as
    /// used for monetary cheaters and monetary-tuned honeypot design.
    pub fn deal_dominant(deal_type_count: usize) -> Self {
        BehaviorWeights {
            w_points: 0.5,
            w_mayor: 0.5,
            w_type: BTreeMap::new(),
            w_deal_count: 10.0,
            w_deal_types: vec![10.0; deal_type_count],
        }
    }

    /// Sum over every component.
    pub fn total(&self) -> f64 {
        self.w_points
            + self.w_mayor
            + self.w_type.values().sum::<f64>()
            + self.w_deal_count
            + self.w_deal_types.iter().sum::<f64>()
    }

    pub fn is_zero(&self) -> bool {
        self.total() == 0.0
    }

    /// Canonical representative of the scale-invariance class: weights
    /// divided by their sum.
    pub fn normalized(&self) -> Result<BehaviorWeights> {
        self.validate()?;
        let total = self.total();
        let mut out = self.clone();
        out.w_points /= total;
        out.w_mayor /= total;
        for w in out.w_type.values_mut() {
            *w /= total;
        }
        out.w_deal_count /= total;
        for w in &mut out.w_deal_types {
            *w /= total;
        }
        Ok(out)
    }

    /// All weights finite and nonnegative, with at least one positive.
    pub fn validate(&self) -> Result<()> {
        let all = self
            .w_type
            .values()
            .chain(self.w_deal_types.iter())
            .chain([&self.w_points, &self.w_mayor, &self.w_deal_count]);
        for &w in all {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidWeights(format!(
                    "weight {w} is negative or not finite"
                )));
            }
        }
        if self.is_zero() {
            return Err(Error::InvalidWeights(
                "at least one weight must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Linear attractiveness of one venue under the given weights. The points
/// feature resolves to `points_new` on a first visit and `points_repeat`
/// otherwise; with all extension weights zero this is exactly the
/// two-feature points/mayorship model.
pub fn attractiveness(features: &VenueFeatures, first_visit: bool, weights: &BehaviorWeights) -> f64 {
    let n = if first_visit {
        features.points_new
    } else {
        features.points_repeat
    } as f64;
    let mut a = weights.w_points * n + weights.w_mayor * features.mayorship_prob;
    if let Some(w) = weights.w_type.get(&features.venue_type) {
        a += w;
    }
    a += weights.w_deal_count * features.deal_count as f64;
    for (w, &y) in weights.w_deal_types.iter().zip(features.deal_types.iter()) {
        if y {
            a += w;
        }
    }
    a
}

/// Choice probabilities over a candidate set, with the combined probability
/// mass on honeypot candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceDistribution {
    /// Per-candidate probabilities, in candidate order.
    pub probs: Vec<f64>,
    /// Total probability of choosing a honeypot candidate.
    pub honeypot_mass: f64,
}

/// Normalized choice distribution over `(venue, first_visit)` candidates.
///
/// When every candidate is equally attractive (including the degenerate
/// all-zero case) the distribution is uniform and the honeypot mass is the
/// exact count ratio, matching the closed form for indistinguishable
/// venues.
pub fn choice_distribution(
    candidates: &[(&Venue, bool)],
    weights: &BehaviorWeights,
) -> Result<ChoiceDistribution> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let k = candidates.len();
    let attrs: Vec<f64> = candidates
        .iter()
        .map(|(v, first)| attractiveness(&v.features, *first, weights))
        .collect();
    let hv_count = candidates.iter().filter(|(v, _)| v.is_honeypot).count();

    let all_equal = attrs.iter().all(|&a| a == attrs[0]);
    if all_equal {
        let p = 1.0 / k as f64;
        return Ok(ChoiceDistribution {
            probs: vec![p; k],
            honeypot_mass: hv_count as f64 / k as f64,
        });
    }

    let total: f64 = attrs.iter().sum();
    let probs: Vec<f64> = attrs.iter().map(|a| a / total).collect();
    let honeypot_mass = candidates
        .iter()
        .zip(&probs)
        .filter(|((v, _), _)| v.is_honeypot)
        .map(|(_, p)| p)
        .sum();
    Ok(ChoiceDistribution {
        probs,
        honeypot_mass,
    })
}

/// Honeypot check-in probability when every venue is equally appealing:
/// `lambda / (lambda + phi)`.
pub fn uniform_honeypot_mass(lambda: usize, phi: usize) -> Result<f64> {
    if lambda + phi == 0 {
        return Err(Error::EmptyWorld);
    }
    Ok(lambda as f64 / (lambda + phi) as f64)
}

/// Samples an index proportional to the given nonnegative weights; falls
/// back to uniform when all weights are zero.
fn sample_weighted(weights: &[f64], rng: &mut SimRng) -> usize {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return rng.gen_range(0..weights.len());
    }
    let mut u = rng.gen::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        u -= w;
        if u < 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

/// Samples a cheater's venue choice from the class-appropriate model,
/// reweighted by the position-bias attention profile.
///
/// * `UniformCheater` ignores features entirely (the blind model);
/// * `GamerCheater` and `AdaptiveCheater` use the given weights as-is;
/// * `MonetaryCheater` first restricts candidates to venues it has visited
///   in real life or venues advertising offers (falling back to the full
///   list if that leaves nothing).
///
/// Honest users are not served here: their model is [`honest_pick`].
pub fn pick_venue(
    user: &User,
    presented: &[(&Venue, bool)],
    weights: &BehaviorWeights,
    bias: &PositionBias,
    rng: &mut SimRng,
) -> Result<VenueId> {
    if presented.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    if user.class == UserClass::Honest {
        return Err(Error::HonestModel);
    }
    let attention = |i: usize| bias.attention.get(i).copied().unwrap_or(0.0);

    match user.class {
        UserClass::UniformCheater => {
            if bias.is_flat() {
                let i = rng.gen_range(0..presented.len());
                return Ok(presented[i].0.id);
            }
            let w: Vec<f64> = (0..presented.len()).map(attention).collect();
            Ok(presented[sample_weighted(&w, rng)].0.id)
        }
        UserClass::MonetaryCheater => {
            let kept: Vec<usize> = (0..presented.len())
                .filter(|&i| {
                    let v = presented[i].0;
                    user.visited.contains(&v.id) || v.advertises_deal()
                })
                .collect();
            let kept = if kept.is_empty() {
                (0..presented.len()).collect()
            } else {
                kept
            };
            let sub: Vec<(&Venue, bool)> = kept.iter().map(|&i| presented[i]).collect();
            let dist = choice_distribution(&sub, weights)?;
            let w: Vec<f64> = kept
                .iter()
                .zip(&dist.probs)
                .map(|(&i, &p)| p * attention(i))
                .collect();
            Ok(presented[kept[sample_weighted(&w, rng)]].0.id)
        }
        _ => {
            let dist = choice_distribution(presented, weights)?;
            let w: Vec<f64> = dist
                .probs
                .iter()
                .enumerate()
                .map(|(i, &p)| p * attention(i))
                .collect();
            Ok(presented[sample_weighted(&w, rng)].0.id)
        }
    }
}

/// Honest-user choice: with probability `hv_accident_prob` (and at least
/// one honeypot in the list) an accidental check-in at a uniformly random
/// presented honeypot; otherwise a real venue drawn proportionally to the
/// user's static preference profile.
pub fn honest_pick(
    user: &User,
    presented: &[&Venue],
    hv_accident_prob: f64,
    rng: &mut SimRng,
) -> Result<VenueId> {
    if presented.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let honeypots: Vec<&Venue> = presented.iter().copied().filter(|v| v.is_honeypot).collect();
    if !honeypots.is_empty() && rng.gen_bool(hv_accident_prob) {
        let i = rng.gen_range(0..honeypots.len());
        return Ok(honeypots[i].id);
    }
    let reals: Vec<&Venue> = presented.iter().copied().filter(|v| !v.is_honeypot).collect();
    if reals.is_empty() {
        return Err(Error::NoRealVenues);
    }
    let w: Vec<f64> = reals.iter().map(|v| user.preference_for(v.id)).collect();
    Ok(reals[sample_weighted(&w, rng)].id)
}

/// Containment budget of a detection-aware cheater.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdaptiveBudget {
    /// No honeypot risk: nothing contains the cheater.
    Unlimited,
    /// Largest number of fakes whose predicted suspiciousness stays within
    /// the safety margin of the threshold.
    Limited(u64),
}

/// Computes the largest fake-check-in budget `B` such that the predicted
/// expected suspiciousness after `B` fakes stays at or below
/// `safety_margin * threshold`. The prediction uses the expected honeypot
/// hits `B * p_c` for both counters (distinct honeypots capped at
/// `lambda`), since a cheater cannot tell which of its fakes landed on
/// honeypots.
pub fn adaptive_budget(
    detector: &DetectorConfig,
    lambda: usize,
    honeypot_mass: f64,
    safety_margin: f64,
) -> AdaptiveBudget {
    if honeypot_mass <= 0.0 {
        return AdaptiveBudget::Unlimited;
    }
    let target = safety_margin * detector.threshold;
    let expected = |b: u64| -> f64 {
        let hits = b as f64 * honeypot_mass;
        detector.w_q * hits + detector.w_r * hits.min(lambda as f64)
    };
    // The predicted level saturates at w_r * lambda when w_q is zero.
    if detector.w_q * honeypot_mass <= 0.0 && detector.w_r * lambda as f64 <= target {
        return AdaptiveBudget::Unlimited;
    }
    if expected(1) > target {
        return AdaptiveBudget::Limited(0);
    }
    let mut hi = 1u64;
    while expected(hi) <= target {
        if hi >= u64::MAX / 2 {
            return AdaptiveBudget::Unlimited;
        }
        hi *= 2;
    }
    let mut lo = hi / 2; // expected(lo) <= target < expected(hi)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if expected(mid) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    AdaptiveBudget::Limited(lo)
}
