//! Honeypot design and presentation policy.
//!
//! Honeypot features maximize attractiveness under the current model
//! estimate: the objective is linear over box constraints, so every numeric
//! feature sits at its upper bound when its weight is positive and at its
//! lower bound otherwise, and the category is the argmax-weight type. A
//! small jitter keeps deployed honeypots from being carbon copies of each
//! other — they must look exactly like legitimate venues.
//!
//! Presentation interleaves honeypots into the delta-venue list a user sees
//! at check-in time. How many and in what order is an open policy question;
//! the knobs here (placement, personalization, position bias) exist to make
//! it measurable.

use crate::behavior::BehaviorWeights;
use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::world::{User, Venue, VenueFeatures, VenueId, WorldState};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Where honeypots go inside the presented list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    Top,
    Bottom,
    UniformInterleave,
}

/// How the delta-venue list shown at check-in time is composed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PresentationPolicy {
    /// List length delta.
    #[serde(rename = "delta")]
    pub list_length: usize,
    /// How many of the delta slots are honeypots (clamped to the number of
    /// honeypots that exist).
    pub hv_count: usize,
    pub placement: Placement,
    /// Scale the honeypot count with the user's current suspiciousness.
    pub personalize: bool,
}

impl Default for PresentationPolicy {
    fn default() -> Self {
        PresentationPolicy {
            list_length: 10,
            hv_count: 1,
            placement: Placement::UniformInterleave,
            personalize: false,
        }
    }
}

impl PresentationPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.list_length == 0 {
            return Err(Error::InvalidConfig {
                path: "presentation.delta".into(),
                message: "list length must be positive".into(),
            });
        }
        if self.hv_count > self.list_length {
            return Err(Error::InvalidConfig {
                path: "presentation.hv_count".into(),
                message: format!("{} exceeds delta {}", self.hv_count, self.list_length),
            });
        }
        Ok(())
    }
}

/// Attention profile over list positions: how much weight a user gives the
/// i-th slot. Non-increasing, first entry positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionBias {
    pub attention: Vec<f64>,
}

impl PositionBias {
    /// Equal attention everywhere: order has no effect.
    pub fn uniform(len: usize) -> PositionBias {
        let p = 1.0 / len.max(1) as f64;
        PositionBias {
            attention: vec![p; len],
        }
    }

    /// Attention proportional to 1/position, normalized.
    pub fn harmonic(len: usize) -> PositionBias {
        let raw: Vec<f64> = (1..=len.max(1)).map(|i| 1.0 / i as f64).collect();
        let total: f64 = raw.iter().sum();
        PositionBias {
            attention: raw.into_iter().map(|a| a / total).collect(),
        }
    }

    pub fn is_flat(&self) -> bool {
        self.attention.windows(2).all(|w| w[0] == w[1])
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |message: String| Error::InvalidConfig {
            path: "presentation.position_bias".into(),
            message,
        };
        match self.attention.first() {
            None => return Err(bad("attention profile is empty".into())),
            Some(&a) if a <= 0.0 => return Err(bad("first entry must be positive".into())),
            _ => {}
        }
        if self.attention.iter().any(|&a| !(0.0..=1.0).contains(&a)) {
            return Err(bad("entries must lie in [0, 1]".into()));
        }
        if self.attention.windows(2).any(|w| w[1] > w[0]) {
            return Err(bad("entries must be non-increasing".into()));
        }
        Ok(())
    }
}

/// Admissible feature ranges for honeypot design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBounds {
    pub points: [u32; 2],
    pub points_repeat: [u32; 2],
    pub mayorship: [f64; 2],
    pub deal_count: [u32; 2],
    pub venue_types: Vec<String>,
    pub deal_type_count: usize,
}

/// What to do when the design objective is degenerate (all-zero estimate).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OnZeroModel {
    /// Refuse: silently random honeypots would mask calibration bugs.
    Error,
    /// Draw features uniformly within bounds.
    Random,
}

fn clamp_u32(v: f64, lo: u32, hi: u32) -> u32 {
    (v.round() as i64).clamp(lo as i64, hi as i64) as u32
}

/// Corner of the feature box maximizing a linear objective, with coherence
/// between the offer count and the offer-type vector restored afterwards.
fn corner_features(estimate: &BehaviorWeights, bounds: &FeatureBounds) -> VenueFeatures {
    let hi_or_lo = |w: f64, b: [u32; 2]| if w > 0.0 { b[1] } else { b[0] };
    let mayorship = if estimate.w_mayor > 0.0 {
        bounds.mayorship[1]
    } else {
        bounds.mayorship[0]
    };
    let venue_type = bounds
        .venue_types
        .iter()
        .max_by(|a, b| {
            let wa = estimate.w_type.get(*a).copied().unwrap_or(0.0);
            let wb = estimate.w_type.get(*b).copied().unwrap_or(0.0);
            // Ties go to the lexicographically smallest category.
            wa.partial_cmp(&wb)
                .unwrap()
                .then_with(|| b.cmp(a))
        })
        .cloned()
        .unwrap_or_default();
    let mut deal_types: Vec<bool> = (0..bounds.deal_type_count)
        .map(|i| estimate.w_deal_types.get(i).copied().unwrap_or(0.0) > 0.0)
        .collect();
    let mut deal_count = hi_or_lo(estimate.w_deal_count, bounds.deal_count);
    fix_deal_coherence(&mut deal_count, &mut deal_types, bounds);
    VenueFeatures {
        points_new: hi_or_lo(estimate.w_points, bounds.points),
        points_repeat: hi_or_lo(estimate.w_points, bounds.points_repeat),
        mayorship_prob: mayorship,
        venue_type,
        deal_count,
        deal_types,
    }
}

/// Enforces `deal_count = 0 <=> deal_types all-zero` without lowering the
/// objective (weights are nonnegative, so adding an offer bit never hurts).
fn fix_deal_coherence(deal_count: &mut u32, deal_types: &mut [bool], bounds: &FeatureBounds) {
    if bounds.deal_count[1] == 0 || deal_types.is_empty() {
        *deal_count = 0;
        deal_types.iter_mut().for_each(|b| *b = false);
        return;
    }
    let any = deal_types.iter().any(|&b| b);
    if any && *deal_count == 0 {
        *deal_count = 1.max(bounds.deal_count[0]);
    } else if !any && *deal_count > 0 {
        deal_types[0] = true;
    }
}

fn random_features(bounds: &FeatureBounds, rng: &mut SimRng) -> VenueFeatures {
    let int_in = |b: [u32; 2], rng: &mut SimRng| {
        if b[0] == b[1] {
            b[0]
        } else {
            rng.gen_range(b[0]..=b[1])
        }
    };
    let points_new = int_in(bounds.points, rng);
    let points_repeat = int_in(bounds.points_repeat, rng);
    let mayorship_prob = if bounds.mayorship[0] == bounds.mayorship[1] {
        bounds.mayorship[0]
    } else {
        rng.gen_range(bounds.mayorship[0]..=bounds.mayorship[1])
    };
    let venue_type = bounds.venue_types[rng.gen_range(0..bounds.venue_types.len().max(1))].clone();
    let mut deal_count = int_in(bounds.deal_count, rng);
    let mut deal_types: Vec<bool> = (0..bounds.deal_type_count)
        .map(|_| deal_count > 0 && rng.gen_bool(0.5))
        .collect();
    fix_deal_coherence(&mut deal_count, &mut deal_types, bounds);
    VenueFeatures {
        points_new,
        points_repeat,
        mayorship_prob,
        venue_type,
        deal_count,
        deal_types,
    }
}

/// Designs honeypot feature vectors against a model estimate. Each numeric
/// feature is driven to the bound the estimate rewards, then jittered by
/// the given relative amount (0 disables jitter) and clamped back into
/// bounds.
pub fn design_honeypot_features(
    count: usize,
    estimate: &BehaviorWeights,
    bounds: &FeatureBounds,
    jitter: f64,
    on_zero: OnZeroModel,
    rng: &mut SimRng,
) -> Result<Vec<VenueFeatures>> {
    if estimate.is_zero() {
        return match on_zero {
            OnZeroModel::Error => Err(Error::DegenerateDesign),
            OnZeroModel::Random => Ok((0..count).map(|_| random_features(bounds, rng)).collect()),
        };
    }
    let base = corner_features(estimate, bounds);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut f = base.clone();
        if jitter > 0.0 {
            let j = |v: f64, rng: &mut SimRng| v * (1.0 + rng.gen_range(-jitter..=jitter));
            f.points_new = clamp_u32(
                j(f.points_new as f64, rng),
                bounds.points[0],
                bounds.points[1],
            );
            f.points_repeat = clamp_u32(
                j(f.points_repeat as f64, rng),
                bounds.points_repeat[0],
                bounds.points_repeat[1],
            );
            f.mayorship_prob = j(f.mayorship_prob, rng)
                .clamp(bounds.mayorship[0], bounds.mayorship[1])
                .clamp(0.0, 1.0);
            f.deal_count = clamp_u32(
                j(f.deal_count as f64, rng),
                bounds.deal_count[0],
                bounds.deal_count[1],
            );
            fix_deal_coherence(&mut f.deal_count, &mut f.deal_types, bounds);
        }
        out.push(f);
    }
    Ok(out)
}

/// Wraps designed features into honeypot venues with sequential ids.
/// Honeypots advertise offers through their features but never carry a
/// real [`crate::world::Deal`]: there is no locale behind them.
pub fn design_honeypots(
    count: usize,
    estimate: &BehaviorWeights,
    bounds: &FeatureBounds,
    jitter: f64,
    on_zero: OnZeroModel,
    first_id: VenueId,
    rng: &mut SimRng,
) -> Result<Vec<Venue>> {
    let features = design_honeypot_features(count, estimate, bounds, jitter, on_zero, rng)?;
    Ok(features
        .into_iter()
        .enumerate()
        .map(|(i, f)| Venue {
            id: VenueId(first_id.0 + i as u64),
            features: f,
            is_honeypot: true,
            deal: None,
            challenge: None,
        })
        .collect())
}

/// Suspicion context for personalized honeypot dosing.
#[derive(Debug, Clone, Copy)]
pub struct SuspicionInput {
    pub level: f64,
    pub threshold: f64,
}

/// Evenly spaced honeypot slots: `round(j * delta / (hv + 1))` for
/// `j = 1..=hv`, converted to zero-based indices; collisions shift right.
fn interleave_slots(delta: usize, hv: usize) -> Vec<usize> {
    let mut used = vec![false; delta];
    let mut slots = Vec::with_capacity(hv);
    for j in 1..=hv {
        let pos = (j as f64 * delta as f64 / (hv + 1) as f64).round() as usize;
        let mut idx = pos.clamp(1, delta) - 1;
        while used[idx] {
            idx = (idx + 1) % delta;
        }
        used[idx] = true;
        slots.push(idx);
    }
    slots.sort_unstable();
    slots
}

/// Composes the ordered delta-venue list shown to a user: the effective
/// number of honeypots (scaled by suspiciousness when personalization is
/// on) placed per policy, remaining slots filled by sampling the user's
/// preference profile without replacement.
pub fn present_venues(
    user: &User,
    world: &WorldState,
    policy: &PresentationPolicy,
    suspicion: Option<SuspicionInput>,
    rng: &mut SimRng,
) -> Result<Vec<VenueId>> {
    let delta = policy.list_length;
    let mut hv = policy.hv_count.min(world.lambda);
    if policy.personalize {
        if let Some(s) = suspicion {
            if s.threshold > 0.0 {
                let scaled = (policy.hv_count as f64 * (1.0 + s.level / s.threshold)).round();
                hv = (scaled as usize).min(world.lambda);
            }
        }
    }
    let hv = hv.min(delta);
    let real_needed = delta - hv;
    if real_needed > world.phi {
        return Err(Error::InsufficientRealVenues {
            needed: real_needed,
            available: world.phi,
        });
    }

    // Honeypot slots: distinct uniform draw from the honeypot pool.
    let hv_ids = world.honeypot_ids();
    let chosen_hvs: Vec<VenueId> = rand::seq::index::sample(rng, hv_ids.len(), hv)
        .iter()
        .map(|i| hv_ids[i])
        .collect();

    // Real slots: preference-weighted draw without replacement.
    let chosen_reals = sample_preferred(user, real_needed, rng);

    let hv_slots: Vec<usize> = match policy.placement {
        Placement::Top => (0..hv).collect(),
        Placement::Bottom => (delta - hv..delta).collect(),
        Placement::UniformInterleave => interleave_slots(delta, hv),
    };

    let mut list = vec![VenueId(u64::MAX); delta];
    for (slot, id) in hv_slots.iter().zip(&chosen_hvs) {
        list[*slot] = *id;
    }
    let mut reals = chosen_reals.into_iter();
    for slot in list.iter_mut() {
        if *slot == VenueId(u64::MAX) {
            *slot = reals.next().expect("real slots counted above");
        }
    }
    Ok(list)
}

/// Draws `k` distinct venues from the user's preference profile,
/// proportional to preference. Binary search over the cumulative profile
/// with rejection of duplicates; falls back to a renormalizing scan if
/// rejection stalls on a concentrated profile.
fn sample_preferred(user: &User, k: usize, rng: &mut SimRng) -> Vec<VenueId> {
    let prefs = &user.preference;
    let mut cum = Vec::with_capacity(prefs.len());
    let mut total = 0.0;
    for &(_, w) in prefs {
        total += w;
        cum.push(total);
    }
    let mut out: Vec<VenueId> = Vec::with_capacity(k);
    if total <= 0.0 {
        // Degenerate profile: uniform distinct draw.
        for i in rand::seq::index::sample(rng, prefs.len(), k.min(prefs.len())) {
            out.push(prefs[i].0);
        }
        return out;
    }
    let mut taken = vec![false; prefs.len()];
    'outer: for _ in 0..k {
        for _attempt in 0..32 {
            let u = rng.gen::<f64>() * total;
            let idx = cum.partition_point(|&c| c <= u).min(prefs.len() - 1);
            if !taken[idx] {
                taken[idx] = true;
                out.push(prefs[idx].0);
                continue 'outer;
            }
        }
        // Rejection stalled: renormalize over the remainder.
        let rem: f64 = prefs
            .iter()
            .enumerate()
            .filter(|(i, _)| !taken[*i])
            .map(|(_, &(_, w))| w)
            .sum();
        let mut u = rng.gen::<f64>() * rem;
        for (i, &(id, w)) in prefs.iter().enumerate() {
            if taken[i] {
                continue;
            }
            u -= w;
            if u < 0.0 {
                taken[i] = true;
                out.push(id);
                continue 'outer;
            }
        }
        // Numerical tail: take the last free slot.
        if let Some((i, &(id, _))) = prefs.iter().enumerate().rev().find(|(i, _)| !taken[*i]) {
            taken[i] = true;
            out.push(id);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SimConfig;
    use crate::rng::rng_from_seed;
    use crate::world::build_world;

    fn bounds() -> FeatureBounds {
        FeatureBounds {
            points: [1, 3],
            points_repeat: [1, 1],
            mayorship: [0.0, 1.0],
            deal_count: [0, 1],
            venue_types: vec!["bar".into(), "cafe".into(), "restaurant".into()],
            deal_type_count: 2,
        }
    }

    #[test]
    fn design_attains_the_corner() {
        let mut rng = rng_from_seed(1);
        let hvs = design_honeypot_features(
            3,
            &BehaviorWeights::default(),
            &bounds(),
            0.0,
            OnZeroModel::Error,
            &mut rng,
        )
        .unwrap();
        for f in &hvs {
            assert_eq!(f.points_new, 3);
            assert_eq!(f.mayorship_prob, 1.0);
            assert_eq!(f.deal_count, 0);
            assert!(f.deal_types.iter().all(|&b| !b));
        }
    }

    #[test]
    fn monetary_tuned_design_maxes_deal_features() {
        let mut rng = rng_from_seed(1);
        let est = BehaviorWeights::deal_dominant(2);
        let hvs =
            design_honeypot_features(2, &est, &bounds(), 0.0, OnZeroModel::Error, &mut rng)
                .unwrap();
        for f in &hvs {
            assert_eq!(f.deal_count, 1);
            assert!(f.deal_types.iter().all(|&b| b));
        }
    }

    #[test]
    fn zero_estimate_errors_or_randomizes_per_flag() {
        let zero = BehaviorWeights {
            w_points: 0.0,
            w_mayor: 0.0,
            ..BehaviorWeights::default()
        };
        let mut rng = rng_from_seed(1);
        assert!(matches!(
            design_honeypot_features(1, &zero, &bounds(), 0.0, OnZeroModel::Error, &mut rng),
            Err(Error::DegenerateDesign)
        ));
        let fs =
            design_honeypot_features(5, &zero, &bounds(), 0.0, OnZeroModel::Random, &mut rng)
                .unwrap();
        assert_eq!(fs.len(), 5);
        for f in fs {
            f.validate(2).unwrap();
        }
    }

    #[test]
    fn jittered_features_stay_in_bounds() {
        let mut rng = rng_from_seed(9);
        let fs = design_honeypot_features(
            200,
            &BehaviorWeights::default(),
            &bounds(),
            0.1,
            OnZeroModel::Error,
            &mut rng,
        )
        .unwrap();
        for f in fs {
            assert!((1..=3).contains(&f.points_new));
            assert!((0.0..=1.0).contains(&f.mayorship_prob));
            f.validate(2).unwrap();
        }
    }

    #[test]
    fn interleave_slots_frozen_by_enumeration() {
        // delta=10, hv=3: positions round(2.5), round(5), round(7.5) =
        // 3, 5, 8 one-based.
        assert_eq!(interleave_slots(10, 3), vec![2, 4, 7]);
        assert_eq!(interleave_slots(10, 1), vec![4]);
        assert_eq!(interleave_slots(4, 3), vec![0, 1, 2]);
        assert_eq!(interleave_slots(3, 3), vec![0, 1, 2]);
    }

    fn test_world(lambda: usize, phi: usize) -> (SimConfig, crate::world::WorldState) {
        let mut c = SimConfig::default();
        c.venues.lambda = lambda;
        c.venues.phi = phi;
        c.users.honest = 1;
        c.users.gamer = 0;
        let w = build_world(&c, &mut rng_from_seed(3)).unwrap();
        (c, w)
    }

    #[test]
    fn presentation_places_honeypots_per_policy() {
        let (_, w) = test_world(5, 50);
        let user = &w.users[0];
        let mut rng = rng_from_seed(8);
        for (placement, expect_slots) in [
            (Placement::Top, vec![0, 1, 2]),
            (Placement::Bottom, vec![7, 8, 9]),
            (Placement::UniformInterleave, vec![2, 4, 7]),
        ] {
            let policy = PresentationPolicy {
                list_length: 10,
                hv_count: 3,
                placement,
                personalize: false,
            };
            let list = present_venues(user, &w, &policy, None, &mut rng).unwrap();
            assert_eq!(list.len(), 10);
            let hv_slots: Vec<usize> = list
                .iter()
                .enumerate()
                .filter(|(_, id)| w.venue(**id).unwrap().is_honeypot)
                .map(|(i, _)| i)
                .collect();
            assert_eq!(hv_slots, expect_slots, "{placement:?}");
        }
    }

    #[test]
    fn zero_hv_policy_presents_no_honeypots() {
        let (_, w) = test_world(5, 50);
        let policy = PresentationPolicy {
            hv_count: 0,
            ..PresentationPolicy::default()
        };
        let mut rng = rng_from_seed(2);
        let list = present_venues(&w.users[0], &w, &policy, None, &mut rng).unwrap();
        assert!(list.iter().all(|id| !w.venue(*id).unwrap().is_honeypot));
    }

    #[test]
    fn no_duplicates_and_exact_hv_count() {
        let (_, w) = test_world(7, 40);
        let policy = PresentationPolicy {
            list_length: 12,
            hv_count: 4,
            placement: Placement::UniformInterleave,
            personalize: false,
        };
        let mut rng = rng_from_seed(17);
        for _ in 0..200 {
            let list = present_venues(&w.users[0], &w, &policy, None, &mut rng).unwrap();
            let mut sorted = list.clone();
            sorted.sort_unstable();
            sorted.dedup();
            assert_eq!(sorted.len(), list.len(), "duplicate venue in list");
            let hvs = list
                .iter()
                .filter(|id| w.venue(**id).unwrap().is_honeypot)
                .count();
            assert_eq!(hvs, 4);
        }
    }

    #[test]
    fn personalization_scales_honeypot_dose() {
        let (_, w) = test_world(8, 40);
        let policy = PresentationPolicy {
            list_length: 10,
            hv_count: 2,
            placement: Placement::Top,
            personalize: true,
        };
        let mut rng = rng_from_seed(5);
        // level == threshold doubles the dose: round(2 * (1 + 1)) = 4.
        let list = present_venues(
            &w.users[0],
            &w,
            &policy,
            Some(SuspicionInput {
                level: 4.0,
                threshold: 4.0,
            }),
            &mut rng,
        )
        .unwrap();
        let hvs = list
            .iter()
            .filter(|id| w.venue(**id).unwrap().is_honeypot)
            .count();
        assert_eq!(hvs, 4);
    }

    #[test]
    fn insufficient_real_venues_rejected() {
        let (_, w) = test_world(2, 5);
        let policy = PresentationPolicy {
            list_length: 10,
            hv_count: 2,
            placement: Placement::Top,
            personalize: false,
        };
        let mut rng = rng_from_seed(5);
        assert!(matches!(
            present_venues(&w.users[0], &w, &policy, None, &mut rng),
            Err(Error::InsufficientRealVenues { .. })
        ));
    }

    #[test]
    fn designed_honeypots_beat_mean_real_attractiveness() {
        let mut c = SimConfig::default();
        c.venues.lambda = 10;
        c.venues.phi = 100;
        let w = build_world(&c, &mut rng_from_seed(21)).unwrap();
        let est = BehaviorWeights::default();
        let mean_real: f64 = w
            .venues
            .iter()
            .filter(|v| !v.is_honeypot)
            .map(|v| crate::behavior::attractiveness(&v.features, true, &est))
            .sum::<f64>()
            / w.phi as f64;
        for v in w.venues.iter().filter(|v| v.is_honeypot) {
            let a = crate::behavior::attractiveness(&v.features, true, &est);
            assert!(
                a >= mean_real,
                "honeypot {} attractiveness {a} below real mean {mean_real}",
                v.id
            );
        }
    }

    #[test]
    fn harmonic_bias_is_valid_and_normalized() {
        let b = PositionBias::harmonic(10);
        b.validate().unwrap();
        let sum: f64 = b.attention.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(!b.is_flat());
        assert!(PositionBias::uniform(5).is_flat());
    }
}
