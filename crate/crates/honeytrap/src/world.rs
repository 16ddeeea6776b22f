//! Static world model: venues, deals, users, and the event vocabulary.
//!
//! A [`WorldState`] is built once from a config and a seeded random source,
//! and is immutable afterwards; simulation runs clone the pieces they
//! mutate. Building is a pure function of `(config, seed)`: equal inputs
//! produce field-for-field equal worlds.

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::honeypots;
use crate::money::Money;
use crate::rng::SimRng;
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;

/// Opaque venue identifier. Worlds built by [`build_world`] number venues
/// densely from zero (real venues first, then honeypots).
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct VenueId(pub u64);

/// Opaque user identifier, dense from zero.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct UserId(pub u64);

impl fmt::Display for VenueId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The feature set the choice models consume: check-in points (first visit
/// and repeat), mayorship probability, venue category, and the deal
/// features (offer count and a binary offer-type vector).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VenueFeatures {
    /// Points awarded for a first check-in at this venue.
    pub points_new: u32,
    /// Points awarded for a repeat check-in.
    pub points_repeat: u32,
    /// Probability of winning the venue's mayorship, in `[0, 1]`.
    pub mayorship_prob: f64,
    /// Categorical venue type.
    pub venue_type: String,
    /// Number of special offers advertised at the venue.
    pub deal_count: u32,
    /// Offer-type indicator vector, one slot per configured offer type.
    /// All-zero exactly when `deal_count` is zero.
    pub deal_types: Vec<bool>,
}

impl VenueFeatures {
    /// Checks the range and coherence invariants.
    pub fn validate(&self, deal_type_count: usize) -> Result<()> {
        let fail = |message: String| Error::InvalidConfig {
            path: "venue.features".into(),
            message,
        };
        if !(0.0..=1.0).contains(&self.mayorship_prob) {
            return Err(fail(format!(
                "mayorship_prob {} outside [0, 1]",
                self.mayorship_prob
            )));
        }
        if self.deal_types.len() != deal_type_count {
            return Err(fail(format!(
                "deal_types length {} != configured {}",
                self.deal_types.len(),
                deal_type_count
            )));
        }
        let any_type = self.deal_types.iter().any(|&b| b);
        if (self.deal_count == 0) == any_type {
            return Err(fail(format!(
                "deal_count {} inconsistent with deal_types {:?}",
                self.deal_count, self.deal_types
            )));
        }
        Ok(())
    }
}

/// A multi-check-in special offer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Deal {
    /// Check-ins required to unlock the offer once.
    pub required_checkins: u32,
    /// What one redemption costs the venue owner, in minor units.
    pub offer_cost: Money,
}

/// Venue-owner challenge configuration for deal venues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChallengeSpec {
    /// Size of the multiple-choice answer menu (at least 2).
    pub menu_size: u32,
    /// Number of distinct challenges the owner has set up.
    pub pool_size: u32,
    /// How often (in rounds) a maintaining owner refreshes the answers.
    pub rotation_period: u32,
    /// Whether the owner maintains the challenge set at all.
    pub owner_maintains: bool,
}

impl ChallengeSpec {
    pub fn validate(&self) -> Result<()> {
        if self.menu_size < 2 {
            return Err(Error::InvalidConfig {
                path: "challenges.menu_size".into(),
                message: format!("{} < 2", self.menu_size),
            });
        }
        if self.pool_size == 0 {
            return Err(Error::InvalidConfig {
                path: "challenges.pool_size".into(),
                message: "must be at least 1".into(),
            });
        }
        if self.rotation_period == 0 {
            return Err(Error::InvalidConfig {
                path: "challenges.rotation_period".into(),
                message: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// A venue: real or honeypot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Venue {
    pub id: VenueId,
    pub features: VenueFeatures,
    pub is_honeypot: bool,
    pub deal: Option<Deal>,
    pub challenge: Option<ChallengeSpec>,
}

impl Venue {
    /// Whether the venue advertises at least one offer (honeypots may
    /// advertise offers as bait without carrying a real [`Deal`]).
    pub fn advertises_deal(&self) -> bool {
        self.features.deal_count >= 1
    }
}

/// Behavioral classes of simulated users.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, Hash)]
#[serde(rename_all = "snake_case")]
pub enum UserClass {
    Honest,
    GamerCheater,
    UniformCheater,
    MonetaryCheater,
    AdaptiveCheater,
}

impl UserClass {
    pub fn is_cheater(self) -> bool {
        self != UserClass::Honest
    }

    pub fn as_str(self) -> &'static str {
        match self {
            UserClass::Honest => "honest",
            UserClass::GamerCheater => "gamer_cheater",
            UserClass::UniformCheater => "uniform_cheater",
            UserClass::MonetaryCheater => "monetary_cheater",
            UserClass::AdaptiveCheater => "adaptive_cheater",
        }
    }
}

/// A simulated user. The preference profile over real venues is drawn once
/// at world build and stays fixed; it drives both what gets presented to
/// the user and what an honest user picks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct User {
    pub id: UserId,
    pub class: UserClass,
    /// Venues this user has checked in at (real-life seed visits for
    /// monetary cheaters; grows during a run, never shrinks).
    pub visited: BTreeSet<VenueId>,
    /// Average expenditure per real visit, in minor units.
    pub avg_spend: Money,
    /// Static preference weights over real venues, normalized to sum 1,
    /// sorted by venue id.
    pub preference: Vec<(VenueId, f64)>,
}

impl User {
    /// Preference weight for one venue (zero if outside the profile).
    pub fn preference_for(&self, venue: VenueId) -> f64 {
        match self.preference.binary_search_by_key(&venue, |&(v, _)| v) {
            Ok(i) => self.preference[i].1,
            Err(_) => 0.0,
        }
    }
}

/// Outcome of the challenge-response gate for one check-in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChallengeResult {
    NotIssued,
    Passed,
    Failed,
}

/// The atomic log record. `is_fake` is ground truth (the user was not
/// physically present); `presented` is the ordered venue list the user
/// chose from, empty when the choice ranged over the whole world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckInEvent {
    pub round: u32,
    pub user: UserId,
    pub venue: VenueId,
    pub is_fake: bool,
    pub hit_honeypot: bool,
    pub challenge_result: ChallengeResult,
    pub presented: Vec<VenueId>,
}

/// The static world: venues (real and honeypot) and users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub venues: Vec<Venue>,
    pub users: Vec<User>,
    /// Number of honeypot venues.
    pub lambda: usize,
    /// Number of real venues.
    pub phi: usize,
}

impl WorldState {
    pub fn venue(&self, id: VenueId) -> Option<&Venue> {
        self.venues.iter().find(|v| v.id == id)
    }

    /// Ids of all honeypot venues.
    pub fn honeypot_ids(&self) -> Vec<VenueId> {
        self.venues
            .iter()
            .filter(|v| v.is_honeypot)
            .map(|v| v.id)
            .collect()
    }

    /// Stable-key-order JSON document of the whole world.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Recomputes `(lambda, phi)` from the venue collection. Always equals the
/// stored fields on a well-formed world.
pub fn venue_counts(world: &WorldState) -> (usize, usize) {
    let lambda = world.venues.iter().filter(|v| v.is_honeypot).count();
    (lambda, world.venues.len() - lambda)
}

/// Builds the static world for a validated config: `phi` real venues with
/// features from the configured distributions, a `deal_fraction` share of
/// them carrying offers, `lambda` honeypots designed against the initial
/// model estimate, and the configured user mix with per-user preference
/// profiles (symmetric Dirichlet over the real venues).
pub fn build_world(config: &SimConfig, rng: &mut SimRng) -> Result<WorldState> {
    let vc = &config.venues;
    let phi = vc.phi;
    let lambda = vc.lambda;
    if phi == 0 && lambda == 0 {
        return Err(Error::EmptyWorld);
    }
    if !(0.0..=1.0).contains(&vc.deal_fraction) {
        return Err(Error::InvalidConfig {
            path: "venues.deal_fraction".into(),
            message: format!("{} outside [0, 1]", vc.deal_fraction),
        });
    }

    let s_types = vc.deal_type_count;
    let mut venues = Vec::with_capacity(phi + lambda);

    // Real venues.
    for i in 0..phi {
        let mayorship_prob = if vc.mayorship_prob[0] == vc.mayorship_prob[1] {
            vc.mayorship_prob[0]
        } else {
            rng.gen_range(vc.mayorship_prob[0]..=vc.mayorship_prob[1])
        };
        let venue_type = vc.venue_types[rng.gen_range(0..vc.venue_types.len())].clone();
        venues.push(Venue {
            id: VenueId(i as u64),
            features: VenueFeatures {
                points_new: vc.points_new,
                points_repeat: vc.points_repeat,
                mayorship_prob,
                venue_type,
                deal_count: 0,
                deal_types: vec![false; s_types],
            },
            is_honeypot: false,
            deal: None,
            challenge: None,
        });
    }

    // Attach deals to a seeded-random subset of real venues.
    let deal_venues = ((vc.deal_fraction * phi as f64).round() as usize).min(phi);
    let mut picked = rand::seq::index::sample(rng, phi, deal_venues).into_vec();
    picked.sort_unstable();
    for idx in picked {
        let v = &mut venues[idx];
        v.deal = Some(Deal {
            required_checkins: vc.deal_required_checkins,
            offer_cost: vc.deal_offer_cost,
        });
        v.features.deal_count = 1;
        if s_types > 0 {
            let t = rng.gen_range(0..s_types);
            v.features.deal_types[t] = true;
        }
        if config.challenges.enabled {
            let ch = &config.challenges;
            v.challenge = Some(ChallengeSpec {
                menu_size: ch.menu_size,
                pool_size: ch.pool_size,
                rotation_period: ch.rotation_period,
                owner_maintains: rng.gen_bool(ch.owner_maintains_fraction),
            });
        }
    }

    // Honeypots, designed against the initial model estimate.
    if lambda > 0 {
        let estimate = config.initial_design_estimate();
        let bounds = config.design.feature_bounds(vc);
        let hvs = honeypots::design_honeypots(
            lambda,
            &estimate,
            &bounds,
            config.design.jitter,
            config.design.on_zero_model,
            VenueId(phi as u64),
            rng,
        )?;
        venues.extend(hvs);
    }

    // Users: dense ids, class blocks in a fixed order.
    let mix = &config.users;
    let classes = [
        (UserClass::Honest, mix.honest),
        (UserClass::GamerCheater, mix.gamer),
        (UserClass::UniformCheater, mix.uniform),
        (UserClass::MonetaryCheater, mix.monetary),
        (UserClass::AdaptiveCheater, mix.adaptive),
    ];
    let mut users = Vec::with_capacity(mix.total());
    let gamma = Gamma::new(config.behavior.preference_concentration.max(f64::MIN_POSITIVE), 1.0)
        .expect("validated concentration");
    let mut next_id = 0u64;
    for (class, count) in classes {
        for _ in 0..count {
            let mut preference = Vec::with_capacity(phi);
            if phi > 0 {
                let mut total = 0.0;
                for i in 0..phi {
                    let w: f64 = gamma.sample(rng);
                    total += w;
                    preference.push((VenueId(i as u64), w));
                }
                if total > 0.0 {
                    for p in &mut preference {
                        p.1 /= total;
                    }
                }
            }
            let mut visited = BTreeSet::new();
            if class == UserClass::MonetaryCheater && phi > 0 {
                let n = vc.monetary_initial_visits.min(phi);
                for idx in rand::seq::index::sample(rng, phi, n) {
                    visited.insert(VenueId(idx as u64));
                }
            }
            users.push(User {
                id: UserId(next_id),
                class,
                visited,
                avg_spend: vc.avg_spend,
                preference,
            });
            next_id += 1;
        }
    }

    Ok(WorldState {
        venues,
        users,
        lambda,
        phi,
    })
}
