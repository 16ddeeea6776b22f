//! Suspiciousness tracking, the flagging rule, and challenge-response.
//!
//! Each user carries a running suspiciousness level computed from two
//! counters: check-ins at honeypots `q(u)` and distinct honeypots hit
//! `r(u)`. The default scoring is the linear `w_q * q + w_r * r`; the user
//! is flagged the first time the level strictly exceeds the threshold.
//! Failed challenges feed the same score through a configurable policy.
//!
//! Replaying an event log through the detector is deterministic (challenge
//! outcomes are part of the log), which is what makes threshold sweeps
//! cheap: one simulation, many thresholds.

use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::world::{ChallengeResult, CheckInEvent, UserClass, UserId, Venue, VenueId};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// What a failed challenge does to the failing user's suspicion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum ChallengeFailPolicy {
    /// Count the failure like a honeypot hit (increments `q`, and `r` on
    /// the first failure at that venue).
    CountAsHvHit,
    /// Add a flat amount to the suspiciousness level.
    SuspicionIncrement { amount: f64 },
    /// Flag the user on the spot.
    FlagImmediately,
}

/// Detector parameters: the scoring weights, the flagging threshold, and
/// the challenge model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    pub w_q: f64,
    pub w_r: f64,
    /// Flagging threshold; the rule is strict (`level > threshold`).
    pub threshold: f64,
    /// Probability an honest, physically present user answers a challenge
    /// wrongly.
    pub challenge_honest_error: f64,
    /// Defaults to a suspicion increment of `w_q` when absent: a failed
    /// challenge then weighs like one honeypot hit.
    pub challenge_fail_policy: Option<ChallengeFailPolicy>,
    /// Probability a fake check-in passes a stale challenge (unmaintained
    /// owner, or a replayed answer within the same rotation epoch).
    pub stale_leak_prob: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            w_q: 1.0,
            w_r: 2.0,
            threshold: 4.0,
            challenge_honest_error: 0.02,
            challenge_fail_policy: None,
            stale_leak_prob: 0.9,
        }
    }
}

impl DetectorConfig {
    pub fn fail_policy(&self) -> ChallengeFailPolicy {
        self.challenge_fail_policy
            .unwrap_or(ChallengeFailPolicy::SuspicionIncrement { amount: self.w_q })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |path: &str, message: String| Error::InvalidConfig {
            path: format!("detector.{path}"),
            message,
        };
        if !(self.threshold > 0.0) {
            return Err(bad("threshold", format!("{} must be positive", self.threshold)));
        }
        for (name, v) in [("w_q", self.w_q), ("w_r", self.w_r)] {
            if !v.is_finite() || v < 0.0 {
                return Err(bad(name, format!("{v} must be nonnegative and finite")));
            }
        }
        if !(0.0..=1.0).contains(&self.challenge_honest_error) {
            return Err(bad(
                "challenge_honest_error",
                format!("{} outside [0, 1]", self.challenge_honest_error),
            ));
        }
        if !(0.0..=1.0).contains(&self.stale_leak_prob) {
            return Err(bad(
                "stale_leak_prob",
                format!("{} outside [0, 1]", self.stale_leak_prob),
            ));
        }
        if let Some(ChallengeFailPolicy::SuspicionIncrement { amount }) = self.challenge_fail_policy
        {
            if !amount.is_finite() || amount < 0.0 {
                return Err(bad(
                    "challenge_fail_policy.amount",
                    format!("{amount} must be nonnegative and finite"),
                ));
            }
        }
        Ok(())
    }
}

/// Per-user running suspicion state. `level` always equals
/// `w_q * q + w_r * r` plus any accumulated challenge penalty; the flag is
/// monotone within a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuspicionRecord {
    pub user: UserId,
    /// Total check-ins at honeypots, `q(u)`.
    pub hv_checkins: u64,
    /// Distinct honeypots hit, `r(u)`.
    pub distinct_hvs: u64,
    /// Current suspiciousness level `l(u)`.
    pub level: f64,
    pub flagged: bool,
    pub flagged_round: Option<u32>,
    /// Extra level from failed challenges under the increment policy.
    pub challenge_penalty: f64,
    #[serde(skip)]
    seen: BTreeSet<VenueId>,
}

impl SuspicionRecord {
    pub fn new(user: UserId) -> Self {
        SuspicionRecord {
            user,
            hv_checkins: 0,
            distinct_hvs: 0,
            level: 0.0,
            flagged: false,
            flagged_round: None,
            challenge_penalty: 0.0,
            seen: BTreeSet::new(),
        }
    }
}

/// The default scoring function: `w_q * q + w_r * r`. Errors when the
/// distinct count exceeds the total count.
pub fn suspiciousness(q: u64, r: u64, config: &DetectorConfig) -> Result<f64> {
    if r > q {
        return Err(Error::SuspicionCounts { q, r });
    }
    Ok(config.w_q * q as f64 + config.w_r * r as f64)
}

/// Folds one event into a user's suspicion record: honeypot hits advance
/// the counters, failed challenges apply the fail policy, and the flag
/// fires the first time the level strictly exceeds the threshold.
pub fn observe_checkin(record: &mut SuspicionRecord, event: &CheckInEvent, config: &DetectorConfig) {
    debug_assert_eq!(record.user, event.user, "event routed to wrong record");
    if event.hit_honeypot {
        record.hv_checkins += 1;
        if record.seen.insert(event.venue) {
            record.distinct_hvs += 1;
        }
    }
    if event.challenge_result == ChallengeResult::Failed {
        match config.fail_policy() {
            ChallengeFailPolicy::CountAsHvHit => {
                record.hv_checkins += 1;
                if record.seen.insert(event.venue) {
                    record.distinct_hvs += 1;
                }
            }
            ChallengeFailPolicy::SuspicionIncrement { amount } => {
                record.challenge_penalty += amount;
            }
            ChallengeFailPolicy::FlagImmediately => {
                if !record.flagged {
                    record.flagged = true;
                    record.flagged_round = Some(event.round);
                }
            }
        }
    }
    record.level = config.w_q * record.hv_checkins as f64
        + config.w_r * record.distinct_hvs as f64
        + record.challenge_penalty;
    if !record.flagged && record.level > config.threshold {
        record.flagged = true;
        record.flagged_round = Some(event.round);
    }
}

/// Outcome of one challenge-response interaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChallengeOutcome {
    pub issued: bool,
    pub passed: bool,
    pub venue: VenueId,
    pub round: u32,
}

/// Stateful challenge gate for deal venues. A physically present user
/// passes with probability `1 - challenge_honest_error`; a fake guesses
/// uniformly over the answer menu — unless the challenge is stale. A
/// challenge is stale when the owner does not maintain it at all, or when
/// the user has already passed one at this venue within the current
/// rotation epoch and can replay the answer.
#[derive(Debug, Clone, Default)]
pub struct ChallengeEngine {
    /// Round of each user's most recent pass, per venue.
    last_pass: BTreeMap<(UserId, VenueId), u32>,
}

impl ChallengeEngine {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn issue(
        &mut self,
        venue: &Venue,
        user: UserId,
        is_fake: bool,
        round: u32,
        config: &DetectorConfig,
        rng: &mut SimRng,
    ) -> Result<ChallengeOutcome> {
        let spec = match (&venue.deal, &venue.challenge) {
            (Some(_), Some(spec)) => spec,
            _ => return Err(Error::MissingChallenge(venue.id.0)),
        };
        let pass_prob = if !is_fake {
            1.0 - config.challenge_honest_error
        } else if self.is_stale(venue.id, user, round, spec.owner_maintains, spec.rotation_period)
        {
            config.stale_leak_prob
        } else {
            1.0 / spec.menu_size as f64
        };
        let passed = rng.gen_bool(pass_prob.clamp(0.0, 1.0));
        if passed {
            self.last_pass.insert((user, venue.id), round);
        }
        Ok(ChallengeOutcome {
            issued: true,
            passed,
            venue: venue.id,
            round,
        })
    }

    fn is_stale(
        &self,
        venue: VenueId,
        user: UserId,
        round: u32,
        owner_maintains: bool,
        rotation_period: u32,
    ) -> bool {
        if !owner_maintains {
            return true;
        }
        match self.last_pass.get(&(user, venue)) {
            // Rotation happens at every multiple of the period; an answer
            // learned in the current epoch is still valid.
            Some(&t0) => t0 / rotation_period == round / rotation_period,
            None => false,
        }
    }
}

/// One row of a threshold sweep: `(L, detection_rate,
/// false_positive_rate, median_time_to_detection)`.
pub type SweepRow = (f64, f64, f64, Option<f64>);

/// Replays an event log through the detector, producing the final
/// suspicion record per user. Pure: challenge outcomes are read from the
/// log, not re-drawn.
pub fn replay_records(
    events: &[CheckInEvent],
    config: &DetectorConfig,
) -> BTreeMap<UserId, SuspicionRecord> {
    let mut records: BTreeMap<UserId, SuspicionRecord> = BTreeMap::new();
    for event in events {
        let record = records
            .entry(event.user)
            .or_insert_with(|| SuspicionRecord::new(event.user));
        observe_checkin(record, event, config);
    }
    records
}

/// Replays the log once per threshold and summarizes detection rate (over
/// cheaters), false-positive rate (over honest users), and median round of
/// detection. Rates are monotone non-increasing in the threshold.
pub fn sweep_threshold(
    events: &[CheckInEvent],
    template: &DetectorConfig,
    thresholds: &[f64],
    truth: &BTreeMap<UserId, UserClass>,
) -> Result<Vec<SweepRow>> {
    if events.is_empty() {
        return Err(Error::EmptyLog);
    }
    if thresholds.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let cheaters = truth.values().filter(|c| c.is_cheater()).count();
    let honest = truth.len() - cheaters;
    let mut rows = Vec::with_capacity(thresholds.len());
    for &threshold in thresholds {
        let config = DetectorConfig {
            threshold,
            ..template.clone()
        };
        let records = replay_records(events, &config);
        let mut detected = 0usize;
        let mut false_pos = 0usize;
        let mut detection_rounds: Vec<u32> = Vec::new();
        for (user, record) in &records {
            if !record.flagged {
                continue;
            }
            match truth.get(user) {
                Some(class) if class.is_cheater() => {
                    detected += 1;
                    if let Some(r) = record.flagged_round {
                        detection_rounds.push(r);
                    }
                }
                Some(_) => false_pos += 1,
                None => {}
            }
        }
        let detection_rate = if cheaters > 0 {
            detected as f64 / cheaters as f64
        } else {
            0.0
        };
        let fpr = if honest > 0 {
            false_pos as f64 / honest as f64
        } else {
            0.0
        };
        rows.push((threshold, detection_rate, fpr, median_u32(&mut detection_rounds)));
    }
    Ok(rows)
}

/// Median of a set of rounds (mean of the middle pair for even sizes).
pub(crate) fn median_u32(values: &mut Vec<u32>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_unstable();
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2] as f64
    } else {
        (values[n / 2 - 1] as f64 + values[n / 2] as f64) / 2.0
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::world::{ChallengeSpec, Deal, VenueFeatures};

    fn event(user: u64, venue: u64, round: u32, hv: bool) -> CheckInEvent {
        CheckInEvent {
            round,
            user: UserId(user),
            venue: VenueId(venue),
            is_fake: true,
            hit_honeypot: hv,
            challenge_result: ChallengeResult::NotIssued,
            presented: vec![],
        }
    }

    #[test]
    fn default_scoring_arithmetic() {
        let c = DetectorConfig::default();
        assert_eq!(suspiciousness(0, 0, &c).unwrap(), 0.0);
        assert_eq!(suspiciousness(2, 1, &c).unwrap(), 4.0);
        assert_eq!(suspiciousness(3, 1, &c).unwrap(), 5.0);
        assert!(matches!(
            suspiciousness(1, 2, &c),
            Err(Error::SuspicionCounts { .. })
        ));
    }

    #[test]
    fn strict_threshold_on_repeat_hits() {
        let c = DetectorConfig::default();
        let mut rec = SuspicionRecord::new(UserId(0));
        observe_checkin(&mut rec, &event(0, 100, 1, true), &c);
        observe_checkin(&mut rec, &event(0, 100, 2, true), &c);
        assert_eq!((rec.hv_checkins, rec.distinct_hvs), (2, 1));
        assert_eq!(rec.level, 4.0);
        assert!(!rec.flagged, "4 > 4 is false: strict comparison");
        observe_checkin(&mut rec, &event(0, 101, 3, true), &c);
        assert_eq!((rec.hv_checkins, rec.distinct_hvs), (3, 2));
        assert_eq!(rec.level, 7.0);
        assert!(rec.flagged);
        assert_eq!(rec.flagged_round, Some(3));
    }

    #[test]
    fn clean_user_never_flagged() {
        let c = DetectorConfig::default();
        let mut rec = SuspicionRecord::new(UserId(0));
        for round in 0..50 {
            observe_checkin(&mut rec, &event(0, round as u64, round, false), &c);
        }
        assert_eq!(rec.level, 0.0);
        assert!(!rec.flagged);
    }

    #[test]
    fn fail_policies_update_as_configured() {
        let mut ev = event(0, 5, 2, false);
        ev.challenge_result = ChallengeResult::Failed;

        let inc = DetectorConfig::default(); // increments by w_q = 1
        let mut rec = SuspicionRecord::new(UserId(0));
        observe_checkin(&mut rec, &ev, &inc);
        assert_eq!(rec.level, 1.0);
        assert_eq!(rec.hv_checkins, 0);

        let as_hit = DetectorConfig {
            challenge_fail_policy: Some(ChallengeFailPolicy::CountAsHvHit),
            ..DetectorConfig::default()
        };
        let mut rec = SuspicionRecord::new(UserId(0));
        observe_checkin(&mut rec, &ev, &as_hit);
        assert_eq!((rec.hv_checkins, rec.distinct_hvs), (1, 1));
        assert_eq!(rec.level, 3.0);

        let flag = DetectorConfig {
            challenge_fail_policy: Some(ChallengeFailPolicy::FlagImmediately),
            ..DetectorConfig::default()
        };
        let mut rec = SuspicionRecord::new(UserId(0));
        observe_checkin(&mut rec, &ev, &flag);
        assert!(rec.flagged);
        assert_eq!(rec.flagged_round, Some(2));
    }

    fn deal_venue(maintains: bool) -> Venue {
        Venue {
            id: VenueId(9),
            features: VenueFeatures {
                points_new: 3,
                points_repeat: 1,
                mayorship_prob: 0.5,
                venue_type: "cafe".into(),
                deal_count: 1,
                deal_types: vec![true],
            },
            is_honeypot: false,
            deal: Some(Deal {
                required_checkins: 3,
                offer_cost: crate::money::Money::dollars(5),
            }),
            challenge: Some(ChallengeSpec {
                menu_size: 4,
                pool_size: 5,
                rotation_period: 50,
                owner_maintains: maintains,
            }),
        }
    }

    #[test]
    fn fresh_fake_guesses_at_menu_rate() {
        let venue = deal_venue(true);
        let config = DetectorConfig::default();
        let mut rng = rng_from_seed(33);
        let n = 100_000;
        let mut passes = 0u32;
        for i in 0..n {
            // Fresh user each trial so no one accumulates replayable answers.
            let mut engine = ChallengeEngine::new();
            let out = engine
                .issue(&venue, UserId(i as u64), true, 1, &config, &mut rng)
                .unwrap();
            passes += out.passed as u32;
        }
        let rate = passes as f64 / n as f64;
        assert!((rate - 0.25).abs() < 0.01, "fresh fake pass rate {rate}");
    }

    #[test]
    fn genuine_user_passes_per_error_rate() {
        let venue = deal_venue(true);
        let mut engine = ChallengeEngine::new();
        let exact = DetectorConfig {
            challenge_honest_error: 0.0,
            ..DetectorConfig::default()
        };
        let mut rng = rng_from_seed(5);
        for round in 0..1000 {
            let out = engine
                .issue(&venue, UserId(0), false, round, &exact, &mut rng)
                .unwrap();
            assert!(out.passed);
        }

        let noisy = DetectorConfig {
            challenge_honest_error: 0.02,
            ..DetectorConfig::default()
        };
        let mut passes = 0u32;
        let n = 100_000;
        for i in 0..n {
            let mut engine = ChallengeEngine::new();
            let out = engine
                .issue(&venue, UserId(i as u64), false, 1, &noisy, &mut rng)
                .unwrap();
            passes += out.passed as u32;
        }
        let rate = passes as f64 / n as f64;
        assert!((rate - 0.98).abs() < 0.005, "genuine pass rate {rate}");
    }

    #[test]
    fn stale_replay_within_epoch_leaks() {
        let venue = deal_venue(true);
        let config = DetectorConfig::default();
        let mut rng = rng_from_seed(77);
        let n = 20_000;
        let mut same_epoch_passes = 0u32;
        let mut next_epoch_passes = 0u32;
        for i in 0..n {
            let mut engine = ChallengeEngine::new();
            let user = UserId(i as u64);
            // Pass genuinely at round 1, then fake at round 2 (same epoch).
            let first = engine
                .issue(
                    &venue,
                    user,
                    false,
                    1,
                    &DetectorConfig {
                        challenge_honest_error: 0.0,
                        ..config.clone()
                    },
                    &mut rng,
                )
                .unwrap();
            assert!(first.passed);
            let replay = engine.issue(&venue, user, true, 2, &config, &mut rng).unwrap();
            same_epoch_passes += replay.passed as u32;

            // After rotation (round 50 starts a new epoch) the answer is gone.
            let mut engine = ChallengeEngine::new();
            let first = engine
                .issue(
                    &venue,
                    user,
                    false,
                    1,
                    &DetectorConfig {
                        challenge_honest_error: 0.0,
                        ..config.clone()
                    },
                    &mut rng,
                )
                .unwrap();
            assert!(first.passed);
            let fresh = engine.issue(&venue, user, true, 60, &config, &mut rng).unwrap();
            next_epoch_passes += fresh.passed as u32;
        }
        let stale_rate = same_epoch_passes as f64 / n as f64;
        let fresh_rate = next_epoch_passes as f64 / n as f64;
        assert!((stale_rate - 0.9).abs() < 0.01, "stale leak rate {stale_rate}");
        assert!((fresh_rate - 0.25).abs() < 0.01, "post-rotation rate {fresh_rate}");
    }

    #[test]
    fn unmaintained_venue_leaks_to_any_fake() {
        let venue = deal_venue(false);
        let config = DetectorConfig::default();
        let mut rng = rng_from_seed(13);
        let n = 20_000;
        let mut passes = 0u32;
        for i in 0..n {
            let mut engine = ChallengeEngine::new();
            let out = engine
                .issue(&venue, UserId(i as u64), true, 1, &config, &mut rng)
                .unwrap();
            passes += out.passed as u32;
        }
        let rate = passes as f64 / n as f64;
        assert!((rate - 0.9).abs() < 0.01, "unmaintained leak rate {rate}");
    }

    #[test]
    fn challenge_requires_deal_and_spec() {
        let mut venue = deal_venue(true);
        venue.challenge = None;
        let mut engine = ChallengeEngine::new();
        let mut rng = rng_from_seed(1);
        assert!(matches!(
            engine.issue(&venue, UserId(0), true, 1, &DetectorConfig::default(), &mut rng),
            Err(Error::MissingChallenge(9))
        ));
    }

    #[test]
    fn sweep_matches_rule_at_the_extremes() {
        let mut truth = BTreeMap::new();
        truth.insert(UserId(0), UserClass::GamerCheater);
        truth.insert(UserId(1), UserClass::Honest);
        let events = vec![event(0, 50, 1, true), event(1, 2, 1, false)];
        let template = DetectorConfig::default();
        let rows = sweep_threshold(&events, &template, &[0.0, 1e18], &truth).unwrap();
        // At L=0 any honeypot hit flags; the honest user had none.
        assert_eq!(rows[0].1, 1.0);
        assert_eq!(rows[0].2, 0.0);
        // At an enormous L nothing flags.
        assert_eq!(rows[1].1, 0.0);
        assert_eq!(rows[1].2, 0.0);
        assert_eq!(rows[1].3, None);
    }

    #[test]
    fn replay_is_deterministic() {
        let events: Vec<CheckInEvent> = (0..20)
            .map(|i| event(i % 3, 40 + (i % 4) as u64, i as u32, i % 2 == 0))
            .collect();
        let c = DetectorConfig::default();
        assert_eq!(replay_records(&events, &c), replay_records(&events, &c));
    }
}
