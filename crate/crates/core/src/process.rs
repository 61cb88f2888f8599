//! Stochastic simulation: one-round samplers, trials run to absorption and
//! parallel ensembles.
//!
//! Given the current positive count `u`, rooms are independent, and rooms of the
//! same size are identically distributed. The samplers therefore draw, per room
//! size, how many rooms land in each outcome (a binomial or multinomial draw over
//! room counts) instead of looping over seats. The resulting law of the total
//! positive count is the same as the seat-by-seat process.

use std::io::Write;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Hypergeometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GalamError, Result};
use crate::model::{binomial, room_positive, room_tie};
use crate::output::{format_float, write_comment_json, write_record};
use crate::rng::stream_rng;
use crate::rooms::{RoomConfig, VariantSpec};

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 0x5EED_0001;

fn draw_binomial<R: Rng + ?Sized>(rng: &mut R, trials: u64, p: f64) -> u64 {
    if trials == 0 || p <= 0.0 {
        0
    } else if p >= 1.0 {
        trials
    } else {
        Binomial::new(trials, p).expect("p in (0, 1)").sample(rng)
    }
}

/// Sequential-binomial multinomial draw: `trials` items over outcomes with `probs`.
fn draw_multinomial<R: Rng + ?Sized>(
    rng: &mut R,
    trials: u64,
    probs: &[f64],
    counts: &mut Vec<u64>,
) {
    counts.clear();
    let mut remaining = trials;
    let mut mass = 1.0;
    for (idx, &p) in probs.iter().enumerate() {
        if idx + 1 == probs.len() {
            counts.push(remaining);
            break;
        }
        let x = if mass <= 0.0 {
            0
        } else {
            draw_binomial(rng, remaining, (p / mass).clamp(0.0, 1.0))
        };
        counts.push(x);
        remaining -= x;
        mass -= p;
    }
}

fn check_count(config: &RoomConfig, u: u64) -> Result<f64> {
    if u > config.n() {
        return Err(GalamError::domain(format!(
            "positive count {u} exceeds n = {}",
            config.n()
        )));
    }
    Ok(u as f64 / config.n() as f64)
}

/// One round of the standard process from `u` positive seats.
///
/// Every seat is positive with probability `u/n`; a room turns fully positive
/// iff strictly more than half of its seats are positive (ties go negative).
pub fn sample_round<R: Rng + ?Sized>(config: &RoomConfig, u: u64, rng: &mut R) -> Result<u64> {
    let p = check_count(config, u)?;
    let mut v = 0;
    for (size, count) in config.rooms() {
        v += size as u64 * draw_binomial(rng, count, room_positive(size, p));
    }
    Ok(v)
}

/// One round of the tie-break variant: in an exactly tied room every seat
/// independently turns positive with probability `k`.
pub fn sample_round_tiebreak<R: Rng + ?Sized>(
    config: &RoomConfig,
    u: u64,
    k: f64,
    rng: &mut R,
) -> Result<u64> {
    let p = check_count(config, u)?;
    if !(0.0..=1.0).contains(&k) {
        return Err(GalamError::domain(format!("k = {k} must lie in [0, 1]")));
    }
    let mut v = 0;
    let mut counts = Vec::with_capacity(3);
    for (size, count) in config.rooms() {
        let positive = room_positive(size, p);
        if size % 2 == 1 {
            v += size as u64 * draw_binomial(rng, count, positive);
            continue;
        }
        let tie = room_tie(size, p);
        draw_multinomial(
            rng,
            count,
            &[positive, tie, (1.0 - positive - tie).max(0.0)],
            &mut counts,
        );
        v += size as u64 * counts[0];
        v += draw_binomial(rng, counts[1] * size as u64, k);
    }
    Ok(v)
}

/// Distribution of a size-`i` room's positive seat count after one round of
/// the inflexible variant; index `v` holds `P(room ends with v positive seats)`.
///
/// Seats are positive with probability `p`; a positive seat is inflexible with
/// probability `a/p`, a negative one with probability `b/(1-p)`. A room won by
/// the positives keeps only its negative inflexibles negative, a room won by the
/// negatives keeps only its positive inflexibles positive.
pub fn inflexible_room_outcomes(i: u32, p: f64, a: f64, b: f64) -> Vec<f64> {
    let q = 1.0 - p;
    let pos_inflexible = if p > 0.0 {
        (a / p).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let neg_inflexible = if q > 0.0 {
        (b / q).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let pmf =
        |n: u32, k: u32, r: f64| binomial(n, k) * r.powi(k as i32) * (1.0 - r).powi((n - k) as i32);

    let mut out = vec![0.0; i as usize + 1];
    for j in 0..=i {
        let weight = pmf(i, j, p);
        if weight == 0.0 {
            continue;
        }
        if j > i / 2 {
            for z in 0..=i - j {
                out[(i - z) as usize] += weight * pmf(i - j, z, neg_inflexible);
            }
        } else {
            for x in 0..=j {
                out[x as usize] += weight * pmf(j, x, pos_inflexible);
            }
        }
    }
    out
}

fn check_inflexible_band(config: &RoomConfig, u: u64, a: f64, b: f64) -> Result<f64> {
    VariantSpec::Inflexible { a, b }.validate()?;
    let p = check_count(config, u)?;
    let n = config.n() as f64;
    // Compare counts, not fractions, so `u = a n` exactly is admitted.
    if (u as f64) < a * n || ((config.n() - u) as f64) < b * n {
        return Err(GalamError::domain(format!(
            "positive count {u} outside the inflexible band [{}, {}]",
            a * n,
            n - b * n
        )));
    }
    Ok(p)
}

/// One round of the inflexible variant.
///
/// Each seat is independently a positive inflexible (`a`), positive floater
/// (`u/n - a`), negative inflexible (`b`) or negative floater (`1 - u/n - b`).
pub fn sample_round_inflexible<R: Rng + ?Sized>(
    config: &RoomConfig,
    u: u64,
    a: f64,
    b: f64,
    rng: &mut R,
) -> Result<u64> {
    let p = check_inflexible_band(config, u, a, b)?;
    let mut v = 0;
    let mut counts = Vec::new();
    for (size, count) in config.rooms() {
        let outcomes = inflexible_room_outcomes(size, p, a, b);
        draw_multinomial(rng, count, &outcomes, &mut counts);
        v += counts
            .iter()
            .enumerate()
            .map(|(seats, &c)| seats as u64 * c)
            .sum::<u64>();
    }
    Ok(v)
}

/// One round of the room-wise majority model: exactly `n_plus` positive
/// individuals are placed on seats uniformly at random without replacement.
pub fn sample_round_matching<R: Rng + ?Sized>(
    config: &RoomConfig,
    n_plus: u64,
    rng: &mut R,
) -> Result<u64> {
    check_count(config, n_plus)?;
    let mut seats_left = config.n();
    let mut positives_left = n_plus;
    let mut v = 0;
    for (size, count) in config.rooms() {
        let size = size as u64;
        for _ in 0..count {
            let x = if positives_left == 0 {
                0
            } else if positives_left == seats_left {
                size
            } else {
                Hypergeometric::new(seats_left, positives_left, size)
                    .expect("valid hypergeometric parameters")
                    .sample(rng)
            };
            if x > size / 2 {
                v += size;
            }
            positives_left -= x;
            seats_left -= size;
        }
    }
    Ok(v)
}

/// Dispatches one round according to `variant`.
pub fn sample_variant_round<R: Rng + ?Sized>(
    config: &RoomConfig,
    variant: &VariantSpec,
    u: u64,
    rng: &mut R,
) -> Result<u64> {
    match *variant {
        VariantSpec::Standard => sample_round(config, u, rng),
        VariantSpec::TieBreak { k } => sample_round_tiebreak(config, u, k, rng),
        VariantSpec::Inflexible { a, b } => sample_round_inflexible(config, u, a, b, rng),
    }
}

/// `64 * ceil(log2(n + 2))`.
pub fn default_max_rounds(n: u64) -> u64 {
    64 * (n + 2).next_power_of_two().trailing_zeros() as u64
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub config: RoomConfig,
    #[serde(default)]
    pub variant: VariantSpec,
    pub initial_positive: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Round cap; `None` means [`default_max_rounds`].
    #[serde(default)]
    pub max_rounds: Option<u64>,
    #[serde(default)]
    pub record_trajectory: bool,
    /// Inflexible variant only: victory is declared once the losing side is
    /// within this many seats of its inflexible floor `ceil(a n)` / `ceil(b n)`.
    #[serde(default)]
    pub victory_slack: u64,
}

impl TrialConfig {
    pub fn new(config: RoomConfig, initial_positive: u64) -> Self {
        TrialConfig {
            config,
            variant: VariantSpec::Standard,
            initial_positive,
            seed: DEFAULT_SEED,
            max_rounds: None,
            record_trajectory: false,
            victory_slack: 0,
        }
    }

    pub fn with_variant(mut self, variant: VariantSpec) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_rounds(mut self, max_rounds: u64) -> Self {
        self.max_rounds = Some(max_rounds);
        self
    }

    pub fn with_trajectory(mut self, record: bool) -> Self {
        self.record_trajectory = record;
        self
    }

    pub fn max_rounds(&self) -> u64 {
        self.max_rounds
            .unwrap_or_else(|| default_max_rounds(self.config.n()))
    }

    /// Inflexible floors `(ceil(a n), ceil(b n))`; `(0, 0)` for other variants.
    pub fn inflexible_floors(&self) -> (u64, u64) {
        match self.variant {
            VariantSpec::Inflexible { a, b } => {
                let n = self.config.n() as f64;
                ((a * n).ceil() as u64, (b * n).ceil() as u64)
            }
            _ => (0, 0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.variant.validate()?;
        let n = self.config.n();
        if self.initial_positive > n {
            return Err(GalamError::domain(format!(
                "start {} exceeds n={n}",
                self.initial_positive
            )));
        }
        if self.max_rounds == Some(0) {
            return Err(GalamError::domain("max_rounds must be at least 1"));
        }
        if let VariantSpec::Inflexible { .. } = self.variant {
            let (lo, hi) = self.inflexible_floors();
            if self.initial_positive < lo || self.initial_positive > n.saturating_sub(hi) {
                return Err(GalamError::domain(format!(
                    "start {} outside the inflexible band [{lo}, {}]",
                    self.initial_positive,
                    n.saturating_sub(hi)
                )));
            }
        }
        Ok(())
    }

    fn stop(&self, u: u64) -> Option<Outcome> {
        let n = self.config.n();
        if u == 0 {
            return Some(Outcome::SMinus);
        }
        if u == n {
            return Some(Outcome::SPlus);
        }
        if let VariantSpec::Inflexible { .. } = self.variant {
            let (lo, hi) = self.inflexible_floors();
            if u <= lo + self.victory_slack {
                return Some(Outcome::VictoryNegatives);
            }
            if n - u <= hi + self.victory_slack {
                return Some(Outcome::VictoryPositives);
            }
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    #[serde(rename = "S_plus")]
    SPlus,
    #[serde(rename = "S_minus")]
    SMinus,
    #[serde(rename = "timeout")]
    Timeout,
    #[serde(rename = "victory_positives")]
    VictoryPositives,
    #[serde(rename = "victory_negatives")]
    VictoryNegatives,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::SPlus => "S_plus",
            Outcome::SMinus => "S_minus",
            Outcome::Timeout => "timeout",
            Outcome::VictoryPositives => "victory_positives",
            Outcome::VictoryNegatives => "victory_negatives",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialResult {
    pub outcome: Outcome,
    pub rounds: u64,
    pub final_positive: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<Vec<u64>>,
}

fn run_trial_stream(tc: &TrialConfig, stream: u64) -> Result<TrialResult> {
    let mut rng = stream_rng(tc.seed, stream);
    let max_rounds = tc.max_rounds();
    let mut u = tc.initial_positive;
    let mut trajectory = tc.record_trajectory.then(|| vec![u]);
    let mut rounds = 0;
    let outcome = loop {
        if let Some(outcome) = tc.stop(u) {
            break outcome;
        }
        if rounds == max_rounds {
            break Outcome::Timeout;
        }
        u = sample_variant_round(&tc.config, &tc.variant, u, &mut rng)?;
        rounds += 1;
        if let Some(t) = trajectory.as_mut() {
            t.push(u);
        }
    };
    Ok(TrialResult {
        outcome,
        rounds,
        final_positive: u,
        trajectory,
    })
}

/// Runs one trial until absorption (or victory, or `max_rounds`).
///
/// Uses stream 0 of `tc.seed`, so it matches trial 0 of [`run_ensemble`].
pub fn run_trial(tc: &TrialConfig) -> Result<TrialResult> {
    tc.validate()?;
    run_trial_stream(tc, 0)
}

fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    if workers == 0 {
        return Err(GalamError::domain("workers must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| GalamError::Resource(format!("thread pool: {e}")))
}

/// Runs `trials` independent trials; trial `i` uses stream `i` of `tc.seed`.
/// Results come back in trial order regardless of `workers`.
pub fn run_ensemble_trials(
    tc: &TrialConfig,
    trials: u64,
    workers: usize,
) -> Result<Vec<TrialResult>> {
    tc.validate()?;
    if trials == 0 {
        return Err(GalamError::domain("trials must be at least 1"));
    }
    let pool = worker_pool(workers)?;
    pool.install(|| {
        (0..trials)
            .into_par_iter()
            .map(|i| run_trial_stream(tc, i))
            .collect()
    })
}

/// Aggregate outcome frequencies and round statistics over an ensemble.
pub fn run_ensemble(tc: &TrialConfig, trials: u64, workers: usize) -> Result<ConsensusStats> {
    Ok(ConsensusStats::from_results(&run_ensemble_trials(
        tc, trials, workers,
    )?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusStats {
    pub trials: u64,
    /// Trials that ended before the round cap; round statistics cover only these.
    pub absorbed: u64,
    #[serde(rename = "freq_S_plus")]
    pub freq_s_plus: f64,
    #[serde(rename = "freq_S_minus")]
    pub freq_s_minus: f64,
    pub freq_timeout: f64,
    pub freq_victory_positives: f64,
    pub freq_victory_negatives: f64,
    pub rounds_mean: Option<f64>,
    pub rounds_p50: Option<u64>,
    pub rounds_p95: Option<u64>,
    pub rounds_max: Option<u64>,
}

fn nearest_rank(sorted: &[u64], q: f64) -> u64 {
    let rank = (q * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

impl ConsensusStats {
    pub fn from_results(results: &[TrialResult]) -> Self {
        let trials = results.len() as u64;
        let count =
            |o: Outcome| results.iter().filter(|r| r.outcome == o).count() as f64 / trials as f64;
        let mut rounds: Vec<u64> = results
            .iter()
            .filter(|r| r.outcome != Outcome::Timeout)
            .map(|r| r.rounds)
            .collect();
        rounds.sort_unstable();
        let absorbed = rounds.len() as u64;
        let (mean, p50, p95, max) = if rounds.is_empty() {
            (None, None, None, None)
        } else {
            (
                Some(rounds.iter().sum::<u64>() as f64 / absorbed as f64),
                Some(nearest_rank(&rounds, 0.5)),
                Some(nearest_rank(&rounds, 0.95)),
                rounds.last().copied(),
            )
        };
        ConsensusStats {
            trials,
            absorbed,
            freq_s_plus: count(Outcome::SPlus),
            freq_s_minus: count(Outcome::SMinus),
            freq_timeout: count(Outcome::Timeout),
            freq_victory_positives: count(Outcome::VictoryPositives),
            freq_victory_negatives: count(Outcome::VictoryNegatives),
            rounds_mean: mean,
            rounds_p50: p50,
            rounds_p95: p95,
            rounds_max: max,
        }
    }

    pub const CSV_HEADER: [&'static str; 11] = [
        "trials",
        "absorbed",
        "freq_S_plus",
        "freq_S_minus",
        "freq_timeout",
        "freq_victory_positives",
        "freq_victory_negatives",
        "rounds_mean",
        "rounds_p50",
        "rounds_p95",
        "rounds_max",
    ];

    pub fn csv_fields(&self) -> Vec<String> {
        let opt_u = |x: Option<u64>| x.map_or(String::new(), |v| v.to_string());
        vec![
            self.trials.to_string(),
            self.absorbed.to_string(),
            format_float(self.freq_s_plus),
            format_float(self.freq_s_minus),
            format_float(self.freq_timeout),
            format_float(self.freq_victory_positives),
            format_float(self.freq_victory_negatives),
            self.rounds_mean.map_or(String::new(), format_float),
            opt_u(self.rounds_p50),
            opt_u(self.rounds_p95),
            opt_u(self.rounds_max),
        ]
    }

    /// Metadata comment, header and one data row.
    pub fn write_csv<W: Write + ?Sized>(&self, tc: &TrialConfig, out: &mut W) -> Result<()> {
        write_comment_json(out, tc)?;
        write_record(out, &Self::CSV_HEADER.map(String::from))?;
        write_record(out, &self.csv_fields())
    }
}

/// Trajectory export: header `trial_id,t,n_plus`, one row per recorded round.
pub fn write_trajectories_csv<W: Write + ?Sized>(
    results: &[TrialResult],
    out: &mut W,
) -> Result<()> {
    write_record(out, &["trial_id", "t", "n_plus"].map(String::from))?;
    for (trial, result) in results.iter().enumerate() {
        if let Some(traj) = &result.trajectory {
            for (t, n_plus) in traj.iter().enumerate() {
                write_record(out, &[trial.to_string(), t.to_string(), n_plus.to_string()])?;
            }
        }
    }
    Ok(())
}
