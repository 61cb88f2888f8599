//! Desk-scale experiment drivers producing tabular sweeps.
//!
//! Each sweep point runs under its own seed `derive_seed(seed, index)`, so a
//! sweep is reproducible from `(config, seed, trials)` and independent of the
//! worker count.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GalamError, Result};
use crate::model::{expected_positive, threshold};
use crate::output::{format_float, write_comment_json, write_record};
use crate::process::{
    run_ensemble_trials, sample_round, ConsensusStats, Outcome, TrialConfig, TrialResult,
};
use crate::rng::{derive_seed, stream_rng};
use crate::rooms::{short_digest, RoomConfig, VariantSpec};

/// Smallest ensemble accepted by [`threshold_scan`].
pub const MIN_SCAN_TRIALS: u64 = 100;
/// Below this `n` the tightness probes warn that the asymptotic regime is not reached.
pub const TIGHTNESS_WARN_N: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub experiment: String,
    pub seed: u64,
    /// Omitted unless requested, so default runs stay byte-identical.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
    pub variant: VariantSpec,
    pub config_digest: String,
    pub trials: u64,
    #[serde(default)]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub x: f64,
    pub n: u64,
    pub start: u64,
    pub config_digest: String,
    pub stats: ConsensusStats,
    /// Experiment-specific measurement, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis_name: String,
    pub axis: Vec<f64>,
    pub rows: Vec<SweepRow>,
    /// Named scalar results (for example the empirical threshold).
    pub summary: BTreeMap<String, f64>,
    pub metadata: SweepMetadata,
}

#[derive(Serialize)]
struct CsvPreamble<'a> {
    axis_name: &'a str,
    metadata: &'a SweepMetadata,
    summary: &'a BTreeMap<String, f64>,
}

impl SweepResult {
    /// `<experiment>-<config digest>-<seed>.csv`
    pub fn file_name(&self) -> String {
        file_name(
            &self.metadata.experiment,
            &self.metadata.config_digest,
            self.metadata.seed,
        )
    }

    /// Metadata comment line, header, one row per axis value.
    pub fn write_csv<W: Write + ?Sized>(&self, out: &mut W) -> Result<()> {
        write_comment_json(
            out,
            &CsvPreamble {
                axis_name: &self.axis_name,
                metadata: &self.metadata,
                summary: &self.summary,
            },
        )?;
        let mut header = vec![
            self.axis_name.clone(),
            "n".into(),
            "start".into(),
            "config_digest".into(),
        ];
        header.extend(ConsensusStats::CSV_HEADER.iter().map(|s| s.to_string()));
        header.push("metric".into());
        write_record(out, &header)?;
        for row in &self.rows {
            let mut fields = vec![
                format_float(row.x),
                row.n.to_string(),
                row.start.to_string(),
                row.config_digest.clone(),
            ];
            fields.extend(row.stats.csv_fields());
            fields.push(row.metric.map_or(String::new(), format_float));
            write_record(out, &fields)?;
        }
        Ok(())
    }
}

pub fn file_name(experiment: &str, digest: &str, seed: u64) -> String {
    format!("{experiment}-{digest}-{seed}.csv")
}

fn metadata(
    experiment: &str,
    seed: u64,
    variant: VariantSpec,
    config_digest: String,
    trials: u64,
) -> SweepMetadata {
    SweepMetadata {
        experiment: experiment.to_string(),
        seed,
        timestamp: None,
        variant,
        config_digest,
        trials,
        warnings: Vec::new(),
    }
}

fn check_grid(grid: &[f64], open_unit: bool) -> Result<()> {
    if grid.is_empty() {
        return Err(GalamError::domain("sweep axis is empty"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(GalamError::domain("sweep axis must be strictly increasing"));
    }
    if open_unit && grid.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
        return Err(GalamError::domain("grid values must lie in (0, 1)"));
    }
    Ok(())
}

/// Fraction of trials ending on the positive side (consensus or victory).
fn positive_share(stats: &ConsensusStats) -> f64 {
    stats.freq_s_plus + stats.freq_victory_positives
}

/// Linear interpolation of the first upward 50% crossing of `ys` over `xs`.
pub fn half_crossing(xs: &[f64], ys: &[f64]) -> Option<f64> {
    xs.windows(2).zip(ys.windows(2)).find_map(|(x, y)| {
        if y[0] < 0.5 && y[1] >= 0.5 {
            Some(x[0] + (0.5 - y[0]) * (x[1] - x[0]) / (y[1] - y[0]))
        } else {
            None
        }
    })
}

/// Ensembles from `floor(p n)` positives for each `p` in `p_grid`.
///
/// Summary keys: `empirical_threshold` (50% crossing of the positive-outcome
/// frequency, if any) and `model_threshold` (standard variant with a unique
/// threshold only).
pub fn threshold_scan(
    config: &RoomConfig,
    variant: VariantSpec,
    p_grid: &[f64],
    trials: u64,
    seed: u64,
    workers: usize,
) -> Result<SweepResult> {
    check_grid(p_grid, true)?;
    if trials < MIN_SCAN_TRIALS {
        return Err(GalamError::domain(format!(
            "threshold scans need at least {MIN_SCAN_TRIALS} trials"
        )));
    }
    let n = config.n();
    let digest = config.digest();
    let mut rows = Vec::with_capacity(p_grid.len());
    for (idx, &p) in p_grid.iter().enumerate() {
        let start = (p * n as f64).floor() as u64;
        let tc = TrialConfig::new(config.clone(), start)
            .with_variant(variant)
            .with_seed(derive_seed(seed, idx as u64));
        let stats = ConsensusStats::from_results(&run_ensemble_trials(&tc, trials, workers)?);
        rows.push(SweepRow {
            x: p,
            n,
            start,
            config_digest: digest.clone(),
            metric: Some(positive_share(&stats)),
            stats,
        });
    }
    let shares: Vec<f64> = rows.iter().map(|r| positive_share(&r.stats)).collect();
    let mut summary = BTreeMap::new();
    let mut meta = metadata("scan", seed, variant, digest, trials);
    match half_crossing(p_grid, &shares) {
        Some(x) => {
            summary.insert("empirical_threshold".to_string(), x);
        }
        None => meta.warnings.push("no 50% crossing on this grid".into()),
    }
    if variant == VariantSpec::Standard {
        match threshold(config) {
            Ok(alpha) => {
                summary.insert("model_threshold".to_string(), alpha);
            }
            Err(e) => meta
                .warnings
                .push(format!("model threshold unavailable: {e}")),
        }
    }
    Ok(SweepResult {
        axis_name: "p".into(),
        axis: p_grid.to_vec(),
        rows,
        summary,
        metadata: meta,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub rss: f64,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
}

/// Ordinary least squares `y = slope x + intercept`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(GalamError::InsufficientPoints(
            "a fit needs at least two points".into(),
        ));
    }
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(GalamError::InsufficientPoints(
            "fit abscissae are all equal".into(),
        ));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| y - (slope * x + intercept))
        .collect();
    let rss: f64 = residuals.iter().map(|r| r * r).sum();
    let tss: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r_squared = if tss == 0.0 { 1.0 } else { 1.0 - rss / tss };
    Ok(LinearFit {
        slope,
        intercept,
        rss,
        r_squared,
        residuals,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthModel {
    LogLog,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    /// `rounds_mean` against `ln ln n`.
    pub model_loglog: LinearFit,
    /// `rounds_mean` against `ln n`.
    pub model_log: LinearFit,
    /// Smaller residual sum of squares; ties go to `log_log`.
    pub better: GrowthModel,
    /// Largest increase of `rounds_mean` per decade of `n` between consecutive points.
    pub max_increase_per_decade: f64,
}

impl ScalingFit {
    pub fn from_points(ns: &[u64], means: &[f64]) -> Result<Self> {
        let mut distinct = ns.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() < 3 {
            return Err(GalamError::InsufficientPoints(format!(
                "scaling fits need at least 3 distinct n, got {}",
                distinct.len()
            )));
        }
        if ns.iter().any(|&n| n < 3) {
            return Err(GalamError::domain(
                "scaling fits need n >= 3 so that ln ln n is defined",
            ));
        }
        let ln: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
        let lnln: Vec<f64> = ln.iter().map(|x| x.ln()).collect();
        let model_loglog = least_squares(&lnln, means)?;
        let model_log = least_squares(&ln, means)?;
        let better = if model_loglog.rss <= model_log.rss {
            GrowthModel::LogLog
        } else {
            GrowthModel::Log
        };
        let max_increase_per_decade = ns
            .windows(2)
            .zip(means.windows(2))
            .map(|(n, m)| (m[1] - m[0]) / ((n[1] as f64).log10() - (n[0] as f64).log10()))
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(ScalingFit {
            model_loglog,
            model_log,
            better,
            max_increase_per_decade,
        })
    }

    /// `model,slope,intercept,rss,r_squared` for both models.
    pub fn write_csv<W: Write + ?Sized>(&self, out: &mut W) -> Result<()> {
        write_record(
            out,
            &["model", "slope", "intercept", "rss", "r_squared"].map(String::from),
        )?;
        for (name, fit) in [("log_log", &self.model_loglog), ("log", &self.model_log)] {
            write_record(
                out,
                &[
                    name.to_string(),
                    format_float(fit.slope),
                    format_float(fit.intercept),
                    format_float(fit.rss),
                    format_float(fit.r_squared),
                ],
            )?;
        }
        Ok(())
    }
}

/// Mean consensus rounds for each `n`, started from `floor(start_fraction n)`
/// positives, with both growth laws fitted.
pub fn consensus_scaling<F>(
    family: F,
    n_list: &[u64],
    start_fraction: f64,
    trials: u64,
    seed: u64,
    workers: usize,
) -> Result<(SweepResult, ScalingFit)>
where
    F: Fn(u64) -> Result<RoomConfig>,
{
    let mut distinct = n_list.to_vec();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(GalamError::InsufficientPoints(format!(
            "scaling needs at least 3 distinct n, got {}",
            distinct.len()
        )));
    }
    let axis: Vec<f64> = n_list.iter().map(|&n| n as f64).collect();
    check_grid(&axis, false)?;
    if !(0.0..=1.0).contains(&start_fraction) {
        return Err(GalamError::domain("start fraction must lie in [0, 1]"));
    }
    let mut rows = Vec::new();
    let mut digests = String::new();
    let mut meta_warnings = Vec::new();
    for (idx, &target) in n_list.iter().enumerate() {
        let config = family(target)?;
        let n = config.n();
        let start = (start_fraction * n as f64).floor() as u64;
        let tc = TrialConfig::new(config.clone(), start).with_seed(derive_seed(seed, idx as u64));
        let stats = ConsensusStats::from_results(&run_ensemble_trials(&tc, trials, workers)?);
        if stats.freq_timeout > 0.0 {
            meta_warnings.push(format!(
                "n={n}: {} trials timed out",
                stats.trials - stats.absorbed
            ));
        }
        digests.push_str(&config.digest());
        rows.push(SweepRow {
            x: target as f64,
            n,
            start,
            config_digest: config.digest(),
            metric: None,
            stats,
        });
    }
    let means = rows
        .iter()
        .map(|r| {
            r.stats
                .rounds_mean
                .ok_or_else(|| GalamError::Numeric(format!("n={}: every trial timed out", r.n)))
        })
        .collect::<Result<Vec<_>>>()?;
    let ns: Vec<u64> = rows.iter().map(|r| r.n).collect();
    let fit = ScalingFit::from_points(&ns, &means)?;
    let mut summary = BTreeMap::new();
    summary.insert("rss_loglog".to_string(), fit.model_loglog.rss);
    summary.insert("rss_log".to_string(), fit.model_log.rss);
    summary.insert("r_squared_log".to_string(), fit.model_log.r_squared);
    summary.insert("r_squared_loglog".to_string(), fit.model_loglog.r_squared);
    summary.insert(
        "max_increase_per_decade".to_string(),
        fit.max_increase_per_decade,
    );
    summary.insert("start_fraction".to_string(), start_fraction);
    let mut meta = metadata(
        "scaling",
        seed,
        VariantSpec::Standard,
        short_digest(digests.as_bytes()),
        trials,
    );
    meta.warnings = meta_warnings;
    Ok((
        SweepResult {
            axis_name: "n".into(),
            axis,
            rows,
            summary,
            metadata: meta,
        },
        fit,
    ))
}

/// Median of `rss_log - rss_loglog` over repeated fits; positive favours log log.
pub fn median_rss_gap(fits: &[ScalingFit]) -> Option<f64> {
    let mut gaps: Vec<f64> = fits
        .iter()
        .map(|f| f.model_log.rss - f.model_loglog.rss)
        .collect();
    if gaps.is_empty() {
        return None;
    }
    gaps.sort_by(f64::total_cmp);
    let mid = gaps.len() / 2;
    Some(if gaps.len() % 2 == 1 {
        gaps[mid]
    } else {
        0.5 * (gaps[mid - 1] + gaps[mid])
    })
}

/// Fraction of `trials` one-round draws from `floor(p n)` positives whose
/// `v / n` lies strictly inside `((1 - delta) E, (1 + delta) E)`.
pub fn concentration_check(
    config: &RoomConfig,
    p: f64,
    trials: u64,
    delta: f64,
    seed: u64,
    workers: usize,
) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(GalamError::domain("delta must lie in (0, 1]"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(GalamError::domain("p must lie in [0, 1]"));
    }
    if config.n() < 1000 {
        return Err(GalamError::domain("concentration checks need n >= 1000"));
    }
    if trials == 0 {
        return Err(GalamError::domain("trials must be at least 1"));
    }
    let n = config.n() as f64;
    let u = (p * n).floor() as u64;
    let mean = expected_positive(config, u as f64 / n)?;
    let (lo, hi) = ((1.0 - delta) * mean, (1.0 + delta) * mean);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| GalamError::Resource(format!("thread pool: {e}")))?;
    let inside = pool.install(|| {
        (0..trials)
            .into_par_iter()
            .map(|i| {
                let v = sample_round(config, u, &mut stream_rng(seed, i))? as f64 / n;
                Ok(u64::from(v > lo && v < hi))
            })
            .sum::<Result<u64>>()
    })?;
    Ok(inside as f64 / trials as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TightnessKind {
    /// All rooms of `size >= 3`, negative fraction `eps` at the start; probes
    /// round `floor(log_size(log2 n) / 2)` for a surviving negative seat.
    LogLog { size: u32, eps: f64 },
    /// All rooms of size 2, `n^(-1/2)` negative fraction at the start; probes
    /// the negative count after `floor(log2(n) / 6)` rounds.
    Log,
}

impl TightnessKind {
    pub fn parse(name: &str, size: u32, eps: f64) -> Result<Self> {
        match name {
            "loglog" | "log_log" => Ok(TightnessKind::LogLog { size, eps }),
            "log" => Ok(TightnessKind::Log),
            other => Err(GalamError::Usage(format!(
                "unknown tightness kind {other:?} (expected loglog or log)"
            ))),
        }
    }

    pub fn probe_round(&self, n: u64) -> u64 {
        let lg = (n as f64).log2();
        match *self {
            TightnessKind::LogLog { size, .. } => {
                (lg.ln() / (size as f64).ln() / 2.0).floor().max(0.0) as u64
            }
            TightnessKind::Log => (lg / 6.0).floor() as u64,
        }
    }
}

/// Runs the finite-n tightness probe for `kind` at (about) `n` seats.
///
/// Summary keys. LogLog: `probe_round`, `fraction_with_negative`. Log:
/// `probe_round`, `negative_bound` (`n^(5/6)`), `fraction_below_bound`
/// (`n_- < n^(5/6)`), `fraction_within_bound` (`n_- <= n^(5/6)`) and
/// `mean_negatives`.
pub fn tightness_probe(
    kind: TightnessKind,
    n: u64,
    trials: u64,
    seed: u64,
    workers: usize,
) -> Result<SweepResult> {
    let (config, start) = match kind {
        TightnessKind::LogLog { size, eps } => {
            if size < 3 {
                return Err(GalamError::domain(
                    "the loglog probe needs rooms of size >= 3",
                ));
            }
            if !(eps > 0.0 && eps < 1.0) {
                return Err(GalamError::domain("eps must lie in (0, 1)"));
            }
            let config = RoomConfig::uniform_with_seats(size, n)?;
            let negatives = (eps * config.n() as f64).round() as u64;
            (config.clone(), config.n() - negatives)
        }
        TightnessKind::Log => {
            let config = RoomConfig::uniform_with_seats(2, n)?;
            let negatives = (config.n() as f64).sqrt().round() as u64;
            (config.clone(), config.n() - negatives)
        }
    };
    let n = config.n();
    let m = kind.probe_round(n);
    let mut meta = metadata(
        "tightness",
        seed,
        VariantSpec::Standard,
        config.digest(),
        trials,
    );
    if n < TIGHTNESS_WARN_N {
        meta.warnings.push(format!(
            "n={n} is below {TIGHTNESS_WARN_N}: asymptotic regime not reached"
        ));
    }
    let mut summary = BTreeMap::new();
    summary.insert("probe_round".to_string(), m as f64);
    let tc = TrialConfig::new(config.clone(), start)
        .with_seed(seed)
        .with_max_rounds(m.max(1));
    let results: Vec<TrialResult> = if m == 0 {
        // Round 0 is the start state itself.
        tc.validate()?;
        let untouched = TrialResult {
            outcome: Outcome::Timeout,
            rounds: 0,
            final_positive: start,
            trajectory: None,
        };
        vec![untouched; trials as usize]
    } else {
        run_ensemble_trials(&tc, trials, workers)?
    };
    let count = |pred: &dyn Fn(u64) -> bool| {
        results
            .iter()
            .filter(|r| pred(n - r.final_positive))
            .count() as f64
            / trials as f64
    };
    let metric = match kind {
        TightnessKind::LogLog { .. } => {
            let frac = count(&|neg| neg > 0);
            summary.insert("fraction_with_negative".to_string(), frac);
            frac
        }
        TightnessKind::Log => {
            let bound = (n as f64).powf(5.0 / 6.0);
            let below = count(&|neg| (neg as f64) < bound);
            summary.insert("negative_bound".to_string(), bound);
            summary.insert("fraction_below_bound".to_string(), below);
            summary.insert(
                "fraction_within_bound".to_string(),
                count(&|neg| (neg as f64) <= bound),
            );
            let mean = results
                .iter()
                .map(|r| (n - r.final_positive) as f64)
                .sum::<f64>()
                / trials as f64;
            summary.insert("mean_negatives".to_string(), mean);
            below
        }
    };
    Ok(SweepResult {
        axis_name: "n".into(),
        axis: vec![n as f64],
        rows: vec![SweepRow {
            x: n as f64,
            n,
            start,
            config_digest: config.digest(),
            stats: ConsensusStats::from_results(&results),
            metric: Some(metric),
        }],
        summary,
        metadata: meta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEntry {
    pub size: u32,
    pub alpha: f64,
}

/// Thresholds of single-size layouts for even sizes `4..=max_even_size`;
/// fails unless they decrease strictly and stay inside `(0.5, 1)`.
pub fn threshold_monotonicity(max_even_size: u32) -> Result<Vec<ThresholdEntry>> {
    if max_even_size % 2 == 1 || !(4..=16).contains(&max_even_size) {
        return Err(GalamError::domain(
            "max_even_size must be even and in 4..=16",
        ));
    }
    let mut table = Vec::new();
    for size in (4..=max_even_size).step_by(2) {
        let alpha = threshold(&RoomConfig::uniform(size, 1)?)?;
        if !(alpha > 0.5 && alpha < 1.0) {
            return Err(GalamError::Numeric(format!(
                "alpha_{size} = {alpha} outside (0.5, 1)"
            )));
        }
        if let Some(prev) = table.last().map(|e: &ThresholdEntry| e.alpha) {
            if alpha >= prev {
                return Err(GalamError::Numeric(format!(
                    "alpha_{size} = {alpha} does not decrease"
                )));
            }
        }
        table.push(ThresholdEntry { size, alpha });
    }
    Ok(table)
}

pub fn write_thresholds_csv<W: Write + ?Sized>(
    table: &[ThresholdEntry],
    out: &mut W,
) -> Result<()> {
    write_record(out, &["size", "alpha"].map(String::from))?;
    for e in table {
        write_record(out, &[e.size.to_string(), format_float(e.alpha)])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossing_interpolates() {
        assert_eq!(half_crossing(&[0.4, 0.6], &[0.0, 1.0]), Some(0.5));
        assert_eq!(
            half_crossing(&[0.1, 0.2, 0.3], &[0.0, 0.25, 0.75]),
            Some(0.25)
        );
        assert_eq!(half_crossing(&[0.1, 0.2], &[0.0, 0.1]), None);
    }

    #[test]
    fn least_squares_exact_line() {
        let fit = least_squares(&[1.0, 2.0, 3.0], &[3.0, 5.0, 7.0]).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12 && (fit.intercept - 1.0).abs() < 1e-12);
        assert!(fit.rss < 1e-20 && (fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scaling_needs_three_points() {
        let family = |n| RoomConfig::uniform_with_seats(5, n);
        let err = consensus_scaling(family, &[1000], 0.7, 10, 1, 1).unwrap_err();
        assert!(matches!(err, GalamError::InsufficientPoints(_)));
        assert!(ScalingFit::from_points(&[10, 10, 100], &[1.0, 1.0, 2.0]).is_err());
    }

    #[test]
    fn monotonicity_boundaries() {
        let t = threshold_monotonicity(4).unwrap();
        assert_eq!(t.len(), 1);
        assert!((t[0].alpha - (1.0 + 13f64.sqrt()) / 6.0).abs() < 1e-10);
        let t = threshold_monotonicity(6).unwrap();
        assert!(t[0].alpha > t[1].alpha);
        assert!(threshold_monotonicity(5).is_err());
        assert!(threshold_monotonicity(18).is_err());
    }

    #[test]
    fn tightness_small_n_warns() {
        let r = tightness_probe(TightnessKind::Log, 100, 20, 3, 1).unwrap();
        assert!(!r.metadata.warnings.is_empty());
        assert!(r.summary.contains_key("fraction_below_bound"));
        assert!(matches!(
            TightnessKind::parse("cubic", 3, 0.1),
            Err(GalamError::Usage(_))
        ));
    }

    #[test]
    fn probe_rounds() {
        assert_eq!(
            TightnessKind::LogLog { size: 3, eps: 0.1 }.probe_round(1_000_000),
            1
        );
        assert_eq!(TightnessKind::Log.probe_round(1_000_000), 3);
    }

    #[test]
    fn concentration_wide_band() {
        let cfg = RoomConfig::uniform(5, 2000).unwrap();
        assert_eq!(concentration_check(&cfg, 0.6, 200, 1.0, 1, 2).unwrap(), 1.0);
        assert!(concentration_check(&cfg, 0.6, 200, 0.0, 1, 2).is_err());
        assert!(
            concentration_check(&RoomConfig::uniform(5, 10).unwrap(), 0.6, 10, 0.1, 1, 1).is_err()
        );
    }

    #[test]
    fn scan_csv_shape_and_name() {
        let cfg = RoomConfig::uniform(3, 100).unwrap();
        let r = threshold_scan(&cfg, VariantSpec::Standard, &[0.3, 0.7], 100, 5, 2).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert_eq!(r.summary["model_threshold"], 0.5);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("p,n,start,config_digest,trials"));
        assert_eq!(r.file_name(), format!("scan-{}-5.csv", cfg.digest()));
        assert!(threshold_scan(&cfg, VariantSpec::Standard, &[0.7, 0.3], 100, 5, 2).is_err());
        assert!(threshold_scan(&cfg, VariantSpec::Standard, &[0.3], 10, 5, 2).is_err());
    }
}
