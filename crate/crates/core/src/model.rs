//! Deterministic side of the process: the expectation polynomials, their
//! derivatives and fixed points, the variant expectation formulas and the
//! drift iterators used to reason about multi-round behaviour.
//!
//! Notation: `f_i(p)` is the probability that a room of size `i` ends positive
//! when every seat is independently positive with probability `p`;
//! `f(p) = sum_i a_i f_i(p)` is the expected positive fraction after one round
//! and `h(p) = f(p) - p`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{GalamError, Result};
use crate::rooms::{RoomConfig, MAX_ROOM_SIZE};

pub const DEFAULT_GRID_RESOLUTION: f64 = 1e-4;
pub const DEFAULT_TOLERANCE: f64 = 1e-12;

fn binomial_table() -> &'static Vec<Vec<u64>> {
    static TABLE: OnceLock<Vec<Vec<u64>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let size = MAX_ROOM_SIZE as usize + 1;
        let mut rows: Vec<Vec<u64>> = Vec::with_capacity(size);
        for n in 0..size {
            let mut row = vec![1u64; n + 1];
            for k in 1..n {
                row[k] = rows[n - 1][k - 1] + rows[n - 1][k];
            }
            rows.push(row);
        }
        rows
    })
}

/// Exact `C(n, k)` as `f64`; zero when `k > n`.
pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    assert!(
        n <= MAX_ROOM_SIZE,
        "binomial table only covers n <= {MAX_ROOM_SIZE}"
    );
    binomial_table()[n as usize][k as usize] as f64
}

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(GalamError::domain(format!(
            "{name} = {p} must lie in [0, 1]"
        )))
    }
}

fn check_room_size(i: u32) -> Result<()> {
    if (2..=MAX_ROOM_SIZE).contains(&i) {
        Ok(())
    } else {
        Err(GalamError::domain(format!(
            "room size {i} outside 2..={MAX_ROOM_SIZE}"
        )))
    }
}

/// `sum_{j=lo}^{i} C(i,j) p^j (1-p)^(i-j)`.
pub(crate) fn upper_tail(i: u32, lo: u32, p: f64) -> f64 {
    let q = 1.0 - p;
    let mut acc = CompensatedSum::default();
    for j in lo..=i {
        acc.add(binomial(i, j) * p.powi(j as i32) * q.powi((i - j) as i32));
    }
    // Rounding can overshoot 1 by an ulp near p = 1.
    acc.value().clamp(0.0, 1.0)
}

/// Unchecked `f_i(p)`.
pub(crate) fn room_positive(i: u32, p: f64) -> f64 {
    upper_tail(i, i / 2 + 1, p)
}

/// Probability that a room of size `i` is exactly tied; zero for odd `i`.
pub(crate) fn room_tie(i: u32, p: f64) -> f64 {
    if i % 2 == 1 {
        return 0.0;
    }
    let m = (i / 2) as i32;
    binomial(i, i / 2) * p.powi(m) * (1.0 - p).powi(m)
}

/// Seat-weighted average `sum_i a_i g(i)`, accumulated as `sum_i i r_i g(i) / n`
/// so that `g == 1` gives exactly one.
fn seat_average(config: &RoomConfig, g: impl Fn(u32) -> f64) -> f64 {
    let mut acc = CompensatedSum::default();
    for (size, count) in config.rooms() {
        acc.add((size as u64 * count) as f64 * g(size));
    }
    acc.value() / config.n() as f64
}

/// Probability that a room of size `i` ends positive, `f_i(p)`.
pub fn f_single(i: u32, p: f64) -> Result<f64> {
    check_room_size(i)?;
    check_probability("p", p)?;
    Ok(room_positive(i, p))
}

/// Expected positive seat fraction after one round from positive fraction `p`.
pub fn expected_positive(config: &RoomConfig, p: f64) -> Result<f64> {
    check_probability("p", p)?;
    Ok(seat_average(config, |i| room_positive(i, p)))
}

/// Expected negative seat fraction after one round from negative fraction `p`.
///
/// Evaluated directly from the negative-outcome tail `j >= ceil(i/2)`, not via
/// the complement identity, so the two can be checked against each other.
pub fn expected_negative(config: &RoomConfig, p: f64) -> Result<f64> {
    check_probability("p", p)?;
    Ok(seat_average(config, |i| upper_tail(i, i.div_ceil(2), p)))
}

/// `h(p) = f(p) - p`.
pub fn h(config: &RoomConfig, p: f64) -> Result<f64> {
    Ok(expected_positive(config, p)? - p)
}

/// Closed-form derivative of `f_i`.
pub fn f_prime_single(i: u32, p: f64) -> Result<f64> {
    check_room_size(i)?;
    check_probability("p", p)?;
    Ok(room_positive_derivative(i, p))
}

fn room_positive_derivative(i: u32, p: f64) -> f64 {
    let m = i / 2;
    (m + 1) as f64 * binomial(i, m + 1) * p.powi(m as i32) * (1.0 - p).powi((i - m - 1) as i32)
}

/// Derivative of `f` for a whole layout.
pub fn expected_positive_derivative(config: &RoomConfig, p: f64) -> Result<f64> {
    check_probability("p", p)?;
    Ok(seat_average(config, |i| room_positive_derivative(i, p)))
}

/// All interior fixed points of `f` found by a grid scan plus bisection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointReport {
    pub roots: Vec<f64>,
    pub brackets: Vec<(f64, f64)>,
    pub unique: bool,
    pub grid_resolution: f64,
    pub tolerance: f64,
    /// Run-length compressed signs of `h` over the scan grid, e.g. `"-+"` or `"-0+"`.
    pub sign_pattern: String,
}

fn sign_char(x: f64) -> char {
    if x > 0.0 {
        '+'
    } else if x < 0.0 {
        '-'
    } else {
        '0'
    }
}

fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tolerance: f64) -> f64 {
    let lo_sign = g(lo) > 0.0;
    while hi - lo > tolerance {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let value = g(mid);
        if value == 0.0 {
            return mid;
        }
        if (value > 0.0) == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Scans `h` on a uniform grid strictly inside (0, 1), brackets every sign
/// change and bisects each bracket to width `tolerance`.
///
/// A grid point where `h` is exactly zero is itself reported as a root, with
/// its neighbouring grid points as bracket.
pub fn find_fixed_points(
    config: &RoomConfig,
    grid_resolution: f64,
    tolerance: f64,
) -> Result<FixedPointReport> {
    if !(grid_resolution > 0.0 && grid_resolution <= 1e-3) {
        return Err(GalamError::domain(format!(
            "grid resolution {grid_resolution} must lie in (0, 1e-3]"
        )));
    }
    if !(tolerance >= 10.0 * f64::EPSILON) {
        return Err(GalamError::domain(format!(
            "tolerance {tolerance} below 10 * machine epsilon"
        )));
    }
    let steps = (1.0 / grid_resolution).round() as usize;
    let hv = |p: f64| seat_average(config, |i| room_positive(i, p)) - p;

    let grid: Vec<f64> = (1..steps).map(|k| k as f64 / steps as f64).collect();
    let values: Vec<f64> = grid.iter().map(|&p| hv(p)).collect();

    let mut roots = Vec::new();
    let mut brackets = Vec::new();
    let mut pattern = String::new();
    for (k, (&p, &v)) in grid.iter().zip(&values).enumerate() {
        let c = sign_char(v);
        if !pattern.ends_with(c) {
            pattern.push(c);
        }
        if v == 0.0 {
            let lo = if k > 0 { grid[k - 1] } else { 0.0 };
            let hi = grid.get(k + 1).copied().unwrap_or(1.0);
            roots.push(p);
            brackets.push((lo, hi));
            continue;
        }
        if k + 1 < grid.len() {
            let next = values[k + 1];
            if next != 0.0 && (next > 0.0) != (v > 0.0) {
                let hi = grid[k + 1];
                roots.push(bisect(hv, p, hi, tolerance));
                brackets.push((p, hi));
            }
        }
    }

    Ok(FixedPointReport {
        unique: roots.len() == 1,
        roots,
        brackets,
        grid_resolution,
        tolerance,
        sign_pattern: pattern,
    })
}

/// Unique threshold `alpha`: `h < 0` on (0, alpha) and `h > 0` on (alpha, 1).
///
/// Fails with the full report when the scan does not find exactly one root
/// with that sign pattern (for example an all-size-2 layout, which has none).
pub fn threshold(config: &RoomConfig) -> Result<f64> {
    let report = find_fixed_points(config, DEFAULT_GRID_RESOLUTION, DEFAULT_TOLERANCE)?;
    let crossing: String = report.sign_pattern.chars().filter(|&c| c != '0').collect();
    if report.unique && crossing == "-+" {
        Ok(report.roots[0])
    } else {
        Err(GalamError::NoUniqueThreshold(Box::new(report)))
    }
}

/// Expected positive fraction when a tied room's seats each turn positive with
/// probability `k`.
pub fn expected_positive_tiebreak(config: &RoomConfig, p: f64, k: f64) -> Result<f64> {
    check_probability("p", p)?;
    check_probability("k", k)?;
    Ok(seat_average(config, |i| {
        room_positive(i, p) + k * room_tie(i, p)
    }))
}

/// Expected positive fraction with inflexible seats.
///
/// `a` and `b` are the positive and negative inflexible seat probabilities. For
/// a fixed seat in a room of size `i` with `j` positive seats in total, the
/// three sums cover: the seat is positive and the room ends positive; the seat
/// is a negative floater and the room ends positive; the seat is a positive
/// inflexible and the room ends negative.
pub fn expected_positive_inflexible(config: &RoomConfig, p: f64, a: f64, b: f64) -> Result<f64> {
    check_probability("a", a)?;
    check_probability("b", b)?;
    if a + b > 1.0 {
        return Err(GalamError::domain(format!("a + b = {} exceeds 1", a + b)));
    }
    if !(a <= p && p <= 1.0 - b) {
        return Err(GalamError::domain(format!(
            "p = {p} outside the inflexible band [{a}, {}]",
            1.0 - b
        )));
    }
    let q = 1.0 - p;
    Ok(seat_average(config, |i| {
        let half = i / 2;
        let mut acc = CompensatedSum::default();
        for j in half + 1..=i {
            acc.add(binomial(i - 1, j - 1) * p.powi(j as i32) * q.powi((i - j) as i32));
        }
        // C(i-1, i) = 0, so j stops at i - 1.
        for j in half + 1..i {
            acc.add(binomial(i - 1, j) * (q - b) * p.powi(j as i32) * q.powi((i - j - 1) as i32));
        }
        for j in 1..=half {
            acc.add(binomial(i - 1, j - 1) * a * p.powi(j as i32 - 1) * q.powi((i - j) as i32));
        }
        acc.value()
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftDirection {
    /// `Q^t = (1 - delta) Q(Q^{t-1})`, a high-probability lower envelope.
    Lower,
    /// `R^t = (1 + delta) R(R^{t-1})`, a high-probability upper envelope.
    Upper,
}

/// Power-law one-round drift bound `K p^ell` with concentration slack `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    pub k: f64,
    pub ell: f64,
    pub delta: f64,
    pub direction: DriftDirection,
}

impl DriftSpec {
    pub fn new(k: f64, ell: f64, delta: f64, direction: DriftDirection) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(GalamError::domain(format!(
                "drift constant K = {k} must be positive"
            )));
        }
        if !(ell >= 1.0 && ell.is_finite()) {
            return Err(GalamError::domain(format!(
                "drift exponent ell = {ell} must be >= 1"
            )));
        }
        if !(0.0..=1.0).contains(&delta) {
            return Err(GalamError::domain(format!(
                "delta = {delta} must lie in [0, 1]"
            )));
        }
        Ok(DriftSpec {
            k,
            ell,
            delta,
            direction,
        })
    }

    /// `K (1 - delta)` or `K (1 + delta)`.
    pub fn factor(&self) -> f64 {
        match self.direction {
            DriftDirection::Lower => self.k * (1.0 - self.delta),
            DriftDirection::Upper => self.k * (1.0 + self.delta),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftIterate {
    pub value: f64,
    /// Set when the iterate left (0, 1] and was clamped to 0 or 1.
    pub clamped: bool,
}

/// `t`-fold drift iterate starting from `b`.
pub fn drift_iterate(spec: &DriftSpec, b: f64, t: u32) -> Result<DriftIterate> {
    if !(b > 0.0 && b <= 1.0) {
        return Err(GalamError::domain(format!(
            "drift start b = {b} must lie in (0, 1]"
        )));
    }
    let factor = spec.factor();
    let mut value = b;
    let mut clamped = false;
    for _ in 0..t {
        value = factor * value.powf(spec.ell);
        if value > 1.0 {
            value = 1.0;
            clamped = true;
        } else if value == 0.0 || !value.is_normal() {
            value = 0.0;
            clamped = true;
            break;
        }
    }
    Ok(DriftIterate { value, clamped })
}

/// Closed form `(K(1 -/+ delta))^(sum_{j<t} ell^j) * b^(ell^t)`, evaluated in log space.
pub fn drift_closed_form(spec: &DriftSpec, b: f64, t: u32) -> f64 {
    let exponent_sum: f64 = (0..t).map(|j| spec.ell.powi(j as i32)).sum();
    let log_value = exponent_sum * spec.factor().ln() + spec.ell.powi(t as i32) * b.ln();
    log_value.exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn uniform(size: u32) -> RoomConfig {
        RoomConfig::uniform(size, 10).unwrap()
    }

    #[test]
    fn binomial_table_rows() {
        assert_eq!(binomial(4, 2), 6.0);
        assert_eq!(binomial(6, 3), 20.0);
        assert_eq!(binomial(3, 4), 0.0);
        assert_eq!(binomial(64, 32), 1832624140942590534u64 as f64);
    }

    #[test]
    fn f_single_examples() {
        assert_eq!(f_single(3, 0.5).unwrap(), 0.5);
        assert_eq!(f_single(4, 0.5).unwrap(), 0.3125);
        assert_relative_eq!(f_single(2, 0.25).unwrap(), 0.0625, epsilon = 1e-15);
        for i in 2..=20 {
            assert_eq!(f_single(i, 0.0).unwrap(), 0.0);
            assert_eq!(f_single(i, 1.0).unwrap(), 1.0);
        }
        assert!(f_single(1, 0.5).is_err());
        assert!(f_single(3, 1.5).is_err());
        assert!(f_single(3, -0.1).is_err());
        assert!(f_single(3, f64::NAN).is_err());
    }

    #[test]
    fn expected_positive_examples() {
        assert_eq!(expected_positive(&uniform(3), 0.5).unwrap(), 0.5);
        let mixed = RoomConfig::new([(3, 4), (4, 3)].into()).unwrap();
        assert_relative_eq!(
            expected_positive(&mixed, 0.5).unwrap(),
            0.40625,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            expected_positive(&uniform(2), 0.3).unwrap(),
            0.09,
            epsilon = 1e-15
        );
    }

    #[test]
    fn expected_negative_examples() {
        assert_relative_eq!(
            expected_negative(&uniform(2), 0.1).unwrap(),
            0.19,
            epsilon = 1e-15
        );
        assert_eq!(expected_negative(&uniform(5), 0.0).unwrap(), 0.0);
        assert_relative_eq!(
            expected_negative(&uniform(3), 0.5).unwrap(),
            0.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn h_examples() {
        assert_relative_eq!(h(&uniform(4), 0.5).unwrap(), -0.1875, epsilon = 1e-15);
        assert_eq!(h(&uniform(3), 0.5).unwrap(), 0.0);
        assert_relative_eq!(h(&uniform(6), 0.5).unwrap(), -0.15625, epsilon = 1e-15);
        let mixed = RoomConfig::new([(2, 3), (5, 7), (8, 1)].into()).unwrap();
        assert_eq!(h(&mixed, 0.0).unwrap(), 0.0);
        assert_eq!(h(&mixed, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn derivative_examples() {
        assert_relative_eq!(f_prime_single(3, 0.5).unwrap(), 1.5, epsilon = 1e-15);
        for i in 4..=12 {
            assert_eq!(f_prime_single(i, 0.0).unwrap(), 0.0);
        }
        assert_eq!(f_prime_single(2, 1.0).unwrap(), 2.0);
    }

    #[test]
    fn derivative_matches_central_difference() {
        let step = 1e-6;
        for i in 2..=16 {
            for k in 1..=99 {
                let p = k as f64 / 100.0;
                let fd = (room_positive(i, p + step) - room_positive(i, p - step)) / (2.0 * step);
                let exact = f_prime_single(i, p).unwrap();
                // Relative where the derivative is not vanishingly small.
                let scale = exact.abs().max(1e-3);
                assert!(
                    (fd - exact).abs() / scale <= 1e-6,
                    "i={i} p={p} fd={fd} exact={exact}"
                );
            }
        }
    }

    #[test]
    fn fixed_points_of_uniform_layouts() {
        let r3 =
            find_fixed_points(&uniform(3), DEFAULT_GRID_RESOLUTION, DEFAULT_TOLERANCE).unwrap();
        assert!(r3.unique);
        assert!((r3.roots[0] - 0.5).abs() <= DEFAULT_TOLERANCE);

        let r4 =
            find_fixed_points(&uniform(4), DEFAULT_GRID_RESOLUTION, DEFAULT_TOLERANCE).unwrap();
        assert!(r4.unique);
        assert!((r4.roots[0] - (1.0 + 13f64.sqrt()) / 6.0).abs() < 1e-11);
        assert_eq!(r4.sign_pattern, "-+");
        let (lo, hi) = r4.brackets[0];
        assert!(lo <= r4.roots[0] && r4.roots[0] <= hi);

        // Golden from a 40-digit bisection of h_6 done outside this code base.
        let r6 =
            find_fixed_points(&uniform(6), DEFAULT_GRID_RESOLUTION, DEFAULT_TOLERANCE).unwrap();
        assert!((r6.roots[0] - 0.652_871_065_875_827_2).abs() < 1e-11);

        let r2 =
            find_fixed_points(&uniform(2), DEFAULT_GRID_RESOLUTION, DEFAULT_TOLERANCE).unwrap();
        assert!(r2.roots.is_empty() && !r2.unique);
        assert_eq!(r2.sign_pattern, "-");
    }

    #[test]
    fn fixed_point_preconditions() {
        assert!(find_fixed_points(&uniform(3), 1e-2, 1e-12).is_err());
        assert!(find_fixed_points(&uniform(3), 1e-4, 1e-17).is_err());
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(threshold(&uniform(5)).unwrap(), 0.5);
        match threshold(&uniform(2)) {
            Err(GalamError::NoUniqueThreshold(report)) => assert!(report.roots.is_empty()),
            other => panic!("expected no-threshold error, got {other:?}"),
        }
        let mixed = RoomConfig::new([(3, 4), (4, 3)].into()).unwrap();
        let alpha = threshold(&mixed).unwrap();
        assert!(alpha > 0.5 && alpha < 0.767593);
        // 0.5 f_3 + 0.5 f_4 - p factors with a root at exactly 2/3.
        assert!((alpha - 2.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn tiebreak_examples() {
        let two = uniform(2);
        for &p in &[0.0, 0.2, 0.5, 0.9] {
            assert_relative_eq!(
                expected_positive_tiebreak(&two, p, 0.0).unwrap(),
                p * p,
                epsilon = 1e-15
            );
        }
        assert_relative_eq!(
            expected_positive_tiebreak(&two, 0.5, 0.5).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        for &k in &[0.0, 0.3, 1.0] {
            assert_eq!(
                expected_positive_tiebreak(&uniform(3), 0.4, k).unwrap(),
                f_single(3, 0.4).unwrap()
            );
        }
        let four = uniform(4);
        for k in 1..100 {
            let p = k as f64 / 100.0;
            let g = expected_positive_tiebreak(&four, p, 0.5).unwrap();
            let g_mirror = expected_positive_tiebreak(&four, 1.0 - p, 0.5).unwrap();
            assert!((g + g_mirror - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn inflexible_examples() {
        let cfg = RoomConfig::new([(2, 1), (3, 2), (4, 1), (7, 3)].into()).unwrap();
        for k in 0..=20 {
            let p = k as f64 / 20.0;
            assert_relative_eq!(
                expected_positive_inflexible(&cfg, p, 0.0, 0.0).unwrap(),
                expected_positive(&cfg, p).unwrap(),
                epsilon = 1e-14
            );
        }
        let v = expected_positive_inflexible(&uniform(3), 0.2, 0.2, 0.2).unwrap();
        assert!((0.0..=1.0).contains(&v));
        assert_relative_eq!(v, 0.224, epsilon = 1e-14);
        assert_relative_eq!(
            expected_positive_inflexible(&uniform(3), 0.5, 0.1, 0.1).unwrap(),
            0.5,
            epsilon = 1e-14
        );
        assert!(expected_positive_inflexible(&uniform(3), 0.05, 0.1, 0.1).is_err());
        assert!(expected_positive_inflexible(&uniform(3), 0.95, 0.1, 0.1).is_err());
        assert!(expected_positive_inflexible(&uniform(3), 0.5, 0.6, 0.6).is_err());
    }

    #[test]
    fn inflexible_is_monotone_on_band() {
        for size in 2..=9 {
            let cfg = uniform(size);
            for &(a, b) in &[(0.1, 0.1), (0.05, 0.3), (0.3, 0.0)] {
                let mut prev = f64::NEG_INFINITY;
                let steps = 400;
                for k in 0..=steps {
                    let p = a + (1.0 - b - a) * k as f64 / steps as f64;
                    let v = expected_positive_inflexible(&cfg, p.min(1.0 - b), a, b).unwrap();
                    assert!(v >= prev - 1e-14, "size {size} a={a} b={b} p={p}");
                    prev = v;
                }
            }
        }
    }

    #[test]
    fn drift_examples() {
        let identity = DriftSpec::new(1.0, 1.0, 0.0, DriftDirection::Lower).unwrap();
        for t in 0..10 {
            assert_eq!(drift_iterate(&identity, 0.37, t).unwrap().value, 0.37);
        }

        let n = 1e6f64;
        let doubling = DriftSpec::new(2.0, 1.0, 1.0, DriftDirection::Upper).unwrap();
        for m in 0..4u32 {
            let got = drift_iterate(&doubling, n.powf(-0.5), m).unwrap();
            assert!(!got.clamped);
            assert_relative_eq!(
                got.value,
                4f64.powi(m as i32) / n.sqrt(),
                max_relative = 1e-14
            );
        }

        for i in [3u32, 4, 5] {
            let spec = DriftSpec::new(1.0, i as f64, 0.5, DriftDirection::Lower).unwrap();
            let eps = 0.1;
            for m in 0..4u32 {
                let got = drift_iterate(&spec, eps, m).unwrap().value;
                let envelope = (eps / 2.0).powf((i as f64).powi(m as i32));
                assert!(got >= envelope || envelope == 0.0, "i={i} m={m}");
            }
        }
    }

    #[test]
    fn drift_clamps_and_flags() {
        let spec = DriftSpec::new(3.0, 1.0, 0.5, DriftDirection::Upper).unwrap();
        let got = drift_iterate(&spec, 0.5, 3).unwrap();
        assert_eq!(got.value, 1.0);
        assert!(got.clamped);

        let squash = DriftSpec::new(1.0, 4.0, 0.5, DriftDirection::Lower).unwrap();
        let got = drift_iterate(&squash, 0.01, 10).unwrap();
        assert_eq!(got.value, 0.0);
        assert!(got.clamped);

        assert!(DriftSpec::new(0.0, 1.0, 0.5, DriftDirection::Lower).is_err());
        assert!(DriftSpec::new(1.0, 0.5, 0.5, DriftDirection::Lower).is_err());
        assert!(drift_iterate(&squash, 0.0, 1).is_err());
    }
}
