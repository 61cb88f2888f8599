//! Exact finite-n analysis of the standard chain on states `0..=n`.
//!
//! Given `u`, rooms resolve independently, so the number of positive rooms of
//! size `i` is `Bin(r_i, f_i(u/n))`. A transition row is the convolution of
//! these per-size laws, each spread over multiples of `i`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GalamError, Result};
use crate::model::room_positive;
use crate::output::{format_float, write_comment_json, write_record};
use crate::rooms::RoomConfig;

/// Largest `n` accepted by [`transition_matrix`].
pub const DEFAULT_MATRIX_CAP: u64 = 2048;
/// Largest `n` accepted by [`brute_force_row`].
pub const BRUTE_FORCE_CAP: u64 = 16;
/// Largest acceptable max-norm residual of a linear solve.
pub const RESIDUAL_TOLERANCE: f64 = 1e-9;

/// `Bin(trials, q)` pmf. Built outward from the mode and normalized, which
/// avoids both overflow of the coefficients and underflow of `q^k`.
fn binomial_pmf(trials: u64, q: f64) -> Vec<f64> {
    let len = trials as usize + 1;
    let mut pmf = vec![0.0; len];
    if q <= 0.0 {
        pmf[0] = 1.0;
        return pmf;
    }
    if q >= 1.0 {
        pmf[len - 1] = 1.0;
        return pmf;
    }
    let odds = q / (1.0 - q);
    let mode = (((trials + 1) as f64 * q).floor() as usize).min(trials as usize);
    pmf[mode] = 1.0;
    for k in mode..trials as usize {
        pmf[k + 1] = pmf[k] * (trials as usize - k) as f64 / (k + 1) as f64 * odds;
        if pmf[k + 1] < f64::MIN_POSITIVE {
            break;
        }
    }
    for k in (1..=mode).rev() {
        pmf[k - 1] = pmf[k] * k as f64 / (trials as usize - k + 1) as f64 / odds;
        if pmf[k - 1] < f64::MIN_POSITIVE {
            break;
        }
    }
    let total: f64 = pmf.iter().sum();
    pmf.iter_mut().for_each(|x| *x /= total);
    pmf
}

fn check_state(config: &RoomConfig, u: u64) -> Result<f64> {
    if u > config.n() {
        return Err(GalamError::domain(format!(
            "state {u} outside [0, {}]",
            config.n()
        )));
    }
    Ok(u as f64 / config.n() as f64)
}

/// `π_{u v}` for `v = 0..=n`.
pub fn transition_row(config: &RoomConfig, u: u64) -> Result<Vec<f64>> {
    let p = check_state(config, u)?;
    let n = config.n() as usize;
    let mut row = vec![0.0; n + 1];
    row[0] = 1.0;
    let mut reach = 0usize;
    for (size, count) in config.rooms() {
        let size = size as usize;
        let pmf = binomial_pmf(count, room_positive(size as u32, p));
        let mut next = vec![0.0; n + 1];
        for (seats, &w) in row.iter().enumerate().take(reach + 1) {
            if w == 0.0 {
                continue;
            }
            for (k, &q) in pmf.iter().enumerate() {
                next[seats + k * size] += w * q;
            }
        }
        row = next;
        reach += size * count as usize;
    }
    Ok(row)
}

/// Reference row by enumerating all `2^n` seat assignments (`n <= 16`).
pub fn brute_force_row(config: &RoomConfig, u: u64) -> Result<Vec<f64>> {
    let n = config.n();
    if n > BRUTE_FORCE_CAP {
        return Err(GalamError::Resource(format!(
            "brute force needs n <= {BRUTE_FORCE_CAP}, got {n}"
        )));
    }
    let p = check_state(config, u)?;
    let mut rooms = Vec::new();
    let mut offset = 0u32;
    for (size, count) in config.rooms() {
        for _ in 0..count {
            rooms.push((offset, size));
            offset += size;
        }
    }
    let n = n as usize;
    let mut row = vec![0.0; n + 1];
    for mask in 0u32..(1 << n) {
        let positives = mask.count_ones() as i32;
        let weight = p.powi(positives) * (1.0 - p).powi(n as i32 - positives);
        if weight == 0.0 {
            continue;
        }
        let mut v = 0usize;
        for &(start, size) in &rooms {
            let seats = (mask >> start) & ((1u32 << size) - 1);
            if 2 * seats.count_ones() > size {
                v += size as usize;
            }
        }
        row[v] += weight;
    }
    Ok(row)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    pub n: u64,
    pub config: RoomConfig,
    /// `rows[u][v] = π_{u v}`.
    pub rows: Vec<Vec<f64>>,
}

/// Full matrix with the default cap.
pub fn transition_matrix(config: &RoomConfig) -> Result<TransitionMatrix> {
    transition_matrix_capped(config, DEFAULT_MATRIX_CAP)
}

pub fn transition_matrix_capped(config: &RoomConfig, cap: u64) -> Result<TransitionMatrix> {
    let n = config.n();
    if n > cap {
        return Err(GalamError::Resource(format!(
            "n = {n} exceeds the exact-chain cap {cap}"
        )));
    }
    let rows = (0..=n)
        .into_par_iter()
        .map(|u| transition_row(config, u))
        .collect::<Result<Vec<_>>>()?;
    Ok(TransitionMatrix {
        n,
        config: config.clone(),
        rows,
    })
}

#[derive(Serialize)]
struct MatrixHeader {
    n: u64,
    rooms: std::collections::BTreeMap<u32, u64>,
}

impl MatrixHeader {
    fn new(n: u64, config: &RoomConfig) -> Self {
        MatrixHeader {
            n,
            rooms: config.rooms().collect(),
        }
    }
}

impl TransitionMatrix {
    /// `# {"n":..,"rooms":..}`, then `u,0,1,..,n`, then one row per state.
    pub fn write_csv<W: Write + ?Sized>(&self, out: &mut W) -> Result<()> {
        write_comment_json(out, &MatrixHeader::new(self.n, &self.config))?;
        let header: Vec<String> = std::iter::once("u".to_string())
            .chain((0..=self.n).map(|v| v.to_string()))
            .collect();
        write_record(out, &header)?;
        for (u, row) in self.rows.iter().enumerate() {
            let fields: Vec<String> = std::iter::once(u.to_string())
                .chain(row.iter().map(|&x| format_float(x)))
                .collect();
            write_record(out, &fields)?;
        }
        Ok(())
    }

    fn check_absorbing(&self) -> Result<()> {
        let n = self.n as usize;
        let point = |row: &[f64], at: usize| {
            row.iter()
                .enumerate()
                .all(|(v, &x)| x == if v == at { 1.0 } else { 0.0 })
        };
        if !point(&self.rows[0], 0) || !point(&self.rows[n], n) {
            return Err(GalamError::domain("states 0 and n must be absorbing"));
        }
        Ok(())
    }

    /// Solves `(I - Q) x = rhs` over the transient states `1..n`.
    fn solve_transient(&self, rhs: impl Fn(usize) -> f64) -> Result<Vec<f64>> {
        self.check_absorbing()?;
        let n = self.n as usize;
        let mut full = vec![0.0; n + 1];
        let m = n - 1;
        if m == 0 {
            return Ok(full);
        }
        let a = DMatrix::from_fn(m, m, |r, c| {
            let identity = if r == c { 1.0 } else { 0.0 };
            identity - self.rows[r + 1][c + 1]
        });
        let b = DVector::from_fn(m, |r, _| rhs(r + 1));
        let x = a
            .clone()
            .lu()
            .solve(&b)
            .ok_or_else(|| GalamError::Numeric("singular transient system".into()))?;
        let residual = (&a * &x - &b).amax();
        if !residual.is_finite() || residual > RESIDUAL_TOLERANCE {
            return Err(GalamError::Numeric(format!(
                "linear solve residual {residual:e} too large"
            )));
        }
        full[1..n].copy_from_slice(x.as_slice());
        Ok(full)
    }
}

/// Probability of absorbing in `n` from each start state.
pub fn absorption_probabilities(m: &TransitionMatrix) -> Result<Vec<f64>> {
    let n = m.n as usize;
    let mut x = m.solve_transient(|u| m.rows[u][n])?;
    x[n] = 1.0;
    Ok(x)
}

/// Expected rounds to absorption from each start state.
pub fn expected_absorption_time(m: &TransitionMatrix) -> Result<Vec<f64>> {
    m.solve_transient(|_| 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsorptionReport {
    pub n: u64,
    #[serde(rename = "prob_S_plus")]
    pub prob_s_plus: Vec<f64>,
    pub expected_time: Vec<f64>,
}

impl AbsorptionReport {
    pub fn from_matrix(m: &TransitionMatrix) -> Result<Self> {
        Ok(AbsorptionReport {
            n: m.n,
            prob_s_plus: absorption_probabilities(m)?,
            expected_time: expected_absorption_time(m)?,
        })
    }

    /// Header `u,prob_S_plus,expected_time`, one row per state.
    pub fn write_csv<W: Write + ?Sized>(&self, config: &RoomConfig, out: &mut W) -> Result<()> {
        write_comment_json(out, &MatrixHeader::new(self.n, config))?;
        write_record(
            out,
            &["u", "prob_S_plus", "expected_time"].map(String::from),
        )?;
        for (u, (p, t)) in self.prob_s_plus.iter().zip(&self.expected_time).enumerate() {
            write_record(out, &[u.to_string(), format_float(*p), format_float(*t)])?;
        }
        Ok(())
    }
}
