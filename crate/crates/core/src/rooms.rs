//! Room layouts and dynamics variants.
//!
//! A layout is always stored as integer room counts `r_i` keyed by room size.
//! Seat fractions `a_i = i * r_i / n` are derived on demand, so they sum to one
//! by construction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{GalamError, Result};

/// Largest supported room size. Binomial coefficients up to this order fit in `u64`.
pub const MAX_ROOM_SIZE: u32 = 64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RoomsJson", into = "RoomsJson")]
pub struct RoomConfig {
    rooms: BTreeMap<u32, u64>,
    n: u64,
}

#[derive(Serialize, Deserialize)]
struct RoomsJson {
    rooms: BTreeMap<u32, u64>,
}

impl TryFrom<RoomsJson> for RoomConfig {
    type Error = GalamError;

    fn try_from(raw: RoomsJson) -> Result<Self> {
        RoomConfig::new(raw.rooms)
    }
}

impl From<RoomConfig> for RoomsJson {
    fn from(cfg: RoomConfig) -> Self {
        RoomsJson { rooms: cfg.rooms }
    }
}

impl RoomConfig {
    /// Builds a layout from `size -> count`. Zero counts are dropped.
    pub fn new(rooms: BTreeMap<u32, u64>) -> Result<Self> {
        let mut kept = BTreeMap::new();
        let mut n: u64 = 0;
        for (&size, &count) in &rooms {
            if size == 1 {
                return Err(GalamError::domain(
                    "room size 1 forbidden (rooms need at least 2 seats)",
                ));
            }
            if size == 0 || size > MAX_ROOM_SIZE {
                return Err(GalamError::domain(format!(
                    "room size {size} outside supported range 2..={MAX_ROOM_SIZE}"
                )));
            }
            if count == 0 {
                continue;
            }
            let seats = (size as u64)
                .checked_mul(count)
                .and_then(|s| n.checked_add(s))
                .ok_or_else(|| GalamError::domain("total seat count overflows u64"))?;
            n = seats;
            kept.insert(size, count);
        }
        if n < 2 {
            return Err(GalamError::domain("room layout has zero total seats"));
        }
        Ok(RoomConfig { rooms: kept, n })
    }

    /// `count` rooms, all of the same `size`.
    pub fn uniform(size: u32, count: u64) -> Result<Self> {
        RoomConfig::new(BTreeMap::from([(size, count)]))
    }

    /// As many rooms of `size` as fit into `seats` seats (at least one).
    pub fn uniform_with_seats(size: u32, seats: u64) -> Result<Self> {
        RoomConfig::uniform(size, (seats / size.max(1) as u64).max(1))
    }

    /// Realizes target seat fractions at (about) `n` seats by largest-remainder rounding.
    ///
    /// Room counts are first rounded down; leftover seats are then handed out one
    /// room at a time to sizes in order of decreasing fractional remainder, as long
    /// as the room still fits. The achieved total can fall short of `n` by less than
    /// the smallest requested room size. Use [`RoomConfig::fractions`] to read back
    /// the achieved `a_i`.
    pub fn from_fractions(fractions: &BTreeMap<u32, f64>, n: u64) -> Result<Self> {
        if n < 2 {
            return Err(GalamError::domain("target seat count must be at least 2"));
        }
        let mut total = 0.0;
        for (&size, &a) in fractions {
            if !(2..=MAX_ROOM_SIZE).contains(&size) {
                if size == 1 {
                    return Err(GalamError::domain(
                        "room size 1 forbidden (rooms need at least 2 seats)",
                    ));
                }
                return Err(GalamError::domain(format!(
                    "room size {size} outside 2..={MAX_ROOM_SIZE}"
                )));
            }
            if !a.is_finite() || a < 0.0 {
                return Err(GalamError::domain(format!(
                    "fraction for size {size} must be >= 0"
                )));
            }
            total += a;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(GalamError::domain(format!(
                "fractions sum to {total}, expected 1"
            )));
        }

        let mut counts = BTreeMap::new();
        let mut remainders = Vec::new();
        let mut used: u64 = 0;
        for (&size, &a) in fractions {
            let ideal = a * n as f64 / size as f64;
            let base = ideal.floor() as u64;
            used += base * size as u64;
            counts.insert(size, base);
            if a > 0.0 {
                remainders.push((ideal - base as f64, size));
            }
        }
        // Largest remainder first; ties go to the smaller room.
        remainders.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
        for &(_, size) in &remainders {
            if used + size as u64 <= n {
                *counts.get_mut(&size).unwrap() += 1;
                used += size as u64;
            }
        }
        RoomConfig::new(counts)
    }

    /// Total number of seats.
    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn max_size(&self) -> u32 {
        *self.rooms.keys().next_back().expect("validated non-empty")
    }

    pub fn min_size(&self) -> u32 {
        *self.rooms.keys().next().expect("validated non-empty")
    }

    /// `(size, count)` pairs in increasing size order.
    pub fn rooms(&self) -> impl Iterator<Item = (u32, u64)> + '_ {
        self.rooms.iter().map(|(&s, &c)| (s, c))
    }

    pub fn room_count(&self) -> u64 {
        self.rooms.values().sum()
    }

    /// Seat fraction `a_i` for one size (zero if absent).
    pub fn fraction(&self, size: u32) -> f64 {
        self.rooms
            .get(&size)
            .map_or(0.0, |&c| (size as u64 * c) as f64 / self.n as f64)
    }

    /// `(size, a_i)` pairs.
    pub fn fractions(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.rooms
            .iter()
            .map(|(&s, &c)| (s, (s as u64 * c) as f64 / self.n as f64))
    }

    pub fn has_even_rooms(&self) -> bool {
        self.rooms.keys().any(|s| s % 2 == 0)
    }

    /// Compact JSON form `{"rooms":{"3":4}}`.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("room config serializes")
    }

    /// Short stable identifier derived from the room counts.
    pub fn digest(&self) -> String {
        short_digest(self.to_json().as_bytes())
    }
}

/// First four bytes of the SHA-256 of `bytes`, as hex.
pub fn short_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .take(4)
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Which one-round dynamics to apply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VariantSpec {
    /// Majority rule, ties go negative.
    #[default]
    Standard,
    /// In a tied room each seat independently turns positive with probability `k`.
    TieBreak { k: f64 },
    /// Fixed fractions `a` / `b` of seats are positive / negative inflexibles.
    Inflexible { a: f64, b: f64 },
}

impl VariantSpec {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, x: f64| {
            if (0.0..=1.0).contains(&x) {
                Ok(())
            } else {
                Err(GalamError::domain(format!(
                    "{name} = {x} must lie in [0, 1]"
                )))
            }
        };
        match *self {
            VariantSpec::Standard => Ok(()),
            VariantSpec::TieBreak { k } => unit("k", k),
            VariantSpec::Inflexible { a, b } => {
                unit("a", a)?;
                unit("b", b)?;
                if a + b > 1.0 {
                    return Err(GalamError::domain(format!("a + b = {} exceeds 1", a + b)));
                }
                Ok(())
            }
        }
    }

    pub fn label(&self) -> String {
        match *self {
            VariantSpec::Standard => "standard".to_string(),
            VariantSpec::TieBreak { k } => format!("tie_break(k={k})"),
            VariantSpec::Inflexible { a, b } => format!("inflexible(a={a},b={b})"),
        }
    }
}
