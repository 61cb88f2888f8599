//! Room-layout input: inline JSON or a path to a JSON file.
//!
//! Accepted shapes:
//! `{"rooms": {"3": 4}}`, `{"fractions": {"3": 0.5, "4": 0.5}, "n": 120}`,
//! or a bare map `{"3": 4}`.

use std::collections::BTreeMap;

use galam_core::{GalamError, Result, RoomConfig};
use serde_json::{Map, Value};

/// Parsed layout plus, for fraction input, a note describing the achieved `a_i`.
pub struct LoadedConfig {
    pub config: RoomConfig,
    pub note: Option<String>,
}

pub fn load_room_config(source: &str) -> Result<LoadedConfig> {
    let text = if source.trim_start().starts_with('{') {
        source.to_string()
    } else {
        std::fs::read_to_string(source)?
    };
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| GalamError::Domain(format!("malformed config JSON: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| GalamError::Domain("config must be a JSON object".into()))?;

    if let Some(fractions) = obj.get("fractions") {
        let n = obj.get("n").and_then(Value::as_u64).ok_or_else(|| {
            GalamError::Domain("\"fractions\" requires a positive integer \"n\"".into())
        })?;
        let fractions = parse_map(fractions, |v| v.as_f64())?;
        let config = RoomConfig::from_fractions(&fractions, n)?;
        let achieved: Vec<String> = config
            .fractions()
            .map(|(size, a)| format!("a_{size}={a}"))
            .collect();
        let note = format!(
            "achieved n={} rooms={} {}",
            config.n(),
            config.to_json(),
            achieved.join(" ")
        );
        return Ok(LoadedConfig {
            config,
            note: Some(note),
        });
    }
    let rooms = match obj.get("rooms") {
        Some(rooms) => rooms,
        None => &value,
    };
    let counts = parse_map(rooms, |v| v.as_u64())?;
    Ok(LoadedConfig {
        config: RoomConfig::new(counts)?,
        note: None,
    })
}

fn parse_map<T>(value: &Value, convert: impl Fn(&Value) -> Option<T>) -> Result<BTreeMap<u32, T>> {
    let empty = Map::new();
    let obj = match value {
        Value::Object(obj) => obj,
        _ => &empty,
    };
    if obj.is_empty() {
        return Err(GalamError::Domain(
            "room map must be a non-empty JSON object".into(),
        ));
    }
    obj.iter()
        .map(|(key, v)| {
            let size: u32 = key.trim().parse().map_err(|_| {
                GalamError::Domain(format!("room size {key:?} is not a positive integer"))
            })?;
            let x = convert(v).ok_or_else(|| {
                GalamError::Domain(format!("malformed value {v} for room size {size}"))
            })?;
            Ok((size, x))
        })
        .collect()
}
