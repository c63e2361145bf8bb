//! Named numeric parameter maps as they appear in scenario files.

use std::collections::BTreeMap;

pub type ParamMap = BTreeMap<String, f64>;

/// A typed parameter block that round-trips through a [`ParamMap`].
pub trait ParamSet: Sized + Default {
    /// Every key the block understands.
    const KEYS: &'static [&'static str];

    /// Overrides defaults with the entries of `map`. Unknown keys and
    /// out-of-range values are reported as `(key, message)`.
    fn from_map(map: &ParamMap) -> Result<Self, (String, String)>;

    /// All keys carrying values, defaults included.
    fn to_map(&self) -> ParamMap;
}

pub(crate) fn check_keys(map: &ParamMap, keys: &[&str]) -> Result<(), (String, String)> {
    for k in map.keys() {
        if !keys.contains(&k.as_str()) {
            return Err((
                k.clone(),
                format!("unrecognized parameter (expected one of: {})", keys.join(", ")),
            ));
        }
    }
    Ok(())
}

pub(crate) fn positive(map: &ParamMap, key: &str, default: f64) -> Result<f64, (String, String)> {
    let v = map.get(key).copied().unwrap_or(default);
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err((key.to_string(), format!("must be positive and finite, got {v}")))
    }
}

pub(crate) fn non_negative(map: &ParamMap, key: &str, default: f64) -> Result<f64, (String, String)> {
    let v = map.get(key).copied().unwrap_or(default);
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err((key.to_string(), format!("must be non-negative and finite, got {v}")))
    }
}

pub(crate) fn positive_count(map: &ParamMap, key: &str, default: usize) -> Result<usize, (String, String)> {
    match map.get(key) {
        None => Ok(default),
        Some(&v) if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 => Ok(v as usize),
        Some(v) => Err((key.to_string(), format!("must be an integer >= 1, got {v}"))),
    }
}
