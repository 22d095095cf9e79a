//! `min:max:steps` grids with inclusive endpoints.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid range `{text}`: {reason}")]
pub struct RangeError {
    pub text: String,
    pub reason: String,
}

/// Linear grid of `steps` points from `min` to `max`; `steps = 1` requires
/// `min == max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LinRange {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl LinRange {
    pub fn new(min: f64, max: f64, steps: usize) -> Result<Self, RangeError> {
        let err = |reason: &str| RangeError {
            text: format!("{min}:{max}:{steps}"),
            reason: reason.into(),
        };
        if !(min.is_finite() && max.is_finite()) {
            return Err(err("endpoints must be finite"));
        }
        if steps == 0 {
            return Err(err("steps must be >= 1"));
        }
        if max < min {
            return Err(err("max must be >= min"));
        }
        if steps == 1 && max != min {
            return Err(err("a single step needs min == max"));
        }
        Ok(Self { min, max, steps })
    }

    /// Single-point range.
    pub fn point(x: f64) -> Result<Self, RangeError> {
        Self::new(x, x, 1)
    }

    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.min];
        }
        let d = (self.max - self.min) / (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| {
                if i + 1 == self.steps {
                    self.max
                } else {
                    self.min + i as f64 * d
                }
            })
            .collect()
    }
}

impl FromStr for LinRange {
    type Err = RangeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason: &str| RangeError {
            text: s.into(),
            reason: reason.into(),
        };
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, n] = parts.as_slice() else {
            return Err(err("expected min:max:steps"));
        };
        let min: f64 = lo.trim().parse().map_err(|_| err("min is not a number"))?;
        let max: f64 = hi.trim().parse().map_err(|_| err("max is not a number"))?;
        let steps: usize = n
            .trim()
            .parse()
            .map_err(|_| err("steps is not a positive integer"))?;
        Self::new(min, max, steps).map_err(|e| RangeError {
            text: s.into(),
            reason: e.reason,
        })
    }
}

impl TryFrom<String> for LinRange {
    type Error = RangeError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<LinRange> for String {
    fn from(r: LinRange) -> Self {
        r.to_string()
    }
}

impl fmt::Display for LinRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.min, self.max, self.steps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_spaces() {
        let r: LinRange = "-0.3:0.3:61".parse().unwrap();
        let v = r.values();
        assert_eq!(v.len(), 61);
        assert_eq!(v[0], -0.3);
        assert_eq!(v[60], 0.3);
        assert!(v[30].abs() < 1e-15);
        assert_eq!("2:2:1".parse::<LinRange>().unwrap().values(), vec![2.0]);
    }

    #[test]
    fn rejects_bad_ranges() {
        for s in [
            "0.3:-0.3:10",
            "0:1:0",
            "0:1",
            "a:1:2",
            "0:1:2:3",
            "0:1:1",
            "0:inf:3",
        ] {
            assert!(s.parse::<LinRange>().is_err(), "{s}");
        }
    }

    #[test]
    fn serde_round_trip() {
        let r: LinRange = serde_json::from_str("\"0.5:20:79\"").unwrap();
        assert_eq!(r.steps, 79);
        assert_eq!(serde_json::to_string(&r).unwrap(), "\"0.5:20:79\"");
        assert!(serde_json::from_str::<LinRange>("\"1:0:3\"").is_err());
    }
}
