//! Flag / JSON layering and the small value types shared by subcommands.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use clap::ValueEnum;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::Failure;

/// Fills every flag the user left unset (absent, `false` or empty) from the
/// JSON object at `config`.
///
/// Keys are the long flag names. A key that no flag of the subcommand carries
/// is rejected.
pub fn layered<T: Serialize + DeserializeOwned>(
    flags: &T,
    config: Option<&Path>,
) -> Result<T, Failure> {
    let mut merged = match serde_json::to_value(flags).expect("flags serialize") {
        Value::Object(map) => map,
        _ => unreachable!("flag structs serialize to objects"),
    };
    let Some(path) = config else {
        return from_map(merged);
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let json: Map<String, Value> = match serde_json::from_str(&text) {
        Ok(Value::Object(map)) => map,
        Ok(_) => {
            return Err(Failure::usage(format!(
                "{}: expected a JSON object",
                path.display()
            )))
        }
        Err(e) => return Err(Failure::usage(format!("{}: {e}", path.display()))),
    };
    for (key, value) in json {
        let Some(slot) = merged.get_mut(&key) else {
            return Err(Failure::usage(format!(
                "{}: unknown key '{key}'",
                path.display()
            )));
        };
        let unset = match slot {
            Value::Null | Value::Bool(false) => true,
            Value::Array(v) => v.is_empty(),
            _ => false,
        };
        if unset {
            *slot = value;
        }
    }
    from_map(merged)
}

fn from_map<T: DeserializeOwned>(map: Map<String, Value>) -> Result<T, Failure> {
    serde_json::from_value(Value::Object(map)).map_err(|e| Failure::usage(format!("config: {e}")))
}

/// Parser for real-valued flags; NaN and infinities are rejected here because
/// they do not survive the JSON layering.
pub fn finite(s: &str) -> Result<f64, String> {
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("'{s}' is not a finite number")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    Complete,
    Knn,
    Yao,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightKind {
    Subdiv,
    Avg,
    Fermat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentName {
    Circle,
    Ring,
    Geodesic,
}

/// Comma-separated coordinates, e.g. `1,0` or `-0.5,2,1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(pub Vec<f64>);

impl FromStr for Point {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let coords = s
            .split(',')
            .map(|c| {
                let c = c.trim();
                match c.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(format!("'{c}' is not a finite number")),
                }
            })
            .collect::<Result<Vec<f64>, String>>()?;
        Ok(Point(coords))
    }
}

/// Sample sizes: `512`, `128,256,1024`, or `128..4096` for the doubling
/// sequence between the two bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Sizes(pub Vec<usize>);

impl FromStr for Sizes {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let count = |t: &str| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| format!("'{}' is not a sample size", t.trim()))
        };
        if let Some((a, b)) = s.split_once("..") {
            let (mut n, hi) = (count(a)?, count(b)?);
            if n == 0 || n > hi {
                return Err(format!(
                    "'{s}' is not an increasing range of positive sizes"
                ));
            }
            let mut out = Vec::new();
            while n <= hi {
                out.push(n);
                n *= 2;
            }
            return Ok(Sizes(out));
        }
        s.split(',').map(count).collect::<Result<_, _>>().map(Sizes)
    }
}

impl fmt::Display for Sizes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|n| n.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

impl<'de> Deserialize<'de> for Sizes {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            One(usize),
            List(Vec<usize>),
        }
        match Raw::deserialize(d)? {
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Raw::One(n) => Ok(Sizes(vec![n])),
            Raw::List(v) => Ok(Sizes(v)),
        }
    }
}
