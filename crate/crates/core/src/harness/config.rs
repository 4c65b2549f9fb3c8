//! `key = value` scenario files.
//!
//! A file names a preset and overrides some of its fields:
//!
//! ```text
//! # finer time step for the droplet
//! preset = droplet-angle
//! dt = 0.0005
//! beta = 2.0944
//! ```
//!
//! Keys: `preset, dim, domain, layout, cells, dt, t_end, epsilon, potential,
//! theta, theta_c, mobility, m0, wetting, beta, seed, schedule, strict,
//! snapshots`. Values are applied in that order regardless of where they
//! appear in the file.

use super::scenario::{preset, Layout, Scenario, ScenarioError};
use crate::model::{MobilityKind, PotentialKind, WallMask};
use crate::scheme2d::SweepSchedule;
use std::collections::HashMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: key '{key}': {message}")]
    Parse { line: usize, key: String, message: String },
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

pub const KEYS: [&str; 19] = [
    "preset",
    "dim",
    "domain",
    "layout",
    "cells",
    "dt",
    "t_end",
    "epsilon",
    "potential",
    "theta",
    "theta_c",
    "mobility",
    "m0",
    "wetting",
    "beta",
    "seed",
    "schedule",
    "strict",
    "snapshots",
];

pub fn parse_config(path: &Path) -> Result<Scenario, ConfigError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<Scenario, ConfigError> {
    let mut entries: HashMap<&str, (usize, &str)> = HashMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError::Parse {
                line,
                key: content.to_string(),
                message: "expected `key = value`".into(),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        let Some(key) = KEYS.iter().copied().find(|k| *k == key) else {
            return Err(ConfigError::Parse { line, key: key.to_string(), message: "unknown key".into() });
        };
        if value.is_empty() {
            return Err(ConfigError::Parse { line, key: key.to_string(), message: "missing value".into() });
        }
        if let Some((first, _)) = entries.insert(key, (line, value)) {
            return Err(ConfigError::Parse {
                line,
                key: key.to_string(),
                message: format!("duplicate of line {first}"),
            });
        }
    }
    let Some(&(line, name)) = entries.get("preset") else {
        return Err(ConfigError::Validation("missing required key 'preset'".into()));
    };
    let mut s = preset(name).map_err(|e| ConfigError::Parse { line, key: "preset".into(), message: e.to_string() })?;
    for key in KEYS.iter().skip(1) {
        if let Some(&(line, value)) = entries.get(key) {
            apply_override(&mut s, key, value).map_err(|message| ConfigError::Parse {
                line,
                key: key.to_string(),
                message,
            })?;
        }
    }
    s.validate().map_err(|e| ConfigError::Validation(e.to_string()))?;
    Ok(s)
}

fn num(v: &str) -> Result<f64, String> {
    let x: f64 = v.parse().map_err(|_| format!("'{v}' is not a number"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("'{v}' is not finite"))
    }
}

fn list(v: &str) -> Result<Vec<f64>, String> {
    v.split(',').map(|t| num(t.trim())).collect()
}

fn count(v: &str) -> Result<usize, String> {
    v.trim().parse().map_err(|_| format!("'{v}' is not a cell count"))
}

/// `N`, `NxM`, or a comma-separated ladder of either.
pub fn parse_cells(v: &str, dim: u8) -> Result<Vec<[usize; 2]>, String> {
    v.split(',')
        .map(|t| {
            let t = t.trim();
            match t.split_once('x') {
                Some((a, b)) => {
                    if dim == 1 {
                        Err(format!("'{t}': 1D scenarios take a single cell count"))
                    } else {
                        Ok([count(a)?, count(b)?])
                    }
                }
                None => {
                    let n = count(t)?;
                    Ok(if dim == 1 { [n, 1] } else { [n, n] })
                }
            }
        })
        .collect()
}

/// Applies one textual override; used by both config files and CLI flags.
pub fn apply_override(s: &mut Scenario, key: &str, value: &str) -> Result<(), String> {
    let v = value.trim();
    match key {
        "dim" => {
            let d: u8 = v.parse().map_err(|_| format!("'{v}' is not 1 or 2"))?;
            if d != s.dim {
                s.dim = d;
                s.cells = s.cells.iter().map(|c| if d == 1 { [c[0], 1] } else { [c[0], c[0]] }).collect();
            }
        }
        "domain" => {
            let d = list(v)?;
            s.domain = match (d.len(), s.dim) {
                (2, 1) => [d[0], d[1], 0.0, 1.0],
                (4, 2) => [d[0], d[1], d[2], d[3]],
                (n, dim) => return Err(format!("{dim}D domain needs {} values, got {n}", 2 * dim)),
            };
        }
        "layout" => {
            s.layout = match v {
                "cell" => Layout::Cell,
                "vertex" => Layout::Vertex,
                _ => return Err(format!("'{v}' is not cell or vertex")),
            }
        }
        "cells" => s.cells = parse_cells(v, s.dim)?,
        "dt" => s.dt = num(v)?,
        "t_end" => s.t_end = num(v)?,
        "epsilon" => s.model.epsilon = num(v)?,
        "potential" => {
            s.model.potential = match v {
                "double_well" => PotentialKind::DoubleWell,
                "log" => match s.model.potential {
                    p @ PotentialKind::Logarithmic { .. } => p,
                    PotentialKind::DoubleWell => PotentialKind::Logarithmic { theta: 0.3, theta_c: 1.0 },
                },
                _ => return Err(format!("'{v}' is not double_well or log")),
            }
        }
        "theta" | "theta_c" => {
            let x = num(v)?;
            match &mut s.model.potential {
                PotentialKind::Logarithmic { theta, theta_c } => *(if key == "theta" { theta } else { theta_c }) = x,
                PotentialKind::DoubleWell => return Err("only meaningful with potential = log".into()),
            }
        }
        "mobility" => {
            let m0 = s.model.mobility.m0();
            s.model.mobility = match v {
                "constant" => MobilityKind::Constant { m0 },
                "degenerate" => MobilityKind::Degenerate { m0 },
                _ => return Err(format!("'{v}' is not constant or degenerate")),
            }
        }
        "m0" => {
            let x = num(v)?;
            s.model.mobility = match s.model.mobility {
                MobilityKind::Constant { .. } => MobilityKind::Constant { m0: x },
                MobilityKind::Degenerate { .. } => MobilityKind::Degenerate { m0: x },
            }
        }
        "wetting" => match v {
            "on" => {
                s.model.wetting.enabled = true;
                if s.model.wetting.walls == WallMask::NONE {
                    s.model.wetting.walls = WallMask::ALL;
                }
            }
            "off" => s.model.wetting.enabled = false,
            _ => return Err(format!("'{v}' is not on or off")),
        },
        "beta" => s.model.wetting.beta = num(v)?,
        "seed" => s.seed = v.parse().map_err(|_| format!("'{v}' is not an unsigned integer"))?,
        "schedule" => {
            s.schedule = match v {
                "seq" | "sequential" => SweepSchedule::Sequential,
                "oddeven" | "odd_even" => SweepSchedule::OddEvenParallel,
                _ => return Err(format!("'{v}' is not seq or oddeven")),
            }
        }
        "strict" => {
            s.strict = match v {
                "true" | "on" | "yes" | "1" => true,
                "false" | "off" | "no" | "0" => false,
                _ => return Err(format!("'{v}' is not a boolean")),
            }
        }
        "snapshots" => s.snapshots = list(v)?,
        "preset" => return Err("the preset cannot be overridden".into()),
        _ => return Err("unknown key".into()),
    }
    Ok(())
}
