//! Flat dotted-key configuration shared by every subcommand.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::{Map, Value};

use crate::error::CliError;

pub struct KeySpec {
    pub key: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

pub const KEYS: &[KeySpec] = &[
    KeySpec { key: "scene.side", default: "16", help: "image side length (N = side²)" },
    KeySpec { key: "scene.T", default: "4", help: "number of frames" },
    KeySpec { key: "scene.D", default: "4", help: "pixels per anomaly tile (a square number)" },
    KeySpec { key: "scene.s1", default: "2", help: "nonzero smooth groups" },
    KeySpec { key: "scene.s2", default: "1", help: "nonzero anomaly groups" },
    KeySpec { key: "scene.alpha", default: "20", help: "norm of every nonzero group" },
    KeySpec { key: "scene.sigma", default: "1", help: "noise standard deviation" },
    KeySpec { key: "seed", default: "0", help: "base seed" },
    KeySpec { key: "lambda.mode", default: "\"experiment\"", help: "experiment | theorem1 | explicit" },
    KeySpec { key: "lambda.lambda1", default: "null", help: "explicit weight (smooth / all groups)" },
    KeySpec { key: "lambda.lambda2", default: "null", help: "explicit weight (anomaly groups)" },
    KeySpec { key: "solver.max_iterations", default: "5000", help: "iteration or sweep cap" },
    KeySpec { key: "solver.kkt_tolerance", default: "1e-6", help: "optimality residual target" },
    KeySpec { key: "solver.objective_rel_tolerance", default: "1e-10", help: "relative objective change target" },
    KeySpec { key: "phase.s_values", default: "[1,2,4,8,16,32]", help: "ascending group-sparsity levels" },
    KeySpec { key: "phase.alpha_values", default: "√2 grid 0.5..64", help: "ascending strengths" },
    KeySpec { key: "phase.trials_per_cell", default: "50", help: "trials per (s, alpha) cell" },
    KeySpec { key: "phase.epsilon_p", default: "1e-6", help: "support detection constant" },
    KeySpec { key: "certify.c0", default: "0.067", help: "intra-block coherence constant" },
    KeySpec { key: "certify.c1", default: "0.001", help: "block coherence constant" },
    KeySpec { key: "certify.epsilon_override", default: "null", help: "larger epsilon to use" },
    KeySpec { key: "io.output_dir", default: "\".\"", help: "directory for output files" },
    KeySpec { key: "workers", default: "available cores", help: "parallel trial workers (phase)" },
];

const SCENE: &[&str] = &["scene.side", "scene.T", "scene.D", "scene.s1", "scene.s2", "scene.alpha", "scene.sigma", "seed"];
const LAMBDA: &[&str] = &["lambda.mode", "lambda.lambda1", "lambda.lambda2"];
const SOLVER: &[&str] = &["solver.max_iterations", "solver.kkt_tolerance", "solver.objective_rel_tolerance"];
const IO: &[&str] = &["io.output_dir"];

/// Config keys each subcommand reads.
pub fn keys_for(subcommand: &str) -> Vec<&'static str> {
    let groups: &[&[&str]] = match subcommand {
        "gen" => &[SCENE, IO],
        "coherence" => &[&["scene.side", "scene.T", "scene.D"], IO],
        "solve" | "demix" => &[SCENE, LAMBDA, SOLVER, IO],
        "certify" => &[SCENE, LAMBDA, SOLVER, &["certify.c0", "certify.c1", "certify.epsilon_override"], IO],
        "phase" => &[
            &["scene.side", "scene.T", "scene.D", "scene.sigma", "seed"],
            LAMBDA,
            SOLVER,
            &["phase.s_values", "phase.alpha_values", "phase.trials_per_cell", "phase.epsilon_p", "workers"],
            IO,
        ],
        "render" => &[IO],
        _ => &[],
    };
    groups.iter().flat_map(|g| g.iter().copied()).collect()
}

pub fn keys_help(subcommand: &str) -> String {
    let mut out = String::from("Config keys (set in --config JSON or with --set key=value):\n");
    for key in keys_for(subcommand) {
        let spec = KEYS.iter().find(|s| s.key == key).expect("registered key");
        out.push_str(&format!("  {:<32} {} [default: {}]\n", spec.key, spec.help, spec.default));
    }
    out
}

/// Values explicitly provided by the config file and overrides. Reads are
/// restricted to the keys registered for the running subcommand.
pub struct Config {
    values: BTreeMap<String, Value>,
    allowed: Vec<&'static str>,
}

fn flatten(prefix: &str, map: &Map<String, Value>, out: &mut BTreeMap<String, Value>) {
    for (k, v) in map {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Object(inner) => flatten(&key, inner, out),
            _ => {
                out.insert(key, v.clone());
            }
        }
    }
}

fn check_known(key: &str) -> Result<(), CliError> {
    if KEYS.iter().any(|s| s.key == key) {
        Ok(())
    } else {
        Err(CliError::Validation(format!("unknown config key `{key}`")))
    }
}

impl Config {
    pub fn load(subcommand: &str, path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
            let parsed: Value = serde_json::from_str(&text)
                .map_err(|e| CliError::Validation(format!("malformed config {}: {e}", path.display())))?;
            let Value::Object(map) = parsed else {
                return Err(CliError::Validation(format!("malformed config {}: expected a JSON object", path.display())));
            };
            flatten("", &map, &mut values);
        }
        for o in overrides {
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| CliError::Validation(format!("malformed override `{o}`: expected key=value")))?;
            let key = key.trim();
            // Bare words are taken as strings.
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            values.insert(key.to_string(), value);
        }
        for key in values.keys() {
            check_known(key)?;
        }
        Ok(Self { values, allowed: keys_for(subcommand) })
    }

    fn raw(&self, key: &str) -> Option<&Value> {
        assert!(self.allowed.contains(&key), "config key `{key}` read but not registered for this subcommand");
        self.values.get(key).filter(|v| !v.is_null())
    }

    fn invalid(key: &str, what: &str) -> CliError {
        CliError::Validation(format!("invalid value for `{key}`: expected {what}"))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, CliError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.as_u64().map(|x| x as usize).ok_or_else(|| Self::invalid(key, "a nonnegative integer")),
        }
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64, CliError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.as_u64().ok_or_else(|| Self::invalid(key, "a nonnegative integer")),
        }
    }

    pub fn f64_opt(&self, key: &str) -> Result<Option<f64>, CliError> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.as_f64().map(Some).ok_or_else(|| Self::invalid(key, "a number")),
        }
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        Ok(self.f64_opt(key)?.unwrap_or(default))
    }

    pub fn usize_opt(&self, key: &str) -> Result<Option<usize>, CliError> {
        self.raw(key).map(|_| self.usize_or(key, 0)).transpose()
    }

    pub fn str_or(&self, key: &str, default: &str) -> Result<String, CliError> {
        match self.raw(key) {
            None => Ok(default.to_string()),
            Some(v) => v.as_str().map(str::to_string).ok_or_else(|| Self::invalid(key, "a string")),
        }
    }

    pub fn usize_list(&self, key: &str) -> Result<Option<Vec<usize>>, CliError> {
        let Some(v) = self.raw(key) else { return Ok(None) };
        let items = v.as_array().ok_or_else(|| Self::invalid(key, "an array of integers"))?;
        items
            .iter()
            .map(|x| x.as_u64().map(|u| u as usize).ok_or_else(|| Self::invalid(key, "an array of integers")))
            .collect::<Result<_, _>>()
            .map(Some)
    }

    pub fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        let Some(v) = self.raw(key) else { return Ok(None) };
        let items = v.as_array().ok_or_else(|| Self::invalid(key, "an array of numbers"))?;
        items
            .iter()
            .map(|x| x.as_f64().ok_or_else(|| Self::invalid(key, "an array of numbers")))
            .collect::<Result<_, _>>()
            .map(Some)
    }
}
