//! Configuration files, flag overrides and exit-code mapping.

use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use anyhow::Context;
use entryexit::balance::PipelineConfig;
use entryexit::flows::FlowId;
use serde_json::{Map, Value};

use crate::args::{FlowArgs, FtleModeArg, LinearizationArg, Method, PipelineArgs};

pub const EX_USAGE: u8 = 64;
pub const EX_NOINPUT: u8 = 66;

pub enum Outcome {
    Done,
    /// The computation succeeded but found no nontrivial zero.
    NotFound,
    Failed(u8),
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("input file not found: {}", .0.display())]
    MissingInput(PathBuf),
}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    CliError::Usage(msg.into()).into()
}

pub fn exit_code(e: &anyhow::Error) -> u8 {
    use entryexit::Error as E;
    for cause in e.chain() {
        if let Some(c) = cause.downcast_ref::<CliError>() {
            return match c {
                CliError::Usage(_) => EX_USAGE,
                CliError::MissingInput(_) => EX_NOINPUT,
            };
        }
        if let Some(err) = cause.downcast_ref::<E>() {
            return match err {
                E::InvalidInput(_)
                | E::UnknownFlow(_)
                | E::UnknownParam { .. }
                | E::MethodUnavailable { .. }
                | E::Json(_) => EX_USAGE,
                E::Io(io) if io.kind() == ErrorKind::NotFound => EX_NOINPUT,
                _ => 1,
            };
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return EX_USAGE;
        }
    }
    1
}

/// Reads the `--config` file as a JSON object, or an empty object.
pub fn load(path: Option<&Path>) -> anyhow::Result<Map<String, Value>> {
    let Some(path) = path else {
        return Ok(Map::new());
    };
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == ErrorKind::NotFound => return Err(CliError::MissingInput(path.into()).into()),
        Err(e) => return Err(e).with_context(|| format!("reading {}", path.display())),
    };
    match serde_json::from_str(&text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(usage(format!(
            "{}: configuration must be a JSON object",
            path.display()
        ))),
        Err(e) => Err(usage(format!("{}: {e}", path.display()))),
    }
}

fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

/// Applies `--flow` and parameter flags.
pub fn apply_flow(map: &mut Map<String, Value>, a: &FlowArgs) -> anyhow::Result<()> {
    if let Some(f) = &a.flow {
        let id: FlowId = f.parse()?;
        map.insert("flow".into(), Value::String(id.as_str().into()));
    }
    let mut overrides: Vec<(String, f64)> = [
        ("alpha", a.alpha),
        ("beta", a.beta),
        ("b", a.b),
        ("alpha_s", a.alpha_s),
        ("eta", a.eta),
        ("z2_0", a.z2_0),
    ]
    .into_iter()
    .filter_map(|(k, v)| v.map(|v| (k.to_string(), v)))
    .collect();
    for kv in &a.params {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| usage(format!("--set expects NAME=VALUE, got '{kv}'")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| usage(format!("--set {k}: '{v}' is not a number")))?;
        overrides.push((k.trim().to_string(), v));
    }
    if overrides.is_empty() {
        return Ok(());
    }
    let params = map.entry("params").or_insert_with(|| Value::Object(Map::new()));
    let Value::Object(params) = params else {
        return Err(usage("configuration field 'params' must be an object"));
    };
    for (k, v) in overrides {
        params.insert(k, num(v));
    }
    Ok(())
}

/// Merges pipeline flags over the file values and deserializes the result.
pub fn pipeline(mut map: Map<String, Value>, a: &PipelineArgs) -> anyhow::Result<PipelineConfig> {
    apply_flow(&mut map, &a.flow)?;
    if let Some(m) = a.method {
        map.insert("method".into(), Value::String(m.tag().into()));
    }
    let method = match map.get("method") {
        None => {
            map.insert("method".into(), Value::String("nile".into()));
            "nile".to_string()
        }
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(usage("configuration field 'method' must be a string")),
    };
    let indexed = !matches!(method.as_str(), "nile" | "measured-velocity");
    if indexed {
        if let Some(i) = a.index {
            map.insert("index".into(), Value::from(i));
        }
        map.entry("index").or_insert(Value::from(0));
    } else {
        map.remove("index");
    }
    if method == Method::Ftle.tag() {
        if let Some(m) = a.ftle_mode {
            let s = match m {
                FtleModeArg::Exact => "exact",
                FtleModeArg::Commuting => "commuting",
            };
            map.insert("mode".into(), Value::String(s.into()));
        }
        map.entry("mode").or_insert(Value::String("exact".into()));
    } else {
        map.remove("mode");
    }
    if let Some(l) = a.linearization {
        let s = match l {
            LinearizationArg::Jacobian => "jacobian",
            LinearizationArg::Rotational => "rotational",
        };
        map.insert("linearization".into(), Value::String(s.into()));
    }
    for (k, v) in [
        ("t0", a.t0),
        ("span", a.span),
        ("ode_tol", a.ode_tol),
        ("zero_tol", a.zero_tol),
        ("deriv_tol", a.deriv_tol),
    ] {
        if let Some(v) = v {
            map.insert(k.into(), num(v));
        }
    }
    if let Some(n) = a.grid_points {
        map.insert("grid_points".into(), Value::from(n));
    }
    if let Some(z) = &a.z0 {
        map.insert("z0".into(), Value::Array(z.iter().map(|&v| num(v)).collect()));
    }
    let cfg: PipelineConfig =
        serde_json::from_value(Value::Object(map)).map_err(|e| usage(format!("invalid configuration: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Writes `config.json` into `dir`, adding the seed when given.
pub fn write_config(dir: &Path, config: Value, seed: Option<u64>) -> anyhow::Result<()> {
    let mut config = config;
    if let (Some(s), Value::Object(m)) = (seed, &mut config) {
        m.insert("seed".into(), Value::from(s));
    }
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut text = serde_json::to_string_pretty(&config)?;
    text.push('\n');
    fs::write(dir.join("config.json"), text)?;
    Ok(())
}
