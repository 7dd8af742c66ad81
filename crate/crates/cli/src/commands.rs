use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use entryexit::balance::{run_exit, sweep as run_sweep, BalanceSeries, SweepSpec};
use entryexit::dynsys::FlatManifold;
use entryexit::flows::{build, FlowId, NeighbourhoodSpec};
use entryexit::ingest::{
    load_samples, make_fixture as generate, run_ingest, write_report, write_samples, Extrapolation, FixtureOptions,
    IngestConfig,
};
use log::warn;
use serde_json::{json, Map, Value};

use crate::args::{BalanceArgs, Cli, ExtrapolateArg, FixtureArgs, FlowArgs, IngestArgs, SweepArgs};
use crate::config::{self, usage, CliError, Outcome, EX_NOINPUT};

fn fmt_state(z: &[f64]) -> String {
    let parts: Vec<String> = z.iter().map(f64::to_string).collect();
    format!("({})", parts.join(", "))
}

fn write_series(path: &Path, s: &BalanceSeries) -> anyhow::Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    match &s.rates {
        Some(r) => {
            writeln!(w, "t,F,rate")?;
            for ((t, f), r) in s.times.iter().zip(&s.values).zip(r) {
                writeln!(w, "{t},{f},{r}")?;
            }
        }
        None => {
            writeln!(w, "t,F")?;
            for (t, f) in s.times.iter().zip(&s.values) {
                writeln!(w, "{t},{f}")?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn write_json(path: &Path, v: &Value) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn balance(cli: &Cli, a: &BalanceArgs) -> anyhow::Result<Outcome> {
    let file = config::load(cli.config.as_deref())?;
    let cfg = config::pipeline(file, &a.pipeline)?;
    let run = run_exit(&cfg)?;
    for w in &run.warnings {
        warn!("{w}");
    }
    let out = &cli.out;
    config::write_config(out, serde_json::to_value(&run.config)?, cli.seed)?;
    write_series(&out.join("series.csv"), &run.series)?;
    let span = run.config.span.unwrap_or_default();
    let mut exit = match &run.exit {
        Some(e) => json!({
            "found": true,
            "T": e.t,
            "exit_state": e.exit_state,
            "dF_dt": e.df_dt,
            "degenerate": e.degenerate,
            "bracket": [e.bracket.0, e.bracket.1],
        }),
        None => json!({
            "found": false,
            "T": null,
            "search_span": [cfg.t0, cfg.t0 + span],
        }),
    };
    if let (Value::Object(m), Value::Object(kind)) = (&mut exit, serde_json::to_value(run.series.kind)?) {
        m.extend(kind);
        m.insert("warnings".into(), json!(run.warnings));
    }
    write_json(&out.join("exit.json"), &exit)?;
    match &run.exit {
        Some(e) => {
            println!(
                "T = {}  exit = {}  dF/dt = {}{}",
                e.t,
                fmt_state(&e.exit_state),
                e.df_dt,
                if e.degenerate { "  (degenerate)" } else { "" }
            );
            Ok(Outcome::Done)
        }
        None => {
            println!("no nontrivial zero in [{}, {}]", cfg.t0, cfg.t0 + span);
            Ok(Outcome::NotFound)
        }
    }
}

pub fn sweep(cli: &Cli, a: &SweepArgs) -> anyhow::Result<Outcome> {
    let mut file = config::load(cli.config.as_deref())?;
    let mut spec = match file.remove("sweep") {
        Some(Value::Object(m)) => m,
        Some(_) => return Err(usage("configuration field 'sweep' must be an object")),
        None => Map::new(),
    };
    if let Some(p) = &a.sweep_param {
        spec.insert("param".into(), Value::String(p.clone()));
    }
    for (k, v) in [("from", a.from), ("to", a.to)] {
        if let Some(v) = v {
            spec.insert(k.into(), json!(v));
        }
    }
    if let Some(n) = a.steps {
        spec.insert("steps".into(), json!(n));
    }
    let spec: SweepSpec = serde_json::from_value(Value::Object(spec))
        .map_err(|e| usage(format!("sweep needs --param, --from, --to and --steps: {e}")))?;
    if spec.steps == 0 {
        return Err(usage("--steps must be at least 1"));
    }
    let cfg = config::pipeline(file, &a.pipeline)?;
    let result = run_sweep(&cfg, &spec)?;
    let out = &cli.out;
    let mut resolved = serde_json::to_value(&cfg)?;
    if let Value::Object(m) = &mut resolved {
        m.insert("sweep".into(), serde_json::to_value(&spec)?);
    }
    config::write_config(out, resolved, cli.seed)?;
    let csv = File::create(out.join("sweep.csv")).context("creating sweep.csv")?;
    result.write_csv(BufWriter::new(csv))?;
    write_json(&out.join("sweep.json"), &result.sidecar())?;
    let ok = result.rows.iter().filter(|r| r.t.is_some()).count();
    println!("{ok} of {} rows with an exit", result.rows.len());
    for r in result.rows.iter().filter(|r| r.error.is_some()) {
        warn!(
            "{} = {}: {}",
            spec.param,
            r.param,
            r.error.as_deref().unwrap_or_default()
        );
    }
    match result.fit {
        Some(f) => println!(
            "fit: T = {} * {} + {}  (R^2 = {})",
            f.slope, spec.param, f.intercept, f.r2
        ),
        None => println!("fit: undefined"),
    }
    Ok(Outcome::Done)
}

fn flow_from(map: &mut Map<String, Value>, a: &FlowArgs) -> anyhow::Result<Option<entryexit::flows::ModelFlow>> {
    config::apply_flow(map, a)?;
    let id = match map.get("flow") {
        None => return Ok(None),
        Some(Value::String(s)) => s.parse::<FlowId>()?,
        Some(_) => return Err(usage("configuration field 'flow' must be a string")),
    };
    let params: BTreeMap<String, f64> = match map.get("params") {
        None => BTreeMap::new(),
        Some(v) => serde_json::from_value(v.clone()).map_err(|e| usage(format!("params: {e}")))?,
    };
    Ok(Some(build(id, &params)?))
}

fn take<T: serde::de::DeserializeOwned>(map: &mut Map<String, Value>, key: &str) -> anyhow::Result<Option<T>> {
    map.remove(key)
        .map(|v| serde_json::from_value(v).map_err(|e| usage(format!("{key}: {e}"))))
        .transpose()
}

fn report_dirs(out: &Path, paths: &[PathBuf]) -> Vec<PathBuf> {
    let stems: Vec<String> = paths
        .iter()
        .map(|p| {
            p.file_stem()
                .map_or("input".into(), |s| s.to_string_lossy().into_owned())
        })
        .collect();
    stems
        .iter()
        .enumerate()
        .map(|(i, s)| {
            if stems.iter().filter(|x| *x == s).count() > 1 {
                out.join(format!("{s}-{}", i + 1))
            } else {
                out.join(s)
            }
        })
        .collect()
}

pub fn ingest(cli: &Cli, a: &IngestArgs) -> anyhow::Result<Outcome> {
    let mut file = config::load(cli.config.as_deref())?;
    let flow = flow_from(&mut file, &a.flow)?;
    let manifold: FlatManifold = match (take(&mut file, "manifold")?, &flow) {
        (Some(m), _) => m,
        (None, Some(f)) => f.manifold().clone(),
        (None, None) => return Err(usage("ingest needs --flow or a manifold in the configuration file")),
    };
    let base_gate: Option<NeighbourhoodSpec> = take(&mut file, "gate")?.or(flow.as_ref().map(|f| f.gate));
    let gate = match (base_gate, a.gate_coord, a.gate_lower, a.gate_upper) {
        (Some(g), c, l, u) => NeighbourhoodSpec::new(
            c.unwrap_or(g.coordinate_index()),
            l.unwrap_or(g.lower()),
            u.unwrap_or(g.upper()),
        )?,
        (None, Some(c), Some(l), Some(u)) => NeighbourhoodSpec::new(c, l, u)?,
        (None, ..) => {
            return Err(usage(
                "ingest needs a gate: --gate-coord, --gate-lower and --gate-upper",
            ))
        }
    };
    let mut cfg = IngestConfig::new(manifold, gate);
    if let Some(t0) = a.t0.or(take(&mut file, "t0")?) {
        cfg.t0 = t0;
    }
    let file_extrapolation: Option<Extrapolation> = take(&mut file, "extrapolation")?;
    cfg.extrapolation = match a.extrapolate {
        Some(ExtrapolateArg::None) => Extrapolation::None,
        Some(ExtrapolateArg::Linear) => Extrapolation::Linear,
        Some(ExtrapolateArg::Quadratic) => Extrapolation::Quadratic,
        None => file_extrapolation.unwrap_or_default(),
    };
    if let Some(w) = a.window.or(take(&mut file, "extrapolation_window")?) {
        cfg.extrapolation_window = w;
    }
    cfg.validate()?;

    let out = &cli.out;
    let mut resolved = serde_json::to_value(&cfg)?;
    if let Value::Object(m) = &mut resolved {
        if let Some(f) = &flow {
            m.insert("flow".into(), json!(f.id));
            m.insert("params".into(), json!(f.params));
        }
        m.insert("inputs".into(), json!(a.paths));
    }
    config::write_config(out, resolved, cli.seed)?;

    let mut missing = false;
    let mut failed = false;
    for (path, dir) in a.paths.iter().zip(report_dirs(out, &a.paths)) {
        if !path.exists() {
            eprintln!("error: {}", CliError::MissingInput(path.clone()));
            missing = true;
            continue;
        }
        let result = load_samples(path)
            .and_then(|loaded| run_ingest(&loaded.samples, &cfg, flow.as_ref().map(|f| f.system())))
            .and_then(|run| write_report(&dir, &run, &cfg));
        match result {
            Ok(s) => {
                let show = |v: Option<f64>| v.map_or("none".to_string(), |x| x.to_string());
                println!(
                    "{}: first zero F_sigma = {}, F_v = {}, predicted = {}",
                    path.display(),
                    show(s.first_zero_sigma),
                    show(s.first_zero_v),
                    show(s.predicted_zero)
                );
            }
            Err(e) => {
                eprintln!("error: {}: {e}", path.display());
                failed = true;
            }
        }
    }
    Ok(match (missing, failed) {
        (true, _) => Outcome::Failed(EX_NOINPUT),
        (false, true) => Outcome::Failed(1),
        _ => Outcome::Done,
    })
}

pub fn make_fixture(cli: &Cli, a: &FixtureArgs) -> anyhow::Result<Outcome> {
    let mut file = config::load(cli.config.as_deref())?;
    let flow = match flow_from(&mut file, &a.flow)? {
        Some(f) => f,
        None => build(FlowId::SolidBody, &BTreeMap::new())?,
    };
    let mut opts = FixtureOptions::default();
    if let Some(v) = a.chi.or(take(&mut file, "chi")?) {
        opts.chi = v;
    }
    if let Some(v) = a.samples.or(take(&mut file, "samples")?) {
        opts.samples = v;
    }
    if let Some(v) = a.duration.or(take(&mut file, "duration")?) {
        opts.duration = Some(v);
    }
    if let Some(v) = a.t0.or(take(&mut file, "t0")?) {
        opts.t0 = v;
    }
    let samples = generate(&flow, &opts)?;
    let path = a.output.clone().unwrap_or_else(|| cli.out.join("fixture.csv"));
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let resolved = json!({
        "flow": flow.id,
        "params": flow.params,
        "fixture": opts,
        "output": path,
    });
    config::write_config(dir, resolved, cli.seed)?;
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    write_samples(BufWriter::new(f), &samples)?;
    let in_gate = samples.iter().filter(|s| flow.gate.contains(&s.position)).count();
    println!(
        "{}: {} samples, {in_gate} in the default gate",
        path.display(),
        samples.len()
    );
    Ok(Outcome::Done)
}

pub fn flows() -> anyhow::Result<Outcome> {
    for id in FlowId::ALL {
        println!("{:<11} {}", id.as_str(), id.description());
        let params: Vec<String> = id.defaults().iter().map(|(k, v)| format!("{k}={v}")).collect();
        println!("{:<11} defaults: {}", "", params.join(" "));
    }
    Ok(Outcome::Done)
}
