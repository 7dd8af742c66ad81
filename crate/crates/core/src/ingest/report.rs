use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{IngestConfig, IngestRun};
use crate::error::{invalid, Error, Result};
use crate::flows::NeighbourhoodSpec;

pub const REPORT_CSV: &str = "report.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const PLOT_SCRIPT: &str = "plot.gp";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub first_zero_sigma: Option<f64>,
    pub first_zero_v: Option<f64>,
    /// Extrapolated next zero of `F_σ`.
    pub predicted_zero: Option<f64>,
    /// Extrapolated next zero of `F_v`.
    pub predicted_zero_v: Option<f64>,
    pub samples: usize,
    pub in_gate_samples: usize,
    pub gate: NeighbourhoodSpec,
    pub config: IngestConfig,
}

impl IngestSummary {
    pub fn new(run: &IngestRun, config: &IngestConfig) -> Self {
        IngestSummary {
            first_zero_sigma: run.first_zero_sigma.map(|r| r.t),
            first_zero_v: run.first_zero_v.map(|r| r.t),
            predicted_zero: run.predicted_zero,
            predicted_zero_v: run.predicted_zero_v,
            samples: run.in_gate.len(),
            in_gate_samples: run.in_gate.iter().filter(|&&g| g).count(),
            gate: config.gate,
            config: config.clone(),
        }
    }
}

/// The `t,F_sigma,F_v,in_gate` table.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportTable {
    pub t: Vec<f64>,
    pub f_sigma: Vec<f64>,
    pub f_v: Vec<f64>,
    pub in_gate: Vec<bool>,
}

fn write_table<W: Write>(out: W, run: &IngestRun) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "F_sigma", "F_v", "in_gate"])?;
    for i in 0..run.sigma.len() {
        w.write_record([
            run.sigma.times[i].to_string(),
            run.sigma.values[i].to_string(),
            run.velocity.values[i].to_string(),
            u8::from(run.in_gate[i]).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn plot_script(summary: &IngestSummary) -> String {
    let mut s = String::from(
        "# gnuplot script: balance functions from the ingested samples\n\
         set datafile separator ','\n\
         set key autotitle columnhead\n\
         set xlabel 't'\n\
         set ylabel 'F'\n\
         set xzeroaxis lt -1\n",
    );
    for (name, v) in [("sigma", summary.first_zero_sigma), ("v", summary.first_zero_v)] {
        if let Some(t) = v {
            s.push_str(&format!(
                "set arrow from {t}, graph 0 to {t}, graph 1 nohead dt 2 # first zero of F_{name}\n"
            ));
        }
    }
    s.push_str(&format!(
        "plot '{REPORT_CSV}' using 1:2 with lines title 'F_sigma', \\\n     '{REPORT_CSV}' using 1:3 with lines title 'F_v', \\\n     0 with lines lt -1 notitle\n"
    ));
    s
}

/// Writes `report.csv`, `summary.json` and `plot.gp` into `dir`.
pub fn write_report(dir: &Path, run: &IngestRun, config: &IngestConfig) -> Result<IngestSummary> {
    if run.sigma.is_empty() {
        return Err(invalid("empty series"));
    }
    fs::create_dir_all(dir)?;
    write_table(BufWriter::new(File::create(dir.join(REPORT_CSV))?), run)?;
    let summary = IngestSummary::new(run, config);
    let mut json = serde_json::to_string_pretty(&summary)?;
    json.push('\n');
    fs::write(dir.join(SUMMARY_JSON), json)?;
    fs::write(dir.join(PLOT_SCRIPT), plot_script(&summary))?;
    Ok(summary)
}

/// Reads a `report.csv` written by [`write_report`].
pub fn read_report(path: &Path) -> Result<ReportTable> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    if rdr.headers()?.iter().collect::<Vec<_>>() != ["t", "F_sigma", "F_v", "in_gate"] {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: "expected header t,F_sigma,F_v,in_gate".into(),
        });
    }
    let mut table = ReportTable {
        t: vec![],
        f_sigma: vec![],
        f_v: vec![],
        in_gate: vec![],
    };
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let num = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| bad(format!("field {} is not a number", i + 1)))
        };
        table.t.push(num(0)?);
        table.f_sigma.push(num(1)?);
        table.f_v.push(num(2)?);
        table.in_gate.push(match rec.get(3) {
            Some("1") => true,
            Some("0") => false,
            _ => return Err(bad("in_gate must be 0 or 1".into())),
        });
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::FlatManifold;
    use crate::ingest::{run_ingest, TrajectorySample};

    #[test]
    fn report_round_trip_and_null_prediction() {
        let samples: Vec<_> = (0..40)
            .map(|i| {
                let t = i as f64 / 13.0;
                TrajectorySample {
                    t,
                    position: vec![t, if i % 7 == 0 { 1.0 } else { 0.01 }],
                    normal_velocity: (t - 1.0) / 3.0,
                    normal_rate: Some(1.0 + t),
                }
            })
            .collect();
        let cfg = IngestConfig::new(
            FlatManifold::coordinate(2, 1, 0.0).unwrap(),
            NeighbourhoodSpec::new(1, 0.0, 0.05).unwrap(),
        );
        let run = run_ingest(&samples, &cfg, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let summary = write_report(dir.path(), &run, &cfg).unwrap();
        assert!(summary.predicted_zero.is_none());
        let table = read_report(&dir.path().join(REPORT_CSV)).unwrap();
        assert_eq!(table.t, run.sigma.times);
        assert_eq!(table.f_sigma, run.sigma.values);
        assert_eq!(table.f_v, run.velocity.values);
        assert_eq!(table.in_gate, run.in_gate);
        let json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join(SUMMARY_JSON)).unwrap()).unwrap();
        assert!(json["predicted_zero"].is_null());
        assert!(fs::read_to_string(dir.path().join(PLOT_SCRIPT))
            .unwrap()
            .contains("plot 'report.csv'"));
    }
}
