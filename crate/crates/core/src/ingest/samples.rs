use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One time sample of a tracked particle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub position: Vec<f64>,
    /// Velocity component along the manifold's unit normal.
    pub normal_velocity: f64,
    /// Locally measured `nᵀAn`, if available.
    pub normal_rate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoadedSamples {
    /// Sorted by time, one sample per timestamp.
    pub samples: Vec<TrajectorySample>,
    /// Rows dropped because a later row had the same timestamp.
    pub duplicates: usize,
}

fn parse_err(path: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Reads `t,z1,...,zd,vn[,ann]` CSV data. Lines starting with `#` are
/// comments. `label` names the source in errors.
pub fn parse_samples<R: Read>(input: R, label: &Path) -> Result<LoadedSamples> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::NoData(label.to_path_buf()));
    }
    let header_line = rdr.position().line();
    let has_ann = header.last().is_some_and(|h| h == "ann");
    let d = header.len().saturating_sub(if has_ann { 3 } else { 2 });
    let expected: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=d).map(|k| format!("z{k}")))
        .chain(std::iter::once("vn".to_string()))
        .chain(has_ann.then(|| "ann".to_string()))
        .collect();
    if d == 0 || header != expected {
        return Err(parse_err(
            label,
            header_line.max(1),
            format!("expected header t,z1,...,zd,vn[,ann], found {}", header.join(",")),
        ));
    }
    let mut samples = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != header.len() {
            return Err(parse_err(
                label,
                line,
                format!("expected {} fields, found {}", header.len(), rec.len()),
            ));
        }
        let mut vals = Vec::with_capacity(rec.len());
        for (field, name) in rec.iter().zip(&header) {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(label, line, format!("column {name}: cannot parse '{field}'")))?;
            if !v.is_finite() {
                return Err(parse_err(label, line, format!("column {name}: non-finite value")));
            }
            vals.push(v);
        }
        samples.push(TrajectorySample {
            t: vals[0],
            position: vals[1..=d].to_vec(),
            normal_velocity: vals[d + 1],
            normal_rate: has_ann.then(|| vals[d + 2]),
        });
    }
    if samples.is_empty() {
        return Err(Error::NoData(label.to_path_buf()));
    }
    // stable sort keeps file order within equal timestamps, so the last
    // occurrence is the one kept
    samples.sort_by(|a, b| a.t.total_cmp(&b.t));
    let before = samples.len();
    let mut out: Vec<TrajectorySample> = Vec::with_capacity(before);
    for s in samples {
        match out.last_mut() {
            Some(last) if last.t == s.t => *last = s,
            _ => out.push(s),
        }
    }
    let duplicates = before - out.len();
    if duplicates > 0 {
        warn!(
            "{}: {duplicates} duplicate timestamps collapsed to their last occurrence",
            label.display()
        );
    }
    Ok(LoadedSamples {
        samples: out,
        duplicates,
    })
}

pub fn load_samples(path: impl AsRef<Path>) -> Result<LoadedSamples> {
    let path = path.as_ref();
    let file = File::open(path)?;
    parse_samples(file, &PathBuf::from(path))
}

/// Writes samples in the format read by [`load_samples`], with shortest
/// round-trip float formatting.
pub fn write_samples<W: Write>(out: W, samples: &[TrajectorySample]) -> Result<()> {
    let Some(first) = samples.first() else {
        return Err(crate::error::invalid("no samples to write"));
    };
    let d = first.position.len();
    let has_ann = first.normal_rate.is_some();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((1..=d).map(|k| format!("z{k}")));
    header.push("vn".into());
    if has_ann {
        header.push("ann".into());
    }
    w.write_record(&header)?;
    for s in samples {
        if s.position.len() != d || s.normal_rate.is_some() != has_ann {
            return Err(crate::error::invalid("samples differ in dimension or columns"));
        }
        let mut rec = vec![s.t.to_string()];
        rec.extend(s.position.iter().map(f64::to_string));
        rec.push(s.normal_velocity.to_string());
        if let Some(a) = s.normal_rate {
            rec.push(a.to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
