//! File formats: JSON for problems, priors and results, `t,y` CSV for traces.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{HeatProblem, SampleTrace};

/// Relative deviation from a uniform grid tolerated when reading a trace.
pub const GRID_TOL: f64 = 1e-9;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(io_err(path))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(io_err(path))
}

pub fn read_problem(path: &Path) -> Result<HeatProblem> {
    let p: HeatProblem = read_json(path)?;
    p.validate()?;
    Ok(p)
}

/// Writes `t,y` rows with 17 significant digits.
pub fn write_trace(path: &Path, trace: &SampleTrace) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["t", "y"]).map_err(csv_err)?;
    for (i, y) in trace.values.iter().enumerate() {
        w.write_record([format!("{:.16e}", trace.time(i)), format!("{:.16e}", y)])
            .map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads a `t,y` trace; the times must form a uniform grid.
pub fn read_trace(path: &Path) -> Result<SampleTrace> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = r.headers().map_err(csv_err)?.clone();
    if headers.len() != 2 || &headers[0] != "t" || &headers[1] != "y" {
        return Err(Error::InvalidInput(format!(
            "{}: expected header `t,y`",
            path.display()
        )));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let parse = |s: &str| {
            s.trim().parse::<f64>().map_err(|e| {
                Error::InvalidInput(format!("{}: bad number {s:?}: {e}", path.display()))
            })
        };
        times.push(parse(&rec[0])?);
        values.push(parse(&rec[1])?);
    }
    uniform_trace(&times, values).map_err(|e| match e {
        Error::InvalidInput(msg) => Error::InvalidInput(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Builds a trace from explicit sample times, checking that they are uniformly spaced.
pub fn uniform_trace(times: &[f64], values: Vec<f64>) -> Result<SampleTrace> {
    if times.len() < 2 {
        return Err(Error::TraceTooShort {
            len: times.len(),
            min: 2,
        });
    }
    let n = times.len();
    let period = (times[n - 1] - times[0]) / (n - 1) as f64;
    for (i, &t) in times.iter().enumerate() {
        let expected = times[0] + i as f64 * period;
        if (t - expected).abs() > GRID_TOL * t.abs().max(period) {
            return Err(Error::InvalidInput(format!(
                "sample {i} at t = {t} is off the uniform grid (expected {expected})"
            )));
        }
    }
    SampleTrace::new(times[0], period, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn trace_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tr.csv");
        let tr = SampleTrace::new(0.3, 0.01, vec![0.1, -1.0 / 3.0, 2.5e-17, 7.0]).unwrap();
        write_trace(&path, &tr).unwrap();
        let back = read_trace(&path).unwrap();
        assert_eq!(back.values, tr.values);
        assert_eq!(back.t_start, 0.3);
        assert!((back.period - 0.01).abs() < 1e-15);
    }

    #[test]
    fn non_uniform_grid_rejected() {
        assert!(uniform_trace(&[0.0, 0.1, 0.25], vec![1.0; 3]).is_err());
    }

    #[test]
    fn problem_json_uses_string_mode_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        let coeffs: BTreeMap<usize, f64> = [(0, 0.5), (3, -2.0)].into_iter().collect();
        let p = HeatProblem::new(4.0, coeffs, 0.3, 0.8, 1.3, 1.0).unwrap();
        write_json(&path, &p).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"u0_cosine\"") && text.contains("\"3\": -2.0"));
        assert_eq!(read_problem(&path).unwrap(), p);
    }

    #[test]
    fn missing_file_names_path() {
        let err = read_trace(Path::new("/nonexistent/step.csv")).unwrap_err();
        assert!(err.to_string().contains("step.csv"));
    }
}
