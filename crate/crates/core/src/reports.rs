//! On-disk report formats. Everything here is deterministic for a given
//! input: fixed column orders, fixed float formatting (probabilities carry
//! 9 significant digits), no timestamps.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::datasets::Characterization;
use crate::learn::{Label, Metrics};
use crate::pipeline::{FeatureRow, SkippedApp, Timings};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("io error at {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    BadFeatureFile {
        path: std::path::PathBuf,
        line: usize,
        message: String,
    },
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Probabilities with 9 significant digits; exact zero stays `0`.
pub fn fmt_prob(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{:.8e}", v)
    }
}

/// `app_id,label,epoch,f0..f{n-1}` with probabilities at 9 significant
/// digits.
pub fn write_features_csv(path: &Path, dim: usize, rows: &[FeatureRow]) -> Result<(), ReportError> {
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let mut write = |s: &str| w.write_all(s.as_bytes()).map_err(io_err(path));

    write("app_id,label,epoch")?;
    for i in 0..dim {
        write(&format!(",f{i}"))?;
    }
    write("\n")?;
    for row in rows {
        debug_assert_eq!(row.values.len(), dim);
        write(&format!("{},{},{}", row.app_id, row.label, row.epoch))?;
        for v in &row.values {
            write(",")?;
            write(&fmt_prob(*v))?;
        }
        write("\n")?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads a feature matrix back; returns the rows and the feature width.
pub fn read_features_csv(path: &Path) -> Result<(Vec<FeatureRow>, usize), ReportError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let reader = BufReader::new(file);
    let bad = |line: usize, message: String| ReportError::BadFeatureFile {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut lines = reader.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| bad(1, "empty file".to_string()))?;
    let header = header.map_err(io_err(path))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 3 || cols[0] != "app_id" || cols[1] != "label" || cols[2] != "epoch" {
        return Err(bad(1, format!("unexpected header start {:?}", &cols[..cols.len().min(3)])));
    }
    let dim = cols.len() - 3;

    let mut rows = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(io_err(path))?;
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let app_id = parts.next().unwrap_or("").to_string();
        let label: Label = parts
            .next()
            .unwrap_or("")
            .parse()
            .map_err(|e| bad(i + 1, format!("{e}")))?;
        let epoch: i32 = parts
            .next()
            .unwrap_or("")
            .parse()
            .map_err(|_| bad(i + 1, "bad epoch".to_string()))?;
        let values: Vec<f64> = parts
            .map(|p| p.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| bad(i + 1, format!("bad feature value: {e}")))?;
        if values.len() != dim {
            return Err(bad(i + 1, format!("expected {dim} features, got {}", values.len())));
        }
        rows.push(FeatureRow {
            app_id,
            label,
            epoch,
            values,
        });
    }
    Ok((rows, dim))
}

pub fn write_skips_csv(path: &Path, skipped: &[SkippedApp]) -> Result<(), ReportError> {
    let mut out = String::from("app_id,reason\n");
    for s in skipped {
        out.push_str(&format!("{},{:?}\n", s.app_id, s.reason));
    }
    std::fs::write(path, out).map_err(io_err(path))
}

pub fn write_timing_csv(path: &Path, timings: &Timings) -> Result<(), ReportError> {
    let mut out = String::from("stage,seconds\n");
    for (stage, secs) in timings.stages() {
        out.push_str(&format!("{stage},{secs:.6}\n"));
    }
    std::fs::write(path, out).map_err(io_err(path))
}

/// One line of the shared metrics schema.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub system: String,
    pub train_set: String,
    pub test_set: String,
    pub delta_epoch: i32,
    pub metrics: Metrics,
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> Result<(), ReportError> {
    let mut out = String::from("system,train_set,test_set,delta_epoch,precision,recall,f_measure\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{:.6},{:.6},{:.6}\n",
            r.system,
            r.train_set,
            r.test_set,
            r.delta_epoch,
            r.metrics.precision,
            r.metrics.recall,
            r.metrics.f_measure
        ));
    }
    std::fs::write(path, out).map_err(io_err(path))
}

pub fn write_predictions_csv(path: &Path, rows: &[(String, Label)]) -> Result<(), ReportError> {
    let mut out = String::from("app_id,predicted\n");
    for (id, label) in rows {
        out.push_str(&format!("{id},{label}\n"));
    }
    std::fs::write(path, out).map_err(io_err(path))
}

pub fn write_selected_features(path: &Path, selected: &[String]) -> Result<(), ReportError> {
    let mut out = String::new();
    for s in selected {
        out.push_str(s);
        out.push('\n');
    }
    std::fs::write(path, out).map_err(io_err(path))
}

/// Emits `unique_calls.csv`, `family_fractions.csv`, and
/// `pca_scatter.csv` under `dir`.
pub fn write_characterization(dir: &Path, ch: &Characterization) -> Result<(), ReportError> {
    let path = dir.join("unique_calls.csv");
    let mut out = String::from("app_id,label,epoch,unique_calls\n");
    for (id, label, epoch, count) in &ch.unique_calls {
        out.push_str(&format!("{id},{label},{epoch},{count}\n"));
    }
    std::fs::write(&path, out).map_err(io_err(&path))?;

    let path = dir.join("family_fractions.csv");
    let mut out = String::from("dataset,app_id,family,fraction\n");
    for (dataset, id, family, fraction) in &ch.family_fractions {
        out.push_str(&format!("{dataset},{id},{family},{}\n", fmt_prob(*fraction)));
    }
    std::fs::write(&path, out).map_err(io_err(&path))?;

    let path = dir.join("pca_scatter.csv");
    let mut out = String::from("app_id,label,epoch,pc1,pc2\n");
    for (id, label, epoch, pc1, pc2) in &ch.pca_scatter {
        out.push_str(&format!("{id},{label},{epoch},{},{}\n", fmt_prob(*pc1), fmt_prob(*pc2)));
    }
    std::fs::write(&path, out).map_err(io_err(&path))
}
