use std::fmt::Write as _;
use std::path::Path;

use super::METRICS_HEADER;
use crate::error::{Error, Result};

/// Parsed metrics CSV of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub label: String,
    /// `(round, test_acc)` per row.
    pub accuracy: Vec<(usize, f64)>,
}

impl RunMetrics {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&path.display().to_string(), &text)
    }

    pub fn parse(label: &str, text: &str) -> Result<Self> {
        let fmt = |detail: String| Error::Format {
            offset: 0,
            detail: format!("{label}: {detail}"),
        };
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header: Vec<String> = r
            .headers()
            .map_err(|e| fmt(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        if header != METRICS_HEADER {
            return Err(fmt(format!(
                "columns [{}] do not match the metrics schema [{}]",
                header.join(","),
                METRICS_HEADER.join(",")
            )));
        }
        let mut accuracy = Vec::new();
        for (i, row) in r.records().enumerate() {
            let row = row.map_err(|e| fmt(e.to_string()))?;
            let round = row[0].parse().map_err(|_| fmt(format!("row {}: bad round `{}`", i + 1, &row[0])))?;
            let acc = row[2].parse().map_err(|_| fmt(format!("row {}: bad test_acc `{}`", i + 1, &row[2])))?;
            accuracy.push((round, acc));
        }
        if accuracy.is_empty() {
            return Err(fmt("no rounds recorded".into()));
        }
        Ok(Self {
            label: label.to_string(),
            accuracy,
        })
    }

    pub fn final_accuracy(&self) -> f64 {
        self.accuracy.last().map_or(0.0, |r| r.1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub text: String,
    pub csv: String,
    pub final_mean: f64,
    /// Sample standard deviation of the final accuracies.
    pub final_std: f64,
    /// Largest per-round spread (max − min) across runs.
    pub max_spread: f64,
}

/// Per-round accuracy table across runs plus a `mean ± std` summary of the
/// final-round accuracy, in percent.
pub fn compare_runs(runs: &[RunMetrics]) -> Result<Comparison> {
    if runs.len() < 2 {
        return Err(Error::Usage("compare needs at least two metrics files".into()));
    }
    let mut rounds: Vec<usize> = runs.iter().flat_map(|r| r.accuracy.iter().map(|a| a.0)).collect();
    rounds.sort_unstable();
    rounds.dedup();

    let width = runs.iter().map(|r| r.label.len()).max().unwrap_or(0).max(8);
    let mut text = String::new();
    write!(text, "{:>5}", "round").unwrap();
    for r in runs {
        write!(text, "  {:>width$}", r.label).unwrap();
    }
    writeln!(text, "  {:>8}", "spread").unwrap();

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["round".to_string()];
    header.extend(runs.iter().map(|r| r.label.clone()));
    header.push("spread".into());
    w.write_record(&header).expect("in-memory write");

    let mut max_spread: f64 = 0.0;
    for &round in &rounds {
        let vals: Vec<Option<f64>> = runs
            .iter()
            .map(|r| r.accuracy.iter().find(|a| a.0 == round).map(|a| a.1))
            .collect();
        let present: Vec<f64> = vals.iter().flatten().copied().collect();
        let spread = present.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - present.iter().copied().fold(f64::INFINITY, f64::min);
        max_spread = max_spread.max(spread);
        write!(text, "{round:>5}").unwrap();
        let mut row = vec![round.to_string()];
        for v in &vals {
            match v {
                Some(a) => {
                    write!(text, "  {a:>width$.4}").unwrap();
                    row.push(format!("{a:.6}"));
                }
                None => {
                    write!(text, "  {:>width$}", "-").unwrap();
                    row.push(String::new());
                }
            }
        }
        writeln!(text, "  {spread:>8.4}").unwrap();
        row.push(format!("{spread:.6}"));
        w.write_record(&row).expect("in-memory write");
    }

    let finals: Vec<f64> = runs.iter().map(|r| 100.0 * r.final_accuracy()).collect();
    let n = finals.len() as f64;
    let mean = finals.iter().sum::<f64>() / n;
    let std = (finals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    writeln!(text, "final test accuracy (%): {mean:.2} ± {std:.2} over {} runs", runs.len()).unwrap();

    Ok(Comparison {
        text,
        csv: String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8"),
        final_mean: mean,
        final_std: std,
        max_spread,
    })
}
