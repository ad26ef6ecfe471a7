use std::fmt::Write as _;

use thiserror::Error;

use crate::metrics::Accuracy;

/// One condition of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub condition: String,
    pub accuracy: f64,
    pub stable_accuracy: Option<f64>,
    pub unstable_accuracy: Option<f64>,
    pub mean_p_fall: f64,
    pub mean_graded: f64,
    pub n: usize,
}

impl ResultRow {
    pub fn new(condition: impl Into<String>, acc: &Accuracy, mean_p_fall: f64, mean_graded: f64) -> Self {
        Self {
            condition: condition.into(),
            accuracy: acc.overall,
            stable_accuracy: acc.stable,
            unstable_accuracy: acc.unstable,
            mean_p_fall,
            mean_graded,
            n: acc.n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("bad result table line {line}: {reason}")]
pub struct TableParseError {
    pub line: usize,
    pub reason: String,
}

const HEADER: &str = "condition\taccuracy\tstable_accuracy\tunstable_accuracy\tmean_p_fall\tmean_graded\tn";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

impl ResultTable {
    pub fn row(&self, condition: &str) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.condition == condition)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!("{HEADER}\n");
        for r in &self.rows {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.condition,
                r.accuracy,
                opt(r.stable_accuracy),
                opt(r.unstable_accuracy),
                r.mean_p_fall,
                r.mean_graded,
                r.n
            )
            .expect("writing to a String cannot fail");
        }
        out
    }

    pub fn parse_tsv(text: &str) -> Result<Self, TableParseError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h == HEADER => {}
            _ => return Err(TableParseError { line: 1, reason: "missing header".into() }),
        }
        let mut rows = Vec::new();
        for (idx, line) in lines {
            let err = |reason: &str| TableParseError { line: idx + 1, reason: reason.into() };
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 7 {
                return Err(err("expected 7 fields"));
            }
            let num = |s: &str| s.parse::<f64>().ok().filter(|v| v.is_finite());
            let unit = |s: &str| num(s).filter(|v| (0.0..=1.0).contains(v));
            let opt_unit = |s: &str| if s == "NA" { Some(None) } else { unit(s).map(Some) };
            rows.push(ResultRow {
                condition: f[0].to_string(),
                accuracy: unit(f[1]).ok_or_else(|| err("bad accuracy"))?,
                stable_accuracy: opt_unit(f[2]).ok_or_else(|| err("bad stable_accuracy"))?,
                unstable_accuracy: opt_unit(f[3]).ok_or_else(|| err("bad unstable_accuracy"))?,
                mean_p_fall: unit(f[4]).ok_or_else(|| err("bad mean_p_fall"))?,
                mean_graded: unit(f[5]).ok_or_else(|| err("bad mean_graded"))?,
                n: f[6].parse().map_err(|_| err("bad n"))?,
            });
        }
        Ok(Self { rows })
    }
}
