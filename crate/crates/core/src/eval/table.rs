//! Results tables in the layout `AM | Features | Train. Data | metric`.
//!
//! Rows are grouped into panels by training data, in order of first
//! appearance. Within each panel the best metric value is marked with `*`;
//! every row tied with the best is marked.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub arch: String,
    pub features: String,
    pub train_set: String,
    pub value: f64,
}

impl ResultRow {
    pub fn new(arch: &str, features: &str, train_set: &str, value: f64) -> Self {
        Self {
            arch: arch.into(),
            features: features.into(),
            train_set: train_set.into(),
            value,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    pub name: String,
    pub lower_is_better: bool,
}

impl Metric {
    pub fn wer() -> Self {
        Self {
            name: "WER (%)".into(),
            lower_is_better: true,
        }
    }

    pub fn accuracy() -> Self {
        Self {
            name: "Frame acc. (%)".into(),
            lower_is_better: false,
        }
    }
}

/// Panels of row indices, grouped by training data.
pub fn panels(rows: &[ResultRow]) -> Vec<Vec<usize>> {
    let mut order: Vec<&str> = Vec::new();
    let mut out: Vec<Vec<usize>> = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        match order.iter().position(|t| *t == r.train_set) {
            Some(p) => out[p].push(i),
            None => {
                order.push(&r.train_set);
                out.push(vec![i]);
            }
        }
    }
    out
}

/// Whether each row is the best of its panel.
pub fn best_marks(rows: &[ResultRow], metric: &Metric) -> Vec<bool> {
    let mut marks = vec![false; rows.len()];
    for panel in panels(rows) {
        let values = panel.iter().map(|&i| rows[i].value);
        let best = if metric.lower_is_better {
            values.fold(f64::INFINITY, f64::min)
        } else {
            values.fold(f64::NEG_INFINITY, f64::max)
        };
        for i in panel {
            marks[i] = rows[i].value == best;
        }
    }
    marks
}

pub fn results_table(rows: &[ResultRow], metric: &Metric) -> String {
    let marks = best_marks(rows, metric);
    let cells: Vec<[String; 4]> = rows
        .iter()
        .zip(&marks)
        .map(|(r, &best)| {
            let v = format!("{:.1}{}", r.value, if best { "*" } else { "" });
            [r.arch.clone(), r.features.clone(), r.train_set.clone(), v]
        })
        .collect();
    let header = ["AM", "Features", "Train. Data", metric.name.as_str()];
    let mut width = header.map(str::len);
    for row in &cells {
        for (w, c) in width.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cols: [&str; 4]| {
        let mut s = String::from("|");
        for (c, w) in cols.iter().zip(width) {
            write!(s, " {c:<w$} |").unwrap();
        }
        s.push('\n');
        s
    };
    let rule = {
        let mut s = String::from("|");
        for w in width {
            s.push_str(&"-".repeat(w + 2));
            s.push('|');
        }
        s.push('\n');
        s
    };
    let mut out = line(header);
    out.push_str(&rule);
    for (p, panel) in panels(rows).iter().enumerate() {
        if p > 0 {
            out.push_str(&rule);
        }
        for &i in panel {
            let c = &cells[i];
            out.push_str(&line([&c[0], &c[1], &c[2], &c[3]]));
        }
    }
    out
}
