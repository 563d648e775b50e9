//! ROC analysis and method comparison.

mod svg;

use std::fmt::Write as _;

use crate::error::{Error, Result};

pub use svg::render_svg;

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSet {
    pub method: String,
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
}

impl ScoredSet {
    pub fn new(method: impl Into<String>, scores: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::Data(format!(
                "{} scores for {} labels",
                scores.len(),
                labels.len()
            )));
        }
        if let Some(l) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::Data(format!("label {l} is not 0 or 1")));
        }
        if scores.iter().any(|s| s.is_nan() || *s == f64::INFINITY) {
            return Err(Error::Data("scores must be finite or negative infinity".into()));
        }
        Ok(Self {
            method: method.into(),
            scores,
            labels,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// Descending thresholds; the first point is `(+inf, 0, 0)`, the last
    /// reaches `(1, 1)` at the lowest score.
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

pub const ROC_HEADER: &str = "threshold,fpr,tpr";

impl RocCurve {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{ROC_HEADER}\n");
        for p in &self.points {
            let _ = writeln!(s, "{},{},{}", p.threshold, p.fpr, p.tpr);
        }
        s
    }
}

/// ROC curve with one point per distinct score (an item is predicted
/// positive when its score is at least the threshold).
pub fn roc(set: &ScoredSet) -> Result<RocCurve> {
    let pos = set.labels.iter().filter(|&&l| l == 1).count();
    let neg = set.labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Data(format!(
            "ROC of `{}` needs both labels, got {pos} positives and {neg} negatives",
            set.method
        )));
    }
    let mut order: Vec<usize> = (0..set.scores.len()).collect();
    order.sort_by(|&a, &b| set.scores[b].total_cmp(&set.scores[a]));
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let threshold = set.scores[order[i]];
        while i < order.len() && set.scores[order[i]] == threshold {
            if set.labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let p = RocPoint {
            threshold,
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        };
        let last = points.last().unwrap();
        auc += (p.fpr - last.fpr) * (p.tpr + last.tpr) / 2.0;
        points.push(p);
    }
    Ok(RocCurve { points, auc })
}

/// TPR of the last point whose FPR does not exceed `target`.
pub fn tpr_at_fpr(curve: &RocCurve, target: f64) -> f64 {
    curve
        .points
        .iter()
        .take_while(|p| p.fpr <= target)
        .last()
        .map_or(0.0, |p| p.tpr)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub method: String,
    pub auc: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub fpr_target: f64,
    pub rows: Vec<ReportRow>,
    pub curves: Vec<RocCurve>,
}

impl Report {
    pub fn row(&self, method: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    fn tpr_column(&self) -> String {
        format!("tpr_at_{:03}", (self.fpr_target * 100.0).round() as u32)
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("method,auc,{}\n", self.tpr_column());
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{}", r.method, r.auc, r.tpr);
        }
        s
    }

    pub fn to_table(&self) -> String {
        let width = self.rows.iter().map(|r| r.method.len()).max().unwrap_or(6).max(6);
        let label = format!("TPR@FPR={}", self.fpr_target);
        let mut s = format!("{:<width$}  {:>8}  {:>12}\n", "method", "AUC", label);
        for r in &self.rows {
            let _ = writeln!(s, "{:<width$}  {:>8.4}  {:>11.2}%", r.method, r.auc, 100.0 * r.tpr);
        }
        let _ = writeln!(s, "ordering at FPR {}: {}", self.fpr_target, self.ordering());
        s
    }

    /// Methods by ascending TPR at the target FPR, e.g. `a < b = c`.
    pub fn ordering(&self) -> String {
        let mut rows: Vec<&ReportRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| a.tpr.total_cmp(&b.tpr));
        let mut s = String::new();
        for (i, r) in rows.iter().enumerate() {
            if i > 0 {
                s.push_str(if r.tpr == rows[i - 1].tpr { " = " } else { " < " });
            }
            s.push_str(&r.method);
        }
        s
    }
}

/// ROC, AUC and TPR at `fpr_target` for methods scored on one test set.
pub fn compare(methods: &[ScoredSet], fpr_target: f64) -> Result<Report> {
    if methods.len() < 2 {
        return Err(Error::Data("comparison needs at least two methods".into()));
    }
    if !(0.0..=1.0).contains(&fpr_target) {
        return Err(Error::Config(format!("fpr_target {fpr_target} outside [0, 1]")));
    }
    let first = &methods[0];
    for m in &methods[1..] {
        if m.labels.len() != first.labels.len() {
            return Err(Error::Data(format!(
                "`{}` has {} samples, `{}` has {}",
                m.method,
                m.labels.len(),
                first.method,
                first.labels.len()
            )));
        }
        if m.labels != first.labels {
            return Err(Error::Data(format!(
                "`{}` and `{}` were scored on different label sequences",
                m.method, first.method
            )));
        }
    }
    let curves = methods.iter().map(roc).collect::<Result<Vec<_>>>()?;
    let rows = methods
        .iter()
        .zip(&curves)
        .map(|(m, c)| ReportRow {
            method: m.method.clone(),
            auc: c.auc,
            tpr: tpr_at_fpr(c, fpr_target),
        })
        .collect();
    Ok(Report {
        fpr_target,
        rows,
        curves,
    })
}
