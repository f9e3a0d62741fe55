//! Metric aggregation and the report record.

use crate::{Error, Result};

/// Per-sample classification scores reduced to the metric bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyOutcome {
    /// Plain top-1 accuracy.
    pub top1: f64,
    /// Plain top-5 accuracy (top-min(5, classes)).
    pub top5: f64,
    /// Unweighted mean of per-class top-1 hit rates over classes that have
    /// at least one sample.
    pub mean_per_class: f64,
    /// Predicted class per sample.
    pub predictions: Vec<usize>,
}

/// Rank classes for one sample: indices sorted by score descending, ties by
/// lowest class index.
pub fn rank_classes(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        scores[b].partial_cmp(&scores[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    idx
}

/// Reduce per-sample class scores against ground-truth labels.
pub fn aggregate_metrics(scores: &[Vec<f64>], labels: &[usize], n_classes: usize) -> Result<ClassifyOutcome> {
    if scores.len() != labels.len() || scores.is_empty() {
        return Err(Error::Input("scores and labels must be non-empty and aligned".into()));
    }
    let k = 5usize.min(n_classes);
    let mut top1_hits = 0usize;
    let mut top5_hits = 0usize;
    let mut per_class_total = vec![0usize; n_classes];
    let mut per_class_hit = vec![0usize; n_classes];
    let mut predictions = Vec::with_capacity(scores.len());

    for (row, &label) in scores.iter().zip(labels.iter()) {
        if row.len() != n_classes || label >= n_classes {
            return Err(Error::Input("score row or label outside the class set".into()));
        }
        let ranked = rank_classes(row);
        let pred = ranked[0];
        predictions.push(pred);
        per_class_total[label] += 1;
        if pred == label {
            top1_hits += 1;
            per_class_hit[label] += 1;
        }
        if ranked[..k].contains(&label) {
            top5_hits += 1;
        }
    }

    let mut class_accs = Vec::new();
    for c in 0..n_classes {
        if per_class_total[c] == 0 {
            log::warn!("class {c} has no samples; excluded from the per-class mean");
            continue;
        }
        class_accs.push(per_class_hit[c] as f64 / per_class_total[c] as f64);
    }
    if class_accs.is_empty() {
        return Err(Error::Input("no class has samples".into()));
    }

    Ok(ClassifyOutcome {
        top1: top1_hits as f64 / scores.len() as f64,
        top5: top5_hits as f64 / scores.len() as f64,
        mean_per_class: class_accs.iter().sum::<f64>() / class_accs.len() as f64,
        predictions,
    })
}

/// One named row of metrics, e.g. a baseline or an alpha level.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub name: String,
    pub metrics: Vec<(String, f64)>,
}

/// Metric bundle with full provenance; reproducible from (config, seed,
/// checkpoint).
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub title: String,
    pub config_hash: String,
    pub seed: u64,
    pub rows: Vec<ReportRow>,
}

impl EvalReport {
    pub fn validate(&self) -> Result<()> {
        for row in &self.rows {
            for (key, v) in &row.metrics {
                if key.contains("acc") && !(0.0..=1.0).contains(v) {
                    return Err(Error::Input(format!(
                        "metric {key} of row {} outside [0,1]: {v}",
                        row.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Machine-readable key-value record, one line per metric.
    pub fn render_kv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("report = {}\n", self.title));
        out.push_str(&format!("config_hash = {}\n", self.config_hash));
        out.push_str(&format!("seed = {}\n", self.seed));
        for row in &self.rows {
            for (key, v) in &row.metrics {
                out.push_str(&format!("{}.{} = {}\n", row.name, key, v));
            }
        }
        out
    }

    /// Aligned human-readable table.
    pub fn render_table(&self) -> String {
        let mut columns: Vec<String> = Vec::new();
        for row in &self.rows {
            for (key, _) in &row.metrics {
                if !columns.contains(key) {
                    columns.push(key.clone());
                }
            }
        }
        let name_w = self
            .rows
            .iter()
            .map(|r| r.name.len())
            .chain(std::iter::once("row".len()))
            .max()
            .unwrap_or(3);
        let col_w = 12usize;
        let mut out = String::new();
        out.push_str(&format!("{} (config {} seed {})\n", self.title, self.config_hash, self.seed));
        out.push_str(&format!("{:<name_w$}", "row"));
        for c in &columns {
            out.push_str(&format!(" {c:>col_w$}"));
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!("{:<name_w$}", row.name));
            for c in &columns {
                match row.metrics.iter().find(|(k, _)| k == c) {
                    Some((_, v)) => out.push_str(&format!(" {:>col_w$.4}", v)),
                    None => out.push_str(&format!(" {:>col_w$}", "-")),
                }
            }
            out.push('\n');
        }
        out
    }
}
