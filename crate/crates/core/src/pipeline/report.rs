use std::fmt::Write as _;

use crate::tasks::MetricRow;

use super::PipelineError;

/// Means, lower medians and outlier percentage of a set of metric rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub means: Vec<f64>,
    pub medians: Vec<f64>,
    /// `None` when the task defines no outlier criterion.
    pub outlier_pct: Option<f64>,
}

/// Element `⌊(n − 1)/2⌋` of the sorted values: the lower of the two middle
/// values for even counts.
pub fn lower_median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(v[(v.len() - 1) / 2])
}

pub fn aggregate(rows: &[MetricRow]) -> Result<Summary, PipelineError> {
    let first = rows.first().ok_or_else(|| PipelineError::Report("no metric rows to aggregate".into()))?;
    let k = first.values.len();
    if rows.iter().any(|r| r.values.len() != k) {
        return Err(PipelineError::Report("metric rows differ in length".into()));
    }
    let n = rows.len() as f64;
    let mut means = Vec::with_capacity(k);
    let mut medians = Vec::with_capacity(k);
    for m in 0..k {
        let col: Vec<f64> = rows.iter().map(|r| r.values[m]).collect();
        means.push(col.iter().sum::<f64>() / n);
        medians.push(lower_median(&col).expect("nonempty"));
    }
    let flags: Option<Vec<bool>> = rows.iter().map(|r| r.outlier).collect();
    let outlier_pct = flags.map(|f| 100.0 * f.iter().filter(|&&o| o).count() as f64 / n);
    Ok(Summary {
        count: rows.len(),
        means,
        medians,
        outlier_pct,
    })
}

/// Shortest round-trip representation cut to six significant digits.
/// Magnitudes outside `[1e-5, 1e16)` are written with an exponent.
pub fn fmt6(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let (sign, digits) = mantissa.strip_prefix('-').map_or(("", mantissa), |m| ("-", m));
    let mut kept = String::new();
    let mut sig = 0;
    for c in digits.chars() {
        if c == '.' {
            kept.push(c);
        } else if sig < 6 {
            kept.push(c);
            sig += 1;
        }
    }
    let cut: f64 = format!("{sign}{kept}e{exp}").parse().expect("valid float");
    let e: i32 = exp.parse().expect("integer exponent");
    if (-5..16).contains(&e) {
        format!("{cut}")
    } else {
        format!("{cut:e}")
    }
}

/// One method's line in a benchmark report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub method: String,
    pub steps: f64,
    pub time_ms: f64,
    pub summary: Summary,
    pub forward_ms: f64,
    pub update_ms: f64,
    /// Total count of data-energy increases along solver trajectories.
    pub monotonicity_violations: usize,
    /// Median primary metric after each stage, starting at the initial
    /// estimate. Empty for methods without stages.
    pub stage_medians: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub metric_names: Vec<String>,
    /// Name of the metric the per-stage curve tracks.
    pub curve_metric: String,
    pub rows: Vec<ReportRow>,
}

impl BenchReport {
    pub fn header(&self) -> String {
        let mut cols = vec!["method".to_string(), "steps".into(), "time_ms".into()];
        for m in &self.metric_names {
            cols.push(format!("{m}_mean"));
            cols.push(format!("{m}_median"));
        }
        cols.extend(["outlier_pct", "forward_ms", "update_ms", "monotonicity_violations"].map(String::from));
        let stages = self.rows.iter().map(|r| r.stage_medians.len()).max().unwrap_or(0);
        for t in 0..stages {
            cols.push(format!("stage{t}_{}_median", self.curve_metric));
        }
        cols.join(",")
    }

    /// Header plus one line per row, in row order.
    pub fn to_csv(&self) -> String {
        let stages = self.rows.iter().map(|r| r.stage_medians.len()).max().unwrap_or(0);
        let mut s = self.header();
        s.push('\n');
        for r in &self.rows {
            let mut cells = vec![r.method.clone(), fmt6(r.steps), fmt6(r.time_ms)];
            for (mean, median) in r.summary.means.iter().zip(&r.summary.medians) {
                cells.push(fmt6(*mean));
                cells.push(fmt6(*median));
            }
            cells.push(r.summary.outlier_pct.map_or(String::new(), fmt6));
            cells.push(fmt6(r.forward_ms));
            cells.push(fmt6(r.update_ms));
            cells.push(r.monotonicity_violations.to_string());
            for t in 0..stages {
                cells.push(r.stage_medians.get(t).map_or(String::new(), |v| fmt6(*v)));
            }
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }
}
