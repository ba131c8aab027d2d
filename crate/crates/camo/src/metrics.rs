//! Confusion-matrix accounting over majority results and the five derived
//! metrics (accuracy, precision, recall, specificity, F1), plus report
//! rendering as markdown or CSV.

use serde::{Deserialize, Serialize};

use crate::bench::{FinalLabel, MajorityResult};
use crate::dataset::{Label, Manifest};

/// Binary confusion counts. Vulnerable is the positive class; a model
/// verdict of Insecure is a positive prediction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> ConfusionMatrix {
        ConfusionMatrix { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// The five Table-style metrics. `None` renders as "n/a": an undefined ratio
/// (0/0) is reported as such, never as zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub specificity: Option<f64>,
    pub f1: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    if den == 0 {
        None
    } else {
        Some(num as f64 / den as f64)
    }
}

/// Derives all five metrics from a confusion matrix.
pub fn compute(cm: &ConfusionMatrix) -> MetricsRow {
    let accuracy = ratio(cm.tp + cm.tn, cm.total());
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    let recall = ratio(cm.tp, cm.tp + cm.fn_);
    let specificity = ratio(cm.tn, cm.tn + cm.fp);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    MetricsRow {
        accuracy,
        precision,
        recall,
        specificity,
        f1,
    }
}

/// Outcome of folding majority results into a confusion matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tally {
    pub matrix: ConfusionMatrix,
    /// Majorities excluded for lack of a strict majority.
    pub inconclusive: u64,
    pub warnings: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("majority result references unknown sample '{0}'")]
    UnknownSample(String),
    #[error("report has no rows")]
    EmptyReport,
}

/// Counts each non-inconclusive majority against the sample's ground truth:
/// Insecure on Vulnerable is a true positive, Secure on Safe a true
/// negative, and so on. Inconclusive results are excluded and surfaced as
/// warnings.
pub fn tally(majorities: &[MajorityResult], manifest: &Manifest) -> Result<Tally, MetricsError> {
    let mut matrix = ConfusionMatrix::default();
    let mut inconclusive = 0;
    let mut warnings = Vec::new();
    for m in majorities {
        let sample = manifest
            .sample(&m.sample_id)
            .ok_or_else(|| MetricsError::UnknownSample(m.sample_id.clone()))?;
        match (m.final_label, sample.label) {
            (FinalLabel::Inconclusive, _) => {
                inconclusive += 1;
                warnings.push(format!(
                    "sample '{}' ({}) excluded: no strict majority ({}-{} with {} invalid)",
                    m.sample_id, m.kind, m.votes.secure, m.votes.insecure, m.votes.invalid
                ));
            }
            (FinalLabel::Insecure, Label::Vulnerable) => matrix.tp += 1,
            (FinalLabel::Insecure, Label::Safe) => matrix.fp += 1,
            (FinalLabel::Secure, Label::Vulnerable) => matrix.fn_ += 1,
            (FinalLabel::Secure, Label::Safe) => matrix.tn += 1,
        }
    }
    Ok(Tally {
        matrix,
        inconclusive,
        warnings,
    })
}

// ---- report emission ---------------------------------------------------------

/// One report line: a model/phase pair and its metrics.
#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    pub model: String,
    /// "Before" or "After".
    pub obfuscation: String,
    #[serde(flatten)]
    pub metrics: MetricsRow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
}

const COLUMNS: [&str; 7] = [
    "Model",
    "Obfuscation",
    "Accuracy",
    "Precision",
    "Recall (TPR)",
    "Specificity (TNR)",
    "F1-Score",
];

/// Renders a value at three decimals (ties to even, matching `{:.3}`), or
/// "n/a" for undefined ratios.
pub fn render_metric(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.3}"),
        None => "n/a".to_string(),
    }
}

/// Renders rows as a markdown or CSV table in the fixed column order.
pub fn emit_report(rows: &[ReportRow], format: ReportFormat) -> Result<String, MetricsError> {
    if rows.is_empty() {
        return Err(MetricsError::EmptyReport);
    }
    let mut out = String::new();
    match format {
        ReportFormat::Markdown => {
            out.push_str(&format!("| {} |\n", COLUMNS.join(" | ")));
            out.push_str(&format!("|{}\n", " --- |".repeat(COLUMNS.len())));
            for r in rows {
                out.push_str(&format!(
                    "| {} | {} | {} | {} | {} | {} | {} |\n",
                    r.model,
                    r.obfuscation,
                    render_metric(r.metrics.accuracy),
                    render_metric(r.metrics.precision),
                    render_metric(r.metrics.recall),
                    render_metric(r.metrics.specificity),
                    render_metric(r.metrics.f1),
                ));
            }
        }
        ReportFormat::Csv => {
            out.push_str(&COLUMNS.map(csv_field).join(","));
            out.push('\n');
            for r in rows {
                let fields = [
                    csv_field(&r.model),
                    csv_field(&r.obfuscation),
                    render_metric(r.metrics.accuracy),
                    render_metric(r.metrics.precision),
                    render_metric(r.metrics.recall),
                    render_metric(r.metrics.specificity),
                    render_metric(r.metrics.f1),
                ];
                out.push_str(&fields.join(","));
                out.push('\n');
            }
        }
    }
    Ok(out)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: Option<f64>, b: f64) {
        let a = a.expect("defined");
        assert!((a - b).abs() < 5e-4, "{a} !~ {b}");
    }

    #[test]
    fn chatgpt_before_row() {
        // Counts solved from published rates at 20/20.
        let m = compute(&ConfusionMatrix::new(17, 5, 3, 15));
        approx(m.accuracy, 0.800);
        approx(m.precision, 0.773);
        approx(m.recall, 0.850);
        approx(m.specificity, 0.750);
        approx(m.f1, 0.810);
    }

    #[test]
    fn claude_after_row() {
        let m = compute(&ConfusionMatrix::new(18, 14, 2, 6));
        approx(m.recall, 0.900);
        approx(m.specificity, 0.300);
        approx(m.f1, 0.692);
        // Exact precision is 0.5625; display rounding is the caller's affair.
        approx(m.precision, 0.5625);
    }

    #[test]
    fn zero_matrix_is_all_undefined() {
        let m = compute(&ConfusionMatrix::default());
        assert_eq!(m.accuracy, None);
        assert_eq!(m.precision, None);
        assert_eq!(m.recall, None);
        assert_eq!(m.specificity, None);
        assert_eq!(m.f1, None);
    }

    #[test]
    fn f1_undefined_when_both_factors_zero() {
        // tp = 0 with predictions on both sides: precision = 0, recall = 0.
        let m = compute(&ConfusionMatrix::new(0, 3, 4, 5));
        assert_eq!(m.precision, Some(0.0));
        assert_eq!(m.recall, Some(0.0));
        assert_eq!(m.f1, None);
    }

    #[test]
    fn rounding_is_half_to_even_at_3_decimals() {
        assert_eq!(render_metric(Some(0.0625)), "0.062");
        assert_eq!(render_metric(Some(0.5625)), "0.562");
        assert_eq!(render_metric(None), "n/a");
    }

    #[test]
    fn markdown_report_shape() {
        let rows = vec![ReportRow {
            model: "stub:keyword".into(),
            obfuscation: "Before".into(),
            metrics: compute(&ConfusionMatrix::new(20, 0, 0, 20)),
        }];
        let md = emit_report(&rows, ReportFormat::Markdown).unwrap();
        let lines: Vec<&str> = md.lines().collect();
        assert_eq!(lines.len(), 3); // header, separator, one row
        assert_eq!(lines[0].matches('|').count(), 8); // 7 columns
        assert!(lines[2].contains("| 1.000 |"));
        assert!(matches!(
            emit_report(&[], ReportFormat::Markdown),
            Err(MetricsError::EmptyReport)
        ));
    }

    #[test]
    fn csv_quotes_awkward_fields() {
        let rows = vec![ReportRow {
            model: "model, with comma".into(),
            obfuscation: "After".into(),
            metrics: compute(&ConfusionMatrix::new(1, 1, 1, 1)),
        }];
        let csv = emit_report(&rows, ReportFormat::Csv).unwrap();
        assert!(csv.contains("\"model, with comma\""));
        assert!(csv.starts_with("Model,Obfuscation,Accuracy,Precision,Recall (TPR),Specificity (TNR),F1-Score\n"));
    }
}
