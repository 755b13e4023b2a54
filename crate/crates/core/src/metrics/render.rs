use std::fmt::Write;

use super::{format_percent, ClassMetrics, EvaluationReport, Metric};
use crate::schema::{FineClass, Granularity};

fn cell(m: &ClassMetrics, metric: Metric) -> String {
    let v = match metric {
        Metric::Precision => m.precision,
        Metric::Recall => m.recall,
        Metric::F1 => m.f1,
    };
    let mark = if m.is_defined(metric) { " " } else { "*" };
    format!("{}{mark}", format_percent(v))
}

/// Plain-text table laid out like the published per-class results: one row
/// per class in taxonomy order with separators between coarse groups, then
/// the micro average and macro F1.
pub fn render_table(report: &EvaluationReport) -> String {
    let mut out = String::new();
    let baseline = report.baseline.as_ref();
    let width = report.rows().iter().map(|m| m.name.len()).max().unwrap_or(5).max(12);

    let mut header = format!("{:<width$} | {:>9} {:>9} {:>9} {:>8}", "Class", "Precision", "Recall", "F1", "Support");
    if let Some(b) = baseline {
        let _ = write!(header, " | {:>9} {:>9} {:>9} {:>8}", "P", "R", "F1", "dF1");
        let _ = writeln!(out, "baseline column: {}", b.column);
    }
    let rule = "-".repeat(header.len());
    let _ = writeln!(out, "{header}");
    let _ = writeln!(out, "{rule}");

    let mut last_group = None;
    for m in report.rows() {
        if report.granularity == Granularity::Fine {
            let group = FineClass::from_code(&m.class).map(|c| c.coarse());
            if last_group.is_some() && group != last_group {
                let _ = writeln!(out, "{rule}");
            }
            last_group = group;
        }
        let _ = write!(
            out,
            "{:<width$} | {:>9} {:>9} {:>9} {:>8}",
            m.name,
            cell(m, Metric::Precision),
            cell(m, Metric::Recall),
            cell(m, Metric::F1),
            m.support
        );
        if let Some(d) = baseline.and_then(|b| b.deltas.get(&m.class)) {
            let flag = if d.flagged { " !" } else { "" };
            let _ = write!(
                out,
                " | {:>9} {:>9} {:>9} {:>+8.2}{flag}",
                format!("{:.2}", d.baseline_precision),
                format!("{:.2}", d.baseline_recall),
                format!("{:.2}", d.baseline_f1),
                d.f1_delta
            );
        }
        out.push('\n');
    }
    let _ = writeln!(out, "{rule}");
    let m = &report.micro;
    let _ = writeln!(
        out,
        "{:<width$} | {:>9} {:>9} {:>9} {:>8}",
        "Micro avg",
        cell(m, Metric::Precision),
        cell(m, Metric::Recall),
        cell(m, Metric::F1),
        m.support
    );
    let _ = writeln!(
        out,
        "{:<width$} | {:>9} {:>9} {:>9}",
        "Macro F1",
        "",
        "",
        format!("{} ", format_percent(report.macro_f1))
    );
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "granularity: {}  policy: {}  aggregation: {}  folds: {}  macro over {} classes with support",
        report.granularity, report.policy, report.aggregation, report.folds, report.macro_classes
    );
    let _ = writeln!(out, "* undefined (zero denominator), shown as 0.00");
    if baseline.is_some() {
        let _ = writeln!(out, "! the published table marks the baseline column as the better F1");
    }
    out
}
