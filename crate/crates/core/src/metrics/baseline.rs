//! Published per-class results of the fine-tuned German BERT model and the
//! BiLSTM-CRF+ baseline, stored exactly as printed (two values carry only
//! one decimal in print and are kept that way).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{hundredths, EvaluationReport, MetricsError};
use crate::schema::{FineClass, Granularity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineColumn {
    /// The fine-tuned German BERT results.
    #[serde(rename = "ourmodel")]
    OurModel,
    /// BiLSTM-CRF+.
    Bilstm,
}

impl fmt::Display for BaselineColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaselineColumn::OurModel => "ourmodel",
            BaselineColumn::Bilstm => "bilstm",
        })
    }
}

impl FromStr for BaselineColumn {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ourmodel" => Ok(BaselineColumn::OurModel),
            "bilstm" => Ok(BaselineColumn::Bilstm),
            other => Err(format!("unknown baseline column `{other}` (expected ourmodel|bilstm)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BaselineRow {
    pub class: FineClass,
    /// Precision, recall, F1 as printed.
    pub our_model: [&'static str; 3],
    pub bilstm: [&'static str; 3],
    /// Column whose F1 is set in bold.
    pub bold: BaselineColumn,
}

impl BaselineRow {
    pub fn column(&self, which: BaselineColumn) -> [&'static str; 3] {
        match which {
            BaselineColumn::OurModel => self.our_model,
            BaselineColumn::Bilstm => self.bilstm,
        }
    }

    pub fn values(&self, which: BaselineColumn) -> [f64; 3] {
        self.column(which).map(|v| v.parse().expect("baseline values are numeric"))
    }

    /// Printed F1 in hundredths, e.g. 9842 for "98.42".
    pub fn f1_hundredths(&self, which: BaselineColumn) -> i64 {
        parse_hundredths(self.column(which)[2])
    }
}

fn parse_hundredths(printed: &str) -> i64 {
    let (int, frac) = printed.split_once('.').unwrap_or((printed, ""));
    let frac = format!("{frac:0<2}");
    int.parse::<i64>().expect("integer part") * 100 + frac[..2].parse::<i64>().expect("fraction")
}

use BaselineColumn::{Bilstm, OurModel};

macro_rules! row {
    ($class:ident, [$($o:literal),+], [$($b:literal),+], $bold:ident) => {
        BaselineRow { class: FineClass::$class, our_model: [$($o),+], bilstm: [$($b),+], bold: $bold }
    };
}

pub const BASELINE_TABLE: [BaselineRow; 19] = [
    row!(Person, ["91.48", "91.09", "91.29"], ["90.78", "92.24", "91.45"], Bilstm),
    row!(Judge, ["98.72", "99.53", "99.12"], ["98.37", "99.21", "98.78"], OurModel),
    row!(Lawyer, ["96.49", "85.94", "90.91"], ["86.18", "90.59", "87.07"], OurModel),
    row!(Country, ["92.51", "94.2", "93.34"], ["96.52", "96.81", "96.66"], Bilstm),
    row!(City, ["88.21", "89.92", "89.06"], ["82.58", "89.06", "85.60"], OurModel),
    row!(Street, ["85.57", "81.37", "83.42"], ["81.82", "75.78", "77.91"], OurModel),
    row!(Landscape, ["68.49", "68.49", "68.49"], ["78.50", "80.20", "78.25"], Bilstm),
    row!(Organization, ["89.11", "92.22", "90.64"], ["82.70", "80.18", "81.28"], OurModel),
    row!(Company, ["97.16", "97.37", "97.27"], ["90.05", "88.11", "89.04"], OurModel),
    row!(Institution, ["94.05", "94.05", "94.05"], ["89.99", "92.40", "91.17"], OurModel),
    row!(Court, ["97.3", "98.02", "97.66"], ["97.72", "98.24", "97.98"], Bilstm),
    row!(Brand, ["81.86", "54.57", "65.49"], ["83.04", "76.25", "79.17"], Bilstm),
    row!(Law, ["99.36", "99.23", "99.29"], ["98.34", "98.51", "98.42"], OurModel),
    row!(Ordinance, ["94.46", "96.72", "95.58"], ["92.29", "92.96", "92.58"], OurModel),
    row!(EuropeanNorm, ["95.36", "98.13", "96.73"], ["92.16", "92.63", "92.37"], OurModel),
    row!(Regulation, ["89.94", "87.99", "88.95"], ["85.14", "78.87", "81.63"], OurModel),
    row!(Contract, ["96.52", "95.08", "95.79"], ["92.00", "92.64", "92.31"], OurModel),
    row!(CourtDecision, ["99.25", "99.52", "99.39"], ["96.70", "96.73", "96.71"], OurModel),
    row!(LegalLiterature, ["96.91", "95.57", "96.24"], ["94.34", "93.94", "94.14"], OurModel),
];

pub fn baseline_row(class: FineClass) -> &'static BaselineRow {
    BASELINE_TABLE.iter().find(|r| r.class == class).expect("every fine class has a row")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDelta {
    pub baseline_precision: f64,
    pub baseline_recall: f64,
    pub baseline_f1: f64,
    /// Report F1 (rounded half-up to hundredths) minus the printed F1.
    pub f1_delta: f64,
    /// The printed bold marker is on the compared column.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineComparison {
    pub column: BaselineColumn,
    /// Only classes with at least one gold or predicted entity.
    pub deltas: BTreeMap<String, ClassDelta>,
}

/// Annotates a fine-grained report with F1 deltas against a published column.
pub fn compare_to_baseline(report: &EvaluationReport, which: BaselineColumn) -> Result<EvaluationReport, MetricsError> {
    if report.granularity != Granularity::Fine {
        return Err(MetricsError::GranularityMismatch { expected: Granularity::Fine, found: report.granularity });
    }
    let mut deltas = BTreeMap::new();
    for row in &BASELINE_TABLE {
        let Some(m) = report.per_class.get(row.class.code()) else { continue };
        if m.counts().is_zero() {
            continue;
        }
        let [p, r, f] = row.values(which);
        let delta = hundredths(m.f1) - row.f1_hundredths(which);
        deltas.insert(
            row.class.code().to_owned(),
            ClassDelta {
                baseline_precision: p,
                baseline_recall: r,
                baseline_f1: f,
                f1_delta: delta as f64 / 100.0,
                flagged: row.bold == which,
            },
        );
    }
    let mut annotated = report.clone();
    annotated.baseline = Some(BaselineComparison { column: which, deltas });
    Ok(annotated)
}
