use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{CaseMetrics, Tracer};
use crate::error::{Error, Result};

/// Arithmetic mean, summed in slice order. Empty input gives NaN.
pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for a single value.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Mean and sample standard deviation, rendered as `0.6303 ±0.2563`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        MeanStd {
            mean: mean(values),
            std: sample_std(values),
        }
    }

    /// LaTeX table cell, e.g. `0.6303 {\scriptsize $\pm$0.2563}`.
    pub fn to_latex(&self) -> String {
        format!("{:.4} {{\\scriptsize $\\pm${:.4}}}", self.mean, self.std)
    }
}

impl fmt::Display for MeanStd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4} ±{:.4}", self.mean, self.std)
    }
}

impl FromStr for MeanStd {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (m, sd) = s
            .split_once('±')
            .ok_or_else(|| Error::Data(format!("expected \"mean ±std\", got {s:?}")))?;
        let parse = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| Error::Data(format!("bad number {t:?} in {s:?}: {e}")))
        };
        Ok(MeanStd {
            mean: parse(m)?,
            std: parse(sd)?,
        })
    }
}

/// Grouping key for aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GroupBy {
    Fold,
    #[default]
    Tracer,
    Both,
    /// Single group over every record.
    All,
}

impl FromStr for GroupBy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fold" => Ok(GroupBy::Fold),
            "tracer" => Ok(GroupBy::Tracer),
            "both" | "fold,tracer" | "fold+tracer" => Ok(GroupBy::Both),
            "all" | "none" => Ok(GroupBy::All),
            other => Err(Error::Domain(format!(
                "group-by must be fold, tracer, both or all; got {other:?}"
            ))),
        }
    }
}

/// One aggregated group. Key fields not used by the grouping are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub fold: Option<u8>,
    pub tracer: Option<Tracer>,
    pub count: usize,
    pub dsc: MeanStd,
    pub fnv_ml: MeanStd,
    pub fpv_ml: MeanStd,
}

impl AggregateRow {
    /// Table-style cells in DSC, FNV, FPV order.
    pub fn cells(&self) -> [String; 3] {
        [self.dsc.to_string(), self.fnv_ml.to_string(), self.fpv_ml.to_string()]
    }
}

fn group_key(r: &CaseMetrics, by: GroupBy) -> (Option<u8>, Option<Tracer>) {
    match by {
        GroupBy::Fold => (r.fold, None),
        GroupBy::Tracer => (None, Some(r.tracer)),
        GroupBy::Both => (r.fold, Some(r.tracer)),
        GroupBy::All => (None, None),
    }
}

/// Mean and sample std of each metric per group, groups in key order.
/// Within a group, values are reduced in record order.
pub fn aggregate(records: &[CaseMetrics], by: GroupBy) -> Result<Vec<AggregateRow>> {
    if records.is_empty() {
        return Err(Error::Domain("cannot aggregate zero records".into()));
    }
    let mut groups: BTreeMap<(Option<u8>, Option<Tracer>), Vec<&CaseMetrics>> = BTreeMap::new();
    for r in records {
        groups.entry(group_key(r, by)).or_default().push(r);
    }
    Ok(groups
        .into_iter()
        .map(|((fold, tracer), rs)| {
            let col = |f: fn(&CaseMetrics) -> f64| rs.iter().map(|r| f(r)).collect::<Vec<_>>();
            AggregateRow {
                fold,
                tracer,
                count: rs.len(),
                dsc: MeanStd::of(&col(|r| r.dsc)),
                fnv_ml: MeanStd::of(&col(|r| r.fnv_ml)),
                fpv_ml: MeanStd::of(&col(|r| r.fpv_ml)),
            }
        })
        .collect())
}

/// Fixed-width histogram with the group mean carried for plot legends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `counts.len() + 1` ascending bin edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub mean: f64,
}

impl Histogram {
    /// Equal-width bins over `[lo, hi]`; the last bin is closed on the right.
    pub fn with_range(values: &[f64], bins: usize, lo: f64, hi: f64) -> Self {
        let bins = bins.max(1);
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|i| lo + width * i as f64).collect();
        let mut counts = vec![0usize; bins];
        for &v in values {
            let b = ((v - lo) / width).floor();
            let b = if b < 0.0 { 0 } else { (b as usize).min(bins - 1) };
            counts[b] += 1;
        }
        Histogram {
            edges,
            counts,
            mean: mean(values),
        }
    }

    /// Bins spanning the data range.
    pub fn of(values: &[f64], bins: usize) -> Self {
        let (lo, hi) = min_max(values);
        Self::with_range(values, bins, lo, hi)
    }
}

pub(crate) fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)))
}

/// DSC / FNV / FPV histograms for one tracer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricHistograms {
    pub count: usize,
    pub dsc: Histogram,
    pub fnv_ml: Histogram,
    pub fpv_ml: Histogram,
}

/// Per-tracer histograms. Bin edges for a metric are shared by all tracers
/// so the series can be overlaid.
pub fn histograms(records: &[CaseMetrics], bins: usize) -> Result<BTreeMap<Tracer, MetricHistograms>> {
    if records.is_empty() {
        return Err(Error::Domain("cannot build histograms from zero records".into()));
    }
    let all = |f: fn(&CaseMetrics) -> f64| records.iter().map(f).collect::<Vec<_>>();
    let ranges = [
        min_max(&all(|r| r.dsc)),
        min_max(&all(|r| r.fnv_ml)),
        min_max(&all(|r| r.fpv_ml)),
    ];
    let mut by_tracer: BTreeMap<Tracer, Vec<&CaseMetrics>> = BTreeMap::new();
    for r in records {
        by_tracer.entry(r.tracer).or_default().push(r);
    }
    Ok(by_tracer
        .into_iter()
        .map(|(t, rs)| {
            let col = |f: fn(&CaseMetrics) -> f64| rs.iter().map(|r| f(r)).collect::<Vec<_>>();
            let h = |vals: Vec<f64>, (lo, hi): (f64, f64)| Histogram::with_range(&vals, bins, lo, hi);
            (
                t,
                MetricHistograms {
                    count: rs.len(),
                    dsc: h(col(|r| r.dsc), ranges[0]),
                    fnv_ml: h(col(|r| r.fnv_ml), ranges[1]),
                    fpv_ml: h(col(|r| r.fpv_ml), ranges[2]),
                },
            )
        })
        .collect())
}

/// Summary line `label: DSC / FNV / FPV`, four decimals each, e.g.
/// `Average: 0.6687 / 10.9522 / 2.9684`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    pub dsc: f64,
    pub fnv_ml: f64,
    pub fpv_ml: f64,
}

impl SummaryRow {
    pub fn values(&self) -> String {
        format!("{:.4} / {:.4} / {:.4}", self.dsc, self.fnv_ml, self.fpv_ml)
    }

    pub fn to_latex(&self) -> String {
        format!(
            "{} & {:.4} & {:.4} & {:.4} \\\\",
            self.label, self.dsc, self.fnv_ml, self.fpv_ml
        )
    }
}

impl fmt::Display for SummaryRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.label, self.values())
    }
}

impl FromStr for SummaryRow {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Data(format!("expected \"label: dsc / fnv / fpv\", got {s:?}"));
        let (label, rest) = s.rsplit_once(':').ok_or_else(bad)?;
        let nums: Vec<f64> = rest
            .split('/')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        match nums[..] {
            [dsc, fnv_ml, fpv_ml] => Ok(SummaryRow {
                label: label.trim().to_string(),
                dsc,
                fnv_ml,
                fpv_ml,
            }),
            _ => Err(bad()),
        }
    }
}
