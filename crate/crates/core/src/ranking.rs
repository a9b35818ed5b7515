//! Rank aggregation across submissions.
//!
//! Each submission is ranked per metric (DSC descending, FPV and FNV
//! ascending) and scored `0.5·rank_dsc + 0.25·rank_fpv + 0.25·rank_fnv`;
//! lower scores rank higher.

use std::cmp::Ordering;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submission {
    pub name: String,
    pub mean_dsc: f64,
    pub mean_fpv_ml: f64,
    pub mean_fnv_ml: f64,
}

/// How tied values share rank positions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieRule {
    /// Tied entries get the mean of the positions they span.
    #[default]
    Average,
    /// Tied entries all get the best position they span.
    Min,
}

impl FromStr for TieRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "average" | "avg" => Ok(TieRule::Average),
            "min" => Ok(TieRule::Min),
            other => Err(Error::Domain(format!("tie rule must be average or min, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingRow {
    pub name: String,
    pub rank_dsc: f64,
    pub rank_fpv: f64,
    pub rank_fnv: f64,
    pub final_score: f64,
}

pub type RankingTable = Vec<RankingRow>;

/// Rank positions (1-based) of `values` where `better` orders best first.
fn ranks(values: &[f64], better: impl Fn(f64, f64) -> Ordering, tie: TieRule) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| better(values[a], values[b]));
    let mut out = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = match tie {
            TieRule::Average => (start + 1 + end) as f64 / 2.0,
            TieRule::Min => (start + 1) as f64,
        };
        for &i in &order[start..end] {
            out[i] = rank;
        }
        start = end;
    }
    out
}

/// Rank submissions and return rows sorted by final score, then by name.
pub fn rank_submissions(subs: &[Submission], tie: TieRule) -> Result<RankingTable> {
    if subs.is_empty() {
        return Err(Error::Domain("ranking needs at least one submission".into()));
    }
    for s in subs {
        for (what, v) in [
            ("mean_dsc", s.mean_dsc),
            ("mean_fpv_ml", s.mean_fpv_ml),
            ("mean_fnv_ml", s.mean_fnv_ml),
        ] {
            if !v.is_finite() {
                return Err(Error::Data(format!(
                    "submission {:?} has non-finite {what} ({v})",
                    s.name
                )));
            }
        }
        if !(0.0..=1.0).contains(&s.mean_dsc) {
            return Err(Error::Data(format!(
                "submission {:?} has DSC {} outside [0, 1]",
                s.name, s.mean_dsc
            )));
        }
    }
    let col = |f: fn(&Submission) -> f64| subs.iter().map(f).collect::<Vec<_>>();
    let desc = |a: f64, b: f64| b.total_cmp(&a);
    let asc = |a: f64, b: f64| a.total_cmp(&b);
    let r_dsc = ranks(&col(|s| s.mean_dsc), desc, tie);
    let r_fpv = ranks(&col(|s| s.mean_fpv_ml), asc, tie);
    let r_fnv = ranks(&col(|s| s.mean_fnv_ml), asc, tie);
    let mut rows: RankingTable = subs
        .iter()
        .enumerate()
        .map(|(i, s)| RankingRow {
            name: s.name.clone(),
            rank_dsc: r_dsc[i],
            rank_fpv: r_fpv[i],
            rank_fnv: r_fnv[i],
            final_score: 0.5 * r_dsc[i] + 0.25 * r_fpv[i] + 0.25 * r_fnv[i],
        })
        .collect();
    rows.sort_by(|a, b| {
        a.final_score
            .total_cmp(&b.final_score)
            .then_with(|| a.name.cmp(&b.name))
    });
    Ok(rows)
}

/// Read submissions from a CSV with columns
/// `name, mean_dsc, mean_fpv_ml, mean_fnv_ml`.
pub fn read_submissions(path: &Path) -> Result<Vec<Submission>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

pub fn write_ranking(rows: &[RankingRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
