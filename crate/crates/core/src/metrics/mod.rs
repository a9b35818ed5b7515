//! Challenge metrics: Dice similarity, false positive volume and false
//! negative volume, per case and aggregated.
//!
//! FPV sums the volume of predicted components that do not touch the ground
//! truth at all; FNV sums the volume of ground-truth components that the
//! prediction misses entirely. A component that overlaps by a single voxel
//! contributes nothing.

mod aggregate;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use aggregate::{
    aggregate, histograms, mean, sample_std, AggregateRow, GroupBy, Histogram, MeanStd, MetricHistograms, SummaryRow,
};

use crate::components::{components_touching, label_components, Connectivity};
use crate::error::{Error, Result};
use crate::nifti;
use crate::preprocess::resample_mask_onto;
use crate::volume::BinaryMask;

/// Radiotracer cohort.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Tracer {
    Fdg,
    Psma,
    Unknown,
}

impl Tracer {
    /// Lenient parse: unrecognised labels map to `Unknown` with a warning.
    pub fn parse_lenient(s: &str) -> Tracer {
        s.parse().unwrap_or_else(|_| {
            log::warn!("unknown tracer label {s:?}; grouping as UNKNOWN");
            Tracer::Unknown
        })
    }
}

impl fmt::Display for Tracer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tracer::Fdg => "FDG",
            Tracer::Psma => "PSMA",
            Tracer::Unknown => "UNKNOWN",
        })
    }
}

impl FromStr for Tracer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "FDG" => Ok(Tracer::Fdg),
            "PSMA" => Ok(Tracer::Psma),
            "UNKNOWN" | "" => Ok(Tracer::Unknown),
            other => Err(Error::Domain(format!("unknown tracer {other:?}"))),
        }
    }
}

/// Metric conventions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricOptions {
    pub connectivity: Connectivity,
    /// DSC reported when both masks are empty (negative controls).
    pub both_empty_dsc: f64,
}

impl Default for MetricOptions {
    fn default() -> Self {
        MetricOptions {
            connectivity: Connectivity::Face6,
            both_empty_dsc: 1.0,
        }
    }
}

/// Per-case metric record; volumes in ml.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseMetrics {
    pub case_id: String,
    pub tracer: Tracer,
    pub fold: Option<u8>,
    pub dsc: f64,
    pub fpv_ml: f64,
    pub fnv_ml: f64,
}

fn check_pair(gt: &BinaryMask, pred: &BinaryMask) -> Result<()> {
    gt.grid()
        .ensure_same_sampling(pred.grid(), "ground truth vs prediction")
}

/// Dice with the default both-empty convention (1.0).
pub fn dsc(gt: &BinaryMask, pred: &BinaryMask) -> Result<f64> {
    dsc_with(gt, pred, MetricOptions::default().both_empty_dsc)
}

/// `2|G ∩ P| / (|G| + |P|)`, or `both_empty` when both masks are empty.
pub fn dsc_with(gt: &BinaryMask, pred: &BinaryMask, both_empty: f64) -> Result<f64> {
    check_pair(gt, pred)?;
    let (mut g, mut p, mut both) = (0u64, 0u64, 0u64);
    for (&a, &b) in gt.data().iter().zip(pred.data()) {
        g += u64::from(a);
        p += u64::from(b);
        both += u64::from(a & b);
    }
    if g + p == 0 {
        return Ok(both_empty);
    }
    Ok(2.0 * both as f64 / (g + p) as f64)
}

/// Volume (ml) of components of `source` with no voxel in `other`.
fn missed_volume(source: &BinaryMask, other: &BinaryMask, conn: Connectivity) -> f64 {
    let labels = label_components(source, conn);
    if labels.n_components() == 0 {
        return 0.0;
    }
    let hit = components_touching(&labels, other.data());
    let sizes = crate::components::component_sizes(&labels);
    let voxels: usize = sizes.iter().zip(&hit).filter(|(_, &h)| !h).map(|(&s, _)| s).sum();
    voxels as f64 * source.grid().voxel_volume_ml()
}

/// False positive volume: predicted components disjoint from the ground
/// truth, in ml.
pub fn fpv(gt: &BinaryMask, pred: &BinaryMask, conn: Connectivity) -> Result<f64> {
    check_pair(gt, pred)?;
    Ok(missed_volume(pred, gt, conn))
}

/// False negative volume: ground-truth components the prediction never
/// touches, in ml.
pub fn fnv(gt: &BinaryMask, pred: &BinaryMask, conn: Connectivity) -> Result<f64> {
    check_pair(gt, pred)?;
    Ok(missed_volume(gt, pred, conn))
}

/// DSC, FPV and FNV of one mask pair on a shared grid.
pub fn evaluate_masks(gt: &BinaryMask, pred: &BinaryMask, opts: &MetricOptions) -> Result<(f64, f64, f64)> {
    Ok((
        dsc_with(gt, pred, opts.both_empty_dsc)?,
        fpv(gt, pred, opts.connectivity)?,
        fnv(gt, pred, opts.connectivity)?,
    ))
}

/// Evaluate a prediction against ground truth, first moving the prediction
/// onto the ground-truth grid (nearest neighbour) when the grids differ.
pub fn evaluate_pair(
    case_id: &str,
    gt: &BinaryMask,
    pred: &BinaryMask,
    tracer: Tracer,
    opts: &MetricOptions,
) -> Result<CaseMetrics> {
    let aligned;
    let pred = if gt.grid().same_sampling(pred.grid()) {
        pred
    } else {
        aligned = resample_mask_onto(pred, gt.grid())?;
        &aligned
    };
    let (dsc, fpv_ml, fnv_ml) = evaluate_masks(gt, pred, opts)?;
    Ok(CaseMetrics {
        case_id: case_id.to_string(),
        tracer,
        fold: None,
        dsc,
        fpv_ml,
        fnv_ml,
    })
}

/// Read both masks from disk and evaluate them. The case id is the ground
/// truth file stem.
pub fn evaluate_case(
    gt_path: impl AsRef<Path>,
    pred_path: impl AsRef<Path>,
    tracer: Tracer,
    opts: &MetricOptions,
) -> Result<CaseMetrics> {
    let gt_path = gt_path.as_ref();
    let gt = nifti::read_mask(gt_path)?;
    let pred = nifti::read_mask(pred_path)?;
    evaluate_pair(&case_stem(gt_path), &gt, &pred, tracer, opts)
}

/// File name without `.nii` / `.nii.gz`.
pub fn case_stem(path: &Path) -> String {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    name.strip_suffix(".nii.gz")
        .or_else(|| name.strip_suffix(".nii"))
        .unwrap_or(&name)
        .to_string()
}
