//! Batch operations behind the command-line tool: case manifests, parallel
//! evaluation with per-case error capture, metric tables, JSON reports and
//! the preprocessing pipeline.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{
    aggregate, evaluate_pair, histograms, AggregateRow, CaseMetrics, GroupBy, MetricHistograms, MetricOptions,
    SummaryRow, Tracer,
};
use crate::nifti::{read_mask, read_nifti_as, write_nifti};
use crate::par;
use crate::preprocess::{
    body_bounding_box, bq_to_suv, clip_normalize_ct, crop_mask_to_box, crop_to_box, resample, resample_mask_onto,
    resample_onto, BodyThresholds, BoundingBox, Interpolation, ResampleSpec, SuvParams,
};
use crate::volume::{BinaryMask, Grid, ScalarVolume, VolumeKind};

/// One manifest row. Relative paths resolve against the manifest's folder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub case_id: String,
    #[serde(default, deserialize_with = "csv::invalid_option")]
    pub tracer: Option<String>,
    #[serde(default, deserialize_with = "csv::invalid_option")]
    pub fold: Option<u8>,
    pub gt_path: PathBuf,
    #[serde(default, deserialize_with = "csv::invalid_option")]
    pub pred_path: Option<PathBuf>,
    #[serde(default, deserialize_with = "csv::invalid_option")]
    pub pet_path: Option<PathBuf>,
    #[serde(default, deserialize_with = "csv::invalid_option")]
    pub ct_path: Option<PathBuf>,
    #[serde(default, deserialize_with = "csv::invalid_option")]
    pub injected_dose: Option<f64>,
    #[serde(default, deserialize_with = "csv::invalid_option")]
    pub decay_interval_min: Option<f64>,
    #[serde(default, deserialize_with = "csv::invalid_option")]
    pub half_life_min: Option<f64>,
    #[serde(default, deserialize_with = "csv::invalid_option")]
    pub patient_weight_kg: Option<f64>,
}

impl ManifestRow {
    pub fn tracer(&self) -> Tracer {
        self.tracer.as_deref().map_or(Tracer::Unknown, Tracer::parse_lenient)
    }

    /// SUV parameters when all four columns are filled.
    pub fn suv_params(&self) -> Option<SuvParams> {
        Some(SuvParams {
            injected_dose: self.injected_dose?,
            decay_interval_min: self.decay_interval_min?,
            half_life_min: self.half_life_min?,
            patient_weight_kg: self.patient_weight_kg?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseManifest {
    pub rows: Vec<ManifestRow>,
}

impl CaseManifest {
    pub fn new(rows: Vec<ManifestRow>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &rows {
            if r.case_id.trim().is_empty() {
                return Err(Error::Data("manifest row with empty case_id".into()));
            }
            if !seen.insert(r.case_id.as_str()) {
                return Err(Error::Data(format!("duplicate case_id {:?} in manifest", r.case_id)));
            }
            if let Some(f) = r.fold {
                if f > 4 {
                    return Err(Error::Data(format!("case {:?}: fold {f} outside 0..=4", r.case_id)));
                }
            }
        }
        Ok(CaseManifest { rows })
    }

    /// Parse a CSV manifest with a header row.
    pub fn read(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: PathBuf| if p.is_relative() { base.join(p) } else { p };
        let mut rows = Vec::new();
        for rec in rdr.deserialize() {
            let mut row: ManifestRow = rec.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
            row.gt_path = resolve(row.gt_path);
            row.pred_path = row.pred_path.map(resolve);
            row.pet_path = row.pet_path.map(resolve);
            row.ct_path = row.ct_path.map(resolve);
            rows.push(row);
        }
        Self::new(rows)
    }

    /// Pair every NIfTI file in `gt_dir` with the same file name in
    /// `pred_dir`. Case ids are file stems.
    pub fn from_dirs(gt_dir: &Path, pred_dir: &Path) -> Result<Self> {
        let mut rows = Vec::new();
        for entry in fs::read_dir(gt_dir).map_err(|e| Error::io(gt_dir, e))? {
            let entry = entry.map_err(|e| Error::io(gt_dir, e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if !(name.ends_with(".nii") || name.ends_with(".nii.gz")) {
                continue;
            }
            rows.push(ManifestRow {
                case_id: crate::metrics::case_stem(&entry.path()),
                tracer: None,
                fold: None,
                gt_path: entry.path(),
                pred_path: Some(pred_dir.join(&name)),
                pet_path: None,
                ct_path: None,
                injected_dose: None,
                decay_interval_min: None,
                half_life_min: None,
                patient_weight_kg: None,
            });
        }
        rows.sort_by(|a, b| a.case_id.cmp(&b.case_id));
        Self::new(rows)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluateOptions {
    pub metric: MetricOptions,
    /// Worker threads; `None` uses available parallelism.
    pub jobs: Option<usize>,
    pub bins: usize,
}

impl Default for EvaluateOptions {
    fn default() -> Self {
        EvaluateOptions {
            metric: MetricOptions::default(),
            jobs: None,
            bins: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseFailure {
    pub case_id: String,
    pub error: String,
}

/// Evaluated cases and failures, both sorted by case id.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluateOutcome {
    pub records: Vec<CaseMetrics>,
    pub failures: Vec<CaseFailure>,
}

impl EvaluateOutcome {
    pub fn all_succeeded(&self) -> bool {
        self.failures.is_empty()
    }
}

fn evaluate_row(row: &ManifestRow, opts: &MetricOptions) -> Result<CaseMetrics> {
    let pred_path = row
        .pred_path
        .as_ref()
        .ok_or_else(|| Error::Data("manifest row has no pred_path".into()))?;
    let gt = read_mask(&row.gt_path)?;
    let pred = read_mask(pred_path)?;
    let mut m = evaluate_pair(&row.case_id, &gt, &pred, row.tracer(), opts)?;
    m.fold = row.fold;
    Ok(m)
}

/// Evaluate every case. Failing cases are recorded and skipped; the output
/// order does not depend on scheduling.
pub fn run_evaluate(manifest: &CaseManifest, opts: &EvaluateOptions) -> EvaluateOutcome {
    let results = par::with_jobs(opts.jobs, || {
        par::map(&manifest.rows, |row| evaluate_row(row, &opts.metric))
    });
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (row, res) in manifest.rows.iter().zip(results) {
        match res {
            Ok(m) => records.push(m),
            Err(e) => failures.push(CaseFailure {
                case_id: row.case_id.clone(),
                error: e.to_string(),
            }),
        }
    }
    records.sort_by(|a, b| a.case_id.cmp(&b.case_id));
    failures.sort_by(|a, b| a.case_id.cmp(&b.case_id));
    EvaluateOutcome { records, failures }
}

const METRICS_HEADER: [&str; 6] = ["case_id", "tracer", "fold", "dsc", "fpv_ml", "fnv_ml"];

/// Write per-case metrics. Floats use the shortest representation that
/// parses back to the same value.
pub fn write_metrics_csv(records: &[CaseMetrics], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(METRICS_HEADER)?;
    for r in records {
        w.write_record([
            r.case_id.clone(),
            r.tracer.to_string(),
            r.fold.map(|f| f.to_string()).unwrap_or_default(),
            r.dsc.to_string(),
            r.fpv_ml.to_string(),
            r.fnv_ml.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<CaseMetrics>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let bad = |i: usize| {
            Error::Data(format!(
                "{} row {}: bad {} {:?}",
                path.display(),
                line + 1,
                METRICS_HEADER[i],
                field(i)
            ))
        };
        let num = |i: usize| field(i).parse::<f64>().map_err(|_| bad(i));
        let fold = match field(2) {
            "" => None,
            s => Some(s.parse::<u8>().map_err(|_| bad(2))?),
        };
        out.push(CaseMetrics {
            case_id: field(0).to_string(),
            tracer: Tracer::parse_lenient(field(1)),
            fold,
            dsc: num(3)?,
            fpv_ml: num(4)?,
            fnv_ml: num(5)?,
        });
    }
    Ok(out)
}

/// Table cells for one aggregate row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormattedRow {
    pub fold: Option<u8>,
    pub tracer: Option<Tracer>,
    pub count: usize,
    pub dsc: String,
    pub fnv_ml: String,
    pub fpv_ml: String,
    pub latex: String,
}

impl From<&AggregateRow> for FormattedRow {
    fn from(r: &AggregateRow) -> Self {
        let [dsc, fnv_ml, fpv_ml] = r.cells();
        FormattedRow {
            fold: r.fold,
            tracer: r.tracer,
            count: r.count,
            dsc,
            fnv_ml,
            fpv_ml,
            latex: format!(
                "{} & {} & {}",
                r.dsc.to_latex(),
                r.fnv_ml.to_latex(),
                r.fpv_ml.to_latex()
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub n_cases: usize,
    pub failures: Vec<CaseFailure>,
    pub overall: AggregateRow,
    pub by_tracer: Vec<AggregateRow>,
    pub by_fold: Vec<AggregateRow>,
    pub by_fold_tracer: Vec<AggregateRow>,
    pub table: Vec<FormattedRow>,
    pub summary: SummaryRow,
    pub histograms: BTreeMap<Tracer, MetricHistograms>,
}

/// Aggregates, formatted cells and per-tracer histograms for a run.
pub fn build_report(records: &[CaseMetrics], failures: &[CaseFailure], bins: usize) -> Result<Report> {
    let overall = aggregate(records, GroupBy::All)?
        .pop()
        .ok_or_else(|| Error::Domain("no records to report".into()))?;
    let by_fold_tracer = aggregate(records, GroupBy::Both)?;
    let summary = SummaryRow {
        label: "Average".into(),
        dsc: overall.dsc.mean,
        fnv_ml: overall.fnv_ml.mean,
        fpv_ml: overall.fpv_ml.mean,
    };
    Ok(Report {
        n_cases: records.len(),
        failures: failures.to_vec(),
        by_tracer: aggregate(records, GroupBy::Tracer)?,
        by_fold: aggregate(records, GroupBy::Fold)?,
        table: by_fold_tracer.iter().map(FormattedRow::from).collect(),
        by_fold_tracer,
        overall,
        summary,
        histograms: histograms(records, bins)?,
    })
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Histogram data for a metrics file.
pub fn emit_histograms(metrics_csv: &Path, bins: usize) -> Result<BTreeMap<Tracer, MetricHistograms>> {
    histograms(&read_metrics_csv(metrics_csv)?, bins)
}

/// Settings for the preprocessing pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub target_spacing_mm: f64,
    pub thresholds: BodyThresholds,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            target_spacing_mm: 2.0,
            thresholds: BodyThresholds::default(),
        }
    }
}

/// Preprocessed volumes of one case.
#[derive(Debug, Clone)]
pub struct PreprocessedCase {
    pub pet_suv: ScalarVolume,
    pub ct_norm: ScalarVolume,
    pub mask: Option<BinaryMask>,
    pub record: PipelineRecord,
}

/// Parameters applied to one case, written next to the outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineRecord {
    pub case_id: String,
    pub suv: SuvParams,
    pub suv_factor: f64,
    pub ct_resampled_to_pet: bool,
    pub mask_resampled_to_pet: bool,
    pub body_box: BoundingBox,
    pub input_grid: Grid,
    pub output_grid: Grid,
    pub options: PipelineOptions,
}

/// SUV conversion, body crop, CT normalisation and resampling of one case
/// held in memory. CT and mask are first moved onto the PET grid if their
/// sampling differs.
pub fn preprocess_case(
    case_id: &str,
    pet_bqml: &ScalarVolume,
    ct_hu: &ScalarVolume,
    mask: Option<&BinaryMask>,
    suv: &SuvParams,
    opts: &PipelineOptions,
) -> Result<PreprocessedCase> {
    let pet_grid = *pet_bqml.grid();
    let ct_moved = !pet_grid.same_sampling(ct_hu.grid()) || pet_grid.origin != ct_hu.grid().origin;
    let ct = if ct_moved {
        resample_onto(ct_hu, &pet_grid, Interpolation::Trilinear)?
    } else {
        ct_hu.clone()
    };
    let mask_moved = mask.is_some_and(|m| !pet_grid.same_sampling(m.grid()) || pet_grid.origin != m.grid().origin);
    let mask = match mask {
        Some(m) if mask_moved => Some(resample_mask_onto(m, &pet_grid)?),
        Some(m) => Some(m.clone()),
        None => None,
    };

    let pet = bq_to_suv(pet_bqml, suv)?;
    let bbox = body_bounding_box(&ct, &pet, &opts.thresholds)?;
    let pet = crop_to_box(&pet, &bbox)?;
    let ct = clip_normalize_ct(&crop_to_box(&ct, &bbox)?)?;
    let mask = mask.map(|m| crop_mask_to_box(&m, &bbox)).transpose()?;

    let spec = ResampleSpec::isotropic(opts.target_spacing_mm, Interpolation::Trilinear);
    let pet = resample(&pet, &spec)?;
    let ct = resample(&ct, &spec)?;
    let mask = mask.map(|m| resample_mask_onto(&m, pet.grid())).transpose()?;

    let record = PipelineRecord {
        case_id: case_id.to_string(),
        suv: *suv,
        suv_factor: suv.suv_factor(),
        ct_resampled_to_pet: ct_moved,
        mask_resampled_to_pet: mask_moved,
        body_box: bbox,
        input_grid: pet_grid,
        output_grid: *pet.grid(),
        options: *opts,
    };
    Ok(PreprocessedCase {
        pet_suv: pet,
        ct_norm: ct,
        mask,
        record,
    })
}

/// Output files written for one case by [`run_pipeline`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutputs {
    pub pet: PathBuf,
    pub ct: PathBuf,
    pub mask: Option<PathBuf>,
    pub record: PathBuf,
}

/// Read, preprocess and write one manifest case into `out_dir` as
/// `{case}_pet.nii.gz`, `{case}_ct.nii.gz`, `{case}_mask.nii.gz` and
/// `{case}_pipeline.json`.
pub fn run_pipeline(row: &ManifestRow, opts: &PipelineOptions, out_dir: &Path) -> Result<PipelineOutputs> {
    let ctx = |e: Error| Error::Data(format!("case {}: {e}", row.case_id));
    let pet_path = row
        .pet_path
        .as_ref()
        .ok_or_else(|| ctx(Error::Data("no pet_path".into())))?;
    let ct_path = row
        .ct_path
        .as_ref()
        .ok_or_else(|| ctx(Error::Data("no ct_path".into())))?;
    let suv = row
        .suv_params()
        .ok_or_else(|| ctx(Error::Data("SUV parameter columns are incomplete".into())))?;
    let pet = read_nifti_as(pet_path, VolumeKind::PetBqml).map_err(ctx)?;
    let ct = read_nifti_as(ct_path, VolumeKind::CtHu).map_err(ctx)?;
    let mask = if row.gt_path.as_os_str().is_empty() {
        None
    } else {
        Some(read_mask(&row.gt_path).map_err(ctx)?)
    };
    let case = preprocess_case(&row.case_id, &pet, &ct, mask.as_ref(), &suv, opts).map_err(ctx)?;

    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let out = PipelineOutputs {
        pet: out_dir.join(format!("{}_pet.nii.gz", row.case_id)),
        ct: out_dir.join(format!("{}_ct.nii.gz", row.case_id)),
        mask: case
            .mask
            .as_ref()
            .map(|_| out_dir.join(format!("{}_mask.nii.gz", row.case_id))),
        record: out_dir.join(format!("{}_pipeline.json", row.case_id)),
    };
    write_nifti(&case.pet_suv, &out.pet)?;
    write_nifti(&case.ct_norm, &out.ct)?;
    if let (Some(m), Some(p)) = (&case.mask, &out.mask) {
        write_nifti(m, p)?;
    }
    write_json(&case.record, &out.record)?;
    Ok(out)
}
