//! Subcommand implementations.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use serde::Serialize;

use petseg::augment::{augment_sample, AugmentConfig, AugmentRecord, Sample};
use petseg::batch::{
    build_report, preprocess_case, read_metrics_csv, run_evaluate, run_pipeline, write_json, write_metrics_csv,
    CaseManifest, EvaluateOptions, PipelineOptions,
};
use petseg::components::{component_sizes, label_components};
use petseg::ensemble::{
    average_ensemble, average_logits, binarize, blend, load_windows, plan_windows, resample_to_reference,
    window_file_name, Logits, WindowPlan,
};
use petseg::lesion::{cohort_measures, lesion_stats, write_lesion_csv, CohortInput};
use petseg::losses::{gdfl_gradient, loss_values, loss_values_from_probs, LossConfig, PatchBatch};
use petseg::metrics::{histograms, MetricOptions};
use petseg::nifti::{read_mask, read_nifti, read_nifti_as, read_nifti_channels, write_nifti, write_nifti_channels};
use petseg::preprocess::{bq_to_suv, BodyThresholds, SuvParams};
use petseg::ranking::{rank_submissions, read_submissions, write_ranking};
use petseg::volume::{BinaryMask, ScalarVolume, VolumeKind};
use petseg::{par, Error, Result};

use crate::{
    AugmentArgs, AverageArgs, BinarizeArgs, BlendArgs, Command, ComponentsArgs, EnsembleCommand, EvaluateArgs,
    LossArgs, MeasuresArgs, PlanArgs, PreprocessArgs, RankArgs, ReportArgs,
};

pub fn run(cmd: Command) -> Result<ExitCode> {
    let done = |r: Result<()>| r.map(|()| ExitCode::SUCCESS);
    match cmd {
        Command::Preprocess(a) => preprocess(a),
        Command::Augment(a) => done(augment(a)),
        Command::Loss(a) => done(loss(a)),
        Command::Components(a) => done(components(a)),
        Command::Evaluate(a) => evaluate(a),
        Command::Measures(a) => done(measures(a)),
        Command::Ensemble(EnsembleCommand::Plan(a)) => done(ensemble_plan(a)),
        Command::Ensemble(EnsembleCommand::Blend(a)) => done(ensemble_blend(a)),
        Command::Ensemble(EnsembleCommand::Average(a)) => done(ensemble_average(a)),
        Command::Ensemble(EnsembleCommand::Binarize(a)) => done(ensemble_binarize(a)),
        Command::Rank(a) => done(rank(a)),
        Command::Report(a) => done(report(a)),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Data(format!("cannot create {}: {e}", dir.display())))
}

/// Exit status for a batch run: 1 when any case failed.
fn report_failures(failures: &[(String, String)]) -> ExitCode {
    if failures.is_empty() {
        return ExitCode::SUCCESS;
    }
    eprintln!("{} case(s) failed:", failures.len());
    for (id, err) in failures {
        eprintln!("  {id}: {err}");
    }
    ExitCode::from(1)
}

fn preprocess(a: PreprocessArgs) -> Result<ExitCode> {
    let opts = PipelineOptions {
        target_spacing_mm: a.spacing,
        thresholds: BodyThresholds {
            ct_hu: a.body_ct_hu,
            suv: a.body_suv,
        },
    };
    create_dir(&a.out)?;
    if let Some(m) = &a.manifest {
        let manifest = CaseManifest::read(m)?;
        let results = par::map(&manifest.rows, |row| run_pipeline(row, &opts, &a.out));
        let failures: Vec<(String, String)> = manifest
            .rows
            .iter()
            .zip(results)
            .filter_map(|(r, res)| res.err().map(|e| (r.case_id.clone(), e.to_string())))
            .collect();
        println!(
            "preprocessed {} of {} cases into {}",
            manifest.rows.len() - failures.len(),
            manifest.rows.len(),
            a.out.display()
        );
        return Ok(report_failures(&failures));
    }
    let (Some(pet), Some(ct)) = (&a.pet, &a.ct) else {
        return Err(Error::Contract("give --manifest, or --pet and --ct".into()));
    };
    let suv = SuvParams {
        injected_dose: a.dose.ok_or_else(|| Error::Contract("--dose is required".into()))?,
        decay_interval_min: a.decay_min,
        half_life_min: a.half_life_min,
        patient_weight_kg: a
            .weight_kg
            .ok_or_else(|| Error::Contract("--weight-kg is required".into()))?,
    };
    let pet = read_nifti_as(pet, VolumeKind::PetBqml)?;
    let ct = read_nifti_as(ct, VolumeKind::CtHu)?;
    let mask = a.mask.as_ref().map(read_mask).transpose()?;
    let case = preprocess_case(&a.case_id, &pet, &ct, mask.as_ref(), &suv, &opts)?;
    write_nifti(&case.pet_suv, a.out.join(format!("{}_pet.nii.gz", a.case_id)))?;
    write_nifti(&case.ct_norm, a.out.join(format!("{}_ct.nii.gz", a.case_id)))?;
    if let Some(m) = &case.mask {
        write_nifti(m, a.out.join(format!("{}_mask.nii.gz", a.case_id)))?;
    }
    write_json(&case.record, &a.out.join(format!("{}_pipeline.json", a.case_id)))?;
    println!(
        "{}: {:?} voxels at {} mm",
        a.case_id, case.record.output_grid.dims, a.spacing
    );
    Ok(ExitCode::SUCCESS)
}

/// Files of one augmentation case.
struct AugmentCase {
    id: String,
    images: Vec<(String, PathBuf)>,
    mask: Option<PathBuf>,
}

fn strip_nifti(name: &str) -> Option<&str> {
    name.strip_suffix(".nii.gz").or_else(|| name.strip_suffix(".nii"))
}

fn discover_cases(dir: &Path) -> Result<Vec<AugmentCase>> {
    let mut files: Vec<String> = fs::read_dir(dir)
        .map_err(|e| Error::Data(format!("cannot list {}: {e}", dir.display())))?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| strip_nifti(n).is_some())
        .collect();
    files.sort();
    let mut cases: BTreeMap<String, AugmentCase> = BTreeMap::new();
    for name in files {
        let stem = strip_nifti(&name).unwrap_or(&name).to_string();
        let (id, role) = ["pet", "ct", "mask"]
            .iter()
            .find_map(|r| stem.strip_suffix(&format!("_{r}")).map(|id| (id.to_string(), *r)))
            .unwrap_or((stem.clone(), "image"));
        let case = cases.entry(id.clone()).or_insert_with(|| AugmentCase {
            id,
            images: Vec::new(),
            mask: None,
        });
        let path = dir.join(&name);
        if role == "mask" {
            case.mask = Some(path);
        } else {
            case.images.push((role.to_string(), path));
        }
    }
    for c in cases.values_mut() {
        let order = |r: &str| match r {
            "pet" => 0,
            "ct" => 1,
            _ => 2,
        };
        c.images.sort_by_key(|(r, _)| order(r));
    }
    Ok(cases.into_values().filter(|c| !c.images.is_empty()).collect())
}

#[derive(Serialize)]
struct AugmentEntry {
    case_id: String,
    sample: u64,
    files: Vec<PathBuf>,
    params: AugmentRecord,
}

fn augment(a: AugmentArgs) -> Result<()> {
    let cfg = AugmentConfig {
        patch_size: a.patch_size,
        signed_translation: a.signed_translation,
        elastic_pitch: a.elastic_pitch,
        seed: a.seed,
        ..AugmentConfig::default()
    };
    cfg.validate()?;
    let cases = discover_cases(&a.input)?;
    if cases.is_empty() {
        return Err(Error::Data(format!("no NIfTI images found in {}", a.input.display())));
    }
    create_dir(&a.out)?;
    let jobs: Vec<(usize, u64)> = (0..cases.len())
        .flat_map(|c| (0..a.count).map(move |k| (c, k)))
        .collect();
    let entries = par::map(&jobs, |&(c, k)| -> Result<AugmentEntry> {
        let case = &cases[c];
        let images = case
            .images
            .iter()
            .map(|(_, p)| read_nifti(p))
            .collect::<Result<Vec<_>>>()?;
        let mask = case.mask.as_ref().map(read_mask).transpose()?;
        let call_index = c as u64 * a.count + k;
        let (out, params) = augment_sample(&Sample { images, mask }, &cfg, call_index)?;
        let mut files = Vec::new();
        for ((role, _), img) in case.images.iter().zip(&out.images) {
            let p = a.out.join(format!("{}_aug{k:03}_{role}.nii.gz", case.id));
            write_nifti(img, &p)?;
            files.push(p);
        }
        if let Some(m) = &out.mask {
            let p = a.out.join(format!("{}_aug{k:03}_mask.nii.gz", case.id));
            write_nifti(m, &p)?;
            files.push(p);
        }
        Ok(AugmentEntry {
            case_id: case.id.clone(),
            sample: k,
            files,
            params,
        })
    });
    let entries = entries.into_iter().collect::<Result<Vec<_>>>()?;
    write_json(&entries, &a.out.join("manifest.json"))?;
    println!("wrote {} augmented samples to {}", entries.len(), a.out.display());
    Ok(())
}

/// Read one patch as (background, foreground) values.
fn read_patch(path: &Path, probabilities: bool) -> Result<(petseg::Grid, Vec<f64>, Vec<f64>)> {
    if probabilities {
        let mut ch = read_nifti_channels(path, VolumeKind::Prob)?;
        let fg = ch
            .pop()
            .ok_or_else(|| Error::Data(format!("{}: no data", path.display())))?;
        let bg = match ch.pop() {
            Some(bg) => bg.into_data(),
            None => fg.data().iter().map(|p| 1.0 - p).collect(),
        };
        Ok((*fg.grid(), bg, fg.into_data()))
    } else {
        let l = Logits::read(path)?;
        Ok((l.grid, l.background, l.foreground))
    }
}

#[derive(Serialize)]
struct LossReport {
    n_patches: usize,
    n_voxels: usize,
    input: &'static str,
    config: LossConfig,
    gdl: f64,
    fl: f64,
    gdfl: f64,
}

fn loss(a: LossArgs) -> Result<()> {
    if a.logits.len() != a.target.len() {
        return Err(Error::Contract(format!(
            "{} logit files but {} target masks",
            a.logits.len(),
            a.target.len()
        )));
    }
    let cfg = LossConfig {
        focal_weights: [a.bg_weight, a.fg_weight],
        gamma: a.gamma,
        dice_numerator_factor: a.dice_numerator_factor,
        ..LossConfig::default()
    };
    let mut values = Vec::new();
    let mut target = Vec::new();
    let mut grids = Vec::new();
    for (lp, tp) in a.logits.iter().zip(&a.target) {
        let (grid, bg, fg) = read_patch(lp, a.probabilities)?;
        let mask = read_mask(tp)?;
        grid.ensure_same_sampling(mask.grid(), "patch and target")?;
        if let Some(first) = grids.first() {
            if grid.dims != *first {
                return Err(Error::Shape(format!(
                    "patch {} has dims {:?}, expected {first:?}",
                    lp.display(),
                    grid.dims
                )));
            }
        }
        grids.push(grid.dims);
        values.extend(bg);
        values.extend(fg);
        target.extend(mask.data().iter().map(|&m| f64::from(1 - m)));
        target.extend(mask.data().iter().map(|&m| f64::from(m)));
    }
    let n_patches = a.logits.len();
    let n_voxels = values.len() / (2 * n_patches);
    let v = if a.probabilities {
        loss_values_from_probs(n_patches, &values, &target, &cfg)?
    } else {
        let batch = PatchBatch::new(n_patches, n_voxels, values, target)?;
        if let Some(dir) = &a.gradient_dir {
            create_dir(dir)?;
            let grad = gdfl_gradient(&batch, &cfg)?;
            for (k, lp) in a.logits.iter().enumerate() {
                let grid = read_patch(lp, false)?.0;
                let chunk = &grad[k * 2 * n_voxels..(k + 1) * 2 * n_voxels];
                let bg = ScalarVolume::new(grid, chunk[..n_voxels].to_vec(), VolumeKind::PetSuv)?;
                let fg = ScalarVolume::new(grid, chunk[n_voxels..].to_vec(), VolumeKind::PetSuv)?;
                write_nifti_channels(&[bg, fg], dir.join(format!("grad_{k}.nii.gz")))?;
            }
        }
        loss_values(&batch, &cfg)?
    };
    let report = LossReport {
        n_patches,
        n_voxels,
        input: if a.probabilities { "probabilities" } else { "logits" },
        config: cfg,
        gdl: v.gdl,
        fl: v.fl,
        gdfl: v.gdfl,
    };
    emit_json(&report, a.out.as_deref())
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => write_json(value, p),
        None => {
            println!("{}", serde_json::to_string_pretty(value)?);
            Ok(())
        }
    }
}

fn components(a: ComponentsArgs) -> Result<()> {
    let mask = read_mask(&a.mask)?;
    let labels = label_components(&mask, a.connectivity);
    write_nifti(&labels, &a.out)?;
    let sizes = component_sizes(&labels);
    if let Some(p) = &a.sizes {
        let mut w = csv::Writer::from_path(p)?;
        w.write_record(["label", "n_voxels", "volume_ml"])?;
        let ml = mask.grid().voxel_volume_ml();
        for (k, &n) in sizes.iter().enumerate() {
            w.write_record([(k + 1).to_string(), n.to_string(), (n as f64 * ml).to_string()])?;
        }
        w.flush().map_err(|e| Error::Data(format!("{}: {e}", p.display())))?;
    }
    println!("{} components ({}-connectivity)", sizes.len(), a.connectivity);
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<ExitCode> {
    let manifest = match (&a.manifest, &a.gt_dir, &a.pred_dir) {
        (Some(m), _, _) => CaseManifest::read(m)?,
        (None, Some(g), Some(p)) => CaseManifest::from_dirs(g, p)?,
        _ => return Err(Error::Contract("give --manifest, or --gt-dir and --pred-dir".into())),
    };
    let opts = EvaluateOptions {
        metric: MetricOptions {
            connectivity: a.connectivity,
            both_empty_dsc: a.both_empty_dsc,
        },
        // the surrounding pool already honours --jobs
        jobs: None,
        bins: a.bins,
    };
    let outcome = run_evaluate(&manifest, &opts);
    create_dir(&a.out)?;
    let metrics_path = a.out.join("metrics.csv");
    write_metrics_csv(&outcome.records, &metrics_path)?;
    if !outcome.records.is_empty() {
        // aggregate what was written so the report matches the file exactly
        let written = read_metrics_csv(&metrics_path)?;
        let report = build_report(&written, &outcome.failures, a.bins)?;
        write_json(&report, &a.out.join("report.json"))?;
        for row in &report.table {
            let fold = row.fold.map_or("-".to_string(), |f| f.to_string());
            let tracer = row.tracer.map_or("-".to_string(), |t| t.to_string());
            println!(
                "fold {fold} {tracer:>7} n={:<4} DSC {}  FNV {}  FPV {}",
                row.count, row.dsc, row.fnv_ml, row.fpv_ml
            );
        }
        println!("{}", report.summary);
    }
    let failures: Vec<(String, String)> = outcome
        .failures
        .iter()
        .map(|f| (f.case_id.clone(), f.error.clone()))
        .collect();
    Ok(report_failures(&failures))
}

fn read_suv_for(row_pet: &Path, suv: Option<SuvParams>) -> Result<ScalarVolume> {
    match suv {
        Some(p) => bq_to_suv(&read_nifti_as(row_pet, VolumeKind::PetBqml)?, &p),
        None => read_nifti_as(row_pet, VolumeKind::PetSuv),
    }
}

fn measures(a: MeasuresArgs) -> Result<()> {
    if let Some(m) = &a.manifest {
        let manifest = CaseManifest::read(m)?;
        let inputs = par::map(&manifest.rows, |row| -> Result<CohortInput> {
            let pet = row
                .pet_path
                .as_ref()
                .ok_or_else(|| Error::Data(format!("case {}: no pet_path", row.case_id)))?;
            Ok(CohortInput {
                case_id: row.case_id.clone(),
                tracer: row.tracer(),
                mask: read_mask(&row.gt_path)?,
                suv: read_suv_for(pet, row.suv_params())?,
            })
        });
        let inputs = inputs.into_iter().collect::<Result<Vec<_>>>()?;
        let cohort = cohort_measures(&inputs, a.connectivity)?;
        #[derive(Serialize)]
        struct CohortJson<'a> {
            cases: &'a [petseg::lesion::CohortCase],
            histograms: BTreeMap<petseg::metrics::Tracer, petseg::lesion::LesionHistograms>,
        }
        write_json(
            &CohortJson {
                cases: &cohort.cases,
                histograms: cohort.histograms(a.bins),
            },
            &a.out,
        )?;
        for (t, d) in &cohort.by_tracer {
            println!("{t}: {} cases, {} lesions", d.n_cases, d.pooled_lesions());
        }
        return Ok(());
    }
    let (Some(mask), Some(pet)) = (&a.mask, &a.pet) else {
        return Err(Error::Contract("give --mask and --pet, or --manifest".into()));
    };
    let mask = read_mask(mask)?;
    let suv = read_nifti_as(pet, VolumeKind::PetSuv)?;
    let report = lesion_stats(&mask, &suv, a.connectivity)?;
    write_lesion_csv(&report, &a.out)?;
    println!(
        "{} lesions, TMTV {:.4} ml, TLG {:.4}",
        report.n_lesions, report.tmtv_ml, report.tlg_ml
    );
    Ok(())
}

fn ensemble_plan(a: PlanArgs) -> Result<()> {
    let image = read_nifti(&a.image)?;
    let plan = plan_windows(image.grid(), a.window, a.overlap)?;
    plan.save(&a.out)?;
    if let (Some(dir), Some(pet), Some(ct)) = (&a.extract_dir, &a.pet, &a.ct) {
        create_dir(dir)?;
        let pet = read_nifti_as(pet, VolumeKind::PetSuv)?;
        let ct = read_nifti(ct)?;
        let written = par::map(&plan.origins, |&o| -> Result<()> {
            let stem = window_file_name(o);
            let stem = stem.trim_end_matches(".nii.gz");
            write_nifti(&plan.extract(&pet, o)?, dir.join(format!("{stem}_pet.nii.gz")))?;
            write_nifti(&plan.extract(&ct, o)?, dir.join(format!("{stem}_ct.nii.gz")))
        });
        written.into_iter().collect::<Result<Vec<_>>>()?;
    }
    println!(
        "{} windows of {:?} (stride {:?})",
        plan.origins.len(),
        plan.window,
        plan.stride
    );
    Ok(())
}

fn ensemble_blend(a: BlendArgs) -> Result<()> {
    let plan = WindowPlan::load(&a.plan)?;
    let windows = load_windows(&plan, &a.windows)?;
    let [_, fg] = blend(&plan, &windows, a.blend_mode)?;
    write_nifti(&fg, &a.out)
}

fn ensemble_average(a: AverageArgs) -> Result<()> {
    let avg = if a.logits {
        let members = a.inputs.iter().map(|p| Logits::read(p)).collect::<Result<Vec<_>>>()?;
        average_logits(&members)?
    } else {
        let members = a
            .inputs
            .iter()
            .map(|p| read_nifti_as(p, VolumeKind::Prob))
            .collect::<Result<Vec<_>>>()?;
        average_ensemble(&members)?
    };
    write_nifti(&avg, &a.out)
}

fn ensemble_binarize(a: BinarizeArgs) -> Result<()> {
    let prob = read_nifti_as(&a.input, VolumeKind::Prob)?;
    let mut mask: BinaryMask = binarize(&prob, a.threshold)?;
    if let Some(r) = &a.reference {
        let reference = read_nifti(r)?;
        mask = resample_to_reference(&mask, reference.grid())?;
    }
    write_nifti(&mask, &a.out)?;
    println!("{} foreground voxels", mask.count());
    Ok(())
}

fn rank(a: RankArgs) -> Result<()> {
    let subs = read_submissions(&a.input)?;
    let table = rank_submissions(&subs, a.ties)?;
    write_ranking(&table, &a.out)?;
    for (i, r) in table.iter().enumerate() {
        println!("{:>3}. {:<24} score {}", i + 1, r.name, r.final_score);
    }
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let records = read_metrics_csv(&a.metrics)?;
    let report = build_report(&records, &[], a.bins)?;
    write_json(&report, &a.out)?;
    if let Some(h) = &a.histograms {
        write_json(&histograms(&records, a.bins)?, h)?;
    }
    for row in &report.table {
        println!("{}", row.latex);
    }
    println!("{}", report.summary);
    Ok(())
}
