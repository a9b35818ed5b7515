//! Acceptance criteria. Each criterion prints one PASS/FAIL line; the
//! process exits non-zero if any fails.

mod common;

use std::error::Error as StdError;
use std::fs;
use std::panic;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use petseg::batch::{run_evaluate, run_pipeline, CaseManifest, EvaluateOptions, ManifestRow, PipelineOptions};
use petseg::components::{component_sizes, label_components, Connectivity};
use petseg::ensemble::{
    average_ensemble, binarize, plan_windows, plan_windows_with, sliding_window_inference, BlendMode, ConstantPredictor,
};
use petseg::losses::{
    focal_loss, gdfl, gdfl_gradient, generalized_dice_loss, loss_values_from_probs, LossConfig, PatchBatch,
};
use petseg::metrics::{aggregate, dsc, fnv, fpv, CaseMetrics, GroupBy, MeanStd, SummaryRow, Tracer};
use petseg::nifti::{read_mask, write_nifti};
use petseg::preprocess::{
    bq_to_suv, resample, resample_mask, resample_onto, resampled_grid, Interpolation, ResampleSpec, SuvParams,
    F18_HALF_LIFE_MIN,
};
use petseg::ranking::{rank_submissions, Submission, TieRule};
use petseg::synthetic::{phantom, random_blobs, random_mask, PhantomSpec};
use petseg::{BinaryMask, Grid, ScalarVolume, VolumeKind};

type Outcome = Result<String, Box<dyn StdError>>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+).into());
        }
    };
}

fn cube(n: usize, mm: f64) -> Grid {
    Grid::with_spacing([n; 3], [mm; 3]).expect("valid grid")
}

fn c01_metrics_oracle() -> Outcome {
    let start = Instant::now();
    let g = cube(24, 1.0);
    let mut worst = 0.0f64;
    for k in 0..200u64 {
        let gt = random_mask(g, 0.2, 2 * k);
        let pred = random_mask(g, 0.2, 2 * k + 1);
        let (od, ofp, ofn) = common::oracle_metrics(&gt, &pred, Connectivity::Face6);
        let d = dsc(&gt, &pred)?;
        let p = fpv(&gt, &pred, Connectivity::Face6)?;
        let n = fnv(&gt, &pred, Connectivity::Face6)?;
        worst = worst.max((d - od).abs()).max((p - ofp).abs()).max((n - ofn).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(worst <= 1e-12, "max |delta| = {worst:e}");
    ensure!(secs < 10.0, "took {secs:.2} s");
    Ok(format!("200 pairs, max |delta| = {worst:e}, {secs:.2} s"))
}

fn c02_hand_metrics() -> Outcome {
    let g = Grid::with_spacing([4; 3], [2.0; 3])?;
    // |G| = 3, |P| = 5, |G ∩ P| = 2
    let gt = BinaryMask::from_fn(g, |x, y, z| y == 0 && z == 0 && x < 3);
    let pred = BinaryMask::from_fn(g, |x, y, z| (y == 0 && z == 0 && x >= 1) || (y == 2 && z == 0 && x < 2));
    let d = dsc(&gt, &pred)?;
    ensure!(d == 0.5, "DSC {d}");

    // pred components: A (3 voxels, hits gt) and B (5 voxels, disjoint)
    let gt = BinaryMask::from_fn(g, |x, y, z| x == 0 && y == 0 && z == 0);
    let pred = BinaryMask::from_fn(g, |x, y, z| {
        (z == 0 && y == 0 && x < 3) || (z == 3 && (y == 3 || (y == 2 && x == 0)))
    });
    ensure!(pred.count() == 8, "fixture has {} pred voxels", pred.count());
    let p = fpv(&gt, &pred, Connectivity::Face6)?;
    ensure!((p - 0.04).abs() < 1e-15, "FPV {p}");

    // gt components of 4 (hit) and 2 (missed) voxels
    let gt = BinaryMask::from_fn(g, |x, y, z| (z == 0 && y == 0) || (z == 3 && y == 3 && x < 2));
    let pred = BinaryMask::from_fn(g, |x, y, z| z == 0 && y == 0 && x == 1);
    let n = fnv(&gt, &pred, Connectivity::Face6)?;
    ensure!((n - 0.016).abs() < 1e-15, "FNV {n}");
    Ok(format!("DSC {d}, FPV {p} ml, FNV {n} ml"))
}

fn c03_components() -> Outcome {
    let g = cube(24, 1.0);
    let mut counts = Vec::new();
    for k in 0..100u64 {
        let m = random_mask(g, 0.2, 1000 + k);
        let mut per_conn = Vec::new();
        for conn in Connectivity::ALL {
            let lib = label_components(&m, conn);
            let (oracle, n) = common::bfs_labels(&m, conn);
            ensure!(
                lib.n_components() == n,
                "mask {k} {conn:?}: {} vs {n} components",
                lib.n_components()
            );
            ensure!(
                common::same_partition(lib.data(), &oracle),
                "mask {k} {conn:?}: partition differs"
            );
            // both label in scan order, so the labels agree exactly
            ensure!(
                lib.data() == oracle.as_slice(),
                "mask {k} {conn:?}: label order differs"
            );
            ensure!(
                component_sizes(&lib).iter().sum::<usize>() == m.count(),
                "mask {k}: sizes do not sum"
            );
            per_conn.push(n);
        }
        ensure!(
            per_conn[0] >= per_conn[1] && per_conn[1] >= per_conn[2],
            "mask {k}: counts {per_conn:?}"
        );
        counts.push(per_conn);
    }
    let mean = |i: usize| counts.iter().map(|c| c[i]).sum::<usize>() as f64 / counts.len() as f64;
    Ok(format!(
        "100 masks x 3 connectivities; mean components 6/18/26 = {:.1}/{:.1}/{:.1}",
        mean(0),
        mean(1),
        mean(2)
    ))
}

fn c04_loss_values() -> Outcome {
    let cfg = LossConfig::default();
    let mut fg = [0.0; 8];
    fg[3] = 1.0;
    let bg: Vec<f64> = fg.iter().map(|f| 1.0 - f).collect();
    let onehot: Vec<f64> = bg.iter().chain(&fg).copied().collect();
    let perfect = loss_values_from_probs(1, &onehot, &onehot, &cfg)?;
    ensure!((perfect.gdl - 0.499997).abs() <= 1e-4, "GDL {}", perfect.gdl);

    let single = PatchBatch::from_foreground(1, vec![0.0, 0.0], &[1])?;
    let fl = focal_loss(&single, &cfg)?;
    ensure!((fl - 17.32868).abs() <= 1e-4, "FL {fl}");

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let logits: Vec<f64> = (0..2 * 2 * 27).map(|_| rng.random_range(-4.0..4.0)).collect();
        let mask: Vec<u8> = (0..2 * 27).map(|_| u8::from(rng.random_bool(0.3))).collect();
        let b = PatchBatch::from_foreground(2, logits, &mask)?;
        let total = gdfl(&b, &cfg)?;
        let sum = generalized_dice_loss(&b, &cfg)? + focal_loss(&b, &cfg)?;
        worst = worst.max((total - sum).abs());
    }
    ensure!(worst <= 1e-12, "GDFL - (GDL + FL) = {worst:e}");
    Ok(format!("GDL {:.6}, FL {fl:.5}, |GDFL - sum| <= {worst:e}", perfect.gdl))
}

fn c05_gradient_check() -> Outcome {
    let start = Instant::now();
    let cfg = LossConfig::default();
    let h = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = 2 * 2 * 64;
        let logits: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mask: Vec<u8> = (0..2 * 64).map(|_| u8::from(rng.random_bool(0.25))).collect();
        let b = PatchBatch::from_foreground(2, logits.clone(), &mask)?;
        let grad = gdfl_gradient(&b, &cfg)?;
        for k in 0..n {
            let mut up = logits.clone();
            up[k] += h;
            let mut down = logits.clone();
            down[k] -= h;
            let fd = (gdfl(&b.with_logits(up)?, &cfg)? - gdfl(&b.with_logits(down)?, &cfg)?) / (2.0 * h);
            let rel = (grad[k] - fd).abs() / grad[k].abs().max(fd.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(worst <= 1e-4, "max relative error {worst:e}");
    ensure!(secs < 30.0, "took {secs:.2} s");
    Ok(format!(
        "20 batches of 2x4^3, max relative error {worst:e}, {secs:.2} s"
    ))
}

fn c06_resampling() -> Outcome {
    let src = Grid::new([10, 12, 9], [2.0; 3], [-7.0, 3.0, 11.0])?;
    let (a, b) = ([0.3, -1.7, 2.2], 5.0);
    let field = |p: [f64; 3]| a[0] * p[0] + a[1] * p[1] + a[2] * p[2] + b;
    let world = |g: &Grid, i: [usize; 3]| [0, 1, 2].map(|k| g.origin[k] + i[k] as f64 * g.spacing[k]);
    let vol = ScalarVolume::from_fn(src, VolumeKind::PetSuv, |x, y, z| field(world(&src, [x, y, z])))?;
    let out = resample(&vol, &ResampleSpec::isotropic(1.0, Interpolation::Trilinear))?;
    let dst = *out.grid();
    let mut worst = 0.0f64;
    let mut checked = 0;
    for z in 0..dst.dims[2] {
        for y in 0..dst.dims[1] {
            for x in 0..dst.dims[0] {
                let w = world(&dst, [x, y, z]);
                let inside = (0..3).all(|k| w[k] <= src.origin[k] + (src.dims[k] - 1) as f64 * src.spacing[k]);
                if inside {
                    worst = worst.max((out.get(x, y, z) - field(w)).abs());
                    checked += 1;
                }
            }
        }
    }
    ensure!(worst <= 1e-6, "affine error {worst:e}");

    let labels = ScalarVolume::from_fn(src, VolumeKind::PetSuv, |x, y, z| [0.0, 3.0, 7.0][(x + 2 * y + z) % 3])?;
    let label_set = |v: &ScalarVolume| {
        let mut s: Vec<i64> = v.data().iter().map(|&x| x as i64).collect();
        s.sort_unstable();
        s.dedup();
        s
    };
    let up = resample_onto(&labels, &resampled_grid(&src, [1.0; 3])?, Interpolation::Nearest)?;
    ensure!(label_set(&up) == label_set(&labels), "label set {:?}", label_set(&up));
    ensure!(up.data().iter().all(|v| v.fract() == 0.0), "non-integer label after NN");

    let g2 = Grid::new([17, 11, 14], [2.0; 3], [4.0, -2.0, 0.0])?;
    for k in 0..20 {
        let m = if k % 2 == 0 {
            random_mask(g2, 0.3, 600 + k)
        } else {
            random_blobs(g2, 5, 6, 600 + k)
        };
        let back = resample_mask(&resample_mask(&m, [1.0; 3])?, [2.0; 3])?;
        ensure!(back == m, "2 -> 1 -> 2 mm round trip changed mask {k}");
    }
    Ok(format!(
        "affine max error {worst:e} over {checked} interior voxels; NN label set kept; 20 round trips exact"
    ))
}

fn c07_suv() -> Outcome {
    let g = cube(1, 4.0);
    let params = SuvParams {
        injected_dose: 3.7e8,
        decay_interval_min: F18_HALF_LIFE_MIN,
        half_life_min: F18_HALF_LIFE_MIN,
        patient_weight_kg: 70.0,
    };
    ensure!(
        (params.decayed_dose() - 1.85e8).abs() < 1e-3,
        "decayed dose {}",
        params.decayed_dose()
    );
    let suv = bq_to_suv(&ScalarVolume::filled(g, 2642.857, VolumeKind::PetBqml)?, &params)?.data()[0];
    ensure!((suv - 1.0).abs() <= 1e-6, "SUV {suv}");

    let g = Grid::with_spacing([5, 4, 3], [2.0; 3])?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let values = (0..g.len()).map(|_| rng.random_range(1.0..20000.0)).collect();
    let pet = ScalarVolume::new(g, values, VolumeKind::PetBqml)?;
    let now = bq_to_suv(
        &pet,
        &SuvParams {
            decay_interval_min: 0.0,
            ..params
        },
    )?;
    let later = bq_to_suv(&pet, &params)?;
    let worst = now
        .data()
        .iter()
        .zip(later.data())
        .map(|(a, b)| (b - 2.0 * a).abs() / a)
        .fold(0.0f64, f64::max);
    ensure!(worst <= 1e-12, "doubling off by relative {worst:e}");
    Ok(format!(
        "SUV {suv:.9}; one half-life later every SUV doubles (rel. error {worst:e})"
    ))
}

fn c08_sliding_window() -> Outcome {
    let predictor = ConstantPredictor {
        background: 0.3,
        foreground: 1.1,
    };
    let expected = 1.0 / (1.0 + (-(1.1f64 - 0.3)).exp());
    let mut notes = Vec::new();
    for dims in [[128, 128, 128], [193, 193, 193], [200, 150, 300]] {
        let g = Grid::with_spacing(dims, [2.0; 3])?;
        let plan = plan_windows(&g, 192, 0.5)?;
        ensure!(plan.covers_all(), "{dims:?}: plan leaves voxels uncovered");
        let pet = ScalarVolume::filled(g, 1.0, VolumeKind::PetSuv)?;
        let ct = ScalarVolume::filled(g, 0.5, VolumeKind::CtNorm)?;
        for mode in [BlendMode::Uniform, BlendMode::Gaussian] {
            let [bg, fg] = sliding_window_inference(&pet, &ct, &plan, &predictor, mode)?;
            ensure!(fg.dims() == dims, "{dims:?}: output dims {:?}", fg.dims());
            let worst = fg.data().iter().map(|p| (p - expected).abs()).fold(0.0f64, f64::max);
            ensure!(worst <= 1e-12, "{dims:?} {mode:?}: deviation {worst:e}");
            let sum = bg
                .data()
                .iter()
                .zip(fg.data())
                .map(|(a, b)| (a + b - 1.0).abs())
                .fold(0.0f64, f64::max);
            ensure!(sum <= 1e-12, "{dims:?} {mode:?}: class probabilities do not sum to 1");
        }
        notes.push(format!("{dims:?}: {} windows", plan.origins.len()));
    }
    let plan = plan_windows_with(&Grid::with_spacing([288; 3], [1.0; 3])?, [192; 3], 0.5)?;
    let mut xs: Vec<usize> = plan.origins.iter().map(|o| o[0]).collect();
    xs.sort_unstable();
    xs.dedup();
    ensure!(xs == [0, 96], "288 origins {xs:?}");
    ensure!(plan.origins.len() == 8, "288^3 plan has {} windows", plan.origins.len());
    Ok(format!("{}; 288 -> origins {{0, 96}}", notes.join(", ")))
}

fn c09_ensemble() -> Outcome {
    let g = Grid::with_spacing([10, 4, 4], [2.0; 3])?;
    let members: Vec<ScalarVolume> = (0..5)
        .map(|k| ScalarVolume::from_fn(g, VolumeKind::Prob, |x, _, _| f64::from(x / 2 == k)))
        .collect::<petseg::Result<_>>()?;
    let avg = average_ensemble(&members)?;
    let worst = avg.data().iter().map(|p| (p - 0.2).abs()).fold(0.0f64, f64::max);
    ensure!(worst <= 1e-15, "average deviates from 0.2 by {worst:e}");

    let half = ScalarVolume::filled(g, 0.5, VolumeKind::Prob)?;
    ensure!(binarize(&half, 0.5)?.is_all_background(), "0.5 became foreground");
    let above = ScalarVolume::filled(g, 0.5 + 1e-12, VolumeKind::Prob)?;
    ensure!(
        binarize(&above, 0.5)?.count() == g.len(),
        "0.5 + 1e-12 is not foreground"
    );
    ensure!(
        binarize(&avg, 0.5)?.is_all_background(),
        "0.2 map thresholded to foreground"
    );
    Ok("5 disjoint one-hot maps average to 0.2; exactly 0.5 stays background".into())
}

fn c10_ranking() -> Outcome {
    let sub = |name: &str, d, p, n| Submission {
        name: name.into(),
        mean_dsc: d,
        mean_fpv_ml: p,
        mean_fnv_ml: n,
    };
    let table = rank_submissions(
        &[
            sub("S1", 0.7, 5.0, 5.0),
            sub("S2", 0.6, 3.0, 6.0),
            sub("S3", 0.5, 4.0, 4.0),
        ],
        TieRule::Average,
    )?;
    let got: Vec<(&str, f64)> = table.iter().map(|r| (r.name.as_str(), r.final_score)).collect();
    ensure!(got == [("S1", 1.75), ("S2", 2.0), ("S3", 2.25)], "table {got:?}");

    let tied = rank_submissions(&[sub("A", 0.6, 2.0, 3.0), sub("B", 0.6, 2.0, 3.0)], TieRule::Average)?;
    for r in &tied {
        ensure!(
            [r.rank_dsc, r.rank_fpv, r.rank_fnv] == [1.5; 3] && r.final_score == 1.5,
            "tie row {r:?}"
        );
    }
    Ok("scores 1.75 / 2.0 / 2.25, winner S1; identical submissions share rank 1.5".into())
}

fn phantom_case(dir: &Path, spec: &PhantomSpec, id: &str) -> Result<ManifestRow, Box<dyn StdError>> {
    let ph = phantom(spec)?;
    let (pet, ct, gt) = (
        dir.join(format!("{id}_pet.nii.gz")),
        dir.join(format!("{id}_ct.nii.gz")),
        dir.join(format!("{id}_gt.nii.gz")),
    );
    write_nifti(&ph.pet_bqml, &pet)?;
    write_nifti(&ph.ct_hu, &ct)?;
    write_nifti(&ph.mask, &gt)?;
    Ok(ManifestRow {
        case_id: id.into(),
        tracer: Some("FDG".into()),
        fold: Some(0),
        gt_path: gt,
        pred_path: None,
        pet_path: Some(pet),
        ct_path: Some(ct),
        injected_dose: Some(ph.suv.injected_dose),
        decay_interval_min: Some(ph.suv.decay_interval_min),
        half_life_min: Some(ph.suv.half_life_min),
        patient_weight_kg: Some(ph.suv.patient_weight_kg),
    })
}

fn c11_phantom_end_to_end() -> Outcome {
    let tmp = tempfile::tempdir()?;
    let out = tmp.path().join("pre");
    fs::create_dir_all(&out)?;
    let mut rows = Vec::new();
    let mut lesions = 0;
    for (id, spec) in [
        ("lesions", PhantomSpec::whole_body()),
        ("control", PhantomSpec::negative_control()),
    ] {
        let row = phantom_case(tmp.path(), &spec, id)?;
        let done = run_pipeline(&row, &PipelineOptions::default(), &out)?;
        let mask_path = done.mask.ok_or("pipeline wrote no mask")?;
        let mask = read_mask(&mask_path)?;
        ensure!(
            mask.grid().spacing == [2.0; 3],
            "{id}: spacing {:?}",
            mask.grid().spacing
        );
        if id == "lesions" {
            lesions = label_components(&mask, Connectivity::Face6).n_components();
        } else {
            ensure!(mask.is_all_background(), "negative control gained foreground");
        }
        rows.push(ManifestRow {
            pred_path: Some(mask_path.clone()),
            gt_path: mask_path,
            ..row
        });
    }
    ensure!(lesions == 3, "preprocessed phantom has {lesions} lesions");
    let outcome = run_evaluate(&CaseManifest::new(rows)?, &EvaluateOptions::default());
    ensure!(outcome.all_succeeded(), "failures {:?}", outcome.failures);
    for r in &outcome.records {
        ensure!(r.dsc == 1.0 && r.fpv_ml == 0.0 && r.fnv_ml == 0.0, "{r:?}");
    }
    Ok(format!(
        "{} cases (3-lesion and negative control): DSC 1, FPV 0, FNV 0",
        outcome.records.len()
    ))
}

fn c12_report_fixtures() -> Outcome {
    for cell in ["0.6303 ±0.2563", "6.4043 ±15.4433", "17.9854 ±113.9501"] {
        let ms: MeanStd = cell.parse()?;
        ensure!(ms.to_string() == cell, "{cell} re-emitted as {ms}");
    }
    let latex = "0.6303 {\\scriptsize $\\pm$0.2563}";
    let ms: MeanStd = "0.6303 ±0.2563".parse()?;
    ensure!(ms.to_latex() == latex, "LaTeX cell {}", ms.to_latex());

    let rec = |id: &str, d: f64| CaseMetrics {
        case_id: id.into(),
        tracer: Tracer::Fdg,
        fold: Some(0),
        dsc: d,
        fpv_ml: 1.0,
        fnv_ml: 2.0,
    };
    let rows = aggregate(&[rec("a", 0.5), rec("b", 0.7)], GroupBy::Fold)?;
    let cells = rows[0].cells();
    ensure!(cells[0] == "0.6000 ±0.1414", "aggregated cell {}", cells[0]);
    ensure!(cells[1] == "2.0000 ±0.0000", "aggregated cell {}", cells[1]);

    let line = "Average: 0.6687 / 10.9522 / 2.9684";
    let row: SummaryRow = line.parse()?;
    ensure!(row.to_string() == line, "re-emitted {row}");
    ensure!(
        (row.dsc, row.fnv_ml, row.fpv_ml) == (0.6687, 10.9522, 2.9684),
        "parsed {row:?}"
    );
    ensure!(
        row.to_latex() == "Average & 0.6687 & 10.9522 & 2.9684 \\\\",
        "LaTeX {}",
        row.to_latex()
    );
    Ok(format!("cells \"{}\"; fixture \"{line}\" round-trips", cells[0]))
}

fn c13_determinism() -> Outcome {
    let tmp = tempfile::tempdir()?;
    let (gt_dir, pred_dir) = (tmp.path().join("gt"), tmp.path().join("pred"));
    fs::create_dir_all(&gt_dir)?;
    fs::create_dir_all(&pred_dir)?;
    let g = Grid::with_spacing([20, 18, 16], [2.0, 2.0, 3.0])?;
    let mut manifest = String::from("case_id,tracer,fold,gt_path,pred_path\n");
    for k in 0..24u64 {
        let name = format!("case{k:02}.nii.gz");
        write_nifti(&random_blobs(g, 6, 5, 10 * k), gt_dir.join(&name))?;
        let pred = if k % 7 == 3 {
            BinaryMask::empty(g)
        } else {
            random_blobs(g, 6, 5, 10 * k + 1)
        };
        write_nifti(&pred, pred_dir.join(&name))?;
        let tracer = if k % 2 == 0 { "FDG" } else { "PSMA" };
        manifest.push_str(&format!("case{k:02},{tracer},{},gt/{name},pred/{name}\n", k % 5));
    }
    let manifest_path = tmp.path().join("cases.csv");
    fs::write(&manifest_path, manifest)?;

    type Files = (Vec<u8>, Vec<u8>);
    let run = |jobs: &str| -> Result<Files, Box<dyn StdError>> {
        let out = tmp.path().join(format!("out{jobs}"));
        let status = Command::new(env!("CARGO_BIN_EXE_petseg"))
            .args(["evaluate", "--manifest"])
            .arg(&manifest_path)
            .arg("--out")
            .arg(&out)
            .args(["--jobs", jobs])
            .output()?;
        ensure!(
            status.status.success(),
            "evaluate --jobs {jobs}: {}",
            String::from_utf8_lossy(&status.stderr)
        );
        Ok((fs::read(out.join("metrics.csv"))?, fs::read(out.join("report.json"))?))
    };
    let (m1, r1) = run("1")?;
    let (m8, r8) = run("8")?;
    ensure!(m1 == m8, "metrics.csv differs between --jobs 1 and --jobs 8");
    ensure!(r1 == r8, "report.json differs between --jobs 1 and --jobs 8");
    Ok(format!(
        "24 cases; metrics.csv ({} bytes) and report.json identical",
        m1.len()
    ))
}

fn main() {
    let criteria: [Criterion; 13] = [
        ("metrics match brute-force oracle", c01_metrics_oracle),
        ("hand-derived DSC / FPV / FNV", c02_hand_metrics),
        ("connected components vs flood fill", c03_components),
        ("loss values", c04_loss_values),
        ("GDFL gradient vs finite differences", c05_gradient_check),
        ("resampling exactness", c06_resampling),
        ("SUV arithmetic", c07_suv),
        ("sliding-window coverage and invariance", c08_sliding_window),
        ("ensemble average and strict threshold", c09_ensemble),
        ("ranking table and ties", c10_ranking),
        ("phantom preprocess -> evaluate", c11_phantom_end_to_end),
        ("report formatting fixtures", c12_report_fixtures),
        ("evaluate determinism across --jobs", c13_determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let total = criteria.len();
    let mut failed = 0;
    for (k, (name, check)) in criteria.into_iter().enumerate() {
        let result = panic::catch_unwind(check).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}").into())
        });
        match result {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", k + 1),
            Err(e) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {e}", k + 1);
            }
        }
    }
    println!("{} of {total} criteria passed", total - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
