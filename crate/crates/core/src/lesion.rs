//! Lesion burden: per-lesion metabolic tumour volume and SUV statistics,
//! patient-level totals (TMTV, TLG, lesion count) and cohort distributions.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::components::{label_components, Connectivity};
use crate::error::{Error, Result};
use crate::metrics::{Histogram, Tracer};
use crate::par;
use crate::volume::{BinaryMask, ScalarVolume, VolumeKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LesionRow {
    pub label: u32,
    pub n_voxels: usize,
    pub mtv_ml: f64,
    pub suv_mean: f64,
    pub suv_max: f64,
}

impl LesionRow {
    /// Lesion glycolysis, `mtv · suv_mean`.
    pub fn tlg(&self) -> f64 {
        self.mtv_ml * self.suv_mean
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LesionReport {
    pub lesions: Vec<LesionRow>,
    pub tmtv_ml: f64,
    pub tlg_ml: f64,
    pub n_lesions: usize,
}

impl LesionReport {
    fn from_rows(lesions: Vec<LesionRow>) -> Self {
        let tmtv_ml = lesions.iter().map(|l| l.mtv_ml).sum();
        let tlg_ml = lesions.iter().map(LesionRow::tlg).sum();
        LesionReport {
            n_lesions: lesions.len(),
            lesions,
            tmtv_ml,
            tlg_ml,
        }
    }

    /// Total row: summed volume, volume-weighted mean SUV, overall max.
    pub fn total_row(&self) -> LesionRow {
        let n_voxels = self.lesions.iter().map(|l| l.n_voxels).sum();
        let suv_mean = if self.tmtv_ml > 0.0 {
            self.tlg_ml / self.tmtv_ml
        } else {
            0.0
        };
        let suv_max = self.lesions.iter().map(|l| l.suv_max).fold(0.0, f64::max);
        LesionRow {
            label: 0,
            n_voxels,
            mtv_ml: self.tmtv_ml,
            suv_mean,
            suv_max,
        }
    }
}

/// Per-lesion statistics for the connected components of `mask`.
pub fn lesion_stats(mask: &BinaryMask, suv: &ScalarVolume, conn: Connectivity) -> Result<LesionReport> {
    if suv.kind() != VolumeKind::PetSuv {
        return Err(Error::Kind {
            expected: VolumeKind::PetSuv.to_string(),
            found: suv.kind().to_string(),
        });
    }
    mask.grid()
        .ensure_same_sampling(suv.grid(), "lesion mask and SUV volume")?;
    let labels = label_components(mask, conn);
    let n = labels.n_components();
    let mut count = vec![0usize; n];
    let mut sum = vec![0.0f64; n];
    let mut max = vec![f64::NEG_INFINITY; n];
    for (&l, &v) in labels.data().iter().zip(suv.data()) {
        if l != 0 {
            let k = l as usize - 1;
            count[k] += 1;
            sum[k] += v;
            max[k] = max[k].max(v);
        }
    }
    let voxel_ml = mask.grid().voxel_volume_ml();
    let rows = (0..n)
        .map(|k| LesionRow {
            label: k as u32 + 1,
            n_voxels: count[k],
            mtv_ml: count[k] as f64 * voxel_ml,
            suv_mean: sum[k] / count[k] as f64,
            suv_max: max[k],
        })
        .collect();
    Ok(LesionReport::from_rows(rows))
}

const CSV_HEADER: [&str; 6] = ["label", "n_voxels", "mtv_ml", "suv_mean", "suv_max", "tlg_ml"];

/// Write lesion rows followed by a `total` row.
pub fn write_lesion_csv(report: &LesionReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_HEADER)?;
    let fmt_row = |label: String, r: &LesionRow| {
        vec![
            label,
            r.n_voxels.to_string(),
            r.mtv_ml.to_string(),
            r.suv_mean.to_string(),
            r.suv_max.to_string(),
            r.tlg().to_string(),
        ]
    };
    for r in &report.lesions {
        w.write_record(fmt_row(r.label.to_string(), r))?;
    }
    let mut total = fmt_row("total".into(), &report.total_row());
    total[5] = report.tlg_ml.to_string();
    w.write_record(total)?;
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Read a file written by [`write_lesion_csv`]; the total row is recomputed.
pub fn read_lesion_csv(path: &Path) -> Result<LesionReport> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        if field(0) == "total" {
            continue;
        }
        let num = |i: usize| -> Result<f64> {
            field(i).parse().map_err(|_| {
                Error::Data(format!(
                    "{}: bad {} value {:?}",
                    path.display(),
                    CSV_HEADER[i],
                    field(i)
                ))
            })
        };
        rows.push(LesionRow {
            label: num(0)? as u32,
            n_voxels: num(1)? as usize,
            mtv_ml: num(2)?,
            suv_mean: num(3)?,
            suv_max: num(4)?,
        });
    }
    Ok(LesionReport::from_rows(rows))
}

/// One case of a cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortCase {
    pub case_id: String,
    pub tracer: Tracer,
    pub report: LesionReport,
}

/// Pooled lesion-level and patient-level values for one tracer.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TracerDistributions {
    pub n_cases: usize,
    pub mtv_ml: Vec<f64>,
    pub suv_mean: Vec<f64>,
    pub suv_max: Vec<f64>,
    pub tmtv_ml: Vec<f64>,
    pub tlg_ml: Vec<f64>,
    pub n_lesions: Vec<f64>,
}

impl TracerDistributions {
    pub fn pooled_lesions(&self) -> usize {
        self.mtv_ml.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortMeasures {
    pub cases: Vec<CohortCase>,
    pub by_tracer: BTreeMap<Tracer, TracerDistributions>,
}

/// Histograms of the six measures for one tracer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LesionHistograms {
    pub n_cases: usize,
    pub n_lesions_total: usize,
    pub mtv_ml: Histogram,
    pub suv_mean: Histogram,
    pub suv_max: Histogram,
    pub tmtv_ml: Histogram,
    pub tlg_ml: Histogram,
    pub n_lesions: Histogram,
}

impl CohortMeasures {
    pub fn from_cases(cases: Vec<CohortCase>) -> Result<Self> {
        if cases.is_empty() {
            return Err(Error::Domain("cohort measures need at least one case".into()));
        }
        let mut by_tracer: BTreeMap<Tracer, TracerDistributions> = BTreeMap::new();
        for c in &cases {
            let d = by_tracer.entry(c.tracer).or_default();
            d.n_cases += 1;
            for l in &c.report.lesions {
                d.mtv_ml.push(l.mtv_ml);
                d.suv_mean.push(l.suv_mean);
                d.suv_max.push(l.suv_max);
            }
            d.tmtv_ml.push(c.report.tmtv_ml);
            d.tlg_ml.push(c.report.tlg_ml);
            d.n_lesions.push(c.report.n_lesions as f64);
        }
        Ok(CohortMeasures { cases, by_tracer })
    }

    /// Per-tracer histograms; each measure uses bin edges shared by all
    /// tracers.
    pub fn histograms(&self, bins: usize) -> BTreeMap<Tracer, LesionHistograms> {
        type Col = fn(&TracerDistributions) -> &Vec<f64>;
        let range = |f: Col| {
            let (lo, hi) = self
                .by_tracer
                .values()
                .flat_map(|d| f(d).iter())
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            if lo.is_finite() {
                (lo, hi)
            } else {
                (0.0, 1.0)
            }
        };
        let cols: [Col; 6] = [
            |d| &d.mtv_ml,
            |d| &d.suv_mean,
            |d| &d.suv_max,
            |d| &d.tmtv_ml,
            |d| &d.tlg_ml,
            |d| &d.n_lesions,
        ];
        let ranges = cols.map(range);
        self.by_tracer
            .iter()
            .map(|(&t, d)| {
                let h = |k: usize| Histogram::with_range(cols[k](d), bins, ranges[k].0, ranges[k].1);
                (
                    t,
                    LesionHistograms {
                        n_cases: d.n_cases,
                        n_lesions_total: d.pooled_lesions(),
                        mtv_ml: h(0),
                        suv_mean: h(1),
                        suv_max: h(2),
                        tmtv_ml: h(3),
                        tlg_ml: h(4),
                        n_lesions: h(5),
                    },
                )
            })
            .collect()
    }
}

/// Input case for [`cohort_measures`].
#[derive(Debug, Clone)]
pub struct CohortInput {
    pub case_id: String,
    pub tracer: Tracer,
    pub mask: BinaryMask,
    pub suv: ScalarVolume,
}

/// Lesion statistics for every case (in parallel), pooled per tracer.
pub fn cohort_measures(cases: &[CohortInput], conn: Connectivity) -> Result<CohortMeasures> {
    if cases.is_empty() {
        return Err(Error::Domain("cohort measures need at least one case".into()));
    }
    let reports = par::map(cases, |c| lesion_stats(&c.mask, &c.suv, conn));
    let mut out = Vec::with_capacity(cases.len());
    for (c, r) in cases.iter().zip(reports) {
        out.push(CohortCase {
            case_id: c.case_id.clone(),
            tracer: c.tracer,
            report: r.map_err(|e| Error::Data(format!("case {}: {e}", c.case_id)))?,
        });
    }
    CohortMeasures::from_cases(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Grid;

    fn grid() -> Grid {
        Grid::with_spacing([20, 4, 4], [2.0; 3]).unwrap()
    }

    fn two_lesions() -> (BinaryMask, ScalarVolume) {
        // lesion A: x in 0..10 on row (0,0) with SUV 4; lesion B: x in 12..17 with SUV 2
        let mask = BinaryMask::from_fn(grid(), |x, y, z| y == 0 && z == 0 && (x < 10 || (12..17).contains(&x)));
        let suv = ScalarVolume::from_fn(grid(), VolumeKind::PetSuv, |x, _, _| if x < 11 { 4.0 } else { 2.0 }).unwrap();
        (mask, suv)
    }

    #[test]
    fn empty_mask_gives_zero_rollups() {
        let suv = ScalarVolume::filled(grid(), 1.0, VolumeKind::PetSuv).unwrap();
        let r = lesion_stats(&BinaryMask::empty(grid()), &suv, Connectivity::Face6).unwrap();
        assert_eq!((r.n_lesions, r.tmtv_ml, r.tlg_ml), (0, 0.0, 0.0));
        assert!(r.lesions.is_empty());
    }

    #[test]
    fn single_lesion_hand_values() {
        let mask = BinaryMask::from_fn(grid(), |x, y, z| y == 0 && z == 0 && x < 10);
        let suv = ScalarVolume::filled(grid(), 4.0, VolumeKind::PetSuv).unwrap();
        let r = lesion_stats(&mask, &suv, Connectivity::Face6).unwrap();
        assert_eq!(r.n_lesions, 1);
        let l = &r.lesions[0];
        assert!((l.mtv_ml - 0.08).abs() < 1e-12);
        assert_eq!((l.suv_mean, l.suv_max), (4.0, 4.0));
        assert!((r.tlg_ml - 0.32).abs() < 1e-12);
    }

    #[test]
    fn two_lesion_rollup() {
        let (mask, suv) = two_lesions();
        let r = lesion_stats(&mask, &suv, Connectivity::Face6).unwrap();
        assert_eq!(r.n_lesions, 2);
        assert!((r.tmtv_ml - 0.12).abs() < 1e-12);
        assert!((r.tlg_ml - 0.40).abs() < 1e-12);
        let total = r.total_row();
        assert!((total.suv_mean - 0.40 / 0.12).abs() < 1e-12);
        assert_eq!(total.suv_max, 4.0);
    }

    #[test]
    fn rejects_wrong_kind_and_shape() {
        let (mask, suv) = two_lesions();
        let ct = suv.clone().with_kind(VolumeKind::CtHu).unwrap();
        assert!(matches!(
            lesion_stats(&mask, &ct, Connectivity::Face6),
            Err(Error::Kind { .. })
        ));
        let other = ScalarVolume::filled(
            Grid::with_spacing([2, 2, 2], [2.0; 3]).unwrap(),
            1.0,
            VolumeKind::PetSuv,
        )
        .unwrap();
        assert!(matches!(
            lesion_stats(&mask, &other, Connectivity::Face6),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn csv_round_trip() {
        let (mask, suv) = two_lesions();
        let r = lesion_stats(&mask, &suv, Connectivity::Face6).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("lesions.csv");
        write_lesion_csv(&r, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.lines().last().unwrap().starts_with("total,15,"));
        assert_eq!(read_lesion_csv(&p).unwrap(), r);
    }

    #[test]
    fn cohort_groups_by_tracer() {
        let (mask, suv) = two_lesions();
        let mk = |id: &str, tracer| CohortInput {
            case_id: id.into(),
            tracer,
            mask: mask.clone(),
            suv: suv.clone(),
        };
        let c = cohort_measures(
            &[mk("a", Tracer::Fdg), mk("b", Tracer::Psma), mk("c", Tracer::Fdg)],
            Connectivity::Face6,
        )
        .unwrap();
        assert_eq!(c.by_tracer.len(), 2);
        assert_eq!(c.by_tracer[&Tracer::Fdg].pooled_lesions(), 4);
        let h = c.histograms(5);
        assert_eq!(h[&Tracer::Fdg].mtv_ml.edges, h[&Tracer::Psma].mtv_ml.edges);
        assert_eq!(h[&Tracer::Psma].n_lesions.counts.iter().sum::<usize>(), 1);
        assert!(cohort_measures(&[], Connectivity::Face6).is_err());
    }
}
