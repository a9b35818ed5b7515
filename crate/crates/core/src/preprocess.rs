//! Deterministic preprocessing: SUV conversion, CT windowing, body cropping
//! and resampling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp;
use crate::par;
use crate::volume::{BinaryMask, Grid, ScalarVolume, VolumeKind};

/// CT window applied before min-max normalization, in HU.
pub const CT_CLIP_HU: (f64, f64) = (-1024.0, 1024.0);

/// Fluorine-18 half-life in minutes.
pub const F18_HALF_LIFE_MIN: f64 = 109.77;
/// Gallium-68 half-life in minutes.
pub const GA68_HALF_LIFE_MIN: f64 = 67.71;

/// Inputs for body-weight SUV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuvParams {
    /// Injected activity in Bq, at injection time.
    pub injected_dose: f64,
    /// Minutes from injection to scan start.
    pub decay_interval_min: f64,
    pub half_life_min: f64,
    pub patient_weight_kg: f64,
}

impl SuvParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.injected_dose > 0.0
            && self.half_life_min > 0.0
            && self.patient_weight_kg > 0.0
            && self.decay_interval_min >= 0.0
            && [
                self.injected_dose,
                self.decay_interval_min,
                self.half_life_min,
                self.patient_weight_kg,
            ]
            .iter()
            .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid SUV parameters {self:?}")))
        }
    }

    /// Injected dose decayed to scan start, in Bq.
    pub fn decayed_dose(&self) -> f64 {
        self.injected_dose * (-self.decay_interval_min / self.half_life_min).exp2()
    }

    /// Multiplier taking Bq/ml to SUV: `1000 * W_kg / decayed_dose`.
    pub fn suv_factor(&self) -> f64 {
        1000.0 * self.patient_weight_kg / self.decayed_dose()
    }
}

fn require_kind(vol: &ScalarVolume, expected: VolumeKind) -> Result<()> {
    if vol.kind() == expected {
        Ok(())
    } else {
        Err(Error::Kind {
            expected: expected.to_string(),
            found: vol.kind().to_string(),
        })
    }
}

/// Convert PET activity (Bq/ml) to body-weight SUV with the dose decayed
/// from injection to scan start.
pub fn bq_to_suv(vol: &ScalarVolume, params: &SuvParams) -> Result<ScalarVolume> {
    require_kind(vol, VolumeKind::PetBqml)?;
    params.validate()?;
    if let Some(i) = vol.data().iter().position(|v| !v.is_finite()) {
        return Err(Error::Data(format!(
            "non-finite activity {} at voxel {:?}",
            vol.data()[i],
            vol.grid().coords(i)
        )));
    }
    let decayed_per_gram = params.decayed_dose() / (1000.0 * params.patient_weight_kg);
    let data = vol.data().iter().map(|&c| c / decayed_per_gram).collect();
    ScalarVolume::new(*vol.grid(), data, VolumeKind::PetSuv)
}

/// Clip CT to [-1024, 1024] HU and rescale linearly onto [0, 1].
pub fn clip_normalize_ct(vol: &ScalarVolume) -> Result<ScalarVolume> {
    require_kind(vol, VolumeKind::CtHu)?;
    let (lo, hi) = CT_CLIP_HU;
    let data = vol.data().iter().map(|&x| (x.clamp(lo, hi) - lo) / (hi - lo)).collect();
    ScalarVolume::new(*vol.grid(), data, VolumeKind::CtNorm)
}

/// Foreground thresholds for the body box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyThresholds {
    /// Voxels with CT strictly above this (HU) count as body.
    pub ct_hu: f64,
    /// Voxels with SUV strictly above this count as body.
    pub suv: f64,
}

impl Default for BodyThresholds {
    fn default() -> Self {
        BodyThresholds {
            ct_hu: -800.0,
            suv: 0.1,
        }
    }
}

/// Inclusive voxel box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl BoundingBox {
    pub fn full(dims: [usize; 3]) -> Self {
        BoundingBox {
            lo: [0; 3],
            hi: [dims[0] - 1, dims[1] - 1, dims[2] - 1],
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        [0, 1, 2].map(|a| self.hi[a] - self.lo[a] + 1)
    }

    pub fn contains(&self, p: [usize; 3]) -> bool {
        (0..3).all(|a| self.lo[a] <= p[a] && p[a] <= self.hi[a])
    }
}

/// Tightest box around voxels with CT > `ct_hu` or SUV > `suv`. Falls back
/// to the full volume when nothing qualifies.
pub fn body_bounding_box(ct: &ScalarVolume, pet: &ScalarVolume, thresholds: &BodyThresholds) -> Result<BoundingBox> {
    require_kind(ct, VolumeKind::CtHu)?;
    require_kind(pet, VolumeKind::PetSuv)?;
    if ct.dims() != pet.dims() {
        return Err(Error::Shape(format!(
            "CT dims {:?} differ from PET dims {:?}",
            ct.dims(),
            pet.dims()
        )));
    }
    let grid = *ct.grid();
    let [nx, ny, nz] = grid.dims;
    let slices = par::map_range(nz, |z| {
        let mut lo = [usize::MAX; 3];
        let mut hi = [0usize; 3];
        let mut any = false;
        for y in 0..ny {
            for x in 0..nx {
                let i = grid.index(x, y, z);
                if ct.data()[i] > thresholds.ct_hu || pet.data()[i] > thresholds.suv {
                    any = true;
                    for (a, c) in [x, y, z].into_iter().enumerate() {
                        lo[a] = lo[a].min(c);
                        hi[a] = hi[a].max(c);
                    }
                }
            }
        }
        any.then_some((lo, hi))
    });
    let found = slices.into_iter().flatten().reduce(|(alo, ahi), (blo, bhi)| {
        (
            [0, 1, 2].map(|a| alo[a].min(blo[a])),
            [0, 1, 2].map(|a| ahi[a].max(bhi[a])),
        )
    });
    Ok(match found {
        Some((lo, hi)) => BoundingBox { lo, hi },
        None => BoundingBox::full(grid.dims),
    })
}

fn check_box(dims: [usize; 3], bbox: &BoundingBox) -> Result<()> {
    if (0..3).any(|a| bbox.lo[a] > bbox.hi[a] || bbox.hi[a] >= dims[a]) {
        return Err(Error::Bounds(format!(
            "box {:?}..={:?} does not fit dims {dims:?}",
            bbox.lo, bbox.hi
        )));
    }
    Ok(())
}

fn cropped_grid(grid: &Grid, bbox: &BoundingBox) -> Result<Grid> {
    let origin = [0, 1, 2].map(|a| grid.origin[a] + bbox.lo[a] as f64 * grid.spacing[a]);
    Grid::new(bbox.dims(), grid.spacing, origin)
}

fn crop_slice<T: Copy>(src: &[T], grid: &Grid, bbox: &BoundingBox) -> Vec<T> {
    let out = bbox.dims();
    let mut data = Vec::with_capacity(out[0] * out[1] * out[2]);
    for z in bbox.lo[2]..=bbox.hi[2] {
        for y in bbox.lo[1]..=bbox.hi[1] {
            let start = grid.index(bbox.lo[0], y, z);
            data.extend_from_slice(&src[start..start + out[0]]);
        }
    }
    data
}

/// Extract `bbox`, advancing the origin by `lo * spacing`.
pub fn crop_to_box(vol: &ScalarVolume, bbox: &BoundingBox) -> Result<ScalarVolume> {
    check_box(vol.dims(), bbox)?;
    let grid = cropped_grid(vol.grid(), bbox)?;
    ScalarVolume::new(grid, crop_slice(vol.data(), vol.grid(), bbox), vol.kind())
}

pub fn crop_mask_to_box(mask: &BinaryMask, bbox: &BoundingBox) -> Result<BinaryMask> {
    check_box(mask.dims(), bbox)?;
    let grid = cropped_grid(mask.grid(), bbox)?;
    BinaryMask::new(grid, crop_slice(mask.data(), mask.grid(), bbox))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Interpolation {
    Trilinear,
    Nearest,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResampleSpec {
    pub target_spacing: [f64; 3],
    pub interpolation: Interpolation,
}

impl ResampleSpec {
    pub fn isotropic(mm: f64, interpolation: Interpolation) -> Self {
        ResampleSpec {
            target_spacing: [mm; 3],
            interpolation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_spacing.iter().all(|&s| s > 0.0 && s.is_finite()) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "target spacing must be positive, got {:?}",
                self.target_spacing
            )))
        }
    }
}

/// Grid produced by resampling `grid` to `target` spacing: same origin,
/// `ceil(n * s / t)` samples per axis.
pub fn resampled_grid(grid: &Grid, target: [f64; 3]) -> Result<Grid> {
    let dims = [0, 1, 2].map(|a| {
        let extent = grid.dims[a] as f64 * grid.spacing[a] / target[a];
        // guard against 20.000000000000004 becoming 21
        ((extent - 1e-9).ceil() as usize).max(1)
    });
    Grid::new(dims, target, grid.origin)
}

/// Continuous source index of target sample `k` along axis `a`.
#[inline]
fn source_coord(src: &Grid, dst: &Grid, a: usize, k: usize) -> f64 {
    let offset = dst.origin[a] - src.origin[a];
    if offset == 0.0 {
        k as f64 * dst.spacing[a] / src.spacing[a]
    } else {
        (offset + k as f64 * dst.spacing[a]) / src.spacing[a]
    }
}

/// Resample onto `spec.target_spacing` keeping the origin. Samples past the
/// source border clamp to the border voxel.
pub fn resample(vol: &ScalarVolume, spec: &ResampleSpec) -> Result<ScalarVolume> {
    spec.validate()?;
    let target = resampled_grid(vol.grid(), spec.target_spacing)?;
    resample_onto(vol, &target, spec.interpolation)
}

/// Resample a scalar volume onto an arbitrary target grid (origins are
/// honored, rotations are not). Out-of-domain samples clamp to the border.
pub fn resample_onto(vol: &ScalarVolume, target: &Grid, interpolation: Interpolation) -> Result<ScalarVolume> {
    let src = *vol.grid();
    if src == *target {
        return Ok(vol.clone());
    }
    let [nx, ny, nz] = target.dims;
    let xs: Vec<f64> = (0..nx).map(|k| source_coord(&src, target, 0, k)).collect();
    let ys: Vec<f64> = (0..ny).map(|k| source_coord(&src, target, 1, k)).collect();
    let zs: Vec<f64> = (0..nz).map(|k| source_coord(&src, target, 2, k)).collect();
    let data_in = vol.data();
    let mut out = vec![0.0; target.len()];
    par::for_each_chunk_mut(&mut out, nx * ny, |z, slab| {
        let cz = zs[z];
        for (y, &cy) in ys.iter().enumerate() {
            for (x, &cx) in xs.iter().enumerate() {
                slab[x + nx * y] = match interpolation {
                    Interpolation::Trilinear => interp::trilinear_clamped(data_in, src.dims, [cx, cy, cz]),
                    Interpolation::Nearest => {
                        let i = interp::nearest_index(cx, src.dims[0]);
                        let j = interp::nearest_index(cy, src.dims[1]);
                        let k = interp::nearest_index(cz, src.dims[2]);
                        data_in[src.index(i, j, k)]
                    }
                };
            }
        }
    });
    ScalarVolume::new(*target, out, vol.kind())
}

/// Nearest-neighbour resample of a mask to `target_spacing`.
pub fn resample_mask(mask: &BinaryMask, target_spacing: [f64; 3]) -> Result<BinaryMask> {
    ResampleSpec {
        target_spacing,
        interpolation: Interpolation::Nearest,
    }
    .validate()?;
    let target = resampled_grid(mask.grid(), target_spacing)?;
    resample_mask_onto(mask, &target)
}

/// Nearest-neighbour resample of a mask onto `target`. Target voxels more
/// than half a voxel outside the source field of view are background.
pub fn resample_mask_onto(mask: &BinaryMask, target: &Grid) -> Result<BinaryMask> {
    let src = *mask.grid();
    if src == *target {
        return Ok(mask.clone());
    }
    let [nx, ny, nz] = target.dims;
    let xs: Vec<f64> = (0..nx).map(|k| source_coord(&src, target, 0, k)).collect();
    let ys: Vec<f64> = (0..ny).map(|k| source_coord(&src, target, 1, k)).collect();
    let zs: Vec<f64> = (0..nz).map(|k| source_coord(&src, target, 2, k)).collect();
    let data_in = mask.data();
    let mut out = vec![0u8; target.len()];
    par::for_each_chunk_mut(&mut out, nx * ny, |z, slab| {
        for (y, &cy) in ys.iter().enumerate() {
            for (x, &cx) in xs.iter().enumerate() {
                slab[x + nx * y] = interp::nearest_flat(src.dims, [cx, cy, zs[z]]).map_or(0, |i| data_in[i]);
            }
        }
    });
    BinaryMask::new(*target, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(dims: [usize; 3]) -> Grid {
        Grid::with_spacing(dims, [1.0; 3]).unwrap()
    }

    fn params(delay: f64) -> SuvParams {
        SuvParams {
            injected_dose: 3.7e8,
            decay_interval_min: delay,
            half_life_min: F18_HALF_LIFE_MIN,
            patient_weight_kg: 70.0,
        }
    }

    #[test]
    fn suv_hand_case() {
        let g = grid([1, 1, 1]);
        let p = params(F18_HALF_LIFE_MIN);
        assert!((p.decayed_dose() - 1.85e8).abs() < 1e-6);
        let v = ScalarVolume::new(g, vec![2642.857], VolumeKind::PetBqml).unwrap();
        let suv = bq_to_suv(&v, &p).unwrap();
        assert_eq!(suv.kind(), VolumeKind::PetSuv);
        assert!((suv.data()[0] - 1.0).abs() < 1e-6, "{}", suv.data()[0]);
    }

    #[test]
    fn suv_zero_and_doubling() {
        let g = grid([2, 2, 1]);
        let zero = ScalarVolume::filled(g, 0.0, VolumeKind::PetBqml).unwrap();
        assert!(bq_to_suv(&zero, &params(30.0))
            .unwrap()
            .data()
            .iter()
            .all(|&v| v == 0.0));
        let v = ScalarVolume::new(g, vec![1000.0, 250.0, 3.5, 0.0], VolumeKind::PetBqml).unwrap();
        let a = bq_to_suv(&v, &params(0.0)).unwrap();
        let b = bq_to_suv(&v, &params(F18_HALF_LIFE_MIN)).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((y - 2.0 * x).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn suv_errors() {
        let g = grid([2, 1, 1]);
        let ct = ScalarVolume::filled(g, 0.0, VolumeKind::CtHu).unwrap();
        assert!(matches!(bq_to_suv(&ct, &params(0.0)), Err(Error::Kind { .. })));
        let nan = ScalarVolume::new(g, vec![1.0, f64::NAN], VolumeKind::PetBqml).unwrap();
        let err = bq_to_suv(&nan, &params(0.0)).unwrap_err();
        assert!(err.to_string().contains("[1, 0, 0]"), "{err}");
        let mut bad = params(0.0);
        bad.patient_weight_kg = 0.0;
        let ok = ScalarVolume::filled(g, 1.0, VolumeKind::PetBqml).unwrap();
        assert!(matches!(bq_to_suv(&ok, &bad), Err(Error::Domain(_))));
    }

    #[test]
    fn ct_window() {
        let g = grid([5, 1, 1]);
        let ct = ScalarVolume::new(g, vec![-1024.0, 1024.0, 0.0, -2000.0, 3000.0], VolumeKind::CtHu).unwrap();
        let n = clip_normalize_ct(&ct).unwrap();
        assert_eq!(n.data(), &[0.0, 1.0, 0.5, 0.0, 1.0]);
        assert_eq!(n.kind(), VolumeKind::CtNorm);
        assert!(clip_normalize_ct(&n).is_err());
    }

    fn body_pair(dims: [usize; 3], body: impl Fn(usize, usize, usize) -> bool) -> (ScalarVolume, ScalarVolume) {
        let g = grid(dims);
        let ct = ScalarVolume::from_fn(
            g,
            VolumeKind::CtHu,
            |x, y, z| {
                if body(x, y, z) {
                    40.0
                } else {
                    -1000.0
                }
            },
        )
        .unwrap();
        let pet = ScalarVolume::filled(g, 0.0, VolumeKind::PetSuv).unwrap();
        (ct, pet)
    }

    #[test]
    fn body_box_examples() {
        let (ct, pet) = body_pair([4, 4, 4], |_, _, _| true);
        let th = BodyThresholds::default();
        assert_eq!(body_bounding_box(&ct, &pet, &th).unwrap(), BoundingBox::full([4, 4, 4]));

        let (ct, pet) = body_pair([10, 10, 10], |x, y, z| (x, y, z) == (4, 5, 6));
        let b = body_bounding_box(&ct, &pet, &th).unwrap();
        assert_eq!((b.lo, b.hi), ([4, 5, 6], [4, 5, 6]));

        let (ct, pet) = body_pair([6, 6, 6], |_, _, _| false);
        assert_eq!(body_bounding_box(&ct, &pet, &th).unwrap(), BoundingBox::full([6, 6, 6]));
    }

    #[test]
    fn body_box_uses_pet_too() {
        let (ct, _) = body_pair([8, 8, 8], |_, _, _| false);
        let pet = ScalarVolume::from_fn(*ct.grid(), VolumeKind::PetSuv, |x, y, z| {
            if (x, y, z) == (1, 2, 3) {
                0.5
            } else {
                0.05
            }
        })
        .unwrap();
        let b = body_bounding_box(&ct, &pet, &BodyThresholds::default()).unwrap();
        assert_eq!((b.lo, b.hi), ([1, 2, 3], [1, 2, 3]));
        let small = ScalarVolume::filled(grid([2, 2, 2]), 0.0, VolumeKind::PetSuv).unwrap();
        assert!(matches!(
            body_bounding_box(&ct, &small, &BodyThresholds::default()),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn crop_examples() {
        let g = Grid::new([5, 4, 3], [2.0, 2.0, 3.0], [10.0, 0.0, -5.0]).unwrap();
        let ramp = ScalarVolume::from_fn(g, VolumeKind::CtHu, |x, y, z| (x + 10 * y + 100 * z) as f64).unwrap();
        assert_eq!(crop_to_box(&ramp, &BoundingBox::full(g.dims)).unwrap(), ramp);
        let unit = BoundingBox {
            lo: [2, 1, 1],
            hi: [2, 1, 1],
        };
        let c = crop_to_box(&ramp, &unit).unwrap();
        assert_eq!(c.dims(), [1, 1, 1]);
        assert_eq!(c.data(), &[112.0]);
        assert_eq!(c.grid().origin, [14.0, 2.0, -2.0]);
        let bad = BoundingBox {
            lo: [0, 0, 0],
            hi: [5, 0, 0],
        };
        assert!(matches!(crop_to_box(&ramp, &bad), Err(Error::Bounds(_))));
        let inverted = BoundingBox {
            lo: [2, 0, 0],
            hi: [1, 0, 0],
        };
        assert!(crop_to_box(&ramp, &inverted).is_err());
    }

    #[test]
    fn identity_resample() {
        let g = Grid::with_spacing([3, 4, 5], [2.0; 3]).unwrap();
        let v = ScalarVolume::from_fn(g, VolumeKind::PetSuv, |x, y, z| (x * y + z) as f64).unwrap();
        let spec = ResampleSpec::isotropic(2.0, Interpolation::Trilinear);
        assert_eq!(resample(&v, &spec).unwrap(), v);
    }

    #[test]
    fn output_dims_use_ceiling() {
        let g = Grid::with_spacing([10, 7, 3], [2.0, 3.0, 1.0]).unwrap();
        let r = resampled_grid(&g, [2.0; 3]).unwrap();
        assert_eq!(r.dims, [10, 11, 2]);
        let g = Grid::with_spacing([10, 10, 10], [0.1; 3]).unwrap();
        assert_eq!(resampled_grid(&g, [0.05; 3]).unwrap().dims, [20, 20, 20]);
    }

    #[test]
    fn mask_resample_round_trip() {
        let g = Grid::with_spacing([5, 4, 3], [2.0; 3]).unwrap();
        let m = BinaryMask::from_fn(g, |x, y, z| (x + 2 * y + z) % 3 == 0);
        let up = resample_mask(&m, [1.0; 3]).unwrap();
        assert_eq!(up.dims(), [10, 8, 6]);
        let back = resample_mask(&up, [2.0; 3]).unwrap();
        assert_eq!(back, m);
    }
}
