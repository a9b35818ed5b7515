//! Synthetic data: a whole-body PET/CT phantom with spherical lesions and
//! seeded random masks, for tests, benchmarks and demos.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::preprocess::{SuvParams, F18_HALF_LIFE_MIN};
use crate::volume::{BinaryMask, Grid, ScalarVolume, VolumeKind};

/// A sphere in voxel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sphere {
    pub center: [f64; 3],
    pub radius: f64,
    pub suv: f64,
}

impl Sphere {
    fn contains(&self, p: [usize; 3]) -> bool {
        let d2: f64 = (0..3).map(|a| (p[a] as f64 - self.center[a]).powi(2)).sum();
        d2 <= self.radius * self.radius
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub grid: Grid,
    pub suv: SuvParams,
    /// Uptake of normal tissue inside the body, SUV.
    pub background_suv: f64,
    pub body_hu: f64,
    pub air_hu: f64,
    pub lesions: Vec<Sphere>,
}

impl PhantomSpec {
    /// A 64×48×80 volume at 4×4×3 mm with an ellipsoidal body and three
    /// lesions of SUV 6, 9 and 12.
    pub fn whole_body() -> Self {
        let grid = Grid::new([64, 48, 80], [4.0, 4.0, 3.0], [-128.0, -96.0, -120.0])
            .unwrap_or_else(|e| unreachable!("static phantom grid: {e}"));
        PhantomSpec {
            grid,
            suv: SuvParams {
                injected_dose: 3.7e8,
                decay_interval_min: 60.0,
                half_life_min: F18_HALF_LIFE_MIN,
                patient_weight_kg: 70.0,
            },
            background_suv: 1.0,
            body_hu: 40.0,
            air_hu: -1000.0,
            lesions: vec![
                Sphere {
                    center: [24.0, 22.0, 30.0],
                    radius: 3.0,
                    suv: 6.0,
                },
                Sphere {
                    center: [40.0, 26.0, 44.0],
                    radius: 2.2,
                    suv: 9.0,
                },
                Sphere {
                    center: [32.0, 20.0, 60.0],
                    radius: 4.0,
                    suv: 12.0,
                },
            ],
        }
    }

    /// The same body without lesions.
    pub fn negative_control() -> Self {
        PhantomSpec {
            lesions: Vec::new(),
            ..Self::whole_body()
        }
    }

    fn in_body(&self, p: [usize; 3]) -> bool {
        let d = self.grid.dims;
        // ellipsoid filling most of the axial plane and 90 % of the length
        let r = [0.4 * d[0] as f64, 0.35 * d[1] as f64, 0.45 * d[2] as f64];
        let c = d.map(|n| (n as f64 - 1.0) / 2.0);
        (0..3).map(|a| ((p[a] as f64 - c[a]) / r[a]).powi(2)).sum::<f64>() <= 1.0
    }
}

/// PET in Bq/ml, CT in HU and the lesion mask of a phantom.
#[derive(Debug, Clone)]
pub struct Phantom {
    pub pet_bqml: ScalarVolume,
    pub ct_hu: ScalarVolume,
    pub mask: BinaryMask,
    pub suv: SuvParams,
}

pub fn phantom(spec: &PhantomSpec) -> Result<Phantom> {
    let to_bq = 1.0 / spec.suv.suv_factor();
    let suv_at = |x: usize, y: usize, z: usize| -> f64 {
        let p = [x, y, z];
        if !spec.in_body(p) {
            return 0.0;
        }
        spec.lesions
            .iter()
            .find(|l| l.contains(p))
            .map_or(spec.background_suv, |l| l.suv)
    };
    let pet_bqml = ScalarVolume::from_fn(spec.grid, VolumeKind::PetBqml, |x, y, z| suv_at(x, y, z) * to_bq)?;
    let ct_hu = ScalarVolume::from_fn(spec.grid, VolumeKind::CtHu, |x, y, z| {
        if spec.in_body([x, y, z]) {
            spec.body_hu
        } else {
            spec.air_hu
        }
    })?;
    let mask = BinaryMask::from_fn(spec.grid, |x, y, z| {
        let p = [x, y, z];
        spec.in_body(p) && spec.lesions.iter().any(|l| l.contains(p))
    });
    Ok(Phantom {
        pet_bqml,
        ct_hu,
        mask,
        suv: spec.suv,
    })
}

/// Mask with each voxel foreground with probability `density`.
pub fn random_mask(grid: Grid, density: f64, seed: u64) -> BinaryMask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..grid.len())
        .map(|_| u8::from(rng.random_bool(density.clamp(0.0, 1.0))))
        .collect();
    BinaryMask::new(grid, data).unwrap_or_else(|e| unreachable!("random mask is binary: {e}"))
}

/// Mask made of `n` random axis-aligned boxes with sides up to `max_side`.
pub fn random_blobs(grid: Grid, n: usize, max_side: usize, seed: u64) -> BinaryMask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = grid.dims;
    let boxes: Vec<([usize; 3], [usize; 3])> = (0..n)
        .map(|_| {
            let lo: [usize; 3] = std::array::from_fn(|a| rng.random_range(0..d[a]));
            let hi: [usize; 3] = std::array::from_fn(|a| (lo[a] + rng.random_range(1..=max_side.max(1))).min(d[a]));
            (lo, hi)
        })
        .collect();
    BinaryMask::from_fn(grid, |x, y, z| {
        boxes
            .iter()
            .any(|(lo, hi)| (lo[0]..hi[0]).contains(&x) && (lo[1]..hi[1]).contains(&y) && (lo[2]..hi[2]).contains(&z))
    })
}
