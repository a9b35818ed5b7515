//! Core volume value types shared by every module.
//!
//! Voxels are stored in a flat array with x varying fastest, then y, then z
//! (`index = x + nx * (y + ny * z)`), which is the NIfTI on-disk order.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when comparing voxel spacings of two grids.
const SPACING_RTOL: f64 = 1e-6;

/// Sampling grid: dimensions, voxel spacing (mm) and origin (mm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
}

impl Grid {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::Domain(format!("dims must be >= 1, got {dims:?}")));
        }
        if spacing.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::Domain(format!(
                "spacing must be positive and finite, got {spacing:?}"
            )));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::Domain(format!("origin must be finite, got {origin:?}")));
        }
        Ok(Grid { dims, spacing, origin })
    }

    /// Grid with the given dims, spacing and a zero origin.
    pub fn with_spacing(dims: [usize; 3], spacing: [f64; 3]) -> Result<Self> {
        Self::new(dims, spacing, [0.0; 3])
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    /// Voxel volume in milliliters.
    pub fn voxel_volume_ml(&self) -> f64 {
        // spacing was validated at construction
        self.spacing[0] * self.spacing[1] * self.spacing[2] / 1000.0
    }

    /// Same dims and (within rounding) the same spacing. Origin is not
    /// compared: arrays are evaluated in a shared voxel grid.
    pub fn same_sampling(&self, other: &Grid) -> bool {
        self.dims == other.dims
            && self
                .spacing
                .iter()
                .zip(other.spacing.iter())
                .all(|(a, b)| (a - b).abs() <= SPACING_RTOL * a.abs().max(b.abs()))
    }

    pub fn ensure_same_sampling(&self, other: &Grid, what: &str) -> Result<()> {
        if self.same_sampling(other) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "{what}: dims {:?} spacing {:?} vs dims {:?} spacing {:?}",
                self.dims, self.spacing, other.dims, other.spacing
            )))
        }
    }
}

/// Voxel volume in milliliters for a millimeter spacing triple.
pub fn voxel_volume_ml(spacing: [f64; 3]) -> Result<f64> {
    if spacing.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        return Err(Error::Domain(format!(
            "voxel spacing must be positive, got {spacing:?}"
        )));
    }
    Ok(spacing[0] * spacing[1] * spacing[2] / 1000.0)
}

/// Semantic tag carried by a [`ScalarVolume`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VolumeKind {
    /// PET activity concentration in Bq/ml.
    PetBqml,
    PetSuv,
    /// CT in Hounsfield units.
    CtHu,
    /// CT clipped and rescaled to [0, 1].
    CtNorm,
    /// Probabilities in [0, 1].
    Prob,
}

impl VolumeKind {
    /// Kinds whose values are confined to [0, 1].
    pub fn is_unit_bounded(self) -> bool {
        matches!(self, VolumeKind::CtNorm | VolumeKind::Prob)
    }
}

impl fmt::Display for VolumeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            VolumeKind::PetBqml => "PET_BQML",
            VolumeKind::PetSuv => "PET_SUV",
            VolumeKind::CtHu => "CT_HU",
            VolumeKind::CtNorm => "CT_NORM",
            VolumeKind::Prob => "PROB",
        };
        f.write_str(s)
    }
}

/// 3D scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarVolume {
    grid: Grid,
    data: Vec<f64>,
    kind: VolumeKind,
}

impl ScalarVolume {
    pub fn new(grid: Grid, data: Vec<f64>, kind: VolumeKind) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::Shape(format!(
                "data length {} does not match dims {:?}",
                data.len(),
                grid.dims
            )));
        }
        if kind.is_unit_bounded() {
            if let Some(i) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Data(format!(
                    "{kind} volume value {} at voxel {:?} is outside [0, 1]",
                    data[i],
                    grid.coords(i)
                )));
            }
        }
        Ok(ScalarVolume { grid, data, kind })
    }

    pub fn filled(grid: Grid, value: f64, kind: VolumeKind) -> Result<Self> {
        Self::new(grid, vec![value; grid.len()], kind)
    }

    /// Build a volume by evaluating `f` at every voxel coordinate.
    pub fn from_fn<F>(grid: Grid, kind: VolumeKind, f: F) -> Result<Self>
    where
        F: Fn(usize, usize, usize) -> f64,
    {
        let mut data = Vec::with_capacity(grid.len());
        for z in 0..grid.dims[2] {
            for y in 0..grid.dims[1] {
                for x in 0..grid.dims[0] {
                    data.push(f(x, y, z));
                }
            }
        }
        Self::new(grid, data, kind)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dims(&self) -> [usize; 3] {
        self.grid.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.grid.spacing
    }

    pub fn kind(&self) -> VolumeKind {
        self.kind
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[self.grid.index(x, y, z)]
    }

    /// Relabel the kind, checking the new kind's value invariant.
    pub fn with_kind(self, kind: VolumeKind) -> Result<Self> {
        Self::new(self.grid, self.data, kind)
    }

    pub fn with_grid(self, grid: Grid) -> Result<Self> {
        Self::new(grid, self.data, self.kind)
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// Binary segmentation mask with voxel values in {0, 1}.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    grid: Grid,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn new(grid: Grid, data: Vec<u8>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::Shape(format!(
                "mask length {} does not match dims {:?}",
                data.len(),
                grid.dims
            )));
        }
        if data.iter().any(|&v| v > 1) {
            let mut bad: Vec<u8> = data.iter().copied().filter(|&v| v > 1).collect();
            bad.sort_unstable();
            bad.dedup();
            return Err(Error::Data(format!("mask contains non-binary values {bad:?}")));
        }
        Ok(BinaryMask { grid, data })
    }

    pub fn empty(grid: Grid) -> Self {
        BinaryMask {
            grid,
            data: vec![0; grid.len()],
        }
    }

    pub fn from_fn<F>(grid: Grid, f: F) -> Self
    where
        F: Fn(usize, usize, usize) -> bool,
    {
        let mut data = Vec::with_capacity(grid.len());
        for z in 0..grid.dims[2] {
            for y in 0..grid.dims[1] {
                for x in 0..grid.dims[0] {
                    data.push(u8::from(f(x, y, z)));
                }
            }
        }
        BinaryMask { grid, data }
    }

    /// Convert a scalar volume holding only 0 and 1. Any other value is
    /// reported, up to a handful of distinct offenders.
    pub fn from_scalar(vol: &ScalarVolume) -> Result<Self> {
        let mut bad: Vec<f64> = Vec::new();
        let data = vol
            .data()
            .iter()
            .map(|&v| {
                if v == 0.0 {
                    0
                } else if v == 1.0 {
                    1
                } else {
                    if bad.len() < 8 && !bad.iter().any(|b| b.to_bits() == v.to_bits()) {
                        bad.push(v);
                    }
                    0
                }
            })
            .collect();
        if !bad.is_empty() {
            return Err(Error::Data(format!("mask contains non-binary values {bad:?}")));
        }
        Ok(BinaryMask {
            grid: *vol.grid(),
            data,
        })
    }

    pub fn to_scalar(&self, kind: VolumeKind) -> Result<ScalarVolume> {
        ScalarVolume::new(self.grid, self.data.iter().map(|&v| f64::from(v)).collect(), kind)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dims(&self) -> [usize; 3] {
        self.grid.dims
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.data[self.grid.index(x, y, z)] != 0
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_all_background(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    pub fn with_grid(self, grid: Grid) -> Result<Self> {
        Self::new(grid, self.data)
    }
}

/// Connected-component labels: 0 is background, components are `1..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    grid: Grid,
    data: Vec<u32>,
    n_components: usize,
}

impl LabelMap {
    /// Checks that the positive labels are exactly `1..=n` for some `n`.
    pub fn new(grid: Grid, data: Vec<u32>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::Shape(format!(
                "label length {} does not match dims {:?}",
                data.len(),
                grid.dims
            )));
        }
        let max = data.iter().copied().max().unwrap_or(0) as usize;
        let mut seen = vec![false; max + 1];
        for &l in &data {
            seen[l as usize] = true;
        }
        if let Some(missing) = (1..=max).find(|&l| !seen[l]) {
            return Err(Error::Data(format!(
                "labels are not contiguous: {missing} missing below max {max}"
            )));
        }
        Ok(LabelMap {
            grid,
            data,
            n_components: max,
        })
    }

    pub(crate) fn from_parts_unchecked(grid: Grid, data: Vec<u32>, n_components: usize) -> Self {
        debug_assert_eq!(data.len(), grid.len());
        LabelMap {
            grid,
            data,
            n_components,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dims(&self) -> [usize; 3] {
        self.grid.dims
    }

    pub fn data(&self) -> &[u32] {
        &self.data
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> u32 {
        self.data[self.grid.index(x, y, z)]
    }
}
