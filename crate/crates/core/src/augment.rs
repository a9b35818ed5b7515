//! Seeded training-time augmentations: cubic patch cropping, affine
//! transforms (translation, axial rotation, isotropic scaling), elastic
//! deformation, gamma correction and additive Gaussian noise.
//!
//! Every transform first draws its parameters into a small serializable
//! struct and then applies them. Image channels and the label mask of one
//! case share the geometric parameters, so a case stays aligned.
//!
//! # Random streams
//!
//! Draws come from ChaCha8 seeded with `seed_from_u64(seed)`. Each
//! (call index, transform) pair reads its own stream,
//! `stream = call_index << 3 | tag`, where the tag is the [`Stream`]
//! discriminant. Two calls never share draws, and reordering transforms in a
//! chain does not change what any one of them sees.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::{nearest_flat, nearest_index, trilinear_clamped, trilinear_or};
use crate::par;
use crate::volume::{BinaryMask, Grid, ScalarVolume};

/// Coordinates closer than this to the volume edge still count as inside.
const EDGE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub patch_size: usize,
    /// Translation range in voxels, per axis.
    pub translate_range: [f64; 2],
    /// Sample translations in `±range` instead of `range`.
    pub signed_translation: bool,
    /// Rotation about the z axis, radians.
    pub rotation_range: [f64; 2],
    /// Isotropic scale is drawn from `[1/max, max]`.
    pub scale_factor_max: f64,
    pub elastic_sigma_range: [f64; 2],
    pub elastic_offset_range: [f64; 2],
    /// Spacing of the elastic control grid, voxels.
    pub elastic_pitch: usize,
    pub gamma_range: [f64; 2],
    pub noise_mu: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        let rot = std::f64::consts::PI / 12.0;
        AugmentConfig {
            patch_size: 128,
            translate_range: [0.0, 10.0],
            signed_translation: false,
            rotation_range: [-rot, rot],
            scale_factor_max: 1.1,
            elastic_sigma_range: [0.0, 1.0],
            elastic_offset_range: [0.0, 1.0],
            elastic_pitch: 8,
            gamma_range: [0.7, 1.5],
            noise_mu: 0.0,
            noise_sigma: 1.0,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        let range_ok = |r: [f64; 2]| r[0].is_finite() && r[1].is_finite() && r[0] <= r[1];
        let checks = [
            (self.patch_size >= 1, "patch_size must be at least 1"),
            (range_ok(self.translate_range), "translate_range must satisfy lo <= hi"),
            (range_ok(self.rotation_range), "rotation_range must satisfy lo <= hi"),
            (
                self.scale_factor_max.is_finite() && self.scale_factor_max >= 1.0,
                "scale_factor_max must be >= 1",
            ),
            (
                range_ok(self.elastic_sigma_range) && self.elastic_sigma_range[0] >= 0.0,
                "elastic_sigma_range must be a non-negative range",
            ),
            (
                range_ok(self.elastic_offset_range),
                "elastic_offset_range must satisfy lo <= hi",
            ),
            (self.elastic_pitch >= 1, "elastic_pitch must be at least 1"),
            (
                range_ok(self.gamma_range) && self.gamma_range[0] > 0.0,
                "gamma_range must be a positive range",
            ),
            (
                self.noise_mu.is_finite() && self.noise_sigma.is_finite() && self.noise_sigma >= 0.0,
                "noise_sigma must be finite and non-negative",
            ),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::Domain((*msg).into())),
            None => Ok(()),
        }
    }
}

/// Transform tags used for stream splitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stream {
    Patch = 1,
    Affine = 2,
    Elastic = 3,
    Gamma = 4,
    Noise = 5,
}

/// Random source for one transform call.
#[derive(Debug, Clone)]
pub struct Draw {
    rng: ChaCha8Rng,
}

impl Draw {
    /// `call_index` must stay below 2^61.
    pub fn new(seed: u64, call_index: u64, stream: Stream) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream((call_index << 3) | stream as u64);
        Draw { rng }
    }

    fn uniform(&mut self, r: [f64; 2]) -> f64 {
        if r[0] < r[1] {
            self.rng.random_range(r[0]..r[1])
        } else {
            r[0]
        }
    }

    fn index(&mut self, upper_inclusive: usize) -> usize {
        self.rng.random_range(0..=upper_inclusive)
    }
}

fn map_slices<F>(dims: [usize; 3], f: F) -> Vec<f64>
where
    F: Fn(usize, usize, usize) -> f64 + Sync + Send,
{
    let [nx, ny, _] = dims;
    let mut out = vec![0.0; dims.iter().product()];
    par::for_each_chunk_mut(&mut out, nx * ny, |z, slab| {
        for y in 0..ny {
            for x in 0..nx {
                slab[x + nx * y] = f(x, y, z);
            }
        }
    });
    out
}

fn map_slices_u8<F>(dims: [usize; 3], f: F) -> Vec<u8>
where
    F: Fn(usize, usize, usize) -> u8 + Sync + Send,
{
    let [nx, ny, _] = dims;
    let mut out = vec![0u8; dims.iter().product()];
    par::for_each_chunk_mut(&mut out, nx * ny, |z, slab| {
        for y in 0..ny {
            for x in 0..nx {
                slab[x + nx * y] = f(x, y, z);
            }
        }
    });
    out
}

// ---------------------------------------------------------------- patches

/// Placement of a cubic patch. Axes shorter than the patch are zero-padded
/// symmetrically (`pad_before` voxels in front) and get offset 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchParams {
    pub size: usize,
    pub offset: [usize; 3],
    pub pad_before: [usize; 3],
}

impl PatchParams {
    pub fn sample(dims: [usize; 3], size: usize, draw: &mut Draw) -> Self {
        let mut offset = [0; 3];
        let mut pad_before = [0; 3];
        for a in 0..3 {
            if dims[a] < size {
                pad_before[a] = (size - dims[a]) / 2;
            } else {
                offset[a] = draw.index(dims[a] - size);
            }
        }
        PatchParams {
            size,
            offset,
            pad_before,
        }
    }

    /// Source coordinate for patch coordinate `p` along axis `a`.
    fn source(&self, a: usize, p: usize, n: usize) -> Option<usize> {
        let s = (self.offset[a] + p).checked_sub(self.pad_before[a])?;
        (s < n).then_some(s)
    }

    fn grid(&self, src: &Grid) -> Result<Grid> {
        let origin: [f64; 3] = std::array::from_fn(|a| {
            src.origin[a] + (self.offset[a] as f64 - self.pad_before[a] as f64) * src.spacing[a]
        });
        Grid::new([self.size; 3], src.spacing, origin)
    }

    pub fn apply(&self, vol: &ScalarVolume) -> Result<ScalarVolume> {
        let grid = self.grid(vol.grid())?;
        let dims = vol.dims();
        let src = vol.data();
        let data = map_slices(grid.dims, |x, y, z| {
            match (
                self.source(0, x, dims[0]),
                self.source(1, y, dims[1]),
                self.source(2, z, dims[2]),
            ) {
                (Some(sx), Some(sy), Some(sz)) => src[sx + dims[0] * (sy + dims[1] * sz)],
                _ => 0.0,
            }
        });
        ScalarVolume::new(grid, data, vol.kind())
    }

    pub fn apply_mask(&self, mask: &BinaryMask) -> Result<BinaryMask> {
        let grid = self.grid(mask.grid())?;
        let dims = mask.dims();
        let src = mask.data();
        let data = map_slices_u8(grid.dims, |x, y, z| {
            match (
                self.source(0, x, dims[0]),
                self.source(1, y, dims[1]),
                self.source(2, z, dims[2]),
            ) {
                (Some(sx), Some(sy), Some(sz)) => src[sx + dims[0] * (sy + dims[1] * sz)],
                _ => 0,
            }
        });
        BinaryMask::new(grid, data)
    }
}

/// Crop a random `patch_size³` cube, zero-padding short axes first.
pub fn random_patch(vol: &ScalarVolume, cfg: &AugmentConfig, draw: &mut Draw) -> Result<(ScalarVolume, PatchParams)> {
    cfg.validate()?;
    let p = PatchParams::sample(vol.dims(), cfg.patch_size, draw);
    Ok((p.apply(vol)?, p))
}

// ----------------------------------------------------------------- affine

/// Forward map `y = c + s·R(θ)·(x − c) + t` about the volume centre `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineParams {
    pub translation: [f64; 3],
    pub rotation: f64,
    pub scale: f64,
}

impl AffineParams {
    pub const IDENTITY: AffineParams = AffineParams {
        translation: [0.0; 3],
        rotation: 0.0,
        scale: 1.0,
    };

    pub fn sample(cfg: &AugmentConfig, draw: &mut Draw) -> Self {
        let mut translation = [0.0; 3];
        for t in &mut translation {
            *t = draw.uniform(cfg.translate_range);
            if cfg.signed_translation && draw.rng.random::<bool>() {
                *t = -*t;
            }
        }
        let rotation = draw.uniform(cfg.rotation_range);
        let scale = draw.uniform([1.0 / cfg.scale_factor_max, cfg.scale_factor_max]);
        AffineParams {
            translation,
            rotation,
            scale,
        }
    }

    /// Source position for output voxel `y`: `c + Rᵀ(y − c − t)/s`.
    fn source(&self, dims: [usize; 3], y: [usize; 3]) -> [f64; 3] {
        let c = dims.map(|n| (n as f64 - 1.0) / 2.0);
        let d: [f64; 3] = std::array::from_fn(|a| y[a] as f64 - c[a] - self.translation[a]);
        let (sin, cos) = self.rotation.sin_cos();
        [
            c[0] + (cos * d[0] + sin * d[1]) / self.scale,
            c[1] + (-sin * d[0] + cos * d[1]) / self.scale,
            c[2] + d[2] / self.scale,
        ]
    }

    pub fn apply(&self, vol: &ScalarVolume) -> Result<ScalarVolume> {
        let dims = vol.dims();
        let src = vol.data();
        let data = map_slices(dims, |x, y, z| {
            trilinear_or(src, dims, self.source(dims, [x, y, z]), 0.0, EDGE_TOL)
        });
        ScalarVolume::new(*vol.grid(), data, vol.kind())
    }

    pub fn apply_mask(&self, mask: &BinaryMask) -> Result<BinaryMask> {
        let dims = mask.dims();
        let src = mask.data();
        let data = map_slices_u8(dims, |x, y, z| {
            nearest_flat(dims, self.source(dims, [x, y, z])).map_or(0, |i| src[i])
        });
        BinaryMask::new(*mask.grid(), data)
    }
}

/// Random translation, axial rotation and isotropic scaling.
pub fn affine_augment(
    vol: &ScalarVolume,
    cfg: &AugmentConfig,
    draw: &mut Draw,
) -> Result<(ScalarVolume, AffineParams)> {
    cfg.validate()?;
    let p = AffineParams::sample(cfg, draw);
    Ok((p.apply(vol)?, p))
}

// ---------------------------------------------------------------- elastic

/// Control-grid displacements for an elastic warp. `offsets` holds one
/// displacement vector (voxels) per control point, x-fastest, before
/// smoothing; it is reproducible from the stream and left out of manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticParams {
    pub sigma: f64,
    pub pitch: usize,
    pub control_dims: [usize; 3],
    #[serde(skip)]
    pub offsets: Vec<[f64; 3]>,
}

/// Control points needed to cover `n` voxels at `pitch` spacing.
fn control_len(n: usize, pitch: usize) -> usize {
    (n.saturating_sub(1)).div_ceil(pitch) + 1
}

impl ElasticParams {
    pub fn sample(dims: [usize; 3], cfg: &AugmentConfig, draw: &mut Draw) -> Self {
        let sigma = draw.uniform(cfg.elastic_sigma_range);
        let control_dims = dims.map(|n| control_len(n, cfg.elastic_pitch));
        let count: usize = control_dims.iter().product();
        let offsets = (0..count)
            .map(|_| std::array::from_fn(|_| draw.uniform(cfg.elastic_offset_range)))
            .collect();
        ElasticParams {
            sigma,
            pitch: cfg.elastic_pitch,
            control_dims,
            offsets,
        }
    }

    /// All-zero control field.
    pub fn zero(dims: [usize; 3], pitch: usize) -> Self {
        let control_dims = dims.map(|n| control_len(n, pitch.max(1)));
        ElasticParams {
            sigma: 0.0,
            pitch: pitch.max(1),
            control_dims,
            offsets: vec![[0.0; 3]; control_dims.iter().product()],
        }
    }

    /// Control offsets after separable Gaussian smoothing (σ in control-grid
    /// units, edge-clamped).
    pub fn smoothed(&self) -> Vec<[f64; 3]> {
        let mut field = self.offsets.clone();
        if self.sigma <= 1e-12 {
            return field;
        }
        let radius = (3.0 * self.sigma).ceil() as i64;
        let mut kernel: Vec<f64> = (-radius..=radius)
            .map(|k| (-(k * k) as f64 / (2.0 * self.sigma * self.sigma)).exp())
            .collect();
        let total: f64 = kernel.iter().sum();
        kernel.iter_mut().for_each(|w| *w /= total);

        let d = self.control_dims;
        let stride = [1, d[0], d[0] * d[1]];
        for axis in 0..3 {
            let n = d[axis] as i64;
            let src = field.clone();
            for (i, out) in field.iter_mut().enumerate() {
                let pos = (i / stride[axis]) as i64 % n;
                let base = i as i64 - pos * stride[axis] as i64;
                let mut acc = [0.0; 3];
                for (k, w) in kernel.iter().enumerate() {
                    let q = (pos + k as i64 - radius).clamp(0, n - 1);
                    let v = src[(base + q * stride[axis] as i64) as usize];
                    for c in 0..3 {
                        acc[c] += w * v[c];
                    }
                }
                *out = acc;
            }
        }
        field
    }

    /// Dense displacement at every voxel of a `dims` volume, by trilinear
    /// interpolation of the smoothed control field.
    pub fn dense_field(&self, dims: [usize; 3]) -> [Vec<f64>; 3] {
        let ctrl = self.smoothed();
        let comps: [Vec<f64>; 3] = std::array::from_fn(|c| ctrl.iter().map(|v| v[c]).collect());
        let p = self.pitch as f64;
        std::array::from_fn(|c| {
            map_slices(dims, |x, y, z| {
                trilinear_clamped(&comps[c], self.control_dims, [x as f64 / p, y as f64 / p, z as f64 / p])
            })
        })
    }

    /// Backward warp `out(x) = in(x + d(x))`, edge-clamped.
    pub fn apply(&self, vol: &ScalarVolume) -> Result<ScalarVolume> {
        let dims = vol.dims();
        let field = self.dense_field(dims);
        let src = vol.data();
        let [nx, ny, _] = dims;
        let data = map_slices(dims, |x, y, z| {
            let i = x + nx * (y + ny * z);
            let pos = [x as f64 + field[0][i], y as f64 + field[1][i], z as f64 + field[2][i]];
            trilinear_clamped(src, dims, pos)
        });
        ScalarVolume::new(*vol.grid(), data, vol.kind())
    }

    pub fn apply_mask(&self, mask: &BinaryMask) -> Result<BinaryMask> {
        let dims = mask.dims();
        let field = self.dense_field(dims);
        let src = mask.data();
        let [nx, ny, nz] = dims;
        let data = map_slices_u8(dims, |x, y, z| {
            let i = x + nx * (y + ny * z);
            let sx = nearest_index(x as f64 + field[0][i], nx);
            let sy = nearest_index(y as f64 + field[1][i], ny);
            let sz = nearest_index(z as f64 + field[2][i], nz);
            src[sx + nx * (sy + ny * sz)]
        });
        BinaryMask::new(*mask.grid(), data)
    }
}

/// Random smooth elastic deformation.
pub fn elastic_deform(
    vol: &ScalarVolume,
    cfg: &AugmentConfig,
    draw: &mut Draw,
) -> Result<(ScalarVolume, ElasticParams)> {
    cfg.validate()?;
    let p = ElasticParams::sample(vol.dims(), cfg, draw);
    Ok((p.apply(vol)?, p))
}

// ------------------------------------------------------------ intensities

/// Power-law intensity map anchored at the volume's min and max:
/// `x → m + (M − m)·((x − m)/(M − m))^γ`. Constant volumes are unchanged.
pub fn gamma_correct(vol: &ScalarVolume, gamma: f64) -> Result<ScalarVolume> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::Domain(format!("gamma must be positive, got {gamma}")));
    }
    let (m, hi) = vol.min_max();
    let range = hi - m;
    if !(range > 0.0) {
        return Ok(vol.clone());
    }
    let data = vol
        .data()
        .iter()
        .map(|&x| {
            let t = ((x - m) / range).clamp(0.0, 1.0);
            m + range * t.powf(gamma)
        })
        .collect();
    ScalarVolume::new(*vol.grid(), data, vol.kind())
}

pub fn sample_gamma(cfg: &AugmentConfig, draw: &mut Draw) -> f64 {
    draw.uniform(cfg.gamma_range)
}

/// Add i.i.d. `N(μ, σ)` noise, drawn sequentially in voxel order. Volumes
/// whose kind is bounded to `[0, 1]` are clamped back into range.
pub fn add_gaussian_noise(vol: &ScalarVolume, cfg: &AugmentConfig, draw: &mut Draw) -> Result<ScalarVolume> {
    cfg.validate()?;
    let normal =
        Normal::new(cfg.noise_mu, cfg.noise_sigma).map_err(|e| Error::Domain(format!("noise distribution: {e}")))?;
    let bounded = vol.kind().is_unit_bounded();
    let data = vol
        .data()
        .iter()
        .map(|&x| {
            let y = x + normal.sample(&mut draw.rng);
            if bounded {
                y.clamp(0.0, 1.0)
            } else {
                y
            }
        })
        .collect();
    ScalarVolume::new(*vol.grid(), data, vol.kind())
}

// ------------------------------------------------------------------ chain

/// One case to augment: co-registered image channels and an optional mask.
#[derive(Debug, Clone)]
pub struct Sample {
    pub images: Vec<ScalarVolume>,
    pub mask: Option<BinaryMask>,
}

/// Parameters drawn for one full augmentation call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentRecord {
    pub seed: u64,
    pub call_index: u64,
    pub patch: PatchParams,
    pub affine: AffineParams,
    pub elastic: ElasticParams,
    pub gamma: f64,
    pub noise_mu: f64,
    pub noise_sigma: f64,
}

/// Apply the full chain (patch, affine, elastic, gamma, noise) to a case.
/// Geometry is shared by all channels and the mask; gamma is shared by the
/// channels; noise is drawn channel after channel from one stream.
pub fn augment_sample(sample: &Sample, cfg: &AugmentConfig, call_index: u64) -> Result<(Sample, AugmentRecord)> {
    cfg.validate()?;
    let first = sample
        .images
        .first()
        .ok_or_else(|| Error::Contract("augmentation needs at least one image channel".into()))?;
    for img in &sample.images[1..] {
        first.grid().ensure_same_sampling(img.grid(), "image channels")?;
    }
    if let Some(m) = &sample.mask {
        first.grid().ensure_same_sampling(m.grid(), "mask")?;
    }
    let seed = cfg.seed;
    let patch = PatchParams::sample(
        first.dims(),
        cfg.patch_size,
        &mut Draw::new(seed, call_index, Stream::Patch),
    );
    let affine = AffineParams::sample(cfg, &mut Draw::new(seed, call_index, Stream::Affine));
    let elastic = ElasticParams::sample(
        [cfg.patch_size; 3],
        cfg,
        &mut Draw::new(seed, call_index, Stream::Elastic),
    );
    let gamma = sample_gamma(cfg, &mut Draw::new(seed, call_index, Stream::Gamma));
    let mut noise = Draw::new(seed, call_index, Stream::Noise);

    let mut images = Vec::with_capacity(sample.images.len());
    for img in &sample.images {
        let v = patch.apply(img)?;
        let v = affine.apply(&v)?;
        let v = elastic.apply(&v)?;
        let v = gamma_correct(&v, gamma)?;
        images.push(add_gaussian_noise(&v, cfg, &mut noise)?);
    }
    let mask = match &sample.mask {
        Some(m) => Some(elastic.apply_mask(&affine.apply_mask(&patch.apply_mask(m)?)?)?),
        None => None,
    };
    let record = AugmentRecord {
        seed,
        call_index,
        patch,
        affine,
        elastic,
        gamma,
        noise_mu: cfg.noise_mu,
        noise_sigma: cfg.noise_sigma,
    };
    Ok((Sample { images, mask }, record))
}
