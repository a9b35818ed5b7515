//! Sliding-window inference plumbing and model ensembling.
//!
//! The toolkit runs no network itself. A [`Predictor`] maps an image window
//! to two-channel logits; windows can also be exchanged through files named
//! by [`window_file_name`], written by an external process between
//! `ensemble plan` and `ensemble blend`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nifti::{read_nifti_channels, write_nifti_channels};
use crate::par;
use crate::preprocess::resample_mask_onto;
use crate::volume::{BinaryMask, Grid, ScalarVolume, VolumeKind};

pub const DEFAULT_WINDOW: usize = 192;
pub const DEFAULT_OVERLAP: f64 = 0.5;

/// Tiling of a volume into overlapping windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowPlan {
    /// Grid of the unpadded input volume.
    pub grid: Grid,
    pub window: [usize; 3],
    pub overlap: f64,
    pub stride: [usize; 3],
    /// Dims after symmetric zero padding of axes shorter than the window.
    pub padded_dims: [usize; 3],
    pub pad_before: [usize; 3],
    /// Window origins in padded coordinates, x-fastest order.
    pub origins: Vec<[usize; 3]>,
}

fn axis_origins(padded: usize, window: usize, stride: usize) -> Vec<usize> {
    let last = padded - window;
    let mut out: Vec<usize> = (0..).map(|k| k * stride).take_while(|&o| o < last).collect();
    out.push(last);
    out
}

/// Plan cubic windows of side `window` with fractional `overlap`.
pub fn plan_windows(grid: &Grid, window: usize, overlap: f64) -> Result<WindowPlan> {
    plan_windows_with(grid, [window; 3], overlap)
}

/// Plan windows of per-axis size `window`.
pub fn plan_windows_with(grid: &Grid, window: [usize; 3], overlap: f64) -> Result<WindowPlan> {
    if window.contains(&0) {
        return Err(Error::Domain(format!("window must be >= 1, got {window:?}")));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::Domain(format!("overlap must lie in [0, 1), got {overlap}")));
    }
    let dims = grid.dims;
    let padded_dims: [usize; 3] = std::array::from_fn(|a| dims[a].max(window[a]));
    let pad_before: [usize; 3] = std::array::from_fn(|a| (padded_dims[a] - dims[a]) / 2);
    let stride: [usize; 3] = std::array::from_fn(|a| ((window[a] as f64 * (1.0 - overlap)).floor() as usize).max(1));
    let per_axis: [Vec<usize>; 3] = std::array::from_fn(|a| axis_origins(padded_dims[a], window[a], stride[a]));
    let mut origins = Vec::with_capacity(per_axis.iter().map(Vec::len).product());
    for &z in &per_axis[2] {
        for &y in &per_axis[1] {
            for &x in &per_axis[0] {
                origins.push([x, y, z]);
            }
        }
    }
    Ok(WindowPlan {
        grid: *grid,
        window,
        overlap,
        stride,
        padded_dims,
        pad_before,
        origins,
    })
}

impl WindowPlan {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let plan: WindowPlan = serde_json::from_str(&text)?;
        plan.check()?;
        Ok(plan)
    }

    fn check(&self) -> Result<()> {
        for o in &self.origins {
            if (0..3).any(|a| o[a] + self.window[a] > self.padded_dims[a]) {
                return Err(Error::Bounds(format!(
                    "window at {o:?} of size {:?} leaves padded dims {:?}",
                    self.window, self.padded_dims
                )));
            }
        }
        Ok(())
    }

    /// Window grid: window dims on the input spacing, origin placed at the
    /// window's first voxel.
    pub fn window_grid(&self, origin: [usize; 3]) -> Result<Grid> {
        let mut o = self.grid.origin;
        for a in 0..3 {
            o[a] += (origin[a] as f64 - self.pad_before[a] as f64) * self.grid.spacing[a];
        }
        Grid::new(self.window, self.grid.spacing, o)
    }

    /// Cut one (zero-padded) window out of `vol`.
    pub fn extract(&self, vol: &ScalarVolume, origin: [usize; 3]) -> Result<ScalarVolume> {
        self.grid.ensure_same_sampling(vol.grid(), "volume and window plan")?;
        let grid = self.window_grid(origin)?;
        let dims = self.grid.dims;
        let [wx, wy, _] = self.window;
        let src = vol.data();
        let mut data = vec![0.0; grid.len()];
        par::for_each_chunk_mut(&mut data, wx * wy, |z, slab| {
            let sz = (origin[2] + z).checked_sub(self.pad_before[2]).filter(|&s| s < dims[2]);
            let Some(sz) = sz else { return };
            for y in 0..wy {
                let sy = (origin[1] + y).checked_sub(self.pad_before[1]).filter(|&s| s < dims[1]);
                let Some(sy) = sy else { continue };
                for x in 0..wx {
                    if let Some(sx) = (origin[0] + x).checked_sub(self.pad_before[0]).filter(|&s| s < dims[0]) {
                        slab[x + wx * y] = src[sx + dims[0] * (sy + dims[1] * sz)];
                    }
                }
            }
        });
        ScalarVolume::new(grid, data, vol.kind())
    }

    /// Whether every padded voxel lies in at least one window.
    pub fn covers_all(&self) -> bool {
        (0..3).all(|a| {
            let mut covered = vec![false; self.padded_dims[a]];
            for o in &self.origins {
                covered[o[a]..o[a] + self.window[a]].iter_mut().for_each(|c| *c = true);
            }
            covered.into_iter().all(|c| c)
        })
    }
}

/// File name of the logits for the window at `origin`.
pub fn window_file_name(origin: [usize; 3]) -> String {
    format!("w_{}_{}_{}.nii.gz", origin[0], origin[1], origin[2])
}

/// Two-channel logits (background, foreground) on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Logits {
    pub grid: Grid,
    pub background: Vec<f64>,
    pub foreground: Vec<f64>,
}

impl Logits {
    pub fn new(grid: Grid, background: Vec<f64>, foreground: Vec<f64>) -> Result<Self> {
        if background.len() != grid.len() || foreground.len() != grid.len() {
            return Err(Error::Shape(format!(
                "logit channels have {} and {} values for a grid of {}",
                background.len(),
                foreground.len(),
                grid.len()
            )));
        }
        if background.iter().chain(&foreground).any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite logit".into()));
        }
        Ok(Logits {
            grid,
            background,
            foreground,
        })
    }

    pub fn constant(grid: Grid, background: f64, foreground: f64) -> Result<Self> {
        Self::new(grid, vec![background; grid.len()], vec![foreground; grid.len()])
    }

    /// Softmax foreground probability.
    pub fn foreground_probability(&self) -> Result<ScalarVolume> {
        let data = self
            .background
            .iter()
            .zip(&self.foreground)
            .map(|(&b, &f)| sigmoid(f - b))
            .collect();
        ScalarVolume::new(self.grid, data, VolumeKind::Prob)
    }

    /// Read a 4D two-channel file, or a 3D file holding only the foreground
    /// logit (background logit 0, so the probability is `σ(z)`).
    pub fn read(path: &Path) -> Result<Self> {
        let mut ch = read_nifti_channels(path, VolumeKind::PetSuv)?;
        match ch.len() {
            1 => {
                let fg = ch.pop().unwrap_or_else(|| unreachable!());
                let grid = *fg.grid();
                Self::new(grid, vec![0.0; grid.len()], fg.into_data())
            }
            2 => {
                let fg = ch.pop().unwrap_or_else(|| unreachable!());
                let bg = ch.pop().unwrap_or_else(|| unreachable!());
                Self::new(*fg.grid(), bg.into_data(), fg.into_data())
            }
            n => Err(Error::Data(format!(
                "{}: expected 1 or 2 logit channels, found {n}",
                path.display()
            ))),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let bg = ScalarVolume::new(self.grid, self.background.clone(), VolumeKind::PetSuv)?;
        let fg = ScalarVolume::new(self.grid, self.foreground.clone(), VolumeKind::PetSuv)?;
        write_nifti_channels(&[bg, fg], path)
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Per-window model boundary.
pub trait Predictor: Sync {
    /// Logits for one window; the output grid must match the input's.
    fn predict(&self, pet: &ScalarVolume, ct: &ScalarVolume) -> Result<Logits>;
}

/// Same logits everywhere.
#[derive(Debug, Clone, Copy)]
pub struct ConstantPredictor {
    pub background: f64,
    pub foreground: f64,
}

impl Predictor for ConstantPredictor {
    fn predict(&self, pet: &ScalarVolume, _ct: &ScalarVolume) -> Result<Logits> {
        Logits::constant(*pet.grid(), self.background, self.foreground)
    }
}

/// Foreground logit `sharpness · (pet − threshold)`, background 0.
#[derive(Debug, Clone, Copy)]
pub struct ThresholdPredictor {
    pub threshold: f64,
    pub sharpness: f64,
}

impl Predictor for ThresholdPredictor {
    fn predict(&self, pet: &ScalarVolume, _ct: &ScalarVolume) -> Result<Logits> {
        let fg = pet
            .data()
            .iter()
            .map(|&v| self.sharpness * (v - self.threshold))
            .collect();
        Logits::new(*pet.grid(), vec![0.0; pet.grid().len()], fg)
    }
}

/// How overlapping windows are weighted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlendMode {
    /// Plain mean over covering windows.
    #[default]
    Uniform,
    /// Gaussian importance centred in each window, σ = window / 8.
    Gaussian,
}

impl std::str::FromStr for BlendMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" | "mean" => Ok(BlendMode::Uniform),
            "gaussian" => Ok(BlendMode::Gaussian),
            other => Err(Error::Domain(format!(
                "blend mode must be uniform or gaussian, got {other:?}"
            ))),
        }
    }
}

fn axis_weights(window: usize, mode: BlendMode) -> Vec<f64> {
    match mode {
        BlendMode::Uniform => vec![1.0; window],
        BlendMode::Gaussian => {
            let sigma = window as f64 / 8.0;
            let c = (window as f64 - 1.0) / 2.0;
            (0..window)
                .map(|i| {
                    let d = i as f64 - c;
                    (-(d * d) / (2.0 * sigma * sigma)).exp()
                })
                .collect()
        }
    }
}

/// Blend window logits into per-class probabilities (background,
/// foreground) on the plan's unpadded grid. `windows[k]` belongs to
/// `plan.origins[k]`. Contributions to each voxel are summed in origin order.
pub fn blend(plan: &WindowPlan, windows: &[Logits], mode: BlendMode) -> Result<[ScalarVolume; 2]> {
    if windows.len() != plan.origins.len() {
        return Err(Error::Contract(format!(
            "plan has {} windows but {} window outputs were given",
            plan.origins.len(),
            windows.len()
        )));
    }
    for (w, o) in windows.iter().zip(&plan.origins) {
        if w.grid.dims != plan.window {
            return Err(Error::Shape(format!(
                "window at {o:?} has dims {:?}, expected {:?}",
                w.grid.dims, plan.window
            )));
        }
    }
    let weights: [Vec<f64>; 3] = std::array::from_fn(|a| axis_weights(plan.window[a], mode));
    let [wx, wy, _] = plan.window;
    let dims = plan.grid.dims;
    let [nx, ny, _] = dims;
    let pad = plan.pad_before;

    // accumulate only over the unpadded region: [fg, bg, weight]
    let mut acc = vec![[0.0f64; 3]; plan.grid.len()];
    par::for_each_chunk_mut(&mut acc, nx * ny, |z, slab| {
        let pz = z + pad[2];
        for (w, o) in windows.iter().zip(&plan.origins) {
            if pz < o[2] || pz >= o[2] + plan.window[2] {
                continue;
            }
            let lz = pz - o[2];
            for y in 0..ny {
                let py = y + pad[1];
                if py < o[1] || py >= o[1] + wy {
                    continue;
                }
                let ly = py - o[1];
                for x in 0..nx {
                    let px = x + pad[0];
                    if px < o[0] || px >= o[0] + wx {
                        continue;
                    }
                    let lx = px - o[0];
                    let li = lx + wx * (ly + wy * lz);
                    let weight = weights[0][lx] * weights[1][ly] * weights[2][lz];
                    let fg = sigmoid(w.foreground[li] - w.background[li]);
                    let bg = sigmoid(w.background[li] - w.foreground[li]);
                    let cell = &mut slab[x + nx * y];
                    cell[0] += weight * fg;
                    cell[1] += weight * bg;
                    cell[2] += weight;
                }
            }
        }
    });
    let mut fg = Vec::with_capacity(acc.len());
    let mut bg = Vec::with_capacity(acc.len());
    for (i, [f, b, w]) in acc.into_iter().enumerate() {
        if !(w > 0.0) {
            return Err(Error::Contract(format!(
                "voxel {:?} is covered by no window",
                plan.grid.coords(i)
            )));
        }
        fg.push((f / w).clamp(0.0, 1.0));
        bg.push((b / w).clamp(0.0, 1.0));
    }
    Ok([
        ScalarVolume::new(plan.grid, bg, VolumeKind::Prob)?,
        ScalarVolume::new(plan.grid, fg, VolumeKind::Prob)?,
    ])
}

/// Read every window named in `plan` from `dir`.
pub fn load_windows(plan: &WindowPlan, dir: &Path) -> Result<Vec<Logits>> {
    let loaded = par::map(&plan.origins, |&o| {
        let path = dir.join(window_file_name(o));
        if !path.exists() {
            return Err(Error::Contract(format!("missing window output {}", path.display())));
        }
        Logits::read(&path)
    });
    loaded.into_iter().collect()
}

/// Tile `pet`/`ct`, run `predictor` on every window and blend. Returns
/// (background, foreground) probabilities.
pub fn sliding_window_inference(
    pet: &ScalarVolume,
    ct: &ScalarVolume,
    plan: &WindowPlan,
    predictor: &dyn Predictor,
    mode: BlendMode,
) -> Result<[ScalarVolume; 2]> {
    pet.grid().ensure_same_sampling(ct.grid(), "PET and CT")?;
    let outputs = par::map(&plan.origins, |&o| -> Result<Logits> {
        let p = plan.extract(pet, o)?;
        let c = plan.extract(ct, o)?;
        let out = predictor.predict(&p, &c)?;
        if out.grid.dims != p.grid().dims {
            return Err(Error::Contract(format!(
                "predictor returned dims {:?} for a {:?} window",
                out.grid.dims,
                p.grid().dims
            )));
        }
        Ok(out)
    });
    let outputs: Vec<Logits> = outputs.into_iter().collect::<Result<_>>()?;
    blend(plan, &outputs, mode)
}

fn check_stack<'a>(grids: impl Iterator<Item = &'a Grid>) -> Result<Grid> {
    let mut grids = grids;
    let first = *grids
        .next()
        .ok_or_else(|| Error::Domain("ensembling needs at least one input".into()))?;
    for g in grids {
        first.ensure_same_sampling(g, "ensemble members")?;
    }
    Ok(first)
}

/// Voxelwise mean of probability maps, summed in input order.
pub fn average_ensemble(probs: &[ScalarVolume]) -> Result<ScalarVolume> {
    let grid = check_stack(probs.iter().map(ScalarVolume::grid))?;
    if let Some(p) = probs.iter().find(|p| p.kind() != VolumeKind::Prob) {
        return Err(Error::Kind {
            expected: VolumeKind::Prob.to_string(),
            found: p.kind().to_string(),
        });
    }
    let n = probs.len() as f64;
    let mut data = vec![0.0; grid.len()];
    par::for_each_chunk_mut(&mut data, grid.dims[0] * grid.dims[1], |z, slab| {
        let off = z * slab.len();
        for (i, v) in slab.iter_mut().enumerate() {
            let s: f64 = probs.iter().map(|p| p.data()[off + i]).sum();
            *v = (s / n).clamp(0.0, 1.0);
        }
    });
    ScalarVolume::new(grid, data, VolumeKind::Prob)
}

/// Average logits across members, then take the softmax foreground
/// probability.
pub fn average_logits(members: &[Logits]) -> Result<ScalarVolume> {
    let grid = check_stack(members.iter().map(|m| &m.grid))?;
    let n = members.len() as f64;
    let mean = |f: fn(&Logits) -> &Vec<f64>| -> Vec<f64> {
        (0..grid.len())
            .map(|i| members.iter().map(|m| f(m)[i]).sum::<f64>() / n)
            .collect()
    };
    Logits::new(grid, mean(|m| &m.background), mean(|m| &m.foreground))?.foreground_probability()
}

/// Foreground where `prob > threshold` (strict).
pub fn binarize(prob: &ScalarVolume, threshold: f64) -> Result<BinaryMask> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::Domain(format!("threshold must lie in [0, 1], got {threshold}")));
    }
    let data = prob.data().iter().map(|&p| u8::from(p > threshold)).collect();
    BinaryMask::new(*prob.grid(), data)
}

/// Nearest-neighbour resample of a predicted mask onto a reference grid.
pub fn resample_to_reference(mask: &BinaryMask, reference: &Grid) -> Result<BinaryMask> {
    resample_mask_onto(mask, reference)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(dims: [usize; 3]) -> Grid {
        Grid::with_spacing(dims, [1.0; 3]).unwrap()
    }

    #[test]
    fn single_window_when_dims_equal_window() {
        let p = plan_windows(&grid([8, 8, 8]), 8, 0.5).unwrap();
        assert_eq!(p.origins, vec![[0, 0, 0]]);
    }

    #[test]
    fn stride_arithmetic() {
        let p = plan_windows(&grid([288, 10, 10]), 192, 0.5).unwrap();
        let xs: Vec<usize> = p
            .origins
            .iter()
            .filter(|o| o[1] == 0 && o[2] == 0)
            .map(|o| o[0])
            .collect();
        assert_eq!(xs, vec![0, 96]);
        assert_eq!(p.stride, [96; 3]);
    }

    #[test]
    fn small_volume_is_padded() {
        let p = plan_windows(&grid([5, 8, 3]), 8, 0.5).unwrap();
        assert_eq!(p.padded_dims, [8, 8, 8]);
        assert_eq!(p.pad_before, [1, 0, 2]);
        assert_eq!(p.origins.len(), 1);
    }

    #[test]
    fn last_window_abuts_border() {
        let p = plan_windows(&grid([21, 9, 9]), 8, 0.25).unwrap();
        assert!(p.covers_all());
        let max_x = p.origins.iter().map(|o| o[0]).max().unwrap();
        assert_eq!(max_x, 13);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(plan_windows(&grid([4, 4, 4]), 0, 0.5).is_err());
        assert!(plan_windows(&grid([4, 4, 4]), 2, 1.0).is_err());
    }

    #[test]
    fn constant_predictor_blends_to_constant() {
        let g = grid([13, 9, 7]);
        let pet = ScalarVolume::filled(g, 1.0, VolumeKind::PetSuv).unwrap();
        let ct = ScalarVolume::filled(g, 0.5, VolumeKind::CtNorm).unwrap();
        let pred = ConstantPredictor {
            background: 0.3,
            foreground: 1.1,
        };
        let want = sigmoid(0.8);
        for mode in [BlendMode::Uniform, BlendMode::Gaussian] {
            let plan = plan_windows(&g, 6, 0.5).unwrap();
            let [bg, fg] = sliding_window_inference(&pet, &ct, &plan, &pred, mode).unwrap();
            assert!(fg.data().iter().all(|&p| (p - want).abs() < 1e-12));
            assert!(bg.data().iter().all(|&p| (p - (1.0 - want)).abs() < 1e-12));
        }
    }

    #[test]
    fn overlap_is_averaged() {
        let g = grid([6, 1, 1]);
        let plan = plan_windows_with(&g, [4, 1, 1], 0.5).unwrap();
        assert_eq!(plan.origins, vec![[0, 0, 0], [2, 0, 0]]);
        let logit = |p: f64| (p / (1.0 - p)).ln();
        let wg = grid([4, 1, 1]);
        let a = Logits::constant(wg, 0.0, logit(0.2)).unwrap();
        let b = Logits::constant(wg, 0.0, logit(0.6)).unwrap();
        let [_, fg] = blend(&plan, &[a, b], BlendMode::Uniform).unwrap();
        let d = fg.data();
        assert!((d[0] - 0.2).abs() < 1e-12);
        assert!((d[2] - 0.4).abs() < 1e-12 && (d[3] - 0.4).abs() < 1e-12);
        assert!((d[5] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn blend_requires_every_window() {
        let g = grid([6, 1, 1]);
        let plan = plan_windows_with(&g, [4, 1, 1], 0.5).unwrap();
        let a = Logits::constant(grid([4, 1, 1]), 0.0, 0.0).unwrap();
        assert!(matches!(
            blend(&plan, &[a], BlendMode::Uniform),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn extract_pads_with_zero() {
        let g = grid([2, 2, 2]);
        let v = ScalarVolume::filled(g, 3.0, VolumeKind::PetSuv).unwrap();
        let plan = plan_windows(&g, 4, 0.5).unwrap();
        let w = plan.extract(&v, [0, 0, 0]).unwrap();
        assert_eq!(w.get(0, 0, 0), 0.0);
        assert_eq!(w.get(1, 1, 1), 3.0);
        assert_eq!(w.get(2, 2, 2), 3.0);
        assert_eq!(w.get(3, 3, 3), 0.0);
    }

    #[test]
    fn one_hot_members_average_to_fifth() {
        let g = grid([5, 1, 1]);
        let members: Vec<ScalarVolume> = (0..5)
            .map(|k| ScalarVolume::from_fn(g, VolumeKind::Prob, |x, _, _| if x == k { 1.0 } else { 0.0 }).unwrap())
            .collect();
        let avg = average_ensemble(&members).unwrap();
        assert!(avg.data().iter().all(|&p| (p - 0.2).abs() < 1e-15));
    }

    #[test]
    fn average_checks_inputs() {
        let a = ScalarVolume::filled(grid([2, 2, 2]), 0.0, VolumeKind::Prob).unwrap();
        let b = ScalarVolume::filled(grid([2, 2, 3]), 1.0, VolumeKind::Prob).unwrap();
        assert!(matches!(average_ensemble(&[a.clone(), b]), Err(Error::Shape(_))));
        assert!(average_ensemble(&[]).is_err());
        let one = ScalarVolume::filled(grid([2, 2, 2]), 1.0, VolumeKind::Prob).unwrap();
        assert!(average_ensemble(&[a, one]).unwrap().data().iter().all(|&p| p == 0.5));
    }

    #[test]
    fn logit_average_differs_from_probability_average() {
        let g = grid([1, 1, 1]);
        let a = Logits::constant(g, 0.0, 4.0).unwrap();
        let b = Logits::constant(g, 0.0, -1.0).unwrap();
        let via_logits = average_logits(&[a.clone(), b.clone()]).unwrap().data()[0];
        assert!((via_logits - sigmoid(1.5)).abs() < 1e-15);
        let via_probs = average_ensemble(&[a.foreground_probability().unwrap(), b.foreground_probability().unwrap()])
            .unwrap()
            .data()[0];
        assert!((via_probs - (sigmoid(4.0) + sigmoid(-1.0)) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn strict_threshold() {
        let g = grid([3, 1, 1]);
        let p = ScalarVolume::new(g, vec![0.2, 0.5, 0.8], VolumeKind::Prob).unwrap();
        assert_eq!(binarize(&p, 0.5).unwrap().data(), &[0, 0, 1]);
    }

    #[test]
    fn logits_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = grid([3, 2, 2]);
        let l = Logits::new(
            g,
            (0..12).map(|i| i as f64 * 0.5).collect(),
            (0..12).map(|i| -(i as f64)).collect(),
        )
        .unwrap();
        let path = dir.path().join(window_file_name([0, 96, 0]));
        assert!(path.ends_with("w_0_96_0.nii.gz"));
        l.write(&path).unwrap();
        assert_eq!(Logits::read(&path).unwrap(), l);
    }
}
