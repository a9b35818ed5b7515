//! Generalized Dice loss, focal loss and their sum, with analytic gradients.
//!
//! Inputs are two-class logits per voxel. The Dice term turns them into
//! class probabilities with a softmax over the two channels; the focal term
//! applies a logistic sigmoid to each channel independently.
//!
//! Per patch `i`, with class sums `S_l = Σ_j g_lj`:
//!
//! ```text
//! w_l   = 1 / S_l²
//! r_i   = (k · Σ_l w_l Σ_j p_lj g_lj + ε) / (Σ_l w_l Σ_j (p_lj + g_lj) + η)
//! GDL   = 1 − mean_i r_i
//! FL    = −mean_i Σ_l Σ_j v_l (1 − σ(z_lj))^γ g_lj log σ(z_lj)
//! ```
//!
//! `k` is the Dice numerator factor, 1 by default (2 gives the conventional
//! Dice normalisation where a perfect prediction scores 0).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

/// Lower clamp applied to σ inside the focal log.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub epsilon: f64,
    pub eta: f64,
    /// Focal weights `(v_0, v_1)` for background and foreground.
    pub focal_weights: [f64; 2],
    pub gamma: f64,
    pub dice_numerator_factor: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            epsilon: 1e-5,
            eta: 1e-5,
            focal_weights: [1.0, 100.0],
            gamma: 2.0,
            dice_numerator_factor: 1.0,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.epsilon > 0.0
            && self.eta > 0.0
            && self.gamma >= 0.0
            && self.focal_weights.iter().all(|&v| v > 0.0)
            && self.dice_numerator_factor > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid loss configuration {self:?}")))
        }
    }
}

/// A mini-batch of two-class logit patches with one-hot targets.
///
/// Values are laid out patch-major, then class, then voxel:
/// `index = (i * 2 + l) * n_voxels + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchBatch {
    n_patches: usize,
    n_voxels: usize,
    logits: Vec<f64>,
    target: Vec<f64>,
}

impl PatchBatch {
    pub fn new(n_patches: usize, n_voxels: usize, logits: Vec<f64>, target: Vec<f64>) -> Result<Self> {
        if n_patches == 0 || n_voxels == 0 {
            return Err(Error::Domain("batch needs at least one patch and one voxel".into()));
        }
        let len = n_patches * 2 * n_voxels;
        if logits.len() != len || target.len() != len {
            return Err(Error::Shape(format!(
                "expected {len} values for {n_patches} patches x 2 classes x {n_voxels} voxels, \
                 got {} logits and {} targets",
                logits.len(),
                target.len()
            )));
        }
        if let Some(k) = logits.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite logit {} at index {k}", logits[k])));
        }
        for i in 0..n_patches {
            let base = i * 2 * n_voxels;
            for j in 0..n_voxels {
                let g0 = target[base + j];
                let g1 = target[base + n_voxels + j];
                let binary = |g: f64| g == 0.0 || g == 1.0;
                if !binary(g0) || !binary(g1) || g0 + g1 != 1.0 {
                    return Err(Error::Data(format!(
                        "target at patch {i} voxel {j} is ({g0}, {g1}), not one-hot"
                    )));
                }
            }
        }
        Ok(PatchBatch {
            n_patches,
            n_voxels,
            logits,
            target,
        })
    }

    /// Build from logits and a foreground mask per patch (`n_patches *
    /// n_voxels` entries); the background target is its complement.
    pub fn from_foreground(n_patches: usize, logits: Vec<f64>, foreground: &[u8]) -> Result<Self> {
        if n_patches == 0 || !foreground.len().is_multiple_of(n_patches) {
            return Err(Error::Shape(format!(
                "{} mask voxels do not split into {n_patches} patches",
                foreground.len()
            )));
        }
        let n_voxels = foreground.len() / n_patches;
        let mut target = Vec::with_capacity(2 * foreground.len());
        for patch in foreground.chunks_exact(n_voxels) {
            target.extend(patch.iter().map(|&f| if f != 0 { 0.0 } else { 1.0 }));
            target.extend(patch.iter().map(|&f| if f != 0 { 1.0 } else { 0.0 }));
        }
        Self::new(n_patches, n_voxels, logits, target)
    }

    pub fn n_patches(&self) -> usize {
        self.n_patches
    }

    pub fn n_voxels(&self) -> usize {
        self.n_voxels
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    /// Same targets, different logits (used by finite-difference checks).
    pub fn with_logits(&self, logits: Vec<f64>) -> Result<Self> {
        Self::new(self.n_patches, self.n_voxels, logits, self.target.clone())
    }

    fn patch(&self, i: usize) -> ([&[f64]; 2], [&[f64]; 2]) {
        let v = self.n_voxels;
        let b = i * 2 * v;
        (
            [&self.logits[b..b + v], &self.logits[b + v..b + 2 * v]],
            [&self.target[b..b + v], &self.target[b + v..b + 2 * v]],
        )
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

/// `log σ(x)`, evaluated without overflow.
#[inline]
fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Class weights `1/S_l²`; an absent class takes the largest finite weight
/// in the patch, or 0 when no class is present.
pub fn class_weights(target: [&[f64]; 2]) -> [f64; 2] {
    let sums = target.map(|g| g.iter().sum::<f64>());
    let raw = sums.map(|s| if s > 0.0 { 1.0 / (s * s) } else { f64::INFINITY });
    let max_finite = raw
        .iter()
        .copied()
        .filter(|w| w.is_finite())
        .fold(None, |m: Option<f64>, w| Some(m.map_or(w, |m| m.max(w))));
    raw.map(|w| if w.is_finite() { w } else { max_finite.unwrap_or(0.0) })
}

/// Per-patch Dice statistics on class probabilities.
struct DiceTerms {
    weights: [f64; 2],
    numerator: f64,
    denominator: f64,
}

impl DiceTerms {
    fn ratio(&self) -> f64 {
        self.numerator / self.denominator
    }
}

fn dice_terms(probs: [&[f64]; 2], target: [&[f64]; 2], cfg: &LossConfig) -> DiceTerms {
    let weights = class_weights(target);
    let mut inter = 0.0;
    let mut total = 0.0;
    for l in 0..2 {
        let (mut pg, mut sum) = (0.0, 0.0);
        for (&p, &g) in probs[l].iter().zip(target[l]) {
            pg += p * g;
            sum += p + g;
        }
        inter += weights[l] * pg;
        total += weights[l] * sum;
    }
    DiceTerms {
        weights,
        numerator: cfg.dice_numerator_factor * inter + cfg.epsilon,
        denominator: total + cfg.eta,
    }
}

fn softmax_pair(z: [&[f64]; 2]) -> [Vec<f64>; 2] {
    let p1: Vec<f64> = z[0].iter().zip(z[1]).map(|(&a, &b)| sigmoid(b - a)).collect();
    let p0: Vec<f64> = z[0].iter().zip(z[1]).map(|(&a, &b)| sigmoid(a - b)).collect();
    [p0, p1]
}

/// Focal sum for one patch given per-class sigmoid log-probabilities.
fn focal_patch(z: [&[f64]; 2], target: [&[f64]; 2], cfg: &LossConfig) -> f64 {
    let floor = LOG_FLOOR.ln();
    let mut acc = 0.0;
    for l in 0..2 {
        let v = cfg.focal_weights[l];
        for (&x, &g) in z[l].iter().zip(target[l]) {
            if g == 0.0 {
                continue;
            }
            let one_minus = sigmoid(-x);
            acc += v * one_minus.powf(cfg.gamma) * g * log_sigmoid(x).max(floor);
        }
    }
    acc
}

fn mean_in_order(parts: Vec<f64>) -> f64 {
    let n = parts.len() as f64;
    parts.into_iter().sum::<f64>() / n
}

/// Generalized Dice loss on logits (softmax over the two classes).
pub fn generalized_dice_loss(batch: &PatchBatch, cfg: &LossConfig) -> Result<f64> {
    cfg.validate()?;
    let ratios = par::map_range(batch.n_patches, |i| {
        let (z, g) = batch.patch(i);
        let [p0, p1] = softmax_pair(z);
        dice_terms([&p0, &p1], g, cfg).ratio()
    });
    Ok(1.0 - mean_in_order(ratios))
}

/// Focal loss on logits (sigmoid per class).
pub fn focal_loss(batch: &PatchBatch, cfg: &LossConfig) -> Result<f64> {
    cfg.validate()?;
    let sums = par::map_range(batch.n_patches, |i| {
        let (z, g) = batch.patch(i);
        focal_patch(z, g, cfg)
    });
    Ok(-mean_in_order(sums))
}

/// Sum of the Generalized Dice and focal losses.
pub fn gdfl(batch: &PatchBatch, cfg: &LossConfig) -> Result<f64> {
    Ok(generalized_dice_loss(batch, cfg)? + focal_loss(batch, cfg)?)
}

/// All three loss values at once.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossValues {
    pub gdl: f64,
    pub fl: f64,
    pub gdfl: f64,
}

pub fn loss_values(batch: &PatchBatch, cfg: &LossConfig) -> Result<LossValues> {
    let gdl = generalized_dice_loss(batch, cfg)?;
    let fl = focal_loss(batch, cfg)?;
    Ok(LossValues {
        gdl,
        fl,
        gdfl: gdl + fl,
    })
}

/// Losses evaluated directly on class probabilities in `[0, 1]` instead of
/// logits: the Dice term uses them as the class probabilities and the focal
/// term as the sigmoid outputs. `probs` uses the [`PatchBatch`] layout.
pub fn loss_values_from_probs(n_patches: usize, probs: &[f64], target: &[f64], cfg: &LossConfig) -> Result<LossValues> {
    cfg.validate()?;
    if let Some(k) = probs.iter().position(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Data(format!(
            "probability {} at index {k} outside [0, 1]",
            probs[k]
        )));
    }
    // validates shape and one-hot targets; probabilities stand in for logits
    let batch = PatchBatch::new(
        n_patches,
        probs.len() / (2 * n_patches.max(1)),
        probs.to_vec(),
        target.to_vec(),
    )?;
    let floor = LOG_FLOOR.ln();
    let parts = par::map_range(n_patches, |i| {
        let (p, g) = batch.patch(i);
        let ratio = dice_terms(p, g, cfg).ratio();
        let mut focal = 0.0;
        for l in 0..2 {
            for (&s, &t) in p[l].iter().zip(g[l]) {
                if t != 0.0 {
                    focal += cfg.focal_weights[l] * (1.0 - s).powf(cfg.gamma) * t * s.ln().max(floor);
                }
            }
        }
        (ratio, focal)
    });
    let n = n_patches as f64;
    let gdl = 1.0 - parts.iter().map(|p| p.0).sum::<f64>() / n;
    let fl = -parts.iter().map(|p| p.1).sum::<f64>() / n;
    Ok(LossValues {
        gdl,
        fl,
        gdfl: gdl + fl,
    })
}

/// Analytic gradient of the Generalized Dice loss w.r.t. every logit.
pub fn generalized_dice_gradient(batch: &PatchBatch, cfg: &LossConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let nb = batch.n_patches as f64;
    let per_patch = par::map_range(batch.n_patches, |i| {
        let (z, g) = batch.patch(i);
        let [p0, p1] = softmax_pair(z);
        let terms = dice_terms([&p0, &p1], g, cfg);
        let r = terms.ratio();
        let k = cfg.dice_numerator_factor;
        let v = batch.n_voxels;
        let mut grad = vec![0.0; 2 * v];
        for j in 0..v {
            // dL/dp_lj = -(1/n_b) w_l (k g_lj - r) / B
            let dp0 = -terms.weights[0] * (k * g[0][j] - r) / (terms.denominator * nb);
            let dp1 = -terms.weights[1] * (k * g[1][j] - r) / (terms.denominator * nb);
            let jac = p0[j] * p1[j];
            let dz1 = (dp1 - dp0) * jac;
            grad[j] = -dz1;
            grad[v + j] = dz1;
        }
        grad
    });
    Ok(per_patch.concat())
}

/// Analytic gradient of the focal loss w.r.t. every logit. Where the log
/// clamp is active the log term is constant and contributes no slope.
pub fn focal_gradient(batch: &PatchBatch, cfg: &LossConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let nb = batch.n_patches as f64;
    let floor = LOG_FLOOR.ln();
    let per_patch = par::map_range(batch.n_patches, |i| {
        let (z, g) = batch.patch(i);
        let v = batch.n_voxels;
        let mut grad = vec![0.0; 2 * v];
        for l in 0..2 {
            for j in 0..v {
                let t = g[l][j];
                if t == 0.0 {
                    continue;
                }
                let x = z[l][j];
                let s = sigmoid(x);
                let one_minus = sigmoid(-x);
                let raw_log = log_sigmoid(x);
                let (log_s, dlog) = if raw_log > floor {
                    (raw_log, one_minus)
                } else {
                    (floor, 0.0)
                };
                let d = one_minus.powf(cfg.gamma) * (dlog - cfg.gamma * s * log_s);
                grad[l * v + j] = -cfg.focal_weights[l] * t * d / nb;
            }
        }
        grad
    });
    Ok(per_patch.concat())
}

/// Gradient of GDL + FL w.r.t. every logit, in [`PatchBatch`] layout.
pub fn gdfl_gradient(batch: &PatchBatch, cfg: &LossConfig) -> Result<Vec<f64>> {
    let mut g = generalized_dice_gradient(batch, cfg)?;
    let f = focal_gradient(batch, cfg)?;
    for (a, b) in g.iter_mut().zip(f) {
        *a += b;
    }
    Ok(g)
}
