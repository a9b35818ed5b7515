//! PET/CT lesion segmentation toolkit.
//!
//! Volumetric kernels for the non-training half of a whole-body PET/CT
//! segmentation pipeline: NIfTI I/O, SUV conversion and resampling, a
//! seeded augmentation suite, Generalized Dice + Focal loss with analytic
//! gradients, connected-component challenge metrics (DSC, false positive and
//! false negative volume), lesion burden (MTV, TLG), sliding-window fusion
//! and challenge rank aggregation.
//!
//! Work that is data-parallel (per slice, per window, per case) runs on rayon
//! when the `parallel` feature is enabled (the default) and sequentially
//! otherwise; results are identical either way.

pub mod augment;
pub mod batch;
pub mod components;
pub mod ensemble;
pub mod error;
pub mod interp;
pub mod lesion;
pub mod losses;
pub mod metrics;
pub mod nifti;
pub mod par;
pub mod preprocess;
pub mod ranking;
pub mod synthetic;
pub mod volume;

pub use error::{Error, Result};
pub use volume::{voxel_volume_ml, BinaryMask, Grid, LabelMap, ScalarVolume, VolumeKind};
