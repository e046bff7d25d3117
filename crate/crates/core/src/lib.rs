//! Simulation, channel selection, and fetal ECG extraction for multichannel
//! maternal-abdominal recordings.
//!
//! The crate covers the full offline chain:
//!
//! * [`dipole`] — a 3-D dynamic cardiac-dipole generator driven by sums of
//!   Gaussian kernels over the beat phase;
//! * [`forward`] — the homogeneous-volume-conductor forward model mapping
//!   dipole trajectories to electrode grids (monopolar and
//!   neighbor-differential montages), plus the maternal + fetal + noise
//!   abdominal mixture;
//! * [`mi`] — mutual-information estimators (equiprobable-binned and
//!   KSG k-nearest-neighbor) and per-electrode MI maps;
//! * [`preprocess`] — baseline removal, R-peak detection, dead-channel
//!   rejection, channel classification, least-squares transfer fitting, and
//!   synthetic reference construction;
//! * [`selection`] — the greedy MI channel-selection rules;
//! * [`ica`] — whitening plus JADE for extracting independent components and
//!   ranking them by fetal content.

pub mod dipole;
pub mod error;
pub mod forward;
pub mod ica;
pub mod io;
pub mod linalg;
pub mod mi;
pub mod preprocess;
pub mod selection;

pub use error::{FecgError, Result};
