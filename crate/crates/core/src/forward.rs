//! Forward model: homogeneous-volume-conductor lead vectors, electrode-grid
//! montages, and the maternal + fetal + noise abdominal mixture.
//!
//! Coordinate convention (meters): `x` anterior, `y` toward the maternal
//! left, `z` up. The electrode belt is a cylinder about the `z` axis; grid
//! columns step around the circumference, rows step down the height.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::dipole::{integrate_trajectory, DipoleModelParams, DipoleTrajectory, HeartRhythm};
use crate::error::{FecgError, Result};
use crate::linalg::{det3, orthonormality_defect, rot_y, rot_z};

/// Channel wiring convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Montage {
    /// Every electrode against one shared reference electrode.
    Monopolar,
    /// Differences between vertically adjacent electrodes within a column.
    NeighborDifferential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Torso {
    pub radius: f64,
    pub height: f64,
}

/// Electrode belt on the torso surface with grid indexing.
///
/// Electrodes are stored row-major: index = `row * n_cols + col`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectrodeArray {
    pub positions: Vec<[f64; 3]>,
    pub n_rows: usize,
    pub n_cols: usize,
    pub reference: Option<usize>,
    pub montage: Montage,
    pub torso: Torso,
    pub maternal_heart: [f64; 3],
    pub fetal_heart: [f64; 3],
}

/// Grid placement of each channel, used to align MI maps with the array.
#[derive(Debug, Clone, PartialEq)]
pub struct GridLayout {
    pub n_rows: usize,
    pub n_cols: usize,
    /// One `(row, col)` cell per channel. Differential channels are aligned
    /// to the upper electrode of their pair.
    pub cells: Vec<(usize, usize)>,
}

impl ElectrodeArray {
    /// Build a regular grid on a cylinder. Columns are spread uniformly
    /// around the circumference (column 0 starting at the maternal
    /// right-back), rows top-down over the height.
    pub fn cylinder_grid(
        n_rows: usize,
        n_cols: usize,
        torso: Torso,
        reference_cell: Option<(usize, usize)>,
        maternal_heart: [f64; 3],
        fetal_heart: [f64; 3],
        montage: Montage,
    ) -> Result<Self> {
        if n_rows < 2 || n_cols < 1 {
            return Err(FecgError::InvalidParameter(
                "grid needs at least 2 rows and 1 column".into(),
            ));
        }
        let mut positions = Vec::with_capacity(n_rows * n_cols);
        let dz = torso.height / (n_rows as f64 - 1.0);
        for r in 0..n_rows {
            let z = torso.height / 2.0 - r as f64 * dz;
            for c in 0..n_cols {
                let az = azimuth_of_col(c as f64, n_cols);
                positions.push([torso.radius * az.cos(), torso.radius * az.sin(), z]);
            }
        }
        let reference = match reference_cell {
            Some((r, c)) => {
                if r >= n_rows || c >= n_cols {
                    return Err(FecgError::InvalidParameter(format!(
                        "reference cell ({r},{c}) outside {n_rows}x{n_cols} grid"
                    )));
                }
                Some(r * n_cols + c)
            }
            None => None,
        };
        let array = Self {
            positions,
            n_rows,
            n_cols,
            reference,
            montage,
            torso,
            maternal_heart,
            fetal_heart,
        };
        array.validate()?;
        Ok(array)
    }

    /// The simulated dense belt: 144 electrodes in an 8-column by 18-row
    /// grid, maternal heart near the upper-left cells, fetal heart near the
    /// lower-right cells, reference electrode at the navel (front, mid
    /// height).
    pub fn sim_belt_8x18(montage: Montage) -> Self {
        let torso = Torso {
            radius: 0.13,
            height: 0.45,
        };
        let maternal_heart = heart_on_cylinder(1.2, 8, 0.09, 0.16);
        let fetal_heart = heart_on_cylinder(5.5, 8, 0.085, -0.12);
        Self::cylinder_grid(
            18,
            8,
            torso,
            Some((9, 3)),
            maternal_heart,
            fetal_heart,
            montage,
        )
        .expect("preset geometry")
    }

    /// The coarse belt matching the physical system: 72 electrodes in an
    /// 8-column by 9-row grid.
    pub fn real_belt_8x9(montage: Montage) -> Self {
        let torso = Torso {
            radius: 0.13,
            height: 0.45,
        };
        let maternal_heart = heart_on_cylinder(1.2, 8, 0.09, 0.16);
        let fetal_heart = heart_on_cylinder(5.5, 8, 0.085, -0.12);
        Self::cylinder_grid(
            9,
            8,
            torso,
            Some((4, 3)),
            maternal_heart,
            fetal_heart,
            montage,
        )
        .expect("preset geometry")
    }

    pub fn validate(&self) -> Result<()> {
        if self.positions.len() != self.n_rows * self.n_cols {
            return Err(FecgError::InvalidParameter(format!(
                "{} electrodes inconsistent with {}x{} grid",
                self.positions.len(),
                self.n_rows,
                self.n_cols
            )));
        }
        for (i, a) in self.positions.iter().enumerate() {
            if a.iter().any(|v| !v.is_finite()) {
                return Err(FecgError::InvalidParameter(format!(
                    "electrode {i} has non-finite position"
                )));
            }
            for b in &self.positions[..i] {
                if a == b {
                    return Err(FecgError::InvalidParameter(format!(
                        "duplicate electrode position at index {i}"
                    )));
                }
            }
        }
        if let Some(r) = self.reference {
            if r >= self.positions.len() {
                return Err(FecgError::InvalidParameter(format!(
                    "reference electrode {r} out of range"
                )));
            }
        }
        if self.montage == Montage::Monopolar && self.reference.is_none() {
            return Err(FecgError::InvalidParameter(
                "monopolar montage requires a reference electrode".into(),
            ));
        }
        Ok(())
    }

    pub fn n_electrodes(&self) -> usize {
        self.positions.len()
    }

    pub fn electrode_index(&self, row: usize, col: usize) -> usize {
        row * self.n_cols + col
    }

    pub fn cell_of(&self, electrode: usize) -> (usize, usize) {
        (electrode / self.n_cols, electrode % self.n_cols)
    }

    /// Number of channels produced by the current montage.
    pub fn channel_count(&self) -> usize {
        match self.montage {
            Montage::Monopolar => self.n_electrodes(),
            Montage::NeighborDifferential => (self.n_rows - 1) * self.n_cols,
        }
    }

    /// Grid cell each channel is aligned to.
    pub fn grid_layout(&self) -> GridLayout {
        let cells = match self.montage {
            Montage::Monopolar => (0..self.n_electrodes()).map(|i| self.cell_of(i)).collect(),
            Montage::NeighborDifferential => {
                let mut cells = Vec::with_capacity(self.channel_count());
                for r in 0..self.n_rows - 1 {
                    for c in 0..self.n_cols {
                        cells.push((r, c));
                    }
                }
                cells
            }
        };
        GridLayout {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            cells,
        }
    }

    pub fn channel_labels(&self) -> Vec<String> {
        match self.montage {
            Montage::Monopolar => (0..self.n_electrodes())
                .map(|i| {
                    let (r, c) = self.cell_of(i);
                    format!("r{r}c{c}")
                })
                .collect(),
            Montage::NeighborDifferential => {
                let mut labels = Vec::with_capacity(self.channel_count());
                for r in 0..self.n_rows - 1 {
                    for c in 0..self.n_cols {
                        labels.push(format!("r{r}-r{}c{c}", r + 1));
                    }
                }
                labels
            }
        }
    }

    pub fn nearest_electrode(&self, point: [f64; 3]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.positions.iter().enumerate() {
            let d = dist2(*p, point);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let array: Self =
            serde_json::from_str(text).map_err(|e| FecgError::Parse(format!("geometry: {e}")))?;
        array.validate()?;
        Ok(array)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("geometry serialize")
    }
}

fn azimuth_of_col(col: f64, n_cols: usize) -> f64 {
    -std::f64::consts::PI + TAU * (col + 0.5) / n_cols as f64
}

fn heart_on_cylinder(col: f64, n_cols: usize, radius: f64, z: f64) -> [f64; 3] {
    let az = azimuth_of_col(col, n_cols);
    [radius * az.cos(), radius * az.sin(), z]
}

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// Passive resistive medium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeConductor {
    /// Conductivity in S/m.
    pub conductivity: f64,
}

impl VolumeConductor {
    pub fn new(conductivity: f64) -> Result<Self> {
        if !(conductivity > 0.0) {
            return Err(FecgError::InvalidParameter(format!(
                "conductivity must be positive, got {conductivity}"
            )));
        }
        Ok(Self { conductivity })
    }
}

/// Lead (gain) vector of one electrode for a dipole at `heart`:
/// `r / (4*pi*sigma*|r|^3)` with `r = electrode - heart`. The electrode
/// potential is the dot product of this vector with the dipole moment.
pub fn lead_vector(electrode: [f64; 3], heart: [f64; 3], sigma: f64) -> Result<[f64; 3]> {
    if !(sigma > 0.0) {
        return Err(FecgError::InvalidParameter("sigma must be positive".into()));
    }
    let r = [
        electrode[0] - heart[0],
        electrode[1] - heart[1],
        electrode[2] - heart[2],
    ];
    let norm2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
    if norm2 == 0.0 {
        return Err(FecgError::InvalidParameter(
            "electrode coincides with the dipole location".into(),
        ));
    }
    let norm = norm2.sqrt();
    let scale = 1.0 / (4.0 * std::f64::consts::PI * sigma * norm2 * norm);
    Ok([r[0] * scale, r[1] * scale, r[2] * scale])
}

/// Volume-conductor transfer matrix (channels x 3) for one heart.
///
/// Monopolar rows are `lead(e_i) - lead(e_ref)`; the reference electrode's
/// own row is identically zero. Differential rows subtract the lead vector
/// of the electrode one grid row below in the same column.
pub fn build_transfer_matrix(
    array: &ElectrodeArray,
    heart: [f64; 3],
    sigma: f64,
) -> Result<Array2<f64>> {
    array.validate()?;
    match array.montage {
        Montage::Monopolar => {
            let r = array.reference.ok_or_else(|| {
                FecgError::InvalidParameter("monopolar montage requires a reference".into())
            })?;
            let lead_ref = lead_vector(array.positions[r], heart, sigma)?;
            let mut h = Array2::<f64>::zeros((array.n_electrodes(), 3));
            for (i, pos) in array.positions.iter().enumerate() {
                let lead = lead_vector(*pos, heart, sigma)?;
                for k in 0..3 {
                    h[[i, k]] = lead[k] - lead_ref[k];
                }
            }
            Ok(h)
        }
        Montage::NeighborDifferential => {
            let mut h = Array2::<f64>::zeros((array.channel_count(), 3));
            let mut ch = 0;
            for r in 0..array.n_rows - 1 {
                for c in 0..array.n_cols {
                    let upper = lead_vector(
                        array.positions[array.electrode_index(r, c)],
                        heart,
                        sigma,
                    )?;
                    let lower = lead_vector(
                        array.positions[array.electrode_index(r + 1, c)],
                        heart,
                        sigma,
                    )?;
                    for k in 0..3 {
                        h[[ch, k]] = upper[k] - lower[k];
                    }
                    ch += 1;
                }
            }
            Ok(h)
        }
    }
}

/// Fetal presentation presets encoded as rotations of the fetal dipole frame
/// into the maternal frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FetalPreset {
    Identity,
    Vertex,
    Breech,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Facing {
    Left,
    Right,
}

/// Rotation for a fetal presentation. Breech composes a half-turn about the
/// maternal transverse (left-right) axis with a quarter-turn about the
/// longitudinal axis toward the facing side; vertex applies the facing
/// quarter-turn only.
pub fn fetal_rotation(preset: FetalPreset, facing: Facing) -> Array2<f64> {
    let sign = match facing {
        Facing::Left => 1.0,
        Facing::Right => -1.0,
    };
    match preset {
        FetalPreset::Identity => Array2::eye(3),
        FetalPreset::Vertex => rot_z(sign * std::f64::consts::FRAC_PI_2),
        FetalPreset::Breech => {
            rot_z(sign * std::f64::consts::FRAC_PI_2).dot(&rot_y(std::f64::consts::PI))
        }
    }
}

/// Project a dipole trajectory through `H * R * diag(lambda)`.
pub fn project(
    h: &Array2<f64>,
    rotation: &Array2<f64>,
    lambda: [f64; 3],
    coords: &Array2<f64>,
) -> Result<Array2<f64>> {
    if h.ncols() != 3 || rotation.dim() != (3, 3) || coords.nrows() != 3 {
        return Err(FecgError::DimensionMismatch(format!(
            "project expects H(N x 3), R(3 x 3), coords(3 x T); got H {:?}, R {:?}, coords {:?}",
            h.dim(),
            rotation.dim(),
            coords.dim()
        )));
    }
    let mut hr = h.dot(rotation);
    for (mut col, l) in hr.columns_mut().into_iter().zip(lambda) {
        col.mapv_inplace(|v| v * l);
    }
    Ok(hr.dot(coords))
}

/// Non-stationary measurement-noise model: Gaussian noise shaped by a
/// one-pole low-pass (pole = `color`) and amplitude-modulated by a slow
/// sinusoidal envelope with per-channel random phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Stationary standard deviation, in channel units.
    pub base_std: f64,
    /// Envelope period in seconds.
    pub envelope_period: f64,
    /// Envelope modulation depth in `[0, 1)`.
    pub envelope_depth: f64,
    /// Low-pass pole in `[0, 1)`; 0 leaves the noise white.
    pub color: f64,
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.base_std < 0.0 {
            return Err(FecgError::InvalidParameter("base_std must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.envelope_depth) {
            return Err(FecgError::InvalidParameter(
                "envelope_depth must be in [0, 1)".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.color) {
            return Err(FecgError::InvalidParameter("color must be in [0, 1)".into()));
        }
        if self.envelope_period <= 0.0 {
            return Err(FecgError::InvalidParameter(
                "envelope_period must be positive".into(),
            ));
        }
        Ok(())
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Add noise in place. Each channel gets an independent stream derived from
/// `seed` and the channel index, so the result does not depend on the order
/// channels are processed in.
pub fn add_noise(channels: &mut Array2<f64>, cfg: &NoiseConfig, sample_rate: f64, seed: u64) {
    if cfg.base_std == 0.0 {
        return;
    }
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    // Innovation gain keeping the AR(1) stationary variance at 1.
    let gain = (1.0 - cfg.color * cfg.color).sqrt();
    for (ch, mut row) in channels.rows_mut().into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ (ch as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)));
        let phase: f64 = rng.gen_range(0.0..TAU);
        let mut w: f64 = normal.sample(&mut rng); // stationary start
        for (t, v) in row.iter_mut().enumerate() {
            if t > 0 {
                w = cfg.color * w + gain * normal.sample(&mut rng);
            }
            let envelope = 1.0
                + cfg.envelope_depth
                    * (TAU * t as f64 / (cfg.envelope_period * sample_rate) + phase).sin();
            *v += cfg.base_std * envelope * w;
        }
    }
}

/// Uniform quantizer clipped to `[-full_scale, full_scale]`. The mid-rise
/// lattice is offset by half a step (round-to-nearest level), so zero input
/// reproduces exactly.
pub fn quantize(channels: &mut Array2<f64>, bits: u32, full_scale: f64) -> Result<()> {
    if !(full_scale > 0.0) {
        return Err(FecgError::InvalidParameter(
            "full_scale must be positive".into(),
        ));
    }
    if bits == 0 || bits > 31 {
        return Err(FecgError::InvalidParameter(format!(
            "bits must be in 1..=31, got {bits}"
        )));
    }
    let levels = 1i64 << bits;
    let step = 2.0 * full_scale / levels as f64;
    let code_min = -(levels / 2);
    let code_max = levels / 2 - 1;
    channels.mapv_inplace(|v| {
        let code = (v / step).round() as i64;
        let code = code.clamp(code_min, code_max);
        code as f64 * step
    });
    Ok(())
}

/// A heart in the mixture: dipole morphology + rhythm + orientation + axis
/// scaling.
#[derive(Debug, Clone)]
pub struct HeartModel {
    pub params: DipoleModelParams,
    pub rhythm: HeartRhythm,
    pub rotation: Array2<f64>,
    pub lambda: [f64; 3],
}

impl HeartModel {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.rhythm.validate()?;
        if self.rotation.dim() != (3, 3) {
            return Err(FecgError::DimensionMismatch("rotation must be 3x3".into()));
        }
        if orthonormality_defect(&self.rotation) > 1e-10 {
            return Err(FecgError::InvalidParameter(
                "rotation is not orthonormal within 1e-10".into(),
            ));
        }
        if (det3(&self.rotation) - 1.0).abs() > 1e-10 {
            return Err(FecgError::InvalidParameter(
                "rotation determinant must be +1".into(),
            ));
        }
        if self.lambda.iter().any(|&l| !(l > 0.0)) {
            return Err(FecgError::InvalidParameter(
                "lambda entries must be strictly positive".into(),
            ));
        }
        Ok(())
    }
}

/// Multichannel recording with metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordingSet {
    /// Channels x samples.
    pub data: Array2<f64>,
    pub sample_rate: f64,
    pub labels: Vec<String>,
    /// Channels flagged invalid are excluded from downstream selection.
    pub valid: Vec<bool>,
}

impl RecordingSet {
    pub fn new(data: Array2<f64>, sample_rate: f64, labels: Vec<String>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(FecgError::InvalidParameter(
                "recording must have at least one channel and one sample".into(),
            ));
        }
        if labels.len() != data.nrows() {
            return Err(FecgError::DimensionMismatch(format!(
                "{} labels for {} channels",
                labels.len(),
                data.nrows()
            )));
        }
        let valid = vec![true; data.nrows()];
        Ok(Self {
            data,
            sample_rate,
            labels,
            valid,
        })
    }

    pub fn n_channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.data.ncols()
    }

    pub fn channel(&self, i: usize) -> Vec<f64> {
        self.data.row(i).to_vec()
    }

    pub fn valid_channels(&self) -> Vec<usize> {
        (0..self.n_channels()).filter(|&i| self.valid[i]).collect()
    }
}

/// Output of the abdominal mixture: the noisy recording plus the noise-free
/// per-channel maternal and fetal contributions (the "pure" references) and
/// the ground-truth beat instants of both hearts.
#[derive(Debug, Clone)]
pub struct AbdominalMix {
    pub recordings: RecordingSet,
    pub maternal_reference: Array2<f64>,
    pub fetal_reference: Array2<f64>,
    pub maternal_trajectory: DipoleTrajectory,
    pub fetal_trajectory: DipoleTrajectory,
}

/// Simulate the abdominal mixture of both hearts plus channel noise.
///
/// Deterministic for fixed configuration and `seed`; the per-heart rhythm
/// seeds keep the two dipole streams independent.
pub fn mix_abdominal(
    array: &ElectrodeArray,
    sigma: f64,
    maternal: &HeartModel,
    fetal: &HeartModel,
    noise: &NoiseConfig,
    duration: f64,
    sample_rate: f64,
    seed: u64,
) -> Result<AbdominalMix> {
    array.validate()?;
    maternal.validate()?;
    fetal.validate()?;
    noise.validate()?;

    let h_m = build_transfer_matrix(array, array.maternal_heart, sigma)?;
    let h_f = build_transfer_matrix(array, array.fetal_heart, sigma)?;

    let traj_m = integrate_trajectory(&maternal.params, &maternal.rhythm, duration, sample_rate, seed)?;
    let traj_f = integrate_trajectory(&fetal.params, &fetal.rhythm, duration, sample_rate, seed)?;

    let ref_m = project(&h_m, &maternal.rotation, maternal.lambda, &traj_m.coords)?;
    let ref_f = project(&h_f, &fetal.rotation, fetal.lambda, &traj_f.coords)?;

    let mut data = &ref_m + &ref_f;
    add_noise(&mut data, noise, sample_rate, splitmix64(seed ^ 0x6E6F_6973_6500_0000));

    let recordings = RecordingSet::new(data, sample_rate, array.channel_labels())?;
    Ok(AbdominalMix {
        recordings,
        maternal_reference: ref_m,
        fetal_reference: ref_f,
        maternal_trajectory: traj_m,
        fetal_trajectory: traj_f,
    })
}
