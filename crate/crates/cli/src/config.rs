//! Experiment configuration: one JSON document covering simulation,
//! preprocessing, MI estimation, selection, and extraction. Every field has
//! a default; the fully resolved config is echoed into the run manifest and
//! its SHA-256 hash is embedded in every output file.

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

use fecg_core::dipole::DipoleModelParams;
use fecg_core::forward::{
    fetal_rotation, ElectrodeArray, Facing, FetalPreset, HeartModel, Montage, NoiseConfig,
};
use fecg_core::linalg::{rot_x, rot_y, rot_z};
use fecg_core::preprocess::RejectConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Master seed; mandatory (set it in the file or pass `--seed`).
    pub seed: Option<u64>,
    pub output_dir: String,
    pub simulation: SimulationConfig,
    pub preprocess: PreprocessConfig,
    pub mi: MiSection,
    pub selection: SelectionSection,
    pub ica: IcaSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: None,
            output_dir: "out".into(),
            simulation: SimulationConfig::default(),
            preprocess: PreprocessConfig::default(),
            mi: MiSection::default(),
            selection: SelectionSection::default(),
            ica: IcaSection::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub geometry: GeometrySource,
    pub montage: Montage,
    pub conductivity: f64,
    pub duration_s: f64,
    pub sample_rate: f64,
    pub maternal: MaternalConfig,
    pub fetal: FetalConfig,
    pub noise: NoiseSection,
    pub quantize: Option<QuantizeSection>,
    pub format: FileFormat,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            geometry: GeometrySource::default(),
            montage: Montage::Monopolar,
            conductivity: 0.2,
            duration_s: 60.0,
            sample_rate: 1000.0,
            maternal: MaternalConfig::default(),
            fetal: FetalConfig::default(),
            noise: NoiseSection::default(),
            quantize: None,
            format: FileFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FileFormat {
    Csv,
    Binary,
}

/// Geometry comes from a built-in preset or a JSON file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometrySource {
    pub preset: Option<String>,
    pub file: Option<String>,
}

impl Default for GeometrySource {
    fn default() -> Self {
        Self {
            preset: Some("grid8x18".into()),
            file: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsSource {
    pub preset: Option<String>,
    pub file: Option<String>,
    /// Override for the per-beat parameter deviation.
    pub deviation_fraction: Option<f64>,
}

impl Default for ParamsSource {
    fn default() -> Self {
        Self {
            preset: Some("adult".into()),
            file: None,
            deviation_fraction: None,
        }
    }
}

// No standalone default: the maternal and fetal sections carry their own
// rhythm defaults, and a rhythm given explicitly must be complete.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhythmSection {
    pub mean_rate: f64,
    pub rate_std: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaternalConfig {
    pub params: ParamsSource,
    pub rhythm: RhythmSection,
    /// Maternal dipole orientation as extrinsic x-y-z Euler angles, degrees.
    pub rotation_euler_deg: [f64; 3],
    pub lambda: [f64; 3],
}

impl Default for MaternalConfig {
    fn default() -> Self {
        Self {
            params: ParamsSource::default(),
            rhythm: RhythmSection {
                mean_rate: 1.2,
                rate_std: 0.02,
                seed: 101,
            },
            rotation_euler_deg: [0.0; 3],
            lambda: [1.0; 3],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FetalConfig {
    pub params: ParamsSource,
    pub rhythm: RhythmSection,
    pub rotation: FetalRotationSection,
    /// Defaults to one tenth of the maternal scaling when absent.
    pub lambda: Option<[f64; 3]>,
}

impl Default for FetalConfig {
    fn default() -> Self {
        Self {
            params: ParamsSource::default(),
            rhythm: RhythmSection {
                mean_rate: 2.4,
                rate_std: 0.04,
                seed: 202,
            },
            rotation: FetalRotationSection::default(),
            lambda: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FetalRotationSection {
    pub preset: FetalPreset,
    pub facing: Facing,
}

impl Default for FetalRotationSection {
    fn default() -> Self {
        Self {
            preset: FetalPreset::Breech,
            facing: Facing::Left,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub base_std: f64,
    pub envelope_period_s: f64,
    pub envelope_depth: f64,
    pub color: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            base_std: 0.5,
            envelope_period_s: 15.0,
            envelope_depth: 0.5,
            color: 0.9,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantizeSection {
    pub bits: u32,
    pub full_scale: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    pub baseline: bool,
    pub maternal_rate_band: [f64; 2],
    pub fetal_rate_band: [f64; 2],
    pub reject: RejectSection,
    pub maternal_template_window_s: f64,
    pub fetal_template_window_s: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            baseline: true,
            maternal_rate_band: [0.7, 2.5],
            fetal_rate_band: [1.8, 4.5],
            reject: RejectSection::default(),
            maternal_template_window_s: 0.3,
            fetal_template_window_s: 0.2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RejectSection {
    pub min_std: f64,
    pub max_rail_fraction: f64,
    pub max_spectral_flatness: f64,
}

impl Default for RejectSection {
    fn default() -> Self {
        let d = RejectConfig::default();
        Self {
            min_std: d.min_std,
            max_rail_fraction: d.max_rail_fraction,
            max_spectral_flatness: d.max_spectral_flatness,
        }
    }
}

impl RejectSection {
    pub fn to_core(&self) -> RejectConfig {
        RejectConfig {
            min_std: self.min_std,
            max_rail_fraction: self.max_rail_fraction,
            max_spectral_flatness: self.max_spectral_flatness,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MiSection {
    pub bins: usize,
    pub knn_k: usize,
}

impl Default for MiSection {
    fn default() -> Self {
        Self { bins: 16, knn_k: 4 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionSection {
    /// `maternal1` or `maternal2`.
    pub rule: String,
    pub k: usize,
    /// Channels to keep with the fetal rule after maternal rule 1;
    /// 0 disables the fetal stage.
    pub m: usize,
    pub redundancy_weight: f64,
    /// Retained dimension of the full-set reference ICA used to find the
    /// fetal component for the fetal rule.
    pub reference_ica_dim: usize,
}

impl Default for SelectionSection {
    fn default() -> Self {
        Self {
            rule: "maternal2".into(),
            k: 10,
            m: 0,
            redundancy_weight: 1.0,
            reference_ica_dim: 12,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IcaSection {
    /// Retained dimension; defaults to the number of selected channels.
    pub m: Option<usize>,
}

impl Default for IcaSection {
    fn default() -> Self {
        Self { m: None }
    }
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                let cfg: Self = serde_json::from_str(&text)
                    .with_context(|| format!("parsing config {}", p.display()))?;
                Ok(cfg)
            }
            None => Ok(Self::default()),
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.seed.is_none() {
            bail!("a seed is mandatory: set \"seed\" in the config or pass --seed");
        }
        if self.simulation.duration_s <= 0.0 || self.simulation.sample_rate <= 0.0 {
            bail!("duration_s and sample_rate must be positive");
        }
        let needed = 10 * self.mi.bins * self.mi.bins;
        let samples = (self.simulation.duration_s * self.simulation.sample_rate) as usize;
        if samples < needed {
            bail!(
                "binned MI with B={} needs at least {needed} samples, config yields {samples}",
                self.mi.bins
            );
        }
        match self.selection.rule.as_str() {
            "maternal1" | "maternal2" => {}
            other => bail!("unknown selection rule {other:?} (use maternal1 or maternal2)"),
        }
        self.resolve_geometry()?;
        self.resolve_params(&self.simulation.maternal.params)?;
        self.resolve_params(&self.simulation.fetal.params)?;
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.expect("validated config carries a seed")
    }

    /// SHA-256 of the resolved config JSON.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex_digest(text.as_bytes())
    }

    pub fn resolve_geometry(&self) -> anyhow::Result<ElectrodeArray> {
        let g = &self.simulation.geometry;
        let mut array = match (&g.preset, &g.file) {
            (_, Some(file)) => {
                let text = std::fs::read_to_string(file)
                    .with_context(|| format!("reading geometry {file}"))?;
                ElectrodeArray::from_json(&text)?
            }
            (Some(name), None) => match name.as_str() {
                "grid8x18" => ElectrodeArray::sim_belt_8x18(self.simulation.montage),
                "grid8x9" => ElectrodeArray::real_belt_8x9(self.simulation.montage),
                other => bail!("unknown geometry preset {other:?} (grid8x18 or grid8x9)"),
            },
            (None, None) => bail!("geometry needs a preset or a file"),
        };
        array.montage = self.simulation.montage;
        array.validate()?;
        Ok(array)
    }

    fn resolve_params(&self, source: &ParamsSource) -> anyhow::Result<DipoleModelParams> {
        let mut params = match (&source.preset, &source.file) {
            (_, Some(file)) => {
                let text = std::fs::read_to_string(file)
                    .with_context(|| format!("reading dipole params {file}"))?;
                DipoleModelParams::from_json(&text)?
            }
            (Some(name), None) => match name.as_str() {
                "adult" => DipoleModelParams::adult_default(),
                other => bail!("unknown dipole preset {other:?} (adult)"),
            },
            (None, None) => bail!("dipole params need a preset or a file"),
        };
        if let Some(dev) = source.deviation_fraction {
            params.deviation_fraction = dev;
        }
        params.validate()?;
        Ok(params)
    }

    pub fn maternal_model(&self) -> anyhow::Result<HeartModel> {
        let m = &self.simulation.maternal;
        let [ax, ay, az] = m.rotation_euler_deg;
        let rotation = rot_z(az.to_radians())
            .dot(&rot_y(ay.to_radians()))
            .dot(&rot_x(ax.to_radians()));
        let model = HeartModel {
            params: self.resolve_params(&m.params)?,
            rhythm: fecg_core::dipole::HeartRhythm {
                mean_rate: m.rhythm.mean_rate,
                rate_std: m.rhythm.rate_std,
                seed: m.rhythm.seed,
            },
            rotation,
            lambda: m.lambda,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn fetal_model(&self) -> anyhow::Result<HeartModel> {
        let f = &self.simulation.fetal;
        let lambda = f.lambda.unwrap_or_else(|| {
            let l = self.simulation.maternal.lambda;
            [l[0] / 10.0, l[1] / 10.0, l[2] / 10.0]
        });
        let model = HeartModel {
            params: self.resolve_params(&f.params)?,
            rhythm: fecg_core::dipole::HeartRhythm {
                mean_rate: f.rhythm.mean_rate,
                rate_std: f.rhythm.rate_std,
                seed: f.rhythm.seed,
            },
            rotation: fetal_rotation(f.rotation.preset, f.rotation.facing),
            lambda,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn noise(&self) -> NoiseConfig {
        NoiseConfig {
            base_std: self.simulation.noise.base_std,
            envelope_period: self.simulation.noise.envelope_period_s,
            envelope_depth: self.simulation.noise.envelope_depth,
            color: self.simulation.noise.color,
        }
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher
        .finalize()
        .iter()
        .fold(String::with_capacity(64), |mut acc, b| {
            use std::fmt::Write;
            let _ = write!(acc, "{b:02x}");
            acc
        })
}
