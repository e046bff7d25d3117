//! Pipeline stages behind the subcommands. Every stage reads/writes files
//! under the run's output directory and registers them with the recorder so
//! the manifest lists exactly what was produced.

use anyhow::{anyhow, bail, Context};
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use fecg_core::forward::{mix_abdominal, quantize, RecordingSet};
use fecg_core::ica::{rank_fetal_components, separate, FetalEvidence, ICAResult};
use fecg_core::io;
use fecg_core::mi::{differential_mi_map, mi_map, MapKind, MiMapConfig};
use fecg_core::preprocess::{
    build_fetal_references, classify_channels, detect_r_peaks, fit_transfer, local_references,
    reject_bad_channels, remove_baseline, synth_frank_reference, FrankTemplates, PeakTrain,
    ReferenceSet,
};
use fecg_core::selection::{
    fetal_rule1, maternal_rule1, maternal_rule2, SelectionConfig, SelectionState,
};
use fecg_core::FecgError;

use crate::config::{ExperimentConfig, FileFormat};
use crate::manifest::RunRecorder;

pub struct SimOutputs {
    pub recordings: PathBuf,
    pub maternal_refs: PathBuf,
    pub fetal_refs: PathBuf,
    pub maternal_peaks: PathBuf,
    pub fetal_peaks: PathBuf,
}

fn hash_comment(rec: &RunRecorder) -> Vec<(String, String)> {
    vec![("config_hash".into(), rec.config_hash().to_string())]
}

fn signal_ext(cfg: &ExperimentConfig) -> &'static str {
    match cfg.simulation.format {
        FileFormat::Csv => "csv",
        FileFormat::Binary => "bin",
    }
}

fn write_signals(
    cfg: &ExperimentConfig,
    rec: &mut RunRecorder,
    name: &str,
    set: &RecordingSet,
) -> anyhow::Result<PathBuf> {
    let file = format!("{name}.{}", signal_ext(cfg));
    let comments = hash_comment(rec);
    match cfg.simulation.format {
        FileFormat::Csv => rec.emit(&file, |p| io::write_recording_csv(p, set, &comments)),
        FileFormat::Binary => rec.emit(&file, |p| io::write_recording_bin(p, set)),
    }
}

pub fn read_recordings(path: &Path) -> anyhow::Result<RecordingSet> {
    let set = match path.extension().and_then(|e| e.to_str()) {
        Some("bin") => io::read_recording_bin(path)?,
        _ => io::read_recording_csv(path)?,
    };
    Ok(set)
}

/// Baseline-remove every channel (when enabled), keeping validity flags.
fn preprocess_signals(cfg: &ExperimentConfig, set: &RecordingSet) -> anyhow::Result<RecordingSet> {
    if !cfg.preprocess.baseline {
        return Ok(set.clone());
    }
    let fs = set.sample_rate;
    let rows: Vec<Vec<f64>> = (0..set.n_channels())
        .into_par_iter()
        .map(|ch| remove_baseline(&set.channel(ch), fs))
        .collect::<fecg_core::Result<_>>()?;
    let mut data = Array2::<f64>::zeros((set.n_channels(), set.n_samples()));
    for (ch, row) in rows.into_iter().enumerate() {
        for (t, v) in row.into_iter().enumerate() {
            data[[ch, t]] = v;
        }
    }
    let mut cleaned = RecordingSet::new(data, fs, set.labels.clone())?;
    cleaned.valid = set.valid.clone();
    Ok(cleaned)
}

pub fn stage_simulate(
    cfg: &ExperimentConfig,
    rec: &mut RunRecorder,
) -> anyhow::Result<SimOutputs> {
    rec.begin_stage("simulate");
    let array = cfg.resolve_geometry()?;
    let maternal = cfg.maternal_model()?;
    let fetal = cfg.fetal_model()?;
    let mix = mix_abdominal(
        &array,
        cfg.simulation.conductivity,
        &maternal,
        &fetal,
        &cfg.noise(),
        cfg.simulation.duration_s,
        cfg.simulation.sample_rate,
        cfg.seed(),
    )?;

    let mut recordings = mix.recordings;
    if let Some(q) = &cfg.simulation.quantize {
        quantize(&mut recordings.data, q.bits, q.full_scale)?;
    }

    let geometry_text = array.to_json();
    let geo_path = rec.out_dir().join("geometry.json");
    std::fs::write(&geo_path, geometry_text)?;
    rec.register("geometry.json")?;

    let recordings_path = write_signals(cfg, rec, "recordings", &recordings)?;
    let refs_m = RecordingSet {
        data: mix.maternal_reference,
        sample_rate: recordings.sample_rate,
        labels: recordings.labels.clone(),
        valid: vec![true; recordings.n_channels()],
    };
    let refs_f = RecordingSet {
        data: mix.fetal_reference,
        sample_rate: recordings.sample_rate,
        labels: recordings.labels.clone(),
        valid: vec![true; recordings.n_channels()],
    };
    let maternal_refs = write_signals(cfg, rec, "maternal_refs", &refs_m)?;
    let fetal_refs = write_signals(cfg, rec, "fetal_refs", &refs_f)?;

    let vcg_labels = vec!["x".to_string(), "y".to_string(), "z".to_string()];
    let comments = hash_comment(rec);
    for (name, traj) in [
        ("maternal_vcg.csv", &mix.maternal_trajectory),
        ("fetal_vcg.csv", &mix.fetal_trajectory),
    ] {
        let coords = traj.coords.clone();
        let labels = vcg_labels.clone();
        let fs = cfg.simulation.sample_rate;
        let comments = comments.clone();
        rec.emit(name, move |p| {
            io::write_signals_csv(p, &coords, &labels, fs, &[], &comments)
        })?;
    }

    let m_train = PeakTrain::new(mix.maternal_trajectory.beat_onsets.clone(), None)?;
    let f_train = PeakTrain::new(mix.fetal_trajectory.beat_onsets.clone(), None)?;
    let fs = cfg.simulation.sample_rate;
    let maternal_peaks = rec.emit("maternal_peaks.csv", |p| {
        io::write_peaks_csv(p, &m_train, fs, &comments)
    })?;
    let fetal_peaks = rec.emit("fetal_peaks.csv", |p| {
        io::write_peaks_csv(p, &f_train, fs, &comments)
    })?;

    Ok(SimOutputs {
        recordings: recordings_path,
        maternal_refs,
        fetal_refs,
        maternal_peaks,
        fetal_peaks,
    })
}

pub fn stage_mimap(
    cfg: &ExperimentConfig,
    rec: &mut RunRecorder,
    recordings: &Path,
    maternal_refs: &Path,
    fetal_refs: Option<&Path>,
) -> anyhow::Result<()> {
    rec.begin_stage("mimap");
    let array = cfg.resolve_geometry()?;
    let layout = array.grid_layout();
    let raw = read_recordings(recordings)?;
    if raw.n_channels() != layout.cells.len() {
        return Err(FecgError::DimensionMismatch(format!(
            "{} channels in {} but geometry yields {}",
            raw.n_channels(),
            recordings.display(),
            layout.cells.len()
        ))
        .into());
    }
    let cleaned = preprocess_signals(cfg, &raw)?;
    let mi_cfg = MiMapConfig { bins: cfg.mi.bins };
    let comments = hash_comment(rec);

    let load_refs = |path: &Path| -> anyhow::Result<Array2<f64>> {
        let set = read_recordings(path)?;
        if set.n_channels() != raw.n_channels() || set.n_samples() != raw.n_samples() {
            return Err(FecgError::DimensionMismatch(format!(
                "references {} do not match the recordings' shape",
                path.display()
            ))
            .into());
        }
        Ok(preprocess_signals(cfg, &set)?.data)
    };

    let m_refs = load_refs(maternal_refs)?;
    let maternal_map = mi_map(&cleaned, &m_refs, &layout, MapKind::Maternal, mi_cfg)?;
    rec.emit("mi_maternal.csv", |p| {
        io::write_mimap_csv(p, &maternal_map, &comments)
    })?;
    rec.emit("mi_maternal.grid", |p| {
        io::write_mimap_grid(p, &maternal_map, &comments)
    })?;

    match fetal_refs {
        Some(path) => {
            let f_refs = load_refs(path)?;
            let fetal_map = mi_map(&cleaned, &f_refs, &layout, MapKind::Fetal, mi_cfg)?;
            rec.emit("mi_fetal.csv", |p| io::write_mimap_csv(p, &fetal_map, &comments))?;
            rec.emit("mi_fetal.grid", |p| {
                io::write_mimap_grid(p, &fetal_map, &comments)
            })?;
            let diff = differential_mi_map(&fetal_map, &maternal_map)?;
            rec.emit("mi_differential.csv", |p| io::write_mimap_csv(p, &diff, &comments))?;
            rec.emit("mi_differential.grid", |p| {
                io::write_mimap_grid(p, &diff, &comments)
            })?;
        }
        None => {
            log::warn!("no fetal references given; writing maternal-only maps, skipping the differential map");
        }
    }
    Ok(())
}

/// Pick the channel the maternal R-peak train is detected from: try valid
/// channels by descending standard deviation until detection succeeds.
fn detect_maternal_train(
    cfg: &ExperimentConfig,
    cleaned: &RecordingSet,
) -> anyhow::Result<PeakTrain> {
    let band = (
        cfg.preprocess.maternal_rate_band[0],
        cfg.preprocess.maternal_rate_band[1],
    );
    let mut order: Vec<(f64, usize)> = cleaned
        .valid_channels()
        .into_iter()
        .map(|ch| {
            let x = cleaned.channel(ch);
            let mean = x.iter().sum::<f64>() / x.len() as f64;
            let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / x.len() as f64;
            (var, ch)
        })
        .collect();
    order.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    for (_, ch) in order.iter().take(10) {
        match detect_r_peaks(&cleaned.channel(*ch), cleaned.sample_rate, band) {
            Ok(mut train) => {
                train.source_channel = Some(*ch);
                return Ok(train);
            }
            Err(e) => log::debug!("maternal peak detection on channel {ch} failed: {e}"),
        }
    }
    bail!("maternal R-peak detection failed on the 10 strongest channels");
}

/// Reference ICA over the valid channels; returns the component whose
/// fetal-band peak train has the most beats, with its peak train.
fn fetal_component_from_ica(
    cfg: &ExperimentConfig,
    cleaned: &RecordingSet,
) -> anyhow::Result<(usize, PeakTrain)> {
    let valid = cleaned.valid_channels();
    let m = cfg.selection.reference_ica_dim.min(valid.len());
    if m < 2 {
        bail!("reference ICA needs at least 2 valid channels");
    }
    let mut data = Array2::<f64>::zeros((valid.len(), cleaned.n_samples()));
    for (row, &ch) in valid.iter().enumerate() {
        for (t, v) in cleaned.channel(ch).into_iter().enumerate() {
            data[[row, t]] = v;
        }
    }
    let result = separate(&data, m)?;
    let band = (
        cfg.preprocess.fetal_rate_band[0],
        cfg.preprocess.fetal_rate_band[1],
    );
    let mut best: Option<(usize, PeakTrain)> = None;
    for k in 0..m {
        let src = result.sources.row(k).to_vec();
        if let Ok(train) = detect_r_peaks(&src, cleaned.sample_rate, band) {
            let better = best
                .as_ref()
                .is_none_or(|(_, b)| train.len() > b.len());
            if better {
                best = Some((k, train));
            }
        }
    }
    best.ok_or_else(|| {
        anyhow!("no ICA component carries a detectable fetal-band peak train; cannot build fetal references")
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SelectionFile {
    pub config_hash: String,
    pub rule: String,
    pub k: usize,
    pub m: usize,
    pub rejected_channels: Vec<usize>,
    pub class_labels: Vec<Option<usize>>,
    pub fetal_reference: String,
    pub maternal_stage: SelectionState,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fetal_stage: Option<SelectionState>,
    /// Final chosen channel ids, in selection order.
    pub selected: Vec<usize>,
}

pub fn stage_select(
    cfg: &ExperimentConfig,
    rec: &mut RunRecorder,
    recordings: &Path,
) -> anyhow::Result<PathBuf> {
    rec.begin_stage("select");
    let raw = read_recordings(recordings)?;
    let mut cleaned = preprocess_signals(cfg, &raw)?;
    let screen = reject_bad_channels(&mut cleaned, &cfg.preprocess.reject.to_core())?;

    let maternal_train = detect_maternal_train(cfg, &cleaned)?;
    let comments = hash_comment(rec);
    let fs = cleaned.sample_rate;
    rec.emit("maternal_peaks_detected.csv", |p| {
        io::write_peaks_csv(p, &maternal_train, fs, &comments)
    })?;

    let templates = FrankTemplates::synthetic(fs);
    let frank = synth_frank_reference(&maternal_train, &templates, cleaned.n_samples())?;
    let frank_matrix = {
        let mut m = Array2::<f64>::zeros((3, cleaned.n_samples()));
        for (i, s) in frank.signals.iter().enumerate() {
            for (t, v) in s.iter().enumerate() {
                m[[i, t]] = *v;
            }
        }
        m
    };
    {
        let labels = vec!["frank_x".to_string(), "frank_y".to_string(), "frank_z".to_string()];
        let comments = comments.clone();
        let frank_matrix = frank_matrix.clone();
        rec.emit("frank_refs.csv", move |p| {
            io::write_signals_csv(p, &frank_matrix, &labels, fs, &[], &comments)
        })?;
    }
    let class_labels = classify_channels(&cleaned, &frank)?;

    let sel_cfg = SelectionConfig {
        bins: cfg.mi.bins,
        redundancy_weight: cfg.selection.redundancy_weight,
    };
    let maternal_stage = match cfg.selection.rule.as_str() {
        "maternal1" => maternal_rule1(&cleaned, &frank, &class_labels, cfg.selection.k, sel_cfg)?,
        "maternal2" => {
            let fit = fit_transfer(&cleaned.data, &frank_matrix)?;
            let local = local_references(&fit, &frank_matrix)?;
            maternal_rule2(&cleaned, &local, cfg.selection.k, sel_cfg)?
        }
        other => bail!("unknown selection rule {other:?}"),
    };

    let mut fetal_stage = None;
    let mut fetal_reference = "none".to_string();
    if cfg.selection.m > 0 {
        let (component, fetal_train) = fetal_component_from_ica(cfg, &cleaned)?;
        log::info!(
            "fetal reference component {component} with {} beats",
            fetal_train.len()
        );
        rec.emit("fetal_peaks_detected.csv", |p| {
            io::write_peaks_csv(p, &fetal_train, fs, &comments)
        })?;
        let window = (cfg.preprocess.fetal_template_window_s * fs).round() as usize;
        let fetal_refs: ReferenceSet = build_fetal_references(&cleaned, &fetal_train, window)?;
        fetal_reference = "per-channel".to_string();
        fetal_stage = Some(fetal_rule1(
            &cleaned,
            &maternal_stage,
            &fetal_refs,
            cfg.selection.m,
            sel_cfg,
        )?);
    }

    let selected = fetal_stage
        .as_ref()
        .map(|s| s.selected.clone())
        .unwrap_or_else(|| maternal_stage.selected.clone());
    let file = SelectionFile {
        config_hash: rec.config_hash().to_string(),
        rule: cfg.selection.rule.clone(),
        k: cfg.selection.k,
        m: cfg.selection.m,
        rejected_channels: screen.rejected,
        class_labels,
        fetal_reference,
        maternal_stage,
        fetal_stage,
        selected,
    };
    let path = rec.out_dir().join("selection.json");
    std::fs::write(&path, serde_json::to_string_pretty(&file)?)?;
    rec.register("selection.json")?;
    Ok(path)
}

#[derive(Debug, Serialize)]
struct ExtractMeta {
    config_hash: String,
    selected_channels: Vec<usize>,
    retained_dimension: usize,
    sweeps: usize,
    converged: bool,
    eigenvalues: Vec<f64>,
    source_kurtosis: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct RankingFile {
    config_hash: String,
    evidence: String,
    /// (component, score), best first.
    ranking: Vec<(usize, f64)>,
}

pub fn stage_extract(
    cfg: &ExperimentConfig,
    rec: &mut RunRecorder,
    recordings: &Path,
    selection: &Path,
    fetal_peaks: Option<&Path>,
    fetal_ref: Option<&Path>,
) -> anyhow::Result<()> {
    rec.begin_stage("extract");
    let raw = read_recordings(recordings)?;
    let cleaned = preprocess_signals(cfg, &raw)?;
    let text = std::fs::read_to_string(selection)
        .with_context(|| format!("reading selection {}", selection.display()))?;
    let sel: SelectionFile = serde_json::from_str(&text)
        .with_context(|| format!("parsing selection {}", selection.display()))?;
    if sel.selected.is_empty() {
        return Err(FecgError::InvalidParameter(
            "selection is empty; nothing to extract".into(),
        )
        .into());
    }
    for &ch in &sel.selected {
        if ch >= cleaned.n_channels() {
            return Err(FecgError::InvalidParameter(format!(
                "selected channel {ch} outside the recording"
            ))
            .into());
        }
    }
    let m = cfg.ica.m.unwrap_or(sel.selected.len());
    if m > sel.selected.len() {
        return Err(FecgError::InvalidParameter(format!(
            "retained dimension {m} exceeds the {} selected channels",
            sel.selected.len()
        ))
        .into());
    }

    let mut data = Array2::<f64>::zeros((sel.selected.len(), cleaned.n_samples()));
    for (row, &ch) in sel.selected.iter().enumerate() {
        for (t, v) in cleaned.channel(ch).into_iter().enumerate() {
            data[[row, t]] = v;
        }
    }
    let result = separate(&data, m)?;

    let fs = cleaned.sample_rate;
    let band = (
        cfg.preprocess.fetal_rate_band[0],
        cfg.preprocess.fetal_rate_band[1],
    );
    let tolerance = (0.05 * fs).round() as usize;
    let (evidence_name, ranking) = if let Some(path) = fetal_peaks {
        let truth = io::read_peaks_csv(path)?;
        let scores = rank_fetal_components(
            &result,
            &FetalEvidence::Peaks {
                truth: &truth,
                sample_rate: fs,
                rate_band: band,
                tolerance,
            },
        );
        ("peak-train-f1".to_string(), scores)
    } else if let Some(path) = fetal_ref {
        let set = read_recordings(path)?;
        let signal = set.channel(0);
        let scores = rank_fetal_components(
            &result,
            &FetalEvidence::Reference {
                signal: &signal,
                bins: cfg.mi.bins,
            },
        );
        ("reference-mi".to_string(), scores)
    } else {
        log::warn!("no fetal evidence supplied; ranking by detected fetal-band beat count");
        let mut scores: Vec<(usize, f64)> = (0..m)
            .map(|k| {
                let src = result.sources.row(k).to_vec();
                match detect_r_peaks(&src, fs, band) {
                    Ok(train) => (k, train.len() as f64),
                    Err(_) => (k, 0.0),
                }
            })
            .collect();
        scores.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        (
            "fetal-band-beat-count".to_string(),
            scores
                .into_iter()
                .map(|(c, s)| fecg_core::ica::ComponentScore {
                    component: c,
                    score: s,
                })
                .collect(),
        )
    };

    write_ica_outputs(cfg, rec, &result, &sel.selected, m)?;
    let ranking_file = RankingFile {
        config_hash: rec.config_hash().to_string(),
        evidence: evidence_name,
        ranking: ranking.iter().map(|s| (s.component, s.score)).collect(),
    };
    std::fs::write(
        rec.out_dir().join("ranking.json"),
        serde_json::to_string_pretty(&ranking_file)?,
    )?;
    rec.register("ranking.json")?;
    Ok(())
}

fn write_ica_outputs(
    cfg: &ExperimentConfig,
    rec: &mut RunRecorder,
    result: &ICAResult,
    selected: &[usize],
    m: usize,
) -> anyhow::Result<()> {
    let comments = hash_comment(rec);
    let fs = cfg.simulation.sample_rate;
    {
        let labels: Vec<String> = (0..m).map(|k| format!("source{k}")).collect();
        let sources = result.sources.clone();
        let comments = comments.clone();
        rec.emit("sources.csv", move |p| {
            io::write_signals_csv(p, &sources, &labels, fs, &[], &comments)
        })?;
    }
    for (name, matrix) in [
        ("demixing.csv", &result.demixing),
        ("mixing.csv", &result.mixing),
        ("whitening.csv", &result.whitening.matrix),
    ] {
        let m2 = matrix.clone();
        let comments = comments.clone();
        rec.emit(name, move |p| io::write_matrix_csv(p, &m2, &comments))?;
    }
    let meta = ExtractMeta {
        config_hash: rec.config_hash().to_string(),
        selected_channels: selected.to_vec(),
        retained_dimension: m,
        sweeps: result.sweeps,
        converged: result.converged,
        eigenvalues: result.whitening.eigenvalues.clone(),
        source_kurtosis: result.source_kurtosis.clone(),
    };
    std::fs::write(
        rec.out_dir().join("ica_meta.json"),
        serde_json::to_string_pretty(&meta)?,
    )?;
    rec.register("ica_meta.json")?;
    Ok(())
}

pub fn stage_synth_ref(
    cfg: &ExperimentConfig,
    rec: &mut RunRecorder,
    recordings: &Path,
    channel: Option<usize>,
    templates_file: Option<&Path>,
) -> anyhow::Result<()> {
    rec.begin_stage("synth-ref");
    let raw = read_recordings(recordings)?;
    let cleaned = preprocess_signals(cfg, &raw)?;
    let fs = cleaned.sample_rate;
    let train = match channel {
        Some(ch) => {
            if ch >= cleaned.n_channels() {
                return Err(FecgError::InvalidParameter(format!(
                    "channel {ch} outside the recording"
                ))
                .into());
            }
            let band = (
                cfg.preprocess.maternal_rate_band[0],
                cfg.preprocess.maternal_rate_band[1],
            );
            let mut t = detect_r_peaks(&cleaned.channel(ch), fs, band)?;
            t.source_channel = Some(ch);
            t
        }
        None => detect_maternal_train(cfg, &cleaned)?,
    };
    let templates = match templates_file {
        Some(p) => io::read_frank_templates_csv(p)?,
        None => FrankTemplates::synthetic(fs),
    };
    let frank = synth_frank_reference(&train, &templates, cleaned.n_samples())?;
    let comments = hash_comment(rec);
    rec.emit("maternal_peaks_detected.csv", |p| {
        io::write_peaks_csv(p, &train, fs, &comments)
    })?;
    let mut matrix = Array2::<f64>::zeros((3, cleaned.n_samples()));
    for (i, s) in frank.signals.iter().enumerate() {
        for (t, v) in s.iter().enumerate() {
            matrix[[i, t]] = *v;
        }
    }
    let labels = vec!["frank_x".to_string(), "frank_y".to_string(), "frank_z".to_string()];
    rec.emit("frank_refs.csv", move |p| {
        io::write_signals_csv(p, &matrix, &labels, fs, &[], &comments)
    })?;
    Ok(())
}

pub const ALL_STAGES: [&str; 4] = ["simulate", "mimap", "select", "extract"];

pub fn stage_pipeline(
    cfg: &ExperimentConfig,
    rec: &mut RunRecorder,
    stages: &[String],
) -> anyhow::Result<()> {
    for s in stages {
        if !ALL_STAGES.contains(&s.as_str()) {
            return Err(FecgError::InvalidParameter(format!(
                "unknown stage {s:?}; valid stages: {}",
                ALL_STAGES.join(", ")
            ))
            .into());
        }
    }
    let want = |name: &str| stages.iter().any(|s| s == name);
    let out = rec.out_dir().to_path_buf();
    let ext = signal_ext(cfg);

    let sim = if want("simulate") {
        Some(stage_simulate(cfg, rec)?)
    } else {
        None
    };
    let recordings = sim
        .as_ref()
        .map(|s| s.recordings.clone())
        .unwrap_or_else(|| out.join(format!("recordings.{ext}")));
    let maternal_refs = sim
        .as_ref()
        .map(|s| s.maternal_refs.clone())
        .unwrap_or_else(|| out.join(format!("maternal_refs.{ext}")));
    let fetal_refs = sim
        .as_ref()
        .map(|s| s.fetal_refs.clone())
        .unwrap_or_else(|| out.join(format!("fetal_refs.{ext}")));
    let fetal_peaks = sim
        .as_ref()
        .map(|s| s.fetal_peaks.clone())
        .unwrap_or_else(|| out.join("fetal_peaks.csv"));

    if want("mimap") {
        let fetal = fetal_refs.exists().then_some(fetal_refs.as_path());
        stage_mimap(cfg, rec, &recordings, &maternal_refs, fetal)?;
    }
    let selection = if want("select") {
        stage_select(cfg, rec, &recordings)?
    } else {
        out.join("selection.json")
    };
    if want("extract") {
        let peaks = fetal_peaks.exists().then_some(fetal_peaks.as_path());
        stage_extract(cfg, rec, &recordings, &selection, peaks, None)?;
    }
    Ok(())
}
