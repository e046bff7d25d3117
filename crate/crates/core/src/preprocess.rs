//! Pre-processing for the selection pipeline: baseline-wander removal,
//! R-peak detection, dead-channel rejection, channel classification against
//! a Frank-style reference triplet, least-squares transfer fitting, and
//! synthetic / synchronously-averaged reference construction.

use ndarray::Array2;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::dipole::{kernel_sum, DipoleModelParams};
use crate::error::{FecgError, Result};
use crate::forward::RecordingSet;
use crate::linalg::{solve3, sym_eig};
use crate::mi::pearson_correlation;

/// What a set of reference traces represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceKind {
    /// Three Frank-style maternal reference leads.
    FrankTriplet,
    /// One maternal reference per channel, from the fitted transfer rows.
    PerChannelLocal,
    /// Fetal references: either one per channel or a single shared trace.
    Fetal,
}

/// A bundle of reference traces at the recording sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSet {
    pub kind: ReferenceKind,
    pub signals: Vec<Vec<f64>>,
    /// For per-channel kinds: the recording channel each trace belongs to.
    /// Empty for the Frank triplet and for a single shared fetal reference.
    pub channel_ids: Vec<usize>,
}

impl ReferenceSet {
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ReferenceKind::FrankTriplet => {
                if self.signals.len() != 3 {
                    return Err(FecgError::InvalidParameter(format!(
                        "Frank triplet must hold exactly 3 signals, got {}",
                        self.signals.len()
                    )));
                }
            }
            ReferenceKind::PerChannelLocal => {
                if self.signals.len() != self.channel_ids.len() {
                    return Err(FecgError::InvalidParameter(
                        "per-channel references need one channel id per trace".into(),
                    ));
                }
            }
            ReferenceKind::Fetal => {
                let shared = self.signals.len() == 1 && self.channel_ids.is_empty();
                if !shared && self.signals.len() != self.channel_ids.len() {
                    return Err(FecgError::InvalidParameter(
                        "fetal references are either one shared trace or one per channel".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Reference trace to use for `channel`, honoring the single-shared-trace
    /// form of fetal references.
    pub fn signal_for_channel(&self, channel: usize) -> Option<&[f64]> {
        if self.kind == ReferenceKind::Fetal && self.channel_ids.is_empty() {
            return self.signals.first().map(|s| s.as_slice());
        }
        self.channel_ids
            .iter()
            .position(|&c| c == channel)
            .map(|i| self.signals[i].as_slice())
    }
}

/// Detected R-peak instants of one channel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeakTrain {
    pub indices: Vec<usize>,
    pub source_channel: Option<usize>,
}

impl PeakTrain {
    pub fn new(indices: Vec<usize>, source_channel: Option<usize>) -> Result<Self> {
        if indices.windows(2).any(|w| w[1] <= w[0]) {
            return Err(FecgError::InvalidParameter(
                "peak indices must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            indices,
            source_channel,
        })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Mean inter-peak interval in samples; NaN with fewer than two peaks.
    pub fn mean_interval(&self) -> f64 {
        if self.indices.len() < 2 {
            return f64::NAN;
        }
        (self.indices[self.indices.len() - 1] - self.indices[0]) as f64
            / (self.indices.len() - 1) as f64
    }

    pub fn min_interval(&self) -> Option<usize> {
        self.indices.windows(2).map(|w| w[1] - w[0]).min()
    }
}

/// Least-squares fit of the per-channel transfer rows against a 3-D VCG.
#[derive(Debug, Clone)]
pub struct TransferFit {
    /// Channels x 3.
    pub h: Array2<f64>,
    /// Per-channel residual norm `||x_i - h_i * VCG||`.
    pub residuals: Vec<f64>,
}

fn reflect_index(i: isize, len: usize) -> usize {
    let n = len as isize;
    let mut j = i;
    if j < 0 {
        j = -j;
    }
    if j >= n {
        j = 2 * (n - 1) - j;
    }
    j.clamp(0, n - 1) as usize
}

fn odd(w: usize) -> usize {
    if w % 2 == 0 {
        w + 1
    } else {
        w
    }
}

/// Sliding median with reflected edges; `w` is forced odd.
fn sliding_median(x: &[f64], w: usize) -> Vec<f64> {
    let w = odd(w.max(1));
    let half = (w / 2) as isize;
    let t = x.len();
    let get = |i: isize| x[reflect_index(i, t)];
    let mut win: Vec<f64> = (-half..=half).map(get).collect();
    win.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let mut out = Vec::with_capacity(t);
    out.push(win[half as usize]);
    for i in 1..t as isize {
        let removed = get(i - 1 - half);
        let added = get(i + half);
        let pos = win.partition_point(|&v| v < removed);
        win.remove(pos);
        let ins = win.partition_point(|&v| v < added);
        win.insert(ins, added);
        out.push(win[half as usize]);
    }
    out
}

/// Centered moving average with reflected edges.
fn moving_average(x: &[f64], w: usize) -> Vec<f64> {
    let w = odd(w.max(1));
    let half = (w / 2) as isize;
    let t = x.len();
    let get = |i: isize| x[reflect_index(i, t)];
    let mut acc: f64 = (-half..=half).map(get).sum();
    let mut out = Vec::with_capacity(t);
    out.push(acc / w as f64);
    for i in 1..t as isize {
        acc += get(i + half) - get(i - 1 - half);
        out.push(acc / w as f64);
    }
    out
}

/// Baseline-wander removal: a two-stage moving median (200 ms then 600 ms)
/// estimates the baseline, which is subtracted from the signal. Narrow QRS
/// complexes pass through the medians untouched, so their amplitude is
/// preserved.
pub fn remove_baseline(signal: &[f64], sample_rate: f64) -> Result<Vec<f64>> {
    if !(sample_rate > 0.0) {
        return Err(FecgError::InvalidParameter(
            "sample_rate must be positive".into(),
        ));
    }
    if (signal.len() as f64) < 2.0 * sample_rate {
        return Err(FecgError::InsufficientData(format!(
            "baseline removal needs more than 2 s of signal, got {} samples at {} Hz",
            signal.len(),
            sample_rate
        )));
    }
    let w1 = odd((0.2 * sample_rate).round() as usize);
    let w2 = odd((0.6 * sample_rate).round() as usize);
    let stage1 = sliding_median(signal, w1);
    let baseline = sliding_median(&stage1, w2);
    Ok(signal
        .iter()
        .zip(&baseline)
        .map(|(s, b)| s - b)
        .collect())
}

/// Energy-based R-peak detector.
///
/// Band-limits the signal with a short-minus-long moving-average pair
/// (roughly the 8-20 Hz QRS band), squares, smooths, and thresholds at a
/// fraction of a decaying running peak; the refractory period is
/// `0.6 / rate_band.1` seconds. Detections are refined to the local extremum
/// of the band-limited signal. Errors when fewer than 3 peaks survive or the
/// inter-peak intervals are inconsistent with `rate_band`.
pub fn detect_r_peaks(signal: &[f64], sample_rate: f64, rate_band: (f64, f64)) -> Result<PeakTrain> {
    let (rate_lo, rate_hi) = rate_band;
    if !(rate_lo > 0.0 && rate_hi > rate_lo) {
        return Err(FecgError::InvalidParameter(format!(
            "rate band ({rate_lo}, {rate_hi}) must satisfy 0 < lo < hi"
        )));
    }
    let t = signal.len();
    if (t as f64) < 2.0 * sample_rate {
        return Err(FecgError::InsufficientData(
            "peak detection needs more than 2 s of signal".into(),
        ));
    }

    let short = moving_average(signal, (0.025 * sample_rate).round() as usize);
    let long = moving_average(signal, (0.125 * sample_rate).round() as usize);
    let band: Vec<f64> = short.iter().zip(&long).map(|(s, l)| s - l).collect();
    let energy: Vec<f64> = band.iter().map(|v| v * v).collect();
    let smooth = moving_average(&energy, (0.08 * sample_rate).round() as usize);

    let refractory = ((0.6 / rate_hi) * sample_rate).round().max(1.0) as usize;
    let warmup = ((2.0 * sample_rate) as usize).min(t);
    let mut running_peak = smooth[..warmup]
        .iter()
        .fold(0.0f64, |acc, &v| acc.max(v))
        .max(f64::MIN_POSITIVE);
    let decay = (-1.0 / (2.0 * sample_rate)).exp();
    let threshold_fraction = 0.25;

    let mut kept: Vec<(usize, f64)> = Vec::new();
    for i in 1..t.saturating_sub(1) {
        running_peak = smooth[i].max(running_peak * decay);
        let is_local_max = smooth[i] >= smooth[i - 1] && smooth[i] >= smooth[i + 1];
        if !is_local_max || smooth[i] <= threshold_fraction * running_peak {
            continue;
        }
        match kept.last_mut() {
            Some(last) if i - last.0 < refractory => {
                if smooth[i] > last.1 {
                    *last = (i, smooth[i]);
                }
            }
            _ => kept.push((i, smooth[i])),
        }
    }

    // Refine each detection to the strongest band-limited deflection nearby.
    let refine_w = (0.04 * sample_rate).round() as isize;
    let mut indices: Vec<usize> = Vec::with_capacity(kept.len());
    for (p, _) in kept {
        let lo = (p as isize - refine_w).max(0) as usize;
        let hi = ((p as isize + refine_w) as usize).min(t - 1);
        let mut best = lo;
        for j in lo..=hi {
            if band[j].abs() > band[best].abs() {
                best = j;
            }
        }
        if indices.last().is_none_or(|&prev| best > prev + refractory / 2) {
            indices.push(best);
        }
    }

    if indices.len() < 3 {
        return Err(FecgError::InsufficientData(format!(
            "fewer than 3 peaks detected ({})",
            indices.len()
        )));
    }

    let mut intervals: Vec<f64> = indices.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
    intervals.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let median = intervals[intervals.len() / 2];
    let lo_int = sample_rate / rate_hi * 0.8;
    let hi_int = sample_rate / rate_lo * 1.25;
    if median < lo_int || median > hi_int {
        return Err(FecgError::Numerical(format!(
            "peak intervals (median {median} samples) outside the {rate_lo}-{rate_hi} Hz band"
        )));
    }
    // Quasi-periodicity: most intervals must sit near the median. Random
    // threshold crossings on noise spread far wider.
    let near = intervals
        .iter()
        .filter(|&&v| (v - median).abs() <= 0.15 * median)
        .count();
    if (near as f64) < 0.6 * intervals.len() as f64 {
        return Err(FecgError::Numerical(
            "peak intervals too irregular for a quasi-periodic rhythm".into(),
        ));
    }

    PeakTrain::new(indices, None)
}

/// Thresholds for rejecting dead or detached channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RejectConfig {
    /// Channels with standard deviation below this are near-constant.
    pub min_std: f64,
    /// Fraction of samples sitting exactly at the channel extremes above
    /// which the channel counts as saturated.
    pub max_rail_fraction: f64,
    /// Welch spectral flatness above which the channel counts as pure noise.
    pub max_spectral_flatness: f64,
}

impl Default for RejectConfig {
    fn default() -> Self {
        Self {
            min_std: 1e-9,
            max_rail_fraction: 0.01,
            max_spectral_flatness: 0.7,
        }
    }
}

/// Welch spectral flatness (geometric over arithmetic mean of the averaged
/// periodogram, DC excluded). White noise approaches 1, structured signals
/// sit far below.
fn spectral_flatness(x: &[f64]) -> f64 {
    let seg = 1024.min(x.len());
    if seg < 16 {
        return 0.0;
    }
    let hop = seg / 2;
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(seg);
    let mut psd = vec![0.0f64; seg / 2];
    let mut count = 0usize;
    let mut start = 0usize;
    while start + seg <= x.len() && count < 16 {
        let mut buf: Vec<Complex<f64>> = (0..seg)
            .map(|i| {
                let w = 0.5 - 0.5 * (TAU * i as f64 / (seg - 1) as f64).cos();
                Complex::new(x[start + i] * w, 0.0)
            })
            .collect();
        fft.process(&mut buf);
        for (k, p) in psd.iter_mut().enumerate() {
            *p += buf[k].norm_sqr();
        }
        count += 1;
        start += hop;
    }
    if count == 0 {
        return 0.0;
    }
    // Skip DC and the first bin (residual drift).
    let bins = &psd[2..];
    let tiny = 1e-300;
    let log_mean = bins.iter().map(|p| (p + tiny).ln()).sum::<f64>() / bins.len() as f64;
    let mean = bins.iter().sum::<f64>() / bins.len() as f64;
    log_mean.exp() / (mean + tiny)
}

/// Outcome of dead-channel screening.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelScreen {
    pub valid: Vec<usize>,
    pub rejected: Vec<usize>,
}

/// Reject channels that are near-constant, saturated, or spectrally flat,
/// and flag them invalid on the recording. Errors if nothing survives.
pub fn reject_bad_channels(
    recordings: &mut RecordingSet,
    cfg: &RejectConfig,
) -> Result<ChannelScreen> {
    let mut valid = Vec::new();
    let mut rejected = Vec::new();
    for ch in 0..recordings.n_channels() {
        let x = recordings.channel(ch);
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let std = (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
        let mut reason: Option<&str> = None;
        if std < cfg.min_std {
            reason = Some("near-constant");
        } else {
            let (min, max) = x
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                });
            let railed = x.iter().filter(|&&v| v == min || v == max).count();
            if railed as f64 / n > cfg.max_rail_fraction {
                reason = Some("saturated");
            } else if spectral_flatness(&x) > cfg.max_spectral_flatness {
                reason = Some("spectrally flat");
            }
        }
        if let Some(why) = reason {
            log::info!("rejecting channel {ch}: {why}");
            recordings.valid[ch] = false;
            rejected.push(ch);
        } else {
            valid.push(ch);
        }
    }
    if valid.is_empty() {
        return Err(FecgError::InsufficientData(
            "all channels rejected".into(),
        ));
    }
    Ok(ChannelScreen { valid, rejected })
}

/// Classify each valid channel to the Frank reference it correlates with
/// most (by absolute Pearson correlation). Ties break toward the lowest
/// class index. Returns one 0-based label per channel, `None` for invalid
/// channels.
pub fn classify_channels(
    recordings: &RecordingSet,
    frank: &ReferenceSet,
) -> Result<Vec<Option<usize>>> {
    if frank.kind != ReferenceKind::FrankTriplet {
        return Err(FecgError::InvalidParameter(
            "classification needs a Frank triplet".into(),
        ));
    }
    frank.validate()?;
    let mut labels = Vec::with_capacity(recordings.n_channels());
    for ch in 0..recordings.n_channels() {
        if !recordings.valid[ch] {
            labels.push(None);
            continue;
        }
        let x = recordings.channel(ch);
        let mut best = 0usize;
        let mut best_corr = -1.0f64;
        for (j, r) in frank.signals.iter().enumerate() {
            let c = pearson_correlation(&x, r)?.abs();
            if c > best_corr {
                best_corr = c;
                best = j;
            }
        }
        labels.push(Some(best));
    }
    Ok(labels)
}

/// Frank-lead template waveforms: one beat per lead, with the R instant at
/// `r_offset` samples into the waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct FrankTemplates {
    pub waveforms: [Vec<f64>; 3],
    pub r_offset: usize,
    pub sample_rate: f64,
}

impl FrankTemplates {
    /// Synthetic Frank-morphology templates derived from the adult dipole
    /// kernel tables: one beat of each VCG coordinate sampled over the
    /// phase. These are plausible stand-ins, not digitized recordings.
    pub fn synthetic(sample_rate: f64) -> Self {
        let params = DipoleModelParams::adult_default();
        let beat_s = 0.8;
        let len = (beat_s * sample_rate).round() as usize;
        let mut waveforms = [
            Vec::with_capacity(len),
            Vec::with_capacity(len),
            Vec::with_capacity(len),
        ];
        for i in 0..len {
            let theta = -std::f64::consts::PI + TAU * i as f64 / len as f64;
            waveforms[0].push(kernel_sum(&params.kernels_x, theta));
            waveforms[1].push(kernel_sum(&params.kernels_y, theta));
            waveforms[2].push(kernel_sum(&params.kernels_z, theta));
        }
        Self {
            waveforms,
            r_offset: len / 2,
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.waveforms[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.waveforms[0].is_empty()
    }
}

/// Convolve a unit impulse train at the peak indices with each template,
/// producing the three Frank reference traces. Template sample `r_offset`
/// lands on each peak index.
pub fn synth_frank_reference(
    peaks: &PeakTrain,
    templates: &FrankTemplates,
    t_len: usize,
) -> Result<ReferenceSet> {
    if templates.is_empty() {
        return Err(FecgError::InvalidParameter("empty templates".into()));
    }
    if let Some(min_int) = peaks.min_interval() {
        if templates.len() >= min_int {
            return Err(FecgError::InvalidParameter(format!(
                "template length {} overlaps the minimum peak interval {}",
                templates.len(),
                min_int
            )));
        }
    }
    let mut signals = vec![vec![0.0f64; t_len]; 3];
    for &p in &peaks.indices {
        for (lead, wf) in templates.waveforms.iter().enumerate() {
            for (k, &v) in wf.iter().enumerate() {
                let idx = p as isize + k as isize - templates.r_offset as isize;
                if idx >= 0 && (idx as usize) < t_len {
                    signals[lead][idx as usize] += v;
                }
            }
        }
    }
    Ok(ReferenceSet {
        kind: ReferenceKind::FrankTriplet,
        signals,
        channel_ids: Vec::new(),
    })
}

/// Least-squares transfer fit `H = argmin ||X - H * VCG||` via normal
/// equations; the 3x3 Gram matrix must be well-conditioned.
pub fn fit_transfer(recordings: &Array2<f64>, vcg: &Array2<f64>) -> Result<TransferFit> {
    if vcg.nrows() != 3 {
        return Err(FecgError::DimensionMismatch(format!(
            "VCG must be 3 x T, got {:?}",
            vcg.dim()
        )));
    }
    if recordings.ncols() != vcg.ncols() {
        return Err(FecgError::DimensionMismatch(format!(
            "recordings have {} samples, VCG has {}",
            recordings.ncols(),
            vcg.ncols()
        )));
    }
    let gram = vcg.dot(&vcg.t());
    let (eigs, _) = sym_eig(&gram)?;
    if eigs[2] <= 1e-12 * eigs[0].max(f64::MIN_POSITIVE) {
        return Err(FecgError::Numerical(
            "VCG rows are linearly dependent (rank-deficient Gram matrix)".into(),
        ));
    }
    let g = [
        [gram[[0, 0]], gram[[0, 1]], gram[[0, 2]]],
        [gram[[1, 0]], gram[[1, 1]], gram[[1, 2]]],
        [gram[[2, 0]], gram[[2, 1]], gram[[2, 2]]],
    ];
    let cross = recordings.dot(&vcg.t()); // N x 3
    let n = recordings.nrows();
    let mut h = Array2::<f64>::zeros((n, 3));
    for i in 0..n {
        let rhs = [cross[[i, 0]], cross[[i, 1]], cross[[i, 2]]];
        let row = solve3(g, rhs)?;
        for k in 0..3 {
            h[[i, k]] = row[k];
        }
    }
    let fitted = h.dot(vcg);
    let residuals: Vec<f64> = (0..n)
        .map(|i| {
            recordings
                .row(i)
                .iter()
                .zip(fitted.row(i))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    Ok(TransferFit { h, residuals })
}

/// Per-channel local maternal references `h_i * VCG`.
pub fn local_references(fit: &TransferFit, vcg: &Array2<f64>) -> Result<ReferenceSet> {
    if vcg.nrows() != 3 {
        return Err(FecgError::DimensionMismatch("VCG must be 3 x T".into()));
    }
    let local = fit.h.dot(vcg);
    let signals: Vec<Vec<f64>> = local.rows().into_iter().map(|r| r.to_vec()).collect();
    let channel_ids = (0..signals.len()).collect();
    Ok(ReferenceSet {
        kind: ReferenceKind::PerChannelLocal,
        signals,
        channel_ids,
    })
}

/// Mean of signal windows centered on the peaks. Windows running past the
/// record edges are skipped.
pub fn synchronous_average(signal: &[f64], peaks: &PeakTrain, window: usize) -> Result<Vec<f64>> {
    if peaks.len() < 5 {
        return Err(FecgError::InsufficientData(format!(
            "synchronous averaging needs at least 5 peaks, got {}",
            peaks.len()
        )));
    }
    if let Some(min_int) = peaks.min_interval() {
        if window >= min_int {
            return Err(FecgError::InvalidParameter(format!(
                "window {window} not below the minimum peak interval {min_int}"
            )));
        }
    }
    let half = window / 2;
    let mut acc = vec![0.0f64; window];
    let mut count = 0usize;
    for &p in &peaks.indices {
        if p < half || p - half + window > signal.len() {
            continue;
        }
        let start = p - half;
        for (k, a) in acc.iter_mut().enumerate() {
            *a += signal[start + k];
        }
        count += 1;
    }
    if count < 5 {
        return Err(FecgError::InsufficientData(format!(
            "only {count} complete windows available for averaging"
        )));
    }
    for a in acc.iter_mut() {
        *a /= count as f64;
    }
    Ok(acc)
}

/// Per-channel fetal references: each channel's synchronous-average template
/// convolved back onto the fetal peak train (template centered on each
/// peak). Invalid channels are skipped.
pub fn build_fetal_references(
    recordings: &RecordingSet,
    fetal_peaks: &PeakTrain,
    window: usize,
) -> Result<ReferenceSet> {
    let t_len = recordings.n_samples();
    let half = window / 2;
    let mut signals = Vec::new();
    let mut channel_ids = Vec::new();
    for ch in recordings.valid_channels() {
        let x = recordings.channel(ch);
        let template = synchronous_average(&x, fetal_peaks, window)?;
        let mut reference = vec![0.0f64; t_len];
        for &p in &fetal_peaks.indices {
            for (k, &v) in template.iter().enumerate() {
                let idx = p as isize + k as isize - half as isize;
                if idx >= 0 && (idx as usize) < t_len {
                    reference[idx as usize] += v;
                }
            }
        }
        signals.push(reference);
        channel_ids.push(ch);
    }
    Ok(ReferenceSet {
        kind: ReferenceKind::Fetal,
        signals,
        channel_ids,
    })
}

/// F1 score of a detected peak train against a ground-truth train, with
/// one-to-one greedy matching inside `tolerance` samples.
pub fn peak_f1(detected: &[usize], truth: &[usize], tolerance: usize) -> f64 {
    if detected.is_empty() && truth.is_empty() {
        return 1.0;
    }
    if detected.is_empty() || truth.is_empty() {
        return 0.0;
    }
    let mut tp = 0usize;
    let mut di = 0usize;
    let mut ti = 0usize;
    while di < detected.len() && ti < truth.len() {
        let d = detected[di] as i64;
        let t = truth[ti] as i64;
        if (d - t).unsigned_abs() as usize <= tolerance {
            tp += 1;
            di += 1;
            ti += 1;
        } else if d < t {
            di += 1;
        } else {
            ti += 1;
        }
    }
    let fp = detected.len() - tp;
    let fnn = truth.len() - tp;
    2.0 * tp as f64 / (2.0 * tp as f64 + fp as f64 + fnn as f64)
}
