//! Greedy MI channel selection.
//!
//! Two maternal rules pick the `K` channels carrying the least information
//! about the maternal ECG while penalizing redundancy with the channels
//! already chosen; the fetal rule then pulls out the `M` channels carrying
//! the most fetal information, with no redundancy penalty (fetal components
//! are weak, so none of that information may be discarded).
//!
//! Maternal step `k`:
//! `x'_k = argmin_j { I(x_j, ref_j) + sum_{i<k} I(x'_i, x_j) }`
//! where `ref_j` is the class reference (rule 1) or the per-channel local
//! reference (rule 2). Ties break toward the lowest channel id.

use serde::{Deserialize, Serialize};

use crate::error::{FecgError, Result};
use crate::forward::RecordingSet;
use crate::mi::{bin_labels, mi_from_labels};
use crate::preprocess::{ReferenceKind, ReferenceSet};

/// Which rule produced a selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionRule {
    Maternal1,
    Maternal2,
    Fetal1,
}

/// Objective breakdown of one greedy step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub chosen: usize,
    /// MI against the rule's reference for the chosen channel.
    pub reference_mi: f64,
    /// Accumulated pairwise MI against previously selected channels
    /// (zero for the fetal rule).
    pub redundancy_mi: f64,
}

impl StepTrace {
    pub fn objective(&self) -> f64 {
        self.reference_mi + self.redundancy_mi
    }
}

/// Result of a selection run: the ordered picks with per-step objectives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionState {
    pub rule: SelectionRule,
    pub candidates: Vec<usize>,
    pub selected: Vec<usize>,
    pub steps: Vec<StepTrace>,
}

impl SelectionState {
    pub fn validate(&self) -> Result<()> {
        for s in &self.selected {
            if !self.candidates.contains(s) {
                return Err(FecgError::InvalidParameter(format!(
                    "selected channel {s} is not a candidate"
                )));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for s in &self.selected {
            if !seen.insert(s) {
                return Err(FecgError::InvalidParameter(format!(
                    "channel {s} selected twice"
                )));
            }
        }
        Ok(())
    }
}

/// Binned-MI configuration shared by all rules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub bins: usize,
    /// Weight on the redundancy term. The rules as written sum the two terms
    /// unweighted; anything other than 1.0 is an extension.
    pub redundancy_weight: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            bins: 16,
            redundancy_weight: 1.0,
        }
    }
}

/// Binned labels of every valid channel, computed once and shared by all
/// pairwise estimates.
struct LabelCache {
    labels: Vec<Option<Vec<u16>>>,
    bins: usize,
}

impl LabelCache {
    fn new(recordings: &RecordingSet, channels: &[usize], bins: usize) -> Result<Self> {
        let mut labels: Vec<Option<Vec<u16>>> = vec![None; recordings.n_channels()];
        for &ch in channels {
            let x = recordings.channel(ch);
            labels[ch] = Some(bin_labels(&x, bins)?);
        }
        Ok(Self { labels, bins })
    }

    fn pair_mi(&self, a: usize, b: usize) -> Result<f64> {
        let la = self.labels[a]
            .as_ref()
            .ok_or_else(|| FecgError::InvalidParameter(format!("channel {a} not cached")))?;
        let lb = self.labels[b]
            .as_ref()
            .ok_or_else(|| FecgError::InvalidParameter(format!("channel {b} not cached")))?;
        mi_from_labels(la, lb, self.bins)
    }
}

fn check_samples(recordings: &RecordingSet, bins: usize) -> Result<()> {
    if recordings.n_samples() < 10 * bins * bins {
        return Err(FecgError::InsufficientData(format!(
            "selection with B={bins} needs at least {} samples, got {}",
            10 * bins * bins,
            recordings.n_samples()
        )));
    }
    Ok(())
}

/// Shared greedy loop for the maternal rules: `reference_mi[ch]` holds the
/// first objective term for every candidate channel.
fn greedy_minimize(
    recordings: &RecordingSet,
    candidates: &[usize],
    reference_mi: &[f64],
    k: usize,
    cfg: SelectionConfig,
    rule: SelectionRule,
) -> Result<SelectionState> {
    if k > candidates.len() {
        return Err(FecgError::InvalidParameter(format!(
            "cannot select {k} channels from {} candidates",
            candidates.len()
        )));
    }
    let cache = LabelCache::new(recordings, candidates, cfg.bins)?;
    // Accumulated redundancy of each candidate against the selected set;
    // updated lazily as channels are committed.
    let mut redundancy: Vec<f64> = vec![0.0; recordings.n_channels()];
    let mut remaining: Vec<usize> = candidates.to_vec();
    let mut selected = Vec::with_capacity(k);
    let mut steps = Vec::with_capacity(k);

    for _ in 0..k {
        let mut best: Option<(f64, usize)> = None;
        for &j in &remaining {
            let obj = reference_mi[j] + cfg.redundancy_weight * redundancy[j];
            let better = match best {
                None => true,
                Some((b_obj, b_id)) => obj < b_obj || (obj == b_obj && j < b_id),
            };
            if better {
                best = Some((obj, j));
            }
        }
        let (_, chosen) = best.expect("non-empty remaining set");
        steps.push(StepTrace {
            chosen,
            reference_mi: reference_mi[chosen],
            redundancy_mi: redundancy[chosen],
        });
        selected.push(chosen);
        remaining.retain(|&c| c != chosen);
        for &j in &remaining {
            redundancy[j] += cache.pair_mi(chosen, j)?;
        }
    }

    Ok(SelectionState {
        rule,
        candidates: candidates.to_vec(),
        selected,
        steps,
    })
}

/// Maternal rule 1: class references. Each candidate is compared against the
/// Frank reference of its class label (from `classify_channels`).
pub fn maternal_rule1(
    recordings: &RecordingSet,
    frank: &ReferenceSet,
    class_labels: &[Option<usize>],
    k: usize,
    cfg: SelectionConfig,
) -> Result<SelectionState> {
    if frank.kind != ReferenceKind::FrankTriplet {
        return Err(FecgError::InvalidParameter(
            "maternal rule 1 needs a Frank triplet".into(),
        ));
    }
    frank.validate()?;
    check_samples(recordings, cfg.bins)?;
    if class_labels.len() != recordings.n_channels() {
        return Err(FecgError::DimensionMismatch(format!(
            "{} class labels for {} channels",
            class_labels.len(),
            recordings.n_channels()
        )));
    }
    let candidates: Vec<usize> = recordings
        .valid_channels()
        .into_iter()
        .filter(|&ch| class_labels[ch].is_some())
        .collect();
    let ref_labels: Vec<Vec<u16>> = frank
        .signals
        .iter()
        .map(|s| bin_labels(s, cfg.bins))
        .collect::<Result<_>>()?;
    let mut reference_mi = vec![0.0f64; recordings.n_channels()];
    for &ch in &candidates {
        let class = class_labels[ch].expect("filtered to classified channels");
        let x = bin_labels(&recordings.channel(ch), cfg.bins)?;
        reference_mi[ch] = mi_from_labels(&x, &ref_labels[class], cfg.bins)?;
    }
    greedy_minimize(
        recordings,
        &candidates,
        &reference_mi,
        k,
        cfg,
        SelectionRule::Maternal1,
    )
}

/// Maternal rule 2: per-channel local references `h_i * VCG`.
pub fn maternal_rule2(
    recordings: &RecordingSet,
    local_refs: &ReferenceSet,
    k: usize,
    cfg: SelectionConfig,
) -> Result<SelectionState> {
    if local_refs.kind != ReferenceKind::PerChannelLocal {
        return Err(FecgError::InvalidParameter(
            "maternal rule 2 needs per-channel local references".into(),
        ));
    }
    local_refs.validate()?;
    check_samples(recordings, cfg.bins)?;
    let candidates: Vec<usize> = recordings
        .valid_channels()
        .into_iter()
        .filter(|&ch| local_refs.signal_for_channel(ch).is_some())
        .collect();
    let mut reference_mi = vec![0.0f64; recordings.n_channels()];
    for &ch in &candidates {
        let r = local_refs
            .signal_for_channel(ch)
            .expect("filtered to referenced channels");
        let x = bin_labels(&recordings.channel(ch), cfg.bins)?;
        let rl = bin_labels(r, cfg.bins)?;
        reference_mi[ch] = mi_from_labels(&x, &rl, cfg.bins)?;
    }
    greedy_minimize(
        recordings,
        &candidates,
        &reference_mi,
        k,
        cfg,
        SelectionRule::Maternal2,
    )
}

/// Fetal rule 1: from an already-selected set, repeatedly extract the
/// channel with the highest MI against its fetal reference, without any
/// redundancy penalty. Requires `m < |selected|`.
pub fn fetal_rule1(
    recordings: &RecordingSet,
    selected: &SelectionState,
    fetal_refs: &ReferenceSet,
    m: usize,
    cfg: SelectionConfig,
) -> Result<SelectionState> {
    if fetal_refs.kind != ReferenceKind::Fetal {
        return Err(FecgError::InvalidParameter(
            "fetal rule needs fetal references".into(),
        ));
    }
    fetal_refs.validate()?;
    check_samples(recordings, cfg.bins)?;
    if m >= selected.selected.len() {
        return Err(FecgError::InvalidParameter(format!(
            "fetal rule needs M < n(X') = {}, got M = {m}",
            selected.selected.len()
        )));
    }
    let mut fetal_mi = vec![f64::NEG_INFINITY; recordings.n_channels()];
    for &ch in &selected.selected {
        let r = fetal_refs.signal_for_channel(ch).ok_or_else(|| {
            FecgError::InvalidParameter(format!("no fetal reference for channel {ch}"))
        })?;
        let x = bin_labels(&recordings.channel(ch), cfg.bins)?;
        let rl = bin_labels(r, cfg.bins)?;
        fetal_mi[ch] = mi_from_labels(&x, &rl, cfg.bins)?;
    }

    let mut remaining = selected.selected.clone();
    let mut picked = Vec::with_capacity(m);
    let mut steps = Vec::with_capacity(m);
    for _ in 0..m {
        let mut best: Option<(f64, usize)> = None;
        for &j in &remaining {
            let better = match best {
                None => true,
                Some((b_mi, b_id)) => fetal_mi[j] > b_mi || (fetal_mi[j] == b_mi && j < b_id),
            };
            if better {
                best = Some((fetal_mi[j], j));
            }
        }
        let (mi, chosen) = best.expect("non-empty remaining set");
        steps.push(StepTrace {
            chosen,
            reference_mi: mi,
            redundancy_mi: 0.0,
        });
        picked.push(chosen);
        remaining.retain(|&c| c != chosen);
    }

    Ok(SelectionState {
        rule: SelectionRule::Fetal1,
        candidates: selected.selected.clone(),
        selected: picked,
        steps,
    })
}
