//! Mutual-information estimation and per-electrode MI maps.
//!
//! Two estimators are provided. The equiprobable-binned estimator ranks each
//! variable, assigns quantile bins, and computes plug-in MI from the joint
//! histogram; because it only sees ranks it is exactly invariant under
//! strictly increasing transforms of either variable. The KSG k-nearest-
//! neighbor estimator handles continuous scalar-vs-vector pairs (e.g. a
//! channel against a 3-D VCG reference) and is invariant, up to estimator
//! noise, under invertible maps of the reference.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FecgError, Result};
use crate::forward::{GridLayout, RecordingSet};

/// Which estimator produced a value, with its parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "estimator", content = "param")]
pub enum EstimatorKind {
    /// Equiprobable (quantile) binning with the given bin count.
    BinnedEquiprobable(usize),
    /// Kraskov-Stoegbauer-Grassberger type 1 with the given neighbor count.
    KsgKnn(usize),
}

/// A mutual-information estimate in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MIEstimate {
    pub value: f64,
    #[serde(flatten)]
    pub estimator: EstimatorKind,
    pub samples: usize,
}

/// Equiprobable bin labels of `x`: rank each sample (ties broken by sample
/// order) and split the ranks into `bins` groups of near-equal size.
pub fn bin_labels(x: &[f64], bins: usize) -> Result<Vec<u16>> {
    if bins < 2 {
        return Err(FecgError::InvalidParameter("need at least 2 bins".into()));
    }
    if bins > u16::MAX as usize {
        return Err(FecgError::InvalidParameter("too many bins".into()));
    }
    let t = x.len();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(FecgError::InvalidParameter("non-finite sample".into()));
    }
    let (min, max) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if !(max > min) {
        return Err(FecgError::DegenerateVariable(
            "constant input has no rank structure".into(),
        ));
    }
    let mut order: Vec<usize> = (0..t).collect();
    order.sort_by(|&i, &j| {
        x[i].partial_cmp(&x[j])
            .expect("finite samples")
            .then(i.cmp(&j))
    });
    let mut labels = vec![0u16; t];
    for (rank, &idx) in order.iter().enumerate() {
        labels[idx] = (rank * bins / t) as u16;
    }
    Ok(labels)
}

/// Plug-in MI (nats) from two equiprobable label streams.
///
/// The accumulation pairs the `(i, j)` and `(j, i)` histogram terms so the
/// result is bitwise symmetric in its arguments.
pub fn mi_from_labels(a: &[u16], b: &[u16], bins: usize) -> Result<f64> {
    if a.len() != b.len() {
        return Err(FecgError::DimensionMismatch(format!(
            "label streams of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    let t = a.len();
    let mut joint = vec![0u32; bins * bins];
    let mut ma = vec![0u32; bins];
    let mut mb = vec![0u32; bins];
    for (&la, &lb) in a.iter().zip(b) {
        joint[la as usize * bins + lb as usize] += 1;
        ma[la as usize] += 1;
        mb[lb as usize] += 1;
    }
    let tf = t as f64;
    let term = |i: usize, j: usize| -> f64 {
        let n = joint[i * bins + j];
        if n == 0 {
            return 0.0;
        }
        let n = n as f64;
        (n / tf) * ((n * tf) / (ma[i] as f64 * mb[j] as f64)).ln()
    };
    let mut total = 0.0;
    for i in 0..bins {
        total += term(i, i);
        for j in (i + 1)..bins {
            total += term(i, j) + term(j, i);
        }
    }
    // Plug-in MI is a KL divergence, hence non-negative; trim float dust.
    Ok(total.max(0.0))
}

/// Binned equiprobable MI between two scalar sample streams.
///
/// Requires `T >= 10 * B^2` so the joint histogram is populated.
pub fn estimate_mi_binned(x: &[f64], y: &[f64], bins: usize) -> Result<MIEstimate> {
    if x.len() != y.len() {
        return Err(FecgError::DimensionMismatch(format!(
            "x has {} samples, y has {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 10 * bins * bins {
        return Err(FecgError::InsufficientData(format!(
            "binned MI with B={} needs at least {} samples, got {}",
            bins,
            10 * bins * bins,
            x.len()
        )));
    }
    let la = bin_labels(x, bins)?;
    let lb = bin_labels(y, bins)?;
    Ok(MIEstimate {
        value: mi_from_labels(&la, &lb, bins)?,
        estimator: EstimatorKind::BinnedEquiprobable(bins),
        samples: x.len(),
    })
}

// Digamma via the recurrence psi(x) = psi(x+1) - 1/x and the asymptotic
// series for large arguments.
fn digamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    acc + x.ln() - 0.5 * inv - inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 / 252.0))
}

fn jitter_unit(seed: u64, i: u64) -> f64 {
    // Deterministic tiny perturbation in (-0.5, 0.5).
    let mut z = seed ^ i.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64 - 0.5
}

fn has_duplicates(values: &[f64]) -> bool {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    sorted.windows(2).any(|w| w[0] == w[1])
}

/// KSG type-1 MI estimate between a scalar `x` and a `d`-dimensional `y`
/// (`d x T`), in nats. Max-norm metric in every space. The estimate may be
/// slightly negative for (near-)independent inputs.
///
/// Exact duplicate values break the strict-inequality neighbor counting, so
/// inputs containing duplicates are jittered deterministically (about 1e-10
/// of each dimension's scale) and a warning is logged.
pub fn estimate_mi_knn(x: &[f64], y: &Array2<f64>, k: usize) -> Result<MIEstimate> {
    let t = x.len();
    if y.ncols() != t {
        return Err(FecgError::DimensionMismatch(format!(
            "x has {} samples, y has {}",
            t,
            y.ncols()
        )));
    }
    if k < 1 {
        return Err(FecgError::InvalidParameter("k must be >= 1".into()));
    }
    if t <= 2 * k {
        return Err(FecgError::InsufficientData(format!(
            "KSG with k={k} needs more than {} samples, got {t}",
            2 * k
        )));
    }
    let d = y.nrows();
    if d == 0 {
        return Err(FecgError::InvalidParameter(
            "y must have >= 1 dimension".into(),
        ));
    }
    if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(FecgError::InvalidParameter("non-finite sample".into()));
    }

    let mut x = x.to_vec();
    let mut y = y.clone();
    let mut needs_jitter = has_duplicates(&x);
    if !needs_jitter {
        for r in 0..d {
            if has_duplicates(&y.row(r).to_vec()) {
                needs_jitter = true;
                break;
            }
        }
    }
    if needs_jitter {
        log::warn!("estimate_mi_knn: duplicate points detected, applying deterministic jitter");
        let scale_of = |v: &[f64]| {
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / v.len() as f64;
            var.sqrt().max(1e-30)
        };
        let sx = 1e-10 * scale_of(&x);
        for (i, v) in x.iter_mut().enumerate() {
            *v += sx * jitter_unit(0x5151, i as u64);
        }
        for r in 0..d {
            let sr = 1e-10 * scale_of(&y.row(r).to_vec());
            for i in 0..t {
                y[[r, i]] += sr * jitter_unit(0x6161 + r as u64, i as u64);
            }
        }
    }

    let x = &x;
    let y = &y;
    let psi_sums: Vec<f64> = (0..t)
        .into_par_iter()
        .map(|i| {
            let mut dx = vec![0.0f64; t];
            let mut dy = vec![0.0f64; t];
            for j in 0..t {
                dx[j] = (x[i] - x[j]).abs();
                let mut m = 0.0f64;
                for r in 0..d {
                    m = m.max((y[[r, i]] - y[[r, j]]).abs());
                }
                dy[j] = m;
            }
            // kth-nearest joint distance, excluding the point itself.
            let mut joint: Vec<f64> = (0..t)
                .filter(|&j| j != i)
                .map(|j| dx[j].max(dy[j]))
                .collect();
            let (_, kth, _) =
                joint.select_nth_unstable_by(k - 1, |a, b| a.partial_cmp(b).expect("finite"));
            let eps = *kth;
            let mut nx = 0usize;
            let mut ny = 0usize;
            for j in 0..t {
                if j == i {
                    continue;
                }
                if dx[j] < eps {
                    nx += 1;
                }
                if dy[j] < eps {
                    ny += 1;
                }
            }
            digamma((nx + 1) as f64) + digamma((ny + 1) as f64)
        })
        .collect();

    let mean_psi = psi_sums.iter().sum::<f64>() / t as f64;
    let value = digamma(k as f64) + digamma(t as f64) - mean_psi;
    Ok(MIEstimate {
        value,
        estimator: EstimatorKind::KsgKnn(k),
        samples: t,
    })
}

/// Pearson correlation coefficient. Errors when either input is constant.
pub fn pearson_correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.is_empty() {
        return Err(FecgError::DimensionMismatch(
            "correlation needs equal-length non-empty inputs".into(),
        ));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let da = a - mx;
        let db = b - my;
        sxx += da * da;
        syy += db * db;
        sxy += da * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(FecgError::DegenerateVariable(
            "constant input in correlation".into(),
        ));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// What a map's reference signals were.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapKind {
    Maternal,
    Fetal,
    Differential,
}

/// Per-electrode MI values aligned to the array grid. Channels that were
/// flagged invalid, or whose channel/reference pair is degenerate, are
/// absent (`None`).
#[derive(Debug, Clone, PartialEq)]
pub struct MIMap {
    pub layout: GridLayout,
    pub values: Vec<Option<f64>>,
    pub kind: MapKind,
}

impl MIMap {
    /// Dense grid of the map; cells without a channel (or absent values)
    /// hold NaN.
    pub fn grid(&self) -> Array2<f64> {
        let mut g = Array2::<f64>::from_elem((self.layout.n_rows, self.layout.n_cols), f64::NAN);
        for (ch, val) in self.values.iter().enumerate() {
            if let Some(v) = val {
                let (r, c) = self.layout.cells[ch];
                g[[r, c]] = *v;
            }
        }
        g
    }

    /// Present (channel, value) pairs.
    pub fn present(&self) -> Vec<(usize, f64)> {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|v| (i, v)))
            .collect()
    }
}

/// Estimator configuration for map building.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiMapConfig {
    pub bins: usize,
}

impl Default for MiMapConfig {
    fn default() -> Self {
        Self { bins: 16 }
    }
}

/// MI of every channel against its own reference trace.
///
/// `refs` must carry one row per channel. Invalid channels and degenerate
/// channel/reference pairs come back absent.
pub fn mi_map(
    recordings: &RecordingSet,
    refs: &Array2<f64>,
    layout: &GridLayout,
    kind: MapKind,
    cfg: MiMapConfig,
) -> Result<MIMap> {
    let n = recordings.n_channels();
    if refs.nrows() != n || refs.ncols() != recordings.n_samples() {
        return Err(FecgError::DimensionMismatch(format!(
            "references {:?} for {} channels x {} samples",
            refs.dim(),
            n,
            recordings.n_samples()
        )));
    }
    if layout.cells.len() != n {
        return Err(FecgError::DimensionMismatch(format!(
            "layout has {} cells for {} channels",
            layout.cells.len(),
            n
        )));
    }
    let values: Vec<Option<f64>> = (0..n)
        .into_par_iter()
        .map(|ch| {
            if !recordings.valid[ch] {
                return None;
            }
            let x = recordings.channel(ch);
            let r = refs.row(ch).to_vec();
            match estimate_mi_binned(&x, &r, cfg.bins) {
                Ok(est) => Some(est.value),
                Err(FecgError::DegenerateVariable(_)) => {
                    log::warn!("mi_map: channel {ch} degenerate, marked absent");
                    None
                }
                Err(e) => {
                    log::warn!("mi_map: channel {ch} failed ({e}), marked absent");
                    None
                }
            }
        })
        .collect();
    Ok(MIMap {
        layout: layout.clone(),
        values,
        kind,
    })
}

/// Elementwise fetal-minus-maternal map. Cells absent in either input are
/// absent in the difference.
pub fn differential_mi_map(fetal: &MIMap, maternal: &MIMap) -> Result<MIMap> {
    if fetal.layout != maternal.layout {
        return Err(FecgError::DimensionMismatch(
            "MI maps built on different grids".into(),
        ));
    }
    let values = fetal
        .values
        .iter()
        .zip(&maternal.values)
        .map(|(f, m)| match (f, m) {
            (Some(f), Some(m)) => Some(f - m),
            _ => None,
        })
        .collect();
    Ok(MIMap {
        layout: fetal.layout.clone(),
        values,
        kind: MapKind::Differential,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn gaussian_pair(rho: f64, t: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut x = Vec::with_capacity(t);
        let mut y = Vec::with_capacity(t);
        for _ in 0..t {
            let a: f64 = normal.sample(&mut rng);
            let b: f64 = normal.sample(&mut rng);
            x.push(a);
            y.push(rho * a + (1.0 - rho * rho).sqrt() * b);
        }
        (x, y)
    }

    #[test]
    fn self_mi_is_ln_b() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..10_000).map(|_| rng.gen::<f64>()).collect();
        let est = estimate_mi_binned(&x, &x, 16).unwrap();
        assert!(
            (est.value - 16.0f64.ln()).abs() < 1e-12,
            "I(X,X) = {} vs ln 16 = {}",
            est.value,
            16.0f64.ln()
        );
    }

    #[test]
    fn independent_uniforms_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<f64> = (0..100_000).map(|_| rng.gen::<f64>()).collect();
        let y: Vec<f64> = (0..100_000).map(|_| rng.gen::<f64>()).collect();
        let est = estimate_mi_binned(&x, &y, 8).unwrap();
        assert!(est.value < 0.01, "MI of independents = {}", est.value);
    }

    #[test]
    fn gaussian_quantized_mi_oracle() {
        // The plug-in binned estimator targets the MI of the 16-bin
        // equiprobable discretization, which for a bivariate Gaussian has a
        // closed form via copula rectangle probabilities. Frozen oracle
        // values (B = 16): rho=0.6 -> 0.21193, rho=0.9 -> 0.77206 nats; the
        // continuous MI is higher by the discretization loss (0.0112 and
        // 0.0583 respectively).
        for (rho, quantized) in [(0.6, 0.21193), (0.9, 0.77206)] {
            let (x, y) = gaussian_pair(rho, 100_000, 3);
            let est = estimate_mi_binned(&x, &y, 16).unwrap();
            assert!(
                (est.value - quantized).abs() < 0.012,
                "rho={rho}: estimate {} vs quantized oracle {quantized}",
                est.value
            );
        }
    }

    #[test]
    fn constant_input_errors() {
        let x = vec![1.0; 4000];
        let y: Vec<f64> = (0..4000).map(|i| i as f64).collect();
        assert!(matches!(
            estimate_mi_binned(&x, &y, 4),
            Err(FecgError::DegenerateVariable(_))
        ));
    }

    #[test]
    fn too_few_samples_errors() {
        let x: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert!(matches!(
            estimate_mi_binned(&x, &x, 16),
            Err(FecgError::InsufficientData(_))
        ));
    }

    #[test]
    fn binned_mi_is_bitwise_symmetric() {
        let (x, y) = gaussian_pair(0.5, 20_000, 4);
        let a = estimate_mi_binned(&x, &y, 16).unwrap().value;
        let b = estimate_mi_binned(&y, &x, 16).unwrap().value;
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn binned_mi_invariant_under_monotone_maps() {
        let (x, y) = gaussian_pair(0.6, 20_000, 5);
        let base = estimate_mi_binned(&x, &y, 16).unwrap().value;
        let cubed: Vec<f64> = x.iter().map(|v| v * v * v).collect();
        let exped: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        assert_eq!(
            base.to_bits(),
            estimate_mi_binned(&cubed, &y, 16).unwrap().value.to_bits()
        );
        assert_eq!(
            base.to_bits(),
            estimate_mi_binned(&exped, &y, 16).unwrap().value.to_bits()
        );
    }

    #[test]
    fn binned_mi_bounded_by_ln_b() {
        for seed in 0..5 {
            let (x, y) = gaussian_pair(0.95, 5_000, seed);
            let est = estimate_mi_binned(&x, &y, 8).unwrap();
            assert!(est.value >= 0.0);
            assert!(est.value <= 8.0f64.ln() + 1e-12);
        }
    }

    #[test]
    fn ksg_independent_scalar_vs_vector() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let t = 10_000;
        let x: Vec<f64> = (0..t).map(|_| normal.sample(&mut rng)).collect();
        let mut y = Array2::<f64>::zeros((3, t));
        for v in y.iter_mut() {
            *v = normal.sample(&mut rng);
        }
        let est = estimate_mi_knn(&x, &y, 4).unwrap();
        assert!(est.value.abs() < 0.02, "KSG on independents = {}", est.value);
    }

    #[test]
    fn ksg_near_deterministic_dependence() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let t = 5_000;
        let mut y = Array2::<f64>::zeros((3, t));
        for v in y.iter_mut() {
            *v = normal.sample(&mut rng);
        }
        let x: Vec<f64> = (0..t)
            .map(|i| y[[0, i]] + 1e-4 * normal.sample(&mut rng))
            .collect();
        let est = estimate_mi_knn(&x, &y, 4).unwrap();
        assert!(est.value > 2.0, "KSG near-deterministic = {}", est.value);
    }

    #[test]
    fn ksg_gaussian_rho_06() {
        let (x, y) = gaussian_pair(0.6, 10_000, 8);
        let y2 = Array2::from_shape_vec((1, y.len()), y).unwrap();
        let est = estimate_mi_knn(&x, &y2, 4).unwrap();
        let truth = -0.5 * (1.0 - 0.36f64).ln();
        assert!(
            (est.value - truth).abs() < 0.03,
            "KSG {} vs truth {truth}",
            est.value
        );
    }

    #[test]
    fn ksg_duplicates_jittered_not_fatal() {
        // Heavily quantized data: many exact duplicates.
        let t = 600;
        let x: Vec<f64> = (0..t).map(|i| ((i % 7) as f64)).collect();
        let mut y = Array2::<f64>::zeros((1, t));
        for i in 0..t {
            y[[0, i]] = ((i % 5) as f64) * 0.5;
        }
        let est = estimate_mi_knn(&x, &y, 3).unwrap();
        assert!(est.value.is_finite());
    }

    #[test]
    fn pearson_affine_and_negation() {
        let x: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin()).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 3.0).collect();
        let z: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson_correlation(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson_correlation(&x, &z).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_independent_uniforms_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<f64> = (0..100_000).map(|_| rng.gen::<f64>()).collect();
        let y: Vec<f64> = (0..100_000).map(|_| rng.gen::<f64>()).collect();
        assert!(pearson_correlation(&x, &y).unwrap().abs() < 0.02);
    }

    #[test]
    fn pearson_constant_errors() {
        let x = vec![2.0; 100];
        let y: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert!(pearson_correlation(&x, &y).is_err());
    }

    #[test]
    fn digamma_recurrence_identity() {
        // psi(x+1) = psi(x) + 1/x, and psi(1) = -gamma.
        for x in [0.5, 1.0, 2.3, 7.9] {
            assert!((digamma(x + 1.0) - digamma(x) - 1.0 / x).abs() < 1e-10);
        }
        assert!((digamma(1.0) + 0.5772156649015329).abs() < 1e-10);
    }

    fn toy_recordings(n: usize, t: usize, seed: u64) -> (RecordingSet, GridLayout) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = Array2::<f64>::zeros((n, t));
        for v in data.iter_mut() {
            *v = rng.gen::<f64>();
        }
        let labels = (0..n).map(|i| format!("ch{i}")).collect();
        let rec = RecordingSet::new(data, 100.0, labels).unwrap();
        let layout = GridLayout {
            n_rows: n,
            n_cols: 1,
            cells: (0..n).map(|i| (i, 0)).collect(),
        };
        (rec, layout)
    }

    #[test]
    fn mi_map_self_reference_is_ln_b() {
        let (rec, layout) = toy_recordings(4, 4000, 10);
        let refs = rec.data.clone();
        let map =
            mi_map(&rec, &refs, &layout, MapKind::Maternal, MiMapConfig { bins: 16 }).unwrap();
        for v in map.values.iter() {
            assert!((v.unwrap() - 16f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn mi_map_independent_refs_near_zero() {
        let (rec, layout) = toy_recordings(3, 100_000, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut refs = Array2::<f64>::zeros((3, 100_000));
        for v in refs.iter_mut() {
            *v = rng.gen::<f64>();
        }
        let map = mi_map(&rec, &refs, &layout, MapKind::Fetal, MiMapConfig { bins: 8 }).unwrap();
        for v in map.values.iter() {
            assert!(v.unwrap() < 0.01);
        }
    }

    #[test]
    fn mi_map_marks_invalid_and_degenerate_absent() {
        let (mut rec, layout) = toy_recordings(3, 4000, 13);
        rec.valid[0] = false;
        for v in rec.data.row_mut(2).iter_mut() {
            *v = 7.0; // degenerate channel
        }
        let refs = rec.data.clone();
        let map = mi_map(&rec, &refs, &layout, MapKind::Maternal, MiMapConfig { bins: 8 }).unwrap();
        assert!(map.values[0].is_none());
        assert!(map.values[1].is_some());
        assert!(map.values[2].is_none());
    }

    #[test]
    fn mi_map_length_mismatch_errors() {
        let (rec, layout) = toy_recordings(3, 4000, 14);
        let refs = Array2::<f64>::zeros((2, 4000));
        assert!(mi_map(&rec, &refs, &layout, MapKind::Maternal, MiMapConfig::default()).is_err());
    }

    #[test]
    fn differential_map_rules() {
        let (rec, layout) = toy_recordings(3, 4000, 15);
        let refs = rec.data.clone();
        let cfg = MiMapConfig { bins: 8 };
        let m = mi_map(&rec, &refs, &layout, MapKind::Maternal, cfg).unwrap();
        let f = mi_map(&rec, &refs, &layout, MapKind::Fetal, cfg).unwrap();
        let d = differential_mi_map(&f, &m).unwrap();
        for v in d.values.iter() {
            assert_eq!(v.unwrap(), 0.0);
        }
        // Shifting the fetal map shifts the differential by the same amount.
        let mut f_shift = f.clone();
        for v in f_shift.values.iter_mut().flatten() {
            *v += 0.25;
        }
        let d2 = differential_mi_map(&f_shift, &m).unwrap();
        for v in d2.values.iter() {
            assert!((v.unwrap() - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn differential_map_grid_mismatch_errors() {
        let (rec, layout) = toy_recordings(3, 4000, 16);
        let refs = rec.data.clone();
        let cfg = MiMapConfig { bins: 8 };
        let m = mi_map(&rec, &refs, &layout, MapKind::Maternal, cfg).unwrap();
        let (rec2, layout2) = toy_recordings(4, 4000, 17);
        let refs2 = rec2.data.clone();
        let f = mi_map(&rec2, &refs2, &layout2, MapKind::Fetal, cfg).unwrap();
        assert!(differential_mi_map(&f, &m).is_err());
    }
}
