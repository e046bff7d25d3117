//! Whitening and JADE: joint approximate diagonalization of the full set of
//! fourth-order cumulant matrices, after eigenvalue whitening. Extracted
//! sources are ranked by fetal content against a reference trace or a
//! ground-truth peak train.

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{FecgError, Result};
use crate::linalg::sym_eig;
use crate::mi::estimate_mi_binned;
use crate::preprocess::{detect_r_peaks, peak_f1, PeakTrain};

/// Sweep-angle threshold for the Jacobi joint diagonalization.
const SWEEP_THRESHOLD: f64 = 1e-6;
/// Maximum number of Jacobi sweeps.
const MAX_SWEEPS: usize = 100;

/// Whitening stage output.
#[derive(Debug, Clone)]
pub struct Whitening {
    /// `m x N` matrix mapping centered data to the whitened space.
    pub matrix: Array2<f64>,
    /// All `N` covariance eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// Per-channel means removed before whitening.
    pub mean: Vec<f64>,
}

/// Center and whiten `x` (channels x samples), keeping the `m` strongest
/// eigendirections. The returned `Z` has identity sample covariance.
pub fn whiten(x: &Array2<f64>, m: usize) -> Result<(Array2<f64>, Whitening)> {
    let n = x.nrows();
    let t = x.ncols();
    if m == 0 || m > n {
        return Err(FecgError::InvalidParameter(format!(
            "retained dimension {m} outside 1..={n}"
        )));
    }
    if t < 2 {
        return Err(FecgError::InsufficientData("need at least 2 samples".into()));
    }
    let mean: Vec<f64> = (0..n)
        .map(|i| x.row(i).iter().sum::<f64>() / t as f64)
        .collect();
    let mut centered = x.clone();
    for (i, mut row) in centered.rows_mut().into_iter().enumerate() {
        let mu = mean[i];
        row.mapv_inplace(|v| v - mu);
    }
    let cov = centered.dot(&centered.t()) / t as f64;
    let (eigenvalues, vectors) = sym_eig(&cov)?;
    let scale = eigenvalues[0].max(f64::MIN_POSITIVE);
    if eigenvalues[m - 1] <= 1e-12 * scale {
        return Err(FecgError::Numerical(format!(
            "retained dimension {m} exceeds the numerical rank of the covariance"
        )));
    }
    let mut w = Array2::<f64>::zeros((m, n));
    for k in 0..m {
        let s = 1.0 / eigenvalues[k].sqrt();
        for i in 0..n {
            w[[k, i]] = s * vectors[[i, k]];
        }
    }
    let z = w.dot(&centered);
    Ok((
        z,
        Whitening {
            matrix: w,
            eigenvalues,
            mean,
        },
    ))
}

/// Map whitened sources back to the data space: the pseudoinverse of the
/// whitening matrix is `E_m * D_m^{1/2}`.
fn unwhitening(wh: &Whitening) -> Array2<f64> {
    let m = wh.matrix.nrows();
    let n = wh.matrix.ncols();
    let mut a = Array2::<f64>::zeros((n, m));
    for k in 0..m {
        let s = wh.eigenvalues[k];
        for i in 0..n {
            // matrix[[k, i]] = vectors[[i, k]] / sqrt(lambda_k)
            a[[i, k]] = wh.matrix[[k, i]] * s;
        }
    }
    a
}

/// The full parallel set of fourth-order cumulant matrices `Q^{(kl)}`,
/// `k <= l`, of whitened data:
/// `Q^{(kl)}[i, j] = E[z_i z_j z_k z_l] - d_ij d_kl - d_ik d_jl - d_il d_jk`.
fn cumulant_matrices(z: &Array2<f64>) -> Vec<Array2<f64>> {
    let m = z.nrows();
    let t = z.ncols();
    let n_pairs = m * (m + 1) / 2;

    // Accumulate E[z_i z_j z_k z_l] in sample chunks; chunks are reduced in
    // order so the result does not depend on the thread schedule.
    let chunk = 4096usize;
    let starts: Vec<usize> = (0..t).step_by(chunk).collect();
    let partials: Vec<Vec<Array2<f64>>> = starts
        .par_iter()
        .map(|&start| {
            let stop = (start + chunk).min(t);
            let mut acc = vec![Array2::<f64>::zeros((m, m)); n_pairs];
            let mut zt = vec![0.0f64; m];
            for s in start..stop {
                for (i, v) in zt.iter_mut().enumerate() {
                    *v = z[[i, s]];
                }
                let mut pair = 0usize;
                for k in 0..m {
                    for l in k..m {
                        let w = zt[k] * zt[l];
                        let q = &mut acc[pair];
                        for i in 0..m {
                            let wi = w * zt[i];
                            for j in 0..m {
                                q[[i, j]] += wi * zt[j];
                            }
                        }
                        pair += 1;
                    }
                }
            }
            acc
        })
        .collect();

    let mut cumulants = vec![Array2::<f64>::zeros((m, m)); n_pairs];
    for part in partials {
        for (q, p) in cumulants.iter_mut().zip(part) {
            *q += &p;
        }
    }
    let tf = t as f64;
    let mut pair = 0usize;
    for k in 0..m {
        for l in k..m {
            let q = &mut cumulants[pair];
            q.mapv_inplace(|v| v / tf);
            // Subtract the Gaussian moment structure of whitened data.
            if k == l {
                for i in 0..m {
                    q[[i, i]] -= 1.0;
                }
            }
            q[[k, l]] -= 1.0;
            q[[l, k]] -= 1.0;
            pair += 1;
        }
    }
    cumulants
}

/// Outcome of the joint diagonalization.
#[derive(Debug, Clone)]
pub struct JadeOutcome {
    /// Orthogonal rotation `V` such that `V^T Q V` is jointly as diagonal as
    /// possible over the cumulant set.
    pub rotation: Array2<f64>,
    pub sweeps: usize,
    pub converged: bool,
}

/// JADE rotation of whitened data: Givens sweeps over all index pairs until
/// every rotation angle in a sweep falls below 1e-6 rad (or 100 sweeps).
pub fn jade(z: &Array2<f64>) -> Result<JadeOutcome> {
    let m = z.nrows();
    if m == 0 {
        return Err(FecgError::InvalidParameter("empty input".into()));
    }
    if z.ncols() < m * 10 {
        return Err(FecgError::InsufficientData(format!(
            "JADE on {m} dimensions needs far more than {} samples",
            z.ncols()
        )));
    }
    let mut v = Array2::<f64>::eye(m);
    if m == 1 {
        return Ok(JadeOutcome {
            rotation: v,
            sweeps: 0,
            converged: true,
        });
    }
    let mut cumulants = cumulant_matrices(z);

    let mut sweeps = 0usize;
    let mut converged = false;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut max_angle = 0.0f64;
        for p in 0..m - 1 {
            for q in (p + 1)..m {
                // Givens angle maximizing the joint diagonality for (p, q).
                let mut g_pp = 0.0;
                let mut g_pq = 0.0;
                let mut g_qq = 0.0;
                for c in &cumulants {
                    let h1 = c[[p, p]] - c[[q, q]];
                    let h2 = c[[p, q]] + c[[q, p]];
                    g_pp += h1 * h1;
                    g_pq += h1 * h2;
                    g_qq += h2 * h2;
                }
                let ton = g_pp - g_qq;
                let toff = 2.0 * g_pq;
                let theta = 0.5 * toff.atan2(ton + (ton * ton + toff * toff).sqrt());
                max_angle = max_angle.max(theta.abs());
                if theta.abs() <= SWEEP_THRESHOLD {
                    continue;
                }
                let c_ = theta.cos();
                let s_ = theta.sin();
                for cm in cumulants.iter_mut() {
                    for i in 0..m {
                        let a = cm[[i, p]];
                        let b = cm[[i, q]];
                        cm[[i, p]] = c_ * a + s_ * b;
                        cm[[i, q]] = -s_ * a + c_ * b;
                    }
                    for j in 0..m {
                        let a = cm[[p, j]];
                        let b = cm[[q, j]];
                        cm[[p, j]] = c_ * a + s_ * b;
                        cm[[q, j]] = -s_ * a + c_ * b;
                    }
                }
                for i in 0..m {
                    let a = v[[i, p]];
                    let b = v[[i, q]];
                    v[[i, p]] = c_ * a + s_ * b;
                    v[[i, q]] = -s_ * a + c_ * b;
                }
            }
        }
        if max_angle <= SWEEP_THRESHOLD {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("jade: no convergence after {MAX_SWEEPS} sweeps; returning best effort");
    }
    Ok(JadeOutcome {
        rotation: v,
        sweeps,
        converged,
    })
}

/// Full ICA output.
#[derive(Debug, Clone)]
pub struct ICAResult {
    /// `m x N`: sources = demixing * (x - mean).
    pub demixing: Array2<f64>,
    /// `N x m`: pseudoinverse of the demixing, mapping sources back to
    /// channels.
    pub mixing: Array2<f64>,
    /// `m x T` extracted sources, zero-mean and unit-variance.
    pub sources: Array2<f64>,
    pub whitening: Whitening,
    pub sweeps: usize,
    pub converged: bool,
    /// Excess kurtosis per source; all near zero means the sources are
    /// Gaussian-like and the rotation is not identifiable.
    pub source_kurtosis: Vec<f64>,
}

/// Whiten to `m` dimensions and apply JADE.
pub fn separate(x: &Array2<f64>, m: usize) -> Result<ICAResult> {
    let n = x.nrows();
    if m < 2 || m > n {
        return Err(FecgError::InvalidParameter(format!(
            "retained dimension {m} outside 2..={n}"
        )));
    }
    let (z, wh) = whiten(x, m)?;
    let outcome = jade(&z)?;
    let mut demixing = outcome.rotation.t().dot(&wh.matrix);
    let mut sources = outcome.rotation.t().dot(&z);
    let mut mixing = unwhitening(&wh).dot(&outcome.rotation);

    // Sign convention: the largest-magnitude demixing weight of each source
    // is positive. Keeps repeated runs bit-identical and orientation stable;
    // the matching mixing column flips with its demixing row.
    for k in 0..m {
        let row = demixing.row(k);
        let mut best = 0usize;
        for i in 1..row.len() {
            if row[i].abs() > row[best].abs() {
                best = i;
            }
        }
        if row[best] < 0.0 {
            demixing.row_mut(k).mapv_inplace(|v| -v);
            sources.row_mut(k).mapv_inplace(|v| -v);
            mixing.column_mut(k).mapv_inplace(|v| -v);
        }
    }

    let t = sources.ncols() as f64;
    let source_kurtosis: Vec<f64> = (0..m)
        .map(|k| {
            let row = sources.row(k);
            let m4 = row.iter().map(|v| v * v * v * v).sum::<f64>() / t;
            let m2 = row.iter().map(|v| v * v).sum::<f64>() / t;
            m4 / (m2 * m2) - 3.0
        })
        .collect();
    if source_kurtosis.iter().all(|k| k.abs() < 0.1) {
        log::warn!("separate: all sources near-Gaussian (kurtosis ~ 0); rotation not identifiable");
    }

    Ok(ICAResult {
        demixing,
        mixing,
        sources,
        whitening: wh,
        sweeps: outcome.sweeps,
        converged: outcome.converged,
        source_kurtosis,
    })
}

/// Evidence used to score sources for fetal content.
pub enum FetalEvidence<'a> {
    /// Binned MI against a fetal reference trace.
    Reference { signal: &'a [f64], bins: usize },
    /// F1 of each source's detected peak train against a ground-truth train.
    Peaks {
        truth: &'a PeakTrain,
        sample_rate: f64,
        rate_band: (f64, f64),
        tolerance: usize,
    },
}

/// One scored component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentScore {
    pub component: usize,
    pub score: f64,
}

/// Score every source for fetal content and order descending. Sources that
/// cannot be scored (degenerate, no detectable peaks) score zero.
pub fn rank_fetal_components(result: &ICAResult, evidence: &FetalEvidence) -> Vec<ComponentScore> {
    let m = result.sources.nrows();
    let mut scores: Vec<ComponentScore> = (0..m)
        .map(|k| {
            let src = result.sources.row(k).to_vec();
            let score = match evidence {
                FetalEvidence::Reference { signal, bins } => {
                    match estimate_mi_binned(&src, signal, *bins) {
                        Ok(est) => est.value,
                        Err(_) => 0.0,
                    }
                }
                FetalEvidence::Peaks {
                    truth,
                    sample_rate,
                    rate_band,
                    tolerance,
                } => match detect_r_peaks(&src, *sample_rate, *rate_band) {
                    Ok(train) => peak_f1(&train.indices, &truth.indices, *tolerance),
                    Err(_) => 0.0,
                },
            };
            ComponentScore {
                component: k,
                score,
            }
        })
        .collect();
    scores.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.component.cmp(&b.component))
    });
    scores
}

/// Amari index of a permutation-candidate matrix `P` (e.g. `W * A_true`):
/// zero when `P` is a scaled permutation, approaching 1 for diffuse mixes.
pub fn amari_index(p: &Array2<f64>) -> f64 {
    let m = p.nrows();
    assert_eq!(m, p.ncols(), "amari index needs a square matrix");
    let mut total = 0.0;
    for i in 0..m {
        let row_max = p.row(i).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let row_sum: f64 = p.row(i).iter().map(|v| v.abs()).sum();
        total += row_sum / row_max - 1.0;
        let col_max = p.column(i).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let col_sum: f64 = p.column(i).iter().map(|v| v.abs()).sum();
        total += col_sum / col_max - 1.0;
    }
    total / (2.0 * m as f64 * (m as f64 - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::orthonormality_defect;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn laplace(rng: &mut ChaCha8Rng) -> f64 {
        // Unit-variance Laplace via inverse CDF.
        let u: f64 = rng.gen::<f64>() - 0.5;
        let b = 1.0 / 2.0f64.sqrt();
        -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
    }

    fn uniform_centered(rng: &mut ChaCha8Rng) -> f64 {
        (rng.gen::<f64>() - 0.5) * (12.0f64).sqrt()
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut a = Array2::<f64>::zeros((rows, cols));
        for v in a.iter_mut() {
            *v = normal.sample(&mut rng);
        }
        a
    }

    fn sample_cov(z: &Array2<f64>) -> Array2<f64> {
        let t = z.ncols() as f64;
        let mut zc = z.clone();
        for mut row in zc.rows_mut() {
            let mu = row.iter().sum::<f64>() / t;
            row.mapv_inplace(|v| v - mu);
        }
        zc.dot(&zc.t()) / t
    }

    #[test]
    fn whiten_gives_identity_covariance() {
        let x = random_matrix(5, 20_000, 1);
        let mixed = random_matrix(5, 5, 2).dot(&x);
        let (z, _) = whiten(&mixed, 5).unwrap();
        let cov = sample_cov(&z);
        for i in 0..5 {
            for j in 0..5 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (cov[[i, j]] - target).abs() < 1e-8,
                    "cov[{i},{j}] = {}",
                    cov[[i, j]]
                );
            }
        }
    }

    #[test]
    fn whiten_of_white_data_is_near_orthogonal() {
        let x = random_matrix(4, 50_000, 3);
        let (_, wh) = whiten(&x, 4).unwrap();
        // W W^T = D^{-1}; for unit-variance white input D ~ I.
        let wwt = wh.matrix.dot(&wh.matrix.t());
        for i in 0..4 {
            for j in 0..4 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((wwt[[i, j]] - target).abs() < 0.05);
            }
        }
    }

    #[test]
    fn whiten_rank2_reconstructs() {
        let sources = random_matrix(2, 5_000, 4);
        let a = random_matrix(3, 2, 5);
        let x = a.dot(&sources);
        let (z, wh) = whiten(&x, 2).unwrap();
        let recon = unwhitening(&wh).dot(&z);
        let mut xc = x.clone();
        for (i, mut row) in xc.rows_mut().into_iter().enumerate() {
            let mu = wh.mean[i];
            row.mapv_inplace(|v| v - mu);
        }
        let num: f64 = (&recon - &xc).iter().map(|v| v * v).sum();
        let den: f64 = xc.iter().map(|v| v * v).sum();
        assert!((num / den).sqrt() < 1e-6);
    }

    #[test]
    fn whiten_beyond_rank_errors() {
        let sources = random_matrix(2, 5_000, 6);
        let a = random_matrix(4, 2, 7);
        let x = a.dot(&sources);
        assert!(whiten(&x, 3).is_err());
        assert!(whiten(&x, 2).is_ok());
    }

    /// Independent test-side cumulant estimate (literal formula).
    fn brute_cumulants_2d(z: &Array2<f64>) -> Vec<Array2<f64>> {
        let t = z.ncols() as f64;
        let mut out = Vec::new();
        for k in 0..2 {
            for l in k..2 {
                let mut q = Array2::<f64>::zeros((2, 2));
                for i in 0..2 {
                    for j in 0..2 {
                        let mut e = 0.0;
                        for s in 0..z.ncols() {
                            e += z[[i, s]] * z[[j, s]] * z[[k, s]] * z[[l, s]];
                        }
                        e /= t;
                        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
                        q[[i, j]] = e - d(i, j) * d(k, l) - d(i, k) * d(j, l) - d(i, l) * d(j, k);
                    }
                }
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn jade_recovers_known_rotation_within_one_degree() {
        let t = 20_000;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut s = Array2::<f64>::zeros((2, t));
        for i in 0..t {
            s[[0, i]] = uniform_centered(&mut rng);
            s[[1, i]] = uniform_centered(&mut rng);
        }
        let theta0 = 0.4f64;
        let rot = ndarray::arr2(&[
            [theta0.cos(), -theta0.sin()],
            [theta0.sin(), theta0.cos()],
        ]);
        let z = rot.dot(&s);

        // Oracle: brute-force scan of the joint-diagonality contrast.
        let cums = brute_cumulants_2d(&z);
        let mut best = (f64::INFINITY, 0.0f64);
        let mut ang = 0.0f64;
        while ang < std::f64::consts::FRAC_PI_2 {
            let (c, si) = (ang.cos(), ang.sin());
            let g = ndarray::arr2(&[[c, -si], [si, c]]);
            let mut off = 0.0;
            for q in &cums {
                let r = g.t().dot(q).dot(&g);
                off += r[[0, 1]] * r[[0, 1]] + r[[1, 0]] * r[[1, 0]];
            }
            if off < best.0 {
                best = (off, ang);
            }
            ang += 0.1f64.to_radians();
        }

        let outcome = jade(&z).unwrap();
        assert!(outcome.converged);
        let v = &outcome.rotation;
        let jade_angle = v[[1, 0]].atan2(v[[0, 0]]);
        // Compare modulo the quarter-turn permutation/sign ambiguity.
        let quarter = std::f64::consts::FRAC_PI_2;
        let diff = (jade_angle - best.1).rem_euclid(quarter);
        let diff = diff.min(quarter - diff);
        assert!(
            diff < 1.0f64.to_radians(),
            "jade angle {jade_angle} vs contrast scan {} (diff {diff})",
            best.1
        );
        // And the scan itself should sit near the planted rotation.
        let plant_diff = (best.1 - theta0).rem_euclid(quarter);
        let plant_diff = plant_diff.min(quarter - plant_diff);
        assert!(plant_diff < 2.0f64.to_radians());
    }

    #[test]
    fn jade_on_unmixed_sources_is_signed_permutation() {
        let t = 20_000;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut z = Array2::<f64>::zeros((3, t));
        for i in 0..t {
            for k in 0..3 {
                z[[k, i]] = uniform_centered(&mut rng);
            }
        }
        let outcome = jade(&z).unwrap();
        assert!(amari_index(&outcome.rotation) < 0.02);
    }

    #[test]
    fn jade_rotation_is_orthogonal() {
        let x = random_matrix(4, 8_000, 10);
        let (z, _) = whiten(&x, 4).unwrap();
        let outcome = jade(&z).unwrap();
        assert!(orthonormality_defect(&outcome.rotation) < 1e-10);
    }

    #[test]
    fn gaussian_sources_flagged_near_zero_kurtosis() {
        let x = random_matrix(3, 20_000, 11);
        let result = separate(&x, 3).unwrap();
        for k in &result.source_kurtosis {
            assert!(k.abs() < 0.2, "kurtosis {k}");
        }
    }

    #[test]
    fn separate_super_gaussian_benchmark() {
        let t = 10_000;
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut s = Array2::<f64>::zeros((3, t));
        for i in 0..t {
            for k in 0..3 {
                s[[k, i]] = laplace(&mut rng);
            }
        }
        let a_true = random_matrix(6, 3, 13);
        let mut x = a_true.dot(&s);
        let normal = Normal::new(0.0, 0.01).unwrap();
        for v in x.iter_mut() {
            *v += normal.sample(&mut rng);
        }
        let result = separate(&x, 3).unwrap();
        let p = result.demixing.dot(&a_true);
        let idx = amari_index(&p);
        assert!(idx < 0.05, "amari index {idx}");
        // W * A ~ I on the retained subspace.
        let wa = result.demixing.dot(&result.mixing);
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((wa[[i, j]] - target).abs() < 1e-6);
            }
        }
    }

    fn best_match_corr(sources: &Array2<f64>, truth: &Array2<f64>) -> Vec<f64> {
        // Greedy |corr| matching between source rows and truth rows.
        let m = sources.nrows();
        let mut used = vec![false; m];
        let mut out = Vec::new();
        for i in 0..m {
            let mut best = (0.0f64, usize::MAX);
            for j in 0..m {
                if used[j] {
                    continue;
                }
                let c = crate::mi::pearson_correlation(
                    &sources.row(i).to_vec(),
                    &truth.row(j).to_vec(),
                )
                .unwrap()
                .abs();
                if c > best.0 {
                    best = (c, j);
                }
            }
            used[best.1] = true;
            out.push(best.0);
        }
        out
    }

    #[test]
    fn identity_mixing_recovers_sources() {
        let t = 10_000;
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let mut s = Array2::<f64>::zeros((3, t));
        for i in 0..t {
            for k in 0..3 {
                s[[k, i]] = laplace(&mut rng);
            }
        }
        let result = separate(&s, 3).unwrap();
        for c in best_match_corr(&result.sources, &s) {
            assert!(c > 0.999, "matched correlation {c}");
        }
    }

    #[test]
    fn equivariance_under_invertible_premix() {
        let t = 10_000;
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let mut s = Array2::<f64>::zeros((3, t));
        for i in 0..t {
            for k in 0..3 {
                s[[k, i]] = laplace(&mut rng);
            }
        }
        let a = random_matrix(3, 3, 16);
        let x = a.dot(&s);
        let m_left = ndarray::arr2(&[[2.0, 0.3, 0.0], [0.0, 1.5, -0.2], [0.1, 0.0, 0.8]]);
        let x2 = m_left.dot(&x);
        let r1 = separate(&x, 3).unwrap();
        let r2 = separate(&x2, 3).unwrap();
        for c in best_match_corr(&r1.sources, &r2.sources) {
            assert!(c > 0.99, "matched correlation {c}");
        }
    }

    #[test]
    fn ranking_prefers_the_reference_component() {
        let t = 8_000;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut s = Array2::<f64>::zeros((3, t));
        for i in 0..t {
            for k in 0..3 {
                s[[k, i]] = laplace(&mut rng);
            }
        }
        let a = random_matrix(5, 3, 18);
        let x = a.dot(&s);
        let result = separate(&x, 3).unwrap();
        let reference = s.row(1).to_vec();
        let ranked = rank_fetal_components(
            &result,
            &FetalEvidence::Reference {
                signal: &reference,
                bins: 16,
            },
        );
        // The top-ranked source must be the one most correlated with the
        // reference.
        let top = ranked[0].component;
        let mut best = (0.0f64, usize::MAX);
        for k in 0..3 {
            let c = crate::mi::pearson_correlation(&result.sources.row(k).to_vec(), &reference)
                .unwrap()
                .abs();
            if c > best.0 {
                best = (c, k);
            }
        }
        assert_eq!(top, best.1);
        assert!(ranked[0].score > ranked[2].score);
    }

    #[test]
    fn ranking_noise_sources_scores_near_zero() {
        let x = random_matrix(4, 60_000, 19);
        let result = separate(&x, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let reference: Vec<f64> = (0..60_000).map(|_| rng.gen::<f64>()).collect();
        let ranked = rank_fetal_components(
            &result,
            &FetalEvidence::Reference {
                signal: &reference,
                bins: 8,
            },
        );
        for r in &ranked {
            assert!(r.score < 0.01, "score {}", r.score);
        }
    }

    #[test]
    fn separate_rejects_bad_dimension() {
        let x = random_matrix(3, 1_000, 21);
        assert!(separate(&x, 4).is_err());
        assert!(separate(&x, 1).is_err());
    }
}
