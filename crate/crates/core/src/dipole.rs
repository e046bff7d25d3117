//! 3-D dynamic cardiac-dipole generator.
//!
//! The dipole trajectory `s(t) = [x(t), y(t), z(t)]` follows a phase variable
//! that advances at the (beat-varying) angular rate, with each coordinate's
//! velocity given by a sum of Gaussian kernels over the phase. Integrating
//! the system yields a quasi-periodic PQRST-like loop; beat-to-beat
//! variability enters through per-beat redraws of the rate and of the kernel
//! parameters.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::error::{FecgError, Result};

/// Smallest width a kernel may be clamped to after perturbation.
pub const MIN_KERNEL_WIDTH: f64 = 1e-6;

/// One Gaussian bump in the phase-domain velocity field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianKernel {
    /// Dipole-moment scale of the bump (dimensionless).
    pub amplitude: f64,
    /// Width in radians, strictly positive.
    pub width: f64,
    /// Center angle in `[0, 2*pi)`.
    pub center: f64,
}

impl GaussianKernel {
    pub fn new(amplitude: f64, width: f64, center: f64) -> Result<Self> {
        if !(width > 0.0) || !width.is_finite() {
            return Err(FecgError::InvalidParameter(format!(
                "kernel width must be positive and finite, got {width}"
            )));
        }
        if !amplitude.is_finite() || !center.is_finite() {
            return Err(FecgError::InvalidParameter(
                "kernel amplitude/center must be finite".into(),
            ));
        }
        Ok(Self {
            amplitude,
            width,
            center: center.rem_euclid(TAU),
        })
    }
}

/// Kernel tables for the three dipole coordinates plus the relative
/// deviation used for beat-to-beat parameter randomization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DipoleModelParams {
    pub kernels_x: Vec<GaussianKernel>,
    pub kernels_y: Vec<GaussianKernel>,
    pub kernels_z: Vec<GaussianKernel>,
    /// Per-parameter relative standard deviation, `0 <= d < 1`.
    pub deviation_fraction: f64,
}

impl DipoleModelParams {
    pub fn validate(&self) -> Result<()> {
        if self.kernels_x.is_empty() || self.kernels_y.is_empty() || self.kernels_z.is_empty() {
            return Err(FecgError::InvalidParameter(
                "each axis needs at least one kernel".into(),
            ));
        }
        if !(self.deviation_fraction >= 0.0 && self.deviation_fraction < 1.0) {
            return Err(FecgError::InvalidParameter(format!(
                "deviation_fraction must be in [0, 1), got {}",
                self.deviation_fraction
            )));
        }
        for k in self
            .kernels_x
            .iter()
            .chain(&self.kernels_y)
            .chain(&self.kernels_z)
        {
            GaussianKernel::new(k.amplitude, k.width, k.center)?;
        }
        Ok(())
    }

    /// Parse from the JSON document format shipped under `data/`
    /// (per-axis arrays of `{alpha, b, theta}` plus `deviation_fraction`).
    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            x: Vec<RawKernel>,
            y: Vec<RawKernel>,
            z: Vec<RawKernel>,
            #[serde(default)]
            deviation_fraction: f64,
        }
        #[derive(Deserialize)]
        struct RawKernel {
            alpha: f64,
            b: f64,
            theta: f64,
        }
        let raw: Raw =
            serde_json::from_str(text).map_err(|e| FecgError::Parse(format!("dipole params: {e}")))?;
        let conv = |ks: Vec<RawKernel>| -> Result<Vec<GaussianKernel>> {
            ks.into_iter()
                .map(|k| GaussianKernel::new(k.alpha, k.b, k.theta))
                .collect()
        };
        let params = Self {
            kernels_x: conv(raw.x)?,
            kernels_y: conv(raw.y)?,
            kernels_z: conv(raw.z)?,
            deviation_fraction: raw.deviation_fraction,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn to_json(&self) -> String {
        let axis = |ks: &[GaussianKernel]| -> Vec<serde_json::Value> {
            ks.iter()
                .map(|k| {
                    serde_json::json!({"alpha": k.amplitude, "b": k.width, "theta": k.center})
                })
                .collect()
        };
        serde_json::to_string_pretty(&serde_json::json!({
            "x": axis(&self.kernels_x),
            "y": axis(&self.kernels_y),
            "z": axis(&self.kernels_z),
            "deviation_fraction": self.deviation_fraction,
        }))
        .expect("dipole params serialize")
    }

    /// PQRST-morphology table for an adult heart. R peak at phase 0.
    pub fn adult_default() -> Self {
        let k = |alpha: f64, b: f64, theta: f64| GaussianKernel {
            amplitude: alpha,
            width: b,
            center: theta.rem_euclid(TAU),
        };
        Self {
            // P, Q, R, S, T
            kernels_x: vec![
                k(0.08, 0.18, -1.10),
                k(-0.12, 0.07, -0.12),
                k(1.00, 0.11, 0.00),
                k(-0.25, 0.07, 0.14),
                k(0.30, 0.33, 1.45),
            ],
            kernels_y: vec![
                k(0.04, 0.18, -1.10),
                k(0.02, 0.07, -0.10),
                k(0.45, 0.09, 0.03),
                k(-0.35, 0.08, 0.18),
                k(0.18, 0.30, 1.50),
            ],
            kernels_z: vec![
                k(-0.03, 0.18, -1.10),
                k(-0.40, 0.10, -0.02),
                k(0.60, 0.09, 0.12),
                k(-0.22, 0.33, 1.40),
            ],
            deviation_fraction: 0.03,
        }
    }
}

/// Beat-to-beat heart-rate model. Rates are in Hz (beats per second).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeartRhythm {
    pub mean_rate: f64,
    pub rate_std: f64,
    /// Base seed for the per-heart random stream; combined with the
    /// integration seed so distinct hearts in one run stay independent.
    pub seed: u64,
}

impl HeartRhythm {
    pub fn validate(&self) -> Result<()> {
        if !(self.mean_rate > 0.0) {
            return Err(FecgError::InvalidParameter(format!(
                "mean_rate must be positive, got {}",
                self.mean_rate
            )));
        }
        if self.rate_std < 0.0 {
            return Err(FecgError::InvalidParameter("rate_std must be >= 0".into()));
        }
        Ok(())
    }
}

/// Sampled dipole trajectory: per-sample phase in `[0, 2*pi)` and the three
/// coordinates as a `3 x T` matrix.
#[derive(Debug, Clone)]
pub struct DipoleTrajectory {
    pub phase: Vec<f64>,
    pub coords: Array2<f64>,
    pub sample_rate: f64,
    /// Sample indices at which the phase wrapped through `2*pi`, i.e. the
    /// R-peak instants of each completed beat.
    pub beat_onsets: Vec<usize>,
}

impl DipoleTrajectory {
    pub fn len(&self) -> usize {
        self.phase.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phase.is_empty()
    }
}

#[inline]
fn wrap_to_pi(delta: f64) -> f64 {
    // (theta - center) mod 2*pi mapped to (-pi, pi] so the bump is symmetric
    // about its center.
    let d = delta.rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

#[inline]
fn axis_velocity(kernels: &[GaussianKernel], theta: f64, omega: f64) -> f64 {
    let mut v = 0.0;
    for k in kernels {
        let d = wrap_to_pi(theta - k.center);
        let b2 = k.width * k.width;
        v -= k.amplitude * omega / b2 * d * (-d * d / (2.0 * b2)).exp();
    }
    v
}

/// Sum of the Gaussian kernels at phase `theta` — the closed-form value of
/// one coordinate of the dipole (the antiderivative of the velocity field
/// along the phase).
#[inline]
pub fn kernel_sum(kernels: &[GaussianKernel], theta: f64) -> f64 {
    let mut v = 0.0;
    for k in kernels {
        let d = wrap_to_pi(theta - k.center);
        v += k.amplitude * (-d * d / (2.0 * k.width * k.width)).exp();
    }
    v
}

/// Right-hand side of the dynamic model for state `(theta, x, y, z)`.
///
/// `d(theta)/dt = omega`; each coordinate's velocity is the Gaussian-kernel
/// sum evaluated at the wrapped phase offset.
pub fn evaluate_derivative(
    state: [f64; 4],
    params: &DipoleModelParams,
    omega: f64,
) -> Result<[f64; 4]> {
    if state.iter().any(|v| !v.is_finite()) {
        return Err(FecgError::Numerical("non-finite state".into()));
    }
    if !(omega > 0.0) {
        return Err(FecgError::InvalidParameter(format!(
            "omega must be positive, got {omega}"
        )));
    }
    let theta = state[0];
    Ok([
        omega,
        axis_velocity(&params.kernels_x, theta, omega),
        axis_velocity(&params.kernels_y, theta, omega),
        axis_velocity(&params.kernels_z, theta, omega),
    ])
}

/// Redraw each kernel parameter around its nominal value with standard
/// deviation `deviation_fraction * |nominal|`. Widths are clamped to stay
/// positive.
pub fn sample_beat_parameters<R: Rng>(params: &DipoleModelParams, rng: &mut R) -> DipoleModelParams {
    if params.deviation_fraction == 0.0 {
        return params.clone();
    }
    let frac = params.deviation_fraction;
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut perturb_axis = |kernels: &[GaussianKernel]| -> Vec<GaussianKernel> {
        kernels
            .iter()
            .map(|k| {
                let amplitude = k.amplitude + normal.sample(rng) * frac * k.amplitude.abs();
                let width =
                    (k.width + normal.sample(rng) * frac * k.width.abs()).max(MIN_KERNEL_WIDTH);
                let center =
                    (k.center + normal.sample(rng) * frac * k.center.abs()).rem_euclid(TAU);
                GaussianKernel {
                    amplitude,
                    width,
                    center,
                }
            })
            .collect()
    };
    DipoleModelParams {
        kernels_x: perturb_axis(&params.kernels_x),
        kernels_y: perturb_axis(&params.kernels_y),
        kernels_z: perturb_axis(&params.kernels_z),
        deviation_fraction: frac,
    }
}

fn draw_rate<R: Rng>(rhythm: &HeartRhythm, rng: &mut R) -> f64 {
    if rhythm.rate_std == 0.0 {
        return rhythm.mean_rate;
    }
    let normal = Normal::new(rhythm.mean_rate, rhythm.rate_std).expect("rate normal");
    // Clamp drawn rates positive.
    normal.sample(rng).max(1e-3)
}

/// Integrate the dipole model with fixed-step RK4 at the output sample rate.
///
/// The angular rate and the kernel parameters are redrawn once per beat, at
/// each phase wrap through `2*pi`. Deterministic for a fixed
/// `(rhythm.seed, seed)` pair.
pub fn integrate_trajectory(
    params: &DipoleModelParams,
    rhythm: &HeartRhythm,
    duration: f64,
    sample_rate: f64,
    seed: u64,
) -> Result<DipoleTrajectory> {
    params.validate()?;
    rhythm.validate()?;
    if !(duration > 0.0) || !(sample_rate > 0.0) {
        return Err(FecgError::InvalidParameter(
            "duration and sample_rate must be positive".into(),
        ));
    }
    let n = (duration * sample_rate).round() as usize;
    if n == 0 {
        return Err(FecgError::InvalidParameter("zero-length trajectory".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(rhythm.seed ^ seed.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let dt = 1.0 / sample_rate;

    let mut omega = TAU * draw_rate(rhythm, &mut rng);
    let mut beat_params = sample_beat_parameters(params, &mut rng);

    // Start mid-diastole so the first R peak falls inside the record.
    let theta0 = PI;
    let mut state = [
        theta0,
        kernel_sum(&beat_params.kernels_x, theta0),
        kernel_sum(&beat_params.kernels_y, theta0),
        kernel_sum(&beat_params.kernels_z, theta0),
    ];

    let mut phase = Vec::with_capacity(n);
    let mut coords = Array2::<f64>::zeros((3, n));
    let mut beat_onsets = Vec::new();

    for i in 0..n {
        phase.push(state[0].rem_euclid(TAU));
        coords[[0, i]] = state[1];
        coords[[1, i]] = state[2];
        coords[[2, i]] = state[3];

        let theta_before = state[0];
        let k1 = evaluate_derivative(state, &beat_params, omega)?;
        let k2 = evaluate_derivative(step(state, &k1, dt / 2.0), &beat_params, omega)?;
        let k3 = evaluate_derivative(step(state, &k2, dt / 2.0), &beat_params, omega)?;
        let k4 = evaluate_derivative(step(state, &k3, dt), &beat_params, omega)?;
        for j in 0..4 {
            state[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        if state.iter().any(|v| !v.is_finite()) {
            return Err(FecgError::Numerical(format!(
                "integration diverged at sample {}",
                i + 1
            )));
        }

        // Beat boundary: the unwrapped phase crossed the next multiple of
        // 2*pi. New rate and kernel parameters apply from the next step.
        if state[0].div_euclid(TAU) > theta_before.div_euclid(TAU) {
            if i + 1 < n {
                beat_onsets.push(i + 1);
            }
            omega = TAU * draw_rate(rhythm, &mut rng);
            beat_params = sample_beat_parameters(params, &mut rng);
        }
    }

    Ok(DipoleTrajectory {
        phase,
        coords,
        sample_rate,
        beat_onsets,
    })
}

#[inline]
fn step(state: [f64; 4], d: &[f64; 4], h: f64) -> [f64; 4] {
    [
        state[0] + h * d[0],
        state[1] + h * d[1],
        state[2] + h * d[2],
        state[3] + h * d[3],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_x_kernel(alpha: f64, b: f64, theta: f64) -> DipoleModelParams {
        DipoleModelParams {
            kernels_x: vec![GaussianKernel::new(alpha, b, theta).unwrap()],
            kernels_y: vec![GaussianKernel::new(0.0, 1.0, 0.0).unwrap()],
            kernels_z: vec![GaussianKernel::new(0.0, 1.0, 0.0).unwrap()],
            deviation_fraction: 0.0,
        }
    }

    #[test]
    fn derivative_zero_amplitudes() {
        let mut p = DipoleModelParams::adult_default();
        for k in p
            .kernels_x
            .iter_mut()
            .chain(&mut p.kernels_y)
            .chain(&mut p.kernels_z)
        {
            k.amplitude = 0.0;
        }
        let omega = 2.0 * PI * 1.3;
        let d = evaluate_derivative([0.4, 0.1, -0.2, 0.3], &p, omega).unwrap();
        assert_eq!(d, [omega, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn derivative_vanishes_at_kernel_center() {
        let p = single_x_kernel(1.0, 0.2, 0.9);
        let d = evaluate_derivative([0.9, 0.0, 0.0, 0.0], &p, TAU).unwrap();
        assert_eq!(d[1], 0.0);
    }

    #[test]
    fn derivative_matches_direct_arithmetic() {
        // Single x-kernel (alpha=1, b=0.3, center=0), theta=0.3, omega=2*pi.
        let p = single_x_kernel(1.0, 0.3, 0.0);
        let omega = TAU;
        let d = evaluate_derivative([0.3, 0.0, 0.0, 0.0], &p, omega).unwrap();
        let expected = -(1.0 * omega / (0.3 * 0.3)) * 0.3 * (-0.3f64 * 0.3 / (2.0 * 0.09)).exp();
        assert!((d[1] - expected).abs() < 1e-12);
        assert!((d[1] - (-12.70)).abs() < 0.01);
    }

    #[test]
    fn derivative_rejects_non_finite_state() {
        let p = single_x_kernel(1.0, 0.3, 0.0);
        assert!(evaluate_derivative([f64::NAN, 0.0, 0.0, 0.0], &p, TAU).is_err());
    }

    #[test]
    fn zero_amplitude_trajectory_is_linear_phase() {
        let mut p = DipoleModelParams::adult_default();
        for k in p
            .kernels_x
            .iter_mut()
            .chain(&mut p.kernels_y)
            .chain(&mut p.kernels_z)
        {
            k.amplitude = 0.0;
        }
        p.deviation_fraction = 0.0;
        let rhythm = HeartRhythm {
            mean_rate: 1.25,
            rate_std: 0.0,
            seed: 7,
        };
        let fs = 200.0;
        let traj = integrate_trajectory(&p, &rhythm, 4.0, fs, 0).unwrap();
        let omega = TAU * 1.25;
        for (i, &ph) in traj.phase.iter().enumerate() {
            let expect = (PI + omega * i as f64 / fs).rem_euclid(TAU);
            let diff = (ph - expect).abs();
            let circ = diff.min(TAU - diff);
            assert!(circ < 1e-9, "sample {i}: {ph} vs {expect}");
        }
        let first = [traj.coords[[0, 0]], traj.coords[[1, 0]], traj.coords[[2, 0]]];
        for i in 0..traj.len() {
            for ax in 0..3 {
                assert!((traj.coords[[ax, i]] - first[ax]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn trajectory_is_deterministic_for_fixed_seed() {
        let p = DipoleModelParams::adult_default();
        let rhythm = HeartRhythm {
            mean_rate: 1.2,
            rate_std: 0.05,
            seed: 11,
        };
        let a = integrate_trajectory(&p, &rhythm, 5.0, 500.0, 3).unwrap();
        let b = integrate_trajectory(&p, &rhythm, 5.0, 500.0, 3).unwrap();
        assert_eq!(a.phase, b.phase);
        assert_eq!(a.coords, b.coords);
        assert_eq!(a.beat_onsets, b.beat_onsets);
    }

    #[test]
    fn beat_count_matches_mean_rate() {
        let p = DipoleModelParams::adult_default();
        let rhythm = HeartRhythm {
            mean_rate: 1.2,
            rate_std: 0.02,
            seed: 5,
        };
        let traj = integrate_trajectory(&p, &rhythm, 10.0, 1000.0, 1).unwrap();
        let expected = (10.0 * 1.2f64).round() as i64;
        let got = traj.beat_onsets.len() as i64;
        assert!(
            (got - expected).abs() <= 1,
            "got {got} beats, expected {expected} +- 1"
        );
    }

    #[test]
    fn deviation_zero_is_identity() {
        let p = DipoleModelParams::adult_default();
        let mut p0 = p.clone();
        p0.deviation_fraction = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let drawn = sample_beat_parameters(&p0, &mut rng);
        assert_eq!(drawn, p0);
    }

    #[test]
    fn deviation_monte_carlo_std() {
        // 1e4 draws of a single amplitude: sample std within 10% of
        // deviation_fraction * |alpha|.
        let p = single_x_kernel(2.0, 0.3, 1.0);
        let p = DipoleModelParams {
            deviation_fraction: 0.05,
            ..p
        };
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let draws: Vec<f64> = (0..10_000)
            .map(|_| sample_beat_parameters(&p, &mut rng).kernels_x[0].amplitude)
            .collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / (draws.len() - 1) as f64;
        let std = var.sqrt();
        let target = 0.05 * 2.0;
        assert!(
            (std - target).abs() < 0.1 * target,
            "sample std {std} vs target {target}"
        );
    }

    #[test]
    fn width_perturbation_clamped() {
        let p = DipoleModelParams {
            kernels_x: vec![GaussianKernel::new(1.0, 1e-7, 0.0).unwrap()],
            kernels_y: vec![GaussianKernel::new(0.0, 1.0, 0.0).unwrap()],
            kernels_z: vec![GaussianKernel::new(0.0, 1.0, 0.0).unwrap()],
            deviation_fraction: 0.9,
        };
        // Width 1e-7 is below the clamp, so any draw lands on the clamp when
        // the perturbation pulls it down.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let drawn = sample_beat_parameters(&p, &mut rng);
            assert!(drawn.kernels_x[0].width >= MIN_KERNEL_WIDTH);
        }
    }

    #[test]
    fn quasi_periodicity_without_deviation() {
        // Constant rate whose period is an integer number of samples:
        // consecutive beats must match sample-for-sample.
        let mut p = DipoleModelParams::adult_default();
        p.deviation_fraction = 0.0;
        let rhythm = HeartRhythm {
            mean_rate: 1.25, // 800 samples per beat at 1 kHz
            rate_std: 0.0,
            seed: 0,
        };
        let traj = integrate_trajectory(&p, &rhythm, 4.0, 1000.0, 0).unwrap();
        let period = 800usize;
        let peak = traj
            .coords
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
        for i in 0..(traj.len() - period) {
            for ax in 0..3 {
                let diff = (traj.coords[[ax, i]] - traj.coords[[ax, i + period]]).abs();
                assert!(
                    diff < 1e-6 * peak,
                    "axis {ax} sample {i}: diff {diff} vs peak {peak}"
                );
            }
        }
    }

    #[test]
    fn amplitude_scaling_is_linear() {
        let mut p = DipoleModelParams::adult_default();
        p.deviation_fraction = 0.0;
        let rhythm = HeartRhythm {
            mean_rate: 1.2,
            rate_std: 0.0,
            seed: 2,
        };
        let base = integrate_trajectory(&p, &rhythm, 3.0, 500.0, 0).unwrap();
        let c = 2.5;
        let mut scaled_params = p.clone();
        for k in &mut scaled_params.kernels_x {
            k.amplitude *= c;
        }
        let scaled = integrate_trajectory(&scaled_params, &rhythm, 3.0, 500.0, 0).unwrap();
        for i in 0..base.len() {
            let want = c * base.coords[[0, i]];
            let got = scaled.coords[[0, i]];
            assert!(
                (got - want).abs() <= 1e-9 * want.abs().max(1.0),
                "sample {i}: {got} vs {want}"
            );
            // Other axes untouched.
            assert_eq!(scaled.coords[[1, i]], base.coords[[1, i]]);
        }
    }

    #[test]
    fn unwrapped_phase_strictly_increases() {
        let p = DipoleModelParams::adult_default();
        let rhythm = HeartRhythm {
            mean_rate: 2.4,
            rate_std: 0.1,
            seed: 9,
        };
        let traj = integrate_trajectory(&p, &rhythm, 5.0, 500.0, 4).unwrap();
        let mut unwrapped = Vec::with_capacity(traj.len());
        let mut offset = 0.0;
        let mut prev = traj.phase[0];
        unwrapped.push(prev);
        for &ph in &traj.phase[1..] {
            if ph < prev {
                offset += TAU;
            }
            unwrapped.push(ph + offset);
            prev = ph;
        }
        for w in unwrapped.windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn params_json_roundtrip() {
        let p = DipoleModelParams::adult_default();
        let text = p.to_json();
        let q = DipoleModelParams::from_json(&text).unwrap();
        assert_eq!(p, q);
    }
}
