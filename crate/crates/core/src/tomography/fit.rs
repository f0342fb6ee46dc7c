use std::f64::consts::PI;

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dynamics::FidConfig;
use crate::{Error, Result};

const MAX_ITERATIONS: usize = 200;
const PEAK_OVER_FLOOR: f64 = 3.0;

/// Fitted damped cosine `A·e^{−t/τ}·cos(ωt + φ)`.
///
/// The fit itself runs on the in-phase/quadrature pair
/// `a = A cos φ`, `b = A sin φ`, so those carry the primary standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidFitResult {
    pub amplitude: f64,
    /// rad/s.
    pub frequency: f64,
    pub phase: f64,
    /// s.
    pub decay_time: f64,
    pub residual_rms: f64,
    pub in_phase: f64,
    pub quadrature: f64,
    pub in_phase_std: f64,
    pub quadrature_std: f64,
    /// Covariance of `in_phase` and `quadrature`.
    pub iq_covariance: f64,
    pub amplitude_std: f64,
    pub frequency_std: f64,
    pub decay_time_std: f64,
    pub iterations: usize,
}

/// Fits a free-induction decay sampled at `f.sample_rate`, starting at t = 0.
///
/// The frequency is seeded from the peak of a zero-padded magnitude spectrum
/// (parabolic interpolation), the decay rate from a coarse linear scan, then
/// all four parameters are refined by Levenberg–Marquardt.
pub fn fit_fid(series: &[f64], f: &FidConfig) -> Result<FidFitResult> {
    f.validate()?;
    let n = series.len();
    if n < FidConfig::MIN_SAMPLES {
        return Err(Error::Domain(format!(
            "FID fit needs at least {} samples, got {n}",
            FidConfig::MIN_SAMPLES
        )));
    }
    if series.iter().any(|y| !y.is_finite()) {
        return Err(Error::Domain(
            "FID series contains non-finite samples".into(),
        ));
    }
    let times: Vec<f64> = (0..n).map(|i| i as f64 / f.sample_rate).collect();
    let window = n as f64 / f.sample_rate;

    let omega0 = spectral_peak(series, f.sample_rate)?;
    if omega0 * window < 4.0 * PI {
        return Err(Error::FitFailure(format!(
            "peak at {omega0:.4} rad/s spans fewer than two periods of the {window} s window"
        )));
    }

    let (r0, a0, b0) = seed_decay(series, &times, omega0, window);
    let mut p = Vector4::new(a0, b0, omega0, r0);
    let scale: f64 = series.iter().map(|y| y * y).sum();
    let mut cost = cost_at(series, &times, &p);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        if cost <= 1e-28 * scale {
            converged = true;
            break;
        }
        let (h, g) = normal_equations(series, &times, &p);
        let mut damped = h;
        for i in 0..4 {
            damped[(i, i)] += lambda * h[(i, i)].max(f64::MIN_POSITIVE);
        }
        let Some(step) = damped.lu().solve(&g) else {
            lambda *= 4.0;
            continue;
        };
        let trial = p + step;
        let trial_cost = cost_at(series, &times, &trial);
        if trial_cost.is_finite() && trial_cost < cost {
            let gain = cost - trial_cost;
            p = trial;
            cost = trial_cost;
            lambda = (lambda / 3.0).max(1e-12);
            if gain <= 1e-12 * cost.max(1e-300) || step_is_small(&step, &p) {
                converged = true;
                break;
            }
        } else {
            lambda *= 4.0;
            if lambda > 1e10 {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        return Err(Error::FitFailure(format!(
            "Levenberg–Marquardt did not converge in {MAX_ITERATIONS} iterations"
        )));
    }

    let (mut a, mut b, mut omega, rate) = (p[0], p[1], p[2], p[3]);
    if !(rate > 0.0) {
        return Err(Error::FitFailure(format!(
            "fitted decay rate {rate} is not positive"
        )));
    }
    let (h, _) = normal_equations(series, &times, &p);
    let inv = h.try_inverse().ok_or_else(|| {
        Error::FitFailure("singular normal matrix at the fitted parameters".into())
    })?;
    let dof = (n - 4) as f64;
    let cov = inv * (cost / dof);
    let mut cov_ab = cov[(0, 1)];
    if omega < 0.0 {
        omega = -omega;
        b = -b;
        cov_ab = -cov_ab;
    }
    if a == 0.0 {
        a = 0.0; // normalise -0.0 so the phase is well defined
    }
    let var = |i: usize| cov[(i, i)].max(0.0);
    let amplitude = a.hypot(b);
    let amplitude_std = if amplitude > 0.0 {
        ((a * a * var(0) + b * b * var(1) + 2.0 * a * b * cov_ab) / (amplitude * amplitude))
            .max(0.0)
            .sqrt()
    } else {
        (var(0) + var(1)).sqrt()
    };
    Ok(FidFitResult {
        amplitude,
        frequency: omega,
        phase: b.atan2(a),
        decay_time: 1.0 / rate,
        residual_rms: (cost / n as f64).sqrt(),
        in_phase: a,
        quadrature: b,
        in_phase_std: var(0).sqrt(),
        quadrature_std: var(1).sqrt(),
        iq_covariance: cov_ab,
        amplitude_std,
        frequency_std: var(2).sqrt(),
        decay_time_std: var(3).sqrt() / (rate * rate),
        iterations,
    })
}

/// Interpolated angular frequency of the strongest non-DC spectral line.
fn spectral_peak(series: &[f64], sample_rate: f64) -> Result<f64> {
    let n_fft = (4 * series.len()).next_power_of_two();
    let mut buf: Vec<Complex64> = series.iter().map(|&y| Complex64::new(y, 0.0)).collect();
    buf.resize(n_fft, Complex64::new(0.0, 0.0));
    FftPlanner::<f64>::new()
        .plan_fft_forward(n_fft)
        .process(&mut buf);
    let mags: Vec<f64> = buf[..=n_fft / 2].iter().map(|z| z.norm()).collect();

    let mut sorted = mags.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    // Expected maximum of a Rayleigh-distributed spectrum with this median.
    let floor = median * ((mags.len() as f64).ln() / 2f64.ln()).sqrt();

    let (k, &peak) = mags[1..mags.len() - 1]
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(y.1))
        .map(|(i, m)| (i + 1, m))
        .expect("spectrum has interior bins");
    if !(peak > PEAK_OVER_FLOOR * floor) {
        return Err(Error::NoSpectralPeak { peak, floor });
    }
    let (l, c, r) = (mags[k - 1], mags[k], mags[k + 1]);
    let denom = l - 2.0 * c + r;
    let delta = if denom != 0.0 {
        (0.5 * (l - r) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    Ok(2.0 * PI * (k as f64 + delta) * sample_rate / n_fft as f64)
}

/// Best decay rate on a logarithmic grid, with the matching linear
/// in-phase/quadrature amplitudes.
fn seed_decay(series: &[f64], times: &[f64], omega: f64, window: f64) -> (f64, f64, f64) {
    let trig: Vec<(f64, f64)> = times.iter().map(|&t| (omega * t).sin_cos()).collect();
    let dt = if times.len() > 1 {
        times[1] - times[0]
    } else {
        0.0
    };
    let syy: f64 = series.iter().map(|y| y * y).sum();
    let mut best = (f64::INFINITY, 1.0 / window, 0.0, 0.0);
    for j in 0..=30 {
        let rate = 0.01 / window * 10f64.powf(j as f64 * 4.0 / 30.0);
        let q = (-rate * dt).exp();
        let mut e = 1.0;
        let (mut scc, mut sss, mut scs, mut syc, mut sys) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&(s, c), &y) in trig.iter().zip(series) {
            let (u, v) = (e * c, -e * s);
            scc += u * u;
            sss += v * v;
            scs += u * v;
            syc += y * u;
            sys += y * v;
            e *= q;
        }
        let det = scc * sss - scs * scs;
        if det <= 0.0 {
            continue;
        }
        let a = (syc * sss - sys * scs) / det;
        let b = (sys * scc - syc * scs) / det;
        // Residual of the linear least-squares solution.
        let cost = syy - a * syc - b * sys;
        if cost < best.0 {
            best = (cost, rate, a, b);
        }
    }
    (best.1, best.2, best.3)
}

fn model(p: &Vector4<f64>, t: f64) -> f64 {
    let (s, c) = (p[2] * t).sin_cos();
    (-p[3] * t).exp() * (p[0] * c - p[1] * s)
}

fn cost_at(series: &[f64], times: &[f64], p: &Vector4<f64>) -> f64 {
    times
        .iter()
        .zip(series)
        .map(|(&t, &y)| (y - model(p, t)).powi(2))
        .sum()
}

/// `JᵀJ` and `Jᵀ(y − m)` for the Jacobian of the model.
fn normal_equations(
    series: &[f64],
    times: &[f64],
    p: &Vector4<f64>,
) -> (Matrix4<f64>, Vector4<f64>) {
    let mut h = Matrix4::zeros();
    let mut g = Vector4::zeros();
    for (&t, &y) in times.iter().zip(series) {
        let e = (-p[3] * t).exp();
        let (s, c) = (p[2] * t).sin_cos();
        let m = e * (p[0] * c - p[1] * s);
        let jac = Vector4::new(e * c, -e * s, -e * t * (p[0] * s + p[1] * c), -t * m);
        h += jac * jac.transpose();
        g += jac * (y - m);
    }
    (h, g)
}

fn step_is_small(step: &Vector4<f64>, p: &Vector4<f64>) -> bool {
    let amp = p[0].hypot(p[1]);
    let tol = |x: f64, floor: f64| 1e-13 * (x.abs() + floor);
    step[0].abs() <= tol(p[0], amp)
        && step[1].abs() <= tol(p[1], amp)
        && step[2].abs() <= tol(p[2], 0.0)
        && step[3].abs() <= tol(p[3], 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth(a: f64, omega: f64, tau: f64, phi: f64, f: &FidConfig) -> Vec<f64> {
        f.times()
            .iter()
            .map(|&t| a * (-t / tau).exp() * (omega * t + phi).cos())
            .collect()
    }

    #[test]
    fn noiseless_round_trip() {
        let f = FidConfig::new(4000.0, 0.25, 1.0).unwrap();
        for &(omega, tau, phi) in &[(2.0 * PI * 300.0, 0.05, 0.3), (2.0 * PI * 137.0, 0.2, -2.5)] {
            let fit = fit_fid(&synth(1.0, omega, tau, phi, &f), &f).unwrap();
            assert!((fit.amplitude - 1.0).abs() < 1e-6, "{fit:?}");
            assert!((fit.frequency - omega).abs() / omega < 1e-6);
            assert!((fit.decay_time - tau).abs() / tau < 1e-6);
            assert!((fit.phase - phi).abs() < 1e-6);
            assert!(fit.residual_rms < 1e-9);
        }
    }

    #[test]
    fn pure_noise_is_rejected() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let f = FidConfig::new(4000.0, 0.25, 1.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let series: Vec<f64> = (0..f.n_samples())
            .map(|_| normal.sample(&mut rng))
            .collect();
        assert!(matches!(
            fit_fid(&series, &f),
            Err(Error::NoSpectralPeak { .. })
        ));
        let zeros = vec![0.0; f.n_samples()];
        assert!(matches!(
            fit_fid(&zeros, &f),
            Err(Error::NoSpectralPeak { .. })
        ));
    }

    #[test]
    fn too_few_periods_or_samples() {
        let f = FidConfig::new(4000.0, 0.25, 1.0).unwrap();
        let slow = synth(1.0, 2.0 * PI * 3.0, 1.0, 0.0, &f);
        assert!(matches!(fit_fid(&slow, &f), Err(Error::FitFailure(_))));
        assert!(matches!(fit_fid(&slow[..8], &f), Err(Error::Domain(_))));
    }
}
