//! Damped weighted least-squares fit of the Rabi resonance lineshape.
//!
//! Model: p(f) = B + A * P(Omega, 2 pi (f - f0), t) with P the closed-form
//! two-level transition probability and t the fixed drive duration. The
//! ideal simulation chain generates exactly this shape, so fit correctness
//! is testable to machine precision against model-generated data.

use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use super::{Measurement, ScanResult};
use crate::dynamics::rabi_probability;
use crate::error::{Error, Result};

/// The fixed-duration Rabi lineshape model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RabiLineshape {
    /// Drive duration in seconds; sets the Fourier width of the line.
    pub duration_s: f64,
}

/// Parameter order used throughout the fit.
const P_CENTER: usize = 0;
const P_RABI: usize = 1;
const P_AMPLITUDE: usize = 2;
const P_BASELINE: usize = 3;
const NPAR: usize = 4;

impl RabiLineshape {
    /// Model value at `f_hz` for parameters
    /// `[f_center_hz, rabi_hz, amplitude, baseline]`.
    pub fn value(&self, f_hz: f64, x: &[f64; NPAR]) -> f64 {
        let omega = core::f64::consts::TAU * x[P_RABI];
        let delta = core::f64::consts::TAU * (f_hz - x[P_CENTER]);
        x[P_BASELINE] + x[P_AMPLITUDE] * rabi_probability(omega, delta, self.duration_s)
    }

    /// Analytic gradient of the model with respect to the parameters.
    pub fn gradient(&self, f_hz: f64, x: &[f64; NPAR]) -> [f64; NPAR] {
        let t = self.duration_s;
        let omega = core::f64::consts::TAU * x[P_RABI];
        let delta = core::f64::consts::TAU * (f_hz - x[P_CENTER]);
        let w2 = omega * omega + delta * delta;
        if w2 == 0.0 {
            return [0.0, 0.0, 0.0, 1.0];
        }
        let w = w2.sqrt();
        let (s, c) = (0.5 * w * t).sin_cos();
        let p = omega * omega / w2 * s * s;
        // d/dW of (Omega^2 / W^2) sin^2(W t / 2), Omega held fixed
        let dp_dw = omega * omega * (-2.0 * s * s / (w2 * w) + s * c * t / w2);
        let dp_domega = 2.0 * omega * s * s / w2 + omega / w * dp_dw;
        let dp_ddelta = delta / w * dp_dw;
        [
            -core::f64::consts::TAU * x[P_AMPLITUDE] * dp_ddelta,
            core::f64::consts::TAU * x[P_AMPLITUDE] * dp_domega,
            p,
            1.0,
        ]
    }
}

/// Converged fit parameters with curvature uncertainties.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub f_center_hz: f64,
    pub rabi_hz: f64,
    pub amplitude: f64,
    pub baseline: f64,
    pub sigma_f_center_hz: f64,
    pub sigma_rabi_hz: f64,
    pub sigma_amplitude: f64,
    pub sigma_baseline: f64,
    pub chi2_reduced: f64,
    pub converged: bool,
    pub iterations: u32,
}

impl FitReport {
    pub fn f_center(&self) -> Measurement {
        Measurement { value: self.f_center_hz, sigma: self.sigma_f_center_hz }
    }
}

/// Solves the 4x4 system M x = b by Gaussian elimination with partial
/// pivoting. Returns None when M is numerically singular.
fn solve4(m: &[[f64; NPAR]; NPAR], b: &[f64; NPAR]) -> Option<[f64; NPAR]> {
    let mut a = [[0.0f64; NPAR + 1]; NPAR];
    for i in 0..NPAR {
        a[i][..NPAR].copy_from_slice(&m[i]);
        a[i][NPAR] = b[i];
    }
    for col in 0..NPAR {
        let pivot_row = (col..NPAR)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[pivot_row][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot_row);
        for row in (col + 1)..NPAR {
            let factor = a[row][col] / a[col][col];
            for k in col..=NPAR {
                a[row][k] -= factor * a[col][k];
            }
        }
    }
    let mut x = [0.0f64; NPAR];
    for row in (0..NPAR).rev() {
        let mut acc = a[row][NPAR];
        for k in (row + 1)..NPAR {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

/// Inverts a symmetric positive-definite 4x4 matrix column by column.
fn invert4(m: &[[f64; NPAR]; NPAR]) -> Option<[[f64; NPAR]; NPAR]> {
    let mut inv = [[0.0f64; NPAR]; NPAR];
    for col in 0..NPAR {
        let mut e = [0.0f64; NPAR];
        e[col] = 1.0;
        let x = solve4(m, &e)?;
        for row in 0..NPAR {
            inv[row][col] = x[row];
        }
    }
    Some(inv)
}

struct WeightedData {
    f: Vec<f64>,
    y: Vec<f64>,
    weight: Vec<f64>,
}

/// Inverse-variance weights from a continuity-corrected binomial variance
/// estimate, so empty and full points keep a finite weight.
fn weighted_data(sr: &ScanResult) -> Result<WeightedData> {
    let usable: Vec<_> = sr.points.iter().filter(|p| p.shots > 0).collect();
    if usable.len() < NPAR {
        return Err(Error::DegenerateData);
    }
    let first = usable[0].bright_fraction;
    if usable.iter().all(|p| p.bright_fraction == first) {
        return Err(Error::DegenerateData);
    }
    let mut data = WeightedData {
        f: Vec::with_capacity(usable.len()),
        y: Vec::with_capacity(usable.len()),
        weight: Vec::with_capacity(usable.len()),
    };
    for p in usable {
        let n = p.shots as f64;
        let corrected = (p.bright_fraction * n + 0.5) / (n + 1.0);
        let variance = corrected * (1.0 - corrected) / n;
        data.f.push(p.frequency_hz);
        data.y.push(p.bright_fraction);
        data.weight.push(1.0 / variance);
    }
    Ok(data)
}

/// Weighted Levenberg-Marquardt fit of the Rabi lineshape.
///
/// Deterministic data-driven initialization (f0 at the argmax point,
/// A = max - min, B = min, Omega = pi / t), multiplicative damping
/// adaptation (x10 on rejection, /10 on acceptance), convergence at
/// 1e-10 relative step or 200 iterations. Parameter sigmas come from the
/// curvature at the optimum.
pub fn fit_lineshape(sr: &ScanResult, model: &RabiLineshape) -> Result<FitReport> {
    if !(model.duration_s > 0.0) {
        return Err(Error::ConfigError("lineshape duration must be positive".into()));
    }
    let data = weighted_data(sr)?;
    let n = data.f.len();

    // work in frequencies relative to the grid center for conditioning
    let f_ref = 0.5 * (data.f[0] + data.f[n - 1]);
    let f: Vec<f64> = data.f.iter().map(|v| v - f_ref).collect();
    let span = (data.f[n - 1] - data.f[0]).abs().max(1.0 / model.duration_s);

    let (argmax, y_max) = data
        .y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, v)| (i, *v))
        .unwrap();
    let y_min = data.y.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut x = [
        f[argmax],
        1.0 / (2.0 * model.duration_s), // Omega = pi / t in angular units
        y_max - y_min,
        y_min,
    ];
    // step-size reference scales per parameter
    let scale = [span, x[P_RABI], 1.0, 1.0];

    let shifted = RabiLineshape { duration_s: model.duration_s };
    let chi2_of = |x: &[f64; NPAR]| -> f64 {
        let mut acc = 0.0;
        for i in 0..n {
            let r = data.y[i] - shifted.value(f[i], x);
            acc += data.weight[i] * r * r;
        }
        acc
    };

    let normal_system = |x: &[f64; NPAR]| {
        let mut jtj = [[0.0f64; NPAR]; NPAR];
        let mut jtr = [0.0f64; NPAR];
        for i in 0..n {
            let g = shifted.gradient(f[i], x);
            let r = data.y[i] - shifted.value(f[i], x);
            let w = data.weight[i];
            for a in 0..NPAR {
                jtr[a] += w * g[a] * r;
                for b in a..NPAR {
                    jtj[a][b] += w * g[a] * g[b];
                }
            }
        }
        for a in 0..NPAR {
            for b in 0..a {
                jtj[a][b] = jtj[b][a];
            }
        }
        (jtj, jtr)
    };

    let mut chi2 = chi2_of(&x);
    if !chi2.is_finite() {
        return Err(Error::FitDiverged("initial residual is not finite".into()));
    }
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0u32;
    while iterations < 200 {
        iterations += 1;
        let (jtj, jtr) = normal_system(&x);
        let mut damped = jtj;
        for k in 0..NPAR {
            let d = jtj[k][k];
            damped[k][k] = d + lambda * d.max(1e-30);
        }
        let Some(step) = solve4(&damped, &jtr) else {
            lambda *= 10.0;
            if lambda > 1e18 {
                return Err(Error::FitDiverged("normal equations stay singular".into()));
            }
            continue;
        };
        let mut trial = x;
        for k in 0..NPAR {
            trial[k] += step[k];
        }
        let trial_chi2 = chi2_of(&trial);
        if trial_chi2.is_finite() && trial_chi2 <= chi2 {
            let small = (0..NPAR)
                .all(|k| step[k].abs() <= 1e-10 * (x[k].abs() + 1e-3 * scale[k]));
            x = trial;
            chi2 = trial_chi2;
            lambda = (lambda / 10.0).max(1e-12);
            if small {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e18 {
                // stuck against numerical noise: accept the current optimum
                converged = true;
                break;
            }
        }
    }

    let (jtj, _) = normal_system(&x);
    let dof = (n as i64 - NPAR as i64).max(1) as f64;
    let chi2_reduced = chi2 / dof;
    let sigmas = match invert4(&jtj) {
        Some(cov) => [
            cov[0][0].max(0.0).sqrt(),
            cov[1][1].max(0.0).sqrt(),
            cov[2][2].max(0.0).sqrt(),
            cov[3][3].max(0.0).sqrt(),
        ],
        None => {
            converged = false;
            [f64::INFINITY; NPAR]
        }
    };

    Ok(FitReport {
        f_center_hz: f_ref + x[P_CENTER],
        rabi_hz: x[P_RABI],
        amplitude: x[P_AMPLITUDE],
        baseline: x[P_BASELINE],
        sigma_f_center_hz: sigmas[P_CENTER],
        sigma_rabi_hz: sigmas[P_RABI],
        sigma_amplitude: sigmas[P_AMPLITUDE],
        sigma_baseline: sigmas[P_BASELINE],
        chi2_reduced,
        converged,
        iterations,
    })
}
