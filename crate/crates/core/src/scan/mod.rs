//! The measurement campaign layer: Larmor frequency scans running the
//! full detection protocol, lineshape fitting, motional-frequency
//! acquisition and g-factor extraction with uncertainty.

mod fit;

pub use fit::{fit_lineshape, FitReport, RabiLineshape};

use alloc::string::{String, ToString};
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::protocol::{
    detection_sequence, preparation_sequence, DetectionParams, ExecMode, PulseKind, Sequence,
    SimContext, Step, StepKind, WorldState,
};
use crate::state::SPIN_DOWN;
use crate::stats::{classify, sample_photon_count, Outcome, SeededStream};
use crate::trap::{
    eigenfrequencies_from, free_cyclotron_frequency, invariance_theorem, larmor_frequency_truth,
    Particle, ParticleSpecies, TrapArrayConfig, TrapFrequencies, ZoneRole,
};

/// Stream id reserved for the motional-frequency measurement; scan points
/// use their grid index.
pub const MOTIONAL_STREAM_ID: u64 = u64::MAX;

/// Frequency scan configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    pub start_hz: f64,
    pub stop_hz: f64,
    pub points: u32,
    pub shots_per_point: u32,
    /// Drive pulse area in radians (pi for a full flip on resonance).
    pub drive_theta: f64,
    /// Drive duration in seconds; fixes the Fourier width of the line.
    pub drive_duration_s: f64,
    pub seed: u64,
}

impl ScanConfig {
    fn validate(&self) -> Result<()> {
        if !(self.start_hz < self.stop_hz) {
            return Err(Error::ConfigError(alloc::format!(
                "scan grid needs start < stop, got {} .. {}",
                self.start_hz,
                self.stop_hz
            )));
        }
        if self.points < 3 {
            return Err(Error::ConfigError("scan needs at least 3 points".into()));
        }
        if self.shots_per_point < 1 {
            return Err(Error::ConfigError("scan needs at least 1 shot per point".into()));
        }
        if !(self.drive_theta > 0.0 && self.drive_duration_s > 0.0) {
            return Err(Error::ConfigError("drive theta and duration must be positive".into()));
        }
        Ok(())
    }

    pub fn frequency(&self, index: u32) -> f64 {
        self.start_hz
            + index as f64 * (self.stop_hz - self.start_hz) / (self.points as f64 - 1.0)
    }
}

/// One measured grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    pub frequency_hz: f64,
    pub shots: u32,
    pub bright_count: u32,
    pub bright_fraction: f64,
    pub binomial_stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub points: Vec<ScanPoint>,
    pub seed: u64,
}

/// Full experiment configuration handed to the campaign layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub ctx: SimContext,
    pub scan: ScanConfig,
    /// Relative sigma of the simulated motional-frequency measurement.
    pub motional_noise_rel: f64,
}

/// A value with a one-sigma uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub value: f64,
    pub sigma: f64,
}

/// Final report of a g-factor campaign. `g` is exactly `2 f_L / f_c` of
/// its own fields.
#[derive(Debug, Clone, PartialEq)]
pub struct GFactorReport {
    pub f_l: Measurement,
    pub f_c: Measurement,
    pub g: Measurement,
    pub seed: u64,
    pub config_digest: String,
}

/// One measurement shot as a sequence: an initializing protocol pass
/// (leaves the proton in |↑⟩), the Larmor drive in the precision zone,
/// re-preparation, and the detection pass proper.
fn shot_sequence(
    ctx: &SimContext,
    scan: &ScanConfig,
    carrier_detuning_hz: f64,
) -> Result<Sequence> {
    let precision_zone = ctx
        .trap
        .zone_with_role(ZoneRole::Precision)
        .ok_or_else(|| Error::ConfigError("no precision zone configured".into()))?;
    let prep = preparation_sequence(&ctx.trap, ctx.cool_residual_nbar)?;
    let detect = detection_sequence(&ctx.trap, &DetectionParams::default())?;
    let mut steps = Vec::new();
    steps.extend(prep.steps.iter().cloned());
    steps.extend(detect.steps.iter().cloned());
    steps.push(Step { kind: StepKind::Shuttle { particle: Particle::Proton, zone: precision_zone }, line: 0, column: 0 });
    steps.push(Step {
        kind: StepKind::Pulse {
            kind: PulseKind::Carrier,
            particle: Particle::Proton,
            theta: scan.drive_theta,
            phi: 0.0,
            detuning_hz: carrier_detuning_hz,
            duration_s: scan.drive_duration_s,
        },
        line: 0,
        column: 0,
    });
    steps.extend(prep.steps.iter().cloned());
    steps.extend(detect.steps.iter().cloned());
    Ok(Sequence { name: "measurement_shot".to_string(), steps })
}

/// Measures one grid point: the deterministic part of the shot chain runs
/// once with exact channel semantics, then `shots` independent detection
/// windows are sampled from the resulting branch probability on the
/// point's own random stream `(seed, index)`.
pub fn scan_point(cfg: &ExperimentConfig, index: u32) -> Result<ScanPoint> {
    cfg.scan.validate()?;
    if index >= cfg.scan.points {
        return Err(Error::ConfigError(alloc::format!("scan point {index} out of range")));
    }
    let f = cfg.scan.frequency(index);
    let f_l_truth = larmor_frequency_truth(&cfg.ctx.proton, cfg.ctx.trap.b_field)?;
    let seq = shot_sequence(&cfg.ctx, &cfg.scan, f - f_l_truth)?;
    let world = WorldState::prepared(&cfg.ctx, SPIN_DOWN)?;
    let (_, log) = crate::protocol::execute(&seq, &world, &cfg.ctx, ExecMode::Exact)?;
    let p_bright = log
        .iter()
        .rev()
        .find_map(|e| e.detect.as_ref().map(|d| d.branch_probability))
        .ok_or_else(|| Error::ConfigError("shot chain produced no detection".into()))?;

    let mut rng = SeededStream::new(cfg.scan.seed, index as u64);
    let shots = cfg.scan.shots_per_point;
    let mut bright_count = 0u32;
    for _ in 0..shots {
        let branch_bright = rng.next_f64() < p_bright;
        let outcome = if cfg.ctx.photon_sampling {
            let count = sample_photon_count(branch_bright, &cfg.ctx.fluorescence, &mut rng);
            classify(count, &cfg.ctx.fluorescence)
        } else {
            rng.next_u64(); // fixed two-draw budget per shot
            if branch_bright {
                Outcome::Bright
            } else {
                Outcome::Dark
            }
        };
        if outcome == Outcome::Bright {
            bright_count += 1;
        }
    }
    let fraction = bright_count as f64 / shots as f64;
    Ok(ScanPoint {
        frequency_hz: f,
        shots,
        bright_count,
        bright_fraction: fraction,
        binomial_stderr: (fraction * (1.0 - fraction) / shots as f64).sqrt(),
    })
}

/// Runs the whole frequency scan serially. Points are independent; callers
/// that parallelize via [`scan_point`] get byte-identical results.
pub fn larmor_scan(cfg: &ExperimentConfig) -> Result<ScanResult> {
    cfg.scan.validate()?;
    let mut points = Vec::with_capacity(cfg.scan.points as usize);
    for i in 0..cfg.scan.points {
        points.push(scan_point(cfg, i)?);
    }
    Ok(ScanResult { points, seed: cfg.scan.seed })
}

/// Simulated motional-frequency acquisition: the ideal-trap
/// eigenfrequencies of the configured precision zone, perturbed
/// multiplicatively by N(1, noise) per component.
pub fn measure_trap_frequencies(
    trap: &TrapArrayConfig,
    species: &ParticleSpecies,
    noise_rel: f64,
    rng: &mut SeededStream,
) -> Result<(TrapFrequencies, [f64; 3])> {
    if !(noise_rel >= 0.0) {
        return Err(Error::ConfigError("motional noise sigma must be >= 0".into()));
    }
    let fc = free_cyclotron_frequency(species, trap.b_field)?;
    let precision_zone = trap
        .zone_with_role(ZoneRole::Precision)
        .ok_or_else(|| Error::ConfigError("no precision zone configured".into()))?;
    let fz = trap.axial_frequency(precision_zone, Particle::Proton)?;
    let truth = eigenfrequencies_from(fc, fz)?;
    let perturb = |f: f64, rng: &mut SeededStream| {
        if noise_rel == 0.0 {
            f
        } else {
            f * (1.0 + noise_rel * rng.next_gaussian())
        }
    };
    let measured = TrapFrequencies::new(
        perturb(truth.f_plus, rng),
        perturb(truth.f_z, rng),
        perturb(truth.f_minus, rng),
    )?;
    let sigmas = [
        noise_rel * measured.f_plus.abs(),
        noise_rel * measured.f_z.abs(),
        noise_rel * measured.f_minus.abs(),
    ];
    Ok((measured, sigmas))
}

/// Free cyclotron frequency via the invariance theorem, with first-order
/// error propagation from the per-eigenfrequency sigmas.
pub fn cyclotron_from_measured(
    tf: &TrapFrequencies,
    sigmas: &[f64; 3],
) -> Result<Measurement> {
    let fc = invariance_theorem(tf)?;
    let sum_sq = (tf.f_plus * sigmas[0]).powi(2)
        + (tf.f_z * sigmas[1]).powi(2)
        + (tf.f_minus * sigmas[2]).powi(2);
    Ok(Measurement { value: fc, sigma: sum_sq.sqrt() / fc })
}

/// g = 2 f_L / f_c with standard uncertainty propagation.
pub fn g_factor(f_l: Measurement, f_c: Measurement, seed: u64, config_digest: &str) -> Result<GFactorReport> {
    if !(f_c.value > 0.0) || !(f_l.value > 0.0) {
        return Err(Error::NonPositiveFrequency);
    }
    let g = 2.0 * f_l.value / f_c.value;
    let rel = ((f_l.sigma / f_l.value).powi(2) + (f_c.sigma / f_c.value).powi(2)).sqrt();
    Ok(GFactorReport {
        f_l,
        f_c,
        g: Measurement { value: g, sigma: g * rel },
        seed,
        config_digest: config_digest.to_string(),
    })
}

/// The full campaign: Larmor scan, lineshape fit, motional-frequency
/// acquisition, invariance theorem, g-factor with uncertainty.
pub fn run_g_measurement(
    cfg: &ExperimentConfig,
    config_digest: &str,
) -> Result<(GFactorReport, ScanResult, FitReport)> {
    let scan = larmor_scan(cfg)?;
    let model = RabiLineshape { duration_s: cfg.scan.drive_duration_s };
    let fit = fit_lineshape(&scan, &model)?;
    if !fit.converged {
        return Err(Error::FitDiverged("lineshape fit did not converge".into()));
    }
    let mut rng = SeededStream::new(cfg.scan.seed, MOTIONAL_STREAM_ID);
    let (tf, sigmas) =
        measure_trap_frequencies(&cfg.ctx.trap, &cfg.ctx.proton, cfg.motional_noise_rel, &mut rng)?;
    let f_c = cyclotron_from_measured(&tf, &sigmas)?;
    let report = g_factor(fit.f_center(), f_c, cfg.scan.seed, config_digest)?;
    Ok((report, scan, fit))
}
