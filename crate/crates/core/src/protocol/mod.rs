//! Multi-zone world model and protocol state machine.
//!
//! Parses and validates sequence scripts, enforces the zone rules of the
//! trap array, and executes the spin-detection protocol over the quantum
//! core: rf sideband mapping of the proton spin onto its motion, the
//! double-well motional exchange, Raman back-mapping onto the coolant ion
//! and threshold fluorescence detection.

mod parse;

pub use parse::{parse_sequence, ParseError};

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::dynamics::{carrier_pulse, exchange, sideband_pulse, ExchangeParams, PulseParams, Sideband};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::state::{
    make_pure_state, make_thermal_mode, population, tensor, BasisLabel, CompositeState,
    RegisterSpec, SPIN_UP,
};
use crate::stats::{classify, poisson_pmf_table, sample_photon_count, FluorescenceParams, Outcome, SeededStream};
use crate::trap::{apply_shuttle_heating, exchange_rate, Particle, TrapArrayConfig, ZoneId, ZoneRole};
use num_complex::Complex64;
#[cfg(not(feature = "std"))]
use num_traits::Float;

pub const PROTON_SPIN: &str = "p_spin";
pub const PROTON_MODE: &str = "p_mode";
pub const COOLANT_SPIN: &str = "be_spin";
pub const COOLANT_MODE: &str = "be_mode";

pub fn spin_label(p: Particle) -> &'static str {
    match p {
        Particle::Proton => PROTON_SPIN,
        Particle::Coolant => COOLANT_SPIN,
    }
}

pub fn mode_label(p: Particle) -> &'static str {
    match p {
        Particle::Proton => PROTON_MODE,
        Particle::Coolant => COOLANT_MODE,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseKind {
    Carrier,
    BlueSideband,
    RedSideband,
    RamanBlueSideband,
    RamanRedSideband,
}

impl PulseKind {
    pub fn tag(&self) -> &'static str {
        match self {
            PulseKind::Carrier => "carrier",
            PulseKind::BlueSideband => "bsb",
            PulseKind::RedSideband => "rsb",
            PulseKind::RamanBlueSideband => "raman_bsb",
            PulseKind::RamanRedSideband => "raman_rsb",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "carrier" => Some(PulseKind::Carrier),
            "bsb" => Some(PulseKind::BlueSideband),
            "rsb" => Some(PulseKind::RedSideband),
            "raman_bsb" => Some(PulseKind::RamanBlueSideband),
            "raman_rsb" => Some(PulseKind::RamanRedSideband),
            _ => None,
        }
    }
}

/// Exchange pulse given either as a beam-splitter angle or as a hold time
/// (converted through the configured coupling rate at execution).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExchangeSpec {
    Theta(f64),
    Duration(f64),
}

/// One protocol step. Numeric fields keep the script-level units
/// (detunings in Hz, durations in seconds).
#[derive(Debug, Clone, PartialEq)]
pub enum StepKind {
    Shuttle { particle: Particle, zone: ZoneId },
    Pulse {
        kind: PulseKind,
        particle: Particle,
        theta: f64,
        phi: f64,
        detuning_hz: f64,
        duration_s: f64,
    },
    Exchange(ExchangeSpec),
    Pump { particle: Particle },
    Cool { nbar: f64 },
    Detect { particle: Particle },
}

#[derive(Debug, Clone)]
pub struct Step {
    pub kind: StepKind,
    /// Source position for diagnostics (1-based; 0 for built sequences).
    pub line: u32,
    pub column: u32,
}

/// Steps compare by what they do; source positions are diagnostics only
/// (comments and blank lines shift them across print/parse round trips).
impl PartialEq for Step {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl Step {
    fn built(kind: StepKind) -> Self {
        Step { kind, line: 0, column: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub name: String,
    pub steps: Vec<Step>,
}

/// A zone-rule violation found by [`validate`]; violations are data, not
/// errors.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub step_index: usize,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step {}: {}", self.step_index, self.message)
    }
}

/// Everything the executor needs besides the world itself.
#[derive(Debug, Clone, PartialEq)]
pub struct SimContext {
    pub trap: TrapArrayConfig,
    pub proton: crate::trap::ParticleSpecies,
    pub coolant: crate::trap::ParticleSpecies,
    pub fluorescence: FluorescenceParams,
    /// Coolant spin index whose fluorescence branch classifies as Bright.
    /// The default (|↓⟩) makes the branch populated by a proton initially
    /// in |↓⟩ the bright one.
    pub bright_spin: usize,
    /// When false, Detect skips the photon stage and reports the spin
    /// branch directly (projective readout).
    pub photon_sampling: bool,
    /// Fock truncation of both axial modes.
    pub n_max: usize,
    /// Residual thermal occupation after sympathetic cooling.
    pub cool_residual_nbar: f64,
}

impl SimContext {
    pub fn validate(&self) -> Result<()> {
        self.trap.validate()?;
        FluorescenceParams::new(
            self.fluorescence.lambda_bright,
            self.fluorescence.lambda_dark,
            self.fluorescence.threshold,
        )?;
        if self.bright_spin > 1 {
            return Err(Error::ConfigError("bright_spin must be 0 (down) or 1 (up)".into()));
        }
        if self.n_max < 1 {
            return Err(Error::ConfigError("n_max must be >= 1".into()));
        }
        if !(self.cool_residual_nbar >= 0.0) {
            return Err(Error::ConfigError("cooling residual nbar must be >= 0".into()));
        }
        Ok(())
    }

    /// Coulomb coupling rate of the configured double well, rad/s.
    pub fn exchange_coupling(&self) -> Result<f64> {
        let coupling_zone = self
            .trap
            .zone_with_role(ZoneRole::Coupling)
            .ok_or_else(|| Error::ConfigError("no coupling zone configured".into()))?;
        let f_common = self.trap.axial_frequency(coupling_zone, Particle::Proton)?;
        exchange_rate(&self.proton, &self.coolant, self.trap.well_separation_m, f_common)
    }
}

/// Where the two particles currently sit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Locations {
    pub proton: ZoneId,
    pub coolant: ZoneId,
}

impl Locations {
    pub fn get(&self, p: Particle) -> ZoneId {
        match p {
            Particle::Proton => self.proton,
            Particle::Coolant => self.coolant,
        }
    }

    fn set(&mut self, p: Particle, zone: ZoneId) {
        match p {
            Particle::Proton => self.proton = zone,
            Particle::Coolant => self.coolant = zone,
        }
    }
}

/// Detection data attached to an executed Detect step.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectEvent {
    /// Population of the bright-mapped coolant spin branch just before
    /// the measurement (the exact channel probability).
    pub branch_probability: f64,
    /// Sampled photon count (None in exact mode or projective readout).
    pub count: Option<u32>,
    /// Classified outcome (None in exact mode).
    pub outcome: Option<Outcome>,
}

/// One executed step with its resolved parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub index: usize,
    pub step: StepKind,
    pub detect: Option<DetectEvent>,
}

pub type EventLog = Vec<Event>;

/// How Detect steps are resolved during execution.
pub enum ExecMode<'a> {
    /// Sample photon counts from the given stream and collapse the state
    /// through the generalized measurement consistent with the count.
    Sampled(&'a mut SeededStream),
    /// No sampling: record exact branch probabilities and apply the
    /// non-selective (outcome-averaged) measurement map.
    Exact,
}

/// The world: joint quantum state, particle locations, executed-step log.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub quantum: CompositeState,
    pub locations: Locations,
    pub step_log: EventLog,
}

impl WorldState {
    /// Canonical prepared world: proton spin at `proton_spin`, both axial
    /// modes at the cooling residual, coolant pumped to |↑⟩; proton in the
    /// precision zone, coolant in the cooling/detection zone.
    pub fn prepared(ctx: &SimContext, proton_spin: usize) -> Result<WorldState> {
        ctx.validate()?;
        let p_spin = make_pure_state(
            vec![RegisterSpec::spin(PROTON_SPIN)],
            &BasisLabel::new().with(PROTON_SPIN, proton_spin),
        )?;
        let p_mode = make_thermal_mode(PROTON_MODE, ctx.cool_residual_nbar, ctx.n_max)?;
        let be_spin = make_pure_state(
            vec![RegisterSpec::spin(COOLANT_SPIN)],
            &BasisLabel::new().with(COOLANT_SPIN, SPIN_UP),
        )?;
        let be_mode = make_thermal_mode(COOLANT_MODE, ctx.cool_residual_nbar, ctx.n_max)?;
        let quantum = tensor(&tensor(&p_spin, &p_mode)?, &tensor(&be_spin, &be_mode)?)?;
        let locations = Locations {
            proton: ctx
                .trap
                .zone_with_role(ZoneRole::Precision)
                .ok_or_else(|| Error::ConfigError("no precision zone configured".into()))?,
            coolant: ctx
                .trap
                .zone_with_role(ZoneRole::CoolingDetection)
                .ok_or_else(|| Error::ConfigError("no cooling/detection zone configured".into()))?,
        };
        Ok(WorldState { quantum, locations, step_log: Vec::new() })
    }
}

/// Static zone-rule check for one step; `None` means the step is allowed.
fn zone_rule(kind: &StepKind, loc: &Locations, cfg: &TrapArrayConfig) -> Option<String> {
    let role = |z: ZoneId| cfg.zone_role(z);
    match kind {
        StepKind::Shuttle { particle, zone } => {
            let other = match particle {
                Particle::Proton => loc.coolant,
                Particle::Coolant => loc.proton,
            };
            if *zone == other && role(*zone) != Some(ZoneRole::Coupling) {
                return Some(alloc::format!(
                    "shuttle would co-locate both particles in zone {zone}, which is not the coupling zone"
                ));
            }
            None
        }
        StepKind::Pulse { kind, particle, theta, duration_s, .. } => {
            if !(*theta >= 0.0) {
                return Some("pulse angle must be >= 0".to_string());
            }
            if !(*duration_s > 0.0) {
                return Some("pulse duration must be positive".to_string());
            }
            let here = role(loc.get(*particle));
            match kind {
                PulseKind::Carrier => match particle {
                    Particle::Proton if here != Some(ZoneRole::Precision) => Some(
                        "carrier drive on the proton requires the precision zone".to_string(),
                    ),
                    Particle::Coolant if here != Some(ZoneRole::CoolingDetection) => Some(
                        "carrier drive on the coolant requires the cooling/detection zone"
                            .to_string(),
                    ),
                    _ => None,
                },
                PulseKind::BlueSideband | PulseKind::RedSideband => {
                    if *particle != Particle::Proton {
                        Some("rf sideband pulses address the proton only".to_string())
                    } else if here != Some(ZoneRole::ProtonSideband) {
                        Some("rf sideband pulses require the proton sideband zone".to_string())
                    } else {
                        None
                    }
                }
                PulseKind::RamanBlueSideband | PulseKind::RamanRedSideband => {
                    if *particle != Particle::Coolant {
                        Some("Raman sideband pulses address the coolant ion only".to_string())
                    } else if here != Some(ZoneRole::CoolingDetection) {
                        Some("Raman pulses require the cooling/detection zone".to_string())
                    } else {
                        None
                    }
                }
            }
        }
        StepKind::Exchange(spec) => {
            let bad_param = match spec {
                ExchangeSpec::Theta(t) => !(*t >= 0.0),
                ExchangeSpec::Duration(d) => !(*d >= 0.0),
            };
            if bad_param {
                return Some("exchange angle/duration must be >= 0".to_string());
            }
            if loc.proton != loc.coolant || role(loc.proton) != Some(ZoneRole::Coupling) {
                return Some("exchange requires both particles in the coupling zone".to_string());
            }
            None
        }
        StepKind::Pump { particle } => {
            if *particle != Particle::Coolant {
                Some("pump applies to the coolant ion only".to_string())
            } else if role(loc.coolant) != Some(ZoneRole::CoolingDetection) {
                Some("pump requires the cooling/detection zone".to_string())
            } else {
                None
            }
        }
        StepKind::Cool { nbar } => {
            if !(*nbar >= 0.0) {
                return Some("cooling residual nbar must be >= 0".to_string());
            }
            if loc.proton != loc.coolant || role(loc.proton) != Some(ZoneRole::Coupling) {
                Some("sympathetic cooling requires both particles in the coupling zone".to_string())
            } else {
                None
            }
        }
        StepKind::Detect { particle } => {
            if *particle != Particle::Coolant {
                Some("detect applies to the coolant ion only".to_string())
            } else if role(loc.coolant) != Some(ZoneRole::CoolingDetection) {
                Some("detect requires the cooling/detection zone".to_string())
            } else {
                None
            }
        }
    }
}

/// Tracks simulated locations from the canonical start and reports every
/// step whose zone precondition fails. An empty result means valid.
pub fn validate(seq: &Sequence, cfg: &TrapArrayConfig) -> Vec<Violation> {
    let (Some(p0), Some(be0)) = (
        cfg.zone_with_role(ZoneRole::Precision),
        cfg.zone_with_role(ZoneRole::CoolingDetection),
    ) else {
        return vec![Violation {
            step_index: 0,
            message: "trap config lacks the precision or cooling/detection role".to_string(),
        }];
    };
    let mut loc = Locations { proton: p0, coolant: be0 };
    let mut violations = Vec::new();
    for (i, step) in seq.steps.iter().enumerate() {
        if let Some(message) = zone_rule(&step.kind, &loc, cfg) {
            violations.push(Violation { step_index: i, message });
        }
        if let StepKind::Shuttle { particle, zone } = &step.kind {
            loc.set(*particle, *zone);
        }
    }
    violations
}

fn pump_matrix() -> CMatrix {
    let mut m = CMatrix::zeros(2);
    m.set(SPIN_UP, SPIN_UP, Complex64::ONE);
    m
}

fn poisson_pmf(lambda: f64, k: u32) -> f64 {
    if lambda == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    *poisson_pmf_table(lambda, k).last().unwrap()
}

/// Overlap of the bright and dark count distributions; the coherence
/// survival factor of a non-selective photon measurement.
fn bhattacharyya(fp: &FluorescenceParams) -> f64 {
    if fp.lambda_dark == 0.0 {
        return (-0.5 * fp.lambda_bright).exp();
    }
    let cap = (fp.lambda_bright.max(fp.lambda_dark) + 60.0 * fp.lambda_bright.sqrt() + 60.0) as u32;
    let b = poisson_pmf_table(fp.lambda_bright, cap);
    let d = poisson_pmf_table(fp.lambda_dark, cap);
    b.iter().zip(d.iter()).map(|(pb, pd)| (pb * pd).sqrt()).sum()
}

fn apply_detect(
    quantum: &CompositeState,
    particle: Particle,
    ctx: &SimContext,
    mode: &mut ExecMode<'_>,
) -> Result<(CompositeState, DetectEvent)> {
    let spin = spin_label(particle);
    let bright_idx = ctx.bright_spin;
    let dark_idx = 1 - bright_idx;
    let p_bright = population(quantum, &BasisLabel::new().with(spin, bright_idx))?;
    match mode {
        ExecMode::Exact => {
            let gamma = if ctx.photon_sampling { bhattacharyya(&ctx.fluorescence) } else { 0.0 };
            let out = quantum.dephase_register(spin, gamma)?;
            Ok((out, DetectEvent { branch_probability: p_bright, count: None, outcome: None }))
        }
        ExecMode::Sampled(rng) => {
            let branch_bright = rng.next_f64() < p_bright;
            if ctx.photon_sampling {
                let count = sample_photon_count(branch_bright, &ctx.fluorescence, rng);
                let outcome = classify(count, &ctx.fluorescence);
                let mut kraus = [0.0f64; 2];
                kraus[bright_idx] = poisson_pmf(ctx.fluorescence.lambda_bright, count).sqrt();
                kraus[dark_idx] = poisson_pmf(ctx.fluorescence.lambda_dark, count).sqrt();
                let out = quantum.scale_register_diagonal(spin, &kraus)?.renormalized()?;
                Ok((
                    out,
                    DetectEvent {
                        branch_probability: p_bright,
                        count: Some(count),
                        outcome: Some(outcome),
                    },
                ))
            } else {
                let outcome = if branch_bright { Outcome::Bright } else { Outcome::Dark };
                // keep the per-shot draw budget fixed at two
                rng.next_u64();
                let mut kraus = [0.0f64; 2];
                kraus[if branch_bright { bright_idx } else { dark_idx }] = 1.0;
                let out = quantum.scale_register_diagonal(spin, &kraus)?.renormalized()?;
                Ok((
                    out,
                    DetectEvent {
                        branch_probability: p_bright,
                        count: None,
                        outcome: Some(outcome),
                    },
                ))
            }
        }
    }
}

/// Executes a sequence step by step, re-checking every zone rule against
/// the actual locations at runtime. Returns the new world and the event
/// log of this run; the world's own `step_log` accumulates the same
/// events.
pub fn execute(
    seq: &Sequence,
    world: &WorldState,
    ctx: &SimContext,
    mut mode: ExecMode<'_>,
) -> Result<(WorldState, EventLog)> {
    let mut quantum = world.quantum.clone();
    let mut loc = world.locations;
    let mut log: EventLog = Vec::new();
    for (i, step) in seq.steps.iter().enumerate() {
        if let Some(message) = zone_rule(&step.kind, &loc, &ctx.trap) {
            return Err(Error::PreconditionViolated { step: i, message });
        }
        let mut detect_event = None;
        match &step.kind {
            StepKind::Shuttle { particle, zone } => {
                if loc.get(*particle) != *zone {
                    loc.set(*particle, *zone);
                    quantum = apply_shuttle_heating(
                        &quantum,
                        mode_label(*particle),
                        ctx.trap.heating_quanta_per_shuttle,
                    )?;
                }
            }
            StepKind::Pulse { kind, particle, theta, phi, detuning_hz, duration_s } => {
                let params = PulseParams {
                    theta: *theta,
                    phi: *phi,
                    detuning: core::f64::consts::TAU * detuning_hz,
                    duration: *duration_s,
                    n_cal: 0,
                };
                quantum = match kind {
                    PulseKind::Carrier => {
                        carrier_pulse(&quantum, spin_label(*particle), &params)?
                    }
                    PulseKind::BlueSideband | PulseKind::RamanBlueSideband => sideband_pulse(
                        &quantum,
                        spin_label(*particle),
                        mode_label(*particle),
                        Sideband::Blue,
                        &params,
                    )?,
                    PulseKind::RedSideband | PulseKind::RamanRedSideband => sideband_pulse(
                        &quantum,
                        spin_label(*particle),
                        mode_label(*particle),
                        Sideband::Red,
                        &params,
                    )?,
                };
            }
            StepKind::Exchange(spec) => {
                let rate = ctx.exchange_coupling()?;
                let theta = match spec {
                    ExchangeSpec::Theta(t) => *t,
                    ExchangeSpec::Duration(d) => rate * d,
                };
                let params = ExchangeParams {
                    theta,
                    mode_detuning: ctx.trap.exchange_mode_detuning,
                    rate,
                };
                quantum = exchange(&quantum, PROTON_MODE, COOLANT_MODE, &params)?;
            }
            StepKind::Pump { particle } => {
                quantum = quantum.replace_register(spin_label(*particle), &pump_matrix())?;
            }
            StepKind::Cool { nbar } => {
                let n_max = quantum.register(PROTON_MODE)?.dim - 1;
                let thermal = make_thermal_mode(PROTON_MODE, *nbar, n_max)?;
                quantum = quantum.replace_register(PROTON_MODE, thermal.rho())?;
            }
            StepKind::Detect { particle } => {
                let (next, event) = apply_detect(&quantum, *particle, ctx, &mut mode)?;
                quantum = next;
                detect_event = Some(event);
            }
        }
        log.push(Event { index: i, step: step.kind.clone(), detect: detect_event });
    }
    let mut step_log = world.step_log.clone();
    step_log.extend(log.iter().cloned());
    Ok((WorldState { quantum, locations: loc, step_log }, log))
}

/// Optical pumping: resets the particle's spin register to |↑⟩⟨↑|.
/// Allowed only in the cooling/detection zone, coolant only.
pub fn pump(world: &WorldState, particle: Particle, ctx: &SimContext) -> Result<WorldState> {
    let seq = Sequence {
        name: "pump".to_string(),
        steps: vec![Step::built(StepKind::Pump { particle })],
    };
    execute(&seq, world, ctx, ExecMode::Exact).map(|(w, _)| w)
}

/// Sympathetic cooling episode: resets the proton's axial mode to a
/// thermal state at `nbar_residual`. Requires both particles co-located
/// in the coupling zone.
pub fn cool(world: &WorldState, nbar_residual: f64, ctx: &SimContext) -> Result<WorldState> {
    let seq = Sequence {
        name: "cool".to_string(),
        steps: vec![Step::built(StepKind::Cool { nbar: nbar_residual })],
    };
    execute(&seq, world, ctx, ExecMode::Exact).map(|(w, _)| w)
}

/// Pulse settings of the canonical detection sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionParams {
    /// Rf blue sideband pulse angle on the proton.
    pub bsb_theta: f64,
    /// Raman blue sideband pulse angle on the coolant.
    pub raman_theta: f64,
    /// Beam-splitter angle of the motional exchange.
    pub exchange: ExchangeSpec,
}

impl Default for DetectionParams {
    fn default() -> Self {
        DetectionParams {
            bsb_theta: core::f64::consts::PI,
            raman_theta: core::f64::consts::PI,
            exchange: ExchangeSpec::Theta(core::f64::consts::FRAC_PI_2),
        }
    }
}

fn pulse_step(kind: PulseKind, particle: Particle, theta: f64) -> Step {
    Step::built(StepKind::Pulse {
        kind,
        particle,
        theta,
        phi: 0.0,
        detuning_hz: 0.0,
        duration_s: 1.0,
    })
}

/// The canonical spin-detection sequence: map the proton spin onto its
/// motion, swap motion through the double well, map onto the coolant spin,
/// read out by fluorescence. Zones are resolved by role.
pub fn detection_sequence(cfg: &TrapArrayConfig, params: &DetectionParams) -> Result<Sequence> {
    let sideband_zone = cfg
        .zone_with_role(ZoneRole::ProtonSideband)
        .ok_or_else(|| Error::ConfigError("no proton sideband zone configured".into()))?;
    let coupling_zone = cfg
        .zone_with_role(ZoneRole::Coupling)
        .ok_or_else(|| Error::ConfigError("no coupling zone configured".into()))?;
    let detect_zone = cfg
        .zone_with_role(ZoneRole::CoolingDetection)
        .ok_or_else(|| Error::ConfigError("no cooling/detection zone configured".into()))?;
    Ok(Sequence {
        name: "spin_detection".to_string(),
        steps: vec![
            Step::built(StepKind::Shuttle { particle: Particle::Proton, zone: sideband_zone }),
            pulse_step(PulseKind::BlueSideband, Particle::Proton, params.bsb_theta),
            Step::built(StepKind::Shuttle { particle: Particle::Proton, zone: coupling_zone }),
            Step::built(StepKind::Shuttle { particle: Particle::Coolant, zone: coupling_zone }),
            Step::built(StepKind::Exchange(params.exchange)),
            Step::built(StepKind::Shuttle { particle: Particle::Coolant, zone: detect_zone }),
            pulse_step(PulseKind::RamanBlueSideband, Particle::Coolant, params.raman_theta),
            Step::built(StepKind::Detect { particle: Particle::Coolant }),
        ],
    })
}

/// Re-preparation between protocol passes: sympathetic cooling in the
/// coupling zone, then pumping of the coolant spin in the detection zone.
pub fn preparation_sequence(cfg: &TrapArrayConfig, nbar_residual: f64) -> Result<Sequence> {
    let coupling_zone = cfg
        .zone_with_role(ZoneRole::Coupling)
        .ok_or_else(|| Error::ConfigError("no coupling zone configured".into()))?;
    let detect_zone = cfg
        .zone_with_role(ZoneRole::CoolingDetection)
        .ok_or_else(|| Error::ConfigError("no cooling/detection zone configured".into()))?;
    Ok(Sequence {
        name: "preparation".to_string(),
        steps: vec![
            Step::built(StepKind::Shuttle { particle: Particle::Proton, zone: coupling_zone }),
            Step::built(StepKind::Shuttle { particle: Particle::Coolant, zone: coupling_zone }),
            Step::built(StepKind::Cool { nbar: nbar_residual }),
            Step::built(StepKind::Shuttle { particle: Particle::Coolant, zone: detect_zone }),
            Step::built(StepKind::Pump { particle: Particle::Coolant }),
        ],
    })
}

/// The canonical detection sequence as script text (a/b/c/d layout).
pub fn detection_sequence_text() -> String {
    String::from(
        "# quantum-logic spin detection\n\
         shuttle p b\n\
         pulse bsb p theta=pi\n\
         shuttle p c\n\
         shuttle be c\n\
         exchange theta=pi/2\n\
         shuttle be d\n\
         pulse raman_bsb be theta=pi\n\
         detect be\n",
    )
}

/// Runs the canonical detection protocol on a prepared world, sampling
/// the fluorescence readout. The proton is left in |↑⟩ (exactly so under
/// ideal parameters) regardless of its input spin.
pub fn spin_detection_protocol(
    world: &WorldState,
    ctx: &SimContext,
    params: &DetectionParams,
    rng: &mut SeededStream,
) -> Result<(Outcome, WorldState)> {
    let seq = detection_sequence(&ctx.trap, params)?;
    let (next, log) = execute(&seq, world, ctx, ExecMode::Sampled(rng))?;
    let outcome = log
        .iter()
        .rev()
        .find_map(|e| e.detect.as_ref().and_then(|d| d.outcome))
        .ok_or_else(|| Error::ConfigError("detection sequence produced no outcome".into()))?;
    Ok((outcome, next))
}

/// Population of the coolant spin branch that classifies as Bright.
pub fn bright_probability(world: &WorldState, ctx: &SimContext) -> Result<f64> {
    population(&world.quantum, &BasisLabel::new().with(COOLANT_SPIN, ctx.bright_spin))
}
