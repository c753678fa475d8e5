//! Physical configuration: species, magnetic field, trap zones,
//! eigenfrequency relations, Coulomb exchange-rate estimation and
//! shuttle heating.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::state::{CompositeState, TRUNCATION_GUARD};

/// Vacuum permittivity, F/m (CODATA 2018).
pub const EPSILON_0: f64 = 8.8541878128e-12;

/// A trapped spin-1/2 particle. `g_true` is the simulation ground truth
/// that the experiment layer must recover through simulated measurements;
/// it is configuration, never hard-coded.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSpecies {
    pub name: String,
    /// Mass in kg.
    pub mass: f64,
    /// Signed charge in C.
    pub charge: f64,
    /// Dimensionless g-factor (ground truth).
    pub g_true: f64,
}

impl ParticleSpecies {
    pub fn new(name: &str, mass: f64, charge: f64, g_true: f64) -> Result<Self> {
        if !(mass > 0.0) {
            return Err(Error::ConfigError(alloc::format!("mass must be positive, got {mass}")));
        }
        if charge == 0.0 {
            return Err(Error::ConfigError("charge must be nonzero".into()));
        }
        Ok(ParticleSpecies { name: name.to_string(), mass, charge, g_true })
    }
}

/// The two tracked particles of the protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Particle {
    Proton,
    Coolant,
}

impl Particle {
    /// Script and config name: `p` or `be`.
    pub fn tag(&self) -> &'static str {
        match self {
            Particle::Proton => "p",
            Particle::Coolant => "be",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "p" => Some(Particle::Proton),
            "be" => Some(Particle::Coolant),
            _ => None,
        }
    }
}

impl fmt::Display for Particle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ZoneId {
    A,
    B,
    C,
    D,
}

impl ZoneId {
    pub fn tag(&self) -> &'static str {
        match self {
            ZoneId::A => "a",
            ZoneId::B => "b",
            ZoneId::C => "c",
            ZoneId::D => "d",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "a" => Some(ZoneId::A),
            "b" => Some(ZoneId::B),
            "c" => Some(ZoneId::C),
            "d" => Some(ZoneId::D),
            _ => None,
        }
    }
}

impl fmt::Display for ZoneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Dedicated function of a trap zone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZoneRole {
    /// Homogeneous-field zone where the spin-flip drive is applied.
    Precision,
    /// Rf sideband manipulation zone for the proton.
    ProtonSideband,
    /// Double-well zone where the two particles couple via Coulomb.
    Coupling,
    /// Laser cooling, pumping and fluorescence detection zone.
    CoolingDetection,
}

impl ZoneRole {
    pub fn tag(&self) -> &'static str {
        match self {
            ZoneRole::Precision => "precision",
            ZoneRole::ProtonSideband => "proton_sideband",
            ZoneRole::Coupling => "coupling",
            ZoneRole::CoolingDetection => "cooling_detection",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "precision" => Some(ZoneRole::Precision),
            "proton_sideband" => Some(ZoneRole::ProtonSideband),
            "coupling" => Some(ZoneRole::Coupling),
            "cooling_detection" => Some(ZoneRole::CoolingDetection),
            _ => None,
        }
    }
}

/// Multi-zone trap array configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct TrapArrayConfig {
    /// Static magnetic field, Tesla.
    pub b_field: f64,
    /// Ordered zones and their roles.
    pub zones: Vec<(ZoneId, ZoneRole)>,
    /// Axial well frequency per (zone, particle), Hz.
    pub axial_hz: Vec<((ZoneId, Particle), f64)>,
    /// Separation of the two coupling wells, m.
    pub well_separation_m: f64,
    /// Mean quanta added to a particle's axial mode per shuttle leg.
    pub heating_quanta_per_shuttle: f64,
    /// Residual frequency mismatch of the two coupling wells, rad/s.
    pub exchange_mode_detuning: f64,
}

impl TrapArrayConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.b_field > 0.0) {
            return Err(Error::NonPositiveField);
        }
        if !(self.well_separation_m > 0.0) {
            return Err(Error::NonPositiveDistance);
        }
        if !(self.heating_quanta_per_shuttle >= 0.0) {
            return Err(Error::ConfigError("heating quanta must be >= 0".into()));
        }
        for role in [
            ZoneRole::Precision,
            ZoneRole::ProtonSideband,
            ZoneRole::Coupling,
            ZoneRole::CoolingDetection,
        ] {
            if !self.zones.iter().any(|(_, r)| *r == role) {
                return Err(Error::ConfigError(alloc::format!(
                    "no zone carries the {} role",
                    role.tag()
                )));
            }
        }
        Ok(())
    }

    pub fn zone_role(&self, zone: ZoneId) -> Option<ZoneRole> {
        self.zones.iter().find(|(z, _)| *z == zone).map(|(_, r)| *r)
    }

    pub fn zone_with_role(&self, role: ZoneRole) -> Option<ZoneId> {
        self.zones.iter().find(|(_, r)| *r == role).map(|(z, _)| *z)
    }

    pub fn axial_frequency(&self, zone: ZoneId, particle: Particle) -> Result<f64> {
        self.axial_hz
            .iter()
            .find(|((z, p), _)| *z == zone && *p == particle)
            .map(|(_, f)| *f)
            .ok_or_else(|| {
                Error::ConfigError(alloc::format!(
                    "no axial frequency configured for zone {} / particle {}",
                    zone.tag(),
                    particle.tag()
                ))
            })
    }
}

/// The three trap eigenfrequencies of one particle, Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapFrequencies {
    /// Modified cyclotron frequency.
    pub f_plus: f64,
    /// Axial frequency.
    pub f_z: f64,
    /// Magnetron frequency.
    pub f_minus: f64,
}

impl TrapFrequencies {
    /// Requires f+ >= fz >= f- >= 0 and f+ > 0. The boundary equalities
    /// admit the degenerate field-only limit (fc, 0, 0).
    pub fn new(f_plus: f64, f_z: f64, f_minus: f64) -> Result<Self> {
        if !(f_plus > 0.0 && f_plus >= f_z && f_z >= f_minus && f_minus >= 0.0) {
            return Err(Error::OrderingViolation);
        }
        Ok(TrapFrequencies { f_plus, f_z, f_minus })
    }
}

/// Free cyclotron frequency |q| B / (2 pi m), Hz.
pub fn free_cyclotron_frequency(sp: &ParticleSpecies, b_field: f64) -> Result<f64> {
    if !(b_field > 0.0) {
        return Err(Error::NonPositiveField);
    }
    Ok(sp.charge.abs() * b_field / (core::f64::consts::TAU * sp.mass))
}

/// Reconstructs the free cyclotron frequency from the three trap
/// eigenfrequencies: fc = sqrt(f+^2 + fz^2 + f-^2).
pub fn invariance_theorem(tf: &TrapFrequencies) -> Result<f64> {
    // re-check the ordering so raw struct literals cannot sneak past
    TrapFrequencies::new(tf.f_plus, tf.f_z, tf.f_minus)?;
    Ok((tf.f_plus * tf.f_plus + tf.f_z * tf.f_z + tf.f_minus * tf.f_minus).sqrt())
}

/// Ideal-trap eigenfrequencies from the free cyclotron and axial
/// frequencies: f± = (fc ± sqrt(fc^2 - 2 fz^2)) / 2.
pub fn eigenfrequencies_from(fc: f64, fz: f64) -> Result<TrapFrequencies> {
    if !(fc > 0.0) {
        return Err(Error::NonPositiveFrequency);
    }
    if !(fz >= 0.0) {
        return Err(Error::NonPositiveFrequency);
    }
    let discriminant = fc * fc - 2.0 * fz * fz;
    if discriminant <= 0.0 {
        return Err(Error::UnstableTrap);
    }
    let root = discriminant.sqrt();
    TrapFrequencies::new(0.5 * (fc + root), fz, 0.5 * (fc - root))
}

/// Coulomb exchange coupling of two particles in separate resonant wells
/// at distance `d`:
/// `Omega_ex = |q_a q_b| / (4 pi eps0 d^3 sqrt(m_a m_b) (2 pi f_common))`
/// in rad/s (dipole approximation of the Coulomb interaction). The full
/// swap takes `T_ex = (pi/2) / Omega_ex`.
pub fn exchange_rate(
    a: &ParticleSpecies,
    b: &ParticleSpecies,
    d: f64,
    f_common: f64,
) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::NonPositiveDistance);
    }
    if !(f_common > 0.0) {
        return Err(Error::NonPositiveFrequency);
    }
    let omega = core::f64::consts::TAU * f_common;
    Ok((a.charge * b.charge).abs()
        / (4.0 * core::f64::consts::PI * EPSILON_0 * d * d * d * (a.mass * b.mass).sqrt() * omega))
}

/// Time of one full motional swap at the given exchange rate, s.
pub fn exchange_period(omega_ex: f64) -> f64 {
    core::f64::consts::FRAC_PI_2 / omega_ex
}

/// The hidden simulation truth the experiment layer must recover:
/// f_L = (g_true / 2) * f_c.
pub fn larmor_frequency_truth(sp: &ParticleSpecies, b_field: f64) -> Result<f64> {
    Ok(0.5 * sp.g_true * free_cyclotron_frequency(sp, b_field)?)
}

/// Heating channel for one shuttle leg: raises the mode's mean phonon
/// number by exactly `quanta` through repeated one-quantum upward
/// redistribution steps, damping mode coherences by the mixing weight.
/// Population pushed past the Fock cutoff beyond the 1e-9 guard is an
/// error, not a silent renormalization.
pub fn apply_shuttle_heating(
    s: &CompositeState,
    mode: &str,
    quanta: f64,
) -> Result<CompositeState> {
    if !(quanta >= 0.0) || !quanta.is_finite() {
        return Err(Error::ConfigError(alloc::format!("heating quanta must be finite and >= 0, got {quanta}")));
    }
    if quanta == 0.0 {
        // identity channel, but still enforce the register contract
        s.position(mode)?;
        return s.shift_mix_register(mode, 0.0).map(|(state, _)| state);
    }
    let steps = quanta.ceil() as usize;
    let w = quanta / steps as f64;
    let mut state = s.clone();
    let mut leaked_total = 0.0;
    for _ in 0..steps {
        let (next, leaked) = state.shift_mix_register(mode, w)?;
        leaked_total += leaked;
        if leaked_total > TRUNCATION_GUARD {
            return Err(Error::TruncationError { leaked: leaked_total });
        }
        state = next;
    }
    Ok(state)
}
