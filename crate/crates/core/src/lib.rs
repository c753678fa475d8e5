//! Deterministic simulator of quantum-logic spin-state detection and
//! g-factor measurement for a single (anti-)proton sympathetically coupled
//! to a laser-cooled atomic ion in a multi-zone Penning trap array.
//!
//! The crate covers the full measurement pipeline:
//!
//! - [`state`]: composite density operators over spin and truncated
//!   oscillator registers;
//! - [`dynamics`]: carrier and sideband rotations with detuning, and the
//!   Coulomb-mediated motional exchange between two wells;
//! - [`trap`]: species, field, zones, eigenfrequency relations, exchange
//!   rate estimation and shuttle heating;
//! - [`protocol`]: the sequence script language, zone-rule validation and
//!   the spin-detection state machine;
//! - [`stats`]: Poisson photon counting, threshold classification and the
//!   counter-based deterministic random-number contract;
//! - [`scan`]: Larmor frequency scans, lineshape fitting and g-factor
//!   extraction with uncertainties.
//!
//! `no_std` compatible (with `alloc`); the companion CLI crate carries all
//! IO and file formats.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod protocol;
pub mod scan;
pub mod state;
pub mod stats;
pub mod trap;

pub use error::{Error, Result};

#[cfg(test)]
pub(crate) mod test_support {
    //! Shared fixtures for the unit tests.

    use crate::linalg::CMatrix;
    use crate::protocol::SimContext;
    use crate::scan::{ExperimentConfig, ScanConfig};
    use crate::state::{CompositeState, RegisterSpec, SPIN_DOWN};
    use crate::stats::{FluorescenceParams, SeededStream};
    use crate::trap::{larmor_frequency_truth, Particle, ParticleSpecies, TrapArrayConfig, ZoneId, ZoneRole};
    use alloc::vec;
    use alloc::vec::Vec;
    use num_complex::Complex64;

    pub fn random_pure_state(registers: Vec<RegisterSpec>, seed: u64) -> CompositeState {
        let dim: usize = registers.iter().map(|r| r.dim).product();
        let mut stream = SeededStream::new(seed, 7777);
        let mut v = vec![Complex64::ZERO; dim];
        for amp in v.iter_mut() {
            *amp = Complex64::new(stream.next_f64() - 0.5, stream.next_f64() - 0.5);
        }
        let norm: f64 = v.iter().map(|a| a.norm_sqr()).sum::<f64>();
        let norm = norm.sqrt();
        for amp in v.iter_mut() {
            *amp /= norm;
        }
        CompositeState::from_parts(registers, CMatrix::outer(&v)).unwrap()
    }

    pub fn proton_species() -> ParticleSpecies {
        ParticleSpecies::new("proton", 1.67262192369e-27, 1.602176634e-19, 5.5856946893).unwrap()
    }

    pub fn coolant_species() -> ParticleSpecies {
        // 9Be+ (atomic mass minus one electron)
        ParticleSpecies::new("be9", 1.496417e-26, 1.602176634e-19, 2.002).unwrap()
    }

    pub fn test_trap(heating: f64) -> TrapArrayConfig {
        TrapArrayConfig {
            b_field: 5.0,
            zones: vec![
                (ZoneId::A, ZoneRole::Precision),
                (ZoneId::B, ZoneRole::ProtonSideband),
                (ZoneId::C, ZoneRole::Coupling),
                (ZoneId::D, ZoneRole::CoolingDetection),
            ],
            axial_hz: vec![
                ((ZoneId::A, Particle::Proton), 600e3),
                ((ZoneId::B, Particle::Proton), 400e3),
                ((ZoneId::C, Particle::Proton), 400e3),
                ((ZoneId::C, Particle::Coolant), 400e3),
                ((ZoneId::D, Particle::Coolant), 400e3),
            ],
            well_separation_m: 100e-6,
            heating_quanta_per_shuttle: heating,
            exchange_mode_detuning: 0.0,
        }
    }

    pub fn test_context(n_max: usize, heating: f64) -> SimContext {
        SimContext {
            trap: test_trap(heating),
            proton: proton_species(),
            coolant: coolant_species(),
            fluorescence: FluorescenceParams::default(),
            bright_spin: SPIN_DOWN,
            photon_sampling: true,
            n_max,
            cool_residual_nbar: 0.0,
        }
    }

    pub fn test_experiment(n_max: usize, seed: u64) -> ExperimentConfig {
        let ctx = test_context(n_max, 0.0);
        let f_l = larmor_frequency_truth(&ctx.proton, ctx.trap.b_field).unwrap();
        ExperimentConfig {
            ctx,
            scan: ScanConfig {
                start_hz: f_l - 2.0,
                stop_hz: f_l + 2.0,
                points: 21,
                shots_per_point: 100,
                drive_theta: core::f64::consts::PI,
                drive_duration_s: 1.0,
                seed,
            },
            motional_noise_rel: 0.0,
        }
    }
}
