//! Unitary pulse and exchange operations on composite states.
//!
//! Pulses are specified by their calibrated rotation angle rather than
//! drive power: `theta` is the pulse area on the calibration Fock pair
//! `n_cal`, and detuning folds in through the exact two-level closed form
//! applied per coupled pair (pairs decouple, so this equals exponentiating
//! the full Hamiltonian). The exchange operation is the Coulomb-mediated
//! beam splitter between two equal-dimension modes, block-diagonal in
//! total phonon number.

use alloc::string::ToString;
use num_complex::Complex64;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{eigh, CMatrix};
use crate::state::{CompositeState, RegisterKind, SPIN_DOWN, SPIN_UP, TRUNCATION_GUARD};
use crate::state::{population, BasisLabel};

/// Pulse parameters: rotation angle calibrated on the `n_cal` Fock pair,
/// phase, detuning from resonance and duration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseParams {
    /// Calibrated rotation angle in radians (pulse area at `n_cal`).
    pub theta: f64,
    /// Drive phase in radians.
    pub phi: f64,
    /// Angular detuning from resonance in rad/s.
    pub detuning: f64,
    /// Pulse duration in seconds.
    pub duration: f64,
    /// Fock pair on which `theta` is calibrated.
    pub n_cal: usize,
}

impl PulseParams {
    pub fn pi_pulse() -> Self {
        PulseParams { theta: core::f64::consts::PI, ..Default::default() }
    }

    fn check(&self) -> Result<()> {
        if !(self.duration > 0.0) {
            return Err(Error::ConfigError(alloc::format!(
                "pulse duration must be positive, got {}",
                self.duration
            )));
        }
        if !(self.theta >= 0.0) {
            return Err(Error::ConfigError(alloc::format!(
                "pulse angle must be >= 0, got {}",
                self.theta
            )));
        }
        Ok(())
    }
}

impl Default for PulseParams {
    fn default() -> Self {
        PulseParams { theta: 0.0, phi: 0.0, detuning: 0.0, duration: 1.0, n_cal: 0 }
    }
}

/// Beam-splitter parameters for the double-well motional exchange.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExchangeParams {
    /// Beam-splitter angle theta = Omega_ex * t (pi/2 = full swap).
    pub theta: f64,
    /// Angular frequency mismatch between the two wells, rad/s.
    pub mode_detuning: f64,
    /// Exchange coupling Omega_ex in rad/s; sets the detuning contrast.
    pub rate: f64,
}

impl ExchangeParams {
    pub fn resonant(theta: f64) -> Self {
        ExchangeParams { theta, mode_detuning: 0.0, rate: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sideband {
    Red,
    Blue,
}

/// Two-level transition probability of a square drive:
/// `Omega^2/(Omega^2 + delta^2) * sin^2(sqrt(Omega^2 + delta^2) t / 2)`.
pub fn rabi_probability(omega: f64, detuning: f64, t: f64) -> f64 {
    let w2 = omega * omega + detuning * detuning;
    if w2 == 0.0 {
        return 0.0;
    }
    let s = (0.5 * w2.sqrt() * t).sin();
    (omega * omega / w2) * s * s
}

/// Exact propagator of a resonantly rotating two-level drive over `t`:
/// H = (delta/2) sigma_z + (omega/2)(cos phi sigma_x + sin phi sigma_y),
/// basis ordered (lower, upper) = (|↓⟩, |↑⟩).
fn two_level_unitary(omega: f64, detuning: f64, t: f64, phi: f64) -> CMatrix {
    let w = (omega * omega + detuning * detuning).sqrt();
    let mut u = CMatrix::identity(2);
    if w == 0.0 {
        return u;
    }
    let h = 0.5 * w * t;
    let (sin_h, cos_h) = h.sin_cos();
    let dz = detuning / w * sin_h;
    let off = omega / w * sin_h;
    let phase = Complex64::from_polar(1.0, phi);
    u.set(0, 0, Complex64::new(cos_h, dz));
    u.set(1, 1, Complex64::new(cos_h, -dz));
    u.set(0, 1, Complex64::new(0.0, -off) * phase.conj());
    u.set(1, 0, Complex64::new(0.0, -off) * phase);
    u
}

fn expect_kind(s: &CompositeState, label: &str, kind: RegisterKind) -> Result<usize> {
    let reg = s.register(label)?;
    if reg.kind != kind {
        return Err(Error::WrongRegisterKind {
            register: label.to_string(),
            expected: match kind {
                RegisterKind::Spin => "spin",
                RegisterKind::Mode => "mode",
            },
        });
    }
    Ok(reg.dim)
}

/// Resonant or detuned rotation of one spin register; motional registers
/// are untouched.
pub fn carrier_pulse(s: &CompositeState, spin: &str, p: &PulseParams) -> Result<CompositeState> {
    p.check()?;
    expect_kind(s, spin, RegisterKind::Spin)?;
    let omega = p.theta / p.duration;
    let u = two_level_unitary(omega, p.detuning, p.duration, p.phi);
    s.apply_unitary(&[spin], &u)
}

/// Sideband rotation coupling spin flips to motional quanta.
///
/// Blue couples |↓,n⟩ ↔ |↑,n+1⟩, red couples |↑,n⟩ ↔ |↓,n+1⟩, each pair
/// with angle `theta * sqrt(n+1) / sqrt(n_cal+1)`. If the topmost Fock
/// level would need a partner beyond the cutoff and carries more than the
/// 1e-9 guard of population, the pulse refuses to run.
pub fn sideband_pulse(
    s: &CompositeState,
    spin: &str,
    mode: &str,
    sideband: Sideband,
    p: &PulseParams,
) -> Result<CompositeState> {
    p.check()?;
    expect_kind(s, spin, RegisterKind::Spin)?;
    let mode_dim = expect_kind(s, mode, RegisterKind::Mode)?;

    // the basis state whose coupling partner would exceed the cutoff
    let orphan_spin = match sideband {
        Sideband::Blue => SPIN_DOWN,
        Sideband::Red => SPIN_UP,
    };
    let orphan = population(
        s,
        &BasisLabel::new().with(spin, orphan_spin).with(mode, mode_dim - 1),
    )?;
    if orphan > TRUNCATION_GUARD {
        return Err(Error::TruncationError { leaked: orphan });
    }

    let omega_cal = p.theta / p.duration / ((p.n_cal as f64 + 1.0).sqrt());
    let mut u = CMatrix::identity(2 * mode_dim);
    // subsystem flat index with [spin, mode] ordering: s * mode_dim + n
    for n in 0..mode_dim - 1 {
        let omega_n = omega_cal * ((n + 1) as f64).sqrt();
        let pair = two_level_unitary(omega_n, p.detuning, p.duration, p.phi);
        let (lower, upper) = match sideband {
            Sideband::Blue => (SPIN_DOWN * mode_dim + n, SPIN_UP * mode_dim + n + 1),
            Sideband::Red => (SPIN_UP * mode_dim + n, SPIN_DOWN * mode_dim + n + 1),
        };
        u.set(lower, lower, pair.get(0, 0));
        u.set(lower, upper, pair.get(0, 1));
        u.set(upper, lower, pair.get(1, 0));
        u.set(upper, upper, pair.get(1, 1));
    }
    s.apply_unitary(&[spin, mode], &u)
}

/// Beam-splitter exchange between two modes of equal dimension:
/// exp(-i H t) with H = (delta/2)(a†a - b†b) + Omega_ex (a†b + b†a),
/// theta = Omega_ex * t. At delta = 0, theta = pi/2 the reduced states of
/// the two modes are exactly swapped; total phonon number is conserved.
pub fn exchange(
    s: &CompositeState,
    mode_a: &str,
    mode_b: &str,
    x: &ExchangeParams,
) -> Result<CompositeState> {
    let dim_a = expect_kind(s, mode_a, RegisterKind::Mode)?;
    let dim_b = expect_kind(s, mode_b, RegisterKind::Mode)?;
    if dim_a != dim_b {
        return Err(Error::DimMismatch { left: dim_a, right: dim_b });
    }
    if !(x.theta >= 0.0) {
        return Err(Error::ConfigError(alloc::format!("exchange angle must be >= 0, got {}", x.theta)));
    }
    let (omega, t) = if x.mode_detuning == 0.0 {
        (1.0, x.theta)
    } else {
        if !(x.rate > 0.0) {
            return Err(Error::ConfigError(
                "exchange rate must be positive when the wells are detuned".into(),
            ));
        }
        (x.rate, x.theta / x.rate)
    };
    let u = exchange_unitary(dim_a, omega, x.mode_detuning, t);
    s.apply_unitary(&[mode_a, mode_b], &u)
}

/// Full two-mode exchange propagator, assembled per total-phonon sector.
fn exchange_unitary(m: usize, omega: f64, delta: f64, t: f64) -> CMatrix {
    let mut u = CMatrix::zeros(m * m);
    for total in 0..=(2 * (m - 1)) {
        let lo = total.saturating_sub(m - 1);
        let hi = total.min(m - 1);
        let size = hi - lo + 1;
        // sector Hamiltonian in the (n_a, total - n_a) ladder basis
        let mut h = CMatrix::zeros(size);
        for (k, na) in (lo..=hi).enumerate() {
            let nb = total - na;
            h.set(k, k, Complex64::new(0.5 * delta * (na as f64 - nb as f64), 0.0));
            if na < hi {
                let coupling = omega * (((na + 1) * nb) as f64).sqrt();
                h.set(k + 1, k, Complex64::new(coupling, 0.0));
                h.set(k, k + 1, Complex64::new(coupling, 0.0));
            }
        }
        let (vals, vecs) = eigh(&h);
        // U_sector = V exp(-i E t) V†
        for r in 0..size {
            for c in 0..size {
                let mut acc = Complex64::ZERO;
                for k in 0..size {
                    let phase = Complex64::from_polar(1.0, -vals[k] * t);
                    acc += vecs.get(r, k) * phase * vecs.get(c, k).conj();
                }
                let row = (lo + r) * m + (total - (lo + r));
                let col = (lo + c) * m + (total - (lo + c));
                u.set(row, col, acc);
            }
        }
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{make_pure_state, partial_trace, RegisterSpec};
    use crate::test_support::random_pure_state;
    use alloc::vec;
    use core::f64::consts::PI;

    fn spin_state(idx: usize) -> CompositeState {
        make_pure_state(vec![RegisterSpec::spin("p")], &BasisLabel::new().with("p", idx)).unwrap()
    }

    fn spin_mode_state(s: usize, n: usize, n_max: usize) -> CompositeState {
        make_pure_state(
            vec![RegisterSpec::spin("p"), RegisterSpec::mode("z", n_max)],
            &BasisLabel::new().with("p", s).with("z", n),
        )
        .unwrap()
    }

    fn up_pop(s: &CompositeState) -> f64 {
        population(s, &BasisLabel::new().with("p", SPIN_UP)).unwrap()
    }

    #[test]
    fn carrier_pi_pulse_flips_spin() {
        let s = spin_state(SPIN_DOWN);
        let out = carrier_pulse(&s, "p", &PulseParams::pi_pulse()).unwrap();
        assert!((up_pop(&out) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn carrier_detuned_pi_pulse_reference_value() {
        // theta = pi at detuning = Omega: P = 0.5 sin^2(sqrt(2) pi / 2)
        let s = spin_state(SPIN_DOWN);
        let p = PulseParams { theta: PI, detuning: PI, duration: 1.0, ..Default::default() };
        let out = carrier_pulse(&s, "p", &p).unwrap();
        let expect = rabi_probability(PI, PI, 1.0);
        assert!((up_pop(&out) - expect).abs() < 1e-12);
        assert!((expect - 0.3165638355103539).abs() < 1e-12);
    }

    #[test]
    fn carrier_two_pi_is_identity_on_populations() {
        let s = spin_state(SPIN_UP);
        let p = PulseParams { theta: 2.0 * PI, ..Default::default() };
        let out = carrier_pulse(&s, "p", &p).unwrap();
        assert!((up_pop(&out) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn carrier_rejects_mode_register() {
        let s = spin_mode_state(0, 0, 3);
        let err = carrier_pulse(&s, "z", &PulseParams::pi_pulse()).unwrap_err();
        assert!(matches!(err, Error::WrongRegisterKind { .. }));
        let err = carrier_pulse(&s, "nope", &PulseParams::pi_pulse()).unwrap_err();
        assert!(matches!(err, Error::UnknownRegister(_)));
    }

    #[test]
    fn rabi_probability_reference_points() {
        let omega = 2.0 * PI * 1000.0;
        assert!((rabi_probability(omega, 0.0, PI / omega) - 1.0).abs() < 1e-12);
        assert!(
            (rabi_probability(omega, omega, PI / omega) - 0.3165638355103539).abs() < 1e-12
        );
        assert_eq!(rabi_probability(omega, 123.0, 0.0), 0.0);
        assert_eq!(rabi_probability(0.0, 0.0, 1.0), 0.0);
    }

    #[test]
    fn carrier_matches_rabi_probability_on_grid() {
        let omega = 1.0;
        for ratio in [0.0, 0.5, 1.0, 2.0, 5.0] {
            for angle in [PI / 4.0, PI / 2.0, PI, 2.0 * PI] {
                let t = angle / omega;
                let p = PulseParams {
                    theta: angle,
                    detuning: ratio * omega,
                    duration: t,
                    ..Default::default()
                };
                let out = carrier_pulse(&spin_state(SPIN_DOWN), "p", &p).unwrap();
                let expect = rabi_probability(omega, ratio * omega, t);
                assert!(
                    (up_pop(&out) - expect).abs() < 1e-9,
                    "mismatch at ratio {ratio} angle {angle}"
                );
            }
        }
    }

    #[test]
    fn blue_sideband_maps_spin_to_motion() {
        // |down,0> -> |up,1> ; |up,0> untouched
        let down = spin_mode_state(SPIN_DOWN, 0, 5);
        let out = sideband_pulse(&down, "p", "z", Sideband::Blue, &PulseParams::pi_pulse()).unwrap();
        let pop = population(&out, &BasisLabel::new().with("p", SPIN_UP).with("z", 1)).unwrap();
        assert!((pop - 1.0).abs() < 1e-12);

        let up = spin_mode_state(SPIN_UP, 0, 5);
        let out = sideband_pulse(&up, "p", "z", Sideband::Blue, &PulseParams::pi_pulse()).unwrap();
        let pop = population(&out, &BasisLabel::new().with("p", SPIN_UP).with("z", 0)).unwrap();
        assert!((pop - 1.0).abs() < 1e-12);
    }

    #[test]
    fn blue_sideband_sqrt_n_scaling() {
        // pi pulse calibrated on n_cal = 0 over-rotates the n=1 pair
        let s = spin_mode_state(SPIN_DOWN, 1, 5);
        let out = sideband_pulse(&s, "p", "z", Sideband::Blue, &PulseParams::pi_pulse()).unwrap();
        let pop = population(&out, &BasisLabel::new().with("p", SPIN_UP).with("z", 2)).unwrap();
        let expect = (PI * 2.0_f64.sqrt() / 2.0).sin().powi(2);
        assert!((pop - expect).abs() < 1e-12);
        assert!((expect - 0.6331276710207078).abs() < 1e-12);
    }

    #[test]
    fn blue_sideband_reverse_direction() {
        let s = spin_mode_state(SPIN_UP, 1, 5);
        let out = sideband_pulse(&s, "p", "z", Sideband::Blue, &PulseParams::pi_pulse()).unwrap();
        let pop = population(&out, &BasisLabel::new().with("p", SPIN_DOWN).with("z", 0)).unwrap();
        assert!((pop - 1.0).abs() < 1e-12);
    }

    #[test]
    fn red_sideband_basic_mapping() {
        let s = spin_mode_state(SPIN_DOWN, 1, 5);
        let out = sideband_pulse(&s, "p", "z", Sideband::Red, &PulseParams::pi_pulse()).unwrap();
        let pop = population(&out, &BasisLabel::new().with("p", SPIN_UP).with("z", 0)).unwrap();
        assert!((pop - 1.0).abs() < 1e-12);
        // |down, 0> is unpaired under red
        let s = spin_mode_state(SPIN_DOWN, 0, 5);
        let out = sideband_pulse(&s, "p", "z", Sideband::Red, &PulseParams::pi_pulse()).unwrap();
        let pop = population(&out, &BasisLabel::new().with("p", SPIN_DOWN).with("z", 0)).unwrap();
        assert!((pop - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sideband_truncation_guard_fires() {
        let s = spin_mode_state(SPIN_DOWN, 5, 5);
        let err =
            sideband_pulse(&s, "p", "z", Sideband::Blue, &PulseParams::pi_pulse()).unwrap_err();
        assert!(matches!(err, Error::TruncationError { .. }));
        // the same state is fine for red (its orphan is |up, n_max>)
        sideband_pulse(&s, "p", "z", Sideband::Red, &PulseParams::pi_pulse()).unwrap();
    }

    #[test]
    fn sideband_double_pi_restores_pair_populations() {
        // within the calibrated pair a pi pulse applied twice is a full
        // 2 pi rotation, so populations return
        let n_max = 6usize;
        for n_cal in [0usize, 2] {
            // superposition of the two pair members |down,n_cal>, |up,n_cal+1>
            let mut v = alloc::vec![Complex64::ZERO; 2 * (n_max + 1)];
            v[SPIN_DOWN * (n_max + 1) + n_cal] = Complex64::new(0.6, 0.0);
            v[SPIN_UP * (n_max + 1) + n_cal + 1] = Complex64::new(0.0, 0.8);
            let s = CompositeState::from_parts(
                vec![RegisterSpec::spin("p"), RegisterSpec::mode("z", n_max)],
                CMatrix::outer(&v),
            )
            .unwrap();
            let p = PulseParams { theta: PI, n_cal, ..Default::default() };
            let once = sideband_pulse(&s, "p", "z", Sideband::Blue, &p).unwrap();
            let twice = sideband_pulse(&once, "p", "z", Sideband::Blue, &p).unwrap();
            for sp in 0..2 {
                for n in 0..=n_max {
                    let label = BasisLabel::new().with("p", sp).with("z", n);
                    let before = population(&s, &label).unwrap();
                    let after = population(&twice, &label).unwrap();
                    assert!((before - after).abs() < 1e-10, "pair n_cal={n_cal}, ({sp},{n})");
                }
            }
        }
    }

    #[test]
    fn blue_sideband_conserves_n_minus_s_sectors() {
        let mut stream = crate::stats::SeededStream::new(31, 0);
        let n_max = 4usize;
        for _trial in 0..50u64 {
            // random amplitudes with the blue orphan |down, n_max> left empty
            let mut v = alloc::vec![Complex64::ZERO; 2 * (n_max + 1)];
            for (i, amp) in v.iter_mut().enumerate() {
                if i / (n_max + 1) == SPIN_DOWN && i % (n_max + 1) == n_max {
                    continue;
                }
                *amp = Complex64::new(stream.next_f64() - 0.5, stream.next_f64() - 0.5);
            }
            let norm: f64 = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            for amp in v.iter_mut() {
                *amp /= norm;
            }
            let s = CompositeState::from_parts(
                vec![RegisterSpec::spin("p"), RegisterSpec::mode("z", n_max)],
                CMatrix::outer(&v),
            )
            .unwrap();
            let p = PulseParams {
                theta: stream.next_f64() * 2.0 * PI,
                phi: stream.next_f64() * 2.0 * PI,
                detuning: (stream.next_f64() - 0.5) * 4.0,
                duration: 0.5 + stream.next_f64(),
                n_cal: 0,
            };
            let out = sideband_pulse(&s, "p", "z", Sideband::Blue, &p).unwrap();
            for sector in -1i64..=(n_max as i64) {
                let mut before = 0.0;
                let mut after = 0.0;
                for sp in 0..2usize {
                    for n in 0..=n_max {
                        if n as i64 - sp as i64 == sector {
                            let label = BasisLabel::new().with("p", sp).with("z", n);
                            before += population(&s, &label).unwrap();
                            after += population(&out, &label).unwrap();
                        }
                    }
                }
                assert!((before - after).abs() < 1e-10, "sector {sector} moved");
            }
        }
    }

    fn two_mode_state(na: usize, nb: usize, n_max: usize) -> CompositeState {
        make_pure_state(
            vec![RegisterSpec::mode("a", n_max), RegisterSpec::mode("b", n_max)],
            &BasisLabel::new().with("a", na).with("b", nb),
        )
        .unwrap()
    }

    #[test]
    fn exchange_full_swap() {
        let s = two_mode_state(1, 0, 4);
        let out = exchange(&s, "a", "b", &ExchangeParams::resonant(PI / 2.0)).unwrap();
        let pop = population(&out, &BasisLabel::new().with("a", 0).with("b", 1)).unwrap();
        assert!((pop - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exchange_half_swap_is_balanced() {
        let s = two_mode_state(1, 0, 4);
        let out = exchange(&s, "a", "b", &ExchangeParams::resonant(PI / 4.0)).unwrap();
        let p10 = population(&out, &BasisLabel::new().with("a", 1).with("b", 0)).unwrap();
        let p01 = population(&out, &BasisLabel::new().with("a", 0).with("b", 1)).unwrap();
        assert!((p10 - 0.5).abs() < 1e-12);
        assert!((p01 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn exchange_detuned_contrast() {
        // single-excitation sector reduces to a two-level problem:
        // max transfer = Omega^2 / (Omega^2 + (delta/2)^2) at the first maximum
        let omega = 1.0_f64;
        for ratio in [0.5, 1.0, 2.0] {
            let delta = ratio * omega;
            let t_max = PI / (4.0 * omega * omega + delta * delta).sqrt();
            let x = ExchangeParams { theta: omega * t_max, mode_detuning: delta, rate: omega };
            let out = exchange(&two_mode_state(1, 0, 4), "a", "b", &x).unwrap();
            let transferred =
                population(&out, &BasisLabel::new().with("a", 0).with("b", 1)).unwrap();
            let expect = omega * omega / (omega * omega + 0.25 * delta * delta);
            assert!(
                (transferred - expect).abs() < 1e-10,
                "ratio {ratio}: {transferred} vs {expect}"
            );
        }
    }

    #[test]
    fn exchange_double_swap_restores_populations() {
        // random state supported on total-n sectors that fit the cutoff,
        // where theta = pi/2 is an exact swap
        let n_max = 4usize;
        let mut stream = crate::stats::SeededStream::new(77, 0);
        let mut v = alloc::vec![Complex64::ZERO; (n_max + 1) * (n_max + 1)];
        for na in 0..=n_max {
            for nb in 0..=(n_max - na) {
                v[na * (n_max + 1) + nb] =
                    Complex64::new(stream.next_f64() - 0.5, stream.next_f64() - 0.5);
            }
        }
        let norm: f64 = v.iter().map(|a| a.norm_sqr()).sum::<f64>();
        let norm = norm.sqrt();
        for amp in v.iter_mut() {
            *amp /= norm;
        }
        let s = CompositeState::from_parts(
            vec![RegisterSpec::mode("a", n_max), RegisterSpec::mode("b", n_max)],
            CMatrix::outer(&v),
        )
        .unwrap();
        let x = ExchangeParams::resonant(PI / 2.0);
        let once = exchange(&s, "a", "b", &x).unwrap();
        let twice = exchange(&once, "a", "b", &x).unwrap();
        for na in 0..=n_max {
            for nb in 0..=n_max {
                let label = BasisLabel::new().with("a", na).with("b", nb);
                let before = population(&s, &label).unwrap();
                let after = population(&twice, &label).unwrap();
                assert!((before - after).abs() < 1e-10);
            }
        }
        // and a single pi/2 exchange swaps the reduced states
        let a_before = partial_trace(&s, &["a"]).unwrap();
        let b_after = partial_trace(&once, &["b"]).unwrap();
        for i in 0..=n_max {
            assert!((a_before.rho().get(i, i).re - b_after.rho().get(i, i).re).abs() < 1e-10);
        }
    }

    #[test]
    fn exchange_conserves_total_phonon_sectors() {
        let s = random_pure_state(
            vec![RegisterSpec::mode("a", 4), RegisterSpec::mode("b", 4)],
            123,
        );
        let x = ExchangeParams { theta: 0.7, mode_detuning: 0.9, rate: 1.3 };
        let out = exchange(&s, "a", "b", &x).unwrap();
        for total in 0..=8usize {
            let mut before = 0.0;
            let mut after = 0.0;
            for na in 0..5usize {
                if total >= na && total - na < 5 {
                    let label = BasisLabel::new().with("a", na).with("b", total - na);
                    before += population(&s, &label).unwrap();
                    after += population(&out, &label).unwrap();
                }
            }
            assert!((before - after).abs() < 1e-10, "sector {total} moved");
        }
        assert!((out.purity() - 1.0).abs() < 1e-10);
        assert!((out.trace() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn exchange_swaps_reduced_states() {
        let s = two_mode_state(3, 0, 5);
        let out = exchange(&s, "a", "b", &ExchangeParams::resonant(PI / 2.0)).unwrap();
        let a_before = partial_trace(&s, &["a"]).unwrap();
        let b_after = partial_trace(&out, &["b"]).unwrap();
        for i in 0..6 {
            assert!((a_before.rho().get(i, i).re - b_after.rho().get(i, i).re).abs() < 1e-12);
        }
    }

    #[test]
    fn exchange_shape_errors() {
        let s = tensor_modes(3, 5);
        assert!(matches!(
            exchange(&s, "a", "b", &ExchangeParams::resonant(0.3)).unwrap_err(),
            Error::DimMismatch { .. }
        ));
        let x = ExchangeParams { theta: 0.3, mode_detuning: 1.0, rate: 0.0 };
        let ok_dims = two_mode_state(0, 0, 3);
        assert!(matches!(exchange(&ok_dims, "a", "b", &x).unwrap_err(), Error::ConfigError(_)));
    }

    fn tensor_modes(na_max: usize, nb_max: usize) -> CompositeState {
        crate::state::tensor(
            &make_pure_state(
                vec![RegisterSpec::mode("a", na_max)],
                &BasisLabel::new().with("a", 0),
            )
            .unwrap(),
            &make_pure_state(
                vec![RegisterSpec::mode("b", nb_max)],
                &BasisLabel::new().with("b", 0),
            )
            .unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn pulses_preserve_purity_and_trace() {
        let s = random_pure_state(
            vec![RegisterSpec::spin("p"), RegisterSpec::mode("z", 4)],
            5,
        );
        let p = PulseParams { theta: 1.1, phi: 0.4, detuning: 0.6, duration: 0.8, n_cal: 0 };
        let out = carrier_pulse(&s, "p", &p).unwrap();
        assert!((out.trace() - 1.0).abs() < 1e-10);
        assert!((out.purity() - s.purity()).abs() < 1e-10);
        assert!(out.rho().max_hermiticity_defect() < 1e-12);
    }
}
