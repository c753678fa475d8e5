//! Composite quantum states of spins and truncated oscillator modes.
//!
//! The single state representation is a density operator over an ordered
//! list of labeled registers. Thermal initial states, measurement
//! back-action and classical mixtures are all first-class this way; at
//! the dimensions involved (a few hundred to ~1000) the cost is trivial.
//!
//! Spin basis convention, fixed everywhere: index 0 = |↓⟩, index 1 = |↑⟩.
//! Mode registers hold Fock occupation `n` directly as the basis index.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{eigh, sqrtm_psd, CMatrix};

/// Spin basis index of |↓⟩.
pub const SPIN_DOWN: usize = 0;
/// Spin basis index of |↑⟩.
pub const SPIN_UP: usize = 1;
/// Default Fock truncation (mode dimension is `n_max + 1`).
pub const DEFAULT_N_MAX: usize = 15;
/// Hard guard on population leaked past a mode's Fock cutoff.
pub const TRUNCATION_GUARD: f64 = 1e-9;

const HERMITICITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegisterKind {
    Spin,
    Mode,
}

/// One labeled register: a spin-1/2 or a truncated oscillator mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterSpec {
    pub label: String,
    pub kind: RegisterKind,
    pub dim: usize,
}

impl RegisterSpec {
    pub fn spin(label: &str) -> Self {
        RegisterSpec { label: label.to_string(), kind: RegisterKind::Spin, dim: 2 }
    }

    /// Mode register truncated at Fock level `n_max` (dimension `n_max + 1`).
    pub fn mode(label: &str, n_max: usize) -> Self {
        assert!(n_max >= 1, "mode registers need n_max >= 1");
        RegisterSpec { label: label.to_string(), kind: RegisterKind::Mode, dim: n_max + 1 }
    }
}

/// Assignment of basis indices to (a subset of) registers.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BasisLabel {
    assignments: Vec<(String, usize)>,
}

impl BasisLabel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, register: &str, index: usize) -> Self {
        self.assignments.push((register.to_string(), index));
        self
    }

    pub fn get(&self, register: &str) -> Option<usize> {
        self.assignments.iter().find(|(l, _)| l == register).map(|(_, i)| *i)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.assignments.iter().map(|(l, i)| (l.as_str(), *i))
    }
}

/// Density operator over an ordered list of labeled registers.
///
/// Immutable value type: every operation returns a new state.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeState {
    registers: Vec<RegisterSpec>,
    rho: CMatrix,
    pub trace_tolerance: f64,
}

fn check_unique_labels(registers: &[RegisterSpec]) -> Result<()> {
    for (i, r) in registers.iter().enumerate() {
        if registers[..i].iter().any(|o| o.label == r.label) {
            return Err(Error::DuplicateLabel(r.label.clone()));
        }
    }
    Ok(())
}

impl CompositeState {
    /// Builds a state from a raw density matrix, checking Hermiticity and
    /// normalization (and, in debug builds, positivity).
    pub fn from_parts(registers: Vec<RegisterSpec>, rho: CMatrix) -> Result<Self> {
        check_unique_labels(&registers)?;
        let dim: usize = registers.iter().map(|r| r.dim).product();
        if rho.dim() != dim {
            return Err(Error::ShapeMismatch);
        }
        let state = CompositeState { registers, rho, trace_tolerance: 1e-10 };
        state.validate()?;
        #[cfg(debug_assertions)]
        state.validate_positivity()?;
        Ok(state)
    }

    pub fn registers(&self) -> &[RegisterSpec] {
        &self.registers
    }

    pub fn rho(&self) -> &CMatrix {
        &self.rho
    }

    pub fn dim(&self) -> usize {
        self.rho.dim()
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.registers
            .iter()
            .position(|r| r.label == label)
            .ok_or_else(|| Error::UnknownRegister(label.to_string()))
    }

    pub fn register(&self, label: &str) -> Result<&RegisterSpec> {
        Ok(&self.registers[self.position(label)?])
    }

    fn dims(&self) -> Vec<usize> {
        self.registers.iter().map(|r| r.dim).collect()
    }

    fn strides(&self) -> Vec<usize> {
        let dims = self.dims();
        let mut strides = vec![1usize; dims.len()];
        for i in (0..dims.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * dims[i + 1];
        }
        strides
    }

    /// Flat basis index of a label covering every register.
    fn flat_index(&self, label: &BasisLabel) -> Result<usize> {
        let strides = self.strides();
        let mut seen = vec![false; self.registers.len()];
        let mut idx = 0usize;
        for (name, value) in label.iter() {
            let p = self.position(name)?;
            if value >= self.registers[p].dim {
                return Err(Error::IndexOutOfRange {
                    register: name.to_string(),
                    index: value,
                    dim: self.registers[p].dim,
                });
            }
            seen[p] = true;
            idx += value * strides[p];
        }
        if let Some(p) = seen.iter().position(|s| !s) {
            return Err(Error::UnknownRegister(alloc::format!(
                "{} (not assigned by the basis label)",
                self.registers[p].label
            )));
        }
        Ok(idx)
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    /// Tr(rho^2); 1 for pure states.
    pub fn purity(&self) -> f64 {
        self.rho.frobenius_sq()
    }

    /// Mean occupation number of a mode register.
    pub fn mean_occupation(&self, label: &str) -> Result<f64> {
        let p = self.position(label)?;
        if self.registers[p].kind != RegisterKind::Mode {
            return Err(Error::WrongRegisterKind { register: label.to_string(), expected: "mode" });
        }
        let map = self.subsystem_map(&[p]);
        let mut mean = 0.0;
        for n in 0..self.registers[p].dim {
            let mut pop = 0.0;
            for &off in &map.comp_offsets {
                let i = off + map.sub_offsets[n];
                pop += self.rho.get(i, i).re;
            }
            mean += n as f64 * pop;
        }
        Ok(mean)
    }

    /// Checks the Hermiticity and trace invariants.
    pub fn validate(&self) -> Result<()> {
        let defect = self.rho.max_hermiticity_defect();
        if defect > HERMITICITY_TOL {
            return Err(Error::ConfigError(alloc::format!(
                "density matrix not Hermitian (defect {defect:.3e})"
            )));
        }
        let trace = self.trace();
        if (trace - 1.0).abs() > self.trace_tolerance {
            return Err(Error::ConfigError(alloc::format!(
                "density matrix trace {trace} deviates from 1"
            )));
        }
        Ok(())
    }

    /// Positivity check (smallest eigenvalue >= -1e-10); O(dim^3).
    pub fn validate_positivity(&self) -> Result<()> {
        let (vals, _) = eigh(&self.rho);
        if let Some(&min) = vals.first() {
            if min < -1e-10 {
                return Err(Error::ConfigError(alloc::format!(
                    "density matrix not positive semidefinite (min eigenvalue {min:.3e})"
                )));
            }
        }
        Ok(())
    }

    fn subsystem_map(&self, positions: &[usize]) -> SubsystemMap {
        subsystem_map(&self.dims(), &self.strides(), positions)
    }

    /// Applies a unitary given on the tensor factor of `labels` (in the
    /// listed order) to the full state: rho -> U rho U†.
    ///
    /// Zero entries of `u` are skipped, so block-structured unitaries cost
    /// only their nonzero pattern.
    pub fn apply_unitary(&self, labels: &[&str], u: &CMatrix) -> Result<CompositeState> {
        let positions: Vec<usize> =
            labels.iter().map(|l| self.position(l)).collect::<Result<_>>()?;
        for (i, p) in positions.iter().enumerate() {
            if positions[..i].contains(p) {
                return Err(Error::DuplicateLabel(labels[i].to_string()));
            }
        }
        let map = self.subsystem_map(&positions);
        if u.dim() != map.sub_dim {
            return Err(Error::ShapeMismatch);
        }
        let nz: Vec<(usize, usize, Complex64)> = (0..u.dim())
            .flat_map(|r| (0..u.dim()).map(move |c| (r, c)))
            .filter_map(|(r, c)| {
                let v = u.get(r, c);
                (v != Complex64::ZERO).then_some((r, c, v))
            })
            .collect();

        // rho' = U rho U† = (U (U rho)†)†, built from row operations only.
        let b = structured_left_mul(&nz, &map, &self.rho);
        let c = structured_left_mul(&nz, &map, &b.adjoint());
        let rho = c.adjoint();
        Ok(CompositeState { registers: self.registers.clone(), rho, trace_tolerance: self.trace_tolerance })
    }

    /// Replaces one register with a fresh k x k state `sigma`, keeping its
    /// position: rho -> sigma (x) Tr_register(rho), reassembled in place.
    pub fn replace_register(&self, label: &str, sigma: &CMatrix) -> Result<CompositeState> {
        let p = self.position(label)?;
        let k = self.registers[p].dim;
        if sigma.dim() != k {
            return Err(Error::ShapeMismatch);
        }
        let map = self.subsystem_map(&[p]);
        let nc = map.comp_offsets.len();
        // reduced state over the complement
        let mut reduced = CMatrix::zeros(nc);
        for (ci, &co) in map.comp_offsets.iter().enumerate() {
            for (cj, &co2) in map.comp_offsets.iter().enumerate() {
                let mut acc = Complex64::ZERO;
                for m in 0..k {
                    acc += self.rho.get(co + map.sub_offsets[m], co2 + map.sub_offsets[m]);
                }
                reduced.set(ci, cj, acc);
            }
        }
        let mut rho = CMatrix::zeros(self.dim());
        for i in 0..k {
            for j in 0..k {
                let s = sigma.get(i, j);
                if s == Complex64::ZERO {
                    continue;
                }
                for (ci, &co) in map.comp_offsets.iter().enumerate() {
                    for (cj, &co2) in map.comp_offsets.iter().enumerate() {
                        rho.set(
                            co + map.sub_offsets[i],
                            co2 + map.sub_offsets[j],
                            s * reduced.get(ci, cj),
                        );
                    }
                }
            }
        }
        Ok(CompositeState { registers: self.registers.clone(), rho, trace_tolerance: self.trace_tolerance })
    }

    /// rho -> M rho M† with M diagonal on one register (M = diag over that
    /// register's basis, identity elsewhere). Not trace preserving; the
    /// caller renormalizes.
    pub(crate) fn scale_register_diagonal(&self, label: &str, m: &[f64]) -> Result<CompositeState> {
        let p = self.position(label)?;
        if m.len() != self.registers[p].dim {
            return Err(Error::ShapeMismatch);
        }
        let digits = self.register_digits(p);
        let n = self.dim();
        let mut rho = self.rho.clone();
        for r in 0..n {
            let mr = m[digits[r]];
            for c in 0..n {
                let v = rho.get(r, c);
                rho.set(r, c, v * (mr * m[digits[c]]));
            }
        }
        Ok(CompositeState { registers: self.registers.clone(), rho, trace_tolerance: self.trace_tolerance })
    }

    /// Scales coherences between different basis states of one register by
    /// `gamma`, leaving populations untouched.
    pub(crate) fn dephase_register(&self, label: &str, gamma: f64) -> Result<CompositeState> {
        let p = self.position(label)?;
        let digits = self.register_digits(p);
        let n = self.dim();
        let mut rho = self.rho.clone();
        for r in 0..n {
            for c in 0..n {
                if digits[r] != digits[c] {
                    let v = rho.get(r, c);
                    rho.set(r, c, v * gamma);
                }
            }
        }
        Ok(CompositeState { registers: self.registers.clone(), rho, trace_tolerance: self.trace_tolerance })
    }

    /// One heating step on a mode register: with weight `w` the mode's
    /// populations shift up by one quantum (diagonal transport, coherences
    /// of the mode dropped from the shifted part), with weight `1 - w` the
    /// state is untouched. The top Fock level saturates; the weight that
    /// hit the saturation is returned so callers can enforce the guard.
    pub(crate) fn shift_mix_register(&self, label: &str, w: f64) -> Result<(CompositeState, f64)> {
        let p = self.position(label)?;
        if self.registers[p].kind != RegisterKind::Mode {
            return Err(Error::WrongRegisterKind { register: label.to_string(), expected: "mode" });
        }
        let k = self.registers[p].dim;
        let map = self.subsystem_map(&[p]);
        let mut rho = self.rho.clone();
        rho.scale(1.0 - w);
        let mut top_population = 0.0;
        for m in 0..k {
            let m2 = (m + 1).min(k - 1);
            for &co in &map.comp_offsets {
                let r_src = co + map.sub_offsets[m];
                let r_dst = co + map.sub_offsets[m2];
                for &co2 in &map.comp_offsets {
                    let c_src = co2 + map.sub_offsets[m];
                    let c_dst = co2 + map.sub_offsets[m2];
                    let v = self.rho.get(r_src, c_src);
                    rho.add_assign_at(r_dst, c_dst, w * v);
                }
            }
            if m == k - 1 {
                for &co in &map.comp_offsets {
                    let i = co + map.sub_offsets[m];
                    top_population += self.rho.get(i, i).re;
                }
            }
        }
        let state =
            CompositeState { registers: self.registers.clone(), rho, trace_tolerance: self.trace_tolerance };
        Ok((state, w * top_population))
    }

    /// Rescales the state back to unit trace after a trace-decreasing map.
    pub(crate) fn renormalized(mut self) -> Result<CompositeState> {
        let trace = self.trace();
        if !(trace > 1e-300) {
            return Err(Error::ConfigError("state trace collapsed to zero".into()));
        }
        self.rho.scale(1.0 / trace);
        Ok(self)
    }

    /// Basis digit of register `position` for every flat index.
    fn register_digits(&self, position: usize) -> Vec<usize> {
        let stride = self.strides()[position];
        let dim = self.registers[position].dim;
        (0..self.dim()).map(|i| (i / stride) % dim).collect()
    }
}

struct SubsystemMap {
    sub_dim: usize,
    /// Flat-matrix offset contributed by each subsystem index.
    sub_offsets: Vec<usize>,
    /// Flat-matrix offset contributed by each complement index.
    comp_offsets: Vec<usize>,
}

fn subsystem_map(dims: &[usize], strides: &[usize], positions: &[usize]) -> SubsystemMap {
    let sub_dims: Vec<usize> = positions.iter().map(|&p| dims[p]).collect();
    let sub_dim: usize = sub_dims.iter().product();
    let mut sub_offsets = vec![0usize; sub_dim];
    for (s, off) in sub_offsets.iter_mut().enumerate() {
        let mut rem = s;
        for (k, &p) in positions.iter().enumerate().rev() {
            let d = sub_dims[k];
            *off += (rem % d) * strides[p];
            rem /= d;
        }
    }
    let comp_positions: Vec<usize> =
        (0..dims.len()).filter(|p| !positions.contains(p)).collect();
    let comp_dim: usize = comp_positions.iter().map(|&p| dims[p]).product();
    let mut comp_offsets = vec![0usize; comp_dim];
    for (c, off) in comp_offsets.iter_mut().enumerate() {
        let mut rem = c;
        for &p in comp_positions.iter().rev() {
            let d = dims[p];
            *off += (rem % d) * strides[p];
            rem /= d;
        }
    }
    SubsystemMap { sub_dim, sub_offsets, comp_offsets }
}

/// dst = U_sub rho, where U_sub acts on the mapped subsystem and is given
/// by its nonzero entries; pure row operations.
fn structured_left_mul(
    nz: &[(usize, usize, Complex64)],
    map: &SubsystemMap,
    rho: &CMatrix,
) -> CMatrix {
    let n = rho.dim();
    let mut out = CMatrix::zeros(n);
    for &(r, c, u) in nz {
        for &off in &map.comp_offsets {
            let dst_row = off + map.sub_offsets[r];
            let src_row = off + map.sub_offsets[c];
            let src = rho.row(src_row);
            let dst = &mut out.data_mut()[dst_row * n..(dst_row + 1) * n];
            for j in 0..n {
                dst[j] += u * src[j];
            }
        }
    }
    out
}

/// Pure basis state |label⟩⟨label| over the given registers.
pub fn make_pure_state(registers: Vec<RegisterSpec>, label: &BasisLabel) -> Result<CompositeState> {
    check_unique_labels(&registers)?;
    let dim: usize = registers.iter().map(|r| r.dim).product();
    let probe = CompositeState {
        registers,
        rho: CMatrix::zeros(dim),
        trace_tolerance: 1e-10,
    };
    let idx = probe.flat_index(label)?;
    let mut rho = CMatrix::zeros(dim);
    rho.set(idx, idx, Complex64::ONE);
    Ok(CompositeState { rho, ..probe })
}

/// Population weight of a geometric thermal distribution beyond `n_max`.
pub fn thermal_tail_weight(nbar: f64, n_max: usize) -> f64 {
    if nbar <= 0.0 {
        return 0.0;
    }
    (nbar / (nbar + 1.0)).powi(n_max as i32 + 1)
}

/// Single-mode thermal state with mean occupation `nbar`, truncated at
/// `n_max` and renormalized. Errors if the truncated tail exceeds the
/// 1e-9 guard rather than renormalizing it away silently.
pub fn make_thermal_mode(label: &str, nbar: f64, n_max: usize) -> Result<CompositeState> {
    if !(nbar >= 0.0) || !nbar.is_finite() {
        return Err(Error::ConfigError(alloc::format!("thermal nbar must be finite and >= 0, got {nbar}")));
    }
    if n_max < 1 {
        return Err(Error::ConfigError("thermal mode needs n_max >= 1".into()));
    }
    let leaked = thermal_tail_weight(nbar, n_max);
    if leaked > TRUNCATION_GUARD {
        return Err(Error::TruncationError { leaked });
    }
    let dim = n_max + 1;
    let mut rho = CMatrix::zeros(dim);
    let mut total = 0.0;
    let mut weights = Vec::with_capacity(dim);
    for n in 0..dim {
        let w = (nbar / (nbar + 1.0)).powi(n as i32) / (nbar + 1.0);
        weights.push(w);
        total += w;
    }
    for (n, w) in weights.into_iter().enumerate() {
        rho.set(n, n, Complex64::new(w / total, 0.0));
    }
    Ok(CompositeState {
        registers: vec![RegisterSpec::mode(label, n_max)],
        rho,
        trace_tolerance: 1e-10,
    })
}

/// Tensor product of two states; register labels must be disjoint.
pub fn tensor(a: &CompositeState, b: &CompositeState) -> Result<CompositeState> {
    let mut registers = a.registers.clone();
    registers.extend(b.registers.iter().cloned());
    check_unique_labels(&registers)?;
    Ok(CompositeState {
        registers,
        rho: a.rho.kron(&b.rho),
        trace_tolerance: a.trace_tolerance.max(b.trace_tolerance),
    })
}

/// Reduced density operator over `keep`, in the original register order.
pub fn partial_trace(s: &CompositeState, keep: &[&str]) -> Result<CompositeState> {
    if keep.is_empty() {
        return Err(Error::ConfigError("partial_trace needs at least one register to keep".into()));
    }
    let mut positions: Vec<usize> = keep.iter().map(|l| s.position(l)).collect::<Result<_>>()?;
    positions.sort_unstable();
    positions.dedup();
    let map = s.subsystem_map(&positions);
    let kept: Vec<RegisterSpec> = positions.iter().map(|&p| s.registers[p].clone()).collect();
    let k = map.sub_dim;
    let mut rho = CMatrix::zeros(k);
    for i in 0..k {
        for j in 0..k {
            let mut acc = Complex64::ZERO;
            for &off in &map.comp_offsets {
                acc += s.rho.get(off + map.sub_offsets[i], off + map.sub_offsets[j]);
            }
            rho.set(i, j, acc);
        }
    }
    Ok(CompositeState { registers: kept, rho, trace_tolerance: s.trace_tolerance })
}

/// Probability of finding the registers assigned by `partial` at the given
/// basis indices (diagonal sum over everything else). Clamped to [0, 1].
pub fn population(s: &CompositeState, partial: &BasisLabel) -> Result<f64> {
    let mut positions = Vec::new();
    let mut sub_index_digits = Vec::new();
    for (name, value) in partial.iter() {
        let p = s.position(name)?;
        if value >= s.registers[p].dim {
            return Err(Error::IndexOutOfRange {
                register: name.to_string(),
                index: value,
                dim: s.registers[p].dim,
            });
        }
        positions.push(p);
        sub_index_digits.push(value);
    }
    let map = s.subsystem_map(&positions);
    // flat subsystem index of the requested assignment
    let mut sub = 0usize;
    for (k, &p) in positions.iter().enumerate() {
        let d = s.registers[p].dim;
        sub = sub * d + sub_index_digits[k];
        let _ = d;
    }
    let mut acc = 0.0;
    for &off in &map.comp_offsets {
        let i = off + map.sub_offsets[sub];
        acc += s.rho.get(i, i).re;
    }
    Ok(acc.clamp(0.0, 1.0))
}

/// Uhlmann fidelity F(a, b) = (Tr sqrt(sqrt(a) b sqrt(a)))^2.
///
/// Reduces to |⟨psi|phi⟩|^2 for pure states. Requires identical register
/// layouts.
pub fn fidelity(a: &CompositeState, b: &CompositeState) -> Result<f64> {
    if a.registers != b.registers {
        return Err(Error::ShapeMismatch);
    }
    let ra = sqrtm_psd(&a.rho);
    let m = ra.matmul(&b.rho).matmul(&ra);
    let (vals, _) = eigh(&m);
    let root_sum: f64 = vals.iter().map(|&v| v.max(0.0).sqrt()).sum();
    Ok((root_sum * root_sum).clamp(0.0, 1.0))
}
