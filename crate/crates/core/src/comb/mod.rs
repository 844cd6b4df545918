//! Sequential quantum combs.
//!
//! A comb with `m` slots is a list of teeth `V_0 … V_m`. Every tooth acts on
//! the ancilla register (wires `0 .. n_a`) plus the main wire (wire `n_a`).
//! The ancillas start in `|0…0⟩` and are threaded through all teeth; slot `k`
//! sits on the main wire between `V_{k-1}` and `V_k`.
//!
//! Choi operators live on the layout `(P, I_1, O_1, …, I_m, O_m, F)`, where
//! `P`/`F` are the main-register input/output, `I_k` is what the comb sends
//! into slot `k` and `O_k` what comes back. Every pair is input-first: the
//! Choi operator of a channel `N` on `(A, B)` is `Σ |i⟩⟨j|_A ⊗ N(|i⟩⟨j|)_B`.

mod omega;

pub use omega::{build_performance_operator, performance_vector, sha256_hex, PerformanceOperator};

use crate::circuit::{check_params, complex_entangled_layer_at, euler_layer_at, Circuit, Gate, Program};
use crate::qmath::{reduced_density, ComplexMatrix, StateVector, SubsystemLayout, C64};
use crate::{Error, Result};

/// What happens to the ancilla register after the last tooth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum AncillaOutput {
    /// Traced out (terminal projector = identity).
    #[default]
    TraceOut,
    /// Only the `|0…0⟩` branch counts; nothing is renormalized, so a comb
    /// scores 1 only if it deterministically returns the ancillas to zero.
    Reset,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CombSpec {
    ancilla_qubits: usize,
    teeth: Vec<Circuit>,
    num_params: usize,
    ancilla_output: AncillaOutput,
}

impl CombSpec {
    /// Teeth share one parameter vector; builders give each tooth its own
    /// index range so the total count is the sum over teeth.
    pub fn new(ancilla_qubits: usize, teeth: Vec<Circuit>) -> Result<Self> {
        if teeth.is_empty() {
            return Err(Error::Config("a comb needs at least one tooth".into()));
        }
        for t in &teeth {
            if t.num_qubits() != ancilla_qubits + 1 {
                return Err(Error::DimensionMismatch { expected: ancilla_qubits + 1, found: t.num_qubits() });
            }
        }
        let num_params = teeth.iter().map(Circuit::num_params).max().unwrap_or(0);
        Ok(Self { ancilla_qubits, teeth, num_params, ancilla_output: AncillaOutput::TraceOut })
    }

    pub fn with_ancilla_output(mut self, output: AncillaOutput) -> Self {
        self.ancilla_output = output;
        self
    }

    pub fn slots(&self) -> usize {
        self.teeth.len() - 1
    }

    pub fn main_qubits(&self) -> usize {
        1
    }

    pub fn ancilla_qubits(&self) -> usize {
        self.ancilla_qubits
    }

    pub fn teeth(&self) -> &[Circuit] {
        &self.teeth
    }

    pub fn num_params(&self) -> usize {
        self.num_params
    }

    pub fn ancilla_output(&self) -> AncillaOutput {
        self.ancilla_output
    }

    /// Wire index of the main register inside each tooth.
    pub fn main_wire(&self) -> usize {
        self.ancilla_qubits
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        for t in &self.teeth {
            check_params(t, params)?;
        }
        Ok(())
    }

    fn check_slots(&self, slots: &[ComplexMatrix]) -> Result<()> {
        if slots.len() != self.slots() {
            return Err(Error::SlotCount { expected: self.slots(), found: slots.len() });
        }
        for u in slots {
            if u.rows() != 2 || u.cols() != 2 {
                return Err(Error::DimensionMismatch { expected: 2, found: u.rows() });
            }
            let d = u.unitarity_defect();
            if d > 1e-10 {
                return Err(Error::NotUnitary(d));
            }
        }
        Ok(())
    }

    /// The circuit on `n_a + 1` wires obtained by plugging `slots` in.
    pub fn realize(&self, slots: &[ComplexMatrix]) -> Result<Circuit> {
        self.check_slots(slots)?;
        let mut c = Circuit::new(self.ancilla_qubits + 1);
        c.reserve_params(self.num_params);
        for (k, tooth) in self.teeth.iter().enumerate() {
            if k > 0 {
                c.push(Gate::fixed(format!("U{k}"), slots[k - 1].clone(), vec![self.main_wire()]))?;
            }
            c.extend(tooth)?;
        }
        Ok(c)
    }

    /// Compiled purification of the comb's Choi operator.
    pub fn compile(&self) -> Result<CompiledComb> {
        CompiledComb::new(self)
    }
}

/// Layout `(P, I_1, O_1, …, I_m, O_m, F)` of qubits.
pub fn choi_layout(slots: usize) -> SubsystemLayout {
    let mut labels = vec!["P".to_string()];
    for k in 1..=slots {
        labels.push(format!("I{k}"));
        labels.push(format!("O{k}"));
    }
    labels.push("F".to_string());
    SubsystemLayout::qubits(labels).expect("labels are unique")
}

/// Input-first vectorization `Σ_j |j⟩ ⊗ U|j⟩` of a `d × d` matrix, equal to
/// `choi_vec(Uᵀ)`.
pub fn link_vec(u: &ComplexMatrix) -> Vec<C64> {
    let d = u.rows();
    let mut v = Vec::with_capacity(d * d);
    for a in 0..d {
        for b in 0..d {
            v.push(u[(b, a)]);
        }
    }
    v
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChoiOperator {
    pub layout: SubsystemLayout,
    pub matrix: ComplexMatrix,
}

const CHOI_MAGIC: &[u8; 8] = b"QCOMBCHI";
const CHOI_VERSION: u32 = 1;

impl ChoiOperator {
    /// Binary dump, little-endian:
    ///
    /// | field         | type |
    /// |---------------|------|
    /// | magic         | `b"QCOMBCHI"` |
    /// | version       | u32 (= 1) |
    /// | subsystems    | u32 |
    /// | per subsystem | label length u32, UTF-8 label, dim u64 |
    /// | config length | u64, then UTF-8 config |
    /// | dim           | u64 |
    /// | entries       | `dim²` × (re f64, im f64), row-major |
    pub fn write_to(&self, mut w: impl std::io::Write, config: &str) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(CHOI_MAGIC);
        buf.extend_from_slice(&CHOI_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.layout.parts().len() as u32).to_le_bytes());
        for part in self.layout.parts() {
            buf.extend_from_slice(&(part.label.len() as u32).to_le_bytes());
            buf.extend_from_slice(part.label.as_bytes());
            buf.extend_from_slice(&(part.dim as u64).to_le_bytes());
        }
        buf.extend_from_slice(&(config.len() as u64).to_le_bytes());
        buf.extend_from_slice(config.as_bytes());
        buf.extend_from_slice(&(self.matrix.rows() as u64).to_le_bytes());
        w.write_all(&buf)?;
        let mut row = Vec::with_capacity(self.matrix.cols() * 16);
        for chunk in self.matrix.data().chunks(self.matrix.cols()) {
            row.clear();
            for z in chunk {
                row.extend_from_slice(&z.re.to_le_bytes());
                row.extend_from_slice(&z.im.to_le_bytes());
            }
            w.write_all(&row)?;
        }
        Ok(())
    }

    /// Reads a dump written by [`write_to`](Self::write_to); returns the
    /// operator and the embedded config.
    pub fn read_from(mut r: impl std::io::Read) -> Result<(Self, String)> {
        fn take<const N: usize>(r: &mut impl std::io::Read) -> Result<[u8; N]> {
            let mut b = [0u8; N];
            r.read_exact(&mut b)?;
            Ok(b)
        }
        fn string(r: &mut impl std::io::Read, len: usize) -> Result<String> {
            let mut b = vec![0u8; len];
            r.read_exact(&mut b)?;
            String::from_utf8(b).map_err(|_| Error::Format("invalid UTF-8".into()))
        }
        if &take::<8>(&mut r)? != CHOI_MAGIC {
            return Err(Error::Format("not a Choi dump".into()));
        }
        let version = u32::from_le_bytes(take(&mut r)?);
        if version != CHOI_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let parts = u32::from_le_bytes(take(&mut r)?) as usize;
        if parts > 64 {
            return Err(Error::Format(format!("{parts} subsystems")));
        }
        let mut labels = Vec::with_capacity(parts);
        for _ in 0..parts {
            let len = u32::from_le_bytes(take(&mut r)?) as usize;
            let label = string(&mut r, len)?;
            let dim = u64::from_le_bytes(take(&mut r)?) as usize;
            labels.push((label, dim));
        }
        let layout = SubsystemLayout::new(labels)?;
        let config_len = u64::from_le_bytes(take(&mut r)?) as usize;
        let config = string(&mut r, config_len)?;
        let dim = u64::from_le_bytes(take(&mut r)?) as usize;
        if dim != layout.dim() {
            return Err(Error::Format(format!("matrix dim {dim} vs layout dim {}", layout.dim())));
        }
        let mut bytes = vec![0u8; dim * dim * 16];
        r.read_exact(&mut bytes)?;
        let data = bytes
            .chunks_exact(16)
            .map(|b| {
                C64::new(
                    f64::from_le_bytes(b[..8].try_into().unwrap()),
                    f64::from_le_bytes(b[8..].try_into().unwrap()),
                )
            })
            .collect();
        Ok((Self { layout, matrix: ComplexMatrix::from_vec(dim, dim, data)? }, config))
    }

    /// `(1/d²) ⟨⟨V|J|V⟩⟩` against a target unitary on a `(P, F)` Choi
    /// operator: the entanglement fidelity.
    pub fn entanglement_fidelity(&self, target: &ComplexMatrix) -> Result<f64> {
        let d = target.rows();
        if self.matrix.rows() != d * d {
            return Err(Error::LayoutMismatch(format!(
                "{}-dim Choi operator vs {d}-dim target",
                self.matrix.rows()
            )));
        }
        let v = link_vec(target);
        let jv = self.matrix.apply(&v);
        let overlap: C64 = v.iter().zip(&jv).map(|(a, b)| a.conj() * b).sum();
        Ok(overlap.re / (d * d) as f64)
    }
}

/// Choi operator on `(P, F)` of the channel obtained by inserting `slots`.
pub fn output_channel(comb: &CombSpec, params: &[f64], slots: &[ComplexMatrix]) -> Result<ChoiOperator> {
    comb.check_params(params)?;
    let circuit = comb.realize(slots)?;
    let na = comb.ancilla_qubits;
    // Register: P, ancillas, main.
    let n = na + 2;
    let wires: Vec<usize> = (1..n).collect();
    let program = Program::compile(&circuit, &wires, n)?;
    let mut amps = vec![C64::new(0.0, 0.0); 1 << n];
    amps[0] = C64::new(1.0, 0.0);
    amps[(1 << (n - 1)) | 1] = C64::new(1.0, 0.0);
    program.run(&mut amps, params);

    let layout = SubsystemLayout::qubits(["P", "F"])?;
    let matrix = match comb.ancilla_output {
        AncillaOutput::TraceOut => {
            let mut labels = vec!["P".to_string()];
            labels.extend((0..na).map(|a| format!("a{a}")));
            labels.push("F".into());
            let full = SubsystemLayout::qubits(labels)?;
            reduced_density(&StateVector::from_amplitudes(amps)?, &full, &["P", "F"])?.0
        }
        AncillaOutput::Reset => {
            let stride = 1usize << (na + 1);
            let branch: Vec<C64> = (0..4).map(|i| amps[(i >> 1) * stride + (i & 1)]).collect();
            StateVector::from_amplitudes(branch)?.density()
        }
    };
    Ok(ChoiOperator { layout, matrix })
}

/// Dense Choi operator of the comb over [`choi_layout`]. Dimension
/// `2^(2m+2)`; prefer [`CompiledComb`] for anything performance-sensitive.
pub fn comb_choi(comb: &CombSpec, params: &[f64]) -> Result<ChoiOperator> {
    let compiled = comb.compile()?;
    let phi = compiled.purification(params)?;
    let d = compiled.system_dim();
    let mut matrix = ComplexMatrix::zeros(d, d);
    for slice in compiled.kept_slices(&phi) {
        for i in 0..d {
            if slice[i] == C64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..d {
                matrix[(i, j)] += slice[i] * slice[j].conj();
            }
        }
    }
    Ok(ChoiOperator { layout: choi_layout(comb.slots()), matrix })
}

/// Purification of a comb's Choi operator as a single circuit.
///
/// Register: ancillas, then `P, I_1, O_1, …, I_m, O_m, F`. The initial state
/// is `|0…0⟩ ⊗ Ψ_{P,I_1} ⊗ Ψ_{O_1,I_2} ⊗ … ⊗ Ψ_{O_m,F}` with
/// `Ψ = |00⟩ + |11⟩`, and tooth `k` acts on the ancillas and the partner wire
/// that becomes `I_{k+1}` (or `F` for the last tooth). The Choi operator is the
/// ancilla-reduced state (or its `|0…0⟩` block, for [`AncillaOutput::Reset`]).
#[derive(Clone, Debug)]
pub struct CompiledComb {
    slots: usize,
    ancilla_qubits: usize,
    num_params: usize,
    output: AncillaOutput,
    program: Program,
    initial: Vec<C64>,
}

impl CompiledComb {
    pub fn new(comb: &CombSpec) -> Result<Self> {
        let (m, na) = (comb.slots(), comb.ancilla_qubits);
        let n = na + 2 * m + 2;
        let mut program = Program::new(n);
        for (k, tooth) in comb.teeth.iter().enumerate() {
            let mut wires: Vec<usize> = (0..na).collect();
            wires.push(na + 2 * k + 1);
            program.append(tooth, &wires)?;
        }
        let sys_bits = 2 * m + 2;
        let mut initial = vec![C64::new(0.0, 0.0); 1 << n];
        for pairs in 0..1usize << (m + 1) {
            let idx = (0..=m).fold(0usize, |acc, p| {
                let b = (pairs >> (m - p)) & 1;
                (acc << 2) | (b << 1) | b
            });
            debug_assert!(idx < 1 << sys_bits);
            initial[idx] = C64::new(1.0, 0.0);
        }
        Ok(Self {
            slots: m,
            ancilla_qubits: na,
            num_params: comb.num_params,
            output: comb.ancilla_output,
            program,
            initial,
        })
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn num_params(&self) -> usize {
        self.num_params
    }

    pub fn ancilla_qubits(&self) -> usize {
        self.ancilla_qubits
    }

    /// Dimension of the `(P, I, O, …, F)` system, `2^(2m+2)`.
    pub fn system_dim(&self) -> usize {
        1 << (2 * self.slots + 2)
    }

    pub fn purification(&self, params: &[f64]) -> Result<Vec<C64>> {
        if params.len() < self.num_params {
            return Err(Error::DimensionMismatch { expected: self.num_params, found: params.len() });
        }
        let mut phi = self.initial.clone();
        self.program.run(&mut phi, params);
        Ok(phi)
    }

    /// Ancilla slices of a purification that contribute to the Choi operator.
    fn kept_slices<'a>(&self, phi: &'a [C64]) -> impl Iterator<Item = &'a [C64]> {
        let take = match self.output {
            AncillaOutput::TraceOut => usize::MAX,
            AncillaOutput::Reset => 1,
        };
        phi.chunks_exact(self.system_dim()).take(take)
    }

    fn check_omega(&self, omega: &PerformanceOperator) -> Result<()> {
        if omega.slots() != self.slots {
            return Err(Error::LayoutMismatch(format!(
                "comb has {} slot(s) but the performance operator was built for {}",
                self.slots,
                omega.slots()
            )));
        }
        Ok(())
    }

    /// `tr[C Ω]`.
    pub fn score(&self, params: &[f64], omega: &PerformanceOperator) -> Result<f64> {
        self.check_omega(omega)?;
        let phi = self.purification(params)?;
        Ok(self.kept_slices(&phi).map(|s| omega.expectation(s)).sum())
    }

    /// `tr[C Ω]` evaluated against every stored sample vector instead of the
    /// compressed form. Slower; used as a cross-check.
    pub fn score_direct(&self, params: &[f64], omega: &PerformanceOperator) -> Result<f64> {
        self.check_omega(omega)?;
        let phi = self.purification(params)?;
        Ok(self.kept_slices(&phi).map(|s| omega.expectation_direct(s)).sum())
    }

    /// `tr[C Ω]` and its gradient.
    pub fn score_gradient(&self, params: &[f64], omega: &PerformanceOperator) -> Result<(f64, Vec<f64>)> {
        self.check_omega(omega)?;
        if params.len() < self.num_params {
            return Err(Error::DimensionMismatch { expected: self.num_params, found: params.len() });
        }
        let d = self.system_dim();
        let keep = match self.output {
            AncillaOutput::TraceOut => usize::MAX,
            AncillaOutput::Reset => 1,
        };
        Ok(self.program.expectation_gradient(&self.initial, params, |phi| {
            let mut value = 0.0;
            let mut lambda = vec![C64::new(0.0, 0.0); phi.len()];
            for (a, (slice, out)) in phi.chunks_exact(d).zip(lambda.chunks_exact_mut(d)).enumerate() {
                if a >= keep {
                    break;
                }
                value += omega.expectation_apply(slice, out);
            }
            (value, lambda)
        }))
    }
}

/// Comb-based loss `1 − tr[C(θ) Ω]`.
pub fn loss_comb(comb: &CombSpec, params: &[f64], omega: &PerformanceOperator) -> Result<f64> {
    comb.check_params(params)?;
    Ok(1.0 - comb.compile()?.score(params, omega)?)
}

/// Process-based loss: mean over samples of `1 − S`, with `S` the
/// entanglement fidelity between the realized channel and the target.
pub fn loss_process(
    comb: &CombSpec,
    params: &[f64],
    samples: &[Vec<ComplexMatrix>],
    targets: &[ComplexMatrix],
) -> Result<f64> {
    if samples.len() != targets.len() {
        return Err(Error::DimensionMismatch { expected: samples.len(), found: targets.len() });
    }
    if samples.is_empty() {
        return Err(Error::Config("no samples".into()));
    }
    let mut acc = 0.0;
    for (slots, target) in samples.iter().zip(targets) {
        acc += 1.0 - output_channel(comb, params, slots)?.entanglement_fidelity(target)?;
    }
    Ok(acc / samples.len() as f64)
}

/// Generic trainable comb: every tooth is `depth` entangled layers on the
/// `n_a + 1` tooth wires (single-qubit Euler layers when `n_a = 0`).
pub fn generic_comb(slots: usize, ancilla_qubits: usize, depth: usize) -> Result<CombSpec> {
    let width = ancilla_qubits + 1;
    let mut offset = 0;
    let mut teeth = Vec::with_capacity(slots + 1);
    for _ in 0..=slots {
        let tooth = if width >= 2 {
            complex_entangled_layer_at(width, depth, offset)?
        } else {
            let mut c = Circuit::new(1);
            let mut p = offset;
            for _ in 0..depth {
                p = euler_layer_at(&mut c, &[0], p)?;
            }
            c.reserve_params(p);
            c
        };
        offset = tooth.num_params();
        teeth.push(tooth);
    }
    CombSpec::new(ancilla_qubits, teeth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::{haar_su2, RandomSource};

    fn identity_comb(slots: usize, ancillas: usize) -> CombSpec {
        CombSpec::new(ancillas, vec![Circuit::new(ancillas + 1); slots + 1]).unwrap()
    }

    #[test]
    fn identity_comb_passes_slot_through() {
        let mut rng = RandomSource::new(1);
        let u = haar_su2(&mut rng);
        let comb = identity_comb(1, 2);
        let j = output_channel(&comb, &[], std::slice::from_ref(&u)).unwrap();
        let v = link_vec(&u);
        let expected = ComplexMatrix::from_fn(4, 4, |i, k| v[i] * v[k].conj());
        assert!(j.matrix.max_abs_diff(&expected) < 1e-14);
        assert!((j.entanglement_fidelity(&u).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn slot_count_is_checked() {
        let comb = identity_comb(2, 0);
        let err = output_channel(&comb, &[], &[ComplexMatrix::identity(2)]).unwrap_err();
        assert!(matches!(err, Error::SlotCount { expected: 2, found: 1 }));
    }

    #[test]
    fn zero_slot_identity_choi_is_psi() {
        let comb = identity_comb(0, 1);
        let c = comb_choi(&comb, &[]).unwrap();
        let one = C64::new(1.0, 0.0);
        let mut psi = ComplexMatrix::zeros(4, 4);
        for (i, j) in [(0, 0), (0, 3), (3, 0), (3, 3)] {
            psi[(i, j)] = one;
        }
        assert_eq!(c.matrix, psi);
        assert_eq!(c.layout.labels().collect::<Vec<_>>(), ["P", "F"]);
    }

    #[test]
    fn choi_dump_round_trip() {
        let comb = generic_comb(1, 1, 1).unwrap();
        let params: Vec<f64> = (0..comb.num_params()).map(|i| 0.1 * i as f64).collect();
        let c = comb_choi(&comb, &params).unwrap();
        let mut buf = Vec::new();
        c.write_to(&mut buf, "m = 1\n").unwrap();
        let (back, cfg) = ChoiOperator::read_from(&buf[..]).unwrap();
        assert_eq!((back, cfg.as_str()), (c, "m = 1\n"));
        assert!(ChoiOperator::read_from(&buf[..buf.len() - 3]).is_err());
    }

    #[test]
    fn generic_comb_param_layout() {
        let comb = generic_comb(2, 1, 3).unwrap();
        assert_eq!(comb.slots(), 2);
        assert_eq!(comb.num_params(), 3 * 3 * 2 * 3);
        let c0 = generic_comb(1, 0, 2).unwrap();
        assert_eq!(c0.num_params(), 2 * 3 * 2);
    }

    #[test]
    fn mismatched_tooth_width_is_rejected() {
        assert!(CombSpec::new(2, vec![Circuit::new(2)]).is_err());
        assert!(CombSpec::new(2, vec![]).is_err());
    }
}
