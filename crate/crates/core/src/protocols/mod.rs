//! Deterministic qubit-unitary inversion with three ancillas.
//!
//! Wires: `q1, q2, q3` are ancillas `0, 1, 2`; the system is wire `3`.
//! `Q_U` conjugates the slot by a Pauli selected by `(q2, q3)`:
//! `|ab⟩|φ⟩ ↦ |ab⟩ X^b Y^a U Y^a X^b |φ⟩`, i.e. `|01⟩ ↦ XUX`, `|10⟩ ↦ YUY`,
//! `|11⟩ ↦ ZUZ` (up to the sign-free identity `XY·U·YX = ZUZ`).
//! Since `2U⁻¹ = XUX + YUY + ZUZ − U` on SU(2), four such calls interleaved
//! with the fixed block `G` produce `|0⟩ ⊗ U⁻¹|ψ⟩` on `(q1, system)`.

use crate::circuit::{gates, universal3, Circuit, Control, Gate};
use crate::comb::{AncillaOutput, CombSpec};
use crate::qmath::{reduced_density, ComplexMatrix, StateVector, SubsystemLayout, C64};
use crate::{Error, Result};

/// Tolerance for [`InversionReport::pass`].
pub const INVERSION_TOL: f64 = 1e-9;

const SYS: usize = 3;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn check_qubit_unitary(u: &ComplexMatrix) -> Result<()> {
    if u.rows() != 2 || u.cols() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: u.rows() });
    }
    let d = u.unitarity_defect();
    if d > 1e-10 {
        return Err(Error::NotUnitary(d));
    }
    Ok(())
}

/// `Q_U` on `(a, b, target)`: `a` is the Y-control, `b` the X-control.
pub fn build_qu(u: &ComplexMatrix) -> Result<Circuit> {
    check_qubit_unitary(u)?;
    let mut q = Circuit::new(3);
    q.push(Gate::x(2).controlled_by(Control::closed(1)))?
        .push(Gate::y(2).controlled_by(Control::closed(0)))?
        .push(Gate::fixed("U", u.clone(), vec![2]))?
        .push(Gate::y(2).controlled_by(Control::closed(0)))?
        .push(Gate::x(2).controlled_by(Control::closed(1)))?;
    Ok(q)
}

/// Two-qubit unitary with `F|00⟩ = (|01⟩ + |10⟩ + |11⟩)/√3`; the remaining
/// columns are Gram–Schmidt completions of `e_0 … e_3` in order.
pub fn complete_f() -> ComplexMatrix {
    let s = 1.0 / 3f64.sqrt();
    let mut cols: Vec<[f64; 4]> = vec![[0.0, s, s, s]];
    for k in 0..4 {
        if cols.len() == 4 {
            break;
        }
        let mut w = [0.0; 4];
        w[k] = 1.0;
        for col in cols.clone() {
            let p: f64 = (0..4).map(|i| col[i] * w[i]).sum();
            (0..4).for_each(|i| w[i] -= p * col[i]);
        }
        let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-9 {
            cols.push(w.map(|x| x / n));
        }
    }
    ComplexMatrix::from_fn(4, 4, |i, j| c(cols[j][i]))
}

/// `G` on `(q1, q2, q3)`.
pub fn build_g() -> Circuit {
    let mut g = Circuit::new(3);
    g.push(Gate::h(1))
        .and_then(|g| g.push(Gate::h(2)))
        .and_then(|g| g.push(Gate::neg_z(2).controlled_by(Control::open(1))))
        .and_then(|g| g.push(Gate::h(1)))
        .and_then(|g| g.push(Gate::h(2)))
        .and_then(|g| g.push(Gate::x(0).with_controls([Control::open(1), Control::open(2)])))
        .and_then(|g| g.push(Gate::fixed("F", complete_f(), vec![1, 2]).controlled_by(Control::closed(0))))
        .expect("G is well-formed");
    g
}

fn g_block() -> Gate {
    Gate::block("G", build_g(), vec![0, 1, 2])
}

fn g_dagger_block() -> Gate {
    Gate::block("G†", build_g().inverse().expect("G has no rotations"), vec![0, 1, 2])
}

/// The halves of `Q_U` that sit in the teeth around each slot.
fn slot_prefix(c: &mut Circuit) -> Result<()> {
    c.push(Gate::x(SYS).controlled_by(Control::closed(2)))?
        .push(Gate::y(SYS).controlled_by(Control::closed(1)))?;
    Ok(())
}

fn slot_suffix(c: &mut Circuit) -> Result<()> {
    c.push(Gate::y(SYS).controlled_by(Control::closed(1)))?
        .push(Gate::x(SYS).controlled_by(Control::closed(2)))?;
    Ok(())
}

fn hh(c: &mut Circuit) -> Result<()> {
    c.push(Gate::h(1))?.push(Gate::h(2))?;
    Ok(())
}

fn first_tooth() -> Result<Circuit> {
    let mut t = Circuit::new(4);
    hh(&mut t)?;
    slot_prefix(&mut t)?;
    Ok(t)
}

fn middle_tooth(body: &[Gate]) -> Result<Circuit> {
    let mut t = Circuit::new(4);
    slot_suffix(&mut t)?;
    for g in body {
        t.push(g.clone())?;
    }
    slot_prefix(&mut t)?;
    Ok(t)
}

fn decode(t: &mut Circuit) -> Result<()> {
    t.push(Gate::y(SYS).controlled_by(Control::closed(2)))?
        .push(Gate::x(SYS).controlled_by(Control::closed(1)))?;
    Ok(())
}

/// Four-call inversion comb. Teeth:
/// `HH·Q⁻`, `Q⁺·G·X₁·Q⁻`, `Q⁺·G†·Q⁻`, `Q⁺·c̄(−Z)·G·X₁·Q⁻`,
/// `Q⁺·G†·HH·CY(q3→s)·CX(q2→s)`, where `Q⁻`/`Q⁺` are the controlled-Pauli
/// halves of `Q_U` before and after the slot.
pub fn build_civ() -> CombSpec {
    let x1 = Gate::x(0);
    let open_neg_z = Gate::neg_z(2).controlled_by(Control::open(1));
    let mut last = Circuit::new(4);
    slot_suffix(&mut last).and_then(|_| last.push(g_dagger_block()).map(|_| ())).expect("valid");
    hh(&mut last).and_then(|_| decode(&mut last)).expect("valid");
    let teeth = vec![
        first_tooth(),
        middle_tooth(&[g_block(), x1.clone()]),
        middle_tooth(&[g_dagger_block()]),
        middle_tooth(&[open_neg_z, g_block(), x1]),
        Ok(last),
    ]
    .into_iter()
    .collect::<Result<Vec<_>>>()
    .expect("teeth are well-formed");
    CombSpec::new(3, teeth).expect("four-call comb is well-formed")
}

/// Five-call variant: identical to [`build_civ`] through the fourth slot's
/// `G†`, then a fifth `Q_U` and `HH`, which leaves the ancillas in `|000⟩`.
/// Ancilla output is [`AncillaOutput::Reset`].
pub fn build_cv5() -> CombSpec {
    let x1 = Gate::x(0);
    let open_neg_z = Gate::neg_z(2).controlled_by(Control::open(1));
    let mut last = Circuit::new(4);
    slot_suffix(&mut last).and_then(|_| hh(&mut last)).expect("valid");
    let teeth = vec![
        first_tooth(),
        middle_tooth(&[g_block(), x1.clone()]),
        middle_tooth(&[g_dagger_block()]),
        middle_tooth(&[open_neg_z, g_block(), x1]),
        middle_tooth(&[g_dagger_block()]),
        Ok(last),
    ]
    .into_iter()
    .collect::<Result<Vec<_>>>()
    .expect("teeth are well-formed");
    CombSpec::new(3, teeth).expect("five-call comb is well-formed").with_ancilla_output(AncillaOutput::Reset)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StreamlinedVariant {
    FourCall,
    FiveCall,
}

impl std::str::FromStr for StreamlinedVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "four_call" | "streamlined4" | "4" => Ok(Self::FourCall),
            "five_call" | "streamlined5" | "5" => Ok(Self::FiveCall),
            other => Err(Error::Config(format!("unknown streamlined variant `{other}`"))),
        }
    }
}

/// Default number of `Universal3` layers per trainable block.
pub const STREAMLINED_LAYERS: usize = 6;

/// Trainable version of the inversion combs: the `Q_U` slot wiring is kept
/// and every fixed ancilla block between slots becomes a `Universal3` block
/// on `(q1, q2, q3)` with `layers` layers (4 blocks for `FourCall`, 5 for
/// `FiveCall`). The first tooth stays `HH·Q⁻`; the four-call variant keeps
/// the final controlled-Pauli decode, the five-call variant resets the
/// ancillas instead.
pub fn build_streamlined_ansatz(variant: StreamlinedVariant, layers: usize) -> Result<CombSpec> {
    let blocks = match variant {
        StreamlinedVariant::FourCall => 4,
        StreamlinedVariant::FiveCall => 5,
    };
    let mut teeth = vec![first_tooth()?];
    for k in 0..blocks {
        let block = universal3(layers, 9 * layers * k)?;
        let gate = Gate::block("Universal3", block, vec![0, 1, 2]);
        let tooth = if k + 1 < blocks {
            middle_tooth(&[gate])?
        } else {
            let mut t = Circuit::new(4);
            slot_suffix(&mut t)?;
            t.push(gate)?;
            if variant == StreamlinedVariant::FourCall {
                decode(&mut t)?;
            }
            t
        };
        teeth.push(tooth);
    }
    let comb = CombSpec::new(3, teeth)?;
    Ok(match variant {
        StreamlinedVariant::FourCall => comb,
        StreamlinedVariant::FiveCall => comb.with_ancilla_output(AncillaOutput::Reset),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct InversionReport {
    pub unitary: ComplexMatrix,
    /// `⟨ψ'|ρ_sys|ψ'⟩` with `ψ' = U⁻¹ψ`.
    pub system_fidelity: f64,
    /// Probability of reading `|0⟩` on the first ancilla (`None` without ancillas).
    pub q1_zero_probability: Option<f64>,
    /// `1 − λ_max` of the `(q1, system)` marginal: zero iff the remaining
    /// ancillas factor out.
    pub factorization_residual: f64,
    /// `⟨0…0|ρ_anc|0…0⟩`.
    pub ancilla_reset_fidelity: f64,
    /// Whether the reset check is part of `pass`.
    pub reset_checked: bool,
    pub pass: bool,
}

/// Runs `comb` with every slot set to `u` on `|0…0⟩ ⊗ ψ`.
pub fn verify_inversion(comb: &CombSpec, u: &ComplexMatrix, psi: &StateVector) -> Result<InversionReport> {
    verify_inversion_with(comb, &[], u, psi)
}

/// [`verify_inversion`] for a parameterized comb.
pub fn verify_inversion_with(
    comb: &CombSpec,
    params: &[f64],
    u: &ComplexMatrix,
    psi: &StateVector,
) -> Result<InversionReport> {
    check_qubit_unitary(u)?;
    if psi.num_qubits() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, found: psi.num_qubits() });
    }
    let na = comb.ancilla_qubits();
    let circuit = comb.realize(&vec![u.clone(); comb.slots()])?;
    let input = StateVector::zero(na).kron(psi);
    let out = crate::circuit::apply(&circuit, &input, params)?;
    let amps = out.amplitudes();

    let target = u.adjoint().apply(psi.amplitudes());
    let sys_pair = |a: usize| [amps[2 * a], amps[2 * a + 1]];
    let mut system_fidelity = 0.0;
    for a in 0..1usize << na {
        let [x, y] = sys_pair(a);
        system_fidelity += (target[0].conj() * x + target[1].conj() * y).norm_sqr();
    }
    let (q1_zero_probability, factorization_residual) = if na == 0 {
        (None, 0.0)
    } else {
        let half = amps.len() / 2;
        let p0 = amps[..half].iter().map(|z| z.norm_sqr()).sum();
        let residual = if na == 1 {
            0.0
        } else {
            let labels = (0..na).map(|a| format!("q{}", a + 1)).chain(["sys".to_string()]);
            let layout = SubsystemLayout::qubits(labels)?;
            let (rho, _) = reduced_density(&out, &layout, &["q1", "sys"])?;
            let lmax = rho.hermitian_eigenvalues()?.last().copied().unwrap_or(0.0);
            (1.0 - lmax).max(0.0)
        };
        (Some(p0), residual)
    };
    let ancilla_reset_fidelity = amps[0].norm_sqr() + amps[1].norm_sqr();
    let reset_checked = comb.ancilla_output() == AncillaOutput::Reset;
    let pass = system_fidelity >= 1.0 - INVERSION_TOL
        && q1_zero_probability.is_none_or(|p| p >= 1.0 - INVERSION_TOL)
        && factorization_residual <= INVERSION_TOL
        && (!reset_checked || ancilla_reset_fidelity >= 1.0 - INVERSION_TOL);
    Ok(InversionReport {
        unitary: u.clone(),
        system_fidelity,
        q1_zero_probability,
        factorization_residual,
        ancilla_reset_fidelity,
        reset_checked,
        pass,
    })
}

/// `(cos(θ/2), sin(θ/2)·n)` for `U = cos(θ/2) I − i sin(θ/2) n·σ ∈ SU(2)`.
pub fn su2_components(u: &ComplexMatrix) -> (f64, [f64; 3]) {
    let tr = |m: &ComplexMatrix| u.matmul(m).trace();
    let cos = u.trace().re / 2.0;
    let sn = [gates::x(), gates::y(), gates::z()].map(|p| (C64::new(0.0, 1.0) * tr(&p)).re / 2.0);
    (cos, sn)
}

/// `‖XUX + YUY + ZUZ − U − 2U⁻¹‖_max`. Holds on SU(2) only; logs a warning
/// when `det U ≠ 1`.
pub fn pauli_twirl_identity_check(u: &ComplexMatrix) -> Result<f64> {
    check_qubit_unitary(u)?;
    let det = u.det()?;
    if (det - c(1.0)).norm() > 1e-10 {
        log::warn!("det U = {det}; the twirl identity only holds on SU(2)");
    }
    let mut lhs = u.scale(c(-1.0));
    for p in [gates::x(), gates::y(), gates::z()] {
        lhs = lhs.add(&p.matmul(u).matmul(&p));
    }
    Ok(lhs.max_abs_diff(&u.adjoint().scale(c(2.0))))
}

/// Maximum deviations of the two auxiliary identities over `σ ∈ {X, Y, Z}`:
/// `σUσ(U + σU⁻¹σ)U⁻¹ = U⁻¹ + σUσ` and `U⁻¹σ_i − σ_iU = 2i sin(θ/2) n_i I`.
pub fn auxiliary_identity_deviations(u: &ComplexMatrix) -> Result<(f64, f64)> {
    check_qubit_unitary(u)?;
    let ui = u.adjoint();
    let (_, sn) = su2_components(u);
    let mut first: f64 = 0.0;
    let mut second: f64 = 0.0;
    for (i, p) in [gates::x(), gates::y(), gates::z()].into_iter().enumerate() {
        let pup = p.matmul(u).matmul(&p);
        let lhs = pup.matmul(&u.add(&p.matmul(&ui).matmul(&p))).matmul(&ui);
        first = first.max(lhs.max_abs_diff(&ui.add(&pup)));
        let diff = ui.matmul(&p).sub(&p.matmul(u));
        let rhs = ComplexMatrix::identity(2).scale(C64::new(0.0, 2.0 * sn[i]));
        second = second.max(diff.max_abs_diff(&rhs));
    }
    Ok((first, second))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub label: &'static str,
    pub simulated: StateVector,
    pub closed_form: StateVector,
    /// `1 − |⟨a|b⟩|²/(‖a‖²‖b‖²)`: comparison up to phase and normalization.
    pub distance: f64,
}

/// Basis ket on `(q1, q2, q3)` tensored with a system state.
fn branch(q: [usize; 3], sys: &[C64]) -> Vec<C64> {
    let idx = (q[0] << 2) | (q[1] << 1) | q[2];
    let mut v = vec![c(0.0); 16];
    v[2 * idx] = sys[0];
    v[2 * idx + 1] = sys[1];
    v
}

fn axpy(acc: &mut [C64], a: C64, x: &[C64]) {
    acc.iter_mut().zip(x).for_each(|(y, x)| *y += a * x);
}

/// Stage states of the four-call circuit against closed forms.
///
/// Stages end after `HH·Q·G` (I), `X₁·Q·G†` (II), `Q·c̄(−Z)·G` (III),
/// `X₁·Q·G†` (IV) and the decoding layer (OUT). Closed forms, with
/// `|0⊥⟩ = (|01⟩+|10⟩+|11⟩)/√3`, `σ_1..3 = X, Y, Z` on branches
/// `|01⟩, |10⟩, |11⟩` and `φ' = U⁻¹φ`:
///
/// * I:   `½|1⟩|0⊥⟩φ' + ½ Σ|0⟩|b_i⟩ σ_iU⁻¹σ_i φ`
/// * II:  `|000⟩(U⁻¹−U)φ' + Σ|0⟩|b_i⟩(U + σ_iU⁻¹σ_i)φ'`
/// * III: `−(√3/2)|1⟩|0⊥⟩φ' − (1/(2√3)) Σ|0⟩|b_i⟩ σ_iU⁻¹σ_i φ`
/// * IV:  `|000⟩U⁻¹φ' + Σ|0⟩|b_i⟩ σ_iU⁻¹σ_i φ'`
/// * OUT: `|0⟩(cos(θ/2)|00⟩ + i s n_y|01⟩ + i s n_x|10⟩ − s n_z|11⟩) φ'`,
///   `s = sin(θ/2)`
pub fn intermediate_states(u: &ComplexMatrix, psi: &StateVector) -> Result<Vec<Checkpoint>> {
    check_qubit_unitary(u)?;
    if psi.num_qubits() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, found: psi.num_qubits() });
    }
    let qu = Gate::block("Q_U", build_qu(u)?, vec![1, 2, SYS]);
    let open_neg_z = Gate::neg_z(2).controlled_by(Control::open(1));
    let stage = |gs: Vec<Gate>| -> Result<Circuit> {
        let mut c = Circuit::new(4);
        for g in gs {
            c.push(g)?;
        }
        Ok(c)
    };
    let mut decode_layer = stage(vec![Gate::h(1), Gate::h(2)])?;
    decode(&mut decode_layer)?;
    let stages = [
        ("I", stage(vec![Gate::h(1), Gate::h(2), qu.clone(), g_block()])?),
        ("II", stage(vec![Gate::x(0), qu.clone(), g_dagger_block()])?),
        ("III", stage(vec![qu.clone(), open_neg_z, g_block()])?),
        ("IV", stage(vec![Gate::x(0), qu, g_dagger_block()])?),
        ("OUT", decode_layer),
    ];

    let phi = psi.amplitudes();
    let ui = u.adjoint();
    let phi1 = ui.apply(phi);
    let paulis = [gates::x(), gates::y(), gates::z()];
    let branches = [[0, 0, 1], [0, 1, 0], [0, 1, 1]];
    let twirled = |i: usize, v: &[C64]| paulis[i].matmul(&ui).matmul(&paulis[i]).apply(v);
    let perp = |q1: usize, v: &[C64]| {
        let mut acc = vec![c(0.0); 16];
        for b in branches {
            axpy(&mut acc, c(1.0 / 3f64.sqrt()), &branch([q1, b[1], b[2]], v));
        }
        acc
    };
    let (cos, sn) = su2_components(u);

    let mut closed: Vec<Vec<C64>> = Vec::new();
    // I
    let mut v = perp(1, &phi1).iter().map(|z| z * 0.5).collect::<Vec<_>>();
    for i in 0..3 {
        axpy(&mut v, c(0.5), &branch(branches[i], &twirled(i, phi)));
    }
    closed.push(v);
    // II
    let mut v = branch([0, 0, 0], &ui.sub(u).apply(&phi1));
    for i in 0..3 {
        let m = u.add(&paulis[i].matmul(&ui).matmul(&paulis[i]));
        axpy(&mut v, c(1.0), &branch(branches[i], &m.apply(&phi1)));
    }
    closed.push(v);
    // III
    let mut v = perp(1, &phi1).iter().map(|z| z * (-(3f64.sqrt()) / 2.0)).collect::<Vec<_>>();
    for i in 0..3 {
        axpy(&mut v, c(-1.0 / (2.0 * 3f64.sqrt())), &branch(branches[i], &twirled(i, phi)));
    }
    closed.push(v);
    // IV
    let mut v = branch([0, 0, 0], &ui.apply(&phi1));
    for i in 0..3 {
        axpy(&mut v, c(1.0), &branch(branches[i], &twirled(i, &phi1)));
    }
    closed.push(v);
    // OUT
    let mut v = branch([0, 0, 0], &phi1).iter().map(|z| z * cos).collect::<Vec<_>>();
    axpy(&mut v, C64::new(0.0, sn[1]), &branch([0, 0, 1], &phi1));
    axpy(&mut v, C64::new(0.0, sn[0]), &branch([0, 1, 0], &phi1));
    axpy(&mut v, c(-sn[2]), &branch([0, 1, 1], &phi1));
    closed.push(v);

    let mut state = StateVector::zero(3).kron(psi);
    let mut out = Vec::new();
    for ((label, circuit), form) in stages.into_iter().zip(closed) {
        state = crate::circuit::apply(&circuit, &state, &[])?;
        let closed_form = StateVector::from_amplitudes(form)?;
        let distance = 1.0 - state.fidelity(&closed_form);
        out.push(Checkpoint { label, simulated: state.clone(), closed_form, distance });
    }
    Ok(out)
}
