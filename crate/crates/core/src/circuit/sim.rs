//! State-vector simulation of compiled circuits.

use super::gates::rotation_entries;
use super::{check_params, Axis, Circuit, GateKind, Polarity};
use crate::qmath::{ComplexMatrix, StateVector, C64};
use crate::{Error, Result};

#[derive(Clone, Debug)]
enum OpKind {
    Fixed { m: Vec<C64>, adj: Vec<C64> },
    Rotation { axis: Axis, param: usize },
}

#[derive(Clone, Debug)]
struct Op {
    /// Bit positions of the targets, most significant target first.
    shifts: Vec<u32>,
    ctrl_mask: usize,
    ctrl_value: usize,
    kind: OpKind,
}

/// A circuit flattened to primitive operations on a fixed register.
///
/// Compilation resolves blocks, maps circuit wires onto register qubits and
/// folds controls into bit masks, so one circuit can be embedded several
/// times into a larger register (as comb teeth are).
#[derive(Clone, Debug)]
pub struct Program {
    num_qubits: usize,
    ops: Vec<Op>,
}

impl Program {
    pub fn new(num_qubits: usize) -> Self {
        Self { num_qubits, ops: Vec::new() }
    }

    /// Compiles `circuit` with its wire `i` placed on register qubit `wires[i]`.
    pub fn compile(circuit: &Circuit, wires: &[usize], num_qubits: usize) -> Result<Self> {
        let mut p = Self::new(num_qubits);
        p.append(circuit, wires)?;
        Ok(p)
    }

    pub fn append(&mut self, circuit: &Circuit, wires: &[usize]) -> Result<()> {
        if wires.len() != circuit.num_qubits() {
            return Err(Error::DimensionMismatch { expected: circuit.num_qubits(), found: wires.len() });
        }
        if let Some(&w) = wires.iter().find(|&&w| w >= self.num_qubits) {
            return Err(Error::InvalidGate(format!("wire {w} outside {}-qubit register", self.num_qubits)));
        }
        self.append_inner(circuit, wires, 0, 0);
        Ok(())
    }

    fn append_inner(&mut self, circuit: &Circuit, wires: &[usize], mask: usize, value: usize) {
        let n = self.num_qubits;
        let bit = |q: usize| (n - 1 - q) as u32;
        for g in circuit.gates() {
            let (mut gm, mut gv) = (mask, value);
            for c in &g.controls {
                let b = 1usize << bit(wires[c.qubit]);
                gm |= b;
                if c.polarity == Polarity::Closed {
                    gv |= b;
                }
            }
            match &g.kind {
                GateKind::Block { circuit: sub, .. } => {
                    let sub_wires: Vec<usize> = g.targets.iter().map(|&t| wires[t]).collect();
                    self.append_inner(sub, &sub_wires, gm, gv);
                }
                GateKind::Fixed { matrix, .. } => self.ops.push(Op {
                    shifts: g.targets.iter().map(|&t| bit(wires[t])).collect(),
                    ctrl_mask: gm,
                    ctrl_value: gv,
                    kind: OpKind::Fixed { m: matrix.data().to_vec(), adj: matrix.adjoint().into_data() },
                }),
                GateKind::Rotation { axis, param } => self.ops.push(Op {
                    shifts: vec![bit(wires[g.targets[0]])],
                    ctrl_mask: gm,
                    ctrl_value: gv,
                    kind: OpKind::Rotation { axis: *axis, param: *param },
                }),
            }
        }
    }

    /// Appends a fixed single-qubit unitary on register qubit `q`.
    pub fn push_unitary(&mut self, u: &ComplexMatrix, q: usize) {
        self.ops.push(Op {
            shifts: vec![(self.num_qubits - 1 - q) as u32],
            ctrl_mask: 0,
            ctrl_value: 0,
            kind: OpKind::Fixed { m: u.data().to_vec(), adj: u.adjoint().into_data() },
        });
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn run(&self, amps: &mut [C64], params: &[f64]) {
        debug_assert_eq!(amps.len(), 1 << self.num_qubits);
        for op in &self.ops {
            apply_op(op, amps, params, false);
        }
    }

    /// Runs ops `[from, to)`.
    pub fn run_range(&self, amps: &mut [C64], params: &[f64], from: usize, to: usize) {
        for op in &self.ops[from..to] {
            apply_op(op, amps, params, false);
        }
    }

    /// Value and gradient of a quadratic form `⟨φ(θ)|M|φ(θ)⟩`, `φ(θ) = U(θ)φ₀`.
    ///
    /// `observe` receives the final state and returns `(⟨φ|M|φ⟩, M|φ⟩)` for a
    /// Hermitian `M`. The gradient is computed in one reverse sweep (adjoint
    /// method), so its cost is a small multiple of one forward run
    /// independently of the parameter count.
    pub fn expectation_gradient(
        &self,
        initial: &[C64],
        params: &[f64],
        observe: impl FnOnce(&[C64]) -> (f64, Vec<C64>),
    ) -> (f64, Vec<f64>) {
        let mut phi = initial.to_vec();
        self.run(&mut phi, params);
        let (value, mut lambda) = observe(&phi);
        let mut grad = vec![0.0; params.len()];
        for op in self.ops.iter().rev() {
            if let OpKind::Rotation { axis, param } = op.kind {
                grad[param] += 2.0 * rotation_generator_overlap(op, axis, &lambda, &phi);
            }
            apply_op(op, &mut phi, params, true);
            apply_op(op, &mut lambda, params, true);
        }
        (value, grad)
    }
}

fn apply_op(op: &Op, amps: &mut [C64], params: &[f64], adjoint: bool) {
    match &op.kind {
        OpKind::Fixed { m, adj } => {
            let m = if adjoint { adj } else { m };
            if op.shifts.len() == 1 {
                apply_1q(amps, op.shifts[0], [m[0], m[1], m[2], m[3]], op.ctrl_mask, op.ctrl_value);
            } else {
                apply_kq(amps, &op.shifts, m, op.ctrl_mask, op.ctrl_value);
            }
        }
        OpKind::Rotation { axis, param } => {
            let theta = if adjoint { -params[*param] } else { params[*param] };
            apply_1q(amps, op.shifts[0], rotation_entries(*axis, theta), op.ctrl_mask, op.ctrl_value);
        }
    }
}

fn apply_1q(amps: &mut [C64], shift: u32, m: [C64; 4], mask: usize, value: usize) {
    let stride = 1usize << shift;
    let len = amps.len();
    let mut base = 0;
    while base < len {
        for i in base..base + stride {
            if i & mask != value {
                continue;
            }
            let (a, b) = (amps[i], amps[i + stride]);
            amps[i] = m[0] * a + m[1] * b;
            amps[i + stride] = m[2] * a + m[3] * b;
        }
        base += 2 * stride;
    }
}

fn apply_kq(amps: &mut [C64], shifts: &[u32], m: &[C64], mask: usize, value: usize) {
    let k = shifts.len();
    let dim = 1usize << k;
    let offsets: Vec<usize> = (0..dim)
        .map(|j| {
            (0..k).filter(|t| (j >> (k - 1 - t)) & 1 == 1).fold(0, |o, t| o | (1usize << shifts[t]))
        })
        .collect();
    let target_mask = offsets[dim - 1];
    let mut buf = vec![C64::new(0.0, 0.0); dim];
    for base in 0..amps.len() {
        if base & target_mask != 0 || base & mask != value {
            continue;
        }
        for (b, &o) in buf.iter_mut().zip(&offsets) {
            *b = amps[base | o];
        }
        for (r, &o) in offsets.iter().enumerate() {
            let row = &m[r * dim..(r + 1) * dim];
            amps[base | o] = row.iter().zip(&buf).map(|(x, y)| x * y).sum();
        }
    }
}

/// `Re⟨λ|D|φ⟩` with `D = −(i/2)σ` restricted to the control-firing subspace,
/// i.e. `∂/∂θ` of the (controlled) rotation with the rotation itself already
/// applied to `φ`.
fn rotation_generator_overlap(op: &Op, axis: Axis, lambda: &[C64], phi: &[C64]) -> f64 {
    let stride = 1usize << op.shifts[0];
    let len = phi.len();
    let half = C64::new(0.0, -0.5);
    let mut acc = C64::new(0.0, 0.0);
    let mut base = 0;
    while base < len {
        for i in base..base + stride {
            if i & op.ctrl_mask != op.ctrl_value {
                continue;
            }
            let j = i + stride;
            let (d0, d1) = match axis {
                Axis::X => (phi[j], phi[i]),
                Axis::Y => (C64::new(0.0, -1.0) * phi[j], C64::new(0.0, 1.0) * phi[i]),
                Axis::Z => (phi[i], -phi[j]),
            };
            acc += lambda[i].conj() * d0 + lambda[j].conj() * d1;
        }
        base += 2 * stride;
    }
    (half * acc).re
}

/// Runs `circuit` on `state`. Controlled gates act only where every closed
/// control is `|1⟩` and every open control is `|0⟩`.
pub fn apply(circuit: &Circuit, state: &StateVector, params: &[f64]) -> Result<StateVector> {
    if state.num_qubits() != circuit.num_qubits() {
        return Err(Error::DimensionMismatch { expected: circuit.num_qubits(), found: state.num_qubits() });
    }
    let wires: Vec<usize> = (0..circuit.num_qubits()).collect();
    apply_mapped(circuit, state, &wires, params)
}

/// Runs `circuit` with its wire `i` on qubit `wires[i]` of `state`.
pub fn apply_mapped(
    circuit: &Circuit,
    state: &StateVector,
    wires: &[usize],
    params: &[f64],
) -> Result<StateVector> {
    check_params(circuit, params)?;
    let program = Program::compile(circuit, wires, state.num_qubits())?;
    let mut out = state.clone();
    program.run(out.amplitudes_mut(), params);
    Ok(out)
}

/// Full `2^n × 2^n` unitary of `circuit`.
pub fn unitary_of(circuit: &Circuit, params: &[f64]) -> Result<ComplexMatrix> {
    check_params(circuit, params)?;
    let n = circuit.num_qubits();
    let wires: Vec<usize> = (0..n).collect();
    let program = Program::compile(circuit, &wires, n)?;
    let dim = 1usize << n;
    let mut u = ComplexMatrix::zeros(dim, dim);
    for col in 0..dim {
        let mut v = StateVector::basis(n, col).into_amplitudes();
        program.run(&mut v, params);
        for (row, z) in v.into_iter().enumerate() {
            u[(row, col)] = z;
        }
    }
    Ok(u)
}
