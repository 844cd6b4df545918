//! Gate-level circuit IR.
//!
//! Gates are listed in application order. Every gate may carry controls of
//! either polarity: a closed control fires on `|1⟩`, an open control on `|0⟩`.
//! Parameterized gates are Pauli rotations `exp(−iθσ/2)` reading `θ` from a
//! shared parameter vector, so a block nested inside a larger circuit reads
//! from the same vector as its parent.

mod ansatz;
pub mod gates;
mod sim;
pub mod text;

use std::ops::Deref;

pub use ansatz::{complex_entangled_layer, complex_entangled_layer_at, euler_layer_at, universal3};
pub use sim::{apply, apply_mapped, unitary_of, Program};

use crate::qmath::{qubits_for_dim, ComplexMatrix};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Polarity {
    /// Fires on `|0⟩`.
    Open,
    /// Fires on `|1⟩`.
    Closed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Control {
    pub qubit: usize,
    pub polarity: Polarity,
}

impl Control {
    pub fn closed(qubit: usize) -> Self {
        Self { qubit, polarity: Polarity::Closed }
    }

    pub fn open(qubit: usize) -> Self {
        Self { qubit, polarity: Polarity::Open }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn symbol(self) -> &'static str {
        match self {
            Axis::X => "X",
            Axis::Y => "Y",
            Axis::Z => "Z",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GateKind {
    Fixed { name: String, matrix: ComplexMatrix },
    /// `exp(−iθσ_axis/2)` with `θ = params[param]`.
    Rotation { axis: Axis, param: usize },
    /// A sub-circuit whose qubit `i` is wired to `targets[i]`.
    Block { name: String, circuit: Circuit },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    pub kind: GateKind,
    pub targets: Vec<usize>,
    pub controls: Vec<Control>,
}

impl Gate {
    pub fn fixed(name: impl Into<String>, matrix: ComplexMatrix, targets: Vec<usize>) -> Self {
        Self { kind: GateKind::Fixed { name: name.into(), matrix }, targets, controls: Vec::new() }
    }

    pub fn rotation(axis: Axis, param: usize, target: usize) -> Self {
        Self { kind: GateKind::Rotation { axis, param }, targets: vec![target], controls: Vec::new() }
    }

    pub fn block(name: impl Into<String>, circuit: Circuit, targets: Vec<usize>) -> Self {
        Self { kind: GateKind::Block { name: name.into(), circuit }, targets, controls: Vec::new() }
    }

    pub fn h(q: usize) -> Self {
        Self::fixed("H", gates::h(), vec![q])
    }

    pub fn x(q: usize) -> Self {
        Self::fixed("X", gates::x(), vec![q])
    }

    pub fn y(q: usize) -> Self {
        Self::fixed("Y", gates::y(), vec![q])
    }

    pub fn z(q: usize) -> Self {
        Self::fixed("Z", gates::z(), vec![q])
    }

    /// `diag(−1, 1)`; differs from `Z` by a sign that is physical under control.
    pub fn neg_z(q: usize) -> Self {
        Self::fixed("-Z", gates::neg_z(), vec![q])
    }

    pub fn cx(control: usize, target: usize) -> Self {
        Self::x(target).controlled_by(Control::closed(control))
    }

    pub fn controlled_by(mut self, control: Control) -> Self {
        self.controls.push(control);
        self
    }

    pub fn with_controls(mut self, controls: impl IntoIterator<Item = Control>) -> Self {
        self.controls.extend(controls);
        self
    }

    /// Largest parameter index read by this gate, if any.
    fn max_param(&self) -> Option<usize> {
        match &self.kind {
            GateKind::Fixed { .. } => None,
            GateKind::Rotation { param, .. } => Some(*param),
            GateKind::Block { circuit, .. } => circuit.gates.iter().filter_map(Gate::max_param).max(),
        }
    }

    fn validate(&self, num_qubits: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidGate(msg));
        if self.targets.is_empty() {
            return bad("gate has no targets".into());
        }
        let mut seen = vec![false; num_qubits];
        for q in self.targets.iter().copied().chain(self.controls.iter().map(|c| c.qubit)) {
            if q >= num_qubits {
                return bad(format!("qubit {q} out of range for {num_qubits}-qubit circuit"));
            }
            if seen[q] {
                return bad(format!("qubit {q} used twice (targets and controls must be disjoint)"));
            }
            seen[q] = true;
        }
        match &self.kind {
            GateKind::Fixed { name, matrix } => {
                let k = qubits_for_dim(matrix.rows())?;
                if !matrix.is_square() || k != self.targets.len() {
                    return bad(format!(
                        "`{name}` is {}x{} but has {} target(s)",
                        matrix.rows(),
                        matrix.cols(),
                        self.targets.len()
                    ));
                }
                let defect = matrix.unitarity_defect();
                if defect > 1e-12 {
                    return Err(Error::NotUnitary(defect));
                }
            }
            GateKind::Rotation { .. } => {
                if self.targets.len() != 1 {
                    return bad("rotation must have exactly one target".into());
                }
            }
            GateKind::Block { name, circuit } => {
                if circuit.num_qubits != self.targets.len() {
                    return bad(format!(
                        "block `{name}` spans {} qubits but has {} target(s)",
                        circuit.num_qubits,
                        self.targets.len()
                    ));
                }
            }
        }
        Ok(())
    }

    fn inverse(&self) -> Result<Gate> {
        let kind = match &self.kind {
            GateKind::Fixed { name, matrix } => {
                GateKind::Fixed { name: dagger_name(name), matrix: matrix.adjoint() }
            }
            GateKind::Rotation { .. } => {
                return Err(Error::InvalidGate("cannot invert a parameterized rotation in place".into()))
            }
            GateKind::Block { name, circuit } => {
                GateKind::Block { name: dagger_name(name), circuit: circuit.inverse()? }
            }
        };
        Ok(Gate { kind, targets: self.targets.clone(), controls: self.controls.clone() })
    }
}

fn dagger_name(name: &str) -> String {
    match name.strip_suffix('†') {
        Some(base) => base.to_string(),
        None if matches!(name, "H" | "X" | "Y" | "Z" | "-Z") => name.to_string(),
        None => format!("{name}†"),
    }
}

/// Ordered gate list over `num_qubits` wires.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    num_qubits: usize,
    num_params: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(num_qubits: usize) -> Self {
        Self { num_qubits, num_params: 0, gates: Vec::new() }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    /// One past the largest parameter index any gate reads (or more, if
    /// raised with [`Circuit::reserve_params`]).
    pub fn num_params(&self) -> usize {
        self.num_params
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn push(&mut self, gate: Gate) -> Result<&mut Self> {
        gate.validate(self.num_qubits)?;
        if let GateKind::Block { circuit, .. } = &gate.kind {
            self.num_params = self.num_params.max(circuit.num_params);
        }
        if let Some(p) = gate.max_param() {
            self.num_params = self.num_params.max(p + 1);
        }
        self.gates.push(gate);
        Ok(self)
    }

    /// Guarantees `num_params() >= n`.
    pub fn reserve_params(&mut self, n: usize) {
        self.num_params = self.num_params.max(n);
    }

    /// Appends every gate of `other` (run after `self`).
    pub fn extend(&mut self, other: &Circuit) -> Result<&mut Self> {
        if other.num_qubits != self.num_qubits {
            return Err(Error::DimensionMismatch { expected: self.num_qubits, found: other.num_qubits });
        }
        for g in &other.gates {
            self.push(g.clone())?;
        }
        self.reserve_params(other.num_params);
        Ok(self)
    }

    /// Sequential composition: `self` first, then `other`.
    pub fn then(&self, other: &Circuit) -> Result<Circuit> {
        let mut out = self.clone();
        out.extend(other)?;
        Ok(out)
    }

    /// Adjoint circuit. Only defined for circuits without rotations.
    pub fn inverse(&self) -> Result<Circuit> {
        let gates = self.gates.iter().rev().map(Gate::inverse).collect::<Result<Vec<_>>>()?;
        Ok(Circuit { num_qubits: self.num_qubits, num_params: self.num_params, gates })
    }

    /// Indices of parameters actually read by some gate.
    pub fn used_params(&self) -> Vec<usize> {
        fn walk(c: &Circuit, out: &mut Vec<usize>) {
            for g in &c.gates {
                match &g.kind {
                    GateKind::Rotation { param, .. } => out.push(*param),
                    GateKind::Block { circuit, .. } => walk(circuit, out),
                    GateKind::Fixed { .. } => {}
                }
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Number of primitive gates after flattening blocks.
    pub fn flat_len(&self) -> usize {
        self.gates
            .iter()
            .map(|g| match &g.kind {
                GateKind::Block { circuit, .. } => circuit.flat_len(),
                _ => 1,
            })
            .sum()
    }
}

/// Real parameter vector (radians), finite entries only.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteParam(i));
        }
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ParamVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn check_params(c: &Circuit, params: &[f64]) -> Result<()> {
    if params.len() < c.num_params() {
        return Err(Error::DimensionMismatch { expected: c.num_params(), found: params.len() });
    }
    if let Some(i) = params.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteParam(i));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_rejects_overlapping_control() {
        let mut c = Circuit::new(2);
        let err = c.push(Gate::x(0).controlled_by(Control::closed(0))).unwrap_err();
        assert!(matches!(err, Error::InvalidGate(_)));
    }

    #[test]
    fn push_rejects_out_of_range_and_non_unitary() {
        let mut c = Circuit::new(2);
        assert!(c.push(Gate::x(2)).is_err());
        let m = ComplexMatrix::diagonal(&[crate::C64::new(2.0, 0.0), crate::C64::new(1.0, 0.0)]);
        assert!(matches!(c.push(Gate::fixed("bad", m, vec![0])), Err(Error::NotUnitary(_))));
    }

    #[test]
    fn param_count_tracks_rotations() {
        let mut c = Circuit::new(1);
        c.push(Gate::rotation(Axis::Z, 4, 0)).unwrap();
        assert_eq!(c.num_params(), 5);
        assert_eq!(c.used_params(), vec![4]);
    }

    #[test]
    fn inverse_refuses_rotations() {
        let mut c = Circuit::new(1);
        c.push(Gate::rotation(Axis::Y, 0, 0)).unwrap();
        assert!(c.inverse().is_err());
    }

    #[test]
    fn param_vector_rejects_nan() {
        assert!(matches!(ParamVector::new(vec![0.0, f64::NAN]), Err(Error::NonFiniteParam(1))));
    }
}
