use super::{Axis, Circuit, Gate};
use crate::{Error, Result};

/// Per-qubit `Rz·Ry·Rz` on every wire, parameters from `offset` upward.
/// Returns the next free parameter index.
pub fn euler_layer_at(c: &mut Circuit, qubits: &[usize], offset: usize) -> Result<usize> {
    let mut p = offset;
    for &q in qubits {
        c.push(Gate::rotation(Axis::Z, p, q))?;
        c.push(Gate::rotation(Axis::Y, p + 1, q))?;
        c.push(Gate::rotation(Axis::Z, p + 2, q))?;
        p += 3;
    }
    Ok(p)
}

/// Trainable 3-qubit block: each layer is Euler rotations on all three wires
/// followed by the CNOT ring `0→1, 1→2, 2→0`. Uses `9 · layers` parameters
/// starting at `param_offset`.
pub fn universal3(layers: usize, param_offset: usize) -> Result<Circuit> {
    if layers == 0 {
        return Err(Error::Config("universal3 needs at least one layer".into()));
    }
    let mut c = Circuit::new(3);
    let mut p = param_offset;
    for _ in 0..layers {
        p = euler_layer_at(&mut c, &[0, 1, 2], p)?;
        c.push(Gate::cx(0, 1))?.push(Gate::cx(1, 2))?.push(Gate::cx(2, 0))?;
    }
    c.reserve_params(p);
    Ok(c)
}

/// `depth` repetitions of Euler rotations on every qubit followed by a CNOT
/// chain `i → i+1 (mod n)`.
pub fn complex_entangled_layer(qubits: usize, depth: usize) -> Result<Circuit> {
    complex_entangled_layer_at(qubits, depth, 0)
}

pub fn complex_entangled_layer_at(qubits: usize, depth: usize, param_offset: usize) -> Result<Circuit> {
    if qubits < 2 {
        return Err(Error::Config("entangled layer needs at least two qubits".into()));
    }
    let wires: Vec<usize> = (0..qubits).collect();
    let mut c = Circuit::new(qubits);
    let mut p = param_offset;
    for _ in 0..depth {
        p = euler_layer_at(&mut c, &wires, p)?;
        for q in 0..qubits {
            c.push(Gate::cx(q, (q + 1) % qubits))?;
        }
    }
    c.reserve_params(p);
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{unitary_of, GateKind};
    use crate::qmath::ComplexMatrix;

    fn cnot_product(n: usize, pairs: &[(usize, usize)]) -> ComplexMatrix {
        // Oracle: multiply explicit permutation matrices.
        let dim = 1 << n;
        let mut u = ComplexMatrix::identity(dim);
        for &(ctl, tgt) in pairs {
            let p = ComplexMatrix::from_fn(dim, dim, |r, col| {
                let cbit = (col >> (n - 1 - ctl)) & 1;
                let image = if cbit == 1 { col ^ (1 << (n - 1 - tgt)) } else { col };
                crate::C64::new(if r == image { 1.0 } else { 0.0 }, 0.0)
            });
            u = p.matmul(&u);
        }
        u
    }

    #[test]
    fn universal3_parameter_count() {
        assert_eq!(universal3(6, 0).unwrap().num_params(), 54);
        assert_eq!(universal3(2, 10).unwrap().num_params(), 28);
    }

    #[test]
    fn universal3_zero_params_is_cnot_ring_power() {
        let layers = 3;
        let c = universal3(layers, 0).unwrap();
        let u = unitary_of(&c, &vec![0.0; c.num_params()]).unwrap();
        let ring: Vec<_> = (0..layers).flat_map(|_| [(0, 1), (1, 2), (2, 0)]).collect();
        assert!(u.max_abs_diff(&cnot_product(3, &ring)) < 1e-14);
        assert!(u.max_abs_diff(&ComplexMatrix::identity(8)) > 0.5);
    }

    #[test]
    fn entangled_layer_shape() {
        let c = complex_entangled_layer(2, 1).unwrap();
        assert_eq!(c.num_params(), 6);
        let cnots = c.gates().iter().filter(|g| matches!(&g.kind, GateKind::Fixed { name, .. } if name == "X")).count();
        assert_eq!(cnots, 2);
        assert!(complex_entangled_layer(1, 1).is_err());
    }

    #[test]
    fn entangled_layer_zero_params_is_cnot_chain() {
        let c = complex_entangled_layer(4, 2).unwrap();
        let u = unitary_of(&c, &vec![0.0; c.num_params()]).unwrap();
        let chain: Vec<_> = (0..2).flat_map(|_| [(0, 1), (1, 2), (2, 3), (3, 0)]).collect();
        assert!(u.max_abs_diff(&cnot_product(4, &chain)) < 1e-14);
    }
}
