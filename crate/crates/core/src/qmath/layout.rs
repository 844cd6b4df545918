use super::{ComplexMatrix, StateVector, C64};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Subsystem {
    pub label: String,
    pub dim: usize,
}

/// Ordered tensor-product decomposition of a Hilbert space. The first
/// subsystem is the most significant in the flattened index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubsystemLayout {
    parts: Vec<Subsystem>,
}

impl SubsystemLayout {
    pub fn new<S: Into<String>>(parts: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let mut out: Vec<Subsystem> = Vec::new();
        for (label, dim) in parts {
            let label = label.into();
            if out.iter().any(|p| p.label == label) {
                return Err(Error::DuplicateLabel(label));
            }
            out.push(Subsystem { label, dim });
        }
        Ok(Self { parts: out })
    }

    /// One qubit per label.
    pub fn qubits<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        Self::new(labels.into_iter().map(|l| (l, 2)))
    }

    pub fn parts(&self) -> &[Subsystem] {
        &self.parts
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.parts.iter().map(|p| p.label.as_str())
    }

    pub fn dim(&self) -> usize {
        self.parts.iter().map(|p| p.dim).product()
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.parts
            .iter()
            .position(|p| p.label == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    /// Kept layout plus, for every flat index, its (kept, traced) split.
    fn split(&self, keep: &[&str]) -> Result<(SubsystemLayout, Vec<(usize, usize)>, usize)> {
        let mut keep_mask = vec![false; self.parts.len()];
        for label in keep {
            keep_mask[self.position(label)?] = true;
        }
        let kept = SubsystemLayout {
            parts: self.parts.iter().zip(&keep_mask).filter(|(_, &k)| k).map(|(p, _)| p.clone()).collect(),
        };
        let traced_dim: usize =
            self.parts.iter().zip(&keep_mask).filter(|(_, &k)| !k).map(|(p, _)| p.dim).product();
        let mut table = Vec::with_capacity(self.dim());
        for flat in 0..self.dim() {
            let (mut rem, mut k, mut t) = (flat, 0usize, 0usize);
            let (mut kstride, mut tstride) = (1usize, 1usize);
            for (p, &is_kept) in self.parts.iter().zip(&keep_mask).rev() {
                let digit = rem % p.dim;
                rem /= p.dim;
                if is_kept {
                    k += digit * kstride;
                    kstride *= p.dim;
                } else {
                    t += digit * tstride;
                    tstride *= p.dim;
                }
            }
            table.push((k, t));
        }
        Ok((kept, table, traced_dim))
    }
}

/// Reduces `rho` to the subsystems named in `keep`, which come out in layout
/// order regardless of the order given.
pub fn partial_trace(
    rho: &ComplexMatrix,
    layout: &SubsystemLayout,
    keep: &[&str],
) -> Result<(ComplexMatrix, SubsystemLayout)> {
    if !rho.is_square() {
        return Err(Error::NotSquare { rows: rho.rows(), cols: rho.cols() });
    }
    if rho.rows() != layout.dim() {
        return Err(Error::DimensionMismatch { expected: layout.dim(), found: rho.rows() });
    }
    let (kept, table, traced_dim) = layout.split(keep)?;
    let kd = kept.dim();
    // index[t][k] = flat index
    let mut index = vec![0usize; kd * traced_dim];
    for (flat, &(k, t)) in table.iter().enumerate() {
        index[t * kd + k] = flat;
    }
    let mut out = ComplexMatrix::zeros(kd, kd);
    for t in 0..traced_dim {
        let row = &index[t * kd..(t + 1) * kd];
        for (i, &fi) in row.iter().enumerate() {
            for (j, &fj) in row.iter().enumerate() {
                out[(i, j)] += rho[(fi, fj)];
            }
        }
    }
    Ok((out, kept))
}

/// Reduced density operator of the pure state `psi` on the `keep` subsystems.
pub fn reduced_density(
    psi: &StateVector,
    layout: &SubsystemLayout,
    keep: &[&str],
) -> Result<(ComplexMatrix, SubsystemLayout)> {
    if psi.dim() != layout.dim() {
        return Err(Error::DimensionMismatch { expected: layout.dim(), found: psi.dim() });
    }
    let (kept, table, traced_dim) = layout.split(keep)?;
    let kd = kept.dim();
    let mut block = vec![C64::new(0.0, 0.0); kd * traced_dim];
    for (&amp, &(k, t)) in psi.amplitudes().iter().zip(&table) {
        block[t * kd + k] = amp;
    }
    let mut out = ComplexMatrix::zeros(kd, kd);
    for col in block.chunks_exact(kd) {
        for i in 0..kd {
            if col[i] == C64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..kd {
                out[(i, j)] += col[i] * col[j].conj();
            }
        }
    }
    Ok((out, kept))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_second_qubit_of_product_state() {
        let layout = SubsystemLayout::qubits(["a", "b"]).unwrap();
        let rho = StateVector::zero(2).density();
        let (r, kept) = partial_trace(&rho, &layout, &["a"]).unwrap();
        assert_eq!(kept.labels().collect::<Vec<_>>(), ["a"]);
        assert_eq!(r, StateVector::zero(1).density());
    }

    #[test]
    fn bell_state_marginal_is_maximally_mixed() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bell = StateVector::from_amplitudes(vec![
            C64::new(h, 0.),
            C64::new(0., 0.),
            C64::new(0., 0.),
            C64::new(h, 0.),
        ])
        .unwrap();
        let layout = SubsystemLayout::qubits(["a", "b"]).unwrap();
        let (r, _) = partial_trace(&bell.density(), &layout, &["a"]).unwrap();
        let half = ComplexMatrix::identity(2).scale(C64::new(0.5, 0.));
        assert!(r.max_abs_diff(&half) < 1e-15);
        let (r2, _) = reduced_density(&bell, &layout, &["b"]).unwrap();
        assert!(r2.max_abs_diff(&half) < 1e-15);
    }

    #[test]
    fn unknown_and_duplicate_labels() {
        let layout = SubsystemLayout::qubits(["a", "b"]).unwrap();
        let rho = ComplexMatrix::identity(4);
        assert!(matches!(partial_trace(&rho, &layout, &["c"]), Err(Error::UnknownLabel(_))));
        assert!(matches!(SubsystemLayout::qubits(["a", "a"]), Err(Error::DuplicateLabel(_))));
    }

    #[test]
    fn keep_order_follows_layout() {
        let layout = SubsystemLayout::new([("x", 2), ("y", 3), ("z", 2)]).unwrap();
        let rho = ComplexMatrix::identity(12);
        let (_, kept) = partial_trace(&rho, &layout, &["z", "x"]).unwrap();
        assert_eq!(kept.labels().collect::<Vec<_>>(), ["x", "z"]);
    }
}
