//! Sampled performance operator for unitary inversion.
//!
//! `Ω = (1/(d² N)) Σ_k |w_k⟩⟨w_k|` with
//! `|w_k⟩ = |U_k⁻¹⟩⟩_{PF} ⊗ |Ū_k⟩⟩^{⊗m}_{IO}` and `U_k` Haar-random in SU(2),
//! so that `tr[C Ω]` is the average entanglement fidelity between the
//! inverse and whatever the comb produces from `m` calls.
//!
//! The samples span a subspace of dimension far below `N` (the commutant of
//! `U^{⊗m}`), so evaluation uses an orthonormal basis `Q` of that span and an
//! `r × r` Hermitian kernel `K`, with `Ω = Q K Q†`.
//!
//! # Binary format
//!
//! All integers and floats little-endian.
//!
//! | field           | type         |
//! |-----------------|--------------|
//! | magic           | `b"QCOMBOMG"` |
//! | version         | u32 (= 1)    |
//! | slots `m`       | u32          |
//! | samples `N`     | u64          |
//! | seed            | u64          |
//! | normalization   | f64          |
//! | vector dim      | u64 (`2^(2m+2)`) |
//! | config length   | u64          |
//! | config          | UTF-8 bytes  |
//! | vectors         | `N·dim` × (re f64, im f64) |

use std::io::{Read, Write};

use sha2::{Digest, Sha256};

use super::link_vec;
use crate::qmath::{haar_su2, ComplexMatrix, RandomSource, C64};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"QCOMBOMG";
const VERSION: u32 = 1;
const RANK_TOL: f64 = 1e-8;

/// `|U⁻¹⟩⟩_{PF} ⊗ |Ū⟩⟩^{⊗m}` on `(P, I_1, O_1, …, I_m, O_m, F)`.
pub fn performance_vector(slots: usize, u: &ComplexMatrix) -> Vec<C64> {
    let pf = link_vec(&u.adjoint());
    let io = link_vec(&u.conj());
    let n = 2 * slots + 2;
    (0..1usize << n)
        .map(|idx| {
            let p = idx >> (n - 1);
            let f = idx & 1;
            let mut amp = pf[p * 2 + f];
            for k in 0..slots {
                let pair = (idx >> (n - 3 - 2 * k)) & 3;
                amp *= io[pair];
            }
            amp
        })
        .collect()
}

/// `n` Haar samples drawn from `rng`; the recorded seed is `rng.seed()`.
pub fn build_performance_operator(slots: usize, rng: &mut RandomSource, n: usize) -> Result<PerformanceOperator> {
    let us: Vec<ComplexMatrix> = (0..n).map(|_| haar_su2(rng)).collect();
    PerformanceOperator::build(slots, rng.seed(), &us)
}

#[derive(Clone, Debug)]
pub struct PerformanceOperator {
    slots: usize,
    seed: u64,
    normalization: f64,
    vectors: Vec<Vec<C64>>,
    basis: Vec<Vec<C64>>,
    kernel: ComplexMatrix,
}

impl PerformanceOperator {
    /// `n` Haar samples drawn from `seed`.
    pub fn sample(slots: usize, n: usize, seed: u64) -> Result<Self> {
        build_performance_operator(slots, &mut RandomSource::new(seed), n)
    }

    /// Operator over an explicit list of single-qubit unitaries (seed 0).
    pub fn from_unitaries(slots: usize, unitaries: &[ComplexMatrix]) -> Result<Self> {
        for u in unitaries {
            if u.rows() != 2 || u.cols() != 2 {
                return Err(Error::DimensionMismatch { expected: 2, found: u.rows() });
            }
            let d = u.unitarity_defect();
            if d > 1e-10 {
                return Err(Error::NotUnitary(d));
            }
        }
        Self::build(slots, 0, unitaries)
    }

    fn build(slots: usize, seed: u64, unitaries: &[ComplexMatrix]) -> Result<Self> {
        if unitaries.is_empty() {
            return Err(Error::Config("performance operator needs at least one sample".into()));
        }
        let vectors = unitaries.iter().map(|u| performance_vector(slots, u)).collect();
        Ok(Self::from_parts(slots, seed, 0.25, vectors))
    }

    fn from_parts(slots: usize, seed: u64, normalization: f64, vectors: Vec<Vec<C64>>) -> Self {
        let basis = orthonormal_span(&vectors);
        let weight = normalization / vectors.len() as f64;
        let coeffs: Vec<Vec<C64>> = vectors.iter().map(|w| basis.iter().map(|q| dot(q, w)).collect()).collect();
        let r = basis.len();
        let kernel = ComplexMatrix::from_fn(r, r, |i, j| {
            coeffs.iter().map(|c| c[i] * c[j].conj()).sum::<C64>() * weight
        });
        Self { slots, seed, normalization, vectors, basis, kernel }
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn num_samples(&self) -> usize {
        self.vectors.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn dim(&self) -> usize {
        1 << (2 * self.slots + 2)
    }

    /// Dimension of the span of the sample vectors.
    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn vectors(&self) -> &[Vec<C64>] {
        &self.vectors
    }

    /// `⟨v|Ω|v⟩` through the compressed form.
    pub fn expectation(&self, v: &[C64]) -> f64 {
        let c = self.project(v);
        let kc = self.kernel.apply(&c);
        c.iter().zip(&kc).map(|(a, b)| (a.conj() * b).re).sum()
    }

    /// `⟨v|Ω|v⟩`, writing `Ω|v⟩` into `out`.
    pub fn expectation_apply(&self, v: &[C64], out: &mut [C64]) -> f64 {
        let c = self.project(v);
        let kc = self.kernel.apply(&c);
        out.fill(C64::new(0.0, 0.0));
        for (q, &k) in self.basis.iter().zip(&kc) {
            for (o, &x) in out.iter_mut().zip(q) {
                *o += k * x;
            }
        }
        c.iter().zip(&kc).map(|(a, b)| (a.conj() * b).re).sum()
    }

    /// `⟨v|Ω|v⟩` summed sample by sample.
    pub fn expectation_direct(&self, v: &[C64]) -> f64 {
        let weight = self.normalization / self.vectors.len() as f64;
        self.vectors.iter().map(|w| dot(w, v).norm_sqr()).sum::<f64>() * weight
    }

    /// Dense `Ω` built from the samples.
    pub fn dense(&self) -> ComplexMatrix {
        let d = self.dim();
        let weight = C64::new(self.normalization / self.vectors.len() as f64, 0.0);
        let mut m = ComplexMatrix::zeros(d, d);
        for w in &self.vectors {
            for i in 0..d {
                if w[i] == C64::new(0.0, 0.0) {
                    continue;
                }
                let wi = w[i] * weight;
                for j in 0..d {
                    m[(i, j)] += wi * w[j].conj();
                }
            }
        }
        m
    }

    fn project(&self, v: &[C64]) -> Vec<C64> {
        self.basis.iter().map(|q| dot(q, v)).collect()
    }

    pub fn write_to(&self, mut w: impl Write, config: &str) -> Result<()> {
        let mut buf = Vec::with_capacity(64 + config.len() + self.vectors.len() * self.dim() * 16);
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.slots as u32).to_le_bytes());
        buf.extend_from_slice(&(self.vectors.len() as u64).to_le_bytes());
        buf.extend_from_slice(&self.seed.to_le_bytes());
        buf.extend_from_slice(&self.normalization.to_le_bytes());
        buf.extend_from_slice(&(self.dim() as u64).to_le_bytes());
        buf.extend_from_slice(&(config.len() as u64).to_le_bytes());
        buf.extend_from_slice(config.as_bytes());
        for v in &self.vectors {
            for z in v {
                buf.extend_from_slice(&z.re.to_le_bytes());
                buf.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    /// Serialized bytes (no embedded config).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out, "").expect("writing to a Vec cannot fail");
        out
    }

    /// Reads an operator and its embedded config string.
    pub fn read_from(mut r: impl Read) -> Result<(Self, String)> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a performance-operator file".into()));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let slots = read_u32(&mut r)? as usize;
        let n = read_u64(&mut r)? as usize;
        let seed = read_u64(&mut r)?;
        let normalization = f64::from_le_bytes(read_array(&mut r)?);
        let dim = read_u64(&mut r)? as usize;
        if slots > 12 || dim != 1 << (2 * slots + 2) {
            return Err(Error::Format(format!("inconsistent header: {slots} slot(s), dim {dim}")));
        }
        if n == 0 {
            return Err(Error::Format("no samples".into()));
        }
        let config_len = read_u64(&mut r)? as usize;
        let mut config = vec![0u8; config_len];
        r.read_exact(&mut config)?;
        let config = String::from_utf8(config).map_err(|_| Error::Format("config is not UTF-8".into()))?;
        let mut vectors = Vec::with_capacity(n);
        let mut row = vec![0u8; dim * 16];
        for _ in 0..n {
            r.read_exact(&mut row)?;
            let v: Vec<C64> = row
                .chunks_exact(16)
                .map(|b| {
                    C64::new(
                        f64::from_le_bytes(b[..8].try_into().unwrap()),
                        f64::from_le_bytes(b[8..].try_into().unwrap()),
                    )
                })
                .collect();
            if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Format("non-finite amplitude".into()));
            }
            vectors.push(v);
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::Format("trailing bytes".into()));
        }
        Ok((Self::from_parts(slots, seed, normalization, vectors), config))
    }
}

/// Lowercase hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn read_array<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    Ok(u64::from_le_bytes(read_array(r)?))
}

/// `⟨a|b⟩`.
fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Orthonormal basis of `span{vectors}` by modified Gram–Schmidt with one
/// re-orthogonalization pass.
fn orthonormal_span(vectors: &[Vec<C64>]) -> Vec<Vec<C64>> {
    let mut basis: Vec<Vec<C64>> = Vec::new();
    for w in vectors {
        let scale = dot(w, w).re.sqrt();
        if scale == 0.0 {
            continue;
        }
        let mut r = w.clone();
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &r);
                for (x, y) in r.iter_mut().zip(q) {
                    *x -= c * y;
                }
            }
        }
        let norm = dot(&r, &r).re.sqrt();
        if norm > RANK_TOL * scale {
            let inv = 1.0 / norm;
            r.iter_mut().for_each(|x| *x *= inv);
            basis.push(r);
        }
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_matches_commutant_dimension() {
        // Span of {U⁻¹ ⊗ Ū^{⊗m}} ≅ span{U^{⊗(m+1)}}: dimension of the
        // symmetric-power decomposition of (m+1) spin-½ copies.
        for (m, rank) in [(0, 4), (1, 10), (2, 20)] {
            let omega = PerformanceOperator::sample(m, 200, 3).unwrap();
            assert_eq!(omega.rank(), rank, "m = {m}");
        }
    }

    #[test]
    fn compressed_matches_direct() {
        let omega = PerformanceOperator::sample(1, 50, 11).unwrap();
        let mut rng = RandomSource::new(5);
        let v: Vec<C64> = (0..16).map(|_| rng.complex_normal()).collect();
        let a = omega.expectation(&v);
        let b = omega.expectation_direct(&v);
        assert!((a - b).abs() < 1e-12 * b.abs().max(1.0));
        let dense = omega.dense();
        let dv = dense.apply(&v);
        let c: f64 = dot(&v, &dv).re;
        assert!((a - c).abs() < 1e-12 * c.abs().max(1.0));
        let mut out = vec![C64::new(0.0, 0.0); 16];
        omega.expectation_apply(&v, &mut out);
        let diff = out.iter().zip(&dv).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-12);
    }

    #[test]
    fn binary_round_trip_and_corruption() {
        let omega = PerformanceOperator::sample(1, 7, 42).unwrap();
        let mut bytes = Vec::new();
        omega.write_to(&mut bytes, "n_samples = 7\n").unwrap();
        let (back, cfg) = PerformanceOperator::read_from(&bytes[..]).unwrap();
        assert_eq!(cfg, "n_samples = 7\n");
        assert_eq!(back.vectors(), omega.vectors());
        assert_eq!(back.seed(), 42);
        assert!(PerformanceOperator::read_from(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(PerformanceOperator::read_from(&bad[..]), Err(Error::Format(_))));
        bytes.push(0);
        assert!(PerformanceOperator::read_from(&bytes[..]).is_err());
    }

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}
