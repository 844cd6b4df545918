use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use super::{ComplexMatrix, StateVector, C64};

/// Seeded, reproducible random stream.
#[derive(Clone, Debug)]
pub struct RandomSource {
    seed: u64,
    rng: ChaCha20Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self { seed, rng: ChaCha20Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// A fresh source for child task `index`, independent of the parent's
    /// position in its own stream.
    pub fn derive(&self, index: u64) -> Self {
        Self::new(derive_seed(self.seed, index))
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.random_range(lo..hi)
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn complex_normal(&mut self) -> C64 {
        C64::new(self.standard_normal(), self.standard_normal())
    }
}

impl RngCore for RandomSource {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// SplitMix64 finalizer applied to `(seed, index)`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Haar-random element of SU(2).
///
/// A normalized Gaussian 4-vector is uniform on S³, and S³ is SU(2) via
/// `(a, b, c, d) ↦ [[a+ib, c+id], [−c+id, a−ib]]`.
pub fn haar_su2(rng: &mut RandomSource) -> ComplexMatrix {
    let q: [f64; 4] = std::array::from_fn(|_| rng.standard_normal());
    let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    let [a, b, c, d] = q.map(|x| x / n);
    ComplexMatrix::from_rows(&[[C64::new(a, b), C64::new(c, d)], [C64::new(-c, d), C64::new(a, -b)]])
}

/// Haar-random element of U(dim): Gram–Schmidt on a complex Ginibre matrix.
pub fn haar_unitary(rng: &mut RandomSource, dim: usize) -> ComplexMatrix {
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(dim);
    while cols.len() < dim {
        let mut v: Vec<C64> = (0..dim).map(|_| rng.complex_normal()).collect();
        for _ in 0..2 {
            for c in &cols {
                let p: C64 = c.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (x, y) in v.iter_mut().zip(c) {
                    *x -= p * y;
                }
            }
        }
        let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if n > 1e-8 {
            cols.push(v.into_iter().map(|z| z / n).collect());
        }
    }
    ComplexMatrix::from_fn(dim, dim, |i, j| cols[j][i])
}

/// Uniformly random normalized pure state.
pub fn random_state(rng: &mut RandomSource, num_qubits: usize) -> StateVector {
    let amps = (0..1usize << num_qubits).map(|_| rng.complex_normal()).collect();
    StateVector::from_amplitudes(amps).expect("power of two").normalized()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = RandomSource::new(42);
        let mut b = RandomSource::new(42);
        for _ in 0..5 {
            assert_eq!(haar_su2(&mut a), haar_su2(&mut b));
        }
    }

    #[test]
    fn derived_seeds_differ() {
        let s: Vec<u64> = (0..16).map(|i| derive_seed(7, i)).collect();
        for i in 0..s.len() {
            for j in i + 1..s.len() {
                assert_ne!(s[i], s[j]);
            }
        }
    }

    #[test]
    fn su2_samples_are_special_unitary() {
        let mut rng = RandomSource::new(3);
        for _ in 0..200 {
            let u = haar_su2(&mut rng);
            assert!(u.unitarity_defect() <= 1e-12);
            assert!((u.det().unwrap() - C64::new(1.0, 0.0)).norm() <= 1e-12);
        }
    }

    #[test]
    fn haar_unitary_is_unitary() {
        let mut rng = RandomSource::new(5);
        assert!(haar_unitary(&mut rng, 8).unitarity_defect() < 1e-12);
    }
}
