//! Benchmark fixtures: ansätze, performance operators and parameter vectors
//! at the sizes used by training.

use qcomb::comb::generic_comb;
use qcomb::protocols::{build_streamlined_ansatz, StreamlinedVariant, STREAMLINED_LAYERS};
use qcomb::qmath::RandomSource;
use qcomb::{CombSpec, PerformanceOperator};
use rand::Rng;

pub struct Fixture {
    pub name: String,
    pub comb: CombSpec,
    pub omega: PerformanceOperator,
    pub params: Vec<f64>,
}

fn fixture(name: String, comb: CombSpec, samples: usize) -> Fixture {
    let omega = PerformanceOperator::sample(comb.slots(), samples, 11).expect("omega");
    let mut rng = RandomSource::new(3);
    let params = (0..comb.num_params()).map(|_| rng.random_range(-3.0..3.0)).collect();
    Fixture { name, comb, omega, params }
}

pub fn streamlined(variant: StreamlinedVariant) -> Fixture {
    let comb = build_streamlined_ansatz(variant, STREAMLINED_LAYERS).expect("ansatz");
    fixture(format!("{variant:?}"), comb, 1000)
}

pub fn generic(slots: usize, ancillas: usize, depth: usize) -> Fixture {
    let comb = generic_comb(slots, ancillas, depth).expect("ansatz");
    fixture(format!("generic_m{slots}_na{ancillas}"), comb, 1000)
}
