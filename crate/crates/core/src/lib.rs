//! Parameterized quantum combs.
//!
//! A sequential quantum comb is a chain of "teeth" `V_0 … V_m` that share an
//! ancilla register and expose `m` slots on a main wire. Plugging operations
//! into the slots yields a new operation on the main wire. This crate
//! provides:
//!
//! * [`qmath`]: dense complex linear algebra, subsystem bookkeeping and
//!   Haar sampling,
//! * [`circuit`]: a small gate IR with open/closed controls and Pauli
//!   rotations, a state-vector simulator and reverse-mode gradients,
//! * [`comb`]: the comb data model, Choi operators, the sampled performance
//!   operator and the comb/process losses,
//! * [`train`]: gradients, Adam/SGD, restarts and `(m, n_a)` grid scans,
//! * [`protocols`]: the 4-call and 5-call, 3-ancilla qubit-unitary inversion
//!   circuits together with their algebraic checks.

pub mod circuit;
pub mod comb;
mod error;
pub mod protocols;
pub mod qmath;
pub mod train;

pub use circuit::{Axis, Circuit, Control, Gate, GateKind, ParamVector, Polarity};
pub use comb::{AncillaOutput, ChoiOperator, CombSpec, PerformanceOperator};
pub use error::{Error, Result};
pub use qmath::{ComplexMatrix, RandomSource, StateVector, SubsystemLayout, C64};
pub use train::{GradientMethod, Method, OptimizerConfig, ScanTable, TrainReport};
