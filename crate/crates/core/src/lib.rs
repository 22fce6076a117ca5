//! CNOT circuit synthesis for invertible boolean matrices: PMH elimination,
//! striping and embedding reductions, an exact breadth-first oracle for small
//! sizes, and a PPO agent trained on a curriculum of matrix classes.

pub mod bench;
pub mod circuit;
pub mod error;
pub mod exact;
pub mod generators;
pub mod gf2;
pub mod pmh;
pub mod ppo;
pub mod resize;
pub mod rlenv;
pub mod rng;
pub mod scalar;

pub use circuit::{replay, verify_solves, Circuit, CnotGate, Method, SynthesisResult};
pub use error::{Error, Result};
pub use generators::{gen_suite, LogBase, MatrixClass, Setting};
pub use gf2::BitMatrix;
pub use pmh::{synthesize_pmh, PmhConfig};
pub use rng::Rng;
pub use scalar::Scalar;

/// Single-precision policy, the training and checkpoint format.
pub type Policy32 = ppo::PolicyParams<f32>;
/// Double-precision policy, used for gradient checks.
pub type Policy64 = ppo::PolicyParams<f64>;
pub type Env32 = rlenv::CnotEnv<f32>;
pub type Env64 = rlenv::CnotEnv<f64>;
pub type Reward32 = rlenv::RewardSpec<f32>;
pub type Reward64 = rlenv::RewardSpec<f64>;
