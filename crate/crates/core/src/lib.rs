//! csguard-core: joint compressed-sensing acquisition with built-in
//! lightweight encryption, integrity tagging, and access control, plus the
//! sparse solvers a cloud needs to reconstruct and the evaluation harness
//! that exercises the security properties.
//!
//! The dataflow mirrors the three roles:
//!
//! * sensor: [`encoder::Encoder::acquire`] samples, compresses, encrypts,
//!   and hashes in one stacked projection; [`encoder::gen_mac`] and
//!   [`encoder::gen_access_password`] produce the side-channel credentials.
//! * cloud: [`solver::omp`] / [`solver::bpdn`] reconstruct from the keyed
//!   sensing matrix; [`decoder::check_access`] gates release.
//! * user: [`decoder::verify_integrity`] checks the tag, then
//!   [`decoder::recover`] maps coefficients back to the signal domain.

pub mod config;
pub mod container;
pub mod decoder;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod keymat;
pub mod keys;
pub mod linalg;
pub mod solver;
pub mod synth;
pub mod transform;

pub use config::{KeyFile, PipelineConfig, SolverChoice};
pub use decoder::{AccessDecision, AccessReason, IntegrityReport, Verdict};
pub use encoder::{
    AccessPassword, ApPolicy, AuthBundle, Encoder, EncoderConfig, MacCode, MeasurementPackage,
};
pub use error::{CsError, Result};
pub use keymat::{
    BlockIdentity, KeyedBasis, MacMatrix, Permutation, ScaleDiag, SensingMatrix, SignDiag,
    UnitaryBasis, DEFAULT_MAC_SEED,
};
pub use keys::{BitStream, Key, SecretKeys};
pub use solver::{ReconstructionResult, RipEstimate, SolverConfig, SsrTask};
