//! Concatenated symplectic double (CSD) codes.
//!
//! A non-CSS seed code is doubled into a self-dual CSS code, then
//! concatenated with the `[[4,2,2]]` code so that every pair of qubits
//! exchanged by the ZX-duality shares one inner block. The crate covers
//! construction, distance estimation, logical Clifford groups, compilation,
//! fault-tolerant circuit builders, circuit-level noise simulation and
//! BP+OSD decoding.

pub mod f2core;
pub mod codeforge;
pub mod distance;
pub mod liftgate;
pub mod compiler;
pub mod circuitsmith;
pub mod noisesim;
pub mod decoder;
pub mod bench;
