//! Differentially private sharing of SNP genotype matrices.
//!
//! Genotypes are encoded into a bit matrix ([`ingest`]), perturbed by XOR
//! with calibrated Bernoulli or chain noise ([`mechanism`]), repaired toward
//! public allele frequencies ([`postprocess`]), and scored for utility
//! ([`metrics`]) and membership-inference exposure ([`attack`]).
//! [`pipeline`] ties the stages together and persists runs.

pub mod attack;
pub mod ingest;
pub mod mechanism;
pub mod metrics;
pub mod pipeline;
pub mod postprocess;
pub mod synth;

pub use ingest::{BinaryMatrix, GenotypeDataset, ReferencePanel};
pub use mechanism::{NoiseMode, NoiseModel, PrivacyBudget, Semantics};
pub use pipeline::{RunConfig, RunReport, Workspace};
