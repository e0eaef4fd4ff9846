//! Construction of frequently universal boundary martingales.

pub mod chain;
pub mod extend;
pub mod frequent;
pub mod ruler;
pub mod targets;

pub use chain::{find_decay_chain, DecayChain};
pub use extend::{extend_matching, extend_matching_in, universal_approximant, Approximant, Extension, Generations, Visit};
pub use frequent::{
    build_frequently_universal, disjointness_audit, recheck_certificate, visit_density, CertificateStep, DisjointnessAudit,
    UniversalityCertificate, VisitDensity,
};
pub use ruler::{ruler_count, ruler_ell, ruler_prefix, ruler_r};
pub use targets::{Block, Target, TargetFamily};
