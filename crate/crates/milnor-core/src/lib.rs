//! Numerical laboratory for polynomial map germs `R^n -> R^k` near the
//! origin: conic vector fields on the target, the ball homeomorphisms their
//! flows generate, pointwise suitability of field parameters, sampled
//! regularity checks with an independent submersion oracle, and fiber
//! samplers, all behind deterministic seeded sampling and canonical report
//! output.

pub mod axioms;
pub mod conic;
pub mod corpus;
pub mod fibers;
pub mod germ;
pub mod jet;
pub mod linalg;
pub mod ode;
pub mod regularity;
pub mod report;
pub mod sampling;

pub use conic::{ConicFlow, ConicParameter, FlowTrajectory, RayCoordinate};
pub use germ::{parse_germ, Expression, MapGerm, ParseDiagnostic};
pub use jet::Jet1;
pub use linalg::RankFactorization;
pub use ode::OdeControl;
pub use regularity::{
    LiftResult, RegularityReport, SuitabilityBranch, SuitabilityVerdict, ToleranceProfile,
};
pub use sampling::{OmegaSearchResult, SamplingPlan};
