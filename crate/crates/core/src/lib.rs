//! Adaptive coordination and learning layers running closed-loop against a
//! deterministic plant simulation.

pub mod acl;
pub mod al;
pub mod compare;
pub mod defense;
pub mod flow;
pub mod metrics;
pub mod model;
pub mod plant;
pub mod replay;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod steering;
pub mod structural;
