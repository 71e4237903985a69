//! Crowdsourced shared-trip delivery: split package delivery orders between
//! shared personal vehicles (SPVs) and dedicated vehicles (DVs).

pub mod assign;
pub mod dh;
pub mod domain;
pub mod dvrp;
pub mod error;
pub mod experiment;
pub mod kpaths;
pub mod network;
pub mod oracle;
pub mod scenario;
pub mod switching;

pub use domain::{
    total_objective, validate_solution, CostBreakdown, CostParams, DvPlan, DvSpec, Instance, Pdo, PdoId, Solution,
    Spv, SpvId, SpvPlan, ValidationReport, Violation, ViolationKind,
};
pub use error::{Error, Result};
pub use network::{Arc, CostModel, Network, NodeId, PathSummary, Point, VehicleClass};
pub use dh::{solve_dh, DhConfig, DhTrace};
pub use oracle::{solve_exact_bruteforce, OracleLimits};
pub use scenario::{generate_instance, load_instance, save_instance, DepotPlacement, GenSpec, NetworkKind};
