//! Geometrically consistent correspondences between closed triangle meshes.
//!
//! A matching is a 0-1 selection of product triangles subject to boundary
//! and projection equalities. Each equality is compiled into a binary
//! decision diagram; the Lagrangian dual of the resulting decomposition is
//! maximised by min-marginal averaging interleaved with L-BFGS steps, and a
//! feasible matching is recovered by fixing confident variables and solving
//! the remainder exactly.
//!
//! Layout:
//! - [`bdd`]: diagrams, shortest paths and min-marginals.
//! - [`split`]: cutting long diagrams into coupled chunks.
//! - [`instance`]: 0-1 equality programs over diagrams.
//! - [`dual`]: dual state and min-marginal averaging.
//! - [`lbfgs`]: quasi-Newton steps on top of averaging.
//! - [`solver`]: the full dual + primal pipeline.
//! - [`primal`]: rounding, certification and the exact oracle.
//! - [`mesh`], [`product`]: shape-matching program construction.
//! - [`c2f`]: coarse-to-fine pruning.
//! - [`io`]: file formats.

pub mod bdd;
pub mod c2f;
pub mod dual;
pub mod error;
pub mod instance;
pub mod io;
pub mod lbfgs;
pub mod mesh;
pub mod primal;
pub mod product;
pub mod solver;
pub mod split;

pub use bdd::{Arc, Bdd, MinMarginalPair, Node};
pub use dual::{DualProblem, DualState, SweepDirection};
pub use error::{BddError, InstanceError, MeshError, PrimalError, ProductError, SplitError};
pub use instance::{Constraint, IlpInstance, LinearRow};
pub use lbfgs::{LbfgsHistory, StepConfig};
pub use mesh::{FeatureMatrix, Mesh};
pub use primal::GapReport;
pub use product::{ProductSpace, ProductTriangle};
pub use solver::{SolveConfig, SolveMode, SolveOutcome};
