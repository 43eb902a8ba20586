use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BddError {
    #[error("constraint has no feasible 0-1 assignment")]
    EmptyFeasibleSet,
    #[error("constraint has no variables")]
    EmptyScope,
    #[error("variable {0} appears twice in one constraint")]
    DuplicateVariable(usize),
    #[error("malformed diagram: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SplitError {
    #[error("cannot split after layer {index} of a {layers}-layer diagram")]
    SplitAtTerminalLayer { index: usize, layers: usize },
    #[error(transparent)]
    Bdd(#[from] BddError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InstanceError {
    #[error("constraint {constraint} references variable {variable} but only {num_vars} exist")]
    UnknownVariable {
        constraint: usize,
        variable: usize,
        num_vars: usize,
    },
    #[error("cost of variable {0} is not finite")]
    NonFiniteCost(usize),
    #[error("constraint {constraint}: {source}")]
    Constraint { constraint: usize, source: BddError },
    #[error("variable dependencies across constraints are cyclic")]
    CyclicOrder,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MeshError {
    #[error("{mesh}: edge ({a}, {b}) is used by {count} faces in the same direction")]
    NotManifold {
        mesh: String,
        a: usize,
        b: usize,
        count: usize,
    },
    #[error("{mesh}: edge ({a}, {b}) has only one incident face")]
    NotClosed { mesh: String, a: usize, b: usize },
    #[error("{mesh}: face {face} is degenerate")]
    DegenerateTriangle { mesh: String, face: usize },
    #[error("{mesh}: face {face} references vertex {vertex} out of range")]
    BadIndex {
        mesh: String,
        face: usize,
        vertex: usize,
    },
    #[error("{mesh}: Euler characteristic {chi} is odd")]
    OddEuler { mesh: String, chi: i64 },
    #[error("genus mismatch: first mesh has genus {a}, second has genus {b}")]
    GenusMismatch { a: i64, b: i64 },
    #[error("feature dimension mismatch: {a} vs {b}")]
    FeatureDimensionMismatch { a: usize, b: usize },
    #[error("feature matrix has {rows} rows but mesh has {vertices} vertices")]
    FeatureRowMismatch { rows: usize, vertices: usize },
    #[error("feature matrix contains a non-finite entry at row {0}")]
    NonFiniteFeature(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProductError {
    #[error("x has length {got}, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("assignment violates {0} constraint rows")]
    InfeasibleInput(usize),
    #[error("pruning left {0} projection rows without candidates")]
    PrunedInfeasible(usize),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PrimalError {
    #[error("fixing made constraint {constraint} infeasible")]
    InfeasibleAfterFixing { constraint: usize },
    #[error("fraction {0} outside (0, 1]")]
    BadFraction(f64),
}
