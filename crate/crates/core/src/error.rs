use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FamedError {
    #[error("malformed input: {0}")]
    MalformedInput(String),
    #[error("face {face} of tetrahedron {tet} is not paired")]
    UnpairedFace { tet: usize, face: usize },
    #[error("gluing violates the vertex order: {0}")]
    OrderViolation(String),
    #[error("unknown edge class {0}")]
    UnknownEdge(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("no rational solution")]
    NoRationalSolution,
    #[error("no integer solution")]
    NoIntegerSolution,
    #[error("kept edge rows are dependent")]
    DependentRowViolation,
    #[error("(A|B) has rank {rank} < {n}")]
    RankDeficient { rank: usize, n: usize },
    #[error("symplectic pairing violated: {0}")]
    SymplecticViolation(String),
    #[error("meridian and longitude do not form a generator pair")]
    NotAGeneratorPair,
    #[error("argument lies on the branch cut [1, inf)")]
    OnBranchCut,
    #[error("argument within {distance:e} of a cut of L")]
    TooCloseToCut { distance: f64 },
    #[error("argument too close to a pole of Phi_b")]
    PoleProximity,
    #[error("Newton iteration did not converge (residual {residual:e})")]
    NoConvergence { residual: f64 },
    #[error("shape parameter degenerated to 0 or 1")]
    DegenerateShape,
    #[error("continuation broke down: {0}")]
    ContinuationBreakdown(String),
    #[error("branch jump detected along the path")]
    BranchJump,
    #[error("singular shape (z in {{0,1}})")]
    SingularShape,
    #[error("1-loop invariant vanished")]
    ZeroInvariant,
    #[error("triangulation is not FAMED: {0}")]
    NotFamed(String),
    #[error("potential evaluated too close to a cut")]
    CutProximity,
    #[error("all C_k vanish")]
    DegeneratePivot,
    #[error("contour leaves the band -pi < Im y < 0")]
    BandViolation,
    #[error("integration dimension {0} exceeds the desk-scale guard")]
    DimensionTooLarge(usize),
    #[error("quadrature tail bound {0:e} too large")]
    TailBoundExceeded(f64),
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("flattening does not verify")]
    InvalidFlattening,
}

pub type Result<T> = std::result::Result<T, FamedError>;
