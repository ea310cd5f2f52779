use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Every failure the library can report. Each variant has a stable
/// machine-readable code, see [`Error::code`].
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A generator has no pure power in the ideal, so the quotient is infinite.
    NonNilpotent { generator: String },
    DimensionGuard { dim: usize, limit: usize },
    InvalidRelation(String),
    AlgebraMismatch,
    /// `nilpotent_power` called on an element with a nonzero real part.
    NotNilpotent { real_part: f64 },
    Syntax { position: usize, expected: Vec<&'static str> },
    UnknownFunction { name: String, position: usize },
    UnboundVariable(String),
    Domain { function: &'static str, argument: f64 },
    DivisionByZero,
    OrderGuard { order: u32, limit: u32 },
    UnknownManifold(String),
    UnknownChart(String),
    InvalidManifold(String),
    ChartDomain { chart: String },
    ManifoldMismatch,
    WeightMismatch { expected: usize, got: usize },
    ProbeBound { probe: usize, bound: f64 },
    FiberMismatch { gap: f64 },
    BoxTooLarge { terms: usize, limit: usize },
    EndpointMismatch(String),
    ChartPathUnresolvable { parameter: f64 },
    TargetChartUnresolved,
    NotInverse { deviation: f64 },
    InvalidComplex(String),
    NoTriangulation(String),
    InvalidArgument(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::NonNilpotent { .. } => "non_nilpotent",
            Error::DimensionGuard { .. } => "dimension_guard",
            Error::InvalidRelation(_) => "invalid_relation",
            Error::AlgebraMismatch => "algebra_mismatch",
            Error::NotNilpotent { .. } => "not_nilpotent",
            Error::Syntax { .. } => "syntax_error",
            Error::UnknownFunction { .. } => "unknown_function",
            Error::UnboundVariable(_) => "unbound_variable",
            Error::Domain { .. } => "domain_error",
            Error::DivisionByZero => "division_by_zero",
            Error::OrderGuard { .. } => "order_guard",
            Error::UnknownManifold(_) => "unknown_manifold",
            Error::UnknownChart(_) => "unknown_chart",
            Error::InvalidManifold(_) => "invalid_manifold",
            Error::ChartDomain { .. } => "chart_domain",
            Error::ManifoldMismatch => "manifold_mismatch",
            Error::WeightMismatch { .. } => "weight_mismatch",
            Error::ProbeBound { .. } => "probe_bound",
            Error::FiberMismatch { .. } => "fiber_mismatch",
            Error::BoxTooLarge { .. } => "box_too_large",
            Error::EndpointMismatch(_) => "endpoint_mismatch",
            Error::ChartPathUnresolvable { .. } => "chart_path_unresolvable",
            Error::TargetChartUnresolved => "target_chart_unresolved",
            Error::NotInverse { .. } => "not_inverse",
            Error::InvalidComplex(_) => "invalid_complex",
            Error::NoTriangulation(_) => "no_triangulation",
            Error::InvalidArgument(_) => "invalid_argument",
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NonNilpotent { generator } => {
                write!(f, "generator `{generator}` has no power in the ideal; the quotient is infinite-dimensional")
            }
            Error::DimensionGuard { dim, limit } => {
                write!(f, "algebra dimension {dim} exceeds the limit {limit}")
            }
            Error::InvalidRelation(msg) => write!(f, "invalid relation: {msg}"),
            Error::AlgebraMismatch => f.write_str("operands belong to different Weil algebras"),
            Error::NotNilpotent { real_part } => {
                write!(f, "element is not nilpotent (real part {real_part})")
            }
            Error::Syntax { position, expected } => {
                write!(f, "syntax error at byte {position}: expected one of ")?;
                for (i, e) in expected.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "`{e}`")?;
                }
                Ok(())
            }
            Error::UnknownFunction { name, position } => {
                write!(f, "unknown function `{name}` at byte {position}")
            }
            Error::UnboundVariable(name) => write!(f, "variable `{name}` is not bound"),
            Error::Domain { function, argument } => {
                write!(f, "{function} is not smooth at {argument}")
            }
            Error::DivisionByZero => f.write_str("division by zero (or by a non-invertible jet)"),
            Error::OrderGuard { order, limit } => {
                write!(f, "derivative order {order} exceeds the limit {limit}")
            }
            Error::UnknownManifold(name) => write!(f, "unknown manifold `{name}`"),
            Error::UnknownChart(id) => write!(f, "unknown chart `{id}`"),
            Error::InvalidManifold(msg) => write!(f, "invalid manifold: {msg}"),
            Error::ChartDomain { chart } => write!(f, "point lies outside the domain of chart `{chart}`"),
            Error::ManifoldMismatch => f.write_str("points live on different manifolds"),
            Error::WeightMismatch { expected, got } => {
                write!(f, "expected {expected} weights, got {got}")
            }
            Error::ProbeBound { probe, bound } => {
                write!(f, "probe {probe} has sampled C^k norm {bound} > 1")
            }
            Error::FiberMismatch { gap } => {
                write!(f, "points lie over different base points (gap {gap})")
            }
            Error::BoxTooLarge { terms, limit } => {
                write!(f, "coefficient box has {terms} terms, limit is {limit}")
            }
            Error::EndpointMismatch(msg) => write!(f, "endpoint mismatch: {msg}"),
            Error::ChartPathUnresolvable { parameter } => {
                write!(f, "curve leaves every declared chart at parameter {parameter}")
            }
            Error::TargetChartUnresolved => f.write_str("image point lies in no target chart"),
            Error::NotInverse { deviation } => {
                write!(f, "declared inverse deviates from identity by {deviation}")
            }
            Error::InvalidComplex(msg) => write!(f, "invalid simplicial complex: {msg}"),
            Error::NoTriangulation(name) => write!(f, "no stored triangulation for `{name}`"),
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
