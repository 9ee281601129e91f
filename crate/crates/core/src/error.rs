use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// A minimum-power constraint that no point can satisfy (zero channel
    /// vector with a positive requirement).
    #[error("constraint of user {user} is infeasible: zero channel with required power {required}")]
    InfeasibleConstraint { user: usize, required: f64 },

    #[error("initial point violates the minimum-power constraint of users {users:?}")]
    InfeasibleStart { users: Vec<usize> },

    #[error("grid of {points} points exceeds the enumeration cap of {cap}")]
    GridTooLarge { points: u128, cap: u128 },
}
