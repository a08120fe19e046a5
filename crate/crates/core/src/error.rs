use thiserror::Error;

/// Errors shared across the library.
///
/// Oracle-scale and budget errors are contracts, not failures: callers asked
/// for a brute-force check beyond the size the oracle is specified for.
#[derive(Debug, Error)]
pub enum Error {
    #[error("polynomial is reducible over the rationals")]
    NotIrreducible,
    #[error("discriminant {0} is not a positive perfect square, field is not cyclic")]
    NotCyclic(i128),
    #[error("basis matrix is singular or does not span an integral order: {0}")]
    BadBasis(String),
    #[error("no order-3 Dirichlet character exists modulo {0}")]
    NoCubicCharacter(u64),
    #[error("character modulo {0} is not primitive")]
    NotPrimitive(u64),
    #[error("L-value cross-check disagreement {0:.3e} exceeds tolerance {1:.3e}")]
    Nonconvergence(f64, f64),
    #[error("integer overflow in {0}")]
    Overflow(&'static str),
    #[error("input beyond oracle scale: {0}")]
    OracleScale(String),
    #[error("enumeration cap exceeded: {0}")]
    CapExceeded(String),
    #[error("prime {0} divides the conductor, closed form not applicable")]
    RamifiedPrime(u64),
    #[error("modulus {0} has a prime factor not dividing the conductor {1}")]
    BadModulus(u64, u64),
    #[error("{0} is not a divisor of a power of the conductor {1}")]
    BadDivisor(u64, u64),
    #[error("point budget exceeded: {0}")]
    Budget(String),
    #[error("truncation insufficient: nonzero branch found at the cap ({0})")]
    TruncationInsufficient(String),
    #[error("form is not irreducible over the cyclic cubic field")]
    NotIrreducibleOverK,
    #[error("form vanishes at the nonzero lattice point ({0}, {1})")]
    ZeroValueEncountered(i64, i64),
    #[error("invalid input: {0}")]
    Validation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
