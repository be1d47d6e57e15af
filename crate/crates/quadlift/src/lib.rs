//! Optimal monomial quadratization and polynomialization of ODE systems.

pub mod dimagnostic;
pub mod dsl;
pub mod emitverify;
pub mod polynomialize;
pub mod quadratize;
pub mod symcore;

pub use symcore::*;
