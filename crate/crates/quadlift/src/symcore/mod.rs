//! Exact symbolic kernel.

pub mod coeff;
pub mod expr;
pub mod monomial;
pub mod poly;
pub mod system;
pub mod var;

pub use coeff::{format_rational, q, qf, Coeff, Q};
pub use expr::{ConvertError, Expr};
pub use monomial::{decompose_quadratic, Monomial};
pub use poly::Poly;
pub use system::{ExprSystem, OdeSystem, SystemError};
pub use var::{derivative_name, InputDecl, VarId, VarKind, VarTable, Variable};
