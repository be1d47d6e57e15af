use std::fmt;
use std::sync::Arc;

use super::expr::{ConvertError, Expr};
use super::poly::Poly;
use super::var::{derivative_name, InputDecl, TableError, VarId, VarKind, VarTable};

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum SystemError {
    #[error("undeclared variable `{0}`")]
    UndeclaredVariable(String),
    #[error("no equation for `{0}`")]
    MissingEquation(String),
    #[error("duplicate equation for `{0}`")]
    DuplicateEquation(String),
    #[error("`{0}` is not a differential variable")]
    NotDifferential(String),
    #[error("derivative of input `{0}` is not available")]
    MissingInputDerivative(String),
    #[error("negative exponent in equation for `{0}` outside Laurent mode")]
    LaurentNotAllowed(String),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("equation for `{0}`: {1}")]
    Convert(String, ConvertError),
}

/// Maps identifiers of `old` to identifiers of `new` by name.
pub fn remap_ids(old: &VarTable, new: &VarTable) -> Vec<VarId> {
    old.iter().map(|v| new.lookup(&v.name).expect("variable missing from extended table")).collect()
}

/// Declarations of `table` plus the given ones, with input derivative
/// variables up to `orders[i]` for every input `i`.
fn completed_decls(
    table: &VarTable,
    extra: Vec<(String, VarKind)>,
    inputs: &[InputDecl],
    orders: &[u32],
) -> Vec<(String, VarKind)> {
    let mut decls = table.declarations();
    decls.extend(extra);
    for (i, decl) in inputs.iter().enumerate() {
        for k in 0..=orders[i] {
            let kind = VarKind::Input { input: i as u32, order: k };
            if !decls.iter().any(|d| d.1 == kind) {
                decls.push((derivative_name(&decl.name, k), kind));
            }
        }
    }
    decls
}

/// Polynomial ODE system `x' = p(x, u)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OdeSystem {
    pub table: Arc<VarTable>,
    pub inputs: Vec<InputDecl>,
    /// Sorted by variable identifier.
    pub equations: Vec<(VarId, Poly)>,
    pub laurent: bool,
}

impl OdeSystem {
    /// Validates the system and adds derivative symbols for every input
    /// one order above the highest order used.
    pub fn new(
        table: VarTable,
        inputs: Vec<InputDecl>,
        mut equations: Vec<(VarId, Poly)>,
        laurent: bool,
    ) -> Result<Self, SystemError> {
        equations.sort_by_key(|e| e.0);
        for w in equations.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(SystemError::DuplicateEquation(table.name(w[0].0).to_string()));
            }
        }
        for &(v, ref p) in &equations {
            if v as usize >= table.len() {
                return Err(SystemError::UndeclaredVariable(format!("#{v}")));
            }
            if !table.kind(v).is_differential() {
                return Err(SystemError::NotDifferential(table.name(v).to_string()));
            }
            if p.vars().iter().chain(p.params().iter()).any(|&x| x as usize >= table.len()) {
                return Err(SystemError::UndeclaredVariable(table.name(v).to_string()));
            }
            if !laurent && p.is_laurent() {
                return Err(SystemError::LaurentNotAllowed(table.name(v).to_string()));
            }
        }
        for var in table.iter() {
            if var.kind.is_differential() && equations.binary_search_by_key(&var.index, |e| e.0).is_err() {
                return Err(SystemError::MissingEquation(var.name.clone()));
            }
        }
        let sys = OdeSystem { table: Arc::new(table), inputs, equations, laurent };
        sys.completed()
    }

    fn completed(self) -> Result<Self, SystemError> {
        let orders: Vec<u32> =
            (0..self.inputs.len() as u32).map(|i| self.input_order_used(i).map_or(1, |k| k + 1)).collect();
        let missing = (0..self.inputs.len() as u32)
            .any(|i| (0..=orders[i as usize]).any(|k| self.table.input_var(i, k).is_none()));
        if !missing {
            return Ok(self);
        }
        let decls = completed_decls(&self.table, vec![], &self.inputs, &orders);
        let table = VarTable::new(decls)?;
        Ok(self.retabled(table))
    }

    /// Same system over a table containing every symbol of the current one.
    pub fn retabled(&self, table: VarTable) -> OdeSystem {
        let map = remap_ids(&self.table, &table);
        let equations =
            self.equations.iter().map(|(v, p)| (map[*v as usize], remap_poly(p, &map))).collect::<Vec<_>>();
        let mut equations = equations;
        equations.sort_by_key(|e| e.0);
        OdeSystem { table: Arc::new(table), inputs: self.inputs.clone(), equations, laurent: self.laurent }
    }

    /// Extends the table by new declarations; returns the remapped system (still
    /// lacking equations for new differential variables) and the id map.
    pub fn extended_table(&self, extra: Vec<(String, VarKind)>) -> Result<(VarTable, Vec<VarId>), SystemError> {
        let orders: Vec<u32> = (0..self.inputs.len() as u32)
            .map(|i| self.table.max_input_order(i).unwrap_or(1))
            .collect();
        let table = VarTable::new(completed_decls(&self.table, extra, &self.inputs, &orders))?;
        let map = remap_ids(&self.table, &table);
        Ok((table, map))
    }

    pub fn table(&self) -> &VarTable {
        &self.table
    }

    pub fn rhs(&self, v: VarId) -> Option<&Poly> {
        self.equations.binary_search_by_key(&v, |e| e.0).ok().map(|i| &self.equations[i].1)
    }

    pub fn differential_vars(&self) -> Vec<VarId> {
        self.equations.iter().map(|e| e.0).collect()
    }

    pub fn state_vars(&self) -> Vec<VarId> {
        self.table.ids_of(|k| k == VarKind::State)
    }

    pub fn introduced_vars(&self) -> Vec<VarId> {
        self.table.ids_of(|k| k == VarKind::Introduced)
    }

    pub fn params(&self) -> Vec<VarId> {
        self.table.ids_of(|k| k == VarKind::Parameter)
    }

    pub fn input_vars(&self) -> Vec<VarId> {
        self.table.ids_of(|k| k.is_input())
    }

    /// Highest derivative order of input `input` occurring in some right-hand side.
    pub fn input_order_used(&self, input: u32) -> Option<u32> {
        self.equations
            .iter()
            .flat_map(|(_, p)| p.vars())
            .filter_map(|v| match self.table.kind(v) {
                VarKind::Input { input: i, order } if i == input => Some(order),
                _ => None,
            })
            .max()
    }

    pub fn has_inputs(&self) -> bool {
        !self.inputs.is_empty()
    }

    pub fn has_params(&self) -> bool {
        self.equations.iter().any(|(_, p)| !p.params().is_empty())
    }

    pub fn is_laurent_rhs(&self) -> bool {
        self.equations.iter().any(|(_, p)| p.is_laurent())
    }

    /// Time derivative of `f` along the system.
    pub fn lie_derivative(&self, f: &Poly) -> Result<Poly, SystemError> {
        let mut out = Poly::zero();
        for v in f.vars() {
            if v as usize >= self.table.len() {
                return Err(SystemError::UndeclaredVariable(format!("#{v}")));
            }
            let rate = match self.table.kind(v) {
                VarKind::State | VarKind::Introduced => self
                    .rhs(v)
                    .cloned()
                    .ok_or_else(|| SystemError::MissingEquation(self.table.name(v).to_string()))?,
                VarKind::Input { input, order } => Poly::var(
                    self.table
                        .input_var(input, order + 1)
                        .ok_or_else(|| SystemError::MissingInputDerivative(self.table.name(v).to_string()))?,
                ),
                VarKind::Coupling { .. } | VarKind::Parameter => {
                    return Err(SystemError::UndeclaredVariable(self.table.name(v).to_string()))
                }
            };
            out = out.add(&f.partial(v).mul(&rate));
        }
        Ok(out)
    }

    pub fn to_expr_system(&self) -> ExprSystem {
        ExprSystem {
            table: self.table.clone(),
            inputs: self.inputs.clone(),
            equations: self.equations.iter().map(|(v, p)| (*v, Expr::from_poly(p))).collect(),
            laurent: self.laurent,
        }
    }

    pub fn display(&self) -> SystemDisplay<'_> {
        SystemDisplay { sys: self }
    }
}

pub(crate) fn remap_poly(p: &Poly, map: &[VarId]) -> Poly {
    p.map_vars(|v| map[v as usize]).map_coeffs(|c| c.map_params(|v| map[v as usize]))
}

pub struct SystemDisplay<'a> {
    sys: &'a OdeSystem,
}

impl fmt::Display for SystemDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (v, p) in &self.sys.equations {
            writeln!(f, "{}' = {}", self.sys.table.name(*v), p.display(&self.sys.table))?;
        }
        Ok(())
    }
}

/// ODE system with elementary-function right-hand sides.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExprSystem {
    pub table: Arc<VarTable>,
    pub inputs: Vec<InputDecl>,
    pub equations: Vec<(VarId, Expr)>,
    pub laurent: bool,
}

impl ExprSystem {
    pub fn new(
        table: VarTable,
        inputs: Vec<InputDecl>,
        mut equations: Vec<(VarId, Expr)>,
        laurent: bool,
    ) -> Result<Self, SystemError> {
        equations.sort_by_key(|e| e.0);
        for w in equations.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(SystemError::DuplicateEquation(table.name(w[0].0).to_string()));
            }
        }
        for (v, e) in &equations {
            if !table.kind(*v).is_differential() {
                return Err(SystemError::NotDifferential(table.name(*v).to_string()));
            }
            if e.free_vars().iter().any(|&x| x as usize >= table.len()) {
                return Err(SystemError::UndeclaredVariable(table.name(*v).to_string()));
            }
        }
        for var in table.iter() {
            if var.kind.is_differential() && equations.binary_search_by_key(&var.index, |e| e.0).is_err() {
                return Err(SystemError::MissingEquation(var.name.clone()));
            }
        }
        let orders: Vec<u32> = (0..inputs.len() as u32)
            .map(|i| {
                equations
                    .iter()
                    .flat_map(|(_, e)| e.free_vars())
                    .filter_map(|v| match table.kind(v) {
                        VarKind::Input { input, order } if input == i => Some(order + 1),
                        _ => None,
                    })
                    .max()
                    .unwrap_or(1)
            })
            .collect();
        let decls = completed_decls(&table, vec![], &inputs, &orders);
        let full = VarTable::new(decls)?;
        let map = remap_ids(&table, &full);
        let equations = equations
            .into_iter()
            .map(|(v, e)| (map[v as usize], e.map_vars(&|x| map[x as usize])))
            .collect();
        Ok(ExprSystem { table: Arc::new(full), inputs, equations, laurent })
    }

    pub fn rhs(&self, v: VarId) -> Option<&Expr> {
        self.equations.iter().find(|e| e.0 == v).map(|e| &e.1)
    }

    /// Rate of change of a symbol: its equation, the next input derivative, or
    /// nothing for parameters.
    pub fn rate(&self, v: VarId) -> Option<Expr> {
        match self.table.kind(v) {
            VarKind::State | VarKind::Introduced => self.rhs(v).cloned(),
            VarKind::Input { input, order } => self.table.input_var(input, order + 1).map(Expr::Var),
            _ => None,
        }
    }

    pub fn lie_derivative(&self, e: &Expr) -> Result<Expr, SystemError> {
        for v in e.free_vars() {
            if let VarKind::Input { input, order } = self.table.kind(v) {
                if self.table.input_var(input, order + 1).is_none() {
                    return Err(SystemError::MissingInputDerivative(self.table.name(v).to_string()));
                }
            }
        }
        Ok(e.time_derivative(&|v| self.rate(v)))
    }

    pub fn is_polynomial(&self) -> bool {
        self.equations.iter().all(|(_, e)| e.to_poly(&self.table, self.laurent).is_ok())
    }

    pub fn to_ode(&self) -> Result<OdeSystem, SystemError> {
        let mut eqs = Vec::with_capacity(self.equations.len());
        for (v, e) in &self.equations {
            let p = e
                .to_poly(&self.table, self.laurent)
                .map_err(|err| SystemError::Convert(self.table.name(*v).to_string(), err))?;
            eqs.push((*v, p));
        }
        OdeSystem::new((*self.table).clone(), self.inputs.clone(), eqs, self.laurent)
    }
}

impl fmt::Display for ExprSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (v, e) in &self.equations {
            writeln!(f, "{}' = {}", self.table.name(*v), e.display(&self.table))?;
        }
        Ok(())
    }
}
