//! Emission and verification of lifted quadratic systems.

mod numeric;
mod operators;

use std::collections::HashMap;
use std::fmt;

pub use numeric::{numeric_check, rk4_trajectory, InputSignal, NumericError, NumericSetup};
pub use operators::{OperatorForm, Rational};

use crate::quadratize::space::Space;
use crate::quadratize::{ModeKind, QuadratizeError, SearchMode};
use crate::symcore::{Coeff, Monomial, OdeSystem, Poly, Q, SystemError, VarId, VarKind, VarTable};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EmitError {
    #[error("monomial `{0}` has no quadratic factorization; not a quadratization")]
    NotAQuadratization(String),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("{0}")]
    Mode(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VerifyError {
    #[error("introduced variable `{0}` has no definition")]
    UndefinedIntroducedVariable(String),
    #[error("variable `{0}` of the original system is missing from the lifted one")]
    MissingVariable(String),
}

/// Lifted system together with the definitions of its introduced variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuadraticSystem {
    pub system: OdeSystem,
    /// Introduced variable and its definition over the original variables, in
    /// the identifiers of `system.table`.
    pub definitions: Vec<(VarId, Poly)>,
    pub mode: ModeKind,
}

impl QuadraticSystem {
    pub fn new_var_names(&self) -> Vec<String> {
        self.definitions.iter().map(|(w, _)| self.system.table.name(*w).to_string()).collect()
    }

    /// Block in the style `Introduced variables:` followed by the equations.
    pub fn display(&self) -> QuadraticDisplay<'_> {
        QuadraticDisplay(self)
    }

    /// Largest total degree of a rhs monomial, counting every symbol except parameters.
    pub fn max_degree(&self) -> i32 {
        self.system
            .equations
            .iter()
            .flat_map(|(_, p)| p.monomials().map(|m| m.degree()).collect::<Vec<_>>())
            .max()
            .unwrap_or(0)
    }

    /// Degree at most two everywhere, input derivatives at most linear, and in
    /// input-free mode no input derivatives at all.
    pub fn has_quadratic_shape(&self) -> bool {
        let t = &self.system.table;
        self.system.equations.iter().all(|(_, p)| {
            p.monomials().all(|m| {
                let deriv: i32 = m
                    .pairs()
                    .iter()
                    .filter(|(v, _)| matches!(t.kind(*v), VarKind::Input { order, .. } if order > 0))
                    .map(|p| p.1)
                    .sum();
                let neg = m.pairs().iter().any(|p| p.1 < 0);
                !neg && m.degree() <= 2 && deriv <= 1 && !(self.mode == ModeKind::InputFree && deriv > 0)
            })
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        let t = &self.system.table;
        let vars: Vec<serde_json::Value> = self
            .definitions
            .iter()
            .map(|(w, d)| serde_json::json!({"name": t.name(*w), "definition": d.display(t).to_string()}))
            .collect();
        let eqs: Vec<serde_json::Value> = self
            .system
            .equations
            .iter()
            .map(|(v, p)| serde_json::json!({"lhs": t.name(*v), "rhs": p.display(t).to_string()}))
            .collect();
        serde_json::json!({"introduced": vars, "equations": eqs})
    }

    /// Problem-file rendering of the lifted system.
    pub fn to_dsl(&self) -> String {
        let t = &self.system.table;
        let mut s = String::new();
        let names = |k: &dyn Fn(VarKind) -> bool| -> Vec<String> {
            t.iter().filter(|v| k(v.kind)).map(|v| v.name.clone()).collect()
        };
        s.push_str(&format!("states: {}\n", names(&|k| k.is_differential()).join(", ")));
        if !self.system.inputs.is_empty() {
            let ins: Vec<String> = self
                .system
                .inputs
                .iter()
                .map(|d| format!("{} {}", d.name, if d.smooth { "smooth" } else { "nonsmooth" }))
                .collect();
            s.push_str(&format!("inputs: {}\n", ins.join(", ")));
        }
        let ps = names(&|k| k == VarKind::Parameter);
        if !ps.is_empty() {
            s.push_str(&format!("params: {}\n", ps.join(", ")));
        }
        if self.system.laurent {
            s.push_str("options: laurent\n");
        }
        for (v, p) in &self.system.equations {
            s.push_str(&format!("{}' = {};\n", t.name(*v), p.display(t)));
        }
        s
    }
}

pub struct QuadraticDisplay<'a>(&'a QuadraticSystem);

impl fmt::Display for QuadraticDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let q = self.0;
        let t = &q.system.table;
        writeln!(f, "Introduced variables:")?;
        for (w, d) in &q.definitions {
            writeln!(f, "{} = {}", t.name(*w), d.display(t))?;
        }
        writeln!(f)?;
        write!(f, "{}", q.system.display())
    }
}

fn lifted_table(system: &OdeSystem, count: usize) -> Result<(VarTable, Vec<VarId>, Vec<VarId>), SystemError> {
    let taken = system.table.fresh_names(count);
    let extra = taken.iter().map(|n| (n.clone(), VarKind::Introduced)).collect();
    let (table, map) = system.extended_table(extra)?;
    let ws = taken.iter().map(|n| table.lookup(n).unwrap()).collect();
    Ok((table, map, ws))
}

fn remap(p: &Poly, map: &[VarId]) -> Poly {
    p.map_vars(|v| map[v as usize]).map_coeffs(|c| c.map_params(|v| map[v as usize]))
}

/// Emits the lifted system for the monomials `vars`.
pub fn emit_quadratic(system: &OdeSystem, vars: &[Monomial], mode: &SearchMode) -> Result<QuadraticSystem, QuadratizeError> {
    let space = Space::new(system, mode)?;
    let mut vars: Vec<Monomial> = vars.iter().filter(|m| !m.is_one() && !space.is_base(m)).cloned().collect();
    vars.sort();
    vars.dedup();
    Ok(emit_in_space(&space, &vars)?)
}

/// Order in which new variables receive the names `w0, w1, ...`: by degree,
/// then with earlier variables first.
pub fn naming_order(a: &Monomial, b: &Monomial) -> std::cmp::Ordering {
    a.degree().cmp(&b.degree()).then_with(|| b.cmp(a))
}

pub(crate) fn emit_in_space(space: &Space, vars: &[Monomial]) -> Result<QuadraticSystem, EmitError> {
    let system = &space.system;
    let mut vars = vars.to_vec();
    vars.sort_by(naming_order);
    let vars = &vars[..];
    let (table, map, ws) = lifted_table(system, vars.len())?;
    let mut name_of: HashMap<Monomial, VarId> = HashMap::new();
    for b in space.base() {
        name_of.insert(b.clone(), map[b.as_var().unwrap() as usize]);
    }
    for &t in space.top() {
        name_of.insert(Monomial::var(t), map[t as usize]);
    }
    for (m, &w) in vars.iter().zip(&ws) {
        name_of.insert(m.clone(), w);
    }
    let factor_poly = |m: &Monomial| -> Poly {
        if m.is_one() {
            Poly::one()
        } else {
            Poly::var(name_of[m])
        }
    };
    let rewrite = |p: &Poly| -> Result<Poly, EmitError> {
        let mut out = Poly::zero();
        for (m, c) in p.terms() {
            let (a, b) = space
                .factor(m, vars)
                .ok_or_else(|| EmitError::NotAQuadratization(Poly::monomial(m.clone()).display(&system.table).to_string()))?;
            let c = c.map_params(|v| map[v as usize]);
            out = out.add(&factor_poly(&a).mul(&factor_poly(&b)).scale(&c));
        }
        Ok(out)
    };
    let mut equations = Vec::new();
    for (v, p) in &system.equations {
        equations.push((map[*v as usize], rewrite(p)?));
    }
    let mut definitions = Vec::new();
    for (m, &w) in vars.iter().zip(&ws) {
        let d = system.lie_derivative(&Poly::monomial(m.clone()))?;
        equations.push((w, rewrite(&d)?));
        definitions.push((w, remap(&Poly::monomial(m.clone()), &map)));
    }
    let lifted = OdeSystem::new(table, system.inputs.clone(), equations, system.laurent)?;
    Ok(QuadraticSystem { system: lifted, definitions, mode: space.kind })
}

/// Exact check that `lifted` with `definitions` reproduces `original`.
pub fn verify_symbolic(
    original: &OdeSystem,
    lifted: &QuadraticSystem,
    definitions: &[(VarId, Poly)],
) -> Result<bool, VerifyError> {
    let lt = &lifted.system.table;
    for v in original.table.iter() {
        if lt.lookup(&v.name).is_none() {
            return Err(VerifyError::MissingVariable(v.name.clone()));
        }
    }
    for w in lifted.system.table.iter() {
        let own = original.table.lookup(&w.name).is_some();
        if w.kind == VarKind::Introduced && !own && !definitions.iter().any(|d| d.0 == w.index) {
            return Err(VerifyError::UndefinedIntroducedVariable(w.name.clone()));
        }
    }
    let defs: HashMap<VarId, &Poly> = definitions.iter().map(|(w, p)| (*w, p)).collect();
    let sub = |p: &Poly| p.substitute(&|v| defs.get(&v).map(|d| (*d).clone()));
    let orig = original.retabled(lt.as_ref().clone());
    for (v, p) in &orig.equations {
        let Some(rhs) = lifted.system.rhs(*v) else { return Ok(false) };
        match sub(rhs) {
            Some(s) if s == *p => {}
            _ => return Ok(false),
        }
    }
    for (w, d) in definitions {
        let Ok(expected) = orig.lie_derivative(d) else { return Ok(false) };
        let Some(rhs) = lifted.system.rhs(*w) else { return Ok(false) };
        match sub(rhs) {
            Some(s) if s == expected => {}
            _ => return Ok(false),
        }
    }
    Ok(true)
}

/// Decides whether polynomial `candidates` quadratize the system by exact
/// linear algebra over products of at most two alphabet elements.
pub fn verify_polynomial_candidate(system: &OdeSystem, candidates: &[Poly], mode: &SearchMode) -> Option<QuadraticSystem> {
    let space = Space::new(system, mode).ok()?;
    // Alphabet: (expansion over original vars, lifted symbol index)
    let base: Vec<Poly> = space.base().iter().map(|m| Poly::monomial(m.clone())).collect();
    let (table, map, ws) = lifted_table(system, candidates.len()).ok()?;
    let mut elems: Vec<(Poly, Poly)> = space
        .base()
        .iter()
        .zip(base.iter())
        .map(|(m, p)| (p.clone(), Poly::var(map[m.as_var().unwrap() as usize])))
        .collect();
    for (c, &w) in candidates.iter().zip(&ws) {
        if c.vars().iter().any(|&v| space.top().contains(&v)) {
            return None;
        }
        if mode.kind == ModeKind::InputFree && c.vars().iter().any(|&v| system.table.kind(v).is_input()) {
            return None;
        }
        elems.push((c.clone(), Poly::var(w)));
    }
    let mut basis: Vec<(Poly, Poly)> = vec![(Poly::one(), Poly::one())];
    for i in 0..elems.len() {
        basis.push(elems[i].clone());
        for j in i..elems.len() {
            basis.push((elems[i].0.mul(&elems[j].0), elems[i].1.mul(&elems[j].1)));
        }
    }
    for &t in space.top() {
        let tv = Poly::var(t);
        let tl = Poly::var(map[t as usize]);
        basis.push((tv.clone(), tl.clone()));
        for e in &elems {
            basis.push((e.0.mul(&tv), e.1.mul(&tl)));
        }
    }
    let mut equations = Vec::new();
    let mut gens: Vec<(VarId, Poly)> =
        system.equations.iter().map(|(v, p)| (map[*v as usize], p.clone())).collect();
    for (c, &w) in candidates.iter().zip(&ws) {
        gens.push((w, system.lie_derivative(c).ok()?));
    }
    for (v, target) in gens {
        let coeffs = solve_combination(&basis, &target)?;
        let mut rhs = Poly::zero();
        for (k, c) in coeffs.iter().enumerate() {
            if !c.is_zero() {
                rhs = rhs.add(&basis[k].1.scale(&c.map_params(|p| map[p as usize])));
            }
        }
        equations.push((v, rhs));
    }
    let definitions = candidates.iter().zip(&ws).map(|(c, &w)| (w, remap(c, &map))).collect();
    let lifted = OdeSystem::new(table, system.inputs.clone(), equations, system.laurent).ok()?;
    Some(QuadraticSystem { system: lifted, definitions, mode: mode.kind })
}

/// Solves `sum_k x_k basis_k = target` with rational matrix entries and
/// coefficient-valued right-hand side; free unknowns are set to zero.
fn solve_combination(basis: &[(Poly, Poly)], target: &Poly) -> Option<Vec<Coeff>> {
    let mut rows: Vec<Monomial> = target.monomials().cloned().collect();
    for (b, _) in basis {
        rows.extend(b.monomials().cloned());
    }
    rows.sort();
    rows.dedup();
    let index: HashMap<&Monomial, usize> = rows.iter().enumerate().map(|(i, m)| (m, i)).collect();
    let ncol = basis.len();
    let mut mat: Vec<Vec<Q>> = vec![vec![Q::default(); ncol]; rows.len()];
    let mut rhs: Vec<Coeff> = vec![Coeff::zero(); rows.len()];
    for (k, (b, _)) in basis.iter().enumerate() {
        for (m, c) in b.terms() {
            mat[index[m]][k] = c.as_rational()?;
        }
    }
    for (m, c) in target.terms() {
        rhs[index[m]] = c.clone();
    }
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..ncol {
        let Some(p) = (r..rows.len()).find(|&i| mat[i][col] != Q::default()) else { continue };
        mat.swap(r, p);
        rhs.swap(r, p);
        let inv = Q::from_integer(1.into()) / mat[r][col].clone();
        for x in mat[r].iter_mut() {
            *x = x.clone() * &inv;
        }
        rhs[r] = rhs[r].scale(&inv);
        for i in 0..rows.len() {
            if i != r && mat[i][col] != Q::default() {
                let f = mat[i][col].clone();
                for j in 0..ncol {
                    let d = mat[r][j].clone() * &f;
                    mat[i][j] -= d;
                }
                let d = rhs[r].scale(&f);
                rhs[i] = rhs[i].sub(&d);
            }
        }
        pivots.push(col);
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    if rhs[r..].iter().any(|c| !c.is_zero()) {
        return None;
    }
    let mut x = vec![Coeff::zero(); ncol];
    for (i, &col) in pivots.iter().enumerate() {
        x[col] = rhs[i].clone();
    }
    Some(x)
}
