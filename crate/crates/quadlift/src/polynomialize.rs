//! Introduction of new variables that turn elementary-function right-hand
//! sides into (Laurent) polynomials.

use std::collections::{BTreeSet, HashSet};

use num_traits::{Signed, ToPrimitive, Zero};

use crate::symcore::expr::ci;
use crate::symcore::{Expr, ExprSystem, OdeSystem, Q, SystemError, VarId, VarKind, VarTable};

pub const DEFAULT_BUDGET: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PolynomializeError {
    #[error("no polynomialization with at most {budget} new variables")]
    BudgetExceeded { budget: usize },
    #[error("cannot introduce a variable for `{0}`")]
    UnsupportedNode(String),
    #[error(transparent)]
    System(#[from] SystemError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Substitution {
    pub new_variable: VarId,
    pub name: String,
    /// Over the variables of the original system (identifiers of the new table).
    pub defining_expression: Expr,
    /// Derivative rewritten in the augmented variables.
    pub derivative_rhs: Expr,
}

#[derive(Clone, Debug)]
pub struct Polynomialization {
    pub system: OdeSystem,
    pub substitutions: Vec<Substitution>,
}

impl Polynomialization {
    pub fn order(&self) -> usize {
        self.substitutions.len()
    }
}

/// Maximal non-polynomial subtrees of all right-hand sides.
pub fn detect_nonpolynomial_nodes(system: &ExprSystem) -> Vec<Expr> {
    let mut out: Vec<Expr> = Vec::new();
    for (_, e) in &system.equations {
        for s in e.nonpolynomial_subtrees(&system.table, system.laurent) {
            if !out.contains(&s) {
                out.push(s);
            }
        }
    }
    out
}

struct Ctx<'a> {
    system: &'a ExprSystem,
    table: VarTable,
    ws: Vec<VarId>,
    /// Rewriting of powers and exponentials through integer multiples.
    multiples: bool,
}

fn ratio(b: &Expr, a: &Expr) -> Option<Q> {
    let terms = |e: &Expr| -> Vec<(Q, Expr)> {
        let n = e.normalize();
        let ts = match n {
            Expr::Add(ts) => ts,
            other => vec![other],
        };
        let mut v: Vec<(Q, Expr)> = ts
            .into_iter()
            .map(|t| match t {
                Expr::Const(r) => (r, ci(1)),
                Expr::Mul(mut fs) => match fs.first() {
                    Some(Expr::Const(r)) => {
                        let r = r.clone();
                        fs.remove(0);
                        let rest = if fs.len() == 1 { fs.pop().unwrap() } else { Expr::Mul(fs) };
                        (r, rest)
                    }
                    _ => (Q::from_integer(1.into()), Expr::Mul(fs)),
                },
                other => (Q::from_integer(1.into()), other),
            })
            .collect();
        v.sort_by(|x, y| x.1.cmp(&y.1));
        v
    };
    let (tb, ta) = (terms(b), terms(a));
    if tb.len() != ta.len() || ta.is_empty() {
        return None;
    }
    let k = tb[0].0.clone() / ta[0].0.clone();
    for (x, y) in tb.iter().zip(&ta) {
        if x.1 != y.1 || x.0 != y.0.clone() * k.clone() {
            return None;
        }
    }
    Some(k)
}

fn exponent(e: &Expr) -> Option<(Expr, Q)> {
    match e {
        Expr::Pow(b, k) => Some(((**b).clone(), Q::from_integer((*k).into()))),
        Expr::RealPow(b, a) => Some(((**b).clone(), a.clone())),
        _ => None,
    }
}

impl Ctx<'_> {
    fn new<'a>(system: &'a ExprSystem, count: usize, multiples: bool) -> Result<Ctx<'a>, PolynomializeError> {
        let taken = system.table.fresh_names(count);
        let mut decls = system.table.declarations();
        decls.extend(taken.iter().map(|n| (n.clone(), VarKind::Introduced)));
        let table = VarTable::new(decls).map_err(SystemError::from)?;
        let ws = taken.iter().map(|n| table.lookup(n).unwrap()).collect();
        Ok(Ctx { system, table, ws, multiples })
    }

    fn old_to_new(&self, e: &Expr) -> Expr {
        let t = &self.table;
        let s = &self.system.table;
        e.map_vars(&|v| t.lookup(s.name(v)).unwrap())
    }

    fn rewrite(&self, e: &Expr, defs: &[Expr]) -> Expr {
        let rebuilt = match e {
            Expr::Const(_) | Expr::Var(_) => return e.clone(),
            Expr::Add(ts) => Expr::Add(ts.iter().map(|t| self.rewrite(t, defs)).collect()),
            Expr::Mul(fs) => Expr::Mul(fs.iter().map(|t| self.rewrite(t, defs)).collect()),
            Expr::Pow(b, k) => Expr::Pow(Box::new(self.rewrite(b, defs)), *k),
            Expr::RealPow(b, a) => Expr::RealPow(Box::new(self.rewrite(b, defs)), a.clone()),
            Expr::Div(a, b) => Expr::Div(Box::new(self.rewrite(a, defs)), Box::new(self.rewrite(b, defs))),
            Expr::Exp(a) => Expr::Exp(Box::new(self.rewrite(a, defs))),
            Expr::Log(a) => Expr::Log(Box::new(self.rewrite(a, defs))),
            Expr::Sin(a) => Expr::Sin(Box::new(self.rewrite(a, defs))),
            Expr::Cos(a) => Expr::Cos(Box::new(self.rewrite(a, defs))),
        }
        .simplify();
        if !rebuilt.is_nonpolynomial_node(&self.table, self.system.laurent) {
            return rebuilt;
        }
        for (i, d) in defs.iter().enumerate() {
            if *d == rebuilt {
                return Expr::Var(self.ws[i]);
            }
        }
        if !self.multiples {
            return rebuilt;
        }
        let laurent = self.system.laurent;
        for (i, d) in defs.iter().enumerate() {
            let w = Expr::Var(self.ws[i]);
            if let (Expr::Exp(b), Expr::Exp(a)) = (&rebuilt, d) {
                if let Some(k) = ratio(b, a) {
                    if k.is_integer() && (k.is_positive() || laurent) {
                        return Expr::pow(w, k.to_integer().to_i32().unwrap_or(1)).simplify();
                    }
                }
            }
            if let (Some((bb, alpha)), Some((db, beta))) = (exponent(&rebuilt), exponent(d)) {
                if bb != db || beta.is_zero() {
                    continue;
                }
                let mut best: Option<(i64, i64)> = None;
                for k in -24i64..=24 {
                    if k == 0 || (k < 0 && !laurent) {
                        continue;
                    }
                    let n = alpha.clone() - beta.clone() * Q::from_integer(k.into());
                    if !n.is_integer() {
                        continue;
                    }
                    let n = n.to_integer().to_i64().unwrap_or(i64::MAX);
                    if n < 0 && !laurent {
                        continue;
                    }
                    let score = (n.abs() + k.abs(), if n < 0 { 1 } else { 0 });
                    if best.is_none_or(|(bn, bk)| score < (bn.abs() + bk.abs(), if bn < 0 { 1 } else { 0 })) {
                        best = Some((n, k));
                    }
                }
                if let Some((n, k)) = best {
                    let out = Expr::mul(Expr::pow(bb.clone(), n as i32), Expr::pow(w, k as i32)).simplify();
                    if out.nonpolynomial_subtrees(&self.table, laurent).is_empty() {
                        return out;
                    }
                }
            }
        }
        rebuilt
    }

    fn rate(&self, v: VarId) -> Option<Expr> {
        let t = &self.table;
        match t.kind(v) {
            VarKind::State => {
                let old = self.system.table.lookup(t.name(v))?;
                self.system.rhs(old).map(|e| self.old_to_new(e))
            }
            VarKind::Input { input, order } => t.input_var(input, order + 1).map(Expr::Var),
            _ => None,
        }
    }

    fn derivative(&self, i: usize, defs: &[Expr]) -> Expr {
        let d = &defs[i];
        let w = Expr::Var(self.ws[i]);
        let rate = |v: VarId| self.rate(v);
        let raw = match d {
            Expr::RealPow(b, a) => {
                Expr::Mul(vec![Expr::Const(a.clone()), w, Expr::pow((**b).clone(), -1), b.time_derivative(&rate)])
            }
            Expr::Exp(a) => Expr::Mul(vec![w, a.time_derivative(&rate)]),
            Expr::Sin(a) => {
                let c = Expr::Cos(a.clone()).simplify();
                Expr::Mul(vec![c, a.time_derivative(&rate)])
            }
            Expr::Cos(a) => {
                let s = Expr::Sin(a.clone()).simplify();
                Expr::Mul(vec![ci(-1), s, a.time_derivative(&rate)])
            }
            other => other.time_derivative(&rate),
        };
        self.rewrite(&raw.simplify(), defs)
    }

    /// Rewritten right-hand sides of states and new variables.
    fn rhs(&self, defs: &[Expr]) -> Vec<(VarId, Expr)> {
        let mut out = Vec::new();
        for (v, e) in &self.system.equations {
            let nv = self.table.lookup(self.system.table.name(*v)).unwrap();
            out.push((nv, self.rewrite(&self.old_to_new(e), defs)));
        }
        for i in 0..defs.len() {
            out.push((self.ws[i], self.derivative(i, defs)));
        }
        out
    }

    fn admissible(&self, e: &Expr) -> bool {
        let t = &self.table;
        e.free_vars().iter().all(|&v| match t.kind(v) {
            VarKind::Input { input, order } => order == 0 && self.system.inputs[input as usize].smooth,
            VarKind::Introduced | VarKind::Coupling { .. } => false,
            _ => true,
        })
    }

    fn back_substitute(&self, e: &Expr, defs: &[Expr]) -> Expr {
        e.substitute(&|v| self.ws.iter().position(|&w| w == v).map(|i| defs[i].clone())).simplify()
    }

    /// Candidate definitions for the non-polynomial subtrees of `rhs`.
    fn candidates(&self, rhs: &[(VarId, Expr)], defs: &[Expr]) -> Result<Vec<Vec<Expr>>, PolynomializeError> {
        let laurent = self.system.laurent;
        let mut out: BTreeSet<Vec<Expr>> = BTreeSet::new();
        let rate = |v: VarId| self.rate(v);
        for (_, e) in rhs {
            for s in e.nonpolynomial_subtrees(&self.table, laurent) {
                let s = self.back_substitute(&s, defs);
                let mut local = vec![s.clone()];
                let ds = s.time_derivative(&rate);
                for sub in ds.nonpolynomial_subtrees(&self.table, laurent) {
                    if sub.size() < s.size() {
                        local.push(sub);
                    }
                }
                let mut any = false;
                for c in local {
                    if !self.admissible(&c) || defs.contains(&c) {
                        continue;
                    }
                    let group = match &c {
                        Expr::Sin(a) | Expr::Cos(a) => {
                            let mut g = vec![Expr::Sin(a.clone()).simplify(), Expr::Cos(a.clone()).simplify()];
                            g.retain(|x| !defs.contains(x));
                            g.sort();
                            g
                        }
                        _ => vec![c],
                    };
                    any = true;
                    out.insert(group);
                }
                if !any {
                    return Err(PolynomializeError::UnsupportedNode(s.display(&self.table).to_string()));
                }
            }
        }
        Ok(out.into_iter().collect())
    }

    fn is_done(&self, rhs: &[(VarId, Expr)]) -> bool {
        rhs.iter().all(|(_, e)| e.nonpolynomial_subtrees(&self.table, self.system.laurent).is_empty())
    }
}

fn finish(system: &ExprSystem, defs: Vec<Expr>) -> Result<Polynomialization, PolynomializeError> {
    let ctx = Ctx::new(system, defs.len(), true)?;
    let defs: Vec<Expr> = defs.iter().map(|d| ctx.old_to_new(d)).collect();
    let rhs = ctx.rhs(&defs);
    let mut equations = Vec::new();
    for (v, e) in &rhs {
        let p = e
            .to_poly(&ctx.table, system.laurent)
            .map_err(|err| SystemError::Convert(ctx.table.name(*v).to_string(), err))?;
        equations.push((*v, p));
    }
    let sys = OdeSystem::new(ctx.table.clone(), system.inputs.clone(), equations, system.laurent)?;
    let to_final = |v: VarId| sys.table.lookup(ctx.table.name(v)).unwrap();
    let substitutions = defs
        .iter()
        .enumerate()
        .map(|(i, d)| Substitution {
            new_variable: to_final(ctx.ws[i]),
            name: ctx.table.name(ctx.ws[i]).to_string(),
            defining_expression: d.map_vars(&to_final),
            derivative_rhs: rhs[system.equations.len() + i].1.map_vars(&to_final),
        })
        .collect();
    Ok(Polynomialization { system: sys, substitutions })
}

fn explore(
    system: &ExprSystem,
    defs: Vec<Expr>,
    k: usize,
    seen: &mut HashSet<Vec<Expr>>,
    out: &mut Vec<Vec<Expr>>,
) -> Result<(), PolynomializeError> {
    if !seen.insert(defs.clone()) {
        return Ok(());
    }
    let ctx = Ctx::new(system, defs.len(), true)?;
    let nd: Vec<Expr> = defs.iter().map(|d| ctx.old_to_new(d)).collect();
    let rhs = ctx.rhs(&nd);
    if ctx.is_done(&rhs) {
        out.push(defs);
        return Ok(());
    }
    if defs.len() >= k {
        return Ok(());
    }
    for group in ctx.candidates(&rhs, &nd)? {
        if defs.len() + group.len() > k {
            continue;
        }
        let back: Vec<Expr> = group.iter().map(|g| new_to_old(&ctx, system, g)).collect();
        let mut next = defs.clone();
        next.extend(back);
        next.sort();
        next.dedup();
        explore(system, next, k, seen, out)?;
    }
    Ok(())
}

fn new_to_old(ctx: &Ctx<'_>, system: &ExprSystem, e: &Expr) -> Expr {
    e.map_vars(&|v| system.table.lookup(ctx.table.name(v)).unwrap())
}

/// Fewest substitutions reachable with the candidate rule, searched by
/// iterative deepening; ties go to the smallest sorted definition list.
pub fn polynomialize(system: &ExprSystem, budget: Option<usize>) -> Result<Polynomialization, PolynomializeError> {
    let budget = budget.unwrap_or(DEFAULT_BUDGET);
    for k in 0..=budget {
        let mut seen = HashSet::new();
        let mut found = Vec::new();
        explore(system, vec![], k, &mut seen, &mut found)?;
        if let Some(best) = found.into_iter().min_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b))) {
            return finish(system, best);
        }
    }
    Err(PolynomializeError::BudgetExceeded { budget })
}

/// Baseline that replaces every maximal non-polynomial subtree verbatim
/// until nothing is left; returns the number of substitutions.
pub fn greedy_order(system: &ExprSystem, budget: usize) -> Result<usize, PolynomializeError> {
    let mut defs: Vec<Expr> = Vec::new();
    loop {
        let ctx = Ctx::new(system, defs.len(), false)?;
        let nd: Vec<Expr> = defs.iter().map(|d| ctx.old_to_new(d)).collect();
        let rhs = ctx.rhs(&nd);
        let mut fresh = Vec::new();
        for (_, e) in &rhs {
            for s in e.nonpolynomial_subtrees(&ctx.table, system.laurent) {
                let s = ctx.back_substitute(&s, &nd);
                if !ctx.admissible(&s) {
                    return Err(PolynomializeError::UnsupportedNode(s.display(&ctx.table).to_string()));
                }
                let group = match &s {
                    Expr::Sin(a) | Expr::Cos(a) => vec![Expr::Sin(a.clone()).simplify(), Expr::Cos(a.clone()).simplify()],
                    _ => vec![s],
                };
                for g in group {
                    let g = new_to_old(&ctx, system, &g);
                    if !defs.contains(&g) && !fresh.contains(&g) {
                        fresh.push(g);
                    }
                }
            }
        }
        if fresh.is_empty() {
            return Ok(defs.len());
        }
        defs.extend(fresh);
        if defs.len() > budget {
            return Err(PolynomializeError::BudgetExceeded { budget });
        }
    }
}

/// Substitutes the definitions back into the polynomial system and compares
/// with the original right-hand sides after normalization.
pub fn check_back_substitution(original: &ExprSystem, result: &Polynomialization) -> bool {
    let t = &result.system.table;
    let defs: Vec<(VarId, &Expr)> =
        result.substitutions.iter().map(|s| (s.new_variable, &s.defining_expression)).collect();
    let sub = |e: &Expr| {
        e.substitute(&|v| defs.iter().find(|d| d.0 == v).map(|d| d.1.clone())).normalize()
    };
    original.equations.iter().all(|(v, e)| {
        let Some(nv) = t.lookup(original.table.name(*v)) else { return false };
        let Some(p) = result.system.rhs(nv) else { return false };
        let mapped = e.map_vars(&|x| t.lookup(original.table.name(x)).unwrap());
        sub(&Expr::from_poly(p)) == mapped.normalize()
    })
}
