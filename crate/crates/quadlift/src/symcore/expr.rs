use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Signed, ToPrimitive, Zero};

use super::coeff::{format_rational, q, Coeff, Q};
use super::monomial::Monomial;
use super::poly::Poly;
use super::var::{VarId, VarKind, VarTable};

/// Elementary-function expression tree.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Const(Q),
    Var(VarId),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Pow(Box<Expr>, i32),
    RealPow(Box<Expr>, Q),
    Div(Box<Expr>, Box<Expr>),
    Exp(Box<Expr>),
    Log(Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum ConvertError {
    #[error("non-polynomial node")]
    NonPolynomial(Expr),
    #[error("division by zero")]
    DivisionByZero,
}

pub fn c(r: Q) -> Expr {
    Expr::Const(r)
}

pub fn ci(n: i64) -> Expr {
    Expr::Const(q(n))
}

impl Expr {
    pub fn var(v: VarId) -> Expr {
        Expr::Var(v)
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Add(vec![a, b])
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Mul(vec![a, b])
    }

    pub fn neg(a: Expr) -> Expr {
        Expr::Mul(vec![ci(-1), a])
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::Add(vec![a, Expr::neg(b)])
    }

    pub fn pow(a: Expr, k: i32) -> Expr {
        Expr::Pow(Box::new(a), k)
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::Div(Box::new(a), Box::new(b))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(r) if r.is_zero())
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Expr::Const(r) if r.is_one())
    }

    pub fn as_const(&self) -> Option<&Q> {
        match self {
            Expr::Const(r) => Some(r),
            _ => None,
        }
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Const(_) | Expr::Var(_) => vec![],
            Expr::Add(v) | Expr::Mul(v) => v.iter().collect(),
            Expr::Pow(b, _) | Expr::RealPow(b, _) => vec![b],
            Expr::Div(a, b) => vec![a, b],
            Expr::Exp(a) | Expr::Log(a) | Expr::Sin(a) | Expr::Cos(a) => vec![a],
        }
    }

    fn map_children(&self, f: &mut dyn FnMut(&Expr) -> Expr) -> Expr {
        match self {
            Expr::Const(_) | Expr::Var(_) => self.clone(),
            Expr::Add(v) => Expr::Add(v.iter().map(&mut *f).collect()),
            Expr::Mul(v) => Expr::Mul(v.iter().map(&mut *f).collect()),
            Expr::Pow(b, k) => Expr::Pow(Box::new(f(b)), *k),
            Expr::RealPow(b, a) => Expr::RealPow(Box::new(f(b)), a.clone()),
            Expr::Div(a, b) => Expr::Div(Box::new(f(a)), Box::new(f(b))),
            Expr::Exp(a) => Expr::Exp(Box::new(f(a))),
            Expr::Log(a) => Expr::Log(Box::new(f(a))),
            Expr::Sin(a) => Expr::Sin(Box::new(f(a))),
            Expr::Cos(a) => Expr::Cos(Box::new(f(a))),
        }
    }

    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    pub fn free_vars(&self) -> BTreeSet<VarId> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<VarId>) {
        if let Expr::Var(v) = self {
            out.insert(*v);
        }
        for ch in self.children() {
            ch.collect_vars(out);
        }
    }

    /// Replaces variables through `f` (unmapped variables stay).
    pub fn substitute(&self, f: &dyn Fn(VarId) -> Option<Expr>) -> Expr {
        match self {
            Expr::Var(v) => f(*v).unwrap_or_else(|| self.clone()),
            _ => self.map_children(&mut |ch| ch.substitute(f)),
        }
    }

    pub fn map_vars(&self, f: &dyn Fn(VarId) -> VarId) -> Expr {
        self.substitute(&|v| Some(Expr::Var(f(v))))
    }

    /// Canonical simplification: flattening, constant folding, collection of
    /// like terms and like factors, merging of exponentials.
    pub fn simplify(&self) -> Expr {
        match self {
            Expr::Const(_) | Expr::Var(_) => self.clone(),
            Expr::Add(v) => simplify_add(v.iter().map(|e| e.simplify()).collect()),
            Expr::Mul(v) => simplify_mul(v.iter().map(|e| e.simplify()).collect()),
            Expr::Div(a, b) => simplify_mul(vec![a.simplify(), simplify_pow(b.simplify(), -1)]),
            Expr::Pow(b, k) => simplify_pow(b.simplify(), *k),
            Expr::RealPow(b, a) => simplify_realpow(b.simplify(), a.clone()),
            Expr::Exp(a) => {
                let a = a.simplify();
                if a.is_zero() {
                    ci(1)
                } else if let Expr::Log(inner) = a {
                    *inner
                } else {
                    Expr::Exp(Box::new(a))
                }
            }
            Expr::Log(a) => {
                let a = a.simplify();
                if a.is_one() {
                    ci(0)
                } else if let Expr::Exp(inner) = a {
                    *inner
                } else {
                    Expr::Log(Box::new(a))
                }
            }
            Expr::Sin(a) => {
                let a = a.simplify();
                if a.is_zero() {
                    ci(0)
                } else {
                    Expr::Sin(Box::new(a))
                }
            }
            Expr::Cos(a) => {
                let a = a.simplify();
                if a.is_zero() {
                    ci(1)
                } else {
                    Expr::Cos(Box::new(a))
                }
            }
        }
    }

    /// Distributes products over sums and expands positive integer powers of sums,
    /// recursively inside function arguments, then simplifies.
    pub fn normalize(&self) -> Expr {
        let s = self.simplify();
        simplify_add(expand_terms(&s)).simplify()
    }

    /// Partial derivative with respect to `v`.
    pub fn diff(&self, v: VarId) -> Expr {
        self.diff_raw(v).simplify()
    }

    fn diff_raw(&self, v: VarId) -> Expr {
        match self {
            Expr::Const(_) => ci(0),
            Expr::Var(w) => ci(if *w == v { 1 } else { 0 }),
            Expr::Add(ts) => Expr::Add(ts.iter().map(|t| t.diff_raw(v)).collect()),
            Expr::Mul(fs) => {
                let mut terms = Vec::new();
                for i in 0..fs.len() {
                    if !fs[i].free_vars().contains(&v) {
                        continue;
                    }
                    let mut prod: Vec<Expr> = fs
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .map(|(_, f)| f.clone())
                        .collect();
                    prod.push(fs[i].diff_raw(v));
                    terms.push(Expr::Mul(prod));
                }
                Expr::Add(terms)
            }
            Expr::Pow(b, k) => Expr::Mul(vec![ci(*k as i64), Expr::pow((**b).clone(), k - 1), b.diff_raw(v)]),
            Expr::RealPow(b, a) => Expr::Mul(vec![
                Expr::Const(a.clone()),
                self.clone(),
                Expr::pow((**b).clone(), -1),
                b.diff_raw(v),
            ]),
            Expr::Div(a, b) => {
                Expr::Mul(vec![(**a).clone(), Expr::pow((**b).clone(), -1)]).diff_raw(v)
            }
            Expr::Exp(a) => Expr::Mul(vec![self.clone(), a.diff_raw(v)]),
            Expr::Log(a) => Expr::Mul(vec![a.diff_raw(v), Expr::pow((**a).clone(), -1)]),
            Expr::Sin(a) => Expr::Mul(vec![Expr::Cos(a.clone()), a.diff_raw(v)]),
            Expr::Cos(a) => Expr::Mul(vec![ci(-1), Expr::Sin(a.clone()), a.diff_raw(v)]),
        }
    }

    /// Derivative along trajectories: sum over free variables with a known rate.
    pub fn time_derivative(&self, rate: &dyn Fn(VarId) -> Option<Expr>) -> Expr {
        let mut terms = Vec::new();
        for v in self.free_vars() {
            if let Some(r) = rate(v) {
                terms.push(Expr::Mul(vec![self.diff_raw(v), r]));
            }
        }
        Expr::Add(terms).simplify()
    }

    /// Whether this node (not its children) is outside the (Laurent-)polynomial fragment.
    pub fn is_nonpolynomial_node(&self, table: &VarTable, laurent: bool) -> bool {
        match self {
            Expr::Exp(_) | Expr::Log(_) | Expr::Sin(_) | Expr::Cos(_) => true,
            Expr::RealPow(b, a) => {
                if a.is_integer() {
                    Expr::Pow(b.clone(), a.to_integer().to_i32().unwrap_or(i32::MAX))
                        .is_nonpolynomial_node(table, laurent)
                } else {
                    true
                }
            }
            Expr::Pow(b, k) if *k < 0 => !invertible(b, table, laurent),
            Expr::Div(_, b) => !invertible(b, table, laurent),
            _ => false,
        }
    }

    /// Maximal subtrees rooted at non-polynomial nodes, deduplicated, in first-seen order.
    pub fn nonpolynomial_subtrees(&self, table: &VarTable, laurent: bool) -> Vec<Expr> {
        let mut out = Vec::new();
        self.collect_nonpoly(table, laurent, &mut out);
        out
    }

    fn collect_nonpoly(&self, table: &VarTable, laurent: bool, out: &mut Vec<Expr>) {
        if self.is_nonpolynomial_node(table, laurent) {
            if !out.contains(self) {
                out.push(self.clone());
            }
            return;
        }
        for ch in self.children() {
            ch.collect_nonpoly(table, laurent, out);
        }
    }

    pub fn to_poly(&self, table: &VarTable, laurent: bool) -> Result<Poly, ConvertError> {
        match self {
            Expr::Const(r) => Ok(Poly::constant(Coeff::rational(r.clone()))),
            Expr::Var(v) => Ok(if table.kind(*v) == VarKind::Parameter {
                Poly::constant(Coeff::param(*v))
            } else {
                Poly::var(*v)
            }),
            Expr::Add(ts) => {
                let mut acc = Poly::zero();
                for t in ts {
                    acc = acc.add(&t.to_poly(table, laurent)?);
                }
                Ok(acc)
            }
            Expr::Mul(fs) => {
                let mut acc = Poly::one();
                for f in fs {
                    acc = acc.mul(&f.to_poly(table, laurent)?);
                    if acc.is_zero() {
                        break;
                    }
                }
                Ok(acc)
            }
            Expr::Pow(b, k) => {
                let p = b.to_poly(table, laurent)?;
                if *k >= 0 {
                    return Ok(p.pow(*k as u32));
                }
                invert_poly(&p, table, laurent)
                    .ok_or_else(|| ConvertError::NonPolynomial(self.clone()))
                    .and_then(|r| r.map(|inv| inv.pow((-*k) as u32)))
            }
            Expr::Div(a, b) => {
                let pa = a.to_poly(table, laurent)?;
                let pb = b.to_poly(table, laurent)?;
                let inv = invert_poly(&pb, table, laurent)
                    .ok_or_else(|| ConvertError::NonPolynomial(self.clone()))??;
                Ok(pa.mul(&inv))
            }
            Expr::RealPow(b, a) if a.is_integer() => {
                Expr::Pow(b.clone(), a.to_integer().to_i32().ok_or_else(|| ConvertError::NonPolynomial(self.clone()))?)
                    .to_poly(table, laurent)
            }
            _ => Err(ConvertError::NonPolynomial(self.clone())),
        }
    }

    pub fn from_poly(p: &Poly) -> Expr {
        let mut terms = Vec::new();
        for (m, cf) in p.terms() {
            let mut factors = vec![coeff_expr(cf)];
            for &(v, e) in m.pairs() {
                factors.push(if e == 1 { Expr::Var(v) } else { Expr::pow(Expr::Var(v), e) });
            }
            terms.push(Expr::Mul(factors));
        }
        Expr::Add(terms).simplify()
    }

    pub fn from_monomial(m: &Monomial) -> Expr {
        Expr::from_poly(&Poly::monomial(m.clone()))
    }

    pub fn eval(&self, value: &dyn Fn(VarId) -> f64) -> f64 {
        match self {
            Expr::Const(r) => r.to_f64().unwrap_or(f64::NAN),
            Expr::Var(v) => value(*v),
            Expr::Add(ts) => ts.iter().map(|t| t.eval(value)).sum(),
            Expr::Mul(fs) => fs.iter().map(|f| f.eval(value)).product(),
            Expr::Pow(b, k) => b.eval(value).powi(*k),
            Expr::RealPow(b, a) => b.eval(value).powf(a.to_f64().unwrap_or(f64::NAN)),
            Expr::Div(a, b) => a.eval(value) / b.eval(value),
            Expr::Exp(a) => a.eval(value).exp(),
            Expr::Log(a) => a.eval(value).ln(),
            Expr::Sin(a) => a.eval(value).sin(),
            Expr::Cos(a) => a.eval(value).cos(),
        }
    }

    /// Variables occurring under a negative or fractional power, a quotient or a logarithm.
    pub fn singular_vars(&self) -> BTreeSet<VarId> {
        let mut out = BTreeSet::new();
        self.collect_singular(&mut out);
        out
    }

    fn collect_singular(&self, out: &mut BTreeSet<VarId>) {
        match self {
            Expr::Pow(b, k) if *k < 0 => out.extend(b.free_vars()),
            Expr::RealPow(b, _) | Expr::Log(b) | Expr::Div(_, b) => out.extend(b.free_vars()),
            _ => {}
        }
        for ch in self.children() {
            ch.collect_singular(out);
        }
    }

    pub fn display<'a>(&'a self, table: &'a VarTable) -> ExprDisplay<'a> {
        ExprDisplay { e: self, table }
    }
}

fn coeff_expr(cf: &Coeff) -> Expr {
    let mut terms = Vec::new();
    for (m, r) in cf.terms() {
        let mut factors = vec![Expr::Const(r.clone())];
        for &(v, e) in m.pairs() {
            factors.push(if e == 1 { Expr::Var(v) } else { Expr::pow(Expr::Var(v), e) });
        }
        terms.push(Expr::Mul(factors));
    }
    Expr::Add(terms)
}

fn invertible(b: &Expr, table: &VarTable, laurent: bool) -> bool {
    match b.to_poly(table, laurent) {
        Ok(p) => matches!(invert_poly(&p, table, laurent), Some(Ok(_))),
        Err(_) => false,
    }
}

/// Inverse of a single-term polynomial; `None` when it is not invertible in the
/// allowed fragment.
fn invert_poly(p: &Poly, table: &VarTable, laurent: bool) -> Option<Result<Poly, ConvertError>> {
    if p.is_zero() {
        return Some(Err(ConvertError::DivisionByZero));
    }
    let (m, cf) = p.as_single_term()?;
    let only_params = m.vars().all(|v| table.kind(v) == VarKind::Parameter);
    if !laurent && !m.is_one() && !only_params {
        return None;
    }
    let inv = cf.inverse()?;
    Some(Ok(Poly::term(m.pow(-1), inv)))
}

fn split_coef(t: Expr) -> (Q, Option<Expr>) {
    match t {
        Expr::Const(r) => (r, None),
        Expr::Mul(mut fs) => {
            if let Some(Expr::Const(_)) = fs.first() {
                let Expr::Const(r) = fs.remove(0) else { unreachable!() };
                let rest = if fs.len() == 1 { fs.pop().unwrap() } else { Expr::Mul(fs) };
                (r, Some(rest))
            } else {
                (Q::one(), Some(Expr::Mul(fs)))
            }
        }
        other => (Q::one(), Some(other)),
    }
}

fn with_coef(r: Q, rest: Option<Expr>) -> Expr {
    match rest {
        None => Expr::Const(r),
        Some(e) if r.is_one() => e,
        Some(Expr::Mul(mut fs)) => {
            fs.insert(0, Expr::Const(r));
            Expr::Mul(fs)
        }
        Some(e) => Expr::Mul(vec![Expr::Const(r), e]),
    }
}

fn simplify_add(terms: Vec<Expr>) -> Expr {
    let mut flat = Vec::new();
    for t in terms {
        match t {
            Expr::Add(inner) => flat.extend(inner),
            other => flat.push(other),
        }
    }
    let mut acc: BTreeMap<Option<Expr>, Q> = BTreeMap::new();
    for t in flat {
        let (r, rest) = split_coef(t);
        *acc.entry(rest).or_insert_with(Q::zero) += r;
    }
    let mut out: Vec<Expr> =
        acc.into_iter().filter(|(_, r)| !r.is_zero()).map(|(rest, r)| with_coef(r, rest)).collect();
    match out.len() {
        0 => ci(0),
        1 => out.pop().unwrap(),
        _ => {
            out.sort();
            Expr::Add(out)
        }
    }
}

fn simplify_mul(factors: Vec<Expr>) -> Expr {
    let mut flat = Vec::new();
    for f in factors {
        match f {
            Expr::Mul(inner) => flat.extend(inner),
            other => flat.push(other),
        }
    }
    let mut coef = Q::one();
    let mut powers: BTreeMap<Expr, Q> = BTreeMap::new();
    let mut exps: Vec<Expr> = Vec::new();
    for f in flat {
        match f {
            Expr::Const(r) => coef *= r,
            Expr::Exp(a) => exps.push(*a),
            Expr::Pow(b, k) => *powers.entry(*b).or_insert_with(Q::zero) += q(k as i64),
            Expr::RealPow(b, a) => *powers.entry(*b).or_insert_with(Q::zero) += a,
            other => *powers.entry(other).or_insert_with(Q::zero) += Q::one(),
        }
    }
    if coef.is_zero() {
        return ci(0);
    }
    let mut out = Vec::new();
    for (base, e) in powers {
        if e.is_zero() {
            continue;
        }
        let node = if e.is_integer() {
            let k = e.to_integer().to_i32().unwrap_or(i32::MAX);
            if k == 1 {
                base
            } else {
                Expr::Pow(Box::new(base), k)
            }
        } else {
            Expr::RealPow(Box::new(base), e)
        };
        match node {
            Expr::Const(r) => coef *= r,
            other => out.push(other),
        }
    }
    if !exps.is_empty() {
        let arg = simplify_add(exps);
        if !arg.is_zero() {
            out.push(Expr::Exp(Box::new(arg)));
        }
    }
    out.sort();
    if out.is_empty() {
        return Expr::Const(coef);
    }
    if coef.is_one() && out.len() == 1 {
        return out.pop().unwrap();
    }
    if !coef.is_one() {
        out.insert(0, Expr::Const(coef));
    }
    Expr::Mul(out)
}

fn simplify_pow(b: Expr, k: i32) -> Expr {
    if k == 0 {
        return ci(1);
    }
    if k == 1 {
        return b;
    }
    match b {
        Expr::Const(r) => {
            if r.is_zero() && k < 0 {
                Expr::Pow(Box::new(Expr::Const(r)), k)
            } else if k > 0 {
                Expr::Const(num_traits::pow(r, k as usize))
            } else {
                Expr::Const(num_traits::pow(r.recip(), (-k) as usize))
            }
        }
        Expr::Pow(c, j) => simplify_pow(*c, j * k),
        Expr::RealPow(c, a) => simplify_realpow(*c, a * q(k as i64)),
        Expr::Mul(fs) => simplify_mul(fs.into_iter().map(|f| simplify_pow(f, k)).collect()),
        Expr::Exp(a) => Expr::Exp(Box::new(simplify_mul(vec![ci(k as i64), *a]))).simplify(),
        other => Expr::Pow(Box::new(other), k),
    }
}

fn simplify_realpow(b: Expr, a: Q) -> Expr {
    if a.is_integer() {
        return simplify_pow(b, a.to_integer().to_i32().unwrap_or(i32::MAX));
    }
    match b {
        Expr::RealPow(c, x) => simplify_realpow(*c, x * a),
        Expr::Pow(c, j) => simplify_realpow(*c, a * q(j as i64)),
        Expr::Const(r) if r.is_one() => ci(1),
        other => Expr::RealPow(Box::new(other), a),
    }
}

/// Terms of the full expansion of an already simplified expression.
fn expand_terms(e: &Expr) -> Vec<Expr> {
    match e {
        Expr::Add(ts) => ts.iter().flat_map(expand_terms).collect(),
        Expr::Mul(fs) => {
            let mut acc = vec![ci(1)];
            for f in fs {
                let ft = expand_terms(f);
                let mut next = Vec::with_capacity(acc.len() * ft.len());
                for a in &acc {
                    for b in &ft {
                        next.push(simplify_mul(vec![a.clone(), b.clone()]));
                    }
                }
                acc = next;
            }
            acc
        }
        Expr::Pow(b, k) if *k > 0 => {
            let bt = expand_terms(b);
            if bt.len() == 1 {
                return vec![simplify_pow(bt.into_iter().next().unwrap(), *k)];
            }
            let mut acc = vec![ci(1)];
            for _ in 0..*k {
                let mut next = Vec::with_capacity(acc.len() * bt.len());
                for a in &acc {
                    for t in &bt {
                        next.push(simplify_mul(vec![a.clone(), t.clone()]));
                    }
                }
                acc = vec![simplify_add(next)];
                acc = match acc.pop().unwrap() {
                    Expr::Add(v) => v,
                    other => vec![other],
                };
            }
            acc
        }
        Expr::Pow(b, k) => vec![simplify_pow(b.normalize(), *k)],
        Expr::RealPow(b, a) => vec![simplify_realpow(b.normalize(), a.clone())],
        Expr::Exp(a) => vec![Expr::Exp(Box::new(a.normalize())).simplify()],
        Expr::Log(a) => vec![Expr::Log(Box::new(a.normalize())).simplify()],
        Expr::Sin(a) => vec![Expr::Sin(Box::new(a.normalize())).simplify()],
        Expr::Cos(a) => vec![Expr::Cos(Box::new(a.normalize())).simplify()],
        Expr::Div(a, b) => expand_terms(&Expr::div((**a).clone(), (**b).clone()).simplify()),
        other => vec![other.clone()],
    }
}

pub struct ExprDisplay<'a> {
    e: &'a Expr,
    table: &'a VarTable,
}

const P_ADD: u8 = 1;
const P_MUL: u8 = 2;
const P_NEG: u8 = 3;
const P_POW: u8 = 4;

fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr, t: &VarTable, ctx: u8) -> fmt::Result {
    let wrap = |f: &mut fmt::Formatter<'_>, own: u8, body: &dyn Fn(&mut fmt::Formatter<'_>) -> fmt::Result| {
        if own < ctx {
            f.write_str("(")?;
            body(f)?;
            f.write_str(")")
        } else {
            body(f)
        }
    };
    match e {
        Expr::Const(r) => {
            if r.is_negative() {
                wrap(f, P_NEG, &|f| write!(f, "-{}", format_rational(&r.abs())))
            } else {
                let s = format_rational(r);
                if s.contains('/') && ctx > P_MUL {
                    write!(f, "({s})")
                } else {
                    f.write_str(&s)
                }
            }
        }
        Expr::Var(v) => f.write_str(t.name(*v)),
        Expr::Add(ts) => wrap(f, P_ADD, &|f| {
            for (i, term) in ts.iter().enumerate() {
                let (neg, body) = negated(term);
                if i == 0 {
                    if neg {
                        f.write_str("-")?;
                        write_expr(f, &body, t, P_NEG)?;
                    } else {
                        write_expr(f, &body, t, P_ADD)?;
                    }
                } else {
                    f.write_str(if neg { " - " } else { " + " })?;
                    write_expr(f, &body, t, P_MUL)?;
                }
            }
            Ok(())
        }),
        Expr::Mul(_) => {
            let (neg, body) = negated(e);
            if neg {
                return wrap(f, P_NEG, &|f| {
                    f.write_str("-")?;
                    write_expr(f, &body, t, P_NEG)
                });
            }
            let fs = match &body {
                Expr::Mul(v) => v.clone(),
                other => vec![other.clone()],
            };
            let mut num = Vec::new();
            let mut den = Vec::new();
            for x in fs.iter() {
                match x {
                    Expr::Pow(b, k) if *k < 0 => den.push(simplify_pow((**b).clone(), -*k)),
                    other => num.push(other.clone()),
                }
            }
            wrap(f, P_MUL, &|f| {
                if num.is_empty() {
                    f.write_str("1")?;
                }
                for (i, x) in num.iter().enumerate() {
                    if i > 0 {
                        f.write_str("*")?;
                    }
                    write_expr(f, x, t, P_MUL + 1)?;
                }
                match den.len() {
                    0 => Ok(()),
                    1 => {
                        f.write_str("/")?;
                        write_expr(f, &den[0], t, P_POW)
                    }
                    _ => {
                        f.write_str("/(")?;
                        for (i, x) in den.iter().enumerate() {
                            if i > 0 {
                                f.write_str("*")?;
                            }
                            write_expr(f, x, t, P_MUL + 1)?;
                        }
                        f.write_str(")")
                    }
                }
            })
        }
        Expr::Pow(b, k) => wrap(f, P_POW, &|f| {
            write_expr(f, b, t, P_POW + 1)?;
            if *k < 0 {
                write!(f, "**({k})")
            } else {
                write!(f, "**{k}")
            }
        }),
        Expr::RealPow(b, a) => wrap(f, P_POW, &|f| {
            write_expr(f, b, t, P_POW + 1)?;
            let s = format_rational(a);
            if a.is_negative() || s.contains('/') {
                write!(f, "**({s})")
            } else {
                write!(f, "**{s}")
            }
        }),
        Expr::Div(a, b) => wrap(f, P_MUL, &|f| {
            write_expr(f, a, t, P_MUL)?;
            f.write_str("/")?;
            write_expr(f, b, t, P_POW)
        }),
        Expr::Exp(a) => func(f, "exp", a, t),
        Expr::Log(a) => func(f, "log", a, t),
        Expr::Sin(a) => func(f, "sin", a, t),
        Expr::Cos(a) => func(f, "cos", a, t),
    }
}

fn func(f: &mut fmt::Formatter<'_>, name: &str, a: &Expr, t: &VarTable) -> fmt::Result {
    write!(f, "{name}(")?;
    write_expr(f, a, t, 0)?;
    f.write_str(")")
}

/// Splits a leading negative constant factor off a term.
fn negated(e: &Expr) -> (bool, Expr) {
    match e {
        Expr::Const(r) if r.is_negative() => (true, Expr::Const(-r)),
        Expr::Mul(fs) => match fs.first() {
            Some(Expr::Const(r)) if r.is_negative() => {
                let r = -r;
                let mut rest: Vec<Expr> = fs[1..].to_vec();
                if !r.is_one() {
                    rest.insert(0, Expr::Const(r));
                }
                (true, if rest.len() == 1 { rest.pop().unwrap() } else { Expr::Mul(rest) })
            }
            _ => (false, e.clone()),
        },
        _ => (false, e.clone()),
    }
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self.e, self.table, 0)
    }
}
