use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};

use super::coeff::{format_rational, write_denominator, write_factor_list, Coeff, Q};
use super::monomial::Monomial;
use super::var::{VarId, VarTable};

/// Sparse Laurent polynomial with exact coefficients, kept in canonical form.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Poly {
    terms: BTreeMap<Monomial, Coeff>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly { terms: BTreeMap::new() }
    }

    pub fn one() -> Self {
        Self::constant(Coeff::one())
    }

    pub fn constant(c: Coeff) -> Self {
        Self::term(Monomial::one(), c)
    }

    pub fn int(n: i64) -> Self {
        Self::constant(Coeff::int(n))
    }

    pub fn var(v: VarId) -> Self {
        Self::monomial(Monomial::var(v))
    }

    pub fn monomial(m: Monomial) -> Self {
        Self::term(m, Coeff::one())
    }

    pub fn term(m: Monomial, c: Coeff) -> Self {
        let mut p = Poly::zero();
        p.add_term(m, c);
        p
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Monomial, Coeff)>) -> Self {
        let mut p = Poly::zero();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    pub fn add_term(&mut self, m: Monomial, c: Coeff) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(x) => {
                x.add_assign(&c);
                if x.is_zero() {
                    self.terms.remove(&m);
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &Coeff)> {
        self.terms.iter()
    }

    pub fn monomials(&self) -> impl Iterator<Item = &Monomial> {
        self.terms.keys()
    }

    pub fn coeff(&self, m: &Monomial) -> Coeff {
        self.terms.get(m).cloned().unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> Poly {
        Poly { terms: self.terms.iter().map(|(m, c)| (m.clone(), c.neg())).collect() }
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(ma.mul(mb), ca.mul(cb));
            }
        }
        out
    }

    pub fn scale(&self, c: &Coeff) -> Poly {
        let mut out = Poly::zero();
        for (m, x) in &self.terms {
            out.add_term(m.clone(), x.mul(c));
        }
        out
    }

    pub fn scale_q(&self, r: &Q) -> Poly {
        self.scale(&Coeff::rational(r.clone()))
    }

    pub fn mul_monomial(&self, m: &Monomial) -> Poly {
        Poly { terms: self.terms.iter().map(|(k, c)| (k.mul(m), c.clone())).collect() }
    }

    /// Power with a non-negative exponent.
    pub fn pow(&self, k: u32) -> Poly {
        let mut out = Poly::one();
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                out = out.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        out
    }

    /// Maximal total degree over the terms; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<i32> {
        self.terms.keys().map(|m| m.degree()).max()
    }

    pub fn degree_in(&self, v: VarId) -> i32 {
        self.terms.keys().map(|m| m.exp(v)).max().unwrap_or(0)
    }

    /// Degree restricted to the given variables.
    pub fn degree_over(&self, keep: impl Fn(VarId) -> bool) -> i32 {
        self.terms
            .keys()
            .map(|m| m.pairs().iter().filter(|p| keep(p.0)).map(|p| p.1).sum::<i32>())
            .max()
            .unwrap_or(0)
    }

    pub fn vars(&self) -> Vec<VarId> {
        let mut v: Vec<VarId> = self.terms.keys().flat_map(|m| m.vars()).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn params(&self) -> Vec<VarId> {
        let mut v: Vec<VarId> = self.terms.values().flat_map(|c| c.params()).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn is_laurent(&self) -> bool {
        self.terms.keys().any(|m| m.is_laurent())
    }

    pub fn partial(&self, v: VarId) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            let e = m.exp(v);
            if e != 0 {
                out.add_term(m.div(&Monomial::var(v)), c.scale(&super::coeff::q(e as i64)));
            }
        }
        out
    }

    /// Replaces variables through `f`; variables mapped to `None` stay unchanged.
    /// Negative exponents are only allowed for variables mapped to monomials.
    pub fn substitute(&self, f: &dyn Fn(VarId) -> Option<Poly>) -> Option<Poly> {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            let mut acc = Poly::constant(c.clone());
            let mut keep = Vec::new();
            for &(v, e) in m.pairs() {
                match f(v) {
                    None => keep.push((v, e)),
                    Some(p) => {
                        let factor = if e >= 0 {
                            p.pow(e as u32)
                        } else {
                            let (mono, c) = p.as_single_term()?;
                            Poly::term(mono.pow(e), c.pow(e)?)
                        };
                        acc = acc.mul(&factor);
                    }
                }
            }
            out = out.add(&acc.mul_monomial(&Monomial::from_pairs(keep)));
        }
        Some(out)
    }

    pub fn map_vars(&self, f: impl Fn(VarId) -> VarId) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            out.add_term(m.map_vars(&f), c.clone());
        }
        out
    }

    pub fn map_coeffs(&self, f: impl Fn(&Coeff) -> Coeff) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            out.add_term(m.clone(), f(c));
        }
        out
    }

    pub fn as_single_term(&self) -> Option<(Monomial, Coeff)> {
        if self.terms.len() == 1 {
            let (m, c) = self.terms.iter().next().unwrap();
            Some((m.clone(), c.clone()))
        } else {
            None
        }
    }

    pub fn as_constant(&self) -> Option<Coeff> {
        match self.terms.len() {
            0 => Some(Coeff::zero()),
            1 => self.terms.get(&Monomial::one()).cloned(),
            _ => None,
        }
    }

    pub fn eval(&self, value: &dyn Fn(VarId) -> f64) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| {
                let mut x = c.eval(value);
                for &(v, e) in m.pairs() {
                    x *= value(v).powi(e);
                }
                x
            })
            .sum()
    }

    pub fn display<'a>(&'a self, table: &'a VarTable) -> PolyDisplay<'a> {
        PolyDisplay { p: self, table }
    }
}

pub struct PolyDisplay<'a> {
    p: &'a Poly,
    table: &'a VarTable,
}

impl fmt::Display for PolyDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.p.is_zero() {
            return f.write_str("0");
        }
        for (i, (m, c)) in self.p.terms.iter().rev().enumerate() {
            let (neg, body) = match c.as_rational() {
                Some(r) => (r.is_negative(), Coeff::rational(r.abs())),
                None if c.terms().count() == 1 && c.is_negative_leading() => (true, c.neg()),
                None => (false, c.clone()),
            };
            if i == 0 {
                if neg {
                    f.write_str("-")?;
                }
            } else {
                f.write_str(if neg { " - " } else { " + " })?;
            }
            let has_num = m.pairs().iter().any(|p| p.1 > 0);
            let mut empty = true;
            match body.as_rational() {
                Some(r) if r.is_one() => {
                    if !has_num {
                        f.write_str("1")?;
                        empty = false;
                    }
                }
                Some(r) => {
                    f.write_str(&format_rational(&r))?;
                    empty = false;
                }
                None if body.terms().count() == 1 => {
                    let (pm, r) = body.terms().next().unwrap();
                    let pnum = pm.pairs().iter().any(|p| p.1 > 0);
                    if !r.is_one() || !pnum {
                        f.write_str(&format_rational(r))?;
                        empty = false;
                    }
                    empty = write_factor_list(f, pm, self.table, empty)?;
                    write_denominator(f, pm, self.table)?;
                    if empty {
                        f.write_str("1")?;
                        empty = false;
                    }
                }
                None => {
                    write!(f, "{}", body.display(self.table))?;
                    empty = false;
                }
            }
            let was_empty = write_factor_list(f, m, self.table, empty)?;
            if was_empty && m.pairs().iter().any(|p| p.1 < 0) {
                f.write_str("1")?;
            }
            write_denominator(f, m, self.table)?;
        }
        Ok(())
    }
}

impl Zero for Poly {
    fn zero() -> Self {
        Poly::zero()
    }

    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

impl std::ops::Add for Poly {
    type Output = Poly;

    fn add(self, rhs: Poly) -> Poly {
        Poly::add(&self, &rhs)
    }
}

impl One for Poly {
    fn one() -> Self {
        Poly::one()
    }
}

impl std::ops::Mul for Poly {
    type Output = Poly;

    fn mul(self, rhs: Poly) -> Poly {
        Poly::mul(&self, &rhs)
    }
}
