use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::monomial::Monomial;
use super::var::{VarId, VarTable};

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    BigRational::from_integer(BigInt::from(n))
}

pub fn qf(n: i64, d: i64) -> Q {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Exact coefficient: a finite sum of rationals times monomials in parameter symbols.
/// Parameters are nonzero constants, so negative parameter exponents are allowed.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Coeff(BTreeMap<Monomial, Q>);

impl Coeff {
    pub fn zero() -> Self {
        Coeff(BTreeMap::new())
    }

    pub fn one() -> Self {
        Self::rational(Q::one())
    }

    pub fn int(n: i64) -> Self {
        Self::rational(q(n))
    }

    pub fn rational(r: Q) -> Self {
        let mut m = BTreeMap::new();
        if !r.is_zero() {
            m.insert(Monomial::one(), r);
        }
        Coeff(m)
    }

    pub fn param(p: VarId) -> Self {
        Self::term(Monomial::var(p), Q::one())
    }

    pub fn term(m: Monomial, r: Q) -> Self {
        let mut map = BTreeMap::new();
        if !r.is_zero() {
            map.insert(m, r);
        }
        Coeff(map)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Q)> {
        self.0.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.as_rational().is_some_and(|r| r.is_one())
    }

    /// The rational value when no parameter symbol occurs.
    pub fn as_rational(&self) -> Option<Q> {
        match self.0.len() {
            0 => Some(Q::zero()),
            1 => {
                let (m, r) = self.0.iter().next().unwrap();
                m.is_one().then(|| r.clone())
            }
            _ => None,
        }
    }

    pub fn is_rational(&self) -> bool {
        self.as_rational().is_some()
    }

    pub fn params(&self) -> impl Iterator<Item = VarId> + '_ {
        self.0.keys().flat_map(|m| m.vars())
    }

    pub fn add_assign(&mut self, other: &Coeff) {
        for (m, r) in &other.0 {
            add_term(&mut self.0, m.clone(), r.clone());
        }
    }

    pub fn add(&self, other: &Coeff) -> Coeff {
        let mut out = self.clone();
        out.add_assign(other);
        out
    }

    pub fn neg(&self) -> Coeff {
        Coeff(self.0.iter().map(|(m, r)| (m.clone(), -r)).collect())
    }

    pub fn sub(&self, other: &Coeff) -> Coeff {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Coeff) -> Coeff {
        if let Some(r) = other.as_rational() {
            return self.scale(&r);
        }
        if let Some(r) = self.as_rational() {
            return other.scale(&r);
        }
        let mut out = BTreeMap::new();
        for (ma, ra) in &self.0 {
            for (mb, rb) in &other.0 {
                add_term(&mut out, ma.mul(mb), ra * rb);
            }
        }
        Coeff(out)
    }

    pub fn scale(&self, r: &Q) -> Coeff {
        if r.is_zero() {
            return Coeff::zero();
        }
        if r.is_one() {
            return self.clone();
        }
        Coeff(self.0.iter().map(|(m, x)| (m.clone(), x * r)).collect())
    }

    /// Multiplicative inverse, defined for single-term coefficients.
    pub fn inverse(&self) -> Option<Coeff> {
        if self.0.len() != 1 {
            return None;
        }
        let (m, r) = self.0.iter().next().unwrap();
        Some(Coeff::term(m.pow(-1), r.recip()))
    }

    pub fn pow(&self, k: i32) -> Option<Coeff> {
        if k < 0 {
            return self.inverse()?.pow(-k);
        }
        let mut out = Coeff::one();
        for _ in 0..k {
            out = out.mul(self);
        }
        Some(out)
    }

    pub fn map_params(&self, f: impl Fn(VarId) -> VarId) -> Coeff {
        let mut out = BTreeMap::new();
        for (m, r) in &self.0 {
            add_term(&mut out, m.map_vars(&f), r.clone());
        }
        Coeff(out)
    }

    pub fn eval(&self, value: &dyn Fn(VarId) -> f64) -> f64 {
        self.0
            .iter()
            .map(|(m, r)| {
                let mut x = r.to_f64().unwrap_or(f64::NAN);
                for &(p, e) in m.pairs() {
                    x *= value(p).powi(e);
                }
                x
            })
            .sum()
    }

    pub fn is_negative_leading(&self) -> bool {
        self.0.values().next_back().is_some_and(|r| r.is_negative())
    }

    pub fn display<'a>(&'a self, table: &'a VarTable) -> CoeffDisplay<'a> {
        CoeffDisplay { c: self, table }
    }
}

fn add_term(map: &mut BTreeMap<Monomial, Q>, m: Monomial, r: Q) {
    if r.is_zero() {
        return;
    }
    match map.get_mut(&m) {
        Some(x) => {
            *x += r;
            if x.is_zero() {
                map.remove(&m);
            }
        }
        None => {
            map.insert(m, r);
        }
    }
}

/// Renders a rational: integers plainly,
/// terminating fractions as decimals, others as `a/b`.
pub fn format_rational(r: &Q) -> String {
    if r.is_integer() {
        return r.numer().to_string();
    }
    let mut d = r.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let mut digits = 0usize;
    while (&d % &two).is_zero() || (&d % &five).is_zero() {
        if (&d % &two).is_zero() {
            d /= &two;
        } else {
            d /= &five;
        }
        digits += 1;
    }
    if d.is_one() && digits <= 12 {
        let scale = BigInt::from(10).pow(digits as u32);
        let n = (r * BigRational::from_integer(scale.clone())).to_integer();
        let neg = n.is_negative();
        let s = n.abs().to_string();
        let s = if s.len() <= digits { format!("{}{}", "0".repeat(digits - s.len() + 1), s) } else { s };
        let (ip, fp) = s.split_at(s.len() - digits);
        let fp = fp.trim_end_matches('0');
        return format!("{}{}.{}", if neg { "-" } else { "" }, ip, fp);
    }
    format!("{}/{}", r.numer(), r.denom())
}

pub struct CoeffDisplay<'a> {
    c: &'a Coeff,
    table: &'a VarTable,
}

pub(crate) fn write_factor_list(
    f: &mut fmt::Formatter<'_>,
    m: &Monomial,
    table: &VarTable,
    leading: bool,
) -> Result<bool, fmt::Error> {
    let mut first = leading;
    for &(v, e) in m.pairs() {
        if e > 0 {
            if !first {
                f.write_str("*")?;
            }
            first = false;
            f.write_str(table.name(v))?;
            if e != 1 {
                write!(f, "**{e}")?;
            }
        }
    }
    Ok(first)
}

pub(crate) fn write_denominator(f: &mut fmt::Formatter<'_>, m: &Monomial, table: &VarTable) -> fmt::Result {
    for &(v, e) in m.pairs() {
        if e < 0 {
            f.write_str("/")?;
            f.write_str(table.name(v))?;
            if e != -1 {
                write!(f, "**{}", -e)?;
            }
        }
    }
    Ok(())
}

impl fmt::Display for CoeffDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.c.is_zero() {
            return f.write_str("0");
        }
        let multi = self.c.0.len() > 1;
        if multi {
            f.write_str("(")?;
        }
        for (i, (m, r)) in self.c.0.iter().rev().enumerate() {
            if i > 0 {
                f.write_str(if r.is_negative() { " - " } else { " + " })?;
            } else if r.is_negative() {
                f.write_str("-")?;
            }
            let a = r.abs();
            let has_num = m.pairs().iter().any(|p| p.1 > 0);
            let mut empty = true;
            if !a.is_one() || !has_num {
                f.write_str(&format_rational(&a))?;
                empty = false;
            }
            write_factor_list(f, m, self.table, empty)?;
            write_denominator(f, m, self.table)?;
        }
        if multi {
            f.write_str(")")?;
        }
        Ok(())
    }
}
