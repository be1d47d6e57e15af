use std::cmp::Ordering;
use std::collections::HashSet;

use smallvec::SmallVec;

use super::var::VarId;

/// Sparse Laurent monomial: sorted `(variable, exponent)` pairs with no zero exponent.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Monomial(SmallVec<[(VarId, i32); 4]>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(SmallVec::new())
    }

    pub fn var(v: VarId) -> Self {
        Self::var_pow(v, 1)
    }

    pub fn var_pow(v: VarId, e: i32) -> Self {
        let mut s = SmallVec::new();
        if e != 0 {
            s.push((v, e));
        }
        Monomial(s)
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (VarId, i32)>) -> Self {
        let mut v: Vec<(VarId, i32)> = pairs.into_iter().collect();
        v.sort_by_key(|p| p.0);
        let mut out: SmallVec<[(VarId, i32); 4]> = SmallVec::new();
        for (var, e) in v {
            match out.last_mut() {
                Some(last) if last.0 == var => last.1 += e,
                _ => out.push((var, e)),
            }
        }
        out.retain(|p| p.1 != 0);
        Monomial(out)
    }

    pub fn pairs(&self) -> &[(VarId, i32)] {
        &self.0
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> i32 {
        self.0.iter().map(|p| p.1).sum()
    }

    pub fn exp(&self, v: VarId) -> i32 {
        match self.0.binary_search_by_key(&v, |p| p.0) {
            Ok(i) => self.0[i].1,
            Err(_) => 0,
        }
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.0.iter().map(|p| p.0)
    }

    pub fn contains(&self, v: VarId) -> bool {
        self.exp(v) != 0
    }

    pub fn is_laurent(&self) -> bool {
        self.0.iter().any(|p| p.1 < 0)
    }

    /// The single variable of a monomial `v^1`.
    pub fn as_var(&self) -> Option<VarId> {
        match self.0.as_slice() {
            [(v, 1)] => Some(*v),
            _ => None,
        }
    }

    fn combine(&self, other: &Monomial, sign: i32) -> Monomial {
        let (a, b) = (&self.0, &other.0);
        let mut out = SmallVec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            if j == b.len() || (i < a.len() && a[i].0 < b[j].0) {
                out.push(a[i]);
                i += 1;
            } else if i == a.len() || b[j].0 < a[i].0 {
                out.push((b[j].0, sign * b[j].1));
                j += 1;
            } else {
                let e = a[i].1 + sign * b[j].1;
                if e != 0 {
                    out.push((a[i].0, e));
                }
                i += 1;
                j += 1;
            }
        }
        Monomial(out)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        self.combine(other, 1)
    }

    /// Laurent quotient; exponents may become negative.
    pub fn div(&self, other: &Monomial) -> Monomial {
        self.combine(other, -1)
    }

    pub fn pow(&self, k: i32) -> Monomial {
        if k == 0 {
            return Monomial::one();
        }
        Monomial(self.0.iter().map(|&(v, e)| (v, e * k)).collect())
    }

    /// Whether `self` divides `other` with a quotient having non-negative exponents.
    pub fn divides(&self, other: &Monomial) -> bool {
        let q = other.div(self);
        q.0.iter().all(|p| p.1 >= 0)
    }

    /// Drops every factor of `v`.
    pub fn without(&self, v: VarId) -> Monomial {
        Monomial(self.0.iter().copied().filter(|p| p.0 != v).collect())
    }

    pub fn map_vars(&self, f: impl Fn(VarId) -> VarId) -> Monomial {
        Monomial::from_pairs(self.0.iter().map(|&(v, e)| (f(v), e)))
    }

    pub fn restrict(&self, keep: impl Fn(VarId) -> bool) -> Monomial {
        Monomial(self.0.iter().copied().filter(|p| keep(p.0)).collect())
    }

    /// All monomials `d` with each exponent between 0 and the exponent of `self`
    /// (inclusive), optionally capped in absolute value.
    pub fn divisors(&self, cap: Option<i32>) -> Vec<Monomial> {
        let ranges: Vec<(VarId, i32, i32)> = self
            .0
            .iter()
            .map(|&(v, e)| {
                let (mut lo, mut hi) = if e < 0 { (e, 0) } else { (0, e) };
                if let Some(c) = cap {
                    lo = lo.max(-c);
                    hi = hi.min(c);
                }
                (v, lo, hi)
            })
            .collect();
        let mut out = vec![Monomial::one()];
        for (v, lo, hi) in ranges {
            let mut next = Vec::with_capacity(out.len() * (hi - lo + 1) as usize);
            for m in &out {
                for e in lo..=hi {
                    let mut s = m.0.clone();
                    if e != 0 {
                        s.push((v, e));
                    }
                    next.push(Monomial(s));
                }
            }
            out = next;
        }
        out
    }

    pub fn max_abs_exponent(&self) -> i32 {
        self.0.iter().map(|p| p.1.abs()).max().unwrap_or(0)
    }
}

impl Ord for Monomial {
    /// Graded order by total degree, ties broken lexicographically with lower
    /// variable identifiers weighing more.
    fn cmp(&self, other: &Self) -> Ordering {
        match self.degree().cmp(&other.degree()) {
            Ordering::Equal => {}
            o => return o,
        }
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j) = (0, 0);
        loop {
            match (a.get(i), b.get(j)) {
                (None, None) => return Ordering::Equal,
                (Some(&(_, e)), None) => return e.cmp(&0),
                (None, Some(&(_, e))) => return 0.cmp(&e),
                (Some(&(va, ea)), Some(&(vb, eb))) => {
                    if va == vb {
                        if ea != eb {
                            return ea.cmp(&eb);
                        }
                        i += 1;
                        j += 1;
                    } else if va < vb {
                        return ea.cmp(&0);
                    } else {
                        return 0.cmp(&eb);
                    }
                }
            }
        }
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Factor `m = a * b` with `a, b` drawn from `alphabet ∪ {1}` and `a <= b`,
/// returning the lexicographically smallest pair. With `laurent` unset the
/// factors must divide `m`.
pub fn decompose_quadratic(
    m: &Monomial,
    alphabet: &[Monomial],
    laurent: bool,
) -> Option<(Monomial, Monomial)> {
    let set: HashSet<&Monomial> = alphabet.iter().collect();
    let one = Monomial::one();
    let mut elems: Vec<&Monomial> = alphabet.iter().collect();
    elems.push(&one);
    elems.sort();
    elems.dedup();
    let member = |x: &Monomial| x.is_one() || set.contains(x);
    for a in &elems {
        if !laurent && !a.divides(m) {
            continue;
        }
        let b = m.div(a);
        if **a <= b && member(&b) {
            return Some(((*a).clone(), b));
        }
    }
    None
}
