use std::collections::{HashMap, HashSet};
use std::sync::{Arc, RwLock};

use super::{ModeKind, QuadratizeError, SearchMode};
use crate::symcore::{Monomial, OdeSystem, Poly, VarId, VarKind};

/// Maps a candidate monomial to the set of monomials that must be added with
/// it, or `None` when the candidate is not admissible.
pub(crate) type OrbitFn = Arc<dyn Fn(&Monomial) -> Option<Vec<Monomial>> + Send + Sync>;

/// Alphabet rules and cached Lie derivatives for one search problem.
pub(crate) struct Space {
    pub system: OdeSystem,
    pub kind: ModeKind,
    pub laurent: bool,
    pub cap: Option<i32>,
    base: HashSet<Monomial>,
    base_list: Vec<Monomial>,
    /// Allowed only as one linear factor next to an alphabet element.
    top: Vec<VarId>,
    /// Never decomposable.
    banned: Vec<VarId>,
    /// May not occur in new variables.
    no_new: Vec<VarId>,
    roots: Vec<Monomial>,
    cache: RwLock<HashMap<Monomial, Arc<Vec<Monomial>>>>,
    orbit: Option<OrbitFn>,
}

pub(crate) enum Status {
    Decomposable,
    /// Candidate extensions, each an orbit sorted ascending.
    Open(Vec<Vec<Monomial>>),
}

impl Space {
    pub fn new(system: &OdeSystem, mode: &SearchMode) -> Result<Space, QuadratizeError> {
        let table = system.table.clone();
        for (v, p) in &system.equations {
            if p.vars().iter().any(|&x| matches!(table.kind(x), VarKind::Coupling { .. })) {
                return Err(QuadratizeError::CouplingPresent(table.name(*v).to_string()));
            }
        }
        if system.is_laurent_rhs() && !mode.laurent {
            return Err(QuadratizeError::LaurentRequired);
        }
        let mut base_vars = system.differential_vars();
        let mut top = Vec::new();
        let mut banned = Vec::new();
        let mut no_new = Vec::new();
        match mode.kind {
            ModeKind::Autonomous => {
                if system.equations.iter().any(|(_, p)| p.vars().iter().any(|&v| table.kind(v).is_input())) {
                    return Err(QuadratizeError::InvalidMode("autonomous mode on a system with inputs".into()));
                }
            }
            ModeKind::WithInputs => {
                if system.inputs.is_empty() {
                    return Err(QuadratizeError::InvalidMode("with-inputs mode needs a declared input".into()));
                }
                if let Some(d) = system.inputs.iter().find(|d| !d.smooth) {
                    return Err(QuadratizeError::InvalidMode(format!(
                        "input `{}` is nonsmooth; use input-free mode",
                        d.name
                    )));
                }
                for i in 0..system.inputs.len() as u32 {
                    let k = system.input_order_used(i).unwrap_or(0);
                    for j in 0..=k {
                        base_vars.push(table.input_var(i, j).expect("input derivative"));
                    }
                    top.push(table.input_var(i, k + 1).expect("input derivative"));
                }
            }
            ModeKind::InputFree => {
                if system.inputs.is_empty() {
                    return Err(QuadratizeError::InvalidMode("input-free mode needs a declared input".into()));
                }
                for v in system.input_vars() {
                    no_new.push(v);
                    match table.kind(v) {
                        VarKind::Input { order: 0, .. } => base_vars.push(v),
                        _ => banned.push(v),
                    }
                }
            }
        }
        no_new.extend(top.iter().copied());
        let base_list: Vec<Monomial> = base_vars.iter().map(|&v| Monomial::var(v)).collect();
        let mut roots: Vec<Monomial> =
            system.equations.iter().flat_map(|(_, p)| p.monomials().cloned()).collect();
        roots.sort();
        roots.dedup();
        let cap = if mode.laurent {
            Some(mode.max_laurent_degree.unwrap_or_else(|| default_laurent_degree(system)))
        } else {
            None
        };
        Ok(Space {
            system: system.clone(),
            kind: mode.kind,
            laurent: mode.laurent,
            cap,
            base: base_list.iter().cloned().collect(),
            base_list,
            top,
            banned,
            no_new,
            roots,
            cache: RwLock::new(HashMap::new()),
            orbit: None,
        })
    }

    pub fn with_orbit(mut self, orbit: OrbitFn) -> Space {
        self.orbit = Some(orbit);
        self
    }

    pub fn base(&self) -> &[Monomial] {
        &self.base_list
    }

    pub fn top(&self) -> &[VarId] {
        &self.top
    }

    pub fn is_base(&self, m: &Monomial) -> bool {
        self.base.contains(m)
    }

    /// Support of the Lie derivative of `m`.
    pub fn derivative(&self, m: &Monomial) -> Arc<Vec<Monomial>> {
        if let Some(d) = self.cache.read().expect("cache").get(m) {
            return d.clone();
        }
        let p = self.system.lie_derivative(&Poly::monomial(m.clone())).expect("derivative of a search monomial");
        let d: Arc<Vec<Monomial>> = Arc::new(p.monomials().cloned().collect());
        self.cache.write().expect("cache").insert(m.clone(), d.clone());
        d
    }

    /// Monomials that must be decomposable once `s` is added.
    pub fn required(&self, s: &[Monomial]) -> Vec<Monomial> {
        let mut seen: HashSet<Monomial> = HashSet::new();
        let mut out = Vec::new();
        for m in self.roots.iter() {
            if seen.insert(m.clone()) {
                out.push(m.clone());
            }
        }
        for g in s {
            for m in self.derivative(g).iter() {
                if seen.insert(m.clone()) {
                    out.push(m.clone());
                }
            }
        }
        out
    }

    fn member(&self, x: &Monomial, s: &HashSet<Monomial>) -> bool {
        x.is_one() || self.base.contains(x) || s.contains(x)
    }

    /// Whether `d` may be introduced as a new variable.
    pub fn admissible(&self, d: &Monomial, s: &HashSet<Monomial>) -> Option<Vec<Monomial>> {
        if d.is_one() || self.member(d, s) || d.vars().any(|v| self.no_new.contains(&v)) {
            return None;
        }
        if !self.laurent && d.is_laurent() {
            return None;
        }
        match &self.orbit {
            None => Some(vec![d.clone()]),
            Some(f) => {
                let mut o = f(d)?;
                o.sort();
                o.dedup();
                if o.iter().any(|x| self.member(x, s)) {
                    return None;
                }
                Some(o)
            }
        }
    }

    pub fn classify(&self, m: &Monomial, s: &HashSet<Monomial>, sorted: &[Monomial], forbidden: &HashSet<Monomial>) -> Status {
        if m.vars().any(|v| self.banned.contains(&v)) {
            return Status::Open(vec![]);
        }
        let top_deg: i32 = self.top.iter().map(|&t| m.exp(t)).sum();
        if top_deg != 0 {
            let tops: Vec<VarId> = self.top.iter().copied().filter(|&t| m.exp(t) != 0).collect();
            if top_deg != 1 || tops.len() != 1 || m.exp(tops[0]) != 1 {
                return Status::Open(vec![]);
            }
            let rest = m.without(tops[0]);
            if self.member(&rest, s) {
                return Status::Decomposable;
            }
            let c = self.admissible(&rest, s).filter(|o| !o.iter().any(|x| forbidden.contains(x)));
            return Status::Open(c.into_iter().collect());
        }
        if self.decomposable_plain(m, s, sorted) {
            return Status::Decomposable;
        }
        let mut cands: Vec<Vec<Monomial>> = m
            .divisors(self.cap)
            .into_iter()
            .filter_map(|d| self.admissible(&d, s))
            .filter(|o| !o.iter().any(|x| forbidden.contains(x)))
            .collect();
        cands.sort();
        cands.dedup();
        Status::Open(cands)
    }

    fn decomposable_plain(&self, m: &Monomial, s: &HashSet<Monomial>, sorted: &[Monomial]) -> bool {
        if self.member(m, s) {
            return true;
        }
        self.base_list.iter().chain(sorted.iter()).any(|a| {
            if !self.laurent && !a.divides(m) {
                return false;
            }
            self.member(&m.div(a), s)
        })
    }

    /// Whether every required monomial is decomposable.
    pub fn is_quadratization(&self, s: &[Monomial]) -> bool {
        let set: HashSet<Monomial> = s.iter().cloned().collect();
        let none = HashSet::new();
        self.required(s)
            .iter()
            .all(|m| matches!(self.classify(m, &set, s, &none), Status::Decomposable))
    }

    /// Factorization used for emission: `(a, b)` with `a <= b` minimal, or a
    /// top variable times an alphabet element.
    pub fn factor(&self, m: &Monomial, s: &[Monomial]) -> Option<(Monomial, Monomial)> {
        if let Some(&t) = self.top.iter().find(|&&t| m.exp(t) != 0) {
            let rest = m.without(t);
            let set: HashSet<Monomial> = s.iter().cloned().collect();
            if m.exp(t) == 1 && self.member(&rest, &set) && !self.top.iter().any(|&u| rest.exp(u) != 0) {
                return Some((rest, Monomial::var(t)));
            }
            return None;
        }
        if m.vars().any(|v| self.banned.contains(&v)) {
            return None;
        }
        let mut alphabet: Vec<Monomial> = self.base_list.clone();
        alphabet.extend(s.iter().cloned());
        crate::symcore::decompose_quadratic(m, &alphabet, self.laurent)
    }
}

/// Largest absolute exponent occurring in the right-hand sides (at least 1).
pub fn default_laurent_degree(system: &OdeSystem) -> i32 {
    system
        .equations
        .iter()
        .flat_map(|(_, p)| p.monomials().map(|m| m.max_abs_exponent()).collect::<Vec<_>>())
        .max()
        .unwrap_or(1)
        .max(1)
}
