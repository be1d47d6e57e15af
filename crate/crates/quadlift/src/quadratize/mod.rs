//! Branch-and-bound search for monomial quadratizations.

mod engine;
mod mode;
pub(crate) mod space;

use std::collections::{BTreeSet, HashSet};
use std::time::{Duration, Instant};

pub use engine::{Progress, ProgressFn};
pub use mode::*;

use crate::emitverify::{emit_in_space, EmitError, QuadraticSystem};
use crate::symcore::{Monomial, OdeSystem, Poly, VarId, VarKind};
use space::{Space, Status};

pub const DEFAULT_MAX_ORDER: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QuadratizeError {
    #[error("no quadratization with at most {bound} new variables")]
    NotFoundWithinBound { bound: usize },
    #[error("search timed out")]
    Timeout,
    #[error("invalid mode: {0}")]
    InvalidMode(String),
    #[error("system has negative exponents; enable Laurent mode")]
    LaurentRequired,
    #[error("equation for `{0}` contains a coupling placeholder; use the agnostic search")]
    CouplingPresent(String),
    #[error("system is not input-affine")]
    NotInputAffine,
    #[error("system is not polynomial-bilinear")]
    NotPolynomialBilinear,
    #[error(transparent)]
    Emit(#[from] EmitError),
}

/// Outcome of a successful search.
#[derive(Clone, Debug)]
pub struct QuadratizationResult {
    /// Names and defining monomials, over the table of the input system.
    pub new_variables: Vec<(String, Monomial)>,
    pub order: usize,
    pub quadratic_system: QuadraticSystem,
    pub optimal: bool,
    pub mode: SearchMode,
    pub bound_used: usize,
    pub nodes_visited: u64,
    pub elapsed: Duration,
}

impl QuadratizationResult {
    pub fn monomials(&self) -> Vec<Monomial> {
        self.new_variables.iter().map(|v| v.1.clone()).collect()
    }
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Input-affine split `p = p0 + sum_j p_j u_j` for every equation; `None` if
/// some rhs is not affine in the (order zero) inputs.
pub(crate) fn input_affine_parts(system: &OdeSystem) -> Option<Vec<(VarId, Poly, Vec<Poly>)>> {
    let table = &system.table;
    let inputs: Vec<VarId> = (0..system.inputs.len() as u32).map(|i| table.input_var(i, 0).unwrap()).collect();
    let mut out = Vec::new();
    for (v, p) in &system.equations {
        let mut p0 = Poly::zero();
        let mut parts = vec![Poly::zero(); inputs.len()];
        for (m, c) in p.terms() {
            let ins: Vec<VarId> = m.vars().filter(|&x| table.kind(x).is_input()).collect();
            match ins.as_slice() {
                [] => p0.add_term(m.clone(), c.clone()),
                [u] if m.exp(*u) == 1 => {
                    let j = inputs.iter().position(|x| x == u)?;
                    parts[j].add_term(m.without(*u), c.clone());
                }
                _ => return None,
            }
        }
        out.push((*v, p0, parts));
    }
    Some(out)
}

fn is_polynomial_bilinear(system: &OdeSystem) -> Option<i32> {
    if system.is_laurent_rhs() || system.inputs.is_empty() {
        return None;
    }
    let parts = input_affine_parts(system)?;
    let mut d0 = 0;
    for (_, p0, ps) in &parts {
        if ps.iter().any(|p| p.degree().unwrap_or(0) > 1) {
            return None;
        }
        d0 = d0.max(p0.degree().unwrap_or(0));
    }
    Some(d0)
}

/// A priori bound on the number of new variables used as search limit.
pub fn upper_bound(system: &OdeSystem, mode: &SearchMode) -> usize {
    if mode.laurent {
        return mode.max_order.unwrap_or(DEFAULT_MAX_ORDER);
    }
    let table = &system.table;
    let degree_product = |keep: &dyn Fn(VarKind) -> bool| -> usize {
        table
            .iter()
            .filter(|v| keep(v.kind))
            .map(|v| system.equations.iter().map(|(_, p)| p.degree_in(v.index)).max().unwrap_or(0).max(0) as usize + 1)
            .fold(1usize, |a, b| a.saturating_mul(b))
    };
    match mode.kind {
        ModeKind::Autonomous => degree_product(&|k| k.is_differential()),
        ModeKind::WithInputs => {
            let used: BTreeSet<VarId> = system.equations.iter().flat_map(|(_, p)| p.vars()).collect();
            let base = degree_product(&|k| k.is_differential());
            used.iter()
                .filter(|&&v| table.kind(v).is_input())
                .map(|&v| system.equations.iter().map(|(_, p)| p.degree_in(v)).max().unwrap_or(0) as usize + 1)
                .fold(base, |a, b| a.saturating_mul(b))
        }
        ModeKind::InputFree => match is_polynomial_bilinear(system) {
            Some(d) => {
                let n = system.differential_vars().len();
                let d = d.max(1) as usize;
                binomial(n + d, d) - 1 - n
            }
            None => mode.max_order.unwrap_or(DEFAULT_MAX_ORDER),
        },
    }
}

fn strip_base(space: &Space, s: &[Monomial]) -> Vec<Monomial> {
    let mut v: Vec<Monomial> = s.iter().filter(|m| !m.is_one() && !space.is_base(m)).cloned().collect();
    v.sort();
    v.dedup();
    v
}

/// Whether `s` quadratizes the system under the alphabet rules of `mode`.
pub fn is_quadratization(system: &OdeSystem, s: &[Monomial], mode: &SearchMode) -> Result<bool, QuadratizeError> {
    let space = Space::new(system, mode)?;
    let s = strip_base(&space, s);
    if s.iter().any(|m| space.admissible(m, &HashSet::new()).is_none()) {
        return Ok(false);
    }
    Ok(space.is_quadratization(&s))
}

/// Extensions of `s` along the undecomposable monomial with the fewest candidates.
pub fn generate_extensions(
    system: &OdeSystem,
    s: &[Monomial],
    mode: &SearchMode,
) -> Result<Vec<Vec<Monomial>>, QuadratizeError> {
    let space = Space::new(system, mode)?;
    let s = strip_base(&space, s);
    let set: HashSet<Monomial> = s.iter().cloned().collect();
    let none = HashSet::new();
    let mut best: Option<(Monomial, Vec<Vec<Monomial>>)> = None;
    for m in space.required(&s) {
        if let Status::Open(c) = space.classify(&m, &set, &s, &none) {
            let better = match &best {
                None => true,
                Some((bm, bc)) => (c.len(), &m) < (bc.len(), bm),
            };
            if better {
                best = Some((m, c));
            }
        }
    }
    Ok(best
        .map(|(_, c)| {
            c.into_iter()
                .map(|o| {
                    let mut v: Vec<Monomial> = s.iter().cloned().chain(o).collect();
                    v.sort();
                    v
                })
                .collect()
        })
        .unwrap_or_default())
}

/// Optimal monomial quadratization search.
pub fn search(system: &OdeSystem, mode: &SearchMode) -> Result<QuadratizationResult, QuadratizeError> {
    search_with_progress(system, mode, None)
}

pub fn search_with_progress(
    system: &OdeSystem,
    mode: &SearchMode,
    progress: Option<ProgressFn<'_>>,
) -> Result<QuadratizationResult, QuadratizeError> {
    let space = Space::new(system, mode)?;
    let bound = upper_bound(system, mode);
    run_space(&space, mode, bound, mode.laurent, progress)
}

pub(crate) fn run_space(
    space: &Space,
    mode: &SearchMode,
    bound: usize,
    never_optimal: bool,
    progress: Option<ProgressFn<'_>>,
) -> Result<QuadratizationResult, QuadratizeError> {
    let start = Instant::now();
    let deadline = mode.timeout.map(|t| start + t);
    let out = engine::run(space, bound, deadline, mode.workers, progress);
    let Some(sol) = out.solution else {
        return Err(if out.timed_out { QuadratizeError::Timeout } else { QuadratizeError::NotFoundWithinBound { bound } });
    };
    let quadratic_system = emit_in_space(space, &sol)?;
    let mut sol = sol;
    sol.sort_by(crate::emitverify::naming_order);
    let new_variables = quadratic_system
        .definitions
        .iter()
        .zip(sol.iter())
        .map(|((w, _), m)| (quadratic_system.system.table.name(*w).to_string(), m.clone()))
        .collect();
    Ok(QuadratizationResult {
        new_variables,
        order: sol.len(),
        quadratic_system,
        optimal: out.optimal && !never_optimal,
        mode: mode.clone(),
        bound_used: bound,
        nodes_visited: out.nodes,
        elapsed: start.elapsed(),
    })
}

/// Whether the states can be ordered so that each input coefficient
/// `p_ij` depends only on strictly earlier states.
pub fn check_triangular_coupling(system: &OdeSystem) -> Result<bool, QuadratizeError> {
    let parts = input_affine_parts(system).ok_or(QuadratizeError::NotInputAffine)?;
    let vars: Vec<VarId> = parts.iter().map(|p| p.0).collect();
    // deps[i] = states that the input coefficients of equation i depend on
    let deps: Vec<Vec<usize>> = parts
        .iter()
        .map(|(_, _, ps)| {
            let used: BTreeSet<VarId> = ps.iter().flat_map(|p| p.vars()).collect();
            used.iter().filter_map(|v| vars.iter().position(|x| x == v)).collect()
        })
        .collect();
    let n = vars.len();
    let mut placed = vec![false; n];
    for _ in 0..n {
        let Some(i) = (0..n).find(|&i| !placed[i] && deps[i].iter().all(|&j| j != i && placed[j])) else {
            return Ok(false);
        };
        placed[i] = true;
    }
    Ok(true)
}

/// Monomials of degree at most `deg p0` in the states, which form an
/// input-free quadratization of a polynomial-bilinear system.
pub fn bilinear_construct(system: &OdeSystem) -> Result<Vec<Monomial>, QuadratizeError> {
    let d = is_polynomial_bilinear(system).ok_or(QuadratizeError::NotPolynomialBilinear)?.max(1);
    let vars = system.differential_vars();
    let mut out = vec![Monomial::one()];
    for &v in &vars {
        let mut next = Vec::new();
        for m in &out {
            for e in 0..=d {
                let x = m.mul(&Monomial::var_pow(v, e));
                if x.degree() <= d {
                    next.push(x);
                }
            }
        }
        out = next;
    }
    out.retain(|m| !m.is_one());
    out.sort();
    Ok(out)
}
