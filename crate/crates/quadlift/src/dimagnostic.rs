//! Dimension-agnostic quadratization of linearly coupled ODE families.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use serde_json::Value;

use crate::quadratize::space::Space;
use crate::quadratize::{is_quadratization, run_space, ProgressFn, QuadratizationResult, QuadratizeError, SearchMode};
use crate::symcore::{Coeff, InputDecl, Monomial, OdeSystem, Poly, SystemError, VarId, VarKind, VarTable, Q};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AgnosticError {
    #[error("equation for `{0}` is not affine in the coupling placeholders")]
    NotAffineInCoupling(String),
    #[error("system has no coupling placeholders")]
    NoCoupling,
    #[error("expected {expected} matrices of size {n}x{n}")]
    DimensionMismatch { expected: usize, n: usize },
    #[error("bad matrix description: {0}")]
    Matrix(String),
    #[error(transparent)]
    Quadratize(#[from] QuadratizeError),
    #[error(transparent)]
    System(#[from] SystemError),
}

/// Block vectors `p0..p_nd` of a family `x' = p0(x) + sum_j p_j(x) (D_j x_{*,j})`.
#[derive(Clone, Debug)]
pub struct CoupledFamily {
    /// Table of the placeholder system the family was read from.
    pub table: Arc<VarTable>,
    pub block: Vec<VarId>,
    /// Placeholder standing for `D_j x_{*,j}`, per block index.
    pub placeholders: Vec<Option<VarId>>,
    /// `p[0]` is the uncoupled part; `p[j + 1][k]` multiplies the placeholder of block `j` in equation `k`.
    pub p: Vec<Vec<Poly>>,
    pub inputs: Vec<InputDecl>,
    pub laurent: bool,
    pub degree: i32,
}

impl CoupledFamily {
    pub fn block_dim(&self) -> usize {
        self.block.len()
    }

    fn coupled_blocks(&self) -> Vec<usize> {
        (0..self.block.len()).filter(|&j| self.p[j + 1].iter().any(|q| !q.is_zero())).collect()
    }

    /// Reassembles the placeholder system.
    pub fn to_system(&self) -> Result<OdeSystem, SystemError> {
        let eqs = self
            .block
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let mut rhs = self.p[0][k].clone();
                for (j, ph) in self.placeholders.iter().enumerate() {
                    if let Some(ph) = ph {
                        rhs = rhs.add(&self.p[j + 1][k].mul(&Poly::var(*ph)));
                    }
                }
                (v, rhs)
            })
            .collect();
        OdeSystem::new((*self.table).clone(), self.inputs.clone(), eqs, self.laurent)
    }
}

pub fn extract_family(system: &OdeSystem) -> Result<CoupledFamily, AgnosticError> {
    let table = &system.table;
    let block = system.differential_vars();
    let nd = block.len();
    let mut placeholders = vec![None; nd];
    for v in table.iter() {
        if let VarKind::Coupling { target } = v.kind {
            if let Some(slot) = placeholders.get_mut(target as usize) {
                *slot = Some(v.index);
            }
        }
    }
    if placeholders.iter().all(|p| p.is_none()) {
        return Err(AgnosticError::NoCoupling);
    }
    let mut p = vec![vec![Poly::zero(); nd]; nd + 1];
    for (k, &v) in block.iter().enumerate() {
        let rhs = system.rhs(v).expect("equation for every differential variable");
        for (m, c) in rhs.terms() {
            let phs: Vec<VarId> = m.vars().filter(|&x| matches!(table.kind(x), VarKind::Coupling { .. })).collect();
            match phs.as_slice() {
                [] => p[0][k].add_term(m.clone(), c.clone()),
                [x] if m.exp(*x) == 1 => {
                    let j = placeholders.iter().position(|ph| *ph == Some(*x)).expect("placeholder");
                    p[j + 1][k].add_term(m.without(*x), c.clone());
                }
                _ => return Err(AgnosticError::NotAffineInCoupling(table.name(v).to_string())),
            }
        }
    }
    let degree = p.iter().flatten().filter_map(|q| q.degree()).max().unwrap_or(0);
    Ok(CoupledFamily {
        table: system.table.clone(),
        block,
        placeholders,
        p,
        inputs: system.inputs.clone(),
        laurent: system.is_laurent_rhs(),
        degree,
    })
}

/// Entry of a coupling matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Entry {
    Value(Q),
    Param(String),
}

/// Sparse square matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CouplingMatrix {
    pub n: usize,
    pub entries: BTreeMap<(usize, usize), Entry>,
}

impl CouplingMatrix {
    pub fn new(n: usize) -> Self {
        CouplingMatrix { n, entries: BTreeMap::new() }
    }

    pub fn set(&mut self, i: usize, j: usize, e: Entry) {
        if e != Entry::Value(Q::from_integer(0.into())) {
            self.entries.insert((i, j), e);
        }
    }

    pub fn from_rows(rows: Vec<Vec<Q>>) -> Self {
        let mut m = CouplingMatrix::new(rows.len());
        for (i, r) in rows.into_iter().enumerate() {
            for (j, x) in r.into_iter().enumerate() {
                m.set(i, j, Entry::Value(x));
            }
        }
        m
    }
}

const STAR: [(usize, usize, char); 7] =
    [(0, 0, 'a'), (0, 1, 'b'), (0, 3, 'c'), (1, 1, 'd'), (1, 2, 'e'), (2, 2, 'f'), (3, 3, 'g')];

/// Ordered node pairs `(x, x~)` coupled in the four-node pattern.
const STAR_PAIRS: [(usize, usize); 3] = [(0, 1), (0, 3), (1, 2)];

struct Instance {
    system: OdeSystem,
    /// `grid[i][k]`: variable of block `k` at node `i`.
    grid: Vec<Vec<VarId>>,
}

fn node_name(family: &CoupledFamily, k: usize, i: usize) -> String {
    format!("{}_{}", family.table.name(family.block[k]), i + 1)
}

fn build(family: &CoupledFamily, mats: &[CouplingMatrix]) -> Result<Instance, AgnosticError> {
    let nd = family.block_dim();
    let n = mats.first().map(|m| m.n).unwrap_or(1);
    let src = &family.table;
    let mut decls: Vec<(String, VarKind)> = Vec::new();
    for i in 0..n {
        for k in 0..nd {
            decls.push((node_name(family, k, i), VarKind::State));
        }
    }
    for v in src.iter() {
        match v.kind {
            VarKind::Input { .. } | VarKind::Parameter => decls.push((v.name.clone(), v.kind)),
            _ => {}
        }
    }
    let mut extra: BTreeSet<String> = BTreeSet::new();
    for m in mats {
        for e in m.entries.values() {
            if let Entry::Param(name) = e {
                if !decls.iter().any(|d| &d.0 == name) {
                    extra.insert(name.clone());
                }
            }
        }
    }
    decls.extend(extra.into_iter().map(|n| (n, VarKind::Parameter)));
    let table = VarTable::new(decls).map_err(SystemError::from)?;
    let grid: Vec<Vec<VarId>> =
        (0..n).map(|i| (0..nd).map(|k| table.lookup(&node_name(family, k, i)).unwrap()).collect()).collect();
    let shared = |v: VarId| table.lookup(src.name(v)).expect("shared symbol");
    let at_node = |q: &Poly, i: usize| -> Poly {
        let f = |v: VarId| match family.block.iter().position(|&b| b == v) {
            Some(k) => grid[i][k],
            None => shared(v),
        };
        q.map_vars(f).map_coeffs(|c| c.map_params(shared))
    };
    let coupled = family.coupled_blocks();
    let mut eqs = Vec::new();
    for i in 0..n {
        for k in 0..nd {
            let mut rhs = at_node(&family.p[0][k], i);
            for &j in &coupled {
                let mut lin = Poly::zero();
                for (&(r, c), e) in mats[j].entries.range((i, 0)..(i + 1, 0)) {
                    debug_assert_eq!(r, i);
                    let coeff = match e {
                        Entry::Value(x) => Coeff::rational(x.clone()),
                        Entry::Param(name) => Coeff::param(table.lookup(name).unwrap()),
                    };
                    lin.add_term(Monomial::var(grid[c][j]), coeff);
                }
                rhs = rhs.add(&at_node(&family.p[j + 1][k], i).mul(&lin));
            }
            eqs.push((grid[i][k], rhs));
        }
    }
    let system = OdeSystem::new(table, family.inputs.clone(), eqs, family.laurent)?;
    let grid = (0..n)
        .map(|i| (0..nd).map(|k| system.table.lookup(&node_name(family, k, i)).unwrap()).collect())
        .collect();
    Ok(Instance { system, grid })
}

fn star_matrices(family: &CoupledFamily) -> Vec<CouplingMatrix> {
    (0..family.block_dim())
        .map(|j| {
            let mut m = CouplingMatrix::new(4);
            if family.placeholders[j].is_some() {
                let block = family.table.name(family.block[j]);
                for (r, c, letter) in STAR {
                    m.set(r, c, Entry::Param(format!("{letter}_{block}")));
                }
            }
            m
        })
        .collect()
}

/// The four-node member with symbolic coupling entries `a..g` per coupled block.
#[allow(non_snake_case)]
pub fn instantiate_F4(family: &CoupledFamily) -> Result<OdeSystem, AgnosticError> {
    Ok(build(family, &star_matrices(family))?.system)
}

/// Uncoupled templates `w1` over `x` and coupled templates `w2` over `(x, x~)`.
#[derive(Clone, Debug)]
pub struct AgnosticQuadratization {
    pub family: CoupledFamily,
    /// Block variables, then their `~` copies, then inputs and parameters.
    pub template_table: VarTable,
    pub w1: Vec<Monomial>,
    pub w2: Vec<Monomial>,
    pub mode: SearchMode,
    /// Search result on the four-node member.
    pub certificate: QuadratizationResult,
}

impl AgnosticQuadratization {
    pub fn display_templates(&self) -> (Vec<String>, Vec<String>) {
        let show = |ms: &[Monomial]| -> Vec<String> {
            ms.iter().map(|m| Poly::monomial(m.clone()).display(&self.template_table).to_string()).collect()
        };
        (show(&self.w1), show(&self.w2))
    }
}

fn node_of(grid: &[Vec<VarId>]) -> HashMap<VarId, (usize, usize)> {
    let mut out = HashMap::new();
    for (i, row) in grid.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            out.insert(v, (i, k));
        }
    }
    out
}

/// Splits `m` into its shared part and per-node parts.
fn split(m: &Monomial, nodes: &HashMap<VarId, (usize, usize)>) -> (Monomial, BTreeMap<usize, Vec<(usize, i32)>>) {
    let mut shared = Vec::new();
    let mut parts: BTreeMap<usize, Vec<(usize, i32)>> = BTreeMap::new();
    for &(v, e) in m.pairs() {
        match nodes.get(&v) {
            Some(&(i, k)) => parts.entry(i).or_default().push((k, e)),
            None => shared.push((v, e)),
        }
    }
    (Monomial::from_pairs(shared), parts)
}

fn place(grid: &[Vec<VarId>], node: usize, part: &[(usize, i32)]) -> Monomial {
    Monomial::from_pairs(part.iter().map(|&(k, e)| (grid[node][k], e)))
}

/// Ordered node pair and the two parts of a coupled candidate, when the
/// `x~` part has degree one.
fn as_pair<'a>(
    parts: &'a BTreeMap<usize, Vec<(usize, i32)>>,
    pairs: &[(usize, usize)],
) -> Option<(usize, usize, &'a [(usize, i32)], &'a [(usize, i32)])> {
    if parts.len() != 2 {
        return None;
    }
    let nodes: Vec<usize> = parts.keys().copied().collect();
    for (a, b) in [(nodes[0], nodes[1]), (nodes[1], nodes[0])] {
        if pairs.contains(&(a, b)) {
            let xt = &parts[&b];
            if xt.iter().map(|p| p.1).sum::<i32>() == 1 {
                return Some((a, b, &parts[&a], xt));
            }
        }
    }
    None
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Search limit on the four-node member.
pub fn agnostic_bound(family: &CoupledFamily, mode: &SearchMode) -> usize {
    if mode.laurent {
        return 4 * mode.max_order.unwrap_or(crate::quadratize::DEFAULT_MAX_ORDER);
    }
    let nd = family.block_dim();
    let d = family.degree.max(1) as usize;
    (3 * nd + 4) * binomial(nd + d, d)
}

pub fn search_agnostic(family: &CoupledFamily, mode: &SearchMode) -> Result<AgnosticQuadratization, AgnosticError> {
    search_agnostic_with_progress(family, mode, None)
}

pub fn search_agnostic_with_progress(
    family: &CoupledFamily,
    mode: &SearchMode,
    progress: Option<ProgressFn<'_>>,
) -> Result<AgnosticQuadratization, AgnosticError> {
    let inst = build(family, &star_matrices(family))?;
    let grid = inst.grid.clone();
    let nodes = node_of(&grid);
    let orbit_grid = grid.clone();
    let orbit = Arc::new(move |m: &Monomial| -> Option<Vec<Monomial>> {
        let (shared, parts) = split(m, &nodes);
        match parts.len() {
            0 => Some(vec![m.clone()]),
            1 => {
                let part = parts.values().next().unwrap();
                Some((0..4).map(|i| shared.mul(&place(&orbit_grid, i, part))).collect())
            }
            2 => {
                let (_, _, x, xt) = as_pair(&parts, &STAR_PAIRS)?;
                Some(
                    STAR_PAIRS
                        .iter()
                        .map(|&(a, b)| shared.mul(&place(&orbit_grid, a, x)).mul(&place(&orbit_grid, b, xt)))
                        .collect(),
                )
            }
            _ => None,
        }
    });
    let space = Space::new(&inst.system, mode)?.with_orbit(orbit);
    let bound = agnostic_bound(family, mode);
    let certificate = run_space(&space, mode, bound, true, progress)?;

    let template_table = template_table(family, &inst.system)?;
    let nodes = node_of(&grid);
    let shared_map = |v: VarId| template_table.lookup(inst.system.table.name(v)).expect("shared symbol");
    let nd = family.block_dim();
    let mut w1 = BTreeSet::new();
    let mut w2 = BTreeSet::new();
    for m in certificate.monomials() {
        let (shared, parts) = split(&m, &nodes);
        let shared = shared.map_vars(shared_map);
        match parts.len() {
            0 => {
                w1.insert(shared);
            }
            1 => {
                let part = parts.values().next().unwrap();
                let t = Monomial::from_pairs(part.iter().map(|&(k, e)| (k as VarId, e)));
                w1.insert(shared.mul(&t));
            }
            _ => {
                let (_, _, x, xt) = as_pair(&parts, &STAR_PAIRS).expect("orbit-closed result");
                let t = Monomial::from_pairs(
                    x.iter().map(|&(k, e)| (k as VarId, e)).chain(xt.iter().map(|&(k, e)| ((nd + k) as VarId, e))),
                );
                w2.insert(shared.mul(&t));
            }
        }
    }
    let mut w1: Vec<Monomial> = w1.into_iter().collect();
    let mut w2: Vec<Monomial> = w2.into_iter().collect();
    w1.sort_by(crate::emitverify::naming_order);
    w2.sort_by(crate::emitverify::naming_order);
    Ok(AgnosticQuadratization { family: family.clone(), template_table, w1, w2, mode: mode.clone(), certificate })
}

fn template_table(family: &CoupledFamily, instance: &OdeSystem) -> Result<VarTable, AgnosticError> {
    let mut decls: Vec<(String, VarKind)> = Vec::new();
    for &b in &family.block {
        decls.push((family.table.name(b).to_string(), VarKind::State));
    }
    for &b in &family.block {
        decls.push((format!("{}~", family.table.name(b)), VarKind::State));
    }
    for v in instance.table.iter() {
        if matches!(v.kind, VarKind::Input { .. } | VarKind::Parameter) {
            decls.push((v.name.clone(), v.kind));
        }
    }
    Ok(VarTable::new(decls).map_err(SystemError::from)?)
}

/// Family member for the matrices `mats` (one per block) together with the
/// instantiated templates.
pub fn specialize(aq: &AgnosticQuadratization, mats: &[CouplingMatrix]) -> Result<(OdeSystem, Vec<Monomial>), AgnosticError> {
    let family = &aq.family;
    let nd = family.block_dim();
    let n = mats.first().map(|m| m.n).unwrap_or(0);
    if mats.len() != nd || n == 0 || mats.iter().any(|m| m.n != n || m.entries.keys().any(|&(i, j)| i >= n || j >= n)) {
        return Err(AgnosticError::DimensionMismatch { expected: nd, n });
    }
    let inst = build(family, mats)?;
    let t = &inst.system.table;
    let shared = |v: VarId| t.lookup(aq.template_table.name(v)).expect("shared symbol");
    let instantiate = |m: &Monomial, x: usize, xt: Option<usize>| -> Monomial {
        Monomial::from_pairs(m.pairs().iter().map(|&(v, e)| {
            let v = v as usize;
            let id = if v < nd {
                inst.grid[x][v]
            } else if v < 2 * nd {
                inst.grid[xt.expect("coupled template")][v - nd]
            } else {
                shared(v as VarId)
            };
            (id, e)
        }))
    };
    let mut out = BTreeSet::new();
    for i in 0..n {
        for m in &aq.w1 {
            out.insert(instantiate(m, i, None));
        }
    }
    let coupled = family.coupled_blocks();
    let mut pairs = BTreeSet::new();
    for &j in &coupled {
        for &(i0, i1) in mats[j].entries.keys() {
            if i0 != i1 {
                pairs.insert((i0, i1));
            }
        }
    }
    for (i0, i1) in pairs {
        for m in &aq.w2 {
            out.insert(instantiate(m, i0, Some(i1)));
        }
    }
    out.remove(&Monomial::one());
    Ok((inst.system, out.into_iter().collect()))
}

/// Specializes and checks the instantiated templates.
pub fn check_specialization(aq: &AgnosticQuadratization, mats: &[CouplingMatrix]) -> Result<bool, AgnosticError> {
    let (system, vars) = specialize(aq, mats)?;
    Ok(is_quadratization(&system, &vars, &aq.mode)?)
}

fn entry_from_json(v: &Value) -> Result<Entry, AgnosticError> {
    match v {
        Value::Number(x) => {
            let text = x.to_string();
            parse_rational(&text).map(Entry::Value).ok_or_else(|| AgnosticError::Matrix(format!("bad number {text}")))
        }
        Value::String(s) => Ok(parse_rational(s).map(Entry::Value).unwrap_or_else(|| Entry::Param(s.clone()))),
        other => Err(AgnosticError::Matrix(format!("bad entry {other}"))),
    }
}

fn parse_rational(s: &str) -> Option<Q> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let a: num_bigint::BigInt = a.trim().parse().ok()?;
        let b: num_bigint::BigInt = b.trim().parse().ok()?;
        if b == 0.into() {
            return None;
        }
        return Some(Q::new(a, b));
    }
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(p) => (&s[..p], s[p + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (neg, mant) = match mant.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, mant),
    };
    let (int, frac) = mant.split_once('.').unwrap_or((mant, ""));
    if int.is_empty() && frac.is_empty() || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits: num_bigint::BigInt = format!("{int}{frac}").parse().ok()?;
    let scale = exp - frac.len() as i32;
    let ten = num_bigint::BigInt::from(10);
    let mut q = Q::from_integer(digits);
    if scale >= 0 {
        q *= Q::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        q /= Q::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if neg { -q } else { q })
}

/// Reads coupling matrices from JSON. Accepted shapes: a list of dense
/// matrices (lists of rows), or `{"n": N, "matrices": [...]}` where each
/// matrix is dense or a list of `[i, j, value]` triples (0-based). Values are
/// numbers, rational strings such as `"-1/2"`, or parameter names.
pub fn matrices_from_json(text: &str) -> Result<Vec<CouplingMatrix>, AgnosticError> {
    let v: Value = serde_json::from_str(text).map_err(|e| AgnosticError::Matrix(e.to_string()))?;
    let (n, list) = match &v {
        Value::Array(a) => (None, a.clone()),
        Value::Object(o) => {
            let n = o.get("n").and_then(Value::as_u64).map(|x| x as usize);
            let list = o.get("matrices").and_then(Value::as_array).cloned().ok_or_else(|| {
                AgnosticError::Matrix("missing `matrices`".into())
            })?;
            (n, list)
        }
        _ => return Err(AgnosticError::Matrix("expected a list or an object".into())),
    };
    list.iter().map(|m| matrix_from_json(m, n)).collect()
}

fn matrix_from_json(v: &Value, n: Option<usize>) -> Result<CouplingMatrix, AgnosticError> {
    let rows = v.as_array().ok_or_else(|| AgnosticError::Matrix("matrix must be a list".into()))?;
    let triples = n.is_some() && rows.iter().all(|r| r.as_array().is_some_and(|t| t.len() == 3 && t[0].is_u64() && t[1].is_u64()));
    if triples {
        let n = n.unwrap();
        let mut m = CouplingMatrix::new(n);
        for t in rows {
            let t = t.as_array().unwrap();
            let (i, j) = (t[0].as_u64().unwrap() as usize, t[1].as_u64().unwrap() as usize);
            if i >= n || j >= n {
                return Err(AgnosticError::Matrix(format!("entry ({i}, {j}) outside {n}x{n}")));
            }
            m.set(i, j, entry_from_json(&t[2])?);
        }
        return Ok(m);
    }
    let size = rows.len();
    if n.is_some_and(|n| n != size) {
        return Err(AgnosticError::Matrix(format!("dense matrix has {size} rows")));
    }
    let mut m = CouplingMatrix::new(size);
    for (i, r) in rows.iter().enumerate() {
        let r = r.as_array().filter(|r| r.len() == size).ok_or_else(|| AgnosticError::Matrix(format!("row {i} is not of length {size}")))?;
        for (j, x) in r.iter().enumerate() {
            m.set(i, j, entry_from_json(x)?);
        }
    }
    Ok(m)
}
