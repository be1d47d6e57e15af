use serde_json::{json, Value};

use super::QuadraticSystem;
use crate::symcore::{format_rational, Coeff, Monomial, Poly, Q, VarId};

pub type Rational = Q;

/// `x' = A x + H (x ⊗' x) + sum_k N_k x u_k + B u + c`, where `⊗'` keeps
/// the pairs `(i, j)` with `i <= j` in row-major order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OperatorForm {
    pub states: Vec<String>,
    pub inputs: Vec<String>,
    pub a: Vec<Vec<Q>>,
    pub h: Vec<Vec<Q>>,
    pub n: Vec<Vec<Vec<Q>>>,
    pub b: Vec<Vec<Q>>,
    pub c: Option<Vec<Q>>,
}

/// Position of the pair `(i, j)`, `i <= j`, in the compact product of `n` states.
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * i.saturating_sub(1) / 2 + (j - i)
}

fn zeros(r: usize, c: usize) -> Vec<Vec<Q>> {
    vec![vec![Q::default(); c]; r]
}

impl OperatorForm {
    /// Extracts operators when all coefficients are rational and only
    /// undifferentiated inputs occur.
    pub fn from_system(q: &QuadraticSystem) -> Option<OperatorForm> {
        let sys = &q.system;
        let t = &sys.table;
        let states: Vec<VarId> = sys.differential_vars();
        let inputs: Vec<VarId> = (0..sys.inputs.len() as u32).filter_map(|i| t.input_var(i, 0)).collect();
        let n = states.len();
        let r = inputs.len();
        let mut f = OperatorForm {
            states: states.iter().map(|&v| t.name(v).to_string()).collect(),
            inputs: inputs.iter().map(|&v| t.name(v).to_string()).collect(),
            a: zeros(n, n),
            h: zeros(n, n * (n + 1) / 2),
            n: vec![zeros(n, n); r],
            b: zeros(n, r),
            c: None,
        };
        let mut c = vec![Q::default(); n];
        for (row, (_, p)) in sys.equations.iter().enumerate() {
            for (m, coeff) in p.terms() {
                let val = coeff.as_rational()?;
                let mut xs = Vec::new();
                let mut us = Vec::new();
                for &(v, e) in m.pairs() {
                    if e < 0 {
                        return None;
                    }
                    for _ in 0..e {
                        if let Some(i) = states.iter().position(|&s| s == v) {
                            xs.push(i);
                        } else if let Some(k) = inputs.iter().position(|&u| u == v) {
                            us.push(k);
                        } else {
                            return None;
                        }
                    }
                }
                match (xs.as_slice(), us.as_slice()) {
                    ([], []) => c[row] += val,
                    ([i], []) => f.a[row][*i] += val,
                    ([i, j], []) => f.h[row][pair_index(n, *i, *j)] += val,
                    ([i], [k]) => f.n[*k][row][*i] += val,
                    ([], [k]) => f.b[row][*k] += val,
                    _ => return None,
                }
            }
        }
        if c.iter().any(|x| *x != Q::default()) {
            f.c = Some(c);
        }
        Some(f)
    }

    /// Right-hand sides rebuilt from the operators, over the table of `q`.
    pub fn to_polys(&self, q: &QuadraticSystem) -> Vec<(VarId, Poly)> {
        let t = &q.system.table;
        let xs: Vec<VarId> = self.states.iter().map(|s| t.lookup(s).unwrap()).collect();
        let us: Vec<VarId> = self.inputs.iter().map(|s| t.lookup(s).unwrap()).collect();
        let n = xs.len();
        let term = |m: Monomial, v: &Q| Poly::term(m, Coeff::rational(v.clone()));
        let mut out = Vec::new();
        for row in 0..n {
            let mut p = Poly::zero();
            if let Some(c) = &self.c {
                p = p.add(&term(Monomial::one(), &c[row]));
            }
            for i in 0..n {
                p = p.add(&term(Monomial::var(xs[i]), &self.a[row][i]));
                for j in i..n {
                    let m = Monomial::var(xs[i]).mul(&Monomial::var(xs[j]));
                    p = p.add(&term(m, &self.h[row][pair_index(n, i, j)]));
                }
                for (k, &u) in us.iter().enumerate() {
                    let m = Monomial::var(xs[i]).mul(&Monomial::var(u));
                    p = p.add(&term(m, &self.n[k][row][i]));
                }
            }
            for (k, &u) in us.iter().enumerate() {
                p = p.add(&term(Monomial::var(u), &self.b[row][k]));
            }
            out.push((xs[row], p));
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let s = |m: &Vec<Vec<Q>>| -> Value {
            Value::Array(m.iter().map(|r| Value::Array(r.iter().map(|x| json!(format_rational(x))).collect())).collect())
        };
        let n = self.states.len();
        let mut entries = Vec::new();
        for (row, r) in self.h.iter().enumerate() {
            for i in 0..n {
                for j in i..n {
                    let v = &r[pair_index(n, i, j)];
                    if *v != Q::default() {
                        entries.push(json!({"row": row, "i": i, "j": j, "value": format_rational(v)}));
                    }
                }
            }
        }
        json!({
            "states": self.states,
            "inputs": self.inputs,
            "A": s(&self.a),
            "H": {"indexing": "compact-upper", "columns": n * (n + 1) / 2, "entries": entries},
            "N": self.n.iter().map(s).collect::<Vec<_>>(),
            "B": s(&self.b),
            "c": self.c.as_ref().map(|c| c.iter().map(format_rational).collect::<Vec<_>>()),
        })
    }
}
