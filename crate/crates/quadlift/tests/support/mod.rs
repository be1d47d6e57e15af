//! Random corpora, a brute-force optimality oracle and integration helpers
//! shared by the property suites.
#![allow(dead_code)]

use std::collections::{HashMap, HashSet};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use quadlift::dsl;
use quadlift::emitverify::{numeric_check, rk4_trajectory, verify_symbolic, InputSignal, NumericSetup};
use quadlift::quadratize::{search, upper_bound, QuadratizationResult, SearchMode};
use quadlift::{Coeff, Expr, InputDecl, Monomial, OdeSystem, Poly, VarKind, VarTable, Q};

pub const SYSTEMS: usize = 200;
/// Largest number of subsets the oracle may enumerate for one system.
pub const ORACLE_BUDGET: u64 = 400_000;
pub const TOTAL_DEGREE: i32 = 4;

pub fn system(text: &str) -> OdeSystem {
    dsl::parse(text).unwrap().system.to_ode().unwrap()
}

pub fn random_system(rng: &mut ChaCha8Rng) -> OdeSystem {
    let n = rng.gen_range(1..=3usize);
    let cap = rng.gen_range(2..=4);
    let decls = (0..n).map(|i| (format!("x{}", i + 1), VarKind::State)).collect();
    let table = VarTable::new(decls).unwrap();
    let mut eqs = Vec::new();
    for v in 0..n {
        let mut p = Poly::zero();
        for _ in 0..rng.gen_range(1..=3) {
            let mut left = TOTAL_DEGREE;
            let m = Monomial::from_pairs((0..n).map(|i| {
                let e = rng.gen_range(0..=cap.min(left));
                left -= e;
                (i as u32, e)
            }));
            let c = rng.gen_range(1..=3) * if rng.gen_bool(0.5) { 1 } else { -1 };
            p.add_term(m, Coeff::int(c));
        }
        eqs.push((v as u32, p));
    }
    OdeSystem::new(table, Vec::<InputDecl>::new(), eqs, false).unwrap()
}

/// Monomials with each exponent bounded by the degree of the system in that
/// variable, excluding constants and single variables.
pub fn box_candidates(sys: &OdeSystem) -> Vec<Monomial> {
    let vars = sys.differential_vars();
    let caps: Vec<i32> =
        vars.iter().map(|&v| sys.equations.iter().map(|(_, p)| p.degree_in(v)).max().unwrap_or(0)).collect();
    let mut out = vec![Monomial::one()];
    for (&v, &cap) in vars.iter().zip(&caps) {
        out = out.iter().flat_map(|m| (0..=cap).map(move |e| m.mul(&Monomial::var_pow(v, e)))).collect();
    }
    out.retain(|m| m.degree() >= 2);
    out.sort();
    out
}

/// Decides quadratization by checking every required monomial against all
/// products of two alphabet elements.
pub struct Oracle<'a> {
    sys: &'a OdeSystem,
    vars: Vec<Monomial>,
    rhs: HashSet<Monomial>,
    lie: HashMap<Monomial, Vec<Monomial>>,
}

impl<'a> Oracle<'a> {
    pub fn new(sys: &'a OdeSystem, cands: &[Monomial]) -> Self {
        let vars = sys.differential_vars().into_iter().map(Monomial::var).collect();
        let rhs = sys.equations.iter().flat_map(|(_, p)| p.monomials().cloned()).collect();
        let lie = cands.iter().map(|m| (m.clone(), Self::lie_monomials(sys, m))).collect();
        Oracle { sys, vars, rhs, lie }
    }

    fn lie_monomials(sys: &OdeSystem, m: &Monomial) -> Vec<Monomial> {
        sys.lie_derivative(&Poly::monomial(m.clone())).unwrap().monomials().cloned().collect()
    }

    pub fn quadratizes(&self, s: &[Monomial]) -> bool {
        let mut alphabet: HashSet<Monomial> = self.vars.iter().cloned().collect();
        alphabet.insert(Monomial::one());
        alphabet.extend(s.iter().cloned());
        let ok = |m: &Monomial| alphabet.iter().any(|a| a.divides(m) && alphabet.contains(&m.div(a)));
        self.rhs.iter().all(ok)
            && s.iter().all(|w| match self.lie.get(w) {
                Some(l) => l.iter().all(ok),
                None => Self::lie_monomials(self.sys, w).iter().all(ok),
            })
    }

    /// Whether some subset of `cands` of size exactly `k` quadratizes.
    pub fn exists_of_size(&self, cands: &[Monomial], k: usize) -> bool {
        fn rec(o: &Oracle<'_>, cands: &[Monomial], start: usize, k: usize, cur: &mut Vec<Monomial>) -> bool {
            if cur.len() == k {
                return o.quadratizes(cur);
            }
            for i in start..cands.len() {
                cur.push(cands[i].clone());
                if rec(o, cands, i + 1, k, cur) {
                    return true;
                }
                cur.pop();
            }
            false
        }
        rec(self, cands, 0, k, &mut Vec::new())
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1u64, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

pub struct Case {
    pub system: OdeSystem,
    pub result: QuadratizationResult,
}

pub struct Corpus {
    pub cases: Vec<Case>,
    pub skipped: usize,
}

/// Seeded corpus of random autonomous systems whose search finishes in two
/// seconds and whose brute-force check fits the oracle budget.
pub fn corpus() -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut cases = Vec::new();
    let mut skipped = 0;
    while cases.len() < SYSTEMS {
        let sys = random_system(&mut rng);
        let mode = SearchMode::autonomous().timeout(Duration::from_secs(2));
        let r = match search(&sys, &mode) {
            Ok(r) if r.optimal => r,
            _ => {
                skipped += 1;
                continue;
            }
        };
        let n = box_candidates(&sys).len() as u64;
        let cost: u64 = (0..r.order as u64).map(|k| binomial(n, k)).sum();
        if cost > ORACLE_BUDGET {
            skipped += 1;
            continue;
        }
        cases.push(Case { system: sys, result: r });
    }
    Corpus { cases, skipped }
}

/// Bound, brute-force optimality and emission soundness for one case.
pub fn check_case(case: &Case) -> Result<(), String> {
    let sys = &case.system;
    let r = &case.result;
    let shown = sys.display().to_string();
    if r.order > upper_bound(sys, &SearchMode::autonomous()) {
        return Err(format!("order above the a priori bound for\n{shown}"));
    }
    let cands = box_candidates(sys);
    let oracle = Oracle::new(sys, &cands);
    if !oracle.quadratizes(&r.monomials()) {
        return Err(format!("result rejected by the oracle for\n{shown}"));
    }
    for k in 0..r.order {
        if oracle.exists_of_size(&cands, k) {
            return Err(format!("quadratization of size {k} exists for\n{shown}"));
        }
    }
    let q = &r.quadratic_system;
    if !verify_symbolic(sys, q, &q.definitions).unwrap_or(false) || q.max_degree() > 2 {
        return Err(format!("emission fails verification for\n{shown}"));
    }
    Ok(())
}

/// Numeric comparison of a case against the original system at 16 times
/// finer steps. `None` when the trajectory leaves the finite range.
pub fn refined_deviation(case: &Case, x0: &[Q], horizon: f64, steps: usize) -> Option<f64> {
    let sys = &case.system;
    let q = &case.result.quadratic_system;
    let setup = NumericSetup { x0: x0.to_vec(), horizon, steps, params: HashMap::new(), inputs: vec![] };
    let direct = numeric_check(sys, q, &q.definitions, &setup).ok()?;
    let y0: Vec<f64> = x0.iter().map(|v| num_traits::ToPrimitive::to_f64(v).unwrap()).collect();
    let fine = NumericSetup { steps: steps * 16, ..setup.clone() };
    let reference = rk4_trajectory(sys, y0.clone(), &fine).ok()?;
    let states = sys.differential_vars();
    let value = |x: u32| y0[states.iter().position(|&v| sys.table.name(v) == q.system.table.name(x)).unwrap()];
    let lifted_y0: Vec<f64> = q
        .system
        .differential_vars()
        .iter()
        .map(|&v| match q.definitions.iter().find(|d| d.0 == v) {
            Some((_, p)) => p.eval(&value),
            None => value(v),
        })
        .collect();
    let lifted = rk4_trajectory(&q.system, lifted_y0, &setup).ok()?;
    let mut dev = direct;
    for (k, y) in lifted.iter().enumerate() {
        for (i, x) in reference[k * 16].iter().enumerate() {
            dev = dev.max((y[i] - x).abs() / (1.0 + x.abs()));
        }
    }
    Some(dev)
}

/// Up to 50 numeric runs over the corpus; returns the deviations.
pub fn numeric_runs(corpus: &Corpus) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut out = Vec::new();
    for case in &corpus.cases {
        if out.len() == 50 {
            break;
        }
        let x0: Vec<Q> = case
            .system
            .differential_vars()
            .iter()
            .map(|_| Q::new(rng.gen_range(-30..=30).into(), 100.into()))
            .collect();
        if let Some(d) = refined_deviation(case, &x0, 0.5, 400) {
            out.push(d);
        }
    }
    out
}

pub const SHIFTED: &str = "states: x1, x2\nx1' = (x1 + 1)^3 + x2;\nx2' = x1 + x2;";
pub const DUFFING: &str = "states: x1, x2\ninputs: u\nparams: alpha, delta, beta\n\
    x1' = x2;\nx2' = -alpha*x1 - delta*x2 - beta*x1^3 + u;";

pub fn sine() -> InputSignal {
    InputSignal::new(Expr::Sin(Box::new(Expr::var(0))))
}

pub fn setup(x0: &[Q], horizon: f64, steps: usize, params: &[(&str, f64)], inputs: Vec<InputSignal>) -> NumericSetup {
    NumericSetup {
        x0: x0.to_vec(),
        horizon,
        steps,
        params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        inputs,
    }
}

/// Smooth fixtures with initial values, parameters and whether `u = sin t`.
pub fn smooth_fixtures() -> Vec<(&'static str, Vec<f64>, Vec<(&'static str, f64)>, bool)> {
    vec![
        ("states: x\nx' = -x;", vec![1.0], vec![], false),
        ("states: x, y\nx' = y;\ny' = -x;", vec![1.0, 0.0], vec![], false),
        (SHIFTED, vec![-1.2, 0.2], vec![], false),
        ("states: x, y\nx' = x - x*y;\ny' = -y + x*y;", vec![1.5, 0.5], vec![], false),
        (DUFFING, vec![0.1, 0.2], vec![("alpha", 1.0), ("delta", 0.1), ("beta", 1.0)], true),
    ]
}

/// Observed convergence orders of RK4 on a fixture between 25, 50 and 100 steps.
pub fn convergence_orders(text: &str, y0: &[f64], params: &[(&str, f64)], forced: bool) -> Vec<f64> {
    let sys = system(text);
    let inputs = if forced { vec![sine()] } else { vec![] };
    let x0: Vec<Q> = y0.iter().map(|v| Q::from_float(*v).unwrap()).collect();
    let ref_steps = 6400;
    let reference = rk4_trajectory(&sys, y0.to_vec(), &setup(&x0, 1.0, ref_steps, params, inputs.clone())).unwrap();
    let errs: Vec<f64> = [25, 50, 100]
        .iter()
        .map(|&n| {
            let traj = rk4_trajectory(&sys, y0.to_vec(), &setup(&x0, 1.0, n, params, inputs.clone())).unwrap();
            let stride = ref_steps / n;
            traj.iter()
                .enumerate()
                .flat_map(|(k, y)| y.iter().zip(&reference[k * stride]).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max)
        })
        .collect();
    errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}
