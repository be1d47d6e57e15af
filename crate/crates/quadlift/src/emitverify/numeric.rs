use std::collections::{BTreeSet, HashMap};

use num_traits::ToPrimitive;

use super::QuadraticSystem;
use crate::symcore::{Expr, OdeSystem, Poly, Q, VarId, VarKind};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumericError {
    #[error("`{var}` reached zero near t = {t} while raised to a negative power")]
    SingularityEncountered { var: String, t: f64 },
    #[error("non-finite state near t = {t}")]
    NonFiniteState { t: f64 },
    #[error("no value for parameter `{0}`")]
    MissingParameter(String),
    #[error("no signal for input `{0}`")]
    MissingInput(String),
    #[error("expected {expected} initial values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Closed-form input `u(t)`; the expression uses variable `0` for `t`.
#[derive(Clone, Debug)]
pub struct InputSignal {
    derivatives: Vec<Expr>,
}

impl InputSignal {
    pub fn new(expr: Expr) -> Self {
        InputSignal { derivatives: vec![expr.simplify()] }
    }

    pub fn constant(v: Q) -> Self {
        Self::new(Expr::Const(v))
    }

    fn ensure(&mut self, order: usize) {
        while self.derivatives.len() <= order {
            let next = self.derivatives.last().unwrap().diff(0).simplify();
            self.derivatives.push(next);
        }
    }

    fn value(&self, order: usize, t: f64) -> f64 {
        self.derivatives[order].eval(&|_| t)
    }
}

#[derive(Clone, Debug)]
pub struct NumericSetup {
    /// Initial values of the differential variables of the original system, in table order.
    pub x0: Vec<Q>,
    pub horizon: f64,
    pub steps: usize,
    pub params: HashMap<String, f64>,
    pub inputs: Vec<InputSignal>,
}

struct Evaluator<'a> {
    slots: Vec<Slot>,
    rhs: Vec<&'a Poly>,
    singular: Vec<(usize, String)>,
    inputs: &'a [InputSignal],
}

#[derive(Clone, Copy)]
enum Slot {
    State(usize),
    Input(usize, usize),
    Value(f64),
}

impl<'a> Evaluator<'a> {
    fn new(system: &'a OdeSystem, setup: &'a NumericSetup, inputs: &'a [InputSignal]) -> Result<Self, NumericError> {
        let t = &system.table;
        let states = system.differential_vars();
        let mut slots = Vec::with_capacity(t.len());
        for v in t.iter() {
            slots.push(match v.kind {
                VarKind::State | VarKind::Introduced => {
                    Slot::State(states.iter().position(|&s| s == v.index).expect("differential variable"))
                }
                VarKind::Input { input, order } => {
                    if inputs.len() <= input as usize {
                        return Err(NumericError::MissingInput(system.inputs[input as usize].name.clone()));
                    }
                    Slot::Input(input as usize, order as usize)
                }
                VarKind::Parameter => match setup.params.get(&v.name) {
                    Some(x) => Slot::Value(*x),
                    None => {
                        let used = system.equations.iter().any(|(_, p)| p.params().contains(&v.index));
                        if used {
                            return Err(NumericError::MissingParameter(v.name.clone()));
                        }
                        Slot::Value(f64::NAN)
                    }
                },
                VarKind::Coupling { .. } => Slot::Value(f64::NAN),
            });
        }
        let mut singular: BTreeSet<VarId> = BTreeSet::new();
        for (_, p) in &system.equations {
            for m in p.monomials() {
                singular.extend(m.pairs().iter().filter(|x| x.1 < 0).map(|x| x.0));
            }
        }
        let singular = singular
            .into_iter()
            .filter_map(|v| match slots[v as usize] {
                Slot::State(i) => Some((i, t.name(v).to_string())),
                _ => None,
            })
            .collect();
        Ok(Evaluator { slots, rhs: system.equations.iter().map(|e| &e.1).collect(), singular, inputs })
    }

    fn deriv(&self, t: f64, y: &[f64]) -> Result<Vec<f64>, NumericError> {
        for (i, name) in &self.singular {
            if y[*i] == 0.0 {
                return Err(NumericError::SingularityEncountered { var: name.clone(), t });
            }
        }
        let value = |v: VarId| match self.slots[v as usize] {
            Slot::State(i) => y[i],
            Slot::Input(k, order) => self.inputs[k].value(order, t),
            Slot::Value(x) => x,
        };
        let out: Vec<f64> = self.rhs.iter().map(|p| p.eval(&value)).collect();
        if out.iter().any(|x| !x.is_finite()) {
            return Err(NumericError::NonFiniteState { t });
        }
        Ok(out)
    }

    fn param(&self, v: VarId) -> f64 {
        match self.slots[v as usize] {
            Slot::Value(x) => x,
            _ => f64::NAN,
        }
    }
}

fn prepared_inputs(system: &OdeSystem, setup: &NumericSetup) -> Vec<InputSignal> {
    let mut inputs = setup.inputs.clone();
    for (i, sig) in inputs.iter_mut().enumerate() {
        sig.ensure(system.table.max_input_order(i as u32).unwrap_or(0) as usize);
    }
    inputs
}

/// Classical RK4 with a fixed step; returns the states at every step.
pub fn rk4_trajectory(system: &OdeSystem, y0: Vec<f64>, setup: &NumericSetup) -> Result<Vec<Vec<f64>>, NumericError> {
    let inputs = prepared_inputs(system, setup);
    let ev = Evaluator::new(system, setup, &inputs)?;
    integrate(&ev, y0, setup.horizon, setup.steps)
}

fn integrate(ev: &Evaluator<'_>, y0: Vec<f64>, horizon: f64, steps: usize) -> Result<Vec<Vec<f64>>, NumericError> {
    let n = y0.len();
    let h = horizon / steps as f64;
    let mut out = Vec::with_capacity(steps + 1);
    let mut y = y0;
    out.push(y.clone());
    let axpy = |y: &[f64], k: &[f64], s: f64| -> Vec<f64> { (0..n).map(|i| y[i] + s * k[i]).collect() };
    for step in 0..steps {
        let t = step as f64 * h;
        let k1 = ev.deriv(t, &y)?;
        let k2 = ev.deriv(t + h / 2.0, &axpy(&y, &k1, h / 2.0))?;
        let k3 = ev.deriv(t + h / 2.0, &axpy(&y, &k2, h / 2.0))?;
        let k4 = ev.deriv(t + h, &axpy(&y, &k3, h))?;
        let next: Vec<f64> = (0..n).map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect();
        if next.iter().any(|x| !x.is_finite()) {
            return Err(NumericError::NonFiniteState { t: t + h });
        }
        for (i, name) in &ev.singular {
            if y[*i].signum() != next[*i].signum() || next[*i] == 0.0 {
                return Err(NumericError::SingularityEncountered { var: name.clone(), t: t + h });
            }
        }
        y = next;
        out.push(y.clone());
    }
    Ok(out)
}

/// Integrates both systems and returns the largest relative deviation of the
/// original variables, `|x_lifted - x| / (1 + |x|)`.
pub fn numeric_check(
    original: &OdeSystem,
    lifted: &QuadraticSystem,
    definitions: &[(VarId, Poly)],
    setup: &NumericSetup,
) -> Result<f64, NumericError> {
    let orig_vars = original.differential_vars();
    if setup.x0.len() != orig_vars.len() {
        return Err(NumericError::DimensionMismatch { expected: orig_vars.len(), got: setup.x0.len() });
    }
    let x0: Vec<f64> = setup.x0.iter().map(|q| q.to_f64().unwrap_or(f64::NAN)).collect();
    let reference = rk4_trajectory(original, x0.clone(), setup)?;

    let lsys = &lifted.system;
    let lt = &lsys.table;
    let inputs = prepared_inputs(lsys, setup);
    let ev = Evaluator::new(lsys, setup, &inputs)?;
    let by_name: HashMap<&str, f64> =
        orig_vars.iter().zip(&x0).map(|(&v, &x)| (original.table.name(v), x)).collect();
    let mut y0 = Vec::new();
    for v in lsys.differential_vars() {
        let name = lt.name(v);
        if let Some(x) = by_name.get(name) {
            y0.push(*x);
            continue;
        }
        let def = definitions
            .iter()
            .find(|d| d.0 == v)
            .map(|d| &d.1)
            .ok_or_else(|| NumericError::MissingInput(name.to_string()))?;
        let value = |u: VarId| match lt.kind(u) {
            VarKind::Parameter => ev.param(u),
            VarKind::Input { input, order } => inputs[input as usize].value(order as usize, 0.0),
            _ => *by_name.get(lt.name(u)).unwrap_or(&f64::NAN),
        };
        let w = def.eval(&value);
        if !w.is_finite() {
            return Err(NumericError::SingularityEncountered { var: name.to_string(), t: 0.0 });
        }
        y0.push(w);
    }
    let lifted_traj = integrate(&ev, y0, setup.horizon, setup.steps)?;
    let positions: Vec<usize> = orig_vars
        .iter()
        .map(|&v| {
            let id = lt.lookup(original.table.name(v)).expect("original variable in lifted system");
            lsys.differential_vars().iter().position(|&x| x == id).unwrap()
        })
        .collect();
    let mut worst: f64 = 0.0;
    for (a, b) in reference.iter().zip(&lifted_traj) {
        for (i, &p) in positions.iter().enumerate() {
            worst = worst.max((b[p] - a[i]).abs() / (1.0 + a[i].abs()));
        }
    }
    Ok(worst)
}
