use std::collections::HashSet;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::time::Instant;

use rayon::prelude::*;

use super::space::{Space, Status};
use crate::symcore::Monomial;

/// Progress report passed to an optional callback.
#[derive(Clone, Copy, Debug)]
pub struct Progress {
    pub nodes_visited: u64,
    pub best_order: Option<usize>,
}

pub type ProgressFn<'a> = &'a (dyn Fn(Progress) + Sync);

pub(crate) struct Outcome {
    pub solution: Option<Vec<Monomial>>,
    pub optimal: bool,
    pub timed_out: bool,
    pub nodes: u64,
}

enum Eval {
    Solved,
    Dead,
    Open { lb: usize, pick: Vec<Vec<Monomial>> },
}

struct Shared<'a> {
    space: &'a Space,
    nodes: AtomicU64,
    deadline: Option<Instant>,
    stop: AtomicBool,
    progress: Option<ProgressFn<'a>>,
    best: Option<usize>,
}

impl Shared<'_> {
    fn tick(&self) -> bool {
        let n = self.nodes.fetch_add(1, Ordering::Relaxed) + 1;
        self.expired();
        if n % 16384 == 0 {
            if let Some(p) = self.progress {
                p(Progress { nodes_visited: n, best_order: self.best });
            }
        }
        !self.stop.load(Ordering::Relaxed)
    }

    fn expired(&self) -> bool {
        if let Some(d) = self.deadline {
            if Instant::now() >= d {
                self.stop.store(true, Ordering::Relaxed);
            }
        }
        self.stop.load(Ordering::Relaxed)
    }

    fn eval(&self, s: &[Monomial], forbidden: &HashSet<Monomial>) -> Eval {
        let space = self.space;
        let set: HashSet<Monomial> = s.iter().cloned().collect();
        let mut open: Vec<(Monomial, Vec<Vec<Monomial>>)> = Vec::new();
        for m in space.required(s) {
            match space.classify(&m, &set, s, forbidden) {
                Status::Decomposable => {}
                Status::Open(c) if c.is_empty() => return Eval::Dead,
                Status::Open(c) => open.push((m, c)),
            }
        }
        if open.is_empty() {
            return Eval::Solved;
        }
        open.sort_by(|a, b| a.1.len().cmp(&b.1.len()).then_with(|| a.0.cmp(&b.0)));
        // Undecomposable monomials with disjoint candidate sets each need their own extension.
        let mut used: HashSet<&Monomial> = HashSet::new();
        let mut lb = 0;
        for (_, cands) in &open {
            if cands.iter().flatten().any(|x| used.contains(x)) {
                continue;
            }
            lb += cands.iter().map(|o| o.len()).min().unwrap_or(0);
            used.extend(cands.iter().flatten());
        }
        let pick = open.swap_remove(0).1;
        Eval::Open { lb, pick }
    }

    fn dfs(&self, s: Vec<Monomial>, forbidden: HashSet<Monomial>, k: usize, memo: &mut HashSet<(Vec<Monomial>, Vec<Monomial>)>, out: &mut Vec<Vec<Monomial>>) {
        if !self.tick() {
            return;
        }
        let (lb, pick) = match self.eval(&s, &forbidden) {
            Eval::Solved => {
                out.push(s);
                return;
            }
            Eval::Dead => return,
            Eval::Open { lb, pick } => (lb, pick),
        };
        if s.len() + lb > k {
            return;
        }
        let mut key_f: Vec<Monomial> = forbidden.iter().cloned().collect();
        key_f.sort();
        if !memo.insert((s.clone(), key_f)) {
            return;
        }
        let mut forb = forbidden;
        for orbit in pick {
            if s.len() + orbit.len() <= k {
                self.dfs(merge(&s, &orbit), forb.clone(), k, memo, out);
            }
            forb.extend(orbit);
        }
    }

    fn greedy(&self, limit: usize) -> Option<Vec<Monomial>> {
        let none = HashSet::new();
        let mut s: Vec<Monomial> = Vec::new();
        loop {
            if !self.tick() {
                return None;
            }
            let pick = match self.eval(&s, &none) {
                Eval::Solved => return Some(s),
                Eval::Dead => return None,
                Eval::Open { pick, .. } => pick,
            };
            let mut best: Option<((usize, usize, usize), Vec<Monomial>)> = None;
            for orbit in pick {
                if self.expired() {
                    return None;
                }
                if s.len() + orbit.len() > limit {
                    continue;
                }
                let next = merge(&s, &orbit);
                let score = match self.eval(&next, &none) {
                    Eval::Solved => (0, 0, orbit.len()),
                    Eval::Dead => continue,
                    Eval::Open { lb, .. } => (1, lb, orbit.len()),
                };
                if best.as_ref().is_none_or(|b| score < b.0) {
                    best = Some((score, next));
                }
            }
            s = best?.1;
        }
    }
}

fn merge(s: &[Monomial], add: &[Monomial]) -> Vec<Monomial> {
    let mut v: Vec<Monomial> = s.iter().chain(add.iter()).cloned().collect();
    v.sort();
    v.dedup();
    v
}

fn canonical_min(sols: Vec<Vec<Monomial>>) -> Option<Vec<Monomial>> {
    sols.into_iter().min_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)))
}

/// Greedy descent for an upper bound, then iterative deepening on the number
/// of added monomials up to `limit`.
pub(crate) fn run(space: &Space, limit: usize, deadline: Option<Instant>, workers: usize, progress: Option<ProgressFn<'_>>) -> Outcome {
    let mut shared = Shared { space, nodes: AtomicU64::new(0), deadline, stop: AtomicBool::new(false), progress, best: None };
    let greedy = shared.greedy(limit);
    shared.best = greedy.as_ref().map(|g| g.len());
    let none = HashSet::new();
    let (root_lb, root_pick) = match shared.eval(&[], &none) {
        Eval::Solved => {
            return Outcome { solution: Some(vec![]), optimal: true, timed_out: false, nodes: shared.nodes.into_inner() }
        }
        Eval::Dead => {
            return Outcome { solution: None, optimal: true, timed_out: false, nodes: shared.nodes.into_inner() }
        }
        Eval::Open { lb, pick } => (lb, pick),
    };
    let top = greedy.as_ref().map_or(limit, |g| g.len().min(limit));
    let pool = if workers > 1 { rayon::ThreadPoolBuilder::new().num_threads(workers).build().ok() } else { None };
    for k in root_lb.max(1)..=top {
        let children: Vec<(Vec<Monomial>, HashSet<Monomial>)> = {
            let mut forb = HashSet::new();
            let mut v = Vec::new();
            for orbit in &root_pick {
                if orbit.len() <= k {
                    v.push((orbit.clone(), forb.clone()));
                }
                forb.extend(orbit.iter().cloned());
            }
            v
        };
        let explore = |(s, f): &(Vec<Monomial>, HashSet<Monomial>)| {
            let mut memo = HashSet::new();
            let mut out = Vec::new();
            shared.dfs(merge(&[], s), f.clone(), k, &mut memo, &mut out);
            out
        };
        let found: Vec<Vec<Monomial>> = match &pool {
            Some(p) => p.install(|| children.par_iter().map(explore).collect::<Vec<_>>()).into_iter().flatten().collect(),
            None => children.iter().map(explore).flatten().collect(),
        };
        if shared.stop.load(Ordering::Relaxed) {
            let best = canonical_min(found.into_iter().chain(greedy).collect());
            return Outcome { solution: best, optimal: false, timed_out: true, nodes: shared.nodes.into_inner() };
        }
        if !found.is_empty() {
            return Outcome {
                solution: canonical_min(found),
                optimal: true,
                timed_out: false,
                nodes: shared.nodes.into_inner(),
            };
        }
    }
    let timed_out = shared.stop.load(Ordering::Relaxed);
    let solution = greedy.filter(|g| g.len() <= limit);
    Outcome { optimal: !timed_out && solution.is_none(), solution, timed_out, nodes: shared.nodes.into_inner() }
}
