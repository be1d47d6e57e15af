mod support;

use quadlift::quadratize::{search, SearchMode};
use quadlift::Monomial;
use support::{check_case, corpus, numeric_runs, system, Oracle, SYSTEMS};

#[test]
fn random_systems_are_optimal_and_sound() {
    let corpus = corpus();
    let mut orders = [0usize; 8];
    for case in &corpus.cases {
        assert!(case.result.optimal);
        orders[case.result.order.min(7)] += 1;
        check_case(case).unwrap();
    }
    eprintln!("orders {orders:?}, skipped {}", corpus.skipped);
    assert!(orders[2..].iter().sum::<usize>() > SYSTEMS / 4);
}

#[test]
fn random_numeric_checks() {
    let devs = numeric_runs(&corpus());
    assert_eq!(devs.len(), 50);
    assert!(devs.iter().all(|d| *d < 1e-6), "{devs:?}");
}

#[test]
fn sextic_oracle() {
    let sys = system("states: x\nx' = x^6 + x^4 + x^3;");
    let r = search(&sys, &SearchMode::autonomous()).unwrap();
    assert_eq!(r.order, 3);
    let cands: Vec<Monomial> = (2..=6).map(|e| Monomial::var_pow(0, e)).collect();
    let oracle = Oracle::new(&sys, &cands);
    assert!((0..=2).all(|k| !oracle.exists_of_size(&cands, k)));
    assert!(oracle.quadratizes(&r.monomials()));
}
