use quadlift::dsl;
use quadlift::polynomialize::{check_back_substitution, detect_nonpolynomial_nodes, greedy_order, polynomialize};
use quadlift::emitverify::verify_symbolic;
use quadlift::quadratize::{search, SearchMode};
use quadlift::ExprSystem;

fn expr_system(text: &str) -> ExprSystem {
    dsl::parse(text).unwrap().system
}

const EXP2: &str = "x' = exp(-x) + exp(-2*x);";
const COMBUSTION: &str = "states: x1, x2, x3, x4\ninputs: u\nparams: A, E, R\noptions: laurent\n\
    x1' = -A*exp(-E/(R*u))*x1^0.2*x2^1.3;\n\
    x2' = -2*A*exp(-E/(R*u))*x1^0.2*x2^1.3;\n\
    x3' = A*exp(-E/(R*u))*x1^0.2*x2^1.3;\n\
    x4' = 2*A*exp(-E/(R*u))*x1^0.2*x2^1.3;";

#[test]
fn detects_maximal_subtrees() {
    let sys = expr_system(EXP2);
    let found: Vec<String> = detect_nonpolynomial_nodes(&sys).iter().map(|e| e.display(&sys.table).to_string()).collect();
    assert_eq!(found.len(), 2, "{found:?}");
    assert!(detect_nonpolynomial_nodes(&expr_system("x' = x^2 + 3*x;")).is_empty());
    let c = expr_system(COMBUSTION);
    assert_eq!(detect_nonpolynomial_nodes(&c).len(), 3);
}

#[test]
fn one_exponential_suffices() {
    let sys = expr_system(EXP2);
    let r = polynomialize(&sys, None).unwrap();
    assert_eq!(r.order(), 1);
    let shown = r.system.display().to_string();
    assert!(shown.contains("x' = w0**2 + w0"), "{shown}");
    assert!(shown.contains("w0' = -w0**3 - w0**2"), "{shown}");
    assert!(check_back_substitution(&sys, &r));
    assert_eq!(greedy_order(&sys, 8).unwrap(), 2);
}

#[test]
fn polynomial_input_is_identity() {
    let sys = expr_system("x' = x^2 + 3*x;");
    let r = polynomialize(&sys, None).unwrap();
    assert_eq!(r.order(), 0);
    assert_eq!(r.system, sys.to_ode().unwrap());
}

#[test]
fn combustion_needs_three() {
    let sys = expr_system(COMBUSTION);
    let r = polynomialize(&sys, None).unwrap();
    assert_eq!(r.order(), 3);
    assert!(check_back_substitution(&sys, &r));
    let defs: Vec<String> =
        r.substitutions.iter().map(|s| s.defining_expression.display(&r.system.table).to_string()).collect();
    assert_eq!(defs, ["x1**0.2", "x2**1.3", "exp(-(E/(u*R)))"]);
    let q = search(&r.system, &SearchMode::with_inputs().laurent(true).max_order(10)).unwrap();
    assert_eq!(q.order, 7);
    let shown = q.quadratic_system.display().to_string();
    assert!(shown.contains("u''"), "{shown}");
    let lifted = &q.quadratic_system;
    assert!(verify_symbolic(&r.system, lifted, &lifted.definitions).unwrap());
}

#[test]
fn sine_and_cosine_come_together() {
    let sys = expr_system("x' = sin(x);");
    let r = polynomialize(&sys, None).unwrap();
    assert_eq!(r.order(), 2);
    assert!(check_back_substitution(&sys, &r));
}

#[test]
fn budget_is_respected() {
    let sys = expr_system(EXP2);
    assert!(polynomialize(&sys, Some(0)).is_err());
}

#[test]
fn inverse_first_costs_more_than_laurent() {
    let sys = expr_system("states: x1, x2\nx1' = x2^2;\nx2' = x1/x2;");
    let r = polynomialize(&sys, None).unwrap();
    assert_eq!(r.order(), 1);
    let shown = r.system.display().to_string();
    assert!(shown.contains("w0' = -x1*w0**3"), "{shown}");
    let q = search(&r.system, &SearchMode::autonomous()).unwrap();
    assert!(q.order >= 2);
    assert!(r.order() + q.order > 2);
}
