use proptest::prelude::*;

use quadlift::dsl::{self, DslError};
use quadlift::quadratize::ModeKind;
use quadlift::Expr;

#[test]
fn two_state_listing() {
    let p = dsl::parse("states: x1, x2\nx1' = x1^3 + x2^2;\nx2' = x1 + x2;").unwrap();
    let sys = p.system.to_ode().unwrap();
    assert_eq!(sys.differential_vars().len(), 2);
    assert_eq!(sys.display().to_string(), "x1' = x1**3 + x2**2\nx2' = x1 + x2\n");
    assert_eq!(p.default_mode(), ModeKind::Autonomous);
}

#[test]
fn smooth_input_defaults_to_with_inputs() {
    let p = dsl::parse("states: x\ninputs: u smooth\nx' = x^2 * u;").unwrap();
    assert_eq!(p.default_mode(), ModeKind::WithInputs);
    let q = dsl::parse("states: x\ninputs: u nonsmooth\nx' = x^2 * u;").unwrap();
    assert_eq!(q.default_mode(), ModeKind::InputFree);
}

#[test]
fn empty_rhs_position() {
    let e = dsl::parse("x' = ;").unwrap_err();
    assert_eq!(e.position(), (1, 6), "{e}");
    let e = dsl::parse("states: x\nx' = ;").unwrap_err();
    assert_eq!(e.position(), (2, 6), "{e}");
}

#[test]
fn semantic_errors() {
    assert!(matches!(dsl::parse("states: x\nx' = y;"), Err(DslError::Semantic { .. })));
    assert!(matches!(dsl::parse("states: x\nx' = x;\nx' = 1;"), Err(DslError::Semantic { .. })));
}

#[test]
fn power_binds_tighter_than_minus() {
    let p = dsl::parse("states: x\nx' = -x^2;").unwrap();
    assert_eq!(p.system.to_ode().unwrap().display().to_string(), "x' = -x**2\n");
}

#[test]
fn rationals_and_decimal_exponents() {
    let p = dsl::parse("states: x\nx' = 3/4*x + x^0.5;").unwrap();
    assert!(p.system.to_ode().is_err());
    let shown = p.system.to_string();
    assert!(shown.contains("0.75*x"), "{shown}");
    assert!(shown.contains("x**0.5"), "{shown}");
}

#[test]
fn input_derivatives_are_declared() {
    let p = dsl::parse("states: x\ninputs: u\nx' = x*u' + u;").unwrap();
    let sys = p.system.to_ode().unwrap();
    assert!(sys.table.lookup("u'").is_some());
    assert!(sys.table.lookup("u''").is_some());
}

#[test]
fn expressions_with_resolver() {
    let e = dsl::parse_expr("sin(t) + t^2", &|name, primes| (name == "t" && primes == 0).then_some(0)).unwrap();
    assert!((e.eval(&|_| 2.0) - (2f64.sin() + 4.0)).abs() < 1e-12);
    assert!(dsl::parse_expr("s + 1", &|_, _| None).is_err());
}

#[derive(Clone, Debug)]
enum Node {
    Var(usize),
    Int(i64),
    Frac(i64, i64),
    Add(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Pow(Box<Node>, u32),
    Neg(Box<Node>),
    Exp(Box<Node>),
}

fn node() -> impl Strategy<Value = Node> {
    let leaf = prop_oneof![(0usize..3).prop_map(Node::Var), (-5i64..=5).prop_map(Node::Int), (-5i64..=5, 1i64..=7).prop_map(|(a, b)| Node::Frac(a, b))];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Node::Add(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Node::Mul(Box::new(a), Box::new(b))),
            (inner.clone(), 0u32..4).prop_map(|(a, k)| Node::Pow(Box::new(a), k)),
            inner.clone().prop_map(|a| Node::Neg(Box::new(a))),
            inner.prop_map(|a| Node::Exp(Box::new(a))),
        ]
    })
}

fn text(n: &Node) -> String {
    match n {
        Node::Var(i) => ["x", "y", "a"][*i].to_string(),
        Node::Int(k) => format!("({k})"),
        Node::Frac(a, b) => format!("({a}/{b})"),
        Node::Add(a, b) => format!("({} + {})", text(a), text(b)),
        Node::Mul(a, b) => format!("({} * {})", text(a), text(b)),
        Node::Pow(a, k) => format!("({})^{k}", text(a)),
        Node::Neg(a) => format!("(-{})", text(a)),
        Node::Exp(a) => format!("exp({})", text(a)),
    }
}

proptest! {
    #[test]
    fn render_round_trip(f in node(), g in node()) {
        let src = format!("states: x, y\nparams: a\nx' = {};\ny' = {};", text(&f), text(&g));
        let p = dsl::parse(&src).unwrap();
        let again = dsl::parse(&dsl::render(&p)).unwrap();
        prop_assert_eq!(&again.system.table, &p.system.table);
        let norm = |e: &Expr| e.normalize();
        for ((v, e), (w, h)) in p.system.equations.iter().zip(again.system.equations.iter()) {
            prop_assert_eq!(v, w);
            prop_assert_eq!(norm(e), norm(h));
        }
        prop_assert_eq!(dsl::render(&again), dsl::render(&p));
    }
}
