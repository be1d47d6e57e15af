use quadlift::dsl;
use quadlift::emitverify::verify_symbolic;
use quadlift::quadratize::{
    bilinear_construct, check_triangular_coupling, generate_extensions, is_quadratization, search, upper_bound,
    QuadratizeError, SearchMode,
};
use quadlift::{Monomial, OdeSystem, Poly};

fn system(text: &str) -> OdeSystem {
    dsl::parse(text).unwrap().system.to_ode().unwrap()
}

fn mono(sys: &OdeSystem, spec: &[(&str, i32)]) -> Monomial {
    Monomial::from_pairs(spec.iter().map(|(n, e)| (sys.table.lookup(n).unwrap(), *e)))
}

fn names(sys: &OdeSystem, ms: &[Monomial]) -> Vec<String> {
    ms.iter().map(|m| Poly::monomial(m.clone()).display(&sys.table).to_string()).collect()
}

const CUBIC: &str = "states: x1, x2\nx1' = x1^3 + x2^2;\nx2' = x1 + x2;";
const EX23: &str = "states: x1, x2\nx1' = (x1 + 1)^3 + x2;\nx2' = x1 + x2;";

#[test]
fn cubic_pair_needs_two_squares() {
    let sys = system(CUBIC);
    let r = search(&sys, &SearchMode::autonomous()).unwrap();
    assert_eq!(r.order, 2);
    assert!(r.optimal);
    assert_eq!(names(&sys, &r.monomials()), vec!["x1**2", "x2**2"]);
    let q = &r.quadratic_system;
    assert!(verify_symbolic(&sys, q, &q.definitions).unwrap());
    let text = q.system.display().to_string();
    assert!(text.contains("x1' = x1*w0 + w1"), "{text}");
}

#[test]
fn shifted_cube_uses_one_square() {
    let sys = system(EX23);
    assert_eq!(upper_bound(&sys, &SearchMode::autonomous()), 8);
    let r = search(&sys, &SearchMode::autonomous()).unwrap();
    assert_eq!(names(&sys, &r.monomials()), vec!["x1**2"]);
    let q = &r.quadratic_system;
    let w = q.system.table.lookup("w0").unwrap();
    let rhs = q.system.rhs(w).unwrap().display(&q.system.table).to_string();
    assert_eq!(rhs, "2*x1*x2 + 6*x1*w0 + 2*w0**2 + 2*x1 + 6*w0");
}

#[test]
fn is_quadratization_examples() {
    let sys = system(EX23);
    let m = SearchMode::autonomous();
    assert!(is_quadratization(&sys, &[mono(&sys, &[("x1", 2)])], &m).unwrap());
    assert!(!is_quadratization(&sys, &[], &m).unwrap());
}

#[test]
fn sextic_needs_three() {
    let sys = system("x' = x^6 + x^4 + x^3;");
    let r = search(&sys, &SearchMode::autonomous()).unwrap();
    assert_eq!(r.order, 3);
    assert!(r.optimal);
}

#[test]
fn extensions_of_empty_set() {
    let sys = system(EX23);
    let ext = generate_extensions(&sys, &[], &SearchMode::autonomous()).unwrap();
    let firsts: Vec<String> = ext.iter().map(|s| names(&sys, s).join(",")).collect();
    assert!(firsts.contains(&"x1**2".to_string()));
    assert!(firsts.contains(&"x1**3".to_string()));

    let sys = system("states: x\ninputs: u\nx' = x + x^2*u;");
    let ext = generate_extensions(&sys, &[], &SearchMode::with_inputs()).unwrap();
    let all: Vec<String> = ext.iter().map(|s| names(&sys, s).join(",")).collect();
    for want in ["x*u", "x**2*u", "x**2"] {
        assert!(all.contains(&want.to_string()), "{all:?}");
    }
}

#[test]
fn with_inputs_product() {
    let sys = system("states: x\ninputs: u\nx' = x + x^2*u;");
    assert_eq!(upper_bound(&sys, &SearchMode::with_inputs()), 6);
    let r = search(&sys, &SearchMode::with_inputs()).unwrap();
    assert_eq!(names(&sys, &r.monomials()), vec!["x*u"]);
    let q = &r.quadratic_system;
    let rhs = q.system.rhs(q.system.table.lookup("w0").unwrap()).unwrap();
    let shown = rhs.display(&q.system.table).to_string();
    assert!(shown.contains("x*u'"), "{shown}");
    assert!(verify_symbolic(&sys, q, &q.definitions).unwrap());
}

const DUFFING: &str = "states: x1, x2\ninputs: u nonsmooth\nparams: a, b, d\nx1' = x2;\nx2' = -a*x1 - d*x2 - b*x1^3 + u;";

#[test]
fn duffing_input_free() {
    let sys = system(DUFFING);
    let r = search(&sys, &SearchMode::input_free()).unwrap();
    assert_eq!(names(&sys, &r.monomials()), vec!["x1**2"]);
    assert!(r.quadratic_system.has_quadratic_shape());
    let shown = r.quadratic_system.system.display().to_string();
    assert!(!shown.contains("u'"), "{shown}");
    let all = bilinear_construct(&sys).unwrap();
    assert_eq!(all.len(), 9);
    assert!(is_quadratization(&sys, &all, &SearchMode::input_free()).unwrap());
}

#[test]
fn input_free_example_with_triangularity() {
    let sys = system("states: x1, x2\ninputs: u\nx1' = x1 + x1*u;\nx2' = x1^2*u;");
    let r = search(&sys, &SearchMode::input_free()).unwrap();
    assert_eq!(names(&sys, &r.monomials()), vec!["x1**2"]);
    assert!(!check_triangular_coupling(&sys).unwrap());
    assert!(check_triangular_coupling(&system("states: x1, x2\ninputs: u\nx1' = u;\nx2' = x1*u;")).unwrap());
}

#[test]
fn no_input_free_quadratization() {
    let sys = system("states: x\ninputs: u\nx' = x^2*u;");
    assert!(!check_triangular_coupling(&sys).unwrap());
    assert_eq!(bilinear_construct(&sys), Err(QuadratizeError::NotPolynomialBilinear));
    let err = search(&sys, &SearchMode::input_free().max_order(6)).unwrap_err();
    assert!(matches!(err, QuadratizeError::NotFoundWithinBound { .. }), "{err:?}");
}

#[test]
fn laurent_pair() {
    let sys = system("states: x1, x2\noptions: laurent\nx1' = x2^2;\nx2' = x1/x2;");
    let r = search(&sys, &SearchMode::autonomous().laurent(true)).unwrap();
    assert_eq!(r.order, 2);
    let want = vec![mono(&sys, &[("x2", -1)]), mono(&sys, &[("x1", 1), ("x2", -2)])];
    let mut got = r.monomials();
    got.sort();
    let mut want = want;
    want.sort();
    assert_eq!(got, want);
    assert!(!r.optimal);
    let q = &r.quadratic_system;
    assert!(verify_symbolic(&sys, q, &q.definitions).unwrap());
}

#[test]
fn already_quadratic() {
    let sys = system("states: x, y\nx' = x*y + 1;\ny' = x;");
    let r = search(&sys, &SearchMode::autonomous()).unwrap();
    assert_eq!(r.order, 0);
    assert_eq!(upper_bound(&sys, &SearchMode::autonomous()), 4);
}

#[test]
fn parallel_matches_sequential() {
    let sys = system("states: x, y\nx' = x^3*y + y^2;\ny' = x^2 + y^3;");
    let a = search(&sys, &SearchMode::autonomous()).unwrap();
    let b = search(&sys, &SearchMode::autonomous().workers(4)).unwrap();
    assert_eq!(a.monomials(), b.monomials());
    assert_eq!(a.quadratic_system, b.quadratic_system);
}
