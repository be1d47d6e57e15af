use std::collections::HashMap;
use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use quadlift::dimagnostic::{self, AgnosticError, AgnosticQuadratization};
use quadlift::dsl::{self, DslError, Problem};
use quadlift::emitverify::{
    numeric_check, verify_polynomial_candidate, verify_symbolic, InputSignal, NumericSetup, OperatorForm,
    QuadraticSystem,
};
use quadlift::polynomialize::{polynomialize, PolynomializeError};
use quadlift::quadratize::{search_with_progress, ModeKind, Progress, QuadratizationResult, QuadratizeError, SearchMode};
use quadlift::{OdeSystem, Poly, Q};

#[derive(Parser)]
#[command(name = "quadlift", version, about = "Quadratization and polynomialization of ODE systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Introduce variables that make the right-hand sides polynomial
    Polynomialize {
        /// Problem file, `-` for stdin
        file: PathBuf,
        /// Largest number of new variables to try
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long, value_enum, default_value_t = Emit::Text)]
        emit: Emit,
    },
    /// Search for an optimal monomial quadratization
    Quadratize {
        file: PathBuf,
        #[command(flatten)]
        search: SearchArgs,
        #[arg(long, value_enum, default_value_t = Emit::Text)]
        emit: Emit,
    },
    /// Dimension-agnostic quadratization of a family with coupling placeholders
    Agnostic {
        file: PathBuf,
        #[command(flatten)]
        search: SearchArgs,
        /// JSON file with one coupling matrix per block variable
        #[arg(long)]
        specialize: Option<PathBuf>,
        /// Matrix size for coordinate lists that do not state it
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_enum, default_value_t = Emit::Text)]
        emit: Emit,
    },
    /// Check candidate new variables given as `name = expression` lines
    Verify {
        file: PathBuf,
        /// Definitions file
        candidates: PathBuf,
        #[command(flatten)]
        search: SearchArgs,
        #[arg(long, value_enum, default_value_t = Emit::Text)]
        emit: Emit,
    },
    /// Quadratize, then integrate both systems and compare trajectories
    SimulateCheck {
        file: PathBuf,
        #[command(flatten)]
        search: SearchArgs,
        /// Initial values of the states, comma separated
        #[arg(long, allow_hyphen_values = true)]
        x0: String,
        /// Time horizon
        #[arg(long = "T", default_value_t = 1.0)]
        horizon: f64,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        /// Parameter values, e.g. `a=1,b=0.5`
        #[arg(long, default_value = "")]
        params: String,
        /// Input signal in `t`, once per declared input
        #[arg(long = "u", allow_hyphen_values = true)]
        inputs: Vec<String>,
        /// Largest accepted relative deviation
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
}

#[derive(Args, Clone)]
struct SearchArgs {
    /// Keep input derivatives out of the lifted system
    #[arg(long)]
    input_free: bool,
    /// Allow negative exponents
    #[arg(long)]
    laurent: bool,
    #[arg(long)]
    max_order: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    max_laurent_degree: Option<i32>,
    /// Seconds
    #[arg(long)]
    timeout: Option<f64>,
    #[arg(long, env = "QUADLIFT_WORKERS", default_value_t = 1)]
    workers: usize,
    /// Report search progress on stderr
    #[arg(long)]
    progress: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Emit {
    Text,
    Json,
    Operators,
}

enum Failure {
    Usage(String),
    NotFound(String),
    Timeout(String),
    Rejected(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::NotFound(_) | Failure::Rejected(_) => 2,
            Failure::Timeout(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::NotFound(m) | Failure::Timeout(m) | Failure::Rejected(m) => m,
        }
    }
}

impl From<QuadratizeError> for Failure {
    fn from(e: QuadratizeError) -> Self {
        match e {
            QuadratizeError::NotFoundWithinBound { .. } => Failure::NotFound(e.to_string()),
            QuadratizeError::Timeout => Failure::Timeout(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

impl From<PolynomializeError> for Failure {
    fn from(e: PolynomializeError) -> Self {
        match e {
            PolynomializeError::BudgetExceeded { .. } => Failure::NotFound(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

impl From<AgnosticError> for Failure {
    fn from(e: AgnosticError) -> Self {
        match e {
            AgnosticError::Quadratize(q) => q.into(),
            other => Failure::Usage(other.to_string()),
        }
    }
}

fn read_source(path: &PathBuf) -> Result<String, Failure> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).map_err(|e| Failure::Usage(format!("stdin: {e}")))?;
        return Ok(s);
    }
    std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn dsl_failure(path: &PathBuf, e: DslError) -> Failure {
    Failure::Usage(format!("{}:{e}", path.display()))
}

fn load(path: &PathBuf) -> Result<Problem, Failure> {
    let text = read_source(path)?;
    dsl::parse(&text).map_err(|e| dsl_failure(path, e))
}

fn search_mode(problem: &Problem, args: &SearchArgs) -> Result<SearchMode, Failure> {
    let mut kind = problem.default_mode();
    if args.input_free {
        kind = ModeKind::InputFree;
    }
    let mut mode = SearchMode::new(kind).laurent(args.laurent || problem.options.laurent).workers(args.workers.max(1));
    mode.max_order = args.max_order.or(problem.options.max_order);
    mode.max_laurent_degree = args.max_laurent_degree.or(problem.options.max_laurent_degree);
    if let Some(t) = args.timeout {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Failure::Usage("--timeout must be positive".into()));
        }
        mode.timeout = Some(Duration::from_secs_f64(t));
    }
    Ok(mode)
}

fn report(p: Progress) {
    eprintln!("nodes visited: {}, best order: {:?}", p.nodes_visited, p.best_order);
}

fn run_search(system: &OdeSystem, mode: &SearchMode, progress: bool) -> Result<QuadratizationResult, Failure> {
    let cb = report;
    let r = search_with_progress(system, mode, if progress { Some(&cb) } else { None })?;
    if !r.optimal && mode.timeout.is_some() && r.elapsed >= mode.timeout.unwrap() {
        eprintln!("warning: timed out, returning the best quadratization found");
    }
    Ok(r)
}

/// Polynomial system of a problem, polynomializing first when needed.
fn polynomial_system(problem: &Problem) -> Result<(OdeSystem, Option<quadlift::polynomialize::Polynomialization>), Failure> {
    if problem.has_coupling() {
        return problem.system.to_ode().map(|s| (s, None)).map_err(|e| Failure::Usage(e.to_string()));
    }
    match problem.system.to_ode() {
        Ok(s) => Ok((s, None)),
        Err(_) => {
            let p = polynomialize(&problem.system, None)?;
            Ok((p.system.clone(), Some(p)))
        }
    }
}

fn result_json(r: &QuadratizationResult, emit: Emit) -> Value {
    let mut v = match emit {
        Emit::Operators => match OperatorForm::from_system(&r.quadratic_system) {
            Some(op) => op.to_json(),
            None => json!({"error": "operator form needs rational coefficients and no input derivatives"}),
        },
        _ => r.quadratic_system.to_json(),
    };
    if let Value::Object(o) = &mut v {
        o.insert("order".into(), json!(r.order));
        o.insert("optimal".into(), json!(r.optimal));
        o.insert("mode".into(), json!(r.mode.kind.to_string()));
        o.insert("nodes_visited".into(), json!(r.nodes_visited));
        o.insert("wall_time_ms".into(), json!(r.elapsed.as_millis() as u64));
    }
    v
}

fn substitutions_text(p: &quadlift::polynomialize::Polynomialization) -> String {
    let t = &p.system.table;
    let mut s = String::new();
    for sub in &p.substitutions {
        s.push_str(&format!("{} = {}\n", sub.name, sub.defining_expression.display(t)));
    }
    s
}

fn substitutions_json(p: &quadlift::polynomialize::Polynomialization) -> Value {
    let t = &p.system.table;
    Value::Array(
        p.substitutions
            .iter()
            .map(|s| {
                json!({
                    "name": s.name,
                    "definition": s.defining_expression.display(t).to_string(),
                    "derivative": s.derivative_rhs.display(t).to_string(),
                })
            })
            .collect(),
    )
}

fn cmd_polynomialize(file: &PathBuf, budget: Option<usize>, emit: Emit) -> Result<String, Failure> {
    let problem = load(file)?;
    let start = Instant::now();
    let p = polynomialize(&problem.system, budget)?;
    Ok(match emit {
        Emit::Text => format!("Introduced variables:\n{}\n{}", substitutions_text(&p), p.system.display()),
        _ => {
            let t = &p.system.table;
            let eqs: Vec<Value> = p
                .system
                .equations
                .iter()
                .map(|(v, q)| json!({"lhs": t.name(*v), "rhs": q.display(t).to_string()}))
                .collect();
            let out = json!({
                "introduced": substitutions_json(&p),
                "equations": eqs,
                "order": p.order(),
                "wall_time_ms": start.elapsed().as_millis() as u64,
            });
            serde_json::to_string_pretty(&out).unwrap() + "\n"
        }
    })
}

fn cmd_quadratize(file: &PathBuf, args: &SearchArgs, emit: Emit) -> Result<String, Failure> {
    let problem = load(file)?;
    if problem.has_coupling() {
        return Err(Failure::Usage("system has coupling placeholders; use `agnostic`".into()));
    }
    let mode = search_mode(&problem, args)?;
    let (system, pre) = polynomial_system(&problem)?;
    let r = run_search(&system, &mode, args.progress)?;
    Ok(match emit {
        Emit::Text => {
            let mut s = String::new();
            if let Some(p) = &pre {
                s.push_str(&format!("Polynomialization:\n{}\n", substitutions_text(p)));
            }
            s.push_str(&r.quadratic_system.display().to_string());
            if !r.optimal {
                s.push_str("\n(optimality not guaranteed)\n");
            }
            s
        }
        _ => {
            let mut v = result_json(&r, emit);
            if let (Some(p), Value::Object(o)) = (&pre, &mut v) {
                o.insert("polynomialization".into(), substitutions_json(p));
            }
            serde_json::to_string_pretty(&v).unwrap() + "\n"
        }
    })
}

fn agnostic_text(aq: &AgnosticQuadratization) -> String {
    let (w1, w2) = aq.display_templates();
    format!(
        "Uncoupled templates (w1): [{}]\nCoupled templates (w2): [{}]\nVariables on the four-node member: {}\n",
        w1.join(", "),
        w2.join(", "),
        aq.certificate.order
    )
}

fn cmd_agnostic(
    file: &PathBuf,
    args: &SearchArgs,
    specialize: Option<&PathBuf>,
    n: Option<usize>,
    emit: Emit,
) -> Result<String, Failure> {
    let problem = load(file)?;
    if !problem.has_coupling() {
        return Err(Failure::Usage("no coupling placeholders declared".into()));
    }
    let mode = search_mode(&problem, args)?;
    let system = problem.system.to_ode().map_err(|e| Failure::Usage(e.to_string()))?;
    let family = dimagnostic::extract_family(&system)?;
    let cb = report;
    let aq = dimagnostic::search_agnostic_with_progress(&family, &mode, if args.progress { Some(&cb) } else { None })?;
    let mut text = agnostic_text(&aq);
    let (w1, w2) = aq.display_templates();
    let mut out = json!({
        "w1": w1,
        "w2": w2,
        "order": aq.certificate.order,
        "optimal": false,
        "mode": mode.kind.to_string(),
        "nodes_visited": aq.certificate.nodes_visited,
        "wall_time_ms": aq.certificate.elapsed.as_millis() as u64,
    });
    if let Some(path) = specialize {
        let raw = read_source(path)?;
        let raw = match (n, serde_json::from_str::<Value>(&raw)) {
            (Some(n), Ok(Value::Object(mut o))) if !o.contains_key("n") => {
                o.insert("n".into(), json!(n));
                Value::Object(o).to_string()
            }
            (Some(n), Ok(Value::Array(a))) if a.iter().all(|m| m.as_array().is_some_and(|r| r.len() != n)) => {
                json!({"n": n, "matrices": a}).to_string()
            }
            _ => raw,
        };
        let mats = dimagnostic::matrices_from_json(&raw)?;
        if let Some(n) = n {
            if mats.iter().any(|m| m.n != n) {
                return Err(Failure::Usage(format!("matrices are not {n}x{n}")));
            }
        }
        let (sys, vars) = dimagnostic::specialize(&aq, &mats)?;
        let lifted = quadlift::emitverify::emit_quadratic(&sys, &vars, &aq.mode)?;
        let ok = verify_symbolic(&sys, &lifted, &lifted.definitions).unwrap_or(false);
        text.push_str(&format!("\nSpecialization (n = {}, verified: {ok}):\n", mats[0].n));
        text.push_str(&lifted.display().to_string());
        if let Value::Object(o) = &mut out {
            o.insert("specialization".into(), lifted.to_json());
            o.insert("verified".into(), json!(ok));
        }
        if !ok {
            return Err(Failure::Rejected(format!("{text}\nspecialized system failed verification")));
        }
    }
    Ok(match emit {
        Emit::Text => text,
        _ => serde_json::to_string_pretty(&out).unwrap() + "\n",
    })
}

fn cmd_verify(file: &PathBuf, candidates: &PathBuf, args: &SearchArgs, emit: Emit) -> Result<String, Failure> {
    let problem = load(file)?;
    let mode = search_mode(&problem, args)?;
    let system = problem.system.to_ode().map_err(|e| Failure::Usage(e.to_string()))?;
    let text = read_source(candidates)?;
    let defs = dsl::parse_definitions(&text, &system.table).map_err(|e| dsl_failure(candidates, e))?;
    let mut polys: Vec<Poly> = Vec::new();
    for (name, e) in &defs {
        let p = e
            .to_poly(&system.table, true)
            .map_err(|err| Failure::Usage(format!("definition of `{name}`: {err}")))?;
        polys.push(p);
    }
    match verify_polynomial_candidate(&system, &polys, &mode) {
        Some(q) => {
            let ok = verify_symbolic(&system, &q, &q.definitions).unwrap_or(false);
            if !ok {
                return Err(Failure::Rejected("lifted system failed symbolic verification".into()));
            }
            Ok(match emit {
                Emit::Text => format!("quadratization: yes\n\n{}", q.display()),
                _ => {
                    let mut v = q.to_json();
                    if let Value::Object(o) = &mut v {
                        o.insert("quadratization".into(), json!(true));
                        o.insert("order".into(), json!(q.definitions.len()));
                        o.insert("mode".into(), json!(mode.kind.to_string()));
                    }
                    serde_json::to_string_pretty(&v).unwrap() + "\n"
                }
            })
        }
        None => Err(Failure::Rejected("quadratization: no".into())),
    }
}

fn constant(text: &str) -> Result<Q, Failure> {
    let e = dsl::parse_expr(text, &|_, _| None).map_err(|e| Failure::Usage(format!("`{text}`: {e}")))?;
    e.simplify().as_const().cloned().ok_or_else(|| Failure::Usage(format!("`{text}` is not a number")))
}

fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty())
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    file: &PathBuf,
    args: &SearchArgs,
    x0: &str,
    horizon: f64,
    steps: usize,
    params: &str,
    inputs: &[String],
    tol: f64,
) -> Result<String, Failure> {
    let problem = load(file)?;
    let mode = search_mode(&problem, args)?;
    let system = problem.system.to_ode().map_err(|e| Failure::Usage(format!("{e}; polynomialize first")))?;
    let r = run_search(&system, &mode, args.progress)?;
    let x0 = split_list(x0).map(constant).collect::<Result<Vec<Q>, _>>()?;
    let mut values = HashMap::new();
    for kv in split_list(params) {
        let (k, v) = kv.split_once('=').ok_or_else(|| Failure::Usage(format!("expected name=value, got `{kv}`")))?;
        let v: f64 = v.trim().parse().map_err(|_| Failure::Usage(format!("bad value in `{kv}`")))?;
        values.insert(k.trim().to_string(), v);
    }
    let signals = inputs
        .iter()
        .map(|u| {
            dsl::parse_expr(u, &|name, primes| (name == "t" && primes == 0).then_some(0))
                .map(InputSignal::new)
                .map_err(|e| Failure::Usage(format!("--u `{u}`: {e}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if steps == 0 || !(horizon > 0.0) {
        return Err(Failure::Usage("--T and --steps must be positive".into()));
    }
    let setup = NumericSetup { x0, horizon, steps, params: values, inputs: signals };
    let q: &QuadraticSystem = &r.quadratic_system;
    let dev = numeric_check(&system, q, &q.definitions, &setup).map_err(|e| Failure::Usage(e.to_string()))?;
    let text = format!("{}\nmax relative deviation: {dev:.3e}\n", q.display());
    if dev > tol {
        return Err(Failure::Rejected(format!("{text}deviation exceeds tolerance {tol:e}")));
    }
    Ok(text)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let out = match &cli.command {
        Command::Polynomialize { file, budget, emit } => cmd_polynomialize(file, *budget, *emit),
        Command::Quadratize { file, search, emit } => cmd_quadratize(file, search, *emit),
        Command::Agnostic { file, search, specialize, n, emit } => {
            cmd_agnostic(file, search, specialize.as_ref(), *n, *emit)
        }
        Command::Verify { file, candidates, search, emit } => cmd_verify(file, candidates, search, *emit),
        Command::SimulateCheck { file, search, x0, horizon, steps, params, inputs, tol } => {
            cmd_simulate(file, search, x0, *horizon, *steps, params, inputs, *tol)
        }
    };
    match out {
        Ok(s) => {
            print!("{s}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
