//! Text format for ODE problems.
//!
//! ```text
//! states: x1, x2
//! inputs: u smooth
//! params: a
//! options: laurent, mode=input-free, max_order=6
//! coupling: x1D for x1
//! x1' = x1^3 + a*x2^2 + x1D;
//! x2' = x1 + u;
//! ```

use std::fmt::{self, Write as _};

use num_bigint::BigInt;
use num_traits::ToPrimitive;

use crate::quadratize::ModeKind;
use crate::symcore::expr::ci;
use crate::symcore::{Expr, ExprSystem, InputDecl, Q, VarId, VarKind, VarTable};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DslError {
    #[error("{line}:{col}: parse error: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: {msg}")]
    Semantic { line: usize, col: usize, msg: String },
}

impl DslError {
    pub fn position(&self) -> (usize, usize) {
        match self {
            DslError::Parse { line, col, .. } | DslError::Semantic { line, col, .. } => (*line, *col),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ProblemOptions {
    pub laurent: bool,
    pub mode: Option<ModeKind>,
    pub max_order: Option<usize>,
    pub max_laurent_degree: Option<i32>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Problem {
    pub system: ExprSystem,
    pub options: ProblemOptions,
}

impl Problem {
    pub fn has_coupling(&self) -> bool {
        self.system.table.iter().any(|v| matches!(v.kind, VarKind::Coupling { .. }))
    }

    /// Mode implied by the declarations and options.
    pub fn default_mode(&self) -> ModeKind {
        if let Some(m) = self.options.mode {
            return m;
        }
        if self.system.inputs.is_empty() {
            ModeKind::Autonomous
        } else if self.system.inputs.iter().all(|i| i.smooth) {
            ModeKind::WithInputs
        } else {
            ModeKind::InputFree
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String, u32),
    Num(Q),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    Semi,
    Eq,
    Colon,
    Newline,
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn perr<T>(line: usize, col: usize, msg: impl Into<String>) -> Result<T, DslError> {
    Err(DslError::Parse { line, col, msg: msg.into() })
}

fn serr<T>(line: usize, col: usize, msg: impl Into<String>) -> Result<T, DslError> {
    Err(DslError::Semantic { line, col, msg: msg.into() })
}

fn lex(text: &str) -> Result<Vec<Token>, DslError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let push = |out: &mut Vec<Token>, tok| out.push(Token { tok, line: tl, col: tc });
        match c {
            '\n' => {
                push(&mut out, Tok::Newline);
                i += 1;
                line += 1;
                col = 1;
                continue;
            }
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
                continue;
            }
            c if c.is_whitespace() => {}
            '+' => push(&mut out, Tok::Plus),
            '-' => push(&mut out, Tok::Minus),
            '*' if chars.get(i + 1) == Some(&'*') => {
                push(&mut out, Tok::Caret);
                i += 2;
                col += 2;
                continue;
            }
            '*' => push(&mut out, Tok::Star),
            '/' => push(&mut out, Tok::Slash),
            '^' => push(&mut out, Tok::Caret),
            '(' => push(&mut out, Tok::LParen),
            ')' => push(&mut out, Tok::RParen),
            ',' => push(&mut out, Tok::Comma),
            ';' => push(&mut out, Tok::Semi),
            '=' => push(&mut out, Tok::Eq),
            ':' => push(&mut out, Tok::Colon),
            c if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let int_part: String = chars[start..i].iter().collect();
                let mut frac = String::new();
                if i < chars.len() && chars[i] == '.' {
                    i += 1;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        frac.push(chars[i]);
                        i += 1;
                    }
                }
                let mut exp10: i64 = 0;
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    let neg = chars.get(j) == Some(&'-');
                    if matches!(chars.get(j), Some('-') | Some('+')) {
                        j += 1;
                    }
                    if chars.get(j).is_some_and(|d| d.is_ascii_digit()) {
                        let s = j;
                        while j < chars.len() && chars[j].is_ascii_digit() {
                            j += 1;
                        }
                        let e: String = chars[s..j].iter().collect();
                        exp10 = e.parse::<i64>().unwrap_or(0) * if neg { -1 } else { 1 };
                        i = j;
                    }
                }
                let digits = format!("{}{}", if int_part.is_empty() { "0" } else { &int_part }, frac);
                let n: BigInt = digits.parse().expect("digits");
                let mut r = Q::from_integer(n) / Q::from_integer(BigInt::from(10).pow(frac.len() as u32));
                let ten = Q::from_integer(BigInt::from(10));
                for _ in 0..exp10.abs() {
                    if exp10 > 0 {
                        r *= &ten;
                    } else {
                        r /= &ten;
                    }
                }
                out.push(Token { tok: Tok::Num(r), line: tl, col: tc });
                col += i - start;
                continue;
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let name: String = chars[start..i].iter().collect();
                let mut primes = 0;
                while i < chars.len() && chars[i] == '\'' {
                    primes += 1;
                    i += 1;
                }
                out.push(Token { tok: Tok::Ident(name, primes), line: tl, col: tc });
                col += i - start;
                continue;
            }
            other => return perr(line, col, format!("unexpected character `{other}`")),
        }
        i += 1;
        col += 1;
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

#[derive(Clone, Debug)]
enum Ast {
    Num(Q),
    Ident { name: String, primes: u32, line: usize, col: usize },
    Neg(Box<Ast>),
    Bin(char, Box<Ast>, Box<Ast>),
    Pow(Box<Ast>, Box<Ast>, usize, usize),
    Call { name: String, arg: Box<Ast>, line: usize, col: usize },
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    skip_newlines: bool,
}

impl Parser {
    fn peek(&mut self) -> &Token {
        if self.skip_newlines {
            while self.toks[self.pos].tok == Tok::Newline {
                self.pos += 1;
            }
        }
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Token {
        self.peek();
        let t = self.toks[self.pos].clone();
        if t.tok != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Token, DslError> {
        let t = self.next();
        if t.tok == want {
            Ok(t)
        } else {
            perr(t.line, t.col, format!("expected {what}"))
        }
    }

    fn expr(&mut self) -> Result<Ast, DslError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Plus => '+',
                Tok::Minus => '-',
                _ => return Ok(lhs),
            };
            self.next();
            let rhs = self.term()?;
            lhs = Ast::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Ast, DslError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Star => '*',
                Tok::Slash => '/',
                _ => return Ok(lhs),
            };
            self.next();
            let rhs = self.unary()?;
            lhs = Ast::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Ast, DslError> {
        match self.peek().tok {
            Tok::Minus => {
                self.next();
                Ok(Ast::Neg(Box::new(self.unary()?)))
            }
            Tok::Plus => {
                self.next();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Ast, DslError> {
        let base = self.primary()?;
        if self.peek().tok == Tok::Caret {
            let t = self.next();
            let exp = self.unary()?;
            return Ok(Ast::Pow(Box::new(base), Box::new(exp), t.line, t.col));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Ast, DslError> {
        let t = self.next();
        match t.tok {
            Tok::Num(r) => Ok(Ast::Num(r)),
            Tok::Ident(name, primes) => {
                if primes == 0 && self.peek().tok == Tok::LParen {
                    self.next();
                    let arg = self.expr()?;
                    self.expect(Tok::RParen, "`)`")?;
                    return Ok(Ast::Call { name, arg: Box::new(arg), line: t.line, col: t.col });
                }
                Ok(Ast::Ident { name, primes, line: t.line, col: t.col })
            }
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            _ => perr(t.line, t.col, "expected expression"),
        }
    }
}

/// Resolves an identifier with a number of primes to a variable.
pub type Resolver<'a> = dyn Fn(&str, u32) -> Option<VarId> + 'a;

fn lower(ast: &Ast, resolve: &Resolver<'_>) -> Result<Expr, DslError> {
    Ok(match ast {
        Ast::Num(r) => Expr::Const(r.clone()),
        Ast::Ident { name, primes, line, col } => match resolve(name, *primes) {
            Some(v) => Expr::Var(v),
            None if *primes > 0 => {
                return serr(*line, *col, format!("`{name}` has no derivative of order {primes} available"))
            }
            None => return serr(*line, *col, format!("undeclared symbol `{name}`")),
        },
        Ast::Neg(a) => Expr::neg(lower(a, resolve)?),
        Ast::Bin(op, a, b) => {
            let (a, b) = (lower(a, resolve)?, lower(b, resolve)?);
            match op {
                '+' => Expr::add(a, b),
                '-' => Expr::sub(a, b),
                '*' => Expr::mul(a, b),
                _ => Expr::div(a, b),
            }
        }
        Ast::Pow(b, e, line, col) => {
            let base = lower(b, resolve)?;
            let ex = lower(e, resolve)?.simplify();
            let Some(r) = ex.as_const().cloned() else {
                return serr(*line, *col, "exponent must be a constant");
            };
            if r.is_integer() {
                match r.to_integer().to_i32() {
                    Some(k) => Expr::pow(base, k),
                    None => return serr(*line, *col, "exponent out of range"),
                }
            } else {
                Expr::RealPow(Box::new(base), r)
            }
        }
        Ast::Call { name, arg, line, col } => {
            let a = Box::new(lower(arg, resolve)?);
            match name.as_str() {
                "exp" => Expr::Exp(a),
                "log" | "ln" => Expr::Log(a),
                "sin" => Expr::Sin(a),
                "cos" => Expr::Cos(a),
                "sqrt" => Expr::RealPow(a, Q::new(1.into(), 2.into())),
                _ => return serr(*line, *col, format!("unknown function `{name}`")),
            }
        }
    })
}

/// Parses a standalone expression.
pub fn parse_expr(text: &str, resolve: &Resolver<'_>) -> Result<Expr, DslError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0, skip_newlines: true };
    let ast = p.expr()?;
    let t = p.next();
    if t.tok != Tok::Eof && t.tok != Tok::Semi {
        return perr(t.line, t.col, "unexpected trailing input");
    }
    Ok(lower(&ast, resolve)?.simplify())
}

/// Parses `name = expr;` definitions over an existing table.
pub fn parse_definitions(text: &str, table: &VarTable) -> Result<Vec<(String, Expr)>, DslError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0, skip_newlines: true };
    let resolve = |n: &str, primes: u32| resolve_in(table, n, primes);
    let mut out = Vec::new();
    loop {
        let t = p.next();
        match t.tok {
            Tok::Eof => return Ok(out),
            Tok::Ident(name, 0) => {
                p.expect(Tok::Eq, "`=`")?;
                let ast = p.expr()?;
                p.expect(Tok::Semi, "`;`")?;
                if out.iter().any(|(n, _)| *n == name) {
                    return serr(t.line, t.col, format!("duplicate definition of `{name}`"));
                }
                out.push((name, lower(&ast, &resolve)?.simplify()));
            }
            _ => return perr(t.line, t.col, "expected definition `name = expr;`"),
        }
    }
}

fn resolve_in(table: &VarTable, name: &str, primes: u32) -> Option<VarId> {
    if primes == 0 {
        return table.lookup(name);
    }
    let base = table.lookup(name)?;
    match table.kind(base) {
        VarKind::Input { input, order: 0 } => table.input_var(input, primes),
        _ => None,
    }
}

struct Header {
    states: Vec<(String, usize, usize)>,
    inputs: Vec<(InputDecl, usize, usize)>,
    params: Vec<(String, usize, usize)>,
    couplings: Vec<(String, String, usize, usize)>,
    options: ProblemOptions,
    explicit_states: bool,
}

fn header_list(p: &mut Parser) -> Vec<Vec<Token>> {
    let mut items = vec![Vec::new()];
    loop {
        let t = p.toks[p.pos].clone();
        match t.tok {
            Tok::Newline | Tok::Eof => {
                if t.tok == Tok::Newline {
                    p.pos += 1;
                }
                break;
            }
            Tok::Comma => {
                items.push(Vec::new());
                p.pos += 1;
            }
            _ => {
                items.last_mut().unwrap().push(t);
                p.pos += 1;
            }
        }
    }
    items.retain(|i| !i.is_empty());
    items
}

fn ident_of(t: &Token) -> Result<String, DslError> {
    match &t.tok {
        Tok::Ident(n, 0) => Ok(n.clone()),
        _ => perr(t.line, t.col, "expected identifier"),
    }
}

fn parse_header(kind: &str, items: Vec<Vec<Token>>, h: &mut Header) -> Result<(), DslError> {
    for item in items {
        let first = &item[0];
        match kind {
            "states" | "params" => {
                if item.len() != 1 {
                    return perr(item[1].line, item[1].col, "expected `,`");
                }
                let n = ident_of(first)?;
                let list = if kind == "states" { &mut h.states } else { &mut h.params };
                list.push((n, first.line, first.col));
            }
            "inputs" => {
                let n = ident_of(first)?;
                let smooth = match item.get(1) {
                    None => true,
                    Some(t) => match &t.tok {
                        Tok::Ident(s, 0) if s == "smooth" => true,
                        Tok::Ident(s, 0) if s == "nonsmooth" => false,
                        _ => return perr(t.line, t.col, "expected `smooth` or `nonsmooth`"),
                    },
                };
                if let Some(t) = item.get(2) {
                    return perr(t.line, t.col, "expected `,`");
                }
                h.inputs.push((InputDecl { name: n, smooth }, first.line, first.col));
            }
            "coupling" => {
                let ph = ident_of(first)?;
                match (item.get(1), item.get(2)) {
                    (Some(Token { tok: Tok::Ident(f, 0), .. }), Some(target)) if f == "for" => {
                        let tgt = ident_of(target)?;
                        h.couplings.push((ph, tgt, first.line, first.col));
                    }
                    _ => return perr(first.line, first.col, "expected `placeholder for state`"),
                }
            }
            "options" => {
                let key = ident_of(first)?;
                let value: String = item[1..]
                    .iter()
                    .skip_while(|t| t.tok == Tok::Eq)
                    .map(|t| match &t.tok {
                        Tok::Ident(s, _) => s.clone(),
                        Tok::Num(r) => r.to_string(),
                        Tok::Minus => "-".into(),
                        _ => "?".into(),
                    })
                    .collect();
                let bad = |msg: &str| perr(first.line, first.col, msg.to_string());
                match key.as_str() {
                    "laurent" => h.options.laurent = value.is_empty() || value == "true",
                    "mode" => match value.parse::<ModeKind>() {
                        Ok(m) => h.options.mode = Some(m),
                        Err(e) => return bad(&e),
                    },
                    "input_free" => h.options.mode = Some(ModeKind::InputFree),
                    "max_order" => match value.parse() {
                        Ok(k) => h.options.max_order = Some(k),
                        Err(_) => return bad("max_order expects a non-negative integer"),
                    },
                    "max_laurent_degree" => match value.parse() {
                        Ok(k) => h.options.max_laurent_degree = Some(k),
                        Err(_) => return bad("max_laurent_degree expects an integer"),
                    },
                    other => return bad(&format!("unknown option `{other}`")),
                }
            }
            _ => unreachable!(),
        }
    }
    Ok(())
}

/// Parses a problem file.
pub fn parse(text: &str) -> Result<Problem, DslError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0, skip_newlines: false };
    let mut h = Header {
        states: vec![],
        inputs: vec![],
        params: vec![],
        couplings: vec![],
        options: ProblemOptions::default(),
        explicit_states: false,
    };
    let mut eqs: Vec<(String, usize, usize, Ast)> = Vec::new();
    loop {
        while p.toks[p.pos].tok == Tok::Newline {
            p.pos += 1;
        }
        let t = p.toks[p.pos].clone();
        match &t.tok {
            Tok::Eof => break,
            Tok::Ident(kw, 0)
                if matches!(kw.as_str(), "states" | "inputs" | "params" | "options" | "coupling")
                    && p.toks.get(p.pos + 1).is_some_and(|n| n.tok == Tok::Colon) =>
            {
                p.pos += 2;
                let items = header_list(&mut p);
                if kw == "states" {
                    h.explicit_states = true;
                }
                parse_header(kw, items, &mut h)?;
            }
            Tok::Ident(name, primes) => {
                if *primes != 1 {
                    return perr(t.line, t.col, "expected `name' = expr;`");
                }
                p.pos += 1;
                p.skip_newlines = true;
                p.expect(Tok::Eq, "`=`")?;
                let ast = p.expr()?;
                p.expect(Tok::Semi, "`;`")?;
                p.skip_newlines = false;
                eqs.push((name.clone(), t.line, t.col, ast));
            }
            _ => return perr(t.line, t.col, "expected header or equation"),
        }
    }
    build(h, eqs)
}

fn build(mut h: Header, eqs: Vec<(String, usize, usize, Ast)>) -> Result<Problem, DslError> {
    if !h.explicit_states {
        for (n, l, c, _) in &eqs {
            if !h.states.iter().any(|s| s.0 == *n) {
                h.states.push((n.clone(), *l, *c));
            }
        }
    }
    let mut decls: Vec<(String, VarKind)> = Vec::new();
    let mut positions = Vec::new();
    for (n, l, c) in &h.states {
        decls.push((n.clone(), VarKind::State));
        positions.push((*l, *c));
    }
    for (i, (d, l, c)) in h.inputs.iter().enumerate() {
        decls.push((d.name.clone(), VarKind::Input { input: i as u32, order: 0 }));
        positions.push((*l, *c));
    }
    for (ph, tgt, l, c) in &h.couplings {
        let Some(target) = h.states.iter().position(|s| s.0 == *tgt) else {
            return serr(*l, *c, format!("coupling target `{tgt}` is not a state"));
        };
        decls.push((ph.clone(), VarKind::Coupling { target: target as u32 }));
        positions.push((*l, *c));
    }
    for (n, l, c) in &h.params {
        decls.push((n.clone(), VarKind::Parameter));
        positions.push((*l, *c));
    }
    for i in 0..decls.len() {
        if let Some(j) = (0..i).find(|&j| decls[j].0 == decls[i].0) {
            let _ = j;
            let (l, c) = positions[i];
            return serr(l, c, format!("duplicate symbol `{}`", decls[i].0));
        }
    }
    let inputs: Vec<InputDecl> = h.inputs.iter().map(|i| i.0.clone()).collect();
    let any_nonsmooth = inputs.iter().any(|i| !i.smooth);
    if any_nonsmooth {
        match h.options.mode {
            None => h.options.mode = Some(ModeKind::InputFree),
            Some(ModeKind::InputFree) => {}
            Some(m) => return serr(1, 1, format!("mode {m} requires differentiable inputs; a nonsmooth input is declared")),
        }
    }
    if inputs.is_empty() && matches!(h.options.mode, Some(ModeKind::WithInputs) | Some(ModeKind::InputFree)) {
        return serr(1, 1, "input modes require at least one declared input");
    }
    // Input derivative symbols referenced anywhere.
    let mut max_order = vec![0u32; inputs.len()];
    for (_, _, _, ast) in &eqs {
        collect_primes(ast, &inputs, &mut max_order);
    }
    for (i, d) in inputs.iter().enumerate() {
        for k in 1..=max_order[i] + 1 {
            decls.push((crate::symcore::derivative_name(&d.name, k), VarKind::Input { input: i as u32, order: k }));
        }
    }
    let table = VarTable::new(decls).map_err(|e| DslError::Semantic { line: 1, col: 1, msg: e.to_string() })?;
    let resolve = |n: &str, primes: u32| resolve_in(&table, n, primes);
    let mut equations: Vec<(VarId, Expr)> = Vec::new();
    for (name, l, c, ast) in &eqs {
        let Some(v) = table.lookup(name) else {
            return serr(*l, *c, format!("`{name}` is not a declared state"));
        };
        if table.kind(v) != VarKind::State {
            return serr(*l, *c, format!("`{name}` is not a state"));
        }
        if equations.iter().any(|e| e.0 == v) {
            return serr(*l, *c, format!("duplicate equation for `{name}`"));
        }
        let e = lower(ast, &resolve)?.simplify();
        if let Some(u) = e.free_vars().into_iter().find(|&u| {
            let k = table.kind(u);
            matches!(k, VarKind::Input { input, .. } if !inputs[input as usize].smooth && k != VarKind::Input { input, order: 0 })
        }) {
            return serr(*l, *c, format!("derivative `{}` of a nonsmooth input", table.name(u)));
        }
        equations.push((v, e));
    }
    for (n, l, c) in &h.states {
        let v = table.lookup(n).unwrap();
        if !equations.iter().any(|e| e.0 == v) {
            return serr(*l, *c, format!("no equation for state `{n}`"));
        }
    }
    let system = ExprSystem::new(table, inputs, equations, h.options.laurent)
        .map_err(|e| DslError::Semantic { line: 1, col: 1, msg: e.to_string() })?;
    Ok(Problem { system, options: h.options })
}

fn collect_primes(ast: &Ast, inputs: &[InputDecl], out: &mut [u32]) {
    match ast {
        Ast::Ident { name, primes, .. } => {
            if let Some(i) = inputs.iter().position(|d| d.name == *name) {
                out[i] = out[i].max(*primes);
            }
        }
        Ast::Num(_) => {}
        Ast::Neg(a) => collect_primes(a, inputs, out),
        Ast::Bin(_, a, b) | Ast::Pow(a, b, ..) => {
            collect_primes(a, inputs, out);
            collect_primes(b, inputs, out);
        }
        Ast::Call { arg, .. } => collect_primes(arg, inputs, out),
    }
}

/// Renders a problem back to text.
pub fn render(problem: &Problem) -> String {
    let sys = &problem.system;
    let t = &sys.table;
    let mut s = String::new();
    let names = |pred: &dyn Fn(VarKind) -> bool| -> Vec<String> {
        t.iter().filter(|v| pred(v.kind)).map(|v| v.name.clone()).collect()
    };
    let states = names(&|k| k.is_differential());
    let _ = writeln!(s, "states: {}", states.join(", "));
    if !sys.inputs.is_empty() {
        let items: Vec<String> = sys
            .inputs
            .iter()
            .map(|i| format!("{} {}", i.name, if i.smooth { "smooth" } else { "nonsmooth" }))
            .collect();
        let _ = writeln!(s, "inputs: {}", items.join(", "));
    }
    let params = names(&|k| k == VarKind::Parameter);
    if !params.is_empty() {
        let _ = writeln!(s, "params: {}", params.join(", "));
    }
    let o = &problem.options;
    let mut opts = Vec::new();
    if o.laurent {
        opts.push("laurent".to_string());
    }
    if let Some(m) = o.mode {
        opts.push(format!("mode={m}"));
    }
    if let Some(k) = o.max_order {
        opts.push(format!("max_order={k}"));
    }
    if let Some(k) = o.max_laurent_degree {
        opts.push(format!("max_laurent_degree={k}"));
    }
    if !opts.is_empty() {
        let _ = writeln!(s, "options: {}", opts.join(", "));
    }
    let couplings: Vec<String> = t
        .iter()
        .filter_map(|v| match v.kind {
            VarKind::Coupling { target } => Some(format!("{} for {}", v.name, states[target as usize])),
            _ => None,
        })
        .collect();
    if !couplings.is_empty() {
        let _ = writeln!(s, "coupling: {}", couplings.join(", "));
    }
    for (v, e) in &sys.equations {
        let _ = writeln!(s, "{}' = {};", t.name(*v), e.display(t));
    }
    s
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(self))
    }
}

/// Small helper used by callers that need `-e` for a parsed constant.
pub fn negate(e: Expr) -> Expr {
    Expr::Mul(vec![ci(-1), e]).simplify()
}
