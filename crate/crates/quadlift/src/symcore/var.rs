use std::collections::HashMap;

pub type VarId = u32;

/// Role of a symbol inside a system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VarKind {
    State,
    Introduced,
    /// `input` is the declaration index of the base input, `order` the derivative order.
    Input { input: u32, order: u32 },
    /// Placeholder for the linear coupling of the state with declaration index `target`.
    Coupling { target: u32 },
    Parameter,
}

impl VarKind {
    fn rank(&self) -> (u32, u32) {
        match *self {
            VarKind::State => (0, 0),
            VarKind::Introduced => (1, 0),
            VarKind::Input { order, .. } => (2, order),
            VarKind::Coupling { .. } => (3, 0),
            VarKind::Parameter => (4, 0),
        }
    }

    pub fn is_differential(&self) -> bool {
        matches!(self, VarKind::State | VarKind::Introduced)
    }

    pub fn is_input(&self) -> bool {
        matches!(self, VarKind::Input { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub index: VarId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InputDecl {
    pub name: String,
    pub smooth: bool,
}

/// Ordered symbol table. Identifiers follow the canonical order
/// states < introduced < inputs < input derivatives < placeholders < parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarTable {
    vars: Vec<Variable>,
    by_name: HashMap<String, VarId>,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum TableError {
    #[error("duplicate symbol `{0}`")]
    Duplicate(String),
}

pub fn derivative_name(base: &str, order: u32) -> String {
    let mut s = base.to_string();
    for _ in 0..order {
        s.push('\'');
    }
    s
}

impl VarTable {
    /// Builds a table from declarations; declarations of equal rank keep their relative order.
    pub fn new(decls: Vec<(String, VarKind)>) -> Result<Self, TableError> {
        let mut decls: Vec<(usize, String, VarKind)> =
            decls.into_iter().enumerate().map(|(i, (n, k))| (i, n, k)).collect();
        decls.sort_by_key(|(i, _, k)| (k.rank(), *i));
        let mut vars = Vec::with_capacity(decls.len());
        let mut by_name = HashMap::new();
        for (idx, (_, name, kind)) in decls.into_iter().enumerate() {
            if by_name.insert(name.clone(), idx as VarId).is_some() {
                return Err(TableError::Duplicate(name));
            }
            vars.push(Variable { name, kind, index: idx as VarId });
        }
        Ok(VarTable { vars, by_name })
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn get(&self, id: VarId) -> &Variable {
        &self.vars[id as usize]
    }

    pub fn name(&self, id: VarId) -> &str {
        &self.vars[id as usize].name
    }

    pub fn kind(&self, id: VarId) -> VarKind {
        self.vars[id as usize].kind
    }

    pub fn lookup(&self, name: &str) -> Option<VarId> {
        self.by_name.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Variable> {
        self.vars.iter()
    }

    pub fn ids_of(&self, pred: impl Fn(VarKind) -> bool) -> Vec<VarId> {
        self.vars.iter().filter(|v| pred(v.kind)).map(|v| v.index).collect()
    }

    pub fn declarations(&self) -> Vec<(String, VarKind)> {
        self.vars.iter().map(|v| (v.name.clone(), v.kind)).collect()
    }

    /// Variable holding the derivative of order `order` of input `input`, if present.
    pub fn input_var(&self, input: u32, order: u32) -> Option<VarId> {
        self.vars
            .iter()
            .find(|v| v.kind == VarKind::Input { input, order })
            .map(|v| v.index)
    }

    pub fn max_input_order(&self, input: u32) -> Option<u32> {
        self.vars
            .iter()
            .filter_map(|v| match v.kind {
                VarKind::Input { input: i, order } if i == input => Some(order),
                _ => None,
            })
            .max()
    }

    /// The first `count` names `w0, w1, ...` not already in the table.
    pub fn fresh_names(&self, count: usize) -> Vec<String> {
        (0..).map(|j| format!("w{j}")).filter(|n| self.lookup(n).is_none()).take(count).collect()
    }
}
