use std::fmt;
use std::str::FromStr;
use std::time::Duration;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeKind {
    Autonomous,
    WithInputs,
    InputFree,
}

impl fmt::Display for ModeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModeKind::Autonomous => "autonomous",
            ModeKind::WithInputs => "with-inputs",
            ModeKind::InputFree => "input-free",
        })
    }
}

impl FromStr for ModeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.replace('_', "-").as_str() {
            "autonomous" => Ok(ModeKind::Autonomous),
            "with-inputs" | "inputs" => Ok(ModeKind::WithInputs),
            "input-free" => Ok(ModeKind::InputFree),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

/// Search configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchMode {
    pub kind: ModeKind,
    pub laurent: bool,
    pub max_order: Option<usize>,
    pub max_laurent_degree: Option<i32>,
    pub timeout: Option<Duration>,
    pub workers: usize,
}

impl SearchMode {
    pub fn new(kind: ModeKind) -> Self {
        SearchMode { kind, laurent: false, max_order: None, max_laurent_degree: None, timeout: None, workers: 1 }
    }

    pub fn autonomous() -> Self {
        Self::new(ModeKind::Autonomous)
    }

    pub fn with_inputs() -> Self {
        Self::new(ModeKind::WithInputs)
    }

    pub fn input_free() -> Self {
        Self::new(ModeKind::InputFree)
    }

    pub fn laurent(mut self, on: bool) -> Self {
        self.laurent = on;
        self
    }

    pub fn max_order(mut self, k: usize) -> Self {
        self.max_order = Some(k);
        self
    }

    pub fn max_laurent_degree(mut self, d: i32) -> Self {
        self.max_laurent_degree = Some(d);
        self
    }

    pub fn timeout(mut self, t: Duration) -> Self {
        self.timeout = Some(t);
        self
    }

    pub fn workers(mut self, w: usize) -> Self {
        self.workers = w.max(1);
        self
    }
}

impl fmt::Display for SearchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)?;
        if self.laurent {
            f.write_str("+laurent")?;
        }
        Ok(())
    }
}
