//! Concrete value universe: colored grids and non-negative integers, the
//! per-example value tuple stored at each search-graph node, and tasks.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

/// Maximum grid side length (the public ARC format caps grids at 30x30).
pub const MAX_GRID_SIDE: usize = 30;

/// Largest integer any DSL is allowed to produce.
pub const MAX_INT: u64 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DomainError {
    #[error("value out of domain: {0}")]
    OutOfDomain(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("no preimage: {0}")]
    NoPreimage(String),
    #[error("kind mismatch: expected {expected}, got {got}")]
    KindMismatch { expected: ValueKind, got: ValueKind },
    #[error("arity mismatch: expected {expected}, got {got}")]
    ArityMismatch { expected: usize, got: usize },
}

/// One ARC cell color, 0..=9.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Color(u8);

impl Color {
    pub fn new(code: u8) -> Result<Self, DomainError> {
        if code > 9 {
            return Err(DomainError::OutOfDomain(format!("color {code} not in 0..=9")));
        }
        Ok(Color(code))
    }

    pub fn code(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for Color {
    type Error = DomainError;
    fn try_from(v: u8) -> Result<Self, DomainError> {
        Color::new(v)
    }
}

impl From<Color> for u8 {
    fn from(c: Color) -> u8 {
        c.0
    }
}

/// A rectangular grid of colors, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<u8>>", into = "Vec<Vec<u8>>")]
pub struct Grid {
    height: usize,
    width: usize,
    cells: Vec<Color>,
}

impl Grid {
    pub fn new(height: usize, width: usize, cells: Vec<Color>) -> Result<Self, DomainError> {
        if height == 0 || width == 0 {
            return Err(DomainError::ShapeMismatch("empty grid".into()));
        }
        if height > MAX_GRID_SIDE || width > MAX_GRID_SIDE {
            return Err(DomainError::ShapeMismatch(format!(
                "grid {height}x{width} exceeds {MAX_GRID_SIDE}x{MAX_GRID_SIDE}"
            )));
        }
        if cells.len() != height * width {
            return Err(DomainError::ShapeMismatch(format!(
                "expected {} cells, got {}",
                height * width,
                cells.len()
            )));
        }
        Ok(Grid { height, width, cells })
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self, DomainError> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        let mut cells = Vec::with_capacity(height * width);
        for row in rows {
            if row.len() != width {
                return Err(DomainError::ShapeMismatch("ragged rows".into()));
            }
            for &c in row {
                cells.push(Color::new(c)?);
            }
        }
        Grid::new(height, width, cells)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, r: usize, c: usize) -> Color {
        self.cells[r * self.width + c]
    }

    pub fn cells(&self) -> &[Color] {
        &self.cells
    }

    pub fn rows(&self) -> Vec<Vec<u8>> {
        (0..self.height)
            .map(|r| (0..self.width).map(|c| self.get(r, c).code()).collect())
            .collect()
    }

    /// Build from a per-cell function, failing if dims are out of range.
    pub fn build(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> Color,
    ) -> Result<Self, DomainError> {
        let mut cells = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                cells.push(f(r, c));
            }
        }
        Grid::new(height, width, cells)
    }
}

impl TryFrom<Vec<Vec<u8>>> for Grid {
    type Error = DomainError;
    fn try_from(rows: Vec<Vec<u8>>) -> Result<Self, DomainError> {
        Grid::from_rows(&rows)
    }
}

impl From<Grid> for Vec<Vec<u8>> {
    fn from(g: Grid) -> Vec<Vec<u8>> {
        g.rows()
    }
}

/// Variant tag for [`Value`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ValueKind {
    Grid,
    Int,
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueKind::Grid => write!(f, "grid"),
            ValueKind::Int => write!(f, "int"),
        }
    }
}

/// A concrete value: a grid or a non-negative integer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(u64),
    Grid(Grid),
}

impl Value {
    pub fn kind(&self) -> ValueKind {
        match self {
            Value::Grid(_) => ValueKind::Grid,
            Value::Int(_) => ValueKind::Int,
        }
    }

    pub fn as_grid(&self) -> Result<&Grid, DomainError> {
        match self {
            Value::Grid(g) => Ok(g),
            Value::Int(_) => Err(DomainError::KindMismatch {
                expected: ValueKind::Grid,
                got: ValueKind::Int,
            }),
        }
    }

    pub fn as_int(&self) -> Result<u64, DomainError> {
        match self {
            Value::Int(n) => Ok(*n),
            Value::Grid(_) => Err(DomainError::KindMismatch {
                expected: ValueKind::Int,
                got: ValueKind::Grid,
            }),
        }
    }
}

/// One abstract value instantiated across all K training examples of a task.
/// Node identity in the search graph is equality of the whole tuple.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExampleTuple {
    entries: Arc<Vec<Value>>,
}

impl ExampleTuple {
    pub fn new(entries: Vec<Value>) -> Result<Self, DomainError> {
        let mut it = entries.iter();
        let first = it
            .next()
            .ok_or_else(|| DomainError::OutOfDomain("empty example tuple".into()))?;
        let kind = first.kind();
        if it.any(|v| v.kind() != kind) {
            return Err(DomainError::OutOfDomain(
                "mixed variant tags within a tuple".into(),
            ));
        }
        Ok(ExampleTuple { entries: Arc::new(entries) })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn kind(&self) -> ValueKind {
        self.entries[0].kind()
    }

    pub fn entries(&self) -> &[Value] {
        &self.entries
    }

    pub fn get(&self, i: usize) -> &Value {
        &self.entries[i]
    }
}

pub fn values_equal(a: &ExampleTuple, b: &ExampleTuple) -> bool {
    a == b
}

/// Content digest used for hash-consing nodes. FNV-1a over a canonical
/// encoding, so it is stable across runs and platforms.
pub fn hash_value(t: &ExampleTuple) -> u64 {
    let mut h = Fnv::new();
    h.write_u64(t.len() as u64);
    for v in t.entries() {
        match v {
            Value::Int(n) => {
                h.write_u8(0);
                h.write_u64(*n);
            }
            Value::Grid(g) => {
                h.write_u8(1);
                h.write_u64(g.height() as u64);
                h.write_u64(g.width() as u64);
                for c in g.cells() {
                    h.write_u8(c.code());
                }
            }
        }
    }
    h.finish()
}

/// 64-bit FNV-1a. Deterministic, unlike the std hasher.
pub struct Fnv(u64);

impl Fnv {
    pub fn new() -> Self {
        Fnv(0xcbf29ce484222325)
    }

    pub fn write_u8(&mut self, b: u8) {
        self.0 ^= b as u64;
        self.0 = self.0.wrapping_mul(0x100000001b3);
    }

    pub fn write_u64(&mut self, n: u64) {
        for b in n.to_le_bytes() {
            self.write_u8(b);
        }
    }

    pub fn write_bytes(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.write_u8(b);
        }
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

impl Default for Fnv {
    fn default() -> Self {
        Fnv::new()
    }
}

/// One training (or test) example. ARC tasks have a single input value per
/// example; 24-Game tasks have four.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub inputs: Vec<Value>,
    /// `None` only for withheld test outputs.
    pub output: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    pub train: Vec<Example>,
    pub test: Vec<Example>,
}

impl Task {
    pub fn validate(&self) -> Result<(), DomainError> {
        if self.train.is_empty() {
            return Err(DomainError::OutOfDomain("task has no training examples".into()));
        }
        let n_inputs = self.train[0].inputs.len();
        if n_inputs == 0 {
            return Err(DomainError::OutOfDomain("example has no inputs".into()));
        }
        let in_kind = self.train[0].inputs[0].kind();
        let out_kind = self
            .train[0]
            .output
            .as_ref()
            .ok_or_else(|| DomainError::OutOfDomain("train output missing".into()))?
            .kind();
        for ex in self.train.iter().chain(self.test.iter()) {
            if ex.inputs.len() != n_inputs {
                return Err(DomainError::ArityMismatch {
                    expected: n_inputs,
                    got: ex.inputs.len(),
                });
            }
            if ex.inputs.iter().any(|v| v.kind() != in_kind) {
                return Err(DomainError::OutOfDomain("mixed input kinds".into()));
            }
            if let Some(out) = &ex.output {
                if out.kind() != out_kind {
                    return Err(DomainError::OutOfDomain("mixed output kinds".into()));
                }
            }
        }
        if self.train.iter().any(|ex| ex.output.is_none()) {
            return Err(DomainError::OutOfDomain("train output missing".into()));
        }
        Ok(())
    }

    pub fn num_inputs(&self) -> usize {
        self.train[0].inputs.len()
    }

    pub fn num_train(&self) -> usize {
        self.train.len()
    }

    /// Tuple for input position `i` across the training examples.
    pub fn input_tuple(&self, i: usize) -> ExampleTuple {
        ExampleTuple::new(self.train.iter().map(|ex| ex.inputs[i].clone()).collect())
            .expect("validated task")
    }

    /// Tuple of training outputs.
    pub fn output_tuple(&self) -> ExampleTuple {
        ExampleTuple::new(
            self.train
                .iter()
                .map(|ex| ex.output.clone().expect("validated task"))
                .collect(),
        )
        .expect("validated task")
    }
}
