//! Bidirectional, execution-guided program synthesis.
//!
//! The engine grows a search graph forwards from grounded input values and
//! backwards from the target output via function inverse semantics. A policy
//! (random, scripted, or learned) picks which operation to apply next. Three
//! DSLs are bundled: ARC-style grid symmetry operations, 24-Game arithmetic,
//! and a double-and-add puzzle.

pub mod dsl;
pub mod env;
pub mod graph;
pub mod harness;
pub mod nn;
pub mod ops;
pub mod par;
pub mod policy;
pub mod program;
pub mod tracegen;
pub mod trainer;
pub mod values;

pub use env::{Action, EnvConfig, Observation, StepOutcome, SynthEnv};
pub use graph::SearchGraph;
pub use ops::{Direction, FunctionDef, OperationVariant, Registry};
pub use program::Program;
pub use values::{Color, DomainError, ExampleTuple, Grid, Task, Value};
