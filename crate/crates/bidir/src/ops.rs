//! DSL function machinery: forward, inverse, and conditional-inverse
//! semantics, applied entry-wise across example tuples.

use crate::values::{DomainError, ExampleTuple, Value, ValueKind};

/// Forward semantics: one output from `arity` inputs. Partial.
pub type ForwardFn = fn(&[&Value]) -> Result<Value, DomainError>;

/// Direct inverse: from the output, one value per argument position. Partial.
pub type InverseFn = fn(&Value) -> Result<Vec<Value>, DomainError>;

/// Conditional inverse: from the output plus the known arguments (position,
/// value), the values of the unknown positions in ascending position order.
pub type DeduceFn = fn(&Value, &[(usize, &Value)]) -> Result<Vec<Value>, DomainError>;

#[derive(Debug, Clone)]
pub struct CondInverse {
    pub known_positions: Vec<usize>,
    pub deduce: DeduceFn,
}

/// A DSL function: forward semantics plus optional inverse semantics.
#[derive(Debug, Clone)]
pub struct FunctionDef {
    pub name: &'static str,
    pub arg_kinds: Vec<ValueKind>,
    pub out_kind: ValueKind,
    pub forward: ForwardFn,
    pub inverse: Option<InverseFn>,
    pub cond_inverses: Vec<CondInverse>,
}

impl FunctionDef {
    pub fn arity(&self) -> usize {
        self.arg_kinds.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Inverse,
    /// Index into the function's `cond_inverses` table.
    CondInverse(usize),
}

/// A function together with an application direction (and, for conditional
/// inverses, which argument positions are known).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OperationVariant {
    pub func: usize,
    pub direction: Direction,
}

/// What one argument slot of a variant requires, used for masking.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotSpec {
    pub kind: ValueKind,
    pub needs_grounded: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Registry {
    functions: Vec<FunctionDef>,
}

impl Registry {
    pub fn new(functions: Vec<FunctionDef>) -> Self {
        for f in &functions {
            for ci in &f.cond_inverses {
                assert!(
                    ci.known_positions.iter().all(|&p| p < f.arity()),
                    "{}: cond-inverse known position out of range",
                    f.name
                );
            }
        }
        Registry { functions }
    }

    pub fn functions(&self) -> &[FunctionDef] {
        &self.functions
    }

    pub fn func(&self, idx: usize) -> &FunctionDef {
        &self.functions[idx]
    }

    pub fn func_index(&self, name: &str) -> Option<usize> {
        self.functions.iter().position(|f| f.name == name)
    }

    /// All operation variants in a deterministic order: every forward
    /// variant first, then direct inverses, then conditional inverses.
    pub fn enumerate_operations(&self, forward_only: bool) -> Vec<OperationVariant> {
        let mut out = Vec::new();
        for (i, _) in self.functions.iter().enumerate() {
            out.push(OperationVariant { func: i, direction: Direction::Forward });
        }
        if forward_only {
            return out;
        }
        for (i, f) in self.functions.iter().enumerate() {
            if f.inverse.is_some() {
                out.push(OperationVariant { func: i, direction: Direction::Inverse });
            }
        }
        for (i, f) in self.functions.iter().enumerate() {
            for (c, _) in f.cond_inverses.iter().enumerate() {
                out.push(OperationVariant { func: i, direction: Direction::CondInverse(c) });
            }
        }
        out
    }

    /// Argument slot requirements for a variant. Backward variants take the
    /// (ungrounded) output node first, then any known arguments.
    pub fn slots(&self, v: OperationVariant) -> Vec<SlotSpec> {
        let f = self.func(v.func);
        match v.direction {
            Direction::Forward => f
                .arg_kinds
                .iter()
                .map(|&kind| SlotSpec { kind, needs_grounded: true })
                .collect(),
            Direction::Inverse => {
                vec![SlotSpec { kind: f.out_kind, needs_grounded: false }]
            }
            Direction::CondInverse(c) => {
                let ci = &f.cond_inverses[c];
                let mut slots = vec![SlotSpec { kind: f.out_kind, needs_grounded: false }];
                for &p in &ci.known_positions {
                    slots.push(SlotSpec { kind: f.arg_kinds[p], needs_grounded: true });
                }
                slots
            }
        }
    }

    pub fn variant_name(&self, v: OperationVariant) -> String {
        let f = self.func(v.func);
        match v.direction {
            Direction::Forward => f.name.to_string(),
            Direction::Inverse => format!("{}^-1", f.name),
            Direction::CondInverse(c) => {
                let ps: Vec<String> = f.cond_inverses[c]
                    .known_positions
                    .iter()
                    .map(|p| p.to_string())
                    .collect();
                format!("{}^-1|{}", f.name, ps.join(","))
            }
        }
    }
}

fn check_tuple_kinds(
    expected: ValueKind,
    tuple: &ExampleTuple,
) -> Result<(), DomainError> {
    if tuple.kind() != expected {
        return Err(DomainError::KindMismatch { expected, got: tuple.kind() });
    }
    Ok(())
}

/// Entry-wise forward application. Fails atomically: an error on any example
/// leaves no partial result.
pub fn apply_forward(
    f: &FunctionDef,
    args: &[&ExampleTuple],
) -> Result<ExampleTuple, DomainError> {
    if args.len() != f.arity() {
        return Err(DomainError::ArityMismatch { expected: f.arity(), got: args.len() });
    }
    let k = args[0].len();
    for (arg, &kind) in args.iter().zip(&f.arg_kinds) {
        check_tuple_kinds(kind, arg)?;
        if arg.len() != k {
            return Err(DomainError::ArityMismatch { expected: k, got: arg.len() });
        }
    }
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let entry_args: Vec<&Value> = args.iter().map(|t| t.get(i)).collect();
        out.push((f.forward)(&entry_args)?);
    }
    ExampleTuple::new(out)
}

/// Entry-wise direct inverse: one tuple per argument position, such that
/// `apply_forward(f, result) == out`.
pub fn apply_inverse(
    f: &FunctionDef,
    out: &ExampleTuple,
) -> Result<Vec<ExampleTuple>, DomainError> {
    let inv = f
        .inverse
        .ok_or_else(|| DomainError::OutOfDomain(format!("{} has no inverse", f.name)))?;
    check_tuple_kinds(f.out_kind, out)?;
    let k = out.len();
    let mut per_arg: Vec<Vec<Value>> = vec![Vec::with_capacity(k); f.arity()];
    for i in 0..k {
        let vals = inv(out.get(i))?;
        if vals.len() != f.arity() {
            return Err(DomainError::ArityMismatch { expected: f.arity(), got: vals.len() });
        }
        for (slot, v) in per_arg.iter_mut().zip(vals) {
            slot.push(v);
        }
    }
    per_arg.into_iter().map(ExampleTuple::new).collect()
}

/// Entry-wise conditional inverse: tuples for the unknown positions (in
/// ascending position order) such that recomposition reproduces `out`.
pub fn apply_cond_inverse(
    f: &FunctionDef,
    cond_index: usize,
    out: &ExampleTuple,
    known: &[(usize, &ExampleTuple)],
) -> Result<Vec<ExampleTuple>, DomainError> {
    let ci = f
        .cond_inverses
        .get(cond_index)
        .ok_or_else(|| DomainError::OutOfDomain(format!("{}: no such cond-inverse", f.name)))?;
    let positions: Vec<usize> = known.iter().map(|&(p, _)| p).collect();
    if positions != ci.known_positions {
        return Err(DomainError::OutOfDomain(format!(
            "{}: known positions {:?} do not match registered {:?}",
            f.name, positions, ci.known_positions
        )));
    }
    check_tuple_kinds(f.out_kind, out)?;
    let k = out.len();
    for &(p, t) in known {
        check_tuple_kinds(f.arg_kinds[p], t)?;
        if t.len() != k {
            return Err(DomainError::ArityMismatch { expected: k, got: t.len() });
        }
    }
    let n_unknown = f.arity() - known.len();
    let mut per_arg: Vec<Vec<Value>> = vec![Vec::with_capacity(k); n_unknown];
    for i in 0..k {
        let entry_known: Vec<(usize, &Value)> =
            known.iter().map(|&(p, t)| (p, t.get(i))).collect();
        let vals = (ci.deduce)(out.get(i), &entry_known)?;
        if vals.len() != n_unknown {
            return Err(DomainError::ArityMismatch { expected: n_unknown, got: vals.len() });
        }
        for (slot, v) in per_arg.iter_mut().zip(vals) {
            slot.push(v);
        }
    }
    per_arg.into_iter().map(ExampleTuple::new).collect()
}

/// Positions of a cond-inverse variant's unknown arguments, ascending.
pub fn unknown_positions(f: &FunctionDef, cond_index: usize) -> Vec<usize> {
    (0..f.arity())
        .filter(|p| !f.cond_inverses[cond_index].known_positions.contains(p))
        .collect()
}
