//! 24-Game arithmetic DSL: +, -, *, / over non-negative integers with a
//! value ceiling of 100 and exact (integer) semantics. Each operator
//! registers conditional inverses for both known-argument positions.

use crate::ops::{CondInverse, FunctionDef, Registry};
use crate::values::{DomainError, Value, ValueKind};
use serde::{Deserialize, Serialize};

/// Value constraints for the 24-Game domain. Negative and non-integral
/// values never exist by construction (`u64` + exact division).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArithConstraints {
    pub max_value: u64,
}

impl Default for ArithConstraints {
    fn default() -> Self {
        ArithConstraints { max_value: MAX_VALUE }
    }
}

/// The default ceiling; the registry semantics are fixed to it.
pub const MAX_VALUE: u64 = 100;

fn bounded(n: u64) -> Result<Value, DomainError> {
    if n > MAX_VALUE {
        return Err(DomainError::OutOfDomain(format!("{n} exceeds max {MAX_VALUE}")));
    }
    Ok(Value::Int(n))
}

pub fn add(a: u64, b: u64) -> Result<Value, DomainError> {
    bounded(a + b)
}

pub fn sub(a: u64, b: u64) -> Result<Value, DomainError> {
    if b > a {
        return Err(DomainError::OutOfDomain(format!("{a} - {b} is negative")));
    }
    bounded(a - b)
}

pub fn mul(a: u64, b: u64) -> Result<Value, DomainError> {
    bounded(a * b)
}

pub fn div(a: u64, b: u64) -> Result<Value, DomainError> {
    if b == 0 {
        return Err(DomainError::OutOfDomain("division by zero".into()));
    }
    if a % b != 0 {
        return Err(DomainError::OutOfDomain(format!("{a} / {b} is not integral")));
    }
    bounded(a / b)
}

/// Deduce the unknown operand of `op(a, b) = out` given the other.
/// `known_position` 0 means `a` is known. Errors when no in-domain operand
/// exists or the deduction is not unique (e.g. `0 * x = 0`).
pub fn cond_inverse(op: char, out: u64, known: u64, known_position: usize) -> Result<Value, DomainError> {
    let v = match (op, known_position) {
        ('+', _) => {
            if known > out {
                return Err(DomainError::NoPreimage(format!("{known} + x = {out}")));
            }
            out - known
        }
        ('-', 0) => {
            // known - x = out
            if out > known {
                return Err(DomainError::NoPreimage(format!("{known} - x = {out}")));
            }
            known - out
        }
        ('-', 1) => out.checked_add(known).ok_or_else(|| {
            DomainError::OutOfDomain("overflow".into())
        })?, // x - known = out
        ('*', _) => {
            if known == 0 {
                return Err(DomainError::NoPreimage(format!("0 * x = {out} is not unique")));
            }
            if out % known != 0 {
                return Err(DomainError::NoPreimage(format!("{known} does not divide {out}")));
            }
            out / known
        }
        ('/', 0) => {
            // known / x = out
            if out == 0 || known % out != 0 || known / out == 0 {
                return Err(DomainError::NoPreimage(format!("{known} / x = {out}")));
            }
            known / out
        }
        ('/', 1) => {
            // x / known = out
            if known == 0 {
                return Err(DomainError::NoPreimage("x / 0".into()));
            }
            out.checked_mul(known)
                .ok_or_else(|| DomainError::OutOfDomain("overflow".into()))?
        }
        (op, p) => {
            return Err(DomainError::OutOfDomain(format!("no cond-inverse for {op} at {p}")))
        }
    };
    bounded(v)
}

macro_rules! arith_fn {
    ($name:literal, $f:ident, $op:literal) => {
        FunctionDef {
            name: $name,
            arg_kinds: vec![ValueKind::Int, ValueKind::Int],
            out_kind: ValueKind::Int,
            forward: |args: &[&Value]| $f(args[0].as_int()?, args[1].as_int()?),
            inverse: None,
            cond_inverses: vec![
                CondInverse {
                    known_positions: vec![0],
                    deduce: |out, known| {
                        Ok(vec![cond_inverse($op, out.as_int()?, known[0].1.as_int()?, 0)?])
                    },
                },
                CondInverse {
                    known_positions: vec![1],
                    deduce: |out, known| {
                        Ok(vec![cond_inverse($op, out.as_int()?, known[0].1.as_int()?, 1)?])
                    },
                },
            ],
        }
    };
}

pub fn registry() -> Registry {
    Registry::new(vec![
        arith_fn!("add", add, '+'),
        arith_fn!("sub", sub, '-'),
        arith_fn!("mul", mul, '*'),
        arith_fn!("div", div, '/'),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops;
    use crate::values::ExampleTuple;

    fn tup(ns: &[u64]) -> ExampleTuple {
        ExampleTuple::new(ns.iter().map(|&n| Value::Int(n)).collect()).unwrap()
    }

    #[test]
    fn forward_examples() {
        assert_eq!(sub(2, 1).unwrap(), Value::Int(1));
        assert_eq!(mul(1, 3).unwrap(), Value::Int(3));
        assert_eq!(mul(3, 8).unwrap(), Value::Int(24));
        assert!(div(7, 2).is_err());
        assert!(mul(20, 6).is_err());
        assert!(sub(1, 2).is_err());
        assert!(div(1, 0).is_err());
    }

    #[test]
    fn cond_inverse_examples() {
        assert_eq!(cond_inverse('+', 5, 1, 0).unwrap(), Value::Int(4));
        assert_eq!(cond_inverse('-', 1, 2, 0).unwrap(), Value::Int(1));
        assert!(cond_inverse('*', 24, 5, 0).is_err());
        assert!(cond_inverse('*', 0, 0, 0).is_err());
        assert!(cond_inverse('/', 0, 0, 0).is_err());
    }

    #[test]
    fn entry_wise_application() {
        let reg = registry();
        let add = reg.func(reg.func_index("add").unwrap());
        let out = ops::apply_forward(add, &[&tup(&[1, 4]), &tup(&[1, 2])]).unwrap();
        assert_eq!(out, tup(&[2, 6]));
    }

    #[test]
    fn variant_counts() {
        let reg = registry();
        assert_eq!(reg.enumerate_operations(true).len(), 4);
        assert_eq!(reg.enumerate_operations(false).len(), 12);
    }

    #[test]
    fn closure_from_digits_stays_bounded() {
        // Exhaustive closure to depth 3 from inputs 1..=9 stays in [0, 100].
        let mut vals: std::collections::BTreeSet<u64> = (1..=9).collect();
        for _ in 0..3 {
            let snapshot: Vec<u64> = vals.iter().copied().collect();
            for &a in &snapshot {
                for &b in &snapshot {
                    for f in [add, sub, mul, div] {
                        if let Ok(Value::Int(n)) = f(a, b) {
                            assert!(n <= 100);
                            vals.insert(n);
                        }
                    }
                }
            }
        }
        assert!(vals.contains(&24));
        assert!(vals.contains(&0));
    }
}
