//! Double-and-add DSL: reach a target from the constant 2 via `add_one` and
//! `double`. Both operations are directly invertible, which is what makes
//! the puzzle easy top-down (parity decides the step).

use crate::ops::{FunctionDef, Registry};
use crate::values::{DomainError, Value, ValueKind};
use serde::{Deserialize, Serialize};

pub const START_VALUE: u64 = 2;
pub const MAX_VALUE: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DoubleAddConfig {
    pub start_value: u64,
    pub max_value: u64,
}

impl Default for DoubleAddConfig {
    fn default() -> Self {
        DoubleAddConfig { start_value: START_VALUE, max_value: MAX_VALUE }
    }
}

pub fn add_one(n: u64) -> Result<Value, DomainError> {
    if n + 1 > MAX_VALUE {
        return Err(DomainError::OutOfDomain(format!("{n} + 1 exceeds max")));
    }
    Ok(Value::Int(n + 1))
}

pub fn double(n: u64) -> Result<Value, DomainError> {
    if 2 * n > MAX_VALUE {
        return Err(DomainError::OutOfDomain(format!("2 * {n} exceeds max")));
    }
    Ok(Value::Int(2 * n))
}

pub fn add_one_inverse(n: u64) -> Result<Value, DomainError> {
    if n == 0 {
        return Err(DomainError::NoPreimage("0 has no predecessor".into()));
    }
    Ok(Value::Int(n - 1))
}

pub fn double_inverse(n: u64) -> Result<Value, DomainError> {
    if n % 2 != 0 {
        return Err(DomainError::NoPreimage(format!("{n} is odd")));
    }
    Ok(Value::Int(n / 2))
}

pub fn registry() -> Registry {
    Registry::new(vec![
        FunctionDef {
            name: "add_one",
            arg_kinds: vec![ValueKind::Int],
            out_kind: ValueKind::Int,
            forward: |args| add_one(args[0].as_int()?),
            inverse: Some(|out| Ok(vec![add_one_inverse(out.as_int()?)?])),
            cond_inverses: vec![],
        },
        FunctionDef {
            name: "double",
            arg_kinds: vec![ValueKind::Int],
            out_kind: ValueKind::Int,
            forward: |args| double(args[0].as_int()?),
            inverse: Some(|out| Ok(vec![double_inverse(out.as_int()?)?])),
            cond_inverses: vec![],
        },
    ])
}

/// Test oracle: the backward greedy chain (halve if even, subtract one if
/// odd) from `n` down to 2. Returns the number of operations, which bounds
/// the minimal program size. Not used by the engine itself.
pub fn greedy_backward_steps(n: u64) -> u64 {
    assert!(n >= 2);
    let mut n = n;
    let mut steps = 0;
    while n > 2 {
        n = if n % 2 == 0 { n / 2 } else { n - 1 };
        steps += 1;
    }
    steps
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_examples() {
        // 7 = add_one(double(add_one(2)))
        assert_eq!(add_one(2).unwrap(), Value::Int(3));
        assert_eq!(double(3).unwrap(), Value::Int(6));
        assert_eq!(add_one(6).unwrap(), Value::Int(7));
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(add_one_inverse(1).unwrap(), Value::Int(0));
        assert!(double_inverse(7).is_err());
        assert_eq!(double_inverse(6).unwrap(), Value::Int(3));
        assert!(add_one_inverse(0).is_err());
    }

    #[test]
    fn greedy_chain_from_seven() {
        // 7 -> 6 -> 3 -> 2
        assert_eq!(greedy_backward_steps(7), 3);
        assert_eq!(greedy_backward_steps(2), 0);
        assert_eq!(greedy_backward_steps(3), 1);
    }

    #[test]
    fn greedy_terminates_within_two_log() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let n = rng.random_range(2..=MAX_VALUE);
            let steps = greedy_backward_steps(n);
            let bound = 2 * (64 - n.leading_zeros() as u64);
            assert!(steps <= bound, "n={n} steps={steps} bound={bound}");
        }
    }

    #[test]
    fn roundtrips() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10_000 {
            let n = rng.random_range(0..MAX_VALUE / 2);
            assert_eq!(add_one_inverse(n + 1).unwrap(), Value::Int(n));
            assert_eq!(double_inverse(2 * n).unwrap(), Value::Int(n));
        }
    }
}
