//! Expression trees over DSL functions and input references, extracted from
//! a solved search graph.

use crate::ops::Registry;
use crate::values::{DomainError, Task, Value};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Program {
    /// Reference to the i-th task input.
    Input(usize),
    Apply { func: usize, args: Vec<Program> },
}

impl Program {
    /// Number of function applications (shared subterms counted per use).
    pub fn size(&self) -> usize {
        match self {
            Program::Input(_) => 0,
            Program::Apply { args, .. } => 1 + args.iter().map(Program::size).sum::<usize>(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Program::Input(_) => 0,
            Program::Apply { args, .. } => {
                1 + args.iter().map(Program::depth).max().unwrap_or(0)
            }
        }
    }

    pub fn eval(&self, registry: &Registry, inputs: &[Value]) -> Result<Value, DomainError> {
        match self {
            Program::Input(i) => inputs
                .get(*i)
                .cloned()
                .ok_or_else(|| DomainError::OutOfDomain(format!("no input ${i}"))),
            Program::Apply { func, args } => {
                let vals: Vec<Value> = args
                    .iter()
                    .map(|a| a.eval(registry, inputs))
                    .collect::<Result<_, _>>()?;
                let refs: Vec<&Value> = vals.iter().collect();
                (registry.func(*func).forward)(&refs)
            }
        }
    }

    /// S-expression rendering, e.g. `(hstack (flip_h $0) $0)`.
    pub fn pretty(&self, registry: &Registry) -> String {
        match self {
            Program::Input(i) => format!("${i}"),
            Program::Apply { func, args } => {
                let mut s = format!("({}", registry.func(*func).name);
                for a in args {
                    s.push(' ');
                    s.push_str(&a.pretty(registry));
                }
                s.push(')');
                s
            }
        }
    }
}

/// True iff the program reproduces the outputs of every training example and
/// every test example whose output is available. Evaluation failure on any
/// example counts as a miss, not an error.
pub fn check_solution(program: &Program, task: &Task, registry: &Registry) -> bool {
    task.train.iter().chain(task.test.iter()).all(|ex| match &ex.output {
        Some(expected) => program.eval(registry, &ex.inputs).as_ref() == Ok(expected),
        None => true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::Domain;
    use crate::values::Example;

    #[test]
    fn identity_program() {
        let reg = Domain::Arith24.registry();
        let p = Program::Input(0);
        assert_eq!(p.eval(&reg, &[Value::Int(5)]).unwrap(), Value::Int(5));
        assert_eq!(p.size(), 0);
        assert_eq!(p.pretty(&reg), "$0");
    }

    #[test]
    fn arith_expression() {
        let reg = Domain::Arith24.registry();
        let sub = reg.func_index("sub").unwrap();
        let mul = reg.func_index("mul").unwrap();
        // (2 - 1) * 3 * 8 = 24
        let p = Program::Apply {
            func: mul,
            args: vec![
                Program::Apply {
                    func: mul,
                    args: vec![
                        Program::Apply {
                            func: sub,
                            args: vec![Program::Input(3), Program::Input(1)],
                        },
                        Program::Input(2),
                    ],
                },
                Program::Input(0),
            ],
        };
        let inputs = [Value::Int(8), Value::Int(1), Value::Int(3), Value::Int(2)];
        assert_eq!(p.eval(&reg, &inputs).unwrap(), Value::Int(24));
        assert_eq!(p.size(), 3);
        assert_eq!(p.pretty(&reg), "(mul (mul (sub $3 $1) $2) $0)");
    }

    #[test]
    fn check_solution_on_non_identity_task() {
        let reg = Domain::Arith24.registry();
        let task = Task {
            id: "t".into(),
            train: vec![Example {
                inputs: vec![Value::Int(1), Value::Int(2)],
                output: Some(Value::Int(3)),
            }],
            test: vec![],
        };
        assert!(!check_solution(&Program::Input(0), &task, &reg));
        let add = reg.func_index("add").unwrap();
        let p = Program::Apply { func: add, args: vec![Program::Input(0), Program::Input(1)] };
        assert!(check_solution(&p, &task, &reg));
    }
}
