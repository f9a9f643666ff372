//! Action-selection policies over the environment's observation/mask
//! interface: uniform random, scripted replay, and a learned neural policy.

pub mod neural;

pub use neural::NeuralPolicy;

use crate::env::{Action, ActionMask, Observation};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::VecDeque;

pub trait Policy {
    /// Choose a structurally valid action, or None if nothing is allowed
    /// (or, for scripted policies, the script is exhausted).
    fn select_action(
        &mut self,
        obs: &Observation,
        mask: &ActionMask,
        rng: &mut ChaCha8Rng,
    ) -> Option<Action>;

    fn name(&self) -> &'static str;
}

/// Uniform over allowed variants, then uniform per argument slot.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomPolicy;

impl Policy for RandomPolicy {
    fn select_action(
        &mut self,
        _obs: &Observation,
        mask: &ActionMask,
        rng: &mut ChaCha8Rng,
    ) -> Option<Action> {
        let allowed: Vec<usize> = mask
            .variants
            .iter()
            .enumerate()
            .filter(|(_, v)| v.allowed)
            .map(|(i, _)| i)
            .collect();
        if allowed.is_empty() {
            return None;
        }
        let variant = allowed[rng.random_range(0..allowed.len())];
        let mut arg_node_ids = Vec::new();
        for slot in &mask.variants[variant].slots {
            let candidates: Vec<usize> = slot
                .iter()
                .enumerate()
                .filter(|(_, &ok)| ok)
                .map(|(n, _)| n)
                .collect();
            arg_node_ids.push(candidates[rng.random_range(0..candidates.len())]);
        }
        Some(Action { variant, arg_node_ids })
    }

    fn name(&self) -> &'static str {
        "random"
    }
}

/// Replays a fixed action sequence (e.g. from a generated trace). Returns
/// None once exhausted or if the next scripted action is not permitted.
#[derive(Debug, Clone)]
pub struct ScriptedPolicy {
    actions: VecDeque<Action>,
}

impl ScriptedPolicy {
    pub fn new(actions: Vec<Action>) -> Self {
        ScriptedPolicy { actions: actions.into() }
    }

    pub fn remaining(&self) -> usize {
        self.actions.len()
    }
}

impl Policy for ScriptedPolicy {
    fn select_action(
        &mut self,
        _obs: &Observation,
        mask: &ActionMask,
        _rng: &mut ChaCha8Rng,
    ) -> Option<Action> {
        let action = self.actions.pop_front()?;
        if mask.permits(&action) {
            Some(action)
        } else {
            None
        }
    }

    fn name(&self) -> &'static str {
        "oracle"
    }
}

impl Policy for NeuralPolicy {
    fn select_action(
        &mut self,
        obs: &Observation,
        mask: &ActionMask,
        rng: &mut ChaCha8Rng,
    ) -> Option<Action> {
        self.sample(obs, mask, rng).map(|(a, _)| a)
    }

    fn name(&self) -> &'static str {
        "neural"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::Domain;
    use crate::env::{EnvConfig, SynthEnv};
    use crate::values::{Example, Task, Value};
    use rand::SeedableRng;

    fn small_task() -> Task {
        Task {
            id: "t".into(),
            train: vec![Example {
                inputs: vec![Value::Int(2), Value::Int(3)],
                output: Some(Value::Int(6)),
            }],
            test: vec![],
        }
    }

    #[test]
    fn random_policy_respects_mask() {
        let mut env = SynthEnv::new(small_task(), EnvConfig::new(Domain::Arith24)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut policy = RandomPolicy;
        let obs = env.reset();
        let mask = env.valid_action_mask();
        for _ in 0..200 {
            let a = policy.select_action(&obs, &mask, &mut rng).unwrap();
            assert!(mask.permits(&a));
        }
    }

    #[test]
    fn random_policy_eventually_solves_simple_task() {
        let mut solved = 0;
        for seed in 0..20 {
            let mut env = SynthEnv::new(small_task(), EnvConfig::new(Domain::Arith24)).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut policy = RandomPolicy;
            let mut obs = env.reset();
            while !env.done() {
                let mask = env.valid_action_mask();
                let Some(a) = policy.select_action(&obs, &mask, &mut rng) else { break };
                let (next, _, _, _) = env.step(&a);
                obs = next;
            }
            if env.solution().is_some() {
                solved += 1;
            }
        }
        assert!(solved > 10, "solved only {solved}/20");
    }

    #[test]
    fn scripted_policy_replays_in_order() {
        let mut env = SynthEnv::new(small_task(), EnvConfig::new(Domain::Arith24)).unwrap();
        let obs = env.reset();
        let mask = env.valid_action_mask();
        let mul = env.registry().func_index("mul").unwrap();
        let good = Action { variant: mul, arg_node_ids: vec![0, 1] };
        let mut policy = ScriptedPolicy::new(vec![good.clone()]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(policy.select_action(&obs, &mask, &mut rng), Some(good));
        assert_eq!(policy.select_action(&obs, &mask, &mut rng), None);
    }

    #[test]
    fn scripted_policy_rejects_illegal_step() {
        let mut env = SynthEnv::new(small_task(), EnvConfig::new(Domain::Arith24)).unwrap();
        let obs = env.reset();
        let mask = env.valid_action_mask();
        // node 2 is the ungrounded output: not a legal forward argument
        let mut policy = ScriptedPolicy::new(vec![Action { variant: 0, arg_node_ids: vec![2, 0] }]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(policy.select_action(&obs, &mask, &mut rng), None);
    }
}
