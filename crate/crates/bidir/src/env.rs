//! The MDP wrapper around the search graph: observations, the flat action
//! space, reward accounting, episode control, and the forward-only ablation.

use crate::dsl::Domain;
use crate::graph::{ActionError, NodeId, SearchGraph};
use crate::ops::{OperationVariant, Registry};
use crate::program::Program;
use crate::values::{DomainError, ExampleTuple, Task};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub domain: Domain,
    /// Reward for solving the task.
    pub reward: f64,
    pub invalid_penalty: f64,
    pub step_penalty: f64,
    pub max_steps: usize,
    pub forward_only: bool,
    /// When set, an input node may appear as a forward argument only once
    /// across the episode (24-Game fidelity mode; off by default).
    pub strict_input_use: bool,
    /// Discount for returns; episodes are short, so 1 by default.
    pub gamma: f64,
}

impl EnvConfig {
    pub fn new(domain: Domain) -> Self {
        EnvConfig {
            domain,
            reward: 10.0,
            invalid_penalty: -1.0,
            step_penalty: 0.0,
            max_steps: 15,
            forward_only: false,
            strict_input_use: false,
            gamma: 1.0,
        }
    }
}

/// An action: one operation variant plus its argument nodes, ordered as the
/// variant requires (output node first for backward variants, then known
/// arguments).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action {
    pub variant: usize,
    pub arg_node_ids: Vec<NodeId>,
}

#[derive(Debug, Clone)]
pub struct NodeRecord {
    pub value: ExampleTuple,
    pub grounded: bool,
    pub is_input: bool,
    pub is_output: bool,
    /// Execution-guided lookahead, one flag per registry function: this
    /// grounded node is an argument of a single forward application of that
    /// function whose result equals the target output.
    pub one_step: Vec<bool>,
}

/// What the policy sees. Node order is creation order and stable within an
/// episode.
#[derive(Debug, Clone)]
pub struct Observation {
    pub nodes: Vec<NodeRecord>,
    pub variants: Arc<Vec<OperationVariant>>,
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    Valid,
    Invalid(ActionError),
    Solved,
}

#[derive(Debug, Clone)]
pub struct StepInfo {
    pub outcome: StepOutcome,
    pub program: Option<Program>,
}

/// Structural legality pre-filter: per variant, per argument slot, which
/// nodes satisfy kind and groundedness. Semantic domain errors can still
/// surface at step time.
#[derive(Debug, Clone)]
pub struct ActionMask {
    pub variants: Vec<VariantMask>,
}

#[derive(Debug, Clone)]
pub struct VariantMask {
    pub allowed: bool,
    /// slots[s][n] == true iff node n is a structurally valid filler.
    pub slots: Vec<Vec<bool>>,
}

impl ActionMask {
    pub fn num_allowed_variants(&self) -> usize {
        self.variants.iter().filter(|v| v.allowed).count()
    }

    pub fn permits(&self, action: &Action) -> bool {
        let Some(v) = self.variants.get(action.variant) else { return false };
        v.allowed
            && action.arg_node_ids.len() == v.slots.len()
            && action
                .arg_node_ids
                .iter()
                .zip(&v.slots)
                .all(|(&n, slot)| slot.get(n).copied().unwrap_or(false))
    }
}

#[derive(Debug, Clone)]
pub struct SynthEnv {
    config: EnvConfig,
    registry: Arc<Registry>,
    variants: Arc<Vec<OperationVariant>>,
    task: Task,
    graph: SearchGraph,
    step: usize,
    done: bool,
    invalid_actions: usize,
    solution: Option<Program>,
}

impl SynthEnv {
    /// Build an environment and reset it. If the task is solved at init
    /// (output equals an input) the episode is immediately done; the caller
    /// sees that through `done()` and `solution()`.
    pub fn new(task: Task, config: EnvConfig) -> Result<Self, DomainError> {
        let registry = Arc::new(config.domain.registry());
        let variants = Arc::new(registry.enumerate_operations(config.forward_only));
        let graph = SearchGraph::init(&task, registry.clone())?;
        let solved = graph.solved();
        let solution = if solved { graph.extract_program() } else { None };
        Ok(SynthEnv {
            config,
            registry,
            variants,
            task,
            graph,
            step: 0,
            done: solved,
            invalid_actions: 0,
            solution,
        })
    }

    pub fn reset(&mut self) -> Observation {
        self.graph = SearchGraph::init(&self.task, self.registry.clone())
            .expect("task validated at construction");
        self.step = 0;
        self.invalid_actions = 0;
        self.done = self.graph.solved();
        self.solution = if self.done { self.graph.extract_program() } else { None };
        self.observe()
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn task(&self) -> &Task {
        &self.task
    }

    pub fn registry(&self) -> &Arc<Registry> {
        &self.registry
    }

    pub fn variants(&self) -> &Arc<Vec<OperationVariant>> {
        &self.variants
    }

    pub fn graph(&self) -> &SearchGraph {
        &self.graph
    }

    pub fn done(&self) -> bool {
        self.done
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    pub fn invalid_actions(&self) -> usize {
        self.invalid_actions
    }

    pub fn solution(&self) -> Option<&Program> {
        self.solution.as_ref()
    }

    pub fn observe(&self) -> Observation {
        let one_step = self.one_step_flags();
        Observation {
            nodes: self
                .graph
                .nodes()
                .iter()
                .zip(one_step)
                .map(|(n, one_step)| NodeRecord {
                    value: n.value.clone(),
                    grounded: n.grounded,
                    is_input: n.is_input(),
                    is_output: n.is_output,
                    one_step,
                })
                .collect(),
            variants: self.variants.clone(),
            step: self.step,
        }
    }

    /// Try every forward application over the grounded nodes and flag the
    /// arguments of those whose result matches an outstanding (ungrounded)
    /// node — the target itself or any subgoal opened by a backward step.
    /// A cheap one-step lookahead the policy can read instead of doing
    /// arithmetic itself.
    fn one_step_flags(&self) -> Vec<Vec<bool>> {
        let nodes = self.graph.nodes();
        let nf = self.registry.functions().len();
        let mut flags = vec![vec![false; nf]; nodes.len()];
        if self.graph.solved() {
            return flags;
        }
        for (fi, f) in self.registry.functions().iter().enumerate() {
            let candidates: Vec<Vec<NodeId>> = f
                .arg_kinds
                .iter()
                .map(|&kind| {
                    nodes
                        .iter()
                        .filter(|n| n.grounded && n.value.kind() == kind)
                        .map(|n| n.id)
                        .collect()
                })
                .collect();
            let mut combo = vec![0usize; f.arity()];
            if candidates.iter().any(|c| c.is_empty()) {
                continue;
            }
            'combos: loop {
                let args: Vec<&crate::values::ExampleTuple> =
                    combo.iter().zip(&candidates).map(|(&i, c)| &nodes[c[i]].value).collect();
                let completes_open_goal = match crate::ops::apply_forward(f, &args) {
                    Ok(result) => self
                        .graph
                        .find_node(&result)
                        .is_some_and(|id| !nodes[id].grounded),
                    Err(_) => false,
                };
                if completes_open_goal {
                    for (&i, c) in combo.iter().zip(&candidates) {
                        flags[c[i]][fi] = true;
                    }
                }
                for s in 0..combo.len() {
                    combo[s] += 1;
                    if combo[s] < candidates[s].len() {
                        continue 'combos;
                    }
                    combo[s] = 0;
                }
                break;
            }
        }
        flags
    }

    pub fn valid_action_mask(&self) -> ActionMask {
        let nodes = self.graph.nodes();
        let variants = self
            .variants
            .iter()
            .map(|&v| {
                let slots: Vec<Vec<bool>> = self
                    .registry
                    .slots(v)
                    .into_iter()
                    .map(|spec| {
                        nodes
                            .iter()
                            .map(|n| {
                                n.value.kind() == spec.kind && n.grounded == spec.needs_grounded
                            })
                            .collect()
                    })
                    .collect();
                let allowed = slots.iter().all(|s| s.iter().any(|&b| b));
                VariantMask { allowed, slots }
            })
            .collect();
        ActionMask { variants }
    }

    fn strict_use_violated(&self, variant: OperationVariant, args: &[NodeId]) -> bool {
        if !self.config.strict_input_use {
            return false;
        }
        if !matches!(variant.direction, crate::ops::Direction::Forward) {
            return false;
        }
        args.iter().any(|&id| {
            self.graph.node(id).is_input()
                && self
                    .graph
                    .edges()
                    .iter()
                    .any(|e| e.arg_node_ids.contains(&id))
        })
    }

    /// Advance one step. Panics if the episode is already done (stepping a
    /// finished episode is a contract violation).
    pub fn step(&mut self, action: &Action) -> (Observation, f64, bool, StepInfo) {
        assert!(!self.done, "step() on a finished episode");
        self.step += 1;
        let reward;
        let info;
        match self.variants.get(action.variant) {
            None => {
                reward = self.config.invalid_penalty;
                self.invalid_actions += 1;
                info = StepInfo {
                    outcome: StepOutcome::Invalid(ActionError::BadNodeId(action.variant)),
                    program: None,
                };
            }
            Some(&variant) => {
                if self.strict_use_violated(variant, &action.arg_node_ids) {
                    reward = self.config.invalid_penalty;
                    self.invalid_actions += 1;
                    info = StepInfo {
                        outcome: StepOutcome::Invalid(ActionError::SlotViolation {
                            slot: 0,
                            reason: "input already consumed (strict mode)".into(),
                        }),
                        program: None,
                    };
                } else {
                    match self.graph.apply_action(variant, &action.arg_node_ids) {
                        Ok(effect) => {
                            if effect.solved_now {
                                reward = self.config.reward;
                                self.done = true;
                                self.solution = self.graph.extract_program();
                                info = StepInfo {
                                    outcome: StepOutcome::Solved,
                                    program: self.solution.clone(),
                                };
                            } else {
                                reward = self.config.step_penalty;
                                info = StepInfo { outcome: StepOutcome::Valid, program: None };
                            }
                        }
                        Err(err) => {
                            reward = self.config.invalid_penalty;
                            self.invalid_actions += 1;
                            info = StepInfo {
                                outcome: StepOutcome::Invalid(err),
                                program: None,
                            };
                        }
                    }
                }
            }
        }
        if !self.done && self.step >= self.config.max_steps {
            self.done = true;
        }
        (self.observe(), reward, self.done, info)
    }
}
