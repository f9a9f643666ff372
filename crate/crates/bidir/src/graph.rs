//! The bidirectional search state: hash-consed value nodes, forward and
//! backward operation edges, grounding propagation, and program extraction.
//!
//! Grounded nodes carry values derivable from the task inputs by forward
//! applications. Ungrounded nodes are deduced targets created backwards from
//! the output: a backward edge records the obligation "grounding all targets
//! grounds this output". Value collision is the connection mechanism — a
//! forward result equal to an ungrounded node's tuple merges into it and
//! triggers grounding propagation.

use crate::ops::{
    apply_cond_inverse, apply_forward, apply_inverse, unknown_positions, Direction,
    OperationVariant, Registry,
};
use crate::program::Program;
use crate::values::{hash_value, DomainError, ExampleTuple, Task};
use std::collections::HashMap;
use std::sync::Arc;
use thiserror::Error;

pub type NodeId = usize;
pub type EdgeId = usize;

#[derive(Debug, Clone)]
pub struct ValueNode {
    pub id: NodeId,
    pub value: ExampleTuple,
    pub grounded: bool,
    /// Task input positions this node's tuple covers (empty for non-inputs;
    /// more than one when input values coincide).
    pub input_positions: Vec<usize>,
    pub is_output: bool,
}

impl ValueNode {
    pub fn is_input(&self) -> bool {
        !self.input_positions.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct OpEdge {
    pub id: EdgeId,
    pub variant: OperationVariant,
    /// Forward: arguments in signature order. Backward: the known arguments
    /// in the order required by the variant (possibly empty).
    pub arg_node_ids: Vec<NodeId>,
    pub out_node_id: NodeId,
    /// Backward edges only: deduced target nodes, one per unknown position
    /// in ascending position order (all positions for a direct inverse).
    pub target_node_ids: Vec<NodeId>,
    /// Backward edges only: true once every target is grounded.
    pub satisfied: bool,
}

impl OpEdge {
    pub fn is_backward(&self) -> bool {
        !matches!(self.variant.direction, Direction::Forward)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ActionError {
    #[error("node id {0} out of range")]
    BadNodeId(NodeId),
    #[error("wrong number of argument slots: expected {expected}, got {got}")]
    WrongSlotCount { expected: usize, got: usize },
    #[error("slot {slot}: {reason}")]
    SlotViolation { slot: usize, reason: String },
    #[error("duplicate edge")]
    DuplicateEdge,
    #[error("semantics: {0}")]
    Domain(#[from] DomainError),
}

/// What a successful action changed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ActionEffect {
    pub edge_id: EdgeId,
    pub created_nodes: Vec<NodeId>,
    pub newly_grounded: Vec<NodeId>,
    pub solved_now: bool,
}

#[derive(Debug, Clone)]
pub struct SearchGraph {
    registry: Arc<Registry>,
    nodes: Vec<ValueNode>,
    edges: Vec<OpEdge>,
    /// Value digest -> node ids with that digest (collisions resolved by
    /// exact comparison).
    interned: HashMap<u64, Vec<NodeId>>,
    /// (variant, slot node ids) of every edge, for duplicate detection.
    edge_keys: HashMap<(OperationVariant, Vec<NodeId>), EdgeId>,
    input_node_ids: Vec<NodeId>,
    output_node_id: NodeId,
    solved: bool,
}

impl SearchGraph {
    /// Build the initial state: one grounded node per distinct input tuple
    /// and the (normally ungrounded) output node.
    pub fn init(task: &Task, registry: Arc<Registry>) -> Result<Self, DomainError> {
        task.validate()?;
        let mut g = SearchGraph {
            registry,
            nodes: Vec::new(),
            edges: Vec::new(),
            interned: HashMap::new(),
            edge_keys: HashMap::new(),
            input_node_ids: Vec::new(),
            output_node_id: 0,
            solved: false,
        };
        for i in 0..task.num_inputs() {
            let tuple = task.input_tuple(i);
            let id = g.intern(tuple, true);
            g.nodes[id].input_positions.push(i);
            g.input_node_ids.push(id);
        }
        let out = task.output_tuple();
        let out_id = g.intern(out, false);
        g.nodes[out_id].is_output = true;
        g.output_node_id = out_id;
        g.solved = g.nodes[out_id].grounded;
        Ok(g)
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn nodes(&self) -> &[ValueNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[OpEdge] {
        &self.edges
    }

    pub fn node(&self, id: NodeId) -> &ValueNode {
        &self.nodes[id]
    }

    pub fn output_node_id(&self) -> NodeId {
        self.output_node_id
    }

    pub fn input_node_ids(&self) -> &[NodeId] {
        &self.input_node_ids
    }

    pub fn solved(&self) -> bool {
        self.solved
    }

    pub fn find_node(&self, tuple: &ExampleTuple) -> Option<NodeId> {
        let h = hash_value(tuple);
        self.interned
            .get(&h)?
            .iter()
            .copied()
            .find(|&id| &self.nodes[id].value == tuple)
    }

    /// Get or create the node holding `tuple`. A fresh node starts with the
    /// given groundedness; an existing node keeps its own.
    fn intern(&mut self, tuple: ExampleTuple, grounded: bool) -> NodeId {
        let h = hash_value(&tuple);
        if let Some(ids) = self.interned.get(&h) {
            if let Some(&id) = ids.iter().find(|&&id| self.nodes[id].value == tuple) {
                return id;
            }
        }
        let id = self.nodes.len();
        self.nodes.push(ValueNode {
            id,
            value: tuple,
            grounded,
            input_positions: Vec::new(),
            is_output: false,
        });
        self.interned.entry(h).or_default().push(id);
        id
    }

    fn check_slots(
        &self,
        variant: OperationVariant,
        arg_node_ids: &[NodeId],
    ) -> Result<(), ActionError> {
        let slots = self.registry.slots(variant);
        if arg_node_ids.len() != slots.len() {
            return Err(ActionError::WrongSlotCount {
                expected: slots.len(),
                got: arg_node_ids.len(),
            });
        }
        for (i, (&id, spec)) in arg_node_ids.iter().zip(&slots).enumerate() {
            let node = self.nodes.get(id).ok_or(ActionError::BadNodeId(id))?;
            if node.value.kind() != spec.kind {
                return Err(ActionError::SlotViolation {
                    slot: i,
                    reason: format!("expected {} node", spec.kind),
                });
            }
            if spec.needs_grounded && !node.grounded {
                return Err(ActionError::SlotViolation {
                    slot: i,
                    reason: "requires a grounded node".into(),
                });
            }
            if !spec.needs_grounded && node.grounded {
                return Err(ActionError::SlotViolation {
                    slot: i,
                    reason: "requires an ungrounded node".into(),
                });
            }
        }
        Ok(())
    }

    /// Apply one operation. On error the graph is unchanged.
    pub fn apply_action(
        &mut self,
        variant: OperationVariant,
        arg_node_ids: &[NodeId],
    ) -> Result<ActionEffect, ActionError> {
        self.check_slots(variant, arg_node_ids)?;
        let key = (variant, arg_node_ids.to_vec());
        if self.edge_keys.contains_key(&key) {
            return Err(ActionError::DuplicateEdge);
        }
        let f = self.registry.func(variant.func);
        match variant.direction {
            Direction::Forward => {
                let args: Vec<&ExampleTuple> =
                    arg_node_ids.iter().map(|&id| &self.nodes[id].value).collect();
                let result = apply_forward(f, &args)?;
                let mut effect = ActionEffect::default();
                let before = self.nodes.len();
                let out_id = self.intern(result, false);
                if out_id >= before {
                    effect.created_nodes.push(out_id);
                }
                let edge_id = self.push_edge(OpEdge {
                    id: 0,
                    variant,
                    arg_node_ids: arg_node_ids.to_vec(),
                    out_node_id: out_id,
                    target_node_ids: Vec::new(),
                    satisfied: true,
                });
                effect.edge_id = edge_id;
                if !self.nodes[out_id].grounded {
                    effect.newly_grounded = self.propagate_grounding(out_id);
                }
                effect.solved_now = self.solved;
                Ok(effect)
            }
            Direction::Inverse | Direction::CondInverse(_) => {
                let out_id = arg_node_ids[0];
                let known_ids = &arg_node_ids[1..];
                let out_tuple = self.nodes[out_id].value.clone();
                let deduced = match variant.direction {
                    Direction::Inverse => apply_inverse(f, &out_tuple)?,
                    Direction::CondInverse(c) => {
                        let known: Vec<(usize, &ExampleTuple)> = f.cond_inverses[c]
                            .known_positions
                            .iter()
                            .zip(known_ids)
                            .map(|(&p, &id)| (p, &self.nodes[id].value))
                            .collect();
                        apply_cond_inverse(f, c, &out_tuple, &known)?
                    }
                    Direction::Forward => unreachable!(),
                };
                let mut effect = ActionEffect::default();
                let mut target_ids = Vec::with_capacity(deduced.len());
                for tuple in deduced {
                    let before = self.nodes.len();
                    let id = self.intern(tuple, false);
                    if id >= before {
                        effect.created_nodes.push(id);
                    }
                    target_ids.push(id);
                }
                let all_grounded = target_ids.iter().all(|&id| self.nodes[id].grounded);
                let edge_id = self.push_edge(OpEdge {
                    id: 0,
                    variant,
                    arg_node_ids: arg_node_ids.to_vec(),
                    out_node_id: out_id,
                    target_node_ids: target_ids,
                    satisfied: all_grounded,
                });
                effect.edge_id = edge_id;
                if all_grounded {
                    effect.newly_grounded = self.propagate_grounding(out_id);
                }
                effect.solved_now = self.solved;
                Ok(effect)
            }
        }
    }

    fn push_edge(&mut self, mut edge: OpEdge) -> EdgeId {
        let id = self.edges.len();
        edge.id = id;
        self.edge_keys
            .insert((edge.variant, edge.arg_node_ids.clone()), id);
        self.edges.push(edge);
        id
    }

    /// Ground `node_id` and run grounding to a fixed point: any backward
    /// edge whose targets are all grounded grounds its output node. Returns
    /// every node that flipped, in the order it flipped.
    pub fn propagate_grounding(&mut self, node_id: NodeId) -> Vec<NodeId> {
        let mut flipped = Vec::new();
        let mut queue = vec![node_id];
        while let Some(id) = queue.pop() {
            if self.nodes[id].grounded {
                continue;
            }
            self.nodes[id].grounded = true;
            if self.nodes[id].is_output {
                self.solved = true;
            }
            flipped.push(id);
            for e in 0..self.edges.len() {
                if self.edges[e].satisfied || !self.edges[e].is_backward() {
                    continue;
                }
                if self.edges[e].target_node_ids.contains(&id)
                    && self.edges[e]
                        .target_node_ids
                        .iter()
                        .all(|&t| self.nodes[t].grounded)
                {
                    self.edges[e].satisfied = true;
                    let out = self.edges[e].out_node_id;
                    if !self.nodes[out].grounded {
                        queue.push(out);
                    }
                }
            }
        }
        flipped
    }

    /// Forward argument node ids of an edge, in the function's signature
    /// order, combining known arguments and deduced targets for backward
    /// edges.
    pub fn edge_forward_args(&self, edge: &OpEdge) -> Vec<NodeId> {
        let f = self.registry.func(edge.variant.func);
        match edge.variant.direction {
            Direction::Forward => edge.arg_node_ids.clone(),
            Direction::Inverse => edge.target_node_ids.clone(),
            Direction::CondInverse(c) => {
                let mut args = vec![usize::MAX; f.arity()];
                let known = &f.cond_inverses[c].known_positions;
                for (&p, &id) in known.iter().zip(&edge.arg_node_ids[1..]) {
                    args[p] = id;
                }
                for (&p, &id) in unknown_positions(f, c).iter().zip(&edge.target_node_ids) {
                    args[p] = id;
                }
                args
            }
        }
    }

    /// Extract the smallest-known program grounding the output node.
    /// Backward edges are replayed as their corresponding forward
    /// application. Ties break towards earlier edges, so extraction is
    /// deterministic. Returns `None` if the graph is unsolved.
    pub fn extract_program(&self) -> Option<Program> {
        if !self.solved {
            return None;
        }
        self.derivation_of(self.output_node_id)
    }

    /// Smallest-known derivation of any grounded node.
    pub fn derivation_of(&self, node_id: NodeId) -> Option<Program> {
        if !self.nodes[node_id].grounded {
            return None;
        }
        let costs = self.derivation_costs();
        self.build_program(node_id, &costs)
    }

    /// Per-node minimal derivation cost (number of applications), computed
    /// by relaxation over every edge, treating backward edges as their
    /// forward replay. Inputs cost 0.
    pub fn derivation_costs(&self) -> Vec<Option<usize>> {
        let mut cost: Vec<Option<usize>> = vec![None; self.nodes.len()];
        for n in &self.nodes {
            if n.is_input() {
                cost[n.id] = Some(0);
            }
        }
        loop {
            let mut changed = false;
            for e in &self.edges {
                let args = self.edge_forward_args(e);
                let arg_cost: Option<usize> =
                    args.iter().try_fold(0usize, |acc, &a| cost[a].map(|c| acc + c));
                if let Some(c) = arg_cost {
                    let new = c + 1;
                    if cost[e.out_node_id].map_or(true, |old| new < old) {
                        cost[e.out_node_id] = Some(new);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        cost
    }

    fn build_program(&self, node_id: NodeId, costs: &[Option<usize>]) -> Option<Program> {
        let node = &self.nodes[node_id];
        if node.is_input() {
            return Some(Program::Input(node.input_positions[0]));
        }
        let my_cost = costs[node_id]?;
        // First edge (by creation order) achieving the minimal cost.
        for e in &self.edges {
            if e.out_node_id != node_id {
                continue;
            }
            let args = self.edge_forward_args(e);
            let total: Option<usize> =
                args.iter().try_fold(1usize, |acc, &a| costs[a].map(|c| acc + c));
            if total == Some(my_cost) {
                let sub: Option<Vec<Program>> =
                    args.iter().map(|&a| self.build_program(a, costs)).collect();
                return Some(Program::Apply { func: e.variant.func, args: sub? });
            }
        }
        None
    }

    /// Test support: true iff no two nodes carry equal tuples.
    pub fn deduplicated(&self) -> bool {
        for (i, a) in self.nodes.iter().enumerate() {
            for b in &self.nodes[i + 1..] {
                if a.value == b.value {
                    return false;
                }
            }
        }
        true
    }

    /// Test support: the grounded set is closed under forward edges and
    /// satisfied backward edges.
    pub fn closure_holds(&self) -> bool {
        self.edges.iter().all(|e| {
            let args_grounded = e.arg_node_ids.iter().all(|&a| self.nodes[a].grounded);
            match e.variant.direction {
                Direction::Forward => !args_grounded || self.nodes[e.out_node_id].grounded,
                _ => {
                    let targets_grounded =
                        e.target_node_ids.iter().all(|&t| self.nodes[t].grounded);
                    !targets_grounded || self.nodes[e.out_node_id].grounded
                }
            }
        }) && (self.solved == self.nodes[self.output_node_id].grounded)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::Domain;
    use crate::program::check_solution;
    use crate::values::{Example, Grid, Value};

    fn arith_task(inputs: &[u64], target: u64) -> Task {
        Task {
            id: "t".into(),
            train: vec![Example {
                inputs: inputs.iter().map(|&n| Value::Int(n)).collect(),
                output: Some(Value::Int(target)),
            }],
            test: vec![],
        }
    }

    fn grid(rows: &[&[u8]]) -> Grid {
        Grid::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn init_24_game() {
        let reg = Arc::new(Domain::Arith24.registry());
        let g = SearchGraph::init(&arith_task(&[8, 1, 3, 2], 24), reg).unwrap();
        assert_eq!(g.nodes().len(), 5);
        assert_eq!(g.nodes().iter().filter(|n| n.grounded).count(), 4);
        assert!(!g.solved());
    }

    #[test]
    fn identity_task_solved_at_init() {
        let reg = Arc::new(Domain::Arith24.registry());
        let g = SearchGraph::init(&arith_task(&[5], 5), reg).unwrap();
        assert!(g.solved());
        assert_eq!(g.extract_program().unwrap(), Program::Input(0));
    }

    #[test]
    fn double_and_add_init() {
        let reg = Arc::new(Domain::DoubleAdd.registry());
        let g = SearchGraph::init(&arith_task(&[2], 7), reg).unwrap();
        assert_eq!(g.nodes().len(), 2);
        assert!(!g.solved());
    }

    #[test]
    fn backward_chain_grounds_through_propagation() {
        // out 7 <-(add_one) 6 <-(double) 3 <-(add_one) 2 collides with the
        // grounded start node and solves the task.
        let reg = Arc::new(Domain::DoubleAdd.registry());
        let task = arith_task(&[2], 7);
        let mut g = SearchGraph::init(&task, reg.clone()).unwrap();
        let vars = reg.enumerate_operations(false);
        let inv_add = vars
            .iter()
            .copied()
            .find(|v| v.direction == Direction::Inverse && reg.func(v.func).name == "add_one")
            .unwrap();
        let inv_double = vars
            .iter()
            .copied()
            .find(|v| v.direction == Direction::Inverse && reg.func(v.func).name == "double")
            .unwrap();
        let out = g.output_node_id();
        let e1 = g.apply_action(inv_add, &[out]).unwrap();
        assert!(!e1.solved_now);
        let six = e1.created_nodes[0];
        let e2 = g.apply_action(inv_double, &[six]).unwrap();
        let three = e2.created_nodes[0];
        let e3 = g.apply_action(inv_add, &[three]).unwrap();
        assert!(e3.created_nodes.is_empty(), "2 dedups onto the input node");
        assert!(e3.solved_now);
        let p = g.extract_program().unwrap();
        assert_eq!(p.size(), 3);
        assert!(check_solution(&p, &task, &reg));
        assert!(g.closure_holds());
        assert!(g.deduplicated());
    }

    #[test]
    fn cond_inverse_deduction_and_solve() {
        // 1 + x = 5 deduces x = 4.
        let reg = Arc::new(Domain::Arith24.registry());
        let task = arith_task(&[1, 4], 5);
        let mut g = SearchGraph::init(&task, reg.clone()).unwrap();
        let vars = reg.enumerate_operations(false);
        let add_ci0 = vars
            .iter()
            .copied()
            .find(|v| {
                reg.func(v.func).name == "add" && v.direction == Direction::CondInverse(0)
            })
            .unwrap();
        let one = g.find_node(&task.input_tuple(0)).unwrap();
        let out = g.output_node_id();
        let eff = g.apply_action(add_ci0, &[out, one]).unwrap();
        // x = 4 collides with the grounded input 4, solving immediately.
        assert!(eff.solved_now);
        let p = g.extract_program().unwrap();
        assert!(check_solution(&p, &task, &reg));
    }

    #[test]
    fn invalid_actions_leave_graph_unchanged() {
        let reg = Arc::new(Domain::Arith24.registry());
        let mut g = SearchGraph::init(&arith_task(&[8, 1, 3, 2], 24), reg.clone()).unwrap();
        let fwd_add = OperationVariant { func: 0, direction: Direction::Forward };
        let before_nodes = g.nodes().len();
        // Ungrounded output as a forward argument.
        let out = g.output_node_id();
        assert!(matches!(
            g.apply_action(fwd_add, &[out, 0]),
            Err(ActionError::SlotViolation { .. })
        ));
        // Arity violation.
        assert!(matches!(
            g.apply_action(fwd_add, &[0]),
            Err(ActionError::WrongSlotCount { .. })
        ));
        // Semantic domain error: 20 * 6 exceeds 100 -> find nodes first.
        assert_eq!(g.nodes().len(), before_nodes);
        assert_eq!(g.edges().len(), 0);
    }

    #[test]
    fn duplicate_edges_rejected() {
        let reg = Arc::new(Domain::Arith24.registry());
        let mut g = SearchGraph::init(&arith_task(&[8, 1, 3, 2], 24), reg).unwrap();
        let fwd_add = OperationVariant { func: 0, direction: Direction::Forward };
        g.apply_action(fwd_add, &[0, 1]).unwrap();
        assert_eq!(g.apply_action(fwd_add, &[0, 1]), Err(ActionError::DuplicateEdge));
        // Different argument order is a different edge.
        g.apply_action(fwd_add, &[1, 0]).unwrap();
    }

    #[test]
    fn diamond_propagation_is_consistent() {
        // Two backward edges into the same output; grounding via one path
        // grounds the output exactly once and the graph stays consistent.
        let reg = Arc::new(Domain::Arith24.registry());
        let task = arith_task(&[2, 3], 6);
        let mut g = SearchGraph::init(&task, reg.clone()).unwrap();
        let vars = reg.enumerate_operations(false);
        let mul_ci0 = vars
            .iter()
            .copied()
            .find(|v| {
                reg.func(v.func).name == "mul" && v.direction == Direction::CondInverse(0)
            })
            .unwrap();
        let out = g.output_node_id();
        let two = g.find_node(&task.input_tuple(0)).unwrap();
        let three = g.find_node(&task.input_tuple(1)).unwrap();
        // 2 * x = 6 -> x = 3 (grounded): solves.
        let eff1 = g.apply_action(mul_ci0, &[out, two]).unwrap();
        assert!(eff1.solved_now);
        // 3 * x = 6 -> x = 2 (grounded): output already grounded; edge is
        // rejected because slot 0 now requires an ungrounded node.
        assert!(g.apply_action(mul_ci0, &[out, three]).is_err());
        assert!(g.closure_holds());
    }

    #[test]
    fn fig4_style_grid_episode() {
        // flip_h forward, hstack forward, hstack forward grounds the output.
        let reg = Arc::new(Domain::GridSym.registry());
        let x = grid(&[&[1, 2], &[3, 4]]);
        let fx = crate::dsl::grids::flip_h(&x);
        let half = crate::dsl::grids::hstack(&fx, &x).unwrap();
        let out = crate::dsl::grids::hstack(&half, &half).unwrap();
        let task = Task {
            id: "fig4".into(),
            train: vec![Example {
                inputs: vec![Value::Grid(x)],
                output: Some(Value::Grid(out)),
            }],
            test: vec![],
        };
        let mut g = SearchGraph::init(&task, reg.clone()).unwrap();
        let flip_h = OperationVariant {
            func: reg.func_index("flip_h").unwrap(),
            direction: Direction::Forward,
        };
        let hstack = OperationVariant {
            func: reg.func_index("hstack").unwrap(),
            direction: Direction::Forward,
        };
        let x0 = g.input_node_ids()[0];
        let e1 = g.apply_action(flip_h, &[x0]).unwrap();
        let i1 = e1.created_nodes[0];
        let e2 = g.apply_action(hstack, &[i1, x0]).unwrap();
        let i2 = e2.created_nodes[0];
        let e3 = g.apply_action(hstack, &[i2, i2]).unwrap();
        assert!(e3.solved_now);
        let p = g.extract_program().unwrap();
        assert!(check_solution(&p, &task, &reg));
        assert_eq!(p.pretty(&reg), "(hstack (hstack (flip_h $0) $0) (hstack (flip_h $0) $0))");
    }
}
