//! Exact finite-horizon solver for the minimum-distortion scheduling
//! problem on small instances.
//!
//! States are reception matrices, actions the maximal independent sets of
//! the slot's IDNC graph, and the per-slot reward of an action is its
//! expected distortion reduction Σ δ_{k,l}·(1−ε_{i,k}) over the served
//! vertices. Backward induction computes, for every state reachable from
//! the start and every stage, the action maximizing the expected cumulative
//! reward before the deadline:
//!
//! V*(s, t) = max_a [ r̄(s, a) + Σ_{s'} P_a(s, s')·V*(s', t+1) ],  V*(·, Θ+1) = 0.
//!
//! Only states reachable under monotone packet reception are enumerated,
//! not the full 2^{M·N} space; configurable guards reject instances whose
//! reachable set or per-state action count is still too large.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use thiserror::Error;

use crate::graph::{GraphError, IdncGraph, IndependentSet, Vertex};
use crate::model::{ConnectivityMatrix, ImportanceMatrix, StatusMatrix};
use crate::scheduling::{Scheduler, SchedulerError, SlotState};

#[derive(Debug, Error)]
pub enum MdpError {
    #[error("instance too large: {states} reachable states exceed the cap {cap}")]
    TooManyStates { states: usize, cap: usize },
    #[error("instance too large: a state has {actions} actions, above the cap {cap}")]
    TooManyActions { actions: usize, cap: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Size guards for the solver.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct MdpGuards {
    /// Cap on states reachable from the start, summed over stages.
    pub max_states: usize,
    /// Cap on the action count of any single state.
    pub max_actions: usize,
    /// Vertex cap handed to maximal-independent-set enumeration.
    pub vertex_cap: usize,
}

impl Default for MdpGuards {
    fn default() -> Self {
        MdpGuards {
            max_states: 200_000,
            max_actions: 10_000,
            vertex_cap: crate::graph::DEFAULT_VERTEX_CAP,
        }
    }
}

/// Action space of a state: every maximal independent set of its graph.
/// An absorbing state (empty graph) has the single empty action.
pub fn actions(
    f: &StatusMatrix,
    y: &ConnectivityMatrix,
    guards: &MdpGuards,
) -> Result<(IdncGraph, Vec<IndependentSet>), MdpError> {
    let graph = IdncGraph::build(y, f)?;
    let sets = graph.maximal_independent_sets_capped(guards.vertex_cap)?;
    if sets.len() > guards.max_actions {
        return Err(MdpError::TooManyActions {
            actions: sets.len(),
            cap: guards.max_actions,
        });
    }
    Ok((graph, sets))
}

/// Successor distribution of playing `action` in state `f`: one outcome per
/// subset of targets that receive, with probability Π(1−ε) over successes
/// times Π ε over failures. Zero-probability outcomes are dropped.
#[derive(Clone, Debug)]
pub struct TransitionDistribution {
    pub outcomes: Vec<(StatusMatrix, f64)>,
}

pub fn transition(
    f: &StatusMatrix,
    action: &[Vertex],
    y: &ConnectivityMatrix,
) -> TransitionDistribution {
    let mut outcomes = Vec::with_capacity(1 << action.len());
    for success_bits in 0u32..(1 << action.len()) {
        let mut prob = 1.0f64;
        let mut next = f.clone();
        for (idx, v) in action.iter().enumerate() {
            let p_recv = y.reception(v.tx, v.rx);
            if success_bits & (1 << idx) != 0 {
                prob *= p_recv;
                next = next.mark_received(v.rx, v.pkt);
            } else {
                prob *= 1.0 - p_recv;
            }
        }
        if prob > 0.0 {
            outcomes.push((next, prob));
        }
    }
    let total: f64 = outcomes.iter().map(|(_, p)| p).sum();
    assert!(
        (total - 1.0).abs() < 1e-12,
        "transition probabilities must sum to 1, got {total}"
    );
    TransitionDistribution { outcomes }
}

/// Expected one-slot distortion reduction of an action:
/// Σ over served vertices of δ_{rx,pkt}·(1−ε_{tx,rx}).
pub fn expected_reward(action: &[Vertex], delta: &ImportanceMatrix, y: &ConnectivityMatrix) -> f64 {
    // fold from +0.0: an empty f64 Sum would yield -0.0.
    action.iter().fold(0.0, |acc, v| {
        acc + delta.value(v.rx, v.pkt) * y.reception(v.tx, v.rx)
    })
}

#[derive(Clone, Debug)]
struct Entry {
    value: f64,
    action: Vec<Vertex>,
}

/// Optimal value and action for every reachable (state, stage) pair.
/// Stage Θ+1 is terminal with value 0.
pub struct ValuePolicyTable {
    theta: u32,
    start: StatusMatrix,
    entries: HashMap<(StatusMatrix, u32), Entry>,
    reachable_states: usize,
}

impl ValuePolicyTable {
    pub fn theta(&self) -> u32 {
        self.theta
    }

    pub fn start(&self) -> &StatusMatrix {
        &self.start
    }

    /// Distinct (state, stage) pairs covered, terminal stage included.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Distinct states reachable from the start, summed over stages.
    pub fn reachable_states(&self) -> usize {
        self.reachable_states
    }

    pub fn value(&self, f: &StatusMatrix, stage: u32) -> Option<f64> {
        self.entries.get(&(f.clone(), stage)).map(|e| e.value)
    }

    pub fn action(&self, f: &StatusMatrix, stage: u32) -> Option<&[Vertex]> {
        self.entries
            .get(&(f.clone(), stage))
            .map(|e| e.action.as_slice())
    }

    /// Value of the whole problem: V*(start, 1); 0 for a zero-slot horizon.
    pub fn root_value(&self) -> f64 {
        if self.theta == 0 {
            return 0.0;
        }
        self.value(&self.start, 1).unwrap_or(0.0)
    }

    pub fn root_action(&self) -> &[Vertex] {
        if self.theta == 0 {
            return &[];
        }
        self.action(&self.start, 1).unwrap_or(&[])
    }
}

/// Solves the instance by backward induction over the states reachable from
/// `start`: a forward pass enumerates the per-stage reachable sets, then the
/// value pass walks stages Θ..1 applying the Bellman recursion. Ties among
/// equal-value actions keep the first in enumeration order, which is the
/// lexicographically smallest vertex-index set.
pub fn backward_induction(
    start: &StatusMatrix,
    theta: u32,
    y: &ConnectivityMatrix,
    delta: &ImportanceMatrix,
    guards: &MdpGuards,
) -> Result<ValuePolicyTable, MdpError> {
    // Action sets depend on the state only; share them across stages.
    let mut action_cache: HashMap<StatusMatrix, Arc<Vec<Vec<Vertex>>>> = HashMap::new();
    let mut cached_actions = |f: &StatusMatrix| -> Result<Arc<Vec<Vec<Vertex>>>, MdpError> {
        if let Some(a) = action_cache.get(f) {
            return Ok(a.clone());
        }
        let (graph, sets) = actions(f, y, guards)?;
        let resolved: Vec<Vec<Vertex>> = sets.iter().map(|s| graph.resolve(s)).collect();
        let arc = Arc::new(resolved);
        action_cache.insert(f.clone(), arc.clone());
        Ok(arc)
    };

    // Forward reachability, stage by stage.
    let mut stages: Vec<Vec<StatusMatrix>> = Vec::with_capacity(theta as usize + 1);
    stages.push(vec![start.clone()]);
    let mut total_states = 1usize;
    for _t in 1..=theta {
        let current = stages.last().unwrap();
        let mut next: Vec<StatusMatrix> = Vec::new();
        let mut seen: HashMap<StatusMatrix, ()> = HashMap::new();
        for s in current {
            for action in cached_actions(s)?.iter() {
                for (succ, _p) in transition(s, action, y).outcomes {
                    if seen.insert(succ.clone(), ()).is_none() {
                        next.push(succ);
                    }
                }
            }
        }
        total_states += next.len();
        if total_states > guards.max_states {
            return Err(MdpError::TooManyStates {
                states: total_states,
                cap: guards.max_states,
            });
        }
        stages.push(next);
    }

    // Value pass: terminal stage Θ+1 is all zero, then walk backwards.
    let mut entries: HashMap<(StatusMatrix, u32), Entry> = HashMap::new();
    for s in &stages[theta as usize] {
        entries.insert(
            (s.clone(), theta + 1),
            Entry {
                value: 0.0,
                action: Vec::new(),
            },
        );
    }
    for t in (1..=theta).rev() {
        for s in &stages[(t - 1) as usize] {
            let mut best: Option<Entry> = None;
            for action in cached_actions(s)?.iter() {
                let mut value = expected_reward(action, delta, y);
                for (succ, p) in transition(s, action, y).outcomes {
                    if t < theta {
                        value += p * entries[&(succ, t + 1)].value;
                    }
                }
                let replace = match &best {
                    None => true,
                    Some(b) => value > b.value,
                };
                if replace {
                    best = Some(Entry {
                        value,
                        action: action.clone(),
                    });
                }
            }
            let best = best.expect("every state has at least one action");
            entries.insert((s.clone(), t), best);
        }
    }

    Ok(ValuePolicyTable {
        theta,
        start: start.clone(),
        entries,
        reachable_states: total_states,
    })
}

/// Scheduler that replays a solved policy table. The table must cover the
/// episode's reachable states; a lookup miss means the episode diverged
/// from the solved instance. Absorbing states fall back to the empty set.
pub struct MdpPolicyScheduler {
    table: Arc<ValuePolicyTable>,
}

impl MdpPolicyScheduler {
    pub fn new(table: Arc<ValuePolicyTable>) -> Self {
        MdpPolicyScheduler { table }
    }
}

impl Scheduler for MdpPolicyScheduler {
    fn name(&self) -> &str {
        "mdp"
    }

    fn select(
        &self,
        graph: &IdncGraph,
        state: &SlotState<'_>,
    ) -> Result<IndependentSet, SchedulerError> {
        if state.f.complete() {
            return Ok(IndependentSet::empty());
        }
        let slot = state.clock.slot();
        let action = self
            .table
            .action(state.f, slot)
            .ok_or(SchedulerError::StateNotInTable { slot })?;
        graph
            .from_vertices(action)
            .ok_or_else(|| SchedulerError::Internal("stored action missing from graph".into()))
    }
}

/// Solver-backed optimal scheduler for Monte-Carlo runs where every episode
/// starts from a different seeded state. Values are cached under the key
/// (state, remaining slots): the dynamics are stationary, so V*(s, t) for a
/// horizon Θ only depends on the remaining budget Q = Θ−t+1, and entries are
/// shared across episodes and horizons.
pub struct MdpScheduler {
    y: ConnectivityMatrix,
    delta: ImportanceMatrix,
    guards: MdpGuards,
    cache: RwLock<HashMap<(StatusMatrix, u32), Arc<Entry>>>,
}

impl MdpScheduler {
    pub fn new(y: ConnectivityMatrix, delta: ImportanceMatrix, guards: MdpGuards) -> Self {
        MdpScheduler {
            y,
            delta,
            guards,
            cache: RwLock::new(HashMap::new()),
        }
    }

    fn solve_from(&self, f: &StatusMatrix, remaining: u32) -> Result<Arc<Entry>, MdpError> {
        // A fresh horizon-Q problem rooted at f yields V*(s, q) for every
        // state it reaches; merge the whole table into the shared cache.
        let table = backward_induction(f, remaining, &self.y, &self.delta, &self.guards)?;
        let mut cache = self.cache.write().expect("mdp cache poisoned");
        for ((s, stage), entry) in table.entries {
            cache
                .entry((s, remaining + 1 - stage))
                .or_insert_with(|| Arc::new(entry));
        }
        drop(cache);
        let cache = self.cache.read().expect("mdp cache poisoned");
        Ok(cache
            .get(&(f.clone(), remaining))
            .expect("solve covers its own root")
            .clone())
    }
}

impl Scheduler for MdpScheduler {
    fn name(&self) -> &str {
        "mdp"
    }

    fn select(
        &self,
        graph: &IdncGraph,
        state: &SlotState<'_>,
    ) -> Result<IndependentSet, SchedulerError> {
        if state.f.complete() {
            return Ok(IndependentSet::empty());
        }
        let q = state.clock.remaining();
        let cached = {
            let cache = self.cache.read().expect("mdp cache poisoned");
            cache.get(&(state.f.clone(), q)).cloned()
        };
        let entry = match cached {
            Some(e) => e,
            None => self.solve_from(state.f, q).map_err(|e| match e {
                MdpError::TooManyStates { .. }
                | MdpError::TooManyActions { .. }
                | MdpError::Graph(GraphError::VertexCountExceeded { .. }) => {
                    SchedulerError::InstanceTooLarge(e.to_string())
                }
                other => SchedulerError::Internal(format!("mdp solve failed: {other}")),
            })?,
        };
        graph
            .from_vertices(&entry.action)
            .ok_or_else(|| SchedulerError::Internal("stored action missing from graph".into()))
    }
}

/// Entry point kept for callers that need errors surfaced before episodes
/// run: solving from the given start fails fast if the guards trip.
pub fn solving_scheduler(
    y: &ConnectivityMatrix,
    delta: &ImportanceMatrix,
    guards: MdpGuards,
) -> MdpScheduler {
    MdpScheduler::new(y.clone(), delta.clone(), guards)
}
