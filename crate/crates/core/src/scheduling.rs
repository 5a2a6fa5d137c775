//! Per-slot decision policies over the IDNC graph.
//!
//! All policies implement [`Scheduler`] and return an independent set of the
//! slot's graph. Three heuristics are provided:
//!
//! - [`TsMisScheduler`] — two-stage selection: a max-weight independent set
//!   over the critical graph (weight δ·(1−ε)), then, on the conflict-free
//!   remainder of the non-critical graph, the maximal set that maximizes the
//!   probability that every non-critical device still meets the deadline;
//! - [`PcbScheduler`] — targets the maximum number of devices per slot,
//!   blind to deadlines and packet importance;
//! - [`FcdScheduler`] — single-transmitter decisions minimizing expected
//!   distortion after the current slot, the fully-connected-style baseline.
//!
//! The deadline probabilities come from a negative-binomial completion-time
//! model: a device with `w` missing packets that is targeted with a new
//! packet every slot and sees average erasure ε̄ completes in exactly `w+x`
//! slots with probability C(w+x−1, x)·ε̄^x·(1−ε̄)^w.

use thiserror::Error;

use crate::graph::{pick_best, GraphError, IdncGraph, IndependentSet, Vertex, DEFAULT_VERTEX_CAP};
use crate::model::{
    critical_set, non_critical_set, ConnectivityMatrix, DeviceId, ImportanceMatrix, SessionClock,
    StatusMatrix,
};

#[derive(Debug, Error)]
pub enum SchedulerError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("episode diverged from the solved instance: state not in policy table at slot {slot}")]
    StateNotInTable { slot: u32 },
    #[error("instance too large for this policy: {0}")]
    InstanceTooLarge(String),
    #[error("scheduler invariant broken: {0}")]
    Internal(String),
}

impl SchedulerError {
    /// True when the failure is a size-guard rejection rather than a bug.
    pub fn is_guard(&self) -> bool {
        matches!(
            self,
            SchedulerError::InstanceTooLarge(_)
                | SchedulerError::Graph(GraphError::VertexCountExceeded { .. })
        )
    }
}

/// Everything a policy may look at when choosing a slot decision.
#[derive(Clone, Copy)]
pub struct SlotState<'a> {
    pub y: &'a ConnectivityMatrix,
    pub f: &'a StatusMatrix,
    pub delta: &'a ImportanceMatrix,
    pub clock: SessionClock,
}

/// A per-slot decision policy. Implementations are stateless with respect
/// to episodes and safe to share across concurrently simulated episodes.
pub trait Scheduler: Send + Sync {
    fn name(&self) -> &str;

    /// Chooses an independent set of `graph`, which the caller built from
    /// `state.f` and `state.y`. The empty set is a valid decision.
    fn select(
        &self,
        graph: &IdncGraph,
        state: &SlotState<'_>,
    ) -> Result<IndependentSet, SchedulerError>;
}

/// How max-weight/max-objective sets are searched.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMode {
    /// Exhaustive Bron–Kerbosch enumeration; errors above the vertex cap.
    Exact,
    /// Greedy highest-weight-first construction.
    Greedy,
    /// Exact when the graph fits under the cap, greedy otherwise.
    Auto,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SelectionConfig {
    pub mode: SelectionMode,
    /// Vertex-count cap for exhaustive enumeration.
    pub exact_cap: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            mode: SelectionMode::Auto,
            exact_cap: DEFAULT_VERTEX_CAP,
        }
    }
}

impl SelectionConfig {
    pub fn exact() -> Self {
        SelectionConfig {
            mode: SelectionMode::Exact,
            ..Default::default()
        }
    }

    pub fn greedy() -> Self {
        SelectionConfig {
            mode: SelectionMode::Greedy,
            ..Default::default()
        }
    }

    fn use_exact(&self, vertex_count: usize) -> bool {
        match self.mode {
            SelectionMode::Exact => true,
            SelectionMode::Greedy => false,
            SelectionMode::Auto => vertex_count <= self.exact_cap,
        }
    }

    /// Max-weight maximal independent set under this strategy.
    fn max_weight(
        &self,
        g: &IdncGraph,
        weights: &[f64],
    ) -> Result<IndependentSet, SchedulerError> {
        if self.use_exact(g.vertex_count()) {
            Ok(g.max_weight_independent_set(weights, self.exact_cap)?)
        } else {
            Ok(g.greedy_max_weight_independent_set(weights))
        }
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for j in 1..=k {
        acc = acc * (n - k + j) as f64 / j as f64;
    }
    acc
}

/// Probability that a device with `w` missing packets, targeted with a new
/// packet every slot over links of average erasure `eps_bar`, completes in
/// exactly `w + x` slots.
pub fn completion_pmf(w: u32, x: u32, eps_bar: f64) -> f64 {
    debug_assert!(w >= 1);
    debug_assert!((0.0..=1.0).contains(&eps_bar));
    if eps_bar >= 1.0 {
        return 0.0;
    }
    binomial(w + x - 1, x) * eps_bar.powi(x as i32) * (1.0 - eps_bar).powi(w as i32)
}

/// Probability that such a device completes within `q` slots: the pmf
/// summed over x = 0..=q−w. Zero when q < w, one when w = 0.
pub fn completion_cdf(w: u32, q: u32, eps_bar: f64) -> f64 {
    if w == 0 {
        return 1.0;
    }
    if q < w {
        return 0.0;
    }
    (0..=q - w).map(|x| completion_pmf(w, x, eps_bar)).sum()
}

/// Deadline-probability product with its per-device factors kept for
/// diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct DeadlineProbability {
    pub value: f64,
    pub terms: Vec<(DeviceId, f64)>,
}

/// Upper bound on the probability that every non-critical device receives
/// all its missing packets within the remaining budget: the product of the
/// per-device completion probabilities. An isolated device that still wants
/// packets contributes a zero factor.
pub fn all_noncritical_deadline_prob(state: &SlotState<'_>) -> DeadlineProbability {
    let q = state.clock.remaining();
    let mut terms = Vec::new();
    let mut value = 1.0;
    for k in non_critical_set(state.f, &state.clock) {
        let w = state.f.wants_count(k) as u32;
        let factor = match state.y.average_erasure(k) {
            Ok(eps_bar) => completion_cdf(w, q, eps_bar),
            Err(_) => 0.0,
        };
        value *= factor;
        terms.push((k, factor));
    }
    DeadlineProbability { value, terms }
}

/// Per-vertex weight δ_{rx,pkt}·(1−ε_{tx,rx}): the expected distortion
/// reduction if the vertex is served.
fn reduction_weights(g: &IdncGraph, state: &SlotState<'_>) -> Vec<f64> {
    g.vertices()
        .iter()
        .map(|v| state.delta.value(v.rx, v.pkt) * state.y.reception(v.tx, v.rx))
        .collect()
}

/// Stage-one selection: the max-weight maximal independent set of the
/// critical graph under the expected-distortion-reduction weight.
pub fn select_critical_mis(
    graph_c: &IdncGraph,
    state: &SlotState<'_>,
    cfg: &SelectionConfig,
) -> Result<IndependentSet, SchedulerError> {
    let weights = reduction_weights(graph_c, state);
    cfg.max_weight(graph_c, &weights)
}

/// Upper bound on the probability that all non-critical devices finish in
/// the Q−1 slots after this one, given that `kappa` targets some of them
/// now. A targeted device mixes the completion counts of the two possible
/// outcomes of this slot; an ignored device keeps its current count.
pub fn successor_deadline_prob(kappa: &[Vertex], state: &SlotState<'_>) -> f64 {
    let q = state.clock.remaining();
    let noncritical = non_critical_set(state.f, &state.clock);
    debug_assert!(
        kappa.iter().all(|v| noncritical.contains(&v.rx)),
        "kappa must target non-critical devices only"
    );
    let mut prob = 1.0;
    for k in noncritical {
        let w = state.f.wants_count(k) as u32;
        let eps_bar = match state.y.average_erasure(k) {
            Ok(e) => e,
            Err(_) => {
                prob *= 0.0;
                continue;
            }
        };
        let factor = match kappa.iter().find(|v| v.rx == k) {
            Some(v) => {
                let eps_link = state.y.erasure(v.tx, v.rx);
                completion_cdf(w - 1, q - 1, eps_bar) * (1.0 - eps_link)
                    + completion_cdf(w, q - 1, eps_bar) * eps_link
            }
            None => completion_cdf(w, q - 1, eps_bar),
        };
        prob *= factor;
    }
    prob
}

/// Stage-two selection over the reduced non-critical graph: the maximal
/// independent set maximizing [`successor_deadline_prob`]. Exact mode
/// evaluates the objective for every enumerated maximal set; greedy mode
/// ranks vertices by the factor improvement they bring to their target.
pub fn select_noncritical_mis(
    graph_a: &IdncGraph,
    state: &SlotState<'_>,
    cfg: &SelectionConfig,
) -> Result<IndependentSet, SchedulerError> {
    if graph_a.is_empty() {
        return Ok(IndependentSet::empty());
    }
    if cfg.use_exact(graph_a.vertex_count()) {
        let sets = graph_a.maximal_independent_sets_capped(cfg.exact_cap)?;
        Ok(pick_best(sets, |s| {
            successor_deadline_prob(&graph_a.resolve(s), state)
        }))
    } else {
        // Per-device factors multiply independently, so the gain a vertex
        // brings over leaving its target idle does not depend on the rest of
        // the selection; rank by that gain. The two completion cdfs per
        // device are shared by all vertices targeting it.
        let q = state.clock.remaining();
        let m = state.f.device_count();
        let mut idle = vec![0.0f64; m];
        let mut served_if_kept = vec![0.0f64; m];
        let mut seen = vec![false; m];
        for v in graph_a.vertices() {
            let k = v.rx.0;
            if seen[k] {
                continue;
            }
            seen[k] = true;
            let w = state.f.wants_count(v.rx) as u32;
            if let Ok(eps_bar) = state.y.average_erasure(v.rx) {
                idle[k] = completion_cdf(w, q - 1, eps_bar);
                served_if_kept[k] = completion_cdf(w - 1, q - 1, eps_bar);
            }
        }
        let weights: Vec<f64> = graph_a
            .vertices()
            .iter()
            .map(|v| {
                let k = v.rx.0;
                let eps_link = state.y.erasure(v.tx, v.rx);
                let served = served_if_kept[k] * (1.0 - eps_link) + idle[k] * eps_link;
                if idle[k] > 0.0 {
                    served / idle[k]
                } else {
                    served
                }
            })
            .collect();
        Ok(graph_a.greedy_max_weight_independent_set(&weights))
    }
}

/// Two-stage maximal independent set selection: serve critical devices by
/// max-weight distortion reduction, then extend with non-critical targets
/// that maximize the deadline probability without conflicting.
pub struct TsMisScheduler {
    cfg: SelectionConfig,
}

impl TsMisScheduler {
    pub fn new(cfg: SelectionConfig) -> Self {
        TsMisScheduler { cfg }
    }
}

impl Scheduler for TsMisScheduler {
    fn name(&self) -> &str {
        "tsmis"
    }

    fn select(
        &self,
        graph: &IdncGraph,
        state: &SlotState<'_>,
    ) -> Result<IndependentSet, SchedulerError> {
        let critical = critical_set(state.f, &state.clock);
        let noncritical = non_critical_set(state.f, &state.clock);
        // With one slot left nobody can be non-critical: W >= 1 means critical.
        debug_assert!(state.clock.remaining() > 1 || noncritical.is_empty());

        let (graph_c, _) = graph.partition_by_criticality(&critical);
        let mut chosen: Vec<Vertex> = Vec::new();
        if !graph_c.is_empty() {
            let kappa_c = select_critical_mis(&graph_c, state, &self.cfg)?;
            chosen.extend(graph_c.resolve(&kappa_c));
        }

        let chosen_in_full = graph.from_vertices(&chosen).ok_or_else(|| {
            SchedulerError::Internal("critical selection not found in full graph".into())
        })?;
        let mut noncrit_mask = 0u64;
        for d in &noncritical {
            noncrit_mask |= 1 << d.0;
        }
        let graph_a_reduced =
            graph.conflict_free_subgraph(&chosen_in_full, |v| noncrit_mask & (1 << v.rx.0) != 0);
        if !graph_a_reduced.is_empty() {
            let kappa_a = select_noncritical_mis(&graph_a_reduced, state, &self.cfg)?;
            chosen.extend(graph_a_reduced.resolve(&kappa_a));
        }

        graph.from_vertices(&chosen).ok_or_else(|| {
            SchedulerError::Internal("combined selection not found in full graph".into())
        })
    }
}

/// Baseline that serves the maximum number of devices with any new packet in
/// each slot; ties broken by the larger expected-reception sum.
pub struct PcbScheduler {
    cfg: SelectionConfig,
}

impl PcbScheduler {
    pub fn new(cfg: SelectionConfig) -> Self {
        PcbScheduler { cfg }
    }
}

impl Scheduler for PcbScheduler {
    fn name(&self) -> &str {
        "pcb"
    }

    fn select(
        &self,
        graph: &IdncGraph,
        state: &SlotState<'_>,
    ) -> Result<IndependentSet, SchedulerError> {
        if graph.is_empty() {
            return Ok(IndependentSet::empty());
        }
        let reception: Vec<f64> = graph
            .vertices()
            .iter()
            .map(|v| state.y.reception(v.tx, v.rx))
            .collect();
        if self.cfg.use_exact(graph.vertex_count()) {
            let sets = graph.maximal_independent_sets_capped(self.cfg.exact_cap)?;
            // Every vertex of an independent set targets a distinct device,
            // so the targeted-device count equals the cardinality. Fold the
            // reception tie-break into the score with a sub-unit weight.
            let scale = 1.0 / (graph.vertex_count() as f64 + 1.0);
            Ok(pick_best(sets, |s| {
                s.len() as f64 + s.iter().map(|i| reception[i]).sum::<f64>() * scale
            }))
        } else {
            Ok(graph.greedy_max_weight_independent_set(&reception))
        }
    }
}

/// Baseline restricted to a single transmitting device per slot: for each
/// candidate transmitter, take the max-weight independent set of its own
/// vertices (coding conflicts only) under the distortion-reduction weight,
/// then keep the best transmitter; ties by lower device index.
pub struct FcdScheduler {
    cfg: SelectionConfig,
}

impl FcdScheduler {
    pub fn new(cfg: SelectionConfig) -> Self {
        FcdScheduler { cfg }
    }
}

impl Scheduler for FcdScheduler {
    fn name(&self) -> &str {
        "fcd"
    }

    fn select(
        &self,
        graph: &IdncGraph,
        state: &SlotState<'_>,
    ) -> Result<IndependentSet, SchedulerError> {
        let mut transmitters: Vec<DeviceId> = graph.vertices().iter().map(|v| v.tx).collect();
        transmitters.sort_unstable();
        transmitters.dedup();

        let mut best: Option<(f64, Vec<Vertex>)> = None;
        for tx in transmitters {
            let sub = graph.induced(|v| v.tx == tx);
            let weights = reduction_weights(&sub, state);
            let kappa = self.cfg.max_weight(&sub, &weights)?;
            let weight: f64 = kappa.iter().map(|i| weights[i]).sum();
            let replace = match &best {
                None => true,
                Some((bw, _)) => weight > *bw,
            };
            if replace {
                best = Some((weight, sub.resolve(&kappa)));
            }
        }
        match best {
            None => Ok(IndependentSet::empty()),
            Some((_, verts)) => graph.from_vertices(&verts).ok_or_else(|| {
                SchedulerError::Internal("single-transmitter set not found in full graph".into())
            }),
        }
    }
}

/// Heuristic scheduler registry; the MDP policy is constructed separately
/// because it needs the scenario horizon and size guards.
pub fn heuristic_by_name(name: &str, cfg: SelectionConfig) -> Option<Box<dyn Scheduler>> {
    match name {
        "tsmis" => Some(Box::new(TsMisScheduler::new(cfg))),
        "pcb" => Some(Box::new(PcbScheduler::new(cfg))),
        "fcd" => Some(Box::new(FcdScheduler::new(cfg))),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::PacketId;
    use proptest::prelude::*;

    fn v(tx: usize, rx: usize, pkt: usize) -> Vertex {
        Vertex {
            tx: DeviceId(tx - 1),
            rx: DeviceId(rx - 1),
            pkt: PacketId(pkt - 1),
        }
    }

    struct Fixture {
        y: ConnectivityMatrix,
        f: StatusMatrix,
        delta: ImportanceMatrix,
    }

    impl Fixture {
        fn line() -> Self {
            Fixture {
                y: fixtures::line_scm(),
                f: fixtures::line_status(),
                delta: ImportanceMatrix::uniform(4, 3, 1.0),
            }
        }

        fn state(&self, theta: u32, t: u32) -> SlotState<'_> {
            SlotState {
                y: &self.y,
                f: &self.f,
                delta: &self.delta,
                clock: SessionClock::new(theta, t).unwrap(),
            }
        }
    }

    #[test]
    fn completion_pmf_examples() {
        assert_eq!(completion_pmf(2, 0, 0.0), 1.0);
        assert!((completion_pmf(1, 1, 0.5) - 0.25).abs() < 1e-12);
        assert!((completion_pmf(3, 2, 0.2) - 0.12288).abs() < 1e-12);
        assert_eq!(completion_pmf(2, 5, 1.0), 0.0);
    }

    #[test]
    fn completion_cdf_examples() {
        assert!((completion_cdf(1, 2, 0.5) - 0.75).abs() < 1e-12);
        assert_eq!(completion_cdf(0, 0, 0.9), 1.0);
        assert_eq!(completion_cdf(0, 7, 0.9), 1.0);
        assert_eq!(completion_cdf(3, 2, 0.1), 0.0);
    }

    #[test]
    fn pmf_sums_to_one() {
        for &w in &[1u32, 2, 5, 10] {
            for &eps in &[0.0, 0.1, 0.3, 0.5] {
                let total: f64 = (0..=200).map(|x| completion_pmf(w, x, eps)).sum();
                assert!((total - 1.0).abs() < 1e-9, "w={w} eps={eps} total={total}");
            }
        }
    }

    #[test]
    fn noncritical_deadline_prob_examples() {
        // Q = 2 on the line fixture: only R3 is non-critical, so the product
        // has a single factor equal to its completion cdf.
        let fx = Fixture::line();
        let p = all_noncritical_deadline_prob(&fx.state(2, 1));
        assert_eq!(p.terms.len(), 1);
        assert_eq!(p.terms[0].0, DeviceId(2));
        let expected = completion_cdf(1, 2, fx.y.average_erasure(DeviceId(2)).unwrap());
        assert!((p.value - expected).abs() < 1e-12);

        // Q = 1: everyone is critical and the empty product is 1.
        let p = all_noncritical_deadline_prob(&fx.state(1, 1));
        assert!(p.terms.is_empty());
        assert_eq!(p.value, 1.0);
    }

    #[test]
    fn two_device_product_example() {
        // Two devices with (W, Q, eps) = (1, 2, 0.5) each: 0.75^2.
        let y = fixtures::full_mesh(3, 0.5);
        let f = StatusMatrix::from_rows(vec![vec![1, 0], vec![0, 1], vec![0, 0]]).unwrap();
        let delta = ImportanceMatrix::uniform(3, 2, 1.0);
        let clock = SessionClock::new(2, 1).unwrap();
        let state = SlotState { y: &y, f: &f, delta: &delta, clock };
        let p = all_noncritical_deadline_prob(&state);
        assert!((p.value - 0.5625).abs() < 1e-12);
    }

    #[test]
    fn critical_selection_on_line_fixture() {
        // All devices critical, uniform weights: expected reductions are
        // 0.84, 0.84, 0.75, 0.91 and the pair {v(2,1,1), v(3,4,1)} wins.
        let fx = Fixture::line();
        let state = fx.state(1, 1);
        let g = IdncGraph::build(&fx.y, &fx.f).unwrap();
        let (gc, ga) = g.partition_by_criticality(&critical_set(&fx.f, &state.clock));
        assert!(ga.is_empty());
        let kappa = select_critical_mis(&gc, &state, &SelectionConfig::exact()).unwrap();
        assert_eq!(gc.resolve(&kappa), vec![v(2, 1, 1), v(3, 4, 1)]);
        // Empty critical graph: empty selection.
        let empty = gc.induced(|_| false);
        let kappa = select_critical_mis(&empty, &state, &SelectionConfig::exact()).unwrap();
        assert!(kappa.is_empty());
    }

    #[test]
    fn critical_selection_keeps_nonadjacent_union() {
        // Two non-adjacent vertices: both selected, weights 0.4 + 0.6.
        let y = ConnectivityMatrix::from_rows(vec![
            vec![1.0, 0.4, 0.0, 0.0],
            vec![0.4, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.6],
            vec![0.0, 0.0, 0.6, 1.0],
        ])
        .unwrap();
        let f = StatusMatrix::from_rows(vec![vec![1, 0], vec![0, 1], vec![1, 0], vec![0, 1]])
            .unwrap();
        let delta = ImportanceMatrix::uniform(4, 2, 1.0);
        let clock = SessionClock::new(1, 1).unwrap();
        let state = SlotState { y: &y, f: &f, delta: &delta, clock };
        let g = IdncGraph::build(&y, &f).unwrap();
        let kappa = select_critical_mis(&g, &state, &SelectionConfig::exact()).unwrap();
        assert_eq!(kappa.len(), 2);
    }

    #[test]
    fn successor_prob_examples() {
        // Empty kappa: only ignored-device factors remain.
        let fx = Fixture::line();
        let state = fx.state(3, 1); // Q = 3 exceeds every Wants count: all four non-critical
        let noncrit = non_critical_set(&fx.f, &state.clock);
        let empty = successor_deadline_prob(&[], &state);
        let mut expect = 1.0;
        for k in noncrit {
            let w = fx.f.wants_count(k) as u32;
            expect *= completion_cdf(w, 2, fx.y.average_erasure(k).unwrap());
        }
        assert!((empty - expect).abs() < 1e-12);

        // Perfect link: the targeted factor is exactly 1.
        let y = fixtures::full_mesh(2, 1.0);
        let f = StatusMatrix::from_rows(vec![vec![1, 0], vec![0, 0]]).unwrap();
        let delta = ImportanceMatrix::uniform(2, 2, 1.0);
        let clock = SessionClock::new(2, 1).unwrap();
        let state = SlotState { y: &y, f: &f, delta: &delta, clock };
        let kappa = [v(2, 1, 1)];
        assert_eq!(successor_deadline_prob(&kappa, &state), 1.0);
    }

    #[test]
    fn successor_prob_mixture_value() {
        // One targeted device: W = 1, Q = 2, link erasure 0.25, average 0.25:
        // cdf(0,1)·0.75 + cdf(1,1,0.25)·0.25 = 0.75 + 0.1875.
        let y = fixtures::full_mesh(2, 0.75);
        let f = StatusMatrix::from_rows(vec![vec![1, 0], vec![0, 0]]).unwrap();
        let delta = ImportanceMatrix::uniform(2, 2, 1.0);
        let clock = SessionClock::new(2, 1).unwrap();
        let state = SlotState { y: &y, f: &f, delta: &delta, clock };
        let p = successor_deadline_prob(&[v(2, 1, 1)], &state);
        assert!((p - 0.9375).abs() < 1e-12);
    }

    #[test]
    fn noncritical_selection_examples() {
        // Empty graph: empty set.
        let y = fixtures::full_mesh(2, 0.75);
        let f0 = StatusMatrix::from_rows(vec![vec![0, 0], vec![0, 0]]).unwrap();
        let delta = ImportanceMatrix::uniform(2, 2, 1.0);
        let clock = SessionClock::new(3, 1).unwrap();
        let state = SlotState { y: &y, f: &f0, delta: &delta, clock };
        let g = IdncGraph::build(&y, &f0).unwrap();
        let kappa = select_noncritical_mis(&g, &state, &SelectionConfig::exact()).unwrap();
        assert!(kappa.is_empty());

        // Single-vertex graph: targeting beats idling, so it is selected.
        let f1 = StatusMatrix::from_rows(vec![vec![1, 0], vec![0, 0]]).unwrap();
        let state = SlotState { y: &y, f: &f1, delta: &delta, clock };
        let g = IdncGraph::build(&y, &f1).unwrap();
        let kappa = select_noncritical_mis(&g, &state, &SelectionConfig::exact()).unwrap();
        assert_eq!(kappa.len(), 1);
    }

    #[test]
    fn noncritical_selection_matches_exhaustive_evaluation() {
        // Adjacent candidates targeting devices with different Wants counts:
        // the selection must agree with brute-force objective evaluation.
        let y = fixtures::full_mesh(3, 0.9);
        let f = StatusMatrix::from_rows(vec![vec![1, 0, 0], vec![1, 1, 0], vec![0, 0, 0]])
            .unwrap();
        let delta = ImportanceMatrix::uniform(3, 3, 1.0);
        let clock = SessionClock::new(4, 1).unwrap();
        let state = SlotState { y: &y, f: &f, delta: &delta, clock };
        let g = IdncGraph::build(&y, &f).unwrap();
        let kappa = select_noncritical_mis(&g, &state, &SelectionConfig::exact()).unwrap();
        let sets = g.maximal_independent_sets().unwrap();
        let expected = pick_best(sets, |s| successor_deadline_prob(&g.resolve(s), &state));
        assert_eq!(kappa, expected);
    }

    #[test]
    fn tsmis_reduces_to_stage_objectives() {
        let fx = Fixture::line();
        let g = IdncGraph::build(&fx.y, &fx.f).unwrap();
        let ts = TsMisScheduler::new(SelectionConfig::exact());

        // All devices critical (Q = 1): stage two is skipped.
        let state = fx.state(1, 1);
        let kappa = ts.select(&g, &state).unwrap();
        assert_eq!(g.resolve(&kappa), vec![v(2, 1, 1), v(3, 4, 1)]);

        // All devices non-critical (Q = 9): stage one is skipped and the
        // full graph feeds the deadline objective.
        let state = fx.state(9, 1);
        let kappa = ts.select(&g, &state).unwrap();
        let sets = g.maximal_independent_sets().unwrap();
        let expected = pick_best(sets, |s| successor_deadline_prob(&g.resolve(s), &state));
        assert_eq!(kappa, expected);
    }

    #[test]
    fn tsmis_mixed_stages_stay_independent() {
        // Q = 2 on the line fixture: R1, R2, R4 critical, R3 non-critical.
        let fx = Fixture::line();
        let state = fx.state(2, 1);
        let g = IdncGraph::build(&fx.y, &fx.f).unwrap();
        let ts = TsMisScheduler::new(SelectionConfig::exact());
        let kappa = ts.select(&g, &state).unwrap();
        let members: Vec<usize> = kappa.iter().collect();
        assert!(g.is_independent(&members));
        // Stage one must still serve the critical pair.
        let verts = g.resolve(&kappa);
        assert!(verts.contains(&v(2, 1, 1)));
        assert!(verts.contains(&v(3, 4, 1)));
    }

    #[test]
    fn pcb_selection_examples() {
        let fx = Fixture::line();
        let state = fx.state(1, 1);
        let g = IdncGraph::build(&fx.y, &fx.f).unwrap();
        let pcb = PcbScheduler::new(SelectionConfig::exact());
        // Both two-vertex sets serve two devices; the reception tie-break
        // favors {v(2,1,1), v(3,4,1)} at 1.75 over 1.66.
        let kappa = pcb.select(&g, &state).unwrap();
        assert_eq!(g.resolve(&kappa), vec![v(2, 1, 1), v(3, 4, 1)]);

        // Empty graph: empty set.
        let f = StatusMatrix::from_rows(vec![vec![0; 3]; 4]).unwrap();
        let g = IdncGraph::build(&fx.y, &f).unwrap();
        let state = SlotState { y: &fx.y, f: &f, delta: &fx.delta, clock: state.clock };
        assert!(pcb.select(&g, &state).unwrap().is_empty());
    }

    #[test]
    fn pcb_cardinality_dominates_weight() {
        // The chosen set always has maximum cardinality among maximal sets.
        let fx = Fixture::line();
        let state = fx.state(1, 1);
        let g = IdncGraph::build(&fx.y, &fx.f).unwrap();
        let pcb = PcbScheduler::new(SelectionConfig::exact());
        let kappa = pcb.select(&g, &state).unwrap();
        let best_size = g
            .maximal_independent_sets()
            .unwrap()
            .iter()
            .map(IndependentSet::len)
            .max()
            .unwrap();
        assert_eq!(kappa.len(), best_size);
    }

    #[test]
    fn fcd_selection_examples() {
        let fx = Fixture::line();
        let state = fx.state(1, 1);
        let g = IdncGraph::build(&fx.y, &fx.f).unwrap();
        let fcd = FcdScheduler::new(SelectionConfig::exact());
        // Transmitter R3 serves both its vertices for 0.75 + 0.91 = 1.66,
        // beating R1 (0.84) and R2 (0.84).
        let kappa = fcd.select(&g, &state).unwrap();
        assert_eq!(g.resolve(&kappa), vec![v(3, 2, 2), v(3, 4, 1)]);
        let members: Vec<usize> = kappa.iter().collect();
        assert!(g.is_independent(&members));
    }

    #[test]
    fn fcd_single_vertex_and_tie_break() {
        let y = fixtures::full_mesh(2, 0.5);
        let f = StatusMatrix::from_rows(vec![vec![0, 0], vec![1, 0]]).unwrap();
        let delta = ImportanceMatrix::uniform(2, 2, 1.0);
        let clock = SessionClock::new(1, 1).unwrap();
        let state = SlotState { y: &y, f: &f, delta: &delta, clock };
        let g = IdncGraph::build(&y, &f).unwrap();
        let fcd = FcdScheduler::new(SelectionConfig::exact());
        assert_eq!(fcd.select(&g, &state).unwrap().len(), 1);

        // Three transmitters can serve R2 with the one packet at identical
        // weight; the lowest-indexed transmitter is kept.
        let y = fixtures::full_mesh(4, 0.5);
        let f = StatusMatrix::from_rows(vec![vec![0], vec![1], vec![0], vec![0]]).unwrap();
        let delta = ImportanceMatrix::uniform(4, 1, 1.0);
        let state = SlotState { y: &y, f: &f, delta: &delta, clock };
        let g = IdncGraph::build(&y, &f).unwrap();
        let kappa = fcd.select(&g, &state).unwrap();
        let verts = g.resolve(&kappa);
        assert_eq!(verts.len(), 1);
        assert_eq!(verts[0].tx, DeviceId(0));
    }

    #[test]
    fn registry_knows_all_heuristics() {
        for name in ["tsmis", "pcb", "fcd"] {
            assert!(heuristic_by_name(name, SelectionConfig::default()).is_some());
        }
        assert!(heuristic_by_name("nope", SelectionConfig::default()).is_none());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn cdf_monotonicity(w in 1u32..=6, q in 0u32..=10, eps in 0.0f64..0.95) {
            let base = completion_cdf(w, q, eps);
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&base));
            prop_assert!(completion_cdf(w, q + 1, eps) >= base - 1e-12);
            prop_assert!(completion_cdf(w + 1, q, eps) <= base + 1e-12);
            prop_assert!(completion_cdf(w, q, (eps + 0.04).min(0.99)) <= base + 1e-12);
        }

        #[test]
        fn schedulers_return_independent_sets(seed in 0u64..300, theta in 1u32..=6) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let m = rng.gen_range(2..=5usize);
            let n = rng.gen_range(1..=4usize);
            let (y, f) = crate::sim::test_support::random_instance(&mut rng, m, n);
            let delta = ImportanceMatrix::uniform(m, n, 1.0);
            let clock = SessionClock::new(theta, 1).unwrap();
            let state = SlotState { y: &y, f: &f, delta: &delta, clock };
            let g = IdncGraph::build(&y, &f).unwrap();
            for cfg in [SelectionConfig::exact(), SelectionConfig::greedy()] {
                for name in ["tsmis", "pcb", "fcd"] {
                    let s = heuristic_by_name(name, cfg).unwrap();
                    let kappa = s.select(&g, &state).unwrap();
                    let members: Vec<usize> = kappa.iter().collect();
                    prop_assert!(g.is_independent(&members), "{} violated independence", name);
                }
            }
        }
    }
}
