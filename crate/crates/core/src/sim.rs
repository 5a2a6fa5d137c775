//! Seeded, reproducible episode engine and Monte-Carlo aggregation.
//!
//! Every random draw comes from a counter-based ChaCha stream keyed by the
//! master seed, so a `(config, seed)` pair fully determines every transcript
//! and schedulers never perturb each other's randomness:
//!
//! - stream `u64::MAX` — scenario generation (the connectivity matrix);
//! - stream `episode·2³² + 0xFFFF_FFFF` — the episode's initial holdings;
//! - stream `episode·2³² + slot·2¹⁶ + device` — the channel uniform for that
//!   device in that slot.
//!
//! Keying channel draws by (episode, slot, targeted device) gives common
//! random numbers across schedulers: two policies targeting the same device
//! in the same slot face the same uniform, so paired comparisons subtract
//! most of the Monte-Carlo noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphError, IdncGraph, IndependentSet, Vertex};
use crate::mdp::{MdpGuards, MdpScheduler};
use crate::model::{
    individual_distortion, ConnectivityMatrix, DeviceId, ImportanceMatrix, ModelError,
    SessionClock, StatusMatrix,
};
use crate::scheduling::{heuristic_by_name, Scheduler, SchedulerError, SelectionConfig, SlotState};
use crate::video::{GopModel, QualityReport, VideoError};

const CONNECTIVITY_TOLERANCE: f64 = 0.02;
const SIDE_INFO_STREAM: u64 = 0xFFFF_FFFF;
const SCENARIO_STREAM: u64 = u64::MAX;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidConfig(String),
    #[error(
        "connectivity target {target} infeasible for m={m} within ±{tolerance} \
         (best achieved {achieved})"
    )]
    ConnectivityTargetInfeasible {
        target: f64,
        achieved: f64,
        m: usize,
        tolerance: f64,
    },
    #[error("scheduler '{0}' is unknown; expected tsmis, pcb, fcd or mdp")]
    UnknownScheduler(String),
    #[error("slot {slot}: scheduler '{scheduler}' returned a conflicting set: {report}")]
    ConflictViolation {
        scheduler: String,
        slot: u32,
        report: ConflictReport,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Video(#[from] VideoError),
    #[error("slot {slot}: {source}")]
    Scheduler {
        slot: u32,
        #[source]
        source: SchedulerError,
    },
}

/// Scenario description: everything needed to regenerate a simulation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Device count M.
    pub m: usize,
    /// Layered GOP supplying N and the importance weights.
    #[serde(default = "GopModel::default_four_layer")]
    pub gop: GopModel,
    /// Slot budget Θ of the repair phase.
    pub theta: u32,
    /// Target average connectivity index ȳ.
    pub target_connectivity: f64,
    /// Reception probability range for direct links.
    #[serde(default = "default_reception_range")]
    pub reception_range: (f64, f64),
    /// Fraction range of packets each device holds initially.
    #[serde(default = "default_side_info_range")]
    pub side_info_range: (f64, f64),
    /// Master seed; every stream derives from it.
    pub seed: u64,
}

fn default_reception_range() -> (f64, f64) {
    (0.65, 0.9)
}

fn default_side_info_range() -> (f64, f64) {
    (0.45, 0.55)
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.m < 2 {
            return Err(SimError::InvalidConfig("need at least 2 devices".into()));
        }
        if self.m >= 1 << 16 {
            return Err(SimError::InvalidConfig("device count exceeds 65535".into()));
        }
        if self.theta >= 1 << 16 {
            return Err(SimError::InvalidConfig("theta exceeds 65535".into()));
        }
        let (lo, hi) = self.reception_range;
        if !(0.0 < lo && lo <= hi && hi <= 1.0) {
            return Err(SimError::InvalidConfig(format!(
                "reception range ({lo}, {hi}) must satisfy 0 < lo <= hi <= 1"
            )));
        }
        if !(0.0 < self.target_connectivity && self.target_connectivity <= 1.0) {
            return Err(SimError::InvalidConfig(
                "target connectivity must lie in (0, 1]".into(),
            ));
        }
        let (slo, shi) = self.side_info_range;
        if !(0.0 < slo && slo <= shi && shi < 1.0) {
            return Err(SimError::InvalidConfig(format!(
                "side-info range ({slo}, {shi}) must satisfy 0 < lo <= hi < 1"
            )));
        }
        let n = self.gop.packet_count();
        if lowest_count(slo, n) > highest_count(shi, n) {
            return Err(SimError::InvalidConfig(format!(
                "side-info range ({slo}, {shi}) admits no integer count for {n} packets"
            )));
        }
        Ok(())
    }
}

fn lowest_count(frac: f64, n: usize) -> usize {
    (frac * n as f64).ceil() as usize
}

fn highest_count(frac: f64, n: usize) -> usize {
    (frac * n as f64).floor() as usize
}

/// A fully prepared instance: generated (or supplied) connectivity plus the
/// importance weights from the GOP model.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub cfg: ScenarioConfig,
    pub y: ConnectivityMatrix,
    pub delta: ImportanceMatrix,
}

impl Scenario {
    /// Generates the connectivity matrix from the config and derives the
    /// importance weights.
    pub fn prepare(cfg: ScenarioConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(SCENARIO_STREAM);
        let y = generate_scm(&cfg, &mut rng)?;
        let delta = cfg.gop.importance_matrix(cfg.m);
        Ok(Scenario { cfg, y, delta })
    }

    /// Wraps an explicit connectivity matrix, bypassing generation; used for
    /// fixture topologies.
    pub fn with_connectivity(cfg: ScenarioConfig, y: ConnectivityMatrix) -> Result<Self, SimError> {
        if y.device_count() != cfg.m {
            return Err(SimError::InvalidConfig(format!(
                "connectivity matrix has {} devices, config says {}",
                y.device_count(),
                cfg.m
            )));
        }
        let delta = cfg.gop.importance_matrix(cfg.m);
        Ok(Scenario { cfg, y, delta })
    }
}

/// Builds a scheduler by registry name. "mdp" returns the caching
/// backward-induction policy, which respects the given guards.
pub fn build_scheduler(
    name: &str,
    scenario: &Scenario,
    cfg: SelectionConfig,
    guards: MdpGuards,
) -> Result<Box<dyn Scheduler>, SimError> {
    if name == "mdp" {
        return Ok(Box::new(MdpScheduler::new(
            scenario.y.clone(),
            scenario.delta.clone(),
            guards,
        )));
    }
    heuristic_by_name(name, cfg).ok_or_else(|| SimError::UnknownScheduler(name.to_string()))
}

/// Random connected topology matching the target connectivity index.
///
/// A random spanning tree guarantees connectivity; random links are then
/// added while the index sits below the tolerance window and non-tree links
/// removed while it sits above, with range-clamped rescaling of the link
/// probabilities in between. Targets that no in-range link assignment can
/// reach produce an error.
pub fn generate_scm(
    cfg: &ScenarioConfig,
    rng: &mut impl Rng,
) -> Result<ConnectivityMatrix, SimError> {
    let m = cfg.m;
    let mf = (m * m) as f64;
    let (lo, hi) = cfg.reception_range;
    let target = cfg.target_connectivity;
    let tol = CONNECTIVITY_TOLERANCE;

    let mut order: Vec<usize> = (0..m).collect();
    for i in (1..m).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let mut y = vec![0.0f64; m * m];
    for i in 0..m {
        y[i * m + i] = 1.0;
    }
    let mut tree = vec![false; m * m];
    // Random recursive tree keeps the topology connected from the start.
    for idx in 1..m {
        let a = order[idx];
        let b = order[rng.gen_range(0..idx)];
        let p = rng.gen_range(lo..=hi);
        y[a * m + b] = p;
        y[b * m + a] = p;
        tree[a * m + b] = true;
        tree[b * m + a] = true;
    }

    let index = |y: &[f64]| y.iter().sum::<f64>() / mf;
    // Each iteration adds or removes one link, so 2·m² steps either converge
    // or prove the window unreachable.
    for _ in 0..2 * m * m {
        let achieved = index(&y);
        if (achieved - target).abs() <= tol {
            break;
        }
        if achieved < target - tol {
            let absent: Vec<(usize, usize)> = (0..m)
                .flat_map(|i| (i + 1..m).map(move |k| (i, k)))
                .filter(|&(i, k)| y[i * m + k] == 0.0)
                .collect();
            if absent.is_empty() {
                rescale_links(&mut y, m, target, lo, hi);
                break;
            }
            let (i, k) = absent[rng.gen_range(0..absent.len())];
            // Aim the new link at the window when a uniform draw would
            // overshoot past it.
            let mut p = rng.gen_range(lo..=hi);
            if achieved + 2.0 * p / mf > target + tol {
                p = ((target - achieved) * mf / 2.0).clamp(lo, hi);
            }
            y[i * m + k] = p;
            y[k * m + i] = p;
        } else {
            rescale_links(&mut y, m, target, lo, hi);
            if (index(&y) - target).abs() <= tol {
                break;
            }
            // Still too dense with every link at the bottom of the range:
            // drop a random non-tree link.
            let removable: Vec<(usize, usize)> = (0..m)
                .flat_map(|i| (i + 1..m).map(move |k| (i, k)))
                .filter(|&(i, k)| y[i * m + k] != 0.0 && !tree[i * m + k])
                .collect();
            if removable.is_empty() {
                break;
            }
            let (i, k) = removable[rng.gen_range(0..removable.len())];
            y[i * m + k] = 0.0;
            y[k * m + i] = 0.0;
        }
    }

    let achieved = index(&y);
    if (achieved - target).abs() > tol {
        return Err(SimError::ConnectivityTargetInfeasible {
            target,
            achieved,
            m,
            tolerance: tol,
        });
    }
    Ok(ConnectivityMatrix::new(m, y)?)
}

/// Scales every existing link toward the target index, clamping into the
/// reception range.
fn rescale_links(y: &mut [f64], m: usize, target: f64, lo: f64, hi: f64) {
    let mf = (m * m) as f64;
    let desired_offdiag = target * mf - m as f64;
    let current_offdiag: f64 = y.iter().sum::<f64>() - m as f64;
    if current_offdiag <= 0.0 || desired_offdiag <= 0.0 {
        return;
    }
    let alpha = desired_offdiag / current_offdiag;
    for i in 0..m {
        for k in 0..m {
            if i != k && y[i * m + k] != 0.0 {
                y[i * m + k] = (y[i * m + k] * alpha).clamp(lo, hi);
            }
        }
    }
}

/// Initial holdings: each device independently keeps a uniform subset whose
/// size is uniform over the side-info range, then packets missing everywhere
/// are repaired onto a random device.
pub fn seed_initial_gsm(cfg: &ScenarioConfig, rng: &mut impl Rng) -> StatusMatrix {
    let m = cfg.m;
    let n = cfg.gop.packet_count();
    let lo = lowest_count(cfg.side_info_range.0, n);
    let hi = highest_count(cfg.side_info_range.1, n);
    let mut f = vec![1u8; m * n];
    let mut pool: Vec<usize> = (0..n).collect();
    for k in 0..m {
        let count = rng.gen_range(lo..=hi);
        // Partial Fisher-Yates: the first `count` entries become the subset.
        for i in 0..count {
            let j = rng.gen_range(i..n);
            pool.swap(i, j);
        }
        for &l in &pool[..count] {
            f[k * n + l] = 0;
        }
    }
    for l in 0..n {
        if (0..m).all(|k| f[k * n + l] == 1) {
            let k = rng.gen_range(0..m);
            f[k * n + l] = 0;
        }
    }
    StatusMatrix::new(m, n, f).expect("seeded holdings satisfy the coverage invariant")
}

/// Outcome of checking a decision against the slot's graph.
#[derive(Clone, Debug, Default, Serialize)]
pub struct ConflictReport {
    pub violations: Vec<(Vertex, Vertex, crate::graph::ConflictRule)>,
}

impl ConflictReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl std::fmt::Display for ConflictReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_ok() {
            return write!(f, "conflict-free");
        }
        let items: Vec<String> = self
            .violations
            .iter()
            .map(|(a, b, rule)| format!("{a} -- {b} [{rule}]"))
            .collect();
        write!(f, "{}", items.join(", "))
    }
}

/// Checks pairwise non-adjacency of a decision, naming the violated rule of
/// every conflicting pair.
pub fn validate_conflict_free(kappa: &IndependentSet, g: &IdncGraph) -> ConflictReport {
    let members: Vec<usize> = kappa.iter().collect();
    let mut report = ConflictReport::default();
    for (i, &u) in members.iter().enumerate() {
        for &v in &members[i + 1..] {
            if let Some(rule) = g.conflict(u, v) {
                report.violations.push((g.vertex(u), g.vertex(v), rule));
            }
        }
    }
    report
}

/// Channel randomness for one slot of one episode: a uniform per targeted
/// device, independent of what any scheduler decides.
pub struct SlotChannel {
    seed: u64,
    episode: u64,
    slot: u32,
}

impl SlotChannel {
    pub fn new(seed: u64, episode: u64, slot: u32) -> Self {
        SlotChannel { seed, episode, slot }
    }

    pub fn uniform(&self, rx: DeviceId) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream((self.episode << 32) | ((self.slot as u64) << 16) | rx.0 as u64);
        rng.gen::<f64>()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TargetOutcome {
    pub vertex: Vertex,
    pub received: bool,
}

/// Applies a validated decision: each targeted device receives its packet
/// iff its channel uniform clears the link erasure. Untargeted rows are
/// untouched.
pub fn apply_slot(
    f: &StatusMatrix,
    kappa: &[Vertex],
    y: &ConnectivityMatrix,
    channel: &SlotChannel,
) -> (StatusMatrix, Vec<TargetOutcome>) {
    let mut next = f.clone();
    let mut outcomes = Vec::with_capacity(kappa.len());
    for v in kappa {
        let received = channel.uniform(v.rx) < y.reception(v.tx, v.rx);
        if received {
            next = next.mark_received(v.rx, v.pkt);
        }
        outcomes.push(TargetOutcome {
            vertex: *v,
            received,
        });
    }
    (next, outcomes)
}

#[derive(Clone, Debug, Serialize)]
pub struct SlotRecord {
    pub slot: u32,
    pub decision: Vec<Vertex>,
    pub outcomes: Vec<TargetOutcome>,
    /// FNV-1a digest of the resulting status matrix.
    pub status_digest: u64,
}

/// Full log of one simulated episode.
#[derive(Clone, Debug, Serialize)]
pub struct EpisodeTranscript {
    pub episode: u64,
    pub slots: Vec<SlotRecord>,
    pub initial_distortion: Vec<f64>,
    pub final_distortion: Vec<f64>,
    pub quality: QualityReport,
    pub mean_final_distortion: f64,
}

fn fnv1a(bytes: impl Iterator<Item = u8>) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn status_digest(f: &StatusMatrix) -> u64 {
    fnv1a(f.devices().flat_map(|k| f.row(k).iter().copied()))
}

fn distortions(f: &StatusMatrix, delta: &ImportanceMatrix) -> Vec<f64> {
    f.devices()
        .map(|k| individual_distortion(f, delta, k))
        .collect()
}

/// Runs one episode: seed holdings, then per slot build the graph, ask the
/// scheduler, validate, apply the channel and log. Stops early once nothing
/// is missing. The per-slot assertions (status monotonicity, nonincreasing
/// distortion, no device in two roles) are always on.
pub fn run_episode(
    scenario: &Scenario,
    scheduler: &dyn Scheduler,
    episode: u64,
) -> Result<EpisodeTranscript, SimError> {
    let f = initial_gsm_for_episode(&scenario.cfg, episode);
    run_episode_from(scenario, scheduler, episode, f)
}

/// The initial holdings an episode starts from, drawn on the episode's
/// side-information stream.
pub fn initial_gsm_for_episode(cfg: &ScenarioConfig, episode: u64) -> StatusMatrix {
    let mut side_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    side_rng.set_stream((episode << 32) | SIDE_INFO_STREAM);
    seed_initial_gsm(cfg, &mut side_rng)
}

/// Episode with an explicit initial status matrix instead of the seeded
/// side-information draw; channel randomness still follows the episode
/// streams.
pub fn run_episode_from(
    scenario: &Scenario,
    scheduler: &dyn Scheduler,
    episode: u64,
    mut f: StatusMatrix,
) -> Result<EpisodeTranscript, SimError> {
    let cfg = &scenario.cfg;
    let initial_distortion = distortions(&f, &scenario.delta);
    let mut prev_distortion = initial_distortion.clone();
    let mut slots = Vec::new();

    for t in 1..=cfg.theta {
        if f.complete() {
            break;
        }
        let clock = SessionClock::new(cfg.theta, t)?;
        let graph = IdncGraph::build(&scenario.y, &f)?;
        let state = SlotState {
            y: &scenario.y,
            f: &f,
            delta: &scenario.delta,
            clock,
        };
        let kappa = scheduler
            .select(&graph, &state)
            .map_err(|source| SimError::Scheduler { slot: t, source })?;
        let report = validate_conflict_free(&kappa, &graph);
        if !report.is_ok() {
            return Err(SimError::ConflictViolation {
                scheduler: scheduler.name().to_string(),
                slot: t,
                report,
            });
        }
        let decision = graph.resolve(&kappa);
        for a in &decision {
            for b in &decision {
                assert_ne!(a.tx, b.rx, "device scheduled to transmit and receive");
            }
        }

        let channel = SlotChannel::new(cfg.seed, episode, t);
        let (next, outcomes) = apply_slot(&f, &decision, &scenario.y, &channel);
        for k in next.devices() {
            for (a, b) in next.row(k).iter().zip(f.row(k)) {
                assert!(a <= b, "status matrix must only flip 1 -> 0");
            }
        }
        let distortion = distortions(&next, &scenario.delta);
        for (d_new, d_old) in distortion.iter().zip(&prev_distortion) {
            assert!(
                *d_new <= d_old + 1e-12,
                "per-device distortion must be nonincreasing"
            );
        }

        slots.push(SlotRecord {
            slot: t,
            decision,
            outcomes,
            status_digest: status_digest(&next),
        });
        f = next;
        prev_distortion = distortion;
    }

    let quality = cfg.gop.quality_report(&f)?;
    let m = cfg.m as f64;
    Ok(EpisodeTranscript {
        episode,
        slots,
        initial_distortion,
        mean_final_distortion: prev_distortion.iter().sum::<f64>() / m,
        final_distortion: prev_distortion,
        quality,
    })
}

/// Compact per-episode result used for aggregation and paired comparisons.
#[derive(Clone, Debug, Serialize)]
pub struct EpisodeSummary {
    pub episode: u64,
    pub mean_distortion: f64,
    pub mean_psnr: f64,
    /// Decodable layer prefix per device.
    pub prefixes: Vec<usize>,
}

/// Monte-Carlo aggregate over independently seeded episodes.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct AggregateResult {
    pub runs: u64,
    pub mean_distortion: f64,
    pub std_distortion: f64,
    pub mean_psnr: f64,
    pub std_psnr: f64,
    /// `psnr_histogram[device][level]` counts episodes in which the device
    /// finished with that decodable layer prefix.
    pub psnr_histogram: Vec<Vec<u64>>,
}

/// Runs `runs` episodes (episodes 0..runs, in parallel) and returns the
/// per-episode summaries in episode order.
pub fn monte_carlo_summaries(
    scenario: &Scenario,
    scheduler: &dyn Scheduler,
    runs: u64,
) -> Result<Vec<EpisodeSummary>, SimError> {
    (0..runs)
        .into_par_iter()
        .map(|episode| {
            let t = run_episode(scenario, scheduler, episode)?;
            Ok(EpisodeSummary {
                episode,
                mean_distortion: t.mean_final_distortion,
                mean_psnr: t.quality.mean_psnr,
                prefixes: t.quality.per_device.iter().map(|d| d.prefix).collect(),
            })
        })
        .collect()
}

/// Aggregates sample mean and standard deviation (n−1) of the final mean
/// distortion and mean PSNR, plus the per-device prefix histogram. The
/// reduction runs in episode order, so results are bit-reproducible.
pub fn monte_carlo(
    scenario: &Scenario,
    scheduler: &dyn Scheduler,
    runs: u64,
) -> Result<AggregateResult, SimError> {
    let summaries = monte_carlo_summaries(scenario, scheduler, runs)?;
    Ok(aggregate(scenario, &summaries))
}

pub fn aggregate(scenario: &Scenario, summaries: &[EpisodeSummary]) -> AggregateResult {
    let runs = summaries.len() as u64;
    let levels = scenario.cfg.gop.layer_count() + 1;
    let mut histogram = vec![vec![0u64; levels]; scenario.cfg.m];
    for s in summaries {
        for (device, &prefix) in s.prefixes.iter().enumerate() {
            histogram[device][prefix] += 1;
        }
    }
    let (mean_d, std_d) = mean_std(summaries.iter().map(|s| s.mean_distortion));
    let (mean_p, std_p) = mean_std(summaries.iter().map(|s| s.mean_psnr));
    AggregateResult {
        runs,
        mean_distortion: mean_d,
        std_distortion: std_d,
        mean_psnr: mean_p,
        std_psnr: std_p,
        psnr_histogram: histogram,
    }
}

fn mean_std(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let values: Vec<f64> = values.collect();
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    /// Random small valid (connectivity, status) instance for property tests.
    pub(crate) fn random_instance(
        rng: &mut impl Rng,
        m: usize,
        n: usize,
    ) -> (ConnectivityMatrix, StatusMatrix) {
        loop {
            let mut y = vec![0.0; m * m];
            for i in 0..m {
                y[i * m + i] = 1.0;
                for k in 0..i {
                    let p = if rng.gen_bool(0.7) {
                        rng.gen_range(0.1..=0.95)
                    } else {
                        0.0
                    };
                    y[i * m + k] = p;
                    y[k * m + i] = p;
                }
            }
            let mut f = vec![0u8; m * n];
            for e in f.iter_mut() {
                *e = u8::from(rng.gen_bool(0.5));
            }
            for l in 0..n {
                let k = rng.gen_range(0..m);
                f[k * n + l] = 0;
            }
            let y = ConnectivityMatrix::new(m, y).unwrap();
            if let Ok(f) = StatusMatrix::new(m, n, f) {
                return (y, f);
            }
        }
    }
}
