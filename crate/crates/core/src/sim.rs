//! The tick-based attack/defense simulation engine.
//!
//! A [`WorldState`] holds a fixed population of network [`Node`]s wired into
//! a connected random geometric topology, a fixed roster of [`Threat`]
//! agents, and a [`ControlCentre`] with a per-tick action budget. Each call
//! to [`step`] advances one tick through a fixed phase order:
//!
//! 1. cooldowns tick down and idle threats acquire targets,
//! 2. threats attack (ascending threat id), accumulating progress and
//!    breaching when progress reaches the target's threshold,
//! 3. malware breach-points spread laterally to healthy neighbours,
//! 4. the control centre spends its budget healing the oldest infections
//!    first, then neutralizing the most advanced active threats,
//! 5. adaptive defenses adjust when a check is due,
//! 6. per-tick metrics are recorded.
//!
//! All randomness comes from one ChaCha8 stream seeded per run, and every
//! phase iterates in a fixed order, so a `(spec, seed)` pair always yields an
//! identical trajectory. The documented draw order is: world setup consumes
//! `2·nodes` position draws, then one defense draw per node (random mode
//! only), then level and kind draws per threat; each tick consumes one
//! target draw per eligible threat (phase 1, ascending id) and, per infected
//! breach-point with at least one healthy neighbour (phase 3, ascending
//! id), one spread draw plus one neighbour draw on success.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{defaults, AdaptationPolicy, DefenseMode, ScenarioSpec};

/// Lowest node defense level.
pub const MIN_DEFENSE: u8 = 1;
/// Highest node defense level.
pub const MAX_DEFENSE: u8 = 5;
/// Lowest threat severity level.
pub const MIN_THREAT_LEVEL: u8 = 1;
/// Highest threat severity level.
pub const MAX_THREAT_LEVEL: u8 = 3;

/// The three modelled attack categories.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThreatKind {
    /// Breaches install an infection that can spread to neighbours.
    Malware,
    /// Faces a halved (rounded-up) effective defense level and re-targets
    /// every tick.
    Phishing,
    /// Standard pressure attack; no special rule.
    Ddos,
}

/// How a node became infected.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InfectionSource {
    /// Direct breach by a threat of the given kind.
    Breach(ThreatKind),
    /// Lateral malware spread from a neighbour.
    Lateral,
}

/// An active infection on a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Infection {
    /// Tick on which the infection landed.
    pub since: u64,
    /// Whether it came from a direct breach or lateral spread. Only nodes
    /// breached directly by malware act as spread sources.
    pub source: InfectionSource,
}

/// One network host.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    /// Current defense level in `MIN_DEFENSE..=MAX_DEFENSE`.
    pub defense_level: u8,
    /// `None` while healthy.
    pub infection: Option<Infection>,
    /// Adjacent node ids, ascending.
    pub neighbors: Vec<usize>,
}

impl Node {
    /// Whether the node currently carries no infection.
    pub fn is_healthy(&self) -> bool {
        self.infection.is_none()
    }
}

/// One attacking agent.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Threat {
    pub id: usize,
    pub kind: ThreatKind,
    /// Severity in `MIN_THREAT_LEVEL..=MAX_THREAT_LEVEL`; progress per
    /// attack tick.
    pub level: u8,
    /// Node currently under attack, if any.
    pub target: Option<usize>,
    /// Accumulated attack progress against the current target.
    pub progress: u32,
    /// Remaining ticks in post-breach / post-neutralization cooldown.
    pub cooldown: u32,
}

/// The defender's shared response capacity.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlCentre {
    /// Actions (heal or neutralize) available per tick.
    pub response_rate: u32,
    /// Actions used during the current tick; reset each tick.
    pub actions_spent: u32,
}

/// Full mutable simulation state.
#[derive(Clone, Debug)]
pub struct WorldState {
    /// Completed ticks so far; also the tick index the next `step` executes.
    pub tick: u64,
    pub nodes: Vec<Node>,
    pub threats: Vec<Threat>,
    pub control: ControlCentre,
    /// The single random stream behind all stochastic decisions.
    pub rng: ChaCha8Rng,
    /// Overall health recorded at the end of each completed tick.
    pub health_history: Vec<f64>,
}

/// Metrics recorded at the end of each tick (after control-centre actions).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TickMetrics {
    pub tick: u64,
    pub infected: usize,
    pub healthy: usize,
    /// Threats that are off cooldown and have a target.
    pub active_threats: usize,
    pub mean_defense: f64,
    /// Fraction of nodes healthy, in `[0, 1]`.
    pub health: f64,
}

/// Aggregates of one completed run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    /// Highest simultaneous infection count.
    pub peak_infected: usize,
    /// Infection count at the final tick.
    pub final_infected: usize,
    /// Mean overall health across ticks (1.0 for zero-tick runs).
    pub mean_health: f64,
    /// First tick from which the infection count stayed zero: `Some(0)` if
    /// nothing was ever infected, `None` if infections persisted to the end.
    pub time_to_containment: Option<u64>,
}

/// A completed run: configuration identity, per-tick series, and summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub scenario: String,
    pub seed: u64,
    pub ticks: Vec<TickMetrics>,
    pub summary: RunSummary,
}

/// Fraction of nodes currently healthy.
pub fn overall_health(world: &WorldState) -> f64 {
    let healthy = world.nodes.iter().filter(|n| n.is_healthy()).count();
    healthy as f64 / world.nodes.len() as f64
}

/// Progress a threat must accumulate to breach a node at `defense_level`.
///
/// Phishing halves the effective defense (rounded up), modelling attacks on
/// the operator rather than the hardening.
pub fn breach_threshold(kind: ThreatKind, defense_level: u8, breach_factor: u32) -> u32 {
    let effective = match kind {
        ThreatKind::Phishing => defense_level.div_ceil(2),
        ThreatKind::Malware | ThreatKind::Ddos => defense_level,
    };
    u32::from(effective) * breach_factor
}

// ---------------------------------------------------------------------------
// World construction
// ---------------------------------------------------------------------------

/// Minimal union-find for stitching topology components together.
struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

/// Builds the starting world for a validated spec and seed.
///
/// Topology: each node gets a uniform position in the unit square and an
/// undirected edge to its `min(4, n-1)` nearest neighbours; if that graph is
/// disconnected, the closest inter-component pairs are bridged until the
/// network is connected.
pub fn init_world(spec: &ScenarioSpec, seed: u64) -> Result<WorldState> {
    spec.validate()?;
    let n = spec.node_count;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let positions: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
        .collect();
    let dist2 = |a: usize, b: usize| {
        let (dx, dy) = (
            positions[a].0 - positions[b].0,
            positions[a].1 - positions[b].1,
        );
        dx * dx + dy * dy
    };

    let k = 4.min(n - 1);
    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    for i in 0..n {
        let mut by_distance: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (dist2(i, j), j))
            .collect();
        by_distance.sort_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
        for &(_, j) in by_distance.iter().take(k) {
            edges.insert((i.min(j), i.max(j)));
        }
    }

    let mut uf = UnionFind::new(n);
    for &(a, b) in &edges {
        uf.union(a, b);
    }
    loop {
        let roots: BTreeSet<usize> = (0..n).map(|i| uf.find(i)).collect();
        if roots.len() <= 1 {
            break;
        }
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..n {
            for j in (i + 1)..n {
                if uf.find(i) != uf.find(j) {
                    let d = dist2(i, j);
                    let candidate = (d, i, j);
                    if best.is_none_or(|b| candidate < b) {
                        best = Some(candidate);
                    }
                }
            }
        }
        let (_, i, j) = best.expect("disconnected graph has a bridging pair");
        edges.insert((i, j));
        uf.union(i, j);
    }

    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(a, b) in &edges {
        neighbors[a].push(b);
        neighbors[b].push(a);
    }
    for list in &mut neighbors {
        list.sort_unstable();
    }

    let nodes: Vec<Node> = neighbors
        .into_iter()
        .enumerate()
        .map(|(id, neighbors)| {
            let defense_level = match spec.defense_mode {
                DefenseMode::Fixed(level) => level,
                DefenseMode::UniformRandom => rng.random_range(MIN_DEFENSE..=MAX_DEFENSE),
                DefenseMode::Adaptive => defaults::ADAPTIVE_INITIAL_DEFENSE,
            };
            Node {
                id,
                defense_level,
                infection: None,
                neighbors,
            }
        })
        .collect();

    let threats: Vec<Threat> = (0..spec.threat_count)
        .map(|id| {
            let level = rng.random_range(MIN_THREAT_LEVEL..=MAX_THREAT_LEVEL);
            let kind = match rng.random_range(0..3) {
                0 => ThreatKind::Malware,
                1 => ThreatKind::Phishing,
                _ => ThreatKind::Ddos,
            };
            Threat {
                id,
                kind,
                level,
                target: None,
                progress: 0,
                cooldown: 0,
            }
        })
        .collect();

    Ok(WorldState {
        tick: 0,
        nodes,
        threats,
        control: ControlCentre {
            response_rate: spec.response_rate,
            actions_spent: 0,
        },
        rng,
        health_history: Vec::new(),
    })
}

// ---------------------------------------------------------------------------
// Tick phases
// ---------------------------------------------------------------------------

/// Phase 1: ticks down cooldowns and assigns targets.
///
/// A threat whose cooldown just reached zero re-engages on this same tick.
/// Phishing threats re-target uniformly every tick (keeping accumulated
/// progress); malware and DDoS keep their target until it is resolved.
/// Targets are drawn uniformly from healthy nodes, falling back to all
/// nodes when none are healthy.
fn acquire_targets(world: &mut WorldState) {
    let healthy: Vec<usize> = world
        .nodes
        .iter()
        .filter(|n| n.is_healthy())
        .map(|n| n.id)
        .collect();
    let total = world.nodes.len();
    for threat in &mut world.threats {
        if threat.cooldown > 0 {
            threat.cooldown -= 1;
        }
        if threat.cooldown > 0 {
            continue;
        }
        let wants_target = match threat.kind {
            ThreatKind::Phishing => true,
            ThreatKind::Malware | ThreatKind::Ddos => threat.target.is_none(),
        };
        if wants_target {
            let target = if healthy.is_empty() {
                world.rng.random_range(0..total)
            } else {
                healthy[world.rng.random_range(0..healthy.len())]
            };
            threat.target = Some(target);
        }
    }
}

/// Phase 2 kernel: one attack tick of `threat` against `node`.
///
/// Adds the threat's level to its progress and, if progress reaches the
/// node's breach threshold, infects the node and sends the threat into
/// cooldown with its target and progress cleared. Returns `true` on breach.
///
/// Callers must ensure the threat is off cooldown, targeting `node`, and
/// `node` is healthy.
pub fn resolve_attack_step(
    threat: &mut Threat,
    node: &mut Node,
    spec: &ScenarioSpec,
    tick: u64,
) -> bool {
    debug_assert_eq!(threat.cooldown, 0);
    debug_assert_eq!(threat.target, Some(node.id));
    debug_assert!(node.is_healthy());

    threat.progress += u32::from(threat.level);
    let threshold = breach_threshold(threat.kind, node.defense_level, spec.breach_factor);
    if threat.progress >= threshold {
        node.infection = Some(Infection {
            since: tick,
            source: InfectionSource::Breach(threat.kind),
        });
        threat.progress = 0;
        threat.cooldown = spec.respawn_delay;
        threat.target = None;
        true
    } else {
        false
    }
}

/// Phase 2: every engaged threat attacks, in ascending threat id order.
/// Threats whose target is currently infected idle and keep their progress.
fn run_attacks(world: &mut WorldState, spec: &ScenarioSpec) {
    let tick = world.tick;
    for ti in 0..world.threats.len() {
        let Some(target) = world.threats[ti].target else {
            continue;
        };
        if world.threats[ti].cooldown > 0 || !world.nodes[target].is_healthy() {
            continue;
        }
        let threat = &mut world.threats[ti];
        let node = &mut world.nodes[target];
        resolve_attack_step(threat, node, spec, tick);
    }
}

/// Phase 3: each node directly breached by malware tries to infect one
/// healthy neighbour with probability `spread_prob`, in ascending node id
/// order. Laterally infected nodes do not spread further, and sources with
/// no healthy neighbour consume no randomness.
pub fn spread_malware(world: &mut WorldState, spec: &ScenarioSpec) {
    let tick = world.tick;
    for i in 0..world.nodes.len() {
        let is_source = matches!(
            world.nodes[i].infection,
            Some(Infection {
                source: InfectionSource::Breach(ThreatKind::Malware),
                ..
            })
        );
        if !is_source {
            continue;
        }
        let healthy_neighbors: Vec<usize> = world.nodes[i]
            .neighbors
            .iter()
            .copied()
            .filter(|&j| world.nodes[j].is_healthy())
            .collect();
        if healthy_neighbors.is_empty() {
            continue;
        }
        if world.rng.random::<f64>() < spec.spread_prob {
            let pick = healthy_neighbors[world.rng.random_range(0..healthy_neighbors.len())];
            world.nodes[pick].infection = Some(Infection {
                since: tick,
                source: InfectionSource::Lateral,
            });
        }
    }
}

/// Phase 4: the control centre spends its per-tick budget.
///
/// Heals infected nodes first, oldest infection first (ties broken by lowest
/// node id). Once nothing is infected, it neutralizes active threats in
/// descending progress order (ties broken by lowest threat id), resetting
/// their progress and sending them into cooldown. Stops early when no action
/// is available.
pub fn control_centre_act(world: &mut WorldState, spec: &ScenarioSpec) {
    world.control.actions_spent = 0;
    while world.control.actions_spent < world.control.response_rate {
        let oldest_infected = world
            .nodes
            .iter()
            .filter_map(|n| n.infection.map(|inf| (inf.since, n.id)))
            .min()
            .map(|(_, id)| id);
        if let Some(id) = oldest_infected {
            world.nodes[id].infection = None;
            world.control.actions_spent += 1;
            continue;
        }

        let mut best: Option<usize> = None;
        for (i, threat) in world.threats.iter().enumerate() {
            if threat.cooldown == 0 && threat.target.is_some() {
                let better = match best {
                    None => true,
                    Some(b) => threat.progress > world.threats[b].progress,
                };
                if better {
                    best = Some(i);
                }
            }
        }
        match best {
            Some(i) => {
                let threat = &mut world.threats[i];
                threat.progress = 0;
                threat.cooldown = spec.respawn_delay;
                threat.target = None;
                world.control.actions_spent += 1;
            }
            None => break,
        }
    }
}

/// Phase 5: one adaptation check (call only when a check is due).
///
/// Raises every node's defense by one (clamped to `MAX_DEFENSE`) if overall
/// health dipped below `raise_threshold` at any point since the previous
/// check — the instantaneous health right now included, so a dip is never
/// missed between checks. Otherwise, lowers every defense by one (clamped to
/// `MIN_DEFENSE`) if recorded health stayed strictly above `lower_threshold`
/// for the last `lower_dwell` ticks.
pub fn adapt_defenses(world: &mut WorldState, policy: &AdaptationPolicy) {
    let current = overall_health(world);
    let window_start = world
        .health_history
        .len()
        .saturating_sub(policy.interval as usize);
    let min_recent = world.health_history[window_start..]
        .iter()
        .copied()
        .fold(current, f64::min);

    if min_recent < policy.raise_threshold {
        for node in &mut world.nodes {
            node.defense_level = (node.defense_level + 1).min(MAX_DEFENSE);
        }
        return;
    }

    let dwell = policy.lower_dwell as usize;
    if world.health_history.len() >= dwell
        && world.health_history[world.health_history.len() - dwell..]
            .iter()
            .all(|&h| h > policy.lower_threshold)
    {
        for node in &mut world.nodes {
            node.defense_level = (node.defense_level - 1).max(MIN_DEFENSE);
        }
    }
}

/// Advances the world by exactly one tick and returns its metrics.
pub fn step(world: &mut WorldState, spec: &ScenarioSpec) -> TickMetrics {
    acquire_targets(world);
    run_attacks(world, spec);
    spread_malware(world, spec);
    control_centre_act(world, spec);

    if spec.defense_mode == DefenseMode::Adaptive {
        if let Some(policy) = &spec.adaptation {
            if world.tick > 0 && world.tick.is_multiple_of(policy.interval) {
                adapt_defenses(world, policy);
            }
        }
    }

    let infected = world.nodes.iter().filter(|n| !n.is_healthy()).count();
    let total = world.nodes.len();
    let metrics = TickMetrics {
        tick: world.tick,
        infected,
        healthy: total - infected,
        active_threats: world
            .threats
            .iter()
            .filter(|t| t.cooldown == 0 && t.target.is_some())
            .count(),
        mean_defense: world
            .nodes
            .iter()
            .map(|n| f64::from(n.defense_level))
            .sum::<f64>()
            / total as f64,
        health: (total - infected) as f64 / total as f64,
    };
    world.health_history.push(metrics.health);
    world.tick += 1;
    metrics
}

/// Runs a full scenario: builds the world and advances `tick_limit` ticks.
pub fn run(spec: &ScenarioSpec, seed: u64) -> Result<SimResult> {
    let mut world = init_world(spec, seed)?;
    let mut ticks = Vec::with_capacity(spec.tick_limit as usize);
    for _ in 0..spec.tick_limit {
        ticks.push(step(&mut world, spec));
    }
    let summary = summarize(&ticks);
    Ok(SimResult {
        scenario: spec.name.clone(),
        seed,
        ticks,
        summary,
    })
}

/// Derives run aggregates from a per-tick series.
pub fn summarize(ticks: &[TickMetrics]) -> RunSummary {
    let peak_infected = ticks.iter().map(|t| t.infected).max().unwrap_or(0);
    let final_infected = ticks.last().map(|t| t.infected).unwrap_or(0);
    let mean_health = if ticks.is_empty() {
        1.0
    } else {
        ticks.iter().map(|t| t.health).sum::<f64>() / ticks.len() as f64
    };
    let time_to_containment = match ticks.iter().rposition(|t| t.infected > 0) {
        None => Some(0),
        Some(last) if last + 1 == ticks.len() => None,
        Some(last) => Some(last as u64 + 1),
    };
    RunSummary {
        peak_infected,
        final_infected,
        mean_health,
        time_to_containment,
    }
}

/// Convenience check used by tests and the error contract: `Err` when two
/// worlds differ structurally (nodes, threats, control state, or tick).
pub fn assert_structurally_equal(a: &WorldState, b: &WorldState) -> Result<()> {
    if a.tick != b.tick
        || a.nodes != b.nodes
        || a.threats != b.threats
        || a.control != b.control
        || a.health_history != b.health_history
    {
        return Err(Error::Config("worlds differ structurally".into()));
    }
    Ok(())
}
