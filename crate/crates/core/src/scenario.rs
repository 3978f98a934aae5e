//! Scenario configuration, built-in experiment suites, parameter sweeps, and
//! result export.
//!
//! A [`ScenarioSpec`] fully determines a simulation run together with a seed.
//! Specs can be built in code, loaded from a simple `key = value` text file
//! (see [`parse_scenario`]), or taken from the built-in suites (`s1`..`s4`)
//! that vary one axis each: threat volume, response capacity, defense
//! posture, and adaptive defense.
//!
//! [`sweep`] runs a suite across many seeds in parallel and aggregates
//! per-axis-value statistics; [`write_sweep_csv`] / [`write_timeseries_csv`]
//! export results in a stable column order so repeated runs produce
//! byte-identical files.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{self, RunSummary, SimResult, TickMetrics};

/// Default values for every tunable parameter, in one place.
///
/// `BREACH_FACTOR`, `SPREAD_PROB`, and `RESPAWN_DELAY` jointly set the
/// difficulty balance between attackers and the control centre; the values
/// here were calibrated so that the built-in suites reproduce the expected
/// qualitative regimes (containment at high response rates, saturation under
/// heavy threat volume, monotone effect of defense posture).
pub mod defaults {
    /// Nodes in the network.
    pub const NODE_COUNT: usize = 50;
    /// Simulation length in ticks.
    pub const TICK_LIMIT: u64 = 200;
    /// Number of concurrent threat agents.
    pub const THREAT_COUNT: usize = 10;
    /// Control-centre actions (heal or neutralize) per tick.
    pub const RESPONSE_RATE: u32 = 5;
    /// Scales defense level into a breach threshold.
    pub const BREACH_FACTOR: u32 = 5;
    /// Per-tick probability that an infected breach-point spreads malware.
    pub const SPREAD_PROB: f64 = 0.05;
    /// Cooldown ticks a threat sits out after a breach or neutralization.
    pub const RESPAWN_DELAY: u32 = 1;
    /// Ticks between adaptive-defense checks.
    pub const ADAPT_INTERVAL: u64 = 5;
    /// Raise defenses when health dipped below this since the last check.
    pub const RAISE_THRESHOLD: f64 = 0.8;
    /// Lower defenses when health stayed above this for `LOWER_DWELL` ticks.
    pub const LOWER_THRESHOLD: f64 = 0.95;
    /// Consecutive calm ticks required before lowering defenses.
    pub const LOWER_DWELL: u64 = 10;
    /// Starting defense level for adaptive-mode nodes.
    pub const ADAPTIVE_INITIAL_DEFENSE: u8 = 1;
}

/// How node defense levels are assigned and managed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DefenseMode {
    /// Each node draws a uniform level in `1..=5` at world creation.
    UniformRandom,
    /// Every node holds the given fixed level for the whole run.
    Fixed(u8),
    /// All nodes start at level 1 and move up/down together under the
    /// scenario's [`AdaptationPolicy`].
    Adaptive,
}

/// Parameters of the adaptive-defense controller.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptationPolicy {
    /// Ticks between adaptation checks.
    pub interval: u64,
    /// Raise all defenses if overall health dipped below this value at any
    /// point since the previous check.
    pub raise_threshold: f64,
    /// Lower all defenses if health stayed strictly above this value for the
    /// last `lower_dwell` recorded ticks.
    pub lower_threshold: f64,
    /// Length of the calm streak required before lowering.
    pub lower_dwell: u64,
}

impl Default for AdaptationPolicy {
    fn default() -> Self {
        AdaptationPolicy {
            interval: defaults::ADAPT_INTERVAL,
            raise_threshold: defaults::RAISE_THRESHOLD,
            lower_threshold: defaults::LOWER_THRESHOLD,
            lower_dwell: defaults::LOWER_DWELL,
        }
    }
}

impl AdaptationPolicy {
    fn validate(&self) -> Result<()> {
        if self.interval == 0 {
            return Err(Error::Config("adapt_interval must be at least 1".into()));
        }
        if self.lower_dwell == 0 {
            return Err(Error::Config("lower_dwell must be at least 1".into()));
        }
        if !(self.raise_threshold >= 0.0
            && self.raise_threshold < self.lower_threshold
            && self.lower_threshold <= 1.0)
        {
            return Err(Error::Config(format!(
                "thresholds must satisfy 0 <= raise ({}) < lower ({}) <= 1",
                self.raise_threshold, self.lower_threshold
            )));
        }
        Ok(())
    }
}

/// Complete configuration of one simulation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    /// Human-readable identifier; appears in result rows and file names.
    pub name: String,
    /// Number of nodes in the network (at least 1).
    pub node_count: usize,
    /// Number of ticks to simulate.
    pub tick_limit: u64,
    /// Number of concurrent threat agents.
    pub threat_count: usize,
    /// How defense levels are assigned.
    pub defense_mode: DefenseMode,
    /// Control-centre actions per tick.
    pub response_rate: u32,
    /// Multiplier from (effective) defense level to breach threshold.
    pub breach_factor: u32,
    /// Per-tick malware spread probability per infected breach-point.
    pub spread_prob: f64,
    /// Threat cooldown after a breach or neutralization.
    pub respawn_delay: u32,
    /// Adaptive-defense parameters; required iff `defense_mode` is
    /// [`DefenseMode::Adaptive`].
    pub adaptation: Option<AdaptationPolicy>,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            name: "custom".into(),
            node_count: defaults::NODE_COUNT,
            tick_limit: defaults::TICK_LIMIT,
            threat_count: defaults::THREAT_COUNT,
            defense_mode: DefenseMode::UniformRandom,
            response_rate: defaults::RESPONSE_RATE,
            breach_factor: defaults::BREACH_FACTOR,
            spread_prob: defaults::SPREAD_PROB,
            respawn_delay: defaults::RESPAWN_DELAY,
            adaptation: None,
        }
    }
}

impl ScenarioSpec {
    /// Checks all parameter ranges and cross-field requirements.
    pub fn validate(&self) -> Result<()> {
        if self.node_count == 0 {
            return Err(Error::Config("node_count must be at least 1".into()));
        }
        if self.breach_factor == 0 {
            return Err(Error::Config("breach_factor must be at least 1".into()));
        }
        if !(self.spread_prob >= 0.0 && self.spread_prob <= 1.0) {
            return Err(Error::Config(format!(
                "spread_prob must lie in [0, 1], got {}",
                self.spread_prob
            )));
        }
        match self.defense_mode {
            DefenseMode::Fixed(level) => {
                if !(sim::MIN_DEFENSE..=sim::MAX_DEFENSE).contains(&level) {
                    return Err(Error::Config(format!(
                        "fixed defense level must lie in {}..={}, got {level}",
                        sim::MIN_DEFENSE,
                        sim::MAX_DEFENSE
                    )));
                }
            }
            DefenseMode::Adaptive => {
                if self.adaptation.is_none() {
                    return Err(Error::Config(
                        "defense mode `adaptive` requires an adaptation policy".into(),
                    ));
                }
            }
            DefenseMode::UniformRandom => {}
        }
        if self.adaptation.is_some() && self.defense_mode != DefenseMode::Adaptive {
            return Err(Error::Config(
                "an adaptation policy requires defense mode `adaptive`".into(),
            ));
        }
        if let Some(policy) = &self.adaptation {
            policy.validate()?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Built-in scenario suites
// ---------------------------------------------------------------------------

/// A named family of scenario variants that differ along one axis.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSuite {
    /// Suite identifier (`s1`..`s4` for the built-ins).
    pub id: String,
    /// Name of the varied axis, e.g. `threats` or `response_rate`.
    pub axis: String,
    /// `(axis value, spec)` pairs in presentation order.
    pub variants: Vec<(String, ScenarioSpec)>,
}

impl ScenarioSuite {
    /// Wraps standalone specs as a single-axis suite keyed by scenario name.
    pub fn from_specs(id: &str, specs: Vec<ScenarioSpec>) -> Self {
        ScenarioSuite {
            id: id.into(),
            axis: "scenario".into(),
            variants: specs.into_iter().map(|s| (s.name.clone(), s)).collect(),
        }
    }
}

/// Identifiers of the built-in suites, in order.
pub fn builtin_ids() -> &'static [&'static str] {
    &["s1", "s2", "s3", "s4"]
}

/// Returns a built-in suite by id (`s1`..`s4`), or `None` if unknown.
///
/// * `s1` — threat volume: 10 / 30 / 100 threats against 50 nodes.
/// * `s2` — response capacity: 20 threats, response rate 2 / 8 / 10.
/// * `s3` — defense posture: 30 threats, fixed defense level 1 / 3 / 5.
/// * `s4` — adaptive defense under the default policy, 100 ticks.
pub fn builtin_suite(id: &str) -> Option<ScenarioSuite> {
    let base = ScenarioSpec::default();
    match id {
        "s1" => Some(ScenarioSuite {
            id: "s1".into(),
            axis: "threats".into(),
            variants: [10usize, 30, 100]
                .iter()
                .map(|&t| {
                    (
                        t.to_string(),
                        ScenarioSpec {
                            name: format!("s1-threats-{t}"),
                            threat_count: t,
                            ..base.clone()
                        },
                    )
                })
                .collect(),
        }),
        "s2" => Some(ScenarioSuite {
            id: "s2".into(),
            axis: "response_rate".into(),
            variants: [2u32, 8, 10]
                .iter()
                .map(|&r| {
                    (
                        r.to_string(),
                        ScenarioSpec {
                            name: format!("s2-response-{r}"),
                            threat_count: 20,
                            response_rate: r,
                            ..base.clone()
                        },
                    )
                })
                .collect(),
        }),
        "s3" => Some(ScenarioSuite {
            id: "s3".into(),
            axis: "defense".into(),
            variants: [1u8, 3, 5]
                .iter()
                .map(|&d| {
                    (
                        d.to_string(),
                        ScenarioSpec {
                            name: format!("s3-defense-{d}"),
                            threat_count: 30,
                            response_rate: 3,
                            defense_mode: DefenseMode::Fixed(d),
                            ..base.clone()
                        },
                    )
                })
                .collect(),
        }),
        "s4" => Some(ScenarioSuite {
            id: "s4".into(),
            axis: "mode".into(),
            variants: vec![(
                "adaptive".into(),
                ScenarioSpec {
                    name: "s4-adaptive".into(),
                    tick_limit: 100,
                    defense_mode: DefenseMode::Adaptive,
                    adaptation: Some(AdaptationPolicy::default()),
                    ..base
                },
            )],
        }),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// Scenario file parsing
// ---------------------------------------------------------------------------

const SCENARIO_KEYS: &[&str] = &[
    "name",
    "nodes",
    "ticks",
    "threats",
    "response_rate",
    "defense",
    "breach_factor",
    "spread_prob",
    "respawn_delay",
    "adapt_interval",
    "raise_threshold",
    "lower_threshold",
    "lower_dwell",
];

const ADAPT_KEYS: &[&str] = &[
    "adapt_interval",
    "raise_threshold",
    "lower_threshold",
    "lower_dwell",
];

/// Parses the `key = value` scenario format.
///
/// Rules: one pair per line; blank lines and lines starting with `#` are
/// ignored; keys may appear at most once; unknown keys are rejected with
/// their line number. `defense` accepts an integer level (1–5), `random`,
/// or `adaptive`; the `adapt_*` keys are only legal with
/// `defense = adaptive`. Missing keys fall back to [`defaults`].
///
/// `origin` is used in error messages; `default_name` is used when the file
/// does not set `name`.
pub fn parse_scenario(text: &str, origin: &str, default_name: &str) -> Result<ScenarioSpec> {
    let mut seen: HashMap<String, (String, usize)> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::parse(
                origin,
                lineno,
                format!("expected `key = value`, got `{line}`"),
            ));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !SCENARIO_KEYS.contains(&key.as_str()) {
            return Err(Error::parse(origin, lineno, format!("unknown key `{key}`")));
        }
        if seen.contains_key(&key) {
            return Err(Error::parse(
                origin,
                lineno,
                format!("duplicate key `{key}`"),
            ));
        }
        seen.insert(key, (value, lineno));
    }

    fn get_num<T: std::str::FromStr>(
        seen: &HashMap<String, (String, usize)>,
        origin: &str,
        key: &str,
        default: T,
    ) -> Result<T> {
        match seen.get(key) {
            None => Ok(default),
            Some((value, lineno)) => value.parse::<T>().map_err(|_| {
                Error::parse(
                    origin,
                    *lineno,
                    format!("invalid value `{value}` for `{key}`"),
                )
            }),
        }
    }

    let name = seen
        .get("name")
        .map(|(v, _)| v.clone())
        .unwrap_or_else(|| default_name.to_string());

    let defense_mode = match seen.get("defense") {
        None => DefenseMode::UniformRandom,
        Some((v, lineno)) => match v.as_str() {
            "random" => DefenseMode::UniformRandom,
            "adaptive" => DefenseMode::Adaptive,
            other => match other.parse::<u8>() {
                Ok(level) => DefenseMode::Fixed(level),
                Err(_) => {
                    return Err(Error::parse(
                        origin,
                        *lineno,
                        format!(
                        "invalid value `{other}` for `defense` (want 1-5, `random`, or `adaptive`)"
                    ),
                    ))
                }
            },
        },
    };

    if defense_mode != DefenseMode::Adaptive {
        for key in ADAPT_KEYS {
            if let Some((_, lineno)) = seen.get(*key) {
                return Err(Error::parse(
                    origin,
                    *lineno,
                    format!("`{key}` requires `defense = adaptive`"),
                ));
            }
        }
    }

    let adaptation = if defense_mode == DefenseMode::Adaptive {
        Some(AdaptationPolicy {
            interval: get_num(&seen, origin, "adapt_interval", defaults::ADAPT_INTERVAL)?,
            raise_threshold: get_num(&seen, origin, "raise_threshold", defaults::RAISE_THRESHOLD)?,
            lower_threshold: get_num(&seen, origin, "lower_threshold", defaults::LOWER_THRESHOLD)?,
            lower_dwell: get_num(&seen, origin, "lower_dwell", defaults::LOWER_DWELL)?,
        })
    } else {
        None
    };

    let spec = ScenarioSpec {
        name,
        node_count: get_num(&seen, origin, "nodes", defaults::NODE_COUNT)?,
        tick_limit: get_num(&seen, origin, "ticks", defaults::TICK_LIMIT)?,
        threat_count: get_num(&seen, origin, "threats", defaults::THREAT_COUNT)?,
        defense_mode,
        response_rate: get_num(&seen, origin, "response_rate", defaults::RESPONSE_RATE)?,
        breach_factor: get_num(&seen, origin, "breach_factor", defaults::BREACH_FACTOR)?,
        spread_prob: get_num(&seen, origin, "spread_prob", defaults::SPREAD_PROB)?,
        respawn_delay: get_num(&seen, origin, "respawn_delay", defaults::RESPAWN_DELAY)?,
        adaptation,
    };
    spec.validate()?;
    Ok(spec)
}

/// Loads and validates a scenario file; the file stem is the default name.
pub fn load_scenario_file(path: &Path) -> Result<ScenarioSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let default_name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "custom".into());
    parse_scenario(&text, &path.to_string_lossy(), &default_name)
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

/// One completed run inside a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub scenario: String,
    pub axis_value: String,
    pub seed: u64,
    /// Node count of the run, kept so fractions can be recomputed.
    pub node_count: usize,
    pub summary: RunSummary,
}

/// Aggregate statistics over all seeds of one axis value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisAggregate {
    pub axis_value: String,
    pub runs: usize,
    pub mean_peak_fraction: f64,
    pub min_peak_fraction: f64,
    pub max_peak_fraction: f64,
    pub mean_final_fraction: f64,
    pub min_final_fraction: f64,
    pub max_final_fraction: f64,
    pub mean_health: f64,
    /// Runs whose infections were fully cleared by the end.
    pub contained_runs: usize,
    /// Mean containment tick over contained runs; `None` if none contained.
    pub mean_time_to_containment: Option<f64>,
}

/// Results of running a suite across a seed list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// Name of the varied axis.
    pub axis: String,
    /// One row per (variant, seed), ordered by variant then ascending seed.
    pub rows: Vec<RunRow>,
    /// One aggregate per variant, in variant order.
    pub aggregates: Vec<AxisAggregate>,
}

/// Runs every `(variant, seed)` combination of the suite in parallel.
///
/// Rows are sorted by `(variant index, seed)` and aggregates are computed in
/// that order, so results are independent of both thread scheduling and the
/// ordering of the input seed list.
pub fn sweep(suite: &ScenarioSuite, seeds: &[u64]) -> Result<SweepResult> {
    if suite.variants.is_empty() {
        return Err(Error::Config("sweep requires at least one scenario".into()));
    }
    if seeds.is_empty() {
        return Err(Error::Config("sweep requires at least one seed".into()));
    }
    for (_, spec) in &suite.variants {
        spec.validate()?;
    }

    let jobs: Vec<(usize, u64)> = (0..suite.variants.len())
        .flat_map(|vi| seeds.iter().map(move |&s| (vi, s)))
        .collect();
    let mut finished: Vec<(usize, u64, RunRow)> = jobs
        .par_iter()
        .map(|&(vi, seed)| {
            let (axis_value, spec) = &suite.variants[vi];
            let result = sim::run(spec, seed)?;
            Ok((
                vi,
                seed,
                RunRow {
                    scenario: spec.name.clone(),
                    axis_value: axis_value.clone(),
                    seed,
                    node_count: spec.node_count,
                    summary: result.summary,
                },
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    finished.sort_by_key(|a| (a.0, a.1));

    let rows: Vec<RunRow> = finished.into_iter().map(|(_, _, row)| row).collect();
    let aggregates = (0..suite.variants.len())
        .map(|vi| {
            let value = &suite.variants[vi].0;
            let group: Vec<&RunRow> = rows.iter().filter(|r| r.axis_value == *value).collect();
            aggregate(value, &group)
        })
        .collect();

    Ok(SweepResult {
        axis: suite.axis.clone(),
        rows,
        aggregates,
    })
}

fn aggregate(axis_value: &str, group: &[&RunRow]) -> AxisAggregate {
    let n = group.len();
    let frac = |count: usize, total: usize| count as f64 / total as f64;
    let peaks: Vec<f64> = group
        .iter()
        .map(|r| frac(r.summary.peak_infected, r.node_count))
        .collect();
    let finals: Vec<f64> = group
        .iter()
        .map(|r| frac(r.summary.final_infected, r.node_count))
        .collect();
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let fmin = |xs: &[f64]| xs.iter().copied().fold(f64::INFINITY, f64::min);
    let fmax = |xs: &[f64]| xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let contained: Vec<f64> = group
        .iter()
        .filter_map(|r| r.summary.time_to_containment.map(|t| t as f64))
        .collect();
    AxisAggregate {
        axis_value: axis_value.to_string(),
        runs: n,
        mean_peak_fraction: mean(&peaks),
        min_peak_fraction: fmin(&peaks),
        max_peak_fraction: fmax(&peaks),
        mean_final_fraction: mean(&finals),
        min_final_fraction: fmin(&finals),
        max_final_fraction: fmax(&finals),
        mean_health: mean(
            &group
                .iter()
                .map(|r| r.summary.mean_health)
                .collect::<Vec<_>>(),
        ),
        contained_runs: contained.len(),
        mean_time_to_containment: if contained.is_empty() {
            None
        } else {
            Some(mean(&contained))
        },
    }
}

// ---------------------------------------------------------------------------
// CSV export / import
// ---------------------------------------------------------------------------

/// Header of the per-tick time-series CSV.
pub const TIMESERIES_HEADER: [&str; 6] = [
    "tick",
    "infected",
    "healthy",
    "active_threats",
    "mean_defense",
    "health",
];

/// Header of the sweep CSV.
pub const SWEEP_HEADER: [&str; 7] = [
    "scenario",
    "axis_value",
    "seed",
    "peak_infected",
    "final_infected",
    "mean_health",
    "time_to_containment",
];

/// Writes one run's per-tick metrics to `writer` as CSV.
pub fn write_timeseries<W: Write>(result: &SimResult, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io_err = |e: csv::Error| Error::Config(format!("csv write failed: {e}"));
    w.write_record(TIMESERIES_HEADER).map_err(io_err)?;
    for t in &result.ticks {
        w.write_record([
            t.tick.to_string(),
            t.infected.to_string(),
            t.healthy.to_string(),
            t.active_threats.to_string(),
            t.mean_defense.to_string(),
            t.health.to_string(),
        ])
        .map_err(io_err)?;
    }
    w.flush()
        .map_err(|e| Error::Config(format!("csv flush failed: {e}")))?;
    Ok(())
}

/// Writes one run's per-tick metrics to a CSV file.
pub fn write_timeseries_csv(result: &SimResult, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_timeseries(result, file)
}

/// Reads a time-series CSV back into per-tick metrics.
pub fn read_timeseries_csv(path: &Path) -> Result<Vec<TickMetrics>> {
    let origin = path.to_string_lossy().into_owned();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(&origin, 1, format!("bad header: {e}")))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != TIMESERIES_HEADER {
        return Err(Error::parse(
            &origin,
            1,
            format!("expected header `{}`", TIMESERIES_HEADER.join(",")),
        ));
    }
    let mut out = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let lineno = idx + 2;
        let record = record.map_err(|e| Error::parse(&origin, lineno, e.to_string()))?;
        let field = |i: usize| -> Result<&str> {
            record
                .get(i)
                .ok_or_else(|| Error::parse(&origin, lineno, format!("missing column {i}")))
        };
        fn num<T: std::str::FromStr>(origin: &str, lineno: usize, s: &str) -> Result<T> {
            s.parse::<T>()
                .map_err(|_| Error::parse(origin, lineno, format!("invalid number `{s}`")))
        }
        out.push(TickMetrics {
            tick: num(&origin, lineno, field(0)?)?,
            infected: num(&origin, lineno, field(1)?)?,
            healthy: num(&origin, lineno, field(2)?)?,
            active_threats: num(&origin, lineno, field(3)?)?,
            mean_defense: num(&origin, lineno, field(4)?)?,
            health: num(&origin, lineno, field(5)?)?,
        });
    }
    Ok(out)
}

/// Writes sweep rows to `writer` as CSV (one row per scenario/seed pair).
pub fn write_sweep<W: Write>(sweep: &SweepResult, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io_err = |e: csv::Error| Error::Config(format!("csv write failed: {e}"));
    w.write_record(SWEEP_HEADER).map_err(io_err)?;
    for row in &sweep.rows {
        w.write_record([
            row.scenario.clone(),
            row.axis_value.clone(),
            row.seed.to_string(),
            row.summary.peak_infected.to_string(),
            row.summary.final_infected.to_string(),
            row.summary.mean_health.to_string(),
            row.summary
                .time_to_containment
                .map(|t| t.to_string())
                .unwrap_or_default(),
        ])
        .map_err(io_err)?;
    }
    w.flush()
        .map_err(|e| Error::Config(format!("csv flush failed: {e}")))?;
    Ok(())
}

/// Writes sweep rows to a CSV file.
pub fn write_sweep_csv(sweep: &SweepResult, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_sweep(sweep, file)
}
