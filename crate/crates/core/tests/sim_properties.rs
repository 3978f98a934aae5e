//! Randomized invariant checks for the simulation engine: determinism,
//! population conservation, the action budget, defense clamping, the
//! zero-threat fixpoint, adaptive response latency, and CSV round-trips —
//! each over arbitrary valid configurations rather than fixed examples.

use cyberdef_core::scenario::{self, AdaptationPolicy, DefenseMode, ScenarioSpec, ScenarioSuite};
use cyberdef_core::sim;
use proptest::prelude::*;

/// Valid threshold pairs (raise < lower) for the adaptation policy.
fn arb_policy() -> impl Strategy<Value = AdaptationPolicy> {
    (
        1u64..=5,
        prop_oneof![Just((0.5, 0.9)), Just((0.8, 0.95)), Just((0.6, 1.0)),],
        1u64..=4,
    )
        .prop_map(|(interval, (raise, lower), dwell)| AdaptationPolicy {
            interval,
            raise_threshold: raise,
            lower_threshold: lower,
            lower_dwell: dwell,
        })
}

fn arb_mode() -> impl Strategy<Value = (DefenseMode, Option<AdaptationPolicy>)> {
    prop_oneof![
        Just((DefenseMode::UniformRandom, None)),
        (1u8..=5).prop_map(|l| (DefenseMode::Fixed(l), None)),
        arb_policy().prop_map(|p| (DefenseMode::Adaptive, Some(p))),
    ]
}

/// Arbitrary valid scenario, kept small so whole runs stay cheap.
fn arb_spec() -> impl Strategy<Value = ScenarioSpec> {
    (
        1usize..=25,
        0u64..=40,
        0usize..=12,
        arb_mode(),
        0u32..=5,
        1u32..=8,
        0.0f64..=1.0,
        0u32..=5,
    )
        .prop_map(
            |(
                node_count,
                tick_limit,
                threat_count,
                (mode, policy),
                response,
                breach,
                spread,
                respawn,
            )| {
                ScenarioSpec {
                    name: "prop".to_string(),
                    node_count,
                    tick_limit,
                    threat_count,
                    defense_mode: mode,
                    response_rate: response,
                    breach_factor: breach,
                    spread_prob: spread,
                    respawn_delay: respawn,
                    adaptation: policy,
                }
            },
        )
}

/// Adaptive-only variant of [`arb_spec`], biased toward configurations
/// where infections (and therefore health dips) actually happen.
fn arb_stressed_adaptive_spec() -> impl Strategy<Value = ScenarioSpec> {
    (3usize..=12, 10u64..=60, 5usize..=30, 0u32..=3, arb_policy()).prop_map(
        |(node_count, tick_limit, threat_count, response, policy)| ScenarioSpec {
            name: "stress".to_string(),
            node_count,
            tick_limit,
            threat_count,
            defense_mode: DefenseMode::Adaptive,
            response_rate: response,
            breach_factor: 2,
            spread_prob: 0.2,
            respawn_delay: 1,
            adaptation: Some(policy),
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    /// Same spec + seed twice → identical results, down to the serialized
    /// bytes.
    #[test]
    fn runs_are_deterministic(spec in arb_spec(), seed in any::<u64>()) {
        let a = sim::run(&spec, seed).unwrap();
        let b = sim::run(&spec, seed).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(
            serde_json::to_vec(&a).unwrap(),
            serde_json::to_vec(&b).unwrap()
        );
    }

    /// Every tick: infected + healthy = node_count, health is exactly the
    /// healthy fraction, threats never exceed the configured population,
    /// and mean defense stays within the level bounds.
    #[test]
    fn population_and_ranges_hold_every_tick(spec in arb_spec(), seed in any::<u64>()) {
        let result = sim::run(&spec, seed).unwrap();
        prop_assert_eq!(result.ticks.len() as u64, spec.tick_limit);
        for m in &result.ticks {
            prop_assert_eq!(m.infected + m.healthy, spec.node_count);
            prop_assert_eq!(m.health, m.healthy as f64 / spec.node_count as f64);
            prop_assert!(m.active_threats <= spec.threat_count);
            prop_assert!(m.mean_defense >= 1.0 && m.mean_defense <= 5.0);
            prop_assert!((0.0..=1.0).contains(&m.health));
        }
    }

    /// The control centre never spends more than its per-tick budget.
    #[test]
    fn control_centre_respects_its_budget(spec in arb_spec(), seed in any::<u64>()) {
        let mut world = sim::init_world(&spec, seed).unwrap();
        for _ in 0..spec.tick_limit {
            sim::step(&mut world, &spec);
            prop_assert!(world.control.actions_spent <= spec.response_rate);
        }
    }

    /// Node defense levels stay in 1..=5 at every tick of every run,
    /// including adaptive ones that raise and lower repeatedly.
    #[test]
    fn defense_levels_stay_clamped(spec in arb_spec(), seed in any::<u64>()) {
        let mut world = sim::init_world(&spec, seed).unwrap();
        for _ in 0..spec.tick_limit {
            sim::step(&mut world, &spec);
            for node in &world.nodes {
                prop_assert!((1..=5).contains(&node.defense_level));
            }
        }
    }

    /// With zero threats nothing ever gets infected and the node state is
    /// frozen: defenses never move (adaptive worlds start at the minimum
    /// level, so calm-lowering clamps in place).
    #[test]
    fn zero_threats_freeze_the_world(base in arb_spec(), seed in any::<u64>()) {
        let spec = ScenarioSpec { threat_count: 0, ..base };
        let mut world = sim::init_world(&spec, seed).unwrap();
        let baseline = world.nodes.clone();
        for _ in 0..spec.tick_limit {
            let m = sim::step(&mut world, &spec);
            prop_assert_eq!(m.infected, 0);
            prop_assert_eq!(m.health, 1.0);
            prop_assert_eq!(&world.nodes, &baseline);
        }
    }

    /// Whenever health first ends a tick below the raise threshold, the
    /// mean defense one adaptation interval later is strictly higher —
    /// unless every node was already at the maximum level.
    #[test]
    fn dips_raise_defenses_within_one_interval(
        spec in arb_stressed_adaptive_spec(),
        seed in any::<u64>(),
    ) {
        let policy = spec.adaptation.clone().unwrap();
        let result = sim::run(&spec, seed).unwrap();
        let ticks = &result.ticks;
        if let Some(t) = ticks.iter().position(|m| m.health < policy.raise_threshold) {
            let due = t + policy.interval as usize;
            if due < ticks.len() && ticks[t].mean_defense < 5.0 {
                prop_assert!(
                    ticks[due].mean_defense > ticks[t].mean_defense,
                    "dip at tick {} (defense {}) not answered by tick {} (defense {})",
                    t,
                    ticks[t].mean_defense,
                    due,
                    ticks[due].mean_defense
                );
            }
        }
    }

    /// The run summary is consistent with its own tick series.
    #[test]
    fn summary_matches_the_series(spec in arb_spec(), seed in any::<u64>()) {
        let result = sim::run(&spec, seed).unwrap();
        let ticks = &result.ticks;
        let s = &result.summary;
        prop_assert_eq!(s.peak_infected, ticks.iter().map(|m| m.infected).max().unwrap_or(0));
        prop_assert_eq!(s.final_infected, ticks.last().map(|m| m.infected).unwrap_or(0));
        match s.time_to_containment {
            Some(0) => prop_assert!(ticks.iter().all(|m| m.infected == 0)),
            Some(t) => {
                // Clear from tick t onward, infected just before it.
                prop_assert!(ticks.iter().filter(|m| m.tick >= t).all(|m| m.infected == 0));
                prop_assert!(ticks.iter().any(|m| m.tick + 1 == t && m.infected > 0));
            }
            None => prop_assert!(ticks.last().is_some_and(|m| m.infected > 0)),
        }
    }

    /// Export then re-import of any time series is lossless, floats
    /// included.
    #[test]
    fn timeseries_csv_round_trips_exactly(spec in arb_spec(), seed in any::<u64>()) {
        let result = sim::run(&spec, seed).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ticks.csv");
        scenario::write_timeseries_csv(&result, &path).unwrap();
        let reread = scenario::read_timeseries_csv(&path).unwrap();
        prop_assert_eq!(reread, result.ticks);
    }
}

/// Sweep aggregates must not depend on the order of the seed list.
#[test]
fn sweep_aggregates_ignore_seed_order() {
    let spec = ScenarioSpec {
        name: "tiny".to_string(),
        node_count: 10,
        tick_limit: 20,
        threat_count: 5,
        ..ScenarioSpec::default()
    };
    let suite = ScenarioSuite::from_specs("tiny", vec![spec]);
    let forward = scenario::sweep(&suite, &[1, 2, 3, 4, 5]).unwrap();
    let shuffled = scenario::sweep(&suite, &[4, 1, 5, 3, 2]).unwrap();
    assert_eq!(forward.aggregates, shuffled.aggregates);
    assert_eq!(forward.rows, shuffled.rows);
}
