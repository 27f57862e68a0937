//! Scenario runner: builds the user base, interleaves requests between the
//! ecosystem and the budget-matched registry baseline, applies the
//! deployment and churn rules, and aggregates the per-request match records
//! across replications.

use std::sync::Arc;

use crate::config::ScenarioConfig;
use crate::habitat::{
    build_ecosystem, churn_step, clustering_coefficient, deploy_agent, generate_request,
    handle_request, EcosystemState,
};
use crate::model::{attr_distance, Agent, Request};
use crate::rng::RngStream;
use crate::soa::{soa_respond, Registry};

/// One request's outcome: what both systems scored, and the evolution
/// budget the baseline was granted.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub request_index: u64,
    pub services_available: u64,
    pub match_pct_eco: f64,
    pub match_pct_soa: f64,
    pub evaluations_used: u64,
    pub seed: u64,
}

/// A full replication: its records plus run-level diagnostics.
#[derive(Clone, Debug)]
pub struct Replication {
    pub records: Vec<StepRecord>,
    /// Registry comparisons spent per step, for budget-parity checks.
    pub comparisons: Vec<u64>,
    /// Mean local clustering coefficient of the final habitat graph over
    /// edges at or above 0.5.
    pub final_clustering: f64,
}

/// Percentage match of a candidate composition against a request:
/// `100 / (1 + D / |R|)` where `D` sums the distance from each required
/// attribute to the candidate's nearest attribute and `|R|` is the flattened
/// attribute count. An empty candidate (the baseline answering nothing)
/// scores every attribute at the maximum distance `arity * 100`.
pub fn match_percent(candidate: &[Arc<Agent>], request: &Request) -> f64 {
    let flat_len = request.flat_len() as f64;
    let total: u64 = if candidate.is_empty() {
        request.flat_len() as u64 * (request.arity() as u64 * 100)
    } else {
        request
            .flattened()
            .map(|r| {
                candidate
                    .iter()
                    .flat_map(|a| a.attributes.iter())
                    .map(|a| attr_distance(a, r))
                    .min()
                    .expect("agents carry at least one attribute")
            })
            .sum()
    };
    100.0 / (1.0 + total as f64 / flat_len)
}

/// Ecosystem state plus its registry mirror.
pub struct World {
    pub eco: EcosystemState,
    pub registry: Registry,
}

/// Build the paired ecosystem and registry for one replication.
pub fn build_world(cfg: &ScenarioConfig, rng: &mut RngStream) -> World {
    let (eco, deployed) = build_ecosystem(cfg, rng);
    let mut registry = Registry::new();
    for &id in eco.habitats.keys() {
        registry.add_node(id);
    }
    for habitat in eco.habitats.values() {
        for &peer in habitat.outgoing.keys() {
            if habitat.id < peer {
                registry.link(habitat.id, peer);
            }
        }
    }
    for agent in deployed {
        let node = eco.users[&agent.origin_user].habitat;
        registry.place_description(agent, node);
    }
    World { eco, registry }
}

/// Run one replication and keep the per-step diagnostics.
pub fn run_replication(cfg: &ScenarioConfig, seed: u64) -> Replication {
    let mut setup_rng = RngStream::derive(seed, "setup");
    let mut world = build_world(cfg, &mut setup_rng);
    let mut rng = RngStream::derive(seed, "sim");

    let mut records = Vec::with_capacity(cfg.total_requests as usize);
    let mut comparisons = Vec::with_capacity(cfg.total_requests as usize);

    for request_index in 1..=cfg.total_requests {
        let services_available = world.registry.description_count() as u64;

        let user_id = world.eco.user_ids()[rng.index(world.eco.user_count())];
        let user = world.eco.users[&user_id].clone();
        let request =
            generate_request(&user, cfg.sigma, cfg.segments, cfg.attrs_per_segment, &mut rng);

        let response = handle_request(&mut world.eco, user_id, &request, cfg, &mut rng);
        let match_pct_eco = match_percent(response.best_sequence.agents(), &request);

        let entry_node = user.habitat;
        let soa = soa_respond(
            &request,
            &world.registry,
            entry_node,
            response.evaluations_used,
        );
        assert!(
            soa.comparisons_used <= response.evaluations_used,
            "budget parity violated at request {request_index}"
        );
        let match_pct_soa = match_percent(&soa.composition(), &request);

        {
            let user = world.eco.users.get_mut(&user_id).unwrap();
            user.requests_submitted += 1;
        }
        let submitted = world.eco.users[&user_id].requests_submitted;
        if submitted % cfg.requests_between_deployments == 0 {
            let agent = deploy_agent(&mut world.eco, user_id, cfg, &mut rng);
            let node = world.eco.users[&user_id].habitat;
            world.registry.place_description(agent, node);
        }

        if let Some(event) = churn_step(&mut world.eco, cfg, &mut rng) {
            world.registry.remove_node(event.removed_habitat);
            world.registry.add_node(event.added_habitat);
            for peer in &event.added_neighbors {
                world.registry.link(event.added_habitat, *peer);
            }
            for agent in event.deployed {
                world.registry.place_description(agent, event.added_habitat);
            }
        }

        records.push(StepRecord {
            request_index,
            services_available,
            match_pct_eco,
            match_pct_soa,
            evaluations_used: response.evaluations_used,
            seed,
        });
        comparisons.push(soa.comparisons_used);
    }

    let final_clustering = clustering_coefficient(&world.eco, 0.5);
    Replication {
        records,
        comparisons,
        final_clustering,
    }
}

/// Run one replication; fully deterministic per `(cfg, seed)`.
pub fn run_scenario(cfg: &ScenarioConfig, seed: u64) -> Vec<StepRecord> {
    run_replication(cfg, seed).records
}

/// One aggregation window over the pooled records.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowRow {
    pub window_index: usize,
    pub request_start: u64,
    pub request_end: u64,
    pub mean_match_pct_eco: f64,
    pub sd_match_pct_eco: f64,
    pub mean_match_pct_soa: f64,
    pub sd_match_pct_soa: f64,
}

/// Windowed means across replications plus the crossover detector.
#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub rows: Vec<WindowRow>,
    /// First window where the ecosystem mean exceeds the baseline mean and
    /// stays greater for at least three consecutive windows.
    pub crossover_window: Option<usize>,
}

fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, variance.sqrt())
}

/// Group records (possibly across seeds) into windows of `window` request
/// indices and summarise both match columns.
pub fn aggregate(records: &[StepRecord], window: usize) -> Aggregate {
    assert!(window >= 1, "aggregation window must be at least 1");
    let max_index = records.iter().map(|r| r.request_index).max().unwrap_or(0);
    let window_count = (max_index as usize).div_ceil(window);

    let mut rows = Vec::with_capacity(window_count);
    for w in 0..window_count {
        let start = (w * window + 1) as u64;
        let end = ((w + 1) * window) as u64;
        let eco: Vec<f64> = records
            .iter()
            .filter(|r| r.request_index >= start && r.request_index <= end)
            .map(|r| r.match_pct_eco)
            .collect();
        if eco.is_empty() {
            continue;
        }
        let soa: Vec<f64> = records
            .iter()
            .filter(|r| r.request_index >= start && r.request_index <= end)
            .map(|r| r.match_pct_soa)
            .collect();
        let (mean_eco, sd_eco) = mean_and_sd(&eco);
        let (mean_soa, sd_soa) = mean_and_sd(&soa);
        rows.push(WindowRow {
            window_index: w,
            request_start: start,
            request_end: end.min(max_index),
            mean_match_pct_eco: mean_eco,
            sd_match_pct_eco: sd_eco,
            mean_match_pct_soa: mean_soa,
            sd_match_pct_soa: sd_soa,
        });
    }

    let crossover_window = detect_crossover(&rows);
    Aggregate {
        rows,
        crossover_window,
    }
}

/// First window index where eco > soa holds for three consecutive windows.
fn detect_crossover(rows: &[WindowRow]) -> Option<usize> {
    const SUSTAIN: usize = 3;
    if rows.len() < SUSTAIN {
        return None;
    }
    for i in 0..=(rows.len() - SUSTAIN) {
        if rows[i..i + SUSTAIN]
            .iter()
            .all(|r| r.mean_match_pct_eco > r.mean_match_pct_soa)
        {
            return Some(rows[i].window_index);
        }
    }
    None
}
