//! Built-in verification suites: independent oracles re-deriving what the
//! implementation computes, runnable from the `verify` CLI subcommand and
//! reused (at full criterion sizes) by the acceptance tests.
//!
//! Every oracle here recomputes its expectation with plain loops rather than
//! calling the code path it checks.

use std::sync::Arc;

use crate::config::ScenarioConfig;
use crate::evolution::{adjusted_fitness, crossover_one_point, fitness_detail, mutate,
    select_next_generation};
use crate::habitat::{hebbian_update, MigrationOutcome};
use crate::harness::run_scenario;
use crate::model::{Agent, AgentId, AgentSequence, Attribute, HabitatId, Request, UserId};
use crate::rng::RngStream;
use crate::soa::{soa_respond, Registry};

/// Outcome of one verification suite.
#[derive(Clone, Debug)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl SuiteResult {
    fn pass(name: &'static str, detail: String) -> Self {
        SuiteResult {
            name,
            passed: true,
            detail,
        }
    }

    fn fail(name: &'static str, detail: String) -> Self {
        SuiteResult {
            name,
            passed: false,
            detail,
        }
    }
}

fn random_attr(rng: &mut RngStream, arity: usize) -> Attribute {
    Attribute::new((0..arity).map(|_| rng.index(101) as i64).collect())
}

fn random_agent(rng: &mut RngStream, id: u64, arity: usize) -> Arc<Agent> {
    let count = 1 + rng.index(3);
    Arc::new(Agent::new(
        AgentId(id),
        (0..count).map(|_| random_attr(rng, arity)).collect(),
        UserId(0),
    ))
}

fn random_sequence(rng: &mut RngStream, arity: usize, max_len: usize) -> AgentSequence {
    let len = 1 + rng.index(max_len);
    AgentSequence::new(
        (0..len)
            .map(|i| random_agent(rng, i as u64, arity))
            .collect(),
    )
}

fn random_request(rng: &mut RngStream, arity: usize) -> Request {
    let segments = 1 + rng.index(3);
    Request::new(
        (0..segments)
            .map(|_| {
                let attrs = 1 + rng.index(4);
                (0..attrs).map(|_| random_attr(rng, arity)).collect()
            })
            .collect(),
        UserId(0),
    )
}

/// Fitness against a brute-force re-derivation: exact equality of the total
/// distance and `|f - 1/(1+D)| <= 1e-12` on `cases` random instances.
pub fn fitness_oracle_suite(cases: usize, seed: u64) -> SuiteResult {
    const NAME: &str = "fitness_oracle";
    let mut rng = RngStream::derive(seed, "verify/fitness");
    for case in 0..cases {
        let seq = random_sequence(&mut rng, 2, 6);
        let request = random_request(&mut rng, 2);
        // independent oracle: triple loop, no library distance helpers
        let mut expected_total: u64 = 0;
        for r in request.flattened() {
            let mut best = u64::MAX;
            for agent in seq.agents() {
                for a in &agent.attributes {
                    let d: u64 = a
                        .components()
                        .iter()
                        .zip(r.components())
                        .map(|(x, y)| x.abs_diff(*y))
                        .sum();
                    best = best.min(d);
                }
            }
            expected_total += best;
        }
        let (f, total) = fitness_detail(&seq, &request);
        if total != expected_total {
            return SuiteResult::fail(
                NAME,
                format!("case {case}: distance {total} != oracle {expected_total}"),
            );
        }
        let expected_f = 1.0 / (1.0 + expected_total as f64);
        if (f - expected_f).abs() > 1e-12 {
            return SuiteResult::fail(
                NAME,
                format!("case {case}: fitness {f} vs oracle {expected_f}"),
            );
        }
    }
    SuiteResult::pass(NAME, format!("{cases} random instances agree"))
}

/// Selection frequencies for fitnesses {0.9, 0.1}: the first individual must
/// be drawn `0.9 * draws` times within three binomial sigmas.
pub fn selection_statistics_suite(draws: usize, seed: u64) -> SuiteResult {
    const NAME: &str = "selection_statistics";
    let first = AgentSequence::singleton(Arc::new(Agent::new(
        AgentId(1),
        vec![Attribute::new(vec![0, 0])],
        UserId(0),
    )));
    let second = AgentSequence::singleton(Arc::new(Agent::new(
        AgentId(2),
        vec![Attribute::new(vec![1, 1])],
        UserId(0),
    )));
    let scored = vec![(first.clone(), 0.9), (second, 0.1)];
    let mut rng = RngStream::derive(seed, "verify/selection");
    let picked = select_next_generation(&scored, draws, &mut rng);
    let count = picked.iter().filter(|s| **s == first).count() as f64;
    let expectation = 0.9 * draws as f64;
    let tolerance = 3.0 * (draws as f64 * 0.9 * 0.1).sqrt();
    if (count - expectation).abs() <= tolerance {
        SuiteResult::pass(
            NAME,
            format!("{count} of {draws} draws, within {expectation} +/- {tolerance:.0}"),
        )
    } else {
        SuiteResult::fail(
            NAME,
            format!("{count} of {draws} draws, outside {expectation} +/- {tolerance:.0}"),
        )
    }
}

/// Crossover must conserve the combined agent multiset of the parents.
pub fn crossover_conservation_suite(pairs: usize, seed: u64) -> SuiteResult {
    const NAME: &str = "crossover_conservation";
    let mut rng = RngStream::derive(seed, "verify/crossover");
    for case in 0..pairs {
        let p1 = random_sequence(&mut rng, 2, 8);
        let p2 = random_sequence(&mut rng, 2, 8);
        let (c1, c2) = crossover_one_point(&p1, &p2, &mut rng);
        let multiset = |seqs: [&AgentSequence; 2]| -> Vec<u64> {
            let mut ids: Vec<u64> = seqs
                .iter()
                .flat_map(|s| s.id_key())
                .map(|id| id.0)
                .collect();
            ids.sort_unstable();
            ids
        };
        if multiset([&c1, &c2]) != multiset([&p1, &p2]) {
            return SuiteResult::fail(NAME, format!("case {case}: multiset not conserved"));
        }
    }
    SuiteResult::pass(NAME, format!("{pairs} random parent pairs conserved"))
}

/// Parsimony ordering with an injectable implementation, so a corrupted
/// penalty is detectable: for equal raw fitness and mean < L1 < L2 the
/// shorter sequence must keep strictly more adjusted fitness.
pub fn parsimony_order_suite_with(
    adjust: impl Fn(f64, usize, f64, f64) -> f64,
    cases: usize,
    seed: u64,
) -> SuiteResult {
    const NAME: &str = "parsimony_order";
    let mut rng = RngStream::derive(seed, "verify/parsimony");
    for case in 0..cases {
        let raw = 0.05 + 0.95 * rng.next_f64();
        let mean = 1.0 + 10.0 * rng.next_f64();
        let len_short = mean.ceil() as usize + rng.index(10);
        let len_long = len_short + 1 + rng.index(10);
        if (len_short as f64) <= mean {
            continue;
        }
        let alpha = 0.01 + 0.2 * rng.next_f64();
        let short = adjust(raw, len_short, mean, alpha);
        let long = adjust(raw, len_long, mean, alpha);
        if !(short > long) {
            return SuiteResult::fail(
                NAME,
                format!(
                    "case {case}: adjusted({len_short}) = {short} not above \
                     adjusted({len_long}) = {long} at mean {mean:.2}"
                ),
            );
        }
        if short > raw || long > raw {
            return SuiteResult::fail(NAME, format!("case {case}: penalty raised fitness"));
        }
    }
    SuiteResult::pass(NAME, format!("{cases} random length pairs ordered"))
}

pub fn parsimony_order_suite(cases: usize, seed: u64) -> SuiteResult {
    parsimony_order_suite_with(adjusted_fitness, cases, seed)
}

/// Mutation must change length by at most one and never empty a sequence.
pub fn mutation_shape_suite(cases: usize, seed: u64) -> SuiteResult {
    const NAME: &str = "mutation_shape";
    let mut rng = RngStream::derive(seed, "verify/mutation");
    let pool: Vec<Arc<Agent>> = (0..5).map(|i| random_agent(&mut rng, 100 + i, 2)).collect();
    for case in 0..cases {
        let seq = random_sequence(&mut rng, 2, 6);
        let out = mutate(&seq, &pool, &mut rng);
        let delta = out.len() as i64 - seq.len() as i64;
        if !(-1..=1).contains(&delta) || out.len() == 0 {
            return SuiteResult::fail(
                NAME,
                format!("case {case}: length {} -> {}", seq.len(), out.len()),
            );
        }
    }
    SuiteResult::pass(NAME, format!("{cases} mutations kept the shape contract"))
}

/// Hebbian updates must stay inside `[p_min, p_max]` under any outcome mix,
/// and a run of 50 successes from 0.5 must end within one eta-step of p_max.
pub fn hebbian_bounds_suite(updates: usize, seed: u64) -> SuiteResult {
    const NAME: &str = "hebbian_bounds";
    let (eta, p_min, p_max) = (0.1, 0.01, 0.99);
    let mut rng = RngStream::derive(seed, "verify/hebbian");
    let mut p: f64 = p_min + (p_max - p_min) * rng.next_f64();
    for step in 0..updates {
        let outcome = if rng.chance(0.5) {
            MigrationOutcome::Success
        } else {
            MigrationOutcome::Failure
        };
        p = hebbian_update(p, outcome, eta, p_min, p_max);
        if !(p_min..=p_max).contains(&p) {
            return SuiteResult::fail(NAME, format!("step {step}: p = {p} escaped the bounds"));
        }
    }
    let mut q: f64 = 0.5;
    for _ in 0..50 {
        q = hebbian_update(q, MigrationOutcome::Success, eta, p_min, p_max);
    }
    if q < p_max - eta * (1.0 - p_max) {
        return SuiteResult::fail(
            NAME,
            format!("50 successes from 0.5 reached only {q}, below the cap region"),
        );
    }
    SuiteResult::pass(
        NAME,
        format!("{updates} mixed updates bounded; 50 successes reach {q:.4}"),
    )
}

/// Registry answers under unlimited budget must agree with an exhaustive
/// per-segment scan on randomly built connected registries (exact score
/// agreement per segment).
pub fn soa_oracle_suite(registries: usize, seed: u64) -> SuiteResult {
    const NAME: &str = "soa_oracle";
    let mut rng = RngStream::derive(seed, "verify/soa");
    for case in 0..registries {
        let mut registry = Registry::new();
        let nodes = 2 + rng.index(8);
        for n in 0..nodes {
            registry.add_node(HabitatId(n as u64));
        }
        for n in 1..nodes {
            // incremental random wiring keeps the redirect graph connected
            let peer = rng.index(n);
            registry.link(HabitatId(n as u64), HabitatId(peer as u64));
        }
        let mut services: Vec<Arc<Agent>> = Vec::new();
        let mut next_id = 0u64;
        for n in 0..nodes {
            for _ in 0..(1 + rng.index(4)) {
                let service = random_agent(&mut rng, next_id, 2);
                next_id += 1;
                registry.place_description(service.clone(), HabitatId(n as u64));
                services.push(service);
            }
        }
        let request = random_request(&mut rng, 2);
        let entry = HabitatId(rng.index(nodes) as u64);
        let response = soa_respond(&request, &registry, entry, u64::MAX);

        for (segment_index, segment) in request.segments.iter().enumerate() {
            // independent exhaustive oracle over every stored service
            let oracle_best = services
                .iter()
                .map(|s| {
                    segment
                        .iter()
                        .map(|r| {
                            s.attributes
                                .iter()
                                .map(|a| {
                                    a.components()
                                        .iter()
                                        .zip(r.components())
                                        .map(|(x, y)| x.abs_diff(*y))
                                        .sum::<u64>()
                                })
                                .min()
                                .unwrap()
                        })
                        .sum::<u64>()
                })
                .min()
                .unwrap();
            let chosen = match &response.chosen[segment_index] {
                Some(c) => c,
                None => {
                    return SuiteResult::fail(
                        NAME,
                        format!("case {case}: segment {segment_index} unserved with unlimited budget"),
                    )
                }
            };
            let got: u64 = segment
                .iter()
                .map(|r| {
                    chosen
                        .attributes
                        .iter()
                        .map(|a| {
                            a.components()
                                .iter()
                                .zip(r.components())
                                .map(|(x, y)| x.abs_diff(*y))
                                .sum::<u64>()
                        })
                        .min()
                        .unwrap()
                })
                .sum();
            if got != oracle_best {
                return SuiteResult::fail(
                    NAME,
                    format!(
                        "case {case}: segment {segment_index} chose score {got}, oracle {oracle_best}"
                    ),
                );
            }
        }
    }
    SuiteResult::pass(NAME, format!("{registries} random registries agree"))
}

/// Two replications of a small scenario must be identical.
pub fn determinism_suite() -> SuiteResult {
    const NAME: &str = "determinism";
    let cfg = ScenarioConfig {
        users: 10,
        initial_agents_per_user: 3,
        total_requests: 20,
        catalog_size: 8,
        profile_size: 4,
        seeds: vec![1],
        ..ScenarioConfig::default()
    };
    let a = run_scenario(&cfg, 11);
    let b = run_scenario(&cfg, 11);
    if a == b {
        SuiteResult::pass(NAME, "two replications of seed 11 identical".to_string())
    } else {
        SuiteResult::fail(NAME, "replications of seed 11 diverged".to_string())
    }
}

/// All suites at the reduced sizes the `verify` subcommand uses.
pub fn all_suites() -> Vec<SuiteResult> {
    vec![
        fitness_oracle_suite(1000, 101),
        selection_statistics_suite(100_000, 102),
        crossover_conservation_suite(2000, 103),
        parsimony_order_suite(2000, 104),
        mutation_shape_suite(2000, 105),
        hebbian_bounds_suite(100_000, 106),
        soa_oracle_suite(50, 107),
        determinism_suite(),
    ]
}
