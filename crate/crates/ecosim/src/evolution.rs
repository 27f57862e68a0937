//! Per-request genetic algorithm over variable-length agent sequences:
//! distance-based fitness, parsimony pressure against bloat,
//! fitness-proportional non-elitist selection, one-point crossover with
//! independent cut points, point mutation from the local agent pool, and a
//! dynamic population size that grows with the average sequence length.

use std::sync::Arc;

use crate::model::{min_dist, Agent, AgentSequence, Request};
use crate::rng::RngStream;

/// Knobs of the per-request genetic algorithm.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct GaConfig {
    /// Fraction of the population recombined each generation.
    pub crossover_fraction: f64,
    /// Fraction of the population receiving one point mutation each generation.
    pub mutation_fraction: f64,
    /// Strength of the penalty on longer-than-average sequences.
    pub parsimony_alpha: f64,
    /// Population size at mean seed length zero.
    pub pop_base: usize,
    /// Population growth per unit of mean sequence length.
    pub pop_slope: f64,
    /// Hard population ceiling.
    pub pop_cap: usize,
    /// Generation cap per request.
    pub max_generations: usize,
    /// Stop after this many generations without a best-ever improvement.
    pub stagnation_window: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            crossover_fraction: 0.10,
            mutation_fraction: 0.10,
            parsimony_alpha: 0.05,
            pop_base: 20,
            pop_slope: 5.0,
            pop_cap: 200,
            max_generations: 100,
            stagnation_window: 15,
        }
    }
}

/// Outcome of one evolutionary run.
#[derive(Clone, Debug)]
pub struct EvolutionResult {
    pub best_sequence: AgentSequence,
    /// Raw fitness of the best sequence, in (0, 1].
    pub best_raw_fitness: f64,
    pub generations_run: usize,
    /// Number of fitness evaluations spent; the budget granted to the
    /// registry baseline for the same request.
    pub evaluations_used: u64,
}

/// Total distance from a sequence to every required attribute of the request
/// (the request flattened across segments), plus the fitness it implies.
/// Distance is exact integer arithmetic; fitness is `1 / (1 + D)`.
pub fn fitness_detail(seq: &AgentSequence, request: &Request) -> (f64, u64) {
    let total: u64 = request.flattened().map(|r| min_dist(seq, r)).sum();
    (1.0 / (1.0 + total as f64), total)
}

/// Fitness of a sequence against a request, in (0, 1]; 1.0 iff every
/// required attribute is matched exactly.
pub fn fitness(seq: &AgentSequence, request: &Request) -> f64 {
    fitness_detail(seq, request).0
}

/// Parsimony pressure: sequences at or below the population's mean length
/// keep their raw fitness; longer ones are divided by
/// `1 + alpha * (length - mean_length)`.
pub fn adjusted_fitness(raw: f64, length: usize, mean_length: f64, alpha: f64) -> f64 {
    let len = length as f64;
    if len <= mean_length {
        raw
    } else {
        raw / (1.0 + alpha * (len - mean_length))
    }
}

/// Population size for a given mean sequence length:
/// `min(pop_cap, pop_base + round(pop_slope * mean_length))`.
pub fn population_size(mean_seed_length: f64, cfg: &GaConfig) -> usize {
    let grown = cfg.pop_base + (cfg.pop_slope * mean_seed_length).round() as usize;
    grown.min(cfg.pop_cap)
}

/// Fitness-proportional, non-elitist selection: draws `target_size`
/// individuals with replacement, each draw picking individual `i` with
/// probability `f_i / sum(f)`. No individual is guaranteed survival.
pub fn select_next_generation(
    scored: &[(AgentSequence, f64)],
    target_size: usize,
    rng: &mut RngStream,
) -> Vec<AgentSequence> {
    assert!(!scored.is_empty(), "cannot select from an empty population");
    let mut cumulative = Vec::with_capacity(scored.len());
    let mut total = 0.0;
    for (_, f) in scored {
        assert!(*f > 0.0, "adjusted fitness must stay strictly positive");
        total += f;
        cumulative.push(total);
    }
    let mut next = Vec::with_capacity(target_size);
    for _ in 0..target_size {
        let x = rng.next_f64() * total;
        let idx = cumulative.partition_point(|&c| c <= x).min(scored.len() - 1);
        next.push(scored[idx].0.clone());
    }
    next
}

/// One-point crossover at explicit cut points: swaps the parents' tails.
/// `c1` must lie in `[1, p1.len() - 1]` and `c2` in `[1, p2.len() - 1]`.
pub fn crossover_at(
    p1: &AgentSequence,
    p2: &AgentSequence,
    c1: usize,
    c2: usize,
) -> (AgentSequence, AgentSequence) {
    assert!(c1 >= 1 && c1 < p1.len(), "cut point outside first parent");
    assert!(c2 >= 1 && c2 < p2.len(), "cut point outside second parent");
    let mut left: Vec<Arc<Agent>> = p1.agents()[..c1].to_vec();
    left.extend_from_slice(&p2.agents()[c2..]);
    let mut right: Vec<Arc<Agent>> = p2.agents()[..c2].to_vec();
    right.extend_from_slice(&p1.agents()[c1..]);
    (AgentSequence::new(left), AgentSequence::new(right))
}

/// One-point crossover with independent uniform cut points per parent, so
/// offspring lengths can differ from both parents'. Parents shorter than two
/// agents are returned unchanged.
pub fn crossover_one_point(
    p1: &AgentSequence,
    p2: &AgentSequence,
    rng: &mut RngStream,
) -> (AgentSequence, AgentSequence) {
    if p1.len() < 2 || p2.len() < 2 {
        return (p1.clone(), p2.clone());
    }
    let c1 = 1 + rng.index(p1.len() - 1);
    let c2 = 1 + rng.index(p2.len() - 1);
    crossover_at(p1, p2, c1, c2)
}

fn insert_at(seq: &AgentSequence, pos: usize, agent: Arc<Agent>) -> AgentSequence {
    let mut agents = seq.agents().to_vec();
    agents.insert(pos, agent);
    AgentSequence::new(agents)
}

fn replace_at(seq: &AgentSequence, pos: usize, agent: Arc<Agent>) -> AgentSequence {
    let mut agents = seq.agents().to_vec();
    agents[pos] = agent;
    AgentSequence::new(agents)
}

fn delete_at(seq: &AgentSequence, pos: usize) -> AgentSequence {
    let mut agents = seq.agents().to_vec();
    agents.remove(pos);
    AgentSequence::new(agents)
}

/// One point mutation: insertion, replacement, or deletion, chosen uniformly,
/// at a uniform random position. Insertions and replacements draw a uniform
/// agent from the local pool. A deletion rolled on a length-1 sequence is
/// applied as a replacement instead, so sequences never become empty.
pub fn mutate(
    seq: &AgentSequence,
    local_pool: &[Arc<Agent>],
    rng: &mut RngStream,
) -> AgentSequence {
    assert!(
        !local_pool.is_empty(),
        "cannot mutate without agents in the local pool"
    );
    match rng.index(3) {
        0 => {
            let pos = rng.index(seq.len() + 1);
            let agent = local_pool[rng.index(local_pool.len())].clone();
            insert_at(seq, pos, agent)
        }
        1 => {
            let pos = rng.index(seq.len());
            let agent = local_pool[rng.index(local_pool.len())].clone();
            replace_at(seq, pos, agent)
        }
        _ => {
            if seq.len() == 1 {
                let pos = rng.index(seq.len());
                let agent = local_pool[rng.index(local_pool.len())].clone();
                replace_at(seq, pos, agent)
            } else {
                delete_at(seq, rng.index(seq.len()))
            }
        }
    }
}

/// Best-ever ordering: smaller total distance wins; ties go to the shorter
/// sequence; remaining ties keep the earlier discovery.
fn improves(candidate: (u64, usize), incumbent: (u64, usize)) -> bool {
    candidate.0 < incumbent.0 || (candidate.0 == incumbent.0 && candidate.1 < incumbent.1)
}

/// Evolve a response to `request`, seeded from the habitat's agent pool and
/// previously stored sequences.
///
/// The initial population holds each stored sequence once, newest first, up
/// to half the population; the remainder are singleton sequences of agents
/// drawn uniformly from the pool. Each generation evaluates every individual,
/// updates the best-ever (never lost to non-elitist selection), then selects,
/// recombines a random fraction, and mutates a random fraction. The loop
/// stops at the generation cap or after `stagnation_window` generations
/// without a best-ever improvement.
pub fn evolve_request(
    request: &Request,
    seed_pool: &[Arc<Agent>],
    seed_sequences: &[AgentSequence],
    cfg: &GaConfig,
    rng: &mut RngStream,
) -> EvolutionResult {
    assert!(
        !seed_pool.is_empty(),
        "cannot instantiate a population from an empty agent pool"
    );

    let mean_seed_length = if seed_sequences.is_empty() {
        0.0
    } else {
        seed_sequences.iter().map(|s| s.len()).sum::<usize>() as f64
            / seed_sequences.len() as f64
    };
    let initial_size = population_size(mean_seed_length, cfg);

    let mut population: Vec<AgentSequence> = seed_sequences
        .iter()
        .rev() // newest stored sequences first
        .take(initial_size / 2)
        .cloned()
        .collect();
    while population.len() < initial_size {
        let agent = seed_pool[rng.index(seed_pool.len())].clone();
        population.push(AgentSequence::singleton(agent));
    }

    let mut best: Option<(AgentSequence, u64)> = None;
    let mut evaluations: u64 = 0;
    let mut generations_run = 0;
    let mut stagnant = 0;

    for generation in 1..=cfg.max_generations {
        generations_run = generation;

        let scored: Vec<(f64, u64)> = population
            .iter()
            .map(|seq| fitness_detail(seq, request))
            .collect();
        evaluations += population.len() as u64;

        let mut improved = false;
        for (seq, &(_, dist)) in population.iter().zip(&scored) {
            let candidate = (dist, seq.len());
            let take = match &best {
                None => true,
                Some((b, d)) => improves(candidate, (*d, b.len())),
            };
            if take {
                best = Some((seq.clone(), dist));
                improved = true;
            }
        }

        if improved {
            stagnant = 0;
        } else {
            stagnant += 1;
            if stagnant >= cfg.stagnation_window {
                break;
            }
        }
        if generation == cfg.max_generations {
            break;
        }

        let mean_length =
            population.iter().map(|s| s.len()).sum::<usize>() as f64 / population.len() as f64;
        let adjusted: Vec<(AgentSequence, f64)> = population
            .iter()
            .zip(&scored)
            .map(|(seq, &(raw, _))| {
                (
                    seq.clone(),
                    adjusted_fitness(raw, seq.len(), mean_length, cfg.parsimony_alpha),
                )
            })
            .collect();

        let target = population_size(mean_length, cfg);
        population = select_next_generation(&adjusted, target, rng);

        let mut pair_count = (cfg.crossover_fraction * target as f64).round() as usize;
        pair_count &= !1; // recombination needs whole pairs
        if pair_count >= 2 {
            let chosen = rng.pick_indices(target, pair_count);
            for pair in chosen.chunks_exact(2) {
                let (a, b) = (pair[0], pair[1]);
                let (c1, c2) = crossover_one_point(&population[a], &population[b], rng);
                population[a] = c1;
                population[b] = c2;
            }
        }

        let mutant_count = (cfg.mutation_fraction * target as f64).round() as usize;
        if mutant_count > 0 {
            let chosen = rng.pick_indices(target, mutant_count);
            for idx in chosen {
                population[idx] = mutate(&population[idx], seed_pool, rng);
            }
        }
    }

    let (best_sequence, best_dist) = best.expect("at least one generation is always evaluated");
    EvolutionResult {
        best_sequence,
        best_raw_fitness: 1.0 / (1.0 + best_dist as f64),
        generations_run,
        evaluations_used: evaluations,
    }
}
