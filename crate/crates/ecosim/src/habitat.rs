//! The habitat network: peer nodes holding agent pools, probabilistic
//! bi-directional connections reinforced by migration outcomes, user
//! modelling (deployment, requests, churn), and the request lifecycle that
//! drives evolution and migration.
//!
//! Both directed edges between a pair of habitats carry independent
//! probabilities. A migrant sequence is copied to the pools of the selected
//! targets and tracked in the destination's pending ledger; if it (or any of
//! its agents) shows up in a best-evolved sequence there within
//! `migration_ttl` destination-local requests, the exchange counts as a
//! success and both directed edges strengthen, otherwise both weaken.

use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use crate::config::{ScenarioConfig, Topology};
use crate::evolution::{evolve_request, EvolutionResult};
use crate::model::{Agent, AgentId, AgentSequence, Attribute, HabitatId, Request, UserId};
use crate::rng::RngStream;

/// Outcome of one attempted agent exchange between two habitats.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MigrationOutcome {
    Success,
    Failure,
}

/// Hebbian connection update. Success pulls the probability toward `p_max`
/// by a step of `eta * (1 - p)`; failure decays it multiplicatively by
/// `1 - eta`. The result is clamped to `[p_min, p_max]`.
pub fn hebbian_update(
    p: f64,
    outcome: MigrationOutcome,
    eta: f64,
    p_min: f64,
    p_max: f64,
) -> f64 {
    let updated = match outcome {
        MigrationOutcome::Success => p + eta * (1.0 - p),
        MigrationOutcome::Failure => p * (1.0 - eta),
    };
    updated.clamp(p_min, p_max)
}

/// A migrant awaiting its fate at a destination habitat.
#[derive(Clone, Debug)]
pub struct PendingMigration {
    pub migration_id: u64,
    pub migrant: AgentSequence,
    pub source: HabitatId,
    pub requests_remaining: u32,
}

/// A peer node: agent pool, stored sequences, outgoing connection
/// probabilities, and the pending-migration ledger.
#[derive(Debug, Default)]
pub struct Habitat {
    pub id: HabitatId,
    pool_agents: Vec<Arc<Agent>>,
    pool_agent_ids: HashSet<AgentId>,
    pool_sequences: Vec<AgentSequence>,
    pool_sequence_keys: HashSet<Vec<AgentId>>,
    /// Outgoing migration probabilities, keyed by target habitat id. The
    /// ascending-id order of this map is the documented edge order for
    /// migration draws. Never contains the habitat itself.
    pub outgoing: BTreeMap<HabitatId, f64>,
    pub pending_migrations: Vec<PendingMigration>,
}

impl Habitat {
    fn new(id: HabitatId) -> Self {
        Habitat {
            id,
            ..Default::default()
        }
    }

    pub fn pool_agents(&self) -> &[Arc<Agent>] {
        &self.pool_agents
    }

    pub fn pool_sequences(&self) -> &[AgentSequence] {
        &self.pool_sequences
    }

    /// Add an agent to the pool; duplicates (by id) are ignored.
    pub fn add_agent(&mut self, agent: Arc<Agent>) {
        if self.pool_agent_ids.insert(agent.id) {
            self.pool_agents.push(agent);
        }
    }

    /// Store a sequence in the pool; duplicates (by identity) are ignored.
    pub fn add_sequence(&mut self, seq: AgentSequence) {
        if self.pool_sequence_keys.insert(seq.id_key()) {
            self.pool_sequences.push(seq);
        }
    }
}

/// A simulated user: home habitat, the base attributes its agents and
/// requests vary around, and a request counter.
#[derive(Clone, Debug)]
pub struct User {
    pub id: UserId,
    pub habitat: HabitatId,
    pub profile: Vec<Attribute>,
    pub requests_submitted: u64,
}

/// What a habitat returns for a user request.
#[derive(Clone, Debug)]
pub struct ResponseRecord {
    pub best_sequence: AgentSequence,
    pub raw_fitness: f64,
    pub evaluations_used: u64,
}

/// Everything one churn event changed, so mirrored structures (the registry
/// baseline) can stay in sync.
#[derive(Debug)]
pub struct ChurnEvent {
    pub removed_habitat: HabitatId,
    pub added_habitat: HabitatId,
    pub added_neighbors: Vec<HabitatId>,
    pub deployed: Vec<Arc<Agent>>,
}

/// Mutable state of the ecosystem tier: habitats, users, id counters, and
/// the shared attribute catalog coherent requests are drawn from.
#[derive(Debug, Default)]
pub struct EcosystemState {
    pub habitats: BTreeMap<HabitatId, Habitat>,
    pub users: BTreeMap<UserId, User>,
    /// Live user ids in ascending order; the draw order for request picks.
    user_order: Vec<UserId>,
    /// Catalog of attribute archetypes shared by the whole user base; user
    /// profiles sample it, which is what makes different users' requests
    /// similar enough to learn from each other.
    pub catalog: Vec<Attribute>,
    next_agent_id: u64,
    next_user_id: u64,
    next_habitat_id: u64,
    next_migration_id: u64,
    /// Total agents ever deployed (the global service count).
    pub services_deployed: u64,
}

impl EcosystemState {
    pub fn user_ids(&self) -> &[UserId] {
        &self.user_order
    }

    pub fn user_count(&self) -> usize {
        self.user_order.len()
    }

    fn fresh_agent_id(&mut self) -> AgentId {
        let id = AgentId(self.next_agent_id);
        self.next_agent_id += 1;
        id
    }

    fn fresh_migration_id(&mut self) -> u64 {
        let id = self.next_migration_id;
        self.next_migration_id += 1;
        id
    }
}

fn random_attribute(arity: usize, rng: &mut RngStream) -> Attribute {
    Attribute::new((0..arity).map(|_| rng.index(101) as i64).collect())
}

/// A profile attribute plus Gaussian noise, rounded and clamped to the
/// component range. The same rule serves requests and deployments.
fn noisy_attribute(base: &Attribute, sigma: f64, rng: &mut RngStream) -> Attribute {
    Attribute::new(
        base.components()
            .iter()
            .map(|&c| {
                (c as f64 + rng.gaussian(sigma)).round().clamp(0.0, 100.0) as i64
            })
            .collect(),
    )
}

fn fresh_profile(cfg: &ScenarioConfig, catalog: &[Attribute], rng: &mut RngStream) -> Vec<Attribute> {
    let picks = rng.pick_indices(catalog.len(), cfg.profile_size);
    picks.into_iter().map(|i| catalog[i].clone()).collect()
}

/// Wire a new habitat into the graph: both directed edges to
/// `min(initial_degree, existing)` distinct uniformly chosen habitats, each
/// at probability `p_init`.
fn wire_randomly(
    state: &mut EcosystemState,
    habitat: HabitatId,
    cfg: &ScenarioConfig,
    rng: &mut RngStream,
) -> Vec<HabitatId> {
    let others: Vec<HabitatId> = state
        .habitats
        .keys()
        .copied()
        .filter(|&h| h != habitat)
        .collect();
    let degree = cfg.initial_degree.min(others.len());
    let chosen: Vec<HabitatId> = rng
        .pick_indices(others.len(), degree)
        .into_iter()
        .map(|i| others[i])
        .collect();
    for &peer in &chosen {
        state
            .habitats
            .get_mut(&habitat)
            .unwrap()
            .outgoing
            .insert(peer, cfg.p_init);
        state
            .habitats
            .get_mut(&peer)
            .unwrap()
            .outgoing
            .insert(habitat, cfg.p_init);
    }
    chosen
}

/// Watts-Strogatz wiring over the initial habitats: a ring with
/// `initial_degree` nearest neighbours, each edge rewired with probability
/// `rewire_beta`. Both directions start at `p_init`.
fn wire_small_world(state: &mut EcosystemState, cfg: &ScenarioConfig, rng: &mut RngStream) {
    let ids: Vec<HabitatId> = state.habitats.keys().copied().collect();
    let n = ids.len();
    if n < 2 {
        return;
    }
    let half = (cfg.initial_degree / 2).max(1);
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for i in 0..n {
        for j in 1..=half {
            let k = (i + j) % n;
            if i != k {
                edges.push((i, k));
            }
        }
    }
    let mut edge_set: HashSet<(usize, usize)> = edges
        .iter()
        .map(|&(a, b)| (a.min(b), a.max(b)))
        .collect();
    for e in edges.iter_mut() {
        if rng.chance(cfg.rewire_beta) {
            let (a, b) = *e;
            let candidate = rng.index(n);
            let key_old = (a.min(b), a.max(b));
            let key_new = (a.min(candidate), a.max(candidate));
            if candidate != a && !edge_set.contains(&key_new) {
                edge_set.remove(&key_old);
                edge_set.insert(key_new);
                *e = (a, candidate);
            }
        }
    }
    for (a, b) in edge_set {
        let (ha, hb) = (ids[a], ids[b]);
        state
            .habitats
            .get_mut(&ha)
            .unwrap()
            .outgoing
            .insert(hb, cfg.p_init);
        state
            .habitats
            .get_mut(&hb)
            .unwrap()
            .outgoing
            .insert(ha, cfg.p_init);
    }
}

/// Create a user with a fresh habitat (unwired) and profile.
fn spawn_user(state: &mut EcosystemState, cfg: &ScenarioConfig, rng: &mut RngStream) -> UserId {
    let user_id = UserId(state.next_user_id);
    state.next_user_id += 1;
    let habitat_id = HabitatId(state.next_habitat_id);
    state.next_habitat_id += 1;
    state.habitats.insert(habitat_id, Habitat::new(habitat_id));
    let catalog = state.catalog.clone();
    let profile = fresh_profile(cfg, &catalog, rng);
    state.users.insert(
        user_id,
        User {
            id: user_id,
            habitat: habitat_id,
            profile,
            requests_submitted: 0,
        },
    );
    state.user_order.push(user_id);
    user_id
}

/// Build the initial ecosystem: catalog, users with habitats, topology, and
/// the initial agent deployments. Returns the deployed agents in order so
/// the registry mirror can place them.
pub fn build_ecosystem(cfg: &ScenarioConfig, rng: &mut RngStream) -> (EcosystemState, Vec<Arc<Agent>>) {
    let mut state = EcosystemState {
        catalog: (0..cfg.catalog_size)
            .map(|_| random_attribute(cfg.arity, rng))
            .collect(),
        ..Default::default()
    };
    for _ in 0..cfg.users {
        spawn_user(&mut state, cfg, rng);
    }
    match cfg.topology {
        Topology::Random => {
            let ids: Vec<HabitatId> = state.habitats.keys().copied().collect();
            for id in ids {
                // wiring is incremental: each habitat links to peers created
                // before it, mirroring one-by-one arrival
                let earlier: Vec<HabitatId> = state
                    .habitats
                    .keys()
                    .copied()
                    .filter(|&h| h < id)
                    .collect();
                let degree = cfg.initial_degree.min(earlier.len());
                let chosen = rng.pick_indices(earlier.len(), degree);
                for i in chosen {
                    let peer = earlier[i];
                    state
                        .habitats
                        .get_mut(&id)
                        .unwrap()
                        .outgoing
                        .insert(peer, cfg.p_init);
                    state
                        .habitats
                        .get_mut(&peer)
                        .unwrap()
                        .outgoing
                        .insert(id, cfg.p_init);
                }
            }
        }
        Topology::SmallWorld => wire_small_world(&mut state, cfg, rng),
    }
    let mut deployed = Vec::new();
    let user_ids: Vec<UserId> = state.user_order.clone();
    for user_id in user_ids {
        for _ in 0..cfg.initial_agents_per_user {
            deployed.push(deploy_agent(&mut state, user_id, cfg, rng));
        }
    }
    (state, deployed)
}

/// Create and deploy one agent for the user: attributes are profile
/// attributes drawn uniformly, with the same Gaussian variation requests
/// use. The agent joins the user's habitat pool and the global service
/// count rises.
pub fn deploy_agent(
    state: &mut EcosystemState,
    user_id: UserId,
    cfg: &ScenarioConfig,
    rng: &mut RngStream,
) -> Arc<Agent> {
    let (habitat_id, attributes) = {
        let user = &state.users[&user_id];
        let attributes: Vec<Attribute> = (0..cfg.agent_attrs)
            .map(|_| {
                let base = &user.profile[rng.index(user.profile.len())];
                noisy_attribute(base, cfg.sigma, rng)
            })
            .collect();
        (user.habitat, attributes)
    };
    let agent = Arc::new(Agent::new(state.fresh_agent_id(), attributes, user_id));
    state
        .habitats
        .get_mut(&habitat_id)
        .expect("user's habitat exists")
        .add_agent(agent.clone());
    state.services_deployed += 1;
    agent
}

/// Generate a request for the user: `segments` segments of
/// `attrs_per_segment` attributes, each a profile attribute (cycled) with
/// independent Gaussian noise per component.
pub fn generate_request(
    user: &User,
    sigma: f64,
    segments: usize,
    attrs_per_segment: usize,
    rng: &mut RngStream,
) -> Request {
    assert!(segments >= 1);
    let mut segs = Vec::with_capacity(segments);
    let mut attr_index = 0;
    for _ in 0..segments {
        let mut seg = Vec::with_capacity(attrs_per_segment);
        for _ in 0..attrs_per_segment {
            let base = &user.profile[attr_index % user.profile.len()];
            seg.push(noisy_attribute(base, sigma, rng));
            attr_index += 1;
        }
        segs.push(seg);
    }
    Request::new(segs, user.id)
}

/// One Bernoulli draw per outgoing edge, in ascending target-id order;
/// returns the targets whose draw landed below the edge probability.
pub fn select_migration_targets(habitat: &Habitat, rng: &mut RngStream) -> Vec<HabitatId> {
    habitat
        .outgoing
        .iter()
        .filter(|(_, &p)| rng.chance(p))
        .map(|(&id, _)| id)
        .collect()
}

fn apply_exchange_outcome(
    state: &mut EcosystemState,
    a: HabitatId,
    b: HabitatId,
    outcome: MigrationOutcome,
    cfg: &ScenarioConfig,
) {
    for (from, to) in [(a, b), (b, a)] {
        if let Some(habitat) = state.habitats.get_mut(&from) {
            if let Some(p) = habitat.outgoing.get_mut(&to) {
                *p = hebbian_update(*p, outcome, cfg.eta, cfg.p_min, cfg.p_max);
            }
        }
    }
}

/// The request lifecycle at the user's habitat:
///
/// 1. evolve a response seeded from the habitat pool;
/// 2. store the best sequence and its constituent agents in the pool;
/// 3. offer the best sequence as a migrant to the probabilistically
///    selected neighbours (copies enter their pools; each registers a
///    pending migration with `migration_ttl` requests to prove useful);
/// 4. settle this habitat's pending ledger against the new best sequence,
///    updating both directed edges of each settled pair.
pub fn handle_request(
    state: &mut EcosystemState,
    user_id: UserId,
    request: &Request,
    cfg: &ScenarioConfig,
    rng: &mut RngStream,
) -> ResponseRecord {
    let habitat_id = state.users[&user_id].habitat;

    let result: EvolutionResult = {
        let habitat = &state.habitats[&habitat_id];
        assert!(
            !habitat.pool_agents().is_empty(),
            "habitat {habitat_id} has an empty pool and cannot instantiate a population"
        );
        evolve_request(
            request,
            habitat.pool_agents(),
            habitat.pool_sequences(),
            &cfg.ga,
            rng,
        )
    };
    let best = result.best_sequence.clone();

    {
        let habitat = state.habitats.get_mut(&habitat_id).unwrap();
        habitat.add_sequence(best.clone());
        for agent in best.agents() {
            habitat.add_agent(agent.clone());
        }
    }

    let targets = {
        let habitat = &state.habitats[&habitat_id];
        select_migration_targets(habitat, rng)
    };
    for target in targets {
        let migration_id = state.fresh_migration_id();
        let destination = state
            .habitats
            .get_mut(&target)
            .expect("edges only point at live habitats");
        for agent in best.agents() {
            destination.add_agent(agent.clone());
        }
        destination.add_sequence(best.clone());
        destination.pending_migrations.push(PendingMigration {
            migration_id,
            migrant: best.clone(),
            source: habitat_id,
            requests_remaining: cfg.migration_ttl,
        });
    }

    let best_ids: HashSet<AgentId> = best.agents().iter().map(|a| a.id).collect();
    let pending = std::mem::take(
        &mut state
            .habitats
            .get_mut(&habitat_id)
            .unwrap()
            .pending_migrations,
    );
    let mut kept = Vec::with_capacity(pending.len());
    let mut settled: Vec<(HabitatId, MigrationOutcome)> = Vec::new();
    for mut entry in pending {
        let used = entry.migrant == best
            || entry
                .migrant
                .agents()
                .iter()
                .any(|a| best_ids.contains(&a.id));
        if used {
            settled.push((entry.source, MigrationOutcome::Success));
        } else {
            entry.requests_remaining -= 1;
            if entry.requests_remaining == 0 {
                settled.push((entry.source, MigrationOutcome::Failure));
            } else {
                kept.push(entry);
            }
        }
    }
    state
        .habitats
        .get_mut(&habitat_id)
        .unwrap()
        .pending_migrations = kept;
    for (source, outcome) in settled {
        apply_exchange_outcome(state, source, habitat_id, outcome, cfg);
    }

    ResponseRecord {
        best_sequence: best,
        raw_fitness: result.best_raw_fitness,
        evaluations_used: result.evaluations_used,
    }
}

/// With probability `churn_rate`, replace one uniformly random user: its
/// habitat, edges, and pool disappear; a fresh user joins with a new
/// habitat wired at `p_init` and the initial agent deployments. The user
/// count never changes.
pub fn churn_step(
    state: &mut EcosystemState,
    cfg: &ScenarioConfig,
    rng: &mut RngStream,
) -> Option<ChurnEvent> {
    if cfg.churn_rate <= 0.0 || !rng.chance(cfg.churn_rate) {
        return None;
    }
    let victim = state.user_order[rng.index(state.user_order.len())];
    let dead_habitat = state.users[&victim].habitat;

    state.users.remove(&victim);
    state.user_order.retain(|&u| u != victim);
    state.habitats.remove(&dead_habitat);
    for habitat in state.habitats.values_mut() {
        habitat.outgoing.remove(&dead_habitat);
        habitat
            .pending_migrations
            .retain(|m| m.source != dead_habitat);
    }

    let newcomer = spawn_user(state, cfg, rng);
    let new_habitat = state.users[&newcomer].habitat;
    let added_neighbors = wire_randomly(state, new_habitat, cfg, rng);
    let deployed: Vec<Arc<Agent>> = (0..cfg.initial_agents_per_user)
        .map(|_| deploy_agent(state, newcomer, cfg, rng))
        .collect();

    Some(ChurnEvent {
        removed_habitat: dead_habitat,
        added_habitat: new_habitat,
        added_neighbors,
        deployed,
    })
}

/// Mean local clustering coefficient of the habitat graph, counting only
/// pairs whose stronger directed edge is at or above `threshold`.
pub fn clustering_coefficient(state: &EcosystemState, threshold: f64) -> f64 {
    let strong = |a: HabitatId, b: HabitatId| -> bool {
        let ab = state
            .habitats
            .get(&a)
            .and_then(|h| h.outgoing.get(&b))
            .copied()
            .unwrap_or(0.0);
        let ba = state
            .habitats
            .get(&b)
            .and_then(|h| h.outgoing.get(&a))
            .copied()
            .unwrap_or(0.0);
        ab.max(ba) >= threshold
    };
    let mut total = 0.0;
    let mut counted = 0usize;
    for (&id, habitat) in &state.habitats {
        let neighbors: Vec<HabitatId> = habitat
            .outgoing
            .keys()
            .copied()
            .filter(|&n| strong(id, n))
            .collect();
        if neighbors.len() < 2 {
            continue;
        }
        let mut linked = 0usize;
        let mut pairs = 0usize;
        for i in 0..neighbors.len() {
            for j in (i + 1)..neighbors.len() {
                pairs += 1;
                if strong(neighbors[i], neighbors[j]) {
                    linked += 1;
                }
            }
        }
        total += linked as f64 / pairs as f64;
        counted += 1;
    }
    if counted == 0 {
        0.0
    } else {
        total / counted as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::attr_distance;

    fn small_config() -> ScenarioConfig {
        ScenarioConfig {
            users: 6,
            initial_agents_per_user: 3,
            total_requests: 20,
            catalog_size: 8,
            profile_size: 4,
            segments: 2,
            attrs_per_segment: 2,
            churn_rate: 0.0,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn hebbian_success_and_failure_examples() {
        let up = hebbian_update(0.5, MigrationOutcome::Success, 0.1, 0.01, 0.99);
        assert!((up - 0.55).abs() < 1e-12);
        let down = hebbian_update(0.5, MigrationOutcome::Failure, 0.1, 0.01, 0.99);
        assert!((down - 0.45).abs() < 1e-12);
    }

    #[test]
    fn hebbian_clamps_at_the_caps() {
        assert_eq!(
            hebbian_update(0.99, MigrationOutcome::Success, 0.1, 0.01, 0.99),
            0.99
        );
        assert_eq!(
            hebbian_update(0.01, MigrationOutcome::Failure, 0.1, 0.01, 0.99),
            0.01
        );
    }

    #[test]
    fn fifty_successes_reach_the_cap_region() {
        let mut p = 0.5;
        for _ in 0..50 {
            p = hebbian_update(p, MigrationOutcome::Success, 0.1, 0.01, 0.99);
        }
        assert!(p >= 0.99 - 0.1 * (1.0 - 0.99));
        assert!(p <= 0.99);
    }

    #[test]
    fn migration_targets_empty_without_edges() {
        let habitat = Habitat::new(HabitatId(0));
        let mut rng = RngStream::derive(0, "targets");
        assert!(select_migration_targets(&habitat, &mut rng).is_empty());
    }

    #[test]
    fn zero_sigma_requests_equal_the_profile() {
        let cfg = small_config();
        let mut rng = RngStream::derive(5, "setup");
        let (state, _) = build_ecosystem(&cfg, &mut rng);
        let user = state.users.values().next().unwrap();
        let request = generate_request(user, 0.0, 2, 2, &mut rng);
        for (i, attr) in request.flattened().enumerate() {
            assert_eq!(attr, &user.profile[i % user.profile.len()]);
        }
    }

    #[test]
    fn requests_are_deterministic_per_stream() {
        let cfg = small_config();
        let mut rng = RngStream::derive(5, "setup");
        let (state, _) = build_ecosystem(&cfg, &mut rng);
        let user = state.users.values().next().unwrap();
        let a = generate_request(user, 2.0, 3, 4, &mut RngStream::derive(9, "req"));
        let b = generate_request(user, 2.0, 3, 4, &mut RngStream::derive(9, "req"));
        assert_eq!(a, b);
    }

    #[test]
    fn request_components_stay_in_range() {
        let cfg = small_config();
        let mut rng = RngStream::derive(6, "setup");
        let (state, _) = build_ecosystem(&cfg, &mut rng);
        let user = state.users.values().next().unwrap();
        let request = generate_request(user, 500.0, 3, 4, &mut rng);
        for attr in request.flattened() {
            for &c in attr.components() {
                assert!((0..=100).contains(&c));
            }
        }
    }

    #[test]
    fn initial_deployment_counts_match_users_times_agents() {
        let cfg = small_config();
        let mut rng = RngStream::derive(7, "setup");
        let (state, deployed) = build_ecosystem(&cfg, &mut rng);
        assert_eq!(deployed.len(), cfg.users * cfg.initial_agents_per_user);
        assert_eq!(state.services_deployed, deployed.len() as u64);
        let pooled: usize = state
            .habitats
            .values()
            .map(|h| h.pool_agents().len())
            .sum();
        assert_eq!(pooled, deployed.len());
    }

    #[test]
    fn zero_sigma_deployment_uses_profile_attributes() {
        let mut cfg = small_config();
        cfg.sigma = 0.0;
        let mut rng = RngStream::derive(8, "setup");
        let (mut state, _) = build_ecosystem(&cfg, &mut rng);
        let user_id = state.user_order[0];
        let agent = deploy_agent(&mut state, user_id, &cfg, &mut rng);
        let profile = &state.users[&user_id].profile;
        for attr in &agent.attributes {
            assert!(profile.iter().any(|p| p == attr));
        }
    }

    #[test]
    fn graph_edges_stay_in_bounds_and_point_at_live_habitats() {
        let cfg = small_config();
        let mut rng = RngStream::derive(9, "setup");
        let (state, _) = build_ecosystem(&cfg, &mut rng);
        for habitat in state.habitats.values() {
            for (&target, &p) in &habitat.outgoing {
                assert_ne!(target, habitat.id, "no self edges");
                assert!(state.habitats.contains_key(&target));
                assert!((cfg.p_min..=cfg.p_max).contains(&p));
            }
        }
    }

    #[test]
    fn small_world_wiring_is_symmetric_and_self_free() {
        let mut cfg = small_config();
        cfg.users = 20;
        cfg.topology = Topology::SmallWorld;
        let mut rng = RngStream::derive(10, "setup");
        let (state, _) = build_ecosystem(&cfg, &mut rng);
        for habitat in state.habitats.values() {
            for &target in habitat.outgoing.keys() {
                assert_ne!(target, habitat.id);
                assert!(state.habitats[&target].outgoing.contains_key(&habitat.id));
            }
        }
    }

    #[test]
    fn churn_rate_zero_is_a_no_op() {
        let cfg = small_config();
        let mut rng = RngStream::derive(11, "setup");
        let (mut state, _) = build_ecosystem(&cfg, &mut rng);
        let before: Vec<UserId> = state.user_order.clone();
        assert!(churn_step(&mut state, &cfg, &mut rng).is_none());
        assert_eq!(state.user_order, before);
    }

    #[test]
    fn churn_keeps_the_user_count_and_cleans_edges() {
        let mut cfg = small_config();
        cfg.churn_rate = 1.0;
        let mut rng = RngStream::derive(12, "setup");
        let (mut state, _) = build_ecosystem(&cfg, &mut rng);
        let users_before = state.user_count();
        let event = churn_step(&mut state, &cfg, &mut rng).expect("churn fires at rate 1");
        assert_eq!(state.user_count(), users_before);
        assert!(!state.habitats.contains_key(&event.removed_habitat));
        for habitat in state.habitats.values() {
            assert!(!habitat.outgoing.contains_key(&event.removed_habitat));
        }
        assert_eq!(event.deployed.len(), cfg.initial_agents_per_user);
        assert!(state.habitats.contains_key(&event.added_habitat));
    }

    /// Build a two-habitat world with deterministic pools for lifecycle tests.
    fn two_habitat_state(cfg: &ScenarioConfig) -> (EcosystemState, UserId, UserId) {
        let mut cfg2 = cfg.clone();
        cfg2.users = 2;
        cfg2.initial_degree = 1;
        cfg2.sigma = 0.0;
        let mut rng = RngStream::derive(100, "setup");
        let (state, _) = build_ecosystem(&cfg2, &mut rng);
        let ids: Vec<UserId> = state.user_order.clone();
        (state, ids[0], ids[1])
    }

    #[test]
    fn first_request_with_empty_ledger_changes_no_edges() {
        let cfg = small_config();
        let (mut state, ua, _) = two_habitat_state(&cfg);
        let edges_before: Vec<f64> = state
            .habitats
            .values()
            .flat_map(|h| h.outgoing.values().copied())
            .collect();
        let user = state.users[&ua].clone();
        let request = generate_request(&user, 0.0, 2, 2, &mut RngStream::derive(1, "r"));
        let mut cfg0 = cfg.clone();
        cfg0.sigma = 0.0;
        handle_request(&mut state, ua, &request, &cfg0, &mut RngStream::derive(2, "h"));
        let edges_after: Vec<f64> = state
            .habitats
            .values()
            .flat_map(|h| h.outgoing.values().copied())
            .collect();
        assert_eq!(edges_before, edges_after);
    }

    #[test]
    fn used_migrant_strengthens_both_edges() {
        let cfg = small_config();
        let (mut state, ua, ub) = two_habitat_state(&cfg);
        let (ha, hb) = (state.users[&ua].habitat, state.users[&ub].habitat);

        // plant a pending migrant at B whose agents match B's request exactly
        let profile_b = state.users[&ub].profile.clone();
        let perfect = Arc::new(Agent::new(
            AgentId(9999),
            profile_b.clone(),
            ua,
        ));
        let migrant = AgentSequence::singleton(perfect.clone());
        {
            let habitat_b = state.habitats.get_mut(&hb).unwrap();
            habitat_b.add_agent(perfect);
            habitat_b.add_sequence(migrant.clone());
            habitat_b.pending_migrations.push(PendingMigration {
                migration_id: 0,
                migrant,
                source: ha,
                requests_remaining: 5,
            });
        }
        let p_ab_before = state.habitats[&ha].outgoing[&hb];
        let p_ba_before = state.habitats[&hb].outgoing[&ha];

        let user_b = state.users[&ub].clone();
        let request = generate_request(&user_b, 0.0, 2, 2, &mut RngStream::derive(3, "r"));
        let mut cfg0 = cfg.clone();
        cfg0.sigma = 0.0;
        let response =
            handle_request(&mut state, ub, &request, &cfg0, &mut RngStream::derive(4, "h"));

        // the planted agent covers the request exactly, so the evolved best
        // must use it (fitness 1.0 is only reachable through it)
        assert_eq!(response.raw_fitness, 1.0);
        assert!(state.habitats[&ha].outgoing[&hb] > p_ab_before);
        assert!(state.habitats[&hb].outgoing[&ha] > p_ba_before);
    }

    #[test]
    fn unused_migrant_weakens_both_edges_after_ttl() {
        let mut cfg = small_config();
        cfg.migration_ttl = 2;
        let (mut state, ua, ub) = two_habitat_state(&cfg);
        let (ha, hb) = (state.users[&ua].habitat, state.users[&ub].habitat);

        // the migrant is maximally distant from anything B ever asks for,
        // and is kept out of B's pool so no evolved sequence can use it
        let dud = Arc::new(Agent::new(
            AgentId(8888),
            vec![Attribute::new(vec![100, 100])],
            ua,
        ));
        let migrant = AgentSequence::singleton(dud);
        state
            .habitats
            .get_mut(&hb)
            .unwrap()
            .pending_migrations
            .push(PendingMigration {
                migration_id: 0,
                migrant,
                source: ha,
                requests_remaining: cfg.migration_ttl,
            });

        // force B's requests away from (100,100): profile of zeros
        state.users.get_mut(&ub).unwrap().profile = vec![Attribute::new(vec![0, 0])];
        // and make B's pool match, so the dud never helps
        let user_b = state.users[&ub].clone();
        for a in state.habitats[&hb].pool_agents() {
            for attr in &a.attributes {
                // sanity: pool agents are far from the dud
                assert!(attr_distance(attr, &Attribute::new(vec![100, 100])) > 0);
            }
        }

        let p_ab_before = state.habitats[&ha].outgoing[&hb];
        let p_ba_before = state.habitats[&hb].outgoing[&ha];
        let mut cfg0 = cfg.clone();
        cfg0.sigma = 0.0;
        cfg0.churn_rate = 0.0;
        for i in 0..cfg.migration_ttl {
            let request =
                generate_request(&user_b, 0.0, 2, 2, &mut RngStream::derive(i as u64, "r"));
            handle_request(
                &mut state,
                ub,
                &request,
                &cfg0,
                &mut RngStream::derive(i as u64, "h"),
            );
        }
        assert!(state.habitats[&ha].outgoing[&hb] < p_ab_before);
        assert!(state.habitats[&hb].outgoing[&ha] < p_ba_before);
        assert!(state.habitats[&hb].pending_migrations.is_empty());
    }

    #[test]
    fn pool_never_shrinks_on_requests() {
        let cfg = small_config();
        let (mut state, ua, _) = two_habitat_state(&cfg);
        let habitat = state.users[&ua].habitat;
        let before = state.habitats[&habitat].pool_agents().len();
        let user = state.users[&ua].clone();
        let mut cfg0 = cfg.clone();
        cfg0.sigma = 0.0;
        for i in 0..5 {
            let request =
                generate_request(&user, 0.0, 2, 2, &mut RngStream::derive(i, "r"));
            handle_request(&mut state, ua, &request, &cfg0, &mut RngStream::derive(i, "h"));
        }
        assert!(state.habitats[&habitat].pool_agents().len() >= before);
    }

    #[test]
    fn repeated_hebbian_updates_respect_bounds() {
        let mut rng = RngStream::derive(55, "bounds");
        let mut p = 0.5;
        for _ in 0..100_000 {
            let outcome = if rng.chance(0.5) {
                MigrationOutcome::Success
            } else {
                MigrationOutcome::Failure
            };
            p = hebbian_update(p, outcome, 0.1, 0.01, 0.99);
            assert!((0.01..=0.99).contains(&p));
        }
    }
}
