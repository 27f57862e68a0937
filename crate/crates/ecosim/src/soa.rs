//! The comparison system: a distributed service registry with redirects and
//! no caching. Each registry node is paired 1:1 with a habitat and stores
//! the descriptions of the services deployed there; redirects mirror the
//! habitat graph's edges, unweighted.
//!
//! A query walks the redirect graph breadth-first for each request segment
//! in turn, scoring every locally stored description it encounters, and
//! halts globally once the granted comparison budget is spent. Repeated
//! requests re-pay the full traversal cost.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::sync::Arc;

use crate::model::{attr_distance, Agent, AgentId, Attribute, HabitatId, Request};

/// One registry peer: locally stored service descriptions plus redirect
/// links to other nodes, kept in ascending id order.
#[derive(Debug, Default)]
pub struct RegistryNode {
    pub descriptions: Vec<Arc<Agent>>,
    pub redirects: Vec<HabitatId>,
}

/// The whole distributed registry. Every deployed agent's description is
/// stored at exactly one node.
#[derive(Debug, Default)]
pub struct Registry {
    nodes: BTreeMap<HabitatId, RegistryNode>,
    placed: HashSet<AgentId>,
}

impl Registry {
    pub fn new() -> Self {
        Registry::default()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, id: HabitatId) -> Option<&RegistryNode> {
        self.nodes.get(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = (&HabitatId, &RegistryNode)> {
        self.nodes.iter()
    }

    /// Live description count across all nodes (the services available).
    pub fn description_count(&self) -> usize {
        self.nodes.values().map(|n| n.descriptions.len()).sum()
    }

    pub fn add_node(&mut self, id: HabitatId) {
        let previous = self.nodes.insert(id, RegistryNode::default());
        assert!(previous.is_none(), "registry node {id} already exists");
    }

    /// Mirror a habitat edge pair: both nodes redirect to each other.
    pub fn link(&mut self, a: HabitatId, b: HabitatId) {
        assert_ne!(a, b, "redirects never point at the node itself");
        for (from, to) in [(a, b), (b, a)] {
            let node = self
                .nodes
                .get_mut(&from)
                .expect("linking requires both nodes to exist");
            if let Err(at) = node.redirects.binary_search(&to) {
                node.redirects.insert(at, to);
            }
        }
    }

    /// Drop a node with its descriptions; other nodes' redirects to it
    /// disappear. Returns how many descriptions were lost.
    pub fn remove_node(&mut self, id: HabitatId) -> usize {
        let node = self.nodes.remove(&id).expect("removing a known node");
        for agent in &node.descriptions {
            self.placed.remove(&agent.id);
        }
        for other in self.nodes.values_mut() {
            if let Ok(at) = other.redirects.binary_search(&id) {
                other.redirects.remove(at);
            }
        }
        node.descriptions.len()
    }

    /// Store a description at the node paired with the deploying user's
    /// habitat. Placing the same agent twice is a hard error.
    pub fn place_description(&mut self, agent: Arc<Agent>, node: HabitatId) {
        assert!(
            self.placed.insert(agent.id),
            "description for agent {} is already placed",
            agent.id
        );
        self.nodes
            .get_mut(&node)
            .expect("placement targets a live node")
            .descriptions
            .push(agent);
    }
}

/// The baseline's answer: one chosen service per segment (none where the
/// budget ran out first) and the exact number of comparisons spent.
#[derive(Clone, Debug)]
pub struct SoaResponse {
    pub chosen: Vec<Option<Arc<Agent>>>,
    pub comparisons_used: u64,
}

impl SoaResponse {
    /// The chosen services in segment order, skipping unserved segments:
    /// the baseline's composed application.
    pub fn composition(&self) -> Vec<Arc<Agent>> {
        self.chosen.iter().flatten().cloned().collect()
    }
}

/// Score of one service against one segment: for each required attribute,
/// the distance to the service's nearest attribute, summed. One evaluation
/// of this is one budget unit.
fn segment_score(service: &Agent, segment: &[Attribute]) -> u64 {
    segment
        .iter()
        .map(|r| {
            service
                .attributes
                .iter()
                .map(|a| attr_distance(a, r))
                .min()
                .expect("agents carry at least one attribute")
        })
        .sum()
}

/// Answer a request from the registry under a comparison budget.
///
/// The request's own segments are the segmentation. Segments are served in
/// order; each restarts a breadth-first traversal of the redirect graph
/// from `entry_node` (no caching) and keeps the best-scoring service seen,
/// ties going to the earliest. Scoring stops mid-node when the budget runs
/// out, and later segments are left unserved.
pub fn soa_respond(
    request: &Request,
    registry: &Registry,
    entry_node: HabitatId,
    budget: u64,
) -> SoaResponse {
    assert!(
        registry.nodes.contains_key(&entry_node),
        "entry node {entry_node} is not in the registry"
    );
    let mut comparisons: u64 = 0;
    let mut chosen: Vec<Option<Arc<Agent>>> = vec![None; request.segments.len()];

    'segments: for (segment_index, segment) in request.segments.iter().enumerate() {
        let mut best: Option<(u64, Arc<Agent>)> = None;
        let mut visited: HashSet<HabitatId> = HashSet::new();
        let mut queue: VecDeque<HabitatId> = VecDeque::new();
        visited.insert(entry_node);
        queue.push_back(entry_node);

        while let Some(node_id) = queue.pop_front() {
            let node = &registry.nodes[&node_id];
            for service in &node.descriptions {
                if comparisons >= budget {
                    chosen[segment_index] = best.map(|(_, s)| s);
                    break 'segments;
                }
                comparisons += 1;
                let score = segment_score(service, segment);
                let better = match &best {
                    None => true,
                    Some((incumbent, _)) => score < *incumbent,
                };
                if better {
                    best = Some((score, service.clone()));
                }
            }
            for &next in &node.redirects {
                if visited.insert(next) {
                    queue.push_back(next);
                }
            }
        }
        chosen[segment_index] = best.map(|(_, s)| s);
    }

    SoaResponse {
        chosen,
        comparisons_used: comparisons,
    }
}
