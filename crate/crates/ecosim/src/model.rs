//! Core domain types and the attribute-distance primitives everything else
//! builds on.
//!
//! An [`Agent`] stands in for a deployed service: an identifier plus a
//! non-empty set of numeric attribute tuples describing what it offers. An
//! [`AgentSequence`] is an ordered composition of agents (one candidate
//! application), and a [`Request`] is a list of attribute segments describing
//! the application a user wants.

use std::fmt;
use std::sync::Arc;

macro_rules! id_type {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
        pub struct $name(pub u64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_type!(
    /// Unique agent identifier within a simulation run.
    AgentId
);
id_type!(
    /// Unique user identifier within a simulation run.
    UserId
);
id_type!(
    /// Unique habitat identifier; registry nodes are keyed by the same id.
    HabitatId
);

/// Smallest and largest value an attribute component may take.
pub const COMPONENT_MIN: i64 = 0;
pub const COMPONENT_MAX: i64 = 100;

/// A fixed-arity tuple of integer components in `[0, 100]`. Every attribute
/// in a run has the same arity (the configured `arity`, default 2).
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Attribute {
    components: Vec<i64>,
}

impl Attribute {
    pub fn new(components: Vec<i64>) -> Self {
        assert!(!components.is_empty(), "attribute arity must be at least 1");
        debug_assert!(
            components
                .iter()
                .all(|&c| (COMPONENT_MIN..=COMPONENT_MAX).contains(&c)),
            "attribute component out of range: {components:?}"
        );
        Attribute { components }
    }

    pub fn components(&self) -> &[i64] {
        &self.components
    }

    pub fn arity(&self) -> usize {
        self.components.len()
    }
}

/// L1 distance between two attributes: the sum of absolute component
/// differences. Arity mismatch signals a corrupted configuration and panics.
pub fn attr_distance(a: &Attribute, r: &Attribute) -> u64 {
    assert_eq!(
        a.arity(),
        r.arity(),
        "attribute arity mismatch ({} vs {})",
        a.arity(),
        r.arity()
    );
    a.components
        .iter()
        .zip(&r.components)
        .map(|(x, y)| x.abs_diff(*y))
        .sum()
}

/// A service's representative: an id, the attribute tuples describing it,
/// and the user that deployed it.
#[derive(Debug)]
pub struct Agent {
    pub id: AgentId,
    pub attributes: Vec<Attribute>,
    pub origin_user: UserId,
}

impl Agent {
    pub fn new(id: AgentId, attributes: Vec<Attribute>, origin_user: UserId) -> Self {
        assert!(!attributes.is_empty(), "agent must carry at least one attribute");
        Agent {
            id,
            attributes,
            origin_user,
        }
    }
}

/// An ordered, never-empty list of agents: one individual of an evolving
/// population, and one candidate application. Repeated agents are allowed.
///
/// Agents are shared immutably, so cloning a sequence is cheap. Two
/// sequences are equal when their agent id lists are equal.
#[derive(Clone, Debug)]
pub struct AgentSequence {
    agents: Vec<Arc<Agent>>,
}

impl AgentSequence {
    pub fn new(agents: Vec<Arc<Agent>>) -> Self {
        assert!(!agents.is_empty(), "agent sequences are never empty");
        AgentSequence { agents }
    }

    pub fn singleton(agent: Arc<Agent>) -> Self {
        AgentSequence {
            agents: vec![agent],
        }
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn agents(&self) -> &[Arc<Agent>] {
        &self.agents
    }

    /// All attributes of all member agents, in sequence order.
    pub fn attributes(&self) -> impl Iterator<Item = &Attribute> {
        self.agents.iter().flat_map(|a| a.attributes.iter())
    }

    /// Identity key: the ordered list of member agent ids.
    pub fn id_key(&self) -> Vec<AgentId> {
        self.agents.iter().map(|a| a.id).collect()
    }

    pub fn contains_agent(&self, id: AgentId) -> bool {
        self.agents.iter().any(|a| a.id == id)
    }
}

impl PartialEq for AgentSequence {
    fn eq(&self, other: &Self) -> bool {
        self.agents.len() == other.agents.len()
            && self
                .agents
                .iter()
                .zip(&other.agents)
                .all(|(a, b)| a.id == b.id)
    }
}

impl Eq for AgentSequence {}

/// Smallest distance from any attribute of any member of `seq` to the
/// required attribute `r`.
pub fn min_dist(seq: &AgentSequence, r: &Attribute) -> u64 {
    seq.attributes()
        .map(|a| attr_distance(a, r))
        .min()
        .expect("sequence is never empty")
}

/// A user's desired application: a non-empty list of non-empty attribute
/// segments. Fitness treats the request as the flattened multiset of all
/// attributes; the segments drive the registry baseline's decomposition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Request {
    pub segments: Vec<Vec<Attribute>>,
    pub requester: UserId,
}

impl Request {
    pub fn new(segments: Vec<Vec<Attribute>>, requester: UserId) -> Self {
        assert!(!segments.is_empty(), "request must have at least one segment");
        assert!(
            segments.iter().all(|s| !s.is_empty()),
            "request segments are never empty"
        );
        Request {
            segments,
            requester,
        }
    }

    /// All required attributes across segments, in order.
    pub fn flattened(&self) -> impl Iterator<Item = &Attribute> {
        self.segments.iter().flatten()
    }

    /// Number of attributes across all segments.
    pub fn flat_len(&self) -> usize {
        self.segments.iter().map(|s| s.len()).sum()
    }

    /// Arity of the request's attributes.
    pub fn arity(&self) -> usize {
        self.segments[0][0].arity()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn attr(components: &[i64]) -> Attribute {
        Attribute::new(components.to_vec())
    }

    fn agent_with(id: u64, attrs: &[&[i64]]) -> Arc<Agent> {
        Arc::new(Agent::new(
            AgentId(id),
            attrs.iter().map(|c| attr(c)).collect(),
            UserId(0),
        ))
    }

    #[test]
    fn distance_of_identical_attributes_is_zero() {
        assert_eq!(attr_distance(&attr(&[1, 2]), &attr(&[1, 2])), 0);
    }

    #[test]
    fn distance_sums_component_differences() {
        assert_eq!(attr_distance(&attr(&[0, 0]), &attr(&[3, 4])), 7);
    }

    #[test]
    fn distance_is_symmetric() {
        assert_eq!(attr_distance(&attr(&[5, 1]), &attr(&[1, 5])), 8);
        assert_eq!(attr_distance(&attr(&[1, 5]), &attr(&[5, 1])), 8);
    }

    #[test]
    #[should_panic(expected = "arity mismatch")]
    fn distance_rejects_arity_mismatch() {
        attr_distance(&attr(&[1]), &attr(&[1, 2]));
    }

    #[test]
    fn min_dist_identity_case() {
        let seq = AgentSequence::singleton(agent_with(1, &[&[1, 1]]));
        assert_eq!(min_dist(&seq, &attr(&[1, 1])), 0);
    }

    #[test]
    fn min_dist_scans_all_member_attributes() {
        // Brute-force expectation computed by hand over {(0,0),(4,4)}:
        // r=(5,5): d((0,0))=10, d((4,4))=2 -> 2
        // r=(1,0): d((0,0))=1,  d((4,4))=7 -> 1
        let seq = AgentSequence::singleton(agent_with(1, &[&[0, 0], &[4, 4]]));
        assert_eq!(min_dist(&seq, &attr(&[5, 5])), 2);
        assert_eq!(min_dist(&seq, &attr(&[1, 0])), 1);
    }

    #[test]
    #[should_panic(expected = "never empty")]
    fn empty_sequence_is_rejected() {
        AgentSequence::new(Vec::new());
    }

    #[test]
    #[should_panic(expected = "at least one attribute")]
    fn agent_without_attributes_is_rejected() {
        Agent::new(AgentId(0), Vec::new(), UserId(0));
    }

    #[test]
    #[should_panic(expected = "segment")]
    fn request_with_empty_segment_is_rejected() {
        Request::new(vec![vec![attr(&[1, 1])], vec![]], UserId(0));
    }

    #[test]
    fn sequence_equality_is_by_agent_ids() {
        let a = agent_with(1, &[&[1, 1]]);
        let b = agent_with(2, &[&[1, 1]]);
        let s1 = AgentSequence::new(vec![a.clone(), b.clone()]);
        let s2 = AgentSequence::new(vec![a.clone(), b.clone()]);
        let s3 = AgentSequence::new(vec![b, a]);
        assert_eq!(s1, s2);
        assert_ne!(s1, s3);
    }

    prop_compose! {
        fn arb_attr(arity: usize)
            (components in prop::collection::vec(COMPONENT_MIN..=COMPONENT_MAX, arity))
            -> Attribute
        {
            Attribute::new(components)
        }
    }

    proptest! {
        #[test]
        fn distance_is_a_metric(
            a in arb_attr(3),
            b in arb_attr(3),
            c in arb_attr(3),
        ) {
            // identity of indiscernibles
            prop_assert_eq!(attr_distance(&a, &a), 0);
            prop_assert_eq!(attr_distance(&a, &b) == 0, a == b);
            // symmetry
            prop_assert_eq!(attr_distance(&a, &b), attr_distance(&b, &a));
            // triangle inequality
            prop_assert!(
                attr_distance(&a, &c) <= attr_distance(&a, &b) + attr_distance(&b, &c)
            );
        }

        #[test]
        fn min_dist_matches_brute_force_scan(
            attrs in prop::collection::vec(
                prop::collection::vec(arb_attr(2), 1..4), 1..5),
            r in arb_attr(2),
        ) {
            let agents: Vec<Arc<Agent>> = attrs
                .iter()
                .enumerate()
                .map(|(i, a)| Arc::new(Agent::new(AgentId(i as u64), a.clone(), UserId(0))))
                .collect();
            let seq = AgentSequence::new(agents);
            // independent scan, not via min_dist
            let brute = attrs
                .iter()
                .flatten()
                .map(|a| {
                    a.components()
                        .iter()
                        .zip(r.components())
                        .map(|(x, y)| x.abs_diff(*y))
                        .sum::<u64>()
                })
                .min()
                .unwrap();
            prop_assert_eq!(min_dist(&seq, &r), brute);
            for a in seq.attributes() {
                prop_assert!(min_dist(&seq, &r) <= attr_distance(a, &r));
            }
        }
    }
}
