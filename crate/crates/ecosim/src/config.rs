//! Scenario configuration: documented defaults, flat key-value config files,
//! and command-line overrides.
//!
//! Precedence is defaults < file < overrides. Every key is validated with an
//! error naming the key and the violated constraint, and the resolved
//! configuration can be printed in a form that parses back to itself.

use std::fmt;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::evolution::GaConfig;

/// How the initial habitat graph is wired.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    /// Each habitat connects to `initial_degree` uniformly random peers.
    Random,
    /// Ring over the initial habitats with `initial_degree` nearest
    /// neighbours, each edge rewired with probability `rewire_beta`.
    SmallWorld,
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Topology::Random => write!(f, "random"),
            Topology::SmallWorld => write!(f, "smallworld"),
        }
    }
}

/// Full configuration of one experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub users: usize,
    pub initial_agents_per_user: usize,
    pub requests_between_deployments: u64,
    pub total_requests: u64,
    /// Arity of every attribute tuple in the run.
    pub arity: usize,
    /// Size of the shared attribute catalog user profiles are drawn from.
    pub catalog_size: usize,
    /// Number of catalog attributes in each user's profile.
    pub profile_size: usize,
    /// Segments per request.
    pub segments: usize,
    /// Attributes per request segment.
    pub attrs_per_segment: usize,
    /// Attributes per deployed agent.
    pub agent_attrs: usize,
    /// Standard deviation of the Gaussian noise on requests and deployments.
    pub sigma: f64,
    #[serde(flatten)]
    pub ga: GaConfig,
    /// Hebbian learning rate for connection updates.
    pub eta: f64,
    pub p_min: f64,
    pub p_max: f64,
    /// Probability assigned to freshly wired connections.
    pub p_init: f64,
    /// Destination-local requests a migrant may wait before counting as a
    /// failed exchange.
    pub migration_ttl: u32,
    /// Per-step probability that one user leaves and a new one joins.
    pub churn_rate: f64,
    pub topology: Topology,
    /// Peers each new habitat wires to (capped by the habitats available).
    pub initial_degree: usize,
    /// Rewiring probability of the small-world generator.
    pub rewire_beta: f64,
    /// Window length (in requests) for aggregation and crossover detection.
    pub window: usize,
    pub seeds: Vec<u64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            users: 100,
            initial_agents_per_user: 5,
            requests_between_deployments: 3,
            total_requests: 600,
            arity: 2,
            catalog_size: 12,
            profile_size: 6,
            segments: 3,
            attrs_per_segment: 2,
            agent_attrs: 2,
            sigma: 2.0,
            ga: GaConfig::default(),
            eta: 0.1,
            p_min: 0.01,
            p_max: 0.99,
            p_init: 0.5,
            migration_ttl: 5,
            churn_rate: 0.01,
            topology: Topology::Random,
            initial_degree: 4,
            rewire_beta: 0.1,
            window: 25,
            seeds: (1..=10).collect(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Malformed { line: usize, text: String },
    #[error("unknown key: {key}")]
    UnknownKey { key: String },
    #[error("{key}: expected {expected}, got `{value}`")]
    TypeMismatch {
        key: String,
        expected: &'static str,
        value: String,
    },
    #[error("{key}: {constraint}")]
    Invalid { key: String, constraint: String },
}

fn invalid(key: &str, constraint: &str) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        constraint: constraint.to_string(),
    }
}

macro_rules! parse_as {
    ($key:expr, $value:expr, $ty:ty, $expected:expr) => {
        $value
            .parse::<$ty>()
            .map_err(|_| ConfigError::TypeMismatch {
                key: $key.to_string(),
                expected: $expected,
                value: $value.to_string(),
            })?
    };
}

impl ScenarioConfig {
    /// Apply one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        match key {
            "users" => self.users = parse_as!(key, value, usize, "an integer"),
            "initial_agents_per_user" => {
                self.initial_agents_per_user = parse_as!(key, value, usize, "an integer")
            }
            "requests_between_deployments" => {
                self.requests_between_deployments = parse_as!(key, value, u64, "an integer")
            }
            "total_requests" => self.total_requests = parse_as!(key, value, u64, "an integer"),
            "arity" => self.arity = parse_as!(key, value, usize, "an integer"),
            "catalog_size" => self.catalog_size = parse_as!(key, value, usize, "an integer"),
            "profile_size" => self.profile_size = parse_as!(key, value, usize, "an integer"),
            "segments" => self.segments = parse_as!(key, value, usize, "an integer"),
            "attrs_per_segment" => {
                self.attrs_per_segment = parse_as!(key, value, usize, "an integer")
            }
            "agent_attrs" => self.agent_attrs = parse_as!(key, value, usize, "an integer"),
            "sigma" => self.sigma = parse_as!(key, value, f64, "a number"),
            "crossover_fraction" => {
                self.ga.crossover_fraction = parse_as!(key, value, f64, "a number")
            }
            "mutation_fraction" => {
                self.ga.mutation_fraction = parse_as!(key, value, f64, "a number")
            }
            "parsimony_alpha" => self.ga.parsimony_alpha = parse_as!(key, value, f64, "a number"),
            "pop_base" => self.ga.pop_base = parse_as!(key, value, usize, "an integer"),
            "pop_slope" => self.ga.pop_slope = parse_as!(key, value, f64, "a number"),
            "pop_cap" => self.ga.pop_cap = parse_as!(key, value, usize, "an integer"),
            "max_generations" => {
                self.ga.max_generations = parse_as!(key, value, usize, "an integer")
            }
            "stagnation_window" => {
                self.ga.stagnation_window = parse_as!(key, value, usize, "an integer")
            }
            "eta" => self.eta = parse_as!(key, value, f64, "a number"),
            "p_min" => self.p_min = parse_as!(key, value, f64, "a number"),
            "p_max" => self.p_max = parse_as!(key, value, f64, "a number"),
            "p_init" => self.p_init = parse_as!(key, value, f64, "a number"),
            "migration_ttl" => self.migration_ttl = parse_as!(key, value, u32, "an integer"),
            "churn_rate" => self.churn_rate = parse_as!(key, value, f64, "a number"),
            "topology" => {
                self.topology = match value {
                    "random" => Topology::Random,
                    "smallworld" => Topology::SmallWorld,
                    _ => {
                        return Err(ConfigError::TypeMismatch {
                            key: key.to_string(),
                            expected: "`random` or `smallworld`",
                            value: value.to_string(),
                        })
                    }
                }
            }
            "initial_degree" => self.initial_degree = parse_as!(key, value, usize, "an integer"),
            "rewire_beta" => self.rewire_beta = parse_as!(key, value, f64, "a number"),
            "window" => self.window = parse_as!(key, value, usize, "an integer"),
            "seeds" => {
                let mut seeds = Vec::new();
                for part in value.split(',') {
                    let part = part.trim();
                    if part.is_empty() {
                        continue;
                    }
                    seeds.push(parse_as!(key, part, u64, "a comma-separated integer list"));
                }
                self.seeds = seeds;
            }
            _ => {
                return Err(ConfigError::UnknownKey {
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    /// Check every documented constraint, naming the offending key.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive: &[(&str, usize)] = &[
            ("users", self.users),
            ("initial_agents_per_user", self.initial_agents_per_user),
            (
                "requests_between_deployments",
                self.requests_between_deployments as usize,
            ),
            ("total_requests", self.total_requests as usize),
            ("arity", self.arity),
            ("catalog_size", self.catalog_size),
            ("profile_size", self.profile_size),
            ("segments", self.segments),
            ("attrs_per_segment", self.attrs_per_segment),
            ("agent_attrs", self.agent_attrs),
            ("max_generations", self.ga.max_generations),
            ("stagnation_window", self.ga.stagnation_window),
            ("migration_ttl", self.migration_ttl as usize),
            ("window", self.window),
        ];
        for (key, v) in positive {
            if *v == 0 {
                return Err(invalid(key, "must be positive"));
            }
        }
        if self.sigma < 0.0 {
            return Err(invalid("sigma", "must be non-negative"));
        }
        for (key, v) in [
            ("crossover_fraction", self.ga.crossover_fraction),
            ("mutation_fraction", self.ga.mutation_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(key, "must lie in [0, 1]"));
            }
        }
        if self.ga.parsimony_alpha < 0.0 {
            return Err(invalid("parsimony_alpha", "must be non-negative"));
        }
        if self.ga.pop_base < 2 {
            return Err(invalid("pop_base", "must be at least 2"));
        }
        if self.ga.pop_slope < 0.0 {
            return Err(invalid("pop_slope", "must be non-negative"));
        }
        if self.ga.pop_cap < self.ga.pop_base {
            return Err(invalid("pop_cap", "must be at least pop_base"));
        }
        if !(0.0 < self.eta && self.eta < 1.0) {
            return Err(invalid("eta", "must lie strictly between 0 and 1"));
        }
        if !(0.0 < self.p_min && self.p_min < self.p_max && self.p_max < 1.0) {
            return Err(invalid(
                "p_min",
                "must satisfy 0 < p_min < p_max < 1 (check p_max too)",
            ));
        }
        if !(self.p_min..=self.p_max).contains(&self.p_init) {
            return Err(invalid("p_init", "must lie within [p_min, p_max]"));
        }
        if !(0.0..=1.0).contains(&self.churn_rate) {
            return Err(invalid("churn_rate", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.rewire_beta) {
            return Err(invalid("rewire_beta", "must lie in [0, 1]"));
        }
        if self.profile_size > self.catalog_size {
            return Err(invalid("profile_size", "must not exceed catalog_size"));
        }
        if self.seeds.is_empty() {
            return Err(invalid("seeds", "must name at least one seed"));
        }
        Ok(())
    }

    /// Render as config-file text; parsing the output reproduces the config.
    pub fn to_config_text(&self) -> String {
        let mut out = String::new();
        let mut push = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        push("users", self.users.to_string());
        push(
            "initial_agents_per_user",
            self.initial_agents_per_user.to_string(),
        );
        push(
            "requests_between_deployments",
            self.requests_between_deployments.to_string(),
        );
        push("total_requests", self.total_requests.to_string());
        push("arity", self.arity.to_string());
        push("catalog_size", self.catalog_size.to_string());
        push("profile_size", self.profile_size.to_string());
        push("segments", self.segments.to_string());
        push("attrs_per_segment", self.attrs_per_segment.to_string());
        push("agent_attrs", self.agent_attrs.to_string());
        push("sigma", format_float(self.sigma));
        push("crossover_fraction", format_float(self.ga.crossover_fraction));
        push("mutation_fraction", format_float(self.ga.mutation_fraction));
        push("parsimony_alpha", format_float(self.ga.parsimony_alpha));
        push("pop_base", self.ga.pop_base.to_string());
        push("pop_slope", format_float(self.ga.pop_slope));
        push("pop_cap", self.ga.pop_cap.to_string());
        push("max_generations", self.ga.max_generations.to_string());
        push("stagnation_window", self.ga.stagnation_window.to_string());
        push("eta", format_float(self.eta));
        push("p_min", format_float(self.p_min));
        push("p_max", format_float(self.p_max));
        push("p_init", format_float(self.p_init));
        push("migration_ttl", self.migration_ttl.to_string());
        push("churn_rate", format_float(self.churn_rate));
        push("topology", self.topology.to_string());
        push("initial_degree", self.initial_degree.to_string());
        push("rewire_beta", format_float(self.rewire_beta));
        push("window", self.window.to_string());
        push(
            "seeds",
            self.seeds
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        out
    }
}

/// Shortest representation that round-trips through `f64::parse`.
fn format_float(v: f64) -> String {
    let s = format!("{v}");
    debug_assert_eq!(s.parse::<f64>().unwrap(), v);
    s
}

/// Parse config text: one `key = value` per line, `#` starts a comment line,
/// blank lines ignored.
pub fn parse_config_text(text: &str, base: ScenarioConfig) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = base;
    for (idx, raw_line) in text.lines().enumerate() {
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Malformed {
                line: idx + 1,
                text: line.to_string(),
            });
        };
        cfg.set(key.trim(), value.trim())?;
    }
    Ok(cfg)
}

/// Resolve a full configuration: built-in defaults, then the optional file,
/// then command-line `key=value` overrides, then validation.
pub fn parse_config(
    path: Option<&Path>,
    overrides: &[(String, String)],
) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = ScenarioConfig::default();
    if let Some(path) = path {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        cfg = parse_config_text(&text, cfg)?;
    }
    for (key, value) in overrides {
        cfg.set(key, value)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_yields_the_documented_defaults() {
        let cfg = parse_config_text("", ScenarioConfig::default()).unwrap();
        assert_eq!(cfg.users, 100);
        assert_eq!(cfg.initial_agents_per_user, 5);
        assert_eq!(cfg.requests_between_deployments, 3);
        assert_eq!(cfg.total_requests, 600);
        assert_eq!(cfg.ga.crossover_fraction, 0.10);
        assert_eq!(cfg.ga.mutation_fraction, 0.10);
        cfg.validate().unwrap();
    }

    #[test]
    fn overrides_beat_file_values() {
        let cfg = parse_config_text("users = 100\n", ScenarioConfig::default()).unwrap();
        let mut cfg = cfg;
        cfg.set("users", "50").unwrap();
        assert_eq!(cfg.users, 50);
    }

    #[test]
    fn zero_users_is_rejected_by_name() {
        let mut cfg = ScenarioConfig::default();
        cfg.set("users", "0").unwrap();
        let err = cfg.validate().unwrap_err();
        let message = err.to_string();
        assert!(message.contains("users"), "{message}");
        assert!(message.contains("must be positive"), "{message}");
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let mut cfg = ScenarioConfig::default();
        let err = cfg.set("grandiosity", "11").unwrap_err();
        assert!(err.to_string().contains("grandiosity"));
    }

    #[test]
    fn type_mismatch_names_the_key() {
        let mut cfg = ScenarioConfig::default();
        let err = cfg.set("sigma", "loud").unwrap_err();
        let message = err.to_string();
        assert!(message.contains("sigma"), "{message}");
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let text = "# a comment\n\nusers = 42\n";
        let cfg = parse_config_text(text, ScenarioConfig::default()).unwrap();
        assert_eq!(cfg.users, 42);
    }

    #[test]
    fn config_text_round_trips() {
        let mut cfg = ScenarioConfig::default();
        cfg.set("users", "37").unwrap();
        cfg.set("sigma", "1.5").unwrap();
        cfg.set("topology", "smallworld").unwrap();
        cfg.set("seeds", "4, 5, 6").unwrap();
        let text = cfg.to_config_text();
        let reparsed = parse_config_text(&text, ScenarioConfig::default()).unwrap();
        assert_eq!(reparsed, cfg);
        assert_eq!(reparsed.to_config_text(), text);
    }

    #[test]
    fn malformed_lines_are_reported_with_line_numbers() {
        let err = parse_config_text("users 100\n", ScenarioConfig::default()).unwrap_err();
        assert!(err.to_string().contains("line 1"));
    }
}
