//! Result emission: per-seed step CSVs, the windowed aggregate CSV, the
//! machine-readable run summary, and the resolved-config echo. All output is
//! locale-independent and byte-stable for a fixed seed set: floats carry six
//! fractional digits with a `.` separator, lines end with `\n`.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::harness::{Aggregate, StepRecord};

pub const STEPS_HEADER: &str =
    "request_index,services_available,match_pct_eco,match_pct_soa,evaluations_used,seed";

pub const AGGREGATE_HEADER: &str = "window_index,request_start,request_end,\
mean_match_pct_eco,sd_match_pct_eco,mean_match_pct_soa,sd_match_pct_soa";

pub fn steps_csv(records: &[StepRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(STEPS_HEADER);
    out.push('\n');
    for r in records {
        writeln!(
            out,
            "{},{},{:.6},{:.6},{},{}",
            r.request_index,
            r.services_available,
            r.match_pct_eco,
            r.match_pct_soa,
            r.evaluations_used,
            r.seed
        )
        .expect("writing to a string cannot fail");
    }
    out
}

pub fn aggregate_csv(aggregate: &Aggregate) -> String {
    let mut out = String::new();
    out.push_str(AGGREGATE_HEADER);
    out.push('\n');
    for row in &aggregate.rows {
        writeln!(
            out,
            "{},{},{},{:.6},{:.6},{:.6},{:.6}",
            row.window_index,
            row.request_start,
            row.request_end,
            row.mean_match_pct_eco,
            row.sd_match_pct_eco,
            row.mean_match_pct_soa,
            row.sd_match_pct_soa
        )
        .expect("writing to a string cannot fail");
    }
    out
}

/// Per-seed entry of the run summary.
#[derive(Debug, Serialize)]
pub struct SeedSummary {
    pub seed: u64,
    /// First sustained window where the ecosystem led, if any.
    pub crossover_window: Option<usize>,
    pub final_clustering_coefficient: f64,
}

/// The machine-readable run summary written next to the CSVs.
#[derive(Debug, Serialize)]
pub struct RunSummary<'a> {
    pub version: &'static str,
    pub config: &'a ScenarioConfig,
    pub window: usize,
    /// Crossover over the records pooled across all seeds.
    pub crossover_window: Option<usize>,
    pub per_seed: Vec<SeedSummary>,
}

pub fn summary_json(summary: &RunSummary<'_>) -> String {
    let mut text = serde_json::to_string_pretty(summary).expect("summary serializes");
    text.push('\n');
    text
}

pub fn write_run_outputs(
    dir: &Path,
    cfg: &ScenarioConfig,
    per_seed_records: &[(u64, Vec<StepRecord>)],
    aggregate: &Aggregate,
    summary: &RunSummary<'_>,
) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    for (seed, records) in per_seed_records {
        fs::write(dir.join(format!("steps_{seed}.csv")), steps_csv(records))?;
    }
    fs::write(dir.join("aggregate.csv"), aggregate_csv(aggregate))?;
    fs::write(dir.join("summary.json"), summary_json(summary))?;
    fs::write(dir.join("config.txt"), cfg.to_config_text())?;
    Ok(())
}
