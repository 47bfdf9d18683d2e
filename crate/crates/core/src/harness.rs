//! Experiment harness: the density sweep grid, per-trial seed derivation,
//! metric rows, and CSV/JSON emission.
//!
//! A sweep walks every (density, trial) cell, derives a child seed from the
//! master seed with SplitMix64 mixing, generates one scenario per cell, and
//! runs every requested algorithm on that same scenario. Identical config and
//! master seed give byte-identical output files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::channel::{tau_from_range, ChannelError};
use crate::model::{LinkParams, ModelError};
use crate::recovery::RunLimits;
use crate::simulator::{simulate, Algorithm, Scenario, SimulatorError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Simulator(#[from] SimulatorError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub const DEFAULT_DENSITIES: [usize; 7] = [20, 25, 30, 35, 40, 45, 50];
pub const DEFAULT_TRIALS: usize = 15;
pub const DEFAULT_AREA_M: f64 = 300.0;
pub const DEFAULT_RANGE_M: f64 = 50.0;
pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_D_MIN: f64 = 0.1;

/// Output encoding for the results table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(HarnessError::InvalidConfig(format!(
                "unknown format {other:?}; expected csv or json"
            ))),
        }
    }
}

/// The full experiment grid plus radio and motion constants.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub densities: Vec<usize>,
    pub trials: usize,
    pub algorithms: Vec<Algorithm>,
    pub area_m: f64,
    pub range_m: f64,
    pub speed_m_per_s: f64,
    pub tick_s: f64,
    pub max_ticks: u64,
    pub alpha: f64,
    pub power: f64,
    pub noise: f64,
    pub detection_delay_ticks: u64,
    pub master_seed: u64,
    /// Verify the no-new-partition invariant on every committed tick.
    pub check_invariants: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            densities: DEFAULT_DENSITIES.to_vec(),
            trials: DEFAULT_TRIALS,
            algorithms: Algorithm::ALL.to_vec(),
            area_m: DEFAULT_AREA_M,
            range_m: DEFAULT_RANGE_M,
            speed_m_per_s: 1.0,
            tick_s: 1.0,
            max_ticks: 10_000,
            alpha: 2.0,
            power: 1.0,
            noise: 1.0,
            detection_delay_ticks: 0,
            master_seed: DEFAULT_SEED,
            check_invariants: false,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.densities.is_empty() {
            return Err(HarnessError::InvalidConfig("densities must not be empty".into()));
        }
        if let Some(&n) = self.densities.iter().find(|&&n| n < 2) {
            return Err(HarnessError::InvalidConfig(format!(
                "every density must be >= 2, got {n}"
            )));
        }
        if self.trials == 0 {
            return Err(HarnessError::InvalidConfig("trials must be >= 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(HarnessError::InvalidConfig("no algorithms selected".into()));
        }
        if self.max_ticks == 0 {
            return Err(HarnessError::InvalidConfig("max-ticks must be >= 1".into()));
        }
        for (name, value) in [
            ("area", self.area_m),
            ("range", self.range_m),
            ("speed", self.speed_m_per_s),
            ("tick", self.tick_s),
            ("alpha", self.alpha),
            ("power", self.power),
            ("noise", self.noise),
        ] {
            if !value.is_finite() || value <= 0.0 {
                return Err(HarnessError::InvalidConfig(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        Ok(())
    }

    /// Radio constants with tau calibrated so the direct range equals
    /// `range_m`.
    pub fn link_params(&self) -> Result<LinkParams, HarnessError> {
        let tau = tau_from_range(self.power, self.noise, self.alpha, self.range_m)?;
        Ok(LinkParams::new(self.alpha, self.noise, tau, DEFAULT_D_MIN)?)
    }

    pub fn limits(&self) -> RunLimits {
        RunLimits {
            speed_m_per_s: self.speed_m_per_s,
            tick_s: self.tick_s,
            max_ticks: self.max_ticks,
            detection_delay_ticks: self.detection_delay_ticks,
            record_trace: false,
            check_invariants: self.check_invariants,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for one (density, trial) cell: SplitMix64 mixing of the master
/// seed with both grid coordinates. Every algorithm within the cell consumes
/// the same seed, so comparisons run on identical scenarios.
pub fn child_seed(master: u64, density: usize, trial: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ density as u64) ^ trial as u64)
}

/// One (algorithm, density, trial) outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub algo: Algorithm,
    pub n_nodes: usize,
    pub trial: usize,
    pub seed: u64,
    pub success: bool,
    pub nodes_moved: usize,
    pub total_distance_m: f64,
    pub recovery_ticks: u64,
    /// Scenario generation hit its resample cap; the metrics are zeros.
    pub generation_failed: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn generation_failures(&self) -> usize {
        self.rows.iter().filter(|r| r.generation_failed).count()
    }
}

/// Runs the grid: one scenario per (density, trial), every requested
/// algorithm on that same scenario, rows sorted by (algo, n_nodes, trial).
pub fn run_sweep(config: &SweepConfig) -> Result<ResultTable, HarnessError> {
    config.validate()?;
    let params = config.link_params()?;
    let limits = config.limits();
    let mut rows = Vec::with_capacity(
        config.algorithms.len() * config.densities.len() * config.trials,
    );
    for &n in &config.densities {
        for trial in 0..config.trials {
            let seed = child_seed(config.master_seed, n, trial);
            match Scenario::generate(n, config.area_m, config.power, &params, &limits, seed) {
                Ok(scenario) => {
                    for &algo in &config.algorithms {
                        let report = simulate(&scenario, algo)?;
                        rows.push(ResultRow {
                            algo,
                            n_nodes: n,
                            trial,
                            seed,
                            success: report.success,
                            nodes_moved: report.nodes_moved,
                            total_distance_m: report.total_distance_m,
                            recovery_ticks: report.recovery_ticks,
                            generation_failed: false,
                        });
                    }
                }
                Err(SimulatorError::Generation { .. }) => {
                    for &algo in &config.algorithms {
                        rows.push(ResultRow {
                            algo,
                            n_nodes: n,
                            trial,
                            seed,
                            success: false,
                            nodes_moved: 0,
                            total_distance_m: 0.0,
                            recovery_ticks: 0,
                            generation_failed: true,
                        });
                    }
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    rows.sort_by(|a, b| {
        a.algo
            .as_str()
            .cmp(b.algo.as_str())
            .then(a.n_nodes.cmp(&b.n_nodes))
            .then(a.trial.cmp(&b.trial))
    });
    Ok(ResultTable { rows })
}

pub const RESULTS_CSV_HEADER: &str =
    "algo,n_nodes,trial,seed,success,nodes_moved,total_distance_m,recovery_ticks";

/// Renders the results table as CSV with the fixed header, floats to six
/// decimal places, newline-terminated.
pub fn render_results_csv(table: &ResultTable) -> String {
    let mut out = String::new();
    out.push_str(RESULTS_CSV_HEADER);
    out.push('\n');
    for r in &table.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{:.6},{}",
            r.algo,
            r.n_nodes,
            r.trial,
            r.seed,
            u8::from(r.success),
            r.nodes_moved,
            r.total_distance_m,
            r.recovery_ticks
        )
        .expect("writing to a String cannot fail");
    }
    out
}

#[derive(Serialize)]
struct JsonRow<'a> {
    algo: &'a str,
    n_nodes: usize,
    trial: usize,
    seed: u64,
    success: u8,
    nodes_moved: usize,
    total_distance_m: f64,
    recovery_ticks: u64,
}

/// Renders the results as a JSON array with the same field names as the CSV.
pub fn render_results_json(table: &ResultTable) -> String {
    let rows: Vec<JsonRow> = table
        .rows
        .iter()
        .map(|r| JsonRow {
            algo: r.algo.as_str(),
            n_nodes: r.n_nodes,
            trial: r.trial,
            seed: r.seed,
            success: u8::from(r.success),
            nodes_moved: r.nodes_moved,
            total_distance_m: r.total_distance_m,
            recovery_ticks: r.recovery_ticks,
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&rows).expect("rows serialize");
    s.push('\n');
    s
}

pub fn write_results(
    table: &ResultTable,
    format: OutputFormat,
    path: &Path,
) -> Result<(), HarnessError> {
    let body = match format {
        OutputFormat::Csv => render_results_csv(table),
        OutputFormat::Json => render_results_json(table),
    };
    std::fs::write(path, body).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Per (algo, density) means over trials plus the success ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub algo: Algorithm,
    pub n_nodes: usize,
    pub mean_nodes_moved: f64,
    pub mean_distance_m: f64,
    pub mean_ticks: f64,
    pub success_ratio: f64,
}

pub fn summarize(table: &ResultTable) -> Vec<SummaryRow> {
    #[derive(Default)]
    struct Acc {
        trials: usize,
        moved: f64,
        distance: f64,
        ticks: f64,
        successes: usize,
    }
    let mut groups: BTreeMap<(&'static str, usize), (Algorithm, Acc)> = BTreeMap::new();
    for r in &table.rows {
        let entry = groups
            .entry((r.algo.as_str(), r.n_nodes))
            .or_insert((r.algo, Acc::default()));
        entry.1.trials += 1;
        entry.1.moved += r.nodes_moved as f64;
        entry.1.distance += r.total_distance_m;
        entry.1.ticks += r.recovery_ticks as f64;
        entry.1.successes += usize::from(r.success);
    }
    groups
        .into_iter()
        .map(|((_, n_nodes), (algo, acc))| {
            let trials = acc.trials as f64;
            SummaryRow {
                algo,
                n_nodes,
                mean_nodes_moved: acc.moved / trials,
                mean_distance_m: acc.distance / trials,
                mean_ticks: acc.ticks / trials,
                success_ratio: acc.successes as f64 / trials,
            }
        })
        .collect()
}

pub const SUMMARY_CSV_HEADER: &str =
    "algo,n_nodes,mean_nodes_moved,mean_distance_m,mean_ticks,success_ratio";

pub fn render_summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::new();
    out.push_str(SUMMARY_CSV_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{:.6}",
            r.algo, r.n_nodes, r.mean_nodes_moved, r.mean_distance_m, r.mean_ticks, r.success_ratio
        )
        .expect("writing to a String cannot fail");
    }
    out
}

pub fn write_summary(rows: &[SummaryRow], path: &Path) -> Result<(), HarnessError> {
    std::fs::write(path, render_summary_csv(rows)).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> SweepConfig {
        SweepConfig {
            densities: vec![20, 30],
            trials: 2,
            ..SweepConfig::default()
        }
    }

    #[test]
    fn child_seeds_differ_across_cells() {
        let s1 = child_seed(7, 20, 0);
        let s2 = child_seed(7, 20, 1);
        let s3 = child_seed(7, 25, 0);
        let s4 = child_seed(8, 20, 0);
        assert!(s1 != s2 && s1 != s3 && s1 != s4);
        assert_eq!(s1, child_seed(7, 20, 0));
    }

    #[test]
    fn sweep_row_count_and_order() {
        let table = run_sweep(&small_config()).unwrap();
        assert_eq!(table.rows.len(), 4 * 2 * 2);
        let keys: Vec<_> = table
            .rows
            .iter()
            .map(|r| (r.algo.as_str(), r.n_nodes, r.trial))
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn sweep_shares_scenario_across_algorithms() {
        let table = run_sweep(&small_config()).unwrap();
        for n in [20, 30] {
            for trial in 0..2 {
                let seeds: Vec<u64> = table
                    .rows
                    .iter()
                    .filter(|r| r.n_nodes == n && r.trial == trial)
                    .map(|r| r.seed)
                    .collect();
                assert_eq!(seeds.len(), 4);
                assert!(seeds.windows(2).all(|w| w[0] == w[1]));
            }
        }
    }

    #[test]
    fn validation_rejects_bad_values() {
        let mut config = SweepConfig::default();
        config.speed_m_per_s = -1.0;
        assert!(config.validate().is_err());

        let mut config = SweepConfig::default();
        config.densities = vec![];
        assert!(config.validate().is_err());

        let mut config = SweepConfig::default();
        config.densities = vec![1];
        assert!(config.validate().is_err());

        let mut config = SweepConfig::default();
        config.trials = 0;
        assert!(config.validate().is_err());
    }

    #[test]
    fn empty_table_renders_header_only() {
        let table = ResultTable::default();
        assert_eq!(render_results_csv(&table), format!("{RESULTS_CSV_HEADER}\n"));
    }

    #[test]
    fn single_row_renders_two_lines() {
        let table = ResultTable {
            rows: vec![ResultRow {
                algo: Algorithm::C3Run,
                n_nodes: 20,
                trial: 0,
                seed: 99,
                success: true,
                nodes_moved: 2,
                total_distance_m: 12.5,
                recovery_ticks: 13,
                generation_failed: false,
            }],
        };
        let csv = render_results_csv(&table);
        assert_eq!(
            csv,
            format!("{RESULTS_CSV_HEADER}\nc3run,20,0,99,1,2,12.500000,13\n")
        );
    }

    #[test]
    fn rendering_is_reproducible() {
        let config = small_config();
        let t1 = run_sweep(&config).unwrap();
        let t2 = run_sweep(&config).unwrap();
        assert_eq!(render_results_csv(&t1), render_results_csv(&t2));
        assert_eq!(render_results_json(&t1), render_results_json(&t2));
        assert_eq!(
            render_summary_csv(&summarize(&t1)),
            render_summary_csv(&summarize(&t2))
        );
    }

    #[test]
    fn summary_of_single_row_equals_that_row() {
        let table = ResultTable {
            rows: vec![ResultRow {
                algo: Algorithm::Rim,
                n_nodes: 25,
                trial: 0,
                seed: 1,
                success: true,
                nodes_moved: 4,
                total_distance_m: 100.0,
                recovery_ticks: 25,
                generation_failed: false,
            }],
        };
        let summary = summarize(&table);
        assert_eq!(summary.len(), 1);
        assert_eq!(summary[0].mean_nodes_moved, 4.0);
        assert_eq!(summary[0].mean_distance_m, 100.0);
        assert_eq!(summary[0].mean_ticks, 25.0);
        assert_eq!(summary[0].success_ratio, 1.0);
    }

    #[test]
    fn summary_ccbridges_means_are_exactly_zero() {
        let table = run_sweep(&small_config()).unwrap();
        for row in summarize(&table) {
            if row.algo == Algorithm::CcBridges {
                assert_eq!(row.mean_nodes_moved, 0.0);
                assert_eq!(row.mean_distance_m, 0.0);
            }
        }
    }

    #[test]
    fn json_field_names_match_csv_columns() {
        let table = ResultTable {
            rows: vec![ResultRow {
                algo: Algorithm::LeDir,
                n_nodes: 20,
                trial: 1,
                seed: 3,
                success: false,
                nodes_moved: 0,
                total_distance_m: 0.0,
                recovery_ticks: 0,
                generation_failed: false,
            }],
        };
        let parsed: serde_json::Value =
            serde_json::from_str(&render_results_json(&table)).unwrap();
        let obj = parsed.as_array().unwrap()[0].as_object().unwrap();
        let mut fields: Vec<&str> = obj.keys().map(String::as_str).collect();
        fields.sort_unstable();
        let mut expected: Vec<&str> = RESULTS_CSV_HEADER.split(',').collect();
        expected.sort_unstable();
        assert_eq!(fields, expected);
        assert_eq!(obj["algo"], "ledir");
        assert_eq!(obj["success"], 0);
    }
}
