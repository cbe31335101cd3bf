//! On-disk artifact formats shared by `simulate` and `analyze`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use erw_core::observables::{limit_variance, DriftConstants};
use erw_core::{CheckpointStats, EnsembleSummary, Histogram, MemoryConfig, RateSchedule, Regime};
use serde::{Deserialize, Serialize};

pub const CHECKPOINTS_FILE: &str = "checkpoints.csv";
pub const FLUCTUATIONS_FILE: &str = "fluctuations.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointCsvRow {
    pub n: u64,
    pub mean_speed: f64,
    pub abs_moment_m1: f64,
    pub abs_moment_m1_5: f64,
    pub abs_moment_m2: f64,
    pub return_prob: f64,
    pub mean_xi: f64,
    pub var_xi: f64,
    pub mean_fluct: f64,
    pub var_fluct: f64,
}

impl CheckpointCsvRow {
    pub fn from_stats(s: &CheckpointStats) -> Self {
        let m = |order| s.speed.abs_moment(order).unwrap_or(f64::NAN);
        Self {
            n: s.n,
            mean_speed: s.speed.mean(),
            abs_moment_m1: m(1.0),
            abs_moment_m1_5: m(1.5),
            abs_moment_m2: m(2.0),
            return_prob: s.return_prob(),
            mean_xi: s.xi.mean(),
            var_xi: s.xi.variance(),
            mean_fluct: s.fluct.mean(),
            var_fluct: s.fluct.variance(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluctuationCsvRow {
    pub replica_index: u64,
    pub delta_n: u64,
    pub speed: f64,
    pub xi: f64,
    pub fluct_stat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub d1: usize,
    pub d2: usize,
    pub memory: MemoryConfig,
    pub steps: u64,
    pub replicas: u64,
    pub seed: u64,
    pub checkpoints: Vec<u64>,
    pub moments: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    pub d: usize,
    pub p_effective: f64,
    pub p_d: f64,
    pub regime: Regime,
    /// Drift margin of the return bound, when defined.
    pub alpha: Option<f64>,
    pub lambda2: f64,
    pub r_exponent: f64,
    pub escape_rate: f64,
    pub xi_coeff: f64,
    pub limit_variance: f64,
}

impl Derived {
    pub fn new(schedule: &RateSchedule) -> Self {
        let consts = DriftConstants::new(schedule.p, schedule.d);
        Self {
            d: schedule.d,
            p_effective: schedule.p,
            p_d: schedule.p_d,
            regime: schedule.regime,
            alpha: schedule.alpha,
            lambda2: schedule.lambda2,
            r_exponent: schedule.r_exponent,
            escape_rate: consts.escape_rate(),
            xi_coeff: consts.xi_coeff(),
            limit_variance: limit_variance(schedule.d),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEntry {
    pub order: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanVar {
    pub mean: f64,
    pub var: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointResult {
    pub n: u64,
    pub replicas: u64,
    pub speed: MeanVar,
    /// `E|Delta_n/n - (d-2)/d|^m`.
    pub speed_abs_moments: Vec<MomentEntry>,
    pub return_prob: f64,
    pub return_prob_se: f64,
    pub xi: MeanVar,
    /// `E|Xi_n|^m`.
    pub xi_abs_moments: Vec<MomentEntry>,
    pub fluct: MeanVar,
    /// `r_n (Delta_n/n - (d-2)/d)`, absent where `r_n` is undefined.
    pub scaled_deviation: Option<MeanVar>,
    /// Mean of `(1/d) sum_a |N_n(a)/n - 1/d|`.
    pub urn_deviation: f64,
    /// Mean of `<M>_n / n`.
    pub qv_ratio: f64,
}

impl CheckpointResult {
    pub fn from_stats(s: &CheckpointStats) -> Self {
        let moments = |acc: &erw_core::MomentAccumulator| {
            acc.abs_orders()
                .iter()
                .map(|&order| MomentEntry {
                    order,
                    value: acc.abs_moment(order).unwrap_or(f64::NAN),
                })
                .collect()
        };
        let mv = |acc: &erw_core::MomentAccumulator| MeanVar {
            mean: acc.mean(),
            var: acc.variance(),
        };
        Self {
            n: s.n,
            replicas: s.replicas(),
            speed: mv(&s.speed),
            speed_abs_moments: moments(&s.speed),
            return_prob: s.return_prob(),
            return_prob_se: s.return_prob_se(),
            xi: mv(&s.xi),
            xi_abs_moments: moments(&s.xi),
            fluct: mv(&s.fluct),
            scaled_deviation: s.scaled_deviation.as_ref().map(mv),
            urn_deviation: s.urn_deviation.mean(),
            qv_ratio: s.qv_ratio.mean(),
        }
    }

    pub fn speed_moment(&self, order: f64) -> Option<f64> {
        self.speed_abs_moments
            .iter()
            .find(|m| m.order == order)
            .map(|m| m.value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histograms {
    pub n: u64,
    pub fluct: Histogram,
    pub scaled_deviation: Option<Histogram>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: ConfigEcho,
    pub derived: Derived,
    pub results: Vec<CheckpointResult>,
    pub histograms: Histograms,
    pub suite_versions: BTreeMap<String, String>,
}

pub fn suite_versions() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("erw_cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("erw_core".to_string(), erw_core::VERSION.to_string()),
        ("format".to_string(), FORMAT_VERSION.to_string()),
    ])
}

impl RunSummary {
    pub fn new(summary: &EnsembleSummary, schedule: &RateSchedule) -> Self {
        let cfg = &summary.config;
        let last = summary.last();
        Self {
            config: ConfigEcho {
                d1: cfg.d1,
                d2: cfg.d2,
                memory: cfg.memory,
                steps: cfg.horizon,
                replicas: cfg.replicas,
                seed: cfg.base_seed,
                checkpoints: cfg.checkpoints.clone(),
                moments: cfg.moment_orders(),
            },
            derived: Derived::new(schedule),
            results: summary.checkpoints.iter().map(CheckpointResult::from_stats).collect(),
            histograms: Histograms {
                n: last.n,
                fluct: last.fluct.histogram().cloned().expect("fluctuations carry a histogram"),
                scaled_deviation: last
                    .scaled_deviation
                    .as_ref()
                    .and_then(|a| a.histogram().cloned()),
            },
            suite_versions: suite_versions(),
        }
    }
}

/// Writes the three run artifacts into `dir`.
pub fn write_run(dir: &Path, summary: &EnsembleSummary, schedule: &RateSchedule) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;

    let mut w = csv::Writer::from_path(dir.join(CHECKPOINTS_FILE))?;
    for s in &summary.checkpoints {
        w.serialize(CheckpointCsvRow::from_stats(s))?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join(FLUCTUATIONS_FILE))?;
    for f in &summary.finals {
        w.serialize(FluctuationCsvRow {
            replica_index: f.replica_index,
            delta_n: f.delta_n,
            speed: f.speed,
            xi: f.xi,
            fluct_stat: f.fluct_stat,
        })?;
    }
    w.flush()?;

    write_json(&dir.join(SUMMARY_FILE), &RunSummary::new(summary, schedule))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_summary(dir: &Path) -> anyhow::Result<RunSummary> {
    let path = dir.join(SUMMARY_FILE);
    let file = File::open(&path).with_context(|| format!("cannot open {}", path.display()))?;
    serde_json::from_reader(std::io::BufReader::new(file))
        .with_context(|| format!("malformed {}", path.display()))
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot open {}", path.display()))?;
    r.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .with_context(|| format!("malformed {}", path.display()))
}
