use erw_core::oracle::MomentValue;
use erw_core::{distance_census, enumerate_exact, ExactDistribution, GroupPresentation, MemoryConfig, RunConfig};
use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;

use crate::args::OracleArgs;

/// Z-score beyond which a bin counts as inconsistent.
pub const Z_THRESHOLD: f64 = 4.0;

/// Nonzero pmf entries, serialized as a JSON object in increasing `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsePmf(pub Vec<(usize, f64)>);

impl Serialize for SparsePmf {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(&k.to_string(), v)?;
        }
        map.end()
    }
}

impl SparsePmf {
    pub fn from_dense(pmf: &[f64]) -> Self {
        Self(
            pmf.iter()
                .copied()
                .enumerate()
                .filter(|&(_, v)| v != 0.0)
                .collect(),
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleConfig {
    pub d1: usize,
    pub d2: usize,
    pub memory: MemoryConfig,
    pub p_effective: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BinComparison {
    pub k: usize,
    pub exact: f64,
    pub empirical: f64,
    pub se: f64,
    /// `None` when the exact probability is 0 or 1 and the empirical
    /// frequency disagrees.
    pub z: Option<f64>,
}

impl BinComparison {
    pub fn consistent(&self) -> bool {
        self.z.is_some_and(|z| z.abs() <= Z_THRESHOLD)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct McComparison {
    pub replicas: u64,
    pub seed: u64,
    pub bins: Vec<BinComparison>,
    pub max_abs_z: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub config: OracleConfig,
    pub paths: u64,
    pub pmf: SparsePmf,
    pub mean_delta: f64,
    pub return_prob: f64,
    pub speed_moments: Vec<MomentValue>,
    pub mean_xi: f64,
    pub xi_moments: Vec<MomentValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compare_mc: Option<McComparison>,
}

/// Per-bin z-scores of empirical counts against exact probabilities.
pub fn compare_bins(exact: &[f64], counts: &[u64]) -> Vec<BinComparison> {
    let total: u64 = counts.iter().sum();
    let nf = total as f64;
    exact
        .iter()
        .zip(counts)
        .enumerate()
        .map(|(k, (&q, &c))| {
            let empirical = c as f64 / nf;
            let se = (q * (1.0 - q) / nf).sqrt();
            let z = if se > 0.0 {
                Some((empirical - q) / se)
            } else if empirical == q {
                Some(0.0)
            } else {
                None
            };
            BinComparison {
                k,
                exact: q,
                empirical,
                se,
                z,
            }
        })
        .collect()
}

/// Simulates `replicas` walks to horizon `n` and compares the law of the
/// distance with `exact`.
pub fn compare_with_mc(
    exact: &ExactDistribution,
    d1: usize,
    d2: usize,
    memory: MemoryConfig,
    replicas: u64,
    seed: u64,
    workers: Option<usize>,
) -> anyhow::Result<McComparison> {
    let n = exact.horizon as u64;
    let mut cfg = RunConfig::new(d1, d2, memory, n, replicas, seed).with_checkpoints(vec![n]);
    cfg.workers = workers;
    let census = distance_census(&cfg)?;
    let bins = compare_bins(&exact.pmf, &census[0]);
    let max_abs_z = bins
        .iter()
        .map(|b| b.z.map(f64::abs))
        .try_fold(0.0f64, |acc, z| z.map(|z| acc.max(z)));
    let pass = bins.iter().all(BinComparison::consistent);
    Ok(McComparison {
        replicas,
        seed,
        bins,
        max_abs_z,
        pass,
    })
}

pub fn run(args: &OracleArgs) -> anyhow::Result<OracleReport> {
    let memory = args.model.memory()?;
    let pres = GroupPresentation::new(args.model.d1, args.model.d2)?;
    let exact = enumerate_exact(&pres, &memory, args.n, &args.moments)?;
    let compare_mc = match args.compare_mc {
        Some(replicas) => Some(compare_with_mc(
            &exact,
            args.model.d1,
            args.model.d2,
            memory,
            replicas,
            args.seed,
            args.workers,
        )?),
        None => None,
    };
    Ok(OracleReport {
        config: OracleConfig {
            d1: args.model.d1,
            d2: args.model.d2,
            memory,
            p_effective: memory.effective_memory(pres.degree())?,
            n: args.n,
        },
        paths: exact.paths,
        pmf: SparsePmf::from_dense(&exact.pmf),
        mean_delta: exact.mean_delta,
        return_prob: exact.return_prob,
        speed_moments: exact.speed_moments.clone(),
        mean_xi: exact.mean_xi,
        xi_moments: exact.xi_moments.clone(),
        compare_mc,
    })
}
