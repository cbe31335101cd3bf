//! Replica ensembles with checkpointed, mergeable statistics.
//!
//! Replicas are grouped into fixed-size blocks. Blocks run on a bounded
//! worker pool and their accumulators are merged strictly in block order,
//! so the output depends only on the configuration and the seed, never on
//! the number of workers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::GroupPresentation;
use crate::observables::{limit_variance, DriftConstants, ObservableTrace, RateSchedule};
use crate::rng::{replica_rng, ReplicaRng};
use crate::sampler::{MemoryConfig, StepLaw, UrnCounts};
use crate::walker::WalkerState;

/// Replicas per block. Part of the determinism contract: changing it
/// changes the floating-point merge order.
pub const BLOCK_SIZE: u64 = 64;

/// Absolute-moment orders always tracked for the speed deviation.
pub const BASE_MOMENT_ORDERS: [f64; 3] = [1.0, 1.5, 2.0];

pub const HISTOGRAM_BINS: usize = 101;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub d1: usize,
    pub d2: usize,
    pub memory: MemoryConfig,
    pub horizon: u64,
    pub replicas: u64,
    pub base_seed: u64,
    pub checkpoints: Vec<u64>,
    pub moments: Vec<f64>,
    /// Worker threads; `None` uses the global default.
    #[serde(skip)]
    pub workers: Option<usize>,
}

impl RunConfig {
    pub fn new(d1: usize, d2: usize, memory: MemoryConfig, horizon: u64, replicas: u64, base_seed: u64) -> Self {
        Self {
            d1,
            d2,
            memory,
            horizon,
            replicas,
            base_seed,
            checkpoints: default_checkpoints(horizon),
            moments: BASE_MOMENT_ORDERS.to_vec(),
            workers: None,
        }
    }

    pub fn with_checkpoints(mut self, checkpoints: Vec<u64>) -> Self {
        self.checkpoints = checkpoints;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = Some(workers);
        self
    }

    pub fn presentation(&self) -> Result<GroupPresentation> {
        GroupPresentation::new(self.d1, self.d2)
    }

    pub fn degree(&self) -> usize {
        2 * self.d1 + self.d2
    }

    pub fn effective_memory(&self) -> Result<f64> {
        self.memory.effective_memory(self.degree())
    }

    pub fn validate(&self) -> Result<()> {
        let pres = self.presentation()?;
        StepLaw::new(self.memory, pres.degree())?;
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be at least 1".into()));
        }
        if self.horizon > u32::MAX as u64 {
            return Err(Error::InvalidConfig(format!("horizon {} is too large", self.horizon)));
        }
        if self.replicas == 0 {
            return Err(Error::InvalidConfig("replicas must be at least 1".into()));
        }
        if self.checkpoints.is_empty() {
            return Err(Error::InvalidConfig("at least one checkpoint is required".into()));
        }
        if self.checkpoints[0] < 1 || *self.checkpoints.last().unwrap() > self.horizon {
            return Err(Error::InvalidConfig(format!(
                "checkpoints must lie in [1, {}]",
                self.horizon
            )));
        }
        if self.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("checkpoints must be strictly increasing".into()));
        }
        if let Some(m) = self.moments.iter().find(|m| !(1.0..=4.0).contains(*m)) {
            return Err(Error::InvalidConfig(format!("moment order {m} outside [1, 4]")));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidConfig("workers must be at least 1".into()));
        }
        Ok(())
    }

    /// Union of the base orders and the requested ones, sorted.
    pub fn moment_orders(&self) -> Vec<f64> {
        let mut orders: Vec<f64> = BASE_MOMENT_ORDERS.to_vec();
        for &m in &self.moments {
            if !orders.contains(&m) {
                orders.push(m);
            }
        }
        orders.sort_by(f64::total_cmp);
        orders
    }
}

/// Geometric schedule with ratio `2^(1/4)`, rounded and deduplicated, always
/// ending at the horizon.
pub fn default_checkpoints(horizon: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut k = 0i32;
    loop {
        let n = (2f64.powf(k as f64 / 4.0)).round() as u64;
        if n >= horizon {
            break;
        }
        if out.last() != Some(&n) {
            out.push(n);
        }
        k += 1;
    }
    out.push(horizon);
    out
}

/// Powers of two `2^lo..=2^hi`.
pub fn dyadic_checkpoints(lo: u32, hi: u32) -> Vec<u64> {
    (lo..=hi).map(|k| 1u64 << k).collect()
}

/// Observables of one replica at one checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRow {
    pub n: u64,
    pub delta: u64,
    pub speed: f64,
    pub xi: f64,
    pub martingale: f64,
    pub quadratic_variation: f64,
    pub zero_count: u64,
    pub fluct: f64,
    pub ell_ratio: f64,
    /// `(1/d) sum_a |N_n(a)/n - 1/d|`.
    pub urn_deviation: f64,
}

/// One simulated trajectory.
pub struct Replica {
    inverse: Vec<u8>,
    law: StepLaw,
    consts: DriftConstants,
    walker: WalkerState,
    urn: UrnCounts,
    trace: ObservableTrace,
    rng: ReplicaRng,
}

impl Replica {
    pub fn new(pres: &GroupPresentation, law: StepLaw, p: f64, horizon: u64, rng: ReplicaRng) -> Self {
        let d = pres.degree();
        Self {
            inverse: pres.generators().map(|g| pres.inverse(g).0).collect(),
            law,
            consts: DriftConstants::new(p, d),
            walker: WalkerState::with_horizon(horizon as usize),
            urn: UrnCounts::new(d),
            trace: ObservableTrace::new(),
            rng,
        }
    }

    pub fn for_config(cfg: &RunConfig, pres: &GroupPresentation, replica_index: u64) -> Result<Self> {
        let law = StepLaw::new(cfg.memory, pres.degree())?;
        Ok(Self::new(
            pres,
            law,
            cfg.effective_memory()?,
            cfg.horizon,
            replica_rng(cfg.base_seed, replica_index),
        ))
    }

    /// Advances one step and returns the realised generator and distance
    /// increment.
    #[inline(always)]
    pub fn step(&mut self) -> (u8, i32) {
        let (ell, at_root) = match self.walker.top() {
            Some(top) => (self.urn.counts()[self.inverse[top as usize] as usize], false),
            None => (0, true),
        };
        let g = self.law.sample(self.urn.counts(), self.urn.total(), &mut self.rng);
        let inc = self.walker.apply_raw(&self.inverse, g);
        self.trace.advance_raw(ell, at_root, inc, &self.consts);
        self.urn.record_raw(g);
        (g, inc)
    }

    pub fn advance_to(&mut self, n: u64) {
        while self.urn.total() < n {
            self.step();
        }
    }

    pub fn walker(&self) -> &WalkerState {
        &self.walker
    }

    pub fn urn(&self) -> &UrnCounts {
        &self.urn
    }

    pub fn trace(&self) -> &ObservableTrace {
        &self.trace
    }

    pub fn constants(&self) -> &DriftConstants {
        &self.consts
    }

    /// `l_n / n` at the current time.
    pub fn ell_ratio(&self) -> f64 {
        let n = self.urn.total();
        match self.walker.top() {
            Some(top) if n > 0 => {
                self.urn.counts()[self.inverse[top as usize] as usize] as f64 / n as f64
            }
            _ => 0.0,
        }
    }

    pub fn row(&self) -> CheckpointRow {
        let n = self.trace.steps();
        let delta = self.walker.distance() as u64;
        let nf = n as f64;
        let xi = self.trace.xi();
        let speed = delta as f64 / nf;
        CheckpointRow {
            n,
            delta,
            speed,
            xi,
            martingale: self.trace.martingale(),
            quadratic_variation: self.trace.quadratic_variation(),
            zero_count: self.trace.zero_count(),
            fluct: nf.sqrt() * (speed - self.consts.escape_rate() - self.consts.xi_coeff() * xi),
            ell_ratio: self.ell_ratio(),
            urn_deviation: self.urn.mean_deviation(),
        }
    }
}

/// Simulates replica `replica_index` and returns its checkpoint rows.
pub fn run_replica(cfg: &RunConfig, replica_index: u64) -> Result<Vec<CheckpointRow>> {
    cfg.validate()?;
    if replica_index >= cfg.replicas {
        return Err(Error::InvalidConfig(format!(
            "replica index {replica_index} out of range (replicas = {})",
            cfg.replicas
        )));
    }
    let pres = cfg.presentation()?;
    let mut replica = Replica::for_config(cfg, &pres, replica_index)?;
    Ok(cfg
        .checkpoints
        .iter()
        .map(|&n| {
            replica.advance_to(n);
            replica.row()
        })
        .collect())
}

/// Counts of violated per-step identities along audited paths.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PathAudit {
    pub paths: u64,
    pub steps: u64,
    pub decomposition_violations: u64,
    pub max_decomposition_residual_over_n: f64,
    pub ell_bound_violations: u64,
    pub urn_total_violations: u64,
    pub increment_violations: u64,
}

impl PathAudit {
    pub fn violations(&self) -> u64 {
        self.decomposition_violations
            + self.ell_bound_violations
            + self.urn_total_violations
            + self.increment_violations
    }

    pub fn absorb(&mut self, other: &PathAudit) {
        self.paths += other.paths;
        self.steps += other.steps;
        self.decomposition_violations += other.decomposition_violations;
        self.max_decomposition_residual_over_n = self
            .max_decomposition_residual_over_n
            .max(other.max_decomposition_residual_over_n);
        self.ell_bound_violations += other.ell_bound_violations;
        self.urn_total_violations += other.urn_total_violations;
        self.increment_violations += other.increment_violations;
    }
}

/// Simulates one path while checking, at every step, the speed
/// decomposition (to `1e-9 * n`), the bound
/// `|l_n/n - 1(Delta_n>0)/d| <= max_a |N_n(a)/n - 1/d|`, that the step counts
/// sum to `n`, and that the distance moves by exactly one.
pub fn audit_path(
    pres: &GroupPresentation,
    memory: MemoryConfig,
    steps: u64,
    seed: u64,
    index: u64,
) -> Result<PathAudit> {
    audit_path_with_xi_offset(pres, memory, steps, seed, index, 0.0)
}

/// [`audit_path`] with the `k = 0` term of the running `Xi` sum replaced by
/// `xi_offset`. A nonzero offset is a deliberately broken convention.
#[doc(hidden)]
pub fn audit_path_with_xi_offset(
    pres: &GroupPresentation,
    memory: MemoryConfig,
    steps: u64,
    seed: u64,
    index: u64,
    xi_offset: f64,
) -> Result<PathAudit> {
    let d = pres.degree();
    let law = StepLaw::new(memory, d)?;
    let p = memory.effective_memory(d)?;
    let mut r = Replica::new(pres, law, p, steps, replica_rng(seed, index));
    let mut audit = PathAudit {
        paths: 1,
        ..Default::default()
    };
    let inv_d = 1.0 / d as f64;
    for step in 0..steps {
        let n_before = r.urn.total();
        if n_before > 0 {
            let indicator = if r.walker.at_root() { 0.0 } else { inv_d };
            let lhs = (r.ell_ratio() - indicator).abs();
            if lhs > r.urn.max_deviation() + 1e-12 {
                audit.ell_bound_violations += 1;
            }
        }
        let before = r.walker.distance() as i64;
        let (_, inc) = r.step();
        if step == 0 && xi_offset != 0.0 {
            r.trace.offset_xi(xi_offset);
        }
        let after = r.walker.distance() as i64;
        if inc.abs() != 1 || after - before != inc as i64 {
            audit.increment_violations += 1;
        }
        let n = r.urn.total();
        if r.urn.counts().iter().sum::<u64>() != n || r.trace.steps() != n {
            audit.urn_total_violations += 1;
        }
        // residual of the identity multiplied through by n, in units of distance
        let residual =
            n as f64 * r.trace.decomposition_residual(r.walker.distance(), &r.consts).abs();
        audit.max_decomposition_residual_over_n =
            audit.max_decomposition_residual_over_n.max(residual / n as f64);
        if residual > 1e-9 * n as f64 {
            audit.decomposition_violations += 1;
        }
        audit.steps += 1;
    }
    Ok(audit)
}

/// Fixed-range histogram with one underflow and one overflow bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub bins: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Self {
        Self {
            lo,
            hi,
            bins: vec![0; bins],
            underflow: 0,
            overflow: 0,
        }
    }

    /// 101 bins over `[-5 sigma, 5 sigma]` with `sigma^2 = 4(d-1)/d^2`.
    pub fn for_fluctuations(d: usize) -> Self {
        let s = limit_variance(d).sqrt();
        Self::new(-5.0 * s, 5.0 * s, HISTOGRAM_BINS)
    }

    pub fn push(&mut self, x: f64) {
        if x < self.lo {
            self.underflow += 1;
        } else if x >= self.hi {
            self.overflow += 1;
        } else {
            let len = self.bins.len();
            let k = ((x - self.lo) / (self.hi - self.lo) * len as f64) as usize;
            self.bins[k.min(len - 1)] += 1;
        }
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.bins.len() as f64
    }

    pub fn total(&self) -> u64 {
        self.bins.iter().sum::<u64>() + self.underflow + self.overflow
    }

    fn same_binning(&self, other: &Self) -> bool {
        self.lo == other.lo && self.hi == other.hi && self.bins.len() == other.bins.len()
    }
}

/// Streaming count, mean, central moments to order 4, extrema, optional
/// histogram, and absolute moments `E|x - c|^m` about a fixed center `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentAccumulator {
    count: u64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
    min: f64,
    max: f64,
    center: f64,
    abs_orders: Vec<f64>,
    abs_sums: Vec<f64>,
    histogram: Option<Histogram>,
}

impl Default for MomentAccumulator {
    fn default() -> Self {
        Self::new(0.0, &[])
    }
}

impl MomentAccumulator {
    pub fn new(center: f64, abs_orders: &[f64]) -> Self {
        Self {
            count: 0,
            mean: 0.0,
            m2: 0.0,
            m3: 0.0,
            m4: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            center,
            abs_orders: abs_orders.to_vec(),
            abs_sums: vec![0.0; abs_orders.len()],
            histogram: None,
        }
    }

    pub fn with_histogram(mut self, h: Histogram) -> Self {
        self.histogram = Some(h);
        self
    }

    pub fn push(&mut self, x: f64) {
        let n1 = self.count as f64;
        self.count += 1;
        let n = self.count as f64;
        let delta = x - self.mean;
        let delta_n = delta / n;
        let delta_n2 = delta_n * delta_n;
        let term1 = delta * delta_n * n1;
        self.m4 += term1 * delta_n2 * (n * n - 3.0 * n + 3.0) + 6.0 * delta_n2 * self.m2
            - 4.0 * delta_n * self.m3;
        self.m3 += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * self.m2;
        self.m2 += term1;
        self.mean += delta_n;
        self.min = self.min.min(x);
        self.max = self.max.max(x);
        let dev = (x - self.center).abs();
        for (s, &m) in self.abs_sums.iter_mut().zip(&self.abs_orders) {
            *s += pow_abs(dev, m);
        }
        if let Some(h) = &mut self.histogram {
            h.push(x);
        }
    }

    /// Pools `other` into `self` (pairwise central-moment combination).
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if self.center != other.center || self.abs_orders != other.abs_orders {
            return Err(Error::Mismatch("absolute-moment center or orders differ".into()));
        }
        match (&self.histogram, &other.histogram) {
            (Some(a), Some(b)) if !a.same_binning(b) => {
                return Err(Error::Mismatch("histogram binning differs".into()))
            }
            (Some(_), None) | (None, Some(_)) => {
                return Err(Error::Mismatch("only one side has a histogram".into()))
            }
            _ => {}
        }
        if other.count == 0 {
            return Ok(());
        }
        if self.count == 0 {
            *self = other.clone();
            return Ok(());
        }
        let na = self.count as f64;
        let nb = other.count as f64;
        let n = na + nb;
        let delta = other.mean - self.mean;
        let d2 = delta * delta;
        let d3 = d2 * delta;
        let d4 = d2 * d2;
        let m2 = self.m2 + other.m2 + d2 * na * nb / n;
        let m3 = self.m3 + other.m3 + d3 * na * nb * (na - nb) / (n * n)
            + 3.0 * delta * (na * other.m2 - nb * self.m2) / n;
        let m4 = self.m4
            + other.m4
            + d4 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n)
            + 6.0 * d2 * (na * na * other.m2 + nb * nb * self.m2) / (n * n)
            + 4.0 * delta * (na * other.m3 - nb * self.m3) / n;
        self.mean = (na * self.mean + nb * other.mean) / n;
        self.m2 = m2;
        self.m3 = m3;
        self.m4 = m4;
        self.count += other.count;
        self.min = self.min.min(other.min);
        self.max = self.max.max(other.max);
        for (a, b) in self.abs_sums.iter_mut().zip(&other.abs_sums) {
            *a += b;
        }
        if let (Some(a), Some(b)) = (&mut self.histogram, &other.histogram) {
            for (x, y) in a.bins.iter_mut().zip(&b.bins) {
                *x += y;
            }
            a.underflow += b.underflow;
            a.overflow += b.overflow;
        }
        Ok(())
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Population variance.
    pub fn variance(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            self.m2 / self.count as f64
        }
    }

    pub fn sample_variance(&self) -> f64 {
        if self.count < 2 {
            f64::NAN
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    /// Third and fourth central moments.
    pub fn central_moment(&self, k: u32) -> f64 {
        let n = self.count as f64;
        match k {
            1 => 0.0,
            2 => self.m2 / n,
            3 => self.m3 / n,
            4 => self.m4 / n,
            _ => f64::NAN,
        }
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    /// `E|x - c|^m` for a tracked order `m`.
    pub fn abs_moment(&self, m: f64) -> Option<f64> {
        let i = self.abs_orders.iter().position(|&o| o == m)?;
        Some(self.abs_sums[i] / self.count as f64)
    }

    pub fn abs_orders(&self) -> &[f64] {
        &self.abs_orders
    }

    pub fn histogram(&self) -> Option<&Histogram> {
        self.histogram.as_ref()
    }
}

#[inline]
fn pow_abs(x: f64, m: f64) -> f64 {
    if m == 1.0 {
        x
    } else if m == 2.0 {
        x * x
    } else {
        x.powf(m)
    }
}

/// Merged statistics of all replicas at one checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointStats {
    pub n: u64,
    /// `Delta_n/n`, absolute moments about `(d-2)/d`.
    pub speed: MomentAccumulator,
    pub returns: u64,
    pub xi: MomentAccumulator,
    /// The fluctuation statistic, with histogram.
    pub fluct: MomentAccumulator,
    /// `r_n (Delta_n/n - (d-2)/d)` with histogram; absent when `r_n` is
    /// undefined (`p = 1`, `d < 3`, or `n < 2` at criticality).
    pub scaled_deviation: Option<MomentAccumulator>,
    /// `(1/d) sum_a |N_n(a)/n - 1/d|`.
    pub urn_deviation: MomentAccumulator,
    /// `<M>_n / n`.
    pub qv_ratio: MomentAccumulator,
}

impl CheckpointStats {
    fn new(n: u64, d: usize, orders: &[f64], scaled: bool) -> Self {
        let escape = 1.0 - 2.0 / d as f64;
        Self {
            n,
            speed: MomentAccumulator::new(escape, orders),
            returns: 0,
            xi: MomentAccumulator::new(0.0, orders),
            fluct: MomentAccumulator::new(0.0, &[]).with_histogram(Histogram::for_fluctuations(d)),
            scaled_deviation: scaled.then(|| {
                MomentAccumulator::new(0.0, &[]).with_histogram(Histogram::for_fluctuations(d))
            }),
            urn_deviation: MomentAccumulator::new(0.0, &[]),
            qv_ratio: MomentAccumulator::new(0.0, &[]),
        }
    }

    fn push(&mut self, row: &CheckpointRow, rate: Option<f64>, escape: f64) {
        self.speed.push(row.speed);
        if row.delta == 0 {
            self.returns += 1;
        }
        self.xi.push(row.xi);
        self.fluct.push(row.fluct);
        if let (Some(acc), Some(r)) = (&mut self.scaled_deviation, rate) {
            acc.push(r * (row.speed - escape));
        }
        self.urn_deviation.push(row.urn_deviation);
        self.qv_ratio.push(row.quadratic_variation / row.n as f64);
    }

    fn merge(&mut self, other: &Self) -> Result<()> {
        debug_assert_eq!(self.n, other.n);
        self.speed.merge(&other.speed)?;
        self.returns += other.returns;
        self.xi.merge(&other.xi)?;
        self.fluct.merge(&other.fluct)?;
        if let (Some(a), Some(b)) = (&mut self.scaled_deviation, &other.scaled_deviation) {
            a.merge(b)?;
        }
        self.urn_deviation.merge(&other.urn_deviation)?;
        self.qv_ratio.merge(&other.qv_ratio)?;
        Ok(())
    }

    pub fn replicas(&self) -> u64 {
        self.speed.count()
    }

    pub fn return_prob(&self) -> f64 {
        self.returns as f64 / self.replicas() as f64
    }

    /// Binomial standard error of the empirical return probability.
    pub fn return_prob_se(&self) -> f64 {
        let q = self.return_prob();
        (q * (1.0 - q) / self.replicas() as f64).sqrt()
    }
}

/// Final-horizon values of one replica.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinalRow {
    pub replica_index: u64,
    pub delta_n: u64,
    pub speed: f64,
    pub xi: f64,
    pub fluct_stat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub config: RunConfig,
    pub schedule: Option<RateSchedule>,
    pub checkpoints: Vec<CheckpointStats>,
    pub finals: Vec<FinalRow>,
}

impl EnsembleSummary {
    pub fn at(&self, n: u64) -> Option<&CheckpointStats> {
        self.checkpoints.iter().find(|c| c.n == n)
    }

    pub fn last(&self) -> &CheckpointStats {
        self.checkpoints.last().expect("validated config has checkpoints")
    }
}

struct BlockResult {
    stats: Vec<CheckpointStats>,
    finals: Vec<FinalRow>,
}

struct EnsemblePlan {
    pres: GroupPresentation,
    orders: Vec<f64>,
    rates: Vec<Option<f64>>,
    escape: f64,
}

impl EnsemblePlan {
    fn empty_stats(&self, cfg: &RunConfig) -> Vec<CheckpointStats> {
        cfg.checkpoints
            .iter()
            .zip(&self.rates)
            .map(|(&n, r)| CheckpointStats::new(n, self.pres.degree(), &self.orders, r.is_some()))
            .collect()
    }

    fn run_block(&self, cfg: &RunConfig, block: u64) -> Result<BlockResult> {
        let start = block * BLOCK_SIZE;
        let end = (start + BLOCK_SIZE).min(cfg.replicas);
        let mut stats = self.empty_stats(cfg);
        let mut finals = Vec::with_capacity((end - start) as usize);
        for index in start..end {
            let mut replica = Replica::for_config(cfg, &self.pres, index)?;
            let mut last = None;
            for (i, &n) in cfg.checkpoints.iter().enumerate() {
                replica.advance_to(n);
                let row = replica.row();
                if cfg!(debug_assertions) && index % 100 == 0 {
                    let residual = replica
                        .trace()
                        .decomposition_residual(row.delta as usize, replica.constants());
                    debug_assert!(
                        residual.abs() <= 1e-9,
                        "decomposition identity violated at replica {index}, n = {n}: {residual}"
                    );
                }
                stats[i].push(&row, self.rates[i], self.escape);
                last = Some(row);
            }
            let row = last.expect("at least one checkpoint");
            // finals are reported at the horizon even if it is not a checkpoint
            let row = if row.n == cfg.horizon {
                row
            } else {
                replica.advance_to(cfg.horizon);
                replica.row()
            };
            finals.push(FinalRow {
                replica_index: index,
                delta_n: row.delta,
                speed: row.speed,
                xi: row.xi,
                fluct_stat: row.fluct,
            });
        }
        Ok(BlockResult { stats, finals })
    }
}

/// Runs all replicas and merges their statistics in replica-index order.
pub fn run_ensemble(cfg: &RunConfig) -> Result<EnsembleSummary> {
    cfg.validate()?;
    let pres = cfg.presentation()?;
    let d = pres.degree();
    let p = cfg.effective_memory()?;
    let schedule = if d >= 3 { RateSchedule::new(p, d).ok() } else { None };
    let rates = cfg
        .checkpoints
        .iter()
        .map(|&n| schedule.as_ref().and_then(|s| s.rate(n as f64).ok()))
        .collect();
    let plan = EnsemblePlan {
        pres,
        orders: cfg.moment_orders(),
        rates,
        escape: 1.0 - 2.0 / d as f64,
    };

    let mut stats = plan.empty_stats(cfg);
    let mut finals = Vec::with_capacity(cfg.replicas as usize);
    for_each_block(cfg, |b| plan.run_block(cfg, b), |r| {
        for (acc, s) in stats.iter_mut().zip(&r.stats) {
            acc.merge(s)?;
        }
        finals.extend(r.finals);
        Ok(())
    })?;
    Ok(EnsembleSummary {
        config: cfg.clone(),
        schedule,
        checkpoints: stats,
        finals,
    })
}

/// Runs `work` on every replica block in parallel and hands the results to
/// `merge` in block order, independent of the worker count.
fn for_each_block<T, W, M>(cfg: &RunConfig, work: W, mut merge: M) -> Result<()>
where
    T: Send,
    W: Fn(u64) -> Result<T> + Sync,
    M: FnMut(T) -> Result<()>,
{
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(w) = cfg.workers {
            b = b.num_threads(w);
        }
        b.build()
            .map_err(|e| Error::InvalidConfig(format!("cannot build worker pool: {e}")))?
    };
    let workers = pool.current_num_threads() as u64;
    let blocks = cfg.replicas.div_ceil(BLOCK_SIZE);
    // Bounded waves keep at most a few blocks per worker in memory.
    let wave = (4 * workers).max(1);
    let mut next = 0;
    while next < blocks {
        let upto = (next + wave).min(blocks);
        let results: Vec<Result<T>> =
            pool.install(|| (next..upto).into_par_iter().map(&work).collect());
        for r in results {
            merge(r?)?;
        }
        next = upto;
    }
    Ok(())
}

/// Largest horizon accepted by [`distance_census`].
pub const MAX_CENSUS_HORIZON: u64 = 1 << 16;

/// Empirical counts of `Delta_n = k`, `k = 0..=n`, at every checkpoint.
/// Uses the same replica streams as [`run_ensemble`].
pub fn distance_census(cfg: &RunConfig) -> Result<Vec<Vec<u64>>> {
    cfg.validate()?;
    if cfg.horizon > MAX_CENSUS_HORIZON {
        return Err(Error::InvalidConfig(format!(
            "distance census is limited to horizons up to {MAX_CENSUS_HORIZON}"
        )));
    }
    let pres = cfg.presentation()?;
    let empty: Vec<Vec<u64>> = cfg.checkpoints.iter().map(|&n| vec![0; n as usize + 1]).collect();
    let mut total = empty.clone();
    for_each_block(
        cfg,
        |block| {
            let mut counts = empty.clone();
            let start = block * BLOCK_SIZE;
            let end = (start + BLOCK_SIZE).min(cfg.replicas);
            for index in start..end {
                let mut replica = Replica::for_config(cfg, &pres, index)?;
                for (i, &n) in cfg.checkpoints.iter().enumerate() {
                    replica.advance_to(n);
                    counts[i][replica.walker().distance()] += 1;
                }
            }
            Ok(counts)
        },
        |counts| {
            for (acc, c) in total.iter_mut().zip(counts) {
                for (a, b) in acc.iter_mut().zip(c) {
                    *a += b;
                }
            }
            Ok(())
        },
    )?;
    Ok(total)
}
