//! Exact finite-horizon law of the walk by exhaustive enumeration of all
//! `d^n` step sequences.
//!
//! Each sequence is weighted by the product of its conditional step
//! probabilities, taken from the construction of the configured variant
//! (not from the equivalent elephant parameter), so the enumerator doubles
//! as a check of the variant equivalences. The Cesàro functional `Xi_n` is a
//! prefix sum and is accumulated along the depth-first traversal.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::group::{Generator, GroupPresentation};
use crate::observables::CompensatedSum;
use crate::sampler::{construction_probability, MemoryConfig, UrnCounts};
use crate::walker::WalkerState;

pub const MAX_HORIZON: usize = 12;
pub const MAX_PATHS: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentValue {
    pub order: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactDistribution {
    pub horizon: usize,
    pub degree: usize,
    pub paths: u64,
    /// `pmf[k] = P(Delta_n = k)` for `k = 0..=n`.
    pub pmf: Vec<f64>,
    pub mean_delta: f64,
    /// `E|Delta_n/n - (d-2)/d|^m` for each requested `m`.
    pub speed_moments: Vec<MomentValue>,
    pub return_prob: f64,
    pub mean_xi: f64,
    /// `E|Xi_n|^m` for each requested `m`.
    pub xi_moments: Vec<MomentValue>,
}

impl ExactDistribution {
    pub fn total_mass(&self) -> f64 {
        self.pmf.iter().sum()
    }
}

pub fn path_count(d: usize, n: usize) -> f64 {
    (d as f64).powi(n as i32)
}

struct Enumerator<'a> {
    pres: &'a GroupPresentation,
    cfg: MemoryConfig,
    horizon: usize,
    orders: &'a [f64],
    escape: f64,
    inv_d: f64,
    inverse: Vec<u8>,
    walker: WalkerState,
    urn: UrnCounts,
    pmf: Vec<CompensatedSum>,
    mean_delta: CompensatedSum,
    speed: Vec<CompensatedSum>,
    xi_abs: Vec<CompensatedSum>,
    mean_xi: CompensatedSum,
    paths: u64,
}

impl Enumerator<'_> {
    fn visit(&mut self, weight: f64, xi_sum: f64) {
        let k = self.walker.steps() as usize;
        if k == self.horizon {
            self.leaf(weight, xi_sum);
            return;
        }
        let delta_k = self.walker.distance();
        let ell = match self.walker.toward_root(self.pres) {
            Some(gamma) => self.urn.count(gamma),
            None => 0,
        };
        let ratio = if k == 0 { 0.0 } else { ell as f64 / k as f64 };
        let term = ratio - if delta_k > 0 { self.inv_d } else { 0.0 };
        for g in 0..self.pres.degree() as u8 {
            let pr = construction_probability(&self.urn, &self.cfg, Generator(g));
            if pr == 0.0 {
                // zero-weight subtrees still count as enumerated paths
                self.paths += path_count(self.pres.degree(), self.horizon - k - 1) as u64;
                continue;
            }
            let inc = self.walker.apply_raw(&self.inverse, g);
            self.urn.record_raw(g);
            self.visit(weight * pr, xi_sum + term);
            self.urn.unrecord_raw(g);
            self.walker.undo(g, &self.inverse, inc);
        }
    }

    fn leaf(&mut self, weight: f64, xi_sum: f64) {
        self.paths += 1;
        let n = self.horizon as f64;
        let delta = self.walker.distance();
        self.pmf[delta].add(weight);
        self.mean_delta.add(weight * delta as f64);
        let dev = (delta as f64 / n - self.escape).abs();
        let xi = xi_sum / n;
        self.mean_xi.add(weight * xi);
        for (i, &m) in self.orders.iter().enumerate() {
            self.speed[i].add(weight * dev.powf(m));
            self.xi_abs[i].add(weight * xi.abs().powf(m));
        }
    }
}

/// Exact law of `Delta_n` and related moments at horizon `n`.
///
/// Refuses horizons above [`MAX_HORIZON`] or with more than [`MAX_PATHS`]
/// sequences rather than truncating.
pub fn enumerate_exact(
    pres: &GroupPresentation,
    cfg: &MemoryConfig,
    n: usize,
    orders: &[f64],
) -> Result<ExactDistribution> {
    cfg.validate()?;
    let d = pres.degree();
    let paths = path_count(d, n);
    if n > MAX_HORIZON || paths > MAX_PATHS {
        return Err(Error::EnumerationBudget {
            n,
            paths,
            max_n: MAX_HORIZON,
            max_paths: MAX_PATHS,
        });
    }
    if n == 0 {
        return Err(Error::InvalidConfig("horizon must be at least 1".into()));
    }
    let mut e = Enumerator {
        pres,
        cfg: *cfg,
        horizon: n,
        orders,
        escape: 1.0 - 2.0 / d as f64,
        inv_d: 1.0 / d as f64,
        inverse: pres.inverse_table().to_vec(),
        walker: WalkerState::with_horizon(n),
        urn: UrnCounts::new(d),
        pmf: vec![CompensatedSum::new(); n + 1],
        mean_delta: CompensatedSum::new(),
        speed: vec![CompensatedSum::new(); orders.len()],
        xi_abs: vec![CompensatedSum::new(); orders.len()],
        mean_xi: CompensatedSum::new(),
        paths: 0,
    };
    e.visit(1.0, 0.0);
    let moments = |sums: &[CompensatedSum]| {
        orders
            .iter()
            .zip(sums)
            .map(|(&order, s)| MomentValue {
                order,
                value: s.value(),
            })
            .collect()
    };
    let pmf: Vec<f64> = e.pmf.iter().map(CompensatedSum::value).collect();
    Ok(ExactDistribution {
        horizon: n,
        degree: d,
        paths: e.paths,
        return_prob: pmf[0],
        mean_delta: e.mean_delta.value(),
        speed_moments: moments(&e.speed),
        mean_xi: e.mean_xi.value(),
        xi_moments: moments(&e.xi_abs),
        pmf,
    })
}

pub fn exact_return_probability(dist: &ExactDistribution) -> f64 {
    dist.pmf[0]
}

/// Maximum absolute difference between the exact `Delta_n` law of a
/// reinforced variant and that of the elephant walk with the mapped memory
/// parameter.
pub fn compare_variants(pres: &GroupPresentation, variant: &MemoryConfig, n: usize) -> Result<f64> {
    let p = variant.effective_memory(pres.degree())?;
    let a = enumerate_exact(pres, variant, n, &[])?;
    let b = enumerate_exact(pres, &MemoryConfig::elephant(p), n, &[])?;
    Ok(a.pmf
        .iter()
        .zip(&b.pmf)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pres(d1: usize, d2: usize) -> GroupPresentation {
        GroupPresentation::new(d1, d2).unwrap()
    }

    #[test]
    fn one_step_leaves_root() {
        for (d1, d2) in [(0, 3), (0, 4), (1, 2), (2, 0)] {
            let dist = enumerate_exact(&pres(d1, d2), &MemoryConfig::elephant(0.3), 1, &[1.0]).unwrap();
            assert_eq!(dist.pmf, vec![0.0, 1.0]);
            assert_eq!(exact_return_probability(&dist), 0.0);
        }
    }

    #[test]
    fn two_step_returns() {
        let dist = enumerate_exact(&pres(0, 3), &MemoryConfig::elephant(0.5), 2, &[]).unwrap();
        assert!((dist.return_prob - 0.5).abs() < 1e-15);
        assert!((dist.pmf[2] - 0.5).abs() < 1e-15);
        assert_eq!(dist.paths, 9);
        for p in [0.0, 0.25, 0.6, 1.0] {
            let dist = enumerate_exact(&pres(2, 0), &MemoryConfig::elephant(p), 2, &[]).unwrap();
            assert!((dist.return_prob - (1.0 - p) / 3.0).abs() < 1e-15);
        }
        let dist = enumerate_exact(&pres(0, 3), &MemoryConfig::elephant(0.0), 2, &[]).unwrap();
        assert_eq!(dist.return_prob, 0.0);
        let dist = enumerate_exact(&pres(0, 4), &MemoryConfig::elephant(0.3), 2, &[]).unwrap();
        assert!((dist.return_prob - 0.3).abs() < 1e-15);
    }

    #[test]
    fn free_group_parity() {
        let dist = enumerate_exact(&pres(2, 0), &MemoryConfig::elephant(0.4), 3, &[]).unwrap();
        assert_eq!(dist.return_prob, 0.0);
        for n in 1..=7 {
            let dist = enumerate_exact(&pres(2, 0), &MemoryConfig::elephant(0.4), n, &[]).unwrap();
            for (k, &pk) in dist.pmf.iter().enumerate() {
                if (k + n) % 2 == 1 {
                    assert_eq!(pk, 0.0);
                }
            }
            assert!(dist.pmf[n] > 0.0);
            assert!((dist.total_mass() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn full_memory_on_mixed_group() {
        let dist = enumerate_exact(&pres(1, 2), &MemoryConfig::elephant(1.0), 3, &[]).unwrap();
        assert!((dist.pmf[1] - 0.5).abs() < 1e-15);
        assert!((dist.pmf[3] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn budget_guard() {
        let err = enumerate_exact(&pres(0, 4), &MemoryConfig::elephant(0.3), 13, &[]).unwrap_err();
        assert!(matches!(err, Error::EnumerationBudget { n: 13, .. }));
        let err = enumerate_exact(&pres(0, 6), &MemoryConfig::elephant(0.3), 11, &[]).unwrap_err();
        assert!(matches!(err, Error::EnumerationBudget { .. }));
    }

    #[test]
    fn variant_equivalence_small() {
        let p = pres(0, 4);
        let pos0 = MemoryConfig::PositiveReinforced { p_tilde: 0.0 };
        assert!(compare_variants(&p, &pos0, 4).unwrap() <= 1e-12);
        let neg1 = MemoryConfig::NegativeReinforced { p_tilde: 1.0 };
        assert!(compare_variants(&p, &neg1, 4).unwrap() <= 1e-12);
        let pos_half = MemoryConfig::PositiveReinforced { p_tilde: 0.5 };
        assert!(compare_variants(&p, &pos_half, 5).unwrap() <= 1e-12);
    }
}
