//! The elephant step law and the two step-reinforced constructions that
//! reduce to it.
//!
//! Recalling a uniformly chosen past epoch `D` and reading `g_D` is the same
//! in distribution as drawing a generator `a` with probability `N_n(a)/n`, so
//! the sampler keeps only the step-count vector (the urn) and never the
//! step history.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::Generator;

/// How the walker uses its memory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum MemoryConfig {
    /// Repeat the recalled step with probability `p`, otherwise take one of
    /// the other `d - 1` steps uniformly.
    Elephant { p: f64 },
    /// Repeat the recalled step with probability `p_tilde`, otherwise take a
    /// fresh uniform step.
    PositiveReinforced { p_tilde: f64 },
    /// With probability `p_tilde` avoid the recalled step (uniform over the
    /// other `d - 1`), otherwise take a fresh uniform step.
    NegativeReinforced { p_tilde: f64 },
}

impl MemoryConfig {
    pub fn elephant(p: f64) -> Self {
        Self::Elephant { p }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Elephant { p } if !(0.0..=1.0).contains(&p) => Err(Error::ParameterOutOfRange {
                name: "p",
                value: p,
                range: "[0, 1]",
            }),
            Self::PositiveReinforced { p_tilde } if !(0.0..1.0).contains(&p_tilde) => {
                Err(Error::ParameterOutOfRange {
                    name: "p_tilde (positive)",
                    value: p_tilde,
                    range: "[0, 1)",
                })
            }
            Self::NegativeReinforced { p_tilde } if !(p_tilde > 0.0 && p_tilde <= 1.0) => {
                Err(Error::ParameterOutOfRange {
                    name: "p_tilde (negative)",
                    value: p_tilde,
                    range: "(0, 1]",
                })
            }
            _ => Ok(()),
        }
    }

    /// The memory parameter of the elephant walk equivalent to this
    /// configuration on a generating set of size `d`.
    pub fn effective_memory(&self, d: usize) -> Result<f64> {
        self.validate()?;
        let d = d as f64;
        Ok(match *self {
            Self::Elephant { p } => p,
            Self::PositiveReinforced { p_tilde } => p_tilde + (1.0 - p_tilde) / d,
            Self::NegativeReinforced { p_tilde } => (1.0 - p_tilde) / d,
        })
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            Self::Elephant { .. } => "elephant",
            Self::PositiveReinforced { .. } => "pos",
            Self::NegativeReinforced { .. } => "neg",
        }
    }

    /// The raw parameter of the variant (`p` or `p_tilde`).
    pub fn parameter(&self) -> f64 {
        match *self {
            Self::Elephant { p } => p,
            Self::PositiveReinforced { p_tilde } | Self::NegativeReinforced { p_tilde } => p_tilde,
        }
    }
}

/// Step counts `N_n(a)` for every generator `a`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UrnCounts {
    counts: Vec<u64>,
    total: u64,
}

impl UrnCounts {
    pub fn new(d: usize) -> Self {
        Self {
            counts: vec![0; d],
            total: 0,
        }
    }

    #[inline]
    pub fn record(&mut self, g: Generator) {
        self.record_raw(g.0);
    }

    #[inline(always)]
    pub(crate) fn record_raw(&mut self, g: u8) {
        self.counts[g as usize] += 1;
        self.total += 1;
    }

    #[inline]
    pub(crate) fn unrecord_raw(&mut self, g: u8) {
        self.counts[g as usize] -= 1;
        self.total -= 1;
    }

    #[inline]
    pub fn count(&self, g: Generator) -> u64 {
        self.counts[g.index()]
    }

    #[inline]
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn degree(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// `max_a |N_n(a)/n - 1/d|`, zero for the empty urn.
    pub fn max_deviation(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let n = self.total as f64;
        let inv_d = 1.0 / self.counts.len() as f64;
        self.counts
            .iter()
            .map(|&c| (c as f64 / n - inv_d).abs())
            .fold(0.0, f64::max)
    }

    /// `(1/d) * sum_a |N_n(a)/n - 1/d|`; by symmetry of the generators its
    /// expectation is `E|N_n(a)/n - 1/d|` for any single `a`.
    pub fn mean_deviation(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let n = self.total as f64;
        let d = self.counts.len() as f64;
        self.counts
            .iter()
            .map(|&c| (c as f64 / n - 1.0 / d).abs())
            .sum::<f64>()
            / d
    }
}

/// `P(g_{n+1} = a | F_n) = N_n(a)/n * p + (n - N_n(a))/n * (1-p)/(d-1)`
/// with `p` the effective memory of `cfg`.
pub fn step_probability(urn: &UrnCounts, cfg: &MemoryConfig, a: Generator) -> Result<f64> {
    if urn.total == 0 {
        return Err(Error::EmptyUrn);
    }
    let d = urn.degree();
    let p = cfg.effective_memory(d)?;
    let n = urn.total as f64;
    let na = urn.count(a) as f64;
    Ok(na / n * p + (n - na) / n * (1.0 - p) / (d as f64 - 1.0))
}

/// The conditional law written directly from the construction of each
/// variant, without mapping to an equivalent elephant parameter. For the
/// empty urn this is the uniform first step.
pub fn construction_probability(urn: &UrnCounts, cfg: &MemoryConfig, a: Generator) -> f64 {
    let d = urn.degree() as f64;
    if urn.total == 0 {
        return 1.0 / d;
    }
    let recall = urn.count(a) as f64 / urn.total as f64;
    match *cfg {
        MemoryConfig::Elephant { p } => recall * p + (1.0 - recall) * (1.0 - p) / (d - 1.0),
        MemoryConfig::PositiveReinforced { p_tilde } => recall * p_tilde + (1.0 - p_tilde) / d,
        MemoryConfig::NegativeReinforced { p_tilde } => {
            (1.0 - recall) * p_tilde / (d - 1.0) + (1.0 - p_tilde) / d
        }
    }
}

/// Second eigenvalue `(pd - 1)/(d - 1)` of the mean replacement matrix of
/// the step-count urn. Its multiplicity is `d - 1`; the top eigenvalue is 1.
pub fn second_eigenvalue(p: f64, d: usize) -> f64 {
    let d = d as f64;
    (p * d - 1.0) / (d - 1.0)
}

/// A validated step law for a fixed degree, ready for the inner loop.
#[derive(Debug, Clone, Copy)]
pub struct StepLaw {
    cfg: MemoryConfig,
    d: u32,
}

impl StepLaw {
    pub fn new(cfg: MemoryConfig, d: usize) -> Result<Self> {
        cfg.validate()?;
        if d < 2 {
            return Err(Error::DegreeTooSmall { d, min: 2 });
        }
        Ok(Self { cfg, d: d as u32 })
    }

    pub fn config(&self) -> &MemoryConfig {
        &self.cfg
    }

    /// Draws `g_{n+1}` given the counts after `n = total` steps.
    ///
    /// Random stream per step: one draw for the recalled generator, one
    /// uniform for the keep/replace decision, and one more for the
    /// replacement when the recalled step is not kept. The first step uses a
    /// single uniform draw over the generating set.
    #[inline(always)]
    pub fn sample<R: Rng + ?Sized>(&self, counts: &[u64], total: u64, rng: &mut R) -> u8 {
        let d = self.d;
        if total == 0 {
            return rng.random_range(0..d) as u8;
        }
        let recalled = recall(counts, rng.random_range(0..total));
        let u: f64 = rng.random();
        match self.cfg {
            MemoryConfig::Elephant { p } => {
                if u < p {
                    recalled
                } else {
                    other_than(recalled, d, rng)
                }
            }
            MemoryConfig::PositiveReinforced { p_tilde } => {
                if u < p_tilde {
                    recalled
                } else {
                    rng.random_range(0..d) as u8
                }
            }
            MemoryConfig::NegativeReinforced { p_tilde } => {
                if u < p_tilde {
                    other_than(recalled, d, rng)
                } else {
                    rng.random_range(0..d) as u8
                }
            }
        }
    }
}

/// Maps a uniform ticket in `[0, total)` to the generator whose cumulative
/// count range contains it.
#[inline(always)]
fn recall(counts: &[u64], mut ticket: u64) -> u8 {
    for (i, &c) in counts.iter().enumerate() {
        if ticket < c {
            return i as u8;
        }
        ticket -= c;
    }
    unreachable!("ticket exceeds urn total")
}

#[inline(always)]
fn other_than<R: Rng + ?Sized>(avoid: u8, d: u32, rng: &mut R) -> u8 {
    let j = rng.random_range(0..d - 1) as u8;
    if j >= avoid {
        j + 1
    } else {
        j
    }
}

/// Convenience wrapper around [`StepLaw::sample`].
pub fn sample_next_step<R: Rng + ?Sized>(
    urn: &UrnCounts,
    cfg: &MemoryConfig,
    rng: &mut R,
) -> Result<Generator> {
    let law = StepLaw::new(*cfg, urn.degree())?;
    Ok(Generator(law.sample(&urn.counts, urn.total, rng)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replica_rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn urn_from(counts: &[u64]) -> UrnCounts {
        UrnCounts {
            counts: counts.to_vec(),
            total: counts.iter().sum(),
        }
    }

    #[test]
    fn uniform_at_srw_point() {
        let urn = urn_from(&[5, 0, 2, 9]);
        let cfg = MemoryConfig::elephant(0.25);
        for g in 0..4 {
            let pr = step_probability(&urn, &cfg, Generator(g)).unwrap();
            assert!((pr - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn single_past_step() {
        let urn = urn_from(&[1, 0, 0, 0]);
        let cfg = MemoryConfig::elephant(0.75);
        assert!((step_probability(&urn, &cfg, Generator(0)).unwrap() - 0.75).abs() < 1e-15);
        for g in 1..4 {
            let pr = step_probability(&urn, &cfg, Generator(g)).unwrap();
            assert!((pr - 1.0 / 12.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_memory_never_repeats_sole_step() {
        let urn = urn_from(&[2, 0, 0]);
        let cfg = MemoryConfig::elephant(0.0);
        assert_eq!(step_probability(&urn, &cfg, Generator(0)).unwrap(), 0.0);
        assert_eq!(step_probability(&urn, &cfg, Generator(1)).unwrap(), 0.5);
        assert_eq!(step_probability(&urn, &cfg, Generator(2)).unwrap(), 0.5);
    }

    #[test]
    fn empty_urn_rejected() {
        let urn = UrnCounts::new(4);
        assert_eq!(
            step_probability(&urn, &MemoryConfig::elephant(0.5), Generator(0)),
            Err(Error::EmptyUrn)
        );
    }

    #[test]
    fn effective_memory_maps() {
        let pos0 = MemoryConfig::PositiveReinforced { p_tilde: 0.0 };
        assert_eq!(pos0.effective_memory(4).unwrap(), 0.25);
        let neg1 = MemoryConfig::NegativeReinforced { p_tilde: 1.0 };
        assert_eq!(neg1.effective_memory(4).unwrap(), 0.0);
        let pos_half = MemoryConfig::PositiveReinforced { p_tilde: 0.5 };
        assert_eq!(pos_half.effective_memory(4).unwrap(), 0.625);
        assert_eq!(MemoryConfig::elephant(0.3).effective_memory(7).unwrap(), 0.3);
    }

    #[test]
    fn out_of_range_parameters() {
        assert!(MemoryConfig::PositiveReinforced { p_tilde: 1.0 }.validate().is_err());
        assert!(MemoryConfig::NegativeReinforced { p_tilde: 0.0 }.validate().is_err());
        assert!(MemoryConfig::elephant(1.0).validate().is_ok());
        assert!(MemoryConfig::elephant(-0.1).validate().is_err());
        assert!(MemoryConfig::elephant(f64::NAN).validate().is_err());
    }

    #[test]
    fn record_step() {
        let mut urn = UrnCounts::new(4);
        urn.record(Generator(0));
        assert_eq!(urn.count(Generator(0)), 1);
        assert_eq!(urn.total(), 1);
        let mut urn = UrnCounts::new(5);
        for g in 0..5 {
            urn.record(Generator(g));
        }
        assert!(urn.counts().iter().all(|&c| c == 1));
        assert_eq!(urn.total(), 5);

        let mut rng = replica_rng(7, 0);
        let mut urn = UrnCounts::new(6);
        for _ in 0..10_000 {
            urn.record(Generator(rng.random_range(0..6)));
        }
        assert_eq!(urn.counts().iter().sum::<u64>(), urn.total());
        assert_eq!(urn.total(), 10_000);
    }

    #[test]
    fn second_eigenvalue_values() {
        assert_eq!(second_eigenvalue(0.25, 4), 0.0);
        assert!((second_eigenvalue(0.625, 4) - 0.5).abs() < 1e-15);
        assert_eq!(second_eigenvalue(1.0, 4), 1.0);
        for d in 3..10 {
            let pd = (d as f64 + 1.0) / (2.0 * d as f64);
            assert!((second_eigenvalue(pd, d) - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn full_recall_repeats_the_only_step() {
        let law = StepLaw::new(MemoryConfig::elephant(1.0), 4).unwrap();
        let mut rng = replica_rng(1, 2);
        for _ in 0..1000 {
            assert_eq!(law.sample(&[0, 0, 3, 0], 3, &mut rng), 2);
        }
    }

    proptest! {
        #[test]
        fn probabilities_sum_to_one(
            counts in prop::collection::vec(0u64..50, 2..9),
            p in 0.0f64..=1.0,
        ) {
            prop_assume!(counts.iter().sum::<u64>() > 0);
            let urn = urn_from(&counts);
            let cfg = MemoryConfig::elephant(p);
            let total: f64 = (0..counts.len())
                .map(|g| step_probability(&urn, &cfg, Generator(g as u8)).unwrap())
                .sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn reinforced_variants_match_mapped_elephant(
            counts in prop::collection::vec(0u64..50, 2..9),
            pt in 0.0f64..1.0,
        ) {
            prop_assume!(counts.iter().sum::<u64>() > 0);
            let urn = urn_from(&counts);
            let d = counts.len();
            let pos = MemoryConfig::PositiveReinforced { p_tilde: pt };
            let neg = MemoryConfig::NegativeReinforced { p_tilde: 1.0 - pt };
            let pos_e = MemoryConfig::elephant(pos.effective_memory(d).unwrap());
            let neg_e = MemoryConfig::elephant(neg.effective_memory(d).unwrap());
            for g in 0..d {
                let g = Generator(g as u8);
                let a = construction_probability(&urn, &pos, g);
                let b = construction_probability(&urn, &pos_e, g);
                prop_assert!((a - b).abs() < 1e-14);
                let a = construction_probability(&urn, &neg, g);
                let b = construction_probability(&urn, &neg_e, g);
                prop_assert!((a - b).abs() < 1e-14);
                let c = step_probability(&urn, &pos, g).unwrap();
                prop_assert!((c - construction_probability(&urn, &pos, g)).abs() < 1e-14);
            }
        }
    }
}
