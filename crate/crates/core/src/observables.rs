//! Path observables of the walk and the rate constants they are compared
//! against.
//!
//! Along a path we track the Cesàro functional `Xi_n`, the number of visits
//! to the root, the martingale `M_n = sum_k (Delta_{k+1} - Delta_k - G_k)`
//! and its quadratic variation `<M>_n = n - sum_k G_k^2`, where
//!
//! ```text
//! G_n = 1 - 2(1-p)/(d-1) * 1(Delta_n > 0) + 2(1-pd)/(d-1) * l_n/n
//! ```
//!
//! is the conditional drift of the distance. These satisfy, for every path,
//!
//! ```text
//! Delta_n/n - (d-2)/d = M_n/n + (2/d) * zeros_n/n + 2(1-pd)/(d-1) * Xi_n
//! ```
//!
//! which the toolkit checks on simulated paths.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::GroupPresentation;
use crate::sampler::UrnCounts;
use crate::walker::WalkerState;

/// Regime classification tolerance for `p` against `p_d`.
pub const CRITICAL_TOLERANCE: f64 = 1e-12;

/// Neumaier's compensated sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline(always)]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// `l_n`: the number of past steps equal to the root-directed step
/// `gamma_n`, or 0 at the root.
pub fn ell(state: &WalkerState, urn: &UrnCounts, pres: &GroupPresentation) -> u64 {
    match state.toward_root(pres) {
        Some(gamma) => urn.count(gamma),
        None => 0,
    }
}

/// Probability `q_n` of moving away from the root.
pub fn q_value(ell_n: u64, n: u64, p: f64, d: usize) -> Result<f64> {
    if ell_n > n {
        return Err(Error::Undefined(format!("l_n = {ell_n} exceeds n = {n}")));
    }
    let ratio = if n == 0 { 0.0 } else { ell_n as f64 / n as f64 };
    let d = d as f64;
    Ok(1.0 - (1.0 - p) / (d - 1.0) + (1.0 - p * d) / (d - 1.0) * ratio)
}

/// Coefficients of the drift `G_n` for fixed `(p, d)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftConstants {
    pub d: usize,
    pub p: f64,
    inv_d: f64,
    /// `2(1-p)/(d-1)`
    root_coeff: f64,
    /// `2(1-pd)/(d-1)`, also the coefficient of `Xi_n` in the fluctuation
    /// statistic.
    xi_coeff: f64,
}

impl DriftConstants {
    pub fn new(p: f64, d: usize) -> Self {
        let df = d as f64;
        Self {
            d,
            p,
            inv_d: 1.0 / df,
            root_coeff: 2.0 * (1.0 - p) / (df - 1.0),
            xi_coeff: 2.0 * (1.0 - p * df) / (df - 1.0),
        }
    }

    #[inline]
    pub fn xi_coeff(&self) -> f64 {
        self.xi_coeff
    }

    /// `(d-2)/d`, the escape rate.
    #[inline]
    pub fn escape_rate(&self) -> f64 {
        1.0 - 2.0 * self.inv_d
    }

    #[inline(always)]
    pub fn drift(&self, ell_ratio: f64, away_from_root: bool) -> f64 {
        let indicator = if away_from_root { 1.0 } else { 0.0 };
        1.0 - self.root_coeff * indicator + self.xi_coeff * ell_ratio
    }
}

/// Running path functionals, advanced once per step.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableTrace {
    n: u64,
    xi_sum: CompensatedSum,
    zero_count: u64,
    martingale: CompensatedSum,
    quadratic_variation: CompensatedSum,
    last_drift: f64,
}

impl Default for ObservableTrace {
    fn default() -> Self {
        Self::new()
    }
}

impl ObservableTrace {
    pub fn new() -> Self {
        Self {
            n: 0,
            xi_sum: CompensatedSum::new(),
            zero_count: 0,
            martingale: CompensatedSum::new(),
            quadratic_variation: CompensatedSum::new(),
            last_drift: 1.0,
        }
    }

    /// Advances by one step given the pre-step walker and urn (both at time
    /// `n`) and the realised distance increment.
    pub fn advance(
        &mut self,
        state_before: &WalkerState,
        urn_before: &UrnCounts,
        pres: &GroupPresentation,
        increment: i32,
        consts: &DriftConstants,
    ) {
        let l = ell(state_before, urn_before, pres);
        self.advance_raw(l, state_before.at_root(), increment, consts);
    }

    /// Same as [`advance`](Self::advance) with `l_n` and the root indicator
    /// already extracted. The step index `n` is the trace's own counter.
    #[inline(always)]
    pub fn advance_raw(&mut self, ell_n: u64, at_root: bool, increment: i32, consts: &DriftConstants) {
        // l_0/0 = 0 by convention, and Delta_0 = 0 kills the indicator.
        let ratio = if self.n == 0 {
            0.0
        } else {
            ell_n as f64 / self.n as f64
        };
        let away = !at_root;
        if at_root {
            self.zero_count += 1;
            self.xi_sum.add(ratio);
        } else {
            self.xi_sum.add(ratio - consts.inv_d);
        }
        let g = consts.drift(ratio, away);
        self.martingale.add(increment as f64 - g);
        self.quadratic_variation.add(1.0 - g * g);
        self.last_drift = g;
        self.n += 1;
    }

    #[inline]
    pub fn steps(&self) -> u64 {
        self.n
    }

    /// `Xi_n`, zero before the first step.
    pub fn xi(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.xi_sum.value() / self.n as f64
        }
    }

    /// Visits to the root among times `0..n`.
    pub fn zero_count(&self) -> u64 {
        self.zero_count
    }

    pub fn martingale(&self) -> f64 {
        self.martingale.value()
    }

    pub fn quadratic_variation(&self) -> f64 {
        self.quadratic_variation.value()
    }

    /// The drift `G_{n-1}` used for the most recent step.
    pub fn last_drift(&self) -> f64 {
        self.last_drift
    }

    /// Right-hand side minus left-hand side of the exact speed
    /// decomposition at the current step.
    pub fn decomposition_residual(&self, delta_n: usize, consts: &DriftConstants) -> f64 {
        let n = self.n as f64;
        let lhs = delta_n as f64 / n - consts.escape_rate();
        let rhs = self.martingale() / n
            + 2.0 * consts.inv_d * self.zero_count as f64 / n
            + consts.xi_coeff * self.xi();
        rhs - lhs
    }

    /// The fluctuation statistic computed from its martingale form,
    /// `sqrt(n) * (M_n/n + (2/d) zeros_n/n)`.
    pub fn fluctuation_via_martingale(&self, consts: &DriftConstants) -> f64 {
        let n = self.n as f64;
        n.sqrt() * (self.martingale() / n + 2.0 * consts.inv_d * self.zero_count as f64 / n)
    }

    /// Shifts the running `Xi` sum. Only used to break the bookkeeping on
    /// purpose in mutation checks.
    #[doc(hidden)]
    pub fn offset_xi(&mut self, amount: f64) {
        self.xi_sum.add(amount);
    }
}

/// `sqrt(n) * [Delta_n/n - (d-2)/d - 2(1-pd)/(d-1) * Xi_n]`, asymptotically
/// `N(0, 4(d-1)/d^2)`.
pub fn fluctuation_statistic(xi_n: f64, delta_n: usize, n: u64, p: f64, d: usize) -> f64 {
    let c = DriftConstants::new(p, d);
    let n = n as f64;
    n.sqrt() * (delta_n as f64 / n - c.escape_rate() - c.xi_coeff * xi_n)
}

/// Limit variance `4(d-1)/d^2` of the fluctuation statistic.
pub fn limit_variance(d: usize) -> f64 {
    let d = d as f64;
    4.0 * (d - 1.0) / (d * d)
}

/// Critical memory `p_d = (d+1)/(2d)`.
pub fn critical_p(d: usize) -> Result<f64> {
    if d < 3 {
        return Err(Error::DegreeTooSmall { d, min: 3 });
    }
    Ok((d as f64 + 1.0) / (2.0 * d as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

impl Regime {
    pub fn classify(p: f64, d: usize) -> Result<Self> {
        let pd = critical_p(d)?;
        Ok(if (p - pd).abs() <= CRITICAL_TOLERANCE {
            Regime::Critical
        } else if p < pd {
            Regime::Subcritical
        } else {
            Regime::Supercritical
        })
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Subcritical => "subcritical",
            Regime::Critical => "critical",
            Regime::Supercritical => "supercritical",
        }
    }
}

/// Polynomial exponent of `r_n`: `1/2` up to criticality (the critical
/// schedule carries an extra `log n`), `d(1-p)/(d-1)` above.
pub fn rate_exponent(p: f64, d: usize) -> Result<f64> {
    Ok(match Regime::classify(p, d)? {
        Regime::Subcritical | Regime::Critical => 0.5,
        Regime::Supercritical => d as f64 * (1.0 - p) / (d as f64 - 1.0),
    })
}

/// The rate schedule `r_n`. Natural logarithm at criticality.
pub fn rate(n: f64, p: f64, d: usize) -> Result<f64> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::ParameterOutOfRange {
            name: "p",
            value: p,
            range: "[0, 1)",
        });
    }
    if !(n >= 1.0) {
        return Err(Error::ParameterOutOfRange {
            name: "n",
            value: n,
            range: "[1, inf)",
        });
    }
    match Regime::classify(p, d)? {
        Regime::Subcritical => Ok(n.sqrt()),
        Regime::Critical => {
            if n < 2.0 {
                return Err(Error::ParameterOutOfRange {
                    name: "n (critical regime)",
                    value: n,
                    range: "[2, inf)",
                });
            }
            Ok((n / n.ln()).sqrt())
        }
        Regime::Supercritical => Ok(n.powf(d as f64 * (1.0 - p) / (d as f64 - 1.0))),
    }
}

/// Drift margin `alpha_{p,d}` of the exponential return bound, defined for
/// `0 <= p < 1/2` except `(p, d) = (0, 3)`.
pub fn alpha(p: f64, d: usize) -> Result<f64> {
    if d < 3 {
        return Err(Error::DegreeTooSmall { d, min: 3 });
    }
    if !(0.0..0.5).contains(&p) {
        return Err(Error::Undefined(format!(
            "alpha is defined only for 0 <= p < 1/2 (got p = {p})"
        )));
    }
    if p == 0.0 && d == 3 {
        return Err(Error::Undefined("alpha is undefined at (p, d) = (0, 3)".into()));
    }
    let df = d as f64;
    Ok(if p <= 1.0 / df {
        1.0 - 2.0 * (1.0 - p) / (df - 1.0)
    } else {
        1.0 - 2.0 * p
    })
}

/// Upper bound `exp(-n alpha^2 / 8)` on the return probability.
pub fn return_bound(n: u64, p: f64, d: usize) -> Result<f64> {
    let a = alpha(p, d)?;
    Ok((-(n as f64) * a * a / 8.0).exp())
}

/// Derived constants for a `(p, d)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSchedule {
    pub d: usize,
    pub p: f64,
    pub p_d: f64,
    pub regime: Regime,
    pub alpha: Option<f64>,
    pub lambda2: f64,
    pub r_exponent: f64,
    /// `p = 1` walks never forget their first step; rate fits skip them.
    pub degenerate: bool,
}

impl RateSchedule {
    pub fn new(p: f64, d: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::ParameterOutOfRange {
                name: "p",
                value: p,
                range: "[0, 1]",
            });
        }
        Ok(Self {
            d,
            p,
            p_d: critical_p(d)?,
            regime: Regime::classify(p, d)?,
            alpha: alpha(p, d).ok(),
            lambda2: crate::sampler::second_eigenvalue(p, d),
            r_exponent: rate_exponent(p, d)?,
            degenerate: p >= 1.0,
        })
    }

    pub fn rate(&self, n: f64) -> Result<f64> {
        rate(n, self.p, self.d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::Generator;
    use crate::rng::replica_rng;
    use crate::sampler::{MemoryConfig, StepLaw};
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn ell_after_one_step() {
        let mut urn = UrnCounts::new(4);
        let inv = GroupPresentation::new(0, 4).unwrap();
        let mut w = WalkerState::new();
        assert_eq!(ell(&w, &urn, &inv), 0);
        w.apply_step(&inv, Generator(2));
        urn.record(Generator(2));
        assert_eq!(ell(&w, &urn, &inv), 1);

        let mut urn = UrnCounts::new(4);
        let free = GroupPresentation::new(2, 0).unwrap();
        let mut w = WalkerState::new();
        w.apply_step(&free, Generator(2));
        urn.record(Generator(2));
        assert_eq!(ell(&w, &urn, &free), 0);
    }

    #[test]
    fn q_special_values() {
        for &p in &[0.0, 0.3, 0.7, 0.99] {
            assert!(close(q_value(1, 4, p, 4).unwrap(), 0.75));
            assert!(close(q_value(7, 7, p, 4).unwrap(), 1.0 - p));
        }
        for l in 0..=10 {
            assert!(close(q_value(l, 10, 0.25, 4).unwrap(), 0.75));
        }
        assert!(close(q_value(0, 0, 0.5, 4).unwrap(), 1.0 - 0.5 / 3.0));
        assert!(q_value(3, 2, 0.5, 4).is_err());
    }

    /// Drives the walk with an explicit letter sequence.
    fn drive(pres: &GroupPresentation, p: f64, letters: &[u8]) -> (WalkerState, ObservableTrace) {
        let consts = DriftConstants::new(p, pres.degree());
        let mut w = WalkerState::new();
        let mut urn = UrnCounts::new(pres.degree());
        let mut t = ObservableTrace::new();
        for &l in letters {
            let before = w.clone();
            let inc = w.apply_step(pres, Generator(l));
            t.advance(&before, &urn, pres, inc, &consts);
            urn.record(Generator(l));
        }
        (w, t)
    }

    #[test]
    fn first_advance() {
        let pres = GroupPresentation::new(0, 4).unwrap();
        let (_, t) = drive(&pres, 0.4, &[1]);
        assert_eq!(t.xi(), 0.0);
        assert_eq!(t.last_drift(), 1.0);
        assert_eq!(t.martingale(), 0.0);
        assert_eq!(t.quadratic_variation(), 0.0);
        assert_eq!(t.zero_count(), 1);
    }

    #[test]
    fn xi_after_two_steps() {
        let inv = GroupPresentation::new(0, 4).unwrap();
        for &p in &[0.0, 0.4, 0.9] {
            let (_, t) = drive(&inv, p, &[1, 3]);
            assert!(close(t.xi(), 3.0 / 8.0));
        }
        let free = GroupPresentation::new(2, 0).unwrap();
        let (_, t) = drive(&free, 0.4, &[0, 2]);
        assert!(close(t.xi(), -1.0 / 8.0));
    }

    #[test]
    fn critical_probabilities() {
        assert_eq!(critical_p(4).unwrap(), 0.625);
        assert!(close(critical_p(3).unwrap(), 2.0 / 3.0));
        assert!(critical_p(2).is_err());
        let mut prev = 1.0;
        for d in 3..200 {
            let pd = critical_p(d).unwrap();
            assert!(pd < prev && pd > 0.5);
            prev = pd;
        }
    }

    #[test]
    fn rate_branches() {
        assert!((rate(1e6, 0.5, 4).unwrap() - 1e3).abs() < 1e-9);
        assert!((rate(1e6, 0.75, 4).unwrap() - 1e2).abs() < 1e-9);
        let e2 = std::f64::consts::E.powi(2);
        assert!(close(rate(e2, 0.625, 4).unwrap(), (e2 / 2.0).sqrt()));
        assert!(rate(1.5, 0.625, 4).is_err());
        assert!(rate(10.0, 1.0, 4).is_err());
        assert_eq!(rate_exponent(0.75, 4).unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn alpha_branches() {
        assert!(close(alpha(0.0, 4).unwrap(), 1.0 / 3.0));
        assert!(close(alpha(0.4, 3).unwrap(), 0.2));
        assert!(alpha(0.0, 3).is_err());
        assert!(alpha(0.5, 4).is_err());
        for d in 3..12 {
            for i in 0..50 {
                let p = i as f64 / 100.0;
                if let Ok(a) = alpha(p, d) {
                    assert!(a > 0.0);
                }
            }
        }
    }

    #[test]
    fn schedule_echo() {
        let s = RateSchedule::new(0.75, 4).unwrap();
        assert_eq!(s.regime, Regime::Supercritical);
        assert_eq!(s.alpha, None);
        assert!(close(s.lambda2, 2.0 / 3.0));
        let s = RateSchedule::new(0.625, 4).unwrap();
        assert_eq!(s.regime, Regime::Critical);
        let s = RateSchedule::new(0.0, 4).unwrap();
        assert_eq!(s.regime, Regime::Subcritical);
        assert!(close(s.alpha.unwrap(), 1.0 / 3.0));
        assert!(RateSchedule::new(1.0, 4).unwrap().degenerate);
    }

    #[test]
    fn srw_statistic_has_no_xi_term() {
        let c = DriftConstants::new(0.25, 4);
        assert_eq!(c.xi_coeff(), 0.0);
        let a = fluctuation_statistic(0.3, 510, 1000, 0.25, 4);
        let b = fluctuation_statistic(-0.7, 510, 1000, 0.25, 4);
        assert_eq!(a, b);
        assert!(close(a, 1000f64.sqrt() * 0.01));
        assert_eq!(limit_variance(4), 0.75);
    }

    #[test]
    fn corrupted_convention_breaks_decomposition() {
        let pres = GroupPresentation::new(1, 2).unwrap();
        let consts = DriftConstants::new(0.3, 4);
        let law = StepLaw::new(MemoryConfig::elephant(0.3), 4).unwrap();
        let mut rng = replica_rng(5, 5);
        let mut w = WalkerState::new();
        let mut urn = UrnCounts::new(4);
        let mut clean = ObservableTrace::new();
        let mut bad = ObservableTrace::new();
        for n in 1..=500u64 {
            let g = law.sample(urn.counts(), urn.total(), &mut rng);
            let before = w.clone();
            let inc = w.apply_step(&pres, Generator(g));
            clean.advance(&before, &urn, &pres, inc, &consts);
            bad.advance(&before, &urn, &pres, inc, &consts);
            if n == 1 {
                // k = 0 term set to 1 instead of 0
                bad.offset_xi(1.0);
            }
            urn.record(Generator(g));
            assert!(clean.decomposition_residual(w.distance(), &consts).abs() < 1e-12);
            assert!(bad.decomposition_residual(w.distance(), &consts).abs() > 1e-6);
        }
    }

    proptest! {
        #[test]
        fn path_identities(
            shape in prop::sample::select(vec![(0usize, 3usize), (1, 1), (0, 4), (1, 2), (2, 0), (0, 5)]),
            p in 0.0f64..1.0,
            seed in any::<u64>(),
        ) {
            let pres = GroupPresentation::new(shape.0, shape.1).unwrap();
            let d = pres.degree();
            let consts = DriftConstants::new(p, d);
            let law = StepLaw::new(MemoryConfig::elephant(p), d).unwrap();
            let mut rng = replica_rng(seed, 0);
            let mut w = WalkerState::new();
            let mut urn = UrnCounts::new(d);
            let mut t = ObservableTrace::new();
            let q_floor = (1.0 - p - (1.0 - p) / (d as f64 - 1.0)).max(0.0);
            for n in 1..=400u64 {
                let l = ell(&w, &urn, &pres);
                let q = q_value(l, urn.total(), p, d).unwrap();
                prop_assert!(q >= q_floor - 1e-12 && q <= 1.0 + 1e-12);
                if urn.total() > 0 {
                    let lhs = (l as f64 / urn.total() as f64
                        - if w.at_root() { 0.0 } else { 1.0 / d as f64 }).abs();
                    prop_assert!(lhs <= urn.max_deviation() + 1e-12);
                }
                let g = law.sample(urn.counts(), urn.total(), &mut rng);
                let before = w.clone();
                let inc = w.apply_step(&pres, Generator(g));
                t.advance(&before, &urn, &pres, inc, &consts);
                urn.record(Generator(g));
                prop_assert!(t.decomposition_residual(w.distance(), &consts).abs() <= 1e-9 * n as f64);
                prop_assert!(t.zero_count() >= 1 && t.zero_count() <= (n + 1) / 2);
                prop_assert!(t.quadratic_variation() <= n as f64 + 1e-9);
                let direct = fluctuation_statistic(t.xi(), w.distance(), n, p, d);
                prop_assert!((direct - t.fluctuation_via_martingale(&consts)).abs() < 1e-8);
            }
        }
    }
}
