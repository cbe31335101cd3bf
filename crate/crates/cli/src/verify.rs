//! The property and oracle checks over the standard parameter grid.

use erw_core::analysis::chi_square;
use erw_core::montecarlo::{audit_path, audit_path_with_xi_offset, dyadic_checkpoints};
use erw_core::observables::{critical_p, return_bound, DriftConstants};
use erw_core::rng::replica_rng;
use erw_core::sampler::step_probability;
use erw_core::{
    compare_variants, enumerate_exact, run_ensemble, Generator, GroupPresentation, MemoryConfig, RunConfig,
    StepLaw, UrnCounts,
};
use serde::Serialize;

use crate::args::VerifyArgs;
use crate::oracle::{compare_with_mc, Z_THRESHOLD};

pub const GROUPS: [(usize, usize); 5] = [(0, 3), (1, 1), (0, 4), (1, 2), (2, 0)];

pub const POSITIVE_P_TILDES: [f64; 4] = [0.0, 0.25, 0.5, 0.9];
pub const NEGATIVE_P_TILDES: [f64; 3] = [0.25, 0.5, 1.0];

/// The memory grid for degree `d`: `{0, 0.3, 1/d, 0.5, p_d, 0.75, 0.9}`.
pub fn memory_grid(d: usize) -> Vec<f64> {
    let mut ps = vec![0.0, 0.3, 1.0 / d as f64, 0.5, critical_p(d).expect("d >= 3"), 0.75, 0.9];
    ps.sort_by(f64::total_cmp);
    ps.dedup();
    ps
}

#[derive(Debug, Clone, Copy)]
pub struct Budget {
    pub chi_draws: u64,
    pub srw_max_n: usize,
    pub oracle_n: usize,
    pub mc_replicas: u64,
    pub audit_paths: u64,
    pub audit_steps: u64,
    pub bound_replicas: u64,
    pub bound_log2_horizon: u32,
    pub variant_n: usize,
}

impl Budget {
    pub fn new(quick: bool) -> Self {
        if quick {
            Self {
                chi_draws: 20_000,
                srw_max_n: 6,
                oracle_n: 4,
                mc_replicas: 20_000,
                audit_paths: 3,
                audit_steps: 2_000,
                bound_replicas: 4_000,
                bound_log2_horizon: 7,
                variant_n: 4,
            }
        } else {
            Self {
                chi_draws: 200_000,
                srw_max_n: 8,
                oracle_n: 6,
                mc_replicas: 200_000,
                audit_paths: 10,
                audit_steps: 10_000,
                bound_replicas: 20_000,
                bound_log2_horizon: 8,
                variant_n: 5,
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub check: &'static str,
    pub point: String,
    pub observed: String,
    pub expected: String,
    pub pass: bool,
}

struct Ctx {
    budget: Budget,
    seed: u64,
    workers: Option<usize>,
    results: Vec<CheckResult>,
}

impl Ctx {
    fn record(&mut self, check: &'static str, point: String, observed: String, expected: String, pass: bool) {
        self.results.push(CheckResult {
            check,
            point,
            observed,
            expected,
            pass,
        });
    }

    fn fail(&mut self, check: &'static str, point: String, err: impl std::fmt::Display) {
        self.record(check, point, format!("error: {err}"), "no error".into(), false);
    }
}

fn point(d1: usize, d2: usize, p: f64) -> String {
    format!("(d1,d2)=({d1},{d2}) p={p:.4}")
}

/// Law of the distance at `p = 1/d`: the root always steps out, elsewhere
/// the walk moves up with probability `(d-1)/d`.
pub fn distance_chain(d: usize, n: usize) -> Vec<f64> {
    let up = (d as f64 - 1.0) / d as f64;
    let mut law = vec![0.0; n + 1];
    law[0] = 1.0;
    for _ in 0..n {
        let mut next = vec![0.0; n + 1];
        for (k, &w) in law.iter().enumerate() {
            if k == 0 {
                next[1] += w;
            } else {
                next[k - 1] += w * (1.0 - up);
                if k < n {
                    next[k + 1] += w * up;
                }
            }
        }
        law = next;
    }
    law
}

/// `P(Delta_2 = 0)`: an involution must be repeated, a free generator
/// replaced by its inverse.
pub fn two_step_return(d1: usize, d2: usize, p: f64) -> f64 {
    let d = (2 * d1 + d2) as f64;
    d2 as f64 / d * p + 2.0 * d1 as f64 / d * (1.0 - p) / (d - 1.0)
}

fn check_sampler(ctx: &mut Ctx, d1: usize, d2: usize, p: f64) -> erw_core::Result<()> {
    let d = 2 * d1 + d2;
    let cfg = MemoryConfig::elephant(p);
    let law = StepLaw::new(cfg, d)?;
    let mut urn = UrnCounts::new(d);
    let mut rng = replica_rng(ctx.seed, (d1 * 31 + d2) as u64);
    for (label, fill) in [("empty urn", false), ("fixed urn", true)] {
        if fill {
            for a in 0..d {
                for _ in 0..(3 * a + 1) {
                    urn.record(Generator(a as u8));
                }
            }
        }
        let expected: Vec<f64> = if urn.total() == 0 {
            vec![1.0 / d as f64; d]
        } else {
            (0..d)
                .map(|a| step_probability(&urn, &cfg, Generator(a as u8)))
                .collect::<erw_core::Result<_>>()?
        };
        let mut counts = vec![0u64; d];
        for _ in 0..ctx.budget.chi_draws {
            counts[law.sample(urn.counts(), urn.total(), &mut rng) as usize] += 1;
        }
        let t = chi_square(&counts, &expected)?;
        ctx.record(
            "sampler chi-square",
            format!("{} {label}", point(d1, d2, p)),
            format!("p-value {:.4}", t.p_value),
            ">= 0.001".into(),
            t.p_value >= 1e-3,
        );
    }
    Ok(())
}

fn check_exact(ctx: &mut Ctx, pres: &GroupPresentation, p: f64) -> erw_core::Result<()> {
    let (d1, d2) = (pres.d1(), pres.d2());
    let cfg = MemoryConfig::elephant(p);
    let two = enumerate_exact(pres, &cfg, 2, &[])?;
    let expected = two_step_return(d1, d2, p);
    let err = (two.return_prob - expected).abs();
    ctx.record(
        "two-step return",
        point(d1, d2, p),
        format!("{:.15}", two.return_prob),
        format!("{expected:.15}"),
        err <= 1e-14,
    );

    let n = ctx.budget.oracle_n + 1;
    let dist = enumerate_exact(pres, &cfg, n, &[])?;
    let mass_err = (dist.total_mass() - 1.0).abs();
    let parity_ok = d2 > 0 || dist.pmf.iter().enumerate().all(|(k, &q)| (k + n) % 2 == 0 || q == 0.0);
    ctx.record(
        "mass and parity",
        format!("{} n={n}", point(d1, d2, p)),
        format!("|mass-1|={mass_err:.1e} parity={}", if parity_ok { "ok" } else { "broken" }),
        "|mass-1|<=1e-12, parity on free groups".into(),
        mass_err <= 1e-12 && parity_ok,
    );
    Ok(())
}

fn check_audit(ctx: &mut Ctx, pres: &GroupPresentation, p: f64) -> erw_core::Result<()> {
    let (d1, d2) = (pres.d1(), pres.d2());
    let cfg = MemoryConfig::elephant(p);
    let mut total = erw_core::montecarlo::PathAudit::default();
    for i in 0..ctx.budget.audit_paths {
        total.absorb(&audit_path(pres, cfg, ctx.budget.audit_steps, ctx.seed, i)?);
    }
    ctx.record(
        "path identities",
        format!("{} {}x{}", point(d1, d2, p), ctx.budget.audit_paths, ctx.budget.audit_steps),
        format!(
            "{} violations, max residual/n {:.1e}",
            total.violations(),
            total.max_decomposition_residual_over_n
        ),
        "0 violations".into(),
        total.violations() == 0,
    );

    // a wrong k = 0 convention is invisible where Xi does not enter
    if DriftConstants::new(p, pres.degree()).xi_coeff() != 0.0 {
        let steps = 1_000;
        let broken = audit_path_with_xi_offset(pres, cfg, steps, ctx.seed, 0, 1.0)?;
        ctx.record(
            "Xi mutation detected",
            point(d1, d2, p),
            format!("{} of {steps} steps flagged", broken.decomposition_violations),
            format!("{steps} of {steps}"),
            broken.decomposition_violations == steps,
        );
    }
    Ok(())
}

fn check_mc_vs_oracle(ctx: &mut Ctx, pres: &GroupPresentation, p: f64) -> anyhow::Result<()> {
    let (d1, d2) = (pres.d1(), pres.d2());
    let cfg = MemoryConfig::elephant(p);
    let n = ctx.budget.oracle_n;
    let exact = enumerate_exact(pres, &cfg, n, &[])?;
    let cmp = compare_with_mc(&exact, d1, d2, cfg, ctx.budget.mc_replicas, ctx.seed, ctx.workers)?;
    ctx.record(
        "Monte Carlo vs exact law",
        format!("{} n={n} R={}", point(d1, d2, p), ctx.budget.mc_replicas),
        match cmp.max_abs_z {
            Some(z) => format!("max |z| {z:.2}"),
            None => "impossible distance observed".into(),
        },
        format!("|z| <= {Z_THRESHOLD}"),
        cmp.pass,
    );
    Ok(())
}

fn check_return_bound(ctx: &mut Ctx, pres: &GroupPresentation, p: f64) -> anyhow::Result<()> {
    let (d1, d2) = (pres.d1(), pres.d2());
    let d = pres.degree();
    if return_bound(1, p, d).is_err() {
        return Ok(());
    }
    let hi = ctx.budget.bound_log2_horizon;
    let mut cfg = RunConfig::new(d1, d2, MemoryConfig::elephant(p), 1 << hi, ctx.budget.bound_replicas, ctx.seed)
        .with_checkpoints(dyadic_checkpoints(5, hi));
    cfg.workers = ctx.workers;
    let summary = run_ensemble(&cfg)?;
    let mut worst = f64::NEG_INFINITY;
    for s in &summary.checkpoints {
        let slack = s.return_prob() - return_bound(s.n, p, d)? - 4.0 * s.return_prob_se();
        worst = worst.max(slack);
    }
    ctx.record(
        "return probability bound",
        format!("{} n=32..{} R={}", point(d1, d2, p), 1u64 << hi, ctx.budget.bound_replicas),
        format!("max excess {worst:.2e}"),
        "<= 0 (bound + 4 SE)".into(),
        worst <= 0.0,
    );
    Ok(())
}

fn check_srw_law(ctx: &mut Ctx, pres: &GroupPresentation) -> erw_core::Result<()> {
    let d = pres.degree();
    let mut worst = 0.0f64;
    for n in 1..=ctx.budget.srw_max_n {
        let exact = enumerate_exact(pres, &MemoryConfig::elephant(1.0 / d as f64), n, &[])?;
        let chain = distance_chain(d, n);
        for (a, b) in exact.pmf.iter().zip(&chain) {
            worst = worst.max((a - b).abs());
        }
    }
    ctx.record(
        "simple random walk law",
        format!("(d1,d2)=({},{}) n<={}", pres.d1(), pres.d2(), ctx.budget.srw_max_n),
        format!("max error {worst:.1e}"),
        "<= 1e-12".into(),
        worst <= 1e-12,
    );
    Ok(())
}

fn check_variants(ctx: &mut Ctx, pres: &GroupPresentation) -> erw_core::Result<()> {
    let n = ctx.budget.variant_n;
    let variants = POSITIVE_P_TILDES
        .iter()
        .map(|&p_tilde| MemoryConfig::PositiveReinforced { p_tilde })
        .chain(
            NEGATIVE_P_TILDES
                .iter()
                .map(|&p_tilde| MemoryConfig::NegativeReinforced { p_tilde }),
        );
    for v in variants {
        let diff = compare_variants(pres, &v, n)?;
        ctx.record(
            "variant equivalence",
            format!(
                "(d1,d2)=({},{}) {} p~={} n={n}",
                pres.d1(),
                pres.d2(),
                v.variant_name(),
                v.parameter()
            ),
            format!("max diff {diff:.1e}"),
            "<= 1e-12".into(),
            diff <= 1e-12,
        );
    }
    Ok(())
}

pub fn run(args: &VerifyArgs) -> Vec<CheckResult> {
    let mut ctx = Ctx {
        budget: Budget::new(args.quick),
        seed: args.seed,
        workers: args.workers,
        results: Vec::new(),
    };
    for (d1, d2) in GROUPS {
        let pres = GroupPresentation::new(d1, d2).expect("grid groups are valid");
        let group = format!("(d1,d2)=({d1},{d2})");
        if let Err(e) = check_srw_law(&mut ctx, &pres) {
            ctx.fail("simple random walk law", group.clone(), e);
        }
        if let Err(e) = check_variants(&mut ctx, &pres) {
            ctx.fail("variant equivalence", group.clone(), e);
        }
        for p in memory_grid(pres.degree()) {
            if let Err(e) = check_sampler(&mut ctx, d1, d2, p) {
                ctx.fail("sampler chi-square", point(d1, d2, p), e);
            }
            if let Err(e) = check_exact(&mut ctx, &pres, p) {
                ctx.fail("exact law", point(d1, d2, p), e);
            }
            if let Err(e) = check_audit(&mut ctx, &pres, p) {
                ctx.fail("path identities", point(d1, d2, p), e);
            }
            if let Err(e) = check_mc_vs_oracle(&mut ctx, &pres, p) {
                ctx.fail("Monte Carlo vs exact law", point(d1, d2, p), e);
            }
            if let Err(e) = check_return_bound(&mut ctx, &pres, p) {
                ctx.fail("return probability bound", point(d1, d2, p), e);
            }
        }
    }
    ctx.results
}

pub fn render_table(results: &[CheckResult]) -> String {
    let header = ["check", "parameters", "observed", "expected", "status"];
    let rows: Vec<[String; 5]> = results
        .iter()
        .map(|r| {
            [
                r.check.to_string(),
                r.point.clone(),
                r.observed.clone(),
                r.expected.clone(),
                if r.pass { "pass" } else { "FAIL" }.to_string(),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: &[String]| {
        let mut s = cells
            .iter()
            .zip(widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ");
        s.truncate(s.trim_end().len());
        s.push('\n');
        s
    };
    let mut out = line(&header.map(String::from));
    for row in &rows {
        out.push_str(&line(row));
    }
    let failed = results.iter().filter(|r| !r.pass).count();
    out.push_str(&format!("{} checks, {} failed\n", results.len(), failed));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_contents() {
        assert_eq!(memory_grid(4), vec![0.0, 0.25, 0.3, 0.5, 0.625, 0.75, 0.9]);
        assert_eq!(memory_grid(3).len(), 7);
    }

    #[test]
    fn chain_is_a_distribution() {
        let law = distance_chain(4, 6);
        assert!((law.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(distance_chain(4, 2), vec![0.25, 0.0, 0.75]);
    }

    #[test]
    fn two_step_examples() {
        assert_eq!(two_step_return(0, 3, 0.5), 0.5);
        assert!((two_step_return(2, 0, 0.25) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn table_reports_failures() {
        let results = vec![
            CheckResult {
                check: "a",
                point: "x".into(),
                observed: "1".into(),
                expected: "1".into(),
                pass: true,
            },
            CheckResult {
                check: "bb",
                point: "y".into(),
                observed: "2".into(),
                expected: "1".into(),
                pass: false,
            },
        ];
        let t = render_table(&results);
        assert!(t.contains("FAIL"));
        assert!(t.ends_with("2 checks, 1 failed\n"));
    }
}
