use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use erw_core::analysis::{estimate_slope, ks_critical_value, ks_statistic, normal_density, SlopeFit, MIN_FIT_POINTS, MIN_KS_SAMPLES};
use erw_core::{RateSchedule, Regime};
use serde::Serialize;

use crate::args::AnalyzeArgs;
use crate::report::{
    read_csv, read_summary, write_json, CheckpointCsvRow, FluctuationCsvRow, RunSummary, CHECKPOINTS_FILE,
    FLUCTUATIONS_FILE,
};
use crate::svg;

pub const SUBCRITICAL_SLOPE_TOLERANCE: f64 = 0.05;
pub const SUPERCRITICAL_SLOPE_TOLERANCE: f64 = 0.07;
pub const URN_SLOPE_TOLERANCE: f64 = 0.07;
pub const KS_FLOOR: f64 = 0.02;
pub const KS_ALPHA: f64 = 0.01;

#[derive(Debug, Clone, Serialize)]
pub struct SlopeCheck {
    pub quantity: String,
    pub fit: SlopeFit,
    /// Least-squares slope of `log r_n^{-m}` over the same checkpoints.
    pub expected_slope: f64,
    pub tolerance: f64,
    pub asserted: bool,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct KsCheck {
    pub samples: usize,
    pub sigma2: f64,
    pub distance: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScatterSummary {
    pub n: u64,
    pub r_n: f64,
    pub mean: f64,
    pub var: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub input: PathBuf,
    pub d1: usize,
    pub d2: usize,
    pub d: usize,
    pub p_effective: f64,
    pub regime: Regime,
    pub r_exponent: f64,
    pub horizon: u64,
    pub replicas: u64,
    pub burn_in: u64,
    pub moment: f64,
    pub mean_speed: f64,
    pub escape_rate: f64,
    pub moment_decay: SlopeCheck,
    pub urn_deviation_decay: SlopeCheck,
    pub ks: Option<KsCheck>,
    pub scatter: Option<ScatterSummary>,
    /// All asserted checks passed.
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub d: usize,
    pub p: f64,
    pub n: u64,
    pub mean_speed: f64,
    pub escape_rate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisOutput {
    pub reports: Vec<AnalysisReport>,
    pub sweep: Vec<SweepPoint>,
    pub pass: bool,
}

/// Absolute moment `m` at each checkpoint, from the CSV when it carries the
/// order and from the summary otherwise.
fn moment_series(rows: &[CheckpointCsvRow], summary: &RunSummary, m: f64) -> anyhow::Result<Vec<(u64, f64)>> {
    let column = |r: &CheckpointCsvRow| match m {
        x if x == 1.0 => Some(r.abs_moment_m1),
        x if x == 1.5 => Some(r.abs_moment_m1_5),
        x if x == 2.0 => Some(r.abs_moment_m2),
        _ => None,
    };
    if column(&rows[0]).is_some() {
        return Ok(rows.iter().map(|r| (r.n, column(r).unwrap())).collect());
    }
    summary
        .results
        .iter()
        .map(|r| {
            r.speed_moment(m)
                .map(|v| (r.n, v))
                .with_context(|| format!("moment order {m} was not recorded by this run"))
        })
        .collect()
}

fn fit_against_rate(
    quantity: &str,
    series: &[(u64, f64)],
    burn_in: u64,
    m: f64,
    schedule: &RateSchedule,
) -> anyhow::Result<(SlopeFit, f64)> {
    let usable: Vec<(f64, f64)> = series
        .iter()
        .filter(|&&(n, v)| n >= burn_in && v > 0.0 && v.is_finite())
        .map(|&(n, v)| (n as f64, v))
        .collect();
    if usable.len() < MIN_FIT_POINTS {
        bail!(
            "{quantity}: only {} usable checkpoints at n >= {burn_in}; at least {MIN_FIT_POINTS} are needed to fit",
            usable.len()
        );
    }
    let fit = estimate_slope(&usable)?;
    let reference: Vec<(f64, f64)> = usable
        .iter()
        .map(|&(n, _)| Ok((n, schedule.rate(n)?.powf(-m))))
        .collect::<erw_core::Result<_>>()?;
    let expected = estimate_slope(&reference)?.slope;
    Ok((fit, expected))
}

pub fn analyze_run(dir: &Path, burn_in: u64, m: f64) -> anyhow::Result<(AnalysisReport, Vec<(f64, f64)>)> {
    let summary = read_summary(dir)?;
    let rows: Vec<CheckpointCsvRow> = read_csv(&dir.join(CHECKPOINTS_FILE))?;
    let finals: Vec<FluctuationCsvRow> = read_csv(&dir.join(FLUCTUATIONS_FILE))?;
    if rows.is_empty() {
        bail!("{} has no rows", dir.join(CHECKPOINTS_FILE).display());
    }
    let derived = &summary.derived;
    let schedule = RateSchedule::new(derived.p_effective, derived.d)?;
    if schedule.degenerate {
        bail!("p = 1 walks never forget their first step; there is no rate to fit");
    }
    let supercritical = schedule.regime == Regime::Supercritical;

    let series = moment_series(&rows, &summary, m)?;
    let (fit, expected) = fit_against_rate("moment decay", &series, burn_in, m, &schedule)?;
    let tolerance = if supercritical {
        SUPERCRITICAL_SLOPE_TOLERANCE
    } else {
        SUBCRITICAL_SLOPE_TOLERANCE
    };
    let (asserted, note) = if (1.0..2.0).contains(&m) {
        (true, None)
    } else if m == 2.0 && supercritical {
        (true, None)
    } else if m == 2.0 {
        (false, Some("upper bound for m = 2 carries an extra log n factor here".to_string()))
    } else {
        (false, Some("no rate is claimed for this moment order".to_string()))
    };
    let moment_decay = SlopeCheck {
        quantity: format!("E|Delta_n/n - (d-2)/d|^{m}"),
        pass: (fit.slope - expected).abs() <= tolerance,
        fit,
        expected_slope: expected,
        tolerance,
        asserted,
        note,
    };

    let urn_series: Vec<(u64, f64)> = summary.results.iter().map(|r| (r.n, r.urn_deviation)).collect();
    let (fit, expected) = fit_against_rate("urn deviation", &urn_series, burn_in, 1.0, &schedule)?;
    let urn_deviation_decay = SlopeCheck {
        quantity: "(1/d) sum_a E|N_n(a)/n - 1/d|".to_string(),
        pass: (fit.slope - expected).abs() <= URN_SLOPE_TOLERANCE,
        fit,
        expected_slope: expected,
        tolerance: URN_SLOPE_TOLERANCE,
        asserted: false,
        note: Some("diagnostic: the urn bounds are upper bounds".to_string()),
    };

    let fluct: Vec<f64> = finals.iter().map(|f| f.fluct_stat).collect();
    let ks = if fluct.len() >= MIN_KS_SAMPLES {
        let distance = ks_statistic(&fluct, derived.limit_variance)?;
        let threshold = KS_FLOOR.max(ks_critical_value(fluct.len(), KS_ALPHA));
        Some(KsCheck {
            samples: fluct.len(),
            sigma2: derived.limit_variance,
            distance,
            threshold,
            pass: distance <= threshold,
        })
    } else {
        None
    };

    let horizon = summary.config.steps;
    let (scatter_points, scatter) = match schedule.rate(horizon as f64) {
        Ok(r) => {
            let pts: Vec<(f64, f64)> = finals.iter().map(|f| (f.replica_index as f64, r * f.xi)).collect();
            let k = pts.len().max(1) as f64;
            let mean = pts.iter().map(|p| p.1).sum::<f64>() / k;
            let var = pts.iter().map(|p| (p.1 - mean).powi(2)).sum::<f64>() / k;
            let summary = ScatterSummary {
                n: horizon,
                r_n: r,
                mean,
                var,
                min: pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min),
                max: pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max),
            };
            (pts, Some(summary))
        }
        Err(_) => (Vec::new(), None),
    };

    let last = summary.results.last().context("summary has no checkpoint results")?;
    let pass = (!moment_decay.asserted || moment_decay.pass) && ks.as_ref().is_none_or(|k| k.pass);
    Ok((
        AnalysisReport {
            input: dir.to_path_buf(),
            d1: summary.config.d1,
            d2: summary.config.d2,
            d: derived.d,
            p_effective: derived.p_effective,
            regime: derived.regime,
            r_exponent: derived.r_exponent,
            horizon,
            replicas: summary.config.replicas,
            burn_in,
            moment: m,
            mean_speed: last.speed.mean,
            escape_rate: derived.escape_rate,
            moment_decay,
            urn_deviation_decay,
            ks,
            scatter,
            pass,
        },
        scatter_points,
    ))
}

pub fn run(args: &AnalyzeArgs) -> anyhow::Result<AnalysisOutput> {
    let mut reports = Vec::new();
    let mut scatters = Vec::new();
    for dir in &args.input {
        let (report, points) =
            analyze_run(dir, args.burn_in, args.moment).with_context(|| format!("analyzing {}", dir.display()))?;
        reports.push(report);
        scatters.push(points);
    }
    let mut sweep: Vec<SweepPoint> = reports
        .iter()
        .map(|r| SweepPoint {
            d: r.d,
            p: r.p_effective,
            n: r.horizon,
            mean_speed: r.mean_speed,
            escape_rate: r.escape_rate,
        })
        .collect();
    sweep.sort_by(|a, b| a.d.cmp(&b.d).then(a.p.total_cmp(&b.p)));
    let pass = reports.iter().all(|r| r.pass);
    let output = AnalysisOutput { reports, sweep, pass };

    if let Some(out) = &args.out {
        std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
        write_json(&out.join("analysis.json"), &output)?;
        for (i, (report, points)) in output.reports.iter().zip(&scatters).enumerate() {
            if points.is_empty() {
                continue;
            }
            let mut w = csv::Writer::from_path(out.join(format!("scatter_{i}.csv")))?;
            w.write_record(["replica_index", "r_n_xi"])?;
            for (x, y) in points {
                w.write_record([(*x as u64).to_string(), y.to_string()])?;
            }
            w.flush()?;
            if args.svg {
                let title = format!("r_n Xi_n, d = {}, p = {}, n = {}", report.d, report.p_effective, report.horizon);
                std::fs::write(
                    out.join(format!("scatter_{i}.svg")),
                    svg::scatter(points, Some(0.0), &title, "replica", "r_n Xi_n"),
                )?;
            }
        }
        if args.svg {
            for (i, report) in output.reports.iter().enumerate() {
                let summary = read_summary(&report.input)?;
                let sigma2 = summary.derived.limit_variance;
                let density = move |x: f64| normal_density(x, sigma2);
                let title = format!("fluctuation statistic, d = {}, p = {}", report.d, report.p_effective);
                std::fs::write(
                    out.join(format!("fluct_hist_{i}.svg")),
                    svg::histogram(&summary.histograms.fluct, Some(&density), &title, "value"),
                )?;
            }
            if output.sweep.len() > 1 {
                let pts: Vec<(f64, f64)> = output.sweep.iter().map(|s| (s.p, s.mean_speed)).collect();
                std::fs::write(
                    out.join("speed_vs_p.svg"),
                    svg::line(&pts, Some(output.sweep[0].escape_rate), "mean speed against p", "p", "mean Delta_n/n"),
                )?;
            }
        }
        let mut w = csv::Writer::from_path(out.join("speed_vs_p.csv"))?;
        for s in &output.sweep {
            w.serialize(s)?;
        }
        w.flush()?;
    }
    Ok(output)
}

/// One line per input for the terminal.
pub fn render(output: &AnalysisOutput) -> String {
    let mut s = String::new();
    for r in &output.reports {
        let md = &r.moment_decay;
        s.push_str(&format!(
            "{}  d={} p={} {}  slope {:.4} (expected {:.4} ± {}){}  ",
            r.input.display(),
            r.d,
            r.p_effective,
            r.regime.as_str(),
            md.fit.slope,
            md.expected_slope,
            md.tolerance,
            if md.asserted {
                if md.pass { " ok" } else { " FAIL" }
            } else {
                " (not asserted)"
            },
        ));
        s.push_str(&format!(
            "urn slope {:.4} (expected {:.4})  ",
            r.urn_deviation_decay.fit.slope, r.urn_deviation_decay.expected_slope
        ));
        match &r.ks {
            Some(k) => s.push_str(&format!(
                "KS {:.4} (threshold {:.4}){}\n",
                k.distance,
                k.threshold,
                if k.pass { " ok" } else { " FAIL" }
            )),
            None => s.push_str("KS skipped (too few samples)\n"),
        }
    }
    s
}
