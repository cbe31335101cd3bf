use anyhow::{bail, Context};
use erw_core::analysis::normal_density;
use erw_core::observables::limit_variance;
use erw_core::{run_ensemble, EnsembleSummary, RateSchedule, RunConfig};

use crate::args::{parse_checkpoints, SimulateArgs};
use crate::report::write_run;
use crate::svg;

pub fn config_from_args(args: &SimulateArgs) -> anyhow::Result<RunConfig> {
    let memory = args.model.memory()?;
    let d = 2 * args.model.d1 + args.model.d2;
    if d < 3 {
        bail!("simulate needs degree d = 2*d1 + d2 >= 3 (got {d})");
    }
    let mut cfg = RunConfig::new(args.model.d1, args.model.d2, memory, args.steps, args.replicas, args.seed)
        .with_checkpoints(parse_checkpoints(args.checkpoints.as_deref(), args.steps)?);
    cfg.moments.extend(args.moments.iter().copied());
    cfg.moments = cfg.moment_orders();
    cfg.workers = args.workers;
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(args: &SimulateArgs) -> anyhow::Result<EnsembleSummary> {
    let cfg = config_from_args(args)?;
    let summary = run_ensemble(&cfg)?;
    let schedule = RateSchedule::new(cfg.effective_memory()?, cfg.degree())?;
    write_run(&args.out_dir, &summary, &schedule)?;
    if args.svg {
        write_plots(&args.out_dir, &summary, &schedule)?;
    }
    Ok(summary)
}

fn write_plots(dir: &std::path::Path, summary: &EnsembleSummary, schedule: &RateSchedule) -> anyhow::Result<()> {
    let d = schedule.d;
    let sigma2 = limit_variance(d);
    let density = move |x: f64| normal_density(x, sigma2);
    let last = summary.last();
    let label = format!("{}, p = {}, n = {}", group_label(summary), schedule.p, last.n);
    let write = |name: &str, body: String| {
        let path = dir.join(name);
        std::fs::write(&path, body).with_context(|| format!("cannot write {}", path.display()))
    };
    if let Some(h) = last.fluct.histogram() {
        write(
            "fluct_hist.svg",
            svg::histogram(h, Some(&density), &format!("fluctuation statistic, {label}"), "value"),
        )?;
    }
    if let Some(h) = last.scaled_deviation.as_ref().and_then(|a| a.histogram()) {
        write(
            "scaled_hist.svg",
            svg::histogram(h, Some(&density), &format!("r_n (Delta_n/n - (d-2)/d), {label}"), "value"),
        )?;
    }
    if let Ok(r) = schedule.rate(last.n as f64) {
        let points: Vec<(f64, f64)> = summary
            .finals
            .iter()
            .map(|f| (f.replica_index as f64, r * f.xi))
            .collect();
        write(
            "xi_scatter.svg",
            svg::scatter(&points, Some(0.0), &format!("r_n Xi_n, {label}"), "replica", "r_n Xi_n"),
        )?;
    }
    Ok(())
}

fn group_label(summary: &EnsembleSummary) -> String {
    summary
        .config
        .presentation()
        .map(|p| p.to_string())
        .unwrap_or_default()
}
