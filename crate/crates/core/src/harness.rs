//! End-to-end experiment runs: simulate, score, and write CSV and SVG files.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::thread;

use crate::baselines::build_baseline_system;
use crate::config::{ExperimentConfig, MethodConfig};
use crate::convergence::{
    crossing_interval, map_slope_at_origin, next_crossing_error, oracle_crossing, ErrorMapParams,
};
use crate::differentiators::{SdCascade, Switch};
use crate::error::{Error, Result};
use crate::integrators::{simulate, ColumnSpec};
use crate::metrics::{
    report_all, write_reports, MetricReport, MetricsConfig, DEFAULT_BAND_FRACTION,
};
use crate::plot::{LineChart, Series};
use crate::signals::{Input, Signal};
use crate::trajectory::{fmt_f64, Trajectory};

/// Relative tolerance between closed-form and oracle crossings.
pub const MAP_ORACLE_TOLERANCE: f64 = 1e-4;

fn switch_label(s: &Switch) -> String {
    match s {
        Switch::Sgn => "sgn".into(),
        Switch::Sat { epsilon } => format!("sat({epsilon:e})"),
    }
}

impl MethodConfig {
    /// Short human-readable description used in plot titles.
    pub fn label(&self) -> String {
        match self {
            MethodConfig::SdCascade {
                k,
                l,
                switch,
                realization,
                ..
            } => format!(
                "SD k={k} L={l} {} [{}]",
                switch_label(switch),
                realization.label()
            ),
            MethodConfig::Hgo { epsilon, .. } => format!("HGO eps={epsilon}"),
            MethodConfig::Hosm { l, final_switch } => {
                format!("HOSM L={l:e} final {}", switch_label(final_switch))
            }
        }
    }
}

fn truth_columns(signal: &Signal, orders: usize) -> Vec<ColumnSpec> {
    (1..=orders)
        .map(|i| ColumnSpec::truth(format!("true.d{i}"), signal.clone(), i as u32))
        .collect()
}

/// Runs the simulation described by `cfg` and returns the recorded truth
/// (`true.d1 ...`) and estimate columns.
pub fn simulate_experiment(cfg: &ExperimentConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let cfg = cfg.resolved();
    let plan = cfg.plan.sim_plan();
    let signal = Signal::from(cfg.signal.clone());
    let input = Input::clean(signal.clone()).with_noise(cfg.noise, plan.t_start, plan.dt);
    let mut columns = truth_columns(&signal, cfg.method.orders());
    match &cfg.method {
        MethodConfig::SdCascade {
            stages,
            realization,
            ..
        } => {
            let p = cfg.method.sd_params().expect("sd method");
            let sys = SdCascade::new(input, vec![p; *stages])?.with_realization(*realization)?;
            columns.extend(sys.estimate_columns());
            simulate(
                &sys,
                &sys.rest_state(plan.t_start),
                &plan,
                cfg.plan.integrator,
                &columns,
            )
        }
        _ => {
            let sys =
                build_baseline_system(input, cfg.method.baseline().expect("baseline method"))?;
            columns.extend(sys.estimate_columns());
            simulate(
                &sys,
                &sys.zero_state(),
                &plan,
                cfg.plan.integrator,
                &columns,
            )
        }
    }
}

pub fn evaluate(cfg: &ExperimentConfig, traj: &Trajectory) -> Result<Vec<MetricReport>> {
    report_all(traj, &cfg.metrics)
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub config: ExperimentConfig,
    pub trajectory: Trajectory,
    pub reports: Vec<MetricReport>,
    pub files: Vec<PathBuf>,
}

impl RunOutcome {
    pub fn report(&self, order: u32) -> Option<&MetricReport> {
        self.reports.iter().find(|r| r.order == order)
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(contents)?;
    Ok(())
}

fn sup_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn clip_for(truth: &[f64]) -> Option<(f64, f64)> {
    let s = sup_abs(truth);
    (s > 0.0).then_some((-3.0 * s, 3.0 * s))
}

/// Writes `<name>.csv`, `<name>.metrics.csv` and one `<name>.d<i>.svg` per
/// derivative order into `out_dir`.
pub fn write_outputs(
    cfg: &ExperimentConfig,
    traj: &Trajectory,
    reports: &[MetricReport],
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let header = cfg.header();
    let mut files = Vec::new();

    let csv_path = out_dir.join(format!("{}.csv", cfg.name));
    traj.save_csv(&csv_path, &header)?;
    files.push(csv_path);

    let metrics_path = out_dir.join(format!("{}.metrics.csv", cfg.name));
    let mut buf = Vec::new();
    write_reports(reports, &mut buf, &header)?;
    write_file(&metrics_path, &buf)?;
    files.push(metrics_path);

    let label = cfg.resolved().method.label();
    for r in reports {
        let truth = traj.column(&r.truth)?;
        let chart = LineChart {
            y_clip: clip_for(truth),
            ..LineChart::new(
                format!("{}: order {} ({label})", cfg.name, r.order),
                "t [s]",
                format!("d^{} a / dt^{}", r.order, r.order),
            )
        }
        .with_series(Series::new(&r.truth, traj.times(), truth))
        .with_series(Series::new(&r.estimate, traj.times(), traj.column(&r.estimate)?).dashed());
        let path = out_dir.join(format!("{}.d{}.svg", cfg.name, r.order));
        write_file(&path, chart.to_svg().as_bytes())?;
        files.push(path);
    }
    Ok(files)
}

pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome> {
    let trajectory = simulate_experiment(cfg)?;
    let reports = evaluate(cfg, &trajectory)?;
    let files = write_outputs(cfg, &trajectory, &reports, out_dir)?;
    Ok(RunOutcome {
        config: cfg.clone(),
        trajectory,
        reports,
        files,
    })
}

/// One point of the return-map table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapRow {
    pub rho: f64,
    pub k: f64,
    pub e_in: f64,
    pub t_delta: f64,
    pub e_out: f64,
    pub slope_at_origin: f64,
    pub oracle: Option<OracleComparison>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleComparison {
    pub t_delta: f64,
    pub e_out: f64,
    /// Larger of the relative deviations in `t_delta` and `e_out`.
    pub rel_err: f64,
}

fn rel_dev(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Oracle step: a small fraction of the interval scale `|e| / L_delta + 1/k`.
pub fn oracle_step(e: f64, p: &ErrorMapParams) -> f64 {
    (e.abs() / p.l_delta + 1.0 / p.k) / 4000.0
}

/// Closed-form crossings over the grid product, optionally checked against
/// the brute-force oracle.
pub fn map_analysis(
    rho_grid: &[f64],
    k_grid: &[f64],
    e_grid: &[f64],
    with_oracle: bool,
) -> Result<Vec<MapRow>> {
    if rho_grid.is_empty() || k_grid.is_empty() || e_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut rows = Vec::with_capacity(rho_grid.len() * k_grid.len() * e_grid.len());
    for &rho in rho_grid {
        for &k in k_grid {
            let p = ErrorMapParams::from_rho(k, rho)?;
            let slope = map_slope_at_origin(&p);
            for &e in e_grid {
                if !e.is_finite() {
                    return Err(Error::param("e_grid", "values must be finite"));
                }
                let t_delta = crossing_interval(e, &p);
                let e_out = next_crossing_error(e, &p);
                let oracle = if with_oracle {
                    let rec = oracle_crossing(0.0, e, &p, oracle_step(e, &p))?;
                    Some(OracleComparison {
                        t_delta: rec.t_delta,
                        e_out: rec.e_sigma_out,
                        rel_err: rel_dev(t_delta, rec.t_delta).max(rel_dev(e_out, rec.e_sigma_out)),
                    })
                } else {
                    None
                };
                rows.push(MapRow {
                    rho,
                    k,
                    e_in: e,
                    t_delta,
                    e_out,
                    slope_at_origin: slope,
                    oracle,
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_map_csv<W: Write>(rows: &[MapRow], mut out: W, comment: &str) -> Result<()> {
    for line in comment.lines() {
        writeln!(out, "# {line}")?;
    }
    let with_oracle = rows.first().is_some_and(|r| r.oracle.is_some());
    write!(out, "rho,k,e_in,t_delta,e_out,slope_at_origin")?;
    if with_oracle {
        write!(out, ",t_delta_oracle,e_out_oracle,rel_err,tol")?;
    }
    writeln!(out)?;
    for r in rows {
        write!(
            out,
            "{},{},{},{},{},{}",
            fmt_f64(r.rho),
            fmt_f64(r.k),
            fmt_f64(r.e_in),
            fmt_f64(r.t_delta),
            fmt_f64(r.e_out),
            fmt_f64(r.slope_at_origin)
        )?;
        if let Some(o) = r.oracle {
            write!(
                out,
                ",{},{},{},{}",
                fmt_f64(o.t_delta),
                fmt_f64(o.e_out),
                fmt_f64(o.rel_err),
                fmt_f64(MAP_ORACLE_TOLERANCE)
            )?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

fn grid_text(name: &str, values: &[f64]) -> String {
    let items: Vec<String> = values.iter().map(|v| format!("{v:e}")).collect();
    format!("{name} = [{}]", items.join(", "))
}

/// [`map_analysis`] written to `out_path`, with the grids in the header.
pub fn run_map_analysis(
    rho_grid: &[f64],
    k_grid: &[f64],
    e_grid: &[f64],
    with_oracle: bool,
    out_path: &Path,
) -> Result<Vec<MapRow>> {
    let rows = map_analysis(rho_grid, k_grid, e_grid, with_oracle)?;
    if let Some(parent) = out_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let comment = [
        grid_text("rho", rho_grid),
        grid_text("k", k_grid),
        grid_text("e", e_grid),
        format!("oracle = {with_oracle}"),
    ]
    .join("\n");
    let mut buf = Vec::new();
    write_map_csv(&rows, &mut buf, &comment)?;
    write_file(out_path, &buf)?;
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct CompareOutcome {
    pub members: Vec<RunOutcome>,
    pub table: PathBuf,
    pub plots: Vec<PathBuf>,
}

pub const COMPARE_HEADER: &str = "preset,method,order,settling_time,peak_abs,peak_time,\
chattering_index,chatter_from,chatter_to,rms_error,steady_from,steady_to,sample_period";

/// Simulates every member concurrently, then writes each member's outputs,
/// `compare.csv` and per-order overlays `compare.d<i>.svg`.
pub fn compare(configs: &[ExperimentConfig], out_dir: &Path) -> Result<CompareOutcome> {
    if configs.len() < 2 {
        return Err(Error::param("presets", "compare needs at least two"));
    }
    for c in &configs[1..] {
        if c.signal != configs[0].signal {
            return Err(Error::SignalMismatch(
                configs[0].name.clone(),
                c.name.clone(),
            ));
        }
    }
    for c in configs {
        c.validate()?;
    }

    let simulated: Vec<Result<(Trajectory, Vec<MetricReport>)>> = thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|cfg| {
                s.spawn(move || {
                    let traj = simulate_experiment(cfg)?;
                    let reports = evaluate(cfg, &traj)?;
                    Ok((traj, reports))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect()
    });

    fs::create_dir_all(out_dir)?;
    let mut members = Vec::with_capacity(configs.len());
    let mut written = HashSet::new();
    for (cfg, sim) in configs.iter().zip(simulated) {
        let (trajectory, reports) = sim?;
        let files = if written.insert(cfg.name.clone()) {
            write_outputs(cfg, &trajectory, &reports, out_dir)?
        } else {
            Vec::new()
        };
        members.push(RunOutcome {
            config: cfg.clone(),
            trajectory,
            reports,
            files,
        });
    }

    let mut comment = String::new();
    for m in &members {
        comment.push_str(&format!("[preset {}]\n", m.config.name));
        comment.push_str(&m.config.header());
    }
    let mut buf = Vec::new();
    for line in comment.lines() {
        writeln!(buf, "# {line}")?;
    }
    writeln!(buf, "{COMPARE_HEADER}")?;
    for m in &members {
        for r in &m.reports {
            writeln!(
                buf,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                m.config.name,
                r.method(),
                r.order,
                r.settling_time.map_or_else(|| "none".to_string(), fmt_f64),
                fmt_f64(r.peak_abs),
                fmt_f64(r.peak_time),
                fmt_f64(r.chattering_index),
                fmt_f64(r.chatter_window.0),
                fmt_f64(r.chatter_window.1),
                fmt_f64(r.rms_error),
                fmt_f64(r.steady_window.0),
                fmt_f64(r.steady_window.1),
                fmt_f64(r.sample_period),
            )?;
        }
    }
    let table = out_dir.join("compare.csv");
    write_file(&table, &buf)?;

    let max_order = members
        .iter()
        .map(|m| m.config.method.orders())
        .max()
        .unwrap_or(0);
    let mut plots = Vec::new();
    for order in 1..=max_order as u32 {
        let truth_name = format!("true.d{order}");
        let Some(base) = members
            .iter()
            .find(|m| m.trajectory.has_column(&truth_name))
        else {
            continue;
        };
        let truth = base.trajectory.column(&truth_name)?;
        let mut chart = LineChart {
            y_clip: clip_for(truth),
            ..LineChart::new(
                format!("order {order}: estimates vs truth (clipped to 3 sup|truth|)"),
                "t [s]",
                format!("d^{order} a / dt^{order}"),
            )
        }
        .with_series(Series::new(&truth_name, base.trajectory.times(), truth));
        for m in &members {
            if let Some(r) = m.report(order) {
                let values = m.trajectory.column(&r.estimate)?;
                chart = chart.with_series(
                    Series::new(
                        format!("{} {}", m.config.name, r.estimate),
                        m.trajectory.times(),
                        values,
                    )
                    .dashed(),
                );
            }
        }
        let path = out_dir.join(format!("compare.d{order}.svg"));
        write_file(&path, chart.to_svg().as_bytes())?;
        plots.push(path);
    }

    Ok(CompareOutcome {
        members,
        table,
        plots,
    })
}

#[derive(Debug, Clone)]
pub struct ReportOutcome {
    /// Config recovered from the file header, if present.
    pub config: Option<ExperimentConfig>,
    pub metrics: MetricsConfig,
    pub reports: Vec<MetricReport>,
}

/// Recomputes metrics for a trajectory CSV. Windows and band come from the
/// embedded config; without one, the last three quarters of the span and
/// the default band are used.
pub fn report(path: &Path) -> Result<ReportOutcome> {
    let (traj, comment) = Trajectory::load_csv(path)?;
    let config = if comment.trim().is_empty() {
        None
    } else {
        Some(ExperimentConfig::from_header(&comment)?)
    };
    let metrics = match &config {
        Some(c) => c.metrics,
        None => {
            let times = traj.times();
            let (&t0, &t1) = times
                .first()
                .zip(times.last())
                .ok_or_else(|| Error::MalformedTrajectory("no samples".into()))?;
            let w = (t0 + 0.25 * (t1 - t0), t1);
            MetricsConfig {
                band_fraction: DEFAULT_BAND_FRACTION,
                steady_window: w,
                chatter_window: w,
            }
        }
    };
    let reports = report_all(&traj, &metrics)?;
    Ok(ReportOutcome {
        config,
        metrics,
        reports,
    })
}
