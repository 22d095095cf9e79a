use clockstat::format::fmt12;
use clockstat::ldp::{self, GammaMinimum};
use clockstat::qjmc;
use clockstat::range::LinRange;
use clockstat::wtd::{self, PeakReport, WtdProfile};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{
    pick, require_positive, usage, CrosscheckArgs, CumulantsArgs, FileConfig, Format, ModelSource,
    SweepArgs, ThetaArgs, TrajectoriesArgs, WtdArgs, DEFAULT_GAMMA, DEFAULT_OMEGA,
};
use crate::output::Outputs;
use crate::CliError;

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn default_range(text: &str) -> LinRange {
    text.parse().expect("built-in range")
}

/// Empty cell for missing values.
fn cell(x: Option<f64>) -> String {
    x.map(fmt12).unwrap_or_default()
}

#[derive(Serialize)]
struct ThetaRow {
    s: f64,
    theta_spectral: f64,
    theta_closed_form: Option<f64>,
    abs_diff: Option<f64>,
}

pub fn theta(
    args: &ThetaArgs,
    file: &FileConfig,
    format: Format,
    out: &Outputs,
) -> Result<(), CliError> {
    let src = ModelSource::resolve(&args.model, file)?;
    let model = src.model()?;
    let s_range = args
        .s_range
        .or(file.s_range)
        .unwrap_or_else(|| default_range("-0.3:0.3:61"));
    let closed = src.ideal_tla();
    let rows = s_range
        .values()
        .into_iter()
        .map(|s| {
            let spectral = ldp::theta(&model, s).map_err(runtime)?;
            let closed_form = closed
                .map(|(o, g)| ldp::theta_closed_form_tla(o, g, s))
                .transpose()
                .map_err(runtime)?;
            Ok(ThetaRow {
                s,
                theta_spectral: spectral,
                theta_closed_form: closed_form,
                abs_diff: closed_form.map(|c| (c - spectral).abs()),
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    match format {
        Format::Csv => {
            let mut f = out.csv("theta.csv")?;
            f.line("s,theta_spectral,theta_closed_form,abs_diff")?;
            for r in &rows {
                f.line(&format!(
                    "{},{},{},{}",
                    fmt12(r.s),
                    fmt12(r.theta_spectral),
                    cell(r.theta_closed_form),
                    cell(r.abs_diff)
                ))?;
            }
            f.finish()?;
        }
        Format::Json => {
            out.json(
                "theta.json",
                &serde_json::json!({ "model": src.label(), "rows": rows }),
            )?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct CumulantsReport {
    model: String,
    rate: f64,
    rate_steady_state: f64,
    theta2: f64,
    fano: f64,
    t: f64,
    delta_tau: f64,
    n_mean: f64,
    n_std: f64,
}

pub fn cumulants(
    args: &CumulantsArgs,
    file: &FileConfig,
    format: Format,
    out: &Outputs,
) -> Result<(), CliError> {
    let src = ModelSource::resolve(&args.model, file)?;
    let model = src.model()?;
    let t = require_positive("t", pick(args.t, file.t, 1000.0))?;
    let c = ldp::counting_cumulants(&model).map_err(runtime)?;
    let n = c.n_statistics(t);
    let r = CumulantsReport {
        model: src.label(),
        rate: c.rate,
        rate_steady_state: c.rate_steady_state,
        theta2: c.variance_rate,
        fano: c.fano,
        t,
        delta_tau: c.delta_tau(t),
        n_mean: n.mean,
        n_std: n.std,
    };
    match format {
        Format::Csv => {
            let mut f = out.csv("cumulants.csv")?;
            f.line("model,rate,rate_steady_state,theta2,fano,t,delta_tau,n_mean,n_std")?;
            f.line(&format!(
                "{},{},{},{},{},{},{},{},{}",
                r.model.replace(',', ";"),
                fmt12(r.rate),
                fmt12(r.rate_steady_state),
                fmt12(r.theta2),
                fmt12(r.fano),
                fmt12(r.t),
                fmt12(r.delta_tau),
                fmt12(r.n_mean),
                fmt12(r.n_std)
            ))?;
            f.finish()?;
        }
        Format::Json => {
            out.json("cumulants.json", &r)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct MinimumRow {
    omega: f64,
    gamma_min: f64,
    gamma_grid: f64,
    ratio: f64,
    delta_tau_min: f64,
    on_boundary: bool,
}

impl From<&GammaMinimum> for MinimumRow {
    fn from(m: &GammaMinimum) -> Self {
        Self {
            omega: m.omega,
            gamma_min: m.gamma_refined,
            gamma_grid: m.gamma_grid,
            ratio: m.gamma_refined / m.omega,
            delta_tau_min: m.delta_tau,
            on_boundary: m.on_boundary,
        }
    }
}

pub fn sweep(args: &SweepArgs, file: &FileConfig, out: &Outputs) -> Result<(), CliError> {
    let omegas = args
        .omega_range
        .or(file.omega_range)
        .unwrap_or_else(|| default_range("0.5:6:23"));
    let gammas = args
        .gamma_range
        .or(file.gamma_range)
        .unwrap_or_else(|| default_range("0.5:20:79"));
    let eta = pick(args.eta, file.eta, 1.0);
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(CliError::Usage(format!(
            "--eta must lie in (0, 1], got {eta}"
        )));
    }
    let t = require_positive("t", pick(args.t, file.t, 1000.0))?;
    let gamma_vals = gammas.values();
    let points = ldp::sweep_delta_tau(&omegas.values(), &gamma_vals, eta, t);

    let mut f = out.csv("sweep.csv")?;
    f.line("omega,gamma,rate,theta2,delta_tau,error")?;
    let mut failures = 0;
    for p in &points {
        let err = match &p.error {
            Some(e) => {
                failures += 1;
                e.replace([',', '\n'], " ")
            }
            None => String::new(),
        };
        f.line(&format!(
            "{},{},{},{},{},{err}",
            fmt12(p.omega),
            fmt12(p.gamma),
            fmt12(p.rate),
            fmt12(p.theta2),
            fmt12(p.delta_tau)
        ))?;
    }
    f.finish()?;
    if failures > 0 {
        eprintln!("clockstat: warning: {failures} sweep point(s) failed; see the error column");
    }

    let minima: Vec<MinimumRow> = ldp::minimum_line(&points, gamma_vals.len())
        .iter()
        .map(Into::into)
        .collect();
    out.json(
        "sweep_minima.json",
        &serde_json::json!({ "t": t, "eta": eta, "minima": minima }),
    )?;
    Ok(())
}

pub fn trajectories(
    args: &TrajectoriesArgs,
    file: &FileConfig,
    out: &Outputs,
) -> Result<(), CliError> {
    let src = ModelSource::resolve(&args.model, file)?;
    let model = src.model()?;
    let n_traj = pick(args.n_traj, file.n_traj, 20);
    if n_traj < 2 {
        return Err(CliError::Usage(format!(
            "--n-traj must be >= 2, got {n_traj}"
        )));
    }
    let t_max = require_positive("t-max", pick(args.t_max, file.t_max, 1000.0))?;
    let seed = pick(args.seed, file.seed, 42);
    let grid_points = pick(args.grid_points, file.grid_points, 200);
    if grid_points < 2 {
        return Err(CliError::Usage(format!(
            "--grid-points must be >= 2, got {grid_points}"
        )));
    }
    let grid = LinRange::new(0.0, t_max, grid_points)
        .map_err(usage)?
        .values();

    let rate = ldp::counting_cumulants(&model).map_err(runtime)?.rate;
    let sim = qjmc::Simulator::new(&model)
        .map_err(runtime)?
        .with_model_id(src.label());
    let initial = qjmc::InitialState::default();
    let trajs = (0..n_traj as u64)
        .into_par_iter()
        .map(|i| sim.run(t_max, seed, i, &initial))
        .collect::<Result<Vec<_>, _>>()
        .map_err(runtime)?;

    let mut f = out.csv("clicks.csv")?;
    qjmc::write_clicks_csv(f.writer(), &trajs).map_err(runtime)?;
    f.finish()?;

    let mut f = out.csv("clock.csv")?;
    f.line("t,traj_index,tau")?;
    for tr in &trajs {
        let series = qjmc::clock_readout(tr, rate, &grid).map_err(runtime)?;
        for (t, tau) in series.grid.iter().zip(&series.tau) {
            f.line(&format!("{},{},{}", fmt12(*t), tr.index, fmt12(*tau)))?;
        }
    }
    f.finish()?;

    let stats = qjmc::ensemble_from_trajectories(&trajs, rate, &grid).map_err(runtime)?;
    let mut f = out.csv("ensemble.csv")?;
    f.line("t,mean_tau,std_tau,mean_n,std_n")?;
    for (i, t) in grid.iter().enumerate() {
        f.line(&format!(
            "{},{},{},{},{}",
            fmt12(*t),
            fmt12(stats.mean_tau[i]),
            fmt12(stats.std_tau[i]),
            fmt12(stats.mean_n[i]),
            fmt12(stats.std_n[i])
        ))?;
    }
    f.finish()?;
    Ok(())
}

pub fn wtd(args: &WtdArgs, file: &FileConfig, out: &Outputs) -> Result<(), CliError> {
    let omega = require_positive("omega", pick(args.omega, file.omega, DEFAULT_OMEGA))?;
    let gammas = args
        .gamma_range
        .or(file.gamma_range)
        .unwrap_or_else(|| default_range("1:16:61"));
    if gammas.min <= 0.0 {
        return Err(CliError::Usage("--gamma-range must be positive".into()));
    }
    let t_max = require_positive("t-max", pick(args.t_max, file.t_max, 6.0))?;
    let t_points = pick(args.t_points, file.t_points, 601);
    if t_points < 2 {
        return Err(CliError::Usage(format!(
            "--t-points must be >= 2, got {t_points}"
        )));
    }
    let threshold = require_positive("threshold", pick(args.threshold, file.threshold, 0.014))?;
    let times = LinRange::new(0.0, t_max, t_points).map_err(usage)?.values();
    let gamma_vals = gammas.values();

    let mut f = out.csv("wtd.csv")?;
    f.line("gamma,t,w")?;
    for &g in &gamma_vals {
        for &t in &times {
            let w = wtd::wtd_pdf(omega, g, t).map_err(runtime)?;
            f.line(&format!("{},{},{}", fmt12(g), fmt12(t), fmt12(w)))?;
        }
    }
    f.finish()?;

    let reports = gamma_vals
        .par_iter()
        .map(|&g| wtd::peak_census(omega, g, threshold))
        .collect::<Result<Vec<PeakReport>, _>>()
        .map_err(runtime)?;
    out.json(
        "wtd_peaks.json",
        &serde_json::json!({ "omega": omega, "threshold": threshold, "reports": reports }),
    )?;
    Ok(())
}

#[derive(Serialize)]
struct CrosscheckReport {
    omega: f64,
    gamma: f64,
    seed: u64,
    #[serde(flatten)]
    ks: wtd::KsReport,
    ks_passed: bool,
    rate_consistent: bool,
    wtd_mean: f64,
    wtd_std: f64,
}

pub fn crosscheck(
    args: &CrosscheckArgs,
    file: &FileConfig,
    format: Format,
    out: &Outputs,
) -> Result<(), CliError> {
    let omega = require_positive("omega", pick(args.omega, file.omega, DEFAULT_OMEGA))?;
    let gamma = require_positive("gamma", pick(args.gamma, file.gamma, DEFAULT_GAMMA))?;
    let n = pick(args.n_samples, file.n_samples, 100_000);
    if n < 2 {
        return Err(CliError::Usage(format!(
            "--n-samples must be >= 2, got {n}"
        )));
    }
    let seed = pick(args.seed, file.seed, 42);
    let model =
        ModelSource::Tla(clockstat::lindblad::TwoLevelParams::ideal(omega, gamma).map_err(usage)?)
            .model()?;
    let profile = WtdProfile::build(omega, gamma).map_err(runtime)?;
    let ks = wtd::renewal_report(&model, &profile, n, seed).map_err(runtime)?;
    let r = CrosscheckReport {
        omega,
        gamma,
        seed,
        ks_passed: ks.ks <= ks.critical,
        rate_consistent: ks.rate_consistent(),
        ks,
        wtd_mean: profile.mean,
        wtd_std: profile.std_dev(),
    };
    match format {
        Format::Csv => {
            let mut f = out.csv("crosscheck.csv")?;
            f.line("omega,gamma,seed,n,ks,critical,ks_passed,rate_empirical,rate_expected,rate_se,rate_consistent,wtd_mean,wtd_std")?;
            f.line(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                fmt12(omega),
                fmt12(gamma),
                seed,
                r.ks.n,
                fmt12(r.ks.ks),
                fmt12(r.ks.critical),
                r.ks_passed,
                fmt12(r.ks.rate_empirical),
                fmt12(r.ks.rate_expected),
                fmt12(r.ks.rate_se),
                r.rate_consistent,
                fmt12(r.wtd_mean),
                fmt12(r.wtd_std)
            ))?;
            f.finish()?;
        }
        Format::Json => {
            out.json("crosscheck.json", &r)?;
        }
    }
    if !r.ks_passed {
        return Err(CliError::Runtime(format!(
            "KS distance {} exceeds critical value {} (n = {})",
            r.ks.ks, r.ks.critical, r.ks.n
        )));
    }
    Ok(())
}
