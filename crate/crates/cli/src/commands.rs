//! One function per subcommand: load config, run the library, write
//! artifacts. All floats are written with Rust's shortest round-trip
//! formatting so files re-read to the exact values that were computed.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use bdm_core::calibrate::{
    calibrate as run_calibration, error_metrics, neg_log_likelihood, CalibrationConfig, Dataset,
    DatasetMeta,
};
use bdm_core::metastability::{find_equilibria, first_passage_analysis, fixation_curve};
use bdm_core::model::{order_parameter, ModelParams, RateFamily, RateTable};
use bdm_core::simulate::{simulate_ensemble, simulate_piecewise_ensemble, Ensemble};
use bdm_core::spectral::{
    build_master_operator, compute_spectrum, evolve_piecewise, steady_state, DistributionVector,
    Propagator, Spectrum,
};
use serde::Serialize;

use crate::config::{
    self, CalibrateConfig, ChainConfig, InitialConfig, SimulateConfig, SolveConfig,
};
use crate::plot::{render, Series, Style};
use crate::{CliError, RunArgs};

/// Rate table plus the spectral solver stack built from one config.
struct Solver {
    params: ModelParams,
    rates: RateTable,
    steady: DistributionVector,
    spectrum: Spectrum,
    propagator: Propagator,
}

fn build_solver(params: ModelParams, family: &RateFamily) -> Result<Solver, CliError> {
    let rates = RateTable::build(&params, family)?;
    let op = build_master_operator(&rates);
    let steady = steady_state(&rates)?;
    let spectrum = compute_spectrum(&op, &steady)?;
    let propagator = Propagator::new(&rates, &spectrum)?;
    Ok(Solver {
        params,
        rates,
        steady,
        spectrum,
        propagator,
    })
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
    fs::write(dir.join(name), contents)
        .map_err(|e| CliError::Config(format!("cannot write {name}: {e}")))?;
    Ok(())
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_out(dir, name, &text)
}

/// The initial distribution a solve starts from.
fn initial_distribution(
    init: &InitialConfig,
    n_max: usize,
) -> Result<DistributionVector, CliError> {
    Ok(match *init {
        InitialConfig::Delta { n0 } => DistributionVector::delta(n_max, n0, 0.0)?,
        InitialConfig::Binomial { p } => DistributionVector::binomial(n_max, p, 0.0)?,
    })
}

fn distribution_series(label: String, dist: &DistributionVector, n_agents: usize) -> Series {
    Series {
        label,
        points: dist
            .probs()
            .iter()
            .enumerate()
            .map(|(n, &p)| (order_parameter(n, n_agents), p))
            .collect(),
        style: Style::Line,
    }
}

fn steady_csv(steady: &DistributionVector, n_agents: usize) -> String {
    let mut csv = String::from("n,m,prob\n");
    for (n, &p) in steady.probs().iter().enumerate() {
        let _ = writeln!(csv, "{n},{},{p}", order_parameter(n, n_agents));
    }
    csv
}

pub fn solve(args: &RunArgs) -> Result<(), CliError> {
    let cfg: SolveConfig = config::load(&args.config)?;
    let params = cfg.model.build()?;
    let n = params.n_agents;
    let solver = build_solver(params, &cfg.rates)?;
    let q0 = initial_distribution(&cfg.initial, solver.rates.n_max())?;
    let schedule = cfg.schedule.as_ref().map(|s| s.build()).transpose()?;

    let mut csv = String::from("t,n,m,prob\n");
    let mut series = Vec::new();
    for &t in &cfg.times {
        let dist = match &schedule {
            Some(s) => evolve_piecewise(s, &solver.params, &cfg.rates, &q0, t)?,
            None => solver.propagator.evolve(&q0, t)?,
        };
        for (state, &p) in dist.probs().iter().enumerate() {
            let _ = writeln!(csv, "{t},{state},{},{p}", order_parameter(state, n));
        }
        series.push(distribution_series(format!("t = {t}"), &dist, n));
    }
    write_out(&args.out, "distribution.csv", &csv)?;
    if cfg.write_steady {
        write_out(&args.out, "steady.csv", &steady_csv(&solver.steady, n))?;
    }
    if args.plot {
        let svg = render("Distribution over time", "m", "probability", &series);
        write_out(&args.out, "evolution.svg", &svg)?;
    }
    Ok(())
}

pub fn steady(args: &RunArgs) -> Result<(), CliError> {
    let cfg: ChainConfig = config::load(&args.config)?;
    let params = cfg.model.build()?;
    let n = params.n_agents;
    let rates = RateTable::build(&params, &cfg.rates)?;
    let steady = steady_state(&rates)?;
    write_out(&args.out, "steady.csv", &steady_csv(&steady, n))?;
    if args.plot {
        let series = [Series {
            label: String::new(),
            points: steady
                .probs()
                .iter()
                .enumerate()
                .map(|(state, &p)| (order_parameter(state, n), p))
                .collect(),
            style: Style::Bars,
        }];
        let svg = render("Steady state", "m", "probability", &series);
        write_out(&args.out, "steady.svg", &svg)?;
    }
    Ok(())
}

pub fn simulate(args: &RunArgs) -> Result<(), CliError> {
    let cfg: SimulateConfig = config::load(&args.config)?;
    let params = cfg.model.build()?;
    let n = params.n_agents;
    let seed = args.seed.unwrap_or(cfg.seed);
    let init = cfg.initial.condition();
    let ens = match &cfg.schedule {
        Some(s) => {
            let schedule = s.build()?;
            simulate_piecewise_ensemble(
                &schedule,
                &params,
                &cfg.rates,
                &init,
                cfg.t_max,
                cfg.dt,
                seed,
                cfg.trajectories,
            )?
        }
        None => {
            let rates = RateTable::build(&params, &cfg.rates)?;
            simulate_ensemble(&rates, &init, cfg.t_max, cfg.dt, seed, cfg.trajectories)?
        }
    };

    let mut traj_csv = String::from("traj_id,t,n,m\n");
    for (id, traj) in ens.trajectories().iter().enumerate() {
        for (t, &state) in traj.times().iter().zip(traj.states()) {
            let _ = writeln!(traj_csv, "{id},{t},{state},{}", order_parameter(state, n));
        }
    }
    write_out(&args.out, "trajectories.csv", &traj_csv)?;

    let mut stats_csv = String::from("t,mean_n,var_n,mean_m,var_m\n");
    let means = ens.mean_counts();
    let vars = ens.variance_counts();
    for ((&t, mean), var) in ens.times().iter().zip(&means).zip(&vars) {
        let scale = n as f64;
        let _ = writeln!(
            stats_csv,
            "{t},{mean},{var},{},{}",
            2.0 * mean / scale - 1.0,
            4.0 * var / (scale * scale)
        );
    }
    write_out(&args.out, "ensemble_stats.csv", &stats_csv)?;

    let hist_times = cfg
        .histogram_times
        .clone()
        .unwrap_or_else(|| vec![cfg.t_max]);
    let mut hist_csv = String::from("t,n,m,freq\n");
    for &t in &hist_times {
        let k = grid_index(&ens, t)?;
        let hist = ens.empirical_distribution(k)?;
        for (state, &freq) in hist.probs().iter().enumerate() {
            let _ = writeln!(hist_csv, "{t},{state},{},{freq}", order_parameter(state, n));
        }
    }
    write_out(&args.out, "histogram.csv", &hist_csv)?;

    // calibration-ready copy of the same ensemble
    let data = Dataset::from_simulated(ens.trajectories(), n)?;
    write_out(&args.out, "dataset.csv", &data.to_csv())?;
    let meta = DatasetMeta {
        n_agents: n,
        beta: params.beta,
        alpha: params.alpha,
    };
    write_json(&args.out, "dataset_meta.json", &meta)?;

    if args.plot {
        let shown = ens.trajectories().len().min(12);
        let series: Vec<Series> = ens.trajectories()[..shown]
            .iter()
            .enumerate()
            .map(|(id, traj)| Series {
                label: if shown <= 6 {
                    format!("run {id}")
                } else {
                    String::new()
                },
                points: traj
                    .times()
                    .iter()
                    .zip(traj.states())
                    .map(|(&t, &state)| (t, order_parameter(state, n)))
                    .collect(),
                style: Style::Line,
            })
            .collect();
        let svg = render("Sampled trajectories", "t", "m", &series);
        write_out(&args.out, "trajectories.svg", &svg)?;
    }
    Ok(())
}

/// Maps a requested sample time onto the ensemble grid.
fn grid_index(ens: &Ensemble, t: f64) -> Result<usize, CliError> {
    ens.times()
        .iter()
        .position(|&g| (g - t).abs() <= 1e-9 * t.abs().max(1.0))
        .ok_or_else(|| {
            CliError::Config(format!(
                "histogram time {t} is not on the sampling grid (0..t_max step dt)"
            ))
        })
}

/// Everything metastability reports, with the spectral cross-check inline.
#[derive(Serialize)]
struct FirstPassageReport {
    n_minus: usize,
    n_u: usize,
    n_plus: usize,
    tau_lr: f64,
    tau_rl: f64,
    #[serde(rename = "phi_R")]
    phi_r: f64,
    lambda2_inv_approx: f64,
    lambda2_inv_spectral: f64,
    approx_over_spectral: f64,
}

pub fn metastability(args: &RunArgs) -> Result<(), CliError> {
    let cfg: ChainConfig = config::load(&args.config)?;
    let params = cfg.model.build()?;
    let n = params.n_agents;
    let solver = build_solver(params, &cfg.rates)?;
    let fp = first_passage_analysis(&solver.rates, &solver.steady)?;
    let spectral_time = solver.spectrum.relaxation_time().ok_or_else(|| {
        CliError::Numerical("no decaying mode: the chain has a single state".to_string())
    })?;
    let report = FirstPassageReport {
        n_minus: fp.equilibria.n_minus,
        n_u: fp.equilibria.n_u,
        n_plus: fp.equilibria.n_plus,
        tau_lr: fp.tau_lr,
        tau_rl: fp.tau_rl,
        phi_r: fp.phi_r,
        lambda2_inv_approx: 1.0 / fp.lambda2_approx,
        lambda2_inv_spectral: spectral_time,
        approx_over_spectral: (1.0 / fp.lambda2_approx) / spectral_time,
    };
    write_json(&args.out, "fpt.json", &report)?;

    let mut tau_csv = String::from("n,m,tau\n");
    for (state, &tau) in fp.tau.iter().enumerate() {
        let _ = writeln!(tau_csv, "{state},{},{tau}", order_parameter(state, n));
    }
    write_out(&args.out, "tau_curve.csv", &tau_csv)?;

    let curve = fixation_curve(&solver.rates, fp.equilibria.n_minus, fp.equilibria.n_plus)?;
    let mut fix_csv = String::from("n,m,phi\n");
    for (offset, &phi) in curve.iter().enumerate() {
        let state = fp.equilibria.n_minus + offset;
        let _ = writeln!(fix_csv, "{state},{},{phi}", order_parameter(state, n));
    }
    write_out(&args.out, "fixation_curve.csv", &fix_csv)?;

    if args.plot {
        let tau_series = [Series {
            label: String::new(),
            points: fp
                .tau
                .iter()
                .enumerate()
                .map(|(state, &tau)| {
                    (
                        order_parameter(state, n),
                        tau.max(f64::MIN_POSITIVE).log10(),
                    )
                })
                .collect(),
            style: Style::Line,
        }];
        let svg = render(
            "Mean first-passage time to the barrier",
            "m",
            "log10(tau)",
            &tau_series,
        );
        write_out(&args.out, "tau_curve.svg", &svg)?;
        let fix_series = [Series {
            label: String::new(),
            points: curve
                .iter()
                .enumerate()
                .map(|(offset, &phi)| (order_parameter(fp.equilibria.n_minus + offset, n), phi))
                .collect(),
            style: Style::Line,
        }];
        let svg = render(
            "Fixation probability of the right mode",
            "m",
            "phi",
            &fix_series,
        );
        write_out(&args.out, "fixation_curve.svg", &svg)?;
    }
    Ok(())
}

/// calibration.json: the fitted point, its score, and (when the truth is
/// supplied) the recovery errors.
#[derive(Serialize)]
struct CalibrationReport {
    #[serde(rename = "F")]
    f: f64,
    #[serde(rename = "J")]
    j: f64,
    gamma: f64,
    nll: f64,
    evaluations: u64,
    seed: u64,
    #[serde(rename = "E_tot", skip_serializing_if = "Option::is_none")]
    e_tot: Option<f64>,
    #[serde(rename = "f", skip_serializing_if = "Option::is_none")]
    f_ratio: Option<f64>,
}

pub fn calibrate(args: &RunArgs) -> Result<(), CliError> {
    let cfg: CalibrateConfig = config::load(&args.config)?;
    let meta: DatasetMeta = config::load(&cfg.meta_path())?;
    meta.validate()?;
    let text = fs::read_to_string(&cfg.dataset)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", cfg.dataset.display())))?;
    let data = Dataset::from_csv(&text, meta.n_agents)?;
    let bounds = cfg.bounds.unwrap_or_default();
    let config = CalibrationConfig {
        pop_size: cfg.pop_size,
        n_steps: cfg.n_steps,
        seed: args.seed.unwrap_or(cfg.seed),
    };
    let result = run_calibration(&data, &bounds, &config)?;
    let (e_tot, f_ratio) = match &cfg.truth {
        Some(truth) => {
            let (e, f) = error_metrics(truth, &result.theta_star)?;
            (Some(e), Some(f))
        }
        None => (None, None),
    };
    let report = CalibrationReport {
        f: result.theta_star.f,
        j: result.theta_star.j,
        gamma: result.theta_star.gamma,
        nll: result.nll,
        evaluations: result.evaluations,
        seed: result.seed,
        e_tot,
        f_ratio,
    };
    write_json(&args.out, "calibration.json", &report)?;
    if args.plot {
        // one-dimensional likelihood slices through the fitted point
        let mut series = Vec::new();
        for (coord, label) in [(0usize, "F"), (1, "J"), (2, "gamma")] {
            let (lo, hi) = match coord {
                0 => (bounds.f[0], bounds.f[1]),
                1 => (bounds.j[0], bounds.j[1]),
                _ => (bounds.gamma[0], bounds.gamma[1]),
            };
            let mut points = Vec::new();
            for i in 0..=40 {
                let v = lo + (hi - lo) * i as f64 / 40.0;
                let mut theta = result.theta_star;
                match coord {
                    0 => theta.f = v,
                    1 => theta.j = v,
                    _ => theta.gamma = v,
                }
                if let Ok(nll) = neg_log_likelihood(&theta, &data) {
                    points.push((v, nll));
                }
            }
            series.push(Series {
                label: format!("{label} slice"),
                points,
                style: Style::Line,
            });
        }
        let svg = render(
            "Negative log-likelihood slices through the fit",
            "parameter value",
            "NLL",
            &series,
        );
        write_out(&args.out, "likelihood_slices.svg", &svg)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct EquilibriaReport {
    mean_field: bdm_core::model::EquilibriumSet,
    #[serde(skip_serializing_if = "Option::is_none")]
    critical_rationality: Option<f64>,
    /// Steady-state landmark indices; absent when the chain is not bistable.
    #[serde(skip_serializing_if = "Option::is_none")]
    steady_state: Option<bdm_core::metastability::EquilibriaIndices>,
}

pub fn equilibria(args: &RunArgs) -> Result<(), CliError> {
    let cfg: ChainConfig = config::load(&args.config)?;
    let params = cfg.model.build()?;
    let roots = params.mean_field_equilibria()?;
    let rates = RateTable::build(&params, &cfg.rates)?;
    let steady = steady_state(&rates)?;
    let report = EquilibriaReport {
        mean_field: roots,
        critical_rationality: params.critical_rationality().ok(),
        steady_state: find_equilibria(&steady).ok(),
    };
    write_json(&args.out, "equilibria.json", &report)
}

pub fn spectrum(args: &RunArgs) -> Result<(), CliError> {
    let cfg: ChainConfig = config::load(&args.config)?;
    let params = cfg.model.build()?;
    let rates = RateTable::build(&params, &cfg.rates)?;
    let op = build_master_operator(&rates);
    let steady = steady_state(&rates)?;
    let spectrum = compute_spectrum(&op, &steady)?;
    let mut csv = String::from("index,lambda\n");
    for (i, &lambda) in spectrum.eigenvalues().iter().enumerate() {
        let _ = writeln!(csv, "{i},{lambda}");
    }
    write_out(&args.out, "spectrum.csv", &csv)?;
    if args.plot {
        let series = [Series {
            label: String::new(),
            points: spectrum
                .eigenvalues()
                .iter()
                .enumerate()
                .map(|(i, &lambda)| (i as f64, lambda))
                .collect(),
            style: Style::Bars,
        }];
        let svg = render("Master-operator spectrum", "index", "lambda", &series);
        write_out(&args.out, "spectrum.svg", &svg)?;
    }
    Ok(())
}
