//! Command implementations.

use crate::config::{self, fmt, Resolved};
use crate::output::Artifact;
use crate::{Cli, Command, McArgs};
use ampliphase::estimation::{
    point_estimate, posterior_update, simulate_counts, suggest_fraction, two_step_run, CountData,
    CountModel, ExperimentConfig, PhiPosterior, TwoStepResult,
};
use ampliphase::{fisher, gaussian, photon, Error, ProtocolParams};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Convergence(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Convergence(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Convergence(m) => write!(f, "{m}"),
            CliError::Io(m) => write!(f, "{m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Convergence { .. } | Error::PosteriorUnderflow { .. } => {
                CliError::Convergence(e.to_string())
            }
            _ => CliError::Usage(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModelArg {
    /// Sample from the exact per-mode photon distributions.
    ExactPmf,
    /// Poissonian counts at pump-phase-averaged rates.
    PhaseAveragedPoisson,
}

impl From<ModelArg> for CountModel {
    fn from(m: ModelArg) -> CountModel {
        match m {
            ModelArg::ExactPmf => CountModel::ExactPmf,
            ModelArg::PhaseAveragedPoisson => CountModel::PhaseAveragedPoisson,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepCommand {
    Qfi,
    Cfi,
    Sensitivity,
    Enhancement,
    Simulate,
    TwoStep,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => config::read_config_file(path)?,
        None => BTreeMap::new(),
    };
    let file_usize = |key: &str| -> Result<Option<usize>, CliError> {
        match file.get(key) {
            None => Ok(None),
            Some(s) => s.parse::<usize>().map(Some).map_err(|_| {
                CliError::Usage(format!("config key `{key}`: `{s}` is not an integer"))
            }),
        }
    };

    match &cli.command {
        Command::Qfi { params, cutoff } => {
            let r = config::resolve_params(params, &file)?;
            let cutoff = cutoff.or(file_usize("cutoff")?);
            let mut art = Artifact::new(echo(&r, "qfi"), qfi_columns());
            art.rows.push(qfi_row(&r.params, cutoff)?);
            art.write(cli.output.as_deref(), cli.format)
        }
        Command::Cfi { params, cutoff } => {
            let r = config::resolve_params(params, &file)?;
            let cutoff = cutoff.or(file_usize("cutoff")?);
            let mut art = Artifact::new(echo(&r, "cfi"), cfi_columns());
            art.rows.push(cfi_row(&r.params, cutoff)?);
            art.write(cli.output.as_deref(), cli.format)
        }
        Command::Sensitivity { params } => {
            let r = config::resolve_params(params, &file)?;
            let mut art = Artifact::new(echo(&r, "sensitivity"), sensitivity_columns());
            art.rows.push(sensitivity_row(&r.params, true)?);
            art.write(cli.output.as_deref(), cli.format)
        }
        Command::Enhancement { params } => {
            let r = config::resolve_params(params, &file)?;
            let mut art = Artifact::new(echo(&r, "enhancement"), enhancement_columns());
            art.rows.push(enhancement_row(&r.params)?);
            art.write(cli.output.as_deref(), cli.format)
        }
        Command::Pmf {
            params,
            cutoff,
            oracle,
        } => {
            let r = config::resolve_params(params, &file)?;
            let cutoff = cutoff.or(file_usize("cutoff")?);
            pmf_artifact(&r, cutoff, *oracle, &cli)
        }
        Command::Simulate { params, mc } => {
            let r = config::resolve_params(params, &file)?;
            let mut art = Artifact::new(echo(&r, "simulate"), simulate_columns());
            mc_echo(&mut art.config, mc);
            let rows: Vec<Vec<f64>> = (0..mc.runs)
                .into_par_iter()
                .map(|run| simulate_row(&r.params, mc, run))
                .collect::<Result<_, _>>()?;
            art.rows = rows;
            art.write(cli.output.as_deref(), cli.format)
        }
        Command::TwoStep {
            params,
            mc,
            fraction,
        } => {
            let r = config::resolve_params(params, &file)?;
            let fraction = pick_fraction(*fraction, &file)?;
            let mut art = Artifact::new(echo(&r, "two-step"), two_step_columns());
            mc_echo(&mut art.config, mc);
            let rows: Vec<Vec<f64>> = (0..mc.runs)
                .into_par_iter()
                .map(|run| two_step_row(&r.params, mc, fraction, run))
                .collect::<Result<_, _>>()?;
            art.rows = rows;
            art.write(cli.output.as_deref(), cli.format)
        }
        Command::Sweep {
            params,
            axis,
            command,
            mc,
            cutoff,
            fraction,
        } => {
            let r = config::resolve_params(params, &file)?;
            let axis = config::parse_axis(axis)?;
            let cutoff = cutoff.or(file_usize("cutoff")?);
            let fraction = pick_fraction(*fraction, &file)?;
            sweep_artifact(&r, &axis, *command, mc, cutoff, fraction, &cli)
        }
    }
}

fn pick_fraction(
    flag: Option<f64>,
    file: &BTreeMap<String, String>,
) -> Result<Option<f64>, CliError> {
    match flag {
        Some(v) => Ok(Some(v)),
        None => match file.get("fraction") {
            None => Ok(None),
            Some(s) => s.parse::<f64>().map(Some).map_err(|_| {
                CliError::Usage(format!("config key `fraction`: `{s}` is not a number"))
            }),
        },
    }
}

fn echo(r: &Resolved, command: &str) -> BTreeMap<String, String> {
    let mut map = r.echo.clone();
    map.insert("command".into(), command.into());
    map
}

fn mc_echo(map: &mut BTreeMap<String, String>, mc: &McArgs) {
    map.insert("pulses".into(), mc.pulses.to_string());
    map.insert("seed".into(), mc.seed.to_string());
    map.insert("runs".into(), mc.runs.to_string());
    map.insert(
        "model".into(),
        match mc.model {
            ModelArg::ExactPmf => "exact-pmf".into(),
            ModelArg::PhaseAveragedPoisson => "phase-averaged-poisson".into(),
        },
    );
    map.insert("grid-points".into(), mc.grid_points.to_string());
}

/// Fock cutoff for the numeric Fisher sum: the smallest cutoff whose thermal
/// eigenvalue mass above it is below 1e−10, with a small safety pad.
fn qfi_auto_cutoff(p: &ProtocolParams) -> usize {
    let (_, n_eff) = gaussian::lossy_squeezed_vacuum(p.g, p.eta).expect("validated");
    if n_eff == 0.0 {
        return 8;
    }
    let q = n_eff / (1.0 + n_eff);
    ((-10.0 * std::f64::consts::LN_10 / q.ln()).ceil() as usize + 4).max(8)
}

fn qfi_columns() -> Vec<&'static str> {
    vec![
        "qfi_closed",
        "qfi_numeric",
        "qfi_optimal",
        "qfi_sql",
        "ratio_to_sql",
        "g_eff",
        "n_bar",
        "phi_opt",
        "numeric_cutoff",
        "numeric_tail_bound",
    ]
}

fn qfi_row(p: &ProtocolParams, cutoff: Option<usize>) -> Result<Vec<f64>, CliError> {
    let closed = fisher::qfi_phase_dependent(p);
    let opt = fisher::qfi_optimal(p);
    let cutoff = cutoff.unwrap_or_else(|| qfi_auto_cutoff(p));
    let numeric = fisher::qfi_numeric(p, cutoff)?;
    Ok(vec![
        closed,
        numeric.value,
        opt.value,
        fisher::qfi_sql(p.beta_sq()),
        opt.ratio_to_sql,
        opt.g_eff,
        opt.n_bar,
        opt.phi_opt,
        numeric.cutoff as f64,
        numeric.tail_bound,
    ])
}

fn cfi_columns() -> Vec<&'static str> {
    vec![
        "cfi",
        "qfi_closed",
        "inv_var_sensitivity",
        "qfi_sql",
        "cutoff",
    ]
}

fn cfi_row(p: &ProtocolParams, cutoff: Option<usize>) -> Result<Vec<f64>, CliError> {
    let tm = gaussian::output_state(p);
    let cutoff = match cutoff {
        Some(c) => c,
        None => photon::required_cutoff(&tm.h, 1e-9)?.max(photon::required_cutoff(&tm.v, 1e-9)?),
    };
    let cfi = photon::cfi(p, cutoff)?;
    let inv_var = match photon::sensitivity(p) {
        Ok(d) => 1.0 / (d * d),
        Err(_) => {
            log::warn!(
                "insensitive working point at phi = {}; reporting zero inverse variance",
                p.phi
            );
            0.0
        }
    };
    Ok(vec![
        cfi,
        fisher::qfi_phase_dependent(p),
        inv_var,
        fisher::qfi_sql(p.beta_sq()),
        cutoff as f64,
    ])
}

fn sensitivity_columns() -> Vec<&'static str> {
    vec![
        "delta_phi",
        "inv_var",
        "mean_d",
        "var_d",
        "a_coeff",
        "b_coeff",
    ]
}

/// `strict` propagates the insensitive-point error; sweeps instead record a
/// divergent sensitivity and move on.
fn sensitivity_row(p: &ProtocolParams, strict: bool) -> Result<Vec<f64>, CliError> {
    let stats = photon::var_d(p);
    let delta = match photon::sensitivity(p) {
        Ok(d) => d,
        Err(e) if strict => return Err(e.into()),
        Err(_) => f64::INFINITY,
    };
    let inv_var = if delta.is_finite() {
        1.0 / (delta * delta)
    } else {
        0.0
    };
    Ok(vec![
        delta,
        inv_var,
        stats.mean_d,
        stats.var_d,
        stats.a_coeff,
        stats.b_coeff,
    ])
}

fn enhancement_columns() -> Vec<&'static str> {
    vec![
        "enhancement_homodyne",
        "enhancement_unamplified_difference",
        "delta_phi_averaged",
        "poisson_regime",
        "n_h",
        "n_v",
        "d",
    ]
}

fn enhancement_row(p: &ProtocolParams) -> Result<Vec<f64>, CliError> {
    let sig = photon::averaged_signal(p);
    let avg = photon::averaged_sensitivity(p)?;
    Ok(vec![
        photon::enhancement(p, photon::Reference::HomodyneSql)?,
        photon::enhancement(p, photon::Reference::UnamplifiedDifference)?,
        avg.delta_phi,
        if avg.poisson_regime { 1.0 } else { 0.0 },
        sig.n_h,
        sig.n_v,
        sig.d,
    ])
}

fn pmf_artifact(
    r: &Resolved,
    cutoff: Option<usize>,
    oracle: bool,
    cli: &Cli,
) -> Result<(), CliError> {
    let tm = gaussian::output_state(&r.params);
    let cutoff = match cutoff {
        Some(c) => c,
        None => photon::required_cutoff(&tm.h, 1e-10)?.max(photon::required_cutoff(&tm.v, 1e-10)?),
    };
    let pmf_h = photon::photon_pmf(&tm.h, cutoff)?;
    let pmf_v = photon::photon_pmf(&tm.v, cutoff)?;
    let columns = if oracle {
        vec!["n", "p_h", "p_v", "oracle_h", "oracle_v"]
    } else {
        vec!["n", "p_h", "p_v"]
    };
    let mut art = Artifact::new(echo(r, "pmf"), columns);
    let oracles = if oracle {
        Some((
            photon::pmf_oracle(&tm.h, cutoff)?,
            photon::pmf_oracle(&tm.v, cutoff)?,
        ))
    } else {
        None
    };
    for n in 0..=cutoff {
        let mut row = vec![n as f64, pmf_h.probs[n], pmf_v.probs[n]];
        if let Some((oh, ov)) = &oracles {
            row.push(oh.probs[n]);
            row.push(ov.probs[n]);
        }
        art.rows.push(row);
    }
    for (label, pmf) in [("h", &pmf_h), ("v", &pmf_v)] {
        art.diagnostics
            .insert(format!("tail_bound_{label}"), fmt(pmf.tail_bound));
        art.diagnostics.insert(
            format!("reliable_cutoff_{label}"),
            pmf.reliable_cutoff.to_string(),
        );
        art.diagnostics
            .insert(format!("clamped_{label}"), pmf.clamped.to_string());
    }
    art.write(cli.output.as_deref(), cli.format)
}

fn experiment_config(
    p: &ProtocolParams,
    mc: &McArgs,
    run: usize,
) -> Result<ExperimentConfig, CliError> {
    ExperimentConfig::with_grid(
        *p,
        mc.pulses,
        mc.seed.wrapping_add(run as u64),
        mc.model.into(),
        mc.grid_points,
    )
    .map_err(CliError::from)
}

fn simulate_columns() -> Vec<&'static str> {
    vec![
        "run",
        "seed",
        "phi_true",
        "phi_hat",
        "err",
        "multimodal",
        "mean_nh",
        "mean_nv",
    ]
}

fn simulate_row(p: &ProtocolParams, mc: &McArgs, run: usize) -> Result<Vec<f64>, CliError> {
    let cfg = experiment_config(p, mc, run)?;
    let data = simulate_counts(&cfg)?;
    let est = point_estimate(&posterior_update(
        &PhiPosterior::uniform(cfg.phi_grid_points),
        &data,
        &cfg,
    )?);
    let (sh, sv) = count_means(&data);
    Ok(vec![
        run as f64,
        cfg.seed as f64,
        p.phi,
        est.phi_hat,
        est.err,
        if est.multimodal { 1.0 } else { 0.0 },
        sh,
        sv,
    ])
}

fn count_means(data: &CountData) -> (f64, f64) {
    let m = data.pairs.len().max(1) as f64;
    let (sh, sv) = data
        .pairs
        .iter()
        .fold((0u64, 0u64), |(a, b), &(h, v)| (a + h as u64, b + v as u64));
    (sh as f64 / m, sv as f64 / m)
}

fn two_step_columns() -> Vec<&'static str> {
    vec![
        "run",
        "seed",
        "phi_true",
        "phi_rough",
        "psi_shift",
        "phi_hat",
        "err",
        "m1",
        "m2",
        "degraded",
        "fraction",
    ]
}

fn run_two_step(
    p: &ProtocolParams,
    mc: &McArgs,
    fraction: Option<f64>,
    run: usize,
) -> Result<(TwoStepResult, f64, u64), CliError> {
    let cfg = experiment_config(p, mc, run)?;
    let fraction = match fraction {
        Some(f) => f,
        None => suggest_fraction(&cfg)?,
    };
    Ok((two_step_run(&cfg, fraction)?, fraction, cfg.seed))
}

fn two_step_row(
    p: &ProtocolParams,
    mc: &McArgs,
    fraction: Option<f64>,
    run: usize,
) -> Result<Vec<f64>, CliError> {
    let (res, fraction, seed) = run_two_step(p, mc, fraction, run)?;
    Ok(vec![
        run as f64,
        seed as f64,
        p.phi,
        res.phi_rough,
        res.psi_shift,
        res.phi_hat,
        res.err,
        res.m1 as f64,
        res.m2 as f64,
        if res.degraded { 1.0 } else { 0.0 },
        fraction,
    ])
}

fn sweep_artifact(
    r: &Resolved,
    axis: &config::Axis,
    command: SweepCommand,
    mc: &McArgs,
    cutoff: Option<usize>,
    fraction: Option<f64>,
    cli: &Cli,
) -> Result<(), CliError> {
    let axis_col: &'static str = match axis.name.as_str() {
        "phi" => "phi",
        "g" => "g",
        "eta" => "eta",
        "xi" => "xi",
        "beta_sq" => "beta_sq",
        _ => unreachable!("validated by parse_axis"),
    };
    let mut columns = vec![axis_col];
    columns.extend(match command {
        SweepCommand::Qfi => qfi_columns(),
        SweepCommand::Cfi => cfi_columns(),
        SweepCommand::Sensitivity => sensitivity_columns(),
        SweepCommand::Enhancement => enhancement_columns(),
        SweepCommand::Simulate => {
            vec!["mean_phi_hat", "bias", "std_phi_hat", "mean_err", "runs"]
        }
        SweepCommand::TwoStep => vec![
            "mean_phi_hat",
            "bias",
            "std_phi_hat",
            "mean_err",
            "cfi_bound",
            "coherent_bound",
            "degraded_runs",
            "runs",
        ],
    });

    let mut art = Artifact::new(echo(r, "sweep"), columns);
    art.config.insert(
        "sweep-command".into(),
        format!("{command:?}").to_lowercase(),
    );
    art.config.insert(
        "axis".into(),
        format!("{}:{} points", axis.name, axis.values.len()),
    );
    if matches!(command, SweepCommand::Simulate | SweepCommand::TwoStep) {
        mc_echo(&mut art.config, mc);
    }

    let rows: Vec<Vec<f64>> = axis
        .values
        .par_iter()
        .map(|&value| -> Result<Vec<f64>, CliError> {
            let p = config::apply_axis(&r.params, &axis.name, value)?;
            let mut row = vec![value];
            match command {
                SweepCommand::Qfi => row.extend(qfi_row(&p, cutoff)?),
                SweepCommand::Cfi => row.extend(cfi_row(&p, cutoff)?),
                SweepCommand::Sensitivity => row.extend(sensitivity_row(&p, false)?),
                SweepCommand::Enhancement => row.extend(enhancement_row(&p)?),
                SweepCommand::Simulate => {
                    let mut hats = Vec::with_capacity(mc.runs);
                    let mut errs = Vec::with_capacity(mc.runs);
                    for run in 0..mc.runs {
                        let cols = simulate_row(&p, mc, run)?;
                        hats.push(cols[3]);
                        errs.push(cols[4]);
                    }
                    row.extend(aggregate(&hats, &errs, p.phi));
                    row.push(mc.runs as f64);
                }
                SweepCommand::TwoStep => {
                    let mut hats = Vec::with_capacity(mc.runs);
                    let mut errs = Vec::with_capacity(mc.runs);
                    let mut degraded = 0usize;
                    for run in 0..mc.runs {
                        let (res, _, _) = run_two_step(&p, mc, fraction, run)?;
                        hats.push(res.phi_hat);
                        errs.push(res.err);
                        degraded += res.degraded as usize;
                    }
                    row.extend(aggregate(&hats, &errs, p.phi));
                    let locked = p.at_locked_pump().with_phi(FRAC_PI_2);
                    let info = photon::cfi_auto(&locked, 1e-9)?;
                    row.push(1.0 / (mc.pulses as f64 * info).sqrt());
                    row.push(1.0 / (mc.pulses as f64 * p.eta * p.beta_sq()).sqrt());
                    row.push(degraded as f64);
                    row.push(mc.runs as f64);
                }
            }
            Ok(row)
        })
        .collect::<Result<_, _>>()?;
    art.rows = rows;
    art.write(cli.output.as_deref(), cli.format)
}

/// (mean φ̂, bias, std φ̂, mean δφ̂) over runs.
fn aggregate(hats: &[f64], errs: &[f64], truth: f64) -> Vec<f64> {
    let n = hats.len().max(1) as f64;
    let mean: f64 = hats.iter().sum::<f64>() / n;
    let var: f64 = hats.iter().map(|h| (h - mean) * (h - mean)).sum::<f64>() / n;
    let mean_err: f64 = errs.iter().sum::<f64>() / n;
    vec![mean, mean - truth, var.sqrt(), mean_err]
}
