//! Parameter resolution: defaults ← config file ← command-line flags.

use crate::commands::CliError;
use crate::ParamArgs;
use ampliphase::ProtocolParams;
use std::collections::BTreeMap;
use std::path::Path;

/// Parse a plain-text config file of `key = value` lines; `#` starts a
/// comment. Keys use the long flag names (kebab case, no leading dashes).
pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config file {}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Usage(format!(
                "{}:{}: expected key=value, got `{line}`",
                path.display(),
                lineno + 1
            )));
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

const PARAM_KEYS: &[&str] = &[
    "alpha-mag",
    "beta-sq",
    "theta",
    "xi",
    "g",
    "lambda",
    "eta",
    "phi",
];

fn file_f64(map: &BTreeMap<String, String>, key: &str) -> Result<Option<f64>, CliError> {
    match map.get(key) {
        None => Ok(None),
        Some(s) => s
            .parse::<f64>()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("config key `{key}`: `{s}` is not a number"))),
    }
}

/// The fully resolved physical configuration plus its provenance-free echo
/// for output artifacts.
pub struct Resolved {
    pub params: ProtocolParams,
    pub echo: BTreeMap<String, String>,
}

/// Merge defaults, file values, and flags into validated parameters.
///
/// Unknown config-file keys that look like physical parameters are rejected;
/// non-parameter keys are left for the caller's own lookups.
pub fn resolve_params(
    args: &ParamArgs,
    file: &BTreeMap<String, String>,
) -> Result<Resolved, CliError> {
    for key in file.keys() {
        let known_other = matches!(
            key.as_str(),
            "cutoff" | "pulses" | "seed" | "runs" | "model" | "grid-points" | "fraction"
        );
        if !PARAM_KEYS.contains(&key.as_str()) && !known_other {
            return Err(CliError::Usage(format!("unknown config key `{key}`")));
        }
    }

    let pick = |flag: Option<f64>, key: &str| -> Result<Option<f64>, CliError> {
        Ok(flag.or(file_f64(file, key)?))
    };

    // beta-sq and alpha-mag name the same amplitude, so a flag for either
    // overrides both file keys; only same-source duplication is ambiguous
    // (the flag-level conflict is already a clap error).
    let (alpha_flag, beta_sq) = match (args.alpha_mag, args.beta_sq) {
        (Some(a), _) => (Some(a), None),
        (None, Some(b)) => (None, Some(b)),
        (None, None) => {
            let file_alpha = file_f64(file, "alpha-mag")?;
            let file_beta = file_f64(file, "beta-sq")?;
            if file_alpha.is_some() && file_beta.is_some() {
                return Err(CliError::Usage(
                    "config file sets both `beta-sq` and `alpha-mag`; they define the same \
                     amplitude"
                        .into(),
                ));
            }
            (file_alpha, file_beta)
        }
    };
    let theta = pick(args.theta, "theta")?.unwrap_or(0.0);
    let xi = pick(args.xi, "xi")?.unwrap_or(1.0);
    let g = pick(args.g, "g")?.unwrap_or(0.0);
    let lambda = pick(args.lambda, "lambda")?.unwrap_or(0.0);
    let eta = pick(args.eta, "eta")?.unwrap_or(1.0);
    let phi = pick(args.phi, "phi")?.unwrap_or(std::f64::consts::FRAC_PI_2);

    let alpha_mag = match (alpha_flag, beta_sq) {
        (Some(a), _) => a,
        (None, Some(b2)) => {
            if xi <= 0.0 {
                return Err(CliError::Usage(
                    "beta-sq with xi = 0 leaves |α| undefined".into(),
                ));
            }
            (b2 / xi).sqrt()
        }
        (None, None) => 1.0,
    };

    let params = ProtocolParams::new(alpha_mag, theta, xi, g, lambda, eta, phi)
        .map_err(|e| CliError::Usage(e.to_string()))?;

    let mut echo = BTreeMap::new();
    echo.insert("alpha-mag".into(), fmt(params.alpha_mag));
    echo.insert("theta".into(), fmt(params.theta));
    echo.insert("xi".into(), fmt(params.xi));
    echo.insert("g".into(), fmt(params.g));
    echo.insert("lambda".into(), fmt(params.lambda));
    echo.insert("eta".into(), fmt(params.eta));
    echo.insert("phi".into(), fmt(params.phi));
    echo.insert("beta-sq".into(), fmt(params.beta_sq()));
    Ok(Resolved { params, echo })
}

pub fn fmt(x: f64) -> String {
    format!("{x}")
}

/// One sweep axis: name plus an inclusive linspace.
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

pub fn parse_axis(spec: &str) -> Result<Axis, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [name, start, stop, steps] = parts.as_slice() else {
        return Err(CliError::Usage(format!(
            "axis `{spec}`: expected name:start:stop:steps"
        )));
    };
    if !["phi", "g", "eta", "xi", "beta_sq"].contains(name) {
        return Err(CliError::Usage(format!(
            "axis name `{name}`: expected one of phi, g, eta, xi, beta_sq"
        )));
    }
    let bad = |what: &str| CliError::Usage(format!("axis `{spec}`: bad {what}"));
    let start: f64 = start.parse().map_err(|_| bad("start"))?;
    let stop: f64 = stop.parse().map_err(|_| bad("stop"))?;
    let steps: usize = steps.parse().map_err(|_| bad("steps"))?;
    if steps < 2 {
        return Err(CliError::Usage(format!("axis `{spec}`: steps must be ≥ 2")));
    }
    let values = (0..steps)
        .map(|i| start + (stop - start) * i as f64 / (steps - 1) as f64)
        .collect();
    Ok(Axis {
        name: name.to_string(),
        values,
    })
}

/// Apply an axis value to a parameter set.
pub fn apply_axis(p: &ProtocolParams, name: &str, value: f64) -> Result<ProtocolParams, CliError> {
    let map_err = |e: ampliphase::Error| CliError::Usage(e.to_string());
    match name {
        "phi" => Ok(p.with_phi(value)),
        "g" => ProtocolParams::new(p.alpha_mag, p.theta, p.xi, value, p.lambda, p.eta, p.phi)
            .map_err(map_err),
        "eta" => ProtocolParams::new(p.alpha_mag, p.theta, p.xi, p.g, p.lambda, value, p.phi)
            .map_err(map_err),
        "xi" => ProtocolParams::new(p.alpha_mag, p.theta, value, p.g, p.lambda, p.eta, p.phi)
            .map_err(map_err),
        "beta_sq" => {
            // Keep ξ, rescale the probe so ξ|α|² hits the requested value.
            if p.xi <= 0.0 {
                return Err(CliError::Usage("beta_sq axis with xi = 0".into()));
            }
            ProtocolParams::new(
                (value / p.xi).sqrt(),
                p.theta,
                p.xi,
                p.g,
                p.lambda,
                p.eta,
                p.phi,
            )
            .map_err(map_err)
        }
        other => Err(CliError::Usage(format!("unsupported axis `{other}`"))),
    }
}
