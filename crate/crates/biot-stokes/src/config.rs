//! Flat `key = value` run configuration. One assignment per line, `#`
//! comments, dotted section prefixes (`mesh.n = 4`). Unknown and duplicate
//! keys are rejected; every material sign constraint is revalidated.

use crate::error::ConfigError;
use crate::forms::MaterialParams;
use crate::mesh::GridSpec;
use crate::scenarios::ScenarioKind;
use crate::timestepper::SchemeConfig;
use std::collections::BTreeMap;

/// Parsed and validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub params: MaterialParams,
    pub scheme: SchemeConfig,
    pub kind: ScenarioKind,
    pub output_dir: String,
    /// Write field dumps every `field_stride` steps; 0 disables them.
    pub field_stride: usize,
}

const KNOWN_KEYS: &[&str] = &[
    "mesh.dim",
    "mesh.n",
    "params.rho_b",
    "params.rho_f",
    "params.lambda",
    "params.mu",
    "params.alpha",
    "params.c0",
    "params.k",
    "params.nu",
    "params.beta",
    "scheme.theta",
    "scheme.dt",
    "scheme.steps",
    "scheme.tol",
    "scenario.kind",
    "output.dir",
    "output.field_stride",
];

/// Parses the flat key=value format. Every key is optional; defaults give a
/// small Crank-Nicolson decay run with unit parameters.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut seen: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Parse {
                line: lineno + 1,
                msg: format!("expected key = value, got {line:?}"),
            });
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(ConfigError::Parse { line: lineno + 1, msg: format!("unknown key {key:?}") });
        }
        if seen.contains_key(&key) {
            return Err(ConfigError::Parse {
                line: lineno + 1,
                msg: format!("duplicate key {key:?}"),
            });
        }
        seen.insert(key, (lineno + 1, value));
    }

    let take_f64 = |seen: &BTreeMap<String, (usize, String)>, key: &str, default: f64| -> Result<f64, ConfigError> {
        match seen.get(key) {
            None => Ok(default),
            Some((line, v)) => v.parse::<f64>().map_err(|_| ConfigError::Parse {
                line: *line,
                msg: format!("{key}: not a number: {v:?}"),
            }),
        }
    };
    let take_usize = |seen: &BTreeMap<String, (usize, String)>, key: &str, default: usize| -> Result<usize, ConfigError> {
        match seen.get(key) {
            None => Ok(default),
            Some((line, v)) => v.parse::<usize>().map_err(|_| ConfigError::Parse {
                line: *line,
                msg: format!("{key}: not an unsigned integer: {v:?}"),
            }),
        }
    };

    let dim = take_usize(&seen, "mesh.dim", 2)?;
    let n = take_usize(&seen, "mesh.n", 4)?;
    let grid = GridSpec::new(dim, n)
        .map_err(|e| ConfigError::Validation(e.to_string()))?;

    let rho_b = take_f64(&seen, "params.rho_b", 1.0)?;
    let rho_f = take_f64(&seen, "params.rho_f", 1.0)?;
    let lambda = take_f64(&seen, "params.lambda", 1.0)?;
    let mu = take_f64(&seen, "params.mu", 1.0)?;
    let alpha = take_f64(&seen, "params.alpha", 1.0)?;
    let c0 = take_f64(&seen, "params.c0", 1.0)?;
    let k = take_f64(&seen, "params.k", 1.0)?;
    let nu = take_f64(&seen, "params.nu", 1.0)?;
    let beta = take_f64(&seen, "params.beta", 1.0)?;
    let params = MaterialParams::new(rho_b, rho_f, lambda, mu, alpha, c0, k, nu, beta)
        .map_err(|e| ConfigError::Validation(e.to_string()))?;

    let theta = take_f64(&seen, "scheme.theta", 0.5)?;
    let steps = take_usize(&seen, "scheme.steps", 16)?;
    let dt = take_f64(&seen, "scheme.dt", 1.0 / (n as f64 * steps.max(1) as f64).max(1.0))?;
    let tol = take_f64(&seen, "scheme.tol", 1e-12)?;
    let scheme = SchemeConfig::new(theta, dt, steps, tol)
        .map_err(|e| ConfigError::Validation(e.to_string()))?;

    let kind = match seen.get("scenario.kind").map(|(_, v)| v.as_str()).unwrap_or("decay") {
        "zero" => ScenarioKind::Zero,
        "decay" => ScenarioKind::Decay,
        "mms" => ScenarioKind::Mms,
        "mms_polynomial" => ScenarioKind::MmsPolynomial,
        other => {
            let line = seen.get("scenario.kind").map(|(l, _)| *l).unwrap_or(0);
            return Err(ConfigError::Parse {
                line,
                msg: format!("scenario.kind must be zero|decay|mms|mms_polynomial, got {other:?}"),
            });
        }
    };

    let output_dir = seen.get("output.dir").map(|(_, v)| v.clone()).unwrap_or_else(|| "out".into());
    let field_stride = take_usize(&seen, "output.field_stride", 0)?;

    Ok(RunConfig { grid, params, scheme, kind, output_dir, field_stride })
}
