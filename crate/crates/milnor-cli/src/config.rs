//! Option resolution: command-line flags win over config-file entries, which
//! win over defaults. The resolved values are embedded in every output so a
//! report alone reproduces its run.

use milnor_core::regularity::ToleranceProfile;
use nalgebra::DVector;
use std::collections::BTreeMap;
use std::path::PathBuf;

/// Comma-separated vector argument, e.g. `0.2,-0.1`.
#[derive(Debug, Clone)]
pub struct VecArg(pub Vec<f64>);

impl VecArg {
    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_vec(self.0.clone())
    }
}

pub fn parse_vec_arg(s: &str) -> Result<VecArg, String> {
    let parts: Result<Vec<f64>, _> = s.split(',').map(|p| p.trim().parse::<f64>()).collect();
    match parts {
        Ok(v) if !v.is_empty() => Ok(VecArg(v)),
        Ok(_) => Err("empty vector".to_string()),
        Err(e) => Err(format!("invalid vector '{s}': {e}")),
    }
}

fn parse_config_file(path: &PathBuf) -> Result<BTreeMap<String, String>, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {} is not key=value: {raw:?}", lineno + 1))?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

/// Fully resolved run options.
pub struct Effective {
    pub out: PathBuf,
    pub seed: u64,
    pub eps: f64,
    pub delta: f64,
    pub eta: f64,
    pub alpha: Vec<f64>,
    pub samples: usize,
    pub strata: usize,
    pub tolerances: ToleranceProfile,
}

impl Effective {
    pub fn resolve(common: &super::Common) -> Result<Self, String> {
        let file = match &common.config {
            Some(path) => parse_config_file(path)?,
            None => BTreeMap::new(),
        };
        fn from_file<T: std::str::FromStr>(
            file: &BTreeMap<String, String>,
            key: &str,
        ) -> Result<Option<T>, String>
        where
            T::Err: std::fmt::Display,
        {
            match file.get(key) {
                Some(raw) => raw
                    .parse::<T>()
                    .map(Some)
                    .map_err(|e| format!("config key '{key}': {e}")),
                None => Ok(None),
            }
        }

        let out = common
            .out
            .clone()
            .or(file.get("out").map(PathBuf::from))
            .or_else(|| std::env::var_os("MILNOR_OUT").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        let seed = match common.seed {
            Some(s) => s,
            None => from_file(&file, "seed")?.unwrap_or(7),
        };
        let eps = match common.eps {
            Some(v) => v,
            None => from_file(&file, "eps")?.unwrap_or(0.5),
        };
        let delta = match common.delta {
            Some(v) => v,
            None => from_file(&file, "delta")?.unwrap_or(0.05),
        };
        let eta = match common.eta {
            Some(v) => v,
            None => from_file(&file, "eta")?.unwrap_or(0.9),
        };
        let alpha = match &common.alpha {
            Some(v) => v.0.clone(),
            None => match file.get("alpha") {
                Some(raw) => parse_vec_arg(raw)?.0,
                None => vec![0.0, 0.0],
            },
        };
        let samples = match common.samples {
            Some(v) => v,
            None => from_file(&file, "samples")?.unwrap_or(200),
        };
        let strata = match common.strata {
            Some(v) => v,
            None => from_file(&file, "strata")?.unwrap_or(3),
        };

        let defaults = ToleranceProfile::default();
        let tolerances = ToleranceProfile {
            rank_tol: match common.rank_tol {
                Some(v) => v,
                None => from_file(&file, "rank-tol")?.unwrap_or(defaults.rank_tol),
            },
            tau_radial: match common.tau_radial {
                Some(v) => v,
                None => from_file(&file, "tau-radial")?.unwrap_or(defaults.tau_radial),
            },
            tau_vertical: match common.tau_vertical {
                Some(v) => v,
                None => from_file(&file, "tau-vertical")?.unwrap_or(defaults.tau_vertical),
            },
            fd_step: match common.fd_step {
                Some(v) => v,
                None => from_file(&file, "fd-step")?.unwrap_or(defaults.fd_step),
            },
            denom_floor: match common.denom_floor {
                Some(v) => v,
                None => from_file(&file, "denom-floor")?.unwrap_or(defaults.denom_floor),
            },
            value_floor: match common.value_floor {
                Some(v) => v,
                None => from_file(&file, "value-floor")?.unwrap_or(defaults.value_floor),
            },
        };

        if !eps.is_finite() || eps <= 0.0 || !delta.is_finite() || delta <= 0.0 {
            return Err("eps and delta must be positive".into());
        }
        Ok(Effective {
            out,
            seed,
            eps,
            delta,
            eta,
            alpha,
            samples,
            strata,
            tolerances,
        })
    }

    /// The values as embedded in outputs.
    pub fn as_json(&self) -> serde_json::Value {
        serde_json::json!({
            "seed": self.seed,
            "eps": self.eps,
            "delta": self.delta,
            "eta": self.eta,
            "alpha": self.alpha,
            "samples": self.samples,
            "strata": self.strata,
            "tolerances": self.tolerances,
            "out": self.out.display().to_string(),
        })
    }
}
