//! Run specifications: a flat JSON object holding the problem, the oracle,
//! the seeds, the output directory and every solver setting.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use stradic::{HessianKind, NoiseModel, SolverConfig};

use crate::CliError;

/// Oracle modes accepted in the `oracle` key.
pub const ORACLE_MODES: [&str; 5] = ["exact", "gaussian", "step_proportional", "finite_sum", "history_relaxed"];

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub problem: String,
    /// Replacement data file for `lsq-simplex`.
    pub data: Option<PathBuf>,
    pub oracle: NoiseModel,
    pub seeds: Vec<u64>,
    pub output: PathBuf,
    /// Per-seed runs overwrite `config.seed`.
    pub config: SolverConfig,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            problem: "sphere-linear".into(),
            data: None,
            oracle: NoiseModel::Exact,
            seeds: vec![0],
            output: PathBuf::from("stradic-out"),
            config: SolverConfig::default(),
        }
    }
}

/// Keys owned by the spec itself; everything else belongs to the solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Head {
    problem: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    data: Option<PathBuf>,
    #[serde(default = "default_oracle")]
    oracle: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kappa_dir2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    batch_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coefficients: Option<Vec<f64>>,
    #[serde(default = "default_seeds")]
    seeds: Vec<u64>,
    #[serde(default = "default_output")]
    output: PathBuf,
}

const HEAD_KEYS: [&str; 9] = [
    "problem",
    "data",
    "oracle",
    "sigma",
    "kappa_dir2",
    "batch_size",
    "coefficients",
    "seeds",
    "output",
];

fn default_oracle() -> String {
    "exact".into()
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_output() -> PathBuf {
    PathBuf::from("stradic-out")
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Invalid(msg.into())
}

/// Builds the noise model named by `mode`, requiring exactly its own parameters.
pub fn oracle_from_parts(
    mode: &str,
    sigma: Option<f64>,
    kappa_dir2: Option<f64>,
    batch_size: Option<usize>,
    coefficients: Option<Vec<f64>>,
) -> Result<NoiseModel, CliError> {
    let given: Vec<&str> = [
        ("sigma", sigma.is_some()),
        ("kappa_dir2", kappa_dir2.is_some()),
        ("batch_size", batch_size.is_some()),
        ("coefficients", coefficients.is_some()),
    ]
    .into_iter()
    .filter_map(|(k, present)| present.then_some(k))
    .collect();
    let (model, own) = match mode {
        "exact" => (NoiseModel::Exact, None),
        "gaussian" | "additive_gaussian" => (
            NoiseModel::AdditiveGaussian {
                sigma: sigma.ok_or_else(|| invalid("oracle gaussian needs sigma"))?,
            },
            Some("sigma"),
        ),
        "step_proportional" => (
            NoiseModel::StepProportional {
                kappa_dir2: kappa_dir2.ok_or_else(|| invalid("oracle step_proportional needs kappa_dir2"))?,
            },
            Some("kappa_dir2"),
        ),
        "finite_sum" => (
            NoiseModel::FiniteSum {
                batch_size: batch_size.ok_or_else(|| invalid("oracle finite_sum needs batch_size"))?,
            },
            Some("batch_size"),
        ),
        "history_relaxed" => (
            NoiseModel::HistoryRelaxed {
                coefficients: coefficients.ok_or_else(|| invalid("oracle history_relaxed needs coefficients"))?,
            },
            Some("coefficients"),
        ),
        other => {
            return Err(invalid(format!(
                "unknown oracle '{other}', expected one of {}",
                ORACLE_MODES.join(", ")
            )))
        }
    };
    if let Some(extra) = given.iter().find(|k| Some(**k) != own) {
        return Err(invalid(format!("{extra} does not apply to oracle {mode}")));
    }
    model.validate().map_err(|e| invalid(e.to_string()))?;
    Ok(model)
}

/// Flat form of a noise model: mode name plus its parameters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OracleParts {
    pub mode: String,
    pub sigma: Option<f64>,
    pub kappa_dir2: Option<f64>,
    pub batch_size: Option<usize>,
    pub coefficients: Option<Vec<f64>>,
}

impl OracleParts {
    pub fn of(model: &NoiseModel) -> Self {
        let mut head = Head {
            problem: String::new(),
            data: None,
            oracle: String::new(),
            sigma: None,
            kappa_dir2: None,
            batch_size: None,
            coefficients: None,
            seeds: Vec::new(),
            output: PathBuf::new(),
        };
        oracle_parts(model, &mut head);
        Self {
            mode: head.oracle,
            sigma: head.sigma,
            kappa_dir2: head.kappa_dir2,
            batch_size: head.batch_size,
            coefficients: head.coefficients,
        }
    }

    pub fn build(self) -> Result<NoiseModel, CliError> {
        oracle_from_parts(&self.mode, self.sigma, self.kappa_dir2, self.batch_size, self.coefficients)
    }
}

fn oracle_parts(model: &NoiseModel, head: &mut Head) {
    head.oracle = match model {
        NoiseModel::Exact => "exact",
        NoiseModel::AdditiveGaussian { sigma } => {
            head.sigma = Some(*sigma);
            "gaussian"
        }
        NoiseModel::StepProportional { kappa_dir2 } => {
            head.kappa_dir2 = Some(*kappa_dir2);
            "step_proportional"
        }
        NoiseModel::FiniteSum { batch_size } => {
            head.batch_size = Some(*batch_size);
            "finite_sum"
        }
        NoiseModel::HistoryRelaxed { coefficients } => {
            head.coefficients = Some(coefficients.clone());
            "history_relaxed"
        }
    }
    .into();
}

/// Parses `zero`, `exact`, `bb` or `lbfgs:<memory>`.
pub fn parse_hessian(s: &str) -> Result<HessianKind, CliError> {
    match s {
        "zero" => Ok(HessianKind::Zero),
        "exact" => Ok(HessianKind::Exact),
        "bb" => Ok(HessianKind::BarzilaiBorwein),
        _ => s
            .strip_prefix("lbfgs:")
            .and_then(|m| m.parse().ok())
            .map(|memory| HessianKind::LimitedMemorySecant { memory })
            .ok_or_else(|| invalid(format!("unknown hessian '{s}', expected zero, exact, bb or lbfgs:<memory>"))),
    }
}

impl RunSpec {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let value: Value = serde_json::from_str(text).map_err(|e| invalid(format!("run spec: {e}")))?;
        let Value::Object(map) = value else {
            return Err(invalid("run spec must be a JSON object"));
        };
        let (head, rest): (Map<String, Value>, Map<String, Value>) =
            map.into_iter().partition(|(k, _)| HEAD_KEYS.contains(&k.as_str()));
        if rest.contains_key("seed") {
            return Err(invalid("run spec: use `seeds` rather than `seed`"));
        }
        let head: Head = serde_json::from_value(Value::Object(head)).map_err(|e| invalid(format!("run spec: {e}")))?;
        let config: SolverConfig =
            serde_json::from_value(Value::Object(rest)).map_err(|e| invalid(format!("run spec: {e}")))?;
        let oracle = oracle_from_parts(&head.oracle, head.sigma, head.kappa_dir2, head.batch_size, head.coefficients)?;
        Ok(Self {
            problem: head.problem,
            data: head.data,
            oracle,
            seeds: head.seeds,
            output: head.output,
            config,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Canonical form: one flat object with keys in sorted order.
    pub fn to_json(&self) -> String {
        let mut head = Head {
            problem: self.problem.clone(),
            data: self.data.clone(),
            oracle: String::new(),
            sigma: None,
            kappa_dir2: None,
            batch_size: None,
            coefficients: None,
            seeds: self.seeds.clone(),
            output: self.output.clone(),
        };
        oracle_parts(&self.oracle, &mut head);
        let Value::Object(mut map) = serde_json::to_value(&head).expect("plain data") else {
            unreachable!("struct serializes to an object")
        };
        let Value::Object(config) = serde_json::to_value(&self.config).expect("plain data") else {
            unreachable!("struct serializes to an object")
        };
        map.extend(config.into_iter().filter(|(k, _)| k != "seed"));
        serde_json::to_string_pretty(&Value::Object(map)).expect("plain data")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.seeds.is_empty() {
            return Err(invalid("at least one seed is required"));
        }
        self.config.validate().map_err(|e| invalid(e.to_string()))?;
        self.oracle.validate().map_err(|e| invalid(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_form_round_trips() {
        let spec = RunSpec {
            oracle: NoiseModel::HistoryRelaxed {
                coefficients: vec![0.1, 0.05],
            },
            seeds: vec![3, 1],
            config: SolverConfig {
                hessian: HessianKind::LimitedMemorySecant { memory: 4 },
                eta: 0.1 + 0.2,
                fault_alpha_scale: Some(1e-3),
                ..SolverConfig::default()
            },
            ..RunSpec::default()
        };
        let text = spec.to_json();
        let back = RunSpec::from_json(&text).unwrap();
        assert_eq!(back, spec);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn missing_keys_take_defaults() {
        let spec = RunSpec::from_json(r#"{"problem": "rosenbrock-circle", "eta": 0.5}"#).unwrap();
        assert_eq!(spec.oracle, NoiseModel::Exact);
        assert_eq!(spec.seeds, vec![0]);
        assert_eq!(spec.config.eta, 0.5);
        assert_eq!(spec.config.beta, SolverConfig::default().beta);
    }

    #[test]
    fn unknown_and_misplaced_keys_are_rejected() {
        assert!(RunSpec::from_json(r#"{"problem": "x", "etaa": 0.5}"#).is_err());
        assert!(RunSpec::from_json(r#"{"problem": "x", "sigma": 0.1}"#).is_err());
        assert!(RunSpec::from_json(r#"{"problem": "x", "oracle": "gaussian"}"#).is_err());
        assert!(RunSpec::from_json(r#"{"problem": "x", "seed": 3}"#).is_err());
    }

    #[test]
    fn hessian_names() {
        assert_eq!(parse_hessian("lbfgs:7").unwrap(), HessianKind::LimitedMemorySecant { memory: 7 });
        assert_eq!(parse_hessian("bb").unwrap(), HessianKind::BarzilaiBorwein);
        assert!(parse_hessian("lbfgs:").is_err());
    }
}
