//! TOML model and contract files.

use nalgebra::{DMatrix, DVector};
use phasereserve::distributions::{FractionalClock, InhomogeneityTransform, PhaseModel};
use phasereserve::matrix::{SubIntensity, DEFAULT_REPAIR_TOLERANCE};
use phasereserve::reserve::{Contract, Horizon};
use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformSpec {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameter: Option<f64>,
}

/// On-disk model description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    #[serde(default = "one")]
    pub alpha: Spanned<f64>,
    pub pi: Spanned<Vec<f64>>,
    #[serde(rename = "T")]
    pub t: Spanned<Vec<Vec<f64>>>,
    pub transform: Spanned<TransformSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repair_tolerance: Option<f64>,
}

fn one() -> Spanned<f64> {
    Spanned::new(0..0, 1.0)
}

/// A parsed and validated model.
#[derive(Debug, Clone)]
pub struct Model {
    pub phases: PhaseModel,
    pub transform: InhomogeneityTransform,
    pub clock: FractionalClock,
}

fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn anchored<T>(src: &str, path: &str, field: &Spanned<T>, msg: impl std::fmt::Display) -> CliError {
    let start = field.span().start;
    if start == 0 && field.span().end == 0 {
        CliError::Input(format!("{path}: {msg}"))
    } else {
        CliError::Input(format!("{path}:{}: {msg}", line_of(src, start)))
    }
}

fn parse_toml<T: for<'de> Deserialize<'de>>(src: &str, path: &str) -> Result<T, CliError> {
    toml::from_str(src).map_err(|e| match e.span() {
        Some(s) => CliError::Input(format!("{path}:{}: {}", line_of(src, s.start), e.message())),
        None => CliError::Input(format!("{path}: {}", e.message())),
    })
}

pub fn transform_from_spec(spec: &TransformSpec) -> Result<InhomogeneityTransform, String> {
    let need = || spec.parameter.ok_or_else(|| format!("family '{}' needs a parameter", spec.family));
    let g = match spec.family.as_str() {
        "identity" => {
            if spec.parameter.is_some() {
                return Err("family 'identity' takes no parameter".into());
            }
            Ok(InhomogeneityTransform::Identity)
        }
        "power-weibull" => InhomogeneityTransform::power_weibull(need()?),
        "pareto-exp" => InhomogeneityTransform::pareto_exp(need()?),
        "gompertz-log" => InhomogeneityTransform::gompertz_log(need()?),
        other => {
            return Err(format!(
                "unknown transform family '{other}' (expected identity, power-weibull, pareto-exp or gompertz-log)"
            ))
        }
    };
    g.map_err(|e| e.to_string())
}

impl ModelFile {
    pub fn parse(src: &str, path: &str) -> Result<Model, CliError> {
        let file: ModelFile = parse_toml(src, path)?;
        file.build(src, path)
    }

    fn build(&self, src: &str, path: &str) -> Result<Model, CliError> {
        let clock = FractionalClock::new(*self.alpha.get_ref()).map_err(|e| anchored(src, path, &self.alpha, e))?;
        let rows = self.t.get_ref();
        let p = rows.len();
        if p == 0 || rows.iter().any(|r| r.len() != p) {
            return Err(anchored(src, path, &self.t, "T must be a nonempty square matrix given as rows"));
        }
        let tol = self.repair_tolerance.unwrap_or(DEFAULT_REPAIR_TOLERANCE);
        let raw = DMatrix::from_fn(p, p, |i, j| rows[i][j]);
        let sub = SubIntensity::new(raw, tol).map_err(|e| anchored(src, path, &self.t, e))?;
        let pi = DVector::from_column_slice(self.pi.get_ref());
        let phases = PhaseModel::new(pi, sub).map_err(|e| anchored(src, path, &self.pi, e))?;
        let transform = transform_from_spec(self.transform.get_ref()).map_err(|e| anchored(src, path, &self.transform, e))?;
        Ok(Model {
            phases,
            transform,
            clock,
        })
    }

    /// Describes `model`; custom transforms have no file form.
    #[cfg(test)]
    pub fn from_model(model: &Model, repair_tolerance: Option<f64>) -> Result<Self, CliError> {
        let g = &model.transform;
        if matches!(g, InhomogeneityTransform::Custom(_)) {
            return Err(CliError::Input("custom transforms cannot be written to a model file".into()));
        }
        let t = model.phases.sub_intensity().matrix();
        let p = t.nrows();
        Ok(Self {
            alpha: Spanned::new(0..0, model.clock.alpha()),
            pi: Spanned::new(0..0, model.phases.pi().iter().copied().collect()),
            t: Spanned::new(0..0, (0..p).map(|i| (0..p).map(|j| t[(i, j)]).collect()).collect()),
            transform: Spanned::new(
                0..0,
                TransformSpec {
                    family: g.name().to_string(),
                    parameter: g.parameter(),
                },
            ),
            repair_tolerance,
        })
    }

    #[cfg(test)]
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("model files always serialize")
    }
}

/// Term of a contract: a number or the string "inf".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HorizonSpec {
    Number(f64),
    Token(String),
}

/// On-disk contract description. Omitted payment blocks are zero.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractFile {
    pub a: Spanned<Vec<f64>>,
    #[serde(default)]
    pub c: Option<Spanned<Vec<f64>>>,
    #[serde(rename = "B", default)]
    pub b_jump: Option<Spanned<Vec<Vec<f64>>>>,
    #[serde(default)]
    pub b: Option<Spanned<Vec<f64>>>,
    pub r: Spanned<f64>,
    pub n: Spanned<HorizonSpec>,
}

impl ContractFile {
    pub fn parse(src: &str, path: &str, p: usize) -> Result<Contract, CliError> {
        let f: ContractFile = parse_toml(src, path)?;
        let vector = |v: &Spanned<Vec<f64>>, name: &str| {
            if v.get_ref().len() == p {
                Ok(DVector::from_column_slice(v.get_ref()))
            } else {
                Err(anchored(src, path, v, format!("{name} has {} entries, the model has {p} phases", v.get_ref().len())))
            }
        };
        let a = vector(&f.a, "a")?;
        let c = f.c.as_ref().map(|v| vector(v, "c")).transpose()?.unwrap_or_else(|| DVector::zeros(p));
        let b = f.b.as_ref().map(|v| vector(v, "b")).transpose()?.unwrap_or_else(|| DVector::zeros(p));
        let b_jump = match &f.b_jump {
            None => DMatrix::zeros(p, p),
            Some(m) => {
                let rows = m.get_ref();
                if rows.len() != p || rows.iter().any(|r| r.len() != p) {
                    return Err(anchored(src, path, m, format!("B must be {p}x{p}")));
                }
                DMatrix::from_fn(p, p, |i, j| rows[i][j])
            }
        };
        let horizon = match f.n.get_ref() {
            HorizonSpec::Number(x) => Horizon::Finite(*x),
            HorizonSpec::Token(s) if s == "inf" => Horizon::Infinite,
            HorizonSpec::Token(s) => return Err(anchored(src, path, &f.n, format!("n must be a number or \"inf\", got \"{s}\""))),
        };
        Contract::new(a, c, b_jump, b, *f.r.get_ref(), horizon).map_err(|e| anchored(src, path, &f.r, e))
    }
}

pub fn read(path: &std::path::Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}
