//! Model kinds, serializable priors, data-driven defaults and overrides.

use std::fmt;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};

use super::{DiagGmmPrior, GmmPrior, LcaPrior, MomPrior, SbmPrior};
use crate::data::{ContinuousData, Dataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Sbm,
    Gmm,
    DiagGmm,
    Lca,
    Mom,
    Combined,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Sbm => "sbm",
            ModelKind::Gmm => "gmm",
            ModelKind::DiagGmm => "diag_gmm",
            ModelKind::Lca => "lca",
            ModelKind::Mom => "mom",
            ModelKind::Combined => "combined",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "sbm" => ModelKind::Sbm,
            "gmm" => ModelKind::Gmm,
            "diag_gmm" | "diag-gmm" | "diaggmm" => ModelKind::DiagGmm,
            "lca" => ModelKind::Lca,
            "mom" | "multinomial" => ModelKind::Mom,
            "combined" => ModelKind::Combined,
            other => return Err(Error::config(format!("unknown model {other:?}"))),
        })
    }
}

/// Hyperparameters of any model, with data-driven values materialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelPrior {
    Sbm(SbmPrior),
    Gmm(GmmPrior),
    DiagGmm(DiagGmmPrior),
    Lca(LcaPrior),
    Mom(MomPrior),
    Combined { views: Vec<NamedPrior> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedPrior {
    pub name: String,
    pub prior: ModelPrior,
}

impl ModelPrior {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelPrior::Sbm(_) => ModelKind::Sbm,
            ModelPrior::Gmm(_) => ModelKind::Gmm,
            ModelPrior::DiagGmm(_) => ModelKind::DiagGmm,
            ModelPrior::Lca(_) => ModelKind::Lca,
            ModelPrior::Mom(_) => ModelKind::Mom,
            ModelPrior::Combined { .. } => ModelKind::Combined,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelPrior::Sbm(p) => p.validate(),
            ModelPrior::Gmm(p) => p.validate(),
            ModelPrior::DiagGmm(p) => p.validate(),
            ModelPrior::Lca(p) => p.validate(),
            ModelPrior::Mom(p) => p.validate(),
            ModelPrior::Combined { views } => views.iter().try_for_each(|v| v.prior.validate()),
        }
    }

    /// Applies `key=value` overrides; combined priors take `view.key=value`.
    pub fn apply(&mut self, overrides: &Overrides) -> Result<()> {
        for (key, value) in &overrides.0 {
            self.set(key, value)?;
        }
        self.validate()
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let scalar = || -> Result<f64> {
            value
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::config(format!("{key}: expected a number, got {value:?}")))
        };
        let unknown = |kind: ModelKind| Error::config(format!("unknown {kind} hyperparameter {key:?}"));
        match self {
            ModelPrior::Sbm(p) => match key {
                "a0" => p.a0 = scalar()?,
                "b0" => p.b0 = scalar()?,
                "directed" => {
                    p.directed = value
                        .parse()
                        .map_err(|_| Error::config(format!("directed: expected true or false, got {value:?}")))?
                }
                _ => return Err(unknown(ModelKind::Sbm)),
            },
            ModelPrior::Gmm(p) => {
                let dim = p.p();
                match key {
                    "tau" => p.tau = scalar()?,
                    "n0" => p.n0 = scalar()?,
                    "mu" => p.mu = vector(key, value, dim)?,
                    "epsilon" => {
                        let diag = vector(key, value, dim)?;
                        p.epsilon = (0..dim)
                            .map(|a| (0..dim).map(|b| if a == b { diag[a] } else { 0.0 }).collect())
                            .collect();
                    }
                    _ => return Err(unknown(ModelKind::Gmm)),
                }
            }
            ModelPrior::DiagGmm(p) => {
                let dim = p.mu.len();
                match key {
                    "tau" => p.tau = scalar()?,
                    "kappa" => p.kappa = scalar()?,
                    "mu" => p.mu = vector(key, value, dim)?,
                    "beta" => p.beta = vector(key, value, dim)?,
                    _ => return Err(unknown(ModelKind::DiagGmm)),
                }
            }
            ModelPrior::Lca(p) => match key {
                "beta" => p.beta = scalar()?,
                _ => return Err(unknown(ModelKind::Lca)),
            },
            ModelPrior::Mom(p) => match key {
                "beta" => p.beta = scalar()?,
                _ => return Err(unknown(ModelKind::Mom)),
            },
            ModelPrior::Combined { views } => {
                let (view, rest) = key
                    .split_once('.')
                    .ok_or_else(|| Error::config(format!("combined overrides are view.key=value, got {key:?}")))?;
                let target = views
                    .iter_mut()
                    .find(|v| v.name == view)
                    .ok_or_else(|| Error::config(format!("unknown view {view:?}")))?;
                target.prior.set(rest, value)?;
            }
        }
        Ok(())
    }
}

/// A scalar repeated `dim` times, or a comma-separated list of `dim` numbers.
fn vector(key: &str, value: &str, dim: usize) -> Result<Vec<f64>> {
    let parts: Vec<f64> = value
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::config(format!("{key}: expected numbers, got {value:?}")))?;
    match parts.len() {
        1 => Ok(vec![parts[0]; dim]),
        l if l == dim => Ok(parts),
        l => Err(Error::config(format!("{key}: expected 1 or {dim} values, got {l}"))),
    }
}

/// Ordered `key=value` hyperparameter overrides.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides(pub Vec<(String, String)>);

impl Overrides {
    pub fn parse<S: AsRef<str>>(items: &[S]) -> Result<Self> {
        items
            .iter()
            .map(|s| {
                let s = s.as_ref();
                s.split_once('=')
                    .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                    .ok_or_else(|| Error::config(format!("override must be key=value, got {s:?}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Overrides)
    }
}

/// The model a dataset implies when none is requested.
pub fn detect_kind(data: &Dataset) -> ModelKind {
    match data {
        Dataset::Graph(_) => ModelKind::Sbm,
        Dataset::Continuous(_) => ModelKind::Gmm,
        Dataset::Categorical(_) => ModelKind::Lca,
        Dataset::Counts(_) => ModelKind::Mom,
        Dataset::Views(_) => ModelKind::Combined,
    }
}

/// Column variances with zero entries floored at `1e-12` of their mean;
/// all ones when the data carry no spread at all.
fn floored_variances(data: &ContinuousData) -> Vec<f64> {
    let var = data.column_variances();
    let mean = var.iter().sum::<f64>() / var.len() as f64;
    if !(mean > 0.0) {
        warn!("data have no spread; prior variances set to 1");
        return vec![1.0; var.len()];
    }
    let floor = 1e-12 * mean;
    var.into_iter()
        .map(|v| {
            if v < floor {
                warn!("zero-variance column; prior variance floored at {floor:e}");
                floor
            } else {
                v
            }
        })
        .collect()
}

/// Non-informative or data-driven default prior for `kind` on `data`.
pub fn default_prior(kind: ModelKind, data: &Dataset) -> Result<ModelPrior> {
    if data.n() == 0 {
        return Err(Error::data("dataset has no objects"));
    }
    let mismatch = || Error::config(format!("model {kind} cannot be fitted on {} data", data.kind_name()));
    Ok(match (kind, data) {
        (ModelKind::Sbm, Dataset::Graph(g)) => ModelPrior::Sbm(SbmPrior {
            a0: 1.0,
            b0: 1.0,
            directed: g.is_directed(),
        }),
        (ModelKind::Gmm, Dataset::Continuous(d)) => {
            let p = d.p();
            let var = floored_variances(d);
            ModelPrior::Gmm(GmmPrior {
                mu: d.column_means(),
                tau: 0.01,
                n0: p as f64,
                epsilon: (0..p)
                    .map(|a| (0..p).map(|b| if a == b { 0.1 * var[a] } else { 0.0 }).collect())
                    .collect(),
            })
        }
        (ModelKind::DiagGmm, Dataset::Continuous(d)) => {
            let var = floored_variances(d);
            let mean = var.iter().sum::<f64>() / var.len() as f64;
            ModelPrior::DiagGmm(DiagGmmPrior {
                mu: d.column_means(),
                tau: 0.01,
                kappa: 1.0,
                beta: vec![mean; d.p()],
            })
        }
        (ModelKind::Lca, Dataset::Categorical(_)) => ModelPrior::Lca(LcaPrior { beta: 1.0 }),
        (ModelKind::Mom, Dataset::Counts(_)) => ModelPrior::Mom(MomPrior { beta: 1.0 }),
        (ModelKind::Combined, Dataset::Views(views)) => ModelPrior::Combined {
            views: views
                .iter()
                .map(|(name, d)| {
                    Ok(NamedPrior {
                        name: name.clone(),
                        prior: default_prior(detect_kind(d), d)?,
                    })
                })
                .collect::<Result<_>>()?,
        },
        _ => return Err(mismatch()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cont(rows: &[Vec<f64>]) -> Dataset {
        Dataset::Continuous(ContinuousData::from_rows(rows).unwrap())
    }

    #[test]
    fn standardized_data_gives_tenth_identity() {
        // Both columns have unbiased variance 1.
        let d = cont(&[vec![-1.0, 1.0], vec![0.0, 0.0], vec![1.0, -1.0]]);
        let ModelPrior::Gmm(p) = default_prior(ModelKind::Gmm, &d).unwrap() else {
            unreachable!()
        };
        assert_eq!(p.tau, 0.01);
        assert_eq!(p.n0, 2.0);
        assert_eq!(p.mu, vec![0.0, 0.0]);
        for a in 0..2 {
            for b in 0..2 {
                let want = if a == b { 0.1 } else { 0.0 };
                assert!((p.epsilon[a][b] - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn constant_column_is_floored() {
        let d = cont(&[vec![1.0, 5.0], vec![3.0, 5.0], vec![2.0, 5.0]]);
        let ModelPrior::Gmm(p) = default_prior(ModelKind::Gmm, &d).unwrap() else {
            unreachable!()
        };
        assert!(p.epsilon[1][1] > 0.0);
        assert!(p.validate().is_ok());
        let single = cont(&[vec![4.0]]);
        let ModelPrior::Gmm(p) = default_prior(ModelKind::Gmm, &single).unwrap() else {
            unreachable!()
        };
        assert_eq!(p.epsilon, vec![vec![0.1]]);
    }

    #[test]
    fn diag_defaults_use_mean_variance() {
        let d = cont(&[vec![0.0, 0.0], vec![2.0, 4.0]]);
        let ModelPrior::DiagGmm(p) = default_prior(ModelKind::DiagGmm, &d).unwrap() else {
            unreachable!()
        };
        // Variances 2 and 8.
        assert_eq!(p.beta, vec![5.0, 5.0]);
        assert_eq!(p.kappa, 1.0);
    }

    #[test]
    fn overrides_apply_and_reject_unknown_keys() {
        let d = cont(&[vec![0.0], vec![2.0]]);
        let mut p = default_prior(ModelKind::Gmm, &d).unwrap();
        p.apply(&Overrides::parse(&["tau=0.001"]).unwrap()).unwrap();
        let ModelPrior::Gmm(g) = &p else { unreachable!() };
        assert_eq!(g.tau, 0.001);
        assert!(p.apply(&Overrides::parse(&["zeta=1"]).unwrap()).is_err());
        assert!(p.apply(&Overrides::parse(&["tau=-1"]).unwrap()).is_err());
        assert!(Overrides::parse(&["tau"]).is_err());
    }

    #[test]
    fn kind_mismatch_is_config_error() {
        let d = cont(&[vec![0.0]]);
        assert!(matches!(default_prior(ModelKind::Sbm, &d), Err(Error::Config(_))));
    }

    #[test]
    fn prior_serde_round_trip() {
        let p = ModelPrior::Combined {
            views: vec![NamedPrior {
                name: "x".into(),
                prior: ModelPrior::Sbm(SbmPrior {
                    a0: 1.0,
                    b0: 2.0,
                    directed: true,
                }),
            }],
        };
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<ModelPrior>(&s).unwrap(), p);
    }
}
