//! End-to-end fitting: prior, model, optimizer, hierarchy and MAP estimates
//! gathered into one serializable result.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::hierarchy::{build_path, HierarchyPath};
use crate::icl::IclValue;
use crate::io::Loaded;
use crate::models::{default_prior, AnyModel, ModelKind, ModelParams, ModelPrior, NamedParams, NamedPrior, ObservationModel, Overrides};
use crate::optim::{genetic_ga, hybrid_ga, multistart, GaParams};
use crate::partition::Partition;

pub const MAP_CONVENTION: &str = "posterior mode when every Beta/Dirichlet parameter exceeds 1, posterior mean otherwise";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Hybrid,
    Genetic,
    Multistart,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Hybrid => "hybrid",
            Algorithm::Genetic => "genetic",
            Algorithm::Multistart => "multistart",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hybrid" => Ok(Algorithm::Hybrid),
            "genetic" => Ok(Algorithm::Genetic),
            "multistart" | "multi_start" | "multi-start" => Ok(Algorithm::Multistart),
            _ => Err(Error::config(format!("unknown algorithm {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub algorithm: Algorithm,
    pub alpha: f64,
    /// Population settings; `k_init` and `seed` also drive multistart.
    pub ga: GaParams,
    pub nb_start: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            algorithm: Algorithm::Hybrid,
            alpha: 1.0,
            ga: GaParams::default(),
            nb_start: 10,
        }
    }
}

/// Shape and labels of the fitted data, enough to read the estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataInfo {
    pub kind: String,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub columns: Vec<String>,
    /// Modality labels per categorical column, in code order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub modalities: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directed: Option<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub views: Vec<NamedDataInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedDataInfo {
    pub name: String,
    pub info: DataInfo,
}

impl DataInfo {
    pub fn describe(data: &Dataset) -> DataInfo {
        let mut info = DataInfo {
            kind: data.kind_name().to_string(),
            n: data.n(),
            columns: Vec::new(),
            modalities: Vec::new(),
            directed: None,
            views: Vec::new(),
        };
        match data {
            Dataset::Graph(g) => info.directed = Some(g.is_directed()),
            Dataset::Continuous(d) => info.columns = d.names.clone(),
            Dataset::Categorical(d) => {
                info.columns = d.names.clone();
                info.modalities = d.modalities.clone();
            }
            Dataset::Counts(d) => info.columns = d.names.clone(),
            Dataset::Views(v) => {
                info.views = v
                    .iter()
                    .map(|(name, d)| NamedDataInfo {
                        name: name.clone(),
                        info: DataInfo::describe(d),
                    })
                    .collect()
            }
        }
        info
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub version: String,
    pub seed: u64,
    pub config: FitConfig,
    pub model: ModelKind,
    /// The prior actually used, data-driven values included.
    pub prior: ModelPrior,
    pub map_convention: String,
    pub n: usize,
    pub k: usize,
    pub labels: Vec<usize>,
    pub icl: IclValue,
    pub alpha: f64,
    pub params: ModelParams,
    pub hierarchy: HierarchyPath,
    /// Best total ICL after each generation; a single value for multistart.
    pub history: Vec<f64>,
    pub data: DataInfo,
}

impl FitResult {
    pub fn partition(&self) -> Partition {
        Partition::from_labels(self.labels.clone())
    }

    /// Labels of the level with `k` clusters on the hierarchy.
    pub fn cut(&self, k: usize) -> Result<Vec<usize>> {
        Ok(self.hierarchy.cut(k)?.into_labels())
    }

    /// MAP estimates of the whole model, or of one view of a combined model.
    pub fn coef(&self, view: Option<&str>) -> Result<ModelParams> {
        match (view, &self.params) {
            (None, p) => Ok(p.clone()),
            (Some(name), ModelParams::Combined { views }) => views
                .iter()
                .find(|v| v.name == name)
                .map(|v| v.params.clone())
                .ok_or_else(|| {
                    let known: Vec<&str> = views.iter().map(|v| v.name.as_str()).collect();
                    Error::config(format!("unknown view {name:?}; views are {known:?}"))
                }),
            (Some(_), _) => Err(Error::config("views exist only for combined models")),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<FitResult> {
        let r: FitResult = serde_json::from_str(s)?;
        if r.labels.len() != r.n || r.hierarchy.base.n() != r.n {
            return Err(Error::data("fit result labels do not match its object count"));
        }
        Ok(r)
    }
}

/// Default prior for a loaded dataset (per view for combined data), with
/// overrides applied and validated.
pub fn resolve_prior(loaded: &Loaded, overrides: &Overrides) -> Result<ModelPrior> {
    let mut prior = match (&loaded.dataset, loaded.kind) {
        (Dataset::Views(views), ModelKind::Combined) if views.len() == loaded.view_kinds.len() => ModelPrior::Combined {
            views: views
                .iter()
                .zip(&loaded.view_kinds)
                .map(|((name, d), &k)| {
                    Ok(NamedPrior {
                        name: name.clone(),
                        prior: default_prior(k, d)?,
                    })
                })
                .collect::<Result<_>>()?,
        },
        (d, k) => default_prior(k, d)?,
    };
    prior.apply(overrides)?;
    prior.validate()?;
    Ok(prior)
}

/// Runs the configured optimizer and assembles the result.
pub fn run_fit(data: &Dataset, prior: ModelPrior, config: &FitConfig) -> Result<FitResult> {
    config.ga.validate()?;
    if !(config.alpha > 0.0 && config.alpha.is_finite()) {
        return Err(Error::config(format!("alpha must be positive, got {}", config.alpha)));
    }
    if data.n() == 0 {
        return Err(Error::data("dataset has no objects"));
    }
    let info = DataInfo::describe(data);
    let model = AnyModel::build(prior.clone(), data.clone())?;
    let (state, history) = match config.algorithm {
        Algorithm::Hybrid => {
            let out = hybrid_ga(&model, &config.ga, config.alpha)?;
            (out.best, out.history)
        }
        Algorithm::Genetic => {
            let out = genetic_ga(&model, &config.ga, config.alpha)?;
            (out.best, out.history)
        }
        Algorithm::Multistart => {
            let s = multistart(&model, config.ga.k_init, config.nb_start, config.alpha, config.ga.seed)?;
            let h = vec![s.icl().total];
            (s, h)
        }
    };
    let hierarchy = build_path(&model, &state)?;
    let params = model.map_estimates(state.stats());
    Ok(FitResult {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.ga.seed,
        config: config.clone(),
        model: prior.kind(),
        prior,
        map_convention: MAP_CONVENTION.to_string(),
        n: data.n(),
        k: state.k(),
        labels: state.partition().labels().to_vec(),
        icl: state.icl(),
        alpha: config.alpha,
        params,
        hierarchy,
        history,
        data: info,
    })
}

/// Named parameters of each view, for reporting.
pub fn view_params(params: &ModelParams) -> Vec<&NamedParams> {
    match params {
        ModelParams::Combined { views } => views.iter().collect(),
        _ => Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ContinuousData, Graph};
    use crate::models::ModelKind;

    fn loaded(dataset: Dataset) -> Loaded {
        let kind = crate::models::detect_kind(&dataset);
        Loaded {
            dataset,
            kind,
            view_kinds: Vec::new(),
        }
    }

    fn quick() -> FitConfig {
        FitConfig {
            ga: GaParams {
                pop_size: 4,
                nb_max_gen: 2,
                k_init: 3,
                ..GaParams::default()
            },
            ..FitConfig::default()
        }
    }

    #[test]
    fn single_row_gives_one_cluster() {
        let d = Dataset::Continuous(ContinuousData::from_rows(&[vec![1.0, 2.0]]).unwrap());
        let prior = resolve_prior(&loaded(d.clone()), &Overrides::default()).unwrap();
        let r = run_fit(&d, prior, &quick()).unwrap();
        assert_eq!(r.k, 1);
        assert_eq!(r.icl.partition, 0.0);
        assert!(r.hierarchy.steps.is_empty());
    }

    #[test]
    fn result_round_trips_and_cuts() {
        let edges = vec![(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)];
        let d = Dataset::Graph(Graph::from_edges(6, edges, false).unwrap().0);
        let prior = resolve_prior(&loaded(d.clone()), &Overrides::default()).unwrap();
        for alg in [Algorithm::Hybrid, Algorithm::Genetic, Algorithm::Multistart] {
            let cfg = FitConfig { algorithm: alg, ..quick() };
            let r = run_fit(&d, prior.clone(), &cfg).unwrap();
            assert_eq!(r.model, ModelKind::Sbm);
            assert_eq!(r.cut(r.k).unwrap(), r.labels);
            assert_eq!(r.cut(1).unwrap(), vec![0; 6]);
            assert!(r.cut(r.k + 1).is_err());
            let back = FitResult::from_json(&r.to_json().unwrap()).unwrap();
            assert_eq!(back, r);
            let again = run_fit(&d, prior.clone(), &cfg).unwrap();
            assert_eq!(again.to_json().unwrap(), r.to_json().unwrap());
        }
    }

    #[test]
    fn coef_rejects_views_on_single_models() {
        let d = Dataset::Graph(Graph::from_edges(3, vec![(0, 1)], false).unwrap().0);
        let prior = resolve_prior(&loaded(d.clone()), &Overrides::default()).unwrap();
        let r = run_fit(&d, prior, &quick()).unwrap();
        assert!(r.coef(None).is_ok());
        assert!(matches!(r.coef(Some("x")), Err(Error::Config(_))));
    }

    #[test]
    fn bad_settings_are_config_errors() {
        let d = Dataset::Graph(Graph::from_edges(3, vec![(0, 1)], false).unwrap().0);
        let prior = resolve_prior(&loaded(d.clone()), &Overrides::default()).unwrap();
        let cfg = FitConfig { alpha: 0.0, ..quick() };
        assert!(matches!(run_fit(&d, prior.clone(), &cfg), Err(Error::Config(_))));
        let mut cfg = quick();
        cfg.ga.pop_size = 0;
        assert!(matches!(run_fit(&d, prior, &cfg), Err(Error::Config(_))));
        let bad = Overrides::parse(&["a0=-1"]).unwrap();
        assert!(matches!(resolve_prior(&loaded(d), &bad), Err(Error::Config(_))));
        assert!("annealing".parse::<Algorithm>().is_err());
    }
}
