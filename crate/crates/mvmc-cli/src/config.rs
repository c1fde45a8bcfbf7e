//! Experiment configuration: TOML file parsing, validation, and environment
//! overrides.
//!
//! A config file has nested sections:
//!
//! ```toml
//! [data]                       # exclusive with [synthetic]
//! path = "dataset_dir"
//!
//! [synthetic]                  # generator settings, see `SyntheticSpec`
//! views = 4
//! samples = 400
//! labels = 5
//! rank = 8
//! informativeness = [0.9, 0.3, 0.3, 0.3]
//! seed = 7
//!
//! [experiment]
//! methods = ["ls", "ap", "bmc", "cmc", "amc"]
//! seeds = [1, 2, 3, 4, 5]
//! n_labeled_per_class = 20
//! output_dir = "out"
//!
//! [params]                     # fixed hyperparameters (optional)
//! lambda = 1.0
//! gamma = 3.0
//! eta = 0.01
//!
//! [search]                     # presence enables validation grid search
//! lambda = [0.1, 1.0]
//!
//! [kpca]                       # optional preprocessing
//! dim = 50
//! kernel = "rbf"
//! ```
//!
//! `MVMC_OUTPUT_DIR` and `MVMC_WORKERS` override the output directory and
//! worker count from the environment.

use std::path::PathBuf;

use serde::Deserialize;

use crate::error::{CliError, CliResult};
use crate::synth::SyntheticSpec;
use mvmc_core::{FusionMethod, HyperParams, KernelChoice, KpcaSettings, SearchGrids};

pub const ENV_OUTPUT_DIR: &str = "MVMC_OUTPUT_DIR";
pub const ENV_WORKERS: &str = "MVMC_WORKERS";

/// Where the experiment data comes from.
#[derive(Debug, Clone)]
pub enum DataSource {
    /// A dataset directory written by `synth` or by hand.
    Directory(PathBuf),
    /// In-process generation from a synthetic spec.
    Synthetic(SyntheticSpec),
}

/// Fully validated experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub source: DataSource,
    pub methods: Vec<FusionMethod>,
    pub seeds: Vec<u64>,
    /// Labeled samples drawn per label class and seed; 0 keeps the dataset
    /// directory's partition verbatim (directory sources only).
    pub n_labeled_per_class: usize,
    pub threshold: f64,
    /// Worker threads for (method, seed) jobs; 0 uses all cores.
    pub workers: usize,
    pub output_dir: PathBuf,
    /// Fixed hyperparameters, used when no grid search is configured.
    pub params: HyperParams,
    /// Grid search on the validation split; `None` runs with `params`.
    pub search: Option<SearchGrids>,
    pub kpca: Option<KpcaSettings>,
}

// --- raw TOML shape -------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    data: Option<RawData>,
    synthetic: Option<SyntheticSpec>,
    experiment: RawExperiment,
    params: Option<RawParams>,
    search: Option<RawSearch>,
    kpca: Option<RawKpca>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawData {
    path: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    methods: Vec<String>,
    seeds: Vec<u64>,
    #[serde(default)]
    n_labeled_per_class: usize,
    threshold: Option<f64>,
    workers: Option<usize>,
    output_dir: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    lambda: Option<f64>,
    gamma: Option<f64>,
    eta: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSearch {
    lambda: Option<Vec<f64>>,
    eta: Option<Vec<f64>>,
    gamma: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKpca {
    dim: usize,
    kernel: String,
    bandwidth: Option<f64>,
}

// --- loading --------------------------------------------------------------

/// Read, parse, validate, and apply environment overrides.
pub fn load_config(path: &std::path::Path) -> CliResult<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
    let mut config = parse_config(&text)?;
    apply_env_overrides(&mut config, |name| std::env::var(name).ok())?;
    Ok(config)
}

/// Parse and validate a config document.
pub fn parse_config(text: &str) -> CliResult<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text)
        .map_err(|e| CliError::config(format!("config parse failed: {e}")))?;
    validate(raw)
}

/// Apply `MVMC_OUTPUT_DIR` / `MVMC_WORKERS` from an environment lookup.
pub fn apply_env_overrides(
    config: &mut ExperimentConfig,
    lookup: impl Fn(&str) -> Option<String>,
) -> CliResult<()> {
    if let Some(dir) = lookup(ENV_OUTPUT_DIR) {
        if dir.is_empty() {
            return Err(CliError::config(format!("{ENV_OUTPUT_DIR} is empty")));
        }
        config.output_dir = PathBuf::from(dir);
    }
    if let Some(workers) = lookup(ENV_WORKERS) {
        config.workers = workers.parse().map_err(|_| {
            CliError::config(format!("{ENV_WORKERS} must be a nonnegative integer, got '{workers}'"))
        })?;
    }
    Ok(())
}

fn validate(raw: RawConfig) -> CliResult<ExperimentConfig> {
    let source = match (raw.data, raw.synthetic) {
        (Some(data), None) => DataSource::Directory(data.path),
        (None, Some(spec)) => {
            spec.validate().map_err(CliError::config)?;
            DataSource::Synthetic(spec)
        }
        (Some(_), Some(_)) => {
            return Err(CliError::config(
                "[data] and [synthetic] are mutually exclusive",
            ))
        }
        (None, None) => {
            return Err(CliError::config(
                "config needs a [data] or a [synthetic] section",
            ))
        }
    };

    let exp = raw.experiment;
    if exp.methods.is_empty() {
        return Err(CliError::config("experiment.methods must not be empty"));
    }
    let mut methods = Vec::with_capacity(exp.methods.len());
    for name in &exp.methods {
        let method = FusionMethod::parse(name).map_err(|e| CliError::config(e.to_string()))?;
        if methods.contains(&method) {
            return Err(CliError::config(format!("duplicate method '{name}'")));
        }
        methods.push(method);
    }
    if exp.seeds.is_empty() {
        return Err(CliError::config("experiment.seeds must not be empty"));
    }
    let mut seen = std::collections::HashSet::new();
    for &s in &exp.seeds {
        if !seen.insert(s) {
            return Err(CliError::config(format!("duplicate seed {s}")));
        }
    }
    if matches!(source, DataSource::Synthetic(_)) && exp.n_labeled_per_class == 0 {
        return Err(CliError::config(
            "synthetic runs need n_labeled_per_class >= 1 \
             (0 is only valid with a dataset directory's own partition)",
        ));
    }
    let threshold = exp.threshold.unwrap_or(mvmc_core::DEFAULT_THRESHOLD);
    if !threshold.is_finite() {
        return Err(CliError::config("experiment.threshold must be finite"));
    }

    let defaults = HyperParams::default();
    let params = match raw.params {
        None => defaults,
        Some(p) => HyperParams {
            lambda: p.lambda.unwrap_or(defaults.lambda),
            gamma: p.gamma.unwrap_or(defaults.gamma),
            eta: p.eta.unwrap_or(defaults.eta),
        },
    };
    check_scalar("params.lambda", params.lambda, 0.0)?;
    check_positive("params.gamma", params.gamma)?;
    check_scalar("params.eta", params.eta, 0.0)?;

    let uses_ap = methods.contains(&FusionMethod::Ap);
    let search = match raw.search {
        None => None,
        Some(s) => {
            let grid_defaults = SearchGrids::default();
            let grids = SearchGrids {
                lambda: s.lambda.unwrap_or(grid_defaults.lambda),
                eta: s.eta.unwrap_or(grid_defaults.eta),
                gamma: s.gamma.unwrap_or(grid_defaults.gamma),
            };
            check_grid("search.lambda", &grids.lambda, 0.0)?;
            check_grid("search.eta", &grids.eta, 0.0)?;
            check_grid("search.gamma", &grids.gamma, f64::MIN_POSITIVE)?;
            if uses_ap && grids.eta.iter().any(|&e| e == 0.0) {
                return Err(CliError::config(
                    "search.eta contains 0 but the ap method requires eta > 0",
                ));
            }
            Some(grids)
        }
    };
    if uses_ap && search.is_none() && params.eta == 0.0 {
        return Err(CliError::config("the ap method requires params.eta > 0"));
    }

    let kpca = match raw.kpca {
        None => None,
        Some(k) => {
            if k.dim == 0 {
                return Err(CliError::config("kpca.dim must be at least 1"));
            }
            let kernel = match k.kernel.as_str() {
                "linear" => {
                    if k.bandwidth.is_some() {
                        return Err(CliError::config(
                            "kpca.bandwidth only applies to the rbf kernel",
                        ));
                    }
                    KernelChoice::Linear
                }
                "rbf" => {
                    if let Some(b) = k.bandwidth {
                        if !(b > 0.0) || !b.is_finite() {
                            return Err(CliError::config(format!(
                                "kpca.bandwidth must be finite and positive, got {b}"
                            )));
                        }
                    }
                    KernelChoice::Rbf {
                        bandwidth: k.bandwidth,
                    }
                }
                other => {
                    return Err(CliError::config(format!(
                        "unknown kpca.kernel '{other}' (expected 'linear' or 'rbf')"
                    )))
                }
            };
            Some(KpcaSettings { dim: k.dim, kernel })
        }
    };

    Ok(ExperimentConfig {
        source,
        methods,
        seeds: exp.seeds,
        n_labeled_per_class: exp.n_labeled_per_class,
        threshold,
        workers: exp.workers.unwrap_or(0),
        output_dir: exp.output_dir,
        params,
        search,
        kpca,
    })
}

fn check_scalar(name: &str, value: f64, min: f64) -> CliResult<()> {
    if !value.is_finite() || value < min {
        return Err(CliError::config(format!(
            "{name} must be finite and >= {min}, got {value}"
        )));
    }
    Ok(())
}

fn check_positive(name: &str, value: f64) -> CliResult<()> {
    if !value.is_finite() || value <= 0.0 {
        return Err(CliError::config(format!(
            "{name} must be finite and positive, got {value}"
        )));
    }
    Ok(())
}

fn check_grid(name: &str, values: &[f64], min: f64) -> CliResult<()> {
    if values.is_empty() {
        return Err(CliError::config(format!("{name} must not be empty")));
    }
    for &v in values {
        if !v.is_finite() || v < min {
            return Err(CliError::config(format!(
                "{name} values must be finite and >= {min}, got {v}"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"
        [synthetic]
        views = 4
        samples = 400
        labels = 5
        rank = 8
        noise_sigma = 1.0
        informativeness = [0.9, 0.3, 0.3, 0.3]
        missing_feature_rate = 0.0
        test_fraction = 0.5
        seed = 7

        [experiment]
        methods = ["ls", "ap", "bmc", "cmc", "amc"]
        seeds = [1, 2, 3, 4, 5]
        n_labeled_per_class = 20
        threshold = 0.5
        workers = 3
        output_dir = "out"

        [params]
        lambda = 0.1
        gamma = 3.0
        eta = 0.01

        [search]
        lambda = [0.1, 1.0]

        [kpca]
        dim = 10
        kernel = "rbf"
        bandwidth = 2.5
    "#;

    #[test]
    fn full_config_parses() {
        let cfg = parse_config(FULL).unwrap();
        assert!(matches!(cfg.source, DataSource::Synthetic(_)));
        assert_eq!(cfg.methods.len(), 5);
        assert_eq!(cfg.seeds, vec![1, 2, 3, 4, 5]);
        assert_eq!(cfg.n_labeled_per_class, 20);
        assert_eq!(cfg.workers, 3);
        assert_eq!(cfg.params.lambda, 0.1);
        let search = cfg.search.unwrap();
        assert_eq!(search.lambda, vec![0.1, 1.0]);
        // Omitted grids fall back to the defaults.
        assert_eq!(search.gamma, SearchGrids::default().gamma);
        assert_eq!(
            cfg.kpca,
            Some(KpcaSettings {
                dim: 10,
                kernel: KernelChoice::Rbf {
                    bandwidth: Some(2.5)
                }
            })
        );
    }

    const MINIMAL: &str = r#"
        [data]
        path = "somewhere"

        [experiment]
        methods = ["amc"]
        seeds = [1]
        output_dir = "out"
    "#;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert!(matches!(cfg.source, DataSource::Directory(_)));
        assert_eq!(cfg.n_labeled_per_class, 0, "directory partition verbatim");
        assert_eq!(cfg.threshold, 0.5);
        assert_eq!(cfg.workers, 0);
        assert_eq!(cfg.params, HyperParams::default());
        assert!(cfg.search.is_none());
        assert!(cfg.kpca.is_none());
    }

    #[test]
    fn missing_source_is_rejected() {
        let text = r#"
            [experiment]
            methods = ["amc"]
            seeds = [1]
            output_dir = "out"
        "#;
        let err = parse_config(text).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn both_sources_are_rejected() {
        let text = r#"
            [data]
            path = "somewhere"

            [synthetic]
            views = 2
            samples = 40
            labels = 2
            rank = 4
            informativeness = [0.9, 0.3]
            seed = 1

            [experiment]
            methods = ["amc"]
            seeds = [1]
            n_labeled_per_class = 3
            output_dir = "out"
        "#;
        assert!(parse_config(text).is_err());
    }

    #[test]
    fn unknown_method_is_rejected() {
        let text = MINIMAL.replace("\"amc\"", "\"svm\"");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("svm"));
    }

    #[test]
    fn duplicate_methods_and_seeds_are_rejected() {
        let text = MINIMAL.replace("[\"amc\"]", "[\"amc\", \"amc\"]");
        assert!(parse_config(&text).is_err());
        let text = MINIMAL.replace("seeds = [1]", "seeds = [1, 1]");
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("output_dir", "typo_dir");
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn synthetic_without_labeled_count_is_rejected() {
        let text = r#"
            [synthetic]
            views = 2
            samples = 40
            labels = 2
            rank = 4
            informativeness = [0.9, 0.3]
            seed = 1

            [experiment]
            methods = ["amc"]
            seeds = [1]
            output_dir = "out"
        "#;
        let err = parse_config(text).unwrap_err();
        assert!(err.to_string().contains("n_labeled_per_class"));
    }

    #[test]
    fn ap_with_zero_eta_is_rejected() {
        let text = r#"
            [data]
            path = "somewhere"

            [experiment]
            methods = ["ap"]
            seeds = [1]
            output_dir = "out"

            [params]
            eta = 0.0
        "#;
        assert!(parse_config(text).is_err());
    }

    #[test]
    fn env_overrides_apply() {
        let mut cfg = parse_config(MINIMAL).unwrap();
        apply_env_overrides(&mut cfg, |name| match name {
            ENV_OUTPUT_DIR => Some("elsewhere".to_string()),
            ENV_WORKERS => Some("7".to_string()),
            _ => None,
        })
        .unwrap();
        assert_eq!(cfg.output_dir, PathBuf::from("elsewhere"));
        assert_eq!(cfg.workers, 7);

        let bad = apply_env_overrides(&mut cfg, |name| {
            (name == ENV_WORKERS).then(|| "many".to_string())
        });
        assert_eq!(bad.unwrap_err().exit_code(), 2);
    }
}
