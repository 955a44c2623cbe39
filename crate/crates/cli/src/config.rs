use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Flags shared by every subcommand. Each one overrides the matching key of
/// the `--config` file.
#[derive(Args, Debug, Default, Clone)]
pub struct Overrides {
    /// TOML configuration file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Hilbert-space dimension
    #[arg(long, global = true)]
    pub d: Option<usize>,
    /// Free eigenvalues p_1..p_{d-1}, comma separated
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub spectrum: Option<Vec<f64>>,
    /// Eigenframe: `identity` or `random:<seed>`
    #[arg(long, global = true)]
    pub frame: Option<String>,
    /// Total number of copies
    #[arg(long, global = true)]
    pub n: Option<u64>,
    #[arg(long = "n-grid", global = true, value_delimiter = ',')]
    pub n_grid: Option<Vec<u64>>,
    #[arg(long, global = true)]
    pub mu: Option<f64>,
    #[arg(long = "mu-list", global = true, value_delimiter = ',')]
    pub mu_list: Option<Vec<f64>>,
    /// Monte Carlo trials R
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    /// Master seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file (stdout when absent)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Instances for verify-lemma1
    #[arg(long, global = true)]
    pub samples: Option<u64>,
    /// Dimensions for verify-lemma1
    #[arg(long, global = true, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    /// Tail thresholds for verify-tails
    #[arg(long, global = true, value_delimiter = ',')]
    pub epsilon: Option<Vec<f64>>,
    /// Measure in the true eigenbasis (bench-qcrb baseline)
    #[arg(long = "known-basis", global = true)]
    pub known_basis: bool,
}

/// Contents of a `--config` file; every key optional.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub d: Option<usize>,
    pub spectrum: Option<Vec<f64>>,
    pub frame: Option<String>,
    pub n: Option<u64>,
    pub n_grid: Option<Vec<u64>>,
    pub mu: Option<f64>,
    pub mu_list: Option<Vec<f64>>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub samples: Option<u64>,
    pub dims: Option<Vec<usize>>,
    pub epsilon: Option<Vec<f64>>,
    pub known_basis: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("config: cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Validation(format!("config: {}: {e}", path.display())))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrameSpec {
    Identity,
    Random { seed: u64 },
}

impl FrameSpec {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let s = s.trim();
        if s == "identity" {
            return Ok(FrameSpec::Identity);
        }
        if let Some(rest) = s.strip_prefix("random:") {
            let seed = rest
                .parse()
                .map_err(|_| CliError::Validation(format!("frame: bad seed in `{s}` (expected random:<u64>)")))?;
            return Ok(FrameSpec::Random { seed });
        }
        Err(CliError::Validation(format!("frame: expected `identity` or `random:<seed>`, got `{s}`")))
    }
}

/// Fully resolved experiment configuration, embedded in every output file.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub command: String,
    pub d: usize,
    pub spectrum: Vec<f64>,
    pub frame: FrameSpec,
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "N_grid")]
    pub n_grid: Vec<u64>,
    pub mu: f64,
    pub mu_list: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    pub format: Format,
    pub samples: u64,
    pub dims: Vec<usize>,
    pub epsilon: Vec<f64>,
    pub known_basis: bool,
}

struct Defaults {
    spectrum: Vec<f64>,
    n: u64,
    n_grid: Vec<u64>,
    mu: f64,
    mu_list: Vec<f64>,
    trials: u64,
    format: Format,
    samples: u64,
    dims: Vec<usize>,
    epsilon: Vec<f64>,
}

fn defaults(command: &str) -> Defaults {
    let trials = match command {
        "sweep-mu" | "verify-tails" => locc_spectrum::bench::DEFAULT_SWEEP_TRIALS,
        "entangle" => 500,
        "estimate" => 1,
        _ => locc_spectrum::bench::DEFAULT_MSE_TRIALS,
    };
    Defaults {
        spectrum: if command == "entangle" { vec![0.5] } else { vec![0.7] },
        n: 100_000,
        n_grid: if command == "verify-tails" { vec![1_000, 10_000] } else { vec![1_000, 10_000, 100_000] },
        mu: 0.6,
        mu_list: vec![0.6, 0.3],
        trials,
        format: if command == "entangle" || command == "verify-lemma1" || command == "estimate" {
            Format::Json
        } else {
            Format::Csv
        },
        samples: 10_000,
        dims: vec![2, 3, 4],
        epsilon: vec![0.5, 1.0],
    }
}

impl ExperimentConfig {
    /// Merges defaults, then the config file, then flags.
    pub fn resolve(command: &str, flags: &Overrides) -> Result<Self, CliError> {
        let file = match &flags.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let def = defaults(command);
        let spectrum = flags.spectrum.clone().or(file.spectrum).unwrap_or(def.spectrum);
        let d = flags.d.or(file.d).unwrap_or(spectrum.len() + 1);
        let frame = match flags.frame.clone().or(file.frame) {
            Some(s) => FrameSpec::parse(&s)?,
            None => FrameSpec::Identity,
        };
        let seed = flags
            .seed
            .or(file.seed)
            .ok_or_else(|| CliError::Validation("seed: a master seed is required (--seed or `seed` in config)".into()))?;
        let cfg = ExperimentConfig {
            command: command.to_string(),
            d,
            spectrum,
            frame,
            n: flags.n.or(file.n).unwrap_or(def.n),
            n_grid: flags.n_grid.clone().or(file.n_grid).unwrap_or(def.n_grid),
            mu: flags.mu.or(file.mu).unwrap_or(def.mu),
            mu_list: flags.mu_list.clone().or(file.mu_list).unwrap_or(def.mu_list),
            trials: flags.trials.or(file.trials).unwrap_or(def.trials),
            seed,
            out: flags.out.clone().or(file.out),
            format: flags.format.or(file.format).unwrap_or(def.format),
            samples: flags.samples.or(file.samples).unwrap_or(def.samples),
            dims: flags.dims.clone().or(file.dims).unwrap_or(def.dims),
            epsilon: flags.epsilon.clone().or(file.epsilon).unwrap_or(def.epsilon),
            known_basis: flags.known_basis || file.known_basis.unwrap_or(false),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |field: &str, msg: String| Err(CliError::Validation(format!("{field}: {msg}")));
        if self.d < 2 {
            return bad("d", format!("dimension must be >= 2, got {}", self.d));
        }
        if self.spectrum.len() + 1 != self.d {
            return bad("spectrum", format!("expected d-1 = {} entries, got {}", self.d - 1, self.spectrum.len()));
        }
        if let Err(e) = locc_spectrum::Spectrum::new(self.spectrum.clone()) {
            return bad("spectrum", format!("must lie in Θ (each entry in [0,1], sum <= 1): {e}"));
        }
        if self.n_grid.is_empty() {
            return bad("n-grid", "must be nonempty".into());
        }
        if self.mu_list.is_empty() {
            return bad("mu-list", "must be nonempty".into());
        }
        for &mu in std::iter::once(&self.mu).chain(&self.mu_list) {
            if !(mu > 0.0 && mu < 1.0) {
                return bad("mu", format!("must lie in (0, 1), got {mu}"));
            }
        }
        if self.trials == 0 {
            return bad("trials", "must be >= 1".into());
        }
        if self.dims.is_empty() || self.dims.iter().any(|&d| d < 2) {
            return bad("dims", format!("dimensions must be >= 2, got {:?}", self.dims));
        }
        if self.epsilon.is_empty() || self.epsilon.iter().any(|&e| !(e > 0.0)) {
            return bad("epsilon", format!("thresholds must be > 0, got {:?}", self.epsilon));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags() -> Overrides {
        Overrides { seed: Some(1), ..Default::default() }
    }

    #[test]
    fn defaults_resolve() {
        let c = ExperimentConfig::resolve("bench-qcrb", &flags()).unwrap();
        assert_eq!(c.d, 2);
        assert_eq!(c.spectrum, vec![0.7]);
        assert_eq!(c.trials, 2000);
        assert_eq!(c.format, Format::Csv);
    }

    #[test]
    fn spectrum_outside_theta_names_field() {
        let f = Overrides { spectrum: Some(vec![1.2]), ..flags() };
        let err = ExperimentConfig::resolve("estimate", &f).unwrap_err().to_string();
        assert!(err.starts_with("spectrum:") && err.contains("Θ"), "{err}");
    }

    #[test]
    fn missing_seed_is_rejected() {
        let err = ExperimentConfig::resolve("estimate", &Overrides::default()).unwrap_err().to_string();
        assert!(err.starts_with("seed:"));
    }

    #[test]
    fn frame_spec_parsing() {
        assert_eq!(FrameSpec::parse("identity").unwrap(), FrameSpec::Identity);
        assert_eq!(FrameSpec::parse("random:9").unwrap(), FrameSpec::Random { seed: 9 });
        assert!(FrameSpec::parse("random:x").is_err());
        assert!(FrameSpec::parse("haar").is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "seed = 5\nspectrum = [0.5, 0.3]\nmu = 0.7\n").unwrap();
        let f = Overrides { config: Some(path), mu: Some(0.55), seed: None, ..Default::default() };
        let c = ExperimentConfig::resolve("estimate", &f).unwrap();
        assert_eq!(c.seed, 5);
        assert_eq!(c.d, 3);
        assert_eq!(c.mu, 0.55);
    }

    #[test]
    fn unknown_config_key_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "seed = 5\nbogus = 1\n").unwrap();
        let f = Overrides { config: Some(path), ..Default::default() };
        let err = ExperimentConfig::resolve("estimate", &f).unwrap_err().to_string();
        assert!(err.starts_with("config:"), "{err}");
    }
}
