//! Experiment configuration: a flat `key = value` file overridden by flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::ValueEnum;
use netuq::galerkin::{IntermediateVariables, ReduceWhich};
use netuq::models::composite::MAX_COMPOSITE_DEGREE;
use netuq::models::heat::EXPERIMENT_MODES;
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Keys accepted in a configuration file.
pub const KEYS: &[&str] = &[
    "problem",
    "s",
    "n_min",
    "n_max",
    "s_min",
    "s_max",
    "n",
    "n_prime",
    "qr_tol",
    "rank_mode",
    "retry",
    "reference_degree",
    "reduce_which",
    "intermediate",
    "newton_tol",
    "mc_samples",
    "seed",
    "format",
    "output",
];

/// Largest Galerkin degree accepted for the heat network.
pub const MAX_HEAT_DEGREE: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Problem {
    Composite,
    HeatNetwork,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum RankMode {
    /// Keep every QR pivot above the tolerance.
    Tolerance,
    /// Keep the first `C(2N'+2, 2)` pivots.
    FixedRank,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ReduceChoice {
    Component1,
    Component2,
    Both,
}

impl From<ReduceChoice> for ReduceWhich {
    fn from(choice: ReduceChoice) -> Self {
        match choice {
            ReduceChoice::Component1 => ReduceWhich::Component1,
            ReduceChoice::Component2 => ReduceWhich::Component2,
            ReduceChoice::Both => ReduceWhich::Both,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum IntermediateChoice {
    /// The component's own inputs and its incoming coupling.
    Incoming,
    /// The component's own inputs and both couplings.
    Both,
}

impl From<IntermediateChoice> for IntermediateVariables {
    fn from(choice: IntermediateChoice) -> Self {
        match choice {
            IntermediateChoice::Incoming => IntermediateVariables::IncomingCoupling,
            IntermediateChoice::Both => IntermediateVariables::BothCouplings,
        }
    }
}

/// Fully resolved settings for one run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub problem: Problem,
    /// Dimension of the composite benchmark.
    pub s: usize,
    pub n_min: usize,
    pub n_max: usize,
    /// Range of random modes for the heat network.
    pub s_min: usize,
    pub s_max: usize,
    /// Galerkin degree for the heat network.
    pub n: usize,
    /// Reduced degree; follows the full degree when unset.
    pub n_prime: Option<usize>,
    pub qr_tol: f64,
    pub rank_mode: RankMode,
    pub retry: bool,
    pub reference_degree: usize,
    pub reduce_which: ReduceChoice,
    pub intermediate: IntermediateChoice,
    pub newton_tol: f64,
    pub mc_samples: usize,
    pub seed: u64,
    pub format: OutputFormat,
    pub output: PathBuf,
}

impl ExperimentConfig {
    pub fn defaults(problem: Problem) -> Self {
        Self {
            problem,
            s: 4,
            n_min: 1,
            n_max: 6,
            s_min: *EXPERIMENT_MODES.start(),
            s_max: *EXPERIMENT_MODES.end(),
            n: 3,
            n_prime: None,
            qr_tol: 1e-12,
            rank_mode: RankMode::Tolerance,
            retry: true,
            reference_degree: 8,
            reduce_which: ReduceChoice::Component2,
            intermediate: IntermediateChoice::Both,
            newton_tol: 1e-10,
            mc_samples: 0,
            seed: 0,
            format: OutputFormat::Csv,
            output: PathBuf::from("netuq-output"),
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let fail = |msg: String| Err(CliError::Config(msg));
        if !(self.qr_tol > 0.0 && self.qr_tol.is_finite()) {
            return fail(format!("qr_tol must be positive, got {}", self.qr_tol));
        }
        if self.n_prime == Some(0) {
            return fail("n_prime must be at least 1".into());
        }
        match self.problem {
            Problem::Composite => {
                if self.s == 0 {
                    return fail("s must be at least 1".into());
                }
                if self.n_min == 0 || self.n_min > self.n_max || self.n_max > MAX_COMPOSITE_DEGREE {
                    return fail(format!(
                        "need 1 <= n_min <= n_max <= {MAX_COMPOSITE_DEGREE}, got {}..{}",
                        self.n_min, self.n_max
                    ));
                }
                if self.reference_degree < self.n_max
                    || self.reference_degree > MAX_COMPOSITE_DEGREE
                {
                    return fail(format!(
                        "reference_degree must lie in n_max..={MAX_COMPOSITE_DEGREE}, got {}",
                        self.reference_degree
                    ));
                }
            }
            Problem::HeatNetwork => {
                if self.s_min > self.s_max
                    || !EXPERIMENT_MODES.contains(&self.s_min)
                    || !EXPERIMENT_MODES.contains(&self.s_max)
                {
                    return fail(format!(
                        "need {} <= s_min <= s_max <= {}, got {}..{}",
                        EXPERIMENT_MODES.start(),
                        EXPERIMENT_MODES.end(),
                        self.s_min,
                        self.s_max
                    ));
                }
                if self.n == 0 || self.n > MAX_HEAT_DEGREE {
                    return fail(format!(
                        "n must lie in 1..={MAX_HEAT_DEGREE}, got {}",
                        self.n
                    ));
                }
                if !(self.newton_tol > 0.0 && self.newton_tol.is_finite()) {
                    return fail(format!(
                        "newton_tol must be positive, got {}",
                        self.newton_tol
                    ));
                }
                if self.mc_samples == 1 {
                    return fail("mc_samples must be 0 or at least 2".into());
                }
            }
        }
        Ok(())
    }
}

/// Values read from a configuration file, keyed by name.
#[derive(Clone, Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Parses `key = value` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut values = BTreeMap::new();
        for (number, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::config(format!("line {}: expected key = value", number + 1))
            })?;
            let key = key.trim().replace('-', "_");
            if !KEYS.contains(&key.as_str()) {
                return Err(CliError::config(format!(
                    "line {}: unknown key '{key}'",
                    number + 1
                )));
            }
            if values
                .insert(key.clone(), value.trim().to_string())
                .is_some()
            {
                return Err(CliError::config(format!(
                    "line {}: duplicate key '{key}'",
                    number + 1
                )));
            }
        }
        Ok(Self { values })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn number<T: FromStr>(&self, key: &str) -> CliResult<Option<T>> {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| CliError::config(format!("invalid value '{v}' for {key}")))
            })
            .transpose()
    }

    pub fn flag(&self, key: &str) -> CliResult<Option<bool>> {
        self.raw(key)
            .map(|v| match v.to_ascii_lowercase().as_str() {
                "true" | "yes" | "1" | "on" => Ok(true),
                "false" | "no" | "0" | "off" => Ok(false),
                _ => Err(CliError::config(format!("invalid value '{v}' for {key}"))),
            })
            .transpose()
    }

    pub fn choice<T: ValueEnum>(&self, key: &str) -> CliResult<Option<T>> {
        self.raw(key)
            .map(|v| {
                T::from_str(v, true)
                    .map_err(|_| CliError::config(format!("invalid value '{v}' for {key}")))
            })
            .transpose()
    }
}

/// Command-line values; every field left unset falls back to the file and
/// then to the default.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub s: Option<usize>,
    pub n_min: Option<usize>,
    pub n_max: Option<usize>,
    pub s_min: Option<usize>,
    pub s_max: Option<usize>,
    pub n: Option<usize>,
    pub n_prime: Option<usize>,
    pub qr_tol: Option<f64>,
    pub rank_mode: Option<RankMode>,
    pub retry: Option<bool>,
    pub reference_degree: Option<usize>,
    pub reduce_which: Option<ReduceChoice>,
    pub intermediate: Option<IntermediateChoice>,
    pub newton_tol: Option<f64>,
    pub mc_samples: Option<usize>,
    pub seed: Option<u64>,
    pub format: Option<OutputFormat>,
    pub output: Option<PathBuf>,
}

/// Merges flags over file values over defaults. `problem` comes from the
/// subcommand when given, otherwise from the file.
pub fn resolve(
    problem: Option<Problem>,
    file: &ConfigFile,
    flags: &Overrides,
) -> CliResult<ExperimentConfig> {
    let from_file = file.choice::<Problem>("problem")?;
    let problem = match (problem, from_file) {
        (Some(p), Some(f)) if p != f => {
            return Err(CliError::config(format!(
                "configuration file is for {f:?} but {p:?} was requested"
            )))
        }
        (Some(p), _) | (None, Some(p)) => p,
        (None, None) => {
            return Err(CliError::config(
                "no problem given; use a subcommand or set problem in the file",
            ))
        }
    };
    let d = ExperimentConfig::defaults(problem);
    let config = ExperimentConfig {
        problem,
        s: pick(flags.s, file.number("s")?, d.s),
        n_min: pick(flags.n_min, file.number("n_min")?, d.n_min),
        n_max: pick(flags.n_max, file.number("n_max")?, d.n_max),
        s_min: pick(flags.s_min, file.number("s_min")?, d.s_min),
        s_max: pick(flags.s_max, file.number("s_max")?, d.s_max),
        n: pick(flags.n, file.number("n")?, d.n),
        n_prime: flags.n_prime.or(file.number("n_prime")?),
        qr_tol: pick(flags.qr_tol, file.number("qr_tol")?, d.qr_tol),
        rank_mode: pick(flags.rank_mode, file.choice("rank_mode")?, d.rank_mode),
        retry: pick(flags.retry, file.flag("retry")?, d.retry),
        reference_degree: pick(
            flags.reference_degree,
            file.number("reference_degree")?,
            d.reference_degree,
        ),
        reduce_which: pick(
            flags.reduce_which,
            file.choice("reduce_which")?,
            d.reduce_which,
        ),
        intermediate: pick(
            flags.intermediate,
            file.choice("intermediate")?,
            d.intermediate,
        ),
        newton_tol: pick(flags.newton_tol, file.number("newton_tol")?, d.newton_tol),
        mc_samples: pick(flags.mc_samples, file.number("mc_samples")?, d.mc_samples),
        seed: pick(flags.seed, file.number("seed")?, d.seed),
        format: pick(flags.format, file.choice("format")?, d.format),
        output: flags
            .output
            .clone()
            .or_else(|| file.raw("output").map(PathBuf::from))
            .unwrap_or(d.output),
    };
    config.validate()?;
    Ok(config)
}

fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_and_comments() {
        let file = ConfigFile::parse(
            "# composite sweep\nproblem = composite\nn-max = 3  # short\n\nqr_tol=1e-6\nretry = no\n",
        )
        .unwrap();
        let config = resolve(None, &file, &Overrides::default()).unwrap();
        assert_eq!(config.problem, Problem::Composite);
        assert_eq!(config.n_max, 3);
        assert_eq!(config.qr_tol, 1e-6);
        assert!(!config.retry);
    }

    #[test]
    fn flags_override_file() {
        let file = ConfigFile::parse("n_max = 3\nformat = json\n").unwrap();
        let flags = Overrides {
            n_max: Some(2),
            ..Overrides::default()
        };
        let config = resolve(Some(Problem::Composite), &file, &flags).unwrap();
        assert_eq!(config.n_max, 2);
        assert_eq!(config.format, OutputFormat::Json);
    }

    #[test]
    fn bad_files_are_rejected() {
        assert!(ConfigFile::parse("colour = blue\n").is_err());
        assert!(ConfigFile::parse("n_max 3\n").is_err());
        assert!(ConfigFile::parse("n = 1\nn = 2\n").is_err());
        let file = ConfigFile::parse("n_max = three\n").unwrap();
        assert!(resolve(Some(Problem::Composite), &file, &Overrides::default()).is_err());
        let file = ConfigFile::parse("problem = heat-network\n").unwrap();
        assert!(resolve(Some(Problem::Composite), &file, &Overrides::default()).is_err());
        assert!(resolve(None, &ConfigFile::default(), &Overrides::default()).is_err());
    }

    #[test]
    fn ranges_are_validated() {
        let file = ConfigFile::default();
        let cases = [
            Overrides {
                n_max: Some(9),
                ..Overrides::default()
            },
            Overrides {
                qr_tol: Some(0.0),
                ..Overrides::default()
            },
            Overrides {
                n_min: Some(4),
                n_max: Some(3),
                ..Overrides::default()
            },
        ];
        for flags in cases {
            assert!(resolve(Some(Problem::Composite), &file, &flags).is_err());
        }
        let flags = Overrides {
            s_max: Some(6),
            ..Overrides::default()
        };
        assert!(resolve(Some(Problem::HeatNetwork), &file, &flags).is_err());
    }
}
