//! Batch driver for the inoculation workbench: perturb, sample, plan,
//! prompt, run, extract and report, all configured from one TOML file.

pub mod commands;
pub mod config;

use std::path::{Path, PathBuf};

use inoc_core::Error;

pub use config::RunConfig;

pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_BACKEND: u8 = 3;
pub const EXIT_INSUFFICIENT: u8 = 4;

/// Maps an error chain to a process exit code.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Backend(_) | Error::Provider { .. } => EXIT_BACKEND,
                Error::InsufficientSamples { .. } | Error::RankDeficient { .. } | Error::NotPerturbable { .. } => {
                    EXIT_INSUFFICIENT
                }
                _ => EXIT_VALIDATION,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_VALIDATION;
        }
    }
    1
}

/// Everything a subcommand needs besides its own arguments.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: RunConfig,
    /// Directory relative config paths resolve against.
    pub base: PathBuf,
    pub out: PathBuf,
    pub offline: bool,
    pub config_hash: String,
}

impl Context {
    /// `out` and `seed` override the config; the hash reflects the override.
    pub fn new(config: RunConfig, base: PathBuf, out: Option<PathBuf>, seed: Option<u64>, offline: bool) -> Self {
        let mut config = config;
        if let Some(s) = seed {
            config.seed = s;
            config.seeds.clear();
        }
        let out = match out {
            Some(o) => o,
            None => config.paths.output.as_ref().map(|p| resolve(&base, p)).unwrap_or_else(|| base.join("out")),
        };
        let config_hash = config.hash();
        Context {
            config,
            base,
            out,
            offline,
            config_hash,
        }
    }

    /// Loads `path`, or the default config rooted at the working directory.
    pub fn load(path: Option<&Path>, out: Option<PathBuf>, seed: Option<u64>, offline: bool) -> anyhow::Result<Self> {
        match path {
            Some(p) => {
                let config = RunConfig::load(p).map_err(|e| anyhow::Error::new(e).context(format!("reading config {}", p.display())))?;
                let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
                Ok(Context::new(config, base, out, seed, offline))
            }
            None => Ok(Context::new(RunConfig::default(), PathBuf::from("."), out, seed, offline)),
        }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        resolve(&self.base, p)
    }

    /// A configured path, or a validation error naming the missing key.
    pub fn required(&self, value: &Option<PathBuf>, key: &'static str) -> Result<PathBuf, Error> {
        value.as_ref().map(|p| self.resolve(p)).ok_or_else(|| Error::Invalid {
            what: "config",
            message: format!("paths.{key} is required for this command"),
        })
    }

    pub fn challenge_dir(&self) -> PathBuf {
        match &self.config.paths.challenge {
            Some(p) => self.resolve(p),
            None => self.out.join("challenge"),
        }
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}
