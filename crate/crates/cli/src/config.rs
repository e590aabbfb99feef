//! The TOML run config. Paths resolve against the directory holding the file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use inoc_core::llmrunner::{BackendProfile, MockPolicy, RetryPolicy};
use inoc_core::perturb::GeneratorConfig;
use inoc_core::prompting::{ModelProfile, PromptStrategy};
use inoc_core::sampling::FeatureConfig;
use inoc_core::seed::sha256_hex;
use inoc_core::{Error, PerturbationKind};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Repeat seeds for plan and run; empty means just `seed`.
    pub seeds: Vec<u64>,
    /// Perturbation kinds to build; empty means the five canonical kinds.
    pub kinds: Vec<String>,
    pub paths: PathsConfig,
    pub splits: SplitConfig,
    pub generators: GeneratorConfig,
    pub features: FeatureConfig,
    pub plan: PlanConfig,
    pub prompt: PromptConfig,
    pub backend: BackendConfig,
    pub run: RunSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            seeds: Vec::new(),
            kinds: Vec::new(),
            paths: PathsConfig::default(),
            splits: SplitConfig::default(),
            generators: GeneratorConfig::default(),
            features: FeatureConfig::default(),
            plan: PlanConfig::default(),
            prompt: PromptConfig::default(),
            backend: BackendConfig::default(),
            run: RunSection::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Source dataset that the generators perturb.
    pub dataset: Option<PathBuf>,
    pub tables: Option<PathBuf>,
    pub exemplars: Option<PathBuf>,
    /// Directory of prompt template overrides.
    pub templates: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    /// Cross-test accuracy CSV.
    pub matrix: Option<PathBuf>,
    /// Challenge-set root; defaults to `<output>/challenge`.
    pub challenge: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub cap: usize,
    pub train: usize,
    pub test: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            cap: 1500,
            train: 500,
            test: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanConfig {
    pub mix_k: Vec<usize>,
    pub dynmix_total: Vec<usize>,
    pub seq_k: usize,
    /// Derived order names (`col-asc`, ...) to emit Seq stages for.
    pub seq_orders: Vec<String>,
    /// Extra named orders given explicitly, e.g. `{ custom = "mnlcs" }`.
    pub explicit_orders: BTreeMap<String, String>,
    /// System message for fine-tune manifests; defaults to the task,
    /// all-kind awareness and strict limitation sections.
    pub system_prompt: Option<String>,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig {
            mix_k: vec![500],
            dynmix_total: vec![1500],
            seq_k: 500,
            seq_orders: ["col-asc", "col-dsc", "row-asc", "row-dsc"].map(String::from).to_vec(),
            explicit_orders: BTreeMap::new(),
            system_prompt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptConfig {
    pub strategies: Vec<String>,
    /// `gpt` or `llama`.
    pub profile: String,
    /// Full profile; takes precedence over `profile` when present.
    pub model_profile: Option<ModelProfile>,
    /// Premise rows kept by distracting-row removal.
    pub drr_k: usize,
}

impl Default for PromptConfig {
    fn default() -> Self {
        PromptConfig {
            strategies: vec!["op_zs".into()],
            profile: "gpt".into(),
            model_profile: None,
            drr_k: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub mock: MockPolicy,
    /// Bearer token; `${VAR}` references are expanded from the environment.
    pub auth: Option<String>,
    pub parallelism: usize,
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_new_tokens: u32,
    pub timeout_secs: u64,
    pub requests_per_minute: Option<u32>,
    pub retry: RetryPolicy,
}

impl Default for BackendConfig {
    fn default() -> Self {
        let p = BackendProfile::default();
        BackendConfig {
            kind: BackendKind::Mock,
            mock: MockPolicy::EchoGold,
            auth: None,
            parallelism: 4,
            endpoint: p.endpoint,
            model: p.model,
            temperature: p.temperature,
            max_new_tokens: p.max_new_tokens,
            timeout_secs: p.timeout_secs,
            requests_per_minute: p.requests_per_minute,
            retry: p.retry,
        }
    }
}

impl BackendConfig {
    pub fn profile(&self) -> BackendProfile {
        BackendProfile {
            endpoint: self.endpoint.clone(),
            model: self.model.clone(),
            temperature: self.temperature,
            max_new_tokens: self.max_new_tokens,
            auth_env: None,
            timeout_secs: self.timeout_secs,
            retry: self.retry.clone(),
            requests_per_minute: self.requests_per_minute,
        }
    }

    /// The expanded `auth` value, if any.
    pub fn token(&self) -> Result<Option<String>, Error> {
        self.auth.as_deref().map(interpolate).transpose()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Baseline accuracy (percent) per kind, for μ. Falls back to the
    /// matrix baseline row when empty.
    pub baseline: BTreeMap<String, f64>,
    /// Challenge sets to evaluate; empty means every set on disk.
    pub sets: Vec<String>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, Error> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Invalid {
            what: "config",
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        RunConfig::from_toml(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.kinds()?;
        self.strategies()?;
        self.model_profile()?;
        self.baseline()?;
        parse_kinds(&self.run.sets)?;
        if self.splits.train + self.splits.test > self.splits.cap {
            return Err(Error::Invalid {
                what: "config",
                message: format!(
                    "splits.train + splits.test = {} exceeds splits.cap = {}",
                    self.splits.train + self.splits.test,
                    self.splits.cap
                ),
            });
        }
        if self.prompt.drr_k == 0 {
            return Err(Error::Invalid {
                what: "config",
                message: "prompt.drr_k must be at least 1".into(),
            });
        }
        self.backend.profile().validate()
    }

    pub fn kinds(&self) -> Result<Vec<PerturbationKind>, Error> {
        if self.kinds.is_empty() {
            return Ok(PerturbationKind::CANONICAL.to_vec());
        }
        parse_kinds(&self.kinds)
    }

    pub fn seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            vec![self.seed]
        } else {
            self.seeds.clone()
        }
    }

    pub fn strategies(&self) -> Result<Vec<PromptStrategy>, Error> {
        self.prompt.strategies.iter().map(|s| s.parse()).collect()
    }

    pub fn model_profile(&self) -> Result<ModelProfile, Error> {
        match &self.prompt.model_profile {
            Some(p) => Ok(p.clone()),
            None => ModelProfile::by_name(&self.prompt.profile),
        }
    }

    pub fn baseline(&self) -> Result<BTreeMap<PerturbationKind, f64>, Error> {
        self.run.baseline.iter().map(|(k, v)| Ok((k.parse()?, *v))).collect()
    }

    /// Digest of the canonical JSON form with file locations and runtime
    /// knobs blanked, so the same experiment hashes the same wherever its
    /// files live and however many workers run it.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.paths = PathsConfig::default();
        canonical.backend.parallelism = 0;
        let value = serde_json::to_value(&canonical).expect("config serializes");
        sha256_hex(value.to_string().as_bytes())
    }
}

/// Parses kind names or codes, rejecting duplicates.
pub fn parse_kinds<S: AsRef<str>>(names: &[S]) -> Result<Vec<PerturbationKind>, Error> {
    let mut kinds = Vec::new();
    for name in names {
        let kind: PerturbationKind = name.as_ref().parse()?;
        if kinds.contains(&kind) {
            return Err(Error::Invalid {
                what: "perturbation kind",
                message: format!("`{}` listed twice", name.as_ref()),
            });
        }
        kinds.push(kind);
    }
    Ok(kinds)
}

/// Expands `${NAME}` from the environment. Unset variables are an error;
/// `$` not followed by `{` is kept literally.
pub fn interpolate(text: &str) -> Result<String, Error> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(at) = rest.find("${") {
        out.push_str(&rest[..at]);
        let after = &rest[at + 2..];
        let end = after.find('}').ok_or_else(|| Error::Invalid {
            what: "config",
            message: format!("unterminated `${{` in `{text}`"),
        })?;
        let name = &after[..end];
        let value = std::env::var(name).map_err(|_| Error::Invalid {
            what: "config",
            message: format!("environment variable `{name}` is not set"),
        })?;
        out.push_str(&value);
        rest = &after[end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_default() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("sede = 3").is_err());
        assert!(RunConfig::from_toml("[splits]\ncapp = 3").is_err());
    }

    #[test]
    fn bad_kind_is_a_validation_error() {
        let err = RunConfig::from_toml("kinds = [\"char\", \"bogus\"]").unwrap_err();
        assert!(matches!(err, Error::Invalid { .. }), "{err}");
        assert!(RunConfig::from_toml("kinds = [\"char\", \"C\"]").is_err());
    }

    #[test]
    fn splits_must_fit_the_cap() {
        assert!(RunConfig::from_toml("[splits]\ncap = 10\ntrain = 6\ntest = 5").is_err());
    }

    #[test]
    fn hash_ignores_paths_and_parallelism() {
        let a = RunConfig::from_toml("seed = 1\n[paths]\noutput = \"a\"\n[backend]\nparallelism = 1").unwrap();
        let b = RunConfig::from_toml("seed = 1\n[paths]\noutput = \"b\"\n[backend]\nparallelism = 8").unwrap();
        let c = RunConfig::from_toml("seed = 2").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn hash_is_taken_before_interpolation() {
        let text = "[backend]\nauth = \"${INOC_TEST_TOKEN_A}\"";
        let a = RunConfig::from_toml(text).unwrap();
        std::env::set_var("INOC_TEST_TOKEN_A", "secret-1");
        let h1 = a.hash();
        std::env::set_var("INOC_TEST_TOKEN_A", "secret-2");
        assert_eq!(a.hash(), h1);
        assert_eq!(a.backend.token().unwrap().as_deref(), Some("secret-2"));
    }

    #[test]
    fn interpolation() {
        std::env::set_var("INOC_TEST_TOKEN_B", "xyz");
        assert_eq!(interpolate("Bearer ${INOC_TEST_TOKEN_B}!").unwrap(), "Bearer xyz!");
        assert_eq!(interpolate("a$b").unwrap(), "a$b");
        assert!(interpolate("${INOC_TEST_DEFINITELY_UNSET}").is_err());
        assert!(interpolate("${OPEN").is_err());
    }

    #[test]
    fn mock_policy_from_toml() {
        let c = RunConfig::from_toml("[backend.mock]\npolicy = \"noisy\"\np = 0.3\nseed = 7").unwrap();
        assert_eq!(c.backend.mock, MockPolicy::Noisy { p: 0.3, seed: 7 });
    }
}
