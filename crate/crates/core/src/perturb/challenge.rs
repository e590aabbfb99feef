use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Generators, PerturbationKind};
use crate::corpus::{load_records, write_jsonl, Dataset, Example};
use crate::error::{Error, Result};
use crate::sampling::{build_kernel, FeatureConfig, KDppSampler};
use crate::seed::{derive_seed, rng_for};

/// Ridge added to the similarity kernel when the pool has fewer independent
/// hypotheses than the cap.
pub const RANK_RIDGE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChallengeOptions {
    pub cap: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub seed: u64,
    pub features: FeatureConfig,
}

impl Default for ChallengeOptions {
    fn default() -> Self {
        ChallengeOptions {
            cap: 1500,
            train_size: 500,
            test_size: 1000,
            seed: 0,
            features: FeatureConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChallengeSizes {
    pub source: usize,
    pub successes: usize,
    pub selected: usize,
    pub train: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChallengeManifest {
    pub kind: PerturbationKind,
    pub seed: u64,
    pub cap: usize,
    pub sizes: ChallengeSizes,
    pub generator_config_hash: String,
    /// Set when the kernel needed a ridge to reach the cap.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_ridge: Option<f64>,
    pub tool_version: String,
    /// Digest of the orchestrating run config, when built through one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

/// Train split P, test split Q and the unperturbed parents Q′ of Q, index-aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct ChallengeSet {
    pub kind: PerturbationKind,
    pub train: Vec<Example>,
    pub test: Vec<Example>,
    pub test_original: Vec<Example>,
    pub manifest: ChallengeManifest,
}

impl ChallengeSet {
    pub const TRAIN_FILE: &'static str = "P.jsonl";
    pub const TEST_FILE: &'static str = "Q.jsonl";
    pub const ORIGINAL_FILE: &'static str = "Qprime.jsonl";
    pub const MANIFEST_FILE: &'static str = "manifest.json";

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_jsonl(&dir.join(Self::TRAIN_FILE), &self.train)?;
        write_jsonl(&dir.join(Self::TEST_FILE), &self.test)?;
        write_jsonl(&dir.join(Self::ORIGINAL_FILE), &self.test_original)?;
        let mut manifest = serde_json::to_string_pretty(&self.manifest)?;
        manifest.push('\n');
        fs::write(dir.join(Self::MANIFEST_FILE), manifest)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: ChallengeManifest = serde_json::from_str(&fs::read_to_string(dir.join(Self::MANIFEST_FILE))?)?;
        let read = |name: &str| load_records(&dir.join(name), |e: &Example| e.id.clone());
        let set = ChallengeSet {
            kind: manifest.kind,
            train: read(Self::TRAIN_FILE)?,
            test: read(Self::TEST_FILE)?,
            test_original: read(Self::ORIGINAL_FILE)?,
            manifest,
        };
        if set.test.len() != set.test_original.len() {
            return Err(Error::invalid(
                "challenge set",
                format!("{} has {} rows but Q has {}", Self::ORIGINAL_FILE, set.test_original.len(), set.test.len()),
            ));
        }
        Ok(set)
    }

    pub fn train_dataset(&self) -> Dataset {
        Dataset::new(format!("P_{}", self.kind.code()), "train", self.train.clone())
    }

    pub fn test_dataset(&self) -> Dataset {
        Dataset::new(format!("Q_{}", self.kind.code()), "test", self.test.clone())
    }

    pub fn original_dataset(&self) -> Dataset {
        Dataset::new(format!("Qprime_{}", self.kind.code()), "test", self.test_original.clone())
    }
}

/// Perturbs every source example, keeps the successes (one per lineage),
/// diversifies them down to `cap` with a k-DPP over hypothesis n-grams, then
/// splits into lineage-disjoint P and Q.
pub fn build_challenge_set(
    source: &Dataset,
    kind: PerturbationKind,
    generators: &Generators,
    options: &ChallengeOptions,
) -> Result<ChallengeSet> {
    let needed = options.train_size + options.test_size;
    let mut seen = HashSet::new();
    let mut pairs: Vec<(Example, &Example)> = Vec::new();
    for ex in &source.examples {
        if !seen.insert(ex.lineage().to_string()) {
            continue;
        }
        let seed = derive_seed(options.seed, &format!("perturb:{}:{}", kind.code(), ex.id));
        match generators.apply(ex, kind, seed) {
            Ok(out) => pairs.push((out, ex)),
            Err(Error::NotPerturbable { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    let successes = pairs.len();
    log::info!("{kind}: {successes} of {} source examples perturbed", source.len());
    if successes < needed {
        return Err(Error::InsufficientSamples {
            context: format!("{kind} challenge set"),
            needed,
            available: successes,
        });
    }

    let mut kernel_ridge = None;
    if successes > options.cap {
        let hyps: Vec<&str> = pairs.iter().map(|(p, _)| p.hypothesis.as_str()).collect();
        let kernel = build_kernel(&hyps, &options.features)?;
        let seed = derive_seed(options.seed, &format!("k-dpp:{}", kind.code()));
        let mut sampler = KDppSampler::new(&kernel);
        if sampler.rank() < options.cap {
            log::warn!(
                "{kind}: kernel rank {} is below cap {}; adding ridge {RANK_RIDGE}",
                sampler.rank(),
                options.cap
            );
            sampler = KDppSampler::new(&kernel.with_ridge(RANK_RIDGE));
            kernel_ridge = Some(RANK_RIDGE);
        }
        let keep = sampler.sample_seeded(options.cap, seed)?;
        let mut slots: Vec<Option<(Example, &Example)>> = pairs.into_iter().map(Some).collect();
        pairs = keep.into_iter().map(|i| slots[i].take().expect("distinct indices")).collect();
    }
    let selected = pairs.len();
    if selected < needed {
        return Err(Error::InsufficientSamples {
            context: format!("{kind} challenge set after cap"),
            needed,
            available: selected,
        });
    }

    pairs.shuffle(&mut rng_for(options.seed, &format!("split:{}", kind.code())));
    let train: Vec<Example> = pairs[..options.train_size].iter().map(|(p, _)| p.clone()).collect();
    let test_pairs = &pairs[options.train_size..needed];
    let test = test_pairs.iter().map(|(p, _)| p.clone()).collect();
    let test_original = test_pairs.iter().map(|(_, o)| (*o).clone()).collect();

    Ok(ChallengeSet {
        kind,
        train,
        test,
        test_original,
        manifest: ChallengeManifest {
            kind,
            seed: options.seed,
            cap: options.cap,
            sizes: ChallengeSizes {
                source: source.len(),
                successes,
                selected,
                train: options.train_size,
                test: options.test_size,
            },
            generator_config_hash: generators.config.hash(),
            kernel_ridge,
            tool_version: crate::TOOL_VERSION.to_string(),
            config_hash: None,
        },
    })
}
