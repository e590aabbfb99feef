use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, ChatRequest, Completion, Job};
use crate::corpus::Label;
use crate::prompting::VerdictStyle;
use crate::seed::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case")]
pub enum MockPolicy {
    /// Always answers the gold label.
    EchoGold,
    /// Always answers the same label.
    FixedLabel { label: Label },
    /// Negation words mean C, digits mean N, anything else E.
    KeywordHeuristic,
    /// Gold label, flipped to one of the other two with probability `p`.
    Noisy { p: f64, seed: u64 },
}

/// Offline backend that ignores the prompt and answers from the job's metadata.
#[derive(Debug, Clone)]
pub struct MockBackend {
    pub policy: MockPolicy,
    pub verdicts: VerdictStyle,
}

impl MockBackend {
    pub fn new(policy: MockPolicy, verdicts: VerdictStyle) -> Self {
        MockBackend { policy, verdicts }
    }

    fn label_for(&self, job: &Job) -> Label {
        match &self.policy {
            MockPolicy::EchoGold => job.gold,
            MockPolicy::FixedLabel { label } => *label,
            MockPolicy::KeywordHeuristic => {
                let lower = job.hypothesis.to_lowercase();
                let negated = lower
                    .split(|c: char| !c.is_alphanumeric() && c != '\'')
                    .any(|w| matches!(w, "not" | "no" | "never") || w.ends_with("n't"));
                if negated {
                    Label::C
                } else if lower.chars().any(|c| c.is_ascii_digit()) {
                    Label::N
                } else {
                    Label::E
                }
            }
            MockPolicy::Noisy { p, seed } => {
                let mut rng = rng_for(*seed, &job.example_id);
                if rng.random::<f64>() < *p {
                    let others: Vec<Label> = Label::ALL.into_iter().filter(|&l| l != job.gold).collect();
                    others[rng.random_range(0..others.len())]
                } else {
                    job.gold
                }
            }
        }
    }
}

impl Backend for MockBackend {
    fn name(&self) -> String {
        let policy = match &self.policy {
            MockPolicy::EchoGold => "echo-gold".to_string(),
            MockPolicy::FixedLabel { label } => format!("fixed-label:{label}"),
            MockPolicy::KeywordHeuristic => "keyword-heuristic".to_string(),
            MockPolicy::Noisy { p, seed } => format!("noisy:{p}:{seed}"),
        };
        format!("mock/{policy}")
    }

    fn uses_network(&self) -> bool {
        false
    }

    fn complete(&self, job: &Job, _request: &ChatRequest) -> Result<Completion, BackendError> {
        Ok(Completion {
            text: format!("E: mock. A: {}", self.verdicts.word(self.label_for(job))),
            latency_ms: Some(0),
        })
    }
}
