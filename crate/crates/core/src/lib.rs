//! Building blocks for multi-perturbation robustness studies on tabular NLI.
//!
//! The crate covers the whole offline loop: constructing perturbed challenge
//! sets from a source corpus ([`perturb`]), diversifying them with exact k-DPP
//! sampling ([`sampling`]), planning Seq/Mix/DynMix inoculation schedules
//! ([`schedule`]), assembling perturbation-aware prompts ([`prompting`]),
//! running them against chat-completion backends ([`llmrunner`]), parsing the
//! verdicts ([`extraction`]) and scoring them ([`evaluation`]).

pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod extraction;
pub mod llmrunner;
pub mod perturb;
pub mod prompting;
pub mod sampling;
pub mod schedule;
pub mod seed;
pub mod text;

pub use corpus::{Dataset, Example, Label, Table};
pub use error::{Error, Result};
pub use perturb::{ChallengeSet, PerturbationKind};

/// Version string embedded in every artifact the workbench writes.
pub const TOOL_VERSION: &str = concat!("inoc ", env!("CARGO_PKG_VERSION"));
