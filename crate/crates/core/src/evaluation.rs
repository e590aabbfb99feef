//! Accuracy, μ, confusion matrices and graphs, cross-test assembly and run
//! report bundles.
//!
//! Accuracies are fractions in [0, 1]; μ and cross-test matrices use
//! percentage points to line up with the usual result tables. For
//! single-label classification micro-F1 equals accuracy, so only accuracy is
//! computed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{write_jsonl, Label};
use crate::error::{Error, Result};
use crate::perturb::PerturbationKind;
use crate::schedule::CrossTestMatrix;

fn check_lengths(preds: usize, golds: usize) -> Result<()> {
    if preds != golds {
        return Err(Error::LengthMismatch { left: preds, right: golds });
    }
    Ok(())
}

/// Fraction of predictions equal to gold; unparseable (`None`) counts as wrong.
pub fn accuracy(preds: &[Option<Label>], golds: &[Label]) -> Result<f64> {
    check_lengths(preds.len(), golds.len())?;
    if golds.is_empty() {
        return Ok(0.0);
    }
    let hits = preds.iter().zip(golds).filter(|(p, g)| **p == Some(**g)).count();
    Ok(hits as f64 / golds.len() as f64)
}

/// Mean improvement over baseline, in percentage points. Both maps are on the
/// 0-100 scale and must cover the same kinds.
pub fn mu_score(challenge: &BTreeMap<PerturbationKind, f64>, baseline: &BTreeMap<PerturbationKind, f64>) -> Result<f64> {
    if challenge.is_empty() || !challenge.keys().eq(baseline.keys()) {
        let names = |m: &BTreeMap<PerturbationKind, f64>| m.keys().map(|k| k.name()).collect::<Vec<_>>().join(",");
        return Err(Error::KindMismatch(format!(
            "challenge kinds [{}] vs baseline kinds [{}]",
            names(challenge),
            names(baseline)
        )));
    }
    let total: f64 = challenge.iter().map(|(k, acc)| acc - baseline[k]).sum();
    Ok(total / challenge.len() as f64)
}

/// Counts indexed `[gold][predicted]` in E, C, N order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[usize; 3]; 3],
    pub unparseable: usize,
}

impl ConfusionMatrix {
    pub fn get(&self, gold: Label, predicted: Label) -> usize {
        self.counts[gold.index()][predicted.index()]
    }

    pub fn classified(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn total(&self) -> usize {
        self.classified() + self.unparseable
    }
}

pub fn confusion(preds: &[Option<Label>], golds: &[Label]) -> Result<ConfusionMatrix> {
    check_lengths(preds.len(), golds.len())?;
    let mut cm = ConfusionMatrix::default();
    for (p, g) in preds.iter().zip(golds) {
        match p {
            Some(p) => cm.counts[g.index()][p.index()] += 1,
            None => cm.unparseable += 1,
        }
    }
    Ok(cm)
}

/// Percentages in tenths for one row, rounded by largest remainder so they
/// sum to exactly 1000 (100.0%).
fn row_tenths(row: &[usize; 3]) -> [u64; 3] {
    let total: usize = row.iter().sum();
    let exact: Vec<f64> = row.iter().map(|&c| c as f64 * 1000.0 / total as f64).collect();
    let mut out = [0u64; 3];
    for (o, e) in out.iter_mut().zip(&exact) {
        *o = e.floor() as u64;
    }
    let short = 1000 - out.iter().sum::<u64>();
    let mut order: Vec<usize> = (0..3).filter(|&i| row[i] > 0).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    for &i in order.iter().take(short as usize) {
        out[i] += 1;
    }
    out
}

/// DOT digraph over E, C, N. The edge A -> B carries the percentage of gold-A
/// items predicted as B; empty edges are left out.
pub fn export_confusion_graph(cm: &ConfusionMatrix, name: &str) -> Result<String> {
    if cm.classified() == 0 {
        return Err(Error::invalid("confusion matrix", "no classified examples to draw"));
    }
    let id: String = name.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect();
    let mut dot = format!("digraph {id} {{\n");
    for label in Label::ALL {
        writeln!(dot, "  {label} [label=\"{label}\"];").unwrap();
    }
    for gold in Label::ALL {
        let row = &cm.counts[gold.index()];
        if row.iter().sum::<usize>() == 0 {
            continue;
        }
        for (pred, tenths) in Label::ALL.iter().zip(row_tenths(row)) {
            if row[pred.index()] == 0 {
                continue;
            }
            let pct = format!("{}.{}", tenths / 10, tenths % 10);
            writeln!(dot, "  {gold} -> {pred} [label=\"{pct}\", weight={pct}];").unwrap();
        }
    }
    dot.push_str("}\n");
    Ok(dot)
}

/// One accuracy measurement: model trained on `train`, tested on `test`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossTestCell {
    pub train: PerturbationKind,
    pub test: PerturbationKind,
    pub accuracy: f64,
}

/// Builds the grid over the baseline's kinds; every cell must appear exactly once.
pub fn assemble_cross_test(cells: &[CrossTestCell], baseline: &BTreeMap<PerturbationKind, f64>) -> Result<CrossTestMatrix> {
    let kinds: Vec<PerturbationKind> = baseline.keys().copied().collect();
    let pos = |k: PerturbationKind| kinds.iter().position(|&x| x == k);
    let mut grid: Vec<Vec<Option<f64>>> = vec![vec![None; kinds.len()]; kinds.len()];
    for cell in cells {
        let (i, j) = match (pos(cell.train), pos(cell.test)) {
            (Some(i), Some(j)) => (i, j),
            _ => {
                return Err(Error::KindMismatch(format!(
                    "cell ({}, {}) uses a kind without a baseline",
                    cell.train, cell.test
                )))
            }
        };
        if grid[i][j].replace(cell.accuracy).is_some() {
            return Err(Error::DuplicateCell {
                train: cell.train,
                test: cell.test,
            });
        }
    }
    let mut rows = Vec::with_capacity(kinds.len());
    for (i, row) in grid.into_iter().enumerate() {
        let mut values = Vec::with_capacity(kinds.len());
        for (j, v) in row.into_iter().enumerate() {
            values.push(v.ok_or(Error::MissingCell {
                train: kinds[i],
                test: kinds[j],
            })?);
        }
        rows.push(values);
    }
    CrossTestMatrix::new(kinds, baseline.values().copied().collect(), rows)
}

/// Which half of a challenge set a report row describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SetRole {
    /// Perturbed test split.
    Q,
    /// Unperturbed counterparts of Q.
    #[serde(rename = "Qprime")]
    QPrime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetReport {
    pub name: String,
    pub kind: PerturbationKind,
    pub role: SetRole,
    pub examples: usize,
    pub accuracy: f64,
    pub unparseable: usize,
    pub errors: usize,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub strategy: String,
    pub backend: String,
    pub seed: u64,
    pub config_hash: String,
    pub tool_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub provenance: Provenance,
    pub sets: Vec<SetReport>,
    /// Percentage points; present when a baseline was supplied.
    pub mu: Option<f64>,
    pub baseline: Option<BTreeMap<PerturbationKind, f64>>,
    /// Mean of the per-kind Q′ accuracies (fraction).
    pub qprime_mean: Option<f64>,
}

impl EvalReport {
    pub fn new(provenance: Provenance, sets: Vec<SetReport>, baseline: Option<BTreeMap<PerturbationKind, f64>>) -> Result<Self> {
        let q_pct: BTreeMap<PerturbationKind, f64> = sets
            .iter()
            .filter(|s| s.role == SetRole::Q)
            .map(|s| (s.kind, s.accuracy * 100.0))
            .collect();
        let mu = match &baseline {
            Some(b) if !q_pct.is_empty() => {
                let wanted: BTreeMap<PerturbationKind, f64> = q_pct.keys().filter_map(|k| b.get(k).map(|v| (*k, *v))).collect();
                Some(mu_score(&q_pct, &wanted)?)
            }
            _ => None,
        };
        let qp: Vec<f64> = sets.iter().filter(|s| s.role == SetRole::QPrime).map(|s| s.accuracy).collect();
        let qprime_mean = (!qp.is_empty()).then(|| qp.iter().sum::<f64>() / qp.len() as f64);
        Ok(EvalReport {
            provenance,
            sets,
            mu,
            baseline,
            qprime_mean,
        })
    }

    pub fn to_markdown(&self) -> String {
        let p = &self.provenance;
        let mut md = String::from("# Evaluation report\n\n");
        writeln!(md, "- strategy: `{}`", p.strategy).unwrap();
        writeln!(md, "- backend: `{}`", p.backend).unwrap();
        writeln!(md, "- seed: {}", p.seed).unwrap();
        writeln!(md, "- config hash: `{}`", p.config_hash).unwrap();
        writeln!(md, "- tool: {}\n", p.tool_version).unwrap();
        md.push_str("| set | kind | role | n | accuracy (fraction) | accuracy (%) | unparseable | errors |\n");
        md.push_str("|---|---|---|---:|---:|---:|---:|---:|\n");
        for s in &self.sets {
            let role = match s.role {
                SetRole::Q => "Q",
                SetRole::QPrime => "Q'",
            };
            writeln!(
                md,
                "| {} | {} | {role} | {} | {:.4} | {:.2} | {} | {} |",
                s.name,
                s.kind,
                s.examples,
                s.accuracy,
                s.accuracy * 100.0,
                s.unparseable,
                s.errors
            )
            .unwrap();
        }
        md.push('\n');
        if let Some(mu) = self.mu {
            writeln!(md, "μ (mean improvement over baseline): {mu:.2} percentage points").unwrap();
        }
        if let Some(q) = self.qprime_mean {
            writeln!(md, "Q' mean accuracy over kinds: {q:.4} (fraction)").unwrap();
        }
        md
    }
}

/// One parsed response, as written to `verdicts.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub set: String,
    pub example_id: String,
    pub gold: Label,
    pub predicted: Option<Label>,
    pub matched_phrase: Option<String>,
    pub marker_found: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Writes report.json, report.md, one confusion graph per set and verdicts.jsonl.
/// Contents depend only on the inputs, so reruns are byte-identical.
pub fn write_report_bundle(dir: &Path, report: &EvalReport, verdicts: &[VerdictRecord]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    fs::write(dir.join("report.json"), json)?;
    fs::write(dir.join("report.md"), report.to_markdown())?;
    for set in &report.sets {
        if set.confusion.classified() > 0 {
            fs::write(dir.join(format!("confusion_{}.dot", set.name)), export_confusion_graph(&set.confusion, &set.name)?)?;
        }
    }
    write_jsonl(&dir.join("verdicts.jsonl"), verdicts)
}

/// Per-seed values with their arithmetic mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedAggregate {
    pub per_seed: Vec<f64>,
    pub mean: f64,
}

/// Averages set accuracies (and μ, under the key `"mu"`) across seed runs.
pub fn aggregate_seeds(reports: &[EvalReport]) -> BTreeMap<String, SeedAggregate> {
    let mut values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in reports {
        for s in &r.sets {
            values.entry(s.name.clone()).or_default().push(s.accuracy);
        }
        if let Some(mu) = r.mu {
            values.entry("mu".into()).or_default().push(mu);
        }
    }
    values
        .into_iter()
        .map(|(k, v)| {
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            (k, SeedAggregate { per_seed: v, mean })
        })
        .collect()
}
