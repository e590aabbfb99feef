//! Inoculation planning: COL/ROW scores and Seq orders from a cross-test
//! matrix, Mix and DynMix training-set construction, and fine-tune manifests.
//!
//! Fine-tuning itself happens outside the workbench. Plans are emitted as
//! training files and accuracy matrices are ingested back as CSV.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::corpus::{render_premise, Example, Label, TableIndex};
use crate::error::{Error, Result};
use crate::perturb::{ChallengeSet, PerturbationKind};
use crate::prompting::ChatMessage;
use crate::seed::rng_for;

/// Accuracies on the 0-100 scale. `cells[i][j]` is the model trained on
/// `kinds[i]` tested on `kinds[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossTestMatrix {
    pub kinds: Vec<PerturbationKind>,
    pub baseline: Vec<f64>,
    pub cells: Vec<Vec<f64>>,
}

impl CrossTestMatrix {
    pub fn new(kinds: Vec<PerturbationKind>, baseline: Vec<f64>, cells: Vec<Vec<f64>>) -> Result<Self> {
        let n = kinds.len();
        if n == 0 {
            return Err(Error::invalid("cross-test matrix", "no kinds"));
        }
        let mut sorted = kinds.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != n {
            return Err(Error::invalid("cross-test matrix", "repeated kind"));
        }
        if baseline.len() != n || cells.len() != n || cells.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("cross-test matrix", format!("expected a {n}x{n} grid plus a baseline row")));
        }
        let in_range = |v: &f64| v.is_finite() && (0.0..=100.0).contains(v);
        if !baseline.iter().all(in_range) || !cells.iter().flatten().all(in_range) {
            return Err(Error::invalid("cross-test matrix", "accuracies must lie in [0, 100]"));
        }
        Ok(CrossTestMatrix { kinds, baseline, cells })
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn index_of(&self, kind: PerturbationKind) -> Option<usize> {
        self.kinds.iter().position(|&k| k == kind)
    }

    pub fn baseline_map(&self) -> BTreeMap<PerturbationKind, f64> {
        self.kinds.iter().copied().zip(self.baseline.iter().copied()).collect()
    }

    /// Reads the CSV layout: header `train,<kind>...`, a `baseline` row, then
    /// one row per training kind in any order.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers()?.clone();
        let kinds: Vec<PerturbationKind> = header.iter().skip(1).map(str::parse).collect::<Result<_>>()?;
        let mut baseline = None;
        let mut rows: BTreeMap<PerturbationKind, Vec<f64>> = BTreeMap::new();
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            let name = record.get(0).unwrap_or_default();
            let values = record
                .iter()
                .skip(1)
                .map(|v| {
                    v.parse::<f64>().map_err(|e| {
                        Error::invalid("cross-test matrix", format!("line {line}: `{v}` is not a number ({e})"))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            if name.eq_ignore_ascii_case("baseline") {
                if baseline.replace(values).is_some() {
                    return Err(Error::invalid("cross-test matrix", "more than one baseline row"));
                }
            } else {
                let kind: PerturbationKind = name.parse()?;
                if rows.insert(kind, values).is_some() {
                    return Err(Error::invalid("cross-test matrix", format!("training kind {kind} appears twice")));
                }
            }
        }
        let baseline = baseline.ok_or_else(|| Error::invalid("cross-test matrix", "missing baseline row"))?;
        let mut cells = Vec::with_capacity(kinds.len());
        for &kind in &kinds {
            let row = rows
                .remove(&kind)
                .ok_or_else(|| Error::invalid("cross-test matrix", format!("missing row for training kind {kind}")))?;
            cells.push(row);
        }
        if let Some(extra) = rows.keys().next() {
            return Err(Error::invalid("cross-test matrix", format!("row {extra} has no matching column")));
        }
        CrossTestMatrix::new(kinds, baseline, cells)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("train");
        for k in &self.kinds {
            write!(out, ",{}", k.name()).unwrap();
        }
        out.push('\n');
        let mut row = |name: &str, values: &[f64]| {
            out.push_str(name);
            for v in values {
                write!(out, ",{v:.2}").unwrap();
            }
            out.push('\n');
        };
        row("baseline", &self.baseline);
        for (k, cells) in self.kinds.iter().zip(&self.cells) {
            row(k.name(), cells);
        }
        out
    }
}

/// Average accuracy-improvement points per kind, diagonal excluded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleScores {
    pub kinds: Vec<PerturbationKind>,
    /// How much training on the other kinds lifts this kind's test set.
    pub col: Vec<f64>,
    /// How much training on this kind lifts the other kinds' test sets.
    pub row: Vec<f64>,
}

pub fn row_col_scores(m: &CrossTestMatrix) -> Result<ScheduleScores> {
    let n = m.len();
    if n < 2 {
        return Err(Error::invalid("cross-test matrix", "COL/ROW need at least two kinds"));
    }
    let others = (n - 1) as f64;
    let col = (0..n)
        .map(|d| (0..n).filter(|&j| j != d).map(|j| m.cells[j][d] - m.baseline[d]).sum::<f64>() / others)
        .collect();
    let row = (0..n)
        .map(|d| (0..n).filter(|&j| j != d).map(|j| m.cells[d][j] - m.baseline[j]).sum::<f64>() / others)
        .collect();
    Ok(ScheduleScores {
        kinds: m.kinds.clone(),
        col,
        row,
    })
}

pub type Order = Vec<PerturbationKind>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivedOrders {
    pub col_asc: Order,
    pub col_dsc: Order,
    pub row_asc: Order,
    pub row_dsc: Order,
}

impl DerivedOrders {
    pub fn get(&self, name: &str) -> Option<&Order> {
        match name.to_ascii_lowercase().replace('_', "-").as_str() {
            "col-asc" => Some(&self.col_asc),
            "col-dsc" | "col-desc" => Some(&self.col_dsc),
            "row-asc" => Some(&self.row_asc),
            "row-dsc" | "row-desc" => Some(&self.row_dsc),
            _ => None,
        }
    }
}

/// Stable sorts by COL and ROW. Ties keep canonical kind order in both directions.
pub fn derive_orders(scores: &ScheduleScores) -> DerivedOrders {
    let sorted = |values: &[f64], descending: bool| -> Order {
        let mut idx: Vec<usize> = (0..scores.kinds.len()).collect();
        idx.sort_by(|&a, &b| {
            let by_score = values[a].total_cmp(&values[b]);
            let by_score = if descending { by_score.reverse() } else { by_score };
            by_score.then(scores.kinds[a].cmp(&scores.kinds[b]))
        });
        idx.into_iter().map(|i| scores.kinds[i]).collect()
    };
    DerivedOrders {
        col_asc: sorted(&scores.col, false),
        col_dsc: sorted(&scores.col, true),
        row_asc: sorted(&scores.row, false),
        row_dsc: sorted(&scores.row, true),
    }
}

/// Parses an explicit order such as `"csnlm"` or `"char,neg,num,loc,stan"`.
pub fn parse_order(text: &str) -> Result<Order> {
    let text = text.trim();
    let order: Order = if text.contains(',') {
        text.split(',').map(str::parse).collect::<Result<_>>()?
    } else {
        text.chars()
            .map(|c| {
                PerturbationKind::from_code(c)
                    .ok_or_else(|| Error::invalid("order", format!("unknown kind code `{c}` in `{text}`")))
            })
            .collect::<Result<_>>()?
    };
    let mut seen = order.clone();
    seen.sort();
    seen.dedup();
    if seen.len() != order.len() {
        return Err(Error::invalid("order", format!("`{text}` repeats a kind")));
    }
    Ok(order)
}

/// Mixing ratios proportional to each kind's error rate `100 - baseline`.
pub fn dynmix_ratios(baseline: &BTreeMap<PerturbationKind, f64>) -> Result<BTreeMap<PerturbationKind, f64>> {
    if baseline.is_empty() {
        return Err(Error::Degenerate("no baseline accuracies".into()));
    }
    if let Some((k, v)) = baseline.iter().find(|(_, v)| !(0.0..=100.0).contains(*v)) {
        return Err(Error::invalid("baseline", format!("{k} accuracy {v} is outside [0, 100]")));
    }
    let total: f64 = baseline.values().map(|b| 100.0 - b).sum();
    if total <= 0.0 {
        return Err(Error::Degenerate("every baseline accuracy is 100".into()));
    }
    Ok(baseline.iter().map(|(&k, b)| (k, (100.0 - b) / total)).collect())
}

/// Largest-remainder apportionment of `total` over `ratios`. Equal remainders
/// favour the earlier kind in canonical order.
pub fn largest_remainder(total: usize, ratios: &BTreeMap<PerturbationKind, f64>) -> BTreeMap<PerturbationKind, usize> {
    let shares: Vec<(PerturbationKind, f64)> = ratios.iter().map(|(&k, &r)| (k, r * total as f64)).collect();
    let mut counts: BTreeMap<PerturbationKind, usize> = shares.iter().map(|&(k, s)| (k, s.floor() as usize)).collect();
    let assigned: usize = counts.values().sum();
    let mut by_remainder: Vec<(PerturbationKind, f64)> = shares.iter().map(|&(k, s)| (k, s - s.floor())).collect();
    by_remainder.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    for (k, _) in by_remainder.into_iter().take(total.saturating_sub(assigned)) {
        *counts.get_mut(&k).unwrap() += 1;
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "lowercase")]
pub enum TrainingStrategy {
    Seq { order: Order, stage: usize },
    Mix { k: usize },
    DynMix { total_k: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    pub strategy: TrainingStrategy,
    pub seed: u64,
    pub composition: BTreeMap<PerturbationKind, usize>,
    pub entries: Vec<Example>,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn find_set(sets: &[ChallengeSet], kind: PerturbationKind) -> Result<&ChallengeSet> {
    sets.iter()
        .find(|s| s.kind == kind)
        .ok_or_else(|| Error::KindMismatch(format!("no challenge set for {kind}")))
}

/// Uniform draw of `k` training examples without replacement, in P order.
fn draw(set: &ChallengeSet, k: usize, seed: u64, purpose: &str) -> Result<Vec<Example>> {
    if set.train.len() < k {
        return Err(Error::InsufficientSamples {
            context: format!("{} training split", set.kind),
            needed: k,
            available: set.train.len(),
        });
    }
    let mut rng = rng_for(seed, &format!("{purpose}:{}", set.kind.code()));
    let mut picked = index::sample(&mut rng, set.train.len(), k).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| set.train[i].clone()).collect())
}

fn mixed(
    sets: &[ChallengeSet],
    counts: BTreeMap<PerturbationKind, usize>,
    strategy: TrainingStrategy,
    seed: u64,
    purpose: &str,
) -> Result<TrainingSet> {
    let mut entries = Vec::new();
    for (&kind, &k) in &counts {
        entries.extend(draw(find_set(sets, kind)?, k, seed, purpose)?);
    }
    entries.shuffle(&mut rng_for(seed, &format!("{purpose}:shuffle")));
    Ok(TrainingSet {
        strategy,
        seed,
        composition: counts,
        entries,
    })
}

/// `k` samples from every set, concatenated and shuffled.
pub fn build_mix(sets: &[ChallengeSet], k: usize, seed: u64) -> Result<TrainingSet> {
    let counts = sets.iter().map(|s| (s.kind, k)).collect();
    mixed(sets, counts, TrainingStrategy::Mix { k }, seed, "mix")
}

/// `total_k` samples split across sets in proportion to baseline error rates.
pub fn build_dynmix(
    sets: &[ChallengeSet],
    total_k: usize,
    baseline: &BTreeMap<PerturbationKind, f64>,
    seed: u64,
) -> Result<TrainingSet> {
    let wanted: BTreeMap<PerturbationKind, f64> = sets
        .iter()
        .map(|s| {
            baseline
                .get(&s.kind)
                .map(|&b| (s.kind, b))
                .ok_or_else(|| Error::KindMismatch(format!("no baseline accuracy for {}", s.kind)))
        })
        .collect::<Result<_>>()?;
    let counts = largest_remainder(total_k, &dynmix_ratios(&wanted)?);
    mixed(sets, counts, TrainingStrategy::DynMix { total_k }, seed, "dynmix")
}

/// One stage of `k` samples per kind, in `order`.
pub fn build_seq_plan(sets: &[ChallengeSet], order: &[PerturbationKind], k: usize, seed: u64) -> Result<Vec<TrainingSet>> {
    order
        .iter()
        .enumerate()
        .map(|(stage, &kind)| {
            let mut entries = draw(find_set(sets, kind)?, k, seed, "seq")?;
            entries.shuffle(&mut rng_for(seed, &format!("seq:shuffle:{stage}")));
            Ok(TrainingSet {
                strategy: TrainingStrategy::Seq {
                    order: order.to_vec(),
                    stage,
                },
                seed,
                composition: BTreeMap::from([(kind, k)]),
                entries,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinetuneRecord {
    pub messages: Vec<ChatMessage>,
}

/// Hyperparameters recorded next to an exported manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneMeta {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate_multiplier: f64,
    pub entries: usize,
    pub label_counts: BTreeMap<String, usize>,
    pub balance_warning: Option<String>,
}

pub fn finetune_answer(label: Label) -> &'static str {
    match label {
        Label::E => "Yes",
        Label::C => "No",
        Label::N => "Neutral",
    }
}

/// The premise is preceded by the same two-space gap that separates its sentences.
pub fn finetune_record(example: &Example, premise: &str, system_prompt: &str) -> FinetuneRecord {
    FinetuneRecord {
        messages: vec![
            ChatMessage::new("system", system_prompt),
            ChatMessage::new("user", format!("Premise:  {premise} Hypothesis: {}", example.hypothesis)),
            ChatMessage::new("assistant", format!("Answer: {}", finetune_answer(example.label))),
        ],
    }
}

/// Warns when any label's count is more than 10% away from an even three-way split.
pub fn balance_warning(counts: &BTreeMap<Label, usize>) -> Option<String> {
    let total: usize = counts.values().sum();
    if total == 0 {
        return None;
    }
    let even = total as f64 / 3.0;
    let off: Vec<String> = Label::ALL
        .iter()
        .map(|l| (l, counts.get(l).copied().unwrap_or(0)))
        .filter(|&(_, c)| (c as f64 - even).abs() > 0.1 * even)
        .map(|(l, c)| format!("{l}={c}"))
        .collect();
    (!off.is_empty()).then(|| format!("labels are unbalanced (expected about {even:.1} each): {}", off.join(", ")))
}

/// Writes one chat-format fine-tuning record per entry and returns the
/// metadata to store next to it.
pub fn export_finetune_manifest<W: Write>(
    ts: &TrainingSet,
    tables: &TableIndex,
    system_prompt: &str,
    mut out: W,
) -> Result<FinetuneMeta> {
    let mut counts: BTreeMap<Label, usize> = BTreeMap::new();
    for ex in &ts.entries {
        let table = tables
            .get(&ex.table_id)
            .ok_or_else(|| Error::invalid("fine-tune entry", format!("`{}` references unknown table `{}`", ex.id, ex.table_id)))?;
        let premise = render_premise(table);
        if premise.trim().is_empty() {
            return Err(Error::invalid("fine-tune entry", format!("`{}` has an empty premise", ex.id)));
        }
        serde_json::to_writer(&mut out, &finetune_record(ex, &premise, system_prompt))?;
        out.write_all(b"\n")?;
        *counts.entry(ex.label).or_default() += 1;
    }
    out.flush()?;
    let balance_warning = balance_warning(&counts);
    if let Some(w) = &balance_warning {
        log::warn!("{w}");
    }
    Ok(FinetuneMeta {
        batch_size: 1,
        epochs: 3,
        learning_rate_multiplier: 2.0,
        entries: ts.entries.len(),
        label_counts: counts.into_iter().map(|(l, c)| (l.code().to_string(), c)).collect(),
        balance_warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturb::{ChallengeManifest, ChallengeSizes};
    use proptest::prelude::*;
    use PerturbationKind::*;

    fn reference_matrix() -> CrossTestMatrix {
        CrossTestMatrix::new(
            PerturbationKind::CANONICAL.to_vec(),
            vec![57.30, 46.90, 67.20, 70.20, 67.10],
            vec![
                vec![59.20, 43.70, 64.30, 66.00, 68.30],
                vec![52.80, 71.90, 69.60, 69.70, 62.40],
                vec![47.30, 49.60, 85.40, 83.00, 57.60],
                vec![47.40, 53.90, 84.60, 86.10, 53.50],
                vec![58.30, 40.80, 70.30, 67.80, 66.80],
            ],
        )
        .unwrap()
    }

    fn synthetic_set(kind: PerturbationKind, n: usize) -> ChallengeSet {
        let train = (0..n)
            .map(|i| {
                let mut e = Example::new(format!("{}{i}", kind.code()), "t", "h", Label::ALL[i % 3]);
                e.perturbation = Some(kind);
                e.parent_id = Some(format!("o{i}"));
                e
            })
            .collect();
        ChallengeSet {
            kind,
            train,
            test: vec![],
            test_original: vec![],
            manifest: ChallengeManifest {
                kind,
                seed: 0,
                cap: 1500,
                sizes: ChallengeSizes {
                    source: n,
                    successes: n,
                    selected: n,
                    train: n,
                    test: 0,
                },
                generator_config_hash: String::new(),
                kernel_ridge: None,
                tool_version: String::new(),
                config_hash: None,
            },
        }
    }

    #[test]
    fn reference_col_row() {
        let s = row_col_scores(&reference_matrix()).unwrap();
        assert!((s.col[2] - 5.0).abs() < 1e-9);
        assert!((s.row[3] - 0.225).abs() < 1e-9);
        let orders = derive_orders(&s);
        assert_eq!(orders.col_asc, vec![Stan, Char, Neg, Loc, Num]);
        let mut rev = orders.col_dsc.clone();
        rev.reverse();
        assert_eq!(rev, orders.col_asc);
    }

    #[test]
    fn flat_matrix_scores_zero_and_canonical_orders() {
        let m = CrossTestMatrix::new(PerturbationKind::CANONICAL.to_vec(), vec![60.0; 5], vec![vec![60.0; 5]; 5]).unwrap();
        let s = row_col_scores(&m).unwrap();
        assert!(s.col.iter().chain(&s.row).all(|&v| v == 0.0));
        let o = derive_orders(&s);
        assert_eq!(o.row_asc, PerturbationKind::CANONICAL.to_vec());
        assert_eq!(o.col_dsc, PerturbationKind::CANONICAL.to_vec());
    }

    #[test]
    fn single_kind_has_no_scores() {
        let m = CrossTestMatrix::new(vec![Char], vec![50.0], vec![vec![60.0]]).unwrap();
        assert!(row_col_scores(&m).is_err());
    }

    #[test]
    fn csv_round_trip_and_validation() {
        let m = reference_matrix();
        assert_eq!(CrossTestMatrix::from_csv(m.to_csv().as_bytes()).unwrap(), m);
        let no_base = "train,char,neg\nchar,1,2\nneg,3,4\n";
        assert!(CrossTestMatrix::from_csv(no_base.as_bytes()).is_err());
        let missing = "train,char,neg\nbaseline,1,2\nchar,1,2\n";
        assert!(CrossTestMatrix::from_csv(missing.as_bytes()).is_err());
    }

    #[test]
    fn dynmix_ratio_edge_cases() {
        let uniform = dynmix_ratios(&BTreeMap::from([(Char, 40.0), (Neg, 40.0), (Num, 40.0)])).unwrap();
        assert!(uniform.values().all(|r| (r - 1.0 / 3.0).abs() < 1e-12));
        let one = dynmix_ratios(&BTreeMap::from([(Char, 0.0), (Neg, 100.0)])).unwrap();
        assert_eq!(one[&Char], 1.0);
        assert!(matches!(
            dynmix_ratios(&BTreeMap::from([(Char, 100.0), (Neg, 100.0)])),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn parse_orders() {
        assert_eq!(parse_order("csnlm").unwrap(), vec![Char, Stan, Neg, Loc, Num]);
        assert_eq!(parse_order("num,neg").unwrap(), vec![Num, Neg]);
        assert!(parse_order("cc").is_err());
        assert!(parse_order("cx").is_err());
    }

    #[test]
    fn mix_and_seq_shapes() {
        let sets: Vec<ChallengeSet> = PerturbationKind::CANONICAL.iter().map(|&k| synthetic_set(k, 20)).collect();
        let mix = build_mix(&sets, 7, 3).unwrap();
        assert_eq!(mix.len(), 35);
        assert!(mix.composition.values().all(|&c| c == 7));
        assert_eq!(build_mix(&sets, 7, 3).unwrap(), mix);
        assert!(build_mix(&sets, 0, 3).unwrap().is_empty());
        assert!(matches!(build_mix(&sets, 21, 3), Err(Error::InsufficientSamples { .. })));

        let order = vec![Num, Neg, Loc, Char, Stan];
        let stages = build_seq_plan(&sets, &order, 5, 1).unwrap();
        let kinds: Vec<PerturbationKind> = stages.iter().map(|s| s.entries[0].perturbation.unwrap()).collect();
        assert_eq!(kinds, order);
        assert!(stages.iter().all(|s| s.len() == 5));
    }

    #[test]
    fn wima_record_shape() {
        let ex = Example::new("wima", "t", "WIMA is located in Gambia.", Label::C);
        let rec = finetune_record(&ex, "The region of WIMA is Worldwide.", "sys");
        let json = serde_json::to_value(&rec).unwrap();
        let msgs = json["messages"].as_array().unwrap();
        assert_eq!(msgs.len(), 3);
        assert_eq!(msgs[2]["role"], "assistant");
        assert_eq!(msgs[2]["content"], "Answer: No");
        assert_eq!(
            msgs[1]["content"],
            "Premise:  The region of WIMA is Worldwide. Hypothesis: WIMA is located in Gambia."
        );
    }

    #[test]
    fn balance_check() {
        assert!(balance_warning(&BTreeMap::from([(Label::E, 100), (Label::C, 100), (Label::N, 100)])).is_none());
        assert!(balance_warning(&BTreeMap::from([(Label::E, 150), (Label::C, 100), (Label::N, 50)])).is_some());
    }

    proptest! {
        #[test]
        fn remainder_counts_sum_to_total(total in 0usize..5000, errs in prop::collection::vec(0.5f64..99.5, 1..6)) {
            let baseline: BTreeMap<PerturbationKind, f64> =
                PerturbationKind::CANONICAL.iter().copied().zip(errs.iter().map(|e| 100.0 - e)).collect();
            let counts = largest_remainder(total, &dynmix_ratios(&baseline).unwrap());
            prop_assert_eq!(counts.values().sum::<usize>(), total);
        }

        #[test]
        fn ratios_are_scale_invariant(errs in prop::collection::vec(0.5f64..40.0, 2..6), c in 0.5f64..2.5) {
            let a: BTreeMap<_, _> = PerturbationKind::CANONICAL.iter().copied().zip(errs.iter().map(|e| 100.0 - e)).collect();
            let b: BTreeMap<_, _> = PerturbationKind::CANONICAL.iter().copied().zip(errs.iter().map(|e| 100.0 - c * e)).collect();
            let (ra, rb) = (dynmix_ratios(&a).unwrap(), dynmix_ratios(&b).unwrap());
            prop_assert!((ra.values().sum::<f64>() - 1.0).abs() < 1e-9);
            for k in ra.keys() {
                prop_assert!((ra[k] - rb[k]).abs() < 1e-12);
            }
        }
    }
}
