//! Acceptance suite. Runs every primary criterion, prints one PASS/FAIL line
//! per criterion and exits non-zero if any failed.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use inoc_cli::commands::{self, RunArgs};
use inoc_cli::Context;
use inoc_core::corpus::{Dataset, TableIndex};
use inoc_core::evaluation::{mu_score, EvalReport};
use inoc_core::extraction::{extract_answer, Lexicon};
use inoc_core::perturb::{
    perturb_char, perturb_location, perturb_negation, perturb_numeric, perturb_paraphrase, perturb_word_swap,
    RuleParaphraser, DEFAULT_GAZETTEER,
};
use inoc_core::prompting::TemplateSet;
use inoc_core::sampling::{elementary_symmetric, KDppSampler, Kernel};
use inoc_core::schedule::{dynmix_ratios, export_finetune_manifest, row_col_scores, CrossTestMatrix, TrainingSet, TrainingStrategy};
use inoc_core::{Example, Label, PerturbationKind};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

type Outcome = Result<String, String>;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn cross_test() -> CrossTestMatrix {
    CrossTestMatrix::from_csv(fs::File::open(fixtures().join("cross_test.csv")).unwrap()).unwrap()
}

fn kind_map(values: &[f64]) -> BTreeMap<PerturbationKind, f64> {
    PerturbationKind::CANONICAL.iter().copied().zip(values.iter().copied()).collect()
}

fn dynmix() -> Outcome {
    let baseline = kind_map(&[57.30, 46.90, 67.20, 70.20, 67.10]);
    let started = Instant::now();
    let ratios = dynmix_ratios(&baseline).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    let rounded: Vec<f64> = ratios.values().map(|r| (r * 1000.0).round() / 1000.0).collect();
    ensure(rounded == [0.223, 0.278, 0.171, 0.156, 0.172], || format!("ratios {rounded:?}"))?;
    ensure(elapsed.as_secs_f64() < 1e-3, || format!("took {elapsed:?}"))?;

    // The same numbers through the plan command.
    let out = tempfile::tempdir().unwrap();
    let ctx = Context::new(Default::default(), fixtures(), Some(out.path().to_path_buf()), None, true);
    let plan = commands::cmd_plan(&ctx, Some(&fixtures().join("cross_test.csv"))).map_err(|e| format!("{e:#}"))?;
    let planned: Vec<f64> = plan.dynmix.ratios.values().map(|r| (r * 1000.0).round() / 1000.0).collect();
    ensure(planned == rounded, || format!("plan ratios {planned:?}"))?;
    Ok(format!("{rounded:?} in {elapsed:?}"))
}

fn mu() -> Outcome {
    let baseline = cross_test().baseline_map();
    let text = fs::read_to_string(fixtures().join("reference_runs.csv")).unwrap();
    let mut lines = Vec::new();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let vals: Vec<f64> = f[1..6].iter().map(|v| v.parse().unwrap()).collect();
        let reported: f64 = f[6].parse().unwrap();
        let got = mu_score(&kind_map(&vals), &baseline).map_err(|e| e.to_string())?;
        ensure((got - reported).abs() <= 0.005, || format!("{}: {got:.4} vs {reported}", f[0]))?;
        lines.push(format!("{} {got:.3}", f[0]));
    }
    ensure(lines.len() == 4, || "expected four runs".into())?;
    Ok(lines.join(", "))
}

fn col_row() -> Outcome {
    let m = cross_test();
    let s = row_col_scores(&m).map_err(|e| e.to_string())?;
    let oracle = fs::read_to_string(fixtures().join("cross_test_scores.csv")).unwrap();
    for (i, line) in oracle.lines().skip(1).enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        let kind: PerturbationKind = f[0].parse().unwrap();
        ensure(m.kinds[i] == kind, || format!("kind order {kind}"))?;
        let (col, row): (f64, f64) = (f[1].parse().unwrap(), f[2].parse().unwrap());
        ensure((s.col[i] - col).abs() <= 0.005 && (s.row[i] - row).abs() <= 0.005, || {
            format!("{kind}: COL {} ROW {} vs oracle {col} {row}", s.col[i], s.row[i])
        })?;
    }
    let num = m.index_of(PerturbationKind::Num).unwrap();
    let loc = m.index_of(PerturbationKind::Loc).unwrap();
    ensure((s.col[num] - 5.00).abs() <= 0.005, || format!("COL(num) {}", s.col[num]))?;
    ensure((s.row[loc] - 0.225).abs() <= 0.005, || format!("ROW(loc) {}", s.row[loc]))?;
    Ok(format!("COL(num) {:+.3}, ROW(loc) {:+.3}, oracle agrees on all kinds", s.col[num], s.row[loc]))
}

/// Determinant by Gaussian elimination with partial pivoting.
fn det(mut a: Vec<f64>, n: usize) -> f64 {
    let mut d = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i * n + c].abs().total_cmp(&a[j * n + c].abs())).unwrap();
        if a[p * n + c] == 0.0 {
            return 0.0;
        }
        if p != c {
            for k in 0..n {
                a.swap(p * n + k, c * n + k);
            }
            d = -d;
        }
        d *= a[c * n + c];
        for r in c + 1..n {
            let f = a[r * n + c] / a[c * n + c];
            for k in c..n {
                a[r * n + k] -= f * a[c * n + k];
            }
        }
    }
    d
}

fn kdpp() -> Outcome {
    let started = Instant::now();
    let text = fs::read_to_string(fixtures().join("kernel6.csv")).unwrap();
    let rows: Vec<Vec<f64>> = text.lines().map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    let kernel = Kernel::from_rows(&rows).map_err(|e| e.to_string())?;
    let n = 6;
    let k = 3;
    let subsets: Vec<Vec<usize>> = (0..1u32 << n)
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).filter(|i| m >> i & 1 == 1).collect())
        .collect();
    let weights: Vec<f64> = subsets.iter().map(|s| det(kernel.submatrix(s), k)).collect();
    let total: f64 = weights.iter().sum();

    let sampler = KDppSampler::new(&kernel);
    let draws = 100_000u64;
    let mut counts: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
    for seed in 0..draws {
        *counts.entry(sampler.sample_seeded(k, seed).map_err(|e| e.to_string())?).or_default() += 1;
    }
    let tv: f64 = 0.5
        * subsets
            .iter()
            .zip(&weights)
            .map(|(s, w)| (counts.get(s).copied().unwrap_or(0) as f64 / draws as f64 - w / total).abs())
            .sum::<f64>();
    ensure(counts.keys().all(|s| subsets.contains(s)), || "sampled an invalid subset".into())?;
    ensure(tv < 0.02, || format!("TV distance {tv:.4}"))?;

    // ESP table against brute-force subset sums.
    let mut runner = TestRunner::new(Config {
        cases: 200,
        ..Config::default()
    });
    runner
        .run(&(1usize..=10).prop_flat_map(|n| prop::collection::vec(0.0f64..5.0, n)), |vals| {
            let n = vals.len();
            let table = elementary_symmetric(&vals, n);
            for kk in 0..=n {
                let brute: f64 = (0..1u32 << n)
                    .filter(|m| m.count_ones() as usize == kk)
                    .map(|m| (0..n).filter(|i| m >> i & 1 == 1).map(|i| vals[i]).product::<f64>())
                    .sum();
                let got = table.get(kk, n);
                prop_assert!((got - brute).abs() <= 1e-9 * brute.abs().max(1.0), "e_{kk} of {vals:?}: {got} vs {brute}");
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    ensure(elapsed.as_secs() < 30, || format!("took {elapsed:?}"))?;
    Ok(format!("TV {tv:.4} over {draws} draws, ESP matches brute force for N <= 10, {elapsed:.2?}"))
}

fn extraction() -> Outcome {
    let lexicon = Lexicon::default();
    let text = fs::read_to_string(fixtures().join("extraction_cases.jsonl")).unwrap();
    let mut total = 0;
    let mut styles = BTreeMap::new();
    for line in text.lines() {
        let case: serde_json::Value = serde_json::from_str(line).unwrap();
        let raw = case["text"].as_str().unwrap();
        let expected = case["expected"].as_str().map(|s| s.parse::<Label>().unwrap());
        let got = extract_answer(raw, &lexicon).label;
        ensure(got == expected, || format!("case {}: {raw:?} gave {got:?}, expected {expected:?}", case["id"]))?;
        *styles.entry(case["style"].as_str().unwrap().to_string()).or_insert(0) += 1;
        total += 1;
    }
    ensure(total == 60, || format!("{total} cases"))?;
    ensure(styles.len() == 2, || format!("styles {styles:?}"))?;

    let mut runner = TestRunner::new(Config {
        cases: 500,
        ..Config::default()
    });
    runner
        .run(&("[a-zA-Z :.,!?]{0,60}", "[ .!]{0,3}"), |(prefix, suffix)| {
            let raw = format!("{prefix} A: it is not possible to tell{suffix}");
            prop_assert_eq!(extract_answer(&raw, &lexicon).label, Some(Label::N), "{:?}", raw);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("{total} fixture cases {styles:?}, neutral-after-marker property holds"))
}

fn read_tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn end_to_end() -> Outcome {
    let started = Instant::now();
    let config = fixtures().join("synthetic/inoc.toml");
    let mut trees = Vec::new();
    for parallelism in [1, 8, 1] {
        let out = tempfile::tempdir().unwrap();
        let ctx = Context::load(Some(&config), Some(out.path().to_path_buf()), None, true).map_err(|e| format!("{e:#}"))?;
        commands::cmd_perturb(&ctx, None).map_err(|e| format!("{e:#}"))?;
        let args = RunArgs {
            parallelism: Some(parallelism),
            ..RunArgs::default()
        };
        let bundles = commands::cmd_run(&ctx, &args).map_err(|e| format!("{e:#}"))?;
        ensure(!bundles.is_empty(), || "no bundles".into())?;
        for b in &bundles {
            let report: EvalReport = serde_json::from_str(&fs::read_to_string(b.join("report.json")).unwrap()).unwrap();
            let kinds: Vec<PerturbationKind> = report.sets.iter().map(|s| s.kind).collect();
            ensure(PerturbationKind::CANONICAL.iter().all(|k| kinds.contains(k)), || format!("kinds {kinds:?}"))?;
            for s in &report.sets {
                ensure(s.examples == 50, || format!("{} has {} examples", s.name, s.examples))?;
                ensure(s.accuracy == 1.0, || format!("{} accuracy {}", s.name, s.accuracy))?;
            }
            ensure(report.sets.len() == 10, || format!("{} sets", report.sets.len()))?;
        }
        trees.push(read_tree(&out.path().join("runs")));
    }
    ensure(trees[0] == trees[1], || "parallelism 1 and 8 bundles differ".into())?;
    ensure(trees[0] == trees[2], || "repeated runs differ".into())?;
    let elapsed = started.elapsed();
    ensure(elapsed.as_secs() < 60, || format!("took {elapsed:?}"))?;
    Ok(format!("{} identical bundle files across 3 runs, all accuracies 1.000, {elapsed:.2?}", trees[0].len()))
}

const NAMES: &[&str] = &["Takahiro Arai", "Alder Guild", "Marlow", "Quarry Society", "Ivydale"];
const WORDS: &[&str] = &["wrote", "comic", "series", "founded", "river", "station", "museum", "album", "popular", "league"];
const AUX: &[&str] = &["is", "was", "are", "were", "has", "have", "does", "did", "can", "will"];

fn label() -> impl Strategy<Value = Label> {
    prop::sample::select(Label::ALL.to_vec())
}

fn example(hypothesis: String, label: Label) -> Example {
    Example::new("src-1", "tbl-1", hypothesis, label)
}

fn lineage(source: &Example, out: &Example, kind: PerturbationKind) -> Result<(), TestCaseError> {
    prop_assert_eq!(out.perturbation, Some(kind));
    prop_assert_eq!(out.parent_id.as_deref(), Some(source.id.as_str()));
    prop_assert_eq!(&out.table_id, &source.table_id);
    prop_assert_ne!(&out.id, &source.id);
    prop_assert!(out.validate().is_ok());
    Ok(())
}

fn policy_case<S, F>(name: &str, strategy: S, check: F) -> Result<(), String>
where
    S: Strategy,
    S::Value: std::fmt::Debug,
    F: Fn(S::Value) -> Result<(), TestCaseError>,
{
    let mut runner = TestRunner::new(Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    });
    runner.run(&strategy, check).map_err(|e| format!("{name}: {e}"))
}

fn label_policies() -> Outcome {
    let sentence = (
        prop::sample::select(NAMES),
        prop::sample::select(WORDS),
        prop::sample::select(WORDS),
        prop::sample::select(WORDS),
    )
        .prop_map(|(n, a, b, c)| format!("{n} {a} the {b} {c}."));
    policy_case("char", (sentence.clone(), label(), any::<u64>(), 1usize..4), |(h, l, seed, budget)| {
        let src = example(h, l);
        let out = perturb_char(&src, budget, seed).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(out.label, l);
        prop_assert_ne!(&out.hypothesis, &src.hypothesis);
        lineage(&src, &out, PerturbationKind::Char)
    })?;

    let negatable = (prop::sample::select(NAMES), prop::sample::select(AUX), prop::sample::select(WORDS))
        .prop_map(|(n, a, w)| format!("{n} {a} the {w}."));
    policy_case("neg", (negatable, label()), |(h, l)| {
        let src = example(h, l);
        let once = perturb_negation(&src).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let expected = match l {
            Label::E => Label::C,
            Label::C => Label::E,
            Label::N => Label::N,
        };
        prop_assert_eq!(once.label, expected);
        lineage(&src, &once, PerturbationKind::Neg)?;
        let twice = perturb_negation(&once).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(twice.label, l);
        prop_assert_eq!(&twice.hypothesis, &src.hypothesis);
        Ok(())
    })?;

    let numeric = (prop::sample::select(NAMES), prop::sample::select(WORDS), 1u32..5000)
        .prop_map(|(n, w, v)| format!("{n} {w} over {v} times."));
    policy_case("num", (numeric, label(), any::<u64>()), |(h, l, seed)| {
        let src = example(h, l);
        let out = perturb_numeric(&src, seed).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(out.label, if l == Label::N { Label::N } else { Label::C });
        prop_assert_ne!(&out.hypothesis, &src.hypothesis);
        lineage(&src, &out, PerturbationKind::Num)
    })?;

    let gazetteer: Vec<String> = DEFAULT_GAZETTEER.iter().map(|s| s.to_string()).collect();
    let located = (prop::sample::select(NAMES), prop::sample::select(DEFAULT_GAZETTEER))
        .prop_map(|(n, p)| format!("{n} is located in {p}."));
    policy_case("loc", (located, label(), any::<u64>()), |(h, l, seed)| {
        let src = example(h, l);
        let out = perturb_location(&src, &gazetteer, seed).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(out.label, if l == Label::N { Label::N } else { Label::C });
        prop_assert_ne!(&out.hypothesis, &src.hypothesis);
        lineage(&src, &out, PerturbationKind::Loc)
    })?;

    let engine = RuleParaphraser::default();
    let paraphrasable = (prop::sample::select(NAMES), prop::sample::select(&["founded", "wrote", "built", "won", "released"][..]), 1900u32..2020)
        .prop_map(|(n, v, y)| format!("{n} {v} it in {y}."));
    policy_case("stan", (paraphrasable, label()), |(h, l)| {
        let src = example(h, l);
        let out = perturb_paraphrase(&src, &engine).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(out.label, l);
        lineage(&src, &out, PerturbationKind::Stan)
    })?;

    let swappable = (prop::sample::select(NAMES), prop::sample::select(WORDS), prop::sample::select(WORDS), prop::sample::select(WORDS))
        .prop_map(|(n, a, b, c)| format!("{n} {a} {b} and {c} quickly."));
    policy_case("word-swap", (swappable, label(), any::<u64>()), |(h, l, seed)| {
        let src = example(h, l);
        let out = perturb_word_swap(&src, seed).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(out.label, l);
        lineage(&src, &out, PerturbationKind::WordSwap)
    })?;
    Ok("1000 cases each for char, neg, num, loc, stan, word-swap".into())
}

const EXPECTED_USER: &str = "Premise:  The region of WIMA is Worldwide.  WIMA was founded in 1950.  The location of WIMA is the United States.  The website of WIMA is www.wimaworld.com. Hypothesis: WIMA is located in Gambia.";

fn wima() -> Outcome {
    let dir = fixtures().join("wima");
    let tables = TableIndex::load_jsonl(&dir.join("tables.jsonl")).map_err(|e| e.to_string())?;
    let ds = Dataset::load_jsonl(&dir.join("example.jsonl"), "train").map_err(|e| e.to_string())?;
    let ts = TrainingSet {
        strategy: TrainingStrategy::Mix { k: 1 },
        seed: 0,
        composition: BTreeMap::from([(PerturbationKind::Loc, 1)]),
        entries: ds.examples,
    };
    let system = commands::default_system_prompt(&TemplateSet::builtin());
    let mut buf = Vec::new();
    export_finetune_manifest(&ts, &tables, &system, &mut buf).map_err(|e| e.to_string())?;
    let text = String::from_utf8(buf).unwrap();
    ensure(text.lines().count() == 1, || format!("{} lines", text.lines().count()))?;
    let value: serde_json::Value = serde_json::from_str(text.trim_end()).unwrap();
    let top: Vec<&String> = value.as_object().unwrap().keys().collect();
    ensure(top == ["messages"], || format!("top-level keys {top:?}"))?;
    let msgs = value["messages"].as_array().unwrap();
    ensure(msgs.len() == 3, || format!("{} messages", msgs.len()))?;
    for (m, role) in msgs.iter().zip(["system", "user", "assistant"]) {
        let mut keys: Vec<&String> = m.as_object().unwrap().keys().collect();
        keys.sort();
        ensure(keys == ["content", "role"], || format!("message keys {keys:?}"))?;
        ensure(m["role"] == role, || format!("role {} where {role} expected", m["role"]))?;
    }
    let sys = msgs[0]["content"].as_str().unwrap();
    ensure(
        sys.starts_with("In this task, we will ask you to make an inference about the information presented as the premise"),
        || "system prompt does not open with the task description".into(),
    )?;
    ensure(msgs[1]["content"] == EXPECTED_USER, || format!("user content {}", msgs[1]["content"]))?;
    ensure(msgs[2]["content"] == "Answer: No", || format!("assistant content {}", msgs[2]["content"]))?;
    Ok("messages/role/content match, user turn byte-identical, assistant \"Answer: No\"".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("DynMix ratios", dynmix),
        ("mu reproduction", mu),
        ("COL/ROW scores", col_row),
        ("k-DPP exactness", kdpp),
        ("answer extraction", extraction),
        ("end-to-end determinism", end_to_end),
        ("perturbation label policies", label_policies),
        ("fine-tune manifest", wima),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        match std::panic::catch_unwind(run) {
            Ok(Ok(detail)) => println!("PASS  {name}: {detail}"),
            Ok(Err(why)) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
            Err(_) => {
                failed += 1;
                println!("FAIL  {name}: panicked");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
