//! One function per subcommand. Each writes its artifacts under the context's
//! output directory, stamps them with the config hash and tool version, and
//! returns what it wrote.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context as _, Result};
use inoc_core::corpus::{drr_top_k, write_jsonl, PremiseRenderer, TableIndex};
use inoc_core::evaluation::{
    accuracy, aggregate_seeds, assemble_cross_test, confusion, write_report_bundle, CrossTestCell, EvalReport,
    Provenance, SetReport, SetRole, VerdictRecord,
};
use inoc_core::extraction::{extract_answer, Lexicon};
use inoc_core::llmrunner::{run_eval, Backend, HttpBackend, Job, MockBackend, RawResponse, ResponseCache, RunOptions};
use inoc_core::perturb::{build_challenge_set, ChallengeOptions, Generators};
use inoc_core::prompting::{
    build_prompt, render_chat_request, AwarenessForm, ExemplarPool, LimitationForm, PromptSpec, PromptStrategy,
    TemplateSet,
};
use inoc_core::sampling::{build_kernel, greedy_map, sample_k_dpp};
use inoc_core::schedule::{
    build_dynmix, build_mix, build_seq_plan, derive_orders, dynmix_ratios, export_finetune_manifest,
    largest_remainder, parse_order, row_col_scores, CrossTestMatrix, FinetuneMeta, Order, TrainingSet,
};
use inoc_core::seed::derive_seed;
use inoc_core::{ChallengeSet, Dataset, Error, Example, Label, PerturbationKind, TOOL_VERSION};
use serde::Serialize;

use crate::config::{parse_kinds, BackendKind};
use crate::Context;

/// An artifact body with the provenance every output carries.
#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    config_hash: &'a str,
    tool_version: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

fn write_stamped<T: Serialize>(ctx: &Context, path: &Path, body: &T) -> Result<()> {
    let stamped = Stamped {
        config_hash: &ctx.config_hash,
        tool_version: TOOL_VERSION,
        body,
    };
    write_json(path, &stamped)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn invalid(what: &'static str, message: impl Into<String>) -> Error {
    Error::Invalid {
        what,
        message: message.into(),
    }
}

/// Strategy names contain `:`; keep directory names portable.
pub fn strategy_dir(strategy: PromptStrategy) -> String {
    strategy.to_string().replace(':', "-")
}

fn templates(ctx: &Context) -> Result<TemplateSet> {
    match &ctx.config.paths.templates {
        Some(dir) => Ok(TemplateSet::from_dir(&ctx.resolve(dir))?),
        None => Ok(TemplateSet::builtin()),
    }
}

fn exemplars(ctx: &Context) -> Result<ExemplarPool> {
    match &ctx.config.paths.exemplars {
        Some(p) => {
            let p = ctx.resolve(p);
            ExemplarPool::load_jsonl(&p).with_context(|| format!("loading exemplars {}", p.display()))
        }
        None => Ok(ExemplarPool::default()),
    }
}

fn tables(ctx: &Context) -> Result<TableIndex> {
    let p = ctx.required(&ctx.config.paths.tables, "tables")?;
    TableIndex::load_jsonl(&p).with_context(|| format!("loading tables {}", p.display()))
}

fn lexicon(ctx: &Context, path: Option<&Path>) -> Result<Lexicon> {
    let configured = ctx.config.paths.lexicon.as_ref().map(|p| ctx.resolve(p));
    match path.map(Path::to_path_buf).or(configured) {
        Some(p) => Lexicon::load(&p).with_context(|| format!("loading lexicon {}", p.display())),
        None => Ok(Lexicon::default()),
    }
}

fn load_matrix(path: &Path) -> Result<CrossTestMatrix> {
    let file = File::open(path).with_context(|| format!("opening matrix {}", path.display()))?;
    CrossTestMatrix::from_csv(file).with_context(|| format!("reading matrix {}", path.display()))
}

/// Loads whichever of `kinds` have a challenge set on disk, in `kinds` order.
fn load_sets(ctx: &Context, kinds: &[PerturbationKind]) -> Result<Vec<ChallengeSet>> {
    let root = ctx.challenge_dir();
    let mut sets = Vec::new();
    for &kind in kinds {
        let dir = root.join(kind.name());
        if dir.join(ChallengeSet::MANIFEST_FILE).exists() {
            sets.push(ChallengeSet::load(&dir).with_context(|| format!("loading challenge set {}", dir.display()))?);
        }
    }
    Ok(sets)
}

/// Builds and saves one challenge set per kind. Every kind is attempted;
/// failures are reported together and the first one decides the exit code.
pub fn cmd_perturb(ctx: &Context, kinds: Option<&[String]>) -> Result<Vec<PathBuf>> {
    let kinds = match kinds {
        Some(k) => parse_kinds(k)?,
        None => ctx.config.kinds()?,
    };
    let path = ctx.required(&ctx.config.paths.dataset, "dataset")?;
    let source = Dataset::load_jsonl(&path, "train").with_context(|| format!("stage perturb: loading {}", path.display()))?;
    let generators = Generators::new(ctx.config.generators.clone());
    let options = ChallengeOptions {
        cap: ctx.config.splits.cap,
        train_size: ctx.config.splits.train,
        test_size: ctx.config.splits.test,
        seed: ctx.config.seed,
        features: ctx.config.features.clone(),
    };
    let root = ctx.challenge_dir();
    let mut written = Vec::new();
    let mut failed: Vec<(PerturbationKind, Error)> = Vec::new();
    for &kind in &kinds {
        match build_challenge_set(&source, kind, &generators, &options) {
            Ok(mut set) => {
                set.manifest.config_hash = Some(ctx.config_hash.clone());
                let dir = root.join(kind.name());
                set.save(&dir)?;
                let s = set.manifest.sizes;
                println!(
                    "{kind}: {} of {} perturbed, {} kept, P {} / Q {} -> {}",
                    s.successes,
                    s.source,
                    s.selected,
                    s.train,
                    s.test,
                    dir.display()
                );
                written.push(dir);
            }
            Err(e) => {
                eprintln!("{kind}: {e}");
                failed.push((kind, e));
            }
        }
    }
    if !failed.is_empty() {
        let summary = failed.iter().map(|(k, e)| format!("{k}: {e}")).collect::<Vec<_>>().join("; ");
        let count = failed.len();
        let (_, first) = failed.swap_remove(0);
        return Err(anyhow::Error::new(first).context(format!(
            "stage perturb: {count} of {} kinds failed ({summary})",
            kinds.len()
        )));
    }
    Ok(written)
}

#[derive(Debug, Serialize)]
struct SampleManifest {
    method: &'static str,
    k: usize,
    seed: u64,
    source_size: usize,
    indices: Vec<usize>,
}

/// Picks `k` diverse examples from `input` by hypothesis n-gram similarity.
pub fn cmd_sample(ctx: &Context, input: &Path, k: usize, greedy: bool, output: Option<&Path>) -> Result<PathBuf> {
    let ds = Dataset::load_jsonl(input, "sample").with_context(|| format!("loading {}", input.display()))?;
    if k == 0 || k > ds.len() {
        return Err(invalid("sample size", format!("k = {k} but the dataset has {} examples", ds.len())).into());
    }
    let hyps: Vec<&str> = ds.examples.iter().map(|e| e.hypothesis.as_str()).collect();
    let kernel = build_kernel(&hyps, &ctx.config.features)?;
    let seed = derive_seed(ctx.config.seed, "sample");
    let indices = if greedy {
        greedy_map(&kernel, k)
    } else {
        sample_k_dpp(&kernel, k, seed)?
    };
    let picked: Vec<Example> = indices.iter().map(|&i| ds.examples[i].clone()).collect();
    let out = output.map(Path::to_path_buf).unwrap_or_else(|| ctx.out.join("sample.jsonl"));
    Dataset::new(ds.name.clone(), "sample", picked).save_jsonl(&out)?;
    let manifest = SampleManifest {
        method: if greedy { "greedy-map" } else { "k-dpp" },
        k,
        seed,
        source_size: ds.len(),
        indices,
    };
    write_stamped(ctx, &out.with_extension("manifest.json"), &manifest)?;
    println!("sampled {k} of {} examples -> {}", ds.len(), out.display());
    Ok(out)
}

#[derive(Debug, Serialize)]
pub struct KindScores {
    pub col: BTreeMap<PerturbationKind, f64>,
    pub row: BTreeMap<PerturbationKind, f64>,
}

#[derive(Debug, Serialize)]
pub struct DynMixPlan {
    pub ratios: BTreeMap<PerturbationKind, f64>,
    /// Sample counts per kind, keyed by total.
    pub counts: BTreeMap<usize, BTreeMap<PerturbationKind, usize>>,
}

#[derive(Debug, Serialize)]
pub struct TrainingFile {
    pub name: String,
    pub seed: u64,
    pub entries: usize,
    pub file: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finetune: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct Plan {
    pub kinds: Vec<PerturbationKind>,
    pub baseline: BTreeMap<PerturbationKind, f64>,
    pub scores: KindScores,
    pub orders: BTreeMap<String, Order>,
    pub dynmix: DynMixPlan,
    pub training: Vec<TrainingFile>,
}

/// The system message used for fine-tune manifests when none is configured:
/// task description, awareness of every kind, strict limitation.
pub fn default_system_prompt(templates: &TemplateSet) -> String {
    let mut parts = vec![templates.task(false).to_string()];
    parts.extend(PerturbationKind::CANONICAL.iter().map(|&k| templates.awareness(k, AwarenessForm::Long).to_string()));
    parts.push(templates.limitation(LimitationForm::Strict).to_string());
    parts.join("\n\n")
}

/// Scores the cross-test matrix, derives Seq orders and DynMix ratios, and,
/// when challenge sets exist, writes the Mix/DynMix/Seq training sets with
/// their fine-tune manifests.
pub fn cmd_plan(ctx: &Context, matrix: Option<&Path>) -> Result<Plan> {
    let path = match matrix {
        Some(p) => p.to_path_buf(),
        None => ctx.required(&ctx.config.paths.matrix, "matrix")?,
    };
    let m = load_matrix(&path).context("stage plan")?;
    let scores = row_col_scores(&m)?;
    let derived = derive_orders(&scores);
    let baseline = m.baseline_map();
    let ratios = dynmix_ratios(&baseline)?;
    let counts = ctx.config.plan.dynmix_total.iter().map(|&t| (t, largest_remainder(t, &ratios))).collect();

    let mut orders = BTreeMap::new();
    for name in &ctx.config.plan.seq_orders {
        let order = derived
            .get(name)
            .ok_or_else(|| invalid("order", format!("unknown derived order `{name}`")))?;
        orders.insert(name.clone(), order.clone());
    }
    for (name, text) in &ctx.config.plan.explicit_orders {
        let order = parse_order(text)?;
        let mut sorted = order.clone();
        sorted.sort();
        let mut expected = m.kinds.clone();
        expected.sort();
        if sorted != expected {
            return Err(invalid("order", format!("`{name}` = `{text}` does not cover the matrix kinds exactly")).into());
        }
        orders.insert(name.clone(), order);
    }

    let mut plan = Plan {
        kinds: m.kinds.clone(),
        baseline: baseline.clone(),
        scores: KindScores {
            col: m.kinds.iter().copied().zip(scores.col.iter().copied()).collect(),
            row: m.kinds.iter().copied().zip(scores.row.iter().copied()).collect(),
        },
        orders,
        dynmix: DynMixPlan { ratios, counts },
        training: Vec::new(),
    };

    let sets = load_sets(ctx, &m.kinds)?;
    let plan_dir = ctx.out.join("plan");
    if sets.is_empty() {
        log::info!("no challenge sets under {}; writing scores only", ctx.challenge_dir().display());
    } else if sets.len() != m.kinds.len() {
        let have: Vec<PerturbationKind> = sets.iter().map(|s| s.kind).collect();
        let missing: Vec<String> = m.kinds.iter().filter(|k| !have.contains(k)).map(|k| k.to_string()).collect();
        return Err(invalid("plan", format!("challenge sets missing for {}", missing.join(", "))).into());
    } else {
        let index = match &ctx.config.paths.tables {
            Some(_) => Some(tables(ctx)?),
            None => {
                log::warn!("paths.tables is not set; skipping fine-tune manifests");
                None
            }
        };
        let system = match &ctx.config.plan.system_prompt {
            Some(s) => s.clone(),
            None => default_system_prompt(&templates(ctx)?),
        };
        for seed in ctx.config.seeds() {
            let mut built: Vec<(String, TrainingSet)> = Vec::new();
            for &k in &ctx.config.plan.mix_k {
                built.push((format!("mix-k{k}"), build_mix(&sets, k, seed).context("stage plan: mix")?));
            }
            for &total in &ctx.config.plan.dynmix_total {
                let ts = build_dynmix(&sets, total, &baseline, seed).context("stage plan: dynmix")?;
                built.push((format!("dynmix-{total}"), ts));
            }
            for (name, order) in &plan.orders {
                let stages = build_seq_plan(&sets, order, ctx.config.plan.seq_k, seed).context("stage plan: seq")?;
                for (i, ts) in stages.into_iter().enumerate() {
                    built.push((format!("seq-{name}-stage{}-{}", i + 1, order[i].name()), ts));
                }
            }
            let seed_dir = format!("seed-{seed}");
            for (name, ts) in built {
                let file = Path::new("training").join(&seed_dir).join(format!("{name}.json"));
                write_stamped(ctx, &plan_dir.join(&file), &ts)?;
                let finetune = match &index {
                    Some(index) => {
                        let rel = Path::new("finetune").join(&seed_dir).join(format!("{name}.jsonl"));
                        export_manifest(ctx, &ts, index, &system, &plan_dir.join(&rel))?;
                        Some(rel.display().to_string())
                    }
                    None => None,
                };
                plan.training.push(TrainingFile {
                    name,
                    seed,
                    entries: ts.len(),
                    file: file.display().to_string(),
                    finetune,
                });
            }
        }
    }
    write_stamped(ctx, &plan_dir.join("plan.json"), &plan)?;
    for (i, kind) in plan.kinds.iter().enumerate() {
        println!(
            "{kind}: COL {:+.3}  ROW {:+.3}  DynMix ratio {:.3}",
            scores.col[i], scores.row[i], plan.dynmix.ratios[kind]
        );
    }
    for (name, order) in &plan.orders {
        let codes: String = order.iter().map(|k| k.code()).collect();
        println!("{name}: {codes}");
    }
    println!("{} training files -> {}", plan.training.len(), plan_dir.display());
    Ok(plan)
}

/// Writes `<path>` (chat JSONL) and `<path stem>.meta.json`.
fn export_manifest(ctx: &Context, ts: &TrainingSet, index: &TableIndex, system: &str, path: &Path) -> Result<FinetuneMeta> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let file = io::BufWriter::new(File::create(path)?);
    let meta = export_finetune_manifest(ts, index, system, file)?;
    write_stamped(ctx, &path.with_extension("meta.json"), &meta)?;
    Ok(meta)
}

fn strategies(ctx: &Context, names: Option<&[String]>) -> Result<Vec<PromptStrategy>> {
    match names {
        Some(n) if !n.is_empty() => Ok(n.iter().map(|s| s.parse()).collect::<Result<_, _>>()?),
        _ => Ok(ctx.config.strategies()?),
    }
}

#[derive(Serialize)]
struct PromptArtifact<'a> {
    seed: u64,
    spec_hash: String,
    estimated_tokens: usize,
    spec: &'a PromptSpec,
}

/// Builds the prompt spec for each strategy and writes it to `prompts/`.
/// With a preview pair, also prints the rendered chat request.
pub fn cmd_prompt(ctx: &Context, names: Option<&[String]>, preview: Option<(&str, &str)>) -> Result<Vec<PromptSpec>> {
    let templates = templates(ctx)?;
    let pool = exemplars(ctx)?;
    let profile = ctx.config.model_profile()?;
    let seed = ctx.config.seed;
    let mut specs = Vec::new();
    for strategy in strategies(ctx, names)? {
        let spec = build_prompt(strategy, &templates, &pool, &profile, seed)
            .with_context(|| format!("stage prompt: building {strategy}"))?;
        let path = ctx.out.join("prompts").join(format!("{}.json", strategy_dir(strategy)));
        let artifact = PromptArtifact {
            seed,
            spec_hash: spec.hash(),
            estimated_tokens: spec.estimated_tokens(),
            spec: &spec,
        };
        write_stamped(ctx, &path, &artifact)?;
        println!(
            "{strategy}: {} sections, {} demonstrations, about {} tokens -> {}",
            spec.sections.len(),
            spec.demonstrations.len(),
            artifact.estimated_tokens,
            path.display()
        );
        if let Some((premise, hypothesis)) = preview {
            println!("{}", serde_json::to_string_pretty(&render_chat_request(&spec, premise, hypothesis))?);
        }
        specs.push(spec);
    }
    Ok(specs)
}

/// Per-run knobs that do not belong in the config hash.
#[derive(Debug, Clone, Default)]
pub struct RunArgs {
    pub strategies: Option<Vec<String>>,
    pub sets: Option<Vec<String>>,
    pub parallelism: Option<usize>,
}

#[derive(Serialize)]
struct ResponseLine<'a> {
    set: &'a str,
    example_id: &'a str,
    request_hash: &'a str,
    text: Option<&'a str>,
    latency_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a str>,
}

fn make_backend(ctx: &Context, verdicts: inoc_core::prompting::VerdictStyle) -> Result<Box<dyn Backend>> {
    let b = &ctx.config.backend;
    Ok(match b.kind {
        BackendKind::Mock => Box::new(MockBackend::new(b.mock.clone(), verdicts)),
        BackendKind::Http => {
            // Offline runs only read the cache, so a missing token is fine there.
            let token = if ctx.offline { b.token().ok().flatten() } else { b.token()? };
            Box::new(HttpBackend::new(b.endpoint.clone(), token, Duration::from_secs(b.timeout_secs)))
        }
    })
}

fn run_baseline(ctx: &Context) -> Result<Option<BTreeMap<PerturbationKind, f64>>> {
    let configured = ctx.config.baseline()?;
    if !configured.is_empty() {
        return Ok(Some(configured));
    }
    match &ctx.config.paths.matrix {
        Some(p) => Ok(Some(load_matrix(&ctx.resolve(p))?.baseline_map())),
        None => Ok(None),
    }
}

/// Build prompt, render requests, query the backend, extract verdicts and
/// write one report bundle per strategy and seed, covering Q and Q′ of every
/// selected challenge set.
pub fn cmd_run(ctx: &Context, args: &RunArgs) -> Result<Vec<PathBuf>> {
    let kinds = match &args.sets {
        Some(s) if !s.is_empty() => parse_kinds(s)?,
        _ if !ctx.config.run.sets.is_empty() => parse_kinds(&ctx.config.run.sets)?,
        _ => {
            let mut all = PerturbationKind::CANONICAL.to_vec();
            all.push(PerturbationKind::WordSwap);
            all
        }
    };
    let sets = load_sets(ctx, &kinds).context("stage load")?;
    if sets.is_empty() {
        return Err(anyhow::Error::new(invalid(
            "run",
            format!("no challenge sets under {}", ctx.challenge_dir().display()),
        ))
        .context("stage load"));
    }
    if let Some(s) = &args.sets {
        if sets.len() != s.len() {
            return Err(anyhow::Error::new(invalid("run", "some requested challenge sets are missing")).context("stage load"));
        }
    }
    let index = tables(ctx).context("stage load")?;
    let templates = templates(ctx).context("stage load")?;
    let pool = exemplars(ctx).context("stage load")?;
    let lexicon = lexicon(ctx, None).context("stage load")?;
    let profile = ctx.config.model_profile()?;
    let baseline = run_baseline(ctx).context("stage load")?;
    let backend = make_backend(ctx, profile.verdicts).context("stage backend")?;
    let backend_profile = ctx.config.backend.profile();
    let cache = match &ctx.config.paths.cache {
        Some(p) => Some(ResponseCache::open(&ctx.resolve(p)).context("stage backend: opening cache")?),
        None => None,
    };
    if ctx.offline && backend.uses_network() && cache.is_none() {
        return Err(anyhow::Error::new(invalid("run", "--offline with an http backend needs paths.cache")).context("stage backend"));
    }
    let options = RunOptions {
        parallelism: args.parallelism.unwrap_or(ctx.config.backend.parallelism),
        cache: cache.as_ref(),
        offline: ctx.offline,
    };
    let renderer = PremiseRenderer::default();

    let mut bundles = Vec::new();
    for strategy in strategies(ctx, args.strategies.as_deref())? {
        let mut reports = Vec::new();
        for seed in ctx.config.seeds() {
            let spec = build_prompt(strategy, &templates, &pool, &profile, seed)
                .with_context(|| format!("stage prompt: building {strategy}"))?;
            let spec_hash = spec.hash();
            let mut set_reports = Vec::new();
            let mut verdicts = Vec::new();
            let mut log_lines: Vec<(String, RawResponse)> = Vec::new();
            for set in &sets {
                for (role, examples) in [(SetRole::Q, &set.test), (SetRole::QPrime, &set.test_original)] {
                    let name = match role {
                        SetRole::Q => format!("Q_{}", set.kind.name()),
                        SetRole::QPrime => format!("Qprime_{}", set.kind.name()),
                    };
                    let jobs = examples
                        .iter()
                        .map(|ex| {
                            let table = index.get(&ex.table_id).ok_or_else(|| {
                                invalid("example", format!("`{}` references unknown table `{}`", ex.id, ex.table_id))
                            })?;
                            let premise = renderer.render(&drr_top_k(table, &ex.hypothesis, ctx.config.prompt.drr_k));
                            Ok(Job {
                                example_id: ex.id.clone(),
                                gold: ex.label,
                                hypothesis: ex.hypothesis.clone(),
                                messages: render_chat_request(&spec, &premise, &ex.hypothesis),
                            })
                        })
                        .collect::<Result<Vec<Job>, Error>>()
                        .with_context(|| format!("stage render: {name}"))?;
                    let responses = run_eval(&jobs, &spec_hash, &backend_profile, backend.as_ref(), &options)
                        .with_context(|| format!("stage backend: {name}"))?;
                    let failed = responses.iter().filter(|r| r.text.is_none()).count();
                    if !responses.is_empty() && failed == responses.len() {
                        let first = responses[0].error.clone().unwrap_or_default();
                        return Err(anyhow::Error::new(Error::Backend(format!(
                            "all {failed} requests failed; first error: {first}"
                        )))
                        .context(format!("stage backend: {name}")));
                    }
                    if failed > 0 {
                        log::warn!("{name}: {failed} of {} requests failed", responses.len());
                    }
                    let (set_report, set_verdicts) = score_set(&name, set.kind, role, examples, &responses, &lexicon)
                        .with_context(|| format!("stage extract: {name}"))?;
                    set_reports.push(set_report);
                    verdicts.extend(set_verdicts);
                    log_lines.extend(responses.into_iter().map(|r| (name.clone(), r)));
                }
            }
            let provenance = Provenance {
                strategy: strategy.to_string(),
                backend: backend.name(),
                seed,
                config_hash: ctx.config_hash.clone(),
                tool_version: TOOL_VERSION.to_string(),
            };
            let report = EvalReport::new(provenance, set_reports, baseline.clone()).context("stage report")?;
            let dir = ctx.out.join("runs").join(strategy_dir(strategy)).join(format!("seed-{seed}"));
            write_report_bundle(&dir, &report, &verdicts).context("stage report")?;
            let lines: Vec<ResponseLine> = log_lines
                .iter()
                .map(|(set, r)| ResponseLine {
                    set,
                    example_id: &r.example_id,
                    request_hash: &r.request_hash,
                    text: r.text.as_deref(),
                    latency_ms: r.latency_ms,
                    error: r.error.as_deref(),
                })
                .collect();
            write_jsonl(&dir.join("responses.jsonl"), &lines).context("stage report")?;
            print_summary(&report, &dir);
            reports.push(report);
            bundles.push(dir);
        }
        if reports.len() > 1 {
            let path = ctx.out.join("runs").join(strategy_dir(strategy)).join("aggregate.json");
            write_stamped(ctx, &path, &aggregate_seeds(&reports))?;
        }
    }
    Ok(bundles)
}

fn print_summary(report: &EvalReport, dir: &Path) {
    let accs: Vec<String> = report.sets.iter().map(|s| format!("{} {:.3}", s.name, s.accuracy)).collect();
    let mu = report.mu.map(|m| format!(", mu {m:+.2}")).unwrap_or_default();
    println!(
        "{} seed {}: {}{mu} -> {}",
        report.provenance.strategy,
        report.provenance.seed,
        accs.join(", "),
        dir.display()
    );
}

fn score_set(
    name: &str,
    kind: PerturbationKind,
    role: SetRole,
    examples: &[Example],
    responses: &[RawResponse],
    lexicon: &Lexicon,
) -> Result<(SetReport, Vec<VerdictRecord>)> {
    let mut preds = Vec::with_capacity(examples.len());
    let mut records = Vec::with_capacity(examples.len());
    let (mut unparseable, mut errors) = (0, 0);
    for (ex, r) in examples.iter().zip(responses) {
        let record = match &r.text {
            Some(text) => {
                let v = extract_answer(text, lexicon);
                if v.is_unparseable() {
                    unparseable += 1;
                }
                VerdictRecord {
                    set: name.to_string(),
                    example_id: ex.id.clone(),
                    gold: ex.label,
                    predicted: v.label,
                    matched_phrase: v.matched_phrase,
                    marker_found: v.marker_found,
                    error: v.label.is_none().then(|| "unparseable".to_string()),
                }
            }
            None => {
                errors += 1;
                VerdictRecord {
                    set: name.to_string(),
                    example_id: ex.id.clone(),
                    gold: ex.label,
                    predicted: None,
                    matched_phrase: None,
                    marker_found: false,
                    error: r.error.clone(),
                }
            }
        };
        preds.push(record.predicted);
        records.push(record);
    }
    let golds: Vec<Label> = examples.iter().map(|e| e.label).collect();
    let report = SetReport {
        name: name.to_string(),
        kind,
        role,
        examples: examples.len(),
        accuracy: accuracy(&preds, &golds)?,
        unparseable,
        errors,
        confusion: confusion(&preds, &golds)?,
    };
    Ok((report, records))
}

#[derive(Debug, Serialize)]
pub struct ExtractedLine {
    pub example_id: String,
    pub label: Option<Label>,
    pub matched_phrase: Option<String>,
    pub marker_found: bool,
}

/// Parses a JSONL file of responses (`text` plus `example_id` or `id`) into verdicts.
pub fn cmd_extract(ctx: &Context, input: &Path, output: Option<&Path>, lexicon_path: Option<&Path>) -> Result<Vec<ExtractedLine>> {
    let lexicon = lexicon(ctx, lexicon_path)?;
    let reader = BufReader::new(File::open(input).with_context(|| format!("opening {}", input.display()))?);
    let mut lines = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: input.to_path_buf(),
            line: n + 1,
            message: e.to_string(),
        })?;
        let id = value
            .get("example_id")
            .or_else(|| value.get("id"))
            .and_then(|v| v.as_str())
            .map(String::from)
            .unwrap_or_else(|| format!("line-{}", n + 1));
        let (label, matched_phrase, marker_found) = match value.get("text").and_then(|t| t.as_str()) {
            Some(text) => {
                let v = extract_answer(text, &lexicon);
                (v.label, v.matched_phrase, v.marker_found)
            }
            None => (None, None, false),
        };
        lines.push(ExtractedLine {
            example_id: id,
            label,
            matched_phrase,
            marker_found,
        });
    }
    match output {
        Some(p) => write_jsonl(p, &lines)?,
        None => {
            let stdout = io::stdout();
            let mut out = stdout.lock();
            for l in &lines {
                serde_json::to_writer(&mut out, l)?;
                out.write_all(b"\n")?;
            }
        }
    }
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for l in &lines {
        *counts.entry(l.label.map_or("unparseable".into(), |x| x.to_string())).or_default() += 1;
    }
    let summary: Vec<String> = counts.iter().map(|(k, v)| format!("{k}={v}")).collect();
    eprintln!("{} responses: {}", lines.len(), summary.join(", "));
    Ok(lines)
}

fn find_reports(path: &Path, found: &mut Vec<PathBuf>) -> io::Result<()> {
    if path.is_file() {
        found.push(path.to_path_buf());
        return Ok(());
    }
    let direct = path.join("report.json");
    if direct.is_file() {
        found.push(direct);
        return Ok(());
    }
    let mut entries: Vec<PathBuf> = fs::read_dir(path)?.map(|e| e.map(|e| e.path())).collect::<io::Result<_>>()?;
    entries.sort();
    for entry in entries.into_iter().filter(|p| p.is_dir()) {
        find_reports(&entry, found)?;
    }
    Ok(())
}

/// Reads `train,test,accuracy` rows (kind names or codes).
pub fn read_cells(path: &Path) -> Result<Vec<CrossTestCell>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cells = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if n == 0 && fields.first() == Some(&"train") {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            message,
        };
        if fields.len() != 3 {
            return Err(parse_err(format!("expected 3 fields, found {}", fields.len())).into());
        }
        cells.push(CrossTestCell {
            train: fields[0].parse().map_err(|e: Error| parse_err(e.to_string()))?,
            test: fields[1].parse().map_err(|e: Error| parse_err(e.to_string()))?,
            accuracy: fields[2].parse().map_err(|e: std::num::ParseFloatError| parse_err(e.to_string()))?,
        });
    }
    Ok(cells)
}

#[derive(Debug, Serialize)]
pub struct ReportSummary {
    pub bundles: Vec<String>,
    pub aggregates: BTreeMap<String, BTreeMap<String, inoc_core::evaluation::SeedAggregate>>,
}

/// Aggregates report bundles across seeds, and optionally assembles
/// externally measured cross-test cells into a matrix CSV.
pub fn cmd_report(ctx: &Context, inputs: &[PathBuf], cells: Option<&Path>) -> Result<ReportSummary> {
    let report_dir = ctx.out.join("report");
    if let Some(cells_path) = cells {
        let baseline = run_baseline(ctx)?.ok_or_else(|| {
            invalid("report", "assembling a cross-test matrix needs run.baseline or paths.matrix")
        })?;
        let matrix = assemble_cross_test(&read_cells(cells_path)?, &baseline)?;
        fs::create_dir_all(&report_dir)?;
        let path = report_dir.join("cross_test.csv");
        fs::write(&path, matrix.to_csv())?;
        println!("cross-test matrix -> {}", path.display());
    }
    let roots: Vec<PathBuf> = if inputs.is_empty() {
        if cells.is_some() {
            return Ok(ReportSummary {
                bundles: Vec::new(),
                aggregates: BTreeMap::new(),
            });
        }
        vec![ctx.out.join("runs")]
    } else {
        inputs.to_vec()
    };
    let mut found = Vec::new();
    for root in &roots {
        find_reports(root, &mut found).with_context(|| format!("scanning {}", root.display()))?;
    }
    if found.is_empty() {
        return Err(invalid("report", "no report.json files found").into());
    }
    let mut by_strategy: BTreeMap<String, Vec<EvalReport>> = BTreeMap::new();
    let mut md = String::new();
    for path in &found {
        let report: EvalReport = serde_json::from_str(&fs::read_to_string(path)?).with_context(|| format!("reading {}", path.display()))?;
        md.push_str(&report.to_markdown());
        md.push('\n');
        by_strategy.entry(report.provenance.strategy.clone()).or_default().push(report);
    }
    let aggregates: BTreeMap<String, _> = by_strategy.iter().map(|(s, r)| (s.clone(), aggregate_seeds(r))).collect();
    md.push_str("# Mean over seeds\n\n| strategy | metric | seeds | mean |\n|---|---|---:|---:|\n");
    for (strategy, metrics) in &aggregates {
        for (metric, agg) in metrics {
            md.push_str(&format!("| {strategy} | {metric} | {} | {:.4} |\n", agg.per_seed.len(), agg.mean));
        }
    }
    let summary = ReportSummary {
        bundles: found.iter().map(|p| p.display().to_string()).collect(),
        aggregates,
    };
    write_stamped(ctx, &report_dir.join("aggregate.json"), &summary.aggregates)?;
    fs::write(report_dir.join("aggregate.md"), &md)?;
    print!("{md}");
    Ok(summary)
}
