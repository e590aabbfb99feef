use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{load_records, Label};
use crate::error::{Error, Result};
use crate::perturb::PerturbationKind;
use crate::seed::rng_for;

/// Where a demonstration comes from: the original set or one challenge set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Source {
    #[serde(rename = "O")]
    Original,
    #[serde(untagged)]
    Perturbed(PerturbationKind),
}

impl Source {
    /// Round-robin order used to spread demonstrations.
    pub const ROTATION: [Source; 6] = [
        Source::Original,
        Source::Perturbed(PerturbationKind::Char),
        Source::Perturbed(PerturbationKind::Neg),
        Source::Perturbed(PerturbationKind::Num),
        Source::Perturbed(PerturbationKind::Loc),
        Source::Perturbed(PerturbationKind::Stan),
    ];
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Original => f.write_str("original"),
            Source::Perturbed(k) => write!(f, "{k}"),
        }
    }
}

/// A worked example with its rendered premise and optional rationale.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub id: String,
    pub source: Source,
    pub premise: String,
    pub hypothesis: String,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explanation: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExemplarPool {
    pools: BTreeMap<Source, Vec<Exemplar>>,
}

impl ExemplarPool {
    pub fn new(exemplars: impl IntoIterator<Item = Exemplar>) -> Self {
        let mut pools: BTreeMap<Source, Vec<Exemplar>> = BTreeMap::new();
        for ex in exemplars {
            pools.entry(ex.source).or_default().push(ex);
        }
        ExemplarPool { pools }
    }

    /// One exemplar per line; `source` is `"O"` or a kind code.
    pub fn load_jsonl(path: &Path) -> Result<Self> {
        let records: Vec<Exemplar> = load_records(path, |e: &Exemplar| e.id.clone())?;
        Ok(ExemplarPool::new(records))
    }

    pub fn get(&self, source: Source) -> &[Exemplar] {
        self.pools.get(&source).map(Vec::as_slice).unwrap_or_default()
    }
}

/// Splits `total` over `sources` round-robin, earlier sources first.
pub fn spread(total: usize, sources: &[Source]) -> BTreeMap<Source, usize> {
    let mut counts: BTreeMap<Source, usize> = sources.iter().map(|&s| (s, 0)).collect();
    if sources.is_empty() {
        return counts;
    }
    for i in 0..total {
        *counts.get_mut(&sources[i % sources.len()]).unwrap() += 1;
    }
    counts
}

/// Draws `counts[source]` exemplars from each pool. With `balance`, the
/// per-label totals differ from an even split by at most one; with
/// `mpi_coverage`, every perturbation kind contributes at least one.
pub fn select_exemplars(
    pools: &ExemplarPool,
    counts: &BTreeMap<Source, usize>,
    balance: bool,
    mpi_coverage: bool,
    seed: u64,
) -> Result<Vec<Exemplar>> {
    let total: usize = counts.values().sum();
    if mpi_coverage {
        let kinds = PerturbationKind::CANONICAL.len();
        if total < kinds {
            return Err(Error::ConstraintInfeasible(format!(
                "coverage needs one exemplar for each of {kinds} kinds but only {total} were requested"
            )));
        }
        if let Some(k) = PerturbationKind::CANONICAL
            .iter()
            .find(|&&k| counts.get(&Source::Perturbed(k)).copied().unwrap_or(0) == 0)
        {
            return Err(Error::ConstraintInfeasible(format!("coverage needs at least one {k} exemplar")));
        }
    }
    for (&source, &want) in counts {
        let have = pools.get(source).len();
        if have < want {
            return Err(Error::InsufficientSamples {
                context: format!("{source} exemplar pool"),
                needed: want,
                available: have,
            });
        }
    }

    let mut rng = rng_for(seed, "exemplars");
    let mut picked = Vec::with_capacity(total);
    if balance {
        let plan = balanced_plan(pools, counts, &mut rng)?;
        for ((source, label), n) in plan {
            let candidates: Vec<&Exemplar> = pools.get(source).iter().filter(|e| e.label == label).collect();
            for i in sorted_sample(&mut rng, candidates.len(), n) {
                picked.push(candidates[i].clone());
            }
        }
    } else {
        for (&source, &n) in counts {
            let pool = pools.get(source);
            for i in sorted_sample(&mut rng, pool.len(), n) {
                picked.push(pool[i].clone());
            }
        }
    }
    picked.shuffle(&mut rng);
    Ok(picked)
}

fn sorted_sample<R: Rng>(rng: &mut R, len: usize, n: usize) -> Vec<usize> {
    let mut v = index::sample(rng, len, n).into_vec();
    v.sort_unstable();
    v
}

/// Per-(source, label) draw counts meeting the source counts and a label
/// split within one of even. Solved as a small max-flow.
fn balanced_plan<R: Rng>(
    pools: &ExemplarPool,
    counts: &BTreeMap<Source, usize>,
    rng: &mut R,
) -> Result<BTreeMap<(Source, Label), usize>> {
    let sources: Vec<(Source, usize)> = counts.iter().filter(|(_, &n)| n > 0).map(|(&s, &n)| (s, n)).collect();
    let total: usize = sources.iter().map(|(_, n)| n).sum();
    let (base, extra) = (total / 3, total % 3);
    let mut labels = Label::ALL;
    labels.shuffle(rng);
    // Every way of handing the `extra` leftover slots to distinct labels.
    let mut targets: Vec<[usize; 3]> = Vec::new();
    for mask in 0u8..8 {
        if mask.count_ones() as usize == extra {
            let mut t = [base; 3];
            for (i, slot) in t.iter_mut().enumerate() {
                if mask >> i & 1 == 1 {
                    *slot += 1;
                }
            }
            targets.push(t);
        }
    }
    targets.shuffle(rng);

    let s = sources.len();
    let node_count = 2 + s + 3;
    let (src, sink) = (0, node_count - 1);
    for target in targets {
        let mut cap = vec![vec![0usize; node_count]; node_count];
        for (i, &(source, n)) in sources.iter().enumerate() {
            cap[src][1 + i] = n;
            for (j, &label) in labels.iter().enumerate() {
                cap[1 + i][1 + s + j] = pools.get(source).iter().filter(|e| e.label == label).count();
            }
        }
        for (j, &t) in target.iter().enumerate() {
            cap[1 + s + j][sink] = t;
        }
        let original = cap.clone();
        if max_flow(&mut cap, src, sink) == total {
            let mut plan = BTreeMap::new();
            for (i, &(source, _)) in sources.iter().enumerate() {
                for (j, &label) in labels.iter().enumerate() {
                    let used = original[1 + i][1 + s + j] - cap[1 + i][1 + s + j];
                    if used > 0 {
                        plan.insert((source, label), used);
                    }
                }
            }
            return Ok(plan);
        }
    }
    Err(Error::ConstraintInfeasible(format!(
        "no label-balanced draw of {total} exemplars exists for the requested per-source counts"
    )))
}

/// Edmonds-Karp on a dense residual matrix; returns the flow value.
fn max_flow(cap: &mut [Vec<usize>], src: usize, sink: usize) -> usize {
    let n = cap.len();
    let mut flow = 0;
    loop {
        let mut parent = vec![usize::MAX; n];
        parent[src] = src;
        let mut queue = std::collections::VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if parent[v] == usize::MAX && cap[u][v] > 0 {
                    parent[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if parent[sink] == usize::MAX {
            return flow;
        }
        let mut push = usize::MAX;
        let mut v = sink;
        while v != src {
            push = push.min(cap[parent[v]][v]);
            v = parent[v];
        }
        let mut v = sink;
        while v != src {
            let u = parent[v];
            cap[u][v] -= push;
            cap[v][u] += push;
            v = u;
        }
        flow += push;
    }
}
