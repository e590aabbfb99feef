//! Tables, NLI examples and datasets, plus their JSONL persistence.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perturb::PerturbationKind;
use crate::text;

/// NLI gold label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    /// Entailment.
    E,
    /// Contradiction.
    C,
    /// Neutral.
    N,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::E, Label::C, Label::N];

    pub fn index(self) -> usize {
        match self {
            Label::E => 0,
            Label::C => 1,
            Label::N => 2,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Label::E => "E",
            Label::C => "C",
            Label::N => "N",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "E" | "e" | "entailment" => Ok(Label::E),
            "C" | "c" | "contradiction" => Ok(Label::C),
            "N" | "n" | "neutral" => Ok(Label::N),
            other => Err(Error::invalid("label", format!("`{other}` is not one of E, C, N"))),
        }
    }
}

/// A semi-structured premise: an entity title and its key/value rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub id: String,
    pub title: String,
    pub rows: Vec<(String, String)>,
}

impl Table {
    pub fn validate(&self) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::invalid("table", format!("`{}` has no rows", self.id)));
        }
        if let Some(i) = self.rows.iter().position(|(k, _)| k.trim().is_empty()) {
            return Err(Error::invalid("table", format!("`{}` row {i} has an empty key", self.id)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub table_id: String,
    pub hypothesis: String,
    pub label: Label,
    pub perturbation: Option<PerturbationKind>,
    /// Id of the unperturbed ancestor; set exactly when `perturbation` is.
    pub parent_id: Option<String>,
}

impl Example {
    pub fn new(id: impl Into<String>, table_id: impl Into<String>, hypothesis: impl Into<String>, label: Label) -> Self {
        Example {
            id: id.into(),
            table_id: table_id.into(),
            hypothesis: hypothesis.into(),
            label,
            perturbation: None,
            parent_id: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hypothesis.trim().is_empty() {
            return Err(Error::invalid("example", format!("`{}` has an empty hypothesis", self.id)));
        }
        if self.perturbation.is_some() != self.parent_id.is_some() {
            return Err(Error::invalid(
                "example",
                format!("`{}` must set perturbation and parent_id together", self.id),
            ));
        }
        Ok(())
    }

    /// The unperturbed ancestor id, or the example's own id for originals.
    pub fn lineage(&self) -> &str {
        self.parent_id.as_deref().unwrap_or(&self.id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    /// `train`, `alpha1`, `alpha2`, `alpha3`, or a challenge split name.
    pub split_tag: String,
    pub examples: Vec<Example>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, split_tag: impl Into<String>, examples: Vec<Example>) -> Self {
        Dataset {
            name: name.into(),
            split_tag: split_tag.into(),
            examples,
        }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Loads a dataset from JSONL. The name is the file stem.
    pub fn load_jsonl(path: &Path, split_tag: &str) -> Result<Self> {
        let examples: Vec<Example> = load_records(path, |e: &Example| e.id.clone())?;
        for (i, example) in examples.iter().enumerate() {
            example.validate().map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok(Dataset::new(name, split_tag, examples))
    }

    pub fn save_jsonl(&self, path: &Path) -> Result<()> {
        write_jsonl(path, &self.examples)
    }
}

/// Tables keyed by id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TableIndex {
    tables: BTreeMap<String, Table>,
}

impl TableIndex {
    pub fn new(tables: impl IntoIterator<Item = Table>) -> Self {
        TableIndex {
            tables: tables.into_iter().map(|t| (t.id.clone(), t)).collect(),
        }
    }

    pub fn load_jsonl(path: &Path) -> Result<Self> {
        let tables: Vec<Table> = load_records(path, |t: &Table| t.id.clone())?;
        for (i, table) in tables.iter().enumerate() {
            table.validate().map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(TableIndex::new(tables))
    }

    pub fn save_jsonl(&self, path: &Path) -> Result<()> {
        let tables: Vec<&Table> = self.tables.values().collect();
        write_jsonl(path, &tables)
    }

    pub fn get(&self, id: &str) -> Option<&Table> {
        self.tables.get(id)
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }
}

/// Reads one JSON record per line, rejecting malformed lines and duplicate ids.
/// Whitespace-only lines are skipped but still counted.
pub fn load_records<T, F>(path: &Path, id_of: F) -> Result<Vec<T>>
where
    T: DeserializeOwned,
    F: Fn(&T) -> String,
{
    let content = fs::read_to_string(path)?;
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut out = Vec::new();
    for (i, line) in content.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        let id = id_of(&record);
        if let Some(&first) = seen.get(&id) {
            return Err(Error::DuplicateId {
                id,
                first,
                second: line_no,
            });
        }
        seen.insert(id, line_no);
        out.push(record);
    }
    Ok(out)
}

/// Writes one compact JSON object per line, LF-terminated.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let mut out = BufWriter::new(fs::File::create(path)?);
    for record in records {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Problems in a table that still render but produce odd premises.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PremiseLint {
    EmptyValue { row: usize, key: String },
}

/// Sentence-per-row premise renderer.
///
/// Each row becomes `The <key> of <title> is <value>.`, using `are` for keys
/// listed as plural. Keys with their own sentence template (`{title}` and
/// `{value}` placeholders) use it instead. Sentences are joined by two spaces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PremiseRenderer {
    plural_keys: BTreeSet<String>,
    key_templates: BTreeMap<String, String>,
}

impl Default for PremiseRenderer {
    fn default() -> Self {
        PremiseRenderer::with_plural_keys([
            "official languages",
            "official scripts",
            "languages",
            "genres",
            "members",
            "children",
            "awards",
            "occupations",
            "products",
            "subsidiaries",
            "founders",
        ])
        .with_key_template("founded", "{title} was founded in {value}.")
        .with_key_template("born", "{title} was born on {value}.")
        .with_key_template("died", "{title} died on {value}.")
    }
}

impl PremiseRenderer {
    pub fn with_plural_keys<I, S>(keys: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        PremiseRenderer {
            plural_keys: keys.into_iter().map(|k| k.as_ref().trim().to_lowercase()).collect(),
            key_templates: BTreeMap::new(),
        }
    }

    pub fn with_key_template(mut self, key: &str, template: &str) -> Self {
        self.key_templates.insert(key.trim().to_lowercase(), template.to_string());
        self
    }

    pub fn render(&self, table: &Table) -> String {
        for lint in self.lint(table) {
            match lint {
                PremiseLint::EmptyValue { row, key } => {
                    log::warn!("table `{}` row {row} (`{key}`) has an empty value", table.id)
                }
            }
        }
        table
            .rows
            .iter()
            .map(|(key, value)| {
                let lowered = key.trim().to_lowercase();
                if let Some(t) = self.key_templates.get(&lowered) {
                    return t.replace("{title}", &table.title).replace("{value}", value);
                }
                let verb = if self.plural_keys.contains(&lowered) {
                    "are"
                } else {
                    "is"
                };
                format!("The {key} of {} {verb} {value}.", table.title)
            })
            .collect::<Vec<_>>()
            .join("  ")
    }

    pub fn lint(&self, table: &Table) -> Vec<PremiseLint> {
        table
            .rows
            .iter()
            .enumerate()
            .filter(|(_, (_, v))| v.trim().is_empty())
            .map(|(row, (key, _))| PremiseLint::EmptyValue { row, key: key.clone() })
            .collect()
    }
}

/// Renders with the default plural-key list.
pub fn render_premise(table: &Table) -> String {
    PremiseRenderer::default().render(table)
}

/// Distracting-row removal: keeps the `k` rows sharing the most tokens with
/// the hypothesis.
///
/// A row's score is the number of distinct non-stopword hypothesis tokens that
/// occur among its key and value tokens. Rows come back in descending score,
/// ties in original order. Tables with at most `k` rows are returned as is;
/// `k = 0` is treated as 1.
pub fn drr_top_k(table: &Table, hypothesis: &str, k: usize) -> Table {
    let k = k.max(1);
    if table.rows.len() <= k {
        return table.clone();
    }
    let wanted: HashSet<String> = text::tokens(hypothesis)
        .into_iter()
        .filter(|t| !text::is_stopword(t))
        .collect();
    let mut scored: Vec<(usize, usize)> = table
        .rows
        .iter()
        .enumerate()
        .map(|(i, (key, value))| {
            let row_tokens: HashSet<String> = text::tokens(key).into_iter().chain(text::tokens(value)).collect();
            (i, wanted.intersection(&row_tokens).count())
        })
        .collect();
    scored.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    Table {
        id: table.id.clone(),
        title: table.title.clone(),
        rows: scored.iter().take(k).map(|&(i, _)| table.rows[i].clone()).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: &[(&str, &str)]) -> Table {
        Table {
            id: "t".into(),
            title: "T".into(),
            rows: rows.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }

    #[test]
    fn renders_wima_row() {
        let t = Table {
            id: "wima".into(),
            title: "WIMA".into(),
            rows: vec![("region".into(), "Worldwide".into())],
        };
        assert_eq!(render_premise(&t), "The region of WIMA is Worldwide.");
    }

    #[test]
    fn key_templates_override_the_generic_sentence() {
        let t = Table {
            id: "wima".into(),
            title: "WIMA".into(),
            rows: vec![("founded".into(), "1950".into()), ("location".into(), "the United States".into())],
        };
        assert_eq!(
            render_premise(&t),
            "WIMA was founded in 1950.  The location of WIMA is the United States."
        );
        let plain = PremiseRenderer::with_plural_keys(Vec::<String>::new());
        assert_eq!(plain.render(&t), "The founded of WIMA is 1950.  The location of WIMA is the United States.");
    }

    #[test]
    fn renders_rows_in_order_with_double_space() {
        let t = table(&[("a", "1"), ("b", "2")]);
        assert_eq!(render_premise(&t), "The a of T is 1.  The b of T is 2.");
    }

    #[test]
    fn empty_value_is_linted() {
        let t = table(&[("k", "")]);
        let renderer = PremiseRenderer::default();
        assert_eq!(renderer.render(&t), "The k of T is .");
        assert_eq!(renderer.lint(&t), vec![PremiseLint::EmptyValue { row: 0, key: "k".into() }]);
    }

    #[test]
    fn plural_keys_use_are() {
        let t = table(&[("official languages", "Chinese, English")]);
        assert_eq!(render_premise(&t), "The official languages of T are Chinese, English.");
    }

    #[test]
    fn drr_keeps_small_tables() {
        let t = table(&[("a", "1"), ("b", "2"), ("c", "3"), ("d", "4"), ("e", "5")]);
        assert_eq!(drr_top_k(&t, "anything", 8), t);
    }

    #[test]
    fn drr_ranks_matching_row_first() {
        // Disjoint vocabularies: only row 2 shares tokens with the hypothesis
        // (hand count: {saturn, rings} -> 2, everything else 0).
        let t = table(&[
            ("alpha", "apple"),
            ("beta", "banana"),
            ("gamma", "saturn rings"),
            ("delta", "date"),
        ]);
        let pruned = drr_top_k(&t, "The saturn rings", 2);
        assert_eq!(pruned.rows[0], ("gamma".to_string(), "saturn rings".to_string()));
        assert_eq!(pruned.rows[1].0, "alpha");
    }

    #[test]
    fn drr_zero_scores_keep_original_order() {
        let t = table(&[("a", "x"), ("b", "y"), ("c", "z")]);
        let pruned = drr_top_k(&t, "nothing shared", 2);
        assert_eq!(pruned.rows, t.rows[..2].to_vec());
    }

    #[test]
    fn example_invariants() {
        let mut e = Example::new("x", "t", "h", Label::E);
        assert!(e.validate().is_ok());
        e.parent_id = Some("p".into());
        assert!(e.validate().is_err());
        e.perturbation = Some(PerturbationKind::Char);
        assert!(e.validate().is_ok());
        e.hypothesis = " ".into();
        assert!(e.validate().is_err());
    }

    #[test]
    fn label_parse() {
        assert_eq!("C".parse::<Label>().unwrap(), Label::C);
        assert!("X".parse::<Label>().is_err());
    }
}
