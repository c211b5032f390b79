//! Task-solution corpus ingestion, language filtering and task balancing.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generation::Dataset;
use crate::lang::Registry;
use crate::record::Target;

/// One human-written solution as it appears in the corpus file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawSnippet {
    pub task_name: String,
    pub task_url: String,
    pub task_description: String,
    pub language_name: String,
    pub code: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub snippets: Vec<RawSnippet>,
    pub languages: BTreeSet<String>,
    pub tasks: BTreeSet<String>,
    index: HashMap<(String, String), usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub records_read: usize,
    pub duplicates_collapsed: usize,
    pub empty_dropped: usize,
}

impl Corpus {
    /// Builds a corpus keeping the first snippet in input order for every
    /// (task, language) key. Language names are canonicalized and snippets
    /// whose code is blank are dropped.
    pub fn from_snippets(
        snippets: impl IntoIterator<Item = RawSnippet>,
        registry: &Registry,
    ) -> (Self, LoadReport) {
        Self::build(snippets, |name| registry.canonicalize(name))
    }

    fn build(
        snippets: impl IntoIterator<Item = RawSnippet>,
        canonicalize: impl Fn(&str) -> String,
    ) -> (Self, LoadReport) {
        let mut corpus = Corpus::default();
        let mut report = LoadReport::default();
        for mut s in snippets {
            report.records_read += 1;
            if s.code.trim().is_empty() {
                report.empty_dropped += 1;
                continue;
            }
            s.language_name = canonicalize(&s.language_name);
            let key = (s.task_name.clone(), s.language_name.clone());
            if corpus.index.contains_key(&key) {
                report.duplicates_collapsed += 1;
                continue;
            }
            corpus.index.insert(key, corpus.snippets.len());
            corpus.languages.insert(s.language_name.clone());
            corpus.tasks.insert(s.task_name.clone());
            corpus.snippets.push(s);
        }
        (corpus, report)
    }

    pub fn get(&self, task: &str, language: &str) -> Option<&RawSnippet> {
        self.index
            .get(&(task.to_string(), language.to_string()))
            .map(|&i| &self.snippets[i])
    }

    pub fn tasks_in(&self, language: &str) -> BTreeSet<String> {
        self.snippets
            .iter()
            .filter(|s| s.language_name == language)
            .map(|s| s.task_name.clone())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.snippets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snippets.is_empty()
    }

    fn retain(&self, keep: impl Fn(&RawSnippet) -> bool) -> Corpus {
        Corpus::build(
            self.snippets.iter().filter(|s| keep(s)).cloned(),
            str::to_string,
        )
        .0
    }
}

/// Loads a line-delimited corpus file.
pub fn load_corpus(path: &Path, registry: &Registry) -> Result<(Corpus, LoadReport)> {
    let raw: Vec<RawSnippet> = crate::record::read_jsonl(path)?;
    let (corpus, report) = Corpus::from_snippets(raw, registry);
    info!(
        "loaded {}: {} snippets, {} tasks, {} languages ({} duplicates collapsed, {} empty dropped)",
        path.display(),
        corpus.snippets.len(),
        corpus.tasks.len(),
        corpus.languages.len(),
        report.duplicates_collapsed,
        report.empty_dropped
    );
    Ok((corpus, report))
}

/// Language popularity ranking, best first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LanguageRanking {
    entries: Vec<(String, u32)>,
}

impl LanguageRanking {
    pub fn new(entries: Vec<(String, u32)>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for (i, (name, rank)) in entries.iter().enumerate() {
            if *rank == 0 {
                return Err(Error::InvalidArgument(format!("rank of {name} must be positive")));
            }
            if i > 0 && *rank <= entries[i - 1].1 {
                return Err(Error::InvalidArgument(format!(
                    "ranks must be strictly increasing ({} after {})",
                    rank,
                    entries[i - 1].1
                )));
            }
            if !seen.insert(name.clone()) {
                return Err(Error::InvalidArgument(format!("duplicate ranked language {name}")));
            }
        }
        Ok(Self { entries })
    }

    /// Ranking from names in order, ranks 1..=n.
    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        Self::new(
            names
                .iter()
                .enumerate()
                .map(|(i, n)| (n.as_ref().to_string(), i as u32 + 1))
                .collect(),
        )
    }

    /// Parses `name<TAB>rank` lines; names are canonicalized. Lines are
    /// sorted by rank before validation.
    pub fn load(path: &Path, registry: &Registry) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let malformed = |reason: &str| Error::MalformedRecord {
                path: path.to_path_buf(),
                line: i + 1,
                reason: reason.to_string(),
            };
            let (name, rank) = line
                .split_once('\t')
                .ok_or_else(|| malformed("expected `name<TAB>rank`"))?;
            let rank: u32 = rank
                .trim()
                .parse()
                .map_err(|_| malformed("rank is not a positive integer"))?;
            entries.push((registry.canonicalize(name), rank));
        }
        entries.sort_by_key(|e| e.1);
        Self::new(entries)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn entries(&self) -> &[(String, u32)] {
        &self.entries
    }
}

/// Restricts the corpus to the `k` best-ranked languages it contains.
pub fn filter_languages(corpus: &Corpus, ranking: &LanguageRanking, k: usize) -> Result<Corpus> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let present: Vec<&str> = ranking
        .names()
        .filter(|n| corpus.languages.contains(*n))
        .collect();
    if present.len() < k {
        return Err(Error::NotEnoughLanguages {
            requested: k,
            found: present.len(),
            shortfall: k - present.len(),
        });
    }
    let keep: BTreeSet<&str> = present.into_iter().take(k).collect();
    Ok(corpus.retain(|s| keep.contains(s.language_name.as_str())))
}

/// Tasks solved in both languages of an ordered pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairSpec {
    pub src: String,
    pub dst: String,
    pub task_ids: BTreeSet<String>,
}

pub fn balance_pair(corpus: &Corpus, src: &str, dst: &str) -> Result<PairSpec> {
    if src == dst {
        return Err(Error::InvalidArgument(format!(
            "source and destination language are both {src}"
        )));
    }
    for lang in [src, dst] {
        if !corpus.languages.contains(lang) {
            return Err(Error::UnknownLanguage(lang.to_string()));
        }
    }
    let a = corpus.tasks_in(src);
    let b = corpus.tasks_in(dst);
    let task_ids: BTreeSet<String> = a.intersection(&b).cloned().collect();
    if task_ids.is_empty() {
        warn!("no shared tasks between {src} and {dst}");
    }
    Ok(PairSpec {
        src: src.to_string(),
        dst: dst.to_string(),
        task_ids,
    })
}

/// Every ordered pair of distinct corpus languages, sorted by (dst, src).
pub fn all_pairs(corpus: &Corpus) -> Result<Vec<PairSpec>> {
    let mut out = Vec::new();
    for dst in &corpus.languages {
        for src in &corpus.languages {
            if src != dst {
                out.push(balance_pair(corpus, src, dst)?);
            }
        }
    }
    Ok(out)
}

/// Number of tasks in `dst` whose AI solutions exist translated from every
/// other language of the dataset.
pub fn overlapping_tasks(dataset: &Dataset, dst: &str) -> Result<usize> {
    let languages: BTreeSet<&str> = dataset
        .records
        .iter()
        .map(|r| r.language_name.as_str())
        .collect();
    if !languages.contains(dst) {
        return Err(Error::UnknownLanguage(dst.to_string()));
    }
    let others: BTreeSet<&str> = languages.iter().copied().filter(|l| *l != dst).collect();
    let mut provenances: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for r in &dataset.records {
        if r.language_name == dst && r.target == Target::Ai {
            if let Some(src) = r.src() {
                provenances.entry(r.task_name.as_str()).or_default().insert(src);
            }
        }
    }
    Ok(provenances
        .values()
        .filter(|srcs| others.iter().all(|o| srcs.contains(o)))
        .count())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn snip(task: &str, lang: &str, code: &str) -> RawSnippet {
        RawSnippet {
            task_name: task.into(),
            task_url: format!("https://rosettacode.org/wiki/{task}"),
            task_description: format!("Solve {task}"),
            language_name: lang.into(),
            code: code.into(),
        }
    }

    fn fixture() -> Corpus {
        Corpus::from_snippets(
            vec![
                snip("T1", "Python", "print(1)"),
                snip("T1", "Java", "class A {}"),
                snip("T2", "Python", "print(2)"),
                snip("T3", "Java", "class B {}"),
            ],
            &Registry::builtin(),
        )
        .0
    }

    #[test]
    fn duplicate_keys_keep_first_in_file_order() {
        let (c, report) = Corpus::from_snippets(
            vec![
                snip("T1", "Python", "first"),
                snip("T2", "Python", "other"),
                snip("T1", "python", "second"),
            ],
            &Registry::builtin(),
        );
        assert_eq!(c.len(), 2);
        assert_eq!(report.duplicates_collapsed, 1);
        assert_eq!(c.get("T1", "Python").unwrap().code, "first");
    }

    #[test]
    fn dedup_is_idempotent() {
        let reg = Registry::builtin();
        let (once, _) = Corpus::from_snippets(
            vec![snip("T", "Go", "a"), snip("T", "Go", "b"), snip("U", "Go", "c")],
            &reg,
        );
        let (twice, r2) = Corpus::from_snippets(once.snippets.clone(), &reg);
        assert_eq!(once, twice);
        assert_eq!(r2.duplicates_collapsed, 0);
    }

    #[test]
    fn blank_code_is_dropped() {
        let (c, report) = Corpus::from_snippets(
            vec![snip("T", "Go", "  \n\t"), snip("U", "Go", "x")],
            &Registry::builtin(),
        );
        assert_eq!(c.len(), 1);
        assert_eq!(report.empty_dropped, 1);
    }

    #[test]
    fn load_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        fs::write(&p, "").unwrap();
        let (c, _) = load_corpus(&p, &Registry::builtin()).unwrap();
        assert!(c.is_empty());
        assert!(c.tasks.is_empty());
    }

    #[test]
    fn load_reports_malformed_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        let good = serde_json::to_string(&snip("T", "Go", "x")).unwrap();
        fs::write(&p, format!("{good}\n{{\"task_name\": \"T\"}}\n")).unwrap();
        match load_corpus(&p, &Registry::builtin()).unwrap_err() {
            Error::MalformedRecord { line, .. } => assert_eq!(line, 2),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn three_records_two_sharing_key() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        let lines: Vec<String> = [
            snip("Hello", "Python", "print('hi')"),
            snip("Hello", "Python", "print(\"hi\")"),
            snip("Hello", "Ruby", "puts 'hi'"),
        ]
        .iter()
        .map(|s| serde_json::to_string(s).unwrap())
        .collect();
        fs::write(&p, lines.join("\n")).unwrap();
        let (c, report) = load_corpus(&p, &Registry::builtin()).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(report.records_read, 3);
    }

    #[test]
    fn balance_pair_intersects() {
        let c = fixture();
        let p = balance_pair(&c, "Python", "Java").unwrap();
        assert_eq!(p.task_ids, BTreeSet::from(["T1".to_string()]));
        let q = balance_pair(&c, "Java", "Python").unwrap();
        assert_eq!(p.task_ids, q.task_ids);
        assert!(balance_pair(&c, "Java", "Java").is_err());
        assert!(matches!(
            balance_pair(&c, "Java", "Go"),
            Err(Error::UnknownLanguage(_))
        ));
    }

    #[test]
    fn disjoint_pair_is_empty() {
        let c = Corpus::from_snippets(
            vec![snip("A", "Go", "x"), snip("B", "Rust", "y")],
            &Registry::builtin(),
        )
        .0;
        assert!(balance_pair(&c, "Go", "Rust").unwrap().task_ids.is_empty());
    }

    #[test]
    fn filter_keeps_top_k_in_order() {
        let c = Corpus::from_snippets(
            vec![
                snip("A", "Go", "1"),
                snip("A", "Rust", "2"),
                snip("B", "Ruby", "3"),
                snip("B", "Go", "4"),
                snip("C", "Ruby", "5"),
            ],
            &Registry::builtin(),
        )
        .0;
        let ranking = LanguageRanking::from_names(&["Go", "Haskell", "Ruby", "Rust"]).unwrap();
        let f = filter_languages(&c, &ranking, 2).unwrap();
        assert_eq!(
            f.languages,
            BTreeSet::from(["Go".to_string(), "Ruby".to_string()])
        );
        let codes: Vec<&str> = f.snippets.iter().map(|s| s.code.as_str()).collect();
        assert_eq!(codes, ["1", "3", "4", "5"]);
        assert_eq!(f.tasks.len(), 3);

        let only = filter_languages(&c, &LanguageRanking::from_names(&["Rust"]).unwrap(), 1).unwrap();
        assert_eq!(only.len(), 1);

        match filter_languages(&c, &ranking, 4).unwrap_err() {
            Error::NotEnoughLanguages { shortfall, .. } => assert_eq!(shortfall, 1),
            e => panic!("{e:?}"),
        }
        assert!(filter_languages(&c, &ranking, 0).is_err());
    }

    #[test]
    fn ranking_validation_and_loading() {
        assert!(LanguageRanking::new(vec![("A".into(), 2), ("B".into(), 2)]).is_err());
        assert!(LanguageRanking::new(vec![("A".into(), 1), ("A".into(), 2)]).is_err());
        assert!(LanguageRanking::new(vec![("A".into(), 0)]).is_err());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rank.tsv");
        fs::write(&p, "Python\t1\nC sharp\t5\nC\t2\n").unwrap();
        let r = LanguageRanking::load(&p, &Registry::builtin()).unwrap();
        assert_eq!(r.names().collect::<Vec<_>>(), ["Python", "C", "C#"]);
        fs::write(&p, "Python 1\n").unwrap();
        assert!(LanguageRanking::load(&p, &Registry::builtin()).is_err());
    }

    #[test]
    fn ten_languages_give_ninety_pairs() {
        let langs = [
            "C++", "C", "C#", "Go", "Java", "JavaScript", "Kotlin", "Python", "Ruby", "Rust",
        ];
        let snippets = langs.iter().map(|l| snip("Hello", l, "x"));
        let c = Corpus::from_snippets(snippets, &Registry::builtin()).0;
        let pairs = all_pairs(&c).unwrap();
        assert_eq!(pairs.len(), 90);
        assert!(pairs.iter().all(|p| p.task_ids.len() == 1));
    }
}
