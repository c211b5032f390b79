//! AI-labeled snippet generation by prompting a completion model to
//! translate human solutions between languages, and assembly of the
//! resulting sub-datasets.

pub mod cache;
pub mod client;
pub mod fake;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, PairSpec, RawSnippet};
use crate::error::{Error, Result};
use crate::record::{self, SnippetRecord, SubDatasetId, Target};

pub use cache::ResponseCache;
pub use client::{
    complete_with_retry, CompletionClient, CompletionRequest, CompletionResponse,
    HttpCompletionClient, RetryPolicy, TransportFailure,
};
pub use fake::{FakeCompletionClient, Fault};

pub const PROMPT_TEMPLATE: &str = "Translate this ```\n{CODE_SNIPPET}\n``` from {SOURCE_LANGUAGE} to {TARGET_LANGUAGE}. Here is the translated code\n\n```";

const FENCE: &str = "```";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenLimits {
    pub prompt: usize,
    pub generation: usize,
}

impl Default for TokenLimits {
    fn default() -> Self {
        Self {
            prompt: 1024,
            generation: 2048,
        }
    }
}

/// Counts tokens in the generation model's vocabulary.
pub trait TokenCounter: Send + Sync {
    fn count(&self, text: &str) -> usize;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceTokenCounter;

impl TokenCounter for WhitespaceTokenCounter {
    fn count(&self, text: &str) -> usize {
        count_whitespace_tokens(text)
    }
}

pub fn count_whitespace_tokens(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Removes leading and trailing whitespace; the interior is untouched.
pub fn clean_snippet(code: &str) -> String {
    code.trim().to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub template_text: String,
    pub code_snippet: String,
    pub source_language: String,
    pub target_language: String,
    pub rendered: String,
    pub prompt_tokens: usize,
}

pub fn render_prompt(code: &str, src: &str, dst: &str) -> String {
    PROMPT_TEMPLATE
        .replace("{SOURCE_LANGUAGE}", src)
        .replace("{TARGET_LANGUAGE}", dst)
        .replacen("{CODE_SNIPPET}", code, 1)
}

/// Inverse of [`render_prompt`]: recovers (code, src, dst).
pub fn parse_prompt(rendered: &str) -> Option<(&str, &str, &str)> {
    let body = rendered.strip_prefix("Translate this ```\n")?;
    let body = body.strip_suffix(". Here is the translated code\n\n```")?;
    let split = body.rfind("\n``` from ")?;
    let code = &body[..split];
    let langs = &body[split + "\n``` from ".len()..];
    let (src, dst) = langs.rsplit_once(" to ")?;
    Some((code, src, dst))
}

pub fn build_prompt(
    snippet: &RawSnippet,
    src: &str,
    dst: &str,
    limits: TokenLimits,
    counter: &dyn TokenCounter,
) -> Result<PromptSpec> {
    if snippet.code.trim().is_empty() {
        return Err(Error::InvalidArgument("cannot translate an empty snippet".into()));
    }
    if snippet.language_name != src {
        return Err(Error::InvalidArgument(format!(
            "snippet is {} but source language is {src}",
            snippet.language_name
        )));
    }
    if src == dst {
        return Err(Error::InvalidArgument(format!("source and target are both {src}")));
    }
    let rendered = render_prompt(&snippet.code, src, dst);
    let prompt_tokens = counter.count(&rendered);
    if prompt_tokens > limits.prompt {
        return Err(Error::PromptTooLong {
            tokens: prompt_tokens,
            limit: limits.prompt,
        });
    }
    Ok(PromptSpec {
        template_text: PROMPT_TEMPLATE.to_string(),
        code_snippet: snippet.code.clone(),
        source_language: src.to_string(),
        target_language: dst.to_string(),
        rendered,
        prompt_tokens,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationStatus {
    Ok,
    Empty,
    Unterminated,
    OverLength,
    TransportError,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: usize,
    pub completion_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub raw_text: String,
    pub extracted_code: Option<String>,
    pub status: GenerationStatus,
    pub usage: Usage,
}

impl GenerationResult {
    fn failed(status: GenerationStatus, raw_text: String, usage: Usage) -> Self {
        Self {
            raw_text,
            extracted_code: None,
            status,
            usage,
        }
    }
}

/// Takes the completion text up to the first closing fence. The prompt
/// already ends with the opening fence, so the completion starts inside it.
pub fn extract_code(completion: &str) -> (GenerationStatus, Option<String>) {
    if completion.trim().is_empty() {
        return (GenerationStatus::Empty, None);
    }
    match completion.find(FENCE) {
        None => (GenerationStatus::Unterminated, None),
        Some(end) => {
            let code = clean_snippet(&completion[..end]);
            if code.is_empty() {
                (GenerationStatus::Empty, None)
            } else {
                (GenerationStatus::Ok, Some(code))
            }
        }
    }
}

/// Everything needed to turn prompts into validated translations.
pub struct Translator<'a> {
    pub client: &'a dyn CompletionClient,
    pub cache: Option<&'a ResponseCache>,
    pub limits: TokenLimits,
    pub counter: &'a dyn TokenCounter,
    pub retry: RetryPolicy,
    pub workers: usize,
}

impl<'a> Translator<'a> {
    pub fn new(client: &'a dyn CompletionClient) -> Self {
        Self {
            client,
            cache: None,
            limits: TokenLimits::default(),
            counter: &WhitespaceTokenCounter,
            retry: RetryPolicy::default(),
            workers: 1,
        }
    }

    pub fn with_cache(mut self, cache: &'a ResponseCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    pub fn with_limits(mut self, limits: TokenLimits) -> Self {
        self.limits = limits;
        self
    }
}

/// Sends one prompt (or reads it from the cache) and validates the answer.
/// Transport failures are reported through the status, cache corruption as
/// an error.
pub fn translate(translator: &Translator<'_>, prompt: &PromptSpec) -> Result<GenerationResult> {
    let request = CompletionRequest {
        prompt: prompt.rendered.clone(),
        max_new_tokens: translator.limits.generation,
        greedy: true,
    };
    let model = translator.client.model_id();
    let cached = match translator.cache {
        Some(c) => c.get(model, &request)?,
        None => None,
    };
    let response = match cached {
        Some(r) => r,
        None => match complete_with_retry(translator.client, &request, translator.retry) {
            Ok(r) => {
                if let Some(c) = translator.cache {
                    c.put(model, &request, &r)?;
                }
                r
            }
            Err((failure, attempts)) => {
                return Ok(GenerationResult::failed(
                    GenerationStatus::TransportError,
                    format!("after {attempts} attempts: {}", failure.0),
                    Usage::default(),
                ))
            }
        },
    };
    let usage = Usage {
        prompt_tokens: response.prompt_tokens,
        completion_tokens: response.completion_tokens,
    };
    if usage.prompt_tokens > translator.limits.prompt
        || usage.completion_tokens > translator.limits.generation
    {
        return Ok(GenerationResult::failed(
            GenerationStatus::OverLength,
            response.text,
            usage,
        ));
    }
    let (status, extracted_code) = extract_code(&response.text);
    Ok(GenerationResult {
        raw_text: response.text,
        extracted_code,
        status,
        usage,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubDataset {
    pub id: SubDatasetId,
    pub records: Vec<SnippetRecord>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubDatasetReport {
    pub set: String,
    pub tasks: usize,
    pub human: usize,
    pub ai: usize,
    pub failures: BTreeMap<String, GenerationStatus>,
}

fn make_record(s: &RawSnippet, dst: &str, code: String, target: Target, set: &str) -> SnippetRecord {
    SnippetRecord {
        task_name: s.task_name.clone(),
        task_url: s.task_url.clone(),
        task_description: s.task_description.clone(),
        language_name: dst.to_string(),
        code,
        target,
        set: set.to_string(),
    }
}

/// Builds the `<dst>_from_<src>` sub-dataset: for every shared task the
/// cleaned human `dst` solution and, when translation succeeds, the cleaned
/// translation of the `src` solution into `dst`.
pub fn build_subdataset(
    corpus: &Corpus,
    pair: &PairSpec,
    translator: &Translator<'_>,
) -> Result<(SubDataset, SubDatasetReport)> {
    let id = SubDatasetId::new(&pair.dst, &pair.src);
    let set = id.label();
    let tasks: Vec<&String> = pair.task_ids.iter().collect();

    let work = |task: &&String| -> Result<(Option<SnippetRecord>, Option<SnippetRecord>, GenerationStatus)> {
        let human = corpus.get(task, &pair.dst).ok_or_else(|| {
            Error::InvalidArgument(format!("task {task} has no {} solution", pair.dst))
        })?;
        let source = corpus.get(task, &pair.src).ok_or_else(|| {
            Error::InvalidArgument(format!("task {task} has no {} solution", pair.src))
        })?;
        let human_code = clean_snippet(&human.code);
        let human_rec = (!human_code.is_empty())
            .then(|| make_record(human, &pair.dst, human_code, Target::Human, &set));
        let prompt = match build_prompt(source, &pair.src, &pair.dst, translator.limits, translator.counter) {
            Ok(p) => p,
            Err(Error::PromptTooLong { .. }) => return Ok((human_rec, None, GenerationStatus::OverLength)),
            Err(e) => return Err(e),
        };
        let result = translate(translator, &prompt)?;
        if result.status == GenerationStatus::TransportError {
            return Err(Error::Transport {
                attempts: translator.retry.attempts,
                message: format!("{set}/{task}: {}", result.raw_text),
            });
        }
        let ai_rec = result
            .extracted_code
            .map(|code| make_record(human, &pair.dst, code, Target::Ai, &set));
        Ok((human_rec, ai_rec, result.status))
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(translator.workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let outcomes: Vec<_> = pool.install(|| tasks.par_iter().map(work).collect());

    let mut records = Vec::new();
    let mut report = SubDatasetReport {
        set: set.clone(),
        tasks: tasks.len(),
        ..Default::default()
    };
    for (task, outcome) in tasks.iter().zip(outcomes) {
        let (human, ai, status) = outcome?;
        let Some(human) = human else { continue };
        records.push(human);
        report.human += 1;
        match ai {
            Some(ai) => {
                records.push(ai);
                report.ai += 1;
            }
            None => {
                warn!("{set}: dropped translation for {task}: {status:?}");
                report.failures.insert((*task).clone(), status);
            }
        }
    }
    info!(
        "{set}: {} tasks, {} human, {} ai, {} failed",
        report.tasks,
        report.human,
        report.ai,
        report.failures.len()
    );
    Ok((SubDataset { id, records }, report))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub records: Vec<SnippetRecord>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub total: usize,
    pub unique_tasks: usize,
    pub languages: usize,
    /// set -> [human, ai]
    pub per_set: BTreeMap<String, [usize; 2]>,
    pub per_language: BTreeMap<String, [usize; 2]>,
    pub per_target: [usize; 2],
}

impl Dataset {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(Self {
            records: record::read_jsonl(path)?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        record::write_jsonl(path, &self.records)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn languages(&self) -> BTreeSet<String> {
        self.records.iter().map(|r| r.language_name.clone()).collect()
    }

    /// Splits the records back into sub-datasets, ordered by set label.
    pub fn subdatasets(&self) -> Result<Vec<SubDataset>> {
        let mut by_set: BTreeMap<&str, Vec<SnippetRecord>> = BTreeMap::new();
        for r in &self.records {
            by_set.entry(&r.set).or_default().push(r.clone());
        }
        by_set
            .into_iter()
            .map(|(set, records)| {
                Ok(SubDataset {
                    id: set.parse()?,
                    records,
                })
            })
            .collect()
    }

    pub fn summary(&self) -> DatasetSummary {
        let mut s = DatasetSummary {
            total: self.records.len(),
            ..Default::default()
        };
        let mut tasks = BTreeSet::new();
        for r in &self.records {
            let t = r.target.index();
            s.per_set.entry(r.set.clone()).or_default()[t] += 1;
            s.per_language.entry(r.language_name.clone()).or_default()[t] += 1;
            s.per_target[t] += 1;
            tasks.insert(r.task_name.as_str());
        }
        s.unique_tasks = tasks.len();
        s.languages = s.per_language.len();
        s
    }
}

fn validate_subdataset(sd: &SubDataset) -> Result<()> {
    let label = sd.id.label();
    let mut humans = BTreeSet::new();
    let mut ais = Vec::new();
    for r in &sd.records {
        let bad = |why: &str| {
            Err(Error::InvalidArgument(format!(
                "{label}: record for task {} {why}",
                r.task_name
            )))
        };
        if r.set != label {
            return bad("carries a different set label");
        }
        if r.language_name != sd.id.dst {
            return bad("is not in the sub-dataset language");
        }
        if r.code.is_empty() || clean_snippet(&r.code) != r.code {
            return bad("has uncleaned or empty code");
        }
        match r.target {
            Target::Human => {
                humans.insert(r.task_name.as_str());
            }
            Target::Ai => ais.push(r.task_name.as_str()),
        }
    }
    if let Some(orphan) = ais.iter().find(|t| !humans.contains(**t)) {
        return Err(Error::InvalidArgument(format!(
            "{label}: AI record for {orphan} has no human counterpart"
        )));
    }
    Ok(())
}

/// Concatenates sub-datasets after validating their schema. Any repeated
/// (set, task, target) key is an error.
pub fn assemble_dataset(subdatasets: &[SubDataset]) -> Result<(Dataset, DatasetSummary)> {
    let mut seen = BTreeSet::new();
    let mut records = Vec::new();
    for sd in subdatasets {
        validate_subdataset(sd)?;
        for r in &sd.records {
            let key = (r.set.clone(), r.task_name.clone(), r.target);
            if !seen.insert(key) {
                return Err(Error::DuplicateKey(format!(
                    "({}, {}, {})",
                    r.set, r.task_name, r.target
                )));
            }
            records.push(r.clone());
        }
    }
    let dataset = Dataset { records };
    let summary = dataset.summary();
    info!(
        "assembled {} records, {} tasks, {} languages",
        summary.total, summary.unique_tasks, summary.languages
    );
    Ok((dataset, summary))
}
