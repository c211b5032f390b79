//! Run configuration and the end-to-end commands: dataset building,
//! sampling, training, grid evaluation, length statistics and report
//! rendering. Every command writes its outputs under the configured output
//! directory together with a manifest that records the configuration hash,
//! the seed and the content hashes of inputs and outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use log::info;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{BaselineModel, BaselineSpec};
use crate::classifier::{self, EncoderConfig, ModelCheckpoint, Prediction, TrainConfig};
use crate::corpus::{all_pairs, filter_languages, load_corpus, LanguageRanking};
use crate::error::{Error, Result};
use crate::evaluation::grid::{GridConfig, GridMode, GridRun};
use crate::evaluation::report::{self, ComparisonRow};
use crate::evaluation::{hypothesis_tests, length_stats, provenance_shift, run_grid, Detector, ExperimentGrid, HypothesisTests, LengthStats, ProvenanceShift};
use crate::generation::{
    assemble_dataset, build_subdataset, CompletionClient, Dataset, FakeCompletionClient, HttpCompletionClient, ResponseCache,
    RetryPolicy, SubDatasetReport, TokenLimits, Translator,
};
use crate::lang::{file_stem, Registry};
use crate::record::{write_jsonl, SnippetRecord, SubDatasetId};
use crate::sampling::{
    derive_seed, sample_manifest, sample_multilingual, split_manifest, split_train_test, undersample_subdataset, SamplePlan, SplitMode,
    RNG_ALGORITHM,
};
use crate::synth;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub corpus: PathBuf,
    /// `name<TAB>rank` lines, already restricted to the languages the
    /// generation model supports.
    pub ranking: PathBuf,
    pub aliases: Option<PathBuf>,
    pub cache: PathBuf,
    pub out: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            corpus: "corpus.jsonl".into(),
            ranking: "ranking.txt".into(),
            aliases: None,
            cache: "cache".into(),
            out: "out".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Fake,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompletionConfig {
    pub backend: Backend,
    pub endpoint: Option<String>,
    pub model_id: String,
    pub timeout_secs: u64,
    pub retries: u32,
}

impl Default for CompletionConfig {
    fn default() -> Self {
        Self {
            backend: Backend::Fake,
            endpoint: None,
            model_id: "starcoder2-15b".into(),
            timeout_secs: 600,
            retries: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    pub per_class_count: usize,
    pub split_ratio: f64,
    pub split_mode: SplitMode,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            per_class_count: 470,
            split_ratio: 0.8,
            split_mode: SplitMode::RandomStratified,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluateConfig {
    /// `transformer` or a baseline name.
    pub detector: String,
    pub multilingual: bool,
    /// Extra detectors scored per language for the comparison table.
    pub compare: Vec<String>,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self {
            detector: "transformer".into(),
            multilingual: true,
            compare: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub workers: usize,
    pub top_k: usize,
    pub paths: Paths,
    pub completion: CompletionConfig,
    pub token_limits: TokenLimits,
    pub sampling: SamplingConfig,
    pub encoder: EncoderConfig,
    pub train: TrainConfig,
    pub evaluate: EvaluateConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            workers: 4,
            top_k: 10,
            paths: Paths::default(),
            completion: CompletionConfig::default(),
            token_limits: TokenLimits::default(),
            sampling: SamplingConfig::default(),
            encoder: EncoderConfig::default(),
            train: TrainConfig::default(),
            evaluate: EvaluateConfig::default(),
        }
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl RunConfig {
    /// Reads a TOML config; relative paths are taken relative to the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let p = &mut cfg.paths;
        p.corpus = resolve(base, &p.corpus);
        p.ranking = resolve(base, &p.ranking);
        p.aliases = p.aliases.as_ref().map(|a| resolve(base, a));
        p.cache = resolve(base, &p.cache);
        p.out = resolve(base, &p.out);
        if let classifier::EncoderVariant::PretrainedCheckpoint { path: ck } = &mut cfg.encoder.variant {
            *ck = resolve(base, ck);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.top_k < 2 {
            return Err(Error::InvalidArgument("top_k must be at least 2".into()));
        }
        if self.sampling.per_class_count == 0 {
            return Err(Error::InvalidArgument("per_class_count must be positive".into()));
        }
        if !(self.sampling.split_ratio > 0.0 && self.sampling.split_ratio < 1.0) {
            return Err(Error::InvalidArgument("split_ratio must be in (0, 1)".into()));
        }
        if self.completion.backend == Backend::Http && self.completion.endpoint.is_none() {
            return Err(Error::InvalidArgument("the http backend needs completion.endpoint".into()));
        }
        if self.evaluate.detector != "transformer" {
            BaselineSpec::by_name(&self.evaluate.detector)?;
        }
        for name in &self.evaluate.compare {
            if name != "transformer" {
                BaselineSpec::by_name(name)?;
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn registry(&self) -> Result<Registry> {
        let mut reg = Registry::builtin();
        if let Some(a) = &self.paths.aliases {
            reg.load_aliases(a)?;
        }
        Ok(reg)
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.paths.out.join("dataset")
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.dataset_dir().join("dataset.jsonl")
    }

    pub fn samples_dir(&self) -> PathBuf {
        self.paths.out.join("samples")
    }

    pub fn checkpoints_dir(&self) -> PathBuf {
        self.paths.out.join("checkpoints")
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.paths.out.join("reports")
    }

    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Replay record for one command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub rng: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

impl RunManifest {
    fn new(command: &str, cfg: &RunConfig) -> Self {
        Self {
            command: command.into(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
            rng: RNG_ALGORITHM.into(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    fn output(&mut self, root: &Path, path: &Path) -> Result<()> {
        let rel = path.strip_prefix(root).unwrap_or(path);
        self.outputs.insert(rel.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub languages: Vec<String>,
    pub subdatasets: Vec<SubDatasetReport>,
    pub total_records: usize,
    pub unique_tasks: usize,
}

fn make_client(cfg: &RunConfig) -> Box<dyn CompletionClient> {
    match cfg.completion.backend {
        Backend::Fake => Box::new(FakeCompletionClient::new()),
        Backend::Http => Box::new(HttpCompletionClient::new(
            cfg.completion.endpoint.clone().unwrap_or_default(),
            cfg.completion.model_id.clone(),
            Duration::from_secs(cfg.completion.timeout_secs),
        )),
    }
}

/// Loads the corpus, keeps the `top_k` ranked languages, translates every
/// ordered pair and writes one file per sub-dataset plus the assembled
/// dataset.
pub fn build_dataset(cfg: &RunConfig) -> Result<BuildReport> {
    let registry = cfg.registry()?;
    let (corpus, _) = load_corpus(&cfg.paths.corpus, &registry)?;
    let ranking = LanguageRanking::load(&cfg.paths.ranking, &registry)?;
    let corpus = filter_languages(&corpus, &ranking, cfg.top_k)?;
    let pairs = all_pairs(&corpus)?;
    let client = make_client(cfg);
    let cache = ResponseCache::open(&cfg.paths.cache)?;
    let translator = Translator::new(client.as_ref())
        .with_cache(&cache)
        .with_limits(cfg.token_limits)
        .with_workers(cfg.workers)
        .with_retry(RetryPolicy {
            attempts: cfg.completion.retries.max(1),
            ..RetryPolicy::default()
        });
    let mut subsets = Vec::new();
    let mut reports = Vec::new();
    for pair in &pairs {
        let (sd, rep) = build_subdataset(&corpus, pair, &translator)?;
        subsets.push(sd);
        reports.push(rep);
    }
    let (dataset, summary) = assemble_dataset(&subsets)?;

    let dir = cfg.dataset_dir();
    let mut manifest = RunManifest::new("build-dataset", cfg);
    manifest.input(&cfg.paths.corpus)?;
    manifest.input(&cfg.paths.ranking)?;
    for sd in &subsets {
        let path = dir.join("sets").join(format!("{}.jsonl", file_stem(&sd.id.label())));
        write_jsonl(&path, &sd.records)?;
        manifest.output(&dir, &path)?;
    }
    dataset.save(&cfg.dataset_path())?;
    manifest.output(&dir, &cfg.dataset_path())?;
    let report = BuildReport {
        languages: corpus.languages.iter().cloned().collect(),
        subdatasets: reports,
        total_records: summary.total,
        unique_tasks: summary.unique_tasks,
    };
    let report_path = dir.join("build_report.json");
    write_json(&report_path, &report)?;
    manifest.output(&dir, &report_path)?;
    manifest.write(&dir.join("manifest.json"))?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    pub monolingual_sets: usize,
    pub skipped_sets: BTreeMap<String, String>,
    pub monolingual_records: usize,
    pub multilingual_records: usize,
}

/// Undersamples every sub-dataset to `per_class_count` per class and draws
/// the multilingual pool. Sub-datasets too small to undersample are skipped
/// and listed in the report.
pub fn sample(cfg: &RunConfig) -> Result<SampleReport> {
    let dataset = Dataset::load(&cfg.dataset_path())?;
    let n = cfg.sampling.per_class_count;
    let mut mono = Vec::new();
    let mut skipped = BTreeMap::new();
    let mut sets = 0;
    for sd in dataset.subdatasets()? {
        match undersample_subdataset(&sd, n, cfg.seed) {
            Ok(s) => {
                sets += 1;
                mono.extend(s.records);
            }
            Err(e @ Error::InsufficientRecords { .. }) => {
                log::warn!("{}: {e}", sd.id.label());
                skipped.insert(sd.id.label(), e.to_string());
            }
            Err(e) => return Err(e),
        }
    }
    let plan = SamplePlan::for_dataset(&dataset, n, cfg.seed);
    let multi = sample_multilingual(&dataset, &plan)?;

    let dir = cfg.samples_dir();
    let mut manifest = RunManifest::new("sample", cfg);
    manifest.input(&cfg.dataset_path())?;
    let files: [(&str, &[SnippetRecord]); 2] = [("monolingual", &mono), ("multilingual", &multi.records)];
    for (name, records) in files {
        let data = dir.join(format!("{name}.jsonl"));
        write_jsonl(&data, records)?;
        manifest.output(&dir, &data)?;
        let keys = dir.join(format!("{name}_manifest.jsonl"));
        write_jsonl(&keys, &sample_manifest(records))?;
        manifest.output(&dir, &keys)?;
    }
    let plan_path = dir.join("plan.json");
    write_json(&plan_path, &plan)?;
    manifest.output(&dir, &plan_path)?;
    manifest.write(&dir.join("manifest.json"))?;
    Ok(SampleReport {
        monolingual_sets: sets,
        skipped_sets: skipped,
        monolingual_records: mono.len(),
        multilingual_records: multi.records.len(),
    })
}

/// What a training run covers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Scope {
    Monolingual(SubDatasetId),
    Multilingual,
}

impl FromStr for Scope {
    type Err = Error;

    /// `multilingual`, a set label such as `Java_from_Kotlin`, or `dst:src`.
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("multilingual") {
            return Ok(Scope::Multilingual);
        }
        if let Some((dst, src)) = s.split_once(':') {
            return Ok(Scope::Monolingual(SubDatasetId::new(dst.trim(), src.trim())));
        }
        s.parse().map(Scope::Monolingual)
    }
}

impl Scope {
    pub fn label(&self) -> String {
        match self {
            Scope::Monolingual(id) => id.label(),
            Scope::Multilingual => "multilingual".into(),
        }
    }
}

fn scope_records(cfg: &RunConfig, scope: &Scope) -> Result<Vec<SnippetRecord>> {
    match scope {
        Scope::Multilingual => Ok(Dataset::load(&cfg.samples_dir().join("multilingual.jsonl"))?.records),
        Scope::Monolingual(id) => {
            let label = id.label();
            let records: Vec<SnippetRecord> = Dataset::load(&cfg.samples_dir().join("monolingual.jsonl"))?
                .records
                .into_iter()
                .filter(|r| r.set == label)
                .collect();
            if records.is_empty() {
                return Err(Error::InvalidArgument(format!("no sampled records for {label}")));
            }
            Ok(records)
        }
    }
}

/// Splits the scope's sampled records exactly as the grid does, trains the
/// transformer classifier and saves the checkpoint.
pub fn train_scope(cfg: &RunConfig, scope: &Scope) -> Result<(PathBuf, ModelCheckpoint)> {
    let records = scope_records(cfg, scope)?;
    let label = scope.label();
    let split = split_train_test(
        &records,
        cfg.sampling.split_ratio,
        cfg.sampling.split_mode,
        derive_seed(cfg.seed, &format!("split/{label}")),
    )?;
    let ck = classifier::train(&split.train, &split.test, &cfg.encoder, &cfg.train_config())?;
    let dir = cfg.checkpoints_dir().join(file_stem(&label));
    ck.save(&dir)?;
    let split_path = cfg.checkpoints_dir().join(format!("{}.split.jsonl", file_stem(&label)));
    write_jsonl(&split_path, &split_manifest(&split))?;
    info!("saved checkpoint {}", dir.display());
    Ok((dir, ck))
}

/// Trains a detector by name on a training split.
pub fn train_detector(cfg: &RunConfig, name: &str, registry: &Registry, train: &[SnippetRecord]) -> Result<Arc<dyn Detector>> {
    if name == "transformer" {
        return Ok(Arc::new(classifier::train(train, &[], &cfg.encoder, &cfg.train_config())?));
    }
    let spec = BaselineSpec::by_name(name)?;
    let lang = &train[0].language_name;
    if train.iter().any(|r| &r.language_name != lang) && matches!(spec.features, crate::baselines::FeatureKind::Layout) {
        return Err(Error::InvalidArgument(format!("{name} uses per-language layout features and cannot train on mixed languages")));
    }
    let codes: Vec<String> = train.iter().map(|r| r.code.clone()).collect();
    let labels: Vec<_> = train.iter().map(|r| r.target).collect();
    Ok(Arc::new(BaselineModel::fit(&spec, &codes, &labels, lang, registry, cfg.seed)?))
}

/// Everything `evaluate` produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub detector: String,
    pub monolingual: ExperimentGrid,
    pub multilingual: Option<ExperimentGrid>,
    pub tests: HypothesisTests,
    pub shift: Option<ProvenanceShift>,
    pub comparison: Vec<ComparisonRow>,
}

fn grid_for(cfg: &RunConfig, name: &str, registry: &Registry, dataset: &Dataset, mode: GridMode) -> Result<GridRun> {
    let gcfg = GridConfig {
        mode,
        split_ratio: cfg.sampling.split_ratio,
        split_mode: cfg.sampling.split_mode,
        seed: cfg.seed,
    };
    let f = |train: &[SnippetRecord]| train_detector(cfg, name, registry, train);
    run_grid(dataset, &gcfg, &f)
}

fn comparison_row(model: &str, grid: &ExperimentGrid) -> ComparisonRow {
    ComparisonRow {
        model: model.to_string(),
        accuracies: grid.per_language.iter().map(|(k, m)| (k.clone(), m.mean)).collect(),
    }
}

/// Runs the monolingual grid (and the multilingual one when enabled),
/// the hypothesis tests and the provenance shift, and writes the report
/// files.
pub fn evaluate(cfg: &RunConfig) -> Result<EvaluationReport> {
    let registry = cfg.registry()?;
    let mono_path = cfg.samples_dir().join("monolingual.jsonl");
    let multi_path = cfg.samples_dir().join("multilingual.jsonl");
    let mono_ds = Dataset::load(&mono_path)?;
    let name = cfg.evaluate.detector.as_str();
    let mono = grid_for(cfg, name, &registry, &mono_ds, GridMode::Monolingual)?;
    let multi = if cfg.evaluate.multilingual {
        let ds = Dataset::load(&multi_path)?;
        Some(grid_for(cfg, name, &registry, &ds, GridMode::Multilingual)?.grid)
    } else {
        None
    };
    let tests = hypothesis_tests(&mono.grid, multi.as_ref());
    let shift = match provenance_shift(&mono) {
        Ok(s) => Some(s),
        Err(e) => {
            log::warn!("provenance shift skipped: {e}");
            None
        }
    };
    let mut comparison = vec![comparison_row(name, &mono.grid)];
    for other in &cfg.evaluate.compare {
        if other != name {
            let g = grid_for(cfg, other, &registry, &mono_ds, GridMode::Monolingual)?;
            comparison.push(comparison_row(other, &g.grid));
        }
    }
    let out = EvaluationReport {
        detector: name.to_string(),
        monolingual: mono.grid,
        multilingual: multi,
        tests,
        shift,
        comparison,
    };
    write_evaluation(cfg, &out, &[mono_path, multi_path])?;
    Ok(out)
}

fn write_evaluation(cfg: &RunConfig, ev: &EvaluationReport, inputs: &[PathBuf]) -> Result<()> {
    let dir = cfg.reports_dir();
    let mut manifest = RunManifest::new("evaluate", cfg);
    for p in inputs {
        if p.exists() {
            manifest.input(p)?;
        }
    }
    let mut rows = report::grid_rows(&ev.monolingual);
    if let Some(m) = &ev.multilingual {
        rows.extend(report::grid_rows(m));
    }
    let grid_path = dir.join("grid.jsonl");
    write_jsonl(&grid_path, &rows)?;
    manifest.output(&dir, &grid_path)?;
    let eval_path = dir.join("evaluation.json");
    write_json(&eval_path, ev)?;
    manifest.output(&dir, &eval_path)?;
    let tables_path = dir.join("tables.txt");
    write_text(&tables_path, &render_evaluation(ev))?;
    manifest.output(&dir, &tables_path)?;
    manifest.write(&dir.join("manifest.json"))
}

pub fn render_evaluation(ev: &EvaluationReport) -> String {
    let mut out = format!("Accuracy grid ({})\n", ev.detector);
    out.push_str(&report::grid_table(Some(&ev.monolingual), ev.multilingual.as_ref()));
    out.push_str("\nHypothesis tests\n");
    out.push_str(&report::tests_table(&ev.tests));
    out.push_str("\nModel comparison\n");
    out.push_str(&report::comparison_table(&ev.comparison));
    if let Some(s) = &ev.shift {
        out.push_str("\nProvenance shift\n");
        out.push_str(&report::shift_table(s));
    }
    out
}

/// Length statistics of a dataset file, written next to the reports.
pub fn stats(dataset_path: &Path, out_dir: Option<&Path>) -> Result<(LengthStats, String)> {
    let ds = Dataset::load(dataset_path)?;
    let s = length_stats(&ds)?;
    let table = report::length_table(&s);
    if let Some(dir) = out_dir {
        write_json(&dir.join("lengths.json"), &s)?;
        write_text(&dir.join("lengths.txt"), &table)?;
    }
    Ok((s, table))
}

/// Re-renders the grid tables from stored grid rows.
pub fn report_from_rows(path: &Path) -> Result<String> {
    let rows: Vec<serde_json::Value> = crate::record::read_jsonl(path)?;
    let (mono, multi) = report::grids_from_rows(&rows)?;
    let mut out = report::grid_table(mono.as_ref(), multi.as_ref());
    if let Some(m) = &mono {
        out.push('\n');
        out.push_str(&report::tests_table(&hypothesis_tests(m, multi.as_ref())));
    }
    Ok(out)
}

/// Loads a checkpoint (a directory) or a saved baseline model (a file) and
/// labels one snippet.
pub fn detect(model_path: &Path, code: &str) -> Result<Prediction> {
    if model_path.is_dir() {
        ModelCheckpoint::load(model_path)?.predict(code)
    } else {
        let m = BaselineModel::load(model_path)?;
        Ok(Prediction::from_prob(m.prob_ai(&crate::generation::clean_snippet(code))))
    }
}

/// Writes a self-contained desk-scale setup into `dir`: a synthetic corpus,
/// a language ranking and a config that uses the scripted completion
/// client and a small encoder.
pub fn write_desk_setup(dir: &Path, languages: &[&str], n_tasks: usize, seed: u64) -> Result<RunConfig> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let corpus = synth::desk_corpus(languages, n_tasks, 0.1, seed);
    write_jsonl(&dir.join("corpus.jsonl"), &corpus)?;
    let ranking: String = languages.iter().enumerate().map(|(i, l)| format!("{l}\t{}\n", i + 1)).collect();
    write_text(&dir.join("ranking.txt"), &ranking)?;
    let cfg = RunConfig {
        seed,
        top_k: languages.len(),
        sampling: SamplingConfig {
            per_class_count: (n_tasks / 2).max(2),
            ..Default::default()
        },
        encoder: EncoderConfig {
            min_count: 1,
            ..EncoderConfig::small(2, 32, 2, 256)
        },
        train: TrainConfig {
            lr_initial: 1e-3,
            epochs: 12,
            lr_decay_epoch: 9,
            batch_size: 4,
            ..Default::default()
        },
        ..Default::default()
    };
    write_text(&dir.join("config.toml"), &cfg.to_toml()?)?;
    RunConfig::load(&dir.join("config.toml"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml().unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.sampling.per_class_count, 470);
        assert_eq!(back.token_limits.prompt, 1024);
        assert_eq!(back.train.epochs, 15);
    }

    #[test]
    fn partial_config_takes_defaults() {
        let cfg: RunConfig = toml::from_str("seed = 9\n[sampling]\nper_class_count = 20\n").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.sampling.per_class_count, 20);
        assert_eq!(cfg.sampling.split_ratio, 0.8);
        assert_eq!(cfg.train.lr_initial, 2e-5);
    }

    #[test]
    fn scope_parsing() {
        assert_eq!("multilingual".parse::<Scope>().unwrap(), Scope::Multilingual);
        assert_eq!("Go:Rust".parse::<Scope>().unwrap(), Scope::Monolingual(SubDatasetId::new("Go", "Rust")));
        assert_eq!("Go_from_Rust".parse::<Scope>().unwrap().label(), "Go_from_Rust");
        assert!("Go".parse::<Scope>().is_err());
    }
}
