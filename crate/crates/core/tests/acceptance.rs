//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use codestylo::baselines::{cross_validate_records, BaselineSpec};
use codestylo::classifier::model::{self, EncoderDims, Mode, ModelParams};
use codestylo::classifier::{train, EncoderConfig, TrainConfig};
use codestylo::corpus::{all_pairs, Corpus, RawSnippet};
use codestylo::evaluation::metrics::metrics_from_scores;
use codestylo::evaluation::stats::{anova_oneway, student_ttest, welch_ttest};
use codestylo::evaluation::evaluate_detector;
use codestylo::generation::{assemble_dataset, build_subdataset, FakeCompletionClient, Fault, Translator};
use codestylo::lang::Registry;
use codestylo::pipeline::{self, write_desk_setup};
use codestylo::record::Target;
use codestylo::sampling::{rng_for, sample_multilingual, split_train_test, undersample_subdataset, SamplePlan, SplitMode};
use codestylo::synth::{planted_signal_dataset, shuffle_labels};
use codestylo::Error;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::Value;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// 1. Two desk-scale runs with the same seed give identical artifacts.

fn desk_run(dir: &Path) -> Result<(), Error> {
    let cfg = write_desk_setup(dir, &["Python", "Go", "Rust"], 24, 7)?;
    pipeline::build_dataset(&cfg)?;
    pipeline::sample(&cfg)?;
    pipeline::evaluate(&cfg)?;
    Ok(())
}

fn determinism() -> Outcome {
    let start = Instant::now();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    desk_run(a.path()).map_err(|e| e.to_string())?;
    desk_run(b.path()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let mut files: Vec<String> = Vec::new();
    let sets = a.path().join("out/dataset/sets");
    for entry in std::fs::read_dir(&sets).unwrap() {
        files.push(format!("dataset/sets/{}", entry.unwrap().file_name().to_string_lossy()));
    }
    files.sort();
    for f in [
        "dataset/dataset.jsonl",
        "dataset/build_report.json",
        "samples/monolingual.jsonl",
        "samples/multilingual.jsonl",
        "samples/monolingual_manifest.jsonl",
        "samples/multilingual_manifest.jsonl",
        "samples/plan.json",
        "reports/grid.jsonl",
        "reports/evaluation.json",
    ] {
        files.push(f.to_string());
    }
    let mut differing = Vec::new();
    for f in &files {
        let x = std::fs::read(a.path().join("out").join(f)).unwrap_or_default();
        let y = std::fs::read(b.path().join("out").join(f)).unwrap_or_default();
        if x.is_empty() || x != y {
            differing.push(f.clone());
        }
    }
    let n_sets = files.iter().filter(|f| f.starts_with("dataset/sets/")).count();
    check(
        differing.is_empty() && n_sets == 6 && elapsed < Duration::from_secs(600),
        format!(
            "{} artifacts compared ({n_sets} sub-datasets), {} differ {:?}, two runs took {:.1}s",
            files.len(),
            differing.len(),
            differing,
            elapsed.as_secs_f64()
        ),
    )
}

// 2. Randomized balancing and sampling fixtures against brute-force oracles.

fn hall_feasible(quotas: &BTreeMap<String, usize>, cands: &BTreeMap<String, BTreeSet<String>>) -> bool {
    let srcs: Vec<&String> = quotas.keys().collect();
    for mask in 1u32..(1 << srcs.len()) {
        let mut union = BTreeSet::new();
        let mut need = 0;
        for (i, s) in srcs.iter().enumerate() {
            if mask & (1 << i) != 0 {
                need += quotas[*s];
                if let Some(c) = cands.get(*s) {
                    union.extend(c.iter().cloned());
                }
            }
        }
        if union.len() < need {
            return false;
        }
    }
    true
}

fn sampling_fixture(seed: u64, infeasible: &mut usize) -> Vec<String> {
    let mut v = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let registry = Registry::builtin();
    let mut pool: Vec<&str> = vec!["C", "Go", "Java", "Python", "Ruby", "Rust"];
    pool.shuffle(&mut rng);
    let langs = &pool[..rng.gen_range(2..=4)];
    let n_tasks = rng.gen_range(3..=16);
    let presence = rng.gen_range(0.5..1.0);
    let mut snippets = Vec::new();
    let mut client = FakeCompletionClient::new();
    for t in 0..n_tasks {
        for l in langs {
            if rng.gen_bool(presence) {
                let tag = format!("<{t}:{l}>");
                if rng.gen_bool(0.15) {
                    client = client.with_fault(tag.clone(), if rng.gen_bool(0.5) { Fault::Empty } else { Fault::Unterminated });
                }
                snippets.push(RawSnippet {
                    task_name: format!("task {t}"),
                    task_url: String::new(),
                    task_description: String::new(),
                    language_name: l.to_string(),
                    code: format!("// {tag}\nvalue = {t}\nprint(value)"),
                });
            }
        }
    }
    let (corpus, _) = Corpus::from_snippets(snippets.clone(), &registry);
    let pairs = match all_pairs(&corpus) {
        Ok(p) => p,
        Err(e) => return vec![format!("all_pairs failed: {e}")],
    };
    // (a) pair intersection vs brute force
    let mut expected_pairs = 0;
    for dst in langs {
        for src in langs {
            if dst == src || !corpus.languages.contains(*dst) || !corpus.languages.contains(*src) {
                continue;
            }
            expected_pairs += 1;
            let brute: BTreeSet<String> = (0..n_tasks)
                .map(|t| format!("task {t}"))
                .filter(|t| {
                    let has = |l: &str| snippets.iter().any(|s| &s.task_name == t && s.language_name == l);
                    has(src) && has(dst)
                })
                .collect();
            match pairs.iter().find(|p| p.src == *src && p.dst == *dst) {
                Some(p) if p.task_ids == brute => {}
                _ => v.push(format!("(a) {dst}_from_{src} intersection wrong")),
            }
        }
    }
    if pairs.len() != expected_pairs {
        v.push(format!("(a) {} pairs, expected {expected_pairs}", pairs.len()));
    }
    let translator = Translator::new(&client);
    let mut subsets = Vec::new();
    for p in &pairs {
        match build_subdataset(&corpus, p, &translator) {
            Ok((sd, _)) => subsets.push(sd),
            Err(e) => v.push(format!("build failed: {e}")),
        }
    }
    let (dataset, _) = match assemble_dataset(&subsets) {
        Ok(d) => d,
        Err(e) => return vec![format!("assemble failed: {e}")],
    };
    // (b) exact per-class balance after undersampling
    for sd in dataset.subdatasets().unwrap() {
        let count = |t: Target| sd.records.iter().filter(|r| r.target == t).count();
        let cap = count(Target::Human).min(count(Target::Ai));
        if cap == 0 {
            continue;
        }
        let n = rng.gen_range(1..=cap);
        match undersample_subdataset(&sd, n, seed) {
            Ok(u) => {
                for t in [Target::Human, Target::Ai] {
                    let k = u.records.iter().filter(|r| r.target == t).count();
                    if k != n {
                        v.push(format!("(b) {} {t}: {k} != {n}", sd.id));
                    }
                }
                if u.records.iter().any(|r| !sd.records.contains(r)) {
                    v.push(format!("(b) {} invented a record", sd.id));
                }
            }
            Err(e) => v.push(format!("(b) {}: {e}", sd.id)),
        }
        if undersample_subdataset(&sd, cap.max(count(Target::Human)).max(count(Target::Ai)) + 1, seed).is_ok() {
            v.push(format!("(b) {} oversized request accepted", sd.id));
        }
    }
    // (c) quota uniformity
    let dataset_langs: Vec<String> = dataset.languages().into_iter().collect();
    if dataset_langs.len() < 2 {
        return v;
    }
    let n_multi = rng.gen_range(1..=n_tasks.max(2) / 2 + 1);
    let plan = SamplePlan::for_dataset(&dataset, n_multi, seed);
    for (dst, q) in &plan.provenance_quota {
        let (mx, mn) = (q.values().max().unwrap(), q.values().min().unwrap());
        if mx - mn > 1 || q.values().sum::<usize>() != n_multi {
            v.push(format!("(c) quotas for {dst}: {q:?}"));
        }
    }
    // (d) one solution per task per (language, target), exact quotas
    match sample_multilingual(&dataset, &plan) {
        Ok(m) => {
            let mut seen: BTreeSet<(String, Target, String)> = BTreeSet::new();
            let mut counts: BTreeMap<(String, Target), usize> = BTreeMap::new();
            let mut per_src: BTreeMap<(String, String), usize> = BTreeMap::new();
            for r in &m.records {
                if !seen.insert((r.language_name.clone(), r.target, r.task_name.clone())) {
                    v.push(format!("(d) task {} repeated for {} {}", r.task_name, r.language_name, r.target));
                }
                *counts.entry((r.language_name.clone(), r.target)).or_default() += 1;
                if r.target == Target::Ai {
                    *per_src.entry((r.language_name.clone(), r.src().unwrap().to_string())).or_default() += 1;
                }
                if !dataset.records.contains(r) {
                    v.push("(d) sampled record not in dataset".into());
                }
            }
            for (k, c) in &counts {
                if *c != n_multi {
                    v.push(format!("(d) {k:?}: {c} != {n_multi}"));
                }
            }
            for (dst, q) in &plan.provenance_quota {
                for (src, want) in q {
                    let got = per_src.get(&(dst.clone(), src.clone())).copied().unwrap_or(0);
                    if got != *want {
                        v.push(format!("(d) {dst}_from_{src}: {got} != quota {want}"));
                    }
                }
            }
        }
        Err(Error::QuotaInfeasible { dst, .. }) => {
            *infeasible += 1;
            let q = &plan.provenance_quota[&dst];
            let mut cands: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
            for r in dataset.records.iter().filter(|r| r.language_name == dst && r.target == Target::Ai) {
                cands.entry(r.src().unwrap().to_string()).or_default().insert(r.task_name.clone());
            }
            if hall_feasible(q, &cands) {
                v.push(format!("(d) {dst}: reported infeasible but a matching exists"));
            }
        }
        Err(Error::InsufficientRecords { .. }) => *infeasible += 1,
        Err(e) => v.push(format!("(d) unexpected error {e}")),
    }
    v
}

fn sampling_invariants() -> Outcome {
    let mut violations = Vec::new();
    let mut infeasible = 0;
    for seed in 0..1000u64 {
        for msg in sampling_fixture(seed, &mut infeasible) {
            violations.push(format!("fixture {seed}: {msg}"));
        }
    }
    check(
        violations.is_empty(),
        format!(
            "1000 fixtures, {} violations{}, {infeasible} multilingual draws correctly reported infeasible",
            violations.len(),
            violations.first().map(|v| format!(" (first: {v})")).unwrap_or_default()
        ),
    )
}

// 3. Statistics against the scipy reference fixture and the F = t^2 identity.

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

fn statistics() -> Outcome {
    let oracle: Value = serde_json::from_str(include_str!("data/stats_oracle.json")).unwrap();
    let mut worst: f64 = 0.0;
    for case in oracle["welch"].as_array().unwrap() {
        let r = welch_ttest(&floats(&case["a"]), &floats(&case["b"]), 0.05).map_err(|e| e.to_string())?;
        worst = worst.max((r.t_statistic - case["t"].as_f64().unwrap()).abs());
        worst = worst.max((r.p_value - case["p"].as_f64().unwrap()).abs());
    }
    for case in oracle["anova"].as_array().unwrap() {
        let g: Vec<Vec<f64>> = case["groups"].as_array().unwrap().iter().map(floats).collect();
        let refs: Vec<&[f64]> = g.iter().map(Vec::as_slice).collect();
        let r = anova_oneway(&refs).map_err(|e| e.to_string())?;
        worst = worst.max((r.f_statistic - case["f"].as_f64().unwrap()).abs());
        worst = worst.max((r.p_value - case["p"].as_f64().unwrap()).abs());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst_identity: f64 = 0.0;
    for _ in 0..50 {
        let sd = rng.gen_range(0.5..2.0);
        let na = rng.gen_range(3..30);
        let nb = rng.gen_range(3..30);
        let da = Normal::new(rng.gen_range(-1.0..1.0), sd).unwrap();
        let db = Normal::new(rng.gen_range(-1.0..1.0), sd).unwrap();
        let a: Vec<f64> = (0..na).map(|_| da.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..nb).map(|_| db.sample(&mut rng)).collect();
        let t = student_ttest(&a, &b, 0.05).map_err(|e| e.to_string())?;
        let f = anova_oneway(&[&a, &b]).map_err(|e| e.to_string())?;
        worst_identity = worst_identity.max((f.f_statistic - t.t_statistic.powi(2)).abs());
        worst_identity = worst_identity.max((f.p_value - t.p_value).abs());
    }
    check(
        worst <= 1e-6 && worst_identity <= 1e-9,
        format!("50 Welch + 50 ANOVA cases, max |delta| {worst:.2e} (tol 1e-6); F vs t^2 on 50 pairs, max |delta| {worst_identity:.2e} (tol 1e-9)"),
    )
}

// 4. Metrics against brute force.

fn roc_area(scores: &[f64], labels: &[Target]) -> f64 {
    let p = labels.iter().filter(|l| l.is_ai()).count() as f64;
    let n = labels.len() as f64 - p;
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let mut pts = vec![(0.0, 0.0)];
    for t in thresholds {
        let tp = scores.iter().zip(labels).filter(|(s, l)| **s >= t && l.is_ai()).count() as f64;
        let fp = scores.iter().zip(labels).filter(|(s, l)| **s >= t && !l.is_ai()).count() as f64;
        pts.push((fp / n, tp / p));
    }
    pts.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum()
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut bad = Vec::new();
    let mut with_auc = 0;
    for set in 0..100 {
        let n = rng.gen_range(1..=50);
        let ties = set % 2 == 0;
        let labels: Vec<Target> = (0..n).map(|_| Target::from_index(rng.gen_range(0..2))).collect();
        let scores: Vec<f64> = (0..n)
            .map(|_| if ties { rng.gen_range(0..5) as f64 / 4.0 } else { rng.gen::<f64>() })
            .collect();
        let predicted: Vec<Target> = (0..n).map(|_| Target::from_index(rng.gen_range(0..2))).collect();
        let m = metrics_from_scores(&predicted, &scores, &labels).map_err(|e| e.to_string())?;
        let (mut tp, mut tn, mut fp, mut fn_) = (0usize, 0usize, 0usize, 0usize);
        for i in 0..n {
            match (predicted[i], labels[i]) {
                (Target::Ai, Target::Ai) => tp += 1,
                (Target::Human, Target::Human) => tn += 1,
                (Target::Ai, Target::Human) => fp += 1,
                (Target::Human, Target::Ai) => fn_ += 1,
            }
        }
        let f1 = |a: usize, b: usize, c: usize| if 2 * a + b + c == 0 { 1.0 } else { (2 * a) as f64 / (2 * a + b + c) as f64 };
        let acc = (tp + tn) as f64 / n as f64;
        if m.accuracy != acc || m.f1_ai != f1(tp, fp, fn_) || m.f1_macro != 0.5 * (f1(tp, fp, fn_) + f1(tn, fn_, fp)) {
            bad.push(format!("set {set}: accuracy/F1 mismatch"));
        }
        let pos: Vec<f64> = (0..n).filter(|&i| labels[i].is_ai()).map(|i| scores[i]).collect();
        let neg: Vec<f64> = (0..n).filter(|&i| !labels[i].is_ai()).map(|i| scores[i]).collect();
        if pos.is_empty() || neg.is_empty() {
            if m.auc.is_some() {
                bad.push(format!("set {set}: AUC defined for one class"));
            }
            continue;
        }
        with_auc += 1;
        let mut wins = 0.0;
        for a in &pos {
            for b in &neg {
                wins += if a > b { 1.0 } else if a == b { 0.5 } else { 0.0 };
            }
        }
        let pairwise = wins / (pos.len() * neg.len()) as f64;
        let roc = roc_area(&scores, &labels);
        let auc = m.auc.unwrap_or(f64::NAN);
        if !((auc - pairwise).abs() <= 1e-9 && (auc - roc).abs() <= 1e-9) {
            bad.push(format!("set {set}: AUC {auc} vs pairwise {pairwise} vs ROC {roc}"));
        }
    }
    check(
        bad.is_empty(),
        format!("100 prediction sets ({with_auc} with both classes), {} mismatches {:?}", bad.len(), bad.first()),
    )
}

// 5. Analytic gradients against central differences.

fn gradient_check() -> Outcome {
    let dims = EncoderDims {
        vocab_size: 20,
        hidden: 16,
        layers: 2,
        heads: 2,
        ffn_dim: 32,
        head_dim: 16,
        max_len: 8,
    };
    let ids = [1usize, 7, 4, 19, 4, 11, 2, 9];
    let loss_at = |p: &ModelParams, label: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let (logits, _) = model::forward(p, &ids, Mode::Train, 0.2, &mut rng).unwrap();
        model::cross_entropy(logits, label).0
    };
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    let mut tiny_mismatch = 0usize;
    for (seed, label) in [(11u64, 0usize), (12, 1)] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ModelParams::init(dims, &mut rng).unwrap();
        for t in params.tensors_mut() {
            for v in t.iter_mut() {
                *v += rng.gen_range(-0.4..0.4);
            }
        }
        let mut grads = params.zeros_like();
        let mut mask_rng = ChaCha8Rng::seed_from_u64(99);
        model::loss_and_grad(&params, &ids, label, Mode::Train, 0.2, &mut mask_rng, &mut grads).unwrap();
        let analytic: Vec<Vec<f64>> = grads.named_tensors().into_iter().map(|(_, _, v)| v.to_vec()).collect();
        let h = 1e-5;
        let mut probe = params.clone();
        for (t, tensor) in analytic.iter().enumerate() {
            for (i, &a) in tensor.iter().enumerate() {
                let orig = probe.tensors_mut()[t][i];
                probe.tensors_mut()[t][i] = orig + h;
                let up = loss_at(&probe, label);
                probe.tensors_mut()[t][i] = orig - h;
                let down = loss_at(&probe, label);
                probe.tensors_mut()[t][i] = orig;
                let numeric = (up - down) / (2.0 * h);
                let scale = a.abs().max(numeric.abs());
                if scale < 1e-7 {
                    if (a - numeric).abs() >= 1e-8 {
                        tiny_mismatch += 1;
                    }
                    continue;
                }
                worst = worst.max((a - numeric).abs() / scale);
                checked += 1;
            }
        }
    }
    check(
        worst <= 1e-3 && tiny_mismatch == 0 && checked > 1000,
        format!("2-layer hidden-16 encoder, 8 tokens: {checked} gradient entries, max relative error {worst:.2e} (tol 1e-3)"),
    )
}

// 6. Planted-signal separability for the transformer classifier.

fn planted_accuracy(shuffled: bool) -> Result<(f64, usize), String> {
    let ds = planted_signal_dataset("Python", 400, 2024);
    let records = if shuffled { shuffle_labels(&ds.records, 5) } else { ds.records };
    let split = split_train_test(&records, 0.8, SplitMode::RandomStratified, 1).map_err(|e| e.to_string())?;
    let enc = EncoderConfig {
        min_count: 1,
        ..EncoderConfig::small(2, 32, 2, 256)
    };
    let cfg = TrainConfig {
        lr_initial: 1e-3,
        epochs: 10,
        lr_decay_epoch: 8,
        ..TrainConfig::default()
    };
    let ck = train(&split.train, &split.test, &enc, &cfg).map_err(|e| e.to_string())?;
    let m = evaluate_detector(&ck, &split.test).map_err(|e| e.to_string())?;
    Ok((m.accuracy, cfg.epochs))
}

fn planted_signal() -> Outcome {
    let start = Instant::now();
    let (acc, epochs) = planted_accuracy(false)?;
    let (shuffled, _) = planted_accuracy(true)?;
    let elapsed = start.elapsed();
    check(
        acc >= 0.95 && (0.4..=0.6).contains(&shuffled) && elapsed < Duration::from_secs(900),
        format!(
            "test accuracy {:.1}% after {epochs} epochs (need >= 95%), shuffled labels {:.1}% (need 50 +/- 10), {:.1}s",
            100.0 * acc,
            100.0 * shuffled,
            elapsed.as_secs_f64()
        ),
    )
}

// 7. Baselines on the planted-signal data.

fn baseline_sanity() -> Outcome {
    let ds = planted_signal_dataset("Python", 400, 2024);
    let shuffled = shuffle_labels(&ds.records, 5);
    let registry = Registry::builtin();
    let mut parts = Vec::new();
    let mut ok = true;
    for spec in [BaselineSpec::random_forest(), BaselineSpec::xgb_tfidf()] {
        let real = cross_validate_records(&spec, &ds.records, &registry, 10, 3).map_err(|e| e.to_string())?;
        let null = cross_validate_records(&spec, &shuffled, &registry, 10, 3).map_err(|e| e.to_string())?;
        ok &= real.mean >= 0.90 && (0.4..=0.6).contains(&null.mean);
        parts.push(format!("{} {:.1}% / shuffled {:.1}%", spec.name, 100.0 * real.mean, 100.0 * null.mean));
    }
    check(ok, format!("10-fold CV means: {} (need >= 90% / 50 +/- 10)", parts.join(", ")))
}

// 8. Report generator against the published grid.

fn report_fidelity() -> Outcome {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data");
    let text = pipeline::report_from_rows(&dir.join("reference_grid.jsonl")).map_err(|e| e.to_string())?;
    let expected: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("reference_marginals.json")).unwrap()).unwrap();
    let lines: Vec<Vec<&str>> = text.lines().map(|l| l.split_whitespace().collect()).collect();
    let row = |label: &[&str]| lines.iter().find(|t| t.len() > label.len() && t[..label.len()] == *label).cloned();
    let mut checked = 0;
    let mut mismatches = Vec::new();
    let mut compare = |what: String, got: Option<&str>, want: &str| {
        checked += 1;
        if got != Some(want) {
            mismatches.push(format!("{what}: printed {} vs {want}", got.unwrap_or("nothing")));
        }
    };
    for (key, label) in [("accuracy", "accuracy"), ("f1_ai", "F1"), ("auc", "AUC")] {
        let r = row(&["Multilingual", label]);
        let want = expected["multilingual"][key].as_str().unwrap();
        compare(format!("multilingual {label}"), r.as_ref().and_then(|r| r.last().copied()), want);
    }
    for (src, want) in expected["provenance"].as_object().unwrap() {
        let r = row(&[src.as_str()]);
        compare(format!("provenance {src}"), r.as_ref().and_then(|r| r.last().copied()), want.as_str().unwrap());
    }
    let header = row(&["Prov.", "language"]).unwrap_or_default();
    let lang_row = row(&["Language", "accuracy"]).unwrap_or_default();
    for (lang, want) in expected["language"].as_object().unwrap() {
        let got = header.iter().position(|h| h == lang).and_then(|i| lang_row.get(i).copied());
        compare(format!("language {lang}"), got, want.as_str().unwrap());
    }
    check(
        mismatches.is_empty(),
        format!("{checked} printed marginals compared, {} differ: {}", mismatches.len(), mismatches.join("; ")),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("pipeline determinism", determinism),
        ("sampling invariants", sampling_invariants),
        ("statistics oracles", statistics),
        ("metric oracles", metric_oracles),
        ("gradient check", gradient_check),
        ("planted-signal separability", planted_signal),
        ("baseline sanity", baseline_sanity),
        ("report fidelity", report_fidelity),
    ];
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !filter.is_empty() && !filter.contains(&n) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {n} PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n} FAIL {name}: {detail}");
            }
        }
    }
    if filter.is_empty() || filter.contains(&9) {
        println!("criterion 9 MANUAL operational path: not run here, see the checklist in README.md");
    }
    let _ = rng_for;
    if failed > 0 {
        std::process::exit(1);
    }
}
