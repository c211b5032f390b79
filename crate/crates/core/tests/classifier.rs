use codestylo::classifier::model::{self, EncoderDims, Mode, ModelParams};
use codestylo::classifier::{train, EncoderConfig, ModelCheckpoint, TrainConfig};
use codestylo::record::{SnippetRecord, Target};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn toy_params(seed: u64) -> ModelParams {
    let dims = EncoderDims {
        vocab_size: 20,
        hidden: 16,
        layers: 2,
        heads: 2,
        ffn_dim: 32,
        head_dim: 16,
        max_len: 8,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = ModelParams::init(dims, &mut rng).unwrap();
    // Larger weights than the default init so every layer carries signal.
    for t in p.tensors_mut() {
        for v in t.iter_mut() {
            *v += rng.gen_range(-0.4..0.4);
        }
    }
    p
}

fn loss_at(p: &ModelParams, ids: &[usize], label: usize, mask_seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(mask_seed);
    let (logits, _) = model::forward(p, ids, Mode::Train, 0.2, &mut rng).unwrap();
    model::cross_entropy(logits, label).0
}

#[test]
fn analytic_gradients_match_central_differences() {
    let ids = [1usize, 7, 4, 19, 4, 11, 2, 9];
    for (seed, label) in [(11u64, 0usize), (12, 1)] {
        let params = toy_params(seed);
        let mut grads = params.zeros_like();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        model::loss_and_grad(&params, &ids, label, Mode::Train, 0.2, &mut rng, &mut grads).unwrap();

        let analytic: Vec<(String, Vec<f64>)> = grads
            .named_tensors()
            .into_iter()
            .map(|(n, _, v)| (n, v.to_vec()))
            .collect();
        let h = 1e-5;
        let mut worst = 0.0f64;
        let mut checked = 0usize;
        let mut probe = params.clone();
        let n_tensors = analytic.len();
        for t in 0..n_tensors {
            let len = analytic[t].1.len();
            for i in 0..len {
                let orig = probe.tensors_mut()[t][i];
                probe.tensors_mut()[t][i] = orig + h;
                let up = loss_at(&probe, &ids, label, 99);
                probe.tensors_mut()[t][i] = orig - h;
                let down = loss_at(&probe, &ids, label, 99);
                probe.tensors_mut()[t][i] = orig;
                let numeric = (up - down) / (2.0 * h);
                let a = analytic[t].1[i];
                let scale = a.abs().max(numeric.abs());
                if scale < 1e-7 {
                    assert!((a - numeric).abs() < 1e-8, "{}[{i}]: {a} vs {numeric}", analytic[t].0);
                    continue;
                }
                let rel = (a - numeric).abs() / scale;
                assert!(rel <= 1e-3, "{}[{i}]: analytic {a}, numeric {numeric}, rel {rel}", analytic[t].0);
                worst = worst.max(rel);
                checked += 1;
            }
        }
        assert!(checked > 1000, "only {checked} entries had measurable gradients");
        assert!(worst <= 1e-3);
    }
}

#[test]
fn eval_mode_is_bit_identical_and_normalized() {
    let p = toy_params(5);
    let ids = [1usize, 3, 5, 7];
    let a = model::forward(&p, &ids, Mode::Eval, 0.2, &mut ChaCha8Rng::seed_from_u64(1)).unwrap().0;
    let b = model::forward(&p, &ids, Mode::Eval, 0.2, &mut ChaCha8Rng::seed_from_u64(2)).unwrap().0;
    assert_eq!(a, b);
    let s = model::softmax2(a);
    assert!((s[0] + s[1] - 1.0).abs() < 1e-12);
}

#[test]
fn head_ignores_positions_after_the_first() {
    let p = toy_params(6);
    let hidden = model::encode(&p, &[1, 2, 3, 4, 5]).unwrap();
    let base = model::head_logits(&p, hidden.view(), None);
    let mut perturbed = hidden.clone();
    for r in 1..perturbed.nrows() {
        perturbed.row_mut(r).mapv_inplace(|v| v * -3.0 + 1.0);
    }
    assert_eq!(model::head_logits(&p, perturbed.view(), None), base);
    perturbed.row_mut(0).mapv_inplace(|v| v + 1.0);
    assert_ne!(model::head_logits(&p, perturbed.view(), None), base);
}

fn rec(task: usize, code: String, target: Target) -> SnippetRecord {
    SnippetRecord {
        task_name: format!("task-{task}"),
        task_url: String::new(),
        task_description: String::new(),
        language_name: "Python".into(),
        code,
        target,
        set: "Python_from_Go".into(),
    }
}

#[test]
fn checkpoint_predictions_ignore_surrounding_whitespace() {
    let data: Vec<SnippetRecord> = (0..6)
        .map(|i| rec(i, format!("v = {i}\nprint(v)"), Target::from_index(i % 2)))
        .collect();
    let cfg = TrainConfig {
        epochs: 2,
        lr_decay_epoch: 1,
        batch_size: 2,
        ..Default::default()
    };
    let enc = EncoderConfig {
        min_count: 1,
        ..EncoderConfig::small(1, 16, 2, 32)
    };
    let ck = train(&data, &[], &enc, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    ck.save(dir.path()).unwrap();
    let loaded = ModelCheckpoint::load(dir.path()).unwrap();
    assert_eq!(loaded.train_config, cfg);
    let a = loaded.predict("v = 3\nprint(v)").unwrap();
    let b = loaded.predict("\n\n   v = 3\nprint(v)  \n").unwrap();
    assert_eq!(a, b);
    assert_eq!(a, loaded.predict("v = 3\nprint(v)").unwrap());
}

#[test]
fn warm_start_reuses_encoder_and_tokenizer() {
    let data: Vec<SnippetRecord> = (0..4)
        .map(|i| rec(i, format!("w = {i}"), Target::from_index(i % 2)))
        .collect();
    let cfg = TrainConfig {
        epochs: 2,
        lr_decay_epoch: 1,
        batch_size: 2,
        ..Default::default()
    };
    let enc = EncoderConfig {
        min_count: 1,
        ..EncoderConfig::small(1, 16, 2, 32)
    };
    let base = train(&data, &[], &enc, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    base.save(dir.path()).unwrap();
    let warm = EncoderConfig {
        variant: codestylo::classifier::EncoderVariant::PretrainedCheckpoint {
            path: dir.path().to_path_buf(),
        },
        ..enc
    };
    let tuned = train(&data, &[], &warm, &cfg).unwrap();
    assert_eq!(tuned.tokenizer, base.tokenizer);
    assert_eq!(tuned.params.dims, base.params.dims);
}
