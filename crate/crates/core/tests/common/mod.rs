//! Fixtures and oracles shared by the integration tests.
#![allow(dead_code)]

use std::path::Path;

use crisis_cnn::config::RunConfig;
use crisis_cnn::net::{CnnConfig, CnnModel, CnnParams, Gradients, Head};
use crisis_cnn::stream::{CrisisLabel, LabeledTweet, Task};
use crisis_cnn::tensor::Matrix;
use crisis_cnn::vocab::{EmbeddingTable, PAD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CONSONANTS: &[u8] = b"bcfghjklmnpqrstvwxz";
const VOWELS: &[u8] = b"aeiou";

/// A lowercase word that survives normalization unchanged: `prefix`
/// followed by consonant-vowel syllables, so no character repeats three
/// times in a row.
pub fn word(prefix: &str, i: usize) -> String {
    let per = CONSONANTS.len() * VOWELS.len();
    let mut s = prefix.to_string();
    let mut n = i;
    loop {
        let syl = n % per;
        s.push(CONSONANTS[syl / VOWELS.len()] as char);
        s.push(VOWELS[syl % VOWELS.len()] as char);
        n /= per;
        if n == 0 {
            break;
        }
    }
    s
}

const PREFIXES: [&str; 6] = ["alpha", "bravo", "charli", "delta", "echo", "foxtro"];

fn pool_word(label: CrisisLabel, i: usize) -> String {
    word(PREFIXES[label.index()], i)
}

fn stamped(records: Vec<(CrisisLabel, String)>, rng: &mut ChaCha8Rng) -> Vec<LabeledTweet> {
    let mut ts = 1_430_000_000i64;
    records
        .into_iter()
        .enumerate()
        .map(|(i, (label, text))| {
            ts += rng.gen_range(1..120);
            LabeledTweet {
                id: format!("t{i:06}"),
                timestamp: ts,
                text,
                label,
            }
        })
        .collect()
}

/// Token-disjoint classes: every word of a tweet comes from its label's
/// private pool of `pool` words.
pub fn separable_tweets(n: usize, labels: &[CrisisLabel], seed: u64) -> Vec<LabeledTweet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool = 40;
    let records = (0..n)
        .map(|_| {
            let label = labels[rng.gen_range(0..labels.len())];
            let len = rng.gen_range(5..=10);
            let words: Vec<String> = (0..len)
                .map(|_| pool_word(label, rng.gen_range(0..pool)))
                .collect();
            (label, words.join(" "))
        })
        .collect();
    stamped(records, &mut rng)
}

/// Shared-distribution fixture with a weak signal: each word comes from the
/// label's pool with probability `signal`, otherwise from a common noise
/// pool. Drawing out-of-event and event data from it with different seeds
/// gives a setting where pretraining must help.
pub fn noisy_tweets(n: usize, labels: &[CrisisLabel], signal: f64, seed: u64) -> Vec<LabeledTweet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (pool, noise) = (60, 300);
    let records = (0..n)
        .map(|_| {
            let label = labels[rng.gen_range(0..labels.len())];
            let len = rng.gen_range(6..=12);
            let words: Vec<String> = (0..len)
                .map(|_| {
                    if rng.gen_bool(signal) {
                        pool_word(label, rng.gen_range(0..pool))
                    } else {
                        word("noise", rng.gen_range(0..noise))
                    }
                })
                .collect();
            (label, words.join(" "))
        })
        .collect();
    stamped(records, &mut rng)
}

pub const BINARY_LABELS: [CrisisLabel; 2] =
    [CrisisLabel::AffectedIndividuals, CrisisLabel::NotRelated];
pub const FOUR_LABELS: [CrisisLabel; 4] = [
    CrisisLabel::AffectedIndividuals,
    CrisisLabel::DonationsVolunteering,
    CrisisLabel::InfrastructureUtilities,
    CrisisLabel::NotRelated,
];

/// A small architecture that keeps fixture runs fast.
pub fn small_config(task: Task, seed: u64) -> RunConfig {
    let mut c = RunConfig::default();
    c.set("task", &task.to_string()).unwrap();
    for (k, v) in [
        ("embed_dim", "16"),
        ("filters", "8"),
        ("hidden", "16"),
        ("max_len", "12"),
        ("dropout", "0.2"),
        ("vocab_percent", "100"),
    ] {
        c.set(k, v).unwrap();
    }
    c.stream.train.seed = seed;
    c.validate().unwrap();
    c
}

pub fn write_tsv(path: &Path, tweets: &[LabeledTweet]) {
    let mut s = String::from("id\ttimestamp\tlabel\ttext\n");
    for t in tweets {
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            t.id, t.timestamp, t.label, t.text
        ));
    }
    std::fs::write(path, s).unwrap();
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

// ---------------------------------------------------------------------------
// Finite-difference gradient oracle

pub const FD_STEP: f64 = 1e-4;
pub const FD_REL_TOL: f64 = 1e-4;
pub const FD_ABS_FLOOR: f64 = 1e-7;
/// Instances with a ReLU pre-activation or a max-pool runner-up this close
/// to a kink are redrawn: finite differences are not meaningful there.
pub const KINK_MARGIN: f64 = 1e-3;

#[derive(Debug)]
pub struct GradInstance {
    pub model: CnnModel<f64>,
    pub tokens: Vec<usize>,
    pub gold: usize,
}

/// Random micro-configuration with every parameter (biases included)
/// drawn uniformly from [-1, 1].
pub fn random_instance(rng: &mut ChaCha8Rng) -> GradInstance {
    let head = if rng.gen_bool(0.5) {
        Head::Bernoulli
    } else {
        Head::Softmax
    };
    let classes = match head {
        Head::Bernoulli => 2,
        Head::Softmax => rng.gen_range(2..=4),
    };
    let config = CnnConfig {
        embed_dim: rng.gen_range(1..=4),
        window: rng.gen_range(1..=3),
        filters: rng.gen_range(1..=3),
        pool: rng.gen_range(1..=3),
        hidden: rng.gen_range(1..=3),
        classes,
        head,
        max_len: rng.gen_range(1..=5),
        dropout: 0.0,
        fine_tune_embeddings: true,
    };
    let vocab = rng.gen_range(3..=7);
    let mut uniform =
        |rows: usize, cols: usize| Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..=1.0));
    let embeddings = EmbeddingTable::from_matrix(uniform(vocab, config.embed_dim));
    let mut params = CnnParams::init(&config, embeddings, &mut ChaCha8Rng::seed_from_u64(0));
    params.filters = uniform(config.filters, config.window * config.embed_dim);
    params.dense = uniform(config.hidden, config.pooled_len());
    params.output = uniform(config.output_units(), config.hidden);
    let mut vec = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect() };
    params.filter_bias = vec(config.filters);
    params.dense_bias = vec(config.hidden);
    params.output_bias = vec(config.output_units());
    let len = rng.gen_range(1..=config.max_len);
    // occasional PAD tokens exercise the frozen row
    let tokens = (0..len)
        .map(|_| {
            if rng.gen_bool(0.15) {
                PAD
            } else {
                rng.gen_range(1..vocab)
            }
        })
        .collect();
    let gold = rng.gen_range(0..classes);
    GradInstance {
        model: CnnModel::new(config, params).unwrap(),
        tokens,
        gold,
    }
}

/// Whether the instance sits within [`KINK_MARGIN`] of a non-differentiable
/// point.
pub fn near_kink(inst: &GradInstance) -> bool {
    let trace = inst.model.forward(&inst.tokens, None).unwrap();
    let c = &inst.model.config;
    if trace
        .conv_pre
        .as_slice()
        .iter()
        .any(|x| x.abs() < KINK_MARGIN)
    {
        return true;
    }
    if trace.hidden_pre.iter().any(|x| x.abs() < KINK_MARGIN) {
        return true;
    }
    let flen = c.feature_len();
    for f in 0..c.filters {
        let row = trace.features.row(f);
        for start in 0..flen {
            let mut window: Vec<f64> = (start..start + c.pool)
                .map(|j| row.get(j).copied().unwrap_or(0.0))
                .collect();
            window.sort_by(|a, b| b.partial_cmp(a).unwrap());
            if window.len() > 1 && window[0] > 0.0 && window[0] - window[1] < KINK_MARGIN {
                return true;
            }
        }
    }
    false
}

fn loss_of(model: &CnnModel<f64>, tokens: &[usize], gold: usize) -> f64 {
    let trace = model.forward(tokens, None).unwrap();
    model.loss(&trace, gold)
}

/// Every non-PAD parameter entry as `(tensor, index, analytic)` with the
/// analytic embedding gradient expanded to a dense matrix.
fn analytic_entries(inst: &GradInstance, grads: &Gradients<f64>) -> Vec<Vec<f64>> {
    let c = &inst.model.config;
    let rows = inst.model.params.embeddings.rows();
    let mut out = vec![grads
        .embedding_matrix(rows, c.embed_dim)
        .as_slice()
        .to_vec()];
    out.extend(grads.dense_tensors().iter().map(|t| t.to_vec()));
    out
}

#[derive(Debug, Default)]
pub struct FdReport {
    pub entries: usize,
    pub worst_rel: f64,
    pub failures: Vec<String>,
}

/// Compares every analytic gradient entry against central differences.
pub fn check_gradients(inst: &GradInstance) -> FdReport {
    let trace = inst.model.forward(&inst.tokens, None).unwrap();
    let grads = inst.model.backward(&trace, inst.gold);
    compare_with_differences(inst, &grads)
}

/// Compares `grads` (claimed gradients of `inst`) against central
/// differences.
pub fn compare_with_differences(inst: &GradInstance, grads: &Gradients<f64>) -> FdReport {
    let analytic = analytic_entries(inst, grads);
    let dim = inst.model.config.embed_dim;
    let mut report = FdReport::default();
    let mut probe = inst.model.clone();
    for (t, claimed) in analytic.iter().enumerate() {
        for (i, &a) in claimed.iter().enumerate() {
            if t == 0 && i / dim == PAD {
                continue;
            }
            let orig = probe.params.tensors()[t][i];
            probe.params.tensors_mut()[t][i] = orig + FD_STEP;
            let up = loss_of(&probe, &inst.tokens, inst.gold);
            probe.params.tensors_mut()[t][i] = orig - FD_STEP;
            let down = loss_of(&probe, &inst.tokens, inst.gold);
            probe.params.tensors_mut()[t][i] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let abs = (a - numeric).abs();
            let rel = abs / a.abs().max(numeric.abs()).max(f64::MIN_POSITIVE);
            report.entries += 1;
            if a.abs().max(numeric.abs()) > 1e-6 {
                report.worst_rel = report.worst_rel.max(rel);
            }
            if abs > FD_ABS_FLOOR && rel > FD_REL_TOL {
                report.failures.push(format!(
                    "tensor {t} entry {i}: analytic {a:e} numeric {numeric:e}"
                ));
            }
        }
    }
    report
}

/// Draws instances until `wanted` are clear of kinks; returns them with the
/// number of rejected draws.
pub fn kink_free_instances(wanted: usize, seed: u64) -> (Vec<GradInstance>, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(wanted);
    let mut rejected = 0;
    while out.len() < wanted {
        let inst = random_instance(&mut rng);
        if near_kink(&inst) {
            rejected += 1;
            assert!(rejected < 100 * wanted, "kink rejection is not terminating");
        } else {
            out.push(inst);
        }
    }
    (out, rejected)
}
