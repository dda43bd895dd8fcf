mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::{separable_tweets, small_config, write_tsv, BINARY_LABELS};
use crisis_cnn::checkpoint::Checkpoint;
use crisis_cnn::cli;
use crisis_cnn::dataset;
use crisis_cnn::metrics::read_curve;
use crisis_cnn::stream::{CrisisLabel, LabeledTweet, Task};

const BIN: &str = env!("CARGO_BIN_EXE_crisis-cnn");

/// Flags for the small fixture architecture.
const SMALL: [&str; 12] = [
    "--set",
    "embed_dim=16",
    "--set",
    "filters=8",
    "--set",
    "hidden=16",
    "--set",
    "max_len=12",
    "--set",
    "vocab_percent=100",
    "--set",
    "dropout=0.2",
];

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn prepare_small_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.tsv");
    std::fs::write(
        &data,
        "id\ttimestamp\tlabel\ttext\n\
         1\t10\tnot_related\tLovely day @sam http://t.co/x\n\
         2\t11\taffected_individuals\t3 people trapped!!!\n\
         3\t12\tsympathy_support\tPraying for everyone\n",
    )
    .unwrap();
    let out = dir.path().join("prep");
    let o = run(&["prepare", "--data", p(&data), "--out-dir", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("total\t3"), "{text}");
    let counts: u64 = text
        .lines()
        .filter(|l| CrisisLabel::ALL.iter().any(|c| l.starts_with(c.as_str())))
        .map(|l| l.split('\t').nth(1).unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(counts, 3);
    let tokens = std::fs::read_to_string(out.join("tokens.tsv")).unwrap();
    assert_eq!(tokens.lines().count(), 4);
    assert!(tokens.contains("lovely day userID HTTP"), "{tokens}");
    assert!(tokens.contains("D people trapped ! !"), "{tokens}");
    dataset::read_vocab(&out.join("vocab.tsv")).unwrap();
}

#[test]
fn missing_label_column_names_line_two() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.tsv");
    std::fs::write(&data, "id\ttimestamp\tlabel\ttext\n1\t10\n").unwrap();
    let o = run(&["prepare", "--data", p(&data), "--out-dir", p(dir.path())]);
    assert_eq!(o.status.code(), Some(cli::EXIT_DATA));
    let err = stderr(&o);
    assert!(err.starts_with("error:") && err.contains(":2:"), "{err}");
}

#[test]
fn unknown_label_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.tsv");
    std::fs::write(&data, "id\ttimestamp\tlabel\ttext\n1\t10\tweather\train\n").unwrap();
    let o = run(&["prepare", "--data", p(&data), "--out-dir", p(dir.path())]);
    assert_eq!(o.status.code(), Some(cli::EXIT_DATA));
    assert!(stderr(&o).contains("weather"));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(run(&["stream"]).status.code(), Some(cli::EXIT_USAGE));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(cli::EXIT_USAGE));
    let o = run(&[
        "prepare",
        "--data",
        "x",
        "--out-dir",
        "y",
        "--set",
        "colour=red",
    ]);
    assert_eq!(o.status.code(), Some(cli::EXIT_USAGE));
    assert!(run(&["--help"]).status.success());
}

/// Label counts of the six-class event dataset.
const TABLE_COUNTS: [usize; 6] = [756, 1021, 351, 983, 1505, 6698];

#[test]
fn table_fixture_histogram() {
    let mut tweets = Vec::new();
    for (label, &n) in CrisisLabel::ALL.iter().zip(&TABLE_COUNTS) {
        for i in 0..n {
            tweets.push(LabeledTweet {
                id: format!("{}-{i}", label.as_str()),
                timestamp: (tweets.len() as i64 * 7919) % 100_000,
                text: format!("{} report number {i}", label.as_str()),
                label: *label,
            });
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("event.tsv");
    write_tsv(&data, &tweets);
    let config = crisis_cnn::config::RunConfig::default();
    let summary = cli::prepare(&data, &dir.path().join("out"), &config).unwrap();
    assert_eq!(summary.histogram, [756, 1021, 351, 983, 1505, 6698]);
    assert_eq!(summary.records, 11314);
}

#[test]
fn stream_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("event.tsv");
    write_tsv(&data, &separable_tweets(450, &BINARY_LABELS, 4));
    let curve = dir.path().join("curve.csv");
    let ck = dir.path().join("final.ckpt");
    let per = dir.path().join("intervals");
    let mut args = vec![
        "stream",
        "--data",
        p(&data),
        "--curve",
        p(&curve),
        "--checkpoint",
        p(&ck),
        "--checkpoint-dir",
        p(&per),
        "--seed",
        "4",
    ];
    args.extend(SMALL);
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&curve).unwrap();
    assert!(text.starts_with("cum_train,metric\n"));
    let points = read_curve(&curve).unwrap();
    assert_eq!(points.len(), 3);
    assert!(points.windows(2).all(|w| w[0].cum_train < w[1].cum_train));
    assert_eq!(std::fs::read_dir(&per).unwrap().count(), 3);
    let final_ck = Checkpoint::load(&ck).unwrap();
    let last_interval = Checkpoint::load(&per.join("interval_0002.ckpt")).unwrap();
    assert_eq!(final_ck, last_interval);
    assert!(points[2].metric >= 0.95, "{points:?}");
}

#[test]
fn stream_on_empty_dataset_fails() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("empty.tsv");
    std::fs::write(&data, "id\ttimestamp\tlabel\ttext\n").unwrap();
    let curve = dir.path().join("c.csv");
    let o = run(&["stream", "--data", p(&data), "--curve", p(&curve)]);
    assert_eq!(o.status.code(), Some(cli::EXIT_DATA));
    assert!(stderr(&o).contains("empty dataset"));
}

#[test]
fn pretrain_is_deterministic_and_learns() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("past.tsv");
    write_tsv(&data, &separable_tweets(400, &BINARY_LABELS, 12));
    let mut outputs = Vec::new();
    for name in ["a.ckpt", "b.ckpt"] {
        let ck = dir.path().join(name);
        let mut args = vec!["pretrain", "--data", p(&data), "--checkpoint", p(&ck)];
        args.extend(SMALL);
        let o = run(&args);
        assert!(o.status.success(), "{}", stderr(&o));
        outputs.push((std::fs::read(&ck).unwrap(), stdout(&o)));
    }
    assert_eq!(outputs[0].0, outputs[1].0);
    let dev_acc: f64 = outputs[0]
        .1
        .lines()
        .find_map(|l| l.strip_prefix("dev_accuracy\t"))
        .unwrap()
        .parse()
        .unwrap();
    assert!(dev_acc >= 0.95, "{}", outputs[0].1);
}

#[test]
fn zero_epoch_pretrain_emits_the_initial_model() {
    let tweets = separable_tweets(100, &BINARY_LABELS, 2);
    let mut cfg = small_config(Task::Binary, 2);
    cfg.stream.train.max_epochs = 0;
    let (ck, _) = cli::pretrain(&tweets, &cfg, None).unwrap();
    let vocab =
        crisis_cnn::vocab::Vocabulary::build(&dataset::tokenize_all(&tweets), 100.0).unwrap();
    assert_eq!(ck.model, cli::init_model(&cfg, &vocab).unwrap());
}

#[test]
fn evaluate_and_classify() {
    let dir = tempfile::tempdir().unwrap();
    let tweets = separable_tweets(400, &BINARY_LABELS, 21);
    let data = dir.path().join("d.tsv");
    write_tsv(&data, &tweets);
    let cfg = small_config(Task::Binary, 21);
    let (ck, _) = cli::pretrain(&tweets, &cfg, None).unwrap();
    let ck_path = dir.path().join("m.ckpt");
    ck.save(&ck_path).unwrap();

    let o = run(&["evaluate", "--checkpoint", p(&ck_path), "--data", p(&data)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = stdout(&o);
    assert!(report.contains("records\t400"), "{report}");
    assert!(report.contains("auc\t"), "{report}");
    let eval = cli::evaluate(&ck, &tweets, Some(Task::Binary)).unwrap();
    assert_eq!(eval.confusion.total(), 400);

    let o = run(&[
        "evaluate",
        "--checkpoint",
        p(&ck_path),
        "--data",
        p(&data),
        "--task",
        "multiclass",
    ]);
    assert_eq!(o.status.code(), Some(cli::EXIT_DATA));
    assert!(stderr(&o).contains("task mismatch"));

    let texts = ["", "alphaba alphabe alphabi", "alphaba alphabe alphabi"];
    let o = run(&[
        "classify",
        "--checkpoint",
        p(&ck_path),
        texts[0],
        texts[1],
        texts[2],
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let lines: Vec<String> = stdout(&o).lines().map(String::from).collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[1], lines[2]);
    for line in &lines {
        let (label, probs) = line.split_once('\t').unwrap();
        assert!(
            ["not_informative", "informative"].contains(&label),
            "{line}"
        );
        let sum: f64 = probs.split(',').map(|x| x.parse::<f64>().unwrap()).sum();
        assert!((sum - 1.0).abs() <= 2e-4, "{line}");
    }
    assert!(lines[1].starts_with("informative\t"), "{}", lines[1]);

    let o = run(&[
        "classify",
        "--checkpoint",
        p(&dir.path().join("missing.ckpt")),
        "x",
    ]);
    assert_eq!(o.status.code(), Some(cli::EXIT_DATA));
}

#[test]
fn multiclass_checkpoint_rejects_binary_labels() {
    let tweets = separable_tweets(120, &BINARY_LABELS, 5);
    let mut cfg = small_config(Task::Multiclass, 5);
    cfg.stream.train.max_epochs = 1;
    let (ck, _) = cli::pretrain(&tweets, &cfg, None).unwrap();
    assert_eq!(ck.model.config.classes, 6);
    let err = cli::evaluate(&ck, &tweets, Some(Task::Binary)).unwrap_err();
    assert!(matches!(err, crisis_cnn::Error::TaskMismatch(_)), "{err}");
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(
        &conf,
        "embed_dim = 16\nfilters = 8\nhidden = 16\nmax_len = 12\nmax_epochs = 2\n",
    )
    .unwrap();
    let data = dir.path().join("d.tsv");
    write_tsv(&data, &separable_tweets(150, &BINARY_LABELS, 6));
    let ck = dir.path().join("m.ckpt");
    let o = run(&[
        "pretrain",
        "--data",
        p(&data),
        "--checkpoint",
        p(&ck),
        "--config",
        p(&conf),
        "--set",
        "hidden=4",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let model = Checkpoint::load(&ck).unwrap().model;
    assert_eq!((model.config.embed_dim, model.config.hidden), (16, 4));
    assert!(stdout(&o).contains("epochs\t"));
}
