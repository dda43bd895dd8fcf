//! Tab-separated tweet files and prepared-data artefacts.
//!
//! Input files start with the header `id<TAB>timestamp<TAB>label<TAB>text`;
//! the text is everything after the third tab, so it may itself contain tabs.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::preprocess::{preprocess, TokenSequence};
use crate::stream::{CrisisLabel, Example, LabeledTweet, Task};
use crate::vocab::Vocabulary;

pub const HEADER: [&str; 4] = ["id", "timestamp", "label", "text"];
pub const TOKENS_HEADER: &str = "id\ttimestamp\tlabel\ttokens";

pub fn read_tweets(path: &Path) -> Result<Vec<LabeledTweet>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_tweets(&text).map_err(|(line, message)| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    })
}

/// Parses file contents; errors carry a 1-based line number.
pub fn parse_tweets(text: &str) -> std::result::Result<Vec<LabeledTweet>, (usize, String)> {
    let mut lines = text.lines().map(|l| l.trim_end_matches('\r'));
    let header: Vec<&str> = lines.next().unwrap_or_default().split('\t').collect();
    if header != HEADER {
        return Err((1, format!("expected header `{}`", HEADER.join("\\t"))));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.splitn(4, '\t').collect();
        if fields.len() < 4 {
            let missing = HEADER[fields.len()];
            return Err((lineno, format!("missing `{missing}` column")));
        }
        let id = fields[0].trim();
        if id.is_empty() {
            return Err((lineno, "empty id".into()));
        }
        let timestamp = fields[1]
            .trim()
            .parse::<i64>()
            .map_err(|_| (lineno, format!("invalid timestamp `{}`", fields[1])))?;
        let label = fields[2]
            .trim()
            .parse::<CrisisLabel>()
            .map_err(|_| (lineno, format!("unknown label `{}`", fields[2])))?;
        out.push(LabeledTweet {
            id: id.to_string(),
            timestamp,
            text: fields[3].to_string(),
            label,
        });
    }
    Ok(out)
}

/// Record counts per label in [`CrisisLabel::ALL`] order.
pub fn label_histogram(tweets: &[LabeledTweet]) -> [u64; 6] {
    let mut counts = [0u64; 6];
    for t in tweets {
        counts[t.label.index()] += 1;
    }
    counts
}

pub fn tokenize_all(tweets: &[LabeledTweet]) -> Vec<TokenSequence> {
    tweets.iter().map(|t| preprocess(&t.text)).collect()
}

/// Encodes tweets against `vocab` with class indices for `task`.
pub fn encode(
    tweets: &[LabeledTweet],
    tokens: &[TokenSequence],
    vocab: &Vocabulary,
    task: Task,
) -> Vec<Example> {
    tweets
        .iter()
        .zip(tokens)
        .map(|(t, seq)| Example {
            id: t.id.clone(),
            timestamp: t.timestamp,
            tokens: vocab.encode(seq),
            class: task.class_of(t.label),
        })
        .collect()
}

pub fn write_tokens(path: &Path, tweets: &[LabeledTweet], tokens: &[TokenSequence]) -> Result<()> {
    let mut out = String::from(TOKENS_HEADER);
    out.push('\n');
    for (t, seq) in tweets.iter().zip(tokens) {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            t.id, t.timestamp, t.label, seq
        ));
    }
    write_file(path, out.as_bytes())
}

/// Vocabulary file: a `coverage<TAB>P` line, then `token<TAB>count` for the
/// non-special entries in index order.
pub fn write_vocab(path: &Path, vocab: &Vocabulary) -> Result<()> {
    let mut out = format!("coverage\t{}\n", vocab.coverage());
    for (tok, count) in vocab.entries() {
        out.push_str(&format!("{tok}\t{count}\n"));
    }
    write_file(path, out.as_bytes())
}

pub fn read_vocab(path: &Path) -> Result<Vocabulary> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().map(|l| l.trim_end_matches('\r'));
    let coverage = lines
        .next()
        .and_then(|l| l.strip_prefix("coverage\t"))
        .and_then(|v| v.parse::<f64>().ok())
        .ok_or_else(|| err(1, "expected `coverage<TAB>P` header".into()))?;
    let mut entries = Vec::new();
    for (i, line) in lines.enumerate() {
        let (tok, count) = line
            .split_once('\t')
            .ok_or_else(|| err(i + 2, "expected `token<TAB>count`".into()))?;
        let count = count
            .parse::<u64>()
            .map_err(|_| err(i + 2, format!("invalid count `{count}`")))?;
        entries.push((tok.to_string(), count));
    }
    Vocabulary::from_entries(entries, coverage)
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}
