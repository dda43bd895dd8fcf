//! Vocabulary construction and the embedding look-up table.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::preprocess::TokenSequence;
use crate::tensor::{Matrix, Real};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Half-width of the uniform distribution used for rows without a
/// pretrained vector.
pub const INIT_RANGE: f64 = 0.25;

/// Token to index map. Index 0 is the padding token, index 1 the
/// out-of-vocabulary token; the rest are ordered by descending corpus
/// frequency, ties broken lexicographically.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
    coverage: f64,
}

impl Vocabulary {
    /// Builds a vocabulary keeping the most frequent `coverage` percent of
    /// distinct tokens (rounded up).
    pub fn build<'a, I>(corpus: I, coverage: f64) -> Result<Self>
    where
        I: IntoIterator<Item = &'a TokenSequence>,
    {
        if !(coverage > 0.0 && coverage <= 100.0) {
            return Err(Error::InvalidCoverage(coverage));
        }
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for seq in corpus {
            for tok in seq {
                if tok != PAD_TOKEN && tok != UNK_TOKEN {
                    *counts.entry(tok.as_str()).or_default() += 1;
                }
            }
        }
        if counts.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut ranked: Vec<(&str, u64)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let keep = kept_types(ranked.len(), coverage);
        ranked.truncate(keep);
        Self::from_entries(
            ranked.into_iter().map(|(t, c)| (t.to_string(), c)),
            coverage,
        )
    }

    /// Reassembles a vocabulary from its non-special entries in index order.
    pub fn from_entries<I>(entries: I, coverage: f64) -> Result<Self>
    where
        I: IntoIterator<Item = (String, u64)>,
    {
        let mut tokens = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        let mut counts = vec![0, 0];
        for (tok, count) in entries {
            tokens.push(tok);
            counts.push(count);
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, tok) in tokens.iter().enumerate() {
            if index.insert(tok.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate vocabulary token `{tok}`")));
            }
        }
        Ok(Vocabulary {
            tokens,
            counts,
            index,
            coverage,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coverage(&self) -> f64 {
        self.coverage
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    pub fn count(&self, index: usize) -> u64 {
        self.counts.get(index).copied().unwrap_or(0)
    }

    /// Non-special entries in index order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, u64)> + '_ {
        self.tokens[2..]
            .iter()
            .zip(&self.counts[2..])
            .map(|(t, &c)| (t.as_str(), c))
    }

    /// Maps tokens to indices, sending unknown tokens to [`UNK`].
    pub fn encode(&self, tokens: &TokenSequence) -> Vec<usize> {
        tokens
            .iter()
            .map(|t| self.index_of(t).unwrap_or(UNK))
            .collect()
    }
}

fn kept_types(distinct: usize, coverage: f64) -> usize {
    let exact = coverage * distinct as f64 / 100.0;
    // 67% of 3 types is 2.01, which must round up to 3; products that are
    // integral up to float noise must not.
    let keep = (exact - 1e-9).ceil().max(0.0) as usize;
    keep.clamp(1, distinct)
}

/// The `|V| x D` look-up table. Row [`PAD`] is all zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable<T> {
    weights: Matrix<T>,
}

impl<T: Real> EmbeddingTable<T> {
    /// Panics if `weights` has no rows.
    pub fn from_matrix(mut weights: Matrix<T>) -> Self {
        weights.row_mut(PAD).fill(T::zero());
        EmbeddingTable { weights }
    }

    /// Every row except PAD drawn uniformly from `[-0.25, 0.25]`.
    pub fn random(rows: usize, dim: usize, rng: &mut impl Rng) -> Self {
        let range = INIT_RANGE;
        let weights = Matrix::from_fn(rows, dim, |_, _| T::of_f64(rng.gen_range(-range..=range)));
        Self::from_matrix(weights)
    }

    pub fn dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn rows(&self) -> usize {
        self.weights.rows()
    }

    pub fn row(&self, index: usize) -> &[T] {
        self.weights.row(index)
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.weights
    }

    /// Mutable access for optimizers. Callers must keep the PAD row at zero.
    pub fn matrix_mut(&mut self) -> &mut Matrix<T> {
        &mut self.weights
    }

    /// Looks up each token; out-of-vocabulary tokens get the UNK row.
    pub fn lookup<'a>(&'a self, vocab: &Vocabulary, tokens: &TokenSequence) -> Vec<&'a [T]> {
        vocab
            .encode(tokens)
            .into_iter()
            .map(|i| self.row(i))
            .collect()
    }

    pub fn cast<U: Real>(&self) -> EmbeddingTable<U> {
        EmbeddingTable {
            weights: self.weights.cast(),
        }
    }
}

/// Loads pretrained vectors for `vocab` from a word2vec-style text file.
///
/// Rows missing from the file (and UNK) are drawn uniformly from
/// `[-0.25, 0.25]` using `seed`. Every row is drawn before the file is
/// applied, so the random rows do not depend on file contents.
pub fn load_pretrained<T: Real>(
    path: &Path,
    vocab: &Vocabulary,
    dim: usize,
    seed: u64,
) -> Result<EmbeddingTable<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = EmbeddingTable::<T>::random(vocab.len(), dim, &mut rng);
    let mut seen = vec![false; vocab.len()];
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(' ').filter(|f| !f.is_empty());
        let token = fields.next().unwrap_or_default();
        let values: Vec<&str> = fields.collect();
        if lineno == 1 && values.len() == 1 && is_header(token, values[0]) {
            let file_dim: usize = values[0].parse().unwrap_or(0);
            if file_dim != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: file_dim,
                    line: lineno,
                });
            }
            continue;
        }
        if values.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: values.len(),
                line: lineno,
            });
        }
        let mut parsed = Vec::with_capacity(dim);
        for v in &values {
            let x: f64 = v.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                message: format!("invalid float `{v}`"),
            })?;
            if !x.is_finite() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno,
                    message: format!("non-finite value `{v}`"),
                });
            }
            parsed.push(T::of_f64(x));
        }
        if let Some(i) = vocab.index_of(token) {
            if i != PAD && !seen[i] {
                table.matrix_mut().row_mut(i).copy_from_slice(&parsed);
                seen[i] = true;
            }
        }
    }
    Ok(table)
}

fn is_header(a: &str, b: &str) -> bool {
    a.parse::<u64>().is_ok() && b.parse::<u64>().is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn seq(tokens: &[&str]) -> TokenSequence {
        tokens.iter().copied().collect()
    }

    fn repeated(counts: &[(&str, usize)]) -> TokenSequence {
        counts
            .iter()
            .flat_map(|&(t, n)| std::iter::repeat_n(t, n))
            .collect()
    }

    #[test]
    fn full_coverage_keeps_everything() {
        let v = Vocabulary::build(&[seq(&["a", "b", "a"])], 100.0).unwrap();
        assert_eq!(v.len(), 4);
        assert_eq!(v.index_of(PAD_TOKEN), Some(0));
        assert_eq!(v.index_of(UNK_TOKEN), Some(1));
        assert_eq!(v.index_of("a"), Some(2));
        assert_eq!(v.index_of("b"), Some(3));
        assert_eq!(v.count(2), 2);
    }

    #[test]
    fn coverage_rounds_up() {
        let corpus = [repeated(&[("a", 5), ("b", 3), ("c", 1)])];
        let v = Vocabulary::build(&corpus, 67.0).unwrap();
        assert_eq!(v.len(), 5);
        assert!(v.index_of("c").is_some());
    }

    #[test]
    fn pruning_drops_least_frequent_with_lexicographic_ties() {
        let corpus = [repeated(&[("d", 1), ("a", 5), ("c", 1), ("b", 3)])];
        let v = Vocabulary::build(&corpus, 50.0).unwrap();
        assert_eq!(v.len(), 4);
        assert_eq!(v.index_of("a"), Some(2));
        assert_eq!(v.index_of("b"), Some(3));
        assert_eq!(v.encode(&seq(&["c", "d", "a"])), vec![UNK, UNK, 2]);

        let ties = [repeated(&[("z", 2), ("y", 2), ("x", 1)])];
        let v = Vocabulary::build(&ties, 34.0).unwrap();
        // ceil(0.34 * 3) = 2: both count-2 types survive, ordered y < z.
        assert_eq!(v.index_of("y"), Some(2));
        assert_eq!(v.index_of("z"), Some(3));
        let v = Vocabulary::build(&ties, 33.0).unwrap();
        assert_eq!(v.index_of("y"), Some(2));
        assert_eq!(v.index_of("z"), None);
    }

    #[test]
    fn empty_corpus_and_bad_coverage_rejected() {
        assert!(matches!(
            Vocabulary::build(&[], 90.0),
            Err(Error::EmptyCorpus)
        ));
        assert!(matches!(
            Vocabulary::build(&[seq(&[])], 90.0),
            Err(Error::EmptyCorpus)
        ));
        assert!(matches!(
            Vocabulary::build(&[seq(&["a"])], 0.0),
            Err(Error::InvalidCoverage(_))
        ));
        assert!(matches!(
            Vocabulary::build(&[seq(&["a"])], 100.5),
            Err(Error::InvalidCoverage(_))
        ));
    }

    fn write_file(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    fn fire_vocab() -> Vocabulary {
        Vocabulary::from_entries([("fire".to_string(), 1)], 100.0).unwrap()
    }

    #[test]
    fn pretrained_rows_are_copied() {
        let f = write_file("fire 0.1 0.2\n");
        let table: EmbeddingTable<f32> = load_pretrained(f.path(), &fire_vocab(), 2, 7).unwrap();
        assert_eq!(table.row(2), [0.1, 0.2]);
        assert_eq!(table.row(PAD), [0.0, 0.0]);
        assert!(table.row(UNK).iter().all(|x| x.abs() <= 0.25));
    }

    #[test]
    fn header_line_is_detected() {
        let f = write_file("1 2\nfire 0.5 -0.5\n");
        let table: EmbeddingTable<f32> = load_pretrained(f.path(), &fire_vocab(), 2, 7).unwrap();
        assert_eq!(table.row(2), [0.5, -0.5]);
        let f = write_file("1 3\nfire 0.5 -0.5\n");
        assert!(matches!(
            load_pretrained::<f32>(f.path(), &fire_vocab(), 2, 7),
            Err(Error::DimensionMismatch { found: 3, .. })
        ));
    }

    #[test]
    fn empty_file_falls_back_to_seeded_random() {
        let f = write_file("");
        let a: EmbeddingTable<f32> = load_pretrained(f.path(), &fire_vocab(), 4, 11).unwrap();
        let b: EmbeddingTable<f32> = load_pretrained(f.path(), &fire_vocab(), 4, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.row(PAD), [0.0; 4]);
        assert!(a.row(2).iter().any(|&x| x != 0.0));
        assert!(a.matrix().as_slice().iter().all(|x| x.abs() <= 0.25));
    }

    #[test]
    fn malformed_lines_report_line_number() {
        let f = write_file("fire 0.1 0.2\nsmoke 0.1 abc\n");
        match load_pretrained::<f32>(f.path(), &fire_vocab(), 2, 7) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let f = write_file("fire 0.1 0.2 0.3\n");
        assert!(matches!(
            load_pretrained::<f32>(f.path(), &fire_vocab(), 2, 7),
            Err(Error::DimensionMismatch { line: 1, .. })
        ));
    }

    #[test]
    fn lookup_maps_oov_to_unk() {
        let f = write_file("fire 0.1 0.2\n");
        let vocab = fire_vocab();
        let table: EmbeddingTable<f32> = load_pretrained(f.path(), &vocab, 2, 3).unwrap();
        assert_eq!(table.lookup(&vocab, &seq(&["fire"])), vec![table.row(2)]);
        assert_eq!(
            table.lookup(&vocab, &seq(&["zzz-not-in-vocab"])),
            vec![table.row(UNK)]
        );
        assert!(table.lookup(&vocab, &seq(&[])).is_empty());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn pruning_is_frequency_monotone(
                words in prop::collection::vec(0u8..12, 1..80),
                coverage in 1.0f64..=100.0,
            ) {
                let corpus = [words.iter().map(|w| format!("w{w}")).collect::<TokenSequence>()];
                let full = Vocabulary::build(&corpus, 100.0).unwrap();
                let pruned = Vocabulary::build(&corpus, coverage).unwrap();
                prop_assert!(pruned.len() <= full.len());
                let min_kept = pruned.entries().map(|(_, c)| c).min().unwrap();
                for (tok, count) in full.entries() {
                    if pruned.index_of(tok).is_none() {
                        prop_assert!(count <= min_kept);
                    }
                }
                for i in 0..pruned.len() {
                    prop_assert_eq!(pruned.index_of(pruned.token(i).unwrap()), Some(i));
                }
            }
        }
    }
}
