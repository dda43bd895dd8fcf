//! Evaluation metrics and learning-curve files.

use std::cmp::Ordering;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::net::argmax;

/// Gold class and predicted class distribution for one example.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredExample {
    pub gold: usize,
    pub probs: Vec<f64>,
}

impl ScoredExample {
    pub fn predicted(&self) -> usize {
        argmax(&self.probs)
    }
}

/// ROC AUC as the Mann-Whitney statistic: the probability that a random
/// positive scores above a random negative, ties counting one half.
pub fn roc_auc(positive: &[bool], scores: &[f64]) -> Result<f64> {
    if positive.len() != scores.len() {
        return Err(Error::LengthMismatch {
            left: positive.len(),
            right: scores.len(),
        });
    }
    let n_pos = positive.iter().filter(|&&p| p).count() as u64;
    let n_neg = positive.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::AucUndefined);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));

    // Ranks are 1-based; tied groups share the average rank. Doubling keeps
    // everything integral.
    let mut doubled_rank_sum: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let doubled_rank = (i as u64 + 1) + j as u64;
        let group_pos = order[i..j].iter().filter(|&&k| positive[k]).count() as u64;
        doubled_rank_sum += doubled_rank * group_pos;
        i = j;
    }
    let doubled_u = doubled_rank_sum - n_pos * (n_pos + 1);
    Ok(doubled_u as f64 / (2 * n_pos * n_neg) as f64)
}

/// AUC over scored binary examples, using the probability of class 1.
pub fn roc_auc_scored(examples: &[ScoredExample]) -> Result<f64> {
    let positive: Vec<bool> = examples.iter().map(|e| e.gold == 1).collect();
    let scores: Vec<f64> = examples.iter().map(|e| e.probs[1]).collect();
    roc_auc(&positive, &scores)
}

/// Fraction of predictions equal to the gold label.
pub fn accuracy(gold: &[usize], predicted: &[usize]) -> Result<f64> {
    if gold.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            left: gold.len(),
            right: predicted.len(),
        });
    }
    if gold.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let correct = gold.iter().zip(predicted).filter(|(g, p)| g == p).count();
    Ok(correct as f64 / gold.len() as f64)
}

/// `K x K` counts, rows gold, columns predicted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_predictions(classes: usize, gold: &[usize], predicted: &[usize]) -> Result<Self> {
        if gold.len() != predicted.len() {
            return Err(Error::LengthMismatch {
                left: gold.len(),
                right: predicted.len(),
            });
        }
        let mut m = Self::new(classes);
        for (&g, &p) in gold.iter().zip(predicted) {
            if g >= classes || p >= classes {
                return Err(Error::Config(format!(
                    "class index {} out of range for {classes} classes",
                    g.max(p)
                )));
            }
            m.add(g, p);
        }
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Self {
        let classes = rows.len();
        let mut m = Self::new(classes);
        for (g, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), classes, "confusion matrix must be square");
            for (p, &c) in row.iter().enumerate() {
                m.counts[g * classes + p] = c;
            }
        }
        m
    }

    pub fn add(&mut self, gold: usize, predicted: usize) {
        self.counts[gold * self.classes + predicted] += 1;
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, gold: usize, predicted: usize) -> u64 {
        self.counts[gold * self.classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.classes).map(|k| self.get(k, k)).sum()
    }

    pub fn gold_count(&self, class: usize) -> u64 {
        (0..self.classes).map(|p| self.get(class, p)).sum()
    }

    pub fn predicted_count(&self, class: usize) -> u64 {
        (0..self.classes).map(|g| self.get(g, class)).sum()
    }

    /// Per-class F1. A class with no true positives scores 0, which also
    /// covers classes absent from both gold and predictions.
    pub fn f1(&self, class: usize) -> f64 {
        let tp = self.get(class, class);
        if tp == 0 {
            return 0.0;
        }
        2.0 * tp as f64 / (self.gold_count(class) + self.predicted_count(class)) as f64
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for g in 0..self.classes {
            let row: Vec<String> = (0..self.classes)
                .map(|p| self.get(g, p).to_string())
                .collect();
            writeln!(f, "{}", row.join("\t"))?;
        }
        Ok(())
    }
}

/// Unweighted mean of per-class F1 scores.
pub fn macro_f1(confusion: &ConfusionMatrix) -> f64 {
    let k = confusion.classes();
    if k == 0 {
        return 0.0;
    }
    (0..k).map(|c| confusion.f1(c)).sum::<f64>() / k as f64
}

/// Summary of a model on a labeled set.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub confusion: ConfusionMatrix,
    /// Present for binary tasks when both classes occur in the gold labels.
    pub auc: Option<f64>,
}

impl Evaluation {
    pub fn from_scored(classes: usize, examples: &[ScoredExample]) -> Result<Self> {
        let gold: Vec<usize> = examples.iter().map(|e| e.gold).collect();
        let predicted: Vec<usize> = examples.iter().map(ScoredExample::predicted).collect();
        let accuracy = accuracy(&gold, &predicted)?;
        let confusion = ConfusionMatrix::from_predictions(classes, &gold, &predicted)?;
        let auc = if classes == 2 {
            match roc_auc_scored(examples) {
                Ok(a) => Some(a),
                Err(Error::AucUndefined) => None,
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        Ok(Evaluation {
            accuracy,
            macro_f1: macro_f1(&confusion),
            confusion,
            auc,
        })
    }
}

/// One learning-curve point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub cum_train: usize,
    pub metric: f64,
}

pub const CURVE_HEADER: &str = "cum_train,metric";

pub fn render_curve(points: &[CurvePoint]) -> String {
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&format!("{},{:.6}\n", p.cum_train, p.metric));
    }
    out
}

/// Writes the curve CSV: header then one `cum_train,metric` row per point.
pub fn write_curve(points: &[CurvePoint], path: &Path) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(render_curve(points).as_bytes())
        .map_err(|e| Error::io(path, e))
}

pub fn read_curve(path: &Path) -> Result<Vec<CurvePoint>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_curve(&text).map_err(|(line, message)| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    })
}

fn parse_curve(text: &str) -> std::result::Result<Vec<CurvePoint>, (usize, String)> {
    let mut lines = text.lines();
    if lines.next() != Some(CURVE_HEADER) {
        return Err((1, format!("expected header `{CURVE_HEADER}`")));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let lineno = i + 2;
            let (a, b) = line
                .split_once(',')
                .ok_or_else(|| (lineno, "expected two fields".to_string()))?;
            Ok(CurvePoint {
                cum_train: a
                    .parse()
                    .map_err(|_| (lineno, format!("bad count `{a}`")))?,
                metric: b
                    .parse()
                    .map_err(|_| (lineno, format!("bad metric `{b}`")))?,
            })
        })
        .collect()
}
