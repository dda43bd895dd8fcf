//! Time-ordered interval slicing and stratified train/dev/test splits.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const DEFAULT_FRACTIONS: SplitFractions = SplitFractions {
    train: 0.7,
    dev: 0.1,
    test: 0.2,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitFractions {
    pub train: f64,
    pub dev: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        DEFAULT_FRACTIONS
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.dev, self.test];
        if parts.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::Config(format!(
                "split fractions out of range: {parts:?}"
            )));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split fractions must sum to 1: {parts:?}"
            )));
        }
        Ok(())
    }

    fn as_array(&self) -> [f64; 3] {
        [self.train, self.dev, self.test]
    }
}

/// Slot order used when a record cannot be split proportionally.
const PRIORITY: [usize; 3] = [TRAIN, TEST, DEV];
const TRAIN: usize = 0;
const DEV: usize = 1;
const TEST: usize = 2;

/// Sorts by `key` and cuts into consecutive chunks of `size` (the last one
/// may be shorter).
pub fn slice_intervals<T, K: Ord>(
    mut data: Vec<T>,
    size: usize,
    key: impl Fn(&T) -> K,
) -> Result<Vec<Vec<T>>> {
    if size == 0 {
        return Err(Error::Config("interval size must be at least 1".into()));
    }
    data.sort_by_key(|a| key(a));
    let mut out = Vec::with_capacity(data.len().div_ceil(size));
    let mut it = data.into_iter().peekable();
    while it.peek().is_some() {
        out.push(it.by_ref().take(size).collect());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSplit<T> {
    pub index: usize,
    pub train: Vec<T>,
    pub dev: Vec<T>,
    pub test: Vec<T>,
}

impl<T> IntervalSplit<T> {
    pub fn len(&self) -> usize {
        self.train.len() + self.dev.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Stratified random split of one interval.
///
/// Subset sizes are the largest-remainder rounding of the fractions, and
/// every class gets the floor or ceiling of its proportional share in each
/// subset. Classes too small to split proportionally send their first record
/// to train, the next to test, then dev. Records keep their interval order
/// inside each subset.
pub fn split_interval<T: Clone>(
    index: usize,
    interval: &[T],
    class_of: impl Fn(&T) -> usize,
    fractions: SplitFractions,
    seed: u64,
) -> Result<IntervalSplit<T>> {
    fractions.validate()?;
    let classes = interval.iter().map(&class_of).max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, item) in interval.iter().enumerate() {
        members[class_of(item)].push(i);
    }
    let sizes: Vec<usize> = members.iter().map(Vec::len).collect();
    let alloc = allocate(&sizes, fractions);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut slot_of = vec![TRAIN; interval.len()];
    for (class, idx) in members.iter_mut().enumerate() {
        idx.shuffle(&mut rng);
        let [n_train, n_dev, _] = alloc[class];
        for (rank, &i) in idx.iter().enumerate() {
            slot_of[i] = if rank < n_train {
                TRAIN
            } else if rank < n_train + n_dev {
                DEV
            } else {
                TEST
            };
        }
    }
    let mut split = IntervalSplit {
        index,
        train: Vec::new(),
        dev: Vec::new(),
        test: Vec::new(),
    };
    for (item, slot) in interval.iter().zip(slot_of) {
        match slot {
            TRAIN => split.train.push(item.clone()),
            DEV => split.dev.push(item.clone()),
            _ => split.test.push(item.clone()),
        }
    }
    Ok(split)
}

/// Per-class `[train, dev, test]` counts for classes of the given sizes.
pub fn allocate(class_sizes: &[usize], fractions: SplitFractions) -> Vec<[usize; 3]> {
    let frac = fractions.as_array();
    let total: usize = class_sizes.iter().sum();
    let totals = largest_remainder(total, &frac);

    let mut alloc: Vec<[usize; 3]> = Vec::with_capacity(class_sizes.len());
    let mut leftover: Vec<usize> = Vec::with_capacity(class_sizes.len());
    // (class, slot) pairs that may take one extra record, with preference
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (class, &n) in class_sizes.iter().enumerate() {
        let mut floors = [0usize; 3];
        let mut fracs = [0f64; 3];
        for s in 0..3 {
            let exact = n as f64 * frac[s];
            let fl = (exact + 1e-9).floor();
            floors[s] = fl as usize;
            fracs[s] = (exact - fl).max(0.0);
        }
        let rest = n - floors.iter().sum::<usize>();
        let small = n < 3;
        let mut preferred = [false; 3];
        if small {
            for (rank, &slot) in PRIORITY.iter().enumerate() {
                if rank < n && floors[slot] == 0 {
                    preferred[slot] = true;
                }
            }
        }
        for s in PRIORITY {
            if fracs[s] > 1e-9 || (small && rest > 0) {
                let weight = if preferred[s] { 2.0 } else { fracs[s] };
                candidates.push((weight, class, s));
            }
        }
        alloc.push(floors);
        leftover.push(rest);
    }

    let mut deficit = [0usize; 3];
    for s in 0..3 {
        let have: usize = alloc.iter().map(|a| a[s]).sum();
        deficit[s] = totals[s].saturating_sub(have);
    }

    candidates.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap()
            .then(a.1.cmp(&b.1))
            .then(slot_rank(a.2).cmp(&slot_rank(b.2)))
    });
    let mut used = vec![[false; 3]; class_sizes.len()];
    let mut allowed = vec![[false; 3]; class_sizes.len()];
    for &(_, c, s) in &candidates {
        allowed[c][s] = true;
    }
    for &(_, c, s) in &candidates {
        if leftover[c] > 0 && deficit[s] > 0 && !used[c][s] {
            used[c][s] = true;
            leftover[c] -= 1;
            deficit[s] -= 1;
        }
    }

    // Rebalance with augmenting paths so every class places its leftovers
    // while each subset receives exactly its total.
    for c in 0..class_sizes.len() {
        while leftover[c] > 0 {
            if augment(c, &allowed, &mut used, &mut deficit) {
                leftover[c] -= 1;
            } else if let Some(s) = PRIORITY.into_iter().find(|&s| deficit[s] > 0) {
                alloc[c][s] += 1;
                deficit[s] -= 1;
                leftover[c] -= 1;
            } else {
                alloc[c][TRAIN] += 1;
                leftover[c] -= 1;
            }
        }
    }
    for (a, u) in alloc.iter_mut().zip(&used) {
        for s in 0..3 {
            if u[s] {
                a[s] += 1;
            }
        }
    }
    alloc
}

fn slot_rank(slot: usize) -> usize {
    PRIORITY.iter().position(|&s| s == slot).unwrap()
}

/// Breadth-first search for an alternating path from class `start` to a
/// subset that still needs records. On success the path is flipped: every
/// class along it moves its extra record one subset further.
fn augment(
    start: usize,
    allowed: &[[bool; 3]],
    used: &mut [[bool; 3]],
    deficit: &mut [usize; 3],
) -> bool {
    let n = allowed.len();
    let mut slot_parent: [Option<usize>; 3] = [None; 3];
    let mut class_parent: Vec<Option<usize>> = vec![None; n];
    let mut visited = vec![false; n];
    visited[start] = true;
    let mut queue = std::collections::VecDeque::from([start]);
    while let Some(c) = queue.pop_front() {
        for s in PRIORITY {
            if !allowed[c][s] || used[c][s] || slot_parent[s].is_some() {
                continue;
            }
            slot_parent[s] = Some(c);
            if deficit[s] > 0 {
                deficit[s] -= 1;
                let mut slot = s;
                loop {
                    let cls = slot_parent[slot].expect("slot on path has a parent");
                    used[cls][slot] = true;
                    match class_parent[cls] {
                        Some(given_up) => {
                            used[cls][given_up] = false;
                            slot = given_up;
                        }
                        None => return true,
                    }
                }
            }
            for other in 0..n {
                if !visited[other] && used[other][s] {
                    visited[other] = true;
                    class_parent[other] = Some(s);
                    queue.push_back(other);
                }
            }
        }
    }
    false
}

fn largest_remainder(total: usize, frac: &[f64; 3]) -> [usize; 3] {
    let mut out = [0usize; 3];
    let mut rems = [0f64; 3];
    for s in 0..3 {
        let exact = total as f64 * frac[s];
        let fl = (exact + 1e-9).floor();
        out[s] = fl as usize;
        rems[s] = exact - fl;
    }
    let mut missing = total.saturating_sub(out.iter().sum());
    let mut order = PRIORITY;
    order.sort_by(|&a, &b| rems[b].partial_cmp(&rems[a]).unwrap());
    for s in order {
        if missing == 0 {
            break;
        }
        out[s] += 1;
        missing -= 1;
    }
    out
}
