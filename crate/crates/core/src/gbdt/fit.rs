use std::ops::{Add, Sub};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    bin_features, gradient_hessian, logistic_loss, logit_from_counts, GbdtError, GbdtModel,
    GbdtParams, Node, Tree,
};
use crate::features::FeatureMatrix;

/// Mean training loss at the prior (`train_loss[0]`) and after each tree.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FitTrace {
    pub train_loss: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Stats {
    g: f64,
    h: f64,
    count: u32,
}

impl Add for Stats {
    type Output = Stats;
    fn add(self, o: Stats) -> Stats {
        Stats {
            g: self.g + o.g,
            h: self.h + o.h,
            count: self.count + o.count,
        }
    }
}

impl Sub for Stats {
    type Output = Stats;
    fn sub(self, o: Stats) -> Stats {
        Stats {
            g: self.g - o.g,
            h: self.h - o.h,
            count: self.count - o.count,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct SplitCandidate {
    gain: f64,
    feature: usize,
    bin: u8,
}

/// Binned training columns plus a row-major list of every entry that
/// differs from its feature's most common ("default") bin. Histograms are
/// built from the row-major entries, so a leaf costs its number of
/// non-default entries rather than rows times features.
struct TrainingData {
    columns: Vec<Vec<u8>>,
    num_bins: Vec<usize>,
    default_bin: Vec<u8>,
    /// Start of each feature's bins in the flat histogram.
    offsets: Vec<usize>,
    row_ptr: Vec<usize>,
    entry_feature: Vec<u32>,
    entry_bin: Vec<u8>,
}

impl TrainingData {
    fn new(columns: Vec<Vec<u8>>, num_bins: Vec<usize>, n_rows: usize) -> Self {
        let default_bin: Vec<u8> = columns
            .iter()
            .zip(&num_bins)
            .map(|(col, &nb)| {
                let mut counts = vec![0usize; nb.max(1)];
                col.iter().for_each(|&b| counts[b as usize] += 1);
                // most frequent bin, lowest on ties
                (0..counts.len())
                    .max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a)))
                    .unwrap_or(0) as u8
            })
            .collect();
        let mut offsets = Vec::with_capacity(num_bins.len());
        let mut acc = 0;
        for &nb in &num_bins {
            offsets.push(acc);
            acc += nb;
        }
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut entry_feature = Vec::new();
        let mut entry_bin = Vec::new();
        row_ptr.push(0);
        for r in 0..n_rows {
            for (f, col) in columns.iter().enumerate() {
                if col[r] != default_bin[f] {
                    entry_feature.push(f as u32);
                    entry_bin.push(col[r]);
                }
            }
            row_ptr.push(entry_feature.len());
        }
        TrainingData {
            columns,
            num_bins,
            default_bin,
            offsets,
            row_ptr,
            entry_feature,
            entry_bin,
        }
    }
}

/// Reusable accumulation buffers of one tree builder.
struct Scratch {
    hist: Vec<Stats>,
    /// Touched bins per feature, one bit per bin.
    touched: Vec<[u64; 4]>,
    nondefault: Vec<Stats>,
}

impl Scratch {
    fn new(data: &TrainingData) -> Self {
        let total = data.num_bins.iter().sum();
        let nf = data.num_bins.len();
        Scratch {
            hist: vec![Stats::default(); total],
            touched: vec![[0; 4]; nf],
            nondefault: vec![Stats::default(); nf],
        }
    }
}

/// Non-empty bins of every splittable feature of one leaf, ascending,
/// feature after feature; `ranges[f]` is feature `f`'s slice.
struct Hist {
    entries: Vec<(u8, Stats)>,
    ranges: Vec<(usize, usize)>,
}

impl Hist {
    fn feature(&self, f: usize) -> &[(u8, Stats)] {
        &self.entries[self.ranges[f].0..self.ranges[f].1]
    }

    /// Histogram of the parent's rows minus `child`'s rows.
    fn minus(&self, child: &Hist) -> Hist {
        let mut entries = Vec::with_capacity(self.entries.len());
        let mut ranges = Vec::with_capacity(self.ranges.len());
        for f in 0..self.ranges.len() {
            let start = entries.len();
            let mut sub = child.feature(f).iter().peekable();
            for &(b, s) in self.feature(f) {
                let diff = match sub.peek() {
                    Some(&&(cb, cs)) if cb == b => {
                        sub.next();
                        s - cs
                    }
                    _ => s,
                };
                if diff.count > 0 {
                    entries.push((b, diff));
                }
            }
            ranges.push((start, entries.len()));
        }
        Hist { entries, ranges }
    }
}

struct LeafState {
    rows: Vec<u32>,
    total: Stats,
    node: usize,
    best: Option<SplitCandidate>,
    /// Kept while the leaf may still be split.
    hist: Option<Hist>,
}

struct TreeBuilder<'a> {
    data: &'a TrainingData,
    grad: &'a [f64],
    hess: &'a [f64],
    allowed: &'a [bool],
    params: &'a GbdtParams,
}

impl TreeBuilder<'_> {
    fn totals(&self, rows: &[u32]) -> Stats {
        rows.iter().fold(Stats::default(), |acc, &r| {
            acc + Stats {
                g: self.grad[r as usize],
                h: self.hess[r as usize],
                count: 1,
            }
        })
    }

    fn splittable(&self, feature: usize) -> bool {
        self.allowed[feature] && self.data.num_bins[feature] >= 2
    }

    /// Histogram of `rows` accumulated row by row, in row order.
    fn histogram(&self, rows: &[u32], total: Stats, scratch: &mut Scratch) -> Hist {
        let d = self.data;
        let Scratch {
            hist,
            touched,
            nondefault,
        } = scratch;
        for &r in rows {
            let s = Stats {
                g: self.grad[r as usize],
                h: self.hess[r as usize],
                count: 1,
            };
            for e in d.row_ptr[r as usize]..d.row_ptr[r as usize + 1] {
                let f = d.entry_feature[e] as usize;
                if !self.splittable(f) {
                    continue;
                }
                let b = d.entry_bin[e] as usize;
                let slot = &mut hist[d.offsets[f] + b];
                *slot = *slot + s;
                touched[f][b >> 6] |= 1 << (b & 63);
                nondefault[f] = nondefault[f] + s;
            }
        }
        let mut entries = Vec::new();
        let mut ranges = Vec::with_capacity(d.num_bins.len());
        for f in 0..d.num_bins.len() {
            let start = entries.len();
            if self.splittable(f) {
                let rest = total - std::mem::take(&mut nondefault[f]);
                if rest.count > 0 {
                    let b = d.default_bin[f] as usize;
                    hist[d.offsets[f] + b] = rest;
                    touched[f][b >> 6] |= 1 << (b & 63);
                }
                for (w, word) in touched[f].iter_mut().enumerate() {
                    let mut bits = std::mem::take(word);
                    while bits != 0 {
                        let b = w * 64 + bits.trailing_zeros() as usize;
                        bits &= bits - 1;
                        entries.push((b as u8, std::mem::take(&mut hist[d.offsets[f] + b])));
                    }
                }
            }
            ranges.push((start, entries.len()));
        }
        Hist { entries, ranges }
    }

    fn best_for_feature(
        &self,
        feature: usize,
        hist: &[(u8, Stats)],
        total: Stats,
    ) -> Option<SplitCandidate> {
        let lambda = self.params.lambda_l2;
        let min_leaf = self.params.min_data_in_leaf as u32;
        let parent = total.g * total.g / (total.h + lambda);
        let mut best: Option<SplitCandidate> = None;
        let mut best_gain = 0.0;
        let mut left = Stats::default();
        // empty bins repeat the previous candidate, so only non-empty ones are scanned
        for &(b, s) in &hist[..hist.len().saturating_sub(1)] {
            left = left + s;
            if left.count < min_leaf {
                continue;
            }
            let right = total - left;
            if right.count < min_leaf {
                break;
            }
            if left.h + lambda <= 0.0 || right.h + lambda <= 0.0 {
                continue;
            }
            let gain = 0.5
                * (left.g * left.g / (left.h + lambda) + right.g * right.g / (right.h + lambda)
                    - parent);
            if gain > best_gain {
                best_gain = gain;
                best = Some(SplitCandidate {
                    gain,
                    feature,
                    bin: b,
                });
            }
        }
        best
    }

    fn best_split(&self, hist: &Hist, total: Stats) -> Option<SplitCandidate> {
        if total.count < 2 * self.params.min_data_in_leaf as u32 {
            return None;
        }
        let per_feature = self.params.execution.map_range(hist.ranges.len(), |f| {
            self.best_for_feature(f, hist.feature(f), total)
        });
        // reduce in feature order; only a strictly larger gain replaces the incumbent
        per_feature
            .into_iter()
            .flatten()
            .fold(None, |best: Option<SplitCandidate>, c| match best {
                Some(b) if b.gain >= c.gain => Some(b),
                _ => Some(c),
            })
    }

    /// Grows one tree on `rows`; `None` when the root cannot be split.
    fn build(&self, rows: Vec<u32>, scratch: &mut Scratch) -> Option<Tree> {
        let total = self.totals(&rows);
        let hist = self.histogram(&rows, total, scratch);
        let best = self.best_split(&hist, total);
        best?;
        let mut nodes = vec![Node::Leaf { value: 0.0 }];
        let mut leaves = vec![LeafState {
            rows,
            total,
            node: 0,
            best,
            hist: Some(hist),
        }];
        while leaves.len() < self.params.max_leaves {
            let mut pick: Option<(usize, f64)> = None;
            for (i, l) in leaves.iter().enumerate() {
                if let Some(c) = l.best {
                    if pick.is_none_or(|(_, g)| c.gain > g) {
                        pick = Some((i, c.gain));
                    }
                }
            }
            let Some((idx, _)) = pick else { break };
            let split = leaves[idx].best.take().expect("picked leaf has a split");
            let col = &self.data.columns[split.feature];
            let (left_rows, right_rows): (Vec<u32>, Vec<u32>) = leaves[idx]
                .rows
                .iter()
                .partition(|&&r| col[r as usize] <= split.bin);
            let (ln, rn) = (nodes.len(), nodes.len() + 1);
            nodes.push(Node::Leaf { value: 0.0 });
            nodes.push(Node::Leaf { value: 0.0 });
            nodes[leaves[idx].node] = Node::Split {
                feature: split.feature,
                threshold_bin: split.bin,
                left: ln,
                right: rn,
            };

            let room = leaves.len() + 1 < self.params.max_leaves;
            let lt = self.totals(&left_rows);
            let rt = self.totals(&right_rows);
            let parent = leaves[idx]
                .hist
                .take()
                .expect("splittable leaf keeps its histogram");
            let (mut lh, mut rh) = (None, None);
            let (mut lb, mut rb) = (None, None);
            if room {
                // build the smaller child directly, derive the larger one
                let (small, large) = if left_rows.len() <= right_rows.len() {
                    let small = self.histogram(&left_rows, lt, scratch);
                    let large = parent.minus(&small);
                    (small, large)
                } else {
                    let small = self.histogram(&right_rows, rt, scratch);
                    let large = parent.minus(&small);
                    (large, small)
                };
                lb = self.best_split(&small, lt);
                rb = self.best_split(&large, rt);
                lh = lb.map(|_| small);
                rh = rb.map(|_| large);
            }
            leaves[idx] = LeafState {
                rows: left_rows,
                total: lt,
                node: ln,
                best: lb,
                hist: lh,
            };
            leaves.push(LeafState {
                rows: right_rows,
                total: rt,
                node: rn,
                best: rb,
                hist: rh,
            });
        }
        let lambda = self.params.lambda_l2;
        for l in &leaves {
            let denom = l.total.h + lambda;
            let value = if denom > 0.0 { -l.total.g / denom } else { 0.0 };
            nodes[l.node] = Node::Leaf { value };
        }
        Some(Tree { nodes })
    }
}

fn check_inputs(x: &FeatureMatrix, y: &[f64], params: &GbdtParams) -> Result<Vec<bool>, GbdtError> {
    params.validate()?;
    if x.n_rows() == 0 || y.is_empty() {
        return Err(GbdtError::EmptyTrainingSet);
    }
    if y.len() != x.n_rows() {
        return Err(GbdtError::LengthMismatch {
            rows: x.n_rows(),
            labels: y.len(),
        });
    }
    y.iter()
        .enumerate()
        .map(|(row, &v)| match v {
            0.0 => Ok(false),
            1.0 => Ok(true),
            value => Err(GbdtError::LabelOutOfRange { row, value }),
        })
        .collect()
}

fn mean_loss(scores: &[f64], y: &[bool]) -> f64 {
    scores
        .iter()
        .zip(y)
        .map(|(&f, &t)| logistic_loss(f, t))
        .sum::<f64>()
        / scores.len() as f64
}

/// Fits a booster on labels in `{0, 1}`.
pub fn fit_gbdt(x: &FeatureMatrix, y: &[f64], params: &GbdtParams) -> Result<GbdtModel, GbdtError> {
    fit_gbdt_traced(x, y, params).map(|(m, _)| m)
}

/// [`fit_gbdt`] that also reports the training loss after every round.
pub fn fit_gbdt_traced(
    x: &FeatureMatrix,
    y: &[f64],
    params: &GbdtParams,
) -> Result<(GbdtModel, FitTrace), GbdtError> {
    let labels = check_inputs(x, y, params)?;
    let n = x.n_rows();
    let (binned, mapper) = bin_features(x, params.max_bins);
    let num_bins = (0..mapper.n_features())
        .map(|f| mapper.num_bins(f))
        .collect();
    let data = TrainingData::new(binned.columns, num_bins, n);
    let mut scratch = Scratch::new(&data);
    let n_features = data.columns.len();

    let pos = labels.iter().filter(|&&t| t).count();
    let base_score = logit_from_counts(pos, n - pos);
    let mut scores = vec![base_score; n];
    let mut trace = FitTrace {
        train_loss: vec![mean_loss(&scores, &labels)],
    };
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut trees = Vec::new();

    for round in 0..params.num_trees {
        for i in 0..n {
            (grad[i], hess[i]) = gradient_hessian(scores[i], labels[i]);
        }
        let rows: Vec<u32> = if params.bagging_fraction < 1.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(
                params
                    .seed
                    .wrapping_mul(0x2545_f491_4f6c_dd1d)
                    .wrapping_add(round as u64),
            );
            let m = ((n as f64 * params.bagging_fraction).round() as usize).clamp(1, n);
            let mut s: Vec<u32> = index::sample(&mut rng, n, m)
                .into_iter()
                .map(|i| i as u32)
                .collect();
            s.sort_unstable();
            s
        } else {
            (0..n as u32).collect()
        };
        let mut allowed = vec![true; n_features];
        if params.feature_fraction < 1.0 && n_features > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(
                params.seed ^ 0x5851_f42d_4c95_7f2d ^ ((round as u64) << 32),
            );
            let m = ((n_features as f64 * params.feature_fraction).round() as usize)
                .clamp(1, n_features);
            allowed = vec![false; n_features];
            index::sample(&mut rng, n_features, m)
                .into_iter()
                .for_each(|f| allowed[f] = true);
        }
        let builder = TreeBuilder {
            data: &data,
            grad: &grad,
            hess: &hess,
            allowed: &allowed,
            params,
        };
        let Some(tree) = builder.build(rows, &mut scratch) else {
            break;
        };
        for (i, s) in scores.iter_mut().enumerate() {
            *s += params.learning_rate * tree.score(|f| data.columns[f][i]);
        }
        trace.train_loss.push(mean_loss(&scores, &labels));
        trees.push(tree);
    }
    Ok((
        GbdtModel {
            base_score,
            learning_rate: params.learning_rate,
            trees,
            bin_mapper: mapper,
        },
        trace,
    ))
}
