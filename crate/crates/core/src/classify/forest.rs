//! Random forest of axis-aligned Gini trees for binary targets.
//!
//! # Model file layout
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic        [u8; 4]  "EGRF"
//! version      u32      1
//! feature_dim  u32
//! n_trees      u32
//! seed         u64
//! sample_count u64
//! per tree:
//!   n_nodes    u32
//!   per node (node 0 is the root):
//!     feature    i32   split feature index, -1 for a leaf
//!     threshold  f64   go left when x[feature] <= threshold
//!     left       u32   child node index (0 for leaves)
//!     right      u32   child node index (0 for leaves)
//!     count_neg  u32   training samples of the negative class reaching the node
//!     count_pos  u32   training samples of the positive class reaching the node
//! ```

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"EGRF";
const VERSION: u32 = 1;

/// Sort key giving every sample a position that does not depend on the order
/// the caller supplied it in: (subject, frame, slot).
pub type SampleKey = (String, usize, u8);

/// Feature rows with binary labels.
#[derive(Clone, Debug, Default)]
pub struct TrainingSet {
    rows: Vec<Vec<f64>>,
    labels: Vec<bool>,
    keys: Vec<SampleKey>,
}

impl TrainingSet {
    pub fn push(&mut self, row: Vec<f64>, label: bool, key: SampleKey) {
        self.rows.push(row);
        self.labels.push(label);
        self.keys.push(key);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    /// Indices in canonical order: by key, then by feature bits, then label.
    fn canonical_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.rows.len()).collect();
        idx.sort_by(|&a, &b| {
            self.keys[a]
                .cmp(&self.keys[b])
                .then_with(|| {
                    let ra = self.rows[a].iter().map(|v| v.to_bits());
                    let rb = self.rows[b].iter().map(|v| v.to_bits());
                    ra.cmp(rb)
                })
                .then_with(|| self.labels[a].cmp(&self.labels[b]))
        });
        idx
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Node {
    /// Split feature, or `None` for a leaf.
    pub feature: Option<u32>,
    pub threshold: f64,
    pub left: u32,
    pub right: u32,
    /// Bootstrap samples reaching this node: `[negative, positive]`.
    pub counts: [u32; 2],
}

impl Node {
    pub fn leaf(negative: u32, positive: u32) -> Self {
        Self {
            feature: None,
            threshold: 0.0,
            left: 0,
            right: 0,
            counts: [negative, positive],
        }
    }

    pub fn split(feature: u32, threshold: f64, left: u32, right: u32, counts: [u32; 2]) -> Self {
        Self {
            feature: Some(feature),
            threshold,
            left,
            right,
            counts,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

impl DecisionTree {
    /// Builds a tree from a flattened node array, checking that child links
    /// stay in range and split features are below `feature_dim`.
    pub fn from_nodes(nodes: Vec<Node>, feature_dim: usize) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::ModelFormat("tree has no nodes".into()));
        }
        for (i, n) in nodes.iter().enumerate() {
            if let Some(f) = n.feature {
                if f as usize >= feature_dim {
                    return Err(Error::ModelFormat(format!("node {i} splits on feature {f} >= {feature_dim}")));
                }
                let ok = |c: u32| (c as usize) > i && (c as usize) < nodes.len();
                if !ok(n.left) || !ok(n.right) {
                    return Err(Error::ModelFormat(format!("node {i} has an invalid child")));
                }
            }
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// The tree's vote: positive iff the reached leaf has strictly more
    /// positive than negative samples.
    pub fn vote(&self, x: &[f64]) -> bool {
        let mut i = 0usize;
        loop {
            let n = &self.nodes[i];
            match n.feature {
                None => return n.counts[1] > n.counts[0],
                Some(f) => {
                    i = if x[f as usize] <= n.threshold {
                        n.left as usize
                    } else {
                        n.right as usize
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i].feature {
                None => 0,
                Some(_) => 1 + walk(nodes, nodes[i].left as usize).max(walk(nodes, nodes[i].right as usize)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[inline]
fn gini(neg: f64, pos: f64) -> f64 {
    let n = neg + pos;
    if n == 0.0 {
        return 0.0;
    }
    let p = pos / n;
    2.0 * p * (1.0 - p)
}

struct TreeParams {
    min_split: usize,
    max_depth: Option<usize>,
    max_features: usize,
}

/// Best threshold on one feature: (weighted child impurity, threshold).
fn best_split_on(rows: &[Vec<f64>], labels: &[bool], samples: &[usize], f: usize, buf: &mut Vec<(f64, bool)>) -> Option<(f64, f64)> {
    buf.clear();
    buf.extend(samples.iter().map(|&i| (rows[i][f], labels[i])));
    buf.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = buf.len() as f64;
    let total_pos = buf.iter().filter(|s| s.1).count() as f64;
    let total_neg = n - total_pos;
    let (mut lneg, mut lpos) = (0.0, 0.0);
    let mut best: Option<(f64, f64)> = None;
    for i in 0..buf.len() - 1 {
        if buf[i].1 {
            lpos += 1.0;
        } else {
            lneg += 1.0;
        }
        let (a, b) = (buf[i].0, buf[i + 1].0);
        if a == b {
            continue;
        }
        let nl = lneg + lpos;
        let nr = n - nl;
        let impurity = (nl * gini(lneg, lpos) + nr * gini(total_neg - lneg, total_pos - lpos)) / n;
        if best.is_none_or(|(bi, _)| impurity < bi) {
            let mut thr = a + (b - a) / 2.0;
            if thr >= b {
                thr = a;
            }
            best = Some((impurity, thr));
        }
    }
    best
}

fn grow_tree(rows: &[Vec<f64>], labels: &[bool], boot: Vec<usize>, params: &TreeParams, rng: &mut ChaCha8Rng) -> Vec<Node> {
    let dim = rows[0].len();
    let mut nodes: Vec<Node> = Vec::new();
    let mut features: Vec<usize> = (0..dim).collect();
    let mut buf = Vec::new();
    // (node slot, samples, depth)
    let mut stack = vec![(0usize, boot, 0usize)];
    nodes.push(Node::leaf(0, 0));
    while let Some((slot, samples, depth)) = stack.pop() {
        let pos = samples.iter().filter(|&&i| labels[i]).count() as u32;
        let neg = samples.len() as u32 - pos;
        nodes[slot] = Node::leaf(neg, pos);
        let pure = pos == 0 || neg == 0;
        if pure || samples.len() < params.min_split || params.max_depth.is_some_and(|d| depth >= d) {
            continue;
        }
        let parent = gini(neg as f64, pos as f64);
        features.shuffle(rng);
        let mut best: Option<(f64, usize, f64)> = None;
        for (k, &f) in features.iter().enumerate() {
            // keep looking past max_features only until some split helps
            if k >= params.max_features && best.is_some() {
                break;
            }
            if let Some((imp, thr)) = best_split_on(rows, labels, &samples, f, &mut buf) {
                if parent - imp > 1e-12 && best.is_none_or(|(bi, _, _)| imp < bi) {
                    best = Some((imp, f, thr));
                }
            }
        }
        let Some((_, f, thr)) = best else {
            continue;
        };
        let (left, right): (Vec<usize>, Vec<usize>) = samples.iter().partition(|&&i| rows[i][f] <= thr);
        let l = nodes.len();
        nodes.push(Node::leaf(0, 0));
        nodes.push(Node::leaf(0, 0));
        nodes[slot] = Node::split(f as u32, thr, l as u32, l as u32 + 1, [neg, pos]);
        stack.push((l + 1, right, depth + 1));
        stack.push((l, left, depth + 1));
    }
    nodes
}

/// A trained ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct ForestModel {
    trees: Vec<DecisionTree>,
    feature_dim: usize,
    seed: u64,
    sample_count: u64,
}

impl ForestModel {
    /// Assembles a model from existing trees.
    pub fn from_trees(trees: Vec<DecisionTree>, feature_dim: usize, seed: u64, sample_count: u64) -> Result<Self> {
        for t in &trees {
            DecisionTree::from_nodes(t.nodes.clone(), feature_dim)?;
        }
        Ok(Self {
            trees,
            feature_dim,
            seed,
            sample_count,
        })
    }

    /// A model with no trees; any prediction fails with [`Error::Untrained`].
    pub fn untrained(feature_dim: usize) -> Self {
        Self {
            trees: Vec::new(),
            feature_dim,
            seed: 0,
            sample_count: 0,
        }
    }

    /// Bagged Gini trees. Tree `t` draws its bootstrap from a ChaCha stream
    /// keyed by `(seed, t)` over the canonically ordered samples, so the
    /// result depends neither on thread scheduling nor on input order.
    pub fn fit(set: &TrainingSet, cfg: &PipelineConfig, seed: u64) -> Result<Self> {
        if set.len() < 2 {
            return Err(Error::InsufficientData(format!("need at least 2 samples, got {}", set.len())));
        }
        let dim = set.rows[0].len();
        if dim == 0 {
            return Err(Error::InsufficientData("samples have no features".into()));
        }
        if let Some(r) = set.rows.iter().find(|r| r.len() != dim) {
            return Err(Error::dims(dim, r.len()));
        }
        if !set.labels.iter().any(|&l| l) {
            return Err(Error::InsufficientData("no samples of the positive class".into()));
        }
        if set.labels.iter().all(|&l| l) {
            return Err(Error::InsufficientData("no samples of the negative class".into()));
        }
        let order = set.canonical_order();
        let params = TreeParams {
            min_split: cfg.tree_min_samples_split,
            max_depth: cfg.tree_max_depth,
            max_features: cfg
                .tree_max_features
                .unwrap_or_else(|| ((dim as f64).sqrt().floor() as usize).max(1))
                .min(dim),
        };
        let n = order.len();
        let trees = (0..cfg.forest_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(t as u64);
                let boot: Vec<usize> = (0..n).map(|_| order[rng.gen_range(0..n)]).collect();
                DecisionTree {
                    nodes: grow_tree(&set.rows, &set.labels, boot, &params, &mut rng),
                }
            })
            .collect();
        Ok(Self {
            trees,
            feature_dim: dim,
            seed,
            sample_count: n as u64,
        })
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn sample_count(&self) -> u64 {
        self.sample_count
    }

    /// Number of trees voting positive.
    pub fn positive_votes(&self, x: &[f64]) -> Result<usize> {
        if self.trees.is_empty() {
            return Err(Error::Untrained);
        }
        if x.len() != self.feature_dim {
            return Err(Error::dims(self.feature_dim, x.len()));
        }
        Ok(self.trees.iter().filter(|t| t.vote(x)).count())
    }

    /// Majority vote and the fraction of trees voting positive. An exact
    /// tie resolves to negative.
    pub fn predict(&self, x: &[f64]) -> Result<(bool, f64)> {
        let votes = self.positive_votes(x)?;
        let n = self.trees.len();
        Ok((2 * votes > n, votes as f64 / n as f64))
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.feature_dim as u32).to_le_bytes())?;
        w.write_all(&(self.trees.len() as u32).to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&self.sample_count.to_le_bytes())?;
        for t in &self.trees {
            w.write_all(&(t.nodes.len() as u32).to_le_bytes())?;
            for n in &t.nodes {
                let f = n.feature.map_or(-1i32, |f| f as i32);
                w.write_all(&f.to_le_bytes())?;
                w.write_all(&n.threshold.to_le_bytes())?;
                w.write_all(&n.left.to_le_bytes())?;
                w.write_all(&n.right.to_le_bytes())?;
                w.write_all(&n.counts[0].to_le_bytes())?;
                w.write_all(&n.counts[1].to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let mut cur = Cursor { bytes: &bytes, pos: 0 };
        if cur.take(4)? != MAGIC {
            return Err(Error::ModelFormat("bad magic, not a forest model".into()));
        }
        let version = cur.u32()?;
        if version != VERSION {
            return Err(Error::ModelFormat(format!("unsupported version {version}")));
        }
        let feature_dim = cur.u32()? as usize;
        let n_trees = cur.u32()? as usize;
        let seed = cur.u64()?;
        let sample_count = cur.u64()?;
        let mut trees = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            let n_nodes = cur.u32()? as usize;
            let mut nodes = Vec::with_capacity(n_nodes.min(1 << 20));
            for _ in 0..n_nodes {
                let f = cur.i32()?;
                let threshold = cur.f64()?;
                let left = cur.u32()?;
                let right = cur.u32()?;
                let counts = [cur.u32()?, cur.u32()?];
                nodes.push(if f < 0 {
                    Node::leaf(counts[0], counts[1])
                } else {
                    Node::split(f as u32, threshold, left, right, counts)
                });
            }
            trees.push(DecisionTree::from_nodes(nodes, feature_dim)?);
        }
        if cur.pos != bytes.len() {
            return Err(Error::ModelFormat("trailing bytes after last tree".into()));
        }
        Ok(Self {
            trees,
            feature_dim,
            seed,
            sample_count,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::fs::File::open(path)?)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::ModelFormat("unexpected end of file".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn i32(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
