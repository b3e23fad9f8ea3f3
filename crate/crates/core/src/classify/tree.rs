//! Classification trees grown with the prior-weighted Gini criterion.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::design::PriorModelProbabilities;
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::scalar::{argmax, Scalar};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub min_split: usize,
    pub min_leaf: usize,
    pub max_depth: usize,
    pub cp: f64,
    /// Class priors; `None` means equal priors.
    pub priors: Option<PriorModelProbabilities>,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self { min_split: 20, min_leaf: 7, max_depth: 30, cp: 0.01, priors: None }
    }
}

impl TreeConfig {
    /// Settings for forest members: grown out fully and never pruned.
    pub fn unpruned() -> Self {
        Self { min_split: 2, min_leaf: 1, max_depth: usize::MAX, cp: 0.0, priors: None }
    }

    pub fn with_priors(mut self, priors: PriorModelProbabilities) -> Self {
        self.priors = Some(priors);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_leaf < 1 {
            return Err(Error::Config("min_leaf must be >= 1".into()));
        }
        if self.min_split < 2 * self.min_leaf {
            return Err(Error::Config("min_split must be >= 2 * min_leaf".into()));
        }
        if !(self.cp >= 0.0) {
            return Err(Error::Config("cp must be >= 0".into()));
        }
        Ok(())
    }

    fn prior_vec(&self, k: usize) -> Result<Vec<f64>> {
        match &self.priors {
            Some(p) if p.k() != k => Err(Error::DimensionMismatch { expected: k, got: p.k() }),
            Some(p) => Ok(p.as_slice().to_vec()),
            None => Ok(vec![1.0 / k as f64; k]),
        }
    }
}

/// Gini impurity of the distribution proportional to `priors[m] * counts[m]`.
///
/// Pass counts already divided by the root class counts to get the
/// prior-reweighted proportions used during growth.
pub fn gini(counts: &[f64], priors: &[f64]) -> Result<f64> {
    if counts.len() != priors.len() {
        return Err(Error::DimensionMismatch { expected: priors.len(), got: counts.len() });
    }
    let w: Vec<f64> = counts.iter().zip(priors).map(|(&c, &p)| c * p).collect();
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(Error::UndefinedNode);
    }
    Ok(w.iter().map(|&x| x / total).map(|p| p * (1.0 - p)).sum())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum NodeKind<T> {
    /// Rows with `x[feature] < threshold` go left.
    Split { feature: usize, threshold: T, left: usize, right: usize },
    Leaf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node<T> {
    pub kind: NodeKind<T>,
    /// Training rows per class reaching the node, bootstrap duplicates included.
    pub counts: Vec<u32>,
    /// Prior-weighted class scores `pi_m N_m(node) / N_m(root)`.
    pub scores: Vec<f64>,
    pub label: usize,
    pub depth: usize,
}

impl<T> Node<T> {
    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf)
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let total: f64 = self.scores.iter().sum();
        if total > 0.0 {
            self.scores.iter().map(|&s| s / total).collect()
        } else {
            vec![1.0 / self.scores.len() as f64; self.scores.len()]
        }
    }

    /// Prior-weighted mass misclassified if this node were a leaf.
    fn risk(&self) -> f64 {
        self.scores.iter().sum::<f64>() - self.scores[self.label]
    }
}

/// Compact traversal record; leaves have `feature == LEAF`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Step<T> {
    feature: u32,
    left: u32,
    right: u32,
    threshold: T,
}

const LEAF: u32 = u32::MAX;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "TreeParts<T>", into = "TreeParts<T>")]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct Tree<T> {
    pub nodes: Vec<Node<T>>,
    pub k: usize,
    pub dim: usize,
    steps: Vec<Step<T>>,
}

#[derive(Clone, Serialize, Deserialize)]
struct TreeParts<T> {
    nodes: Vec<Node<T>>,
    k: usize,
    dim: usize,
}

impl<T: Scalar> From<TreeParts<T>> for Tree<T> {
    fn from(p: TreeParts<T>) -> Self {
        Tree::from_nodes(p.nodes, p.k, p.dim)
    }
}

impl<T: Scalar> From<Tree<T>> for TreeParts<T> {
    fn from(t: Tree<T>) -> Self {
        TreeParts { nodes: t.nodes, k: t.k, dim: t.dim }
    }
}

impl<T: Scalar> Tree<T> {
    pub fn from_nodes(nodes: Vec<Node<T>>, k: usize, dim: usize) -> Self {
        let steps = nodes
            .iter()
            .map(|n| match &n.kind {
                NodeKind::Leaf => Step { feature: LEAF, left: 0, right: 0, threshold: T::zero() },
                NodeKind::Split { feature, threshold, left, right } => {
                    Step { feature: *feature as u32, left: *left as u32, right: *right as u32, threshold: *threshold }
                }
            })
            .collect();
        Tree { nodes, k, dim, steps }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).map(|n| n.depth).max().unwrap_or(0)
    }

    pub fn leaf(&self, x: &[T]) -> &Node<T> {
        let mut i = 0usize;
        loop {
            let s = self.steps[i];
            if s.feature == LEAF {
                return &self.nodes[i];
            }
            i = if x[s.feature as usize] < s.threshold { s.left } else { s.right } as usize;
        }
    }

    pub fn predict_label(&self, x: &[T]) -> Result<usize> {
        self.check_dim(x)?;
        Ok(self.leaf(x).label)
    }

    pub fn predict(&self, x: &[T]) -> Result<(usize, Vec<f64>)> {
        self.check_dim(x)?;
        let leaf = self.leaf(x);
        Ok((leaf.label, leaf.probabilities()))
    }

    fn check_dim(&self, x: &[T]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(())
    }

    /// One node per line, children indented below their parent.
    pub fn to_text(&self, model_names: Option<&[String]>) -> String {
        let mut out = String::new();
        let mut stack = vec![(0usize, 0usize, String::new())];
        while let Some((i, indent, prefix)) = stack.pop() {
            let node = &self.nodes[i];
            let pad = "  ".repeat(indent);
            match &node.kind {
                NodeKind::Split { feature, threshold, left, right } => {
                    let _ = writeln!(out, "{pad}{prefix}feature f{} < {}", feature + 1, threshold);
                    stack.push((*right, indent + 1, "else: ".into()));
                    stack.push((*left, indent + 1, String::new()));
                }
                NodeKind::Leaf => {
                    let name = model_names
                        .and_then(|n| n.get(node.label).cloned())
                        .unwrap_or_else(|| format!("model {}", node.label + 1));
                    let _ = writeln!(out, "{pad}{prefix}leaf -> {name} {:?}", node.counts);
                }
            }
        }
        out
    }
}

/// Column-major features plus one sort order per feature, shared by every tree grown on the same data.
pub(crate) struct Prepared<'a, T> {
    pub data: &'a LabeledDataset<T>,
    pub columns: Vec<Vec<T>>,
    pub order: Vec<Vec<u32>>,
}

impl<'a, T: Scalar> Prepared<'a, T> {
    pub fn new(data: &'a LabeledDataset<T>) -> Self {
        let columns = data.columns();
        let order = columns
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..col.len() as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].partial_cmp(&col[b as usize]).expect("finite features"));
                idx
            })
            .collect();
        Self { data, columns, order }
    }
}

pub(crate) struct Grower<'p, 'a, T> {
    prep: &'p Prepared<'a, T>,
    cfg: &'p TreeConfig,
    mtry: usize,
    k: usize,
    class_weight: Vec<f64>,
    sample_row: Vec<u32>,
    sample_class: Vec<u16>,
    orders: Vec<Vec<u32>>,
    goes_left: Vec<bool>,
    buf: Vec<u32>,
}

impl<'p, 'a, T: Scalar> Grower<'p, 'a, T> {
    /// `multiplicity[row]` copies of each row enter the sample (all ones for a plain tree).
    pub fn new(prep: &'p Prepared<'a, T>, cfg: &'p TreeConfig, multiplicity: &[u16], mtry: usize) -> Result<Self> {
        let data = prep.data;
        let k = data.k();
        let priors = cfg.prior_vec(k)?;
        let mut first = Vec::with_capacity(data.len());
        let mut sample_row = Vec::new();
        let mut sample_class = Vec::new();
        let mut root_counts = vec![0usize; k];
        for (row, &m) in multiplicity.iter().enumerate() {
            first.push(sample_row.len() as u32);
            let label = data.label(row);
            for _ in 0..m {
                sample_row.push(row as u32);
                sample_class.push(label as u16);
            }
            root_counts[label] += m as usize;
        }
        if sample_row.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let class_weight =
            root_counts.iter().zip(&priors).map(|(&n, &p)| if n > 0 { p / n as f64 } else { 0.0 }).collect();
        let orders = prep
            .order
            .iter()
            .map(|ord| {
                let mut o = Vec::with_capacity(sample_row.len());
                for &row in ord {
                    let f = first[row as usize];
                    o.extend(f..f + multiplicity[row as usize] as u32);
                }
                o
            })
            .collect();
        let n = sample_row.len();
        Ok(Self {
            prep,
            cfg,
            mtry: mtry.clamp(1, data.dim().max(1)),
            k,
            class_weight,
            sample_row,
            sample_class,
            orders,
            goes_left: vec![false; n],
            buf: Vec::with_capacity(n),
        })
    }

    fn value(&self, feature: usize, sample: u32) -> T {
        self.prep.columns[feature][self.sample_row[sample as usize] as usize]
    }

    fn node_stats(&self, lo: usize, hi: usize) -> (Vec<u32>, Vec<f64>) {
        let mut counts = vec![0u32; self.k];
        for &s in &self.orders[0][lo..hi] {
            counts[self.sample_class[s as usize] as usize] += 1;
        }
        let scores = counts.iter().zip(&self.class_weight).map(|(&c, &w)| c as f64 * w).collect();
        (counts, scores)
    }

    /// Best split of one feature within `[lo, hi)` as (score, position of last left sample, threshold).
    fn best_split_on(&self, f: usize, lo: usize, hi: usize, total: &[f64]) -> Option<(f64, usize, T)> {
        let ord = &self.orders[f][lo..hi];
        let n = ord.len();
        let min_leaf = self.cfg.min_leaf;
        let total_sum: f64 = total.iter().sum();
        let mut left = vec![0.0; self.k];
        let mut left_sum = 0.0;
        let mut best: Option<(f64, usize, T)> = None;
        let mut v = self.value(f, ord[0]);
        for i in 0..n - 1 {
            let c = self.sample_class[ord[i] as usize] as usize;
            let w = self.class_weight[c];
            left[c] += w;
            left_sum += w;
            let nl = i + 1;
            let v_next = self.value(f, ord[i + 1]);
            if n - nl < min_leaf {
                break;
            }
            if nl >= min_leaf && v_next > v {
                let right_sum = total_sum - left_sum;
                let mut score = 0.0;
                if left_sum > 0.0 {
                    score += left.iter().map(|&x| x * x).sum::<f64>() / left_sum;
                }
                if right_sum > 0.0 {
                    score += left.iter().zip(total).map(|(&l, &t)| (t - l) * (t - l)).sum::<f64>() / right_sum;
                }
                if best.as_ref().map_or(true, |b| score > b.0 * (1.0 + 1e-12)) {
                    let half = T::from_f64_lossy(0.5);
                    let mut thr = (v + v_next) * half;
                    if !(thr > v) {
                        thr = v_next;
                    }
                    best = Some((score, i, thr));
                }
            }
            v = v_next;
        }
        best
    }

    pub fn grow<R: Rng + ?Sized>(mut self, rng: &mut R) -> Tree<T> {
        let dim = self.prep.data.dim();
        let n = self.sample_row.len();
        let (counts, scores) = self.node_stats(0, n);
        let label = argmax(&scores);
        let mut nodes = vec![Node { kind: NodeKind::Leaf, counts, scores, label, depth: 0 }];
        let mut stack = vec![(0usize, 0usize, n)];
        let mut features: Vec<usize> = (0..dim).collect();
        while let Some((id, lo, hi)) = stack.pop() {
            let depth = nodes[id].depth;
            let pure = nodes[id].counts.iter().filter(|&&c| c > 0).count() <= 1;
            if pure || hi - lo < self.cfg.min_split || depth >= self.cfg.max_depth || dim == 0 {
                continue;
            }
            let total = nodes[id].scores.clone();
            let mut best: Option<(f64, usize, usize, T)> = None;
            let mut tried = 0;
            if self.mtry < dim {
                features.shuffle(rng);
            }
            for &f in &features {
                if tried >= self.mtry {
                    break;
                }
                let ord = &self.orders[f][lo..hi];
                if self.value(f, ord[0]) == self.value(f, ord[ord.len() - 1]) {
                    continue;
                }
                tried += 1;
                if let Some((score, pos, thr)) = self.best_split_on(f, lo, hi, &total) {
                    let better = match &best {
                        None => true,
                        Some(b) if score > b.0 * (1.0 + 1e-12) => true,
                        Some(b) if score >= b.0 * (1.0 - 1e-12) => f < b.1,
                        _ => false,
                    };
                    if better {
                        best = Some((score, f, pos, thr));
                    }
                }
            }
            let Some((_, feature, pos, threshold)) = best else { continue };
            let mid = lo + pos + 1;
            for (i, &s) in self.orders[feature][lo..hi].iter().enumerate() {
                self.goes_left[s as usize] = i <= pos;
            }
            for f in 0..dim {
                if f == feature {
                    continue;
                }
                self.buf.clear();
                let seg = &mut self.orders[f][lo..hi];
                self.buf.extend(seg.iter().copied().filter(|&s| self.goes_left[s as usize]));
                self.buf.extend(seg.iter().copied().filter(|&s| !self.goes_left[s as usize]));
                seg.copy_from_slice(&self.buf);
            }
            let left = nodes.len();
            for (a, b) in [(lo, mid), (mid, hi)] {
                let (counts, scores) = self.node_stats(a, b);
                let label = argmax(&scores);
                nodes.push(Node { kind: NodeKind::Leaf, counts, scores, label, depth: depth + 1 });
            }
            nodes[id].kind = NodeKind::Split { feature, threshold, left, right: left + 1 };
            stack.push((left + 1, mid, hi));
            stack.push((left, lo, mid));
        }
        Tree::from_nodes(nodes, self.k, dim)
    }
}

/// Grows a single tree on every row of `data` and prunes it at `cfg.cp`.
pub fn grow_tree<T: Scalar>(data: &LabeledDataset<T>, cfg: &TreeConfig) -> Result<Tree<T>> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let prep = Prepared::new(data);
    let ones = vec![1u16; data.len()];
    let grower = Grower::new(&prep, cfg, &ones, data.dim())?;
    // All features are searched, so the generator is never consulted.
    let tree = grower.grow(&mut RngStream::new(0).rng());
    Ok(prune_tree(&tree, cfg.cp))
}

/// Weakest-link cost-complexity pruning.
///
/// An internal node's cost per removed leaf is its misclassification risk
/// as a leaf minus its subtree's risk, divided by (leaves - 1) and by the
/// root risk. The cheapest subtree is collapsed while that cost is below `cp`.
pub fn prune_tree<T: Scalar>(tree: &Tree<T>, cp: f64) -> Tree<T> {
    if cp <= 0.0 {
        return tree.clone();
    }
    let mut nodes = tree.nodes.clone();
    let root_risk = nodes[0].risk();
    loop {
        let n = nodes.len();
        let mut leaves = vec![0usize; n];
        let mut subtree_risk = vec![0.0; n];
        let mut reachable = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            reachable[i] = true;
            order.push(i);
            if let NodeKind::Split { left, right, .. } = nodes[i].kind {
                stack.push(left);
                stack.push(right);
            }
        }
        for &i in order.iter().rev() {
            match nodes[i].kind {
                NodeKind::Leaf => {
                    leaves[i] = 1;
                    subtree_risk[i] = nodes[i].risk();
                }
                NodeKind::Split { left, right, .. } => {
                    leaves[i] = leaves[left] + leaves[right];
                    subtree_risk[i] = subtree_risk[left] + subtree_risk[right];
                }
            }
        }
        let mut weakest: Option<(f64, usize)> = None;
        for i in 0..n {
            if !reachable[i] || nodes[i].is_leaf() {
                continue;
            }
            let gain = (nodes[i].risk() - subtree_risk[i]).max(0.0);
            let g = if root_risk > 0.0 { gain / ((leaves[i] - 1) as f64 * root_risk) } else { 0.0 };
            if weakest.map_or(true, |(best, _)| g < best) {
                weakest = Some((g, i));
            }
        }
        match weakest {
            Some((g, i)) if g < cp => nodes[i].kind = NodeKind::Leaf,
            _ => break,
        }
    }
    compact(nodes, tree.k, tree.dim)
}

fn compact<T: Scalar>(nodes: Vec<Node<T>>, k: usize, dim: usize) -> Tree<T> {
    let mut out: Vec<Node<T>> = Vec::new();
    let mut queue = vec![(0usize, None::<(usize, bool)>)];
    while let Some((old, parent)) = queue.pop() {
        let new = out.len();
        let mut node = nodes[old].clone();
        if let Some((p, is_left)) = parent {
            if let NodeKind::Split { left, right, .. } = &mut out[p].kind {
                if is_left {
                    *left = new;
                } else {
                    *right = new;
                }
            }
        }
        if let NodeKind::Split { left, right, .. } = node.kind {
            queue.push((right, Some((new, false))));
            queue.push((left, Some((new, true))));
            node.kind = match node.kind {
                NodeKind::Split { feature, threshold, .. } => {
                    NodeKind::Split { feature, threshold, left: usize::MAX, right: usize::MAX }
                }
                NodeKind::Leaf => unreachable!(),
            };
        }
        out.push(node);
    }
    Tree::from_nodes(out, k, dim)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(k: usize, rows: &[(usize, f64)]) -> LabeledDataset<f64> {
        LabeledDataset::from_parts(k, 1, rows.iter().map(|r| r.0).collect(), rows.iter().map(|r| r.1).collect())
            .unwrap()
    }

    #[test]
    fn gini_hand_values() {
        assert_eq!(gini(&[5.0, 0.0], &[0.5, 0.5]).unwrap(), 0.0);
        assert!((gini(&[3.0, 1.0], &[0.5, 0.5]).unwrap() - 0.375).abs() < 1e-15);
        assert!((gini(&[1.0; 4], &[0.25; 4]).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(gini(&[0.0, 0.0], &[0.5, 0.5]), Err(Error::UndefinedNode));
    }

    #[test]
    fn gini_scale_invariant() {
        let a = gini(&[3.0, 7.0, 2.0], &[0.2, 0.3, 0.5]).unwrap();
        let b = gini(&[30.0, 70.0, 20.0], &[0.2, 0.3, 0.5]).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn single_class_gives_root_only_tree() {
        let d = ds(2, &(0..50).map(|i| (0, i as f64)).collect::<Vec<_>>());
        let t = grow_tree(&d, &TreeConfig::default()).unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert!((0..50).all(|i| t.predict_label(&[i as f64]).unwrap() == 0));
    }

    #[test]
    fn separable_needs_one_split() {
        let rows: Vec<_> = (0..100).map(|i| (if i < 50 { 0 } else { 1 }, i as f64 - 49.5)).collect();
        let t = grow_tree(&ds(2, &rows), &TreeConfig::default()).unwrap();
        assert_eq!(t.depth(), 1);
        for &(l, x) in &rows {
            assert_eq!(t.predict_label(&[x]).unwrap(), l);
        }
        match t.nodes[0].kind {
            NodeKind::Split { threshold, .. } => assert_eq!(threshold, 0.0),
            _ => panic!("expected a split"),
        }
    }

    #[test]
    fn leaf_rule_uses_root_fractions() {
        // 100 rows of class 1 and 10 of class 2 at x = 0; the leaf at x = 1 holds (2, 2).
        let mut rows = vec![(0, 0.0); 98];
        rows.extend(vec![(1, 0.0); 8]);
        rows.extend([(0, 1.0), (0, 1.0), (1, 1.0), (1, 1.0)]);
        let cfg = TreeConfig { min_split: 2, min_leaf: 1, cp: 0.0, ..TreeConfig::default() };
        let t = grow_tree(&ds(2, &rows), &cfg).unwrap();
        let leaf = t.leaf(&[1.0]);
        assert_eq!(leaf.counts, vec![2, 2]);
        assert!((leaf.scores[0] - 0.5 * 0.02).abs() < 1e-15);
        assert!((leaf.scores[1] - 0.5 * 0.2).abs() < 1e-15);
        assert_eq!(leaf.label, 1);
    }

    #[test]
    fn leaf_probabilities_normalised() {
        let mut rows = vec![(0, 0.0); 3];
        rows.push((1, 0.0));
        rows.extend(vec![(1, 1.0); 3]);
        rows.push((0, 1.0));
        let cfg = TreeConfig { min_split: 2, min_leaf: 1, cp: 0.0, ..TreeConfig::default() };
        let t = grow_tree(&ds(2, &rows), &cfg).unwrap();
        let (label, p) = t.predict(&[0.0]).unwrap();
        assert_eq!(label, 0);
        assert!((p[0] - 0.75).abs() < 1e-12 && (p[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn prune_extremes() {
        let rows: Vec<_> = (0..200).map(|i| ((i * 7 + i / 3) % 2, (i % 37) as f64)).collect();
        let cfg = TreeConfig { min_split: 2, min_leaf: 1, cp: 0.0, ..TreeConfig::default() };
        let t = grow_tree(&ds(2, &rows), &cfg).unwrap();
        assert!(t.n_leaves() > 1);
        assert_eq!(prune_tree(&t, 0.0), t);
        assert_eq!(prune_tree(&t, f64::INFINITY).nodes.len(), 1);
    }

    #[test]
    fn dimension_checked() {
        let t = grow_tree(&ds(2, &[(0, 0.0), (1, 1.0)]), &TreeConfig::default()).unwrap();
        assert!(t.predict(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn text_export() {
        let rows: Vec<_> = (0..40).map(|i| (if i < 20 { 0 } else { 1 }, i as f64)).collect();
        let t = grow_tree(&ds(2, &rows), &TreeConfig::default()).unwrap();
        let txt = t.to_text(None);
        assert!(txt.starts_with("feature f1 < 19.5\n"));
        assert!(txt.contains("leaf -> model 2 [0, 20]"));
    }

    #[test]
    fn config_validation() {
        assert!(TreeConfig { min_leaf: 0, ..TreeConfig::default() }.validate().is_err());
        assert!(TreeConfig { min_split: 5, min_leaf: 3, ..TreeConfig::default() }.validate().is_err());
        assert!(TreeConfig { cp: -1.0, ..TreeConfig::default() }.validate().is_err());
    }
}
