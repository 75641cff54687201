use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{Point2D, PointSet, Square};
use crate::{Error, Result};

pub type NodeId = usize;

/// How points were distributed when the tree was built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TreeMode {
    /// `N = 4^p`, depth `p - p0`, every leaf holds exactly `4^p0` points.
    Grid,
    /// Arbitrary points bucketed into a fixed-depth tree; empty nodes pruned.
    General,
}

/// One square `t^l_{alpha,beta}` of the quadtree.
///
/// Output accumulation for the targets of a node lives in the caller's
/// tree-ordered output vector at `range`.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub level: u32,
    pub square: Square,
    /// Integer cell indices `(alpha, beta)` at this level (x, y).
    pub cell: (u32, u32),
    /// Contiguous positions in the tree-ordered point set.
    pub range: Range<usize>,
    /// Children in counter-clockwise order from the lower-left quadrant.
    pub children: [Option<NodeId>; 4],
}

impl TreeNode {
    pub fn len(&self) -> usize {
        self.range.len()
    }

    pub fn is_empty(&self) -> bool {
        self.range.is_empty()
    }

    pub fn is_leaf(&self) -> bool {
        self.children.iter().all(Option::is_none)
    }

    pub fn child_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.children.iter().flatten().copied()
    }
}

/// Classification of a same-level node pair on the integer grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PairClass {
    /// Same cell.
    S,
    /// Cells share an edge.
    E,
    /// Cells touch at a vertex only.
    V,
    /// Separated by at least one cell.
    LR,
}

/// Diameter of a node, taken as the diagonal of its square.
pub fn diam(t: &TreeNode) -> f64 {
    t.square.diagonal()
}

/// Distance between the centers of two nodes.
pub fn dist(t1: &TreeNode, t2: &TreeNode) -> f64 {
    t1.square.center().distance(t2.square.center())
}

/// `max(diam(t1), diam(t2)) <= eta * dist(t1, t2)`; equality is admissible.
pub fn is_admissible(t1: &TreeNode, t2: &TreeNode, eta: f64) -> bool {
    let d = dist(t1, t2);
    d > 0.0 && diam(t1).max(diam(t2)) <= eta * d
}

/// S/E/V/LR classification from the cells' grid coordinates (same level).
pub fn classify_pair(t1: &TreeNode, t2: &TreeNode) -> PairClass {
    debug_assert_eq!(t1.level, t2.level, "classify_pair needs same-level nodes");
    let da = t1.cell.0.abs_diff(t2.cell.0);
    let db = t1.cell.1.abs_diff(t2.cell.1);
    match (da, db) {
        (0, 0) => PairClass::S,
        (0, 1) | (1, 0) => PairClass::E,
        (1, 1) => PairClass::V,
        _ => PairClass::LR,
    }
}

/// Quadtree over a square domain. Points are stored permuted into tree order;
/// `perm[k]` is the original index of the point at tree position `k`.
#[derive(Debug, Clone)]
pub struct QuadTree {
    nodes: Vec<TreeNode>,
    depth: u32,
    domain: Square,
    points: PointSet,
    perm: Vec<usize>,
    mode: TreeMode,
}

impl QuadTree {
    /// Grid-mode build: `N = 4^p` points, leaves of `4^p0` points at depth `p - p0`
/// (`p = p0` gives a single leaf).
    pub fn build(ps: &PointSet, domain: Square, p0: u32) -> Result<Self> {
        let n = ps.len();
        let p = exact_log4(n).ok_or_else(|| {
            Error::Config(format!("grid mode needs N = 4^p points, got N = {n}"))
        })?;
        if p < p0 {
            return Err(Error::Config(format!(
                "grid mode needs p >= p0, got p = {p}, p0 = {p0}"
            )));
        }
        let depth = p - p0;
        let tree = Self::assemble(ps, domain, depth, TreeMode::Grid)?;
        let leaf_size = 1usize << (2 * p0);
        let unbalanced = tree
            .nodes
            .iter()
            .any(|t| t.level == depth && t.len() != leaf_size)
            || tree.nodes.len() != (4usize.pow(depth + 1) - 1) / 3;
        if unbalanced {
            return Err(Error::Config(format!(
                "grid mode needs {leaf_size} points in every leaf cell; use general mode for arbitrary points"
            )));
        }
        Ok(tree)
    }

    /// General-mode build: arbitrary points bucketed into a tree of fixed `depth`.
    pub fn build_general(ps: &PointSet, domain: Square, depth: u32) -> Result<Self> {
        Self::assemble(ps, domain, depth, TreeMode::General)
    }

    fn assemble(ps: &PointSet, domain: Square, depth: u32, mode: TreeMode) -> Result<Self> {
        if !(domain.side > 0.0 && domain.side.is_finite()) {
            return Err(Error::Config("domain side must be positive".into()));
        }
        if depth > 15 {
            return Err(Error::Config(format!("tree depth {depth} is too large")));
        }
        let n1 = 1u32 << depth;
        let mut keyed = Vec::with_capacity(ps.len());
        for (i, &pt) in ps.points().iter().enumerate() {
            if !domain.contains(pt) {
                return Err(Error::Config(format!(
                    "point {i} at ({}, {}) lies outside the domain",
                    pt.x, pt.y
                )));
            }
            let ix = cell_index(pt.x, domain.origin.x, domain.side, n1);
            let iy = cell_index(pt.y, domain.origin.y, domain.side, n1);
            keyed.push((path_key(ix, iy, depth), i));
        }
        keyed.sort_by_key(|&(k, _)| k);
        let keys: Vec<u64> = keyed.iter().map(|&(k, _)| k).collect();
        let perm: Vec<usize> = keyed.iter().map(|&(_, i)| i).collect();

        let mut tree = Self {
            nodes: Vec::new(),
            depth,
            domain,
            points: ps.permuted(&perm),
            perm,
            mode,
        };
        tree.nodes.push(TreeNode {
            level: 0,
            square: domain,
            cell: (0, 0),
            range: 0..keys.len(),
            children: [None; 4],
        });
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let (level, range, cell, square) = {
                let t = &tree.nodes[id];
                (t.level, t.range.clone(), t.cell, t.square)
            };
            if level == depth {
                continue;
            }
            let shift = 2 * (depth - level - 1);
            let half = square.side * 0.5;
            let mut start = range.start;
            for digit in 0..4u64 {
                let end = start + keys[start..range.end].partition_point(|&k| (k >> shift) & 3 == digit);
                if end > start || mode == TreeMode::Grid {
                    let (dx, dy) = quadrant_offset(digit);
                    let child = TreeNode {
                        level: level + 1,
                        square: Square::new(
                            Point2D::new(
                                square.origin.x + dx as f64 * half,
                                square.origin.y + dy as f64 * half,
                            ),
                            half,
                        ),
                        cell: (2 * cell.0 + dx, 2 * cell.1 + dy),
                        range: start..end,
                        children: [None; 4],
                    };
                    let cid = tree.nodes.len();
                    tree.nodes.push(child);
                    tree.nodes[id].children[digit as usize] = Some(cid);
                    stack.push(cid);
                }
                start = end;
            }
        }
        Ok(tree)
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn node(&self, id: NodeId) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn domain(&self) -> Square {
        self.domain
    }

    pub fn domain_size(&self) -> f64 {
        self.domain.side
    }

    pub fn mode(&self) -> TreeMode {
        self.mode
    }

    /// Points in tree order.
    pub fn points(&self) -> &PointSet {
        &self.points
    }

    /// `perm[k]` = original index of tree position `k`.
    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn leaves(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.iter().filter(|t| t.is_leaf())
    }

    /// Gather a vector given in original order into tree order.
    pub fn to_tree_order<T: Copy>(&self, v: &[T]) -> Vec<T> {
        self.perm.iter().map(|&i| v[i]).collect()
    }

    /// Scatter a tree-ordered vector back into original order.
    pub fn to_original_order<T: Copy + Default>(&self, v: &[T]) -> Vec<T> {
        let mut out = vec![T::default(); v.len()];
        for (k, &i) in self.perm.iter().enumerate() {
            out[i] = v[k];
        }
        out
    }
}

fn exact_log4(n: usize) -> Option<u32> {
    if n == 0 || !n.is_power_of_two() || !n.trailing_zeros().is_multiple_of(2) {
        return None;
    }
    Some(n.trailing_zeros() / 2)
}

fn cell_index(v: f64, origin: f64, side: f64, n1: u32) -> u32 {
    let c = ((v - origin) / side * n1 as f64).floor();
    (c.max(0.0) as u32).min(n1 - 1)
}

/// Child digit for quadrant bits: 0 lower-left, 1 lower-right, 2 upper-right, 3 upper-left.
fn quadrant_digit(bx: u32, by: u32) -> u64 {
    match (bx, by) {
        (0, 0) => 0,
        (1, 0) => 1,
        (1, 1) => 2,
        _ => 3,
    }
}

fn quadrant_offset(digit: u64) -> (u32, u32) {
    match digit {
        0 => (0, 0),
        1 => (1, 0),
        2 => (1, 1),
        _ => (0, 1),
    }
}

/// Concatenated child digits from the root down to the finest cell.
fn path_key(ix: u32, iy: u32, depth: u32) -> u64 {
    (0..depth).fold(0u64, |key, lvl| {
        let b = depth - 1 - lvl;
        (key << 2) | quadrant_digit((ix >> b) & 1, (iy >> b) & 1)
    })
}
