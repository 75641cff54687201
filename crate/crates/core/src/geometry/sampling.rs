use rand::Rng;

use super::{NodeId, QuadTree};
use crate::{Error, Result};

/// Draw `count` tree-order point positions from the subtree rooted at `node`,
/// i.i.d. with replacement.
///
/// Each draw walks a random path: at every level one child is picked, then a
/// point is picked uniformly inside the reached leaf. When the children hold
/// equal numbers of points (every grid-mode tree) the child is picked
/// uniformly; otherwise it is picked in proportion to its point count, so the
/// induced distribution over the node's points is uniform in both cases.
pub fn random_path_sample<R: Rng + ?Sized>(
    tree: &QuadTree,
    node: NodeId,
    count: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if count == 0 {
        return Err(Error::Config("random_path_sample needs count >= 1".into()));
    }
    if tree.node(node).is_empty() {
        return Err(Error::Config("cannot sample from an empty node".into()));
    }
    Ok((0..count).map(|_| draw_one(tree, node, rng)).collect())
}

fn draw_one<R: Rng + ?Sized>(tree: &QuadTree, mut id: NodeId, rng: &mut R) -> usize {
    loop {
        let t = tree.node(id);
        if t.is_leaf() {
            return rng.random_range(t.range.clone());
        }
        let mut kids = [0usize; 4];
        let mut n_kids = 0;
        for c in t.child_ids() {
            if !tree.node(c).is_empty() {
                kids[n_kids] = c;
                n_kids += 1;
            }
        }
        let kids = &kids[..n_kids];
        let first = tree.node(kids[0]).len();
        let balanced = kids.iter().all(|&c| tree.node(c).len() == first);
        id = if balanced {
            kids[rng.random_range(0..n_kids)]
        } else {
            let mut u = rng.random_range(0..t.len());
            let mut chosen = kids[n_kids - 1];
            for &c in kids {
                let len = tree.node(c).len();
                if u < len {
                    chosen = c;
                    break;
                }
                u -= len;
            }
            chosen
        };
    }
}
