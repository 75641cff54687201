//! Hierarchical kernel summation over target and source quadtrees.
//!
//! A traversal is planned once: starting from the root pair, a pair whose
//! nodes are both small is evaluated directly, an admissible pair is
//! compressed, and any other pair is split into its 4 x 4 child pairs (target
//! child outer, source child inner). The resulting task list is executed in
//! parallel batches; every task writes into a private buffer and buffers are
//! added to the output in task order, so the result does not depend on the
//! thread count.

mod census;

use std::ops::Range;

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use census::{block_census, CensusTable, LevelCounts};

use crate::compress::{compress_block_with, BlockView, CompressedBlock, Estimator, IndexSampler, SampleBudget};
use crate::geometry::{classify_pair, is_admissible, random_path_sample, NodeId, PairClass, PointSet, QuadTree};
use crate::kernels::Kernel;
use crate::rng::{derive_stream, BlockId};
use crate::{Error, Result, Scalar};

/// Parameters of one hierarchical product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraversalConfig {
    pub eta: f64,
    pub budget: SampleBudget,
    pub p0: u32,
    /// Pairs whose larger node holds at most this many points are evaluated directly.
    pub direct_threshold: usize,
    pub estimator: Estimator,
}

impl TraversalConfig {
    /// `c = r = k`, direct evaluation below `4^p0` points.
    pub fn new(eta: f64, k: usize, epsilon: f64, p0: u32) -> Self {
        Self {
            eta,
            budget: SampleBudget::square(k, epsilon),
            p0,
            direct_threshold: 4usize.pow(p0),
            estimator: Estimator::default(),
        }
    }

    /// Evaluate every block directly.
    pub fn without_compression(mut self) -> Self {
        self.direct_threshold = usize::MAX;
        self
    }

    pub fn with_estimator(mut self, estimator: Estimator) -> Self {
        self.estimator = estimator;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!("eta must be positive, got {}", self.eta)));
        }
        self.budget.validate()
    }
}

/// The operand pair of a product: one shared point set or two trees.
#[derive(Debug, Clone, Copy)]
pub enum Interaction<'a> {
    /// Targets and sources are the same points; `i == j` terms are excluded.
    SelfInteraction(&'a QuadTree),
    Cross {
        targets: &'a QuadTree,
        sources: &'a QuadTree,
    },
}

impl<'a> Interaction<'a> {
    pub fn targets(&self) -> &'a QuadTree {
        match *self {
            Interaction::SelfInteraction(t) => t,
            Interaction::Cross { targets, .. } => targets,
        }
    }

    pub fn sources(&self) -> &'a QuadTree {
        match *self {
            Interaction::SelfInteraction(t) => t,
            Interaction::Cross { sources, .. } => sources,
        }
    }

    pub fn is_self(&self) -> bool {
        matches!(self, Interaction::SelfInteraction(_))
    }
}

/// Class of a visited node pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BlockClass {
    S,
    E,
    V,
    /// Admissible.
    LR,
    /// Neither admissible nor adjacent (only for small `eta` or cross trees).
    Near,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Exec {
    Direct,
    LowRank,
}

/// One executed block of the traversal.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTask {
    pub target: NodeId,
    pub source: NodeId,
    pub level: u32,
    pub class: BlockClass,
    pub exec: Exec,
}

/// Executed tasks in canonical order plus counts of every visited pair.
#[derive(Debug, Clone)]
pub struct Plan {
    pub tasks: Vec<BlockTask>,
    pub visits: Vec<LevelCounts>,
}

impl Plan {
    pub fn census(&self, p: u32, p0: u32) -> CensusTable {
        CensusTable::from_visits(p, p0, &self.visits)
    }

    pub fn count(&self, exec: Exec) -> usize {
        self.tasks.iter().filter(|t| t.exec == exec).count()
    }
}

/// Plan the traversal for `interaction` under `cfg`.
pub fn plan(interaction: Interaction<'_>, cfg: &TraversalConfig) -> Result<Plan> {
    cfg.validate()?;
    let mut out = Plan {
        tasks: Vec::new(),
        visits: Vec::new(),
    };
    let (tt, ts) = (interaction.targets(), interaction.sources());
    visit(interaction, cfg, tt.root(), ts.root(), 0, &mut out);
    Ok(out)
}

fn visit(interaction: Interaction<'_>, cfg: &TraversalConfig, t: NodeId, s: NodeId, level: u32, out: &mut Plan) {
    let (tt, ts) = (interaction.targets(), interaction.sources());
    let (tn, sn) = (tt.node(t), ts.node(s));
    if tn.is_empty() || sn.is_empty() {
        return;
    }
    let admissible = is_admissible(tn, sn, cfg.eta);
    let class = if admissible {
        BlockClass::LR
    } else if interaction.is_self() {
        match classify_pair(tn, sn) {
            PairClass::S => BlockClass::S,
            PairClass::E => BlockClass::E,
            PairClass::V => BlockClass::V,
            PairClass::LR => BlockClass::Near,
        }
    } else {
        BlockClass::Near
    };
    if out.visits.len() <= level as usize {
        out.visits.push(LevelCounts {
            level,
            ..Default::default()
        });
    }
    out.visits[level as usize].add(class);

    let small = tn.len().max(sn.len()) <= cfg.direct_threshold;
    let exec = if small {
        Some(Exec::Direct)
    } else if admissible {
        Some(Exec::LowRank)
    } else if tn.is_leaf() || sn.is_leaf() {
        Some(Exec::Direct)
    } else {
        None
    };
    match exec {
        Some(exec) => out.tasks.push(BlockTask {
            target: t,
            source: s,
            level,
            class,
            exec,
        }),
        None => {
            for tc in tn.child_ids() {
                for sc in sn.child_ids() {
                    visit(interaction, cfg, tc, sc, level + 1, out);
                }
            }
        }
    }
}

/// Draws block-local indices by random paths down the target and source subtrees.
struct TreePathSampler<'a> {
    targets: &'a QuadTree,
    target: NodeId,
    sources: &'a QuadTree,
    source: NodeId,
}

impl IndexSampler for TreePathSampler<'_> {
    fn sample_rows<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Vec<usize>> {
        let start = self.targets.node(self.target).range.start;
        let idx = random_path_sample(self.targets, self.target, count, rng)?;
        Ok(idx.into_iter().map(|k| k - start).collect())
    }
    fn sample_cols<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Vec<usize>> {
        let start = self.sources.node(self.source).range.start;
        let idx = random_path_sample(self.sources, self.source, count, rng)?;
        Ok(idx.into_iter().map(|k| k - start).collect())
    }
}

/// Counters from one execution.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecStats {
    pub direct_blocks: usize,
    pub low_rank_blocks: usize,
    /// Low-rank tasks whose compression failed and were evaluated directly.
    pub fallbacks: usize,
    /// Sum of retained ranks over compressed blocks.
    pub total_rank: usize,
}

/// Buffer elements a single execution batch may hold.
const BATCH_ELEMENTS: usize = 1 << 22;

struct Context<'a, K: Kernel> {
    interaction: Interaction<'a>,
    kernel: &'a K,
    cfg: &'a TraversalConfig,
    seed: u64,
    /// Source densities in source-tree order.
    densities: &'a [f64],
}

impl<'a, K: Kernel> Context<'a, K> {
    fn ranges(&self, task: &BlockTask) -> (Range<usize>, Range<usize>) {
        let tr = self.interaction.targets().node(task.target).range.clone();
        let sr = self.interaction.sources().node(task.source).range.clone();
        (tr, sr)
    }

    fn view(&self, task: &BlockTask) -> BlockView<'a, K> {
        let (tr, sr) = self.ranges(task);
        let tp = &self.interaction.targets().points().points()[tr.clone()];
        let sp = &self.interaction.sources().points().points()[sr.clone()];
        let view = BlockView::new(self.kernel, tp, sp, &self.densities[sr.clone()]);
        if self.interaction.is_self() {
            view.excluding_self_pairs(tr.start, sr.start)
        } else {
            view
        }
    }

    fn compress(&self, task: &BlockTask) -> Result<CompressedBlock<K::Scalar>> {
        let tt = self.interaction.targets();
        let ts = self.interaction.sources();
        let id = BlockId::new(task.level, tt.node(task.target).cell, ts.node(task.source).cell);
        let mut rng = derive_stream(self.seed, &id);
        let sampler = TreePathSampler {
            targets: tt,
            target: task.target,
            sources: ts,
            source: task.source,
        };
        compress_block_with(&self.view(task), &self.cfg.budget, self.cfg.estimator, &sampler, &mut rng)
    }

    /// Contribution of one task; `factors` overrides on-the-fly compression.
    fn run(
        &self,
        task: &BlockTask,
        factors: Option<&Option<CompressedBlock<K::Scalar>>>,
        x: &[K::Scalar],
    ) -> (Vec<K::Scalar>, ExecStats) {
        let (tr, sr) = self.ranges(task);
        let mut buf = vec![nalgebra::zero::<K::Scalar>(); tr.len()];
        let mut stats = ExecStats::default();
        let xs = &x[sr];
        let owned;
        let block = match (task.exec, factors) {
            (Exec::Direct, _) => None,
            (Exec::LowRank, Some(cached)) => cached.as_ref(),
            (Exec::LowRank, None) => {
                owned = self.compress(task).ok();
                owned.as_ref()
            }
        };
        match block {
            Some(block) => {
                block.apply_into(xs, &mut buf);
                stats.low_rank_blocks = 1;
                stats.total_rank = block.rank();
            }
            None => {
                self.view(task).apply_exact_into(xs, &mut buf);
                stats.direct_blocks = 1;
                stats.fallbacks = usize::from(task.exec == Exec::LowRank);
            }
        }
        (buf, stats)
    }

    /// Execute `tasks`, returning the tree-ordered output.
    fn execute(
        &self,
        tasks: &[BlockTask],
        factors: Option<&[Option<CompressedBlock<K::Scalar>>]>,
        x: &[K::Scalar],
    ) -> (Vec<K::Scalar>, ExecStats) {
        let n_t = self.interaction.targets().points().len();
        let mut y = vec![nalgebra::zero::<K::Scalar>(); n_t];
        let mut stats = ExecStats::default();
        for batch in batches(tasks, |t| self.ranges(t).0.len()) {
            let results: Vec<_> = batch
                .clone()
                .into_par_iter()
                .map(|k| self.run(&tasks[k], factors.map(|f| &f[k]), x))
                .collect();
            for (k, (buf, s)) in batch.zip(results) {
                let tr = self.ranges(&tasks[k]).0;
                for (yi, bi) in y[tr].iter_mut().zip(buf) {
                    *yi += bi;
                }
                stats.direct_blocks += s.direct_blocks;
                stats.low_rank_blocks += s.low_rank_blocks;
                stats.fallbacks += s.fallbacks;
                stats.total_rank += s.total_rank;
            }
        }
        (y, stats)
    }
}

/// Split `0..tasks.len()` into consecutive ranges holding at most
/// [`BATCH_ELEMENTS`] output elements (at least one task each).
fn batches<T>(tasks: &[T], size: impl Fn(&T) -> usize) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut held = 0;
    for (k, t) in tasks.iter().enumerate() {
        let s = size(t);
        if k > start && held + s > BATCH_ELEMENTS {
            out.push(start..k);
            start = k;
            held = 0;
        }
        held += s;
    }
    if start < tasks.len() {
        out.push(start..tasks.len());
    }
    out
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension { expected, got });
    }
    Ok(())
}

/// `y = A x` by hierarchical traversal; `x` and `y` are in original point order.
///
/// Every admissible block is compressed, applied and dropped; nothing is
/// retained between calls.
pub fn hmatrix_product<K: Kernel>(
    interaction: Interaction<'_>,
    kernel: &K,
    x: &[K::Scalar],
    cfg: &TraversalConfig,
    seed: u64,
) -> Result<Vec<K::Scalar>> {
    hmatrix_product_with_stats(interaction, kernel, x, cfg, seed).map(|(y, _)| y)
}

/// [`hmatrix_product`] also returning execution counters.
pub fn hmatrix_product_with_stats<K: Kernel>(
    interaction: Interaction<'_>,
    kernel: &K,
    x: &[K::Scalar],
    cfg: &TraversalConfig,
    seed: u64,
) -> Result<(Vec<K::Scalar>, ExecStats)> {
    let sources = interaction.sources();
    check_len(sources.points().len(), x.len())?;
    let plan = plan(interaction, cfg)?;
    let ctx = Context {
        interaction,
        kernel,
        cfg,
        seed,
        densities: sources.points().densities(),
    };
    let x_tree = sources.to_tree_order(x);
    let (y_tree, stats) = ctx.execute(&plan.tasks, None, &x_tree);
    Ok((interaction.targets().to_original_order(&y_tree), stats))
}

/// Assembled hierarchical operator whose compressed blocks are kept, so that
/// repeated applications reuse the same factors.
pub struct HMatrix<'a, K: Kernel> {
    interaction: Interaction<'a>,
    kernel: &'a K,
    cfg: TraversalConfig,
    plan: Plan,
    factors: Vec<Option<CompressedBlock<K::Scalar>>>,
}

impl<'a, K: Kernel> HMatrix<'a, K> {
    pub fn assemble(interaction: Interaction<'a>, kernel: &'a K, cfg: &TraversalConfig, seed: u64) -> Result<Self> {
        let plan = plan(interaction, cfg)?;
        let ctx = Context {
            interaction,
            kernel,
            cfg,
            seed,
            densities: interaction.sources().points().densities(),
        };
        let factors = plan
            .tasks
            .par_iter()
            .map(|task| match task.exec {
                Exec::LowRank => ctx.compress(task).ok(),
                Exec::Direct => None,
            })
            .collect();
        Ok(Self {
            interaction,
            kernel,
            cfg: *cfg,
            plan,
            factors,
        })
    }

    pub fn plan(&self) -> &Plan {
        &self.plan
    }

    /// Total number of stored factor entries.
    pub fn stored_entries(&self) -> usize {
        self.factors
            .iter()
            .flatten()
            .map(|b| b.rank() * (b.rows() + b.cols()))
            .sum()
    }

    pub fn apply(&self, x: &[K::Scalar]) -> Result<Vec<K::Scalar>> {
        self.apply_with_stats(x).map(|(y, _)| y)
    }

    pub fn apply_with_stats(&self, x: &[K::Scalar]) -> Result<(Vec<K::Scalar>, ExecStats)> {
        let sources = self.interaction.sources();
        check_len(sources.points().len(), x.len())?;
        let ctx = Context {
            interaction: self.interaction,
            kernel: self.kernel,
            cfg: &self.cfg,
            seed: 0,
            densities: sources.points().densities(),
        };
        let x_tree = sources.to_tree_order(x);
        let (y_tree, stats) = ctx.execute(&self.plan.tasks, Some(&self.factors), &x_tree);
        Ok((self.interaction.targets().to_original_order(&y_tree), stats))
    }
}

/// Exact `E_i = sum_j K(t_i, s_j) q_j x_j`, in the given point order.
///
/// With `exclude_self`, targets and sources must be the same set and the
/// `i == j` terms are skipped.
pub fn direct_summation<K: Kernel>(
    kernel: &K,
    targets: &PointSet,
    sources: &PointSet,
    x: &[K::Scalar],
    exclude_self: bool,
) -> Result<Vec<K::Scalar>> {
    check_len(sources.len(), x.len())?;
    if exclude_self {
        check_len(targets.len(), sources.len())?;
    }
    let view = BlockView::new(kernel, targets.points(), sources.points(), sources.densities());
    let view = if exclude_self {
        view.excluding_self_pairs(0, 0)
    } else {
        view
    };
    Ok((0..targets.len())
        .into_par_iter()
        .map(|i| {
            let mut acc = nalgebra::zero::<K::Scalar>();
            for (j, &xj) in x.iter().enumerate() {
                acc += view.entry(i, j) * xj;
            }
            acc
        })
        .collect())
}

/// How often each (target, source) pair in tree order is covered by an
/// executed block; `i == j` is skipped in self interaction. Small `N` only.
pub fn pair_coverage(interaction: Interaction<'_>, plan: &Plan) -> Vec<Vec<u32>> {
    let (tt, ts) = (interaction.targets(), interaction.sources());
    let mut cover = vec![vec![0u32; ts.points().len()]; tt.points().len()];
    for task in &plan.tasks {
        for i in tt.node(task.target).range.clone() {
            for j in ts.node(task.source).range.clone() {
                if !(interaction.is_self() && i == j) {
                    cover[i][j] += 1;
                }
            }
        }
    }
    cover
}

/// Relative 2-norm distance `|a - b| / |b|`.
pub fn relative_error<S: Scalar>(a: &[S], b: &[S]) -> f64 {
    let a = DVector::from_column_slice(a);
    let b = DVector::from_column_slice(b);
    (a - &b).norm() / b.norm()
}

#[cfg(test)]
mod tests;
