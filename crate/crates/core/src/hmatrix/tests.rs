use super::*;
use crate::geometry::{Point2D, Square};
use crate::kernels::{Helmholtz, ScreenedCoulomb, Smoothness};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn domain() -> Square {
    Square::new(Point2D::new(0.0, 0.0), 8.0)
}

fn grid_tree(p: u32, p0: u32, seed: u64) -> QuadTree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ps = PointSet::jittered_grid(p, domain(), &mut rng)
        .unwrap()
        .with_random_densities(&mut rng);
    QuadTree::build(&ps, domain(), p0).unwrap()
}

#[derive(Clone, Copy)]
struct Constant;
impl Kernel for Constant {
    type Scalar = f64;
    fn eval_unchecked(&self, _: Point2D, _: Point2D) -> f64 {
        1.0
    }
    fn smoothness(&self) -> Smoothness {
        Smoothness { tau: 0.0, k: 0.0 }
    }
}

#[test]
fn census_recurrence_values() {
    let c = block_census(5, 2).unwrap();
    let row = |l: usize| {
        let r = c.levels[l];
        (r.s, r.e, r.v, r.lr)
    };
    assert_eq!(row(0), (1, 0, 0, 0));
    assert_eq!(row(1), (4, 8, 4, 0));
    assert_eq!(row(2), (16, 48, 36, 156));
    assert_eq!(row(3), (64, 224, 196, 1116));
    for l in 0..=3 {
        assert_eq!(c.covered_cells(l), 16u64.pow(l));
    }
    assert!(block_census(2, 2).is_err());
}

#[test]
fn census_work_totals() {
    let c = block_census(3, 1).unwrap();
    // level 2: 16 S + 48 E + 36 V leaf blocks of 4 x 4 points
    assert_eq!(c.direct_work, 100 * 16);
    // 156 admissible blocks of 4 points per side
    assert_eq!(c.low_rank_work, 156 * 4);
}

#[test]
fn traversal_matches_census() {
    for (p, p0) in [(3, 1), (4, 2), (5, 2)] {
        let tree = grid_tree(p, p0, 3);
        let cfg = TraversalConfig::new(SQRT_HALF, 4, 1e-8, p0);
        let plan = plan(Interaction::SelfInteraction(&tree), &cfg).unwrap();
        assert_eq!(plan.census(p, p0), block_census(p, p0).unwrap(), "p = {p}");
    }
}

#[test]
fn every_pair_is_covered_once() {
    let tree = grid_tree(4, 1, 5);
    let cfg = TraversalConfig::new(SQRT_HALF, 4, 1e-8, 1);
    let inter = Interaction::SelfInteraction(&tree);
    let cover = pair_coverage(inter, &plan(inter, &cfg).unwrap());
    for (i, row) in cover.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            assert_eq!(c, u32::from(i != j), "({i}, {j})");
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let a = PointSet::uniform(150, domain(), &mut rng).unwrap();
    let far = Square::new(Point2D::new(16.0, 0.0), 8.0);
    let b = PointSet::uniform(90, far, &mut rng).unwrap();
    let (ta, tb) = (
        QuadTree::build_general(&a, domain(), 3).unwrap(),
        QuadTree::build_general(&b, far, 2).unwrap(),
    );
    let inter = Interaction::Cross { targets: &ta, sources: &tb };
    let cfg = TraversalConfig::new(0.5, 4, 1e-8, 1);
    let cover = pair_coverage(inter, &plan(inter, &cfg).unwrap());
    assert!(cover.iter().flatten().all(|&c| c == 1));
}

#[test]
fn direct_single_source() {
    let t = PointSet::new(vec![Point2D::new(0.0, 0.0)], vec![1.0]).unwrap();
    let s = PointSet::new(vec![Point2D::new(1.0, 0.0)], vec![1.0]).unwrap();
    let k = ScreenedCoulomb::new(0.0);
    assert_eq!(direct_summation(&k, &t, &s, &[1.0], false).unwrap(), vec![1.0]);
    assert_eq!(direct_summation(&k, &t, &s, &[0.0], false).unwrap(), vec![0.0]);
    assert!(direct_summation(&k, &t, &s, &[1.0, 2.0], false).is_err());
}

#[test]
fn direct_mirrored_sources_contribute_equally() {
    let t = PointSet::new(vec![Point2D::new(0.0, 0.0)], vec![1.0]).unwrap();
    let k = ScreenedCoulomb::new(0.3);
    let one = |p: Point2D| {
        let s = PointSet::new(vec![p], vec![1.0]).unwrap();
        direct_summation(&k, &t, &s, &[1.0], false).unwrap()[0]
    };
    assert_eq!(one(Point2D::new(2.0, 1.0)), one(Point2D::new(-2.0, -1.0)));
}

#[test]
fn leaf_pair_matches_naive_loop() {
    let tree = grid_tree(4, 2, 1);
    let k = ScreenedCoulomb::new(0.01);
    let leaves: Vec<NodeId> = (0..tree.nodes().len()).filter(|&i| tree.node(i).is_leaf()).collect();
    let task = BlockTask {
        target: leaves[0],
        source: leaves[5],
        level: 2,
        class: BlockClass::LR,
        exec: Exec::Direct,
    };
    let cfg = TraversalConfig::new(SQRT_HALF, 4, 1e-8, 2);
    let ctx = Context {
        interaction: Interaction::SelfInteraction(&tree),
        kernel: &k,
        cfg: &cfg,
        seed: 0,
        densities: tree.points().densities(),
    };
    let x: Vec<f64> = (0..256).map(|i| (i as f64 * 0.37).cos()).collect();
    let (buf, _) = ctx.run(&task, None, &x);
    let pts = tree.points();
    let (tr, sr) = ctx.ranges(&task);
    for (bi, i) in buf.iter().zip(tr) {
        let mut e = 0.0;
        for j in sr.clone() {
            e += k.eval(pts.points()[i], pts.points()[j]).unwrap() * pts.densities()[j] * x[j];
        }
        assert!((bi - e).abs() <= 1e-15 * e.abs());
    }
}

#[test]
fn uncompressed_traversal_equals_direct() {
    let tree = grid_tree(5, 2, 7);
    let k = Helmholtz::new(1.0);
    let x: Vec<Complex64> = (0..1024).map(|i| Complex64::new(1.0, (i % 5) as f64)).collect();
    let cfg = TraversalConfig::new(SQRT_HALF, 16, 1e-8, 2).without_compression();
    let y = hmatrix_product(Interaction::SelfInteraction(&tree), &k, &x, &cfg, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let ps = PointSet::jittered_grid(5, domain(), &mut rng)
        .unwrap()
        .with_random_densities(&mut rng);
    let e = direct_summation(&k, &ps, &ps, &x, true).unwrap();
    assert!(relative_error(&y, &e) < 1e-13);
}

#[test]
fn single_leaf_tree_is_direct() {
    let tree = grid_tree(2, 2, 4);
    let k = ScreenedCoulomb::new(0.01);
    let cfg = TraversalConfig::new(SQRT_HALF, 16, 1e-8, 2);
    let x = vec![1.0; 16];
    let (y, stats) =
        hmatrix_product_with_stats(Interaction::SelfInteraction(&tree), &k, &x, &cfg, 1).unwrap();
    assert_eq!(stats.direct_blocks, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let ps = PointSet::jittered_grid(2, domain(), &mut rng)
        .unwrap()
        .with_random_densities(&mut rng);
    let e = direct_summation(&k, &ps, &ps, &x, true).unwrap();
    assert!(relative_error(&y, &e) < 1e-14);
}

#[test]
fn constant_kernel_is_recovered() {
    let tree = grid_tree(5, 2, 2);
    let cfg = TraversalConfig::new(SQRT_HALF, 4, 1e-8, 2);
    let x: Vec<f64> = (0..1024).map(|i| (i as f64).sin()).collect();
    let inter = Interaction::SelfInteraction(&tree);
    let (y, stats) = hmatrix_product_with_stats(inter, &Constant, &x, &cfg, 3).unwrap();
    assert!(stats.low_rank_blocks > 0);
    let pts = tree.points();
    let orig = PointSet::new(
        tree.to_original_order(pts.points()),
        tree.to_original_order(pts.densities()),
    )
    .unwrap();
    let e = direct_summation(&Constant, &orig, &orig, &x, true).unwrap();
    assert!(relative_error(&y, &e) < 1e-8);
}

#[test]
fn zero_densities_and_zero_input() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let ps = PointSet::jittered_grid(4, domain(), &mut rng).unwrap();
    let ps = ps.clone().with_densities(vec![0.0; ps.len()]).unwrap();
    let tree = QuadTree::build(&ps, domain(), 1).unwrap();
    let cfg = TraversalConfig::new(SQRT_HALF, 4, 1e-8, 1);
    let k = ScreenedCoulomb::new(0.01);
    let y = hmatrix_product(Interaction::SelfInteraction(&tree), &k, &vec![1.0; 256], &cfg, 1).unwrap();
    assert!(y.iter().all(|&v| v == 0.0));
    let tree = grid_tree(4, 1, 2);
    let y = hmatrix_product(Interaction::SelfInteraction(&tree), &k, &vec![0.0; 256], &cfg, 1).unwrap();
    assert!(y.iter().all(|&v| v == 0.0));
}

#[test]
fn cached_operator_matches_streaming() {
    let tree = grid_tree(5, 2, 9);
    let k = ScreenedCoulomb::new(0.01);
    let cfg = TraversalConfig::new(SQRT_HALF, 8, 1e-8, 2);
    let inter = Interaction::SelfInteraction(&tree);
    let x: Vec<f64> = (0..1024).map(|i| 1.0 + (i % 3) as f64).collect();
    let h = HMatrix::assemble(inter, &k, &cfg, 11).unwrap();
    assert!(h.stored_entries() > 0);
    assert_eq!(h.apply(&x).unwrap(), hmatrix_product(inter, &k, &x, &cfg, 11).unwrap());
    assert!(h.apply(&x[1..]).is_err());
}

#[test]
fn batches_cover_tasks_in_order() {
    let sizes = vec![BATCH_ELEMENTS / 2, BATCH_ELEMENTS / 2, 1, BATCH_ELEMENTS * 2, 3];
    let b = batches(&sizes, |&s| s);
    assert_eq!(b, vec![0..2, 2..3, 3..4, 4..5]);
    assert!(batches::<usize>(&[], |&s| s).is_empty());
}
