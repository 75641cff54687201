//! Point sets, the square-domain quadtree and the random-path index sampler.

mod quadtree;
mod sampling;

pub use quadtree::{
    classify_pair, diam, dist, is_admissible, NodeId, PairClass, QuadTree, TreeMode, TreeNode,
};
pub use sampling::random_path_sample;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
}

impl Point2D {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn distance(self, other: Point2D) -> f64 {
        let (dx, dy) = (self.x - other.x, self.y - other.y);
        (dx * dx + dy * dy).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Axis-aligned square `[x0, x0 + side] x [y0, y0 + side]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Square {
    pub origin: Point2D,
    pub side: f64,
}

impl Square {
    pub fn new(origin: Point2D, side: f64) -> Self {
        Self { origin, side }
    }

    pub fn center(&self) -> Point2D {
        Point2D::new(self.origin.x + 0.5 * self.side, self.origin.y + 0.5 * self.side)
    }

    pub fn diagonal(&self) -> f64 {
        self.side * std::f64::consts::SQRT_2
    }

    pub fn contains(&self, p: Point2D) -> bool {
        p.x >= self.origin.x
            && p.y >= self.origin.y
            && p.x <= self.origin.x + self.side
            && p.y <= self.origin.y + self.side
    }
}

/// Points together with their densities `q_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    points: Vec<Point2D>,
    densities: Vec<f64>,
}

impl PointSet {
    pub fn new(points: Vec<Point2D>, densities: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Config("point set must not be empty".into()));
        }
        if points.len() != densities.len() {
            return Err(Error::Dimension {
                expected: points.len(),
                got: densities.len(),
            });
        }
        if !points.iter().all(|p| p.is_finite()) || !densities.iter().all(|q| q.is_finite()) {
            return Err(Error::Config("coordinates and densities must be finite".into()));
        }
        Ok(Self { points, densities })
    }

    /// `n` i.i.d. uniform points in `square` with unit densities.
    pub fn uniform<R: Rng + ?Sized>(n: usize, square: Square, rng: &mut R) -> Result<Self> {
        let points = (0..n)
            .map(|_| {
                Point2D::new(
                    square.origin.x + rng.random::<f64>() * square.side,
                    square.origin.y + rng.random::<f64>() * square.side,
                )
            })
            .collect();
        Self::new(points, vec![1.0; n])
    }

    /// One uniform point inside each cell of the `2^p x 2^p` grid over `square`,
    /// listed row by row, with unit densities. The result has `4^p` points and
    /// every quadtree cell at every level holds the same number of points.
    pub fn jittered_grid<R: Rng + ?Sized>(p: u32, square: Square, rng: &mut R) -> Result<Self> {
        let n1 = 1usize << p;
        let h = square.side / n1 as f64;
        let mut points = Vec::with_capacity(n1 * n1);
        for j in 0..n1 {
            for i in 0..n1 {
                points.push(Point2D::new(
                    square.origin.x + (i as f64 + rng.random::<f64>()) * h,
                    square.origin.y + (j as f64 + rng.random::<f64>()) * h,
                ));
            }
        }
        let n = points.len();
        Self::new(points, vec![1.0; n])
    }

    /// Replace densities with i.i.d. draws from `U[0, 1)`.
    pub fn with_random_densities<R: Rng + ?Sized>(mut self, rng: &mut R) -> Self {
        for q in &mut self.densities {
            *q = rng.random::<f64>();
        }
        self
    }

    pub fn with_densities(self, densities: Vec<f64>) -> Result<Self> {
        Self::new(self.points, densities)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point2D] {
        &self.points
    }

    pub fn densities(&self) -> &[f64] {
        &self.densities
    }

    /// New point set with entries reordered so that `out[k] = self[order[k]]`.
    pub(crate) fn permuted(&self, order: &[usize]) -> Self {
        Self {
            points: order.iter().map(|&i| self.points[i]).collect(),
            densities: order.iter().map(|&i| self.densities[i]).collect(),
        }
    }
}
