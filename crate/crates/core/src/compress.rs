//! Randomized low-rank compression of one far-field interaction block.
//!
//! The block `A` (entries `K(r_i, r_j) q_j`) is never materialized. Its
//! column space is estimated from `c` uniformly sampled columns `C`, a small
//! `r x c` core `C_r` sampled from the rows of `C` is decomposed, and the
//! orthonormal basis `U` of `C V_r` spans the retained directions. The
//! right factor `V` (so that `A x ~ U V* x`) is then estimated from `c`
//! sampled rows of `A`; how that estimate is formed is selected by
//! [`Estimator`].

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::Point2D;
use crate::kernels::Kernel;
use crate::linalg::{orthonormalize, pseudo_inverse, svd_small, SMALL_MATRIX_CAP};
use crate::{Error, Result, Scalar};

/// Lazily evaluated interaction block: entry `(i, j)` is `K(t_i, s_j) q_j`.
///
/// When `exclude_self` is set, rows and columns index a shared point set
/// through `row_offset`/`col_offset`, and the entry for the same global index
/// is zero.
#[derive(Clone, Copy)]
pub struct BlockView<'a, K: Kernel> {
    kernel: &'a K,
    targets: &'a [Point2D],
    sources: &'a [Point2D],
    densities: &'a [f64],
    row_offset: usize,
    col_offset: usize,
    exclude_self: bool,
}

impl<'a, K: Kernel> BlockView<'a, K> {
    pub fn new(kernel: &'a K, targets: &'a [Point2D], sources: &'a [Point2D], densities: &'a [f64]) -> Self {
        assert_eq!(sources.len(), densities.len(), "one density per source");
        Self {
            kernel,
            targets,
            sources,
            densities,
            row_offset: 0,
            col_offset: 0,
            exclude_self: false,
        }
    }

    /// Mark the block as a window `[row_offset..] x [col_offset..]` of a
    /// single shared point set whose diagonal is excluded.
    pub fn excluding_self_pairs(mut self, row_offset: usize, col_offset: usize) -> Self {
        self.row_offset = row_offset;
        self.col_offset = col_offset;
        self.exclude_self = true;
        self
    }

    pub fn rows(&self) -> usize {
        self.targets.len()
    }

    pub fn cols(&self) -> usize {
        self.sources.len()
    }

    pub fn kernel(&self) -> &'a K {
        self.kernel
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> K::Scalar {
        if self.exclude_self && self.row_offset + i == self.col_offset + j {
            return nalgebra::zero::<K::Scalar>();
        }
        self.kernel
            .eval_unchecked(self.targets[i], self.sources[j])
            .scale(self.densities[j])
    }

    /// `rows x idx.len()` matrix of the selected columns times `scale`.
    pub fn columns(&self, idx: &[usize], scale: f64) -> DMatrix<K::Scalar> {
        DMatrix::from_fn(self.rows(), idx.len(), |i, t| self.entry(i, idx[t]).scale(scale))
    }

    /// `idx.len() x cols` matrix of the selected rows times `scale`.
    pub fn rows_at(&self, idx: &[usize], scale: f64) -> DMatrix<K::Scalar> {
        let mut out = DMatrix::zeros(idx.len(), self.cols());
        for (t, &i) in idx.iter().enumerate() {
            for j in 0..self.cols() {
                out[(t, j)] = self.entry(i, j).scale(scale);
            }
        }
        out
    }

    /// Exact product `A x`, accumulated into `y`.
    pub fn apply_exact_into(&self, x: &[K::Scalar], y: &mut [K::Scalar]) {
        debug_assert_eq!(x.len(), self.cols());
        debug_assert_eq!(y.len(), self.rows());
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = nalgebra::zero::<K::Scalar>();
            for (j, &xj) in x.iter().enumerate() {
                acc += self.entry(i, j) * xj;
            }
            *yi += acc;
        }
    }

    /// Dense copy of the whole block (validation only).
    pub fn to_dense(&self) -> DMatrix<K::Scalar> {
        DMatrix::from_fn(self.rows(), self.cols(), |i, j| self.entry(i, j))
    }
}

/// Sample sizes and singular-value cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleBudget {
    /// Number of sampled columns (also the Monte-Carlo sample count).
    pub c: usize,
    /// Number of sampled rows of `C`.
    pub r: usize,
    pub epsilon: f64,
}

impl SampleBudget {
    pub fn square(k: usize, epsilon: f64) -> Self {
        Self { c: k, r: k, epsilon }
    }

    pub fn validate(&self) -> Result<()> {
        if self.c < 1 || self.r < 1 {
            return Err(Error::Config("sample counts must be >= 1".into()));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::Config("epsilon must be > 0".into()));
        }
        Ok(())
    }

    pub fn max_samples(&self) -> usize {
        self.c.max(self.r)
    }
}

/// How the right factor `V` is formed from the `c` sampled rows `A_S` of
/// the block, given the orthonormal left basis `U` (rows `U_S` at the samples).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// Uniform Monte-Carlo product `V = (M/c) A_S* U_S`, an unbiased estimate
    /// of `A* U`; applied as the projector form `U (V* x)`.
    MonteCarlo,
    /// `V = Q_V diag(sigma)` with `Q_V` the orthonormal factor of the
    /// Monte-Carlo estimate and `sigma` the singular values of the sampled
    /// core; applied as `sum_t sigma_t U_t V_t* x`.
    SingularTriplets,
    /// `V* = U_S^+ A_S`: least-squares fit of the sampled rows in the basis
    /// `U`; exact whenever `A = U U* A` and `U_S` has full column rank.
    #[default]
    SampledLeastSquares,
}

impl std::str::FromStr for Estimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "monte-carlo" => Ok(Estimator::MonteCarlo),
            "singular-triplets" => Ok(Estimator::SingularTriplets),
            "sampled-least-squares" => Ok(Estimator::SampledLeastSquares),
            _ => Err(Error::Config(format!(
                "unknown estimator `{s}` (monte-carlo, singular-triplets, sampled-least-squares)"
            ))),
        }
    }
}

impl std::fmt::Display for Estimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Estimator::MonteCarlo => "monte-carlo",
            Estimator::SingularTriplets => "singular-triplets",
            Estimator::SampledLeastSquares => "sampled-least-squares",
        })
    }
}

/// Relative cutoff for the pseudo-inverse in [`Estimator::SampledLeastSquares`].
const LSQ_RCOND: f64 = 1e-10;

/// Draws row and column indices of a block.
pub trait IndexSampler {
    fn sample_rows<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Vec<usize>>;
    fn sample_cols<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Vec<usize>>;
}

/// Uniform i.i.d. sampling with replacement over `0..rows` and `0..cols`.
#[derive(Debug, Clone, Copy)]
pub struct UniformSampler {
    pub rows: usize,
    pub cols: usize,
}

impl UniformSampler {
    pub fn for_block<K: Kernel>(a: &BlockView<'_, K>) -> Self {
        Self {
            rows: a.rows(),
            cols: a.cols(),
        }
    }
}

fn uniform_indices<R: Rng + ?Sized>(n: usize, count: usize, rng: &mut R) -> Result<Vec<usize>> {
    if count == 0 || n == 0 {
        return Err(Error::Config("cannot draw from an empty index set".into()));
    }
    Ok((0..count).map(|_| rng.random_range(0..n)).collect())
}

impl IndexSampler for UniformSampler {
    fn sample_rows<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Vec<usize>> {
        uniform_indices(self.rows, count, rng)
    }
    fn sample_cols<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Vec<usize>> {
        uniform_indices(self.cols, count, rng)
    }
}

/// Low-rank factors with `A x ~ U (V* x)`.
#[derive(Debug, Clone)]
pub struct CompressedBlock<S: Scalar> {
    /// `M x l`, orthonormal columns.
    pub u: DMatrix<S>,
    /// `N x l`.
    pub v: DMatrix<S>,
    /// Leading `l` singular values of the sampled core `C_r`.
    pub sigma: Vec<f64>,
    pub estimator: Estimator,
}

impl<S: Scalar> CompressedBlock<S> {
    pub fn zero(rows: usize, cols: usize, estimator: Estimator) -> Self {
        Self {
            u: DMatrix::zeros(rows, 0),
            v: DMatrix::zeros(cols, 0),
            sigma: Vec::new(),
            estimator,
        }
    }

    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    pub fn rows(&self) -> usize {
        self.u.nrows()
    }

    pub fn cols(&self) -> usize {
        self.v.nrows()
    }

    /// `y += U (V* x)` on raw slices.
    pub fn apply_into(&self, x: &[S], y: &mut [S]) {
        debug_assert_eq!(x.len(), self.cols());
        debug_assert_eq!(y.len(), self.rows());
        for t in 0..self.rank() {
            let vt = self.v.column(t);
            let mut coeff = S::zero();
            for (vj, &xj) in vt.iter().zip(x) {
                coeff += vj.conjugate() * xj;
            }
            let ut = self.u.column(t);
            for (yi, &ui) in y.iter_mut().zip(ut.iter()) {
                *yi += ui * coeff;
            }
        }
    }

    /// QR of the right factor, `V = Q_V R_V`, for callers that need both
    /// factors orthonormal: `A ~ U R_V* Q_V*`.
    pub fn orthonormal_right_factor(&self) -> (DMatrix<S>, DMatrix<S>) {
        let qr = orthonormalize(&self.v);
        (qr.q, qr.r)
    }
}

/// `y = U (V* x)`.
pub fn apply_compressed<S: Scalar>(block: &CompressedBlock<S>, x: &DVector<S>) -> Result<DVector<S>> {
    if x.len() != block.cols() {
        return Err(Error::Dimension {
            expected: block.cols(),
            got: x.len(),
        });
    }
    let mut y = DVector::zeros(block.rows());
    block.apply_into(x.as_slice(), y.as_mut_slice());
    Ok(y)
}

/// `C` built from columns `idx` of `A`, each scaled by `sqrt(N/c)`.
pub fn sample_columns_at<K: Kernel>(a: &BlockView<'_, K>, idx: &[usize]) -> DMatrix<K::Scalar> {
    let scale = (a.cols() as f64 / idx.len() as f64).sqrt();
    a.columns(idx, scale)
}

/// `c` uniform columns of `A` with replacement, scaled by `sqrt(N/c)`.
pub fn sample_columns<K: Kernel, R: Rng + ?Sized>(
    a: &BlockView<'_, K>,
    c: usize,
    rng: &mut R,
) -> Result<DMatrix<K::Scalar>> {
    let idx = uniform_indices(a.cols(), c, rng)?;
    Ok(sample_columns_at(a, &idx))
}

/// Rows `idx` of `C`, each scaled by `sqrt(M/r)`.
pub fn sample_rows_at<S: Scalar>(c: &DMatrix<S>, idx: &[usize]) -> DMatrix<S> {
    let scale = S::from_real((c.nrows() as f64 / idx.len() as f64).sqrt());
    DMatrix::from_fn(idx.len(), c.ncols(), |t, j| c[(idx[t], j)] * scale)
}

/// `r` uniform rows of `C` with replacement, scaled by `sqrt(M/r)`.
pub fn sample_rows<S: Scalar, R: Rng + ?Sized>(c: &DMatrix<S>, r: usize, rng: &mut R) -> Result<DMatrix<S>> {
    let idx = uniform_indices(c.nrows(), r, rng)?;
    Ok(sample_rows_at(c, &idx))
}

/// Number of singular values strictly above `epsilon`, capped at `min(r, c)`.
pub fn truncation_rank(sigma: &[f64], epsilon: f64, r: usize, c: usize) -> usize {
    sigma.iter().take_while(|&&s| s > epsilon).count().min(r).min(c)
}

/// Monte-Carlo estimate of `A* U` from the rows `idx` of `A`, sampled
/// uniformly: `sum_t A_(i_t)* U_(i_t) / (c / M)`.
pub fn mc_matmul_at<K: Kernel>(
    a: &BlockView<'_, K>,
    u: &DMatrix<K::Scalar>,
    idx: &[usize],
) -> DMatrix<K::Scalar> {
    let sampled_rows = a.rows_at(idx, 1.0);
    mc_from_rows(&sampled_rows, u, idx, a.rows())
}

fn mc_from_rows<S: Scalar>(sampled_rows: &DMatrix<S>, u: &DMatrix<S>, idx: &[usize], m: usize) -> DMatrix<S> {
    let u_s = u.select_rows(idx);
    sampled_rows.adjoint() * u_s * S::from_real(m as f64 / idx.len() as f64)
}

/// Monte-Carlo estimate of `A* U` from `c` uniform row draws.
pub fn mc_matmul<K: Kernel, R: Rng + ?Sized>(
    a: &BlockView<'_, K>,
    u: &DMatrix<K::Scalar>,
    c: usize,
    rng: &mut R,
) -> Result<DMatrix<K::Scalar>> {
    if u.nrows() != a.rows() {
        return Err(Error::Dimension {
            expected: a.rows(),
            got: u.nrows(),
        });
    }
    let idx = uniform_indices(a.rows(), c, rng)?;
    Ok(mc_matmul_at(a, u, &idx))
}

/// Compress `A` with uniform sampling.
pub fn compress_block<K: Kernel, R: Rng + ?Sized>(
    a: &BlockView<'_, K>,
    budget: &SampleBudget,
    estimator: Estimator,
    rng: &mut R,
) -> Result<CompressedBlock<K::Scalar>> {
    compress_block_with(a, budget, estimator, &UniformSampler::for_block(a), rng)
}

/// Compress `A` drawing indices from `sampler`.
///
/// Draw order on `rng`: `c` columns, `r` rows of `C`, then `c` rows of `A`.
pub fn compress_block_with<K: Kernel, I: IndexSampler, R: Rng + ?Sized>(
    a: &BlockView<'_, K>,
    budget: &SampleBudget,
    estimator: Estimator,
    sampler: &I,
    rng: &mut R,
) -> Result<CompressedBlock<K::Scalar>> {
    budget.validate()?;
    let (m, n) = (a.rows(), a.cols());
    if m <= budget.max_samples() || n <= budget.max_samples() {
        return Err(Error::Config(format!(
            "{m}x{n} block is not larger than the sample budget; evaluate it directly"
        )));
    }

    let col_idx = sampler.sample_cols(budget.c, rng)?;
    let c_mat = sample_columns_at(a, &col_idx);
    let row_idx = sampler.sample_rows(budget.r, rng)?;
    let core = sample_rows_at(&c_mat, &row_idx);
    let svd = svd_small(&core, SMALL_MATRIX_CAP)?;
    let l = truncation_rank(&svd.sigma, budget.epsilon, budget.r, budget.c);

    let mc_idx = sampler.sample_rows(budget.c, rng)?;
    if l == 0 {
        return Ok(CompressedBlock::zero(m, n, estimator));
    }

    let basis = &c_mat * svd.v.columns(0, l);
    let qr = orthonormalize(&basis);
    let u = qr.q_compact();
    let sigma: Vec<f64> = qr.kept.iter().map(|&t| svd.sigma[t]).collect();
    if u.ncols() == 0 {
        return Ok(CompressedBlock::zero(m, n, estimator));
    }

    let sampled_rows = a.rows_at(&mc_idx, 1.0);
    let v = match estimator {
        Estimator::MonteCarlo => mc_from_rows(&sampled_rows, &u, &mc_idx, m),
        Estimator::SingularTriplets => {
            let v_mc = mc_from_rows(&sampled_rows, &u, &mc_idx, m);
            let vq = orthonormalize(&v_mc).q;
            let mut v = vq;
            for (t, &s) in sigma.iter().enumerate() {
                v.column_mut(t).scale_mut(s);
            }
            v
        }
        Estimator::SampledLeastSquares => {
            let u_s = u.select_rows(&mc_idx);
            let w = pseudo_inverse(&u_s, LSQ_RCOND)?;
            // V* = W A_S  =>  V = A_S* W*
            sampled_rows.adjoint() * w.adjoint()
        }
    };

    Ok(CompressedBlock {
        u,
        v,
        sigma,
        estimator,
    })
}
