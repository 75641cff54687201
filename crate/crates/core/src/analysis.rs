//! Sampling theory checks and error statistics.
//!
//! Everything here works on dense matrices and is meant for validation at
//! small sizes.

use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::kernels::{Kernel, Smoothness};
use crate::{Error, Result, Scalar};

/// Target and source boxes of common diameter `a` whose centers are `delta` apart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparatedPairGeometry {
    pub a: f64,
    pub delta: f64,
    /// `a / delta`.
    pub eta: f64,
}

impl SeparatedPairGeometry {
    pub fn new(a: f64, delta: f64) -> Result<Self> {
        if !(a > 0.0 && delta > 0.0 && a.is_finite() && delta.is_finite()) {
            return Err(Error::Domain(format!("need positive a and delta, got a = {a}, delta = {delta}")));
        }
        let eta = a / delta;
        if eta >= 1.0 {
            return Err(Error::Domain(format!("boxes overlap: a / delta = {eta} >= 1")));
        }
        Ok(Self { a, delta, eta })
    }
}

fn column_norms_sq<S: Scalar>(a: &DMatrix<S>) -> Vec<f64> {
    a.column_iter().map(|c| c.norm_squared()).collect()
}

/// Column sampling probabilities `|A^(j)|^2 / |A|_F^2`.
pub fn optimal_probabilities<S: Scalar>(a: &DMatrix<S>) -> Result<Vec<f64>> {
    let norms = column_norms_sq(a);
    let total: f64 = norms.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::Domain("optimal probabilities of a zero matrix are undefined".into()));
    }
    Ok(norms.into_iter().map(|n| n / total).collect())
}

/// `(|A|_F^4 - |A A*|_F^2) / c`: expected squared Gram error of `c`-column
/// sampling with optimal probabilities.
pub fn gram_error_expectation<S: Scalar>(a: &DMatrix<S>, c: usize) -> f64 {
    let f2 = a.norm_squared();
    let gram = a * a.adjoint();
    ((f2 * f2 - gram.norm_squared()) / c as f64).max(0.0)
}

/// `|A|_F^4 / (beta c) - |A A*|_F^2 / c`: bound on the same quantity for
/// probabilities within a factor `beta` of optimal.
pub fn nearly_optimal_gram_bound<S: Scalar>(a: &DMatrix<S>, c: usize, beta: f64) -> f64 {
    let f2 = a.norm_squared();
    let gram = a * a.adjoint();
    (f2 * f2 / beta - gram.norm_squared()) / c as f64
}

/// Sample mean of a Monte-Carlo quantity with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloMean {
    pub mean: f64,
    pub std_error: f64,
    pub trials: usize,
}

/// Average of `|A A* - C C*|_F^2` over `trials`, where column `t` of `C` is
/// `A^(i_t) / sqrt(c p_(i_t))` with `i_t ~ probs`.
pub fn empirical_gram_error<S: Scalar, R: Rng + ?Sized>(
    a: &DMatrix<S>,
    c: usize,
    probs: &[f64],
    trials: usize,
    rng: &mut R,
) -> Result<MonteCarloMean> {
    if probs.len() != a.ncols() {
        return Err(Error::Dimension {
            expected: a.ncols(),
            got: probs.len(),
        });
    }
    if c == 0 || trials == 0 {
        return Err(Error::Config("need c >= 1 and trials >= 1".into()));
    }
    let dist = WeightedIndex::new(probs).map_err(|e| Error::Config(format!("invalid probabilities: {e}")))?;
    let gram = a * a.adjoint();
    let mut sketch = DMatrix::<S>::zeros(a.nrows(), c);
    let values: Vec<f64> = (0..trials)
        .map(|_| {
            for t in 0..c {
                let j = dist.sample(rng);
                let scale = 1.0 / (c as f64 * probs[j]).sqrt();
                sketch.column_mut(t).copy_from(&(a.column(j) * S::from_real(scale)));
            }
            (&gram - &sketch * sketch.adjoint()).norm_squared()
        })
        .collect();
    let stats = ErrorStats::from_errors(values)?;
    Ok(MonteCarloMean {
        mean: stats.mean,
        std_error: (stats.variance / trials as f64).sqrt(),
        trials,
    })
}

/// `|K(delta + a)|^2 / |K(delta - a)|^2` on the kernel's radial profile.
pub fn beta_ratio<K: Kernel>(kernel: &K, geom: &SeparatedPairGeometry) -> Result<f64> {
    if geom.delta <= geom.a {
        return Err(Error::Domain(format!("need delta > a, got delta = {}, a = {}", geom.delta, geom.a)));
    }
    let profile = |d: f64| {
        kernel
            .radial(d)
            .map(|k| k.to_complex().norm())
            .ok_or_else(|| Error::Domain("kernel has no radial profile".into()))
    };
    let far = profile(geom.delta + geom.a)?;
    let near = profile(geom.delta - geom.a)?;
    Ok((far / near).powi(2))
}

/// Coefficient `B` with `E|A x - U V* x|`-type error `<= B |A|_F^2`:
/// `(delta/2)^(-tau) (1 + 2 k delta) / |K(delta + a)| sqrt(M/N) / sqrt(c) * 2 eta / (2 - eta)`.
pub fn separation_error_bound(
    geom: &SeparatedPairGeometry,
    smoothness: Smoothness,
    kernel_far_modulus: f64,
    m: usize,
    n: usize,
    c: usize,
) -> f64 {
    let constant = (geom.delta / 2.0).powf(-smoothness.tau) * (1.0 + 2.0 * smoothness.k * geom.delta)
        / kernel_far_modulus
        * (m as f64 / n as f64).sqrt();
    constant / (c as f64).sqrt() * (2.0 * geom.eta / (2.0 - geom.eta))
}

/// Summary of per-realization relative errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub mean: f64,
    /// Unbiased sample variance; zero for a single realization.
    pub variance: f64,
    pub realizations: usize,
    pub errors: Vec<f64>,
}

impl ErrorStats {
    pub fn from_errors(errors: Vec<f64>) -> Result<Self> {
        let n = errors.len();
        if n == 0 {
            return Err(Error::Config("error statistics need at least one realization".into()));
        }
        let mean = errors.iter().sum::<f64>() / n as f64;
        let variance = if n > 1 {
            errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Ok(Self {
            mean,
            variance,
            realizations: n,
            errors,
        })
    }

    pub fn std_error(&self) -> f64 {
        (self.variance / self.realizations as f64).sqrt()
    }
}

/// Relative 2-norm errors of `realizations` against `reference`.
pub fn error_stats<S: Scalar>(reference: &[S], realizations: &[Vec<S>]) -> Result<ErrorStats> {
    let denom: f64 = reference.iter().map(|v| v.modulus_squared()).sum::<f64>().sqrt();
    if denom == 0.0 {
        return Err(Error::Domain("relative error against a zero reference".into()));
    }
    let errors = realizations
        .iter()
        .map(|y| {
            if y.len() != reference.len() {
                return Err(Error::Dimension {
                    expected: reference.len(),
                    got: y.len(),
                });
            }
            let num: f64 = y.iter().zip(reference).map(|(&a, &b)| (a - b).modulus_squared()).sum();
            Ok(num.sqrt() / denom)
        })
        .collect::<Result<Vec<_>>>()?;
    ErrorStats::from_errors(errors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{Helmholtz, Log2dImage, ScreenedCoulomb};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn optimal_probabilities_cases() {
        let p = optimal_probabilities(&DMatrix::<f64>::identity(2, 2)).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
        let a = DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let p = optimal_probabilities(&a).unwrap();
        assert!(close(p[0], 0.2, 1e-15) && close(p[1], 0.8, 1e-15));
        let col = DMatrix::from_column_slice(3, 1, &[1.0, -2.0, 0.5]);
        assert_eq!(optimal_probabilities(&col).unwrap(), vec![1.0]);
        assert!(optimal_probabilities(&DMatrix::<f64>::zeros(2, 3)).is_err());
    }

    #[test]
    fn gram_expectation_cases() {
        assert_eq!(gram_error_expectation(&DMatrix::<f64>::identity(2, 2), 1), 2.0);
        assert_eq!(gram_error_expectation(&DMatrix::<f64>::zeros(3, 3), 4), 0.0);
        let u = nalgebra::DVector::from_vec(vec![1.0, 2.0, -1.0]);
        let v = nalgebra::DVector::from_vec(vec![0.5, 3.0]);
        let rank_one = &u * v.transpose();
        assert!(gram_error_expectation(&rank_one, 3) < 1e-12);
    }

    #[test]
    fn identity_gram_error_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = DMatrix::<f64>::identity(2, 2);
        let p = optimal_probabilities(&a).unwrap();
        let g = empirical_gram_error(&a, 1, &p, 100_000, &mut rng).unwrap();
        // every outcome is exactly 2 up to the rounding of 1 / sqrt(c p)
        assert!(close(g.mean, 2.0, 1e-14));
        assert!(g.std_error < 1e-14);
    }

    #[test]
    fn gram_identity_holds_empirically() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = DMatrix::from_fn(64, 64, |_, _| rng.random::<f64>() - 0.5);
        let p = optimal_probabilities(&a).unwrap();
        let g = empirical_gram_error(&a, 8, &p, 10_000, &mut rng).unwrap();
        let exact = gram_error_expectation(&a, 8);
        assert!((g.mean - exact).abs() <= 0.1 * exact, "{} vs {exact}", g.mean);
    }

    #[test]
    fn beta_ratio_cases() {
        let g = SeparatedPairGeometry::new(8.0, 16.0).unwrap();
        let coulomb = ScreenedCoulomb::new(0.0);
        assert!(close(beta_ratio(&coulomb, &g).unwrap(), 1.0 / 9.0, 1e-14));
        for k in [0.25, 5.0] {
            let b = beta_ratio(&Helmholtz::new(k), &g).unwrap();
            assert!(close(b, 1.0 / 9.0, 1e-14));
        }
        let tiny = SeparatedPairGeometry::new(1e-9, 16.0).unwrap();
        assert!(close(beta_ratio(&coulomb, &tiny).unwrap(), 1.0, 1e-9));
        let screened = beta_ratio(&ScreenedCoulomb::new(0.2), &g).unwrap();
        assert!(screened > 0.0 && screened < 1.0 / 9.0);
        assert!(beta_ratio(&Log2dImage, &g).is_err());
        let bad = SeparatedPairGeometry {
            a: 4.0,
            delta: 4.0,
            eta: 1.0,
        };
        assert!(matches!(beta_ratio(&coulomb, &bad), Err(Error::Domain(_))));
        assert!(SeparatedPairGeometry::new(4.0, 2.0).is_err());
    }

    #[test]
    fn separation_bound_cases() {
        let flat = Smoothness { tau: 0.0, k: 0.0 };
        let g = SeparatedPairGeometry::new(0.5, 1.0).unwrap();
        let b = separation_error_bound(&g, flat, 1.0, 100, 100, 16);
        assert!(close(b, 2.0 * 0.5 / (1.5 * 4.0), 1e-15));
        assert!(separation_error_bound(&g, flat, 1.0, 100, 100, 64) < b);
        let wider = SeparatedPairGeometry::new(0.6, 1.0).unwrap();
        assert!(separation_error_bound(&wider, flat, 1.0, 100, 100, 16) > b);
    }

    #[test]
    fn error_stats_cases() {
        let r = vec![3.0, 4.0];
        let s = error_stats(&r, &[r.clone(), r.clone()]).unwrap();
        assert_eq!((s.mean, s.variance), (0.0, 0.0));
        // |r| = 5
        let s = error_stats(&r, &[vec![3.05, 4.0]]).unwrap();
        assert!(close(s.mean, 0.01, 1e-12));
        let s = error_stats(&r, &[vec![3.05, 4.0], vec![3.15, 4.0]]).unwrap();
        assert!(close(s.mean, 0.02, 1e-12));
        assert!(close(s.variance, 2e-4, 1e-9));
        assert!(error_stats(&[0.0, 0.0], std::slice::from_ref(&r)).is_err());
        assert!(error_stats::<f64>(&r, &[]).is_err());
    }
}
