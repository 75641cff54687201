use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::compress::Estimator;
use crate::kernels::KernelSpec;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Two separated boxes; one compression of the whole cross block.
    Pair,
    /// One point set; full hierarchical product.
    Single,
    /// Block counts per level.
    Census,
    /// Leading singular values of a pair block.
    SvdDecay,
    /// Gram-error identity and bound checks.
    GramCheck,
    /// Wall-clock sweep over `N = 4^p`.
    Timing,
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "pair" => Mode::Pair,
            "single" => Mode::Single,
            "census" => Mode::Census,
            "svd-decay" => Mode::SvdDecay,
            "gram-check" => Mode::GramCheck,
            "timing" => Mode::Timing,
            _ => {
                return Err(Error::Config(format!(
                    "unknown mode `{s}` (pair, single, census, svd-decay, gram-check, timing)"
                )))
            }
        })
    }
}

/// The vector multiplied by the kernel matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum XSpec {
    Ones,
    /// Entries uniform in `[0, 1)` under the run seed.
    RandomUniform,
    /// Whitespace-separated reals, one per source point.
    File(PathBuf),
}

impl FromStr for XSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ones" => Ok(XSpec::Ones),
            "random" | "random-uniform" => Ok(XSpec::RandomUniform),
            _ => match s.strip_prefix("file:") {
                Some(path) if !path.is_empty() => Ok(XSpec::File(PathBuf::from(path))),
                _ => Err(Error::Config(format!("unknown x vector `{s}` (ones, random, file:PATH)"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub kernel: KernelSpec,
    /// Points per set (targets and sources each).
    pub n: usize,
    /// Side of the square box(es).
    pub domain_size: f64,
    pub p0: u32,
    /// Sample count, `c = r = k`.
    pub k: usize,
    pub epsilon: f64,
    /// Admissibility ratio of the hierarchical traversal.
    pub eta: f64,
    pub seed: u64,
    pub realizations: usize,
    /// Center distance of the two boxes in pair, svd-decay and gram-check modes.
    pub pair_separation: f64,
    pub x: XSpec,
    pub estimator: Estimator,
    /// Direct summation is skipped above this many points.
    pub direct_cap: usize,
    /// Smallest exponent of the timing sweep; the largest is `log4(n)`.
    pub timing_min_p: u32,
    /// Number of singular values reported by svd-decay.
    pub sigma_count: usize,
    /// Monte-Carlo trials of gram-check.
    pub trials: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Single,
            kernel: KernelSpec::ScreenedCoulomb { gamma: 0.01 },
            n: 4096,
            domain_size: 8.0,
            p0: 2,
            k: 16,
            epsilon: 1e-8,
            eta: std::f64::consts::FRAC_1_SQRT_2,
            seed: 42,
            realizations: 20,
            pair_separation: 16.0,
            x: XSpec::Ones,
            estimator: Estimator::default(),
            direct_cap: 1 << 16,
            timing_min_p: 5,
            sigma_count: 18,
            trials: 10_000,
        }
    }
}

/// `Some(p)` when `n = 4^p`.
pub fn exact_log4(n: usize) -> Option<u32> {
    if n == 0 || !n.is_power_of_two() || !n.trailing_zeros().is_multiple_of(2) {
        return None;
    }
    Some(n.trailing_zeros() / 2)
}

impl ExperimentConfig {
    /// Box-side to center-distance ratio of the pair geometry.
    pub fn pair_eta(&self) -> f64 {
        self.domain_size / self.pair_separation
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("domain-size", self.domain_size),
            ("epsilon", self.epsilon),
            ("eta", self.eta),
            ("separation", self.pair_separation),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("--{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("n", self.n), ("k", self.k), ("realizations", self.realizations)] {
            if v == 0 {
                return Err(Error::Config(format!("--{name} must be positive")));
            }
        }
        let grid_p = || {
            exact_log4(self.n).ok_or_else(|| Error::Config(format!("mode needs n = 4^p, got {}", self.n)))
        };
        match self.mode {
            Mode::Pair | Mode::SvdDecay | Mode::GramCheck => {
                if self.pair_separation <= self.domain_size {
                    return Err(Error::Config(format!(
                        "boxes of side {} overlap at separation {}",
                        self.domain_size, self.pair_separation
                    )));
                }
                if self.mode == Mode::Pair && self.k >= self.n {
                    return Err(Error::Config(format!("--k ({}) must be below --n ({})", self.k, self.n)));
                }
                if self.mode == Mode::SvdDecay && self.n > 4096 {
                    return Err(Error::Config("svd-decay computes a dense SVD; use n <= 4096".into()));
                }
                if self.mode == Mode::GramCheck && (self.trials == 0 || self.n > 256) {
                    return Err(Error::Config("gram-check needs trials >= 1 and n <= 256".into()));
                }
            }
            Mode::Single => {
                let p = grid_p()?;
                if p < self.p0 {
                    return Err(Error::Config(format!("n = 4^{p} is below the leaf size 4^{}", self.p0)));
                }
            }
            Mode::Census => {
                if grid_p()? <= self.p0 {
                    return Err(Error::Config("census needs n > 4^p0".into()));
                }
            }
            Mode::Timing => {
                let p = grid_p()?;
                if p < self.timing_min_p || self.timing_min_p < self.p0 {
                    return Err(Error::Config(format!(
                        "timing sweeps 4^{}..=4^{p}; need p0 <= timing-min-p <= log4(n)",
                        self.timing_min_p
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_modes_and_vectors() {
        assert_eq!("svd-decay".parse::<Mode>().unwrap(), Mode::SvdDecay);
        assert!("pairs".parse::<Mode>().is_err());
        assert_eq!("ones".parse::<XSpec>().unwrap(), XSpec::Ones);
        assert_eq!("file:x.txt".parse::<XSpec>().unwrap(), XSpec::File("x.txt".into()));
        assert!("file:".parse::<XSpec>().is_err());
    }

    #[test]
    fn log4() {
        assert_eq!(exact_log4(1), Some(0));
        assert_eq!(exact_log4(4096), Some(6));
        assert_eq!(exact_log4(2048), None);
        assert_eq!(exact_log4(0), None);
    }

    #[test]
    fn validation() {
        let ok = ExperimentConfig::default();
        assert!(ok.validate().is_ok());
        let bad = ExperimentConfig { n: 1000, ..ok.clone() };
        assert!(bad.validate().is_err());
        let bad = ExperimentConfig {
            mode: Mode::Pair,
            pair_separation: 4.0,
            ..ok.clone()
        };
        assert!(bad.validate().is_err());
        let bad = ExperimentConfig { epsilon: 0.0, ..ok.clone() };
        assert!(bad.validate().is_err());
        let pair = ExperimentConfig {
            mode: Mode::Pair,
            n: 1000,
            ..ok
        };
        assert!(pair.validate().is_ok());
        assert_eq!(pair.pair_eta(), 0.5);
    }
}
