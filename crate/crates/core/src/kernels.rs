//! Interaction kernels `K(r, r')` and their smoothness metadata.
//!
//! Three built-in kernels are provided:
//! - [`Log2dImage`]: `log|r - r'*| - log|r - r'|` with `r'*` the mirror image of
//!   `r'` across the x-axis (a half-plane log kernel, real valued);
//! - [`ScreenedCoulomb`]: `exp(-gamma R) / R` (real valued);
//! - [`Helmholtz`]: `exp(-i k R) / R` (complex valued).
//!
//! Each kernel carries the pair `(tau, k)` of the generalized asymptotic
//! smoothness condition `|d^a d^b K| <= c (1 + k R)^(|a|+|b|) R^(-|a|-|b|-tau)`.
//! Kernels are pure and `Sync`; new kernels plug in by implementing [`Kernel`].

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::geometry::Point2D;
use crate::{Error, Result, Scalar};

/// Parameters of the generalized asymptotic smoothness condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Smoothness {
    /// Algebraic decay exponent.
    pub tau: f64,
    /// Oscillation/growth parameter (1/length).
    pub k: f64,
}

/// An interaction kernel evaluated on the fly.
pub trait Kernel: Send + Sync {
    type Scalar: Scalar;

    /// Evaluate without checking for singular configurations.
    ///
    /// Callers must never pass a pair for which [`Kernel::is_singular`] holds.
    fn eval_unchecked(&self, r: Point2D, rp: Point2D) -> Self::Scalar;

    fn smoothness(&self) -> Smoothness;

    /// True when `K(r, rp)` is undefined.
    fn is_singular(&self, r: Point2D, rp: Point2D) -> bool {
        r == rp
    }

    /// Radial profile `K(R)` for kernels that depend on `|r - r'|` only.
    fn radial(&self, _distance: f64) -> Option<Self::Scalar> {
        None
    }

    fn eval(&self, r: Point2D, rp: Point2D) -> Result<Self::Scalar> {
        if self.is_singular(r, rp) {
            return Err(Error::Domain(format!(
                "kernel is singular at r = ({}, {}), r' = ({}, {})",
                r.x, r.y, rp.x, rp.y
            )));
        }
        Ok(self.eval_unchecked(r, rp))
    }
}

/// Half-plane logarithmic kernel
/// `log sqrt((x-x')^2 + (y+y')^2) - log sqrt((x-x')^2 + (y-y')^2)`.
///
/// Not symmetric under a plain exchange of its arguments' y-signs; it is
/// symmetric under `(x, y) <-> (x', y')`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Log2dImage;

impl Kernel for Log2dImage {
    type Scalar = f64;

    #[inline]
    fn eval_unchecked(&self, r: Point2D, rp: Point2D) -> f64 {
        let dx = r.x - rp.x;
        let dx2 = dx * dx;
        let image = dx2 + (r.y + rp.y) * (r.y + rp.y);
        let direct = dx2 + (r.y - rp.y) * (r.y - rp.y);
        0.5 * (image / direct).ln()
    }

    fn smoothness(&self) -> Smoothness {
        Smoothness { tau: 0.0, k: 0.0 }
    }

    fn is_singular(&self, r: Point2D, rp: Point2D) -> bool {
        let dx = r.x - rp.x;
        let direct = dx * dx + (r.y - rp.y) * (r.y - rp.y);
        let image = dx * dx + (r.y + rp.y) * (r.y + rp.y);
        direct == 0.0 || image == 0.0
    }
}

/// Screened Coulomb (Yukawa) kernel `exp(-gamma R) / R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreenedCoulomb {
    pub gamma: f64,
}

impl ScreenedCoulomb {
    pub fn new(gamma: f64) -> Self {
        Self { gamma }
    }

    #[inline]
    fn profile(&self, r: f64) -> f64 {
        (-self.gamma * r).exp() / r
    }
}

impl Kernel for ScreenedCoulomb {
    type Scalar = f64;

    #[inline]
    fn eval_unchecked(&self, r: Point2D, rp: Point2D) -> f64 {
        self.profile(r.distance(rp))
    }

    fn smoothness(&self) -> Smoothness {
        Smoothness { tau: 1.0, k: 0.0 }
    }

    fn radial(&self, distance: f64) -> Option<f64> {
        Some(self.profile(distance))
    }
}

/// Helmholtz Green's function `exp(-i k R) / R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Helmholtz {
    pub wavenumber: f64,
}

impl Helmholtz {
    pub fn new(wavenumber: f64) -> Self {
        Self { wavenumber }
    }

    #[inline]
    fn profile(&self, r: f64) -> Complex64 {
        let (s, c) = (self.wavenumber * r).sin_cos();
        Complex64::new(c / r, -s / r)
    }
}

impl Kernel for Helmholtz {
    type Scalar = Complex64;

    #[inline]
    fn eval_unchecked(&self, r: Point2D, rp: Point2D) -> Complex64 {
        self.profile(r.distance(rp))
    }

    fn smoothness(&self) -> Smoothness {
        Smoothness {
            tau: 1.0,
            k: self.wavenumber,
        }
    }

    fn radial(&self, distance: f64) -> Option<Complex64> {
        Some(self.profile(distance))
    }
}

/// Runtime kernel selection, parsed from `log2d`, `screened:GAMMA` or `helmholtz:K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum KernelSpec {
    Log2d,
    ScreenedCoulomb { gamma: f64 },
    Helmholtz { wavenumber: f64 },
}

/// Callback receiving the concrete kernel behind a [`KernelSpec`].
pub trait KernelVisitor {
    type Output;
    fn visit<K: Kernel + Clone + 'static>(self, kernel: K) -> Self::Output;
}

impl KernelSpec {
    pub fn tau(&self) -> f64 {
        self.smoothness().tau
    }

    pub fn kparam(&self) -> f64 {
        self.smoothness().k
    }

    pub fn smoothness(&self) -> Smoothness {
        match *self {
            KernelSpec::Log2d => Log2dImage.smoothness(),
            KernelSpec::ScreenedCoulomb { gamma } => ScreenedCoulomb::new(gamma).smoothness(),
            KernelSpec::Helmholtz { wavenumber } => Helmholtz::new(wavenumber).smoothness(),
        }
    }

    pub fn is_complex(&self) -> bool {
        matches!(self, KernelSpec::Helmholtz { .. })
    }

    /// Evaluate as a complex number (imaginary part zero for real kernels).
    pub fn eval(&self, r: Point2D, rp: Point2D) -> Result<Complex64> {
        struct Eval(Point2D, Point2D);
        impl KernelVisitor for Eval {
            type Output = Result<Complex64>;
            fn visit<K: Kernel + Clone + 'static>(self, kernel: K) -> Self::Output {
                kernel.eval(self.0, self.1).map(Scalar::to_complex)
            }
        }
        self.visit(Eval(r, rp))
    }

    pub fn visit<V: KernelVisitor>(&self, visitor: V) -> V::Output {
        match *self {
            KernelSpec::Log2d => visitor.visit(Log2dImage),
            KernelSpec::ScreenedCoulomb { gamma } => visitor.visit(ScreenedCoulomb::new(gamma)),
            KernelSpec::Helmholtz { wavenumber } => visitor.visit(Helmholtz::new(wavenumber)),
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Log2d => write!(f, "log2d"),
            KernelSpec::ScreenedCoulomb { gamma } => write!(f, "screened:{gamma}"),
            KernelSpec::Helmholtz { wavenumber } => write!(f, "helmholtz:{wavenumber}"),
        }
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let parse_param = |a: Option<&str>| -> Result<f64> {
            let a = a.ok_or_else(|| Error::Config(format!("kernel `{s}` needs a parameter")))?;
            let v: f64 = a
                .parse()
                .map_err(|_| Error::Config(format!("bad kernel parameter `{a}`")))?;
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!("kernel parameter must be finite and >= 0, got {v}")));
            }
            Ok(v)
        };
        match name.to_ascii_lowercase().as_str() {
            "log2d" if arg.is_none() => Ok(KernelSpec::Log2d),
            "screened" => Ok(KernelSpec::ScreenedCoulomb {
                gamma: parse_param(arg)?,
            }),
            "helmholtz" => Ok(KernelSpec::Helmholtz {
                wavenumber: parse_param(arg)?,
            }),
            _ => Err(Error::Config(format!(
                "unknown kernel `{s}` (expected log2d, screened:GAMMA or helmholtz:K)"
            ))),
        }
    }
}

impl TryFrom<String> for KernelSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<KernelSpec> for String {
    fn from(k: KernelSpec) -> String {
        k.to_string()
    }
}

/// Number of monomials of total degree `< m` in `d` variables:
/// `sum_{p=0}^{m-1} C(d-1+p, p)`, the rank of a degree-`(m-1)` Taylor expansion.
pub fn rank_estimate(m: u32, d: u32) -> u64 {
    assert!(m >= 1 && d >= 1, "rank_estimate needs m >= 1 and d >= 1");
    (0..m as u64).map(|p| binomial(d as u64 - 1 + p, p)).sum()
}

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(x: f64, y: f64) -> Point2D {
        Point2D::new(x, y)
    }

    #[test]
    fn screened_unit_distance() {
        let k = ScreenedCoulomb::new(0.01);
        let v = k.eval(p(0.0, 0.0), p(1.0, 0.0)).unwrap();
        assert_relative_eq!(v, (-0.01f64).exp(), max_relative = 1e-15);
        assert!((v - 0.990050).abs() < 1e-6);
    }

    #[test]
    fn helmholtz_zero_wavenumber_is_coulomb() {
        let k = Helmholtz::new(0.0);
        let v = k.eval(p(0.0, 0.0), p(2.0, 0.0)).unwrap();
        assert_eq!(v, Complex64::new(0.5, 0.0));
    }

    #[test]
    fn log2d_hand_value() {
        let v = Log2dImage.eval(p(0.0, 1.0), p(1.0, 1.0)).unwrap();
        assert_relative_eq!(v, 0.5 * 5f64.ln(), max_relative = 1e-14);
        assert!((v - 0.804719).abs() < 1e-6);
    }

    #[test]
    fn log2d_diverges_near_coincidence() {
        let far = Log2dImage.eval(p(0.0, 1.0), p(0.0, 1.0 - 1e-3)).unwrap();
        let near = Log2dImage.eval(p(0.0, 1.0), p(0.0, 1.0 - 1e-6)).unwrap();
        assert!(near > far);
        assert_relative_eq!(near, 2f64.ln() - 1e-6f64.ln(), max_relative = 1e-5);
    }

    #[test]
    fn coincident_points_are_domain_errors() {
        let a = p(0.3, 0.7);
        assert!(matches!(ScreenedCoulomb::new(0.01).eval(a, a), Err(Error::Domain(_))));
        assert!(matches!(Helmholtz::new(5.0).eval(a, a), Err(Error::Domain(_))));
        assert!(matches!(Log2dImage.eval(a, a), Err(Error::Domain(_))));
        assert!(KernelSpec::Log2d.eval(a, a).is_err());
    }

    #[test]
    fn smoothness_metadata() {
        assert_eq!(KernelSpec::Log2d.tau(), 0.0);
        assert_eq!(KernelSpec::Log2d.kparam(), 0.0);
        let s: KernelSpec = "screened:0.01".parse().unwrap();
        assert_eq!((s.tau(), s.kparam()), (1.0, 0.0));
        let h: KernelSpec = "helmholtz:5".parse().unwrap();
        assert_eq!((h.tau(), h.kparam()), (1.0, 5.0));
        assert!(h.is_complex() && !s.is_complex());
    }

    #[test]
    fn kernel_spec_parsing() {
        assert_eq!("log2d".parse::<KernelSpec>().unwrap(), KernelSpec::Log2d);
        assert_eq!(
            "screened:0.01".parse::<KernelSpec>().unwrap(),
            KernelSpec::ScreenedCoulomb { gamma: 0.01 }
        );
        for bad in ["", "screened", "helmholtz:x", "helmholtz:-1", "log2d:3", "gauss:1"] {
            assert!(bad.parse::<KernelSpec>().is_err(), "{bad}");
        }
        let h = KernelSpec::Helmholtz { wavenumber: 0.25 };
        assert_eq!(h.to_string().parse::<KernelSpec>().unwrap(), h);
    }

    #[test]
    fn rank_estimate_values() {
        assert_eq!(rank_estimate(1, 2), 1);
        assert_eq!(rank_estimate(3, 2), 6);
        assert_eq!(rank_estimate(3, 3), 10);
        for m in 1..=20u32 {
            assert_eq!(rank_estimate(m, 2), (m * (m + 1) / 2) as u64);
        }
    }

    #[test]
    fn radial_kernels_are_symmetric() {
        let a = p(0.2, 3.1);
        let b = p(5.5, -1.0);
        let s = ScreenedCoulomb::new(0.3);
        assert_eq!(s.eval(a, b).unwrap(), s.eval(b, a).unwrap());
        let h = Helmholtz::new(2.0);
        assert_eq!(h.eval(a, b).unwrap(), h.eval(b, a).unwrap());
    }

    #[test]
    fn helmholtz_modulus_is_inverse_distance() {
        for &k in &[0.0, 0.25, 5.0, 40.0] {
            let h = Helmholtz::new(k);
            for &r in &[0.1, 1.0, 7.3] {
                assert_relative_eq!(h.radial(r).unwrap().norm(), 1.0 / r, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn screened_strictly_decreasing() {
        let s = ScreenedCoulomb::new(0.01);
        let vals: Vec<f64> = (1..200).map(|i| s.radial(i as f64 * 0.05).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]));
    }
}
