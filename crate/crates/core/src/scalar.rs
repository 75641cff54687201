use nalgebra::ComplexField;
use num_complex::Complex64;

/// Scalar field a kernel operates over: `f64` or `Complex64`.
pub trait Scalar:
    ComplexField<RealField = f64> + Copy + Default + Send + Sync + std::fmt::Debug + 'static
{
    const IS_COMPLEX: bool;

    /// Lossy view as a complex number (used for reporting and I/O).
    fn to_complex(self) -> Complex64;
    /// Scale by a real factor.
    #[inline]
    fn scale(self, s: f64) -> Self {
        self * Self::from_real(s)
    }
}

impl Scalar for f64 {
    const IS_COMPLEX: bool = false;

    #[inline]
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
}

impl Scalar for Complex64 {
    const IS_COMPLEX: bool = true;

    #[inline]
    fn to_complex(self) -> Complex64 {
        self
    }
}
