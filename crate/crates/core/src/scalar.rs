//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All grid fields, energies and solvers are generic over [`Real`], which is
//! implemented for `f32` and `f64`. Quadrature tables and other one-off
//! precomputations are carried out in `f64` and cast on use.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, Signed, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Signed
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Conversion from a count.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Fixed-size small vector used for gradients (only the first `dim` entries are used).
pub type SmallVec<T> = [T; 3];
/// Fixed-size small matrix used for Hessians of the integrand.
pub type SmallMat<T> = [[T; 3]; 3];

#[inline]
pub fn zero_vec<T: Real>() -> SmallVec<T> {
    [T::zero(); 3]
}

#[inline]
pub fn zero_mat<T: Real>() -> SmallMat<T> {
    [[T::zero(); 3]; 3]
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Sum with a fixed pairwise tree so results do not depend on how the caller
/// chunked the work.
pub fn tree_sum<T: Real>(values: &[T]) -> T {
    const LEAF: usize = 256;
    if values.len() <= LEAF {
        return values.iter().fold(T::zero(), |a, &b| a + b);
    }
    let mid = values.len() / 2;
    tree_sum(&values[..mid]) + tree_sum(&values[mid..])
}
