use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar used by the analytics: `f32` or `f64`.
pub trait Scalar: Float + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static {
    fn of_i64(v: i64) -> Self {
        <Self as FromPrimitive>::from_i64(v).expect("every i64 maps to a float")
    }

    fn hundred() -> Self {
        Self::of_i64(100)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
