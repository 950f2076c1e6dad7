//! Floating point abstraction for the statistics code.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumCast, ToPrimitive};

/// f32 or f64.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + NumCast + Debug + Display + Default + Send + Sync + 'static
{
    fn of_usize(n: usize) -> Self {
        <Self as NumCast>::from(n).expect("usize fits in a float")
    }

    fn lit(v: f64) -> Self {
        <Self as NumCast>::from(v).expect("f64 literal fits")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
