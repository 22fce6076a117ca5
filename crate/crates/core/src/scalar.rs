use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point type the learning and statistics code is generic over.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal; panics only for values the type cannot hold.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("representable literal")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite conversion")
    }
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
}

/// Sample mean and sample standard deviation (`n - 1` denominator; zero for a
/// single value).
pub fn mean_std<T: Scalar>(values: &[T]) -> Option<(T, T)> {
    if values.is_empty() {
        return None;
    }
    let n = T::from_usize(values.len())?;
    let mean = values.iter().copied().sum::<T>() / n;
    if values.len() == 1 {
        return Some((mean, T::zero()));
    }
    let ss = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>();
    Some((mean, (ss / (n - T::one())).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[1.0f64, 3.0]).unwrap();
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
        let (m, s) = mean_std(&[5.0f32; 100]).unwrap();
        assert_eq!((m, s), (5.0, 0.0));
        assert!(mean_std::<f64>(&[]).is_none());
    }
}
