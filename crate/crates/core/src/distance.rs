//! Distance kernels. Inputs are f32, accumulation is f64.

#[inline]
pub fn squared_l2(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum()
}

#[inline]
pub fn l2(a: &[f32], b: &[f32]) -> f64 {
    squared_l2(a, b).sqrt()
}
