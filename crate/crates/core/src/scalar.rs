//! Floating-point scalar abstraction: every numerical kernel in this crate is
//! generic over [`Scalar`], instantiated as `f32` or `f64`. The crate root
//! re-exports `f64` aliases for the common case.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Shorthand for `T::from_f64(v).unwrap()`, the one cast this crate needs.
#[inline]
pub fn cast<T: Scalar>(v: f64) -> T {
    T::from_f64(v).expect("f64 literal representable in scalar type")
}

/// Sum with a deterministic, thread-count-independent reduction order.
///
/// Work is split into fixed-size chunks; chunk partials are computed in
/// parallel (sequentially within each chunk) and folded in chunk order, so
/// repeated runs are bit-identical for a given input.
pub fn par_sum_ordered<T, F>(n: usize, term: F) -> T
where
    T: Send + Sum,
    F: Fn(usize) -> T + Sync,
{
    use rayon::prelude::*;
    const CHUNK: usize = 1024;
    if n <= CHUNK {
        return (0..n).map(&term).sum();
    }
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            (lo..hi).map(&term).sum::<T>()
        })
        .collect::<Vec<T>>()
        .into_iter()
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cast_roundtrips() {
        assert_eq!(cast::<f64>(0.5), 0.5);
        assert_eq!(cast::<f32>(0.25), 0.25f32);
    }

    #[test]
    fn par_sum_matches_sequential_bitwise() {
        let term = |i: usize| (i as f64).sqrt() * 1e-3;
        let seq: f64 = {
            // same chunked order, single thread
            let n: usize = 10_000;
            (0..n.div_ceil(1024))
                .map(|c| ((c * 1024)..((c * 1024 + 1024).min(n))).map(term).sum::<f64>())
                .sum()
        };
        let par = par_sum_ordered(10_000, term);
        assert_eq!(seq.to_bits(), par.to_bits());
    }
}
