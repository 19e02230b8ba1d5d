//! Replicate execution: rayon data-parallel by default, sequential behind
//! the (absence of the) `parallel` feature.
//!
//! Results are collected in replicate order, so output is identical whether
//! the work runs on one thread or many.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n`, in parallel when the `parallel` feature is enabled.
pub fn map_replicates<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Sequential variant, always available; the benchmark suite compares this
/// against [`map_replicates`].
pub fn map_replicates_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree() {
        let a = map_replicates(100, |i| i * i);
        let b = map_replicates_seq(100, |i| i * i);
        assert_eq!(a, b);
    }
}
