//! Index-ordered parallel map, sequential without the `parallel` feature.

/// `(0..n).map(f).collect()`, evaluated on the rayon pool when enabled.
/// The output order is always the index order.
pub fn par_map<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}
