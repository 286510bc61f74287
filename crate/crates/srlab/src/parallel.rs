//! Execution strategy for data-parallel loops.
//!
//! Every parallel site in the crate maps independent work items (filters,
//! samples, images) and combines the results in index order, so the output
//! is bit-identical regardless of strategy or thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How to run a data-parallel loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    /// Rayon work-stealing. Requires the `parallel` feature; without it this
    /// variant degrades to sequential execution.
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

/// Maps `f` over `0..n` and collects the results in index order.
pub fn map_indexed<T, F>(exec: Exec, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        Exec::Sequential => (0..n).map(f).collect(),
        #[cfg(feature = "parallel")]
        Exec::Parallel => (0..n).into_par_iter().map(f).collect(),
        #[cfg(not(feature = "parallel"))]
        Exec::Parallel => (0..n).map(f).collect(),
    }
}

/// Maps `f` over a slice and collects the results in input order.
pub fn map_slice<T, U, F>(exec: Exec, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    map_indexed(exec, items.len(), |i| f(&items[i]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_order() {
        let squares = map_indexed(Exec::Parallel, 100, |i| i * i);
        assert_eq!(squares, (0..100).map(|i| i * i).collect::<Vec<_>>());
        let doubled = map_slice(Exec::Sequential, &[3, 1, 4], |x| x * 2);
        assert_eq!(doubled, vec![6, 2, 8]);
    }
}
