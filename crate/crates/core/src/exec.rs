//! Sequential / data-parallel execution switch.
//!
//! Hot batch loops (complexity scoring, DBSCAN neighbourhood queries, BM25
//! scoring over a corpus) go through [`Execution::map`]. With the `parallel`
//! feature the work is spread over the rayon pool; without it every variant
//! runs sequentially. Results are always returned in input order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Falls back to sequential when built without the `parallel` feature.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// Batches smaller than this are not worth scheduling on the pool.
const PAR_THRESHOLD: usize = 512;

impl Execution {
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel if items.len() >= PAR_THRESHOLD => items.par_iter().map(f).collect(),
            _ => items.iter().map(f).collect(),
        }
    }

    /// Like [`Execution::map`] over the index range `0..n`.
    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel if n >= PAR_THRESHOLD => (0..n).into_par_iter().map(f).collect(),
            _ => (0..n).map(f).collect(),
        }
    }

    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_modes_agree_and_keep_order() {
        let items: Vec<u64> = (0..5000).collect();
        let seq = Execution::Sequential.map(&items, |x| x * 3 + 1);
        let par = Execution::Parallel.map(&items, |x| x * 3 + 1);
        assert_eq!(seq, par);
        assert_eq!(seq[4999], 4999 * 3 + 1);
        assert_eq!(
            Execution::Sequential.map_range(2000, |i| i * i),
            Execution::Parallel.map_range(2000, |i| i * i)
        );
    }
}
