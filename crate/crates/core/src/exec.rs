//! Sequential / parallel execution switch.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How independent work items are scheduled.
///
/// Results never depend on the mode: every parallel map collects in index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Runs on the rayon global pool when the `parallel` feature is enabled, sequentially
    /// otherwise.
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

impl Execution {
    /// Evaluates `f(0..n)` and returns the results in index order.
    pub fn map_indexed<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Execution::Sequential => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
            #[cfg(not(feature = "parallel"))]
            Execution::Parallel => (0..n).map(f).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let seq = Execution::Sequential.map_indexed(1000, |i| (i as f64).sqrt());
        let par = Execution::Parallel.map_indexed(1000, |i| (i as f64).sqrt());
        assert_eq!(seq, par);
    }
}
