//! Sequential / data-parallel execution of the inner scans.
//!
//! Every parallel path reduces with a total order that matches the
//! sequential left-to-right scan, so results do not depend on scheduling.
//! Without the `parallel` feature, `Execution::Parallel` runs sequentially.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// `f` over `0..n`, results in index order.
    pub fn map_indices<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Reduce `f(0..n)` to the minimum under `less`, with the lowest index
    /// winning ties (the result of a sequential first-wins scan).
    pub fn min_by_index<T, F>(self, n: usize, f: F) -> Option<(usize, T)>
    where
        T: Send + PartialOrd,
        F: Fn(usize) -> Option<T> + Sync + Send,
    {
        let pick = |a: Option<(usize, T)>, b: Option<(usize, T)>| match (a, b) {
            (None, x) | (x, None) => x,
            (Some(a), Some(b)) => {
                if b.1 < a.1 || (!(a.1 < b.1) && b.0 < a.0) {
                    Some(b)
                } else {
                    Some(a)
                }
            }
        };
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return (0..n)
                .into_par_iter()
                .map(|i| f(i).map(|v| (i, v)))
                .reduce(|| None, pick);
        }
        (0..n).map(|i| f(i).map(|v| (i, v))).fold(None, pick)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_prefers_lowest_index_on_ties() {
        let values = [3.0, 1.0, 2.0, 1.0, 1.0];
        for exec in [Execution::Sequential, Execution::Parallel] {
            let got = exec.min_by_index(values.len(), |i| Some(values[i]));
            assert_eq!(got, Some((1, 1.0)));
        }
    }

    #[test]
    fn min_skips_missing() {
        let got = Execution::Parallel.min_by_index(4, |i| if i % 2 == 0 { None } else { Some(-(i as i64)) });
        assert_eq!(got, Some((3, -3)));
        assert_eq!(Execution::Sequential.min_by_index::<f64, _>(0, |_| None), None);
    }

    #[test]
    fn map_preserves_order() {
        let a = Execution::Parallel.map_indices(100, |i| i * i);
        let b = Execution::Sequential.map_indices(100, |i| i * i);
        assert_eq!(a, b);
    }
}
