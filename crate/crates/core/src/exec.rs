//! Order-preserving execution of independent cells, parallel when the
//! `parallel` feature is enabled.

/// How a batch of independent cells is executed. Results always come back in
/// input order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Executor {
    Sequential,
    /// Worker pool of `jobs` threads; `0` means one per available core.
    /// Runs sequentially when built without the `parallel` feature.
    Parallel { jobs: usize },
    #[default]
    Auto,
}

impl Executor {
    pub fn with_jobs(jobs: Option<usize>) -> Self {
        match jobs {
            Some(1) => Executor::Sequential,
            Some(j) => Executor::Parallel { jobs: j },
            None => Executor::Auto,
        }
    }

    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match *self {
            Executor::Sequential => items.iter().map(f).collect(),
            Executor::Parallel { jobs } => par_map(items, f, jobs),
            Executor::Auto => par_map(items, f, 0),
        }
    }
}

#[cfg(feature = "parallel")]
fn par_map<T, R, F>(items: &[T], f: F, jobs: usize) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    if jobs == 0 {
        return items.par_iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(_) => items.iter().map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn par_map<T, R, F>(items: &[T], f: F, _jobs: usize) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let items: Vec<u64> = (0..200).collect();
        let f = |&k: &u64| (0..k * 1000).fold(k, |a, b| a.wrapping_mul(31).wrapping_add(b));
        let seq = Executor::Sequential.map(&items, f);
        assert_eq!(Executor::Parallel { jobs: 3 }.map(&items, f), seq);
        assert_eq!(Executor::Auto.map(&items, f), seq);
    }
}
