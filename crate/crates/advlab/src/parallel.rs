//! Index-ordered parallel map over immutable inputs.
//!
//! Work is split into contiguous chunks and results are stitched back in
//! input order, so the output is identical to the sequential run no matter
//! how many workers are used.

use crate::error::Result;

pub(crate) fn map_results<T, R, F>(jobs: usize, items: &[T], f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> Result<R> + Sync,
{
    if jobs <= 1 || items.len() <= 1 {
        return items.iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    let chunk = items.len().div_ceil(jobs);
    let chunk_results: Result<Vec<Vec<R>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .enumerate()
            .map(|(ci, part)| {
                let f = &f;
                scope.spawn(move || {
                    part.iter()
                        .enumerate()
                        .map(|(j, t)| f(ci * chunk + j, t))
                        .collect::<Result<Vec<R>>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker thread panicked"))
            .collect()
    });
    Ok(chunk_results?.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_matches_sequential_order() {
        let items: Vec<usize> = (0..37).collect();
        let seq = map_results(1, &items, |i, &x| Ok(i * 1000 + x)).unwrap();
        for jobs in [2, 3, 8, 64] {
            let par = map_results(jobs, &items, |i, &x| Ok(i * 1000 + x)).unwrap();
            assert_eq!(par, seq, "jobs = {jobs}");
        }
    }

    #[test]
    fn errors_propagate() {
        let items = vec![1, 2, 3];
        let out = map_results(2, &items, |_, &x| {
            if x == 2 {
                Err(crate::error::Error::arg("boom"))
            } else {
                Ok(x)
            }
        });
        assert!(out.is_err());
    }
}
