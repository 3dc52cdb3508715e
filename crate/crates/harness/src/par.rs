//! Order-preserving parallel map over frozen models.

use std::thread;

use hyprank_core::Result;

/// Applies `f` to every item on up to `available_parallelism` scoped threads,
/// in contiguous shards, and returns the results in input order.
pub fn par_map<I, O, F>(items: &[I], f: F) -> Result<Vec<O>>
where
    I: Sync,
    O: Send,
    F: Fn(&I) -> Result<O> + Sync,
{
    let threads = thread::available_parallelism().map_or(1, |n| n.get()).min(items.len().max(1));
    if threads <= 1 {
        return items.iter().map(&f).collect();
    }
    let shard = items.len().div_ceil(threads);
    let f = &f;
    let parts: Vec<Result<Vec<O>>> = thread::scope(|s| {
        let handles: Vec<_> = items.chunks(shard).map(|chunk| s.spawn(move || chunk.iter().map(f).collect())).collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(items.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use hyprank_core::Error;

    use super::*;

    #[test]
    fn preserves_order_and_propagates_errors() {
        let v: Vec<usize> = (0..1000).collect();
        assert_eq!(par_map(&v, |x| Ok(x * 2)).unwrap(), v.iter().map(|x| x * 2).collect::<Vec<_>>());
        let err = par_map(&v, |&x| if x == 777 { Err(Error::contract("boom")) } else { Ok(x) });
        assert!(err.is_err());
        assert!(par_map::<usize, usize, _>(&[], |&x| Ok(x)).unwrap().is_empty());
    }
}
