//! Deterministic worker pool: items are processed in fixed-size blocks
//! claimed from a shared counter, and block partials are folded strictly in
//! ascending block order regardless of which worker produced them or when.
//! Because each block's partial is computed by the same arithmetic whoever
//! runs it, the folded result is bit-identical for every worker count.

use std::collections::BTreeMap;
use std::ops::Range;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;

/// Block size used by the production sweep: small enough to balance load,
/// large enough to amortize dispatch.
pub const DEFAULT_BLOCK_SIZE: usize = 64;

/// Process `n_items` in blocks of `block_size` on `workers` threads and
/// fold the block partials in ascending block order.
///
/// * `init(worker_id)` builds one per-worker scratch state; blocks must not
///   smuggle data through it (it is scratch, not an accumulator), or the
///   result would depend on the block-to-worker assignment.
/// * `work(state, range)` computes the partial for one item range.
/// * `fold(partial)` is called exactly once per block, in block order, on
///   the calling thread.
///
/// The first error (from `work` or `fold`) aborts the sweep and is
/// returned.  With `workers == 1` everything runs on the calling thread.
pub fn ordered_parallel_reduce<S, R, E>(
    n_items: usize,
    block_size: usize,
    workers: usize,
    init: impl Fn(usize) -> S + Sync,
    work: impl Fn(&mut S, Range<usize>) -> Result<R, E> + Sync,
    mut fold: impl FnMut(R) -> Result<(), E>,
) -> Result<(), E>
where
    R: Send,
    E: Send,
{
    assert!(block_size > 0, "block size must be positive");
    let n_blocks = n_items.div_ceil(block_size);
    let block_range = |b: usize| -> Range<usize> {
        let start = b * block_size;
        start..((start + block_size).min(n_items))
    };
    let workers = workers.max(1).min(n_blocks.max(1));

    if workers == 1 {
        let mut state = init(0);
        for b in 0..n_blocks {
            fold(work(&mut state, block_range(b))?)?;
        }
        return Ok(());
    }

    let next_block = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let (tx, rx) = mpsc::sync_channel::<(usize, Result<R, E>)>(2 * workers);

    std::thread::scope(|scope| {
        for worker_id in 0..workers {
            let tx = tx.clone();
            let next_block = &next_block;
            let abort = &abort;
            let init = &init;
            let work = &work;
            scope.spawn(move || {
                let mut state = init(worker_id);
                loop {
                    if abort.load(Ordering::Relaxed) {
                        break;
                    }
                    let b = next_block.fetch_add(1, Ordering::Relaxed);
                    if b >= n_blocks {
                        break;
                    }
                    let result = work(&mut state, block_range(b));
                    let failed = result.is_err();
                    if tx.send((b, result)).is_err() {
                        break; // merger bailed out
                    }
                    if failed {
                        abort.store(true, Ordering::Relaxed);
                        break;
                    }
                }
            });
        }
        drop(tx); // the merger's recv ends once all workers finish

        // merge in ascending block order, buffering early arrivals
        let mut pending: BTreeMap<usize, Result<R, E>> = BTreeMap::new();
        let mut next_fold = 0usize;
        let mut outcome: Result<(), E> = Ok(());
        'merge: while next_fold < n_blocks {
            let Ok((b, partial)) = rx.recv() else {
                // workers gone without delivering everything: only happens
                // after an abort, whose error we already hold
                break 'merge;
            };
            pending.insert(b, partial);
            while let Some(partial) = pending.remove(&next_fold) {
                next_fold += 1;
                let step = match partial {
                    Ok(r) => fold(r),
                    Err(e) => Err(e),
                };
                if let Err(e) = step {
                    abort.store(true, Ordering::Relaxed);
                    outcome = Err(e);
                    break 'merge;
                }
            }
        }
        drop(rx); // unblock any worker parked on a full channel
        outcome
    })
}

/// Resolve the worker count from, in order of precedence: the
/// CALSIM_WORKERS environment variable, the command-line flag, the
/// configuration file, and finally the machine's available parallelism.
/// The environment wins over the flag so a batch scheduler can cap a whole
/// job without editing every invocation inside it.
pub fn resolve_workers(
    flag: Option<usize>,
    env_value: Option<&str>,
    config: Option<usize>,
) -> Result<usize, String> {
    if let Some(raw) = env_value {
        let n: usize = raw
            .trim()
            .parse()
            .map_err(|_| format!("CALSIM_WORKERS = '{raw}' is not a positive integer"))?;
        if n == 0 {
            return Err("CALSIM_WORKERS must be at least 1".into());
        }
        return Ok(n);
    }
    if let Some(n) = flag {
        if n == 0 {
            return Err("worker count must be at least 1".into());
        }
        return Ok(n);
    }
    if let Some(n) = config {
        if n == 0 {
            return Err("configured worker count must be at least 1".into());
        }
        return Ok(n);
    }
    Ok(std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1))
}
