//! Frame-parallel evaluation; results are assembled by frame index.

use std::num::NonZeroUsize;
use std::thread;

use crate::error::Result;

/// Worker count: `PITCHGRAM_THREADS` if set and positive, else the available parallelism.
pub fn thread_count() -> usize {
    std::env::var("PITCHGRAM_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
        .unwrap_or_else(|| thread::available_parallelism().map(NonZeroUsize::get).unwrap_or(1))
}

/// Evaluates `work(state, m)` for `m in 0..frames`, one `state` per worker.
pub(crate) fn map_frames<S, T, I, F>(frames: usize, init: I, work: F) -> Result<Vec<T>>
where
    T: Send,
    I: Fn() -> S + Sync,
    F: Fn(&mut S, usize) -> Result<T> + Sync,
{
    map_frames_on(thread_count(), frames, init, work)
}

pub(crate) fn map_frames_on<S, T, I, F>(threads: usize, frames: usize, init: I, work: F) -> Result<Vec<T>>
where
    T: Send,
    I: Fn() -> S + Sync,
    F: Fn(&mut S, usize) -> Result<T> + Sync,
{
    let threads = threads.min(frames).max(1);
    if threads <= 1 {
        let mut state = init();
        return (0..frames).map(|m| work(&mut state, m)).collect();
    }
    let chunk = frames.div_ceil(threads);
    let parts: Vec<Result<Vec<T>>> = thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let (init, work) = (&init, &work);
                s.spawn(move || {
                    let mut state = init();
                    (t * chunk..((t + 1) * chunk).min(frames)).map(|m| work(&mut state, m)).collect()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|e| std::panic::resume_unwind(e)))
            .collect()
    });
    let mut out = Vec::with_capacity(frames);
    for part in parts {
        out.extend(part?);
    }
    Ok(out)
}
