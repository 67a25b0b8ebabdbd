use std::sync::atomic::{AtomicUsize, Ordering};

use relaxbias_core::mc::{ChunkExecutor, DrawChunk};
use relaxbias_core::McError;

/// Runs sampler chunks on a fixed pool of scoped threads. Each chunk owns
/// its random stream, so the output does not depend on the thread count.
#[derive(Debug, Clone, Copy)]
pub struct Threaded {
    threads: usize,
}

impl Threaded {
    pub fn new(threads: usize) -> Self {
        Threaded { threads: threads.max(1) }
    }
}

impl ChunkExecutor for Threaded {
    fn run(
        &self,
        chunks: usize,
        job: &(dyn Fn(usize) -> Result<DrawChunk, McError> + Sync),
    ) -> Vec<Result<DrawChunk, McError>> {
        let workers = self.threads.min(chunks);
        if workers <= 1 {
            return (0..chunks).map(job).collect();
        }
        let next = AtomicUsize::new(0);
        let mut done: Vec<(usize, Result<DrawChunk, McError>)> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|_| {
                    s.spawn(|| {
                        let mut out = Vec::new();
                        loop {
                            let i = next.fetch_add(1, Ordering::Relaxed);
                            if i >= chunks {
                                break out;
                            }
                            out.push((i, job(i)));
                        }
                    })
                })
                .collect();
            handles.into_iter().flat_map(|h| h.join().expect("sampler worker panicked")).collect()
        });
        done.sort_by_key(|(i, _)| *i);
        done.into_iter().map(|(_, r)| r).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_come_back_in_chunk_order() {
        let job = |i: usize| -> Result<DrawChunk, McError> {
            Ok(DrawChunk { index: i, targets: vec![i as f64], bias: vec![] })
        };
        let out = Threaded::new(3).run(10, &job);
        let idx: Vec<usize> = out.into_iter().map(|r| r.unwrap().index).collect();
        assert_eq!(idx, (0..10).collect::<Vec<_>>());
    }
}
