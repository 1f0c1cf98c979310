//! Worker pool and collective communication for the distributed rounds.
//!
//! Workers are logical: p partition tasks run on however many OS threads
//! the pool owns, stealing the next unclaimed partition index. Results land
//! in per-task slots, so the outcome is a pure function of the inputs no
//! matter the thread count or completion order. Collectives run between
//! compute phases on the orchestrating thread; every value they move is
//! encoded to and decoded from the wire format.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::centroid::CentroidSummary;
use crate::error::{Error, Result};
use crate::objective::ModelVector;

use super::wire;

pub struct WorkerPool {
    threads: usize,
}

impl WorkerPool {
    /// A pool of at least one thread.
    pub fn new(threads: usize) -> Self {
        WorkerPool {
            threads: threads.max(1),
        }
    }

    pub fn threads(&self) -> usize {
        self.threads
    }

    /// Runs `f(0), ..., f(tasks-1)`, work-stealing across the pool, and
    /// returns the results ordered by task index.
    pub fn run<T, F>(&self, tasks: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        if tasks == 0 {
            return Vec::new();
        }
        let workers = self.threads.min(tasks);
        if workers == 1 {
            return (0..tasks).map(f).collect();
        }
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<T>>> = (0..tasks).map(|_| Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= tasks {
                        break;
                    }
                    let out = f(i);
                    *slots[i].lock().expect("worker slot poisoned") = Some(out);
                });
            }
        });
        slots
            .into_iter()
            .map(|slot| {
                slot.into_inner()
                    .expect("worker slot poisoned")
                    .expect("worker task produced no result")
            })
            .collect()
    }
}

/// Message traffic accounting. Self-delivery counts as one message in
/// gather and broadcast (p messages each); all-to-all counts only the
/// p(p-1) cross pairs, though every worker's inbox still holds all p
/// values.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct ProtocolCounters {
    pub all_to_all_rounds: usize,
    pub all_to_all_messages: usize,
    pub gather_rounds: usize,
    pub gather_messages: usize,
    pub broadcast_rounds: usize,
    pub broadcast_messages: usize,
    pub bytes_sent: usize,
}

/// The three collectives the pipeline uses. Each call is a barrier: it
/// consumes one value per worker and returns the delivered views, ordered
/// by partition id.
#[derive(Debug, Default)]
pub struct Exchange {
    pub counters: ProtocolCounters,
}

impl Exchange {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every worker receives every worker's centroid summary (own included)
    /// in partition-id order.
    pub fn all_to_all_centroids(
        &mut self,
        items: &[CentroidSummary],
    ) -> Result<Vec<Vec<CentroidSummary>>> {
        let p = items.len();
        for (i, c) in items.iter().enumerate() {
            if c.partition_id != i {
                return Err(Error::InvalidData(format!(
                    "centroid summary {i} claims partition {}",
                    c.partition_id
                )));
            }
        }
        let encoded: Vec<Vec<u8>> = items.iter().map(wire::encode_centroids).collect();
        self.counters.all_to_all_rounds += 1;
        self.counters.all_to_all_messages += p * (p - 1);
        self.counters.bytes_sent += encoded.iter().map(Vec::len).sum::<usize>() * (p - 1);
        (0..p)
            .map(|_| encoded.iter().map(|b| wire::decode_centroids(b)).collect())
            .collect()
    }

    /// All workers' models collected on the main worker, partition-id order.
    pub fn gather_models(&mut self, items: &[ModelVector]) -> Result<Vec<ModelVector>> {
        let p = items.len();
        let mut encoded = Vec::with_capacity(p);
        for (i, m) in items.iter().enumerate() {
            encoded.push(wire::encode_model(i, m)?);
        }
        self.counters.gather_rounds += 1;
        self.counters.gather_messages += p;
        self.counters.bytes_sent += encoded.iter().map(Vec::len).sum::<usize>();
        encoded
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let (pid, m) = wire::decode_model(b)?;
                if pid != i {
                    return Err(Error::Wire(format!(
                        "gather slot {i} delivered partition {pid}"
                    )));
                }
                Ok(m)
            })
            .collect()
    }

    /// The main worker's feature scale delivered to all p workers.
    pub fn broadcast_scale(&mut self, alpha: &[f64], p: usize) -> Result<Vec<Vec<f64>>> {
        let encoded = wire::encode_scale(0, alpha);
        self.counters.broadcast_rounds += 1;
        self.counters.broadcast_messages += p;
        self.counters.bytes_sent += encoded.len() * p;
        (0..p)
            .map(|_| wire::decode_scale(&encoded).map(|(_, a)| a))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;
    use std::sync::atomic::AtomicUsize;

    #[test]
    fn pool_results_are_ordered_by_task() {
        for threads in [1, 2, 7] {
            let pool = WorkerPool::new(threads);
            let out = pool.run(20, |i| i * i);
            assert_eq!(out, (0..20).map(|i| i * i).collect::<Vec<_>>());
        }
    }

    #[test]
    fn pool_uses_multiple_threads() {
        let pool = WorkerPool::new(4);
        let seen = Mutex::new(HashSet::new());
        let busy = AtomicUsize::new(0);
        pool.run(8, |i| {
            busy.fetch_add(1, Ordering::SeqCst);
            // Give other workers a chance to claim tasks concurrently.
            std::thread::sleep(std::time::Duration::from_millis(5));
            seen.lock().unwrap().insert(std::thread::current().id());
            i
        });
        assert!(seen.lock().unwrap().len() > 1);
    }

    #[test]
    fn zero_tasks_is_empty() {
        let pool = WorkerPool::new(3);
        let out: Vec<usize> = pool.run(0, |i| i);
        assert!(out.is_empty());
    }

    fn summary(id: usize, d: usize) -> CentroidSummary {
        CentroidSummary {
            partition_id: id,
            mu_plus: vec![id as f64; d],
            mu_minus: vec![-(id as f64); d],
            mass_plus: 1 + id as u64,
            mass_minus: 2,
            valid_plus: true,
            valid_minus: true,
        }
    }

    #[test]
    fn all_to_all_delivers_everything_in_order() {
        let mut ex = Exchange::new();
        let items: Vec<_> = (0..3).map(|i| summary(i, 2)).collect();
        let inboxes = ex.all_to_all_centroids(&items).unwrap();
        assert_eq!(inboxes.len(), 3);
        for inbox in &inboxes {
            assert_eq!(inbox.len(), 3);
            for (i, c) in inbox.iter().enumerate() {
                assert_eq!(c, &items[i]);
            }
        }
        assert_eq!(ex.counters.all_to_all_rounds, 1);
        assert_eq!(ex.counters.all_to_all_messages, 6);
        assert!(ex.counters.bytes_sent > 0);
    }

    #[test]
    fn single_worker_collectives_are_identity() {
        let mut ex = Exchange::new();
        let items = vec![summary(0, 2)];
        let inboxes = ex.all_to_all_centroids(&items).unwrap();
        assert_eq!(inboxes, vec![items.clone()]);
        assert_eq!(ex.counters.all_to_all_messages, 0);
        let models = vec![ModelVector::new(vec![1.0, 0.0])];
        assert_eq!(ex.gather_models(&models).unwrap(), models);
        assert_eq!(ex.counters.gather_messages, 1);
        let alphas = ex.broadcast_scale(&[1.5, 2.0], 1).unwrap();
        assert_eq!(alphas, vec![vec![1.5, 2.0]]);
    }

    #[test]
    fn gather_preserves_partition_order() {
        let mut ex = Exchange::new();
        let models: Vec<_> = (0..4)
            .map(|i| ModelVector::new(vec![i as f64, 0.0, -(i as f64)]))
            .collect();
        let gathered = ex.gather_models(&models).unwrap();
        assert_eq!(gathered, models);
        assert_eq!(ex.counters.gather_rounds, 1);
        assert_eq!(ex.counters.gather_messages, 4);
    }

    #[test]
    fn broadcast_replicates_exactly() {
        let mut ex = Exchange::new();
        let alpha = vec![1.0, 1.25, 2.0];
        let copies = ex.broadcast_scale(&alpha, 5).unwrap();
        assert_eq!(copies.len(), 5);
        assert!(copies.iter().all(|c| c == &alpha));
        assert_eq!(ex.counters.broadcast_rounds, 1);
        assert_eq!(ex.counters.broadcast_messages, 5);
    }

    #[test]
    fn misnumbered_summaries_are_rejected() {
        let mut ex = Exchange::new();
        let items = vec![summary(1, 2), summary(0, 2)];
        assert!(ex.all_to_all_centroids(&items).is_err());
    }
}
