//! Lifeline graph: a base-`l` hypercube over worker ids plus a seeded
//! uniform random-victim generator per worker.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LifelineTopology {
    pub worker_count: usize,
    pub side_length: usize,
    /// Smallest `z` with `worker_count <= side_length^z`.
    pub dimension: usize,
    pub lifeline_neighbors: Vec<Vec<usize>>,
    pub random_steal_trials: usize,
}

impl LifelineTopology {
    pub fn build(workers: usize, side_length: usize, random_steal_trials: usize) -> Self {
        assert!(workers >= 1 && side_length >= 2);
        let mut dimension = 0;
        let mut span = 1usize;
        while span < workers {
            span *= side_length;
            dimension += 1;
        }
        let lifeline_neighbors = (0..workers)
            .map(|id| {
                let mut out = Vec::with_capacity(dimension);
                let mut place = 1usize;
                for _ in 0..dimension {
                    let digit = (id / place) % side_length;
                    let next = id - digit * place + ((digit + 1) % side_length) * place;
                    if next < workers && next != id && !out.contains(&next) {
                        out.push(next);
                    }
                    place *= side_length;
                }
                out
            })
            .collect();
        LifelineTopology {
            worker_count: workers,
            side_length,
            dimension,
            lifeline_neighbors,
            random_steal_trials,
        }
    }

    pub fn lifelines(&self, worker: usize) -> &[usize] {
        &self.lifeline_neighbors[worker]
    }
}

/// Per-worker victim generator, seeded from the run seed and worker id.
#[derive(Debug, Clone)]
pub struct VictimPicker {
    rng: ChaCha8Rng,
    worker: usize,
    workers: usize,
}

impl VictimPicker {
    pub fn new(seed: u64, worker: usize, workers: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(worker as u64 + 1);
        VictimPicker { rng, worker, workers }
    }

    /// Uniform over all workers other than this one. `None` when alone.
    pub fn pick(&mut self) -> Option<usize> {
        if self.workers < 2 {
            return None;
        }
        let v = self.rng.random_range(0..self.workers - 1);
        Some(if v >= self.worker { v + 1 } else { v })
    }
}
