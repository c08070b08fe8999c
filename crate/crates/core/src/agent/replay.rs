//! Fixed-capacity experience replay.

use std::collections::VecDeque;

use crate::numerics::SeededRng;

#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub state: Vec<f64>,
    pub option: usize,
    /// Squashed continuous action in `(-1, 1)^dim`.
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
}

/// Ring buffer with FIFO eviction.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Experience>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            items: VecDeque::with_capacity(capacity.clamp(1, 1 << 16)),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, e: Experience) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(e);
    }

    pub fn get(&self, i: usize) -> Option<&Experience> {
        self.items.get(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        self.items.iter()
    }

    /// `n` distinct entries drawn uniformly (all of them if fewer are stored).
    pub fn sample(&self, n: usize, rng: &mut SeededRng) -> Vec<&Experience> {
        let n = n.min(self.items.len());
        rng.sample_indices(self.items.len(), n)
            .into_iter()
            .map(|i| &self.items[i])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp(r: f64) -> Experience {
        Experience {
            state: vec![r],
            option: 0,
            action: vec![],
            reward: r,
            next_state: vec![r],
        }
    }

    #[test]
    fn fifo_eviction() {
        let mut b = ReplayBuffer::new(3);
        for i in 0..4 {
            b.push(exp(i as f64));
        }
        assert_eq!(b.len(), 3);
        assert!(b.iter().all(|e| e.reward != 0.0));
        assert_eq!(b.get(0).unwrap().reward, 1.0);
    }

    #[test]
    fn sample_without_replacement() {
        let mut b = ReplayBuffer::new(10);
        for i in 0..10 {
            b.push(exp(i as f64));
        }
        let mut rng = SeededRng::new(1);
        let mut r: Vec<i64> = b.sample(10, &mut rng).iter().map(|e| e.reward as i64).collect();
        r.sort_unstable();
        assert_eq!(r, (0..10).collect::<Vec<_>>());
        assert_eq!(b.sample(50, &mut rng).len(), 10);
    }
}
