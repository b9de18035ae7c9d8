//! Bounded FIFO replay buffer of per-link transitions.

use rand::Rng;

/// One per-link replay record. The reward is the slot's global
/// relative-to-backpressure reward broadcast to every link transition of
/// that slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub feature: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_feature: Vec<f64>,
    /// True when the episode ended or the link no longer exists at t+1.
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    /// Next write position once the buffer is full (strict FIFO eviction).
    write: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        Self { capacity, items: Vec::new(), write: 0 }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: Transition) {
        assert!(t.reward.is_finite(), "non-finite reward in replay record");
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.write] = t;
            self.write = (self.write + 1) % self.capacity;
        }
    }

    pub fn sample<'a, R: Rng + ?Sized>(&'a self, batch: usize, rng: &mut R) -> Vec<&'a Transition> {
        (0..batch)
            .map(|_| &self.items[rng.random_range(0..self.items.len())])
            .collect()
    }
}
