//! Fixed-capacity FIFO replay memory.

use std::collections::VecDeque;

use crate::error::{QrlError, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    items: VecDeque<T>,
}

impl<T> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(QrlError::InvalidArgument("replay capacity must be >= 1".into()));
        }
        Ok(Self {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
        })
    }

    /// Appends `item`, evicting the oldest entry when full.
    pub fn push(&mut self, item: T) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(item);
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

    pub fn get(&self, k: usize) -> Option<&T> {
        self.items.get(k)
    }

    /// `batch` distinct entries chosen uniformly.
    pub fn sample(&self, batch: usize, rng: &mut RngStream) -> Result<Vec<&T>> {
        if batch > self.items.len() {
            return Err(QrlError::InvalidArgument(format!(
                "cannot sample {batch} transitions from {}",
                self.items.len()
            )));
        }
        Ok(rand::seq::index::sample(rng, self.items.len(), batch)
            .into_iter()
            .map(|k| &self.items[k])
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifo_eviction() {
        let mut b = ReplayBuffer::new(3).unwrap();
        for k in 0..5 {
            b.push(k);
        }
        assert_eq!(b.len(), 3);
        assert_eq!(b.get(0), Some(&2));
    }

    #[test]
    fn sample_without_replacement() {
        let mut b = ReplayBuffer::new(10).unwrap();
        for k in 0..10 {
            b.push(k);
        }
        let mut rng = RngStream::new(0, 0);
        for _ in 0..100 {
            let mut s: Vec<i32> = b.sample(10, &mut rng).unwrap().into_iter().copied().collect();
            s.sort();
            assert_eq!(s, (0..10).collect::<Vec<_>>());
        }
        assert!(b.sample(11, &mut rng).is_err());
    }
}
