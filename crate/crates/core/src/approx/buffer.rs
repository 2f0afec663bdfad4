use rand::Rng;

/// Keeps a uniform random subset of at most `capacity` of all items ever offered.
#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirBuffer<T> {
    capacity: usize,
    items: Vec<T>,
    seen: u64,
}

impl<T> ReservoirBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        ReservoirBuffer { capacity, items: Vec::new(), seen: 0 }
    }

    pub fn add(&mut self, item: T, rng: &mut impl Rng) {
        self.seen += 1;
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            let j = rng.gen_range(0..self.seen);
            if (j as usize) < self.capacity {
                self.items[j as usize] = item;
            }
        }
    }

    /// `batch_size` items drawn uniformly with replacement; `None` while empty.
    pub fn sample(&self, batch_size: usize, rng: &mut impl Rng) -> Option<Vec<&T>> {
        sample_from(&self.items, batch_size, 1, rng)
    }

    pub fn items(&self) -> &[T] {
        &self.items
    }

    pub fn seen(&self) -> u64 {
        self.seen
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

    pub fn clear(&mut self) {
        self.items.clear();
        self.seen = 0;
    }
}

/// Ring buffer that overwrites its oldest entry once full.
#[derive(Debug, Clone, PartialEq)]
pub struct CircularReplayBuffer<T> {
    capacity: usize,
    items: Vec<T>,
    cursor: usize,
}

impl<T> CircularReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        CircularReplayBuffer { capacity, items: Vec::new(), cursor: 0 }
    }

    pub fn add(&mut self, item: T) {
        if self.capacity == 0 {
            return;
        }
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            self.items[self.cursor] = item;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// Uniform draw with replacement, or `None` until the buffer holds `min_size` items.
    pub fn sample(&self, batch_size: usize, min_size: usize, rng: &mut impl Rng) -> Option<Vec<&T>> {
        sample_from(&self.items, batch_size, min_size, rng)
    }

    pub fn items(&self) -> &[T] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

fn sample_from<'a, T>(items: &'a [T], batch_size: usize, min_size: usize, rng: &mut impl Rng) -> Option<Vec<&'a T>> {
    if items.is_empty() || items.len() < min_size {
        return None;
    }
    Some((0..batch_size).map(|_| &items[rng.gen_range(0..items.len())]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reservoir_keeps_everything_below_capacity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut buf = ReservoirBuffer::new(2);
        buf.add('a', &mut rng);
        buf.add('b', &mut rng);
        assert_eq!(buf.items(), &['a', 'b']);
        for c in "cdefg".chars() {
            buf.add(c, &mut rng);
        }
        assert_eq!(buf.seen(), 7);
        assert_eq!(buf.len(), 2);
    }

    #[test]
    fn ring_evicts_oldest_first() {
        let mut buf = CircularReplayBuffer::new(3);
        for i in 0..5 {
            buf.add(i);
        }
        let mut items = buf.items().to_vec();
        items.sort();
        assert_eq!(items, vec![2, 3, 4]);
        buf.add(5);
        let mut items = buf.items().to_vec();
        items.sort();
        assert_eq!(items, vec![3, 4, 5]);
    }

    #[test]
    fn sampling_readiness_and_replacement() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut buf = CircularReplayBuffer::new(10);
        assert!(buf.sample(4, 1, &mut rng).is_none());
        buf.add(7);
        assert_eq!(buf.sample(4, 1, &mut rng).unwrap(), vec![&7; 4]);
        assert!(buf.sample(4, 2, &mut rng).is_none());
    }

    #[test]
    fn sampling_is_seeded() {
        let mut buf = CircularReplayBuffer::new(10);
        (0..10).for_each(|i| buf.add(i));
        let a = buf.sample(32, 1, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = buf.sample(32, 1, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
    }
}
