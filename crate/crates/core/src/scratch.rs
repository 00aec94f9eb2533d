/// Epoch-stamped membership set over `0..n`; clearing is O(1).
#[derive(Debug, Clone)]
pub(crate) struct Marker {
    stamp: Vec<u32>,
    epoch: u32,
}

impl Marker {
    pub fn new(n: usize) -> Self {
        Marker {
            stamp: vec![0; n],
            epoch: 1,
        }
    }

    pub fn clear(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
    }

    /// Returns true if `i` was newly inserted.
    pub fn insert(&mut self, i: usize) -> bool {
        if self.stamp[i] == self.epoch {
            false
        } else {
            self.stamp[i] = self.epoch;
            true
        }
    }

    pub fn contains(&self, i: usize) -> bool {
        self.stamp[i] == self.epoch
    }
}

/// Dense value array with a marker telling which slots are live.
#[derive(Debug, Clone)]
pub(crate) struct SparseAccumulator {
    pub values: Vec<f64>,
    pub live: Marker,
}

impl SparseAccumulator {
    pub fn new(n: usize) -> Self {
        SparseAccumulator {
            values: vec![0.0; n],
            live: Marker::new(n),
        }
    }

    pub fn clear(&mut self) {
        self.live.clear();
    }

    pub fn set(&mut self, i: usize, x: f64) {
        self.live.insert(i);
        self.values[i] = x;
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        self.live.contains(i).then(|| self.values[i])
    }
}
