//! Ring buffer of recent (vector) observations with prefix sums, so the sum
//! over any trailing window up to the capacity costs O(dim).
//!
//! History before the first push is treated as zeros. Prefix sums are rebuilt
//! from the raw ring every `REBUILD_EVERY` pushes to keep rounding error at
//! window scale.

pub(crate) const REBUILD_EVERY: u32 = 1 << 16;

#[derive(Debug, Clone)]
pub(crate) struct WindowSums {
    dim: usize,
    cap: usize,
    raw: Vec<f64>,
    prefix: Vec<f64>,
    head: usize,
    count: u64,
    since_rebuild: u32,
}

impl WindowSums {
    pub fn new(dim: usize, cap: usize) -> Self {
        assert!(dim > 0 && cap > 0);
        WindowSums {
            dim,
            cap,
            raw: vec![0.0; cap * dim],
            prefix: vec![0.0; (cap + 1) * dim],
            head: 0,
            count: 0,
            since_rebuild: 0,
        }
    }

    pub fn reset(&mut self) {
        self.raw.fill(0.0);
        self.prefix.fill(0.0);
        self.head = 0;
        self.count = 0;
        self.since_rebuild = 0;
    }

    pub fn capacity(&self) -> usize {
        self.cap
    }

    /// The observation that the next push will evict (zeros while filling).
    pub fn oldest(&self) -> &[f64] {
        let slot = (self.count % self.cap as u64) as usize;
        &self.raw[slot * self.dim..(slot + 1) * self.dim]
    }

    pub fn push(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim);
        let d = self.dim;
        let slot = (self.count % self.cap as u64) as usize;
        self.raw[slot * d..(slot + 1) * d].copy_from_slice(x);
        let next = (self.head + 1) % (self.cap + 1);
        for k in 0..d {
            self.prefix[next * d + k] = self.prefix[self.head * d + k] + x[k];
        }
        self.head = next;
        self.count += 1;
        self.since_rebuild += 1;
        if self.since_rebuild >= REBUILD_EVERY {
            self.rebuild();
        }
    }

    fn rebuild(&mut self) {
        let d = self.dim;
        let cap = self.cap;
        let ring = cap + 1;
        let oldest_slot = (self.count % cap as u64) as usize;
        let base = (self.head + 1) % ring;
        self.prefix[base * d..(base + 1) * d].fill(0.0);
        let mut prev = base;
        for j in 0..cap {
            let slot = (oldest_slot + j) % cap;
            let pos = (base + 1 + j) % ring;
            for k in 0..d {
                self.prefix[pos * d + k] = self.prefix[prev * d + k] + self.raw[slot * d + k];
            }
            prev = pos;
        }
        debug_assert_eq!(prev, self.head);
        self.since_rebuild = 0;
    }

    /// Sum of the last `w` observations (`1 <= w <= capacity`) into `out`.
    #[inline]
    pub fn sum_last_into(&self, w: usize, out: &mut [f64]) {
        debug_assert!(w >= 1 && w <= self.cap);
        let d = self.dim;
        let ring = self.cap + 1;
        let from = (self.head + ring - w) % ring;
        for k in 0..d {
            out[k] = self.prefix[self.head * d + k] - self.prefix[from * d + k];
        }
    }

    /// Scalar form of [`sum_last_into`](Self::sum_last_into) for `dim == 1`.
    #[inline]
    pub fn sum_last(&self, w: usize) -> f64 {
        debug_assert_eq!(self.dim, 1);
        let ring = self.cap + 1;
        let from = (self.head + ring - w) % ring;
        self.prefix[self.head] - self.prefix[from]
    }

    /// The `j`-th most recent observation (`j = 0` is the newest).
    pub fn recent(&self, j: usize) -> &[f64] {
        debug_assert!(j < self.cap);
        let d = self.dim;
        let slot = ((self.count + (self.cap as u64) * 2 - 1 - j as u64) % self.cap as u64) as usize;
        &self.raw[slot * d..(slot + 1) * d]
    }

    /// Direct summation from the raw ring; reference path for tests.
    pub fn naive_sum_last(&self, w: usize) -> Vec<f64> {
        let d = self.dim;
        let cap = self.cap as u64;
        let mut out = vec![0.0; d];
        for j in 0..w as u64 {
            if j >= self.count {
                break;
            }
            let slot = ((self.count - 1 - j) % cap) as usize;
            for k in 0..d {
                out[k] += self.raw[slot * d + k];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sums_match_naive_across_rebuilds() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut win = WindowSums::new(2, 7);
        let mut buf = [0.0; 2];
        for step in 0..(2 * REBUILD_EVERY as usize + 13) {
            let x = [rng.random::<f64>() - 0.5, 3.0 * rng.random::<f64>()];
            win.push(&x);
            if step % 997 == 0 || step < 20 {
                for w in 1..=7 {
                    win.sum_last_into(w, &mut buf);
                    let naive = win.naive_sum_last(w);
                    assert!((buf[0] - naive[0]).abs() < 1e-9);
                    assert!((buf[1] - naive[1]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn zero_padded_before_fill() {
        let mut win = WindowSums::new(1, 4);
        win.push(&[2.0]);
        assert_eq!(win.sum_last(4), 2.0);
        assert_eq!(win.oldest(), &[0.0]);
        for v in [3.0, 4.0, 5.0] {
            win.push(&[v]);
        }
        assert_eq!(win.oldest(), &[2.0]);
        win.push(&[6.0]);
        assert_eq!(win.sum_last(4), 18.0);
        assert_eq!(win.sum_last(1), 6.0);
    }
}
