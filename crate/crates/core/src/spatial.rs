//! Uniform grid hash for radius queries in any supported metric.
//!
//! Each metric provides up to [`MAX_HASH_DIMS`] coordinates `h_i` with
//! `|h_i(a) - h_i(b)| <= d(a, b)`. Points within distance `r` of a query then
//! lie in cells at most `ceil(r / cell)` steps away along every hashed axis, so
//! the candidate set is a superset of the true ball and the final test is always
//! the exact metric.

use alloc::vec::Vec;
use hashbrown::HashMap;

pub const MAX_HASH_DIMS: usize = 4;

pub type Key = [i64; MAX_HASH_DIMS];

#[derive(Debug, Clone)]
pub struct GridHash {
    cell: f64,
    dims: usize,
    map: HashMap<Key, Vec<u32>>,
}

impl GridHash {
    pub fn new(cell: f64, dims: usize) -> Self {
        assert!(cell > 0.0 && cell.is_finite(), "grid cell must be positive");
        Self {
            cell,
            dims: dims.min(MAX_HASH_DIMS),
            map: HashMap::new(),
        }
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn key(&self, h: &[f64]) -> Key {
        let mut k = [0i64; MAX_HASH_DIMS];
        for (ki, hi) in k.iter_mut().zip(h).take(self.dims) {
            *ki = libm::floor(hi / self.cell) as i64;
        }
        k
    }

    pub fn insert(&mut self, h: &[f64], id: u32) {
        let k = self.key(h);
        self.map.entry(k).or_default().push(id);
    }

    /// Calls `f` on every id stored in a cell that may hold a point within
    /// `radius` of `h`. Stops early when `f` returns `false`; returns whether
    /// the scan ran to completion.
    pub fn scan<F: FnMut(u32) -> bool>(&self, h: &[f64], radius: f64, mut f: F) -> bool {
        let center = self.key(h);
        let reach = libm::ceil(radius / self.cell) as i64;
        let side = (2 * reach + 1) as usize;
        let total = side.pow(self.dims as u32);
        let mut key = [0i64; MAX_HASH_DIMS];
        for idx in 0..total {
            let mut rem = idx;
            for (d, slot) in key.iter_mut().enumerate().take(self.dims) {
                *slot = center[d] - reach + (rem % side) as i64;
                rem /= side;
            }
            if let Some(ids) = self.map.get(&key) {
                for &id in ids {
                    if !f(id) {
                        return false;
                    }
                }
            }
        }
        true
    }
}
