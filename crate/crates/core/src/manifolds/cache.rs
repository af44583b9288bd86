use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::qalg::Point;

use super::PointGeometry;

/// Bounded memo table for point geometry, keyed by the exact bit pattern
/// of the coordinates. Cleared wholesale when full.
#[derive(Debug)]
pub struct GeometryCache {
    capacity: usize,
    map: Mutex<HashMap<Vec<u64>, Arc<PointGeometry>>>,
    hits: std::sync::atomic::AtomicU64,
    misses: std::sync::atomic::AtomicU64,
}

fn key(p: &Point) -> Vec<u64> {
    p.iter().map(|v| (v + 0.0).to_bits()).collect()
}

impl GeometryCache {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            map: Mutex::new(HashMap::new()),
            hits: Default::default(),
            misses: Default::default(),
        }
    }

    pub fn get(&self, p: &Point) -> Option<Arc<PointGeometry>> {
        use std::sync::atomic::Ordering;
        if self.capacity == 0 {
            return None;
        }
        let hit = self.map.lock().expect("geometry cache poisoned").get(&key(p)).cloned();
        if hit.is_some() {
            self.hits.fetch_add(1, Ordering::Relaxed);
        } else {
            self.misses.fetch_add(1, Ordering::Relaxed);
        }
        hit
    }

    pub fn insert(&self, p: &Point, geo: Arc<PointGeometry>) {
        if self.capacity == 0 {
            return;
        }
        let mut map = self.map.lock().expect("geometry cache poisoned");
        if map.len() >= self.capacity {
            map.clear();
        }
        map.insert(key(p), geo);
    }

    pub fn clear(&self) {
        self.map.lock().expect("geometry cache poisoned").clear();
    }

    /// `(hits, misses)` since creation.
    pub fn stats(&self) -> (u64, u64) {
        use std::sync::atomic::Ordering;
        (self.hits.load(Ordering::Relaxed), self.misses.load(Ordering::Relaxed))
    }
}
