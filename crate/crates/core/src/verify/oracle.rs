//! Minimax path value on a sampled two-variable landscape.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{FkError, Result};

/// Coarsest accepted oracle grid.
pub const MIN_RESOLUTION: usize = 101;

/// Samples `f(a, b)` on the uniform grid `{0, h, ..., 1}^2` with `h = 1 / (res - 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleGrid2D {
    resolution: usize,
    /// `values[i + j * res] = f(i h, j h)`.
    values: Vec<f64>,
}

impl OracleGrid2D {
    pub fn from_fn(resolution: usize, f: impl Fn(f64, f64) -> f64 + Sync) -> Result<Self> {
        if resolution < MIN_RESOLUTION {
            return Err(FkError::InvalidArgument(format!(
                "oracle resolution {resolution} is below {MIN_RESOLUTION}"
            )));
        }
        let h = 1.0 / (resolution - 1) as f64;
        let values = (0..resolution * resolution)
            .into_par_iter()
            .map(|k| f((k % resolution) as f64 * h, (k / resolution) as f64 * h))
            .collect();
        Ok(OracleGrid2D { resolution, values })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i + j * self.resolution]
    }
}

/// The reduced landscape `(b - a)^2 / 4 - cos 2 pi a - cos 2 pi b` of the
/// classical model on the two-cell torus.
pub fn example_landscape(a: f64, b: f64) -> f64 {
    0.25 * (b - a) * (b - a) - (2.0 * PI * a).cos() - (2.0 * PI * b).cos()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// Smallest possible maximum of the landscape along a grid path.
    pub value: f64,
    /// Grid coordinates where that maximum is attained on an optimal path.
    pub argmax: (f64, f64),
}

#[derive(PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on the bottleneck value, ties by index
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Bottleneck shortest path on the 8-connected grid from `(0, 0)` to `(1, 1)`.
///
/// The cost of a path is the largest sample on it, endpoints included.
pub fn bottleneck_minimax_2d(grid: &OracleGrid2D) -> OracleResult {
    let r = grid.resolution;
    let n = r * r;
    let mut best = vec![f64::INFINITY; n];
    let mut from = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    best[0] = grid.values[0];
    heap.push(Item(best[0], 0));
    let target = n - 1;
    while let Some(Item(v, k)) = heap.pop() {
        if v > best[k] {
            continue;
        }
        if k == target {
            break;
        }
        let (i, j) = ((k % r) as i64, (k / r) as i64);
        for di in -1..=1 {
            for dj in -1..=1 {
                if di == 0 && dj == 0 {
                    continue;
                }
                let (a, b) = (i + di, j + dj);
                if a < 0 || b < 0 || a >= r as i64 || b >= r as i64 {
                    continue;
                }
                let q = a as usize + b as usize * r;
                let cand = v.max(grid.values[q]);
                if cand < best[q] {
                    best[q] = cand;
                    from[q] = k;
                    heap.push(Item(cand, q));
                }
            }
        }
    }
    let value = best[target];
    // walk back to the node realising the bottleneck
    let mut k = target;
    let mut arg = target;
    while k != usize::MAX {
        if grid.values[k] == value {
            arg = k;
        }
        k = from[k];
    }
    let h = 1.0 / (r - 1) as f64;
    OracleResult {
        value,
        argmax: ((arg % r) as f64 * h, (arg / r) as f64 * h),
    }
}
