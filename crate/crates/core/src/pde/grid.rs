use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mirror-symmetric node set on [−L, L] containing 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    nodes: Vec<f64>,
    half_width: f64,
}

/// Parameters of the geometric-then-uniform grid family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPreset {
    pub half_width: f64,
    pub min_spacing: f64,
    pub ratio: f64,
    pub max_spacing: f64,
}

impl Default for GridPreset {
    fn default() -> Self {
        Self { half_width: 20.0, min_spacing: 2e-3, ratio: 1.05, max_spacing: 0.02 }
    }
}

impl GridPreset {
    /// Coarser preset for quick runs.
    pub fn coarse() -> Self {
        Self { half_width: 20.0, min_spacing: 4e-3, ratio: 1.1, max_spacing: 0.05 }
    }

    /// Twice the resolution of `self`.
    pub fn refined(&self) -> Self {
        Self {
            half_width: self.half_width,
            min_spacing: 0.5 * self.min_spacing,
            ratio: self.ratio.sqrt(),
            max_spacing: 0.5 * self.max_spacing,
        }
    }

    pub fn build(&self) -> Result<SpatialGrid> {
        SpatialGrid::geometric(self.half_width, self.min_spacing, self.ratio, self.max_spacing)
    }
}

impl SpatialGrid {
    /// Spacing grows by `ratio` from `min_spacing` at the origin until it
    /// reaches `max_spacing`, then stays uniform; the outermost cells are
    /// stretched evenly so the last node lands on L.
    pub fn geometric(half_width: f64, min_spacing: f64, ratio: f64, max_spacing: f64) -> Result<Self> {
        if !(half_width > 0.0 && min_spacing > 0.0 && max_spacing >= min_spacing && ratio >= 1.0) {
            return Err(Error::Setup(format!(
                "invalid grid parameters L={half_width}, h_min={min_spacing}, ratio={ratio}, h_max={max_spacing}"
            )));
        }
        if min_spacing > half_width {
            return Err(Error::Setup("minimum spacing exceeds the half width".into()));
        }
        let mut right = vec![0.0];
        let mut h = min_spacing;
        let mut x = 0.0;
        while h < max_spacing && x + 2.0 * h < half_width {
            x += h;
            right.push(x);
            h = (h * ratio).min(max_spacing);
        }
        let n = ((half_width - x) / h).ceil().max(1.0) as usize;
        let step = (half_width - x) / n as f64;
        for k in 1..=n {
            right.push(if k == n { half_width } else { x + k as f64 * step });
        }
        Self::from_half(&right)
    }

    /// 2n + 1 equispaced nodes.
    pub fn uniform(half_width: f64, n_half: usize) -> Result<Self> {
        if !(half_width > 0.0) || n_half == 0 {
            return Err(Error::Setup("uniform grid needs L > 0 and n >= 1".into()));
        }
        let right: Vec<f64> = (0..=n_half).map(|k| half_width * k as f64 / n_half as f64).collect();
        Self::from_half(&right)
    }

    /// Mirror the non-negative half (which must start at 0).
    pub fn from_half(right: &[f64]) -> Result<Self> {
        if right.first() != Some(&0.0) || right.len() < 2 {
            return Err(Error::Setup("half grid must start at 0 and have at least two nodes".into()));
        }
        let mut nodes: Vec<f64> = right[1..].iter().rev().map(|x| -x).collect();
        nodes.extend_from_slice(right);
        Self::from_nodes(nodes)
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(Error::Setup("grid needs at least three nodes".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Setup("grid nodes must increase strictly".into()));
        }
        let n = nodes.len();
        if n % 2 == 0 || nodes[n / 2] != 0.0 {
            return Err(Error::Setup("grid must contain 0 as its middle node".into()));
        }
        for k in 0..n / 2 {
            if (nodes[k] + nodes[n - 1 - k]).abs() > 1e-12 * nodes[n - 1].abs() {
                return Err(Error::Setup(format!("grid is not mirror-symmetric at node {k}")));
            }
        }
        let half_width = nodes[n - 1];
        Ok(Self { nodes, half_width })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn center(&self) -> usize {
        self.nodes.len() / 2
    }

    pub fn min_spacing(&self) -> f64 {
        self.nodes.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    /// Spacing to the right of each node (length n − 1).
    pub fn spacings(&self) -> Vec<f64> {
        self.nodes.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Trapezoid weights; interior weights are the dual cell widths.
    pub fn weights(&self) -> Vec<f64> {
        let n = self.nodes.len();
        let mut w = vec![0.0; n];
        for k in 0..n - 1 {
            let h = self.nodes[k + 1] - self.nodes[k];
            w[k] += 0.5 * h;
            w[k + 1] += 0.5 * h;
        }
        w
    }

    /// Midpoints between consecutive nodes.
    pub fn faces(&self) -> Vec<f64> {
        self.nodes.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Non-negative half of the node set, starting at 0.
    pub fn right_half(&self) -> &[f64] {
        &self.nodes[self.center()..]
    }

    /// Grid with every cell split in two.
    pub fn refined(&self) -> Self {
        let mut nodes = Vec::with_capacity(2 * self.nodes.len() - 1);
        for w in self.nodes.windows(2) {
            nodes.push(w[0]);
            nodes.push(0.5 * (w[0] + w[1]));
        }
        nodes.push(*self.nodes.last().unwrap());
        Self { nodes, half_width: self.half_width }
    }

    /// Index of the node nearest to x.
    pub fn nearest(&self, x: f64) -> usize {
        let k = self.nodes.partition_point(|&v| v < x);
        if k == 0 {
            0
        } else if k == self.nodes.len() {
            k - 1
        } else if (self.nodes[k] - x).abs() < (x - self.nodes[k - 1]).abs() {
            k
        } else {
            k - 1
        }
    }

    /// Piecewise-linear interpolation of nodal values at x (clamped).
    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        let n = self.nodes.len();
        if x <= self.nodes[0] {
            return values[0];
        }
        if x >= self.nodes[n - 1] {
            return values[n - 1];
        }
        let k = self.nodes.partition_point(|&v| v <= x) - 1;
        let w = (x - self.nodes[k]) / (self.nodes[k + 1] - self.nodes[k]);
        values[k] * (1.0 - w) + values[k + 1] * w
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&x| f(x)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_grid_shape() {
        let g = GridPreset::default().build().unwrap();
        assert_eq!(g.nodes()[g.center()], 0.0);
        assert_eq!(*g.nodes().last().unwrap(), 20.0);
        assert!((g.min_spacing() - 2e-3).abs() < 1e-12);
        assert!(g.len() > 1900 && g.len() < 2200, "{}", g.len());
        let h = g.spacings();
        assert!(h.iter().all(|&s| s <= 0.02 * 1.5));
    }

    #[test]
    fn rejects_asymmetric_nodes() {
        assert!(SpatialGrid::from_nodes(vec![-1.0, 0.0, 2.0]).is_err());
        assert!(SpatialGrid::from_nodes(vec![-1.0, -0.5, 1.0]).is_err());
    }

    #[test]
    fn weights_sum_to_length() {
        let g = GridPreset::coarse().build().unwrap();
        let s: f64 = g.weights().iter().sum();
        assert!((s - 40.0).abs() < 1e-10);
    }

    #[test]
    fn refinement_keeps_symmetry() {
        let g = SpatialGrid::uniform(1.0, 4).unwrap().refined();
        assert_eq!(g.len(), 17);
        assert!(SpatialGrid::from_nodes(g.nodes().to_vec()).is_ok());
    }
}
