//! Truncated tensor-product velocity mesh with midpoint quadrature.
//!
//! Every velocity integral in the crate is a weighted sum over the nodes of a
//! [`VelocityGrid`]. Nodes are stored in x-major order:
//! `index = (ix * ny + iy) * nz + iz`.

use crate::error::{check_len, BgkError, Result};

/// Smallest admissible node count per axis.
pub const MIN_NODES_PER_AXIS: usize = 8;
/// Default truncation in thermal widths for [`auto_bounds`].
pub const DEFAULT_WIDTHS: f64 = 6.0;
/// Default node count per axis.
pub const DEFAULT_NODES_PER_AXIS: usize = 32;

pub type Vec3 = [f64; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityGrid {
    v_min: Vec3,
    v_max: Vec3,
    counts: [usize; 3],
    spacing: Vec3,
    weight: f64,
    nodes: Vec<Vec3>,
}

impl VelocityGrid {
    /// Midpoint-rule grid: node `i` on an axis sits at `v_min + (i + 1/2) dv`.
    pub fn new(v_min: Vec3, v_max: Vec3, counts: [usize; 3]) -> Result<Self> {
        for axis in 0..3 {
            let (lo, hi) = (v_min[axis], v_max[axis]);
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(BgkError::Config(format!(
                    "axis {axis}: bounds must satisfy v_min < v_max, got ({lo}, {hi})"
                )));
            }
            if counts[axis] < MIN_NODES_PER_AXIS {
                return Err(BgkError::Config(format!(
                    "axis {axis}: need at least {MIN_NODES_PER_AXIS} nodes, got {}",
                    counts[axis]
                )));
            }
        }
        let spacing = [0, 1, 2].map(|a| (v_max[a] - v_min[a]) / counts[a] as f64);
        let axis_coords: Vec<Vec<f64>> = (0..3)
            .map(|a| {
                (0..counts[a])
                    .map(|i| v_min[a] + (i as f64 + 0.5) * spacing[a])
                    .collect()
            })
            .collect();
        let mut nodes = Vec::with_capacity(counts.iter().product());
        for &x in &axis_coords[0] {
            for &y in &axis_coords[1] {
                for &z in &axis_coords[2] {
                    nodes.push([x, y, z]);
                }
            }
        }
        Ok(Self {
            v_min,
            v_max,
            counts,
            spacing,
            weight: spacing.iter().product(),
            nodes,
        })
    }

    /// Cube `[-half_width, half_width]^3` with `n` nodes per axis.
    pub fn cube(half_width: f64, n: usize) -> Result<Self> {
        Self::new([-half_width; 3], [half_width; 3], [n; 3])
    }

    pub fn v_min(&self) -> Vec3 {
        self.v_min
    }

    pub fn v_max(&self) -> Vec3 {
        self.v_max
    }

    pub fn counts(&self) -> [usize; 3] {
        self.counts
    }

    pub fn spacing(&self) -> Vec3 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Vec3] {
        &self.nodes
    }

    pub fn node(&self, index: usize) -> Vec3 {
        self.nodes[index]
    }

    /// Quadrature weight shared by every node (uniform midpoint rule).
    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn total_weight(&self) -> f64 {
        self.weight * self.len() as f64
    }

    /// Evaluate a closure of the velocity on every node.
    pub fn sample(&self, f: impl Fn(Vec3) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&v| f(v)).collect()
    }

    /// `sum_nodes weight * value`.
    pub fn integrate(&self, field: &[f64]) -> Result<f64> {
        check_len(self.len(), field.len())?;
        Ok(self.weight * field.iter().sum::<f64>())
    }

    /// `sum_nodes weight * g(v) * value` without allocating the product field.
    pub fn integrate_with(&self, field: &[f64], g: impl Fn(Vec3) -> f64) -> Result<f64> {
        check_len(self.len(), field.len())?;
        Ok(self.weight
            * self
                .nodes
                .iter()
                .zip(field)
                .map(|(&v, &f)| g(v) * f)
                .sum::<f64>())
    }
}

/// Bounds covering `u ± widths * sqrt(T / m)` for every species on every axis.
pub fn auto_bounds(species: &[(Vec3, f64, f64)], widths: f64) -> Result<(Vec3, Vec3)> {
    if !(widths > 0.0 && widths.is_finite()) {
        return Err(BgkError::Config(format!(
            "truncation width must be positive, got {widths}"
        )));
    }
    if species.is_empty() {
        return Err(BgkError::Config("auto bounds need at least one species".into()));
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for (k, &(u, temperature, mass)) in species.iter().enumerate() {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(BgkError::Config(format!(
                "species {}: temperature must be positive, got {temperature}",
                k + 1
            )));
        }
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(BgkError::Config(format!(
                "species {}: mass must be positive, got {mass}",
                k + 1
            )));
        }
        let half = widths * (temperature / mass).sqrt();
        for a in 0..3 {
            lo[a] = lo[a].min(u[a] - half);
            hi[a] = hi[a].max(u[a] + half);
        }
    }
    Ok((lo, hi))
}
