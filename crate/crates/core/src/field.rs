//! Uniform-grid samples of bivariate functions.
//!
//! `SampledField` is the currency of the grid engine: rectilinear axes
//! (knot-aligned when built for a net) with row-major values and bilinear
//! reads between nodes.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::net::Net;

/// A bivariate real function shared across modules.
pub type BivFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn unit() -> Self {
        Rect { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 }
    }

    pub fn symmetric() -> Self {
        Rect { x0: -1.0, x1: 1.0, y0: -1.0, y1: 1.0 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.x0 <= x && x <= self.x1 && self.y0 <= y && y <= self.y1
    }

    pub fn corners(&self) -> [(f64, f64); 4] {
        [
            (self.x0, self.y0),
            (self.x1, self.y0),
            (self.x0, self.y1),
            (self.x1, self.y1),
        ]
    }
}

/// Rectilinear grid samples, row-major (`values[iy * nx + ix]`).
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    xs: Vec<f64>,
    ys: Vec<f64>,
    values: Vec<f64>,
}

impl SampledField {
    pub fn from_values(xs: Vec<f64>, ys: Vec<f64>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), xs.len() * ys.len());
        SampledField { xs, ys, values }
    }

    pub fn from_fn(xs: Vec<f64>, ys: Vec<f64>, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(xs.len() * ys.len());
        for &y in &ys {
            for &x in &xs {
                values.push(f(x, y));
            }
        }
        SampledField { xs, ys, values }
    }

    /// Knot-aligned grid over a net with roughly `res` nodes per axis.
    ///
    /// Each cell is subdivided uniformly; every net knot is a grid line.
    /// On a uniform net with `res - 1` divisible by the interval count the
    /// result is the plain uniform grid.
    pub fn grid_for_net(net: &Net, res: usize) -> (Vec<f64>, Vec<f64>) {
        (grid_axis(net.xs(), res), grid_axis(net.ys(), res))
    }

    pub fn nx(&self) -> usize {
        self.xs.len()
    }

    pub fn ny(&self) -> usize {
        self.ys.len()
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.xs.len() + ix]
    }

    pub fn domain(&self) -> Rect {
        Rect {
            x0: self.xs[0],
            x1: *self.xs.last().unwrap(),
            y0: self.ys[0],
            y1: *self.ys.last().unwrap(),
        }
    }

    /// Largest node spacing over both axes.
    pub fn mesh(&self) -> f64 {
        let dx = self.xs.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        let dy = self.ys.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        dx.max(dy)
    }

    pub fn same_grid(&self, other: &SampledField) -> bool {
        self.xs == other.xs && self.ys == other.ys
    }

    /// Bilinear read; queries are clamped to the grid rectangle.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let (ix, tx) = bracket(&self.xs, x);
        let (iy, ty) = bracket(&self.ys, y);
        let nx = self.xs.len();
        let v00 = self.values[iy * nx + ix];
        let v10 = self.values[iy * nx + ix + 1];
        let v01 = self.values[(iy + 1) * nx + ix];
        let v11 = self.values[(iy + 1) * nx + ix + 1];
        let a = v00 + (v10 - v00) * tx;
        let b = v01 + (v11 - v01) * tx;
        a + (b - a) * ty
    }

    /// A shareable bilinear interpolant of this field.
    pub fn interpolant(&self) -> BivFn {
        let field = self.clone();
        Arc::new(move |x, y| field.sample(x, y))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sup_distance(&self, other: &SampledField) -> f64 {
        debug_assert!(self.same_grid(other));
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> SampledField {
        SampledField {
            xs: self.xs.clone(),
            ys: self.ys.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &SampledField, f: impl Fn(f64, f64) -> f64) -> SampledField {
        debug_assert!(self.same_grid(other));
        SampledField {
            xs: self.xs.clone(),
            ys: self.ys.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Checks that every knot of `net` lies on a grid line.
    pub fn aligned_with(&self, net: &Net) -> Result<()> {
        let on_axis = |axis: &[f64], knot: f64| {
            axis.iter().any(|&v| (v - knot).abs() <= 1e-12 * knot.abs().max(1.0))
        };
        let ok = net.xs().iter().all(|&k| on_axis(&self.xs, k))
            && net.ys().iter().all(|&k| on_axis(&self.ys, k));
        if ok {
            Ok(())
        } else {
            Err(Error::ResolutionMismatch)
        }
    }
}

fn bracket(axis: &[f64], q: f64) -> (usize, f64) {
    let n = axis.len();
    if q <= axis[0] {
        return (0, 0.0);
    }
    if q >= axis[n - 1] {
        return (n - 2, 1.0);
    }
    let hi = axis.partition_point(|&v| v <= q);
    let lo = hi - 1;
    (lo, (q - axis[lo]) / (axis[hi] - axis[lo]))
}

/// Subdivides each knot interval uniformly, distributing roughly
/// `target_nodes - 1` intervals across cells proportionally to length.
fn grid_axis(knots: &[f64], target_nodes: usize) -> Vec<f64> {
    let cells = knots.len() - 1;
    let total = (target_nodes.max(cells + 1)) - 1;
    let span: f64 = knots.last().unwrap() - knots[0];
    // largest-remainder apportionment with at least one interval per cell
    let mut counts: Vec<usize> = Vec::with_capacity(cells);
    let mut fracs: Vec<(usize, f64)> = Vec::with_capacity(cells);
    let mut used = 0usize;
    for c in 0..cells {
        let ideal = total as f64 * (knots[c + 1] - knots[c]) / span;
        let base = (ideal.floor() as usize).max(1);
        counts.push(base);
        fracs.push((c, ideal - ideal.floor()));
        used += base;
    }
    if used < total {
        fracs.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        for k in 0..(total - used) {
            counts[fracs[k % cells].0] += 1;
        }
    }
    let mut axis = Vec::with_capacity(total + 1);
    axis.push(knots[0]);
    for c in 0..cells {
        let (a, b) = (knots[c], knots[c + 1]);
        let n = counts[c];
        for s in 1..=n {
            axis.push(if s == n { b } else { a + (b - a) * s as f64 / n as f64 });
        }
    }
    axis
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_for_uniform_net_is_uniform() {
        let net = Net::uniform(2, 2, Rect::unit()).unwrap();
        let (xs, ys) = SampledField::grid_for_net(&net, 9);
        assert_eq!(xs.len(), 9);
        for (i, &x) in xs.iter().enumerate() {
            assert!((x - i as f64 / 8.0).abs() < 1e-15);
        }
        assert_eq!(ys.len(), 9);
    }

    #[test]
    fn grid_includes_nonuniform_knots() {
        let net = Net::new(vec![0.0, 0.1, 0.35, 1.0], vec![0.0, 0.5, 1.0]).unwrap();
        let (xs, _) = SampledField::grid_for_net(&net, 33);
        for &k in net.xs() {
            assert!(xs.iter().any(|&v| (v - k).abs() < 1e-14), "missing knot {k}");
        }
        let field = SampledField::from_fn(xs, vec![0.0, 0.5, 1.0], |_, _| 0.0);
        field.aligned_with(&net).unwrap();
    }

    #[test]
    fn bilinear_midpoint_is_corner_mean() {
        let f = SampledField::from_fn(vec![0.0, 1.0], vec![0.0, 1.0], |x, y| 3.0 * x - y);
        let center = f.sample(0.5, 0.5);
        let mean = (f.value(0, 0) + f.value(1, 0) + f.value(0, 1) + f.value(1, 1)) / 4.0;
        assert!((center - mean).abs() < 1e-15);
    }

    #[test]
    fn sample_reproduces_nodes_and_clamps() {
        let f = SampledField::from_fn(
            vec![0.0, 0.25, 1.0],
            vec![0.0, 0.5, 1.0],
            |x, y| x * x + y,
        );
        assert_eq!(f.sample(0.25, 0.5), f.value(1, 1));
        assert_eq!(f.sample(-5.0, 2.0), f.value(0, 2));
    }
}
