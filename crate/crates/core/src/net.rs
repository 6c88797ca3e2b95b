//! Rectangular nets and the horizontal contraction maps.
//!
//! A net is the partition `x_0 < x_1 < ... < x_N`, `y_0 < y_1 < ... < y_M`
//! of a rectangle. Each axis carries a family of affine contractions that
//! map the whole axis interval onto one subinterval, with the endpoint
//! orientation alternating between odd and even interval indices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Rect;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Axis::X => write!(f, "x"),
            Axis::Y => write!(f, "y"),
        }
    }
}

/// Endpoint label for the index map `tau`: the lower knot (index 0) or the
/// upper knot (index N on the x axis, M on the y axis).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Lower,
    Upper,
}

/// Relabeling of interval indices to knot indices at the axis endpoints.
///
/// `tau(i, Lower) = i - 1` and `tau(i, Upper) = i` for odd `i`; the two
/// swap for even `i`. The output always lands in `{i - 1, i}`.
pub fn tau(i: usize, boundary: Boundary) -> usize {
    debug_assert!(i >= 1);
    let odd = i % 2 == 1;
    match (boundary, odd) {
        (Boundary::Lower, true) | (Boundary::Upper, false) => i - 1,
        (Boundary::Upper, true) | (Boundary::Lower, false) => i,
    }
}

/// A strictly increasing pair of knot vectors defining the rectangular
/// partition of the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Net {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl Net {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        for (axis, knots) in [(Axis::X, &xs), (Axis::Y, &ys)] {
            for (idx, pair) in knots.windows(2).enumerate() {
                if !(pair[0] < pair[1]) {
                    return Err(Error::NonIncreasingKnots { axis, index: idx });
                }
            }
        }
        if xs.len() < 3 || ys.len() < 3 {
            return Err(Error::TooFewIntervals {
                n: xs.len().saturating_sub(1),
                m: ys.len().saturating_sub(1),
            });
        }
        Ok(Net { xs, ys })
    }

    /// Uniform net with `n` x-intervals and `m` y-intervals over `domain`.
    pub fn uniform(n: usize, m: usize, domain: Rect) -> Result<Self> {
        let xs = (0..=n)
            .map(|i| domain.x0 + (domain.x1 - domain.x0) * i as f64 / n.max(1) as f64)
            .collect();
        let ys = (0..=m)
            .map(|j| domain.y0 + (domain.y1 - domain.y0) * j as f64 / m.max(1) as f64)
            .collect();
        Net::new(xs, ys)
    }

    /// Number of x-intervals (N).
    pub fn n(&self) -> usize {
        self.xs.len() - 1
    }

    /// Number of y-intervals (M).
    pub fn m(&self) -> usize {
        self.ys.len() - 1
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn domain(&self) -> Rect {
        Rect {
            x0: self.xs[0],
            x1: *self.xs.last().unwrap(),
            y0: self.ys[0],
            y1: *self.ys.last().unwrap(),
        }
    }

    /// Cell indices `(i, j)`, 1-based, of the cell containing `point`.
    ///
    /// Cells are half-open `[x_{i-1}, x_i)` with the last cell closed; a
    /// point on an interior grid line belongs to the cell on its right.
    pub fn locate_cell(&self, x: f64, y: f64) -> Result<(usize, usize)> {
        let i = locate_axis(&self.xs, x).ok_or(Error::OutOfDomain { x, y })?;
        let j = locate_axis(&self.ys, y).ok_or(Error::OutOfDomain { x, y })?;
        Ok((i, j))
    }
}

fn locate_axis(knots: &[f64], q: f64) -> Option<usize> {
    let n = knots.len() - 1;
    if q < knots[0] || q > knots[n] {
        return None;
    }
    if q == knots[n] {
        return Some(n);
    }
    // first knot strictly greater than q is the right end of the cell
    let hi = knots.partition_point(|&v| v <= q);
    Some(hi)
}

/// One affine map `x -> a x + b` with exact coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub a: f64,
    pub b: f64,
}

impl AffineMap {
    pub fn eval(&self, x: f64) -> f64 {
        self.a * x + self.b
    }

    pub fn inverse(&self, x: f64) -> f64 {
        (x - self.b) / self.a
    }
}

/// The per-axis family `u_1, ..., u_N` (or `v_1, ..., v_M`), each mapping
/// the full axis interval onto one subinterval with parity-dependent
/// orientation.
#[derive(Debug, Clone)]
pub struct AffineMaps {
    axis: Axis,
    maps: Vec<AffineMap>,
}

impl AffineMaps {
    /// Interval count along this axis.
    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    /// The map for interval `i` (1-based).
    pub fn map(&self, i: usize) -> &AffineMap {
        &self.maps[i - 1]
    }

    pub fn eval(&self, i: usize, x: f64) -> f64 {
        self.map(i).eval(x)
    }

    pub fn inverse(&self, i: usize, x: f64) -> f64 {
        self.map(i).inverse(x)
    }

    /// Largest contraction factor `max_i |a_i|`; always < 1 on a valid net.
    pub fn max_contraction(&self) -> f64 {
        self.maps.iter().map(|m| m.a.abs()).fold(0.0, f64::max)
    }
}

/// Solves the parity-dependent endpoint conditions for each interval.
///
/// Odd `i` maps the axis endpoints `(lo, hi)` to `(k_{i-1}, k_i)`; even `i`
/// reverses the orientation.
pub fn build_affine_maps(net: &Net, axis: Axis) -> AffineMaps {
    let knots = match axis {
        Axis::X => net.xs(),
        Axis::Y => net.ys(),
    };
    let lo = knots[0];
    let hi = *knots.last().unwrap();
    let span = hi - lo;
    let maps = (1..knots.len())
        .map(|i| {
            let (from, to) = if i % 2 == 1 {
                (knots[i - 1], knots[i])
            } else {
                (knots[i], knots[i - 1])
            };
            let a = (to - from) / span;
            let b = from - a * lo;
            AffineMap { a, b }
        })
        .collect();
    AffineMaps { axis, maps }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_net(n: usize, m: usize) -> Net {
        Net::uniform(n, m, Rect::unit()).unwrap()
    }

    #[test]
    fn minimal_valid_net() {
        let net = Net::new(vec![0.0, 0.5, 1.0], vec![0.0, 0.5, 1.0]).unwrap();
        assert_eq!(net.n(), 2);
        assert_eq!(net.m(), 2);
    }

    #[test]
    fn duplicate_knot_rejected() {
        let err = Net::new(vec![0.0, 0.0, 1.0], vec![0.0, 1.0, 2.0]).unwrap_err();
        assert!(matches!(err, Error::NonIncreasingKnots { axis: Axis::X, index: 0 }));
    }

    #[test]
    fn too_few_intervals_rejected() {
        let err = Net::new(vec![0.0, 1.0], vec![0.0, 0.5, 1.0]).unwrap_err();
        assert!(matches!(err, Error::TooFewIntervals { n: 1, m: 2 }));
    }

    #[test]
    fn uniform_two_interval_coefficients() {
        let net = unit_net(2, 2);
        let maps = build_affine_maps(&net, Axis::X);
        assert_eq!(maps.map(1).a, 0.5);
        assert_eq!(maps.map(1).b, 0.0);
        assert_eq!(maps.map(2).a, -0.5);
        assert_eq!(maps.map(2).b, 1.0);
    }

    #[test]
    fn nonuniform_coefficients_solve_endpoint_system() {
        let net = Net::new(vec![0.0, 0.25, 1.0], vec![0.0, 0.5, 1.0]).unwrap();
        let maps = build_affine_maps(&net, Axis::X);
        assert_eq!(maps.map(1).a, 0.25);
        assert_eq!(maps.map(1).b, 0.0);
        // even interval: u_2(0) = x_2 = 1, u_2(1) = x_1 = 0.25
        assert_eq!(maps.map(2).a, -0.75);
        assert_eq!(maps.map(2).b, 1.0);
    }

    #[test]
    fn contraction_below_one() {
        let net = Net::new(vec![0.0, 0.1, 0.9, 1.0], vec![0.0, 0.4, 1.0]).unwrap();
        for axis in [Axis::X, Axis::Y] {
            assert!(build_affine_maps(&net, axis).max_contraction() < 1.0);
        }
    }

    #[test]
    fn tau_examples() {
        use Boundary::*;
        assert_eq!(tau(1, Lower), 0);
        assert_eq!(tau(1, Upper), 1);
        assert_eq!(tau(2, Lower), 2);
        assert_eq!(tau(2, Upper), 1);
        assert_eq!(tau(3, Lower), 2);
        assert_eq!(tau(3, Upper), 3);
    }

    #[test]
    fn locate_cell_examples() {
        let net = unit_net(2, 2);
        assert_eq!(net.locate_cell(0.3, 0.7).unwrap(), (1, 2));
        assert_eq!(net.locate_cell(0.5, 0.5).unwrap(), (2, 2));
        assert_eq!(net.locate_cell(1.0, 1.0).unwrap(), (2, 2));
        assert!(matches!(
            net.locate_cell(1.5, 0.5),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn shared_inverse_at_interior_knots() {
        let net = Net::new(vec![0.0, 0.2, 0.7, 1.0], vec![0.0, 0.5, 1.0]).unwrap();
        let maps = build_affine_maps(&net, Axis::X);
        for i in 1..net.n() {
            let xi = net.xs()[i];
            let left = maps.inverse(i, xi);
            let right = maps.inverse(i + 1, xi);
            assert!((left - right).abs() < 1e-12, "i={i}: {left} vs {right}");
            let expected = if i % 2 == 1 { 1.0 } else { 0.0 };
            assert!((left - expected).abs() < 1e-12);
        }
    }

    proptest::proptest! {
        #[test]
        fn endpoint_orientation_holds(knots in proptest::collection::vec(0.01f64..1.0, 2..8)) {
            // build strictly increasing knots from positive gaps
            let mut xs = vec![0.0];
            for g in &knots {
                xs.push(xs.last().unwrap() + g);
            }
            if xs.len() < 3 { return Ok(()); }
            let net = Net::new(xs.clone(), vec![0.0, 0.5, 1.0]).unwrap();
            let maps = build_affine_maps(&net, Axis::X);
            let lo = xs[0];
            let hi = *xs.last().unwrap();
            for i in 1..xs.len() {
                let (img_lo, img_hi) = (maps.eval(i, lo), maps.eval(i, hi));
                let (want_lo, want_hi) = if i % 2 == 1 {
                    (xs[i - 1], xs[i])
                } else {
                    (xs[i], xs[i - 1])
                };
                proptest::prop_assert!((img_lo - want_lo).abs() < 1e-10 * hi.max(1.0));
                proptest::prop_assert!((img_hi - want_hi).abs() < 1e-10 * hi.max(1.0));
                proptest::prop_assert!(maps.map(i).a.abs() < 1.0);
            }
        }

        #[test]
        fn locate_cell_total_and_containing(x in 0.0f64..=1.0, y in 0.0f64..=1.0) {
            let net = unit_net(3, 4);
            let (i, j) = net.locate_cell(x, y).unwrap();
            proptest::prop_assert!(net.xs()[i - 1] <= x && x <= net.xs()[i]);
            proptest::prop_assert!(net.ys()[j - 1] <= y && y <= net.ys()[j]);
        }
    }
}
