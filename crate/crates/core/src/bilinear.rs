//! Bilinear fractal interpolation surfaces: knot data plus a scaling
//! lattice determine a surface through corner-bilinear base functions, with
//! a closed-form box-counting dimension in the balanced uniform case.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::BivFn;
use crate::ifs::{KnotLattice, SolveOutcome, SurfaceOrbit, VerticalMapFamily, DEFAULT_ORBIT_BUDGET};
use crate::net::{build_affine_maps, tau, Axis, Boundary, Net};

/// Interpolation values `z` and vertical scalings `s` on the knots of a net.
/// Every scaling entry must satisfy `|s| < 1`.
#[derive(Debug, Clone)]
pub struct BilinearData {
    pub z: KnotLattice,
    pub s: KnotLattice,
}

impl BilinearData {
    pub fn new(z: KnotLattice, s: KnotLattice) -> Result<Self> {
        if z.n() != s.n() || z.m() != s.m() {
            return Err(Error::ShapeMismatch {
                got_rows: s.m() + 1,
                got_cols: s.n() + 1,
                want_rows: z.m() + 1,
                want_cols: z.n() + 1,
            });
        }
        let worst = s.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if worst >= 1.0 {
            return Err(Error::ScaleNotContractive { sup: worst });
        }
        Ok(BilinearData { z, s })
    }
}

/// The bilinear function on the whole domain matching the lattice values at
/// the four outer corners of the net.
pub fn corner_bilinear(net: &Net, data: &KnotLattice) -> BivFn {
    let dom = net.domain();
    let (n, m) = (data.n(), data.m());
    let z00 = data.get(0, 0);
    let zn0 = data.get(n, 0);
    let z0m = data.get(0, m);
    let znm = data.get(n, m);
    Arc::new(move |x, y| {
        let u = (x - dom.x0) / dom.width();
        let v = (y - dom.y0) / dom.height();
        z00 * (1.0 - u) * (1.0 - v) + zn0 * u * (1.0 - v) + z0m * (1.0 - u) * v + znm * u * v
    })
}

/// Continuous function bilinear on each cell of the net with prescribed
/// knot values.
#[derive(Debug, Clone)]
pub struct PiecewiseBilinear {
    net: Net,
    data: KnotLattice,
}

impl PiecewiseBilinear {
    pub fn new(net: Net, data: KnotLattice) -> Result<Self> {
        if data.n() != net.n() || data.m() != net.m() {
            return Err(Error::ShapeMismatch {
                got_rows: data.m() + 1,
                got_cols: data.n() + 1,
                want_rows: net.m() + 1,
                want_cols: net.n() + 1,
            });
        }
        Ok(PiecewiseBilinear { net, data })
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let (i, j) = match self.net.locate_cell(x, y) {
            Ok(c) => c,
            // clamp outside evaluations to the boundary cell
            Err(_) => {
                let xs = self.net.xs();
                let ys = self.net.ys();
                let cx = x.clamp(xs[0], xs[self.net.n()]);
                let cy = y.clamp(ys[0], ys[self.net.m()]);
                self.net.locate_cell(cx, cy).expect("clamped point is in the domain")
            }
        };
        let xs = self.net.xs();
        let ys = self.net.ys();
        let u = ((x - xs[i - 1]) / (xs[i] - xs[i - 1])).clamp(0.0, 1.0);
        let v = ((y - ys[j - 1]) / (ys[j] - ys[j - 1])).clamp(0.0, 1.0);
        let d = &self.data;
        d.get(i - 1, j - 1) * (1.0 - u) * (1.0 - v)
            + d.get(i, j - 1) * u * (1.0 - v)
            + d.get(i - 1, j) * (1.0 - u) * v
            + d.get(i, j) * u * v
    }

    pub fn as_fn(&self) -> BivFn {
        let this = self.clone();
        Arc::new(move |x, y| this.eval(x, y))
    }
}

/// A bilinear fractal surface: the attractor family together with its net
/// and data.
pub struct BilinearSurface {
    net: Net,
    data: BilinearData,
    family: VerticalMapFamily,
    h: PiecewiseBilinear,
    s: PiecewiseBilinear,
    g: BivFn,
}

/// Builds the family `F_ij(x, y, z) = S(u_i x, v_j y) (z - g(x, y))
/// + h(u_i x, v_j y)` with `g` the corner bilinear of the data, `h` the
/// piecewise bilinear through the knot values and `S` the piecewise
/// bilinear through the scalings.
pub fn build_bilinear_fis(net: Net, data: BilinearData) -> Result<BilinearSurface> {
    let h = PiecewiseBilinear::new(net.clone(), data.z.clone())?;
    let s = PiecewiseBilinear::new(net.clone(), data.s.clone())?;
    let g = corner_bilinear(&net, &data.z);
    let umaps = build_affine_maps(&net, Axis::X);
    let vmaps = build_affine_maps(&net, Axis::Y);
    let (u, v) = (umaps.clone(), vmaps.clone());
    let (hc, sc, gc) = (h.clone(), s.clone(), g.clone());
    let eval = Arc::new(move |i: usize, j: usize, x: f64, y: f64, z: f64| {
        let ux = u.eval(i, x);
        let vy = v.eval(j, y);
        sc.eval(ux, vy) * (z - gc(x, y)) + hc.eval(ux, vy)
    });
    // |S| on a cell is maximized at a corner since S is bilinear there
    let lipschitz = data.s.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let family = VerticalMapFamily::new(net.clone(), umaps, vmaps, eval, lipschitz);
    Ok(BilinearSurface { net, data, family, h, s, g })
}

impl BilinearSurface {
    pub fn family(&self) -> &VerticalMapFamily {
        &self.family
    }

    pub fn net(&self) -> &Net {
        &self.net
    }

    pub fn data(&self) -> &BilinearData {
        &self.data
    }

    pub fn knot_interpolant(&self) -> &PiecewiseBilinear {
        &self.h
    }

    pub fn scaling_interpolant(&self) -> &PiecewiseBilinear {
        &self.s
    }

    pub fn corner_plane(&self) -> &BivFn {
        &self.g
    }

    pub fn solve_on_res(&self, grid_res: usize, tol: f64) -> Result<SolveOutcome> {
        let (xs, ys) = crate::field::SampledField::grid_for_net(&self.net, grid_res);
        let h = &self.h;
        let init = crate::field::SampledField::from_fn(xs, ys, |x, y| h.eval(x, y));
        crate::ifs::fixed_point_solve(&self.family, init, tol, None)
    }

    pub fn orbit(&self, depth: usize, budget: Option<usize>) -> Result<SurfaceOrbit> {
        crate::ifs::orbit_evaluate(
            &self.family,
            &self.data.z,
            depth,
            budget.unwrap_or(DEFAULT_ORBIT_BUDGET),
        )
    }
}

/// Largest deviation, over cells and corner pairs, between the two reads of
/// a shared knot value through adjacent vertical maps. Zero (up to rounding)
/// by construction; exposed as a diagnostic.
pub fn steadiness_defect(surface: &BilinearSurface) -> f64 {
    let net = &surface.net;
    let z = &surface.data.z;
    let (xs, ys) = (net.xs(), net.ys());
    let (n, m) = (net.n(), net.m());
    let mut worst = 0.0f64;
    for j in 1..=m {
        for i in 1..=n {
            for (bx, cx, kx) in [(Boundary::Lower, xs[0], 0), (Boundary::Upper, xs[n], n)] {
                for (by, cy, ky) in [(Boundary::Lower, ys[0], 0), (Boundary::Upper, ys[m], m)] {
                    let got = surface.family.apply(i, j, cx, cy, z.get(kx, ky));
                    let want = z.get(tau(i, bx), tau(j, by));
                    worst = worst.max((got - want).abs());
                }
            }
        }
    }
    worst
}

/// The balance constant of a uniform square net: the common value of the
/// four corner-weighted scaling sums. Errors when the sums disagree beyond
/// `1e-10` or the net is not uniform square.
pub fn gamma_constant(surface: &BilinearSurface) -> Result<f64> {
    let net = &surface.net;
    let (n, m) = (net.n(), net.m());
    if n != m {
        return Err(Error::HypothesisUnmet {
            reason: format!("net is {n} x {m}; the dimension formula needs a square net"),
        });
    }
    if !is_uniform(net.xs()) || !is_uniform(net.ys()) {
        return Err(Error::HypothesisUnmet { reason: "net knots are not uniformly spaced".into() });
    }
    let s = &surface.data.s;
    // the four corner-weighted sums of |S| over the matched knots
    let mut sums = [0.0f64; 4];
    for (slot, (bx, by)) in [
        (Boundary::Lower, Boundary::Lower),
        (Boundary::Upper, Boundary::Lower),
        (Boundary::Lower, Boundary::Upper),
        (Boundary::Upper, Boundary::Upper),
    ]
    .into_iter()
    .enumerate()
    {
        let mut total = 0.0;
        for j in 1..=m {
            for i in 1..=n {
                total += s.get(tau(i, bx), tau(j, by)).abs();
            }
        }
        sums[slot] = total;
    }
    let lo = sums.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = sums.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo > 1e-10 {
        return Err(Error::UnbalancedScaling { sums });
    }
    Ok(sums[0])
}

/// True when the knot data already lies on the corner bilinear of the net,
/// within `1e-12`; the attractor is then a smooth bilinear patch.
pub fn co_bilinear_check(surface: &BilinearSurface) -> bool {
    let g = &surface.g;
    let z = &surface.data.z;
    let (xs, ys) = (surface.net.xs(), surface.net.ys());
    let mut worst = 0.0f64;
    for (j, &y) in ys.iter().enumerate() {
        for (i, &x) in xs.iter().enumerate() {
            worst = worst.max((z.get(i, j) - g(x, y)).abs());
        }
    }
    worst <= 1e-12
}

/// Outcome of the closed-form box-counting dimension of a bilinear surface.
#[derive(Debug, Clone, PartialEq)]
pub enum DimensionVerdict {
    /// `1 + log(gamma) / log(N)`: the strictly fractal regime.
    Fractal { dimension: f64, gamma: f64 },
    /// The surface is smooth enough that the dimension is 2.
    Smooth { gamma: f64 },
}

impl DimensionVerdict {
    pub fn dimension(&self) -> f64 {
        match self {
            DimensionVerdict::Fractal { dimension, .. } => *dimension,
            DimensionVerdict::Smooth { .. } => 2.0,
        }
    }
}

/// Closed-form box-counting dimension for a balanced bilinear surface on a
/// uniform square net: `1 + log(gamma)/log(N)` when `gamma > N` and the
/// data is not co-bilinear, otherwise 2.
pub fn theoretical_box_dimension(surface: &BilinearSurface) -> Result<DimensionVerdict> {
    let gamma = gamma_constant(surface)?;
    let n = surface.net.n() as f64;
    if gamma > n && !co_bilinear_check(surface) {
        Ok(DimensionVerdict::Fractal { dimension: 1.0 + gamma.ln() / n.ln(), gamma })
    } else {
        Ok(DimensionVerdict::Smooth { gamma })
    }
}

fn is_uniform(knots: &[f64]) -> bool {
    let h = knots[1] - knots[0];
    knots.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-12 * h.abs().max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Rect;
    use crate::ifs::{verify_corner_conditions, verify_matching_conditions};

    fn net3() -> Net {
        Net::uniform(2, 2, Rect::unit()).unwrap()
    }

    fn lattice3(rows: [[f64; 3]; 3]) -> KnotLattice {
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        KnotLattice::new(2, 2, flat).unwrap()
    }

    fn sample_surface(s_const: f64) -> BilinearSurface {
        let z = lattice3([[0.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 0.0]]);
        let s = lattice3([[s_const; 3]; 3]);
        build_bilinear_fis(net3(), BilinearData::new(z, s).unwrap()).unwrap()
    }

    #[test]
    fn data_shape_and_contraction_guards() {
        let z = lattice3([[0.0; 3]; 3]);
        let s_bad = KnotLattice::new(2, 1, vec![0.5; 6]).unwrap();
        assert!(matches!(
            BilinearData::new(z.clone(), s_bad),
            Err(Error::ShapeMismatch { .. })
        ));
        let s_big = lattice3([[1.0; 3]; 3]);
        assert!(matches!(
            BilinearData::new(z, s_big),
            Err(Error::ScaleNotContractive { .. })
        ));
    }

    #[test]
    fn corner_bilinear_matches_corners_and_center() {
        let z = lattice3([[1.0, 9.0, 2.0], [9.0, 9.0, 9.0], [3.0, 9.0, 4.0]]);
        let g = corner_bilinear(&net3(), &z);
        assert_eq!(g(0.0, 0.0), 1.0);
        assert_eq!(g(1.0, 0.0), 2.0);
        assert_eq!(g(0.0, 1.0), 3.0);
        assert_eq!(g(1.0, 1.0), 4.0);
        assert!((g(0.5, 0.5) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn piecewise_bilinear_reproduces_knots() {
        let z = lattice3([[0.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 0.0]]);
        let pb = PiecewiseBilinear::new(net3(), z.clone()).unwrap();
        let net = net3();
        for (j, &y) in net.ys().iter().enumerate() {
            for (i, &x) in net.xs().iter().enumerate() {
                assert_eq!(pb.eval(x, y), z.get(i, j));
            }
        }
        // bilinear within a cell: midpoint of cell (1,1)
        assert!((pb.eval(0.25, 0.25) - (0.0 + 1.0 + 1.0 + 3.0) / 4.0).abs() < 1e-15);
    }

    #[test]
    fn family_is_conformant() {
        let surface = sample_surface(0.4);
        let corners = verify_corner_conditions(surface.family(), &surface.data().z, 1e-12);
        assert!(corners.pass, "{corners:?}");
        let matching = verify_matching_conditions(surface.family(), 16, (-1.0, 4.0), 1e-12);
        assert!(matching.pass, "{matching:?}");
        assert!(steadiness_defect(&surface) <= 1e-12);
    }

    #[test]
    fn attractor_interpolates_knot_values() {
        let surface = sample_surface(0.4);
        let out = surface.solve_on_res(129, 1e-10).unwrap();
        let net = net3();
        let z = &surface.data().z;
        for (j, &y) in net.ys().iter().enumerate() {
            for (i, &x) in net.xs().iter().enumerate() {
                assert!((out.field.sample(x, y) - z.get(i, j)).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn constant_scaling_is_balanced() {
        let surface = sample_surface(0.7);
        let gamma = gamma_constant(&surface).unwrap();
        // one |s| = 0.7 contribution per cell, 4 cells
        assert!((gamma - 4.0 * 0.7).abs() < 1e-12);
    }

    #[test]
    fn unbalanced_scaling_is_rejected() {
        let z = lattice3([[0.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 0.0]]);
        let mut s = lattice3([[0.3; 3]; 3]);
        s.set(1, 1, 0.9);
        // the center knot appears in all four sums equally, so go off-center
        s.set(0, 0, 0.8);
        let surface = build_bilinear_fis(net3(), BilinearData::new(z, s).unwrap()).unwrap();
        assert!(matches!(gamma_constant(&surface), Err(Error::UnbalancedScaling { .. })));
    }

    #[test]
    fn dimension_verdicts() {
        // gamma = 2 * 0.9 = 1.8 < N = 2 -> smooth
        let small = sample_surface(0.45);
        assert_eq!(theoretical_box_dimension(&small).unwrap().dimension(), 2.0);
        // gamma = 2 * 0.9 ... choose s = 0.85 -> gamma = 3.4 > 2
        let big = sample_surface(0.85);
        match theoretical_box_dimension(&big).unwrap() {
            DimensionVerdict::Fractal { dimension, gamma } => {
                assert!((gamma - 3.4).abs() < 1e-12);
                assert!((dimension - (1.0 + 3.4f64.ln() / 2.0f64.ln())).abs() < 1e-12);
            }
            other => panic!("expected fractal verdict, got {other:?}"),
        }
    }

    #[test]
    fn co_bilinear_data_is_smooth_even_with_large_gamma() {
        // data on the corner plane z = x + y
        let z = lattice3([[0.0, 0.5, 1.0], [0.5, 1.0, 1.5], [1.0, 1.5, 2.0]]);
        let s = lattice3([[0.9; 3]; 3]);
        let surface = build_bilinear_fis(net3(), BilinearData::new(z, s).unwrap()).unwrap();
        assert!(co_bilinear_check(&surface));
        assert_eq!(theoretical_box_dimension(&surface).unwrap().dimension(), 2.0);
    }

    #[test]
    fn rectangular_net_rejected_for_dimension() {
        let net = Net::uniform(2, 3, Rect::unit()).unwrap();
        let z = KnotLattice::new(2, 3, vec![0.0; 12]).unwrap();
        let s = KnotLattice::new(2, 3, vec![0.5; 12]).unwrap();
        let surface = build_bilinear_fis(net, BilinearData::new(z, s).unwrap()).unwrap();
        assert!(matches!(gamma_constant(&surface), Err(Error::HypothesisUnmet { .. })));
    }
}
