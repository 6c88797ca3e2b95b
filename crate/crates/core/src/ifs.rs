//! Generic fractal-surface machinery: the vertical map family, conformance
//! checks, the pullback (Read-Bajraktarevic) operator on grids, a grid
//! fixed-point solver, and exact forward-orbit evaluation of the attractor.
//!
//! Two engines coexist on purpose. The forward orbit produces exact
//! attractor values on an irregular point cloud (the self-referential
//! equation only gives exact values on forward images of the knots); the
//! grid solver produces regular output for norms and export at the cost of
//! a bilinear interpolation error proportional to the mesh width.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::SampledField;
use crate::net::{tau, AffineMaps, Boundary, Net};

/// Values on the `(N+1) x (M+1)` knot lattice, row-major in `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotLattice {
    n: usize,
    m: usize,
    values: Vec<f64>,
}

impl KnotLattice {
    pub fn new(n: usize, m: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != (n + 1) * (m + 1) {
            return Err(Error::ShapeMismatch {
                got_rows: values.len(),
                got_cols: 1,
                want_rows: n + 1,
                want_cols: m + 1,
            });
        }
        Ok(KnotLattice { n, m, values })
    }

    /// Rows indexed by `j` (outer), columns by `i` (inner).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len().saturating_sub(1);
        let n = rows.first().map(|r| r.len()).unwrap_or(0).saturating_sub(1);
        for r in rows {
            if r.len() != n + 1 {
                return Err(Error::ShapeMismatch {
                    got_rows: rows.len(),
                    got_cols: r.len(),
                    want_rows: m + 1,
                    want_cols: n + 1,
                });
            }
        }
        let values = rows.iter().flatten().copied().collect();
        KnotLattice::new(n, m, values)
    }

    pub fn sample_fn(net: &Net, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity((net.n() + 1) * (net.m() + 1));
        for &y in net.ys() {
            for &x in net.xs() {
                values.push(f(x, y));
            }
        }
        KnotLattice { n: net.n(), m: net.m(), values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * (self.n + 1) + i]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[j * (self.n + 1) + i] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

type VerticalEval = Arc<dyn Fn(usize, usize, f64, f64, f64) -> f64 + Send + Sync>;

/// The z-direction maps `F_ij` together with the horizontal families they
/// ride on. `eval(i, j, x, y, z)` takes 1-based cell indices and a point of
/// the full domain.
#[derive(Clone)]
pub struct VerticalMapFamily {
    net: Net,
    umaps: AffineMaps,
    vmaps: AffineMaps,
    eval: VerticalEval,
    lipschitz: f64,
}

impl VerticalMapFamily {
    pub fn new(
        net: Net,
        umaps: AffineMaps,
        vmaps: AffineMaps,
        eval: VerticalEval,
        lipschitz: f64,
    ) -> Self {
        debug_assert!(lipschitz < 1.0);
        VerticalMapFamily { net, umaps, vmaps, eval, lipschitz }
    }

    pub fn net(&self) -> &Net {
        &self.net
    }

    pub fn umaps(&self) -> &AffineMaps {
        &self.umaps
    }

    pub fn vmaps(&self) -> &AffineMaps {
        &self.vmaps
    }

    /// Uniform z-contraction bound `max gamma_ij`.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn apply(&self, i: usize, j: usize, x: f64, y: f64, z: f64) -> f64 {
        (self.eval)(i, j, x, y, z)
    }

    pub fn eval_fn(&self) -> VerticalEval {
        self.eval.clone()
    }
}

impl std::fmt::Debug for VerticalMapFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VerticalMapFamily")
            .field("n", &self.net.n())
            .field("m", &self.net.m())
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

/// Worst defects found by a conformance check, with the location of the
/// worst offender for diagnostics.
#[derive(Debug, Clone)]
pub struct ConformanceReport {
    pub max_corner_defect: f64,
    pub max_matching_defect: f64,
    pub worst_corner: Option<(usize, usize, usize, usize)>,
    pub worst_edge: Option<(usize, usize)>,
    pub tolerance: f64,
    pub pass: bool,
}

impl ConformanceReport {
    fn from_defects(
        corner: f64,
        matching: f64,
        worst_corner: Option<(usize, usize, usize, usize)>,
        worst_edge: Option<(usize, usize)>,
        tol: f64,
    ) -> Self {
        ConformanceReport {
            max_corner_defect: corner,
            max_matching_defect: matching,
            worst_corner,
            worst_edge,
            tolerance: tol,
            pass: corner <= tol && matching <= tol,
        }
    }

    /// Merge two partial reports (corner-only and matching-only).
    pub fn merge(&self, other: &ConformanceReport) -> ConformanceReport {
        ConformanceReport::from_defects(
            self.max_corner_defect.max(other.max_corner_defect),
            self.max_matching_defect.max(other.max_matching_defect),
            self.worst_corner.or(other.worst_corner),
            self.worst_edge.or(other.worst_edge),
            self.tolerance.min(other.tolerance),
        )
    }
}

/// Checks `F_ij(x_k, y_l, z_kl) = z_{tau(i,k), tau(j,l)}` at the four
/// domain corner pairs of every cell.
pub fn verify_corner_conditions(
    family: &VerticalMapFamily,
    data: &KnotLattice,
    tol: f64,
) -> ConformanceReport {
    let net = family.net();
    let (n, m) = (net.n(), net.m());
    let mut worst = 0.0f64;
    let mut at = None;
    for i in 1..=n {
        for j in 1..=m {
            for (k_idx, kb) in [(0usize, Boundary::Lower), (n, Boundary::Upper)] {
                for (l_idx, lb) in [(0usize, Boundary::Lower), (m, Boundary::Upper)] {
                    let x = net.xs()[k_idx];
                    let y = net.ys()[l_idx];
                    let z = data.get(k_idx, l_idx);
                    let image = family.apply(i, j, x, y, z);
                    let want = data.get(tau(i, kb), tau(j, lb));
                    let defect = (image - want).abs();
                    if defect > worst {
                        worst = defect;
                        at = Some((i, j, k_idx, l_idx));
                    }
                }
            }
        }
    }
    ConformanceReport::from_defects(worst, 0.0, at, None, tol)
}

/// Checks the interior matching conditions by sampling each shared edge.
///
/// For interior `i` both cells must agree at `x* = u_i^{-1}(x_i)` for all
/// `(y, z)`; the vertical maps in scope are affine in `z`, but the full
/// `z_range` is sampled anyway.
pub fn verify_matching_conditions(
    family: &VerticalMapFamily,
    n_samples: usize,
    z_range: (f64, f64),
    tol: f64,
) -> ConformanceReport {
    assert!(n_samples >= 2);
    let net = family.net();
    let (n, m) = (net.n(), net.m());
    let dom = net.domain();
    let mut worst = 0.0f64;
    let mut at = None;
    let steps = |a: f64, b: f64| {
        (0..n_samples).map(move |s| a + (b - a) * s as f64 / (n_samples - 1) as f64)
    };
    // vertical interior lines
    for i in 1..n {
        let x_star = family.umaps().inverse(i, net.xs()[i]);
        for j in 1..=m {
            for y in steps(dom.y0, dom.y1) {
                for z in steps(z_range.0, z_range.1) {
                    let d = (family.apply(i, j, x_star, y, z)
                        - family.apply(i + 1, j, x_star, y, z))
                    .abs();
                    if d > worst {
                        worst = d;
                        at = Some((i, j));
                    }
                }
            }
        }
    }
    // horizontal interior lines
    for j in 1..m {
        let y_star = family.vmaps().inverse(j, net.ys()[j]);
        for i in 1..=n {
            for x in steps(dom.x0, dom.x1) {
                for z in steps(z_range.0, z_range.1) {
                    let d = (family.apply(i, j, x, y_star, z)
                        - family.apply(i, j + 1, x, y_star, z))
                    .abs();
                    if d > worst {
                        worst = d;
                        at = Some((i, j));
                    }
                }
            }
        }
    }
    ConformanceReport::from_defects(0.0, worst, None, at, tol)
}

/// One pullback sweep: `(Tg)(x, y) = F_ij(u_i^{-1}x, v_j^{-1}y, g(...))`
/// on every grid node, preimage values read from `g` bilinearly.
pub fn rb_apply(family: &VerticalMapFamily, g: &SampledField) -> Result<SampledField> {
    g.aligned_with(family.net())?;
    let net = family.net();
    let xs = g.xs().to_vec();
    let ys = g.ys().to_vec();
    let nx = xs.len();
    let values: Vec<f64> = ys
        .par_iter()
        .flat_map_iter(|&y| {
            let xs = &xs;
            xs.iter().map(move |&x| {
                let (i, j) = net.locate_cell(x, y).expect("grid node inside domain");
                let px = family.umaps().inverse(i, x);
                let py = family.vmaps().inverse(j, y);
                let z = g.sample(px, py);
                family.apply(i, j, px, py, z)
            })
        })
        .collect();
    debug_assert_eq!(values.len(), nx * ys.len());
    Ok(SampledField::from_values(xs, ys, values))
}

/// Result of a converged grid solve.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub field: SampledField,
    pub iterations: usize,
    pub residual: f64,
}

/// Iterates the pullback operator until the sup-norm residual drops
/// below `tol`.
///
/// `max_iter` defaults to the geometric-contraction estimate
/// `ceil(log(tol / (1 + r0)) / log(max gamma)) + 16`.
pub fn fixed_point_solve(
    family: &VerticalMapFamily,
    init: SampledField,
    tol: f64,
    max_iter: Option<usize>,
) -> Result<SolveOutcome> {
    assert!(tol > 0.0);
    let mut g = init;
    let mut next = rb_apply(family, &g)?;
    let mut residual = g.sup_distance(&next);
    let cap = max_iter.unwrap_or_else(|| {
        let q = family.lipschitz().clamp(1e-16, 1.0 - 1e-12);
        let est = (tol / (1.0 + residual)).ln() / q.ln();
        est.ceil().max(0.0) as usize + 16
    });
    let mut iterations = 1;
    while residual > tol {
        if iterations >= cap {
            return Err(Error::MaxIterExceeded {
                field: Box::new(next),
                iterations,
                residual,
            });
        }
        g = next;
        next = rb_apply(family, &g)?;
        residual = g.sup_distance(&next);
        iterations += 1;
    }
    Ok(SolveOutcome { field: next, iterations, residual })
}

/// A point of the attractor with its exact value, the cell that produced
/// it, and a link to the preimage it was generated from.
#[derive(Debug, Clone, Copy)]
pub struct OrbitPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub cell: (usize, usize),
    pub parent: Option<usize>,
}

/// Forward orbit of the knot set under the IFS, to a given depth.
#[derive(Debug, Clone)]
pub struct SurfaceOrbit {
    pub points: Vec<OrbitPoint>,
    pub depth: usize,
}

pub const DEFAULT_ORBIT_BUDGET: usize = 2_000_000;

/// Pushes the knot triples forward through every `W_ij` up to `depth`
/// generations. All returned values are exact attractor values.
pub fn orbit_evaluate(
    family: &VerticalMapFamily,
    seed: &KnotLattice,
    depth: usize,
    budget: usize,
) -> Result<SurfaceOrbit> {
    let net = family.net();
    let (n, m) = (net.n(), net.m());
    let mut points: Vec<OrbitPoint> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let quant = {
        let dom = net.domain();
        let scale = dom.width().max(dom.height());
        move |x: f64, y: f64| {
            (
                (x / scale * 4e12).round() as i64,
                (y / scale * 4e12).round() as i64,
            )
        }
    };
    for l in 0..=m {
        for k in 0..=n {
            let p = OrbitPoint {
                x: net.xs()[k],
                y: net.ys()[l],
                z: seed.get(k, l),
                cell: (0, 0),
                parent: None,
            };
            seen.insert(quant(p.x, p.y));
            points.push(p);
        }
    }
    let mut frontier: Vec<usize> = (0..points.len()).collect();
    for d in 1..=depth {
        let mut next_frontier = Vec::with_capacity(frontier.len() * n * m);
        for &idx in &frontier {
            let p = points[idx];
            for i in 1..=n {
                for j in 1..=m {
                    let x = family.umaps().eval(i, p.x);
                    let y = family.vmaps().eval(j, p.y);
                    let z = family.apply(i, j, p.x, p.y, p.z);
                    if !seen.insert(quant(x, y)) {
                        continue;
                    }
                    if points.len() >= budget {
                        return Err(Error::PointBudgetExceeded { budget, depth: d });
                    }
                    next_frontier.push(points.len());
                    points.push(OrbitPoint { x, y, z, cell: (i, j), parent: Some(idx) });
                }
            }
        }
        frontier = next_frontier;
    }
    Ok(SurfaceOrbit { points, depth })
}

impl SurfaceOrbit {
    /// Re-evaluates the self-referential equation at every non-seed point:
    /// the cell is re-derived from the point location, the preimage is the
    /// stored parent. Returns the largest residual.
    pub fn max_residual(&self, family: &VerticalMapFamily) -> f64 {
        let net = family.net();
        self.points
            .iter()
            .filter_map(|p| {
                let parent = p.parent?;
                let q = &self.points[parent];
                let (i, j) = net.locate_cell(p.x, p.y).expect("orbit point inside domain");
                let px = family.umaps().inverse(i, p.x);
                let py = family.vmaps().inverse(j, p.y);
                debug_assert!((px - q.x).abs() < 1e-9 && (py - q.y).abs() < 1e-9);
                Some((p.z - family.apply(i, j, px, py, q.z)).abs())
            })
            .fold(0.0, f64::max)
    }

    pub fn non_seed_count(&self) -> usize {
        self.points.iter().filter(|p| p.parent.is_some()).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Rect;
    use crate::net::{build_affine_maps, Axis};

    /// z-independent family whose attractor is exactly f: F_ij(x,y,z) =
    /// f(u_i(x), v_j(y)). Mirrors a scale function that is identically 0.
    fn plain_family(net: &Net, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> VerticalMapFamily {
        let umaps = build_affine_maps(net, Axis::X);
        let vmaps = build_affine_maps(net, Axis::Y);
        let (u, v) = (umaps.clone(), vmaps.clone());
        let eval: VerticalEval =
            Arc::new(move |i, j, x, y, _z| f(u.eval(i, x), v.eval(j, y)));
        VerticalMapFamily::new(net.clone(), umaps, vmaps, eval, 0.0)
    }

    /// Family with uniform vertical scale s: F_ij(x,y,z) = s z +
    /// f(u_i x, v_j y) (1 - s). Its attractor is f when f is built from
    /// values matching at knots -- used only for contraction measurements.
    fn scaled_family(net: &Net, s: f64) -> VerticalMapFamily {
        let umaps = build_affine_maps(net, Axis::X);
        let vmaps = build_affine_maps(net, Axis::Y);
        let (u, v) = (umaps.clone(), vmaps.clone());
        let eval: VerticalEval = Arc::new(move |i, j, x, y, z| {
            let (ux, vy) = (u.eval(i, x), v.eval(j, y));
            s * z + (1.0 - s) * (ux + vy)
        });
        VerticalMapFamily::new(net.clone(), umaps, vmaps, eval, s.abs())
    }

    fn unit_net() -> Net {
        Net::uniform(2, 2, Rect::unit()).unwrap()
    }

    #[test]
    fn rb_apply_z_independent_family_returns_f_samples() {
        let net = unit_net();
        let fam = plain_family(&net, |x, y| (std::f64::consts::PI * x).sin() * y);
        let (xs, ys) = SampledField::grid_for_net(&net, 33);
        let junk = SampledField::from_fn(xs.clone(), ys.clone(), |x, y| 7.0 * x - y);
        let out = rb_apply(&fam, &junk).unwrap();
        let want = SampledField::from_fn(xs, ys, |x, y| (std::f64::consts::PI * x).sin() * y);
        assert!(out.sup_distance(&want) < 1e-12);
    }

    #[test]
    fn rb_apply_rejects_unaligned_grid() {
        let net = Net::new(vec![0.0, 0.3, 1.0], vec![0.0, 0.5, 1.0]).unwrap();
        let fam = plain_family(&net, |x, _| x);
        let bad = SampledField::from_fn(
            (0..=8).map(|i| i as f64 / 8.0).collect(),
            (0..=8).map(|i| i as f64 / 8.0).collect(),
            |_, _| 0.0,
        );
        assert!(matches!(rb_apply(&fam, &bad), Err(Error::ResolutionMismatch)));
    }

    #[test]
    fn rb_contraction_on_random_fields() {
        use rand::{Rng, SeedableRng};
        let net = unit_net();
        let s = 0.5;
        let fam = scaled_family(&net, s);
        let (xs, ys) = SampledField::grid_for_net(&net, 129);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let mut rand_field = || {
            let v: Vec<f64> = (0..xs.len() * ys.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            SampledField::from_values(xs.clone(), ys.clone(), v)
        };
        let g1 = rand_field();
        let g2 = rand_field();
        let lhs = rb_apply(&fam, &g1).unwrap().sup_distance(&rb_apply(&fam, &g2).unwrap());
        // bilinear reads are convex combinations, so no interpolation slack
        // is needed on the upper side
        assert!(lhs <= s * g1.sup_distance(&g2) + 1e-12);
    }

    #[test]
    fn solver_converges_in_one_sweep_for_z_independent_family() {
        let net = unit_net();
        let f = |x: f64, y: f64| x * y;
        let fam = plain_family(&net, f);
        let (xs, ys) = SampledField::grid_for_net(&net, 17);
        let init = SampledField::from_fn(xs, ys, f);
        let out = fixed_point_solve(&fam, init, 1e-12, None).unwrap();
        assert_eq!(out.iterations, 1);
        assert_eq!(out.residual, 0.0);
    }

    #[test]
    fn solver_iteration_count_tracks_contraction_rate() {
        let net = unit_net();
        let s = 0.5;
        let fam = scaled_family(&net, s);
        let (xs, ys) = SampledField::grid_for_net(&net, 65);
        let init = SampledField::from_fn(xs.clone(), ys.clone(), |_, _| 0.0);
        let first = rb_apply(&fam, &init).unwrap();
        let r0 = init.sup_distance(&first);
        let tol = 1e-8;
        let out = fixed_point_solve(&fam, init, tol, None).unwrap();
        // contraction gives a worst-case sweep count; knot pinning can make
        // the actual convergence faster but never slower
        let worst_case = ((tol / r0).ln() / s.ln()).ceil() as isize;
        assert!(out.iterations as isize <= worst_case + 2,
            "iterations {} vs worst case {}", out.iterations, worst_case);
        assert!(out.residual <= tol);
    }

    #[test]
    fn solver_reports_best_iterate_on_cap() {
        let net = unit_net();
        let fam = scaled_family(&net, 0.9);
        let (xs, ys) = SampledField::grid_for_net(&net, 17);
        let init = SampledField::from_fn(xs, ys, |_, _| 40.0);
        match fixed_point_solve(&fam, init, 1e-14, Some(3)) {
            Err(Error::MaxIterExceeded { iterations, residual, .. }) => {
                assert_eq!(iterations, 3);
                assert!(residual > 1e-14);
            }
            other => panic!("expected MaxIterExceeded, got {other:?}"),
        }
    }

    #[test]
    fn orbit_depth_zero_is_the_knot_set() {
        let net = unit_net();
        let fam = plain_family(&net, |x, y| x + y);
        let seed = KnotLattice::sample_fn(&net, |x, y| x + y);
        let orbit = orbit_evaluate(&fam, &seed, 0, DEFAULT_ORBIT_BUDGET).unwrap();
        assert_eq!(orbit.points.len(), 9);
        assert!(orbit.points.iter().all(|p| p.parent.is_none()));
    }

    #[test]
    fn orbit_depth_one_bound_and_residual() {
        let net = unit_net();
        let fam = scaled_family(&net, 0.4);
        // the scaled family's attractor interpolates x + y at the knots
        let seed = KnotLattice::sample_fn(&net, |x, y| x + y);
        let orbit = orbit_evaluate(&fam, &seed, 1, DEFAULT_ORBIT_BUDGET).unwrap();
        assert!(orbit.points.len() <= 4 * 9 + 9);
        assert!(orbit.max_residual(&fam) <= 1e-12);
    }

    #[test]
    fn orbit_budget_guard() {
        let net = unit_net();
        let fam = scaled_family(&net, 0.4);
        let seed = KnotLattice::sample_fn(&net, |x, y| x + y);
        assert!(matches!(
            orbit_evaluate(&fam, &seed, 4, 50),
            Err(Error::PointBudgetExceeded { .. })
        ));
    }
}
