//! The alpha-fractal construction: scale functions, perturbation operators
//! (multiplication, composition, Bernstein), assembly of the vertical map
//! family, the fractal perturbation `f -> f^alpha`, operator-norm bound
//! records, and the series inverse of the fractal operator.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::{BivFn, Rect, SampledField};
use crate::ifs::{
    fixed_point_solve, orbit_evaluate, verify_corner_conditions, verify_matching_conditions,
    ConformanceReport, KnotLattice, SolveOutcome, SurfaceOrbit, VerticalMapFamily,
    DEFAULT_ORBIT_BUDGET,
};
use crate::net::{build_affine_maps, Axis, Net};

const NORM_GRID_RES: usize = 257;

/// Continuous vertical scale with sup-norm strictly below 1.
///
/// The sup-norm is a grid estimate (a lower bound of the true sup); values
/// at or above `1 - 1e-9` are rejected outright.
#[derive(Clone)]
pub struct ScaleFunction {
    eval: BivFn,
    sup: f64,
}

impl ScaleFunction {
    pub fn new(eval: BivFn, domain: Rect) -> Result<Self> {
        let res = NORM_GRID_RES;
        let mut sup = 0.0f64;
        for iy in 0..res {
            let y = domain.y0 + domain.height() * iy as f64 / (res - 1) as f64;
            for ix in 0..res {
                let x = domain.x0 + domain.width() * ix as f64 / (res - 1) as f64;
                sup = sup.max(eval(x, y).abs());
            }
        }
        if sup >= 1.0 - 1e-9 {
            return Err(Error::ScaleNotContractive { sup });
        }
        Ok(ScaleFunction { eval, sup })
    }

    pub fn constant(c: f64) -> Result<Self> {
        if c.abs() >= 1.0 - 1e-9 {
            return Err(Error::ScaleNotContractive { sup: c.abs() });
        }
        Ok(ScaleFunction { eval: Arc::new(move |_, _| c), sup: c.abs() })
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        (self.eval)(x, y)
    }

    /// Grid estimate of the sup-norm.
    pub fn sup(&self) -> f64 {
        self.sup
    }
}

impl std::fmt::Debug for ScaleFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScaleFunction").field("sup", &self.sup).finish()
    }
}

#[derive(Clone)]
pub enum OperatorKind {
    Multiplication { t: BivFn },
    Composition { map: Arc<dyn Fn(f64, f64) -> (f64, f64) + Send + Sync> },
    Bernstein { m: usize, n: usize },
}

impl std::fmt::Debug for OperatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OperatorKind::Multiplication { .. } => write!(f, "Multiplication"),
            OperatorKind::Composition { .. } => write!(f, "Composition"),
            OperatorKind::Bernstein { m, n } => write!(f, "Bernstein({m}, {n})"),
        }
    }
}

/// A bounded linear perturbation operator that agrees with its argument at
/// the four domain corners.
///
/// `id_minus_norm` is exact (grid estimate) for multiplication and the safe
/// upper bound `1 + ||L||` otherwise; threshold logic always consumes the
/// upper bound. A sampled lower bound from random normalized test functions
/// is kept alongside for reporting.
#[derive(Clone, Debug)]
pub struct PerturbOperator {
    pub kind: OperatorKind,
    pub domain: Rect,
    /// Operator norm `||L||` (exact for the shipped kinds).
    pub norm: f64,
    /// Upper bound on `||Id - L||`.
    pub id_minus_norm: f64,
    pub id_minus_norm_is_exact: bool,
    /// Sampled lower bound on `||Id - L||`.
    pub id_minus_norm_lower: f64,
}

impl PerturbOperator {
    /// Applies the operator to a continuous function.
    pub fn apply(&self, f: &BivFn) -> BivFn {
        match &self.kind {
            OperatorKind::Multiplication { t } => {
                let (f, t) = (f.clone(), t.clone());
                Arc::new(move |x, y| f(x, y) * t(x, y))
            }
            OperatorKind::Composition { map } => {
                let (f, map) = (f.clone(), map.clone());
                Arc::new(move |x, y| {
                    let (px, py) = map(x, y);
                    f(px, py)
                })
            }
            OperatorKind::Bernstein { m, n } => bernstein_apply(f, *m, *n, self.domain),
        }
    }
}

/// Pointwise multiplication by `t`, which must equal 1 at the four domain
/// corners and must not be identically 1.
pub fn multiplication_operator(t: BivFn, domain: Rect) -> Result<PerturbOperator> {
    let mut corner_defect = 0.0f64;
    for (x, y) in domain.corners() {
        corner_defect = corner_defect.max((t(x, y) - 1.0).abs());
    }
    if corner_defect > 1e-10 {
        return Err(Error::CornerValueViolation { defect: corner_defect });
    }
    let res = NORM_GRID_RES;
    let mut sup_t = 0.0f64;
    let mut sup_one_minus_t = 0.0f64;
    for iy in 0..res {
        let y = domain.y0 + domain.height() * iy as f64 / (res - 1) as f64;
        for ix in 0..res {
            let x = domain.x0 + domain.width() * ix as f64 / (res - 1) as f64;
            let v = t(x, y);
            sup_t = sup_t.max(v.abs());
            sup_one_minus_t = sup_one_minus_t.max((1.0 - v).abs());
        }
    }
    if sup_one_minus_t <= 1e-12 {
        return Err(Error::IdentityOperator);
    }
    Ok(PerturbOperator {
        kind: OperatorKind::Multiplication { t },
        domain,
        norm: sup_t,
        id_minus_norm: sup_one_minus_t,
        id_minus_norm_is_exact: true,
        id_minus_norm_lower: sup_one_minus_t,
    })
}

/// Composition with a continuous self-map of the domain that fixes the four
/// corners and is not the identity. `||L|| = 1`.
pub fn composition_operator(
    map: Arc<dyn Fn(f64, f64) -> (f64, f64) + Send + Sync>,
    domain: Rect,
) -> Result<PerturbOperator> {
    let mut corner_defect = 0.0f64;
    for (x, y) in domain.corners() {
        let (px, py) = map(x, y);
        corner_defect = corner_defect.max((px - x).abs().max((py - y).abs()));
    }
    if corner_defect > 1e-10 {
        return Err(Error::CornerFixViolation { defect: corner_defect });
    }
    let res = 65;
    let mut moved = 0.0f64;
    for iy in 0..res {
        let y = domain.y0 + domain.height() * iy as f64 / (res - 1) as f64;
        for ix in 0..res {
            let x = domain.x0 + domain.width() * ix as f64 / (res - 1) as f64;
            let (px, py) = map(x, y);
            moved = moved.max((px - x).abs().max((py - y).abs()));
        }
    }
    if moved <= 1e-12 {
        return Err(Error::IdentityMap);
    }
    let mut op = PerturbOperator {
        kind: OperatorKind::Composition { map },
        domain,
        norm: 1.0,
        id_minus_norm: 2.0,
        id_minus_norm_is_exact: false,
        id_minus_norm_lower: 0.0,
    };
    op.id_minus_norm_lower = sampled_id_minus_lower(&op);
    Ok(op)
}

/// The bivariate Bernstein operator of degrees `(m, n)` on the domain,
/// affinely identified with the unit square.
pub fn bernstein_operator(m: usize, n: usize, domain: Rect) -> Result<PerturbOperator> {
    if m < 1 || n < 1 {
        return Err(Error::DegreeTooSmall { m, n });
    }
    let mut op = PerturbOperator {
        kind: OperatorKind::Bernstein { m, n },
        domain,
        // positivity plus reproduction of constants
        norm: 1.0,
        id_minus_norm: 2.0,
        id_minus_norm_is_exact: false,
        id_minus_norm_lower: 0.0,
    };
    op.id_minus_norm_lower = sampled_id_minus_lower(&op);
    Ok(op)
}

fn binomials(s: usize) -> Vec<f64> {
    let mut c = vec![1.0f64; s + 1];
    for j in 1..=s {
        c[j] = c[j - 1] * (s - j + 1) as f64 / j as f64;
    }
    c
}

fn bernstein_weights(coeff: &[f64], s: usize, t: f64) -> Vec<f64> {
    (0..=s)
        .map(|j| coeff[j] * t.powi(j as i32) * (1.0 - t).powi((s - j) as i32))
        .collect()
}

fn bernstein_apply(f: &BivFn, m: usize, n: usize, domain: Rect) -> BivFn {
    let f = f.clone();
    let cm = binomials(m);
    let cn = binomials(n);
    // lattice of sampled values f(i/m, k/n) in domain coordinates
    let mut lattice = Vec::with_capacity((m + 1) * (n + 1));
    for k in 0..=n {
        let y = domain.y0 + domain.height() * k as f64 / n as f64;
        for i in 0..=m {
            let x = domain.x0 + domain.width() * i as f64 / m as f64;
            lattice.push(f(x, y));
        }
    }
    Arc::new(move |x, y| {
        let u = ((x - domain.x0) / domain.width()).clamp(0.0, 1.0);
        let v = ((y - domain.y0) / domain.height()).clamp(0.0, 1.0);
        let wx = bernstein_weights(&cm, m, u);
        let wy = bernstein_weights(&cn, n, v);
        let mut acc = 0.0;
        for k in 0..=n {
            let mut row = 0.0;
            for i in 0..=m {
                row += lattice[k * (m + 1) + i] * wx[i];
            }
            acc += row * wy[k];
        }
        acc
    })
}

/// Sampled lower bound for `||Id - L||` from random normalized smooth test
/// functions. Deterministic seed so reports are reproducible.
fn sampled_id_minus_lower(op: &PerturbOperator) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1d_417);
    let dom = op.domain;
    let res = 65;
    let mut lower = 0.0f64;
    for _ in 0..8 {
        let f = random_smooth_fn(&mut rng, dom);
        let lf = op.apply(&f);
        let mut sup_f = 0.0f64;
        let mut sup_diff = 0.0f64;
        for iy in 0..res {
            let y = dom.y0 + dom.height() * iy as f64 / (res - 1) as f64;
            for ix in 0..res {
                let x = dom.x0 + dom.width() * ix as f64 / (res - 1) as f64;
                sup_f = sup_f.max(f(x, y).abs());
                sup_diff = sup_diff.max((f(x, y) - lf(x, y)).abs());
            }
        }
        if sup_f > 0.0 {
            lower = lower.max(sup_diff / sup_f);
        }
    }
    lower
}

/// Random trigonometric-polynomial test function, used for sampled norm
/// bounds and randomized property checks.
pub fn random_smooth_fn(rng: &mut impl Rng, domain: Rect) -> BivFn {
    let coeffs: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Arc::new(move |x, y| {
        let u = (x - domain.x0) / domain.width();
        let v = (y - domain.y0) / domain.height();
        coeffs[0]
            + coeffs[1] * u
            + coeffs[2] * v
            + coeffs[3] * (std::f64::consts::PI * u).sin() * (std::f64::consts::PI * v).sin()
            + coeffs[4] * u * v
            + coeffs[5] * (2.0 * std::f64::consts::PI * u).cos() * v * (1.0 - v)
    })
}

/// Grid resolution and convergence policy for the grid engine.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub grid_res: usize,
    pub tol: f64,
    pub max_iter: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { grid_res: 257, tol: 1e-10, max_iter: None }
    }
}

/// An evaluable self-referential surface: the fractal perturbation of `f`
/// determined by the operator `L`, the scale `alpha`, and the net.
pub struct AlphaSurface {
    f: BivFn,
    lf: BivFn,
    operator: PerturbOperator,
    alpha: ScaleFunction,
    net: Net,
    family: VerticalMapFamily,
    config: SolverConfig,
    solved: std::sync::OnceLock<SolveOutcome>,
}

/// Assembles the vertical map family
/// `F_ij(x, y, z) = alpha(u_i x, v_j y) z + f(u_i x, v_j y)
///  - alpha(u_i x, v_j y) (Lf)(x, y)`
/// and bundles it with the grid and orbit engines.
pub fn build_alpha_surface(
    f: BivFn,
    operator: PerturbOperator,
    alpha: ScaleFunction,
    net: Net,
    config: SolverConfig,
) -> Result<AlphaSurface> {
    let lf = operator.apply(&f);
    let umaps = build_affine_maps(&net, Axis::X);
    let vmaps = build_affine_maps(&net, Axis::Y);
    let (u, v) = (umaps.clone(), vmaps.clone());
    let (fc, lfc, ac) = (f.clone(), lf.clone(), alpha.clone());
    let eval = Arc::new(move |i: usize, j: usize, x: f64, y: f64, z: f64| {
        let ux = u.eval(i, x);
        let vy = v.eval(j, y);
        let a = ac.eval(ux, vy);
        a * z + fc(ux, vy) - a * lfc(x, y)
    });
    let family = VerticalMapFamily::new(net.clone(), umaps, vmaps, eval, alpha.sup());
    Ok(AlphaSurface {
        f,
        lf,
        operator,
        alpha,
        net,
        family,
        config,
        solved: std::sync::OnceLock::new(),
    })
}

impl AlphaSurface {
    pub fn family(&self) -> &VerticalMapFamily {
        &self.family
    }

    pub fn net(&self) -> &Net {
        &self.net
    }

    pub fn seed_fn(&self) -> &BivFn {
        &self.f
    }

    pub fn perturbed_seed_fn(&self) -> &BivFn {
        &self.lf
    }

    pub fn operator(&self) -> &PerturbOperator {
        &self.operator
    }

    pub fn alpha(&self) -> &ScaleFunction {
        &self.alpha
    }

    pub fn config(&self) -> SolverConfig {
        self.config
    }

    /// Knot values of the seed function (the interpolation data).
    pub fn knot_values(&self) -> KnotLattice {
        let f = &self.f;
        KnotLattice::sample_fn(&self.net, |x, y| f(x, y))
    }

    /// Grid engine: lazily solves the fixed point at the configured
    /// resolution and caches the outcome.
    pub fn solve(&self) -> Result<&SolveOutcome> {
        if let Some(s) = self.solved.get() {
            return Ok(s);
        }
        let out = self.solve_on_res(self.config.grid_res)?;
        Ok(self.solved.get_or_init(|| out))
    }

    /// Solves at an explicit resolution without touching the cache.
    pub fn solve_on_res(&self, grid_res: usize) -> Result<SolveOutcome> {
        let (xs, ys) = SampledField::grid_for_net(&self.net, grid_res);
        let f = &self.f;
        let init = SampledField::from_fn(xs, ys, |x, y| f(x, y));
        fixed_point_solve(&self.family, init, self.config.tol, self.config.max_iter)
    }

    /// Point evaluation through the grid engine (bilinear lookup on the
    /// solved field).
    pub fn evaluate_points(&self, points: &[(f64, f64)]) -> Result<Vec<f64>> {
        let dom = self.net.domain();
        for &(x, y) in points {
            if !dom.contains(x, y) {
                return Err(Error::OutOfDomain { x, y });
            }
        }
        let field = &self.solve()?.field;
        Ok(points.iter().map(|&(x, y)| field.sample(x, y)).collect())
    }

    pub fn evaluate_grid(&self, grid_res: usize) -> Result<SampledField> {
        if grid_res == self.config.grid_res {
            return Ok(self.solve()?.field.clone());
        }
        Ok(self.solve_on_res(grid_res)?.field)
    }

    /// Orbit engine: exact attractor values on forward images of the knots.
    pub fn orbit(&self, depth: usize, budget: Option<usize>) -> Result<SurfaceOrbit> {
        orbit_evaluate(
            &self.family,
            &self.knot_values(),
            depth,
            budget.unwrap_or(DEFAULT_ORBIT_BUDGET),
        )
    }

    /// The a-priori bound `(||alpha|| / (1 - ||alpha||)) ||f - Lf||` on the
    /// uniform perturbation error, with norms estimated on the working grid.
    pub fn perturbation_bound(&self) -> f64 {
        let a = self.alpha.sup();
        a / (1.0 - a) * self.seed_defect_sup()
    }

    /// Grid estimate of `||f - Lf||`.
    pub fn seed_defect_sup(&self) -> f64 {
        let (xs, ys) = SampledField::grid_for_net(&self.net, self.config.grid_res);
        let mut sup = 0.0f64;
        for &y in &ys {
            for &x in &xs {
                sup = sup.max(((self.f)(x, y) - (self.lf)(x, y)).abs());
            }
        }
        sup
    }

    /// Corner and matching conformance of the underlying family, with the
    /// z-sampling range derived from the knot data.
    pub fn conformance(&self, n_samples: usize, tol: f64) -> ConformanceReport {
        let data = self.knot_values();
        let corners = verify_corner_conditions(&self.family, &data, tol);
        let z_range = (data.min() - 1.0, data.max() + 1.0);
        let matching = verify_matching_conditions(&self.family, n_samples, z_range, tol);
        corners.merge(&matching)
    }

    /// Worst deviation of the solved field from the seed values at the
    /// net knots.
    pub fn knot_defect(&self) -> Result<f64> {
        let field = &self.solve()?.field;
        let mut worst = 0.0f64;
        for &y in self.net.ys() {
            for &x in self.net.xs() {
                worst = worst.max((field.sample(x, y) - (self.f)(x, y)).abs());
            }
        }
        Ok(worst)
    }

    /// Max residual of the self-referential equation over grid nodes,
    /// reading preimage values from the solved field.
    pub fn grid_residual(&self) -> Result<f64> {
        let field = &self.solve()?.field;
        let next = crate::ifs::rb_apply(&self.family, field)?;
        Ok(field.sup_distance(&next))
    }
}

impl std::fmt::Debug for AlphaSurface {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AlphaSurface")
            .field("alpha_sup", &self.alpha.sup())
            .field("operator", &self.operator.kind)
            .field("grid_res", &self.config.grid_res)
            .finish()
    }
}

/// The bound record of the fractal operator's norm estimates.
#[derive(Debug, Clone)]
pub struct NormBounds {
    /// Upper bound on the fractal operator norm.
    pub fractal_norm_upper: f64,
    /// Scale sup-norms below this threshold guarantee a bounded inverse.
    pub invertibility_threshold: f64,
    /// Upper bound on the inverse norm; absent when `||alpha|| ||L|| >= 1`.
    pub inverse_norm_upper: Option<f64>,
    /// Lower bound on `||f^alpha|| / ||f||`; absent with the inverse bound.
    pub bounded_below_constant: Option<f64>,
    pub inapplicable_reason: Option<String>,
}

pub fn operator_norm_bounds(operator: &PerturbOperator, alpha: &ScaleFunction) -> NormBounds {
    let a = alpha.sup();
    let fractal_norm_upper = 1.0 + a * operator.id_minus_norm / (1.0 - a);
    let invertibility_threshold = 1.0 / (1.0 + operator.id_minus_norm);
    if a * operator.norm < 1.0 {
        NormBounds {
            fractal_norm_upper,
            invertibility_threshold,
            inverse_norm_upper: Some((1.0 + a) / (1.0 - a * operator.norm)),
            bounded_below_constant: Some((1.0 - a * operator.norm) / (1.0 + a)),
            inapplicable_reason: None,
        }
    } else {
        NormBounds {
            fractal_norm_upper,
            invertibility_threshold,
            inverse_norm_upper: None,
            bounded_below_constant: None,
            inapplicable_reason: Some(format!(
                "||alpha|| ||L|| = {:.6} >= 1: bounded-below and inverse bounds unavailable",
                a * operator.norm
            )),
        }
    }
}

/// One application of the fractal operator to a grid field: the field is
/// read bilinearly as a continuous seed and its perturbation is solved on
/// the same grid. Linear in the field values.
pub fn fractal_apply_field(
    h: &SampledField,
    operator: &PerturbOperator,
    alpha: &ScaleFunction,
    net: &Net,
    tol: f64,
) -> Result<SampledField> {
    let seed = h.interpolant();
    let surface = build_alpha_surface(
        seed,
        operator.clone(),
        alpha.clone(),
        net.clone(),
        SolverConfig { grid_res: h.nx(), tol, max_iter: None },
    )?;
    let init = h.clone();
    Ok(fixed_point_solve(surface.family(), init, tol, None)?.field)
}

const NEUMANN_MAX_TERMS: usize = 400;
const NEUMANN_MAX_PASSES: usize = 6;

/// Inverts the fractal operator by summing `sum_k (Id - F)^k g` on the
/// working grid, valid when `||alpha|| (1 + ||Id - L||) < 1`.
///
/// Each term applies `F` with an inner solve at `tol / 4`; the series stops
/// once the term norm drops below `tol (1 - q) / 2` with `q` the
/// contraction estimate. A defect-correction pass re-runs the series on the
/// remaining residual until `||F(f_hat) - g|| <= tol`.
pub fn apply_inverse_neumann(
    g: &BivFn,
    operator: &PerturbOperator,
    alpha: &ScaleFunction,
    net: &Net,
    config: SolverConfig,
    tol: f64,
) -> Result<SampledField> {
    let a = alpha.sup();
    if a * (1.0 + operator.id_minus_norm) >= 1.0 {
        return Err(Error::PreconditionViolated {
            detail: format!(
                "||alpha|| (1 + ||Id - L||) = {:.6} >= 1",
                a * (1.0 + operator.id_minus_norm)
            ),
        });
    }
    let q = (a * operator.id_minus_norm / (1.0 - a)).min(1.0 - 1e-6);
    let (xs, ys) = SampledField::grid_for_net(net, config.grid_res);
    let g_field = SampledField::from_fn(xs, ys, |x, y| g(x, y));
    let inner_tol = tol / 4.0;
    let term_floor = tol * (1.0 - q) / 2.0;

    let series = |rhs: &SampledField| -> Result<SampledField> {
        let mut term = rhs.clone();
        let mut acc = rhs.clone();
        for _ in 0..NEUMANN_MAX_TERMS {
            let f_term = fractal_apply_field(&term, operator, alpha, net, inner_tol)?;
            term = term.zip_with(&f_term, |t, ft| t - ft);
            acc = acc.zip_with(&term, |a, t| a + t);
            if term.sup_norm() < term_floor {
                return Ok(acc);
            }
        }
        Err(Error::MaxTermsExceeded { max_terms: NEUMANN_MAX_TERMS, last: term.sup_norm() })
    };

    let mut f_hat = series(&g_field)?;
    for _ in 0..NEUMANN_MAX_PASSES {
        let image = fractal_apply_field(&f_hat, operator, alpha, net, inner_tol)?;
        let defect = g_field.zip_with(&image, |g, v| g - v);
        if defect.sup_norm() <= tol {
            return Ok(f_hat);
        }
        let correction = series(&defect)?;
        f_hat = f_hat.zip_with(&correction, |f, c| f + c);
    }
    Err(Error::MaxTermsExceeded { max_terms: NEUMANN_MAX_TERMS * NEUMANN_MAX_PASSES, last: tol })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pi() -> f64 {
        std::f64::consts::PI
    }

    fn unit_net() -> Net {
        Net::uniform(2, 2, Rect::unit()).unwrap()
    }

    fn sinsin() -> BivFn {
        Arc::new(|x, y| (pi() * x).sin() * (pi() * y).sin())
    }

    fn bump_multiplier() -> BivFn {
        Arc::new(|x, y| 1.0 + x * (1.0 - x) * y * (1.0 - y))
    }

    fn standard_operator() -> PerturbOperator {
        multiplication_operator(bump_multiplier(), Rect::unit()).unwrap()
    }

    fn standard_surface(alpha: f64) -> AlphaSurface {
        build_alpha_surface(
            sinsin(),
            standard_operator(),
            ScaleFunction::constant(alpha).unwrap(),
            unit_net(),
            SolverConfig { grid_res: 129, ..Default::default() },
        )
        .unwrap()
    }

    #[test]
    fn multiplication_norms_match_extrema() {
        let op = standard_operator();
        // max of x(1-x)y(1-y) on the unit square is 1/16 at the center
        assert!((op.norm - 1.0625).abs() < 1e-12);
        assert!((op.id_minus_norm - 0.0625).abs() < 1e-12);
        assert!(op.id_minus_norm_is_exact);
    }

    #[test]
    fn multiplication_rejects_identity_and_bad_corners() {
        let one: BivFn = Arc::new(|_, _| 1.0);
        assert!(matches!(
            multiplication_operator(one, Rect::unit()),
            Err(Error::IdentityOperator)
        ));
        let off: BivFn = Arc::new(|x, y| 1.0 + 0.1 * x + 0.0 * y);
        assert!(matches!(
            multiplication_operator(off, Rect::unit()),
            Err(Error::CornerValueViolation { .. })
        ));
    }

    #[test]
    fn composition_norm_is_one_and_identity_rejected() {
        let sq = composition_operator(Arc::new(|x, y| (x * x, y)), Rect::unit()).unwrap();
        assert_eq!(sq.norm, 1.0);
        assert_eq!(sq.id_minus_norm, 2.0);
        assert!(sq.id_minus_norm_lower > 0.0);
        assert!(matches!(
            composition_operator(Arc::new(|x, y| (x, y)), Rect::unit()),
            Err(Error::IdentityMap)
        ));
    }

    #[test]
    fn bernstein_reproduces_bilinear_and_chords() {
        let op = bernstein_operator(1, 1, Rect::unit()).unwrap();
        let xy: BivFn = Arc::new(|x, y| x * y);
        let bxy = op.apply(&xy);
        for (x, y) in [(0.3, 0.8), (0.5, 0.5), (0.0, 1.0)] {
            assert!((bxy(x, y) - x * y).abs() < 1e-14);
        }
        let c: BivFn = Arc::new(|_, _| 4.25);
        let bc = bernstein_operator(3, 2, Rect::unit()).unwrap().apply(&c);
        assert!((bc(0.37, 0.62) - 4.25).abs() < 1e-13);
        // degree-1 Bernstein of x^2 is the chord, i.e. x
        let xsq: BivFn = Arc::new(|x, _| x * x);
        let bxsq = op.apply(&xsq);
        assert!((bxsq(0.5, 0.25) - 0.5).abs() < 1e-14);
        assert!(matches!(
            bernstein_operator(0, 2, Rect::unit()),
            Err(Error::DegreeTooSmall { .. })
        ));
    }

    #[test]
    fn bernstein_operator_is_linear_on_grids() {
        let op = bernstein_operator(3, 3, Rect::unit()).unwrap();
        let f: BivFn = Arc::new(|x, y| (pi() * x).sin() * y);
        let g: BivFn = Arc::new(|x, y| x * x - y);
        let combo: BivFn = {
            let (f, g) = (f.clone(), g.clone());
            Arc::new(move |x, y| 2.5 * f(x, y) - 0.75 * g(x, y))
        };
        let (lf, lg, lcombo) = (op.apply(&f), op.apply(&g), op.apply(&combo));
        for (x, y) in [(0.1, 0.9), (0.5, 0.5), (0.77, 0.31)] {
            let want = 2.5 * lf(x, y) - 0.75 * lg(x, y);
            assert!((lcombo(x, y) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_scale_gives_back_the_seed() {
        let s = standard_surface(0.0);
        let field = &s.solve().unwrap().field;
        let f = sinsin();
        let want = SampledField::from_fn(field.xs().to_vec(), field.ys().to_vec(), |x, y| f(x, y));
        assert!(field.sup_distance(&want) <= 1e-12);
        assert_eq!(s.perturbation_bound(), 0.0);
    }

    #[test]
    fn constant_seed_is_fixed_under_composition_operator() {
        let op = composition_operator(Arc::new(|x, y| (x * x, y)), Rect::unit()).unwrap();
        let c: BivFn = Arc::new(|_, _| 3.0);
        let s = build_alpha_surface(
            c,
            op,
            ScaleFunction::constant(0.6).unwrap(),
            unit_net(),
            SolverConfig { grid_res: 65, ..Default::default() },
        )
        .unwrap();
        let field = &s.solve().unwrap().field;
        let worst = field.values().iter().fold(0.0f64, |m, v| m.max((v - 3.0).abs()));
        assert!(worst <= 1e-10);
    }

    #[test]
    fn interpolates_seed_at_knots() {
        let s = standard_surface(0.3);
        assert!(s.knot_defect().unwrap() <= 1e-9);
    }

    #[test]
    fn conformance_passes_for_alpha_family() {
        let s = standard_surface(0.3);
        let report = s.conformance(16, 1e-12);
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn perturbation_bound_dominates_measured_error() {
        for alpha in [0.1, 0.3, 0.5] {
            let s = standard_surface(alpha);
            let field = &s.solve().unwrap().field;
            let f = sinsin();
            let measured = field
                .xs()
                .iter()
                .enumerate()
                .flat_map(|(ix, &x)| {
                    field.ys().iter().enumerate().map(move |(iy, &y)| (ix, iy, x, y))
                })
                .fold(0.0f64, |m, (ix, iy, x, y)| {
                    m.max((field.value(ix, iy) - f(x, y)).abs())
                });
            assert!(measured <= s.perturbation_bound() + 1e-8);
        }
        // bounds strictly increasing in the scale
        let bounds: Vec<f64> =
            [0.1, 0.3, 0.5].iter().map(|&a| standard_surface(a).perturbation_bound()).collect();
        assert!(bounds[0] < bounds[1] && bounds[1] < bounds[2]);
    }

    #[test]
    fn norm_bound_arithmetic() {
        let op = standard_operator();
        let bounds = operator_norm_bounds(&op, &ScaleFunction::constant(0.3).unwrap());
        assert!((bounds.fractal_norm_upper - (1.0 + 0.3 * 0.0625 / 0.7)).abs() < 1e-12);
        assert!((bounds.invertibility_threshold - 1.0 / 1.0625).abs() < 1e-12);
        let zero = operator_norm_bounds(&op, &ScaleFunction::constant(0.0).unwrap());
        assert_eq!(zero.fractal_norm_upper, 1.0);
        assert_eq!(zero.bounded_below_constant, Some(1.0));
    }

    #[test]
    fn neumann_round_trip_recovers_seed() {
        let net = unit_net();
        let op = standard_operator();
        let alpha = ScaleFunction::constant(0.3).unwrap();
        let config = SolverConfig { grid_res: 65, ..Default::default() };
        let f = sinsin();
        let surface =
            build_alpha_surface(f.clone(), op.clone(), alpha.clone(), net.clone(), config)
                .unwrap();
        let g = surface.solve().unwrap().field.interpolant();
        let tol = 1e-8;
        let f_hat = apply_inverse_neumann(&g, &op, &alpha, &net, config, tol).unwrap();
        let want = SampledField::from_fn(f_hat.xs().to_vec(), f_hat.ys().to_vec(), |x, y| f(x, y));
        let inverse_norm = operator_norm_bounds(&op, &alpha).inverse_norm_upper.unwrap();
        // grid round trip: the recovered seed matches within the inverse
        // norm bound times the solve tolerances
        assert!(f_hat.sup_distance(&want) <= inverse_norm * 100.0 * tol);
    }

    #[test]
    fn neumann_precondition_guard() {
        let net = unit_net();
        let op = standard_operator();
        let alpha = ScaleFunction::constant(0.99).unwrap();
        let g: BivFn = Arc::new(|x, y| x + y);
        assert!(matches!(
            apply_inverse_neumann(&g, &op, &alpha, &net, SolverConfig::default(), 1e-6),
            Err(Error::PreconditionViolated { .. })
        ));
    }

    #[test]
    fn neumann_identity_case_single_term() {
        let net = unit_net();
        let op = standard_operator();
        let alpha = ScaleFunction::constant(0.0).unwrap();
        let g: BivFn = Arc::new(|x, y| x * y + 1.0);
        let config = SolverConfig { grid_res: 33, ..Default::default() };
        let f_hat = apply_inverse_neumann(&g, &op, &alpha, &net, config, 1e-10).unwrap();
        let want = SampledField::from_fn(f_hat.xs().to_vec(), f_hat.ys().to_vec(), |x, y| x * y + 1.0);
        assert!(f_hat.sup_distance(&want) <= 1e-10);
    }
}
