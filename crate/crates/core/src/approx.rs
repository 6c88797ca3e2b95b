//! Polynomial and fractal-polynomial approximation: discrete least-squares
//! and minimax fits over bivariate polynomial spaces, the fractal images of
//! those spaces, and an epsilon-targeted fractal approximant built by
//! raising the degree and shrinking the scale.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::alpha::{build_alpha_surface, PerturbOperator, ScaleFunction, SolverConfig};
use crate::error::{Error, Result};
use crate::field::{BivFn, Rect, SampledField};
use crate::net::Net;

/// Which exponent pairs span a degree-(m, n) space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DegreeConvention {
    /// All `x^i y^j` with `i + j <= m + n`.
    TotalDegree,
    /// All `x^i y^j` with `i <= m` and `j <= n`.
    TensorProduct,
}

/// A finite-dimensional polynomial space on a rectangle, with monomials
/// evaluated in coordinates rescaled to `[-1, 1]^2` for conditioning.
#[derive(Debug, Clone)]
pub struct PolySpace {
    pub m: usize,
    pub n: usize,
    pub convention: DegreeConvention,
    pub domain: Rect,
    exponents: Vec<(usize, usize)>,
}

impl PolySpace {
    pub fn new(m: usize, n: usize, convention: DegreeConvention, domain: Rect) -> Self {
        let mut exponents = Vec::new();
        match convention {
            DegreeConvention::TotalDegree => {
                let total = m + n;
                for j in 0..=total {
                    for i in 0..=(total - j) {
                        exponents.push((i, j));
                    }
                }
            }
            DegreeConvention::TensorProduct => {
                for j in 0..=n {
                    for i in 0..=m {
                        exponents.push((i, j));
                    }
                }
            }
        }
        PolySpace { m, n, convention, domain, exponents }
    }

    /// Number of basis monomials; `(m + n + 2)(m + n + 1) / 2` in the
    /// total-degree convention.
    pub fn dimension(&self) -> usize {
        self.exponents.len()
    }

    pub fn exponents(&self) -> &[(usize, usize)] {
        &self.exponents
    }

    fn scale(&self, x: f64, y: f64) -> (f64, f64) {
        (
            2.0 * (x - self.domain.x0) / self.domain.width() - 1.0,
            2.0 * (y - self.domain.y0) / self.domain.height() - 1.0,
        )
    }

    /// Basis values at a point, in the order of `exponents`.
    pub fn basis_at(&self, x: f64, y: f64) -> Vec<f64> {
        let (u, v) = self.scale(x, y);
        self.exponents.iter().map(|&(i, j)| u.powi(i as i32) * v.powi(j as i32)).collect()
    }

    /// The polynomial with the given coefficients as a callable.
    pub fn polynomial(&self, coeffs: Vec<f64>) -> BivFn {
        let space = self.clone();
        Arc::new(move |x, y| {
            space.basis_at(x, y).iter().zip(&coeffs).map(|(b, c)| b * c).sum()
        })
    }
}

/// A fitted approximant: coefficients, the callable, and the achieved
/// sup-error on the fit grid.
pub struct ApproxFit {
    pub coeffs: Vec<f64>,
    pub func: BivFn,
    pub sup_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FitNorm {
    LeastSquares,
    Minimax,
}

const LAWSON_ITERS: usize = 60;

/// Best approximation of `f` from the space on a uniform fit grid.
///
/// Least-squares solves one SVD system. Minimax runs Lawson's iteratively
/// reweighted least squares and keeps the best iterate, so the reported
/// sup-error never exceeds the plain least-squares one.
pub fn best_approx(f: &BivFn, space: &PolySpace, fit_res: usize, norm: FitNorm) -> Result<ApproxFit> {
    let dom = space.domain;
    let mut points = Vec::with_capacity(fit_res * fit_res);
    for iy in 0..fit_res {
        let y = dom.y0 + dom.height() * iy as f64 / (fit_res - 1) as f64;
        for ix in 0..fit_res {
            let x = dom.x0 + dom.width() * ix as f64 / (fit_res - 1) as f64;
            points.push((x, y, f(x, y)));
        }
    }
    let rows = points.len();
    let cols = space.dimension();
    let design = DMatrix::from_fn(rows, cols, |r, c| {
        let (x, y, _) = points[r];
        let (i, j) = space.exponents[c];
        let (u, v) = space.scale(x, y);
        u.powi(i as i32) * v.powi(j as i32)
    });
    let target = DVector::from_fn(rows, |r, _| points[r].2);

    let solve_weighted = |w: &[f64]| -> Result<DVector<f64>> {
        let sw: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
        let mut a = design.clone();
        let mut b = target.clone();
        for r in 0..rows {
            for c in 0..cols {
                a[(r, c)] *= sw[r];
            }
            b[r] *= sw[r];
        }
        let svd = a.svd(true, true);
        svd.solve(&b, 1e-12).map_err(|_| Error::RankDeficient)
    };

    let sup_err = |coeffs: &DVector<f64>| -> f64 {
        let residual = &design * coeffs - &target;
        residual.iter().fold(0.0f64, |m, r| m.max(r.abs()))
    };

    let ls = solve_weighted(&vec![1.0; rows])?;
    let ls_err = sup_err(&ls);
    let (best, best_err) = match norm {
        FitNorm::LeastSquares => (ls, ls_err),
        FitNorm::Minimax => {
            let mut w = vec![1.0 / rows as f64; rows];
            let mut best = ls.clone();
            let mut best_err = ls_err;
            for _ in 0..LAWSON_ITERS {
                let coeffs = solve_weighted(&w)?;
                let err = sup_err(&coeffs);
                if err < best_err {
                    best_err = err;
                    best = coeffs.clone();
                }
                let residual = &design * &coeffs - &target;
                let mut total = 0.0;
                for r in 0..rows {
                    w[r] *= residual[r].abs().max(1e-14);
                    total += w[r];
                }
                for wr in &mut w {
                    *wr /= total;
                }
            }
            (best, best_err)
        }
    };
    let coeffs: Vec<f64> = best.iter().copied().collect();
    Ok(ApproxFit { func: space.polynomial(coeffs.clone()), coeffs, sup_error: best_err })
}

/// The fractal perturbation of a single polynomial: its self-referential
/// surface solved on the working grid.
pub fn fractal_polynomial(
    p: &BivFn,
    operator: &PerturbOperator,
    alpha: &ScaleFunction,
    net: &Net,
    config: SolverConfig,
) -> Result<SampledField> {
    let surface =
        build_alpha_surface(p.clone(), operator.clone(), alpha.clone(), net.clone(), config)?;
    Ok(surface.solve()?.field.clone())
}

/// Best approximation of `f` from the fractal image of a polynomial space:
/// each basis monomial is perturbed into its fractal counterpart (the
/// perturbation is linear in the seed) and the fit runs in that span.
pub fn best_fractal_approx(
    f: &BivFn,
    space: &PolySpace,
    operator: &PerturbOperator,
    alpha: &ScaleFunction,
    net: &Net,
    config: SolverConfig,
    norm: FitNorm,
) -> Result<ApproxFit> {
    let cols = space.dimension();
    let mut basis_fields = Vec::with_capacity(cols);
    for idx in 0..cols {
        let mut coeffs = vec![0.0; cols];
        coeffs[idx] = 1.0;
        let b = space.polynomial(coeffs);
        basis_fields.push(fractal_polynomial(&b, operator, alpha, net, config)?);
    }
    let grid = &basis_fields[0];
    let xs = grid.xs().to_vec();
    let ys = grid.ys().to_vec();
    let rows = xs.len() * ys.len();
    let design = DMatrix::from_fn(rows, cols, |r, c| {
        basis_fields[c].values()[r]
    });
    let f_field = SampledField::from_fn(xs.clone(), ys.clone(), |x, y| f(x, y));
    let target = DVector::from_fn(rows, |r, _| f_field.values()[r]);

    let sup_err = |coeffs: &DVector<f64>| -> f64 {
        let residual = &design * coeffs - &target;
        residual.iter().fold(0.0f64, |m, r| m.max(r.abs()))
    };
    let solve_weighted = |w: &[f64]| -> Result<DVector<f64>> {
        let sw: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
        let mut a = design.clone();
        let mut b = target.clone();
        for r in 0..rows {
            for c in 0..cols {
                a[(r, c)] *= sw[r];
            }
            b[r] *= sw[r];
        }
        let svd = a.svd(true, true);
        svd.solve(&b, 1e-12).map_err(|_| Error::RankDeficient)
    };

    let ls = solve_weighted(&vec![1.0; rows])?;
    let ls_err = sup_err(&ls);
    let (best, best_err) = match norm {
        FitNorm::LeastSquares => (ls, ls_err),
        FitNorm::Minimax => {
            let mut w = vec![1.0 / rows as f64; rows];
            let mut best = ls.clone();
            let mut best_err = ls_err;
            for _ in 0..LAWSON_ITERS {
                let coeffs = solve_weighted(&w)?;
                let err = sup_err(&coeffs);
                if err < best_err {
                    best_err = err;
                    best = coeffs.clone();
                }
                let residual = &design * &coeffs - &target;
                let mut total = 0.0;
                for r in 0..rows {
                    w[r] *= residual[r].abs().max(1e-14);
                    total += w[r];
                }
                for wr in &mut w {
                    *wr /= total;
                }
            }
            (best, best_err)
        }
    };

    // assemble the fitted field as the coefficient combination
    let mut values = vec![0.0f64; rows];
    for (c, field) in basis_fields.iter().enumerate() {
        let coeff = best[c];
        for (v, b) in values.iter_mut().zip(field.values()) {
            *v += coeff * b;
        }
    }
    let fitted = SampledField::from_values(xs, ys, values);
    let func = fitted.interpolant();
    Ok(ApproxFit { coeffs: best.iter().copied().collect(), func, sup_error: best_err })
}

const EPSILON_MAX_DEGREE: usize = 8;

/// Outcome of the epsilon procedure: the polynomial degree used, the scale
/// sup chosen, the fractal approximant, and the achieved sup-error.
pub struct EpsilonFit {
    pub degree: usize,
    pub alpha: f64,
    pub field: SampledField,
    pub achieved: f64,
}

/// Produces a fractal function within `epsilon` of `f` in the sup-norm:
/// the polynomial degree is raised until the polynomial error is below
/// `epsilon / 2`, then the constant scale is set to
/// `0.9 (epsilon / 2) / (epsilon / 2 + ||Id - L|| ||p||)` so the fractal
/// perturbation stays below the remaining budget.
pub fn epsilon_fractal_polynomial(
    f: &BivFn,
    epsilon: f64,
    operator: &PerturbOperator,
    net: &Net,
    config: SolverConfig,
) -> Result<EpsilonFit> {
    let dom = net.domain();
    let fit_res = 33;
    let mut chosen: Option<(usize, ApproxFit)> = None;
    for degree in 0..=EPSILON_MAX_DEGREE {
        let space = PolySpace::new(degree, 0, DegreeConvention::TotalDegree, dom);
        let fit = best_approx(f, &space, fit_res, FitNorm::Minimax)?;
        // check the error on a finer independent grid
        let check = sup_distance_fn(f, &fit.func, dom, 129);
        if check < epsilon / 2.0 {
            chosen = Some((degree, fit));
            break;
        }
    }
    let (degree, fit) =
        chosen.ok_or(Error::DegreeBudgetExceeded { target: epsilon, max_degree: EPSILON_MAX_DEGREE })?;
    let p_norm = sup_norm_fn(&fit.func, dom, 129);
    let budget = epsilon / 2.0;
    let a = 0.9 * budget / (budget + operator.id_minus_norm * p_norm);
    let alpha = ScaleFunction::constant(a)?;
    let field = fractal_polynomial(&fit.func, operator, &alpha, net, config)?;
    let f_field =
        SampledField::from_fn(field.xs().to_vec(), field.ys().to_vec(), |x, y| f(x, y));
    let achieved = field.sup_distance(&f_field);
    if achieved > epsilon {
        return Err(Error::EpsilonMiss { achieved, epsilon });
    }
    Ok(EpsilonFit { degree, alpha: a, field, achieved })
}

fn sup_distance_fn(f: &BivFn, g: &BivFn, dom: Rect, res: usize) -> f64 {
    let mut sup = 0.0f64;
    for iy in 0..res {
        let y = dom.y0 + dom.height() * iy as f64 / (res - 1) as f64;
        for ix in 0..res {
            let x = dom.x0 + dom.width() * ix as f64 / (res - 1) as f64;
            sup = sup.max((f(x, y) - g(x, y)).abs());
        }
    }
    sup
}

fn sup_norm_fn(f: &BivFn, dom: Rect, res: usize) -> f64 {
    let mut sup = 0.0f64;
    for iy in 0..res {
        let y = dom.y0 + dom.height() * iy as f64 / (res - 1) as f64;
        for ix in 0..res {
            let x = dom.x0 + dom.width() * ix as f64 / (res - 1) as f64;
            sup = sup.max(f(x, y).abs());
        }
    }
    sup
}

/// The error-transfer inequality for the fractal image of a polynomial
/// space: the best fractal error is bounded by a multiple of the best
/// polynomial error plus a scale-proportional offset,
/// `E_frac <= ((1 + a (||Id - L|| - 1)) / (1 - a)) E_poly
///  + (a ||Id - L|| / (1 - a)) ||f||`.
#[derive(Debug, Clone, Serialize)]
pub struct ApproxChainReport {
    pub poly_error: f64,
    pub fractal_error: f64,
    pub bound: f64,
    pub pass: bool,
}

pub fn verify_approx_chain(
    f: &BivFn,
    space: &PolySpace,
    operator: &PerturbOperator,
    alpha: &ScaleFunction,
    net: &Net,
    config: SolverConfig,
) -> Result<ApproxChainReport> {
    let poly = best_approx(f, space, 33, FitNorm::Minimax)?;
    let poly_error = sup_distance_fn(f, &poly.func, net.domain(), 129);
    let frac = best_fractal_approx(f, space, operator, alpha, net, config, FitNorm::Minimax)?;
    let fractal_error = frac.sup_error;
    let a = alpha.sup();
    let dl = operator.id_minus_norm;
    let f_norm = sup_norm_fn(f, net.domain(), 129);
    let bound = (1.0 + a * (dl - 1.0)).max(1.0) / (1.0 - a) * poly_error
        + a * dl / (1.0 - a) * f_norm;
    Ok(ApproxChainReport { poly_error, fractal_error, bound, pass: fractal_error <= bound + 2e-6 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alpha::multiplication_operator;

    fn pi() -> f64 {
        std::f64::consts::PI
    }

    fn unit_net() -> Net {
        Net::uniform(2, 2, Rect::unit()).unwrap()
    }

    fn standard_operator() -> PerturbOperator {
        let t: BivFn = Arc::new(|x, y| 1.0 + x * (1.0 - x) * y * (1.0 - y));
        multiplication_operator(t, Rect::unit()).unwrap()
    }

    #[test]
    fn total_degree_dimension_formula() {
        for (m, n) in [(0, 0), (1, 1), (2, 3), (4, 0)] {
            let space = PolySpace::new(m, n, DegreeConvention::TotalDegree, Rect::unit());
            assert_eq!(space.dimension(), (m + n + 2) * (m + n + 1) / 2);
        }
        let tp = PolySpace::new(2, 3, DegreeConvention::TensorProduct, Rect::unit());
        assert_eq!(tp.dimension(), 3 * 4);
    }

    #[test]
    fn least_squares_recovers_exact_polynomials() {
        let space = PolySpace::new(1, 1, DegreeConvention::TotalDegree, Rect::unit());
        let f: BivFn = Arc::new(|x, y| 1.0 + 2.0 * x - y + 0.5 * x * y);
        let fit = best_approx(&f, &space, 17, FitNorm::LeastSquares).unwrap();
        assert!(fit.sup_error < 1e-10, "sup error {}", fit.sup_error);
        assert!((fit.func)(0.3, 0.7) - f(0.3, 0.7) < 1e-10);
    }

    #[test]
    fn minimax_constant_fit_of_x_is_half() {
        // best constant approximation of x on [0, 1] is 1/2 with error 1/2
        let space = PolySpace::new(0, 0, DegreeConvention::TotalDegree, Rect::unit());
        let f: BivFn = Arc::new(|x, _| x);
        let fit = best_approx(&f, &space, 33, FitNorm::Minimax).unwrap();
        assert!((fit.sup_error - 0.5).abs() < 1e-6, "sup error {}", fit.sup_error);
        assert!((fit.coeffs[0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn minimax_line_fit_of_x_squared() {
        // best degree-1 fit of x^2 on [0, 1] is x - 1/8, error 1/8
        let space = PolySpace::new(1, 0, DegreeConvention::TotalDegree, Rect::unit());
        let f: BivFn = Arc::new(|x, _| x * x);
        let fit = best_approx(&f, &space, 65, FitNorm::Minimax).unwrap();
        assert!((fit.sup_error - 0.125).abs() < 1e-3, "sup error {}", fit.sup_error);
    }

    #[test]
    fn minimax_never_beats_least_squares_backwards() {
        let space = PolySpace::new(2, 0, DegreeConvention::TotalDegree, Rect::unit());
        let f: BivFn = Arc::new(|x, y| (pi() * x).sin() * (pi() * y).sin());
        let ls = best_approx(&f, &space, 33, FitNorm::LeastSquares).unwrap();
        let mm = best_approx(&f, &space, 33, FitNorm::Minimax).unwrap();
        assert!(mm.sup_error <= ls.sup_error + 1e-12);
    }

    #[test]
    fn zero_scale_fractal_fit_matches_polynomial_fit() {
        let space = PolySpace::new(1, 1, DegreeConvention::TotalDegree, Rect::unit());
        let f: BivFn = Arc::new(|x, y| (pi() * x).sin() * (pi() * y).sin());
        let op = standard_operator();
        let alpha = ScaleFunction::constant(0.0).unwrap();
        let config = SolverConfig { grid_res: 33, ..Default::default() };
        let frac =
            best_fractal_approx(&f, &space, &op, &alpha, &unit_net(), config, FitNorm::LeastSquares)
                .unwrap();
        let poly = best_approx(&f, &space, 33, FitNorm::LeastSquares).unwrap();
        assert!((frac.sup_error - poly.sup_error).abs() < 1e-8);
    }

    #[test]
    fn epsilon_procedure_meets_target() {
        let f: BivFn = Arc::new(|x, y| (pi() * x).sin() * (pi() * y).sin());
        let op = standard_operator();
        let config = SolverConfig { grid_res: 65, ..Default::default() };
        for epsilon in [0.5, 0.1] {
            let fit = epsilon_fractal_polynomial(&f, epsilon, &op, &unit_net(), config).unwrap();
            assert!(fit.achieved <= epsilon, "achieved {} for target {epsilon}", fit.achieved);
            assert!(fit.alpha > 0.0 && fit.alpha < 1.0);
        }
    }

    #[test]
    fn epsilon_procedure_rejects_unreachable_targets() {
        // a discontinuous-looking steep ridge needs more than degree 8
        let f: BivFn = Arc::new(|x, y| ((x - 0.5) * 60.0).tanh() * (1.0 + 0.0 * y));
        let op = standard_operator();
        let config = SolverConfig { grid_res: 33, ..Default::default() };
        assert!(matches!(
            epsilon_fractal_polynomial(&f, 1e-6, &op, &unit_net(), config),
            Err(Error::DegreeBudgetExceeded { .. })
        ));
    }

    #[test]
    fn approx_chain_bound_holds() {
        let f: BivFn = Arc::new(|x, y| (pi() * x).sin() * (pi() * y).sin());
        let op = standard_operator();
        let alpha = ScaleFunction::constant(0.2).unwrap();
        let space = PolySpace::new(1, 1, DegreeConvention::TotalDegree, Rect::unit());
        let config = SolverConfig { grid_res: 33, ..Default::default() };
        let report = verify_approx_chain(&f, &space, &op, &alpha, &unit_net(), config).unwrap();
        assert!(report.pass, "{report:?}");
        assert!(report.fractal_error > 0.0);
    }
}
