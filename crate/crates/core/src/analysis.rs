//! Numerical analysis of sampled surfaces: norms, box-counting dimension
//! estimates, a second-order smoothness modulus, and convergence tables for
//! the fractal perturbation against its a-priori bounds.

use rayon::prelude::*;
use serde::Serialize;

use crate::alpha::{build_alpha_surface, operator_norm_bounds, PerturbOperator, ScaleFunction, SolverConfig};
use crate::error::{Error, Result};
use crate::field::{BivFn, SampledField};
use crate::net::Net;

/// Sup-norm of a field (max absolute node value).
pub fn sup_norm(field: &SampledField) -> f64 {
    field.sup_norm()
}

/// L^p norm by the midpoint rule: each cell of the field grid contributes
/// its area times the value at the cell center, read as the average of the
/// four corner values. Requires `p >= 1`.
pub fn lp_norm(field: &SampledField, p: f64) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::BadExponent { p });
    }
    let xs = field.xs();
    let ys = field.ys();
    let mut total = 0.0f64;
    for iy in 0..ys.len() - 1 {
        let dy = ys[iy + 1] - ys[iy];
        for ix in 0..xs.len() - 1 {
            let dx = xs[ix + 1] - xs[ix];
            let center = 0.25
                * (field.value(ix, iy)
                    + field.value(ix + 1, iy)
                    + field.value(ix, iy + 1)
                    + field.value(ix + 1, iy + 1));
            total += center.abs().powf(p) * dx * dy;
        }
    }
    Ok(total.powf(1.0 / p))
}

/// Checks the L^p perturbation bound
/// `||f^alpha - f||_p <= (||alpha|| / (1 - ||alpha||)) ||f - Lf||_p`
/// on the working grid, with `1e-6` discretization slack.
#[derive(Debug, Clone, Serialize)]
pub struct LpBoundReport {
    pub p: f64,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
}

pub fn verify_lp_bound(
    f: &BivFn,
    operator: &PerturbOperator,
    alpha: &ScaleFunction,
    net: &Net,
    config: SolverConfig,
    p: f64,
) -> Result<LpBoundReport> {
    let surface =
        build_alpha_surface(f.clone(), operator.clone(), alpha.clone(), net.clone(), config)?;
    let solved = surface.solve()?;
    let field = &solved.field;
    let f_field = SampledField::from_fn(field.xs().to_vec(), field.ys().to_vec(), |x, y| f(x, y));
    let lf = operator.apply(f);
    let lf_field =
        SampledField::from_fn(field.xs().to_vec(), field.ys().to_vec(), |x, y| lf(x, y));
    let measured = lp_norm(&field.zip_with(&f_field, |a, b| a - b), p)?;
    let a = alpha.sup();
    let defect = lp_norm(&f_field.zip_with(&lf_field, |a, b| a - b), p)?;
    let bound = a / (1.0 - a) * defect;
    Ok(LpBoundReport { p, measured, bound, pass: measured <= bound + 1e-6 })
}

/// A box-counting estimate: scales, counts, the fitted slope, and the
/// standard error of the slope (the uncertainty of the dimension).
#[derive(Debug, Clone, Serialize)]
pub struct BoxCountReport {
    pub scales: Vec<f64>,
    pub counts: Vec<f64>,
    pub dimension: f64,
    pub residual: f64,
    /// Number of coarse scales dropped to stabilize the fit.
    pub dropped: usize,
}

/// Box-counting dimension of the graph of a sampled field.
///
/// For each scale `eps = extent / 2^k`, `k = k_min..=k_max`, the domain is
/// cut into `2^k x 2^k` columns; a column with value range `r` meets
/// `floor(r / eps) + 1` boxes. The dimension is the slope of
/// `log N(eps)` against `log(1/eps)`; the reported residual is the
/// standard error of that slope, which absorbs the periodic lacunarity
/// oscillation self-affine graphs show across dyadic scales. If the
/// residual exceeds `0.05` the two coarsest scales are dropped and the
/// fit repeated once.
pub fn box_count_dimension(field: &SampledField, k_min: usize, k_max: usize) -> Result<BoxCountReport> {
    let nx = field.nx();
    let ny = field.ny();
    // need at least one sample per column at the finest scale
    let cols_max = 1usize << k_max;
    if nx - 1 < cols_max || ny - 1 < cols_max {
        return Err(Error::ResolutionTooCoarse { res: nx.min(ny), k_max });
    }
    let xs = field.xs();
    let ys = field.ys();
    let x_extent = xs[nx - 1] - xs[0];
    let y_extent = ys[ny - 1] - ys[0];
    let extent = x_extent.max(y_extent);

    let mut scales = Vec::new();
    let mut counts = Vec::new();
    for k in k_min..=k_max {
        let cols = 1usize << k;
        let eps = extent / cols as f64;
        let count: f64 = (0..cols)
            .into_par_iter()
            .map(|cy| {
                let y_lo = ys[0] + y_extent * cy as f64 / cols as f64;
                let y_hi = ys[0] + y_extent * (cy + 1) as f64 / cols as f64;
                let (jy0, jy1) = index_span(ys, y_lo, y_hi);
                let mut row_total = 0.0f64;
                for cx in 0..cols {
                    let x_lo = xs[0] + x_extent * cx as f64 / cols as f64;
                    let x_hi = xs[0] + x_extent * (cx + 1) as f64 / cols as f64;
                    let (jx0, jx1) = index_span(xs, x_lo, x_hi);
                    let mut lo = f64::INFINITY;
                    let mut hi = f64::NEG_INFINITY;
                    for jy in jy0..=jy1 {
                        for jx in jx0..=jx1 {
                            let v = field.value(jx, jy);
                            lo = lo.min(v);
                            hi = hi.max(v);
                        }
                    }
                    row_total += ((hi - lo) / eps).floor() + 1.0;
                }
                row_total
            })
            .sum();
        scales.push(eps);
        counts.push(count);
    }

    let fit = |s: &[f64], c: &[f64]| -> (f64, f64) {
        let xs: Vec<f64> = s.iter().map(|e| (1.0 / e).ln()).collect();
        let ys: Vec<f64> = c.iter().map(|n| n.ln()).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let ssr: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (y - (slope * x + intercept)).powi(2))
            .sum();
        let residual = (ssr / (n - 2.0) / sxx).sqrt();
        (slope, residual)
    };

    let (mut dimension, mut residual) = fit(&scales, &counts);
    let mut dropped = 0;
    if residual > 0.05 && scales.len() > 4 {
        let (d2, r2) = fit(&scales[2..], &counts[2..]);
        dimension = d2;
        residual = r2;
        dropped = 2;
    }
    Ok(BoxCountReport { scales, counts, dimension, residual, dropped })
}

/// Indices of the grid lines inside `[lo, hi]`, inclusive, never empty.
fn index_span(knots: &[f64], lo: f64, hi: f64) -> (usize, usize) {
    let start = knots.partition_point(|&k| k < lo - 1e-12);
    let end = knots.partition_point(|&k| k <= hi + 1e-12).saturating_sub(1);
    let start = start.min(knots.len() - 1);
    (start.min(end), end.max(start))
}

/// Second-order directional modulus of smoothness with the step-weight
/// `phi(t) = sqrt(1 - t^2)` on the symmetric square `[-1, 1]^2`, applied to
/// the x-direction with y frozen.
///
/// The symmetric second difference `f(x + h phi(x), y) - 2 f(x, y)
/// + f(x - h phi(x), y)` is counted only when both shifted abscissae stay
/// in `[-1, 1]`; elsewhere it is taken as zero. The sup runs over a lattice
/// of base points and over `h in (0, delta]` on a geometric ladder.
pub fn dt_modulus_x(f: &BivFn, delta: f64, base_res: usize, h_steps: usize) -> f64 {
    let mut sup = 0.0f64;
    for step in 1..=h_steps {
        let h = delta * step as f64 / h_steps as f64;
        for iy in 0..base_res {
            let y = -1.0 + 2.0 * iy as f64 / (base_res - 1) as f64;
            for ix in 0..base_res {
                let x = -1.0 + 2.0 * ix as f64 / (base_res - 1) as f64;
                let phi = (1.0 - x * x).max(0.0).sqrt();
                let (xp, xm) = (x + h * phi, x - h * phi);
                if xp.abs() <= 1.0 && xm.abs() <= 1.0 {
                    let d2 = f(xp, y) - 2.0 * f(x, y) + f(xm, y);
                    sup = sup.max(d2.abs());
                }
            }
        }
    }
    sup
}

/// One row of a convergence study: the scale sup, the measured error, and
/// the theoretical bound it must not exceed.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub alpha_sup: f64,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    pub pass: bool,
}

/// Sup-error `||f^alpha - f||` against the a-priori bound
/// `(a / (1 - a)) ||f - Lf||` for a ladder of constant scales.
pub fn convergence_table_alpha(
    f: &BivFn,
    operator: &PerturbOperator,
    net: &Net,
    config: SolverConfig,
    alphas: &[f64],
) -> Result<ConvergenceTable> {
    let mut rows = Vec::with_capacity(alphas.len());
    for &a in alphas {
        let alpha = ScaleFunction::constant(a)?;
        let surface =
            build_alpha_surface(f.clone(), operator.clone(), alpha, net.clone(), config)?;
        let field = &surface.solve()?.field;
        let f_field =
            SampledField::from_fn(field.xs().to_vec(), field.ys().to_vec(), |x, y| f(x, y));
        let measured = field.sup_distance(&f_field);
        let bound = surface.perturbation_bound();
        rows.push(ConvergenceRow {
            alpha_sup: a,
            measured,
            bound,
            pass: measured <= bound + 2.0 * config.tol,
        });
    }
    let pass = rows.iter().all(|r| r.pass);
    Ok(ConvergenceTable { rows, pass })
}

/// Measured fractal-operator norm ratio `||f^alpha|| / ||f||` against the
/// bound `1 + a ||Id - L|| / (1 - a)` for a ladder of constant scales.
pub fn convergence_table_operator(
    f: &BivFn,
    operator: &PerturbOperator,
    net: &Net,
    config: SolverConfig,
    alphas: &[f64],
) -> Result<ConvergenceTable> {
    let mut rows = Vec::with_capacity(alphas.len());
    for &a in alphas {
        let alpha = ScaleFunction::constant(a)?;
        let bounds = operator_norm_bounds(operator, &alpha);
        let surface =
            build_alpha_surface(f.clone(), operator.clone(), alpha, net.clone(), config)?;
        let field = &surface.solve()?.field;
        let f_field =
            SampledField::from_fn(field.xs().to_vec(), field.ys().to_vec(), |x, y| f(x, y));
        let f_norm = f_field.sup_norm();
        let measured = if f_norm > 0.0 { field.sup_norm() / f_norm } else { 0.0 };
        let bound = bounds.fractal_norm_upper;
        rows.push(ConvergenceRow {
            alpha_sup: a,
            measured,
            bound,
            pass: measured <= bound + 2.0 * config.tol,
        });
    }
    let pass = rows.iter().all(|r| r.pass);
    Ok(ConvergenceTable { rows, pass })
}
