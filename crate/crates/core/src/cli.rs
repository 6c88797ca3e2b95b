//! Command-line front end: build surfaces and export them, run the
//! verification suite, estimate dimensions, run approximation ladders, and
//! benchmark evaluation throughput.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::alpha::{build_alpha_surface, operator_norm_bounds, AlphaSurface};
use crate::analysis::{box_count_dimension, convergence_table_alpha, verify_lp_bound};
use crate::approx::{
    best_approx, best_fractal_approx, epsilon_fractal_polynomial, DegreeConvention, FitNorm,
    PolySpace,
};
use crate::bilinear::{build_bilinear_fis, theoretical_box_dimension, BilinearData, BilinearSurface};
use crate::config::{load_config, ExperimentConfig, SurfaceSpec};
use crate::error::{Error, Result};
use crate::export::{export_field, ExportFormat};
use crate::field::SampledField;
use crate::report::{CheckRecord, Environment, Timings, VerificationReport};

#[derive(Parser)]
#[command(name = "fsk", version, about = "Fractal surface kit: build, verify, and export self-referential interpolation surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Construct the configured surface and write the requested exports.
    Build {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the bound and conformance suite and emit a JSON report.
    Verify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Theoretical and box-count dimension of the configured surface.
    Dimension {
        #[arg(long)]
        config: PathBuf,
    },
    /// Polynomial and fractal approximation error ladders.
    Approx {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluation throughput of the solved surface.
    Bench {
        #[arg(long)]
        config: PathBuf,
    },
}

/// Runs the CLI; returns the process exit code (0 success, 1 check
/// failure, 2 usage or configuration error).
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders help/version as "errors" with success status
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::Build { config } => with_config(config, cmd_build),
        Command::Verify { config } => with_config(config, cmd_verify),
        Command::Dimension { config } => with_config(config, cmd_dimension),
        Command::Approx { config } => with_config(config, cmd_approx),
        Command::Bench { config } => with_config(config, cmd_bench),
    };
    match outcome {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(Error::Parse(msg)) | Err(Error::Validation { message: msg, .. }) => {
            eprintln!("error: {msg}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io(_) => 2,
                _ => 1,
            }
        }
    }
}

fn with_config(path: &Path, run: fn(&ExperimentConfig) -> Result<bool>) -> Result<bool> {
    let config = load_config(path)?;
    run(&config)
}

enum BuiltSurface {
    Alpha(AlphaSurface),
    Bilinear(BilinearSurface),
}

fn build_surface(config: &ExperimentConfig) -> Result<BuiltSurface> {
    let net = config.build_net()?;
    match &config.surface {
        SurfaceSpec::Alpha { f, operator, alpha } => {
            let domain = net.domain();
            let f = config.build_function(f)?;
            let operator = config.build_operator(operator, domain)?;
            let alpha = config.build_alpha(alpha, domain)?;
            Ok(BuiltSurface::Alpha(build_alpha_surface(
                f,
                operator,
                alpha,
                net,
                config.solver.into(),
            )?))
        }
        SurfaceSpec::Bilinear { z, s } => {
            let z = config.build_lattice(z)?;
            let s = config.build_lattice(s)?;
            Ok(BuiltSurface::Bilinear(build_bilinear_fis(net, BilinearData::new(z, s)?)?))
        }
    }
}

fn solve_surface(config: &ExperimentConfig, surface: &BuiltSurface) -> Result<SampledField> {
    match surface {
        BuiltSurface::Alpha(s) => Ok(s.solve()?.field.clone()),
        BuiltSurface::Bilinear(s) => {
            Ok(s.solve_on_res(config.solver.grid_res, config.solver.tol)?.field)
        }
    }
}

fn cmd_build(config: &ExperimentConfig) -> Result<bool> {
    let surface = build_surface(config)?;
    let field = solve_surface(config, &surface)?;
    let outputs = [
        (&config.output.csv, ExportFormat::Csv),
        (&config.output.pgm, ExportFormat::Pgm),
        (&config.output.obj, ExportFormat::Obj),
    ];
    let mut wrote = 0;
    for (path, format) in outputs {
        if let Some(path) = path {
            export_field(&field, format, Path::new(path))?;
            println!("wrote {path}");
            wrote += 1;
        }
    }
    if wrote == 0 {
        println!(
            "built {}x{} surface (no output paths configured)",
            field.nx(),
            field.ny()
        );
    }
    Ok(true)
}

fn cmd_verify(config: &ExperimentConfig) -> Result<bool> {
    let start = Instant::now();
    let surface = build_surface(config)?;
    let mut checks = Vec::new();
    match &surface {
        BuiltSurface::Alpha(s) => {
            let conf = s.conformance(16, 1e-12);
            checks.push(CheckRecord::bound(
                "corner conditions",
                "vertical maps carry knot corners to adjacent knot values",
                conf.max_corner_defect,
                0.0,
                conf.tolerance,
            ));
            checks.push(CheckRecord::bound(
                "edge matching",
                "adjacent vertical maps agree on shared cell edges",
                conf.max_matching_defect,
                0.0,
                conf.tolerance,
            ));
            checks.push(CheckRecord::bound(
                "knot interpolation",
                "the perturbed surface passes through the seed knot values",
                s.knot_defect()?,
                0.0,
                1e-8,
            ));
            let field = &s.solve()?.field;
            let f = s.seed_fn();
            let f_field =
                SampledField::from_fn(field.xs().to_vec(), field.ys().to_vec(), |x, y| f(x, y));
            checks.push(CheckRecord::bound(
                "perturbation error bound",
                "||f^a - f|| <= (||a|| / (1 - ||a||)) ||f - Lf||",
                field.sup_distance(&f_field),
                s.perturbation_bound(),
                1e-8,
            ));
            if config.analysis.bounds {
                let bounds = operator_norm_bounds(s.operator(), s.alpha());
                let f_norm = f_field.sup_norm();
                let ratio = if f_norm > 0.0 { field.sup_norm() / f_norm } else { 0.0 };
                checks.push(CheckRecord::bound(
                    "operator norm bound",
                    "||f^a|| / ||f|| <= 1 + ||a|| ||Id - L|| / (1 - ||a||)",
                    ratio,
                    bounds.fractal_norm_upper,
                    1e-8,
                ));
                if let Some(c) = bounds.bounded_below_constant {
                    checks.push(CheckRecord::bound(
                        "bounded below",
                        "||f^a|| >= ((1 - ||a|| ||L||) / (1 + ||a||)) ||f||",
                        c * f_norm,
                        field.sup_norm(),
                        2e-8,
                    ));
                }
            }
            for &p in &config.analysis.lp {
                let r = verify_lp_bound(
                    s.seed_fn(),
                    s.operator(),
                    s.alpha(),
                    s.net(),
                    s.config(),
                    p,
                )?;
                checks.push(CheckRecord::bound(
                    &format!("Lp perturbation bound (p = {p})"),
                    "||f^a - f||_p <= (||a|| / (1 - ||a||)) ||f - Lf||_p",
                    r.measured,
                    r.bound,
                    1e-6,
                ));
            }
        }
        BuiltSurface::Bilinear(s) => {
            let data = s.data().z.clone();
            let corners = crate::ifs::verify_corner_conditions(s.family(), &data, 1e-12);
            checks.push(CheckRecord::bound(
                "corner conditions",
                "vertical maps carry knot corners to adjacent knot values",
                corners.max_corner_defect,
                0.0,
                corners.tolerance,
            ));
            let matching = crate::ifs::verify_matching_conditions(
                s.family(),
                16,
                (data.min() - 1.0, data.max() + 1.0),
                1e-12,
            );
            checks.push(CheckRecord::bound(
                "edge matching",
                "adjacent vertical maps agree on shared cell edges",
                matching.max_matching_defect,
                0.0,
                matching.tolerance,
            ));
            let out = s.solve_on_res(config.solver.grid_res, config.solver.tol)?;
            let mut knot_defect = 0.0f64;
            for (j, &y) in s.net().ys().iter().enumerate() {
                for (i, &x) in s.net().xs().iter().enumerate() {
                    knot_defect = knot_defect.max((out.field.sample(x, y) - data.get(i, j)).abs());
                }
            }
            checks.push(CheckRecord::bound(
                "knot interpolation",
                "the attractor passes through the knot data",
                knot_defect,
                0.0,
                1e-8,
            ));
        }
    }
    let report = VerificationReport::new(
        checks,
        Environment {
            grid_res: config.solver.grid_res,
            tol: config.solver.tol,
            threads: rayon::current_num_threads(),
        },
        Timings { total_ms: start.elapsed().as_millis() },
    );
    emit_report(config, &report)?;
    Ok(report.pass)
}

fn cmd_dimension(config: &ExperimentConfig) -> Result<bool> {
    let start = Instant::now();
    let surface = build_surface(config)?;
    let mut checks = Vec::new();
    let res = config.analysis.dimension_res;
    let [k_min, k_max] = config.analysis.scales;
    match &surface {
        BuiltSurface::Bilinear(s) => {
            let verdict = theoretical_box_dimension(s)?;
            let out = s.solve_on_res(res, config.solver.tol)?;
            let estimate = box_count_dimension(&out.field, k_min, k_max)?;
            println!(
                "theoretical dimension: {:.6}; box-count estimate: {:.6} (residual {:.4})",
                verdict.dimension(),
                estimate.dimension,
                estimate.residual
            );
            checks.push(CheckRecord::bound(
                "box-count matches closed form",
                "measured dimension within 0.2 of 1 + log(gamma)/log(N)",
                (estimate.dimension - verdict.dimension()).abs(),
                0.2,
                0.0,
            ));
            checks.push(CheckRecord::bound(
                "box-count fit residual",
                "log-log regression residual below 0.05",
                estimate.residual,
                0.05,
                0.0,
            ));
        }
        BuiltSurface::Alpha(s) => {
            let out = s.solve_on_res(res)?;
            let estimate = box_count_dimension(&out.field, k_min, k_max)?;
            println!(
                "box-count estimate: {:.6} (residual {:.4}); no closed form for this surface",
                estimate.dimension, estimate.residual
            );
            checks.push(CheckRecord::bound(
                "box-count estimate is a surface dimension",
                "estimate lies in [2 - 0.1, 3]",
                2.0 - estimate.dimension,
                0.1,
                0.0,
            ));
        }
    }
    let report = VerificationReport::new(
        checks,
        Environment {
            grid_res: res,
            tol: config.solver.tol,
            threads: rayon::current_num_threads(),
        },
        Timings { total_ms: start.elapsed().as_millis() },
    );
    emit_report(config, &report)?;
    Ok(report.pass)
}

fn cmd_approx(config: &ExperimentConfig) -> Result<bool> {
    let start = Instant::now();
    let net = config.build_net()?;
    let (f, operator, alpha) = match &config.surface {
        SurfaceSpec::Alpha { f, operator, alpha } => (
            config.build_function(f)?,
            config.build_operator(operator, net.domain())?,
            config.build_alpha(alpha, net.domain())?,
        ),
        SurfaceSpec::Bilinear { .. } => {
            return Err(Error::Validation {
                field: "surface".into(),
                message: "approximation ladders need a self-referential surface config".into(),
            })
        }
    };
    let mut checks = Vec::new();
    let mut last_poly = f64::INFINITY;
    for &degree in &config.analysis.degrees {
        let space = PolySpace::new(degree, 0, DegreeConvention::TotalDegree, net.domain());
        let poly = best_approx(&f, &space, 33, FitNorm::Minimax)?;
        let frac = best_fractal_approx(
            &f,
            &space,
            &operator,
            &alpha,
            &net,
            config.solver.into(),
            FitNorm::Minimax,
        )?;
        println!(
            "degree {degree}: polynomial error {:.6e}, fractal error {:.6e}",
            poly.sup_error, frac.sup_error
        );
        checks.push(CheckRecord::bound(
            &format!("polynomial ladder monotone (degree {degree})"),
            "best-approximation error does not increase with the degree",
            poly.sup_error,
            last_poly,
            1e-9,
        ));
        last_poly = poly.sup_error;
    }
    if let Some(epsilon) = config.analysis.epsilon {
        let fit = epsilon_fractal_polynomial(&f, epsilon, &operator, &net, config.solver.into())?;
        println!(
            "epsilon {epsilon}: degree {}, scale {:.6}, achieved {:.6e}",
            fit.degree, fit.alpha, fit.achieved
        );
        checks.push(CheckRecord::bound(
            "epsilon procedure meets the target",
            "fractal approximant within epsilon in the sup norm",
            fit.achieved,
            epsilon,
            0.0,
        ));
        let space = PolySpace::new(fit.degree, 0, DegreeConvention::TotalDegree, net.domain());
        let poly = best_approx(&f, &space, 33, FitNorm::Minimax)?;
        let p_norm = {
            let fld = SampledField::from_fn(
                (0..129).map(|i| net.domain().x0 + net.domain().width() * i as f64 / 128.0).collect(),
                (0..129).map(|i| net.domain().y0 + net.domain().height() * i as f64 / 128.0).collect(),
                |x, y| (poly.func)(x, y),
            );
            fld.sup_norm()
        };
        let threshold = (epsilon / 2.0) / (epsilon / 2.0 + operator.id_minus_norm * p_norm);
        checks.push(CheckRecord::bound(
            "epsilon scale below the admissible threshold",
            "|a| < (e/2) / (e/2 + ||Id - L|| ||p||)",
            fit.alpha,
            threshold,
            0.0,
        ));
    }
    let table = convergence_table_alpha(
        &f,
        &operator,
        &net,
        config.solver.into(),
        &[0.4, 0.2, 0.1, 0.05],
    )?;
    checks.push(CheckRecord::verdict(
        "perturbation errors below their bounds on the scale ladder",
        "measured sup-errors bounded by (||a|| / (1 - ||a||)) ||f - Lf||",
        table.rows.iter().map(|r| r.measured).fold(0.0, f64::max),
        table.rows.iter().map(|r| r.bound).fold(0.0, f64::max),
        table.pass,
    ));
    let report = VerificationReport::new(
        checks,
        Environment {
            grid_res: config.solver.grid_res,
            tol: config.solver.tol,
            threads: rayon::current_num_threads(),
        },
        Timings { total_ms: start.elapsed().as_millis() },
    );
    emit_report(config, &report)?;
    Ok(report.pass)
}

fn cmd_bench(config: &ExperimentConfig) -> Result<bool> {
    let surface = build_surface(config)?;
    let field = solve_surface(config, &surface)?;
    let interp = field.interpolant();
    let dom = match &surface {
        BuiltSurface::Alpha(s) => s.net().domain(),
        BuiltSurface::Bilinear(s) => s.net().domain(),
    };
    let n = 1_000_000usize;
    let start = Instant::now();
    let mut acc = 0.0f64;
    for k in 0..n {
        let t = k as f64 / n as f64;
        acc += interp(dom.x0 + dom.width() * t, dom.y0 + dom.height() * (1.0 - t));
    }
    let elapsed = start.elapsed().as_secs_f64();
    println!(
        "evaluated {n} points in {elapsed:.3} s ({:.3e} points/s, checksum {acc:.6})",
        n as f64 / elapsed
    );
    Ok(true)
}

fn emit_report(config: &ExperimentConfig, report: &VerificationReport) -> Result<()> {
    let json = report.to_json();
    if let Some(path) = &config.output.report {
        std::fs::write(path, &json)?;
        println!("report written to {path} (pass: {})", report.pass);
    } else {
        println!("{json}");
    }
    Ok(())
}
