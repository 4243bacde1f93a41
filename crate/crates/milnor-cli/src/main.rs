//! `milnor`: run regularity checks, flows, searches and fiber samplers on
//! polynomial map germs, emitting canonical JSON reports and CSV data.
//!
//! Exit codes: 0 completed run (check verdicts live in the report), 2 usage
//! error, 3 germ parse error, 4 numeric or I/O failure.

mod config;

use clap::{Args, Parser, Subcommand};
use config::{parse_vec_arg, Effective, VecArg};
use milnor_core::axioms::{verify_conic_axioms, AxiomPlan};
use milnor_core::conic::{
    example1_h, example1_h_branches, example1_h_inv, field_grid, ConicFlow, ConicParameter,
};
use milnor_core::corpus;
use milnor_core::fibers::{e_theta_sample, fiber_points, milnor_tube_sample};
use milnor_core::germ::{format_germ, parse_germ, MapGerm};
use milnor_core::regularity::{
    attach_submersion_oracle, d_h_regularity_check, d_regularity_along_ray, d_regularity_check,
    transversality_property_check,
};
use milnor_core::report::{canonical_json, write_csv, write_report, SCHEMA_VERSION};
use milnor_core::sampling::{alpha_suitability_map, omega_search, GridSpec, SamplingPlan};
use nalgebra::DVector;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "milnor",
    version = concat!(env!("CARGO_PKG_VERSION"), " (schema 1)"),
    about = "Numerical laboratory for polynomial map germs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

/// Options shared by every subcommand. Precedence: flag > config file >
/// default; the resolved values are embedded in every output.
#[derive(Args, Clone)]
struct Common {
    /// Plain key=value config file (same keys as the long flags).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: $MILNOR_OUT or the working directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    eps: Option<f64>,
    #[arg(long, global = true)]
    delta: Option<f64>,
    #[arg(long, global = true)]
    eta: Option<f64>,
    /// Comma-separated field parameter, e.g. --alpha 0.2,-0.1
    #[arg(long, global = true, value_parser = parse_vec_arg, allow_hyphen_values = true)]
    alpha: Option<VecArg>,
    /// Sample count per stratum.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Sphere strata count for stratified checks.
    #[arg(long, global = true)]
    strata: Option<usize>,
    #[arg(long, global = true)]
    rank_tol: Option<f64>,
    #[arg(long, global = true)]
    tau_radial: Option<f64>,
    #[arg(long, global = true)]
    tau_vertical: Option<f64>,
    #[arg(long, global = true)]
    fd_step: Option<f64>,
    #[arg(long, global = true)]
    value_floor: Option<f64>,
    #[arg(long, global = true)]
    denom_floor: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a germ file and print its normal form and diagnostics.
    Parse {
        #[arg(long)]
        germ: PathBuf,
    },
    /// Evaluate a germ and its Jacobian at a point.
    Eval {
        #[arg(long)]
        germ: PathBuf,
        #[arg(long, value_parser = parse_vec_arg, allow_hyphen_values = true)]
        point: VecArg,
    },
    /// Sample the flow curve through a boundary point as CSV.
    Flow {
        /// Boundary point; rescaled onto the eta-sphere.
        #[arg(long, value_parser = parse_vec_arg, allow_hyphen_values = true)]
        theta: VecArg,
        #[arg(long)]
        curve_samples: Option<usize>,
        #[arg(long)]
        t_min: Option<f64>,
    },
    /// Apply, invert or verify the conic homeomorphism.
    Homeo {
        #[command(subcommand)]
        action: HomeoAction,
    },
    /// Sampled regularity checks.
    Check {
        #[command(subcommand)]
        which: CheckKind,
    },
    /// Search for a radius of suitable parameters.
    SearchOmega {
        #[arg(long)]
        germ: PathBuf,
        /// Parameter draws per candidate radius.
        #[arg(long)]
        alphas: Option<usize>,
    },
    /// Suitability over a parameter grid at a fixed point, as CSV.
    AlphaMap {
        #[arg(long)]
        germ: PathBuf,
        #[arg(long, value_parser = parse_vec_arg, allow_hyphen_values = true)]
        point: VecArg,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        alpha_max: Option<f64>,
    },
    /// Solve for fiber points over a target value.
    Fiber {
        #[arg(long)]
        germ: PathBuf,
        #[arg(long, value_parser = parse_vec_arg, allow_hyphen_values = true)]
        target: VecArg,
        #[arg(long)]
        count: Option<usize>,
    },
    /// Point cloud of the Milnor tube.
    Tube {
        #[arg(long)]
        germ: PathBuf,
        #[arg(long)]
        values: Option<usize>,
        #[arg(long)]
        count: Option<usize>,
    },
    /// Preimage samples of one curved ray.
    Etheta {
        #[arg(long)]
        germ: PathBuf,
        #[arg(long, value_parser = parse_vec_arg, allow_hyphen_values = true)]
        theta: VecArg,
        #[arg(long)]
        curve_samples: Option<usize>,
        #[arg(long)]
        starts: Option<usize>,
    },
    /// Emit the standard conic-field grids (alpha = (-1/2,-1/2)) as CSV.
    Demo {},
}

#[derive(Subcommand)]
enum HomeoAction {
    Apply {
        #[arg(long, value_parser = parse_vec_arg, allow_hyphen_values = true)]
        point: VecArg,
    },
    Invert {
        #[arg(long, value_parser = parse_vec_arg, allow_hyphen_values = true)]
        point: VecArg,
    },
    VerifyAxioms {
        #[arg(long)]
        rays: Option<usize>,
    },
    /// Evaluate the printed closed-form pair for the cubic-surface germ and
    /// report round-trip residuals.
    Example1 {},
}

#[derive(Subcommand)]
enum CheckKind {
    Transversality {
        #[arg(long)]
        germ: PathBuf,
    },
    Dreg {
        #[arg(long)]
        germ: PathBuf,
        /// Sample along this fixed ray instead of random sphere strata.
        #[arg(long, value_parser = parse_vec_arg, allow_hyphen_values = true)]
        ray: Option<VecArg>,
        /// Attach the finite-difference submersion oracle to every sample.
        #[arg(long)]
        oracle: bool,
    },
    Dhreg {
        #[arg(long)]
        germ: PathBuf,
    },
}

enum CliError {
    Usage(String),
    GermParse(String),
    Fatal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::GermParse(_) => 3,
            CliError::Fatal(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::GermParse(m) | CliError::Fatal(m) => m,
        }
    }
}

fn fatal<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Fatal(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn load_germ(path: &Path) -> Result<MapGerm, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("germ")
        .to_string();
    match parse_germ(&text) {
        Ok(g) => Ok(g.with_name(&name)),
        Err(diags) => {
            let mut msg = format!("germ parse failed for {}:", path.display());
            for d in diags {
                msg.push_str(&format!("\n  {d}"));
            }
            Err(CliError::GermParse(msg))
        }
    }
}

/// Insert the effective config, validate, write to the out dir, and echo the
/// canonical JSON on stdout.
fn emit(
    report: serde_json::Value,
    eff: &Effective,
    filename: &str,
) -> Result<(), CliError> {
    let mut value = report;
    if let Some(obj) = value.as_object_mut() {
        obj.insert("config".to_string(), eff.as_json());
    }
    let path = eff.out.join(filename);
    write_report(&value, &path).map_err(fatal)?;
    print!("{}", canonical_json(&value).map_err(fatal)?);
    Ok(())
}

fn conic_parameter(eff: &Effective) -> Result<ConicParameter, CliError> {
    let alpha = DVector::from_vec(eff.alpha.clone());
    ConicParameter::new(alpha, eff.eta).map_err(fatal)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let eff = Effective::resolve(&cli.common).map_err(CliError::Usage)?;
    std::fs::create_dir_all(&eff.out)
        .map_err(|e| CliError::Usage(format!("cannot create out dir: {e}")))?;

    match &cli.command {
        Command::Parse { germ } => {
            let g = load_germ(germ)?;
            let diagnostics = g.validate();
            let report = serde_json::json!({
                "kind": "parse",
                "seed": eff.seed,
                "version": SCHEMA_VERSION,
                "germ": g.name,
                "n": g.n(),
                "k": g.k(),
                "vars": g.vars,
                "normal_form": format_germ(&g),
                "diagnostics": diagnostics,
            });
            emit(report, &eff, &format!("parse.{}.json", g.name))
        }
        Command::Eval { germ, point } => {
            let g = load_germ(germ)?;
            let x = point.to_vector();
            let value = g.evaluate(&x).map_err(fatal)?;
            let jac = g.jacobian(&x).map_err(fatal)?;
            let rows: Vec<Vec<f64>> = (0..g.k())
                .map(|i| (0..g.n()).map(|j| jac[(i, j)]).collect())
                .collect();
            let report = serde_json::json!({
                "kind": "eval",
                "seed": eff.seed,
                "version": SCHEMA_VERSION,
                "germ": g.name,
                "point": x.as_slice(),
                "value": value.as_slice(),
                "jacobian": rows,
            });
            emit(report, &eff, &format!("eval.{}.json", g.name))
        }
        Command::Flow {
            theta,
            curve_samples,
            t_min,
        } => {
            let cp = conic_parameter(&eff)?;
            let eta = cp.eta();
            let raw = theta.to_vector();
            if raw.norm() == 0.0 {
                return Err(CliError::Usage("theta must be nonzero".into()));
            }
            let theta_on_sphere = &raw * (eta / raw.norm());
            let flow = ConicFlow::new(cp);
            let samples = curve_samples.unwrap_or(64);
            let curve = flow.curve(&theta_on_sphere, samples, *t_min).map_err(fatal)?;
            let rows: Vec<Vec<f64>> = curve
                .samples
                .iter()
                .map(|(t, p)| {
                    let mut row = vec![*t];
                    row.extend(p.iter().copied());
                    row
                })
                .collect();
            let k = theta_on_sphere.len();
            let header = std::iter::once("t".to_string())
                .chain((1..=k).map(|i| format!("x{i}")))
                .collect::<Vec<_>>()
                .join(",");
            let csv_name = "flow_curve.csv";
            write_csv(&eff.out.join(csv_name), &header, &rows).map_err(fatal)?;
            let report = serde_json::json!({
                "kind": "flow",
                "seed": eff.seed,
                "version": SCHEMA_VERSION,
                "alpha": eff.alpha,
                "eta": eta,
                "theta": theta_on_sphere.as_slice(),
                "samples": samples,
                "max_defect": curve.max_defect,
                "csv": csv_name,
            });
            emit(report, &eff, "flow.json")
        }
        Command::Homeo { action } => run_homeo(action, &eff),
        Command::Check { which } => run_check(which, &eff),
        Command::SearchOmega { germ, alphas } => {
            let g = load_germ(germ)?;
            let plan = SamplingPlan::strata(eff.eps, eff.strata, eff.samples, eff.seed);
            let result = omega_search(
                &g,
                eff.eps,
                eff.delta,
                alphas.unwrap_or(8),
                &plan,
                &eff.tolerances,
            )
            .map_err(fatal)?;
            let value = serde_json::to_value(&result).map_err(fatal)?;
            emit(value, &eff, &format!("omega.{}.json", g.name))
        }
        Command::AlphaMap {
            germ,
            point,
            grid,
            alpha_max,
        } => {
            let g = load_germ(germ)?;
            let p = point.to_vector();
            let spec = GridSpec {
                per_axis: grid.unwrap_or(41),
                max_norm: alpha_max.unwrap_or(0.95),
            };
            let map = alpha_suitability_map(&g, &p, &spec, &eff.tolerances).map_err(fatal)?;
            let k = g.k();
            let header = (1..=k)
                .map(|i| format!("alpha{i}"))
                .chain(["margin_radial".into(), "margin_vertical".into(), "suitable".into()])
                .collect::<Vec<String>>()
                .join(",");
            let rows: Vec<Vec<f64>> = map
                .cells
                .iter()
                .map(|c| {
                    let mut row = c.alpha.clone();
                    row.push(c.margin_radial.unwrap_or(f64::NAN));
                    row.push(c.margin_vertical.unwrap_or(f64::NAN));
                    row.push(match c.suitable {
                        Some(true) => 1.0,
                        Some(false) => 0.0,
                        None => f64::NAN,
                    });
                    row
                })
                .collect();
            let csv_name = format!("alpha_map.{}.csv", g.name);
            write_csv(&eff.out.join(&csv_name), &header, &rows).map_err(fatal)?;
            let errors = map.cells.iter().filter(|c| c.error.is_some()).count();
            let report = serde_json::json!({
                "kind": "alpha-map",
                "seed": eff.seed,
                "version": SCHEMA_VERSION,
                "germ": g.name,
                "point": p.as_slice(),
                "grid": {"per_axis": spec.per_axis, "max_norm": spec.max_norm},
                "cells": map.cells.len(),
                "cell_errors": errors,
                "csv": csv_name,
            });
            emit(report, &eff, &format!("alpha_map.{}.json", g.name))
        }
        Command::Fiber { germ, target, count } => {
            let g = load_germ(germ)?;
            let c = target.to_vector();
            let sample = fiber_points(
                &g,
                &c,
                eff.eps,
                count.unwrap_or(eff.samples),
                eff.seed,
                eff.tolerances.rank_tol,
            );
            let csv_name = format!("fiber.{}.csv", g.name);
            write_point_cloud(&eff.out.join(&csv_name), g.n(), g.k(), std::iter::once(&sample))
                .map_err(fatal)?;
            let mut value = serde_json::to_value(&sample).map_err(fatal)?;
            if let Some(obj) = value.as_object_mut() {
                obj.insert("kind".into(), "fiber".into());
                obj.insert("germ".into(), g.name.clone().into());
                obj.insert("version".into(), SCHEMA_VERSION.into());
                obj.insert("csv".into(), csv_name.clone().into());
            }
            emit(value, &eff, &format!("fiber.{}.json", g.name))
        }
        Command::Tube { germ, values, count } => {
            let g = load_germ(germ)?;
            let samples = milnor_tube_sample(
                &g,
                eff.eps,
                eff.delta,
                values.unwrap_or(16),
                count.unwrap_or(eff.samples),
                eff.seed,
                eff.tolerances.rank_tol,
            );
            let csv_name = format!("tube.{}.csv", g.name);
            write_point_cloud(&eff.out.join(&csv_name), g.n(), g.k(), samples.iter())
                .map_err(fatal)?;
            let total: usize = samples.iter().map(|s| s.points.len()).sum();
            let failures: usize = samples.iter().map(|s| s.failures).sum();
            let report = serde_json::json!({
                "kind": "tube",
                "seed": eff.seed,
                "version": SCHEMA_VERSION,
                "germ": g.name,
                "epsilon": eff.eps,
                "delta": eff.delta,
                "fibers": samples.len(),
                "points": total,
                "failed_starts": failures,
                "csv": csv_name,
            });
            emit(report, &eff, &format!("tube.{}.json", g.name))
        }
        Command::Etheta {
            germ,
            theta,
            curve_samples,
            starts,
        } => {
            let g = load_germ(germ)?;
            let cp = conic_parameter(&eff)?;
            let eta = cp.eta();
            let raw = theta.to_vector();
            if raw.norm() == 0.0 {
                return Err(CliError::Usage("theta must be nonzero".into()));
            }
            let theta_on_sphere = &raw * (eta / raw.norm());
            let flow = ConicFlow::new(cp);
            let sample = e_theta_sample(
                &g,
                &flow,
                &theta_on_sphere,
                eff.eps,
                curve_samples.unwrap_or(24),
                starts.unwrap_or(eff.samples),
                eff.seed,
                eff.tolerances.rank_tol,
            )
            .map_err(fatal)?;
            let csv_name = format!("etheta.{}.csv", g.name);
            write_point_cloud(&eff.out.join(&csv_name), g.n(), g.k(), sample.fibers.iter())
                .map_err(fatal)?;
            let total: usize = sample.fibers.iter().map(|s| s.points.len()).sum();
            let report = serde_json::json!({
                "kind": "etheta",
                "seed": eff.seed,
                "version": SCHEMA_VERSION,
                "germ": g.name,
                "alpha": sample.alpha,
                "eta": eta,
                "theta": sample.theta,
                "curve_samples": sample.curve.len(),
                "points": total,
                "csv": csv_name,
            });
            emit(report, &eff, &format!("etheta.{}.json", g.name))
        }
        Command::Demo {} => {
            let cp = ConicParameter::new(DVector::from_vec(vec![-0.5, -0.5]), 0.9)
                .map_err(fatal)?;
            let wide = field_grid(&cp, 2.0, 41, None).map_err(fatal)?;
            let ball = field_grid(&cp, 0.5, 41, Some(0.5)).map_err(fatal)?;
            let header = "y1,y2,v1,v2";
            let to_rows = |g: &[[f64; 4]]| -> Vec<Vec<f64>> {
                g.iter().map(|r| r.to_vec()).collect()
            };
            write_csv(&eff.out.join("demo_field_wide.csv"), header, &to_rows(&wide))
                .map_err(fatal)?;
            write_csv(&eff.out.join("demo_field_ball.csv"), header, &to_rows(&ball))
                .map_err(fatal)?;
            let report = serde_json::json!({
                "kind": "demo",
                "seed": eff.seed,
                "version": SCHEMA_VERSION,
                "alpha": [-0.5, -0.5],
                "files": ["demo_field_wide.csv", "demo_field_ball.csv"],
                "wide_rows": wide.len(),
                "ball_rows": ball.len(),
            });
            emit(report, &eff, "demo.json")
        }
    }
}

fn run_homeo(action: &HomeoAction, eff: &Effective) -> Result<(), CliError> {
    match action {
        HomeoAction::Apply { point } => {
            let cp = conic_parameter(eff)?;
            let flow = ConicFlow::new(cp);
            let x = point.to_vector();
            let image = flow.h_apply(&x).map_err(fatal)?;
            let report = serde_json::json!({
                "kind": "homeo-apply",
                "seed": eff.seed,
                "version": SCHEMA_VERSION,
                "alpha": eff.alpha,
                "eta": eff.eta,
                "point": x.as_slice(),
                "image": image.as_slice(),
                "image_norm": image.norm(),
            });
            emit(report, eff, "homeo_apply.json")
        }
        HomeoAction::Invert { point } => {
            let cp = conic_parameter(eff)?;
            let flow = ConicFlow::new(cp);
            let y = point.to_vector();
            let image = flow.h_invert(&y).map_err(fatal)?;
            let report = serde_json::json!({
                "kind": "homeo-invert",
                "seed": eff.seed,
                "version": SCHEMA_VERSION,
                "alpha": eff.alpha,
                "eta": eff.eta,
                "point": y.as_slice(),
                "image": image.as_slice(),
                "image_norm": image.norm(),
            });
            emit(report, eff, "homeo_invert.json")
        }
        HomeoAction::VerifyAxioms { rays } => {
            let cp = conic_parameter(eff)?;
            let k = cp.k();
            let eta = cp.eta();
            let flow = ConicFlow::new(cp);
            let plan = AxiomPlan {
                rays: rays.unwrap_or(8),
                seed: eff.seed,
                ..AxiomPlan::default()
            };
            let report = verify_conic_axioms(
                k,
                |x| flow.h_apply(x).map_err(|e| e.to_string()),
                |y| flow.h_invert(y).map_err(|e| e.to_string()),
                eta,
                &plan,
            );
            let mut value = serde_json::to_value(&report).map_err(fatal)?;
            if let Some(obj) = value.as_object_mut() {
                obj.insert("kind".into(), "homeo-axioms".into());
                obj.insert("seed".into(), eff.seed.into());
                obj.insert("version".into(), SCHEMA_VERSION.into());
                obj.insert("alpha".into(), serde_json::to_value(&eff.alpha).map_err(fatal)?);
            }
            emit(value, eff, "homeo_axioms.json")
        }
        HomeoAction::Example1 {} => {
            let eta = eff.eta;
            let mut samples = Vec::new();
            let mut max_residual: f64 = 0.0;
            let mut max_overlap_gap: f64 = 0.0;
            let thetas = milnor_core::sampling::sample_sphere(2, 1.0, eff.samples, eff.seed);
            for (i, dir) in thetas.iter().enumerate() {
                let r = 0.05 + 0.85 * (i as f64 + 0.5) / thetas.len() as f64;
                let y = dir * (r * eta);
                let hy = match example1_h(eta, &y) {
                    Ok(h) => h,
                    Err(_) => continue,
                };
                let residual = match example1_h_inv(eta, &hy) {
                    Ok(back) => (back - &y).norm(),
                    Err(_) => f64::NAN,
                };
                if residual.is_finite() {
                    max_residual = max_residual.max(residual);
                }
                if let Ok((Some(b1), Some(b2))) = example1_h_branches(eta, &y) {
                    max_overlap_gap = max_overlap_gap.max((b1 - b2).norm());
                }
                samples.push(serde_json::json!({
                    "y": y.as_slice(),
                    "h_y": hy.as_slice(),
                    "residual": residual,
                }));
            }
            let report = serde_json::json!({
                "kind": "example1-roundtrip",
                "seed": eff.seed,
                "version": SCHEMA_VERSION,
                "eta": eta,
                "samples": samples,
                "max_round_trip_residual": max_residual,
                "max_branch_overlap_gap": max_overlap_gap,
                "notes": [
                    "residuals of the printed closed-form pair are recorded, not asserted",
                    "the printed branches lose the sign of the active coordinate, so residuals are large off the positive quadrant",
                ],
            });
            emit(report, eff, "example1_roundtrip.json")
        }
    }
}

fn run_check(which: &CheckKind, eff: &Effective) -> Result<(), CliError> {
    match which {
        CheckKind::Transversality { germ } => {
            let g = load_germ(germ)?;
            let plan = SamplingPlan::single(eff.eps, eff.samples, eff.seed);
            let report =
                transversality_property_check(&g, eff.eps, eff.delta, &plan, &eff.tolerances)
                    .map_err(fatal)?;
            let value = serde_json::to_value(&report).map_err(fatal)?;
            emit(value, eff, &format!("check_transversality.{}.json", g.name))
        }
        CheckKind::Dreg { germ, ray, oracle } => {
            let g = load_germ(germ)?;
            let mut report = match ray {
                Some(r) => {
                    let mut rep = d_regularity_along_ray(
                        &g,
                        &r.to_vector(),
                        eff.eps,
                        eff.samples,
                        &eff.tolerances,
                    )
                    .map_err(fatal)?;
                    // the bundled cubic-surface germ carries a documented
                    // discrepancy narrative for exactly this study
                    if g.name == "example1" {
                        rep.push_note(corpus::EXAMPLE1_DREG_NOTE);
                    }
                    rep
                }
                None => {
                    let plan = SamplingPlan::strata(eff.eps, eff.strata, eff.samples, eff.seed);
                    d_regularity_check(&g, eff.eps, &plan, &eff.tolerances).map_err(fatal)?
                }
            };
            if *oracle {
                attach_submersion_oracle(&mut report, &g, None, &eff.tolerances);
            }
            let value = serde_json::to_value(&report).map_err(fatal)?;
            emit(value, eff, &format!("check_dreg.{}.json", g.name))
        }
        CheckKind::Dhreg { germ } => {
            let g = load_germ(germ)?;
            let alpha = DVector::from_vec(eff.alpha.clone());
            let plan = SamplingPlan::strata(eff.eps, eff.strata, eff.samples, eff.seed);
            let report = d_h_regularity_check(
                &g,
                &alpha,
                eff.eta,
                eff.eps,
                eff.delta,
                &plan,
                &eff.tolerances,
            )
            .map_err(fatal)?;
            let value = serde_json::to_value(&report).map_err(fatal)?;
            emit(value, eff, &format!("check_dhreg.{}.json", g.name))
        }
    }
}

/// Point-cloud CSV: `x1..xn,c1..ck,residual` rows for every accepted point.
fn write_point_cloud<'a>(
    path: &Path,
    n: usize,
    k: usize,
    samples: impl Iterator<Item = &'a milnor_core::fibers::FiberSample>,
) -> Result<(), milnor_core::report::ReportError> {
    let header = (1..=n)
        .map(|i| format!("x{i}"))
        .chain((1..=k).map(|i| format!("c{i}")))
        .chain(std::iter::once("residual".to_string()))
        .collect::<Vec<_>>()
        .join(",");
    let mut rows = Vec::new();
    for s in samples {
        for (p, r) in s.points.iter().zip(&s.residuals) {
            let mut row = p.clone();
            row.extend(s.target.iter().copied());
            row.push(*r);
            rows.push(row);
        }
    }
    write_csv(path, &header, &rows)
}
