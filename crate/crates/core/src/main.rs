//! Command-line front end: single solves, parameter sweeps with CSV output,
//! the closed-form oracle, derivative cross-checks, mesh convergence studies
//! and the aggregate validation report.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on numerical failures.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use obstacle_lab::error::Result;
use obstacle_lab::fem::{energy_boundary, write_solution_text};
use obstacle_lab::geometry::{admissible, Configuration};
use obstacle_lab::harness::{
    self, annulus_exact_energy, csv_string, sweep_boundary_data, sweep_rotation, sweep_scale,
    sweep_translation, SweepRow,
};
use obstacle_lab::mesh::{mesh_stats, validate_with_geometry, Resolution};
use obstacle_lab::shape::{finite_difference_check, solve_case, DerivativeKind};
use obstacle_lab::Error;

/// Worker-count override for sweep parallelism.
const WORKERS_ENV: &str = "OBSTACLE_LAB_WORKERS";

#[derive(Parser)]
#[command(
    name = "obstacle-lab",
    about = "Dirichlet energy of a disk with a dihedral-symmetric obstacle",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct ResolutionArgs {
    /// Angular subdivisions (rounded up to a multiple of 2n per obstacle).
    #[arg(long, default_value_t = 256)]
    nphi: usize,
    /// Radial subdivisions.
    #[arg(long, default_value_t = 64)]
    nr: usize,
    /// Grading exponent clustering rings toward the obstacle.
    #[arg(long, default_value_t = 1.5)]
    grading: f64,
}

impl ResolutionArgs {
    fn resolution(&self) -> Resolution {
        Resolution {
            n_phi: self.nphi,
            n_r: self.nr,
            grading: self.grading,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configuration and print its energies.
    Solve {
        /// JSON configuration file.
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        res: ResolutionArgs,
        /// Write nodal values and boundary fluxes to this file.
        #[arg(long)]
        dump_solution: Option<PathBuf>,
        /// Write the mesh in plain-text format to this file.
        #[arg(long)]
        dump_mesh: Option<PathBuf>,
    },
    /// Closed-form energy for a circular obstacle in a disk.
    Oracle {
        #[arg(long)]
        r0: f64,
        #[arg(long)]
        r1: f64,
        #[arg(long, default_value_t = 0.0)]
        d: f64,
        #[arg(long, default_value_t = 1.0)]
        m: f64,
    },
    /// Energies over a rotation grid spanning one symmetry period.
    SweepRotation {
        #[arg(long)]
        config: PathBuf,
        /// Number of grid points over [0, 2pi/n].
        #[arg(long, default_value_t = 5)]
        tgrid: usize,
        /// Explicit comma-separated angles (overrides --tgrid).
        #[arg(long)]
        t_values: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        res: ResolutionArgs,
    },
    /// Energies over an offset grid; inadmissible offsets emit NA rows.
    SweepTranslation {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 7)]
        dgrid: usize,
        #[arg(long, default_value_t = 0.6)]
        d_max: f64,
        /// Explicit comma-separated offsets (overrides --dgrid/--d-max).
        #[arg(long)]
        d_values: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        res: ResolutionArgs,
    },
    /// Energies over a scale grid; reports the largest admissible scale.
    SweepScale {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 4)]
        lgrid: usize,
        #[arg(long, default_value_t = 2.0)]
        lambda_max: f64,
        /// Explicit comma-separated scales (overrides --lgrid/--lambda-max).
        #[arg(long)]
        lambda_values: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        res: ResolutionArgs,
    },
    /// Energies over a boundary-datum grid.
    SweepBoundaryData {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "1,-1,2,10")]
        m_values: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        res: ResolutionArgs,
    },
    /// Compare the boundary-integral derivative against central differences.
    GradientCheck {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = parse_kind)]
        kind: DerivativeKind,
        /// Override the rotation angle of the configuration.
        #[arg(long)]
        t: Option<f64>,
        /// Override the center offset.
        #[arg(long)]
        d: Option<f64>,
        /// Override the scale.
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        #[command(flatten)]
        res: ResolutionArgs,
    },
    /// Energy on a ladder of refined meshes, with observed convergence order.
    Convergence {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 4)]
        levels: usize,
        #[command(flatten)]
        res: ResolutionArgs,
    },
    /// Run the aggregate validation battery and print one line per check.
    ValidateTables {
        #[command(flatten)]
        res: ResolutionArgs,
    },
}

fn parse_kind(s: &str) -> std::result::Result<DerivativeKind, String> {
    match s {
        "rotation" => Ok(DerivativeKind::Rotation),
        "translation" => Ok(DerivativeKind::Translation),
        "scaling" => Ok(DerivativeKind::Scaling),
        other => Err(format!(
            "unknown kind {other:?}; expected rotation, translation or scaling"
        )),
    }
}

fn parse_list(text: &str) -> std::result::Result<Vec<f64>, String> {
    text.split(',')
        .map(|piece| {
            piece
                .trim()
                .parse::<f64>()
                .map_err(|e| format!("bad number {piece:?}: {e}"))
        })
        .collect()
}

fn load_config(path: &Path) -> Result<Configuration> {
    let text = fs::read_to_string(path)?;
    Configuration::from_json(&text)
}

fn emit_rows(rows: &[SweepRow], out: Option<&Path>) -> Result<()> {
    let text = csv_string(rows);
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap prints help/version through the error path too
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };

    if let Ok(workers) = std::env::var(WORKERS_ENV) {
        if let Ok(count) = workers.parse::<usize>() {
            if count > 0 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(count)
                    .build_global();
            }
        }
    }

    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Solve {
            config,
            res,
            dump_solution,
            dump_mesh,
        } => {
            let cfg = load_config(&config)?;
            let adm = admissible(&cfg.obstacle, &cfg.placement);
            let case = solve_case(&cfg, res.resolution())?;
            let stats = mesh_stats(&case.mesh);
            let report = validate_with_geometry(&case.mesh, &cfg);
            println!("nodes {}", case.mesh.node_count());
            println!("triangles {}", case.mesh.triangles.len());
            println!("h_max {:.6}", stats.h_max);
            println!("min_angle_deg {:.3}", stats.min_angle_deg);
            println!("obtuse_count {}", stats.obtuse_count);
            println!("mesh_valid {}", report.is_valid());
            println!("margin {:.9}", adm.margin);
            println!("cg_iterations {}", case.solution.iterations);
            println!("energy {:.9}", case.solution.energy_volume);
            println!(
                "energy_boundary {:.9}",
                energy_boundary(&case.mesh, &case.solution)
            );
            if let Some(path) = dump_solution {
                let file = fs::File::create(path)?;
                write_solution_text(&case.mesh, &case.solution, std::io::BufWriter::new(file))?;
            }
            if let Some(path) = dump_mesh {
                let file = fs::File::create(path)?;
                case.mesh.write_text(std::io::BufWriter::new(file))?;
            }
            Ok(())
        }
        Command::Oracle { r0, r1, d, m } => {
            let energy = annulus_exact_energy(r0, r1, d, m)?;
            println!("{energy:.6}");
            Ok(())
        }
        Command::SweepRotation {
            config,
            tgrid,
            t_values,
            out,
            res,
        } => {
            let cfg = load_config(&config)?;
            let grid = match t_values {
                Some(text) => parse_list(&text).map_err(Error::Config)?,
                None => {
                    if tgrid < 2 {
                        return Err(Error::Config("tgrid must be at least 2".into()));
                    }
                    let period =
                        obstacle_lab::geometry::TWO_PI / cfg.obstacle.symmetry_order() as f64;
                    (0..tgrid)
                        .map(|k| period * k as f64 / (tgrid - 1) as f64)
                        .collect()
                }
            };
            let (rows, summary) = sweep_rotation(&cfg, &grid, res.resolution())?;
            emit_rows(&rows, out.as_deref())?;
            eprintln!(
                "max E = {:.9} at t = {:.6} ({}); min E = {:.9} at t = {:.6} ({})",
                summary.max_energy,
                summary.argmax_t,
                summary.max_orientation,
                summary.min_energy,
                summary.argmin_t,
                summary.min_orientation,
            );
            Ok(())
        }
        Command::SweepTranslation {
            config,
            dgrid,
            d_max,
            d_values,
            out,
            res,
        } => {
            let cfg = load_config(&config)?;
            let grid = match d_values {
                Some(text) => parse_list(&text).map_err(Error::Config)?,
                None => {
                    if dgrid < 2 {
                        return Err(Error::Config("dgrid must be at least 2".into()));
                    }
                    (0..dgrid)
                        .map(|k| d_max * k as f64 / (dgrid - 1) as f64)
                        .collect()
                }
            };
            let rows = sweep_translation(&cfg, &grid, res.resolution())?;
            emit_rows(&rows, out.as_deref())
        }
        Command::SweepScale {
            config,
            lgrid,
            lambda_max,
            lambda_values,
            out,
            res,
        } => {
            let cfg = load_config(&config)?;
            let grid = match lambda_values {
                Some(text) => parse_list(&text).map_err(Error::Config)?,
                None => {
                    if lgrid < 2 {
                        return Err(Error::Config("lgrid must be at least 2".into()));
                    }
                    (1..=lgrid)
                        .map(|k| lambda_max * k as f64 / lgrid as f64)
                        .collect()
                }
            };
            let (rows, lambda_admissible) = sweep_scale(&cfg, &grid, res.resolution())?;
            emit_rows(&rows, out.as_deref())?;
            eprintln!("largest admissible scale {lambda_admissible:.6}");
            Ok(())
        }
        Command::SweepBoundaryData {
            config,
            m_values,
            out,
            res,
        } => {
            let cfg = load_config(&config)?;
            let grid = parse_list(&m_values).map_err(Error::Config)?;
            let rows = sweep_boundary_data(&cfg, &grid, res.resolution())?;
            emit_rows(&rows, out.as_deref())
        }
        Command::GradientCheck {
            config,
            kind,
            t,
            d,
            lambda,
            step,
            res,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(t) = t {
                cfg.placement = cfg.placement.with_t(t);
            }
            if let Some(d) = d {
                cfg.placement = cfg.placement.with_d(d);
            }
            if let Some(lambda) = lambda {
                cfg.placement = cfg.placement.with_lambda(lambda);
            }
            let check = finite_difference_check(&cfg, kind, step, res.resolution())?;
            println!("analytic {:.9e}", check.analytic);
            println!("central_fd {:.9e}", check.central_fd);
            println!("rel_error {:.3e}", check.rel_error);
            println!("step {:.6e}", check.step);
            Ok(())
        }
        Command::Convergence {
            config,
            levels,
            res,
        } => {
            let cfg = load_config(&config)?;
            let oracle = if cfg.obstacle.family() == obstacle_lab::geometry::ObstacleFamily::Circle
            {
                annulus_exact_energy(
                    cfg.placement.lambda * cfg.obstacle.circumradius(),
                    cfg.placement.r1,
                    cfg.placement.d,
                    cfg.placement.m,
                )
                .ok()
            } else {
                None
            };
            if levels == 0 {
                return Err(Error::Config("levels must be at least 1".into()));
            }
            // ladder from base / 2^(levels-2) up to base * 2, e.g. the default
            // 256x64 with 4 levels runs 64x16, 128x32, 256x64, 512x128
            let base = res.resolution();
            let shift = levels.saturating_sub(2) as u32;
            let mut level = Resolution {
                n_phi: (base.n_phi >> shift).max(8),
                n_r: (base.n_r >> shift).max(2),
                grading: base.grading,
            };
            let mut energies = Vec::new();
            for i in 0..levels {
                let case = solve_case(&cfg, level)?;
                energies.push((level, case.solution.energy_volume, case.mesh.h_max));
                if i + 1 < levels {
                    level = level.refined();
                }
            }
            println!("nphi,nr,h_max,energy,error,order");
            let mut previous_error: Option<f64> = None;
            for (i, &(lv, e, h)) in energies.iter().enumerate() {
                let error = match oracle {
                    Some(exact) => Some((e - exact).abs()),
                    None => {
                        if i + 1 < energies.len() {
                            Some((energies[i + 1].1 - e).abs())
                        } else {
                            None
                        }
                    }
                };
                let order = match (previous_error, error) {
                    (Some(prev), Some(cur)) if cur > 0.0 => Some((prev / cur).log2()),
                    _ => None,
                };
                println!(
                    "{},{},{:.6},{:.9},{},{}",
                    lv.n_phi,
                    lv.n_r,
                    h,
                    e,
                    error.map_or("NA".into(), |v| format!("{v:.3e}")),
                    order.map_or("NA".into(), |v| format!("{v:.2}")),
                );
                previous_error = error;
            }
            Ok(())
        }
        Command::ValidateTables { res } => {
            let outcomes = harness::validate_tables(res.resolution())?;
            let mut all_ok = true;
            let mut stdout = std::io::stdout().lock();
            for outcome in &outcomes {
                let tag = match outcome.passed {
                    Some(true) => "PASS",
                    Some(false) => {
                        all_ok = false;
                        "FAIL"
                    }
                    None => "INFO",
                };
                writeln!(stdout, "{tag} {}: {}", outcome.name, outcome.detail)?;
            }
            drop(stdout);
            if all_ok {
                Ok(())
            } else {
                Err(Error::Config("validation checks failed".into()))
            }
        }
    }
}
