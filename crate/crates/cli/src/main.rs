use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use perfscale::corrector::{corrector_scaling_report, CellOptions, CellProblem};
use perfscale::geometry::{BuildOptions, CellBoundary, DomainSpec, Host, Resolution, Spacing};
use perfscale::norms::{cell_poincare, empirical_lower_bound_p, NormProblem, Strategy, Which};
use perfscale::scaling::{format_float, parse_report, verify_report, SweepResult};
use perfscale::vtk::structured_points;
use perfscale_cli::{load_config, parse_config, resolve_workers, run_config, settings, write_report, Config, DEFAULT_CONFIG};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "perfscale", version, about = "Operator-norm scaling experiments on perforated grids")]
struct Cli {
    /// TOML configuration; the shipped default when absent.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `report.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed, overriding `solver.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; `PERFSCALE_WORKERS` when absent.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Progress and timings on standard error.
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum HostArg {
    /// Infinite lattice, through its periodic cell.
    Lattice,
    /// Lattice truncated to `[-2R, 2R]^d`.
    Truncated,
    Bounded,
    /// One cell with natural outer faces.
    Cell,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Exact,
    CorrectorCutoff,
    RandomSearch,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FieldArg {
    Corrector,
    Torsion,
}

#[derive(clap::Args, Debug)]
struct Grid {
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// Grid spacing; dyadic from `--cells` when absent.
    #[arg(long)]
    h: Option<f64>,
    /// Grid cells across the hole's inner radius.
    #[arg(long, default_value_t = 8.0)]
    cells: f64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Periodic corrector statistics over a range of `η`.
    Cell {
        #[command(flatten)]
        grid: Grid,
        #[arg(long, value_delimiter = ',', default_value = "0.25,0.125,0.0625")]
        etas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "2")]
        p: Vec<f64>,
    },
    /// Poincaré constants of the cell with natural outer faces.
    Poincare {
        #[command(flatten)]
        grid: Grid,
        #[arg(long, value_delimiter = ',', default_value = "0.25,0.125,0.0625")]
        etas: Vec<f64>,
    },
    /// One operator-norm measurement as a JSON row.
    Norm {
        #[arg(long)]
        which: Which,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[command(flatten)]
        grid: Grid,
        #[arg(long)]
        eta: f64,
        #[arg(long, default_value_t = 1.0)]
        epsilon: f64,
        #[arg(long, value_enum, default_value_t = HostArg::Lattice)]
        host: HostArg,
        #[arg(long, value_enum, default_value_t = MethodArg::Exact)]
        method: MethodArg,
        /// Side of the bounded host.
        #[arg(long, default_value_t = 1.0)]
        side: f64,
        /// Cutoff radius R; the `R → ∞` limit when absent.
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long, default_value_t = 32)]
        trials: usize,
    },
    /// Runs the configured sweeps and writes the reports.
    Sweep,
    /// Runs the sweeps, or re-judges a stored report, and exits 1 on any failure.
    Verify {
        /// Re-judge this JSON report instead of running.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Writes a grid and optional field as legacy VTK.
    Export {
        #[command(flatten)]
        grid: Grid,
        #[arg(long)]
        eta: f64,
        #[arg(long, default_value_t = 1.0)]
        epsilon: f64,
        #[arg(long, value_enum, default_value_t = HostArg::Lattice)]
        host: HostArg,
        #[arg(long, default_value_t = 1.0)]
        side: f64,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long, value_enum)]
        field: Option<FieldArg>,
        /// Destination file; `<out>/grid.vtk` when absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

struct Ctx {
    cfg: Config,
    out: PathBuf,
    workers: usize,
    verbose: bool,
}

impl Ctx {
    fn cell_options(&self, cells: f64) -> CellOptions {
        let mut opts = CellOptions { solver: self.solver(), build: self.build(cells) };
        opts.solver.tol = opts.solver.tol.min(CellOptions::default().solver.tol);
        opts
    }

    fn build(&self, cells: f64) -> BuildOptions {
        BuildOptions { resolution: Resolution { cells_per_radius: cells }, max_nodes: self.cfg.domain.max_nodes }
    }

    fn solver(&self) -> perfscale::linsolve::SolverOptions {
        settings(&self.cfg, 1).expect("validated config").solver
    }

    fn eigen(&self) -> perfscale::linsolve::EigenOptions {
        settings(&self.cfg, 1).expect("validated config").eigen
    }

    fn note(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn spacing(grid: &Grid) -> Spacing {
    grid.h.map_or(Spacing::Dyadic, |h| Spacing::Fixed { h })
}

fn usage(msg: &str) -> anyhow::Error {
    perfscale::Error::Config(msg.to_string()).into()
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string(v)?);
    Ok(())
}

fn host_of(host: HostArg, side: f64, radius: f64) -> Host<f64> {
    match host {
        HostArg::Lattice => Host::UnitCell { boundary: CellBoundary::Periodic },
        HostArg::Cell => Host::UnitCell { boundary: CellBoundary::Neumann },
        HostArg::Truncated => Host::TruncatedLattice { r: radius },
        HostArg::Bounded => Host::Bounded { side },
    }
}

fn print_verdicts(result: &SweepResult) -> i32 {
    let summary = verify_report(result);
    for line in &summary.lines {
        println!("{line}");
    }
    summary.exit_code
}

fn run(cli: Cli) -> Result<i32> {
    let mut cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => parse_config(DEFAULT_CONFIG).context("shipped config")?,
    };
    if let Some(seed) = cli.seed {
        cfg.solver.seed = seed;
    }
    let out = cli.out.clone().unwrap_or_else(|| cfg.report.dir.clone());
    let ctx = Ctx { workers: resolve_workers(cli.workers)?, cfg, out, verbose: cli.verbose > 0 };
    let shape = ctx.cfg.domain.hole()?;
    let started = Instant::now();

    let code = match cli.command {
        Command::Cell { grid, etas, p } => {
            let rows = corrector_scaling_report(&etas, &shape, grid.d, &p, spacing(&grid), &ctx.cell_options(grid.cells))?;
            print_json(&rows)?;
            0
        }
        Command::Poincare { grid, etas } => {
            #[derive(Serialize)]
            struct Row {
                d: usize,
                eta: f64,
                h: f64,
                value: f64,
            }
            let opts = ctx.cell_options(grid.cells);
            let mut rows = Vec::new();
            for eta in etas {
                let h = spacing(&grid).h_for(&opts.build.resolution, 1.0, eta, shape.c0);
                let value = cell_poincare(&shape, eta, h, grid.d, &opts, &ctx.eigen())?;
                rows.push(Row { d: grid.d, eta, h, value });
            }
            print_json(&rows)?;
            0
        }
        Command::Norm { which, p, grid, eta, epsilon, host, method, side, radius, trials } => {
            let opts = ctx.cell_options(grid.cells);
            let h = spacing(&grid).h_for(&opts.build.resolution, epsilon, eta, shape.c0);
            let spec = DomainSpec { d: grid.d, epsilon, eta, shape, host: host_of(host, side, radius.unwrap_or(1.0)) };
            spec.validate()?;
            let est = match method {
                MethodArg::Exact => {
                    if p != 2.0 {
                        return Err(usage("exact values exist only at p = 2; use --method corrector-cutoff or random-search"));
                    }
                    NormProblem::new(&spec, h, &opts.build, ctx.solver())?.norm_p2(which, &ctx.eigen())?
                }
                MethodArg::CorrectorCutoff => {
                    if !matches!(host, HostArg::Lattice | HostArg::Truncated) {
                        return Err(usage("corrector-cutoff bounds are built on the lattice"));
                    }
                    let strategy = Strategy::CorrectorCutoff { r: radius };
                    empirical_lower_bound_p(&shape, epsilon, eta, grid.d, h, which, p, strategy, &opts)?
                }
                MethodArg::RandomSearch => {
                    let problem_spec = match host {
                        HostArg::Lattice => DomainSpec { host: Host::TruncatedLattice { r: radius.unwrap_or(1.0) }, ..spec },
                        _ => spec,
                    };
                    NormProblem::new(&problem_spec, h, &opts.build, ctx.solver())?.random_search(
                        which,
                        p,
                        trials,
                        ctx.cfg.solver.seed,
                    )?
                }
            };
            print_json(&est)?;
            0
        }
        Command::Sweep => {
            let result = run_config(&ctx.cfg, ctx.workers)?;
            for path in write_report(&result, &ctx.cfg, &ctx.out)? {
                ctx.note(format!("wrote {}", path.display()));
            }
            print_verdicts(&result)
        }
        Command::Verify { report: Some(path) } => {
            let text = std::fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
            print_verdicts(&parse_report(&text)?)
        }
        Command::Verify { report: None } => {
            let result = run_config(&ctx.cfg, ctx.workers)?;
            write_report(&result, &ctx.cfg, &ctx.out)?;
            let code = print_verdicts(&result);
            println!(
                "{} verdicts, {} rows, config {}",
                result.verdicts.len(),
                result.rows.len(),
                &result.config_digest[..16]
            );
            code
        }
        Command::Export { grid, eta, epsilon, host, side, radius, field, output } => {
            let opts = ctx.cell_options(grid.cells);
            let h = spacing(&grid).h_for(&opts.build.resolution, epsilon, eta, shape.c0);
            let spec = DomainSpec { d: grid.d, epsilon, eta, shape, host: host_of(host, side, radius) };
            spec.validate()?;
            let text = match field {
                Some(FieldArg::Corrector) => {
                    if !matches!(host, HostArg::Lattice) || epsilon != 1.0 {
                        return Err(usage("the corrector lives on the periodic unit cell: use --host lattice --epsilon 1"));
                    }
                    let cell = CellProblem::periodic(&shape, eta, h, grid.d, &opts)?;
                    let corr = cell.corrector(&[], 1.0)?;
                    structured_points(cell.grid(), &[("chi", &corr.chi)])?
                }
                Some(FieldArg::Torsion) => {
                    let problem = NormProblem::new(&spec, h, &opts.build, ctx.solver())?;
                    let ones = vec![1.0; problem.grid().fluid_count()];
                    let u = problem.solver().solve(&ones)?.solution;
                    structured_points(problem.grid(), &[("torsion", &u)])?
                }
                None => {
                    let g = perfscale::geometry::build_domain(&spec, h, &opts.build)?;
                    structured_points(&std::sync::Arc::new(g), &[])?
                }
            };
            let path = match output {
                Some(p) => p,
                None => {
                    std::fs::create_dir_all(&ctx.out).with_context(|| format!("cannot create {}", ctx.out.display()))?;
                    ctx.out.join("grid.vtk")
                }
            };
            std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
            ctx.note(format!("wrote {} (h = {})", path.display(), format_float(h)));
            0
        }
    };
    ctx.note(format!("done in {:.1} s", started.elapsed().as_secs_f64()));
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = e.chain().any(|c| {
                c.to_string().starts_with("invalid config")
                    || c.downcast_ref::<perfscale::Error>().is_some_and(|e| {
                        matches!(
                            e,
                            perfscale::Error::Config(_) | perfscale::Error::Unsupported(_) | perfscale::Error::Exponent(_)
                        )
                    })
            });
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}
