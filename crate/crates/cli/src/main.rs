use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cuspfem::assembly::{assemble_galerkin, assemble_sdfem, compute_deltas, DeltaPolicy};
use cuspfem::basis::NodeFamily;
use cuspfem::experiments::{
    convergence_table, emit, eps_sweep_table, ratio_table, report_table, run_cases, run_convergence, run_ratio_table,
    sample_solution, sample_table, Format, Method, Norm, SweepConfig,
};
use cuspfem::mesh::{validate_mesh, Mesh, MeshParams};
use cuspfem::problem::ProblemRegistry;
use cuspfem::Error;

/// Layer-adapted FEM and SDFEM for 1D interior turning-point problems.
#[derive(Parser, Debug)]
#[command(name = "cuspfem", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a mesh, print its header and validation report.
    Mesh(Common),
    /// Solve single cases and print their error report.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Write the assembled system of the first case to this file.
        #[arg(long)]
        dump_system: Option<PathBuf>,
    },
    /// Convergence table with rates between doubled N.
    Converge(Common),
    /// One norm per (eps, k, N) in the wide epsilon-sweep layout.
    EpsSweep(Common),
    /// Error-to-bound ratios E * 100 * (N / (K + 1))^k.
    Ratio(Common),
    /// Discrete and exact solution at equispaced points plus mesh nodes.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1001)]
        resolution: usize,
    },
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON sweep configuration; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    /// Comma-separated list.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Half interval count N, comma-separated.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Element order, comma-separated.
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    family: Option<NodeFamily>,
    #[arg(long)]
    c0: Option<f64>,
    #[arg(long)]
    delta_policy: Option<DeltaPolicy>,
    /// Gauss points per element for assembly (default k + 3).
    #[arg(long)]
    quad_assembly: Option<usize>,
    #[arg(long)]
    quad_error_points: Option<usize>,
    #[arg(long)]
    quad_error_panels: Option<usize>,
    /// Norm for single-norm tables.
    #[arg(long)]
    norm: Option<Norm>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<Format>,
}

/// Built-in grids used when neither a config file nor a flag sets a field.
fn base_config(command: &Command) -> SweepConfig {
    let single = SweepConfig {
        eps: vec![1e-10],
        n: vec![512],
        k: vec![1],
        ..SweepConfig::default()
    };
    match command {
        Command::Mesh(_) | Command::Solve { .. } | Command::Sample { .. } => single,
        Command::Converge(_) => SweepConfig {
            n: vec![64, 128, 256, 512, 1024],
            ..single
        },
        Command::EpsSweep(_) => SweepConfig::default(),
        Command::Ratio(_) => SweepConfig {
            lambda: 0.25,
            eps: (0..=14).map(|j| 10f64.powi(-j)).collect(),
            n: (3..=12).map(|i| 1usize << i).collect(),
            k: vec![2],
            ..SweepConfig::default()
        },
    }
}

fn load_config(command: &Command, common: &Common) -> Result<SweepConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
            SweepConfig::from_json(&text)?
        }
        None => base_config(command),
    };
    let c = common.clone();
    if let Some(v) = c.problem {
        cfg.problem = v;
    }
    if let Some(v) = c.eps {
        cfg.eps = v;
    }
    if let Some(v) = c.lambda {
        cfg.lambda = v;
    }
    if let Some(v) = c.n {
        cfg.n = v;
    }
    if let Some(v) = c.k {
        cfg.k = v;
    }
    if let Some(v) = c.method {
        cfg.method = v;
    }
    if let Some(v) = c.family {
        cfg.family = v;
    }
    if let Some(v) = c.c0 {
        cfg.c0 = v;
    }
    if let Some(v) = c.delta_policy {
        cfg.delta_policy = v;
    }
    if c.quad_assembly.is_some() {
        cfg.quad_assembly = c.quad_assembly;
    }
    if let Some(v) = c.quad_error_points {
        cfg.quad_error.points = v;
    }
    if let Some(v) = c.quad_error_panels {
        cfg.quad_error.panels = v;
    }
    if c.norm.is_some() {
        cfg.norm = c.norm;
    }
    if c.threads.is_some() {
        cfg.threads = c.threads;
    }
    if c.out.is_some() {
        cfg.out = c.out;
    }
    if let Some(v) = c.format {
        cfg.format = v;
    }
    cfg.validate(&ProblemRegistry::default())?;
    Ok(cfg)
}

fn write_text(path: Option<&Path>, text: &str) -> Result<(), Error> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| Error::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn single(cfg: &SweepConfig) -> Result<(f64, usize, usize), Error> {
    match (cfg.eps.as_slice(), cfg.n.as_slice(), cfg.k.as_slice()) {
        ([e], [n], [k]) => Ok((*e, *n, *k)),
        _ => Err(Error::Config("this command needs exactly one eps, n and k".into())),
    }
}

/// Runs the command; `Ok(true)` when every row succeeded.
fn run(cli: Cli) -> Result<bool, Error> {
    let common = match &cli.command {
        Command::Mesh(c) | Command::Converge(c) | Command::EpsSweep(c) | Command::Ratio(c) => c,
        Command::Solve { common, .. } | Command::Sample { common, .. } => common,
    };
    let cfg = load_config(&cli.command, common)?;
    let out = cfg.out.as_deref();
    match &cli.command {
        Command::Mesh(_) => {
            let (eps, n, k) = single(&cfg)?;
            let mesh = Mesh::build(MeshParams::new(eps, n, k, cfg.lambda)?)?;
            let report = validate_mesh(&mesh);
            let summary = serde_json::json!({
                "header": mesh.header(),
                "sigma_branch": mesh.sigma_branch(),
                "violations": report.violations.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
            });
            println!("{}", serde_json::to_string_pretty(&summary).expect("serializable"));
            if let Some(p) = out {
                write_text(Some(p), &mesh.nodes_csv())?;
            }
            Ok(report.is_ok())
        }
        Command::Solve { dump_system, .. } => {
            if let Some(path) = dump_system {
                dump(&cfg, path)?;
            }
            let cases = run_cases(&cfg)?;
            emit(&report_table(&cfg, &cases), cfg.format, out)?;
            Ok(cases.iter().all(|c| !c.failed()))
        }
        Command::Converge(_) => {
            let rows = run_convergence(&cfg)?;
            emit(&convergence_table(&rows), cfg.format, out)?;
            Ok(rows.iter().all(|r| !r.case.failed()))
        }
        Command::EpsSweep(_) => {
            let cases = run_cases(&cfg)?;
            emit(&eps_sweep_table(&cfg, &cases), cfg.format, out)?;
            Ok(cases.iter().all(|c| !c.failed()))
        }
        Command::Ratio(_) => {
            let entries = run_ratio_table(&cfg)?;
            emit(&ratio_table(&cfg, &entries), cfg.format, out)?;
            Ok(entries.iter().all(|e| e.failure.is_none()))
        }
        Command::Sample { resolution, .. } => {
            let points = sample_solution(&cfg, *resolution)?;
            emit(&sample_table(&points), cfg.format, out)?;
            Ok(true)
        }
    }
}

fn dump(cfg: &SweepConfig, path: &Path) -> Result<(), Error> {
    let (eps, n, k) = (cfg.eps[0], cfg.n[0], cfg.k[0]);
    let problem = ProblemRegistry::default().make(&cfg.problem, eps, cfg.lambda)?;
    let mesh = std::sync::Arc::new(Mesh::build(MeshParams::new(eps, n, k, cfg.lambda)?)?);
    let q = cfg.quad_points(k);
    let system = match cfg.method {
        Method::Fem => assemble_galerkin(&problem, &mesh, k, cfg.family, q)?,
        Method::Sdfem => {
            let stab = compute_deltas(&mesh, eps, cfg.c0, cfg.delta_policy, &problem, k)?;
            assemble_sdfem(&problem, &mesh, k, cfg.family, q, &stab)?
        }
    };
    write_text(Some(path), &system.dump())
}

fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Config(_) | Error::UnknownProblem(_) | Error::InvalidParameter { .. } | Error::Io { .. }
    )
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("cuspfem: one or more rows failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("cuspfem: {e}");
            ExitCode::from(if is_config_error(&e) { 1 } else { 2 })
        }
    }
}
