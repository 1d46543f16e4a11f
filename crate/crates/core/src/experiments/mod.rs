//! Parameter sweeps: convergence tables, epsilon sweeps, error-to-bound
//! ratios and solution samples.
//!
//! Independent `(k, eps, N)` cases run on a rayon pool; results are
//! collected in configuration order, so output never depends on scheduling.

mod table;

use std::path::PathBuf;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use table::{emit, sci, Cell, Format, Table};

use crate::assembly::{
    assemble_galerkin, assemble_sdfem, compute_deltas, solve_banded, DeltaPolicy, DiscreteFunction,
    StabilizationProfile,
};
use crate::basis::NodeFamily;
use crate::error::{Error, Result};
use crate::mesh::{validate_mesh, Mesh, MeshParams};
use crate::norms::{discrete_distance, error_norms, interpolate, ErrorReport, QuadSpec};
use crate::problem::{Problem, ProblemRegistry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Fem,
    Sdfem,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Fem => "fem",
            Method::Sdfem => "sdfem",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fem" => Ok(Method::Fem),
            "sdfem" => Ok(Method::Sdfem),
            other => Err(Error::param("method", format!("unknown method `{other}`"))),
        }
    }
}

/// Error measure selected for single-norm tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    L2,
    Energy,
    Sd,
    WeightedXdp,
    Superclose,
}

impl Norm {
    pub const ALL: [Norm; 5] = [Norm::L2, Norm::Energy, Norm::Sd, Norm::WeightedXdp, Norm::Superclose];

    pub fn name(self) -> &'static str {
        match self {
            Norm::L2 => "l2",
            Norm::Energy => "energy",
            Norm::Sd => "sd",
            Norm::WeightedXdp => "weighted_xdp",
            Norm::Superclose => "superclose",
        }
    }
}

impl std::str::FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Norm::ALL
            .into_iter()
            .find(|n| n.name() == s)
            .ok_or_else(|| Error::param("norm", format!("unknown norm `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub problem: String,
    pub lambda: f64,
    pub eps: Vec<f64>,
    pub n: Vec<usize>,
    pub k: Vec<usize>,
    pub method: Method,
    pub family: NodeFamily,
    pub c0: f64,
    pub delta_policy: DeltaPolicy,
    /// Gauss points per element for assembly; `k + 3` when unset.
    pub quad_assembly: Option<usize>,
    pub quad_error: QuadSpec,
    /// Norm for single-norm tables; energy for FEM and SD for SDFEM when unset.
    pub norm: Option<Norm>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl Default for SweepConfig {
    /// The epsilon-sweep grid: `eps = 1, 1e-2, ..., 1e-14`, `N = 512, 1024`,
    /// `k = 1..=4`, `lambda = 0.005`.
    fn default() -> Self {
        Self {
            problem: "cusp-layer".into(),
            lambda: 0.005,
            eps: (0..=7).map(|j| 10f64.powi(-2 * j)).collect(),
            n: vec![512, 1024],
            k: vec![1, 2, 3, 4],
            method: Method::Fem,
            family: NodeFamily::Uniform,
            c0: 1.0,
            delta_policy: DeltaPolicy::Standard,
            quad_assembly: None,
            quad_error: QuadSpec::default(),
            norm: None,
            threads: None,
            out: None,
            format: Format::Csv,
        }
    }
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SweepConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Structural checks that do not require running anything.
    pub fn validate(&self, registry: &ProblemRegistry) -> Result<()> {
        if !registry.names().any(|n| n == self.problem) {
            return Err(Error::UnknownProblem(self.problem.clone()));
        }
        if self.eps.is_empty() || self.n.is_empty() || self.k.is_empty() {
            return Err(Error::Config("eps, n and k lists must be non-empty".into()));
        }
        if let Some(&e) = self.eps.iter().find(|&&e| !(e > 0.0 && e <= 1.0)) {
            return Err(Error::Config(format!("eps = {e} not in (0, 1]")));
        }
        if self.n.windows(2).any(|w| w[0] >= w[1]) || self.n[0] == 0 {
            return Err(Error::Config("n must be positive and strictly ascending".into()));
        }
        if let Some(&k) = self.k.iter().find(|&&k| k == 0 || k > crate::basis::MAX_ORDER) {
            return Err(Error::Config(format!(
                "k = {k} outside 1..={}",
                crate::basis::MAX_ORDER
            )));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::Config(format!("lambda = {} must be positive", self.lambda)));
        }
        if !(self.c0 > 0.0) {
            return Err(Error::Config(format!("c0 = {} must be positive", self.c0)));
        }
        if let Some(q) = self.quad_assembly {
            if let Some(&k) = self.k.iter().find(|&&k| q < k + 1) {
                return Err(Error::Config(format!("quad_assembly = {q} < k + 1 for k = {k}")));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        self.quad_error.check().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn quad_points(&self, k: usize) -> usize {
        self.quad_assembly.unwrap_or(k + 3)
    }

    pub fn table_norm(&self) -> Norm {
        self.norm.unwrap_or(match self.method {
            Method::Fem => Norm::Energy,
            Method::Sdfem => Norm::Sd,
        })
    }

    fn policy_name(&self) -> &'static str {
        match self.method {
            Method::Fem => "none",
            Method::Sdfem => self.delta_policy.name(),
        }
    }
}

/// Everything measured for one `(k, eps, N)` case.
#[derive(Debug, Clone)]
pub struct CaseOutcome {
    pub k: usize,
    pub eps: f64,
    pub n: usize,
    pub big_k: Option<usize>,
    pub mesh_ok: bool,
    pub residual: Option<f64>,
    pub report: Option<ErrorReport>,
    /// Distance between interpolant and discrete solution, in the SD norm
    /// for SDFEM and in the energy norm for FEM.
    pub superclose: Option<f64>,
    pub failure: Option<String>,
}

impl CaseOutcome {
    pub fn residual_ok(&self) -> bool {
        self.residual.is_some_and(|r| r <= crate::assembly::RESIDUAL_TOLERANCE)
    }

    pub fn failed(&self) -> bool {
        self.failure.is_some() || !self.mesh_ok || !self.residual_ok()
    }

    pub fn value(&self, norm: Norm) -> Option<f64> {
        let r = self.report.as_ref()?;
        match norm {
            Norm::L2 => Some(r.l2),
            Norm::Energy => Some(r.energy),
            Norm::Sd => Some(r.sd),
            Norm::WeightedXdp => Some(r.weighted_xdp),
            Norm::Superclose => self.superclose,
        }
    }
}

/// Discrete solution of one case together with everything needed to measure it.
pub struct Solved {
    pub problem: Problem,
    pub mesh: Arc<Mesh>,
    pub stab: Option<StabilizationProfile>,
    pub solution: DiscreteFunction,
    pub residual: f64,
}

/// Builds the mesh, assembles and solves a single case.
pub fn solve_case(cfg: &SweepConfig, registry: &ProblemRegistry, eps: f64, n: usize, k: usize) -> Result<Solved> {
    let problem = registry.make(&cfg.problem, eps, cfg.lambda)?;
    let mesh = Arc::new(Mesh::build(MeshParams::new(eps, n, k, cfg.lambda)?)?);
    let q = cfg.quad_points(k);
    let (system, stab) = match cfg.method {
        Method::Fem => (assemble_galerkin(&problem, &mesh, k, cfg.family, q)?, None),
        Method::Sdfem => {
            let stab = compute_deltas(&mesh, eps, cfg.c0, cfg.delta_policy, &problem, k)?;
            (assemble_sdfem(&problem, &mesh, k, cfg.family, q, &stab)?, Some(stab))
        }
    };
    let out = solve_banded(&system)?;
    Ok(Solved {
        problem,
        mesh,
        stab,
        solution: out.solution,
        residual: out.residual,
    })
}

/// Solves and measures one case; failures are recorded, not propagated.
pub fn run_case(cfg: &SweepConfig, registry: &ProblemRegistry, eps: f64, n: usize, k: usize) -> CaseOutcome {
    let mut outcome = CaseOutcome {
        k,
        eps,
        n,
        big_k: None,
        mesh_ok: false,
        residual: None,
        report: None,
        superclose: None,
        failure: None,
    };
    let measured = solve_case(cfg, registry, eps, n, k).and_then(|s| {
        let report = error_norms(&s.solution, &s.problem, s.stab.as_ref(), cfg.quad_error)?;
        let ui = interpolate(&s.problem, &s.mesh, k, cfg.family)?;
        let dist = discrete_distance(&ui, &s.solution, &s.problem, s.stab.as_ref(), cfg.quad_error)?;
        Ok((s, report, dist.sd))
    });
    match measured {
        Ok((s, report, superclose)) => {
            let validation = validate_mesh(&s.mesh);
            outcome.big_k = Some(s.mesh.big_k());
            outcome.mesh_ok = validation.is_ok();
            if !validation.is_ok() {
                let list: Vec<String> = validation.violations.iter().map(|v| v.to_string()).collect();
                outcome.failure = Some(format!("mesh validation: {}", list.join("; ")));
            }
            outcome.residual = Some(s.residual);
            if !outcome.residual_ok() && outcome.failure.is_none() {
                outcome.failure = Some(format!("residual {:e} above tolerance", s.residual));
            }
            outcome.report = Some(report);
            outcome.superclose = Some(superclose);
        }
        Err(e) => outcome.failure = Some(e.to_string()),
    }
    outcome
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::Config(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Runs every `(k, eps, N)` combination, ordered by `k`, then `eps`, then `N`.
pub fn run_cases(cfg: &SweepConfig) -> Result<Vec<CaseOutcome>> {
    let registry = ProblemRegistry::default();
    cfg.validate(&registry)?;
    let cases: Vec<(usize, f64, usize)> = cfg
        .k
        .iter()
        .flat_map(|&k| cfg.eps.iter().flat_map(move |&e| cfg.n.iter().map(move |&n| (k, e, n))))
        .collect();
    with_pool(cfg.threads, || {
        cases
            .par_iter()
            .map(|&(k, e, n)| run_case(cfg, &registry, e, n, k))
            .collect()
    })
}

/// `(ln E_N - ln E_2N) / ln 2`.
pub fn rate(e_n: f64, e_2n: f64) -> f64 {
    (e_n.ln() - e_2n.ln()) / std::f64::consts::LN_2
}

/// Least-squares slope of `-log2 E` against `log2 N`.
pub fn fitted_order(ns: &[usize], errors: &[f64]) -> f64 {
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).log2()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| -e.log2()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub case: CaseOutcome,
    /// Rate towards the next (doubled) `N`, per norm in [`Norm::ALL`] order;
    /// `None` for the last `N` of a group or a non-doubling step.
    pub rates: Option<[Option<f64>; 5]>,
}

/// Convergence study with rates between consecutive doubled `N`.
pub fn run_convergence(cfg: &SweepConfig) -> Result<Vec<ConvergenceRow>> {
    let cases = run_cases(cfg)?;
    let per_group = cfg.n.len();
    let mut rows = Vec::with_capacity(cases.len());
    for group in cases.chunks(per_group) {
        for (i, case) in group.iter().enumerate() {
            let rates = group.get(i + 1).filter(|next| next.n == 2 * case.n).map(|next| {
                Norm::ALL.map(|norm| match (case.value(norm), next.value(norm)) {
                    (Some(a), Some(b)) if a > 0.0 && b > 0.0 => Some(rate(a, b)),
                    _ => None,
                })
            });
            rows.push(ConvergenceRow {
                case: case.clone(),
                rates,
            });
        }
    }
    Ok(rows)
}

fn opt_real(v: Option<f64>) -> Cell {
    v.map_or(Cell::Empty, Cell::Real)
}

fn eps_cell(eps: f64) -> Cell {
    Cell::Text(sci(eps, 0).replace("e+00", "").replace("e-0", "e-"))
}

/// One row per case: keys, all norms, all rates, then status columns.
pub fn convergence_table(rows: &[ConvergenceRow]) -> Table {
    let mut columns: Vec<String> = ["eps", "N", "K", "k"].map(String::from).to_vec();
    columns.extend(Norm::ALL.iter().map(|n| n.name().to_string()));
    columns.extend(Norm::ALL.iter().map(|n| format!("rate_{}", n.name())));
    columns.extend(["mesh_ok", "residual_ok", "failure"].map(String::from));
    let mut table = Table::new(columns);
    for row in rows {
        let c = &row.case;
        let mut cells = vec![
            eps_cell(c.eps),
            Cell::Int(c.n as i64),
            c.big_k.map_or(Cell::Empty, |k| Cell::Int(k as i64)),
            Cell::Int(c.k as i64),
        ];
        cells.extend(Norm::ALL.iter().map(|&n| opt_real(c.value(n))));
        for i in 0..Norm::ALL.len() {
            cells.push(row.rates.and_then(|r| r[i]).map_or(Cell::Empty, Cell::Rate));
        }
        cells.push(Cell::Bool(c.mesh_ok));
        cells.push(Cell::Bool(c.residual_ok()));
        cells.push(c.failure.clone().map_or(Cell::Empty, Cell::Text));
        table.push(cells);
    }
    table
}

/// Wide layout: one row per `eps`, one column per `(k, N)` holding the
/// selected norm.
pub fn eps_sweep_table(cfg: &SweepConfig, cases: &[CaseOutcome]) -> Table {
    let norm = cfg.table_norm();
    let mut columns = vec!["eps".to_string()];
    for &k in &cfg.k {
        for &n in &cfg.n {
            columns.push(format!("P{k} N={n}"));
        }
    }
    let mut table = Table::new(columns);
    for &eps in &cfg.eps {
        let mut cells = vec![eps_cell(eps)];
        for &k in &cfg.k {
            for &n in &cfg.n {
                let v = cases
                    .iter()
                    .find(|c| c.k == k && c.n == n && c.eps == eps)
                    .and_then(|c| c.value(norm));
                cells.push(opt_real(v));
            }
        }
        table.push(cells);
    }
    table
}

/// `E * 100 * (N / (K + 1))^k` with `E` the selected norm.
pub fn bound_ratio(error: f64, n: usize, big_k: usize, k: usize) -> f64 {
    error * 100.0 * (n as f64 / (big_k + 1) as f64).powi(k as i32)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioEntry {
    pub eps: f64,
    pub n: usize,
    pub k: usize,
    pub big_k: Option<usize>,
    pub ratio: Option<f64>,
    pub failure: Option<String>,
}

pub fn run_ratio_table(cfg: &SweepConfig) -> Result<Vec<RatioEntry>> {
    let norm = cfg.table_norm();
    Ok(run_cases(cfg)?
        .into_iter()
        .map(|c| RatioEntry {
            eps: c.eps,
            n: c.n,
            k: c.k,
            big_k: c.big_k,
            ratio: c.value(norm).zip(c.big_k).map(|(e, bk)| bound_ratio(e, c.n, bk, c.k)),
            failure: c
                .failure
                .clone()
                .or_else(|| c.failed().then(|| "mesh or residual check failed".into())),
        })
        .collect())
}

/// Wide layout: one row per `(k, eps)`, one column per `N`.
pub fn ratio_table(cfg: &SweepConfig, entries: &[RatioEntry]) -> Table {
    let mut columns = vec!["eps".to_string(), "k".to_string()];
    columns.extend(cfg.n.iter().map(|n| n.to_string()));
    let mut table = Table::new(columns);
    for &k in &cfg.k {
        for &eps in &cfg.eps {
            let mut cells = vec![eps_cell(eps), Cell::Int(k as i64)];
            for &n in &cfg.n {
                let v = entries
                    .iter()
                    .find(|r| r.k == k && r.n == n && r.eps == eps)
                    .and_then(|r| r.ratio);
                cells.push(v.map_or(Cell::Empty, |v| Cell::Fixed(v, 2)));
            }
            table.push(cells);
        }
    }
    table
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplePoint {
    pub x: f64,
    pub u_h: f64,
    pub u: Option<f64>,
}

impl SamplePoint {
    /// `u_h - u`.
    pub fn error(&self) -> Option<f64> {
        self.u.map(|u| self.u_h - u)
    }
}

/// Discrete (and exact, when registered) solution at `resolution` equispaced
/// points together with every mesh node, sorted and deduplicated.
pub fn sample_solution(cfg: &SweepConfig, resolution: usize) -> Result<Vec<SamplePoint>> {
    let registry = ProblemRegistry::default();
    cfg.validate(&registry)?;
    if cfg.eps.len() != 1 || cfg.n.len() != 1 || cfg.k.len() != 1 {
        return Err(Error::Config("sampling needs exactly one eps, n and k".into()));
    }
    if resolution < 2 {
        return Err(Error::Config("resolution must be at least 2".into()));
    }
    let s = solve_case(cfg, &registry, cfg.eps[0], cfg.n[0], cfg.k[0])?;
    let mut xs: Vec<f64> = (0..resolution)
        .map(|i| -1.0 + 2.0 * i as f64 / (resolution - 1) as f64)
        .collect();
    // exact symmetric midpoint
    if resolution % 2 == 1 {
        xs[resolution / 2] = 0.0;
    }
    xs.extend_from_slice(s.mesh.nodes());
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let exact = s.problem.exact();
    xs.into_iter()
        .map(|x| {
            Ok(SamplePoint {
                x,
                u_h: s.solution.eval(x, 0)?,
                u: exact.map(|ex| (ex.u)(x)),
            })
        })
        .collect()
}

pub fn sample_table(points: &[SamplePoint]) -> Table {
    let mut table = Table::new(["x", "u_h", "u", "error"].map(String::from).to_vec());
    for p in points {
        table.push(vec![
            Cell::Real(p.x),
            Cell::Real(p.u_h),
            opt_real(p.u),
            opt_real(p.error()),
        ]);
    }
    table
}

/// Table of [`ErrorReport`] rows for single solves.
pub fn report_table(cfg: &SweepConfig, cases: &[CaseOutcome]) -> Table {
    let mut columns: Vec<String> = ErrorReport::CSV_HEADER.split(',').map(String::from).collect();
    columns.extend(["K", "residual", "failure"].map(String::from));
    let mut table = Table::new(columns);
    for c in cases {
        let r = c.report.as_ref();
        table.push(vec![
            Cell::Real(c.eps),
            Cell::Int(c.n as i64),
            Cell::Int(c.k as i64),
            Cell::Text(cfg.family.name().into()),
            Cell::Text(cfg.policy_name().into()),
            opt_real(r.map(|r| r.l2)),
            opt_real(r.map(|r| r.energy)),
            opt_real(r.map(|r| r.sd)),
            opt_real(r.map(|r| r.weighted_xdp)),
            c.big_k.map_or(Cell::Empty, |k| Cell::Int(k as i64)),
            opt_real(c.residual),
            c.failure.clone().map_or(Cell::Empty, Cell::Text),
        ]);
    }
    table
}
