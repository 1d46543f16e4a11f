//! Galerkin and streamline-diffusion systems over a layer-adapted mesh.
//!
//! Unknowns are the interior Lagrange nodes numbered left to right, so the
//! system has dimension `2Nk - 1` and half-bandwidth `k`. Homogeneous
//! Dirichlet data is imposed by dropping the two boundary rows and columns.

mod banded;
mod space;

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use banded::{BandedLu, BandedMatrix, MAX_PIVOT_GROWTH};
pub use space::{global_node_coordinates, num_global_nodes, DiscreteFunction};

use crate::basis::{estimate_c_inv, gauss_rule, NodeFamily, ReferenceBasis};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::problem::{gamma_estimate, max_abs_c, Problem};

/// Relative residual a solve must reach to count as converged.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

/// Grid used for `gamma` and `max |c|` when capping stabilisation parameters.
const COEFFICIENT_GRID: usize = 4001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaPolicy {
    /// `delta_i = c0 min{h_i^2 / eps, h_i}`.
    #[default]
    Standard,
    /// Standard choice clamped by the coercivity and supercloseness bounds.
    TheoremCapped,
}

impl DeltaPolicy {
    pub fn name(self) -> &'static str {
        match self {
            DeltaPolicy::Standard => "standard",
            DeltaPolicy::TheoremCapped => "theorem-capped",
        }
    }
}

impl std::str::FromStr for DeltaPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(DeltaPolicy::Standard),
            "theorem-capped" => Ok(DeltaPolicy::TheoremCapped),
            other => Err(Error::param("delta-policy", format!("unknown policy `{other}`"))),
        }
    }
}

/// Per-interval stabilisation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilizationProfile {
    pub deltas: Vec<f64>,
    pub c0: f64,
    pub policy: DeltaPolicy,
    /// `true` where a cap lowered the standard value.
    pub caps_applied: Vec<bool>,
}

impl StabilizationProfile {
    pub fn zeros(intervals: usize) -> Self {
        Self {
            deltas: vec![0.0; intervals],
            c0: 0.0,
            policy: DeltaPolicy::Standard,
            caps_applied: vec![false; intervals],
        }
    }

    pub fn max_delta(&self) -> f64 {
        self.deltas.iter().copied().fold(0.0, f64::max)
    }
}

/// Stabilisation parameters for every mesh interval.
///
/// The theorem-capped policy additionally clamps by `gamma / (2 |c|^2)`,
/// by `h^2 / (2 eps c_inv^2)` when `k >= 2` and by `(K + 1) / N` when `k = 1`.
pub fn compute_deltas(
    mesh: &Mesh,
    eps: f64,
    c0: f64,
    policy: DeltaPolicy,
    problem: &Problem,
    k: usize,
) -> Result<StabilizationProfile> {
    if !(c0 > 0.0) {
        return Err(Error::param("c0", format!("{c0} must be positive")));
    }
    let caps = match policy {
        DeltaPolicy::Standard => None,
        DeltaPolicy::TheoremCapped => {
            let gamma = gamma_estimate(problem, COEFFICIENT_GRID)?.gamma;
            let c_max = max_abs_c(problem, COEFFICIENT_GRID);
            let coercive_cap = gamma / (2.0 * c_max * c_max);
            let c_inv = estimate_c_inv(k);
            let super_cap = (mesh.big_k() + 1) as f64 / mesh.n_half() as f64;
            Some((coercive_cap, c_inv, super_cap))
        }
    };
    let mut deltas = Vec::with_capacity(mesh.num_intervals());
    let mut caps_applied = Vec::with_capacity(mesh.num_intervals());
    for &h in mesh.lengths() {
        let standard = c0 * (h * h / eps).min(h);
        let mut delta = standard;
        if let Some((coercive_cap, c_inv, super_cap)) = caps {
            delta = delta.min(coercive_cap);
            if k >= 2 {
                delta = delta.min(h * h / (2.0 * eps * c_inv * c_inv));
            } else {
                delta = delta.min(super_cap);
            }
        }
        caps_applied.push(delta < standard);
        deltas.push(delta);
    }
    Ok(StabilizationProfile {
        deltas,
        c0,
        policy,
        caps_applied,
    })
}

/// Assembled system for the interior unknowns.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: BandedMatrix,
    pub rhs: Vec<f64>,
    mesh: Arc<Mesh>,
    basis: ReferenceBasis,
}

impl LinearSystem {
    pub fn dimension(&self) -> usize {
        self.matrix.dim()
    }

    pub fn bandwidth(&self) -> usize {
        self.matrix.lower_bandwidth()
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn basis(&self) -> &ReferenceBasis {
        &self.basis
    }

    /// Plain-text dump: dimension, bandwidth, one line per matrix row holding
    /// the `2k + 1` band entries (zero-padded at the edges), then the rhs.
    pub fn dump(&self) -> String {
        let n = self.dimension();
        let k = self.bandwidth();
        let mut out = String::new();
        let _ = writeln!(out, "dimension {n}");
        let _ = writeln!(out, "bandwidth {k}");
        let _ = writeln!(out, "matrix");
        for i in 0..n {
            let row: Vec<String> = (0..=2 * k)
                .map(|o| {
                    let v = match (i + o).checked_sub(k) {
                        Some(j) if j < n => self.matrix.get(i, j),
                        _ => 0.0,
                    };
                    format!("{v:.16e}")
                })
                .collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        let _ = writeln!(out, "rhs");
        for v in &self.rhs {
            let _ = writeln!(out, "{v:.16e}");
        }
        out
    }
}

/// Standard Galerkin discretisation of `B_eps(u, v) = (f, v)`.
pub fn assemble_galerkin(
    problem: &Problem,
    mesh: &Arc<Mesh>,
    k: usize,
    family: NodeFamily,
    quad_points: usize,
) -> Result<LinearSystem> {
    assemble(problem, mesh, k, family, quad_points, None)
}

/// Streamline-diffusion discretisation: the Galerkin form plus
/// `sum_i delta_i (-eps v'' + a v' + c v, a w')_{I_i}` on the left and
/// `sum_i delta_i (f, a w')_{I_i}` on the right.
pub fn assemble_sdfem(
    problem: &Problem,
    mesh: &Arc<Mesh>,
    k: usize,
    family: NodeFamily,
    quad_points: usize,
    stab: &StabilizationProfile,
) -> Result<LinearSystem> {
    if stab.deltas.len() != mesh.num_intervals() {
        return Err(Error::param(
            "stab",
            format!("{} deltas for {} intervals", stab.deltas.len(), mesh.num_intervals()),
        ));
    }
    assemble(problem, mesh, k, family, quad_points, Some(stab))
}

fn assemble(
    problem: &Problem,
    mesh: &Arc<Mesh>,
    k: usize,
    family: NodeFamily,
    quad_points: usize,
    stab: Option<&StabilizationProfile>,
) -> Result<LinearSystem> {
    if quad_points < k + 1 {
        return Err(Error::param(
            "quad_points",
            format!("{quad_points} < k + 1 = {}", k + 1),
        ));
    }
    let basis = ReferenceBasis::new(k, family)?;
    let rule = gauss_rule(quad_points);
    let table = basis.tabulate(&rule.points);
    let eps = problem.eps();
    let n_local = k + 1;
    let n_global = num_global_nodes(mesh, k);
    let dim = n_global - 2;
    let mut matrix = BandedMatrix::zeros(dim, k, k);
    let mut rhs = vec![0.0; dim];

    let mut local = vec![0.0; n_local * n_local];
    let mut local_rhs = vec![0.0; n_local];
    let mut dphi = vec![0.0; n_local];
    let mut d2phi = vec![0.0; n_local];
    for e in 0..mesh.num_intervals() {
        let (xl, xr) = mesh.interval(e);
        let h = xr - xl;
        let delta = stab.map_or(0.0, |s| s.deltas[e]);
        local.iter_mut().for_each(|v| *v = 0.0);
        local_rhs.iter_mut().for_each(|v| *v = 0.0);

        for (q, (&t, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let x = xl + t * h;
            let (a, c, f) = (problem.a(x), problem.c(x), problem.f(x));
            if !(a.is_finite() && c.is_finite() && f.is_finite()) {
                return Err(Error::Assembly {
                    element: e,
                    detail: format!("non-finite coefficient at x = {x:e} (a = {a}, c = {c}, f = {f})"),
                });
            }
            let jw = w * h;
            let phi = table.values(q);
            for (j, d) in table.first(q).iter().enumerate() {
                dphi[j] = d / h;
            }
            for (j, d) in table.second(q).iter().enumerate() {
                d2phi[j] = d / (h * h);
            }
            for i in 0..n_local {
                for j in 0..n_local {
                    local[i * n_local + j] +=
                        jw * (eps * dphi[j] * dphi[i] + a * dphi[j] * phi[i] + c * phi[j] * phi[i]);
                }
                local_rhs[i] += jw * f * phi[i];
            }
            if delta != 0.0 {
                for i in 0..n_local {
                    let test = a * dphi[i];
                    for j in 0..n_local {
                        let residual = if k >= 2 { -eps * d2phi[j] } else { 0.0 } + a * dphi[j] + c * phi[j];
                        local[i * n_local + j] += jw * delta * residual * test;
                    }
                    local_rhs[i] += jw * delta * f * test;
                }
            }
        }

        for i in 0..n_local {
            let gi = e * k + i;
            if gi == 0 || gi == n_global - 1 {
                continue;
            }
            rhs[gi - 1] += local_rhs[i];
            for j in 0..n_local {
                let gj = e * k + j;
                if gj == 0 || gj == n_global - 1 {
                    continue;
                }
                matrix.add(gi - 1, gj - 1, local[i * n_local + j]);
            }
        }
    }
    Ok(LinearSystem {
        matrix,
        rhs,
        mesh: mesh.clone(),
        basis,
    })
}

/// Discrete solution together with solver diagnostics.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub solution: DiscreteFunction,
    /// `|Ax - b| / (|A| |x| + |b|)` in the max norm.
    pub residual: f64,
    pub growth: f64,
}

impl SolveOutcome {
    pub fn residual_ok(&self) -> bool {
        self.residual <= RESIDUAL_TOLERANCE
    }
}

/// Banded LU with partial pivoting.
pub fn solve_banded(system: &LinearSystem) -> Result<SolveOutcome> {
    let lu = system.matrix.factor()?;
    let x = lu.solve(&system.rhs);
    let ax = system.matrix.mul_vec(&x);
    let res = ax
        .iter()
        .zip(&system.rhs)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let x_norm = x.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let b_norm = system.rhs.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let denom = system.matrix.norm_inf() * x_norm + b_norm;
    let residual = if denom > 0.0 { res / denom } else { 0.0 };
    let solution = DiscreteFunction::from_interior(system.mesh.clone(), system.basis.clone(), &x)?;
    Ok(SolveOutcome {
        solution,
        residual,
        growth: lu.growth(),
    })
}
