//! Interpolants and error norms.
//!
//! All integrals are taken elementwise with a composite Gauss rule. Element
//! contributions are computed in parallel and summed in element order, so the
//! result does not depend on the thread count.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{global_node_coordinates, DiscreteFunction, StabilizationProfile};
use crate::basis::{gauss_rule, BasisTable, NodeFamily, QuadratureRule, ReferenceBasis};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::problem::Problem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadSpec {
    pub points: usize,
    pub panels: usize,
}

impl Default for QuadSpec {
    fn default() -> Self {
        Self { points: 5, panels: 8 }
    }
}

impl QuadSpec {
    pub fn new(points: usize, panels: usize) -> Result<Self> {
        let spec = Self { points, panels };
        spec.check()?;
        Ok(spec)
    }

    pub fn check(&self) -> Result<()> {
        if self.points < 3 {
            return Err(Error::param("quad points", format!("{} < 3", self.points)));
        }
        if self.panels < 1 {
            return Err(Error::param("quad panels", "at least one panel is required"));
        }
        Ok(())
    }

    fn rule(&self) -> QuadratureRule {
        gauss_rule(self.points).composite(self.panels)
    }
}

/// Squared contributions of one element.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ElementError {
    /// `||e||^2`
    pub l2_sq: f64,
    /// `|e|_1^2`
    pub h1_sq: f64,
    /// `||x e'||^2`
    pub weighted_sq: f64,
    /// `delta ||a e'||^2`
    pub stab_sq: f64,
}

impl ElementError {
    fn add(&mut self, o: &ElementError) {
        self.l2_sq += o.l2_sq;
        self.h1_sq += o.h1_sq;
        self.weighted_sq += o.weighted_sq;
        self.stab_sq += o.stab_sq;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub l2: f64,
    pub energy: f64,
    pub sd: f64,
    pub weighted_xdp: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_element: Option<Vec<ElementError>>,
}

impl ErrorReport {
    fn from_parts(eps: f64, parts: Vec<ElementError>, keep: bool) -> Self {
        let mut total = ElementError::default();
        for p in &parts {
            total.add(p);
        }
        let energy_sq = eps * total.h1_sq + total.l2_sq;
        Self {
            l2: total.l2_sq.sqrt(),
            energy: energy_sq.sqrt(),
            sd: (energy_sq + total.stab_sq).sqrt(),
            weighted_xdp: total.weighted_sq.sqrt(),
            per_element: keep.then_some(parts),
        }
    }

    pub const CSV_HEADER: &'static str = "eps,N,k,family,policy,l2,energy,sd,weighted_xdp";

    /// One CSV row; `policy` is the delta policy name, or `none` for Galerkin.
    pub fn csv_row(&self, eps: f64, n_half: usize, k: usize, family: NodeFamily, policy: &str) -> String {
        format!(
            "{eps:.16e},{n_half},{k},{},{policy},{:.16e},{:.16e},{:.16e},{:.16e}",
            family.name(),
            self.l2,
            self.energy,
            self.sd,
            self.weighted_xdp
        )
    }
}

/// Lagrange interpolant of the registered exact solution.
pub fn interpolate(problem: &Problem, mesh: &Arc<Mesh>, k: usize, family: NodeFamily) -> Result<DiscreteFunction> {
    let exact = problem.require_exact()?;
    let basis = ReferenceBasis::new(k, family)?;
    let xs = global_node_coordinates(mesh, &basis);
    let last = xs.len() - 1;
    let coeffs = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| if i == 0 || i == last { 0.0 } else { (exact.u)(x) })
        .collect();
    DiscreteFunction::new(mesh.clone(), basis, coeffs)
}

/// Norms of `u - u_h` where `u` is the registered exact solution. Without a
/// stabilisation profile the SD value equals the energy value.
pub fn error_norms(
    u_h: &DiscreteFunction,
    problem: &Problem,
    stab: Option<&StabilizationProfile>,
    quad: QuadSpec,
) -> Result<ErrorReport> {
    exact_error(u_h, problem, stab, quad, false)
}

/// As [`error_norms`], keeping the per-element breakdown.
pub fn error_norms_detailed(
    u_h: &DiscreteFunction,
    problem: &Problem,
    stab: Option<&StabilizationProfile>,
    quad: QuadSpec,
) -> Result<ErrorReport> {
    exact_error(u_h, problem, stab, quad, true)
}

fn exact_error(
    u_h: &DiscreteFunction,
    problem: &Problem,
    stab: Option<&StabilizationProfile>,
    quad: QuadSpec,
    keep: bool,
) -> Result<ErrorReport> {
    quad.check()?;
    let exact = problem.require_exact()?;
    check_stab(u_h.mesh(), stab)?;
    let rule = quad.rule();
    let table = u_h.basis().tabulate(&rule.points);
    let parts = integrate_elements(
        u_h.mesh(),
        &rule,
        |e, q, x, h| {
            let c = u_h.element_coeffs(e);
            let (v, d) = local_eval(&table, q, c, h);
            ((exact.u)(x) - v, (exact.du)(x) - d)
        },
        problem,
        stab,
    );
    Ok(ErrorReport::from_parts(problem.eps(), parts, keep))
}

/// Every norm of the difference of two discrete functions in the same space.
pub fn discrete_distance(
    a_fn: &DiscreteFunction,
    b_fn: &DiscreteFunction,
    problem: &Problem,
    stab: Option<&StabilizationProfile>,
    quad: QuadSpec,
) -> Result<ErrorReport> {
    quad.check()?;
    let diff = a_fn.sub(b_fn)?;
    check_stab(diff.mesh(), stab)?;
    let rule = quad.rule();
    let table = diff.basis().tabulate(&rule.points);
    let parts = integrate_elements(
        diff.mesh(),
        &rule,
        |e, q, _, h| local_eval(&table, q, diff.element_coeffs(e), h),
        problem,
        stab,
    );
    Ok(ErrorReport::from_parts(problem.eps(), parts, false))
}

/// `|||a - b|||_SD` for two discrete functions in the same space.
pub fn sd_distance(
    a_fn: &DiscreteFunction,
    b_fn: &DiscreteFunction,
    problem: &Problem,
    stab: &StabilizationProfile,
    quad: QuadSpec,
) -> Result<f64> {
    Ok(discrete_distance(a_fn, b_fn, problem, Some(stab), quad)?.sd)
}

fn check_stab(mesh: &Mesh, stab: Option<&StabilizationProfile>) -> Result<()> {
    match stab {
        Some(s) if s.deltas.len() != mesh.num_intervals() => Err(Error::MeshMismatch),
        _ => Ok(()),
    }
}

fn local_eval(table: &BasisTable, q: usize, coeffs: &[f64], h: f64) -> (f64, f64) {
    let v = table.values(q).iter().zip(coeffs).map(|(p, c)| p * c).sum::<f64>();
    let d = table.first(q).iter().zip(coeffs).map(|(p, c)| p * c).sum::<f64>() / h;
    (v, d)
}

fn integrate_elements<F>(
    mesh: &Mesh,
    rule: &QuadratureRule,
    error_at: F,
    problem: &Problem,
    stab: Option<&StabilizationProfile>,
) -> Vec<ElementError>
where
    F: Fn(usize, usize, f64, f64) -> (f64, f64) + Sync,
{
    (0..mesh.num_intervals())
        .into_par_iter()
        .map(|e| {
            let (xl, xr) = mesh.interval(e);
            let h = xr - xl;
            let delta = stab.map_or(0.0, |s| s.deltas[e]);
            let mut out = ElementError::default();
            for (q, (&t, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
                let x = xl + t * h;
                let (v, d) = error_at(e, q, x, h);
                let jw = w * h;
                out.l2_sq += jw * v * v;
                out.h1_sq += jw * d * d;
                out.weighted_sq += jw * (x * d) * (x * d);
                if delta != 0.0 {
                    let ad = problem.a(x) * d;
                    out.stab_sq += jw * delta * ad * ad;
                }
            }
            out
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_galerkin, compute_deltas, solve_banded, DeltaPolicy};
    use crate::mesh::MeshParams;
    use crate::problem::{evaluator, make_patch_problem, make_test_problem, ExactSolution, ProblemBuilder};

    fn mesh(eps: f64, n: usize, k: usize, lambda: f64) -> Arc<Mesh> {
        Arc::new(Mesh::build(MeshParams::new(eps, n, k, lambda).unwrap()).unwrap())
    }

    #[test]
    fn interpolant_of_polynomial_has_zero_error() {
        let p = make_patch_problem(1.0).unwrap();
        for k in 2..=4 {
            let m = mesh(1.0, 8, k, 0.5);
            let ui = interpolate(&p, &m, k, NodeFamily::Uniform).unwrap();
            let r = error_norms(&ui, &p, None, QuadSpec::default()).unwrap();
            assert!(r.l2 < 1e-12 && r.energy < 1e-12 && r.weighted_xdp < 1e-12, "{r:?}");
        }
    }

    #[test]
    fn interpolant_matches_nodal_values() {
        let p = make_test_problem(1e-6, 0.25).unwrap();
        let m = mesh(1e-6, 16, 3, 0.25);
        let ui = interpolate(&p, &m, 3, NodeFamily::GaussLobatto).unwrap();
        let u = &p.exact().unwrap().u;
        for (x, c) in ui.node_coordinates().iter().zip(ui.coeffs()).skip(1) {
            if x.abs() < 1.0 {
                assert_eq!(*c, u(*x));
            }
        }
    }

    #[test]
    fn constant_error_probe() {
        let p = ProblemBuilder::new("one", 1.0, evaluator(|_| 1.0), evaluator(|_| 1.0))
            .exact(ExactSolution {
                u: evaluator(|_| 1.0),
                du: evaluator(|_| 0.0),
                d2u: evaluator(|_| 0.0),
            })
            .build()
            .unwrap();
        let m = mesh(1.0, 6, 1, 0.5);
        let zero = DiscreteFunction::zero(m, ReferenceBasis::new(1, NodeFamily::Uniform).unwrap());
        let r = error_norms(&zero, &p, None, QuadSpec::default()).unwrap();
        assert!((r.l2 - 2f64.sqrt()).abs() < 1e-14);
        assert_eq!(r.energy, r.l2);
    }

    #[test]
    fn invariants_and_breakdown() {
        let p = make_test_problem(1e-6, 0.25).unwrap();
        let m = mesh(1e-6, 32, 1, 0.25);
        let sys = assemble_galerkin(&p, &m, 1, NodeFamily::Uniform, 4).unwrap();
        let uh = solve_banded(&sys).unwrap().solution;
        let stab = compute_deltas(&m, 1e-6, 1.0, DeltaPolicy::Standard, &p, 1).unwrap();
        let r = error_norms_detailed(&uh, &p, Some(&stab), QuadSpec::default()).unwrap();
        assert!(r.sd >= r.energy && r.energy >= r.l2);
        let per = r.per_element.as_ref().unwrap();
        assert_eq!(per.len(), 64);
        let l2: f64 = per.iter().map(|e| e.l2_sq).sum();
        let h1: f64 = per.iter().map(|e| e.h1_sq).sum();
        assert!((r.energy * r.energy - (1e-6 * h1 + l2)).abs() <= 1e-14 * r.energy * r.energy);
        let plain = error_norms(&uh, &p, None, QuadSpec::default()).unwrap();
        assert_eq!(plain.sd, plain.energy);
        assert_eq!(plain.energy, r.energy);
    }

    #[test]
    fn interpolation_error_decreases_with_n() {
        let p = make_test_problem(1e-6, 0.25).unwrap();
        let sup = |n| {
            let m = mesh(1e-6, n, 2, 0.25);
            let ui = interpolate(&p, &m, 2, NodeFamily::Uniform).unwrap();
            let u = &p.exact().unwrap().u;
            (0..=4000)
                .map(|i| -1.0 + i as f64 / 2000.0)
                .map(|x| (u(x) - ui.eval(x, 0).unwrap()).abs())
                .fold(0.0, f64::max)
        };
        assert!(sup(64) < sup(32));
    }

    #[test]
    fn sd_distance_reductions() {
        let p = make_test_problem(1e-4, 0.25).unwrap();
        let m = mesh(1e-4, 16, 2, 0.25);
        let ui = interpolate(&p, &m, 2, NodeFamily::Uniform).unwrap();
        let uh = solve_banded(&assemble_galerkin(&p, &m, 2, NodeFamily::Uniform, 5).unwrap())
            .unwrap()
            .solution;
        let zero = StabilizationProfile::zeros(32);
        assert_eq!(sd_distance(&ui, &ui, &p, &zero, QuadSpec::default()).unwrap(), 0.0);
        let d = discrete_distance(&ui, &uh, &p, None, QuadSpec::default()).unwrap();
        assert_eq!(sd_distance(&ui, &uh, &p, &zero, QuadSpec::default()).unwrap(), d.energy);
        let other = mesh(1e-4, 16, 3, 0.25);
        let w = interpolate(&p, &other, 3, NodeFamily::Uniform).unwrap();
        assert!(matches!(
            sd_distance(&ui, &w, &p, &zero, QuadSpec::default()),
            Err(Error::MeshMismatch)
        ));
    }

    #[test]
    fn quad_spec_bounds() {
        assert!(QuadSpec::new(2, 4).is_err());
        assert!(QuadSpec::new(3, 0).is_err());
        assert!(QuadSpec::new(3, 1).is_ok());
    }

    #[test]
    fn csv_row_shape() {
        let r = ErrorReport {
            l2: 1.0,
            energy: 2.0,
            sd: 3.0,
            weighted_xdp: 4.0,
            per_element: None,
        };
        let row = r.csv_row(1e-10, 512, 1, NodeFamily::Uniform, "none");
        assert_eq!(row.split(',').count(), ErrorReport::CSV_HEADER.split(',').count());
        assert!(row.starts_with("1.0000000000000000e-10,512,1,uniform,none,"));
    }
}
