//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use cuspfem::assembly::{
    assemble_galerkin, assemble_sdfem, compute_deltas, solve_banded, DeltaPolicy, DiscreteFunction,
    StabilizationProfile,
};
use cuspfem::basis::{gauss_rule, NodeFamily, ReferenceBasis};
use cuspfem::experiments::{fitted_order, run_cases, run_convergence, run_ratio_table, sci, Method, Norm, SweepConfig};
use cuspfem::mesh::{compute_big_k, compute_sigma, validate_mesh, Mesh, MeshParams};
use cuspfem::norms::{discrete_distance, error_norms, QuadSpec};
use cuspfem::problem::{gamma_estimate, make_patch_problem, make_test_problem, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = std::result::Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn config(eps: &[f64], n: &[usize], k: &[usize], lambda: f64, method: Method) -> SweepConfig {
    SweepConfig {
        eps: eps.to_vec(),
        n: n.to_vec(),
        k: k.to_vec(),
        lambda,
        method,
        ..SweepConfig::default()
    }
}

fn mesh(eps: f64, n: usize, k: usize, lambda: f64) -> Arc<Mesh> {
    Arc::new(Mesh::build(MeshParams::new(eps, n, k, lambda).unwrap()).unwrap())
}

fn values(cfg: &SweepConfig, norm: Norm) -> std::result::Result<Vec<f64>, String> {
    let cases = run_cases(cfg).map_err(|e| e.to_string())?;
    cases
        .iter()
        .map(|c| {
            if c.failed() {
                Err(format!(
                    "case k={} eps={:e} N={} failed: {:?}",
                    c.k, c.eps, c.n, c.failure
                ))
            } else {
                c.value(norm).ok_or_else(|| "missing value".to_string())
            }
        })
        .collect()
}

fn reference_energy_errors() -> Check {
    let cfg = config(&[1e-10], &[512, 1024], &[1, 2], 0.005, Method::Fem);
    let got = values(&cfg, Norm::Energy)?;
    let reference = [3.97e-5, 1.98e-5, 1.10e-6, 2.73e-7];
    let mut notes = Vec::new();
    let mut two_digits = true;
    for (g, p) in got.iter().zip(reference) {
        ensure(rel(*g, p) <= 0.10, || format!("{g:e} vs reference {p:e}"))?;
        two_digits &= sci(*g, 1) == sci(p, 1);
        notes.push(format!("{} (reference {})", sci(*g, 2), sci(p, 2)));
    }
    Ok(format!(
        "{}; 2-digit stretch gate {}",
        notes.join(", "),
        if two_digits { "met" } else { "missed" }
    ))
}

fn linear_sdfem_rates() -> Check {
    let cfg = config(&[1e-10], &[256, 512, 1024, 2048], &[1], 0.005, Method::Sdfem);
    let rows = run_convergence(&cfg).map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    for row in rows.iter().filter(|r| r.case.n <= 1024) {
        ensure(!row.case.failed(), || format!("N={} failed", row.case.n))?;
        let rates = row.rates.ok_or("missing rate")?;
        let (sd, l2) = (rates[2].unwrap(), rates[0].unwrap());
        ensure((0.95..=1.10).contains(&sd), || {
            format!("SD rate {sd:.3} at N={}", row.case.n)
        })?;
        ensure((1.95..=2.15).contains(&l2), || {
            format!("L2 rate {l2:.3} at N={}", row.case.n)
        })?;
        notes.push(format!("N={}: {sd:.3}/{l2:.3}", row.case.n));
    }
    let r512 = &rows[1].case;
    let (sd, l2) = (r512.value(Norm::Sd).unwrap(), r512.value(Norm::L2).unwrap());
    ensure(rel(sd, 4.10e-5) <= 0.10, || format!("SD error {sd:e} vs 4.10e-05"))?;
    ensure(rel(l2, 1.38e-6) <= 0.10, || format!("L2 error {l2:e} vs 1.38e-06"))?;
    Ok(format!(
        "rates sd/l2 {}; N=512 errors {} / {}",
        notes.join(", "),
        sci(sd, 2),
        sci(l2, 2)
    ))
}

fn energy_order() -> Check {
    let ns = [128, 256, 512, 1024];
    let mut notes = Vec::new();
    for k in 1..=3 {
        let cfg = config(&[1e-10], &ns, &[k], 0.005, Method::Fem);
        let errs = values(&cfg, Norm::Energy)?;
        let slope = fitted_order(&ns, &errs);
        ensure(slope >= k as f64 - 0.15, || format!("k={k}: slope {slope:.3}"))?;
        notes.push(format!("k={k}: {slope:.3}"));
    }
    Ok(format!("fitted orders {}", notes.join(", ")))
}

fn supercloseness() -> Check {
    let ns = [128, 256, 512, 1024];
    let cfg = config(&[1e-10], &ns, &[1], 0.005, Method::Sdfem);
    let d = values(&cfg, Norm::Superclose)?;
    let slope = fitted_order(&ns, &d);
    ensure(slope >= 1.4, || format!("slope {slope:.3}"))?;
    Ok(format!("slope of |||u_I - u_N|||_SD is {slope:.3}"))
}

fn bound_ratio_stability() -> Check {
    let cfg = config(&[1e-14], &[2048, 4096], &[2], 0.25, Method::Fem);
    let entries = run_ratio_table(&cfg).map_err(|e| e.to_string())?;
    let r: Vec<f64> = entries
        .iter()
        .map(|e| e.ratio.ok_or("missing ratio"))
        .collect::<Result<_, _>>()?;
    ensure((8.0..=8.9).contains(&r[1]), || format!("ratio {:.3} at N=4096", r[1]))?;
    ensure(rel(r[0], r[1]) <= 0.05, || format!("ratios {:.3} vs {:.3}", r[0], r[1]))?;
    let one = run_ratio_table(&config(&[1.0], &[256], &[2], 0.25, Method::Fem)).map_err(|e| e.to_string())?;
    Ok(format!(
        "N=2048: {:.2}, N=4096: {:.2}; eps=1 row {:.2}",
        r[0],
        r[1],
        one[0].ratio.unwrap()
    ))
}

fn big_k_grid() -> Check {
    let text = include_str!("data/big_k_grid.csv");
    let mut count = 0;
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let lambda: f64 = f[0].parse().unwrap();
        let i: u32 = f[1].parse().unwrap();
        let j: u32 = f[2].parse().unwrap();
        let expected: usize = f[3].parse().unwrap();
        let eps: f64 = format!("1e-{j}").parse().unwrap();
        let params = MeshParams::new(eps, 1 << i, 2, lambda).map_err(|e| e.to_string())?;
        let got = compute_big_k(compute_sigma(&params).value).map_err(|e| e.to_string())?;
        ensure(got == expected, || {
            format!("lambda={lambda}, N=2^{i}, eps=1e-{j}: K={got}, expected {expected}")
        })?;
        count += 1;
    }
    ensure(count == 1020, || format!("grid has {count} points"))?;
    Ok(format!("{count} grid points reproduced"))
}

/// `B_eps(w, v)` with `w` given pointwise, by composite Gauss quadrature.
fn form_with_exact(problem: &Problem, v: &DiscreteFunction) -> f64 {
    let ex = problem.exact().unwrap();
    let rule = gauss_rule(8).composite(16);
    let mesh = v.mesh();
    let mut total = 0.0;
    for e in 0..mesh.num_intervals() {
        let (xl, xr) = mesh.interval(e);
        let h = xr - xl;
        for (&t, &w) in rule.points.iter().zip(&rule.weights) {
            let x = xl + t * h;
            let (vv, dv) = (v.eval(x, 0).unwrap(), v.eval(x, 1).unwrap());
            let (u, du) = ((ex.u)(x), (ex.du)(x));
            total += w * h * (problem.eps() * du * dv + problem.a(x) * du * vv + problem.c(x) * u * vv);
        }
    }
    total
}

fn zero_like(f: &DiscreteFunction) -> DiscreteFunction {
    DiscreteFunction::zero(f.mesh().clone(), f.basis().clone())
}

fn property_suites() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(20260101);
    let mut notes = Vec::new();

    // mesh validation on random tuples
    for _ in 0..200 {
        let eps = 10f64.powf(-rng.gen_range(0.0..16.0));
        let k = rng.gen_range(1..=4);
        let lambda = rng.gen_range(0.0..1.0);
        let mut n = rng.gen_range(1..=2048);
        // raise N until it resolves the decade structure it induces
        loop {
            let p = MeshParams::new(eps, n, k, lambda).unwrap();
            let required = compute_big_k(compute_sigma(&p).value).unwrap() + 1;
            if n >= required {
                break;
            }
            n = required;
        }
        let m = Mesh::build(MeshParams::new(eps, n, k, lambda).unwrap()).map_err(|e| e.to_string())?;
        let r = validate_mesh(&m);
        ensure(r.is_ok(), || {
            format!("eps={eps:e}, N={n}, k={k}, lambda={lambda}: {:?}", r.violations)
        })?;
    }
    notes.push("200 meshes valid".to_string());

    // delta = 0 reduction
    for (k, eps) in [(1, 1e-10), (2, 1e-6), (4, 1e-2)] {
        let p = make_test_problem(eps, 0.25).unwrap();
        let m = mesh(eps, 48, k, 0.25);
        let g = assemble_galerkin(&p, &m, k, NodeFamily::Uniform, k + 3).unwrap();
        let s = assemble_sdfem(&p, &m, k, NodeFamily::Uniform, k + 3, &StabilizationProfile::zeros(96)).unwrap();
        ensure(g.matrix == s.matrix && g.rhs == s.rhs, || {
            format!("k={k}: SDFEM with delta=0 differs")
        })?;
    }
    notes.push("delta=0 bitwise".to_string());

    // patch tests
    let patch = make_patch_problem(1.0).unwrap();
    let mut worst: f64 = 0.0;
    for k in 2..=4 {
        for family in [NodeFamily::Uniform, NodeFamily::GaussLobatto] {
            let m = mesh(1.0, 8, k, 0.5);
            let stab = compute_deltas(&m, 1.0, 1.0, DeltaPolicy::Standard, &patch, k).unwrap();
            for sys in [
                assemble_galerkin(&patch, &m, k, family, k + 3).unwrap(),
                assemble_sdfem(&patch, &m, k, family, k + 3, &stab).unwrap(),
            ] {
                let uh = solve_banded(&sys).map_err(|e| e.to_string())?.solution;
                let err = error_norms(&uh, &patch, None, QuadSpec::default()).unwrap().energy;
                worst = worst.max(err);
            }
        }
    }
    ensure(worst <= 1e-10, || format!("patch energy error {worst:e}"))?;
    notes.push(format!("patch max {worst:.1e}"));

    // coercivity of the stabilised form
    let mut min_ratio = f64::INFINITY;
    for k in [1, 2, 3] {
        let eps = 1e-6;
        let p = make_test_problem(eps, 0.25).unwrap();
        let bound = 0.5 * gamma_estimate(&p, 4001).unwrap().gamma.min(1.0);
        let m = mesh(eps, 64, k, 0.25);
        let stab = compute_deltas(&m, eps, 1.0, DeltaPolicy::TheoremCapped, &p, k).unwrap();
        let sys = assemble_sdfem(&p, &m, k, NodeFamily::Uniform, k + 3, &stab).unwrap();
        let basis = ReferenceBasis::new(k, NodeFamily::Uniform).unwrap();
        for _ in 0..100 {
            let v: Vec<f64> = (0..sys.dimension()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let form = sys.matrix.bilinear(&v, &v);
            let vf = DiscreteFunction::from_interior(m.clone(), basis.clone(), &v).unwrap();
            let sd = discrete_distance(&vf, &zero_like(&vf), &p, Some(&stab), QuadSpec::default())
                .unwrap()
                .sd;
            let ratio = form / (sd * sd);
            ensure(ratio >= bound, || {
                format!("k={k}: form/|||v|||^2 = {ratio:.4} < {bound:.4}")
            })?;
            min_ratio = min_ratio.min(ratio);
        }
    }
    notes.push(format!("coercivity min ratio {min_ratio:.3}"));

    // quadrature refinement stability of the discrete solution
    let mut worst_q: f64 = 0.0;
    for k in 1..=4 {
        for eps in [1.0, 1e-4, 1e-8] {
            let p = make_test_problem(eps, 0.25).unwrap();
            let m = mesh(eps, 64, k, 0.25);
            let norm_of = |q: usize| {
                let uh = solve_banded(&assemble_galerkin(&p, &m, k, NodeFamily::Uniform, q).unwrap())
                    .unwrap()
                    .solution;
                discrete_distance(&uh, &zero_like(&uh), &p, None, QuadSpec::default())
                    .unwrap()
                    .energy
            };
            let d = (norm_of(k + 3) - norm_of(2 * (k + 3))).abs();
            ensure(d <= 1e-8, || format!("k={k}, eps={eps:e}: energy norm moved {d:e}"))?;
            worst_q = worst_q.max(d);
        }
    }
    // error quadrature: 4x panels
    let mut worst_n: f64 = 0.0;
    for k in [1, 2] {
        for eps in [1.0, 1e-6, 1e-10, 1e-14] {
            let p = make_test_problem(eps, 0.005).unwrap();
            let m = mesh(eps, 128, k, 0.005);
            let uh = solve_banded(&assemble_galerkin(&p, &m, k, NodeFamily::Uniform, k + 3).unwrap())
                .unwrap()
                .solution;
            let a = error_norms(&uh, &p, None, QuadSpec::new(5, 8).unwrap()).unwrap();
            let b = error_norms(&uh, &p, None, QuadSpec::new(5, 32).unwrap()).unwrap();
            for (x, y) in [(a.l2, b.l2), (a.energy, b.energy), (a.weighted_xdp, b.weighted_xdp)] {
                let r = rel(x, y);
                ensure(r <= 1e-3, || format!("k={k}, eps={eps:e}: norm moved by {r:e}"))?;
                worst_n = worst_n.max(r);
            }
        }
    }
    notes.push(format!("quadrature drift {worst_q:.1e} / {worst_n:.1e}"));

    // Galerkin orthogonality
    let eps = 1e-4;
    let p = make_test_problem(eps, 0.25).unwrap();
    let m = mesh(eps, 64, 2, 0.25);
    let sys = assemble_galerkin(&p, &m, 2, NodeFamily::Uniform, 5).unwrap();
    let uh = solve_banded(&sys).unwrap().solution;
    let mut worst_o: f64 = 0.0;
    for _ in 0..20 {
        let v: Vec<f64> = (0..sys.dimension()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let vf = DiscreteFunction::from_interior(m.clone(), uh.basis().clone(), &v).unwrap();
        let b_uh = sys.matrix.bilinear(&v, uh.interior());
        let defect = (form_with_exact(&p, &vf) - b_uh).abs();
        let vn = discrete_distance(&vf, &zero_like(&vf), &p, None, QuadSpec::default())
            .unwrap()
            .energy;
        ensure(defect <= 1e-8 * vn, || {
            format!("|B(u - u_N, v)| = {defect:e}, |||v||| = {vn:e}")
        })?;
        worst_o = worst_o.max(defect / vn);
    }
    notes.push(format!("orthogonality {worst_o:.1e}"));
    Ok(notes.join("; "))
}

fn eps_robustness() -> Check {
    // the full epsilon sweep grid: every case must solve
    let cfg = SweepConfig::default();
    let cases = run_cases(&cfg).map_err(|e| e.to_string())?;
    if let Some(c) = cases.iter().find(|c| c.failed()) {
        return Err(format!("k={} eps={:e} N={} failed: {:?}", c.k, c.eps, c.n, c.failure));
    }
    let column: Vec<f64> = cases
        .iter()
        .filter(|c| c.k == 1 && c.n == 512)
        .map(|c| c.value(Norm::Energy).unwrap())
        .collect();
    ensure(column.len() == 8 && column.iter().all(|v| v.is_finite()), || {
        "missing P1 column".into()
    })?;
    let max = column.iter().copied().fold(0.0, f64::max);
    ensure(max <= 2e-3, || format!("P1 energy error up to {max:e}"))?;
    // beyond the first step the column must not grow as eps decreases
    for w in column[1..].windows(2) {
        ensure(w[1] <= w[0] * 1.05, || {
            format!("P1 column grows: {:e} -> {:e}", w[0], w[1])
        })?;
    }
    let shown: Vec<String> = column.iter().map(|v| sci(*v, 2)).collect();
    Ok(format!(
        "{} cases solved; P1 N=512 column {}",
        cases.len(),
        shown.join(" ")
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("reference energy errors, P1/P2", reference_energy_errors),
        ("linear SDFEM rates and errors", linear_sdfem_rates),
        ("energy-norm order k", energy_order),
        ("SDFEM supercloseness order", supercloseness),
        ("error-to-bound ratio stability", bound_ratio_stability),
        ("decade count grid", big_k_grid),
        ("property suites", property_suites),
        ("eps-robustness", eps_robustness),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match result {
            Ok(detail) => println!("criterion {} [{name}]: PASS ({detail})", i + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {} [{name}]: FAIL ({detail})", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
