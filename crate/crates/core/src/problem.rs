//! Continuous problem data for `-eps u'' + a u' + c u = f` on `(-1, 1)` with
//! homogeneous Dirichlet conditions and an attractive turning point at `x = 0`,
//! i.e. `a(x) = -x b(x)` with `b > 0`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// A scalar coefficient or solution evaluator on `[-1, 1]`.
pub type Evaluator = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

pub fn evaluator(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Evaluator {
    Arc::new(f)
}

/// Exact solution together with its first two derivatives.
#[derive(Clone)]
pub struct ExactSolution {
    pub u: Evaluator,
    pub du: Evaluator,
    pub d2u: Evaluator,
}

/// Number of points used to spot-check the structural assumptions.
const VALIDATION_GRID: usize = 2001;

#[derive(Clone)]
pub struct Problem {
    name: String,
    eps: f64,
    a: Evaluator,
    b: Evaluator,
    c: Evaluator,
    f: Evaluator,
    a_prime: Option<Evaluator>,
    exact: Option<ExactSolution>,
    lambda_bar: f64,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("eps", &self.eps)
            .field("lambda_bar", &self.lambda_bar)
            .field("has_exact", &self.exact.is_some())
            .finish()
    }
}

/// Builder for user-defined problems. Supply `b`, `c` and either `f` or an
/// exact solution (from which `f` is synthesised); `a` defaults to `-x b(x)`.
pub struct ProblemBuilder {
    name: String,
    eps: f64,
    a: Option<Evaluator>,
    b: Evaluator,
    c: Evaluator,
    f: Option<Evaluator>,
    a_prime: Option<Evaluator>,
    exact: Option<ExactSolution>,
}

impl ProblemBuilder {
    pub fn new(name: impl Into<String>, eps: f64, b: Evaluator, c: Evaluator) -> Self {
        Self {
            name: name.into(),
            eps,
            a: None,
            b,
            c,
            f: None,
            a_prime: None,
            exact: None,
        }
    }

    pub fn convection(mut self, a: Evaluator) -> Self {
        self.a = Some(a);
        self
    }

    /// Closed form of `a'`; finite differences are used otherwise.
    pub fn convection_derivative(mut self, a_prime: Evaluator) -> Self {
        self.a_prime = Some(a_prime);
        self
    }

    pub fn rhs(mut self, f: Evaluator) -> Self {
        self.f = Some(f);
        self
    }

    pub fn exact(mut self, exact: ExactSolution) -> Self {
        self.exact = Some(exact);
        self
    }

    pub fn build(self) -> Result<Problem> {
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(Error::param("eps", format!("{} not in (0, 1]", self.eps)));
        }
        let a = match self.a {
            Some(a) => a,
            None => {
                let b = self.b.clone();
                evaluator(move |x| -x * b(x))
            }
        };
        let f = match (self.f, &self.exact) {
            (Some(f), _) => f,
            (None, Some(exact)) => {
                let (eps, a, c) = (self.eps, a.clone(), self.c.clone());
                let ex = exact.clone();
                evaluator(move |x| -(eps * (ex.d2u)(x)) + a(x) * (ex.du)(x) + c(x) * (ex.u)(x))
            }
            (None, None) => {
                return Err(Error::param(
                    "f",
                    "either a right-hand side or an exact solution is required",
                ))
            }
        };
        let mut problem = Problem {
            name: self.name,
            eps: self.eps,
            a,
            b: self.b,
            c: self.c,
            f,
            a_prime: self.a_prime,
            exact: self.exact,
            lambda_bar: 0.0,
        };
        problem.check_structure()?;
        problem.lambda_bar = (problem.c)(0.0) / problem.a_prime_at(0.0).abs();
        Ok(problem)
    }
}

impl Problem {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn a(&self, x: f64) -> f64 {
        (self.a)(x)
    }

    pub fn b(&self, x: f64) -> f64 {
        (self.b)(x)
    }

    pub fn c(&self, x: f64) -> f64 {
        (self.c)(x)
    }

    pub fn f(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    /// `c(0) / |a'(0)|`.
    pub fn lambda_bar(&self) -> f64 {
        self.lambda_bar
    }

    pub fn exact(&self) -> Option<&ExactSolution> {
        self.exact.as_ref()
    }

    pub fn require_exact(&self) -> Result<&ExactSolution> {
        self.exact
            .as_ref()
            .ok_or_else(|| Error::MissingExactSolution(self.name.clone()))
    }

    /// `a'(x)`, from the registered closed form or by fourth-order central
    /// differences (one-sided stencils are avoided by evaluating `a` slightly
    /// outside `[-1, 1]`, which smooth coefficients permit).
    pub fn a_prime_at(&self, x: f64) -> f64 {
        if let Some(ap) = &self.a_prime {
            return ap(x);
        }
        let h = 1e-3;
        let a = &self.a;
        (-a(x + 2.0 * h) + 8.0 * a(x + h) - 8.0 * a(x - h) + a(x - 2.0 * h)) / (12.0 * h)
    }

    fn check_structure(&self) -> Result<()> {
        for i in 0..VALIDATION_GRID {
            let x = -1.0 + 2.0 * i as f64 / (VALIDATION_GRID - 1) as f64;
            let (a, b, c) = (self.a(x), self.b(x), self.c(x));
            if !(b > 0.0) {
                return Err(Error::param("b", format!("b({x}) = {b} must be positive")));
            }
            if (a + x * b).abs() > 1e-10 * (1.0 + b.abs()) {
                return Err(Error::param(
                    "a",
                    format!("a({x}) = {a} differs from -x b(x) = {}", -x * b),
                ));
            }
            if !(c >= 0.0) {
                return Err(Error::param("c", format!("c({x}) = {c} must be nonnegative")));
            }
        }
        if !(self.c(0.0) > 0.0) {
            return Err(Error::param("c", "c(0) must be positive"));
        }
        Ok(())
    }
}

/// The manufactured turning-point example with a cusp layer of strength `lambda`:
/// `-eps u'' - x(1 + x^2) u' + lambda (1 + x^3) u = f` with exact solution
/// `u(x) = (x^2+eps)^(lambda/2) + x (x^2+eps)^((lambda-1)/2)
///        - (1+eps)^(lambda/2) (1 + x (1+eps)^(-1/2))`.
pub fn make_test_problem(eps: f64, lambda: f64) -> Result<Problem> {
    if !(lambda > 0.0) {
        return Err(Error::param("lambda", format!("{lambda} must be positive")));
    }
    let edge = (1.0 + eps).powf(lambda / 2.0);
    let edge_slope = (1.0 + eps).powf(-0.5);
    let edge_d = (1.0 + eps).powf((lambda - 1.0) / 2.0);

    let u = move |x: f64| {
        let s = x * x + eps;
        s.powf(lambda / 2.0) + x * s.powf((lambda - 1.0) / 2.0) - edge * (1.0 + x * edge_slope)
    };
    let du = move |x: f64| {
        let s = x * x + eps;
        let x2 = x * x;
        lambda * x * s.powf(lambda / 2.0 - 1.0) + s.powf((lambda - 3.0) / 2.0) * (s + (lambda - 1.0) * x2) - edge_d
    };
    let d2u = move |x: f64| {
        let s = x * x + eps;
        let x2 = x * x;
        lambda * s.powf(lambda / 2.0 - 2.0) * (s + (lambda - 2.0) * x2)
            + x * s.powf((lambda - 5.0) / 2.0) * ((3.0 * lambda - 3.0) * s + (lambda - 3.0) * (lambda - 1.0) * x2)
    };

    ProblemBuilder::new(
        "cusp-layer",
        eps,
        evaluator(|x| 1.0 + x * x),
        evaluator(move |x| lambda * (1.0 + x * x * x)),
    )
    .convection(evaluator(|x| -x * (1.0 + x * x)))
    .convection_derivative(evaluator(|x| -(1.0 + 3.0 * x * x)))
    .exact(ExactSolution {
        u: evaluator(u),
        du: evaluator(du),
        d2u: evaluator(d2u),
    })
    .build()
}

/// `-eps u'' - x u' + u = f` with `u = 1 - x^2`, which lies in every
/// `P_k` space with `k >= 2`.
pub fn make_patch_problem(eps: f64) -> Result<Problem> {
    ProblemBuilder::new("quadratic-patch", eps, evaluator(|_| 1.0), evaluator(|_| 1.0))
        .convection_derivative(evaluator(|_| -1.0))
        .exact(ExactSolution {
            u: evaluator(|x| 1.0 - x * x),
            du: evaluator(|x| -2.0 * x),
            d2u: evaluator(|_| -2.0),
        })
        .build()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaEstimate {
    pub gamma: f64,
    pub argmin: f64,
}

/// Minimum of `c - a'/2` on `[-1, 1]`: uniform grid followed by golden-section
/// refinement around the best grid point.
pub fn gamma_estimate(problem: &Problem, grid_size: usize) -> Result<GammaEstimate> {
    if grid_size < 1000 {
        return Err(Error::param("grid_size", "at least 1000 points are required"));
    }
    let g = |x: f64| problem.c(x) - 0.5 * problem.a_prime_at(x);
    let step = 2.0 / (grid_size - 1) as f64;
    let (mut best_i, mut best) = (0, f64::INFINITY);
    for i in 0..grid_size {
        let v = g(-1.0 + i as f64 * step);
        if v < best {
            best = v;
            best_i = i;
        }
    }
    let mut argmin = -1.0 + best_i as f64 * step;
    let lo = (argmin - step).max(-1.0);
    let hi = (argmin + step).min(1.0);
    let (x, v) = golden_section(&g, lo, hi);
    if v < best {
        best = v;
        argmin = x;
    }
    if !(best > 0.0) {
        return Err(Error::Coercivity { gamma: best, argmin });
    }
    Ok(GammaEstimate { gamma: best, argmin })
}

fn golden_section(g: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut g1, mut g2) = (g(x1), g(x2));
    for _ in 0..80 {
        if g1 < g2 {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - ratio * (hi - lo);
            g1 = g(x1);
        } else {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + ratio * (hi - lo);
            g2 = g(x2);
        }
    }
    if g1 < g2 {
        (x1, g1)
    } else {
        (x2, g2)
    }
}

/// `max |c|` over a uniform grid of `grid_size` points.
pub fn max_abs_c(problem: &Problem, grid_size: usize) -> f64 {
    let n = grid_size.max(2);
    (0..n)
        .map(|i| problem.c(-1.0 + 2.0 * i as f64 / (n - 1) as f64).abs())
        .fold(0.0, f64::max)
}

/// Shape `x -> 1 + (eps^(1/2) + |x|)^(lambda - i)` of the derivative bounds
/// around the turning point.
pub fn layer_bound_profile(problem: &Problem, i: usize, lambda: f64) -> Result<impl Fn(f64) -> f64> {
    problem.require_exact()?;
    if i > 2 {
        return Err(Error::param("i", "derivative order must be 0, 1 or 2"));
    }
    let sqrt_eps = problem.eps().sqrt();
    let exponent = lambda - i as f64;
    Ok(move |x: f64| 1.0 + (sqrt_eps + x.abs()).powf(exponent))
}

/// `max |u^(i)(x)| / bound(x)` over a uniform grid.
pub fn layer_bound_ratio(problem: &Problem, i: usize, lambda: f64, grid_size: usize) -> Result<f64> {
    let bound = layer_bound_profile(problem, i, lambda)?;
    let exact = problem.require_exact()?;
    let deriv = match i {
        0 => &exact.u,
        1 => &exact.du,
        _ => &exact.d2u,
    };
    let n = grid_size.max(2);
    Ok((0..n)
        .map(|j| {
            let x = -1.0 + 2.0 * j as f64 / (n - 1) as f64;
            deriv(x).abs() / bound(x)
        })
        .fold(0.0, f64::max))
}

/// Constructor for a named problem family, parameterised by `(eps, lambda)`.
pub type ProblemFactory = fn(f64, f64) -> Result<Problem>;

/// Named problems available to the command line.
#[derive(Debug, Clone)]
pub struct ProblemRegistry {
    entries: BTreeMap<String, ProblemFactory>,
}

impl Default for ProblemRegistry {
    fn default() -> Self {
        let mut reg = Self {
            entries: BTreeMap::new(),
        };
        reg.register("cusp-layer", make_test_problem);
        reg.register("quadratic-patch", |eps, _| make_patch_problem(eps));
        reg
    }
}

impl ProblemRegistry {
    pub fn register(&mut self, name: &str, factory: ProblemFactory) {
        self.entries.insert(name.to_string(), factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn make(&self, name: &str, eps: f64, lambda: f64) -> Result<Problem> {
        let factory = self
            .entries
            .get(name)
            .ok_or_else(|| Error::UnknownProblem(name.to_string()))?;
        factory(eps, lambda)
    }
}
