//! Layer-adapted piecewise-equidistant meshes on `[-1, 1]`.
//!
//! The half interval `(0, 1]` is split into `K + 1` decades
//! `(0, 10^-K], (10^-K, 10^-K+1], ..., (10^-1, 1]`, each of which is divided
//! uniformly. The innermost decades receive `n0 = floor(N / (K + 1))` parts and
//! the `N0 = N - (K + 1) n0` outermost ones receive `n0 + 1`, so the half mesh
//! always has exactly `N` intervals. The negative half is the mirror image.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshParams {
    /// Perturbation parameter, `0 < eps <= 1`.
    pub eps: f64,
    /// Half the number of mesh intervals.
    pub n_half: usize,
    /// Polynomial order of the elements the mesh is tuned for.
    pub order: usize,
    /// Layer exponent entering the transition parameter.
    pub lambda: f64,
}

impl MeshParams {
    pub fn new(eps: f64, n_half: usize, order: usize, lambda: f64) -> Result<Self> {
        let params = Self {
            eps,
            n_half,
            order,
            lambda,
        };
        params.check()?;
        Ok(params)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(Error::param("eps", format!("{} not in (0, 1]", self.eps)));
        }
        if self.n_half == 0 {
            return Err(Error::param("n_half", "must be positive"));
        }
        if self.order == 0 {
            return Err(Error::param("order", "must be at least 1"));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::param("lambda", format!("{} must be >= 0", self.lambda)));
        }
        Ok(())
    }
}

/// Which term of the max defining sigma was the larger one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaBranch {
    /// `eps^((1 - lambda/(k+1))/2)`
    Epsilon,
    /// `N^-(2k+1)`
    MeshSize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sigma {
    pub value: f64,
    pub branch: SigmaBranch,
}

/// Transition parameter `sigma = max{eps^((1 - lambda/(k+1))/2), N^-(2k+1)}`.
pub fn compute_sigma(params: &MeshParams) -> Sigma {
    let k = params.order as f64;
    let eps_term = params.eps.powf((1.0 - params.lambda / (k + 1.0)) / 2.0);
    let n_term = (params.n_half as f64).powf(-(2.0 * k + 1.0));
    if eps_term >= n_term {
        Sigma {
            value: eps_term,
            branch: SigmaBranch::Epsilon,
        }
    } else {
        Sigma {
            value: n_term,
            branch: SigmaBranch::MeshSize,
        }
    }
}

/// Number of refined decades, `K = floor(1 - ln(sigma) / ln(10))`.
pub fn compute_big_k(sigma: f64) -> Result<usize> {
    if !(sigma > 0.0 && sigma <= 1.0) {
        return Err(Error::Domain {
            what: "sigma",
            value: sigma,
        });
    }
    let mut z = (1.0 - sigma.ln() / std::f64::consts::LN_10).floor() as usize;
    // the logarithm can land one ulp short of an integer when sigma is an
    // exact power of ten; settle on the bracket 10^-K < sigma <= 10^(1-K)
    if decade_edge(z) >= sigma {
        z += 1;
    } else if z > 0 && sigma > decade_edge(z - 1) {
        z -= 1;
    }
    Ok(z)
}

/// Correctly rounded `10^-l`.
pub(crate) fn decade_edge(l: usize) -> f64 {
    if l == 0 {
        1.0
    } else {
        format!("1e-{l}").parse().expect("valid float literal")
    }
}

/// Decade boundaries on `[0, 1]` ordered from the turning point outwards:
/// `0, 10^-K, ..., 10^-1, 1`.
pub fn decade_edges(big_k: usize) -> Vec<f64> {
    let mut edges = Vec::with_capacity(big_k + 2);
    edges.push(0.0);
    for l in (0..=big_k).rev() {
        edges.push(decade_edge(l));
    }
    edges
}

/// Number of uniform parts in each decade, innermost first.
pub fn decade_parts(n_half: usize, big_k: usize) -> Vec<usize> {
    let decades = big_k + 1;
    let n0 = n_half / decades;
    let extra = n_half - decades * n0;
    (0..decades)
        .map(|d| if d < decades - extra { n0 } else { n0 + 1 })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    params: MeshParams,
    sigma: Sigma,
    big_k: usize,
    nodes: Vec<f64>,
    lengths: Vec<f64>,
}

impl Mesh {
    /// Builds the symmetric piecewise-equidistant mesh for `params`.
    pub fn build(params: MeshParams) -> Result<Self> {
        params.check()?;
        let sigma = compute_sigma(&params);
        let big_k = compute_big_k(sigma.value)?;
        if params.n_half < big_k + 1 {
            return Err(Error::MeshTooCoarse {
                n_half: params.n_half,
                required: big_k + 1,
            });
        }

        let edges = decade_edges(big_k);
        let parts = decade_parts(params.n_half, big_k);
        let mut half = Vec::with_capacity(params.n_half + 1);
        half.push(0.0);
        for (d, &m) in parts.iter().enumerate() {
            let (lo, hi) = (edges[d], edges[d + 1]);
            let width = hi - lo;
            for j in 1..m {
                half.push(lo + j as f64 * width / m as f64);
            }
            half.push(hi);
        }
        debug_assert_eq!(half.len(), params.n_half + 1);

        let mut nodes = Vec::with_capacity(2 * params.n_half + 1);
        nodes.extend(half.iter().rev().map(|&x| -x));
        nodes.extend(half.iter().skip(1).copied());
        nodes[params.n_half] = 0.0;
        Ok(Self::from_parts(params, sigma, big_k, nodes))
    }

    /// Assembles a mesh from raw nodes without any checking. Use
    /// [`validate_mesh`] to inspect the result.
    pub fn from_parts(params: MeshParams, sigma: Sigma, big_k: usize, nodes: Vec<f64>) -> Self {
        let lengths = nodes.windows(2).map(|w| w[1] - w[0]).collect();
        Self {
            params,
            sigma,
            big_k,
            nodes,
            lengths,
        }
    }

    pub fn params(&self) -> &MeshParams {
        &self.params
    }

    pub fn sigma(&self) -> f64 {
        self.sigma.value
    }

    pub fn sigma_branch(&self) -> SigmaBranch {
        self.sigma.branch
    }

    pub fn big_k(&self) -> usize {
        self.big_k
    }

    pub fn n_half(&self) -> usize {
        self.params.n_half
    }

    /// All nodes `x_-N, ..., x_N` in increasing order.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn num_intervals(&self) -> usize {
        self.lengths.len()
    }

    /// Node `x_i` with the signed index used around the turning point,
    /// `-N <= i <= N`.
    pub fn node(&self, i: isize) -> f64 {
        self.nodes[(i + self.params.n_half as isize) as usize]
    }

    /// Endpoints of interval `e`, counted from the left boundary.
    pub fn interval(&self, e: usize) -> (f64, f64) {
        (self.nodes[e], self.nodes[e + 1])
    }

    /// Index of the interval containing `x` (closed on the right for the last one).
    pub fn locate(&self, x: f64) -> usize {
        let n = self.num_intervals();
        match self.nodes.binary_search_by(|probe| probe.total_cmp(&x)) {
            Ok(i) => i.min(n - 1),
            Err(i) => i.saturating_sub(1).min(n - 1),
        }
    }

    pub fn max_length(&self) -> f64 {
        self.lengths.iter().copied().fold(0.0, f64::max)
    }

    pub fn header(&self) -> MeshHeader {
        MeshHeader {
            eps: self.params.eps,
            n: self.params.n_half,
            k: self.params.order,
            lambda: self.params.lambda,
            sigma: self.sigma.value,
            big_k: self.big_k,
        }
    }

    /// Node coordinates, one per line with 17 significant digits.
    pub fn nodes_csv(&self) -> String {
        let mut out = String::with_capacity(self.nodes.len() * 24);
        for x in &self.nodes {
            out.push_str(&format!("{x:.16e}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshHeader {
    pub eps: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub k: usize,
    pub lambda: f64,
    pub sigma: f64,
    #[serde(rename = "K")]
    pub big_k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MeshViolation {
    IntervalCount { expected: usize, found: usize },
    BadEndpoints { left: f64, right: f64 },
    NonMonotone { index: usize },
    Asymmetric { index: usize },
    IntervalTooLong { index: usize, length: f64, bound: f64 },
    SigmaBracket { sigma: f64, big_k: usize },
    FirstIntervalTooLong { x1: f64, bound: f64 },
    MissingDecadeEdge { edge: f64 },
    NotPiecewiseEquidistant { decade: usize, index: usize },
}

impl fmt::Display for MeshViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::IntervalCount { expected, found } => {
                write!(f, "interval count {found}, expected {expected}")
            }
            Self::BadEndpoints { left, right } => {
                write!(f, "mesh spans [{left}, {right}] instead of [-1, 1]")
            }
            Self::NonMonotone { index } => write!(f, "nodes not increasing at index {index}"),
            Self::Asymmetric { index } => write!(f, "symmetry violated at node {index}"),
            Self::IntervalTooLong { index, length, bound } => {
                write!(f, "interval {index} has length {length:e} > (K+1)/N = {bound:e}")
            }
            Self::SigmaBracket { sigma, big_k } => {
                write!(
                    f,
                    "10^-1 sigma <= 10^-K < sigma fails for sigma = {sigma:e}, K = {big_k}"
                )
            }
            Self::FirstIntervalTooLong { x1, bound } => {
                write!(f, "x_1 = {x1:e} exceeds {bound:e}")
            }
            Self::MissingDecadeEdge { edge } => write!(f, "decade edge {edge:e} is not a node"),
            Self::NotPiecewiseEquidistant { decade, index } => {
                write!(
                    f,
                    "piecewise-equidistant violated in decade {decade} at interval {index}"
                )
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MeshReport {
    pub violations: Vec<MeshViolation>,
}

impl MeshReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the structural guarantees of a layer-adapted mesh. Never fails;
/// every broken invariant is listed in the report.
pub fn validate_mesh(mesh: &Mesh) -> MeshReport {
    let mut violations = Vec::new();
    let n = mesh.params.n_half;
    let k = mesh.params.order;
    let nodes = &mesh.nodes;

    if mesh.num_intervals() != 2 * n || nodes.len() != 2 * n + 1 {
        violations.push(MeshViolation::IntervalCount {
            expected: 2 * n,
            found: mesh.num_intervals(),
        });
        return MeshReport { violations };
    }
    if nodes[0] != -1.0 || nodes[2 * n] != 1.0 {
        violations.push(MeshViolation::BadEndpoints {
            left: nodes[0],
            right: nodes[2 * n],
        });
    }
    for (i, h) in mesh.lengths.iter().enumerate() {
        if !(*h > 0.0) {
            violations.push(MeshViolation::NonMonotone { index: i });
        }
    }
    for i in 0..=n {
        if nodes[n - i] != -nodes[n + i] {
            violations.push(MeshViolation::Asymmetric { index: i });
        }
    }

    let big_k = mesh.big_k;
    let bound = (big_k + 1) as f64 / n as f64;
    for (i, &h) in mesh.lengths.iter().enumerate() {
        if h > bound * (1.0 + 4.0 * f64::EPSILON) {
            violations.push(MeshViolation::IntervalTooLong {
                index: i,
                length: h,
                bound,
            });
        }
    }

    let sigma = mesh.sigma.value;
    // 10^-1 sigma <= 10^-K is tested as sigma <= 10^(1-K) to avoid rounding 0.1 sigma
    let upper = if big_k == 0 { 10.0 } else { decade_edge(big_k - 1) };
    if !(sigma <= upper && decade_edge(big_k) < sigma) {
        violations.push(MeshViolation::SigmaBracket { sigma, big_k });
    }

    if mesh.sigma.branch == SigmaBranch::MeshSize {
        // With (K+1) | N this is (K+1) N^-2(k+1); otherwise the innermost
        // decade only has floor(N/(K+1)) parts and sigma / n0 is what holds.
        let parts = decade_parts(n, big_k);
        let x1_bound = if n.is_multiple_of(big_k + 1) {
            (big_k + 1) as f64 * (n as f64).powf(-2.0 * (k as f64 + 1.0))
        } else {
            sigma / parts[0] as f64
        };
        let x1 = nodes[n + 1];
        if x1 > x1_bound * (1.0 + 4.0 * f64::EPSILON) {
            violations.push(MeshViolation::FirstIntervalTooLong { x1, bound: x1_bound });
        }
    }

    check_equidistant(mesh, &mut violations);
    MeshReport { violations }
}

fn check_equidistant(mesh: &Mesh, violations: &mut Vec<MeshViolation>) {
    let n = mesh.params.n_half;
    let half = &mesh.nodes[n..];
    let edges = decade_edges(mesh.big_k);
    let mut positions = Vec::with_capacity(edges.len());
    for &edge in &edges {
        match half.iter().position(|&x| x == edge) {
            Some(p) => positions.push(p),
            None => {
                violations.push(MeshViolation::MissingDecadeEdge { edge });
                return;
            }
        }
    }
    for d in 0..edges.len() - 1 {
        let (p0, p1) = (positions[d], positions[d + 1]);
        if p1 <= p0 {
            violations.push(MeshViolation::MissingDecadeEdge { edge: edges[d + 1] });
            continue;
        }
        let m = p1 - p0;
        let expected = (edges[d + 1] - edges[d]) / m as f64;
        let tol = 8.0 * f64::EPSILON * edges[d + 1];
        for i in p0..p1 {
            let h = half[i + 1] - half[i];
            if (h - expected).abs() > tol {
                violations.push(MeshViolation::NotPiecewiseEquidistant {
                    decade: d,
                    index: n + i,
                });
                break;
            }
        }
    }
}
