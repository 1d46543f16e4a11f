//! Lagrange bases on the reference interval `[0, 1]`, Gauss quadrature and
//! the inverse-inequality constant.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest element order supported.
pub const MAX_ORDER: usize = 8;

/// Placement of the `k - 1` inner interpolation points of an element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeFamily {
    #[default]
    Uniform,
    #[serde(alias = "lobatto")]
    GaussLobatto,
}

impl NodeFamily {
    pub fn name(self) -> &'static str {
        match self {
            NodeFamily::Uniform => "uniform",
            NodeFamily::GaussLobatto => "lobatto",
        }
    }
}

impl std::str::FromStr for NodeFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(NodeFamily::Uniform),
            "lobatto" | "gauss-lobatto" => Ok(NodeFamily::GaussLobatto),
            other => Err(Error::param("family", format!("unknown node family `{other}`"))),
        }
    }
}

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p_prev, mut p) = (1.0, x);
    for m in 2..=n {
        let m = m as f64;
        let next = ((2.0 * m - 1.0) * x * p - (m - 1.0) * p_prev) / m;
        p_prev = p;
        p = next;
    }
    let n_f = n as f64;
    let dp = if (1.0 - x * x).abs() < 1e-300 {
        // endpoint value P_n'(+-1) = (+-1)^(n-1) n(n+1)/2
        x.powi(n as i32 - 1) * n_f * (n_f + 1.0) / 2.0
    } else {
        n_f * (p_prev - x * p) / (1.0 - x * x)
    };
    (p, dp)
}

/// The `k + 1` interpolation points of an order-`k` element, sorted, with
/// both endpoints included.
pub fn reference_nodes(k: usize, family: NodeFamily) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::param("k", "element order must be at least 1"));
    }
    if k > MAX_ORDER {
        return Err(Error::param("k", format!("orders above {MAX_ORDER} are not supported")));
    }
    let mut nodes: Vec<f64> = match family {
        NodeFamily::Uniform => (0..=k).map(|j| j as f64 / k as f64).collect(),
        NodeFamily::GaussLobatto => {
            let mut t = vec![0.0; k + 1];
            t[k] = 1.0;
            // interior points are the roots of P_k'
            for j in 1..k {
                let mut x = -(PI * j as f64 / k as f64).cos();
                for _ in 0..100 {
                    let (p, dp) = legendre(k, x);
                    let kk = (k * (k + 1)) as f64;
                    let d2p = (2.0 * x * dp - kk * p) / (1.0 - x * x);
                    let step = dp / d2p;
                    x -= step;
                    if step.abs() < 1e-16 {
                        break;
                    }
                }
                t[j] = 0.5 * (1.0 + x);
            }
            t
        }
    };
    for j in 0..=k / 2 {
        let mirrored = 0.5 * (nodes[j] + 1.0 - nodes[k - j]);
        nodes[j] = mirrored;
        nodes[k - j] = 1.0 - mirrored;
    }
    if k.is_multiple_of(2) {
        nodes[k / 2] = 0.5;
    }
    Ok(nodes)
}

/// Lagrange basis of order `k` on `[0, 1]`.
///
/// Values are `phi_j(t) = w_j prod_{m != j} (t - t_m)` with barycentric
/// weights `w_j`; derivatives expand the product rule, so no division by
/// `t - t_m` happens and evaluation stays accurate arbitrarily close to a node.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceBasis {
    order: usize,
    family: NodeFamily,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl ReferenceBasis {
    pub fn new(k: usize, family: NodeFamily) -> Result<Self> {
        let nodes = reference_nodes(k, family)?;
        let weights = (0..=k)
            .map(|j| {
                let prod: f64 = (0..=k).filter(|&m| m != j).map(|m| nodes[j] - nodes[m]).product();
                1.0 / prod
            })
            .collect();
        Ok(Self {
            order: k,
            family,
            nodes,
            weights,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn family(&self) -> NodeFamily {
        self.family
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.order + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `d`-th derivative (0, 1 or 2) of every basis function at `t`.
    pub fn eval(&self, t: f64, d: usize) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.len()];
        self.eval_into(t, d, &mut out)?;
        Ok(out)
    }

    pub fn eval_into(&self, t: f64, d: usize, out: &mut [f64]) -> Result<()> {
        if d > 2 {
            return Err(Error::param("d", format!("derivative order {d} unsupported (max 2)")));
        }
        let n = self.len();
        let diff: Vec<f64> = self.nodes.iter().map(|&x| t - x).collect();
        for j in 0..n {
            let others = (0..n).filter(|&m| m != j);
            let value = match d {
                0 => others.map(|m| diff[m]).product::<f64>(),
                1 => others
                    .map(|a| (0..n).filter(|&m| m != j && m != a).map(|m| diff[m]).product::<f64>())
                    .sum(),
                _ => {
                    let mut acc = 0.0;
                    for a in (0..n).filter(|&m| m != j) {
                        for b in (0..n).filter(|&m| m != j && m != a) {
                            acc += (0..n)
                                .filter(|&m| m != j && m != a && m != b)
                                .map(|m| diff[m])
                                .product::<f64>();
                        }
                    }
                    acc
                }
            };
            out[j] = self.weights[j] * value;
        }
        Ok(())
    }

    /// Values, first and second derivatives at every point of `points`.
    pub fn tabulate(&self, points: &[f64]) -> BasisTable {
        let n = self.len();
        let mut table = BasisTable {
            n_basis: n,
            values: vec![0.0; points.len() * n],
            first: vec![0.0; points.len() * n],
            second: vec![0.0; points.len() * n],
        };
        for (q, &t) in points.iter().enumerate() {
            let range = q * n..(q + 1) * n;
            self.eval_into(t, 0, &mut table.values[range.clone()]).expect("d = 0");
            self.eval_into(t, 1, &mut table.first[range.clone()]).expect("d = 1");
            self.eval_into(t, 2, &mut table.second[range]).expect("d = 2");
        }
        table
    }
}

/// Basis values and reference derivatives at a fixed set of points.
#[derive(Debug, Clone)]
pub struct BasisTable {
    n_basis: usize,
    values: Vec<f64>,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl BasisTable {
    pub fn values(&self, q: usize) -> &[f64] {
        &self.values[q * self.n_basis..(q + 1) * self.n_basis]
    }

    pub fn first(&self, q: usize) -> &[f64] {
        &self.first[q * self.n_basis..(q + 1) * self.n_basis]
    }

    pub fn second(&self, q: usize) -> &[f64] {
        &self.second[q * self.n_basis..(q + 1) * self.n_basis]
    }
}

/// Quadrature on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&t, &w)| w * f(t)).sum()
    }

    /// Splits `[0, 1]` into `panels` equal pieces with a copy of `self` on each.
    pub fn composite(&self, panels: usize) -> QuadratureRule {
        let panels = panels.max(1);
        let scale = 1.0 / panels as f64;
        let mut points = Vec::with_capacity(self.len() * panels);
        let mut weights = Vec::with_capacity(self.len() * panels);
        for p in 0..panels {
            for (&t, &w) in self.points.iter().zip(&self.weights) {
                points.push((p as f64 + t) * scale);
                weights.push(w * scale);
            }
        }
        QuadratureRule { points, weights }
    }
}

/// `q`-point Gauss–Legendre rule mapped to `[0, 1]`; exact for degree `2q - 1`.
pub fn gauss_rule(q: usize) -> QuadratureRule {
    let q = q.max(1);
    let mut points = vec![0.0; q];
    let mut weights = vec![0.0; q];
    for i in 0..q.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(q, x);
            let step = p / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(q, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // x is the i-th largest root
        points[q - 1 - i] = 0.5 * (1.0 + x);
        points[i] = 0.5 * (1.0 - x);
        weights[q - 1 - i] = 0.5 * w;
        weights[i] = 0.5 * w;
    }
    if q % 2 == 1 {
        points[q / 2] = 0.5;
    }
    QuadratureRule { points, weights }
}

/// Smallest `c` with `||p''|| <= c ||p'||` in `L2(0, 1)` for all `p` in `P_k`.
///
/// `p'` ranges over `P_{k-1}`; in the orthonormal shifted Legendre basis the
/// mass matrix is the identity, so `c^2` is the top eigenvalue of the
/// stiffness matrix of that basis.
pub fn estimate_c_inv(k: usize) -> f64 {
    if k <= 1 {
        return 0.0;
    }
    let dim = k;
    let rule = gauss_rule(k + 1);
    let mut stiffness = DMatrix::<f64>::zeros(dim, dim);
    for (&t, &w) in rule.points.iter().zip(&rule.weights) {
        let x = 2.0 * t - 1.0;
        let derivs: Vec<f64> = (0..dim)
            .map(|m| (2.0 * m as f64 + 1.0).sqrt() * 2.0 * legendre(m, x).1)
            .collect();
        for i in 0..dim {
            for j in 0..dim {
                stiffness[(i, j)] += w * derivs[i] * derivs[j];
            }
        }
    }
    let eig = SymmetricEigen::new(stiffness);
    eig.eigenvalues.iter().copied().fold(0.0, f64::max).sqrt()
}
