use std::sync::Arc;

use crate::basis::{NodeFamily, ReferenceBasis};
use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// Continuous piecewise polynomial of order `k` on a mesh, stored by its
/// values at the global Lagrange nodes. Element `e` owns global nodes
/// `e k ..= e k + k`, so neighbouring elements share their endpoint.
#[derive(Debug, Clone)]
pub struct DiscreteFunction {
    mesh: Arc<Mesh>,
    basis: ReferenceBasis,
    coeffs: Vec<f64>,
}

impl DiscreteFunction {
    pub fn new(mesh: Arc<Mesh>, basis: ReferenceBasis, coeffs: Vec<f64>) -> Result<Self> {
        let expected = num_global_nodes(&mesh, basis.order());
        if coeffs.len() != expected {
            return Err(Error::param(
                "coeffs",
                format!("expected {expected} coefficients, got {}", coeffs.len()),
            ));
        }
        Ok(Self { mesh, basis, coeffs })
    }

    pub fn zero(mesh: Arc<Mesh>, basis: ReferenceBasis) -> Self {
        let n = num_global_nodes(&mesh, basis.order());
        Self {
            mesh,
            basis,
            coeffs: vec![0.0; n],
        }
    }

    /// Builds a function from its interior coefficients; boundary values are 0.
    pub fn from_interior(mesh: Arc<Mesh>, basis: ReferenceBasis, interior: &[f64]) -> Result<Self> {
        let mut coeffs = Vec::with_capacity(interior.len() + 2);
        coeffs.push(0.0);
        coeffs.extend_from_slice(interior);
        coeffs.push(0.0);
        Self::new(mesh, basis, coeffs)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn basis(&self) -> &ReferenceBasis {
        &self.basis
    }

    pub fn order(&self) -> usize {
        self.basis.order()
    }

    pub fn family(&self) -> NodeFamily {
        self.basis.family()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn interior(&self) -> &[f64] {
        &self.coeffs[1..self.coeffs.len() - 1]
    }

    /// The `k + 1` coefficients belonging to element `e`.
    pub fn element_coeffs(&self, e: usize) -> &[f64] {
        let k = self.order();
        &self.coeffs[e * k..=e * k + k]
    }

    /// Global coordinate of every Lagrange node, left to right.
    pub fn node_coordinates(&self) -> Vec<f64> {
        global_node_coordinates(&self.mesh, &self.basis)
    }

    /// Value (`d = 0`) or derivative (`d = 1, 2`) at `x`.
    pub fn eval(&self, x: f64, d: usize) -> Result<f64> {
        let e = self.mesh.locate(x);
        let (xl, xr) = self.mesh.interval(e);
        let h = xr - xl;
        let t = ((x - xl) / h).clamp(0.0, 1.0);
        let phi = self.basis.eval(t, d)?;
        let scale = h.powi(-(d as i32));
        Ok(scale * phi.iter().zip(self.element_coeffs(e)).map(|(p, c)| p * c).sum::<f64>())
    }

    /// Same mesh, order and node family.
    pub fn same_space(&self, other: &DiscreteFunction) -> bool {
        (Arc::ptr_eq(&self.mesh, &other.mesh) || self.mesh.nodes() == other.mesh.nodes()) && self.basis == other.basis
    }

    pub fn sub(&self, other: &DiscreteFunction) -> Result<DiscreteFunction> {
        if !self.same_space(other) {
            return Err(Error::MeshMismatch);
        }
        Ok(Self {
            mesh: self.mesh.clone(),
            basis: self.basis.clone(),
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect(),
        })
    }
}

pub fn num_global_nodes(mesh: &Mesh, k: usize) -> usize {
    mesh.num_intervals() * k + 1
}

pub fn global_node_coordinates(mesh: &Mesh, basis: &ReferenceBasis) -> Vec<f64> {
    let k = basis.order();
    let mut xs = Vec::with_capacity(num_global_nodes(mesh, k));
    for e in 0..mesh.num_intervals() {
        let (xl, xr) = mesh.interval(e);
        let h = xr - xl;
        for &t in &basis.nodes()[..k] {
            xs.push(if t == 0.0 { xl } else { xl + t * h });
        }
    }
    xs.push(mesh.nodes()[mesh.num_intervals()]);
    xs
}
