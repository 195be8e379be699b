//! Nodal P1 fields on a mesh.

use super::mesh::TriMesh;
use crate::geometry::SurfacePoint;
use std::sync::Arc;

/// A piecewise-linear nodal function. `mean_zero` records whether the
/// mass-weighted mean has been projected out.
#[derive(Clone, Debug)]
pub struct DiscreteField {
    pub mesh: Arc<TriMesh>,
    pub values: Vec<f64>,
    pub mean_zero: bool,
}

impl DiscreteField {
    pub fn zeros(mesh: Arc<TriMesh>) -> Self {
        let n = mesh.n_nodes();
        DiscreteField { mesh, values: vec![0.0; n], mean_zero: true }
    }

    pub fn new(mesh: Arc<TriMesh>, values: Vec<f64>) -> Self {
        DiscreteField { mesh, values, mean_zero: false }
    }

    pub fn new_mean_zero(mesh: Arc<TriMesh>, values: Vec<f64>) -> Self {
        DiscreteField { mesh, values, mean_zero: true }
    }

    pub fn from_fn<F: Fn([f64; 2]) -> f64>(mesh: Arc<TriMesh>, f: F) -> Self {
        let values = mesh.nodes.iter().map(|&x| f(x)).collect();
        DiscreteField { mesh, values, mean_zero: false }
    }

    /// Interpolated value at global coordinates; `None` outside the mesh.
    pub fn eval(&self, coords: [f64; 2]) -> Option<f64> {
        let (t, l) = self.mesh.locate(coords)?;
        let tri = self.mesh.tris[t];
        Some(l[0] * self.values[tri[0]] + l[1] * self.values[tri[1]] + l[2] * self.values[tri[2]])
    }

    pub fn eval_point(&self, p: &SurfacePoint) -> Option<f64> {
        self.eval(p.coords)
    }

    pub fn axpy(&mut self, alpha: f64, other: &DiscreteField) {
        for (v, o) in self.values.iter_mut().zip(other.values.iter()) {
            *v += alpha * o;
        }
        self.mean_zero = self.mean_zero && other.mean_zero;
    }

    pub fn scale(&mut self, alpha: f64) {
        for v in self.values.iter_mut() {
            *v *= alpha;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    /// Location of the maximum nodal value.
    pub fn argmax(&self) -> (usize, [f64; 2]) {
        let mut best = 0;
        for i in 1..self.values.len() {
            if self.values[i] > self.values[best] {
                best = i;
            }
        }
        (best, self.mesh.nodes[best])
    }

    /// Plain-text export of node values, one `i x1 x2 v` record per line.
    pub fn export_text(&self) -> String {
        let mut s = String::new();
        for (i, (x, v)) in self.mesh.nodes.iter().zip(self.values.iter()).enumerate() {
            s.push_str(&format!("{} {:.17e} {:.17e} {:.17e}\n", i, x[0], x[1], v));
        }
        s
    }
}
