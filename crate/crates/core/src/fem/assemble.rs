//! P1 assembly on an isothermal mesh: Euclidean stiffness (the Dirichlet
//! form is conformally invariant in 2D), metric-weighted mass, boundary
//! line forms, load vectors by per-triangle quadrature, and the constrained
//! Neumann solves every downstream module uses.

use super::band::{BandFactor, BandLayout};
use super::field::DiscreteField;
use super::mesh::TriMesh;
use crate::{Error, Result};
use std::cell::OnceCell;
use std::sync::Arc;

/// Compressed sparse rows, symmetric pattern.
#[derive(Debug, Clone)]
pub struct Csr {
    pub n: usize,
    pub rowptr: Vec<usize>,
    pub colidx: Vec<usize>,
    pub values: Vec<f64>,
}

impl Csr {
    /// Build from (row, col, value) triplets, merging duplicates.
    pub fn from_triplets_pub(n: usize, triplets: &mut Vec<(usize, usize, f64)>) -> Csr {
        Csr::from_triplets(n, triplets)
    }

    fn from_triplets(n: usize, triplets: &mut Vec<(usize, usize, f64)>) -> Csr {
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        let mut rowptr = vec![0usize; n + 1];
        let mut colidx = Vec::new();
        let mut values = Vec::new();
        let mut k = 0;
        while k < triplets.len() {
            let (i, j, mut v) = triplets[k];
            let mut k2 = k + 1;
            while k2 < triplets.len() && triplets[k2].0 == i && triplets[k2].1 == j {
                v += triplets[k2].2;
                k2 += 1;
            }
            rowptr[i + 1] += 1;
            colidx.push(j);
            values.push(v);
            k = k2;
        }
        for i in 0..n {
            rowptr[i + 1] += rowptr[i];
        }
        Csr { n, rowptr, colidx, values }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.rowptr[i]..self.rowptr[i + 1] {
                s += self.values[k] * x[self.colidx[k]];
            }
            y[i] = s;
        }
        y
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let lo = self.rowptr[i];
        let hi = self.rowptr[i + 1];
        match self.colidx[lo..hi].binary_search(&j) {
            Ok(k) => self.values[lo + k],
            Err(_) => 0.0,
        }
    }

    /// x^T A y
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let ay = self.matvec(y);
        x.iter().zip(ay.iter()).map(|(a, b)| a * b).sum()
    }
}

/// Quadrature for load assembly.
#[derive(Clone, Copy, Debug)]
pub enum LoadQuadrature {
    /// 3-point edge-midpoint rule (degree 2).
    Midpoint,
    /// 7-point degree-5 rule.
    Degree5,
    /// Degree-5 with recursive subdivision where it disagrees with the
    /// midpoint rule by more than `tol` (per triangle, absolute).
    Adaptive { tol: f64, max_depth: usize },
}

// degree-5 rule on the reference triangle (barycentric points, area weights)
const Q5: [([f64; 3], f64); 7] = [
    ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
    ([0.101_286_507_323_456_3, 0.101_286_507_323_456_3, 0.797_426_985_353_087_4], 0.125_939_180_544_827_1),
    ([0.101_286_507_323_456_3, 0.797_426_985_353_087_4, 0.101_286_507_323_456_3], 0.125_939_180_544_827_1),
    ([0.797_426_985_353_087_4, 0.101_286_507_323_456_3, 0.101_286_507_323_456_3], 0.125_939_180_544_827_1),
    ([0.470_142_064_105_115_1, 0.470_142_064_105_115_1, 0.059_715_871_789_769_8], 0.132_394_152_788_506_2),
    ([0.470_142_064_105_115_1, 0.059_715_871_789_769_8, 0.470_142_064_105_115_1], 0.132_394_152_788_506_2),
    ([0.059_715_871_789_769_8, 0.470_142_064_105_115_1, 0.470_142_064_105_115_1], 0.132_394_152_788_506_2),
];

/// The assembled Neumann system on a mesh.
pub struct NeumannSystem {
    pub mesh: Arc<TriMesh>,
    pub stiffness: Csr,
    pub mass: Csr,
    /// `m_i = int psi_i dv_g`; `sum m = |Sigma|_h`.
    pub mass_vector: Vec<f64>,
    pub area: f64,
    pub layout: BandLayout,
    poisson: OnceCell<BandFactor>,
}

pub fn assemble(mesh: &Arc<TriMesh>) -> Result<NeumannSystem> {
    let n = mesh.n_nodes();
    let mut kt: Vec<(usize, usize, f64)> = Vec::with_capacity(9 * mesh.tris.len());
    let mut mt: Vec<(usize, usize, f64)> = Vec::with_capacity(9 * mesh.tris.len());
    for t in 0..mesh.tris.len() {
        let tri = mesh.tris[t];
        let p = mesh.coords(t);
        let area = mesh.area_of(t);
        if !(area > 0.0) {
            return Err(Error::DegenerateElement(format!("triangle {t}")));
        }
        // P1 gradients
        let mut grads = [[0.0f64; 2]; 3];
        for i in 0..3 {
            let a = p[(i + 1) % 3];
            let b = p[(i + 2) % 3];
            grads[i] = [(a[1] - b[1]) / (2.0 * area), (b[0] - a[0]) / (2.0 * area)];
        }
        for i in 0..3 {
            for j in 0..3 {
                kt.push((
                    tri[i],
                    tri[j],
                    area * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]),
                ));
            }
        }
        // metric-weighted mass by the edge-midpoint rule
        let mids = [
            [(p[0][0] + p[1][0]) / 2.0, (p[0][1] + p[1][1]) / 2.0],
            [(p[1][0] + p[2][0]) / 2.0, (p[1][1] + p[2][1]) / 2.0],
            [(p[2][0] + p[0][0]) / 2.0, (p[2][1] + p[0][1]) / 2.0],
        ];
        // psi values at the midpoints: midpoint k lies opposite vertex (k+2)%3
        let psi_at = |mid: usize, vtx: usize| -> f64 {
            if (mid + 2) % 3 == vtx {
                0.0
            } else {
                0.5
            }
        };
        for (q, mid) in mids.iter().enumerate() {
            let w = mesh
                .surface
                .conformal_factor(mesh.surface.normalize_coords(*mid))
                .exp()
                * area
                / 3.0;
            for i in 0..3 {
                for j in 0..3 {
                    let v = w * psi_at(q, i) * psi_at(q, j);
                    if v != 0.0 {
                        mt.push((tri[i], tri[j], v));
                    }
                }
            }
        }
    }
    let stiffness = Csr::from_triplets(n, &mut kt);
    let mass = Csr::from_triplets(n, &mut mt);
    let mut mass_vector = vec![0.0; n];
    for i in 0..n {
        for k in mass.rowptr[i]..mass.rowptr[i + 1] {
            mass_vector[i] += mass.values[k];
        }
    }
    let area = mass_vector.iter().sum();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for k in stiffness.rowptr[i]..stiffness.rowptr[i + 1] {
            let j = stiffness.colidx[k];
            if j != i {
                adj[i].push(j);
            }
        }
    }
    let layout = BandLayout::from_adjacency(&adj);
    Ok(NeumannSystem {
        mesh: mesh.clone(),
        stiffness,
        mass,
        mass_vector,
        area,
        layout,
        poisson: OnceCell::new(),
    })
}

impl NeumannSystem {
    /// Load vector `int f psi_i dv_g` with `f` given in global coordinates.
    pub fn load<F: Fn([f64; 2]) -> f64 + ?Sized>(&self, f: &F, quad: LoadQuadrature) -> Vec<f64> {
        let mesh = &self.mesh;
        let mut rhs = vec![0.0; mesh.n_nodes()];
        for t in 0..mesh.tris.len() {
            let p = mesh.coords(t);
            let mut local = [0.0f64; 3];
            tri_load(mesh, f, &p, quad, &mut local);
            for i in 0..3 {
                rhs[mesh.tris[t][i]] += local[i];
            }
        }
        rhs
    }

    /// Boundary load `int g psi_i ds_g` with `g` given in global
    /// coordinates of the boundary point. Quadrature points are projected
    /// onto the true boundary curve and weighted by arc length, which keeps
    /// the data consistency at O(h^2) on the circular boundaries.
    pub fn boundary_load<F: Fn([f64; 2]) -> f64>(&self, g: &F) -> Vec<f64> {
        let mesh = &self.mesh;
        let mut rhs = vec![0.0; mesh.n_nodes()];
        let circle_r = mesh.surface.kind.patch_radius();
        // 2-point Gauss on each edge
        let gp = 1.0 / 3.0f64.sqrt();
        for [a, b] in &mesh.boundary_edges {
            let pa = mesh.nodes[*a];
            let d = mesh.surface.coord_delta(pa, mesh.nodes[*b]);
            let chord = d[0].hypot(d[1]);
            let arc_factor = match circle_r {
                Some(r) => {
                    let half = (chord / (2.0 * r)).min(1.0);
                    let alpha = 2.0 * half.asin();
                    if chord > 0.0 { r * alpha / chord } else { 1.0 }
                }
                None => 1.0,
            };
            let len = chord * arc_factor;
            for &s in &[0.5 - gp / 2.0, 0.5 + gp / 2.0] {
                let mut x = [pa[0] + s * d[0], pa[1] + s * d[1]];
                if let Some(r) = circle_r {
                    let n = x[0].hypot(x[1]).max(1e-300);
                    x = [x[0] * r / n, x[1] * r / n];
                }
                let x = mesh.surface.normalize_coords(x);
                let w = (mesh.surface.conformal_factor(x) / 2.0).exp() * len / 2.0;
                let gv = g(x);
                rhs[*a] += w * gv * (1.0 - s);
                rhs[*b] += w * gv * s;
            }
        }
        rhs
    }

    /// Mass-weighted mean of nodal values.
    pub fn mean(&self, values: &[f64]) -> f64 {
        values
            .iter()
            .zip(self.mass_vector.iter())
            .map(|(v, m)| v * m)
            .sum::<f64>()
            / self.area
    }

    fn poisson_factor(&self) -> Result<&BandFactor> {
        if let Some(f) = self.poisson.get() {
            return Ok(f);
        }
        let s = &self.stiffness;
        let f = BandFactor::factor(&self.layout, |i, j| {
            // pin node 0 to remove the constant kernel
            if i == 0 || j == 0 {
                if i == j {
                    1.0
                } else {
                    0.0
                }
            } else {
                s.entry(i, j)
            }
        })?;
        let _ = self.poisson.set(f);
        Ok(self.poisson.get().unwrap())
    }

    /// Solve `-Delta u = f`, `du/dnu = g` for the mean-zero solution, with
    /// the right-hand side given as an assembled dual vector
    /// `rhs_i = int f psi_i dv_g + ∮ g psi_i ds_g`. If `mean_correct`, the
    /// compatibility defect is projected out first (the discrete version of
    /// subtracting the average); otherwise a defect beyond `tol` errors.
    pub fn solve_neumann_meanzero(
        &self,
        rhs: &[f64],
        mean_correct: bool,
    ) -> Result<DiscreteField> {
        let defect: f64 = rhs.iter().sum();
        let scale = rhs.iter().map(|v| v.abs()).sum::<f64>().max(1e-300);
        let mut b = rhs.to_vec();
        if mean_correct {
            for i in 0..b.len() {
                b[i] -= defect * self.mass_vector[i] / self.area;
            }
        } else if defect.abs() > 1e-8 * scale {
            return Err(Error::IncompatibleData(defect));
        } else {
            for i in 0..b.len() {
                b[i] -= defect * self.mass_vector[i] / self.area;
            }
        }
        b[0] = 0.0; // pinned row
        let factor = self.poisson_factor()?;
        let mut x = factor.solve(&b);
        let mean = self.mean(&x);
        for v in x.iter_mut() {
            *v -= mean;
        }
        Ok(DiscreteField::new_mean_zero(self.mesh.clone(), x))
    }

    /// Project a field to exact (discrete) zero mean.
    pub fn project_mean_zero(&self, field: &mut DiscreteField) {
        let mean = self.mean(&field.values);
        for v in field.values.iter_mut() {
            *v -= mean;
        }
        field.mean_zero = true;
    }

    /// Dirichlet inner product of two nodal fields.
    pub fn dirichlet(&self, a: &DiscreteField, b: &DiscreteField) -> f64 {
        self.stiffness.bilinear(&a.values, &b.values)
    }
}

fn tri_load<F: Fn([f64; 2]) -> f64 + ?Sized>(
    mesh: &TriMesh,
    f: &F,
    p: &[[f64; 2]; 3],
    quad: LoadQuadrature,
    out: &mut [f64; 3],
) {
    let area = 0.5
        * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
            - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
    let weighted = |x: [f64; 2]| -> f64 {
        let xn = mesh.surface.normalize_coords(x);
        f(xn) * mesh.surface.conformal_factor(xn).exp()
    };
    let rule5 = |p: &[[f64; 2]; 3], area: f64, out: &mut [f64; 3]| {
        for (bary, w) in Q5.iter() {
            let x = [
                bary[0] * p[0][0] + bary[1] * p[1][0] + bary[2] * p[2][0],
                bary[0] * p[0][1] + bary[1] * p[1][1] + bary[2] * p[2][1],
            ];
            let fv = weighted(x) * w * area;
            for i in 0..3 {
                out[i] += fv * bary[i];
            }
        }
    };
    match quad {
        LoadQuadrature::Midpoint => {
            for q in 0..3 {
                let x = [
                    (p[q][0] + p[(q + 1) % 3][0]) / 2.0,
                    (p[q][1] + p[(q + 1) % 3][1]) / 2.0,
                ];
                let fv = weighted(x) * area / 3.0;
                for i in 0..3 {
                    let psi = if (q + 2) % 3 == i { 0.0 } else { 0.5 };
                    out[i] += fv * psi;
                }
            }
        }
        LoadQuadrature::Degree5 => rule5(p, area, out),
        LoadQuadrature::Adaptive { tol, max_depth } => {
            // compare against the midpoint rule; subdivide on disagreement
            let mut coarse = [0.0f64; 3];
            for q in 0..3 {
                let x = [
                    (p[q][0] + p[(q + 1) % 3][0]) / 2.0,
                    (p[q][1] + p[(q + 1) % 3][1]) / 2.0,
                ];
                let fv = weighted(x) * area / 3.0;
                for i in 0..3 {
                    let psi = if (q + 2) % 3 == i { 0.0 } else { 0.5 };
                    coarse[i] += fv * psi;
                }
            }
            let mut fine = [0.0f64; 3];
            rule5(p, area, &mut fine);
            let diff: f64 = (0..3).map(|i| (fine[i] - coarse[i]).abs()).sum();
            if diff <= tol || max_depth == 0 {
                for i in 0..3 {
                    out[i] += fine[i];
                }
            } else {
                // subdivide into 4; child loads are re-expressed on the
                // parent's P1 basis via the barycentric embedding
                let m01 = [(p[0][0] + p[1][0]) / 2.0, (p[0][1] + p[1][1]) / 2.0];
                let m12 = [(p[1][0] + p[2][0]) / 2.0, (p[1][1] + p[2][1]) / 2.0];
                let m20 = [(p[2][0] + p[0][0]) / 2.0, (p[2][1] + p[0][1]) / 2.0];
                let children = [
                    [p[0], m01, m20],
                    [m01, p[1], m12],
                    [m20, m12, p[2]],
                    [m01, m12, m20],
                ];
                // barycentric coordinates of child vertices in the parent
                let bary = [
                    [[1.0, 0.0, 0.0], [0.5, 0.5, 0.0], [0.5, 0.0, 0.5]],
                    [[0.5, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.5, 0.5]],
                    [[0.5, 0.0, 0.5], [0.0, 0.5, 0.5], [0.0, 0.0, 1.0]],
                    [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]],
                ];
                for (c, child) in children.iter().enumerate() {
                    let mut sub = [0.0f64; 3];
                    tri_load(
                        mesh,
                        f,
                        child,
                        LoadQuadrature::Adaptive { tol: tol / 4.0, max_depth: max_depth - 1 },
                        &mut sub,
                    );
                    for i in 0..3 {
                        for v in 0..3 {
                            out[i] += sub[v] * bary[c][v][i];
                        }
                    }
                }
            }
        }
    }
}

/// Solve `(K + sum_k c_k u_k u_k^T) x = b` given a factorization of `K`
/// (Sherman–Morrison–Woodbury, up to a handful of rank-one terms).
pub fn woodbury_solve(
    factor: &BandFactor,
    updates: &[(f64, &[f64])],
    b: &[f64],
) -> Result<Vec<f64>> {
    let x0 = factor.solve(b);
    if updates.is_empty() {
        return Ok(x0);
    }
    let m = updates.len();
    let z: Vec<Vec<f64>> = updates.iter().map(|(_, u)| factor.solve(u)).collect();
    // cap = C^{-1} + U^T K^{-1} U with C = diag(c)
    let mut cap = vec![vec![0.0; m]; m];
    for a in 0..m {
        for bidx in 0..m {
            let dot: f64 = updates[a].1.iter().zip(z[bidx].iter()).map(|(p, q)| p * q).sum();
            cap[a][bidx] = dot + if a == bidx { 1.0 / updates[a].0 } else { 0.0 };
        }
    }
    let mut rhs_small: Vec<f64> = updates
        .iter()
        .map(|(_, u)| u.iter().zip(x0.iter()).map(|(p, q)| p * q).sum())
        .collect();
    solve_dense(&mut cap, &mut rhs_small)?;
    let mut x = x0;
    for a in 0..m {
        for i in 0..x.len() {
            x[i] -= z[a][i] * rhs_small[a];
        }
    }
    Ok(x)
}

fn solve_dense(a: &mut [Vec<f64>], b: &mut [f64]) -> Result<()> {
    let n = b.len();
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if a[r][col].abs() > a[piv][col].abs() {
                piv = r;
            }
        }
        if a[piv][col].abs() < 1e-300 {
            return Err(Error::SolverBreakdown("singular Woodbury capacitance".into()));
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = b[col];
        for c in col + 1..n {
            s -= a[col][c] * b[c];
        }
        b[col] = s / a[col][col];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::mesh::build_mesh;
    use crate::geometry::surface_catalog;
    use std::collections::BTreeMap;
    use std::f64::consts::PI;

    fn disk_system(h: f64) -> NeumannSystem {
        let d = surface_catalog("disk", &BTreeMap::new()).unwrap();
        let mesh = build_mesh(&d, h).unwrap();
        assemble(&mesh).unwrap()
    }

    #[test]
    fn constants_in_stiffness_kernel() {
        let sys = disk_system(0.15);
        let ones = vec![1.0; sys.mesh.n_nodes()];
        let k1 = sys.stiffness.matvec(&ones);
        let worst = k1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst < 1e-12, "stiffness * 1 = {worst}");
    }

    #[test]
    fn disk_mass_is_area() {
        let sys = disk_system(0.1);
        assert!((sys.area - PI).abs() < 0.01, "total mass {}", sys.area);
    }

    #[test]
    fn cap_mass_matches_cap_area() {
        let mut p = BTreeMap::new();
        p.insert("theta0".to_string(), PI / 2.0);
        let cap = surface_catalog("cap", &p).unwrap();
        let mesh = build_mesh(&cap, 0.05).unwrap();
        let sys = assemble(&mesh).unwrap();
        assert!(
            (sys.area - 2.0 * PI).abs() < 0.02,
            "hemisphere area {} vs {}",
            sys.area,
            2.0 * PI
        );
    }

    #[test]
    fn zero_data_zero_solution() {
        let sys = disk_system(0.2);
        let rhs = vec![0.0; sys.mesh.n_nodes()];
        let u = sys.solve_neumann_meanzero(&rhs, false).unwrap();
        assert!(u.values.iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn manufactured_harmonic_neumann() {
        // u = x1^2 - x2^2 is harmonic; du/dnu = 2(x1^2 - x2^2) on |x| = 1,
        // mean zero and compatible
        let sys = disk_system(0.05);
        let g = |x: [f64; 2]| 2.0 * (x[0] * x[0] - x[1] * x[1]);
        let rhs = sys.boundary_load(&g);
        let u = sys.solve_neumann_meanzero(&rhs, true).unwrap();
        let mut worst = 0.0f64;
        for (i, x) in sys.mesh.nodes.iter().enumerate() {
            let exact = x[0] * x[0] - x[1] * x[1];
            worst = worst.max((u.values[i] - exact).abs());
        }
        assert!(worst < 0.01, "L_inf error {worst}");
    }

    #[test]
    fn incompatible_data_rejected() {
        let sys = disk_system(0.2);
        let rhs = sys.load(&|_| 1.0, LoadQuadrature::Midpoint);
        assert!(matches!(
            sys.solve_neumann_meanzero(&rhs, false),
            Err(Error::IncompatibleData(_))
        ));
        assert!(sys.solve_neumann_meanzero(&rhs, true).is_ok());
    }

    #[test]
    fn solve_operator_self_adjoint() {
        let sys = disk_system(0.12);
        let n = sys.mesh.n_nodes();
        // two deterministic pseudo-random mean-zero loads
        let mut f = vec![0.0; n];
        let mut g = vec![0.0; n];
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut rng = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for i in 0..n {
            f[i] = rng();
            g[i] = rng();
        }
        let pf: f64 = f.iter().sum();
        let pg: f64 = g.iter().sum();
        for i in 0..n {
            f[i] -= pf * sys.mass_vector[i] / sys.area;
            g[i] -= pg * sys.mass_vector[i] / sys.area;
        }
        let uf = sys.solve_neumann_meanzero(&f, true).unwrap();
        let ug = sys.solve_neumann_meanzero(&g, true).unwrap();
        // <u_f, g> = <u_g, f> as dual pairings
        let a: f64 = uf.values.iter().zip(g.iter()).map(|(p, q)| p * q).sum();
        let b: f64 = ug.values.iter().zip(f.iter()).map(|(p, q)| p * q).sum();
        let scale = a.abs().max(b.abs()).max(1e-30);
        assert!((a - b).abs() / scale < 1e-9, "self-adjointness {a} vs {b}");
    }

    #[test]
    fn convergence_rate_manufactured() {
        let d = surface_catalog("disk", &BTreeMap::new()).unwrap();
        let mut errs_harmonic = Vec::new();
        let mut errs_bulk_interior = Vec::new();
        for h in [0.1, 0.05, 0.025] {
            let mesh = build_mesh(&d, h).unwrap();
            let sys = assemble(&mesh).unwrap();
            // harmonic: u = x1^2 - x2^2 with its Neumann data
            let g = |x: [f64; 2]| 2.0 * (x[0] * x[0] - x[1] * x[1]);
            let rhs = sys.boundary_load(&g);
            let u = sys.solve_neumann_meanzero(&rhs, true).unwrap();
            let mut worst = 0.0f64;
            for (i, x) in sys.mesh.nodes.iter().enumerate() {
                worst = worst.max((u.values[i] - (x[0] * x[0] - x[1] * x[1])).abs());
            }
            errs_harmonic.push(worst);

            // volume load: u = r^4, -Delta u = -16 r^2, du/dr|_{r=1} = 4;
            // the polygonal-boundary slivers limit the rate at the rim, so
            // measure in the interior
            let f = |x: [f64; 2]| -16.0 * (x[0] * x[0] + x[1] * x[1]);
            let mut rhs = sys.load(&f, LoadQuadrature::Degree5);
            let bl = sys.boundary_load(&|_| 4.0);
            for i in 0..rhs.len() {
                rhs[i] += bl[i];
            }
            let u = sys.solve_neumann_meanzero(&rhs, true).unwrap();
            let mut worst = 0.0f64;
            for (i, x) in sys.mesh.nodes.iter().enumerate() {
                if x[0].hypot(x[1]) < 0.8 {
                    let exact = (x[0] * x[0] + x[1] * x[1]).powi(2) - 1.0 / 3.0;
                    worst = worst.max((u.values[i] - exact).abs());
                }
            }
            errs_bulk_interior.push(worst);
        }
        let slope = (errs_harmonic[0] / errs_harmonic[2]).ln() / (4.0f64).ln();
        assert!(slope >= 1.8, "harmonic errors {errs_harmonic:?}, slope {slope:.2}");
        let slope = (errs_bulk_interior[0] / errs_bulk_interior[2]).ln() / (4.0f64).ln();
        assert!(slope >= 1.8, "bulk errors {errs_bulk_interior:?}, slope {slope:.2}");
    }

    #[test]
    fn woodbury_rank_one() {
        let sys = disk_system(0.2);
        let n = sys.mesh.n_nodes();
        let factor = sys.poisson_factor().unwrap();
        let u: Vec<f64> = (0..n).map(|i| (i as f64 * 0.1).sin()).collect();
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).cos()).collect();
        let x = woodbury_solve(factor, &[(0.7, &u)], &b).unwrap();
        // residual of (K + 0.7 u u^T) x = b with K the pinned stiffness
        let udotx: f64 = u.iter().zip(x.iter()).map(|(p, q)| p * q).sum();
        let mut worst = 0.0f64;
        for i in 0..n {
            let base = if i == 0 {
                x[0]
            } else {
                let mut s = 0.0;
                for k in sys.stiffness.rowptr[i]..sys.stiffness.rowptr[i + 1] {
                    let j = sys.stiffness.colidx[k];
                    if j == 0 {
                        continue;
                    }
                    s += sys.stiffness.values[k] * x[j];
                }
                s
            };
            let r = base + 0.7 * u[i] * udotx - b[i];
            worst = worst.max(r.abs());
        }
        assert!(worst < 1e-8, "woodbury residual {worst}");
    }
}
