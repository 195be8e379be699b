//! Mesh generation: structured base meshes (polar rings for disk-shaped
//! patches, a periodic grid for the cylinder) with longest-edge bisection
//! toward a sizing function for grading near bubble cores. Boundary edge
//! midpoints are projected back onto the true boundary circle.

use crate::geometry::{SurfaceKind, SurfaceModel, SurfacePoint};
use crate::{Error, Result};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

const NODE_BUDGET: usize = 800_000;

/// Triangulation of the global coordinate patch.
#[derive(Debug)]
pub struct TriMesh {
    pub surface: SurfaceModel,
    pub nodes: Vec<[f64; 2]>,
    pub boundary_node: Vec<bool>,
    pub tris: Vec<[usize; 3]>,
    /// Oriented boundary edges (domain on the left).
    pub boundary_edges: Vec<[usize; 2]>,
    pub h: f64,
    locator: Locator,
}

/// Grading request: locally refine toward `h_core` around each center with
/// sizing `h(x) = max(h_core, dist/slope)` capped by the base size.
#[derive(Clone, Debug)]
pub struct GradingSpec {
    pub centers: Vec<[f64; 2]>,
    pub h_core: f64,
    pub slope: f64,
}

impl Default for GradingSpec {
    fn default() -> Self {
        GradingSpec { centers: Vec::new(), h_core: f64::INFINITY, slope: 6.0 }
    }
}

pub fn build_mesh(surface: &SurfaceModel, h: f64) -> Result<Arc<TriMesh>> {
    build_mesh_graded(surface, h, &GradingSpec::default())
}

pub fn build_mesh_graded(
    surface: &SurfaceModel,
    h: f64,
    grading: &GradingSpec,
) -> Result<Arc<TriMesh>> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("mesh size h = {h}")));
    }
    let (mut nodes, mut boundary, mut tris) = match surface.kind {
        SurfaceKind::Disk | SurfaceKind::Cap { .. } => {
            polar_base(surface.kind.patch_radius().unwrap(), h)?
        }
        SurfaceKind::Cylinder { length } => cylinder_base(length, h)?,
    };
    refine_to_sizing(surface, &mut nodes, &mut boundary, &mut tris, h, grading)?;
    orient_ccw(surface, &nodes, &mut tris);
    let boundary_edges = boundary_edge_cycle(&tris)?;
    for [a, b] in &boundary_edges {
        if !boundary[*a] || !boundary[*b] {
            return Err(Error::DegenerateElement("untagged boundary node".into()));
        }
    }
    check_quality(surface, &nodes, &tris)?;
    let locator = Locator::build(surface, &nodes, &tris);
    Ok(Arc::new(TriMesh {
        surface: surface.clone(),
        nodes,
        boundary_node: boundary,
        tris,
        boundary_edges,
        h,
        locator,
    }))
}

type BaseMesh = (Vec<[f64; 2]>, Vec<bool>, Vec<[usize; 3]>);

/// Rings of nodes with 6j nodes on ring j, strip-triangulated.
fn polar_base(radius: f64, h: f64) -> Result<BaseMesh> {
    let n = ((radius / h).ceil() as usize).max(2);
    let est = 3 * n * (n + 1) + 1;
    if est > NODE_BUDGET {
        return Err(Error::NodeBudget { requested: est, limit: NODE_BUDGET });
    }
    let mut nodes = vec![[0.0, 0.0]];
    let mut ring_start = vec![0usize];
    for j in 1..=n {
        ring_start.push(nodes.len());
        let m = 6 * j;
        let r = radius * j as f64 / n as f64;
        for k in 0..m {
            let a = 2.0 * PI * k as f64 / m as f64;
            nodes.push([r * a.cos(), r * a.sin()]);
        }
    }
    let mut tris = Vec::new();
    // innermost fan
    for k in 0..6 {
        tris.push([0, 1 + k, 1 + (k + 1) % 6]);
    }
    for j in 1..n {
        let (s0, m0) = (ring_start[j], 6 * j);
        let (s1, m1) = (ring_start[j + 1], 6 * (j + 1));
        // merge walk by angle
        let ang = |m: usize, k: usize| 2.0 * PI * (k % m) as f64 / m as f64
            + if k >= m { 2.0 * PI } else { 0.0 };
        let (mut i, mut o) = (0usize, 0usize);
        while i < m0 || o < m1 {
            let inner_next = ang(m0, i + 1);
            let outer_next = ang(m1, o + 1);
            if o < m1 && (i == m0 || outer_next <= inner_next) {
                tris.push([s1 + o % m1, s1 + (o + 1) % m1, s0 + i % m0]);
                o += 1;
            } else {
                tris.push([s0 + i % m0, s1 + o % m1, s0 + (i + 1) % m0]);
                i += 1;
            }
        }
    }
    let mut boundary = vec![false; nodes.len()];
    for k in 0..6 * n {
        boundary[ring_start[n] + k] = true;
    }
    Ok((nodes, boundary, tris))
}

fn cylinder_base(length: f64, h: f64) -> Result<BaseMesh> {
    let nt = ((length / h).ceil() as usize).max(2);
    let ns = ((2.0 * PI / h).ceil() as usize).max(3);
    let est = (nt + 1) * ns;
    if est > NODE_BUDGET {
        return Err(Error::NodeBudget { requested: est, limit: NODE_BUDGET });
    }
    let mut nodes = Vec::with_capacity(est);
    for i in 0..=nt {
        for j in 0..ns {
            nodes.push([length * i as f64 / nt as f64, 2.0 * PI * j as f64 / ns as f64]);
        }
    }
    let id = |i: usize, j: usize| i * ns + j % ns;
    let mut tris = Vec::new();
    for i in 0..nt {
        for j in 0..ns {
            tris.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            tris.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    let mut boundary = vec![false; nodes.len()];
    for j in 0..ns {
        boundary[id(0, j)] = true;
        boundary[id(nt, j)] = true;
    }
    Ok((nodes, boundary, tris))
}

/// Coordinates of a triangle with the periodic direction unwrapped around
/// the first vertex.
pub fn tri_coords(surface: &SurfaceModel, nodes: &[[f64; 2]], tri: [usize; 3]) -> [[f64; 2]; 3] {
    let p0 = nodes[tri[0]];
    let mut out = [p0; 3];
    for k in 1..3 {
        let d = surface.coord_delta(p0, nodes[tri[k]]);
        out[k] = [p0[0] + d[0], p0[1] + d[1]];
    }
    out
}

fn tri_area(p: &[[f64; 2]; 3]) -> f64 {
    0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]))
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b { (a, b) } else { (b, a) }
}

fn refine_to_sizing(
    surface: &SurfaceModel,
    nodes: &mut Vec<[f64; 2]>,
    boundary: &mut Vec<bool>,
    tris: &mut Vec<[usize; 3]>,
    h_base: f64,
    grading: &GradingSpec,
) -> Result<()> {
    if grading.centers.is_empty() || grading.h_core >= h_base {
        return Ok(());
    }
    let sizing = |surface: &SurfaceModel, x: [f64; 2]| -> f64 {
        let mut h = h_base;
        for c in &grading.centers {
            let d = surface.coord_delta(*c, x);
            let dist = d[0].hypot(d[1]);
            h = h.min((dist / grading.slope).max(grading.h_core));
        }
        h
    };
    for _pass in 0..64 {
        // adjacency for conforming bisection
        let mut adj: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (t, tri) in tris.iter().enumerate() {
            for e in 0..3 {
                adj.entry(edge_key(tri[e], tri[(e + 1) % 3])).or_default().push(t);
            }
        }
        let longest_edge = |tri: [usize; 3], nodes: &[[f64; 2]]| -> (usize, usize, f64) {
            let p = tri_coords(surface, nodes, tri);
            let mut best = (tri[0], tri[1], 0.0);
            for e in 0..3 {
                let (a, b) = (e, (e + 1) % 3);
                let l = (p[a][0] - p[b][0]).hypot(p[a][1] - p[b][1]);
                if l > best.2 {
                    best = (tri[a], tri[b], l);
                }
            }
            best
        };
        // collect edges to split: longest edges of oversized triangles, then
        // propagate so neighbors split their own longest edge too
        let mut split: HashMap<(usize, usize), bool> = HashMap::new();
        let mut stack: Vec<usize> = Vec::new();
        for (t, tri) in tris.iter().enumerate() {
            let p = tri_coords(surface, nodes, *tri);
            let centroid = [
                (p[0][0] + p[1][0] + p[2][0]) / 3.0,
                (p[0][1] + p[1][1] + p[2][1]) / 3.0,
            ];
            let (_, _, l) = longest_edge(*tri, nodes);
            if l > 1.45 * sizing(surface, surface.normalize_coords(centroid)) {
                stack.push(t);
            }
        }
        if stack.is_empty() {
            return Ok(());
        }
        let mut marked_tri = vec![false; tris.len()];
        while let Some(t) = stack.pop() {
            let (a, b, _) = longest_edge(tris[t], nodes);
            marked_tri[t] = true;
            if split.insert(edge_key(a, b), true).is_none() {
                for &n in &adj[&edge_key(a, b)] {
                    if n != t && !marked_tri[n] {
                        let (na, nb, _) = longest_edge(tris[n], nodes);
                        if edge_key(na, nb) != edge_key(a, b) {
                            stack.push(n);
                        } else {
                            marked_tri[n] = true;
                        }
                    }
                }
            }
        }
        // compatibility closure: every triangle containing a split edge must
        // also split its longest edge
        loop {
            let mut changed = false;
            for tri in tris.iter() {
                let has_split = (0..3)
                    .any(|e| split.contains_key(&edge_key(tri[e], tri[(e + 1) % 3])));
                if has_split {
                    let (a, b, _) = longest_edge(*tri, nodes);
                    if split.insert(edge_key(a, b), true).is_none() {
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        // create midpoints
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        for (&(a, b), _) in split.iter() {
            let on_boundary = boundary[a] && boundary[b] && adj[&(a, b)].len() == 1;
            let d = surface.coord_delta(nodes[a], nodes[b]);
            let mut m = surface
                .normalize_coords([nodes[a][0] + d[0] / 2.0, nodes[a][1] + d[1] / 2.0]);
            if on_boundary {
                m = project_to_boundary(surface, m);
            }
            midpoint.insert((a, b), nodes.len());
            nodes.push(m);
            boundary.push(on_boundary);
            if nodes.len() > NODE_BUDGET {
                return Err(Error::NodeBudget { requested: nodes.len(), limit: NODE_BUDGET });
            }
        }
        // rebuild triangles; each triangle splits its longest marked edge,
        // and the sub-triangle containing another marked edge recurses
        let mut out: Vec<[usize; 3]> = Vec::with_capacity(tris.len() * 2);
        let mut work: Vec<[usize; 3]> = std::mem::take(tris);
        while let Some(tri) = work.pop() {
            let mut marked: Vec<usize> = (0..3)
                .filter(|&e| midpoint.contains_key(&edge_key(tri[e], tri[(e + 1) % 3])))
                .collect();
            if marked.is_empty() {
                out.push(tri);
                continue;
            }
            // split the longest marked edge
            marked.sort_by(|&e1, &e2| {
                let len = |e: usize| {
                    let p = tri_coords(surface, nodes, tri);
                    let (a, b) = (e, (e + 1) % 3);
                    (p[a][0] - p[b][0]).hypot(p[a][1] - p[b][1])
                };
                len(e2).partial_cmp(&len(e1)).unwrap()
            });
            let e = marked[0];
            let (a, b, c) = (tri[e], tri[(e + 1) % 3], tri[(e + 2) % 3]);
            let m = midpoint[&edge_key(a, b)];
            work.push([a, m, c]);
            work.push([m, b, c]);
        }
        *tris = out;
    }
    Err(Error::DegenerateElement("grading did not settle".into()))
}

fn project_to_boundary(surface: &SurfaceModel, x: [f64; 2]) -> [f64; 2] {
    match surface.kind {
        SurfaceKind::Disk | SurfaceKind::Cap { .. } => {
            let r = surface.kind.patch_radius().unwrap();
            let n = x[0].hypot(x[1]).max(1e-300);
            [x[0] * r / n, x[1] * r / n]
        }
        SurfaceKind::Cylinder { length } => {
            let t = if x[0] < length / 2.0 { 0.0 } else { length };
            [t, x[1]]
        }
    }
}

fn orient_ccw(surface: &SurfaceModel, nodes: &[[f64; 2]], tris: &mut [[usize; 3]]) {
    for tri in tris.iter_mut() {
        if tri_area(&tri_coords(surface, nodes, *tri)) < 0.0 {
            tri.swap(1, 2);
        }
    }
}

fn boundary_edge_cycle(tris: &[[usize; 3]]) -> Result<Vec<[usize; 2]>> {
    let mut count: HashMap<(usize, usize), ([usize; 2], usize)> = HashMap::new();
    for tri in tris {
        for e in 0..3 {
            let (a, b) = (tri[e], tri[(e + 1) % 3]);
            let entry = count.entry(edge_key(a, b)).or_insert(([a, b], 0));
            entry.1 += 1;
        }
    }
    let mut edges: Vec<[usize; 2]> = count
        .into_iter()
        .filter_map(|(_, (e, c))| if c == 1 { Some(e) } else { None })
        .collect();
    if edges.iter().any(|e| e[0] == e[1]) {
        return Err(Error::DegenerateElement("degenerate boundary edge".into()));
    }
    edges.sort();
    Ok(edges)
}

fn check_quality(surface: &SurfaceModel, nodes: &[[f64; 2]], tris: &[[usize; 3]]) -> Result<()> {
    for tri in tris {
        let p = tri_coords(surface, nodes, *tri);
        let a = tri_area(&p);
        if !(a > 0.0) {
            return Err(Error::DegenerateElement(format!("area {a} at {tri:?}")));
        }
        if min_angle(&p) < 10.0_f64.to_radians() {
            return Err(Error::DegenerateElement(format!(
                "angle {:.2} deg at {tri:?}",
                min_angle(&p).to_degrees()
            )));
        }
    }
    Ok(())
}

pub fn min_angle(p: &[[f64; 2]; 3]) -> f64 {
    let mut worst = f64::INFINITY;
    for i in 0..3 {
        let a = p[i];
        let b = p[(i + 1) % 3];
        let c = p[(i + 2) % 3];
        let u = [b[0] - a[0], b[1] - a[1]];
        let v = [c[0] - a[0], c[1] - a[1]];
        let dot = u[0] * v[0] + u[1] * v[1];
        let cross = (u[0] * v[1] - u[1] * v[0]).abs();
        worst = worst.min(cross.atan2(dot));
    }
    worst
}

impl TriMesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Unwrapped coordinates of a triangle.
    pub fn coords(&self, t: usize) -> [[f64; 2]; 3] {
        tri_coords(&self.surface, &self.nodes, self.tris[t])
    }

    pub fn area_of(&self, t: usize) -> f64 {
        tri_area(&self.coords(t))
    }

    /// Locate a point; returns triangle index and barycentric coordinates.
    pub fn locate(&self, coords: [f64; 2]) -> Option<(usize, [f64; 3])> {
        self.locator.locate(&self.surface, &self.nodes, &self.tris, coords)
    }

    /// Number of boundary cycles (connected components of boundary edges).
    pub fn boundary_cycles(&self) -> usize {
        let mut next: HashMap<usize, usize> = HashMap::new();
        for [a, b] in &self.boundary_edges {
            next.insert(*a, *b);
        }
        let mut seen: HashMap<usize, bool> = HashMap::new();
        let mut cycles = 0;
        for &start in next.keys() {
            if seen.contains_key(&start) {
                continue;
            }
            cycles += 1;
            let mut cur = start;
            loop {
                seen.insert(cur, true);
                cur = match next.get(&cur) {
                    Some(&n) => n,
                    None => break,
                };
                if cur == start {
                    break;
                }
            }
        }
        cycles
    }

    /// Node positions as classified surface points.
    pub fn node_point(&self, i: usize) -> Result<SurfacePoint> {
        if self.boundary_node[i] {
            self.surface.classify(self.nodes[i], 1e-9)
        } else {
            self.surface.interior_point(self.nodes[i])
        }
    }

    /// Plain-text export: `n x1 x2` per node then `t a b c` per triangle.
    pub fn export_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("# nodes {}\n", self.nodes.len()));
        for (i, p) in self.nodes.iter().enumerate() {
            s.push_str(&format!("n {} {:.17e} {:.17e}\n", i, p[0], p[1]));
        }
        s.push_str(&format!("# triangles {}\n", self.tris.len()));
        for (i, t) in self.tris.iter().enumerate() {
            s.push_str(&format!("t {} {} {} {}\n", i, t[0], t[1], t[2]));
        }
        s
    }
}

/// Uniform background grid for point location.
#[derive(Debug)]
struct Locator {
    x0: [f64; 2],
    cell: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<u32>>,
}

impl Locator {
    fn build(surface: &SurfaceModel, nodes: &[[f64; 2]], tris: &[[usize; 3]]) -> Locator {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in nodes {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let n = (tris.len() as f64).sqrt().ceil() as usize + 1;
        let cell = ((hi[0] - lo[0]).max(hi[1] - lo[1]) / n as f64).max(1e-12);
        let nx = ((hi[0] - lo[0]) / cell).ceil() as usize + 2;
        let ny = ((hi[1] - lo[1]) / cell).ceil() as usize + 2;
        let mut cells = vec![Vec::new(); nx * ny];
        let wrap = matches!(surface.kind, SurfaceKind::Cylinder { .. });
        for (t, tri) in tris.iter().enumerate() {
            let p = tri_coords(surface, nodes, *tri);
            let mut bxlo = f64::INFINITY;
            let mut bxhi = f64::NEG_INFINITY;
            let mut bylo = f64::INFINITY;
            let mut byhi = f64::NEG_INFINITY;
            for q in &p {
                bxlo = bxlo.min(q[0]);
                bxhi = bxhi.max(q[0]);
                bylo = bylo.min(q[1]);
                byhi = byhi.max(q[1]);
            }
            let pad = 1e-9 + 0.01 * cell;
            let shifts: &[f64] = if wrap { &[0.0, 2.0 * PI, -2.0 * PI] } else { &[0.0] };
            for &sh in shifts {
                let i0 = (((bxlo - pad - lo[0]) / cell).floor().max(0.0)) as usize;
                let i1 = (((bxhi + pad - lo[0]) / cell).ceil().min((nx - 1) as f64)) as usize;
                let j0 = (((bylo + sh - pad - lo[1]) / cell).floor().max(0.0)) as usize;
                let j1 = (((byhi + sh + pad - lo[1]) / cell).ceil().min((ny - 1) as f64)) as usize;
                if bylo + sh > hi[1] + cell || byhi + sh < lo[1] - cell {
                    continue;
                }
                for i in i0..=i1.min(nx - 1) {
                    for j in j0..=j1.min(ny - 1) {
                        cells[i * ny + j].push(t as u32);
                    }
                }
            }
        }
        Locator { x0: lo, cell, nx, ny, cells }
    }

    fn locate(
        &self,
        surface: &SurfaceModel,
        nodes: &[[f64; 2]],
        tris: &[[usize; 3]],
        coords: [f64; 2],
    ) -> Option<(usize, [f64; 3])> {
        let coords = surface.normalize_coords(coords);
        let i = (((coords[0] - self.x0[0]) / self.cell).floor().max(0.0) as usize).min(self.nx - 1);
        let j = (((coords[1] - self.x0[1]) / self.cell).floor().max(0.0) as usize).min(self.ny - 1);
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &t in &self.cells[i * self.ny + j] {
            let t = t as usize;
            let p = tri_coords(surface, nodes, tris[t]);
            // express query in the triangle's unwrapped frame
            let d = surface.coord_delta(nodes[tris[t][0]], coords);
            let q = [p[0][0] + d[0], p[0][1] + d[1]];
            let a = tri_area(&p);
            let l1 = 0.5
                * ((p[1][0] - q[0]) * (p[2][1] - q[1]) - (p[2][0] - q[0]) * (p[1][1] - q[1]))
                / a;
            let l2 = 0.5
                * ((p[2][0] - q[0]) * (p[0][1] - q[1]) - (p[0][0] - q[0]) * (p[2][1] - q[1]))
                / a;
            let l3 = 1.0 - l1 - l2;
            let deficit = (-l1).max(-l2).max(-l3).max(0.0);
            if deficit == 0.0 {
                return Some((t, [l1, l2, l3]));
            }
            if best.map_or(true, |(_, _, d0)| deficit < d0) {
                best = Some((t, [l1, l2, l3], deficit));
            }
        }
        // tolerate points marginally outside (boundary chords)
        best.and_then(|(t, l, d)| if d < 0.05 { Some((t, l)) } else { None })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::surface_catalog;
    use std::collections::BTreeMap;

    fn disk() -> SurfaceModel {
        surface_catalog("disk", &BTreeMap::new()).unwrap()
    }

    #[test]
    fn disk_mesh_structure() {
        let m = build_mesh(&disk(), 0.1).unwrap();
        assert_eq!(m.boundary_cycles(), 1);
        let worst = m
            .tris
            .iter()
            .map(|t| min_angle(&tri_coords(&m.surface, &m.nodes, *t)))
            .fold(f64::INFINITY, f64::min);
        assert!(worst.to_degrees() > 20.0, "min angle {}", worst.to_degrees());
        let area: f64 = (0..m.tris.len()).map(|t| m.area_of(t)).sum();
        assert!((area - PI).abs() < 0.02, "mesh area {area}");
    }

    #[test]
    fn cylinder_mesh_two_cycles() {
        let mut p = BTreeMap::new();
        p.insert("L".to_string(), 2.0);
        let c = surface_catalog("cylinder", &p).unwrap();
        let m = build_mesh(&c, 0.1).unwrap();
        assert_eq!(m.boundary_cycles(), 2);
        let area: f64 = (0..m.tris.len()).map(|t| m.area_of(t)).sum();
        assert!((area - 4.0 * PI).abs() < 1e-9, "flat cylinder area is exact: {area}");
    }

    #[test]
    fn node_budget_guard() {
        match build_mesh(&disk(), 1e-6) {
            Err(Error::NodeBudget { .. }) => {}
            other => panic!("expected node budget error, got {other:?}"),
        }
    }

    #[test]
    fn graded_mesh_resolves_core() {
        let spec = GradingSpec { centers: vec![[0.3, 0.0]], h_core: 0.01, slope: 6.0 };
        let m = build_mesh_graded(&disk(), 0.1, &spec).unwrap();
        // find smallest edge near the center
        let mut near = f64::INFINITY;
        for t in 0..m.tris.len() {
            let p = m.coords(t);
            let c = [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0];
            if (c[0] - 0.3).hypot(c[1]) < 0.02 {
                for e in 0..3 {
                    let l = (p[e][0] - p[(e + 1) % 3][0]).hypot(p[e][1] - p[(e + 1) % 3][1]);
                    near = near.min(l);
                }
            }
        }
        assert!(near < 0.016, "core edge {near}");
        let worst = m
            .tris
            .iter()
            .map(|t| min_angle(&tri_coords(&m.surface, &m.nodes, *t)))
            .fold(f64::INFINITY, f64::min);
        assert!(worst.to_degrees() > 13.0, "graded min angle {}", worst.to_degrees());
    }

    #[test]
    fn locate_and_barycentric() {
        let m = build_mesh(&disk(), 0.15).unwrap();
        for q in [[0.0, 0.0], [0.5, 0.3], [-0.7, 0.1], [0.99, 0.0]] {
            let (t, l) = m.locate(q).unwrap_or_else(|| panic!("locate {q:?}"));
            assert!(l.iter().all(|&x| x > -0.06), "bary {l:?} in tri {t}");
            assert!((l[0] + l[1] + l[2] - 1.0).abs() < 1e-12);
        }
        assert!(m.locate([1.5, 0.0]).is_none());
    }
}
