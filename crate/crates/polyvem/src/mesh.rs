//! Mesh families built from a Cartesian background grid and an analytic
//! level set: fitted cut meshes (interface cuboids replaced by their two cut
//! pieces) and unfitted interface meshes (cuboids stay whole and carry a
//! local interface plane).
//!
//! Conformity across neighboring elements rests on one construction rule:
//! the level set is rooted once per background edge (bisection from the
//! negative end), and every cut anywhere in the mesh reuses those shared
//! root vertices. Two elements sharing a cut face therefore split it along
//! the same chord, and in unfitted meshes a root vertex appears in every
//! element containing its edge.

use nalgebra::{Matrix3, Point3, Vector3};
use std::collections::HashMap;

use crate::boundary::best_fan_apex;
use crate::error::{Error, Result};
use crate::geometry::{plane_section, Plane, Polyhedron, SNAP_REL};

/// Analytic level set: negative inside the minus subdomain, positive outside.
pub struct LevelSet {
    name: String,
    phi: Box<dyn Fn(&Point3<f64>) -> f64 + Send + Sync>,
    grad: Box<dyn Fn(&Point3<f64>) -> Vector3<f64> + Send + Sync>,
}

impl LevelSet {
    pub fn new(
        name: impl Into<String>,
        phi: impl Fn(&Point3<f64>) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&Point3<f64>) -> Vector3<f64> + Send + Sync + 'static,
    ) -> Self {
        LevelSet {
            name: name.into(),
            phi: Box::new(phi),
            grad: Box::new(grad),
        }
    }

    /// `x1⁴ + x2⁴ + x3⁴ − r0⁴` with `r0 = 0.75 − eps`; `eps` controls how
    /// close the interface sits to the background grid planes.
    pub fn squircle(eps: f64) -> Self {
        let r0 = 0.75 - eps;
        let r4 = r0.powi(4);
        LevelSet::new(
            "squircle",
            move |p| p.x.powi(4) + p.y.powi(4) + p.z.powi(4) - r4,
            |p| 4.0 * Vector3::new(p.x.powi(3), p.y.powi(3), p.z.powi(3)),
        )
    }

    /// Sphere of the given radius centered at the origin.
    pub fn sphere(radius: f64) -> Self {
        LevelSet::new(
            "sphere",
            move |p| p.coords.norm() - radius,
            |p| {
                let r = p.coords.norm();
                if r == 0.0 {
                    Vector3::zeros()
                } else {
                    p.coords / r
                }
            },
        )
    }

    /// Half-space boundary `x3 = t`.
    pub fn plane_z(t: f64) -> Self {
        LevelSet::new("plane", move |p| p.z - t, |_| Vector3::z())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self, p: &Point3<f64>) -> f64 {
        (self.phi)(p)
    }

    pub fn gradient(&self, p: &Point3<f64>) -> Vector3<f64> {
        (self.grad)(p)
    }

    /// First-order distance estimate `|φ| / ‖∇φ‖`.
    pub fn distance_estimate(&self, p: &Point3<f64>) -> Option<f64> {
        let g = self.gradient(p).norm();
        if g == 0.0 {
            None
        } else {
            Some(self.value(p).abs() / g)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Material {
    Minus,
    Plus,
    Interface(Plane),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshKind {
    Fitted,
    Unfitted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundingBox {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl BoundingBox {
    pub fn symmetric_unit() -> Self {
        BoundingBox {
            min: Point3::new(-1.0, -1.0, -1.0),
            max: Point3::new(1.0, 1.0, 1.0),
        }
    }

    pub fn volume(&self) -> f64 {
        (self.max.x - self.min.x) * (self.max.y - self.min.y) * (self.max.z - self.min.z)
    }

    fn on_boundary(&self, p: &Point3<f64>, tol: f64) -> bool {
        (p.x - self.min.x).abs() <= tol
            || (p.x - self.max.x).abs() <= tol
            || (p.y - self.min.y).abs() <= tol
            || (p.y - self.max.y).abs() <= tol
            || (p.z - self.min.z).abs() <= tol
            || (p.z - self.max.z).abs() <= tol
    }
}

/// One element: global vertex ids, the local geometry (index-aligned with
/// `vertex_ids`), and the material tag.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshElement {
    pub vertex_ids: Vec<usize>,
    pub poly: Polyhedron,
    pub material: Material,
}

impl MeshElement {
    pub fn diameter(&self) -> f64 {
        self.poly.diameter()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Point3<f64>>,
    pub elements: Vec<MeshElement>,
    pub boundary_vertex: Vec<bool>,
    pub interface_elements: Vec<usize>,
    pub kind: MeshKind,
    pub domain: BoundingBox,
}

impl Mesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn volume_sum(&self) -> f64 {
        self.elements.iter().map(|e| e.poly.volume()).sum()
    }

    /// Map from sorted global face vertex sets to the elements carrying them.
    pub fn face_registry(&self) -> HashMap<Vec<usize>, Vec<usize>> {
        let mut reg: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
        for (ei, elem) in self.elements.iter().enumerate() {
            for loop_ in &elem.poly.faces {
                let mut key: Vec<usize> = loop_.iter().map(|&l| elem.vertex_ids[l]).collect();
                key.sort_unstable();
                reg.entry(key).or_default().push(ei);
            }
        }
        reg
    }

    /// For every element, the elements sharing a face with it (itself
    /// included), sorted; one registry pass for the whole mesh.
    pub fn face_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj: Vec<Vec<usize>> = (0..self.elements.len()).map(|e| vec![e]).collect();
        for (_, elems) in self.face_registry() {
            if elems.len() == 2 {
                let (a, b) = (elems[0], elems[1]);
                if !adj[a].contains(&b) {
                    adj[a].push(b);
                }
                if !adj[b].contains(&a) {
                    adj[b].push(a);
                }
            }
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// Elements sharing a face with `elem` (the patch used by the
    /// quasi-interpolant), including `elem` itself, sorted.
    pub fn face_neighbors(&self, elem: usize) -> Vec<usize> {
        self.face_adjacency().swap_remove(elem)
    }
}

/// `n³` axis-aligned cuboids over the domain box, boundary vertices flagged.
pub fn cartesian_background(n: usize, domain: &BoundingBox) -> Mesh {
    assert!(n >= 1);
    let np = n + 1;
    let step = (domain.max - domain.min) / n as f64;
    let coord = |i: usize, j: usize, k: usize| -> Point3<f64> {
        Point3::new(
            domain.min.x + step.x * i as f64,
            domain.min.y + step.y * j as f64,
            domain.min.z + step.z * k as f64,
        )
    };
    let vid = |i: usize, j: usize, k: usize| i + np * (j + np * k);

    let mut vertices = vec![Point3::origin(); np * np * np];
    let mut boundary = vec![false; np * np * np];
    for k in 0..np {
        for j in 0..np {
            for i in 0..np {
                vertices[vid(i, j, k)] = coord(i, j, k);
                boundary[vid(i, j, k)] =
                    i == 0 || i == n || j == 0 || j == n || k == 0 || k == n;
            }
        }
    }

    let mut elements = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let ids = vec![
                    vid(i, j, k),
                    vid(i + 1, j, k),
                    vid(i + 1, j + 1, k),
                    vid(i, j + 1, k),
                    vid(i, j, k + 1),
                    vid(i + 1, j, k + 1),
                    vid(i + 1, j + 1, k + 1),
                    vid(i, j + 1, k + 1),
                ];
                let poly = Polyhedron::cuboid(coord(i, j, k), coord(i + 1, j + 1, k + 1));
                elements.push(MeshElement {
                    vertex_ids: ids,
                    poly,
                    material: Material::Plus,
                });
            }
        }
    }
    Mesh {
        vertices,
        elements,
        boundary_vertex: boundary,
        interface_elements: Vec::new(),
        kind: MeshKind::Unfitted,
        domain: domain.clone(),
    }
}

/// Least-squares plane through the element's edge/zero-set intersection
/// points (each root found by bisection), oriented from the minus to the plus
/// side of the level set. Falls back to the tangent plane at the projected
/// centroid when fewer than three points exist; absent without a vertex sign
/// change.
pub fn local_interface_plane(cuboid: &Polyhedron, ls: &LevelSet) -> Option<Plane> {
    let h = cuboid.diameter();
    let signs: Vec<i8> = cuboid
        .vertices
        .iter()
        .map(|v| vertex_sign(ls, v, h))
        .collect();
    if !signs.contains(&-1) || !signs.contains(&1) {
        return None;
    }
    let mut points: Vec<Point3<f64>> = cuboid
        .vertices
        .iter()
        .zip(&signs)
        .filter(|(_, &s)| s == 0)
        .map(|(v, _)| *v)
        .collect();
    let mut seen = HashMap::new();
    for loop_ in &cuboid.faces {
        for k in 0..loop_.len() {
            let a = loop_[k];
            let b = loop_[(k + 1) % loop_.len()];
            let key = (a.min(b), a.max(b));
            if seen.insert(key, ()).is_some() {
                continue;
            }
            if signs[a] as i32 * signs[b] as i32 == -1 {
                points.push(edge_root(ls, &cuboid.vertices[a], &cuboid.vertices[b]));
            }
        }
    }
    fit_plane(&points, ls).or_else(|| {
        let c = cuboid.vertex_centroid();
        let g = ls.gradient(&c);
        if g.norm() == 0.0 {
            return None;
        }
        let x0 = c - g * (ls.value(&c) / g.norm_squared());
        Some(Plane::from_point_normal(&x0, &g))
    })
}

/// Sign of the level set at a vertex, snapped to zero when the first-order
/// distance to the zero set is below `1e-12 * h`.
fn vertex_sign(ls: &LevelSet, v: &Point3<f64>, h: f64) -> i8 {
    let f = ls.value(v);
    if f == 0.0 {
        return 0;
    }
    let g = ls.gradient(v).norm();
    if g > 0.0 && f.abs() <= SNAP_REL * h * g {
        return 0;
    }
    if f < 0.0 {
        -1
    } else {
        1
    }
}

/// Root of the level set on a segment with a strict sign change, by bisection
/// to `1e-14` of the parameter. Starts from the negative end, so the result
/// does not depend on the edge's traversal direction.
fn edge_root(ls: &LevelSet, a: &Point3<f64>, b: &Point3<f64>) -> Point3<f64> {
    let (from, to) = if ls.value(a) < 0.0 { (a, b) } else { (b, a) };
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let f = ls.value(&(from + (to - from) * mid));
        if f == 0.0 {
            return from + (to - from) * mid;
        }
        if f < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 {
            break;
        }
    }
    from + (to - from) * (0.5 * (lo + hi))
}

/// Least-squares plane through ≥3 points, oriented along the level-set
/// gradient at their centroid.
fn fit_plane(points: &[Point3<f64>], ls: &LevelSet) -> Option<Plane> {
    if points.len() < 3 {
        return None;
    }
    let mut c = Vector3::zeros();
    for p in points {
        c += p.coords;
    }
    c /= points.len() as f64;
    let mut cov = Matrix3::zeros();
    for p in points {
        let r = p.coords - c;
        cov += r * r.transpose();
    }
    let eig = cov.symmetric_eigen();
    let mut k_min = 0;
    for k in 1..3 {
        if eig.eigenvalues[k] < eig.eigenvalues[k_min] {
            k_min = k;
        }
    }
    let mut n: Vector3<f64> = eig.eigenvectors.column(k_min).into();
    if n.norm() == 0.0 {
        return None;
    }
    let centroid = Point3::from(c);
    if n.dot(&ls.gradient(&centroid)) < 0.0 {
        n = -n;
    }
    Some(Plane::from_point_normal(&centroid, &n))
}

// ---------------------------------------------------------------------------
// shared cut machinery
// ---------------------------------------------------------------------------

const CELL_EDGES: [(usize, usize); 12] = [
    (0, 1),
    (1, 2),
    (2, 3),
    (3, 0),
    (4, 5),
    (5, 6),
    (6, 7),
    (7, 4),
    (0, 4),
    (1, 5),
    (2, 6),
    (3, 7),
];

struct CutContext {
    signs: Vec<i8>,
    /// background edge (sorted global pair) -> root vertex id
    roots: HashMap<(usize, usize), usize>,
}

/// Computes vertex signs and one root vertex per sign-changing background
/// edge; roots are appended to `vertices` in deterministic encounter order.
fn build_cut_context(
    background: &Mesh,
    ls: &LevelSet,
    vertices: &mut Vec<Point3<f64>>,
) -> CutContext {
    let h_cell = background.elements[0].diameter();
    let signs: Vec<i8> = background
        .vertices
        .iter()
        .map(|v| vertex_sign(ls, v, h_cell))
        .collect();
    let mut roots = HashMap::new();
    for elem in &background.elements {
        let has_minus = elem.vertex_ids.iter().any(|&v| signs[v] == -1);
        let has_plus = elem.vertex_ids.iter().any(|&v| signs[v] == 1);
        if !(has_minus && has_plus) {
            continue;
        }
        for &(la, lb) in &CELL_EDGES {
            let (ga, gb) = (elem.vertex_ids[la], elem.vertex_ids[lb]);
            if signs[ga] as i32 * signs[gb] as i32 == -1 {
                let key = (ga.min(gb), ga.max(gb));
                if let std::collections::hash_map::Entry::Vacant(slot) = roots.entry(key) {
                    let p = edge_root(ls, &vertices[ga], &vertices[gb]);
                    vertices.push(p);
                    slot.insert(vertices.len() - 1);
                }
            }
        }
    }
    CutContext { signs, roots }
}

struct FaceSplit {
    minus: Vec<usize>,
    plus: Vec<usize>,
    /// on-plane points in minus-walk order; the face's chord when len == 2
    trace: Vec<usize>,
}

/// Splits one face loop (global ids) along the level-set trace anchored on
/// the shared edge roots.
fn split_face(loop_globals: &[usize], ctx: &CutContext, elem_id: usize) -> Result<FaceSplit> {
    let m = loop_globals.len();
    let mut minus = Vec::new();
    let mut plus = Vec::new();
    let mut trace = Vec::new();
    for k in 0..m {
        let a = loop_globals[k];
        let b = loop_globals[(k + 1) % m];
        let sa = ctx.signs[a];
        let sb = ctx.signs[b];
        if sa <= 0 {
            minus.push(a);
        }
        if sa >= 0 {
            plus.push(a);
        }
        if sa == 0 {
            trace.push(a);
        }
        if sa as i32 * sb as i32 == -1 {
            let key = (a.min(b), a.max(b));
            let root = *ctx
                .roots
                .get(&key)
                .ok_or(Error::NonMatchingFaces(elem_id, elem_id))?;
            minus.push(root);
            plus.push(root);
            trace.push(root);
        }
    }
    if trace.len() > 2 {
        return Err(Error::DegenerateTrace(
            elem_id,
            format!("{} on-plane points on one face", trace.len()),
        ));
    }
    Ok(FaceSplit { minus, plus, trace })
}

fn polygon_area_vec(loop_: &[usize], vertices: &[Point3<f64>]) -> Vector3<f64> {
    let mut s = Vector3::zeros();
    for k in 0..loop_.len() {
        let a = &vertices[loop_[k]];
        let b = &vertices[loop_[(k + 1) % loop_.len()]];
        s += a.coords.cross(&b.coords);
    }
    s * 0.5
}

fn loop_usable(loop_: &[usize], vertices: &[Point3<f64>], h: f64) -> bool {
    loop_.len() >= 3 && polygon_area_vec(loop_, vertices).norm() > 1e-22 * h * h
}

/// Chains per-face chords into the closed cap cycle, oriented along the
/// level-set gradient (outward for the minus piece).
fn chain_cap(
    chords: &[(usize, usize)],
    vertices: &[Point3<f64>],
    ls: &LevelSet,
    elem_id: usize,
) -> Result<Vec<usize>> {
    let mut adj: HashMap<usize, Vec<usize>> = HashMap::new();
    for &(a, b) in chords {
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    for (p, nbrs) in &adj {
        if nbrs.len() != 2 {
            return Err(Error::DegenerateTrace(
                elem_id,
                format!("cap point {p} has {} incident chords", nbrs.len()),
            ));
        }
    }
    let &start = adj.keys().min().unwrap();
    let mut cycle = vec![start];
    let mut prev = start;
    let mut cur = adj[&start][0];
    while cur != start {
        cycle.push(cur);
        let nbrs = &adj[&cur];
        let next = if nbrs[0] == prev { nbrs[1] } else { nbrs[0] };
        prev = cur;
        cur = next;
    }
    if cycle.len() != adj.len() {
        return Err(Error::DegenerateTrace(
            elem_id,
            "interface trace has multiple components".into(),
        ));
    }
    let mut c = Vector3::zeros();
    for &p in &cycle {
        c += vertices[p].coords;
    }
    c /= cycle.len() as f64;
    let newell = polygon_area_vec(&cycle, vertices);
    if newell.dot(&ls.gradient(&Point3::from(c))) < 0.0 {
        cycle.reverse();
    }
    Ok(cycle)
}

/// Cap faces for the minus piece: the chord cycle itself when planar within
/// `1e-10 * h`, otherwise a canonical fan of planar triangles.
fn cap_faces(cycle: &[usize], vertices: &[Point3<f64>], h: f64) -> Vec<Vec<usize>> {
    let pts: Vec<Point3<f64>> = cycle.iter().map(|&i| vertices[i]).collect();
    let mut c = Vector3::zeros();
    for p in &pts {
        c += p.coords;
    }
    c /= pts.len() as f64;
    let newell = polygon_area_vec(cycle, vertices).normalize();
    let planar = pts
        .iter()
        .all(|p| (p.coords - c).dot(&newell).abs() <= 1e-10 * h);
    if planar {
        return vec![cycle.to_vec()];
    }
    let (apex, _) = best_fan_apex(&pts);
    let m = cycle.len();
    (1..m - 1)
        .map(|k| {
            vec![
                cycle[apex],
                cycle[(apex + k) % m],
                cycle[(apex + k + 1) % m],
            ]
        })
        .collect()
}

fn element_from_global_faces(
    faces_globals: Vec<Vec<usize>>,
    vertices: &[Point3<f64>],
    material: Material,
) -> MeshElement {
    let mut remap: HashMap<usize, usize> = HashMap::new();
    let mut vertex_ids = Vec::new();
    let mut faces = Vec::with_capacity(faces_globals.len());
    for loop_ in faces_globals {
        let mut local = Vec::with_capacity(loop_.len());
        for g in loop_ {
            let id = *remap.entry(g).or_insert_with(|| {
                vertex_ids.push(g);
                vertex_ids.len() - 1
            });
            local.push(id);
        }
        faces.push(local);
    }
    let poly = Polyhedron::new(vertex_ids.iter().map(|&g| vertices[g]).collect(), faces);
    MeshElement {
        vertex_ids,
        poly,
        material,
    }
}

fn bulk_material(signs: &[i8], ids: &[usize]) -> Material {
    if ids.iter().any(|&v| signs[v] == -1) {
        Material::Minus
    } else {
        Material::Plus
    }
}

/// Replaces every interface cuboid of a Cartesian background mesh by its two
/// cut pieces. Cuts are anchored on the shared edge roots, so neighboring
/// pieces match face-for-face; piece volumes sum to the cuboid volume and
/// arbitrarily thin slivers are kept.
pub fn build_fitted(background: &Mesh, ls: &LevelSet) -> Result<Mesh> {
    let mut vertices = background.vertices.clone();
    let ctx = build_cut_context(background, ls, &mut vertices);
    let h_cell = background.elements[0].diameter();

    let mut elements = Vec::new();
    let mut interface_elements = Vec::new();
    for (ei, elem) in background.elements.iter().enumerate() {
        let has_minus = elem.vertex_ids.iter().any(|&v| ctx.signs[v] == -1);
        let has_plus = elem.vertex_ids.iter().any(|&v| ctx.signs[v] == 1);
        if !(has_minus && has_plus) {
            elements.push(MeshElement {
                material: bulk_material(&ctx.signs, &elem.vertex_ids),
                ..elem.clone()
            });
            continue;
        }

        let mut minus_faces: Vec<Vec<usize>> = Vec::new();
        let mut plus_faces: Vec<Vec<usize>> = Vec::new();
        let mut chords: Vec<(usize, usize)> = Vec::new();
        for loop_ in &elem.poly.faces {
            let globals: Vec<usize> = loop_.iter().map(|&l| elem.vertex_ids[l]).collect();
            let split = split_face(&globals, &ctx, ei)?;
            if loop_usable(&split.minus, &vertices, h_cell) {
                minus_faces.push(split.minus);
            }
            if loop_usable(&split.plus, &vertices, h_cell) {
                plus_faces.push(split.plus);
            }
            if split.trace.len() == 2 && split.trace[0] != split.trace[1] {
                chords.push((split.trace[0], split.trace[1]));
            }
        }
        let cycle = chain_cap(&chords, &vertices, ls, ei)?;
        let caps = cap_faces(&cycle, &vertices, h_cell);
        for cap in &caps {
            minus_faces.push(cap.clone());
            let mut rev = cap.clone();
            rev.reverse();
            plus_faces.push(rev);
        }

        for (faces, material) in [(minus_faces, Material::Minus), (plus_faces, Material::Plus)] {
            let piece = element_from_global_faces(faces, &vertices, material);
            piece.poly.validate().map_err(|e| {
                Error::DegenerateTrace(ei, format!("cut piece failed validation: {e}"))
            })?;
            interface_elements.push(elements.len());
            elements.push(piece);
        }
    }

    let boundary_vertex = vertices
        .iter()
        .map(|v| background.domain.on_boundary(v, SNAP_REL * h_cell))
        .collect();
    Ok(Mesh {
        vertices,
        elements,
        boundary_vertex,
        interface_elements,
        kind: MeshKind::Fitted,
        domain: background.domain.clone(),
    })
}

/// Keeps every cuboid whole; interface cuboids get their faces pre-split
/// along the level-set trace (the shared root vertices become element
/// vertices and global DoF carriers) and carry the local interface plane.
pub fn build_unfitted(background: &Mesh, ls: &LevelSet) -> Result<Mesh> {
    let mut vertices = background.vertices.clone();
    let ctx = build_cut_context(background, ls, &mut vertices);
    let h_cell = background.elements[0].diameter();

    let mut elements = Vec::new();
    let mut interface_elements = Vec::new();
    for (ei, elem) in background.elements.iter().enumerate() {
        let has_minus = elem.vertex_ids.iter().any(|&v| ctx.signs[v] == -1);
        let has_plus = elem.vertex_ids.iter().any(|&v| ctx.signs[v] == 1);
        if !(has_minus && has_plus) {
            elements.push(MeshElement {
                material: bulk_material(&ctx.signs, &elem.vertex_ids),
                ..elem.clone()
            });
            continue;
        }

        let mut faces: Vec<Vec<usize>> = Vec::new();
        let mut plane_points: Vec<Point3<f64>> = Vec::new();
        for loop_ in &elem.poly.faces {
            let globals: Vec<usize> = loop_.iter().map(|&l| elem.vertex_ids[l]).collect();
            let split = split_face(&globals, &ctx, ei)?;
            let cut = split.trace.len() == 2
                && split.trace[0] != split.trace[1]
                && loop_usable(&split.minus, &vertices, h_cell)
                && loop_usable(&split.plus, &vertices, h_cell);
            if cut {
                faces.push(split.minus);
                faces.push(split.plus);
            } else {
                faces.push(globals);
            }
            for &p in &split.trace {
                if !plane_points
                    .iter()
                    .any(|q| (q - vertices[p]).norm() == 0.0)
                {
                    plane_points.push(vertices[p]);
                }
            }
        }
        let plane = fit_plane(&plane_points, ls)
            .or_else(|| local_interface_plane(&elem.poly, ls))
            .ok_or_else(|| {
                Error::DegenerateTrace(ei, "no interface plane for tagged element".into())
            })?;
        let piece = element_from_global_faces(faces, &vertices, Material::Interface(plane));
        piece
            .poly
            .validate()
            .map_err(|e| Error::DegenerateTrace(ei, format!("pre-split cuboid invalid: {e}")))?;
        interface_elements.push(elements.len());
        elements.push(piece);
    }

    let boundary_vertex = vertices
        .iter()
        .map(|v| background.domain.on_boundary(v, SNAP_REL * h_cell))
        .collect();
    Ok(Mesh {
        vertices,
        elements,
        boundary_vertex,
        interface_elements,
        kind: MeshKind::Unfitted,
        domain: background.domain.clone(),
    })
}

// ---------------------------------------------------------------------------
// δ-strip
// ---------------------------------------------------------------------------

/// Distance report for the discrete interface of one mesh.
#[derive(Debug, Clone)]
pub struct DeltaStripReport {
    /// max sampled first-order distance from the discrete interface to the
    /// level set's zero surface
    pub delta_hat: f64,
    pub h: f64,
    /// least-squares exponent of `log δ̂` vs `log h`; set by sweeps
    pub fitted_exponent: Option<f64>,
}

/// Samples the discrete interface of a fitted or unfitted mesh and reports
/// the largest first-order distance to the true zero set. Sample points with
/// a vanishing gradient are skipped.
pub fn delta_strip_report(mesh: &Mesh, ls: &LevelSet, samples_per_face: usize) -> DeltaStripReport {
    let mut delta: f64 = 0.0;
    let h = mesh
        .elements
        .iter()
        .map(|e| e.diameter())
        .fold(0.0f64, f64::max);

    let mut sample_triangle = |a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>| {
        let levels = (samples_per_face as f64).sqrt().ceil().max(1.0) as usize;
        for i in 0..levels {
            for j in 0..(levels - i) {
                let l1 = (i as f64 + 1.0 / 3.0) / levels as f64;
                let l2 = (j as f64 + 1.0 / 3.0) / levels as f64;
                let l0 = 1.0 - l1 - l2;
                let p = Point3::from(a.coords * l0 + b.coords * l1 + c.coords * l2);
                if let Some(d) = ls.distance_estimate(&p) {
                    delta = delta.max(d);
                }
            }
        }
    };

    match mesh.kind {
        MeshKind::Unfitted => {
            for &ei in &mesh.interface_elements {
                let elem = &mesh.elements[ei];
                let Material::Interface(plane) = &elem.material else {
                    continue;
                };
                if let Some(section) = plane_section(&elem.poly, plane) {
                    for k in 1..section.len() - 1 {
                        sample_triangle(&section[0], &section[k], &section[k + 1]);
                    }
                }
            }
        }
        MeshKind::Fitted => {
            // the discrete interface is the set of faces shared by a minus
            // and a plus element
            let reg = mesh.face_registry();
            for (key, elems) in reg {
                if elems.len() != 2 {
                    continue;
                }
                let (a, b) = (&mesh.elements[elems[0]], &mesh.elements[elems[1]]);
                if a.material == b.material {
                    continue;
                }
                let pts: Vec<Point3<f64>> = key.iter().map(|&g| mesh.vertices[g]).collect();
                for k in 1..pts.len() - 1 {
                    sample_triangle(&pts[0], &pts[k], &pts[k + 1]);
                }
            }
        }
    }

    DeltaStripReport {
        delta_hat: delta,
        h,
        fitted_exponent: None,
    }
}

/// Builds meshes for each level, reports δ̂ per level, and fits the exponent
/// of `δ̂` against `h` by least squares on the log-log pairs. The exponent is
/// stored in every returned report.
pub fn delta_strip_sweep(
    ls: &LevelSet,
    kind: MeshKind,
    n_list: &[usize],
    domain: &BoundingBox,
    samples_per_face: usize,
) -> Result<Vec<DeltaStripReport>> {
    let mut reports = Vec::new();
    for &n in n_list {
        let bg = cartesian_background(n, domain);
        let mesh = match kind {
            MeshKind::Fitted => build_fitted(&bg, ls)?,
            MeshKind::Unfitted => build_unfitted(&bg, ls)?,
        };
        reports.push(delta_strip_report(&mesh, ls, samples_per_face));
    }
    let pairs: Vec<(f64, f64)> = reports
        .iter()
        .filter(|r| r.delta_hat > 0.0)
        .map(|r| (r.h.ln(), r.delta_hat.ln()))
        .collect();
    if pairs.len() >= 2 {
        let n = pairs.len() as f64;
        let sx: f64 = pairs.iter().map(|p| p.0).sum();
        let sy: f64 = pairs.iter().map(|p| p.1).sum();
        let sxx: f64 = pairs.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pairs.iter().map(|p| p.0 * p.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        for r in &mut reports {
            r.fitted_exponent = Some(slope);
        }
    }
    Ok(reports)
}

// ---------------------------------------------------------------------------
// plain-text mesh format
// ---------------------------------------------------------------------------

/// Writes the mesh in the plain-text element-record format:
/// a global vertex table, then one record per element with its material tag,
/// global vertex ids, and face loops as local index lists.
pub fn write_mesh(mesh: &Mesh) -> String {
    let mut out = String::new();
    out.push_str("# polyvem mesh v1\n");
    out.push_str(&format!(
        "kind {}\n",
        match mesh.kind {
            MeshKind::Fitted => "fitted",
            MeshKind::Unfitted => "unfitted",
        }
    ));
    out.push_str(&format!(
        "domain {} {} {} {} {} {}\n",
        mesh.domain.min.x,
        mesh.domain.min.y,
        mesh.domain.min.z,
        mesh.domain.max.x,
        mesh.domain.max.y,
        mesh.domain.max.z
    ));
    out.push_str(&format!("vertices {}\n", mesh.vertices.len()));
    for (v, &b) in mesh.vertices.iter().zip(&mesh.boundary_vertex) {
        out.push_str(&format!(
            "v {} {} {} {}\n",
            v.x,
            v.y,
            v.z,
            if b { 1 } else { 0 }
        ));
    }
    out.push_str(&format!("elements {}\n", mesh.elements.len()));
    for elem in &mesh.elements {
        match &elem.material {
            Material::Minus => out.push_str("element minus\n"),
            Material::Plus => out.push_str("element plus\n"),
            Material::Interface(p) => out.push_str(&format!(
                "element interface {} {} {} {}\n",
                p.normal().x,
                p.normal().y,
                p.normal().z,
                p.offset()
            )),
        }
        out.push_str("ids");
        for &g in &elem.vertex_ids {
            out.push_str(&format!(" {g}"));
        }
        out.push('\n');
        for loop_ in &elem.poly.faces {
            out.push_str("face");
            for &l in loop_ {
                out.push_str(&format!(" {l}"));
            }
            out.push('\n');
        }
        out.push_str("end\n");
    }
    out
}

/// Parses the plain-text format written by [`write_mesh`].
pub fn read_mesh(text: &str) -> Result<Mesh> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let mut next = |what: &str| -> Result<&str> {
        lines
            .next()
            .ok_or_else(|| Error::MeshParse(format!("unexpected end of file, wanted {what}")))
    };
    let kind_line = next("kind")?;
    let kind = match kind_line.strip_prefix("kind ") {
        Some("fitted") => MeshKind::Fitted,
        Some("unfitted") => MeshKind::Unfitted,
        _ => return Err(Error::MeshParse(format!("bad kind line: {kind_line}"))),
    };
    let dom_line = next("domain")?;
    let nums: Vec<f64> = dom_line
        .strip_prefix("domain ")
        .ok_or_else(|| Error::MeshParse("missing domain".into()))?
        .split_whitespace()
        .map(parse_f64)
        .collect::<Result<_>>()?;
    if nums.len() != 6 {
        return Err(Error::MeshParse("domain needs 6 numbers".into()));
    }
    let domain = BoundingBox {
        min: Point3::new(nums[0], nums[1], nums[2]),
        max: Point3::new(nums[3], nums[4], nums[5]),
    };
    let nv: usize = parse_count(next("vertices")?, "vertices")?;
    let mut vertices = Vec::with_capacity(nv);
    let mut boundary = Vec::with_capacity(nv);
    for _ in 0..nv {
        let line = next("vertex")?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 5 || toks[0] != "v" {
            return Err(Error::MeshParse(format!("bad vertex line: {line}")));
        }
        vertices.push(Point3::new(
            parse_f64(toks[1])?,
            parse_f64(toks[2])?,
            parse_f64(toks[3])?,
        ));
        boundary.push(toks[4] == "1");
    }
    let ne: usize = parse_count(next("elements")?, "elements")?;
    let mut elements = Vec::with_capacity(ne);
    let mut interface_elements = Vec::new();
    for ei in 0..ne {
        let head = next("element")?;
        let toks: Vec<&str> = head.split_whitespace().collect();
        let material = match toks.as_slice() {
            ["element", "minus"] => Material::Minus,
            ["element", "plus"] => Material::Plus,
            ["element", "interface", nx, ny, nz, d] => {
                interface_elements.push(ei);
                Material::Interface(Plane::from_unit(
                    Vector3::new(parse_f64(nx)?, parse_f64(ny)?, parse_f64(nz)?),
                    parse_f64(d)?,
                ))
            }
            _ => return Err(Error::MeshParse(format!("bad element line: {head}"))),
        };
        let ids_line = next("ids")?;
        let ids: Vec<usize> = ids_line
            .strip_prefix("ids")
            .ok_or_else(|| Error::MeshParse(format!("bad ids line: {ids_line}")))?
            .split_whitespace()
            .map(|t| t.parse().map_err(|e| Error::MeshParse(format!("{e}"))))
            .collect::<Result<_>>()?;
        let mut faces = Vec::new();
        loop {
            let line = next("face or end")?;
            if line == "end" {
                break;
            }
            let loop_: Vec<usize> = line
                .strip_prefix("face")
                .ok_or_else(|| Error::MeshParse(format!("bad face line: {line}")))?
                .split_whitespace()
                .map(|t| t.parse().map_err(|e| Error::MeshParse(format!("{e}"))))
                .collect::<Result<_>>()?;
            faces.push(loop_);
        }
        let poly = Polyhedron::new(ids.iter().map(|&g| vertices[g]).collect(), faces);
        elements.push(MeshElement {
            vertex_ids: ids,
            poly,
            material,
        });
    }
    Ok(Mesh {
        vertices,
        elements,
        boundary_vertex: boundary,
        interface_elements,
        kind,
        domain,
    })
}

fn parse_count(line: &str, tag: &str) -> Result<usize> {
    line.strip_prefix(tag)
        .and_then(|rest| rest.trim().parse().ok())
        .ok_or_else(|| Error::MeshParse(format!("bad {tag} line: {line}")))
}

fn parse_f64(tok: &str) -> Result<f64> {
    tok.parse()
        .map_err(|e| Error::MeshParse(format!("bad number {tok}: {e}")))
}
