//! Computational geometry for polyhedral elements: planes, convex cutting,
//! centroid-fan tetrahedralization, exact low-order quadrature, and inscribed
//! balls.
//!
//! All routines are pure value-to-value transformations. Tolerances are
//! relative to the element diameter `h`: plane/vertex incidence snaps at
//! `1e-12 * h` so grazing cuts never produce sliver faces below tolerance,
//! while faces are required to be planar within `1e-10 * h`.

use nalgebra::{Matrix4, Point3, Vector3, Vector4};
use std::collections::HashMap;

use crate::error::{Error, Result};

/// Relative snap tolerance for plane/vertex incidence.
pub const SNAP_REL: f64 = 1e-12;

/// Relative tolerance for face planarity.
pub const PLANAR_REL: f64 = 1e-10;

/// Oriented plane `{ x : normal · x = offset }` with unit normal.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    normal: Vector3<f64>,
    offset: f64,
}

impl Plane {
    /// Builds a plane from a (not necessarily unit) normal and a point on it.
    pub fn from_point_normal(point: &Point3<f64>, normal: &Vector3<f64>) -> Self {
        let n = normal.normalize();
        Plane {
            normal: n,
            offset: n.dot(&point.coords),
        }
    }

    pub fn new(normal: Vector3<f64>, offset: f64) -> Self {
        let len = normal.norm();
        Plane {
            normal: normal / len,
            offset: offset / len,
        }
    }

    /// Adopts an already-unit normal without renormalizing, so serialized
    /// planes round-trip bit-exactly.
    pub fn from_unit(normal: Vector3<f64>, offset: f64) -> Self {
        debug_assert!((normal.norm() - 1.0).abs() <= 1e-9);
        Plane { normal, offset }
    }

    pub fn normal(&self) -> &Vector3<f64> {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Signed distance, positive on the side the normal points into.
    pub fn signed_distance(&self, p: &Point3<f64>) -> f64 {
        self.normal.dot(&p.coords) - self.offset
    }

    /// Orthogonal projection onto the plane.
    pub fn project(&self, p: &Point3<f64>) -> Point3<f64> {
        p - self.normal * self.signed_distance(p)
    }

    /// Flips the orientation.
    pub fn flipped(&self) -> Plane {
        Plane {
            normal: -self.normal,
            offset: -self.offset,
        }
    }

    /// Deterministic orthonormal tangent pair: `t1` is the normal crossed with
    /// the coordinate axis least aligned with it, `t2 = n × t1`.
    pub fn tangent_basis(&self) -> (Vector3<f64>, Vector3<f64>) {
        let n = &self.normal;
        let abs = [n.x.abs(), n.y.abs(), n.z.abs()];
        let mut axis = 0;
        for k in 1..3 {
            if abs[k] < abs[axis] {
                axis = k;
            }
        }
        let e = match axis {
            0 => Vector3::x(),
            1 => Vector3::y(),
            _ => Vector3::z(),
        };
        let t1 = n.cross(&e).normalize();
        let t2 = n.cross(&t1);
        (t1, t2)
    }
}

/// Positively oriented tetrahedron.
#[derive(Debug, Clone, PartialEq)]
pub struct Tetrahedron {
    corners: [Point3<f64>; 4],
}

impl Tetrahedron {
    /// Fixes the orientation by swapping two corners when the signed volume
    /// is negative.
    pub fn new(a: Point3<f64>, b: Point3<f64>, c: Point3<f64>, d: Point3<f64>) -> Self {
        let signed = signed_tet_volume(&a, &b, &c, &d);
        if signed < 0.0 {
            Tetrahedron {
                corners: [a, c, b, d],
            }
        } else {
            Tetrahedron {
                corners: [a, b, c, d],
            }
        }
    }

    pub fn corners(&self) -> &[Point3<f64>; 4] {
        &self.corners
    }

    pub fn volume(&self) -> f64 {
        signed_tet_volume(
            &self.corners[0],
            &self.corners[1],
            &self.corners[2],
            &self.corners[3],
        )
    }

    pub fn centroid(&self) -> Point3<f64> {
        let c = (self.corners[0].coords
            + self.corners[1].coords
            + self.corners[2].coords
            + self.corners[3].coords)
            / 4.0;
        Point3::from(c)
    }

    /// Four-point symmetric rule, exact for quadratics. Returns `(point, weight)`
    /// pairs whose weights sum to the volume.
    pub fn quadrature_deg2(&self) -> [(Point3<f64>, f64); 4] {
        const A: f64 = 0.585_410_196_624_968_5;
        const B: f64 = 0.138_196_601_125_010_5;
        let w = self.volume() / 4.0;
        let mut out = [(Point3::origin(), 0.0); 4];
        for (i, item) in out.iter_mut().enumerate() {
            let mut bary = [B; 4];
            bary[i] = A;
            let mut p = Vector3::zeros();
            for (corner, lam) in self.corners.iter().zip(bary) {
                p += corner.coords * lam;
            }
            *item = (Point3::from(p), w);
        }
        out
    }
}

pub fn signed_tet_volume(
    a: &Point3<f64>,
    b: &Point3<f64>,
    c: &Point3<f64>,
    d: &Point3<f64>,
) -> f64 {
    (b - a).cross(&(c - a)).dot(&(d - a)) / 6.0
}

/// Closed polyhedron described by a local vertex table and oriented face
/// loops (outward normals by the right-hand rule).
#[derive(Debug, Clone, PartialEq)]
pub struct Polyhedron {
    pub vertices: Vec<Point3<f64>>,
    pub faces: Vec<Vec<usize>>,
}

impl Polyhedron {
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<Vec<usize>>) -> Self {
        Polyhedron { vertices, faces }
    }

    /// Axis-aligned box `[min, max]` with the conventional 6-quad faces.
    pub fn cuboid(min: Point3<f64>, max: Point3<f64>) -> Self {
        let v = vec![
            Point3::new(min.x, min.y, min.z),
            Point3::new(max.x, min.y, min.z),
            Point3::new(max.x, max.y, min.z),
            Point3::new(min.x, max.y, min.z),
            Point3::new(min.x, min.y, max.z),
            Point3::new(max.x, min.y, max.z),
            Point3::new(max.x, max.y, max.z),
            Point3::new(min.x, max.y, max.z),
        ];
        let faces = vec![
            vec![0, 3, 2, 1], // bottom, normal -z
            vec![4, 5, 6, 7], // top, normal +z
            vec![0, 1, 5, 4], // front, normal -y
            vec![2, 3, 7, 6], // back, normal +y
            vec![1, 2, 6, 5], // right, normal +x
            vec![0, 4, 7, 3], // left, normal -x
        ];
        Polyhedron::new(v, faces)
    }

    /// Maximum pairwise vertex distance.
    pub fn diameter(&self) -> f64 {
        let mut h: f64 = 0.0;
        for i in 0..self.vertices.len() {
            for j in i + 1..self.vertices.len() {
                h = h.max((self.vertices[i] - self.vertices[j]).norm());
            }
        }
        h
    }

    /// Arithmetic mean of the vertices; interior for convex polyhedra.
    pub fn vertex_centroid(&self) -> Point3<f64> {
        let mut c = Vector3::zeros();
        for v in &self.vertices {
            c += v.coords;
        }
        Point3::from(c / self.vertices.len() as f64)
    }

    /// Volume via the divergence theorem: `3V = Σ_F ∫_F x·n dS`, evaluated by
    /// fanning every face from its first loop vertex.
    pub fn volume(&self) -> f64 {
        let mut six_v = 0.0;
        for loop_ in &self.faces {
            let p0 = &self.vertices[loop_[0]];
            for k in 1..loop_.len() - 1 {
                let p1 = &self.vertices[loop_[k]];
                let p2 = &self.vertices[loop_[k + 1]];
                six_v += p0.coords.dot(&p1.coords.cross(&p2.coords));
            }
        }
        six_v / 6.0
    }

    /// Area vector (Newell) of one face; half the sum of cross products.
    pub fn face_area_vector(&self, face: usize) -> Vector3<f64> {
        let loop_ = &self.faces[face];
        let mut s = Vector3::zeros();
        for k in 0..loop_.len() {
            let a = &self.vertices[loop_[k]];
            let b = &self.vertices[loop_[(k + 1) % loop_.len()]];
            s += a.coords.cross(&b.coords);
        }
        s * 0.5
    }

    pub fn face_centroid(&self, face: usize) -> Point3<f64> {
        let loop_ = &self.faces[face];
        let mut c = Vector3::zeros();
        for &i in loop_ {
            c += self.vertices[i].coords;
        }
        Point3::from(c / loop_.len() as f64)
    }

    /// Outward unit normal and offset of a face plane.
    pub fn face_plane(&self, face: usize) -> Plane {
        let n = self.face_area_vector(face);
        Plane::from_point_normal(&self.face_centroid(face), &n)
    }

    /// Checks closure (every edge shared by exactly two faces, opposite
    /// orientation), face planarity within `1e-10 * h`, and positive volume.
    pub fn validate(&self) -> Result<()> {
        let h = self.diameter();
        let mut edges: HashMap<(usize, usize), i32> = HashMap::new();
        for (fi, loop_) in self.faces.iter().enumerate() {
            if loop_.len() < 3 {
                return Err(Error::DegenerateFace(format!(
                    "face {fi} has {} vertices",
                    loop_.len()
                )));
            }
            for k in 0..loop_.len() {
                let a = loop_[k];
                let b = loop_[(k + 1) % loop_.len()];
                if a == b {
                    return Err(Error::DegenerateFace(format!(
                        "face {fi} repeats vertex {a}"
                    )));
                }
                let key = (a.min(b), a.max(b));
                *edges.entry(key).or_insert(0) += if a < b { 1 } else { -1 };
            }
            let plane = self.face_plane(fi);
            for &i in loop_ {
                if plane.signed_distance(&self.vertices[i]).abs() > PLANAR_REL * h {
                    return Err(Error::DegenerateFace(format!(
                        "face {fi} not planar at vertex {i}"
                    )));
                }
            }
        }
        for (&(a, b), &count) in &edges {
            if count != 0 {
                return Err(Error::DegenerateFace(format!(
                    "edge ({a},{b}) not matched by an opposite edge"
                )));
            }
        }
        // each undirected edge must appear exactly twice in total
        let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
        for loop_ in &self.faces {
            for k in 0..loop_.len() {
                let a = loop_[k];
                let b = loop_[(k + 1) % loop_.len()];
                *seen.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        if let Some((&(a, b), _)) = seen.iter().find(|(_, &c)| c != 2) {
            return Err(Error::DegenerateFace(format!(
                "edge ({a},{b}) not shared by exactly two faces"
            )));
        }
        if self.volume() <= 0.0 {
            return Err(Error::DegenerateFace("non-positive volume".into()));
        }
        Ok(())
    }

    /// All vertices on or behind every face plane, within `tol_rel * h`.
    pub fn is_convex(&self, tol_rel: f64) -> bool {
        let tol = tol_rel * self.diameter();
        for f in 0..self.faces.len() {
            let plane = self.face_plane(f);
            for v in &self.vertices {
                if plane.signed_distance(v) > tol {
                    return false;
                }
            }
        }
        true
    }
}

/// Maximum pairwise vertex distance of a polyhedron (element diameter).
pub fn diameter(poly: &Polyhedron) -> f64 {
    poly.diameter()
}

// ---------------------------------------------------------------------------
// convex splitting
// ---------------------------------------------------------------------------

/// Splits a convex polyhedron by a plane. Returns the minus-side and
/// plus-side pieces; either may be absent when the plane misses the body.
/// Vertices within `1e-12 * h` of the plane are snapped onto it, so grazing
/// planes yield combinatorially clean pieces. The cut cross-section becomes a
/// single new face on each piece, and the piece volumes sum to the input
/// volume.
pub fn split_convex(poly: &Polyhedron, plane: &Plane) -> (Option<Polyhedron>, Option<Polyhedron>) {
    let h = poly.diameter();
    let snap = SNAP_REL * h;
    let d: Vec<f64> = poly
        .vertices
        .iter()
        .map(|v| {
            let s = plane.signed_distance(v);
            if s.abs() <= snap {
                0.0
            } else {
                s
            }
        })
        .collect();

    let any_minus = d.iter().any(|&x| x < 0.0);
    let any_plus = d.iter().any(|&x| x > 0.0);
    if !any_minus {
        return (None, Some(poly.clone()));
    }
    if !any_plus {
        return (Some(poly.clone()), None);
    }

    let mut arena: Vec<Point3<f64>> = poly.vertices.clone();
    let mut crossings: HashMap<(usize, usize), usize> = HashMap::new();
    let mut crossing = |a: usize, b: usize, arena: &mut Vec<Point3<f64>>| -> usize {
        let key = (a.min(b), a.max(b));
        *crossings.entry(key).or_insert_with(|| {
            let (lo, hi) = key;
            let t = d[lo] / (d[lo] - d[hi]);
            let p = poly.vertices[lo] + (poly.vertices[hi] - poly.vertices[lo]) * t;
            arena.push(p);
            arena.len() - 1
        })
    };

    let mut minus_faces: Vec<Vec<usize>> = Vec::new();
    let mut plus_faces: Vec<Vec<usize>> = Vec::new();
    let mut cap_points: Vec<usize> = Vec::new();

    for loop_ in &poly.faces {
        let mut minus_loop: Vec<usize> = Vec::new();
        let mut plus_loop: Vec<usize> = Vec::new();
        let m = loop_.len();
        for k in 0..m {
            let a = loop_[k];
            let b = loop_[(k + 1) % m];
            if d[a] <= 0.0 {
                minus_loop.push(a);
            }
            if d[a] >= 0.0 {
                plus_loop.push(a);
            }
            if d[a] * d[b] < 0.0 {
                let x = crossing(a, b, &mut arena);
                minus_loop.push(x);
                plus_loop.push(x);
            }
        }
        for x in minus_loop.iter().filter(|&&i| on_plane(i, &d)) {
            if !cap_points.contains(x) {
                cap_points.push(*x);
            }
        }
        if polygon_ok(&minus_loop, &arena, h) {
            minus_faces.push(minus_loop);
        }
        if polygon_ok(&plus_loop, &arena, h) {
            plus_faces.push(plus_loop);
        }
    }

    // Cap: convex section, so angular order around its centroid is exact.
    if cap_points.len() >= 3 {
        let mut c = Vector3::zeros();
        for &i in &cap_points {
            c += arena[i].coords;
        }
        c /= cap_points.len() as f64;
        let (t1, t2) = plane.tangent_basis();
        let mut keyed: Vec<(f64, usize)> = cap_points
            .iter()
            .map(|&i| {
                let r = arena[i].coords - c;
                (r.dot(&t2).atan2(r.dot(&t1)), i)
            })
            .collect();
        keyed.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut cap: Vec<usize> = keyed.into_iter().map(|(_, i)| i).collect();
        // orient the cap outward for the minus piece: along +normal
        let mut area = Vector3::zeros();
        for k in 0..cap.len() {
            let a = &arena[cap[k]];
            let b = &arena[cap[(k + 1) % cap.len()]];
            area += a.coords.cross(&b.coords);
        }
        if area.dot(plane.normal()) < 0.0 {
            cap.reverse();
        }
        if polygon_ok(&cap, &arena, h) {
            let mut cap_rev = cap.clone();
            cap_rev.reverse();
            minus_faces.push(cap);
            plus_faces.push(cap_rev);
        }
    }

    let minus = extract_piece(&arena, minus_faces);
    let plus = extract_piece(&arena, plus_faces);
    (minus, plus)
}

fn on_plane(i: usize, d: &[f64]) -> bool {
    i >= d.len() || d[i] == 0.0
}

/// At least three distinct vertices and a nonzero area vector.
fn polygon_ok(loop_: &[usize], arena: &[Point3<f64>], h: f64) -> bool {
    if loop_.len() < 3 {
        return false;
    }
    let mut area = Vector3::zeros();
    for k in 0..loop_.len() {
        let a = &arena[loop_[k]];
        let b = &arena[loop_[(k + 1) % loop_.len()]];
        area += a.coords.cross(&b.coords);
    }
    area.norm() * 0.5 > 1e-24 * h * h
}

fn extract_piece(arena: &[Point3<f64>], faces: Vec<Vec<usize>>) -> Option<Polyhedron> {
    if faces.len() < 4 {
        return None;
    }
    let mut remap: HashMap<usize, usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut new_faces = Vec::with_capacity(faces.len());
    for loop_ in faces {
        let mut new_loop = Vec::with_capacity(loop_.len());
        for i in loop_ {
            let id = *remap.entry(i).or_insert_with(|| {
                vertices.push(arena[i]);
                vertices.len() - 1
            });
            new_loop.push(id);
        }
        new_faces.push(new_loop);
    }
    Some(Polyhedron::new(vertices, new_faces))
}

/// Cross-section polygon of a convex polyhedron with a plane, ordered
/// counterclockwise around the plane normal. `None` when the plane misses
/// the interior.
pub fn plane_section(poly: &Polyhedron, plane: &Plane) -> Option<Vec<Point3<f64>>> {
    let h = poly.diameter();
    let snap = SNAP_REL * h;
    let d: Vec<f64> = poly
        .vertices
        .iter()
        .map(|v| {
            let s = plane.signed_distance(v);
            if s.abs() <= snap {
                0.0
            } else {
                s
            }
        })
        .collect();
    if !d.iter().any(|&x| x < 0.0) || !d.iter().any(|&x| x > 0.0) {
        return None;
    }
    let mut pts: Vec<Point3<f64>> = Vec::new();
    let mut push = |p: Point3<f64>| {
        if !pts.iter().any(|q| (q - p).norm() <= snap) {
            pts.push(p);
        }
    };
    let mut seen_edges = HashMap::new();
    for loop_ in &poly.faces {
        for k in 0..loop_.len() {
            let a = loop_[k];
            let b = loop_[(k + 1) % loop_.len()];
            let key = (a.min(b), a.max(b));
            if seen_edges.insert(key, ()).is_some() {
                continue;
            }
            if d[a] == 0.0 {
                push(poly.vertices[a]);
            }
            if d[a] * d[b] < 0.0 {
                let (lo, hi) = key;
                let t = d[lo] / (d[lo] - d[hi]);
                push(poly.vertices[lo] + (poly.vertices[hi] - poly.vertices[lo]) * t);
            }
        }
    }
    if pts.len() < 3 {
        return None;
    }
    let mut c = Vector3::zeros();
    for p in &pts {
        c += p.coords;
    }
    c /= pts.len() as f64;
    let (t1, t2) = plane.tangent_basis();
    pts.sort_by(|p, q| {
        let rp = p.coords - c;
        let rq = q.coords - c;
        let ap = rp.dot(&t2).atan2(rp.dot(&t1));
        let aq = rq.dot(&t2).atan2(rq.dot(&t1));
        ap.partial_cmp(&aq).unwrap()
    });
    Some(pts)
}

/// Splits an axis-aligned cuboid by a plane into its minus/plus pieces.
/// Degenerate cuts snap the plane through the grazed vertices. The piece
/// volumes sum to the box volume within `1e-12` relative.
pub fn cut_cuboid_by_plane(
    cuboid: &Polyhedron,
    plane: &Plane,
) -> (Option<Polyhedron>, Option<Polyhedron>) {
    split_convex(cuboid, plane)
}

// ---------------------------------------------------------------------------
// tetrahedral decomposition
// ---------------------------------------------------------------------------

/// Centroid-fan tetrahedra over the triangles of a boundary triangulation.
/// Requires the polyhedron to be star-convex with respect to its vertex
/// centroid; a negative fan volume reports the offending triangle.
pub fn tetrahedralize(
    poly: &Polyhedron,
    triangles: &[[usize; 3]],
) -> Result<Vec<Tetrahedron>> {
    let c = poly.vertex_centroid();
    let h = poly.diameter();
    let tol = -1e-12 * h * h * h;
    let mut tets = Vec::with_capacity(triangles.len());
    for t in triangles {
        let (a, b, d) = (
            poly.vertices[t[0]],
            poly.vertices[t[1]],
            poly.vertices[t[2]],
        );
        let signed = signed_tet_volume(&c, &a, &b, &d);
        if signed < tol {
            return Err(Error::NotStarConvex(format!(
                "negative fan volume {signed:.3e} on triangle ({},{},{})",
                t[0], t[1], t[2]
            )));
        }
        tets.push(Tetrahedron {
            corners: [c, a, b, d],
        });
    }
    Ok(tets)
}

/// Coordinate order that reflections preserve: absolute values first, then
/// signs. Keeps decompositions equivariant under mirroring.
pub(crate) fn lex_less_abs(a: &Point3<f64>, b: &Point3<f64>) -> bool {
    (a.x.abs(), a.y.abs(), a.z.abs(), a.x, a.y, a.z)
        < (b.x.abs(), b.y.abs(), b.z.abs(), b.x, b.y, b.z)
}

/// Fans a convex piece from a canonically chosen vertex (and each face from
/// its canonical loop vertex), so the tet set depends only on the geometry,
/// not on construction order. Used to clip tetrahedra; the tet counts match
/// the classical case table (corner cut: 1 + 3, edge-edge cut: 3 + 3).
fn fan_from_canonical_vertex(poly: &Polyhedron) -> Vec<Tetrahedron> {
    let mut apex_id = 0;
    for v in 1..poly.vertices.len() {
        if lex_less_abs(&poly.vertices[v], &poly.vertices[apex_id]) {
            apex_id = v;
        }
    }
    let apex = poly.vertices[apex_id];
    let h = poly.diameter();
    let drop_tol = 1e-14 * h * h * h;
    let mut tets = Vec::new();
    for loop_ in &poly.faces {
        if loop_.contains(&apex_id) {
            continue;
        }
        let mut start = 0;
        for k in 1..loop_.len() {
            if lex_less_abs(&poly.vertices[loop_[k]], &poly.vertices[loop_[start]]) {
                start = k;
            }
        }
        let p0 = poly.vertices[loop_[start]];
        let m = loop_.len();
        for k in 1..m - 1 {
            let t = Tetrahedron::new(
                apex,
                p0,
                poly.vertices[loop_[(start + k) % m]],
                poly.vertices[loop_[(start + k + 1) % m]],
            );
            if t.volume() > drop_tol {
                tets.push(t);
            }
        }
    }
    tets
}

/// Clips a tetrahedron by a plane into one-sided sub-tetrahedra. The union
/// volume equals the input volume within `1e-12` relative; each sub-tet lies
/// entirely on one side (vertices within the snap tolerance count as on the
/// plane). A non-cutting plane returns the tet on its side.
pub fn clip_tet_by_plane(
    tet: &Tetrahedron,
    plane: &Plane,
) -> (Vec<Tetrahedron>, Vec<Tetrahedron>) {
    let [a, b, c, d] = *tet.corners();
    let poly = Polyhedron::new(
        vec![a, b, c, d],
        vec![vec![0, 2, 1], vec![0, 1, 3], vec![0, 3, 2], vec![1, 2, 3]],
    );
    let (minus, plus) = split_convex(&poly, plane);
    (
        minus.map(|p| fan_from_canonical_vertex(&p)).unwrap_or_default(),
        plus.map(|p| fan_from_canonical_vertex(&p)).unwrap_or_default(),
    )
}

// ---------------------------------------------------------------------------
// inscribed ball
// ---------------------------------------------------------------------------

/// Radius of the largest inscribed ball of a convex polyhedron, the solution
/// of `max r` subject to `n_f · x + r ≤ d_f` over all face planes. Solved
/// exactly by enumerating active constraint sets (elements here carry at most
/// a few dozen faces).
pub fn inscribed_ball_radius(poly: &Polyhedron) -> Result<f64> {
    if !poly.is_convex(1e-9) {
        return Err(Error::NonConvexElement);
    }
    let h = poly.diameter();
    let planes: Vec<Plane> = (0..poly.faces.len()).map(|f| poly.face_plane(f)).collect();
    let m = planes.len();
    let feas_tol = 1e-9 * h;
    let mut best: Option<f64> = None;

    let mut idx = [0usize; 4];
    let mut combos = Vec::new();
    combination_indices(m, 4, &mut idx, 0, 0, &mut combos);
    for combo in combos {
        let mut a = Matrix4::zeros();
        let mut rhs = Vector4::zeros();
        for (row, &f) in combo.iter().enumerate() {
            let n = planes[f].normal();
            a[(row, 0)] = n.x;
            a[(row, 1)] = n.y;
            a[(row, 2)] = n.z;
            a[(row, 3)] = 1.0;
            rhs[row] = planes[f].offset();
        }
        let lu = a.full_piv_lu();
        let Some(sol) = lu.solve(&rhs) else { continue };
        // reject ill-conditioned subsets
        if (a * sol - rhs).norm() > 1e-9 * (rhs.norm() + 1.0) {
            continue;
        }
        let x = Point3::new(sol[0], sol[1], sol[2]);
        let r = sol[3];
        if r < -feas_tol {
            continue;
        }
        if planes
            .iter()
            .all(|p| p.signed_distance(&x) + r <= feas_tol)
        {
            best = Some(best.map_or(r, |b: f64| b.max(r)));
        }
    }
    best.ok_or_else(|| Error::DegenerateElement("inscribed-ball enumeration found no feasible active set".into()))
}

fn combination_indices(
    m: usize,
    k: usize,
    idx: &mut [usize; 4],
    depth: usize,
    start: usize,
    out: &mut Vec<[usize; 4]>,
) {
    if depth == k {
        out.push(*idx);
        return;
    }
    for i in start..m {
        idx[depth] = i;
        combination_indices(m, k, idx, depth + 1, i + 1, out);
    }
}
