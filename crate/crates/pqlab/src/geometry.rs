//! Uniform-grid domains with exact distance-to-boundary fields.
//!
//! A `Domain` samples a planar shape on a square lattice of spacing `h`.
//! Interior nodes sit strictly deeper than `h/2` inside the shape; boundary
//! nodes are the remaining lattice nodes 4-adjacent to an interior node and
//! are snapped onto the zero level of the distance field. For grid-aligned
//! rectangles and L-shapes the snap is exact; curved or tilted boundaries
//! incur the usual O(h) geometric error.
//!
//! The distance field `rho` is evaluated analytically (disk, rectangle) or
//! by exact point-to-segment distance (polygons), never by marching, so the
//! discrete Lipschitz bound |rho(i)-rho(j)| <= |x_i-x_j| holds to rounding
//! away from the snapped ring.
//!
//! Cells are split by their SW-NE diagonal:
//!
//! ```text
//!   nw ---- ne          upper: (sw, ne, nw)
//!    |    / |           lower: (sw, se, ne)
//!    |   /  |
//!    |  /   |           gradients are constant per triangle
//!   sw ---- se
//! ```
//!
//! Node indices are row-major: `idx = iy * nx + ix`.

use serde::Serialize;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Point {
        Point { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Supported domain shapes. `LShape` removes the closed quadrant
/// `[notch.x, max.x] x [notch.y, max.y]` from the outer rectangle.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Shape {
    Disk { center: Point, radius: f64 },
    Rectangle { min: Point, max: Point },
    LShape { min: Point, max: Point, notch: Point },
    Polygon { vertices: Vec<Point> },
}

#[derive(Debug, thiserror::Error)]
pub enum GeometryError {
    #[error("grid spacing must be positive and finite, got {0}")]
    BadSpacing(f64),
    #[error("degenerate shape: {0}")]
    DegenerateShape(String),
    #[error("grid too coarse: {0} interior nodes, need at least 9")]
    GridTooCoarse(usize),
}

impl Shape {
    pub fn validate(&self) -> Result<(), GeometryError> {
        let fail = |msg: String| Err(GeometryError::DegenerateShape(msg));
        match self {
            Shape::Disk { radius, .. } => {
                if !radius.is_finite() || *radius <= 0.0 {
                    return fail(format!("disk radius {radius}"));
                }
            }
            Shape::Rectangle { min, max } => {
                if !(min.x < max.x && min.y < max.y) {
                    return fail("rectangle needs min < max componentwise".into());
                }
            }
            Shape::LShape { min, max, notch } => {
                if !(min.x < max.x && min.y < max.y) {
                    return fail("lshape needs min < max componentwise".into());
                }
                if !(min.x < notch.x && notch.x < max.x && min.y < notch.y && notch.y < max.y) {
                    return fail("lshape notch corner must lie strictly inside the outer rectangle".into());
                }
            }
            Shape::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return fail("polygon needs at least 3 vertices".into());
                }
                for w in vertices.windows(2) {
                    if w[0] == w[1] {
                        return fail("polygon has repeated consecutive vertices".into());
                    }
                }
                if vertices.first() == vertices.last() {
                    return fail("polygon must not repeat the first vertex".into());
                }
                if self.area() <= 0.0 {
                    return fail("polygon has zero area".into());
                }
                if polygon_self_intersects(vertices) {
                    return fail("polygon is self-intersecting".into());
                }
            }
        }
        if !self.area().is_finite() {
            return fail("shape has non-finite area".into());
        }
        Ok(())
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        match self {
            Shape::Disk { center, radius } => (
                Point::new(center.x - radius, center.y - radius),
                Point::new(center.x + radius, center.y + radius),
            ),
            Shape::Rectangle { min, max } | Shape::LShape { min, max, .. } => (*min, *max),
            Shape::Polygon { vertices } => {
                let mut lo = vertices[0];
                let mut hi = vertices[0];
                for v in vertices {
                    lo.x = lo.x.min(v.x);
                    lo.y = lo.y.min(v.y);
                    hi.x = hi.x.max(v.x);
                    hi.y = hi.y.max(v.y);
                }
                (lo, hi)
            }
        }
    }

    /// Analytic area of the shape.
    pub fn area(&self) -> f64 {
        match self {
            Shape::Disk { radius, .. } => std::f64::consts::PI * radius * radius,
            Shape::Rectangle { min, max } => (max.x - min.x) * (max.y - min.y),
            Shape::LShape { min, max, notch } => {
                (max.x - min.x) * (max.y - min.y) - (max.x - notch.x) * (max.y - notch.y)
            }
            Shape::Polygon { vertices } => shoelace_area(vertices).abs(),
        }
    }

    /// Signed distance to the boundary, positive inside the shape.
    pub fn signed_distance(&self, p: Point) -> f64 {
        match self {
            Shape::Disk { center, radius } => radius - p.dist(*center),
            Shape::Rectangle { min, max } => {
                let dx_in = (p.x - min.x).min(max.x - p.x);
                let dy_in = (p.y - min.y).min(max.y - p.y);
                if dx_in >= 0.0 && dy_in >= 0.0 {
                    dx_in.min(dy_in)
                } else {
                    // Outside: negative euclidean distance to the rectangle.
                    let ox = (-dx_in).max(0.0);
                    let oy = (-dy_in).max(0.0);
                    if dx_in < 0.0 && dy_in < 0.0 {
                        -ox.hypot(oy)
                    } else {
                        dx_in.min(dy_in)
                    }
                }
            }
            Shape::LShape { .. } => polygon_signed_distance(&self.outline(), p),
            Shape::Polygon { vertices } => polygon_signed_distance(vertices, p),
        }
    }

    /// Boundary polyline for polygonal shapes (counterclockwise).
    fn outline(&self) -> Vec<Point> {
        match self {
            Shape::LShape { min, max, notch } => vec![
                Point::new(min.x, min.y),
                Point::new(max.x, min.y),
                Point::new(max.x, notch.y),
                Point::new(notch.x, notch.y),
                Point::new(notch.x, max.y),
                Point::new(min.x, max.y),
            ],
            Shape::Polygon { vertices } => vertices.clone(),
            _ => unreachable!("outline is only defined for polygonal shapes"),
        }
    }

    fn hash_bytes(&self, out: &mut Vec<u8>) {
        let push_pt = |p: &Point, out: &mut Vec<u8>| {
            out.extend_from_slice(&p.x.to_bits().to_le_bytes());
            out.extend_from_slice(&p.y.to_bits().to_le_bytes());
        };
        match self {
            Shape::Disk { center, radius } => {
                out.push(1);
                push_pt(center, out);
                out.extend_from_slice(&radius.to_bits().to_le_bytes());
            }
            Shape::Rectangle { min, max } => {
                out.push(2);
                push_pt(min, out);
                push_pt(max, out);
            }
            Shape::LShape { min, max, notch } => {
                out.push(3);
                push_pt(min, out);
                push_pt(max, out);
                push_pt(notch, out);
            }
            Shape::Polygon { vertices } => {
                out.push(4);
                out.extend_from_slice(&(vertices.len() as u64).to_le_bytes());
                for v in vertices {
                    push_pt(v, out);
                }
            }
        }
    }
}

fn shoelace_area(vs: &[Point]) -> f64 {
    let n = vs.len();
    let mut acc = 0.0;
    for i in 0..n {
        let a = vs[i];
        let b = vs[(i + 1) % n];
        acc += a.x * b.y - b.x * a.y;
    }
    0.5 * acc
}

fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let abx = b.x - a.x;
    let aby = b.y - a.y;
    let apx = p.x - a.x;
    let apy = p.y - a.y;
    let len2 = abx * abx + aby * aby;
    let t = if len2 > 0.0 { ((apx * abx + apy * aby) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let cx = a.x + t * abx;
    let cy = a.y + t * aby;
    (p.x - cx).hypot(p.y - cy)
}

/// Positive inside, negative outside; inside test by crossing parity.
fn polygon_signed_distance(vs: &[Point], p: Point) -> f64 {
    let n = vs.len();
    let mut dist = f64::INFINITY;
    let mut inside = false;
    for i in 0..n {
        let a = vs[i];
        let b = vs[(i + 1) % n];
        dist = dist.min(point_segment_distance(p, a, b));
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x_cross {
                inside = !inside;
            }
        }
    }
    if inside {
        dist
    } else {
        -dist
    }
}

fn segments_properly_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let orient = |p: Point, q: Point, r: Point| (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x);
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    (o1 * o2 < 0.0) && (o3 * o4 < 0.0)
}

fn polygon_self_intersects(vs: &[Point]) -> bool {
    let n = vs.len();
    for i in 0..n {
        for j in (i + 1)..n {
            // Skip adjacent edges (they share a vertex).
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            if segments_properly_intersect(vs[i], vs[(i + 1) % n], vs[j], vs[(j + 1) % n]) {
                return true;
            }
        }
    }
    false
}

/// One P1 triangle of the SW-NE split. `nodes` are stored in role order:
/// lower `(sw, se, ne)`, upper `(sw, ne, nw)`.
#[derive(Clone, Copy, Debug)]
pub struct Triangle {
    pub nodes: [u32; 3],
    pub upper: bool,
}

impl Triangle {
    /// Per-node coefficients `c` such that the constant gradient is
    /// `( sum c_x[k] u_k, sum c_y[k] u_k ) / h`.
    #[inline]
    pub fn grad_coeffs(&self) -> ([f64; 3], [f64; 3]) {
        if self.upper {
            // (sw, ne, nw): gx = (u_ne - u_nw)/h, gy = (u_nw - u_sw)/h
            ([0.0, 1.0, -1.0], [-1.0, 0.0, 1.0])
        } else {
            // (sw, se, ne): gx = (u_se - u_sw)/h, gy = (u_ne - u_se)/h
            ([-1.0, 1.0, 0.0], [0.0, -1.0, 1.0])
        }
    }
}

/// The nodes attaining the maximum of the distance field within tolerance
/// `h/2`, with the lexicographically smallest index designated primary.
#[derive(Clone, Debug, Serialize)]
pub struct MaximizerSet {
    pub value: f64,
    pub nodes: Vec<u32>,
    pub primary: u32,
    pub diameter: f64,
    /// True when the maximizers cluster within diameter `2h`.
    pub unique: bool,
}

/// A shape sampled on a uniform lattice, with interior/boundary masks and
/// the exact distance field.
#[derive(Debug)]
pub struct Domain {
    pub shape: Shape,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    pub origin: Point,
    /// Row-major masks over the full lattice.
    pub interior: Vec<bool>,
    pub boundary: Vec<bool>,
    /// Distance to the boundary: analytic inside interior nodes, 0 elsewhere.
    pub rho: Vec<f64>,
    /// Analytic shape area.
    pub area: f64,
    /// Total quadrature mass: number of active triangles times h^2/2.
    /// Differs from `area` by O(h) on non-aligned boundaries.
    pub quad_area: f64,
    pub triangles: Vec<Triangle>,
    /// Lumped nodal quadrature weights (h^2/6 per incident active triangle).
    pub node_weight: Vec<f64>,
    /// Interior node indices in row-major order.
    pub interior_nodes: Vec<u32>,
    interior_count: usize,
}

/// Builds the lattice, masks, distance field, and triangulation for a shape.
pub fn build_domain(shape: Shape, h: f64) -> Result<Arc<Domain>, GeometryError> {
    if !h.is_finite() || h <= 0.0 {
        return Err(GeometryError::BadSpacing(h));
    }
    shape.validate()?;

    let (lo, hi) = shape.bounding_box();
    // One padding ring outside the bounding box so every interior node has
    // a full 8-neighborhood of valid lattice indices.
    let spanx = ((hi.x - lo.x) / h).ceil() as usize + 1;
    let spany = ((hi.y - lo.y) / h).ceil() as usize + 1;
    let nx = spanx + 2;
    let ny = spany + 2;
    let origin = Point::new(lo.x - h, lo.y - h);

    let n = nx * ny;
    let mut signed = vec![0.0f64; n];
    for iy in 0..ny {
        let y = origin.y + iy as f64 * h;
        for ix in 0..nx {
            let x = origin.x + ix as f64 * h;
            signed[iy * nx + ix] = shape.signed_distance(Point::new(x, y));
        }
    }

    let mut interior = vec![false; n];
    for idx in 0..n {
        interior[idx] = signed[idx] > 0.5 * h;
    }
    let mut boundary = vec![false; n];
    for iy in 0..ny {
        for ix in 0..nx {
            let idx = iy * nx + ix;
            if interior[idx] {
                continue;
            }
            let mut adj = false;
            if ix > 0 {
                adj |= interior[idx - 1];
            }
            if ix + 1 < nx {
                adj |= interior[idx + 1];
            }
            if iy > 0 {
                adj |= interior[idx - nx];
            }
            if iy + 1 < ny {
                adj |= interior[idx + nx];
            }
            boundary[idx] = adj;
        }
    }

    let mut rho = vec![0.0f64; n];
    let mut interior_nodes = Vec::new();
    for idx in 0..n {
        if interior[idx] {
            rho[idx] = signed[idx];
            interior_nodes.push(idx as u32);
        }
    }
    let interior_count = interior_nodes.len();
    if interior_count < 9 {
        return Err(GeometryError::GridTooCoarse(interior_count));
    }

    // Active triangles: all three vertices carry field values.
    let in_domain = |idx: usize| interior[idx] || boundary[idx];
    let mut triangles = Vec::new();
    let mut node_weight = vec![0.0f64; n];
    let w_tri = h * h / 6.0;
    for iy in 0..ny - 1 {
        for ix in 0..nx - 1 {
            let sw = iy * nx + ix;
            let se = sw + 1;
            let nw = sw + nx;
            let ne = nw + 1;
            if in_domain(sw) && in_domain(se) && in_domain(ne) {
                triangles.push(Triangle { nodes: [sw as u32, se as u32, ne as u32], upper: false });
                node_weight[sw] += w_tri;
                node_weight[se] += w_tri;
                node_weight[ne] += w_tri;
            }
            if in_domain(sw) && in_domain(ne) && in_domain(nw) {
                triangles.push(Triangle { nodes: [sw as u32, ne as u32, nw as u32], upper: true });
                node_weight[sw] += w_tri;
                node_weight[ne] += w_tri;
                node_weight[nw] += w_tri;
            }
        }
    }
    let quad_area = triangles.len() as f64 * h * h / 2.0;
    let area = shape.area();

    Ok(Arc::new(Domain {
        shape,
        h,
        nx,
        ny,
        origin,
        interior,
        boundary,
        rho,
        area,
        quad_area,
        triangles,
        node_weight,
        interior_nodes,
        interior_count,
    }))
}

impl Domain {
    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn idx(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    #[inline]
    pub fn ix_iy(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    #[inline]
    pub fn node_pos(&self, idx: usize) -> Point {
        let (ix, iy) = self.ix_iy(idx);
        Point::new(self.origin.x + ix as f64 * self.h, self.origin.y + iy as f64 * self.h)
    }

    #[inline]
    pub fn in_domain(&self, idx: usize) -> bool {
        self.interior[idx] || self.boundary[idx]
    }

    pub fn interior_count(&self) -> usize {
        self.interior_count
    }

    pub fn rho_max(&self) -> f64 {
        self.interior_nodes.iter().fold(0.0, |m, &i| m.max(self.rho[i as usize]))
    }

    /// Reciprocal of the largest distance to the boundary.
    pub fn lambda_inf_cap(&self) -> f64 {
        1.0 / self.rho_max()
    }

    /// All nodes within `h/2` of the distance-field maximum.
    pub fn rho_maximizers(&self) -> MaximizerSet {
        let max = self.rho_max();
        let tol = 0.5 * self.h;
        let nodes: Vec<u32> = self
            .interior_nodes
            .iter()
            .copied()
            .filter(|&i| self.rho[i as usize] >= max - tol)
            .collect();
        let primary = nodes[0];
        let mut diameter = 0.0f64;
        for (k, &a) in nodes.iter().enumerate() {
            let pa = self.node_pos(a as usize);
            for &b in &nodes[k + 1..] {
                diameter = diameter.max(pa.dist(self.node_pos(b as usize)));
            }
        }
        MaximizerSet { value: max, primary, unique: diameter <= 2.0 * self.h, diameter, nodes }
    }

    /// Node closest to a point, restricted to interior nodes.
    pub fn nearest_interior_node(&self, p: Point) -> Option<u32> {
        let mut best = None;
        let mut best_d = f64::INFINITY;
        for &i in &self.interior_nodes {
            let d = p.dist(self.node_pos(i as usize));
            if d < best_d {
                best_d = d;
                best = Some(i);
            }
        }
        best
    }

    /// Stable content hash covering the shape, spacing, and lattice layout.
    pub fn hash(&self) -> u64 {
        let mut bytes = Vec::new();
        self.shape.hash_bytes(&mut bytes);
        bytes.extend_from_slice(&self.h.to_bits().to_le_bytes());
        bytes.extend_from_slice(&(self.nx as u64).to_le_bytes());
        bytes.extend_from_slice(&(self.ny as u64).to_le_bytes());
        bytes.extend_from_slice(&(self.interior_count as u64).to_le_bytes());
        fnv1a(&bytes)
    }

    /// Serializable snapshot with run-length-encoded masks.
    pub fn export(&self) -> DomainExport {
        DomainExport {
            shape: self.shape.clone(),
            h: self.h,
            nx: self.nx,
            ny: self.ny,
            origin: self.origin,
            area: self.area,
            quad_area: self.quad_area,
            interior_rle: rle_encode(&self.interior),
            boundary_rle: rle_encode(&self.boundary),
            rho: self.rho.clone(),
            hash: format!("{:016x}", self.hash()),
        }
    }
}

/// 64-bit FNV-1a over a byte stream.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Alternating run lengths, starting with the number of leading `false`.
pub fn rle_encode(mask: &[bool]) -> Vec<u32> {
    let mut runs = Vec::new();
    let mut current = false;
    let mut count = 0u32;
    for &b in mask {
        if b == current {
            count += 1;
        } else {
            runs.push(count);
            current = b;
            count = 1;
        }
    }
    runs.push(count);
    runs
}

pub fn rle_decode(runs: &[u32], len: usize) -> Vec<bool> {
    let mut mask = Vec::with_capacity(len);
    let mut current = false;
    for &r in runs {
        for _ in 0..r {
            mask.push(current);
        }
        current = !current;
    }
    debug_assert_eq!(mask.len(), len);
    mask
}

#[derive(Serialize)]
pub struct DomainExport {
    pub shape: Shape,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    pub origin: Point,
    pub area: f64,
    pub quad_area: f64,
    pub interior_rle: Vec<u32>,
    pub boundary_rle: Vec<u32>,
    pub rho: Vec<f64>,
    pub hash: String,
}
