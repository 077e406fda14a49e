use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::AnalyzeError;

/// Convex hull of a 3-D point set.
///
/// `dimension` is the affine dimension of the input (0–3). Below 3 the hull
/// is `degenerate`: `facets` is empty and `vertices` holds the single point,
/// the two segment ends, or the polygon corners.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HullResult {
    pub dimension: usize,
    pub degenerate: bool,
    /// Sorted input indices of extremal points.
    pub vertices: Vec<usize>,
    /// Triangles wound counter-clockwise seen from outside.
    pub facets: Vec<[usize; 3]>,
}

type P = [f64; 3];

fn sub(a: P, b: P) -> P {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: P, b: P) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: P, b: P) -> P {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn norm(a: P) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Clone, Copy)]
struct Face {
    v: [usize; 3],
    n: P,
    d: f64,
}

impl Face {
    fn new(pts: &[P], v: [usize; 3]) -> Self {
        let n = cross(sub(pts[v[1]], pts[v[0]]), sub(pts[v[2]], pts[v[0]]));
        let len = norm(n);
        let n = if len > 0.0 { n.map(|c| c / len) } else { n };
        Face { v, n, d: dot(n, pts[v[0]]) }
    }

    fn dist(&self, p: P) -> f64 {
        dot(self.n, p) - self.d
    }
}

impl HullResult {
    /// Largest signed distance of `p` above any facet (≤ 0 means inside).
    pub fn max_facet_distance(&self, points: &[P], p: P) -> f64 {
        self.facets
            .iter()
            .map(|f| Face::new(points, *f).dist(p))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Exact convex hull by incremental insertion with horizon tracking.
pub fn convex_hull_3d(points: &[P]) -> Result<HullResult, AnalyzeError> {
    if points.is_empty() {
        return Err(AnalyzeError::TooFewPoints { needed: 1, found: 0 });
    }
    if let Some(i) = points.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
        return Err(AnalyzeError::NonFinite(i));
    }
    let scale = (0..3)
        .map(|k| {
            let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[k]), hi.max(p[k])));
            hi - lo
        })
        .fold(0.0, f64::max);
    let eps = 1e-12 * scale.max(f64::MIN_POSITIVE);

    // Initial simplex from extreme points.
    let i0 = (0..points.len()).min_by(|&a, &b| points[a].partial_cmp(&points[b]).unwrap()).unwrap();
    let far = |score: &dyn Fn(P) -> f64| -> (usize, f64) {
        (0..points.len())
            .map(|i| (i, score(points[i])))
            .fold((i0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best })
    };
    let (i1, d1) = far(&|p| norm(sub(p, points[i0])));
    if d1 <= eps {
        return Ok(HullResult { dimension: 0, degenerate: true, vertices: vec![i0], facets: vec![] });
    }
    let axis = sub(points[i1], points[i0]).map(|c| c / d1);
    let (i2, d2) = far(&|p| norm(cross(axis, sub(p, points[i0]))));
    if d2 <= eps {
        let proj = |i: usize| dot(axis, sub(points[i], points[i0]));
        let lo = (0..points.len()).min_by(|&a, &b| proj(a).total_cmp(&proj(b)).then(a.cmp(&b))).unwrap();
        let hi = (0..points.len()).max_by(|&a, &b| proj(a).total_cmp(&proj(b)).then(b.cmp(&a))).unwrap();
        let mut vertices = vec![lo, hi];
        vertices.sort_unstable();
        return Ok(HullResult { dimension: 1, degenerate: true, vertices, facets: vec![] });
    }
    let plane = Face::new(points, [i0, i1, i2]);
    let (i3, d3) = far(&|p| plane.dist(p).abs());
    if d3 <= eps {
        return Ok(planar_hull(points, plane.n, eps));
    }

    let mut faces: Vec<Option<Face>> = Vec::new();
    let tet = [i0, i1, i2, i3];
    let inside = tet.iter().fold([0.0; 3], |acc, &i| [0, 1, 2].map(|k| acc[k] + points[i][k] / 4.0));
    for [a, b, c] in [[i0, i1, i2], [i0, i1, i3], [i0, i2, i3], [i1, i2, i3]] {
        let mut f = Face::new(points, [a, b, c]);
        if f.dist(inside) > 0.0 {
            f = Face::new(points, [a, c, b]);
        }
        faces.push(Some(f));
    }

    for (p_idx, &p) in points.iter().enumerate() {
        if tet.contains(&p_idx) {
            continue;
        }
        let visible: Vec<usize> = faces
            .iter()
            .enumerate()
            .filter_map(|(i, f)| f.filter(|f| f.dist(p) > eps).map(|_| i))
            .collect();
        if visible.is_empty() {
            continue;
        }
        let mut edges: HashSet<(usize, usize)> = HashSet::new();
        for &fi in &visible {
            let v = faces[fi].unwrap().v;
            for k in 0..3 {
                edges.insert((v[k], v[(k + 1) % 3]));
            }
        }
        let mut horizon: Vec<(usize, usize)> = edges.iter().copied().filter(|&(a, b)| !edges.contains(&(b, a))).collect();
        horizon.sort_unstable();
        for fi in visible {
            faces[fi] = None;
        }
        for (a, b) in horizon {
            faces.push(Some(Face::new(points, [a, b, p_idx])));
        }
    }

    let facets: Vec<[usize; 3]> = faces.into_iter().flatten().map(|f| f.v).collect();
    let mut vertices: Vec<usize> = facets.iter().flatten().copied().collect::<HashSet<_>>().into_iter().collect();
    vertices.sort_unstable();
    Ok(HullResult { dimension: 3, degenerate: false, vertices, facets })
}

/// Monotone-chain hull of coplanar points, in a basis of their plane.
fn planar_hull(points: &[P], normal: P, eps: f64) -> HullResult {
    let helper = if normal[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let u = cross(normal, helper);
    let u = u.map(|c| c / norm(u));
    let w = cross(normal, u);
    let q: Vec<(f64, f64)> = points.iter().map(|p| (dot(*p, u), dot(*p, w))).collect();
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| q[a].partial_cmp(&q[b]).unwrap().then(a.cmp(&b)));
    order.dedup_by(|a, b| (q[*a].0 - q[*b].0).abs() <= eps && (q[*a].1 - q[*b].1).abs() <= eps);
    let turn = |o: usize, a: usize, b: usize| (q[a].0 - q[o].0) * (q[b].1 - q[o].1) - (q[a].1 - q[o].1) * (q[b].0 - q[o].0);
    let mut hull: Vec<usize> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let seq: Box<dyn Iterator<Item = &usize>> = if pass == 0 { Box::new(order.iter()) } else { Box::new(order.iter().rev()) };
        for &i in seq {
            while hull.len() >= start + 2 && turn(hull[hull.len() - 2], hull[hull.len() - 1], i) <= eps * eps {
                hull.pop();
            }
            hull.push(i);
        }
        hull.pop();
    }
    let mut vertices = hull;
    vertices.sort_unstable();
    vertices.dedup();
    HullResult { dimension: 2, degenerate: true, vertices, facets: vec![] }
}

/// For each query point, the index of the nearest candidate (Euclidean);
/// ties go to the lower index.
pub fn nearest_indices(queries: &[P], candidates: &[P]) -> Vec<Option<usize>> {
    queries
        .iter()
        .map(|q| {
            candidates
                .iter()
                .enumerate()
                .map(|(i, c)| (i, norm(sub(*c, *q))))
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                .map(|(i, _)| i)
        })
        .collect()
}
