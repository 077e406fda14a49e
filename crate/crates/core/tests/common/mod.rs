#![allow(dead_code)]

use std::path::PathBuf;

use mixgen_core::data::{load_dataset, Dataset, ImpactCoefficientTable};

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

pub fn canonical() -> Dataset {
    let file = std::fs::File::open(data_path("concrete.csv")).expect("canonical dataset");
    load_dataset(file, &ImpactCoefficientTable::default_calibrated()).expect("loads")
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

/// Signed distance of `p` from the plane through `a, b, c` (normal by right-hand rule).
pub fn plane_distance(a: [f64; 3], b: [f64; 3], c: [f64; 3], p: [f64; 3]) -> f64 {
    let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    let n = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
    let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    ((p[0] - a[0]) * n[0] + (p[1] - a[1]) * n[1] + (p[2] - a[2]) * n[2]) / len
}

/// Gift-wrapping 2-D hull; returns corner points counter-clockwise.
pub fn hull_2d(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let start = points.iter().copied().fold(points[0], |m, p| if (p[0], p[1]) < (m[0], m[1]) { p } else { m });
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let d2 = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
    let mut hull = vec![start];
    loop {
        let cur = *hull.last().unwrap();
        let mut next = if points[0] == cur { points[1] } else { points[0] };
        for &p in points {
            let c = cross(cur, next, p);
            if c < 0.0 || (c == 0.0 && d2(cur, p) > d2(cur, next)) {
                next = p;
            }
        }
        if next == start {
            return hull;
        }
        hull.push(next);
    }
}

/// Whether `p` lies inside or on a counter-clockwise convex polygon.
pub fn inside_convex(poly: &[[f64; 2]], p: [f64; 2]) -> bool {
    (0..poly.len()).all(|i| {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= 0.0
    })
}
