use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::AnalyzeError;
use crate::data::MixComposition;

pub const DEFAULT_K: usize = 6;
pub const MAX_K: usize = 15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingResult {
    pub coordinates: Vec<[f64; 2]>,
    pub k: usize,
    /// Top two eigenvalues of the centered Gram matrix (negative ones clamp the axis to zero).
    pub eigenvalues: [f64; 2],
    pub geodesic: Vec<Vec<f64>>,
    /// Cement, slag and fly-ash shares of the cementitious total per mix.
    pub marker_fractions: Vec<Option<[f64; 3]>>,
}

/// Z-scores each column over the given rows; constant columns become zero.
pub fn standardize(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    if rows.is_empty() {
        return Vec::new();
    }
    let n = rows.len() as f64;
    let dims = rows[0].len();
    let mut out = rows.to_vec();
    for j in 0..dims {
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
        let sd = (rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n).sqrt();
        for r in &mut out {
            r[j] = if sd > 0.0 { (r[j] - mean) / sd } else { 0.0 };
        }
    }
    out
}

pub fn marker_fractions(mixes: &[MixComposition]) -> Vec<Option<[f64; 3]>> {
    mixes.iter().map(MixComposition::cementitious_fractions).collect()
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Symmetrized k-nearest-neighbor adjacency lists (ties broken by index).
fn knn_graph(points: &[Vec<f64>], k: usize) -> Vec<Vec<(usize, f64)>> {
    let n = points.len();
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for i in 0..n {
        let mut d: Vec<(usize, f64)> = (0..n).filter(|&j| j != i).map(|j| (j, euclid(&points[i], &points[j]))).collect();
        d.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        for &(j, w) in d.iter().take(k) {
            adj[i].push((j, w));
            adj[j].push((i, w));
        }
    }
    for list in &mut adj {
        list.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        list.dedup_by_key(|e| e.0);
    }
    adj
}

#[derive(PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra(adj: &[Vec<(usize, f64)>], src: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adj.len()];
    dist[src] = 0.0;
    let mut heap = BinaryHeap::from([Item(0.0, src)]);
    while let Some(Item(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, w) in &adj[u] {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Item(nd, v));
            }
        }
    }
    dist
}

fn component_sizes(adj: &[Vec<(usize, f64)>]) -> Vec<usize> {
    let mut seen = vec![false; adj.len()];
    let mut sizes = Vec::new();
    for s in 0..adj.len() {
        if seen[s] {
            continue;
        }
        let mut stack = vec![s];
        seen[s] = true;
        let mut size = 0;
        while let Some(u) = stack.pop() {
            size += 1;
            for &(v, _) in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        sizes.push(size);
    }
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes
}

/// Isomap on raw coordinates: k-NN graph, shortest-path geodesics, then
/// classical MDS to two dimensions. Each axis is signed so its largest-magnitude
/// entry is positive.
pub fn isomap_points(points: &[Vec<f64>], k: usize) -> Result<EmbeddingResult, AnalyzeError> {
    let n = points.len();
    if k == 0 || n < k + 1 {
        return Err(AnalyzeError::TooFewPoints { needed: k.max(1) + 1, found: n });
    }
    if let Some(i) = points.iter().position(|p| p.iter().any(|v| !v.is_finite())) {
        return Err(AnalyzeError::NonFinite(i));
    }
    let adj = knn_graph(points, k);
    let sizes = component_sizes(&adj);
    if sizes.len() > 1 {
        return Err(AnalyzeError::Disconnected { sizes });
    }
    let geodesic: Vec<Vec<f64>> = (0..n).map(|s| dijkstra(&adj, s)).collect();

    // Double centering of squared geodesics.
    let sq = DMatrix::from_fn(n, n, |i, j| {
        let d = 0.5 * (geodesic[i][j] + geodesic[j][i]);
        d * d
    });
    let row_means: Vec<f64> = (0..n).map(|i| sq.row(i).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (sq[(i, j)] - row_means[i] - row_means[j] + grand));

    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| eig.eigenvalues[c].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&c)));
    let top = [order[0], order.get(1).copied().unwrap_or(order[0])];
    let eigenvalues = [eig.eigenvalues[top[0]], if n > 1 { eig.eigenvalues[top[1]] } else { 0.0 }];
    if !(eigenvalues[0] > 0.0) {
        return Err(AnalyzeError::NoPositiveEigenvalue);
    }

    let mut axes = [vec![0.0; n], vec![0.0; n]];
    for (axis, (&col, &lambda)) in axes.iter_mut().zip(top.iter().zip(&eigenvalues)) {
        if lambda <= 0.0 {
            continue;
        }
        let v = eig.eigenvectors.column(col);
        let pivot = (0..n).fold(0, |best, i| if v[i].abs() > v[best].abs() { i } else { best });
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            axis[i] = sign * v[i] * lambda.sqrt();
        }
    }
    let coordinates = (0..n).map(|i| [axes[0][i], axes[1][i]]).collect();
    Ok(EmbeddingResult { coordinates, k, eigenvalues, geodesic, marker_fractions: Vec::new() })
}

/// Isomap over standardized ingredient masses.
pub fn isomap(mixes: &[MixComposition], k: usize) -> Result<EmbeddingResult, AnalyzeError> {
    let rows: Vec<Vec<f64>> = mixes.iter().map(|m| m.to_array().to_vec()).collect();
    let mut result = isomap_points(&standardize(&rows), k)?;
    result.marker_fractions = marker_fractions(mixes);
    Ok(result)
}

/// Tries `k_start..=k_max` until the neighborhood graph is connected.
pub fn isomap_auto(mixes: &[MixComposition], k_start: usize, k_max: usize) -> Result<EmbeddingResult, AnalyzeError> {
    let mut last = None;
    for k in k_start..=k_max {
        match isomap(mixes, k) {
            Err(e @ AnalyzeError::Disconnected { .. }) => {
                log::info!("isomap graph disconnected at k = {k}; retrying");
                last = Some(e);
            }
            other => return other,
        }
    }
    Err(last.unwrap_or(AnalyzeError::TooFewPoints { needed: k_start + 1, found: mixes.len() }))
}
