//! Agglomerative clustering of covariates, built from the design alone.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::ClusterHierarchy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Linkage {
    #[default]
    Complete,
    Single,
    Average,
}

/// `1 − |cor(x_j, x_k)|` for every pair of columns.
pub fn correlation_distance(x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let (n, p) = x.dim();
    if n < 2 {
        return Err(Error::InvalidInput("correlation needs at least two rows".into()));
    }
    let mut centered = x.to_owned();
    for (j, mut col) in centered.axis_iter_mut(Axis(1)).enumerate() {
        let mean = col.sum() / n as f64;
        col.mapv_inplace(|v| v - mean);
        let norm = col.dot(&col).sqrt();
        if norm == 0.0 {
            return Err(Error::ConstantColumn { index: j, name: format!("x{j}") });
        }
        col.mapv_inplace(|v| v / norm);
    }
    let cor = centered.t().dot(&centered);
    Ok(Array2::from_shape_fn((p, p), |(j, k)| {
        if j == k {
            0.0
        } else {
            (1.0 - cor[[j, k]].abs()).clamp(0.0, 1.0)
        }
    }))
}

fn check_distance(d: ArrayView2<'_, f64>) -> Result<usize> {
    let (p, q) = d.dim();
    if p != q {
        return Err(Error::Dimension(format!("distance matrix is {p}x{q}")));
    }
    if p == 0 {
        return Err(Error::InvalidInput("empty distance matrix".into()));
    }
    for i in 0..p {
        if d[[i, i]] != 0.0 {
            return Err(Error::InvalidInput(format!("nonzero diagonal at {i}")));
        }
        for j in 0..i {
            let v = d[[i, j]];
            if !v.is_finite() || v < 0.0 || v != d[[j, i]] {
                return Err(Error::InvalidInput(format!("distance ({i}, {j}) is negative, non-finite or asymmetric")));
            }
        }
    }
    Ok(p)
}

/// Complete-linkage clustering.
pub fn complete_linkage(d: ArrayView2<'_, f64>) -> Result<ClusterHierarchy> {
    agglomerate(d, Linkage::Complete)
}

/// Naive O(p³) agglomerative clustering with binary merges.
///
/// A cluster lives in the slot of its smallest member. Each step merges the
/// closest pair of live slots; ties go to the lexicographically smallest
/// (slot, slot) pair, so the merge sequence is platform independent.
pub fn agglomerate(d: ArrayView2<'_, f64>, linkage: Linkage) -> Result<ClusterHierarchy> {
    let p = check_distance(d)?;
    let mut dist = d.to_owned();
    let mut alive = vec![true; p];
    let mut node_of: Vec<usize> = (0..p).collect();
    let mut size = vec![1usize; p];
    let mut merges = Vec::with_capacity(p.saturating_sub(1));

    for step in 0..p.saturating_sub(1) {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in (0..p).filter(|&i| alive[i]) {
            for j in (i + 1..p).filter(|&j| alive[j]) {
                let v = dist[[i, j]];
                if best.is_none_or(|(_, _, b)| v < b) {
                    best = Some((i, j, v));
                }
            }
        }
        let (i, j, height) = best.expect("at least two live clusters");
        for k in (0..p).filter(|&k| alive[k] && k != i && k != j) {
            let (dik, djk) = (dist[[i, k]], dist[[j, k]]);
            let merged = match linkage {
                Linkage::Complete => dik.max(djk),
                Linkage::Single => dik.min(djk),
                Linkage::Average => (dik * size[i] as f64 + djk * size[j] as f64) / (size[i] + size[j]) as f64,
            };
            dist[[i, k]] = merged;
            dist[[k, i]] = merged;
        }
        alive[j] = false;
        size[i] += size[j];
        merges.push((node_of[i], node_of[j], height));
        node_of[i] = p + step;
    }
    ClusterHierarchy::from_merges(p, &merges)
}
