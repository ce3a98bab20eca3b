//! Least squares by Householder QR with column pivoting.

use ndarray::{ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Relative pivot threshold: columns whose remaining norm falls below
/// `PIVOT_TOL · ‖X‖_F` are treated as linearly dependent.
pub const PIVOT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    pub rss: f64,
    pub rank: usize,
    /// Columns kept by the pivoting, in pivot order.
    pub kept: Vec<usize>,
}

/// Residual sum of squares and numerical rank of the regression of `y` on `x`.
pub fn least_squares(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> Result<LeastSquares> {
    let (m, k) = x.dim();
    if y.len() != m {
        return Err(Error::Dimension(format!("X has {m} rows, y has {}", y.len())));
    }
    let mut qty: Vec<f64> = y.to_vec();
    if k == 0 {
        return Ok(LeastSquares { rss: qty.iter().map(|v| v * v).sum(), rank: 0, kept: vec![] });
    }
    let mut cols: Vec<Vec<f64>> = x.axis_iter(Axis(1)).map(|c| c.to_vec()).collect();
    let mut order: Vec<usize> = (0..k).collect();
    let frob = cols.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    let threshold = PIVOT_TOL * frob;

    let mut rank = 0;
    for step in 0..k.min(m) {
        let tail_norm = |c: &Vec<f64>| c[step..].iter().map(|v| v * v).sum::<f64>().sqrt();
        let (best, best_norm) = (step..k)
            .map(|j| (j, tail_norm(&cols[j])))
            .fold((step, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if best_norm <= threshold {
            break;
        }
        cols.swap(step, best);
        order.swap(step, best);

        // Householder reflector zeroing cols[step][step+1..].
        let pivot = &cols[step];
        let alpha = if pivot[step] > 0.0 { -best_norm } else { best_norm };
        let mut v: Vec<f64> = pivot[step..].to_vec();
        v[0] -= alpha;
        let v_norm2: f64 = v.iter().map(|t| t * t).sum();
        if v_norm2 > 0.0 {
            let reflect = |target: &mut [f64]| {
                let s: f64 = v.iter().zip(target.iter()).map(|(a, b)| a * b).sum();
                let f = 2.0 * s / v_norm2;
                for (t, vi) in target.iter_mut().zip(&v) {
                    *t -= f * vi;
                }
            };
            for col in cols.iter_mut().skip(step) {
                reflect(&mut col[step..]);
            }
            reflect(&mut qty[step..]);
        }
        rank += 1;
    }
    let rss = qty[rank..].iter().map(|v| v * v).sum();
    Ok(LeastSquares { rss, rank, kept: order[..rank].to_vec() })
}

/// `‖y − X β̂‖²`; requires more rows than columns.
pub fn rss(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> Result<f64> {
    if x.nrows() <= x.ncols() {
        return Err(Error::Dimension(format!("least squares needs m > k, got m = {}, k = {}", x.nrows(), x.ncols())));
    }
    Ok(least_squares(x, y)?.rss)
}
