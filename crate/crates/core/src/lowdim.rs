//! Partial F-tests on the testing half of a split.

use ndarray::{Array1, Array2, Axis};
use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::fdist::f_sf;
use crate::linalg::least_squares;
use crate::screening::ScreenedSplit;

/// Relative size of the full-model RSS below which the fit counts as saturated.
pub const SATURATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartialFResult {
    pub f_stat: f64,
    pub df1: usize,
    pub df2: usize,
    pub p_value: f64,
}

/// The testing half of one split, restricted to the screened columns, with
/// the full model already fitted.
pub struct TestingHalf {
    x: Array2<f64>,
    y: Array1<f64>,
    /// Screened variable for each leading column of `x`.
    s_hat: Vec<usize>,
    intercept: bool,
    full_rss: f64,
    full_rank: usize,
    y_norm2: f64,
}

impl TestingHalf {
    pub fn new(dataset: &Dataset, split: &ScreenedSplit, intercept: bool) -> Result<Self> {
        let m = split.n_out.len();
        let k = split.s_hat.len() + intercept as usize;
        if m <= k {
            return Err(Error::Dimension(format!(
                "testing half has {m} rows for {k} columns; the screening cap was violated"
            )));
        }
        let rows = dataset.x().select(Axis(0), &split.n_out);
        let mut x = rows.select(Axis(1), &split.s_hat);
        if intercept {
            x.push_column(Array1::ones(m).view()).expect("row count matches");
        }
        let y = dataset.y().select(Axis(0), &split.n_out);
        let full = least_squares(x.view(), y.view())?;
        let y_norm2 = y.dot(&y);
        Ok(TestingHalf {
            x,
            y,
            s_hat: split.s_hat.clone(),
            intercept,
            full_rss: full.rss,
            full_rank: full.rank,
            y_norm2,
        })
    }

    /// Screened variables that fall in `members` (both sorted).
    pub fn intersect(&self, members: &[usize]) -> Vec<usize> {
        self.s_hat.iter().copied().filter(|j| members.binary_search(j).is_ok()).collect()
    }

    /// Tests `H0: β_j = 0 for j ∈ members ∩ Ŝ`. `None` means nothing to
    /// test (empty intersection or no rank lost), i.e. p = 1.
    pub fn test(&self, members: &[usize]) -> Result<Option<PartialFResult>> {
        let tested = self.intersect(members);
        self.test_screened(&tested)
    }

    /// As [`test`](Self::test) with the intersection already computed.
    pub fn test_screened(&self, tested: &[usize]) -> Result<Option<PartialFResult>> {
        if tested.is_empty() {
            return Ok(None);
        }
        let keep: Vec<usize> = (0..self.x.ncols())
            .filter(|&c| c >= self.s_hat.len() || tested.binary_search(&self.s_hat[c]).is_err())
            .collect();
        let restricted = least_squares(self.x.select(Axis(1), &keep).view(), self.y.view())?;
        let m = self.y.len();
        let df1 = self.full_rank - restricted.rank;
        let df2 = m - self.full_rank;
        if df1 == 0 {
            return Ok(None);
        }
        if self.y_norm2 == 0.0 {
            return Ok(None);
        }
        if self.full_rss < SATURATION_TOL * self.y_norm2 {
            log::warn!("partial F-test: full model saturates the testing half; reporting p = 0");
            return Ok(Some(PartialFResult { f_stat: f64::INFINITY, df1, df2, p_value: 0.0 }));
        }
        let num = (restricted.rss - self.full_rss).max(0.0) / df1 as f64;
        let f_stat = num / (self.full_rss / df2 as f64);
        let p_value = f_sf(f_stat, df1 as f64, df2 as f64)?;
        Ok(Some(PartialFResult { f_stat, df1, df2, p_value }))
    }

    pub fn intercept(&self) -> bool {
        self.intercept
    }

    pub fn full_rss(&self) -> f64 {
        self.full_rss
    }
}

/// p-value of the partial F-test for a cluster on one screened split;
/// 1 when the cluster misses the screened set.
pub fn partial_f_pvalue(dataset: &Dataset, split: &ScreenedSplit, members: &[usize], intercept: bool) -> Result<f64> {
    let half = TestingHalf::new(dataset, split, intercept)?;
    Ok(half.test(members)?.map_or(1.0, |r| r.p_value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_dataset(n: usize, p: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, p), |_| StandardNormal.sample(&mut rng));
        let y = Array1::from_shape_fn(n, |i| {
            let e: f64 = StandardNormal.sample(&mut rng);
            x[[i, 0]] + e
        });
        Dataset::new(x, y).unwrap()
    }

    fn split(n: usize, s_hat: Vec<usize>) -> ScreenedSplit {
        ScreenedSplit { b: 0, n_in: (0..n / 2).collect(), n_out: (n / 2..n).collect(), s_hat, lambda: None }
    }

    #[test]
    fn disjoint_cluster_has_unit_pvalue() {
        let d = random_dataset(20, 5, 1);
        assert_eq!(partial_f_pvalue(&d, &split(20, vec![0, 2]), &[1, 3], false).unwrap(), 1.0);
        assert_eq!(partial_f_pvalue(&d, &split(20, vec![]), &[0, 1, 2, 3, 4], false).unwrap(), 1.0);
    }

    #[test]
    fn strong_signal_is_significant() {
        let d = random_dataset(200, 4, 2);
        let p = partial_f_pvalue(&d, &split(200, vec![0, 1, 2]), &[0], false).unwrap();
        assert!(p < 1e-4, "{p}");
    }

    #[test]
    fn testing_all_screened_equals_global_f() {
        let d = random_dataset(30, 4, 3);
        let s = split(30, vec![0, 1, 3]);
        let half = TestingHalf::new(&d, &s, false).unwrap();
        let r = half.test(&[0, 1, 2, 3]).unwrap().unwrap();
        // Fitted values from the normal equations, solved by Gaussian elimination.
        let rows = d.x().select(Axis(0), &s.n_out).select(Axis(1), &s.s_hat);
        let y = d.y().select(Axis(0), &s.n_out);
        let mut a = rows.t().dot(&rows);
        let mut b = rows.t().dot(&y);
        let k = a.nrows();
        for c in 0..k {
            for r2 in c + 1..k {
                let f = a[[r2, c]] / a[[c, c]];
                for cc in c..k {
                    a[[r2, cc]] -= f * a[[c, cc]];
                }
                b[r2] -= f * b[c];
            }
        }
        let mut beta = vec![0.0; k];
        for c in (0..k).rev() {
            let s: f64 = (c + 1..k).map(|cc| a[[c, cc]] * beta[cc]).sum();
            beta[c] = (b[c] - s) / a[[c, c]];
        }
        let fitted = rows.dot(&Array1::from(beta));
        let resid = &y - &fitted;
        let rss = resid.dot(&resid);
        let global = ((y.dot(&y) - rss) / 3.0) / (rss / (15.0 - 3.0));
        assert_eq!((r.df1, r.df2), (3, 12));
        assert!((r.f_stat - global).abs() < 1e-9 * global.max(1.0));
    }

    #[test]
    fn saturated_fit_gives_zero() {
        let n = 8;
        let x = Array2::from_shape_fn((n, 2), |(i, j)| ((i * (j + 2)) % 5) as f64 + j as f64 * 0.1 * i as f64);
        let y = Array1::from_shape_fn(n, |i| 2.0 * x[[i, 0]] - x[[i, 1]]);
        let d = Dataset::new(x, y).unwrap();
        let p = partial_f_pvalue(&d, &split(n, vec![0, 1]), &[0], false).unwrap();
        assert_eq!(p, 0.0);
    }

    #[test]
    fn too_many_screened_columns_is_an_error() {
        let d = random_dataset(8, 5, 4);
        assert!(TestingHalf::new(&d, &split(8, vec![0, 1, 2, 3]), false).is_err());
        assert!(TestingHalf::new(&d, &split(8, vec![0, 1, 2]), true).is_err());
        assert!(TestingHalf::new(&d, &split(8, vec![0, 1, 2]), false).is_ok());
    }

    #[test]
    fn intercept_column_is_never_tested() {
        let d = random_dataset(30, 3, 5);
        let half = TestingHalf::new(&d, &split(30, vec![0, 2]), true).unwrap();
        let r = half.test(&[2]).unwrap().unwrap();
        assert_eq!((r.df1, r.df2), (1, 12));
    }
}
