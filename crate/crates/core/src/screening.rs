//! Lasso screening on the first half of each sample split.

use ndarray::Axis;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::lasso::{coordinate_descent, cv_select_lambda, lambda_grid, SolverOptions, Standardizer};
use crate::rng::{derive_seed, Domain};
use crate::splitting::SampleSplit;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScreeningConfig {
    pub cv_folds: usize,
    pub lambda_count: usize,
    pub lambda_ratio: f64,
    pub cd_tol: f64,
    pub cd_max_iter: usize,
}

impl Default for ScreeningConfig {
    fn default() -> Self {
        ScreeningConfig { cv_folds: 10, lambda_count: 100, lambda_ratio: 1e-3, cd_tol: 1e-7, cd_max_iter: 100_000 }
    }
}

impl ScreeningConfig {
    fn solver(&self) -> SolverOptions {
        SolverOptions { tol: self.cd_tol, max_iter: self.cd_max_iter }
    }
}

/// Result of screening one split: the variables kept for testing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenedSplit {
    pub b: usize,
    pub n_in: Vec<usize>,
    pub n_out: Vec<usize>,
    /// Selected variables, sorted.
    pub s_hat: Vec<usize>,
    /// λ picked by cross-validation; `None` when the response was constant
    /// on the screening half.
    pub lambda: Option<f64>,
}

/// Largest screened set the testing half can support.
///
/// Keeps `|Ŝ| < n/2` and leaves the partial F-test at least one residual
/// degree of freedom on `N_out` (one fewer column when an intercept is fitted).
pub fn screening_cap(n: usize, n_out: usize, intercept: bool) -> usize {
    let sparsity = (n / 2).saturating_sub(1);
    let residual = n_out.saturating_sub(1 + intercept as usize);
    sparsity.min(residual)
}

/// Keeps the `cap` largest coefficients by magnitude, lower index first on ties.
pub fn truncate_support(coefficients: &[f64], cap: usize) -> Vec<usize> {
    let mut support: Vec<usize> = (0..coefficients.len()).filter(|&j| coefficients[j] != 0.0).collect();
    if support.len() > cap {
        support.sort_by(|&a, &b| coefficients[b].abs().total_cmp(&coefficients[a].abs()).then(a.cmp(&b)));
        support.truncate(cap);
        support.sort_unstable();
    }
    support
}

/// Screens split `b`: Lasso on rows `N_in` at the cross-validated λ, support
/// capped by [`screening_cap`].
pub fn screen(
    dataset: &Dataset,
    b: usize,
    split: &SampleSplit,
    config: &ScreeningConfig,
    intercept: bool,
    seed: u64,
) -> Result<ScreenedSplit> {
    if split.n_in.len() + split.n_out.len() != dataset.n() {
        return Err(Error::Dimension("split does not cover the dataset".into()));
    }
    let x_in = dataset.x().select(Axis(0), &split.n_in);
    let y_in = dataset.y().select(Axis(0), &split.n_in);
    let st = Standardizer::fit(x_in.view(), y_in.view());
    let xs = st.transform_x(x_in.view());
    let ys = st.transform_y(y_in.view());

    let mut out = ScreenedSplit { b, n_in: split.n_in.clone(), n_out: split.n_out.clone(), s_hat: Vec::new(), lambda: None };
    let grid = match lambda_grid(xs.view(), ys.view(), config.lambda_count, config.lambda_ratio) {
        Ok(grid) => grid,
        Err(Error::DegenerateResponse(_)) => {
            log::warn!("split {b}: response carries no signal on the screening half; nothing screened");
            return Ok(out);
        }
        Err(e) => return Err(e),
    };
    let folds = config.cv_folds.min(split.n_in.len());
    let cv_seed = derive_seed(seed, Domain::CrossValidation, b as u64);
    let cv = cv_select_lambda(x_in.view(), y_in.view(), folds, &grid, cv_seed, config.solver())?;
    let fit = coordinate_descent(xs.view(), ys.view(), cv.lambda, config.cd_tol, config.cd_max_iter)?;
    let cap = screening_cap(dataset.n(), split.n_out.len(), intercept);
    out.s_hat = truncate_support(fit.coefficients.as_slice().expect("contiguous"), cap);
    out.lambda = Some(cv.lambda);
    Ok(out)
}
