//! Lasso by cyclic coordinate descent, with a log-spaced λ path and K-fold
//! cross-validation.
//!
//! Objective: `(1/(2m)) ‖y − Xβ‖² + λ ‖β‖₁`, no intercept.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{substream, Domain};

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub coefficients: Array1<f64>,
    pub lambda: f64,
    pub intercept: Option<f64>,
    /// Full sweeps performed.
    pub iterations: usize,
    pub converged: bool,
    /// Largest KKT violation at the returned coefficients.
    pub kkt_residual: f64,
}

impl LassoFit {
    pub fn support(&self) -> Vec<usize> {
        self.coefficients.iter().enumerate().filter(|(_, b)| **b != 0.0).map(|(j, _)| j).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-7, max_iter: 100_000 }
    }
}

/// Widest design for which the full Gram matrix is cached.
const GRAM_MAX_COLS: usize = 512;

/// Active-set sweeps tried before the exact sign-fixed step.
const QUICK_POLISH_SWEEPS: usize = 3;

/// Active-set sweeps between full passes.
const POLISH_SWEEPS: usize = 10;

/// Column-major copy of a design, prepared for coordinate updates.
pub(crate) struct CdProblem {
    m: usize,
    q: usize,
    cols: Vec<f64>,
    /// `‖x_j‖² / m`
    curvature: Vec<f64>,
    /// `XᵀX / m`, kept when `q` is small enough.
    gram: Option<Vec<f64>>,
}

impl CdProblem {
    pub(crate) fn new(x: ArrayView2<'_, f64>) -> Self {
        let (m, q) = x.dim();
        let mut cols = Vec::with_capacity(m * q);
        for col in x.axis_iter(Axis(1)) {
            cols.extend(col.iter());
        }
        let curvature = (0..q)
            .map(|j| cols[j * m..(j + 1) * m].iter().map(|v| v * v).sum::<f64>() / m as f64)
            .collect();
        let gram = (q <= GRAM_MAX_COLS).then(|| {
            let mut g = vec![0.0; q * q];
            for i in 0..q {
                for j in 0..=i {
                    let v = dot(&cols[i * m..(i + 1) * m], &cols[j * m..(j + 1) * m]) / m as f64;
                    g[i * q + j] = v;
                    g[j * q + i] = v;
                }
            }
            g
        });
        CdProblem { m, q, cols, curvature, gram }
    }

    fn col(&self, j: usize) -> &[f64] {
        &self.cols[j * self.m..(j + 1) * self.m]
    }

    /// `x_jᵀ r / m`
    fn gradient(&self, j: usize, resid: &[f64]) -> f64 {
        dot(self.col(j), resid) / self.m as f64
    }

    fn exact_gradients(&self, resid: &[f64]) -> Vec<f64> {
        (0..self.q).map(|j| self.gradient(j, resid)).collect()
    }

    pub(crate) fn objective(&self, resid: &[f64], beta: &[f64], lambda: f64) -> f64 {
        dot(resid, resid) / (2.0 * self.m as f64) + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
    }

    fn kkt_residual(grad: &[f64], beta: &[f64], lambda: f64) -> f64 {
        grad.iter()
            .zip(beta)
            .map(|(&g, &b)| if b != 0.0 { (g - lambda * b.signum()).abs() } else { (g.abs() - lambda).max(0.0) })
            .fold(0.0, f64::max)
    }

    /// KKT residual from tracked gradients when a Gram matrix is cached,
    /// from scratch otherwise.
    fn current_kkt(&self, pt: &mut Point<'_>, lambda: f64) -> f64 {
        if self.gram.is_none() {
            pt.grad = self.exact_gradients(pt.resid);
        }
        Self::kkt_residual(&pt.grad, pt.beta, lambda)
    }

    /// KKT residual with gradients recomputed from the residual vector.
    fn exact_kkt(&self, pt: &mut Point<'_>, lambda: f64) -> f64 {
        pt.grad = self.exact_gradients(pt.resid);
        Self::kkt_residual(&pt.grad, pt.beta, lambda)
    }

    fn shift(&self, j: usize, delta: f64, pt: &mut Point<'_>) {
        pt.beta[j] += delta;
        axpy(-delta, self.col(j), pt.resid);
        if let Some(g) = &self.gram {
            axpy(-delta, &g[j * self.q..(j + 1) * self.q], &mut pt.grad);
        }
    }

    fn sweep(&self, coords: impl Iterator<Item = usize>, pt: &mut Point<'_>, lambda: f64) -> f64 {
        let mut max_change: f64 = 0.0;
        for j in coords {
            let curv = self.curvature[j];
            if curv == 0.0 {
                continue;
            }
            let old = pt.beta[j];
            let g = if self.gram.is_some() { pt.grad[j] } else { self.gradient(j, pt.resid) };
            let new = soft_threshold(g + curv * old, lambda) / curv;
            if new != old {
                self.shift(j, new - old, pt);
                pt.beta[j] = new;
                max_change = max_change.max((new - old).abs() * curv.sqrt());
            }
        }
        max_change
    }

    /// Runs coordinate descent from the given start, updating `beta` and
    /// `resid` in place. `on_sweep` sees the coefficients after every
    /// sweep. Returns (sweeps, converged, kkt residual).
    pub(crate) fn solve(
        &self,
        lambda: f64,
        beta: &mut [f64],
        resid: &mut [f64],
        opts: SolverOptions,
        on_sweep: &mut dyn FnMut(&[f64], &[f64]),
    ) -> (usize, bool, f64) {
        let grad = self.exact_gradients(resid);
        let mut pt = Point { beta, resid, grad };
        let mut sweeps = 0;
        let mut kkt = Self::kkt_residual(&pt.grad, pt.beta, lambda);
        loop {
            if kkt <= opts.tol {
                // Tracked gradients drift; confirm against the residual.
                kkt = self.exact_kkt(&mut pt, lambda);
                if kkt <= opts.tol {
                    return (sweeps, true, kkt);
                }
            }
            if sweeps >= opts.max_iter {
                break;
            }
            self.sweep(0..self.q, &mut pt, lambda);
            sweeps += 1;
            on_sweep(pt.beta, pt.resid);
            let active: Vec<usize> = (0..self.q).filter(|&j| pt.beta[j] != 0.0).collect();
            let mut polish = |limit: usize, sweeps: &mut usize, pt: &mut Point<'_>| {
                for _ in 0..limit {
                    if active.is_empty() || *sweeps >= opts.max_iter {
                        break;
                    }
                    let change = self.sweep(active.iter().copied(), pt, lambda);
                    *sweeps += 1;
                    on_sweep(pt.beta, pt.resid);
                    if change <= opts.tol * 0.1 {
                        break;
                    }
                }
            };
            polish(QUICK_POLISH_SWEEPS, &mut sweeps, &mut pt);
            kkt = self.current_kkt(&mut pt, lambda);
            if kkt <= opts.tol {
                continue;
            }
            if self.sign_fixed_step(&active, &mut pt, lambda) {
                kkt = self.current_kkt(&mut pt, lambda);
                if kkt <= opts.tol {
                    continue;
                }
            }
            polish(POLISH_SWEEPS, &mut sweeps, &mut pt);
            kkt = self.current_kkt(&mut pt, lambda);
        }
        let kkt = self.exact_kkt(&mut pt, lambda);
        (sweeps, kkt <= opts.tol, kkt)
    }

    /// Exact minimizer of the objective over `β` supported on `active` with
    /// the current signs, by one Newton step on the smooth restricted problem.
    /// Applied only when every sign survives, so the objective cannot rise.
    fn sign_fixed_step(&self, active: &[usize], pt: &mut Point<'_>, lambda: f64) -> bool {
        let k = active.len();
        if k == 0 || k >= self.m {
            return false;
        }
        let m = self.m as f64;
        let mut gram = vec![0.0; k * k];
        for (a, &i) in active.iter().enumerate() {
            for (b, &j) in active.iter().enumerate().take(a + 1) {
                let v = match &self.gram {
                    Some(g) => g[i * self.q + j],
                    None => dot(self.col(i), self.col(j)) / m,
                };
                gram[a * k + b] = v;
                gram[b * k + a] = v;
            }
        }
        let mut step: Vec<f64> = active
            .iter()
            .map(|&j| {
                let g = if self.gram.is_some() { pt.grad[j] } else { self.gradient(j, pt.resid) };
                g - lambda * pt.beta[j].signum()
            })
            .collect();
        if !cholesky_solve(&mut gram, k, &mut step) {
            return false;
        }
        let consistent = active.iter().zip(&step).all(|(&j, &d)| {
            let new = pt.beta[j] + d;
            new.is_finite() && new != 0.0 && new.signum() == pt.beta[j].signum()
        });
        if !consistent {
            return false;
        }
        for (&j, &d) in active.iter().zip(&step) {
            self.shift(j, d, pt);
        }
        true
    }
}

/// Coefficients, residual and gradients `Xᵀr / m` of the current iterate.
struct Point<'a> {
    beta: &'a mut [f64],
    resid: &'a mut [f64],
    grad: Vec<f64>,
}

/// Solves `A x = b` in place for symmetric positive definite `A` (row-major,
/// overwritten by its Cholesky factor). False when `A` is not numerically
/// positive definite.
fn cholesky_solve(a: &mut [f64], k: usize, b: &mut [f64]) -> bool {
    for j in 0..k {
        let mut d = a[j * k + j];
        for t in 0..j {
            d -= a[j * k + t] * a[j * k + t];
        }
        if !(d > 1e-12 * a[j * k + j].abs().max(f64::MIN_POSITIVE)) {
            return false;
        }
        let d = d.sqrt();
        a[j * k + j] = d;
        for i in j + 1..k {
            let mut v = a[i * k + j];
            for t in 0..j {
                v -= a[i * k + t] * a[j * k + t];
            }
            a[i * k + j] = v / d;
        }
    }
    for i in 0..k {
        let mut v = b[i];
        for t in 0..i {
            v -= a[i * k + t] * b[t];
        }
        b[i] = v / a[i * k + i];
    }
    for i in (0..k).rev() {
        let mut v = b[i];
        for t in i + 1..k {
            v -= a[t * k + i] * b[t];
        }
        b[i] = v / a[i * k + i];
    }
    true
}

/// Inner product with four independent accumulators, which lets the
/// compiler vectorize the loop.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

fn check_shapes(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::Dimension(format!("X has {} rows, y has {}", x.nrows(), y.len())));
    }
    if x.nrows() == 0 {
        return Err(Error::InvalidInput("no observations".into()));
    }
    Ok(())
}

/// Lasso fit at a single λ from a zero start.
///
/// Non-convergence is not an error: the fit comes back with
/// `converged == false` and a warning is logged.
pub fn coordinate_descent(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    lambda: f64,
    tol: f64,
    max_iter: usize,
) -> Result<LassoFit> {
    coordinate_descent_traced(x, y, lambda, SolverOptions { tol, max_iter }, &mut |_| {})
}

/// As [`coordinate_descent`], reporting the objective after every sweep.
pub fn coordinate_descent_traced(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    lambda: f64,
    opts: SolverOptions,
    on_objective: &mut dyn FnMut(f64),
) -> Result<LassoFit> {
    check_shapes(x, y)?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidInput(format!("lambda must be finite and nonnegative, got {lambda}")));
    }
    let problem = CdProblem::new(x);
    let mut beta = vec![0.0; x.ncols()];
    let mut resid = y.to_vec();
    let (iterations, converged, kkt_residual) =
        problem.solve(lambda, &mut beta, &mut resid, opts, &mut |b, r| on_objective(problem.objective(r, b, lambda)));
    if !converged {
        log::warn!("coordinate descent stopped after {iterations} sweeps at lambda={lambda} (KKT residual {kkt_residual:e})");
    }
    Ok(LassoFit { coefficients: Array1::from(beta), lambda, intercept: None, iterations, converged, kkt_residual })
}

/// `max_j |x_jᵀ y| / m`, the smallest λ with an all-zero solution.
pub fn lambda_max(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> f64 {
    let m = x.nrows() as f64;
    x.axis_iter(Axis(1)).map(|col| col.dot(&y).abs() / m).fold(0.0, f64::max)
}

/// Descending log-spaced grid from `λ_max` down to `ratio · λ_max`.
pub fn lambda_grid(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, count: usize, ratio: f64) -> Result<Vec<f64>> {
    check_shapes(x, y)?;
    if count == 0 {
        return Err(Error::InvalidInput("lambda grid needs at least one value".into()));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidInput(format!("lambda ratio must lie in (0, 1), got {ratio}")));
    }
    let top = lambda_max(x, y);
    if !(top > 0.0) || !top.is_finite() {
        return Err(Error::DegenerateResponse("response is orthogonal to every covariate".into()));
    }
    if count == 1 {
        return Ok(vec![top]);
    }
    let step = ratio.ln() / (count - 1) as f64;
    let mut grid: Vec<f64> = (0..count).map(|k| top * (step * k as f64).exp()).collect();
    grid[count - 1] = top * ratio;
    Ok(grid)
}

/// Centering and unit-variance scaling learned on a set of rows.
#[derive(Debug, Clone)]
pub struct Standardizer {
    pub means: Array1<f64>,
    /// Population standard deviations; zero marks a column constant on the
    /// fitted rows, which is then held at zero.
    pub scales: Array1<f64>,
    pub y_mean: f64,
}

impl Standardizer {
    pub fn fit(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> Self {
        let m = x.nrows() as f64;
        let means = x.mean_axis(Axis(0)).expect("nonempty rows");
        let scales = Array1::from_iter(x.axis_iter(Axis(1)).zip(means.iter()).map(|(col, mu)| {
            let var = col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / m;
            let sd = var.sqrt();
            // Treat round-off level spread as constant.
            if sd > 1e-12 * (1.0 + mu.abs()) { sd } else { 0.0 }
        }));
        let y_mean = y.mean().expect("nonempty response");
        Standardizer { means, scales, y_mean }
    }

    pub fn transform_x(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = x.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (mu, s) = (self.means[j], self.scales[j]);
            if s == 0.0 {
                col.fill(0.0);
            } else {
                col.mapv_inplace(|v| (v - mu) / s);
            }
        }
        out
    }

    pub fn transform_y(&self, y: ArrayView1<'_, f64>) -> Array1<f64> {
        y.mapv(|v| v - self.y_mean)
    }

    /// Prediction on the original scale from standardized-scale coefficients.
    pub fn predict(&self, x_row: ArrayView1<'_, f64>, beta: &[f64]) -> f64 {
        let mut out = self.y_mean;
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 && self.scales[j] != 0.0 {
                out += b * (x_row[j] - self.means[j]) / self.scales[j];
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvSelection {
    pub lambda: f64,
    pub index: usize,
    /// Mean out-of-fold squared prediction error per grid value.
    pub errors: Vec<f64>,
}

/// Picks the grid value with the smallest K-fold cross-validated squared
/// prediction error. Each training fold is re-standardized and fitted along
/// the grid with warm starts. Ties go to the larger λ.
pub fn cv_select_lambda(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    folds: usize,
    grid: &[f64],
    seed: u64,
    opts: SolverOptions,
) -> Result<CvSelection> {
    check_shapes(x, y)?;
    let m = x.nrows();
    if folds < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 folds, got {folds}")));
    }
    if m < folds {
        return Err(Error::InvalidInput(format!("{m} observations cannot fill {folds} folds")));
    }
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty lambda grid".into()));
    }

    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut substream(seed, Domain::CrossValidation, 0));
    let mut fold_of = vec![0; m];
    for (pos, &row) in order.iter().enumerate() {
        fold_of[row] = pos % folds;
    }

    let mut sse = vec![0.0; grid.len()];
    let mut nonconverged = 0usize;
    for k in 0..folds {
        let train: Vec<usize> = (0..m).filter(|&i| fold_of[i] != k).collect();
        let test: Vec<usize> = (0..m).filter(|&i| fold_of[i] == k).collect();
        let x_train = x.select(Axis(0), &train);
        let y_train = y.select(Axis(0), &train);
        let st = Standardizer::fit(x_train.view(), y_train.view());
        let xs = st.transform_x(x_train.view());
        let ys = st.transform_y(y_train.view());
        let problem = CdProblem::new(xs.view());
        let mut beta = vec![0.0; x.ncols()];
        let mut resid = ys.to_vec();
        for (g, &lambda) in grid.iter().enumerate() {
            let (_, converged, _) = problem.solve(lambda, &mut beta, &mut resid, opts, &mut |_, _| {});
            nonconverged += !converged as usize;
            for &i in &test {
                let err = y[i] - st.predict(x.row(i), &beta);
                sse[g] += err * err;
            }
        }
    }
    if nonconverged > 0 {
        log::warn!("cross-validation: {nonconverged} path fits did not converge");
    }
    let errors: Vec<f64> = sse.iter().map(|s| s / m as f64).collect();
    let mut index = 0;
    for (g, &e) in errors.iter().enumerate() {
        if e < errors[index] {
            index = g;
        }
    }
    Ok(CvSelection { lambda: grid[index], index, errors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
    }

    #[test]
    fn above_lambda_max_gives_zero() {
        let x = array![[1.0, 0.5], [-1.0, 2.0], [0.3, -1.0], [2.0, 0.0]];
        let y = array![1.0, -2.0, 0.5, 1.5];
        let top = lambda_max(x.view(), y.view());
        let fit = coordinate_descent(x.view(), y.view(), top, 1e-10, 1000).unwrap();
        assert!(fit.coefficients.iter().all(|&b| b == 0.0));
        assert!(fit.converged);
        assert_eq!(fit.iterations, 0);
    }

    #[test]
    fn zero_lambda_recovers_least_squares() {
        let x = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, -1.0], [0.5, 0.5]];
        let beta = [1.5, -0.5];
        let y = x.dot(&array![beta[0], beta[1]]) + array![0.01, -0.02, 0.0, 0.01, 0.005];
        let fit = coordinate_descent(x.view(), y.view(), 0.0, 1e-12, 100_000).unwrap();
        // Normal equations solved by hand for the 2x2 case.
        let g = x.t().dot(&x);
        let b = x.t().dot(&y);
        let det = g[[0, 0]] * g[[1, 1]] - g[[0, 1]] * g[[1, 0]];
        let ls = [(g[[1, 1]] * b[0] - g[[0, 1]] * b[1]) / det, (g[[0, 0]] * b[1] - g[[1, 0]] * b[0]) / det];
        assert!(fit.converged);
        for j in 0..2 {
            assert!((fit.coefficients[j] - ls[j]).abs() < 1e-9);
        }
    }

    #[test]
    fn grid_endpoints_and_monotone() {
        let x = array![[1.0, 0.5], [-1.0, 2.0], [0.3, -1.0], [2.0, 0.0]];
        let y = array![1.0, -2.0, 0.5, 1.5];
        let top = lambda_max(x.view(), y.view());
        assert_eq!(lambda_grid(x.view(), y.view(), 2, 1e-3).unwrap(), vec![top, top * 1e-3]);
        let grid = lambda_grid(x.view(), y.view(), 100, 1e-3).unwrap();
        assert_eq!(grid.len(), 100);
        assert!(grid.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn orthogonal_response_is_degenerate() {
        let x = array![[1.0], [1.0], [-1.0], [-1.0]];
        let y = array![1.0, -1.0, 1.0, -1.0];
        assert!(matches!(lambda_grid(x.view(), y.view(), 10, 1e-3), Err(Error::DegenerateResponse(_))));
        let zeros = Array1::zeros(4);
        assert!(lambda_grid(x.view(), zeros.view(), 10, 1e-3).is_err());
    }

    #[test]
    fn cv_rejects_too_few_rows() {
        let x = array![[1.0], [2.0], [3.0]];
        let y = array![1.0, 2.0, 3.0];
        assert!(cv_select_lambda(x.view(), y.view(), 10, &[1.0], 0, SolverOptions::default()).is_err());
    }

    #[test]
    fn standardizer_round_trip_prediction() {
        let x = array![[1.0, 10.0], [2.0, 10.0], [3.0, 10.0], [4.0, 10.0]];
        let y = array![2.0, 4.0, 6.0, 8.0];
        let st = Standardizer::fit(x.view(), y.view());
        assert_eq!(st.scales[1], 0.0);
        let xs = st.transform_x(x.view());
        assert!(xs.column(1).iter().all(|&v| v == 0.0));
        let s0 = st.scales[0];
        // y = 2 x0 → slope on the standardized scale is 2 * sd(x0).
        let pred = st.predict(x.row(2), &[2.0 * s0, 0.0]);
        assert!((pred - 6.0).abs() < 1e-12);
    }
}
