use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Response vector and design matrix of a linear model `y = X β + ε`.
///
/// Construction validates the data: all entries finite, `n >= 4`, `p >= 1`
/// and every covariate with nonzero sample variance.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: Array2<f64>,
    y: Array1<f64>,
    names: Option<Vec<String>>,
}

impl Dataset {
    pub const MIN_SAMPLES: usize = 4;

    pub fn new(x: Array2<f64>, y: Array1<f64>) -> Result<Self> {
        Self::build(x, y, None)
    }

    pub fn with_names(x: Array2<f64>, y: Array1<f64>, names: Vec<String>) -> Result<Self> {
        if names.len() != x.ncols() {
            return Err(Error::Dimension(format!(
                "{} column names for {} covariates",
                names.len(),
                x.ncols()
            )));
        }
        Self::build(x, y, Some(names))
    }

    fn build(x: Array2<f64>, y: Array1<f64>, names: Option<Vec<String>>) -> Result<Self> {
        let (n, p) = x.dim();
        if y.len() != n {
            return Err(Error::Dimension(format!("response has {} rows, design has {n}", y.len())));
        }
        if n < Self::MIN_SAMPLES {
            return Err(Error::InvalidInput(format!(
                "need at least {} observations, got {n}",
                Self::MIN_SAMPLES
            )));
        }
        if p == 0 {
            return Err(Error::InvalidInput("design matrix has no columns".into()));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite response at row {i}")));
        }
        for (j, col) in x.axis_iter(Axis(1)).enumerate() {
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "non-finite entry in column {}",
                    column_label(names.as_deref(), j)
                )));
            }
            if !has_variance(col) {
                return Err(Error::ConstantColumn {
                    index: j,
                    name: column_label(names.as_deref(), j),
                });
            }
        }
        Ok(Dataset { x, y, names })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    pub fn y(&self) -> ArrayView1<'_, f64> {
        self.y.view()
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    pub fn column_name(&self, j: usize) -> String {
        column_label(self.names.as_deref(), j)
    }
}

fn column_label(names: Option<&[String]>, j: usize) -> String {
    match names {
        Some(names) => names[j].clone(),
        None => format!("x{j}"),
    }
}

pub(crate) fn has_variance(col: ArrayView1<'_, f64>) -> bool {
    let first = col[0];
    col.iter().any(|&v| v != first)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn accepts_valid_data() {
        let x = array![[1.0, 2.0], [2.0, 1.0], [3.0, 5.0], [4.0, 0.0]];
        let y = array![1.0, 2.0, 3.0, 4.0];
        let d = Dataset::new(x, y).unwrap();
        assert_eq!((d.n(), d.p()), (4, 2));
        assert_eq!(d.column_name(1), "x1");
    }

    #[test]
    fn rejects_constant_column_by_name() {
        let x = array![[1.0, 2.0], [2.0, 2.0], [3.0, 2.0], [4.0, 2.0]];
        let y = array![1.0, 2.0, 3.0, 4.0];
        let err = Dataset::with_names(x, y, vec!["a".into(), "b".into()]).unwrap_err();
        match err {
            Error::ConstantColumn { index, name } => assert_eq!((index, name.as_str()), (1, "b")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_small_n_and_nan() {
        let x = array![[1.0], [2.0], [3.0]];
        assert!(Dataset::new(x, array![1.0, 2.0, 3.0]).is_err());
        let x = array![[1.0], [2.0], [3.0], [f64::NAN]];
        assert!(Dataset::new(x, array![1.0, 2.0, 3.0, 4.0]).is_err());
        let x = array![[1.0], [2.0], [3.0], [4.0]];
        assert!(Dataset::new(x, array![1.0, 2.0, f64::INFINITY, 4.0]).is_err());
    }
}
