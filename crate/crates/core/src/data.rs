use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Class label: 0 = healthy, 1 = PD.
pub type Label = u8;

#[derive(Debug, Error, PartialEq)]
pub enum MatrixError {
    #[error("{columns} column names for a matrix with {width} columns")]
    ColumnCount { columns: usize, width: usize },
    #[error("{labels} labels for a matrix with {rows} rows")]
    LabelCount { labels: usize, rows: usize },
    #[error("label {0} is not 0 or 1")]
    BadLabel(Label),
}

/// Column-named dense matrix with an aligned label vector.
///
/// Every fitting and training routine in the crate consumes this type, so the
/// column names travel with the numbers through scaling and projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    columns: Vec<String>,
    values: Array2<f64>,
    labels: Vec<Label>,
}

impl FeatureMatrix {
    pub fn new(
        columns: Vec<String>,
        values: Array2<f64>,
        labels: Vec<Label>,
    ) -> Result<Self, MatrixError> {
        if columns.len() != values.ncols() {
            return Err(MatrixError::ColumnCount {
                columns: columns.len(),
                width: values.ncols(),
            });
        }
        if labels.len() != values.nrows() {
            return Err(MatrixError::LabelCount {
                labels: labels.len(),
                rows: values.nrows(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
            return Err(MatrixError::BadLabel(bad));
        }
        Ok(Self {
            columns,
            values,
            labels,
        })
    }

    /// Matrix with generated column names `x0, x1, ...`.
    pub fn from_values(values: Array2<f64>, labels: Vec<Label>) -> Result<Self, MatrixError> {
        let columns = (0..values.ncols()).map(|j| format!("x{j}")).collect();
        Self::new(columns, values, labels)
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.row(i)
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.values.column(j)
    }

    /// Rows at `indices`, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            columns: self.columns.clone(),
            values: self.values.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Same labels, new values and names. Used by transformers.
    pub(crate) fn with_values(&self, columns: Vec<String>, values: Array2<f64>) -> FeatureMatrix {
        debug_assert_eq!(values.nrows(), self.labels.len());
        debug_assert_eq!(values.ncols(), columns.len());
        FeatureMatrix {
            columns,
            values,
            labels: self.labels.clone(),
        }
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let positives = self.labels.iter().filter(|&&l| l == 1).count();
        [self.labels.len() - positives, positives]
    }

    pub fn into_parts(self) -> (Vec<String>, Array2<f64>, Vec<Label>) {
        (self.columns, self.values, self.labels)
    }
}
