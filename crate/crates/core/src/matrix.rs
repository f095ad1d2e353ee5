//! Domain types shared by the solver, the baselines and the experiment harness.
//!
//! All matrices are dense `f64` grids. `DataMatrix` holds the non-negative input
//! `V` (m dimensions by n data points), `FactorPair` the factors `W` (m×r) and
//! `H` (r×n), and `ResidualMatrix` the correction `E = V − W·H`.

use ndarray::{Array2, ArrayView2, Zip};

use crate::distfit::{GammaParams, GaussianParams};
use crate::error::{Error, Result};

/// A validated non-negative data matrix with optional labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Array2<f64>,
    row_labels: Option<Vec<String>>,
    col_labels: Option<Vec<String>>,
}

impl DataMatrix {
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn row_labels(&self) -> Option<&[String]> {
        self.row_labels.as_deref()
    }

    pub fn col_labels(&self) -> Option<&[String]> {
        self.col_labels.as_deref()
    }

    /// Attach labels. Lengths must match the matrix shape.
    pub fn with_labels(
        mut self,
        row_labels: Option<Vec<String>>,
        col_labels: Option<Vec<String>>,
    ) -> Result<Self> {
        if let Some(labels) = &row_labels {
            if labels.len() != self.rows() {
                return Err(Error::ShapeMismatch {
                    expected: (self.rows(), 1),
                    found: (labels.len(), 1),
                });
            }
        }
        if let Some(labels) = &col_labels {
            if labels.len() != self.cols() {
                return Err(Error::ShapeMismatch {
                    expected: (1, self.cols()),
                    found: (1, labels.len()),
                });
            }
        }
        self.row_labels = row_labels;
        self.col_labels = col_labels;
        Ok(self)
    }

    /// Swap rows and columns, labels included.
    pub fn transposed(&self) -> DataMatrix {
        DataMatrix {
            values: self.values.t().to_owned(),
            row_labels: self.col_labels.clone(),
            col_labels: self.row_labels.clone(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.values.mean().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Check that every entry is finite and non-negative.
///
/// Zeros are legal input data; the solver floors the factors, not `V`.
pub fn validate_nonneg(matrix: Array2<f64>) -> Result<DataMatrix> {
    if matrix.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    for ((row, col), &value) in matrix.indexed_iter() {
        if !value.is_finite() {
            return Err(Error::NonFiniteEntry { row, col });
        }
        if value < 0.0 {
            return Err(Error::NegativeEntry { row, col, value });
        }
    }
    Ok(DataMatrix {
        values: matrix,
        row_labels: None,
        col_labels: None,
    })
}

/// The factors `W` (m×r) and `H` (r×n).
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair {
    pub w: Array2<f64>,
    pub h: Array2<f64>,
}

impl FactorPair {
    /// Pair two factors, checking that the inner dimensions agree and that
    /// every entry is finite and non-negative.
    pub fn new(w: Array2<f64>, h: Array2<f64>) -> Result<Self> {
        if w.ncols() != h.nrows() {
            return Err(Error::ShapeMismatch {
                expected: (w.ncols(), h.ncols()),
                found: h.dim(),
            });
        }
        if w.is_empty() || h.is_empty() {
            return Err(Error::EmptyMatrix);
        }
        for m in [&w, &h] {
            for ((row, col), &value) in m.indexed_iter() {
                if !value.is_finite() {
                    return Err(Error::NonFiniteEntry { row, col });
                }
                if value < 0.0 {
                    return Err(Error::NegativeEntry { row, col, value });
                }
            }
        }
        Ok(FactorPair { w, h })
    }

    pub fn rank(&self) -> usize {
        self.w.ncols()
    }

    /// Shape of the product `W·H`.
    pub fn product_shape(&self) -> (usize, usize) {
        (self.w.nrows(), self.h.ncols())
    }

    pub fn product(&self) -> Array2<f64> {
        self.w.dot(&self.h)
    }

    /// True when the rank is not small compared to the data shape.
    pub fn rank_is_large(&self) -> bool {
        let (m, n) = self.product_shape();
        self.rank() >= m.min(n)
    }

    pub fn check_against(&self, shape: (usize, usize)) -> Result<()> {
        if self.product_shape() != shape {
            return Err(Error::ShapeMismatch {
                expected: shape,
                found: self.product_shape(),
            });
        }
        Ok(())
    }

    pub fn min_entry(&self) -> f64 {
        self.w
            .iter()
            .chain(self.h.iter())
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// The correction matrix `E = V − W·H`. Entries may be negative.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualMatrix(pub Array2<f64>);

impl ResidualMatrix {
    pub fn values(&self) -> &Array2<f64> {
        &self.0
    }
}

/// Fitted code-length model: gamma for `W` and `H`, Gaussian for `E`, and the
/// precision `delta` (bin width in data units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodeModel {
    pub gamma_w: GammaParams,
    pub gamma_h: GammaParams,
    pub gauss_e: GaussianParams,
    pub delta: f64,
}

/// Code length in bits, split by matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescriptionLength {
    pub l_w: f64,
    pub l_h: f64,
    pub l_e: f64,
    pub total: f64,
}

impl DescriptionLength {
    pub fn new(l_w: f64, l_h: f64, l_e: f64) -> Self {
        DescriptionLength {
            l_w,
            l_h,
            l_e,
            total: l_w + l_h + l_e,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.total.is_finite()
    }
}

/// One solver iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub objective: f64,
    pub l_w: f64,
    pub l_h: f64,
    pub l_e: f64,
    pub frobenius_error: f64,
    pub learning_rate_w: f64,
    pub learning_rate_h: f64,
    pub accepted: bool,
}

/// Per-iteration history of a solve. Record 0 is the initial state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    pub records: Vec<TraceRecord>,
}

impl RunTrace {
    pub fn push(&mut self, record: TraceRecord) {
        debug_assert!(self
            .records
            .last()
            .is_none_or(|last| last.iteration < record.iteration));
        self.records.push(record);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn accepted(&self) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter().filter(|r| r.accepted)
    }

    pub fn accepted_count(&self) -> usize {
        self.accepted().count()
    }

    pub fn rejected_count(&self) -> usize {
        self.records.len() - self.accepted_count()
    }
}

/// Squared Frobenius distance `Σ (A_ij − B_ij)²`.
pub fn frobenius_sq(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::ShapeMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let mut sum = 0.0;
    Zip::from(a).and(b).for_each(|&x, &y| {
        let d = x - y;
        sum += d * d;
    });
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn accepts_positive_and_zero_matrices() {
        let m = validate_nonneg(array![[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(m.shape(), (2, 2));
        assert!(validate_nonneg(array![[0.0, 0.0], [0.0, 0.0]]).is_ok());
    }

    #[test]
    fn rejects_negative_and_nonfinite() {
        assert_eq!(
            validate_nonneg(array![[1.0, -0.1]]),
            Err(Error::NegativeEntry {
                row: 0,
                col: 1,
                value: -0.1
            })
        );
        assert_eq!(
            validate_nonneg(array![[1.0], [f64::NAN]]),
            Err(Error::NonFiniteEntry { row: 1, col: 0 })
        );
        assert_eq!(
            validate_nonneg(Array2::zeros((0, 3))),
            Err(Error::EmptyMatrix)
        );
    }

    #[test]
    fn frobenius_hand_values() {
        let a = array![[1.0, 0.0]];
        let b = array![[0.0, 1.0]];
        assert_eq!(frobenius_sq(&a.view(), &b.view()).unwrap(), 2.0);
        assert_eq!(frobenius_sq(&a.view(), &a.view()).unwrap(), 0.0);
        assert!(matches!(
            frobenius_sq(&a.view(), &array![[1.0], [2.0]].view()),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn frobenius_matches_double_loop() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let a: Array2<f64> = Array2::from_shape_fn((6, 5), |_| rng.random_range(-3.0..3.0));
        let b: Array2<f64> = Array2::from_shape_fn((6, 5), |_| rng.random_range(-3.0..3.0));
        let mut oracle = 0.0f64;
        for i in 0..6 {
            for j in 0..5 {
                oracle += (a[[i, j]] - b[[i, j]]).powi(2);
            }
        }
        let got = frobenius_sq(&a.view(), &b.view()).unwrap();
        assert!((got - oracle).abs() <= 1e-12 * oracle);
    }

    #[test]
    fn description_length_total_is_sum() {
        let dl = DescriptionLength::new(1.5, 2.25, 3.0);
        assert_eq!(dl.total, 1.5 + 2.25 + 3.0);
    }

    #[test]
    fn factor_pair_shape_checks() {
        let w = Array2::<f64>::ones((4, 2));
        let h = Array2::<f64>::ones((3, 5));
        assert!(matches!(
            FactorPair::new(w.clone(), h),
            Err(Error::ShapeMismatch { .. })
        ));
        let pair = FactorPair::new(w, Array2::ones((2, 5))).unwrap();
        assert_eq!(pair.rank(), 2);
        assert_eq!(pair.product_shape(), (4, 5));
        assert!(!pair.rank_is_large());
    }

    #[test]
    fn labels_follow_transpose() {
        let m = validate_nonneg(array![[1.0, 2.0, 3.0]])
            .unwrap()
            .with_labels(
                Some(vec!["r".into()]),
                Some(vec!["a".into(), "b".into(), "c".into()]),
            )
            .unwrap();
        let t = m.transposed();
        assert_eq!(t.shape(), (3, 1));
        assert_eq!(t.row_labels().unwrap().len(), 3);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn grid() -> impl Strategy<Value = (Array2<f64>, Array2<f64>)> {
            (1usize..6, 1usize..6).prop_flat_map(|(m, n)| {
                (
                    proptest::collection::vec(-1e3..1e3f64, m * n),
                    proptest::collection::vec(-1e3..1e3f64, m * n),
                )
                    .prop_map(move |(a, b)| {
                        (
                            Array2::from_shape_vec((m, n), a).unwrap(),
                            Array2::from_shape_vec((m, n), b).unwrap(),
                        )
                    })
            })
        }

        proptest! {
            #[test]
            fn frobenius_symmetric_and_nonnegative((a, b) in grid()) {
                let ab = frobenius_sq(&a.view(), &b.view()).unwrap();
                let ba = frobenius_sq(&b.view(), &a.view()).unwrap();
                prop_assert_eq!(ab, ba);
                prop_assert!(ab >= 0.0);
                prop_assert_eq!(ab == 0.0, a == b);
            }

            #[test]
            fn validation_iff_nonnegative((a, _b) in grid()) {
                let ok = a.iter().all(|&x| x >= 0.0);
                prop_assert_eq!(validate_nonneg(a).is_ok(), ok);
            }
        }
    }
}
