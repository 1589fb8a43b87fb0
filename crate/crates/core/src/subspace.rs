//! Regularized canonical correlation analysis between the clean-word view
//! and the corrupted-candidate view.
//!
//! `fit` whitens each view's regularized covariance through a symmetric
//! eigendecomposition and takes the singular decomposition of the whitened
//! cross-covariance. This is numerically stabler at PHOC dimensions than
//! solving the nonsymmetric generalized eigenproblem directly. The returned
//! projections satisfy the whitening constraint in its summed form: over the
//! training columns, sum_i (Wx' xc_i)(Wx' xc_i)' = I when lambda = 0.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Eigenvalues of the regularized covariance below this fraction of the
/// largest one are clamped (with a warning) instead of failing the fit.
const EIGENVALUE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum View {
    GroundTruth,
    Candidate,
}

impl std::fmt::Display for View {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            View::GroundTruth => write!(f, "ground-truth view (X)"),
            View::Candidate => write!(f, "candidate view (Y)"),
        }
    }
}

#[derive(Debug, Error)]
pub enum CcaError {
    #[error("training requires at least two pairs, got {0}")]
    NotEnoughPairs(usize),
    #[error("views disagree: X is {x_rows}x{x_cols}, Y is {y_rows}x{y_cols}")]
    ViewShapeMismatch {
        x_rows: usize,
        x_cols: usize,
        y_rows: usize,
        y_cols: usize,
    },
    #[error("regularization must be non-negative, got {0}")]
    NegativeLambda(f64),
    #[error("projection dimension {p} outside 1..={max}")]
    BadProjectionDim { p: usize, max: usize },
    #[error("{view} has a singular covariance; supply lambda > 0")]
    IllConditioned { view: View },
    #[error("vector has dimension {got}, model expects {expected}")]
    DimensionMismatch { got: usize, expected: usize },
}

/// Paired training views, one column per pair. Duplicate pairs are retained:
/// frequent words legitimately weigh more.
#[derive(Debug, Clone)]
pub struct TrainingPairSet {
    x: DMatrix<f64>,
    y: DMatrix<f64>,
}

impl TrainingPairSet {
    pub fn new(x: DMatrix<f64>, y: DMatrix<f64>) -> Result<Self, CcaError> {
        if x.nrows() != y.nrows() || x.ncols() != y.ncols() {
            return Err(CcaError::ViewShapeMismatch {
                x_rows: x.nrows(),
                x_cols: x.ncols(),
                y_rows: y.nrows(),
                y_cols: y.ncols(),
            });
        }
        if x.ncols() < 2 {
            return Err(CcaError::NotEnoughPairs(x.ncols()));
        }
        Ok(Self { x, y })
    }

    /// Assemble from paired dense vectors (ground truth, candidate).
    pub fn from_columns(pairs: &[(Vec<f64>, Vec<f64>)]) -> Result<Self, CcaError> {
        if pairs.len() < 2 {
            return Err(CcaError::NotEnoughPairs(pairs.len()));
        }
        let d = pairs[0].0.len();
        for (gx, cy) in pairs {
            if gx.len() != d || cy.len() != d {
                return Err(CcaError::ViewShapeMismatch {
                    x_rows: d,
                    x_cols: pairs.len(),
                    y_rows: gx.len().max(cy.len()),
                    y_cols: pairs.len(),
                });
            }
        }
        let x = DMatrix::from_fn(d, pairs.len(), |r, c| pairs[c].0[r]);
        let y = DMatrix::from_fn(d, pairs.len(), |r, c| pairs[c].1[r]);
        Self::new(x, y)
    }

    pub fn dimension(&self) -> usize {
        self.x.nrows()
    }

    pub fn len(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.x.ncols() == 0
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }
}

/// Fitted projection pair with training means. Immutable once fitted.
#[derive(Debug, Clone, PartialEq)]
pub struct CcaModel {
    wx: DMatrix<f64>,
    wy: DMatrix<f64>,
    mean_x: DVector<f64>,
    mean_y: DVector<f64>,
    lambda: f64,
    p: usize,
}

/// A fitted model together with its canonical correlations, sorted
/// non-increasing. Correlations are reported at fit time only and are not
/// persisted with the model.
#[derive(Debug, Clone)]
pub struct CcaFit {
    pub model: CcaModel,
    pub correlations: Vec<f64>,
}

impl CcaModel {
    /// Identity projection: Wx = Wy = I, zero means. Used when an index is
    /// built without a trained model.
    pub fn identity(d: usize) -> Self {
        Self {
            wx: DMatrix::identity(d, d),
            wy: DMatrix::identity(d, d),
            mean_x: DVector::zeros(d),
            mean_y: DVector::zeros(d),
            lambda: 0.0,
            p: d,
        }
    }

    pub fn from_parts(
        wx: DMatrix<f64>,
        wy: DMatrix<f64>,
        mean_x: DVector<f64>,
        mean_y: DVector<f64>,
        lambda: f64,
    ) -> Self {
        let p = wx.ncols();
        Self {
            wx,
            wy,
            mean_x,
            mean_y,
            lambda,
            p,
        }
    }

    pub fn input_dimension(&self) -> usize {
        self.wx.nrows()
    }

    pub fn projection_dimension(&self) -> usize {
        self.p
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn wx(&self) -> &DMatrix<f64> {
        &self.wx
    }

    pub fn wy(&self) -> &DMatrix<f64> {
        &self.wy
    }

    pub fn mean_x(&self) -> &DVector<f64> {
        &self.mean_x
    }

    pub fn mean_y(&self) -> &DVector<f64> {
        &self.mean_y
    }

    /// Project a query-view vector: Wx' (v - mean_x).
    pub fn project_query(&self, v: &[f64]) -> Result<DVector<f64>, CcaError> {
        if v.len() != self.wx.nrows() {
            return Err(CcaError::DimensionMismatch {
                got: v.len(),
                expected: self.wx.nrows(),
            });
        }
        let centered = DVector::from_column_slice(v) - &self.mean_x;
        Ok(self.wx.tr_mul(&centered))
    }

    /// Project a single candidate-view vector: Wy' (v - mean_y).
    pub fn project_candidate(&self, v: &[f64]) -> Result<DVector<f64>, CcaError> {
        if v.len() != self.wy.nrows() {
            return Err(CcaError::DimensionMismatch {
                got: v.len(),
                expected: self.wy.nrows(),
            });
        }
        let centered = DVector::from_column_slice(v) - &self.mean_y;
        Ok(self.wy.tr_mul(&centered))
    }

    /// Project a batch of candidate-view column vectors. Columns are
    /// projected one at a time so the result is bit-identical to
    /// [`CcaModel::project_candidate`] on each column.
    pub fn project_candidates(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>, CcaError> {
        if m.nrows() != self.wy.nrows() {
            return Err(CcaError::DimensionMismatch {
                got: m.nrows(),
                expected: self.wy.nrows(),
            });
        }
        let mut out = DMatrix::zeros(self.p, m.ncols());
        for j in 0..m.ncols() {
            let col = self.project_candidate(m.column(j).as_slice())?;
            out.set_column(j, &col);
        }
        Ok(out)
    }
}

/// Default projection dimension: keep every direction the data can support.
pub fn default_projection_dim(d: usize, pair_count: usize) -> usize {
    d.min(pair_count.saturating_sub(1)).max(1)
}

/// Fit regularized CCA on the given pairs.
///
/// `lambda` is added to each view's covariance (scatter / (n-1)) before
/// whitening; it must be positive when the covariance is rank-deficient.
/// Signs are fixed so the first nonzero coefficient of each Wx column is
/// positive, making the fit bit-stable across runs.
pub fn fit(pairs: &TrainingPairSet, lambda: f64, p: usize) -> Result<CcaFit, CcaError> {
    let d = pairs.dimension();
    let n = pairs.len();
    if lambda < 0.0 {
        return Err(CcaError::NegativeLambda(lambda));
    }
    if p == 0 || p > d {
        return Err(CcaError::BadProjectionDim { p, max: d });
    }

    let scale = 1.0 / (n as f64 - 1.0);
    let mean_x = pairs.x.column_mean();
    let mean_y = pairs.y.column_mean();
    let mut xc = pairs.x.clone();
    let mut yc = pairs.y.clone();
    for j in 0..n {
        let mut col = xc.column_mut(j);
        col -= &mean_x;
        let mut col = yc.column_mut(j);
        col -= &mean_y;
    }

    let mut cxx = &xc * xc.transpose();
    let mut cyy = &yc * yc.transpose();
    cxx.scale_mut(scale);
    cyy.scale_mut(scale);
    for i in 0..d {
        cxx[(i, i)] += lambda;
        cyy[(i, i)] += lambda;
    }

    let kx = inverse_sqrt(cxx, lambda, View::GroundTruth)?;
    let ky = inverse_sqrt(cyy, lambda, View::Candidate)?;

    let mut cxy = &xc * yc.transpose();
    cxy.scale_mut(scale);
    let whitened = &kx * cxy * &ky;

    let svd = whitened.svd(true, true);
    let u = svd.u.expect("svd requested u");
    let vt = svd.v_t.expect("svd requested v_t");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap()
            .then(a.cmp(&b))
    });

    let mut correlations = Vec::with_capacity(p);
    let mut a = DMatrix::zeros(d, p);
    let mut b = DMatrix::zeros(d, p);
    for (out_col, &idx) in order.iter().take(p).enumerate() {
        correlations.push(svd.singular_values[idx].clamp(0.0, 1.0));
        a.set_column(out_col, &u.column(idx));
        b.set_column(out_col, &vt.row(idx).transpose());
    }

    // Whitening maps the covariance to I; dividing by sqrt(n-1) turns that
    // into the summed constraint sum_i z_i z_i' = I used by the tests.
    let mut wx = &kx * a;
    let mut wy = &ky * b;
    wx.scale_mut((1.0 / (n as f64 - 1.0)).sqrt());
    wy.scale_mut((1.0 / (n as f64 - 1.0)).sqrt());

    for j in 0..p {
        let col = wx.column(j);
        let max_abs = col.amax();
        if max_abs == 0.0 {
            continue;
        }
        let first_nonzero = col.iter().find(|v| v.abs() > EIGENVALUE_FLOOR * max_abs);
        if let Some(&v) = first_nonzero {
            if v < 0.0 {
                wx.column_mut(j).neg_mut();
                wy.column_mut(j).neg_mut();
            }
        }
    }

    Ok(CcaFit {
        model: CcaModel {
            wx,
            wy,
            mean_x,
            mean_y,
            lambda,
            p,
        },
        correlations,
    })
}

/// Symmetric inverse square root of a regularized covariance matrix.
fn inverse_sqrt(cov: DMatrix<f64>, lambda: f64, view: View) -> Result<DMatrix<f64>, CcaError> {
    let d = cov.nrows();
    let eig = cov.symmetric_eigen();
    let max_eig = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    if max_eig <= 0.0 {
        return Err(CcaError::IllConditioned { view });
    }
    let floor = EIGENVALUE_FLOOR * max_eig;
    if lambda == 0.0 && eig.eigenvalues.iter().any(|&v| v <= floor) {
        return Err(CcaError::IllConditioned { view });
    }
    let mut clamped = 0usize;
    let inv_sqrt: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&v| {
            let v = if v < floor {
                clamped += 1;
                floor
            } else {
                v
            };
            1.0 / v.sqrt()
        })
        .collect();
    if clamped > 0 {
        log::warn!("{view}: clamped {clamped} near-zero eigenvalues despite regularization");
    }
    let mut scaled = eig.eigenvectors.clone();
    for j in 0..d {
        scaled.column_mut(j).scale_mut(inv_sqrt[j]);
    }
    Ok(&scaled * eig.eigenvectors.transpose())
}
