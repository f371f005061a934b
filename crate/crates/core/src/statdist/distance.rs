//! Mahalanobis-type distances and the sparse cost matrices built from them.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenvalues below this fraction of the largest are dropped when
/// pseudo-inverting a covariance matrix.
pub const PINV_RELATIVE_CUTOFF: f64 = 1e-10;

/// Sample covariance (n - 1 denominator) of the rows of `data`.
pub fn sample_covariance(data: &DMatrix<f64>) -> DMatrix<f64> {
    let n = data.nrows();
    let d = data.ncols();
    let means: Vec<f64> = (0..d).map(|j| data.column(j).sum() / n as f64).collect();
    let mut cov = DMatrix::zeros(d, d);
    for i in 0..n {
        for a in 0..d {
            let da = data[(i, a)] - means[a];
            for b in a..d {
                cov[(a, b)] += da * (data[(i, b)] - means[b]);
            }
        }
    }
    let denom = (n as f64 - 1.0).max(1.0);
    for a in 0..d {
        for b in a..d {
            cov[(a, b)] /= denom;
            cov[(b, a)] = cov[(a, b)];
        }
    }
    cov
}

/// `W` with `W W^T` equal to the pseudo-inverse of the symmetric PSD matrix `s`.
fn pinv_factor(s: DMatrix<f64>) -> DMatrix<f64> {
    let d = s.nrows();
    if d == 0 {
        return DMatrix::zeros(0, 0);
    }
    let eig = SymmetricEigen::new(s);
    let max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let keep: Vec<usize> = (0..d)
        .filter(|&i| max > 0.0 && eig.eigenvalues[i] > PINV_RELATIVE_CUTOFF * max)
        .collect();
    DMatrix::from_fn(d, keep.len(), |a, k| {
        let i = keep[k];
        eig.eigenvectors[(a, i)] / eig.eigenvalues[i].sqrt()
    })
}

/// Average rank (1-based) of `v` within the sorted pool: ties share the mean
/// of their positions, values absent from the pool sit halfway between their
/// neighbours.
fn average_rank(sorted: &[f64], v: f64) -> f64 {
    let less = sorted.partition_point(|&x| x < v);
    let not_greater = sorted.partition_point(|&x| x <= v);
    less as f64 + ((not_greater - less) as f64 + 1.0) / 2.0
}

#[derive(Debug, Clone)]
enum Coordinates {
    Raw,
    /// Per-column sorted pool values used to rank new rows.
    Ranks(Vec<Vec<f64>>),
}

/// A fitted (robust) Mahalanobis metric.
///
/// Rows are mapped into whitened coordinates where the squared Mahalanobis
/// distance becomes squared Euclidean distance.
#[derive(Debug, Clone)]
pub struct MahalanobisMetric {
    coords: Coordinates,
    factor: DMatrix<f64>,
    dim: usize,
}

/// Rows mapped through [`MahalanobisMetric::embed`], stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    width: usize,
    data: Vec<f64>,
}

impl Embedding {
    pub fn len(&self) -> usize {
        if self.width == 0 {
            0
        } else {
            self.data.len() / self.width
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    /// Squared Euclidean distance between row `i` here and row `j` of `other`.
    pub fn distance(&self, i: usize, other: &Embedding, j: usize) -> f64 {
        self.row(i)
            .iter()
            .zip(other.row(j))
            .map(|(a, b)| {
                let d = a - b;
                d * d
            })
            .sum()
    }
}

impl MahalanobisMetric {
    /// Plain squared Mahalanobis distance under the sample covariance of
    /// `covariance_from`.
    pub fn plain(covariance_from: &DMatrix<f64>) -> Result<Self> {
        check_pool(covariance_from)?;
        let factor = pinv_factor(sample_covariance(covariance_from));
        Ok(MahalanobisMetric {
            coords: Coordinates::Raw,
            factor,
            dim: covariance_from.ncols(),
        })
    }

    /// Rank-based robust Mahalanobis distance.
    ///
    /// Each column is replaced by average ranks within the pool. The rank
    /// covariance is rescaled so every diagonal entry equals the variance of
    /// untied ranks `n(n+1)/12`, which keeps heavily tied columns from gaining
    /// weight, and distances are taken between rank vectors under that
    /// rescaled covariance.
    pub fn robust(covariance_from: &DMatrix<f64>) -> Result<Self> {
        check_pool(covariance_from)?;
        let n = covariance_from.nrows();
        let d = covariance_from.ncols();
        let sorted: Vec<Vec<f64>> = (0..d)
            .map(|j| {
                let mut col: Vec<f64> = covariance_from.column(j).iter().copied().collect();
                col.sort_by(f64::total_cmp);
                col
            })
            .collect();
        let ranks = DMatrix::from_fn(n, d, |i, j| average_rank(&sorted[j], covariance_from[(i, j)]));
        let mut cov = sample_covariance(&ranks);
        let untied = (n as f64) * (n as f64 + 1.0) / 12.0;
        let scale: Vec<f64> = (0..d)
            .map(|j| {
                let v = cov[(j, j)];
                if v > 0.0 {
                    (untied / v).sqrt()
                } else {
                    0.0
                }
            })
            .collect();
        for a in 0..d {
            for b in 0..d {
                cov[(a, b)] *= scale[a] * scale[b];
            }
        }
        Ok(MahalanobisMetric {
            coords: Coordinates::Ranks(sorted),
            factor: pinv_factor(cov),
            dim: d,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn embed(&self, rows: &DMatrix<f64>) -> Result<Embedding> {
        if rows.ncols() != self.dim {
            return Err(Error::dim(format!(
                "rows have {} columns, metric expects {}",
                rows.ncols(),
                self.dim
            )));
        }
        let width = self.factor.ncols();
        let mut data = Vec::with_capacity(rows.nrows() * width);
        let mut x = vec![0.0; self.dim];
        for i in 0..rows.nrows() {
            for (j, xj) in x.iter_mut().enumerate() {
                let v = rows[(i, j)];
                *xj = match &self.coords {
                    Coordinates::Raw => v,
                    Coordinates::Ranks(sorted) => average_rank(&sorted[j], v),
                };
            }
            for k in 0..width {
                let mut z = 0.0;
                for (j, xj) in x.iter().enumerate() {
                    z += self.factor[(j, k)] * xj;
                }
                data.push(z);
            }
        }
        Ok(Embedding { width, data })
    }

    pub fn matrix(&self, rows_a: &DMatrix<f64>, rows_b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let za = self.embed(rows_a)?;
        let zb = self.embed(rows_b)?;
        Ok(DMatrix::from_fn(rows_a.nrows(), rows_b.nrows(), |i, j| za.distance(i, &zb, j)))
    }
}

fn check_pool(pool: &DMatrix<f64>) -> Result<()> {
    if pool.nrows() < 2 {
        return Err(Error::dim("covariance needs at least two rows"));
    }
    Ok(())
}

fn check_widths(a: &DMatrix<f64>, b: &DMatrix<f64>, pool: &DMatrix<f64>) -> Result<()> {
    if a.ncols() != b.ncols() || a.ncols() != pool.ncols() {
        return Err(Error::dim(format!(
            "column counts differ: {}, {}, {}",
            a.ncols(),
            b.ncols(),
            pool.ncols()
        )));
    }
    Ok(())
}

/// Squared Mahalanobis distances `(a - b)^T S^+ (a - b)` for every row pair,
/// with `S` the sample covariance of `covariance_from`.
pub fn mahalanobis_matrix(rows_a: &DMatrix<f64>, rows_b: &DMatrix<f64>, covariance_from: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_widths(rows_a, rows_b, covariance_from)?;
    MahalanobisMetric::plain(covariance_from)?.matrix(rows_a, rows_b)
}

/// Squared rank-based robust Mahalanobis distances; see
/// [`MahalanobisMetric::robust`].
pub fn robust_mahalanobis_matrix(
    rows_a: &DMatrix<f64>,
    rows_b: &DMatrix<f64>,
    covariance_from: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    check_widths(rows_a, rows_b, covariance_from)?;
    MahalanobisMetric::robust(covariance_from)?.matrix(rows_a, rows_b)
}

/// A rows x cols matrix of non-negative costs where missing entries mean
/// "no edge". Rows hold `(column, value)` pairs sorted by column.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Vec<(usize, f64)>>,
}

impl CostMatrix {
    pub fn dense(rows: usize, cols: usize, mut value: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let entries = (0..rows)
            .map(|i| (0..cols).map(|j| (j, value(i, j))).collect())
            .collect();
        Self::from_rows(cols, entries)
    }

    pub fn from_dmatrix(m: &DMatrix<f64>) -> Result<Self> {
        Self::dense(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }

    /// Validates and wraps per-row entry lists.
    pub fn from_rows(cols: usize, mut entries: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        for (i, row) in entries.iter_mut().enumerate() {
            row.sort_by_key(|&(j, _)| j);
            for w in row.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(Error::data(format!("row {i}: duplicate column {}", w[0].0)));
                }
            }
            for &(j, v) in row.iter() {
                if j >= cols {
                    return Err(Error::dim(format!("row {i}: column {j} >= {cols}")));
                }
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::data(format!("row {i}, column {j}: cost {v} not finite and >= 0")));
                }
            }
        }
        Ok(CostMatrix {
            rows: entries.len(),
            cols,
            entries,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.entries[i]
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let row = &self.entries[i];
        row.binary_search_by_key(&j, |&(c, _)| c).ok().map(|k| row[k].1)
    }

    pub fn present_count(&self) -> usize {
        self.entries.iter().map(Vec::len).sum()
    }

    pub fn is_dense(&self) -> bool {
        self.present_count() == self.rows * self.cols
    }

    /// Rows with no present entry.
    pub fn empty_rows(&self) -> Vec<usize> {
        (0..self.rows).filter(|&i| self.entries[i].is_empty()).collect()
    }

    pub fn max_value(&self) -> f64 {
        self.entries
            .iter()
            .flatten()
            .map(|&(_, v)| v)
            .fold(0.0, f64::max)
    }

    /// Keeps the entries for which `keep(row, col, value)` holds.
    pub fn retain(&mut self, mut keep: impl FnMut(usize, usize, f64) -> bool) {
        for (i, row) in self.entries.iter_mut().enumerate() {
            row.retain(|&(j, v)| keep(i, j, v));
        }
    }

    /// Replaces every present value by `f(row, col, value)`.
    pub fn map_values(&mut self, mut f: impl FnMut(usize, usize, f64) -> f64) {
        for (i, row) in self.entries.iter_mut().enumerate() {
            for (j, v) in row.iter_mut() {
                *v = f(i, *j, *v);
            }
        }
    }
}

/// Template-to-treated (`template_treated`, R x T) and treated-to-control
/// (`treated_control`, T x C) costs, plus the propensity scores that
/// sparsification ranks controls by.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrices {
    pub template_treated: CostMatrix,
    pub treated_control: CostMatrix,
    pub propensity: Option<PropensityPair>,
    /// Set when every template-treated cost equals `|template[r] - treated[t]|`.
    pub line: Option<LinePositions>,
}

/// One-dimensional positions of template and treated units.
#[derive(Debug, Clone, PartialEq)]
pub struct LinePositions {
    pub template: Vec<f64>,
    pub treated: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropensityPair {
    pub treated: Vec<f64>,
    pub control: Vec<f64>,
}

impl DistanceMatrices {
    pub fn new(template_treated: CostMatrix, treated_control: CostMatrix) -> Result<Self> {
        if template_treated.cols() != treated_control.rows() {
            return Err(Error::dim(format!(
                "template-treated has {} treated columns, treated-control has {} rows",
                template_treated.cols(),
                treated_control.rows()
            )));
        }
        Ok(DistanceMatrices {
            template_treated,
            treated_control,
            propensity: None,
            line: None,
        })
    }

    /// Records that `template_treated` is the absolute difference of these
    /// positions; fails if any entry is absent or differs.
    pub fn with_line(mut self, template: Vec<f64>, treated: Vec<f64>) -> Result<Self> {
        let d = &self.template_treated;
        if template.len() != d.rows() || treated.len() != d.cols() {
            return Err(Error::dim("line positions do not match template/treated counts"));
        }
        if !d.is_dense() {
            return Err(Error::spec("line positions need a dense template-treated matrix"));
        }
        for (r, &a) in template.iter().enumerate() {
            for &(t, v) in d.row(r) {
                if v != (a - treated[t]).abs() {
                    return Err(Error::spec("template-treated costs are not absolute position differences"));
                }
            }
        }
        self.line = Some(LinePositions { template, treated });
        Ok(self)
    }

    pub fn with_propensity(mut self, treated: Vec<f64>, control: Vec<f64>) -> Result<Self> {
        if treated.len() != self.treated_control.rows() || control.len() != self.treated_control.cols() {
            return Err(Error::dim("propensity vectors do not match treated/control counts"));
        }
        self.propensity = Some(PropensityPair { treated, control });
        Ok(self)
    }

    pub fn sizes(&self) -> (usize, usize, usize) {
        (
            self.template_treated.rows(),
            self.treated_control.rows(),
            self.treated_control.cols(),
        )
    }
}
