//! P-spline bases: B-splines on quantile-placed knots, discrete difference
//! penalties, and the sum-to-zero identifiability constraint.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::GamError;

/// Where the interior breakpoints of a smooth are placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum KnotPlacement {
    /// Breakpoints at empirical quantiles of the covariate.
    #[default]
    Quantile,
    /// Breakpoints evenly spaced over the observed range.
    Uniform,
}

/// Configuration of one smooth term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothTerm {
    pub feature: String,
    pub basis_size: usize,
    pub degree: usize,
    pub penalty_order: usize,
    pub knots: KnotPlacement,
}

impl SmoothTerm {
    pub const DEFAULT_BASIS_SIZE: usize = 20;

    pub fn new(feature: impl Into<String>) -> Self {
        SmoothTerm {
            feature: feature.into(),
            basis_size: Self::DEFAULT_BASIS_SIZE,
            degree: 3,
            penalty_order: 2,
            knots: KnotPlacement::Quantile,
        }
    }

    pub fn with_basis_size(mut self, q: usize) -> Self {
        self.basis_size = q;
        self
    }

    pub fn with_penalty_order(mut self, order: usize) -> Self {
        self.penalty_order = order;
        self
    }

    pub fn with_knots(mut self, knots: KnotPlacement) -> Self {
        self.knots = knots;
        self
    }

    pub fn validate(&self) -> Result<(), GamError> {
        if self.basis_size <= self.degree + 1 {
            return Err(GamError::InvalidSpec(format!(
                "smooth `{}`: basis size {} must exceed degree + 1 = {}",
                self.feature,
                self.basis_size,
                self.degree + 1
            )));
        }
        if self.penalty_order == 0 || self.penalty_order >= self.basis_size {
            return Err(GamError::InvalidSpec(format!(
                "smooth `{}`: penalty order {} out of range for basis size {}",
                self.feature, self.penalty_order, self.basis_size
            )));
        }
        Ok(())
    }
}

/// A B-spline basis with its knot vector. Evaluation is defined on the
/// closed span `[knots[degree], knots[basis_size]]`; points outside are
/// clamped onto it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BSplineBasis {
    knots: Vec<f64>,
    degree: usize,
    size: usize,
}

impl BSplineBasis {
    /// Builds knots for `term` from the observed covariate values.
    pub fn from_data(x: &[f64], term: &SmoothTerm) -> Result<Self, GamError> {
        term.validate()?;
        let mut sorted: Vec<f64> = x.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut distinct = sorted.clone();
        distinct.dedup();
        if distinct.len() < term.basis_size {
            return Err(GamError::TooFewDistinct {
                term: term.feature.clone(),
                distinct: distinct.len(),
                required: term.basis_size,
            });
        }
        let n_breaks = term.basis_size - term.degree + 1;
        let breaks = match term.knots {
            KnotPlacement::Uniform => {
                let (lo, hi) = (distinct[0], distinct[distinct.len() - 1]);
                (0..n_breaks)
                    .map(|k| lo + (hi - lo) * k as f64 / (n_breaks - 1) as f64)
                    .collect()
            }
            KnotPlacement::Quantile => {
                let b = quantiles(&sorted, n_breaks);
                if strictly_increasing(&b) {
                    b
                } else {
                    // ties collapse data quantiles; fall back to the distinct values
                    quantiles(&distinct, n_breaks)
                }
            }
        };
        Self::from_breakpoints(&breaks, term.degree)
    }

    /// Builds the basis from strictly increasing breakpoints, extending
    /// `degree` knots beyond each end at the spacing of the adjacent interval.
    pub fn from_breakpoints(breaks: &[f64], degree: usize) -> Result<Self, GamError> {
        if breaks.len() < 2 || !strictly_increasing(breaks) {
            return Err(GamError::InvalidSpec(
                "breakpoints must be strictly increasing with at least two entries".into(),
            ));
        }
        let m = breaks.len();
        let left = breaks[1] - breaks[0];
        let right = breaks[m - 1] - breaks[m - 2];
        let mut knots = Vec::with_capacity(m + 2 * degree);
        for k in (1..=degree).rev() {
            knots.push(breaks[0] - k as f64 * left);
        }
        knots.extend_from_slice(breaks);
        for k in 1..=degree {
            knots.push(breaks[m - 1] + k as f64 * right);
        }
        let size = knots.len() - degree - 1;
        Ok(BSplineBasis { knots, degree, size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Lower and upper end of the evaluation span.
    pub fn span(&self) -> (f64, f64) {
        (self.knots[self.degree], self.knots[self.size])
    }

    /// Non-zero basis values at `x`: returns the index of the first
    /// non-zero function and the `degree + 1` values (Cox-de Boor).
    pub fn eval_nonzero(&self, x: f64) -> (usize, Vec<f64>) {
        let d = self.degree;
        let t = &self.knots;
        let (lo, hi) = self.span();
        let x = x.clamp(lo, hi);
        // interval index mu with t[mu] <= x < t[mu+1], restricted to the span
        let mut mu = match t[d..=self.size].binary_search_by(|k| k.total_cmp(&x)) {
            Ok(i) => d + i,
            Err(i) => d + i - 1,
        };
        if mu >= self.size {
            mu = self.size - 1;
        }
        let mut values = vec![0.0; d + 1];
        values[0] = 1.0;
        let mut left = vec![0.0; d + 1];
        let mut right = vec![0.0; d + 1];
        for j in 1..=d {
            left[j] = x - t[mu + 1 - j];
            right[j] = t[mu + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let tmp = values[r] / denom;
                values[r] = saved + right[r + 1] * tmp;
                saved = left[j - r] * tmp;
            }
            values[j] = saved;
        }
        (mu - d, values)
    }

    /// Dense row of all basis values at `x`.
    pub fn eval(&self, x: f64) -> Vec<f64> {
        let mut row = vec![0.0; self.size];
        let (start, vals) = self.eval_nonzero(x);
        row[start..start + vals.len()].copy_from_slice(&vals);
        row
    }

    /// Knot averages `(t[j+1] + … + t[j+degree]) / degree`; a coefficient
    /// vector equal to these reproduces the identity function.
    pub fn greville(&self) -> Vec<f64> {
        let d = self.degree.max(1);
        (0..self.size)
            .map(|j| self.knots[j + 1..j + 1 + d].iter().sum::<f64>() / d as f64)
            .collect()
    }

    /// Difference operator of the given order taken as divided differences
    /// over the Greville abscissae, rescaled so that it equals the plain
    /// difference operator when knots are evenly spaced. Its order-2 null
    /// space is exactly the straight lines in `x`, whatever the knot spacing.
    pub fn penalty_operator(&self, order: usize) -> DMatrix<f64> {
        let xi = self.greville();
        let mean_gap = (xi[xi.len() - 1] - xi[0]) / (xi.len() - 1) as f64;
        let mut d = DMatrix::<f64>::identity(self.size, self.size);
        for k in 1..=order {
            let rows = d.nrows() - 1;
            let mut next = DMatrix::zeros(rows, self.size);
            for i in 0..rows {
                let w = k as f64 * mean_gap / (xi[i + k] - xi[i]);
                for j in 0..self.size {
                    next[(i, j)] = w * (d[(i + 1, j)] - d[(i, j)]);
                }
            }
            d = next;
        }
        d
    }

    pub fn design(&self, x: &[f64]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(x.len(), self.size);
        for (i, &xi) in x.iter().enumerate() {
            let (start, vals) = self.eval_nonzero(xi);
            for (k, v) in vals.into_iter().enumerate() {
                out[(i, start + k)] = v;
            }
        }
        out
    }
}

/// Difference operator of the given order on `size` coefficients,
/// shape `(size - order) x size`.
pub fn difference_matrix(size: usize, order: usize) -> DMatrix<f64> {
    let mut d = DMatrix::<f64>::identity(size, size);
    for _ in 0..order {
        let rows = d.nrows() - 1;
        let mut next = DMatrix::zeros(rows, size);
        for i in 0..rows {
            for j in 0..size {
                next[(i, j)] = d[(i + 1, j)] - d[(i, j)];
            }
        }
        d = next;
    }
    d
}

/// `DᵀD` for the difference operator of the given order.
pub fn difference_penalty(size: usize, order: usize) -> DMatrix<f64> {
    let d = difference_matrix(size, order);
    d.transpose() * d
}

/// A smooth term prepared for fitting: basis, sum-to-zero constraint and
/// penalty in the constrained parameterization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstrainedSmooth {
    pub term: SmoothTerm,
    pub basis: BSplineBasis,
    /// `q x (q-1)` map from constrained to raw coefficients.
    pub constraint: DMatrix<f64>,
    /// Penalty operator times the constraint map: penalty = rootᵀ root.
    pub penalty_root: DMatrix<f64>,
    /// Observed covariate range.
    pub range: (f64, f64),
}

impl ConstrainedSmooth {
    /// Builds the smooth from the observed covariate values. The constraint
    /// makes the column sums of the constrained design block zero, so every
    /// fitted smooth averages to zero over the observed data.
    pub fn new(x: &[f64], term: &SmoothTerm) -> Result<Self, GamError> {
        let basis = BSplineBasis::from_data(x, term)?;
        let q = basis.size();
        let mut sums = DVector::<f64>::zeros(q);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &xi in x {
            let (start, vals) = basis.eval_nonzero(xi);
            for (k, v) in vals.into_iter().enumerate() {
                sums[start + k] += v;
            }
            lo = lo.min(xi);
            hi = hi.max(xi);
        }
        let constraint = householder_null_space(&sums);
        let penalty_root = basis.penalty_operator(term.penalty_order) * &constraint;
        Ok(ConstrainedSmooth {
            term: term.clone(),
            basis,
            constraint,
            penalty_root,
            range: (lo, hi),
        })
    }

    /// Number of columns after constraint absorption.
    pub fn width(&self) -> usize {
        self.basis.size() - 1
    }

    /// Constrained design row at `x`, written into `out`.
    pub fn row_into(&self, x: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let (start, vals) = self.basis.eval_nonzero(x);
        for (k, v) in vals.into_iter().enumerate() {
            let z = self.constraint.row(start + k);
            for (o, zc) in out.iter_mut().zip(z.iter()) {
                *o += v * zc;
            }
        }
    }

    pub fn design(&self, x: &[f64]) -> DMatrix<f64> {
        let w = self.width();
        let mut out = DMatrix::zeros(x.len(), w);
        let mut row = vec![0.0; w];
        for (i, &xi) in x.iter().enumerate() {
            self.row_into(xi, &mut row);
            for j in 0..w {
                out[(i, j)] = row[j];
            }
        }
        out
    }

    /// Penalty matrix in the constrained parameterization.
    pub fn penalty(&self) -> DMatrix<f64> {
        self.penalty_root.transpose() * &self.penalty_root
    }

    /// Dimension of the penalty null space within the constrained space.
    pub fn null_space_dim(&self) -> usize {
        self.width() - self.penalty_root.nrows().min(self.width())
    }
}

/// Design block and penalty for one smooth, in raw (unconstrained) and
/// constrained form.
#[derive(Debug, Clone)]
pub struct BasisBlock {
    pub raw_design: DMatrix<f64>,
    pub raw_penalty: DMatrix<f64>,
    pub design: DMatrix<f64>,
    pub penalty: DMatrix<f64>,
    pub smooth: ConstrainedSmooth,
}

/// Evaluates the smooth's basis at `x`: B-spline design (`n x q`), the
/// difference penalty, and their sum-to-zero constrained counterparts.
pub fn build_basis(x: &[f64], term: &SmoothTerm) -> Result<BasisBlock, GamError> {
    let smooth = ConstrainedSmooth::new(x, term)?;
    let raw_design = smooth.basis.design(x);
    let op = smooth.basis.penalty_operator(term.penalty_order);
    let raw_penalty = op.transpose() * op;
    let design = &raw_design * &smooth.constraint;
    let penalty = smooth.penalty();
    Ok(BasisBlock {
        raw_design,
        raw_penalty,
        design,
        penalty,
        smooth,
    })
}

/// Orthonormal basis of the complement of `c`, as the last `q-1` columns of
/// the Householder reflection mapping `c` onto the first axis.
fn householder_null_space(c: &DVector<f64>) -> DMatrix<f64> {
    let q = c.len();
    let norm = c.norm();
    let mut v = c.clone();
    let sign = if c[0] >= 0.0 { 1.0 } else { -1.0 };
    v[0] += sign * norm;
    let vtv = v.dot(&v);
    let mut h = DMatrix::<f64>::identity(q, q);
    if vtv > 0.0 {
        h -= (&v * v.transpose()) * (2.0 / vtv);
    }
    h.columns(1, q - 1).into_owned()
}

fn quantiles(sorted: &[f64], count: usize) -> Vec<f64> {
    let n = sorted.len();
    (0..count)
        .map(|k| {
            let pos = (n - 1) as f64 * k as f64 / (count - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            let frac = pos - lo as f64;
            sorted[lo] + (sorted[hi] - sorted[lo]) * frac
        })
        .collect()
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn rows_sum_to_one_inside_span() {
        let x = grid(200, -3.0, 7.0);
        let basis = BSplineBasis::from_data(&x, &SmoothTerm::new("x")).unwrap();
        for xi in grid(97, -3.0, 7.0) {
            let s: f64 = basis.eval(xi).iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "sum {s} at {xi}");
        }
    }

    #[test]
    fn knot_vector_covers_range() {
        let x: Vec<f64> = (0..300).map(|i| ((i * 37) % 101) as f64 * 0.3).collect();
        let basis = BSplineBasis::from_data(&x, &SmoothTerm::new("x")).unwrap();
        assert_eq!(basis.knots().len(), 20 + 3 + 1);
        assert!(basis.knots().windows(2).all(|w| w[0] <= w[1]));
        let (lo, hi) = basis.span();
        assert_eq!(lo, 0.0);
        assert_eq!(hi, 100.0 * 0.3);
    }

    #[test]
    fn second_order_penalty_rank() {
        // rank of DᵀD for q=5, order 2 counted from its eigenvalues
        let s = difference_penalty(5, 2);
        let eig = s.symmetric_eigen();
        let rank = eig.eigenvalues.iter().filter(|e| e.abs() > 1e-10).count();
        assert_eq!(rank, 3);
    }

    #[test]
    fn greville_weights_reproduce_identity() {
        let x: Vec<f64> = (0..90).map(|i| (i as f64 * 0.05).exp()).collect();
        let basis = BSplineBasis::from_data(&x, &SmoothTerm::new("x")).unwrap();
        let xi = basis.greville();
        for &v in &x {
            let s: f64 = basis.eval(v).iter().zip(&xi).map(|(b, g)| b * g).sum();
            assert!((s - v).abs() < 1e-9 * v.abs().max(1.0));
        }
    }

    #[test]
    fn penalty_operator_matches_plain_differences_on_even_knots() {
        let breaks: Vec<f64> = (0..8).map(|i| i as f64 * 0.5).collect();
        let basis = BSplineBasis::from_breakpoints(&breaks, 3).unwrap();
        let d = basis.penalty_operator(2);
        assert!((d - difference_matrix(basis.size(), 2)).norm() < 1e-10);
    }

    #[test]
    fn difference_rows() {
        let d = difference_matrix(4, 2);
        assert_eq!(d.nrows(), 2);
        assert_eq!(d.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, -2.0, 1.0, 0.0]);
    }

    #[test]
    fn constant_covariate_rejected() {
        let x = vec![2.5; 100];
        let err = BSplineBasis::from_data(&x, &SmoothTerm::new("flat")).unwrap_err();
        assert!(err.to_string().contains("too few distinct values"));
        assert!(err.to_string().contains("flat"));
    }

    #[test]
    fn constrained_columns_sum_to_zero() {
        let x: Vec<f64> = (0..150).map(|i| (i as f64 * 0.17).sin() * 4.0 + i as f64 * 0.01).collect();
        let block = build_basis(&x, &SmoothTerm::new("x").with_basis_size(10)).unwrap();
        assert_eq!(block.design.ncols(), 9);
        for j in 0..block.design.ncols() {
            let s: f64 = block.design.column(j).sum();
            assert!(s.abs() < 1e-10);
        }
        // constraint map has orthonormal columns
        let ztz = block.smooth.constraint.transpose() * &block.smooth.constraint;
        assert!((ztz - DMatrix::<f64>::identity(9, 9)).norm() < 1e-12);
    }

    #[test]
    fn tied_quantiles_fall_back_to_distinct_values() {
        // heavily tied discrete covariate: 40 distinct values, most mass on a few
        let mut x = Vec::new();
        for v in 0..40 {
            let reps = if v < 3 { 500 } else { 2 };
            x.extend(std::iter::repeat_n((v as f64 + 1.0).ln(), reps));
        }
        let basis = BSplineBasis::from_data(&x, &SmoothTerm::new("c")).unwrap();
        assert!(basis.knots().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn basis_size_must_exceed_degree_plus_one() {
        let term = SmoothTerm::new("x").with_basis_size(4);
        assert!(term.validate().is_err());
    }
}
