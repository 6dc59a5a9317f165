//! Penalized least squares on a QR-compressed design.
//!
//! Rows are absorbed block by block into the triangular factor of `[X | y]`,
//! so memory stays `O(p²)` whatever the number of rows. Every penalized
//! solve then works on that `(p+1) x (p+1)` factor only.

use nalgebra::{DMatrix, DVector};

use crate::error::GamError;

/// Relative threshold on `|R_jj| / max |R_ii|` below which a column is
/// treated as linearly dependent on the preceding ones.
const RANK_TOL: f64 = 1e-9;

/// Streaming QR accumulator for `[X | y]` plus response moments.
#[derive(Debug, Clone)]
pub struct CrossProducts {
    p: usize,
    /// Upper-triangular factor with at most `p + 1` rows and `p + 1` columns.
    r: DMatrix<f64>,
    n: usize,
    y_mean: f64,
    y_m2: f64,
}

impl CrossProducts {
    pub fn new(p: usize) -> Self {
        CrossProducts {
            p,
            r: DMatrix::zeros(0, p + 1),
            n: 0,
            y_mean: 0.0,
            y_m2: 0.0,
        }
    }

    /// Absorbs a block of rows given row-major as `x` (`m * p` values) and
    /// the matching responses.
    pub fn absorb(&mut self, x: &[f64], y: &[f64]) {
        let m = y.len();
        assert_eq!(x.len(), m * self.p, "block shape mismatch");
        if m == 0 {
            return;
        }
        let rows = self.r.nrows();
        let mut stacked = DMatrix::<f64>::zeros(rows + m, self.p + 1);
        stacked.rows_mut(0, rows).copy_from(&self.r);
        for i in 0..m {
            for j in 0..self.p {
                stacked[(rows + i, j)] = x[i * self.p + j];
            }
            stacked[(rows + i, self.p)] = y[i];
        }
        self.r = upper_factor(stacked);

        let block_mean = y.iter().sum::<f64>() / m as f64;
        let block_m2: f64 = y.iter().map(|v| (v - block_mean).powi(2)).sum();
        self.merge_moments(m, block_mean, block_m2);
    }

    /// Combines two accumulators; the result depends on argument order only
    /// through floating-point rounding, which is fixed for a fixed order.
    pub fn merge(mut self, other: CrossProducts) -> CrossProducts {
        assert_eq!(self.p, other.p);
        if other.n == 0 {
            return self;
        }
        if self.n == 0 {
            return other;
        }
        let (a, b) = (self.r.nrows(), other.r.nrows());
        let mut stacked = DMatrix::<f64>::zeros(a + b, self.p + 1);
        stacked.rows_mut(0, a).copy_from(&self.r);
        stacked.rows_mut(a, b).copy_from(&other.r);
        self.r = upper_factor(stacked);
        self.merge_moments(other.n, other.y_mean, other.y_m2);
        self
    }

    fn merge_moments(&mut self, m: usize, mean: f64, m2: f64) {
        let n0 = self.n as f64;
        let n1 = m as f64;
        let total = n0 + n1;
        let delta = mean - self.y_mean;
        self.y_mean += delta * n1 / total;
        self.y_m2 += m2 + delta * delta * n0 * n1 / total;
        self.n += m;
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.p
    }

    /// Total sum of squares of the response about its mean.
    pub fn tss(&self) -> f64 {
        self.y_m2
    }

    pub fn y_mean(&self) -> f64 {
        self.y_mean
    }

    /// `p x p` triangular factor `R` with `RᵀR = XᵀX`.
    pub fn r_factor(&self) -> DMatrix<f64> {
        let mut r = DMatrix::zeros(self.p, self.p);
        let rows = self.r.nrows().min(self.p);
        r.rows_mut(0, rows)
            .copy_from(&self.r.view((0, 0), (rows, self.p)));
        r
    }

    /// `Qᵀy` restricted to the column space of `X`.
    pub fn qty(&self) -> DVector<f64> {
        let mut f = DVector::zeros(self.p);
        for i in 0..self.r.nrows().min(self.p) {
            f[i] = self.r[(i, self.p)];
        }
        f
    }

    /// Residual sum of squares of the unpenalized least-squares fit.
    pub fn rss_floor(&self) -> f64 {
        if self.r.nrows() > self.p {
            self.r[(self.p, self.p)].powi(2)
        } else {
            0.0
        }
    }

    /// Indices of columns that are (numerically) linear combinations of
    /// earlier columns.
    pub fn dependent_columns(&self) -> Vec<usize> {
        let r = self.r_factor();
        let scale = (0..self.p).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
        (0..self.p)
            .filter(|&i| scale == 0.0 || r[(i, i)].abs() <= RANK_TOL * scale)
            .collect()
    }
}

fn upper_factor(m: DMatrix<f64>) -> DMatrix<f64> {
    let r = m.qr().r();
    // nalgebra's Householder QR may leave negative diagonals; normalize signs
    // so factors are comparable across accumulation orders.
    let mut r = r;
    for i in 0..r.nrows() {
        if r[(i, i)] < 0.0 {
            r.row_mut(i).neg_mut();
        }
    }
    r
}

/// A quadratic penalty `βᵀSβ` acting on a contiguous block of coefficients,
/// stored through a root `E` with `S = EᵀE`.
#[derive(Debug, Clone)]
pub struct Penalty {
    pub offset: usize,
    pub root: DMatrix<f64>,
}

impl Penalty {
    pub fn from_root(offset: usize, root: DMatrix<f64>) -> Self {
        Penalty { offset, root }
    }

    /// Builds the root from a symmetric positive semi-definite matrix.
    pub fn from_matrix(offset: usize, s: &DMatrix<f64>) -> Self {
        let eig = s.clone().symmetric_eigen();
        let max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        let keep: Vec<usize> = (0..s.nrows())
            .filter(|&i| eig.eigenvalues[i] > max * 1e-12)
            .collect();
        let mut root = DMatrix::zeros(keep.len(), s.ncols());
        for (r, &i) in keep.iter().enumerate() {
            let scale = eig.eigenvalues[i].sqrt();
            for j in 0..s.ncols() {
                root[(r, j)] = scale * eig.eigenvectors[(j, i)];
            }
        }
        Penalty { offset, root }
    }

    pub fn width(&self) -> usize {
        self.root.ncols()
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        self.root.transpose() * &self.root
    }

    pub fn rank(&self) -> usize {
        let s = self.matrix();
        let eig = s.symmetric_eigen();
        let max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        eig.eigenvalues
            .iter()
            .filter(|&&e| e > max * 1e-10)
            .count()
    }
}

/// The compressed penalized least-squares problem
/// `min ‖y − Xβ‖² + Σ λ_j βᵀ S_j β`.
#[derive(Debug, Clone)]
pub struct PenalizedLs {
    r: DMatrix<f64>,
    f: DVector<f64>,
    rss_floor: f64,
    n: usize,
    penalties: Vec<Penalty>,
}

/// Solution of a penalized least-squares problem at fixed smoothing
/// parameters.
#[derive(Debug, Clone)]
pub struct PenalizedSolution {
    pub beta: DVector<f64>,
    pub rss: f64,
    /// `tr(X (XᵀX + Σ λ S)⁻¹ Xᵀ)`.
    pub hat_trace: f64,
    /// Diagonal of `(XᵀX + Σ λ S)⁻¹ XᵀX`; sums to `hat_trace`.
    pub edf_per_coef: DVector<f64>,
    /// `(XᵀX + Σ λ S)⁻¹`.
    pub inv_penalized: DMatrix<f64>,
}

impl PenalizedLs {
    pub fn new(cp: &CrossProducts, penalties: Vec<Penalty>) -> Result<Self, GamError> {
        for pen in &penalties {
            if pen.offset + pen.width() > cp.ncols() {
                return Err(GamError::Dimension(format!(
                    "penalty block at {}..{} exceeds {} columns",
                    pen.offset,
                    pen.offset + pen.width(),
                    cp.ncols()
                )));
            }
        }
        Ok(PenalizedLs {
            r: cp.r_factor(),
            f: cp.qty(),
            rss_floor: cp.rss_floor(),
            n: cp.n(),
            penalties,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.r.ncols()
    }

    pub fn penalties(&self) -> &[Penalty] {
        &self.penalties
    }

    /// Solves at the given smoothing parameters via a QR factorization of
    /// the augmented matrix `[R; √λ_1 E_1; …]`.
    pub fn solve(&self, lambda: &[f64]) -> Result<PenalizedSolution, GamError> {
        if lambda.len() != self.penalties.len() {
            return Err(GamError::Dimension(format!(
                "{} smoothing parameters for {} penalties",
                lambda.len(),
                self.penalties.len()
            )));
        }
        let p = self.ncols();
        let extra: usize = self.penalties.iter().map(|s| s.root.nrows()).sum();
        let mut aug = DMatrix::<f64>::zeros(p + extra, p);
        aug.rows_mut(0, p).copy_from(&self.r);
        let mut row = p;
        for (pen, &lam) in self.penalties.iter().zip(lambda) {
            let scale = lam.max(0.0).sqrt();
            for i in 0..pen.root.nrows() {
                for j in 0..pen.width() {
                    aug[(row + i, pen.offset + j)] = scale * pen.root[(i, j)];
                }
            }
            row += pen.root.nrows();
        }
        let qr = aug.qr();
        let r1 = qr.r();
        let q1 = qr.q();

        let diag_scale = (0..p).map(|i| r1[(i, i)].abs()).fold(0.0, f64::max);
        let weak: Vec<usize> = (0..p)
            .filter(|&i| diag_scale == 0.0 || r1[(i, i)].abs() <= RANK_TOL * diag_scale)
            .collect();
        if !weak.is_empty() {
            return Err(GamError::RankDeficient {
                columns: weak.iter().map(|i| i.to_string()).collect(),
            });
        }

        let q_top = q1.rows(0, p).into_owned();
        let rhs = q_top.transpose() * &self.f;
        let beta = r1
            .solve_upper_triangular(&rhs)
            .ok_or_else(|| GamError::RankDeficient { columns: vec![] })?;
        let resid = &self.f - &self.r * &beta;
        let rss = (resid.norm_squared() + self.rss_floor).max(0.0);
        let hat_trace = q_top.norm_squared();

        let r1_inv = r1
            .solve_upper_triangular(&DMatrix::identity(p, p))
            .ok_or_else(|| GamError::RankDeficient { columns: vec![] })?;
        let inv_penalized = &r1_inv * r1_inv.transpose();
        // diag(R1⁻¹ Q_topᵀ Q_top R1)
        let inner = q_top.transpose() * &q_top * &r1;
        let f_mat = &r1_inv * inner;
        let edf_per_coef = f_mat.diagonal();

        Ok(PenalizedSolution {
            beta,
            rss,
            hat_trace,
            edf_per_coef,
            inv_penalized,
        })
    }

    /// `n · RSS / (n − tr H)²`; infinite when the hat trace reaches `n`.
    pub fn gcv(&self, lambda: &[f64]) -> Result<f64, GamError> {
        let sol = self.solve(lambda)?;
        Ok(gcv_score(self.n, sol.rss, sol.hat_trace))
    }
}

pub fn gcv_score(n: usize, rss: f64, hat_trace: f64) -> f64 {
    let n = n as f64;
    let denom = n - hat_trace;
    if denom <= 0.0 {
        f64::INFINITY
    } else {
        n * rss / (denom * denom)
    }
}

/// Absorbs a dense in-memory design matrix.
pub fn cross_products(x: &DMatrix<f64>, y: &[f64]) -> Result<CrossProducts, GamError> {
    if x.nrows() != y.len() {
        return Err(GamError::Dimension(format!(
            "design has {} rows but response has {}",
            x.nrows(),
            y.len()
        )));
    }
    let p = x.ncols();
    let mut cp = CrossProducts::new(p);
    const BLOCK: usize = 1024;
    let mut buf = Vec::with_capacity(BLOCK * p);
    for start in (0..x.nrows()).step_by(BLOCK) {
        let end = (start + BLOCK).min(x.nrows());
        buf.clear();
        for i in start..end {
            buf.extend(x.row(i).iter().copied());
        }
        cp.absorb(&buf, &y[start..end]);
    }
    Ok(cp)
}

/// Result of [`fit_penalized_ls`].
#[derive(Debug, Clone)]
pub struct PenalizedFit {
    pub beta: DVector<f64>,
    pub hat_trace: f64,
    pub rss: f64,
}

/// Minimizes `‖y − Xβ‖² + Σ λ_j βᵀ S_j β` for an in-memory design.
pub fn fit_penalized_ls(
    x: &DMatrix<f64>,
    y: &[f64],
    penalties: &[Penalty],
    lambda: &[f64],
) -> Result<PenalizedFit, GamError> {
    if lambda.iter().any(|&l| !(l >= 0.0)) {
        return Err(GamError::InvalidSpec("smoothing parameters must be >= 0".into()));
    }
    let cp = cross_products(x, y)?;
    let dependent = cp.dependent_columns();
    if !dependent.is_empty() {
        return Err(GamError::RankDeficient {
            columns: dependent.iter().map(|i| format!("column {i}")).collect(),
        });
    }
    let problem = PenalizedLs::new(&cp, penalties.to_vec())?;
    let sol = problem.solve(lambda)?;
    Ok(PenalizedFit {
        beta: sol.beta,
        hat_trace: sol.hat_trace,
        rss: sol.rss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_design() -> (DMatrix<f64>, Vec<f64>) {
        let n = 30;
        let x = DMatrix::from_fn(n, 3, |i, j| match j {
            0 => 1.0,
            1 => i as f64 / 10.0,
            _ => ((i * 7) % 11) as f64,
        });
        let y: Vec<f64> = (0..n)
            .map(|i| 2.0 + 0.5 * i as f64 / 10.0 - 0.25 * ((i * 7) % 11) as f64 + ((i * 13) % 5) as f64 * 0.1)
            .collect();
        (x, y)
    }

    #[test]
    fn intercept_only_constant_response() {
        let x = DMatrix::from_element(12, 1, 1.0);
        let y = vec![3.25; 12];
        let fit = fit_penalized_ls(&x, &y, &[], &[]).unwrap();
        assert!((fit.beta[0] - 3.25).abs() < 1e-12);
        assert!(fit.rss.abs() < 1e-20);
        assert!((fit.hat_trace - 1.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_columns_reported() {
        let x = DMatrix::from_fn(20, 3, |i, j| match j {
            0 => 1.0,
            1 => i as f64,
            _ => 2.0 * i as f64 + 1.0,
        });
        let y: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let err = fit_penalized_ls(&x, &y, &[], &[]).unwrap_err();
        match err {
            GamError::RankDeficient { columns } => assert_eq!(columns, vec!["column 2"]),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn block_order_does_not_change_factor_materially() {
        let (x, y) = small_design();
        let whole = cross_products(&x, &y).unwrap();
        let mut a = CrossProducts::new(3);
        let mut b = CrossProducts::new(3);
        let flat: Vec<f64> = (0..30).flat_map(|i| x.row(i).iter().copied().collect::<Vec<_>>()).collect();
        a.absorb(&flat[..45], &y[..15]);
        b.absorb(&flat[45..], &y[15..]);
        let merged = a.merge(b);
        assert!((merged.r_factor() - whole.r_factor()).norm() < 1e-10);
        assert!((merged.rss_floor() - whole.rss_floor()).abs() < 1e-10);
        assert!((merged.tss() - whole.tss()).abs() < 1e-10);
    }

    #[test]
    fn penalty_root_round_trip() {
        let s = crate::basis::difference_penalty(6, 2);
        let pen = Penalty::from_matrix(0, &s);
        assert!((pen.matrix() - &s).norm() < 1e-10);
        assert_eq!(pen.rank(), 4);
    }

    #[test]
    fn negative_lambda_rejected() {
        let (x, y) = small_design();
        let pen = Penalty::from_matrix(1, &DMatrix::identity(2, 2));
        assert!(fit_penalized_ls(&x, &y, &[pen], &[-1.0]).is_err());
    }
}
