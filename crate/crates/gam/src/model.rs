//! Model specification, fitting and summaries.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::basis::{ConstrainedSmooth, SmoothTerm};
use crate::error::GamError;
use crate::gcv::{optimize_lambda, LambdaSearch};
use crate::pls::{gcv_score, CrossProducts, PenalizedLs, Penalty};

/// Tabular data a model can be fitted to. Missing values are encoded as
/// non-finite numbers; rows with a missing value in any covariate the
/// model uses are dropped.
pub trait Frame {
    fn n_rows(&self) -> usize;
    fn response(&self) -> Vec<f64>;
    fn column(&self, name: &str) -> Option<Vec<f64>>;
}

/// A simple column store implementing [`Frame`].
#[derive(Debug, Clone, Default)]
pub struct ColumnFrame {
    pub response: Vec<f64>,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl ColumnFrame {
    pub fn new(response: Vec<f64>) -> Self {
        ColumnFrame {
            response,
            columns: Vec::new(),
        }
    }

    pub fn with_column(mut self, name: impl Into<String>, values: Vec<f64>) -> Self {
        self.columns.push((name.into(), values));
        self
    }
}

impl Frame for ColumnFrame {
    fn n_rows(&self) -> usize {
        self.response.len()
    }

    fn response(&self) -> Vec<f64> {
        self.response.clone()
    }

    fn column(&self, name: &str) -> Option<Vec<f64>> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.clone())
    }
}

/// Intercept plus linear terms plus smooth terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub linear_terms: Vec<String>,
    pub smooth_terms: Vec<SmoothTerm>,
}

impl ModelSpec {
    pub fn new(linear_terms: Vec<String>, smooth_terms: Vec<SmoothTerm>) -> Self {
        ModelSpec {
            linear_terms,
            smooth_terms,
        }
    }

    pub fn validate(&self) -> Result<(), GamError> {
        let mut seen = std::collections::BTreeSet::new();
        let names = self
            .linear_terms
            .iter()
            .chain(self.smooth_terms.iter().map(|s| &s.feature));
        for name in names {
            if !seen.insert(name.as_str()) {
                return Err(GamError::InvalidSpec(format!(
                    "covariate `{name}` appears more than once"
                )));
            }
        }
        for s in &self.smooth_terms {
            s.validate()?;
        }
        Ok(())
    }

    /// Applies basis settings to every smooth.
    pub fn with_smooth_settings(mut self, basis_size: usize, penalty_order: usize) -> Self {
        for s in &mut self.smooth_terms {
            s.basis_size = basis_size;
            s.penalty_order = penalty_order;
        }
        self
    }
}

pub const PUB_DATE: &str = "pub_date";
pub const TEMPORAL_DIFF: &str = "temporal_diff_days";
pub const LOG_SENDER_CITATIONS: &str = "log_sender_citations";
pub const ORG_EFFECTS: [&str; 3] = ["is_same_org", "is_sender_org", "is_receiver_org"];
pub const JACCARD_EFFECTS: [&str; 5] = [
    "j_section",
    "j_class",
    "j_subclass",
    "j_maingroup",
    "j_subgroup",
];

/// The four nested citation-similarity models.
///
/// | level | smooths                                   | linear terms            |
/// |-------|-------------------------------------------|-------------------------|
/// | 0     | pub_date                                  |                         |
/// | 1     | + temporal_diff_days                      |                         |
/// | 2     | + log_sender_citations                    | organization flags      |
/// | 3     | same                                      | + five Jaccard indices  |
pub fn model_catalog(level: u8) -> Result<ModelSpec, GamError> {
    if level > 3 {
        return Err(GamError::InvalidLevel(level));
    }
    let mut smooths = vec![SmoothTerm::new(PUB_DATE)];
    if level >= 1 {
        smooths.push(SmoothTerm::new(TEMPORAL_DIFF));
    }
    if level >= 2 {
        smooths.push(SmoothTerm::new(LOG_SENDER_CITATIONS));
    }
    let mut linear: Vec<String> = Vec::new();
    if level >= 2 {
        linear.extend(ORG_EFFECTS.iter().map(|s| s.to_string()));
    }
    if level >= 3 {
        linear.extend(JACCARD_EFFECTS.iter().map(|s| s.to_string()));
    }
    Ok(ModelSpec::new(linear, smooths))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitOptions {
    pub search: LambdaSearch,
    /// Rows per accumulation block.
    pub block_rows: usize,
    /// Fixed smoothing parameters; skips the GCV search when set.
    pub fixed_lambda: Option<Vec<f64>>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            search: LambdaSearch::default(),
            block_rows: 4096,
            fixed_lambda: None,
        }
    }
}

/// Fitted smooth: its basis plus the location of its coefficients.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FittedSmooth {
    pub smooth: ConstrainedSmooth,
    pub offset: usize,
    pub lambda: f64,
    pub edf: f64,
    /// Multiplier applied to the raw difference penalty so that it is on
    /// the scale of the design block's cross-product; `lambda` refers to
    /// the rescaled penalty.
    pub penalty_scale: f64,
}

impl FittedSmooth {
    pub fn name(&self) -> &str {
        &self.smooth.term.feature
    }

    pub fn width(&self) -> usize {
        self.smooth.width()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFit {
    pub spec: ModelSpec,
    pub n: usize,
    pub dropped_rows: usize,
    pub coef_names: Vec<String>,
    pub beta: Vec<f64>,
    pub cov_beta: Vec<Vec<f64>>,
    pub smooths: Vec<FittedSmooth>,
    pub edf_total: f64,
    pub sigma2_hat: f64,
    pub rss: f64,
    pub tss: f64,
    pub aic: f64,
    pub gcv: f64,
    pub dev_explained: f64,
    pub lambda_converged: bool,
    pub fitted: Vec<f64>,
}

impl ModelFit {
    /// Number of parametric coefficients (intercept + linear terms).
    pub fn n_parametric(&self) -> usize {
        1 + self.spec.linear_terms.len()
    }

    pub fn se(&self, j: usize) -> f64 {
        self.cov_beta[j][j].max(0.0).sqrt()
    }

    pub fn coefficient(&self, name: &str) -> Option<(f64, f64)> {
        let j = self.coef_names.iter().position(|n| n == name)?;
        Some((self.beta[j], self.se(j)))
    }

    pub fn smooth(&self, name: &str) -> Option<&FittedSmooth> {
        self.smooths.iter().find(|s| s.name() == name)
    }

    /// Values of a fitted smooth at arbitrary covariate values.
    pub fn smooth_values(&self, term: &str, x: &[f64]) -> Result<Vec<f64>, GamError> {
        let fs = self
            .smooth(term)
            .ok_or_else(|| GamError::UnknownTerm(term.to_string()))?;
        let coef = &self.beta[fs.offset..fs.offset + fs.width()];
        let mut row = vec![0.0; fs.width()];
        Ok(x.iter()
            .map(|&xi| {
                fs.smooth.row_into(xi, &mut row);
                row.iter().zip(coef).map(|(a, b)| a * b).sum()
            })
            .collect())
    }
}

/// A smooth evaluated on an even grid over the observed covariate range.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartialEffect {
    pub term: String,
    pub grid: Vec<f64>,
    pub f_hat: Vec<f64>,
    pub se: Vec<f64>,
}

pub fn partial_effect(fit: &ModelFit, term: &str, grid_size: usize) -> Result<PartialEffect, GamError> {
    let fs = fit
        .smooth(term)
        .ok_or_else(|| GamError::UnknownTerm(term.to_string()))?;
    let (lo, hi) = fs.smooth.range;
    let grid: Vec<f64> = match grid_size {
        0 => vec![],
        1 => vec![lo],
        m => (0..m)
            .map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64)
            .collect(),
    };
    let w = fs.width();
    let off = fs.offset;
    let coef = &fit.beta[off..off + w];
    let mut row = vec![0.0; w];
    let mut f_hat = Vec::with_capacity(grid.len());
    let mut se = Vec::with_capacity(grid.len());
    for &g in &grid {
        fs.smooth.row_into(g, &mut row);
        f_hat.push(row.iter().zip(coef).map(|(a, b)| a * b).sum());
        let mut var = 0.0;
        for a in 0..w {
            if row[a] == 0.0 {
                continue;
            }
            for b in 0..w {
                var += row[a] * fit.cov_beta[off + a][off + b] * row[b];
            }
        }
        se.push(var.max(0.0).sqrt());
    }
    Ok(PartialEffect {
        term: term.to_string(),
        grid,
        f_hat,
        se,
    })
}

struct Layout {
    names: Vec<String>,
    linear: Vec<Vec<f64>>,
    smooth_x: Vec<Vec<f64>>,
    smooths: Vec<ConstrainedSmooth>,
    offsets: Vec<usize>,
    p: usize,
}

impl Layout {
    fn row_into(&self, i: usize, out: &mut [f64]) {
        out[0] = 1.0;
        for (k, col) in self.linear.iter().enumerate() {
            out[1 + k] = col[i];
        }
        for (s, smooth) in self.smooths.iter().enumerate() {
            let off = self.offsets[s];
            smooth.row_into(self.smooth_x[s][i], &mut out[off..off + smooth.width()]);
        }
    }
}

/// Fits a Gaussian additive model with identity link.
///
/// Smoothing parameters are chosen by GCV unless `options.fixed_lambda` is
/// set. The coefficient covariance is the Bayesian posterior
/// `(XᵀX + Σ λ S)⁻¹ σ̂²` with `σ̂² = RSS / (n − edf)`.
pub fn fit_model(spec: &ModelSpec, frame: &dyn Frame, options: &FitOptions) -> Result<ModelFit, GamError> {
    spec.validate()?;
    let total = frame.n_rows();
    let y_all = frame.response();
    if y_all.len() != total {
        return Err(GamError::Dimension("response length differs from row count".into()));
    }
    let fetch = |name: &str| -> Result<Vec<f64>, GamError> {
        let col = frame
            .column(name)
            .ok_or_else(|| GamError::UnknownCovariate(name.to_string()))?;
        if col.len() != total {
            return Err(GamError::Dimension(format!("column `{name}` has wrong length")));
        }
        Ok(col)
    };
    let linear_all: Vec<Vec<f64>> = spec
        .linear_terms
        .iter()
        .map(|n| fetch(n))
        .collect::<Result<_, _>>()?;
    let smooth_all: Vec<Vec<f64>> = spec
        .smooth_terms
        .iter()
        .map(|s| fetch(&s.feature))
        .collect::<Result<_, _>>()?;

    let keep: Vec<usize> = (0..total)
        .filter(|&i| {
            y_all[i].is_finite()
                && linear_all.iter().all(|c| c[i].is_finite())
                && smooth_all.iter().all(|c| c[i].is_finite())
        })
        .collect();
    let n = keep.len();
    if n == 0 {
        return Err(GamError::EmptyTable);
    }
    let dropped_rows = total - n;
    let pick = |c: &Vec<f64>| keep.iter().map(|&i| c[i]).collect::<Vec<f64>>();
    let y = pick(&y_all);
    let linear: Vec<Vec<f64>> = linear_all.iter().map(pick).collect();
    let smooth_x: Vec<Vec<f64>> = smooth_all.iter().map(pick).collect();

    let smooths: Vec<ConstrainedSmooth> = spec
        .smooth_terms
        .iter()
        .zip(&smooth_x)
        .map(|(term, x)| ConstrainedSmooth::new(x, term))
        .collect::<Result<_, _>>()?;

    let mut names = vec!["(Intercept)".to_string()];
    names.extend(spec.linear_terms.iter().cloned());
    let mut offsets = Vec::new();
    let mut p = names.len();
    for s in &smooths {
        offsets.push(p);
        for k in 1..=s.width() {
            names.push(format!("s({}).{k}", s.term.feature));
        }
        p += s.width();
    }
    let layout = Layout {
        names,
        linear,
        smooth_x,
        smooths,
        offsets,
        p,
    };

    let cp = accumulate(&layout, &y, options.block_rows.max(1));
    let dependent = cp.dependent_columns();
    if !dependent.is_empty() {
        return Err(GamError::RankDeficient {
            columns: dependent.iter().map(|&j| layout.names[j].clone()).collect(),
        });
    }

    // put each penalty on the scale of its design block
    let r = cp.r_factor();
    let mut scales = Vec::new();
    let penalties: Vec<Penalty> = layout
        .smooths
        .iter()
        .zip(&layout.offsets)
        .map(|(s, &off)| {
            let block = r.columns(off, s.width());
            let xtx = block.transpose() * block;
            let pen = s.penalty();
            let scale = xtx.norm() / pen.norm();
            scales.push(scale);
            Penalty::from_root(off, &s.penalty_root * scale.sqrt())
        })
        .collect();
    let problem = PenalizedLs::new(&cp, penalties)?;

    let (lambda, converged) = match &options.fixed_lambda {
        Some(l) => (l.clone(), true),
        None => {
            let opt = optimize_lambda(&problem, &options.search)?;
            (opt.lambda, opt.converged)
        }
    };
    let sol = problem.solve(&lambda).map_err(|e| match e {
        GamError::RankDeficient { columns } => GamError::RankDeficient {
            columns: columns
                .iter()
                .filter_map(|c| c.parse::<usize>().ok())
                .map(|j| layout.names[j].clone())
                .collect(),
        },
        other => other,
    })?;

    let nf = n as f64;
    let edf_total = sol.hat_trace;
    let rss = sol.rss;
    let tss = cp.tss();
    let sigma2_hat = if nf > edf_total { rss / (nf - edf_total) } else { f64::NAN };
    let aic = nf * (rss / nf).ln() + nf * (2.0 * std::f64::consts::PI).ln() + nf + 2.0 * (edf_total + 1.0);
    let gcv = gcv_score(n, rss, edf_total);
    let dev_explained = if tss > 0.0 {
        (1.0 - rss / tss).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let cov = &sol.inv_penalized * sigma2_hat;
    let cov_beta: Vec<Vec<f64>> = (0..p).map(|i| cov.row(i).iter().copied().collect()).collect();
    let beta: Vec<f64> = sol.beta.iter().copied().collect();

    let fitted = fitted_values(&layout, &sol.beta, n, options.block_rows.max(1));

    let smooths = layout
        .smooths
        .iter()
        .enumerate()
        .map(|(s, smooth)| {
            let off = layout.offsets[s];
            FittedSmooth {
                smooth: smooth.clone(),
                offset: off,
                lambda: lambda[s],
                edf: sol.edf_per_coef.rows(off, smooth.width()).sum(),
                penalty_scale: scales[s],
            }
        })
        .collect();

    Ok(ModelFit {
        spec: spec.clone(),
        n,
        dropped_rows,
        coef_names: layout.names,
        beta,
        cov_beta,
        smooths,
        edf_total,
        sigma2_hat,
        rss,
        tss,
        aic,
        gcv,
        dev_explained,
        lambda_converged: converged,
        fitted,
    })
}

/// Blocks are factored in parallel and merged left to right, so the result
/// does not depend on thread scheduling.
fn accumulate(layout: &Layout, y: &[f64], block_rows: usize) -> CrossProducts {
    let n = y.len();
    let p = layout.p;
    let starts: Vec<usize> = (0..n).step_by(block_rows).collect();
    let parts: Vec<CrossProducts> = starts
        .par_iter()
        .map(|&start| {
            let end = (start + block_rows).min(n);
            let mut buf = vec![0.0; (end - start) * p];
            for (k, i) in (start..end).enumerate() {
                layout.row_into(i, &mut buf[k * p..(k + 1) * p]);
            }
            let mut cp = CrossProducts::new(p);
            cp.absorb(&buf, &y[start..end]);
            cp
        })
        .collect();
    parts
        .into_iter()
        .fold(CrossProducts::new(p), |acc, part| acc.merge(part))
}

fn fitted_values(layout: &Layout, beta: &DVector<f64>, n: usize, block_rows: usize) -> Vec<f64> {
    let p = layout.p;
    let starts: Vec<usize> = (0..n).step_by(block_rows).collect();
    starts
        .par_iter()
        .flat_map_iter(|&start| {
            let end = (start + block_rows).min(n);
            let mut row = vec![0.0; p];
            (start..end)
                .map(|i| {
                    layout.row_into(i, &mut row);
                    row.iter().zip(beta.iter()).map(|(a, b)| a * b).sum::<f64>()
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// One parametric coefficient in a fit report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSummary {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
    /// Two-sided p-value from the normal approximation.
    pub p_value: f64,
    /// `***` p < 0.001, `**` p < 0.01, `*` p < 0.05.
    pub significance: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothSummary {
    pub name: String,
    pub lambda: f64,
    pub edf: f64,
}

/// Serializable summary of a fit, laid out like a regression table column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model_level: u8,
    pub n: usize,
    pub coefficients: Vec<CoefficientSummary>,
    pub smooths: Vec<SmoothSummary>,
    pub aic: f64,
    pub gcv: f64,
    pub dev_explained: f64,
    pub dropped_rows: usize,
}

impl FitReport {
    pub fn from_fit(model_level: u8, fit: &ModelFit) -> Self {
        let normal = Normal::standard();
        let coefficients = (0..fit.n_parametric())
            .map(|j| {
                let estimate = fit.beta[j];
                let se = fit.se(j);
                let p_value = if se > 0.0 {
                    2.0 * (1.0 - normal.cdf((estimate / se).abs()))
                } else {
                    f64::NAN
                };
                CoefficientSummary {
                    name: fit.coef_names[j].clone(),
                    estimate,
                    se,
                    p_value,
                    significance: significance_stars(p_value).to_string(),
                }
            })
            .collect();
        let smooths = fit
            .smooths
            .iter()
            .map(|s| SmoothSummary {
                name: s.name().to_string(),
                lambda: s.lambda,
                edf: s.edf,
            })
            .collect();
        FitReport {
            model_level,
            n: fit.n,
            coefficients,
            smooths,
            aic: fit.aic,
            gcv: fit.gcv,
            dev_explained: fit.dev_explained,
            dropped_rows: fit.dropped_rows,
        }
    }
}

pub fn significance_stars(p: f64) -> &'static str {
    if !(p >= 0.0) {
        ""
    } else if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

/// Dense design matrix for a spec over a frame (small data and tests).
pub fn design_matrix(spec: &ModelSpec, frame: &dyn Frame) -> Result<(DMatrix<f64>, Vec<ConstrainedSmooth>), GamError> {
    let n = frame.n_rows();
    let mut cols: Vec<Vec<f64>> = vec![vec![1.0; n]];
    for name in &spec.linear_terms {
        cols.push(frame.column(name).ok_or_else(|| GamError::UnknownCovariate(name.clone()))?);
    }
    let mut smooths = Vec::new();
    for term in &spec.smooth_terms {
        let x = frame
            .column(&term.feature)
            .ok_or_else(|| GamError::UnknownCovariate(term.feature.clone()))?;
        let s = ConstrainedSmooth::new(&x, term)?;
        let block = s.design(&x);
        for j in 0..block.ncols() {
            cols.push(block.column(j).iter().copied().collect());
        }
        smooths.push(s);
    }
    let x = DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]);
    Ok((x, smooths))
}
