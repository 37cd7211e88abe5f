//! Polynomial tuning rules in `(L/T, α)` and their least-squares refit.
//!
//! Each FOPID parameter is a 12-term polynomial, quadratic in `L/T` and quartic
//! in `α`. The three gains scale with `1/K`; the orders do not.

use std::io::BufRead;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lqr_fopid::FopidController;

/// `(i, j)` exponents of `(L/T)^i α^j`, in coefficient order
/// p00, p10, p01, p20, p11, p02, p21, p12, p03, p22, p13, p04.
pub const TERMS: [(i32, i32); 12] = [
    (0, 0),
    (1, 0),
    (0, 1),
    (2, 0),
    (1, 1),
    (0, 2),
    (2, 1),
    (1, 2),
    (0, 3),
    (2, 2),
    (1, 3),
    (0, 4),
];

/// Predictors excluding the intercept.
pub const PREDICTORS: usize = TERMS.len() - 1;

/// Domain covered by the bundled data.
pub const L_OVER_T_RANGE: (f64, f64) = (0.25, 4.0);
pub const ALPHA_RANGE: (f64, f64) = (0.2, 1.8);

const MEDIAN_CSV: &str = include_str!("../data/median_solutions.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RuleParameter {
    Kp,
    Ki,
    Kd,
    Lambda,
    Mu,
}

impl RuleParameter {
    pub const ALL: [RuleParameter; 5] = [
        RuleParameter::Kp,
        RuleParameter::Ki,
        RuleParameter::Kd,
        RuleParameter::Lambda,
        RuleParameter::Mu,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            RuleParameter::Kp => "Kp",
            RuleParameter::Ki => "Ki",
            RuleParameter::Kd => "Kd",
            RuleParameter::Lambda => "lambda",
            RuleParameter::Mu => "mu",
        }
    }

    /// Gains scale with `1/K`.
    pub fn is_gain(&self) -> bool {
        matches!(
            self,
            RuleParameter::Kp | RuleParameter::Ki | RuleParameter::Kd
        )
    }
}

pub fn basis(l_over_t: f64, alpha: f64) -> [f64; 12] {
    TERMS.map(|(i, j)| l_over_t.powi(i) * alpha.powi(j))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuningRuleCoefficients(pub [f64; 12]);

impl TuningRuleCoefficients {
    pub fn eval(&self, l_over_t: f64, alpha: f64) -> f64 {
        basis(l_over_t, alpha)
            .iter()
            .zip(&self.0)
            .map(|(b, c)| b * c)
            .sum()
    }
}

/// Coefficient sets for all five parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuningRule {
    pub kp: TuningRuleCoefficients,
    pub ki: TuningRuleCoefficients,
    pub kd: TuningRuleCoefficients,
    pub lambda: TuningRuleCoefficients,
    pub mu: TuningRuleCoefficients,
}

impl TuningRule {
    /// The published regression coefficients.
    pub fn published() -> Self {
        let c = TuningRuleCoefficients;
        Self {
            kp: c([
                0.4225, -0.3738, -0.8846, 0.08037, 2.079, 0.05753, -0.4099, -1.245, 0.935, 0.1884,
                0.1266, -0.3623,
            ]),
            ki: c([
                0.001375, 1.002, 0.7251, -0.2251, -1.216, -1.36, 0.3161, 0.09725, 1.389, -0.07726,
                0.07146, -0.4156,
            ]),
            kd: c([
                3.39, -3.976, -8.749, 0.8184, 7.177, 12.95, -1.484, -3.758, -7.427, 0.6184, 0.3642,
                1.508,
            ]),
            lambda: c([
                0.5972, -0.1805, -0.3615, 0.04781, -0.3342, 2.808, 0.08372, 0.03983, -2.304,
                -0.05261, 0.08205, 0.5399,
            ]),
            mu: c([
                0.06535, 0.1732, -0.2331, 0.1506, -0.2898, 0.3122, 0.3712, 0.01343, -0.05011,
                -0.1479, 0.04369, -0.01218,
            ]),
        }
    }

    pub fn get(&self, p: RuleParameter) -> &TuningRuleCoefficients {
        match p {
            RuleParameter::Kp => &self.kp,
            RuleParameter::Ki => &self.ki,
            RuleParameter::Kd => &self.kd,
            RuleParameter::Lambda => &self.lambda,
            RuleParameter::Mu => &self.mu,
        }
    }
}

impl Default for TuningRule {
    fn default() -> Self {
        Self::published()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleEvaluation {
    /// Not validated: extrapolation can push the orders outside `[0, 2]`.
    pub controller: FopidController,
    /// Input lies outside the fitted domain.
    pub extrapolated: bool,
}

/// Evaluates `rule` at `(L/T, α)` for process gain `k`.
pub fn eval_tuning_rule_with(
    rule: &TuningRule,
    l_over_t: f64,
    alpha: f64,
    k: f64,
) -> Result<RuleEvaluation> {
    if !(l_over_t.is_finite() && alpha.is_finite() && k.is_finite()) {
        return Err(Error::NonFinite("tuning rule input"));
    }
    if k == 0.0 {
        return Err(Error::invalid("process gain K must be non-zero"));
    }
    let inside = |v: f64, (lo, hi): (f64, f64)| (lo..=hi).contains(&v);
    let extrapolated = !(inside(l_over_t, L_OVER_T_RANGE) && inside(alpha, ALPHA_RANGE));
    let at = |c: &TuningRuleCoefficients| c.eval(l_over_t, alpha);
    Ok(RuleEvaluation {
        controller: FopidController {
            kp: at(&rule.kp) / k,
            ki: at(&rule.ki) / k,
            kd: at(&rule.kd) / k,
            lambda: at(&rule.lambda),
            mu: at(&rule.mu),
        },
        extrapolated,
    })
}

/// [`eval_tuning_rule_with`] using the published coefficients.
pub fn eval_tuning_rule(l_over_t: f64, alpha: f64, k: f64) -> Result<RuleEvaluation> {
    eval_tuning_rule_with(&TuningRule::published(), l_over_t, alpha, k)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitDiagnostics {
    pub r2: f64,
    pub adjusted_r2: f64,
    /// `√(SSE / (n − 12))`.
    pub rmse: f64,
    pub n: usize,
    pub outliers_removed: usize,
}

/// `1 − (1 − R²)(n − 1)/(n − p − 1)`.
pub fn adjusted_r2(r2: f64, n: usize, predictors: usize) -> Result<f64> {
    if n <= predictors + 1 {
        return Err(Error::invalid(format!(
            "adjusted R² needs more than {} points, got {n}",
            predictors + 1
        )));
    }
    Ok(1.0 - (1.0 - r2) * (n - 1) as f64 / (n - predictors - 1) as f64)
}

fn design_matrix(points: &[(f64, f64, f64)]) -> DMatrix<f64> {
    DMatrix::from_fn(points.len(), TERMS.len(), |r, c| {
        let (x, a, _) = points[r];
        let (i, j) = TERMS[c];
        x.powi(i) * a.powi(j)
    })
}

fn residuals(points: &[(f64, f64, f64)], coef: &TuningRuleCoefficients) -> Vec<f64> {
    points
        .iter()
        .map(|&(x, a, v)| v - coef.eval(x, a))
        .collect()
}

/// Ordinary least squares on `(L/T, α, value)` triples.
pub fn fit_polynomial_surface(
    points: &[(f64, f64, f64)],
) -> Result<(TuningRuleCoefficients, FitDiagnostics)> {
    let n = points.len();
    if n <= TERMS.len() {
        return Err(Error::invalid(format!(
            "need at least {} points for a {}-term fit, got {n}",
            TERMS.len() + 1,
            TERMS.len()
        )));
    }
    if points
        .iter()
        .any(|p| !(p.0.is_finite() && p.1.is_finite() && p.2.is_finite()))
    {
        return Err(Error::NonFinite("fit data"));
    }
    let x = design_matrix(points);
    let y = DVector::from_iterator(n, points.iter().map(|p| p.2));
    let svd = x.svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * n as f64 * f64::EPSILON;
    let rank = svd.rank(tol);
    if rank < TERMS.len() {
        return Err(Error::RankDeficient {
            rank,
            columns: TERMS.len(),
        });
    }
    let beta = svd
        .solve(&y, tol)
        .map_err(|e| Error::invalid(e.to_string()))?;
    let mut c = [0.0; 12];
    c.copy_from_slice(beta.as_slice());
    let coef = TuningRuleCoefficients(c);

    let res = residuals(points, &coef);
    let sse: f64 = res.iter().map(|r| r * r).sum();
    let mean = y.mean();
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let r2 = if sst > 0.0 { 1.0 - sse / sst } else { 1.0 };
    Ok((
        coef,
        FitDiagnostics {
            r2,
            adjusted_r2: adjusted_r2(r2, n, PREDICTORS)?,
            rmse: (sse / (n - TERMS.len()) as f64).sqrt(),
            n,
            outliers_removed: 0,
        },
    ))
}

/// Indices whose residual exceeds `k·σ`, with `σ = √(SSE/n)` over all points.
pub fn detect_outliers(
    points: &[(f64, f64, f64)],
    coef: &TuningRuleCoefficients,
    k: f64,
) -> Vec<usize> {
    if points.is_empty() {
        return Vec::new();
    }
    let res = residuals(points, coef);
    let sigma = (res.iter().map(|r| r * r).sum::<f64>() / res.len() as f64).sqrt();
    let scale = points.iter().map(|p| p.2.abs()).fold(1.0, f64::max);
    let floor = 1e-10 * scale;
    res.iter()
        .enumerate()
        .filter(|(_, r)| r.abs() > k * sigma && r.abs() > floor)
        .map(|(i, _)| i)
        .collect()
}

/// Fits, then drops the worst flagged point and refits, up to `max_removals`
/// times. Returns the removed indices (into `points`) in removal order.
pub fn fit_with_outlier_removal(
    points: &[(f64, f64, f64)],
    k: f64,
    max_removals: usize,
) -> Result<(TuningRuleCoefficients, FitDiagnostics, Vec<usize>)> {
    let mut index: Vec<usize> = (0..points.len()).collect();
    let mut removed = Vec::new();
    loop {
        let current: Vec<(f64, f64, f64)> = index.iter().map(|&i| points[i]).collect();
        let (coef, mut diag) = fit_polynomial_surface(&current)?;
        diag.outliers_removed = removed.len();
        if removed.len() == max_removals || current.len() <= TERMS.len() + 1 {
            return Ok((coef, diag, removed));
        }
        let flagged = detect_outliers(&current, &coef, k);
        let res = residuals(&current, &coef);
        let Some(&worst) = flagged
            .iter()
            .max_by(|&&a, &&b| res[a].abs().total_cmp(&res[b].abs()))
        else {
            return Ok((coef, diag, removed));
        };
        removed.push(index.remove(worst));
    }
}

/// One row of the median-solution table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MedianPoint {
    pub controller: FopidController,
    pub l_over_t: f64,
    pub alpha: f64,
}

impl MedianPoint {
    pub fn value(&self, p: RuleParameter) -> f64 {
        let c = &self.controller;
        match p {
            RuleParameter::Kp => c.kp,
            RuleParameter::Ki => c.ki,
            RuleParameter::Kd => c.kd,
            RuleParameter::Lambda => c.lambda,
            RuleParameter::Mu => c.mu,
        }
    }
}

/// Reads `Kp,Ki,Kd,lambda,mu,L_over_T,alpha` rows.
pub fn read_median_solutions<R: BufRead>(reader: R) -> Result<Vec<MedianPoint>> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::invalid("empty median-solution file"))??;
    if header.trim() != "Kp,Ki,Kd,lambda,mu,L_over_T,alpha" {
        return Err(Error::invalid(format!("unexpected header: {header}")));
    }
    let mut out = Vec::new();
    for (no, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::invalid(format!("line {}: {e}", no + 2)))?;
        if v.len() != 7 {
            return Err(Error::invalid(format!(
                "line {}: expected 7 fields, got {}",
                no + 2,
                v.len()
            )));
        }
        out.push(MedianPoint {
            controller: FopidController {
                kp: v[0],
                ki: v[1],
                kd: v[2],
                lambda: v[3],
                mu: v[4],
            },
            l_over_t: v[5],
            alpha: v[6],
        });
    }
    Ok(out)
}

/// The bundled 24-point median-solution table.
pub fn median_solutions() -> Vec<MedianPoint> {
    read_median_solutions(MEDIAN_CSV.as_bytes()).expect("bundled table parses")
}

/// `(L/T, α, value)` triples for one parameter.
pub fn surface_points(data: &[MedianPoint], p: RuleParameter) -> Vec<(f64, f64, f64)> {
    data.iter()
        .map(|m| (m.l_over_t, m.alpha, m.value(p)))
        .collect()
}
