//! Least-squares estimation of conditional expectations across simulated
//! paths, the workhorse behind every backward scheme.
//!
//! Continuation values are projected onto a configurable feature basis; the
//! default is a 13-function family of sorted-price monomials and payoff
//! terms in the spirit of the classical max-call regression bases.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Ridge added to the normal matrix when the design matrix is rank-deficient.
pub const RIDGE: f64 = 1e-10;

/// Feature basis for the conditional-expectation regressions.
#[derive(Clone)]
pub enum BasisSpec {
    /// Monomials of the descending-sorted prices up to `degree` (pure powers
    /// first, then cross monomials), optionally augmented with the payoff
    /// features `{g, g², g·y2}`.
    ///
    /// The payoff cross term uses the second-largest price rather than the
    /// largest: for the max-call `g = (y1 − K)+` one has `g·y1 = g² + K·g`
    /// identically, so a `g·y1` feature would make the design matrix exactly
    /// rank-deficient. With a single asset the cross term is dropped for the
    /// same reason.
    PolynomialSorted { degree: u32, include_payoff_terms: bool },
    /// Monomials up to degree three plus payoff terms plus European option
    /// values evaluated at the remaining time to maturity: the per-asset
    /// calls `e1, e2` and, with two assets, the European max-call `M`,
    /// together with their squares and products. The European features track
    /// the curvature of continuation values near the money far better than
    /// global polynomials, which keeps the upward bias of regression-based
    /// value iteration small.
    ///
    /// Two assets give 23 features:
    /// `{1, y1, y2, y1², y2², y1y2, g, g², g·y2, e1, e2, M, M²,
    ///   e1², e2², e1e2, y1³, y2³, y1²y2, y1y2², M·y1, M·y2, M·g}`.
    EuropeanControls { strike: f64, rate: f64, dividend: f64, sigma: f64 },
    /// Caller-supplied feature map; receives `(state, payoff_value, tau)`.
    Custom(CustomBasis),
}

#[derive(Clone)]
pub struct CustomBasis {
    pub count: usize,
    pub eval: Arc<dyn Fn(&[f64], f64, f64, &mut Vec<f64>) + Send + Sync>,
}

impl std::fmt::Debug for BasisSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BasisSpec::PolynomialSorted { degree, include_payoff_terms } => f
                .debug_struct("PolynomialSorted")
                .field("degree", degree)
                .field("include_payoff_terms", include_payoff_terms)
                .finish(),
            BasisSpec::EuropeanControls { strike, .. } => f
                .debug_struct("EuropeanControls")
                .field("strike", strike)
                .finish(),
            BasisSpec::Custom(c) => f.debug_struct("Custom").field("count", &c.count).finish(),
        }
    }
}

impl BasisSpec {
    /// The 13-function default for two assets: sorted prices y1 >= y2 give
    /// `{1, y1, y1², y1³, y2, y2², y2³, y1y2, y1²y2, y1y2², g, g², g·y2}`.
    pub fn default_13() -> Self {
        BasisSpec::PolynomialSorted { degree: 3, include_payoff_terms: true }
    }

    pub fn constant_only() -> Self {
        BasisSpec::PolynomialSorted { degree: 0, include_payoff_terms: false }
    }

    /// Number of features for `dim` assets.
    pub fn count(&self, dim: usize) -> usize {
        match self {
            BasisSpec::PolynomialSorted { degree, include_payoff_terms } => {
                let degree = *degree as usize;
                let pure = dim * degree;
                let cross: usize = (2..=degree)
                    .map(|total| count_cross_monomials(dim, total))
                    .sum();
                let payoff = if !include_payoff_terms {
                    0
                } else if dim >= 2 {
                    3
                } else {
                    2
                };
                1 + pure + cross + payoff
            }
            BasisSpec::EuropeanControls { .. } => {
                if dim >= 2 {
                    23
                } else {
                    9
                }
            }
            BasisSpec::Custom(c) => c.count,
        }
    }

    /// Evaluates the feature vector at zero remaining maturity; the first
    /// entry is always the constant 1.
    pub fn eval(&self, state: &[f64], payoff_value: f64) -> Vec<f64> {
        self.eval_with_tau(state, payoff_value, 0.0)
    }

    /// Evaluates the feature vector with `tau` years to maturity.
    pub fn eval_with_tau(&self, state: &[f64], payoff_value: f64, tau: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.count(state.len()));
        self.eval_into(state, payoff_value, tau, &mut out);
        out
    }

    pub fn eval_into(&self, state: &[f64], payoff_value: f64, tau: f64, out: &mut Vec<f64>) {
        out.clear();
        match self {
            BasisSpec::PolynomialSorted { degree, include_payoff_terms } => {
                let degree = *degree as usize;
                let mut sorted: Vec<f64> = state.to_vec();
                sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());

                out.push(1.0);
                for &y in &sorted {
                    let mut p = 1.0;
                    for _ in 0..degree {
                        p *= y;
                        out.push(p);
                    }
                }
                for total in 2..=degree {
                    push_cross_monomials(&sorted, total, out);
                }
                if *include_payoff_terms {
                    let g = payoff_value;
                    out.push(g);
                    out.push(g * g);
                    if sorted.len() >= 2 {
                        out.push(g * sorted[1]);
                    }
                }
            }
            BasisSpec::EuropeanControls { strike, rate, dividend, sigma } => {
                let mut sorted: Vec<f64> = state.to_vec();
                sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
                let g = payoff_value;
                let euro = |s: f64| {
                    crate::market::black_scholes_call(s, *strike, *rate, *dividend, *sigma, tau)
                };
                out.push(1.0);
                if sorted.len() >= 2 {
                    let (y1, y2) = (sorted[0], sorted[1]);
                    let (e1, e2) = (euro(y1), euro(y2));
                    let m = crate::market::european_max_call(
                        &sorted[..2],
                        *strike,
                        *rate,
                        *dividend,
                        *sigma,
                        tau,
                    );
                    push_european_features(y1, y2, g, e1, e2, m, out);
                } else {
                    let y = sorted[0];
                    let e = euro(y);
                    out.extend_from_slice(&[y, y * y, y * y * y, g, g * g, e, e * e, e * y]);
                }
            }
            BasisSpec::Custom(c) => (c.eval)(state, payoff_value, tau, out),
        }
    }
}

/// Two-asset European-control feature block, shared with the cached
/// assembly path in the schemes.
#[inline]
pub(crate) fn push_european_features(
    y1: f64,
    y2: f64,
    g: f64,
    e1: f64,
    e2: f64,
    m: f64,
    out: &mut Vec<f64>,
) {
    out.extend_from_slice(&[
        y1,
        y2,
        y1 * y1,
        y2 * y2,
        y1 * y2,
        g,
        g * g,
        g * y2,
        e1,
        e2,
        m,
        m * m,
        e1 * e1,
        e2 * e2,
        e1 * e2,
        y1 * y1 * y1,
        y2 * y2 * y2,
        y1 * y1 * y2,
        y1 * y2 * y2,
        m * y1,
        m * y2,
        m * g,
    ]);
}

fn count_cross_monomials(dim: usize, total: usize) -> usize {
    let mut count = 0;
    visit_compositions(dim, total, &mut |exps| {
        if exps.iter().filter(|&&e| e > 0).count() >= 2 {
            count += 1;
        }
    });
    count
}

fn push_cross_monomials(sorted: &[f64], total: usize, out: &mut Vec<f64>) {
    visit_compositions(sorted.len(), total, &mut |exps| {
        if exps.iter().filter(|&&e| e > 0).count() >= 2 {
            let mut v = 1.0;
            for (y, &e) in sorted.iter().zip(exps) {
                for _ in 0..e {
                    v *= y;
                }
            }
            out.push(v);
        }
    });
}

/// Visits all exponent tuples summing to `total` in descending lexicographic
/// order (so for two assets and total 3: (2,1) before (1,2)).
fn visit_compositions(dim: usize, total: usize, visit: &mut impl FnMut(&[usize])) {
    fn go(exps: &mut Vec<usize>, remaining: usize, dim: usize, visit: &mut impl FnMut(&[usize])) {
        if exps.len() == dim - 1 {
            exps.push(remaining);
            visit(exps);
            exps.pop();
            return;
        }
        for e in (0..=remaining).rev() {
            exps.push(e);
            go(exps, remaining - e, dim, visit);
            exps.pop();
        }
    }
    if dim == 0 {
        return;
    }
    go(&mut Vec::with_capacity(dim), total, dim, visit);
}

/// Result of one least-squares solve.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub coefficients: Vec<f64>,
    /// Set when rank deficiency forced the ridge fallback.
    pub ridge_fallback: bool,
}

/// Solves `min ||X beta − y||²` by Householder QR on the column-major design
/// matrix. Columns are equilibrated before factoring; if the triangular
/// factor signals rank deficiency the solve is repeated with ridge rows
/// appended and the outcome is flagged.
pub fn fit_least_squares(columns: &[Vec<f64>], targets: &[f64]) -> Result<FitOutcome> {
    let mut out = fit_least_squares_multi(columns, &[targets])?;
    Ok(out.pop().expect("one outcome per target set"))
}

/// Least squares for several target vectors against one design matrix; the
/// factorization is shared, so extra targets cost one column pass each.
pub fn fit_least_squares_multi(
    columns: &[Vec<f64>],
    target_sets: &[&[f64]],
) -> Result<Vec<FitOutcome>> {
    let n_features = columns.len();
    if n_features == 0 {
        return Err(Error::Config("regression needs at least one feature".into()));
    }
    let n_rows = columns[0].len();
    if columns.iter().any(|c| c.len() != n_rows) || target_sets.iter().any(|t| t.len() != n_rows) {
        return Err(Error::Config("design matrix columns must match target length".into()));
    }
    if n_rows < n_features {
        return Err(Error::InsufficientData { needed: n_features, got: n_rows });
    }

    // Column equilibration keeps the triangular factor's diagonal comparable
    // across features of very different magnitude (1 vs price cubes).
    let scales: Vec<f64> = columns
        .iter()
        .map(|c| {
            let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 { norm } else { 1.0 }
        })
        .collect();

    let solve = |ridge: bool| -> Option<Vec<Vec<f64>>> {
        let extra = if ridge { n_features } else { 0 };
        let m = n_rows + extra;
        let mut work: Vec<Vec<f64>> = columns
            .iter()
            .zip(&scales)
            .enumerate()
            .map(|(j, (c, &s))| {
                let mut col: Vec<f64> = c.iter().map(|v| v / s).collect();
                col.resize(m, 0.0);
                if ridge {
                    col[n_rows + j] = RIDGE.sqrt();
                }
                col
            })
            .collect();
        let mut rhs: Vec<Vec<f64>> = target_sets
            .iter()
            .map(|t| {
                let mut r = t.to_vec();
                r.resize(m, 0.0);
                r
            })
            .collect();

        let mut diag = vec![0.0f64; n_features];
        for j in 0..n_features {
            // Householder reflector for column j, rows j...
            let (head, tail) = work.split_at_mut(j + 1);
            let col = &mut head[j];
            let norm = col[j..].iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                diag[j] = 0.0;
                continue;
            }
            let alpha = if col[j] >= 0.0 { -norm } else { norm };
            col[j] -= alpha;
            let vnorm2: f64 = col[j..].iter().map(|v| v * v).sum();
            diag[j] = alpha;
            if vnorm2 > 0.0 {
                let beta = 2.0 / vnorm2;
                let v = &col[j..];
                tail.par_iter_mut().chain(rhs.par_iter_mut()).for_each(|other| {
                    let dot: f64 = v.iter().zip(&other[j..]).map(|(a, b)| a * b).sum();
                    let w = beta * dot;
                    other[j..].iter_mut().zip(v).for_each(|(o, a)| *o -= w * a);
                });
            }
        }

        // Rank check on the scaled triangular diagonal.
        let max_diag = diag.iter().fold(0.0f64, |acc, d| acc.max(d.abs()));
        let deficient = diag.iter().any(|d| d.abs() <= 1e-12 * max_diag.max(1e-300));
        if deficient && !ridge {
            return None;
        }

        // Back substitution on R (strict upper part lives above the reflectors).
        let betas = rhs
            .iter()
            .map(|r| {
                let mut beta = vec![0.0f64; n_features];
                for j in (0..n_features).rev() {
                    let mut acc = r[j];
                    for (i, b) in beta.iter().enumerate().skip(j + 1) {
                        acc -= work[i][j] * b;
                    }
                    beta[j] = if diag[j] != 0.0 { acc / diag[j] } else { 0.0 };
                }
                for (b, &s) in beta.iter_mut().zip(&scales) {
                    *b /= s;
                }
                beta
            })
            .collect();
        Some(betas)
    };

    let (betas, ridge_fallback) = match solve(false) {
        Some(betas) => (betas, false),
        None => {
            let betas = solve(true)
                .ok_or_else(|| Error::Numeric("ridge-regularized solve failed".into()))?;
            (betas, true)
        }
    };
    Ok(betas
        .into_iter()
        .map(|coefficients| FitOutcome { coefficients, ridge_fallback })
        .collect())
}

/// Fitted conditional-expectation models, one coefficient vector per
/// timestep.
#[derive(Debug, Clone)]
pub struct RegressionModel {
    pub spec: BasisSpec,
    pub dim: usize,
    coefficients: Vec<Option<Vec<f64>>>,
    ridge_flags: Vec<bool>,
}

impl RegressionModel {
    pub fn new(spec: BasisSpec, dim: usize, n_steps: usize) -> Self {
        RegressionModel {
            spec,
            dim,
            coefficients: vec![None; n_steps + 1],
            ridge_flags: vec![false; n_steps + 1],
        }
    }

    pub fn set(&mut self, step: usize, outcome: FitOutcome) {
        self.ridge_flags[step] = outcome.ridge_fallback;
        self.coefficients[step] = Some(outcome.coefficients);
    }

    pub fn coefficients(&self, step: usize) -> Option<&[f64]> {
        self.coefficients.get(step).and_then(|c| c.as_deref())
    }

    pub fn ridge_count(&self) -> usize {
        self.ridge_flags.iter().filter(|&&f| f).count()
    }

    /// Predicted conditional expectation at `step` for one path state;
    /// `tau` is the remaining time to maturity at that step.
    pub fn predict(&self, step: usize, state: &[f64], payoff_value: f64, tau: f64) -> Result<f64> {
        let coeffs = self
            .coefficients(step)
            .ok_or_else(|| Error::State(format!("no regression fitted at timestep {step}")))?;
        let features = self.spec.eval_with_tau(state, payoff_value, tau);
        Ok(dot(coeffs, &features))
    }

    /// Coefficient dump as CSV (`step,feature,coefficient`), for debugging.
    pub fn dump_csv<W: std::io::Write>(&self, out: &mut W) -> Result<()> {
        let io_err = |e: std::io::Error| Error::Io(format!("coefficient dump failed: {e}"));
        writeln!(out, "step,feature,coefficient").map_err(io_err)?;
        for (k, coeffs) in self.coefficients.iter().enumerate() {
            if let Some(coeffs) = coeffs {
                for (j, c) in coeffs.iter().enumerate() {
                    writeln!(out, "{k},{j},{c}").map_err(io_err)?;
                }
            }
        }
        Ok(())
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
