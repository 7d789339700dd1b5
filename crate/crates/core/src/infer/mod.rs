//! Direct inference of a source's nine predictive values from campaign
//! aggregates.
//!
//! For every campaign the expected ground-truth counts are the source's
//! counts pushed through the predictive values, `G ≈ Pᵀ D`. The estimate is
//! the feasible `P` minimizing the summed squared residuals over all
//! campaigns. Because every column of `P` shares the design `D`, the
//! objective decouples into three copies of the 3x3 normal matrix
//! `A = Σ DDᵀ`, which is what [`build_qp`] assembles for the solver.

pub mod linalg;
pub mod qp;

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use self::linalg::{invert3, sym_eigenvalues3};
use self::qp::{constraint_violation, solve_simplex_qp, QpError, SimplexQp, SolverOptions, DIM};
use crate::domain::{CampaignAggregate, PredictiveValues};
use crate::scalar::{lift, Scalar};

/// Default half-width of the `|α₁ − β₂|` unbiasedness band.
pub const DEFAULT_XI: f64 = 0.05;

/// Fewest campaigns for which the estimate is unique.
pub const MIN_CAMPAIGNS: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InferError {
    #[error("need at least {MIN_CAMPAIGNS} campaigns, got {0}")]
    TooFewCampaigns(usize),
    #[error("campaign populations differ ({0} vs {1}); enable normalization")]
    UnequalPopulations(f64, f64),
    #[error("solver stopped after {iterations} iterations with KKT residual {residual:e}")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error(transparent)]
    Infeasible(#[from] QpError),
    #[error("confidence intervals need at least 4 campaigns (2k-6 >= 1), got {0}")]
    InsufficientDof(usize),
    #[error("confidence level parameter delta must lie in (0, 1), got {0}")]
    InvalidDelta(f64),
    #[error("campaign design matrix is singular; standard errors undefined")]
    SingularDesign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpProblem<T, C = u64> {
    pub campaigns: Vec<CampaignAggregate<C>>,
    /// Half-width ξ of the unbiasedness band.
    pub xi: T,
    /// Divide each campaign's counts by its population.
    pub normalize: bool,
}

impl<T: Scalar, C> QpProblem<T, C> {
    pub fn new(campaigns: Vec<CampaignAggregate<C>>) -> Self {
        Self {
            campaigns,
            xi: T::lit(DEFAULT_XI),
            normalize: true,
        }
    }

    pub fn with_xi(mut self, xi: T) -> Self {
        self.xi = xi;
        self
    }

    pub fn with_normalize(mut self, normalize: bool) -> Self {
        self.normalize = normalize;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpSolution<T> {
    pub values: PredictiveValues<T>,
    /// Sum of squared residuals at the optimum (in fractions when normalized).
    pub objective: T,
    /// Per-campaign `Pᵀ D − G`.
    pub residuals: Vec<[T; 3]>,
    pub iterations: usize,
    pub converged: bool,
    pub kkt_residual: T,
    /// False when the campaigns' source triples do not span the space, in
    /// which case the minimizer is not unique.
    pub unique: bool,
}

/// `(D, G)` for each campaign in the objective's units.
fn design_rows<T: Scalar, C: Copy + ToPrimitive>(problem: &QpProblem<T, C>) -> Vec<([T; 3], [T; 3])> {
    problem
        .campaigns
        .iter()
        .map(|c| {
            if problem.normalize {
                c.fractions::<T>()
            } else {
                (c.source.lift(), c.truth.lift())
            }
        })
        .collect()
}

fn normal_matrix<T: Scalar>(rows: &[([T; 3], [T; 3])]) -> [[T; 3]; 3] {
    std::array::from_fn(|r| {
        std::array::from_fn(|s| rows.iter().map(|(d, _)| d[r] * d[s]).sum())
    })
}

/// Assembles the 9-variable quadratic program for a set of campaigns.
pub fn build_qp<T: Scalar, C: Copy + ToPrimitive>(problem: &QpProblem<T, C>) -> SimplexQp<T> {
    let rows = design_rows(problem);
    let a = normal_matrix(&rows);
    let mut quad = [[T::zero(); DIM]; DIM];
    let mut lin = [T::zero(); DIM];
    for r in 0..3 {
        for c in 0..3 {
            for s in 0..3 {
                quad[3 * r + c][3 * s + c] = a[r][s];
            }
            lin[3 * r + c] = rows.iter().map(|(d, g)| d[r] * g[c]).sum();
        }
    }
    let constant = rows
        .iter()
        .flat_map(|(_, g)| g.iter().map(|&v| v * v))
        .sum();
    SimplexQp {
        quad,
        lin,
        constant,
        xi: problem.xi,
    }
}

fn residuals<T: Scalar>(values: &PredictiveValues<T>, rows: &[([T; 3], [T; 3])]) -> Vec<[T; 3]> {
    let p = values.rows();
    rows.iter()
        .map(|(d, g)| std::array::from_fn(|c| (0..3).map(|r| d[r] * p[r][c]).sum::<T>() - g[c]))
        .collect()
}

fn check_problem<T: Scalar, C: Copy + ToPrimitive>(problem: &QpProblem<T, C>) -> Result<(), InferError> {
    let k = problem.campaigns.len();
    if k < MIN_CAMPAIGNS {
        return Err(InferError::TooFewCampaigns(k));
    }
    if !problem.normalize {
        let first: T = lift(problem.campaigns[0].population);
        if let Some(other) = problem
            .campaigns
            .iter()
            .map(|c| lift::<T, _>(c.population))
            .find(|&m| m != first)
        {
            return Err(InferError::UnequalPopulations(first.to_f64_lossy(), other.to_f64_lossy()));
        }
    }
    Ok(())
}

/// Estimates the predictive values minimizing the squared residuals over
/// the simplex constraints and the unbiasedness band.
pub fn infer_predictive_values<T: Scalar, C: Copy + ToPrimitive>(
    problem: &QpProblem<T, C>,
) -> Result<QpSolution<T>, InferError> {
    check_problem(problem)?;
    let qp = build_qp(problem);
    let out = solve_simplex_qp(&qp, &SolverOptions::default())?;
    if !out.converged {
        return Err(InferError::NonConvergence {
            iterations: out.iterations,
            residual: out.kkt_residual.to_f64_lossy(),
        });
    }
    debug_assert!(constraint_violation(&out.x, problem.xi) <= T::solver_tolerance());

    let rows = design_rows(problem);
    let values = PredictiveValues {
        alpha: [out.x[0], out.x[1], out.x[2]],
        beta: [out.x[3], out.x[4], out.x[5]],
        gamma: [out.x[6], out.x[7], out.x[8]],
    };
    let res = residuals(&values, &rows);
    let objective = res.iter().flat_map(|r| r.iter().map(|&v| v * v)).sum();
    let ev = sym_eigenvalues3(&normal_matrix(&rows));
    let unique = ev[0] > ev[2] * T::lit(1e-10).max(T::epsilon() * T::lit(100.0));
    Ok(QpSolution {
        values,
        objective,
        residuals: res,
        iterations: out.iterations,
        converged: out.converged,
        kkt_residual: out.kkt_residual,
        unique,
    })
}

/// Expected ground-truth positives given source counts: `D⁺α₁ + D⁻β₁ + D○γ₁`.
pub fn estimate_positives_inferred<T: Scalar>(values: &PredictiveValues<T>, d_counts: [T; 3]) -> T {
    d_counts[0] * values.alpha[0] + d_counts[1] * values.beta[0] + d_counts[2] * values.gamma[0]
}

/// Two-sided `(1 − δ)` confidence half-widths for all nine values, in
/// [`PredictiveValues::to_array`] order.
///
/// Eliminating the unknown column through the row sums leaves a linear
/// regression with six coefficients (the positive and negative columns) and
/// two observations per campaign; the third residual of each campaign is
/// minus the sum of the other two. The residual mean square over
/// `2k − 6` degrees of freedom times the diagonal of `A⁻¹` gives the
/// coefficient variances, and the unknown column, being one minus the other
/// two, gets the sum of their variances. Half-widths are the standard
/// errors scaled by the Student-t quantile at `1 − δ/2`.
pub fn confidence_interval<T: Scalar, C: Copy + ToPrimitive>(
    solution: &QpSolution<T>,
    problem: &QpProblem<T, C>,
    delta: T,
) -> Result<[T; 9], InferError> {
    if !(delta > T::zero() && delta < T::one()) {
        return Err(InferError::InvalidDelta(delta.to_f64_lossy()));
    }
    let k = problem.campaigns.len();
    if k < 4 {
        return Err(InferError::InsufficientDof(k));
    }
    let dof = 2 * k - 6;
    let rows = design_rows(problem);
    let rss: T = residuals(&solution.values, &rows)
        .iter()
        .map(|r| r[0] * r[0] + r[1] * r[1])
        .sum();
    let s2 = rss / lift(dof);
    let inv = invert3(&normal_matrix(&rows), T::epsilon() * T::lit(16.0)).ok_or(InferError::SingularDesign)?;
    let t = StudentsT::new(0.0, 1.0, dof as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(1.0 - delta.to_f64_lossy() / 2.0);
    let t: T = T::lit(t);
    Ok(std::array::from_fn(|i| {
        let (r, c) = (i / 3, i % 3);
        let var = s2 * inv[r][r] * if c == 2 { T::two() } else { T::one() };
        var.max(T::zero()).sqrt() * t
    }))
}
