//! Convex quadratic minimization over three probability simplices coupled by
//! a band on the precision / negative-predictive-value gap.
//!
//! Variables are laid out row-major as in [`PredictiveValues::to_array`]:
//! `x = [α₁, α₂, α₃, β₁, β₂, β₃, γ₁, γ₂, γ₃]`. The feasible set is
//!
//! ```text
//! x ≥ 0,   α₁+α₂+α₃ = β₁+β₂+β₃ = γ₁+γ₂+γ₃ = 1,   |α₁ − β₂| ≤ ξ
//! ```
//!
//! The solver runs accelerated projected gradient (FISTA with gradient-based
//! restart) using an exact Euclidean projection onto that set, and
//! periodically tries to finish exactly by solving the equality-constrained
//! KKT system of the active set the iterate has identified. A candidate is
//! accepted only if its projected-gradient residual is below tolerance, so
//! both paths stop on the same certificate.
//!
//! [`PredictiveValues::to_array`]: crate::domain::PredictiveValues::to_array

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::linalg::solve_dense;
use crate::scalar::Scalar;

pub const DIM: usize = 9;
const ALPHA1: usize = 0;
const BETA2: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QpError {
    #[error("unbiasedness band half-width must be a non-negative number, got {0}")]
    Infeasible(f64),
}

/// `f(x) = xᵀ Q x − 2 bᵀ x + c` with `Q` symmetric positive semi-definite.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexQp<T> {
    pub quad: [[T; DIM]; DIM],
    pub lin: [T; DIM],
    pub constant: T,
    /// Half-width ξ of the band `|α₁ − β₂| ≤ ξ`.
    pub xi: T,
}

impl<T: Scalar> SimplexQp<T> {
    pub fn objective(&self, x: &[T; DIM]) -> T {
        let mut f = self.constant;
        for i in 0..DIM {
            let qx: T = (0..DIM).map(|j| self.quad[i][j] * x[j]).sum();
            f = f + x[i] * qx - T::two() * self.lin[i] * x[i];
        }
        f
    }

    pub fn gradient(&self, x: &[T; DIM]) -> [T; DIM] {
        std::array::from_fn(|i| {
            let qx: T = (0..DIM).map(|j| self.quad[i][j] * x[j]).sum();
            T::two() * (qx - self.lin[i])
        })
    }

    /// Upper bound on the gradient's Lipschitz constant, `2 λ_max(Q)`.
    fn lipschitz(&self) -> T {
        let trace: T = (0..DIM).map(|i| self.quad[i][i]).sum();
        let row_sum = self
            .quad
            .iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<T>())
            .fold(T::zero(), T::max);
        let l = T::two() * trace.min(row_sum);
        if l > T::zero() {
            l
        } else {
            T::one()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions<T> {
    pub tolerance: T,
    pub max_iterations: usize,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            tolerance: T::solver_tolerance(),
            max_iterations: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpOutcome<T> {
    pub x: [T; DIM],
    pub objective: T,
    /// `‖x − Π(x − ∇f(x)/L)‖_∞`; zero exactly at a minimizer.
    pub kkt_residual: T,
    pub iterations: usize,
    pub converged: bool,
}

/// Euclidean projection onto the probability simplex in R³.
pub fn project_simplex3<T: Scalar>(v: [T; 3]) -> [T; 3] {
    let mut u = v;
    u.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cumsum = T::zero();
    let mut theta = T::zero();
    for (j, &uj) in u.iter().enumerate() {
        cumsum = cumsum + uj;
        let t = (cumsum - T::one()) / T::from_usize(j + 1).unwrap_or_else(T::one);
        if uj - t > T::zero() {
            theta = t;
        }
    }
    v.map(|x| (x - theta).max(T::zero()))
}

/// Projects `(a, b)` onto `{α ∈ Δ, β ∈ Δ, |α₁ − β₂| ≤ ξ}`.
///
/// When the band binds, the projection is `α = Π_Δ(a − μ s e₁)`,
/// `β = Π_Δ(b + μ s e₂)` for the multiplier `μ ≥ 0` that puts the gap on
/// the band edge (`s` is the sign of the violation); the gap is monotone in
/// `μ`, so bisection finds it. The returned pair is always feasible.
fn project_coupled<T: Scalar>(a: [T; 3], b: [T; 3], xi: T) -> ([T; 3], [T; 3]) {
    let alpha = project_simplex3(a);
    let beta = project_simplex3(b);
    let gap = alpha[0] - beta[1];
    if gap.abs() <= xi {
        return (alpha, beta);
    }
    let sign = gap.signum();
    let at = |mu: T| {
        let mut a2 = a;
        let mut b2 = b;
        a2[0] = a2[0] - sign * mu;
        b2[1] = b2[1] + sign * mu;
        let (al, be) = (project_simplex3(a2), project_simplex3(b2));
        (al, be, sign * (al[0] - be[1]))
    };
    let mut lo = T::zero();
    let mut hi = T::one();
    let mut hi_eval = at(hi);
    while hi_eval.2 > xi {
        lo = hi;
        hi = hi * T::two();
        hi_eval = at(hi);
    }
    for _ in 0..200 {
        let mid = (lo + hi) / T::two();
        if mid <= lo || mid >= hi {
            break;
        }
        let m = at(mid);
        if m.2 > xi {
            lo = mid;
        } else {
            hi = mid;
            hi_eval = m;
        }
    }
    (hi_eval.0, hi_eval.1)
}

/// Euclidean projection onto the feasible set.
pub fn project_feasible<T: Scalar>(x: &[T; DIM], xi: T) -> [T; DIM] {
    let (alpha, beta) = project_coupled([x[0], x[1], x[2]], [x[3], x[4], x[5]], xi);
    let gamma = project_simplex3([x[6], x[7], x[8]]);
    [
        alpha[0], alpha[1], alpha[2], beta[0], beta[1], beta[2], gamma[0], gamma[1], gamma[2],
    ]
}

/// Largest violation of the feasible set's constraints at `x`.
pub fn constraint_violation<T: Scalar>(x: &[T; DIM], xi: T) -> T {
    let mut worst = T::zero();
    for &v in x {
        worst = worst.max(-v).max(v - T::one());
    }
    for r in 0..3 {
        let s: T = x[3 * r..3 * r + 3].iter().copied().sum();
        worst = worst.max((s - T::one()).abs());
    }
    worst.max((x[ALPHA1] - x[BETA2]).abs() - xi)
}

fn residual<T: Scalar>(qp: &SimplexQp<T>, x: &[T; DIM], lip: T) -> T {
    let g = qp.gradient(x);
    let step: [T; DIM] = std::array::from_fn(|i| x[i] - g[i] / lip);
    let p = project_feasible(&step, qp.xi);
    x.iter()
        .zip(p.iter())
        .map(|(a, b)| (*a - *b).abs())
        .fold(T::zero(), T::max)
}

/// Solves the KKT system of the active set identified at `x` and returns
/// the candidate if it certifies optimality.
fn polish<T: Scalar>(qp: &SimplexQp<T>, x: &[T; DIM], lip: T, tol: T) -> Option<([T; DIM], T)> {
    let zero_tol = T::epsilon() * T::lit(16.0);
    let free: Vec<usize> = (0..DIM).filter(|&j| x[j] > zero_tol).collect();
    let pos = |j: usize| free.iter().position(|&f| f == j);

    let mut rows: Vec<(Vec<(usize, T)>, T)> = Vec::with_capacity(4);
    for r in 0..3 {
        let coeffs: Vec<(usize, T)> = (3 * r..3 * r + 3)
            .filter_map(|j| pos(j).map(|p| (p, T::one())))
            .collect();
        if coeffs.is_empty() {
            return None;
        }
        rows.push((coeffs, T::one()));
    }
    let gap = x[ALPHA1] - x[BETA2];
    if qp.xi < T::one() && gap.abs() >= qp.xi - T::lit(1e3) * zero_tol {
        let s = gap.signum();
        let coeffs: Vec<(usize, T)> = [(ALPHA1, s), (BETA2, -s)]
            .into_iter()
            .filter_map(|(j, c)| pos(j).map(|p| (p, c)))
            .collect();
        if !coeffs.is_empty() {
            rows.push((coeffs, qp.xi));
        }
    }

    let nf = free.len();
    let n = nf + rows.len();
    let mut kkt = vec![vec![T::zero(); n]; n];
    let mut rhs = vec![T::zero(); n];
    for (a, &i) in free.iter().enumerate() {
        for (b, &j) in free.iter().enumerate() {
            kkt[a][b] = T::two() * qp.quad[i][j];
        }
        rhs[a] = T::two() * qp.lin[i];
    }
    for (k, (coeffs, value)) in rows.iter().enumerate() {
        for &(p, c) in coeffs {
            kkt[nf + k][p] = c;
            kkt[p][nf + k] = c;
        }
        rhs[nf + k] = *value;
    }
    let sol = solve_dense(kkt, rhs, T::epsilon() * T::lit(64.0))?;

    let mut cand = [T::zero(); DIM];
    for (a, &i) in free.iter().enumerate() {
        cand[i] = sol[a];
    }
    if constraint_violation(&cand, qp.xi) > tol {
        return None;
    }
    let cand = project_feasible(&cand, qp.xi);
    let r = residual(qp, &cand, lip);
    (r < tol).then_some((cand, r))
}

/// Minimizes `qp` over the feasible set, starting from uniform rows.
pub fn solve_simplex_qp<T: Scalar>(
    qp: &SimplexQp<T>,
    opts: &SolverOptions<T>,
) -> Result<QpOutcome<T>, QpError> {
    if !(qp.xi >= T::zero()) {
        return Err(QpError::Infeasible(qp.xi.to_f64_lossy()));
    }
    let tol = opts.tolerance;
    let lip = qp.lipschitz();
    let finish = |x: [T; DIM], kkt_residual: T, iterations: usize| QpOutcome {
        objective: qp.objective(&x),
        x,
        kkt_residual,
        iterations,
        converged: kkt_residual < tol,
    };

    let mut x = project_feasible(&[T::one() / T::lit(3.0); DIM], qp.xi);
    let r0 = residual(qp, &x, lip);
    if r0 < tol {
        return Ok(finish(x, r0, 0));
    }
    let mut y = x;
    let mut t = T::one();
    for it in 1..=opts.max_iterations {
        let g = qp.gradient(&y);
        let step: [T; DIM] = std::array::from_fn(|i| y[i] - g[i] / lip);
        let next = project_feasible(&step, qp.xi);

        let momentum_opposes: T = (0..DIM).map(|i| (y[i] - next[i]) * (next[i] - x[i])).sum();
        if momentum_opposes > T::zero() {
            t = T::one();
            y = next;
        } else {
            let t_next = (T::one() + (T::one() + T::lit(4.0) * t * t).sqrt()) / T::two();
            let beta = (t - T::one()) / t_next;
            y = std::array::from_fn(|i| next[i] + beta * (next[i] - x[i]));
            t = t_next;
        }
        x = next;

        if it % 10 == 0 {
            let r = residual(qp, &x, lip);
            if r < tol {
                return Ok(finish(x, r, it));
            }
            if let Some((p, rp)) = polish(qp, &x, lip, tol) {
                return Ok(finish(p, rp, it));
            }
        }
    }
    if let Some((p, rp)) = polish(qp, &x, lip, tol) {
        return Ok(finish(p, rp, opts.max_iterations));
    }
    let r = residual(qp, &x, lip);
    Ok(finish(x, r, opts.max_iterations))
}
