//! Damped Gauss-Newton (Levenberg-Marquardt) on weighted residuals.
//!
//! The damping term is λ·diag(JᵀJ). A trial step is accepted only if it
//! lowers the cost, so the recorded cost history never increases. Lower
//! bounds are enforced by projecting each trial point.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, VitError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Forward-difference step relative to max(|x|, typical scale).
    pub relative_step: f64,
    /// Stop when an accepted step lowers the cost by less than this fraction.
    pub cost_tolerance: f64,
    /// Stop when an accepted step is shorter than this relative to |x|.
    pub step_tolerance: f64,
    pub initial_damping: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 200,
            relative_step: 1e-6,
            cost_tolerance: 1e-12,
            step_tolerance: 1e-10,
            initial_damping: 1e-3,
        }
    }
}

/// One fit parameter as seen by the optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct LmParameter {
    pub name: String,
    pub initial: f64,
    /// Lower bound; use `f64::NEG_INFINITY` for none.
    pub lower: f64,
    /// Scale below which |x| is not used to size difference steps.
    pub typical: f64,
}

impl LmParameter {
    pub fn new(name: &str, initial: f64) -> Self {
        LmParameter { name: name.into(), initial, lower: f64::NEG_INFINITY, typical: 1.0 }
    }

    pub fn nonnegative(mut self) -> Self {
        self.lower = 0.0;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    /// Σ r², r being the weighted residuals.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Cost after every accepted step, starting with the initial point.
    pub cost_history: Vec<f64>,
    /// (JᵀJ)⁻¹ at the final point.
    pub covariance: DMatrix<f64>,
    pub residual_count: usize,
}

fn cost_of(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

fn jacobian<F>(f: &F, x: &[f64], r0: &[f64], specs: &[LmParameter], rel: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut jac = DMatrix::zeros(r0.len(), x.len());
    let mut probe = x.to_vec();
    for j in 0..x.len() {
        let h = rel * x[j].abs().max(specs[j].typical);
        probe[j] = x[j] + h;
        let r = f(&probe)?;
        if r.len() != r0.len() {
            return Err(VitError::domain("residual vector changed length"));
        }
        let h_actual = probe[j] - x[j];
        for i in 0..r0.len() {
            jac[(i, j)] = (r[i] - r0[i]) / h_actual;
        }
        probe[j] = x[j];
    }
    Ok(jac)
}

/// Covariance (JᵀJ)⁻¹, or the name of the parameter the data cannot pin
/// down. Identifiability is judged on the correlation-normalized normal
/// matrix so parameter units do not matter.
pub fn covariance_or_rank_error(jac: &DMatrix<f64>, specs: &[LmParameter]) -> Result<DMatrix<f64>> {
    let n = specs.len();
    let normal = jac.transpose() * jac;
    let max_diag = (0..n).map(|j| normal[(j, j)]).fold(0.0, f64::max);
    for j in 0..n {
        let d = normal[(j, j)];
        if !(d > 1e-24 * max_diag) || !d.is_finite() {
            return Err(VitError::RankDeficient { parameter: specs[j].name.clone() });
        }
    }
    let scale: Vec<f64> = (0..n).map(|j| normal[(j, j)].sqrt()).collect();
    let corr = DMatrix::from_fn(n, n, |i, j| normal[(i, j)] / (scale[i] * scale[j]));
    let eig = corr.clone().symmetric_eigen();
    let (kmin, &emin) =
        eig.eigenvalues.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).expect("at least one parameter");
    if emin < 1e-12 * n as f64 {
        let v = eig.eigenvectors.column(kmin);
        let worst = (0..n).max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs())).unwrap_or(0);
        return Err(VitError::RankDeficient { parameter: specs[worst].name.clone() });
    }
    let inv = corr
        .cholesky()
        .ok_or_else(|| VitError::RankDeficient { parameter: specs[kmin.min(n - 1)].name.clone() })?
        .inverse();
    Ok(DMatrix::from_fn(n, n, |i, j| inv[(i, j)] / (scale[i] * scale[j])))
}

/// Minimize Σ f(x)ᵢ². `f` returns residuals already divided by their
/// standard errors.
pub fn minimize<F>(f: F, specs: &[LmParameter], opts: &LmOptions) -> Result<LmOutcome>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if specs.is_empty() {
        return Err(VitError::domain("no free parameters"));
    }
    for s in specs {
        if !s.initial.is_finite() || s.initial < s.lower || !(s.typical > 0.0) {
            return Err(VitError::domain(format!("invalid start for parameter {}: {}", s.name, s.initial)));
        }
    }
    let n = specs.len();
    let mut x: Vec<f64> = specs.iter().map(|s| s.initial).collect();
    let mut r = f(&x)?;
    if r.len() < n {
        return Err(VitError::domain(format!("{} residuals cannot determine {n} parameters", r.len())));
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(VitError::domain("residuals are not finite at the starting point"));
    }
    let mut cost = cost_of(&r);
    let mut history = vec![cost];
    let mut lambda = opts.initial_damping;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations && !converged {
        iterations += 1;
        let jac = jacobian(&f, &x, &r, specs, opts.relative_step)?;
        let normal = jac.transpose() * &jac;
        let gradient = jac.transpose() * DVector::from_column_slice(&r);
        if gradient.iter().all(|g| *g == 0.0) {
            converged = true;
            break;
        }
        let diag: Vec<f64> = (0..n).map(|j| normal[(j, j)].max(1e-300)).collect();
        let mut accepted = false;
        while lambda <= 1e16 {
            let mut damped = normal.clone();
            for j in 0..n {
                damped[(j, j)] += lambda * diag[j];
            }
            let step = match damped.cholesky() {
                Some(ch) => ch.solve(&(-&gradient)),
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let trial: Vec<f64> = (0..n).map(|j| (x[j] + step[j]).max(specs[j].lower)).collect();
            let trial_r = match f(&trial) {
                Ok(v) if v.iter().all(|e| e.is_finite()) => v,
                _ => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let trial_cost = cost_of(&trial_r);
            if trial_cost < cost {
                let moved =
                    (0..n).map(|j| ((trial[j] - x[j]) / x[j].abs().max(specs[j].typical)).powi(2)).sum::<f64>().sqrt();
                let gain = (cost - trial_cost) / cost.max(f64::MIN_POSITIVE);
                x = trial;
                r = trial_r;
                cost = trial_cost;
                history.push(cost);
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if gain < opts.cost_tolerance || moved < opts.step_tolerance {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no descent direction left at working precision
            converged = true;
        }
    }

    let jac = jacobian(&f, &x, &r, specs, opts.relative_step)?;
    let covariance = covariance_or_rank_error(&jac, specs)?;
    Ok(LmOutcome { params: x, cost, iterations, converged, cost_history: history, covariance, residual_count: r.len() })
}
