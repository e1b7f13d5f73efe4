//! Unweighted nonlinear least squares (damped Gauss–Newton / Levenberg–Marquardt)
//! with parameter covariance and Student-t confidence intervals.

use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

pub type ModelFn<'a> = &'a dyn Fn(&[f64], f64) -> f64;
/// Writes ∂model/∂params at `x` into the output slice.
pub type JacobianFn<'a> = &'a dyn Fn(&[f64], f64, &mut [f64]);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Damping {
    pub initial: f64,
    pub increase: f64,
    pub decrease: f64,
}

impl Default for Damping {
    fn default() -> Self {
        Self { initial: 1e-3, increase: 10.0, decrease: 10.0 }
    }
}

pub struct FitProblem<'a> {
    pub model: ModelFn<'a>,
    pub jacobian: Option<JacobianFn<'a>>,
    pub initial: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub max_iterations: usize,
    /// Converged once ‖step‖ < tolerance·(‖params‖ + tolerance).
    pub tolerance: f64,
    pub damping: Damping,
}

impl<'a> FitProblem<'a> {
    pub fn new(model: ModelFn<'a>, initial: Vec<f64>, x: Vec<f64>, y: Vec<f64>) -> Self {
        Self {
            model,
            jacobian: None,
            initial,
            x,
            y,
            max_iterations: 500,
            tolerance: 1e-12,
            damping: Damping::default(),
        }
    }

    pub fn with_jacobian(mut self, jacobian: JacobianFn<'a>) -> Self {
        self.jacobian = Some(jacobian);
        self
    }

    fn residuals(&self, params: &[f64]) -> Vec<f64> {
        self.x.iter().zip(&self.y).map(|(&x, &y)| y - (self.model)(params, x)).collect()
    }

    /// Row-major m×n Jacobian of the model.
    fn jacobian_matrix(&self, params: &[f64]) -> Vec<f64> {
        let n = params.len();
        let mut jac = vec![0.0; self.x.len() * n];
        match self.jacobian {
            Some(f) => {
                for (row, &x) in jac.chunks_mut(n).zip(&self.x) {
                    f(params, x, row);
                }
            }
            None => {
                let mut p = params.to_vec();
                for k in 0..n {
                    let h = 1e-6 * (1.0 + params[k].abs());
                    for (i, &x) in self.x.iter().enumerate() {
                        p[k] = params[k] + h;
                        let up = (self.model)(&p, x);
                        p[k] = params[k] - h;
                        let down = (self.model)(&p, x);
                        jac[i * n + k] = (up - down) / (2.0 * h);
                    }
                    p[k] = params[k];
                }
            }
        }
        jac
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: Vec<f64>,
    /// Row-major n×n, `s² (JᵀJ)⁻¹` with `s² = RSS / dof`.
    pub covariance: Vec<f64>,
    pub residual_sum_squares: f64,
    pub dof: usize,
    pub iterations: usize,
}

impl FitResult {
    pub fn standard_error(&self, k: usize) -> f64 {
        let n = self.params.len();
        self.covariance[k * n + k].max(0.0).sqrt()
    }

    pub fn residual_norm(&self) -> f64 {
        self.residual_sum_squares.sqrt()
    }
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|r| r * r).sum()
}

/// JᵀJ and Jᵀr for a row-major m×n Jacobian.
fn normal_equations(jac: &[f64], r: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = vec![0.0; n * n];
    let mut g = vec![0.0; n];
    for (row, &ri) in jac.chunks(n).zip(r) {
        for p in 0..n {
            g[p] += row[p] * ri;
            for q in 0..n {
                a[p * n + q] += row[p] * row[q];
            }
        }
    }
    (a, g)
}

/// Gauss–Jordan inverse with partial pivoting; `None` when numerically singular.
fn invert(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max);
    if !(scale > 0.0) || !scale.is_finite() {
        return None;
    }
    let mut m = a.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))?;
        if m[pivot * n + col].abs() <= 1e-12 * scale {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                m.swap(col * n + k, pivot * n + k);
                inv.swap(col * n + k, pivot * n + k);
            }
        }
        let d = m[col * n + col];
        for k in 0..n {
            m[col * n + k] /= d;
            inv[col * n + k] /= d;
        }
        for row in 0..n {
            if row != col {
                let f = m[row * n + col];
                if f != 0.0 {
                    for k in 0..n {
                        m[row * n + k] -= f * m[col * n + k];
                        inv[row * n + k] -= f * inv[col * n + k];
                    }
                }
            }
        }
    }
    Some(inv)
}

fn mat_vec(a: &[f64], v: &[f64]) -> Vec<f64> {
    let n = v.len();
    a.chunks(n).map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

pub fn least_squares_fit(problem: &FitProblem<'_>) -> Result<FitResult> {
    let n = problem.initial.len();
    let m = problem.x.len();
    if problem.y.len() != m {
        return Err(Error::dim(m, problem.y.len()));
    }
    if m < n + 1 {
        return Err(Error::Invalid(format!("{m} points cannot constrain {n} parameters with residual variance")));
    }
    let mut params = problem.initial.clone();
    let mut residuals = problem.residuals(&params);
    let mut rss = sum_sq(&residuals);
    if !rss.is_finite() {
        return Err(Error::domain("model is not finite at the initial parameters"));
    }
    let mut lambda = problem.damping.initial;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < problem.max_iterations {
        iterations += 1;
        let jac = problem.jacobian_matrix(&params);
        let (a, g) = normal_equations(&jac, &residuals, n);
        if iterations == 1 && invert(&a, n).is_none() {
            return Err(Error::Singular);
        }
        if rss == 0.0 {
            converged = true;
            break;
        }
        let mut step_norm;
        loop {
            let mut damped = a.clone();
            for i in 0..n {
                damped[i * n + i] += lambda * a[i * n + i].max(1e-300);
            }
            let step = match invert(&damped, n) {
                Some(inv) => mat_vec(&inv, &g),
                None => {
                    lambda *= problem.damping.increase;
                    if lambda > 1e16 {
                        return Err(Error::Singular);
                    }
                    continue;
                }
            };
            let trial: Vec<f64> = params.iter().zip(&step).map(|(p, s)| p + s).collect();
            let trial_res = problem.residuals(&trial);
            let trial_rss = sum_sq(&trial_res);
            step_norm = sum_sq(&step).sqrt();
            if trial_rss.is_finite() && trial_rss <= rss {
                params = trial;
                residuals = trial_res;
                rss = trial_rss;
                lambda /= problem.damping.decrease;
                break;
            }
            lambda *= problem.damping.increase;
            if lambda > 1e16 {
                // No descent direction left: stalled at the optimum.
                step_norm = 0.0;
                break;
            }
        }
        let p_norm = sum_sq(&params).sqrt();
        if step_norm < problem.tolerance * (p_norm + problem.tolerance) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence(problem.max_iterations));
    }

    let jac = problem.jacobian_matrix(&params);
    let (a, _) = normal_equations(&jac, &residuals, n);
    let inv = invert(&a, n).ok_or(Error::Singular)?;
    let dof = m - n;
    let s2 = rss / dof as f64;
    let covariance = inv.iter().map(|v| v * s2).collect();
    Ok(FitResult { params, covariance, residual_sum_squares: rss, dof, iterations })
}

/// Two-sided Student-t multiplier `t_{(1+level)/2, dof}`.
const LARGE_DOF: f64 = 1e4;

pub fn t_multiplier(level: f64, dof: f64) -> Result<f64> {
    if !(dof >= 1.0) {
        return Err(Error::domain(format!("degrees of freedom must be >= 1, got {dof}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain(format!("confidence level must be in (0, 1), got {level}")));
    }
    let p = 0.5 * (1.0 + level);
    if dof > LARGE_DOF {
        // The beta-function inversion loses accuracy (and eventually stalls)
        // for huge dof; expand around the normal quantile instead.
        let z = Normal::new(0.0, 1.0).expect("unit normal").inverse_cdf(p);
        let z2 = z * z;
        return Ok(z + z * (z2 + 1.0) / (4.0 * dof) + z * ((5.0 * z2 + 16.0) * z2 + 3.0) / (96.0 * dof * dof));
    }
    let dist = StudentsT::new(0.0, 1.0, dof).map_err(|e| Error::domain(e.to_string()))?;
    Ok(dist.inverse_cdf(p))
}

pub fn t_confidence_interval(estimate: f64, standard_error: f64, dof: f64, level: f64) -> Result<(f64, f64)> {
    let t = t_multiplier(level, dof)?;
    Ok((estimate - t * standard_error, estimate + t * standard_error))
}
