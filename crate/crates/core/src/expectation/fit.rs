//! Penalized multinomial logistic regression by Newton's method.
//!
//! Coefficients use the symmetric parameterization: every one of the four
//! categories gets its own coefficient column and a small ridge term in
//! the objective pins down the otherwise unidentified common translation.
//! That keeps the fit invariant under relabeling of categories and makes
//! the objective strictly convex.

use nalgebra::{Cholesky, DMatrix, DVector};

pub const N_CATEGORIES: usize = 4;

#[derive(Debug, thiserror::Error)]
pub enum FitError {
    #[error("design matrix and labels disagree: {rows} rows vs {labels} labels")]
    ShapeMismatch { rows: usize, labels: usize },
    #[error("label {label} out of range (expected 0..{})", N_CATEGORIES)]
    LabelRange { label: usize },
    #[error("Newton system stayed singular even at ridge {ridge:e}")]
    Singular { ridge: f64 },
}

/// A penalized multinomial problem: minimize
/// `-loglik(theta) + 0.5 * sum_c theta_c' P theta_c + 0.5 * ridge * ||theta||^2`
/// where `P` is the (already lambda-scaled) quadratic penalty.
pub struct PenalizedProblem {
    pub x: DMatrix<f64>,
    pub labels: Vec<usize>,
    pub penalty: DMatrix<f64>,
    pub ridge: f64,
}

pub struct FitOutput {
    /// Coefficients, one column per category.
    pub theta: DMatrix<f64>,
    /// Effective degrees of freedom, `tr(H^-1 H_loglik)`.
    pub edf: f64,
    /// Residual deviance, `-2 * loglik`.
    pub deviance: f64,
    /// Generalized cross-validation score, `n * deviance / (n - edf)^2`.
    pub gcv: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    /// Ridge actually used, if escalation was needed to factor the Hessian.
    pub ridge_used: f64,
}

impl PenalizedProblem {
    fn check(&self) -> Result<(), FitError> {
        if self.x.nrows() != self.labels.len() {
            return Err(FitError::ShapeMismatch { rows: self.x.nrows(), labels: self.labels.len() });
        }
        if let Some(&label) = self.labels.iter().find(|&&l| l >= N_CATEGORIES) {
            return Err(FitError::LabelRange { label });
        }
        assert_eq!(self.penalty.nrows(), self.x.ncols());
        assert_eq!(self.penalty.ncols(), self.x.ncols());
        Ok(())
    }

    /// Row-wise softmax probabilities for linear predictors `eta = X * theta`.
    fn probabilities(&self, theta: &DMatrix<f64>) -> DMatrix<f64> {
        let mut eta = &self.x * theta;
        for mut row in eta.row_iter_mut() {
            let max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let mut total = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                total += *v;
            }
            for v in row.iter_mut() {
                *v /= total;
            }
        }
        eta
    }

    /// Multinomial log-likelihood at `theta`.
    pub fn loglik(&self, theta: &DMatrix<f64>) -> f64 {
        let eta = &self.x * theta;
        let mut total = 0.0;
        for (i, &label) in self.labels.iter().enumerate() {
            let row = eta.row(i);
            let max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
            total += row[label] - lse;
        }
        total
    }

    fn penalty_value(&self, theta: &DMatrix<f64>, ridge: f64) -> f64 {
        let mut value = 0.0;
        for c in 0..N_CATEGORIES {
            let col = theta.column(c);
            value += 0.5 * (&self.penalty * col).dot(&col);
        }
        value + 0.5 * ridge * theta.iter().map(|v| v * v).sum::<f64>()
    }

    /// Penalized objective (negative log-likelihood plus penalties).
    pub fn objective(&self, theta: &DMatrix<f64>) -> f64 {
        -self.loglik(theta) + self.penalty_value(theta, self.ridge)
    }

    /// Analytic gradient of `objective`, one column per category.
    pub fn gradient(&self, theta: &DMatrix<f64>) -> DMatrix<f64> {
        let mut residual = self.probabilities(theta);
        for (i, &label) in self.labels.iter().enumerate() {
            residual[(i, label)] -= 1.0;
        }
        self.x.transpose() * residual + &self.penalty * theta + self.ridge * theta
    }

    /// Full Newton Hessian of the objective at probabilities `probs`,
    /// laid out in `N_CATEGORIES` blocks of `p` (column-major flatten).
    fn hessian(&self, probs: &DMatrix<f64>, ridge: f64) -> DMatrix<f64> {
        let p = self.x.ncols();
        let dim = p * N_CATEGORIES;
        let mut h = DMatrix::zeros(dim, dim);
        let mut weighted = DMatrix::zeros(self.x.nrows(), p);
        for c in 0..N_CATEGORIES {
            for d in c..N_CATEGORIES {
                for i in 0..self.x.nrows() {
                    let w = if c == d {
                        probs[(i, c)] * (1.0 - probs[(i, c)])
                    } else {
                        -probs[(i, c)] * probs[(i, d)]
                    };
                    for j in 0..p {
                        weighted[(i, j)] = w * self.x[(i, j)];
                    }
                }
                let block = self.x.transpose() * &weighted;
                for a in 0..p {
                    for b in 0..p {
                        h[(c * p + a, d * p + b)] = block[(a, b)];
                        if c != d {
                            h[(d * p + b, c * p + a)] = block[(a, b)];
                        }
                    }
                }
            }
        }
        for c in 0..N_CATEGORIES {
            for a in 0..p {
                for b in 0..p {
                    h[(c * p + a, c * p + b)] += self.penalty[(a, b)];
                }
                h[(c * p + a, c * p + a)] += ridge;
            }
        }
        h
    }

    /// Likelihood-only Hessian (no penalty, no ridge) used for the
    /// effective-degrees-of-freedom trace.
    fn hessian_loglik(&self, probs: &DMatrix<f64>) -> DMatrix<f64> {
        let zero = DMatrix::zeros(self.x.ncols(), self.x.ncols());
        let saved = PenalizedProblem {
            x: self.x.clone(),
            labels: self.labels.clone(),
            penalty: zero,
            ridge: 0.0,
        };
        saved.hessian(probs, 0.0)
    }

    /// Runs penalized Newton from `init` (usually zeros). Step halving
    /// guards each iteration; a Hessian that refuses to factor escalates
    /// the ridge a hundredfold (up to 1e-2) and restarts the iteration.
    pub fn solve(&self, init: Option<DMatrix<f64>>) -> Result<FitOutput, FitError> {
        self.check()?;
        let p = self.x.ncols();
        let n = self.x.nrows() as f64;
        let mut theta = init.unwrap_or_else(|| DMatrix::zeros(p, N_CATEGORIES));
        let mut ridge = self.ridge;
        let tol = 1e-8;
        let max_iter = 100;
        let mut iterations = 0;
        let mut grad_norm;
        let mut chol: Option<Cholesky<f64, nalgebra::Dyn>> = None;
        loop {
            let grad = self.current_gradient(&theta, ridge);
            grad_norm = grad.iter().fold(0.0f64, |a, &g| a.max(g.abs()));
            if grad_norm < tol || iterations >= max_iter {
                break;
            }
            let probs = self.probabilities(&theta);
            let h = self.hessian(&probs, ridge);
            let factor = match Cholesky::new(h) {
                Some(f) => f,
                None => {
                    if ridge >= 1e-2 {
                        return Err(FitError::Singular { ridge });
                    }
                    ridge = (ridge * 100.0).min(1e-2);
                    log::warn!(
                        "model Hessian not positive definite; escalating ridge to {ridge:e}"
                    );
                    continue;
                }
            };
            let flat = DVector::from_column_slice(grad.as_slice());
            let step = factor.solve(&flat);
            chol = Some(factor);
            let direction = DMatrix::from_column_slice(p, N_CATEGORIES, step.as_slice());
            let descent = flat.dot(&step);
            let base = -self.loglik(&theta) + self.penalty_value(&theta, ridge);
            let mut scale = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let candidate = &theta - scale * &direction;
                let value = -self.loglik(&candidate) + self.penalty_value(&candidate, ridge);
                if value <= base - 1e-4 * scale * descent + 1e-12 {
                    theta = candidate;
                    accepted = true;
                    break;
                }
                scale *= 0.5;
            }
            iterations += 1;
            if !accepted {
                // The quadratic model stopped helping; report where we are.
                break;
            }
        }
        let probs = self.probabilities(&theta);
        let factor = match chol {
            Some(f) => f,
            None => Cholesky::new(self.hessian(&probs, ridge))
                .ok_or(FitError::Singular { ridge })?,
        };
        let edf = {
            let h_like = self.hessian_loglik(&probs);
            let solved = factor.solve(&h_like);
            solved.trace()
        };
        let deviance = -2.0 * self.loglik(&theta);
        let denom = (n - edf).max(1e-8);
        Ok(FitOutput {
            theta,
            edf,
            deviance,
            gcv: n * deviance / (denom * denom),
            iterations,
            grad_norm,
            ridge_used: ridge,
        })
    }

    fn current_gradient(&self, theta: &DMatrix<f64>, ridge: f64) -> DMatrix<f64> {
        let mut residual = self.probabilities(theta);
        for (i, &label) in self.labels.iter().enumerate() {
            residual[(i, label)] -= 1.0;
        }
        self.x.transpose() * residual + &self.penalty * theta + ridge * theta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn toy_problem(n: usize, p: usize, penalty_scale: f64, seed: u64) -> PenalizedProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, j| {
            if j == 0 {
                1.0
            } else {
                rng.random_range(-1.0..1.0)
            }
        });
        let labels = (0..n).map(|_| rng.random_range(0..N_CATEGORIES)).collect();
        let penalty = DMatrix::identity(p, p) * penalty_scale;
        PenalizedProblem { x, labels, penalty, ridge: 1e-8 }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let problem = toy_problem(60, 4, 0.5, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let theta = DMatrix::from_fn(4, N_CATEGORIES, |_, _| rng.random_range(-0.5..0.5));
        let grad = problem.gradient(&theta);
        let eps = 1e-5;
        for j in 0..4 {
            for c in 0..N_CATEGORIES {
                let mut plus = theta.clone();
                let mut minus = theta.clone();
                plus[(j, c)] += eps;
                minus[(j, c)] -= eps;
                let fd = (problem.objective(&plus) - problem.objective(&minus)) / (2.0 * eps);
                assert_relative_eq!(grad[(j, c)], fd, epsilon = 1e-6, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn intercept_only_fit_recovers_empirical_frequencies() {
        let n = 200;
        let labels: Vec<usize> =
            (0..n).map(|i| if i < 100 { 0 } else if i < 150 { 1 } else if i < 180 { 2 } else { 3 }).collect();
        let problem = PenalizedProblem {
            x: DMatrix::from_element(n, 1, 1.0),
            labels,
            penalty: DMatrix::zeros(1, 1),
            ridge: 1e-8,
        };
        let fit = problem.solve(None).unwrap();
        let probs = problem.probabilities(&fit.theta);
        let expected = [0.5, 0.25, 0.15, 0.10];
        for c in 0..N_CATEGORIES {
            assert_relative_eq!(probs[(0, c)], expected[c], epsilon = 1e-8);
        }
        assert!(fit.grad_norm < 1e-8);
    }

    #[test]
    fn fit_is_invariant_under_category_relabeling() {
        let problem = toy_problem(120, 3, 0.2, 3);
        let fit = problem.solve(None).unwrap();
        let probs = problem.probabilities(&fit.theta);
        // Swap labels 0 <-> 2 and refit: probabilities must swap too.
        let swapped_labels: Vec<usize> = problem
            .labels
            .iter()
            .map(|&l| match l {
                0 => 2,
                2 => 0,
                other => other,
            })
            .collect();
        let swapped = PenalizedProblem {
            x: problem.x.clone(),
            labels: swapped_labels,
            penalty: problem.penalty.clone(),
            ridge: problem.ridge,
        };
        let fit_swapped = swapped.solve(None).unwrap();
        let probs_swapped = swapped.probabilities(&fit_swapped.theta);
        for i in [0usize, 17, 63, 119] {
            assert_relative_eq!(probs[(i, 0)], probs_swapped[(i, 2)], epsilon = 1e-6);
            assert_relative_eq!(probs[(i, 2)], probs_swapped[(i, 0)], epsilon = 1e-6);
            assert_relative_eq!(probs[(i, 1)], probs_swapped[(i, 1)], epsilon = 1e-6);
        }
    }

    #[test]
    fn heavier_penalty_lowers_effective_dof() {
        let light = toy_problem(150, 5, 0.01, 21).solve(None).unwrap();
        let heavy = toy_problem(150, 5, 100.0, 21).solve(None).unwrap();
        assert!(heavy.edf < light.edf);
        assert!(heavy.edf > 0.0);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let problem = PenalizedProblem {
            x: DMatrix::from_element(5, 1, 1.0),
            labels: vec![0, 1, 2],
            penalty: DMatrix::zeros(1, 1),
            ridge: 1e-8,
        };
        assert!(matches!(problem.solve(None), Err(FitError::ShapeMismatch { .. })));
    }
}
