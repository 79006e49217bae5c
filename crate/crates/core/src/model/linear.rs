//! Probability-producing linear classifiers.
//!
//! The default link is logistic: L2-regularized log-loss minimized by a
//! truncated Newton method (conjugate-gradient inner solves with Hessian-vector
//! products, backtracking line search). The bias is not regularized.
//! `LeastSquares` fits ridge regression on 0/1 targets and clamps the output.

use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, FeatureSet, ModelError};
use crate::preprocess::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    #[default]
    Logistic,
    LeastSquares,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearConfig {
    pub link: Link,
    pub max_iter: usize,
    /// Stop once the objective's gradient norm falls below this.
    pub tolerance: f64,
}

impl Default for LinearConfig {
    fn default() -> Self {
        LinearConfig {
            link: Link::Logistic,
            max_iter: 100,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilisticLinearModel {
    pub feature_set: FeatureSet,
    pub link: Link,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub regularization: f64,
}

impl ProbabilisticLinearModel {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<f64, ModelError> {
        if x.len() != self.weights.len() {
            return Err(ModelError::DimensionMismatch {
                expected: self.weights.len(),
                found: x.len(),
            });
        }
        let z = self.bias + dot(&self.weights, x);
        Ok(match self.link {
            Link::Logistic => sigmoid(z),
            Link::LeastSquares => z.clamp(0.0, 1.0),
        })
    }
}

pub fn predict_proba(model: &ProbabilisticLinearModel, x: &[f64]) -> Result<f64, ModelError> {
    model.predict_proba(x)
}

/// What a fit converged to, for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSummary {
    pub iterations: usize,
    pub gradient_norm: f64,
}

pub fn train_probabilistic_linear(
    x: &FeatureMatrix,
    y: &[Label],
    reg: f64,
) -> Result<ProbabilisticLinearModel, ModelError> {
    train_probabilistic_linear_with(x, y, reg, &LinearConfig::default()).map(|(m, _)| m)
}

pub fn train_probabilistic_linear_with(
    x: &FeatureMatrix,
    y: &[Label],
    reg: f64,
    config: &LinearConfig,
) -> Result<(ProbabilisticLinearModel, FitSummary), ModelError> {
    if x.rows() != y.len() {
        return Err(ModelError::LengthMismatch {
            rows: x.rows(),
            labels: y.len(),
        });
    }
    if y.len() < 2 {
        return Err(ModelError::TooFewSamples(y.len()));
    }
    if !y.iter().any(|l| l.is_urgent()) || y.iter().all(|l| l.is_urgent()) {
        return Err(ModelError::SingleClass);
    }
    if !(reg >= 0.0 && reg.is_finite()) {
        return Err(ModelError::InvalidRegularization(reg));
    }
    let targets: Vec<f64> = y.iter().map(|l| if l.is_urgent() { 1.0 } else { 0.0 }).collect();
    let problem = Problem { x, y: &targets, reg };
    let (theta, summary) = match config.link {
        Link::Logistic => problem.newton(config),
        Link::LeastSquares => problem.ridge(config),
    };
    let dim = x.dim();
    Ok((
        ProbabilisticLinearModel {
            feature_set: x.feature_set,
            link: config.link,
            weights: theta[..dim].to_vec(),
            bias: theta[dim],
            regularization: reg,
        },
        summary,
    ))
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Parameters are `theta = [w; b]`.
struct Problem<'a> {
    x: &'a FeatureMatrix,
    y: &'a [f64],
    reg: f64,
}

impl Problem<'_> {
    fn scores(&self, theta: &[f64]) -> Vec<f64> {
        let d = self.x.dim();
        (0..self.x.rows())
            .map(|i| dot(&theta[..d], self.x.row(i)) + theta[d])
            .collect()
    }

    fn reg_term(&self, theta: &[f64]) -> f64 {
        let d = self.x.dim();
        0.5 * self.reg * dot(&theta[..d], &theta[..d])
    }

    fn logistic_objective(&self, theta: &[f64]) -> f64 {
        let z = self.scores(theta);
        let loss: f64 = z
            .iter()
            .zip(self.y)
            .map(|(&z, &y)| if y > 0.5 { softplus(-z) } else { softplus(z) })
            .sum();
        loss + self.reg_term(theta)
    }

    /// X^T r plus the regularizer gradient.
    fn backproject(&self, residual: &[f64], theta_for_reg: &[f64], reg_scale: f64) -> Vec<f64> {
        let d = self.x.dim();
        let mut g = vec![0.0; d + 1];
        for (i, &r) in residual.iter().enumerate() {
            if r != 0.0 {
                for (gj, xj) in g[..d].iter_mut().zip(self.x.row(i)) {
                    *gj += r * xj;
                }
                g[d] += r;
            }
        }
        for j in 0..d {
            g[j] += reg_scale * theta_for_reg[j];
        }
        g
    }

    /// (X^T diag(curv) X + reg_scale * I_w + damping) v
    fn hess_vec(&self, curvature: &[f64], v: &[f64], reg_scale: f64) -> Vec<f64> {
        let d = self.x.dim();
        let xv: Vec<f64> = (0..self.x.rows())
            .map(|i| curvature[i] * (dot(&v[..d], self.x.row(i)) + v[d]))
            .collect();
        let mut out = self.backproject(&xv, v, reg_scale);
        for (o, vi) in out.iter_mut().zip(v) {
            *o += 1e-10 * vi;
        }
        out
    }

    fn newton(&self, config: &LinearConfig) -> (Vec<f64>, FitSummary) {
        let d = self.x.dim();
        let mut theta = vec![0.0; d + 1];
        let mut f = self.logistic_objective(&theta);
        let mut iterations = 0;
        let mut gnorm;
        loop {
            let z = self.scores(&theta);
            let p: Vec<f64> = z.iter().map(|&z| sigmoid(z)).collect();
            let residual: Vec<f64> = p.iter().zip(self.y).map(|(p, y)| p - y).collect();
            let grad = self.backproject(&residual, &theta, self.reg);
            gnorm = norm(&grad);
            if gnorm < config.tolerance || iterations >= config.max_iter {
                break;
            }
            let curvature: Vec<f64> = p.iter().map(|p| p * (1.0 - p)).collect();
            let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
            let forcing = (0.5f64).min(gnorm.sqrt()) * gnorm;
            let step = conjugate_gradient(|v| self.hess_vec(&curvature, v, self.reg), &rhs, forcing, 2 * (d + 1) + 10);

            let slope = dot(&grad, &step);
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..50 {
                let trial: Vec<f64> = theta.iter().zip(&step).map(|(t, s)| t + alpha * s).collect();
                let ft = self.logistic_objective(&trial);
                if ft <= f + 1e-4 * alpha * slope {
                    theta = trial;
                    f = ft;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            iterations += 1;
            if !accepted {
                break;
            }
        }
        (
            theta,
            FitSummary {
                iterations,
                gradient_norm: gnorm,
            },
        )
    }

    /// Minimizes ||X theta - y||^2 + reg ||w||^2 via the normal equations.
    fn ridge(&self, config: &LinearConfig) -> (Vec<f64>, FitSummary) {
        let d = self.x.dim();
        let ones = vec![1.0; self.x.rows()];
        let zero = vec![0.0; d + 1];
        let rhs = self.backproject(self.y, &zero, 0.0);
        let apply = |v: &[f64]| self.hess_vec(&ones, v, self.reg);
        let theta = conjugate_gradient(apply, &rhs, 0.5 * config.tolerance, 10 * (d + 1) + 50);
        let residual: Vec<f64> = self
            .scores(&theta)
            .iter()
            .zip(self.y)
            .map(|(z, y)| 2.0 * (z - y))
            .collect();
        let grad = self.backproject(&residual, &theta, 2.0 * self.reg);
        (
            theta,
            FitSummary {
                iterations: 1,
                gradient_norm: norm(&grad),
            },
        )
    }
}

/// Solves `A x = b` for symmetric positive (semi)definite `A` given as a
/// matrix-vector product, stopping at residual norm `tol`.
fn conjugate_gradient(apply: impl Fn(&[f64]) -> Vec<f64>, b: &[f64], tol: f64, max_iter: usize) -> Vec<f64> {
    let mut x = vec![0.0; b.len()];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for _ in 0..max_iter {
        if rr.sqrt() <= tol {
            break;
        }
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rr / pap;
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_next = dot(&r, &r);
        let beta = rr_next / rr;
        rr = rr_next;
        for i in 0..p.len() {
            p[i] = r[i] + beta * p[i];
        }
    }
    x
}
