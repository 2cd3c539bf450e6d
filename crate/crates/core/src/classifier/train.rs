//! Newton-CG for the L2-penalized mean log-likelihood.
//!
//! The objective maximized is
//! `(1/n) Σ ln F(q_i (w·x_i + b)) − (λ/2)‖w‖²` with `q_i = ±1`; the bias is
//! not penalized. Row sums are taken over fixed chunks and added in chunk
//! order so results do not depend on the thread count.

use super::link::Link;
use super::model::ClassifierModel;
use crate::vectorizer::SparseVector;
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lambda: f64,
    pub tolerance: f64,
    pub max_iters: usize,
    pub link: Link,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { lambda: 1e-4, tolerance: 1e-8, max_iters: 200, link: Link::Logistic }
    }
}

struct Problem<'a> {
    x: &'a [SparseVector],
    q: Vec<f64>,
    dim: usize,
    lambda: f64,
    link: Link,
}

/// Sums per-chunk results in chunk order.
fn chunked<T: Send, F, G>(n: usize, map: F, mut fold: G, init: T) -> T
where
    F: Fn(std::ops::Range<usize>) -> T + Sync,
    G: FnMut(T, T) -> T,
    T: Sync,
{
    let parts: Vec<T> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| map(c * CHUNK..((c + 1) * CHUNK).min(n)))
        .collect();
    let mut acc = init;
    for p in parts {
        acc = fold(acc, p);
    }
    acc
}

fn add_into(mut a: Vec<f64>, b: Vec<f64>) -> Vec<f64> {
    a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
    a
}

impl Problem<'_> {
    fn n(&self) -> f64 {
        self.x.len() as f64
    }

    fn margin(&self, theta: &[f64], i: usize) -> f64 {
        self.q[i] * (self.x[i].dot(&theta[..self.dim]) + theta[self.dim])
    }

    fn penalty(&self, theta: &[f64]) -> f64 {
        0.5 * self.lambda * theta[..self.dim].iter().map(|w| w * w).sum::<f64>()
    }

    /// Negated objective, to be minimized.
    fn loss(&self, theta: &[f64]) -> f64 {
        let ll = chunked(
            self.x.len(),
            |r| r.map(|i| self.link.log_cdf(self.margin(theta, i))).sum::<f64>(),
            |a, b| a + b,
            0.0,
        );
        -ll / self.n() + self.penalty(theta)
    }

    /// Gradient of the loss and the per-row curvature weights −(ln F)''.
    fn gradient(&self, theta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim;
        let (g, c) = chunked(
            self.x.len(),
            |r| {
                let mut g = vec![0.0; d + 1];
                let mut c = Vec::with_capacity(r.len());
                for i in r {
                    let (d1, d2) = self.link.log_cdf_d2(self.margin(theta, i));
                    let coef = self.q[i] * d1;
                    for (j, v) in self.x[i].iter() {
                        g[j] += coef * v;
                    }
                    g[d] += coef;
                    c.push(-d2);
                }
                (g, c)
            },
            |(ga, mut ca), (gb, cb)| {
                ca.extend(cb);
                (add_into(ga, gb), ca)
            },
            (vec![0.0; d + 1], Vec::with_capacity(self.x.len())),
        );
        let n = self.n();
        let mut grad: Vec<f64> = g.into_iter().map(|v| -v / n).collect();
        for j in 0..d {
            grad[j] += self.lambda * theta[j];
        }
        (grad, c)
    }

    /// Hessian of the loss times `v`, given curvature weights.
    fn hess_vec(&self, curv: &[f64], v: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let hv = chunked(
            self.x.len(),
            |r| {
                let mut out = vec![0.0; d + 1];
                for i in r {
                    let s = curv[i] * (self.x[i].dot(&v[..d]) + v[d]);
                    for (j, xv) in self.x[i].iter() {
                        out[j] += s * xv;
                    }
                    out[d] += s;
                }
                out
            },
            add_into,
            vec![0.0; d + 1],
        );
        let n = self.n();
        let mut out: Vec<f64> = hv.into_iter().map(|x| x / n).collect();
        for j in 0..d {
            out[j] += self.lambda * v[j];
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Conjugate gradients for H p = −g, stopped at relative residual `eta`.
fn newton_direction(p: &Problem, curv: &[f64], grad: &[f64]) -> Vec<f64> {
    let n = grad.len();
    let gnorm = dot(grad, grad).sqrt();
    let eta = gnorm.sqrt().min(0.5);
    let mut x = vec![0.0; n];
    let mut r: Vec<f64> = grad.iter().map(|g| -g).collect();
    let mut d = r.clone();
    let mut rr = dot(&r, &r);
    for _ in 0..(2 * n).min(1000) {
        if rr.sqrt() <= eta * gnorm {
            break;
        }
        let hd = p.hess_vec(curv, &d);
        let dhd = dot(&d, &hd);
        if dhd <= 1e-300 {
            break;
        }
        let alpha = rr / dhd;
        x.iter_mut().zip(&d).for_each(|(xi, di)| *xi += alpha * di);
        r.iter_mut().zip(&hd).for_each(|(ri, hi)| *ri -= alpha * hi);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        d.iter_mut().zip(&r).for_each(|(di, ri)| *di = ri + beta * *di);
        rr = rr_new;
    }
    if x.iter().all(|v| *v == 0.0) {
        return grad.iter().map(|g| -g).collect();
    }
    x
}

fn build<'a>(x: &'a [SparseVector], y: &[bool], config: &TrainConfig) -> Result<Problem<'a>> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    if !(config.lambda >= 0.0 && config.lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda must be non-negative, got {}", config.lambda)));
    }
    let dim = x.first().map(|v| v.dim).unwrap_or(0);
    if let Some(v) = x.iter().find(|v| v.dim != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: v.dim });
    }
    let q = y.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect();
    Ok(Problem { x, q, dim, lambda: config.lambda, link: config.link })
}

/// Penalized mean log-likelihood at `(weights, bias)`.
pub fn penalized_objective(x: &[SparseVector], y: &[bool], weights: &[f64], bias: f64, config: &TrainConfig) -> Result<f64> {
    let p = build(x, y, config)?;
    let mut theta = weights.to_vec();
    theta.push(bias);
    Ok(-p.loss(&theta))
}

/// Gradient of [`penalized_objective`]; the bias component is last.
pub fn penalized_gradient(x: &[SparseVector], y: &[bool], weights: &[f64], bias: f64, config: &TrainConfig) -> Result<Vec<f64>> {
    let p = build(x, y, config)?;
    let mut theta = weights.to_vec();
    theta.push(bias);
    Ok(p.gradient(&theta).0.into_iter().map(|g| -g).collect())
}

pub fn train(x: &[SparseVector], y: &[bool], config: &TrainConfig) -> Result<ClassifierModel> {
    let p = build(x, y, config)?;
    if x.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    if y.iter().all(|&b| b) || y.iter().all(|&b| !b) {
        return Err(Error::InvalidArgument("training labels are all identical".into()));
    }
    let mut theta = vec![0.0; p.dim + 1];
    let mut loss = p.loss(&theta);
    let mut gnorm = f64::INFINITY;
    for iter in 0..=config.max_iters {
        let (grad, curv) = p.gradient(&theta);
        gnorm = inf_norm(&grad);
        if gnorm < config.tolerance {
            let bias = theta.pop().unwrap_or(0.0);
            return Ok(ClassifierModel {
                weights: theta,
                bias,
                lambda: config.lambda,
                link: config.link,
                iterations: iter,
                gradient_norm: gnorm,
            });
        }
        if iter == config.max_iters {
            break;
        }
        let dir = newton_direction(&p, &curv, &grad);
        let slope = dot(&grad, &dir);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t + step * d).collect();
            let trial_loss = p.loss(&trial);
            if trial_loss <= loss + 1e-4 * step * slope {
                theta = trial;
                loss = trial_loss;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Err(Error::NotConverged { iterations: config.max_iters, gradient_norm: gnorm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn sv(dim: usize, pairs: &[(u32, f64)]) -> SparseVector {
        SparseVector::from_pairs(dim, pairs.iter().copied()).unwrap()
    }

    /// Balanced ±1 design: the bias is 0 and stationarity reduces to
    /// (ln F)'(w) = λ w, solved here by bisection.
    fn one_d_oracle(link: Link, lambda: f64) -> f64 {
        let f = |w: f64| link.log_cdf_d2(w).0 - lambda * w;
        let (mut lo, mut hi) = (0.0, 1e3);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn one_feature_optimum() {
        for link in [Link::Logistic, Link::Probit] {
            for &lambda in &[1e-2, 0.1, 1.0] {
                let x: Vec<SparseVector> = (0..10).map(|i| sv(1, &[(0, if i % 2 == 0 { 1.0 } else { -1.0 })])).collect();
                let y: Vec<bool> = (0..10).map(|i| i % 2 == 0).collect();
                let cfg = TrainConfig { lambda, link, tolerance: 1e-13, ..Default::default() };
                let m = train(&x, &y, &cfg).unwrap();
                let w = one_d_oracle(link, lambda);
                assert!((m.weights[0] - w).abs() < 1e-8, "{link} {lambda}: {} vs {w}", m.weights[0]);
                assert!(m.bias.abs() < 1e-8);
                assert!(m.gradient_norm < 1e-13);
            }
        }
    }

    #[test]
    fn degenerate_labels() {
        let x = vec![sv(1, &[(0, 1.0)]), sv(1, &[(0, 2.0)])];
        assert!(train(&x, &[true, true], &TrainConfig::default()).is_err());
    }

    #[test]
    fn heavy_penalty_gives_prior() {
        let x: Vec<SparseVector> = (0..20).map(|i| sv(2, &[((i % 2) as u32, 1.0)])).collect();
        let y: Vec<bool> = (0..20).map(|i| i % 4 == 0).collect();
        let m = train(&x, &y, &TrainConfig { lambda: 1e8, ..Default::default() }).unwrap();
        assert!(m.weights.iter().all(|w| w.abs() < 1e-7));
        assert!((m.link.cdf(m.bias) - 0.25).abs() < 1e-6);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for link in [Link::Logistic, Link::Probit] {
            let dim = 5;
            let x: Vec<SparseVector> = (0..40)
                .map(|_| {
                    let mut pairs = Vec::new();
                    for j in 0..dim as u32 {
                        if rng.random_bool(0.5) {
                            pairs.push((j, rng.random::<f64>()));
                        }
                    }
                    sv(dim, &pairs)
                })
                .collect();
            let y: Vec<bool> = (0..40).map(|_| rng.random_bool(0.4)).collect();
            let cfg = TrainConfig { link, lambda: 0.3, ..Default::default() };
            let w: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
            let b = 0.4;
            let g = penalized_gradient(&x, &y, &w, b, &cfg).unwrap();
            let h = 1e-6;
            for j in 0..=dim {
                let bump = |s: f64| {
                    let mut w2 = w.clone();
                    let mut b2 = b;
                    if j < dim {
                        w2[j] += s;
                    } else {
                        b2 += s;
                    }
                    penalized_objective(&x, &y, &w2, b2, &cfg).unwrap()
                };
                let fd = (bump(h) - bump(-h)) / (2.0 * h);
                assert!((g[j] - fd).abs() <= 1e-6 * fd.abs().max(1e-3), "{link} j={j}: {} vs {fd}", g[j]);
            }
        }
    }

    #[test]
    fn objective_never_decreases() {
        // separable data converges thanks to the penalty
        let x: Vec<SparseVector> = (0..50).map(|i| sv(3, &[((i % 3) as u32, 1.0 + i as f64 / 50.0)])).collect();
        let y: Vec<bool> = (0..50).map(|i| i % 3 == 0).collect();
        let cfg = TrainConfig::default();
        let m = train(&x, &y, &cfg).unwrap();
        let at_opt = penalized_objective(&x, &y, &m.weights, m.bias, &cfg).unwrap();
        let at_zero = penalized_objective(&x, &y, &[0.0; 3], 0.0, &cfg).unwrap();
        assert!(at_opt >= at_zero);
        let g = penalized_gradient(&x, &y, &m.weights, m.bias, &cfg).unwrap();
        assert!(g.iter().all(|v| v.abs() < cfg.tolerance));
    }
}
