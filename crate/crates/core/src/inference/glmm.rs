//! Marginal maximum likelihood for `y ~ Bernoulli(F(x'β + σ v_j))`,
//! `v_j ~ N(0, 1)` per county, by adaptive Gauss–Hermite quadrature.
//!
//! For each county the integrand `exp h(v)` is centered at its mode `v̂` and
//! scaled by `ŝ = (−h''(v̂))^{-1/2}`; one node gives the Laplace
//! approximation. The gradient differentiates through `v̂` and `ŝ`, so it is
//! the exact gradient of the quadrature approximation. Newton steps use the
//! Hessian with the nodes held fixed, which is cheap and close enough near
//! the optimum; standard errors come from differencing the exact gradient.
//!
//! σ is optimized unconstrained and reported as |σ|; the likelihood is even
//! in σ and the county effects are `σ v̂_j`, so the sign carries no meaning.

use super::design::DesignMatrix;
use super::quadrature::GaussHermite;
use crate::classifier::Link;
use crate::seed;
use crate::stats;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const SQRT_2: f64 = std::f64::consts::SQRT_2;
/// |σ| below this is treated as the boundary σ = 0.
const SIGMA_BOUNDARY: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlmmConfig {
    pub n_quadrature: usize,
    pub tolerance: f64,
    pub max_iters: usize,
    pub link: Link,
    pub seed: u64,
    /// Fit the plain pooled model with σ held at 0.
    pub sigma_fixed_zero: bool,
}

impl Default for GlmmConfig {
    fn default() -> Self {
        GlmmConfig { n_quadrature: 15, tolerance: 1e-6, max_iters: 100, link: Link::Probit, seed: 0, sigma_fixed_zero: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedEffect {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub z_value: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmmFit {
    pub fixed: Vec<FixedEffect>,
    pub sigma2_u: f64,
    pub sigma_u: f64,
    /// Posterior-mode county intercepts; 0 for counties without rows.
    pub blups: BTreeMap<String, f64>,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub n_obs: usize,
    pub n_quadrature: usize,
    pub converged: bool,
    /// σ hit the lower bound and the model was refit with σ = 0.
    pub boundary: bool,
    pub run_seed: u64,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub link: Link,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub sigma_u: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiStart {
    pub selected: GlmmFit,
    pub runs: Vec<RunSummary>,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Level {
    Value,
    Gradient,
    Hessian,
}

struct Eval {
    ll: f64,
    grad: Vec<f64>,
    hess: Vec<f64>,
    modes: Vec<f64>,
}

struct Model<'a> {
    dm: &'a DesignMatrix,
    groups: Vec<Vec<usize>>,
    rule: GaussHermite,
    ln_w: Vec<f64>,
    link: Link,
    free_sigma: bool,
}

struct CountyOut {
    ll: f64,
    grad: Vec<f64>,
    hess: Vec<f64>,
    mode: f64,
}

impl<'a> Model<'a> {
    fn new(dm: &'a DesignMatrix, n_quadrature: usize, link: Link, free_sigma: bool) -> Self {
        let mut groups = vec![Vec::new(); dm.counties.len()];
        for (i, &c) in dm.county.iter().enumerate() {
            groups[c].push(i);
        }
        let rule = GaussHermite::new(n_quadrature);
        let ln_w = rule.weights.iter().map(|w| w.ln()).collect();
        Model { dm, groups, rule, ln_w, link, free_sigma }
    }

    fn p(&self) -> usize {
        self.dm.n_cols()
    }

    fn dim(&self) -> usize {
        self.p() + usize::from(self.free_sigma)
    }

    fn split<'t>(&self, theta: &'t [f64]) -> (&'t [f64], f64) {
        let p = self.p();
        (&theta[..p], if self.free_sigma { theta[p] } else { 0.0 })
    }

    fn evaluate(&self, theta: &[f64], level: Level) -> Eval {
        let (beta, s) = self.split(theta);
        let parts: Vec<CountyOut> =
            self.groups.par_iter().map(|rows| self.county(rows, beta, s, level)).collect();
        let d = self.dim();
        let mut ev = Eval {
            ll: 0.0,
            grad: vec![0.0; if level >= Level::Gradient { d } else { 0 }],
            hess: vec![0.0; if level >= Level::Hessian { d * d } else { 0 }],
            modes: Vec::with_capacity(parts.len()),
        };
        for c in parts {
            ev.ll += c.ll;
            ev.grad.iter_mut().zip(&c.grad).for_each(|(a, b)| *a += b);
            ev.hess.iter_mut().zip(&c.hess).for_each(|(a, b)| *a += b);
            ev.modes.push(c.mode);
        }
        ev
    }

    /// h(v) and its first three v-derivatives for one county.
    fn h_derivs(&self, rows: &[usize], eta: &[f64], s: f64, v: f64) -> (f64, f64, f64, f64) {
        let (mut sl, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
        for (k, &i) in rows.iter().enumerate() {
            let q = if self.dm.y[i] { 1.0 } else { -1.0 };
            let a = q * (eta[k] + s * v);
            let (d1, d2, d3) = self.link.log_cdf_d3(a);
            sl += self.link.log_cdf(a);
            s1 += q * d1;
            s2 += d2;
            s3 += q * d3;
        }
        (sl - 0.5 * v * v - LN_SQRT_2PI, s * s1 - v, s * s * s2 - 1.0, s * s * s * s3)
    }

    fn mode(&self, rows: &[usize], eta: &[f64], s: f64) -> f64 {
        if s == 0.0 {
            return 0.0;
        }
        let mut v = 0.0;
        let (mut h, mut h1, mut h2, _) = self.h_derivs(rows, eta, s, v);
        for _ in 0..200 {
            let mut step = -h1 / h2;
            let mut accepted = false;
            for _ in 0..60 {
                let cand = self.h_derivs(rows, eta, s, v + step);
                if cand.0 >= h - 1e-12 * h.abs().max(1.0) {
                    v += step;
                    (h, h1, h2) = (cand.0, cand.1, cand.2);
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted || step.abs() <= 1e-13 * (1.0 + v.abs()) {
                break;
            }
        }
        v
    }

    fn county(&self, rows: &[usize], beta: &[f64], s: f64, level: Level) -> CountyOut {
        let p = self.p();
        let d = self.dim();
        if rows.is_empty() {
            return CountyOut {
                ll: 0.0,
                grad: vec![0.0; if level >= Level::Gradient { d } else { 0 }],
                hess: vec![0.0; if level >= Level::Hessian { d * d } else { 0 }],
                mode: 0.0,
            };
        }
        let x = |i: usize| self.dm.row(i);
        let eta: Vec<f64> = rows.iter().map(|&i| x(i).iter().zip(beta).map(|(a, b)| a * b).sum()).collect();
        let q = |i: usize| if self.dm.y[i] { 1.0 } else { -1.0 };
        let vhat = self.mode(rows, &eta, s);
        let (_, _, h2, h3) = self.h_derivs(rows, &eta, s, vhat);
        let shat = (-h2).powf(-0.5);

        // derivatives of the mode and scale with respect to θ
        let mut dv = vec![0.0; d];
        let mut dsh = vec![0.0; d];
        if level >= Level::Gradient && self.free_sigma {
            let mut dh1 = vec![0.0; d];
            let mut dh2 = vec![0.0; d];
            for (k, &i) in rows.iter().enumerate() {
                let a = q(i) * (eta[k] + s * vhat);
                let (d1, d2, d3) = self.link.log_cdf_d3(a);
                for (j, xv) in x(i).iter().enumerate() {
                    dh1[j] += d2 * s * xv;
                    dh2[j] += d3 * q(i) * s * s * xv;
                }
                dh1[p] += d2 * vhat * s + q(i) * d1;
                dh2[p] += d3 * q(i) * vhat * s * s + 2.0 * s * d2;
            }
            for j in 0..d {
                dv[j] = -dh1[j] / h2;
                let dh2_total = dh2[j] + h3 * dv[j];
                dsh[j] = 0.5 * (-h2).powf(-1.5) * dh2_total;
            }
        }

        let m = self.rule.len();
        let mut t = Vec::with_capacity(m);
        let mut h1s = Vec::with_capacity(m);
        let mut gk: Vec<Vec<f64>> = Vec::new();
        let mut hk: Vec<Vec<f64>> = Vec::new();
        for (node, ln_w) in self.rule.nodes.iter().zip(&self.ln_w) {
            let v = vhat + SQRT_2 * shat * node;
            let mut sl = 0.0;
            let mut s1 = 0.0;
            let mut g = vec![0.0; if level >= Level::Gradient { d } else { 0 }];
            let mut hm = vec![0.0; if level >= Level::Hessian { d * d } else { 0 }];
            for (k, &i) in rows.iter().enumerate() {
                let qi = q(i);
                let a = qi * (eta[k] + s * v);
                sl += self.link.log_cdf(a);
                if level == Level::Value {
                    continue;
                }
                let (d1, d2) = self.link.log_cdf_d2(a);
                s1 += qi * d1;
                let xi = x(i);
                for j in 0..p {
                    g[j] += qi * d1 * xi[j];
                }
                if self.free_sigma {
                    g[p] += qi * d1 * v;
                }
                if level == Level::Hessian {
                    for j in 0..p {
                        let c = d2 * xi[j];
                        for l in 0..=j {
                            hm[j * d + l] += c * xi[l];
                        }
                        if self.free_sigma {
                            hm[p * d + j] += c * v;
                        }
                    }
                    if self.free_sigma {
                        hm[p * d + p] += d2 * v * v;
                    }
                }
            }
            t.push(ln_w + node * node + sl - 0.5 * v * v - LN_SQRT_2PI);
            h1s.push(s * s1 - v);
            if level >= Level::Gradient {
                gk.push(g);
            }
            if level == Level::Hessian {
                for j in 0..d {
                    for l in 0..j {
                        hm[l * d + j] = hm[j * d + l];
                    }
                }
                hk.push(hm);
            }
        }
        let tmax = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = t.iter().map(|v| (v - tmax).exp()).sum();
        let lse = tmax + sum.ln();
        let ll = (SQRT_2 * shat).ln() + lse;

        let mut grad = Vec::new();
        let mut hess = Vec::new();
        if level >= Level::Gradient {
            let pi: Vec<f64> = t.iter().map(|v| (v - lse).exp()).collect();
            grad = (0..d).map(|j| dsh[j] / shat).collect();
            let mut gbar = vec![0.0; d];
            for k in 0..m {
                for j in 0..d {
                    grad[j] += pi[k] * (gk[k][j] + h1s[k] * (dv[j] + SQRT_2 * self.rule.nodes[k] * dsh[j]));
                    gbar[j] += pi[k] * gk[k][j];
                }
            }
            if level == Level::Hessian {
                hess = vec![0.0; d * d];
                for k in 0..m {
                    for a in 0..d {
                        for b in 0..d {
                            hess[a * d + b] += pi[k] * (hk[k][a * d + b] + gk[k][a] * gk[k][b]);
                        }
                    }
                }
                for a in 0..d {
                    for b in 0..d {
                        hess[a * d + b] -= gbar[a] * gbar[b];
                    }
                }
            }
        }
        CountyOut { ll, grad, hess, mode: vhat }
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct Optimum {
    theta: Vec<f64>,
    ll: f64,
    gradient_norm: f64,
    iterations: usize,
    converged: bool,
}

fn optimize(model: &Model, theta0: Vec<f64>, tol: f64, max_iters: usize) -> Optimum {
    let d = model.dim();
    let mut theta = theta0;
    let mut ev = model.evaluate(&theta, Level::Hessian);
    let mut iterations = 0;
    loop {
        let gnorm = inf_norm(&ev.grad);
        if gnorm < tol || !ev.ll.is_finite() {
            return Optimum { theta, ll: ev.ll, gradient_norm: gnorm, iterations, converged: gnorm < tol };
        }
        if iterations >= max_iters {
            return Optimum { theta, ll: ev.ll, gradient_norm: gnorm, iterations, converged: false };
        }
        iterations += 1;
        let neg_h = DMatrix::from_row_slice(d, d, &ev.hess).map(|v| -v);
        let g = DVector::from_column_slice(&ev.grad);
        let scale = (0..d).map(|i| neg_h[(i, i)].abs()).fold(1e-12, f64::max);
        let mut mu = 0.0;
        let dir = loop {
            let mut a = neg_h.clone();
            for i in 0..d {
                a[(i, i)] += mu;
            }
            if let Some(ch) = a.cholesky() {
                break ch.solve(&g);
            }
            mu = if mu == 0.0 { 1e-8 * scale } else { mu * 10.0 };
            if mu > 1e12 * scale {
                break g.clone() / scale;
            }
        };
        let slope = g.dot(&dir);
        let mut step = 1.0;
        let mut next = None;
        for _ in 0..50 {
            let trial: Vec<f64> = theta.iter().zip(dir.iter()).map(|(t, d)| t + step * d).collect();
            let v = model.evaluate(&trial, Level::Value).ll;
            if v.is_finite() && v >= ev.ll + 1e-4 * step * slope - 64.0 * f64::EPSILON * ev.ll.abs() {
                next = Some(trial);
                break;
            }
            step *= 0.5;
        }
        match next {
            Some(trial) => {
                theta = trial;
                ev = model.evaluate(&theta, Level::Hessian);
            }
            None => {
                return Optimum { theta, ll: ev.ll, gradient_norm: gnorm, iterations, converged: false };
            }
        }
    }
}

fn check(dm: &DesignMatrix, config: &GlmmConfig) -> Result<()> {
    if dm.n_rows() == 0 || dm.n_cols() == 0 {
        return Err(Error::InvalidArgument("empty design matrix".into()));
    }
    if config.n_quadrature == 0 {
        return Err(Error::InvalidArgument("n_quadrature must be at least 1".into()));
    }
    if !config.sigma_fixed_zero {
        let mut used = vec![false; dm.counties.len()];
        dm.county.iter().for_each(|&c| used[c] = true);
        if used.iter().filter(|&&u| u).count() < 2 {
            return Err(Error::InvalidArgument("a random intercept needs at least 2 counties with rows".into()));
        }
    }
    Ok(())
}

/// Pooled fit with σ = 0 from a zero start.
fn pooled(dm: &DesignMatrix, config: &GlmmConfig) -> Optimum {
    let model = Model::new(dm, 1, config.link, false);
    optimize(&model, vec![0.0; dm.n_cols()], config.tolerance, config.max_iters)
}

struct RawRun {
    theta: Vec<f64>,
    free_sigma: bool,
    opt: Optimum,
    boundary: bool,
    seed: u64,
}

fn run(dm: &DesignMatrix, config: &GlmmConfig, start: &[f64], seed: u64) -> RawRun {
    if config.sigma_fixed_zero {
        let model = Model::new(dm, config.n_quadrature, config.link, false);
        let opt = optimize(&model, start.to_vec(), config.tolerance, config.max_iters);
        return RawRun { theta: opt.theta.clone(), free_sigma: false, opt, boundary: false, seed };
    }
    let mut rng = seed::rng(seed::labeled(seed, "glmm-start"));
    let noise = Normal::new(0.0, 0.1).expect("valid normal");
    let mut theta: Vec<f64> = start.iter().map(|b| b + noise.sample(&mut rng)).collect();
    theta.push(rng.random_range(0.1..0.6));
    let model = Model::new(dm, config.n_quadrature, config.link, true);
    let opt = optimize(&model, theta, config.tolerance, config.max_iters);
    let p = dm.n_cols();
    if opt.theta[p].abs() < SIGMA_BOUNDARY {
        let fixed = Model::new(dm, config.n_quadrature, config.link, false);
        let refit = optimize(&fixed, opt.theta[..p].to_vec(), config.tolerance, config.max_iters);
        return RawRun { theta: refit.theta.clone(), free_sigma: false, opt: refit, boundary: true, seed };
    }
    RawRun { theta: opt.theta.clone(), free_sigma: true, opt, boundary: false, seed }
}

fn criteria(ll: f64, n_fixed: usize, n_obs: usize) -> (f64, f64) {
    let k = (n_fixed + 1) as f64;
    (-2.0 * ll + 2.0 * k, -2.0 * ll + k * (n_obs as f64).ln())
}

fn summary(dm: &DesignMatrix, r: &RawRun) -> RunSummary {
    let (aic, bic) = criteria(r.opt.ll, dm.n_cols(), dm.n_rows());
    let sigma_u = if r.free_sigma { r.theta[dm.n_cols()].abs() } else { 0.0 };
    RunSummary {
        seed: r.seed,
        loglik: r.opt.ll,
        aic,
        bic,
        sigma_u,
        converged: r.opt.converged,
        iterations: r.opt.iterations,
        gradient_norm: r.opt.gradient_norm,
    }
}

/// Observed information by central differences of the exact gradient.
fn information(model: &Model, theta: &[f64]) -> DMatrix<f64> {
    let d = theta.len();
    let mut info = DMatrix::zeros(d, d);
    for j in 0..d {
        let h = 1e-5 * theta[j].abs().max(1.0);
        let mut up = theta.to_vec();
        let mut down = theta.to_vec();
        up[j] += h;
        down[j] -= h;
        let gu = model.evaluate(&up, Level::Gradient).grad;
        let gd = model.evaluate(&down, Level::Gradient).grad;
        for i in 0..d {
            info[(i, j)] = -(gu[i] - gd[i]) / (2.0 * h);
        }
    }
    (&info + info.transpose()) * 0.5
}

fn finalize(dm: &DesignMatrix, config: &GlmmConfig, r: RawRun) -> GlmmFit {
    let p = dm.n_cols();
    let model = Model::new(dm, config.n_quadrature, config.link, r.free_sigma);
    let info = information(&model, &r.theta);
    let cov = info.clone().cholesky().map(|c| c.inverse()).or_else(|| info.try_inverse());
    let se: Vec<f64> = (0..p)
        .map(|j| match &cov {
            Some(c) if c[(j, j)] > 0.0 => c[(j, j)].sqrt(),
            _ => f64::NAN,
        })
        .collect();
    let fixed = (0..p)
        .map(|j| {
            let estimate = r.theta[j];
            let z_value = estimate / se[j];
            FixedEffect {
                name: dm.names[j].clone(),
                estimate,
                std_error: se[j],
                z_value,
                p_value: stats::two_sided_p(z_value),
            }
        })
        .collect();
    let s = if r.free_sigma { r.theta[p] } else { 0.0 };
    let modes = model.evaluate(&r.theta, Level::Value).modes;
    let blups = dm.counties.iter().cloned().zip(modes.iter().map(|v| s * v + 0.0)).collect();
    let (aic, bic) = criteria(r.opt.ll, p, dm.n_rows());
    GlmmFit {
        fixed,
        sigma2_u: s * s,
        sigma_u: s.abs(),
        blups,
        loglik: r.opt.ll,
        aic,
        bic,
        n_obs: dm.n_rows(),
        n_quadrature: config.n_quadrature,
        converged: r.opt.converged,
        boundary: r.boundary,
        run_seed: r.seed,
        iterations: r.opt.iterations,
        gradient_norm: r.opt.gradient_norm,
        link: config.link,
    }
}

/// One fit started from the pooled estimate, perturbed by `config.seed`.
/// A run that does not converge is returned with `converged = false`.
pub fn fit_glmm(dm: &DesignMatrix, config: &GlmmConfig) -> Result<GlmmFit> {
    check(dm, config)?;
    let start = if config.sigma_fixed_zero { vec![0.0; dm.n_cols()] } else { pooled(dm, config).theta };
    Ok(finalize(dm, config, run(dm, config, &start, config.seed)))
}

/// Runs seeds `config.seed + k` for `k < n_runs` and keeps the converged
/// run with the lowest AIC, then BIC, then earliest seed.
pub fn multi_start_select(dm: &DesignMatrix, n_runs: usize, config: &GlmmConfig) -> Result<MultiStart> {
    check(dm, config)?;
    if n_runs == 0 {
        return Err(Error::InvalidArgument("n_runs must be at least 1".into()));
    }
    let start = if config.sigma_fixed_zero { vec![0.0; dm.n_cols()] } else { pooled(dm, config).theta };
    let raw: Vec<RawRun> = (0..n_runs as u64)
        .into_par_iter()
        .map(|k| run(dm, config, &start, config.seed.wrapping_add(k)))
        .collect();
    let runs: Vec<RunSummary> = raw.iter().map(|r| summary(dm, r)).collect();
    let best = runs
        .iter()
        .enumerate()
        .filter(|(_, r)| r.converged)
        .min_by(|(i, a), (j, b)| a.aic.total_cmp(&b.aic).then(a.bic.total_cmp(&b.bic)).then(i.cmp(j)))
        .map(|(i, _)| i);
    let Some(best) = best else {
        let detail = runs
            .iter()
            .map(|r| format!("seed {}: {} iterations, gradient {:e}", r.seed, r.iterations, r.gradient_norm))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(Error::AllRunsFailed(detail));
    };
    let chosen = raw.into_iter().nth(best).expect("index in range");
    Ok(MultiStart { selected: finalize(dm, config, chosen), runs })
}

fn theta_of(dm: &DesignMatrix, beta: &[f64], sigma: Option<f64>) -> Result<Vec<f64>> {
    if beta.len() != dm.n_cols() {
        return Err(Error::DimensionMismatch { expected: dm.n_cols(), got: beta.len() });
    }
    let mut theta = beta.to_vec();
    theta.extend(sigma);
    Ok(theta)
}

/// Quadrature marginal log-likelihood at `(β, σ)`; `None` means σ = 0.
pub fn marginal_loglik(dm: &DesignMatrix, beta: &[f64], sigma: Option<f64>, config: &GlmmConfig) -> Result<f64> {
    let theta = theta_of(dm, beta, sigma)?;
    Ok(Model::new(dm, config.n_quadrature, config.link, sigma.is_some()).evaluate(&theta, Level::Value).ll)
}

/// Gradient of [`marginal_loglik`] over β, then σ when given.
pub fn marginal_loglik_gradient(dm: &DesignMatrix, beta: &[f64], sigma: Option<f64>, config: &GlmmConfig) -> Result<Vec<f64>> {
    let theta = theta_of(dm, beta, sigma)?;
    Ok(Model::new(dm, config.n_quadrature, config.link, sigma.is_some()).evaluate(&theta, Level::Gradient).grad)
}

impl GlmmFit {
    pub fn coefficient(&self, name: &str) -> Option<&FixedEffect> {
        self.fixed.iter().find(|f| f.name == name)
    }

    /// Random-effects block followed by the fixed-effects block.
    pub fn render_table8(&self) -> String {
        let mut out = String::from("Random effects:\nGroups\tName\tVariance\tStd. Dev\n");
        let _ = writeln!(out, "County\tIntercept\t{:.5}\t{:.4}", self.sigma2_u, self.sigma_u);
        out.push_str("Fixed effects:\nVariable Name\tEstimate\tStd.Error\tZ Value\tPr(>z)\n");
        for f in &self.fixed {
            let _ = writeln!(out, "{}\t{:.3}\t{:.3}\t{:.3}\t{:.3}", f.name, f.estimate, f.std_error, f.z_value, f.p_value);
        }
        let _ = writeln!(
            out,
            "logLik\t{:.3}\nAIC\t{:.3}\nBIC\t{:.3}\nObservations\t{}\nQuadrature nodes\t{}\nConverged\t{}\nBoundary\t{}",
            self.loglik, self.aic, self.bic, self.n_obs, self.n_quadrature, self.converged, self.boundary
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::simulate;

    fn intercept_only(y: &[bool], counties: usize) -> DesignMatrix {
        let n = y.len();
        DesignMatrix::from_columns(
            vec!["(Intercept)".into()],
            vec![vec![1.0; n]],
            y.to_vec(),
            (0..n).map(|i| i % counties).collect(),
            (0..counties).map(|c| format!("c{c}")).collect(),
            (0..n as i64).collect(),
        )
        .unwrap()
    }

    #[test]
    fn pooled_intercept_is_inverse_link_of_mean() {
        for &(ones, n) in &[(50usize, 100usize), (30, 100), (7, 40)] {
            let y: Vec<bool> = (0..n).map(|i| i < ones).collect();
            let dm = intercept_only(&y, 3);
            let cfg = GlmmConfig { sigma_fixed_zero: true, ..Default::default() };
            let fit = fit_glmm(&dm, &cfg).unwrap();
            let expect = stats::norm_ppf(ones as f64 / n as f64);
            assert!((fit.fixed[0].estimate - expect).abs() < 1e-6, "{} vs {expect}", fit.fixed[0].estimate);
            assert_eq!(fit.sigma2_u, 0.0);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for (link, nodes) in [(Link::Probit, 15), (Link::Probit, 1), (Link::Logistic, 7)] {
            let sim = simulate::simulate_small(150, 5, 0.6, 21);
            let cfg = GlmmConfig { n_quadrature: nodes, link, ..Default::default() };
            let beta: Vec<f64> = (0..sim.design.n_cols()).map(|j| 0.1 * j as f64 - 0.2).collect();
            let sigma = 0.45;
            let g = marginal_loglik_gradient(&sim.design, &beta, Some(sigma), &cfg).unwrap();
            let h = 1e-6;
            for j in 0..=beta.len() {
                let f = |delta: f64| {
                    let mut b = beta.clone();
                    let mut s = sigma;
                    if j < b.len() {
                        b[j] += delta;
                    } else {
                        s += delta;
                    }
                    marginal_loglik(&sim.design, &b, Some(s), &cfg).unwrap()
                };
                let fd = (f(h) - f(-h)) / (2.0 * h);
                assert!((g[j] - fd).abs() <= 1e-5 * fd.abs().max(1.0), "{link} nodes={nodes} j={j}: {} vs {fd}", g[j]);
            }
        }
    }

    #[test]
    fn aic_bic_identities() {
        let sim = simulate::simulate_small(300, 6, 0.5, 2);
        let fit = fit_glmm(&sim.design, &GlmmConfig { seed: 4, ..Default::default() }).unwrap();
        assert!(fit.converged);
        let k = (fit.fixed.len() + 1) as f64;
        assert_eq!(fit.aic, -2.0 * fit.loglik + 2.0 * k);
        assert_eq!(fit.bic, -2.0 * fit.loglik + k * (fit.n_obs as f64).ln());
        assert_eq!(fit.sigma_u, fit.sigma2_u.sqrt());
        for f in &fit.fixed {
            assert_eq!(f.z_value, f.estimate / f.std_error);
            assert_eq!(f.p_value, stats::two_sided_p(f.z_value));
        }
    }

    #[test]
    fn single_run_matches_fit() {
        let sim = simulate::simulate_small(200, 5, 0.4, 8);
        let cfg = GlmmConfig { seed: 12, ..Default::default() };
        let a = fit_glmm(&sim.design, &cfg).unwrap();
        let b = multi_start_select(&sim.design, 1, &cfg).unwrap();
        assert_eq!(a, b.selected);
        assert_eq!(b.runs.len(), 1);
    }

    #[test]
    fn boundary_when_no_county_variation() {
        // identical outcome mix in every county drives σ to zero
        let y: Vec<bool> = (0..400).map(|i| (i / 4) % 2 == 0).collect();
        let dm = intercept_only(&y, 4);
        let fit = fit_glmm(&dm, &GlmmConfig { seed: 1, ..Default::default() }).unwrap();
        assert!(fit.converged);
        assert!(fit.boundary);
        assert_eq!(fit.sigma2_u, 0.0);
        assert!(fit.blups.values().all(|&b| b == 0.0));
    }

    #[test]
    fn table_layout() {
        let sim = simulate::simulate_small(200, 5, 0.4, 8);
        let fit = fit_glmm(&sim.design, &GlmmConfig::default()).unwrap();
        let t = fit.render_table8();
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "Random effects:");
        assert!(lines[2].starts_with("County\tIntercept\t"));
        assert_eq!(lines[3], "Fixed effects:");
        assert!(lines[5].starts_with("(Intercept)\t"));
    }
}
