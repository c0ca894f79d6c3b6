//! Radial kernels on the hyperbolic plane: the resolvent kernel, its radial
//! derivative, the smooth cutoff, the remainder kernel, and Selberg-transform
//! operator norms.
//!
//! The resolvent kernel at distance r with sigma = cosh^2(r/2) is
//!
//!   R(s; r) = (1/4pi) int_0^1 t^{s-1} (1-t)^{s-1} / (sigma - t)^s dt.
//!
//! Quadrature uses the substitution t = sin^2(theta), which symmetrizes the
//! endpoint factors, composed with theta = (pi/2) sin^2(psi) so the endpoint
//! powers become polynomial degrees and Gauss-Legendre converges at spectral
//! rate for the spectral parameters of interest. Radii below a small
//! threshold switch to a split form whose tail piece resolves the
//! logarithmic diagonal behaviour explicitly.

use crate::error::{Error, Result};
use crate::estimate::NormEstimate;
use crate::quad::{rule, GaussLegendre};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::{Arc, Mutex, OnceLock};

/// The spectral parameter s in [1/2, 1]; the eigenvalue abscissa is s(1-s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralParam(f64);

impl SpectralParam {
    pub fn new(s: f64) -> Result<Self> {
        if !(0.5..=1.0).contains(&s) {
            return Err(Error::SpectralParamOutOfRange(s));
        }
        Ok(SpectralParam(s))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// The eigenvalue abscissa lambda = s(1-s) in [0, 1/4].
    pub fn lambda(self) -> f64 {
        self.0 * (1.0 - self.0)
    }
}

pub const DEFAULT_NODES: usize = 64;
pub const VERIFY_NODES: usize = 128;

/// sinh(r/2) below which the split small-r evaluation is used.
const SMALL_DELTA: f64 = 0.02;
/// Angular width of the tail piece in the split evaluation.
const TAIL_W: f64 = 0.35;

/// Per-rule tabulation of the smoothed main integrand: at mapped node j we
/// store log(sin(theta_j) cos(theta_j)), sin^2(theta_j) and the full chain
/// weight, so an evaluation is one exp/ln pair per node.
struct MainRule {
    log_sc: Vec<f64>,
    sin2: Vec<f64>,
    w: Vec<f64>,
}

impl MainRule {
    fn new(n: usize) -> Self {
        let gl = rule(n);
        let mut log_sc = Vec::with_capacity(n);
        let mut sin2 = Vec::with_capacity(n);
        let mut w = Vec::with_capacity(n);
        for (&x, &wt) in gl.nodes.iter().zip(&gl.weights) {
            // psi in (0, pi/2), theta = (pi/2) sin^2(psi)
            let psi = FRAC_PI_2 * 0.5 * (x + 1.0);
            let theta = FRAC_PI_2 * psi.sin().powi(2);
            let (st, ct) = (theta.sin(), theta.cos());
            log_sc.push((st * ct).ln());
            sin2.push(st * st);
            // d theta = pi sin(psi) cos(psi) d psi, and the psi interval
            // [0, pi/2] maps from [-1, 1] with half-width pi/4.
            let chain = PI * psi.sin() * psi.cos() * FRAC_PI_2 * 0.5;
            w.push(wt * chain / (2.0 * PI));
        }
        MainRule { log_sc, sin2, w }
    }

    /// integral over theta of (sin cos)^{2s-1} (sigma - sin^2)^{-p} / (2 pi)
    fn integrate(&self, s: f64, p: f64, sigma: f64) -> f64 {
        let q = 2.0 * s - 1.0;
        let mut acc = 0.0;
        for j in 0..self.w.len() {
            acc += self.w[j] * (q * self.log_sc[j] - p * (sigma - self.sin2[j]).ln()).exp();
        }
        acc
    }
}

fn main_rule(n: usize) -> Arc<MainRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<MainRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    guard.entry(n).or_insert_with(|| Arc::new(MainRule::new(n))).clone()
}

/// Small-r evaluation: theta in [0, pi/2 - w] integrated with an
/// endpoint-smoothed rule, plus the tail piece phi in [0, w] under
/// sin(phi) = delta sinh(v), which turns the near-diagonal mass into a
/// bounded integrand on [0, arcsinh(sin w / delta)].
fn small_r_integral(s: f64, p: f64, delta: f64, gl: &GaussLegendre) -> f64 {
    let theta_c = FRAC_PI_2 - TAIL_W;
    let sigma = 1.0 + delta * delta;
    // main piece with left-endpoint smoothing theta = theta_c sin^2(psi)
    let q = 2.0 * s - 1.0;
    let mut main = 0.0;
    for (&x, &wt) in gl.nodes.iter().zip(&gl.weights) {
        let psi = FRAC_PI_2 * 0.5 * (x + 1.0);
        let theta = theta_c * psi.sin().powi(2);
        let (st, ct) = (theta.sin(), theta.cos());
        let chain = 2.0 * theta_c * psi.sin() * psi.cos() * FRAC_PI_2 * 0.5;
        main += wt * chain * (st * ct).powf(q) * (sigma - st * st).powf(-p);
    }
    main /= 2.0 * PI;

    // tail piece
    let v_hi = (TAIL_W.sin() / delta).asinh();
    let mut tail = 0.0;
    for (&x, &wt) in gl.nodes.iter().zip(&gl.weights) {
        let psi = FRAC_PI_2 * 0.5 * (x + 1.0);
        let v = v_hi * psi.sin().powi(2);
        let chain = 2.0 * v_hi * psi.sin() * psi.cos() * FRAC_PI_2 * 0.5;
        let (sh, ch) = (v.sinh(), v.cosh());
        let sin_phi = delta * sh;
        let cos_phi2 = 1.0 - sin_phi * sin_phi;
        // (cos phi)^{2s-2} (delta sinh v)^{2s-1} delta cosh v
        //   / (delta^2 cosh^2 v)^p
        let val = cos_phi2.powf(s - 1.0)
            * (delta * sh).powf(q)
            * delta
            * ch
            * (delta * delta * ch * ch).powf(-p);
        tail += wt * chain * val;
    }
    tail /= 2.0 * PI;
    main + tail
}

fn eval_resolvent(s: f64, r: f64, n: usize) -> f64 {
    let half = 0.5 * r;
    let delta = half.sinh();
    if delta >= SMALL_DELTA {
        let sigma = half.cosh().powi(2);
        main_rule(n).integrate(s, s, sigma)
    } else {
        small_r_integral(s, s, delta, &rule(n))
    }
}

fn eval_resolvent_dr(s: f64, r: f64, n: usize) -> f64 {
    let half = 0.5 * r;
    let delta = half.sinh();
    let pre = -s * half.sinh() * half.cosh();
    if delta >= SMALL_DELTA {
        let sigma = half.cosh().powi(2);
        pre * main_rule(n).integrate(s, s + 1.0, sigma)
    } else {
        pre * small_r_integral(s, s + 1.0, delta, &rule(n))
    }
}

/// Resolvent kernel R(s; r) of the hyperbolic plane at distance r > 0.
pub fn resolvent_kernel(s: SpectralParam, r: f64) -> Result<f64> {
    resolvent_kernel_with_nodes(s, r, DEFAULT_NODES)
}

pub fn resolvent_kernel_with_nodes(s: SpectralParam, r: f64, nodes: usize) -> Result<f64> {
    if r <= 0.0 {
        return Err(Error::NonPositiveRadius(r));
    }
    Ok(eval_resolvent(s.value(), r, nodes))
}

/// Value together with the self-reported quadrature error |I_N - I_2N|.
pub fn resolvent_kernel_self_error(
    s: SpectralParam,
    r: f64,
    nodes: usize,
) -> Result<(f64, f64)> {
    if r <= 0.0 {
        return Err(Error::NonPositiveRadius(r));
    }
    let v = eval_resolvent(s.value(), r, nodes);
    let v2 = eval_resolvent(s.value(), r, 2 * nodes);
    Ok((v, (v - v2).abs()))
}

/// Radial derivative of the resolvent kernel.
pub fn resolvent_kernel_dr(s: SpectralParam, r: f64) -> Result<f64> {
    resolvent_kernel_dr_with_nodes(s, r, DEFAULT_NODES)
}

pub fn resolvent_kernel_dr_with_nodes(s: SpectralParam, r: f64, nodes: usize) -> Result<f64> {
    if r <= 0.0 {
        return Err(Error::NonPositiveRadius(r));
    }
    Ok(eval_resolvent_dr(s.value(), r, nodes))
}

/// Quintic smoothstep u^3 (10 - 15u + 6u^2).
fn smoothstep(u: f64) -> f64 {
    u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
}

fn smoothstep_d1(u: f64) -> f64 {
    30.0 * u * u * (1.0 - u) * (1.0 - u)
}

fn smoothstep_d2(u: f64) -> f64 {
    60.0 * u * (1.0 - u) * (1.0 - 2.0 * u)
}

/// Largest value of |smoothstep'| on [0, 1].
pub const SMOOTHSTEP_MAX_D1: f64 = 15.0 / 8.0;
/// Largest value of |smoothstep''| on [0, 1]: 10/sqrt(3).
pub const SMOOTHSTEP_MAX_D2: f64 = 5.773502691896258;

/// The radial cutoff chi_T: identically one on (-inf, T], identically zero on
/// [T+1, inf), C^2 across the transition with closed-form derivative extrema.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffProfile {
    pub offset: f64,
    pub profile: &'static str,
}

impl CutoffProfile {
    pub fn new(offset: f64) -> Self {
        CutoffProfile { offset, profile: "quintic-smoothstep" }
    }

    pub fn value(&self, t: f64) -> f64 {
        let u = t - self.offset;
        if u <= 0.0 {
            1.0
        } else if u >= 1.0 {
            0.0
        } else {
            1.0 - smoothstep(u)
        }
    }

    pub fn d1(&self, t: f64) -> f64 {
        let u = t - self.offset;
        if !(0.0..=1.0).contains(&u) {
            0.0
        } else {
            -smoothstep_d1(u)
        }
    }

    pub fn d2(&self, t: f64) -> f64 {
        let u = t - self.offset;
        if !(0.0..=1.0).contains(&u) {
            0.0
        } else {
            -smoothstep_d2(u)
        }
    }
}

/// Remainder kernel of the truncated resolvent:
/// (-chi_T'' - chi_T'/tanh r) R(s; r) - 2 chi_T' dR/dr(s; r).
/// Identically zero outside (T, T+1).
pub fn remainder_kernel(s: SpectralParam, t_offset: f64, r: f64) -> Result<f64> {
    remainder_kernel_with_nodes(s, t_offset, r, DEFAULT_NODES)
}

pub fn remainder_kernel_with_nodes(
    s: SpectralParam,
    t_offset: f64,
    r: f64,
    nodes: usize,
) -> Result<f64> {
    if t_offset <= 1.0 {
        return Err(Error::InvalidParam(format!("cutoff offset T={t_offset} must exceed 1")));
    }
    let chi = CutoffProfile::new(t_offset);
    if r <= t_offset || r >= t_offset + 1.0 {
        return Ok(0.0);
    }
    let d1 = chi.d1(r);
    let d2 = chi.d2(r);
    let rv = eval_resolvent(s.value(), r, nodes);
    let dv = eval_resolvent_dr(s.value(), r, nodes);
    Ok((-d2 - d1 / r.tanh()) * rv - 2.0 * d1 * dv)
}

/// An evaluable radial function with declared compact support.
#[derive(Clone)]
pub struct RadialKernel {
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub support_lo: f64,
    pub support_hi: f64,
    pub smooth: bool,
}

impl std::fmt::Debug for RadialKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RadialKernel")
            .field("support_lo", &self.support_lo)
            .field("support_hi", &self.support_hi)
            .field("smooth", &self.smooth)
            .finish()
    }
}

impl RadialKernel {
    pub fn new<F>(support_lo: f64, support_hi: f64, smooth: bool, eval: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        RadialKernel { eval: Arc::new(eval), support_lo, support_hi, smooth }
    }

    pub fn zero() -> Self {
        RadialKernel::new(0.0, 0.0, true, |_| 0.0)
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r < self.support_lo || r > self.support_hi {
            0.0
        } else {
            (self.eval)(r)
        }
    }

    /// Replaces the evaluator by a dense cubic-interpolation table on the
    /// support; subsequent evaluations cost a table lookup.
    pub fn tabulated(&self, n: usize) -> Self {
        assert!(n >= 8);
        let lo = self.support_lo;
        let hi = self.support_hi;
        if !(hi > lo) {
            return self.clone();
        }
        let step = (hi - lo) / n as f64;
        let values: Vec<f64> = (0..=n).map(|i| self.eval(lo + i as f64 * step)).collect();
        let smooth = self.smooth;
        RadialKernel::new(lo, hi, smooth, move |r| {
            let x = (r - lo) / step;
            let i = (x.floor() as usize).min(n - 1);
            let f = x - i as f64;
            // Catmull-Rom with clamped ends.
            let vm = values[i.saturating_sub(1)];
            let v0 = values[i];
            let v1 = values[i + 1];
            let vp = values[(i + 2).min(n)];
            let a = 0.5 * (v1 - vm);
            let b = vm - 2.5 * v0 + 2.0 * v1 - 0.5 * vp;
            let c = 0.5 * (-vm + 3.0 * v0 - 3.0 * v1 + vp);
            v0 + f * (a + f * (b + f * c))
        })
    }
}

/// The remainder kernel as a table-backed radial kernel, ready for the
/// Selberg transform.
pub fn remainder_kernel_operator(s: SpectralParam, t_offset: f64, table_n: usize) -> RadialKernel {
    let sv = s.value();
    let direct = RadialKernel::new(t_offset, t_offset + 1.0, true, move |r| {
        remainder_kernel(SpectralParam::new(sv).unwrap(), t_offset, r)
            .unwrap_or(0.0)
    });
    direct.tabulated(table_n)
}

/// chi_T(r) R(s; r) truncated below an inner radius delta; used to exercise
/// the transform identity against the remainder-kernel norm.
pub fn truncated_resolvent_kernel(s: SpectralParam, t_offset: f64, delta: f64) -> RadialKernel {
    let sv = s.value();
    let chi = CutoffProfile::new(t_offset);
    RadialKernel::new(delta, t_offset + 1.0, false, move |r| {
        chi.value(r) * eval_resolvent(sv, r, 32)
    })
}

/// Selberg transform of a radial kernel evaluated on a xi grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelbergEvaluation {
    pub xi_grid: Vec<f64>,
    pub h_values: Vec<f64>,
    pub sup_estimate: f64,
}

/// Precomputed inner integral g(u) = int k(rho) sinh(rho) /
/// sqrt(cosh rho - cosh u) d rho on a Gauss-Legendre u-grid, so each h(xi)
/// evaluation is a single cosine-weighted sum. The inner substitution
/// cosh rho = cosh u + v^2 removes the edge singularity.
pub struct SelbergContext {
    u_nodes: Vec<f64>,
    u_weights: Vec<f64>,
    g: Vec<f64>,
}

impl SelbergContext {
    pub fn new(kernel: &RadialKernel, xi_max: f64) -> Result<Self> {
        if !kernel.support_hi.is_finite() || !kernel.support_lo.is_finite() {
            return Err(Error::UnsupportedKernel);
        }
        let b = kernel.support_hi;
        if b <= 0.0 {
            return Ok(SelbergContext { u_nodes: vec![0.0], u_weights: vec![0.0], g: vec![0.0] });
        }
        // Enough outer nodes to resolve cos(xi u) across [0, b].
        let n_u = ((xi_max.max(1.0) * b * 0.75) as usize + 96).next_power_of_two().clamp(256, 8192);
        let n_v = 48;
        let outer = rule(n_u);
        let inner = rule(n_v);
        let cosh_a = kernel.support_lo.max(0.0).cosh();
        let cosh_b = b.cosh();
        let mut u_nodes = Vec::with_capacity(n_u);
        let mut u_weights = Vec::with_capacity(n_u);
        let mut g = Vec::with_capacity(n_u);
        for (&x, &w) in outer.nodes.iter().zip(&outer.weights) {
            let u = 0.5 * b * (x + 1.0);
            let cu = u.cosh();
            let v_lo = (cosh_a - cu).max(0.0).sqrt();
            let v_hi = (cosh_b - cu).max(0.0).sqrt();
            let gu = if v_hi > v_lo {
                inner.integrate(v_lo, v_hi, |v| 2.0 * kernel.eval((cu + v * v).acosh()))
            } else {
                0.0
            };
            u_nodes.push(u);
            u_weights.push(w * 0.5 * b);
            g.push(gu);
        }
        Ok(SelbergContext { u_nodes, u_weights, g })
    }

    /// h(xi) in the cosine form: the inner integral is even in u, so
    /// h(xi) = 2 sqrt(2) int_0^inf cos(xi u) g(u) du.
    pub fn h(&self, xi: f64) -> f64 {
        let mut acc = 0.0;
        for j in 0..self.u_nodes.len() {
            acc += self.u_weights[j] * (xi * self.u_nodes[j]).cos() * self.g[j];
        }
        2.0 * std::f64::consts::SQRT_2 * acc
    }
}

/// Selberg transform h(xi) of a compactly supported radial kernel.
pub fn selberg_transform(kernel: &RadialKernel, xi: f64) -> Result<f64> {
    let ctx = SelbergContext::new(kernel, xi.abs().max(1.0))?;
    Ok(ctx.h(xi.abs()))
}

/// Sweeps the transform over a nested uniform grid of n+1 points on
/// [0, xi_max].
pub fn selberg_sweep(kernel: &RadialKernel, xi_max: f64, n: usize) -> Result<SelbergEvaluation> {
    let ctx = SelbergContext::new(kernel, xi_max)?;
    let xi_grid: Vec<f64> = (0..=n).map(|j| xi_max * j as f64 / n as f64).collect();
    let h_values: Vec<f64> = xi_grid.iter().map(|&xi| ctx.h(xi)).collect();
    let sup_estimate = h_values.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    Ok(SelbergEvaluation { xi_grid, h_values, sup_estimate })
}

/// Operator norm sup_{xi >= 0} |h(xi)| estimated on a uniform grid with one
/// local refinement pass around the grid argmax. The grid sup is a lower
/// bound of the true sup; the refinement gap is reported on the estimate.
pub fn radial_operator_norm(
    kernel: &RadialKernel,
    xi_max: f64,
    grid_n: usize,
) -> Result<NormEstimate> {
    let ctx = SelbergContext::new(kernel, xi_max)?;
    let mut best = 0.0f64;
    let mut best_j = 0usize;
    for j in 0..=grid_n {
        let xi = xi_max * j as f64 / grid_n as f64;
        let v = ctx.h(xi).abs();
        if v > best {
            best = v;
            best_j = j;
        }
    }
    let grid_sup = best;
    let lo = xi_max * best_j.saturating_sub(1) as f64 / grid_n as f64;
    let hi = xi_max * (best_j + 1).min(grid_n) as f64 / grid_n as f64;
    let mut refined = grid_sup;
    let fine = 32;
    for j in 0..=fine {
        let xi = lo + (hi - lo) * j as f64 / fine as f64;
        refined = refined.max(ctx.h(xi).abs());
    }
    Ok(NormEstimate::grid(refined, refined - grid_sup, grid_n + 1))
}

pub const XI_MAX_DEFAULT: f64 = 50.0;
pub const XI_GRID_DEFAULT: usize = 256;
pub const KERNEL_TABLE_N: usize = 1024;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayRow {
    pub s: f64,
    pub t: f64,
    pub norm: f64,
    pub fitted_slope: f64,
}

/// For each s, estimates the remainder-kernel operator norm across the T list
/// and fits the slope of log(norm/T) against T by least squares.
pub fn verify_remainder_decay(s_list: &[f64], t_list: &[f64]) -> Result<Vec<DecayRow>> {
    let mut rows = Vec::new();
    for &s in s_list {
        let sp = SpectralParam::new(s)?;
        let mut norms = Vec::with_capacity(t_list.len());
        for &t in t_list {
            if t < 2.0 {
                return Err(Error::InvalidParam(format!("decay table needs T >= 2, got {t}")));
            }
            let kernel = remainder_kernel_operator(sp, t, KERNEL_TABLE_N);
            let est = radial_operator_norm(&kernel, XI_MAX_DEFAULT, XI_GRID_DEFAULT)?;
            norms.push(est.value);
        }
        let slope = fit_slope(t_list, &norms);
        for (&t, &norm) in t_list.iter().zip(&norms) {
            rows.push(DecayRow { s, t, norm, fitted_slope: slope });
        }
    }
    Ok(rows)
}

/// Least-squares slope of log(norm/T) against T.
fn fit_slope(ts: &[f64], norms: &[f64]) -> f64 {
    let ys: Vec<f64> = ts.iter().zip(norms).map(|(&t, &n)| (n / t).ln()).collect();
    let n = ts.len() as f64;
    let mean_t = ts.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (&t, &y) in ts.iter().zip(&ys) {
        num += (t - mean_t) * (y - mean_y);
        den += (t - mean_t) * (t - mean_t);
    }
    num / den
}
