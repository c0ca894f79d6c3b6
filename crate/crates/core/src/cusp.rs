//! Cusp cutoffs with certified derivative bounds, the explicit resolvent
//! constant for the model cylinder, the cusp error budget, and a
//! finite-element check of the cylinder spectral floor.
//!
//! Cylinder coordinates: tau with r = e^tau, metric d tau^2 + e^{-2 tau}
//! dx^2, volume form e^{-tau} d tau dx. For a radial profile chi(tau) the
//! gradient norm is |chi'| and the Laplacian is chi'' - chi'.

use crate::error::{Error, Result};
use crate::kernels::{SMOOTHSTEP_MAX_D1, SMOOTHSTEP_MAX_D2};
use serde::{Deserialize, Serialize};

fn smoothstep(u: f64) -> f64 {
    u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
}

fn smoothstep_d1(u: f64) -> f64 {
    30.0 * u * u * (1.0 - u) * (1.0 - u)
}

fn smoothstep_d2(u: f64) -> f64 {
    60.0 * u * (1.0 - u) * (1.0 - 2.0 * u)
}

/// A rising profile in the cylinder coordinate: 0 below `start`, 1 above
/// `start + width`, quintic smoothstep across the transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CuspProfile {
    pub start: f64,
    pub width: f64,
}

impl CuspProfile {
    pub fn value(&self, tau: f64) -> f64 {
        let u = (tau - self.start) / self.width;
        if u <= 0.0 {
            0.0
        } else if u >= 1.0 {
            1.0
        } else {
            smoothstep(u)
        }
    }

    pub fn d1(&self, tau: f64) -> f64 {
        let u = (tau - self.start) / self.width;
        if !(0.0..=1.0).contains(&u) {
            0.0
        } else {
            smoothstep_d1(u) / self.width
        }
    }

    pub fn d2(&self, tau: f64) -> f64 {
        let u = (tau - self.start) / self.width;
        if !(0.0..=1.0).contains(&u) {
            0.0
        } else {
            smoothstep_d2(u) / (self.width * self.width)
        }
    }

    /// Closed-form sup of |d/d tau| over the transition.
    pub fn sup_d1(&self) -> f64 {
        SMOOTHSTEP_MAX_D1 / self.width
    }

    pub fn sup_d2(&self) -> f64 {
        SMOOTHSTEP_MAX_D2 / (self.width * self.width)
    }
}

/// The staggered pair chi+ and chi-: chi+ rises first, so chi+ * chi- = chi-
/// holds pointwise, and the certificate tracks the chi+ derivative sups.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CuspCutoffPair {
    pub plus: CuspProfile,
    pub minus: CuspProfile,
    /// Closed-form bound for sup |grad chi+| = sup |chi+'|.
    pub sup_grad_plus: f64,
    /// Closed-form bound for sup |Delta chi+| = sup |chi+'' - chi+'|.
    pub sup_lap_plus: f64,
}

impl CuspCutoffPair {
    /// chi+ rising on [start, start+width], chi- on [start+width,
    /// start+2*width].
    pub fn with_geometry(start: f64, width: f64) -> Self {
        assert!(width > 0.0 && start >= 0.0);
        let plus = CuspProfile { start, width };
        let minus = CuspProfile { start: start + width, width };
        CuspCutoffPair {
            plus,
            minus,
            sup_grad_plus: plus.sup_d1(),
            sup_lap_plus: plus.sup_d2() + plus.sup_d1(),
        }
    }

    /// Start of the chi- transition: (1 - chi-) is identically 1 below this.
    pub fn minus_support_start(&self) -> f64 {
        self.minus.start
    }

    pub fn one_minus_chi_minus(&self, tau: f64) -> f64 {
        1.0 - self.minus.value(tau)
    }
}

/// Builds the pair with width chosen so that sup |chi+'| <= eps/2 and
/// sup |chi+'' - chi+'| <= eps in cylinder coordinates.
pub fn make_cutoff_pair(eps: f64) -> CuspCutoffPair {
    assert!(eps > 0.0);
    let w1 = 2.0 * SMOOTHSTEP_MAX_D1 / eps;
    let w2 = (2.0 * (SMOOTHSTEP_MAX_D2 + SMOOTHSTEP_MAX_D1) / eps).sqrt();
    let width = w1.max(w2);
    CuspCutoffPair::with_geometry(1.0, width)
}

/// The explicit resolvent constant C(s0) = sqrt(17) / (4 (s0 - 1/2)^2):
/// the L^2 -> H^2 norm of the model resolvent is at most
/// sqrt(a^2 + b^2) with a = (1/4 - s(1-s))^{-1} and b = (1 - 4 s(1-s))^{-1},
/// maximized over s in [s0, 1] at s = s0.
pub fn cusp_resolvent_constant(s0: f64) -> Result<f64> {
    if s0 <= 0.5 {
        return Err(Error::InvalidParam(format!(
            "cusp resolvent constant diverges for s0={s0} <= 1/2"
        )));
    }
    let q = (s0 - 0.5) * (s0 - 0.5);
    Ok(17.0f64.sqrt() / (4.0 * q))
}

/// The certified cusp error budget at spectral floor s0.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CuspBudget {
    pub s0: f64,
    pub eps: f64,
    pub resolvent_constant: f64,
    /// sup |Delta chi+| + 2 sup |grad chi+| from the closed-form extrema.
    pub cutoff_bound: f64,
    /// cutoff_bound * resolvent_constant; at most 1/5 by construction.
    pub certificate: f64,
    pub pair: CuspCutoffPair,
}

/// Chooses eps = 1/(15 C(s0)) and builds the pair, so that
/// 3 eps C(s0) = 1/5 exactly and the certified product
/// (sup|Delta chi+| + 2 sup|grad chi+|) C(s0) stays below it.
pub fn cusp_error_certificate(s0: f64) -> Result<CuspBudget> {
    let c = cusp_resolvent_constant(s0)?;
    let eps = 1.0 / (15.0 * c);
    let pair = make_cutoff_pair(eps);
    let cutoff_bound = pair.sup_lap_plus + 2.0 * pair.sup_grad_plus;
    let certificate = cutoff_bound * c;
    let budget = CuspBudget { s0, eps, resolvent_constant: c, cutoff_bound, certificate, pair };
    debug_assert!(budget.certificate <= 3.0 * eps * c + 1e-12);
    Ok(budget)
}

/// Finite-element Rayleigh-quotient minimum for the quadratic form
/// int (|df/dtau|^2 + e^{2 tau} |df/dx|^2) e^{-tau} on the cylinder
/// (-L, L) x (R / m Z) with Dirichlet ends. P1 elements in both directions
/// with exactly integrated exponential weights, so refinement enlarges the
/// trial space and the minimum is an upper bound of the continuum floor.
pub fn cylinder_spectral_floor(
    m: f64,
    grid_tau: usize,
    grid_x: usize,
    half_length: f64,
) -> Result<f64> {
    if m < 1.0 {
        return Err(Error::InvalidParam(format!("cusp circumference m={m} must be >= 1")));
    }
    if grid_tau < 4 || grid_x < 3 || half_length <= 0.0 {
        return Err(Error::DegenerateGrid(format!(
            "grid {grid_tau}x{grid_x}, L={half_length}"
        )));
    }
    let asm = CylinderAssembly::new(m, grid_tau, grid_x, half_length);
    Ok(asm.min_rayleigh())
}

/// 1-D reduction (constant-in-x subspace): generalized tridiagonal problem
/// S f = lambda M f solved by Sturm bisection. Decoupling the zero Fourier
/// mode in x is exact for the discrete form, so this is an independent
/// route to the same minimum.
pub fn cylinder_floor_mode0(grid_tau: usize, half_length: f64) -> Result<f64> {
    if grid_tau < 4 || half_length <= 0.0 {
        return Err(Error::DegenerateGrid(format!("grid {grid_tau}, L={half_length}")));
    }
    let e = Elements1D::new(grid_tau, half_length);
    Ok(e.smallest_eigenvalue_sturm())
}

/// Per-element exact integrals for P1 hats against e^{-tau} and e^{+tau}.
struct Elements1D {
    /// Dirichlet interior dimension n - 1.
    dim: usize,
    // tridiagonal stiffness and mass (weight e^{-tau}); diag/off storage
    s_diag: Vec<f64>,
    s_off: Vec<f64>,
    m_diag: Vec<f64>,
    m_off: Vec<f64>,
    // mass with weight e^{+tau} (multiplies the x-stiffness in 2-D)
    p_diag: Vec<f64>,
    p_off: Vec<f64>,
}

impl Elements1D {
    fn new(n: usize, half_length: f64) -> Self {
        let h = 2.0 * half_length / n as f64;
        // Element integrals on [0, h] with weight e^{-t}:
        //   i0 = int e^{-t}, i1 = int t e^{-t}, i2 = int t^2 e^{-t}
        let eh = (-h).exp();
        let i0 = 1.0 - eh;
        let i1 = 1.0 - eh * (1.0 + h);
        let i2 = 2.0 - eh * (h * h + 2.0 * h + 2.0);
        // and with weight e^{+t}
        let fh = h.exp();
        let j0 = fh - 1.0;
        let j1 = fh * (h - 1.0) + 1.0;
        let j2 = fh * (h * h - 2.0 * h + 2.0) - 2.0;

        let h2 = h * h;
        // hat products: left = (h - t)/h, right = t/h on the element
        let m_ll = (h2 * i0 - 2.0 * h * i1 + i2) / h2;
        let m_lr = (h * i1 - i2) / h2;
        let m_rr = i2 / h2;
        let p_ll = (h2 * j0 - 2.0 * h * j1 + j2) / h2;
        let p_lr = (h * j1 - j2) / h2;
        let p_rr = j2 / h2;

        let dim = n - 1;
        let mut s_diag = vec![0.0; dim];
        let mut s_off = vec![0.0; dim.saturating_sub(1)];
        let mut m_diag = vec![0.0; dim];
        let mut m_off = vec![0.0; dim.saturating_sub(1)];
        let mut p_diag = vec![0.0; dim];
        let mut p_off = vec![0.0; dim.saturating_sub(1)];

        for e in 0..n {
            let a = -half_length + e as f64 * h;
            let wm = (-a).exp(); // e^{-a} scales the unit-element integrals
            let wp = a.exp();
            let s_elem = wm * i0 / h2;
            // global nodes e-1 and e (interior indexing), boundaries dropped
            let li = e as isize - 1;
            let ri = e as isize;
            if li >= 0 && (li as usize) < dim {
                let li = li as usize;
                s_diag[li] += s_elem;
                m_diag[li] += wm * m_ll;
                p_diag[li] += wp * p_ll;
            }
            if ri >= 0 && (ri as usize) < dim {
                let ri = ri as usize;
                s_diag[ri] += s_elem;
                m_diag[ri] += wm * m_rr;
                p_diag[ri] += wp * p_rr;
            }
            if li >= 0 && (ri as usize) < dim && li as usize + 1 == ri as usize {
                let li = li as usize;
                s_off[li] += -s_elem;
                m_off[li] += wm * m_lr;
                p_off[li] += wp * p_lr;
            }
        }
        Elements1D { dim, s_diag, s_off, m_diag, m_off, p_diag, p_off }
    }

    /// Smallest generalized eigenvalue of (S, M) by Sturm-sequence bisection:
    /// the number of negative pivots in the LDL^T factorization of
    /// S - lambda M counts eigenvalues below lambda.
    fn smallest_eigenvalue_sturm(&self) -> f64 {
        let count_below = |lam: f64| -> usize {
            let mut count = 0;
            let mut d_prev = 0.0f64;
            for i in 0..self.dim {
                let a = self.s_diag[i] - lam * self.m_diag[i];
                let b = if i > 0 { self.s_off[i - 1] - lam * self.m_off[i - 1] } else { 0.0 };
                let d = if i == 0 { a } else { a - b * b / d_prev };
                if d < 0.0 {
                    count += 1;
                }
                d_prev = if d == 0.0 { 1e-300 } else { d };
            }
            count
        };
        let mut lo = 0.0;
        let mut hi = 1.0;
        while count_below(hi) == 0 {
            hi *= 2.0;
            if hi > 1e6 {
                return hi;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if count_below(mid) == 0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Tensor-product assembly A = S_tau x M_x + P_tau x S_x, B = M_tau x M_x on
/// the Dirichlet-in-tau, periodic-in-x grid, with the smallest generalized
/// eigenvalue found by inverse power iteration (Jacobi-preconditioned CG).
struct CylinderAssembly {
    tau: Elements1D,
    nx: usize,
    mx_diag: f64,
    mx_off: f64,
    sx_diag: f64,
    sx_off: f64,
}

impl CylinderAssembly {
    fn new(m: f64, grid_tau: usize, grid_x: usize, half_length: f64) -> Self {
        let dx = m / grid_x as f64;
        CylinderAssembly {
            tau: Elements1D::new(grid_tau, half_length),
            nx: grid_x,
            mx_diag: 2.0 * dx / 3.0,
            mx_off: dx / 6.0,
            sx_diag: 2.0 / dx,
            sx_off: -1.0 / dx,
        }
    }

    fn dim(&self) -> usize {
        self.tau.dim * self.nx
    }

    /// y = (T x) applied along tau for a tridiagonal T given by diag/off.
    fn apply_tau(&self, diag: &[f64], off: &[f64], x: &[f64], y: &mut [f64]) {
        let nt = self.tau.dim;
        let nx = self.nx;
        for i in 0..nt {
            for j in 0..nx {
                let mut v = diag[i] * x[i * nx + j];
                if i > 0 {
                    v += off[i - 1] * x[(i - 1) * nx + j];
                }
                if i + 1 < nt {
                    v += off[i] * x[(i + 1) * nx + j];
                }
                y[i * nx + j] = v;
            }
        }
    }

    /// y = (X x) applied along the periodic x direction.
    fn apply_x(&self, diag: f64, off: f64, x: &[f64], y: &mut [f64]) {
        let nt = self.tau.dim;
        let nx = self.nx;
        for i in 0..nt {
            let row = &x[i * nx..(i + 1) * nx];
            let out = &mut y[i * nx..(i + 1) * nx];
            for j in 0..nx {
                let l = (j + nx - 1) % nx;
                let r = (j + 1) % nx;
                out[j] = diag * row[j] + off * (row[l] + row[r]);
            }
        }
    }

    fn apply_a(&self, x: &[f64], y: &mut [f64], tmp: &mut [f64], tmp2: &mut [f64]) {
        // S_tau x M_x
        self.apply_tau(&self.tau.s_diag, &self.tau.s_off, x, tmp);
        self.apply_x(self.mx_diag, self.mx_off, tmp, y);
        // + P_tau x S_x
        self.apply_tau(&self.tau.p_diag, &self.tau.p_off, x, tmp);
        self.apply_x(self.sx_diag, self.sx_off, tmp, tmp2);
        for (a, b) in y.iter_mut().zip(tmp2.iter()) {
            *a += *b;
        }
    }

    fn apply_b(&self, x: &[f64], y: &mut [f64], tmp: &mut [f64]) {
        self.apply_tau(&self.tau.m_diag, &self.tau.m_off, x, tmp);
        self.apply_x(self.mx_diag, self.mx_off, tmp, y);
    }

    /// Band entries of A in x-major ordering (index = i * nx + j): the tau
    /// couplings reach nx +- 1 away and the periodic wrap pairs
    /// (i, nx-1) <-> (i-1, 0) sit 2 nx - 1 apart, which sets the bandwidth.
    fn a_band(&self) -> BandedMatrix {
        let nt = self.tau.dim;
        let nx = self.nx;
        let n = nt * nx;
        let bw = (2 * nx - 1).min(n.saturating_sub(1)).max(1);
        let mut band = BandedMatrix::zeros(n, bw);
        let tau_entry = |i: usize, i2: usize| -> (f64, f64) {
            // (S_tau, P_tau) couplings between tau nodes i and i2
            if i == i2 {
                (self.tau.s_diag[i], self.tau.p_diag[i])
            } else {
                let lo = i.min(i2);
                (self.tau.s_off[lo], self.tau.p_off[lo])
            }
        };
        let x_entry = |j: usize, j2: usize| -> (f64, f64) {
            // (M_x, S_x) couplings between x nodes, periodic
            if j == j2 {
                (self.mx_diag, self.sx_diag)
            } else {
                (self.mx_off, self.sx_off)
            }
        };
        for i in 0..nt {
            for j in 0..nx {
                let row = i * nx + j;
                let mut add = |i2: usize, j2: usize| {
                    let col = i2 * nx + j2;
                    if col > row {
                        return;
                    }
                    let (s_t, p_t) = tau_entry(i, i2);
                    let (m_x, s_x) = x_entry(j, j2);
                    band.add(row, col, s_t * m_x + p_t * s_x);
                };
                let jl = (j + nx - 1) % nx;
                let jr = (j + 1) % nx;
                add(i, j);
                if jl != j {
                    add(i, jl);
                }
                if jr != j && jr != jl {
                    add(i, jr);
                }
                if i > 0 {
                    add(i - 1, j);
                    if jl != j {
                        add(i - 1, jl);
                    }
                    if jr != j && jr != jl {
                        add(i - 1, jr);
                    }
                }
            }
        }
        band
    }

    /// Smallest generalized eigenvalue by inverse power iteration with an
    /// exact banded Cholesky solve of A; robust against the exponential
    /// weight range of the cylinder.
    fn min_rayleigh(&self) -> f64 {
        let n = self.dim();
        let mut tmp = vec![0.0; n];
        let mut tmp2 = vec![0.0; n];
        let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };

        let chol = self.a_band().cholesky();
        let mut x = vec![0.0; n];
        // deterministic start with energy in every mode
        for (i, v) in x.iter_mut().enumerate() {
            *v = 1.0 + 0.3 * ((i.wrapping_mul(2654435761)) % 97) as f64 / 97.0;
        }
        let mut lambda = 0.0;
        let mut bx = vec![0.0; n];
        for _ in 0..400 {
            self.apply_b(&x, &mut bx, &mut tmp);
            let mut z = bx.clone();
            chol.solve_in_place(&mut z);
            self.apply_b(&z, &mut bx, &mut tmp);
            let nb = dot(&z, &bx).sqrt();
            for v in z.iter_mut() {
                *v /= nb;
            }
            let mut az = vec![0.0; n];
            self.apply_a(&z, &mut az, &mut tmp, &mut tmp2);
            let new_lambda = dot(&z, &az);
            let settled = (new_lambda - lambda).abs() <= 1e-14 * new_lambda.abs();
            lambda = new_lambda;
            x = z;
            if settled {
                break;
            }
        }
        lambda
    }
}

/// Symmetric positive-definite banded matrix in lower-band storage:
/// entry (i, j) with i - bw <= j <= i lives at band[i][j - i + bw].
struct BandedMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    fn zeros(n: usize, bw: usize) -> Self {
        BandedMatrix { n, bw, data: vec![0.0; n * (bw + 1)] }
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(j <= i && i - j <= self.bw);
        self.data[i * (self.bw + 1) + (j + self.bw - i)] += v;
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        if j > i || i - j > self.bw {
            0.0
        } else {
            self.data[i * (self.bw + 1) + (j + self.bw - i)]
        }
    }

    /// In-place banded Cholesky A = L L^T.
    fn cholesky(mut self) -> BandedMatrix {
        let n = self.n;
        let bw = self.bw;
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let mut sum = self.get(i, j);
                let k0 = j0.max(j.saturating_sub(bw));
                for k in k0..j {
                    sum -= self.get(i, k) * self.get(j, k);
                }
                let v = if i == j {
                    assert!(sum > 0.0, "banded Cholesky lost positivity at {i}");
                    sum.sqrt()
                } else {
                    sum / self.get(j, j)
                };
                self.data[i * (bw + 1) + (j + bw - i)] = v;
            }
        }
        self
    }

    /// Solves L L^T x = b in place (self must hold the Cholesky factor).
    fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        let bw = self.bw;
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            let mut sum = b[i];
            for j in j0..i {
                sum -= self.get(i, j) * b[j];
            }
            b[i] = sum / self.get(i, i);
        }
        for i in (0..n).rev() {
            let mut sum = b[i];
            let hi = (i + bw).min(n - 1);
            for j in i + 1..=hi {
                sum -= self.get(j, i) * b[j];
            }
            b[i] = sum / self.get(i, i);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cutoff_pair_derivative_bounds_by_dense_sampling() {
        let eps = 0.1;
        let pair = make_cutoff_pair(eps);
        let mut grad_max = 0.0f64;
        let mut lap_max = 0.0f64;
        let lo = pair.plus.start;
        let hi = pair.plus.start + pair.plus.width;
        for i in 0..=10_000 {
            let tau = lo + (hi - lo) * i as f64 / 10_000.0;
            let d1 = pair.plus.d1(tau);
            let d2 = pair.plus.d2(tau);
            grad_max = grad_max.max(d1.abs());
            lap_max = lap_max.max((d2 - d1).abs());
        }
        assert!(grad_max <= eps, "sup grad {grad_max}");
        assert!(lap_max <= eps, "sup lap {lap_max}");
        // sampled sups never exceed the closed-form bounds
        assert!(grad_max <= pair.sup_grad_plus + 1e-9);
        assert!(lap_max <= pair.sup_lap_plus + 1e-9);
        // and the closed-form bound on the gradient is attained mid-transition
        assert!(grad_max >= 0.95 * pair.sup_grad_plus);
    }

    #[test]
    fn cutoff_pair_staggering_exact() {
        let pair = make_cutoff_pair(0.25);
        let hi = pair.minus.start + pair.minus.width + 2.0;
        for i in 0..1000 {
            let tau = hi * i as f64 / 999.0;
            let p = pair.plus.value(tau);
            let m = pair.minus.value(tau);
            assert_eq!(p * m, m, "stagger violated at tau={tau}");
            assert!((0.0..=1.0).contains(&p));
            assert!((0.0..=1.0).contains(&m));
        }
    }

    #[test]
    fn cutoff_width_monotone_in_eps() {
        let w_small = make_cutoff_pair(0.1).plus.width;
        let w_big = make_cutoff_pair(1.0).plus.width;
        assert!(w_big < w_small);
    }

    #[test]
    fn resolvent_constant_values() {
        assert_relative_eq!(cusp_resolvent_constant(1.0).unwrap(), 17.0f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(
            cusp_resolvent_constant(0.75).unwrap(),
            4.0 * 17.0f64.sqrt(),
            epsilon = 1e-12
        );
        assert_relative_eq!(cusp_resolvent_constant(1.0).unwrap(), 4.1231, max_relative = 1e-4);
        assert!(cusp_resolvent_constant(0.5).is_err());
        assert!(cusp_resolvent_constant(0.3).is_err());
    }

    #[test]
    fn resolvent_constant_monotone_decreasing() {
        let mut prev = f64::INFINITY;
        for i in 0..10 {
            let s0 = 0.55 + 0.05 * i as f64;
            let c = cusp_resolvent_constant(s0).unwrap();
            assert!(c < prev, "C({s0}) = {c} not decreasing");
            prev = c;
        }
    }

    #[test]
    fn certificate_examples() {
        let b = cusp_error_certificate(0.75).unwrap();
        assert_relative_eq!(b.eps, 0.004042, max_relative = 1e-3);
        assert!(b.certificate <= 0.2);
        let b1 = cusp_error_certificate(1.0).unwrap();
        assert_relative_eq!(b1.eps, 0.016169, max_relative = 1e-3);
        assert!(b1.certificate <= 0.2);
    }

    #[test]
    fn certificate_arithmetic_identity_on_grid() {
        for i in 0..=9 {
            let s0 = 0.55 + 0.05 * i as f64;
            let b = cusp_error_certificate(s0).unwrap();
            let identity = 3.0 * b.eps * b.resolvent_constant;
            assert!((identity - 0.2).abs() < 1e-12, "s0={s0}: 3 eps C = {identity}");
            assert!(b.certificate <= 0.2, "s0={s0}: certificate {}", b.certificate);
        }
    }

    #[test]
    fn cylinder_floor_meets_quarter() {
        let v = cylinder_spectral_floor(1.0, 200, 32, 8.0).unwrap();
        assert!(v >= 0.249, "floor {v}");
        // Dirichlet on (-L, L): continuum value 1/4 + (pi / 2L)^2.
        let cont = 0.25 + (std::f64::consts::PI / 16.0).powi(2);
        assert!(v >= cont - 1e-6, "FEM value {v} below continuum {cont}");
        assert!(v <= cont + 0.01, "FEM value {v} too far above {cont}");
    }

    #[test]
    fn cylinder_floor_matches_mode0_oracle() {
        let v2d = cylinder_spectral_floor(1.0, 120, 16, 6.0).unwrap();
        let v1d = cylinder_floor_mode0(120, 6.0).unwrap();
        assert!((v2d - v1d).abs() < 1e-6, "2-D {v2d} vs 1-D oracle {v1d}");
    }

    #[test]
    fn cylinder_floor_nonincreasing_under_refinement() {
        let a = cylinder_spectral_floor(1.0, 60, 8, 6.0).unwrap();
        let b = cylinder_spectral_floor(1.0, 120, 16, 6.0).unwrap();
        let c = cylinder_spectral_floor(1.0, 240, 32, 6.0).unwrap();
        assert!(b <= a + 1e-10);
        assert!(c <= b + 1e-10);
        assert!(c >= 0.25, "refined floor {c} dipped below 1/4");
    }

    #[test]
    fn cylinder_rejects_degenerate_grid() {
        assert!(cylinder_spectral_floor(1.0, 2, 32, 8.0).is_err());
        assert!(cylinder_spectral_floor(1.0, 200, 1, 8.0).is_err());
        assert!(cylinder_spectral_floor(0.5, 200, 32, 8.0).is_err());
        assert!(cylinder_spectral_floor(1.0, 200, 32, -1.0).is_err());
    }
}
