//! Random permutation covers, the standard representation on zero-mean
//! vectors, finitely supported tensor-product operators, and norm
//! estimation against the free-group reference.

use crate::error::{Error, Result};
use crate::estimate::{NormEstimate, NormMethod, NormSemantics};
use crate::geometry::{reduce_word, GroupElement};
use crate::rng::{derive_seed, fill_uniform, rng_from_seed};
use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// One draw of a degree-n cover: d independent uniform permutations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverSample {
    pub n: usize,
    pub perms: Vec<Vec<usize>>,
    pub seed: u64,
}

/// d independent uniform permutations of [n] via seeded Fisher-Yates.
pub fn sample_cover(n: usize, d: usize, seed: u64) -> CoverSample {
    assert!(n >= 1 && d >= 1);
    let mut rng = rng_from_seed(seed);
    let mut perms = Vec::with_capacity(d);
    for _ in 0..d {
        let mut p: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            p.swap(i, j);
        }
        perms.push(p);
    }
    CoverSample { n, perms, seed }
}

pub fn invert_perm(p: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; p.len()];
    for (i, &pi) in p.iter().enumerate() {
        inv[pi] = i;
    }
    inv
}

/// (p compose q)(i) = p(q(i)).
pub fn compose_perms(p: &[usize], q: &[usize]) -> Vec<usize> {
    q.iter().map(|&qi| p[qi]).collect()
}

impl CoverSample {
    pub fn d(&self) -> usize {
        self.perms.len()
    }

    /// The permutation phi(gamma) for a reduced word, multiplying generator
    /// images left to right.
    pub fn permutation_of(&self, word: &[i8]) -> Vec<usize> {
        let inverses: Vec<Vec<usize>> = self.perms.iter().map(|p| invert_perm(p)).collect();
        let mut acc: Vec<usize> = (0..self.n).collect();
        for &l in &reduce_word(word) {
            let idx = (l.unsigned_abs() as usize) - 1;
            assert!(idx < self.d(), "letter {l} outside the generator range");
            let step = if l > 0 { &self.perms[idx] } else { &inverses[idx] };
            acc = compose_perms(&acc, step);
        }
        acc
    }
}

/// Connectivity of the cover: one orbit of the joint permutation action.
pub fn is_transitive(cover: &CoverSample) -> bool {
    let n = cover.n;
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let inverses: Vec<Vec<usize>> = cover.perms.iter().map(|p| invert_perm(p)).collect();
    let mut count = 1;
    while let Some(i) = stack.pop() {
        for p in cover.perms.iter().chain(inverses.iter()) {
            let j = p[i];
            if !seen[j] {
                seen[j] = true;
                count += 1;
                stack.push(j);
            }
        }
    }
    count == n
}

const MEAN_TOL: f64 = 1e-12;

/// Standard-representation action on a zero-mean vector: out[i] = v[sigma(i)],
/// re-projected to zero mean to control floating-point drift.
pub fn std_apply(sigma: &[usize], v: &[f64]) -> Result<Vec<f64>> {
    if sigma.len() != v.len() {
        return Err(Error::DimensionMismatch(format!(
            "permutation of [{}] applied to vector of length {}",
            sigma.len(),
            v.len()
        )));
    }
    let n = v.len() as f64;
    let scale = v.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let mean = v.iter().sum::<f64>() / n;
    if mean.abs() > MEAN_TOL * scale {
        return Err(Error::NonzeroMean { mean });
    }
    let mut out: Vec<f64> = sigma.iter().map(|&s| v[s]).collect();
    let out_mean = out.iter().sum::<f64>() / n;
    for x in out.iter_mut() {
        *x -= out_mean;
    }
    Ok(out)
}

/// Finitely supported map gamma -> a_gamma with square blocks of a common
/// dimension.
#[derive(Debug, Clone)]
pub struct CoefficientAssignment {
    pub support: Vec<GroupElement>,
    pub blocks: Vec<DMatrix<f64>>,
}

impl CoefficientAssignment {
    pub fn new(support: Vec<GroupElement>, blocks: Vec<DMatrix<f64>>) -> Result<Self> {
        if support.len() != blocks.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} support elements vs {} blocks",
                support.len(),
                blocks.len()
            )));
        }
        let dim = blocks.first().map(|b| b.nrows()).unwrap_or(1);
        for b in &blocks {
            if b.nrows() != dim || b.ncols() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "block {}x{} in a family of dimension {dim}",
                    b.nrows(),
                    b.ncols()
                )));
            }
        }
        let mut words: Vec<&[i8]> = support.iter().map(|g| g.word.as_slice()).collect();
        words.sort();
        words.dedup();
        if words.len() != support.len() {
            return Err(Error::InvalidParam("support elements must be distinct".into()));
        }
        Ok(CoefficientAssignment { support, blocks })
    }

    /// Scalar family (block dimension one).
    pub fn scalar(support: Vec<GroupElement>, values: Vec<f64>) -> Result<Self> {
        let blocks = values.into_iter().map(|v| DMatrix::from_element(1, 1, v)).collect();
        CoefficientAssignment::new(support, blocks)
    }

    pub fn block_dim(&self) -> usize {
        self.blocks.first().map(|b| b.nrows()).unwrap_or(1)
    }

    /// l^1 bound: sum of block operator norms; dominates every
    /// representation norm.
    pub fn l1_bound(&self) -> f64 {
        self.blocks.iter().map(|b| b.clone().svd(false, false).singular_values[0]).sum()
    }
}

/// The operator Sum_gamma a_gamma (x) rho_phi(gamma^{-1}) acting on M x n
/// arrays with zero row-means, applied without materializing the tensor
/// product: each term is a block times the array followed by a column
/// gather along phi(gamma).
pub struct CoverOperator {
    pub block_dim: usize,
    pub n: usize,
    blocks: Vec<DMatrix<f64>>,
    /// phi(gamma) per support element.
    perms: Vec<Vec<usize>>,
    /// phi(gamma)^{-1} per support element, for the adjoint.
    perms_inv: Vec<Vec<usize>>,
}

impl CoverOperator {
    pub fn new(coeffs: &CoefficientAssignment, cover: &CoverSample) -> Self {
        let perms: Vec<Vec<usize>> =
            coeffs.support.iter().map(|g| cover.permutation_of(&g.word)).collect();
        let perms_inv = perms.iter().map(|p| invert_perm(p)).collect();
        CoverOperator {
            block_dim: coeffs.block_dim(),
            n: cover.n,
            blocks: coeffs.blocks.clone(),
            perms,
            perms_inv,
        }
    }

    pub fn dim(&self) -> usize {
        self.block_dim * self.n
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "input length {} for an {}x{} operator",
                x.len(),
                self.block_dim,
                self.n
            )));
        }
        let n = self.n as f64;
        for row in 0..self.block_dim {
            let r = &x[row * self.n..(row + 1) * self.n];
            let scale = r.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let mean = r.iter().sum::<f64>() / n;
            if mean.abs() > MEAN_TOL * scale.max(1.0) {
                return Err(Error::NonzeroMean { mean });
            }
        }
        Ok(())
    }

    fn apply_inner(&self, x: &[f64], adjoint: bool) -> Vec<f64> {
        let m = self.block_dim;
        let n = self.n;
        let mut y = vec![0.0; m * n];
        let mut w = vec![0.0; m * n];
        for (k, block) in self.blocks.iter().enumerate() {
            // W = a X (or a^T X)
            for wi in w.iter_mut() {
                *wi = 0.0;
            }
            for i in 0..m {
                for j in 0..m {
                    let a = if adjoint { block[(j, i)] } else { block[(i, j)] };
                    if a == 0.0 {
                        continue;
                    }
                    let src = &x[j * n..(j + 1) * n];
                    let dst = &mut w[i * n..(i + 1) * n];
                    for p in 0..n {
                        dst[p] += a * src[p];
                    }
                }
            }
            // column gather along phi(gamma) (inverse for the adjoint)
            let sigma = if adjoint { &self.perms_inv[k] } else { &self.perms[k] };
            for i in 0..m {
                let src = &w[i * n..(i + 1) * n];
                let dst = &mut y[i * n..(i + 1) * n];
                for p in 0..n {
                    dst[p] += src[sigma[p]];
                }
            }
        }
        // re-project row means
        for i in 0..m {
            let row = &mut y[i * n..(i + 1) * n];
            let mean = row.iter().sum::<f64>() / n as f64;
            for v in row.iter_mut() {
                *v -= mean;
            }
        }
        y
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.apply_inner(x, false))
    }

    pub fn apply_adjoint(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.apply_inner(x, true))
    }
}

/// Structured matvec entry point matching the operator definition.
pub fn cover_operator_matvec(
    coeffs: &CoefficientAssignment,
    cover: &CoverSample,
    x: &[f64],
) -> Result<Vec<f64>> {
    CoverOperator::new(coeffs, cover).apply(x)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Projects each length-n row of a flat M x n vector to zero mean.
pub fn project_rows_zero_mean(x: &mut [f64], n: usize) {
    for row in x.chunks_mut(n) {
        let mean = row.iter().sum::<f64>() / n as f64;
        for v in row.iter_mut() {
            *v -= mean;
        }
    }
}

pub struct PowerIterationOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
    /// Optional warm start; row projection is the caller's concern.
    pub start: Option<Vec<f64>>,
    /// If set, start vectors and iterates are re-projected to zero row
    /// means with this row length.
    pub project_rows: Option<usize>,
    /// Skip the random-pair adjoint verification; only sound when the same
    /// operator pair was already verified in this process.
    pub skip_adjoint_check: bool,
}

impl Default for PowerIterationOptions {
    fn default() -> Self {
        PowerIterationOptions {
            tol: 1e-6,
            max_iters: 600,
            seed: 1,
            start: None,
            project_rows: None,
            skip_adjoint_check: false,
        }
    }
}

/// Operator-norm estimate by power iteration on A*A from a seeded random
/// start. The adjoint is verified against the forward map on 5 random
/// pairs before iterating. Non-convergence is reported through the
/// residual, not an error.
pub fn operator_norm<F, G>(
    matvec: F,
    adjoint: G,
    dim: usize,
    opts: &PowerIterationOptions,
) -> Result<NormEstimate>
where
    F: Fn(&[f64]) -> Vec<f64>,
    G: Fn(&[f64]) -> Vec<f64>,
{
    if dim == 0 {
        return Ok(NormEstimate {
            value: 0.0,
            method: NormMethod::PowerIteration,
            iterations: 0,
            residual: 0.0,
            semantics: NormSemantics::LowerBoundUpToResidual,
        });
    }
    let mut rng = rng_from_seed(opts.seed);
    let prep = |v: &mut Vec<f64>| {
        if let Some(n) = opts.project_rows {
            project_rows_zero_mean(v, n);
        }
    };

    // adjoint consistency on random pairs
    if !opts.skip_adjoint_check {
        for _ in 0..5 {
            let mut x = vec![0.0; dim];
            let mut y = vec![0.0; dim];
            fill_uniform(&mut rng, &mut x);
            fill_uniform(&mut rng, &mut y);
            prep(&mut x);
            prep(&mut y);
            let ax = matvec(&x);
            let aty = adjoint(&y);
            let lhs = dot(&ax, &y);
            let rhs = dot(&x, &aty);
            let scale = norm2(&ax) * norm2(&y) + norm2(&x) * norm2(&aty) + 1e-30;
            if (lhs - rhs).abs() > 1e-8 * scale {
                return Err(Error::AdjointMismatch { defect: (lhs - rhs).abs() / scale });
            }
        }
    }

    let mut v = match &opts.start {
        Some(s) if s.len() == dim => s.clone(),
        _ => {
            let mut v = vec![0.0; dim];
            fill_uniform(&mut rng, &mut v);
            v
        }
    };
    prep(&mut v);
    let nv = norm2(&v);
    if nv == 0.0 {
        return Ok(NormEstimate {
            value: 0.0,
            method: NormMethod::PowerIteration,
            iterations: 0,
            residual: 0.0,
            semantics: NormSemantics::LowerBoundUpToResidual,
        });
    }
    for x in v.iter_mut() {
        *x /= nv;
    }

    let mut theta = 0.0f64;
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iters {
        iterations = it;
        let w = matvec(&v);
        let mut u = adjoint(&w);
        prep(&mut u);
        let new_theta = dot(&u, &v);
        let mut res_vec = u.clone();
        for (r, x) in res_vec.iter_mut().zip(&v) {
            *r -= new_theta * x;
        }
        residual = if new_theta.abs() > 0.0 { norm2(&res_vec) / new_theta.abs() } else { 0.0 };
        let nu = norm2(&u);
        if nu == 0.0 {
            theta = 0.0;
            residual = 0.0;
            break;
        }
        for (x, ui) in v.iter_mut().zip(&u) {
            *x = ui / nu;
        }
        let settled = it > 2 && (new_theta - theta).abs() <= opts.tol * new_theta.abs();
        theta = new_theta;
        if settled && residual <= opts.tol.sqrt() {
            break;
        }
    }

    Ok(NormEstimate {
        value: theta.max(0.0).sqrt(),
        method: NormMethod::PowerIteration,
        iterations,
        residual,
        semantics: NormSemantics::LowerBoundUpToResidual,
    })
}

/// Norm of the cover operator for a coefficient family, with sensible
/// power-iteration defaults.
pub fn cover_operator_norm(
    coeffs: &CoefficientAssignment,
    cover: &CoverSample,
    seed: u64,
) -> Result<NormEstimate> {
    let op = CoverOperator::new(coeffs, cover);
    if cover.n <= 1 {
        return Ok(NormEstimate {
            value: 0.0,
            method: NormMethod::PowerIteration,
            iterations: 0,
            residual: 0.0,
            semantics: NormSemantics::LowerBoundUpToResidual,
        });
    }
    let opts = PowerIterationOptions {
        seed,
        tol: 1e-7,
        max_iters: 4000,
        project_rows: Some(cover.n),
        ..Default::default()
    };
    operator_norm(
        |x| op.apply_inner(x, false),
        |x| op.apply_inner(x, true),
        op.dim(),
        &opts,
    )
}

// ---------------------------------------------------------------------------
// Free-group ball realization
// ---------------------------------------------------------------------------

/// Letters of the rank-2 free group coded 0..4; code ^ 1 is the inverse.
fn word_to_codes(word: &[i8]) -> Vec<u8> {
    word.iter()
        .map(|&l| match l {
            1 => 0u8,
            -1 => 1,
            2 => 2,
            -2 => 3,
            _ => panic!("letter {l} outside the rank-2 alphabet"),
        })
        .collect()
}

/// Implicit indexing of the radius-R ball of the rank-2 free group: words
/// are numbered level by level, children in letter-code order, so neighbor
/// indices are pure arithmetic and no word table is stored.
pub struct BallIndex {
    pub radius: usize,
    /// offsets[l] = index of the first word of length l; one past the end at
    /// offsets[radius + 1].
    offsets: Vec<usize>,
    last_letter: Vec<u8>,
    parent: Vec<u32>,
    level: Vec<u8>,
}

impl BallIndex {
    pub fn new(radius: usize) -> Self {
        let mut offsets = Vec::with_capacity(radius + 2);
        offsets.push(0);
        offsets.push(1);
        let mut count_at = 4usize;
        for _ in 1..=radius {
            let last = *offsets.last().unwrap();
            offsets.push(last + count_at);
            count_at *= 3;
        }
        let size = *offsets.last().unwrap();
        let mut last_letter = vec![u8::MAX; size];
        let mut parent = vec![u32::MAX; size];
        let mut level = vec![0u8; size];
        for l in 1..=radius {
            let start = offsets[l];
            let end = offsets[l + 1];
            for i in start..end {
                level[i] = l as u8;
            }
            if l == 1 {
                for c in 0..4u8 {
                    last_letter[1 + c as usize] = c;
                    parent[1 + c as usize] = 0;
                }
            } else {
                let pstart = offsets[l - 1];
                let pend = offsets[l];
                let mut idx = start;
                for p in pstart..pend {
                    let banned = last_letter[p] ^ 1;
                    for c in 0..4u8 {
                        if c == banned {
                            continue;
                        }
                        last_letter[idx] = c;
                        parent[idx] = p as u32;
                        idx += 1;
                    }
                }
                debug_assert_eq!(idx, end);
            }
        }
        BallIndex { radius, offsets, last_letter, parent, level }
    }

    pub fn size(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Child of `i` under appending letter code `c`; None outside the ball.
    fn child(&self, i: usize, c: u8) -> Option<usize> {
        let l = self.level[i] as usize;
        if l + 1 > self.radius {
            return None;
        }
        if l == 0 {
            return Some(1 + c as usize);
        }
        let banned = self.last_letter[i] ^ 1;
        debug_assert_ne!(c, banned);
        let rank = if c > banned { c - 1 } else { c } as usize;
        let q = i - self.offsets[l];
        Some(self.offsets[l + 1] + 3 * q + rank)
    }

    /// Index of (word at i) * gamma, reading gamma's letters left to right;
    /// None once the product leaves the ball. Reduced multiplication first
    /// cancels a suffix, then appends, so the walk never overshoots.
    pub fn walk(&self, mut i: usize, codes: &[u8]) -> Option<usize> {
        for &c in codes {
            if self.level[i] > 0 && self.last_letter[i] == c ^ 1 {
                i = self.parent[i] as usize;
            } else {
                i = self.child(i, c)?;
            }
        }
        Some(i)
    }
}

const BALL_DIM_BUDGET: usize = 60_000_000;

/// Realizes Sum a_gamma (x) rho_inf(gamma^{-1}) compressed to the span of
/// reduced words of length <= radius and estimates its norm by power
/// iteration. Products that leave the ball are dropped, so the value is a
/// lower bound of the regular-representation norm and is nondecreasing in
/// the radius.
pub fn free_ball_norm(coeffs: &CoefficientAssignment, radius: usize) -> Result<NormEstimate> {
    free_ball_norm_seeded(coeffs, radius, 7)
}

pub fn free_ball_norm_seeded(
    coeffs: &CoefficientAssignment,
    radius: usize,
    seed: u64,
) -> Result<NormEstimate> {
    let ball = BallIndex::new(radius);
    let m = coeffs.block_dim();
    let dim = m * ball.size();
    if dim > BALL_DIM_BUDGET {
        return Err(Error::BallTooLarge { radius, size: ball.size(), max: BALL_DIM_BUDGET });
    }

    // forward pulls along gamma^{-1}, adjoint along gamma
    let seq_fwd: Vec<Vec<u8>> =
        coeffs.support.iter().map(|g| word_to_codes(&g.inverse().word)).collect();
    let seq_adj: Vec<Vec<u8>> = coeffs.support.iter().map(|g| word_to_codes(&g.word)).collect();
    let blocks = &coeffs.blocks;
    let scalar: Option<Vec<f64>> = if m == 1 {
        Some(blocks.iter().map(|b| b[(0, 0)]).collect())
    } else {
        None
    };

    let apply = |x: &[f64], adjoint: bool| -> Vec<f64> {
        let seqs = if adjoint { &seq_adj } else { &seq_fwd };
        let size = ball.size();
        let mut y = vec![0.0; m * size];
        let chunk = 1 << 14;
        y.par_chunks_mut(m * chunk)
            .enumerate()
            .for_each(|(ci, out)| {
                let base = ci * chunk;
                for (u_local, out_cols) in out.chunks_mut(m).enumerate() {
                    let u = base + u_local;
                    for (k, seq) in seqs.iter().enumerate() {
                        if let Some(w) = ball.walk(u, seq) {
                            if let Some(sc) = &scalar {
                                out_cols[0] += sc[k] * x[w];
                            } else {
                                let b = &blocks[k];
                                let src = &x[w * m..(w + 1) * m];
                                for i in 0..m {
                                    let mut acc = 0.0;
                                    for (j, &sv) in src.iter().enumerate() {
                                        acc += if adjoint { b[(j, i)] } else { b[(i, j)] } * sv;
                                    }
                                    out_cols[i] += acc;
                                }
                            }
                        }
                    }
                }
            });
        y
    };

    let opts = PowerIterationOptions { seed, tol: 1e-8, max_iters: 1200, ..Default::default() };
    let mut est = operator_norm(|x| apply(x, false), |x| apply(x, true), dim, &opts)?;
    est.method = NormMethod::BallTruncation;
    Ok(est)
}

/// Richardson extrapolation of the ball norm in 1/(R+2)^2 from two radii.
pub fn free_norm_extrapolated(
    coeffs: &CoefficientAssignment,
    r1: usize,
    r2: usize,
) -> Result<f64> {
    let l1 = free_ball_norm(coeffs, r1)?.value;
    let l2 = free_ball_norm(coeffs, r2)?.value;
    let a1 = 1.0 / ((r1 + 2) as f64).powi(2);
    let a2 = 1.0 / ((r2 + 2) as f64).powi(2);
    Ok((l1 * a2 - l2 * a1) / (a2 - a1))
}

// ---------------------------------------------------------------------------
// Strong-convergence experiment
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BcRow {
    pub n: usize,
    pub trial: usize,
    pub norm: f64,
    pub free_ref: f64,
    pub within_eps: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BcSummary {
    pub n: usize,
    pub fraction_within: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BcTable {
    pub free_ref: f64,
    pub eps: f64,
    pub rows: Vec<BcRow>,
    pub summaries: Vec<BcSummary>,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Samples covers at each degree and reports how often the cover-operator
/// norm stays within eps of the truncated free reference.
pub fn bc_experiment(
    coeffs: &CoefficientAssignment,
    ns: &[usize],
    trials: usize,
    eps: f64,
    base_seed: u64,
    ball_radius: usize,
) -> Result<BcTable> {
    assert!(trials >= 1);
    let free_ref = free_ball_norm(coeffs, ball_radius)?.value;
    let d = coeffs
        .support
        .iter()
        .flat_map(|g| g.word.iter().map(|l| l.unsigned_abs() as usize))
        .max()
        .unwrap_or(1)
        .max(1);
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for &n in ns {
        let norms: Vec<f64> = (0..trials)
            .into_par_iter()
            .map(|trial| {
                let seed = derive_seed(base_seed, n as u64, trial as u64);
                let cover = sample_cover(n, d, seed);
                cover_operator_norm(coeffs, &cover, derive_seed(base_seed, 0x9999, trial as u64))
                    .map(|e| e.value)
            })
            .collect::<Result<Vec<f64>>>()?;
        for (trial, &norm) in norms.iter().enumerate() {
            rows.push(BcRow { n, trial, norm, free_ref, within_eps: norm <= free_ref + eps });
        }
        let mut sorted = norms.clone();
        sorted.sort_by(f64::total_cmp);
        let within = norms.iter().filter(|&&v| v <= free_ref + eps).count();
        summaries.push(BcSummary {
            n,
            fraction_within: within as f64 / trials as f64,
            q25: quantile(&sorted, 0.25),
            median: quantile(&sorted, 0.5),
            q75: quantile(&sorted, 0.75),
        });
    }
    Ok(BcTable { free_ref, eps, rows, summaries })
}

/// Scalar coefficients 1 on all four generators and inverses: the adjacency
/// family whose free norm is 2 sqrt(3).
pub fn adjacency_coefficients(spec: &crate::geometry::DomainSpec) -> CoefficientAssignment {
    let support = vec![
        spec.element(&[1]),
        spec.element(&[-1]),
        spec.element(&[2]),
        spec.element(&[-2]),
    ];
    CoefficientAssignment::scalar(support, vec![1.0; 4]).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DomainSpec;
    use approx::assert_relative_eq;

    fn spec() -> DomainSpec {
        DomainSpec::gamma2(2.0)
    }

    #[test]
    fn sample_cover_degenerate_and_deterministic() {
        let c = sample_cover(1, 3, 9);
        for p in &c.perms {
            assert_eq!(p, &vec![0]);
        }
        let a = sample_cover(40, 2, 123);
        let b = sample_cover(40, 2, 123);
        assert_eq!(a.perms, b.perms);
        let c2 = sample_cover(40, 2, 124);
        assert_ne!(a.perms, c2.perms);
    }

    #[test]
    fn sample_cover_uniform_on_s5() {
        // 10^4 draws of sigma_1 in S_5: every permutation within 5 binomial
        // standard deviations of the uniform count.
        let mut counts = std::collections::HashMap::new();
        let trials = 10_000;
        for t in 0..trials {
            let c = sample_cover(5, 2, derive_seed(2024, 0, t));
            *counts.entry(c.perms[0].clone()).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 120);
        let p = 1.0 / 120.0;
        let expected = trials as f64 * p;
        let sigma = (trials as f64 * p * (1.0 - p)).sqrt();
        for (perm, &count) in &counts {
            assert!(
                (count as f64 - expected).abs() <= 5.0 * sigma,
                "{perm:?}: count {count} vs {expected:.1} +- 5*{sigma:.1}"
            );
        }
    }

    #[test]
    fn transitivity_examples() {
        assert!(is_transitive(&sample_cover(1, 2, 5)));

        // exhaustive S_2 x S_2: identity pair is the only intransitive one
        let mut transitive = 0;
        for a in 0..2usize {
            for b in 0..2usize {
                let perms = vec![
                    if a == 0 { vec![0, 1] } else { vec![1, 0] },
                    if b == 0 { vec![0, 1] } else { vec![1, 0] },
                ];
                let cover = CoverSample { n: 2, perms, seed: 0 };
                if is_transitive(&cover) {
                    transitive += 1;
                }
            }
        }
        assert_eq!(transitive, 3, "exactly 3/4 of S_2 pairs are transitive");
    }

    #[test]
    fn transitive_fraction_at_n100() {
        let trials = 500;
        let mut ok = 0;
        for t in 0..trials {
            let cover = sample_cover(100, 2, derive_seed(77, 1, t));
            if is_transitive(&cover) {
                ok += 1;
            }
        }
        let fraction = ok as f64 / trials as f64;
        assert!(fraction >= 0.97, "transitive fraction {fraction}");
    }

    #[test]
    fn std_apply_examples() {
        let v = vec![1.0, -0.5, -0.5];
        let id = vec![0usize, 1, 2];
        assert_eq!(std_apply(&id, &v).unwrap(), v);

        // constant vectors are rejected as nonzero-mean
        assert!(matches!(
            std_apply(&id, &[1.0, 1.0, 1.0]),
            Err(Error::NonzeroMean { .. })
        ));

        // zero vector stays zero
        assert_eq!(std_apply(&id, &[0.0, 0.0, 0.0]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn std_apply_is_isometry_on_zero_mean() {
        let mut rng = rng_from_seed(4);
        for _ in 0..50 {
            let n = 17;
            let mut v = vec![0.0; n];
            fill_uniform(&mut rng, &mut v);
            let mean = v.iter().sum::<f64>() / n as f64;
            for x in v.iter_mut() {
                *x -= mean;
            }
            let cover = sample_cover(n, 1, rng.random());
            let w = std_apply(&cover.perms[0], &v).unwrap();
            assert!((norm2(&w) - norm2(&v)).abs() < 1e-12);
            assert!(w.iter().sum::<f64>().abs() < 1e-12);
        }
    }

    fn cycle(n: usize) -> Vec<usize> {
        (0..n).map(|i| (i + 1) % n).collect()
    }

    /// Circulant oracle for sigma + sigma^{-1} on the zero-mean subspace:
    /// eigenvalues 2 cos(2 pi k / n), k = 1..n-1.
    fn circulant_top_eigenvalue(n: usize) -> f64 {
        2.0 * (2.0 * std::f64::consts::PI / n as f64).cos()
    }

    fn circulant_norm(n: usize) -> f64 {
        (1..n)
            .map(|k| 2.0 * (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    #[test]
    fn cycle_std_apply_top_eigenvalue_matches_circulant() {
        // Largest (signed) eigenvalue of sigma + sigma^{-1} restricted to
        // zero-mean vectors is 2 cos(2 pi / n); found by iterating the
        // positively shifted operator A + 2I.
        for n in [8usize, 12, 30] {
            let sigma = cycle(n);
            let sigma_inv = invert_perm(&sigma);
            let mut v = vec![0.0; n];
            let mut rng = rng_from_seed(3);
            fill_uniform(&mut rng, &mut v);
            project_rows_zero_mean(&mut v, n);
            let mut top = 0.0;
            for _ in 0..20_000 {
                let a = std_apply(&sigma, &v).unwrap();
                let b = std_apply(&sigma_inv, &v).unwrap();
                let w: Vec<f64> = (0..n).map(|i| a[i] + b[i] + 2.0 * v[i]).collect();
                let nw = norm2(&w);
                top = dot(&w, &v) / dot(&v, &v);
                for (vi, wi) in v.iter_mut().zip(&w) {
                    *vi = wi / nw;
                }
            }
            let expected = circulant_top_eigenvalue(n);
            assert!(
                (top - 2.0 - expected).abs() < 1e-6,
                "n={n}: top {} vs {expected}",
                top - 2.0
            );
        }
    }

    #[test]
    fn cycle_operator_norm_matches_circulant() {
        // Operator norm is the max modulus over the circulant spectrum: for
        // even n the alternating vector gives exactly 2, for odd n the
        // nearest-to-pi mode gives 2 cos(pi / n).
        for n in [8usize, 9, 12, 15, 31] {
            let sigma = cycle(n);
            let sigma_inv = invert_perm(&sigma);
            let matvec = |x: &[f64]| {
                let a = std_apply(&sigma, x).unwrap();
                let b = std_apply(&sigma_inv, x).unwrap();
                a.iter().zip(&b).map(|(p, q)| p + q).collect::<Vec<f64>>()
            };
            let opts = PowerIterationOptions {
                tol: 1e-10,
                max_iters: 20_000,
                seed: 3,
                project_rows: Some(n),
                ..Default::default()
            };
            let est = operator_norm(&matvec, &matvec, n, &opts).unwrap();
            let expected = circulant_norm(n);
            assert!(
                (est.value - expected).abs() < 1e-6,
                "n={n}: {} vs {expected}",
                est.value
            );
        }
    }

    #[test]
    fn operator_norm_identity_and_diagonal() {
        let opts = PowerIterationOptions { tol: 1e-12, max_iters: 500, seed: 5, ..Default::default() };
        let id = |x: &[f64]| x.to_vec();
        let est = operator_norm(id, id, 10, &opts).unwrap();
        assert!((est.value - 1.0).abs() < 1e-10);

        let diag = |x: &[f64]| {
            let mut y = x.to_vec();
            for (i, v) in y.iter_mut().enumerate() {
                *v *= (i + 1) as f64;
            }
            y
        };
        let est = operator_norm(&diag, &diag, 3, &opts).unwrap();
        assert!((est.value - 3.0).abs() < 1e-10, "diag norm {}", est.value);
    }

    #[test]
    fn operator_norm_twelve_cycle() {
        // For the 12-cycle the circulant spectrum on zero-mean vectors is
        // {2 cos(pi k / 6)}: the largest eigenvalue is 2 cos(pi/6) = sqrt(3)
        // but the alternating mode contributes -2, so the norm is 2.
        let n = 12;
        let sigma = cycle(n);
        let sigma_inv = invert_perm(&sigma);
        let matvec = |x: &[f64]| {
            let a = std_apply(&sigma, x).unwrap();
            let b = std_apply(&sigma_inv, x).unwrap();
            a.iter().zip(&b).map(|(p, q)| p + q).collect::<Vec<f64>>()
        };
        let opts = PowerIterationOptions {
            tol: 1e-12,
            max_iters: 30_000,
            seed: 11,
            project_rows: Some(n),
            ..Default::default()
        };
        let est = operator_norm(&matvec, &matvec, n, &opts).unwrap();
        assert_relative_eq!(est.value, circulant_norm(n), epsilon = 1e-7);
        assert_relative_eq!(circulant_top_eigenvalue(n), 3.0f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn operator_norm_agrees_with_svd_on_dense() {
        let mut rng = rng_from_seed(21);
        for &n in &[10usize, 30, 50] {
            let mut data = vec![0.0; n * n];
            fill_uniform(&mut rng, &mut data);
            let a = DMatrix::from_row_slice(n, n, &data);
            let at = a.transpose();
            let sv = a.clone().svd(false, false).singular_values[0];
            let matvec = |x: &[f64]| {
                let v = nalgebra::DVector::from_column_slice(x);
                (&a * v).as_slice().to_vec()
            };
            let adjoint = |x: &[f64]| {
                let v = nalgebra::DVector::from_column_slice(x);
                (&at * v).as_slice().to_vec()
            };
            let opts = PowerIterationOptions {
                tol: 1e-12,
                max_iters: 5_000,
                seed: 31,
                ..Default::default()
            };
            let est = operator_norm(matvec, adjoint, n, &opts).unwrap();
            assert!(
                (est.value - sv).abs() < 1e-6 * sv,
                "n={n}: power {} vs svd {sv}",
                est.value
            );
        }
    }

    #[test]
    fn operator_norm_rejects_bad_adjoint() {
        let a = |x: &[f64]| x.iter().map(|v| 2.0 * v).collect::<Vec<f64>>();
        let wrong = |x: &[f64]| x.iter().map(|v| 3.0 * v).collect::<Vec<f64>>();
        let opts = PowerIterationOptions::default();
        assert!(matches!(
            operator_norm(a, wrong, 6, &opts),
            Err(Error::AdjointMismatch { .. })
        ));
    }

    #[test]
    fn cover_matvec_identity_support() {
        let spec = spec();
        let coeffs = CoefficientAssignment::new(
            vec![spec.element(&[])],
            vec![DMatrix::identity(3, 3)],
        )
        .unwrap();
        let cover = sample_cover(6, 2, 42);
        let mut x = vec![0.0; 18];
        let mut rng = rng_from_seed(8);
        fill_uniform(&mut rng, &mut x);
        project_rows_zero_mean(&mut x, 6);
        let y = cover_operator_matvec(&coeffs, &cover, &x).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cover_matvec_zero_coefficients() {
        let spec = spec();
        let coeffs = CoefficientAssignment::new(
            vec![spec.element(&[1])],
            vec![DMatrix::zeros(2, 2)],
        )
        .unwrap();
        let cover = sample_cover(5, 2, 42);
        let mut x = vec![0.0; 10];
        let mut rng = rng_from_seed(8);
        fill_uniform(&mut rng, &mut x);
        project_rows_zero_mean(&mut x, 5);
        let y = cover_operator_matvec(&coeffs, &cover, &x).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cover_matvec_rejects_mismatch() {
        let spec = spec();
        let coeffs = adjacency_coefficients(&spec);
        let cover = sample_cover(5, 2, 42);
        assert!(matches!(
            cover_operator_matvec(&coeffs, &cover, &[0.0; 7]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn cover_cycle_norm_matches_circulant() {
        // one generator, coefficients 1 on gamma_1 and its inverse, cover
        // with sigma_1 an n-cycle; odd n so the circulant norm is
        // 2 cos(pi / n) and distinct from the top eigenvalue 2 cos(2 pi / n)
        let spec = spec();
        for n in [15usize, 16] {
            let coeffs = CoefficientAssignment::scalar(
                vec![spec.element(&[1]), spec.element(&[-1])],
                vec![1.0, 1.0],
            )
            .unwrap();
            let cover = CoverSample { n, perms: vec![cycle(n), cycle(n)], seed: 0 };
            let est = cover_operator_norm(&coeffs, &cover, 3).unwrap();
            let expected = circulant_norm(n);
            assert!(
                (est.value - expected).abs() < 1e-5,
                "n={n}: {} vs {expected}",
                est.value
            );
        }
    }

    /// Dense materialization of the cover operator including the row-mean
    /// projection, for small sizes.
    fn materialize(coeffs: &CoefficientAssignment, cover: &CoverSample) -> DMatrix<f64> {
        let m = coeffs.block_dim();
        let n = cover.n;
        let mut total = DMatrix::zeros(m * n, m * n);
        for (g, block) in coeffs.support.iter().zip(&coeffs.blocks) {
            let sigma = cover.permutation_of(&g.word);
            // column gather: E[q][p] = 1 iff q = sigma(p); X -> X E
            let mut e = DMatrix::zeros(n, n);
            for p in 0..n {
                e[(sigma[p], p)] = 1.0;
            }
            // row-major vec convention: vec(a X E) = (a kron E^T) vec(X)
            total += block.kronecker(&e.transpose());
        }
        let proj = DMatrix::from_fn(n, n, |i, j| {
            if i == j { 1.0 - 1.0 / n as f64 } else { -1.0 / n as f64 }
        });
        DMatrix::identity(m, m).kronecker(&proj) * total
    }

    #[test]
    fn cover_matvec_agrees_with_dense_materialization() {
        let spec = spec();
        let mut rng = rng_from_seed(91);
        let ball = spec.enumerate_ball(2);
        for (m, n, sup) in [(1usize, 8usize, 5usize), (3, 6, 4), (4, 8, 5), (2, 5, 3)] {
            let support: Vec<GroupElement> = ball.iter().take(sup).cloned().collect();
            let blocks: Vec<DMatrix<f64>> = (0..sup)
                .map(|_| {
                    let mut data = vec![0.0; m * m];
                    fill_uniform(&mut rng, &mut data);
                    DMatrix::from_row_slice(m, m, &data)
                })
                .collect();
            let coeffs = CoefficientAssignment::new(support, blocks).unwrap();
            let cover = sample_cover(n, 2, 1000 + (m * n) as u64);
            let dense = materialize(&coeffs, &cover);
            for _ in 0..4 {
                let mut x = vec![0.0; m * n];
                fill_uniform(&mut rng, &mut x);
                project_rows_zero_mean(&mut x, n);
                let fast = cover_operator_matvec(&coeffs, &cover, &x).unwrap();
                let slow = &dense * nalgebra::DVector::from_column_slice(&x);
                for (a, b) in fast.iter().zip(slow.iter()) {
                    assert!((a - b).abs() < 1e-10, "m={m} n={n}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn ball_index_counts_and_walks() {
        let ball = BallIndex::new(5);
        assert_eq!(ball.size(), crate::geometry::ball_count(2, 5));
        // walking g then g^{-1} returns to the start
        let spec = spec();
        for g in spec.enumerate_ball(2) {
            if g.is_identity() {
                continue;
            }
            let fwd = word_to_codes(&g.word);
            let bwd = word_to_codes(&g.inverse().word);
            let mid = ball.walk(0, &fwd).unwrap();
            assert_eq!(ball.walk(mid, &bwd), Some(0));
        }
        // stepping off the ball is None
        let deep = word_to_codes(&[1, 2, 1, 2, 1, 2]);
        assert_eq!(ball.walk(0, &deep), None);
    }

    #[test]
    fn free_ball_identity_coefficient() {
        let spec = spec();
        let coeffs =
            CoefficientAssignment::scalar(vec![spec.element(&[])], vec![1.0]).unwrap();
        for r in [2usize, 5] {
            let est = free_ball_norm(&coeffs, r).unwrap();
            assert!((est.value - 1.0).abs() < 1e-9);
        }
    }

    /// Radial-eigenvector oracle for the ball-truncated tree adjacency: with
    /// f(level) = 3^{-l/2} g(l) the eigenvalue equation becomes
    /// lambda g = sqrt(3)(g(l-1) + g(l+1)) with g(R+1) = 0 and the root
    /// condition g(1) = (3/2) cos(theta) g(0) (the root has four children),
    /// so lambda = 2 sqrt(3) cos(theta) with
    /// sin(R theta) = (3/2) cos(theta) sin((R+1) theta).
    fn ball_adjacency_oracle(r: usize) -> f64 {
        let f = |th: f64| {
            (r as f64 * th).sin() - 1.5 * th.cos() * ((r as f64 + 1.0) * th).sin()
        };
        let mut lo = 1e-9;
        let mut hi = std::f64::consts::PI / (r as f64 + 1.0);
        // smallest positive root; f < 0 at 0+, crosses once before pi/(R+1)
        let steps = 4000;
        let mut bracket = None;
        let mut prev = f(lo);
        for i in 1..=steps {
            let th = lo + (hi - lo) * i as f64 / steps as f64;
            let v = f(th);
            if prev * v <= 0.0 {
                bracket = Some((lo + (hi - lo) * (i - 1) as f64 / steps as f64, th));
                break;
            }
            prev = v;
        }
        let (mut a, mut b) = bracket.expect("no root bracket");
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if f(a) * f(m) <= 0.0 {
                b = m;
            } else {
                a = m;
            }
        }
        lo = 0.5 * (a + b);
        hi = lo;
        2.0 * 3.0f64.sqrt() * (0.5 * (lo + hi)).cos()
    }

    #[test]
    fn free_ball_norm_monotone_and_matches_radial_oracle() {
        let spec = spec();
        let coeffs = adjacency_coefficients(&spec);
        let v6 = free_ball_norm(&coeffs, 6).unwrap().value;
        let v9 = free_ball_norm(&coeffs, 9).unwrap().value;
        let v12 = free_ball_norm(&coeffs, 12).unwrap().value;
        assert!(v6 <= v9 + 1e-9 && v9 <= v12 + 1e-9, "{v6} {v9} {v12}");
        assert!(v12 <= coeffs.l1_bound() + 1e-9);
        assert!((v6 - ball_adjacency_oracle(6)).abs() < 1e-4, "{v6}");
        assert!((v12 - ball_adjacency_oracle(12)).abs() < 1e-4, "{v12}");
        assert!(v12 < 2.0 * 3.0f64.sqrt());
    }

    #[test]
    fn free_ball_rejects_oversized() {
        let spec = spec();
        let coeffs = adjacency_coefficients(&spec);
        assert!(matches!(
            free_ball_norm(&coeffs, 18),
            Err(Error::BallTooLarge { .. })
        ));
    }

    #[test]
    fn bc_experiment_identity_family() {
        let spec = spec();
        let coeffs =
            CoefficientAssignment::scalar(vec![spec.element(&[])], vec![0.7]).unwrap();
        let table = bc_experiment(&coeffs, &[4, 9], 3, 0.05, 99, 6).unwrap();
        for s in &table.summaries {
            assert_eq!(s.fraction_within, 1.0);
        }
        for r in &table.rows {
            assert!((r.norm - 0.7).abs() < 1e-6);
        }
    }
}
