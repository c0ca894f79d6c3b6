//! Fundamental-domain mesh with hyperbolic-area weights and Nystrom
//! discretization of the interior error coefficients.
//!
//! The coefficient block for gamma samples the remainder kernel at
//! d(gamma x_i, x_j), weighted by the cusp localization (1 - chi-) and the
//! cell areas. Because the kernel lives on the annulus [T, T+1], the blocks
//! are sparse; the geometric pattern (index pairs, radii, weight factors)
//! is independent of s and shared across spectral parameters, so assembling
//! a new s only re-evaluates a 1-D kernel table.

use crate::covers::{operator_norm, CoverSample, PowerIterationOptions};
use crate::cusp::CuspCutoffPair;
use crate::error::{Error, Result};
use crate::estimate::NormEstimate;
use crate::geometry::{cosh_dist, DomainSpec, GroupElement, PlanePoint};
use crate::kernels::{
    radial_operator_norm, remainder_kernel_operator, RadialKernel, SpectralParam,
    KERNEL_TABLE_N, XI_GRID_DEFAULT, XI_MAX_DEFAULT,
};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::sync::Arc;

/// Quadrature mesh over the compact part of the fundamental domain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mesh {
    pub points: Vec<PlanePoint>,
    /// Hyperbolic cell areas h^2 / y^2.
    pub weights: Vec<f64>,
    pub height_cut: f64,
    pub spacing: f64,
}

impl Mesh {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Stable fingerprint of the geometry, for cache keys.
    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut mix = |v: u64| {
            h ^= v;
            h = h.wrapping_mul(0x100_0000_01b3);
        };
        mix(self.points.len() as u64);
        mix(self.spacing.to_bits());
        mix(self.height_cut.to_bits());
        for p in &self.points {
            mix(p.x.to_bits());
            mix(p.y.to_bits());
        }
        h
    }
}

/// Rectangular lattice intersected with the fundamental domain below the
/// horocycle height cutoff in each cusp; cell centers, weights h^2/y^2.
pub fn build_mesh(spec: &DomainSpec, height_cut: f64, spacing: f64) -> Result<Mesh> {
    if height_cut <= 1.0 || spacing <= 0.0 {
        return Err(Error::InvalidParam(format!(
            "mesh needs height cutoff > 1 and positive spacing (Y={height_cut}, h={spacing})"
        )));
    }
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let nx = (2.0 / spacing).ceil() as usize;
    let ny = (height_cut / spacing).ceil() as usize;
    for ix in 0..nx {
        let x = -1.0 + (ix as f64 + 0.5) * spacing;
        if x >= 1.0 {
            break;
        }
        for iy in 0..ny {
            let y = (iy as f64 + 0.5) * spacing;
            if y > height_cut {
                break;
            }
            let z = PlanePoint::new(x, y);
            if spec.in_compact_part(z, height_cut) {
                points.push(z);
                weights.push(spacing * spacing / (y * y));
            }
        }
    }
    if points.is_empty() {
        return Err(Error::EmptyMesh { height_cut, spacing });
    }
    Ok(Mesh { points, weights, height_cut, spacing })
}

/// Localization factor (1 - chi-) evaluated at a domain point: the cusp
/// cylinder coordinate of a width-2 cusp at normalized height h is
/// tau = ln(h / 2), and the cusp regions are disjoint, so the max over
/// cusps picks the one the point actually sits in.
pub fn one_minus_chi_minus(spec: &DomainSpec, pair: &CuspCutoffPair, z: PlanePoint) -> f64 {
    let mut chi = 0.0f64;
    for i in 0..spec.cusps.len() {
        let h = spec.cusp_height(z, i);
        if h > 2.0 {
            chi = chi.max(pair.minus.value((h / 2.0).ln()));
        }
    }
    1.0 - chi
}

/// A cutoff pair whose chi- transition finishes exactly at the mesh height
/// cutoff, so (1 - chi-) vanishes off the meshed compact part. Requires
/// Y > 2 (the cusp cylinder starts at normalized height 2); below that the
/// far-out certificate pair should be used instead (its chi- vanishes on
/// any desk mesh).
pub fn mesh_adapted_cutoff(height_cut: f64) -> Option<CuspCutoffPair> {
    let tau_y = (height_cut / 2.0).ln();
    if tau_y <= 1e-6 {
        return None;
    }
    let width = (tau_y / 2.0).min(0.5);
    Some(CuspCutoffPair::with_geometry(tau_y - 2.0 * width, width))
}

/// Geometric sparsity pattern of the interior coefficients at truncation T:
/// every (gamma, i, j) with d(gamma x_i, x_j) inside the kernel annulus,
/// with the radius and the combined weight factor
/// (1 - chi-(x_j)) sqrt(w_i w_j). The square-root pairing makes the stored
/// block the conjugation of the Nystrom matrix into unweighted l^2, where
/// power iteration measures the L^2(mesh) operator norm.
#[derive(Debug)]
pub struct InteriorPattern {
    pub support: Vec<GroupElement>,
    /// entry range per support element
    pub ranges: Vec<(usize, usize)>,
    pub row: Vec<u32>,
    pub col: Vec<u32>,
    pub radius: Vec<f64>,
    pub factor: Vec<f64>,
    pub t: f64,
    pub mesh_hash: u64,
    pub mesh_len: usize,
}

impl InteriorPattern {
    pub fn nnz(&self) -> usize {
        self.row.len()
    }

    pub fn build(
        spec: &DomainSpec,
        t: f64,
        mesh: &Mesh,
        cutoff: &CuspCutoffPair,
        word_cap: usize,
    ) -> Result<Self> {
        let support = spec.enumerate_s(t, &mesh.points, word_cap)?;
        Ok(Self::for_support(spec, t, mesh, cutoff, support))
    }

    pub fn for_support(
        spec: &DomainSpec,
        t: f64,
        mesh: &Mesh,
        cutoff: &CuspCutoffPair,
        support: Vec<GroupElement>,
    ) -> Self {
        let m = mesh.len();
        let cosh_lo = t.cosh();
        let cosh_hi = (t + 1.0).cosh();
        let sqrt_w: Vec<f64> = mesh.weights.iter().map(|w| w.sqrt()).collect();
        let loc: Vec<f64> = mesh
            .points
            .iter()
            .map(|&z| one_minus_chi_minus(spec, cutoff, z))
            .collect();

        let per_gamma: Vec<(Vec<u32>, Vec<u32>, Vec<f64>, Vec<f64>)> = support
            .par_iter()
            .map(|g| {
                let mut row = Vec::new();
                let mut col = Vec::new();
                let mut radius = Vec::new();
                let mut factor = Vec::new();
                let gz: Vec<PlanePoint> =
                    mesh.points.iter().map(|&z| g.matrix.apply(z)).collect();
                for i in 0..m {
                    for j in 0..m {
                        if loc[j] == 0.0 {
                            continue;
                        }
                        let c = cosh_dist(gz[i], mesh.points[j]);
                        if c > cosh_lo && c < cosh_hi {
                            row.push(i as u32);
                            col.push(j as u32);
                            radius.push(c.acosh());
                            factor.push(loc[j] * sqrt_w[i] * sqrt_w[j]);
                        }
                    }
                }
                (row, col, radius, factor)
            })
            .collect();

        let mut ranges = Vec::with_capacity(support.len());
        let mut row = Vec::new();
        let mut col = Vec::new();
        let mut radius = Vec::new();
        let mut factor = Vec::new();
        for (r, c, rad, f) in per_gamma {
            let start = row.len();
            row.extend(r);
            col.extend(c);
            radius.extend(rad);
            factor.extend(f);
            ranges.push((start, row.len()));
        }
        InteriorPattern {
            support,
            ranges,
            row,
            col,
            radius,
            factor,
            t,
            mesh_hash: mesh.hash(),
            mesh_len: m,
        }
    }
}

/// Assembled interior coefficients at one spectral parameter: the sparse
/// blocks in the sqrt-weight conjugated form plus the per-block
/// Hilbert-Schmidt norms in L^2(mesh weights).
#[derive(Debug, Clone)]
pub struct InteriorCoefficients {
    pub s: SpectralParam,
    pub t: f64,
    pub pattern: Arc<InteriorPattern>,
    pub values: Vec<f64>,
    pub hs_norms: Vec<f64>,
}

impl InteriorCoefficients {
    pub fn support(&self) -> &[GroupElement] {
        &self.pattern.support
    }

    pub fn mesh_len(&self) -> usize {
        self.pattern.mesh_len
    }
}

/// Evaluates the kernel over the pattern radii through a dense table.
pub fn assemble_values(pattern: &Arc<InteriorPattern>, s: SpectralParam) -> InteriorCoefficients {
    let kernel = remainder_kernel_operator(s, pattern.t, KERNEL_TABLE_N);
    let values: Vec<f64> = pattern
        .radius
        .par_iter()
        .zip(pattern.factor.par_iter())
        .map(|(&r, &f)| kernel.eval(r) * f)
        .collect();
    let hs_norms = pattern
        .ranges
        .iter()
        .map(|&(a, b)| values[a..b].iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    InteriorCoefficients { s, t: pattern.t, pattern: pattern.clone(), values, hs_norms }
}

/// One dense Nystrom block A[i][j] = L(s,T; d(gamma x_i, x_j))
/// (1 - chi-(x_j)) w_j; zero when gamma moves the whole mesh out of the
/// kernel annulus.
pub fn assemble_a_gamma(
    spec: &DomainSpec,
    s: SpectralParam,
    t: f64,
    gamma: &GroupElement,
    mesh: &Mesh,
    cutoff: &CuspCutoffPair,
) -> Result<DMatrix<f64>> {
    let m = mesh.len();
    let kernel = remainder_kernel_operator(s, t, KERNEL_TABLE_N);
    let mut a = DMatrix::zeros(m, m);
    for i in 0..m {
        let gz = gamma.matrix.apply(mesh.points[i]);
        for j in 0..m {
            let r = cosh_dist(gz, mesh.points[j]).acosh();
            if r > t && r < t + 1.0 {
                let loc = one_minus_chi_minus(spec, cutoff, mesh.points[j]);
                a[(i, j)] = kernel.eval(r) * loc * mesh.weights[j];
            }
        }
    }
    Ok(a)
}

/// Hilbert-Schmidt norm of a dense Nystrom block in L^2(mesh weights).
pub fn hs_norm_weighted(a: &DMatrix<f64>, mesh: &Mesh) -> f64 {
    let m = mesh.len();
    let mut acc = 0.0;
    for i in 0..m {
        for j in 0..m {
            // A carries w_j already; HS integrand is |kernel * loc|^2 w_i w_j
            let k = a[(i, j)];
            if k != 0.0 {
                acc += k * k * mesh.weights[i] / mesh.weights[j];
            }
        }
    }
    acc.sqrt()
}

/// Lipschitz deviation constant: the largest Hilbert-Schmidt difference
/// quotient across support elements and adjacent s-grid pairs, inflated by
/// a safety factor of two.
pub fn deviation_constant(pattern: &Arc<InteriorPattern>, s_grid: &[f64]) -> Result<f64> {
    if s_grid.len() < 3 {
        return Err(Error::InvalidParam(format!(
            "deviation constant needs at least 3 grid points, got {}",
            s_grid.len()
        )));
    }
    let mut c1: f64 = 0.0;
    let mut prev = assemble_values(pattern, SpectralParam::new(s_grid[0])?);
    for &s in &s_grid[1..] {
        let cur = assemble_values(pattern, SpectralParam::new(s)?);
        let ds = (cur.s.value() - prev.s.value()).abs();
        if ds == 0.0 {
            prev = cur;
            continue;
        }
        for &(a, b) in &pattern.ranges {
            let mut acc = 0.0;
            for e in a..b {
                let d = cur.values[e] - prev.values[e];
                acc += d * d;
            }
            c1 = c1.max(acc.sqrt() / ds);
        }
        prev = cur;
    }
    Ok(2.0 * c1)
}

/// Largest Hilbert-Schmidt difference quotient over the support for a single
/// pair of spectral parameters; used for holdout validation of the constant.
pub fn max_hs_quotient(pattern: &Arc<InteriorPattern>, s1: f64, s2: f64) -> Result<f64> {
    let a = assemble_values(pattern, SpectralParam::new(s1)?);
    let b = assemble_values(pattern, SpectralParam::new(s2)?);
    let ds = (s1 - s2).abs();
    if ds == 0.0 {
        return Ok(0.0);
    }
    let mut worst: f64 = 0.0;
    for &(lo, hi) in &pattern.ranges {
        let mut acc = 0.0;
        for e in lo..hi {
            let d = a.values[e] - b.values[e];
            acc += d * d;
        }
        worst = worst.max(acc.sqrt() / ds);
    }
    Ok(worst)
}

/// The permutation images phi(gamma) of a support list under one cover,
/// stored flat so they can be computed once per cover and shared across
/// spectral parameters.
pub struct CoverPerms {
    pub n: usize,
    fwd: Vec<u32>,
    inv: Vec<u32>,
}

impl CoverPerms {
    pub fn new(support: &[GroupElement], cover: &CoverSample) -> Self {
        let n = cover.n;
        let mut fwd = Vec::with_capacity(support.len() * n);
        let mut inv = Vec::with_capacity(support.len() * n);
        for g in support {
            let p = cover.permutation_of(&g.word);
            let pi = crate::covers::invert_perm(&p);
            fwd.extend(p.iter().map(|&v| v as u32));
            inv.extend(pi.iter().map(|&v| v as u32));
        }
        CoverPerms { n, fwd, inv }
    }

    fn get(&self, k: usize, adjoint: bool) -> &[u32] {
        let arr = if adjoint { &self.inv } else { &self.fwd };
        &arr[k * self.n..(k + 1) * self.n]
    }
}

/// The cover-twisted interior operator Sum_gamma a_gamma (x)
/// rho_phi(gamma^{-1}) on M x n arrays, applied through the sparse pattern.
pub struct InteriorOperator<'a> {
    coeffs: &'a InteriorCoefficients,
    n: usize,
    perms: PermSource<'a>,
}

enum PermSource<'a> {
    Owned(CoverPerms),
    Shared(&'a CoverPerms),
}

impl<'a> InteriorOperator<'a> {
    pub fn new(coeffs: &'a InteriorCoefficients, cover: &CoverSample) -> Self {
        let perms = CoverPerms::new(&coeffs.pattern.support, cover);
        InteriorOperator { coeffs, n: cover.n, perms: PermSource::Owned(perms) }
    }

    /// Reuses permutations computed once per cover; the support must be the
    /// one the permutations were built from.
    pub fn from_parts(coeffs: &'a InteriorCoefficients, perms: &'a CoverPerms) -> Self {
        InteriorOperator { coeffs, n: perms.n, perms: PermSource::Shared(perms) }
    }

    fn perms(&self) -> &CoverPerms {
        match &self.perms {
            PermSource::Owned(p) => p,
            PermSource::Shared(p) => p,
        }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.mesh_len() * self.n
    }

    /// Y = sum_gamma a_gamma X Gather(sigma_gamma); adjoint transposes the
    /// blocks and gathers along the inverse permutations. Work is chunked
    /// over support elements with per-chunk partial outputs summed in a
    /// fixed order, so results are identical across thread schedules.
    fn apply(&self, x: &[f64], adjoint: bool) -> Vec<f64> {
        let m = self.coeffs.mesh_len();
        let n = self.n;
        let pat = &*self.coeffs.pattern;
        let vals = &self.coeffs.values;
        let perms = self.perms();
        let n_gamma = pat.support.len();
        let chunk = n_gamma.div_ceil(4 * rayon::current_num_threads().max(1)).max(1);
        let chunk_starts: Vec<usize> = (0..n_gamma).step_by(chunk).collect();
        let partials: Vec<Vec<f64>> = chunk_starts
            .par_iter()
            .map(|&g0| {
                let g1 = (g0 + chunk).min(n_gamma);
                let mut y = vec![0.0; m * n];
                let mut xg = vec![0.0; m * n];
                for g in g0..g1 {
                    let (lo, hi) = pat.ranges[g];
                    if lo == hi {
                        continue;
                    }
                    let sigma = perms.get(g, adjoint);
                    // pre-gather the columns once per gamma
                    for r in 0..m {
                        let src = &x[r * n..(r + 1) * n];
                        let dst = &mut xg[r * n..(r + 1) * n];
                        for (d, &s) in dst.iter_mut().zip(sigma) {
                            *d = src[s as usize];
                        }
                    }
                    for e in lo..hi {
                        let v = vals[e];
                        if v == 0.0 {
                            continue;
                        }
                        let (i, j) = if adjoint {
                            (pat.col[e] as usize, pat.row[e] as usize)
                        } else {
                            (pat.row[e] as usize, pat.col[e] as usize)
                        };
                        let src = &xg[j * n..(j + 1) * n];
                        let dst = &mut y[i * n..(i + 1) * n];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += v * s;
                        }
                    }
                }
                y
            })
            .collect();
        let mut y = vec![0.0; m * n];
        for part in partials {
            for (a, b) in y.iter_mut().zip(part.iter()) {
                *a += b;
            }
        }
        // restrict back to zero row means
        for row in y.chunks_mut(n) {
            let mean = row.iter().sum::<f64>() / n as f64;
            for v in row.iter_mut() {
                *v -= mean;
            }
        }
        y
    }

    pub fn norm(
        &self,
        seed: u64,
        tol: f64,
        max_iters: usize,
        start: Option<Vec<f64>>,
    ) -> Result<(NormEstimate, Vec<f64>)> {
        self.norm_opts(seed, tol, max_iters, start, true)
    }

    pub fn norm_opts(
        &self,
        seed: u64,
        tol: f64,
        max_iters: usize,
        start: Option<Vec<f64>>,
        check_adjoint: bool,
    ) -> Result<(NormEstimate, Vec<f64>)> {
        if self.n <= 1 || self.coeffs.values.iter().all(|&v| v == 0.0) {
            return Ok((
                NormEstimate {
                    value: 0.0,
                    method: crate::estimate::NormMethod::PowerIteration,
                    iterations: 0,
                    residual: 0.0,
                    semantics: crate::estimate::NormSemantics::LowerBoundUpToResidual,
                },
                vec![0.0; self.dim()],
            ));
        }
        let opts = PowerIterationOptions {
            tol,
            max_iters,
            seed,
            start,
            project_rows: Some(self.n),
            skip_adjoint_check: !check_adjoint,
        };
        let vector = std::cell::RefCell::new(vec![0.0; self.dim()]);
        let est = operator_norm(
            |x| self.apply(x, false),
            |x| {
                let y = self.apply(x, true);
                vector.borrow_mut().copy_from_slice(&y);
                y
            },
            self.dim(),
            &opts,
        )?;
        let v = vector.into_inner();
        Ok((est, v))
    }
}

/// Interior norm estimate for one cover draw.
pub fn interior_norm_cover(
    coeffs: &InteriorCoefficients,
    cover: &CoverSample,
    seed: u64,
) -> Result<NormEstimate> {
    let op = InteriorOperator::new(coeffs, cover);
    Ok(op.norm(seed, 1e-6, 600, None)?.0)
}

/// Upper bound for the free interior norm: the Selberg-transform norm of the
/// remainder kernel, since the localization factor has norm at most one and
/// the free operator is unitarily the radial kernel operator.
pub fn interior_norm_free(s: SpectralParam, t: f64) -> Result<NormEstimate> {
    let kernel: RadialKernel = remainder_kernel_operator(s, t, KERNEL_TABLE_N);
    radial_operator_norm(&kernel, XI_MAX_DEFAULT, XI_GRID_DEFAULT)
}

// ---------------------------------------------------------------------------
// Binary cache
// ---------------------------------------------------------------------------

const CACHE_MAGIC: &[u8; 8] = b"GAPCOEF1";

impl InteriorCoefficients {
    /// Writes the assembled coefficients keyed by (s, T, mesh hash).
    pub fn save_binary(&self, path: &std::path::Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(CACHE_MAGIC)?;
        f.write_all(&self.s.value().to_le_bytes())?;
        f.write_all(&self.t.to_le_bytes())?;
        f.write_all(&self.pattern.mesh_hash.to_le_bytes())?;
        f.write_all(&(self.pattern.mesh_len as u64).to_le_bytes())?;
        f.write_all(&(self.pattern.support.len() as u64).to_le_bytes())?;
        for g in &self.pattern.support {
            f.write_all(&(g.word.len() as u64).to_le_bytes())?;
            let bytes: Vec<u8> = g.word.iter().map(|&l| l as u8).collect();
            f.write_all(&bytes)?;
        }
        f.write_all(&(self.pattern.nnz() as u64).to_le_bytes())?;
        for &(a, b) in &self.pattern.ranges {
            f.write_all(&(a as u64).to_le_bytes())?;
            f.write_all(&(b as u64).to_le_bytes())?;
        }
        for e in 0..self.pattern.nnz() {
            f.write_all(&self.pattern.row[e].to_le_bytes())?;
            f.write_all(&self.pattern.col[e].to_le_bytes())?;
            f.write_all(&self.pattern.radius[e].to_le_bytes())?;
            f.write_all(&self.pattern.factor[e].to_le_bytes())?;
            f.write_all(&self.values[e].to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads coefficients back; the caller supplies the domain to rebuild
    /// group elements from stored words.
    pub fn load_binary(path: &std::path::Path, spec: &DomainSpec) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 8];
        f.read_exact(&mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(Error::BadCacheFile("bad magic".into()));
        }
        let mut b8 = [0u8; 8];
        let mut read_f64 = |f: &mut dyn Read| -> Result<f64> {
            f.read_exact(&mut b8)?;
            Ok(f64::from_le_bytes(b8))
        };
        let s = read_f64(&mut f)?;
        let t = read_f64(&mut f)?;
        let mut b8 = [0u8; 8];
        f.read_exact(&mut b8)?;
        let mesh_hash = u64::from_le_bytes(b8);
        f.read_exact(&mut b8)?;
        let mesh_len = u64::from_le_bytes(b8) as usize;
        f.read_exact(&mut b8)?;
        let n_support = u64::from_le_bytes(b8) as usize;
        let mut support = Vec::with_capacity(n_support);
        for _ in 0..n_support {
            f.read_exact(&mut b8)?;
            let len = u64::from_le_bytes(b8) as usize;
            let mut word = vec![0u8; len];
            f.read_exact(&mut word)?;
            let word: Vec<i8> = word.into_iter().map(|b| b as i8).collect();
            support.push(spec.element(&word));
        }
        f.read_exact(&mut b8)?;
        let nnz = u64::from_le_bytes(b8) as usize;
        let mut ranges = Vec::with_capacity(n_support);
        for _ in 0..n_support {
            f.read_exact(&mut b8)?;
            let a = u64::from_le_bytes(b8) as usize;
            f.read_exact(&mut b8)?;
            let b = u64::from_le_bytes(b8) as usize;
            ranges.push((a, b));
        }
        let mut row = Vec::with_capacity(nnz);
        let mut col = Vec::with_capacity(nnz);
        let mut radius = Vec::with_capacity(nnz);
        let mut factor = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        let mut b4 = [0u8; 4];
        for _ in 0..nnz {
            f.read_exact(&mut b4)?;
            row.push(u32::from_le_bytes(b4));
            f.read_exact(&mut b4)?;
            col.push(u32::from_le_bytes(b4));
            f.read_exact(&mut b8)?;
            radius.push(f64::from_le_bytes(b8));
            f.read_exact(&mut b8)?;
            factor.push(f64::from_le_bytes(b8));
            f.read_exact(&mut b8)?;
            values.push(f64::from_le_bytes(b8));
        }
        let hs_norms = ranges
            .iter()
            .map(|&(a, b)| values[a..b].iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        let pattern = Arc::new(InteriorPattern {
            support,
            ranges,
            row,
            col,
            radius,
            factor,
            t,
            mesh_hash,
            mesh_len,
        });
        Ok(InteriorCoefficients {
            s: SpectralParam::new(s)?,
            t,
            pattern,
            values,
            hs_norms,
        })
    }
}
