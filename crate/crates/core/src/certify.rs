//! The certification pipeline: cusp budget, truncation radius, coefficient
//! assembly on a net of spectral parameters, per-net-point interior norm
//! estimates over random covers, and the combined budget verdicts.
//!
//! The verdict field is deliberately named `empirically_within_budget`: at
//! finite cover degree the pipeline certifies nothing asymptotic, it reports
//! whether the measured budgets stay inside the interior target of 3/5 and
//! the total of 4/5 at every net point.

use crate::covers::{sample_cover, CoverSample};
use crate::cusp::{cusp_error_certificate, CuspBudget, CuspCutoffPair};
use crate::discretize::{
    assemble_values, build_mesh, deviation_constant, interior_norm_free, mesh_adapted_cutoff,
    CoverPerms, InteriorOperator, InteriorPattern,
};
use crate::error::{Error, Result};
use crate::geometry::DomainSpec;
use crate::kernels::SpectralParam;
use crate::rng::derive_seed;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub const T_SEARCH_CAP: u32 = 30;
pub const INTERIOR_FREE_TARGET: f64 = 0.2;
pub const INTERIOR_COVER_TARGET: f64 = 0.6;
pub const TOTAL_BUDGET: f64 = 0.8;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertifyConfig {
    pub s0: f64,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub mesh_h: f64,
    pub height_cut: f64,
    pub ball_radius: usize,
    pub quad_nodes: usize,
    #[serde(skip)]
    pub out_dir: Option<PathBuf>,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        CertifyConfig {
            s0: 0.8,
            n: 200,
            trials: 5,
            seed: 1,
            mesh_h: 0.15,
            // Desk-scale compact core. The net size is proportional to the
            // measured |S| c1, which grows quickly with the meshed region,
            // so the default keeps the certification run laptop-sized.
            height_cut: 1.05,
            ball_radius: 12,
            quad_nodes: 64,
            out_dir: None,
        }
    }
}

impl CertifyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.s0 > 0.5 && self.s0 <= 1.0) {
            return Err(Error::InvalidParam(format!("s0={} outside (1/2, 1]", self.s0)));
        }
        if self.n == 0 || self.trials == 0 || self.mesh_h <= 0.0 || self.height_cut <= 1.0 {
            return Err(Error::InvalidParam(
                "n, trials must be positive; mesh_h > 0; height_cut > 1".into(),
            ));
        }
        Ok(())
    }

    /// Applies `key = value` lines (with `#` comments) over the current
    /// values; unknown keys are rejected.
    pub fn apply_kv_text(&mut self, text: &str) -> Result<()> {
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::BadConfig(format!("expected key=value, got '{raw}'")))?;
            let key = key.trim().replace('-', "_");
            let value = value.trim();
            let bad = |what: &str| Error::BadConfig(format!("bad {what} value '{value}'"));
            match key.as_str() {
                "s0" => self.s0 = value.parse().map_err(|_| bad("s0"))?,
                "n" => self.n = value.parse().map_err(|_| bad("n"))?,
                "trials" => self.trials = value.parse().map_err(|_| bad("trials"))?,
                "seed" => self.seed = value.parse().map_err(|_| bad("seed"))?,
                "mesh_h" => self.mesh_h = value.parse().map_err(|_| bad("mesh_h"))?,
                "height_cut" => self.height_cut = value.parse().map_err(|_| bad("height_cut"))?,
                "ball_radius" => {
                    self.ball_radius = value.parse().map_err(|_| bad("ball_radius"))?
                }
                "quad_nodes" => self.quad_nodes = value.parse().map_err(|_| bad("quad_nodes"))?,
                "out" => self.out_dir = Some(PathBuf::from(value)),
                other => return Err(Error::BadConfig(format!("unknown key '{other}'"))),
            }
        }
        Ok(())
    }
}

/// Smallest T in {2, ..., 30} whose free interior norm stays at or below 1/5
/// across a 20-point grid of [s0, 1].
pub fn choose_t(s0: f64) -> Result<u32> {
    let grid = s_grid(s0, 20);
    let mut best_norm = f64::INFINITY;
    let mut best_t = 2;
    for t in 2..=T_SEARCH_CAP {
        let mut worst: f64 = 0.0;
        let mut ok = true;
        for &s in &grid {
            let v = interior_norm_free(SpectralParam::new(s)?, t as f64)?.value;
            worst = worst.max(v);
            if v > INTERIOR_FREE_TARGET {
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(t);
        }
        if worst < best_norm {
            best_norm = worst;
            best_t = t;
        }
    }
    Err(Error::NoAdmissibleT { cap: T_SEARCH_CAP, best_norm, best_t })
}

fn s_grid(s0: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| s0 + (1.0 - s0) * k as f64 / (count - 1) as f64)
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetPointReport {
    pub s: f64,
    pub interior_free: f64,
    pub interior_cover: Vec<f64>,
    pub interior_cover_max: f64,
    pub power_residuals: Vec<f64>,
    pub deviation_allowance: f64,
    pub cusp_certificate: f64,
    pub total: f64,
    pub empirically_within_budget: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertifyReport {
    pub config: CertifyConfig,
    pub failed_stage: Option<String>,
    pub chosen_t: Option<u32>,
    pub cusp: Option<CuspBudget>,
    pub mesh_points: usize,
    pub mesh_total_weight: f64,
    pub support_size: usize,
    pub deviation_constant: f64,
    pub net_spacing: f64,
    pub net: Vec<NetPointReport>,
    /// s0 (1 - s0): the eigenvalue abscissa the run speaks about.
    pub gap_abscissa: f64,
}

impl CertifyReport {
    fn empty(config: &CertifyConfig) -> Self {
        CertifyReport {
            config: config.clone(),
            failed_stage: None,
            chosen_t: None,
            cusp: None,
            mesh_points: 0,
            mesh_total_weight: 0.0,
            support_size: 0,
            deviation_constant: 0.0,
            net_spacing: 0.0,
            net: Vec::new(),
            gap_abscissa: config.s0 * (1.0 - config.s0),
        }
    }

    pub fn completed(&self) -> bool {
        self.failed_stage.is_none()
    }

    /// Recomputes every stored verdict from the stored numbers.
    pub fn verdicts_consistent(&self) -> bool {
        self.net.iter().all(|p| {
            let total = p.interior_cover_max + p.deviation_allowance + p.cusp_certificate;
            let verdict = p.interior_cover_max + p.deviation_allowance
                <= INTERIOR_COVER_TARGET + 1e-12
                && total <= TOTAL_BUDGET + 1e-12;
            (total - p.total).abs() <= 1e-12 && verdict == p.empirically_within_budget
        })
    }
}

/// Pipeline: cusp certificate, truncation radius, mesh and finite support,
/// deviation constant and net, per-net-point cover norms, verdicts. A stage
/// failure produces a partial report naming the stage.
pub fn run_certify(cfg: &CertifyConfig) -> CertifyReport {
    let mut report = CertifyReport::empty(cfg);
    if let Err(e) = cfg.validate() {
        report.failed_stage = Some(format!("config: {e}"));
        return report;
    }
    let spec = DomainSpec::gamma2(cfg.height_cut.max(1.5));

    // (1) cusp budget, valid for every s in [s0, 1]
    let cusp = match cusp_error_certificate(cfg.s0) {
        Ok(c) => c,
        Err(e) => {
            report.failed_stage = Some(format!("cusp-certificate: {e}"));
            return report;
        }
    };
    report.cusp = Some(cusp);

    // (2) truncation radius from the free reference
    let t = match choose_t(cfg.s0) {
        Ok(t) => t,
        Err(e) => {
            report.failed_stage = Some(format!("choose-t: {e}"));
            return report;
        }
    };
    report.chosen_t = Some(t);
    let t = t as f64;

    // (3) mesh, localization cutoff, finite support, sparse pattern
    let mesh = match build_mesh(&spec, cfg.height_cut, cfg.mesh_h) {
        Ok(m) => m,
        Err(e) => {
            report.failed_stage = Some(format!("mesh: {e}"));
            return report;
        }
    };
    report.mesh_points = mesh.len();
    report.mesh_total_weight = mesh.total_weight();
    let cutoff: CuspCutoffPair =
        mesh_adapted_cutoff(cfg.height_cut).unwrap_or_else(|| cusp.pair);
    let pattern = match InteriorPattern::build(&spec, t, &mesh, &cutoff, 2000) {
        Ok(p) => Arc::new(p),
        Err(e) => {
            report.failed_stage = Some(format!("enumerate-s: {e}"));
            return report;
        }
    };
    report.support_size = pattern.support.len();

    // (4) deviation constant and the net of spectral parameters
    let c1 = match deviation_constant(&pattern, &s_grid(cfg.s0, 5)) {
        Ok(c) => c,
        Err(e) => {
            report.failed_stage = Some(format!("deviation: {e}"));
            return report;
        }
    };
    report.deviation_constant = c1;
    let span = 1.0 - cfg.s0;
    let max_spacing = 1.0 / (5.0 * pattern.support.len() as f64 * c1);
    let segments = if max_spacing.is_finite() && max_spacing > 0.0 {
        (span / max_spacing).ceil().max(1.0) as usize
    } else {
        1
    };
    let spacing = span / segments as f64;
    report.net_spacing = spacing;
    let net: Vec<f64> = (0..=segments)
        .map(|k| cfg.s0 + span * k as f64 / segments as f64)
        .collect();
    // every s in [s0, 1] is within spacing/2 of a net point
    let allowance = pattern.support.len() as f64 * c1 * spacing * 0.5;

    // (5) per net point: free reference and cover norms across trials. The
    // covers are fixed per trial across the whole net; permutation images of
    // the support are computed once per trial, power iteration is fully
    // converged at the first net point and continued by single warm-started
    // steps between points with a deeper refresh every 20 points (the
    // operator moves by at most |S| c1 spacing between neighbors).
    let covers: Vec<CoverSample> = (0..cfg.trials)
        .map(|trial| sample_cover(cfg.n, 2, derive_seed(cfg.seed, 100, trial as u64)))
        .collect();
    let trial_perms: Vec<CoverPerms> =
        covers.iter().map(|c| CoverPerms::new(&pattern.support, c)).collect();
    let mut warm: Vec<Option<Vec<f64>>> = vec![None; cfg.trials];
    for (ni, &s) in net.iter().enumerate() {
        let sp = match SpectralParam::new(s.min(1.0)) {
            Ok(sp) => sp,
            Err(e) => {
                report.failed_stage = Some(format!("net: {e}"));
                return report;
            }
        };
        let free = match interior_norm_free(sp, t) {
            Ok(v) => v.value,
            Err(e) => {
                report.failed_stage = Some(format!("interior-free: {e}"));
                return report;
            }
        };
        let coeffs = assemble_values(&pattern, sp);
        let mut cover_norms = Vec::with_capacity(cfg.trials);
        let mut residuals = Vec::with_capacity(cfg.trials);
        for trial in 0..cfg.trials {
            let op = InteriorOperator::from_parts(&coeffs, &trial_perms[trial]);
            let cold = warm[trial].is_none();
            let iters = if cold {
                80
            } else if ni % 20 == 0 {
                6
            } else {
                1
            };
            let seed = derive_seed(cfg.seed, 200 + ni as u64, trial as u64);
            match op.norm_opts(seed, 2e-3, iters, warm[trial].take(), cold) {
                Ok((est, vector)) => {
                    cover_norms.push(est.value);
                    residuals.push(est.residual);
                    warm[trial] = Some(vector);
                }
                Err(e) => {
                    report.failed_stage = Some(format!("interior-cover: {e}"));
                    return report;
                }
            }
        }
        let cover_max = cover_norms.iter().cloned().fold(0.0f64, f64::max);
        let total = cover_max + allowance + cusp.certificate;
        let verdict = cover_max + allowance <= INTERIOR_COVER_TARGET + 1e-12
            && total <= TOTAL_BUDGET + 1e-12;
        report.net.push(NetPointReport {
            s,
            interior_free: free,
            interior_cover: cover_norms,
            interior_cover_max: cover_max,
            power_residuals: residuals,
            deviation_allowance: allowance,
            cusp_certificate: cusp.certificate,
            total,
            empirically_within_budget: verdict,
        });
    }
    report
}

/// Writes the report as JSON plus a plot-ready CSV of per-net-point rows.
/// Returns the two file paths.
pub fn emit_outputs(report: &CertifyReport, out_dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(out_dir)?;
    let json_path = out_dir.join("certify_report.json");
    let csv_path = out_dir.join("certify_net.csv");
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| Error::InvalidParam(format!("report serialization failed: {e}")))?;
    std::fs::write(&json_path, json.as_bytes())?;
    let mut csv = String::from("s,interior_cover,interior_free,cusp,total,verdict\n");
    for p in &report.net {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            p.s,
            p.interior_cover_max,
            p.interior_free,
            p.cusp_certificate,
            p.total,
            p.empirically_within_budget
        ));
    }
    std::fs::write(&csv_path, csv.as_bytes())?;
    Ok((json_path, csv_path))
}
