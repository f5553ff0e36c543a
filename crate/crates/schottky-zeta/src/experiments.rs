//! Seeded, reproducible experiment pipelines: the resonance-gap experiment
//! over random covers, Hilbert-Schmidt norm decay in the cover degree,
//! partition and power-pair scaling in tau, and the Jensen-formula audit.
//!
//! Every pipeline derives one RNG stream per (degree, trial) from the base
//! seed and merges results in key order, so output files are byte-identical
//! across runs and worker counts (modulo the wall-time column).

use crate::error::{Error, Result};
use crate::par;
use crate::permrep::{is_transitive, sample_rep, PermutationRep};
use crate::schottky::SchottkyData;
use crate::transfer::{hs_norm_matrix, AssembleOpts, AssemblyPlan, RepProvider, WordSet};
use crate::util::{linear_fit, mix_seed};
use crate::words::{power_pairs_with_cap, Word};
use crate::zeta::{
    count_zeros, locate_zeros, Region, ZetaFunction, ZetaKind,
};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;
use std::fmt::Write as _;

fn config_hash<T: Serialize>(cfg: &T) -> String {
    let canonical = serde_json::to_string(cfg).expect("config serialization");
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    let digest = hasher.finalize();
    let mut out = String::new();
    for b in digest.iter().take(8) {
        write!(out, "{b:02x}").unwrap();
    }
    out
}

/// Trial seed for (degree index, trial index) under a base seed.
pub fn trial_seed(base: u64, degree_index: usize, trial: usize) -> u64 {
    mix_seed(mix_seed(base, degree_index as u64 + 1), trial as u64)
}

// ---------------------------------------------------------------------------
// gap experiment

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GapExperimentConfig {
    pub degrees: Vec<usize>,
    pub trials: usize,
    /// sigma_0 as a fraction of delta; must lie in (3/4, 1)
    pub sigma0_frac: f64,
    pub h: f64,
    pub degree: usize,
    pub base_seed: u64,
    pub contour_nodes: usize,
    /// number of trials per run audited against the cover-zeta factorization
    pub audits: usize,
}

impl Default for GapExperimentConfig {
    fn default() -> Self {
        GapExperimentConfig {
            degrees: vec![4, 8, 16],
            trials: 30,
            sigma0_frac: 0.8,
            h: 1.0,
            degree: 12,
            base_seed: 1,
            contour_nodes: 256,
            audits: 3,
        }
    }
}

impl GapExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma0_frac > 0.75 && self.sigma0_frac < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "sigma0 fraction {} outside (3/4, 1)",
                self.sigma0_frac
            )));
        }
        if self.trials == 0 || self.degrees.is_empty() {
            return Err(Error::InvalidConfig("need at least one degree and one trial".into()));
        }
        if self.degrees.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("degrees must be sorted ascending".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GapTrialRow {
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    pub transitive: bool,
    /// -1 records a failed trial
    pub new_zero_count: i64,
    pub wall_ms: u64,
    pub flag: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct GapDegreeSummary {
    pub n: usize,
    pub trials: usize,
    pub failures: usize,
    pub fraction_with_new_zeros: f64,
    pub mean_new_zero_count: f64,
    pub transitive_fraction: f64,
    /// binomial standard error of the fraction
    pub fraction_stderr: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AuditResult {
    pub n: usize,
    pub trial: usize,
    pub new_zeros: Vec<(f64, f64, usize)>,
    pub cover_minus_base: Vec<(f64, f64, usize)>,
    pub matched: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GapExperimentRecord {
    pub config: GapExperimentConfig,
    pub config_hash: String,
    pub delta: f64,
    pub rect: Region,
    pub rows: Vec<GapTrialRow>,
    pub per_degree: Vec<GapDegreeSummary>,
    pub audits: Vec<AuditResult>,
}

impl GapExperimentRecord {
    /// CSV schema: n,trial,seed,transitive,new_zero_count,wall_ms
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,trial,seed,transitive,new_zero_count,wall_ms\n");
        for row in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                row.n, row.trial, row.seed, row.transitive, row.new_zero_count, row.wall_ms
            )
            .unwrap();
        }
        out
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serialization")
    }

    /// gnuplot-ready: n, fraction_with_new_zeros, stderr
    pub fn to_dat(&self) -> String {
        let mut out = String::from("# n fraction_with_new_zeros stderr\n");
        for d in &self.per_degree {
            writeln!(out, "{} {} {}", d.n, d.fraction_with_new_zeros, d.fraction_stderr).unwrap();
        }
        out
    }
}

/// Count new resonances of random degree-n covers in Rect(sigma0, H) via the
/// standard-kind zeta of the std0 twist, trial by trial.
pub fn run_gap_experiment(g: &SchottkyData, cfg: &GapExperimentConfig) -> Result<GapExperimentRecord> {
    cfg.validate()?;
    let delta = crate::zeta::hausdorff_dimension(g, 1e-9, cfg.degree.max(16))?.delta;
    let sigma0 = cfg.sigma0_frac * delta;
    let rect = Region::rect(sigma0, delta, -cfg.h, cfg.h);

    // The base-surface zeta must be boundary-quiet away from the bass zero,
    // which by construction sits exactly on the right edge at s = delta.
    check_base_boundary(g, &rect, delta, cfg.degree)?;

    let mut rows = Vec::new();
    let mut audits = Vec::new();
    for (di, &n) in cfg.degrees.iter().enumerate() {
        let trial_rows = par::map_indexed(cfg.trials, |trial| {
            let seed = trial_seed(cfg.base_seed, di, trial);
            let start = std::time::Instant::now();
            let rep = sample_rep(n, g.rank(), seed);
            let transitive = is_transitive(&rep);
            let outcome = count_new_zeros(g, &rep, &rect, cfg.degree, cfg.contour_nodes);
            let (count, flag) = match outcome {
                Ok(c) => (c as i64, String::new()),
                Err(e) => (-1, format!("{e}")),
            };
            GapTrialRow {
                n,
                trial,
                seed,
                transitive,
                new_zero_count: count,
                wall_ms: start.elapsed().as_millis() as u64,
                flag,
            }
        });
        for (trial, row) in trial_rows.iter().enumerate() {
            if trial < cfg.audits {
                let rep = sample_rep(n, g.rank(), row.seed);
                match audit_trial(g, &rep, &rect, cfg.degree) {
                    Ok(a) => audits.push(AuditResult { n, trial, ..a }),
                    Err(e) => {
                        eprintln!("audit failed for n = {n}, trial {trial}: {e}");
                        audits.push(AuditResult {
                            n,
                            trial,
                            new_zeros: vec![],
                            cover_minus_base: vec![(f64::NAN, f64::NAN, 0)],
                            matched: false,
                        });
                    }
                }
            }
        }
        rows.extend(trial_rows);
    }

    let per_degree = cfg
        .degrees
        .iter()
        .map(|&n| {
            let of_n: Vec<&GapTrialRow> = rows.iter().filter(|r| r.n == n).collect();
            let ok: Vec<&&GapTrialRow> = of_n.iter().filter(|r| r.new_zero_count >= 0).collect();
            let with_new = ok.iter().filter(|r| r.new_zero_count > 0).count();
            let count_ok = ok.len().max(1);
            let fraction = with_new as f64 / count_ok as f64;
            GapDegreeSummary {
                n,
                trials: of_n.len(),
                failures: of_n.len() - ok.len(),
                fraction_with_new_zeros: fraction,
                mean_new_zero_count: ok.iter().map(|r| r.new_zero_count as f64).sum::<f64>()
                    / count_ok as f64,
                transitive_fraction: of_n.iter().filter(|r| r.transitive).count() as f64
                    / of_n.len().max(1) as f64,
                fraction_stderr: (fraction * (1.0 - fraction) / count_ok as f64).sqrt(),
            }
        })
        .collect();

    let config_hash = config_hash(cfg);
    Ok(GapExperimentRecord { config: cfg.clone(), config_hash, delta, rect, rows, per_degree, audits })
}

fn check_base_boundary(g: &SchottkyData, rect: &Region, delta: f64, degree: usize) -> Result<()> {
    let base = ZetaFunction::new(g, ZetaKind::Standard, &RepProvider::trivial(), degree)?;
    let (re_min, re_max, im_min, im_max) = match *rect {
        Region::Rect { re_min, re_max, im_min, im_max } => (re_min, re_max, im_min, im_max),
        _ => unreachable!(),
    };
    let mut min_ratio = f64::INFINITY;
    let mut max_val: f64 = 0.0;
    let mut vals = Vec::new();
    for k in 0..128 {
        let t = k as f64 / 128.0;
        let (z, skip_near_bass) = {
            // walk the rectangle boundary
            let z = if t < 0.25 {
                C64::new(re_min + 4.0 * t * (re_max - re_min), im_min)
            } else if t < 0.5 {
                C64::new(re_max, im_min + 4.0 * (t - 0.25) * (im_max - im_min))
            } else if t < 0.75 {
                C64::new(re_max - 4.0 * (t - 0.5) * (re_max - re_min), im_max)
            } else {
                C64::new(re_min, im_max - 4.0 * (t - 0.75) * (im_max - im_min))
            };
            (z, (z - C64::new(delta, 0.0)).norm() < 0.02)
        };
        if skip_near_bass {
            continue;
        }
        vals.push(z);
    }
    for z in vals {
        let v = base.value(z)?.norm();
        max_val = max_val.max(v);
        min_ratio = min_ratio.min(v);
    }
    if min_ratio < 1e-9 * max_val {
        return Err(Error::BoundaryZeroSuspected(min_ratio / max_val));
    }
    Ok(())
}

fn count_new_zeros(
    g: &SchottkyData,
    rep: &PermutationRep,
    rect: &Region,
    degree: usize,
    nodes: usize,
) -> Result<usize> {
    let zf = ZetaFunction::new(g, ZetaKind::Standard, &RepProvider::std0(rep.clone()), degree)?;
    count_zeros(&zf, rect, nodes)
}

fn audit_trial(
    g: &SchottkyData,
    rep: &PermutationRep,
    rect: &Region,
    degree: usize,
) -> Result<AuditResult> {
    // compare multisets on a slightly enlarged rectangle so the bass zero of
    // both cover and base sits strictly inside and cancels in the difference
    let enlarged = rect.dilate(1.25);
    let tol = 1e-9;
    let z_new = ZetaFunction::new(g, ZetaKind::Standard, &RepProvider::std0(rep.clone()), degree)?;
    let z_cover = ZetaFunction::new(g, ZetaKind::Standard, &RepProvider::std(rep.clone()), degree)?;
    let z_base = ZetaFunction::new(g, ZetaKind::Standard, &RepProvider::trivial(), degree)?;
    let new_zeros = locate_zeros(&z_new, &enlarged, tol)?;
    let cover_zeros = locate_zeros(&z_cover, &enlarged, tol)?;
    let base_zeros = locate_zeros(&z_base, &enlarged, tol)?;

    // cover minus base as a multiset with positional matching
    let mut diff: Vec<(C64, i64)> = Vec::new();
    for z in &cover_zeros.zeros {
        diff.push((z.position(), z.multiplicity as i64));
    }
    for z in &base_zeros.zeros {
        let pos = z.position();
        match diff.iter_mut().find(|(p, _)| (*p - pos).norm() < 1e-5) {
            Some(entry) => entry.1 -= z.multiplicity as i64,
            None => diff.push((pos, -(z.multiplicity as i64))),
        }
    }
    diff.retain(|(_, m)| *m != 0);

    let mut matched = diff.iter().all(|(_, m)| *m > 0)
        && diff.iter().map(|(_, m)| *m).sum::<i64>()
            == new_zeros.zeros.iter().map(|z| z.multiplicity as i64).sum::<i64>();
    if matched {
        for (pos, m) in &diff {
            let hit = new_zeros
                .zeros
                .iter()
                .find(|z| (z.position() - *pos).norm() < 1e-5)
                .map(|z| z.multiplicity as i64);
            if hit != Some(*m) {
                matched = false;
                break;
            }
        }
    }
    Ok(AuditResult {
        n: rep.n(),
        trial: 0,
        new_zeros: new_zeros.zeros.iter().map(|z| (z.re, z.im, z.multiplicity)).collect(),
        cover_minus_base: diff.iter().map(|(p, m)| (p.re, p.im, *m as usize)).collect(),
        matched,
    })
}

// ---------------------------------------------------------------------------
// Hilbert-Schmidt decay

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HsDecayConfig {
    pub degrees: Vec<usize>,
    pub trials: usize,
    /// sigma values as fractions of delta; each must lie in (3/4, ...]
    pub sigma_fracs: Vec<f64>,
    /// imaginary parts of the sample points
    pub t_values: Vec<f64>,
    pub degree: usize,
    pub base_seed: u64,
}

impl Default for HsDecayConfig {
    fn default() -> Self {
        HsDecayConfig {
            degrees: vec![4, 8, 16, 32],
            trials: 20,
            sigma_fracs: vec![0.9],
            t_values: vec![0.0],
            degree: 12,
            base_seed: 1,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HsDecayRow {
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    pub sigma_frac: f64,
    pub t: f64,
    pub tau: f64,
    pub hs_norm_sq: f64,
    pub wall_ms: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct HsDecayRecord {
    pub config: HsDecayConfig,
    pub config_hash: String,
    pub delta: f64,
    pub rows: Vec<HsDecayRow>,
    /// per (sigma_frac, t): least-squares slope of log mean(hs^2) vs log n
    pub slopes: Vec<(f64, f64, f64)>,
}

impl HsDecayRecord {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,trial,seed,sigma_frac,t,tau,hs_norm_sq,wall_ms\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.n, r.trial, r.seed, r.sigma_frac, r.t, r.tau, r.hs_norm_sq, r.wall_ms
            )
            .unwrap();
        }
        out
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serialization")
    }
}

/// Monte-Carlo mean of the squared Hilbert-Schmidt norm of the refined
/// operator at tau = n^{-2/delta}, fitted against n.
pub fn run_hs_decay(g: &SchottkyData, cfg: &HsDecayConfig) -> Result<HsDecayRecord> {
    if cfg.sigma_fracs.iter().any(|&f| f <= 0.75) {
        return Err(Error::InvalidConfig("sigma fractions must exceed 3/4".into()));
    }
    if cfg.degrees.is_empty() || cfg.trials == 0 {
        return Err(Error::InvalidConfig("need degrees and trials".into()));
    }
    let delta = crate::zeta::hausdorff_dimension(g, 1e-9, cfg.degree.max(16))?.delta;
    let mut rows: Vec<HsDecayRow> = Vec::new();
    for (di, &n) in cfg.degrees.iter().enumerate() {
        let tau = (n as f64).powf(-2.0 / delta);
        let trial_results: Vec<Result<Vec<HsDecayRow>>> = par::map_indexed(cfg.trials, |trial| {
            let seed = trial_seed(cfg.base_seed, di, trial);
            let start = std::time::Instant::now();
            let rep_perm = sample_rep(n, g.rank(), seed);
            let rep = RepProvider::std0(rep_perm);
            let opts = AssembleOpts::with_degree(cfg.degree);
            let plan = AssemblyPlan::new(g, &WordSet::Refined { tau }, &rep, &opts)?;
            let mut out = Vec::new();
            for &frac in &cfg.sigma_fracs {
                for &t in &cfg.t_values {
                    let s = C64::new(frac * delta, t);
                    let m = plan.matrix(s)?;
                    let hs = hs_norm_matrix(&m);
                    out.push(HsDecayRow {
                        n,
                        trial,
                        seed,
                        sigma_frac: frac,
                        t,
                        tau,
                        hs_norm_sq: hs * hs,
                        wall_ms: start.elapsed().as_millis() as u64,
                    });
                }
            }
            Ok(out)
        });
        for r in trial_results {
            rows.extend(r?);
        }
    }

    let mut slopes = Vec::new();
    for &frac in &cfg.sigma_fracs {
        for &t in &cfg.t_values {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for &n in &cfg.degrees {
                let vals: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.n == n && r.sigma_frac == frac && r.t == t)
                    .map(|r| r.hs_norm_sq)
                    .collect();
                let mean = vals.iter().sum::<f64>() / vals.len().max(1) as f64;
                xs.push((n as f64).ln());
                ys.push(mean.max(1e-300).ln());
            }
            let (slope, _) = linear_fit(&xs, &ys);
            slopes.push((frac, t, slope));
        }
    }
    let config_hash = config_hash(cfg);
    Ok(HsDecayRecord { config: cfg.clone(), config_hash, delta, rows, slopes })
}

// ---------------------------------------------------------------------------
// partition / power-pair scaling

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PartitionScalingConfig {
    pub taus: Vec<f64>,
    pub cap: usize,
}

impl Default for PartitionScalingConfig {
    fn default() -> Self {
        PartitionScalingConfig {
            taus: vec![1e-2, 10f64.powf(-2.5), 1e-3, 10f64.powf(-3.5)],
            cap: crate::words::DEFAULT_POWER_PAIRS_CAP,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PartitionScalingRow {
    pub tau: f64,
    pub partition_size: usize,
    pub identity_pairs: usize,
    pub power_pairs: usize,
    pub other_pairs: usize,
    pub min_len: usize,
    pub max_len: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct PartitionScalingRecord {
    pub config: PartitionScalingConfig,
    pub config_hash: String,
    pub rows: Vec<PartitionScalingRow>,
    pub size_exponent: f64,
    pub identity_exponent: f64,
    pub power_exponent: f64,
    /// histogram over (prefix, core_a, core_b, suffix, q), flattened
    pub histogram: Vec<((usize, usize, usize, usize, usize), usize)>,
}

impl PartitionScalingRecord {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "tau,partition_size,identity_pairs,power_pairs,other_pairs,min_len,max_len\n",
        );
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.tau, r.partition_size, r.identity_pairs, r.power_pairs, r.other_pairs,
                r.min_len, r.max_len
            )
            .unwrap();
        }
        out
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serialization")
    }
}

pub fn run_partition_scaling(
    g: &SchottkyData,
    cfg: &PartitionScalingConfig,
) -> Result<PartitionScalingRecord> {
    if cfg.taus.is_empty() {
        return Err(Error::InvalidConfig("need at least one tau".into()));
    }
    let mut rows = Vec::new();
    let mut histogram = std::collections::BTreeMap::new();
    for &tau in &cfg.taus {
        let report = power_pairs_with_cap(tau, g, cfg.cap)?;
        for (k, v) in &report.histogram {
            *histogram.entry(*k).or_insert(0) += v;
        }
        rows.push(PartitionScalingRow {
            tau,
            partition_size: report.partition_size,
            identity_pairs: report.identity_count,
            power_pairs: report.power_count(),
            other_pairs: report.other_count,
            min_len: report.words.iter().map(Word::len).min().unwrap_or(0),
            max_len: report.words.iter().map(Word::len).max().unwrap_or(0),
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| (1.0 / r.tau).ln()).collect();
    let fit = |f: &dyn Fn(&PartitionScalingRow) -> usize| -> f64 {
        let ys: Vec<f64> = rows.iter().map(|r| (f(r).max(1) as f64).ln()).collect();
        linear_fit(&xs, &ys).0
    };
    let size_exponent = fit(&|r| r.partition_size);
    let identity_exponent = fit(&|r| r.identity_pairs);
    let power_exponent = fit(&|r| r.power_pairs);
    let config_hash = config_hash(cfg);
    Ok(PartitionScalingRecord {
        config: cfg.clone(),
        config_hash,
        rows,
        size_exponent,
        identity_exponent,
        power_exponent,
        histogram: histogram.into_iter().collect(),
    })
}

// ---------------------------------------------------------------------------
// Jensen audit

#[derive(Clone, Debug, Serialize)]
pub struct JensenAudit {
    pub center: f64,
    pub radius: f64,
    /// sum over zeros of multiplicity * log(R / |z - b|)
    pub zero_side: f64,
    /// boundary mean of log|zeta| minus log|zeta(b)|
    pub integral_side: f64,
    pub residual: f64,
    pub zeros: Vec<(f64, f64, usize)>,
}

pub const JENSEN_QUADRATURE_NODES: usize = 1024;

/// Check Jensen's formula on the disk D_R(b): the zero side against the
/// 1024-node boundary quadrature of log|zeta|. The disk must have no zeros
/// on (or hugging) its boundary.
pub fn jensen_audit(
    zeta: &ZetaFunction,
    center: f64,
    radius: f64,
) -> Result<JensenAudit> {
    let b = C64::new(center, 0.0);
    let report = locate_zeros(zeta, &Region::disk(b, radius), 1e-10)?;
    // the guard may have dilated the region; use its actual radius
    let radius = match report.region {
        Region::Disk { radius, .. } => radius,
        _ => radius,
    };
    let mut zero_side = 0.0;
    for z in &report.zeros {
        let d = (z.position() - b).norm();
        if d >= radius {
            continue;
        }
        if d == 0.0 {
            return Err(Error::BoundaryZeroSuspected(0.0));
        }
        zero_side += z.multiplicity as f64 * (radius / d).ln();
    }
    let center_val = zeta.value(b)?;
    if center_val.norm() == 0.0 {
        return Err(Error::SingularMatrix(b));
    }
    let nodes = JENSEN_QUADRATURE_NODES;
    let pts: Vec<C64> = (0..nodes)
        .map(|k| {
            let theta = 2.0 * PI * k as f64 / nodes as f64;
            b + radius * C64::new(theta.cos(), theta.sin())
        })
        .collect();
    let values = par::map_slice(&pts, |p| zeta.value(*p));
    let mut mean = 0.0;
    for v in values {
        let v = v?;
        if v.norm() == 0.0 {
            return Err(Error::BoundaryZeroSuspected(0.0));
        }
        mean += v.norm().ln();
    }
    mean /= nodes as f64;
    let integral_side = mean - center_val.norm().ln();
    Ok(JensenAudit {
        center,
        radius,
        zero_side,
        integral_side,
        residual: (zero_side - integral_side).abs(),
        zeros: report.zeros.iter().map(|z| (z.re, z.im, z.multiplicity)).collect(),
    })
}
