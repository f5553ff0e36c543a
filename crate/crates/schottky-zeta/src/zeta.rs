//! Zeta functions as Fredholm determinants of the truncated transfer
//! operators, their logarithmic derivatives, argument-principle zero
//! counting and localization, pressure and Hausdorff dimension, and the
//! geodesic Euler product used as an independent oracle.

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::par;
use crate::permrep::PermutationRep;
use crate::schottky::SchottkyData;
use crate::transfer::{AssembleOpts, AssemblyPlan, RepProvider, WordSet};
use crate::words::bar;
use num_complex::Complex64 as C64;
use serde::Serialize;
use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ZetaKind {
    /// det(1 - L_s) over the two-letter word set.
    Standard,
    /// det(1 - L_{tau,s}^2) over the mirror partition.
    Refined { tau: f64 },
}

/// A zeta function with its assembly plan cached, so evaluations at many s
/// share the node geometry and representation blocks.
pub struct ZetaFunction {
    kind: ZetaKind,
    plan: AssemblyPlan,
    degree: usize,
}

impl ZetaFunction {
    pub fn new(g: &SchottkyData, kind: ZetaKind, rep: &RepProvider, degree: usize) -> Result<Self> {
        Self::with_opts(g, kind, rep, &AssembleOpts::with_degree(degree))
    }

    pub fn with_opts(
        g: &SchottkyData,
        kind: ZetaKind,
        rep: &RepProvider,
        opts: &AssembleOpts,
    ) -> Result<Self> {
        let zset = match kind {
            ZetaKind::Standard => WordSet::Standard,
            ZetaKind::Refined { tau } => WordSet::Refined { tau },
        };
        let plan = AssemblyPlan::new(g, &zset, rep, opts)?;
        Ok(ZetaFunction { kind, plan, degree: opts.degree })
    }

    pub fn kind(&self) -> ZetaKind {
        self.kind
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim_v(&self) -> usize {
        self.plan.dim_v()
    }

    pub fn value(&self, s: C64) -> Result<C64> {
        if self.plan.dim_v() == 0 {
            return Ok(C64::new(1.0, 0.0));
        }
        let a = self.plan.matrix(s)?.matrix;
        let m = match self.kind {
            ZetaKind::Standard => a.one_minus(),
            ZetaKind::Refined { .. } => a.mul(&a).one_minus(),
        };
        Ok(m.lu()?.det())
    }

    /// zeta'(s)/zeta(s) = -tr((1-A)^{-1} A') for the standard kind and
    /// -tr((1-A^2)^{-1}(A'A + AA')) for the refined kind.
    pub fn log_derivative(&self, s: C64) -> Result<C64> {
        Ok(self.value_and_log_derivative(s)?.1)
    }

    pub fn value_and_log_derivative(&self, s: C64) -> Result<(C64, C64)> {
        if self.plan.dim_v() == 0 {
            return Ok((C64::new(1.0, 0.0), C64::new(0.0, 0.0)));
        }
        let (a, da) = self.plan.matrix_pair(s)?;
        let (a, da) = (a.matrix, da.matrix);
        let (m, rhs): (CMatrix, CMatrix) = match self.kind {
            ZetaKind::Standard => (a.one_minus(), da),
            ZetaKind::Refined { .. } => {
                let a2 = a.mul(&a);
                let rhs = da.mul(&a).add(&a.mul(&da));
                (a2.one_minus(), rhs)
            }
        };
        let lu = m.lu()?;
        let det = lu.det();
        if det.norm() == 0.0 {
            return Err(Error::SingularMatrix(s));
        }
        let inv = lu.inverse().map_err(|_| Error::SingularMatrix(s))?;
        let ld = -inv.trace_product(&rhs);
        Ok((det, ld))
    }
}

/// Evaluate det(1 - L) (standard) or det(1 - L^2) (refined) at one point.
pub fn evaluate(
    kind: ZetaKind,
    s: C64,
    rep: &RepProvider,
    g: &SchottkyData,
    degree: usize,
) -> Result<C64> {
    ZetaFunction::new(g, kind, rep, degree)?.value(s)
}

pub fn log_derivative(
    kind: ZetaKind,
    s: C64,
    rep: &RepProvider,
    g: &SchottkyData,
    degree: usize,
) -> Result<C64> {
    ZetaFunction::new(g, kind, rep, degree)?.log_derivative(s)
}

/// Counting region: an axis-aligned rectangle or a disk.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Region {
    Rect { re_min: f64, re_max: f64, im_min: f64, im_max: f64 },
    Disk { center_re: f64, center_im: f64, radius: f64 },
}

impl Region {
    pub fn rect(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Region {
        Region::Rect { re_min, re_max, im_min, im_max }
    }

    pub fn disk(center: C64, radius: f64) -> Region {
        Region::Disk { center_re: center.re, center_im: center.im, radius }
    }

    pub fn contains(&self, s: C64) -> bool {
        match *self {
            Region::Rect { re_min, re_max, im_min, im_max } => {
                s.re >= re_min && s.re <= re_max && s.im >= im_min && s.im <= im_max
            }
            Region::Disk { center_re, center_im, radius } => {
                (s - C64::new(center_re, center_im)).norm() <= radius
            }
        }
    }

    pub fn center(&self) -> C64 {
        match *self {
            Region::Rect { re_min, re_max, im_min, im_max } => {
                C64::new(0.5 * (re_min + re_max), 0.5 * (im_min + im_max))
            }
            Region::Disk { center_re, center_im, .. } => C64::new(center_re, center_im),
        }
    }

    /// Scale about the center by `factor`.
    pub fn dilate(&self, factor: f64) -> Region {
        match *self {
            Region::Rect { re_min, re_max, im_min, im_max } => {
                let c = self.center();
                let hw = 0.5 * (re_max - re_min) * factor;
                let hh = 0.5 * (im_max - im_min) * factor;
                Region::rect(c.re - hw, c.re + hw, c.im - hh, c.im + hh)
            }
            Region::Disk { center_re, center_im, radius } => {
                Region::Disk { center_re, center_im, radius: radius * factor }
            }
        }
    }

    fn bounding_rect(&self) -> (f64, f64, f64, f64) {
        match *self {
            Region::Rect { re_min, re_max, im_min, im_max } => (re_min, re_max, im_min, im_max),
            Region::Disk { center_re, center_im, radius } => (
                center_re - radius,
                center_re + radius,
                center_im - radius,
                center_im + radius,
            ),
        }
    }
}

/// Shared evaluation cache keyed by the bit pattern of s; winding integrals
/// revisit nodes across refinement levels and subdivision cells.
struct EvalCache<'z> {
    zeta: &'z ZetaFunction,
    values: RefCell<HashMap<(u64, u64), C64>>,
    pairs: RefCell<HashMap<(u64, u64), (C64, C64)>>,
}

fn key(s: C64) -> (u64, u64) {
    (s.re.to_bits(), s.im.to_bits())
}

impl<'z> EvalCache<'z> {
    fn new(zeta: &'z ZetaFunction) -> Self {
        EvalCache { zeta, values: RefCell::new(HashMap::new()), pairs: RefCell::new(HashMap::new()) }
    }

    fn batch_values(&self, pts: &[C64]) -> Result<()> {
        let missing: Vec<C64> = {
            let map = self.values.borrow();
            pts.iter().copied().filter(|s| !map.contains_key(&key(*s))).collect()
        };
        if missing.is_empty() {
            return Ok(());
        }
        let computed = par::map_slice(&missing, |s| self.zeta.value(*s));
        let mut map = self.values.borrow_mut();
        for (s, v) in missing.iter().zip(computed.into_iter()) {
            map.insert(key(*s), v?);
        }
        Ok(())
    }

    fn value(&self, s: C64) -> Result<C64> {
        if let Some(v) = self.values.borrow().get(&key(s)) {
            return Ok(*v);
        }
        let v = self.zeta.value(s)?;
        self.values.borrow_mut().insert(key(s), v);
        Ok(v)
    }

    fn batch_pairs(&self, pts: &[C64]) -> Result<()> {
        let missing: Vec<C64> = {
            let map = self.pairs.borrow();
            pts.iter().copied().filter(|s| !map.contains_key(&key(*s))).collect()
        };
        if missing.is_empty() {
            return Ok(());
        }
        let computed = par::map_slice(&missing, |s| self.zeta.value_and_log_derivative(*s));
        let mut pairs = self.pairs.borrow_mut();
        let mut values = self.values.borrow_mut();
        for (s, v) in missing.iter().zip(computed.into_iter()) {
            let (det, ld) = v?;
            pairs.insert(key(*s), (det, ld));
            values.insert(key(*s), det);
        }
        Ok(())
    }

    fn pair(&self, s: C64) -> Result<(C64, C64)> {
        if let Some(v) = self.pairs.borrow().get(&key(s)) {
            return Ok(*v);
        }
        let v = self.zeta.value_and_log_derivative(s)?;
        self.pairs.borrow_mut().insert(key(s), v);
        self.values.borrow_mut().insert(key(s), v.0);
        Ok(v)
    }
}

/// The boundary as parametrized arcs t in [0,1]: (point, velocity).
fn boundary_arcs(region: &Region) -> Vec<Box<dyn Fn(f64) -> (C64, C64)>> {
    match *region {
        Region::Rect { re_min, re_max, im_min, im_max } => {
            let corners = [
                C64::new(re_min, im_min),
                C64::new(re_max, im_min),
                C64::new(re_max, im_max),
                C64::new(re_min, im_max),
            ];
            (0..4)
                .map(|e| {
                    let a = corners[e];
                    let b = corners[(e + 1) % 4];
                    let f: Box<dyn Fn(f64) -> (C64, C64)> =
                        Box::new(move |t: f64| (a + (b - a) * t, b - a));
                    f
                })
                .collect()
        }
        Region::Disk { center_re, center_im, radius } => {
            let c = C64::new(center_re, center_im);
            vec![Box::new(move |t: f64| {
                let theta = 2.0 * PI * t;
                let e = C64::new(theta.cos(), theta.sin());
                (c + radius * e, C64::new(0.0, 2.0 * PI * radius) * e)
            })]
        }
    }
}

const WINDING_MAX_DEPTH: usize = 26;

/// Adaptive trapezoid of integrand(t) over [t0, t1] with endpoint values
/// given; refines where the two-panel estimate disagrees with one panel.
fn adaptive_trapezoid(
    f: &dyn Fn(f64) -> Result<C64>,
    t0: f64,
    t1: f64,
    f0: C64,
    f1: C64,
    tol: f64,
    depth: usize,
) -> Result<C64> {
    let tm = 0.5 * (t0 + t1);
    let fm = f(tm)?;
    let h = t1 - t0;
    let one = (f0 + f1) * (0.5 * h);
    let two = (f0 + 2.0 * fm + f1) * (0.25 * h);
    if (two - one).norm() <= tol || depth == 0 {
        return Ok(two);
    }
    let left = adaptive_trapezoid(f, t0, tm, f0, fm, 0.5 * tol, depth - 1)?;
    let right = adaptive_trapezoid(f, tm, t1, fm, f1, 0.5 * tol, depth - 1)?;
    Ok(left + right)
}

/// One pass of the log-derivative contour integral with `nodes` initial
/// trapezoid nodes spread over the boundary arcs, refined adaptively.
fn winding_pass(cache: &EvalCache, region: &Region, nodes: usize) -> Result<C64> {
    let arcs = boundary_arcs(region);
    let per_arc = (nodes / arcs.len()).max(8);
    let mut total = C64::new(0.0, 0.0);
    for arc in &arcs {
        // seed the cache in parallel at the uniform nodes
        let ts: Vec<f64> = (0..=per_arc).map(|k| k as f64 / per_arc as f64).collect();
        let pts: Vec<C64> = ts.iter().map(|&t| arc(t).0).collect();
        cache.batch_pairs(&pts)?;
        let integrand = |t: f64| -> Result<C64> {
            let (z, v) = arc(t);
            let (_, ld) = cache.pair(z)?;
            Ok(ld * v)
        };
        let tol_per_panel = 1e-4 * 2.0 * PI / (arcs.len() * per_arc) as f64;
        for k in 0..per_arc {
            let (t0, t1) = (ts[k], ts[k + 1]);
            let f0 = integrand(t0)?;
            let f1 = integrand(t1)?;
            total += adaptive_trapezoid(&integrand, t0, t1, f0, f1, tol_per_panel, WINDING_MAX_DEPTH)?;
        }
    }
    Ok(total / C64::new(0.0, 2.0 * PI))
}

fn boundary_samples(cache: &EvalCache, region: &Region, nodes: usize) -> Result<(f64, f64)> {
    let arcs = boundary_arcs(region);
    let per_arc = (nodes / arcs.len()).max(8);
    let mut pts = Vec::new();
    for arc in &arcs {
        for k in 0..per_arc {
            pts.push(arc(k as f64 / per_arc as f64).0);
        }
    }
    cache.batch_values(&pts)?;
    let mut min = f64::INFINITY;
    let mut max: f64 = 0.0;
    for p in pts {
        let v = cache.value(p)?.norm();
        min = min.min(v);
        max = max.max(v);
    }
    Ok((min, max))
}

pub const DEFAULT_CONTOUR_NODES: usize = 256;

/// Argument-principle count of zeros inside the region:
/// (1/2 pi i) of the log-derivative integral by trapezoid nodes, doubled
/// until stable. A suspected zero on the boundary dilates the region by 1%
/// once before failing.
pub fn count_zeros(zeta: &ZetaFunction, region: &Region, nodes: usize) -> Result<usize> {
    let cache = EvalCache::new(zeta);
    let (count, _, _) = count_zeros_cached(&cache, region, nodes)?;
    Ok(count)
}

fn count_zeros_cached(
    cache: &EvalCache,
    region: &Region,
    nodes: usize,
) -> Result<(usize, f64, Region)> {
    let mut reg = *region;
    for attempt in 0..2 {
        let (min, max) = boundary_samples(cache, &reg, nodes)?;
        if max == 0.0 || min < 1e-10 * max {
            if attempt == 0 {
                reg = reg.dilate(1.01);
                continue;
            }
            return Err(Error::BoundaryZeroSuspected(min / max.max(1e-300)));
        }
        let mut n = nodes.max(16);
        let mut prev: Option<C64> = None;
        loop {
            let w = winding_pass(cache, &reg, n)?;
            if let Some(p) = prev {
                if (w - p).norm() < 5e-4 {
                    let rounded = w.re.round();
                    let dist = (w - rounded).norm();
                    if dist > 1e-3 || rounded < -0.5 {
                        return Err(Error::NonIntegerWinding(w.re));
                    }
                    return Ok((rounded as usize, max, reg));
                }
            }
            prev = Some(w);
            n *= 2;
            if n > 32 * nodes.max(256) {
                return Err(Error::NonIntegerWinding(w.re));
            }
        }
    }
    unreachable!()
}

/// Integer winding by tracking the continuous argument of zeta along the
/// boundary; only needs determinant values, so it is the cheap engine behind
/// subdivision. Steps where the argument jumps too fast are bisected.
fn winding_by_argument(cache: &EvalCache, region: &Region, nodes: usize) -> Result<i64> {
    let arcs = boundary_arcs(region);
    let per_arc = (nodes / arcs.len()).max(8);
    let mut total = 0.0f64;
    for arc in &arcs {
        let ts: Vec<f64> = (0..=per_arc).map(|k| k as f64 / per_arc as f64).collect();
        let pts: Vec<C64> = ts.iter().map(|&t| arc(t).0).collect();
        cache.batch_values(&pts)?;
        for k in 0..per_arc {
            total += arg_change(cache, arc, ts[k], ts[k + 1], 0)?;
        }
    }
    let w = total / (2.0 * PI);
    if (w - w.round()).abs() > 5e-3 {
        return Err(Error::NonIntegerWinding(w));
    }
    Ok(w.round() as i64)
}

fn arg_change(
    cache: &EvalCache,
    arc: &dyn Fn(f64) -> (C64, C64),
    t0: f64,
    t1: f64,
    depth: usize,
) -> Result<f64> {
    let z0 = arc(t0).0;
    let z1 = arc(t1).0;
    let v0 = cache.value(z0)?;
    let v1 = cache.value(z1)?;
    if v0.norm() == 0.0 || v1.norm() == 0.0 {
        return Err(Error::BoundaryZeroSuspected(0.0));
    }
    let delta = (v1 / v0).arg();
    if delta.abs() <= 2.2 {
        return Ok(delta);
    }
    if depth >= 40 {
        return Err(Error::BoundaryZeroSuspected(v0.norm().min(v1.norm())));
    }
    let tm = 0.5 * (t0 + t1);
    Ok(arg_change(cache, arc, t0, tm, depth + 1)? + arg_change(cache, arc, tm, t1, depth + 1)?)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LocatedZero {
    pub re: f64,
    pub im: f64,
    pub multiplicity: usize,
    /// |zeta| at the zero relative to the boundary maximum.
    pub residual: f64,
}

impl LocatedZero {
    pub fn position(&self) -> C64 {
        C64::new(self.re, self.im)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ZeroReport {
    pub region: Region,
    pub winding: usize,
    pub zeros: Vec<LocatedZero>,
}

impl ZeroReport {
    pub fn multiplicity_sum(&self) -> usize {
        self.zeros.iter().map(|z| z.multiplicity).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("zero report serialization")
    }
}

const LOCATE_MAX_DEPTH: usize = 48;

/// Subdivision plus Newton localization of every zero in the region.
/// Multiplicities come from cell windings; Newton runs on the logarithmic
/// derivative, so multiple zeros converge as fast as simple ones.
pub fn locate_zeros(zeta: &ZetaFunction, region: &Region, tol: f64) -> Result<ZeroReport> {
    let cache = EvalCache::new(zeta);
    let (count, boundary_max, reg) = count_zeros_cached(&cache, region, DEFAULT_CONTOUR_NODES)?;
    if count == 0 {
        return Ok(ZeroReport { region: reg, winding: 0, zeros: Vec::new() });
    }
    let (re_min, re_max, im_min, im_max) = reg.bounding_rect();
    let mut found: Vec<(C64, usize)> = Vec::new();
    subdivide(&cache, (re_min, re_max, im_min, im_max), tol, LOCATE_MAX_DEPTH, &mut found)?;

    // keep zeros inside the (possibly dilated) region; a disk's bounding box
    // may contain zeros outside the disk itself
    found.retain(|(z, _)| reg.contains(*z) || dist_to_region(&reg, *z) < 10.0 * tol);

    // merge duplicates found from adjacent cells
    found.sort_by(|a, b| (a.0.re, a.0.im).partial_cmp(&(b.0.re, b.0.im)).unwrap());
    let mut zeros: Vec<(C64, usize)> = Vec::new();
    for (z, m) in found {
        if let Some(last) = zeros.last_mut() {
            if (last.0 - z).norm() < 20.0 * tol {
                last.1 += m;
                continue;
            }
        }
        zeros.push((z, m));
    }

    let total: usize = zeros.iter().map(|(_, m)| m).sum();
    if total != count {
        return Err(Error::MaxDepthExceeded);
    }
    let mut out = Vec::with_capacity(zeros.len());
    for (z, m) in zeros {
        let v = cache.value(z)?.norm();
        out.push(LocatedZero { re: z.re, im: z.im, multiplicity: m, residual: v / boundary_max });
    }
    Ok(ZeroReport { region: reg, winding: count, zeros: out })
}

fn dist_to_region(region: &Region, z: C64) -> f64 {
    match *region {
        Region::Rect { re_min, re_max, im_min, im_max } => {
            let dx = (re_min - z.re).max(0.0).max(z.re - re_max);
            let dy = (im_min - z.im).max(0.0).max(z.im - im_max);
            (dx * dx + dy * dy).sqrt()
        }
        Region::Disk { center_re, center_im, radius } => {
            ((z - C64::new(center_re, center_im)).norm() - radius).max(0.0)
        }
    }
}

/// Cell winding; when a zero hugs the frame, a slightly grown frame is used
/// instead (downstream consistency checks catch any resulting miscount).
fn cell_winding(cache: &EvalCache, region: &Region) -> Result<i64> {
    match winding_by_argument(cache, region, 32) {
        Ok(m) => Ok(m),
        Err(Error::BoundaryZeroSuspected(_)) => {
            match winding_by_argument(cache, &region.dilate(1.013), 64) {
                Ok(m) => Ok(m),
                Err(Error::BoundaryZeroSuspected(_)) => {
                    winding_by_argument(cache, &region.dilate(1.029), 64)
                }
                Err(e) => Err(e),
            }
        }
        Err(e) => Err(e),
    }
}

fn retryable(e: &Error) -> bool {
    matches!(
        e,
        Error::BoundaryZeroSuspected(_)
            | Error::NewtonDiverged(_)
            | Error::MaxDepthExceeded
            | Error::NonIntegerWinding(_)
    )
}

/// Recursive bisection with backtracking: a cut that lands on (or too close
/// to) a zero poisons its subtree, which shows up as a localization failure
/// downstream; the parent then retries with a different cut fraction.
fn subdivide(
    cache: &EvalCache,
    cell: (f64, f64, f64, f64),
    tol: f64,
    depth: usize,
    out: &mut Vec<(C64, usize)>,
) -> Result<()> {
    let (re_min, re_max, im_min, im_max) = cell;
    let region = Region::rect(re_min, re_max, im_min, im_max);
    let m = cell_winding(cache, &region)?;
    if m <= 0 {
        return Ok(());
    }
    let diag = ((re_max - re_min).powi(2) + (im_max - im_min).powi(2)).sqrt();
    let must_leaf = diag < 64.0 * tol || depth == 0;
    if m == 1 || must_leaf {
        match newton_refine(cache, &region, m as usize, tol) {
            Ok(z) if dist_to_region(&region, z) <= 0.2 * diag + 30.0 * tol => {
                out.push((z, m as usize));
                return Ok(());
            }
            Ok(z) => {
                if must_leaf {
                    return Err(Error::NewtonDiverged(z));
                }
                // escaped the cell: the zero hugs an edge; isolate by splitting
            }
            Err(e) => {
                if must_leaf || !retryable(&e) {
                    return Err(e);
                }
            }
        }
    }
    let horizontal = (re_max - re_min) >= (im_max - im_min);
    for frac in [0.5, 0.46, 0.54, 0.42, 0.58, 0.38, 0.62] {
        let (ca, cb) = if horizontal {
            let mid = re_min + frac * (re_max - re_min);
            ((re_min, mid, im_min, im_max), (mid, re_max, im_min, im_max))
        } else {
            let mid = im_min + frac * (im_max - im_min);
            ((re_min, re_max, im_min, mid), (re_min, re_max, mid, im_max))
        };
        let wa = cell_winding(cache, &Region::rect(ca.0, ca.1, ca.2, ca.3));
        let wb = cell_winding(cache, &Region::rect(cb.0, cb.1, cb.2, cb.3));
        if let (Ok(wa), Ok(wb)) = (wa, wb) {
            if wa + wb != m {
                continue;
            }
            let mut out_a = Vec::new();
            let mut out_b = Vec::new();
            let ra = subdivide(cache, ca, tol, depth - 1, &mut out_a);
            let rb = match &ra {
                Ok(()) => subdivide(cache, cb, tol, depth - 1, &mut out_b),
                Err(_) => Ok(()),
            };
            match (ra, rb) {
                (Ok(()), Ok(())) => {
                    out.extend(out_a);
                    out.extend(out_b);
                    return Ok(());
                }
                (Err(e), _) | (_, Err(e)) if !retryable(&e) => return Err(e),
                _ => continue,
            }
        }
    }
    Err(Error::MaxDepthExceeded)
}

fn newton_refine(cache: &EvalCache, cell: &Region, multiplicity: usize, tol: f64) -> Result<C64> {
    let mut s = cell.center();
    let (re_min, re_max, im_min, im_max) = cell.bounding_rect();
    let limit = 3.0 * ((re_max - re_min) + (im_max - im_min));
    let m = multiplicity as f64;
    for _ in 0..80 {
        let (_, ld) = cache.pair(s)?;
        if !ld.is_finite() || ld.norm() == 0.0 {
            return Err(Error::NewtonDiverged(s));
        }
        let step = m / ld;
        s -= step;
        if !s.is_finite() || dist_to_region(&Region::rect(re_min, re_max, im_min, im_max), s) > limit
        {
            return Err(Error::NewtonDiverged(s));
        }
        if step.norm() < tol {
            return Ok(s);
        }
    }
    Err(Error::NewtonDiverged(s))
}

/// Topological pressure at real sigma: log of the leading eigenvalue of the
/// two-letter trivial-twist matrix. The eigenvalue must come out real
/// positive (Perron), otherwise the truncation is too small.
pub fn pressure(sigma: f64, g: &SchottkyData, degree: usize) -> Result<f64> {
    let plan = AssemblyPlan::new(g, &WordSet::Standard, &RepProvider::trivial(), &AssembleOpts::with_degree(degree))?;
    pressure_with_plan(&plan, sigma)
}

fn pressure_with_plan(plan: &AssemblyPlan, sigma: f64) -> Result<f64> {
    let a = plan.matrix(C64::new(sigma, 0.0))?.matrix;
    let eigs = a.eigenvalues()?;
    let lead = eigs
        .iter()
        .copied()
        .max_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap())
        .unwrap_or(C64::new(0.0, 0.0));
    if lead.re <= 0.0 || lead.im.abs() > 1e-8 * lead.norm().max(1e-300) {
        return Err(Error::PerronViolation(lead));
    }
    Ok(lead.norm().ln())
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DimensionEstimate {
    pub delta: f64,
    /// width of the final root bracket
    pub bracket: f64,
    pub pressure_residual: f64,
}

/// Hausdorff dimension of the limit set as the unique zero of the pressure
/// on (0, 1): bisection to a tight bracket, then secant to |P| < tol.
pub fn hausdorff_dimension(g: &SchottkyData, tol: f64, degree: usize) -> Result<DimensionEstimate> {
    let plan = AssemblyPlan::new(g, &WordSet::Standard, &RepProvider::trivial(), &AssembleOpts::with_degree(degree))?;
    let p0 = pressure_with_plan(&plan, 0.0)?;
    let p1 = pressure_with_plan(&plan, 1.0)?;
    if p0 <= 0.0 || p1 >= 0.0 {
        return Err(Error::NoSignChange { p0, p1 });
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut flo = p0;
    let mut fhi = p1;
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        let fmid = pressure_with_plan(&plan, mid)?;
        if fmid > 0.0 {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
            fhi = fmid;
        }
        if fmid.abs() < tol {
            break;
        }
    }
    // secant polish inside the bracket
    let mut a = lo;
    let mut fa = flo;
    let mut b = hi;
    let mut fb = fhi;
    let mut best = if fa.abs() < fb.abs() { (a, fa) } else { (b, fb) };
    for _ in 0..60 {
        if best.1.abs() < tol {
            break;
        }
        let mut x = b - fb * (b - a) / (fb - fa);
        if !(x > lo && x < hi) {
            x = 0.5 * (a + b);
        }
        let fx = pressure_with_plan(&plan, x)?;
        if fx.abs() < best.1.abs() {
            best = (x, fx);
        }
        if (fa > 0.0) == (fx > 0.0) {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
        if (b - a).abs() < 1e-15 {
            break;
        }
    }
    if best.1.abs() > tol {
        return Err(Error::QuadratureNotConverged(best.1.abs()));
    }
    Ok(DimensionEstimate { delta: best.0, bracket: (b - a).abs(), pressure_residual: best.1 })
}

/// Primitive closed-geodesic lengths up to word length `max_word_len`.
/// Classes are cyclically reduced words up to rotation (lexicographically
/// minimal rotation as representative), excluding proper powers; a class and
/// its mirror class are distinct and both enumerated. Every class must be
/// hyperbolic: l = 2 arccosh(|tr|/2) > 0.
pub fn geodesic_length_spectrum(g: &SchottkyData, max_word_len: usize) -> Result<Vec<f64>> {
    let r = g.rank();
    let two_r = g.alphabet_size() as u8;
    let mut lengths = Vec::new();
    let mut seq: Vec<u8> = Vec::with_capacity(max_word_len);
    let mut mats: Vec<crate::schottky::Mat2> = Vec::with_capacity(max_word_len + 1);
    mats.push(crate::schottky::Mat2::identity());

    fn is_minimal_rotation(seq: &[u8]) -> bool {
        let n = seq.len();
        for shift in 1..n {
            for i in 0..n {
                let a = seq[i];
                let b = seq[(i + shift) % n];
                if b < a {
                    return false;
                }
                if b > a {
                    break;
                }
            }
        }
        true
    }

    fn is_primitive(seq: &[u8]) -> bool {
        let n = seq.len();
        for p in 1..n {
            if n % p == 0 && (0..n).all(|i| seq[i] == seq[(i + p) % n]) {
                return false;
            }
        }
        true
    }

    #[allow(clippy::too_many_arguments)]
    fn rec(
        g: &SchottkyData,
        r: usize,
        two_r: u8,
        max_len: usize,
        seq: &mut Vec<u8>,
        mats: &mut Vec<crate::schottky::Mat2>,
        lengths: &mut Vec<f64>,
    ) -> Result<()> {
        let depth = seq.len();
        if depth > 0 {
            // closed admissibility: wrap pair must also be admissible
            let first = seq[0];
            let last = seq[depth - 1];
            if first != bar(last, r) && is_minimal_rotation(seq) && is_primitive(seq) {
                let tr = mats[depth].trace().abs();
                if tr <= 2.0 {
                    return Err(Error::InvalidGroup(format!(
                        "non-hyperbolic class {:?} with |tr| = {tr}",
                        seq
                    )));
                }
                let half = tr / 2.0;
                lengths.push(2.0 * (half + (half * half - 1.0).sqrt()).ln());
            }
        }
        if depth == max_len {
            return Ok(());
        }
        let start = if depth == 0 { 1 } else { seq[0] };
        for x in start..=two_r {
            if depth > 0 && x == bar(seq[depth - 1], r) {
                continue;
            }
            seq.push(x);
            mats.push(mats[depth].mul(g.generator(x)));
            rec(g, r, two_r, max_len, seq, mats, lengths)?;
            mats.pop();
            seq.pop();
        }
        Ok(())
    }

    rec(g, r, two_r, max_word_len, &mut seq, &mut mats, &mut lengths)?;
    lengths.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(lengths)
}

pub const DEFAULT_EULER_K_MAX: usize = 20;

/// Euler product over the enumerated primitive classes, truncated at word
/// length `max_word_len` and k <= k_max. Valid for Re s > delta + 0.1.
pub fn euler_product_zeta(
    s: C64,
    g: &SchottkyData,
    max_word_len: usize,
    k_max: usize,
) -> Result<C64> {
    let delta = hausdorff_dimension(g, 1e-8, 16)?.delta;
    if s.re <= delta + 0.1 {
        return Err(Error::ConvergenceRegionViolated(s.re));
    }
    let lengths = geodesic_length_spectrum(g, max_word_len)?;
    Ok(euler_product_from_lengths(s, &lengths, k_max))
}

/// The product with a precomputed length spectrum; accumulates logs to keep
/// a million near-unit factors stable.
pub fn euler_product_from_lengths(s: C64, lengths: &[f64], k_max: usize) -> C64 {
    let mut log_total = C64::new(0.0, 0.0);
    for &l in lengths {
        for k in 0..=k_max {
            let w = (-(s + k as f64) * l).exp();
            if w.norm() < 1e-17 {
                break;
            }
            log_total += (C64::new(1.0, 0.0) - w).ln();
        }
    }
    log_total.exp()
}

/// Max over sample points of |zeta_std - zeta_triv * zeta_std0| /
/// max(1, |zeta_std|) for the cover defined by `rep`.
pub fn factorization_residual(
    rep: &PermutationRep,
    samples: &[C64],
    g: &SchottkyData,
    degree: usize,
) -> Result<f64> {
    let z_std = ZetaFunction::new(g, ZetaKind::Standard, &RepProvider::std(rep.clone()), degree)?;
    let z_triv = ZetaFunction::new(g, ZetaKind::Standard, &RepProvider::trivial(), degree)?;
    let z_std0 = ZetaFunction::new(g, ZetaKind::Standard, &RepProvider::std0(rep.clone()), degree)?;
    let mut worst: f64 = 0.0;
    for &s in samples {
        let full = z_std.value(s)?;
        let base = z_triv.value(s)?;
        let new = z_std0.value(s)?;
        let residual = (full - base * new).norm() / full.norm().max(1.0);
        worst = worst.max(residual);
    }
    Ok(worst)
}
