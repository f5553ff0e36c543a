//! Finite-rank Galerkin truncation of the twisted transfer operators on the
//! vector-valued Bergman space of the disk union, the explicit Bergman
//! kernel, and Hilbert-Schmidt norms via two independent routes (Frobenius
//! norm of the truncated matrix, and direct kernel quadrature).
//!
//! Matrix indices are blocked (rep coordinate, disk, Taylor degree) with the
//! rep coordinate slowest: index = coord * 2r(M+1) + disk * (M+1) + degree.
//! Entries are inner products against the orthonormal basis, so the
//! Frobenius norm of the matrix is the truncated Hilbert-Schmidt norm.

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, RMatrix};
use crate::par;
use crate::permrep::{act, PermutationRep};
use crate::schottky::{mobius_jet, SchottkyData};
use crate::util::gauss_legendre;
use crate::words::{group_element, mirror_partition, multiply_reduced, Word};
use num_complex::Complex64 as C64;
use std::f64::consts::PI;
use std::io::Write;

/// Principal-branch complex power. The branch cut on the negative real axis
/// must not be hit: derivative weights of admissible branches never land
/// there, so a hit signals a bug or invalid group data.
pub fn complex_power(base: C64, s: C64) -> Result<C64> {
    if base.re <= 0.0 && base.im.abs() <= 1e-14 * (1.0 + base.re.abs()) {
        return Err(Error::BranchCutHit(base));
    }
    Ok((s * base.ln()).exp())
}

/// Closed-form Bergman kernel of the disk D_a (center real):
/// r^2 / (pi [r^2 - (conj(x2) - c)(x1 - c)]^2).
pub fn bergman_kernel(g: &SchottkyData, disk: u8, x1: C64, x2: C64) -> Result<C64> {
    if !g.disk_contains(disk, x1) || !g.disk_contains(disk, x2) {
        return Err(Error::OutsideDisk(disk as usize));
    }
    Ok(bergman_kernel_unchecked(g.center(disk), g.radius(disk), x1, x2))
}

#[inline]
fn bergman_kernel_unchecked(c: f64, r: f64, x1: C64, x2: C64) -> C64 {
    let r2 = r * r;
    let w = r2 - (x2.conj() - c) * (x1 - c);
    r2 / (PI * w * w)
}

/// Orthonormal monomial basis of the disk Bergman spaces:
/// e_{a,m}(z) = sqrt((m+1)/(pi r_a^2)) ((z - c_a)/r_a)^m.
#[derive(Clone, Copy, Debug)]
pub struct BergmanBasis {
    pub degree: usize,
}

impl BergmanBasis {
    pub fn new(degree: usize) -> Self {
        BergmanBasis { degree }
    }

    pub fn eval(&self, g: &SchottkyData, disk: u8, m: usize, z: C64) -> C64 {
        let c = g.center(disk);
        let r = g.radius(disk);
        let u = (z - c) / r;
        ((m as f64 + 1.0) / (PI * r * r)).sqrt() * u.powu(m as u32)
    }

    /// Partial kernel sum over degrees 0..=degree; converges to the closed
    /// form inside the disk.
    pub fn partial_kernel_sum(&self, g: &SchottkyData, disk: u8, x1: C64, x2: C64) -> C64 {
        (0..=self.degree)
            .map(|m| self.eval(g, disk, m, x1) * self.eval(g, disk, m, x2).conj())
            .sum()
    }
}

/// Unitary (here real orthogonal) representation data usable as the twist.
/// The standard-minus-trivial variant is realized by conjugating the
/// permutation matrix with a fixed orthonormal basis of the all-ones
/// complement, so results are bit-stable across runs.
#[derive(Clone, Debug)]
pub enum RepProvider {
    Trivial,
    Std { rep: PermutationRep },
    Std0 { rep: PermutationRep, complement: RMatrix },
}

/// Deterministic orthonormal basis of the complement of the all-ones vector
/// in R^n: column k-1 is (1,...,1,-k,0,...,0)/sqrt(k(k+1)) with k leading
/// ones.
pub fn complement_basis(n: usize) -> RMatrix {
    let mut q = RMatrix::zeros(n, n.saturating_sub(1));
    for k in 1..n {
        let norm = ((k * (k + 1)) as f64).sqrt();
        for i in 0..k {
            q.set(i, k - 1, 1.0 / norm);
        }
        q.set(k, k - 1, -(k as f64) / norm);
    }
    q
}

impl RepProvider {
    pub fn trivial() -> Self {
        RepProvider::Trivial
    }

    pub fn std(rep: PermutationRep) -> Self {
        RepProvider::Std { rep }
    }

    pub fn std0(rep: PermutationRep) -> Self {
        let complement = complement_basis(rep.n());
        RepProvider::Std0 { rep, complement }
    }

    pub fn dim(&self) -> usize {
        match self {
            RepProvider::Trivial => 1,
            RepProvider::Std { rep } => rep.n(),
            RepProvider::Std0 { rep, .. } => rep.n() - 1,
        }
    }

    pub fn label(&self) -> String {
        match self {
            RepProvider::Trivial => "trivial".into(),
            RepProvider::Std { rep } => format!("std(n={})", rep.n()),
            RepProvider::Std0 { rep, .. } => format!("std0(n={})", rep.n()),
        }
    }

    /// Matrix of the representation at the group element encoded by `w`.
    pub fn evaluate(&self, w: &Word) -> Result<RMatrix> {
        match self {
            RepProvider::Trivial => Ok(RMatrix::identity(1)),
            RepProvider::Std { rep } => {
                let p = act(rep, w)?;
                let n = rep.n();
                let mut m = RMatrix::zeros(n, n);
                for (j, &pj) in p.iter().enumerate() {
                    m.set(pj as usize, j, 1.0);
                }
                Ok(m)
            }
            RepProvider::Std0 { rep, complement } => {
                let p = act(rep, w)?;
                let n = rep.n();
                // rows of P*Q are rows of Q through the inverse permutation
                let mut pq = RMatrix::zeros(n, n - 1);
                for j in 0..n {
                    let row = p[j] as usize;
                    for c in 0..n - 1 {
                        pq.set(row, c, complement.get(j, c));
                    }
                }
                Ok(complement.transpose().mul(&pq))
            }
        }
    }

    /// Character at the element encoded by `w` (trace of `evaluate`, but
    /// computed from fixed points where possible).
    pub fn character(&self, w: &Word) -> Result<f64> {
        match self {
            RepProvider::Trivial => Ok(1.0),
            RepProvider::Std { rep } => {
                let p = act(rep, w)?;
                Ok(p.iter().enumerate().filter(|(i, &v)| *i == v as usize).count() as f64)
            }
            RepProvider::Std0 { rep, .. } => Ok(crate::permrep::character_std0(rep, w)? as f64),
        }
    }
}

/// The word set the operator sums over.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WordSet {
    /// All two-letter words; the basic transfer operator.
    Standard,
    /// The mirror partition Zbar(tau); requires all members of length >= 2.
    Refined { tau: f64 },
}

impl WordSet {
    pub fn words(&self, g: &SchottkyData) -> Result<Vec<Word>> {
        match *self {
            WordSet::Standard => {
                let mut out = Vec::new();
                crate::words::enumerate_words(g.rank(), 2, |letters| {
                    if letters.len() == 2 {
                        out.push(Word::from_vec_unchecked(letters.to_vec()));
                    }
                });
                Ok(out)
            }
            WordSet::Refined { tau } => {
                let words = mirror_partition(tau, g)?;
                if words.iter().any(|w| w.len() < 2) {
                    return Err(Error::RefinedWordSetTooCoarse(tau));
                }
                Ok(words)
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct AssembleOpts {
    /// Taylor degree cap per disk.
    pub degree: usize,
    /// Circle sample count; defaults to max(64, 4(degree+1)).
    pub samples: Option<usize>,
    /// Evaluation circle ratio.
    pub beta: f64,
    /// Promote the trailing-coefficient-mass warning to an error.
    pub strict: bool,
}

impl Default for AssembleOpts {
    fn default() -> Self {
        AssembleOpts { degree: 16, samples: None, beta: 0.7, strict: false }
    }
}

impl AssembleOpts {
    pub fn with_degree(degree: usize) -> Self {
        AssembleOpts { degree, ..Default::default() }
    }

    fn resolved_samples(&self) -> usize {
        self.samples.unwrap_or_else(|| 64usize.max(4 * (self.degree + 1)))
    }
}

pub const TRAILING_MASS_LIMIT: f64 = 1e-8;

/// Galerkin matrix of the transfer operator at one value of s.
#[derive(Clone, Debug)]
pub struct TransferMatrix {
    pub matrix: CMatrix,
    pub s: C64,
    pub degree: usize,
    pub dim_v: usize,
    pub disks: usize,
    pub derivative: bool,
    /// squared-norm fraction carried by the top Taylor degree
    pub trailing_mass: f64,
    pub truncation_warning: bool,
}

impl TransferMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// Binary dump: 32-byte header of little-endian u64 (rows, cols, degree,
    /// dimV) followed by row-major little-endian complex doubles.
    pub fn write_binary(&self, path: &std::path::Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        let n = self.matrix.dim() as u64;
        for v in [n, n, self.degree as u64, self.dim_v as u64] {
            f.write_all(&v.to_le_bytes())?;
        }
        for i in 0..self.matrix.dim() {
            for j in 0..self.matrix.dim() {
                let z = self.matrix.get(i, j);
                f.write_all(&z.re.to_le_bytes())?;
                f.write_all(&z.im.to_le_bytes())?;
            }
        }
        Ok(())
    }
}

struct PlanWord {
    src: usize,
    dst: usize,
    rep: RMatrix,
    /// principal log of the prefix derivative at each circle node
    log_deriv: Vec<C64>,
    /// basis[m * samples + k] = e_{src,m}(gamma_{w'}(x_k))
    basis: Vec<C64>,
}

/// s-independent assembly data: per-word node jets and representation
/// blocks, plus the Fourier recovery matrix. Building the operator at a new
/// value of s is then a small dense update per word.
pub struct AssemblyPlan {
    degree: usize,
    samples: usize,
    dim_v: usize,
    disks: usize,
    strict: bool,
    words: Vec<PlanWord>,
    /// fourier[mp * samples + k] = conj(omega^{mp k}) / K * beta^{-mp}
    fourier: Vec<C64>,
    /// row_scale[disk * (degree+1) + mp] = sqrt(pi r_disk^2 / (mp+1))
    row_scale: Vec<f64>,
}

impl AssemblyPlan {
    pub fn new(
        g: &SchottkyData,
        zset: &WordSet,
        rep: &RepProvider,
        opts: &AssembleOpts,
    ) -> Result<Self> {
        Self::from_words(g, &zset.words(g)?, rep, opts)
    }

    pub fn from_words(
        g: &SchottkyData,
        words: &[Word],
        rep: &RepProvider,
        opts: &AssembleOpts,
    ) -> Result<Self> {
        let degree = opts.degree;
        let samples = opts.resolved_samples();
        if samples < 4 * (degree + 1) {
            return Err(Error::InvalidConfig(format!(
                "need at least 4(degree+1) = {} circle samples, got {samples}",
                4 * (degree + 1)
            )));
        }
        let disks = g.alphabet_size();
        let dim_v = rep.dim();
        let r = g.rank();

        let mut fourier = vec![C64::new(0.0, 0.0); (degree + 1) * samples];
        for mp in 0..=degree {
            let beta_pow = opts.beta.powi(-(mp as i32));
            for k in 0..samples {
                let theta = 2.0 * PI * (mp * k % samples) as f64 / samples as f64;
                fourier[mp * samples + k] =
                    C64::new(theta.cos(), -theta.sin()) * (beta_pow / samples as f64);
            }
        }
        let mut row_scale = vec![0.0; disks * (degree + 1)];
        for d in 0..disks {
            let rad = g.radius(d as u8 + 1);
            for mp in 0..=degree {
                row_scale[d * (degree + 1) + mp] = (PI * rad * rad / (mp as f64 + 1.0)).sqrt();
            }
        }

        // node geometry is s-independent; compute it once per word
        let built: Vec<Result<PlanWord>> = par::map_slice(words, |w| {
            let src = w.first().expect("nonempty word") as usize - 1;
            let dst = w.last().expect("nonempty word") as usize - 1;
            let prefix = group_element(&w.parent(), g);
            let rep_mat = rep.evaluate(&w.parent().mirror(r))?;
            let (cd, rd) = (g.center(dst as u8 + 1), g.radius(dst as u8 + 1));
            let (cs, rs) = (g.center(src as u8 + 1), g.radius(src as u8 + 1));
            let basis_norms: Vec<f64> =
                (0..=degree).map(|m| ((m as f64 + 1.0) / (PI * rs * rs)).sqrt()).collect();
            let mut log_deriv = Vec::with_capacity(samples);
            let mut basis = vec![C64::new(0.0, 0.0); (degree + 1) * samples];
            for k in 0..samples {
                let theta = 2.0 * PI * k as f64 / samples as f64;
                let x = C64::new(cd + opts.beta * rd * theta.cos(), opts.beta * rd * theta.sin());
                let jet = mobius_jet(&prefix, x)?;
                let f = jet.first;
                if f.re <= 0.0 && f.im.abs() <= 1e-14 * (1.0 + f.re.abs()) {
                    return Err(Error::BranchCutHit(f));
                }
                log_deriv.push(f.ln());
                let u = (jet.value - cs) / rs;
                if u.norm() >= 1.0 {
                    return Err(Error::OutsideDisk(src + 1));
                }
                let mut upow = C64::new(1.0, 0.0);
                for m in 0..=degree {
                    basis[m * samples + k] = basis_norms[m] * upow;
                    upow *= u;
                }
            }
            Ok(PlanWord { src, dst, rep: rep_mat, log_deriv, basis })
        });
        let mut plan_words = Vec::with_capacity(built.len());
        for b in built {
            plan_words.push(b?);
        }
        Ok(AssemblyPlan {
            degree,
            samples,
            dim_v,
            disks,
            strict: opts.strict,
            words: plan_words,
            fourier,
            row_scale,
        })
    }

    pub fn dim(&self) -> usize {
        self.disks * (self.degree + 1) * self.dim_v
    }

    pub fn dim_v(&self) -> usize {
        self.dim_v
    }

    /// The operator matrix at s.
    pub fn matrix(&self, s: C64) -> Result<TransferMatrix> {
        let (value, _) = self.build(s, false)?;
        Ok(value)
    }

    /// The operator matrix and its s-derivative (each summand weighted by
    /// log gamma'_{w'}), sharing the node data.
    pub fn matrix_pair(&self, s: C64) -> Result<(TransferMatrix, TransferMatrix)> {
        let (value, deriv) = self.build(s, true)?;
        Ok((value, deriv.expect("derivative requested")))
    }

    fn build(&self, s: C64, with_derivative: bool) -> Result<(TransferMatrix, Option<TransferMatrix>)> {
        let samples = self.samples;
        // coefficient blocks per word: value and optionally derivative
        let blocks: Vec<(Vec<C64>, Vec<C64>)> = par::map_slice(&self.words, |w| {
            let mut weights = Vec::with_capacity(samples);
            for &ld in &w.log_deriv {
                weights.push((s * ld).exp());
            }
            let value = self.coefficient_block(w, &weights);
            let deriv = if with_derivative {
                let dweights: Vec<C64> =
                    weights.iter().zip(w.log_deriv.iter()).map(|(w, l)| w * l).collect();
                self.coefficient_block(w, &dweights)
            } else {
                Vec::new()
            };
            (value, deriv)
        });

        let value = self.accumulate(s, &blocks)?;
        let deriv = if with_derivative {
            Some(self.accumulate_deriv(s, &blocks)?)
        } else {
            None
        };
        Ok((value, deriv))
    }

    /// block[mp * (degree+1) + m] = row_scale(dst, mp) *
    ///     sum_k fourier[mp,k] * weight[k] * basis[m,k]
    fn coefficient_block(&self, w: &PlanWord, weights: &[C64]) -> Vec<C64> {
        let mp1 = self.degree + 1;
        let samples = self.samples;
        let mut weighted = vec![C64::new(0.0, 0.0); mp1 * samples];
        for m in 0..mp1 {
            let row = &w.basis[m * samples..(m + 1) * samples];
            let out = &mut weighted[m * samples..(m + 1) * samples];
            for k in 0..samples {
                out[k] = row[k] * weights[k];
            }
        }
        let mut block = vec![C64::new(0.0, 0.0); mp1 * mp1];
        for mp in 0..mp1 {
            let four = &self.fourier[mp * samples..(mp + 1) * samples];
            let scale = self.row_scale[w.dst * mp1 + mp];
            for m in 0..mp1 {
                let src_row = &weighted[m * samples..(m + 1) * samples];
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..samples {
                    acc += four[k] * src_row[k];
                }
                block[mp * mp1 + m] = acc * scale;
            }
        }
        block
    }

    fn accumulate(&self, s: C64, blocks: &[(Vec<C64>, Vec<C64>)]) -> Result<TransferMatrix> {
        let matrix = self.accumulate_from(blocks.iter().map(|b| &b.0))?;
        let (trailing_mass, warning) = self.trailing_mass(&matrix);
        if self.strict && warning {
            return Err(Error::DegreeTooSmall(trailing_mass));
        }
        Ok(TransferMatrix {
            matrix,
            s,
            degree: self.degree,
            dim_v: self.dim_v,
            disks: self.disks,
            derivative: false,
            trailing_mass,
            truncation_warning: warning,
        })
    }

    fn accumulate_deriv(&self, s: C64, blocks: &[(Vec<C64>, Vec<C64>)]) -> Result<TransferMatrix> {
        let matrix = self.accumulate_from(blocks.iter().map(|b| &b.1))?;
        let (trailing_mass, warning) = self.trailing_mass(&matrix);
        Ok(TransferMatrix {
            matrix,
            s,
            degree: self.degree,
            dim_v: self.dim_v,
            disks: self.disks,
            derivative: true,
            trailing_mass,
            truncation_warning: warning,
        })
    }

    fn accumulate_from<'a>(
        &self,
        blocks: impl Iterator<Item = &'a Vec<C64>>,
    ) -> Result<CMatrix> {
        let mp1 = self.degree + 1;
        let p = self.disks * mp1;
        let d = p * self.dim_v;
        let mut matrix = CMatrix::zeros(d);
        let blocks: Vec<&Vec<C64>> = blocks.collect();
        if d == 0 {
            return Ok(matrix);
        }
        // each rep column index j owns a contiguous slab of p columns
        // (column-major layout), so the update parallelizes without locks
        // and sums in word order within each slab
        let words = &self.words;
        let slab_len = d * p;
        let data = matrix.data_mut();
        par::for_each_chunk(data, slab_len, |j, slab| {
            for (w, block) in words.iter().zip(blocks.iter()) {
                for i in 0..self.dim_v {
                    let rep_ij = w.rep.get(i, j);
                    if rep_ij == 0.0 {
                        continue;
                    }
                    for m in 0..mp1 {
                        let col_in_slab = w.src * mp1 + m;
                        let col_base = col_in_slab * d + i * p + w.dst * mp1;
                        let out = &mut slab[col_base..col_base + mp1];
                        for mp in 0..mp1 {
                            out[mp] += block[mp * mp1 + m] * rep_ij;
                        }
                    }
                }
            }
        });
        Ok(matrix)
    }

    /// Fraction of the squared Frobenius norm carried by rows of top Taylor
    /// degree; a proxy for the truncation error.
    fn trailing_mass(&self, matrix: &CMatrix) -> (f64, bool) {
        let mp1 = self.degree + 1;
        let p = self.disks * mp1;
        let d = matrix.dim();
        let mut top = 0.0;
        let mut total = 0.0;
        for j in 0..d {
            for i in 0..d {
                let v = matrix.get(i, j).norm_sqr();
                total += v;
                let degree_of_row = (i % p) % mp1;
                if degree_of_row == self.degree {
                    top += v;
                }
            }
        }
        if total == 0.0 {
            return (0.0, false);
        }
        let ratio = top / total;
        (ratio, ratio > TRAILING_MASS_LIMIT)
    }
}

/// One-shot assembly of the transfer operator (or its s-derivative) at s.
pub fn assemble(
    g: &SchottkyData,
    zset: &WordSet,
    s: C64,
    rep: &RepProvider,
    opts: &AssembleOpts,
    derivative: bool,
) -> Result<TransferMatrix> {
    let plan = AssemblyPlan::new(g, zset, rep, opts)?;
    if derivative {
        Ok(plan.matrix_pair(s)?.1)
    } else {
        plan.matrix(s)
    }
}

/// Truncated Hilbert-Schmidt norm: the Frobenius norm of the orthonormal-
/// basis matrix.
pub fn hs_norm_matrix(t: &TransferMatrix) -> f64 {
    t.matrix.frobenius_norm()
}

pub const HS_KERNEL_RADIAL: usize = 32;
pub const HS_KERNEL_ANGULAR: usize = 64;

/// Hilbert-Schmidt norm of the refined operator by the double word sum with
/// the Bergman-kernel integrand, integrated by polar quadrature over each
/// target disk. Independent of the Galerkin route.
pub fn hs_norm_kernel(g: &SchottkyData, tau: f64, s: C64, rep: &RepProvider) -> Result<f64> {
    let coarse = hs_norm_kernel_with_nodes(g, tau, s, rep, HS_KERNEL_RADIAL, HS_KERNEL_ANGULAR)?;
    let fine = hs_norm_kernel_with_nodes(g, tau, s, rep, 2 * HS_KERNEL_RADIAL, 2 * HS_KERNEL_ANGULAR)?;
    let denom = fine.abs().max(1e-300);
    let change = (fine - coarse).abs() / denom;
    if change > 5e-3 {
        return Err(Error::QuadratureNotConverged(change));
    }
    Ok(fine)
}

pub fn hs_norm_kernel_with_nodes(
    g: &SchottkyData,
    tau: f64,
    s: C64,
    rep: &RepProvider,
    radial: usize,
    angular: usize,
) -> Result<f64> {
    let words = WordSet::Refined { tau }.words(g)?;
    if rep.dim() == 0 {
        return Ok(0.0);
    }
    let r = g.rank();
    let prefixes: Vec<_> = words.iter().map(|w| group_element(&w.parent(), g)).collect();
    let inv_parents: Vec<Word> = words.iter().map(|w| w.parent().mirror(r)).collect();
    let parents: Vec<Word> = words.iter().map(|w| w.parent()).collect();

    // group word indices by (first letter, last letter); the Bergman kernel
    // couples only words entering the same disk from the same disk
    let mut groups: std::collections::BTreeMap<(u8, u8), Vec<usize>> = Default::default();
    for (i, w) in words.iter().enumerate() {
        groups.entry((w.first().unwrap(), w.last().unwrap())).or_default().push(i);
    }

    let (gl_nodes, gl_weights) = gauss_legendre(radial);
    let group_list: Vec<((u8, u8), Vec<usize>)> =
        groups.into_iter().map(|(k, v)| (k, v)).collect();
    let totals: Vec<Result<C64>> = par::map_slice(&group_list, |((first, last), indices)| {
        let (ca, ra) = (g.center(*first), g.radius(*first));
        let (cb, rb) = (g.center(*last), g.radius(*last));
        let mut group_total = C64::new(0.0, 0.0);
        for &i in indices.iter() {
            for &j in indices.iter() {
                let elem = multiply_reduced(&parents[i], &inv_parents[j], r);
                let character = rep.character(&elem)?;
                if character == 0.0 {
                    continue;
                }
                let mut integral = C64::new(0.0, 0.0);
                for (node, weight) in gl_nodes.iter().zip(gl_weights.iter()) {
                    let rho = 0.5 * rb * (node + 1.0);
                    let jac = weight * 0.5 * rb * rho * (2.0 * PI / angular as f64);
                    for a in 0..angular {
                        let theta = 2.0 * PI * a as f64 / angular as f64;
                        let x = C64::new(cb + rho * theta.cos(), rho * theta.sin());
                        let j1 = mobius_jet(&prefixes[i], x)?;
                        let j2 = mobius_jet(&prefixes[j], x)?;
                        let p1 = complex_power(j1.first, s)?;
                        let p2 = complex_power(j2.first, s)?.conj();
                        let kern = bergman_kernel_unchecked(ca, ra, j1.value, j2.value);
                        integral += p1 * p2 * kern * jac;
                    }
                }
                group_total += character * integral;
            }
        }
        Ok(group_total)
    });
    let mut total = C64::new(0.0, 0.0);
    for t in totals {
        total += t?;
    }
    if total.im.abs() > 1e-8 * total.re.abs().max(1e-300) && total.norm() > 1e-14 {
        return Err(Error::QuadratureNotConverged(total.im.abs() / total.re.abs().max(1e-300)));
    }
    if total.re < 0.0 && total.re > -1e-12 {
        return Ok(0.0);
    }
    Ok(total.re.sqrt())
}
