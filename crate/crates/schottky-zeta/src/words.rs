//! Word combinatorics for the Schottky alphabet {1..2r}: admissible words,
//! mirrors, nested intervals, the partitions Z(tau) and their mirror sets,
//! free-group arithmetic, proper-power decomposition, power-pair
//! classification, the UNI separation quantity, and finite-depth estimates of
//! the derivative-lemma constants.
//!
//! Letters carry their own inverses: bar(a) = a + r mod 2r, so one sequence
//! type serves both "admissible word" and "reduced group element", and free
//! cancellation is annihilation of adjacent (x, bar(x)) pairs.

use crate::error::{Error, Result};
use crate::schottky::{mobius_jet, Mat2, SchottkyData};
use num_complex::Complex64 as C64;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;

/// bar(a) = a + r mod 2r, mapped back into 1..=2r.
#[inline]
pub fn bar(letter: u8, r: usize) -> u8 {
    debug_assert!(letter >= 1 && (letter as usize) <= 2 * r);
    ((letter as usize + r - 1) % (2 * r) + 1) as u8
}

pub fn checked_bar(letter: u8, r: usize) -> Result<u8> {
    if letter == 0 || letter as usize > 2 * r {
        return Err(Error::LetterOutOfRange { letter, alphabet: 2 * r });
    }
    Ok(bar(letter, r))
}

/// An admissible word over {1..2r}: no i with letters[i+1] = bar(letters[i]).
/// Under the barred-letter encoding this is exactly a freely reduced group
/// element, so the same type serves both roles.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word {
    letters: Vec<u8>,
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word({self})")
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "e");
        }
        let parts: Vec<String> = self.letters.iter().map(|l| l.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

impl Word {
    pub fn empty() -> Word {
        Word { letters: Vec::new() }
    }

    pub fn from_letters(letters: &[u8], r: usize) -> Result<Word> {
        for &l in letters {
            if l == 0 || l as usize > 2 * r {
                return Err(Error::LetterOutOfRange { letter: l, alphabet: 2 * r });
            }
        }
        if !is_admissible(letters, r) {
            return Err(Error::InadmissibleWord(format!("{letters:?}")));
        }
        Ok(Word { letters: letters.to_vec() })
    }

    pub(crate) fn from_vec_unchecked(letters: Vec<u8>) -> Word {
        Word { letters }
    }

    pub fn letters(&self) -> &[u8] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn first(&self) -> Option<u8> {
        self.letters.first().copied()
    }

    pub fn last(&self) -> Option<u8> {
        self.letters.last().copied()
    }

    /// The word with its last letter removed (a').
    pub fn parent(&self) -> Word {
        let mut letters = self.letters.clone();
        letters.pop();
        Word { letters }
    }

    /// (bar(a_n), ..., bar(a_1)); encodes the group inverse.
    pub fn mirror(&self, r: usize) -> Word {
        Word { letters: self.letters.iter().rev().map(|&l| bar(l, r)).collect() }
    }
}

pub fn is_admissible(letters: &[u8], r: usize) -> bool {
    letters.windows(2).all(|w| w[1] != bar(w[0], r))
}

/// Concatenate two reduced elements with maximal cancellation.
pub fn multiply_reduced(x: &Word, y: &Word, r: usize) -> Word {
    let mut stack: Vec<u8> = Vec::with_capacity(x.len() + y.len());
    stack.extend_from_slice(&x.letters);
    for &l in &y.letters {
        if stack.last().copied() == Some(bar(l, r)) {
            stack.pop();
        } else {
            stack.push(l);
        }
    }
    Word { letters: stack }
}

/// gamma_w = gamma_{a_1} ... gamma_{a_n}; the empty word is the identity.
pub fn group_element(w: &Word, g: &SchottkyData) -> Mat2 {
    w.letters.iter().fold(Mat2::identity(), |acc, &l| acc.mul(g.generator(l)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntervalData {
    pub lo: f64,
    pub hi: f64,
}

impl IntervalData {
    pub fn upsilon(&self) -> f64 {
        self.hi - self.lo
    }
}

fn interval_image(prefix: &Mat2, last: u8, g: &SchottkyData) -> IntervalData {
    let (lo, hi) = g.base_interval(last);
    let a = prefix.apply_real(lo);
    let b = prefix.apply_real(hi);
    if a <= b {
        IntervalData { lo: a, hi: b }
    } else {
        IntervalData { lo: b, hi: a }
    }
}

/// I_w = gamma_{w'}(I_{last(w)}), endpoints ordered.
pub fn interval(w: &Word, g: &SchottkyData) -> Result<IntervalData> {
    let last = w
        .last()
        .ok_or_else(|| Error::InadmissibleWord("interval of the empty word".into()))?;
    let prefix = group_element(&w.parent(), g);
    Ok(interval_image(&prefix, last, g))
}

/// Length of I_w, with the convention that the empty word has length 1.
pub fn interval_length(w: &Word, g: &SchottkyData) -> f64 {
    if w.is_empty() {
        1.0
    } else {
        interval(w, g).expect("nonempty").upsilon()
    }
}

pub const DEFAULT_PARTITION_DEPTH: usize = 64;

/// Z(tau): depth-first from single letters, descending while the interval
/// length exceeds tau and emitting the first word on each branch with
/// |I_w| <= tau. Single letters are assigned parent length +infinity, so they
/// qualify directly when tau is large. Output is in lexicographic order.
pub fn partition(tau: f64, g: &SchottkyData) -> Result<Vec<Word>> {
    partition_with_depth(tau, g, DEFAULT_PARTITION_DEPTH)
}

pub fn partition_with_depth(tau: f64, g: &SchottkyData, max_depth: usize) -> Result<Vec<Word>> {
    if !(tau > 0.0) {
        return Err(Error::TauNonPositive(tau));
    }
    let mut out = Vec::new();
    let mut letters: Vec<u8> = Vec::with_capacity(max_depth);
    for a in g.letters() {
        letters.push(a);
        let upsilon = 2.0 * g.radius(a);
        descend(tau, g, &mut letters, *g.generator(a), upsilon, max_depth, &mut out)?;
        letters.pop();
    }
    Ok(out)
}

fn descend(
    tau: f64,
    g: &SchottkyData,
    letters: &mut Vec<u8>,
    full: Mat2,
    upsilon: f64,
    max_depth: usize,
    out: &mut Vec<Word>,
) -> Result<()> {
    if upsilon <= tau {
        out.push(Word { letters: letters.clone() });
        return Ok(());
    }
    if letters.len() >= max_depth {
        return Err(Error::DepthExceeded(max_depth));
    }
    let last = *letters.last().unwrap();
    let forbidden = bar(last, g.rank());
    for x in g.letters() {
        if x == forbidden {
            continue;
        }
        // child = w.x has prefix gamma_w, so I_child = gamma_w(I_x)
        let child_upsilon = interval_image(&full, x, g).upsilon();
        letters.push(x);
        descend(tau, g, letters, full.mul(g.generator(x)), child_upsilon, max_depth, out)?;
        letters.pop();
    }
    Ok(())
}

/// Zbar(tau): elementwise mirror of Z(tau), re-sorted lexicographically.
pub fn mirror_partition(tau: f64, g: &SchottkyData) -> Result<Vec<Word>> {
    let mut words: Vec<Word> =
        partition(tau, g)?.into_iter().map(|w| w.mirror(g.rank())).collect();
    words.sort();
    Ok(words)
}

/// Maximal proper-power decomposition of a reduced element: returns
/// (root, q) with x = root^q, q >= 2 maximal, or None when x is trivial or
/// not a proper power.
///
/// Cyclically reduce x = u v u^{-1}, take the minimal period p of v via the
/// failure function; x is a proper power iff p < |v| and p divides |v|.
pub fn proper_power_decomposition(x: &Word, r: usize) -> Option<(Word, usize)> {
    let n = x.len();
    if n == 0 {
        return None;
    }
    let letters = &x.letters;
    let mut i = 0;
    let mut j = n - 1;
    while i < j && letters[i] == bar(letters[j], r) {
        i += 1;
        j -= 1;
    }
    let v = &letters[i..=j];
    let m = v.len();
    let p = minimal_period(v);
    if p == m || m % p != 0 {
        return None;
    }
    let q = m / p;
    let u = Word { letters: letters[..i].to_vec() };
    let core = Word { letters: v[..p].to_vec() };
    let root = multiply_reduced(&multiply_reduced(&u, &core, r), &u.mirror(r), r);
    Some((root, q))
}

fn minimal_period(v: &[u8]) -> usize {
    let m = v.len();
    let mut fail = vec![0usize; m + 1];
    let mut k = 0usize;
    for i in 1..m {
        while k > 0 && v[i] != v[k] {
            k = fail[k];
        }
        if v[i] == v[k] {
            k += 1;
        }
        fail[i + 1] = k;
    }
    m - fail[m]
}

/// Common-prefix / common-suffix split of a pair (a', b'):
/// a' = c A d, b' = c B d with |c| maximal, then |d| maximal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PairSplit {
    pub prefix: usize,
    pub core_a: usize,
    pub core_b: usize,
    pub suffix: usize,
}

pub fn pair_split(a: &[u8], b: &[u8]) -> PairSplit {
    let l = a.iter().zip(b.iter()).take_while(|(x, y)| x == y).count();
    let rest_a = &a[l..];
    let rest_b = &b[l..];
    let r = rest_a
        .iter()
        .rev()
        .zip(rest_b.iter().rev())
        .take_while(|(x, y)| x == y)
        .count();
    PairSplit { prefix: l, core_a: rest_a.len() - r, core_b: rest_b.len() - r, suffix: r }
}

#[derive(Clone, Debug, Serialize)]
pub struct PowerPairEntry {
    pub a_index: usize,
    pub b_index: usize,
    pub exponent: usize,
    pub split: PairSplit,
}

/// Classification of Zbar(tau)^2 by the group element gamma_{a'} gamma_{b'}^{-1}.
#[derive(Clone, Debug, Serialize)]
pub struct PowerPairsReport {
    pub tau: f64,
    #[serde(skip)]
    pub words: Vec<Word>,
    pub partition_size: usize,
    pub identity_count: usize,
    pub other_count: usize,
    pub power_pairs: Vec<PowerPairEntry>,
    /// keyed by (prefix, core_a, core_b, suffix, q)
    #[serde(skip)]
    pub histogram: BTreeMap<(usize, usize, usize, usize, usize), usize>,
}

impl PowerPairsReport {
    pub fn power_count(&self) -> usize {
        self.power_pairs.len()
    }
}

pub const DEFAULT_POWER_PAIRS_CAP: usize = 20_000;

pub fn power_pairs(tau: f64, g: &SchottkyData) -> Result<PowerPairsReport> {
    power_pairs_with_cap(tau, g, DEFAULT_POWER_PAIRS_CAP)
}

pub fn power_pairs_with_cap(tau: f64, g: &SchottkyData, cap: usize) -> Result<PowerPairsReport> {
    let words = mirror_partition(tau, g)?;
    if words.len() > cap {
        return Err(Error::CapExceeded { size: words.len(), cap });
    }
    let r = g.rank();
    let parents: Vec<Word> = words.iter().map(|w| w.parent()).collect();
    let inverses: Vec<Word> = parents.iter().map(|p| p.mirror(r)).collect();
    let mut identity_count = 0usize;
    let mut other_count = 0usize;
    let mut power_pairs = Vec::new();
    let mut histogram = BTreeMap::new();
    for (i, pa) in parents.iter().enumerate() {
        for (j, invb) in inverses.iter().enumerate() {
            let elem = multiply_reduced(pa, invb, r);
            if elem.is_empty() {
                identity_count += 1;
            } else if let Some((_, q)) = proper_power_decomposition(&elem, r) {
                let split = pair_split(pa.letters(), parents[j].letters());
                *histogram
                    .entry((split.prefix, split.core_a, split.core_b, split.suffix, q))
                    .or_insert(0) += 1;
                power_pairs.push(PowerPairEntry { a_index: i, b_index: j, exponent: q, split });
            } else {
                other_count += 1;
            }
        }
    }
    Ok(PowerPairsReport {
        tau,
        partition_size: words.len(),
        words,
        identity_count,
        other_count,
        power_pairs,
        histogram,
    })
}

pub const DEFAULT_UNI_GRID: usize = 256;

/// D(a,b): minimum over a grid on the closed terminal interval I_j of
/// |gamma_a''/gamma_a' - gamma_b''/gamma_b'| for the full word maps. Both
/// words must end in the same letter j.
pub fn uni_distance(a: &Word, b: &Word, g: &SchottkyData) -> Result<f64> {
    uni_distance_with_grid(a, b, g, DEFAULT_UNI_GRID)
}

pub fn uni_distance_with_grid(a: &Word, b: &Word, g: &SchottkyData, grid: usize) -> Result<f64> {
    let (ja, jb) = (a.last(), b.last());
    if ja.is_none() || ja != jb {
        return Err(Error::MismatchedTerminalLetter(a.letters.clone(), b.letters.clone()));
    }
    let j = ja.unwrap();
    let ma = group_element(a, g);
    let mb = group_element(b, g);
    let (lo, hi) = g.base_interval(j);
    let mut best = f64::INFINITY;
    for k in 0..grid {
        let x = lo + (hi - lo) * k as f64 / (grid - 1) as f64;
        let z = C64::new(x, 0.0);
        let la = mobius_jet(&ma, z)?.log_second;
        let lb = mobius_jet(&mb, z)?.log_second;
        best = best.min((la - lb).norm());
    }
    Ok(best)
}

/// Finite-depth empirical estimates of the derivative-lemma constants. Each
/// ratio constant is a supremum over a set growing with `depth`, so the
/// estimates are monotone non-decreasing in the depth; the contraction rates
/// live in (0, 1).
#[derive(Clone, Debug, Serialize)]
pub struct EstimatedConstants {
    pub depth: usize,
    /// sup of |gamma_{a'}(x)| / |I_a| and its reciprocal over words and
    /// sample points x in the terminal disk.
    pub deriv_interval_ratio: f64,
    /// sup over the tau grid and Zbar(tau) members of |I_a|/tau, tau/|I_a|.
    pub partition_interval_ratio: f64,
    /// sup of |I_ab| / (|I_a| |I_b|) and its reciprocal over concatenable
    /// pairs with |a| + |b| <= depth.
    pub multiplicativity_ratio: f64,
    /// sup of |I_a| / |I_mirror(a)| and its reciprocal.
    pub mirror_ratio: f64,
    /// max over words of (sup disk |gamma_a'|)^(1/|a|).
    pub contraction_upper: f64,
    /// min over words of (inf disk |gamma_a'|)^(1/|a|).
    pub contraction_lower: f64,
    /// sup over the tau grid of |Zbar(tau)| tau^ex and its reciprocal, with
    /// `ex` the fitted partition exponent.
    pub partition_count_ratio: f64,
    /// least-squares slope of log |Zbar(tau)| against log(1/tau).
    pub partition_exponent: f64,
}

impl EstimatedConstants {
    /// Constants report: JSON keyed by constant name with estimate and depth.
    pub fn to_report_json(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        let mut put = |name: &str, est: f64| {
            map.insert(
                name.to_string(),
                serde_json::json!({ "estimate": est, "depth": self.depth }),
            );
        };
        put("deriv_interval_ratio", self.deriv_interval_ratio);
        put("partition_interval_ratio", self.partition_interval_ratio);
        put("multiplicativity_ratio", self.multiplicativity_ratio);
        put("mirror_ratio", self.mirror_ratio);
        put("contraction_upper", self.contraction_upper);
        put("contraction_lower", self.contraction_lower);
        put("partition_count_ratio", self.partition_count_ratio);
        put("partition_exponent", self.partition_exponent);
        serde_json::Value::Object(map)
    }
}

pub const MAX_CONSTANTS_DEPTH: usize = 12;

/// The tau grid backing the partition-derived constants.
pub fn constants_tau_grid() -> Vec<f64> {
    vec![10f64.powf(-1.5), 1e-2, 10f64.powf(-2.5), 1e-3, 10f64.powf(-3.5)]
}

pub fn estimate_constants(depth: usize, g: &SchottkyData) -> Result<EstimatedConstants> {
    if depth == 0 || depth > MAX_CONSTANTS_DEPTH {
        return Err(Error::DepthExceeded(MAX_CONSTANTS_DEPTH));
    }
    let r = g.rank();

    let mut k0: f64 = 1.0;
    let mut k3: f64 = 1.0;
    let mut theta: f64 = 0.0;
    let mut theta_bar: f64 = f64::INFINITY;

    // One pass over all nonempty words of length <= depth, carrying the
    // prefix matrix (gamma_{w'}) and full matrix (gamma_w).
    let mut stack: Vec<(Vec<u8>, Mat2, Mat2)> = g
        .letters()
        .map(|a| (vec![a], Mat2::identity(), *g.generator(a)))
        .collect();
    while let Some((letters, prefix, full)) = stack.pop() {
        let last = *letters.last().unwrap();
        let upsilon = interval_image(&prefix, last, g).upsilon();

        // K0: derivative of the prefix on the terminal disk vs interval length
        let (c, rad) = (g.center(last), g.radius(last));
        for &(dx, dy) in &[(0.0, 0.0), (0.7, 0.0), (-0.7, 0.0), (0.0, 0.7), (0.0, -0.7)] {
            let z = C64::new(c + dx * rad, dy * rad);
            let d = mobius_jet(&prefix, z).expect("prefix jet").first.norm();
            k0 = k0.max(d / upsilon).max(upsilon / d);
        }

        // K3: mirror word interval length
        let mw = Word { letters: letters.clone() }.mirror(r);
        let m_upsilon = interval_length(&mw, g);
        k3 = k3.max(upsilon / m_upsilon).max(m_upsilon / upsilon);

        // contraction rates: full-word derivative on every continuation disk
        let n = letters.len() as f64;
        let forbidden = bar(last, r);
        for b in g.letters() {
            if b == forbidden {
                continue;
            }
            let (cb, rb) = (g.center(b), g.radius(b));
            let mut dmax: f64 = 0.0;
            let mut dmin = f64::INFINITY;
            for &(dx, dy) in &[(0.0, 0.0), (0.9, 0.0), (-0.9, 0.0), (0.0, 0.9)] {
                let z = C64::new(cb + dx * rb, dy * rb);
                let d = mobius_jet(&full, z).expect("full jet").first.norm();
                dmax = dmax.max(d);
                dmin = dmin.min(d);
            }
            theta = theta.max(dmax.powf(1.0 / n));
            theta_bar = theta_bar.min(dmin.powf(1.0 / n));
        }

        if letters.len() < depth {
            for x in g.letters() {
                if x == forbidden {
                    continue;
                }
                let mut next = letters.clone();
                next.push(x);
                stack.push((next, full, full.mul(g.generator(x))));
            }
        }
    }

    // K2 over concatenable pairs with |a| + |b| <= depth.
    let mut k2: f64 = 1.0;
    let mut outer: Vec<(Vec<u8>, Mat2)> =
        g.letters().map(|a| (vec![a], *g.generator(a))).collect();
    while let Some((a_letters, a_full)) = outer.pop() {
        let upsilon_a = {
            let prefix = group_element(
                &Word { letters: a_letters[..a_letters.len() - 1].to_vec() },
                g,
            );
            interval_image(&prefix, *a_letters.last().unwrap(), g).upsilon()
        };
        let budget = depth - a_letters.len();
        if budget >= 1 {
            let first_forbidden = bar(*a_letters.last().unwrap(), r);
            // inner DFS over b; carries gamma_{b'} and gamma_a * gamma_{b'}
            let mut inner: Vec<(Vec<u8>, Mat2, Mat2)> = g
                .letters()
                .filter(|&x| x != first_forbidden)
                .map(|x| (vec![x], Mat2::identity(), a_full))
                .collect();
            while let Some((b_letters, b_prefix, ab_prefix)) = inner.pop() {
                let last = *b_letters.last().unwrap();
                let upsilon_b = interval_image(&b_prefix, last, g).upsilon();
                let upsilon_ab = interval_image(&ab_prefix, last, g).upsilon();
                let ratio = upsilon_ab / (upsilon_a * upsilon_b);
                k2 = k2.max(ratio).max(1.0 / ratio);
                if b_letters.len() < budget {
                    let forbidden = bar(last, r);
                    for x in g.letters() {
                        if x == forbidden {
                            continue;
                        }
                        let mut next = b_letters.clone();
                        next.push(x);
                        let gb = b_prefix.mul(g.generator(last));
                        inner.push((next, gb, ab_prefix.mul(g.generator(last))));
                    }
                }
            }
        }
        if a_letters.len() + 1 <= depth.saturating_sub(1) {
            let forbidden = bar(*a_letters.last().unwrap(), r);
            for x in g.letters() {
                if x == forbidden {
                    continue;
                }
                let mut next = a_letters.clone();
                next.push(x);
                outer.push((next, a_full.mul(g.generator(x))));
            }
        }
    }

    // K1, C2, exponent from the tau grid.
    let grid = constants_tau_grid();
    let mut k1: f64 = 1.0;
    let mut log_inv_tau = Vec::new();
    let mut log_count = Vec::new();
    let mut counts = Vec::new();
    for &tau in &grid {
        let members = mirror_partition(tau, g)?;
        for w in &members {
            let u = interval_length(w, g);
            k1 = k1.max(u / tau).max(tau / u);
        }
        log_inv_tau.push((1.0 / tau).ln());
        log_count.push((members.len() as f64).ln());
        counts.push(members.len());
    }
    let (exponent, _) = crate::util::linear_fit(&log_inv_tau, &log_count);
    let mut c2: f64 = 1.0;
    for (&tau, &n) in grid.iter().zip(counts.iter()) {
        let v = n as f64 * tau.powf(exponent);
        c2 = c2.max(v).max(1.0 / v);
    }

    Ok(EstimatedConstants {
        depth,
        deriv_interval_ratio: k0,
        partition_interval_ratio: k1,
        multiplicativity_ratio: k2,
        mirror_ratio: k3,
        contraction_upper: theta,
        contraction_lower: theta_bar,
        partition_count_ratio: c2,
        partition_exponent: exponent,
    })
}

/// Fit the word-length window of Zbar(tau): constants (D, kappa) such that
/// every member length lies in [D^{-1} log(1/tau) - kappa, D log(1/tau) + kappa]
/// over the given tau values.
pub fn fit_length_window(g: &SchottkyData, taus: &[f64]) -> Result<(f64, f64)> {
    let mut data = Vec::new();
    for &tau in taus {
        let members = mirror_partition(tau, g)?;
        let min = members.iter().map(Word::len).min().unwrap_or(0) as f64;
        let max = members.iter().map(Word::len).max().unwrap_or(0) as f64;
        data.push(((1.0 / tau).ln(), min, max));
    }
    let xs: Vec<f64> = data.iter().map(|d| d.0).collect();
    let maxs: Vec<f64> = data.iter().map(|d| d.2).collect();
    let mins: Vec<f64> = data.iter().map(|d| d.1).collect();
    let (slope_max, _) = crate::util::linear_fit(&xs, &maxs);
    let (slope_min, _) = crate::util::linear_fit(&xs, &mins);
    let d = slope_max.max(1.0 / slope_min.max(1e-9)).max(1.0);
    let mut kappa: f64 = 0.0;
    for &(x, min, max) in &data {
        kappa = kappa.max(max - d * x).max(x / d - min);
    }
    Ok((d, kappa))
}

/// Visit every nonempty admissible word of length <= max_len in lexicographic
/// order.
pub fn enumerate_words(r: usize, max_len: usize, mut f: impl FnMut(&[u8])) {
    let mut letters: Vec<u8> = Vec::with_capacity(max_len);
    fn rec(r: usize, max_len: usize, letters: &mut Vec<u8>, f: &mut impl FnMut(&[u8])) {
        for x in 1..=(2 * r) as u8 {
            if let Some(&last) = letters.last() {
                if x == bar(last, r) {
                    continue;
                }
            }
            letters.push(x);
            f(letters);
            if letters.len() < max_len {
                rec(r, max_len, letters, f);
            }
            letters.pop();
        }
    }
    rec(r, max_len, &mut letters, &mut f);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schottky::symmetric_four_disk;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn w(letters: &[u8]) -> Word {
        Word::from_letters(letters, 2).unwrap()
    }

    #[test]
    fn bar_examples() {
        assert_eq!(bar(1, 2), 3);
        assert_eq!(bar(3, 2), 1);
        assert_eq!(bar(2, 2), 4);
        assert_eq!(bar(4, 2), 2);
        for a in 1..=4 {
            assert_eq!(bar(bar(a, 2), 2), a);
        }
        assert!(checked_bar(5, 2).is_err());
    }

    #[test]
    fn admissibility_is_enforced() {
        assert!(Word::from_letters(&[1, 3], 2).is_err());
        assert!(Word::from_letters(&[1, 2, 4], 2).is_err());
        assert!(Word::from_letters(&[1, 2, 1], 2).is_ok());
    }

    #[test]
    fn mirror_examples() {
        assert_eq!(w(&[1, 2]).mirror(2), w(&[4, 3]));
        assert_eq!(Word::empty().mirror(2), Word::empty());
        assert_eq!(w(&[1, 2]).mirror(2).mirror(2), w(&[1, 2]));
    }

    #[test]
    fn mirror_is_group_inverse() {
        let g = symmetric_four_disk();
        let mut rng = 0x452821E638D01377u64;
        let mut next = || {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            rng >> 33
        };
        for _ in 0..50 {
            let len = 1 + (next() as usize) % 8;
            let mut letters = Vec::new();
            for _ in 0..len {
                loop {
                    let cand = 1 + (next() % 4) as u8;
                    if letters.last().map_or(true, |&l| cand != bar(l, 2)) {
                        letters.push(cand);
                        break;
                    }
                }
            }
            let word = w(&letters);
            let prod = group_element(&word.mirror(2), &g).mul(&group_element(&word, &g));
            assert!(
                prod.projective_distance_to_identity() < 1e-9,
                "mirror not inverse for {word}"
            );
        }
    }

    #[test]
    fn group_element_examples() {
        let g = symmetric_four_disk();
        assert_eq!(group_element(&Word::empty(), &g), Mat2::identity());
        assert_eq!(group_element(&w(&[1]), &g), *g.generator(1));
        let m = group_element(&w(&[1, 2]), &g);
        assert!(m.trace().abs() > 2.0, "gamma_12 should be hyperbolic");
    }

    #[test]
    fn interval_examples() {
        let g = symmetric_four_disk();
        let i1 = interval(&w(&[1]), &g).unwrap();
        assert_abs_diff_eq!(i1.lo, -3.5, epsilon = 1e-14);
        assert_abs_diff_eq!(i1.hi, -2.5, epsilon = 1e-14);
        assert_abs_diff_eq!(i1.upsilon(), 1.0, epsilon = 1e-14);

        let i12 = interval(&w(&[1, 2]), &g).unwrap();
        assert!(i12.lo > i1.lo && i12.hi < i1.hi, "I_12 must nest strictly inside I_1");
        assert!(i12.upsilon() <= i1.upsilon());
        // oracle: gamma_1 maps I_2 = (-1.5, -0.5); endpoints -3 - 0.25/(x-1)
        assert_abs_diff_eq!(i12.lo, -3.0 + 0.25 / 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(i12.hi, -3.0 + 0.25 / 1.5, epsilon = 1e-12);
    }

    #[test]
    fn child_intervals_nest() {
        let g = symmetric_four_disk();
        enumerate_words(2, 4, |letters| {
            if letters.len() < 2 {
                return;
            }
            let child = Word::from_vec_unchecked(letters.to_vec());
            let parent = child.parent();
            let ci = interval(&child, &g).unwrap();
            let pi = interval(&parent, &g).unwrap();
            assert!(ci.lo >= pi.lo - 1e-12 && ci.hi <= pi.hi + 1e-12);
        });
    }

    #[test]
    fn partition_large_tau_is_single_letters() {
        let g = symmetric_four_disk();
        let z = partition(1.0, &g).unwrap();
        assert_eq!(z.len(), 4);
        assert!(z.iter().all(|w| w.len() == 1));
    }

    #[test]
    fn partition_defining_predicate() {
        let g = symmetric_four_disk();
        let tau = 1e-3;
        let z = partition(tau, &g).unwrap();
        for member in &z {
            let u = interval_length(member, &g);
            assert!(u <= tau, "member {member} has |I| = {u} > tau");
            let parent_len = if member.len() == 1 {
                f64::INFINITY
            } else {
                interval_length(&member.parent(), &g)
            };
            assert!(parent_len > tau, "parent of {member} already fits");
        }
    }

    #[test]
    fn partition_unique_prefix_property() {
        let g = symmetric_four_disk();
        let tau = 1e-2;
        let z = partition(tau, &g).unwrap();
        let max_len = z.iter().map(Word::len).max().unwrap();
        enumerate_words(2, max_len + 1, |letters| {
            if letters.len() != max_len + 1 {
                return;
            }
            let hits = z
                .iter()
                .filter(|m| letters.starts_with(m.letters()))
                .count();
            assert_eq!(hits, 1, "word {letters:?} has {hits} prefixes in Z(tau)");
        });
    }

    #[test]
    fn partition_rejects_bad_tau() {
        let g = symmetric_four_disk();
        assert!(matches!(partition(0.0, &g), Err(Error::TauNonPositive(_))));
        assert!(matches!(
            partition_with_depth(1e-9, &g, 3),
            Err(Error::DepthExceeded(3))
        ));
    }

    #[test]
    fn mirror_partition_properties() {
        let g = symmetric_four_disk();
        let tau = 1e-2;
        let z = partition(tau, &g).unwrap();
        let zb = mirror_partition(tau, &g).unwrap();
        assert_eq!(z.len(), zb.len());
        assert!(zb.iter().all(|w| w.len() >= 2), "members must have length >= 2 at this tau");
        let mut back: Vec<Word> = zb.iter().map(|w| w.mirror(2)).collect();
        back.sort();
        let mut zs = z.clone();
        zs.sort();
        assert_eq!(back, zs);
    }

    #[test]
    fn multiply_reduced_examples() {
        assert_eq!(multiply_reduced(&w(&[1, 2]), &w(&[4, 3]), 2), Word::empty());
        assert_eq!(multiply_reduced(&w(&[1, 2]), &w(&[4, 1]), 2), w(&[1, 1]));
        assert_eq!(multiply_reduced(&Word::empty(), &w(&[2, 3]), 2), w(&[2, 3]));
        // matrix oracle for the single-cancellation case
        let g = symmetric_four_disk();
        let lhs = group_element(&w(&[1, 2]), &g).mul(&group_element(&w(&[4, 1]), &g));
        let rhs = group_element(&w(&[1, 1]), &g);
        let diff = lhs.max_abs_diff(&rhs).min(
            lhs.max_abs_diff(&Mat2 { a: -rhs.a, b: -rhs.b, c: -rhs.c, d: -rhs.d }),
        );
        assert!(diff < 1e-9);
    }

    #[test]
    fn proper_power_examples() {
        assert_eq!(
            proper_power_decomposition(&w(&[1, 2, 1, 2, 1, 2]), 2),
            Some((w(&[1, 2]), 3))
        );
        assert_eq!(proper_power_decomposition(&w(&[1]), 2), None);
        assert_eq!(proper_power_decomposition(&Word::empty(), 2), None);
        assert_eq!(
            proper_power_decomposition(&w(&[2, 1, 1, 4]), 2),
            Some((w(&[2, 1, 4]), 2))
        );
    }

    /// Brute force: try every reduced root of length <= |x| and every
    /// exponent, taking the largest exponent that reproduces x.
    fn proper_power_oracle(x: &Word, r: usize) -> Option<(Word, usize)> {
        if x.is_empty() {
            return None;
        }
        let mut best: Option<(Word, usize)> = None;
        let mut roots = Vec::new();
        enumerate_words(r, x.len(), |letters| roots.push(letters.to_vec()));
        for root in roots {
            let rw = Word::from_vec_unchecked(root);
            let mut acc = rw.clone();
            let mut q = 1;
            while acc.len() <= x.len() + 2 * rw.len() && q <= x.len() {
                q += 1;
                acc = multiply_reduced(&acc, &rw, r);
                if q >= 2 && acc == *x {
                    if best.as_ref().map_or(true, |(_, bq)| q > *bq) {
                        best = Some((rw.clone(), q));
                    }
                }
            }
        }
        best
    }

    #[test]
    fn proper_power_matches_oracle_on_short_words() {
        let mut count = 0;
        enumerate_words(2, 7, |letters| {
            let word = Word::from_vec_unchecked(letters.to_vec());
            let got = proper_power_decomposition(&word, 2);
            let want = proper_power_oracle(&word, 2);
            match (&got, &want) {
                (Some((gr, gq)), Some((wr, wq))) => {
                    assert_eq!(gq, wq, "exponent mismatch for {word}");
                    assert_eq!(gr, wr, "root mismatch for {word}");
                }
                (None, None) => {}
                _ => panic!("mismatch for {word}: got {got:?}, want {want:?}"),
            }
            count += 1;
        });
        assert!(count > 1000);
    }

    #[test]
    fn power_pairs_classification() {
        let g = symmetric_four_disk();
        let tau = 3e-3;
        let report = power_pairs(tau, &g).unwrap();
        // identity class is exactly the pairs with equal parents
        let parents: Vec<Word> = report.words.iter().map(Word::parent).collect();
        let mut expected_identity = 0;
        for a in &parents {
            for b in &parents {
                if a == b {
                    expected_identity += 1;
                }
            }
        }
        assert_eq!(report.identity_count, expected_identity);
        let total = report.partition_size * report.partition_size;
        assert_eq!(
            report.identity_count + report.other_count + report.power_count(),
            total
        );
        // split re-check straight from the definitions
        for entry in &report.power_pairs {
            let a = parents[entry.a_index].letters();
            let b = parents[entry.b_index].letters();
            let l = entry.split.prefix;
            assert_eq!(&a[..l], &b[..l]);
            if l < a.len() && l < b.len() {
                assert_ne!(a[l], b[l]);
            }
            let r_len = entry.split.suffix;
            assert_eq!(&a[a.len() - r_len..], &b[b.len() - r_len..]);
            assert_eq!(entry.split.core_a, a.len() - l - r_len);
            assert_eq!(entry.split.core_b, b.len() - l - r_len);
        }
        let hist_total: usize = report.histogram.values().sum();
        assert_eq!(hist_total, report.power_count());
    }

    #[test]
    fn power_pairs_trend_report() {
        // desk-scale reflection of the asymptotic count bound; reported, not
        // hard-asserted
        let g = symmetric_four_disk();
        let report = power_pairs(1e-3, &g).unwrap();
        let delta_ish = 0.3;
        let scaled = report.power_count() as f64 * 1e-3f64.powf(delta_ish + 0.3);
        println!(
            "power pairs at tau=1e-3: {} of {}^2, scaled {scaled:.3e}",
            report.power_count(),
            report.partition_size
        );
        assert!(scaled.is_finite());
    }

    #[test]
    fn power_pairs_cap() {
        let g = symmetric_four_disk();
        assert!(matches!(
            power_pairs_with_cap(1e-3, &g, 2),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn uni_distance_properties() {
        let g = symmetric_four_disk();
        let a = w(&[1, 2, 1]);
        let b = w(&[2, 2, 1]);
        assert_abs_diff_eq!(uni_distance(&a, &a, &g).unwrap(), 0.0, epsilon = 1e-15);
        let dab = uni_distance(&a, &b, &g).unwrap();
        let dba = uni_distance(&b, &a, &g).unwrap();
        assert_abs_diff_eq!(dab, dba, epsilon = 1e-14);
        assert!(matches!(
            uni_distance(&a, &w(&[1, 2]), &g),
            Err(Error::MismatchedTerminalLetter(..))
        ));
    }

    #[test]
    fn uni_grid_close_to_refinement() {
        let g = symmetric_four_disk();
        let mut words6 = Vec::new();
        enumerate_words(2, 6, |letters| {
            if letters.len() == 6 {
                words6.push(Word::from_vec_unchecked(letters.to_vec()));
            }
        });
        let mut rng = 0x082EFA98EC4E6C89u64;
        let mut next = || {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (rng >> 33) as usize
        };
        let mut done = 0;
        while done < 100 {
            let a = &words6[next() % words6.len()];
            let b = &words6[next() % words6.len()];
            if a.last() != b.last() {
                continue;
            }
            let coarse = uni_distance_with_grid(a, b, &g, 256).unwrap();
            let fine = uni_distance_with_grid(a, b, &g, 4096).unwrap();
            assert!(
                (coarse - fine).abs() < 1e-3,
                "grid minimum moved too much: {coarse} vs {fine}"
            );
            done += 1;
        }
    }

    #[test]
    fn encoding_injective_up_to_sign_on_short_words() {
        let g = symmetric_four_disk();
        let mut seen: std::collections::HashMap<[i64; 4], Vec<u8>> = Default::default();
        enumerate_words(2, 6, |letters| {
            let m = group_element(&Word::from_vec_unchecked(letters.to_vec()), &g);
            // canonical sign: first nonzero entry positive
            let vals = [m.a, m.b, m.c, m.d];
            let sgn = vals
                .iter()
                .find(|v| v.abs() > 1e-9)
                .map(|v| v.signum())
                .unwrap_or(1.0);
            let key = [
                (m.a * sgn * 1e7).round() as i64,
                (m.b * sgn * 1e7).round() as i64,
                (m.c * sgn * 1e7).round() as i64,
                (m.d * sgn * 1e7).round() as i64,
            ];
            if let Some(prev) = seen.insert(key, letters.to_vec()) {
                panic!("matrix collision between {prev:?} and {letters:?}");
            }
        });
    }

    #[test]
    fn estimated_constants_are_sane_and_monotone() {
        let g = symmetric_four_disk();
        let c6 = estimate_constants(6, &g).unwrap();
        let c8 = estimate_constants(8, &g).unwrap();
        for c in [&c6, &c8] {
            assert!(c.deriv_interval_ratio >= 1.0);
            assert!(c.partition_interval_ratio >= 1.0);
            assert!(c.multiplicativity_ratio >= 1.0);
            assert!(c.mirror_ratio >= 1.0);
            assert!(c.partition_count_ratio >= 1.0);
            assert!(c.contraction_upper > 0.0 && c.contraction_upper < 1.0);
            assert!(c.contraction_lower > 0.0 && c.contraction_lower <= c.contraction_upper);
        }
        assert!(c8.deriv_interval_ratio >= c6.deriv_interval_ratio - 1e-12);
        assert!(c8.multiplicativity_ratio >= c6.multiplicativity_ratio - 1e-12);
        assert!(c8.mirror_ratio >= c6.mirror_ratio - 1e-12);
    }

    #[test]
    fn length_window_covers_fresh_tau() {
        let g = symmetric_four_disk();
        let (d, kappa) =
            fit_length_window(&g, &[10f64.powf(-1.5), 1e-2, 10f64.powf(-2.5), 1e-3]).unwrap();
        let tau = 10f64.powf(-3.5);
        let members = mirror_partition(tau, &g).unwrap();
        let x = (1.0 / tau).ln();
        for m in &members {
            let len = m.len() as f64;
            assert!(len >= x / d - kappa - 1e-9, "length {len} below window");
            assert!(len <= d * x + kappa + 1e-9, "length {len} above window");
        }
    }

    proptest! {
        #[test]
        fn multiply_reduced_is_reduced_and_consistent(xa in proptest::collection::vec(1u8..=4, 0..10),
                                                      ya in proptest::collection::vec(1u8..=4, 0..10)) {
            // repair arbitrary letter vectors into admissible words
            let fix = |v: &[u8]| {
                let mut out: Vec<u8> = Vec::new();
                for &l in v {
                    if out.last().map_or(true, |&p| l != bar(p, 2)) {
                        out.push(l);
                    }
                }
                Word::from_vec_unchecked(out)
            };
            let x = fix(&xa);
            let y = fix(&ya);
            let z = multiply_reduced(&x, &y, 2);
            prop_assert!(is_admissible(z.letters(), 2));
            prop_assert!(z.len() <= x.len() + y.len());
            let g = symmetric_four_disk();
            let lhs = group_element(&x, &g).mul(&group_element(&y, &g));
            let rhs = group_element(&z, &g);
            let neg = Mat2 { a: -rhs.a, b: -rhs.b, c: -rhs.c, d: -rhs.d };
            let scale = 1.0f64.max(lhs.max_abs_diff(&Mat2 { a: 0.0, b: 0.0, c: 0.0, d: 0.0 }));
            prop_assert!(lhs.max_abs_diff(&rhs).min(lhs.max_abs_diff(&neg)) < 1e-6 * scale);
        }
    }
}
