//! Random homomorphisms from the Schottky free group into S_n: sampling,
//! word action, standard-representation characters, transitivity, and the
//! expected-trace machinery with its a-priori bound.

use crate::error::{Error, Result};
use crate::util::mix_seed;
use crate::words::Word;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A homomorphism Gamma -> S_n given by the images of the first r generators.
/// Barred generators act by the inverse permutations, which are derived, not
/// stored independently, so the pairing gamma_abar = gamma_a^{-1} holds
/// structurally.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PermutationRep {
    n: usize,
    r: usize,
    seed: u64,
    images: Vec<Vec<u32>>,
    inverses: Vec<Vec<u32>>,
}

#[derive(Serialize, Deserialize)]
struct RepFile {
    n: usize,
    seed: u64,
    /// 1-based permutations, one per generator gamma_1..gamma_r.
    images: Vec<Vec<u32>>,
}

impl PermutationRep {
    pub fn from_images(n: usize, images: Vec<Vec<u32>>, seed: u64) -> Result<Self> {
        let r = images.len();
        for p in &images {
            if p.len() != n {
                return Err(Error::InvalidConfig("permutation length != n".into()));
            }
            let mut seen = vec![false; n];
            for &v in p {
                if v as usize >= n || seen[v as usize] {
                    return Err(Error::InvalidConfig("image is not a permutation".into()));
                }
                seen[v as usize] = true;
            }
        }
        let inverses = images.iter().map(|p| invert(p)).collect();
        Ok(PermutationRep { n, r, seed, images, inverses })
    }

    /// The identity homomorphism at degree n (debug rep for factorization
    /// checks).
    pub fn identity(n: usize, r: usize) -> Self {
        let id: Vec<u32> = (0..n as u32).collect();
        PermutationRep {
            n,
            r,
            seed: 0,
            images: vec![id.clone(); r],
            inverses: vec![id; r],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.r
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn image(&self, generator: usize) -> &[u32] {
        &self.images[generator]
    }

    /// Permutation for a single letter: image for 1..=r, inverse image for
    /// the barred half.
    pub fn letter_action(&self, letter: u8) -> Result<&[u32]> {
        let l = letter as usize;
        if l == 0 || l > 2 * self.r {
            return Err(Error::LetterOutOfRange { letter, alphabet: 2 * self.r });
        }
        Ok(if l <= self.r {
            &self.images[l - 1]
        } else {
            &self.inverses[l - 1 - self.r]
        })
    }

    /// JSON dump with 1-based permutations.
    pub fn to_json(&self) -> String {
        let file = RepFile {
            n: self.n,
            seed: self.seed,
            images: self
                .images
                .iter()
                .map(|p| p.iter().map(|&v| v + 1).collect())
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("rep serialization")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: RepFile = serde_json::from_str(text)?;
        let images: Vec<Vec<u32>> = file
            .images
            .iter()
            .map(|p| p.iter().map(|&v| v.wrapping_sub(1)).collect())
            .collect();
        Self::from_images(file.n, images, file.seed)
    }
}

fn invert(p: &[u32]) -> Vec<u32> {
    let mut inv = vec![0u32; p.len()];
    for (i, &v) in p.iter().enumerate() {
        inv[v as usize] = i as u32;
    }
    inv
}

/// Sample r independent uniform permutations of {1..n}. The generator for
/// stream a is a counter-based RNG keyed by (seed, a), so the result is
/// reproducible regardless of thread schedule.
pub fn sample_rep(n: usize, r: usize, seed: u64) -> PermutationRep {
    let mut images = Vec::with_capacity(r);
    for a in 0..r {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(a as u64 + 1);
        let mut perm: Vec<u32> = (0..n as u32).collect();
        // Fisher-Yates
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            perm.swap(i, j);
        }
        images.push(perm);
    }
    let inverses = images.iter().map(|p| invert(p)).collect();
    PermutationRep { n, r, seed, images, inverses }
}

/// phi(gamma_{a_1} ... gamma_{a_k}) as the composite permutation, acting on
/// 0-based points. The empty word gives the identity.
pub fn act(rep: &PermutationRep, w: &Word) -> Result<Vec<u32>> {
    let mut out: Vec<u32> = (0..rep.n as u32).collect();
    for &letter in w.letters().iter().rev() {
        let p = rep.letter_action(letter)?;
        for v in out.iter_mut() {
            *v = p[*v as usize];
        }
    }
    Ok(out)
}

fn fixed_points(p: &[u32]) -> usize {
    p.iter().enumerate().filter(|(i, &v)| *i == v as usize).count()
}

/// Tr std0(phi(w)) = #fixed points - 1.
pub fn character_std0(rep: &PermutationRep, w: &Word) -> Result<i64> {
    Ok(fixed_points(&act(rep, w)?) as i64 - 1)
}

/// Union-find over all generator edges; true iff the action has one orbit.
pub fn is_transitive(rep: &PermutationRep) -> bool {
    let n = rep.n;
    if n <= 1 {
        return true;
    }
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for p in &rep.images {
        for (i, &v) in p.iter().enumerate() {
            let a = find(&mut parent, i);
            let b = find(&mut parent, v as usize);
            if a != b {
                parent[a] = b;
            }
        }
    }
    let root = find(&mut parent, 0);
    (1..n).all(|i| find(&mut parent, i) == root)
}

/// Number of divisors by trial division (exponents here never exceed the
/// word length).
pub fn divisor_count(q: usize) -> usize {
    (1..=q).filter(|d| q % d == 0).count()
}

/// A-priori bound on |E Tr std0(phi(x))| for a reduced element of length t:
/// n-1 for the identity, d(q)-1 + t^4/(n-t^2) for a maximal q-th power,
/// t^4/(n-t^2) otherwise. Requires n > t^2.
pub fn expected_trace_bound(x: &Word, n: usize, r: usize) -> Result<f64> {
    if x.is_empty() {
        return Ok(n as f64 - 1.0);
    }
    let t = x.len();
    if n <= t * t {
        return Err(Error::HypothesisViolated { n, t });
    }
    let tail = (t as f64).powi(4) / (n as f64 - (t * t) as f64);
    Ok(match crate::words::proper_power_decomposition(x, r) {
        Some((_, q)) => (divisor_count(q) as f64 - 1.0) + tail,
        None => tail,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TraceMode {
    MonteCarlo,
    Exhaustive,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TraceEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: u64,
    pub mode: TraceMode,
}

pub const EXHAUSTIVE_TUPLE_CAP: f64 = 1e7;

/// E Tr std0(phi(x)) over the permutation model, either exactly (averaging
/// over every r-tuple of permutations) or by a seeded Monte-Carlo mean.
pub fn expected_trace(
    x: &Word,
    n: usize,
    r: usize,
    mode: TraceMode,
    trials: u64,
    seed: u64,
) -> Result<TraceEstimate> {
    match mode {
        TraceMode::Exhaustive => exhaustive_trace(x, n, r),
        TraceMode::MonteCarlo => monte_carlo_trace(x, n, r, trials, seed),
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn exhaustive_trace(x: &Word, n: usize, r: usize) -> Result<TraceEstimate> {
    let tuples = factorial(n).powi(r as i32);
    if tuples > EXHAUSTIVE_TUPLE_CAP {
        return Err(Error::ExhaustiveTooLarge(tuples));
    }
    for &l in x.letters() {
        if l as usize > 2 * r {
            return Err(Error::LetterOutOfRange { letter: l, alphabet: 2 * r });
        }
    }
    let perms = all_permutations(n);
    let inverses: Vec<Vec<u32>> = perms.iter().map(|p| invert(p)).collect();
    let m = perms.len();
    let total_tuples = (m as u64).pow(r as u32);

    // parallel over the first generator's index; exact integer sums
    let sums = crate::par::map_indexed(m, |first| {
        let mut idx = vec![0usize; r];
        idx[0] = first;
        let mut sum: i64 = 0;
        let inner = (m as u64).pow(r as u32 - 1);
        for _ in 0..inner {
            sum += tuple_character_std0(x, n, &idx, &perms, &inverses, r);
            // odometer over idx[1..]
            for d in idx.iter_mut().skip(1) {
                *d += 1;
                if *d < m {
                    break;
                }
                *d = 0;
            }
        }
        sum
    });
    let total: i64 = sums.iter().sum();
    Ok(TraceEstimate {
        mean: total as f64 / total_tuples as f64,
        stderr: 0.0,
        trials: total_tuples,
        mode: TraceMode::Exhaustive,
    })
}

fn tuple_character_std0(
    x: &Word,
    n: usize,
    idx: &[usize],
    perms: &[Vec<u32>],
    inverses: &[Vec<u32>],
    r: usize,
) -> i64 {
    let mut fixed = 0i64;
    'points: for start in 0..n as u32 {
        let mut p = start;
        for &letter in x.letters().iter().rev() {
            let l = letter as usize;
            let table = if l <= r { &perms[idx[l - 1]] } else { &inverses[idx[l - 1 - r]] };
            p = table[p as usize];
            // cheap cycle-free guard not needed: words are finite
        }
        if p == start {
            fixed += 1;
        }
        continue 'points;
    }
    fixed - 1
}

fn all_permutations(n: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur: Vec<u32> = (0..n as u32).collect();
    heap_permute(n, &mut cur, &mut out);
    out.sort();
    out
}

fn heap_permute(k: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if k <= 1 {
        out.push(cur.clone());
        return;
    }
    for i in 0..k {
        heap_permute(k - 1, cur, out);
        if k % 2 == 0 {
            cur.swap(i, k - 1);
        } else {
            cur.swap(0, k - 1);
        }
    }
}

fn monte_carlo_trace(x: &Word, n: usize, r: usize, trials: u64, seed: u64) -> Result<TraceEstimate> {
    if trials == 0 {
        return Err(Error::InvalidConfig("monte-carlo needs at least one trial".into()));
    }
    let values = crate::par::map_indexed(trials as usize, |i| {
        let rep = sample_rep(n, r, mix_seed(seed, i as u64));
        character_std0(&rep, x).expect("letters validated") as f64
    });
    let mean = values.iter().sum::<f64>() / trials as f64;
    let stderr = if trials > 1 {
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (trials as f64 - 1.0);
        (var / trials as f64).sqrt()
    } else {
        0.0
    };
    Ok(TraceEstimate { mean, stderr, trials, mode: TraceMode::MonteCarlo })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::words::multiply_reduced;
    use approx::assert_abs_diff_eq;

    fn w(letters: &[u8]) -> Word {
        Word::from_letters(letters, 2).unwrap()
    }

    #[test]
    fn degree_one_is_trivial() {
        let rep = sample_rep(1, 2, 42);
        assert_eq!(rep.image(0), &[0]);
        assert!(is_transitive(&rep));
        assert_eq!(character_std0(&rep, &w(&[1, 2])).unwrap(), 0);
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_rep(64, 2, 7);
        let b = sample_rep(64, 2, 7);
        assert_eq!(a, b);
        let c = sample_rep(64, 2, 8);
        assert_ne!(a, c);
    }

    #[test]
    fn uniform_fixed_point_statistic() {
        // mean fixed points of a uniform permutation is exactly 1
        let n = 16;
        let trials = 10_000;
        let mut total = 0usize;
        for seed in 0..trials {
            let rep = sample_rep(n, 2, seed);
            total += rep.image(0).iter().enumerate().filter(|(i, &v)| *i == v as usize).count();
        }
        let mean = total as f64 / trials as f64;
        assert!((mean - 1.0).abs() < 0.05, "fixed-point mean {mean}");
    }

    #[test]
    fn act_is_a_homomorphism() {
        let rep = sample_rep(23, 2, 5);
        assert_eq!(act(&rep, &Word::empty()).unwrap(), (0..23).collect::<Vec<u32>>());
        let a = w(&[1, 2]);
        let b = w(&[2, 1, 4]);
        let ab = multiply_reduced(&a, &b, 2);
        let pa = act(&rep, &a).unwrap();
        let pb = act(&rep, &b).unwrap();
        let composed: Vec<u32> = (0..23).map(|i| pa[pb[i as usize] as usize]).collect();
        assert_eq!(act(&rep, &ab).unwrap(), composed);
        // w followed by mirror(w) is the identity
        let round = act(&rep, &multiply_reduced(&a, &a.mirror(2), 2)).unwrap();
        assert_eq!(round, (0..23).collect::<Vec<u32>>());
    }

    #[test]
    fn character_of_identity_element() {
        let rep = sample_rep(9, 2, 3);
        assert_eq!(character_std0(&rep, &Word::empty()).unwrap(), 8);
    }

    #[test]
    fn character_is_mirror_symmetric() {
        // a permutation and its inverse fix the same points
        for seed in 0..20 {
            let rep = sample_rep(12, 2, seed);
            let word = w(&[1, 2, 2, 3, 2]);
            assert_eq!(
                character_std0(&rep, &word).unwrap(),
                character_std0(&rep, &word.mirror(2)).unwrap()
            );
        }
    }

    #[test]
    fn transitivity_examples() {
        assert!(is_transitive(&sample_rep(1, 2, 0)));
        assert!(!is_transitive(&PermutationRep::identity(2, 2)));
        // two random permutations are intransitive with probability ~ 1/n,
        // so expect ~0.94 at n = 16 and a rising trend in n
        let fraction = |n: usize| {
            let trials = 2000u64;
            let hits = (0..trials).filter(|&s| is_transitive(&sample_rep(n, 2, s))).count();
            hits as f64 / trials as f64
        };
        let f16 = fraction(16);
        let f64_ = fraction(64);
        assert!(f16 >= 0.90, "transitive fraction at n=16: {f16}");
        assert!(f64_ > f16, "fraction should increase with n: {f16} vs {f64_}");
        assert!(f64_ >= 0.97, "transitive fraction at n=64: {f64_}");
    }

    #[test]
    fn trace_bound_examples() {
        assert_abs_diff_eq!(
            expected_trace_bound(&Word::empty(), 10, 2).unwrap(),
            9.0
        );
        assert_abs_diff_eq!(
            expected_trace_bound(&w(&[1, 2]), 100, 2).unwrap(),
            16.0 / 96.0,
            epsilon = 1e-15
        );
        // q = 2 power of length 4: d(2) - 1 + 256/84
        assert_abs_diff_eq!(
            expected_trace_bound(&w(&[1, 2, 1, 2]), 100, 2).unwrap(),
            1.0 + 256.0 / 84.0,
            epsilon = 1e-12
        );
        assert!(matches!(
            expected_trace_bound(&w(&[1, 2, 1, 2]), 16, 2),
            Err(Error::HypothesisViolated { n: 16, t: 4 })
        ));
    }

    #[test]
    fn exhaustive_single_letter_mean_is_zero() {
        // 36 tuples at n = 3, r = 2; a single uniform permutation has
        // expected fixed-point count exactly 1
        let est = expected_trace(&w(&[1]), 3, 2, TraceMode::Exhaustive, 0, 0).unwrap();
        assert_eq!(est.trials, 36);
        assert_eq!(est.mean, 0.0);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn exhaustive_identity_mean() {
        let est = expected_trace(&Word::empty(), 4, 2, TraceMode::Exhaustive, 0, 0).unwrap();
        assert_eq!(est.mean, 3.0);
    }

    #[test]
    fn exhaustive_cap() {
        assert!(matches!(
            expected_trace(&w(&[1]), 8, 2, TraceMode::Exhaustive, 0, 0),
            Err(Error::ExhaustiveTooLarge(_))
        ));
    }

    #[test]
    fn exhaustive_is_conjugation_invariant() {
        let x = w(&[1, 2]);
        let y = w(&[2]);
        let conj = multiply_reduced(&multiply_reduced(&y, &x, 2), &y.mirror(2), 2);
        let a = expected_trace(&x, 4, 2, TraceMode::Exhaustive, 0, 0).unwrap();
        let b = expected_trace(&conj, 4, 2, TraceMode::Exhaustive, 0, 0).unwrap();
        assert_abs_diff_eq!(a.mean, b.mean, epsilon = 1e-12);
    }

    #[test]
    fn monte_carlo_respects_bound() {
        let word = w(&[1, 2, 1, 2]);
        let est = expected_trace(&word, 20, 2, TraceMode::MonteCarlo, 20_000, 11).unwrap();
        let bound = expected_trace_bound(&word, 20, 2).unwrap();
        assert!(
            est.mean.abs() <= bound + 4.0 * est.stderr,
            "mean {} stderr {} bound {}",
            est.mean,
            est.stderr,
            bound
        );
    }

    #[test]
    fn rep_json_round_trip() {
        let rep = sample_rep(6, 2, 99);
        let text = rep.to_json();
        let back = PermutationRep::from_json(&text).unwrap();
        assert_eq!(rep.image(0), back.image(0));
        assert_eq!(rep.image(1), back.image(1));
        assert_eq!(back.seed(), 99);
    }
}
