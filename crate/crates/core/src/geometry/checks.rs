//! Brute-force verification of the separability and interactivity lemmas.
//!
//! Each check enumerates a finite box of configurations (translation fixed by
//! pinning the first particle where the statement allows it). When the box is
//! larger than the evaluation budget the same box is sampled uniformly instead,
//! and the report says so.

use super::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CheckMode {
    Exhaustive,
    Sampled,
}

impl CheckMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            CheckMode::Exhaustive => "exhaustive",
            CheckMode::Sampled => "sampled",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Lemma {
    /// Separability is a symmetric pair predicate.
    Symmetry,
    /// Outside the exclusion cubes a pair is separable.
    ExclusionCubes,
    /// Far configurations are J-separable.
    FarSeparable,
    /// A PI witness partition has projection gap above `r0`.
    PiWitness,
    /// Far FI cubes have disjoint projections.
    FiDisjoint,
    /// Many far singular cubes contain a separable pair.
    Counting,
}

impl Lemma {
    pub fn name(&self) -> &'static str {
        match self {
            Lemma::Symmetry => "separability-symmetry",
            Lemma::ExclusionCubes => "exclusion-cubes",
            Lemma::FarSeparable => "far-separable",
            Lemma::PiWitness => "pi-witness-gap",
            Lemma::FiDisjoint => "fi-projection-disjoint",
            Lemma::Counting => "counting-separable-pair",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub lemma: Lemma,
    pub n: usize,
    pub d: usize,
    pub l: i64,
    pub r0: Option<i64>,
    pub mode: CheckMode,
    /// Configurations evaluated.
    pub checked: u64,
    /// Configurations satisfying the hypothesis.
    pub nonvacuous: u64,
    pub counterexamples: u64,
    pub first_counterexample: Option<Vec<i64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub ns: Vec<usize>,
    pub ds: Vec<usize>,
    pub ls: Vec<i64>,
    pub r0s: Vec<i64>,
    /// Largest box enumerated exhaustively; larger boxes are sampled with this
    /// many draws.
    pub budget: u64,
    /// Random centre sets per cell for the counting check.
    pub counting_sets: usize,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            ns: vec![1, 2, 3],
            ds: vec![1, 2],
            ls: vec![1, 2, 3],
            r0s: vec![0, 1, 2],
            budget: 2_000_000,
            counting_sets: 40,
            seed: 0x5eed,
        }
    }
}

enum Outcome {
    Vacuous,
    Holds,
    Fails,
}

struct CellResult {
    mode: CheckMode,
    checked: u64,
    nonvacuous: u64,
    counterexamples: u64,
    first: Option<Vec<i64>>,
}

fn run_cell(
    ranges: &[(i64, i64)],
    budget: u64,
    seed: u64,
    mut f: impl FnMut(&[i64]) -> Outcome,
) -> CellResult {
    let size = ranges.iter().try_fold(1u64, |acc, (lo, hi)| {
        acc.checked_mul((hi - lo + 1) as u64)
    });
    let exhaustive = matches!(size, Some(s) if s <= budget);
    let mut res = CellResult {
        mode: if exhaustive {
            CheckMode::Exhaustive
        } else {
            CheckMode::Sampled
        },
        checked: 0,
        nonvacuous: 0,
        counterexamples: 0,
        first: None,
    };
    let mut record = |v: &[i64], res: &mut CellResult| {
        res.checked += 1;
        match f(v) {
            Outcome::Vacuous => {}
            Outcome::Holds => res.nonvacuous += 1,
            Outcome::Fails => {
                res.nonvacuous += 1;
                res.counterexamples += 1;
                if res.first.is_none() {
                    res.first = Some(v.to_vec());
                }
            }
        }
    };
    let mut v: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    if exhaustive {
        if ranges.is_empty() {
            record(&v, &mut res);
            return res;
        }
        loop {
            record(&v, &mut res);
            let mut k = v.len();
            loop {
                if k == 0 {
                    return res;
                }
                k -= 1;
                if v[k] < ranges[k].1 {
                    v[k] += 1;
                    break;
                }
                v[k] = ranges[k].0;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..budget {
        for (slot, r) in v.iter_mut().zip(ranges) {
            *slot = rng.random_range(r.0..=r.1);
        }
        record(&v, &mut res);
    }
    res
}

fn cfg(d: usize, coords: &[i64]) -> ParticleConfiguration {
    ParticleConfiguration {
        d,
        coords: coords.to_vec(),
    }
}

/// First particle pinned at the origin, the rest free in `[-b, b]`.
fn pinned(n: usize, d: usize, b: i64) -> Vec<(i64, i64)> {
    let mut r = vec![(0, 0); d];
    r.extend(std::iter::repeat_n((-b, b), (n - 1) * d));
    r
}

fn free(n: usize, d: usize, b: i64) -> Vec<(i64, i64)> {
    vec![(-b, b); n * d]
}

fn finish(
    lemma: Lemma,
    n: usize,
    d: usize,
    l: i64,
    r0: Option<i64>,
    c: CellResult,
) -> LemmaCheck {
    LemmaCheck {
        lemma,
        n,
        d,
        l,
        r0,
        mode: c.mode,
        checked: c.checked,
        nonvacuous: c.nonvacuous,
        counterexamples: c.counterexamples,
        first_counterexample: c.first,
    }
}

pub fn check_symmetry(n: usize, d: usize, l: i64, budget: u64, seed: u64) -> LemmaCheck {
    let big_n = n;
    let b = 7 * n as i64 * l + l + 1;
    let mut ranges = pinned(n, d, b);
    ranges.extend(free(n, d, b));
    let m = n * d;
    let c = run_cell(&ranges, budget, seed, |v| {
        let (x, y) = (cfg(d, &v[..m]), cfg(d, &v[m..]));
        let a = find_separating_partition(&x, &y, l, big_n).unwrap();
        let b = find_separating_partition(&y, &x, l, big_n).unwrap();
        match (a.is_some(), b.is_some()) {
            (false, false) => Outcome::Vacuous,
            (true, true) => Outcome::Holds,
            _ => Outcome::Fails,
        }
    });
    finish(Lemma::Symmetry, n, d, l, None, c)
}

/// Every `y` outside the exclusion cubes of `x` is separable from `x` in one
/// direction. The distance clause `|x - y| > 7NL` only restricts the
/// hypothesis, so the check is run without it (a stronger statement) and the
/// literal form is implied.
pub fn check_exclusion_cubes(n: usize, d: usize, l: i64, budget: u64, seed: u64) -> LemmaCheck {
    let bx = 2 * l + 1;
    let by = 2 * n as i64 * l + 2 * l + 1;
    let mut ranges = pinned(n, d, bx);
    ranges.extend(free(n, d, by));
    let m = n * d;
    let c = run_cell(&ranges, budget, seed, |v| {
        let (x, y) = (cfg(d, &v[..m]), cfg(d, &v[m..]));
        if in_exclusion_union(&x, &y, l) {
            return Outcome::Vacuous;
        }
        if separating_subset(&x, &y, l).is_some() {
            Outcome::Holds
        } else {
            Outcome::Fails
        }
    });
    finish(Lemma::ExclusionCubes, n, d, l, None, c)
}

/// `|y - x| > diam(y) + 5NL` implies `x` is J-separable from `y`.
pub fn check_far_separable(n: usize, d: usize, l: i64, budget: u64, seed: u64) -> LemmaCheck {
    let big_n = n as i64;
    let by = 2 * l + 1;
    let bx = 5 * big_n * l + 2 * n as i64 * l + 2 * l + 2;
    let mut ranges = pinned(n, d, by);
    ranges.extend(free(n, d, bx));
    let m = n * d;
    let c = run_cell(&ranges, budget, seed, |v| {
        let (y, x) = (cfg(d, &v[..m]), cfg(d, &v[m..]));
        if x.dist(&y) <= y.diameter() + 5 * big_n * l {
            return Outcome::Vacuous;
        }
        let found = (1u64..(1 << n)).any(|mask| j_separable_unchecked(&x, &y, l, mask));
        if found {
            Outcome::Holds
        } else {
            Outcome::Fails
        }
    });
    finish(Lemma::FarSeparable, n, d, l, None, c)
}

pub fn check_pi_witness(
    n: usize,
    d: usize,
    l: i64,
    r0: i64,
    budget: u64,
    seed: u64,
) -> LemmaCheck {
    let b = n as i64 * (2 * l + r0) + 2;
    let ranges = pinned(n, d, b);
    let c = run_cell(&ranges, budget, seed, |v| {
        let u = cfg(d, v);
        match classify_interactivity(&u, l, r0) {
            Interactivity::FullyInteractive => Outcome::Vacuous,
            Interactivity::PartiallyInteractive(j) => {
                if j.len() < n && projection_gap(&u, l, &j) > r0 {
                    Outcome::Holds
                } else {
                    Outcome::Fails
                }
            }
        }
    });
    finish(Lemma::PiWitness, n, d, l, Some(r0), c)
}

/// Two FI configurations at distance `> 7nL` with `L > 2 r0` have disjoint
/// one-particle projections. Cells with `L <= 2 r0` are outside the statement
/// and report zero checks.
pub fn check_fi_disjoint(
    n: usize,
    d: usize,
    l: i64,
    r0: i64,
    budget: u64,
    seed: u64,
) -> LemmaCheck {
    if l <= 2 * r0 {
        return finish(
            Lemma::FiDisjoint,
            n,
            d,
            l,
            Some(r0),
            CellResult {
                mode: CheckMode::Exhaustive,
                checked: 0,
                nonvacuous: 0,
                counterexamples: 0,
                first: None,
            },
        );
    }
    let nn = n as i64;
    let diam = nn * (2 * l + r0);
    let far = 7 * nn * l;
    // x pinned; y given by its first particle and offsets of the others
    let mut ranges = pinned(n, d, diam);
    ranges.extend(vec![(-(far + 2 * diam + 2), far + 2 * diam + 2); d]);
    ranges.extend(vec![(-diam, diam); (n - 1) * d]);
    let m = n * d;
    let c = run_cell(&ranges, budget, seed, |v| {
        let x = cfg(d, &v[..m]);
        let base = &v[m..m + d];
        let mut yc = base.to_vec();
        for k in 0..(n - 1) * d {
            yc.push(base[k % d] + v[m + d + k]);
        }
        let y = cfg(d, &yc);
        if !is_fully_interactive(&x, l, r0) || !is_fully_interactive(&y, l, r0) || x.dist(&y) <= far
        {
            return Outcome::Vacuous;
        }
        if projections_disjoint(&x, &y, l) {
            Outcome::Holds
        } else {
            Outcome::Fails
        }
    });
    finish(Lemma::FiDisjoint, n, d, l, Some(r0), c)
}

/// Random centre sets: `M >= kappa+2` forces `M_sep >= 2`, and the same for the
/// PI-restricted counters.
pub fn check_counting(
    n: usize,
    d: usize,
    l: i64,
    r0: i64,
    sets: usize,
    seed: u64,
) -> LemmaCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let big_n = n;
    let far = 7 * big_n as i64 * l;
    let k = kappa(n);
    let mut res = CellResult {
        mode: CheckMode::Sampled,
        checked: 0,
        nonvacuous: 0,
        counterexamples: 0,
        first: None,
    };
    for _ in 0..sets {
        let count = rng.random_range(k + 2..=k + 5);
        let mut centers = Vec::with_capacity(count);
        for _ in 0..count {
            // coarse placement on a lattice of spacing just above 7NL, with
            // occasional near-duplicates to break separability
            let mut base: Vec<i64> = (0..d)
                .map(|_| rng.random_range(-(count as i64)..=count as i64) * (far + 1))
                .collect();
            if rng.random_bool(0.2) {
                for c in base.iter_mut() {
                    *c += rng.random_range(-2 * l..=2 * l);
                }
            }
            let spread = if rng.random_bool(0.5) {
                2 * l
            } else {
                4 * n as i64 * l
            };
            let mut coords = base.clone();
            for _ in 1..n {
                for c in &base {
                    coords.push(c + rng.random_range(-spread..=spread));
                }
            }
            let u = cfg(d, &coords);
            let kind = if classify_interactivity(&u, l, r0).is_fi() {
                CubeKind::Fi
            } else {
                CubeKind::Pi
            };
            centers.push((u, kind));
        }
        let counts = count_singular_maxima(&centers, l, big_n).unwrap();
        res.checked += 1;
        let mut hyp = false;
        let mut ok = true;
        if counts.m >= k + 2 {
            hyp = true;
            ok &= counts.m_sep >= 2;
        }
        if counts.m_pi >= k + 2 {
            hyp = true;
            ok &= counts.m_pi_sep >= 2;
        }
        if hyp {
            res.nonvacuous += 1;
            if !ok {
                res.counterexamples += 1;
                if res.first.is_none() {
                    res.first = Some(centers.iter().flat_map(|c| c.0.coords.clone()).collect());
                }
            }
        }
    }
    finish(Lemma::Counting, n, d, l, Some(r0), res)
}

/// All lemma checks over the configured grid of `(n, d, L, r0)`.
pub fn run_suite(cfg: &SuiteConfig) -> Vec<LemmaCheck> {
    let mut out = Vec::new();
    let mut cell_seed = cfg.seed;
    let mut next_seed = || {
        cell_seed = cell_seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        cell_seed
    };
    for &n in &cfg.ns {
        for &d in &cfg.ds {
            for &l in &cfg.ls {
                out.push(check_symmetry(n, d, l, cfg.budget, next_seed()));
                out.push(check_exclusion_cubes(n, d, l, cfg.budget, next_seed()));
                out.push(check_far_separable(n, d, l, cfg.budget, next_seed()));
                for &r0 in &cfg.r0s {
                    out.push(check_pi_witness(n, d, l, r0, cfg.budget, next_seed()));
                    out.push(check_fi_disjoint(n, d, l, r0, cfg.budget, next_seed()));
                }
                let r0 = cfg.r0s.first().copied().unwrap_or(0);
                out.push(check_counting(n, d, l, r0, cfg.counting_sets, next_seed()));
            }
        }
    }
    out
}
