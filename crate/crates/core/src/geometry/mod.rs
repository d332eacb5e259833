//! Max-norm combinatorics of multi-particle lattice cubes.
//!
//! Every cube here is a closed lattice cube `C_L(u) = {x in Z^d : |x - u|_inf <= L}`.
//! Two such cubes share a lattice point iff their centres are at max-norm
//! distance at most `2L`, so all predicates reduce to integer comparisons.

pub mod checks;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GeometryError {
    #[error("configuration needs n >= 1 and d >= 1, got {coords} coordinates for d = {d}")]
    InvalidConfiguration { coords: usize, d: usize },
    #[error("mismatched configurations: n = {n1}, d = {d1} vs n = {n2}, d = {d2}")]
    DimensionMismatch {
        n1: usize,
        d1: usize,
        n2: usize,
        d2: usize,
    },
    #[error("index subset {mask:#b} is not a nonempty subset of {{1..{n}}}")]
    InvalidPartition { mask: u64, n: usize },
    #[error("half-side must be at least 1, got {0}")]
    InvalidHalfSide(i64),
    #[error("configuration is not fully interactive")]
    NotFullyInteractive,
    #[error("total particle count N = {big_n} is smaller than n = {n}")]
    ParticleCount { n: usize, big_n: usize },
}

/// Max-norm distance between two points of `Z^d`.
#[inline]
pub fn linf(a: &[i64], b: &[i64]) -> i64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q).abs())
        .max()
        .unwrap_or(0)
}

/// An ordered tuple of `n` points of `Z^d`, stored flat (particle-major).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParticleConfiguration {
    d: usize,
    coords: Vec<i64>,
}

impl ParticleConfiguration {
    pub fn new(d: usize, coords: Vec<i64>) -> Result<Self, GeometryError> {
        if d == 0 || coords.is_empty() || coords.len() % d != 0 {
            return Err(GeometryError::InvalidConfiguration {
                coords: coords.len(),
                d,
            });
        }
        Ok(Self { d, coords })
    }

    /// One-dimensional configuration `(u_1, ..., u_n)`.
    pub fn from_1d(points: &[i64]) -> Self {
        Self::new(1, points.to_vec()).expect("nonempty 1d configuration")
    }

    pub fn from_points(points: &[Vec<i64>]) -> Result<Self, GeometryError> {
        let d = points.first().map_or(0, Vec::len);
        if points.iter().any(|p| p.len() != d) {
            return Err(GeometryError::InvalidConfiguration {
                coords: points.iter().map(Vec::len).sum(),
                d,
            });
        }
        Self::new(d, points.concat())
    }

    pub fn n(&self) -> usize {
        self.coords.len() / self.d
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords
    }

    pub fn point(&self, i: usize) -> &[i64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    pub fn points(&self) -> impl Iterator<Item = &[i64]> {
        self.coords.chunks(self.d)
    }

    /// Max-norm distance in `Z^{nd}`.
    pub fn dist(&self, other: &Self) -> i64 {
        linf(&self.coords, &other.coords)
    }

    /// `max_{i,j} |u_i - u_j|`.
    pub fn diameter(&self) -> i64 {
        let n = self.n();
        let mut best = 0;
        for i in 0..n {
            for j in i + 1..n {
                best = best.max(linf(self.point(i), self.point(j)));
            }
        }
        best
    }

    /// Sub-configuration of the particles in `J`, in increasing index order.
    pub fn project(&self, part: &IndexPartition) -> Self {
        let coords = part
            .members()
            .into_iter()
            .flat_map(|i| self.point(i).to_vec())
            .collect();
        Self { d: self.d, coords }
    }

    pub fn translated(&self, shift: &[i64]) -> Self {
        let coords = self
            .coords
            .iter()
            .enumerate()
            .map(|(k, c)| c + shift[k % self.d])
            .collect();
        Self { d: self.d, coords }
    }

    fn check_same_shape(&self, other: &Self) -> Result<(), GeometryError> {
        if self.d != other.d || self.n() != other.n() {
            return Err(GeometryError::DimensionMismatch {
                n1: self.n(),
                d1: self.d,
                n2: other.n(),
                d2: other.d,
            });
        }
        Ok(())
    }
}

/// Closed n-particle cube `C_L(u)` in `Z^{nd}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiCube {
    center: ParticleConfiguration,
    half_side: i64,
}

impl MultiCube {
    pub fn new(center: ParticleConfiguration, half_side: i64) -> Result<Self, GeometryError> {
        if half_side < 1 {
            return Err(GeometryError::InvalidHalfSide(half_side));
        }
        Ok(Self { center, half_side })
    }

    pub fn center(&self) -> &ParticleConfiguration {
        &self.center
    }

    pub fn half_side(&self) -> i64 {
        self.half_side
    }

    pub fn n(&self) -> usize {
        self.center.n()
    }

    pub fn d(&self) -> usize {
        self.center.d()
    }

    /// Radius of the int region `C_{floor(L/3)}(u)`.
    pub fn int_radius(&self) -> i64 {
        self.half_side / 3
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        linf(x, self.center.coords()) <= self.half_side
    }

    pub fn in_int(&self, x: &[i64]) -> bool {
        linf(x, self.center.coords()) <= self.int_radius()
    }

    /// Membership in the shell `C_L(u) \ C_{L-2}(u)`.
    pub fn in_out(&self, x: &[i64]) -> bool {
        let r = linf(x, self.center.coords());
        r <= self.half_side && r > self.half_side - 2
    }

    /// `C_l(v)` is contained in this cube.
    pub fn contains_cube(&self, other: &MultiCube) -> bool {
        self.center.dist(&other.center) + other.half_side <= self.half_side
    }

    /// Sub-cube on the particles in `J`.
    pub fn project(&self, part: &IndexPartition) -> MultiCube {
        MultiCube {
            center: self.center.project(part),
            half_side: self.half_side,
        }
    }
}

/// A nonempty subset `J` of particle indices, encoded as a bitmask (bit `i` is
/// particle `i`, zero-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IndexPartition {
    n: usize,
    mask: u64,
}

impl IndexPartition {
    pub fn new(n: usize, mask: u64) -> Result<Self, GeometryError> {
        if n == 0 || n > 63 || mask == 0 || mask >> n != 0 {
            return Err(GeometryError::InvalidPartition { mask, n });
        }
        Ok(Self { n, mask })
    }

    /// Build from zero-based indices.
    pub fn from_indices(n: usize, idx: &[usize]) -> Result<Self, GeometryError> {
        let mask = idx.iter().fold(0u64, |m, &i| m | (1u64 << i.min(63)));
        Self::new(n, mask)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mask(&self) -> u64 {
        self.mask
    }

    pub fn contains(&self, i: usize) -> bool {
        self.mask >> i & 1 == 1
    }

    pub fn members(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.contains(i)).collect()
    }

    pub fn len(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `J^c`, or `None` when `J` is everything.
    pub fn complement(&self) -> Option<IndexPartition> {
        let full = (1u64 << self.n) - 1;
        let c = full & !self.mask;
        (c != 0).then_some(IndexPartition { n: self.n, mask: c })
    }

    /// All nonempty subsets in increasing bitmask order.
    pub fn all(n: usize) -> impl Iterator<Item = IndexPartition> {
        (1u64..(1u64 << n)).map(move |mask| IndexPartition { n, mask })
    }
}

/// Maximal L-clusters of a configuration; indices are zero-based, each cluster
/// sorted, clusters ordered by their smallest index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterDecomposition {
    pub clusters: Vec<Vec<usize>>,
}

impl ClusterDecomposition {
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn cluster_of(&self, i: usize) -> Option<usize> {
        self.clusters.iter().position(|c| c.contains(&i))
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Closed cubes `C_L(a)` and `C_L(b)` share a lattice point.
#[inline]
pub fn cubes_meet(a: &[i64], b: &[i64], l: i64) -> bool {
    linf(a, b) <= 2 * l
}

pub fn cluster_decompose(y: &ParticleConfiguration, l: i64) -> ClusterDecomposition {
    let n = y.n();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in i + 1..n {
            if cubes_meet(y.point(i), y.point(j), l) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut root_slot: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        match root_slot[r] {
            Some(k) => clusters[k].push(i),
            None => {
                root_slot[r] = Some(clusters.len());
                clusters.push(vec![i]);
            }
        }
    }
    ClusterDecomposition { clusters }
}

/// `x` is J-separable from `y`: the cubes of `x_J` avoid those of `x_{J^c}`
/// and all cubes of `y`.
pub fn is_j_separable(
    x: &ParticleConfiguration,
    y: &ParticleConfiguration,
    l: i64,
    part: &IndexPartition,
) -> Result<bool, GeometryError> {
    x.check_same_shape(y)?;
    if part.n() != x.n() {
        return Err(GeometryError::InvalidPartition {
            mask: part.mask(),
            n: x.n(),
        });
    }
    Ok(j_separable_unchecked(x, y, l, part.mask()))
}

pub(crate) fn j_separable_unchecked(
    x: &ParticleConfiguration,
    y: &ParticleConfiguration,
    l: i64,
    mask: u64,
) -> bool {
    let n = x.n();
    for j in (0..n).filter(|&j| mask >> j & 1 == 1) {
        let xj = x.point(j);
        for i in 0..n {
            if mask >> i & 1 == 0 && cubes_meet(xj, x.point(i), l) {
                return false;
            }
            if cubes_meet(xj, y.point(i), l) {
                return false;
            }
        }
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    /// `x` is J-separable from `y`.
    X,
    /// `y` is J-separable from `x`.
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeparatingWitness {
    pub side: Side,
    pub partition: IndexPartition,
}

/// J-separability in either direction, ignoring the distance clause.
pub fn separating_subset(
    x: &ParticleConfiguration,
    y: &ParticleConfiguration,
    l: i64,
) -> Option<SeparatingWitness> {
    let n = x.n();
    for mask in 1u64..(1u64 << n) {
        if j_separable_unchecked(x, y, l, mask) {
            return Some(SeparatingWitness {
                side: Side::X,
                partition: IndexPartition { n, mask },
            });
        }
    }
    for mask in 1u64..(1u64 << n) {
        if j_separable_unchecked(y, x, l, mask) {
            return Some(SeparatingWitness {
                side: Side::Y,
                partition: IndexPartition { n, mask },
            });
        }
    }
    None
}

/// Witness that the pair `(C_L(x), C_L(y))` is separable: `|x - y| > 7NL` and
/// one side is J-separable from the other.
pub fn find_separating_partition(
    x: &ParticleConfiguration,
    y: &ParticleConfiguration,
    l: i64,
    big_n: usize,
) -> Result<Option<SeparatingWitness>, GeometryError> {
    x.check_same_shape(y)?;
    if big_n < x.n() {
        return Err(GeometryError::ParticleCount {
            n: x.n(),
            big_n,
        });
    }
    if x.dist(y) <= 7 * big_n as i64 * l {
        return Ok(None);
    }
    Ok(separating_subset(x, y, l))
}

pub fn kappa(n: usize) -> usize {
    n.pow(n as u32)
}

/// Half-side `2nL` of the exclusion cubes.
pub fn exclusion_half_side(n: usize, l: i64) -> i64 {
    2 * n as i64 * l
}

/// Centres `(x_{s(1)}, ..., x_{s(n)})` over all maps `s: {1..n} -> {1..n}`,
/// duplicates removed, in order of first appearance.
pub fn exclusion_cube_centers(x: &ParticleConfiguration, _l: i64) -> Vec<ParticleConfiguration> {
    let n = x.n();
    let mut out: Vec<ParticleConfiguration> = Vec::new();
    let mut sigma = vec![0usize; n];
    loop {
        let coords: Vec<i64> = sigma.iter().flat_map(|&s| x.point(s).to_vec()).collect();
        let c = ParticleConfiguration { d: x.d, coords };
        if !out.contains(&c) {
            out.push(c);
        }
        let mut k = n;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            sigma[k] += 1;
            if sigma[k] < n {
                break;
            }
            sigma[k] = 0;
        }
    }
}

/// `y` lies in some exclusion cube of `x`. Equivalent to every `y_j` being
/// within `2nL` of some `x_i`, since the index map is arbitrary.
pub fn in_exclusion_union(x: &ParticleConfiguration, y: &ParticleConfiguration, l: i64) -> bool {
    let r = exclusion_half_side(x.n(), l);
    y.points().all(|yj| x.points().any(|xi| linf(xi, yj) <= r))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Interactivity {
    FullyInteractive,
    PartiallyInteractive(IndexPartition),
}

impl Interactivity {
    pub fn is_fi(&self) -> bool {
        matches!(self, Interactivity::FullyInteractive)
    }
}

/// `min_{j in J, i notin J} |u_j - u_i| - 2L`: lattice gap between the one-particle
/// projections of `C_L(u_J)` and `C_L(u_{J^c})` (negative when they overlap).
pub fn projection_gap(u: &ParticleConfiguration, l: i64, part: &IndexPartition) -> i64 {
    let n = u.n();
    let mut gap = i64::MAX;
    for j in (0..n).filter(|&j| part.contains(j)) {
        for i in (0..n).filter(|&i| !part.contains(i)) {
            gap = gap.min(linf(u.point(j), u.point(i)) - 2 * l);
        }
    }
    gap
}

pub fn is_fully_interactive(u: &ParticleConfiguration, l: i64, r0: i64) -> bool {
    u.diameter() <= u.n() as i64 * (2 * l + r0)
}

/// FI when `diam(u) <= n(2L + r0)`; otherwise PI with the smallest subset `J`
/// (by bitmask, `1 <= |J| <= n-1`) whose projection gap exceeds `r0`.
pub fn classify_interactivity(u: &ParticleConfiguration, l: i64, r0: i64) -> Interactivity {
    if is_fully_interactive(u, l, r0) {
        return Interactivity::FullyInteractive;
    }
    let n = u.n();
    for part in IndexPartition::all(n) {
        if part.len() < n && projection_gap(u, l, &part) > r0 {
            return Interactivity::PartiallyInteractive(part);
        }
    }
    unreachable!("a configuration with diameter above n(2L+r0) always splits")
}

/// Whether `U_{pi}C_L(x_i)` and `U_{pi}C_L(y_j)` are disjoint, for two FI cubes.
pub fn fi_projection_disjoint(
    x: &ParticleConfiguration,
    y: &ParticleConfiguration,
    l: i64,
    r0: i64,
) -> Result<bool, GeometryError> {
    x.check_same_shape(y)?;
    if !is_fully_interactive(x, l, r0) || !is_fully_interactive(y, l, r0) {
        return Err(GeometryError::NotFullyInteractive);
    }
    Ok(projections_disjoint(x, y, l))
}

pub fn projections_disjoint(x: &ParticleConfiguration, y: &ParticleConfiguration, l: i64) -> bool {
    x.points().all(|a| y.points().all(|b| !cubes_meet(a, b, l)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CubeKind {
    Pi,
    Fi,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SingularCounts {
    /// Largest family of cubes at pairwise distance `> 7NL`.
    pub m: usize,
    /// Largest pairwise separable family.
    pub m_sep: usize,
    pub m_pi: usize,
    pub m_pi_sep: usize,
    pub m_fi: usize,
}

/// Counters over a list of (singular) cube centres of common half-side `L`.
pub fn count_singular_maxima(
    centers: &[(ParticleConfiguration, CubeKind)],
    l: i64,
    big_n: usize,
) -> Result<SingularCounts, GeometryError> {
    let k = centers.len();
    if k == 0 {
        return Ok(SingularCounts::default());
    }
    for (c, _) in centers {
        c.check_same_shape(&centers[0].0)?;
    }
    if big_n < centers[0].0.n() {
        return Err(GeometryError::ParticleCount {
            n: centers[0].0.n(),
            big_n,
        });
    }
    let far = 7 * big_n as i64 * l;
    let mut dist_ok = vec![vec![false; k]; k];
    let mut sep_ok = vec![vec![false; k]; k];
    for a in 0..k {
        for b in a + 1..k {
            let (x, y) = (&centers[a].0, &centers[b].0);
            let fa = x.dist(y) > far;
            let sa = fa && separating_subset(x, y, l).is_some();
            dist_ok[a][b] = fa;
            dist_ok[b][a] = fa;
            sep_ok[a][b] = sa;
            sep_ok[b][a] = sa;
        }
    }
    let all: Vec<usize> = (0..k).collect();
    let pi: Vec<usize> = all
        .iter()
        .copied()
        .filter(|&i| centers[i].1 == CubeKind::Pi)
        .collect();
    let fi: Vec<usize> = all
        .iter()
        .copied()
        .filter(|&i| centers[i].1 == CubeKind::Fi)
        .collect();
    Ok(SingularCounts {
        m: max_clique(&dist_ok, &all),
        m_sep: max_clique(&sep_ok, &all),
        m_pi: max_clique(&dist_ok, &pi),
        m_pi_sep: max_clique(&sep_ok, &pi),
        m_fi: max_clique(&dist_ok, &fi),
    })
}

/// Size of the largest clique of `adj` inside `vertices` (branch and bound).
pub fn max_clique(adj: &[Vec<bool>], vertices: &[usize]) -> usize {
    fn grow(adj: &[Vec<bool>], size: usize, cand: &[usize], best: &mut usize) {
        if cand.is_empty() {
            *best = (*best).max(size);
            return;
        }
        for (pos, &v) in cand.iter().enumerate() {
            if size + cand.len() - pos <= *best {
                return;
            }
            let next: Vec<usize> = cand[pos + 1..]
                .iter()
                .copied()
                .filter(|&w| adj[v][w])
                .collect();
            grow(adj, size + 1, &next, best);
        }
    }
    let mut best = 0;
    grow(adj, 0, vertices, &mut best);
    best
}
