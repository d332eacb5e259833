//! Finite-volume multi-particle Hamiltonians `-Δ + U + V` with Dirichlet boundary.
//!
//! Regions are products of integer intervals in `Z^{nd}` (site units). With
//! refinement `k` every unit cell carries `k` grid points per axis at spacing
//! `h = 1/k`; the potential is constant on each cell.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{linf, IndexPartition, MultiCube};
use crate::rng::{counter_hash, unit_interval};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("unknown distribution tag `{0}`")]
    UnknownDistribution(String),
    #[error("invalid distribution parameters: {0}")]
    InvalidDistribution(String),
    #[error("field has no value at site {0:?}")]
    InsufficientCoverage(Vec<i64>),
    #[error("empty region")]
    EmptyRegion,
    #[error("grid spacing must be 1/k for a positive integer k, got {0}")]
    InvalidSpacing(f64),
    #[error("invalid interaction: {0}")]
    InvalidInteraction(String),
    #[error("cube is not partially interactive for the given subset (gap {gap} <= r0 {r0})")]
    NotPartiallyInteractive { gap: i64, r0: i64 },
    #[error("eigensolver did not converge")]
    Eigensolver,
}

/// Single-site law of the potential. All supported laws live on `[0, inf)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Distribution {
    Uniform { lo: f64, hi: f64 },
    /// Value `a` with probability `p0`, otherwise `b`.
    Bernoulli { p0: f64, a: f64, b: f64 },
    /// Finite table of `(value, probability)`.
    Table { values: Vec<f64>, probs: Vec<f64> },
}

impl Distribution {
    pub fn uniform01() -> Self {
        Distribution::Uniform { lo: 0.0, hi: 1.0 }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidDistribution(m.to_string()));
        match self {
            Distribution::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && *lo >= 0.0 && lo <= hi) {
                    return bad("uniform needs 0 <= lo <= hi");
                }
            }
            Distribution::Bernoulli { p0, a, b } => {
                if !((0.0..=1.0).contains(p0) && *a >= 0.0 && *b >= 0.0) {
                    return bad("bernoulli needs p0 in [0,1] and a, b >= 0");
                }
            }
            Distribution::Table { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return bad("table needs matching nonempty value/probability lists");
                }
                if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return bad("table values must be finite and >= 0");
                }
                let s: f64 = probs.iter().sum();
                if probs.iter().any(|p| *p < 0.0) || (s - 1.0).abs() > 1e-9 {
                    return bad("table probabilities must be >= 0 and sum to 1");
                }
            }
        }
        Ok(())
    }

    /// Quantile function on `[0, 1)`.
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        match self {
            Distribution::Uniform { lo, hi } => lo + (hi - lo) * u,
            Distribution::Bernoulli { p0, a, b } => {
                if u < *p0 {
                    *a
                } else {
                    *b
                }
            }
            Distribution::Table { values, probs } => {
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                *values.last().unwrap()
            }
        }
    }

    /// Smallest value in the support.
    pub fn support_min(&self) -> f64 {
        match self {
            Distribution::Uniform { lo, .. } => *lo,
            Distribution::Bernoulli { p0, a, b } => {
                if *p0 <= 0.0 {
                    *b
                } else if *p0 >= 1.0 {
                    *a
                } else {
                    a.min(*b)
                }
            }
            Distribution::Table { values, probs } => values
                .iter()
                .zip(probs)
                .filter(|(_, p)| **p > 0.0)
                .map(|(v, _)| *v)
                .fold(f64::INFINITY, f64::min),
        }
    }

    pub fn scaled(&self, f: f64) -> Self {
        match self {
            Distribution::Uniform { lo, hi } => Distribution::Uniform {
                lo: lo * f,
                hi: hi * f,
            },
            Distribution::Bernoulli { p0, a, b } => Distribution::Bernoulli {
                p0: *p0,
                a: a * f,
                b: b * f,
            },
            Distribution::Table { values, probs } => Distribution::Table {
                values: values.iter().map(|v| v * f).collect(),
                probs: probs.clone(),
            },
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distribution::Uniform { lo, hi } if *lo == 0.0 && *hi == 1.0 => write!(f, "uniform01"),
            Distribution::Uniform { lo, hi } => write!(f, "uniform({lo},{hi})"),
            Distribution::Bernoulli { p0, a, b } => write!(f, "bernoulli({p0},{a},{b})"),
            Distribution::Table { values, probs } => {
                write!(f, "table(")?;
                for (i, (v, p)) in values.iter().zip(probs).enumerate() {
                    if i > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{v}:{p}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl FromStr for Distribution {
    type Err = ModelError;

    /// Tags: `uniform01`, `uniform(lo,hi)`, `bernoulli(p0,a,b)`, `table(v:p;v:p;...)`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let unknown = || ModelError::UnknownDistribution(s.to_string());
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| unknown());
        let dist = if s == "uniform01" {
            Distribution::uniform01()
        } else {
            let open = s.find('(').ok_or_else(unknown)?;
            let body = s[open + 1..].strip_suffix(')').ok_or_else(unknown)?;
            match &s[..open] {
                "uniform" => {
                    let v: Vec<f64> = body.split(',').map(num).collect::<Result<_, _>>()?;
                    if v.len() != 2 {
                        return Err(unknown());
                    }
                    Distribution::Uniform { lo: v[0], hi: v[1] }
                }
                "bernoulli" => {
                    let v: Vec<f64> = body.split(',').map(num).collect::<Result<_, _>>()?;
                    if v.len() != 3 {
                        return Err(unknown());
                    }
                    Distribution::Bernoulli {
                        p0: v[0],
                        a: v[1],
                        b: v[2],
                    }
                }
                "table" => {
                    let mut values = Vec::new();
                    let mut probs = Vec::new();
                    for item in body.split(';') {
                        let (v, p) = item.split_once(':').ok_or_else(unknown)?;
                        values.push(num(v)?);
                        probs.push(num(p)?);
                    }
                    Distribution::Table { values, probs }
                }
                _ => return Err(unknown()),
            }
        };
        dist.validate()?;
        Ok(dist)
    }
}

/// Source of site potentials on `Z^d`.
pub trait PotentialField: Sync {
    /// `None` when the site is outside the field's coverage.
    fn value(&self, site: &[i64]) -> Option<f64>;
    fn id(&self) -> String;
}

/// The i.i.d. field over all of `Z^d`, evaluated on demand from `(seed, site)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomField {
    pub seed: u64,
    pub distribution: Distribution,
}

impl RandomField {
    pub fn new(seed: u64, distribution: Distribution) -> Result<Self, ModelError> {
        distribution.validate()?;
        Ok(Self { seed, distribution })
    }
}

impl PotentialField for RandomField {
    fn value(&self, site: &[i64]) -> Option<f64> {
        Some(
            self.distribution
                .inverse_cdf(unit_interval(counter_hash(self.seed, site))),
        )
    }

    fn id(&self) -> String {
        format!("{}@{:#018x}", self.distribution, self.seed)
    }
}

/// Inclusive box `[lo, hi]` in `Z^d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SiteBox {
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
}

impl SiteBox {
    pub fn new(lo: Vec<i64>, hi: Vec<i64>) -> Result<Self, ModelError> {
        if lo.is_empty() || lo.len() != hi.len() || lo.iter().zip(&hi).any(|(a, b)| a > b) {
            return Err(ModelError::EmptyRegion);
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, site: &[i64]) -> bool {
        site.len() == self.lo.len()
            && site
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(s, (a, b))| a <= s && s <= b)
    }

    pub fn len(&self) -> usize {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| (b - a + 1) as usize)
            .product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn offset(&self, site: &[i64]) -> usize {
        let mut idx = 0usize;
        for (k, &s) in site.iter().enumerate() {
            idx = idx * (self.hi[k] - self.lo[k] + 1) as usize + (s - self.lo[k]) as usize;
        }
        idx
    }

    pub fn sites(&self) -> Vec<Vec<i64>> {
        let mut out = Vec::with_capacity(self.len());
        let mut s = self.lo.clone();
        loop {
            out.push(s.clone());
            let mut k = s.len();
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                if s[k] < self.hi[k] {
                    s[k] += 1;
                    break;
                }
                s[k] = self.lo[k];
            }
        }
    }
}

/// One realization of the field materialized on a bounded region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomFieldSample {
    pub region: SiteBox,
    pub seed: u64,
    pub distribution: Distribution,
    pub values: Vec<f64>,
}

impl RandomFieldSample {
    pub fn get(&self, site: &[i64]) -> Option<f64> {
        self.region
            .contains(site)
            .then(|| self.values[self.region.offset(site)])
    }
}

impl PotentialField for RandomFieldSample {
    fn value(&self, site: &[i64]) -> Option<f64> {
        self.get(site)
    }

    fn id(&self) -> String {
        format!("{}@{:#018x}", self.distribution, self.seed)
    }
}

pub fn sample_field(
    seed: u64,
    region: &SiteBox,
    distribution: &Distribution,
) -> Result<RandomFieldSample, ModelError> {
    let field = RandomField::new(seed, distribution.clone())?;
    let values = region
        .sites()
        .iter()
        .map(|s| field.value(s).unwrap())
        .collect();
    Ok(RandomFieldSample {
        region: region.clone(),
        seed,
        distribution: distribution.clone(),
        values,
    })
}

/// `V = c` everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantField(pub f64);

impl PotentialField for ConstantField {
    fn value(&self, _site: &[i64]) -> Option<f64> {
        Some(self.0)
    }

    fn id(&self) -> String {
        format!("const({})", self.0)
    }
}

/// A base field with some sites overwritten.
#[derive(Debug, Clone)]
pub struct PlantedField<F> {
    pub base: F,
    pub overrides: BTreeMap<Vec<i64>, f64>,
}

impl<F: PotentialField> PlantedField<F> {
    pub fn new(base: F) -> Self {
        Self {
            base,
            overrides: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, site: Vec<i64>, v: f64) {
        self.overrides.insert(site, v);
    }
}

impl<F: PotentialField> PotentialField for PlantedField<F> {
    fn value(&self, site: &[i64]) -> Option<f64> {
        self.overrides
            .get(site)
            .copied()
            .or_else(|| self.base.value(site))
    }

    fn id(&self) -> String {
        format!("{}+planted[{}]", self.base.id(), self.overrides.len())
    }
}

/// Pair interaction `U(x) = sum_{i<j} phi(|x_i - x_j|)`, `phi = 0` beyond `r0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionSpec {
    pub r0: i64,
    /// `phi[r]` for `r = 0..=r0`.
    pub phi: Vec<f64>,
}

impl InteractionSpec {
    pub fn new(r0: i64, phi: Vec<f64>) -> Result<Self, ModelError> {
        if r0 < 0 || phi.len() != r0 as usize + 1 {
            return Err(ModelError::InvalidInteraction(format!(
                "need r0 >= 0 and r0+1 values, got r0 = {r0}, {} values",
                phi.len()
            )));
        }
        if phi.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(ModelError::InvalidInteraction(
                "phi values must be finite and >= 0".into(),
            ));
        }
        Ok(Self { r0, phi })
    }

    /// `phi(r) = u0` for `r <= r0`.
    pub fn step(u0: f64, r0: i64) -> Result<Self, ModelError> {
        Self::new(r0, vec![u0; r0.max(0) as usize + 1])
    }

    pub fn none() -> Self {
        Self {
            r0: 0,
            phi: vec![0.0],
        }
    }

    pub fn phi_at(&self, r: i64) -> f64 {
        if (0..=self.r0).contains(&r) {
            self.phi[r as usize]
        } else {
            0.0
        }
    }

    pub fn id(&self) -> String {
        let vals: Vec<String> = self.phi.iter().map(|v| v.to_string()).collect();
        format!("phi[{}]", vals.join(","))
    }
}

impl Default for InteractionSpec {
    fn default() -> Self {
        Self::step(1.0, 1).unwrap()
    }
}

/// `U` at the configuration `x` (flat, `n*d` coordinates).
pub fn interaction_energy(x: &[i64], d: usize, spec: &InteractionSpec) -> f64 {
    let n = x.len() / d;
    let mut u = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            u += spec.phi_at(linf(&x[i * d..(i + 1) * d], &x[j * d..(j + 1) * d]));
        }
    }
    u
}

/// Grid spacing `h = 1 / cells_per_unit`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DiscretizationSpec {
    pub cells_per_unit: u32,
}

impl DiscretizationSpec {
    pub fn lattice() -> Self {
        Self { cells_per_unit: 1 }
    }

    pub fn from_h(h: f64) -> Result<Self, ModelError> {
        let k = (1.0 / h).round();
        if !(h > 0.0) || k < 1.0 || ((1.0 / k) - h).abs() > 1e-12 {
            return Err(ModelError::InvalidSpacing(h));
        }
        Ok(Self {
            cells_per_unit: k as u32,
        })
    }

    pub fn h(&self) -> f64 {
        1.0 / self.cells_per_unit as f64
    }
}

impl Default for DiscretizationSpec {
    fn default() -> Self {
        Self::lattice()
    }
}

/// Product of site intervals in `Z^{nd}`, coordinates particle-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SiteRegion {
    pub d: usize,
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
}

impl SiteRegion {
    pub fn cube(cube: &MultiCube) -> Self {
        let l = cube.half_side();
        let c = cube.center().coords();
        Self {
            d: cube.d(),
            lo: c.iter().map(|v| v - l).collect(),
            hi: c.iter().map(|v| v + l).collect(),
        }
    }

    /// `C_a x C_b` with the particles of `a` first.
    pub fn product(a: &SiteRegion, b: &SiteRegion) -> Self {
        Self {
            d: a.d,
            lo: a.lo.iter().chain(&b.lo).copied().collect(),
            hi: a.hi.iter().chain(&b.hi).copied().collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.lo.len() / self.d
    }

    pub fn contains(&self, sites: &[i64]) -> bool {
        sites
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(s, (a, b))| a <= s && s <= b)
    }
}

/// Provenance carried with every assembled matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub field: String,
    pub interaction: String,
    pub cells_per_unit: u32,
}

/// Sparse symmetric `-Δ_h + U + V` on a grid region: a diagonal plus the uniform
/// nearest-neighbour hopping `-h^{-2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianMatrix {
    region: SiteRegion,
    k: i64,
    shape: Vec<usize>,
    strides: Vec<usize>,
    diagonal: Vec<f64>,
    hopping: f64,
    provenance: Provenance,
}

impl HamiltonianMatrix {
    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn region(&self) -> &SiteRegion {
        &self.region
    }

    pub fn cells_per_unit(&self) -> u32 {
        self.k as u32
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn hopping(&self) -> f64 {
        self.hopping
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Total dimension `D = nd` of the configuration space.
    pub fn config_dim(&self) -> usize {
        self.shape.len()
    }

    /// Global grid coordinates of a basis index.
    pub fn grid_point(&self, idx: usize) -> Vec<i64> {
        let mut rem = idx;
        let mut out = vec![0i64; self.shape.len()];
        for a in 0..self.shape.len() {
            out[a] = self.region.lo[a] * self.k + (rem / self.strides[a]) as i64;
            rem %= self.strides[a];
        }
        out
    }

    /// Cell (site configuration in `Z^{nd}`) containing a basis index.
    pub fn cell_of(&self, idx: usize) -> Vec<i64> {
        self.grid_point(idx)
            .into_iter()
            .map(|g| g.div_euclid(self.k))
            .collect()
    }

    /// Basis index of a global grid point, if inside.
    pub fn index_of(&self, grid: &[i64]) -> Option<usize> {
        let mut idx = 0;
        for a in 0..self.shape.len() {
            let off = grid[a] - self.region.lo[a] * self.k;
            if off < 0 || off as usize >= self.shape[a] {
                return None;
            }
            idx += off as usize * self.strides[a];
        }
        Some(idx)
    }

    /// Basis indices whose cell satisfies `pred`, increasing.
    pub fn indices_where(&self, mut pred: impl FnMut(&[i64]) -> bool) -> Vec<usize> {
        (0..self.dim()).filter(|&i| pred(&self.cell_of(i))).collect()
    }

    /// Grid neighbours of index `i`.
    pub fn neighbours(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let mut rem = i;
        let mut pos = vec![0usize; self.shape.len()];
        for a in 0..self.shape.len() {
            pos[a] = rem / self.strides[a];
            rem %= self.strides[a];
        }
        (0..self.shape.len()).flat_map(move |a| {
            let s = self.strides[a];
            let lo = (pos[a] > 0).then(|| i - s);
            let hi = (pos[a] + 1 < self.shape[a]).then(|| i + s);
            lo.into_iter().chain(hi)
        })
    }

    /// Upper-triangular nonzeros `(i, j, value)` with `i <= j`.
    pub fn entries(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.dim() {
            out.push((i, i, self.diagonal[i]));
            for j in self.neighbours(i) {
                if j > i {
                    out.push((i, j, self.hopping));
                }
            }
        }
        out
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                self.diagonal[i] * x[i]
                    + self.neighbours(i).map(|j| self.hopping * x[j]).sum::<f64>()
            })
            .collect()
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let n = self.dim();
        let mut m = Mat::<f64>::zeros(n, n);
        for (i, j, v) in self.entries() {
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        m
    }

    /// Add `delta` to one diagonal entry.
    pub fn shift_diagonal(&mut self, idx: usize, delta: f64) {
        self.diagonal[idx] += delta;
    }
}

/// Assemble on a product region. Each particle's potential is read at the cell
/// containing its grid point; `U` is evaluated on cell sites.
pub fn assemble_on_region(
    region: &SiteRegion,
    field: &dyn PotentialField,
    inter: &InteractionSpec,
    disc: &DiscretizationSpec,
) -> Result<HamiltonianMatrix, ModelError> {
    let d = region.d;
    let nd = region.lo.len();
    if d == 0 || nd == 0 || nd % d != 0 || region.lo.iter().zip(&region.hi).any(|(a, b)| a > b) {
        return Err(ModelError::EmptyRegion);
    }
    let k = disc.cells_per_unit as i64;
    let shape: Vec<usize> = (0..nd)
        .map(|a| ((region.hi[a] - region.lo[a] + 1) * k) as usize)
        .collect();
    let mut strides = vec![1usize; nd];
    for a in (0..nd.saturating_sub(1)).rev() {
        strides[a] = strides[a + 1] * shape[a + 1];
    }
    let dim: usize = shape.iter().product();
    let hinv2 = (k * k) as f64;

    // one-particle potential per axis-aligned cell, cached over the projection box
    let n = nd / d;
    let mut proj_lo = vec![i64::MAX; d];
    let mut proj_hi = vec![i64::MIN; d];
    for p in 0..n {
        for a in 0..d {
            proj_lo[a] = proj_lo[a].min(region.lo[p * d + a]);
            proj_hi[a] = proj_hi[a].max(region.hi[p * d + a]);
        }
    }
    let proj = SiteBox::new(proj_lo, proj_hi)?;
    let mut vcache = vec![f64::NAN; proj.len()];
    let mut fetch = |site: &[i64]| -> Result<f64, ModelError> {
        let o = proj.offset(site);
        if vcache[o].is_nan() {
            vcache[o] = field
                .value(site)
                .ok_or_else(|| ModelError::InsufficientCoverage(site.to_vec()))?;
        }
        Ok(vcache[o])
    };

    let mut diagonal = Vec::with_capacity(dim);
    let mut cell = vec![0i64; nd];
    for idx in 0..dim {
        let mut rem = idx;
        for a in 0..nd {
            let g = region.lo[a] * k + (rem / strides[a]) as i64;
            rem %= strides[a];
            cell[a] = g.div_euclid(k);
        }
        let mut v = 2.0 * nd as f64 * hinv2;
        for p in 0..n {
            v += fetch(&cell[p * d..(p + 1) * d])?;
        }
        v += interaction_energy(&cell, d, inter);
        diagonal.push(v);
    }
    Ok(HamiltonianMatrix {
        region: region.clone(),
        k,
        shape,
        strides,
        diagonal,
        hopping: -hinv2,
        provenance: Provenance {
            field: field.id(),
            interaction: inter.id(),
            cells_per_unit: disc.cells_per_unit,
        },
    })
}

pub fn assemble_hamiltonian(
    cube: &MultiCube,
    field: &dyn PotentialField,
    inter: &InteractionSpec,
    disc: &DiscretizationSpec,
) -> Result<HamiltonianMatrix, ModelError> {
    assemble_on_region(&SiteRegion::cube(cube), field, inter, disc)
}

/// Factors `H'` on `C_L(u_J)` and `H''` on `C_L(u_{J^c})` of a PI cube, so that
/// `H = H' (x) I + I (x) H''` up to a permutation of particles.
pub fn assemble_pi_factors(
    cube: &MultiCube,
    part: &IndexPartition,
    field: &dyn PotentialField,
    inter: &InteractionSpec,
    disc: &DiscretizationSpec,
) -> Result<(HamiltonianMatrix, HamiltonianMatrix), ModelError> {
    let comp = part.complement().ok_or(ModelError::NotPartiallyInteractive {
        gap: i64::MIN,
        r0: inter.r0,
    })?;
    let gap = crate::geometry::projection_gap(cube.center(), cube.half_side(), part);
    if gap <= inter.r0 {
        return Err(ModelError::NotPartiallyInteractive { gap, r0: inter.r0 });
    }
    let left = assemble_hamiltonian(&cube.project(part), field, inter, disc)?;
    let right = assemble_hamiltonian(&cube.project(&comp), field, inter, disc)?;
    Ok((left, right))
}

/// All eigenvalues, nondecreasing.
pub fn eigenvalues(h: &HamiltonianMatrix) -> Result<Vec<f64>, ModelError> {
    h.to_dense()
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| ModelError::Eigensolver)
}

/// Smallest eigenvalue by dense symmetric diagonalization; accurate to a few
/// ulps of `||H||`, well inside the default `1e-10` tolerance at desk sizes.
pub fn spectrum_bottom(h: &HamiltonianMatrix) -> Result<f64, ModelError> {
    if h.dim() == 0 {
        return Err(ModelError::EmptyRegion);
    }
    Ok(eigenvalues(h)?[0])
}
