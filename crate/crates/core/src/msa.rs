//! Multi-scale machinery: scale recursion, masses, highly non-resonant and
//! tunnelling predicates for PI cubes, the resolvent chain certificate, and the
//! Monte Carlo statistics behind the double-singularity bounds.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    classify_interactivity, count_singular_maxima, find_separating_partition, kappa, linf,
    max_clique, CubeKind, GeometryError, IndexPartition, Interactivity, MultiCube,
    ParticleConfiguration, SingularCounts,
};
use crate::model::{
    assemble_hamiltonian, assemble_on_region, eigenvalues, Distribution, DiscretizationSpec,
    InteractionSpec, ModelError, PotentialField, RandomField, SiteRegion,
};
use crate::rng::split_seed;
use crate::spectral::{
    cube_label, dist_to_sorted, min_subcube_half_side, resonance_threshold, BlockNormEvaluator,
    CnrReport, CubeOperator, EnergyWindow, Resonance, SpectralError, SubcubeSpectra,
};
use crate::stats::{wilson_interval, MonteCarloReport, StatsError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MsaError {
    #[error("initial scale L0 = {0} is below 3")]
    InitialScale(i64),
    #[error("parameter out of range: {0}")]
    Domain(String),
    #[error("no scale l with floor(l^(3/2)) + 1 = {0}")]
    NoPreviousScale(i64),
    #[error("cubes {0} and {1} are not separable")]
    NotSeparable(String, String),
    #[error("cube {0} is not partially interactive")]
    NotPartiallyInteractive(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("matrix dimension {dim} exceeds cap {cap}; sizing: {report}")]
    Infeasible { dim: u128, cap: u128, report: String },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

// ---------------------------------------------------------------------------
// scales and masses

/// `L_{k+1} = floor(L_k^{3/2}) + 1` in exact integer arithmetic.
pub fn next_scale(l: u64) -> u64 {
    let cube = (l as u128).pow(3);
    (cube.isqrt() + 1) as u64
}

pub fn scale_sequence(l0: i64, k_max: usize) -> Result<Vec<u64>, MsaError> {
    if l0 < 3 {
        return Err(MsaError::InitialScale(l0));
    }
    if l0 == 3 {
        log::warn!("L0 = 3 is at the relaxed lower limit");
    }
    let mut out = vec![l0 as u64];
    for _ in 0..k_max {
        let last = *out.last().unwrap();
        out.push(next_scale(last));
    }
    Ok(out)
}

/// The scale `l` with `floor(l^{3/2}) + 1 = L`, if any.
pub fn previous_scale(big_l: i64) -> Option<i64> {
    if big_l < 2 {
        return None;
    }
    let guess = ((big_l as f64).powf(2.0 / 3.0)).floor() as i64;
    (guess.saturating_sub(2).max(1)..=guess + 2).find(|&l| next_scale(l as u64) == big_l as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleSchedule {
    pub l0: i64,
    pub levels: Vec<u64>,
    pub p: f64,
    pub big_n: usize,
    pub d: usize,
}

impl ScaleSchedule {
    pub fn new(
        l0: i64,
        k_max: usize,
        p: f64,
        big_n: usize,
        d: usize,
        strict: bool,
    ) -> Result<Self, MsaError> {
        if big_n == 0 || d == 0 {
            return Err(MsaError::Domain("N and d must be positive".into()));
        }
        let bound = 6.0 * (big_n * d) as f64;
        if !(p > bound) {
            if strict {
                return Err(MsaError::Domain(format!("p = {p} must exceed 6Nd = {bound}")));
            }
            log::warn!("p = {p} does not exceed 6Nd = {bound}; continuing in relaxed mode");
        }
        if strict && l0 <= 3 {
            return Err(MsaError::InitialScale(l0));
        }
        Ok(Self {
            l0,
            levels: scale_sequence(l0, k_max)?,
            p,
            big_n,
            d,
        })
    }

    pub fn k_max(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, k: usize) -> i64 {
        self.levels[k] as i64
    }

    /// `log10` of `L_k^{-2p 4^{N-n}}`.
    pub fn ds_bound_log10(&self, k: usize, n: usize) -> f64 {
        -2.0 * self.p * 4f64.powi((self.big_n - n) as i32) * (self.levels[k] as f64).log10()
    }

    /// `E* = L0^{-1/2} / 2`.
    pub fn e_star(&self) -> f64 {
        0.5 / (self.l0 as f64).sqrt()
    }
}

/// `m = 2^{-N} gamma_base L0^{-1/4} / (3 sqrt 2)`.
pub fn mass_m(gamma_base: f64, big_n: usize, l0: f64) -> Result<f64, MsaError> {
    if !(gamma_base > 0.0 && gamma_base <= 1.0) {
        return Err(MsaError::Domain(format!("gamma_base = {gamma_base} not in (0,1]")));
    }
    if big_n == 0 || !(l0 >= 1.0) {
        return Err(MsaError::Domain(format!("N = {big_n}, L0 = {l0}")));
    }
    Ok(0.5f64.powi(big_n as i32) * gamma_base * l0.powf(-0.25) / (3.0 * 2f64.sqrt()))
}

/// `gamma(m, L, n) = m (1 + L^{-1/8})^{N-n+1}`.
pub fn gamma_of(m: f64, l: f64, n: usize, big_n: usize) -> Result<f64, MsaError> {
    if !(m > 0.0) || !(l >= 1.0) || n == 0 || n > big_n {
        return Err(MsaError::Domain(format!("m = {m}, L = {l}, n = {n}, N = {big_n}")));
    }
    Ok(m * (1.0 + l.powf(-0.125)).powi((big_n - n + 1) as i32))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaEntry {
    pub l: u64,
    pub n: usize,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassParameters {
    pub gamma_base: f64,
    pub big_n: usize,
    pub l0: f64,
    pub m: f64,
}

impl MassParameters {
    pub fn new(gamma_base: f64, big_n: usize, l0: f64) -> Result<Self, MsaError> {
        Ok(Self {
            gamma_base,
            big_n,
            l0,
            m: mass_m(gamma_base, big_n, l0)?,
        })
    }

    pub fn gamma(&self, l: f64, n: usize) -> Result<f64, MsaError> {
        gamma_of(self.m, l, n, self.big_n)
    }

    pub fn table(&self, levels: &[u64]) -> Vec<GammaEntry> {
        levels
            .iter()
            .flat_map(|&l| {
                (1..=self.big_n).map(move |n| GammaEntry {
                    l,
                    n,
                    gamma: gamma_of(self.m, l as f64, n, self.big_n).unwrap(),
                })
            })
            .collect()
    }
}

/// `gamma(m,L,n-1) - gamma(m,L,n) - ln((2L+1)^{(n-1)d}) / L`: positive exactly
/// when the mass gap absorbs the tensor-sum volume factor for PI cubes.
pub fn pi_mass_margin(m: f64, l: f64, n: usize, big_n: usize, d: usize) -> Result<f64, MsaError> {
    if n < 2 {
        return Err(MsaError::Domain("PI cubes need n >= 2".into()));
    }
    let gap = gamma_of(m, l, n - 1, big_n)? - gamma_of(m, l, n, big_n)?;
    Ok(gap - ((n - 1) * d) as f64 * (2.0 * l + 1.0).ln() / l)
}

// ---------------------------------------------------------------------------
// model plumbing shared by the statistics

/// Everything needed to realise a cube Hamiltonian from a seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSetup {
    pub big_n: usize,
    pub d: usize,
    pub distribution: Distribution,
    pub interaction: InteractionSpec,
    pub disc: DiscretizationSpec,
}

impl ModelSetup {
    pub fn field(&self, seed: u64) -> Result<RandomField, MsaError> {
        Ok(RandomField::new(seed, self.distribution.clone())?)
    }

    pub fn operator(
        &self,
        cube: &MultiCube,
        field: &dyn PotentialField,
    ) -> Result<CubeOperator, MsaError> {
        Ok(CubeOperator::new(cube, field, &self.interaction, &self.disc)?)
    }

    /// Matrix dimension of an `n`-particle cube of half-side `l`.
    pub fn dim_estimate(&self, n: usize, l: i64) -> u128 {
        let side = ((2 * l + 1) as u128) * self.disc.cells_per_unit as u128;
        side.pow((n * self.d) as u32)
    }
}

fn singular_at(ev: &BlockNormEvaluator, e: f64, threshold: f64) -> bool {
    match ev.exceeds(e, threshold) {
        Ok((s, _)) => s,
        Err(_) => true,
    }
}

fn ns_threshold(m: f64, l: i64, n: usize, big_n: usize) -> Result<f64, MsaError> {
    Ok((-gamma_of(m, l as f64, n, big_n)? * l as f64).exp())
}

fn cube_at(coords: Vec<i64>, d: usize, l: i64) -> MultiCube {
    MultiCube::new(ParticleConfiguration::new(d, coords).unwrap(), l).unwrap()
}

// ---------------------------------------------------------------------------
// PI cubes: highly non-resonant and tunnelling

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FactorSide {
    /// `C_L(u_J)`, shifted by eigenvalues of the right factor.
    Left,
    Right,
}

/// The factor cubes of a PI cube with their eigensystems.
#[derive(Debug, Clone)]
pub struct PiFactors {
    pub cube: MultiCube,
    pub part: IndexPartition,
    pub left: CubeOperator,
    pub right: CubeOperator,
}

impl PiFactors {
    pub fn new(
        cube: &MultiCube,
        part: &IndexPartition,
        field: &dyn PotentialField,
        inter: &InteractionSpec,
        disc: &DiscretizationSpec,
    ) -> Result<Self, MsaError> {
        let (lh, rh) = crate::model::assemble_pi_factors(cube, part, field, inter, disc)?;
        let comp = part.complement().unwrap();
        Ok(Self {
            cube: cube.clone(),
            part: *part,
            left: CubeOperator::from_matrix(cube.project(part), lh)?,
            right: CubeOperator::from_matrix(cube.project(&comp), rh)?,
        })
    }

    /// Factors along the first partition that witnesses the PI property.
    pub fn from_cube(
        cube: &MultiCube,
        field: &dyn PotentialField,
        inter: &InteractionSpec,
        disc: &DiscretizationSpec,
    ) -> Result<Self, MsaError> {
        match classify_interactivity(cube.center(), cube.half_side(), inter.r0) {
            Interactivity::PartiallyInteractive(part) => Self::new(cube, &part, field, inter, disc),
            Interactivity::FullyInteractive => Err(MsaError::NotPartiallyInteractive(cube_label(cube))),
        }
    }

    pub fn factor(&self, side: FactorSide) -> &CubeOperator {
        match side {
            FactorSide::Left => &self.left,
            FactorSide::Right => &self.right,
        }
    }

    /// Eigenvalues of the opposite factor, which shift the energy seen by `side`.
    pub fn shifts(&self, side: FactorSide) -> &[f64] {
        match side {
            FactorSide::Left => &self.right.eig.values,
            FactorSide::Right => &self.left.eig.values,
        }
    }

    /// Sorted tensor-sum spectrum `{lambda_i + mu_j}`.
    pub fn tensor_spectrum(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .left
            .eig
            .values
            .iter()
            .flat_map(|a| self.right.eig.values.iter().map(move |b| a + b))
            .collect();
        v.sort_by(f64::total_cmp);
        v
    }
}

/// Sub-cube spectra of both factors, the CNR oracle for the HNR check.
#[derive(Debug, Clone)]
pub struct HnrOracle {
    pub left: SubcubeSpectra,
    pub right: SubcubeSpectra,
}

impl HnrOracle {
    pub fn compute(
        f: &PiFactors,
        field: &dyn PotentialField,
        inter: &InteractionSpec,
        disc: &DiscretizationSpec,
        stride: i64,
    ) -> Result<Self, MsaError> {
        Ok(Self {
            left: SubcubeSpectra::compute(&f.left.cube, field, inter, disc, stride)?,
            right: SubcubeSpectra::compute(&f.right.cube, field, inter, disc, stride)?,
        })
    }

    pub fn side(&self, side: FactorSide) -> &SubcubeSpectra {
        match side {
            FactorSide::Left => &self.left,
            FactorSide::Right => &self.right,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HnrWitness {
    /// Factor that fails to be CNR.
    pub side: FactorSide,
    pub shift_index: usize,
    pub shift: f64,
    pub resonance: Resonance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HnrReport {
    pub hnr: bool,
    pub witness: Option<HnrWitness>,
}

/// E-HNR: each factor is CNR at every energy shifted by the other factor's
/// eigenvalues. Left is checked before right, shifts in increasing order.
pub fn check_hnr(f: &PiFactors, oracle: &HnrOracle, e: f64) -> HnrReport {
    for side in [FactorSide::Left, FactorSide::Right] {
        for (j, &mu) in f.shifts(side).iter().enumerate() {
            if let Some(resonance) = oracle.side(side).first_resonance(e - mu) {
                return HnrReport {
                    hnr: false,
                    witness: Some(HnrWitness {
                        side,
                        shift_index: j,
                        shift: mu,
                        resonance,
                    }),
                };
            }
        }
    }
    HnrReport {
        hnr: true,
        witness: None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectangleCheck {
    pub side: FactorSide,
    pub half_side: i64,
    pub min_half_side: i64,
    pub dist: f64,
    pub threshold: f64,
    pub verified: bool,
}

/// Assembles the rectangle `C_l(x) x C_L(u'')` (or its mirror) named by a
/// failed HNR check and confirms it is E-resonant with `l` in `[ceil(L^{2/3}), L]`.
pub fn verify_resonant_rectangle(
    f: &PiFactors,
    w: &HnrWitness,
    field: &dyn PotentialField,
    inter: &InteractionSpec,
    disc: &DiscretizationSpec,
    e: f64,
) -> Result<RectangleCheck, MsaError> {
    let big = f.cube.half_side();
    let sub = MultiCube::new(w.resonance.center.clone(), w.resonance.half_side)?;
    let region = match w.side {
        FactorSide::Left => {
            if !f.left.cube.contains_cube(&sub) {
                return Err(MsaError::Precondition("witness outside left factor".into()));
            }
            SiteRegion::product(&SiteRegion::cube(&sub), &SiteRegion::cube(&f.right.cube))
        }
        FactorSide::Right => {
            if !f.right.cube.contains_cube(&sub) {
                return Err(MsaError::Precondition("witness outside right factor".into()));
            }
            SiteRegion::product(&SiteRegion::cube(&f.left.cube), &SiteRegion::cube(&sub))
        }
    };
    let h = assemble_on_region(&region, field, inter, disc)?;
    let spec = eigenvalues(&h)?;
    let dist = dist_to_sorted(&spec, e);
    let threshold = resonance_threshold(sub.half_side());
    let min_half_side = min_subcube_half_side(big);
    let tol = 1e-9 * (1.0 + e.abs());
    Ok(RectangleCheck {
        side: w.side,
        half_side: sub.half_side(),
        min_half_side,
        dist,
        threshold,
        verified: dist <= threshold + tol
            && (min_half_side..=big).contains(&sub.half_side()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunnellingWitness {
    pub shift_index: usize,
    pub shift: f64,
    pub l: i64,
    pub v1: ParticleConfiguration,
    pub v2: ParticleConfiguration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Tunnelling {
    Nt,
    Lt(TunnellingWitness),
    Rt(TunnellingWitness),
}

impl Tunnelling {
    pub fn is_nt(&self) -> bool {
        matches!(self, Tunnelling::Nt)
    }
}

/// First shift index (then first centre pair in scan order) at which `factor`
/// holds two separable `(E - mu_j, m)`-singular cubes of half-side `l`.
#[allow(clippy::too_many_arguments)]
pub fn find_separable_singular_pair(
    factor: &MultiCube,
    l: i64,
    shifts: &[f64],
    e: f64,
    m: f64,
    big_n: usize,
    field: &dyn PotentialField,
    inter: &InteractionSpec,
    disc: &DiscretizationSpec,
) -> Result<Option<TunnellingWitness>, MsaError> {
    let big = factor.half_side();
    if l > big {
        return Ok(None);
    }
    let n = factor.n();
    let thr = ns_threshold(m, l, n, big_n)?;
    let centers: Vec<MultiCube> = lattice_points(factor.center().coords(), 1, big - l)
        .into_iter()
        .map(|c| cube_at(c, factor.d(), l))
        .collect();
    let mut singular: Vec<Vec<usize>> = vec![Vec::new(); shifts.len()];
    for (ci, c) in centers.iter().enumerate() {
        let op = CubeOperator::new(c, field, inter, disc)?;
        let ev = op.evaluator();
        for (j, mu) in shifts.iter().enumerate() {
            if singular_at(&ev, e - mu, thr) {
                singular[j].push(ci);
            }
        }
    }
    for (j, list) in singular.iter().enumerate() {
        for (a, &ia) in list.iter().enumerate() {
            for &ib in &list[a + 1..] {
                let (v1, v2) = (centers[ia].center(), centers[ib].center());
                if find_separating_partition(v1, v2, l, big_n)?.is_some() {
                    return Ok(Some(TunnellingWitness {
                        shift_index: j,
                        shift: shifts[j],
                        l,
                        v1: v1.clone(),
                        v2: v2.clone(),
                    }));
                }
            }
        }
    }
    Ok(None)
}

/// `(E,m)`-tunnelling of a PI cube at scale `L = floor(l^{3/2}) + 1`.
pub fn check_tunnelling(
    f: &PiFactors,
    e: f64,
    m: f64,
    big_n: usize,
    field: &dyn PotentialField,
    inter: &InteractionSpec,
    disc: &DiscretizationSpec,
) -> Result<Tunnelling, MsaError> {
    let big = f.cube.half_side();
    let l = previous_scale(big).ok_or(MsaError::NoPreviousScale(big))?;
    let left = find_separable_singular_pair(
        &f.left.cube,
        l,
        f.shifts(FactorSide::Left),
        e,
        m,
        big_n,
        field,
        inter,
        disc,
    )?;
    if let Some(w) = left {
        return Ok(Tunnelling::Lt(w));
    }
    let right = find_separable_singular_pair(
        &f.right.cube,
        l,
        f.shifts(FactorSide::Right),
        e,
        m,
        big_n,
        field,
        inter,
        disc,
    )?;
    Ok(right.map_or(Tunnelling::Nt, Tunnelling::Rt))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiNonsingularCheck {
    pub margin: f64,
    pub in_regime: bool,
    pub hnr: bool,
    pub nt: bool,
    pub singular: bool,
    /// `false` only for an in-regime HNR, NT cube found singular.
    pub consistent: bool,
}

/// HNR and NT should force nonsingularity once the mass margin is positive;
/// outside that regime the outcome is recorded and logged, not asserted.
#[allow(clippy::too_many_arguments)]
pub fn check_pi_nonsingularity(
    f: &PiFactors,
    oracle: &HnrOracle,
    e: f64,
    m: f64,
    big_n: usize,
    field: &dyn PotentialField,
    inter: &InteractionSpec,
    disc: &DiscretizationSpec,
) -> Result<PiNonsingularCheck, MsaError> {
    let l = f.cube.half_side();
    let n = f.cube.n();
    let margin = pi_mass_margin(m, l as f64, n, big_n, f.cube.d())?;
    let in_regime = margin > 0.0;
    let hnr = check_hnr(f, oracle, e).hnr;
    let nt = check_tunnelling(f, e, m, big_n, field, inter, disc)?.is_nt();
    let full = CubeOperator::new(&f.cube, field, inter, disc)?;
    let singular = crate::spectral::is_singular(&full, e, m, n, big_n).singular;
    if !in_regime {
        log::info!(
            "PI nonsingularity at {} out of regime (margin {margin:.3e})",
            cube_label(&f.cube)
        );
    }
    Ok(PiNonsingularCheck {
        margin,
        in_regime,
        hnr,
        nt,
        singular,
        consistent: !(in_regime && hnr && nt && singular),
    })
}

// ---------------------------------------------------------------------------
// chain certificate

/// `delta_+^{n_+} delta_0^{n_0} * resolvent_bound`.
pub fn chain_product(delta_plus: f64, n_plus: u32, delta_0: f64, n_0: u32, resolvent_bound: f64) -> f64 {
    delta_plus.powi(n_plus as i32) * delta_0.powi(n_0 as i32) * resolvent_bound
}

/// `L_{k+1}/L_k - 7J`, the guaranteed number of nonsingular steps.
pub fn n_plus_lower_bound(l_k: i64, l_next: i64, j: usize) -> f64 {
    l_next as f64 / l_k as f64 - 7.0 * j as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SubcubeStatus {
    /// The sub-cube meets the `out` shell of the big cube or leaves it.
    Boundary,
    Nonsingular { block_norm: f64 },
    /// `jump_resolvent` is `||G_{C_{2l}(y)}(E)||` when the doubled cube fits.
    Singular { block_norm: f64, jump_resolvent: Option<f64> },
}

/// Classification of the sub-cubes `C_l(y)` whose `int` regions tile the big
/// cube: centres on `u + (2 floor(l/3) + 1) Z^D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubcubeMap {
    pub l: i64,
    pub int_radius: i64,
    pub step: i64,
    pub centers: Vec<Vec<i64>>,
    pub status: Vec<SubcubeStatus>,
}

impl SubcubeMap {
    pub fn singular_centers(&self) -> Vec<usize> {
        (0..self.centers.len())
            .filter(|&i| matches!(self.status[i], SubcubeStatus::Singular { .. }))
            .collect()
    }
}

fn lattice_points(center: &[i64], step: i64, reach: i64) -> Vec<Vec<i64>> {
    let k = reach / step;
    let dim = center.len();
    let mut idx = vec![-k; dim];
    let mut out = Vec::new();
    loop {
        out.push(center.iter().zip(&idx).map(|(c, i)| c + i * step).collect());
        let mut a = dim;
        loop {
            if a == 0 {
                return out;
            }
            a -= 1;
            if idx[a] < k {
                idx[a] += 1;
                break;
            }
            idx[a] = -k;
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn classify_subcubes(
    big: &CubeOperator,
    field: &dyn PotentialField,
    inter: &InteractionSpec,
    disc: &DiscretizationSpec,
    l: i64,
    e: f64,
    m: f64,
    big_n: usize,
) -> Result<SubcubeMap, MsaError> {
    let big_l = big.cube.half_side();
    if l < 1 || l >= big_l {
        return Err(MsaError::Domain(format!("sub-scale {l} vs cube half-side {big_l}")));
    }
    let n = big.cube.n();
    let d = big.cube.d();
    let u = big.cube.center().coords().to_vec();
    let r = l / 3;
    let step = 2 * r + 1;
    let thr = ns_threshold(m, l, n, big_n)?;
    let centers = lattice_points(&u, step, big_l + r);
    let mut status = Vec::with_capacity(centers.len());
    for y in &centers {
        let off = linf(y, &u);
        if off + l > big_l - 2 {
            status.push(SubcubeStatus::Boundary);
            continue;
        }
        let op = CubeOperator::new(&cube_at(y.clone(), d, l), field, inter, disc)?;
        let block_norm = op.out_int_norm(e).unwrap_or(f64::INFINITY);
        if block_norm <= thr {
            status.push(SubcubeStatus::Nonsingular { block_norm });
            continue;
        }
        let jump_resolvent = if off + 2 * l <= big_l - 2 {
            let h = assemble_hamiltonian(&cube_at(y.clone(), d, 2 * l), field, inter, disc)?;
            let dist = dist_to_sorted(&eigenvalues(&h)?, e);
            (dist > 0.0).then(|| 1.0 / dist)
        } else {
            None
        };
        status.push(SubcubeStatus::Singular {
            block_norm,
            jump_resolvent,
        });
    }
    Ok(SubcubeMap {
        l,
        int_radius: r,
        step,
        centers,
        status,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainCertificate {
    /// Upper bound on `||1_out G 1_int||` of the big cube.
    pub bound: f64,
    /// `e^{-gamma(m, L_{k+1}, n) L_{k+1}}`.
    pub threshold: f64,
    pub ns_claimed: bool,
    pub resolvent_bound: f64,
    pub c_geom: f64,
    pub delta_plus: f64,
    pub delta_0: f64,
    pub singular_count: usize,
    pub j: usize,
    pub n_plus_required: f64,
    pub regime_ok: bool,
    /// Product-form bound `(L_{k+1}/L_k)^{nd} delta_+^{n_+} e^{L_{k+1}^{1/2}}`, in regime only.
    pub product_bound: Option<f64>,
    pub refusal: Option<String>,
    pub sweeps: usize,
}

/// Offsets of tiling cells whose `int` box meets the
/// shell at max-distance `radius + 1` from the centre.
fn shell_offsets(radius: i64, r: i64, step: i64, dim: usize) -> Vec<Vec<i64>> {
    let shell = radius + 1;
    let reach = shell + r;
    lattice_points(&vec![0; dim], step, reach)
        .into_iter()
        .filter(|o| {
            let near = o.iter().map(|c| (c.abs() - r).max(0)).max().unwrap_or(0);
            let far = o.iter().map(|c| c.abs() + r).max().unwrap_or(0);
            near <= shell && far >= shell
        })
        .collect()
}

/// Resolvent chain bound for `C_{L_{k+1}}(u)` from the sub-cube map at `L_k`.
///
/// Each tiling cell `y` carries a bound `F(y)` on `||1_out G 1_{int C_l(y)}||`,
/// initialised to `||G||` and lowered through the boundary identity
/// `F(y) <= c_geom * b(y) * sum F(y')` over cells covering the outer boundary
/// of `C_l(y)` (or of `C_{2l}(y)` for singular cells), where `b` is the
/// nonsingular threshold or the doubled-cube resolvent norm.
#[allow(clippy::too_many_arguments)]
pub fn gri_chain_certificate(
    big: &CubeOperator,
    map: &SubcubeMap,
    cnr: &CnrReport,
    e: f64,
    m: f64,
    big_n: usize,
    c_geom_supplied: f64,
    j: usize,
) -> Result<ChainCertificate, MsaError> {
    if !cnr.cnr {
        return Err(MsaError::Precondition(format!(
            "{} is not E-CNR at E = {e}",
            cube_label(&big.cube)
        )));
    }
    let big_l = big.cube.half_side();
    let n = big.cube.n();
    let dim = big.cube.center().coords().len();
    let u = big.cube.center().coords();
    let l = map.l;

    // counting hypothesis: singular cubes away from the boundary, pairwise far
    let far = 7 * big_n as i64 * l;
    let counted: Vec<usize> = map
        .singular_centers()
        .into_iter()
        .filter(|&i| big_l - linf(&map.centers[i], u) >= 2 * l)
        .collect();
    let adj: Vec<Vec<bool>> = counted
        .iter()
        .map(|&a| {
            counted
                .iter()
                .map(|&b| linf(&map.centers[a], &map.centers[b]) > far)
                .collect()
        })
        .collect();
    let singular_count = max_clique(&adj, &(0..counted.len()).collect::<Vec<_>>());
    if singular_count > j {
        return Err(MsaError::Precondition(format!(
            "{singular_count} separated singular cubes exceed J = {j}"
        )));
    }

    let dist = big.eig.dist(e);
    if dist <= 0.0 {
        return Err(SpectralError::ResolventUndefined { e, dist }.into());
    }
    let resolvent_bound = 1.0 / dist;
    let boundary_norm = big.h.hopping().abs() * (dim as f64).sqrt();
    let c_geom = c_geom_supplied.max(boundary_norm);
    let gamma_l = gamma_of(m, l as f64, n, big_n)?;
    let thr_l = (-gamma_l * l as f64).exp();
    let nd = dim as i32;
    let delta_plus = 3f64.powi(nd) * c_geom * thr_l;
    let delta_0 = 18f64.powi(nd) * c_geom * c_geom * (2.0 * l as f64).sqrt().exp() * thr_l;

    let index: HashMap<&[i64], usize> = map
        .centers
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_slice(), i))
        .collect();
    let r = map.int_radius;
    let near = shell_offsets(l, r, map.step, dim);
    let jump = shell_offsets(2 * l, r, map.step, dim);
    let neighbours = |i: usize, offs: &[Vec<i64>]| -> Vec<usize> {
        offs.iter()
            .filter_map(|o| {
                let c: Vec<i64> = map.centers[i].iter().zip(o).map(|(a, b)| a + b).collect();
                index.get(c.as_slice()).copied()
            })
            .collect()
    };
    let rules: Vec<Option<(f64, Vec<usize>)>> = (0..map.centers.len())
        .map(|i| match map.status[i] {
            SubcubeStatus::Nonsingular { .. } => Some((c_geom * thr_l, neighbours(i, &near))),
            SubcubeStatus::Singular {
                jump_resolvent: Some(b),
                ..
            } => Some((c_geom * b, neighbours(i, &jump))),
            _ => None,
        })
        .collect();

    let mut f = vec![resolvent_bound; map.centers.len()];
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        let mut changed = false;
        for i in 0..f.len() {
            if let Some((factor, nb)) = &rules[i] {
                let s: f64 = nb.iter().map(|&k| f[k]).sum();
                let cand = factor * s;
                if cand < f[i] * (1.0 - 1e-12) {
                    f[i] = cand;
                    changed = true;
                }
            }
        }
        if !changed || sweeps >= 10_000 {
            break;
        }
    }
    let int_big = big.cube.int_radius();
    let total: f64 = (0..f.len())
        .filter(|&i| linf(&map.centers[i], u) - r <= int_big)
        .map(|i| f[i])
        .sum();
    let bound = total.min(resolvent_bound);
    let threshold = ns_threshold(m, big_l, n, big_n)?;

    let n_plus_required = n_plus_lower_bound(l, big_l, j);
    let regime_ok = n_plus_required >= 1.0;
    let (product_bound, refusal) = if regime_ok {
        let np = n_plus_required.floor() as u32;
        let vol = (big_l as f64 / l as f64).powi(nd);
        (
            Some(vol * chain_product(delta_plus, np, delta_0, 0, (big_l as f64).sqrt().exp())),
            None,
        )
    } else {
        let msg = format!(
            "L_k = {l}, L_k+1 = {big_l}, J = {j}: guaranteed nonsingular steps {n_plus_required:.3} < 1"
        );
        log::info!("chain certificate out of regime: {msg}");
        (None, Some(msg))
    };
    Ok(ChainCertificate {
        bound,
        threshold,
        ns_claimed: bound <= threshold,
        resolvent_bound,
        c_geom,
        delta_plus,
        delta_0,
        singular_count,
        j,
        n_plus_required,
        regime_ok,
        product_bound,
        refusal,
        sweeps,
    })
}

// ---------------------------------------------------------------------------
// pair generation

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PairType {
    PiPi,
    FiFi,
    Mixed,
}

impl PairType {
    pub fn label(&self) -> &'static str {
        match self {
            PairType::PiPi => "PI-PI",
            PairType::FiFi => "FI-FI",
            PairType::Mixed => "mixed",
        }
    }

    /// Pair types that exist for `n` particles.
    pub fn for_n(n: usize) -> Vec<PairType> {
        if n < 2 {
            vec![PairType::FiFi]
        } else {
            vec![PairType::PiPi, PairType::FiFi, PairType::Mixed]
        }
    }
}

/// Particles at `(i, 0, ..., 0)`, `i < n`.
pub fn fi_configuration(n: usize, d: usize) -> ParticleConfiguration {
    let pts: Vec<Vec<i64>> = (0..n)
        .map(|i| {
            let mut p = vec![0; d];
            p[0] = i as i64;
            p
        })
        .collect();
    ParticleConfiguration::from_points(&pts).unwrap()
}

/// A cluster of `n - 1` particles and one particle split off past `n(2L + r0)`.
pub fn pi_configuration(n: usize, d: usize, l: i64, r0: i64) -> ParticleConfiguration {
    let pts: Vec<Vec<i64>> = (0..n)
        .map(|i| {
            let mut p = vec![0; d];
            p[0] = if i + 1 < n { i as i64 } else { n as i64 * (2 * l + r0) + 1 };
            p
        })
        .collect();
    ParticleConfiguration::from_points(&pts).unwrap()
}

/// Two separable cubes of the requested kinds, the second shifted along the
/// first axis past `7NL` and past every particle of the first.
pub fn separable_pair(
    kind: PairType,
    n: usize,
    d: usize,
    l: i64,
    r0: i64,
    big_n: usize,
) -> Result<(MultiCube, MultiCube), MsaError> {
    if n == 0 || n > big_n {
        return Err(MsaError::Domain(format!("n = {n}, N = {big_n}")));
    }
    if n < 2 && kind != PairType::FiFi {
        return Err(MsaError::Domain("one-particle cubes are never PI".into()));
    }
    let (x, yb) = match kind {
        PairType::FiFi => (fi_configuration(n, d), fi_configuration(n, d)),
        PairType::PiPi => (pi_configuration(n, d, l, r0), pi_configuration(n, d, l, r0)),
        PairType::Mixed => (fi_configuration(n, d), pi_configuration(n, d, l, r0)),
    };
    let reach = x.points().map(|p| p[0]).max().unwrap();
    let mut shift = vec![0; d];
    shift[0] = reach + 2 * l + 1 + 7 * big_n as i64 * l;
    let y = yb.translated(&shift);
    if find_separating_partition(&x, &y, l, big_n)?.is_none() {
        return Err(MsaError::NotSeparable(
            format!("{:?}", x.coords()),
            format!("{:?}", y.coords()),
        ));
    }
    Ok((MultiCube::new(x, l)?, MultiCube::new(y, l)?))
}

// ---------------------------------------------------------------------------
// energy sweeps

/// Sweep set for "there exists E": the anchored grid `step Z` at step
/// `e^{-L^{1/2}}/2` inside `[lo, hi]`, the endpoints, and every eigenvalue
/// `lambda` together with `lambda +- e^{-L^{1/2}}` that falls inside.
pub fn sweep_energies(spectra: &[&[f64]], lo: f64, hi: f64, l: i64) -> Vec<f64> {
    let thr = resonance_threshold(l);
    let mut w = EnergyWindow::new(lo, hi, thr / 2.0).expect("valid window");
    for s in spectra {
        for &v in s.iter() {
            w.extra_points.extend([v - thr, v, v + thr]);
        }
    }
    w.points()
}

/// Energies at which a statistic is evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EnergySelection {
    Fixed(f64),
    /// `[lo, hi]`; `lo = None` is one unit below the lowest spectrum bottom,
    /// which also covers every lower energy since block norms increase in `E`
    /// below the spectrum.
    Window { lo: Option<f64>, hi: f64 },
}

// ---------------------------------------------------------------------------
// double-singularity statistic

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTrial {
    pub seed: u64,
    pub failure: bool,
    pub singular_x: bool,
    pub singular_y: bool,
    pub first_failure_energy: Option<f64>,
    pub energies_probed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsEstimate {
    pub k: usize,
    pub n: usize,
    pub pair_type: PairType,
    pub l_k: i64,
    pub trials: u64,
    pub failures: u64,
    pub marginal_x: u64,
    pub marginal_y: u64,
    pub point_estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// `log10` of the display bound `L_k^{-2p 4^{N-n}}`.
    pub bound_log10: f64,
    pub per_trial: Vec<PairTrial>,
}

#[allow(clippy::too_many_arguments)]
pub fn ds_pair_trial(
    x: &MultiCube,
    y: &MultiCube,
    setup: &ModelSetup,
    seed: u64,
    energies: &EnergySelection,
    m: f64,
) -> Result<PairTrial, MsaError> {
    let field = setup.field(seed)?;
    let ox = setup.operator(x, &field)?;
    let oy = setup.operator(y, &field)?;
    let l = x.half_side();
    let n = x.n();
    let thr = ns_threshold(m, l, n, setup.big_n)?;
    let (ex, ey) = (ox.evaluator(), oy.evaluator());
    let points = match energies {
        EnergySelection::Fixed(e) => vec![*e],
        EnergySelection::Window { lo, hi } => {
            let lo = lo.unwrap_or(ox.eig.bottom().min(oy.eig.bottom()) - 1.0);
            if lo > *hi {
                vec![]
            } else {
                sweep_energies(&[&ox.eig.values, &oy.eig.values], lo, *hi, l)
            }
        }
    };
    let mut t = PairTrial {
        seed,
        failure: false,
        singular_x: false,
        singular_y: false,
        first_failure_energy: None,
        energies_probed: points.len(),
    };
    for &e in &points {
        let sx = singular_at(&ex, e, thr);
        let sy = singular_at(&ey, e, thr);
        t.singular_x |= sx;
        t.singular_y |= sy;
        if sx && sy && !t.failure {
            t.failure = true;
            t.first_failure_energy = Some(e);
        }
    }
    Ok(t)
}

/// Frequency of `{exists E: both cubes (E,m)-S}` over independent samples.
#[allow(clippy::too_many_arguments)]
pub fn ds_pair_probability(
    k: usize,
    n: usize,
    schedule: &ScaleSchedule,
    m: f64,
    kind: PairType,
    setup: &ModelSetup,
    trials: u64,
    energies: &EnergySelection,
    seed: u64,
    experiment: &str,
) -> Result<DsEstimate, MsaError> {
    if trials == 0 {
        return Err(MsaError::Domain("trials must be >= 1".into()));
    }
    let l = schedule.level(k);
    let (x, y) = separable_pair(kind, n, setup.d, l, setup.interaction.r0, setup.big_n)?;
    let per_trial = (0..trials)
        .into_par_iter()
        .map(|t| ds_pair_trial(&x, &y, setup, split_seed(seed, experiment, t), energies, m))
        .collect::<Result<Vec<_>, _>>()?;
    let failures = per_trial.iter().filter(|t| t.failure).count() as u64;
    let (ci_lo, ci_hi) = wilson_interval(failures, trials, 1.96)?;
    Ok(DsEstimate {
        k,
        n,
        pair_type: kind,
        l_k: l,
        trials,
        failures,
        marginal_x: per_trial.iter().filter(|t| t.singular_x).count() as u64,
        marginal_y: per_trial.iter().filter(|t| t.singular_y).count() as u64,
        point_estimate: failures as f64 / trials as f64,
        ci_lo,
        ci_hi,
        bound_log10: schedule.ds_bound_log10(k, n),
        per_trial,
    })
}

// ---------------------------------------------------------------------------
// initial scale

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialScaleTrial {
    pub seed: u64,
    pub bottom: f64,
    pub bottom_event: bool,
    pub singular_event: bool,
    /// Singular somewhere below `E*` although the bottom exceeds `L^{-1/2}`.
    pub scan_exception: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialScaleReport {
    pub l: i64,
    pub e_star: f64,
    pub bottom: MonteCarloReport,
    pub singular: MonteCarloReport,
    pub exceptions: u64,
    pub per_trial: Vec<InitialScaleTrial>,
}

/// Whether some `E <= e_star` makes the cube `(E,m)`-S. Below the spectrum the
/// block norm increases with `E`, so when `e_star < bottom` one evaluation at
/// `e_star` decides; otherwise the bottom eigenvalue itself is singular.
pub fn singular_below(op: &CubeOperator, e_star: f64, m: f64, big_n: usize) -> Result<bool, MsaError> {
    let l = op.half_side();
    let thr = ns_threshold(m, l, op.cube.n(), big_n)?;
    let ev = op.evaluator();
    if e_star < op.eig.bottom() {
        return Ok(singular_at(&ev, e_star, thr));
    }
    let pts = sweep_energies(&[&op.eig.values], op.eig.bottom() - 1.0, e_star, l);
    Ok(pts.iter().any(|&e| singular_at(&ev, e, thr)))
}

/// Frequencies of `{E_0 <= L^{-1/2}}` and `{exists E <= E*: (E,m)-S}` for the
/// cube `C_L(center)`.
#[allow(clippy::too_many_arguments)]
pub fn initial_scale_probability(
    center: &ParticleConfiguration,
    l: i64,
    setup: &ModelSetup,
    m: f64,
    e_star: f64,
    trials: u64,
    seed: u64,
    experiment: &str,
) -> Result<InitialScaleReport, MsaError> {
    if trials == 0 {
        return Err(MsaError::Domain("trials must be >= 1".into()));
    }
    let cube = MultiCube::new(center.clone(), l)?;
    let bottom_level = 1.0 / (l as f64).sqrt();
    let per_trial = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<InitialScaleTrial, MsaError> {
            let s = split_seed(seed, experiment, t);
            let field = setup.field(s)?;
            let op = setup.operator(&cube, &field)?;
            let bottom = op.eig.bottom();
            let bottom_event = bottom <= bottom_level;
            let singular_event = singular_below(&op, e_star, m, setup.big_n)?;
            let scan_exception = singular_event && !bottom_event;
            if scan_exception {
                log::warn!(
                    "initial scale trial {t}: singular below E* = {e_star} with bottom {bottom}"
                );
            }
            Ok(InitialScaleTrial {
                seed: s,
                bottom,
                bottom_event,
                singular_event,
                scan_exception,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let count = |f: fn(&InitialScaleTrial) -> bool| per_trial.iter().filter(|t| f(t)).count() as u64;
    Ok(InitialScaleReport {
        l,
        e_star,
        bottom: MonteCarloReport::new(count(|t| t.bottom_event), trials)?,
        singular: MonteCarloReport::new(count(|t| t.singular_event), trials)?,
        exceptions: count(|t| t.scan_exception),
        per_trial,
    })
}

// ---------------------------------------------------------------------------
// Wegner-type non-resonance statistic

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WegnerTrial {
    pub seed: u64,
    pub not_cnr: bool,
    pub pair_not_cnr: bool,
    pub not_cnr_scan: bool,
    pub pair_not_cnr_scan: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WegnerReport {
    pub n: usize,
    pub l: i64,
    pub e: f64,
    pub window: (f64, f64),
    /// `C_L(x)` not E-CNR at the fixed energy.
    pub single: MonteCarloReport,
    /// Neither `C_L(x)` nor `C_L(y)` E-CNR at the fixed energy.
    pub pair: MonteCarloReport,
    pub single_scan: MonteCarloReport,
    /// Some `E` in the window at which neither cube is E-CNR.
    pub pair_scan: MonteCarloReport,
    pub per_trial: Vec<WegnerTrial>,
}

/// Merged closed intervals of energies at which a cube fails to be CNR,
/// clipped to `[lo, hi]`.
pub fn non_cnr_set(spectra: &SubcubeSpectra, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let mut iv: Vec<(f64, f64)> = spectra
        .cubes
        .iter()
        .zip(&spectra.spectra)
        .flat_map(|(c, s)| {
            let t = resonance_threshold(c.half_side());
            s.iter().map(move |v| (v - t, v + t))
        })
        .filter(|(a, b)| *b >= lo && *a <= hi)
        .map(|(a, b)| (a.max(lo), b.min(hi)))
        .collect();
    iv.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (a, b) in iv {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

fn intervals_meet(a: &[(f64, f64)], b: &[(f64, f64)]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i].0.max(b[j].0) <= a[i].1.min(b[j].1) {
            return true;
        }
        if a[i].1 < b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    false
}

#[allow(clippy::too_many_arguments)]
pub fn wegner_cnr_statistic(
    n: usize,
    l: i64,
    setup: &ModelSetup,
    e: f64,
    window: (f64, f64),
    stride: i64,
    trials: u64,
    seed: u64,
    experiment: &str,
) -> Result<WegnerReport, MsaError> {
    if trials == 0 {
        return Err(MsaError::Domain("trials must be >= 1".into()));
    }
    let (x, y) = separable_pair(PairType::FiFi, n, setup.d, l, setup.interaction.r0, setup.big_n)?;
    let (lo, hi) = window;
    let per_trial = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<WegnerTrial, MsaError> {
            let s = split_seed(seed, experiment, t);
            let field = setup.field(s)?;
            let sx = SubcubeSpectra::compute(&x, &field, &setup.interaction, &setup.disc, stride)?;
            let sy = SubcubeSpectra::compute(&y, &field, &setup.interaction, &setup.disc, stride)?;
            let (nx, ny) = (!sx.is_cnr(e), !sy.is_cnr(e));
            let (ix, iy) = (non_cnr_set(&sx, lo, hi), non_cnr_set(&sy, lo, hi));
            Ok(WegnerTrial {
                seed: s,
                not_cnr: nx,
                pair_not_cnr: nx && ny,
                not_cnr_scan: !ix.is_empty(),
                pair_not_cnr_scan: intervals_meet(&ix, &iy),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let count = |f: fn(&WegnerTrial) -> bool| per_trial.iter().filter(|t| f(t)).count() as u64;
    Ok(WegnerReport {
        n,
        l,
        e,
        window,
        single: MonteCarloReport::new(count(|t| t.not_cnr), trials)?,
        pair: MonteCarloReport::new(count(|t| t.pair_not_cnr), trials)?,
        single_scan: MonteCarloReport::new(count(|t| t.not_cnr_scan), trials)?,
        pair_scan: MonteCarloReport::new(count(|t| t.pair_not_cnr_scan), trials)?,
        per_trial,
    })
}

// ---------------------------------------------------------------------------
// orchestrator

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrchestratorConfig {
    pub schedule: ScaleSchedule,
    pub setup: ModelSetup,
    pub mass: MassParameters,
    pub trials: u64,
    pub seed: u64,
    /// Largest admissible matrix dimension.
    pub dim_cap: u128,
    /// Upper end of the energy window; the lower end is one unit below the spectra.
    pub e_max: f64,
    /// Classify failing trials into resonance / tunnelling / high-count events.
    pub diagnostics: bool,
    pub cnr_stride: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrchestratorRow {
    pub k: usize,
    pub n: usize,
    pub pair_type: PairType,
    pub l_k: i64,
    pub trials: u64,
    pub failures: u64,
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub bound_log10: f64,
    /// Failing trials where neither cube is non-resonant (HNR for PI, CNR otherwise).
    pub r_count: u64,
    /// Failing trials with a tunnelling PI cube.
    pub t_count: u64,
    /// Failing trials with `M >= kappa(n) + 2` singular sub-cubes in some cube.
    pub s_count: u64,
    /// Failing trials in none of the three classes.
    pub unexplained: u64,
    pub diagnosed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrchestratorReport {
    pub rows: Vec<OrchestratorRow>,
    pub sizing: Vec<(usize, usize, i64, u128)>,
}

fn sizing_report(rows: &[(usize, usize, i64, u128)]) -> String {
    rows.iter()
        .map(|(k, n, l, dim)| format!("k={k} n={n} L={l} dim={dim}"))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Whether `cube` is non-resonant at `e` in the sense used by the event
/// decomposition: E-HNR for PI cubes, E-CNR for FI cubes.
fn non_resonant(
    cube: &MultiCube,
    field: &dyn PotentialField,
    setup: &ModelSetup,
    e: f64,
    stride: i64,
) -> Result<bool, MsaError> {
    let (inter, disc) = (&setup.interaction, &setup.disc);
    match classify_interactivity(cube.center(), cube.half_side(), inter.r0) {
        Interactivity::PartiallyInteractive(part) => {
            let f = PiFactors::new(cube, &part, field, inter, disc)?;
            let oracle = HnrOracle::compute(&f, field, inter, disc, stride)?;
            Ok(check_hnr(&f, &oracle, e).hnr)
        }
        Interactivity::FullyInteractive => {
            Ok(crate::spectral::is_cnr(cube, field, inter, disc, e, stride)?.cnr)
        }
    }
}

/// Singular-cube counters of `C_L(u)` at the previous scale `l`, over
/// sub-cubes at distance at least `2l` from the boundary.
#[allow(clippy::too_many_arguments)]
pub fn singular_subcube_counts(
    cube: &MultiCube,
    l: i64,
    field: &dyn PotentialField,
    setup: &ModelSetup,
    e: f64,
    m: f64,
    stride: i64,
) -> Result<SingularCounts, MsaError> {
    let big = cube.half_side();
    let n = cube.n();
    let thr = ns_threshold(m, l, n, setup.big_n)?;
    let reach = big - 2 * l;
    let mut found = Vec::new();
    if reach >= 0 {
        for c in lattice_points(cube.center().coords(), stride.max(1), reach) {
            let sub = cube_at(c, cube.d(), l);
            let op = setup.operator(&sub, field)?;
            if singular_at(&op.evaluator(), e, thr) {
                let kind = if crate::geometry::is_fully_interactive(sub.center(), l, setup.interaction.r0) {
                    CubeKind::Fi
                } else {
                    CubeKind::Pi
                };
                found.push((sub.center().clone(), kind));
            }
        }
    }
    Ok(count_singular_maxima(&found, l, setup.big_n)?)
}

/// Stratified double-singularity table over `k = 0..=k_max`, `n = 1..=N` and
/// pair type. Every stratum is sized first; any matrix above the cap refuses
/// the whole run.
pub fn induction_orchestrator(cfg: &OrchestratorConfig) -> Result<OrchestratorReport, MsaError> {
    let sched = &cfg.schedule;
    let setup = &cfg.setup;
    let mut sizing = Vec::new();
    for k in 0..=sched.k_max() {
        for n in 1..=setup.big_n {
            sizing.push((k, n, sched.level(k), setup.dim_estimate(n, sched.level(k))));
        }
    }
    if let Some(&(_, _, _, dim)) = sizing.iter().find(|s| s.3 > cfg.dim_cap) {
        return Err(MsaError::Infeasible {
            dim,
            cap: cfg.dim_cap,
            report: sizing_report(&sizing),
        });
    }
    let m = cfg.mass.m;
    let mut rows = Vec::new();
    for k in 0..=sched.k_max() {
        let l = sched.level(k);
        for n in 1..=setup.big_n {
            for kind in PairType::for_n(n) {
                let label = format!("msa-run/k{k}/n{n}/{}", kind.label());
                let est = ds_pair_probability(
                    k,
                    n,
                    sched,
                    m,
                    kind,
                    setup,
                    cfg.trials,
                    &EnergySelection::Window { lo: None, hi: cfg.e_max },
                    cfg.seed,
                    &label,
                )?;
                let mut row = OrchestratorRow {
                    k,
                    n,
                    pair_type: kind,
                    l_k: l,
                    trials: est.trials,
                    failures: est.failures,
                    estimate: est.point_estimate,
                    ci_lo: est.ci_lo,
                    ci_hi: est.ci_hi,
                    bound_log10: est.bound_log10,
                    r_count: 0,
                    t_count: 0,
                    s_count: 0,
                    unexplained: 0,
                    diagnosed: cfg.diagnostics,
                };
                if cfg.diagnostics {
                    let (x, y) = separable_pair(kind, n, setup.d, l, setup.interaction.r0, setup.big_n)?;
                    let stride = cfg.cnr_stride.unwrap_or_else(|| crate::spectral::default_stride(l));
                    for t in est.per_trial.iter().filter(|t| t.failure) {
                        let e = t.first_failure_energy.unwrap();
                        let field = setup.field(t.seed)?;
                        let r = !non_resonant(&x, &field, setup, e, stride)?
                            && !non_resonant(&y, &field, setup, e, stride)?;
                        let mut tun = false;
                        let mut high = false;
                        if k >= 1 {
                            let prev = sched.level(k - 1);
                            for c in [&x, &y] {
                                if let Interactivity::PartiallyInteractive(part) =
                                    classify_interactivity(c.center(), l, setup.interaction.r0)
                                {
                                    let f = PiFactors::new(c, &part, &field, &setup.interaction, &setup.disc)?;
                                    tun |= !check_tunnelling(&f, e, m, setup.big_n, &field, &setup.interaction, &setup.disc)?
                                        .is_nt();
                                }
                                let counts = singular_subcube_counts(c, prev, &field, setup, e, m, 1)?;
                                high |= counts.m >= kappa(n) + 2;
                            }
                        }
                        row.r_count += r as u64;
                        row.t_count += tun as u64;
                        row.s_count += high as u64;
                        if !(r || tun || high) {
                            row.unexplained += 1;
                            log::info!("{label}: failure at E = {e} not covered by R, T or S");
                        }
                    }
                }
                rows.push(row);
            }
        }
    }
    Ok(OrchestratorReport { rows, sizing })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ConstantField;
    use crate::spectral::{is_cnr, scan_subcubes};
    use num_bigint::BigUint;

    fn setup1(dist: Distribution) -> ModelSetup {
        ModelSetup {
            big_n: 1,
            d: 1,
            distribution: dist,
            interaction: InteractionSpec::default(),
            disc: DiscretizationSpec::lattice(),
        }
    }

    fn big_scale(l: &BigUint) -> BigUint {
        (l * l * l).sqrt() + 1u32
    }

    #[test]
    fn scale_examples() {
        assert_eq!(scale_sequence(8, 3).unwrap(), vec![8, 23, 111, 1170]);
        assert_eq!(scale_sequence(3, 2).unwrap(), vec![3, 6, 15]);
        assert_eq!(scale_sequence(5, 0).unwrap(), vec![5]);
        assert!(matches!(scale_sequence(2, 1), Err(MsaError::InitialScale(2))));
        assert_eq!(previous_scale(23), Some(8));
        assert_eq!(previous_scale(111), Some(23));
        assert_eq!(previous_scale(7), None);
    }

    #[test]
    fn scales_match_bigint() {
        for l0 in 3..=50i64 {
            let s = scale_sequence(l0, 4).unwrap();
            let mut b = BigUint::from(l0 as u64);
            for k in 1..=4 {
                b = big_scale(&b);
                assert_eq!(BigUint::from(s[k]), b, "L0 = {l0}, k = {k}");
                assert_eq!(next_scale(s[k - 1]), s[k]);
            }
        }
    }

    #[test]
    fn schedule_strictness() {
        assert!(ScaleSchedule::new(8, 2, 1.0, 2, 1, true).is_err());
        assert!(ScaleSchedule::new(8, 2, 13.0, 2, 1, true).is_ok());
        assert!(ScaleSchedule::new(3, 2, 13.0, 2, 1, true).is_err());
        let s = ScaleSchedule::new(8, 2, 1.0, 2, 1, false).unwrap();
        assert_eq!(s.levels, vec![8, 23, 111]);
        assert!((s.e_star() - 0.5 / 8f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn mass_examples() {
        let m = mass_m(1.0, 2, 16.0).unwrap();
        assert!((m - 0.25 * 0.5 / (3.0 * 2f64.sqrt())).abs() < 1e-15);
        assert!((m - 0.0294628).abs() < 1e-7);
        let g = gamma_of(m, 100.0, 2, 2).unwrap();
        assert!((g - m * (1.0 + 100f64.powf(-0.125))).abs() < 1e-16);
        for l in [3.0, 23.0, 111.0] {
            let a = gamma_of(m, l, 1, 3).unwrap();
            let b = gamma_of(m, l, 2, 3).unwrap();
            let want = m * l.powf(-0.125) * (1.0 + l.powf(-0.125)).powi(2);
            assert!(((a - b) - want).abs() < 1e-15);
        }
        assert!(mass_m(0.0, 2, 16.0).is_err());
        assert!(mass_m(1.5, 2, 16.0).is_err());
        assert!(gamma_of(m, 10.0, 3, 2).is_err());
        assert!(gamma_of(m, 0.5, 1, 2).is_err());
    }

    #[test]
    fn pi_margin_out_of_regime_at_desk_scale() {
        let m = mass_m(0.5, 2, 8.0).unwrap();
        for l in [8.0, 23.0, 111.0] {
            assert!(pi_mass_margin(m, l, 2, 2, 1).unwrap() < 0.0);
        }
        assert!(pi_mass_margin(m, 1170.0, 2, 2, 1).unwrap() > 0.0);
    }

    fn pi_cube() -> MultiCube {
        MultiCube::new(ParticleConfiguration::from_1d(&[0, 40]), 5).unwrap()
    }

    #[test]
    fn hnr_far_below_spectra() {
        let f = RandomField::new(3, Distribution::uniform01()).unwrap();
        let inter = InteractionSpec::default();
        let disc = DiscretizationSpec::lattice();
        let pf = PiFactors::from_cube(&pi_cube(), &f, &inter, &disc).unwrap();
        let o = HnrOracle::compute(&pf, &f, &inter, &disc, 1).unwrap();
        assert!(check_hnr(&pf, &o, -5.0).hnr);
        assert!(check_hnr(&pf, &o, -5.0).witness.is_none());
    }

    #[test]
    fn hnr_fails_on_planted_sum() {
        let f = RandomField::new(4, Distribution::uniform01()).unwrap();
        let inter = InteractionSpec::default();
        let disc = DiscretizationSpec::lattice();
        let pf = PiFactors::from_cube(&pi_cube(), &f, &inter, &disc).unwrap();
        let o = HnrOracle::compute(&pf, &f, &inter, &disc, 1).unwrap();
        let e = pf.left.eig.values[2] + pf.right.eig.values[5];
        let r = check_hnr(&pf, &o, e);
        assert!(!r.hnr);
        let w = r.witness.unwrap();
        let rect = verify_resonant_rectangle(&pf, &w, &f, &inter, &disc, e).unwrap();
        assert!(rect.verified, "{rect:?}");
    }

    /// Every (shift, sub-cube, eigenvalue) triple, no caching or early exit.
    fn brute_hnr(pf: &PiFactors, f: &dyn PotentialField, e: f64) -> bool {
        let inter = InteractionSpec::default();
        for (side, cube) in [(FactorSide::Left, &pf.left.cube), (FactorSide::Right, &pf.right.cube)] {
            for sub in scan_subcubes(cube, 1) {
                let h = assemble_hamiltonian(&sub, f, &inter, &Default::default()).unwrap();
                let ev = eigenvalues(&h).unwrap();
                let t = (-(sub.half_side() as f64).sqrt()).exp();
                for mu in pf.shifts(side) {
                    if ev.iter().any(|lam| (e - mu - lam).abs() <= t) {
                        return false;
                    }
                }
            }
        }
        true
    }

    #[test]
    fn hnr_matches_brute_force() {
        let inter = InteractionSpec::default();
        let disc = DiscretizationSpec::lattice();
        let cube = MultiCube::new(ParticleConfiguration::from_1d(&[0, 30]), 4).unwrap();
        for seed in 0..6 {
            let f = RandomField::new(seed, Distribution::uniform01().scaled(3.0)).unwrap();
            let pf = PiFactors::from_cube(&cube, &f, &inter, &disc).unwrap();
            let o = HnrOracle::compute(&pf, &f, &inter, &disc, 1).unwrap();
            for i in 0..25 {
                let e = 0.3 * i as f64;
                assert_eq!(check_hnr(&pf, &o, e).hnr, brute_hnr(&pf, &f, e), "seed {seed} E {e}");
            }
        }
    }

    #[test]
    fn tensor_spectrum_matches_full() {
        let f = RandomField::new(9, Distribution::uniform01()).unwrap();
        let inter = InteractionSpec::default();
        let disc = DiscretizationSpec::lattice();
        let cube = MultiCube::new(ParticleConfiguration::from_1d(&[0, 30]), 4).unwrap();
        let pf = PiFactors::from_cube(&cube, &f, &inter, &disc).unwrap();
        let full = eigenvalues(&assemble_hamiltonian(&cube, &f, &inter, &disc).unwrap()).unwrap();
        let ts = pf.tensor_spectrum();
        for (a, b) in full.iter().zip(&ts) {
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn tunnelling_nt_far_below() {
        let f = RandomField::new(5, Distribution::uniform01()).unwrap();
        let inter = InteractionSpec::default();
        let disc = DiscretizationSpec::lattice();
        // L = 6 has previous scale 3
        let cube = MultiCube::new(ParticleConfiguration::from_1d(&[0, 40]), 6).unwrap();
        let pf = PiFactors::from_cube(&cube, &f, &inter, &disc).unwrap();
        let t = check_tunnelling(&pf, -50.0, 0.5, 2, &f, &inter, &disc).unwrap();
        assert_eq!(t, Tunnelling::Nt);
        // one-particle factors of width 13 cannot hold two cubes 14 l apart
        let e = pf.left.eig.values[0] + pf.right.eig.values[0];
        assert_eq!(check_tunnelling(&pf, e, 0.5, 2, &f, &inter, &disc).unwrap(), Tunnelling::Nt);
        let bad = MultiCube::new(ParticleConfiguration::from_1d(&[0, 40]), 5).unwrap();
        let pf = PiFactors::from_cube(&bad, &f, &inter, &disc).unwrap();
        assert!(matches!(
            check_tunnelling(&pf, 0.0, 0.5, 2, &f, &inter, &disc),
            Err(MsaError::NoPreviousScale(5))
        ));
    }

    #[test]
    fn planted_wells_tunnel() {
        // factor of half-side 97 = floor(21^{3/2}) + 1 holding two wells 150 apart
        let inter = InteractionSpec::none();
        let disc = DiscretizationSpec::lattice();
        let mut f = crate::model::PlantedField::new(ConstantField(20.0));
        f.set(vec![-75], 0.0);
        f.set(vec![75], 0.0);
        let factor = MultiCube::new(ParticleConfiguration::from_1d(&[0]), 97).unwrap();
        assert_eq!(previous_scale(97), Some(21));
        let well = MultiCube::new(ParticleConfiguration::from_1d(&[-75]), 21).unwrap();
        let h = assemble_hamiltonian(&well, &f, &inter, &disc).unwrap();
        let lam = eigenvalues(&h).unwrap()[0];
        let shifts = [0.0, 1.0];
        let w = find_separable_singular_pair(&factor, 21, &shifts, lam + 1.0, 0.1, 1, &f, &inter, &disc)
            .unwrap()
            .expect("planted pair");
        assert_eq!(w.shift_index, 1);
        assert!(w.v1.coords()[0] <= -75 + 21 && w.v1.coords()[0] >= -75 - 21);
        assert!((w.v2.coords()[0] - 75).abs() <= 21);
        let none =
            find_separable_singular_pair(&factor, 21, &shifts, lam - 3.0, 0.1, 1, &f, &inter, &disc).unwrap();
        assert!(none.is_none());
    }

    #[test]
    fn chain_arithmetic() {
        let r = (111f64).sqrt().exp();
        let v = chain_product(0.1, 10, 0.5, 0, r);
        assert!((v / r - 1e-10).abs() < 1e-22);
        let np = n_plus_lower_bound(23, 111, kappa(2) + 5);
        assert!((np - (111.0 / 23.0 - 63.0)).abs() < 1e-12);
        assert!(np < 0.0);
    }

    fn chain_case(seed: u64, center: &[i64], big_l: i64, l: i64, scale: f64, e_of: impl Fn(&CubeOperator) -> f64) -> bool {
        let inter = InteractionSpec::default();
        let disc = DiscretizationSpec::lattice();
        let f = RandomField::new(seed, Distribution::uniform01().scaled(scale)).unwrap();
        let cube = MultiCube::new(ParticleConfiguration::from_1d(center), big_l).unwrap();
        let big = CubeOperator::new(&cube, &f, &inter, &disc).unwrap();
        let e = e_of(&big);
        let cnr = is_cnr(&cube, &f, &inter, &disc, e, 1).unwrap();
        if !cnr.cnr {
            return false;
        }
        let m = 0.3;
        let map = classify_subcubes(&big, &f, &inter, &disc, l, e, m, center.len()).unwrap();
        let cert = match gri_chain_certificate(&big, &map, &cnr, e, m, center.len(), 1.0, kappa(center.len()) + 5) {
            Ok(c) => c,
            Err(MsaError::Precondition(_)) => return false,
            Err(e) => panic!("{e}"),
        };
        let direct = big.out_int_norm(e).unwrap();
        assert!(cert.bound >= direct * (1.0 - 1e-9), "seed {seed}: {} < {direct}", cert.bound);
        assert!(!cert.regime_ok && cert.refusal.is_some());
        true
    }

    #[test]
    fn chain_certificate_sound_1d() {
        let mut checked = 0;
        for seed in 0..30 {
            checked += chain_case(seed, &[0], 23, 8, 20.0, |b| b.eig.bottom() - 0.5) as usize;
            checked += chain_case(seed, &[0], 23, 8, 20.0, |b| 0.5 * (b.eig.values[3] + b.eig.values[4])) as usize;
            checked += chain_case(seed, &[0], 30, 6, 5.0, |b| 0.5 * (b.eig.values[0] + b.eig.values[1])) as usize;
        }
        assert!(checked >= 30, "{checked}");
    }

    #[test]
    fn chain_certificate_sound_2particle() {
        let mut checked = 0;
        for seed in 0..3 {
            checked += chain_case(seed, &[0, 1], 10, 4, 20.0, |b| b.eig.bottom() - 1.0) as usize;
        }
        assert!(checked >= 1);
    }

    #[test]
    fn chain_certificate_rejects_resonant_cube() {
        let inter = InteractionSpec::none();
        let disc = DiscretizationSpec::lattice();
        let f = RandomField::new(1, Distribution::uniform01()).unwrap();
        let cube = MultiCube::new(ParticleConfiguration::from_1d(&[0]), 12).unwrap();
        let big = CubeOperator::new(&cube, &f, &inter, &disc).unwrap();
        let e = big.eig.values[0] + 1e-9;
        let cnr = is_cnr(&cube, &f, &inter, &disc, e, 1).unwrap();
        assert!(!cnr.cnr);
        let map = classify_subcubes(&big, &f, &inter, &disc, 4, e, 0.2, 1).unwrap();
        assert!(matches!(
            gri_chain_certificate(&big, &map, &cnr, e, 0.2, 1, 1.0, 6),
            Err(MsaError::Precondition(_))
        ));
    }

    #[test]
    fn separable_pairs_are_separable() {
        for n in 1..=3 {
            for kind in PairType::for_n(n) {
                for l in [2, 5, 8] {
                    let (x, y) = separable_pair(kind, n, 1, l, 1, 3).unwrap();
                    let fi = |c: &MultiCube| crate::geometry::is_fully_interactive(c.center(), l, 1);
                    match kind {
                        PairType::FiFi => assert!(fi(&x) && fi(&y)),
                        PairType::PiPi => assert!(!fi(&x) && !fi(&y)),
                        PairType::Mixed => assert!(fi(&x) && !fi(&y)),
                    }
                }
            }
        }
        assert!(separable_pair(PairType::PiPi, 1, 1, 3, 1, 2).is_err());
    }

    #[test]
    fn initial_scale_shifted_potential() {
        let s = setup1(Distribution::Uniform { lo: 10.0, hi: 11.0 });
        let r = initial_scale_probability(&ParticleConfiguration::from_1d(&[0]), 16, &s, 0.05, 0.125, 20, 1, "t")
            .unwrap();
        assert_eq!(r.bottom.events, 0);
        assert_eq!(r.singular.events, 0);
        assert_eq!(r.bottom.estimate, 0.0);
    }

    #[test]
    fn ds_zero_potential_far_below() {
        let s = setup1(Distribution::Uniform { lo: 0.0, hi: 0.0 });
        let w = EnergySelection::Window { lo: Some(-3.0), hi: -1.0 };
        let sched = ScaleSchedule::new(8, 0, 10.0, 1, 1, false).unwrap();
        let est = ds_pair_probability(0, 1, &sched, 0.05, PairType::FiFi, &s, 10, &w, 7, "ds").unwrap();
        assert_eq!(est.failures, 0);
        assert_eq!(est.marginal_x, 0);
        assert!(est.per_trial.iter().all(|t| t.energies_probed > 10));
        assert!(est.ci_lo <= est.point_estimate && est.point_estimate <= est.ci_hi);
        // at the bottom eigenvalue both cubes are singular in every trial
        let e0 = s.operator(&MultiCube::new(ParticleConfiguration::from_1d(&[0]), 8).unwrap(), &ConstantField(0.0))
            .unwrap()
            .eig
            .bottom();
        let est = ds_pair_probability(0, 1, &sched, 0.05, PairType::FiFi, &s, 5, &EnergySelection::Fixed(e0), 7, "ds")
            .unwrap();
        assert_eq!(est.failures, 5);
    }

    #[test]
    fn ds_window_enlargement_monotone() {
        let s = setup1(Distribution::uniform01().scaled(4.0));
        let sched = ScaleSchedule::new(8, 0, 10.0, 1, 1, false).unwrap();
        let step = resonance_threshold(8) / 2.0;
        let small = EnergySelection::Window { lo: Some(40.0 * step), hi: 60.0 * step };
        let large = EnergySelection::Window { lo: Some(20.0 * step), hi: 90.0 * step };
        let a = ds_pair_probability(0, 1, &sched, 0.05, PairType::FiFi, &s, 40, &small, 3, "w").unwrap();
        let b = ds_pair_probability(0, 1, &sched, 0.05, PairType::FiFi, &s, 40, &large, 3, "w").unwrap();
        for (ta, tb) in a.per_trial.iter().zip(&b.per_trial) {
            assert!(!ta.failure || tb.failure);
        }
        assert!(b.failures >= a.failures);
    }

    #[test]
    fn wegner_far_below_and_inclusion() {
        let s = setup1(Distribution::uniform01());
        let r = wegner_cnr_statistic(1, 9, &s, -1.0, (-1.5, -1.0), 1, 30, 2, "wg").unwrap();
        assert_eq!(r.single.events, 0);
        assert_eq!(r.pair_scan.events, 0);
        let r = wegner_cnr_statistic(1, 9, &s, 0.4, (0.3, 0.5), 1, 60, 2, "wg").unwrap();
        assert!(r.pair.events <= r.single.events);
        assert!(r.pair_scan.events <= r.single_scan.events);
        for t in &r.per_trial {
            assert!(!t.not_cnr || t.not_cnr_scan);
        }
    }

    #[test]
    fn non_cnr_set_matches_pointwise() {
        let f = RandomField::new(12, Distribution::uniform01()).unwrap();
        let cube = MultiCube::new(ParticleConfiguration::from_1d(&[0]), 9).unwrap();
        let sp = SubcubeSpectra::compute(&cube, &f, &InteractionSpec::none(), &Default::default(), 1).unwrap();
        let set = non_cnr_set(&sp, 0.0, 1.0);
        for i in 0..=2000 {
            let e = i as f64 / 2000.0;
            let inside = set.iter().any(|(a, b)| *a <= e && e <= *b);
            assert_eq!(inside, !sp.is_cnr(e), "E = {e}");
        }
    }

    #[test]
    fn orchestrator_single_particle_and_refusal() {
        let sched = ScaleSchedule::new(3, 1, 10.0, 1, 1, false).unwrap();
        let cfg = OrchestratorConfig {
            schedule: sched.clone(),
            setup: setup1(Distribution::uniform01().scaled(20.0)),
            mass: MassParameters::new(0.5, 1, 3.0).unwrap(),
            trials: 8,
            seed: 11,
            dim_cap: 5000,
            e_max: sched.e_star(),
            diagnostics: true,
            cnr_stride: None,
        };
        let rep = induction_orchestrator(&cfg).unwrap();
        assert_eq!(rep.rows.len(), 2);
        assert!(rep.rows.iter().all(|r| r.n == 1 && r.pair_type == PairType::FiFi));
        for r in &rep.rows {
            assert!(r.ci_lo <= r.estimate && r.estimate <= r.ci_hi);
        }
        let mut small = cfg.clone();
        small.dim_cap = 10;
        assert!(matches!(induction_orchestrator(&small), Err(MsaError::Infeasible { .. })));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn gamma_ordering(gb in 0.01f64..1.0, big_n in 1usize..5, l0 in 3.0f64..64.0, l in 1.0f64..1e4) {
                let m = mass_m(gb, big_n, l0).unwrap();
                for n in 1..=big_n {
                    let g = gamma_of(m, l, n, big_n).unwrap();
                    prop_assert!(g > m);
                    if n > 1 {
                        prop_assert!(gamma_of(m, l, n - 1, big_n).unwrap() > g);
                    }
                    prop_assert!(gamma_of(m, l * 2.0, n, big_n).unwrap() < g);
                }
            }

            #[test]
            fn recursion_reproducible(l0 in 3i64..10_000, k in 0usize..4) {
                let s = scale_sequence(l0, k).unwrap();
                for w in s.windows(2) {
                    prop_assert_eq!(next_scale(w[0]), w[1]);
                    prop_assert_eq!(previous_scale(w[1] as i64), Some(w[0] as i64));
                }
            }
        }
    }
}
