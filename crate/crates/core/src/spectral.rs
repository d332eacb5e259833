//! Resolvent block norms and the spectral predicates built on them: resonance,
//! complete non-resonance, (E,m)-singularity, Combes-Thomas, GRI and EDI checks.

use faer::{Mat, MatRef, Side};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{linf, MultiCube, ParticleConfiguration};
use crate::model::{
    assemble_hamiltonian, DiscretizationSpec, HamiltonianMatrix, InteractionSpec, ModelError,
    PotentialField,
};
use crate::msa::gamma_of;

/// Energies closer than this to an eigenvalue have no resolvent.
pub const RESOLVENT_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("E = {e} is within {dist:e} of the spectrum; resolvent undefined")]
    ResolventUndefined { e: f64, dist: f64 },
    #[error("eigensolver did not converge")]
    Eigensolver,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid parameter: {0}")]
    Domain(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Largest singular value; zero for an empty matrix.
pub fn spectral_norm(m: MatRef<'_, f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    if m.nrows() == 1 || m.ncols() == 1 {
        let mut s = 0.0;
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                s += m[(i, j)] * m[(i, j)];
            }
        }
        return s.sqrt();
    }
    m.singular_values().expect("svd converges")[0]
}

/// Full eigendecomposition `H = Q diag(values) Q^T`, values nondecreasing.
#[derive(Debug, Clone)]
pub struct Eigensystem {
    pub values: Vec<f64>,
    pub vectors: Mat<f64>,
}

impl Eigensystem {
    pub fn new(h: &HamiltonianMatrix) -> Result<Self, SpectralError> {
        Self::from_dense(h.to_dense().as_ref())
    }

    pub fn from_dense(m: MatRef<'_, f64>) -> Result<Self, SpectralError> {
        let evd = m
            .self_adjoint_eigen(Side::Lower)
            .map_err(|_| SpectralError::Eigensolver)?;
        let values: Vec<f64> = (0..m.nrows()).map(|i| evd.S()[i]).collect();
        Ok(Self {
            values,
            vectors: evd.U().to_owned(),
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn bottom(&self) -> f64 {
        self.values[0]
    }

    /// `dist(E, sigma(H))` by bisection on the sorted spectrum.
    pub fn dist(&self, e: f64) -> f64 {
        dist_to_sorted(&self.values, e)
    }

    fn weights(&self, e: f64) -> Result<Vec<f64>, SpectralError> {
        let dist = self.dist(e);
        if dist < RESOLVENT_TOL {
            return Err(SpectralError::ResolventUndefined { e, dist });
        }
        Ok(self.values.iter().map(|l| 1.0 / (l - e)).collect())
    }

    /// The `B x A` block of `(H - E)^{-1}`.
    pub fn green_block(&self, e: f64, a: &[usize], b: &[usize]) -> Result<Mat<f64>, SpectralError> {
        let w = self.weights(e)?;
        let q = &self.vectors;
        let n = self.dim();
        let qb = Mat::from_fn(b.len(), n, |i, k| q[(b[i], k)]);
        let qa = Mat::from_fn(a.len(), n, |i, k| q[(a[i], k)] * w[k]);
        Ok(&qb * qa.transpose())
    }

    pub fn green_block_norm(&self, e: f64, a: &[usize], b: &[usize]) -> Result<f64, SpectralError> {
        if a.is_empty() || b.is_empty() {
            self.weights(e)?;
            return Ok(0.0);
        }
        Ok(spectral_norm(self.green_block(e, a, b)?.as_ref()))
    }

    /// Full resolvent `(H - E)^{-1}`.
    pub fn resolvent(&self, e: f64) -> Result<Mat<f64>, SpectralError> {
        let all: Vec<usize> = (0..self.dim()).collect();
        self.green_block(e, &all, &all)
    }
}

pub fn dist_to_sorted(values: &[f64], e: f64) -> f64 {
    let pos = values.partition_point(|&l| l < e);
    let mut d = f64::INFINITY;
    if pos < values.len() {
        d = d.min(values[pos] - e);
    }
    if pos > 0 {
        d = d.min(e - values[pos - 1]);
    }
    d
}

/// Operator norm of the `B x A` block of `(H - E)^{-1}`.
pub fn green_block_norm(
    h: &HamiltonianMatrix,
    e: f64,
    a: &[usize],
    b: &[usize],
) -> Result<f64, SpectralError> {
    Eigensystem::new(h)?.green_block_norm(e, a, b)
}

/// `e^{-L^{1/2}}`.
pub fn resonance_threshold(l: i64) -> f64 {
    (-(l as f64).sqrt()).exp()
}

/// `dist(E, sigma) <= e^{-L^{1/2}}`.
pub fn is_resonant(spectrum: &[f64], e: f64, l: i64) -> bool {
    dist_to_sorted(spectrum, e) <= resonance_threshold(l)
}

/// Smallest admissible sub-cube half-side `ceil(L^{2/3})`, computed exactly as
/// the least `l` with `l^3 >= L^2`.
pub fn min_subcube_half_side(l: i64) -> i64 {
    let target = (l as i128) * (l as i128);
    let mut s = (l as f64).powf(2.0 / 3.0).floor() as i64 - 1;
    s = s.max(1);
    while (s as i128).pow(3) < target {
        s += 1;
    }
    while s > 1 && ((s - 1) as i128).pow(3) >= target {
        s -= 1;
    }
    s
}

/// 1 up to `L = 16`, `floor(L/8)` above.
pub fn default_stride(l: i64) -> i64 {
    if l <= 16 {
        1
    } else {
        (l / 8).max(1)
    }
}

/// Sub-cubes `C_l(v) subset C_L(u)` with `l in [ceil(L^{2/3}), L]` and `v - u` on the
/// stride sublattice, in order of increasing `l` then lexicographic `v`.
pub fn scan_subcubes(cube: &MultiCube, stride: i64) -> Vec<MultiCube> {
    let big = cube.half_side();
    let u = cube.center().coords().to_vec();
    let d = cube.d();
    let stride = stride.max(1);
    let mut out = Vec::new();
    for l in min_subcube_half_side(big)..=big {
        let reach = (big - l) / stride;
        let dim = u.len();
        let mut k = vec![-reach; dim];
        loop {
            let v: Vec<i64> = u.iter().zip(&k).map(|(c, s)| c + s * stride).collect();
            let center = ParticleConfiguration::new(d, v).unwrap();
            out.push(MultiCube::new(center, l).unwrap());
            let mut a = dim;
            loop {
                if a == 0 {
                    break;
                }
                a -= 1;
                if k[a] < reach {
                    k[a] += 1;
                    break;
                }
                k[a] = -reach;
                if a == 0 {
                    a = usize::MAX;
                    break;
                }
            }
            if a == usize::MAX || (a == 0 && k.iter().all(|&x| x == -reach)) {
                break;
            }
        }
    }
    out
}

/// Spectra of every scanned sub-cube, computed once and queried at many energies.
#[derive(Debug, Clone)]
pub struct SubcubeSpectra {
    pub stride: i64,
    pub cubes: Vec<MultiCube>,
    pub spectra: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    pub half_side: i64,
    pub center: ParticleConfiguration,
    pub dist: f64,
}

impl SubcubeSpectra {
    pub fn compute(
        cube: &MultiCube,
        field: &dyn PotentialField,
        inter: &InteractionSpec,
        disc: &DiscretizationSpec,
        stride: i64,
    ) -> Result<Self, SpectralError> {
        let cubes = scan_subcubes(cube, stride);
        let spectra = cubes
            .iter()
            .map(|c| {
                let h = assemble_hamiltonian(c, field, inter, disc)?;
                Ok(crate::model::eigenvalues(&h)?)
            })
            .collect::<Result<Vec<_>, SpectralError>>()?;
        Ok(Self {
            stride,
            cubes,
            spectra,
        })
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    /// First resonant sub-cube at energy `E`, in scan order.
    pub fn first_resonance(&self, e: f64) -> Option<Resonance> {
        self.cubes.iter().zip(&self.spectra).find_map(|(c, s)| {
            let dist = dist_to_sorted(s, e);
            (dist <= resonance_threshold(c.half_side())).then(|| Resonance {
                half_side: c.half_side(),
                center: c.center().clone(),
                dist,
            })
        })
    }

    pub fn is_cnr(&self, e: f64) -> bool {
        self.first_resonance(e).is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnrReport {
    pub cnr: bool,
    pub stride: i64,
    pub min_half_side: i64,
    pub scanned: usize,
    pub witness: Option<Resonance>,
}

/// Complete non-resonance of `C_L(u)` at `E` over the stride scan.
pub fn is_cnr(
    cube: &MultiCube,
    field: &dyn PotentialField,
    inter: &InteractionSpec,
    disc: &DiscretizationSpec,
    e: f64,
    stride: i64,
) -> Result<CnrReport, SpectralError> {
    let spectra = SubcubeSpectra::compute(cube, field, inter, disc, stride)?;
    let witness = spectra.first_resonance(e);
    Ok(CnrReport {
        cnr: witness.is_none(),
        stride,
        min_half_side: min_subcube_half_side(cube.half_side()),
        scanned: spectra.len(),
        witness,
    })
}

/// A cube with its Hamiltonian, eigensystem and int/out index sets.
#[derive(Debug, Clone)]
pub struct CubeOperator {
    pub cube: MultiCube,
    pub h: HamiltonianMatrix,
    pub eig: Eigensystem,
    pub int_idx: Vec<usize>,
    pub out_idx: Vec<usize>,
}

impl CubeOperator {
    pub fn new(
        cube: &MultiCube,
        field: &dyn PotentialField,
        inter: &InteractionSpec,
        disc: &DiscretizationSpec,
    ) -> Result<Self, SpectralError> {
        let h = assemble_hamiltonian(cube, field, inter, disc)?;
        Self::from_matrix(cube.clone(), h)
    }

    pub fn from_matrix(cube: MultiCube, h: HamiltonianMatrix) -> Result<Self, SpectralError> {
        let eig = Eigensystem::new(&h)?;
        let int_idx = h.indices_where(|s| cube.in_int(s));
        let out_idx = h.indices_where(|s| cube.in_out(s));
        Ok(Self {
            cube,
            h,
            eig,
            int_idx,
            out_idx,
        })
    }

    pub fn half_side(&self) -> i64 {
        self.cube.half_side()
    }

    /// `||1_out G(E) 1_int||`.
    pub fn out_int_norm(&self, e: f64) -> Result<f64, SpectralError> {
        self.eig.green_block_norm(e, &self.int_idx, &self.out_idx)
    }

    /// Basis indices of the grid points lying in the given cells.
    pub fn indices_of_cells(&self, cells: &[Vec<i64>]) -> Vec<usize> {
        let set: std::collections::HashSet<&[i64]> = cells.iter().map(|c| c.as_slice()).collect();
        self.h.indices_where(|s| set.contains(s))
    }

    pub fn evaluator(&self) -> BlockNormEvaluator {
        BlockNormEvaluator::new(&self.eig, &self.int_idx, &self.out_idx)
    }
}

/// Repeated evaluation of `||1_B G(E) 1_A||` over many energies with the
/// eigenvector rows gathered once.
#[derive(Debug, Clone)]
pub struct BlockNormEvaluator {
    values: Vec<f64>,
    qa: Mat<f64>,
    qb: Mat<f64>,
    /// `|q_a,k| * |q_b,k|` per eigenvector, for the cheap triangle bound.
    col_weight: Vec<f64>,
}

impl BlockNormEvaluator {
    pub fn new(eig: &Eigensystem, a: &[usize], b: &[usize]) -> Self {
        let n = eig.dim();
        let q = &eig.vectors;
        let qa = Mat::from_fn(a.len(), n, |i, k| q[(a[i], k)]);
        let qb = Mat::from_fn(b.len(), n, |i, k| q[(b[i], k)]);
        let col_norm = |m: &Mat<f64>, k: usize| {
            (0..m.nrows()).map(|i| m[(i, k)] * m[(i, k)]).sum::<f64>().sqrt()
        };
        let col_weight = (0..n).map(|k| col_norm(&qa, k) * col_norm(&qb, k)).collect();
        Self {
            values: eig.values.clone(),
            qa,
            qb,
            col_weight,
        }
    }

    /// `sum_k |q_a,k||q_b,k| / |lambda_k - E|`, an upper bound on the norm.
    pub fn upper_bound(&self, e: f64) -> f64 {
        self.values
            .iter()
            .zip(&self.col_weight)
            .map(|(l, w)| w / (l - e).abs())
            .sum()
    }

    pub fn norm(&self, e: f64) -> Result<f64, SpectralError> {
        let dist = dist_to_sorted(&self.values, e);
        if dist < RESOLVENT_TOL {
            return Err(SpectralError::ResolventUndefined { e, dist });
        }
        if self.qa.nrows() == 0 || self.qb.nrows() == 0 {
            return Ok(0.0);
        }
        let n = self.values.len();
        let qaw = Mat::from_fn(self.qa.nrows(), n, |i, k| {
            self.qa[(i, k)] / (self.values[k] - e)
        });
        let block = &self.qb * qaw.transpose();
        Ok(spectral_norm(block.as_ref()))
    }

    /// Whether the norm exceeds `threshold`, skipping the dense product when the
    /// triangle bound already settles it.
    pub fn exceeds(&self, e: f64, threshold: f64) -> Result<(bool, f64), SpectralError> {
        let ub = self.upper_bound(e);
        if ub.is_finite() && ub <= threshold {
            let dist = dist_to_sorted(&self.values, e);
            if dist < RESOLVENT_TOL {
                return Err(SpectralError::ResolventUndefined { e, dist });
            }
            return Ok((false, ub));
        }
        let v = self.norm(e)?;
        Ok((v > threshold, v))
    }
}

/// One evaluation of the singularity predicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenProbe {
    pub cube: String,
    pub e: f64,
    /// `+inf` when `E` lies on the spectrum.
    pub block_norm: f64,
    pub dist_to_spectrum: f64,
    pub resonant: bool,
    pub cnr: Option<bool>,
    pub singular: bool,
    pub gamma_used: f64,
    pub threshold: f64,
}

pub fn cube_label(cube: &MultiCube) -> String {
    let c: Vec<String> = cube.center().coords().iter().map(|v| v.to_string()).collect();
    format!("C{}({})", cube.half_side(), c.join(" "))
}

/// `(E,m)`-singularity of a cube of `n` particles out of `N`.
pub fn is_singular(op: &CubeOperator, e: f64, m: f64, n: usize, big_n: usize) -> GreenProbe {
    let l = op.half_side();
    let gamma = gamma_of(m, l as f64, n, big_n).unwrap_or(f64::NAN);
    let threshold = (-gamma * l as f64).exp();
    let dist = op.eig.dist(e);
    let block_norm = op.out_int_norm(e).unwrap_or(f64::INFINITY);
    GreenProbe {
        cube: cube_label(&op.cube),
        e,
        block_norm,
        dist_to_spectrum: dist,
        resonant: dist <= resonance_threshold(l),
        cnr: None,
        singular: !(block_norm <= threshold),
        gamma_used: gamma,
        threshold,
    }
}

/// `(1/((1-g^2) eta)) e^{g sqrt(eta D)} e^{-g sqrt(eta) r}`.
pub fn combes_thomas_rhs(eta: f64, gamma: f64, dim: usize, r: f64) -> Result<f64, SpectralError> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(SpectralError::Domain(format!("gamma = {gamma} not in (0,1)")));
    }
    if !(eta > 0.0) {
        return Err(SpectralError::Domain(format!("eta = {eta} not positive")));
    }
    let s = eta.sqrt();
    Ok((gamma * (eta * dim as f64).sqrt() - gamma * s * r).exp() / ((1.0 - gamma * gamma) * eta))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CtReport {
    pub eta: f64,
    pub pairs: usize,
    pub max_ratio: f64,
    pub worst_pair: Option<(Vec<i64>, Vec<i64>)>,
    pub pass: bool,
}

/// Checks `||1_x (H-E)^{-1} 1_y|| <= rhs(eta, gamma, nd, |x-y|)` on the given cell pairs.
pub fn verify_combes_thomas(
    h: &HamiltonianMatrix,
    e: f64,
    gamma: f64,
    pairs: &[(Vec<i64>, Vec<i64>)],
) -> Result<CtReport, SpectralError> {
    let eig = Eigensystem::new(h)?;
    let eta = eig.bottom() - e;
    if !(eta > 0.0) {
        return Err(SpectralError::Precondition(format!(
            "E = {e} is not below the spectrum bottom {}",
            eig.bottom()
        )));
    }
    let g = eig.resolvent(e)?;
    let dim = h.config_dim();
    let k = h.cells_per_unit() as i64;
    let mut cell_index: std::collections::HashMap<Vec<i64>, Vec<usize>> = Default::default();
    if k > 1 {
        for i in 0..h.dim() {
            cell_index.entry(h.cell_of(i)).or_default().push(i);
        }
    }
    let idx = |c: &Vec<i64>| -> Vec<usize> {
        if k == 1 {
            h.index_of(c).into_iter().collect()
        } else {
            cell_index.get(c).cloned().unwrap_or_default()
        }
    };
    let mut max_ratio: f64 = 0.0;
    let mut worst = None;
    for (x, y) in pairs {
        let (ix, iy) = (idx(x), idx(y));
        if ix.is_empty() || iy.is_empty() {
            return Err(SpectralError::Precondition(format!(
                "cell pair {x:?}, {y:?} outside the box"
            )));
        }
        let block = Mat::from_fn(ix.len(), iy.len(), |a, b| g[(ix[a], iy[b])]);
        let lhs = spectral_norm(block.as_ref());
        let rhs = combes_thomas_rhs(eta, gamma, dim, linf(x, y) as f64)?;
        let ratio = lhs / rhs;
        if ratio > max_ratio {
            max_ratio = ratio;
            worst = Some((x.clone(), y.clone()));
        }
    }
    Ok(CtReport {
        eta,
        pairs: pairs.len(),
        max_ratio,
        worst_pair: worst,
        pass: max_ratio <= 1.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GriReport {
    pub lhs: f64,
    /// `||1_B G_L 1_out(l)||`.
    pub outer_factor: f64,
    /// `||1_out(l) G_l 1_A||`.
    pub inner_factor: f64,
    pub rhs_product: f64,
    pub ratio: f64,
}

fn ratio_of(lhs: f64, rhs: f64) -> f64 {
    if lhs == 0.0 {
        0.0
    } else if rhs == 0.0 {
        f64::INFINITY
    } else {
        lhs / rhs
    }
}

/// The three norms of the geometric resolvent inequality for `C_l(x) subset C_L(u)`,
/// with `A` in the int region of the inner cube and `B` outside it (cells).
pub fn verify_gri(
    outer: &CubeOperator,
    inner: &CubeOperator,
    e: f64,
    a: &[Vec<i64>],
    b: &[Vec<i64>],
) -> Result<GriReport, SpectralError> {
    if !outer.cube.contains_cube(&inner.cube) {
        return Err(SpectralError::Precondition("inner cube not inside outer".into()));
    }
    if let Some(c) = a.iter().find(|c| !inner.cube.in_int(c)) {
        return Err(SpectralError::Precondition(format!("{c:?} not in inner int region")));
    }
    if let Some(c) = b.iter().find(|c| inner.cube.contains(c) || !outer.cube.contains(c)) {
        return Err(SpectralError::Precondition(format!("{c:?} not in outer minus inner")));
    }
    for (op, which) in [(outer, "outer"), (inner, "inner")] {
        let dist = op.eig.dist(e);
        if dist < RESOLVENT_TOL {
            return Err(SpectralError::ResolventUndefined { e, dist });
        }
        let _ = which;
    }
    let a_outer = outer.indices_of_cells(a);
    let a_inner = inner.indices_of_cells(a);
    let b_outer = outer.indices_of_cells(b);
    let shell_outer = outer.h.indices_where(|s| inner.cube.in_out(s));
    let lhs = outer.eig.green_block_norm(e, &a_outer, &b_outer)?;
    let outer_factor = outer.eig.green_block_norm(e, &shell_outer, &b_outer)?;
    let inner_factor = inner.eig.green_block_norm(e, &a_inner, &inner.out_idx)?;
    let rhs_product = outer_factor * inner_factor;
    Ok(GriReport {
        lhs,
        outer_factor,
        inner_factor,
        rhs_product,
        ratio: ratio_of(lhs, rhs_product),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdiReport {
    pub lhs: f64,
    pub green_factor: f64,
    pub psi_out: f64,
    pub ratio: f64,
    pub constant: Option<f64>,
    pub pass: Option<bool>,
}

/// Eigenfunction decay inequality for an eigenpair `(E, psi)` of `h` (a box
/// containing `sub`): `||1_{C_1(x)} psi|| <= C ||1_out G_l(E) 1_int|| ||1_out psi||`.
pub fn verify_edi(
    h: &HamiltonianMatrix,
    e: f64,
    psi: &[f64],
    sub: &CubeOperator,
    constant: Option<f64>,
) -> Result<EdiReport, SpectralError> {
    if psi.len() != h.dim() {
        return Err(SpectralError::Precondition("eigenvector length mismatch".into()));
    }
    let region = h.region();
    let lo = &sub.cube;
    let inside = (0..region.lo.len()).all(|a| {
        let c = lo.center().coords()[a];
        region.lo[a] <= c - lo.half_side() && c + lo.half_side() <= region.hi[a]
    });
    if !inside {
        return Err(SpectralError::Precondition("sub-cube not inside the box".into()));
    }
    let dist = sub.eig.dist(e);
    if dist < RESOLVENT_TOL {
        return Err(SpectralError::ResolventUndefined { e, dist });
    }
    let x = sub.cube.center().coords().to_vec();
    let mut lhs2 = 0.0;
    let mut out2 = 0.0;
    for i in 0..h.dim() {
        let c = h.cell_of(i);
        if linf(&c, &x) <= 1 {
            lhs2 += psi[i] * psi[i];
        }
        if sub.cube.in_out(&c) {
            out2 += psi[i] * psi[i];
        }
    }
    let green_factor = sub.out_int_norm(e)?;
    let (lhs, psi_out) = (lhs2.sqrt(), out2.sqrt());
    let ratio = ratio_of(lhs, green_factor * psi_out);
    Ok(EdiReport {
        lhs,
        green_factor,
        psi_out,
        ratio,
        constant,
        pass: constant.map(|c| ratio <= c),
    })
}

/// Energies to probe: a uniform grid over `[e_min, e_max]` plus extra points
/// that fall inside the window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyWindow {
    pub e_min: f64,
    pub e_max: f64,
    pub grid_step: f64,
    pub extra_points: Vec<f64>,
}

impl EnergyWindow {
    pub fn new(e_min: f64, e_max: f64, grid_step: f64) -> Result<Self, SpectralError> {
        if !(e_min <= e_max) || !(grid_step > 0.0) {
            return Err(SpectralError::Domain(format!(
                "window [{e_min}, {e_max}] step {grid_step}"
            )));
        }
        Ok(Self {
            e_min,
            e_max,
            grid_step,
            extra_points: Vec::new(),
        })
    }

    pub fn contains(&self, e: f64) -> bool {
        self.e_min <= e && e <= self.e_max
    }

    /// Sorted, deduplicated probe energies: the multiples of `grid_step`
    /// inside the window, both endpoints and the extra points inside. The grid
    /// is anchored at zero so a larger window probes a superset.
    pub fn points(&self) -> Vec<f64> {
        let first = (self.e_min / self.grid_step).ceil() as i64;
        let last = (self.e_max / self.grid_step).floor() as i64;
        let mut pts: Vec<f64> = (first..=last)
            .map(|j| j as f64 * self.grid_step)
            .filter(|e| self.contains(*e))
            .collect();
        pts.push(self.e_min);
        pts.push(self.e_max);
        pts.extend(self.extra_points.iter().copied().filter(|e| self.contains(*e)));
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ConstantField, Distribution, RandomField};
    use rand::{Rng, SeedableRng};

    fn cube1(c: &[i64], l: i64) -> MultiCube {
        MultiCube::new(ParticleConfiguration::from_1d(c), l).unwrap()
    }

    fn random_op(seed: u64, c: &[i64], l: i64, scale: f64) -> CubeOperator {
        let f = RandomField::new(seed, Distribution::uniform01().scaled(scale)).unwrap();
        CubeOperator::new(&cube1(c, l), &f, &InteractionSpec::default(), &Default::default()).unwrap()
    }

    /// Explicit inverse by LU, independent of the eigen route.
    fn lu_inverse(m: &Mat<f64>) -> Mat<f64> {
        use faer::linalg::solvers::Solve;
        let lu = m.partial_piv_lu();
        lu.solve(Mat::<f64>::identity(m.nrows(), m.ncols()))
    }

    fn dense_from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Mat<f64> {
        Mat::from_fn(n, n, f)
    }

    #[test]
    fn full_block_is_inverse_distance() {
        let op = random_op(1, &[0], 6, 1.0);
        let e = 0.3;
        let all: Vec<usize> = (0..op.h.dim()).collect();
        let n = op.eig.green_block_norm(e, &all, &all).unwrap();
        assert!((n - 1.0 / op.eig.dist(e)).abs() < 1e-10 * n);
    }

    #[test]
    fn diagonal_matrix_has_no_off_diagonal_resolvent() {
        let m = dense_from_fn(2, |i, j| if i == j { [1.0, 3.0][i] } else { 0.0 });
        let eig = Eigensystem::from_dense(m.as_ref()).unwrap();
        assert_eq!(eig.green_block_norm(0.0, &[0], &[1]).unwrap(), 0.0);
    }

    #[test]
    fn block_norm_matches_explicit_inverse() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5 {
            let n = 50;
            let mut m = Mat::<f64>::zeros(n, n);
            for i in 0..n {
                for j in 0..=i {
                    let v: f64 = rng.random_range(-1.0..1.0);
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
            let e = 0.123;
            let eig = Eigensystem::from_dense(m.as_ref()).unwrap();
            let mut shifted = m.clone();
            for i in 0..n {
                shifted[(i, i)] -= e;
            }
            let inv = lu_inverse(&shifted);
            let a: Vec<usize> = (0..n).filter(|i| i % 3 == 0).collect();
            let b: Vec<usize> = (0..n).filter(|i| i % 4 == 1).collect();
            let block = Mat::from_fn(b.len(), a.len(), |i, j| inv[(b[i], a[j])]);
            let want = spectral_norm(block.as_ref());
            let got = eig.green_block_norm(e, &a, &b).unwrap();
            assert!((got - want).abs() < 1e-10 * want.max(1.0), "{got} {want}");
        }
    }

    #[test]
    fn resolvent_undefined_on_spectrum() {
        let op = random_op(2, &[0], 4, 1.0);
        let e = op.eig.values[3];
        assert!(matches!(
            op.eig.green_block_norm(e, &[0], &[1]),
            Err(SpectralError::ResolventUndefined { .. })
        ));
        let p = is_singular(&op, e, 0.1, 1, 1);
        assert!(p.singular && p.resonant && p.block_norm.is_infinite());
    }

    #[test]
    fn resonance_examples() {
        assert!((resonance_threshold(16) - 0.018315638888734).abs() < 1e-12);
        let spec = [1.0, 2.0];
        assert!(is_resonant(&spec, 1.01, 16));
        assert!(!is_resonant(&spec, 1.02, 16));
        assert!(is_resonant(&spec, 2.0, 16));
    }

    #[test]
    fn min_half_side_exact() {
        assert_eq!(min_subcube_half_side(9), 5);
        assert_eq!(min_subcube_half_side(16), 7);
        assert_eq!(min_subcube_half_side(25), 9);
        assert_eq!(min_subcube_half_side(8), 4);
        assert_eq!(min_subcube_half_side(27), 9);
        assert_eq!(min_subcube_half_side(1), 1);
        for l in 1..2000i64 {
            let s = min_subcube_half_side(l);
            assert!((s as i128).pow(3) >= (l as i128).pow(2));
            assert!(s == 1 || ((s - 1) as i128).pow(3) < (l as i128).pow(2));
        }
    }

    #[test]
    fn scan_covers_expected_subcubes() {
        let cube = cube1(&[3], 9);
        let s1 = scan_subcubes(&cube, 1);
        let expected: usize = (5..=9).map(|l| (2 * (9 - l) + 1) as usize).sum();
        assert_eq!(s1.len(), expected);
        assert!(s1.iter().all(|c| cube.contains_cube(c)));
        let s2 = scan_subcubes(&cube, 2);
        assert!(s2.iter().all(|c| s1.contains(c)));
        let two = MultiCube::new(ParticleConfiguration::new(1, vec![0, 5]).unwrap(), 4).unwrap();
        let s = scan_subcubes(&two, 1);
        let expected: usize = (3..=4).map(|l| ((2 * (4 - l) + 1) as usize).pow(2)).sum();
        assert_eq!(s.len(), expected);
    }

    #[test]
    fn cnr_examples() {
        let f = RandomField::new(8, Distribution::uniform01()).unwrap();
        let cube = cube1(&[0], 9);
        let inter = InteractionSpec::none();
        let disc = DiscretizationSpec::lattice();
        let h = assemble_hamiltonian(&cube, &f, &inter, &disc).unwrap();
        let ev = crate::model::eigenvalues(&h).unwrap();
        let r = is_cnr(&cube, &f, &inter, &disc, ev[2], 1).unwrap();
        assert!(!r.cnr);
        // far below every sub-cube bottom (all >= 0)
        let r = is_cnr(&cube, &f, &inter, &disc, -1.0, 1).unwrap();
        assert!(r.cnr);
        assert_eq!(r.min_half_side, 5);
        // stride inclusion on a sweep of energies
        let s1 = SubcubeSpectra::compute(&cube, &f, &inter, &disc, 1).unwrap();
        let s2 = SubcubeSpectra::compute(&cube, &f, &inter, &disc, 2).unwrap();
        for i in 0..400 {
            let e = -0.2 + i as f64 * 0.01;
            if s1.is_cnr(e) {
                assert!(s2.is_cnr(e));
            }
        }
    }

    #[test]
    fn gamma_examples_through_probe() {
        let g = gamma_of(0.1, 256.0, 2, 2).unwrap();
        assert!((g - 0.15).abs() < 1e-15);
        let g = gamma_of(0.1, 256.0, 1, 2).unwrap();
        assert!((g - 0.225).abs() < 1e-15);
    }

    #[test]
    fn far_below_spectrum_becomes_nonsingular() {
        // V = 0 box, E one unit below the bottom: block norm decays with L
        let m = 0.2;
        let mut first_ns = None;
        for l in 3..30 {
            let op = CubeOperator::new(
                &cube1(&[0], l),
                &ConstantField(0.0),
                &InteractionSpec::none(),
                &Default::default(),
            )
            .unwrap();
            let e = op.eig.bottom() - 1.0;
            let p = is_singular(&op, e, m, 1, 1);
            if !p.singular && first_ns.is_none() {
                first_ns = Some(l);
            }
            if let Some(l0) = first_ns {
                assert!(!p.singular, "singular again at L = {l} after {l0}");
            }
        }
        assert!(first_ns.is_some());
    }

    #[test]
    fn ct_rhs_examples() {
        let v = combes_thomas_rhs(1.0, 0.5, 1, 0.0).unwrap();
        assert!((v - 4.0 / 3.0 * 0.5f64.exp()).abs() < 1e-14);
        assert!((v - 2.198_295_03).abs() < 1e-8);
        let w = combes_thomas_rhs(1.0, 0.5, 1, 1.0).unwrap();
        assert!((w / v - (-0.5f64).exp()).abs() < 1e-14);
        let z = combes_thomas_rhs(4.0, 0.5, 1, 10.0).unwrap();
        assert!((z - (1.0f64 / 3.0) * (1.0f64 - 10.0).exp()).abs() < 1e-18);
        assert!((z - 4.1136e-5).abs() < 1e-9);
        assert!(combes_thomas_rhs(1.0, 1.0, 1, 0.0).is_err());
        assert!(combes_thomas_rhs(0.0, 0.5, 1, 0.0).is_err());
    }

    #[test]
    fn ct_free_laplacian_side_64() {
        let cube = cube1(&[0], 32);
        let h = assemble_hamiltonian(
            &cube,
            &ConstantField(0.0),
            &InteractionSpec::none(),
            &Default::default(),
        )
        .unwrap();
        // side 65 here; the bound is uniform in the box size
        let pairs: Vec<(Vec<i64>, Vec<i64>)> = (-32..=32)
            .step_by(3)
            .flat_map(|x| (-32..=32).step_by(5).map(move |y| (vec![x], vec![y])))
            .collect();
        let e = -1.0;
        let r = verify_combes_thomas(&h, e, 0.5, &pairs).unwrap();
        assert!(r.pass && r.max_ratio < 1.0, "{r:?}");
        assert!(verify_combes_thomas(&h, 5.0, 0.5, &pairs).is_err());
    }

    #[test]
    fn ct_diagonal_hamiltonian() {
        // no hopping is emulated by a one-site cube per pair: trivially |G(x,x)| = 1/eta
        let h = assemble_hamiltonian(
            &MultiCube::new(ParticleConfiguration::from_1d(&[0]), 1).unwrap(),
            &ConstantField(10.0),
            &InteractionSpec::none(),
            &Default::default(),
        )
        .unwrap();
        let r = verify_combes_thomas(&h, 0.0, 0.99, &[(vec![0], vec![0])]).unwrap();
        assert!(r.pass);
    }

    #[test]
    fn gri_nested_1d() {
        let f = RandomField::new(21, Distribution::uniform01()).unwrap();
        let inter = InteractionSpec::none();
        let outer = CubeOperator::new(&cube1(&[0], 12), &f, &inter, &Default::default()).unwrap();
        let inner = CubeOperator::new(&cube1(&[3], 4), &f, &inter, &Default::default()).unwrap();
        let e = 0.5 * (outer.eig.values[1] + outer.eig.values[2]);
        let a = vec![vec![2], vec![3], vec![4]];
        let b: Vec<Vec<i64>> = (-12..=-2).map(|x| vec![x]).collect();
        let r = verify_gri(&outer, &inner, e, &a, &b).unwrap();
        assert!(r.ratio.is_finite() && r.ratio > 0.0);
        let empty = verify_gri(&outer, &inner, e, &[], &b).unwrap();
        assert_eq!(empty.lhs, 0.0);
        let ein = inner.eig.values[0];
        assert!(matches!(
            verify_gri(&outer, &inner, ein, &a, &b),
            Err(SpectralError::ResolventUndefined { .. })
        ));
        assert!(verify_gri(&outer, &inner, e, &[vec![0]], &b).is_err());
    }

    #[test]
    fn edi_examples() {
        let f = RandomField::new(5, Distribution::uniform01()).unwrap();
        let inter = InteractionSpec::none();
        let bx = CubeOperator::new(&cube1(&[0], 15), &f, &inter, &Default::default()).unwrap();
        let psi: Vec<f64> = (0..bx.h.dim()).map(|i| bx.eig.vectors[(i, 0)]).collect();
        let e = bx.eig.values[0];
        let sub = CubeOperator::new(&cube1(&[2], 6), &f, &inter, &Default::default()).unwrap();
        let r = verify_edi(&bx.h, e, &psi, &sub, None).unwrap();
        assert!(r.ratio.is_finite());
        // psi vanishing on the sub-cube
        let zeroed: Vec<f64> = (0..bx.h.dim())
            .map(|i| if sub.cube.contains(&bx.h.cell_of(i)) { 0.0 } else { psi[i] })
            .collect();
        let r = verify_edi(&bx.h, e, &zeroed, &sub, Some(1.0)).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert_eq!(r.pass, Some(true));
        // sub-cube equal to the box: E is an eigenvalue of the sub-cube
        assert!(matches!(
            verify_edi(&bx.h, e, &psi, &bx, None),
            Err(SpectralError::ResolventUndefined { .. })
        ));
    }

    #[test]
    fn energy_window_points() {
        let mut w = EnergyWindow::new(0.0, 1.0, 0.25).unwrap();
        w.extra_points = vec![0.3, 2.0, 0.5];
        assert_eq!(w.points(), vec![0.0, 0.25, 0.3, 0.5, 0.75, 1.0]);
        assert!(EnergyWindow::new(1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn evaluator_matches_direct() {
        let op = random_op(13, &[0, 1], 4, 1.0);
        let ev = op.evaluator();
        for e in [-0.7, 0.05, 0.9, 2.3] {
            let a = ev.norm(e).unwrap();
            let b = op.out_int_norm(e).unwrap();
            assert!((a - b).abs() < 1e-12 * b.max(1e-300));
            assert!(ev.upper_bound(e) >= a * (1.0 - 1e-12));
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn block_norm_monotone_in_blocks(seed in any::<u64>(), e in -1.0f64..3.0, mask_a in 1u32..(1 << 13), mask_b in 1u32..(1 << 13), extra in 1u32..(1 << 13)) {
                let op = random_op(seed, &[0], 6, 1.0);
                prop_assume!(op.eig.dist(e) > 1e-6);
                let pick = |m: u32| -> Vec<usize> { (0..13).filter(|i| m >> i & 1 == 1).collect() };
                let (a, b) = (pick(mask_a), pick(mask_b));
                let (a2, b2) = (pick(mask_a | extra), pick(mask_b | extra));
                let small = op.eig.green_block_norm(e, &a, &b).unwrap();
                let big = op.eig.green_block_norm(e, &a2, &b2).unwrap();
                prop_assert!(small <= big * (1.0 + 1e-10) + 1e-14);
            }

            #[test]
            fn resonance_threshold_monotone(l in 1i64..500, dist in 0.0f64..1.0) {
                prop_assert!(resonance_threshold(l + 1) < resonance_threshold(l));
                let spec = [0.0];
                if !is_resonant(&spec, dist, l) {
                    prop_assert!(!is_resonant(&spec, dist, l + 7));
                }
            }

            #[test]
            fn probe_invariant(seed in any::<u64>(), e in -1.0f64..3.0, m in 0.01f64..1.0) {
                let op = random_op(seed, &[0], 7, 3.0);
                let p = is_singular(&op, e, m, 1, 1);
                prop_assert!(p.block_norm >= 0.0);
                if p.singular {
                    prop_assert!(p.resonant || p.block_norm > p.threshold);
                }
            }

            #[test]
            fn finer_stride_never_flips_to_cnr(seed in any::<u64>(), e in -0.1f64..3.0) {
                let f = RandomField::new(seed, Distribution::uniform01()).unwrap();
                let cube = cube1(&[0], 9);
                let inter = InteractionSpec::none();
                let s1 = is_cnr(&cube, &f, &inter, &Default::default(), e, 1).unwrap();
                let s3 = is_cnr(&cube, &f, &inter, &Default::default(), e, 3).unwrap();
                prop_assert!(!s1.cnr || s3.cnr);
            }
        }
    }
}
