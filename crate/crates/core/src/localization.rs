//! Observables of localization on finite boxes: ensemble spectrum bottoms,
//! eigenfunction decay profiles and bounded dynamical moments.

use std::collections::{BTreeMap, HashMap};

use faer::{Mat, Side};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::linf;
use crate::model::{assemble_on_region, spectrum_bottom, ModelError, PotentialField, SiteRegion};
use crate::msa::{gamma_of, ModelSetup, MsaError};
use crate::rng::split_seed;
use crate::spectral::{Eigensystem, SpectralError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LocalizationError {
    #[error("no eigenvalues in [{0}, {1}]")]
    EmptyWindow(f64, f64),
    #[error("box too small: fit range spans {0} distances, need 3")]
    BoxTooSmall(usize),
    #[error("initial support is not inside the box")]
    SupportOutsideBox,
    #[error("parameter out of range: {0}")]
    Domain(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Msa(#[from] MsaError),
}

/// Box `[-half, half - 1]^{nd}` when `even`, else `[-half, half]^{nd}`.
pub fn centered_box(n: usize, d: usize, half: i64, even: bool) -> SiteRegion {
    let hi = if even { half - 1 } else { half };
    SiteRegion {
        d,
        lo: vec![-half; n * d],
        hi: vec![hi; n * d],
    }
}

// ---------------------------------------------------------------------------
// spectrum bottom

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BottomRow {
    pub l: i64,
    pub min: f64,
    pub median: f64,
    pub bottoms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BottomTable {
    pub n: usize,
    pub d: usize,
    pub rows: Vec<BottomRow>,
    pub medians_nonincreasing: bool,
    pub all_nonnegative: bool,
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let k = s.len();
    if k == 0 {
        return f64::NAN;
    }
    if k % 2 == 1 {
        s[k / 2]
    } else {
        0.5 * (s[k / 2 - 1] + s[k / 2])
    }
}

/// Bottom of the spectrum on `C_L(0)` for each `L`, trial `t` using the same
/// field at every `L`.
pub fn bottom_convergence(
    n: usize,
    ls: &[i64],
    setup: &ModelSetup,
    trials: u64,
    seed: u64,
) -> Result<BottomTable, LocalizationError> {
    if ls.is_empty() || ls.windows(2).any(|w| w[0] >= w[1]) || ls[0] < 1 {
        return Err(LocalizationError::Domain(format!("L-list {ls:?} must increase from 1")));
    }
    if trials == 0 || n == 0 {
        return Err(LocalizationError::Domain("need n >= 1 and trials >= 1".into()));
    }
    let mut rows = Vec::new();
    for &l in ls {
        let region = centered_box(n, setup.d, l, false);
        let bottoms = (0..trials)
            .into_par_iter()
            .map(|t| -> Result<f64, LocalizationError> {
                let field = setup.field(split_seed(seed, "bottom", t))?;
                let h = assemble_on_region(&region, &field, &setup.interaction, &setup.disc)?;
                Ok(spectrum_bottom(&h)?)
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(BottomRow {
            l,
            min: bottoms.iter().copied().fold(f64::INFINITY, f64::min),
            median: median(&bottoms),
            bottoms,
        });
    }
    let medians_nonincreasing = rows.windows(2).all(|w| w[1].median <= w[0].median);
    let all_nonnegative = rows.iter().all(|r| r.min >= -1e-12);
    if !medians_nonincreasing {
        log::warn!("ensemble median of the spectrum bottom increased with L");
    }
    Ok(BottomTable {
        n,
        d: setup.d,
        rows,
        medians_nonincreasing,
        all_nonnegative,
    })
}

/// Lowest Dirichlet eigenvalue of `-Δ_h` on `cells` grid points per axis in `D` axes.
pub fn free_box_bottom(cells: usize, h: f64, dim: usize) -> f64 {
    let s = (std::f64::consts::PI / (2.0 * (cells as f64 + 1.0))).sin();
    dim as f64 * 4.0 * s * s / (h * h)
}

// ---------------------------------------------------------------------------
// decay profiles

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayOptions {
    /// Samples below `floor * max` are numerical noise and end the fit range.
    pub floor: f64,
    /// Cells this close to the box boundary are left out.
    pub boundary_cells: i64,
    pub flag_fraction: f64,
    pub m: f64,
    pub big_n: usize,
}

impl Default for DecayOptions {
    fn default() -> Self {
        Self {
            floor: 1e-11,
            boundary_cells: 2,
            flag_fraction: 0.1,
            m: 0.05,
            big_n: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayProfile {
    pub eigen_index: usize,
    pub energy: f64,
    pub center: Vec<i64>,
    /// `(r, max_{|x - x0| = r} ||1_{C_1(x)} psi||)`.
    pub samples: Vec<(i64, f64)>,
    pub fitted_rate: f64,
    pub rate_stderr: f64,
    pub fit_range: (i64, i64),
    /// RMS residual of the log-linear fit.
    pub residual: f64,
    /// Rate below `flag_fraction * gamma(m, L_eff, N)`.
    pub flagged: bool,
}

/// Least-squares slope, its standard error and the RMS residual.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let ss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - my - slope * (x - mx);
            r * r
        })
        .sum();
    let se = if xs.len() > 2 { (ss / (k - 2.0) / sxx).sqrt() } else { 0.0 };
    (slope, se, (ss / k).sqrt())
}

/// Per-cell weights `||1_{cell} psi||^2` keyed by cell.
fn cell_weights(cells: &[Vec<i64>], psi: &[f64]) -> HashMap<Vec<i64>, f64> {
    let mut w: HashMap<Vec<i64>, f64> = HashMap::new();
    for (c, v) in cells.iter().zip(psi) {
        *w.entry(c.clone()).or_default() += v * v;
    }
    w
}

fn c1_norm(w: &HashMap<Vec<i64>, f64>, x: &[i64]) -> f64 {
    let dim = x.len();
    let mut off = vec![-1i64; dim];
    let mut s = 0.0;
    loop {
        let y: Vec<i64> = x.iter().zip(&off).map(|(a, b)| a + b).collect();
        s += w.get(&y).copied().unwrap_or(0.0);
        let mut a = 0;
        while a < dim && off[a] == 1 {
            off[a] = -1;
            a += 1;
        }
        if a == dim {
            return s.sqrt();
        }
        off[a] += 1;
    }
}

/// Profile of one normalised vector over `cells` (one cell per basis index).
pub fn profile_vector(
    region: &SiteRegion,
    cells: &[Vec<i64>],
    psi: &[f64],
    opts: &DecayOptions,
) -> Result<(Vec<i64>, Vec<(i64, f64)>, (f64, f64, f64), (i64, i64)), LocalizationError> {
    let w = cell_weights(cells, psi);
    // lexicographic order breaks ties
    let ordered: BTreeMap<&Vec<i64>, f64> = w.iter().map(|(k, v)| (k, *v)).collect();
    let mut center = Vec::new();
    let mut best = f64::NEG_INFINITY;
    for (c, v) in &ordered {
        if *v > best {
            best = *v;
            center = (*c).clone();
        }
    }
    let bc = opts.boundary_cells;
    let interior = |c: &[i64]| {
        c.iter()
            .zip(region.lo.iter().zip(&region.hi))
            .all(|(x, (lo, hi))| x - lo >= bc && hi - x >= bc)
    };
    let mut by_r: BTreeMap<i64, f64> = BTreeMap::new();
    for c in ordered.keys() {
        if !interior(c) {
            continue;
        }
        let r = linf(c, &center);
        let v = c1_norm(&w, c);
        let e = by_r.entry(r).or_insert(0.0);
        *e = e.max(v);
    }
    let samples: Vec<(i64, f64)> = by_r.into_iter().collect();
    let peak = samples.iter().map(|s| s.1).fold(0.0, f64::max);
    let mut fit: Vec<(i64, f64)> = Vec::new();
    for &(r, v) in samples.iter().filter(|s| s.0 >= 1) {
        if v < opts.floor * peak && fit.len() >= 3 {
            break;
        }
        if v > 0.0 {
            fit.push((r, v));
        }
    }
    if fit.len() < 3 {
        return Err(LocalizationError::BoxTooSmall(fit.len()));
    }
    let xs: Vec<f64> = fit.iter().map(|s| s.0 as f64).collect();
    let ys: Vec<f64> = fit.iter().map(|s| s.1.ln()).collect();
    let range = (fit[0].0, fit.last().unwrap().0);
    Ok((center, samples, linear_fit(&xs, &ys), range))
}

/// Decay profiles of up to `count` lowest eigenpairs with energy in `window`.
pub fn eigenfunction_decay_profile(
    region: &SiteRegion,
    field: &dyn PotentialField,
    setup: &ModelSetup,
    window: (f64, f64),
    count: usize,
    opts: &DecayOptions,
) -> Result<Vec<DecayProfile>, LocalizationError> {
    let h = assemble_on_region(region, field, &setup.interaction, &setup.disc)?;
    let eig = Eigensystem::new(&h)?;
    let picked: Vec<usize> = (0..eig.dim())
        .filter(|&j| window.0 <= eig.values[j] && eig.values[j] <= window.1)
        .take(count)
        .collect();
    if picked.is_empty() {
        return Err(LocalizationError::EmptyWindow(window.0, window.1));
    }
    let cells: Vec<Vec<i64>> = (0..h.dim()).map(|i| h.cell_of(i)).collect();
    let l_eff = region
        .lo
        .iter()
        .zip(&region.hi)
        .map(|(a, b)| (b - a) / 2)
        .min()
        .unwrap()
        .max(1);
    let gamma_ref = gamma_of(opts.m, l_eff as f64, 1, opts.big_n.max(1))?;
    picked
        .par_iter()
        .map(|&j| {
            let psi: Vec<f64> = (0..h.dim()).map(|i| eig.vectors[(i, j)]).collect();
            let (center, samples, (slope, se, residual), fit_range) =
                profile_vector(region, &cells, &psi, opts)?;
            let fitted_rate = -slope;
            Ok(DecayProfile {
                eigen_index: j,
                energy: eig.values[j],
                center,
                samples,
                fitted_rate,
                rate_stderr: se,
                fit_range,
                residual,
                flagged: fitted_rate < opts.flag_fraction * gamma_ref,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// dynamical moments

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicalMomentReport {
    pub s: f64,
    pub window: (f64, f64),
    pub support: SiteRegion,
    pub states_in_window: usize,
    pub time_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub max_over_grid: f64,
    pub stationary_upper_bound: f64,
}

/// `count` log-spaced times in `[t_min, t_max]`.
pub fn log_time_grid(count: usize, t_min: f64, t_max: f64) -> Vec<f64> {
    if count == 1 {
        return vec![t_min];
    }
    let (a, b) = (t_min.ln(), t_max.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

pub fn default_time_grid() -> Vec<f64> {
    log_time_grid(64, 0.1, 1e3)
}

/// Precomputed pieces of `|X|^{s/2} e^{-itH} P_I 1_K`.
pub struct MomentOperator {
    pub energies: Vec<f64>,
    /// `Q_W^T |X|^s Q_W` over the window states.
    pub gram: Mat<f64>,
    /// Rows of `Q_W` on the support `K`.
    pub support_rows: Mat<f64>,
    pub window_vectors: Mat<f64>,
    pub weights: Vec<f64>,
    pub k_indices: Vec<usize>,
}

impl MomentOperator {
    pub fn new(
        eig: &Eigensystem,
        cells: &[Vec<i64>],
        window: (f64, f64),
        k_indices: Vec<usize>,
        s: f64,
    ) -> Self {
        let idx: Vec<usize> = (0..eig.dim())
            .filter(|&j| window.0 <= eig.values[j] && eig.values[j] <= window.1)
            .collect();
        let dim = eig.dim();
        let w = idx.len();
        let weights: Vec<f64> = cells
            .iter()
            .map(|c| {
                let r = c.iter().map(|v| v.abs()).max().unwrap_or(0) as f64;
                if s == 0.0 { 1.0 } else { r.powf(s) }
            })
            .collect();
        let qw = Mat::from_fn(dim, w, |i, a| eig.vectors[(i, idx[a])]);
        let xq = Mat::from_fn(dim, w, |i, a| weights[i] * qw[(i, a)]);
        let gram = qw.transpose() * &xq;
        let support_rows = Mat::from_fn(k_indices.len(), w, |r, a| qw[(k_indices[r], a)]);
        Self {
            energies: idx.iter().map(|&j| eig.values[j]).collect(),
            gram,
            support_rows,
            window_vectors: qw,
            weights,
            k_indices,
        }
    }

    pub fn states(&self) -> usize {
        self.energies.len()
    }

    /// `|| |X|^{s/2} e^{-itH} P_I 1_K ||`.
    pub fn norm_at(&self, t: f64) -> f64 {
        let w = self.states();
        let kk = self.k_indices.len();
        if w == 0 || kk == 0 {
            return 0.0;
        }
        // M^* M = Q_K (G o e^{i(E_a - E_b)t}) Q_K^T, embedded as a real symmetric matrix
        let re = Mat::from_fn(w, w, |a, b| {
            self.gram[(a, b)] * ((self.energies[a] - self.energies[b]) * t).cos()
        });
        let im = Mat::from_fn(w, w, |a, b| {
            self.gram[(a, b)] * ((self.energies[a] - self.energies[b]) * t).sin()
        });
        let q = &self.support_rows;
        let r = q * &re * q.transpose();
        let i = q * &im * q.transpose();
        let big = Mat::from_fn(2 * kk, 2 * kk, |p, c| {
            let (pb, pr) = (p / kk, p % kk);
            let (cb, cr) = (c / kk, c % kk);
            match (pb, cb) {
                (0, 0) | (1, 1) => r[(pr, cr)],
                (0, 1) => -i[(pr, cr)],
                _ => i[(pr, cr)],
            }
        });
        let top = big
            .self_adjoint_eigenvalues(Side::Lower)
            .expect("symmetric eigensolver")
            .last()
            .copied()
            .unwrap_or(0.0);
        top.max(0.0).sqrt()
    }

    /// `sum_j || |X|^{s/2} Pi_j 1_K ||`.
    pub fn stationary_bound(&self) -> f64 {
        (0..self.states())
            .map(|a| {
                let on_k: f64 = (0..self.k_indices.len())
                    .map(|r| self.support_rows[(r, a)].powi(2))
                    .sum();
                self.gram[(a, a)].max(0.0).sqrt() * on_k.sqrt()
            })
            .sum()
    }

    /// `e^{-itH} P_I 1_K phi` for `phi` supported on `K`, as (real, imaginary) parts.
    pub fn evolve(&self, phi: &[f64], t: f64) -> (Vec<f64>, Vec<f64>) {
        let w = self.states();
        let coef: Vec<f64> = (0..w)
            .map(|a| (0..phi.len()).map(|r| self.support_rows[(r, a)] * phi[r]).sum())
            .collect();
        let dim = self.window_vectors.nrows();
        let mut re = vec![0.0; dim];
        let mut im = vec![0.0; dim];
        for a in 0..w {
            let (c, s) = ((self.energies[a] * t).cos(), (self.energies[a] * t).sin());
            for i in 0..dim {
                let v = self.window_vectors[(i, a)] * coef[a];
                re[i] += c * v;
                im[i] -= s * v;
            }
        }
        (re, im)
    }
}

/// Moment `|| |X|^{s/2} e^{-itH} P_I 1_K ||` over `time_grid` for the box
/// Hamiltonian, with the time-independent bound.
pub fn dynamical_moment(
    region: &SiteRegion,
    field: &dyn PotentialField,
    setup: &ModelSetup,
    window: (f64, f64),
    support: &SiteRegion,
    s: f64,
    time_grid: &[f64],
) -> Result<DynamicalMomentReport, LocalizationError> {
    if !(s >= 0.0) {
        return Err(LocalizationError::Domain(format!("s = {s} must be nonnegative")));
    }
    let inside = support.lo.len() == region.lo.len()
        && region.contains(&support.lo)
        && region.contains(&support.hi);
    if !inside {
        return Err(LocalizationError::SupportOutsideBox);
    }
    let h = assemble_on_region(region, field, &setup.interaction, &setup.disc)?;
    let eig = Eigensystem::new(&h)?;
    let cells: Vec<Vec<i64>> = (0..h.dim()).map(|i| h.cell_of(i)).collect();
    let k_indices: Vec<usize> = (0..h.dim()).filter(|&i| support.contains(&cells[i])).collect();
    let op = MomentOperator::new(&eig, &cells, window, k_indices, s);
    let values: Vec<f64> = time_grid.par_iter().map(|&t| op.norm_at(t)).collect();
    Ok(DynamicalMomentReport {
        s,
        window,
        support: support.clone(),
        states_in_window: op.states(),
        time_grid: time_grid.to_vec(),
        max_over_grid: values.iter().copied().fold(0.0, f64::max),
        values,
        stationary_upper_bound: op.stationary_bound(),
    })
}
