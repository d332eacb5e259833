//! One function per experiment kind. Each returns its tables, the per-trial
//! seed streams it consumed and any invariant failures.

use std::collections::BTreeMap;

use msa_core::geometry::checks::{run_suite, SuiteConfig};
use msa_core::geometry::{MultiCube, ParticleConfiguration};
use msa_core::localization::{
    centered_box, dynamical_moment, eigenfunction_decay_profile, log_time_grid, DecayOptions,
};
use msa_core::model::{assemble_hamiltonian, PotentialField, RandomField, SiteRegion};
use msa_core::msa::{
    fi_configuration, initial_scale_probability, induction_orchestrator, wegner_cnr_statistic,
    MassParameters, ModelSetup, MsaError, OrchestratorConfig, ScaleSchedule,
};
use msa_core::rng::{counter_hash, split_seed, unit_interval};
use msa_core::spectral::{default_stride, verify_combes_thomas, verify_edi, verify_gri, CubeOperator, Eigensystem};
use msa_core::stats::MonteCarloReport;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::output::{num, Table};
use crate::LabError;

#[derive(Debug, Default)]
pub struct ExperimentOutput {
    pub tables: Vec<Table>,
    pub seeds: BTreeMap<String, Vec<u64>>,
    pub json: Vec<(String, serde_json::Value)>,
    pub failures: Vec<String>,
}

impl ExperimentOutput {
    fn seeds(&mut self, master: u64, label: &str, trials: u64) {
        self.seeds
            .insert(label.into(), (0..trials).map(|t| split_seed(master, label, t)).collect());
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

pub fn dispatch(cfg: &ExperimentConfig) -> Result<ExperimentOutput, LabError> {
    match cfg.experiment {
        ExperimentKind::GeometrySelftest => geometry_selftest(cfg),
        ExperimentKind::Wegner => wegner(cfg),
        ExperimentKind::CtCheck => ct_check(cfg),
        ExperimentKind::InitialScale => initial_scale(cfg),
        ExperimentKind::MsaRun => msa_run(cfg),
        ExperimentKind::DecayProfile => decay_profile(cfg),
        ExperimentKind::Dynamical => dynamical(cfg),
    }
}

fn mc_cells(r: &MonteCarloReport) -> Vec<String> {
    vec![r.events.to_string(), num(r.estimate), num(r.ci_lo), num(r.ci_hi)]
}

fn e_star(cfg: &ExperimentConfig) -> f64 {
    0.5 / (cfg.l0 as f64).sqrt()
}

fn mass(cfg: &ExperimentConfig) -> Result<MassParameters, LabError> {
    Ok(MassParameters::new(cfg.gamma_base, cfg.big_n, cfg.l0 as f64)?)
}

// ---------------------------------------------------------------------------

pub fn geometry_suite(cfg: &ExperimentConfig) -> SuiteConfig {
    SuiteConfig {
        ns: (1..=cfg.n.max(1)).collect(),
        ds: (1..=cfg.d).collect(),
        ls: cfg.scales(),
        r0s: (0..=cfg.r0.max(0)).collect(),
        budget: cfg.geometry_budget,
        counting_sets: 40,
        seed: cfg.master_seed,
    }
}

fn geometry_selftest(cfg: &ExperimentConfig) -> Result<ExperimentOutput, LabError> {
    let checks = run_suite(&geometry_suite(cfg));
    let mut t = Table::new(
        "geometry",
        &["lemma", "n", "d", "L", "r0", "mode", "checked", "nonvacuous", "counterexamples", "first_counterexample"],
    );
    let mut out = ExperimentOutput::default();
    for c in &checks {
        t.push(vec![
            c.lemma.name().into(),
            c.n.to_string(),
            c.d.to_string(),
            c.l.to_string(),
            c.r0.map(|r| r.to_string()).unwrap_or_default(),
            c.mode.as_str().into(),
            c.checked.to_string(),
            c.nonvacuous.to_string(),
            c.counterexamples.to_string(),
            c.first_counterexample
                .as_ref()
                .map(|v| format!("{v:?}"))
                .unwrap_or_default(),
        ]);
        if c.counterexamples > 0 {
            out.failures.push(format!(
                "{} n={} d={} L={} r0={:?}: {} counterexamples",
                c.lemma.name(),
                c.n,
                c.d,
                c.l,
                c.r0,
                c.counterexamples
            ));
        }
    }
    out.tables.push(t);
    Ok(out)
}

// ---------------------------------------------------------------------------

fn wegner(cfg: &ExperimentConfig) -> Result<ExperimentOutput, LabError> {
    let setup = cfg.setup()?;
    let lo = cfg.e_min.unwrap_or(0.0);
    let hi = cfg.e_max.unwrap_or(e_star(cfg)).max(lo);
    let e = cfg.energy.unwrap_or(0.5 * (lo + hi));
    let mut out = ExperimentOutput::default();
    out.seeds(cfg.master_seed, "wegner", cfg.trials);
    let mut t = Table::new(
        "wegner",
        &[
            "n", "L", "stride", "E", "window_lo", "window_hi", "trials",
            "single", "single_est", "single_lo", "single_hi",
            "pair", "pair_est", "pair_lo", "pair_hi",
            "single_scan", "single_scan_est", "single_scan_lo", "single_scan_hi",
            "pair_scan", "pair_scan_est", "pair_scan_lo", "pair_scan_hi",
        ],
    );
    let mut prev: Option<u64> = None;
    for l in cfg.scales() {
        let stride = cfg.stride.unwrap_or_else(|| default_stride(l));
        let r = wegner_cnr_statistic(cfg.n, l, &setup, e, (lo, hi), stride, cfg.trials, cfg.master_seed, "wegner")?;
        let mut row = vec![
            cfg.n.to_string(),
            l.to_string(),
            stride.to_string(),
            num(e),
            num(lo),
            num(hi),
            cfg.trials.to_string(),
        ];
        for m in [&r.single, &r.pair, &r.single_scan, &r.pair_scan] {
            row.extend(mc_cells(m));
        }
        t.push(row);
        if r.pair.events > r.single.events || r.pair_scan.events > r.single_scan.events {
            out.failures.push(format!("L={l}: pair frequency exceeds single frequency"));
        }
        if let Some(p) = prev {
            if r.single.events > p {
                log::warn!("wegner: not-CNR count rose from {p} to {} at L={l}", r.single.events);
            }
        }
        prev = Some(r.single.events);
    }
    out.tables.push(t);
    Ok(out)
}

// ---------------------------------------------------------------------------

pub const CT_GAMMAS: [f64; 3] = [0.3, 0.5, 0.9];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CtInstance {
    pub index: u64,
    pub seed: u64,
    pub n: usize,
    pub l: i64,
    pub gamma: f64,
    pub eta: f64,
    pub dim: usize,
    pub pairs: usize,
    pub max_ratio: f64,
    pub pass: bool,
}

/// Combes-Thomas check on instance `i`: `n` cycles through `1..=n_max`, `L`
/// through `scales`, `gamma` through [`CT_GAMMAS`], and `eta = bottom - E`
/// is drawn from `[0.5, 2]`.
pub fn ct_instance(
    setup: &ModelSetup,
    n_max: usize,
    scales: &[i64],
    master: u64,
    i: u64,
    dim_cap: usize,
) -> Result<CtInstance, LabError> {
    let seed = split_seed(master, "ct-check", i);
    let n = 1 + (i as usize % n_max);
    let gamma = CT_GAMMAS[(i / n_max as u64) as usize % CT_GAMMAS.len()];
    let mut l = scales[(i as usize / (n_max * CT_GAMMAS.len())) % scales.len()];
    while setup.dim_estimate(n, l) > dim_cap as u128 && l > 1 {
        l -= 1;
    }
    let center = fi_configuration(n, setup.d);
    let cube = MultiCube::new(center, l).map_err(MsaError::from)?;
    let field = RandomField::new(seed, setup.distribution.clone()).map_err(MsaError::from)?;
    let h = assemble_hamiltonian(&cube, &field, &setup.interaction, &setup.disc).map_err(MsaError::from)?;
    let eig = Eigensystem::new(&h).map_err(MsaError::from)?;
    let eta = 0.5 + 1.5 * unit_interval(counter_hash(seed, &[0]));
    let e = eig.bottom() - eta;
    let cells: Vec<Vec<i64>> = (0..h.dim()).map(|k| h.cell_of(k)).collect();
    let mut cells_u = cells.clone();
    cells_u.sort();
    cells_u.dedup();
    // sources: the first and last cell, the centre and a few drawn cells
    let mut sources = vec![cells_u[0].clone(), cells_u[cells_u.len() - 1].clone(), cube.center().coords().to_vec()];
    for k in 1..=4 {
        let j = (counter_hash(seed, &[k]) % cells_u.len() as u64) as usize;
        sources.push(cells_u[j].clone());
    }
    let pairs: Vec<(Vec<i64>, Vec<i64>)> = sources
        .iter()
        .flat_map(|x| cells_u.iter().map(move |y| (x.clone(), y.clone())))
        .collect();
    let r = verify_combes_thomas(&h, e, gamma, &pairs).map_err(MsaError::from)?;
    Ok(CtInstance {
        index: i,
        seed,
        n,
        l,
        gamma,
        eta: r.eta,
        dim: h.dim(),
        pairs: r.pairs,
        max_ratio: r.max_ratio,
        pass: r.pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationInstance {
    pub index: u64,
    pub seed: u64,
    pub energy: f64,
    pub gri_ratio: f64,
    pub edi_ratio: f64,
}

/// GRI and EDI ratios on one instance: a one-particle box `C_12(0)`, the inner
/// cube `C_4(y)` at a drawn position, `E` drawn from the lower spectrum and
/// kept away from both spectra; EDI uses the box eigenpair nearest to `E`.
pub fn calibration_instance(setup: &ModelSetup, master: u64, i: u64) -> Result<CalibrationInstance, LabError> {
    let seed = split_seed(master, "calibration", i);
    let d = setup.d;
    let field = RandomField::new(seed, setup.distribution.clone()).map_err(MsaError::from)?;
    let big_l = 12;
    let l = 4;
    let outer_cube = MultiCube::new(ParticleConfiguration::new(d, vec![0; d]).map_err(MsaError::from)?, big_l)
        .map_err(MsaError::from)?;
    let pos = |k: i64| -> Vec<i64> {
        (0..d as i64)
            .map(|a| (counter_hash(seed, &[k, a]) % 9) as i64 - 4)
            .collect()
    };
    let y = pos(1);
    let inner_cube = MultiCube::new(ParticleConfiguration::new(d, y).map_err(MsaError::from)?, l).map_err(MsaError::from)?;
    let outer = CubeOperator::new(&outer_cube, &field, &setup.interaction, &setup.disc).map_err(MsaError::from)?;
    let inner = CubeOperator::new(&inner_cube, &field, &setup.interaction, &setup.disc).map_err(MsaError::from)?;
    let u = unit_interval(counter_hash(seed, &[2]));
    let mut e = outer.eig.bottom() - 0.5 + 3.0 * u;
    let gap = |e: f64| outer.eig.dist(e).min(inner.eig.dist(e));
    let mut tries = 0;
    while gap(e) < 1e-3 && tries < 100 {
        e += 2e-3;
        tries += 1;
    }
    let a: Vec<Vec<i64>> = outer
        .h
        .indices_where(|c| inner_cube.in_int(c))
        .into_iter()
        .map(|k| outer.h.cell_of(k))
        .collect();
    let b: Vec<Vec<i64>> = outer
        .h
        .indices_where(|c| outer_cube.in_out(c) && !inner_cube.contains(c))
        .into_iter()
        .map(|k| outer.h.cell_of(k))
        .collect();
    let gri = verify_gri(&outer, &inner, e, &dedup(a), &dedup(b)).map_err(MsaError::from)?;
    let j = (0..outer.eig.dim())
        .min_by(|&p, &q| (outer.eig.values[p] - e).abs().total_cmp(&(outer.eig.values[q] - e).abs()))
        .unwrap();
    let psi: Vec<f64> = (0..outer.h.dim()).map(|k| outer.eig.vectors[(k, j)]).collect();
    let ej = outer.eig.values[j];
    let mut edi_ratio = f64::NAN;
    if inner.eig.dist(ej) > 1e-8 {
        edi_ratio = verify_edi(&outer.h, ej, &psi, &inner, None).map_err(MsaError::from)?.ratio;
    }
    Ok(CalibrationInstance {
        index: i,
        seed,
        energy: e,
        gri_ratio: gri.ratio,
        edi_ratio,
    })
}

fn dedup(mut v: Vec<Vec<i64>>) -> Vec<Vec<i64>> {
    v.sort();
    v.dedup();
    v
}

/// Max of the finite values.
pub fn calibrated_max(v: impl Iterator<Item = f64>) -> f64 {
    v.filter(|x| x.is_finite()).fold(0.0, f64::max)
}

fn ct_check(cfg: &ExperimentConfig) -> Result<ExperimentOutput, LabError> {
    let setup = cfg.setup()?;
    let scales = cfg.scales();
    let mut out = ExperimentOutput::default();
    out.seeds(cfg.master_seed, "ct-check", cfg.trials);
    out.seeds(cfg.master_seed, "calibration", cfg.trials);
    let inst = (0..cfg.trials)
        .into_par_iter()
        .map(|i| ct_instance(&setup, cfg.n, &scales, cfg.master_seed, i, cfg.dim_cap as usize))
        .collect::<Result<Vec<_>, _>>()?;
    let mut t = Table::new("ct", &["index", "seed", "n", "L", "gamma", "eta", "dim", "pairs", "max_ratio", "pass"]);
    for c in &inst {
        t.push(vec![
            c.index.to_string(),
            c.seed.to_string(),
            c.n.to_string(),
            c.l.to_string(),
            num(c.gamma),
            num(c.eta),
            c.dim.to_string(),
            c.pairs.to_string(),
            num(c.max_ratio),
            c.pass.to_string(),
        ]);
        if !c.pass {
            out.failures.push(format!("ct instance {}: ratio {}", c.index, c.max_ratio));
        }
    }
    out.tables.push(t);
    let cal = (0..cfg.trials)
        .into_par_iter()
        .map(|i| calibration_instance(&setup, cfg.master_seed, i))
        .collect::<Result<Vec<_>, _>>()?;
    let mut t = Table::new("calibration", &["index", "seed", "energy", "gri_ratio", "edi_ratio"]);
    for c in &cal {
        t.push(vec![c.index.to_string(), c.seed.to_string(), num(c.energy), num(c.gri_ratio), num(c.edi_ratio)]);
    }
    out.tables.push(t);
    let mut s = Table::new("calibration_summary", &["constant", "instances", "max"]);
    s.push(vec!["c_geom".into(), cal.len().to_string(), num(calibrated_max(cal.iter().map(|c| c.gri_ratio)))]);
    s.push(vec!["c_edi".into(), cal.len().to_string(), num(calibrated_max(cal.iter().map(|c| c.edi_ratio)))]);
    out.tables.push(s);
    Ok(out)
}

// ---------------------------------------------------------------------------

fn initial_scale(cfg: &ExperimentConfig) -> Result<ExperimentOutput, LabError> {
    let setup = cfg.setup()?;
    let m = mass(cfg)?.m;
    let es = cfg.energy.unwrap_or(e_star(cfg));
    let center = fi_configuration(cfg.n, cfg.d);
    let mut out = ExperimentOutput::default();
    out.seeds(cfg.master_seed, "initial-scale", cfg.trials);
    let mut t = Table::new(
        "initial_scale",
        &[
            "n", "L", "E_star", "m", "trials",
            "bottom", "bottom_est", "bottom_lo", "bottom_hi",
            "singular", "singular_est", "singular_lo", "singular_hi",
            "exceptions",
        ],
    );
    for l in cfg.scales() {
        let r = initial_scale_probability(&center, l, &setup, m, es, cfg.trials, cfg.master_seed, "initial-scale")?;
        let mut row = vec![cfg.n.to_string(), l.to_string(), num(es), num(m), cfg.trials.to_string()];
        row.extend(mc_cells(&r.bottom));
        row.extend(mc_cells(&r.singular));
        row.push(r.exceptions.to_string());
        t.push(row);
        if r.exceptions * 100 >= cfg.trials {
            out.failures.push(format!("L={l}: {} scan-margin exceptions in {} trials", r.exceptions, cfg.trials));
        }
    }
    out.tables.push(t);
    Ok(out)
}

// ---------------------------------------------------------------------------

fn msa_run(cfg: &ExperimentConfig) -> Result<ExperimentOutput, LabError> {
    let setup = cfg.setup()?;
    let schedule = ScaleSchedule::new(cfg.l0, cfg.k_max, cfg.p, cfg.big_n, cfg.d, cfg.strict)
        .map_err(|e| LabError::Validation(vec![format!("schedule: {e}")]))?;
    let masses = mass(cfg)?;
    let oc = OrchestratorConfig {
        schedule: schedule.clone(),
        setup,
        mass: masses.clone(),
        trials: cfg.trials,
        seed: cfg.master_seed,
        dim_cap: cfg.dim_cap as u128,
        e_max: cfg.e_max.unwrap_or(schedule.e_star()),
        diagnostics: true,
        cnr_stride: cfg.stride,
    };
    let rep = match induction_orchestrator(&oc) {
        Err(MsaError::Infeasible { dim, cap, report }) => {
            return Err(LabError::Infeasible(format!("matrix dimension {dim} exceeds cap {cap}; {report}")))
        }
        other => other?,
    };
    let mut out = ExperimentOutput::default();
    let mut ms = Table::new("masses", &["L", "n", "gamma"]);
    for g in masses.table(&schedule.levels) {
        ms.push(vec![g.l.to_string(), g.n.to_string(), num(g.gamma)]);
    }
    let mut t = Table::new(
        "ds",
        &[
            "k", "n", "pair_type", "L_k", "trials", "failures", "estimate", "ci_lo", "ci_hi",
            "bound_log10", "resonant", "tunnelling", "many_singular", "unexplained",
        ],
    );
    for r in &rep.rows {
        let label = format!("msa-run/k{}/n{}/{}", r.k, r.n, r.pair_type.label());
        out.seeds(cfg.master_seed, &label, cfg.trials);
        t.push(vec![
            r.k.to_string(),
            r.n.to_string(),
            r.pair_type.label().into(),
            r.l_k.to_string(),
            r.trials.to_string(),
            r.failures.to_string(),
            num(r.estimate),
            num(r.ci_lo),
            num(r.ci_hi),
            num(r.bound_log10),
            r.r_count.to_string(),
            r.t_count.to_string(),
            r.s_count.to_string(),
            r.unexplained.to_string(),
        ]);
    }
    out.tables.push(t);
    out.tables.push(ms);
    Ok(out)
}

// ---------------------------------------------------------------------------

fn decay_options(cfg: &ExperimentConfig) -> Result<DecayOptions, LabError> {
    Ok(DecayOptions {
        m: mass(cfg)?.m,
        big_n: cfg.big_n,
        ..DecayOptions::default()
    })
}

fn full_window(cfg: &ExperimentConfig) -> (f64, f64) {
    (cfg.e_min.unwrap_or(f64::MIN), cfg.e_max.unwrap_or(f64::MAX))
}

fn decay_profile(cfg: &ExperimentConfig) -> Result<ExperimentOutput, LabError> {
    let setup = cfg.setup()?;
    let region = centered_box(cfg.n, cfg.d, cfg.box_half, true);
    let opts = decay_options(cfg)?;
    let window = full_window(cfg);
    let mut out = ExperimentOutput::default();
    out.seeds(cfg.master_seed, "decay-profile", cfg.trials);
    let per_trial = (0..cfg.trials)
        .into_par_iter()
        .map(|t| -> Result<_, LabError> {
            let field = setup.field(split_seed(cfg.master_seed, "decay-profile", t))?;
            Ok(eigenfunction_decay_profile(&region, &field, &setup, window, cfg.decay_count, &opts)?)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut prof = Table::new("profile", &["trial", "eigen_index", "energy", "distance", "log_norm"]);
    let mut rates = Table::new(
        "rates",
        &["trial", "eigen_index", "energy", "center", "fitted_rate", "rate_stderr", "fit_lo", "fit_hi", "residual", "flagged"],
    );
    for (t, ps) in per_trial.iter().enumerate() {
        for p in ps {
            for (r, v) in &p.samples {
                prof.push(vec![t.to_string(), p.eigen_index.to_string(), num(p.energy), r.to_string(), num(v.ln())]);
            }
            rates.push(vec![
                t.to_string(),
                p.eigen_index.to_string(),
                num(p.energy),
                format!("{:?}", p.center),
                num(p.fitted_rate),
                num(p.rate_stderr),
                p.fit_range.0.to_string(),
                p.fit_range.1.to_string(),
                num(p.residual),
                p.flagged.to_string(),
            ]);
        }
    }
    out.tables.push(prof);
    out.tables.push(rates);
    Ok(out)
}

// ---------------------------------------------------------------------------

/// `C_1(0)` as the initial support.
pub fn unit_support(n: usize, d: usize) -> SiteRegion {
    SiteRegion {
        d,
        lo: vec![-1; n * d],
        hi: vec![1; n * d],
    }
}

fn dynamical(cfg: &ExperimentConfig) -> Result<ExperimentOutput, LabError> {
    let setup = cfg.setup()?;
    let region = centered_box(cfg.n, cfg.d, cfg.box_half, false);
    let support = unit_support(cfg.n, cfg.d);
    let grid = log_time_grid(cfg.t_points, cfg.t_min, cfg.t_max);
    let window = (cfg.e_min.unwrap_or(f64::MIN), cfg.e_max.unwrap_or(e_star(cfg)));
    let mut out = ExperimentOutput::default();
    out.seeds(cfg.master_seed, "dynamical", cfg.trials);
    let reports = (0..cfg.trials)
        .map(|t| -> Result<_, LabError> {
            let field = setup.field(split_seed(cfg.master_seed, "dynamical", t))?;
            Ok(dynamical_moment(&region, &field as &dyn PotentialField, &setup, window, &support, cfg.s, &grid)?)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut vals = Table::new("moments", &["trial", "t", "value"]);
    let mut summ = Table::new("moment_summary", &["trial", "s", "states", "max_over_grid", "stationary_upper_bound"]);
    for (t, r) in reports.iter().enumerate() {
        for (time, v) in r.time_grid.iter().zip(&r.values) {
            vals.push(vec![t.to_string(), num(*time), num(*v)]);
        }
        summ.push(vec![
            t.to_string(),
            num(r.s),
            r.states_in_window.to_string(),
            num(r.max_over_grid),
            num(r.stationary_upper_bound),
        ]);
        if r.max_over_grid > r.stationary_upper_bound * (1.0 + 1e-9) + 1e-12 {
            out.failures.push(format!("trial {t}: moment exceeds its stationary bound"));
        }
    }
    out.tables.push(vals);
    out.tables.push(summ);
    out.json.push((
        "report_dynamical.json".into(),
        serde_json::to_value(&reports).map_err(|e| LabError::Io(e.to_string()))?,
    ));
    Ok(out)
}
