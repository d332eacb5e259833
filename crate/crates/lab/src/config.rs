//! Flat key-value experiment configuration.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use msa_core::model::{DiscretizationSpec, Distribution, InteractionSpec};
use msa_core::msa::ModelSetup;
use serde::{Deserialize, Serialize};

use crate::LabError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    GeometrySelftest,
    Wegner,
    CtCheck,
    InitialScale,
    MsaRun,
    DecayProfile,
    Dynamical,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::GeometrySelftest => "geometry-selftest",
            ExperimentKind::Wegner => "wegner",
            ExperimentKind::CtCheck => "ct-check",
            ExperimentKind::InitialScale => "initial-scale",
            ExperimentKind::MsaRun => "msa-run",
            ExperimentKind::DecayProfile => "decay-profile",
            ExperimentKind::Dynamical => "dynamical",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Total particle number `N`.
    pub big_n: usize,
    /// Particles in the cubes under study.
    pub n: usize,
    pub d: usize,
    pub l0: i64,
    /// Scale exponent; only `1.5` is implemented.
    pub alpha: f64,
    pub r0: i64,
    pub u0: f64,
    pub distribution: String,
    /// Grid spacing; `1` is the plain lattice.
    pub h: f64,
    pub p: f64,
    pub gamma_base: f64,
    pub k_max: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stride: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e_max: Option<f64>,
    /// Fixed energy for the pointwise statistics.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    /// Scales for per-`L` experiments; empty picks the experiment default.
    pub l_list: Vec<i64>,
    pub trials: u64,
    #[serde(with = "seed_repr")]
    pub master_seed: u64,
    pub out: String,
    pub strict: bool,
    pub dim_cap: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Moment order for `dynamical`.
    pub s: f64,
    pub t_points: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub decay_count: usize,
    pub box_half: i64,
    /// Largest exhaustively enumerated box in `geometry-selftest`.
    pub geometry_budget: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::GeometrySelftest,
            big_n: 2,
            n: 1,
            d: 1,
            l0: 8,
            alpha: 1.5,
            r0: 1,
            u0: 1.0,
            distribution: "uniform01".into(),
            h: 1.0,
            p: 13.0,
            gamma_base: 0.5,
            k_max: 1,
            stride: None,
            e_min: None,
            e_max: None,
            energy: None,
            l_list: Vec::new(),
            trials: 100,
            master_seed: 1,
            out: "out".into(),
            strict: false,
            dim_cap: 4096,
            workers: None,
            s: 2.0,
            t_points: 64,
            t_min: 0.1,
            t_max: 1e3,
            decay_count: 10,
            box_half: 64,
            geometry_budget: 2_000_000,
        }
    }
}

impl ExperimentConfig {
    pub fn for_kind(kind: ExperimentKind) -> Self {
        Self {
            experiment: kind,
            ..Self::default()
        }
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }

    pub fn from_text(text: &str) -> Result<Self, LabError> {
        toml::from_str(text).map_err(|e| LabError::Validation(vec![format!("config: {}", e.message())]))
    }

    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text)
    }

    pub fn distribution(&self) -> Result<Distribution, LabError> {
        Distribution::from_str(&self.distribution)
            .map_err(|e| LabError::Validation(vec![format!("distribution: {e}")]))
    }

    pub fn setup(&self) -> Result<ModelSetup, LabError> {
        let interaction = InteractionSpec::step(self.u0, self.r0)
            .map_err(|e| LabError::Validation(vec![format!("u0/r0: {e}")]))?;
        let disc = DiscretizationSpec::from_h(self.h)
            .map_err(|e| LabError::Validation(vec![format!("h: {e}")]))?;
        Ok(ModelSetup {
            big_n: self.big_n,
            d: self.d,
            distribution: self.distribution()?,
            interaction,
            disc,
        })
    }

    /// `l_list`, or the experiment's default scales.
    pub fn scales(&self) -> Vec<i64> {
        if !self.l_list.is_empty() {
            return self.l_list.clone();
        }
        match self.experiment {
            ExperimentKind::GeometrySelftest => vec![1, 2, 3],
            ExperimentKind::Wegner => vec![9, 16, 25],
            ExperimentKind::CtCheck => vec![4, 6, 8],
            ExperimentKind::InitialScale => vec![16, 25],
            _ => vec![self.l0],
        }
    }

    /// Every offending key with the reason.
    pub fn validate(&self) -> Result<(), LabError> {
        let mut bad = Vec::new();
        let mut check = |ok: bool, key: &str, why: String| {
            if !ok {
                bad.push(format!("{key}: {why}"));
            }
        };
        check((1..=8).contains(&self.big_n), "big_n", format!("{} not in 1..=8", self.big_n));
        check(
            self.n >= 1 && self.n <= self.big_n,
            "n",
            format!("{} not in 1..=big_n", self.n),
        );
        check((1..=3).contains(&self.d), "d", format!("{} not in 1..=3", self.d));
        let l0_min = if self.strict { 4 } else { 3 };
        check(self.l0 >= l0_min, "l0", format!("{} below {l0_min}", self.l0));
        check(self.alpha == 1.5, "alpha", format!("{} unsupported, only 1.5", self.alpha));
        check(self.r0 >= 0, "r0", format!("{} negative", self.r0));
        check(self.u0.is_finite() && self.u0 >= 0.0, "u0", format!("{} not finite and >= 0", self.u0));
        match Distribution::from_str(&self.distribution) {
            Ok(dist) => check(
                dist.support_min() >= 0.0,
                "distribution",
                "potential values must be nonnegative".into(),
            ),
            Err(e) => check(false, "distribution", e.to_string()),
        }
        check(DiscretizationSpec::from_h(self.h).is_ok(), "h", format!("{} is not 1/k", self.h));
        let six_nd = 6.0 * (self.big_n * self.d) as f64;
        check(self.p > 0.0, "p", format!("{} not positive", self.p));
        if self.strict {
            check(self.p > six_nd, "p", format!("{} must exceed 6Nd = {six_nd} in strict mode", self.p));
        }
        check(
            self.gamma_base > 0.0 && self.gamma_base < 1.0,
            "gamma_base",
            format!("{} not in (0,1)", self.gamma_base),
        );
        check(self.k_max <= 6, "k_max", format!("{} above 6", self.k_max));
        if let Some(s) = self.stride {
            check(s >= 1, "stride", format!("{s} below 1"));
        }
        if let (Some(a), Some(b)) = (self.e_min, self.e_max) {
            check(a <= b, "e_min", format!("{a} exceeds e_max {b}"));
        }
        for (key, v) in [("e_min", self.e_min), ("e_max", self.e_max), ("energy", self.energy)] {
            if let Some(v) = v {
                check(v.is_finite(), key, format!("{v} not finite"));
            }
        }
        check(
            self.l_list.iter().all(|&l| l >= 1) && self.l_list.windows(2).all(|w| w[0] < w[1]),
            "l_list",
            format!("{:?} must be increasing and >= 1", self.l_list),
        );
        check(self.trials >= 1, "trials", "must be >= 1".into());
        check(self.dim_cap >= 1, "dim_cap", "must be >= 1".into());
        if let Some(w) = self.workers {
            check(w >= 1, "workers", "must be >= 1".into());
        }
        check(self.s >= 0.0 && self.s.is_finite(), "s", format!("{} not >= 0", self.s));
        check(self.t_points >= 1, "t_points", "must be >= 1".into());
        check(self.t_min > 0.0, "t_min", format!("{} not positive", self.t_min));
        check(self.t_max >= self.t_min, "t_max", format!("{} below t_min", self.t_max));
        check(self.decay_count >= 1, "decay_count", "must be >= 1".into());
        check(self.box_half >= 4, "box_half", format!("{} below 4", self.box_half));
        check(self.geometry_budget >= 1, "geometry_budget", "must be >= 1".into());
        check(!self.out.is_empty(), "out", "empty path".into());
        if bad.is_empty() {
            Ok(())
        } else {
            Err(LabError::Validation(bad))
        }
    }
}

/// TOML integers are signed 64-bit; seeds above `i64::MAX` are written as strings.
mod seed_repr {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        match i64::try_from(*v) {
            Ok(i) => s.serialize_i64(i),
            Err(_) => s.serialize_str(&v.to_string()),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Int(i64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Int(i) => u64::try_from(i).map_err(|_| de::Error::custom("seed must be >= 0")),
            Repr::Text(t) => t.trim().parse().map_err(de::Error::custom),
        }
    }
}
