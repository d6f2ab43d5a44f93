//! Reproducible desk-scale studies tying the finite chain to its limits,
//! with CSV/JSON persistence. Each study consumes a `StudyConfig` (TOML) and
//! emits one row per ladder rung (or per horizon for the deterministic
//! steady-state study).

use crate::fv::{self, FVError, FVParams};
use crate::limit::{self, LimitError, LimitParams};
use crate::measures::{
    discretized_beta, wasserstein1, BetaSpec, GridMeasure, MeasureError,
};
use crate::moran::{self, ChainError, ChainParams, StepResult};
use crate::seeds::{derive_seed, replica_rng};
use crate::spec_lang::{parse_measure, parse_observable, ParseError};
use crate::testfn::TestFunction;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error in `{key}`: {detail}")]
    Config { key: String, detail: String },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Limit(#[from] LimitError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Fv(#[from] FVError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad config file: {0}")]
    Toml(#[from] toml::de::Error),
}

fn cfg_err(key: &str, detail: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        key: key.to_string(),
        detail: detail.into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    DetConvergence,
    QvScaling,
    FvMartingale,
    SteadyState,
    QuasiInvariance,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StudyConfig {
    pub kind: StudyKind,
    /// (m, n) per rung; strictly increasing in min(m, n).
    #[serde(default)]
    pub ladder: Vec<(usize, usize)>,
    pub s: Option<f64>,
    pub r: Option<f64>,
    pub w: Option<f64>,
    pub lambda: Option<f64>,
    pub fv: Option<FVParams>,
    /// Initial measure in the mini-language (`delta:x`, `uniform`, ...).
    pub initial: String,
    pub horizon: f64,
    #[serde(default = "one")]
    pub replicas: usize,
    pub seed: u64,
    /// Observable for martingale studies; defaults to `x`.
    pub observable: Option<String>,
    /// Steady-state W1 target (default 1e-2) or quasi-invariance exit
    /// threshold (default 0.1).
    pub threshold: Option<f64>,
    /// Beta tail exponent for quasi-invariance.
    pub alpha: Option<f64>,
    /// Evaluation horizons for the steady-state study.
    pub horizons: Option<Vec<f64>>,
    pub output: Option<PathBuf>,
}

fn one() -> usize {
    1
}

impl StudyConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let cfg: StudyConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, HarnessError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.replicas == 0 {
            return Err(cfg_err("replicas", "must be >= 1"));
        }
        if !self.horizon.is_finite() || self.horizon < 0.0 {
            return Err(cfg_err("horizon", format!("bad horizon {}", self.horizon)));
        }
        if self.kind != StudyKind::SteadyState {
            if self.ladder.is_empty() {
                return Err(cfg_err("ladder", "must be nonempty"));
            }
            for pair in self.ladder.windows(2) {
                let (a, b) = (pair[0], pair[1]);
                if a.0.min(a.1) >= b.0.min(b.1) {
                    return Err(cfg_err(
                        "ladder",
                        format!("min(m,n) must strictly increase: {a:?} then {b:?}"),
                    ));
                }
            }
        }
        parse_measure(&self.initial)?;
        Ok(())
    }

    /// λ = wr/s, from the explicit field or the chain rates.
    fn lambda(&self) -> Result<f64, HarnessError> {
        if let Some(l) = self.lambda {
            return Ok(l);
        }
        let (s, r, w) = self.rates()?;
        if s == 0.0 {
            return Err(cfg_err("s", "s = 0 leaves lambda = wr/s undefined"));
        }
        Ok(w * r / s)
    }

    fn rates(&self) -> Result<(f64, f64, f64), HarnessError> {
        match (self.s, self.r, self.w) {
            (Some(s), Some(r), Some(w)) => Ok((s, r, w)),
            _ => Err(cfg_err("s/r/w", "chain rates s, r, w are all required")),
        }
    }

    fn observable(&self) -> Result<TestFunction, HarnessError> {
        Ok(parse_observable(self.observable.as_deref().unwrap_or("x"))?)
    }
}

/// One rung (or horizon) of a study. `stats` keys are study-specific;
/// wall-clock is reported in the JSON manifest only, so the CSV is
/// byte-identical across re-runs of the same config.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StudyRow {
    pub stats: BTreeMap<String, f64>,
    pub pass: bool,
    pub wall_clock_s: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StudyResult {
    pub kind: StudyKind,
    pub rows: Vec<StudyRow>,
    /// Study-level statistics (e.g. fitted slope).
    pub summary: BTreeMap<String, f64>,
    pub passed: bool,
    /// Soft-check violations (quasi-invariance monotonicity is WARN, not FAIL).
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
}

impl StudyResult {
    fn new(kind: StudyKind) -> Self {
        Self {
            kind,
            rows: Vec::new(),
            summary: BTreeMap::new(),
            passed: true,
            warnings: Vec::new(),
            notes: Vec::new(),
        }
    }

    /// Deterministic CSV: sorted union of stat keys, shortest-roundtrip
    /// float formatting, no timing columns.
    pub fn csv_string(&self) -> String {
        let mut keys: Vec<&str> = self
            .rows
            .iter()
            .flat_map(|r| r.stats.keys().map(|k| k.as_str()))
            .collect();
        keys.sort_unstable();
        keys.dedup();
        let mut out = String::new();
        out.push_str(&keys.join(","));
        out.push_str(",pass\n");
        for row in &self.rows {
            for k in &keys {
                match row.stats.get(*k) {
                    Some(v) => out.push_str(&format!("{v}")),
                    None => {}
                }
                out.push(',');
            }
            out.push_str(if row.pass { "true" } else { "false" });
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), HarnessError> {
        let mut file = std::fs::File::create(path)?;
        file.write_all(self.csv_string().as_bytes())?;
        Ok(())
    }

    /// JSON manifest: config + rows (with wall-clock) + summary.
    pub fn write_json(&self, cfg: &StudyConfig, path: &Path) -> Result<(), HarnessError> {
        let manifest = serde_json::json!({
            "config": cfg,
            "result": self,
        });
        let mut file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut file, &manifest)
            .map_err(|e| std::io::Error::other(e))?;
        file.write_all(b"\n")?;
        Ok(())
    }

    /// Write `<stem>.csv` and `<stem>.json` under `dir`.
    pub fn persist(&self, cfg: &StudyConfig, dir: &Path, stem: &str) -> Result<(), HarnessError> {
        std::fs::create_dir_all(dir)?;
        self.write_csv(&dir.join(format!("{stem}.csv")))?;
        self.write_json(cfg, &dir.join(format!("{stem}.json")))?;
        Ok(())
    }
}

pub fn run_study(cfg: &StudyConfig) -> Result<StudyResult, HarnessError> {
    match cfg.kind {
        StudyKind::DetConvergence => det_convergence_study(cfg),
        StudyKind::QvScaling => qv_scaling_study(cfg),
        StudyKind::FvMartingale => fv_martingale_wrapper(cfg),
        StudyKind::SteadyState => steady_state_study(cfg),
        StudyKind::QuasiInvariance => quasi_invariance_study(cfg),
    }
}

fn mean_se(samples: &[f64]) -> (f64, f64, f64) {
    let nf = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let var = if samples.len() > 1 {
        samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (nf - 1.0)
    } else {
        0.0
    };
    (mean, (var / nf).sqrt(), var)
}

fn base_stats(m: usize, n: usize, replicas: usize) -> BTreeMap<String, f64> {
    let mut stats = BTreeMap::new();
    stats.insert("m".into(), m as f64);
    stats.insert("n".into(), n as f64);
    stats.insert("replicas".into(), replicas as f64);
    stats
}

/// W1 between the empirical measure at T (time-changed chain) and the
/// closed-form deterministic evolution, averaged over replicas; must be
/// nonincreasing along the ladder within 1 combined SE.
pub fn det_convergence_study(cfg: &StudyConfig) -> Result<StudyResult, HarnessError> {
    if cfg.ladder.len() < 3 {
        return Err(cfg_err("ladder", "need at least 3 rungs"));
    }
    let (s, r, w) = cfg.rates()?;
    if s == 0.0 {
        return Err(cfg_err("s", "s = 0 leaves lambda = wr/s undefined"));
    }
    let lambda = cfg.lambda()?;
    let mu0 = parse_measure(&cfg.initial)?.build(Some(lambda))?;
    let limit_t = limit::evolve(&mu0, &LimitParams::new(lambda)?, cfg.horizon)?.measure;

    let mut result = StudyResult::new(StudyKind::DetConvergence);
    let mut prev: Option<(f64, f64)> = None;
    for (rung, &(m, n)) in cfg.ladder.iter().enumerate() {
        let start = Instant::now();
        let params = ChainParams::det_scaled(m, n, s, r, w)?;
        let lattice = GridMeasure::from_measure(&mu0, n);
        let rung_seed = derive_seed(cfg.seed, rung as u64);
        let dists: Result<Vec<f64>, HarnessError> = (0..cfg.replicas)
            .into_par_iter()
            .map(|rep| {
                let mut rng = replica_rng(rung_seed, rep as u64);
                let path = moran::simulate(&lattice, &params, cfg.horizon, &[], &[], &mut rng)?;
                let st = moran::ChainState::new(path.final_counts, &params)?;
                Ok(wasserstein1(
                    &moran::empirical_measure(&st, &params),
                    &limit_t,
                ))
            })
            .collect();
        let dists = dists?;
        let (mean, se, _) = mean_se(&dists);
        let mut pass = true;
        if let Some((pm, pse)) = prev {
            let slack = (se * se + pse * pse).sqrt();
            if mean > pm + slack {
                pass = false;
            }
        }
        if let Some(thr) = cfg.threshold {
            if rung + 1 == cfg.ladder.len() && mean >= thr {
                pass = false;
            }
        }
        prev = Some((mean, se));
        let mut stats = base_stats(m, n, cfg.replicas);
        stats.insert("mean_w1".into(), mean);
        stats.insert("se".into(), se);
        result.passed &= pass;
        result.rows.push(StudyRow {
            stats,
            pass,
            wall_clock_s: start.elapsed().as_secs_f64(),
        });
    }
    Ok(result)
}

/// Replica variance of M_T(f) per group count m at fixed n; the fitted
/// log-log slope against m must be -1 +/- 0.2.
pub fn qv_scaling_study(cfg: &StudyConfig) -> Result<StudyResult, HarnessError> {
    if cfg.ladder.len() < 3 {
        return Err(cfg_err("ladder", "need at least 3 rungs"));
    }
    let n0 = cfg.ladder[0].1;
    if cfg.ladder.iter().any(|&(_, n)| n != n0) {
        return Err(cfg_err("ladder", "qv_scaling fixes n across rungs"));
    }
    let (s, r, w) = cfg.rates()?;
    let f = cfg.observable()?;
    let mu0 = parse_measure(&cfg.initial)?.build(cfg.lambda().ok())?;

    let mut result = StudyResult::new(StudyKind::QvScaling);
    let mut log_points = Vec::new();
    for (rung, &(m, n)) in cfg.ladder.iter().enumerate() {
        let start = Instant::now();
        let params = ChainParams::unscaled(m, n, s, r, w)?;
        let lattice = GridMeasure::from_measure(&mu0, n);
        if moran::event_rates(
            &moran::ChainState::new(lattice.sample(m, &mut replica_rng(cfg.seed, 0)).iter().map(|k| *k as u32).collect(), &params)?,
            &params,
        )
        .total
            == 0.0
        {
            return Err(cfg_err("initial", "degenerate initial state: total rate 0"));
        }
        let rung_seed = derive_seed(cfg.seed, rung as u64);
        let times = [cfg.horizon];
        let residuals: Result<Vec<f64>, HarnessError> = (0..cfg.replicas)
            .into_par_iter()
            .map(|rep| {
                let mut rng = replica_rng(rung_seed, rep as u64);
                let path = moran::simulate(
                    &lattice,
                    &params,
                    cfg.horizon,
                    std::slice::from_ref(&f),
                    &times,
                    &mut rng,
                )?;
                Ok(path.values[0][0] - path.initial_values[0] - path.drift_integrals[0][0])
            })
            .collect();
        let residuals = residuals?;
        let (_, _, var) = mean_se(&residuals);
        // normal-theory SE of a sample variance
        let var_se = var * (2.0 / (cfg.replicas as f64 - 1.0)).sqrt();
        log_points.push(((m as f64).ln(), var.ln()));
        let mut stats = base_stats(m, n, cfg.replicas);
        stats.insert("var".into(), var);
        stats.insert("var_se".into(), var_se);
        result.rows.push(StudyRow {
            stats,
            pass: true,
            wall_clock_s: start.elapsed().as_secs_f64(),
        });
    }
    let slope = fit_slope(&log_points);
    let pass = (-1.2..=-0.8).contains(&slope);
    result.summary.insert("slope".into(), slope);
    result.passed = pass;
    for row in &mut result.rows {
        row.pass = pass;
    }
    Ok(result)
}

fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let nf = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Evolve the deterministic limit to increasing horizons and track W1 to the
/// classified steady state; must decrease monotonically and end below the
/// threshold (default 1e-2).
pub fn steady_state_study(cfg: &StudyConfig) -> Result<StudyResult, HarnessError> {
    let lambda = cfg.lambda()?;
    let lp = LimitParams::new(lambda)?;
    let mu0 = parse_measure(&cfg.initial)?.build(Some(lambda))?;
    let tail = limit::tail_of(&mu0)?;
    let verdict = limit::classify_longtime(&tail, &lp);
    let target = verdict.limit_measure();
    let horizons = cfg
        .horizons
        .clone()
        .unwrap_or_else(|| vec![1.0, 2.0, 5.0, 10.0, 20.0]);
    if horizons.is_empty() || horizons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(cfg_err("horizons", "must be nonempty and increasing"));
    }
    let threshold = cfg.threshold.unwrap_or(1e-2);

    let mut result = StudyResult::new(StudyKind::SteadyState);
    result.notes.push(format!("verdict: {verdict:?}"));
    let mut prev = f64::INFINITY;
    for (i, &t) in horizons.iter().enumerate() {
        let start = Instant::now();
        let state = limit::evolve(&mu0, &lp, t)?;
        let d = wasserstein1(&state.measure, &target);
        let mut pass = d <= prev + 1e-6;
        if i + 1 == horizons.len() && d >= threshold {
            pass = false;
        }
        prev = d;
        let mut stats = BTreeMap::new();
        stats.insert("t".into(), t);
        stats.insert("w1".into(), d);
        result.passed &= pass;
        result.rows.push(StudyRow {
            stats,
            pass,
            wall_clock_s: start.elapsed().as_secs_f64(),
        });
    }
    Ok(result)
}

/// Mean first time the empirical measure drifts W1 > threshold away from the
/// discretized Beta it started from (i.i.d. groups). Monotonicity along the
/// ladder is a soft check: violation is a warning, not a failure.
pub fn quasi_invariance_study(cfg: &StudyConfig) -> Result<StudyResult, HarnessError> {
    let (s, r, w) = cfg.rates()?;
    let lambda = cfg.lambda()?;
    let alpha = cfg
        .alpha
        .ok_or_else(|| cfg_err("alpha", "Beta tail exponent required"))?;
    let spec = BetaSpec::new(lambda, alpha)?;
    let threshold = cfg.threshold.unwrap_or(0.1);
    if threshold <= 0.0 {
        return Err(cfg_err("threshold", "must be > 0"));
    }

    let mut result = StudyResult::new(StudyKind::QuasiInvariance);
    let mut prev: Option<(f64, f64)> = None;
    for (rung, &(m, n)) in cfg.ladder.iter().enumerate() {
        let start = Instant::now();
        let params = ChainParams::unscaled(m, n, s, r, w)?;
        let reference = discretized_beta(n, &spec)?;
        let rung_seed = derive_seed(cfg.seed, rung as u64);
        let exits: Result<Vec<f64>, HarnessError> = (0..cfg.replicas)
            .into_par_iter()
            .map(|rep| {
                let mut rng = replica_rng(rung_seed, rep as u64);
                let counts: Vec<u32> = reference
                    .sample(m, &mut rng)
                    .into_iter()
                    .map(|k| k as u32)
                    .collect();
                let mut st = moran::ChainState::new(counts, &params)?;
                loop {
                    if st.time >= cfg.horizon {
                        return Ok(cfg.horizon);
                    }
                    let emp = moran::empirical_measure(&st, &params);
                    if wasserstein1(&emp, &reference) > threshold {
                        return Ok(st.time.min(cfg.horizon));
                    }
                    match moran::gillespie_step(&mut st, &params, &mut rng) {
                        StepResult::Event(_) => {}
                        StepResult::Absorbed => return Ok(cfg.horizon),
                    }
                }
            })
            .collect();
        let exits = exits?;
        let (mean, se, _) = mean_se(&exits);
        if let Some((pm, pse)) = prev {
            let slack = (se * se + pse * pse).sqrt();
            if mean + slack < pm {
                result.warnings.push(format!(
                    "exit time decreased at rung (m={m}, n={n}): {mean:.4} after {pm:.4}"
                ));
            }
        }
        prev = Some((mean, se));
        let mut stats = base_stats(m, n, cfg.replicas);
        stats.insert("mean_exit_time".into(), mean);
        stats.insert("se".into(), se);
        result.rows.push(StudyRow {
            stats,
            pass: true,
            wall_clock_s: start.elapsed().as_secs_f64(),
        });
    }
    Ok(result)
}

/// Per-rung Fleming-Viot martingale test (delegates to fv_martingale_study).
pub fn fv_martingale_wrapper(cfg: &StudyConfig) -> Result<StudyResult, HarnessError> {
    let fv_params: FVParams = cfg
        .fv
        .ok_or_else(|| cfg_err("fv", "fv parameter table required"))?;
    let f = cfg.observable()?;
    let mu0 = parse_measure(&cfg.initial)?.build(cfg.lambda().ok())?;

    let mut result = StudyResult::new(StudyKind::FvMartingale);
    for (rung, &(m, n)) in cfg.ladder.iter().enumerate() {
        let start = Instant::now();
        let lattice = GridMeasure::from_measure(&mu0, n);
        let rec = fv::fv_martingale_study(
            &lattice,
            m,
            n,
            &fv_params,
            &f,
            cfg.horizon,
            cfg.replicas,
            derive_seed(cfg.seed, rung as u64),
        )?;
        let pass = rec.mean_pass && rec.var_pass;
        let mut stats = base_stats(m, n, cfg.replicas);
        stats.insert("mean".into(), rec.mean);
        stats.insert("se".into(), rec.se);
        stats.insert("var".into(), rec.variance);
        stats.insert("qv_mean".into(), rec.qv_mean);
        result.passed &= pass;
        result.rows.push(StudyRow {
            stats,
            pass,
            wall_clock_s: start.elapsed().as_secs_f64(),
        });
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(kind: StudyKind) -> StudyConfig {
        StudyConfig {
            kind,
            ladder: vec![(10, 10), (20, 20), (40, 40)],
            s: Some(0.5),
            r: Some(1.5),
            w: Some(1.0),
            lambda: None,
            fv: None,
            initial: "uniform".into(),
            horizon: 1.0,
            replicas: 20,
            seed: 11,
            observable: None,
            threshold: None,
            alpha: None,
            horizons: None,
            output: None,
        }
    }

    #[test]
    fn config_roundtrip_and_validation() {
        let text = r#"
            kind = "det_convergence"
            ladder = [[10, 10], [30, 30], [100, 100]]
            s = 0.2
            r = 1.0
            w = 1.0
            initial = "uniform"
            horizon = 1.0
            replicas = 50
            seed = 7
        "#;
        let cfg = StudyConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.kind, StudyKind::DetConvergence);
        assert_eq!(cfg.ladder.len(), 3);
        assert!((cfg.lambda().unwrap() - 5.0).abs() < 1e-12);

        let bad = text.replace("[[10, 10], [30, 30], [100, 100]]", "[[30,30],[10,10],[100,100]]");
        assert!(StudyConfig::from_toml_str(&bad).is_err());
    }

    #[test]
    fn det_convergence_rejects_s_zero() {
        let mut cfg = base(StudyKind::DetConvergence);
        cfg.s = Some(0.0);
        assert!(matches!(
            det_convergence_study(&cfg),
            Err(HarnessError::Config { .. })
        ));
    }

    #[test]
    fn det_convergence_absorbing_initial_distance_zero() {
        let mut cfg = base(StudyKind::DetConvergence);
        cfg.initial = "delta:0".into();
        cfg.replicas = 3;
        let res = det_convergence_study(&cfg).unwrap();
        assert!(res.passed);
        for row in &res.rows {
            assert!(row.stats["mean_w1"] < 1e-12, "{:?}", row.stats);
        }
    }

    #[test]
    fn det_convergence_shrinks_along_ladder() {
        let mut cfg = base(StudyKind::DetConvergence);
        cfg.s = Some(0.5);
        cfg.r = Some(1.0);
        cfg.w = Some(1.5);
        cfg.replicas = 30;
        let res = det_convergence_study(&cfg).unwrap();
        assert!(res.passed, "{:#?}", res.rows);
        let first = res.rows.first().unwrap().stats["mean_w1"];
        let last = res.rows.last().unwrap().stats["mean_w1"];
        assert!(last < first, "{last} vs {first}");
    }

    #[test]
    fn qv_scaling_slope_near_minus_one() {
        let mut cfg = base(StudyKind::QvScaling);
        cfg.s = Some(0.2);
        cfg.r = Some(1.0);
        cfg.ladder = vec![(20, 20), (40, 20), (80, 20)];
        cfg.replicas = 300;
        cfg.horizon = 1.0;
        let res = qv_scaling_study(&cfg).unwrap();
        let slope = res.summary["slope"];
        assert!(res.passed, "slope = {slope}");
    }

    #[test]
    fn qv_scaling_requires_fixed_n() {
        let mut cfg = base(StudyKind::QvScaling);
        cfg.ladder = vec![(10, 10), (20, 20), (40, 40)];
        assert!(qv_scaling_study(&cfg).is_err());
    }

    #[test]
    fn steady_state_example2() {
        let mut cfg = base(StudyKind::SteadyState);
        cfg.kind = StudyKind::SteadyState;
        cfg.initial = "example2".into();
        cfg.lambda = Some(3.0);
        let res = steady_state_study(&cfg).unwrap();
        assert!(res.passed, "{:#?}", res.rows);
        assert!(res.notes[0].contains("Beta"), "{:?}", res.notes);
        assert!(res.rows.last().unwrap().stats["w1"] < 1e-2);
    }

    #[test]
    fn steady_state_mass_at_one_goes_to_delta1() {
        let mut cfg = base(StudyKind::SteadyState);
        cfg.initial = "mixture:[0.3*delta:1; 0.7*uniform]".into();
        cfg.lambda = Some(3.0);
        let res = steady_state_study(&cfg).unwrap();
        assert!(res.notes[0].contains("Delta1"), "{:?}", res.notes);
        assert!(res.passed, "{:#?}", res.rows);
    }

    #[test]
    fn quasi_invariance_large_threshold_never_exits() {
        let mut cfg = base(StudyKind::QuasiInvariance);
        cfg.ladder = vec![(5, 5), (8, 8)];
        cfg.lambda = Some(3.0);
        cfg.alpha = Some(1.0);
        cfg.threshold = Some(1.1);
        cfg.replicas = 5;
        cfg.horizon = 0.5;
        let res = quasi_invariance_study(&cfg).unwrap();
        for row in &res.rows {
            assert_eq!(row.stats["mean_exit_time"], cfg.horizon);
        }
    }

    #[test]
    fn quasi_invariance_reproducible_and_csv_stable() {
        let mut cfg = base(StudyKind::QuasiInvariance);
        cfg.ladder = vec![(5, 5), (10, 10)];
        cfg.lambda = Some(3.0);
        cfg.alpha = Some(1.0);
        cfg.replicas = 10;
        cfg.horizon = 2.0;
        let a = quasi_invariance_study(&cfg).unwrap();
        let b = quasi_invariance_study(&cfg).unwrap();
        assert_eq!(a.csv_string(), b.csv_string());
        assert!(a.csv_string().starts_with("m,mean_exit_time,n,replicas,se,pass\n"));
    }

    #[test]
    fn fv_wrapper_runs_and_persists() {
        let mut cfg = base(StudyKind::FvMartingale);
        cfg.ladder = vec![(15, 15)];
        cfg.fv = Some(FVParams::new(1.0, 1.0, 1.0, 1.0).unwrap());
        cfg.replicas = 120;
        cfg.horizon = 0.2;
        let res = fv_martingale_wrapper(&cfg).unwrap();
        assert_eq!(res.rows.len(), 1);
        let dir = tempfile::tempdir().unwrap();
        res.persist(&cfg, dir.path(), "fv").unwrap();
        assert!(dir.path().join("fv.csv").exists());
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("fv.json")).unwrap())
                .unwrap();
        assert_eq!(manifest["config"]["seed"], 11);
    }
}
