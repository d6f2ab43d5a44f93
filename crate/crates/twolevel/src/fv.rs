//! The diffusive scaling regime: weak selection (s = σ/n, r = ρ/m), clock
//! sped up by n, converging to a Fleming-Viot process with group-level
//! reproduction. Provides the rescaled finite-chain functionals, the limit
//! functionals, and a statistical check of the martingale problem.

use crate::measures::{GridMeasure, Measure, MeasureError};
use crate::moran::{self, ChainError, ChainParams, ChainState};
use crate::seeds::replica_rng;
use crate::testfn::TestFunction;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FVError {
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("need at least 100 replicas for the SE estimate, got {0}")]
    TooFewReplicas(usize),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// Parameters of the Fleming-Viot limit.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct FVParams {
    /// Individual selection intensity (s = σ/n).
    pub sigma: f64,
    /// Group selection intensity (r = ρ/m).
    pub rho: f64,
    /// Limit of n/m.
    pub theta: f64,
    /// Group-to-individual event rate ratio.
    pub w: f64,
}

impl FVParams {
    pub fn new(sigma: f64, rho: f64, theta: f64, w: f64) -> Result<Self, FVError> {
        if !(sigma >= 0.0) || !(rho >= 0.0) {
            return Err(FVError::BadParams(format!(
                "sigma = {sigma}, rho = {rho} must be >= 0"
            )));
        }
        if !(theta > 0.0) || !(w > 0.0) {
            return Err(FVError::BadParams(format!(
                "theta = {theta}, w = {w} must be > 0"
            )));
        }
        Ok(Self { sigma, rho, theta, w })
    }
}

/// Prelimit chain at (m, n): s = σ/n, r = ρ/m, clock factor n.
pub fn rescaled_chain(m: usize, n: usize, fv: &FVParams) -> Result<ChainParams, FVError> {
    Ok(ChainParams::new(
        m,
        n,
        fv.sigma / n as f64,
        fv.rho / m as f64,
        fv.w,
        n as f64,
    )?)
}

/// Group size matching the aspect ratio θ at a given group count.
pub fn group_size_for(m: usize, fv: &FVParams) -> usize {
    (fv.theta * m as f64).ceil() as usize
}

/// Af(x) = x(1-x)(f''(x) - σ f'(x)).
pub fn operator_a(f: &TestFunction, sigma: f64) -> TestFunction {
    let g = f.clone();
    TestFunction::value_only(format!("A[{}]", f.name()), move |x| {
        x * (1.0 - x) * (g.deriv2(x) - sigma * g.deriv(x))
    })
}

/// Drift of ⟨f, ν_t⟩ under the limit: ⟨Af, ν⟩ + wθρ(⟨xf, ν⟩ - ⟨f, ν⟩⟨x, ν⟩).
pub fn limit_drift<M: Measure + ?Sized>(
    nu: &M,
    f: &TestFunction,
    fv: &FVParams,
) -> Result<f64, MeasureError> {
    let af = operator_a(f, fv.sigma);
    let fx = f.clone();
    let xf = TestFunction::value_only("x*f", move |x| x * fx.eval(x));
    Ok(nu.integrate(&af)?
        + fv.w * fv.theta * fv.rho * (nu.integrate(&xf)? - nu.integrate(f)? * nu.mean()))
}

/// Quadratic variation rate of the limit martingale:
/// 2wθ(⟨f², ν⟩ - ⟨f, ν⟩²) = wθ ∬ (f(x)-f(y))² ν(dx)ν(dy).
///
/// For discrete ν both forms are computed and must agree to 1e-12.
pub fn limit_qv_rate<M: Measure + ?Sized>(
    nu: &M,
    f: &TestFunction,
    fv: &FVParams,
) -> Result<f64, MeasureError> {
    let fy = f.clone();
    let f2 = TestFunction::value_only("f^2", move |x| fy.eval(x) * fy.eval(x));
    let mean_f = nu.integrate(f)?;
    let moment = 2.0 * fv.w * fv.theta * (nu.integrate(&f2)? - mean_f * mean_f);
    if let Some(atoms) = nu.point_masses() {
        let mut double = 0.0;
        for &(x, wx) in &atoms {
            for &(y, wy) in &atoms {
                let d = f.eval(x) - f.eval(y);
                double += wx * wy * d * d;
            }
        }
        let pair = fv.w * fv.theta * double;
        assert!(
            (pair - moment).abs() <= 1e-12 * (1.0 + moment.abs()),
            "QV forms disagree: {pair} vs {moment}"
        );
    }
    Ok(moment.max(0.0))
}

/// Recover (σ, ρ) back from a rescaled chain.
fn intensities(params: &ChainParams) -> (f64, f64) {
    (params.s * params.n as f64, params.r * params.m as f64)
}

/// Finite-(m,n) drift of the rescaled process, per recorded time unit:
/// Σ ν(x) x(1-x)[D_xx f - σ D⁻f] + wρ(n/m)(⟨xf⟩ - ⟨f⟩⟨x⟩).
pub fn rescaled_drift(state: &ChainState, params: &ChainParams, f: &TestFunction) -> f64 {
    let (sigma, rho) = intensities(params);
    let n = params.n as f64;
    let nu = moran::empirical_measure(state, params);
    let mut indiv = 0.0;
    let (mut mf, mut mx, mut mxf) = (0.0, 0.0, 0.0);
    for (k, &mu) in nu.weights.iter().enumerate() {
        if mu == 0.0 {
            continue;
        }
        let x = k as f64 / n;
        let fx = f.eval(x);
        mf += mu * fx;
        mx += mu * x;
        mxf += mu * x * fx;
        if k > 0 && k < params.n {
            let fp = f.eval((k as f64 + 1.0) / n);
            let fm = f.eval((k as f64 - 1.0) / n);
            let d_xx = n * n * (fp - 2.0 * fx + fm);
            let d_minus = n * (fx - fm);
            indiv += mu * x * (1.0 - x) * (d_xx - sigma * d_minus);
        }
    }
    indiv + fv_group_factor(params) * rho * (mxf - mf * mx)
}

fn fv_group_factor(params: &ChainParams) -> f64 {
    params.w * params.n as f64 / params.m as f64
}

/// Finite-(m,n) quadratic variation rate of the rescaled martingale part:
/// (n/m²) Σ ν(x) x(1-x)[(D⁺f)² + (1+σ/n)(D⁻f)²]
///   + w(n/m) ΣΣ ν(x)ν(y)(1 + (ρ/m) y)(f(x)-f(y))².
pub fn rescaled_qv(state: &ChainState, params: &ChainParams, f: &TestFunction) -> f64 {
    let (sigma, _) = intensities(params);
    let n = params.n as f64;
    let m = params.m as f64;
    let nu = moran::empirical_measure(state, params);
    let mut indiv = 0.0;
    let (mut mf, mut mf2, mut mx, mut mxf, mut mxf2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (k, &mu) in nu.weights.iter().enumerate() {
        if mu == 0.0 {
            continue;
        }
        let x = k as f64 / n;
        let fx = f.eval(x);
        mf += mu * fx;
        mf2 += mu * fx * fx;
        mx += mu * x;
        mxf += mu * x * fx;
        mxf2 += mu * x * fx * fx;
        if k > 0 && k < params.n {
            let fp = f.eval((k as f64 + 1.0) / n);
            let fm = f.eval((k as f64 - 1.0) / n);
            let d_plus = n * (fp - fx);
            let d_minus = n * (fx - fm);
            indiv += mu
                * x
                * (1.0 - x)
                * (d_plus * d_plus + (1.0 + sigma / n) * d_minus * d_minus);
        }
    }
    let r = params.r;
    let pair = mf2 * (1.0 + r * mx) - 2.0 * mf * (mf + r * mxf) + (mf2 + r * mxf2);
    n / (m * m) * indiv + params.w * n / m * pair
}

// ---------------------------------------------------------------------------
// Statistical study of the martingale problem
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FVStudyRecord {
    pub fv: FVParams,
    pub m: usize,
    pub n: usize,
    pub horizon: f64,
    pub replicas: usize,
    pub seed: u64,
    pub observable: String,
    /// Sample mean of N_T(f) over replicas.
    pub mean: f64,
    pub se: f64,
    pub variance: f64,
    /// Mean of the exactly accumulated ⟨N(f)⟩_T.
    pub qv_mean: f64,
    pub mean_pass: bool,
    pub var_pass: bool,
    /// Raw N_T(f) samples, in replica order.
    pub samples: Vec<f64>,
}

/// Simulate `replicas` independent rescaled chains and test the martingale
/// problem: mean of N_T(f) within 3 SE of zero, replica variance within 20%
/// of the mean accumulated quadratic variation.
#[allow(clippy::too_many_arguments)]
pub fn fv_martingale_study(
    nu0: &GridMeasure,
    m: usize,
    n: usize,
    fv: &FVParams,
    f: &TestFunction,
    horizon: f64,
    replicas: usize,
    seed: u64,
) -> Result<FVStudyRecord, FVError> {
    if replicas < 100 {
        return Err(FVError::TooFewReplicas(replicas));
    }
    let params = rescaled_chain(m, n, fv)?;
    let times = [horizon];
    let results: Result<Vec<(f64, f64)>, ChainError> = (0..replicas)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replica_rng(seed, rep as u64);
            let path = moran::simulate(
                nu0,
                &params,
                horizon,
                std::slice::from_ref(f),
                &times,
                &mut rng,
            )?;
            let n_t = path.values[0][0] - path.initial_values[0] - path.drift_integrals[0][0];
            Ok((n_t, path.qv_integrals[0][0]))
        })
        .collect();
    let results = results?;
    let samples: Vec<f64> = results.iter().map(|r| r.0).collect();
    let rf = replicas as f64;
    let mean = samples.iter().sum::<f64>() / rf;
    let variance = samples.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (rf - 1.0);
    let se = (variance / rf).sqrt();
    let qv_mean = results.iter().map(|r| r.1).sum::<f64>() / rf;
    let mean_pass = mean.abs() <= 3.0 * se;
    let var_pass = if horizon == 0.0 {
        variance == 0.0 && qv_mean == 0.0
    } else {
        (variance - qv_mean).abs() <= 0.20 * qv_mean
    };
    Ok(FVStudyRecord {
        fv: *fv,
        m,
        n,
        horizon,
        replicas,
        seed,
        observable: f.name().to_string(),
        mean,
        se,
        variance,
        qv_mean,
        mean_pass,
        var_pass,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{AtomicMeasure, BetaSpec, GridDensity};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn fvp(sigma: f64, rho: f64, theta: f64, w: f64) -> FVParams {
        FVParams::new(sigma, rho, theta, w).unwrap()
    }

    #[test]
    fn rescaled_chain_substitution() {
        let fv = fvp(1.0, 1.0, 1.0, 1.0);
        let p = rescaled_chain(100, 100, &fv).unwrap();
        assert!((p.s - 0.01).abs() < 1e-15);
        assert!((p.r - 0.01).abs() < 1e-15);
        assert_eq!(p.time_factor, 100.0);

        let fv = fvp(0.0, 0.0, 2.0, 1.0);
        let m = 50;
        let n = group_size_for(m, &fv);
        assert_eq!(n, 100);
        let p = rescaled_chain(m, n, &fv).unwrap();
        assert!((p.n as f64 / p.m as f64 - fv.theta).abs() < 1e-15);
        assert_eq!(p.s, 0.0);
        assert_eq!(p.r, 0.0);
    }

    #[test]
    fn operator_a_examples() {
        let a1 = operator_a(&TestFunction::constant(1.0), 0.7);
        let a2 = operator_a(&TestFunction::identity(), 0.0);
        let a3 = operator_a(&TestFunction::power(2), 1.0);
        for i in 0..=10 {
            let x = i as f64 / 10.0;
            assert_eq!(a1.eval(x), 0.0);
            assert_eq!(a2.eval(x), 0.0);
            assert!((a3.eval(x) - x * (1.0 - x) * (2.0 - 2.0 * x)).abs() < 1e-14);
        }
    }

    #[test]
    fn limit_drift_examples() {
        let fv = fvp(0.3, 1.0, 1.0, 1.0);
        let d0 = AtomicMeasure::delta(0.0).unwrap();
        assert_eq!(limit_drift(&d0, &TestFunction::power(2), &fv).unwrap(), 0.0);

        let uni = GridMeasure::uniform(10);
        let one = TestFunction::constant(1.0);
        assert!(limit_drift(&uni, &one, &fv).unwrap().abs() < 1e-14);

        // sigma = 0, w*theta*rho = 1, f = x: drift = Var(x)
        let fv = fvp(0.0, 1.0, 1.0, 1.0);
        let f = TestFunction::identity();
        let drift = limit_drift(&uni, &f, &fv).unwrap();
        // brute-force double sum over the atoms
        let atoms = uni.point_masses().unwrap();
        let mut brute = 0.0;
        for &(x, wx) in &atoms {
            brute += wx * x * x;
        }
        let mean: f64 = atoms.iter().map(|(x, w)| w * x).sum();
        brute -= mean * mean;
        assert!((drift - brute).abs() < 1e-12, "{drift} vs {brute}");
    }

    #[test]
    fn limit_qv_examples() {
        let fv = fvp(0.0, 0.0, 1.0, 1.0);
        let f = TestFunction::identity();
        let point = AtomicMeasure::delta(0.4).unwrap();
        assert_eq!(limit_qv_rate(&point, &f, &fv).unwrap(), 0.0);

        let uni = GridMeasure::uniform(6);
        assert!(limit_qv_rate(&uni, &TestFunction::constant(2.0), &fv).unwrap() < 1e-13);

        let ends = AtomicMeasure::new(vec![(0.0, 0.5), (1.0, 0.5)]).unwrap();
        let qv = limit_qv_rate(&ends, &f, &fv).unwrap();
        assert!((qv - 0.5).abs() < 1e-14, "{qv}");

        // positivity on random atomic measures
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        for _ in 0..20 {
            let atoms: Vec<(f64, f64)> =
                (0..4).map(|_| (rng.gen(), rng.gen::<f64>() + 0.1)).collect();
            let nu = AtomicMeasure::new(atoms).unwrap();
            assert!(limit_qv_rate(&nu, &TestFunction::power(2), &fv).unwrap() >= 0.0);
        }
    }

    #[test]
    fn rescaled_drift_matches_chain_functional() {
        let fv = fvp(1.2, 0.8, 1.0, 1.3);
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let fs = [TestFunction::power(2), TestFunction::poly(&[0.5, -1.0, 0.3])];
        for _ in 0..20 {
            let m = rng.gen_range(2..=8);
            let n = rng.gen_range(2..=8);
            let p = rescaled_chain(m, n, &fv).unwrap();
            let counts: Vec<u32> = (0..m).map(|_| rng.gen_range(0..=n) as u32).collect();
            let st = ChainState::new(counts, &p).unwrap();
            for f in &fs {
                let direct = rescaled_drift(&st, &p, f);
                let via_chain = p.time_factor * moran::drift_functional(&st, &p, f);
                assert!(
                    (direct - via_chain).abs() < 1e-12 * (1.0 + direct.abs()),
                    "{direct} vs {via_chain}"
                );
            }
        }
    }

    #[test]
    fn rescaled_qv_matches_chain_functional_at_square_aspect() {
        // the displayed prelimit QV agrees with n x the chain QV when n = m
        let fv = fvp(1.0, 1.0, 1.0, 1.0);
        let mut rng = ChaCha12Rng::seed_from_u64(14);
        for _ in 0..10 {
            let m = rng.gen_range(2..=8);
            let p = rescaled_chain(m, m, &fv).unwrap();
            let counts: Vec<u32> = (0..m).map(|_| rng.gen_range(0..=m) as u32).collect();
            let st = ChainState::new(counts, &p).unwrap();
            let f = TestFunction::power(2);
            let direct = rescaled_qv(&st, &p, &f);
            let via_chain = p.time_factor * moran::qv_functional(&st, &p, &f);
            assert!(
                (direct - via_chain).abs() < 1e-12 * (1.0 + direct.abs()),
                "{direct} vs {via_chain}"
            );
        }
    }

    /// Deterministic quantile placement of m group counts approximating nu.
    fn quantile_state(nu: &impl Measure, m: usize, n: usize, p: &ChainParams) -> ChainState {
        let cdf = nu.cdf();
        let counts: Vec<u32> = (0..m)
            .map(|g| {
                let q = (g as f64 + 0.5) / m as f64;
                // invert the CDF by bisection on [0,1]
                let (mut lo, mut hi) = (0.0, 1.0);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if cdf.eval_right(mid) < q {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                ((0.5 * (lo + hi)) * n as f64).round() as u32
            })
            .collect();
        ChainState::new(counts, p).unwrap()
    }

    #[test]
    fn rescaled_drift_converges_to_limit() {
        let fv = fvp(1.0, 1.0, 1.0, 1.0);
        let nu = BetaSpec::new(5.0, 2.0).unwrap().to_grid_density().unwrap();
        let f = TestFunction::power(2);
        let target = limit_drift(&nu, &f, &fv).unwrap();
        let mut prev = f64::INFINITY;
        for size in [50usize, 100, 200] {
            let p = rescaled_chain(size, size, &fv).unwrap();
            let st = quantile_state(&nu, size, size, &p);
            let err = (rescaled_drift(&st, &p, &f) - target).abs();
            assert!(err < prev, "error not decreasing at {size}: {err} vs {prev}");
            prev = err;
        }
        assert!(prev < 0.02, "final error {prev}");
    }

    #[test]
    fn rescaled_qv_converges_to_limit() {
        let fv = fvp(0.5, 1.0, 1.0, 1.0);
        let nu = GridDensity::from_fn((0.0, 1.0), |x| 2.0 * (1.0 - x)).unwrap();
        let f = TestFunction::identity();
        let target = limit_qv_rate(&nu, &f, &fv).unwrap();
        let mut prev = f64::INFINITY;
        for size in [50usize, 100, 200] {
            let p = rescaled_chain(size, size, &fv).unwrap();
            let st = quantile_state(&nu, size, size, &p);
            let err = (rescaled_qv(&st, &p, &f) - target).abs();
            assert!(err < prev, "error not decreasing at {size}: {err} vs {prev}");
            prev = err;
        }
        assert!(prev < 0.02, "final error {prev}");
    }

    #[test]
    fn study_neutral_case() {
        let fv = fvp(0.0, 0.0, 1.0, 1.0);
        let nu0 = GridMeasure::uniform(30);
        let rec = fv_martingale_study(
            &nu0,
            30,
            30,
            &fv,
            &TestFunction::identity(),
            0.3,
            200,
            31,
        )
        .unwrap();
        assert!(rec.mean_pass, "mean {} vs SE {}", rec.mean, rec.se);
        assert!(rec.var_pass, "var {} vs qv {}", rec.variance, rec.qv_mean);
    }

    #[test]
    fn study_selected_case() {
        let fv = fvp(1.0, 1.0, 1.0, 1.0);
        let nu0 = GridMeasure::uniform(30);
        let rec = fv_martingale_study(
            &nu0,
            30,
            30,
            &fv,
            &TestFunction::identity(),
            0.3,
            200,
            55,
        )
        .unwrap();
        assert!(rec.mean_pass, "mean {} vs SE {}", rec.mean, rec.se);
        assert!(rec.var_pass, "var {} vs qv {}", rec.variance, rec.qv_mean);
    }

    #[test]
    fn study_zero_horizon() {
        let fv = fvp(1.0, 1.0, 1.0, 1.0);
        let nu0 = GridMeasure::uniform(10);
        let rec =
            fv_martingale_study(&nu0, 10, 10, &fv, &TestFunction::identity(), 0.0, 100, 1).unwrap();
        assert!(rec.samples.iter().all(|s| *s == 0.0));
        assert!(rec.var_pass);
    }

    #[test]
    fn study_rejects_few_replicas() {
        let fv = fvp(0.0, 0.0, 1.0, 1.0);
        let nu0 = GridMeasure::uniform(5);
        assert!(matches!(
            fv_martingale_study(&nu0, 5, 5, &fv, &TestFunction::identity(), 0.1, 50, 1),
            Err(FVError::TooFewReplicas(50))
        ));
    }
}
