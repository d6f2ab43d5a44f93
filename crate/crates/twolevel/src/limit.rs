//! The deterministic transport limit: exact solution operator, the atom ODE
//! system, fixed points, long-time classification and closed-form oracles.
//!
//! The characteristic flow is the Möbius map φ_t(p) = p e^{-t}/(1-p+p e^{-t}).
//! A solution is the pushforward of μ_0 under φ_t with density reweighting;
//! the time-dependent scalar in the exact formula is measure independent, so
//! it is dropped and replaced by normalization to total mass one, with h(t)
//! recovered afterwards as the mean.

use crate::measures::{
    AtomicMeasure, BetaSpec, GridDensity, LimitMeasure, Measure, MeasureError, Mixture,
    TailDescriptor,
};
use crate::quad;
use crate::testfn::TestFunction;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta as beta_fn;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LimitError {
    #[error("lambda must be positive, got {0}")]
    BadLambda(f64),
    #[error("argument {0} outside [0,1]")]
    OutOfRange(f64),
    #[error("time {0} must be nonnegative and finite")]
    BadTime(f64),
    #[error("density grid too coarse: refining the grid changed the mass by {0:.3e}")]
    Resolution(f64),
    #[error("ODE step too large: a weight drifted to {0}")]
    StepSize(f64),
    #[error("need at least 3 trajectory samples, got {0}")]
    TooFewSamples(usize),
    #[error("tail behavior unclassifiable without metadata")]
    Unclassifiable,
    #[error("invalid example parameters: {0}")]
    BadExample(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

// ---------------------------------------------------------------------------
// Characteristic flow
// ---------------------------------------------------------------------------

/// The characteristic flow φ_t and its inverse at a fixed time.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FlowMap {
    pub t: f64,
}

impl FlowMap {
    pub fn new(t: f64) -> Result<Self, LimitError> {
        if !t.is_finite() || t < 0.0 {
            return Err(LimitError::BadTime(t));
        }
        Ok(Self { t })
    }

    pub(crate) fn phi_unchecked(&self, p: f64) -> f64 {
        let a = (-self.t).exp();
        p * a / (1.0 - p + p * a)
    }

    pub(crate) fn phi_inv_unchecked(&self, x: f64) -> f64 {
        let a = (-self.t).exp();
        x / (a + x * (1.0 - a))
    }

    pub fn phi(&self, p: f64) -> Result<f64, LimitError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(LimitError::OutOfRange(p));
        }
        Ok(self.phi_unchecked(p))
    }

    pub fn phi_inv(&self, x: f64) -> Result<f64, LimitError> {
        if !(0.0..=1.0).contains(&x) {
            return Err(LimitError::OutOfRange(x));
        }
        Ok(self.phi_inv_unchecked(x))
    }
}

/// φ_t(p) = p e^{-t}/(1 - p + p e^{-t}).
pub fn phi(t: f64, p: f64) -> Result<f64, LimitError> {
    FlowMap::new(t)?.phi(p)
}

/// φ_t^{-1}(x) = x/(e^{-t} + x(1 - e^{-t})).
pub fn phi_inv(t: f64, x: f64) -> Result<f64, LimitError> {
    FlowMap::new(t)?.phi_inv(x)
}

// ---------------------------------------------------------------------------
// Parameters and state
// ---------------------------------------------------------------------------

/// The single parameter of the limit dynamics, λ = wr/s.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LimitParams {
    pub lambda: f64,
}

impl LimitParams {
    pub fn new(lambda: f64) -> Result<Self, LimitError> {
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(LimitError::BadLambda(lambda));
        }
        Ok(Self { lambda })
    }

    /// λ from the chain rates.
    pub fn from_rates(w: f64, r: f64, s: f64) -> Result<Self, LimitError> {
        Self::new(w * r / s)
    }
}

/// Solution snapshot at time `t` with the recorded mean history.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolutionState {
    pub measure: LimitMeasure,
    pub t: f64,
    pub h_history: Vec<(f64, f64)>,
}

/// Mean of the current measure, appended to the state's history.
pub fn h_of_t(state: &mut SolutionState) -> f64 {
    let h = state.measure.mean();
    state.h_history.push((state.t, h));
    h
}

// ---------------------------------------------------------------------------
// The solution operator
// ---------------------------------------------------------------------------

/// Relative mass drift between the working and a refined grid above which a
/// transported density is rejected as under-resolved.
const RESOLUTION_TOL: f64 = 1e-6;

/// Transport a measure by time t; returns the unnormalized mass factor
/// (common scalar dropped) and the internally normalized measure.
fn transport(mu: &LimitMeasure, lambda: f64, t: f64) -> Result<(f64, LimitMeasure), LimitError> {
    let flow = FlowMap::new(t)?;
    let a = (-t).exp();
    match mu {
        LimitMeasure::Atomic(am) => {
            let atoms: Vec<(f64, f64)> = am
                .atoms
                .iter()
                .map(|&(p, w)| {
                    (
                        flow.phi_unchecked(p),
                        w * (1.0 - p + p * a).powf(-lambda),
                    )
                })
                .collect();
            let mass: f64 = atoms.iter().map(|x| x.1).sum();
            Ok((mass, LimitMeasure::Atomic(AtomicMeasure::new(atoms)?)))
        }
        LimitMeasure::Beta(b) => {
            if (b.lambda - lambda).abs() < 1e-9 {
                // fixed point of the flow shape; only its mass grows
                Ok((((lambda - b.alpha) * t).exp(), LimitMeasure::Beta(*b)))
            } else {
                let spec = *b;
                transport_density((0.0, 1.0), move |x| spec.density(x), None, lambda, t)
            }
        }
        LimitMeasure::Density(d) => {
            let d2 = d.clone();
            transport_density(
                d.support,
                move |x| d2.eval(x),
                d.tail_hint,
                lambda,
                t,
            )
        }
        LimitMeasure::Mixture(mix) => {
            let mut parts = Vec::with_capacity(mix.components.len());
            let mut total = 0.0;
            for c in &mix.components {
                let (m, transported) = transport(&c.measure, lambda, t)?;
                total += c.weight * m;
                parts.push((c.weight * m, transported));
            }
            Ok((total, LimitMeasure::Mixture(Mixture::new(parts)?)))
        }
    }
}

/// Pullback transport of a density given by `eval` on `support`.
fn transport_density(
    support: (f64, f64),
    eval: impl Fn(f64) -> f64,
    tail_hint: Option<TailDescriptor>,
    lambda: f64,
    t: f64,
) -> Result<(f64, LimitMeasure), LimitError> {
    let flow = FlowMap::new(t)?;
    let a = (-t).exp();
    let new_support = (flow.phi_unchecked(support.0), flow.phi_unchecked(support.1));
    let shape = |y: f64| {
        let d = a + y * (1.0 - a);
        eval(flow.phi_inv_unchecked(y)) * d.powf(lambda - 2.0)
    };
    let (nodes, weights) = quad::default_grid(new_support.0, new_support.1);
    let values: Vec<f64> = nodes.iter().map(|y| shape(*y)).collect();
    let mass_integral: f64 = values.iter().zip(&weights).map(|(v, w)| v * w).sum();
    // refinement check against under-resolution of the pulled-back density
    let (rn, rw) = quad::panel_grid(new_support.0, new_support.1, 32, 64);
    let refined: f64 = rn.iter().zip(&rw).map(|(y, w)| shape(*y) * w).sum();
    let drift = (refined - mass_integral).abs() / refined.max(f64::MIN_POSITIVE);
    if !mass_integral.is_finite() || mass_integral <= 0.0 || drift > RESOLUTION_TOL {
        return Err(LimitError::Resolution(drift));
    }
    let mut out = GridDensity::new(
        nodes,
        values,
        weights,
        crate::measures::QuadRule::GaussLegendre,
        new_support,
    )?;
    if let Some(TailDescriptor::PowerTail { alpha, c }) = tail_hint {
        // near 1 the pullback contracts by e^{-t}, shifting the constant
        out = out.with_tail_hint(TailDescriptor::PowerTail {
            alpha,
            c: c * (-t * (alpha - 1.0)).exp() / mass_integral,
        });
    }
    let mass = ((lambda - 1.0) * t).exp() * mass_integral;
    Ok((mass, LimitMeasure::Density(out)))
}

/// Apply the solution operator for time `t` to `mu0`.
pub fn evolve(mu0: &LimitMeasure, params: &LimitParams, t: f64) -> Result<SolutionState, LimitError> {
    let (_, measure) = transport(mu0, params.lambda, t)?;
    Ok(SolutionState {
        measure,
        t,
        h_history: Vec::new(),
    })
}

/// Solution snapshots at times k·dt, k = 0..=round(t_end/dt), each obtained
/// by transporting mu0 directly.
pub fn trajectory(
    mu0: &LimitMeasure,
    params: &LimitParams,
    t_end: f64,
    dt: f64,
) -> Result<Vec<SolutionState>, LimitError> {
    if !(dt > 0.0) {
        return Err(LimitError::BadTime(dt));
    }
    let steps = (t_end / dt).round() as usize;
    (0..=steps)
        .map(|k| evolve(mu0, params, k as f64 * dt))
        .collect()
}

// ---------------------------------------------------------------------------
// Atom ODE system (redundant path for cross-validation)
// ---------------------------------------------------------------------------

/// Integrate dx_i/dt = -x_i(1-x_i), da_i/dt = λ a_i (x_i - Σ a_j x_j) with
/// RK4 at fixed step `dt`.
pub fn evolve_atoms_ode(
    mu0: &AtomicMeasure,
    params: &LimitParams,
    t: f64,
    dt: f64,
) -> Result<AtomicMeasure, LimitError> {
    if !(dt > 0.0) {
        return Err(LimitError::BadTime(dt));
    }
    if !t.is_finite() || t < 0.0 {
        return Err(LimitError::BadTime(t));
    }
    let lambda = params.lambda;
    let n = mu0.atoms.len();
    let mut xs: Vec<f64> = mu0.atoms.iter().map(|a| a.0).collect();
    let mut ws: Vec<f64> = mu0.atoms.iter().map(|a| a.1).collect();

    let deriv = |xs: &[f64], ws: &[f64], dx: &mut [f64], dw: &mut [f64]| {
        let mean: f64 = xs.iter().zip(ws).map(|(x, w)| x * w).sum();
        for i in 0..n {
            dx[i] = -xs[i] * (1.0 - xs[i]);
            dw[i] = lambda * ws[i] * (xs[i] - mean);
        }
    };

    let mut remaining = t;
    let (mut k1x, mut k1w) = (vec![0.0; n], vec![0.0; n]);
    let (mut k2x, mut k2w) = (vec![0.0; n], vec![0.0; n]);
    let (mut k3x, mut k3w) = (vec![0.0; n], vec![0.0; n]);
    let (mut k4x, mut k4w) = (vec![0.0; n], vec![0.0; n]);
    let (mut tx, mut tw) = (vec![0.0; n], vec![0.0; n]);
    while remaining > 1e-15 {
        let h = dt.min(remaining);
        deriv(&xs, &ws, &mut k1x, &mut k1w);
        for i in 0..n {
            tx[i] = xs[i] + 0.5 * h * k1x[i];
            tw[i] = ws[i] + 0.5 * h * k1w[i];
        }
        deriv(&tx, &tw, &mut k2x, &mut k2w);
        for i in 0..n {
            tx[i] = xs[i] + 0.5 * h * k2x[i];
            tw[i] = ws[i] + 0.5 * h * k2w[i];
        }
        deriv(&tx, &tw, &mut k3x, &mut k3w);
        for i in 0..n {
            tx[i] = xs[i] + h * k3x[i];
            tw[i] = ws[i] + h * k3w[i];
        }
        deriv(&tx, &tw, &mut k4x, &mut k4w);
        for i in 0..n {
            xs[i] += h / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
            ws[i] += h / 6.0 * (k1w[i] + 2.0 * k2w[i] + 2.0 * k3w[i] + k4w[i]);
        }
        for w in &ws {
            if *w < -1e-6 || *w > 1.0 + 1e-6 {
                return Err(LimitError::StepSize(*w));
            }
        }
        remaining -= h;
    }
    let atoms: Vec<(f64, f64)> = xs
        .into_iter()
        .zip(ws)
        .map(|(x, w)| (x.clamp(0.0, 1.0), w.max(0.0)))
        .filter(|a| a.1 > 0.0)
        .collect();
    Ok(AtomicMeasure::new(atoms)?)
}

// ---------------------------------------------------------------------------
// Weak-form residual
// ---------------------------------------------------------------------------

/// Central-difference d/dt⟨f, μ_t⟩ minus the weak-form right-hand side
/// -⟨x(1-x)f', μ⟩ + λ(⟨xf, μ⟩ - ⟨f, μ⟩⟨x, μ⟩) at each interior sample.
pub fn weak_residual(
    traj: &[SolutionState],
    f: &TestFunction,
    params: &LimitParams,
) -> Result<Vec<(f64, f64)>, LimitError> {
    if traj.len() < 3 {
        return Err(LimitError::TooFewSamples(traj.len()));
    }
    let lambda = params.lambda;
    let fg = f.clone();
    let drift_fn = TestFunction::value_only("x(1-x)f'", move |x| x * (1.0 - x) * fg.deriv(x));
    let fx = f.clone();
    let xf = TestFunction::value_only("x*f", move |x| x * fx.eval(x));
    let ident = TestFunction::identity();

    let vals: Vec<f64> = traj
        .iter()
        .map(|s| s.measure.integrate(f))
        .collect::<Result<_, _>>()?;
    let mut out = Vec::with_capacity(traj.len() - 2);
    for k in 1..traj.len() - 1 {
        let dt_back = traj[k].t - traj[k - 1].t;
        let dt_fwd = traj[k + 1].t - traj[k].t;
        let ddt = (vals[k + 1] - vals[k - 1]) / (dt_back + dt_fwd);
        let mu = &traj[k].measure;
        let rhs = -mu.integrate(&drift_fn)?
            + lambda * (mu.integrate(&xf)? - vals[k] * mu.integrate(&ident)?);
        out.push((traj[k].t, ddt - rhs));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Semigroup of the flow
// ---------------------------------------------------------------------------

/// (P_t f)(x) = f(x e^{-st}/(1 - x + x e^{-st})), with derivatives by the
/// chain rule through the Möbius map.
pub fn flux_semigroup(f: &TestFunction, t: f64, s: f64) -> TestFunction {
    let a = (-s * t).exp();
    let name = format!("P_{t}[{}]", f.name());
    f.compose(
        name,
        move |x| {
            let d = 1.0 - x * (1.0 - a);
            x * a / d
        },
        move |x| {
            let d = 1.0 - x * (1.0 - a);
            a / (d * d)
        },
        move |x| {
            let d = 1.0 - x * (1.0 - a);
            2.0 * a * (1.0 - a) / (d * d * d)
        },
    )
}

// ---------------------------------------------------------------------------
// Long-time classification
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum SteadyState {
    Delta1,
    Delta0,
    BetaLimit(BetaSpec),
}

impl SteadyState {
    pub fn limit_measure(&self) -> LimitMeasure {
        match self {
            Self::Delta1 => LimitMeasure::delta(1.0).expect("1 is in range"),
            Self::Delta0 => LimitMeasure::delta(0.0).expect("0 is in range"),
            Self::BetaLimit(b) => LimitMeasure::Beta(*b),
        }
    }
}

/// Basin of attraction from the right-endpoint tail of μ_0.
pub fn classify_longtime(tail: &TailDescriptor, params: &LimitParams) -> SteadyState {
    match tail {
        TailDescriptor::MassAtOne => SteadyState::Delta1,
        TailDescriptor::VanishingNearOne => SteadyState::Delta0,
        TailDescriptor::PowerTail { alpha, .. } => {
            if *alpha < params.lambda {
                SteadyState::BetaLimit(
                    BetaSpec::new(params.lambda, *alpha).expect("alpha < lambda checked"),
                )
            } else {
                SteadyState::Delta0
            }
        }
    }
}

/// Right-endpoint tail of a measure from its analytic family; no numerical
/// limit estimation is attempted.
pub fn tail_of(mu0: &LimitMeasure) -> Result<TailDescriptor, LimitError> {
    match mu0 {
        LimitMeasure::Atomic(am) => {
            if am.atoms.iter().any(|a| a.0 == 1.0) {
                Ok(TailDescriptor::MassAtOne)
            } else {
                Ok(TailDescriptor::VanishingNearOne)
            }
        }
        LimitMeasure::Beta(b) => Ok(TailDescriptor::PowerTail {
            alpha: b.alpha,
            c: 1.0 / (b.alpha * beta_fn(b.a(), b.b())),
        }),
        LimitMeasure::Density(d) => {
            if d.support.1 < 1.0 {
                Ok(TailDescriptor::VanishingNearOne)
            } else {
                d.tail_hint.ok_or(LimitError::Unclassifiable)
            }
        }
        LimitMeasure::Mixture(mix) => {
            let mut best: Option<(f64, f64)> = None; // (alpha, c) of slowest decay
            for c in &mix.components {
                match tail_of(&c.measure)? {
                    TailDescriptor::MassAtOne => return Ok(TailDescriptor::MassAtOne),
                    TailDescriptor::VanishingNearOne => {}
                    TailDescriptor::PowerTail { alpha, c: cc } => {
                        let wc = c.weight * cc;
                        best = Some(match best {
                            None => (alpha, wc),
                            Some((ba, _)) if alpha < ba - 1e-12 => (alpha, wc),
                            Some((ba, bc)) if (alpha - ba).abs() <= 1e-12 => (ba, bc + wc),
                            Some(b) => b,
                        });
                    }
                }
            }
            Ok(match best {
                Some((alpha, c)) => TailDescriptor::PowerTail { alpha, c },
                None => TailDescriptor::VanishingNearOne,
            })
        }
    }
}

// ---------------------------------------------------------------------------
// Closed-form example oracles
// ---------------------------------------------------------------------------

/// Extra parameters of the worked examples; unused fields may stay None.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExampleParams {
    /// Initial atom position (example 1).
    pub x0: Option<f64>,
    /// Truncation cutoff (example 4).
    pub c: Option<f64>,
    /// Beta tail exponent (example 5).
    pub alpha: Option<f64>,
    /// Weight of the atom at 0 (example 5).
    pub a: Option<f64>,
}

fn need(v: Option<f64>, what: &str) -> Result<f64, LimitError> {
    v.ok_or_else(|| LimitError::BadExample(format!("missing parameter {what}")))
}

/// Initial condition of each worked example.
pub fn example_initial(
    example_id: u8,
    params: &LimitParams,
    ex: &ExampleParams,
) -> Result<LimitMeasure, LimitError> {
    match example_id {
        1 => {
            let x0 = need(ex.x0, "x0")?;
            if !(0.0..=1.0).contains(&x0) {
                return Err(LimitError::BadExample(format!("x0 = {x0} outside [0,1]")));
            }
            Ok(LimitMeasure::delta(x0)?)
        }
        2 => Ok(LimitMeasure::uniform()),
        3 => Ok(LimitMeasure::Density(
            GridDensity::from_fn((0.0, 1.0), |x| 2.0 * (1.0 - x))?
                .with_tail_hint(TailDescriptor::PowerTail { alpha: 2.0, c: 1.0 }),
        )),
        4 => {
            let c = need(ex.c, "c")?;
            if !(c > 0.0 && c < 1.0) {
                return Err(LimitError::BadExample(format!("cutoff c = {c} outside (0,1)")));
            }
            Ok(LimitMeasure::Density(GridDensity::from_fn((0.0, c), |_| 1.0)?))
        }
        5 => {
            let alpha = need(ex.alpha, "alpha")?;
            let a = need(ex.a, "a")?;
            if !(0.0..1.0).contains(&a) {
                return Err(LimitError::BadExample(format!("weight a = {a} outside [0,1)")));
            }
            Ok(LimitMeasure::mixture(vec![
                (a, LimitMeasure::delta(0.0)?),
                (1.0 - a, LimitMeasure::beta(params.lambda, alpha)?),
            ])?)
        }
        other => Err(LimitError::BadExample(format!("unknown example {other}"))),
    }
}

/// Density of the uniform-start solution: N(t)·(e^{-t}+x(1-e^{-t}))^{λ-2}.
pub fn ex2_density(lambda: f64, t: f64, x: f64) -> f64 {
    let a = (-t).exp();
    let norm = if (lambda - 1.0).abs() < 1e-9 {
        (1.0 - a) / t
    } else {
        (lambda - 1.0) * (1.0 - a) / (1.0 - (-(lambda - 1.0) * t).exp())
    };
    norm * (a + x * (1.0 - a)).powf(lambda - 2.0)
}

/// Normalizer I(t) = ∫ (1-y) D^{λ-3} dy of the 2(1-x)-start solution.
fn ex3_norm(lambda: f64, t: f64) -> f64 {
    let a = (-t).exp();
    // F = ∫_a^1 (1-u) u^{λ-3} du
    let f = if (lambda - 2.0).abs() < 1e-9 {
        -a.ln() - (1.0 - a)
    } else if (lambda - 1.0).abs() < 1e-9 {
        (1.0 / a - 1.0) + a.ln()
    } else {
        (1.0 - a.powf(lambda - 2.0)) / (lambda - 2.0) - (1.0 - a.powf(lambda - 1.0)) / (lambda - 1.0)
    };
    f / ((1.0 - a) * (1.0 - a))
}

/// Density of the 2(1-x)-start solution: (1-x)·D^{λ-3} normalized.
pub fn ex3_density(lambda: f64, t: f64, x: f64) -> f64 {
    let a = (-t).exp();
    (1.0 - x) * (a + x * (1.0 - a)).powf(lambda - 3.0) / ex3_norm(lambda, t)
}

/// Density of the truncated-uniform solution on [0, φ_t(c)]: D^{λ-2}/J.
pub fn ex4_density(lambda: f64, t: f64, c: f64, x: f64) -> f64 {
    let a = (-t).exp();
    let dc = a / (1.0 - c + c * a); // D at the moving cutoff
    let j = if (lambda - 1.0).abs() < 1e-9 {
        (dc / a).ln() / (1.0 - a)
    } else {
        (dc.powf(lambda - 1.0) - a.powf(lambda - 1.0)) / ((lambda - 1.0) * (1.0 - a))
    };
    (a + x * (1.0 - a)).powf(lambda - 2.0) / j
}

/// The paper's closed-form solution of each worked example at time `t`.
pub fn reference_solution(
    example_id: u8,
    params: &LimitParams,
    ex: &ExampleParams,
    t: f64,
) -> Result<LimitMeasure, LimitError> {
    if !t.is_finite() || t < 0.0 {
        return Err(LimitError::BadTime(t));
    }
    if t == 0.0 {
        return example_initial(example_id, params, ex);
    }
    let lambda = params.lambda;
    match example_id {
        1 => {
            let x0 = need(ex.x0, "x0")?;
            Ok(LimitMeasure::delta(phi(t, x0)?)?)
        }
        2 => {
            let eta1 = ex2_density(lambda, t, 1.0);
            Ok(LimitMeasure::Density(
                GridDensity::from_fn((0.0, 1.0), move |x| ex2_density(lambda, t, x))?
                    .with_tail_hint(TailDescriptor::PowerTail { alpha: 1.0, c: eta1 }),
            ))
        }
        3 => {
            // η(x) ≈ (1-x)/I near 1, so μ_t([1-x,1]) ≈ x²/(2I)
            let c = 0.5 / ex3_norm(lambda, t);
            Ok(LimitMeasure::Density(
                GridDensity::from_fn((0.0, 1.0), move |x| ex3_density(lambda, t, x))?
                    .with_tail_hint(TailDescriptor::PowerTail { alpha: 2.0, c }),
            ))
        }
        4 => {
            let c = need(ex.c, "c")?;
            let cutoff = phi(t, c)?;
            Ok(LimitMeasure::Density(GridDensity::from_fn(
                (0.0, cutoff),
                move |x| ex4_density(lambda, t, c, x),
            )?))
        }
        5 => {
            let alpha = need(ex.alpha, "alpha")?;
            let a0 = need(ex.a, "a")?;
            let growth = ((lambda - alpha) * t).exp();
            let atom_w = a0 / (a0 + (1.0 - a0) * growth);
            Ok(LimitMeasure::mixture(vec![
                (atom_w, LimitMeasure::delta(0.0)?),
                (1.0 - atom_w, LimitMeasure::beta(lambda, alpha)?),
            ])?)
        }
        other => Err(LimitError::BadExample(format!("unknown example {other}"))),
    }
}
