//! Exact event-driven simulation of the two-level Moran process: m groups of
//! n individuals, individual birth-death within groups and group replication
//! weighted by type-G content, plus the semimartingale drift and quadratic
//! variation functionals used to validate the scaling limits.

use crate::measures::{GridMeasure, MeasureError};
use crate::testfn::TestFunction;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("initial measure lattice n = {got}, chain expects n = {expected}")]
    LatticeMismatch { expected: usize, got: usize },
    #[error("horizon {0} must be nonnegative and finite")]
    BadHorizon(f64),
    #[error("sample time {0} outside [0, horizon]")]
    BadSampleTime(f64),
    #[error("unknown observable {0}")]
    UnknownObservable(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

// ---------------------------------------------------------------------------
// Parameters and state
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct ChainParams {
    /// Number of groups.
    pub m: usize,
    /// Individuals per group.
    pub n: usize,
    /// Individual selection coefficient (type I replicates at rate 1+s).
    pub s: f64,
    /// Group selection coefficient (group fitness 1 + r k/n).
    pub r: f64,
    /// Ratio of group-level to individual-level event rates.
    pub w: f64,
    /// Clock speedup: the total event rate is multiplied by this factor, so
    /// recorded time advances by 1/time_factor per unit of chain time.
    pub time_factor: f64,
}

impl ChainParams {
    pub fn new(
        m: usize,
        n: usize,
        s: f64,
        r: f64,
        w: f64,
        time_factor: f64,
    ) -> Result<Self, ChainError> {
        if m == 0 || n == 0 {
            return Err(ChainError::BadParams("m and n must be positive".into()));
        }
        if !(s >= 0.0) || !(r >= 0.0) {
            return Err(ChainError::BadParams(format!("s = {s}, r = {r} must be >= 0")));
        }
        if !(w > 0.0) {
            return Err(ChainError::BadParams(format!("w = {w} must be > 0")));
        }
        if !(time_factor > 0.0) || !time_factor.is_finite() {
            return Err(ChainError::BadParams(format!(
                "time_factor = {time_factor} must be positive and finite"
            )));
        }
        Ok(Self { m, n, s, r, w, time_factor })
    }

    /// Chain clock in raw event time.
    pub fn unscaled(m: usize, n: usize, s: f64, r: f64, w: f64) -> Result<Self, ChainError> {
        Self::new(m, n, s, r, w, 1.0)
    }

    /// Clock sped up by 1/s so that drift per recorded time unit matches the
    /// deterministic transport equation (requires s > 0).
    pub fn det_scaled(m: usize, n: usize, s: f64, r: f64, w: f64) -> Result<Self, ChainError> {
        if !(s > 0.0) {
            return Err(ChainError::BadParams(format!(
                "deterministic scaling needs s > 0, got {s}"
            )));
        }
        Self::new(m, n, s, r, w, 1.0 / s)
    }

    /// λ = wr/s of the associated transport limit.
    pub fn lambda(&self) -> f64 {
        self.w * self.r / self.s
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ChainState {
    /// Type-G count per group, each in 0..=n.
    pub counts: Vec<u32>,
    /// Recorded (rescaled) time.
    pub time: f64,
}

impl ChainState {
    pub fn new(counts: Vec<u32>, params: &ChainParams) -> Result<Self, ChainError> {
        if counts.len() != params.m {
            return Err(ChainError::BadParams(format!(
                "expected {} groups, got {}",
                params.m,
                counts.len()
            )));
        }
        if counts.iter().any(|c| *c as usize > params.n) {
            return Err(ChainError::BadParams("count exceeds group size".into()));
        }
        Ok(Self { counts, time: 0.0 })
    }

    /// True when no event can change the empirical measure again: all groups
    /// hold the same count and that count is homogeneous (0 or n).
    pub fn is_absorbed(&self, params: &ChainParams) -> bool {
        let first = self.counts[0];
        (first == 0 || first as usize == params.n) && self.counts.iter().all(|c| *c == first)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    IndivUp,
    IndivDown,
    GroupCopy,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub time: f64,
    pub kind: EventKind,
    /// Group whose count changed.
    pub group: usize,
    /// Parent group of a copy event.
    pub parent: Option<usize>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct EventLog {
    pub events: Vec<EventRecord>,
}

// ---------------------------------------------------------------------------
// Rates
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct RateTable {
    /// Per-group k -> k+1 rate, k(n-k)/n.
    pub up: Vec<f64>,
    /// Per-group k -> k-1 rate, (1+s) k(n-k)/n.
    pub down: Vec<f64>,
    /// Per-parent-group copy weight summed over victims, w (1 + r k/n).
    pub parent: Vec<f64>,
    pub indiv_total: f64,
    pub group_total: f64,
    pub total: f64,
}

/// Transition rates out of `state` (unscaled chain time).
pub fn event_rates(state: &ChainState, params: &ChainParams) -> RateTable {
    let n = params.n as f64;
    let mut up = Vec::with_capacity(params.m);
    let mut down = Vec::with_capacity(params.m);
    let mut parent = Vec::with_capacity(params.m);
    let mut indiv_total = 0.0;
    let mut group_total = 0.0;
    for &k in &state.counts {
        let kf = k as f64;
        let base = kf * (n - kf) / n;
        up.push(base);
        down.push((1.0 + params.s) * base);
        indiv_total += (2.0 + params.s) * base;
        // ordered pairs (victim, parent): m victims at w/m each
        let p = params.w * (1.0 + params.r * kf / n);
        parent.push(p);
        group_total += p;
    }
    RateTable {
        up,
        down,
        parent,
        indiv_total,
        group_total,
        total: indiv_total + group_total,
    }
}

// ---------------------------------------------------------------------------
// Gillespie stepping
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepResult {
    Event(EventRecord),
    Absorbed,
}

/// One exact simulation step: exponential waiting time at the total rate
/// times the clock factor, then a transition drawn proportionally to rate.
pub fn gillespie_step<R: Rng + ?Sized>(
    state: &mut ChainState,
    params: &ChainParams,
    rng: &mut R,
) -> StepResult {
    if state.is_absorbed(params) {
        return StepResult::Absorbed;
    }
    let rates = event_rates(state, params);
    let u: f64 = rng.gen();
    let dt = -(1.0 - u).ln() / (rates.total * params.time_factor);
    state.time += dt;

    let mut pick = rng.gen::<f64>() * rates.total;
    if pick < rates.indiv_total {
        for g in 0..params.m {
            let block = rates.up[g] + rates.down[g];
            if pick < block {
                let kind = if pick < rates.up[g] {
                    state.counts[g] += 1;
                    EventKind::IndivUp
                } else {
                    state.counts[g] -= 1;
                    EventKind::IndivDown
                };
                return StepResult::Event(EventRecord {
                    time: state.time,
                    kind,
                    group: g,
                    parent: None,
                });
            }
            pick -= block;
        }
    }
    pick -= rates.indiv_total;
    // group copy: parent proportional to fitness, victim uniform
    let mut parent = params.m - 1;
    for (g, p) in rates.parent.iter().enumerate() {
        if pick < *p {
            parent = g;
            break;
        }
        pick -= p;
    }
    let victim = rng.gen_range(0..params.m);
    state.counts[victim] = state.counts[parent];
    StepResult::Event(EventRecord {
        time: state.time,
        kind: EventKind::GroupCopy,
        group: victim,
        parent: Some(parent),
    })
}

/// μ^{m,n} = (1/m) Σ δ_{counts[i]/n}.
pub fn empirical_measure(state: &ChainState, params: &ChainParams) -> GridMeasure {
    let mut weights = vec![0.0; params.n + 1];
    for &k in &state.counts {
        weights[k as usize] += 1.0;
    }
    for w in &mut weights {
        *w /= params.m as f64;
    }
    GridMeasure { n: params.n, weights }
}

// ---------------------------------------------------------------------------
// Drift and quadratic variation functionals
// ---------------------------------------------------------------------------

/// Site histogram (weights summing to 1) of the current state.
fn histogram(state: &ChainState, params: &ChainParams) -> Vec<f64> {
    empirical_measure(state, params).weights
}

fn functionals_from_hist(
    hist: &[f64],
    params: &ChainParams,
    f: &TestFunction,
) -> (f64, f64) {
    let n = params.n as f64;
    let mut indiv_drift = 0.0;
    let mut indiv_qv = 0.0;
    let (mut mf, mut mf2, mut mx, mut mxf, mut mxf2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (k, &mu) in hist.iter().enumerate() {
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
            let d_xx = n * n * (fp - 2.0 * fx + fm);
            let coeff = mu * x * (1.0 - x);
            indiv_drift += coeff * (d_xx / n - params.s * d_minus);
            indiv_qv += coeff * (d_plus * d_plus + (1.0 + params.s) * d_minus * d_minus) / n;
        }
    }
    let drift = indiv_drift + params.w * params.r * (mxf - mf * mx);
    // ΣΣ μ_i μ_j (1 + r x_j)(f_i - f_j)^2 expanded into moments
    let r = params.r;
    let pair = mf2 * (1.0 + r * mx) - 2.0 * mf * (mf + r * mxf) + (mf2 + r * mxf2);
    let qv = (indiv_qv + params.w * pair) / params.m as f64;
    (drift, qv)
}

/// Semimartingale drift a^{m,n}(f) of ⟨f, μ⟩ in unscaled chain time.
pub fn drift_functional(state: &ChainState, params: &ChainParams, f: &TestFunction) -> f64 {
    functionals_from_hist(&histogram(state, params), params, f).0
}

/// Conditional quadratic variation rate of the martingale part of ⟨f, μ⟩ in
/// unscaled chain time.
pub fn qv_functional(state: &ChainState, params: &ChainParams, f: &TestFunction) -> f64 {
    functionals_from_hist(&histogram(state, params), params, f).1
}

// ---------------------------------------------------------------------------
// Path simulation
// ---------------------------------------------------------------------------

/// Observable paths and exactly accumulated drift/QV integrals at the
/// requested sample times (all in recorded time units).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PathRecord {
    pub sample_times: Vec<f64>,
    pub observable_names: Vec<String>,
    /// values[obs][sample] = ⟨f, μ_t⟩.
    pub values: Vec<Vec<f64>>,
    /// ⟨f, μ_0⟩ at t = 0.
    pub initial_values: Vec<f64>,
    /// drift_integrals[obs][sample] = ∫_0^t a(f) dz in recorded units.
    pub drift_integrals: Vec<Vec<f64>>,
    /// qv_integrals[obs][sample] = accumulated ⟨M(f)⟩_t in recorded units.
    pub qv_integrals: Vec<Vec<f64>>,
    pub absorbed_at: Option<f64>,
    pub event_count: usize,
    pub final_counts: Vec<u32>,
}

/// Run one chain from i.i.d. initial counts to the horizon, recording every
/// observable and its drift/QV integrals at the sample times.
pub fn simulate<R: Rng + ?Sized>(
    initial: &GridMeasure,
    params: &ChainParams,
    horizon: f64,
    observables: &[TestFunction],
    sample_times: &[f64],
    rng: &mut R,
) -> Result<PathRecord, ChainError> {
    if initial.n != params.n {
        return Err(ChainError::LatticeMismatch {
            expected: params.n,
            got: initial.n,
        });
    }
    if !horizon.is_finite() || horizon < 0.0 {
        return Err(ChainError::BadHorizon(horizon));
    }
    for &ts in sample_times {
        if !(0.0..=horizon).contains(&ts) {
            return Err(ChainError::BadSampleTime(ts));
        }
    }
    if sample_times.windows(2).any(|w| w[0] > w[1]) {
        return Err(ChainError::BadParams("sample times must be nondecreasing".into()));
    }

    let counts: Vec<u32> = initial
        .sample(params.m, rng)
        .into_iter()
        .map(|k| k as u32)
        .collect();
    let mut state = ChainState::new(counts, params)?;

    let nobs = observables.len();
    let mut values = vec![Vec::with_capacity(sample_times.len()); nobs];
    let mut drift_int = vec![Vec::with_capacity(sample_times.len()); nobs];
    let mut qv_int = vec![Vec::with_capacity(sample_times.len()); nobs];
    // running ⟨f,μ⟩ and per-recorded-time drift/qv rates
    let mut cur = vec![0.0; nobs];
    let mut a_rate = vec![0.0; nobs];
    let mut q_rate = vec![0.0; nobs];
    let mut acc_a = vec![0.0; nobs];
    let mut acc_q = vec![0.0; nobs];

    let refresh = |state: &ChainState, cur: &mut [f64], a: &mut [f64], q: &mut [f64]| {
        let hist = histogram(state, params);
        for (i, f) in observables.iter().enumerate() {
            let n = params.n as f64;
            cur[i] = hist
                .iter()
                .enumerate()
                .filter(|(_, w)| **w > 0.0)
                .map(|(k, w)| w * f.eval(k as f64 / n))
                .sum();
            let (da, dq) = functionals_from_hist(&hist, params, f);
            a[i] = da * params.time_factor;
            q[i] = dq * params.time_factor;
        }
    };
    refresh(&state, &mut cur, &mut a_rate, &mut q_rate);
    let initial_values = cur.clone();

    let mut idx = 0;
    let mut t = 0.0;
    let mut event_count = 0usize;
    let mut absorbed_at = None;

    loop {
        let absorbed = state.is_absorbed(params);
        let t_next = if absorbed {
            f64::INFINITY
        } else {
            let rates = event_rates(&state, params);
            let u: f64 = rng.gen();
            t - (1.0 - u).ln() / (rates.total * params.time_factor)
        };
        if absorbed && absorbed_at.is_none() {
            absorbed_at = Some(t);
            for i in 0..nobs {
                a_rate[i] = 0.0;
                q_rate[i] = 0.0;
            }
        }
        // record every sample time reached before the next event
        while idx < sample_times.len() && sample_times[idx] <= t_next {
            let ts = sample_times[idx];
            for i in 0..nobs {
                values[i].push(cur[i]);
                drift_int[i].push(acc_a[i] + a_rate[i] * (ts - t));
                qv_int[i].push(acc_q[i] + q_rate[i] * (ts - t));
            }
            idx += 1;
        }
        if absorbed {
            // t_next = ∞ already flushed every remaining sample
            state.time = horizon;
            break;
        }
        if idx >= sample_times.len() && t_next > horizon {
            state.time = horizon;
            break;
        }
        // advance integrals across the full inter-event interval and jump
        let dt = t_next - t;
        for i in 0..nobs {
            acc_a[i] += a_rate[i] * dt;
            acc_q[i] += q_rate[i] * dt;
        }
        state.time = t_next;
        apply_random_event(&mut state, params, rng);
        event_count += 1;
        t = t_next;
        refresh(&state, &mut cur, &mut a_rate, &mut q_rate);
    }

    Ok(PathRecord {
        sample_times: sample_times.to_vec(),
        observable_names: observables.iter().map(|f| f.name().to_string()).collect(),
        values,
        initial_values,
        drift_integrals: drift_int,
        qv_integrals: qv_int,
        absorbed_at,
        event_count,
        final_counts: state.counts,
    })
}

/// Draw and apply one transition (the waiting time was already drawn).
fn apply_random_event<R: Rng + ?Sized>(state: &mut ChainState, params: &ChainParams, rng: &mut R) {
    let rates = event_rates(state, params);
    let mut pick = rng.gen::<f64>() * rates.total;
    if pick < rates.indiv_total {
        for g in 0..params.m {
            let block = rates.up[g] + rates.down[g];
            if pick < block {
                if pick < rates.up[g] {
                    state.counts[g] += 1;
                } else {
                    state.counts[g] -= 1;
                }
                return;
            }
            pick -= block;
        }
        // fall through only on floating-point edge; treat as last group down
        let g = params.m - 1;
        if state.counts[g] > 0 {
            state.counts[g] -= 1;
        }
        return;
    }
    pick -= rates.indiv_total;
    let mut parent = params.m - 1;
    for (g, p) in rates.parent.iter().enumerate() {
        if pick < *p {
            parent = g;
            break;
        }
        pick -= p;
    }
    let victim = rng.gen_range(0..params.m);
    state.counts[victim] = state.counts[parent];
}

/// M_t(f) = ⟨f, μ_t⟩ - ⟨f, μ_0⟩ - ∫_0^t a(f) dz per sample time.
pub fn martingale_residual(
    path: &PathRecord,
    f: &TestFunction,
) -> Result<Vec<(f64, f64)>, ChainError> {
    let i = path
        .observable_names
        .iter()
        .position(|name| name == f.name())
        .ok_or_else(|| ChainError::UnknownObservable(f.name().to_string()))?;
    Ok(path
        .sample_times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            (
                t,
                path.values[i][k] - path.initial_values[i] - path.drift_integrals[i][k],
            )
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Measure;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn params(m: usize, n: usize, s: f64, r: f64, w: f64) -> ChainParams {
        ChainParams::unscaled(m, n, s, r, w).unwrap()
    }

    #[test]
    fn rate_examples() {
        // homogeneous groups: no individual events
        let p = params(3, 4, 0.2, 1.0, 1.0);
        let st = ChainState::new(vec![0, 4, 4], &p).unwrap();
        assert_eq!(event_rates(&st, &p).indiv_total, 0.0);

        // m=1, n=2, k=1, s=0
        let p = params(1, 2, 0.0, 1.0, 1.0);
        let st = ChainState::new(vec![1], &p).unwrap();
        let rt = event_rates(&st, &p);
        assert!((rt.up[0] - 0.5).abs() < 1e-15);
        assert!((rt.down[0] - 0.5).abs() < 1e-15);

        // m=2, n=2, counts (0,2), r=w=1: total group-copy rate 3
        let p = params(2, 2, 0.0, 1.0, 1.0);
        let st = ChainState::new(vec![0, 2], &p).unwrap();
        let rt = event_rates(&st, &p);
        assert!((rt.group_total - 3.0).abs() < 1e-15);
        assert_eq!(rt.indiv_total, 0.0);
    }

    #[test]
    fn absorption_detected() {
        let p = params(3, 5, 0.1, 1.0, 1.0);
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        for counts in [vec![0, 0, 0], vec![5, 5, 5]] {
            let mut st = ChainState::new(counts, &p).unwrap();
            assert!(st.is_absorbed(&p));
            assert_eq!(gillespie_step(&mut st, &p, &mut rng), StepResult::Absorbed);
        }
        // mixed homogeneous groups are not absorbed: copies still act
        let st = ChainState::new(vec![0, 5, 0], &p).unwrap();
        assert!(!st.is_absorbed(&p));
        // interior homogeneous state is not absorbed either
        let st = ChainState::new(vec![2, 2, 2], &p).unwrap();
        assert!(!st.is_absorbed(&p));
    }

    #[test]
    fn single_group_two_outcome() {
        let p = params(1, 2, 0.0, 1.0, 1.0);
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        let reps = 100_000;
        let mut hits_top = 0usize;
        for _ in 0..reps {
            let mut st = ChainState::new(vec![1], &p).unwrap();
            loop {
                match gillespie_step(&mut st, &p, &mut rng) {
                    StepResult::Absorbed => break,
                    StepResult::Event(_) => {}
                }
            }
            if st.counts[0] == 2 {
                hits_top += 1;
            }
        }
        let freq = hits_top as f64 / reps as f64;
        let sigma = (0.25 / reps as f64).sqrt();
        assert!((freq - 0.5).abs() < 3.0 * sigma, "freq = {freq}");
    }

    #[test]
    fn fixed_seed_reproduces_event_log() {
        let p = params(4, 6, 0.3, 0.8, 1.5);
        let run = |seed: u64| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let mut st = ChainState::new(vec![1, 3, 5, 2], &p).unwrap();
            let mut log = EventLog::default();
            for _ in 0..200 {
                match gillespie_step(&mut st, &p, &mut rng) {
                    StepResult::Event(e) => log.events.push(e),
                    StepResult::Absorbed => break,
                }
            }
            (st, log)
        };
        let (s1, l1) = run(7);
        let (s2, l2) = run(7);
        assert_eq!(s1, s2);
        assert_eq!(l1.events, l2.events);
        assert!(l1.events.windows(2).all(|w| w[0].time < w[1].time));
    }

    #[test]
    fn empirical_measure_examples() {
        let p = params(3, 3, 0.0, 1.0, 1.0);
        let st = ChainState::new(vec![0, 2, 3], &p).unwrap();
        let mu = empirical_measure(&st, &p);
        let third = 1.0 / 3.0;
        assert_eq!(mu.weights, vec![third, 0.0, third, third]);

        let st = ChainState::new(vec![2, 2, 2], &p).unwrap();
        assert_eq!(empirical_measure(&st, &p).weights, vec![0.0, 0.0, 1.0, 0.0]);

        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..20 {
            let counts: Vec<u32> = (0..3).map(|_| rng.gen_range(0..=3)).collect();
            let st = ChainState::new(counts, &p).unwrap();
            let total: f64 = empirical_measure(&st, &p).weights.iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    /// Generator applied to ψ(v) = ⟨f, emp(v)⟩ by direct enumeration of the
    /// full transition set.
    fn brute_force(state: &ChainState, params: &ChainParams, f: &TestFunction) -> (f64, f64) {
        let n = params.n as f64;
        let psi = |counts: &[u32]| -> f64 {
            counts
                .iter()
                .map(|&k| f.eval(k as f64 / n))
                .sum::<f64>()
                / params.m as f64
        };
        let base = psi(&state.counts);
        let mut drift = 0.0;
        let mut qv = 0.0;
        let mut add = |rate: f64, counts: &[u32]| {
            let d = psi(counts) - base;
            drift += rate * d;
            qv += rate * d * d;
        };
        for g in 0..params.m {
            let k = state.counts[g] as f64;
            let up = k * (n - k) / n;
            if up > 0.0 {
                let mut c = state.counts.clone();
                c[g] += 1;
                add(up, &c);
                let mut c = state.counts.clone();
                c[g] -= 1;
                add((1.0 + params.s) * up, &c);
            }
        }
        for victim in 0..params.m {
            for parent in 0..params.m {
                let rate = params.w / params.m as f64
                    * (1.0 + params.r * state.counts[parent] as f64 / n);
                let mut c = state.counts.clone();
                c[victim] = c[parent];
                add(rate, &c);
            }
        }
        (drift, qv)
    }

    #[test]
    fn functionals_match_generator_enumeration() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let fs = [
            TestFunction::identity(),
            TestFunction::power(2),
            TestFunction::poly(&[0.3, -1.0, 2.0, 0.5]),
        ];
        for _ in 0..30 {
            let m = rng.gen_range(1..=6);
            let n = rng.gen_range(1..=6);
            let p = ChainParams::unscaled(
                m,
                n,
                rng.gen::<f64>() * 0.5,
                rng.gen::<f64>(),
                0.5 + rng.gen::<f64>(),
            )
            .unwrap();
            let counts: Vec<u32> = (0..m).map(|_| rng.gen_range(0..=n) as u32).collect();
            let st = ChainState::new(counts, &p).unwrap();
            for f in &fs {
                let (bd, bq) = brute_force(&st, &p, f);
                let d = drift_functional(&st, &p, f);
                let q = qv_functional(&st, &p, f);
                assert!((d - bd).abs() < 1e-12, "drift {d} vs {bd}");
                assert!((q - bq).abs() < 1e-12, "qv {q} vs {bq}");
            }
        }
    }

    #[test]
    fn functionals_trivial_cases() {
        let p = params(4, 5, 0.2, 1.0, 1.0);
        let st = ChainState::new(vec![1, 4, 2, 0], &p).unwrap();
        let one = TestFunction::constant(1.0);
        assert_eq!(drift_functional(&st, &p, &one), 0.0);
        assert_eq!(qv_functional(&st, &p, &one), 0.0);

        let zero = ChainState::new(vec![0, 0, 0, 0], &p).unwrap();
        let f = TestFunction::power(2);
        assert_eq!(drift_functional(&zero, &p, &f), 0.0);
        assert_eq!(qv_functional(&zero, &p, &f), 0.0);
    }

    #[test]
    fn neutral_mean_drift_is_zero() {
        // s = 0, f(x) = x: individual part vanishes; with r = 0 the group
        // part vanishes too
        let p = params(5, 6, 0.0, 0.0, 1.0);
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for _ in 0..10 {
            let counts: Vec<u32> = (0..5).map(|_| rng.gen_range(0..=6) as u32).collect();
            let st = ChainState::new(counts, &p).unwrap();
            assert!(drift_functional(&st, &p, &TestFunction::identity()).abs() < 1e-14);
        }
    }

    #[test]
    fn exchangeability() {
        let p = params(5, 4, 0.3, 0.7, 1.2);
        let f = TestFunction::poly(&[0.1, 1.0, -0.5]);
        let st1 = ChainState::new(vec![0, 1, 2, 3, 4], &p).unwrap();
        let st2 = ChainState::new(vec![4, 2, 0, 3, 1], &p).unwrap();
        assert_eq!(
            empirical_measure(&st1, &p).weights,
            empirical_measure(&st2, &p).weights
        );
        assert_eq!(
            drift_functional(&st1, &p, &f),
            drift_functional(&st2, &p, &f)
        );
        assert_eq!(qv_functional(&st1, &p, &f), qv_functional(&st2, &p, &f));
    }

    #[test]
    fn simulate_time_zero() {
        let p = params(10, 8, 0.1, 1.0, 1.0);
        let init = GridMeasure::uniform(8);
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        let path = simulate(
            &init,
            &p,
            0.0,
            &[TestFunction::identity()],
            &[0.0],
            &mut rng,
        )
        .unwrap();
        assert_eq!(path.values[0][0], path.initial_values[0]);
        assert_eq!(path.drift_integrals[0][0], 0.0);
        assert_eq!(path.event_count, 0);
    }

    #[test]
    fn simulate_rejects_mismatched_lattice() {
        let p = params(4, 8, 0.1, 1.0, 1.0);
        let init = GridMeasure::uniform(5);
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        assert!(matches!(
            simulate(&p_init(&init), &p, 1.0, &[], &[1.0], &mut rng),
            Err(ChainError::LatticeMismatch { .. })
        ));
        fn p_init(g: &GridMeasure) -> GridMeasure {
            g.clone()
        }
    }

    #[test]
    fn simulate_is_deterministic() {
        let p = ChainParams::det_scaled(10, 10, 0.2, 1.0, 1.0).unwrap();
        let init = GridMeasure::uniform(10);
        let obs = [TestFunction::identity(), TestFunction::power(2)];
        let times = [0.0, 0.25, 0.5, 1.0];
        let run = |seed| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            simulate(&init, &p, 1.0, &obs, &times, &mut rng).unwrap()
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5).values, run(6).values);
    }

    #[test]
    fn neutral_martingale_over_replicas() {
        // s = r = 0: ⟨x, μ_t⟩ is a martingale
        let p = params(20, 20, 0.0, 0.0, 1.0);
        let init = GridMeasure::uniform(20);
        let f = [TestFunction::identity()];
        let times = [2.0];
        let reps = 500;
        let mut final_minus_initial = Vec::with_capacity(reps);
        for rep in 0..reps {
            let mut rng = ChaCha12Rng::seed_from_u64(1000 + rep as u64);
            let path = simulate(&init, &p, 2.0, &f, &times, &mut rng).unwrap();
            final_minus_initial.push(path.values[0][0] - path.initial_values[0]);
        }
        let mean: f64 = final_minus_initial.iter().sum::<f64>() / reps as f64;
        let var: f64 = final_minus_initial
            .iter()
            .map(|d| (d - mean) * (d - mean))
            .sum::<f64>()
            / (reps as f64 - 1.0);
        let se = (var / reps as f64).sqrt();
        assert!(mean.abs() < 3.0 * se, "mean {mean} vs SE {se}");
    }

    #[test]
    fn martingale_residual_mean_and_qv() {
        let p = ChainParams::det_scaled(20, 20, 0.2, 1.0, 1.0).unwrap();
        let init = GridMeasure::uniform(20);
        let f = TestFunction::identity();
        let times = [1.0];
        let reps = 400;
        let mut residuals = Vec::with_capacity(reps);
        let mut qv_acc = Vec::with_capacity(reps);
        for rep in 0..reps {
            let mut rng = ChaCha12Rng::seed_from_u64(9000 + rep as u64);
            let path = simulate(&init, &p, 1.0, std::slice::from_ref(&f), &times, &mut rng).unwrap();
            let res = martingale_residual(&path, &f).unwrap();
            residuals.push(res[0].1);
            qv_acc.push(path.qv_integrals[0][0]);
        }
        let rf = reps as f64;
        let mean: f64 = residuals.iter().sum::<f64>() / rf;
        let var: f64 = residuals.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (rf - 1.0);
        let se = (var / rf).sqrt();
        assert!(mean.abs() < 3.0 * se, "mean {mean} vs SE {se}");
        let qv_mean: f64 = qv_acc.iter().sum::<f64>() / rf;
        let rel = (var - qv_mean).abs() / qv_mean;
        assert!(rel < 0.15, "replica variance {var} vs QV mean {qv_mean}");
    }

    #[test]
    fn mean_tracks_deterministic_limit() {
        // moderate-size cross-check against the transport limit; the
        // acceptance suite runs the full-size version
        let m = 60;
        let n = 60;
        let s = 0.5;
        let p = ChainParams::det_scaled(m, n, s, 1.0, 1.0).unwrap();
        let init = GridMeasure::uniform(n);
        let f = TestFunction::identity();
        let times = [1.0];
        let reps = 150;
        let mut finals = Vec::with_capacity(reps);
        for rep in 0..reps {
            let mut rng = ChaCha12Rng::seed_from_u64(777 + rep as u64);
            let path = simulate(&init, &p, 1.0, std::slice::from_ref(&f), &times, &mut rng).unwrap();
            finals.push(path.values[0][0]);
        }
        let rf = reps as f64;
        let mean: f64 = finals.iter().sum::<f64>() / rf;
        let var: f64 = finals.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (rf - 1.0);
        let se = (var / rf).sqrt();

        // limit started from the lattice measure itself to avoid O(1/n)
        // initial-condition bias
        let lam = crate::limit::LimitParams::new(p.lambda()).unwrap();
        let atoms: Vec<(f64, f64)> = (0..=n)
            .map(|k| (k as f64 / n as f64, 1.0 / (n + 1) as f64))
            .collect();
        let mu0 = crate::measures::LimitMeasure::Atomic(
            crate::measures::AtomicMeasure::new(atoms).unwrap(),
        );
        let h = crate::limit::evolve(&mu0, &lam, 1.0).unwrap().measure.mean();
        // slack for the O(1/(ns)) and O(lambda/m) pre-asymptotic bias
        assert!(
            (mean - h).abs() < 3.0 * se + 0.01,
            "chain mean {mean}, limit {h}, SE {se}"
        );
    }

    #[test]
    fn absorbed_path_recorded_constant() {
        let p = params(3, 4, 0.1, 1.0, 1.0);
        let init = GridMeasure::point_mass(4, 4);
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let f = TestFunction::identity();
        let times = [0.0, 0.5, 1.0, 2.0];
        let path = simulate(&init, &p, 2.0, std::slice::from_ref(&f), &times, &mut rng).unwrap();
        assert_eq!(path.absorbed_at, Some(0.0));
        assert!(path.values[0].iter().all(|v| (v - 1.0).abs() < 1e-15));
        let res = martingale_residual(&path, &f).unwrap();
        assert!(res.iter().all(|(_, r)| r.abs() < 1e-15));
    }
}
