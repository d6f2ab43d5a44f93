//! Probability measures on [0,1] and the functionals every other module
//! consumes: integration against test functions, means, tail masses,
//! Wasserstein-1 distances, lattice discretizations and sampling.

mod cdf;

pub use cdf::PiecewiseCdf;

use crate::quad;
use crate::testfn::TestFunction;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta, beta_reg};
use thiserror::Error;

/// Atoms closer than this are merged after transport.
pub const ATOM_MERGE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("non-finite value encountered at x = {x}")]
    NonFinite { x: f64 },
    #[error("invalid measure: {0}")]
    Invalid(String),
    #[error("argument {value} outside [0,1]")]
    OutOfRange { value: f64 },
    #[error("overflow constructing discretized Beta (lambda = {lambda}, alpha = {alpha})")]
    Overflow { lambda: f64, alpha: f64 },
}

/// Common operations on probability measures on [0,1].
pub trait Measure {
    /// ⟨f, μ⟩ = ∫ f dμ.
    fn integrate(&self, f: &TestFunction) -> Result<f64, MeasureError>;

    /// Piecewise-linear CDF lowering (drives Wasserstein-1 and tail mass).
    fn cdf(&self) -> PiecewiseCdf;

    /// ⟨x, μ⟩.
    fn mean(&self) -> f64 {
        self.integrate(&TestFunction::identity())
            .expect("identity is finite on [0,1]")
    }

    /// Point-mass decomposition for purely discrete measures, None otherwise.
    fn point_masses(&self) -> Option<Vec<(f64, f64)>> {
        None
    }

    /// μ([1-x, 1]), closed interval: atoms at 1-x are counted.
    fn tail_mass(&self, x: f64) -> Result<f64, MeasureError> {
        if !(0.0..=1.0).contains(&x) {
            return Err(MeasureError::OutOfRange { value: x });
        }
        Ok(1.0 - self.cdf().eval_left(1.0 - x))
    }
}

/// W1 distance via exact integration of |F - G|.
pub fn wasserstein1<A: Measure + ?Sized, B: Measure + ?Sized>(a: &A, b: &B) -> f64 {
    a.cdf().w1(&b.cdf())
}

// ---------------------------------------------------------------------------
// GridMeasure: probability vector on the lattice {0, 1/n, ..., 1}
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GridMeasure {
    pub n: usize,
    pub weights: Vec<f64>,
}

impl GridMeasure {
    pub fn new(n: usize, weights: Vec<f64>) -> Result<Self, MeasureError> {
        if weights.len() != n + 1 {
            return Err(MeasureError::Invalid(format!(
                "expected {} weights for lattice size n = {}, got {}",
                n + 1,
                n,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(MeasureError::Invalid("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(MeasureError::Invalid("weights sum to zero".into()));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { n, weights })
    }

    pub fn uniform(n: usize) -> Self {
        Self::new(n, vec![1.0; n + 1]).expect("uniform weights are valid")
    }

    pub fn point_mass(n: usize, site: usize) -> Self {
        let mut w = vec![0.0; n + 1];
        w[site] = 1.0;
        Self { n, weights: w }
    }

    pub fn site_position(&self, k: usize) -> f64 {
        k as f64 / self.n as f64
    }

    /// Discretize an arbitrary measure to the n-lattice by CDF mass of the
    /// cell (k/n - 1/2n, k/n + 1/2n] around each site.
    pub fn from_measure<M: Measure + ?Sized>(mu: &M, n: usize) -> Self {
        let cdf = mu.cdf();
        let nf = n as f64;
        let mut weights = Vec::with_capacity(n + 1);
        let mut prev = 0.0;
        for k in 0..=n {
            let hi = if k == n { 1.0 } else { (k as f64 + 0.5) / nf };
            let f = if k == n { 1.0 } else { cdf.eval_right(hi) };
            weights.push((f - prev).max(0.0));
            prev = f;
        }
        Self::new(n, weights).expect("cell masses are valid weights")
    }

    /// i.i.d. inverse-CDF draws; returns lattice sites.
    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<usize> {
        let mut cum = Vec::with_capacity(self.weights.len());
        let mut acc = 0.0;
        for w in &self.weights {
            acc += w;
            cum.push(acc);
        }
        (0..count)
            .map(|_| {
                let u: f64 = rng.gen::<f64>() * acc;
                cum.partition_point(|c| *c < u).min(self.n)
            })
            .collect()
    }
}

impl Measure for GridMeasure {
    fn integrate(&self, f: &TestFunction) -> Result<f64, MeasureError> {
        let mut acc = 0.0;
        for (k, w) in self.weights.iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            let x = self.site_position(k);
            let v = f.eval(x);
            if !v.is_finite() {
                return Err(MeasureError::NonFinite { x });
            }
            acc += w * v;
        }
        Ok(acc)
    }

    fn cdf(&self) -> PiecewiseCdf {
        let atoms: Vec<(f64, f64)> = self
            .weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(k, w)| (self.site_position(k), *w))
            .collect();
        PiecewiseCdf::from_atoms(&atoms)
    }

    fn point_masses(&self) -> Option<Vec<(f64, f64)>> {
        Some(
            self.weights
                .iter()
                .enumerate()
                .filter(|(_, w)| **w > 0.0)
                .map(|(k, w)| (self.site_position(k), *w))
                .collect(),
        )
    }
}

// ---------------------------------------------------------------------------
// AtomicMeasure
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct AtomicMeasure {
    /// (position, weight) pairs, sorted by position, weights summing to 1.
    pub atoms: Vec<(f64, f64)>,
}

impl AtomicMeasure {
    pub fn new(mut atoms: Vec<(f64, f64)>) -> Result<Self, MeasureError> {
        if atoms.is_empty() {
            return Err(MeasureError::Invalid("atomic measure needs at least one atom".into()));
        }
        for &(x, w) in &atoms {
            if !(0.0..=1.0).contains(&x) {
                return Err(MeasureError::OutOfRange { value: x });
            }
            if !w.is_finite() || w <= 0.0 {
                return Err(MeasureError::Invalid(format!("atom weight {w} must be positive")));
            }
        }
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        // merge atoms within tolerance
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (x, w) in atoms {
            match merged.last_mut() {
                Some(last) if x - last.0 <= ATOM_MERGE_TOL => last.1 += w,
                _ => merged.push((x, w)),
            }
        }
        let total: f64 = merged.iter().map(|a| a.1).sum();
        for a in &mut merged {
            a.1 /= total;
        }
        Ok(Self { atoms: merged })
    }

    pub fn delta(x: f64) -> Result<Self, MeasureError> {
        Self::new(vec![(x, 1.0)])
    }
}

impl Measure for AtomicMeasure {
    fn integrate(&self, f: &TestFunction) -> Result<f64, MeasureError> {
        let mut acc = 0.0;
        for &(x, w) in &self.atoms {
            let v = f.eval(x);
            if !v.is_finite() {
                return Err(MeasureError::NonFinite { x });
            }
            acc += w * v;
        }
        Ok(acc)
    }

    fn cdf(&self) -> PiecewiseCdf {
        PiecewiseCdf::from_atoms(&self.atoms)
    }

    fn point_masses(&self) -> Option<Vec<(f64, f64)>> {
        Some(self.atoms.clone())
    }
}

// ---------------------------------------------------------------------------
// GridDensity: density tabulated on a quadrature grid
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum QuadRule {
    /// Composite trapezoid on the stored nodes.
    Trapezoid,
    /// Composite Gauss-Legendre panels (possibly transported by a smooth
    /// monotone map, which preserves exactness of the mapped weights).
    GaussLegendre,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GridDensity {
    /// Strictly increasing abscissae in (support.0, support.1).
    pub nodes: Vec<f64>,
    /// Nonnegative density values at the nodes.
    pub values: Vec<f64>,
    /// Quadrature weights matching `nodes`.
    pub quad_weights: Vec<f64>,
    pub rule: QuadRule,
    /// Support interval; the density is zero outside it.
    pub support: (f64, f64),
    /// Optional right-endpoint tail behavior, when known analytically.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_hint: Option<TailDescriptor>,
}

impl GridDensity {
    pub fn new(
        nodes: Vec<f64>,
        values: Vec<f64>,
        quad_weights: Vec<f64>,
        rule: QuadRule,
        support: (f64, f64),
    ) -> Result<Self, MeasureError> {
        if nodes.len() != values.len() || nodes.len() != quad_weights.len() || nodes.is_empty() {
            return Err(MeasureError::Invalid("nodes/values/weights length mismatch".into()));
        }
        if nodes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(MeasureError::Invalid("nodes must be strictly increasing".into()));
        }
        if !(0.0 <= support.0 && support.0 < support.1 && support.1 <= 1.0) {
            return Err(MeasureError::Invalid(format!("bad support {support:?}")));
        }
        if values.iter().any(|v| !v.is_finite() || *v < -1e-12) {
            return Err(MeasureError::Invalid("density values must be finite and nonnegative".into()));
        }
        let values: Vec<f64> = values.into_iter().map(|v| v.max(0.0)).collect();
        let mass: f64 = values.iter().zip(&quad_weights).map(|(v, w)| v * w).sum();
        if !mass.is_finite() || mass <= 0.0 {
            return Err(MeasureError::Invalid(format!("unnormalizable density, mass = {mass}")));
        }
        let values = values.into_iter().map(|v| v / mass).collect();
        Ok(Self {
            nodes,
            values,
            quad_weights,
            rule,
            support,
            tail_hint: None,
        })
    }

    /// Tabulate `f` on the default 1024-node Gauss-Legendre grid over
    /// `support` and normalize.
    pub fn from_fn(support: (f64, f64), f: impl Fn(f64) -> f64) -> Result<Self, MeasureError> {
        let (nodes, weights) = quad::default_grid(support.0, support.1);
        let values: Vec<f64> = nodes.iter().map(|x| f(*x)).collect();
        Self::new(nodes, values, weights, QuadRule::GaussLegendre, support)
    }

    pub fn uniform() -> Self {
        Self::from_fn((0.0, 1.0), |_| 1.0).expect("uniform density is valid")
    }

    pub fn with_tail_hint(mut self, hint: TailDescriptor) -> Self {
        self.tail_hint = Some(hint);
        self
    }

    /// Quadrature mass (1 after construction).
    pub fn mass(&self) -> f64 {
        self.values.iter().zip(&self.quad_weights).map(|(v, w)| v * w).sum()
    }

    /// Density at an arbitrary point by linear interpolation on the nodes,
    /// constant extension to the support boundary, zero outside.
    pub fn eval(&self, x: f64) -> f64 {
        if x < self.support.0 || x > self.support.1 {
            return 0.0;
        }
        let n = self.nodes.len();
        // linear extrapolation toward the support edges, clamped at 0, so
        // densities vanishing at a boundary keep vanishing between the last
        // node and the boundary
        if x <= self.nodes[0] {
            if n < 2 {
                return self.values[0];
            }
            let slope = (self.values[1] - self.values[0]) / (self.nodes[1] - self.nodes[0]);
            return (self.values[0] + slope * (x - self.nodes[0])).max(0.0);
        }
        if x >= self.nodes[n - 1] {
            if n < 2 {
                return self.values[n - 1];
            }
            let slope =
                (self.values[n - 1] - self.values[n - 2]) / (self.nodes[n - 1] - self.nodes[n - 2]);
            return (self.values[n - 1] + slope * (x - self.nodes[n - 1])).max(0.0);
        }
        let i = self.nodes.partition_point(|p| *p < x) - 1;
        let (x0, x1) = (self.nodes[i], self.nodes[i + 1]);
        let t = (x - x0) / (x1 - x0);
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }
}

impl Measure for GridDensity {
    fn integrate(&self, f: &TestFunction) -> Result<f64, MeasureError> {
        let mut acc = 0.0;
        for ((x, v), w) in self.nodes.iter().zip(&self.values).zip(&self.quad_weights) {
            let fx = f.eval(*x);
            if !fx.is_finite() {
                return Err(MeasureError::NonFinite { x: *x });
            }
            acc += w * v * fx;
        }
        Ok(acc)
    }

    fn cdf(&self) -> PiecewiseCdf {
        // trapezoid cumulative through the nodes with constant extension to
        // the support boundaries; from_points rescales to total mass 1
        let mut pts = Vec::with_capacity(self.nodes.len() + 2);
        let mut acc = 0.0;
        pts.push((self.support.0, 0.0));
        let mut prev_x = self.support.0;
        let mut prev_v = self.values[0];
        for (x, v) in self.nodes.iter().zip(&self.values) {
            acc += 0.5 * (prev_v + v) * (x - prev_x);
            pts.push((*x, acc));
            prev_x = *x;
            prev_v = *v;
        }
        acc += prev_v * (self.support.1 - prev_x);
        pts.push((self.support.1, acc));
        PiecewiseCdf::from_points(&pts)
    }
}

// ---------------------------------------------------------------------------
// BetaSpec: the Beta(lambda - alpha, alpha) family
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct BetaSpec {
    pub lambda: f64,
    pub alpha: f64,
}

impl BetaSpec {
    pub fn new(lambda: f64, alpha: f64) -> Result<Self, MeasureError> {
        if !(lambda > 0.0 && alpha > 0.0 && alpha < lambda) {
            return Err(MeasureError::Invalid(format!(
                "BetaSpec requires 0 < alpha < lambda, got lambda = {lambda}, alpha = {alpha}"
            )));
        }
        Ok(Self { lambda, alpha })
    }

    /// First shape parameter lambda - alpha.
    pub fn a(&self) -> f64 {
        self.lambda - self.alpha
    }

    /// Second shape parameter alpha.
    pub fn b(&self) -> f64 {
        self.alpha
    }

    /// Density x^(lambda-alpha-1) (1-x)^(alpha-1) / B(lambda-alpha, alpha).
    pub fn density(&self, x: f64) -> f64 {
        let norm = beta(self.a(), self.b());
        x.powf(self.a() - 1.0) * (1.0 - x).powf(self.b() - 1.0) / norm
    }

    /// Exact mean (lambda - alpha) / lambda.
    pub fn exact_mean(&self) -> f64 {
        self.a() / self.lambda
    }

    /// Tabulation as a GridDensity (for quadrature-consistency checks).
    pub fn to_grid_density(&self) -> Result<GridDensity, MeasureError> {
        let s = *self;
        GridDensity::from_fn((0.0, 1.0), move |x| s.density(x))
    }
}

impl Measure for BetaSpec {
    fn integrate(&self, f: &TestFunction) -> Result<f64, MeasureError> {
        // 64-panel Gauss-Legendre on the density
        let mut bad: Option<f64> = None;
        let v = quad::integrate_01(|x| {
            let fx = f.eval(x);
            if !fx.is_finite() {
                bad = Some(x);
            }
            self.density(x) * fx
        });
        match bad {
            Some(x) => Err(MeasureError::NonFinite { x }),
            None => Ok(v),
        }
    }

    fn cdf(&self) -> PiecewiseCdf {
        // exact regularized incomplete Beta at endpoint-clustered points
        const N: usize = 2048;
        let pts: Vec<(f64, f64)> = (0..=N)
            .map(|j| {
                let x = 0.5 * (1.0 - (std::f64::consts::PI * j as f64 / N as f64).cos());
                let f = if x <= 0.0 {
                    0.0
                } else if x >= 1.0 {
                    1.0
                } else {
                    beta_reg(self.a(), self.b(), x)
                };
                (x, f)
            })
            .collect();
        PiecewiseCdf::from_points(&pts)
    }
}

// ---------------------------------------------------------------------------
// TailDescriptor
// ---------------------------------------------------------------------------

/// Behavior of mu_0([1-x, 1]) as x -> 0; determines the basin of attraction.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TailDescriptor {
    /// mu_0({1}) > 0.
    MassAtOne,
    /// mu_0([1-eps, 1]) = 0 for some eps > 0.
    VanishingNearOne,
    /// x^(-alpha) mu_0([1-x, 1]) -> c.
    PowerTail { alpha: f64, c: f64 },
}

impl TailDescriptor {
    pub fn power(alpha: f64, c: f64) -> Result<Self, MeasureError> {
        if alpha <= 0.0 || c <= 0.0 {
            return Err(MeasureError::Invalid(format!(
                "PowerTail requires alpha > 0 and c > 0, got alpha = {alpha}, c = {c}"
            )));
        }
        Ok(Self::PowerTail { alpha, c })
    }
}

// ---------------------------------------------------------------------------
// LimitMeasure: tagged union of solution shapes
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MixtureComponent {
    pub weight: f64,
    pub measure: LimitMeasure,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Mixture {
    pub components: Vec<MixtureComponent>,
}

impl Mixture {
    pub fn new(parts: Vec<(f64, LimitMeasure)>) -> Result<Self, MeasureError> {
        if parts.is_empty() {
            return Err(MeasureError::Invalid("empty mixture".into()));
        }
        if parts.iter().any(|(w, _)| !w.is_finite() || *w < 0.0) {
            return Err(MeasureError::Invalid("mixture weights must be nonnegative".into()));
        }
        let total: f64 = parts.iter().map(|(w, _)| w).sum();
        if total <= 0.0 {
            return Err(MeasureError::Invalid("mixture weights sum to zero".into()));
        }
        Ok(Self {
            components: parts
                .into_iter()
                .map(|(w, m)| MixtureComponent {
                    weight: w / total,
                    measure: m,
                })
                .collect(),
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LimitMeasure {
    Atomic(AtomicMeasure),
    Density(GridDensity),
    Beta(BetaSpec),
    Mixture(Mixture),
}

impl LimitMeasure {
    pub fn delta(x: f64) -> Result<Self, MeasureError> {
        Ok(Self::Atomic(AtomicMeasure::delta(x)?))
    }

    pub fn uniform() -> Self {
        Self::Density(GridDensity::uniform().with_tail_hint(TailDescriptor::PowerTail {
            alpha: 1.0,
            c: 1.0,
        }))
    }

    pub fn beta(lambda: f64, alpha: f64) -> Result<Self, MeasureError> {
        Ok(Self::Beta(BetaSpec::new(lambda, alpha)?))
    }

    pub fn mixture(parts: Vec<(f64, LimitMeasure)>) -> Result<Self, MeasureError> {
        Ok(Self::Mixture(Mixture::new(parts)?))
    }

    /// Total mass ⟨1, μ⟩ (should be 1 for every constructed measure).
    pub fn mass(&self) -> f64 {
        self.integrate(&TestFunction::constant(1.0)).expect("constant is finite")
    }
}

impl Measure for LimitMeasure {
    fn integrate(&self, f: &TestFunction) -> Result<f64, MeasureError> {
        match self {
            Self::Atomic(m) => m.integrate(f),
            Self::Density(m) => m.integrate(f),
            Self::Beta(m) => m.integrate(f),
            Self::Mixture(mix) => {
                let mut acc = 0.0;
                for c in &mix.components {
                    acc += c.weight * c.measure.integrate(f)?;
                }
                Ok(acc)
            }
        }
    }

    fn cdf(&self) -> PiecewiseCdf {
        match self {
            Self::Atomic(m) => m.cdf(),
            Self::Density(m) => m.cdf(),
            Self::Beta(m) => m.cdf(),
            Self::Mixture(mix) => {
                let parts: Vec<(f64, PiecewiseCdf)> = mix
                    .components
                    .iter()
                    .map(|c| (c.weight, c.measure.cdf()))
                    .collect();
                PiecewiseCdf::mixture(&parts)
            }
        }
    }
}

/// Unified JSON wire format covering the lattice measure as well.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnyMeasure {
    Grid(GridMeasure),
    Atomic(AtomicMeasure),
    Density(GridDensity),
    Beta(BetaSpec),
    Mixture(Mixture),
}

impl From<GridMeasure> for AnyMeasure {
    fn from(m: GridMeasure) -> Self {
        Self::Grid(m)
    }
}

impl From<LimitMeasure> for AnyMeasure {
    fn from(m: LimitMeasure) -> Self {
        match m {
            LimitMeasure::Atomic(a) => Self::Atomic(a),
            LimitMeasure::Density(d) => Self::Density(d),
            LimitMeasure::Beta(b) => Self::Beta(b),
            LimitMeasure::Mixture(x) => Self::Mixture(x),
        }
    }
}

impl TryFrom<AnyMeasure> for LimitMeasure {
    type Error = MeasureError;
    fn try_from(m: AnyMeasure) -> Result<Self, MeasureError> {
        match m {
            AnyMeasure::Grid(_) => Err(MeasureError::Invalid(
                "lattice measure where a limit measure was expected".into(),
            )),
            AnyMeasure::Atomic(a) => Ok(Self::Atomic(a)),
            AnyMeasure::Density(d) => Ok(Self::Density(d)),
            AnyMeasure::Beta(b) => Ok(Self::Beta(b)),
            AnyMeasure::Mixture(x) => Ok(Self::Mixture(x)),
        }
    }
}

// ---------------------------------------------------------------------------
// discretized_beta
// ---------------------------------------------------------------------------

/// Natural lattice discretization of Beta(lambda-alpha, alpha): weights
/// proportional to (k/n)^(lambda-alpha-1) (1-k/n)^(alpha-1) on the interior
/// sites, zero at the absorbing endpoints.
pub fn discretized_beta(n: usize, spec: &BetaSpec) -> Result<GridMeasure, MeasureError> {
    if n < 2 {
        return Err(MeasureError::Invalid("discretized Beta needs n >= 2".into()));
    }
    let (ea, eb) = (spec.a() - 1.0, spec.b() - 1.0);
    // log-space against overflow on extreme exponents
    let logs: Vec<f64> = (1..n)
        .map(|k| {
            let x = k as f64 / n as f64;
            ea * x.ln() + eb * (1.0 - x).ln()
        })
        .collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(MeasureError::Overflow {
            lambda: spec.lambda,
            alpha: spec.alpha,
        });
    }
    let mut weights = vec![0.0; n + 1];
    for (k, l) in (1..n).zip(&logs) {
        weights[k] = (l - max).exp();
    }
    GridMeasure::new(n, weights)
}
