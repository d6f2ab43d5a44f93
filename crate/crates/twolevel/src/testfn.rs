//! Test functions on [0,1] with first and second derivatives.
//!
//! Every weak-form functional (generator drift, quadratic variation, PDE
//! residuals, martingale statistics) is driven by these.

use std::sync::Arc;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A function on [0,1] together with its first two derivatives.
#[derive(Clone)]
pub struct TestFunction {
    name: String,
    f: ScalarFn,
    df: ScalarFn,
    d2f: ScalarFn,
}

impl std::fmt::Debug for TestFunction {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(fm, "TestFunction({})", self.name)
    }
}

impl TestFunction {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            f: Arc::new(f),
            df: Arc::new(df),
            d2f: Arc::new(d2f),
        }
    }

    /// Value-only function; the derivative accessors panic if called.
    pub fn value_only(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        let name = name.into();
        let n1 = name.clone();
        let n2 = name.clone();
        Self {
            name: name.clone(),
            f: Arc::new(f),
            df: Arc::new(move |_| panic!("derivative of value-only function {n1}")),
            d2f: Arc::new(move |_| panic!("second derivative of value-only function {n2}")),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("const({c})"), move |_| c, |_| 0.0, |_| 0.0)
    }

    pub fn identity() -> Self {
        Self::new("x", |x| x, |_| 1.0, |_| 0.0)
    }

    /// x^k for integer k >= 0.
    pub fn power(k: u32) -> Self {
        let kf = k as f64;
        Self::new(
            format!("x^{k}"),
            move |x| x.powi(k as i32),
            move |x| if k == 0 { 0.0 } else { kf * x.powi(k as i32 - 1) },
            move |x| {
                if k <= 1 {
                    0.0
                } else {
                    kf * (kf - 1.0) * x.powi(k as i32 - 2)
                }
            },
        )
    }

    /// Polynomial with coefficients in increasing degree order.
    pub fn poly(coeffs: &[f64]) -> Self {
        let c: Vec<f64> = coeffs.to_vec();
        let c1 = c.clone();
        let c2 = c.clone();
        let horner = |c: &[f64], x: f64| c.iter().rev().fold(0.0, |acc, a| acc * x + a);
        let name = format!("poly{c:?}");
        Self::new(
            name,
            move |x| horner(&c, x),
            move |x| {
                let d: Vec<f64> = c1.iter().enumerate().skip(1).map(|(i, a)| i as f64 * a).collect();
                horner(&d, x)
            },
            move |x| {
                let d2: Vec<f64> = c2
                    .iter()
                    .enumerate()
                    .skip(2)
                    .map(|(i, a)| (i * (i - 1)) as f64 * a)
                    .collect();
                horner(&d2, x)
            },
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn deriv(&self, x: f64) -> f64 {
        (self.df)(x)
    }

    pub fn deriv2(&self, x: f64) -> f64 {
        (self.d2f)(x)
    }

    /// Composition f ∘ g with a map supplying its own two derivatives.
    pub fn compose(
        &self,
        name: impl Into<String>,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dg: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2g: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        let (f, df, d2f) = (self.f.clone(), self.df.clone(), self.d2f.clone());
        let g = Arc::new(g);
        let dg = Arc::new(dg);
        let (ga, gb, dga, dgb) = (g.clone(), g.clone(), dg.clone(), dg.clone());
        let fa = f.clone();
        let dfa = df.clone();
        Self {
            name: name.into(),
            f: Arc::new(move |x| fa(ga(x))),
            df: {
                let f1 = df.clone();
                Arc::new(move |x| f1(gb(x)) * dga(x))
            },
            d2f: Arc::new(move |x| {
                let gx = g(x);
                d2f(gx) * dgb(x) * dgb(x) + dfa(gx) * d2g(x)
            }),
        }
    }
}
