//! Tiny textual language for initial measures and observables, shared by the
//! CLI and the study configs:
//!
//!   delta:0.3
//!   uniform
//!   beta:3,1
//!   example2            example4:c=0.8          example5:alpha=1,a=0.3
//!   mixture:[0.3*delta:1; 0.7*uniform]
//!
//! Observables: `1`, `x`, `x^2`, `x^3`, ...

use crate::limit::{example_initial, ExampleParams, LimitError, LimitParams};
use crate::measures::{LimitMeasure, MeasureError};
use crate::testfn::TestFunction;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("unrecognized measure spec `{0}`")]
    Unrecognized(String),
    #[error("bad value in `{key}`: {detail}")]
    BadValue { key: String, detail: String },
    #[error("example spec needs lambda, none supplied")]
    MissingLambda,
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Limit(#[from] LimitError),
}

/// Parsed but unresolved measure expression. Examples depend on lambda, so
/// resolution is deferred to `build`.
#[derive(Clone, Debug, PartialEq)]
pub enum MeasureSpec {
    Delta(f64),
    Uniform,
    Beta { lambda: f64, alpha: f64 },
    Example { id: u8, params: ExampleParams },
    Mixture(Vec<(f64, MeasureSpec)>),
}

fn bad(key: &str, detail: impl Into<String>) -> ParseError {
    ParseError::BadValue {
        key: key.to_string(),
        detail: detail.into(),
    }
}

fn parse_f64(key: &str, s: &str) -> Result<f64, ParseError> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| bad(key, format!("`{s}`: {e}")))
}

/// Split on `sep` at nesting depth 0 with respect to square brackets.
fn split_top(s: &str, sep: char) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    for (i, ch) in s.char_indices() {
        match ch {
            '[' => depth += 1,
            ']' => depth = depth.saturating_sub(1),
            c if c == sep && depth == 0 => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

pub fn parse_measure(input: &str) -> Result<MeasureSpec, ParseError> {
    let s = input.trim();
    if s == "uniform" {
        return Ok(MeasureSpec::Uniform);
    }
    if let Some(rest) = s.strip_prefix("delta:") {
        return Ok(MeasureSpec::Delta(parse_f64("delta", rest)?));
    }
    if let Some(rest) = s.strip_prefix("beta:") {
        let parts: Vec<&str> = rest.split(',').collect();
        if parts.len() != 2 {
            return Err(bad("beta", "expected beta:lambda,alpha"));
        }
        return Ok(MeasureSpec::Beta {
            lambda: parse_f64("beta.lambda", parts[0])?,
            alpha: parse_f64("beta.alpha", parts[1])?,
        });
    }
    if let Some(rest) = s.strip_prefix("example") {
        let (id_str, args) = match rest.find(':') {
            Some(i) => (&rest[..i], &rest[i + 1..]),
            None => (rest, ""),
        };
        let id: u8 = id_str
            .parse()
            .map_err(|_| bad("example", format!("bad example id `{id_str}`")))?;
        let mut params = ExampleParams::default();
        for kv in args.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| bad("example", format!("expected key=value, got `{kv}`")))?;
            let val = parse_f64(k.trim(), v)?;
            match k.trim() {
                "x0" => params.x0 = Some(val),
                "c" => params.c = Some(val),
                "alpha" => params.alpha = Some(val),
                "a" => params.a = Some(val),
                other => return Err(bad("example", format!("unknown parameter `{other}`"))),
            }
        }
        return Ok(MeasureSpec::Example { id, params });
    }
    if let Some(rest) = s.strip_prefix("mixture:") {
        let inner = rest
            .trim()
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(|| bad("mixture", "expected mixture:[w*spec; w*spec; ...]"))?;
        let mut parts = Vec::new();
        for item in split_top(inner, ';') {
            let item = item.trim();
            if item.is_empty() {
                continue;
            }
            let (w, spec) = item
                .split_once('*')
                .ok_or_else(|| bad("mixture", format!("expected weight*spec, got `{item}`")))?;
            parts.push((parse_f64("mixture.weight", w)?, parse_measure(spec)?));
        }
        if parts.is_empty() {
            return Err(bad("mixture", "no components"));
        }
        return Ok(MeasureSpec::Mixture(parts));
    }
    Err(ParseError::Unrecognized(s.to_string()))
}

impl MeasureSpec {
    /// Resolve to a concrete measure. `lambda` is only consulted by
    /// example specs (their reference dynamics depend on it).
    pub fn build(&self, lambda: Option<f64>) -> Result<LimitMeasure, ParseError> {
        match self {
            MeasureSpec::Delta(x) => Ok(LimitMeasure::delta(*x)?),
            MeasureSpec::Uniform => Ok(LimitMeasure::uniform()),
            MeasureSpec::Beta { lambda, alpha } => Ok(LimitMeasure::beta(*lambda, *alpha)?),
            MeasureSpec::Example { id, params } => {
                let lam = lambda.ok_or(ParseError::MissingLambda)?;
                let lp = LimitParams::new(lam)?;
                Ok(example_initial(*id, &lp, params)?)
            }
            MeasureSpec::Mixture(parts) => {
                let mut built = Vec::with_capacity(parts.len());
                for (w, spec) in parts {
                    built.push((*w, spec.build(lambda)?));
                }
                Ok(LimitMeasure::mixture(built)?)
            }
        }
    }
}

/// Observables for simulations: `1`, `x`, or `x^k`.
pub fn parse_observable(input: &str) -> Result<TestFunction, ParseError> {
    let s = input.trim();
    match s {
        "1" => Ok(TestFunction::constant(1.0)),
        "x" => Ok(TestFunction::identity()),
        _ => {
            let k = s
                .strip_prefix("x^")
                .and_then(|e| e.parse::<u32>().ok())
                .ok_or_else(|| ParseError::Unrecognized(s.to_string()))?;
            Ok(TestFunction::power(k))
        }
    }
}
