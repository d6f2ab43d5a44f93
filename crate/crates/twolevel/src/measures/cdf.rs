//! Piecewise-linear CDFs with jumps.
//!
//! Every measure kind lowers to this representation: atoms become jumps,
//! tabulated densities become continuous piecewise-linear segments. The
//! 1-Wasserstein distance on [0,1] is the exact integral of |F - G| over a
//! shared breakpoint refinement.

/// CDF on [0,1]: at breakpoint `xs[i]` the left limit is `left[i]` and the
/// right limit `right[i]`; between breakpoints the CDF is linear from
/// `right[i]` to `left[i+1]`.
#[derive(Clone, Debug)]
pub struct PiecewiseCdf {
    xs: Vec<f64>,
    left: Vec<f64>,
    right: Vec<f64>,
}

impl PiecewiseCdf {
    /// Purely atomic CDF. `atoms` must be sorted by position, positions in
    /// [0,1], weights summing to ~1.
    pub fn from_atoms(atoms: &[(f64, f64)]) -> Self {
        let mut xs = vec![0.0];
        let mut left = vec![0.0];
        let mut right = vec![0.0];
        let mut acc = 0.0;
        for &(x, w) in atoms {
            if x == 0.0 {
                acc += w;
                right[0] = acc;
                continue;
            }
            if x == 1.0 {
                break; // handled below so that 1.0 is the last breakpoint
            }
            xs.push(x);
            left.push(acc);
            acc += w;
            right.push(acc);
        }
        let at_one: f64 = atoms.iter().filter(|a| a.0 == 1.0).map(|a| a.1).sum();
        xs.push(1.0);
        left.push(acc);
        right.push(acc + at_one);
        let mut cdf = Self { xs, left, right };
        cdf.renormalize();
        cdf
    }

    /// Continuous CDF through sampled points `(x, F(x))`. Points must be
    /// strictly increasing in x; 0 and 1 are added if absent (flat
    /// extension). F is rescaled to end at exactly 1.
    pub fn from_points(points: &[(f64, f64)]) -> Self {
        assert!(!points.is_empty());
        let mut xs = Vec::with_capacity(points.len() + 2);
        let mut fs = Vec::with_capacity(points.len() + 2);
        if points[0].0 > 0.0 {
            xs.push(0.0);
            fs.push(0.0);
        }
        let mut fmax: f64 = 0.0;
        for &(x, f) in points {
            if let Some(last) = xs.last() {
                if x <= *last {
                    continue;
                }
            }
            fmax = fmax.max(f.max(0.0));
            xs.push(x);
            fs.push(fmax); // enforce monotonicity
        }
        if *xs.last().unwrap() < 1.0 {
            xs.push(1.0);
            fs.push(fmax);
        }
        let mut cdf = Self {
            xs,
            left: fs.clone(),
            right: fs,
        };
        cdf.renormalize();
        cdf
    }

    /// Weighted combination of component CDFs (weights need not sum to one;
    /// the result is renormalized).
    pub fn mixture(parts: &[(f64, PiecewiseCdf)]) -> Self {
        assert!(!parts.is_empty());
        let mut xs: Vec<f64> = parts.iter().flat_map(|(_, c)| c.xs.iter().copied()).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs.dedup();
        let mut left = vec![0.0; xs.len()];
        let mut right = vec![0.0; xs.len()];
        for (w, c) in parts {
            for (i, &x) in xs.iter().enumerate() {
                left[i] += w * c.eval_left(x);
                right[i] += w * c.eval_right(x);
            }
        }
        let mut cdf = Self { xs, left, right };
        cdf.renormalize();
        cdf
    }

    fn renormalize(&mut self) {
        let total = *self.right.last().unwrap();
        if total > 0.0 && (total - 1.0).abs() > 1e-15 {
            for v in self.left.iter_mut().chain(self.right.iter_mut()) {
                *v /= total;
            }
        }
        *self.right.last_mut().unwrap() = 1.0;
        self.left[0] = 0.0;
    }

    fn segment(&self, x: f64) -> usize {
        // index i with xs[i] <= x < xs[i+1] (last segment for x >= last)
        match self.xs.binary_search_by(|p| p.partial_cmp(&x).unwrap()) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => i - 1,
        }
    }

    /// F(x+): right-continuous evaluation.
    pub fn eval_right(&self, x: f64) -> f64 {
        if x <= self.xs[0] {
            return if x < self.xs[0] { 0.0 } else { self.right[0] };
        }
        if x >= *self.xs.last().unwrap() {
            return 1.0;
        }
        let i = self.segment(x);
        if self.xs[i] == x {
            return self.right[i];
        }
        self.interp(i, x)
    }

    /// F(x-): left limit.
    pub fn eval_left(&self, x: f64) -> f64 {
        if x <= self.xs[0] {
            return 0.0;
        }
        if x > *self.xs.last().unwrap() {
            return 1.0;
        }
        let i = self.segment(x);
        if self.xs[i] == x {
            return self.left[i];
        }
        self.interp(i, x)
    }

    fn interp(&self, i: usize, x: f64) -> f64 {
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let (f0, f1) = (self.right[i], self.left[i + 1]);
        f0 + (f1 - f0) * (x - x0) / (x1 - x0)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.xs
    }

    /// Exact integral of |F - G| over [0,1] for piecewise-linear CDFs.
    pub fn w1(&self, other: &PiecewiseCdf) -> f64 {
        let mut xs: Vec<f64> = self.xs.iter().chain(other.xs.iter()).copied().collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs.dedup();
        let mut total = 0.0;
        for w in xs.windows(2) {
            let (x0, x1) = (w[0], w[1]);
            let d0 = self.eval_right(x0) - other.eval_right(x0);
            let d1 = self.eval_left(x1) - other.eval_left(x1);
            let h = x1 - x0;
            total += if d0 * d1 >= 0.0 {
                0.5 * (d0.abs() + d1.abs()) * h
            } else {
                // sign change: split at the root of the linear difference
                0.5 * h * (d0 * d0 + d1 * d1) / (d0.abs() + d1.abs())
            };
        }
        total
    }
}
