//! Quadrature rules on subintervals of [0,1].
//!
//! Densities are tabulated on composite Gauss-Legendre panels; panel nodes
//! never touch the interval endpoints, which keeps integrable endpoint
//! singularities (Beta densities with exponents below one) off the grid.

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1].
///
/// Newton iteration on the Legendre recurrence; accurate to machine
/// precision for the orders used here (16 and 64).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        // Chebyshev initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre polynomial and derivative by recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss-Legendre grid on [a, b]: `panels` equal panels with
/// `points` nodes each. Returns (nodes, weights) with nodes strictly
/// increasing and strictly inside (a, b).
pub fn panel_grid(a: f64, b: f64, panels: usize, points: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(b > a);
    let (gx, gw) = gauss_legendre(points);
    let h = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * points);
    let mut weights = Vec::with_capacity(panels * points);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        for (x, w) in gx.iter().zip(gw.iter()) {
            nodes.push(mid + 0.5 * h * x);
            weights.push(0.5 * h * w);
        }
    }
    (nodes, weights)
}

/// Default density grid on [a, b]: 16 panels of 64 points (1024 nodes).
pub fn default_grid(a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    panel_grid(a, b, 16, 64)
}

/// 64-panel Gauss-Legendre integral of `f` over [0, 1] (16 points/panel).
pub fn integrate_01<F: FnMut(f64) -> f64>(mut f: F) -> f64 {
    let (nodes, weights) = panel_grid(0.0, 1.0, 64, 16);
    nodes.iter().zip(weights.iter()).map(|(x, w)| w * f(*x)).sum()
}
