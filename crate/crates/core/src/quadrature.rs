//! Fixed-order Gauss rules and a composite Gauss–Legendre integrator.

use std::f64::consts::PI;

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds an `n`-point rule by Newton iteration on the Legendre
    /// polynomial roots.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, z);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    /// Composite rule with `panels` equal sub-intervals of `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, panels: usize, mut f: F) -> f64 {
        let h = (b - a) / panels as f64;
        let mut total = 0.0;
        for p in 0..panels {
            let lo = a + h * p as f64;
            let hi = if p + 1 == panels { b } else { lo + h };
            let mut s = 0.0;
            for (x, w) in self.mapped(lo, hi) {
                s += w * f(x);
            }
            total += s;
        }
        total
    }

    /// All composite nodes and weights for `panels` panels over `[a, b]`.
    pub fn composite(&self, a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
        let h = (b - a) / panels as f64;
        let mut out = Vec::with_capacity(panels * self.order());
        for p in 0..panels {
            let lo = a + h * p as f64;
            let hi = if p + 1 == panels { b } else { lo + h };
            out.extend(self.mapped(lo, hi));
        }
        out
    }
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss–Laguerre rule for `∫₀^∞ e^{-x} f(x) dx`.
#[derive(Debug, Clone)]
pub struct GaussLaguerre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLaguerre {
    /// Builds an `n`-point rule (Newton iteration with the usual asymptotic
    /// starting guesses). Weights are formed in log space so that the tail
    /// nodes of high-order rules do not overflow.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Laguerre order must be positive");
        let nf = n as f64;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let mut z = 0.0_f64;
        for i in 0..n {
            if i == 0 {
                z = 3.0 / (1.0 + 2.4 * nf);
            } else if i == 1 {
                z += 15.0 / (1.0 + 2.5 * nf);
            } else {
                let ai = (i - 1) as f64;
                z += (1.0 + 2.55 * ai) / (1.9 * ai) * (z - nodes[i - 2]);
            }
            let mut ln_abs_pp = 0.0;
            let mut ln_abs_p2 = 0.0;
            for _ in 0..200 {
                // Scaled recurrence for L_n(z) to avoid overflow at large z.
                let (p1, p2, pp_ratio) = laguerre_eval(n, z);
                let dz = pp_ratio;
                z -= dz;
                ln_abs_pp = p1;
                ln_abs_p2 = p2;
                if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            let (lp, lp2, _) = laguerre_eval(n, z);
            if lp.is_finite() {
                ln_abs_pp = lp;
                ln_abs_p2 = lp2;
            }
            nodes[i] = z;
            // w = -1 / (n L_n'(z) L_{n-1}(z)), assembled from logs.
            weights[i] = (-(nf.ln() + ln_abs_pp + ln_abs_p2)).exp();
        }
        Self { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `∫₀^∞ e^{-x} f(x) dx`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Returns `(ln|L_n'(z)|, ln|L_{n-1}(z)|, L_n(z)/L_n'(z))`.
fn laguerre_eval(n: usize, z: f64) -> (f64, f64, f64) {
    // Track p1 = L_j, p2 = L_{j-1} with a running scale to stay finite.
    let mut p1 = 1.0_f64;
    let mut p2 = 0.0_f64;
    let mut ln_scale = 0.0_f64;
    for j in 1..=n {
        let jf = j as f64;
        let p3 = p2;
        p2 = p1;
        p1 = ((2.0 * jf - 1.0 - z) * p2 - (jf - 1.0) * p3) / jf;
        let m = p1.abs().max(p2.abs());
        if m > 1e100 {
            p1 /= m;
            p2 /= m;
            ln_scale += m.ln();
        }
    }
    let nf = n as f64;
    // L_n'(z) = n (L_n - L_{n-1}) / z
    let pp = nf * (p1 - p2) / z;
    (
        pp.abs().ln() + ln_scale,
        p2.abs().ln() + ln_scale,
        p1 / pp,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let gl = GaussLegendre::new(8);
        // degree 15 is exact for 8 points
        let v = gl.integrate(0.0, 2.0, 1, |x| x.powi(15));
        assert!((v - 2f64.powi(16) / 16.0).abs() < 1e-9);
        let w: f64 = gl.weights().iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn legendre_composite_smooth_function() {
        let gl = GaussLegendre::new(8);
        let v = gl.integrate(0.0, PI, 16, f64::sin);
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn laguerre_moments() {
        let lag = GaussLaguerre::new(64);
        // ∫ e^{-x} x^k = k!
        let mut fact = 1.0;
        for k in 0..20 {
            if k > 0 {
                fact *= k as f64;
            }
            let v = lag.integrate(|x| x.powi(k));
            assert!(((v - fact) / fact).abs() < 1e-10, "k={k} v={v}");
        }
        let nodes = lag.nodes();
        assert!(nodes.windows(2).all(|w| w[1] > w[0]));
        assert!(nodes[0] > 0.0 && nodes[0] < 0.03);
    }

    #[test]
    fn laguerre_small_order() {
        let lag = GaussLaguerre::new(2);
        // nodes 2 ± sqrt(2)
        assert!((lag.nodes()[0] - (2.0 - 2f64.sqrt())).abs() < 1e-13);
        assert!((lag.nodes()[1] - (2.0 + 2f64.sqrt())).abs() < 1e-13);
    }
}
