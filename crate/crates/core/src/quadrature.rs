//! Gauss-Jacobi rules and Jacobi polynomial evaluation.
//!
//! Nodes are seeded from the Golub-Welsch eigenvalues and polished by Newton
//! iteration on `P_n^{(a,b)}`; weights use the closed form in terms of the
//! polynomial derivative so that endpoint weights keep full relative accuracy.

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::gamma::ln_gamma;

/// A quadrature rule on `[-1, 1]` for the weight `(1 - x)^a (1 + x)^b`.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    /// Integrates `w(x) f(x)` where `w` is the rule's weight.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Nodes and weights mapped affinely to `[lo, hi]` (weights include the Jacobian).
    pub fn mapped(&self, lo: f64, hi: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// `P_n^{(a,b)}(x)` and `P_{n-1}^{(a,b)}(x)` by the three-term recurrence.
pub fn jacobi_pair(n: usize, a: f64, b: f64, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p_prev = 1.0;
    let mut p = 0.5 * (a - b) + 0.5 * (a + b + 2.0) * x;
    for k in 2..=n {
        let k = k as f64;
        let s = 2.0 * k + a + b;
        let c1 = 2.0 * k * (k + a + b) * (s - 2.0);
        let c2 = (s - 1.0) * (s * (s - 2.0) * x + a * a - b * b);
        let c3 = 2.0 * (k + a - 1.0) * (k + b - 1.0) * s;
        let next = (c2 * p - c3 * p_prev) / c1;
        p_prev = p;
        p = next;
    }
    (p, p_prev)
}

/// `P_n^{(a,b)}(x)`.
pub fn jacobi_p(n: usize, a: f64, b: f64, x: f64) -> f64 {
    jacobi_pair(n, a, b, x).0
}

/// Derivative of `P_n^{(a,b)}` at `x`.
pub fn jacobi_p_deriv(n: usize, a: f64, b: f64, x: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    0.5 * (n as f64 + a + b + 1.0) * jacobi_p(n - 1, a + 1.0, b + 1.0, x)
}

/// `n`-point Gauss-Jacobi rule for the weight `(1 - x)^a (1 + x)^b`, `a, b > -1`.
pub fn gauss_jacobi(n: usize, a: f64, b: f64) -> Rule {
    assert!(n > 0, "quadrature needs at least one node");
    assert!(a > -1.0 && b > -1.0, "Jacobi exponents must exceed -1");

    // Golub-Welsch seed.
    let mut jm = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        let s = 2.0 * kf + a + b;
        jm[(k, k)] = if k == 0 {
            (b - a) / (a + b + 2.0)
        } else {
            (b * b - a * a) / (s * (s + 2.0))
        };
        if k + 1 < n {
            let k1 = kf + 1.0;
            let s1 = 2.0 * k1 + a + b;
            let off = if k == 0 {
                // (k1 + a + b) and (s1 - 1) coincide here; cancel them so a + b = -1 works.
                2.0 / s1 * ((1.0 + a) * (1.0 + b) / (s1 + 1.0)).sqrt()
            } else {
                2.0 / s1
                    * (k1 * (k1 + a) * (k1 + b) * (k1 + a + b) / ((s1 + 1.0) * (s1 - 1.0))).sqrt()
            };
            jm[(k, k + 1)] = off;
            jm[(k + 1, k)] = off;
        }
    }
    let mut nodes: Vec<f64> = SymmetricEigen::new(jm).eigenvalues.iter().copied().collect();
    nodes.sort_by(|x, y| x.total_cmp(y));

    let nf = n as f64;
    let log_const = (a + b + 1.0) * std::f64::consts::LN_2 + ln_gamma(nf + a + 1.0)
        + ln_gamma(nf + b + 1.0)
        - ln_gamma(nf + a + b + 1.0)
        - ln_gamma(nf + 1.0);

    let mut weights = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let p = jacobi_p(n, a, b, *x);
            let dp = jacobi_p_deriv(n, a, b, *x);
            let step = p / dp;
            *x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let dp = jacobi_p_deriv(n, a, b, *x);
        weights.push((log_const - ((1.0 - *x * *x) * dp * dp).ln()).exp());
    }
    Rule { nodes, weights }
}

pub fn gauss_legendre(n: usize) -> Rule {
    gauss_jacobi(n, 0.0, 0.0)
}

/// `∫_{-1}^{1} (1-x)^a (1+x)^b dx`.
pub fn jacobi_weight_integral(a: f64, b: f64) -> f64 {
    ((a + b + 1.0) * std::f64::consts::LN_2 + ln_gamma(a + 1.0) + ln_gamma(b + 1.0)
        - ln_gamma(a + b + 2.0))
    .exp()
}

/// `h_n = ∫ (1-x)^a (1+x)^b [P_n^{(a,b)}]^2 dx`.
pub fn jacobi_norm_sq(n: usize, a: f64, b: f64) -> f64 {
    let nf = n as f64;
    if n == 0 {
        return jacobi_weight_integral(a, b);
    }
    ((a + b + 1.0) * std::f64::consts::LN_2 + ln_gamma(nf + a + 1.0) + ln_gamma(nf + b + 1.0)
        - ln_gamma(nf + a + b + 1.0)
        - ln_gamma(nf + 1.0))
    .exp()
        / (2.0 * nf + a + b + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let rule = gauss_legendre(12);
        for p in 0..24 {
            let exact = if p % 2 == 0 { 2.0 / (p as f64 + 1.0) } else { 0.0 };
            let q = rule.integrate(|x| x.powi(p));
            assert!((q - exact).abs() < 1e-14, "x^{p}: {q} vs {exact}");
        }
    }

    #[test]
    fn jacobi_weights_sum_to_weight_integral() {
        for &(a, b) in &[(0.0, 0.0), (-0.125, -0.125), (0.375, 0.375), (-0.5, 0.0), (0.0, 1.75)] {
            for n in [1, 2, 7, 40, 128] {
                let rule = gauss_jacobi(n, a, b);
                let s: f64 = rule.weights.iter().sum();
                let exact = jacobi_weight_integral(a, b);
                assert!((s / exact - 1.0).abs() < 1e-12, "a={a} b={b} n={n}: {s} vs {exact}");
            }
        }
    }

    #[test]
    fn jacobi_orthogonality() {
        let (a, b) = (0.375, 0.375);
        let rule = gauss_jacobi(40, a, b);
        for m in 0..20 {
            for n in 0..20 {
                let g = rule.integrate(|x| jacobi_p(m, a, b, x) * jacobi_p(n, a, b, x));
                let expect = if m == n { jacobi_norm_sq(n, a, b) } else { 0.0 };
                assert!((g - expect).abs() < 1e-12 * jacobi_norm_sq(n, a, b).max(1.0));
            }
        }
    }

    #[test]
    fn chebyshev_nodes_match_closed_form() {
        let n = 9;
        let rule = gauss_jacobi(n, -0.5, -0.5);
        for (k, x) in rule.nodes.iter().enumerate() {
            let exact = -((2 * k + 1) as f64 * std::f64::consts::PI / (2 * n) as f64).cos();
            assert!((x - exact).abs() < 1e-14, "{x} vs {exact}");
        }
        for w in &rule.weights {
            assert!((w - std::f64::consts::PI / n as f64).abs() < 1e-13);
        }
    }
}
