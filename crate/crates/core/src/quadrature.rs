//! Gauss rules on `[-1, 1]` built with the Golub-Welsch eigenvalue method.

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::gamma::ln_gamma;

/// Nodes and weights of a Gauss rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Gauss-Legendre rule with `m` points.
    pub fn legendre(m: usize) -> Self {
        Self::jacobi(m, 0.0, 0.0)
    }

    /// Gauss-Jacobi rule for the weight `(1 - x)^alpha (1 + x)^beta`, `alpha, beta > -1`.
    pub fn jacobi(m: usize, alpha: f64, beta: f64) -> Self {
        assert!(m >= 1, "Gauss rule needs at least one node");
        assert!(alpha > -1.0 && beta > -1.0, "Jacobi exponents must exceed -1");

        let ab = alpha + beta;
        let mut diag = vec![0.0; m];
        let mut off = vec![0.0; m.saturating_sub(1)];
        diag[0] = (beta - alpha) / (ab + 2.0);
        for k in 1..m {
            let kf = k as f64;
            let s = 2.0 * kf + ab;
            diag[k] = (beta * beta - alpha * alpha) / (s * (s + 2.0));
            let num = 4.0 * kf * (kf + alpha) * (kf + beta) * (kf + ab);
            let den = s * s * (s + 1.0) * (s - 1.0);
            off[k - 1] = (num / den).sqrt();
        }
        // k = 1 with alpha + beta = -1 hits 0/0 in the generic formula.
        if m > 1 && (ab + 1.0).abs() < 1e-14 {
            let num = 4.0 * (1.0 + alpha) * (1.0 + beta);
            let den = (2.0 + ab).powi(2) * (3.0 + ab);
            off[0] = (num / den).sqrt();
        }

        let mut jac = DMatrix::zeros(m, m);
        for k in 0..m {
            jac[(k, k)] = diag[k];
        }
        for k in 0..m.saturating_sub(1) {
            jac[(k, k + 1)] = off[k];
            jac[(k + 1, k)] = off[k];
        }
        let mu0 = ((ab + 1.0) * std::f64::consts::LN_2 + ln_gamma(alpha + 1.0) + ln_gamma(beta + 1.0)
            - ln_gamma(ab + 2.0))
        .exp();

        let eig = SymmetricEigen::new(jac);
        let mut pairs: Vec<(f64, f64)> = (0..m)
            .map(|k| {
                let v0 = eig.eigenvectors[(0, k)];
                (eig.eigenvalues[k], mu0 * v0 * v0)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        }
    }

    /// `sum_i w_i f(x_i)`.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}
