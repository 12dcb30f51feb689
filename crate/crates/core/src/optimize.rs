//! Dense BFGS with a weak-Wolfe line search.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsOptions {
    /// Stop when the gradient infinity norm drops to this value.
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self { gradient_tolerance: 1e-8, max_iterations: 500 }
    }
}

#[derive(Debug, Clone)]
pub struct BfgsOutcome {
    pub x: DVector<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
}

const C1: f64 = 1e-4;
const C2: f64 = 0.9;
const MAX_LINE_STEPS: usize = 60;

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Minimizes `f`; `fg(x)` returns the value and gradient.
pub fn minimize<F>(mut fg: F, x0: DVector<f64>, options: &BfgsOptions) -> Result<BfgsOutcome>
where
    F: FnMut(&DVector<f64>) -> Result<(f64, DVector<f64>)>,
{
    let m = x0.len();
    let mut x = x0;
    let (mut f, mut g) = fg(&x)?;
    if m == 0 {
        return Ok(BfgsOutcome { x, value: f, gradient_norm: 0.0, iterations: 0 });
    }
    let mut hinv = DMatrix::<f64>::identity(m, m);
    let mut scaled = false;
    let mut restarted = false;

    for iteration in 0..options.max_iterations {
        let gnorm = inf_norm(&g);
        if gnorm <= options.gradient_tolerance {
            return Ok(BfgsOutcome { x, value: f, gradient_norm: gnorm, iterations: iteration });
        }
        let mut p = -(&hinv * &g);
        let mut slope = g.dot(&p);
        if !(slope < 0.0) {
            hinv.fill_with_identity();
            scaled = false;
            p = -g.clone();
            slope = g.dot(&p);
        }
        let alpha0 = if scaled { 1.0 } else { (1.0 / g.norm()).min(1.0) };

        match line_search(&mut fg, &x, f, slope, &p, alpha0)? {
            Some((alpha, f_new, g_new)) => {
                restarted = false;
                let s = &p * alpha;
                let y = &g_new - &g;
                let sy = s.dot(&y);
                if sy > 1e-14 * s.norm() * y.norm() {
                    if !scaled {
                        let gamma = sy / y.dot(&y);
                        hinv = DMatrix::identity(m, m) * gamma;
                        scaled = true;
                    }
                    let rho = 1.0 / sy;
                    let hy = &hinv * &y;
                    let yhy = y.dot(&hy);
                    // H+ = H - rho (s hy' + hy s') + (rho^2 y'Hy + rho) s s'
                    hinv -= (&s * hy.transpose() + &hy * s.transpose()) * rho;
                    hinv += (&s * s.transpose()) * (rho * rho * yhy + rho);
                }
                x += s;
                f = f_new;
                g = g_new;
            }
            None => {
                if restarted {
                    return Err(Error::NonConvergence {
                        iterations: iteration,
                        gradient_norm: gnorm,
                        last_iterate: x.as_slice().to_vec(),
                    });
                }
                restarted = true;
                hinv.fill_with_identity();
                scaled = false;
            }
        }
    }
    let gnorm = inf_norm(&g);
    if gnorm <= options.gradient_tolerance {
        return Ok(BfgsOutcome { x, value: f, gradient_norm: gnorm, iterations: options.max_iterations });
    }
    Err(Error::NonConvergence {
        iterations: options.max_iterations,
        gradient_norm: gnorm,
        last_iterate: x.as_slice().to_vec(),
    })
}

type Trial = (f64, f64, DVector<f64>);

fn line_search<F>(
    fg: &mut F,
    x: &DVector<f64>,
    f0: f64,
    slope0: f64,
    p: &DVector<f64>,
    alpha0: f64,
) -> Result<Option<Trial>>
where
    F: FnMut(&DVector<f64>) -> Result<(f64, DVector<f64>)>,
{
    // slack for decrease tests that are lost in rounding near the minimum
    let eps_f = 1e-12 * (1.0 + f0.abs());
    let (mut lo, mut slope_lo) = (0.0, slope0);
    let mut hi: Option<(f64, f64)> = None;
    let mut alpha = alpha0;
    let mut best: Option<Trial> = None;

    for _ in 0..MAX_LINE_STEPS {
        let trial = x + p * alpha;
        let (f, g) = match fg(&trial) {
            Ok(v) => v,
            Err(Error::NonFinite { .. }) | Err(Error::KernelEvaluation { .. }) => (f64::INFINITY, p.clone()),
            Err(e) => return Err(e),
        };
        let slope = if f.is_finite() { g.dot(p) } else { f64::NAN };
        let armijo = f <= f0 + C1 * alpha * slope0;
        let approx = f <= f0 + eps_f && slope <= (2.0 * C1 - 1.0) * slope0;
        if !f.is_finite() || !(armijo || approx) {
            hi = Some((alpha, slope));
        } else if slope < C2 * slope0 {
            if f < best.as_ref().map_or(f0, |b| b.1) {
                best = Some((alpha, f, g.clone()));
            }
            lo = alpha;
            slope_lo = slope;
        } else {
            return Ok(Some((alpha, f, g)));
        }

        alpha = match hi {
            None => 4.0 * alpha,
            Some((a_hi, s_hi)) => {
                let width = a_hi - lo;
                let candidate = if s_hi.is_finite() && s_hi > slope_lo {
                    lo - slope_lo * width / (s_hi - slope_lo)
                } else {
                    lo + 0.5 * width
                };
                candidate.clamp(lo + 0.1 * width, a_hi - 0.1 * width)
            }
        };
        if let Some((a_hi, _)) = hi {
            if a_hi - lo <= 1e-16 * a_hi.max(1.0) {
                break;
            }
        }
    }
    Ok(best)
}
