//! Lagrangians `F(x1, x2, x3, x4, t)` where `x1 = y`, `x2 = K_P[y]`,
//! `x3 = y'` and `x4 = B_P[y]`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Arguments of a Lagrangian at one time.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Arguments {
    pub y: f64,
    pub ky: f64,
    pub dy: f64,
    pub by: f64,
    pub t: f64,
}

impl Arguments {
    pub fn new(y: f64, ky: f64, dy: f64, by: f64, t: f64) -> Self {
        Self { y, ky, dy, by, t }
    }

    pub fn get(&self, i: usize) -> f64 {
        match i {
            0 => self.y,
            1 => self.ky,
            2 => self.dy,
            3 => self.by,
            _ => self.t,
        }
    }

    pub fn with(mut self, i: usize, v: f64) -> Self {
        match i {
            0 => self.y = v,
            1 => self.ky = v,
            2 => self.dy = v,
            3 => self.by = v,
            _ => self.t = v,
        }
        self
    }
}

pub type ValueFn = Arc<dyn Fn(&Arguments) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(&Arguments) -> [f64; 4] + Send + Sync>;

/// Evaluatable Lagrangian with partials `d1..d4` in the first four slots.
#[derive(Clone)]
pub struct LagrangianSpec {
    name: String,
    value: ValueFn,
    gradient: Option<GradientFn>,
    depends: [bool; 4],
}

impl fmt::Debug for LagrangianSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LagrangianSpec")
            .field("name", &self.name)
            .field("analytic_gradient", &self.gradient.is_some())
            .field("depends", &self.depends)
            .finish()
    }
}

/// Central-difference step for a variable of size `x`.
pub fn fd_step(x: f64) -> f64 {
    1e-6 * x.abs().max(1.0)
}

impl LagrangianSpec {
    /// Lagrangian that may depend on all four slots; partials by finite differences.
    pub fn new(name: impl Into<String>, f: impl Fn(&Arguments) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), value: Arc::new(f), gradient: None, depends: [true; 4] }
    }

    pub fn with_gradient(mut self, g: impl Fn(&Arguments) -> [f64; 4] + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(g));
        self
    }

    /// Declares which of `x1..x4` the Lagrangian reads; partials in other slots are zero.
    pub fn with_dependencies(mut self, depends: [bool; 4]) -> Self {
        self.depends = depends;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dependencies(&self) -> [bool; 4] {
        self.depends
    }

    pub fn has_analytic_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    pub fn value(&self, x: &Arguments) -> f64 {
        (self.value)(x)
    }

    pub fn partials(&self, x: &Arguments) -> [f64; 4] {
        match &self.gradient {
            Some(g) => {
                let mut d = g(x);
                for i in 0..4 {
                    if !self.depends[i] {
                        d[i] = 0.0;
                    }
                }
                d
            }
            None => self.fd_partials(x),
        }
    }

    /// Central finite-difference partials with step `1e-6 max(1, |x_i|)`.
    pub fn fd_partials(&self, x: &Arguments) -> [f64; 4] {
        let mut d = [0.0; 4];
        for (i, di) in d.iter_mut().enumerate() {
            if !self.depends[i] {
                continue;
            }
            let xi = x.get(i);
            let h = fd_step(xi);
            let plus = self.value(&x.with(i, xi + h));
            let minus = self.value(&x.with(i, xi - h));
            *di = (plus - minus) / (2.0 * h);
        }
        d
    }

    pub fn depends_only_on_by(&self) -> bool {
        self.depends == [false, false, false, true]
    }

    /// `self - sum_k c_k G_k`.
    pub fn minus_combination(&self, terms: &[(f64, &LagrangianSpec)]) -> LagrangianSpec {
        if terms.iter().all(|(c, _)| *c == 0.0) {
            return self.clone();
        }
        let mut depends = self.depends;
        for (_, g) in terms {
            for i in 0..4 {
                depends[i] |= g.depends[i];
            }
        }
        let base = self.clone();
        let parts: Vec<(f64, LagrangianSpec)> = terms.iter().map(|(c, g)| (*c, (*g).clone())).collect();
        let value_parts = parts.clone();
        let value_base = base.clone();
        let value = move |x: &Arguments| {
            value_parts.iter().fold(value_base.value(x), |acc, (c, g)| acc - c * g.value(x))
        };
        let name = format!("{}-combination", self.name);
        let gradient = move |x: &Arguments| {
            let mut d = base.partials(x);
            for (c, g) in &parts {
                let dg = g.partials(x);
                for i in 0..4 {
                    d[i] -= c * dg[i];
                }
            }
            d
        };
        LagrangianSpec::new(name, value).with_gradient(gradient).with_dependencies(depends)
    }

    pub fn scaled(&self, c: f64) -> LagrangianSpec {
        let base = self.clone();
        let grad_base = self.clone();
        LagrangianSpec::new(format!("{}*{c}", self.name), move |x| c * base.value(x))
            .with_gradient(move |x| grad_base.partials(x).map(|v| c * v))
            .with_dependencies(self.depends)
    }

    /// Polynomial `sum c * x1^p1 x2^p2 x3^p3 x4^p4 t^p5` with analytic partials.
    pub fn polynomial(terms: Vec<Monomial>) -> Result<LagrangianSpec> {
        if terms.iter().any(|m| !m.coefficient.is_finite()) {
            return Err(Error::Domain("polynomial coefficients must be finite".into()));
        }
        let mut depends = [false; 4];
        for m in &terms {
            for i in 0..4 {
                depends[i] |= m.powers[i] > 0;
            }
        }
        let value_terms = terms.clone();
        let value = move |x: &Arguments| value_terms.iter().map(|m| m.eval(x)).sum();
        let gradient = move |x: &Arguments| {
            let mut d = [0.0; 4];
            for m in &terms {
                for (i, di) in d.iter_mut().enumerate() {
                    *di += m.partial(x, i);
                }
            }
            d
        };
        Ok(LagrangianSpec::new("polynomial", value).with_gradient(gradient).with_dependencies(depends))
    }
}

/// `coefficient * x1^p1 x2^p2 x3^p3 x4^p4 t^p5`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Monomial {
    pub coefficient: f64,
    pub powers: [u32; 5],
}

impl Monomial {
    pub fn eval(&self, x: &Arguments) -> f64 {
        (0..5).fold(self.coefficient, |acc, i| acc * x.get(i).powi(self.powers[i] as i32))
    }

    pub fn partial(&self, x: &Arguments, slot: usize) -> f64 {
        let p = self.powers[slot];
        if p == 0 {
            return 0.0;
        }
        (0..5).fold(self.coefficient * p as f64, |acc, i| {
            let e = if i == slot { p - 1 } else { self.powers[i] };
            acc * x.get(i).powi(e as i32)
        })
    }
}
