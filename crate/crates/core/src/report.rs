//! Per-node residuals with norms, and CSV/JSON rendering.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::grid::GridFunction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub nodes: Vec<f64>,
    pub residual: Vec<f64>,
    pub max_abs: f64,
    /// `sqrt(h sum r_j^2)` with `h` the node spacing (plain root-sum-square for a single node).
    pub l2: f64,
    pub boundary_term: Option<f64>,
}

impl ResidualReport {
    pub fn new(nodes: Vec<f64>, residual: Vec<f64>) -> Self {
        assert_eq!(nodes.len(), residual.len(), "residual and node arrays differ in length");
        let max_abs = residual.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
        let h = if nodes.len() >= 2 { (nodes[1] - nodes[0]).abs() } else { 1.0 };
        let l2 = (h * residual.iter().map(|r| r * r).sum::<f64>()).sqrt();
        Self { nodes, residual, max_abs, l2, boundary_term: None }
    }

    /// Interior entries of nodal values on the grid of `like`.
    pub fn interior(like: &GridFunction, full: &[f64]) -> Self {
        let n = like.grid.n;
        let nodes = (1..n).map(|j| like.grid.node(j)).collect();
        Self::new(nodes, full[1..n].to_vec())
    }

    pub fn with_boundary_term(mut self, value: f64) -> Self {
        self.boundary_term = Some(value);
        self
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `t,residual` rows with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,residual\n");
        for (t, r) in self.nodes.iter().zip(&self.residual) {
            let _ = writeln!(out, "{},{}", fmt_f64(*t), fmt_f64(*r));
        }
        out
    }

    /// Norms and metadata (without the per-node arrays).
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "max_abs": self.max_abs,
            "l2": self.l2,
            "boundary_term": self.boundary_term,
            "nodes": self.nodes.len(),
            "t_min": self.nodes.first(),
            "t_max": self.nodes.last(),
        })
    }
}

/// Scientific rendering with 17 significant digits (round-trips exactly).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// `t,value` rows for a grid function.
pub fn grid_function_csv(f: &GridFunction, column: &str) -> String {
    let mut out = format!("t,{column}\n");
    for (j, v) in f.values.iter().enumerate() {
        let _ = writeln!(out, "{},{}", fmt_f64(f.grid.node(j)), fmt_f64(*v));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norms_match_entries() {
        let r = ResidualReport::new(vec![0.25, 0.5, 0.75], vec![1.0, -2.0, 0.5]);
        assert_eq!(r.max_abs, 2.0);
        assert!((r.l2 - (0.25f64 * 5.25).sqrt()).abs() < 1e-15);
        let csv = r.to_csv();
        assert!(csv.starts_with("t,residual\n2.5000000000000000e-1,1.0000000000000000e0\n"));
        let parsed: f64 = csv.lines().nth(2).unwrap().split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(parsed, -2.0);
        let json = r.summary_json();
        assert_eq!(json["max_abs"], 2.0);
    }
}
