//! Lossless network: topology, susceptances, nodal dq currents and power
//! flows between internal emf sources.
//!
//! Every node is a machine. The machine's series reactance (X_d'' for the
//! subtransient models, X_d' for the transient and classical ones) is folded
//! into the line reactance, so `X_ik = X_T,ik + X_series,i + X_series,k` and
//! `B_ik = −1/X_ik`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use petgraph::algo::connected_components;
use petgraph::graph::UnGraph;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Above this node count B is kept in adjacency form only.
pub const DENSE_LIMIT: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    /// Transmission line reactance X_T.
    #[serde(rename = "X_T")]
    pub x_t: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    Dense(DMatrix<f64>),
    Sparse(Vec<BTreeMap<usize, f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n: usize,
    lines: Vec<Line>,
    x_series: Vec<f64>,
    b_line: Vec<f64>,
    b_diag: Vec<f64>,
    neighbors: Vec<Vec<(usize, f64)>>,
    storage: Storage,
}

impl Grid {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn x_series(&self) -> &[f64] {
        &self.x_series
    }

    /// Susceptance `B_ik` of line `e` (negative).
    pub fn line_susceptance(&self, e: usize) -> f64 {
        self.b_line[e]
    }

    /// Total reactance between the two emf sources of line `e`.
    pub fn line_reactance(&self, e: usize) -> f64 {
        -1.0 / self.b_line[e]
    }

    /// `B_ii = Σ_k B_ik`.
    pub fn b_diag(&self, i: usize) -> f64 {
        self.b_diag[i]
    }

    /// `(k, B_ik)` for every neighbour k of node i.
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.neighbors[i]
    }

    /// Entry `(i, k)` of the susceptance array.
    pub fn b(&self, i: usize, k: usize) -> f64 {
        match &self.storage {
            Storage::Dense(m) => m[(i, k)],
            Storage::Sparse(rows) => {
                if i == k {
                    self.b_diag[i]
                } else {
                    rows[i].get(&k).copied().unwrap_or(0.0)
                }
            }
        }
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.storage, Storage::Dense(_))
    }

    fn check_len(&self, got: usize) -> Result<()> {
        if got != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got });
        }
        Ok(())
    }
}

pub fn build_grid(n: usize, lines: &[Line], x_series: &[f64]) -> Result<Grid> {
    if n == 0 {
        return Err(Error::Topology("grid needs at least one node".into()));
    }
    if x_series.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x_series.len() });
    }
    if let Some(i) = x_series.iter().position(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(Error::Topology(format!("series reactance of node {i} must be > 0")));
    }
    let mut graph = UnGraph::<(), ()>::with_capacity(n, lines.len());
    for _ in 0..n {
        graph.add_node(());
    }
    let mut seen = std::collections::BTreeSet::new();
    let mut b_line = Vec::with_capacity(lines.len());
    let mut neighbors = vec![Vec::new(); n];
    let mut b_diag = vec![0.0; n];
    for (e, l) in lines.iter().enumerate() {
        if l.from >= n || l.to >= n {
            return Err(Error::Topology(format!("line {e} references a node outside 0..{n}")));
        }
        if l.from == l.to {
            return Err(Error::Topology(format!("line {e} is a self loop")));
        }
        if !seen.insert((l.from.min(l.to), l.from.max(l.to))) {
            return Err(Error::Topology(format!("line {e} duplicates an earlier line")));
        }
        if !(l.x_t > 0.0 && l.x_t.is_finite()) {
            return Err(Error::Topology(format!("line {e} reactance must be > 0")));
        }
        let x = l.x_t + x_series[l.from] + x_series[l.to];
        let b = -1.0 / x;
        b_line.push(b);
        neighbors[l.from].push((l.to, b));
        neighbors[l.to].push((l.from, b));
        graph.add_edge((l.from as u32).into(), (l.to as u32).into(), ());
    }
    if connected_components(&graph) != 1 {
        return Err(Error::Disconnected);
    }
    for (i, nb) in neighbors.iter().enumerate() {
        b_diag[i] = nb.iter().map(|(_, b)| b).sum();
    }
    let storage = if n <= DENSE_LIMIT {
        let mut m = DMatrix::zeros(n, n);
        for (i, nb) in neighbors.iter().enumerate() {
            m[(i, i)] = b_diag[i];
            for &(k, b) in nb {
                m[(i, k)] = b;
            }
        }
        Storage::Dense(m)
    } else {
        Storage::Sparse(neighbors.iter().map(|nb| nb.iter().copied().collect()).collect())
    };
    Ok(Grid { n, lines: lines.to_vec(), x_series: x_series.to_vec(), b_line, b_diag, neighbors, storage })
}

/// Nodal dq currents injected by the emf sources:
///
/// ```text
/// I_di =  B_ii E_qi − Σ_k B_ik (E_dk sin δ_ik + E_qk cos δ_ik)
/// I_qi = −B_ii E_di − Σ_k B_ik (E_qk sin δ_ik − E_dk cos δ_ik)
/// ```
pub fn dq_currents(g: &Grid, delta: &[f64], e_d: &[f64], e_q: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    g.check_len(delta.len())?;
    g.check_len(e_d.len())?;
    g.check_len(e_q.len())?;
    let mut i_d = vec![0.0; g.n];
    let mut i_q = vec![0.0; g.n];
    for i in 0..g.n {
        let mut sd = g.b_diag[i] * e_q[i];
        let mut sq = -g.b_diag[i] * e_d[i];
        for &(k, b) in &g.neighbors[i] {
            let (s, c) = (delta[i] - delta[k]).sin_cos();
            sd -= b * (e_d[k] * s + e_q[k] * c);
            sq -= b * (e_q[k] * s - e_d[k] * c);
        }
        i_d[i] = sd;
        i_q[i] = sq;
    }
    Ok((i_d, i_q))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFlow {
    pub from: usize,
    pub to: usize,
    /// Power sent from `from` towards `to`.
    pub p_from_to: f64,
    /// Power sent from `to` towards `from`.
    pub p_to_from: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerFlows {
    /// Electrical power produced at each node, `E_d I_d + E_q I_q`.
    pub p_e: Vec<f64>,
    pub lines: Vec<LineFlow>,
}

/// `P_ik = −B_ik [(E_di E_dk + E_qi E_qk) sin δ_ik + (E_di E_qk − E_qi E_dk) cos δ_ik]`.
pub fn line_power(b: f64, delta_ik: f64, e_di: f64, e_qi: f64, e_dk: f64, e_qk: f64) -> f64 {
    let (s, c) = delta_ik.sin_cos();
    -b * ((e_di * e_dk + e_qi * e_qk) * s + (e_di * e_qk - e_qi * e_dk) * c)
}

pub fn node_and_line_power(g: &Grid, delta: &[f64], e_d: &[f64], e_q: &[f64]) -> Result<PowerFlows> {
    let (i_d, i_q) = dq_currents(g, delta, e_d, e_q)?;
    let p_e = (0..g.n).map(|i| e_d[i] * i_d[i] + e_q[i] * i_q[i]).collect();
    let lines = g
        .lines
        .iter()
        .zip(&g.b_line)
        .map(|(l, &b)| {
            let (i, k) = (l.from, l.to);
            LineFlow {
                from: i,
                to: k,
                p_from_to: line_power(b, delta[i] - delta[k], e_d[i], e_q[i], e_d[k], e_q[k]),
                p_to_from: line_power(b, delta[k] - delta[i], e_d[k], e_q[k], e_d[i], e_q[i]),
            }
        })
        .collect();
    Ok(PowerFlows { p_e, lines })
}

/// Grid for the classical model, optionally with conductances.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalGrid {
    pub grid: Grid,
    /// Self conductance G_ii per node.
    pub g_diag: Vec<f64>,
    /// Transfer conductance G_ik per line, in line order.
    pub g_line: Vec<f64>,
}

impl ClassicalGrid {
    pub fn lossless(grid: Grid) -> Self {
        let n = grid.n();
        let m = grid.lines().len();
        ClassicalGrid { grid, g_diag: vec![0.0; n], g_line: vec![0.0; m] }
    }

    pub fn with_conductances(grid: Grid, g_diag: Vec<f64>, g_line: Vec<f64>) -> Result<Self> {
        if g_diag.len() != grid.n() {
            return Err(Error::DimensionMismatch { expected: grid.n(), got: g_diag.len() });
        }
        if g_line.len() != grid.lines().len() {
            return Err(Error::DimensionMismatch { expected: grid.lines().len(), got: g_line.len() });
        }
        if g_diag.iter().chain(&g_line).any(|v| !v.is_finite()) {
            return Err(Error::Topology("non-finite conductance".into()));
        }
        Ok(ClassicalGrid { grid, g_diag, g_line })
    }

    pub fn is_lossless(&self) -> bool {
        self.g_diag.iter().chain(&self.g_line).all(|g| *g == 0.0)
    }
}

/// `P_ei = G_ii|E_i|² − Σ_k (G_ik cos θ_ik + B_ik sin θ_ik)|E_i||E_k|`.
pub fn classical_power(cg: &ClassicalGrid, theta: &[f64], e_mag: &[f64]) -> Result<Vec<f64>> {
    let g = &cg.grid;
    g.check_len(theta.len())?;
    g.check_len(e_mag.len())?;
    if let Some(i) = e_mag.iter().position(|e| !(*e > 0.0)) {
        return Err(Error::InvalidParams(format!("|E'| of node {i} must be > 0")));
    }
    let mut p: Vec<f64> = (0..g.n).map(|i| cg.g_diag[i] * e_mag[i] * e_mag[i]).collect();
    for (e, l) in g.lines.iter().enumerate() {
        let (i, k) = (l.from, l.to);
        let b = g.b_line[e];
        let gc = cg.g_line[e];
        let th = theta[i] - theta[k];
        let (s, c) = th.sin_cos();
        let ee = e_mag[i] * e_mag[k];
        // sin is odd in θ_ik, cos even
        p[i] -= (gc * c + b * s) * ee;
        p[k] -= (gc * c - b * s) * ee;
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use std::f64::consts::PI;

    fn two_node() -> Grid {
        build_grid(2, &[Line { from: 0, to: 1, x_t: 0.5 }], &[0.2, 0.3]).unwrap()
    }

    #[test]
    fn two_node_assembly() {
        let g = two_node();
        assert!((g.line_reactance(0) - 1.0).abs() < 1e-15);
        assert!((g.b(0, 1) + 1.0).abs() < 1e-15);
        assert_eq!(g.b(0, 1), g.b(1, 0));
        assert!((g.b(0, 0) + 1.0).abs() < 1e-15);
        assert!((g.b(1, 1) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn path_graph_has_zero_off_edge() {
        let lines = [Line { from: 0, to: 1, x_t: 0.4 }, Line { from: 1, to: 2, x_t: 0.7 }];
        let g = build_grid(3, &lines, &[0.1, 0.1, 0.1]).unwrap();
        assert_eq!(g.b(0, 2), 0.0);
        assert_eq!(g.b(1, 1), g.b(1, 0) + g.b(1, 2));
    }

    #[test]
    fn rejects_bad_topologies() {
        let l = [Line { from: 0, to: 1, x_t: 0.5 }];
        assert_eq!(build_grid(3, &l, &[0.1; 3]), Err(Error::Disconnected));
        assert!(matches!(build_grid(2, &[Line { from: 0, to: 1, x_t: 0.0 }], &[0.1; 2]), Err(Error::Topology(_))));
        assert!(matches!(build_grid(2, &l, &[0.1, -0.1]), Err(Error::Topology(_))));
        assert!(matches!(
            build_grid(2, &[l[0], Line { from: 1, to: 0, x_t: 0.2 }], &[0.1; 2]),
            Err(Error::Topology(_))
        ));
        assert!(matches!(build_grid(2, &[Line { from: 0, to: 2, x_t: 0.2 }], &[0.1; 2]), Err(Error::Topology(_))));
        assert!(build_grid(1, &[], &[0.1]).is_ok());
    }

    #[test]
    fn sparse_storage_above_limit() {
        let n = DENSE_LIMIT + 6;
        let lines: Vec<_> = (0..n - 1).map(|i| Line { from: i, to: i + 1, x_t: 0.3 }).collect();
        let g = build_grid(n, &lines, &vec![0.1; n]).unwrap();
        assert!(!g.is_dense());
        assert!((g.b(3, 4) + 1.0 / 0.5).abs() < 1e-14);
        assert_eq!(g.b(3, 7), 0.0);
        assert!((g.b(3, 3) + 4.0).abs() < 1e-14);
        let small = build_grid(3, &lines[..2], &[0.1; 3]).unwrap();
        assert!(small.is_dense());
    }

    #[test]
    fn symmetric_equilibrium_has_no_current() {
        let g = two_node();
        let (i_d, i_q) = dq_currents(&g, &[0.0, 0.0], &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!(i_d.iter().chain(&i_q).all(|v| v.abs() < 1e-15));
        let pf = node_and_line_power(&g, &[0.0, 0.0], &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!(pf.p_e.iter().all(|p| p.abs() < 1e-15));
    }

    #[test]
    fn thirty_degree_example() {
        let g = two_node();
        let delta = [PI / 6.0, 0.0];
        let (i_d, i_q) = dq_currents(&g, &delta, &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((i_d[0] - (-1.0 + (PI / 6.0).cos())).abs() < 1e-15);
        assert!((i_d[0] + 0.133975).abs() < 1e-6);
        assert!((i_q[0] - 0.5).abs() < 1e-15);
        let pf = node_and_line_power(&g, &delta, &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((pf.p_e[0] - 0.5).abs() < 1e-15);
        assert!((pf.p_e[1] + 0.5).abs() < 1e-15);
        // complex-phasor cross check at node 0: I = jB_00 E_0 − jB_01 e^{−jδ_01} E_1
        let e0 = Complex64::new(1.0, 0.0);
        let e1 = Complex64::new(1.0, 0.0);
        let j = Complex64::i();
        let i0 = j * g.b(0, 0) * e0 - j * g.b(0, 1) * Complex64::from_polar(1.0, -PI / 6.0) * e1;
        assert!((i0.re - i_q[0]).abs() < 1e-15 && (i0.im - i_d[0]).abs() < 1e-15);
    }

    #[test]
    fn classical_power_cases() {
        let g = build_grid(2, &[Line { from: 0, to: 1, x_t: 0.6 }], &[0.2, 0.2]).unwrap();
        let cg = ClassicalGrid::lossless(g.clone());
        let p = classical_power(&cg, &[0.3, 0.3], &[1.0, 1.2]).unwrap();
        assert!(p.iter().all(|v| v.abs() < 1e-15));
        let p = classical_power(&cg, &[PI / 6.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15);
        // matches the dq path with E_d = 0 (α = 0)
        let pf = node_and_line_power(&g, &[PI / 6.0, 0.0], &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((p[0] - pf.p_e[0]).abs() < 1e-15 && (p[1] - pf.p_e[1]).abs() < 1e-15);

        let cg = ClassicalGrid::with_conductances(g, vec![0.2, 0.0], vec![0.0]).unwrap();
        let p = classical_power(&cg, &[0.0, 0.0], &[1.5, 1.0]).unwrap();
        assert!((p[0] - 0.2 * 2.25).abs() < 1e-15);
        assert!(!cg.is_lossless());
        assert!(classical_power(&cg, &[0.0, 0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn dimension_checks() {
        let g = two_node();
        assert_eq!(
            dq_currents(&g, &[0.0], &[0.0, 0.0], &[1.0, 1.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        );
    }
}
