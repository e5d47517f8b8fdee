//! Helmholtz–Hodge decomposition of link net flows into a gradient part,
//! driven by per-node potentials, and a divergence-free circular part.
//!
//! With `B` the chosen link weight (flow or frequency):
//!
//! * net flow `F_ij = B_ij - B_ji`
//! * pair weight `w_ij = A_ij + A_ji`
//! * potentials solve `L φ = div F` where `L` is the graph Laplacian of `w`
//!   and `(div F)_i = Σ_j F_ij`, fixed by `Σ φ = 0` per weakly connected
//!   component
//! * gradient flow `w_ij (φ_i - φ_j)`, circular flow the remainder.
//!
//! A positive potential marks an upstream node.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::bowtie::{weakly_connected_components, BowtiePartition, Component, NodePartition};
use crate::network::{degree_stats, net_flow_per_node, pearson, FlowNetwork, WeightKind};

#[derive(Debug, Error, PartialEq)]
pub enum HodgeError {
    #[error("network is empty")]
    Empty,
    #[error("weighted graph has {0} connected components; enable per-component solving")]
    Disconnected(usize),
    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
}

/// One unordered node pair carrying at least one link, stored with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairFlow {
    pub a: u32,
    pub b: u32,
    /// `w_ab`, 1 or 2.
    pub weight: f64,
    /// `F_ab = B_ab - B_ba`.
    pub net_flow: f64,
}

/// Symmetric sparse matrix in CSR form.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<u32>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
            *yi = self.col_idx[lo..hi]
                .iter()
                .zip(&self.values[lo..hi])
                .map(|(&j, &v)| v * x[j as usize])
                .sum();
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        match self.col_idx[lo..hi].binary_search(&(j as u32)) {
            Ok(k) => self.values[lo + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.values[self.row_ptr[i]..self.row_ptr[i + 1]]
            .iter()
            .sum()
    }
}

#[derive(Debug, Clone)]
pub struct HodgeProblem {
    pub n: usize,
    pub kind: WeightKind,
    pub pairs: Vec<PairFlow>,
    /// `Σ_j F_ij` per node.
    pub divergence: Vec<f64>,
    pub laplacian: CsrMatrix,
}

impl HodgeProblem {
    /// `F_ij` for an arbitrary ordered pair.
    pub fn net_flow(&self, i: u32, j: u32) -> f64 {
        let (a, b, sign) = if i < j { (i, j, 1.0) } else { (j, i, -1.0) };
        self.pairs
            .binary_search_by_key(&(a, b), |p| (p.a, p.b))
            .map_or(0.0, |k| sign * self.pairs[k].net_flow)
    }

    pub fn weight(&self, i: u32, j: u32) -> f64 {
        let (a, b) = (i.min(j), i.max(j));
        self.pairs
            .binary_search_by_key(&(a, b), |p| (p.a, p.b))
            .map_or(0.0, |k| self.pairs[k].weight)
    }

    /// Components of the `w > 0` graph.
    pub fn components(&self) -> NodePartition {
        let mut parent: Vec<u32> = (0..self.n as u32).collect();
        fn find(p: &mut [u32], mut x: u32) -> u32 {
            while p[x as usize] != x {
                p[x as usize] = p[p[x as usize] as usize];
                x = p[x as usize];
            }
            x
        }
        for p in &self.pairs {
            let (ra, rb) = (find(&mut parent, p.a), find(&mut parent, p.b));
            if ra != rb {
                parent[ra.max(rb) as usize] = ra.min(rb);
            }
        }
        let roots: Vec<u32> = (0..self.n as u32).map(|v| find(&mut parent, v)).collect();
        let mut id = vec![u32::MAX; self.n];
        let mut next = 0;
        let labels = roots
            .into_iter()
            .map(|r| {
                if id[r as usize] == u32::MAX {
                    id[r as usize] = next;
                    next += 1;
                }
                id[r as usize]
            })
            .collect();
        NodePartition {
            labels,
            count: next as usize,
        }
    }
}

pub fn assemble_problem(net: &FlowNetwork, kind: WeightKind) -> Result<HodgeProblem, HodgeError> {
    if net.is_empty() {
        return Err(HodgeError::Empty);
    }
    let n = net.node_count();
    let mut by_pair: BTreeMap<(u32, u32), (f64, f64)> = BTreeMap::new();
    for l in net.links() {
        let b = kind.of(l);
        let (key, signed) = if l.source < l.target {
            ((l.source, l.target), b)
        } else {
            ((l.target, l.source), -b)
        };
        let e = by_pair.entry(key).or_default();
        e.0 += 1.0;
        e.1 += signed;
    }
    let pairs: Vec<PairFlow> = by_pair
        .into_iter()
        .map(|((a, b), (weight, net_flow))| PairFlow {
            a,
            b,
            weight,
            net_flow,
        })
        .collect();

    let mut divergence = vec![0.0; n];
    let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
    for p in &pairs {
        divergence[p.a as usize] += p.net_flow;
        divergence[p.b as usize] -= p.net_flow;
        rows[p.a as usize].push((p.b, -p.weight));
        rows[p.b as usize].push((p.a, -p.weight));
    }
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(2 * pairs.len() + n);
    let mut values = Vec::with_capacity(2 * pairs.len() + n);
    row_ptr.push(0);
    for (i, mut row) in rows.into_iter().enumerate() {
        let degree: f64 = -row.iter().map(|e| e.1).sum::<f64>();
        row.push((i as u32, degree));
        row.sort_unstable_by_key(|e| e.0);
        for (j, v) in row {
            col_idx.push(j);
            values.push(v);
        }
        row_ptr.push(col_idx.len());
    }
    Ok(HodgeProblem {
        n,
        kind,
        pairs,
        divergence,
        laplacian: CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Stop when `‖b - Lφ‖ ≤ tolerance · ‖b‖` on each component.
    pub tolerance: f64,
    /// Iteration cap is `iteration_factor × component size`.
    pub iteration_factor: usize,
    /// Solve each connected component separately; otherwise a disconnected
    /// input is an error.
    pub per_component: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            iteration_factor: 20,
            per_component: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Potentials {
    pub phi: Vec<f64>,
    /// Largest relative residual over components.
    pub residual: f64,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn remove_mean(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

// Jacobi-preconditioned CG on one connected component, in local indices.
// The preconditioned residual is projected off the constant vector so the
// iterates stay in the range of L. Convergence is confirmed on the true
// residual; a drifted recurrence restarts from it.
fn pcg(
    lap: &CsrMatrix,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, f64, usize), HodgeError> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return Ok((x, 0.0, 0));
    }
    let inv_diag: Vec<f64> = lap
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 0.0 })
        .collect();
    let mut r = b.to_vec();
    remove_mean(&mut r);
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut rz = 0.0;
    let mut restart = true;
    let mut it = 0;
    loop {
        if restart {
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            remove_mean(&mut z);
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
            restart = false;
        }
        let rel = dot(&r, &r).sqrt() / bnorm;
        if rel <= tol {
            lap.mul_vec(&x, &mut ap);
            for i in 0..n {
                r[i] = b[i] - ap[i];
            }
            let true_rel = dot(&r, &r).sqrt() / bnorm;
            if true_rel <= tol {
                remove_mean(&mut x);
                return Ok((x, true_rel, it));
            }
            restart = true;
            continue;
        }
        if it >= max_iter {
            return Err(HodgeError::NotConverged {
                iterations: it,
                residual: rel,
            });
        }
        lap.mul_vec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(HodgeError::NotConverged {
                iterations: it,
                residual: rel,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            z[i] = r[i] * inv_diag[i];
        }
        remove_mean(&mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        it += 1;
    }
}

// Restriction of the Laplacian to `nodes` (which must be a union of
// connected components).
fn sub_laplacian(lap: &CsrMatrix, nodes: &[u32], local: &[u32]) -> CsrMatrix {
    let mut row_ptr = Vec::with_capacity(nodes.len() + 1);
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    row_ptr.push(0);
    for &v in nodes {
        let (lo, hi) = (lap.row_ptr[v as usize], lap.row_ptr[v as usize + 1]);
        for k in lo..hi {
            col_idx.push(local[lap.col_idx[k] as usize]);
            values.push(lap.values[k]);
        }
        row_ptr.push(col_idx.len());
    }
    CsrMatrix {
        n: nodes.len(),
        row_ptr,
        col_idx,
        values,
    }
}

/// Hodge potentials, zero-mean on every connected component.
pub fn solve_potentials(
    problem: &HodgeProblem,
    opts: &SolverOptions,
) -> Result<Potentials, HodgeError> {
    if problem.n == 0 {
        return Err(HodgeError::Empty);
    }
    let comps = problem.components();
    if comps.count > 1 && !opts.per_component {
        return Err(HodgeError::Disconnected(comps.count));
    }
    let mut phi = vec![0.0; problem.n];
    let mut worst = 0.0f64;
    let mut iterations = 0;
    if comps.count == 1 {
        let cap = opts.iteration_factor * problem.n;
        let (x, res, it) = pcg(&problem.laplacian, &problem.divergence, opts.tolerance, cap)?;
        return Ok(Potentials {
            phi: x,
            residual: res,
            iterations: it,
        });
    }
    let mut members: Vec<Vec<u32>> = vec![Vec::new(); comps.count];
    for (v, &c) in comps.labels.iter().enumerate() {
        members[c as usize].push(v as u32);
    }
    let mut local = vec![0u32; problem.n];
    for nodes in &members {
        if nodes.len() < 2 {
            continue;
        }
        for (k, &v) in nodes.iter().enumerate() {
            local[v as usize] = k as u32;
        }
        let lap = sub_laplacian(&problem.laplacian, nodes, &local);
        let b: Vec<f64> = nodes
            .iter()
            .map(|&v| problem.divergence[v as usize])
            .collect();
        let (x, res, it) = pcg(
            &lap,
            &b,
            opts.tolerance,
            opts.iteration_factor * nodes.len(),
        )?;
        for (k, &v) in nodes.iter().enumerate() {
            phi[v as usize] = x[k];
        }
        worst = worst.max(res);
        iterations = iterations.max(it);
    }
    Ok(Potentials {
        phi,
        residual: worst,
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairDecomposition {
    pub a: u32,
    pub b: u32,
    pub net_flow: f64,
    pub gradient: f64,
    pub circular: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HodgeDecomposition {
    pub potentials: Vec<f64>,
    pub pairs: Vec<PairDecomposition>,
}

impl HodgeDecomposition {
    /// `Σ_j F^(c)_ij` per node.
    pub fn circular_divergence(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.potentials.len()];
        for p in &self.pairs {
            d[p.a as usize] += p.circular;
            d[p.b as usize] -= p.circular;
        }
        d
    }

    pub fn to_link_tsv(&self, net: &FlowNetwork) -> String {
        let mut s = String::from("source\tdestination\tF\tF_gradient\tF_circular\n");
        for p in &self.pairs {
            s.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                net.id(p.a),
                net.id(p.b),
                p.net_flow,
                p.gradient,
                p.circular
            ));
        }
        s
    }
}

pub fn decompose(problem: &HodgeProblem, potentials: &[f64]) -> HodgeDecomposition {
    let pairs = problem
        .pairs
        .iter()
        .map(|p| {
            let gradient = p.weight * (potentials[p.a as usize] - potentials[p.b as usize]);
            PairDecomposition {
                a: p.a,
                b: p.b,
                net_flow: p.net_flow,
                gradient,
                circular: p.net_flow - gradient,
            }
        })
        .collect();
    HodgeDecomposition {
        potentials: potentials.to_vec(),
        pairs,
    }
}

/// Assemble, solve, decompose.
pub fn hodge(
    net: &FlowNetwork,
    kind: WeightKind,
    opts: &SolverOptions,
) -> Result<(HodgeProblem, HodgeDecomposition), HodgeError> {
    let problem = assemble_problem(net, kind)?;
    let pot = solve_potentials(&problem, opts)?;
    let dec = decompose(&problem, &pot.phi);
    Ok((problem, dec))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialHistograms {
    /// `bins + 1` edges.
    pub edges: Vec<f64>,
    pub counts: BTreeMap<Component, Vec<usize>>,
    pub means: BTreeMap<Component, Option<f64>>,
}

impl PotentialHistograms {
    pub fn bin_of(&self, x: f64) -> usize {
        let bins = self.edges.len() - 1;
        let (lo, hi) = (self.edges[0], self.edges[bins]);
        (((x - lo) / (hi - lo) * bins as f64).floor() as usize).min(bins - 1)
    }
}

/// Histograms of φ per bowtie component over one shared equal-width binning
/// spanning the GWCC potentials.
pub fn potential_histograms(
    phi: &[f64],
    partition: &BowtiePartition,
    bins: usize,
) -> PotentialHistograms {
    let bins = bins.max(1);
    let in_gwcc = || {
        phi.iter()
            .zip(&partition.component_of)
            .filter(|(_, c)| **c != Component::OutsideGwcc)
    };
    let (mut lo, mut hi) = in_gwcc().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), (&x, _)| {
        (l.min(x), h.max(x))
    });
    if !lo.is_finite() {
        lo = 0.0;
        hi = 0.0;
    }
    if hi <= lo {
        lo -= 0.5;
        hi += 0.5;
    }
    let edges: Vec<f64> = (0..=bins)
        .map(|k| lo + (hi - lo) * k as f64 / bins as f64)
        .collect();
    let mut h = PotentialHistograms {
        edges,
        counts: Component::BOWTIE
            .iter()
            .map(|&c| (c, vec![0; bins]))
            .collect(),
        means: BTreeMap::new(),
    };
    let mut sums: BTreeMap<Component, (f64, usize)> = BTreeMap::new();
    for (&x, &c) in in_gwcc() {
        let b = h.bin_of(x);
        h.counts.get_mut(&c).expect("bowtie component")[b] += 1;
        let e = sums.entry(c).or_default();
        e.0 += x;
        e.1 += 1;
    }
    h.means = Component::BOWTIE
        .iter()
        .map(|&c| (c, sums.get(&c).map(|(s, k)| s / *k as f64)))
        .collect();
    h
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialVsNet {
    /// `(φ_i, net_degree_i)`.
    pub degree_pairs: Vec<(f64, i64)>,
    /// `(φ_i, net_flow_i)`.
    pub flow_pairs: Vec<(f64, i128)>,
    pub degree_pearson: Option<f64>,
    pub flow_pearson: Option<f64>,
}

/// Pairs φ with net degree and net money flow; `nodes` restricts the sample
/// (e.g. to the GWCC), `None` uses every node.
pub fn potential_vs_net(phi: &[f64], net: &FlowNetwork, nodes: Option<&[u32]>) -> PotentialVsNet {
    let degs = degree_stats(net);
    let flows = net_flow_per_node(net);
    let all: Vec<u32>;
    let nodes = match nodes {
        Some(n) => n,
        None => {
            all = (0..net.node_count() as u32).collect();
            &all
        }
    };
    let degree_pairs: Vec<(f64, i64)> = nodes
        .iter()
        .map(|&v| (phi[v as usize], degs[v as usize].net_degree))
        .collect();
    let flow_pairs: Vec<(f64, i128)> = nodes
        .iter()
        .map(|&v| (phi[v as usize], flows[v as usize]))
        .collect();
    let xs: Vec<f64> = degree_pairs.iter().map(|p| p.0).collect();
    let dy: Vec<f64> = degree_pairs.iter().map(|p| p.1 as f64).collect();
    let fy: Vec<f64> = flow_pairs.iter().map(|p| p.1 as f64).collect();
    PotentialVsNet {
        degree_pearson: pearson(&xs, &dy),
        flow_pearson: pearson(&xs, &fy),
        degree_pairs,
        flow_pairs,
    }
}

/// Nodes of the giant weakly connected component.
pub fn gwcc_nodes(net: &FlowNetwork) -> Vec<u32> {
    let wcc = weakly_connected_components(net);
    match wcc.largest() {
        Some(g) => wcc.members(g),
        None => Vec::new(),
    }
}

pub fn potentials_tsv(
    net: &FlowNetwork,
    phi: &[f64],
    partition: Option<&BowtiePartition>,
) -> String {
    let degs = degree_stats(net);
    let flows = net_flow_per_node(net);
    let mut s = String::from("node_id\tphi\tnet_degree\tnet_flow\tbowtie_component\n");
    for v in 0..net.node_count() {
        let comp = partition.map_or("", |p| p.component_of[v].as_str());
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            net.id(v as u32),
            phi[v],
            degs[v].net_degree,
            flows[v],
            comp
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net(n: usize, edges: &[(u32, u32, u64)]) -> FlowNetwork {
        let e: Vec<_> = edges.iter().map(|&(s, t, g)| (s, t, g * 10, g)).collect();
        FlowNetwork::from_edges(n, &e).unwrap()
    }

    #[test]
    fn assemble_mutual_pair() {
        let p = assemble_problem(&net(2, &[(0, 1, 3), (1, 0, 1)]), WeightKind::Frequency).unwrap();
        assert_eq!(
            p.pairs,
            vec![PairFlow {
                a: 0,
                b: 1,
                weight: 2.0,
                net_flow: 2.0
            }]
        );
        assert_eq!(p.net_flow(1, 0), -2.0);
        assert_eq!(p.weight(1, 0), 2.0);
        let p = assemble_problem(&net(2, &[(0, 1, 3), (1, 0, 1)]), WeightKind::Flow).unwrap();
        assert_eq!(p.pairs[0].net_flow, 20.0);
    }

    #[test]
    fn assemble_single_link() {
        let p = assemble_problem(&net(2, &[(0, 1, 1)]), WeightKind::Frequency).unwrap();
        assert_eq!(p.pairs[0].net_flow, 1.0);
        assert_eq!(p.pairs[0].weight, 1.0);
        let l = &p.laplacian;
        assert_eq!(
            [l.get(0, 0), l.get(0, 1), l.get(1, 0), l.get(1, 1)],
            [1.0, -1.0, -1.0, 1.0]
        );
        assert_eq!(p.divergence, vec![1.0, -1.0]);
    }

    #[test]
    fn single_link_potentials() {
        let (_, d) = hodge(
            &net(2, &[(0, 1, 1)]),
            WeightKind::Frequency,
            &SolverOptions::default(),
        )
        .unwrap();
        assert!((d.potentials[0] - 0.5).abs() < 1e-12 && (d.potentials[1] + 0.5).abs() < 1e-12);
        assert!((d.pairs[0].gradient - 1.0).abs() < 1e-12);
        assert!(d.pairs[0].circular.abs() < 1e-12);
    }

    #[test]
    fn three_cycle_is_circular() {
        let (_, d) = hodge(
            &net(3, &[(0, 1, 4), (1, 2, 4), (2, 0, 4)]),
            WeightKind::Frequency,
            &SolverOptions::default(),
        )
        .unwrap();
        assert!(d.potentials.iter().all(|p| p.abs() < 1e-12));
        for p in &d.pairs {
            assert!(p.gradient.abs() < 1e-12);
            assert_eq!(p.circular, p.net_flow);
        }
    }

    #[test]
    fn disconnected_needs_dispatch() {
        let g = net(4, &[(0, 1, 1), (2, 3, 2)]);
        let p = assemble_problem(&g, WeightKind::Frequency).unwrap();
        let strict = SolverOptions {
            per_component: false,
            ..Default::default()
        };
        assert_eq!(
            solve_potentials(&p, &strict),
            Err(HodgeError::Disconnected(2))
        );
        let phi = solve_potentials(&p, &SolverOptions::default()).unwrap().phi;
        let want = [0.5, -0.5, 1.0, -1.0];
        for (a, b) in phi.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn iteration_cap_reports_residual() {
        // a long path needs more than one iteration per node with a cap of 0
        let edges: Vec<_> = (0..30).map(|i| (i, i + 1, 1 + (i as u64 % 3))).collect();
        let p = assemble_problem(&net(31, &edges), WeightKind::Frequency).unwrap();
        let opts = SolverOptions {
            iteration_factor: 0,
            ..Default::default()
        };
        match solve_potentials(&p, &opts) {
            Err(HodgeError::NotConverged {
                iterations: 0,
                residual,
            }) => assert!(residual > 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mixed_graph_reconstruction_and_divergence() {
        let g = net(
            5,
            &[
                (0, 1, 2),
                (1, 2, 5),
                (2, 0, 1),
                (2, 3, 7),
                (3, 4, 1),
                (4, 3, 3),
            ],
        );
        let (p, d) = hodge(&g, WeightKind::Frequency, &SolverOptions::default()).unwrap();
        for (pd, pf) in d.pairs.iter().zip(&p.pairs) {
            assert_eq!(pd.gradient + pd.circular, pf.net_flow);
        }
        let scale = p.divergence.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(d
            .circular_divergence()
            .iter()
            .all(|x| x.abs() <= 1e-9 * scale));
        assert!(d.potentials.iter().sum::<f64>().abs() < 1e-12);
        // the pendant edge 2→3 carries no circulation
        let pend = d.pairs.iter().find(|x| (x.a, x.b) == (2, 3)).unwrap();
        assert!(pend.circular.abs() < 1e-9);
    }

    #[test]
    fn laplacian_rows_sum_to_zero() {
        let g = net(
            6,
            &[
                (0, 1, 2),
                (1, 0, 5),
                (2, 1, 1),
                (3, 2, 7),
                (4, 5, 1),
                (5, 0, 3),
            ],
        );
        let p = assemble_problem(&g, WeightKind::Frequency).unwrap();
        for i in 0..6 {
            assert_eq!(p.laplacian.row_sum(i), 0.0);
        }
    }

    #[test]
    fn histogram_degenerate_all_zero() {
        let partition = BowtiePartition {
            component_of: vec![Component::Gscc, Component::Gscc],
            sizes: crate::bowtie::ComponentSizes {
                gscc: 2,
                in_: 0,
                out: 0,
                te: 0,
            },
            gwcc_size: 2,
        };
        let h = potential_histograms(&[0.0, 0.0], &partition, 100);
        let gscc = &h.counts[&Component::Gscc];
        assert_eq!(gscc.iter().sum::<usize>(), 2);
        assert_eq!(gscc[h.bin_of(0.0)], 2);
        assert!(h.edges[h.bin_of(0.0)] <= 0.0 && 0.0 < h.edges[h.bin_of(0.0) + 1]);
    }

    #[test]
    fn potential_vs_net_signs() {
        let g = net(2, &[(0, 1, 1)]);
        let (_, d) = hodge(&g, WeightKind::Frequency, &SolverOptions::default()).unwrap();
        let pv = potential_vs_net(&d.potentials, &g, None);
        assert!(pv.degree_pairs[0].0 > 0.0 && pv.degree_pairs[0].1 == -1);
        assert!(pv.degree_pairs[1].0 < 0.0 && pv.degree_pairs[1].1 == 1);

        let g = net(2, &[(0, 1, 2), (1, 0, 2)]);
        let (_, d) = hodge(&g, WeightKind::Frequency, &SolverOptions::default()).unwrap();
        let pv = potential_vs_net(&d.potentials, &g, None);
        assert_eq!(pv.degree_pairs, vec![(0.0, 0), (0.0, 0)]);
    }
}
