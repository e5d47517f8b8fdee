//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use moneyflow::bowtie::Component;
use moneyflow::network::FlowNetwork;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random simple digraph on `n` nodes with link probability `p`; flows and
/// frequencies drawn from small ranges.
pub fn random_digraph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Vec<(u32, u32, u64, u64)> {
    let mut edges = Vec::new();
    for s in 0..n as u32 {
        for t in 0..n as u32 {
            if s != t && rng.random::<f64>() < p {
                edges.push((
                    s,
                    t,
                    rng.random_range(1..1_000_000),
                    rng.random_range(1..60),
                ));
            }
        }
    }
    edges
}

/// Random digraph whose underlying undirected graph is connected: a random
/// spanning tree with random orientations plus extra links.
pub fn random_connected(rng: &mut ChaCha8Rng, n: usize, extra: f64) -> Vec<(u32, u32, u64, u64)> {
    let mut seen = std::collections::HashSet::new();
    let mut edges = Vec::new();
    let mut push = |s: u32, t: u32, rng: &mut ChaCha8Rng, edges: &mut Vec<_>| {
        if s != t && seen.insert((s, t)) {
            edges.push((
                s,
                t,
                rng.random_range(1..1_000_000u64),
                rng.random_range(1..60u64),
            ));
        }
    };
    for v in 1..n as u32 {
        let u = rng.random_range(0..v);
        if rng.random::<bool>() {
            push(u, v, rng, &mut edges);
        } else {
            push(v, u, rng, &mut edges);
        }
    }
    for s in 0..n as u32 {
        for t in 0..n as u32 {
            if rng.random::<f64>() < extra {
                push(s, t, rng, &mut edges);
            }
        }
    }
    edges
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Reflexive transitive closure by Floyd-Warshall.
fn closure(n: usize, adj: &[(usize, usize)]) -> Vec<Vec<bool>> {
    let mut r = vec![vec![false; n]; n];
    for (i, row) in r.iter_mut().enumerate() {
        row[i] = true;
    }
    for &(s, t) in adj {
        r[s][t] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if r[i][k] {
                for j in 0..n {
                    if r[k][j] {
                        r[i][j] = true;
                    }
                }
            }
        }
    }
    r
}

/// Largest class of an equivalence given by `same`; ties go to the class
/// containing the smallest node.
fn largest_class(
    n: usize,
    members: impl Fn(usize) -> Vec<usize>,
    allowed: impl Fn(usize) -> bool,
) -> Vec<usize> {
    let mut best: Vec<usize> = Vec::new();
    for v in 0..n {
        if !allowed(v) {
            continue;
        }
        let c = members(v);
        if c.len() > best.len() {
            best = c;
        }
    }
    best
}

/// Bowtie labels from reachability alone.
pub fn bowtie_oracle(n: usize, edges: &[(u32, u32, u64, u64)]) -> Vec<Component> {
    let directed: Vec<(usize, usize)> =
        edges.iter().map(|e| (e.0 as usize, e.1 as usize)).collect();
    let mut undirected = directed.clone();
    undirected.extend(directed.iter().map(|&(s, t)| (t, s)));
    let reach = closure(n, &directed);
    let weak = closure(n, &undirected);
    let gwcc = largest_class(n, |v| (0..n).filter(|&u| weak[v][u]).collect(), |_| true);
    let in_gwcc: Vec<bool> = (0..n).map(|v| gwcc.contains(&v)).collect();
    let gscc = largest_class(
        n,
        |v| (0..n).filter(|&u| reach[v][u] && reach[u][v]).collect(),
        |v| in_gwcc[v],
    );
    let core = gscc[0];
    (0..n)
        .map(|v| {
            if !in_gwcc[v] {
                Component::OutsideGwcc
            } else if gscc.contains(&v) {
                Component::Gscc
            } else if reach[v][core] {
                Component::In
            } else if reach[core][v] {
                Component::Out
            } else {
                Component::Te
            }
        })
        .collect()
}

/// Net flow `F` and weight `w` as dense matrices, frequency weighting.
pub fn dense_flows(n: usize, edges: &[(u32, u32, u64, u64)]) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DMatrix::<f64>::zeros(n, n);
    for &(s, t, _, g) in edges {
        a[(s as usize, t as usize)] = 1.0;
        b[(s as usize, t as usize)] = g as f64;
    }
    let f = &b - b.transpose();
    let w = &a + a.transpose();
    (f, w)
}

/// Zero-mean potentials from a dense solve of `L φ = div F` on a connected
/// graph, gauge fixed by adding the all-ones projector.
pub fn dense_potentials(n: usize, edges: &[(u32, u32, u64, u64)]) -> Vec<f64> {
    let (f, w) = dense_flows(n, edges);
    let mut l = -w.clone();
    for i in 0..n {
        l[(i, i)] = w.row(i).sum();
    }
    let div = DVector::from_iterator(n, (0..n).map(|i| f.row(i).sum()));
    let ones = DMatrix::from_element(n, n, 1.0 / n as f64);
    let phi = (l + ones)
        .lu()
        .solve(&div)
        .expect("connected graph gives a regular system");
    let mean = phi.mean();
    phi.iter().map(|x| x - mean).collect()
}

/// Visit rates of the walk with teleportation `tau` to nodes in proportion
/// to out-strength; dangling nodes always teleport. Dense eigen-solve.
pub fn stationary(
    n: usize,
    edges: &[(u32, u32, u64, u64)],
    tau: f64,
) -> (Vec<f64>, Vec<f64>, DMatrix<f64>) {
    let mut wgt = DMatrix::<f64>::zeros(n, n);
    for &(s, t, _, g) in edges {
        wgt[(s as usize, t as usize)] = g as f64;
    }
    let strength: Vec<f64> = (0..n).map(|i| wgt.row(i).sum()).collect();
    let total: f64 = strength.iter().sum();
    let target: Vec<f64> = strength.iter().map(|s| s / total).collect();
    // column-stochastic transition: m[(t, s)] = P(s -> t)
    let mut m = DMatrix::<f64>::zeros(n, n);
    for s in 0..n {
        for t in 0..n {
            m[(t, s)] = if strength[s] > 0.0 {
                (1.0 - tau) * wgt[(s, t)] / strength[s] + tau * target[t]
            } else {
                target[t]
            };
        }
    }
    // (M - I) p = 0 with the last equation replaced by sum(p) = 1
    let mut sys = m.clone() - DMatrix::<f64>::identity(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for j in 0..n {
        sys[(n - 1, j)] = 1.0;
    }
    rhs[n - 1] = 1.0;
    let p = sys.lu().solve(&rhs).expect("irreducible walk");
    // per-step flow on each ordered pair from link moves only
    let mut link = DMatrix::<f64>::zeros(n, n);
    for s in 0..n {
        if strength[s] > 0.0 {
            for t in 0..n {
                link[(s, t)] = (1.0 - tau) * p[s] * wgt[(s, t)] / strength[s];
            }
        }
    }
    (p.iter().copied().collect(), target, link)
}

fn entropy_term(x: f64) -> f64 {
    if x > 0.0 {
        -x * x.log2()
    } else {
        0.0
    }
}

/// Dense flow model of the walk, for evaluating labellings directly.
pub struct DenseModel {
    pub p: Vec<f64>,
    pub target: Vec<f64>,
    pub tele: Vec<f64>,
    pub link: DMatrix<f64>,
}

impl DenseModel {
    pub fn new(n: usize, edges: &[(u32, u32, u64, u64)], tau: f64) -> Self {
        let (p, target, link) = stationary(n, edges, tau);
        let tele = (0..n)
            .map(|s| {
                if edges.iter().any(|e| e.0 as usize == s) {
                    tau * p[s]
                } else {
                    p[s]
                }
            })
            .collect();
        Self {
            p,
            target,
            tele,
            link,
        }
    }

    /// Two-level map equation `L = q H(Q) + Σ_m p_m H(P_m)` for labels below
    /// 16. Exit rate of a module counts link flow leaving it and teleports
    /// landing outside it.
    pub fn codelength(&self, labels: &[usize]) -> f64 {
        let n = labels.len();
        let k = labels.iter().max().map_or(0, |m| m + 1);
        let mut exit = [0.0; 16];
        let mut visits = [0.0; 16];
        for s in 0..n {
            let mut outside = 0.0;
            for t in 0..n {
                if labels[t] != labels[s] {
                    outside += self.target[t];
                    exit[labels[s]] += self.link[(s, t)];
                }
            }
            exit[labels[s]] += self.tele[s] * outside;
            visits[labels[s]] += self.p[s];
        }
        let q: f64 = exit[..k].iter().sum();
        let mut l = 0.0;
        if q > 0.0 {
            l += q * exit[..k].iter().map(|&e| entropy_term(e / q)).sum::<f64>();
        }
        let mut pm = [0.0; 16];
        for m in 0..k {
            pm[m] = exit[m] + visits[m];
            if pm[m] > 0.0 {
                l += pm[m] * entropy_term(exit[m] / pm[m]);
            }
        }
        for v in 0..n {
            let m = labels[v];
            if pm[m] > 0.0 {
                l += pm[m] * entropy_term(self.p[v] / pm[m]);
            }
        }
        l
    }
}

/// Every set partition of `0..n` as restricted growth strings.
pub fn for_each_partition(n: usize, mut f: impl FnMut(&[usize])) {
    let mut a = vec![0usize; n];
    let mut maxes = vec![0usize; n];
    loop {
        f(&a);
        // next restricted growth string
        let mut i = n;
        loop {
            if i <= 1 {
                return;
            }
            i -= 1;
            let limit = maxes[i - 1] + 1;
            if a[i] < limit {
                a[i] += 1;
                maxes[i] = maxes[i - 1].max(a[i]);
                for j in i + 1..n {
                    a[j] = 0;
                    maxes[j] = maxes[i];
                }
                break;
            }
        }
    }
}

/// Minimum two-level codelength over all partitions, by enumeration.
pub fn exhaustive_minimum(n: usize, edges: &[(u32, u32, u64, u64)], tau: f64) -> (f64, Vec<usize>) {
    let model = DenseModel::new(n, edges, tau);
    let mut best = (f64::INFINITY, Vec::new());
    for_each_partition(n, |labels| {
        let l = model.codelength(labels);
        if l < best.0 {
            best = (l, labels.to_vec());
        }
    });
    best
}

/// Codelength of a given labelling under the dense model.
pub fn dense_codelength(
    n: usize,
    edges: &[(u32, u32, u64, u64)],
    tau: f64,
    labels: &[usize],
) -> f64 {
    DenseModel::new(n, edges, tau).codelength(labels)
}

pub fn network(n: usize, edges: &[(u32, u32, u64, u64)]) -> FlowNetwork {
    FlowNetwork::from_edges(n, edges).expect("valid edges")
}
