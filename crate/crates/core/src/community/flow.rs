//! Random-walk flow model and the two-level map equation.

use crate::network::{FlowNetwork, WeightKind};

pub const TELEPORT_PROBABILITY: f64 = 0.15;
const PAGERANK_TOLERANCE: f64 = 1e-15;
const PAGERANK_MAX_ITERATIONS: usize = 10_000;

/// `x log2 x`, with `0 log 0 = 0`.
#[inline]
pub fn plogp(x: f64) -> f64 {
    if x > 0.0 {
        x * x.log2()
    } else {
        0.0
    }
}

/// Stationary flow of a weighted directed walk with recorded teleportation.
/// With probability `teleport` the walker jumps to a node drawn proportionally
/// to out-strength; dangling nodes always jump.
#[derive(Debug, Clone)]
pub struct FlowModel {
    /// Visit rate per node, summing to 1.
    pub node_flow: Vec<f64>,
    /// Flow leaving each node by teleportation.
    pub teleport_out: Vec<f64>,
    /// Teleport target distribution.
    pub teleport_target: Vec<f64>,
    /// `(source, target, flow)` for every link, flow from link steps only.
    pub link_flow: Vec<(u32, u32, f64)>,
}

impl FlowModel {
    pub fn new(net: &FlowNetwork, kind: WeightKind) -> Self {
        Self::with_teleport(net, kind, TELEPORT_PROBABILITY)
    }

    pub fn with_teleport(net: &FlowNetwork, kind: WeightKind, tau: f64) -> Self {
        let n = net.node_count();
        let mut strength = vec![0.0; n];
        for l in net.links() {
            strength[l.source as usize] += kind.of(l);
        }
        let total: f64 = strength.iter().sum();
        let target: Vec<f64> = if total > 0.0 {
            strength.iter().map(|s| s / total).collect()
        } else {
            vec![1.0 / n.max(1) as f64; n]
        };
        let mut p = vec![1.0 / n.max(1) as f64; n];
        let mut next = vec![0.0; n];
        for _ in 0..PAGERANK_MAX_ITERATIONS {
            let mut jump = 0.0;
            for v in 0..n {
                jump += if strength[v] > 0.0 { tau * p[v] } else { p[v] };
            }
            for (x, t) in next.iter_mut().zip(&target) {
                *x = jump * t;
            }
            for l in net.links() {
                let s = l.source as usize;
                next[l.target as usize] += (1.0 - tau) * p[s] * kind.of(l) / strength[s];
            }
            let norm: f64 = next.iter().sum();
            let mut diff = 0.0;
            for (a, b) in p.iter_mut().zip(&next) {
                let v = b / norm;
                diff += (v - *a).abs();
                *a = v;
            }
            if diff < PAGERANK_TOLERANCE {
                break;
            }
        }
        let teleport_out = (0..n)
            .map(|v| if strength[v] > 0.0 { tau * p[v] } else { p[v] })
            .collect();
        let link_flow = net
            .links()
            .iter()
            .map(|l| {
                let s = l.source as usize;
                (
                    l.source,
                    l.target,
                    (1.0 - tau) * p[s] * kind.of(l) / strength[s],
                )
            })
            .collect();
        Self {
            node_flow: p,
            teleport_out,
            teleport_target: target,
            link_flow,
        }
    }

    pub fn len(&self) -> usize {
        self.node_flow.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_flow.is_empty()
    }

    /// Exit flow of every module of `labels` (ids `0..count`).
    pub fn module_exits(&self, labels: &[u32], count: usize) -> Vec<f64> {
        let mut tele = vec![0.0; count];
        let mut target = vec![0.0; count];
        let mut links = vec![0.0; count];
        for v in 0..self.len() {
            let m = labels[v] as usize;
            tele[m] += self.teleport_out[v];
            target[m] += self.teleport_target[v];
        }
        for &(s, t, f) in &self.link_flow {
            let (ms, mt) = (labels[s as usize], labels[t as usize]);
            if ms != mt {
                links[ms as usize] += f;
            }
        }
        (0..count)
            .map(|m| tele[m] * (1.0 - target[m]) + links[m])
            .collect()
    }

    /// Two-level map equation of a partition given as dense labels.
    pub fn codelength(&self, labels: &[u32]) -> f64 {
        let count = labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
        let exits = self.module_exits(labels, count);
        let mut module_flow = vec![0.0; count];
        for (v, &m) in labels.iter().enumerate() {
            module_flow[m as usize] += self.node_flow[v];
        }
        two_level(
            0.0,
            &exits,
            &module_flow,
            self.node_flow.iter().map(|&p| plogp(p)).sum(),
        )
    }

    /// Codelength with all nodes in one module.
    pub fn one_module_codelength(&self) -> f64 {
        self.codelength(&vec![0; self.len()])
    }
}

/// `L = (o + Σq) H(index) + Σ_m (q_m + P_m) H(module m)` with an extra index
/// codeword of rate `offset` for leaving an enclosing module.
pub fn two_level(offset: f64, exits: &[f64], module_flow: &[f64], node_plogp: f64) -> f64 {
    let sum_exit: f64 = exits.iter().sum();
    let mut l = plogp(offset + sum_exit) - plogp(offset) - node_plogp;
    for (&q, &p) in exits.iter().zip(module_flow) {
        if p > 0.0 || q > 0.0 {
            l += plogp(q + p) - 2.0 * plogp(q);
        }
    }
    l
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_cycle_single_module() {
        let net = FlowNetwork::from_edges(2, &[(0, 1, 1, 1), (1, 0, 1, 1)]).unwrap();
        let fm = FlowModel::new(&net, WeightKind::Frequency);
        assert!((fm.node_flow[0] - 0.5).abs() < 1e-12);
        assert_eq!(fm.module_exits(&[0, 0], 1), vec![0.0]);
        // only the within-module entropy: one bit
        assert!((fm.one_module_codelength() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stationary_flow_is_conserved() {
        let net =
            FlowNetwork::from_edges(4, &[(0, 1, 1, 3), (1, 2, 1, 1), (2, 0, 1, 2), (2, 3, 1, 1)])
                .unwrap();
        let fm = FlowModel::new(&net, WeightKind::Frequency);
        let total_tele: f64 = fm.teleport_out.iter().sum();
        for v in 0..4 {
            let inflow: f64 = fm
                .link_flow
                .iter()
                .filter(|l| l.1 == v as u32)
                .map(|l| l.2)
                .sum::<f64>()
                + total_tele * fm.teleport_target[v];
            assert!((inflow - fm.node_flow[v]).abs() < 1e-12);
        }
        // exit equals enter for an arbitrary module
        let labels = [0, 0, 1, 1];
        let exits = fm.module_exits(&labels, 2);
        assert!((exits[0] - exits[1]).abs() < 1e-12);
    }
}
