//! Bowtie ("walnut") decomposition of the giant weakly connected component.
//!
//! GSCC is the largest strongly connected component inside the GWCC, IN the
//! nodes that reach it, OUT the nodes reached from it, TE everything else in
//! the GWCC. Link weights are ignored.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::FlowNetwork;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BowtieError {
    #[error("network is empty")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Component {
    #[serde(rename = "GSCC")]
    Gscc,
    #[serde(rename = "IN")]
    In,
    #[serde(rename = "OUT")]
    Out,
    #[serde(rename = "TE")]
    Te,
    #[serde(rename = "outside_GWCC")]
    OutsideGwcc,
}

impl Component {
    pub const BOWTIE: [Component; 4] = [
        Component::Gscc,
        Component::In,
        Component::Out,
        Component::Te,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Component::Gscc => "GSCC",
            Component::In => "IN",
            Component::Out => "OUT",
            Component::Te => "TE",
            Component::OutsideGwcc => "outside_GWCC",
        }
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Labels every node with its component id; ids are dense and ordered by the
/// smallest node index in each class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodePartition {
    pub labels: Vec<u32>,
    pub count: usize,
}

impl NodePartition {
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.count];
        for &l in &self.labels {
            s[l as usize] += 1;
        }
        s
    }

    /// Id of the largest class; ties go to the class with the smaller minimum
    /// node index, which is the smaller id.
    pub fn largest(&self) -> Option<u32> {
        let sizes = self.sizes();
        let mut best: Option<(usize, u32)> = None;
        for (id, &s) in sizes.iter().enumerate() {
            if best.is_none_or(|(bs, _)| s > bs) {
                best = Some((s, id as u32));
            }
        }
        best.map(|b| b.1)
    }

    pub fn members(&self, id: u32) -> Vec<u32> {
        (0..self.labels.len() as u32)
            .filter(|&v| self.labels[v as usize] == id)
            .collect()
    }

    // Relabels so ids follow first appearance in node order.
    fn canonical(labels: Vec<u32>) -> Self {
        let mut map: Vec<u32> = vec![u32::MAX; labels.len()];
        let mut next = 0u32;
        let labels = labels
            .into_iter()
            .map(|l| {
                let slot = &mut map[l as usize];
                if *slot == u32::MAX {
                    *slot = next;
                    next += 1;
                }
                *slot
            })
            .collect();
        Self {
            labels,
            count: next as usize,
        }
    }
}

/// Components of the symmetrized graph, by breadth-first search.
pub fn weakly_connected_components(net: &FlowNetwork) -> NodePartition {
    let n = net.node_count();
    let mut labels = vec![u32::MAX; n];
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..n as u32 {
        if labels[start as usize] != u32::MAX {
            continue;
        }
        labels[start as usize] = next;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            for u in net.successors(v).chain(net.predecessors(v)) {
                if labels[u as usize] == u32::MAX {
                    labels[u as usize] = next;
                    queue.push_back(u);
                }
            }
        }
        next += 1;
    }
    NodePartition {
        labels,
        count: next as usize,
    }
}

/// Tarjan's algorithm with an explicit call stack.
pub fn strongly_connected_components(net: &FlowNetwork) -> NodePartition {
    const UNVISITED: u32 = u32::MAX;
    let n = net.node_count();
    let mut index = vec![UNVISITED; n];
    let mut lowlink = vec![0u32; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<u32> = Vec::new();
    let mut labels = vec![UNVISITED; n];
    let mut next_index = 0u32;
    let mut next_label = 0u32;
    // (node, position in its out-link list)
    let mut calls: Vec<(u32, usize)> = Vec::new();

    for root in 0..n as u32 {
        if index[root as usize] != UNVISITED {
            continue;
        }
        calls.push((root, 0));
        index[root as usize] = next_index;
        lowlink[root as usize] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root as usize] = true;

        while let Some(&mut (v, ref mut pos)) = calls.last_mut() {
            let out = net.out_links(v);
            if *pos < out.len() {
                let w = out[*pos].target;
                *pos += 1;
                let wi = w as usize;
                if index[wi] == UNVISITED {
                    index[wi] = next_index;
                    lowlink[wi] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[wi] = true;
                    calls.push((w, 0));
                } else if on_stack[wi] {
                    lowlink[v as usize] = lowlink[v as usize].min(index[wi]);
                }
                continue;
            }
            calls.pop();
            if let Some(&(parent, _)) = calls.last() {
                lowlink[parent as usize] = lowlink[parent as usize].min(lowlink[v as usize]);
            }
            if lowlink[v as usize] == index[v as usize] {
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w as usize] = false;
                    labels[w as usize] = next_label;
                    if w == v {
                        break;
                    }
                }
                next_label += 1;
            }
        }
    }
    NodePartition::canonical(labels)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComponentSizes {
    pub gscc: usize,
    pub in_: usize,
    pub out: usize,
    pub te: usize,
}

impl ComponentSizes {
    pub fn get(&self, c: Component) -> usize {
        match c {
            Component::Gscc => self.gscc,
            Component::In => self.in_,
            Component::Out => self.out,
            Component::Te => self.te,
            Component::OutsideGwcc => 0,
        }
    }

    pub fn total(&self) -> usize {
        self.gscc + self.in_ + self.out + self.te
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BowtiePartition {
    pub component_of: Vec<Component>,
    pub sizes: ComponentSizes,
    pub gwcc_size: usize,
}

impl BowtiePartition {
    pub fn nodes_in(&self, c: Component) -> impl Iterator<Item = u32> + '_ {
        self.component_of
            .iter()
            .enumerate()
            .filter(move |(_, &x)| x == c)
            .map(|(i, _)| i as u32)
    }

    pub fn fraction(&self, c: Component) -> f64 {
        self.sizes.get(c) as f64 / self.gwcc_size as f64
    }

    pub fn to_tsv(&self, net: &FlowNetwork) -> String {
        let mut s = String::from("node_id\tcomponent\n");
        for (i, c) in self.component_of.iter().enumerate() {
            s.push_str(&format!("{}\t{}\n", net.id(i as u32), c));
        }
        s
    }
}

// Multi-source BFS over forward (or reversed) links, visiting only nodes for
// which `allowed` holds. Returns hop distances, `u32::MAX` if unreached.
fn bfs_from(
    net: &FlowNetwork,
    sources: &[u32],
    reverse: bool,
    allowed: impl Fn(u32) -> bool,
) -> Vec<u32> {
    let mut dist = vec![u32::MAX; net.node_count()];
    let mut queue = VecDeque::with_capacity(sources.len());
    for &s in sources {
        dist[s as usize] = 0;
        queue.push_back(s);
    }
    while let Some(v) = queue.pop_front() {
        let d = dist[v as usize] + 1;
        let mut visit = |u: u32| {
            if dist[u as usize] == u32::MAX && allowed(u) {
                dist[u as usize] = d;
                queue.push_back(u);
            }
        };
        if reverse {
            net.predecessors(v).for_each(&mut visit);
        } else {
            net.successors(v).for_each(&mut visit);
        }
    }
    dist
}

pub fn classify_bowtie(net: &FlowNetwork) -> Result<BowtiePartition, BowtieError> {
    if net.is_empty() {
        return Err(BowtieError::Empty);
    }
    let wcc = weakly_connected_components(net);
    let gwcc = wcc.largest().ok_or(BowtieError::Empty)?;
    let in_gwcc = |v: u32| wcc.labels[v as usize] == gwcc;

    let scc = strongly_connected_components(net);
    let scc_sizes = scc.sizes();
    // largest SCC inside the GWCC; ids are ordered by minimum node index so
    // scanning in id order gives the tie-break for free
    let mut best: Option<(usize, u32)> = None;
    let mut seen = vec![false; scc.count];
    for v in 0..net.node_count() as u32 {
        let id = scc.labels[v as usize];
        if !in_gwcc(v) || std::mem::replace(&mut seen[id as usize], true) {
            continue;
        }
        let s = scc_sizes[id as usize];
        if best.is_none_or(|(bs, _)| s > bs) {
            best = Some((s, id));
        }
    }
    let (_, gscc_id) = best.expect("GWCC is nonempty");
    let core: Vec<u32> = scc.members(gscc_id);

    let downstream = bfs_from(net, &core, false, in_gwcc);
    let upstream = bfs_from(net, &core, true, in_gwcc);

    let mut sizes = ComponentSizes {
        gscc: 0,
        in_: 0,
        out: 0,
        te: 0,
    };
    let mut gwcc_size = 0;
    let component_of = (0..net.node_count() as u32)
        .map(|v| {
            if !in_gwcc(v) {
                return Component::OutsideGwcc;
            }
            gwcc_size += 1;
            let vi = v as usize;

            if scc.labels[vi] == gscc_id {
                sizes.gscc += 1;
                Component::Gscc
            } else if upstream[vi] != u32::MAX {
                sizes.in_ += 1;
                Component::In
            } else if downstream[vi] != u32::MAX {
                sizes.out += 1;
                Component::Out
            } else {
                sizes.te += 1;
                Component::Te
            }
        })
        .collect();
    Ok(BowtiePartition {
        component_of,
        sizes,
        gwcc_size,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceRow {
    pub distance: u32,
    pub count: usize,
    pub ratio: f64,
}

/// Shortest hop distances IN→GSCC and GSCC→OUT.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceProfile {
    pub in_to_gscc: Vec<DistanceRow>,
    pub gscc_to_out: Vec<DistanceRow>,
}

impl DistanceProfile {
    pub fn share_at(rows: &[DistanceRow], distance: u32) -> f64 {
        rows.iter()
            .find(|r| r.distance == distance)
            .map_or(0.0, |r| r.ratio)
    }
}

fn histogram(dists: impl Iterator<Item = u32>) -> Vec<DistanceRow> {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    let mut total = 0;
    for d in dists {
        *counts.entry(d).or_default() += 1;
        total += 1;
    }
    counts
        .into_iter()
        .map(|(distance, count)| DistanceRow {
            distance,
            count,
            ratio: count as f64 / total as f64,
        })
        .collect()
}

pub fn distance_profile(net: &FlowNetwork, partition: &BowtiePartition) -> DistanceProfile {
    let core: Vec<u32> = partition.nodes_in(Component::Gscc).collect();
    let is = |c: Component| move |v: u32| partition.component_of[v as usize] == c;
    let up = bfs_from(net, &core, true, is(Component::In));
    let down = bfs_from(net, &core, false, is(Component::Out));
    DistanceProfile {
        in_to_gscc: histogram(partition.nodes_in(Component::In).map(|v| up[v as usize])),
        gscc_to_out: histogram(partition.nodes_in(Component::Out).map(|v| down[v as usize])),
    }
}
