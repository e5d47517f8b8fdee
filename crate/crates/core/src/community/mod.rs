//! Hierarchical flow communities by minimizing the map equation.
//!
//! The top level is a two-level search over the whole network. Coarser
//! levels are added while grouping modules into super-modules shortens the
//! multilevel description; finer levels come from searching inside each
//! module and keeping the split only if it shortens that module's codebook.
//! A community that no search can profitably split is irreducible.

pub mod flow;
pub mod optimizer;

use serde::Serialize;

use crate::network::{FlowNetwork, WeightKind};
use flow::{plogp, FlowModel};
pub use optimizer::Partition;
use optimizer::{optimize, ActiveNetwork, NodeFlow, Objective};

const MIN_GAIN: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CommunityOptions {
    pub seed: u64,
    pub trials: usize,
    /// Deepest community level.
    pub max_depth: usize,
    pub weight: WeightKind,
    pub teleport: f64,
}

impl Default for CommunityOptions {
    fn default() -> Self {
        Self {
            seed: 1,
            trials: 10,
            max_depth: 5,
            weight: WeightKind::Frequency,
            teleport: flow::TELEPORT_PROBABILITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Community {
    /// 0 for the root (whole network), 1 for the top communities.
    pub level: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Sorted node indices.
    pub members: Vec<u32>,
    pub irreducible: bool,
    /// Visit rate.
    pub flow: f64,
    /// Exit rate.
    pub exit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommunityTree {
    pub nodes: Vec<Community>,
    /// Multilevel map-equation value of the tree, in bits.
    pub codelength: f64,
    /// Codelength of the whole network as one module.
    pub one_level_codelength: f64,
    /// Two-level codelength of the top-level partition.
    pub top_codelength: f64,
    /// Per-sweep codelengths of every search run while building the tree.
    pub traces: Vec<Vec<f64>>,
}

impl CommunityTree {
    pub fn root(&self) -> &Community {
        &self.nodes[0]
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|c| c.level).max().unwrap_or(0)
    }

    pub fn at_level(&self, level: usize) -> impl Iterator<Item = &Community> + '_ {
        self.nodes.iter().filter(move |c| c.level == level)
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Community> + '_ {
        self.nodes.iter().filter(|c| c.irreducible)
    }

    /// Community label per node at `level` (index among that level's
    /// communities); nodes whose branch ends above `level` get `None`.
    pub fn labels_at(&self, level: usize, n: usize) -> Vec<Option<u32>> {
        let mut out = vec![None; n];
        for (k, c) in self.at_level(level).enumerate() {
            for &v in &c.members {
                out[v as usize] = Some(k as u32);
            }
        }
        out
    }

    /// Irreducible community label per node.
    pub fn leaf_labels(&self, n: usize) -> Vec<u32> {
        let mut out = vec![0; n];
        for (k, c) in self.leaves().enumerate() {
            for &v in &c.members {
                out[v as usize] = k as u32;
            }
        }
        out
    }

    /// Path of 1-based child positions from the root, e.g. `2:1`.
    pub fn path(&self, idx: usize) -> String {
        let mut parts = Vec::new();
        let mut cur = idx;
        while let Some(p) = self.nodes[cur].parent {
            let pos = self.nodes[p]
                .children
                .iter()
                .position(|&c| c == cur)
                .expect("child of parent");
            parts.push((pos + 1).to_string());
            cur = p;
        }
        parts.reverse();
        parts.join(":")
    }

    /// `node_id, level1, level2, …, irreducible` with path ids.
    pub fn to_flat_tsv(&self, net: &FlowNetwork) -> String {
        let n = net.node_count();
        let depth = self.depth();
        let mut cols: Vec<Vec<String>> = vec![vec![String::new(); depth]; n];
        let mut leaf = vec![String::new(); n];
        for (idx, c) in self.nodes.iter().enumerate().skip(1) {
            let p = self.path(idx);
            for &v in &c.members {
                cols[v as usize][c.level - 1] = p.clone();
                if c.irreducible {
                    leaf[v as usize] = p.clone();
                }
            }
        }
        let mut s = String::from("node_id");
        for l in 1..=depth {
            s.push_str(&format!("\tlevel{l}"));
        }
        s.push_str("\tirreducible\n");
        for v in 0..n {
            s.push_str(net.id(v as u32));
            for c in &cols[v] {
                s.push('\t');
                s.push_str(c);
            }
            s.push('\t');
            s.push_str(&leaf[v]);
            s.push('\n');
        }
        s
    }

    /// Nested JSON: `{path, level, size, irreducible, flow, children}`.
    pub fn to_nested_json(&self, net: &FlowNetwork) -> serde_json::Value {
        fn rec(t: &CommunityTree, net: &FlowNetwork, idx: usize) -> serde_json::Value {
            let c = &t.nodes[idx];
            let mut v = serde_json::json!({
                "path": t.path(idx),
                "level": c.level,
                "size": c.members.len(),
                "irreducible": c.irreducible,
                "flow": c.flow,
                "exit": c.exit,
            });
            if c.irreducible {
                v["members"] = c.members.iter().map(|&m| net.id(m)).collect();
            } else {
                v["children"] = c.children.iter().map(|&ch| rec(t, net, ch)).collect();
            }
            v
        }
        serde_json::json!({
            "codelength": self.codelength,
            "one_level_codelength": self.one_level_codelength,
            "root": rec(self, net, 0),
        })
    }
}

// Flow data of the original nodes.
struct Base {
    model: FlowModel,
    out_adj: Vec<Vec<(u32, f64)>>,
}

impl Base {
    fn new(model: FlowModel) -> Self {
        let mut out_adj = vec![Vec::new(); model.len()];
        for &(s, t, f) in &model.link_flow {
            out_adj[s as usize].push((t, f));
        }
        Self { model, out_adj }
    }

    // Subproblem over `members`: links leaving the set become external flow.
    fn subnetwork(&self, members: &[u32]) -> ActiveNetwork {
        let mut local = std::collections::HashMap::with_capacity(members.len());
        for (k, &v) in members.iter().enumerate() {
            local.insert(v, k as u32);
        }
        let mut nodes = Vec::with_capacity(members.len());
        let mut links = Vec::new();
        for (k, &v) in members.iter().enumerate() {
            let mut ext = 0.0;
            for &(t, f) in &self.out_adj[v as usize] {
                match local.get(&t) {
                    Some(&lt) => links.push((k as u32, lt, f)),
                    None => ext += f,
                }
            }
            nodes.push(NodeFlow {
                code: self.model.node_flow[v as usize],
                teleport_out: self.model.teleport_out[v as usize],
                teleport_target: self.model.teleport_target[v as usize],
                external_out: ext,
            });
        }
        ActiveNetwork::new(nodes, links)
    }

    fn flow_of(&self, members: &[u32]) -> f64 {
        members
            .iter()
            .map(|&v| self.model.node_flow[v as usize])
            .sum()
    }

    fn exit_of(&self, members: &[u32], inside: &[bool]) -> f64 {
        let (mut tele, mut target, mut links) = (0.0, 0.0, 0.0);
        for &v in members {
            tele += self.model.teleport_out[v as usize];
            target += self.model.teleport_target[v as usize];
            for &(t, f) in &self.out_adj[v as usize] {
                if !inside[t as usize] {
                    links += f;
                }
            }
        }
        (tele * (1.0 - target) + links).max(0.0)
    }
}

fn groups(labels: &[u32], count: usize, items: &[u32]) -> Vec<Vec<u32>> {
    let mut g = vec![Vec::new(); count];
    for (k, &l) in labels.iter().enumerate() {
        g[l as usize].push(items[k]);
    }
    g
}

struct Builder<'a> {
    base: &'a Base,
    opts: CommunityOptions,
    nodes: Vec<Community>,
    traces: Vec<Vec<f64>>,
    inside: Vec<bool>,
    search_counter: u64,
}

impl Builder<'_> {
    fn search(&mut self, net: &ActiveNetwork, obj: Objective) -> Partition {
        // each search gets its own seed stream so results do not depend on
        // how many searches ran before in parallel siblings
        let seed = self
            .opts
            .seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(self.search_counter);
        self.search_counter += 1;
        let p = optimize(net, obj, seed, self.opts.trials);
        self.traces.push(p.trace.clone());
        p
    }

    fn add(&mut self, level: usize, parent: Option<usize>, mut members: Vec<u32>) -> usize {
        members.sort_unstable();
        for &v in &members {
            self.inside[v as usize] = true;
        }
        let exit = self.base.exit_of(&members, &self.inside);
        for &v in &members {
            self.inside[v as usize] = false;
        }
        let idx = self.nodes.len();
        self.nodes.push(Community {
            level,
            parent,
            children: Vec::new(),
            flow: self.base.flow_of(&members),
            exit,
            members,
            irreducible: true,
        });
        if let Some(p) = parent {
            self.nodes[p].children.push(idx);
            self.nodes[p].irreducible = false;
        }
        idx
    }

    // Children ordered by decreasing flow, then smallest member.
    fn sort_children(&mut self, idx: usize) {
        let mut ch = std::mem::take(&mut self.nodes[idx].children);
        ch.sort_by(|&a, &b| {
            let (ca, cb) = (&self.nodes[a], &self.nodes[b]);
            cb.flow
                .total_cmp(&ca.flow)
                .then(ca.members[0].cmp(&cb.members[0]))
        });
        self.nodes[idx].children = ch;
    }

    /// Tries to split a leaf community; recurses into accepted parts.
    fn refine(&mut self, idx: usize) {
        let level = self.nodes[idx].level;
        if level >= self.opts.max_depth || self.nodes[idx].members.len() < 2 {
            return;
        }
        let members = self.nodes[idx].members.clone();
        let sub = self.base.subnetwork(&members);
        let obj = Objective::for_network(&sub, self.nodes[idx].exit);
        let part = self.search(&sub, obj);
        if part.count < 2 || part.codelength >= obj.unsplit(&sub) - MIN_GAIN {
            return;
        }
        for g in groups(&part.labels, part.count, &members) {
            let child = self.add(level + 1, Some(idx), g);
            self.refine(child);
        }
        self.sort_children(idx);
    }
}

/// Best two-level partition of the whole network.
pub fn two_level_partition(net: &FlowNetwork, opts: &CommunityOptions) -> Partition {
    let model = FlowModel::with_teleport(net, opts.weight, opts.teleport);
    let all: Vec<u32> = (0..net.node_count() as u32).collect();
    let whole = Base::new(model).subnetwork(&all);
    let seed = opts.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    optimize(
        &whole,
        Objective::for_network(&whole, 0.0),
        seed,
        opts.trials,
    )
}

/// Builds the community hierarchy. Deterministic for fixed options.
pub fn detect_communities(net: &FlowNetwork, opts: &CommunityOptions) -> CommunityTree {
    let n = net.node_count();
    let base = Base::new(FlowModel::with_teleport(net, opts.weight, opts.teleport));
    let mut b = Builder {
        base: &base,
        opts: *opts,
        nodes: Vec::new(),
        traces: Vec::new(),
        inside: vec![false; n],
        search_counter: 0,
    };
    let all: Vec<u32> = (0..n as u32).collect();
    let root = b.add(0, None, all.clone());
    let one_level = base.model.one_module_codelength();
    if n == 0 {
        return CommunityTree {
            nodes: b.nodes,
            codelength: 0.0,
            one_level_codelength: 0.0,
            top_codelength: 0.0,
            traces: Vec::new(),
        };
    }

    // two-level partition of the whole network
    let whole = base.subnetwork(&all);
    let top = b.search(&whole, Objective::for_network(&whole, 0.0));
    let modules = groups(&top.labels, top.count, &all);

    // coarsen: group the current top communities into super-communities while
    // the index codebook gets shorter
    let mut stack: Vec<Vec<Vec<u32>>> = Vec::new(); // super-levels, coarsest last
    let mut current: Vec<Vec<u32>> = modules.clone();
    let max_levels = opts.max_depth.max(1);
    while current.len() > 2 && stack.len() + 1 < max_levels {
        let mut labels = vec![0u32; n];
        for (m, g) in current.iter().enumerate() {
            for &v in g {
                labels[v as usize] = m as u32;
            }
        }
        let exits: Vec<f64> = current
            .iter()
            .map(|g| {
                g.iter().for_each(|&v| b.inside[v as usize] = true);
                let e = base.exit_of(g, &b.inside);
                g.iter().for_each(|&v| b.inside[v as usize] = false);
                e
            })
            .collect();
        let leaf_net = base.subnetwork(&all);
        let mut coarse = leaf_net.aggregate(&labels, current.len());
        for (node, &q) in coarse.nodes.iter_mut().zip(&exits) {
            node.code = q;
        }
        let obj = Objective::for_network(&coarse, 0.0);
        let part = b.search(&coarse, obj);
        if part.count < 2
            || part.count >= current.len()
            || part.codelength >= obj.unsplit(&coarse) - MIN_GAIN
        {
            break;
        }
        let idx: Vec<u32> = (0..current.len() as u32).collect();
        let merged: Vec<Vec<u32>> = groups(&part.labels, part.count, &idx)
            .into_iter()
            .map(|ms| {
                ms.iter()
                    .flat_map(|&m| current[m as usize].iter().copied())
                    .collect()
            })
            .collect();
        stack.push(current);
        current = merged;
    }

    // materialize coarse levels top-down
    let mut frontier = vec![root];
    let mut levels: Vec<Vec<Vec<u32>>> = Vec::new();
    levels.push(current);
    while let Some(l) = stack.pop() {
        levels.push(l);
    }
    for (depth, parts) in levels.iter().enumerate() {
        let mut next = Vec::new();
        for g in parts {
            let parent = *frontier
                .iter()
                .find(|&&p| b.nodes[p].members.binary_search(&g[0]).is_ok())
                .expect("parent contains part");
            next.push(b.add(depth + 1, Some(parent), g.clone()));
        }
        for &p in &frontier {
            b.sort_children(p);
        }
        frontier = next;
    }
    for leaf in frontier.clone() {
        b.refine(leaf);
    }

    let nodes = b.nodes;
    let traces = b.traces;
    let mut tree = CommunityTree {
        codelength: 0.0,
        one_level_codelength: one_level,
        top_codelength: top.codelength,
        nodes,
        traces,
    };
    tree.codelength = hierarchical_codelength(&tree, &base.model);
    tree
}

/// Multilevel map equation of a community tree: every non-leaf community
/// has a codebook over its exit and its children's enter rates, every leaf
/// over its exit and its nodes' visit rates.
pub fn hierarchical_codelength(tree: &CommunityTree, model: &FlowModel) -> f64 {
    let mut l = 0.0;
    for c in &tree.nodes {
        if c.irreducible {
            let nodes: f64 = c.members.iter().map(|&v| model.node_flow[v as usize]).sum();
            l += plogp(c.exit + nodes)
                - plogp(c.exit)
                - c.members
                    .iter()
                    .map(|&v| plogp(model.node_flow[v as usize]))
                    .sum::<f64>();
        } else {
            let enters: Vec<f64> = c.children.iter().map(|&ch| tree.nodes[ch].exit).collect();
            let total = c.exit + enters.iter().sum::<f64>();
            l += plogp(total) - plogp(c.exit) - enters.iter().map(|&q| plogp(q)).sum::<f64>();
        }
    }
    l
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelRow {
    pub level: usize,
    pub communities: usize,
    pub irreducible: usize,
    pub accounts: usize,
    /// `accounts / N`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommunityReport {
    pub levels: Vec<LevelRow>,
    /// `(rank, size)` of irreducible communities, largest first.
    pub size_rank: Vec<(usize, usize)>,
}

pub fn community_report(tree: &CommunityTree) -> CommunityReport {
    let n = tree.root().members.len();
    let levels = (1..=tree.depth())
        .map(|level| {
            let cs: Vec<&Community> = tree.at_level(level).collect();
            let accounts = cs.iter().map(|c| c.members.len()).sum();
            LevelRow {
                level,
                communities: cs.len(),
                irreducible: cs.iter().filter(|c| c.irreducible).count(),
                accounts,
                ratio: if n > 0 {
                    accounts as f64 / n as f64
                } else {
                    0.0
                },
            }
        })
        .collect();
    let mut sizes: Vec<usize> = tree
        .leaves()
        .filter(|c| c.level > 0)
        .map(|c| c.members.len())
        .collect();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    CommunityReport {
        levels,
        size_rank: sizes
            .into_iter()
            .enumerate()
            .map(|(i, s)| (i + 1, s))
            .collect(),
    }
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[u32], b: &[u32]) -> f64 {
    assert_eq!(a.len(), b.len());
    use std::collections::HashMap;
    let n = a.len() as f64;
    let choose2 = |x: f64| x * (x - 1.0) / 2.0;
    let mut joint: HashMap<(u32, u32), f64> = HashMap::new();
    let mut ra: HashMap<u32, f64> = HashMap::new();
    let mut rb: HashMap<u32, f64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1.0;
        *ra.entry(x).or_default() += 1.0;
        *rb.entry(y).or_default() += 1.0;
    }
    let index: f64 = joint.values().map(|&c| choose2(c)).sum();
    let sa: f64 = ra.values().map(|&c| choose2(c)).sum();
    let sb: f64 = rb.values().map(|&c| choose2(c)).sum();
    let expected = sa * sb / choose2(n);
    let max = 0.5 * (sa + sb);
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clique_edges(nodes: std::ops::Range<u32>) -> Vec<(u32, u32, u64, u64)> {
        let mut e = Vec::new();
        for i in nodes.clone() {
            for j in nodes.clone() {
                if i != j {
                    e.push((i, j, 1, 1));
                }
            }
        }
        e
    }

    #[test]
    fn two_cliques() {
        let mut edges = clique_edges(0..5);
        edges.extend(clique_edges(5..10));
        let net = FlowNetwork::from_edges(10, &edges).unwrap();
        let tree = detect_communities(&net, &CommunityOptions::default());
        let level1: Vec<&Community> = tree.at_level(1).collect();
        assert_eq!(level1.len(), 2);
        assert!(level1.iter().all(|c| c.irreducible && c.members.len() == 5));
        assert!(tree.top_codelength < tree.one_level_codelength);
    }

    #[test]
    fn report_shapes() {
        let mut edges = clique_edges(0..5);
        edges.extend(clique_edges(5..8));
        edges.extend(clique_edges(8..10));
        let net = FlowNetwork::from_edges(10, &edges).unwrap();
        let tree = detect_communities(&net, &CommunityOptions::default());
        let r = community_report(&tree);
        assert_eq!(r.size_rank, vec![(1, 5), (2, 3), (3, 2)]);
        assert_eq!(r.levels[0].accounts, 10);
        assert_eq!(r.levels[0].ratio, 1.0);

        let net = FlowNetwork::from_edges(4, &clique_edges(0..4)).unwrap();
        let tree = detect_communities(&net, &CommunityOptions::default());
        let r = community_report(&tree);
        assert_eq!(r.levels.len(), 1);
        assert_eq!((r.levels[0].communities, r.levels[0].irreducible), (1, 1));
        assert_eq!(r.levels[0].ratio, 1.0);
    }

    #[test]
    fn ari_basics() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[5, 5, 7, 7]), 1.0);
        assert!(adjusted_rand_index(&[0, 0, 1, 1], &[0, 1, 0, 1]) < 0.0);
    }

    #[test]
    fn deterministic_for_seed() {
        let mut edges = clique_edges(0..6);
        edges.extend(clique_edges(6..12));
        edges.push((0, 6, 1, 1));
        edges.push((7, 1, 1, 1));
        let net = FlowNetwork::from_edges(12, &edges).unwrap();
        let opts = CommunityOptions {
            seed: 9,
            ..Default::default()
        };
        assert_eq!(
            detect_communities(&net, &opts),
            detect_communities(&net, &opts)
        );
    }
}
