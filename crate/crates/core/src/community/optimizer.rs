//! Greedy two-level map-equation search: local node moves, aggregation of
//! modules into super-nodes, and fine-tuning back at the node level.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::flow::{plogp, two_level};

const MIN_IMPROVEMENT: f64 = 1e-10;
const MAX_SWEEPS: usize = 200;
const MAX_TUNE_ROUNDS: usize = 10;

/// Flow data of one node of a (sub)problem.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NodeFlow {
    /// Rate used in the codebooks: visit rate for network nodes, enter rate
    /// when the nodes stand for modules.
    pub code: f64,
    /// Teleportation leaving the node.
    pub teleport_out: f64,
    /// Share of teleportation landing on the node.
    pub teleport_target: f64,
    /// Link flow leaving the node towards nodes outside the subproblem.
    pub external_out: f64,
}

impl NodeFlow {
    fn add(&mut self, o: &NodeFlow) {
        self.code += o.code;
        self.teleport_out += o.teleport_out;
        self.teleport_target += o.teleport_target;
        self.external_out += o.external_out;
    }
}

/// Nodes plus aggregated directed link flows, in both directions.
#[derive(Debug, Clone)]
pub struct ActiveNetwork {
    pub nodes: Vec<NodeFlow>,
    out_ptr: Vec<usize>,
    out_adj: Vec<(u32, f64)>,
    in_ptr: Vec<usize>,
    in_adj: Vec<(u32, f64)>,
}

fn csr(n: usize, mut edges: Vec<(u32, u32, f64)>) -> (Vec<usize>, Vec<(u32, f64)>) {
    edges.sort_unstable_by_key(|e| (e.0, e.1));
    let mut ptr = vec![0usize; n + 1];
    let mut adj: Vec<(u32, f64)> = Vec::with_capacity(edges.len());
    let mut last: Option<(u32, u32)> = None;
    for (s, t, f) in edges {
        if last == Some((s, t)) {
            adj.last_mut().expect("previous edge").1 += f;
            continue;
        }
        last = Some((s, t));
        adj.push((t, f));
        ptr[s as usize + 1] += 1;
    }
    for i in 0..n {
        ptr[i + 1] += ptr[i];
    }
    (ptr, adj)
}

impl ActiveNetwork {
    /// Self-links are dropped, parallel links merged.
    pub fn new(nodes: Vec<NodeFlow>, links: impl IntoIterator<Item = (u32, u32, f64)>) -> Self {
        let n = nodes.len();
        let edges: Vec<(u32, u32, f64)> = links
            .into_iter()
            .filter(|e| e.0 != e.1 && e.2 > 0.0)
            .collect();
        let rev: Vec<(u32, u32, f64)> = edges.iter().map(|&(s, t, f)| (t, s, f)).collect();
        let (out_ptr, out_adj) = csr(n, edges);
        let (in_ptr, in_adj) = csr(n, rev);
        Self {
            nodes,
            out_ptr,
            out_adj,
            in_ptr,
            in_adj,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn out(&self, v: usize) -> &[(u32, f64)] {
        &self.out_adj[self.out_ptr[v]..self.out_ptr[v + 1]]
    }

    pub fn inn(&self, v: usize) -> &[(u32, f64)] {
        &self.in_adj[self.in_ptr[v]..self.in_ptr[v + 1]]
    }

    pub fn links(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        (0..self.len()).flat_map(move |v| self.out(v).iter().map(move |&(t, f)| (v as u32, t, f)))
    }

    fn out_total(&self, v: usize) -> f64 {
        self.out(v).iter().map(|e| e.1).sum::<f64>() + self.nodes[v].external_out
    }

    /// Collapses each module of `labels` (dense, `0..count`) into one node.
    pub fn aggregate(&self, labels: &[u32], count: usize) -> ActiveNetwork {
        let mut nodes = vec![NodeFlow::default(); count];
        for (v, &m) in labels.iter().enumerate() {
            nodes[m as usize].add(&self.nodes[v]);
        }
        let links: Vec<(u32, u32, f64)> = self
            .links()
            .map(|(s, t, f)| (labels[s as usize], labels[t as usize], f))
            .collect();
        ActiveNetwork::new(nodes, links)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct ModuleState {
    code: f64,
    teleport_out: f64,
    teleport_target: f64,
    link_exit: f64,
    members: usize,
}

impl ModuleState {
    fn exit(&self) -> f64 {
        let e = self.teleport_out * (1.0 - self.teleport_target) + self.link_exit;
        if e < 0.0 {
            0.0
        } else {
            e
        }
    }
}

/// Objective terms shared by a search over one subproblem.
#[derive(Debug, Clone, Copy)]
pub struct Objective {
    /// Rate of the enclosing module's exit codeword (0 at the top level).
    pub offset: f64,
    /// `Σ plogp(code)` over the leaves of the subproblem; constant.
    pub node_plogp: f64,
}

impl Objective {
    pub fn for_network(net: &ActiveNetwork, offset: f64) -> Self {
        Self {
            offset,
            node_plogp: net.nodes.iter().map(|n| plogp(n.code)).sum(),
        }
    }

    /// Codelength of keeping the whole subproblem as one undivided module.
    pub fn unsplit(&self, net: &ActiveNetwork) -> f64 {
        let total: f64 = net.nodes.iter().map(|n| n.code).sum();
        plogp(self.offset + total) - plogp(self.offset) - self.node_plogp
    }

    /// Codelength of a dense labelling of `net`'s nodes.
    pub fn codelength(&self, net: &ActiveNetwork, labels: &[u32]) -> f64 {
        let count = labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
        let states = module_states(net, labels, count);
        self.from_states(&states)
    }

    fn from_states(&self, states: &[ModuleState]) -> f64 {
        let exits: Vec<f64> = states.iter().map(ModuleState::exit).collect();
        let flows: Vec<f64> = states.iter().map(|s| s.code).collect();
        two_level(self.offset, &exits, &flows, self.node_plogp)
    }
}

fn module_states(net: &ActiveNetwork, labels: &[u32], count: usize) -> Vec<ModuleState> {
    let mut states = vec![ModuleState::default(); count];
    for (v, node) in net.nodes.iter().enumerate() {
        let s = &mut states[labels[v] as usize];
        s.code += node.code;
        s.teleport_out += node.teleport_out;
        s.teleport_target += node.teleport_target;
        s.link_exit += node.external_out;
        s.members += 1;
        for &(t, f) in net.out(v) {
            if labels[t as usize] != labels[v] {
                s.link_exit += f;
            }
        }
    }
    states
}

/// Relabels to `0..count` in order of first appearance.
pub fn densify(labels: &[u32]) -> (Vec<u32>, usize) {
    let cap = labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
    let mut map = vec![u32::MAX; cap];
    let mut next = 0u32;
    let out = labels
        .iter()
        .map(|&l| {
            if map[l as usize] == u32::MAX {
                map[l as usize] = next;
                next += 1;
            }
            map[l as usize]
        })
        .collect();
    (out, next as usize)
}

struct Mover<'a> {
    net: &'a ActiveNetwork,
    obj: Objective,
    states: Vec<ModuleState>,
    sum_exit: f64,
    sum_plogp_exit: f64,
    sum_plogp_exit_code: f64,
    empty: Vec<u32>,
    // scratch: per-module flows to/from the node being moved
    out_to: Vec<f64>,
    in_from: Vec<f64>,
    touched: Vec<u32>,
}

impl<'a> Mover<'a> {
    fn new(net: &'a ActiveNetwork, obj: Objective, labels: &[u32]) -> Self {
        let n = net.len();
        let states = module_states(net, labels, n);
        let empty = (0..n as u32)
            .rev()
            .filter(|&m| states[m as usize].members == 0)
            .collect();
        let mut m = Self {
            net,
            obj,
            states,
            sum_exit: 0.0,
            sum_plogp_exit: 0.0,
            sum_plogp_exit_code: 0.0,
            empty,
            out_to: vec![0.0; n],
            in_from: vec![0.0; n],
            touched: Vec::new(),
        };
        m.refresh_sums();
        m
    }

    fn refresh_sums(&mut self) {
        self.sum_exit = 0.0;
        self.sum_plogp_exit = 0.0;
        self.sum_plogp_exit_code = 0.0;
        for s in &self.states {
            if s.members == 0 {
                continue;
            }
            let q = s.exit();
            self.sum_exit += q;
            self.sum_plogp_exit += plogp(q);
            self.sum_plogp_exit_code += plogp(q + s.code);
        }
    }

    fn codelength(&self) -> f64 {
        plogp(self.obj.offset + self.sum_exit) - plogp(self.obj.offset) - 2.0 * self.sum_plogp_exit
            + self.sum_plogp_exit_code
            - self.obj.node_plogp
    }

    fn without(&self, m: usize, v: usize, out_total: f64) -> ModuleState {
        let node = &self.net.nodes[v];
        let s = &self.states[m];
        ModuleState {
            code: s.code - node.code,
            teleport_out: s.teleport_out - node.teleport_out,
            teleport_target: s.teleport_target - node.teleport_target,
            link_exit: s.link_exit - (out_total - self.out_to[m]) + self.in_from[m],
            members: s.members - 1,
        }
    }

    fn with(&self, m: usize, v: usize, out_total: f64) -> ModuleState {
        let node = &self.net.nodes[v];
        let s = &self.states[m];
        ModuleState {
            code: s.code + node.code,
            teleport_out: s.teleport_out + node.teleport_out,
            teleport_target: s.teleport_target + node.teleport_target,
            link_exit: s.link_exit + (out_total - self.out_to[m]) - self.in_from[m],
            members: s.members + 1,
        }
    }

    fn delta(&self, a: usize, b: usize, new_a: &ModuleState, new_b: &ModuleState) -> f64 {
        let (old_a, old_b) = (&self.states[a], &self.states[b]);
        let (qa, qb, qa2, qb2) = (old_a.exit(), old_b.exit(), new_a.exit(), new_b.exit());
        let sum_exit = self.sum_exit - qa - qb + qa2 + qb2;
        let o = self.obj.offset;
        (plogp(o + sum_exit) - plogp(o + self.sum_exit))
            - 2.0 * (plogp(qa2) + plogp(qb2) - plogp(qa) - plogp(qb))
            + (plogp(qa2 + new_a.code) + plogp(qb2 + new_b.code)
                - plogp(qa + old_a.code)
                - plogp(qb + old_b.code))
    }

    fn apply(&mut self, a: usize, b: usize, new_a: ModuleState, new_b: ModuleState) {
        for (m, new) in [(a, new_a), (b, new_b)] {
            let old = self.states[m];
            if old.members > 0 {
                let q = old.exit();
                self.sum_exit -= q;
                self.sum_plogp_exit -= plogp(q);
                self.sum_plogp_exit_code -= plogp(q + old.code);
            }
            if new.members > 0 {
                let q = new.exit();
                self.sum_exit += q;
                self.sum_plogp_exit += plogp(q);
                self.sum_plogp_exit_code += plogp(q + new.code);
                self.states[m] = new;
            } else {
                self.states[m] = ModuleState::default();
            }
        }
    }

    /// Sweeps nodes in random order, moving each to the neighbouring (or an
    /// empty) module with the largest decrease. Returns the number of moves.
    fn run(&mut self, labels: &mut [u32], rng: &mut ChaCha8Rng, trace: &mut Vec<f64>) -> usize {
        let n = self.net.len();
        let mut order: Vec<usize> = (0..n).collect();
        let mut total_moves = 0;
        for _ in 0..MAX_SWEEPS {
            order.shuffle(rng);
            let start = self.codelength();
            let mut moves = 0;
            for &v in &order {
                let a = labels[v] as usize;
                for &(t, f) in self.net.out(v) {
                    let m = labels[t as usize];
                    if self.out_to[m as usize] == 0.0 && self.in_from[m as usize] == 0.0 {
                        self.touched.push(m);
                    }
                    self.out_to[m as usize] += f;
                }
                for &(s, f) in self.net.inn(v) {
                    let m = labels[s as usize];
                    if self.out_to[m as usize] == 0.0 && self.in_from[m as usize] == 0.0 {
                        self.touched.push(m);
                    }
                    self.in_from[m as usize] += f;
                }
                let out_total = self.net.out_total(v);
                let new_a = self.without(a, v, out_total);
                let mut best: Option<(f64, usize, ModuleState)> = None;
                let mut consider = |this: &Self, b: usize| {
                    if b == a {
                        return;
                    }
                    let new_b = this.with(b, v, out_total);
                    let d = this.delta(a, b, &new_a, &new_b);
                    if d < -MIN_IMPROVEMENT && best.as_ref().is_none_or(|x| d < x.0) {
                        best = Some((d, b, new_b));
                    }
                };
                for k in 0..self.touched.len() {
                    consider(self, self.touched[k] as usize);
                }
                if self.states[a].members > 1 {
                    if let Some(&e) = self.empty.last() {
                        consider(self, e as usize);
                    }
                }
                for &m in &self.touched {
                    self.out_to[m as usize] = 0.0;
                    self.in_from[m as usize] = 0.0;
                }
                self.touched.clear();
                if let Some((_, b, new_b)) = best {
                    if self.empty.last() == Some(&(b as u32)) {
                        self.empty.pop();
                    }
                    self.apply(a, b, new_a, new_b);
                    if new_a.members == 0 {
                        self.empty.push(a as u32);
                    }
                    labels[v] = b as u32;
                    moves += 1;
                }
            }
            // rebuild from scratch so rounding does not accumulate
            self.states = module_states(self.net, labels, n);
            self.refresh_sums();
            trace.push(self.codelength());
            total_moves += moves;
            if moves == 0 || start - self.codelength() < MIN_IMPROVEMENT {
                break;
            }
        }
        total_moves
    }
}

/// Result of a two-level search over one (sub)problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    /// Dense module label per node, ordered by first appearance.
    pub labels: Vec<u32>,
    pub count: usize,
    pub codelength: f64,
    /// Codelength after every sweep of the winning trial.
    pub trace: Vec<f64>,
}

fn trial(net: &ActiveNetwork, obj: Objective, seed: u64, index: u64) -> Partition {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let n = net.len();
    let mut trace = Vec::new();
    let mut assignment: Vec<u32> = (0..n as u32).collect();
    let mut level = net.clone();
    let mut previous = f64::INFINITY;
    for _ in 0..MAX_TUNE_ROUNDS {
        // move nodes, merge modules into super-nodes, repeat
        loop {
            let mut labels: Vec<u32> = (0..level.len() as u32).collect();
            Mover::new(&level, obj, &labels).run(&mut labels, &mut rng, &mut trace);
            let (dense, count) = densify(&labels);
            if count == level.len() {
                break;
            }
            for a in assignment.iter_mut() {
                *a = dense[*a as usize];
            }
            level = level.aggregate(&dense, count);
        }
        let current = obj.codelength(net, &assignment);
        if previous - current < MIN_IMPROVEMENT {
            break;
        }
        previous = current;
        // fine-tune single nodes against the current modules
        let mut labels = assignment.clone();
        Mover::new(net, obj, &labels).run(&mut labels, &mut rng, &mut trace);
        let (dense, count) = densify(&labels);
        assignment = dense;
        level = net.aggregate(&assignment, count);
    }
    let (labels, count) = densify(&assignment);
    let codelength = obj.codelength(net, &labels);
    Partition {
        labels,
        count,
        codelength,
        trace,
    }
}

/// Best of `trials` independent searches; ties go to the lowest trial index.
/// The one-module solution competes too.
pub fn optimize(net: &ActiveNetwork, obj: Objective, seed: u64, trials: usize) -> Partition {
    let n = net.len();
    let single = Partition {
        labels: vec![0; n],
        count: usize::from(n > 0),
        codelength: obj.unsplit(net),
        trace: Vec::new(),
    };
    if n < 2 {
        return single;
    }
    let results: Vec<Partition> = (0..trials.max(1) as u64)
        .into_par_iter()
        .map(|t| trial(net, obj, seed, t))
        .collect();
    let mut best = results
        .into_iter()
        .reduce(|a, b| {
            if b.codelength < a.codelength - MIN_IMPROVEMENT {
                b
            } else {
                a
            }
        })
        .expect("at least one trial");
    if single.codelength <= best.codelength + MIN_IMPROVEMENT {
        best = Partition {
            trace: best.trace,
            ..single
        };
    }
    best
}
