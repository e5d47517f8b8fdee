//! The aggregated directed network and its descriptive statistics.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::ingest::AggregatedLink;

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("duplicate link {0} -> {1}")]
    DuplicateLink(String, String),
    #[error("self-loop on {0}")]
    SelfLoop(String),
    #[error("empty input")]
    Empty,
}

/// One directed link in index space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Link {
    pub source: u32,
    pub target: u32,
    pub flow: u64,
    pub frequency: u64,
}

/// Which link attribute acts as the link weight.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightKind {
    Flow,
    #[default]
    Frequency,
}

impl WeightKind {
    pub fn of(self, link: &Link) -> f64 {
        match self {
            WeightKind::Flow => link.flow as f64,
            WeightKind::Frequency => link.frequency as f64,
        }
    }
}

impl std::str::FromStr for WeightKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "flow" => Ok(WeightKind::Flow),
            "frequency" => Ok(WeightKind::Frequency),
            _ => Err(format!("weight must be flow or frequency, got {s:?}")),
        }
    }
}

/// Immutable weighted directed network. Nodes are indexed by the sorted order
/// of their account identifiers; links are sorted by (source, target).
#[derive(Debug, Clone)]
pub struct FlowNetwork {
    ids: Vec<String>,
    index: HashMap<String, u32>,
    links: Vec<Link>,
    out_offsets: Vec<usize>,
    // link indices grouped by target
    in_offsets: Vec<usize>,
    in_links: Vec<u32>,
    pairs: HashSet<(u32, u32)>,
}

impl FlowNetwork {
    pub fn build(links: &[AggregatedLink]) -> Result<Self, NetworkError> {
        let ids: Vec<String> = links
            .iter()
            .flat_map(|l| [l.source.as_str(), l.destination.as_str()])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(str::to_string)
            .collect();
        let index: HashMap<String, u32> = ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as u32))
            .collect();
        let mut out = Vec::with_capacity(links.len());
        let mut pairs = HashSet::with_capacity(links.len());
        for l in links {
            let (s, t) = (index[&l.source], index[&l.destination]);
            if s == t {
                return Err(NetworkError::SelfLoop(l.source.clone()));
            }
            if !pairs.insert((s, t)) {
                return Err(NetworkError::DuplicateLink(
                    l.source.clone(),
                    l.destination.clone(),
                ));
            }
            out.push(Link {
                source: s,
                target: t,
                flow: l.flow,
                frequency: l.frequency,
            });
        }
        Ok(Self::from_parts(ids, index, out, pairs))
    }

    /// Builds directly from index-space edges `(source, target, flow, frequency)`
    /// over `n` nodes named by their decimal index, zero-padded so that the
    /// lexicographic order equals the numeric one.
    pub fn from_edges(n: usize, edges: &[(u32, u32, u64, u64)]) -> Result<Self, NetworkError> {
        let width = n.saturating_sub(1).to_string().len();
        let ids: Vec<String> = (0..n).map(|i| format!("{i:0width$}")).collect();
        let index = ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as u32))
            .collect();
        let mut pairs = HashSet::with_capacity(edges.len());
        let mut links = Vec::with_capacity(edges.len());
        for &(s, t, flow, frequency) in edges {
            assert!(
                (s as usize) < n && (t as usize) < n,
                "edge endpoint out of range"
            );
            if s == t {
                return Err(NetworkError::SelfLoop(ids[s as usize].clone()));
            }
            if !pairs.insert((s, t)) {
                return Err(NetworkError::DuplicateLink(
                    ids[s as usize].clone(),
                    ids[t as usize].clone(),
                ));
            }
            links.push(Link {
                source: s,
                target: t,
                flow,
                frequency,
            });
        }
        Ok(Self::from_parts(ids, index, links, pairs))
    }

    fn from_parts(
        ids: Vec<String>,
        index: HashMap<String, u32>,
        mut links: Vec<Link>,
        pairs: HashSet<(u32, u32)>,
    ) -> Self {
        let n = ids.len();
        links.sort_unstable_by_key(|l| (l.source, l.target));
        let mut out_offsets = vec![0usize; n + 1];
        let mut in_offsets = vec![0usize; n + 1];
        for l in &links {
            out_offsets[l.source as usize + 1] += 1;
            in_offsets[l.target as usize + 1] += 1;
        }
        for i in 0..n {
            out_offsets[i + 1] += out_offsets[i];
            in_offsets[i + 1] += in_offsets[i];
        }
        let mut fill = in_offsets.clone();
        let mut in_links = vec![0u32; links.len()];
        for (k, l) in links.iter().enumerate() {
            let slot = &mut fill[l.target as usize];
            in_links[*slot] = k as u32;
            *slot += 1;
        }
        Self {
            ids,
            index,
            links,
            out_offsets,
            in_offsets,
            in_links,
            pairs,
        }
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, node: u32) -> &str {
        &self.ids[node as usize]
    }

    pub fn index_of(&self, id: &str) -> Option<u32> {
        self.index.get(id).copied()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    /// A_ij.
    pub fn has_link(&self, source: u32, target: u32) -> bool {
        self.pairs.contains(&(source, target))
    }

    pub fn out_links(&self, node: u32) -> &[Link] {
        let n = node as usize;
        &self.links[self.out_offsets[n]..self.out_offsets[n + 1]]
    }

    pub fn in_links(&self, node: u32) -> impl Iterator<Item = &Link> + '_ {
        let n = node as usize;
        self.in_links[self.in_offsets[n]..self.in_offsets[n + 1]]
            .iter()
            .map(move |&k| &self.links[k as usize])
    }

    pub fn out_degree(&self, node: u32) -> usize {
        let n = node as usize;
        self.out_offsets[n + 1] - self.out_offsets[n]
    }

    pub fn in_degree(&self, node: u32) -> usize {
        let n = node as usize;
        self.in_offsets[n + 1] - self.in_offsets[n]
    }

    pub fn successors(&self, node: u32) -> impl Iterator<Item = u32> + '_ {
        self.out_links(node).iter().map(|l| l.target)
    }

    pub fn predecessors(&self, node: u32) -> impl Iterator<Item = u32> + '_ {
        self.in_links(node).map(|l| l.source)
    }

    /// Back to aggregated links with account identifiers.
    pub fn to_aggregated(&self) -> Vec<AggregatedLink> {
        self.links
            .iter()
            .map(|l| AggregatedLink {
                source: self.ids[l.source as usize].clone(),
                destination: self.ids[l.target as usize].clone(),
                flow: l.flow,
                frequency: l.frequency,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NodeDegree {
    pub in_degree: u64,
    pub out_degree: u64,
    /// In minus out.
    pub net_degree: i64,
}

pub fn degree_stats(net: &FlowNetwork) -> Vec<NodeDegree> {
    (0..net.node_count() as u32)
        .map(|i| {
            let (din, dout) = (net.in_degree(i) as u64, net.out_degree(i) as u64);
            NodeDegree {
                in_degree: din,
                out_degree: dout,
                net_degree: din as i64 - dout as i64,
            }
        })
        .collect()
}

/// In-flow minus out-flow of money per node.
pub fn net_flow_per_node(net: &FlowNetwork) -> Vec<i128> {
    let mut out = vec![0i128; net.node_count()];
    for l in net.links() {
        out[l.target as usize] += l.flow as i128;
        out[l.source as usize] -= l.flow as i128;
    }
    out
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StatsError {
    #[error("statistic needs at least {needed} values, got {got}")]
    TooFew { needed: usize, got: usize },
}

/// Complementary cumulative distribution over the distinct observed values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ccdf {
    pub points: Vec<(f64, f64)>,
}

impl Ccdf {
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("value\tfraction\n");
        for (v, p) in &self.points {
            s.push_str(&format!("{v}\t{p}\n"));
        }
        s
    }
}

/// `fraction(v) = |{x : x >= v}| / n` for each distinct value `v`.
pub fn ccdf(values: &[f64]) -> Result<Ccdf, StatsError> {
    if values.is_empty() {
        return Err(StatsError::TooFew { needed: 1, got: 0 });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut points = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i];
        points.push((v, (sorted.len() - i) as f64 / n));
        while i < sorted.len() && sorted[i] == v {
            i += 1;
        }
    }
    Ok(Ccdf { points })
}

/// Moment summary. Moments use the population convention (divide by n);
/// kurtosis is non-excess, `m4 / m2^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummaryStats {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub median: f64,
    pub mean: f64,
    pub std_dev: f64,
    /// `None` when the variance is zero.
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
}

pub fn summary(values: &[f64]) -> Result<SummaryStats, StatsError> {
    if values.len() < 2 {
        return Err(StatsError::TooFew {
            needed: 2,
            got: values.len(),
        });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let nf = n as f64;
    let mean = sorted.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in &sorted {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    let (skewness, kurtosis) = if m2 > 0.0 {
        (Some(m3 / m2.powf(1.5)), Some(m4 / (m2 * m2)))
    } else {
        (None, None)
    };
    Ok(SummaryStats {
        count: n,
        min: sorted[0],
        max: sorted[n - 1],
        median,
        mean,
        std_dev: m2.sqrt(),
        skewness,
        kurtosis,
    })
}

/// Pearson correlation; `None` if either margin has zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if n < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

// Number of swaps needed to merge-sort `v`, i.e. the number of inversions.
fn count_inversions(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = count_inversions(&mut v[..mid], &mut buf[..mid])
        + count_inversions(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

// Σ t(t-1)/2 over runs of equal values in a sorted slice.
fn tied_pairs<T: PartialEq>(sorted: impl Iterator<Item = T>) -> u64 {
    let mut total = 0u64;
    let mut run = 0u64;
    let mut prev: Option<T> = None;
    for x in sorted {
        if prev.as_ref() == Some(&x) {
            run += 1;
        } else {
            total += run * run.saturating_sub(1) / 2;
            run = 1;
            prev = Some(x);
        }
    }
    total + run * run.saturating_sub(1) / 2
}

/// Kendall tau-b in O(n log n); `None` when either margin is constant.
pub fn kendall_tau_b(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if n < 2 {
        return None;
    }
    let mut pairs: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let n0 = (n as u64) * (n as u64 - 1) / 2;
    let n1 = tied_pairs(pairs.iter().map(|p| p.0.to_bits()));
    let n3 = tied_pairs(pairs.iter().map(|p| (p.0.to_bits(), p.1.to_bits())));
    let mut ys_sorted: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; n];
    let discordant = count_inversions(&mut ys_sorted, &mut buf);
    let n2 = tied_pairs(ys_sorted.iter().map(|y| y.to_bits()));
    if n0 == n1 || n0 == n2 {
        return None;
    }
    // concordant - discordant = n0 - n1 - n2 + n3 - 2 * discordant
    let numer = n0 as f64 - n1 as f64 - n2 as f64 + n3 as f64 - 2.0 * discordant as f64;
    let denom = ((n0 - n1) as f64).sqrt() * ((n0 - n2) as f64).sqrt();
    Some((numer / denom).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DegreeCorrelation {
    pub pearson_r: Option<f64>,
    pub kendall_tau: Option<f64>,
}

/// Correlation between in- and out-degree over all nodes.
pub fn degree_correlation(net: &FlowNetwork) -> DegreeCorrelation {
    let degs = degree_stats(net);
    let xs: Vec<f64> = degs.iter().map(|d| d.in_degree as f64).collect();
    let ys: Vec<f64> = degs.iter().map(|d| d.out_degree as f64).collect();
    DegreeCorrelation {
        pearson_r: pearson(&xs, &ys),
        kendall_tau: kendall_tau_b(&xs, &ys),
    }
}

/// Least-squares slope of `log10 fraction` against `log10 value`, restricted to
/// points with `value >= min_value` and `fraction >= min_fraction`.
pub fn loglog_tail_slope(ccdf: &Ccdf, min_value: f64, min_fraction: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = ccdf
        .points
        .iter()
        .filter(|(v, p)| *v >= min_value && *v > 0.0 && *p >= min_fraction)
        .map(|(v, p)| (v.log10(), p.log10()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn link(s: &str, d: &str, flow: u64, freq: u64) -> AggregatedLink {
        AggregatedLink {
            source: s.into(),
            destination: d.into(),
            flow,
            frequency: freq,
        }
    }

    fn random_edges(n: usize, p: f64, seed: u64) -> Vec<(u32, u32, u64, u64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for i in 0..n as u32 {
            for j in 0..n as u32 {
                if i != j && rng.random_bool(p) {
                    let f = rng.random_range(1..1000);
                    edges.push((i, j, f, rng.random_range(1..=f.min(50))));
                }
            }
        }
        edges
    }

    #[test]
    fn build_counts() {
        let net = FlowNetwork::build(&[
            link("i", "j", 1, 1),
            link("j", "i", 1, 1),
            link("j", "k", 1, 1),
        ])
        .unwrap();
        assert_eq!((net.node_count(), net.link_count()), (3, 3));
        assert!(net.has_link(0, 1) && net.has_link(1, 0) && !net.has_link(0, 2));
        let empty = FlowNetwork::build(&[]).unwrap();
        assert_eq!((empty.node_count(), empty.link_count()), (0, 0));
    }

    #[test]
    fn build_rejects_duplicates() {
        let err = FlowNetwork::build(&[link("i", "j", 1, 1), link("i", "j", 2, 1)]).unwrap_err();
        assert_eq!(err, NetworkError::DuplicateLink("i".into(), "j".into()));
    }

    #[test]
    fn degrees_star_and_cycle() {
        let net = FlowNetwork::build(&[
            link("a", "h", 1, 1),
            link("b", "h", 1, 1),
            link("c", "h", 1, 1),
        ])
        .unwrap();
        let h = net.index_of("h").unwrap() as usize;
        assert_eq!(
            degree_stats(&net)[h],
            NodeDegree {
                in_degree: 3,
                out_degree: 0,
                net_degree: 3
            }
        );
        let net = FlowNetwork::build(&[link("i", "j", 1, 1), link("j", "i", 1, 1)]).unwrap();
        for d in degree_stats(&net) {
            assert_eq!(
                d,
                NodeDegree {
                    in_degree: 1,
                    out_degree: 1,
                    net_degree: 0
                }
            );
        }
    }

    #[test]
    fn degrees_match_edge_scan() {
        let edges = random_edges(50, 0.1, 3);
        let net = FlowNetwork::from_edges(50, &edges).unwrap();
        let mut din = [0u64; 50];
        let mut dout = [0u64; 50];
        for &(s, t, _, _) in &edges {
            dout[s as usize] += 1;
            din[t as usize] += 1;
        }
        let degs = degree_stats(&net);
        for i in 0..50 {
            assert_eq!((degs[i].in_degree, degs[i].out_degree), (din[i], dout[i]));
        }
        assert_eq!(din.iter().sum::<u64>(), edges.len() as u64);
    }

    #[test]
    fn net_flow_cases() {
        let net = FlowNetwork::build(&[link("i", "j", 5, 1)]).unwrap();
        assert_eq!(net_flow_per_node(&net), vec![-5, 5]);
        let net = FlowNetwork::build(&[
            link("a", "b", 3, 1),
            link("b", "c", 3, 1),
            link("c", "a", 3, 1),
        ])
        .unwrap();
        assert_eq!(net_flow_per_node(&net), vec![0, 0, 0]);

        let edges = random_edges(40, 0.15, 9);
        let net = FlowNetwork::from_edges(40, &edges).unwrap();
        let nf = net_flow_per_node(&net);
        for (i, v) in nf.iter().enumerate() {
            let inflow: i128 = edges
                .iter()
                .filter(|e| e.1 as usize == i)
                .map(|e| e.2 as i128)
                .sum();
            let outflow: i128 = edges
                .iter()
                .filter(|e| e.0 as usize == i)
                .map(|e| e.2 as i128)
                .sum();
            assert_eq!(*v, inflow - outflow);
        }
        assert_eq!(nf.iter().sum::<i128>(), 0);
    }

    #[test]
    fn ccdf_examples() {
        assert_eq!(
            ccdf(&[1.0, 1.0, 2.0, 3.0]).unwrap().points,
            vec![(1.0, 1.0), (2.0, 0.5), (3.0, 0.25)]
        );
        assert_eq!(ccdf(&[5.0, 5.0]).unwrap().points, vec![(5.0, 1.0)]);
        assert!(ccdf(&[]).is_err());
    }

    #[test]
    fn summary_examples() {
        let s = summary(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.median, 2.0);
        assert_eq!(s.skewness, Some(0.0));
        // population variance 2/3, m4 = 2/3 → kurtosis 1.5
        assert!((s.kurtosis.unwrap() - 1.5).abs() < 1e-12);
        let s = summary(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(s.std_dev, 0.0);
        assert_eq!(s.skewness, None);
        assert_eq!(s.kurtosis, None);
        assert!(summary(&[1.0]).is_err());
    }

    #[test]
    fn summary_matches_two_pass_oracle_on_lognormal() {
        use rand_distr::{Distribution, LogNormal};
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dist = LogNormal::new(8.0, 1.5).unwrap();
        let xs: Vec<f64> = (0..10_000).map(|_| dist.sample(&mut rng)).collect();
        // two-pass reference with explicit powers
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let m = |k: i32| xs.iter().map(|x| (x - mean).powi(k)).sum::<f64>() / n;
        let (m2, m3, m4) = (m(2), m(3), m(4));
        let s = summary(&xs).unwrap();
        let rel = |a: f64, b: f64| ((a - b) / b).abs();
        assert!(rel(s.mean, mean) < 1e-10);
        assert!(rel(s.std_dev, m2.sqrt()) < 1e-10);
        assert!(rel(s.skewness.unwrap(), m3 / m2.powf(1.5)) < 1e-10);
        assert!(rel(s.kurtosis.unwrap(), m4 / (m2 * m2)) < 1e-10);
    }

    fn kendall_oracle(xs: &[f64], ys: &[f64]) -> Option<f64> {
        let n = xs.len();
        let (mut conc, mut disc, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
        for i in 0..n {
            for j in i + 1..n {
                let dx = (xs[i] - xs[j]).signum() * ((xs[i] != xs[j]) as i32 as f64);
                let dy = (ys[i] - ys[j]).signum() * ((ys[i] != ys[j]) as i32 as f64);
                match (dx == 0.0, dy == 0.0) {
                    (true, true) => {}
                    (true, false) => tx += 1,
                    (false, true) => ty += 1,
                    (false, false) => {
                        if dx * dy > 0.0 {
                            conc += 1
                        } else {
                            disc += 1
                        }
                    }
                }
            }
        }
        let d1 = (conc + disc + tx) as f64;
        let d2 = (conc + disc + ty) as f64;
        (d1 > 0.0 && d2 > 0.0).then(|| (conc - disc) as f64 / (d1 * d2).sqrt())
    }

    #[test]
    fn kendall_five_node_fixture() {
        let xs = [1.0, 2.0, 2.0, 3.0, 0.0];
        let ys = [0.0, 3.0, 1.0, 1.0, 2.0];
        let want = kendall_oracle(&xs, &ys).unwrap();
        assert!((kendall_tau_b(&xs, &ys).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn pearson_proportional_and_independent() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x).collect();
        assert!((pearson(&xs, &ys).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(pearson(&xs, &[1.0; 20]), None);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a: Vec<f64> = (0..10_000)
            .map(|_| rng.random_range(0..50) as f64)
            .collect();
        let b: Vec<f64> = (0..10_000)
            .map(|_| rng.random_range(0..50) as f64)
            .collect();
        assert!(pearson(&a, &b).unwrap().abs() < 0.05);
    }

    #[test]
    fn degree_correlation_proportional() {
        // every node has in-degree == out-degree on a union of cycles with different lengths
        let net = FlowNetwork::from_edges(
            6,
            &[
                (0, 1, 1, 1),
                (1, 0, 1, 1),
                (2, 3, 1, 1),
                (3, 2, 1, 1),
                (2, 4, 1, 1),
                (4, 2, 1, 1),
                (5, 2, 1, 1),
                (2, 5, 1, 1),
            ],
        )
        .unwrap();
        let c = degree_correlation(&net);
        assert!((c.pearson_r.unwrap() - 1.0).abs() < 1e-12);
        assert!((c.kendall_tau.unwrap() - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn kendall_matches_oracle(pairs in prop::collection::vec((0u8..6, 0u8..6), 2..40)) {
            let xs: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
            let ys: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
            match (kendall_tau_b(&xs, &ys), kendall_oracle(&xs, &ys)) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
                (a, b) => prop_assert_eq!(a.is_none(), b.is_none()),
            }
        }

        #[test]
        fn correlations_rescaling_invariance(pairs in prop::collection::vec((0u16..100, 0u16..100), 3..60)) {
            let xs: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
            let ys: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
            let affine: Vec<f64> = xs.iter().map(|x| 2.5 * x - 7.0).collect();
            let monotone: Vec<f64> = xs.iter().map(|x| (x + 1.0).ln().powi(3)).collect();
            if let (Some(a), Some(b)) = (pearson(&xs, &ys), pearson(&affine, &ys)) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            prop_assert_eq!(kendall_tau_b(&xs, &ys), kendall_tau_b(&monotone, &ys));
        }

        #[test]
        fn ccdf_monotone(values in prop::collection::vec(0u32..1000, 1..200)) {
            let vals: Vec<f64> = values.iter().map(|&v| v as f64).collect();
            let c = ccdf(&vals).unwrap();
            prop_assert_eq!(c.points[0].1, 1.0);
            for w in c.points.windows(2) {
                prop_assert!(w[0].0 < w[1].0);
                prop_assert!(w[0].1 > w[1].1);
            }
            prop_assert!(c.points.iter().all(|p| p.1 > 0.0 && p.1 <= 1.0));
        }
    }
}
