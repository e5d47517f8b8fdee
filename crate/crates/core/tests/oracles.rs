mod common;

use common::*;
use moneyflow::bowtie::{classify_bowtie, Component};
use moneyflow::community::{
    adjusted_rand_index, detect_communities, two_level_partition, CommunityOptions,
};
use moneyflow::geonmf::{factorize, DenseMatrix, NmfOptions, SparseMatrix};
use moneyflow::hodge::{assemble_problem, decompose, solve_potentials, SolverOptions};
use moneyflow::ingest::{aggregate, Coord, PartyKind, TransferRecord};
use moneyflow::network::{ccdf, FlowNetwork, WeightKind};
use proptest::prelude::*;
use rand::Rng;

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

#[test]
fn bowtie_matches_closure_oracle() {
    let mut r = rng(11);
    for _ in 0..200 {
        let n = r.random_range(1..=50);
        let p = r.random_range(0.005..0.12);
        let edges = random_digraph(&mut r, n, p);
        let net = network(n, &edges);
        let got = classify_bowtie(&net).unwrap();
        let want = bowtie_oracle(n, &edges);
        assert_eq!(got.component_of, want, "n={n} edges={edges:?}");
        assert_eq!(got.sizes.total(), got.gwcc_size);
    }
}

#[test]
fn hodge_matches_dense_solve() {
    let mut r = rng(12);
    let opts = SolverOptions {
        tolerance: 1e-13,
        ..Default::default()
    };
    for _ in 0..100 {
        let n = r.random_range(2..=100);
        let extra = r.random_range(0.0..0.1);
        let edges = random_connected(&mut r, n, extra);
        let net = network(n, &edges);
        let prob = assemble_problem(&net, WeightKind::Frequency).unwrap();
        let pot = solve_potentials(&prob, &opts).unwrap();
        let want = dense_potentials(n, &edges);
        assert!(rel_err(&pot.phi, &want) <= 1e-8, "n={n}");
        let dec = decompose(&prob, &pot.phi);
        let (f, _) = dense_flows(n, &edges);
        let scale = f.iter().map(|x| x.abs()).fold(0.0, f64::max);
        for d in dec.circular_divergence() {
            assert!(d.abs() <= 1e-6 * scale);
        }
    }
}

#[test]
fn single_link_potentials() {
    let unit = network(2, &[(0, 1, 100, 1)]);
    let prob = assemble_problem(&unit, WeightKind::Frequency).unwrap();
    let pot = solve_potentials(&prob, &SolverOptions::default()).unwrap();
    assert!((pot.phi[0] - 0.5).abs() < 1e-10 && (pot.phi[1] + 0.5).abs() < 1e-10);
}

#[test]
fn equal_cycles_are_purely_circular() {
    for len in 3..=10u32 {
        let edges: Vec<_> = (0..len).map(|i| (i, (i + 1) % len, 500, 7)).collect();
        let net = network(len as usize, &edges);
        let prob = assemble_problem(&net, WeightKind::Frequency).unwrap();
        let pot = solve_potentials(&prob, &SolverOptions::default()).unwrap();
        assert!(pot.phi.iter().all(|x| x.abs() < 1e-10));
        let dec = decompose(&prob, &pot.phi);
        assert!(dec.pairs.iter().all(|p| p.gradient.abs() < 1e-10));
    }
}

#[test]
fn partition_enumeration_counts_bell_numbers() {
    let bell = [1usize, 1, 2, 5, 15, 52, 203, 877];
    for (n, &b) in bell.iter().enumerate().skip(1) {
        let mut c = 0;
        for_each_partition(n, |_| c += 1);
        assert_eq!(c, b);
    }
}

#[test]
fn library_codelength_matches_dense_model() {
    let mut r = rng(13);
    for _ in 0..20 {
        let n = r.random_range(3..=10);
        let edges = random_connected(&mut r, n, 0.3);
        let net = network(n, &edges);
        let model = moneyflow::community::flow::FlowModel::new(&net, WeightKind::Frequency);
        let labels: Vec<u32> = (0..n).map(|_| r.random_range(0..3)).collect();
        let dense: Vec<usize> = {
            let (d, _) = moneyflow::community::optimizer::densify(&labels);
            d.iter().map(|&x| x as usize).collect()
        };
        let want = dense_codelength(n, &edges, 0.15, &dense);
        assert!((model.codelength(&labels) - want).abs() < 1e-9);
    }
}

#[test]
fn optimizer_reaches_exhaustive_minimum() {
    let mut r = rng(14);
    let opts = CommunityOptions::default();
    for _ in 0..10 {
        let n = r.random_range(4..=9);
        let edges = random_connected(&mut r, n, 0.25);
        let net = network(n, &edges);
        let (best, _) = exhaustive_minimum(n, &edges, opts.teleport);
        let part = two_level_partition(&net, &opts);
        assert!(
            part.codelength <= best + 1e-9,
            "n={n} got {} want {best}",
            part.codelength
        );
        assert!(part.trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }
}

#[test]
fn two_cliques_split() {
    let mut edges = Vec::new();
    for base in [0u32, 5] {
        for i in 0..5 {
            for j in 0..5 {
                if i != j {
                    edges.push((base + i, base + j, 10, 20));
                }
            }
        }
    }
    edges.push((0, 5, 10, 1));
    edges.push((5, 0, 10, 1));
    let net = network(10, &edges);
    let tree = detect_communities(&net, &CommunityOptions::default());
    let labels = tree
        .labels_at(1, 10)
        .into_iter()
        .map(|l| l.unwrap())
        .collect::<Vec<_>>();
    let truth: Vec<u32> = (0..10).map(|v| (v / 5) as u32).collect();
    assert!((adjusted_rand_index(&labels, &truth) - 1.0).abs() < 1e-12);
}

#[test]
fn nmf_recovers_exact_low_rank() {
    let mut r = rng(15);
    for d in 1..=5 {
        let w = DenseMatrix::from_fn(30, d, |_, _| r.random_range(0.1..1.0));
        let h = DenseMatrix::from_fn(d, 25, |_, _| r.random_range(0.1..1.0));
        let v = SparseMatrix::from_dense(&w.matmul(&h));
        let mut o = NmfOptions::new(d);
        o.max_iterations = 50_000;
        o.tolerance = 1e-16;
        let res = factorize(&v, &o).unwrap();
        let rel = (res.objective() / v.frobenius_sq()).sqrt();
        assert!(rel <= 1e-6, "d={d} rel={rel}");
    }
}

#[test]
fn nmf_objective_never_increases() {
    let mut r = rng(16);
    for _ in 0..10 {
        let rows = r.random_range(5..30);
        let cols = r.random_range(5..30);
        let v = SparseMatrix::from_triplets(
            rows,
            cols,
            (0..rows * cols / 3).map(|_| {
                (
                    r.random_range(0..rows),
                    r.random_range(0..cols),
                    r.random_range(0.0..5.0),
                )
            }),
        );
        let mut o = NmfOptions::new(r.random_range(1..6));
        o.max_iterations = 300;
        o.seed = r.random();
        let res = factorize(&v, &o).unwrap();
        assert!(res
            .objective_trace
            .windows(2)
            .all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }
}

fn record(s: &str, t: &str, amount: u64) -> TransferRecord {
    TransferRecord {
        timestamp: chrono::NaiveDate::from_ymd_opt(2024, 1, 1)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap(),
        source: s.into(),
        destination: t.into(),
        amount,
        source_kind: PartyKind::Firm,
        destination_kind: PartyKind::Firm,
        source_coord: Some(Coord::new(35.0, 139.0)),
        destination_coord: Some(Coord::new(35.0, 139.0)),
    }
}

proptest! {
    #[test]
    fn ccdf_is_monotone(values in prop::collection::vec(0.0f64..1e6, 1..200)) {
        let c = ccdf(&values).unwrap();
        prop_assert!((c.points[0].1 - 1.0).abs() < 1e-12);
        for w in c.points.windows(2) {
            prop_assert!(w[1].0 > w[0].0);
            prop_assert!(w[1].1 < w[0].1);
        }
        prop_assert!(c.points.iter().all(|&(_, p)| p > 0.0 && p <= 1.0));
    }

    #[test]
    fn aggregation_conserves_flow_and_degree(
        raw in prop::collection::vec((0u8..12, 0u8..12, 1u64..1_000_000), 1..300)
    ) {
        let records: Vec<_> = raw
            .iter()
            .filter(|(s, t, _)| s != t)
            .map(|&(s, t, a)| record(&format!("A{s:02}"), &format!("A{t:02}"), a))
            .collect();
        prop_assume!(!records.is_empty());
        let links = aggregate(&records);
        let total: u64 = records.iter().map(|r| r.amount).sum();
        prop_assert_eq!(links.iter().map(|l| l.flow).sum::<u64>(), total);
        prop_assert_eq!(links.iter().map(|l| l.frequency).sum::<u64>(), records.len() as u64);
        let net = FlowNetwork::build(&links).unwrap();
        let n = net.node_count() as u32;
        let din: usize = (0..n).map(|v| net.in_degree(v)).sum();
        let dout: usize = (0..n).map(|v| net.out_degree(v)).sum();
        prop_assert_eq!(din, links.len());
        prop_assert_eq!(dout, links.len());
    }

    #[test]
    fn bowtie_identity_holds(n in 1usize..40, p in 0.0f64..0.15, seed in any::<u64>()) {
        let mut r = rng(seed);
        let edges = random_digraph(&mut r, n, p);
        let b = classify_bowtie(&network(n, &edges)).unwrap();
        let counted = b.component_of.iter().filter(|&&c| c != Component::OutsideGwcc).count();
        prop_assert_eq!(b.sizes.total(), b.gwcc_size);
        prop_assert_eq!(counted, b.gwcc_size);
    }
}
