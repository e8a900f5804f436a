//! Randomized property checks over small graphs: serialization round-trips,
//! cascade bookkeeping invariants, oracle output contracts, and score ranges.

use std::collections::BTreeSet;

use proptest::prelude::*;

use imfb::env::{exact_expected_spread, simulate_cascade};
use imfb::graph::DirectedGraph;
use imfb::oracle::select_seeds_degree_discount;
use imfb::policy::{CucbPolicy, EpsGreedyPolicy, Policy};
use imfb::rng::{derive, Stream};
use imfb::CascadeResult;

/// Simple digraph as (node count, deduplicated non-loop edge list).
fn arb_graph() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (2usize..10).prop_flat_map(|n| {
        let pairs = (0usize..n * (n - 1)).prop_map(move |i| {
            let (u, r) = (i / (n - 1), i % (n - 1));
            (u, if r < u { r } else { r + 1 })
        });
        (
            Just(n),
            proptest::collection::btree_set(pairs, 0..=(n * (n - 1)).min(16))
                .prop_map(|s| s.into_iter().collect()),
        )
    })
}

fn arb_probs(m: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.0f64..=1.0, m)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn edge_list_round_trips((n, edges) in arb_graph()) {
        if edges.is_empty() {
            // An empty edge list has no on-disk representation.
            return Ok(());
        }
        let graph = DirectedGraph::from_edges(n, edges).unwrap();
        let mut buf = Vec::new();
        graph.write_edge_list(&mut buf).unwrap();
        let (loaded, report) = DirectedGraph::load_edge_list(buf.as_slice()).unwrap();
        prop_assert_eq!(report.self_loops_dropped, 0);
        prop_assert_eq!(report.duplicates_deduped, 0);
        // The loader renumbers densely by first appearance; undoing that
        // through original_id must recover the written edges in order.
        let recovered: Vec<(usize, usize)> = loaded
            .edges()
            .iter()
            .map(|&(u, v)| (loaded.original_id(u) as usize, loaded.original_id(v) as usize))
            .collect();
        prop_assert_eq!(&recovered, graph.edges());
        // Isolated trailing nodes have no edge-list representation, so the
        // loaded node count may shrink; never grow.
        prop_assert!(loaded.node_count() <= graph.node_count());
    }

    #[test]
    fn cascade_bookkeeping_invariants(
        (n, edges) in arb_graph(),
        probs_seed in any::<u64>(),
        seed_bits in any::<u16>(),
    ) {
        let graph = DirectedGraph::from_edges(n, edges).unwrap();
        let mut prng = derive(probs_seed, Stream::GroundTruth, 0, 0);
        let probs: Vec<f64> = (0..graph.edge_count())
            .map(|_| rand::Rng::random_range(&mut prng, 0.0..1.0))
            .collect();
        let seeds: BTreeSet<usize> =
            (0..n).filter(|v| seed_bits >> v & 1 == 1).collect();
        let mut rng = derive(probs_seed, Stream::Cascade, 0, 1);
        let cascade = simulate_cascade(&graph, &probs, &seeds, &mut rng).unwrap();
        let activated: BTreeSet<usize> = cascade.activated_nodes.iter().copied().collect();
        prop_assert_eq!(activated.len(), cascade.activated_nodes.len(), "no repeats");
        prop_assert!(seeds.iter().all(|s| activated.contains(s)));
        prop_assert_eq!(cascade.outcomes.len(), cascade.observed_edges.len());
        // Observed edges are exactly the out-edges of activated nodes.
        let expected: BTreeSet<usize> = activated
            .iter()
            .flat_map(|&v| graph.out_edges(v).iter().copied())
            .collect();
        let observed: BTreeSet<usize> = cascade.observed_edges.iter().copied().collect();
        prop_assert_eq!(observed.len(), cascade.observed_edges.len());
        prop_assert_eq!(&observed, &expected);
        // A successful attempt always leaves the receiver activated.
        for (&e, &y) in cascade.observed_edges.iter().zip(&cascade.outcomes) {
            if y {
                let (_, r) = graph.endpoints(imfb::EdgeId(e));
                prop_assert!(activated.contains(&r));
            }
        }
    }

    #[test]
    fn expected_spread_brackets(
        (n, edges) in arb_graph(),
        probs_seed in any::<u64>(),
    ) {
        let graph = DirectedGraph::from_edges(n, edges).unwrap();
        let mut prng = derive(probs_seed, Stream::GroundTruth, 0, 0);
        let probs: Vec<f64> = (0..graph.edge_count())
            .map(|_| rand::Rng::random_range(&mut prng, 0.0..1.0))
            .collect();
        let seeds: BTreeSet<usize> = [0].into();
        let spread = exact_expected_spread(&graph, &probs, &seeds).unwrap();
        prop_assert!(spread >= seeds.len() as f64 - 1e-12);
        prop_assert!(spread <= n as f64 + 1e-12);
        // All-zero probabilities collapse the spread onto the seed set.
        let zero = exact_expected_spread(&graph, &vec![0.0; graph.edge_count()], &seeds).unwrap();
        prop_assert!((zero - seeds.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn degree_discount_returns_k_distinct_nodes(
        (n, edges) in arb_graph(),
        k in 0usize..6,
        probs in arb_probs(16),
    ) {
        let graph = DirectedGraph::from_edges(n, edges).unwrap();
        let probs = &probs[..graph.edge_count()];
        let seeds = select_seeds_degree_discount(&graph, probs, k).unwrap();
        prop_assert_eq!(seeds.len(), k.min(n));
        prop_assert!(seeds.iter().all(|&v| v < n));
        let again = select_seeds_degree_discount(&graph, probs, k).unwrap();
        prop_assert_eq!(seeds, again);
    }

    #[test]
    fn baseline_scores_stay_probabilities(
        (n, edges) in arb_graph(),
        seed in any::<u64>(),
        rounds in 1usize..5,
    ) {
        let graph = DirectedGraph::from_edges(n, edges).unwrap();
        if graph.edge_count() == 0 {
            return Ok(());
        }
        let mut cucb = CucbPolicy::new(&graph);
        let mut eps = EpsGreedyPolicy::new(&graph, 0.1).unwrap();
        let mut rng = derive(seed, Stream::Cascade, 0, 0);
        for _ in 0..rounds {
            let observed: Vec<usize> = (0..graph.edge_count())
                .filter(|_| rand::Rng::random_range(&mut rng, 0.0..1.0) < 0.5)
                .collect();
            let outcomes: Vec<bool> = observed
                .iter()
                .map(|_| rand::Rng::random_range(&mut rng, 0.0..1.0) < 0.3)
                .collect();
            let cascade = CascadeResult {
                activated_nodes: vec![],
                observed_edges: observed,
                outcomes,
            };
            cucb.update(&graph, &cascade).unwrap();
            eps.update(&graph, &cascade).unwrap();
            for p in [&cucb as &dyn Policy, &eps] {
                let scores = p.edge_scores(&graph);
                prop_assert!(scores.iter().all(|s| (0.0..=1.0).contains(s)));
            }
        }
    }
}
