use embedleak::attacks::reconstruction::{slot_count, slots_to_matrix, threshold_graph};
use embedleak::defense::add_laplace;
use embedleak::graph::{BinningStrategy, BucketScheme};
use embedleak::metrics::{roc_auc, similarity, stat_profile_pair, wl_kernel, SimilarityKind, Statistic, WL_ITERATIONS};
use embedleak::models::{EncoderConfig, GraphEncoder, PoolingKind};
use embedleak::samplers::{sample, sample_nodes, target_size, SamplerMethod, SamplerSpec};
use embedleak::{Graph, GraphProperty};
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn graph_from(n: usize, mask: &[bool]) -> Graph {
    let mut edges = Vec::new();
    let mut k = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            if mask[k] {
                edges.push((i, j));
            }
            k += 1;
        }
    }
    Graph::unlabeled(n, &edges).unwrap()
}

fn arb_graph(max_n: usize) -> impl Strategy<Value = Graph> {
    (1..=max_n).prop_flat_map(|n| {
        prop::collection::vec(prop::bool::weighted(0.3), n * (n - 1) / 2).prop_map(move |m| graph_from(n, &m))
    })
}

fn arb_graph_and_perm(max_n: usize) -> impl Strategy<Value = (Graph, Vec<usize>)> {
    arb_graph(max_n).prop_flat_map(|g| {
        let n = g.node_count();
        (Just(g), Just((0..n).collect::<Vec<_>>()).prop_shuffle())
    })
}

fn histogram() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, 10).prop_filter_map("non-zero mass", |v| {
        let s: f64 = v.iter().sum();
        (s > 1e-6).then(|| v.iter().map(|x| x / s).collect())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adjacency_is_symmetric_with_empty_diagonal(g in arb_graph(14)) {
        let a = g.adjacency_matrix();
        prop_assert_eq!(&a, &a.t());
        prop_assert!(a.diag().iter().all(|&x| x == 0.0));
        prop_assert_eq!(a.sum() as usize, 2 * g.edge_count());
    }

    #[test]
    fn properties_ignore_node_order((g, perm) in arb_graph_and_perm(14)) {
        let h = g.permuted(&perm).unwrap();
        for p in GraphProperty::ALL {
            prop_assert_eq!(p.compute(&g), p.compute(&h), "{}", p);
        }
        let d = GraphProperty::Density.compute(&g);
        prop_assert!((0.0..=1.0).contains(&d));
    }

    #[test]
    fn samplers_return_exact_induced_subgraphs(
        g in arb_graph(30),
        tenths in 1usize..10,
        method in prop::sample::select(SamplerMethod::ALL.to_vec()),
        seed in any::<u64>(),
    ) {
        let n = g.node_count();
        let ratio = tenths as f64 / 10.0;
        let spec = SamplerSpec::new(method, ratio, seed);
        let nodes = sample_nodes(&g, &spec).unwrap();
        prop_assert_eq!(nodes.len(), (tenths * n).div_ceil(10));
        prop_assert_eq!(nodes.len(), target_size(ratio, n));
        let mut uniq = nodes.clone();
        uniq.sort_unstable();
        uniq.dedup();
        prop_assert_eq!(uniq.len(), nodes.len());
        let sub = sample(&g, &spec).unwrap();
        let expected = nodes.iter().enumerate()
            .flat_map(|(a, &u)| nodes.iter().skip(a + 1).map(move |&v| (u, v)))
            .filter(|&(u, v)| g.has_edge(u, v))
            .count();
        prop_assert_eq!(sub.edge_count(), expected);
        prop_assert_eq!(sample_nodes(&g, &spec).unwrap(), nodes);
    }

    #[test]
    fn wl_kernel_is_symmetric_bounded_and_order_free((g, perm) in arb_graph_and_perm(12), h in arb_graph(12)) {
        let k = wl_kernel(&g, &h, WL_ITERATIONS).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&k));
        prop_assert!((k - wl_kernel(&h, &g, WL_ITERATIONS).unwrap()).abs() < 1e-12);
        let gp = g.permuted(&perm).unwrap();
        prop_assert!((k - wl_kernel(&gp, &h, WL_ITERATIONS).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn similarities_stay_in_range(p in histogram(), q in histogram()) {
        for kind in SimilarityKind::ALL {
            let v = similarity(&p, &q, kind).unwrap();
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v), "{} {}", kind.name(), v);
            let same = similarity(&p, &p, kind).unwrap();
            let perfect = if kind == SimilarityKind::Cosine { 1.0 } else { 0.0 };
            prop_assert!((same - perfect).abs() < 1e-9);
        }
    }

    #[test]
    fn stat_histograms_are_distributions(g in arb_graph(14), h in arb_graph(14)) {
        let (a, b) = stat_profile_pair(&g, &h).unwrap();
        for s in Statistic::ALL {
            for prof in [&a, &b] {
                let hist = prof.get(s);
                prop_assert!((hist.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                prop_assert!(hist.iter().all(|&x| x >= 0.0));
            }
        }
    }

    #[test]
    fn auc_is_rank_based(
        scores in prop::collection::vec(-5i32..5, 2..40),
        labels in prop::collection::vec(any::<bool>(), 2..40),
    ) {
        let n = scores.len().min(labels.len());
        let mut labels = labels[..n].to_vec();
        labels[0] = true;
        labels[1] = false;
        let s: Vec<f64> = scores[..n].iter().map(|&x| x as f64).collect();
        let auc = roc_auc(&s, &labels).unwrap();
        prop_assert!((0.0..=1.0).contains(&auc));
        let monotone: Vec<f64> = s.iter().map(|x| x.exp() * 3.0 + 1.0).collect();
        prop_assert!((roc_auc(&monotone, &labels).unwrap() - auc).abs() < 1e-12);
        let flipped: Vec<f64> = s.iter().map(|x| -x).collect();
        prop_assert!((roc_auc(&flipped, &labels).unwrap() - (1.0 - auc)).abs() < 1e-12);
    }

    #[test]
    fn bucket_labels_are_in_range(values in prop::collection::vec(0.0f64..100.0, 2..60), k in 1usize..9, probe in -10.0f64..110.0) {
        prop_assume!(values.iter().any(|&v| v != values[0]));
        for strategy in [BinningStrategy::Quantile, BinningStrategy::EqualWidth] {
            let s = BucketScheme::from_values(&values, GraphProperty::NumNodes, k, strategy).unwrap();
            prop_assert!(s.num_bins() >= 1 && s.num_bins() <= k);
            prop_assert!(s.bucketize(probe) < s.num_bins());
        }
    }

    #[test]
    fn thresholded_reconstructions_are_simple_graphs(n in 2usize..10, seed in any::<u64>(), thr in 0.05f64..0.95) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let slots: Vec<f64> = (0..slot_count(n)).map(|_| rng.random()).collect();
        let p = slots_to_matrix(&slots, n);
        prop_assert_eq!(&p, &p.t());
        let g = threshold_graph(&p, thr);
        prop_assert!(g.node_count() <= n);
        prop_assert!(g.degrees().iter().all(|&d| d > 0));
        prop_assert_eq!(g.edge_count(), slots.iter().filter(|&&x| x >= thr).count());
    }

    #[test]
    fn zero_noise_releases_the_embedding(v in prop::collection::vec(-10.0f64..10.0, 1..20), seed in any::<u64>()) {
        let h = Array1::from(v);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        prop_assert_eq!(add_laplace(&h, 0.0, &mut rng).unwrap(), h);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn embeddings_ignore_node_order((g, perm) in arb_graph_and_perm(20), seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = g.node_count();
        let g = g.with_features(Array2::from_shape_fn((n, 4), |_| rng.random_range(-1.0..1.0))).unwrap();
        let gp = g.permuted(&perm).unwrap();
        for pooling in PoolingKind::ALL {
            let cfg = EncoderConfig { hidden_dim: 16, embedding_dim: 8, pooling, ..EncoderConfig::default() };
            let enc = GraphEncoder::<f64>::new(cfg, 4, 20, &mut rng).unwrap();
            let a = enc.encode(&g).unwrap();
            let b = enc.encode(&gp).unwrap();
            let diff = (&a - &b).iter().fold(0.0f64, |m, x| m.max(x.abs()));
            prop_assert!(diff < 1e-9, "{}: {}", pooling, diff);
        }
    }
}
