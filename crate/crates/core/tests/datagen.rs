use hetconv::datagen::{generate, generate_with_truth, make_splits, GenSpec, DBLP_SCALES};
use hetconv::hin::validate_graph;
use proptest::prelude::*;

fn small(seed: u64, noise: f64) -> GenSpec {
    let counts = [("P", 600), ("A", 300), ("C", 8), ("T", 200)];
    GenSpec {
        counts: counts.iter().map(|&(t, n)| (t.to_string(), n)).collect(),
        noise,
        feature_dim: 8,
        seed,
        ..GenSpec::default()
    }
}

#[test]
fn noiseless_labels_are_the_path_majority() {
    let gen = generate_with_truth(&small(1, 0.0)).unwrap();
    let g = &gen.graph;
    let s = g.schema();
    let (p, a, c) = (
        s.type_id("P").unwrap(),
        s.type_id("A").unwrap(),
        s.type_id("C").unwrap(),
    );
    let a_from_p = g.adjacency(s.relation_id(p, a).unwrap());
    let p_from_c = g.adjacency(s.relation_id(c, p).unwrap());
    let labels = g.labels(a).unwrap();
    let latent = gen.latent[a].as_ref().unwrap();
    for i in 0..g.num_objects(a) {
        let mut votes = [0usize; 4];
        for &j in a_from_p.row(i).0 {
            for &v in p_from_c.row(j).0 {
                votes[gen.anchor_classes[v]] += 1;
            }
        }
        let best = *votes.iter().max().unwrap();
        let expected = if votes[latent[i]] == best {
            latent[i]
        } else {
            votes.iter().position(|&x| x == best).unwrap()
        };
        assert_eq!(labels[i], Some(expected), "author {i}, votes {votes:?}");
        assert_eq!(labels[i], Some(latent[i]));
    }
}

#[test]
fn noise_flips_the_requested_share() {
    let gen = generate_with_truth(&small(2, 0.3)).unwrap();
    let a = gen.graph.schema().type_id("A").unwrap();
    let latent = gen.latent[a].as_ref().unwrap();
    let labels = gen.graph.labels(a).unwrap();
    let flipped = labels
        .iter()
        .zip(latent)
        .filter(|(y, &h)| **y != Some(h))
        .count();
    let share = flipped as f64 / latent.len() as f64;
    assert!((share - 0.3).abs() < 0.08, "flipped share {share}");
}

#[test]
fn scaled_graphs_hit_exact_totals() {
    for &(authors, objects, links) in &DBLP_SCALES[..3] {
        let g = generate(&GenSpec::dblp_scaled(authors, objects, links, 5).unwrap()).unwrap();
        assert_eq!(g.num_objects(g.schema().type_id("A").unwrap()), authors);
        assert_eq!(g.total_objects(), objects);
        assert_eq!(g.total_links(), links);
    }
}

#[test]
fn same_seed_same_graph() {
    let a = generate(&small(3, 0.05)).unwrap();
    let b = generate(&small(3, 0.05)).unwrap();
    let c = generate(&small(4, 0.05)).unwrap();
    let n = a.schema().relations().len();
    assert!((0..n).all(|r| a.adjacency(r) == b.adjacency(r)));
    assert!((0..4).all(|t| a.features(t) == b.features(t) && a.labels(t) == b.labels(t)));
    assert!((0..n).any(|r| a.adjacency(r) != c.adjacency(r)));
}

#[test]
fn default_graph_is_valid() {
    let g = generate(&GenSpec::default()).unwrap();
    assert!(validate_graph(&g).is_empty());
    assert!((4500..=5500).contains(&g.total_objects()));
}

#[test]
fn split_sizes() {
    let g = generate(&GenSpec {
        counts: [("P", 100), ("A", 100), ("C", 4), ("T", 50)]
            .iter()
            .map(|&(t, n)| (t.to_string(), n))
            .collect(),
        ..GenSpec::default()
    })
    .unwrap();
    let a = g.schema().type_id("A").unwrap();
    let s = make_splits(&g, a, 20.0, 0).unwrap();
    assert_eq!((s.train.len(), s.val.len(), s.test.len()), (20, 40, 40));
    let s = make_splits(&g, a, 80.0, 0).unwrap();
    assert_eq!((s.train.len(), s.val.len(), s.test.len()), (80, 10, 10));
    assert!(make_splits(&g, a, 100.0, 0).is_err());
    assert!(make_splits(&g, g.schema().type_id("P").unwrap(), 20.0, 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn splits_partition_the_labeled_objects(n in 3usize..60, pct in 1.0f64..99.0, seed in 0u64..1000) {
        let spec = GenSpec {
            counts: [("P", 2 * n), ("A", n), ("C", 4), ("T", 10)].iter().map(|&(t, k)| (t.to_string(), k)).collect(),
            n_classes: 2,
            feature_dim: 2,
            ..GenSpec::default()
        };
        let g = generate(&spec).unwrap();
        let a = g.schema().type_id("A").unwrap();
        let s = make_splits(&g, a, pct, seed).unwrap();
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert!(!s.train.is_empty() && !s.val.is_empty() && !s.test.is_empty());
        prop_assert!(s.val.len() >= s.test.len() && s.val.len() - s.test.len() <= 1);
    }
}
