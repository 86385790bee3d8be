use proptest::prelude::*;

use gibbslab::cluster::{count_clusters, BondFrame, Exterior};
use gibbslab::free_energy::{minimize_mixture, MixtureOptions};
use gibbslab::lattice::{
    decode_states, edge_boundary, encode_states, make_box, shift, shift_window, Alphabet, Configuration, Guard, Site,
    Tail, Window,
};
use gibbslab::measures::{
    ext_abs_diff, max_diameter, max_entropy, mixture, rel_entropy, total_variation, DensityTable, MeasureFamily,
};
use gibbslab::specification::{
    diam_b, kernel, BoundaryCondition, GriffithsParams, LoopOnParams, PotentialSpec, RandomClusterParams, SpecificationModel,
};

fn table(weights: &[f64]) -> DensityTable {
    let a = Alphabet::uniform((0..weights.len()).map(|i| i.to_string()));
    DensityTable::from_weights(Window::singleton(Site::origin(1)), a, weights).unwrap().normalize()
}

fn positive(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-6f64..1.0, len)
}

fn nonneg(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), 1e-6f64..1.0], len)
        .prop_filter("some mass", |v| v.iter().any(|&x| x > 0.0))
}

fn model() -> impl Strategy<Value = SpecificationModel> {
    prop_oneof![
        (0.0f64..1.0, -0.5f64..0.5).prop_map(|(b, h)| {
            let mut spec = PotentialSpec::ising(2, b);
            spec.potential = spec.potential.with_field(h);
            SpecificationModel::Potential(spec)
        }),
        (0.05f64..0.95, 0.2f64..5.0).prop_map(|(p, q)| SpecificationModel::RandomCluster(RandomClusterParams { p, q })),
        (0.2f64..4.0, 0.2f64..1.5).prop_map(|(n, x)| SpecificationModel::LoopOn(LoopOnParams { n, x })),
        (0.05f64..0.95, 0.0f64..1.5).prop_map(|(p, beta)| SpecificationModel::Griffiths(GriffithsParams { p, beta })),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn encode_decode_round_trip(k in 1usize..5, states in prop::collection::vec(0usize..5, 0..8)) {
        let states: Vec<usize> = states.into_iter().map(|s| s % k).collect();
        let code = encode_states(&states, k);
        prop_assert_eq!(decode_states(code, states.len(), k), states);
    }

    #[test]
    fn box_sizes(n in 0usize..4, d in 1usize..4) {
        prop_assert_eq!(make_box(n, d).unwrap().len(), (2 * n + 1).pow(d as u32));
    }

    #[test]
    fn boundary_edges_cross_once(coords in prop::collection::vec((-2i64..3, -2i64..3), 1..10)) {
        let w = Window::new(2, coords.iter().map(|(a, b)| Site::new(&[*a, *b]))).unwrap();
        for e in edge_boundary(&w) {
            prop_assert!(w.contains(&e.a) != w.contains(&e.b));
            prop_assert_eq!(e.a.l1(&e.b), 1);
        }
    }

    #[test]
    fn shift_round_trip(states in prop::collection::vec(0usize..3, 4), dx in -5i64..5, dy in -5i64..5) {
        let w = Window::rect(&[0, 0], &[1, 1]).unwrap();
        let c = Configuration::new(w, states).unwrap();
        let x = Site::new(&[dx, dy]);
        prop_assert_eq!(shift(&shift(&c, &x), &x.neg()), c.clone());
        prop_assert_eq!(shift_window(c.window(), &Site::origin(2)), c.window().clone());
    }

    #[test]
    fn entropy_inequalities(mu in nonneg(5), nu in positive(5)) {
        let (mu, nu) = (table(&mu), table(&nu));
        let h = rel_entropy(&mu, &nu).unwrap();
        prop_assert!(h >= 0.0);
        prop_assert!(max_entropy(&mu, &nu).unwrap() >= h - 1e-12);
        prop_assert_eq!(rel_entropy(&mu, &mu).unwrap(), 0.0);
        let tv = total_variation(&mu, &nu).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&tv));
        prop_assert!((tv - total_variation(&nu, &mu).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn diameter_is_largest_pairwise_max_entropy(a in positive(4), b in positive(4), c in positive(4)) {
        let members = vec![table(&a), table(&b), table(&c)];
        let diam = max_diameter(&MeasureFamily::new(members.clone()).unwrap());
        let mut pairwise: f64 = 0.0;
        for x in &members {
            for y in &members {
                pairwise = pairwise.max(max_entropy(x, y).unwrap());
            }
        }
        prop_assert!((diam - pairwise).abs() < 1e-12);
    }

    #[test]
    fn entropy_difference_within_diameter(mu in nonneg(6), nu in positive(6), nu2 in positive(6)) {
        let (mu, nu, nu2) = (table(&mu), table(&nu), table(&nu2));
        let diff = ext_abs_diff(rel_entropy(&mu, &nu).unwrap(), rel_entropy(&mu, &nu2).unwrap());
        let diam = max_diameter(&MeasureFamily::new(vec![nu, nu2]).unwrap());
        prop_assert!(diff <= diam + 1e-12);
    }

    #[test]
    fn mixture_optimum_beats_every_vertex(target in positive(4), ks in prop::collection::vec(positive(4), 1..5), w in positive(4)) {
        let target = table(&target);
        let kernels: Vec<DensityTable> = ks.iter().map(|k| table(k)).collect();
        let fit = minimize_mixture(&target, &kernels, MixtureOptions::default()).unwrap();
        prop_assert!(fit.value >= 0.0);
        for k in &kernels {
            prop_assert!(fit.value <= rel_entropy(&target, k).unwrap() + 1e-9);
        }
        // and any other mixture
        let w: Vec<f64> = w[..kernels.len().min(4)].to_vec();
        let s: f64 = w.iter().sum();
        let w: Vec<f64> = w.iter().map(|x| x / s).collect();
        let other = mixture(&w, &MeasureFamily::new(kernels[..w.len()].to_vec()).unwrap()).unwrap();
        prop_assert!(fit.value <= rel_entropy(&target, &other).unwrap() + 1e-9);
        prop_assert!((fit.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn kernels_are_normalized_and_shift_invariant(m in model(), seed in 0u64..1000, dx in -3i64..3, dy in -3i64..3) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let g = Guard::default();
        let lambda = Window::rect(&[0, 0], &[1, 0]).unwrap();
        let frame = Window::rect(&[-2, -2], &[3, 2]).unwrap();
        let k = m.alphabet(2).unwrap().size();
        let states: Vec<usize> = (0..frame.len() - lambda.len()).map(|_| rng.gen_range(0..k)).collect();
        let bc = BoundaryCondition::from_states(&lambda, frame.clone(), states, m.default_tail()).unwrap();
        let t = kernel(&m, &lambda, &bc, &g).unwrap();
        prop_assert!((t.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let x = Site::new(&[dx, dy]);
        let moved_lambda = shift_window(&lambda, &x);
        let moved = BoundaryCondition::new(&moved_lambda, shift_window(&frame, &x), shift(bc.outside(), &x.neg()), bc.tail()).unwrap();
        let shifted = kernel(&m, &moved_lambda, &moved, &g).unwrap();
        prop_assert_eq!(shifted.log_weights(), t.log_weights());
    }

    #[test]
    fn single_site_diameters_are_finite(m in model()) {
        let lambda = Window::singleton(Site::origin(2));
        let frame = lambda.closed_neighborhood(m.adjacency());
        let d = diam_b(&m, &lambda, &frame, m.default_tail(), &Guard::default()).unwrap();
        prop_assert!(d.is_finite() && d >= 0.0);
    }

    #[test]
    fn cluster_counts_are_shift_invariant(masks in prop::collection::vec(0u32..4, 9), dx in -4i64..4, dy in -4i64..4) {
        let frame = make_box(1, 2).unwrap();
        let lambda = Window::singleton(Site::origin(2));
        let c = count_clusters(&BondFrame::new(frame.clone(), masks.clone()).unwrap(), &lambda, Exterior::Closed).unwrap();
        let x = Site::new(&[dx, dy]);
        let moved = BondFrame::new(shift_window(&frame, &x), masks).unwrap();
        prop_assert_eq!(count_clusters(&moved, &shift_window(&lambda, &x), Exterior::Closed).unwrap(), c);
    }
}

#[test]
fn zero_tail_is_default() {
    assert_eq!(Tail::default(), Tail::Fixed(0));
}
