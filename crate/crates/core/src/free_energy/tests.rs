use super::*;
use crate::lattice::{make_box, Alphabet, Site};
use crate::specification::{griffiths, griffiths_window, GriffithsParams, PotentialSpec, RandomClusterParams};

fn g() -> Guard {
    Guard::default()
}

fn opts() -> SfeOptions {
    SfeOptions::default()
}

fn ising1(beta: f64) -> SpecificationModel {
    SpecificationModel::Potential(PotentialSpec::ising(1, beta))
}

#[test]
fn product_against_free_model_is_zero() {
    let alphabet = Alphabet::new(vec!["a".into(), "b".into(), "c".into()], vec![0.2, 0.3, 0.5]).unwrap();
    let model = SpecificationModel::Potential(PotentialSpec::free(2, alphabet.clone()));
    let mu = ShiftInvariantField::reference(2, alphabet);
    let report = sfe_report(&mu, &model, 1, &BoundaryRule::Constant { state: 1 }, &opts()).unwrap();
    for r in &report.rows {
        assert_eq!(r.term_fixed, 0.0);
        assert_eq!(r.term_inf, 0.0);
        assert_eq!(r.diam, 0.0);
    }
    let mut csv = Vec::new();
    report.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("n,box_size,term_fixed,term_inf,diam,running_sup\n0,1,0.0000000000000000e0"));
}

#[test]
fn point_mass_against_fair_coins_is_log_two() {
    let alphabet = Alphabet::uniform(["0", "1"]);
    let model = SpecificationModel::Potential(PotentialSpec::free(1, alphabet.clone()));
    let mu = ShiftInvariantField::PointMass { dim: 1, alphabet, state: 1 };
    for n in 0..4 {
        let t = sfe_term(&mu, &model, n, &BoundaryRule::default(), &g()).unwrap();
        assert!((t - 2f64.ln()).abs() < 1e-14);
        let i = sfe_inf_term(&mu, &model, n, &opts()).unwrap();
        assert!((i - 2f64.ln()).abs() < 1e-14);
    }
}

#[test]
fn ising_chain_terms_shrink() {
    let model = ising1(0.4);
    let mu = ShiftInvariantField::IsingChain { beta: 0.4, field: 0.0 };
    let report = sfe_report(&mu, &model, 6, &BoundaryRule::Constant { state: 0 }, &opts()).unwrap();
    report.check_sandwich(1e-9).unwrap();
    for w in report.rows.windows(2) {
        assert!(w[1].term_fixed < w[0].term_fixed);
    }
    // μ is a DLR state: the fixed terms stay within the diameter scale
    for r in &report.rows {
        assert!(r.term_fixed <= r.diam / r.box_size as f64 + 1e-12);
        assert!(r.term_inf < 1e-8);
    }
}

#[test]
fn inf_term_of_boundary_free_model_equals_fixed_term() {
    let model = SpecificationModel::RandomCluster(RandomClusterParams::new(0.3, 1.0).unwrap());
    let a = model.alphabet(2).unwrap();
    let mu = ShiftInvariantField::product(2, a, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
    let t = sfe_term(&mu, &model, 0, &BoundaryRule::Random { seed: 3, draws: 4 }, &g()).unwrap();
    let i = sfe_inf_term(&mu, &model, 0, &opts()).unwrap();
    assert!((t - i).abs() < 1e-14);
}

#[test]
fn inf_term_vanishes_on_a_kernel() {
    let model = ising1(0.5);
    let lambda = make_box(1, 1).unwrap();
    let (frame, tail) = box_frame(&model, &lambda);
    let bc = BoundaryCondition::from_states(&lambda, frame, vec![1, 0], tail).unwrap();
    let k = model.kernel(&lambda, &bc, &g()).unwrap().table;
    let mu = ShiftInvariantField::tables(vec![k]).unwrap();
    assert!(sfe_inf_term(&mu, &model, 1, &opts()).unwrap() < 1e-12);
}

#[test]
fn random_target_sits_in_the_sandwich() {
    let model = SpecificationModel::Potential(PotentialSpec::ising(2, 0.5));
    let lambda = make_box(0, 2).unwrap();
    let mu = ShiftInvariantField::product(2, Alphabet::uniform(["-1", "+1"]), vec![0.93, 0.07]).unwrap();
    let report = sfe_report(&mu, &model, 0, &BoundaryRule::Constant { state: 1 }, &opts()).unwrap();
    report.check_sandwich(1e-9).unwrap();
    let r = &report.rows[0];
    assert!(r.term_inf < r.term_fixed);
    assert_eq!(r.box_size, lambda.len());
}

#[test]
fn boundary_choices_differ_by_at_most_the_diameter() {
    let model = ising1(0.7);
    let mu = ShiftInvariantField::product(1, Alphabet::uniform(["-1", "+1"]), vec![0.3, 0.7]).unwrap();
    for n in 0..4 {
        let lambda = make_box(n, 1).unwrap();
        let (frame, tail) = box_frame(&model, &lambda);
        let diam = diam_b(&model, &lambda, &frame, tail, &g()).unwrap();
        let a = sfe_term(&mu, &model, n, &BoundaryRule::Constant { state: 0 }, &g()).unwrap();
        let b = sfe_term(&mu, &model, n, &BoundaryRule::Random { seed: n as u64, draws: 3 }, &g()).unwrap();
        assert!((a - b).abs() <= diam / lambda.len() as f64 + 1e-12);
    }
}

#[test]
fn superadditivity_examples() {
    let model = ising1(0.6);
    let mu = ShiftInvariantField::IsingChain { beta: 0.6, field: 0.0 };
    let parts = [Window::singleton(Site::new(&[0])), Window::singleton(Site::new(&[1]))];
    let frame = Window::rect(&[-1], &[2]).unwrap();
    let s = superadditivity_check(&mu, &model, &parts, &frame, Tail::Fixed(0), &opts()).unwrap();
    assert!(s.slack >= -1e-8, "{s:?}");
    let single = superadditivity_check(&mu, &model, &parts[..1], &frame, Tail::Fixed(0), &opts()).unwrap();
    assert_eq!(single.slack, 0.0);
    let free = SpecificationModel::Potential(PotentialSpec::free(1, Alphabet::uniform(["-1", "+1"])));
    let prod = ShiftInvariantField::reference(1, Alphabet::uniform(["-1", "+1"]));
    let z = superadditivity_check(&prod, &free, &parts, &frame, Tail::Fixed(0), &opts()).unwrap();
    assert_eq!(z.slack, 0.0);
    assert!(superadditivity_check(&mu, &model, &[parts[0].clone(), parts[0].clone()], &frame, Tail::Fixed(0), &opts()).is_err());
}

#[test]
fn finite_energy_examples() {
    let alphabet = Alphabet::uniform(["0", "1"]);
    let free = SpecificationModel::Potential(PotentialSpec::free(2, alphabet.clone()));
    let lambda = origin();
    let frame = make_box(1, 2).unwrap();
    let prod = ShiftInvariantField::reference(2, alphabet.clone());
    let fe = finite_energy_check(&prod, &free, &lambda, &frame, Tail::Fixed(0), &g()).unwrap();
    assert_eq!(fe.eps, 1.0);
    assert!(fe.pass && fe.margin.abs() < 1e-14);
    let pm = ShiftInvariantField::PointMass { dim: 2, alphabet, state: 0 };
    assert!(!finite_energy_check(&pm, &free, &lambda, &frame, Tail::Fixed(0), &g()).unwrap().pass);

    let params = GriffithsParams::new(0.6, 0.5).unwrap();
    let model = SpecificationModel::Griffiths(params);
    let k = ShiftInvariantField::tables(vec![griffiths_window(params, &frame, &g()).unwrap()]).unwrap();
    let tail = Tail::Fixed(griffiths::CLOSED);
    let fe = finite_energy_check(&k, &model, &lambda, &frame, tail, &g()).unwrap();
    assert!(fe.pass && fe.eps > 0.0 && fe.eps < 1.0);
    let pm = ShiftInvariantField::PointMass { dim: 2, alphabet: model.alphabet(2).unwrap(), state: 2 };
    assert!(!finite_energy_check(&pm, &model, &lambda, &frame, tail, &g()).unwrap().pass);
}

fn origin() -> Window {
    Window::singleton(Site::origin(2))
}

#[test]
fn dlr_examples() {
    let alphabet = Alphabet::uniform(["-1", "+1"]);
    let free = SpecificationModel::Potential(PotentialSpec::free(2, alphabet.clone()));
    let frame = make_box(1, 2).unwrap();
    let prod = ShiftInvariantField::reference(2, alphabet.clone());
    assert!(dlr_residual(&prod, &free, &origin(), &frame, Tail::Fixed(0), &g()).unwrap() < 1e-15);

    let params = GriffithsParams::new(0.6, 0.5).unwrap();
    let model = SpecificationModel::Griffiths(params);
    let k = ShiftInvariantField::tables(vec![griffiths_window(params, &frame, &g()).unwrap()]).unwrap();
    for lambda in [origin(), Window::rect(&[0, 0], &[1, 1]).unwrap()] {
        let r = dlr_residual(&k, &model, &lambda, &frame, Tail::Fixed(griffiths::CLOSED), &g()).unwrap();
        assert!(r <= 1e-10, "{r}");
    }

    let ising = SpecificationModel::Potential(PotentialSpec::ising(2, 0.4));
    let wrong = ShiftInvariantField::product(2, alphabet, vec![0.2, 0.8]).unwrap();
    assert!(dlr_residual(&wrong, &ising, &origin(), &frame, Tail::Fixed(0), &g()).unwrap() > 1e-3);
    let gibbs = gibbs_window_field(&ising, &frame, &g()).unwrap();
    assert!(dlr_residual(&gibbs, &ising, &origin(), &frame, Tail::Fixed(0), &g()).unwrap() < 1e-12);
}

#[test]
fn sampler_is_reproducible() {
    let model = ising1(0.3);
    let frame = Window::rect(&[-1], &[3]).unwrap();
    let region = Window::rect(&[0], &[2]).unwrap();
    let init = Configuration::constant(frame.clone(), 0);
    let hb = HeatBath::new(&model, &frame, &region, Tail::Fixed(0), &g()).unwrap();
    let a = run_chains(&hb, &init, 42, 3, 200, 10).unwrap();
    let b = run_chains(&hb, &init, 42, 3, 200, 10).unwrap();
    assert_eq!(a, b);
    assert_ne!(a[0], a[1]);
    // boundary sites are never touched
    for snap in a.iter().flatten() {
        assert_eq!(snap.states()[0], 0);
        assert_eq!(snap.states()[4], 0);
    }
    let one = heat_bath_sweep(&model, &init, &region, Tail::Fixed(0), 9, &g()).unwrap();
    assert_eq!(one, heat_bath_sweep(&model, &init, &region, Tail::Fixed(0), 9, &g()).unwrap());
}
