use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hqrc::ansatz::ring_graph;
use hqrc::dynamics::{Normalizer, Trajectory, Units};
use hqrc::experiment::{quantile_sorted, ExperimentConfig};
use hqrc::measurement::{all_to_all_size, MeasurementScheme, Observables};
use hqrc::metrics::{poincare_return_map, vpt, VptConfig};
use hqrc::readout::{fit_ridge, ridge_objective};
use hqrc::reservoir::{
    sigma_max, spectral_normalize, update_hqrc, Activation, ActivationSet, ReservoirState, WeightDists, WeightSet,
};
use hqrc::statevector::{Axis, GateOp, PauliString, Shots, StateVector};

fn gate(n: usize) -> impl Strategy<Value = GateOp> {
    let q = 0..n;
    let a = -7.0..7.0f64;
    prop_oneof![
        (q.clone(), a.clone()).prop_map(|(qubit, theta)| GateOp::Rx { qubit, theta }),
        (q.clone(), a.clone()).prop_map(|(qubit, theta)| GateOp::Ry { qubit, theta }),
        (q.clone(), a.clone()).prop_map(|(qubit, theta)| GateOp::Rz { qubit, theta }),
        (q.clone(), a.clone(), a.clone(), a).prop_map(|(qubit, alpha, beta, gamma)| GateOp::U3 {
            qubit,
            alpha,
            beta,
            gamma
        }),
        (q.clone(), q).prop_filter_map("distinct", |(control, target)| (control != target)
            .then_some(GateOp::Cx { control, target })),
    ]
}

fn circuit() -> impl Strategy<Value = (usize, Vec<GateOp>)> {
    (2usize..=5).prop_flat_map(|n| (Just(n), prop::collection::vec(gate(n), 0..30)))
}

fn axis() -> impl Strategy<Value = Axis> {
    prop_oneof![Just(Axis::X), Just(Axis::Y), Just(Axis::Z)]
}

fn matrix(rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> impl Strategy<Value = DMatrix<f64>> {
    (rows, cols).prop_flat_map(|(r, c)| {
        prop::collection::vec(-3.0..3.0f64, r * c).prop_map(move |v| DMatrix::from_vec(r, c, v))
    })
}

fn traj(points: Vec<Vec<f64>>) -> Trajectory {
    Trajectory::new(0.01, points, Units::Normalized).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn gates_preserve_norm((n, gates) in circuit()) {
        let mut sv = StateVector::new(n).unwrap();
        sv.apply_all(&gates).unwrap();
        prop_assert!((sv.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inner_products_are_preserved((n, gates) in circuit(), pre in prop::collection::vec(-3.0..3.0f64, 4)) {
        // two different states evolved by the same circuit keep their overlap
        let mut a = StateVector::new(n).unwrap();
        let mut b = StateVector::new(n).unwrap();
        b.apply(&GateOp::U3 { qubit: 0, alpha: pre[0], beta: pre[1], gamma: pre[2] }).unwrap();
        b.apply(&GateOp::Ry { qubit: n - 1, theta: pre[3] }).unwrap();
        let dot = |x: &StateVector, y: &StateVector| -> num_complex::Complex64 {
            x.amplitudes().iter().zip(y.amplitudes()).map(|(p, q)| p.conj() * q).sum()
        };
        let before = dot(&a, &b);
        a.apply_all(&gates).unwrap();
        b.apply_all(&gates).unwrap();
        prop_assert!((dot(&a, &b) - before).norm() < 1e-12);
    }

    #[test]
    fn expectations_are_bounded((n, gates) in circuit(), ax in axis(), mask in 1usize..32) {
        let mut sv = StateVector::new(n).unwrap();
        sv.apply_all(&gates).unwrap();
        let qubits: Vec<usize> = (0..n).filter(|q| mask >> q & 1 == 1).collect();
        prop_assume!((1..=3).contains(&qubits.len()));
        let e = sv.expectation(&PauliString::new(ax, qubits).unwrap()).unwrap();
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&e));
    }

    #[test]
    fn sampled_estimates_are_bounded((n, gates) in circuit(), ax in axis(), shots in 1u64..500, seed: u64) {
        let mut sv = StateVector::new(n).unwrap();
        sv.apply_all(&gates).unwrap();
        let obs = Observables::new(n, &MeasurementScheme::all_to_all(2)).unwrap();
        let m = obs.measure(&sv, Shots::Finite(shots), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert!(m.values.iter().all(|v| (-1.0..=1.0).contains(v)));
        let counts = sv.sample_basis(ax, shots, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(counts.total(), shots);
    }

    #[test]
    fn measurement_length_formula(n in 1usize..=9, order in 1usize..=3) {
        let order = order.min(n);
        let binom = |k: usize| (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1));
        let expected: usize = 3 * (1..=order).map(binom).sum::<usize>();
        prop_assert_eq!(all_to_all_size(n, order), expected);
        prop_assert_eq!(Observables::new(n, &MeasurementScheme::all_to_all(order)).unwrap().len(), expected);
    }

    #[test]
    fn spectral_normalization(w in matrix(1..12, 1..12)) {
        prop_assume!(w.norm() > 1e-6);
        let s = spectral_normalize(&w).unwrap();
        let svd_top = s.clone().svd(false, false).singular_values.max();
        prop_assert!((svd_top - 1.0).abs() < 1e-6);
        let again = spectral_normalize(&s).unwrap();
        prop_assert!((&again - &s).abs().max() < 1e-6);
        prop_assert!((sigma_max(&w) - w.clone().svd(false, false).singular_values.max()).abs() < 1e-6 * w.norm().max(1.0));
    }

    #[test]
    fn tanh_update_stays_in_unit_box(
        n in 1usize..12, steps in 1usize..20, leak in 0.0..=1.0f64, seed: u64,
    ) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| rng.random_range(-5.0..5.0));
        let weights = WeightSet { w_in: vec![], w_r: g(n, n), w_m: g(n, 6), w_x: g(n, 3), seed: 0, dists: WeightDists::default() };
        let acts = ActivationSet { leak, g: Activation::Tanh, ..ActivationSet::default() };
        let mut state = ReservoirState::zeros(n);
        for _ in 0..steps {
            let m = g(6, 1);
            let x = g(3, 1);
            state = update_hqrc(&state, m.as_slice(), x.as_slice(), &acts, &weights).unwrap();
            prop_assert!(state.r.iter().all(|v| v.abs() <= 1.0));
        }
    }

    #[test]
    fn ridge_is_minimal_and_shrinks(r in matrix(2..8, 10..30), seed: u64, b1 in -8.0..0.0f64, b2 in -8.0..0.0f64) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = DMatrix::from_fn(2, r.ncols(), |_, _| rng.random_range(-1.0..1.0));
        let (lo, hi) = (10f64.powf(b1.min(b2)), 10f64.powf(b1.max(b2)));
        let w = fit_ridge(&r, &y, lo).unwrap();
        let best = ridge_objective(&w, &r, &y, lo);
        for _ in 0..5 {
            let bump = DMatrix::from_fn(w.nrows(), w.ncols(), |_, _| rng.random_range(-1e-3..1e-3));
            prop_assert!(ridge_objective(&(&w + bump), &r, &y, lo) >= best - 1e-9 * best.max(1.0));
        }
        prop_assert!(fit_ridge(&r, &y, hi).unwrap().norm() <= w.norm() * (1.0 + 1e-9));
    }

    #[test]
    fn normalizer_round_trip(points in prop::collection::vec(prop::collection::vec(-100.0..100.0f64, 3), 1..50)) {
        prop_assume!(points.iter().flatten().any(|v| *v != 0.0));
        let t = Trajectory::new(0.1, points, Units::Raw).unwrap();
        let n = Normalizer::fit(&t).unwrap();
        let scaled = n.apply(&t);
        prop_assert!(scaled.points.iter().flatten().all(|v| v.abs() <= 1.0));
        let back = n.invert(&scaled);
        for (a, b) in back.points.iter().flatten().zip(t.points.iter().flatten()) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn vpt_monotone_in_epsilon(
        truth in prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 3), 1..80),
        noise in prop::collection::vec(-0.5..0.5f64, 240),
        e1 in 0.01..1.0f64, e2 in 0.01..1.0f64, k in -3i32..=3,
    ) {
        let pred: Vec<Vec<f64>> = truth.iter().enumerate()
            .map(|(i, p)| p.iter().enumerate().map(|(j, v)| v + noise[3 * i + j] * i as f64 / 10.0).collect())
            .collect();
        let cfg = |eps: f64, s: f64| VptConfig { epsilon: eps, sigma: vec![s; 3], dt: 0.01 };
        let (t, p) = (traj(truth.clone()), traj(pred.clone()));
        let (lo, hi) = (e1.min(e2), e1.max(e2));
        prop_assert!(vpt(&p, &t, &cfg(hi, 0.5)).unwrap().steps >= vpt(&p, &t, &cfg(lo, 0.5)).unwrap().steps);
        let c = 2f64.powi(k);
        let scale = |v: &Vec<Vec<f64>>| traj(v.iter().map(|q| q.iter().map(|x| x * c).collect()).collect());
        prop_assert_eq!(vpt(&scale(&pred), &scale(&truth), &cfg(lo, 0.5 * c)).unwrap(), vpt(&p, &t, &cfg(lo, 0.5)).unwrap());
    }

    #[test]
    fn return_map_pairs_consecutive_maxima(series in prop::collection::vec(-1.0..1.0f64, 0..200)) {
        let maxima = hqrc::metrics::local_maxima(&series);
        let map = poincare_return_map(&series);
        prop_assert_eq!(map.len(), maxima.len().saturating_sub(1));
        for (k, (a, b)) in map.iter().enumerate() {
            prop_assert_eq!(*a, series[maxima[k]]);
            prop_assert_eq!(*b, series[maxima[k + 1]]);
        }
    }

    #[test]
    fn even_rings_split_into_matchings(half in 2usize..10) {
        let p = ring_graph(2 * half).unwrap();
        prop_assert!(p.ring1.is_matching() && p.ring2.is_matching());
    }

    #[test]
    fn quantiles_are_ordered(mut v in prop::collection::vec(-50.0..50.0f64, 1..60)) {
        v.sort_by(f64::total_cmp);
        let q = [0.0, 0.25, 0.5, 0.75, 1.0].map(|p| quantile_sorted(&v, p));
        prop_assert!(q.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(q[0], v[0]);
        prop_assert_eq!(q[4], v[v.len() - 1]);
    }

    #[test]
    fn shots_round_trip(n in 1u64..10_000_000) {
        let s = Shots::Finite(n);
        prop_assert_eq!(s.to_string().parse::<Shots>().unwrap(), s);
    }

    #[test]
    fn pauli_round_trip(ax in axis(), mask in 1usize..256) {
        let qubits: Vec<usize> = (0..8).filter(|q| mask >> q & 1 == 1).collect();
        prop_assume!(qubits.len() <= 3);
        let p = PauliString::new(ax, qubits).unwrap();
        prop_assert_eq!(p.to_string().parse::<PauliString>().unwrap(), p);
    }

    #[test]
    fn config_hash_ignores_seeds_only(seeds in prop::collection::vec(0u64..1000, 1..5), beta in 1e-10..1e-2f64) {
        let mut a = ExperimentConfig::default();
        a.readout.beta = beta;
        let mut b = a.clone();
        b.seeds = seeds;
        prop_assert_eq!(a.config_hash(), b.config_hash());
        let text = a.to_json().unwrap();
        prop_assert_eq!(ExperimentConfig::from_str_auto(&text, None).unwrap().config_hash(), a.config_hash());
        b.readout.beta = beta * 2.0;
        prop_assert_ne!(a.config_hash(), b.config_hash());
    }
}

#[test]
fn shots_exact_round_trip() {
    assert_eq!("exact".parse::<Shots>().unwrap(), Shots::Exact);
    assert_eq!(Shots::Exact.to_string().parse::<Shots>().unwrap(), Shots::Exact);
}

#[test]
fn column_vector_helper_matches() {
    assert_eq!(hqrc::readout::column(&[1.0, 2.0]), DVector::from_vec(vec![1.0, 2.0]));
}
