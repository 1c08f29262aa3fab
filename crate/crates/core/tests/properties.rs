use proptest::prelude::*;
use zerodelay_core::belief::{output_predictive, tv_distance, Belief};
use zerodelay_core::dobrushin::dobrushin;
use zerodelay_core::lattice::{BeliefLattice, DEFAULT_LATTICE_CAP};
use zerodelay_core::matrix::StochasticMatrix;
use zerodelay_core::model::{induced_channel, ChannelKernel, DistortionFn, SystemSpec, TransitionKernel};
use zerodelay_core::quantizer::Quantizer;

fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, n).prop_map(|v| {
        let s: f64 = v.iter().sum::<f64>() + 1e-9;
        let mut out: Vec<f64> = v.iter().map(|x| (x + 1e-9 / v.len() as f64) / s).collect();
        let t: f64 = out.iter().sum();
        out.iter_mut().for_each(|x| *x /= t);
        out
    })
}

fn stochastic(rows: usize, cols: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(simplex(cols), rows)
}

fn sized_kernel() -> impl Strategy<Value = (usize, Vec<Vec<f64>>)> {
    (2usize..=5).prop_flat_map(|n| (Just(n), stochastic(n, n)))
}

proptest! {
    #[test]
    fn dobrushin_lies_in_unit_interval((_, rows) in sized_kernel()) {
        let d = dobrushin(&StochasticMatrix::from_rows(&rows).unwrap());
        prop_assert!((0.0..=1.0).contains(&d));
    }

    #[test]
    fn kernel_contracts_total_variation(
        (rows, mu, nu) in (2usize..=5).prop_flat_map(|n| (stochastic(n, n), simplex(n), simplex(n))),
    ) {
        let k = StochasticMatrix::from_rows(&rows).unwrap();
        let before = tv_distance(&mu, &nu);
        let after = tv_distance(&k.left_multiply(&mu), &k.left_multiply(&nu));
        prop_assert!(after <= (1.0 - dobrushin(&k)) * before + 1e-12);
    }

    #[test]
    fn output_laws_contract_under_the_induced_channel(
        mu in simplex(4),
        nu in simplex(4),
        o in stochastic(3, 3),
        map in prop::collection::vec(0usize..3, 4),
    ) {
        let values = [0.0, 1.0, 2.0, 3.0];
        let spec = SystemSpec::new(
            TransitionKernel::from_rows(&vec![vec![0.25; 4]; 4]).unwrap(),
            ChannelKernel::from_rows(&o).unwrap(),
            DistortionFn::squared(&values, &values).unwrap(),
            values.to_vec(),
            0.9,
        ).unwrap();
        let q = Quantizer::new(map, 3).unwrap();
        let oq = induced_channel(&spec.channel, &q).unwrap();
        let (bm, bn) = (Belief::new(mu.clone()).unwrap(), Belief::new(nu.clone()).unwrap());
        let gap = tv_distance(&output_predictive(&spec, &bm, &q), &output_predictive(&spec, &bn, &q));
        prop_assert!(gap <= (1.0 - dobrushin(&oq)) * tv_distance(&mu, &nu) + 1e-12);
    }

    #[test]
    fn lattice_points_are_their_own_nearest(d in 2usize..=5, n in 1usize..=6, pick in any::<prop::sample::Index>()) {
        let l = BeliefLattice::build(d, n, DEFAULT_LATTICE_CAP).unwrap();
        let id = pick.index(l.len());
        let hit = l.nearest(&l.point(id), None);
        prop_assert_eq!(hit.id, id);
        prop_assert!(hit.distance < 1e-12);
    }

    #[test]
    fn nearest_matches_a_full_scan_within_the_covering_radius(
        (d, pi) in (2usize..=5).prop_flat_map(|d| (Just(d), simplex(d))),
        n in 1usize..=6,
    ) {
        let l = BeliefLattice::build(d, n, DEFAULT_LATTICE_CAP).unwrap();
        let hit = l.nearest(&pi, None);
        let best = (0..l.len()).map(|i| l.distance(&pi, i)).fold(f64::INFINITY, f64::min);
        prop_assert!((hit.distance - best).abs() < 1e-9);
        prop_assert!(hit.distance <= l.covering_radius() + 1e-12);
        let first = (0..l.len()).find(|&i| l.distance(&pi, i) <= best + 1e-9).unwrap();
        prop_assert_eq!(hit.id, first);
    }

    #[test]
    fn filter_outputs_stay_on_the_simplex(
        pi in simplex(4),
        t in stochastic(4, 4),
        o in stochastic(4, 4),
        map in prop::collection::vec(0usize..4, 4),
        mp in 0usize..4,
    ) {
        let values = [0.0, 1.0, 2.0, 3.0];
        let spec = SystemSpec::new(
            TransitionKernel::from_rows(&t).unwrap(),
            ChannelKernel::from_rows(&o).unwrap(),
            DistortionFn::squared(&values, &values).unwrap(),
            values.to_vec(),
            0.9,
        );
        prop_assume!(spec.is_ok());
        let spec = spec.unwrap();
        let q = Quantizer::new(map, 4).unwrap();
        let step = zerodelay_core::belief::filter_update(&spec, &Belief::new(pi).unwrap(), &q, mp).unwrap();
        for b in [&step.filter, &step.next_predictor] {
            let s: f64 = b.probs().iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            prop_assert!(b.probs().iter().all(|&p| p >= 0.0));
        }
    }
}
