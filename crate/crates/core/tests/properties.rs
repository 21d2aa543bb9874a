use proptest::collection::vec;
use proptest::prelude::*;

use taskdiag::cl_metrics::{backward_transfer, forgetting, ResultsMatrix};
use taskdiag::distance::{
    matrix_mse, pairwise_from_distributions, sliced_w1, upsample_matrix, wasserstein1, DistanceMatrix, EmpiricalDist,
};
use taskdiag::profiles::{
    bps, d_prof, profile_distance, stability_pair_count, stability_profile, plasticity_profile, Profile,
    ProfileDistanceWeights, ProfileKind, ProfilePair, ProfileSettings,
};
use taskdiag::stream::{read_csv, summarize, write_csv, ChannelSelector, CsvSchema, Stream};
use taskdiag::taskify::{
    fixed_length_steps, sample_neighborhood, shift_steps_by, task_intervals, PerturbationSpec, Taskification,
    TaskifyError,
};

mod common;
use common::{brute_metrics, transport_oracle};

fn dist(v: &[f64]) -> EmpiricalDist {
    EmpiricalDist::from_slice(v).unwrap()
}

fn samples(max: usize) -> impl Strategy<Value = Vec<f64>> {
    vec(-100.0f64..100.0, 1..=max)
}

fn tiles(tk: &Taskification, t: usize) -> bool {
    let iv = task_intervals(tk);
    iv.first().map(|x| x.0) == Some(0)
        && iv.last().map(|x| x.1) == Some(t)
        && iv.windows(2).all(|w| w[0].1 == w[1].0)
        && iv.iter().all(|(s, e)| s < e)
}

/// Random split of `t` steps with every task at least `min` long.
fn split(t: usize, min: usize) -> impl Strategy<Value = Vec<usize>> {
    let max_k = (t / min).max(1);
    (1..=max_k).prop_flat_map(move |k| {
        let slack = t - k * min;
        vec(0..=slack, k - 1).prop_map(move |mut cuts| {
            cuts.sort_unstable();
            let mut b = vec![0];
            for (i, c) in cuts.iter().enumerate() {
                b.push(c + (i + 1) * min);
            }
            b.push(t);
            b
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn w1_metric_axioms(p in samples(12), q in samples(12), r in samples(12)) {
        let (p, q, r) = (dist(&p), dist(&q), dist(&r));
        let pq = wasserstein1(&p, &q);
        prop_assert!(pq >= 0.0);
        prop_assert_eq!(wasserstein1(&p, &p), 0.0);
        prop_assert!((pq - wasserstein1(&q, &p)).abs() <= 1e-9);
        prop_assert!(wasserstein1(&p, &r) <= pq + wasserstein1(&q, &r) + 1e-9);
    }

    #[test]
    fn w1_matches_transport(p in samples(8), q in samples(8)) {
        let got = wasserstein1(&dist(&p), &dist(&q));
        prop_assert!((got - transport_oracle(&p, &q)).abs() <= 1e-9);
    }

    #[test]
    fn w1_zero_only_for_equal_multisets(p in vec(-3i32..=3, 1..6), q in vec(-3i32..=3, 1..6)) {
        let (pf, qf): (Vec<f64>, Vec<f64>) = (p.iter().map(|&x| x as f64).collect(), q.iter().map(|&x| x as f64).collect());
        let d = wasserstein1(&dist(&pf), &dist(&qf));
        let (mut ps, mut qs) = (pf.clone(), qf.clone());
        ps.sort_by(f64::total_cmp);
        qs.sort_by(f64::total_cmp);
        if ps == qs {
            prop_assert_eq!(d, 0.0);
        } else if ps.len() == qs.len() {
            prop_assert!(d > 0.0);
        }
    }

    #[test]
    fn w1_scale_equivariance(p in samples(10), q in samples(10), a in 0.01f64..50.0) {
        let base = wasserstein1(&dist(&p), &dist(&q));
        let scaled = wasserstein1(
            &dist(&p.iter().map(|x| a * x).collect::<Vec<_>>()),
            &dist(&q.iter().map(|x| a * x).collect::<Vec<_>>()),
        );
        prop_assert!((scaled - a * base).abs() <= 1e-9 * (1.0 + a * base));
    }

    #[test]
    fn w1_translation(p in samples(10), c in -50.0f64..50.0) {
        let moved: Vec<f64> = p.iter().map(|x| x + c).collect();
        prop_assert!((wasserstein1(&dist(&p), &dist(&moved)) - c.abs()).abs() <= 1e-9);
    }

    #[test]
    fn sliced_w1_of_shifted_channels(p in samples(8), q in samples(8), c1 in -5.0f64..5.0, c2 in -5.0f64..5.0) {
        let a = [dist(&p), dist(&q)];
        let b = [
            dist(&p.iter().map(|x| x + c1).collect::<Vec<_>>()),
            dist(&q.iter().map(|x| x + c2).collect::<Vec<_>>()),
        ];
        prop_assert!((sliced_w1(&a, &b).unwrap() - (c1.abs() + c2.abs()) / 2.0).abs() <= 1e-9);
    }

    #[test]
    fn pairwise_permutation_consistent(tasks in vec(samples(6), 2..7), seed in any::<u64>()) {
        let dists: Vec<Vec<EmpiricalDist>> = tasks.iter().map(|t| vec![dist(t)]).collect();
        let k = dists.len();
        let mut perm: Vec<usize> = (0..k).collect();
        // Deterministic Fisher-Yates driven by the seed.
        let mut s = seed;
        for i in (1..k).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let m = pairwise_from_distributions(&dists).unwrap();
        let permuted: Vec<Vec<EmpiricalDist>> = perm.iter().map(|&i| dists[i].clone()).collect();
        let pm = pairwise_from_distributions(&permuted).unwrap();
        for i in 0..k {
            for j in 0..k {
                prop_assert_eq!(pm.get(i, j), m.get(perm[i], perm[j]));
            }
        }
    }

    #[test]
    fn upsampling_keeps_matrix_shape(tasks in vec(samples(5), 2..6), extra in 0usize..8) {
        let dists: Vec<Vec<EmpiricalDist>> = tasks.iter().map(|t| vec![dist(t)]).collect();
        let m = pairwise_from_distributions(&dists).unwrap();
        let up = upsample_matrix(&m, m.dims() + extra).unwrap();
        prop_assert_eq!(up.dims(), m.dims() + extra);
        for i in 0..up.dims() {
            prop_assert_eq!(up.get(i, i), 0.0);
            for j in 0..up.dims() {
                prop_assert!(up.get(i, j) >= 0.0);
                prop_assert_eq!(up.get(i, j), up.get(j, i));
                prop_assert!(up.get(i, j) <= m.max() + 1e-12);
            }
        }
        prop_assert_eq!(matrix_mse(&up, &up).unwrap(), 0.0);
        // Round trip through the matrix CSV format.
        let mut buf = Vec::new();
        up.write_csv(&mut buf).unwrap();
        prop_assert_eq!(DistanceMatrix::read_csv(std::str::from_utf8(&buf).unwrap()).unwrap(), up);
    }

    #[test]
    fn csv_round_trip(
        cols in vec(vec(-1e6f64..1e6, 8), 1..4),
        start in 0i64..2_000_000_000,
        step in prop::sample::select(vec![60u64, 300, 600, 3600]),
    ) {
        let names: Vec<String> = (0..cols.len()).map(|i| format!("c{i}")).collect();
        let stream = Stream::new("s", names, cols, step, start).unwrap();
        let mut buf = Vec::new();
        write_csv(&stream, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), &CsvSchema::default(), "s").unwrap();
        prop_assert_eq!(&back, &stream);
        prop_assert_eq!(summarize(&back).duration_seconds, back.t_steps() as u64 * step);
    }

    #[test]
    fn fixed_length_tiles(days in 1usize..60, window in 1usize..20, spd in prop::sample::select(vec![1usize, 24, 144])) {
        let t = days * spd;
        match fixed_length_steps(t, window * spd, spd, spd, format!("{window}d")) {
            Ok(tk) => {
                prop_assert!(tiles(&tk, t));
                prop_assert!(tk.n_tasks() >= 2);
                prop_assert!(tk.validate(t, spd).is_ok());
                prop_assert!(task_intervals(&tk).iter().all(|(s, e)| e - s >= spd));
            }
            Err(_) => prop_assert!(window >= days),
        }
    }

    #[test]
    fn neighborhood_tiles_and_stays_within_delta(
        b in split(600, 40),
        delta in 1usize..30,
        seed in any::<u64>(),
    ) {
        let tk = Taskification::new("r", b, 24).unwrap();
        let spec = PerturbationSpec::new(delta, 16, seed).unwrap();
        match sample_neighborhood(&tk, &spec, 20) {
            Ok(hood) => {
                prop_assert_eq!(&hood, &sample_neighborhood(&tk, &spec, 20).unwrap());
                for s in &hood.samples {
                    prop_assert!(tiles(s, 600));
                    prop_assert!(s.validate(600, 20).is_ok());
                    for (x, y) in s.boundaries.iter().zip(&tk.boundaries) {
                        prop_assert!(x.abs_diff(*y) <= delta);
                    }
                }
            }
            // Valid joint draws can be too rare for the redraw budget.
            Err(e) => prop_assert!(matches!(e, TaskifyError::NeighborhoodEmpty { .. }), "unexpected error {e}"),
        }
    }

    #[test]
    fn shift_inverse(b in split(400, 10), d in -30i64..30) {
        let tk = Taskification::new("r", b, 10).unwrap();
        if let Ok(moved) = shift_steps_by(&tk, d, 10) {
            prop_assert!(tiles(&moved, 400));
            if let Ok(back) = shift_steps_by(&moved, -d, 10) {
                prop_assert_eq!(back.boundaries, tk.boundaries);
            }
        }
    }

    #[test]
    fn profile_cardinalities(b in split(240, 10), l_min in 2usize..6, values in vec(0.0f64..5.0, 240)) {
        let stream = Stream::univariate("s", "x", values, 600).unwrap();
        let tk = Taskification::new("r", b, 144).unwrap();
        let k = tk.n_tasks();
        let sel = ChannelSelector::Target;
        match plasticity_profile(&stream, &tk, &sel) {
            Ok(p) => {
                prop_assert_eq!(p.len(), k - 1);
                prop_assert!(p.values.iter().all(|v| *v >= 0.0));
            }
            Err(_) => prop_assert!(k < 2),
        }
        match stability_profile(&stream, &tk, &sel, l_min) {
            Ok(s) => {
                prop_assert_eq!(s.len(), stability_pair_count(k, l_min));
                let brute = (0..k).flat_map(|i| (i + 1..k).map(move |j| j - i)).filter(|g| *g >= l_min).count();
                prop_assert_eq!(s.len(), brute);
            }
            Err(_) => prop_assert!(k <= l_min),
        }
    }

    #[test]
    fn dprof_symmetric_and_zero_on_self(
        values in vec(0.0f64..10.0, 300),
        a in split(300, 20),
        b in split(300, 20),
    ) {
        let stream = Stream::univariate("s", "x", values, 600).unwrap();
        let ta = Taskification::new("a", a, 144).unwrap();
        let tb = Taskification::new("b", b, 144).unwrap();
        prop_assume!(ta.n_tasks() >= 3 && tb.n_tasks() >= 3);
        let s = ProfileSettings::default();
        let ab = d_prof(&stream, &ta, &tb, &s).unwrap();
        let ba = d_prof(&stream, &tb, &ta, &s).unwrap();
        prop_assert_eq!(d_prof(&stream, &ta, &ta, &s).unwrap().d_prof, 0.0);
        prop_assert!(ab.d_prof >= 0.0);
        prop_assert!((ab.d_prof - ba.d_prof).abs() <= 1e-12);
    }

    #[test]
    fn dprof_monotone_in_plasticity(pl in vec(0.0f64..5.0, 1..6), st in vec(0.0f64..5.0, 1..6), bump in 0.01f64..3.0) {
        let mk = |extra: f64| ProfilePair {
            plasticity: Profile::sorted(ProfileKind::Plasticity, pl.iter().map(|v| v + extra).collect(), None),
            stability: Profile::sorted(ProfileKind::Stability, st.clone(), Some(2)),
        };
        let base = mk(0.0);
        let w = ProfileDistanceWeights::default();
        let near = profile_distance(&base, &mk(bump), &w).unwrap();
        let far = profile_distance(&base, &mk(bump * 2.0), &w).unwrap();
        prop_assert_eq!(near.d_st, 0.0);
        prop_assert!(far.d_prof > near.d_prof);
    }

    #[test]
    fn bps_zero_on_constant_stream(
        c in -10.0f64..10.0,
        b in split(1440, 144),
        delta in 1usize..100,
        seed in any::<u64>(),
    ) {
        let stream = Stream::univariate("c", "x", vec![c; 1440], 600).unwrap();
        let tk = Taskification::new("r", b, 144).unwrap();
        prop_assume!(tk.n_tasks() >= 3);
        let spec = PerturbationSpec::new(delta, 4, seed).unwrap();
        if let Ok(r) = bps(&stream, &tk, &spec, &ProfileSettings::default(), 144) {
            prop_assert_eq!(r.bps_mean, 0.0);
            prop_assert_eq!(r.bps_max, 0.0);
        }
    }

    #[test]
    fn forgetting_bwt_oracle_and_shift_invariance(
        rows in (2usize..=10).prop_flat_map(|t| {
            (0..t).map(|i| vec(0.0f64..100.0, i + 1)).collect::<Vec<_>>()
        }),
        c in 0.0f64..100.0,
    ) {
        let rm = ResultsMatrix::from_lower(rows.clone()).unwrap();
        let (f, b) = brute_metrics(&rows);
        prop_assert_eq!(forgetting(&rm), f);
        prop_assert_eq!(backward_transfer(&rm), b);
        let moved = rm.add_constant(c).unwrap();
        prop_assert!((forgetting(&moved) - f).abs() <= 1e-9);
        prop_assert!((backward_transfer(&moved) - b).abs() <= 1e-9);
    }

    #[test]
    fn forgetting_is_minus_bwt_when_diagonal_is_column_min(
        rows in (2usize..=10).prop_flat_map(|t| {
            (0..t).map(|i| vec(1.0f64..100.0, i + 1)).collect::<Vec<_>>()
        }),
    ) {
        let mut m = rows;
        let t = m.len();
        for j in 0..t {
            let min = (j..t).map(|i| m[i][j]).fold(f64::INFINITY, f64::min);
            m[j][j] = min * 0.5;
        }
        let rm = ResultsMatrix::from_lower(m).unwrap();
        prop_assert_eq!(forgetting(&rm), -backward_transfer(&rm));
    }
}
