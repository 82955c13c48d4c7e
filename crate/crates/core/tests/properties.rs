//! Property tests for the invariants of each module.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use num_complex::Complex64 as C;
use proptest::prelude::*;
use qrl_core::agents::{EpsilonSchedule, ReplayBuffer};
use qrl_core::ansatz::{build, estimate, softmax, AnsatzInput, AnsatzKind, ExecConfig, GraphInput};
use qrl_core::envs::{
    approximation_ratio, tsp_generate_instance, tsp_optimal_tour, tsp_step, TspEpisodeState,
};
use qrl_core::gradients::{gradient, hessian, ScalarCircuitFunction};
use qrl_core::harness::{aggregate, ExperimentConfig};
use qrl_core::noise::{sample_perturbation, HardwareNoise, NoiseConfig};
use qrl_core::qsim::{
    run_trajectory, sample_expectation, trajectory_estimates, Circuit, Gate, Observable, Pauli, StateVector,
    TrajectoryReadout,
};
use qrl_core::shots::{allocate_shots, gap_threshold, ShotAllocConfig};
use qrl_core::RngStream;

fn gate_strategy(n: usize) -> impl Strategy<Value = Gate> {
    let q = 0..n;
    let angle = -TAU..TAU;
    (0..7usize, q.clone(), q, angle).prop_map(move |(kind, a, b, t)| {
        let b = if a == b { (a + 1) % n } else { b };
        match kind {
            0 => Gate::Rx { qubit: a, angle: t },
            1 => Gate::Ry { qubit: a, angle: t },
            2 => Gate::Rz { qubit: a, angle: t },
            3 => Gate::Cz { a, b },
            4 => Gate::Cnot { control: a, target: b },
            5 => Gate::Zz { a, b, angle: t },
            _ => Gate::X { qubit: a },
        }
    })
}

fn circuit_strategy() -> impl Strategy<Value = Circuit> {
    (2usize..=6).prop_flat_map(|n| {
        prop::collection::vec(gate_strategy(n), 1..40).prop_map(move |gates| {
            let mut c = Circuit::new(n).unwrap();
            for g in gates {
                c.push(g).unwrap();
            }
            c
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unitary_circuits_preserve_norm(c in circuit_strategy()) {
        let s = c.simulate().unwrap();
        prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn trajectories_stay_normalised(c in circuit_strategy(), seed in any::<u64>()) {
        let noise = NoiseConfig::CustomHardware(HardwareNoise {
            depol_1q: 0.05,
            depol_2q: 0.1,
            amp_damp: 0.2,
            meas_bitflip: 0.0,
        });
        let s = run_trajectory(&c, &noise, &mut RngStream::new(seed, 0)).unwrap();
        prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn trajectory_estimates_repeat_for_a_seed(c in circuit_strategy(), seed in any::<u64>()) {
        let ch = NoiseConfig::Depolarizing { p: 0.05 }.parts().channel;
        let o = Observable::z(0);
        let run = || trajectory_estimates(&c, &[&o], ch.as_ref(), 50, TrajectoryReadout::Shots(3), &mut RngStream::new(seed, 9)).unwrap();
        let (a, b) = (run(), run());
        prop_assert_eq!(a[0].mean.to_bits(), b[0].mean.to_bits());
        prop_assert_eq!(a[0].stderr.to_bits(), b[0].stderr.to_bits());
    }

    #[test]
    fn expectation_ignores_global_phase(c in circuit_strategy(), phi in 0.0..TAU) {
        let s = c.simulate().unwrap();
        let rotated = StateVector::from_amplitudes(
            s.amplitudes().iter().map(|a| a * C::from_polar(1.0, phi)).collect(),
        ).unwrap();
        let o = Observable::pauli(0.7, &[(0, Pauli::X), (1, Pauli::Y)]).unwrap();
        prop_assert!((s.expectation(&o) - rotated.expectation(&o)).abs() < 1e-12);
    }

    #[test]
    fn softmax_is_a_distribution(x in prop::collection::vec(-5.0..5.0f64, 2..8), beta in 0.0..20.0f64) {
        let p = softmax(&x, beta);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn epsilon_schedule_is_monotone_and_floored(start in 0.1..1.0f64, end_frac in 0.0..1.0f64, decay in 0.5..1.0f64, t in 0u64..5000) {
        let s = EpsilonSchedule { start, end: start * end_frac, decay };
        let e = s.value(t);
        prop_assert!(s.value(t + 1) <= e);
        prop_assert!(e >= s.end);
        prop_assert!((e - (start * decay.powf(t as f64)).max(s.end)).abs() < 1e-15);
    }

    #[test]
    fn replay_evicts_oldest_and_samples_without_replacement(cap in 1usize..50, pushes in 1usize..200, seed in any::<u64>()) {
        let mut buf = ReplayBuffer::new(cap).unwrap();
        for k in 0..pushes {
            buf.push(k);
        }
        let kept = pushes.min(cap);
        prop_assert_eq!(buf.len(), kept);
        let mut held: Vec<usize> = (0..buf.len()).map(|i| *buf.get(i).unwrap()).collect();
        held.sort_unstable();
        prop_assert_eq!(held, ((pushes - kept)..pushes).collect::<Vec<_>>());
        let batch = buf.sample(kept, &mut RngStream::new(seed, 0)).unwrap();
        let mut seen: Vec<usize> = batch.into_iter().copied().collect();
        seen.sort_unstable();
        seen.dedup();
        prop_assert_eq!(seen.len(), kept);
    }

    #[test]
    fn allocation_stays_in_range_and_stops_on_the_test(gap in 0.0..1.0f64, noise in 0.0..2.0f64, seed in any::<u64>()) {
        let cfg = ShotAllocConfig::new(100, 100, 2000).unwrap();
        let mut r = RngStream::new(seed, 0);
        let a = allocate_shots(|m| Ok(vec![gap + noise * r.normal() / (m as f64).sqrt(), noise * r.normal() / (m as f64).sqrt()]), &cfg).unwrap();
        prop_assert!(a.shots >= cfg.m_init && a.shots <= cfg.m_max);
        let &(m, g) = a.history.last().unwrap();
        prop_assert_eq!(m, a.shots);
        prop_assert!(g >= gap_threshold(m) || m == cfg.m_max);
        // escalation is monotone
        prop_assert!(a.history.windows(2).all(|w| w[1].0 > w[0].0));
    }

    #[test]
    fn tsp_rewards_telescope_and_ratios_are_at_least_one(n in 4usize..=7, seed in any::<u64>(), order_seed in any::<u64>()) {
        let inst = Arc::new(tsp_generate_instance(n, &mut RngStream::new(seed, 0)).unwrap());
        let (_, best) = tsp_optimal_tour(&inst).unwrap();
        let mut ep = TspEpisodeState::new(inst.clone());
        let mut r = RngStream::new(order_seed, 0);
        let mut total = 0.0;
        while !ep.is_done() {
            let avail: Vec<usize> = (0..n).filter(|&c| ep.is_available(c)).collect();
            let t = tsp_step(&ep, avail[r.below(avail.len())]).unwrap();
            total += t.reward;
            ep = t.next_state;
        }
        prop_assert!((-total - inst.tour_length(ep.tour())).abs() < 1e-9);
        prop_assert!(approximation_ratio(-total, best).unwrap() >= 1.0 - 1e-12);
    }

    #[test]
    fn perturbations_cover_only_trainable_angles(m in 1usize..200, sigma in 0.0..1.0f64, seed in any::<u64>()) {
        let d = sample_perturbation(m, sigma, &mut RngStream::new(seed, 0));
        prop_assert_eq!(d.delta_theta.len(), m);
        if sigma == 0.0 {
            prop_assert!(d.delta_theta.iter().all(|&v| v == 0.0));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn parameter_counts_match_gate_enumeration(n in 2usize..=6, layers in 1usize..=6) {
        // per layer: two rotations and one input scaling per qubit
        prop_assert_eq!(build(AnsatzKind::HweQ, n, layers).unwrap().n_params(), 3 * n * layers);
        // per layer: three rotations and one input scaling per qubit, then a final rotation layer
        prop_assert_eq!(build(AnsatzKind::HwePg, n, layers).unwrap().n_params(), 4 * n * layers + 3 * n);
        // one shared weight on the edge term and one on the node term per layer
        prop_assert_eq!(build(AnsatzKind::Eqc, n.max(3), layers).unwrap().n_params(), 2 * layers);
    }

    #[test]
    fn derivatives_bounded_by_observable_norm_and_pi_shift_symmetric(seed in any::<u64>()) {
        let spec = build(AnsatzKind::HwePg, 3, 2).unwrap();
        let mut r = RngStream::new(seed, 0);
        // unit-magnitude features keep every parameter at unit frequency
        let input = AnsatzInput::Features((0..3).map(|_| if r.bernoulli(0.5) { 1.0 } else { -1.0 }).collect());
        let obs = Observable::z_string(&[0, 1, 2]);
        let f = ScalarCircuitFunction::new(&spec, input, obs, ExecConfig::exact()).unwrap();
        let theta: Vec<f64> = (0..spec.n_params()).map(|_| r.uniform() * TAU).collect();
        let g = gradient(&f, &theta, &mut r).unwrap();
        let h = hessian(&f, &theta, &mut r).unwrap().matrix;
        prop_assert!(g.iter().all(|v| v.abs() <= 1.0 + 1e-12));
        prop_assert!(h.iter().all(|v| v.abs() <= 1.0 + 1e-12));
        for i in 0..theta.len() {
            let mut p = theta.clone();
            p[i] += PI;
            let mut q = theta.clone();
            q[i] -= PI;
            let (a, b) = (f.eval(&p, &mut r).unwrap(), f.eval(&q, &mut r).unwrap());
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn shot_average_matches_expectation(c in circuit_strategy(), seed in any::<u64>()) {
        let s = c.simulate().unwrap();
        let o = Observable::z(0);
        let exact = s.expectation(&o);
        let reps = 10_000;
        let mut r = RngStream::new(seed, 0);
        let vals: Vec<f64> = (0..reps).map(|_| sample_expectation(&s, &o, 10, &mut r).unwrap()).collect();
        let mean = vals.iter().sum::<f64>() / reps as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps as f64 - 1.0);
        let se = (var / reps as f64).sqrt();
        // a deterministic outcome has zero spread and must match exactly
        prop_assert!((mean - exact).abs() <= 4.0 * se + 1e-12);
    }

    #[test]
    fn eqc_is_equivariant_under_node_relabelling(seed in any::<u64>()) {
        let n = 5;
        let spec = build(AnsatzKind::Eqc, n, 2).unwrap();
        let mut r = RngStream::new(seed, 0);
        let inst = tsp_generate_instance(n, &mut r).unwrap();
        let theta: Vec<f64> = (0..spec.n_params()).map(|_| r.uniform_range(-2.0, 2.0)).collect();
        let mut alpha = vec![PI; n];
        alpha[0] = 0.0;
        alpha[2] = 0.0;
        let input = GraphInput { n, weights: inst.weights().to_vec(), alpha: alpha.clone(), current: 2 };
        // random relabelling `perm[old] = new`
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, r.below(i + 1));
        }
        let mut w = vec![0.0; n * n];
        let mut a2 = vec![0.0; n];
        for i in 0..n {
            a2[perm[i]] = alpha[i];
            for j in 0..n {
                w[perm[i] * n + perm[j]] = inst.weight(i, j);
            }
        }
        let relabelled = GraphInput { n, weights: w, alpha: a2, current: perm[2] };
        let (x, y) = (AnsatzInput::Graph(input), AnsatzInput::Graph(relabelled));
        let acts = spec.actions(&x);
        let moved: Vec<usize> = acts.iter().map(|&a| perm[a]).collect();
        let ox = spec.observables(&x, &acts);
        let oy = spec.observables(&y, &moved);
        let ex = estimate(&spec, &theta, &x, &ox, &ExecConfig::exact(), &mut r).unwrap().values;
        let ey = estimate(&spec, &theta, &y, &oy, &ExecConfig::exact(), &mut r).unwrap().values;
        for (a, b) in ex.iter().zip(&ey) {
            prop_assert!((a - b).abs() < 1e-10, "{ex:?} vs {ey:?}");
        }
    }
}

fn write_log(dir: &std::path::Path, metrics: &[f64]) {
    std::fs::create_dir_all(dir).unwrap();
    let mut text = String::from("episode,metric,total_return,steps,epsilon,shots_reads,shots_executions\n");
    for (k, m) in metrics.iter().enumerate() {
        text.push_str(&format!("{k},{m},{m},{},1,0,0\n", *m as u64));
    }
    std::fs::write(dir.join("episodes.csv"), text).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn aggregating_identical_logs_has_zero_spread(metrics in prop::collection::vec(1.0..200.0f64, 1..150), k in 1usize..5) {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::preset("cartpole_q").unwrap();
        std::fs::write(tmp.path().join("config.toml"), cfg.to_toml_string().unwrap()).unwrap();
        for s in 0..k {
            write_log(&tmp.path().join(format!("seed_{s}")), &metrics);
        }
        let summary = aggregate(tmp.path()).unwrap();
        prop_assert_eq!(summary.runs.len(), k);
        prop_assert_eq!(summary.curves.len(), metrics.len());
        for (row, m) in summary.curves.iter().zip(&metrics) {
            prop_assert_eq!(row.n_runs, k);
            prop_assert!((row.mean - m).abs() < 1e-9);
            prop_assert!(row.std.abs() < 1e-9);
        }
    }

    #[test]
    fn config_hash_tracks_semantics_not_layout(episodes in 1u64..10_000, gamma in 0.5..0.999f64) {
        let a = format!("episodes = {episodes}\n[q]\ngamma = {gamma}\nbatch_size = 8\n");
        let b = format!("[q]\nbatch_size = 8\ngamma = {gamma}\n\n[ansatz]\nlayers = 5\n");
        let b = format!("episodes = {episodes}\n{b}");
        let ha = ExperimentConfig::from_toml_str(&a).unwrap().hash().unwrap();
        let hb = ExperimentConfig::from_toml_str(&b).unwrap().hash().unwrap();
        prop_assert_eq!(&ha, &hb);
        let c = format!("episodes = {}\n[q]\ngamma = {gamma}\nbatch_size = 8\n", episodes + 1);
        prop_assert_ne!(ha, ExperimentConfig::from_toml_str(&c).unwrap().hash().unwrap());
    }
}
