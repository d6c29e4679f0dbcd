use proptest::prelude::*;

use handoff_lab::hmm::{forward_filter, predict_next_state, BeliefState, HmmModel};
use handoff_lab::policies::{
    decide_handoff, handoff_count, oracle_policy, reward, select_action, Action, HysteresisConfig,
    InterfaceId, JointSpace, QTable, RewardConfig, SelectMode,
};
use handoff_lab::probing::{rnl_update, RnlEstimator};
use handoff_lab::qoe::{mos_from_delay, Codec, MosScore, QoeState, QuantizationScheme};
use handoff_lab::trace_io::{read_traces, write_traces, DelayTrace, TraceSample};

fn codec() -> impl Strategy<Value = Codec> {
    prop_oneof![Just(Codec::G711), Just(Codec::G729)]
}

fn stochastic(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, n).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

fn model(n: usize) -> impl Strategy<Value = HmmModel> {
    (
        stochastic(n),
        prop::collection::vec(stochastic(n), n),
        prop::collection::vec(-3.0f64..3.0, n),
        prop::collection::vec(0.05f64..2.0, n),
    )
        .prop_map(|(prior, rows, means, vars)| {
            let rows: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
            HmmModel::from_parts(&prior, &rows, &means, &vars).unwrap()
        })
}

fn qoe_path(len: usize) -> impl Strategy<Value = Vec<QoeState>> {
    prop::collection::vec((1usize..=3).prop_map(QoeState::new), len)
}

proptest! {
    #[test]
    fn mos_bounded_and_monotone(
        d in 0.0f64..3.0, dd in 0.0f64..1.0, l in 0.0f64..1.0, dl in 0.0f64..0.5, c in codec()
    ) {
        let p = c.profile();
        let base = mos_from_delay(d, l, &p).unwrap().value();
        prop_assert!((1.0..=5.0).contains(&base));
        prop_assert!(mos_from_delay(d + dd, l, &p).unwrap().value() <= base + 1e-12);
        let worse_loss = (l + dl).min(1.0);
        prop_assert!(mos_from_delay(d, worse_loss, &p).unwrap().value() <= base + 1e-12);
    }

    #[test]
    fn quantization_is_monotone(a in 1.0f64..5.0, b in 1.0f64..5.0) {
        for s in [QuantizationScheme::congestion(), QuantizationScheme::roaming(), QuantizationScheme::five_band()] {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(s.quantize(MosScore::new(lo)) <= s.quantize(MosScore::new(hi)));
        }
    }

    #[test]
    fn beliefs_are_distributions(m in model(3), obs in prop::collection::vec(-4.0f64..4.0, 1..40)) {
        let out = forward_filter(&m, &obs).unwrap();
        prop_assert_eq!(out.beliefs.len(), obs.len());
        for b in &out.beliefs {
            let s: f64 = b.probs().iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-9);
            prop_assert!(b.probs().iter().all(|p| *p >= 0.0));
        }
    }

    #[test]
    fn identity_transitions_predict_the_map_state(belief in stochastic(3)) {
        let m = HmmModel::from_parts(
            &[1.0, 1.0, 1.0],
            &[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]],
            &[2.0, 1.0, 0.0],
            &[0.1, 0.1, 0.1],
        ).unwrap();
        let b = BeliefState::new(belief).unwrap();
        prop_assert_eq!(predict_next_state(&m, &b).0, b.map_state());
    }

    #[test]
    fn reward_in_unit_interval_and_monotone(
        w in 0.0f64..=1.0, q in 0.0f64..4.0, dq in 0.0f64..2.0, c in -0.5f64..1.5, dc in 0.0f64..1.0
    ) {
        let cfg = RewardConfig { w_qoe: w, ..RewardConfig::default() };
        let r = reward(q, c, &cfg);
        prop_assert!((0.0..=1.0).contains(&r));
        prop_assert!(reward(q + dq, c, &cfg) >= r - 1e-12);
        prop_assert!(reward(q, c + dc, &cfg) <= r + 1e-12);
    }

    #[test]
    fn exploit_invariant_under_positive_affine_maps(
        row in prop::collection::vec(-5.0f64..5.0, 2), scale in 0.1f64..10.0, shift in -5.0f64..5.0
    ) {
        let space = JointSpace::new(vec![2, 2]).unwrap();
        let state = space.state(3);
        let mut q = QTable::new(space.clone());
        let mut moved = QTable::new(space);
        for (a, v) in row.iter().enumerate() {
            q.set(3, a, *v).unwrap();
            moved.set(3, a, scale * v + shift).unwrap();
        }
        let mut rng = rand::rng();
        prop_assert_eq!(
            select_action(&q, &state, SelectMode::Exploit, &mut rng).unwrap(),
            select_action(&moved, &state, SelectMode::Exploit, &mut rng).unwrap()
        );
    }

    #[test]
    fn dwell_separates_switches(
        proposals in prop::collection::vec((0usize..3, -1.0f64..1.0), 1..80),
        dwell in 0u64..6,
        margin in 0.0f64..0.5,
    ) {
        let hys = HysteresisConfig { margin, dwell_epochs: dwell };
        let mut current = InterfaceId::new(0);
        let mut since = u64::MAX;
        let mut switch_epochs = Vec::new();
        for (t, (target, gain)) in proposals.into_iter().enumerate() {
            let a = decide_handoff(Action::select(target), current, gain, &hys, since);
            if a.target != current {
                switch_epochs.push(t as u64);
                since = 0;
            }
            current = a.target;
            since = since.saturating_add(1);
        }
        for w in switch_epochs.windows(2) {
            prop_assert!(w[1] - w[0] >= dwell.max(1));
        }
    }

    #[test]
    fn rnl_shift_equivariance(rtts in prop::collection::vec(0.01f64..1.0, 2..30), delta in 0.0f64..0.5) {
        let mut a = RnlEstimator::default();
        let mut b = RnlEstimator::default();
        for r in &rtts {
            a.update(*r).unwrap();
            b.update(r + delta).unwrap();
            prop_assert!((b.smoothed_rtt() - a.smoothed_rtt() - delta).abs() <= 1e-9);
            prop_assert!((b.smoothed_jitter() - a.smoothed_jitter()).abs() <= 1e-9);
        }
    }

    #[test]
    fn rnl_unit_window_is_instantaneous(rtts in prop::collection::vec(0.01f64..1.0, 2..30)) {
        let mut est = RnlEstimator::new(1, 5.0).unwrap();
        est.update(rtts[0]).unwrap();
        for w in rtts.windows(2) {
            est.update(w[1]).unwrap();
            prop_assert!((est.smoothed_rtt() - w[1]).abs() <= 1e-15);
            prop_assert!((est.smoothed_jitter() - (w[1] - w[0]).abs()).abs() <= 1e-15);
        }
    }

    #[test]
    fn rnl_fold_equals_stateful_updates(rtts in prop::collection::vec(0.01f64..1.0, 1..30)) {
        let mut stateful = RnlEstimator::default();
        let mut folded = RnlEstimator::default();
        for r in &rtts {
            let x = stateful.update(*r).unwrap();
            let (next, y) = rnl_update(folded, *r).unwrap();
            folded = next;
            prop_assert_eq!(x, y);
        }
        prop_assert_eq!(stateful, folded);
    }

    #[test]
    fn joint_index_is_a_bijection(counts in prop::collection::vec(1usize..4, 1..4)) {
        let space = JointSpace::new(counts).unwrap();
        for i in 0..space.len() {
            prop_assert_eq!(space.index(&space.state(i)).unwrap(), i);
        }
    }

    #[test]
    fn oracle_plan_follows_the_best_interface(
        (a, b) in (1usize..30).prop_flat_map(|n| (qoe_path(n), qoe_path(n))),
        start in prop::option::of(0usize..2),
    ) {
        let initial = start.map(InterfaceId::new);
        let states = vec![a, b];
        let plan = oracle_policy(&states, initial).unwrap();
        for (t, i) in plan.iter().enumerate() {
            prop_assert!(states[i.index()][t] >= states[1 - i.index()][t]);
        }
        // never worse than following the greedy argmax with ties kept
        let mut greedy = Vec::new();
        let mut cur = initial.unwrap_or(InterfaceId::new(0));
        for t in 0..states[0].len() {
            let other = 1 - cur.index();
            if states[other][t] > states[cur.index()][t] {
                cur = InterfaceId::new(other);
            }
            greedy.push(cur);
        }
        prop_assert!(handoff_count(&plan, initial) <= handoff_count(&greedy, initial));
    }

    #[test]
    fn traces_round_trip(
        traces in prop::collection::vec(
            (0usize..4, 0usize..2, prop::collection::vec((0.001f64..2.0, prop::option::of(1.0f64..5.0)), 1..20)),
            0..6,
        )
    ) {
        let mut set: Vec<DelayTrace> = Vec::new();
        for (run, iface, samples) in traces {
            let key = (format!("run{run:03}"), ["WLAN", "CDMA2000"][iface].to_string());
            if set.iter().any(|t| (t.run_id.clone(), t.interface.clone()) == key) {
                continue;
            }
            let mut t = DelayTrace::new(key.0, key.1);
            t.samples = samples
                .into_iter()
                .enumerate()
                .map(|(e, (rtt_s, mos))| TraceSample { epoch: e as u64, rtt_s, mos })
                .collect();
            set.push(t);
        }
        let mut first = Vec::new();
        write_traces(&set, &mut first).unwrap();
        let back = read_traces(&first[..]).unwrap();
        prop_assert_eq!(back.len(), set.len());
        for t in &back {
            let orig = set.iter().find(|o| o.run_id == t.run_id && o.interface == t.interface).unwrap();
            for (x, y) in t.samples.iter().zip(&orig.samples) {
                prop_assert!((x.rtt_s - y.rtt_s).abs() <= 1e-8 * y.rtt_s.abs());
            }
        }
        let mut second = Vec::new();
        write_traces(&back, &mut second).unwrap();
        prop_assert_eq!(first, second);
    }
}
