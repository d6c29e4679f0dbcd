//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use handoff_lab::harness::{compare_policies, HarnessConfig, PolicyKind};
use handoff_lab::hmm::{
    baum_welch, cross_validate, em_train, forward_filter, prediction_accuracy, EmConfig, HmmModel,
    LabeledTrace,
};
use handoff_lab::netsim::ChannelModel;
use handoff_lab::policies::{
    handoff_count, oracle_policy, reward, select_action, value_iteration, FiniteMdp, InterfaceId,
    JointSpace, QLearningConfig, QTable, RewardConfig, SelectMode,
};
use handoff_lab::probing::{rnl_update, ProbeConfig, RnlEstimator};
use handoff_lab::qoe::QoeState;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_model(rng: &mut ChaCha8Rng, n: usize) -> HmmModel {
    let prior: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| rng.random_range(0.05..1.0)).collect())
        .collect();
    let rows: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    let means: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let vars: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.5)).collect();
    HmmModel::from_parts(&prior, &rows, &means, &vars).unwrap()
}

fn em_monotonicity() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let generator = random_model(&mut rng, 3);
        let data = vec![generator.sample(&mut rng, 200).1];
        let init = random_model(&mut rng, 3);
        let (_, report) = baum_welch(init, &data, &EmConfig::default()).unwrap();
        for w in report.log_likelihood_per_iteration.windows(2) {
            worst = worst.max(w[0] - w[1]);
        }
    }
    outcome(
        worst <= 1e-9,
        format!("largest per-iteration decrease {worst:.3e}"),
    )
}

/// Filtered beliefs by summing the joint probability of every state path.
fn enumerate_beliefs(model: &HmmModel, obs: &[f64]) -> Vec<Vec<f64>> {
    let n = model.state_count();
    let tm = model.transitions();
    let em = model.emissions();
    (1..=obs.len())
        .map(|len| {
            let mut belief = vec![0.0; n];
            for code in 0..n.pow(len as u32) {
                let path: Vec<usize> = (0..len).map(|t| code / n.pow(t as u32) % n).collect();
                let mut p = model.prior()[path[0]] * em[path[0]].pdf(obs[0]);
                for t in 1..len {
                    p *= tm.get(path[t - 1], path[t]) * em[path[t]].pdf(obs[t]);
                }
                belief[path[len - 1]] += p;
            }
            let z: f64 = belief.iter().sum();
            belief.iter().map(|b| b / z).collect()
        })
        .collect()
}

fn filter_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut fixtures = 0;
    for n in 1..=3 {
        for len in 1..=6 {
            for _ in 0..25 {
                let model = random_model(&mut rng, n);
                let obs: Vec<f64> = (0..len).map(|_| rng.random_range(-2.5..2.5)).collect();
                let out = forward_filter(&model, &obs).unwrap();
                let oracle = enumerate_beliefs(&model, &obs);
                for (b, o) in out.beliefs.iter().zip(&oracle) {
                    for (x, y) in b.probs().iter().zip(o) {
                        worst = worst.max((x - y).abs());
                    }
                }
                fixtures += 1;
            }
        }
    }
    outcome(
        worst <= 1e-9,
        format!("{fixtures} fixtures, L-inf {worst:.3e}"),
    )
}

/// Transition counts along the true hidden paths, the best any estimator
/// could do with the states revealed.
fn counting_estimate(paths: &[Vec<QoeState>], n: usize) -> Vec<Vec<f64>> {
    let mut counts = vec![vec![0.0; n]; n];
    for p in paths {
        for w in p.windows(2) {
            counts[w[0].zero_based()][w[1].zero_based()] += 1.0;
        }
    }
    counts
        .into_iter()
        .map(|row| {
            let s: f64 = row.iter().sum();
            row.into_iter()
                .map(|c| if s > 0.0 { c / s } else { 0.0 })
                .collect()
        })
        .collect()
}

fn row_l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn parameter_recovery() -> Outcome {
    let truth = ChannelModel::wlan_congestion().generator;
    let true_rows = truth.transitions().rows().to_vec();
    let (mut both, mut means_ok, mut rows_ok, mut counting_ok) = (0, 0, 0, 0);
    let mut worst_row = 0.0f64;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (paths, seqs): (Vec<_>, Vec<_>) = (0..10).map(|_| truth.sample(&mut rng, 101)).unzip();
        let cfg = EmConfig {
            seed,
            ..EmConfig::default()
        };
        let (model, _) = em_train(&seqs, None, 3, &cfg).unwrap();
        let m_ok = model
            .means()
            .iter()
            .zip(truth.means())
            .all(|(m, t)| (m - t).abs() <= 0.10 * t.abs());
        let row_err = model
            .transitions()
            .rows()
            .iter()
            .zip(&true_rows)
            .map(|(a, b)| row_l1(a, b))
            .fold(0.0, f64::max);
        worst_row = worst_row.max(row_err);
        let r_ok = row_err <= 0.05;
        let counted = counting_estimate(&paths, 3);
        if counted
            .iter()
            .zip(&true_rows)
            .all(|(a, b)| row_l1(a, b) <= 0.05)
        {
            counting_ok += 1;
        }
        means_ok += usize::from(m_ok);
        rows_ok += usize::from(r_ok);
        both += usize::from(m_ok && r_ok);
    }
    outcome(
        both >= 9,
        format!(
            "{both}/10 seeds within both bounds (means {means_ok}/10, TM rows {rows_ok}/10, \
             worst row L1 {worst_row:.3}); counting on the true states meets the TM bound on \
             {counting_ok}/10"
        ),
    )
}

fn near_bayes() -> Outcome {
    let truth = ChannelModel::cdma().generator;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let data: Vec<LabeledTrace> = (0..20)
        .map(|_| {
            let (states, obs) = truth.sample(&mut rng, 101);
            LabeledTrace::new(obs, states).unwrap()
        })
        .collect();
    let cv = cross_validate(&data, 2, 3, &EmConfig::default(), 4).unwrap();
    let (c, s) = prediction_accuracy(&truth, &data).unwrap();
    let bayes = c as f64 / s as f64;
    let gap = (cv.accuracy - bayes).abs();
    outcome(
        gap <= 0.02,
        format!(
            "cross-validated {:.4}, Bayes predictor {bayes:.4}, gap {:.2} points",
            cv.accuracy,
            gap * 100.0
        ),
    )
}

fn rnl_golden() -> Outcome {
    // (Z, J, RNL) by hand, h = 5, c = 5, J_0 = D_1
    let golden = [
        (0.10, 0.0, 0.10),
        (0.12, 0.10, 0.62),
        (0.116, 0.10, 0.616),
        (0.1128, 0.08, 0.5128),
        (0.15024, 0.104, 0.67024),
    ];
    let mut est = RnlEstimator::new(5, 5.0).unwrap();
    let mut worst = 0.0f64;
    for (rtt, (z, j, rnl)) in [0.10, 0.20, 0.10, 0.10, 0.30].into_iter().zip(golden) {
        let (next, out) = rnl_update(est, rtt).unwrap();
        est = next;
        for (a, b) in [
            (est.smoothed_rtt(), z),
            (est.smoothed_jitter(), j),
            (out, rnl),
        ] {
            worst = worst.max((a - b).abs());
        }
    }
    let mut constant = RnlEstimator::new(5, 5.0).unwrap();
    let mut fixed_point = true;
    for n in 0..50 {
        let out = constant.update(0.1).unwrap();
        fixed_point &= n < 1 || out == 0.1;
    }
    let mut plain = RnlEstimator::new(5, 0.0).unwrap();
    let mut c_zero = true;
    for rtt in [0.3, 0.1, 0.7, 0.2, 0.25, 0.9] {
        let out = plain.update(rtt).unwrap();
        c_zero &= out == plain.smoothed_rtt();
    }
    outcome(
        worst <= 1e-12 && fixed_point && c_zero,
        format!(
            "golden error {worst:.1e}, constant fixed point {fixed_point}, c=0 is EWMA {c_zero}"
        ),
    )
}

fn reward_boundaries() -> Outcome {
    let base = RewardConfig {
        qoe_min: 1.0,
        qoe_max: 3.0,
        cost_min: 0.0,
        cost_max: 1.0,
        ..RewardConfig::default()
    };
    let mut exact = true;
    for w in [0.0, 0.3, 0.7, 1.0] {
        let cfg = RewardConfig {
            w_qoe: w,
            ..base.clone()
        };
        exact &= reward(3.0, 0.0, &cfg) == 1.0 && reward(5.0, -1.0, &cfg) == 1.0;
        exact &= reward(1.0, 1.0, &cfg) == 0.0 && reward(0.0, 4.0, &cfg) == 0.0;
    }
    let cfg = RewardConfig { w_qoe: 0.7, ..base };
    let mid = reward(2.0, 0.5, &cfg);
    outcome(
        exact && (mid - 0.5).abs() <= 1e-12,
        format!("clamps exact {exact}, midpoint {mid}"),
    )
}

/// Six states, two actions; rows `[s][a]`.
fn test_mdp() -> FiniteMdp {
    let t = vec![
        vec![
            vec![0.7, 0.2, 0.1, 0.0, 0.0, 0.0],
            vec![0.1, 0.0, 0.0, 0.6, 0.3, 0.0],
            vec![0.0, 0.5, 0.5, 0.0, 0.0, 0.0],
            vec![0.2, 0.0, 0.0, 0.0, 0.3, 0.5],
            vec![0.0, 0.0, 0.0, 0.1, 0.2, 0.7],
            vec![0.5, 0.0, 0.0, 0.0, 0.0, 0.5],
        ],
        vec![
            vec![0.0, 0.8, 0.0, 0.2, 0.0, 0.0],
            vec![0.3, 0.3, 0.4, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.1, 0.1, 0.8, 0.0],
            vec![0.0, 0.6, 0.0, 0.4, 0.0, 0.0],
            vec![0.4, 0.0, 0.3, 0.0, 0.0, 0.3],
            vec![0.0, 0.0, 0.2, 0.2, 0.2, 0.4],
        ],
    ];
    FiniteMdp::new(t, vec![0.0, 0.2, 0.5, 0.1, 0.8, 1.0]).unwrap()
}

fn q_vs_bellman() -> Outcome {
    let mdp = test_mdp();
    let cfg = QLearningConfig {
        gamma: 0.8,
        ..QLearningConfig::default()
    };
    let oracle = value_iteration(&mdp, cfg.gamma, 1e-10).unwrap();
    // any six-state, two-action table will do; the joint labels are unused
    let mut q = QTable::new(JointSpace::new(vec![3, 1]).unwrap());
    assert_eq!((q.states(), q.actions()), (6, 2));
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut s = 0usize;
    for _ in 0..100_000 {
        let mode = if rng.random::<f64>() < 0.5 {
            SelectMode::Explore
        } else {
            SelectMode::Exploit
        };
        let a = select_action(&q, &q.space().state(s), mode, &mut rng)
            .unwrap()
            .target
            .index();
        let u: f64 = rng.random();
        let row = mdp.row(s, a);
        let mut acc = 0.0;
        let next = row
            .iter()
            .position(|p| {
                acc += p;
                u < acc
            })
            .unwrap_or(row.len() - 1);
        q.update_indexed(s, a, mdp.reward(s), next, &cfg).unwrap();
        s = next;
    }
    let mut q_err = 0.0f64;
    let mut u_err = 0.0f64;
    for st in 0..6 {
        for a in 0..2 {
            q_err = q_err.max((q.get(st, a) - oracle.q_values[st][a]).abs());
        }
        u_err = u_err.max((oracle.utilities[st] - q.max_value(st)).abs());
    }
    outcome(
        q_err < 0.05 && u_err < 0.05,
        format!("max |Q - Q*| {q_err:.4}, max |U - max_a Q| {u_err:.4}"),
    )
}

fn handoff_reduction() -> Outcome {
    let report = compare_policies(&HarnessConfig::default()).unwrap().report;
    let get = |k| report.policy(k).unwrap();
    let (p, m4, naive) = (
        get(PolicyKind::Proposed),
        get(PolicyKind::M4),
        get(PolicyKind::Naive),
    );
    let pass = p.handoffs as f64 <= 0.60 * m4.handoffs as f64
        && p.handoffs as f64 <= 0.55 * naive.handoffs as f64
        && p.mean_mos >= naive.mean_mos - 0.1;
    outcome(
        pass,
        format!(
            "handoffs proposed {} / M4 {} / naive {}, MOS proposed {:.3} vs naive {:.3}",
            p.handoffs, m4.handoffs, naive.handoffs, p.mean_mos, naive.mean_mos
        ),
    )
}

fn oracle_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut mismatches = 0;
    for case in 0..200 {
        let len = 1 + case % 10;
        let states: Vec<Vec<QoeState>> = (0..2)
            .map(|_| {
                (0..len)
                    .map(|_| QoeState::new(rng.random_range(1..=3)))
                    .collect()
            })
            .collect();
        let initial = Some(InterfaceId::new(rng.random_range(0..2)));
        let plan = oracle_policy(&states, initial).unwrap();
        let allowed = |t: usize, i: usize| states[i][t] >= states[1 - i][t];
        let mut best = usize::MAX;
        for code in 0..(1usize << len) {
            let seq: Vec<InterfaceId> = (0..len).map(|t| InterfaceId::new(code >> t & 1)).collect();
            if seq.iter().enumerate().all(|(t, i)| allowed(t, i.index())) {
                best = best.min(handoff_count(&seq, initial));
            }
        }
        let plan_ok = plan.iter().enumerate().all(|(t, i)| allowed(t, i.index()));
        if !plan_ok || handoff_count(&plan, initial) != best {
            mismatches += 1;
        }
    }
    outcome(
        mismatches == 0,
        format!("{mismatches}/200 cases differ from exhaustive search"),
    )
}

fn run_compare(out: &Path) -> std::io::Result<std::process::ExitStatus> {
    Command::new(env!("CARGO_BIN_EXE_handoff-lab"))
        .args(["compare-policies", "--seed", "1", "--out"])
        .arg(out)
        .stdout(std::process::Stdio::null())
        .status()
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let ok = run_compare(&a).unwrap().success() && run_compare(&b).unwrap().success();
    if !ok {
        return outcome(false, "compare-policies failed");
    }
    let mut same = true;
    for f in ["report.json", "timeline.csv", "qtable.toml"] {
        same &= std::fs::read(a.join(f)).unwrap() == std::fs::read(b.join(f)).unwrap();
    }
    outcome(
        same,
        "report.json, timeline.csv and qtable.toml compared byte for byte",
    )
}

fn probe_overhead() -> Outcome {
    let bps = ProbeConfig::default().overhead_bps();
    outcome(bps == 960, format!("{bps} bps"))
}

fn main() {
    type Criterion = (&'static str, Option<Duration>, fn() -> Outcome);
    let secs = |s| Some(Duration::from_secs(s));
    let criteria: [Criterion; 11] = [
        ("EM monotonicity", secs(30), em_monotonicity),
        ("forward filter vs path enumeration", secs(5), filter_oracle),
        ("parameter recovery", secs(20), parameter_recovery),
        ("prediction near Bayes", secs(20), near_bayes),
        ("RNL golden recursion", None, rnl_golden),
        ("reward boundaries", None, reward_boundaries),
        ("Q-learning vs value iteration", secs(30), q_vs_bellman),
        ("handoff reduction", secs(60), handoff_reduction),
        ("oracle policy optimality", secs(10), oracle_optimality),
        ("end-to-end determinism", None, determinism),
        ("probe overhead", None, probe_overhead),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut o = check();
        let took = start.elapsed();
        if let Some(b) = budget {
            if took > *b {
                o.pass = false;
                o.detail += &format!("; over the {}s budget", b.as_secs());
            }
        }
        failed += usize::from(!o.pass);
        println!(
            "{} {:>2} {name} ({:.2}s): {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            took.as_secs_f64(),
            o.detail
        );
    }
    println!(
        "{}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
