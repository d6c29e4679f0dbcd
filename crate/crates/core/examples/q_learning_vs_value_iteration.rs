//! Tabular Q-learning on a small random MDP against exact value iteration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use handoff_lab::policies::{
    select_action, value_iteration, FiniteMdp, JointSpace, QLearningConfig, QTable, SelectMode,
};

fn random_row(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

fn main() -> handoff_lab::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let transitions = (0..2)
        .map(|_| (0..6).map(|_| random_row(&mut rng, 6)).collect())
        .collect();
    let rewards = (0..6).map(|_| rng.random_range(0.0..1.0)).collect();
    let mdp = FiniteMdp::new(transitions, rewards)?;
    let cfg = QLearningConfig {
        gamma: 0.8,
        ..QLearningConfig::default()
    };
    let exact = value_iteration(&mdp, cfg.gamma, 1e-10)?;

    // six joint states, two actions
    let mut q = QTable::new(JointSpace::new(vec![3, 1])?);
    let mut s = 0;
    for _ in 0..100_000 {
        let mode = if rng.random::<f64>() < 0.5 {
            SelectMode::Explore
        } else {
            SelectMode::Exploit
        };
        let a = select_action(&q, &q.space().state(s), mode, &mut rng)?
            .target
            .index();
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let row = mdp.row(s, a);
        let next = row
            .iter()
            .position(|p| {
                acc += p;
                u < acc
            })
            .unwrap_or(row.len() - 1);
        q.update_indexed(s, a, mdp.reward(s), next, &cfg)?;
        s = next;
    }
    println!("state  U*      max Q   pi*  greedy");
    for st in 0..6 {
        let greedy = if q.get(st, 1) > q.get(st, 0) { 1 } else { 0 };
        println!(
            "{st:>5}  {:.4}  {:.4}  {:>3}  {greedy:>6}",
            exact.utilities[st],
            q.max_value(st),
            exact.policy[st]
        );
    }
    Ok(())
}
