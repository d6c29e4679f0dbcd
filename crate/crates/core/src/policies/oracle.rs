use super::InterfaceId;
use crate::error::{Error, Result};
use crate::qoe::QoeState;

/// Number of epochs on which the attached interface differs from the one
/// before it. `initial` is the attachment before the first epoch; `None`
/// makes the first choice free.
pub fn handoff_count(sequence: &[InterfaceId], initial: Option<InterfaceId>) -> usize {
    let mut prev = initial;
    let mut n = 0;
    for &i in sequence {
        if prev.is_some_and(|p| p != i) {
            n += 1;
        }
        prev = Some(i);
    }
    n
}

/// Offline best case: stays on an interface with the highest QoE state at
/// every epoch while switching as little as possible.
///
/// Dynamic programming over (epoch, interface) with unit cost per switch.
/// Among optimal paths the reconstruction prefers not switching, then the
/// lowest interface index.
pub fn oracle_policy(
    states_per_interface: &[Vec<QoeState>],
    initial: Option<InterfaceId>,
) -> Result<Vec<InterfaceId>> {
    let n = states_per_interface.len();
    if n == 0 {
        return Err(Error::domain("oracle needs at least one interface"));
    }
    let len = states_per_interface[0].len();
    if states_per_interface.iter().any(|s| s.len() != len) {
        return Err(Error::domain("per-interface traces differ in length"));
    }
    if let Some(i) = initial.filter(|i| i.index() >= n) {
        return Err(Error::domain(format!("initial interface {i} out of range")));
    }
    if len == 0 {
        return Ok(Vec::new());
    }
    let allowed: Vec<Vec<bool>> = (0..len)
        .map(|t| {
            let best = (0..n)
                .map(|i| states_per_interface[i][t])
                .max()
                .unwrap_or(QoeState::new(1));
            (0..n).map(|i| states_per_interface[i][t] == best).collect()
        })
        .collect();

    const INF: usize = usize::MAX / 2;
    let mut cost = vec![vec![INF; n]; len];
    let mut back = vec![vec![0usize; n]; len];
    for i in 0..n {
        if allowed[0][i] {
            cost[0][i] = match initial {
                Some(init) if init.index() != i => 1,
                _ => 0,
            };
        }
    }
    for t in 1..len {
        for i in 0..n {
            if !allowed[t][i] {
                continue;
            }
            let mut best = (INF, i);
            for j in 0..n {
                let c = cost[t - 1][j].saturating_add(usize::from(i != j));
                if c < best.0 || (c == best.0 && j == i) {
                    best = (c, j);
                }
            }
            cost[t][i] = best.0;
            back[t][i] = best.1;
        }
    }
    let last = &cost[len - 1];
    let min = *last.iter().min().unwrap_or(&INF);
    let mut i = last.iter().position(|c| *c == min).unwrap_or(0);
    let mut path = vec![InterfaceId::new(0); len];
    for t in (0..len).rev() {
        path[t] = InterfaceId::new(i);
        if t > 0 {
            i = back[t][i];
        }
    }
    Ok(path)
}
