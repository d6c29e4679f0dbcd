//! Best, Naive, M4 and the learned policy on a shortened roaming scenario.

use handoff_lab::harness::{compare_policies, format_percent, HarnessConfig, PolicyKind};

fn main() -> handoff_lab::Result<()> {
    let mut cfg = HarnessConfig::default();
    cfg.scenario.runs = 6;
    let c = compare_policies(&cfg)?;
    for p in &c.report.policies {
        println!(
            "{:<9} handoffs {:>4}  mean MOS {:.3}",
            p.policy.name(),
            p.handoffs,
            p.mean_mos
        );
    }
    for a in &c.report.prediction_accuracy {
        println!("{} prediction accuracy {:.3}", a.interface, a.accuracy);
    }
    for b in [PolicyKind::Naive, PolicyKind::M4] {
        println!(
            "reduction vs {}: {}",
            b.name(),
            format_percent(c.report.reduction(b))
        );
    }
    Ok(())
}
