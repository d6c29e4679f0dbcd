//! Smoothed RTT, jitter and relative network load over a step in delay.

use handoff_lab::probing::RnlEstimator;

fn main() -> handoff_lab::Result<()> {
    let mut est = RnlEstimator::new(5, 5.0)?;
    let rtts = [
        0.10, 0.10, 0.11, 0.09, 0.10, 0.30, 0.32, 0.29, 0.31, 0.30, 0.10, 0.10,
    ];
    println!("epoch  rtt    srtt    jitter  rnl");
    for (t, r) in rtts.iter().enumerate() {
        est.update(*r)?;
        let rnl = est.rnl().map_or("-".to_string(), |v| format!("{v:.4}"));
        println!(
            "{t:>5}  {r:.2}  {:.4}  {:.4}  {rnl}",
            est.smoothed_rtt(),
            est.smoothed_jitter()
        );
    }
    Ok(())
}
