use std::collections::BTreeSet;

use handoff_lab::harness::{cmd_simulate, HarnessConfig};
use handoff_lab::trace_io::{load_traces, save_traces};

#[test]
fn roaming_batch_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = HarnessConfig::default();
    cfg.scenario.runs = 12;
    cfg.scenario.duration_epochs = 101;
    cfg.output_dir = dir.path().to_path_buf();

    let summary = cmd_simulate(&cfg, &mut std::io::sink()).unwrap();
    assert_eq!(summary.rows, 12 * 2 * 101);
    assert_eq!(summary.mean_mos.len(), 2);

    let traces = load_traces(&summary.path).unwrap();
    assert_eq!(traces.len(), 24);
    assert!(traces.iter().all(|t| t.len() == 101));
    let keys: BTreeSet<_> = traces
        .iter()
        .map(|t| (t.run_id.clone(), t.interface.clone()))
        .collect();
    assert_eq!(keys.len(), 24);
    for t in &traces {
        assert!(t
            .samples
            .iter()
            .enumerate()
            .all(|(e, s)| s.epoch == e as u64));
        assert!(t.samples.iter().all(|s| s.rtt_s > 0.0 && s.mos.is_some()));
    }

    let copy = dir.path().join("copy.csv");
    save_traces(&copy, &traces).unwrap();
    assert_eq!(
        std::fs::read(&copy).unwrap(),
        std::fs::read(&summary.path).unwrap()
    );
    assert_eq!(load_traces(&copy).unwrap(), traces);
}
