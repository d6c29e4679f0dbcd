//! Write simulated traces to CSV and read them back.

use handoff_lab::netsim::{generate_run, ScenarioConfig};
use handoff_lab::probing::ProbeConfig;
use handoff_lab::trace_io::{read_traces, write_traces};

fn main() -> handoff_lab::Result<()> {
    let mut scenario = ScenarioConfig::roaming();
    scenario.duration_epochs = 5;
    let traces: Vec<_> = (0..2)
        .map(|i| generate_run(&scenario, &ProbeConfig::default(), i).map(|r| r.traces))
        .collect::<Result<Vec<_>, _>>()?
        .concat();
    let mut buf = Vec::new();
    write_traces(&traces, &mut buf)?;
    print!("{}", String::from_utf8_lossy(&buf));
    let back = read_traces(&buf[..])?;
    let mut again = Vec::new();
    write_traces(&back, &mut again)?;
    println!(
        "{} traces read back, rewrite identical: {}",
        back.len(),
        again == buf
    );
    Ok(())
}
