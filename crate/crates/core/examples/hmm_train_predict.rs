//! Fit a three-state HMM to simulated congestion traces, then score
//! one-step QoE-state predictions on held-out runs.

use handoff_lab::hmm::{cross_validate, em_train, prediction_accuracy, EmConfig, LabeledTrace};
use handoff_lab::netsim::{generate_run, ScenarioConfig};
use handoff_lab::probing::ProbeConfig;

fn main() -> handoff_lab::Result<()> {
    let mut scenario = ScenarioConfig::wlan_congestion();
    scenario.duration_epochs = 300;
    let probe = ProbeConfig::default();
    let data: Vec<LabeledTrace> = (0..20)
        .map(|i| {
            let run = generate_run(&scenario, &probe, i)?;
            LabeledTrace::new(run.traces[0].rtts(), run.true_states[0].clone())
        })
        .collect::<Result<_, _>>()?;

    let em = EmConfig::default();
    let (train, test) = data.split_at(15);
    let obs: Vec<Vec<f64>> = train.iter().map(|d| d.observations.clone()).collect();
    let labels: Vec<_> = train.iter().map(|d| d.labels.clone()).collect();
    let (model, report) = em_train(&obs, Some(&labels), 3, &em)?;
    println!(
        "log-likelihood {:.2} after {} iterations",
        report.final_log_likelihood(),
        report.iterations
    );
    for (i, e) in model.emissions().iter().enumerate() {
        println!(
            "state {}: mean {:.4} s, var {:.5}, stay {:.3}",
            i + 1,
            e.mean,
            e.variance,
            model.transitions().get(i, i)
        );
    }
    let (correct, scored) = prediction_accuracy(&model, test)?;
    println!(
        "held-out accuracy {:.3} ({correct}/{scored})",
        correct as f64 / scored as f64
    );

    let cv = cross_validate(&data, 5, 3, &em, 1)?;
    for (f, a) in cv.fold_accuracy.iter().enumerate() {
        println!("fold {}: {a:.3}", f + 1);
    }
    println!("5-fold accuracy {:.3}", cv.accuracy);
    Ok(())
}
