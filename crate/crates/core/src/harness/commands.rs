//! Subcommand bodies. Each writes its artifacts under the configured output
//! directory and a human-readable summary to `log`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::compare::{compare_policies, format_percent, Comparison, EvaluationReport};
use super::config::{label_fold, HarnessConfig, PolicyKind};
use crate::error::{Error, Result};
use crate::hmm::{
    cross_validate, em_train, CrossValidation, LabeledTrace, ModelFile, ModelMetadata,
    OnlineFilter, TrainingReport,
};
use crate::qoe::{mos_from_delay, MosScore, QoeState, QuantizationScheme, StateFold};
use crate::trace_io::{format_real, load_traces, save_traces, DelayTrace};

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn say(log: &mut dyn Write, line: String) -> Result<()> {
    writeln!(log, "{line}").map_err(|e| Error::io(Path::new("<stdout>"), e))
}

fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect()
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Error::Serialization(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub path: PathBuf,
    pub rows: usize,
    /// Mean MOS per interface label over every epoch of every run.
    pub mean_mos: BTreeMap<String, f64>,
}

pub fn cmd_simulate(cfg: &HarnessConfig, log: &mut dyn Write) -> Result<SimulateSummary> {
    cfg.validate()?;
    let runs = super::compare::generate_runs(cfg, 0..cfg.scenario.runs as u64)?;
    let traces: Vec<DelayTrace> = runs.iter().flat_map(|r| r.traces.clone()).collect();
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for run in &runs {
        for (t, mos) in run.traces.iter().zip(&run.true_mos) {
            let e = sums.entry(t.interface.clone()).or_default();
            e.0 += mos.iter().sum::<f64>();
            e.1 += mos.len();
        }
    }
    create_dir(&cfg.output_dir)?;
    let path = cfg.output_dir.join("traces.csv");
    save_traces(&path, &traces)?;
    let summary = SimulateSummary {
        rows: traces.iter().map(DelayTrace::len).sum(),
        mean_mos: sums
            .into_iter()
            .map(|(k, (s, n))| (k, if n == 0 { 0.0 } else { s / n as f64 }))
            .collect(),
        path,
    };
    say(
        log,
        format!(
            "{} runs, {} rows ({} {}) -> {}",
            cfg.scenario.runs,
            summary.rows,
            cfg.scenario.kind_name(),
            cfg.scenario.codec,
            summary.path.display()
        ),
    )?;
    for (iface, m) in &summary.mean_mos {
        say(log, format!("mean MOS {iface}: {m:.3}"))?;
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterfaceTraining {
    pub interface: String,
    pub states: usize,
    pub traces: usize,
    pub model_path: PathBuf,
    pub training: TrainingReport,
    pub cross_validation: CrossValidation,
}

/// Groups traces by interface, keeping file order within each group.
fn by_interface(traces: Vec<DelayTrace>) -> BTreeMap<String, Vec<DelayTrace>> {
    let mut groups: BTreeMap<String, Vec<DelayTrace>> = BTreeMap::new();
    for t in traces {
        groups.entry(t.interface.clone()).or_default().push(t);
    }
    groups
}

/// QoE labels of a trace: its MOS column when complete, otherwise the
/// E-Model applied to RTT/2 without loss.
fn trace_labels(
    trace: &DelayTrace,
    cfg: &HarnessConfig,
    scheme: &QuantizationScheme,
    fold: &StateFold,
) -> Result<Vec<QoeState>> {
    let mos = match trace.mos() {
        Some(m) => m,
        None => {
            let codec = cfg.scenario.codec.profile();
            trace
                .owds()
                .into_iter()
                .map(|d| mos_from_delay(d, 0.0, &codec).map(MosScore::value))
                .collect::<Result<_>>()?
        }
    };
    Ok(mos
        .into_iter()
        .map(|m| fold.fold(scheme.quantize(MosScore::new(m))))
        .collect())
}

pub fn cmd_train_hmm(
    cfg: &HarnessConfig,
    traces_path: &Path,
    states: Option<usize>,
    folds: Option<usize>,
    log: &mut dyn Write,
) -> Result<Vec<InterfaceTraining>> {
    let scheme = cfg.scenario.scheme();
    let k = states.unwrap_or(scheme.state_count());
    let (folded, fold) = label_fold(&scheme, k)?;
    let folds = folds.unwrap_or(cfg.training.folds);
    if folds < 2 {
        return Err(Error::Usage(format!("--folds must be >= 2, got {folds}")));
    }
    let groups = by_interface(load_traces(traces_path)?);
    if groups.is_empty() {
        return Err(Error::Validation {
            run_id: "-".into(),
            interface: "-".into(),
            reason: format!("{} holds no traces", traces_path.display()),
        });
    }
    for (iface, traces) in &groups {
        if traces.len() < folds {
            return Err(Error::Usage(format!(
                "{folds} folds requested but interface {iface} has only {} traces",
                traces.len()
            )));
        }
    }
    create_dir(&cfg.output_dir)?;
    let mut out = Vec::with_capacity(groups.len());
    for (iface, traces) in groups {
        let data: Vec<LabeledTrace> = traces
            .iter()
            .map(|t| LabeledTrace::new(t.rtts(), trace_labels(t, cfg, &scheme, &fold)?))
            .collect::<Result<_>>()?;
        let obs: Vec<Vec<f64>> = data.iter().map(|d| d.observations.clone()).collect();
        let labels: Vec<Vec<QoeState>> = data.iter().map(|d| d.labels.clone()).collect();
        let (model, training) = em_train(&obs, Some(&labels), k, &cfg.training.em)?;
        let cv = cross_validate(&data, folds, k, &cfg.training.em, cfg.scenario.seed)?;

        let stem = file_stem(&iface);
        let model_path = cfg.output_dir.join(format!("model_{stem}.toml"));
        ModelFile {
            metadata: ModelMetadata {
                codec: Some(cfg.scenario.codec),
                scenario: Some(cfg.scenario.kind_name().to_string()),
                interface: Some(iface.clone()),
                seed: Some(cfg.training.em.seed),
                observable: Some("rtt".into()),
            },
            model: model.with_scheme(folded.clone())?,
        }
        .save(&model_path)?;

        say(
            log,
            format!(
                "{iface}: k={k}, {} traces, {} EM iterations",
                traces.len(),
                training.iterations
            ),
        )?;
        for (i, a) in cv.fold_accuracy.iter().enumerate() {
            say(log, format!("  fold {}: {:.4}", i + 1, a))?;
        }
        say(log, format!("  mean accuracy: {:.4}", cv.accuracy))?;

        let result = InterfaceTraining {
            interface: iface,
            states: k,
            traces: traces.len(),
            model_path,
            training,
            cross_validation: cv,
        };
        write_file(
            &cfg.output_dir.join(format!("train_{stem}.json")),
            &to_json(&result)?,
        )?;
        out.push(result);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictSummary {
    pub predictions: usize,
    /// Present when the traces carry MOS to score against.
    pub accuracy: Option<f64>,
}

/// One-step-ahead QoE-state predictions for every epoch after the first.
pub fn cmd_predict(
    cfg: &HarnessConfig,
    model_path: &Path,
    traces_path: &Path,
    log: &mut dyn Write,
) -> Result<PredictSummary> {
    let file = ModelFile::load(model_path)?;
    let model = &file.model;
    let scheme = model
        .scheme()
        .cloned()
        .unwrap_or_else(|| cfg.scenario.scheme());
    let identity = StateFold::identity(scheme.state_count());
    let traces: Vec<DelayTrace> = load_traces(traces_path)?
        .into_iter()
        .filter(|t| {
            file.metadata
                .interface
                .as_ref()
                .is_none_or(|i| *i == t.interface)
        })
        .collect();

    create_dir(&cfg.output_dir)?;
    let path = cfg.output_dir.join("predictions.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::Serialization(e.to_string()))?;
    let ser = |e: csv::Error| Error::Serialization(e.to_string());
    w.write_record([
        "run_id",
        "interface",
        "epoch",
        "predicted_state",
        "actual_state",
    ])
    .map_err(ser)?;
    let (mut n, mut correct, mut scored) = (0usize, 0usize, 0usize);
    for t in &traces {
        let actual = match t.mos() {
            Some(_) => Some(trace_labels(t, cfg, &scheme, &identity)?),
            None => None,
        };
        let mut filter = OnlineFilter::new(model);
        for (i, s) in t.samples.iter().enumerate() {
            if i > 0 {
                let (pred, _) = filter.predict();
                let truth = actual.as_ref().map(|a| a[i]);
                if let Some(a) = truth {
                    scored += 1;
                    correct += usize::from(a == pred);
                }
                let truth = truth.map(|a| a.to_string()).unwrap_or_default();
                w.write_record([
                    t.run_id.as_str(),
                    &t.interface,
                    &s.epoch.to_string(),
                    &pred.to_string(),
                    &truth,
                ])
                .map_err(ser)?;
                n += 1;
            }
            filter.update(s.rtt_s)?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    let accuracy = (scored > 0).then(|| correct as f64 / scored as f64);
    say(log, format!("{n} predictions -> {}", path.display()))?;
    if let Some(a) = accuracy {
        say(log, format!("accuracy: {a:.4}"))?;
    }
    Ok(PredictSummary {
        predictions: n,
        accuracy,
    })
}

fn write_timeline(path: &Path, cmp: &Comparison) -> Result<()> {
    let ser = |e: csv::Error| Error::Serialization(e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(ser)?;
    let interfaces = cmp.timeline.first().map_or(0, |r| r.mos.len());
    let mut header = vec!["run_id".to_string(), "policy".into(), "epoch".into()];
    header.extend((0..interfaces).map(|i| format!("mos_if{i}")));
    header.extend(["chosen".into(), "cumulative_handoffs".into()]);
    w.write_record(&header).map_err(ser)?;
    for row in &cmp.timeline {
        let mut rec = vec![
            row.run_id.clone(),
            row.policy.name().into(),
            row.epoch.to_string(),
        ];
        rec.extend(row.mos.iter().map(|m| format_real(*m)));
        rec.extend([row.chosen.to_string(), row.cumulative_handoffs.to_string()]);
        w.write_record(&rec).map_err(ser)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn render_report(report: &EvaluationReport) -> String {
    let mut s = format!(
        "{} {} seed {}: {} runs x {} epochs\n",
        report.scenario, report.codec, report.seed, report.runs, report.duration_epochs
    );
    s += &format!(
        "{:<10} {:>8} {:>9} {:>11}\n",
        "policy", "handoffs", "mean_mos", "reward_sum"
    );
    for p in &report.policies {
        s += &format!(
            "{:<10} {:>8} {:>9.3} {:>11.2}\n",
            p.policy.name(),
            p.handoffs,
            p.mean_mos,
            p.reward_sum
        );
    }
    for a in &report.prediction_accuracy {
        s += &format!(
            "accuracy {} (k={}): {:.4}\n",
            a.interface, a.states, a.accuracy
        );
    }
    for r in &report.reductions {
        s += &format!(
            "reduction vs {}: {}\n",
            r.baseline.name(),
            format_percent(r.percent)
        );
    }
    if !report.reductions.is_empty() {
        s += &format!(
            "mean reduction: {}\n",
            format_percent(report.mean_reduction)
        );
    }
    s
}

pub fn cmd_compare_policies(cfg: &HarnessConfig, log: &mut dyn Write) -> Result<Comparison> {
    let cmp = compare_policies(cfg)?;
    let dir = &cfg.output_dir;
    create_dir(dir)?;
    write_file(&dir.join("report.json"), &(cmp.report.to_json()? + "\n"))?;
    write_timeline(&dir.join("timeline.csv"), &cmp)?;
    if let Some(q) = &cmp.qtable {
        q.save(&dir.join("qtable.toml"))?;
    }
    let channels = cfg.scenario.channels()?;
    for (ch, model) in channels.iter().zip(&cmp.models) {
        ModelFile {
            metadata: ModelMetadata {
                codec: Some(cfg.scenario.codec),
                scenario: Some(cfg.scenario.kind_name().to_string()),
                interface: Some(ch.label.clone()),
                seed: Some(cfg.training.em.seed),
                observable: Some("rtt".into()),
            },
            model: model.clone(),
        }
        .save(&dir.join(format!("model_{}.toml", file_stem(&ch.label))))?;
    }
    write!(log, "{}", render_report(&cmp.report))
        .map_err(|e| Error::io(Path::new("<stdout>"), e))?;
    Ok(cmp)
}

/// One row of the merged summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub source: String,
    pub scenario: String,
    pub codec: String,
    pub seed: u64,
    pub runs: usize,
    pub handoffs: BTreeMap<String, usize>,
    pub mean_mos: BTreeMap<String, f64>,
    pub reductions: BTreeMap<String, Option<f64>>,
    pub mean_reduction: Option<f64>,
}

impl SummaryRow {
    pub fn from_report(source: &str, r: &EvaluationReport) -> Self {
        SummaryRow {
            source: source.to_string(),
            scenario: r.scenario.clone(),
            codec: r.codec.to_string(),
            seed: r.seed,
            runs: r.runs,
            handoffs: r
                .policies
                .iter()
                .map(|p| (p.policy.name().into(), p.handoffs))
                .collect(),
            mean_mos: r
                .policies
                .iter()
                .map(|p| (p.policy.name().into(), p.mean_mos))
                .collect(),
            reductions: r
                .reductions
                .iter()
                .map(|x| (x.baseline.name().into(), x.percent))
                .collect(),
            mean_reduction: r.mean_reduction,
        }
    }
}

pub fn summary_header() -> Vec<String> {
    let mut h: Vec<String> = ["source", "scenario", "codec", "seed", "runs"]
        .map(String::from)
        .to_vec();
    for p in PolicyKind::ALL {
        h.push(format!("handoffs_{}", p.name()));
        h.push(format!("mean_mos_{}", p.name()));
    }
    h.extend(["reduction_naive", "reduction_m4", "mean_reduction"].map(String::from));
    h
}

fn summary_record(row: &SummaryRow) -> Vec<String> {
    let mut rec = vec![
        row.source.clone(),
        row.scenario.clone(),
        row.codec.clone(),
        row.seed.to_string(),
        row.runs.to_string(),
    ];
    for p in PolicyKind::ALL {
        rec.push(
            row.handoffs
                .get(p.name())
                .map(|h| h.to_string())
                .unwrap_or_default(),
        );
        rec.push(
            row.mean_mos
                .get(p.name())
                .map(|m| format_real(*m))
                .unwrap_or_default(),
        );
    }
    let pct = |p: Option<f64>| p.map(format_real).unwrap_or_default();
    rec.push(pct(row.reductions.get("naive").copied().flatten()));
    rec.push(pct(row.reductions.get("m4").copied().flatten()));
    rec.push(pct(row.mean_reduction));
    rec
}

/// Merges comparison reports into `summary.csv` and `summary.json`, one row
/// per report in argument order.
pub fn cmd_report(
    cfg: &HarnessConfig,
    files: &[PathBuf],
    log: &mut dyn Write,
) -> Result<Vec<SummaryRow>> {
    let mut rows = Vec::with_capacity(files.len());
    for f in files {
        let text = std::fs::read_to_string(f).map_err(|e| Error::io(f, e))?;
        let report = EvaluationReport::from_json(&text).map_err(|e| Error::Validation {
            run_id: "-".into(),
            interface: "-".into(),
            reason: format!("{}: {e}", f.display()),
        })?;
        rows.push(SummaryRow::from_report(&f.display().to_string(), &report));
    }
    create_dir(&cfg.output_dir)?;
    let path = cfg.output_dir.join("summary.csv");
    let ser = |e: csv::Error| Error::Serialization(e.to_string());
    let mut w = csv::Writer::from_path(&path).map_err(ser)?;
    w.write_record(summary_header()).map_err(ser)?;
    for row in &rows {
        w.write_record(summary_record(row)).map_err(ser)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    write_file(&cfg.output_dir.join("summary.json"), &to_json(&rows)?)?;
    say(log, format!("{} reports -> {}", rows.len(), path.display()))?;
    Ok(rows)
}
