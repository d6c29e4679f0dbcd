//! CSV delay traces.
//!
//! One row per (run, interface, epoch) under the header
//! `run_id,interface,epoch,rtt_s,mos`. RTT is stored in seconds; `mos` may be
//! empty. Traces are written in `(run_id, interface, epoch)` order with reals
//! rounded to 9 significant digits.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qoe::owd_from_rtt;

pub const HEADER: [&str; 5] = ["run_id", "interface", "epoch", "rtt_s", "mos"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub epoch: u64,
    pub rtt_s: f64,
    pub mos: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayTrace {
    pub run_id: String,
    pub interface: String,
    pub samples: Vec<TraceSample>,
}

impl DelayTrace {
    pub fn new(run_id: impl Into<String>, interface: impl Into<String>) -> Self {
        DelayTrace {
            run_id: run_id.into(),
            interface: interface.into(),
            samples: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn rtts(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.rtt_s).collect()
    }

    /// RTT halved into one-way delay, the E-Model's input.
    pub fn owds(&self) -> Vec<f64> {
        self.samples.iter().map(|s| owd_from_rtt(s.rtt_s)).collect()
    }

    /// MOS column, if every sample carries one.
    pub fn mos(&self) -> Option<Vec<f64>> {
        self.samples.iter().map(|s| s.mos).collect()
    }

    fn fail(&self, reason: String) -> Error {
        Error::Validation {
            run_id: self.run_id.clone(),
            interface: self.interface.clone(),
            reason,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut prev: Option<u64> = None;
        for s in &self.samples {
            if prev.is_some_and(|p| s.epoch <= p) {
                return Err(self.fail(format!("epoch {} does not increase", s.epoch)));
            }
            prev = Some(s.epoch);
            if !(s.rtt_s > 0.0) || !s.rtt_s.is_finite() {
                return Err(self.fail(format!("epoch {}: rtt_s {} is not > 0", s.epoch, s.rtt_s)));
            }
            if let Some(m) = s.mos {
                if !(1.0..=5.0).contains(&m) {
                    return Err(self.fail(format!("epoch {}: mos {m} outside [1, 5]", s.epoch)));
                }
            }
        }
        Ok(())
    }
}

fn parse_err(line: u64, reason: impl Into<String>) -> Error {
    Error::Parse {
        line,
        reason: reason.into(),
    }
}

pub fn read_traces<R: Read>(source: R) -> Result<Vec<DelayTrace>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(source);
    let header = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?;
    if header.iter().ne(HEADER) {
        return Err(parse_err(
            1,
            format!("header must be `{}`", HEADER.join(",")),
        ));
    }
    let mut groups: BTreeMap<(String, String), DelayTrace> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| rec.get(i).unwrap_or("");
        let epoch: u64 = field(2)
            .parse()
            .map_err(|_| parse_err(line, format!("epoch {:?} is not an integer", field(2))))?;
        let rtt_s: f64 = field(3)
            .parse()
            .map_err(|_| parse_err(line, format!("rtt_s {:?} is not a number", field(3))))?;
        let mos = match field(4) {
            "" => None,
            m => Some(
                m.parse::<f64>()
                    .map_err(|_| parse_err(line, format!("mos {m:?} is not a number")))?,
            ),
        };
        let key = (field(0).to_string(), field(1).to_string());
        if key.0.is_empty() || key.1.is_empty() {
            return Err(parse_err(line, "run_id and interface must not be empty"));
        }
        groups
            .entry(key.clone())
            .or_insert_with(|| DelayTrace::new(key.0, key.1))
            .samples
            .push(TraceSample { epoch, rtt_s, mos });
    }
    let traces: Vec<DelayTrace> = groups.into_values().collect();
    for t in &traces {
        t.validate()?;
    }
    Ok(traces)
}

/// Shortest decimal that reproduces `x` rounded to 9 significant digits.
pub fn format_real(x: f64) -> String {
    let rounded: f64 = format!("{x:.8e}").parse().unwrap_or(x);
    format!("{rounded}")
}

pub fn write_traces<W: Write>(traces: &[DelayTrace], sink: W) -> Result<()> {
    for t in traces {
        t.validate()?;
    }
    let mut order: Vec<&DelayTrace> = traces.iter().collect();
    order.sort_by(|a, b| (&a.run_id, &a.interface).cmp(&(&b.run_id, &b.interface)));
    let mut w = csv::Writer::from_writer(sink);
    let ser = |e: csv::Error| Error::Serialization(e.to_string());
    w.write_record(HEADER).map_err(ser)?;
    for t in order {
        for s in &t.samples {
            let epoch = s.epoch.to_string();
            let rtt = format_real(s.rtt_s);
            let mos = s.mos.map(format_real).unwrap_or_default();
            w.write_record([t.run_id.as_str(), &t.interface, &epoch, &rtt, &mos])
                .map_err(ser)?;
        }
    }
    w.flush().map_err(|e| Error::Serialization(e.to_string()))
}

pub fn load_traces(path: &Path) -> Result<Vec<DelayTrace>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_traces(std::io::BufReader::new(f))
}

pub fn save_traces(path: &Path, traces: &[DelayTrace]) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_traces(traces, std::io::BufWriter::new(f))
}
