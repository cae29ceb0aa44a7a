//! One-axis parameter sweeps with paired seeds.

use std::path::PathBuf;

use serde::Serialize;

use super::experiment::{
    fmt_float, meta_json, run_experiment_on, summary_rows, write_all, ExperimentSummary, FileBody, RunOptions,
};
use super::spec::ExperimentSpec;
use crate::error::{Error, Result};
use crate::problems::FederatedProblem;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// `γ`.
    Cstep,
    /// `γ̃`.
    Sstep,
    /// `C`.
    Cohort,
    /// `α = γ̃/(γn)` at fixed `γ`.
    Alpha,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Cstep => "cstep",
            SweepAxis::Sstep => "sstep",
            SweepAxis::Cohort => "cohort",
            SweepAxis::Alpha => "alpha",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [SweepAxis::Cstep, SweepAxis::Sstep, SweepAxis::Cohort, SweepAxis::Alpha].into_iter().find(|a| a.name() == name)
    }
}

/// Copies `base` with one parameter replaced. Every point keeps the base seed,
/// so points share their random streams.
pub fn derive_spec(base: &ExperimentSpec, axis: SweepAxis, value: f64, samples_per_client: usize) -> Result<ExperimentSpec> {
    let mut spec = base.clone();
    if !value.is_finite() {
        return Err(Error::Config(format!("{} = {value} is not finite", axis.name())));
    }
    match axis {
        SweepAxis::Cstep => spec.client_step = value,
        SweepAxis::Sstep => spec.server_step = value,
        SweepAxis::Cohort => {
            if value.fract() != 0.0 || value < 1.0 || value as usize > base.problem.clients() {
                return Err(Error::Config(format!(
                    "cohort = {value} must be an integer in [1, {}]",
                    base.problem.clients()
                )));
            }
            spec.cohort = value as usize;
        }
        SweepAxis::Alpha => {
            if value < 0.0 {
                return Err(Error::Config(format!("alpha = {value} must be >= 0")));
            }
            spec.server_step = value * base.client_step * samples_per_client as f64;
        }
    }
    Ok(spec)
}

#[derive(Debug)]
pub struct SweepPoint {
    pub value: f64,
    /// A failing point is reported and the sweep continues.
    pub outcome: std::result::Result<ExperimentSummary, String>,
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub axis: SweepAxis,
    pub points: Vec<SweepPoint>,
    pub files: Vec<PathBuf>,
}

pub fn run_sweep(spec: &ExperimentSpec, axis: SweepAxis, values: &[f64], options: &RunOptions) -> Result<SweepOutcome> {
    let problem = spec.problem.build()?;
    run_sweep_on(&problem, spec, axis, values, options)
}

pub fn run_sweep_on(
    problem: &FederatedProblem,
    spec: &ExperimentSpec,
    axis: SweepAxis,
    values: &[f64],
    options: &RunOptions,
) -> Result<SweepOutcome> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let in_memory = RunOptions { out_dir: None, threads: options.threads };
    let mut points = Vec::with_capacity(values.len());
    let mut specs = Vec::with_capacity(values.len());
    for &value in values {
        let outcome = derive_spec(spec, axis, value, problem.samples_per_client())
            .and_then(|s| {
                let out = run_experiment_on(problem, &s, &in_memory)?;
                specs.push(s);
                Ok(out.summary)
            })
            .map_err(|e| e.to_string());
        points.push(SweepPoint { value, outcome });
    }

    let files = match &options.out_dir {
        Some(dir) => {
            let mut combined = vec![];
            let mut files = vec![];
            let mut ok_specs = specs.iter();
            let mut meta = vec![];
            for (i, point) in points.iter().enumerate() {
                match &point.outcome {
                    Ok(summary) => {
                        let s = ok_specs.next().expect("one spec per successful point");
                        let rows = summary_rows(summary, &spec.bounds);
                        if combined.is_empty() {
                            let mut header = vec![axis.name().to_string()];
                            header.extend(rows[0].iter().cloned());
                            combined.push(header);
                        }
                        for row in &rows[1..] {
                            let mut r = vec![fmt_float(point.value)];
                            r.extend(row.iter().cloned());
                            combined.push(r);
                        }
                        let point_name = format!("{}_{}{i}", spec.output, axis.name());
                        files.push((format!("{point_name}_summary.csv"), FileBody::Csv(rows)));
                        meta.push(serde_json::json!({
                            "value": point.value,
                            "meta": serde_json::from_str::<serde_json::Value>(&meta_json(s, summary)?)
                                .map_err(|e| Error::Resource(e.to_string()))?,
                        }));
                    }
                    Err(msg) => meta.push(serde_json::json!({ "value": point.value, "error": msg })),
                }
            }
            if !combined.is_empty() {
                files.push((format!("{}_sweep.csv", spec.output), FileBody::Csv(combined)));
            }
            let meta = serde_json::json!({ "axis": axis.name(), "points": meta });
            let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::Resource(e.to_string()))? + "\n";
            files.push((format!("{}_sweep_meta.json", spec.output), FileBody::Text(text)));
            write_all(dir, files)?
        }
        None => vec![],
    };
    Ok(SweepOutcome { axis, points, files })
}
