//! The train -> collect -> analyze steps driven by a [`MetaConfig`], plus the
//! CSV layouts of their outputs.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{AnalysisConfig, MetaConfig};
use crate::error::{Error, Result};
use crate::meta::{
    collect_adapted, train, AdamConfig, AdaptedParamsMatrix, EpochRecord, MetaMethod, MetaState,
    Task,
};
use crate::numerics::{DenseMatrix, SeededRng};
use crate::subspace::{spectrum, AnalysisMethod, SpectrumReport};
use crate::taskgen::TaskFamily;

/// Mixed into the run seed so collected tasks never replay the training stream.
const COLLECT_STREAM: u64 = 0x636f_6c6c_6563_74;

/// Fresh state for a config: the initialization draws from the run seed.
pub fn init_state(config: &MetaConfig, rng: &mut SeededRng) -> Result<MetaState> {
    let mut init_rng = rng.fork();
    MetaState::init(
        config.layers(),
        config.method,
        AdamConfig::with_lr(config.outer_lr),
        &mut init_rng,
    )
}

/// Initializes and meta-trains the network described by `config`.
pub fn train_from_config(config: &MetaConfig) -> Result<(MetaState, Vec<EpochRecord>)> {
    config.validate()?;
    let mut rng = SeededRng::new(config.seed);
    let state = init_state(config, &mut rng)?;
    let family = config.family.clone();
    train(
        &config.train_config(),
        state,
        move |r| family.sample(r),
        &mut rng,
    )
}

pub fn collect_rng(seed: u64) -> SeededRng {
    SeededRng::new(seed ^ COLLECT_STREAM)
}

/// Samples `n_tasks` tasks and adapts to each of them.
pub fn collect_from_state(
    state: &MetaState,
    family: &TaskFamily,
    method: &MetaMethod,
    n_tasks: usize,
    seed: u64,
) -> Result<(AdaptedParamsMatrix, Vec<Task>)> {
    if n_tasks < 2 {
        return Err(Error::Argument(format!(
            "need at least 2 tasks to collect, got {n_tasks}"
        )));
    }
    let tasks = family.sample_many(n_tasks, &mut collect_rng(seed))?;
    let points = collect_adapted(state, &tasks, method)?;
    Ok((points, tasks))
}

/// Scans the configured k range, clipped to what the data can support.
pub fn analyze(
    points: &DenseMatrix,
    method: AnalysisMethod,
    analysis: &AnalysisConfig,
) -> Result<SpectrumReport> {
    let cap = (points.rows().saturating_sub(1)).min(points.cols());
    let k_values: Vec<usize> = analysis.k_values().into_iter().filter(|&k| k <= cap).collect();
    if k_values.is_empty() {
        return Err(Error::Argument(format!(
            "k range {:?} is empty for a {}x{} matrix",
            analysis.k_range,
            points.rows(),
            points.cols()
        )));
    }
    let threshold = match method {
        AnalysisMethod::Pca => analysis.pca_threshold,
        AnalysisMethod::Isomap => analysis.isomap_threshold,
    };
    spectrum(points, method, &k_values, analysis.n_neighbors, threshold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SpectrumRow {
    k: usize,
    raw: f64,
    normalized: f64,
}

pub fn write_spectrum_csv<W: Write>(report: &SpectrumReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for ((&k, &raw), &normalized) in report
        .k_values
        .iter()
        .zip(&report.raw_scores)
        .zip(&report.normalized_scores)
    {
        w.serialize(SpectrumRow { k, raw, normalized })?;
    }
    w.flush()?;
    Ok(())
}

/// `(k, raw, normalized)` rows.
pub fn read_spectrum_csv<R: Read>(reader: R) -> Result<Vec<(usize, f64, f64)>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .map(|r| {
            let r: SpectrumRow = r?;
            Ok((r.k, r.raw, r.normalized))
        })
        .collect()
}

pub fn write_history_csv<W: Write>(history: &[EpochRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in history {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_history_csv<R: Read>(reader: R) -> Result<Vec<EpochRecord>> {
    Ok(csv::Reader::from_reader(reader)
        .deserialize()
        .collect::<std::result::Result<Vec<_>, _>>()?)
}

pub fn save_history(history: &[EpochRecord], path: &Path) -> Result<()> {
    write_history_csv(history, std::fs::File::create(path)?)
}
