//! End-to-end evaluation against the noiseless oracle: time saved and image
//! error relative to the best-quality setting, per frame and in aggregate.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::gbdt::GbdtModel;
use crate::lut::{two_phase_search, CellPredictor, LookupTable, ModelPredictor};
use crate::oracle::{oracle_evaluate, OracleConfig};
use crate::runtime::{query, FrequencySource};
use crate::scalar::Scalar;
use crate::space::ConfigPoint;

/// Frequencies and LOD for each frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub frames: Vec<FrameInput>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameInput {
    pub lod: usize,
    pub cpu_freq: f64,
    pub gpu_freq: f64,
}

impl Scenario {
    pub fn from_source(source: &mut dyn FrequencySource, lod_schedule: &[usize]) -> Self {
        let frames = lod_schedule
            .iter()
            .map(|&lod| {
                let (cpu_freq, gpu_freq) = source.next_frequencies();
                FrameInput { lod, cpu_freq, gpu_freq }
            })
            .collect();
        Self { frames }
    }

    pub fn fixed(lod_schedule: &[usize], cpu_freq: f64, gpu_freq: f64) -> Self {
        Self { frames: lod_schedule.iter().map(|&lod| FrameInput { lod, cpu_freq, gpu_freq }).collect() }
    }
}

/// `levels` cycled, each held for `hold` frames, until `frames` entries.
pub fn cyclic_lod_schedule(levels: &[usize], hold: usize, frames: usize) -> Vec<usize> {
    if levels.is_empty() {
        return Vec::new();
    }
    let hold = hold.max(1);
    (0..frames).map(|i| levels[(i / hold) % levels.len()]).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub frame: usize,
    pub lod: usize,
    pub cpu_freq: f64,
    pub gpu_freq: f64,
    pub code: u32,
    pub time_ms: f64,
    pub ssim: f64,
    pub best_time_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub frames: usize,
    pub mean_time_ms: f64,
    pub mean_best_time_ms: f64,
    pub time_reduction_pct: f64,
    pub image_error_pct: f64,
    pub mean_ssim: f64,
    /// Frames whose chosen code differs from the previous frame's.
    pub adaptivity: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub records: Vec<FrameRecord>,
    pub summary: Summary,
}

impl EvalReport {
    fn from_records(records: Vec<FrameRecord>) -> Self {
        let n = records.len().max(1) as f64;
        let mean_time_ms = records.iter().map(|r| r.time_ms).sum::<f64>() / n;
        let mean_best_time_ms = records.iter().map(|r| r.best_time_ms).sum::<f64>() / n;
        let mean_ssim = records.iter().map(|r| r.ssim).sum::<f64>() / n;
        let image_error_pct = records.iter().map(|r| 1.0 - r.ssim).sum::<f64>() / n * 100.0;
        let adaptivity = records.windows(2).filter(|w| w[0].code != w[1].code).count();
        let summary = Summary {
            frames: records.len(),
            mean_time_ms,
            mean_best_time_ms,
            time_reduction_pct: 100.0 * (1.0 - mean_time_ms / mean_best_time_ms),
            image_error_pct,
            mean_ssim,
            adaptivity,
        };
        Self { records, summary }
    }

    pub fn write_frames_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv_writer(out);
        w.write_record(["frame", "lod", "cpu_freq_mhz", "gpu_freq_mhz", "code", "time_ms", "ssim", "best_time_ms"])?;
        for r in &self.records {
            w.write_record([
                r.frame.to_string(),
                r.lod.to_string(),
                r.cpu_freq.to_string(),
                r.gpu_freq.to_string(),
                r.code.to_string(),
                r.time_ms.to_string(),
                r.ssim.to_string(),
                r.best_time_ms.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let s = &self.summary;
        let mut w = csv_writer(out);
        w.write_record([
            "frames",
            "mean_time_ms",
            "mean_best_time_ms",
            "time_reduction_pct",
            "image_error_pct",
            "mean_ssim",
            "adaptivity",
        ])?;
        w.write_record([
            s.frames.to_string(),
            s.mean_time_ms.to_string(),
            s.mean_best_time_ms.to_string(),
            s.time_reduction_pct.to_string(),
            s.image_error_pct.to_string(),
            s.mean_ssim.to_string(),
            s.adaptivity.to_string(),
        ])?;
        w.flush()?;
        Ok(())
    }

    /// Writes `frames.csv` and `summary.csv` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        self.write_frames_csv(fs::File::create(dir.join("frames.csv"))?)?;
        self.write_summary_csv(fs::File::create(dir.join("summary.csv"))?)?;
        Ok(())
    }
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

fn check_compatible(lut: &LookupTable, oracle: &OracleConfig) -> Result<()> {
    if !lut.header().matches_space(&oracle.space) {
        return Err(Error::validation("lookup table and oracle use different parameter spaces"));
    }
    if lut.lod_count() != oracle.lods.len() {
        return Err(Error::validation("lookup table and oracle use different LOD sets"));
    }
    Ok(())
}

/// Runs the scenario through the table and scores every frame with the
/// noiseless oracle at the frame's unsnapped frequencies.
pub fn evaluate(lut: &LookupTable, oracle: &OracleConfig, scenario: &Scenario) -> Result<EvalReport> {
    check_compatible(lut, oracle)?;
    let best = oracle.space.best_quality().clone();
    let mut records = Vec::with_capacity(scenario.frames.len());
    for (frame, f) in scenario.frames.iter().enumerate() {
        let q = query(lut, f.lod, f.cpu_freq, f.gpu_freq)?;
        let chosen = oracle_evaluate(
            oracle,
            &ConfigPoint { params: q.params, lod: f.lod, cpu_freq: f.cpu_freq, gpu_freq: f.gpu_freq },
            false,
        )?;
        let reference = oracle_evaluate(
            oracle,
            &ConfigPoint { params: best.clone(), lod: f.lod, cpu_freq: f.cpu_freq, gpu_freq: f.gpu_freq },
            false,
        )?;
        records.push(FrameRecord {
            frame,
            lod: f.lod,
            cpu_freq: f.cpu_freq,
            gpu_freq: f.gpu_freq,
            code: q.code,
            time_ms: chosen.time_ms,
            ssim: chosen.ssim,
            best_time_ms: reference.time_ms,
        });
    }
    Ok(EvalReport::from_records(records))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub gpu_freq: f64,
    pub report: EvalReport,
}

/// One fixed-GPU-frequency evaluation per entry of `freqs`, each running
/// `lod_schedule` at `cpu_freq`.
pub fn sweep_gpu_frequency(
    lut: &LookupTable,
    oracle: &OracleConfig,
    freqs: &[f64],
    cpu_freq: f64,
    lod_schedule: &[usize],
) -> Result<Vec<SweepRow>> {
    if freqs.is_empty() {
        return Err(Error::validation("frequency list is empty"));
    }
    freqs
        .iter()
        .map(|&gpu_freq| {
            let report = evaluate(lut, oracle, &Scenario::fixed(lod_schedule, cpu_freq, gpu_freq))?;
            Ok(SweepRow { gpu_freq, report })
        })
        .collect()
}

/// `from..=to` at `step`, computed by index to avoid accumulated drift.
pub fn frequency_steps(from: f64, to: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || to < from {
        return Err(Error::validation("sweep needs step > 0 and to >= from"));
    }
    let n = ((to - from) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| from + step * i as f64).collect())
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record([
        "gpu_freq_mhz",
        "mean_time_ms",
        "mean_best_time_ms",
        "time_reduction_pct",
        "image_error_pct",
        "mean_ssim",
    ])?;
    for r in rows {
        let s = &r.report.summary;
        w.write_record([
            r.gpu_freq.to_string(),
            s.mean_time_ms.to_string(),
            s.mean_best_time_ms.to_string(),
            s.time_reduction_pct.to_string(),
            s.image_error_pct.to_string(),
            s.mean_ssim.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub cell: (usize, usize, usize),
    pub lut_code: u32,
    pub model_code: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRecord {
    pub probes: usize,
    pub matches: usize,
    pub mismatches: Vec<Mismatch>,
    /// Mean time of a fresh predict-and-search per probe.
    pub model_ns_per_query: f64,
    /// Mean time of a table query per probe.
    pub lut_ns_per_query: f64,
}

impl AblationRecord {
    pub fn match_rate(&self) -> f64 {
        if self.probes == 0 {
            1.0
        } else {
            self.matches as f64 / self.probes as f64
        }
    }

    pub fn latency_ratio(&self) -> f64 {
        self.model_ns_per_query / self.lut_ns_per_query.max(f64::MIN_POSITIVE)
    }
}

/// Compares each probed cell's stored code with a fresh two-phase search
/// over the models, and times both selection paths.
pub fn ablation_lut_vs_model<T: Scalar>(
    phi: &GbdtModel<T>,
    psi: &GbdtModel<T>,
    lut: &LookupTable,
    space: &crate::space::ParameterSpace,
    probes: &[(usize, usize, usize)],
) -> Result<AblationRecord> {
    if !lut.header().matches_space(space) {
        return Err(Error::validation("lookup table and space differ"));
    }
    let h = lut.header().clone();
    let mut predictor = ModelPredictor::new(space, phi, psi)?;
    let mut predicted = Vec::new();
    let mut mismatches = Vec::new();

    let started = Instant::now();
    let mut model_codes = Vec::with_capacity(probes.len());
    for &(l, c, g) in probes {
        if c >= h.cpu_bins.len() || g >= h.gpu_bins.len() || l >= h.lod_thresholds.len() {
            return Err(Error::validation(format!("probe ({l}, {c}, {g}) is off the table grid")));
        }
        predictor.predict_cell(l, h.cpu_bins[c], h.gpu_bins[g], &mut predicted)?;
        model_codes.push(two_phase_search(&predicted, h.percentile as f64)?);
    }
    let model_elapsed = started.elapsed().as_nanos() as f64;

    for (&(l, c, g), &model_code) in probes.iter().zip(&model_codes) {
        let lut_code = lut.code_at(l, c, g)?;
        if lut_code != model_code {
            mismatches.push(Mismatch { cell: (l, c, g), lut_code, model_code });
        }
    }

    let repeats = (100_000 / probes.len().max(1)).max(1);
    let started = Instant::now();
    for _ in 0..repeats {
        for &(l, c, g) in probes {
            let r = query(
                lut,
                std::hint::black_box(l),
                std::hint::black_box(h.cpu_bins[c] as f64),
                std::hint::black_box(h.gpu_bins[g] as f64),
            )?;
            std::hint::black_box(r);
        }
    }
    let lut_elapsed = started.elapsed().as_nanos() as f64;
    let n = probes.len().max(1) as f64;
    Ok(AblationRecord {
        probes: probes.len(),
        matches: probes.len() - mismatches.len(),
        mismatches,
        model_ns_per_query: model_elapsed / n,
        lut_ns_per_query: lut_elapsed / (n * repeats as f64),
    })
}

/// Every cell of the table's grid.
pub fn all_cells(lut: &LookupTable) -> Vec<(usize, usize, usize)> {
    let h = lut.header();
    let mut cells = Vec::with_capacity(lut.entry_count());
    for l in 0..h.lod_thresholds.len() {
        for c in 0..h.cpu_bins.len() {
            for g in 0..h.gpu_bins.len() {
                cells.push((l, c, g));
            }
        }
    }
    cells
}
