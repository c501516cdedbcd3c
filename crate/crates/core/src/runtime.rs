//! Per-frame lookup: snap observed clocks to the table grid and decode the
//! stored configuration.

use std::fs::File;
use std::hint::black_box;
use std::io::Read;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smallvec::smallvec;

use crate::dataset::FreqRange;
use crate::error::{Error, Result};
use crate::lut::{flat_cell, LookupTable};
use crate::space::{snap_frequency, ParameterVector};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryResult {
    pub params: ParameterVector,
    /// `(lod, cpu bin, gpu bin)`.
    pub cell: (usize, usize, usize),
    pub code: u32,
}

/// Looks up the configuration for `lod` at the observed clock frequencies.
#[inline]
pub fn query(lut: &LookupTable, lod: usize, cpu_freq: f64, gpu_freq: f64) -> Result<QueryResult> {
    let h = lut.header();
    if lod >= h.lod_thresholds.len() {
        return Err(Error::validation(format!(
            "LOD index {lod} out of range ({} levels)",
            h.lod_thresholds.len()
        )));
    }
    let c = snap_frequency(&h.cpu_bins, cpu_freq);
    let g = snap_frequency(&h.gpu_bins, gpu_freq);
    let code = lut.entry(flat_cell(h.cpu_bins.len(), h.gpu_bins.len(), lod, c, g));
    let mut params = ParameterVector(smallvec![0; lut.radices().len()]);
    lut.decode_into(code, &mut params.0);
    Ok(QueryResult { params, cell: (lod, c, g), code })
}

/// Source of `(cpu MHz, gpu MHz)` readings, one per frame.
pub trait FrequencySource {
    fn next_frequencies(&mut self) -> (f64, f64);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedSource {
    pub cpu: f64,
    pub gpu: f64,
}

impl FrequencySource for FixedSource {
    fn next_frequencies(&mut self) -> (f64, f64) {
        (self.cpu, self.gpu)
    }
}

/// Replays a recorded trace, wrapping around at its end.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedSource {
    trace: Vec<(f64, f64)>,
    pos: usize,
}

impl ScriptedSource {
    pub fn new(trace: Vec<(f64, f64)>) -> Result<Self> {
        if trace.is_empty() {
            return Err(Error::validation("frequency trace is empty"));
        }
        if trace.iter().any(|&(c, g)| !(c > 0.0 && g > 0.0 && c.is_finite() && g.is_finite())) {
            return Err(Error::validation("trace frequencies must be positive"));
        }
        Ok(Self { trace, pos: 0 })
    }

    /// Reads a `frame,cpu_freq_mhz,gpu_freq_mhz` CSV; rows are replayed in frame order.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
        if header != ["frame", "cpu_freq_mhz", "gpu_freq_mhz"] {
            return Err(Error::Parse(format!("unexpected trace header {header:?}")));
        }
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let parse = |j: usize| -> Result<f64> {
                rec.get(j)
                    .ok_or_else(|| Error::Parse(format!("trace row {}: missing column", i + 2)))?
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("trace row {}: {e}", i + 2)))
            };
            rows.push((parse(0)?, parse(1)?, parse(2)?));
        }
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self::new(rows.into_iter().map(|(_, c, g)| (c, g)).collect())
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(File::open(path)?)
    }
}

impl FrequencySource for ScriptedSource {
    fn next_frequencies(&mut self) -> (f64, f64) {
        let f = self.trace[self.pos];
        self.pos = (self.pos + 1) % self.trace.len();
        f
    }
}

/// Bounded random walk: each step moves each clock by a uniform amount in
/// `[-max_step, max_step]` and reflects it back into its range.
#[derive(Debug, Clone)]
pub struct RandomWalkSource {
    cpu: f64,
    gpu: f64,
    cpu_range: FreqRange,
    gpu_range: FreqRange,
    max_step: f64,
    rng: ChaCha8Rng,
}

impl RandomWalkSource {
    pub fn new(cpu_range: FreqRange, gpu_range: FreqRange, max_step: f64, seed: u64) -> Self {
        Self {
            cpu: cpu_range.midpoint(),
            gpu: gpu_range.midpoint(),
            cpu_range,
            gpu_range,
            max_step: max_step.abs(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn step(rng: &mut ChaCha8Rng, value: f64, range: FreqRange, max_step: f64) -> f64 {
        if max_step == 0.0 {
            return value;
        }
        let mut v = value + rng.random_range(-max_step..=max_step);
        if v > range.max {
            v = 2.0 * range.max - v;
        }
        if v < range.min {
            v = 2.0 * range.min - v;
        }
        v.clamp(range.min, range.max)
    }
}

impl FrequencySource for RandomWalkSource {
    fn next_frequencies(&mut self) -> (f64, f64) {
        let out = (self.cpu, self.gpu);
        self.cpu = Self::step(&mut self.rng, self.cpu, self.cpu_range, self.max_step);
        self.gpu = Self::step(&mut self.rng, self.gpu, self.gpu_range, self.max_step);
        out
    }
}

/// One query per scheduled frame, in order.
pub fn run_frame_loop(
    lut: &LookupTable,
    source: &mut dyn FrequencySource,
    lod_schedule: &[usize],
) -> Result<Vec<QueryResult>> {
    if lod_schedule.is_empty() {
        return Err(Error::validation("LOD schedule is empty"));
    }
    lod_schedule
        .iter()
        .map(|&lod| {
            let (cpu, gpu) = source.next_frequencies();
            query(lut, lod, cpu, gpu)
        })
        .collect()
}

/// Per-query latency distribution in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyStats {
    pub iterations: usize,
    pub min_ns: f64,
    pub median_ns: f64,
    pub p99_ns: f64,
    pub mean_ns: f64,
}

impl LatencyStats {
    pub fn from_samples(mut samples: Vec<f64>) -> Self {
        assert!(!samples.is_empty());
        samples.sort_by(f64::total_cmp);
        let n = samples.len();
        let pick = |q: f64| samples[(((n - 1) as f64) * q).round() as usize];
        Self {
            iterations: n,
            min_ns: samples[0],
            median_ns: pick(0.5),
            p99_ns: pick(0.99),
            mean_ns: samples.iter().sum::<f64>() / n as f64,
        }
    }
}

/// Times `iterations` queries over pre-generated random inputs that cover
/// every LOD and range slightly beyond both ends of each bin list.
pub fn bench_query_latency(lut: &LookupTable, iterations: usize, seed: u64) -> Result<LatencyStats> {
    if iterations < 1000 {
        return Err(Error::validation("benchmark needs at least 1000 iterations"));
    }
    let h = lut.header();
    let span = |bins: &[u32]| {
        let lo = bins[0] as f64;
        let hi = *bins.last().unwrap() as f64;
        let pad = ((hi - lo) * 0.05).max(1.0);
        ((lo - pad).max(1.0), hi + pad)
    };
    let (cpu_lo, cpu_hi) = span(&h.cpu_bins);
    let (gpu_lo, gpu_hi) = span(&h.gpu_bins);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Vec<(usize, f64, f64)> = (0..iterations)
        .map(|_| {
            (
                rng.random_range(0..lut.lod_count()),
                rng.random_range(cpu_lo..=cpu_hi),
                rng.random_range(gpu_lo..=gpu_hi),
            )
        })
        .collect();
    let mut samples = Vec::with_capacity(iterations);
    for &(lod, cpu, gpu) in &inputs {
        let start = Instant::now();
        let r = query(lut, black_box(lod), black_box(cpu), black_box(gpu));
        black_box(&r);
        samples.push(start.elapsed().as_nanos() as f64);
        r?;
    }
    Ok(LatencyStats::from_samples(samples))
}
