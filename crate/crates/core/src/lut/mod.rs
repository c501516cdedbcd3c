//! Lookup-table distillation: per-cell two-phase search over predicted
//! outcomes for every configuration, packed into a compact table.

pub mod bits;
mod format;

use std::cmp::Ordering;
use std::time::{Duration, Instant};

use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::gbdt::{GbdtModel, Target};
use crate::oracle::{oracle_evaluate, OracleConfig};
use crate::scalar::{total_cmp, Scalar};
use crate::space::{enumerate_space, unindex_into, ConfigPoint, HardwareGrid, LodSet, ParameterSpace, ParameterVector};

pub use format::{fingerprint, load_lut, save_lut, FORMAT_VERSION, MAGIC};

/// Flat cell position `(l * cpu_bins + c) * gpu_bins + g`.
pub fn cell_index(lods: &LodSet, grid: &HardwareGrid, l: usize, c: usize, g: usize) -> Result<usize> {
    if l >= lods.len() || c >= grid.cpu_bins.len() || g >= grid.gpu_bins.len() {
        return Err(Error::validation(format!(
            "cell ({l}, {c}, {g}) outside {}x{}x{} grid",
            lods.len(),
            grid.cpu_bins.len(),
            grid.gpu_bins.len()
        )));
    }
    Ok(flat_cell(grid.cpu_bins.len(), grid.gpu_bins.len(), l, c, g))
}

#[inline]
pub(crate) fn flat_cell(n_cpu: usize, n_gpu: usize, l: usize, c: usize, g: usize) -> usize {
    (l * n_cpu + c) * n_gpu + g
}

/// Number of candidates surviving the time filter: `max(1, ceil(p * n))`.
///
/// Products within a relative `1e-6` of an integer are treated as that
/// integer so that single-precision percentiles do not gain a candidate.
pub fn kept_count(n: usize, percentile: f64) -> usize {
    let x = percentile * n as f64;
    let m = (x - x * 1e-6).ceil();
    (m as usize).clamp(1, n.max(1))
}

/// Phase 1 keeps the fastest `kept_count` entries (time ascending, ties by
/// code); phase 2 returns the highest predicted SSIM among them, ties to the
/// lower time and then the lower code.
pub fn two_phase_search<T: Scalar>(predicted: &[(u32, T, T)], percentile: f64) -> Result<u32> {
    let mut scratch = Vec::with_capacity(predicted.len());
    two_phase_search_in(predicted, percentile, &mut scratch)
}

fn by_time<T: Scalar>(a: &(u32, T, T), b: &(u32, T, T)) -> Ordering {
    total_cmp(a.2, b.2).then(a.0.cmp(&b.0))
}

pub(crate) fn two_phase_search_in<T: Scalar>(
    predicted: &[(u32, T, T)],
    percentile: f64,
    scratch: &mut Vec<(u32, T, T)>,
) -> Result<u32> {
    if predicted.is_empty() {
        return Err(Error::validation("two-phase search over an empty candidate list"));
    }
    scratch.clear();
    scratch.extend_from_slice(predicted);
    let m = kept_count(scratch.len(), percentile);
    if m < scratch.len() {
        scratch.select_nth_unstable_by(m - 1, by_time);
        scratch.truncate(m);
    }
    let best = scratch
        .iter()
        .max_by(|a, b| total_cmp(a.1, b.1).then_with(|| by_time(b, a)))
        .expect("non-empty");
    Ok(best.0)
}

/// Produces `(code, ssim, time_ms)` for every configuration at one cell.
pub trait CellPredictor<T: Scalar> {
    fn predict_cell(&mut self, lod: usize, cpu_mhz: u32, gpu_mhz: u32, out: &mut Vec<(u32, T, T)>) -> Result<()>;

    /// Identity of the underlying predictors, recorded in the table header.
    fn fingerprints(&self) -> [u64; 2];
}

/// The trained quality and time models evaluated over the whole space.
pub struct ModelPredictor<'a, T> {
    phi: &'a GbdtModel<T>,
    psi: &'a GbdtModel<T>,
    width: usize,
    rows: Vec<T>,
    ssim: Vec<T>,
    time: Vec<T>,
    fingerprints: [u64; 2],
}

impl<'a, T: Scalar> ModelPredictor<'a, T> {
    pub fn new(space: &ParameterSpace, phi: &'a GbdtModel<T>, psi: &'a GbdtModel<T>) -> Result<Self> {
        if phi.target != Target::Ssim {
            return Err(Error::validation(format!("quality model predicts {}, expected ssim", phi.target)));
        }
        if psi.target != Target::TimeMs {
            return Err(Error::validation(format!("time model predicts {}, expected time_ms", psi.target)));
        }
        let width = space.dim_count() + 3;
        for m in [phi, psi] {
            if m.n_features != width {
                return Err(Error::validation(format!(
                    "{} model expects {} features, space needs {width}",
                    m.target, m.n_features
                )));
            }
        }
        let mut rows = Vec::with_capacity(width * space.total() as usize);
        for p in enumerate_space(space) {
            rows.extend(p.indices().iter().map(|&i| T::from_count(i)));
            rows.extend([T::zero(); 3]);
        }
        let fingerprints = [fingerprint(phi.to_json()?.as_bytes()), fingerprint(psi.to_json()?.as_bytes())];
        Ok(Self { phi, psi, width, rows, ssim: Vec::new(), time: Vec::new(), fingerprints })
    }
}

impl<T: Scalar> CellPredictor<T> for ModelPredictor<'_, T> {
    fn predict_cell(&mut self, lod: usize, cpu_mhz: u32, gpu_mhz: u32, out: &mut Vec<(u32, T, T)>) -> Result<()> {
        let w = self.width;
        for row in self.rows.chunks_exact_mut(w) {
            row[w - 3] = T::from_count(lod);
            row[w - 2] = T::from_f64_lossy(cpu_mhz as f64);
            row[w - 1] = T::from_f64_lossy(gpu_mhz as f64);
        }
        self.phi.predict_flat(&self.rows, &mut self.ssim)?;
        self.psi.predict_flat(&self.rows, &mut self.time)?;
        out.clear();
        out.extend(self.ssim.iter().zip(&self.time).enumerate().map(|(c, (&s, &t))| (c as u32, s, t)));
        Ok(())
    }

    fn fingerprints(&self) -> [u64; 2] {
        self.fingerprints
    }
}

/// Noiseless ground truth from the synthetic oracle; the reference a
/// model-backed table is compared against.
pub struct OraclePredictor<'a> {
    cfg: &'a OracleConfig,
    params: Vec<ParameterVector>,
}

impl<'a> OraclePredictor<'a> {
    pub fn new(cfg: &'a OracleConfig) -> Self {
        Self { cfg, params: enumerate_space(&cfg.space).collect() }
    }
}

impl CellPredictor<f64> for OraclePredictor<'_> {
    fn predict_cell(&mut self, lod: usize, cpu_mhz: u32, gpu_mhz: u32, out: &mut Vec<(u32, f64, f64)>) -> Result<()> {
        out.clear();
        for (code, p) in self.params.iter().enumerate() {
            let point = ConfigPoint { params: p.clone(), lod, cpu_freq: cpu_mhz as f64, gpu_freq: gpu_mhz as f64 };
            let o = oracle_evaluate(self.cfg, &point, false)?;
            out.push((code as u32, o.ssim, o.time_ms));
        }
        Ok(())
    }

    fn fingerprints(&self) -> [u64; 2] {
        [0, 0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DimDescriptor {
    pub name: String,
    pub levels: Vec<f32>,
}

/// Everything stored ahead of the packed entries.
#[derive(Debug, Clone, PartialEq)]
pub struct LutHeader {
    pub entry_bits: u8,
    pub dimensions: Vec<DimDescriptor>,
    pub lod_thresholds: Vec<f32>,
    pub cpu_bins: Vec<u32>,
    pub gpu_bins: Vec<u32>,
    pub percentile: f32,
    pub fingerprints: [u64; 2],
}

impl LutHeader {
    pub fn total_combinations(&self) -> u64 {
        self.dimensions.iter().map(|d| d.levels.len() as u64).product()
    }

    pub fn cell_count(&self) -> usize {
        self.lod_thresholds.len() * self.cpu_bins.len() * self.gpu_bins.len()
    }

    /// Whether this table was built over `space` (names and single-precision levels).
    pub fn matches_space(&self, space: &ParameterSpace) -> bool {
        self.dimensions.len() == space.dim_count()
            && self.dimensions.iter().zip(space.dimensions()).all(|(a, b)| {
                a.name == b.name
                    && a.levels.len() == b.values.len()
                    && a.levels.iter().zip(&b.values).all(|(&x, &y)| x == y as f32)
            })
    }
}

/// Immutable table mapping `(LOD, CPU bin, GPU bin)` to the chosen configuration code.
#[derive(Debug, Clone)]
pub struct LookupTable {
    header: LutHeader,
    payload: Vec<u8>,
    radices: SmallVec<[usize; 8]>,
    build_time: Option<Duration>,
}

impl PartialEq for LookupTable {
    /// Compares persisted content; the build wall-clock is not part of it.
    fn eq(&self, other: &Self) -> bool {
        self.header == other.header && self.payload == other.payload
    }
}

impl LookupTable {
    pub(crate) fn from_parts(header: LutHeader, payload: Vec<u8>) -> Result<Self> {
        let total = header.total_combinations();
        if total == 0 || total > u32::MAX as u64 {
            return Err(Error::format("invalid combination count"));
        }
        if header.entry_bits != bits::entry_width(total as u32) {
            return Err(Error::format(format!(
                "entry width {} does not match {} combinations",
                header.entry_bits, total
            )));
        }
        if header.lod_thresholds.is_empty() || header.cpu_bins.is_empty() || header.gpu_bins.is_empty() {
            return Err(Error::format("empty LOD or frequency bin list"));
        }
        if payload.len() != bits::packed_len(header.cell_count(), header.entry_bits) {
            return Err(Error::format(format!(
                "payload is {} bytes, {} cells at {} bits need {}",
                payload.len(),
                header.cell_count(),
                header.entry_bits,
                bits::packed_len(header.cell_count(), header.entry_bits)
            )));
        }
        let radices = header.dimensions.iter().map(|d| d.levels.len()).collect();
        let lut = Self { header, payload, radices, build_time: None };
        for i in 0..lut.entry_count() {
            if lut.entry(i) as u64 >= total {
                return Err(Error::format(format!("entry {i} holds an out-of-range code")));
            }
        }
        Ok(lut)
    }

    pub fn header(&self) -> &LutHeader {
        &self.header
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    pub fn entry_count(&self) -> usize {
        self.header.cell_count()
    }

    pub fn lod_count(&self) -> usize {
        self.header.lod_thresholds.len()
    }

    /// Wall-clock time of the build that produced this table, if built in-process.
    pub fn build_time(&self) -> Option<Duration> {
        self.build_time
    }

    #[inline]
    pub fn entry(&self, cell: usize) -> u32 {
        bits::unpack(&self.payload, self.header.entry_bits, cell)
    }

    /// Code stored for grid cell `(l, c, g)`.
    pub fn code_at(&self, l: usize, c: usize, g: usize) -> Result<u32> {
        let h = &self.header;
        if l >= h.lod_thresholds.len() || c >= h.cpu_bins.len() || g >= h.gpu_bins.len() {
            return Err(Error::validation(format!("cell ({l}, {c}, {g}) outside the table grid")));
        }
        Ok(self.entry(flat_cell(h.cpu_bins.len(), h.gpu_bins.len(), l, c, g)))
    }

    pub(crate) fn radices(&self) -> &[usize] {
        &self.radices
    }

    #[inline]
    pub(crate) fn decode_into(&self, code: u32, out: &mut [usize]) {
        unindex_into(&self.radices, code, out);
    }

    /// All stored codes in cell order.
    pub fn codes(&self) -> Vec<u32> {
        (0..self.entry_count()).map(|i| self.entry(i)).collect()
    }
}

pub struct LutBuildConfig<'a, T> {
    pub space: &'a ParameterSpace,
    pub lods: &'a LodSet,
    pub grid: &'a HardwareGrid,
    pub time_percentile: f64,
    pub phi: &'a GbdtModel<T>,
    pub psi: &'a GbdtModel<T>,
}

/// Distills the trained models into a table.
pub fn build_lut<T: Scalar>(cfg: &LutBuildConfig<'_, T>) -> Result<LookupTable> {
    let mut predictor = ModelPredictor::new(cfg.space, cfg.phi, cfg.psi)?;
    build_lut_with(&mut predictor, cfg.space, cfg.lods, cfg.grid, cfg.time_percentile)
}

/// Runs the two-phase search at every cell with an arbitrary predictor.
///
/// The percentile is rounded to single precision first, so the stored header
/// fully determines the search that produced each entry.
pub fn build_lut_with<T: Scalar, P: CellPredictor<T>>(
    predictor: &mut P,
    space: &ParameterSpace,
    lods: &LodSet,
    grid: &HardwareGrid,
    time_percentile: f64,
) -> Result<LookupTable> {
    if !(time_percentile > 0.0 && time_percentile <= 1.0) {
        return Err(Error::validation(format!("time percentile {time_percentile} outside (0, 1]")));
    }
    let started = Instant::now();
    let percentile = time_percentile as f32;
    let mut codes = Vec::with_capacity(lods.len() * grid.cpu_bins.len() * grid.gpu_bins.len());
    let mut predicted = Vec::with_capacity(space.total() as usize);
    let mut scratch = Vec::with_capacity(space.total() as usize);
    for l in 0..lods.len() {
        for &cpu in &grid.cpu_bins {
            for &gpu in &grid.gpu_bins {
                predictor.predict_cell(l, cpu, gpu, &mut predicted)?;
                if predicted.len() != space.total() as usize {
                    return Err(Error::validation("predictor did not cover the parameter space"));
                }
                codes.push(two_phase_search_in(&predicted, percentile as f64, &mut scratch)?);
            }
        }
    }
    let entry_bits = bits::entry_width(space.total());
    let header = LutHeader {
        entry_bits,
        dimensions: space
            .dimensions()
            .iter()
            .map(|d| DimDescriptor { name: d.name.clone(), levels: d.values.iter().map(|&v| v as f32).collect() })
            .collect(),
        lod_thresholds: lods.thresholds().iter().map(|&t| t as f32).collect(),
        cpu_bins: grid.cpu_bins.clone(),
        gpu_bins: grid.gpu_bins.clone(),
        percentile,
        fingerprints: predictor.fingerprints(),
    };
    let mut lut = LookupTable::from_parts(header, bits::pack(&codes, entry_bits))?;
    lut.build_time = Some(started.elapsed());
    Ok(lut)
}

/// Table built from noiseless oracle outcomes at every cell.
pub fn build_reference_lut(oracle: &OracleConfig, grid: &HardwareGrid, time_percentile: f64) -> Result<LookupTable> {
    let mut predictor = OraclePredictor::new(oracle);
    build_lut_with(&mut predictor, &oracle.space, &oracle.lods, grid, time_percentile)
}
