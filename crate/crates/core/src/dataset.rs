//! Recorded `(ConfigPoint -> RenderOutcome)` observations and their CSV form.
//!
//! Header: `param_<name>...,lod,cpu_freq_mhz,gpu_freq_mhz,ssim,time_ms`.
//! Parameter columns hold level indices.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::space::{ConfigPoint, LodSet, ParameterSpace, ParameterVector, RenderOutcome};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub point: ConfigPoint,
    pub outcome: RenderOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreqRange {
    pub min: f64,
    pub max: f64,
}

impl FreqRange {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min > 0.0 && min < max && max.is_finite()) {
            return Err(Error::validation(format!("invalid frequency range [{min}, {max}]")));
        }
        Ok(Self { min, max })
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.min + self.max)
    }

    pub fn contains(&self, f: f64) -> bool {
        f >= self.min && f <= self.max
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub space: ParameterSpace,
    pub lods: LodSet,
    pub cpu_range: FreqRange,
    pub gpu_range: FreqRange,
    pub samples: Vec<Sample>,
    pub seed: u64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn validate_point(&self, p: &ConfigPoint) -> Result<()> {
        validate_point(&self.space, &self.lods, self.cpu_range, self.gpu_range, p)
    }

    pub fn header(&self) -> Vec<String> {
        let mut cols: Vec<String> = self.space.dimensions().iter().map(|d| format!("param_{}", d.name)).collect();
        cols.extend(["lod", "cpu_freq_mhz", "gpu_freq_mhz", "ssim", "time_ms"].map(String::from));
        cols
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(self.header())?;
        let mut row: Vec<String> = Vec::with_capacity(self.space.dim_count() + 5);
        for s in &self.samples {
            row.clear();
            row.extend(s.point.params.indices().iter().map(|i| i.to_string()));
            row.push(s.point.lod.to_string());
            row.push(s.point.cpu_freq.to_string());
            row.push(s.point.gpu_freq.to_string());
            row.push(s.outcome.ssim.to_string());
            row.push(s.outcome.time_ms.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = BufWriter::new(File::create(path)?);
        self.write_csv(file)
    }

    /// Reads rows written by [`Dataset::write_csv`], validating each against the given domain.
    pub fn read_csv<R: Read>(
        input: R,
        space: &ParameterSpace,
        lods: &LodSet,
        cpu_range: FreqRange,
        gpu_range: FreqRange,
        seed: u64,
    ) -> Result<Self> {
        let mut data = Dataset {
            space: space.clone(),
            lods: lods.clone(),
            cpu_range,
            gpu_range,
            samples: Vec::new(),
            seed,
        };
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
        if header != data.header() {
            return Err(Error::Parse(format!(
                "dataset header mismatch: expected {:?}, found {:?}",
                data.header(),
                header
            )));
        }
        let k = space.dim_count();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let row = line + 2;
            let field = |i: usize| -> Result<&str> {
                rec.get(i).ok_or_else(|| Error::Parse(format!("row {row}: missing column {i}")))
            };
            let num = |i: usize| -> Result<f64> {
                field(i)?
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {row}, column {}: {e}", i + 1)))
            };
            let idx = |i: usize| -> Result<usize> {
                field(i)?
                    .parse::<usize>()
                    .map_err(|e| Error::Parse(format!("row {row}, column {}: {e}", i + 1)))
            };
            let params: Vec<usize> = (0..k).map(idx).collect::<Result<_>>()?;
            let point = ConfigPoint {
                params: ParameterVector::from(params),
                lod: idx(k)?,
                cpu_freq: num(k + 1)?,
                gpu_freq: num(k + 2)?,
            };
            let outcome = RenderOutcome { ssim: num(k + 3)?, time_ms: num(k + 4)? };
            data.validate_point(&point).map_err(|e| Error::Parse(format!("row {row}: {e}")))?;
            if !(0.0..=1.0).contains(&outcome.ssim) || !(outcome.time_ms >= 0.0) {
                return Err(Error::Parse(format!("row {row}: outcome out of range")));
            }
            data.samples.push(Sample { point, outcome });
        }
        Ok(data)
    }

    pub fn load_csv(
        path: impl AsRef<Path>,
        space: &ParameterSpace,
        lods: &LodSet,
        cpu_range: FreqRange,
        gpu_range: FreqRange,
        seed: u64,
    ) -> Result<Self> {
        Self::read_csv(File::open(path)?, space, lods, cpu_range, gpu_range, seed)
    }
}

pub(crate) fn validate_point(
    space: &ParameterSpace,
    lods: &LodSet,
    cpu_range: FreqRange,
    gpu_range: FreqRange,
    p: &ConfigPoint,
) -> Result<()> {
    space.check(&p.params)?;
    if p.lod >= lods.len() {
        return Err(Error::validation(format!("LOD index {} out of range ({} levels)", p.lod, lods.len())));
    }
    if !cpu_range.contains(p.cpu_freq) {
        return Err(Error::validation(format!(
            "CPU frequency {} outside [{}, {}]",
            p.cpu_freq, cpu_range.min, cpu_range.max
        )));
    }
    if !gpu_range.contains(p.gpu_freq) {
        return Err(Error::validation(format!(
            "GPU frequency {} outside [{}, {}]",
            p.gpu_freq, gpu_range.min, gpu_range.max
        )));
    }
    Ok(())
}
