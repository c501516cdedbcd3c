use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use framelut::config::Pipeline;
use framelut::gbdt::{load_model, save_model, train_with_report, Target};
use framelut::harness::{self, all_cells};
use framelut::lut::{build_lut, load_lut, save_lut, LutBuildConfig};
use framelut::runtime::{bench_query_latency, query};
use framelut::{oracle, Dataset, Model};

#[derive(Parser)]
#[command(name = "framelut", version, about = "Lookup-table driven rendering parameter selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    Ssim,
    Time,
}

impl From<TargetArg> for Target {
    fn from(t: TargetArg) -> Self {
        match t {
            TargetArg::Ssim => Target::Ssim,
            TargetArg::Time => Target::TimeMs,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample the synthetic renderer into a training CSV.
    GenerateData {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        samples: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one predictor with depth selection on validation MAE.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_enum)]
        target: TargetArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Distill the quality and time models into a lookup table.
    BuildLut {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        phi: Option<PathBuf>,
        #[arg(long)]
        psi: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Look up the parameters for one LOD and clock reading.
    Query {
        #[arg(long)]
        lut: PathBuf,
        #[arg(long)]
        lod: usize,
        #[arg(long)]
        cpu: f64,
        #[arg(long)]
        gpu: f64,
        /// Pipeline config, used only to print categorical level names.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Measure per-query latency over randomized inputs.
    Bench {
        #[arg(long)]
        lut: PathBuf,
        #[arg(long, default_value_t = 1_000_000)]
        iters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Score the configured scenario against the best-quality baseline.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        lut: Option<PathBuf>,
        /// Output directory for frames.csv and summary.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate at a series of fixed GPU clocks.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        lut: Option<PathBuf>,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long)]
        step: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check every table cell against a fresh model search and compare latency.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        lut: Option<PathBuf>,
        #[arg(long)]
        phi: Option<PathBuf>,
        #[arg(long)]
        psi: Option<PathBuf>,
    },
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn load_dataset(p: &Pipeline, path: &Path) -> Result<Dataset> {
    Dataset::load_csv(path, &p.space, &p.lods, p.oracle.cpu_range, p.oracle.gpu_range, p.oracle.seed)
        .with_context(|| format!("reading dataset {}", path.display()))
}

fn load_pair(p: &Pipeline, phi: Option<PathBuf>, psi: Option<PathBuf>) -> Result<(Model, Model)> {
    let phi_path = phi.unwrap_or_else(|| p.doc.paths.phi.clone());
    let psi_path = psi.unwrap_or_else(|| p.doc.paths.psi.clone());
    let phi: Model = load_model(&phi_path).with_context(|| format!("reading model {}", phi_path.display()))?;
    let psi: Model = load_model(&psi_path).with_context(|| format!("reading model {}", psi_path.display()))?;
    Ok((phi, psi))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenerateData { config, samples, out } => {
            let p = Pipeline::load(&config)?;
            let n = samples.map_or(p.doc.oracle.samples, |s| s as usize);
            if n == 0 {
                bail!("sample count must be at least 1");
            }
            let out = out.unwrap_or_else(|| p.doc.paths.dataset.clone());
            let data = oracle::generate_dataset(&p.oracle, n)?;
            ensure_parent(&out)?;
            data.save_csv(&out).with_context(|| format!("writing {}", out.display()))?;
            println!("samples={} seed={} out={}", data.len(), data.seed, out.display());
        }
        Command::Train { config, data, target, out } => {
            let p = Pipeline::load(&config)?;
            let target = Target::from(target);
            let data_path = data.unwrap_or_else(|| p.doc.paths.dataset.clone());
            let data = load_dataset(&p, &data_path)?;
            let report = train_with_report::<f64>(&data, target, &p.train)?;
            let out = out.unwrap_or_else(|| match target {
                Target::Ssim => p.doc.paths.phi.clone(),
                Target::TimeMs => p.doc.paths.psi.clone(),
            });
            ensure_parent(&out)?;
            save_model(&report.model, &out).with_context(|| format!("writing {}", out.display()))?;
            println!(
                "target={} depth={} validation_mae={} out={}",
                report.model.target,
                report.model.max_depth,
                report.model.validation_mae,
                out.display()
            );
        }
        Command::BuildLut { config, phi, psi, out } => {
            let p = Pipeline::load(&config)?;
            let (phi, psi) = load_pair(&p, phi, psi)?;
            let lut = build_lut(&LutBuildConfig {
                space: &p.space,
                lods: &p.lods,
                grid: &p.grid,
                time_percentile: p.percentile,
                phi: &phi,
                psi: &psi,
            })?;
            let out = out.unwrap_or_else(|| p.doc.paths.lut.clone());
            ensure_parent(&out)?;
            save_lut(&lut, &out).with_context(|| format!("writing {}", out.display()))?;
            println!(
                "cells={} entry_bits={} payload_bytes={} file_bytes={} build_seconds={:.3}",
                lut.entry_count(),
                lut.header().entry_bits,
                lut.payload().len(),
                lut.to_bytes().len(),
                lut.build_time().unwrap_or_default().as_secs_f64()
            );
        }
        Command::Query { lut, lod, cpu, gpu, config } => {
            let table = load_lut(&lut).with_context(|| format!("reading {}", lut.display()))?;
            let r = query(&table, lod, cpu, gpu)?;
            let space = config.map(|c| Pipeline::load(c).map(|p| p.space)).transpose()?;
            let h = table.header();
            println!(
                "cell lod={} cpu_bin={} ({} MHz) gpu_bin={} ({} MHz) code={}",
                r.cell.0, r.cell.1, h.cpu_bins[r.cell.1], r.cell.2, h.gpu_bins[r.cell.2], r.code
            );
            for (d, &i) in r.params.indices().iter().enumerate() {
                let shown = match &space {
                    Some(s) if h.matches_space(s) => s.dimensions()[d].describe_level(i),
                    _ => h.dimensions[d].levels[i].to_string(),
                };
                println!("{} = {} (level {})", h.dimensions[d].name, shown, i);
            }
        }
        Command::Bench { lut, iters, seed } => {
            let table = load_lut(&lut).with_context(|| format!("reading {}", lut.display()))?;
            let s = bench_query_latency(&table, iters, seed)?;
            println!(
                "iterations={} min_ns={} median_ns={} p99_ns={} mean_ns={:.1}",
                s.iterations, s.min_ns, s.median_ns, s.p99_ns, s.mean_ns
            );
        }
        Command::Evaluate { config, lut, out } => {
            let p = Pipeline::load(&config)?;
            let lut_path = lut.unwrap_or_else(|| p.doc.paths.lut.clone());
            let table = load_lut(&lut_path).with_context(|| format!("reading {}", lut_path.display()))?;
            let report = harness::evaluate(&table, &p.oracle, &p.scenario()?)?;
            let out = out.unwrap_or_else(|| p.doc.paths.report_dir.clone());
            report.save(&out).with_context(|| format!("writing report to {}", out.display()))?;
            let s = report.summary;
            println!(
                "frames={} time_reduction_pct={:.3} image_error_pct={:.3} adaptivity={} out={}",
                s.frames,
                s.time_reduction_pct,
                s.image_error_pct,
                s.adaptivity,
                out.display()
            );
        }
        Command::Sweep { config, lut, from, to, step, out } => {
            let p = Pipeline::load(&config)?;
            let lut_path = lut.unwrap_or_else(|| p.doc.paths.lut.clone());
            let table = load_lut(&lut_path).with_context(|| format!("reading {}", lut_path.display()))?;
            let freqs = harness::frequency_steps(from, to, step)?;
            let rows = harness::sweep_gpu_frequency(&table, &p.oracle, &freqs, p.sweep_cpu_mhz(), &p.doc.scenario.lod_schedule)?;
            ensure_parent(&out)?;
            harness::write_sweep_csv(&rows, BufWriter::new(File::create(&out)?))?;
            let min = rows.iter().map(|r| r.report.summary.time_reduction_pct).fold(f64::INFINITY, f64::min);
            println!("rows={} min_time_reduction_pct={:.3} out={}", rows.len(), min, out.display());
        }
        Command::Ablate { config, lut, phi, psi } => {
            let p = Pipeline::load(&config)?;
            let lut_path = lut.unwrap_or_else(|| p.doc.paths.lut.clone());
            let table = load_lut(&lut_path).with_context(|| format!("reading {}", lut_path.display()))?;
            let (phi, psi) = load_pair(&p, phi, psi)?;
            let rec = harness::ablation_lut_vs_model(&phi, &psi, &table, &p.space, &all_cells(&table))?;
            println!(
                "probes={} match_rate={:.4} model_ns={:.0} lut_ns={:.1} ratio={:.0}",
                rec.probes,
                rec.match_rate(),
                rec.model_ns_per_query,
                rec.lut_ns_per_query,
                rec.latency_ratio()
            );
            for m in &rec.mismatches {
                eprintln!("mismatch cell={:?} lut={} model={}", m.cell, m.lut_code, m.model_code);
            }
            if !rec.mismatches.is_empty() {
                bail!("{} cells disagree with the models", rec.mismatches.len());
            }
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
