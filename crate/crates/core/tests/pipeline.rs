use std::io::Cursor;

use framelut::config::{Pipeline, PipelineConfig};
use framelut::gbdt::{load_model, save_model, train, Target};
use framelut::harness::{evaluate, Scenario};
use framelut::lut::{build_lut, build_reference_lut, kept_count, load_lut, save_lut, LutBuildConfig};
use framelut::oracle::{generate_dataset, oracle_evaluate};
use framelut::runtime::{query, ScriptedSource};
use framelut::{config_unindex, enumerate_space, ConfigPoint, Dataset, LookupTable, Model};

const CONFIG: &str = r#"{
  "space": {
    "dimensions": [
      {"name": "radius", "values": [0.0, 0.5, 1.0, 1.5, 2.0]},
      {"name": "taps", "values": [4, 8, 16]},
      {"name": "half_res", "labels": ["off", "on"]}
    ],
    "best_quality": [2, 2, 1]
  },
  "lods": [
    {"name": "near", "threshold": 1.0},
    {"name": "mid", "threshold": 0.6},
    {"name": "far", "threshold": 0.3}
  ],
  "hardware_grid": {
    "cpu_bins": [1500, 2500],
    "gpu_bins": {"from": 1000, "to": 2000, "count": 6}
  },
  "oracle": {
    "seed": 99,
    "cpu_range_mhz": [1500, 2500],
    "gpu_range_mhz": [1000, 2000],
    "interaction_strength": 0.5,
    "noise_std_time": 0.03,
    "noise_std_ssim": 0.002,
    "samples": 1500
  },
  "train": {
    "n_estimators": 40,
    "learning_rate": 0.1,
    "depth_range": [1, 6],
    "split": [7, 3],
    "min_samples_leaf": 5,
    "seed": 2
  },
  "lut": {"percentile": 0.2},
  "scenario": {
    "frames": 90,
    "lod_schedule": [0, 1, 2],
    "lod_hold_frames": 10,
    "source": {"fixed": {"cpu_mhz": 2000, "gpu_mhz": 1500}}
  },
  "paths": {
    "dataset": "data.csv",
    "phi": "phi.json",
    "psi": "psi.json",
    "lut": "t.lut",
    "report_dir": "report"
  }
}"#;

fn pipeline() -> Pipeline {
    PipelineConfig::from_json(CONFIG).unwrap().resolve().unwrap()
}

fn models(p: &Pipeline) -> (Dataset, Model, Model) {
    let data = generate_dataset(&p.oracle, p.doc.oracle.samples).unwrap();
    let phi = train(&data, Target::Ssim, &p.train).unwrap();
    let psi = train(&data, Target::TimeMs, &p.train).unwrap();
    (data, phi, psi)
}

fn truth(p: &Pipeline, code: u32, lod: usize, cpu: u32, gpu: u32) -> (f64, f64) {
    let point = ConfigPoint {
        params: config_unindex(&p.space, code).unwrap(),
        lod,
        cpu_freq: cpu as f64,
        gpu_freq: gpu as f64,
    };
    let o = oracle_evaluate(&p.oracle, &point, false).unwrap();
    (o.ssim, o.time_ms)
}

#[test]
fn reference_table_respects_budget_and_maximizes_quality() {
    let p = pipeline();
    let lut = build_reference_lut(&p.oracle, &p.grid, p.percentile).unwrap();
    let h = lut.header().clone();
    let n = p.space.total() as usize;
    let m = kept_count(n, p.percentile);
    for l in 0..h.lod_thresholds.len() {
        for (c, &cpu) in h.cpu_bins.iter().enumerate() {
            for (g, &gpu) in h.gpu_bins.iter().enumerate() {
                let mut all: Vec<(f64, f64)> = (0..n as u32).map(|k| truth(&p, k, l, cpu, gpu)).collect();
                let (ssim, time) = truth(&p, lut.code_at(l, c, g).unwrap(), l, cpu, gpu);
                all.sort_by(|a, b| a.1.total_cmp(&b.1));
                let budget = all[m - 1].1;
                assert!(time <= budget, "cell ({l},{c},{g}) picked {time} over budget {budget}");
                let best = all[..m].iter().map(|x| x.0).fold(f64::NEG_INFINITY, f64::max);
                assert_eq!(ssim, best);
            }
        }
    }
}

#[test]
fn reference_policy_quality_is_monotone_in_gpu_clock() {
    let p = pipeline();
    let lut = build_reference_lut(&p.oracle, &p.grid, p.percentile).unwrap();
    let h = lut.header().clone();
    for l in 0..h.lod_thresholds.len() {
        for (c, &cpu) in h.cpu_bins.iter().enumerate() {
            let q: Vec<f64> = (0..h.gpu_bins.len())
                .map(|g| truth(&p, lut.code_at(l, c, g).unwrap(), l, cpu, h.gpu_bins[g]).0)
                .collect();
            assert!(q.windows(2).all(|w| w[1] >= w[0]), "lod {l} cpu {cpu}: {q:?}");
        }
    }
}

#[test]
fn trained_table_round_trips_through_files() {
    let p = pipeline();
    let (data, phi, psi) = models(&p);
    let dir = tempfile::tempdir().unwrap();

    data.save_csv(dir.path().join("data.csv")).unwrap();
    let back = Dataset::load_csv(dir.path().join("data.csv"), &p.space, &p.lods, p.oracle.cpu_range, p.oracle.gpu_range, p.oracle.seed)
        .unwrap();
    assert_eq!(back.samples, data.samples);

    save_model(&phi, dir.path().join("phi.json")).unwrap();
    save_model(&psi, dir.path().join("psi.json")).unwrap();
    let phi2: Model = load_model(dir.path().join("phi.json")).unwrap();
    let psi2: Model = load_model(dir.path().join("psi.json")).unwrap();
    assert_eq!(phi2, phi);
    assert_eq!(psi2, psi);

    let cfg = LutBuildConfig { space: &p.space, lods: &p.lods, grid: &p.grid, time_percentile: p.percentile, phi: &phi, psi: &psi };
    let lut = build_lut(&cfg).unwrap();
    let again = build_lut(&LutBuildConfig { phi: &phi2, psi: &psi2, ..cfg }).unwrap();
    assert_eq!(lut, again);

    save_lut(&lut, dir.path().join("t.lut")).unwrap();
    let loaded: LookupTable = load_lut(dir.path().join("t.lut")).unwrap();
    assert_eq!(loaded, lut);
    assert_eq!(loaded.entry_count(), 3 * 2 * 6);
    assert_eq!(loaded.payload().len(), (36usize * 5).div_ceil(8));
}

#[test]
fn model_table_tracks_reference() {
    let p = pipeline();
    let (_, phi, psi) = models(&p);
    let lut = build_lut(&LutBuildConfig { space: &p.space, lods: &p.lods, grid: &p.grid, time_percentile: p.percentile, phi: &phi, psi: &psi })
        .unwrap();
    let reference = build_reference_lut(&p.oracle, &p.grid, p.percentile).unwrap();
    let scenario = p.scenario().unwrap();
    let a = evaluate(&lut, &p.oracle, &scenario).unwrap().summary;
    let b = evaluate(&reference, &p.oracle, &scenario).unwrap().summary;
    assert_eq!(a.frames, 90);
    assert!(a.time_reduction_pct > 0.0);
    assert!((a.time_reduction_pct - b.time_reduction_pct).abs() < 10.0, "{a:?} vs {b:?}");
}

#[test]
fn scripted_trace_drives_queries() {
    let p = pipeline();
    let lut = build_reference_lut(&p.oracle, &p.grid, p.percentile).unwrap();
    let trace = "frame,cpu_freq_mhz,gpu_freq_mhz\n1,2400,1900\n0,1600,1100\n";
    let mut source = ScriptedSource::read_csv(Cursor::new(trace)).unwrap();
    let scenario = Scenario::from_source(&mut source, &[0, 2, 1]);
    let f = &scenario.frames;
    assert_eq!((f[0].cpu_freq, f[0].gpu_freq), (1600.0, 1100.0));
    assert_eq!((f[1].cpu_freq, f[1].gpu_freq), (2400.0, 1900.0));
    assert_eq!((f[2].cpu_freq, f[2].gpu_freq), (1600.0, 1100.0));
    let report = evaluate(&lut, &p.oracle, &scenario).unwrap();
    for (rec, input) in report.records.iter().zip(f) {
        assert_eq!(rec.code, query(&lut, input.lod, input.cpu_freq, input.gpu_freq).unwrap().code);
    }
}

#[test]
fn every_code_is_reachable_by_enumeration() {
    let p = pipeline();
    assert_eq!(enumerate_space(&p.space).count(), 30);
}
