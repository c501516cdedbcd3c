//! Closed-form synthetic rendering function standing in for engine
//! measurements, and the randomized data collection built on it.
//!
//! Ground truth for a point `p` at LOD threshold `a`:
//!
//! ```text
//! work  = sum_d cost_d * lvl_d(p) + interaction * lvl_a(p) * lvl_b(p)
//! time  = 4.0 * (0.25 + work) * a * (gpu_ref / gpu) + 0.2 * (cpu_ref / cpu)
//! ssim  = clamp(1 - sum_d quality_d * max(0, lvl_d(best) - lvl_d(p)) * a, 0, 1)
//! ```
//!
//! `lvl_d` is the level index scaled to `[0, 1]`, `a`/`b` are the two most
//! expensive dimensions and the references are the frequency-range midpoints.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{validate_point, Dataset, FreqRange, Sample};
use crate::error::{Error, Result};
use crate::space::{config_index, ConfigPoint, LodSet, ParameterSpace, ParameterVector, RenderOutcome};

pub const BASE_TIME_MS: f64 = 4.0;
pub const WORK_FLOOR: f64 = 0.25;
pub const CPU_OVERHEAD_MS: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub space: ParameterSpace,
    pub lods: LodSet,
    pub cpu_range: FreqRange,
    pub gpu_range: FreqRange,
    pub cost_weights: Vec<f64>,
    pub quality_weights: Vec<f64>,
    pub interaction_strength: f64,
    pub noise_std_time: f64,
    pub noise_std_ssim: f64,
    pub seed: u64,
    interaction_dims: Option<(usize, usize)>,
}

impl OracleConfig {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        space: ParameterSpace,
        lods: LodSet,
        cpu_range: FreqRange,
        gpu_range: FreqRange,
        cost_weights: Vec<f64>,
        quality_weights: Vec<f64>,
        interaction_strength: f64,
        noise_std_time: f64,
        noise_std_ssim: f64,
        seed: u64,
    ) -> Result<Self> {
        let k = space.dim_count();
        for (label, w) in [("cost", &cost_weights), ("quality", &quality_weights)] {
            if w.len() != k {
                return Err(Error::validation(format!("{label} weights: expected {k}, got {}", w.len())));
            }
            if w.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                return Err(Error::validation(format!("{label} weights must be positive")));
            }
        }
        for (label, v) in [
            ("interaction_strength", interaction_strength),
            ("noise_std_time", noise_std_time),
            ("noise_std_ssim", noise_std_ssim),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::validation(format!("{label} must be a finite non-negative number")));
            }
        }
        let interaction_dims = two_most_expensive(&cost_weights);
        Ok(Self {
            space,
            lods,
            cpu_range,
            gpu_range,
            cost_weights,
            quality_weights,
            interaction_strength,
            noise_std_time,
            noise_std_ssim,
            seed,
            interaction_dims,
        })
    }

    /// Uniform `1/k` weights, interaction 0.5, 3% relative time noise and 0.002 SSIM noise.
    pub fn with_defaults(
        space: ParameterSpace,
        lods: LodSet,
        cpu_range: FreqRange,
        gpu_range: FreqRange,
        seed: u64,
    ) -> Result<Self> {
        let k = space.dim_count();
        let w = vec![1.0 / k as f64; k];
        Self::new(space, lods, cpu_range, gpu_range, w.clone(), w, 0.5, 0.03, 0.002, seed)
    }

    /// Same configuration with both noise levels set to zero.
    pub fn noiseless(&self) -> Self {
        Self { noise_std_time: 0.0, noise_std_ssim: 0.0, ..self.clone() }
    }

    pub fn gpu_ref(&self) -> f64 {
        self.gpu_range.midpoint()
    }

    pub fn cpu_ref(&self) -> f64 {
        self.cpu_range.midpoint()
    }

    /// The dimensions carrying the interaction term, if there are at least two.
    pub fn interaction_dims(&self) -> Option<(usize, usize)> {
        self.interaction_dims
    }

    pub fn validate(&self, point: &ConfigPoint) -> Result<()> {
        validate_point(&self.space, &self.lods, self.cpu_range, self.gpu_range, point)
    }

    fn work(&self, p: &ParameterVector) -> f64 {
        let idx = p.indices();
        let linear: f64 = idx
            .iter()
            .enumerate()
            .map(|(d, &i)| self.cost_weights[d] * self.space.normalized_level(d, i))
            .sum();
        let cross = match self.interaction_dims {
            Some((a, b)) => {
                self.interaction_strength
                    * self.space.normalized_level(a, idx[a])
                    * self.space.normalized_level(b, idx[b])
            }
            None => 0.0,
        };
        linear + cross
    }

    fn quality_deficit(&self, p: &ParameterVector) -> f64 {
        let best = self.space.best_quality().indices();
        p.indices()
            .iter()
            .enumerate()
            .map(|(d, &i)| {
                let gap = self.space.normalized_level(d, best[d]) - self.space.normalized_level(d, i);
                self.quality_weights[d] * gap.max(0.0)
            })
            .sum()
    }

    /// Ground-truth outcome without noise. Assumes `point` is valid.
    fn ground_truth(&self, point: &ConfigPoint) -> RenderOutcome {
        let lod_factor = self.lods.threshold(point.lod).expect("validated lod");
        let gpu_term = BASE_TIME_MS * (WORK_FLOOR + self.work(&point.params)) * lod_factor * (self.gpu_ref() / point.gpu_freq);
        let cpu_term = CPU_OVERHEAD_MS * (self.cpu_ref() / point.cpu_freq);
        let ssim = (1.0 - self.quality_deficit(&point.params) * lod_factor).clamp(0.0, 1.0);
        RenderOutcome { ssim, time_ms: gpu_term + cpu_term }
    }

    fn noise_seed(&self, code: u32, point: &ConfigPoint) -> u64 {
        let mut h = splitmix64(self.seed);
        for v in [
            code as u64,
            point.lod as u64,
            point.cpu_freq.round() as u64,
            point.gpu_freq.round() as u64,
        ] {
            h = splitmix64(h ^ v);
        }
        h
    }
}

fn two_most_expensive(weights: &[f64]) -> Option<(usize, usize)> {
    if weights.len() < 2 {
        return None;
    }
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&x, &y| weights[y].total_cmp(&weights[x]).then(x.cmp(&y)));
    Some((order[0], order[1]))
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Evaluates the synthetic rendering function at `point`.
///
/// With `noisy`, time is scaled by `1 + e_t` and `e_s` is added to SSIM; both
/// draws are seeded from the configuration seed and the point itself, so a
/// point always receives the same perturbation.
pub fn oracle_evaluate(cfg: &OracleConfig, point: &ConfigPoint, noisy: bool) -> Result<RenderOutcome> {
    cfg.validate(point)?;
    let mut out = cfg.ground_truth(point);
    if noisy && (cfg.noise_std_time > 0.0 || cfg.noise_std_ssim > 0.0) {
        let code = config_index(&cfg.space, &point.params)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.noise_seed(code, point));
        let eps_t = gaussian(&mut rng, cfg.noise_std_time);
        let eps_s = gaussian(&mut rng, cfg.noise_std_ssim);
        out.time_ms = (out.time_ms * (1.0 + eps_t)).max(0.0);
        out.ssim = (out.ssim + eps_s).clamp(0.0, 1.0);
    }
    Ok(out)
}

fn gaussian<R: Rng>(rng: &mut R, std: f64) -> f64 {
    if std == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, std).expect("finite std").sample(rng)
}

/// Draws `n_samples` configuration points uniformly and records their noisy outcomes.
pub fn generate_dataset(cfg: &OracleConfig, n_samples: usize) -> Result<Dataset> {
    if n_samples == 0 {
        return Err(Error::validation("n_samples must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(cfg.seed ^ 0x5A17_DA7A));
    let radices = cfg.space.radices();
    let mut samples = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let code = rng.random_range(0..cfg.space.total());
        let mut params = ParameterVector(smallvec::smallvec![0; radices.len()]);
        crate::space::unindex_into(&radices, code, &mut params.0);
        let lod = rng.random_range(0..cfg.lods.len());
        let cpu_freq = rng.random_range(cfg.cpu_range.min..=cfg.cpu_range.max).round();
        let gpu_freq = rng.random_range(cfg.gpu_range.min..=cfg.gpu_range.max).round();
        // rounding can step outside a fractional range bound
        let cpu_freq = cpu_freq.clamp(cfg.cpu_range.min.ceil(), cfg.cpu_range.max.floor());
        let gpu_freq = gpu_freq.clamp(cfg.gpu_range.min.ceil(), cfg.gpu_range.max.floor());
        let point = ConfigPoint { params, lod, cpu_freq, gpu_freq };
        let outcome = oracle_evaluate(cfg, &point, true)?;
        samples.push(Sample { point, outcome });
    }
    Ok(Dataset {
        space: cfg.space.clone(),
        lods: cfg.lods.clone(),
        cpu_range: cfg.cpu_range,
        gpu_range: cfg.gpu_range,
        samples,
        seed: cfg.seed,
    })
}
