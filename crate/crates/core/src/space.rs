//! Discretized parameter spaces, hardware grids, LOD tiers and the
//! mixed-radix configuration code shared by every stage.

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// One tunable rendering parameter and its ordered levels.
///
/// Categorical options are stored as ordinal codes `0, 1, ...` in declared
/// order; `labels` keeps their display names when present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterDimension {
    pub name: String,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl ParameterDimension {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self { name: name.into(), values, labels: None }
    }

    /// A categorical dimension whose levels are the ordinal codes of `labels`.
    pub fn categorical(name: impl Into<String>, labels: &[&str]) -> Self {
        Self {
            name: name.into(),
            values: (0..labels.len()).map(|i| i as f64).collect(),
            labels: Some(labels.iter().map(|s| s.to_string()).collect()),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Human readable form of level `idx`.
    pub fn describe_level(&self, idx: usize) -> String {
        match self.labels.as_ref().and_then(|l| l.get(idx)) {
            Some(label) => label.clone(),
            None => format!("{}", self.values[idx]),
        }
    }
}

/// Per-dimension level indices; a digit vector over a [`ParameterSpace`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct ParameterVector(pub SmallVec<[usize; 8]>);

impl ParameterVector {
    pub fn new(indices: &[usize]) -> Self {
        Self(SmallVec::from_slice(indices))
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<usize>> for ParameterVector {
    fn from(v: Vec<usize>) -> Self {
        Self(SmallVec::from_vec(v))
    }
}

/// The full discretized parameter set together with its best-quality reference.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSpace {
    dimensions: Vec<ParameterDimension>,
    best_quality: ParameterVector,
    total: u32,
}

impl ParameterSpace {
    pub fn new(dimensions: Vec<ParameterDimension>, best_quality: Vec<usize>) -> Result<Self> {
        if dimensions.is_empty() {
            return Err(Error::validation("parameter space has no dimensions"));
        }
        if dimensions.len() > u8::MAX as usize {
            return Err(Error::validation("too many parameter dimensions"));
        }
        let mut total: u32 = 1;
        for (d, dim) in dimensions.iter().enumerate() {
            if dim.values.is_empty() {
                return Err(Error::validation(format!("dimension `{}` has no levels", dim.name)));
            }
            if dim.values.len() > u16::MAX as usize {
                return Err(Error::validation(format!("dimension `{}` has too many levels", dim.name)));
            }
            if dim.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::validation(format!("dimension `{}` has a non-finite level", dim.name)));
            }
            if dim.values.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::validation(format!(
                    "dimension `{}` levels are not strictly increasing",
                    dim.name
                )));
            }
            if let Some(labels) = &dim.labels {
                if labels.len() != dim.values.len() {
                    return Err(Error::validation(format!(
                        "dimension `{}` has {} labels for {} levels",
                        dim.name,
                        labels.len(),
                        dim.values.len()
                    )));
                }
            }
            if dim.name.is_empty() || dim.name.len() > u8::MAX as usize {
                return Err(Error::validation(format!("dimension {d} has an invalid name length")));
            }
            if dimensions[..d].iter().any(|o| o.name == dim.name) {
                return Err(Error::validation(format!("duplicate dimension name `{}`", dim.name)));
            }
            total = total
                .checked_mul(dim.values.len() as u32)
                .ok_or_else(|| Error::validation("combination count overflows 32 bits"))?;
        }
        let space = Self { dimensions, best_quality: ParameterVector::default(), total };
        let best = ParameterVector::from(best_quality);
        space.check(&best)?;
        Ok(Self { best_quality: best, ..space })
    }

    pub fn dimensions(&self) -> &[ParameterDimension] {
        &self.dimensions
    }

    pub fn dim_count(&self) -> usize {
        self.dimensions.len()
    }

    pub fn best_quality(&self) -> &ParameterVector {
        &self.best_quality
    }

    /// Number of parameter combinations.
    pub fn total(&self) -> u32 {
        self.total
    }

    pub fn radices(&self) -> SmallVec<[usize; 8]> {
        self.dimensions.iter().map(|d| d.len()).collect()
    }

    /// Checks dimension count and index bounds.
    pub fn check(&self, p: &ParameterVector) -> Result<()> {
        if p.len() != self.dimensions.len() {
            return Err(Error::validation(format!(
                "parameter vector has {} entries, space has {} dimensions",
                p.len(),
                self.dimensions.len()
            )));
        }
        for (d, (&i, dim)) in p.indices().iter().zip(&self.dimensions).enumerate() {
            if i >= dim.len() {
                return Err(Error::validation(format!(
                    "index {i} out of range for dimension {d} (`{}`, {} levels)",
                    dim.name,
                    dim.len()
                )));
            }
        }
        Ok(())
    }

    /// Level index of dimension `d` normalized to `[0, 1]`.
    #[inline]
    pub fn normalized_level(&self, d: usize, idx: usize) -> f64 {
        let n = self.dimensions[d].len();
        if n <= 1 {
            0.0
        } else {
            idx as f64 / (n - 1) as f64
        }
    }
}

/// Mixed-radix code of `p`, dimension 0 most significant.
pub fn config_index(space: &ParameterSpace, p: &ParameterVector) -> Result<u32> {
    space.check(p)?;
    let code = p
        .indices()
        .iter()
        .zip(space.dimensions())
        .fold(0u64, |acc, (&i, dim)| acc * dim.len() as u64 + i as u64);
    Ok(code as u32)
}

/// Inverse of [`config_index`].
pub fn config_unindex(space: &ParameterSpace, code: u32) -> Result<ParameterVector> {
    if code >= space.total() {
        return Err(Error::validation(format!(
            "config code {code} out of range (space has {} combinations)",
            space.total()
        )));
    }
    let mut out = ParameterVector(smallvec::smallvec![0; space.dim_count()]);
    unindex_into(&space.radices(), code, &mut out.0);
    Ok(out)
}

/// Decodes `code` against `radices` into `out`; `out.len()` must equal `radices.len()`.
#[inline]
pub(crate) fn unindex_into(radices: &[usize], mut code: u32, out: &mut [usize]) {
    for (slot, &r) in out.iter_mut().zip(radices).rev() {
        let r = r as u32;
        *slot = (code % r) as usize;
        code /= r;
    }
}

/// All parameter vectors in ascending code order.
pub fn enumerate_space(space: &ParameterSpace) -> impl Iterator<Item = ParameterVector> + '_ {
    let radices = space.radices();
    (0..space.total()).map(move |code| {
        let mut v = ParameterVector(smallvec::smallvec![0; radices.len()]);
        unindex_into(&radices, code, &mut v.0);
        v
    })
}

/// Index of the bin nearest to `observed`; equidistant ties go to the lower
/// bin and out-of-range values clamp to an endpoint.
#[inline]
pub fn snap_frequency(bins: &[u32], observed: f64) -> usize {
    debug_assert!(!bins.is_empty());
    let upper = bins.partition_point(|&b| (b as f64) < observed);
    if upper == 0 {
        return 0;
    }
    if upper == bins.len() {
        return bins.len() - 1;
    }
    let below = observed - bins[upper - 1] as f64;
    let above = bins[upper] as f64 - observed;
    if below <= above {
        upper - 1
    } else {
        upper
    }
}

/// Representative CPU and GPU clock frequencies (MHz) the lookup table is keyed on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardwareGrid {
    pub cpu_bins: Vec<u32>,
    pub gpu_bins: Vec<u32>,
}

impl HardwareGrid {
    pub fn new(cpu_bins: Vec<u32>, gpu_bins: Vec<u32>) -> Result<Self> {
        for (label, bins) in [("cpu", &cpu_bins), ("gpu", &gpu_bins)] {
            if bins.is_empty() {
                return Err(Error::validation(format!("{label} bin list is empty")));
            }
            if bins.len() > u16::MAX as usize {
                return Err(Error::validation(format!("{label} bin list is too long")));
            }
            if bins[0] == 0 {
                return Err(Error::validation(format!("{label} bins must be positive")));
            }
            if bins.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::validation(format!("{label} bins are not strictly increasing")));
            }
        }
        Ok(Self { cpu_bins, gpu_bins })
    }

    /// Evenly spaced bins from `from` to `to` inclusive.
    pub fn linspace(from: u32, to: u32, count: usize) -> Vec<u32> {
        match count {
            0 => Vec::new(),
            1 => vec![from],
            _ => (0..count)
                .map(|i| {
                    let t = i as f64 / (count - 1) as f64;
                    (from as f64 + t * (to as f64 - from as f64)).round() as u32
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LodLevel {
    pub name: String,
    /// Projection-area fraction in `(0, 1]`.
    pub threshold: f64,
}

/// Level-of-detail tiers, from full projection area downwards.
#[derive(Debug, Clone, PartialEq)]
pub struct LodSet {
    levels: Vec<LodLevel>,
}

impl LodSet {
    pub fn new(levels: Vec<LodLevel>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::validation("LOD set is empty"));
        }
        if levels.len() > u8::MAX as usize {
            return Err(Error::validation("too many LOD levels"));
        }
        if levels[0].threshold != 1.0 {
            return Err(Error::validation("first LOD threshold must be 1.0"));
        }
        if levels.iter().any(|l| !(l.threshold > 0.0 && l.threshold <= 1.0)) {
            return Err(Error::validation("LOD thresholds must lie in (0, 1]"));
        }
        if levels.windows(2).any(|w| w[0].threshold <= w[1].threshold) {
            return Err(Error::validation("LOD thresholds are not strictly decreasing"));
        }
        Ok(Self { levels })
    }

    pub fn from_thresholds(thresholds: &[f64]) -> Result<Self> {
        Self::new(
            thresholds
                .iter()
                .enumerate()
                .map(|(i, &threshold)| LodLevel { name: format!("lod{i}"), threshold })
                .collect(),
        )
    }

    pub fn levels(&self) -> &[LodLevel] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn threshold(&self, lod: usize) -> Option<f64> {
        self.levels.get(lod).map(|l| l.threshold)
    }

    pub fn thresholds(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.threshold).collect()
    }
}

/// One input tuple of the quantized rendering function.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigPoint {
    pub params: ParameterVector,
    pub lod: usize,
    pub cpu_freq: f64,
    pub gpu_freq: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOutcome {
    pub ssim: f64,
    pub time_ms: f64,
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn sss_space() -> ParameterSpace {
        ParameterSpace::new(
            vec![
                ParameterDimension::new("scattering_radius", (0..=20).map(|i| i as f64 / 10.0).collect()),
                ParameterDimension::new("sample_count", vec![13.0, 19.0, 27.0]),
                ParameterDimension::categorical("resolution_mode", &["half", "full"]),
                ParameterDimension::categorical("quality_channel", &["low", "high"]),
            ],
            vec![10, 2, 1, 1],
        )
        .unwrap()
    }

    #[test]
    fn sss_codes() {
        let s = sss_space();
        assert_eq!(s.total(), 252);
        assert_eq!(config_index(&s, &ParameterVector::new(&[0, 0, 0, 0])).unwrap(), 0);
        assert_eq!(config_index(&s, &ParameterVector::new(&[10, 2, 1, 1])).unwrap(), 131);
        assert_eq!(config_index(&s, &ParameterVector::new(&[20, 2, 1, 1])).unwrap(), 251);
        assert_eq!(config_unindex(&s, 0).unwrap().indices(), &[0, 0, 0, 0]);
        assert_eq!(config_unindex(&s, 131).unwrap().indices(), &[10, 2, 1, 1]);
        assert_eq!(config_unindex(&s, 251).unwrap().indices(), &[20, 2, 1, 1]);
    }

    #[test]
    fn index_errors() {
        let s = sss_space();
        assert!(matches!(config_index(&s, &ParameterVector::new(&[0, 0, 0])), Err(Error::Validation(_))));
        assert!(matches!(config_index(&s, &ParameterVector::new(&[21, 0, 0, 0])), Err(Error::Validation(_))));
        assert!(matches!(config_unindex(&s, 252), Err(Error::Validation(_))));
    }

    #[test]
    fn enumerate_in_code_order() {
        let s = sss_space();
        let all: Vec<_> = enumerate_space(&s).collect();
        assert_eq!(all.len(), 252);
        for (code, p) in all.iter().enumerate() {
            assert_eq!(config_index(&s, p).unwrap(), code as u32);
        }

        let single = ParameterSpace::new(vec![ParameterDimension::new("x", vec![1.0])], vec![0]).unwrap();
        let v: Vec<_> = enumerate_space(&single).collect();
        assert_eq!(v, vec![ParameterVector::new(&[0])]);
    }

    #[test]
    fn space_validation() {
        let dup = ParameterSpace::new(
            vec![ParameterDimension::new("a", vec![0.0]), ParameterDimension::new("a", vec![0.0])],
            vec![0, 0],
        );
        assert!(dup.is_err());
        let unsorted = ParameterSpace::new(vec![ParameterDimension::new("a", vec![1.0, 0.0])], vec![0]);
        assert!(unsorted.is_err());
        let bad_best = ParameterSpace::new(vec![ParameterDimension::new("a", vec![0.0, 1.0])], vec![2]);
        assert!(bad_best.is_err());
        let huge = ParameterSpace::new(
            (0..5).map(|i| ParameterDimension::new(format!("d{i}"), (0..1000).map(f64::from).collect())).collect(),
            vec![0; 5],
        );
        assert!(huge.is_err());
    }

    #[test]
    fn snapping() {
        let bins = [1000, 1500, 2000];
        assert_eq!(snap_frequency(&bins, 1490.0), 1);
        assert_eq!(snap_frequency(&bins, 1250.0), 0);
        assert_eq!(snap_frequency(&bins, 5000.0), 2);
        assert_eq!(snap_frequency(&bins, 1.0), 0);
        assert_eq!(snap_frequency(&bins, 1750.0), 1);
        assert_eq!(snap_frequency(&bins, 1750.5), 2);
        for (i, &b) in bins.iter().enumerate() {
            assert_eq!(snap_frequency(&bins, b as f64), i);
        }
    }

    #[test]
    fn grid_and_lod_validation() {
        assert!(HardwareGrid::new(vec![], vec![1]).is_err());
        assert!(HardwareGrid::new(vec![2, 1], vec![1]).is_err());
        assert!(HardwareGrid::new(vec![1, 2], vec![5]).is_ok());
        assert!(LodSet::from_thresholds(&[1.0, 0.5, 0.3]).is_ok());
        assert!(LodSet::from_thresholds(&[0.9, 0.5]).is_err());
        assert!(LodSet::from_thresholds(&[1.0, 0.5, 0.5]).is_err());
        assert_eq!(HardwareGrid::linspace(1000, 2000, 41)[1], 1025);
    }

    fn arb_space() -> impl Strategy<Value = ParameterSpace> {
        prop::collection::vec(1usize..12, 1..5).prop_map(|sizes| {
            let dims = sizes
                .iter()
                .enumerate()
                .map(|(i, &n)| ParameterDimension::new(format!("d{i}"), (0..n).map(|v| v as f64).collect()))
                .collect();
            ParameterSpace::new(dims, vec![0; sizes.len()]).unwrap()
        })
    }

    proptest! {
        #[test]
        fn index_roundtrip_exhaustive(space in arb_space()) {
            let mut seen = 0u32;
            for (expected, p) in enumerate_space(&space).enumerate() {
                let code = config_index(&space, &p).unwrap();
                prop_assert_eq!(code, expected as u32);
                prop_assert_eq!(config_unindex(&space, code).unwrap(), p);
                seen += 1;
            }
            prop_assert_eq!(seen, space.total());
        }

        #[test]
        fn snap_is_nearest(mut bins in prop::collection::btree_set(1u32..10_000, 1..20), f in 1.0f64..12_000.0) {
            let bins: Vec<u32> = std::mem::take(&mut bins).into_iter().collect();
            let i = snap_frequency(&bins, f);
            let best = bins.iter().map(|&b| (b as f64 - f).abs()).fold(f64::INFINITY, f64::min);
            prop_assert_eq!((bins[i] as f64 - f).abs(), best);
            prop_assert!(bins[..i].iter().all(|&b| (b as f64 - f).abs() > best));
        }
    }
}
