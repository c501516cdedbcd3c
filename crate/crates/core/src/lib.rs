//! Rendering parameter selection distilled into a lookup table.
//!
//! Two boosted-tree regressors predict SSIM and frame time from rendering
//! parameters, LOD and clock frequencies. For every (LOD, CPU bin, GPU bin)
//! cell the fastest share of configurations is kept and the best predicted
//! quality among them is stored, bit-packed, in a [`LookupTable`]. At run time
//! a query snaps the observed frequencies to the grid and reads one entry.

pub mod config;
pub mod dataset;
pub mod error;
pub mod gbdt;
pub mod harness;
pub mod lut;
pub mod oracle;
pub mod runtime;
pub mod scalar;
pub mod space;

pub use dataset::{Dataset, FreqRange, Sample};
pub use error::{Error, Result};
pub use gbdt::{FeatureMatrix, GbdtModel, RegressionTree, Target, TrainConfig};
pub use lut::{LookupTable, LutBuildConfig};
pub use oracle::{oracle_evaluate, OracleConfig};
pub use runtime::{query, QueryResult};
pub use scalar::Scalar;
pub use space::{
    config_index, config_unindex, enumerate_space, snap_frequency, ConfigPoint, HardwareGrid, LodSet,
    ParameterDimension, ParameterSpace, ParameterVector, RenderOutcome,
};

/// Double-precision predictor, the default for the pipeline.
pub type Model = GbdtModel<f64>;
/// Single-precision predictor.
pub type ModelF32 = GbdtModel<f32>;
pub type Tree = RegressionTree<f64>;
pub type Features = FeatureMatrix<f64>;
