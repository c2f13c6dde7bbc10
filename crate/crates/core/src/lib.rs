//! Multivariate circulant singular spectrum analysis.
//!
//! A panel of `M` series is embedded in a block-Hankel trajectory matrix,
//! projected on the eigenvectors of a block-circulant covariance estimate,
//! and split into components indexed by frequency `k` and subcomponent `m`.
//!
//! ```
//! use mcissa::{decompose, GroupingSpec, TimeSeriesPanel};
//!
//! let t: Vec<f64> = (0..48).map(|s| (s as f64 * std::f64::consts::PI / 6.0).cos()).collect();
//! let panel = TimeSeriesPanel::from_rows(&[t.clone(), t]).unwrap();
//! let groups = GroupingSpec::parse("cycle:period=12").unwrap();
//! let set = decompose(&panel, 12, &groups).unwrap();
//! assert_eq!(set.components.len(), 2); // cycle + residual
//! ```

pub mod analysis;
pub mod decomposition;
pub mod error;
pub mod grouping;
pub mod moments;
pub mod panel;
pub mod spectral;
pub mod synth;
pub mod verify;

pub use analysis::{
    denoise, eigenvector_weights, frequency_contributions, participation,
    series_subcomponent_contributions, subcomponent_contributions, ContributionTable,
    ParticipationIndex,
};
pub use decomposition::{
    decompose, decompose_univariate, decompose_with, embed, hankelize, uniqueness_check, McissaFit,
    ReconstructedSet, TrajectoryMatrix, UniquenessReport,
};
pub use error::{Error, ErrorClass, Result};
pub use grouping::{GroupingSpec, ResolvedGrouping, RESIDUAL};
pub use moments::{estimate_autocov, AutocovSequence, CirculantBlocks};
pub use panel::{demean, load_panel, read_panel, write_panel, IngestOptions, TimeSeriesPanel};
pub use spectral::{RealEigenbasis, SpectralBlockSet};
pub use synth::{generate, population_autocov_ar1, SignalRecipe, Synthetic};
