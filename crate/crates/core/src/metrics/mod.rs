//! Path metrics, Fréchet distance, regression statistics, and latent
//! consistency analysis.

pub mod consistency;
pub mod frechet;
pub mod path;
pub mod report;
pub mod stats;

pub use consistency::{consistency_triples, ConsistencyReport, Correlations};
pub use frechet::frechet;
pub use path::{endpoint_vectors, estimate_start, perturbation_outcome, reconstruct, sed, spa, vrp, EndpointVectors, PerturbationOutcome};
pub use report::{MetricReport, PathAggregate, PathReport, PathRow, PerturbAggregate, PerturbReport, PerturbRow};
pub use stats::{angular_difference, pearson, regression_stats, regression_stats_lenient, spearman, RegressionStats};
