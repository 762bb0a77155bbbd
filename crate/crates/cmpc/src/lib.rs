//! Coded multi-party matrix multiplication over a prime field.
//!
//! Builds PolyDot-CMPC, AGE-CMPC and Entangled-CMPC shares, simulates the
//! source/worker/master protocol, and checks the closed-form worker counts
//! and resource costs against structural oracles.

pub mod cli;
pub mod codes;
pub mod costs;
pub mod counts;
pub mod error;
pub mod field;
pub mod partition;
pub mod powerset;
pub mod privacy;
pub mod protocol;

pub use codes::{build_share, coded_powers, evaluate_share, secret_powers, Scheme, SchemeParams, SharePolynomial, Side};
pub use costs::{audit, cost_report, predicted_costs, CostReport, Costs};
pub use counts::{baseline_counts, gamma_age, n_age, n_polydot, recovery_threshold, required_workers, BaselineCounts, WorkerCountBreakdown};
pub use error::{Error, Result};
pub use field::{EvalPointSet, FieldElement, PrimeModulus, DEFAULT_PRIME};
pub use partition::{assemble_product, split, BlockMatrix, Matrix, PartitionSpec, Role};
pub use powerset::{check_decodability, h_support, important_powers, minkowski_sum, PowerSet};
pub use privacy::{exhaustive_uniformity_test, masking_rank_check};
pub use protocol::{run_protocol, ProtocolConfig, Transcript};
