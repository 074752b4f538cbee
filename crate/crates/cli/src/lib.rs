//! Command-line harness around `ibse-core`: single solves, refinement and
//! timing studies, the kernel audit, and the factorization cache.

pub mod audit;
pub mod cache;
pub mod report;
pub mod sweep;

pub use cache::FactorCache;
pub use report::{write_csv, ReportRow, HEADER};
pub use sweep::{convergence, solve_one, timing, Sweep, SweepOptions};
