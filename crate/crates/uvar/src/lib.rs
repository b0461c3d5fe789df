//! Exact upper and lower variance under finitely many probability
//! measures.
//!
//! Describe a random variable by its mean and raw second moment under each
//! of `K` measures. The *upper variance* is the tightest worst-case
//! squared deviation any center can achieve against all of them at once;
//! the *lower variance* is the best case. Both have closed forms, solved
//! here exactly together with the optimal center `mu_star`, the worst-case
//! mixture `lambda_star`, and the candidate that attains them.
//!
//! The same engine doubles as an exact solver for the simplex quadratic
//! program `max lambda'kappa - (lambda'mu)^2` with arbitrary real `kappa`
//! (module [`qp`]), and two independent brute-force searches (module
//! [`oracle`]) exist solely to check it.
//!
//! ```
//! use uvar::{MomentEntry, MomentSet};
//!
//! // Daily return with mean +/-0.1 and variance 0.4 under two regimes:
//! // second moment = variance + mean^2 = 0.41 for both.
//! let ms = MomentSet::build(vec![
//!     MomentEntry::new("bull", 0.1, 0.41).unwrap(),
//!     MomentEntry::new("bear", -0.1, 0.41).unwrap(),
//! ])
//! .unwrap();
//! let report = uvar::exact::upper_variance(&ms).unwrap();
//! assert!((report.upper_variance - 0.41).abs() < 1e-12);
//! assert!((report.lower_variance - 0.40).abs() < 1e-12);
//! ```

pub mod estimate;
pub mod exact;
pub mod model;
pub mod oracle;
pub mod qp;

pub use estimate::{estimate_moments, two_pass_mean_variance, EstimateError, SampleTable};
pub use exact::{ExactError, PairCandidate, Parabola};
pub use model::{
    MeanInterval, MixtureWeights, ModelError, MomentEntry, MomentSet, VarianceReport, Witness,
};
pub use oracle::{GridSolution, MinimaxSearch, OracleConfig, OracleError};
pub use qp::{QpError, QpInstance, QpSolution};
