//! Brute-force verifiers, independent of the closed form.
//!
//! Two searches cross-check the solvers from different directions:
//!
//! * [`minimax_oracle`] minimizes `max_i f_i(mu)` over the mean interval
//!   by ternary search. The envelope is a max of equal-curvature convex
//!   parabolas, hence convex but kinked, so derivative-free bracketing is
//!   the robust choice.
//! * [`simplex_grid`] sweeps every weight vector with components in
//!   `{0, 1/n, ..., 1}` and keeps the best objective value.
//!
//! Neither reuses the pairwise-crossing structure of the exact solver, so
//! agreement between the two paths is meaningful evidence.

use rayon::prelude::*;
use thiserror::Error;

use crate::model::{MixtureWeights, MomentSet};
use crate::qp::QpInstance;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("`{label}` has negative variance (second moment below squared mean)")]
    NegativeVariance { label: String },
    #[error("grid search refused: {k} measures exceed the limit of {max}")]
    KTooLargeForGrid { k: usize, max: usize },
    #[error("objective overflows f64 on this instance")]
    ObjectiveOverflow,
    #[error("invalid oracle configuration: {detail}")]
    InvalidConfig { detail: String },
}

/// Knobs for both searches.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    /// Stop the ternary search once the bracket is this narrow.
    pub tol_mu: f64,
    /// Grid denominator `n`; weights are multiples of `1/n`.
    pub grid_n: u32,
    /// Refuse grid search above this many measures; the point count is
    /// `C(n + K - 1, K - 1)`.
    pub max_k_grid: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            tol_mu: 1e-12,
            grid_n: 200,
            max_k_grid: 5,
        }
    }
}

impl OracleConfig {
    fn validate(&self) -> Result<(), OracleError> {
        if !(self.tol_mu.is_finite() && self.tol_mu > 0.0) {
            return Err(OracleError::InvalidConfig {
                detail: format!("tol_mu must be positive and finite, got {}", self.tol_mu),
            });
        }
        if self.grid_n < 1 {
            return Err(OracleError::InvalidConfig {
                detail: "grid_n must be at least 1".into(),
            });
        }
        if self.max_k_grid < 1 {
            return Err(OracleError::InvalidConfig {
                detail: "max_k_grid must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// Result of the one-dimensional minimax search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimaxSearch {
    /// Envelope value at the returned center.
    pub value: f64,
    /// Midpoint of the final bracket.
    pub mu_star: f64,
    /// Ternary steps taken; each shrinks the bracket to two thirds.
    pub iterations: usize,
}

/// Minimizes `g(mu) = max_i (mu^2 - 2*mean_i*mu + kappa_i)` over the mean
/// interval by ternary search.
///
/// Same domain as the exact solver: every per-measure variance must be
/// nonnegative up to round-off. The bracket shrinks by 2/3 per iteration,
/// so the step count is bounded by `ceil(log_1.5(width / tol_mu)) + 1`.
pub fn minimax_oracle(ms: &MomentSet, cfg: &OracleConfig) -> Result<MinimaxSearch, OracleError> {
    cfg.validate()?;
    for entry in ms.entries() {
        let variance = entry.variance();
        if variance < -crate::exact::NEGATIVE_VARIANCE_TOL * 1.0_f64.max(entry.second_moment().abs())
        {
            return Err(OracleError::NegativeVariance {
                label: entry.label().to_string(),
            });
        }
    }

    let envelope = |mu: f64| {
        ms.entries()
            .iter()
            .map(|e| mu * mu - 2.0 * e.mean() * mu + e.second_moment())
            .fold(f64::NEG_INFINITY, f64::max)
    };

    let interval = ms.mean_interval();
    let (mut lo, mut hi) = (interval.lower(), interval.upper());
    if !envelope(lo).is_finite() || !envelope(hi).is_finite() {
        return Err(OracleError::ObjectiveOverflow);
    }
    let width = hi - lo;
    if width <= 0.0 {
        return Ok(MinimaxSearch {
            value: envelope(lo),
            mu_star: lo,
            iterations: 0,
        });
    }

    // The bracket shrinks by 2/3 per step, so this bound is exact for any
    // sane tolerance; the hard clamp keeps degenerate tolerances (denormal
    // tol_mu, or brackets stuck at float resolution) from spinning.
    let cap = ((width / cfg.tol_mu).ln() / 1.5_f64.ln())
        .ceil()
        .clamp(0.0, 4096.0) as usize
        + 1;
    let mut iterations = 0;
    while hi - lo > cfg.tol_mu && iterations < cap {
        let third = (hi - lo) / 3.0;
        let left = lo + third;
        let right = hi - third;
        if envelope(left) < envelope(right) {
            hi = right;
        } else {
            lo = left;
        }
        iterations += 1;
    }

    let mu_star = 0.5 * (lo + hi);
    Ok(MinimaxSearch {
        value: envelope(mu_star),
        mu_star,
        iterations,
    })
}

/// Result of the exhaustive grid sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSolution {
    /// Best objective value over the grid. Never exceeds the true simplex
    /// maximum, and trails it by at most `lipschitz_bound / grid_n`.
    pub value: f64,
    /// The best grid point, in the instance's input index order; the
    /// lexicographically first among ties.
    pub weights: MixtureWeights,
    /// `2 * (max |kappa| + max |mu|^2)`, a crude bound on the objective's
    /// gradient over the simplex; `lipschitz_bound / grid_n` bounds the
    /// gap to the true maximum.
    pub lipschitz_bound: f64,
}

/// Sweeps every weight vector with components in `{0, 1/n, ..., 1}`
/// summing to one and returns the best.
///
/// Enumeration order is lexicographic in the integer composition vectors
/// and ties keep the first, so the result is deterministic. The sweep over
/// the leading coordinate runs in parallel; the reduction preserves the
/// lexicographic rule.
pub fn simplex_grid(inst: &QpInstance, cfg: &OracleConfig) -> Result<GridSolution, OracleError> {
    cfg.validate()?;
    let k = inst.len();
    if k > cfg.max_k_grid {
        return Err(OracleError::KTooLargeForGrid {
            k,
            max: cfg.max_k_grid,
        });
    }

    let max_abs_mu = inst.mu().iter().fold(0.0_f64, |acc, &x| acc.max(x.abs()));
    let max_abs_kappa = inst
        .kappa()
        .iter()
        .fold(0.0_f64, |acc, &x| acc.max(x.abs()));
    let lipschitz_bound = 2.0 * (max_abs_kappa + max_abs_mu * max_abs_mu);
    if !lipschitz_bound.is_finite() {
        return Err(OracleError::ObjectiveOverflow);
    }

    let n = cfg.grid_n;
    let grid = GridScan {
        mu: inst.mu(),
        kappa: inst.kappa(),
        inv_n: 1.0 / n as f64,
    };

    let (value, composition) = if k == 1 {
        (inst.kappa()[0] - inst.mu()[0] * inst.mu()[0], vec![n])
    } else if k == 2 {
        let value = grid.line_max(n, 0.0, 0.0);
        let t = grid
            .line_find(n, 0.0, 0.0, value)
            .expect("grid recovery must find the recorded maximum");
        (value, vec![t, n - t])
    } else {
        // One slab per leading coordinate; `collect` keeps slab order, so
        // scanning for the first slab that attains the maximum preserves
        // the lexicographic-first rule.
        let slab_maxima: Vec<f64> = (0..=n)
            .into_par_iter()
            .map(|c0| {
                let cf = c0 as f64;
                grid.subtree_max(1, k, n - c0, cf * grid.mu[0], cf * grid.kappa[0])
            })
            .collect();
        let value = slab_maxima
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let c0 = slab_maxima
            .iter()
            .position(|&m| m == value)
            .expect("some slab attains the maximum") as u32;
        let cf = c0 as f64;
        let mut prefix = vec![c0];
        grid.subtree_find(
            1,
            k,
            n - c0,
            cf * grid.mu[0],
            cf * grid.kappa[0],
            value,
            &mut prefix,
        )
        .expect("grid recovery must find the recorded maximum");
        (value, prefix)
    };

    let weights: Vec<f64> = composition
        .iter()
        .map(|&c| c as f64 / n as f64)
        .collect();
    let weights = MixtureWeights::new(weights).expect("grid compositions lie on the simplex");

    Ok(GridSolution {
        value,
        weights,
        lipschitz_bound,
    })
}

/// Objective at one point of a line, parameterized by the free count `cf`
/// (as a float): mean and kappa move linearly along the line. Every grid
/// evaluation goes through this one expression so the parallel max pass
/// and the sequential recovery pass see bit-identical values.
#[inline(always)]
fn grid_point(m0: f64, k0: f64, dm: f64, dk: f64, cf: f64) -> f64 {
    let m = m0 + cf * dm;
    k0 + cf * dk - m * m
}

/// `max` as a plain comparison select. Inputs are never NaN here (the
/// accumulator starts at -inf and NaN candidates lose the comparison), and
/// the select form compiles to a bare vector max.
#[inline(always)]
fn sel_max(best: f64, candidate: f64) -> f64 {
    if candidate > best {
        candidate
    } else {
        best
    }
}

/// Max objective over one line, `t = 0..=rem`. Eight independent lanes
/// keep the loop vectorizable; merging lanes with `max` is exact, so the
/// result equals the sequential maximum bit for bit. A free function on
/// scalars: the hot loop must not read through `&self`.
fn line_max_kernel(rem: u32, m0: f64, k0: f64, dm: f64, dk: f64) -> f64 {
    let lim = rem as u64 + 1;
    let mut lanes = [f64::NEG_INFINITY; 8];
    let mut c = 0u64;
    let mut cf = 0.0_f64;
    while c + 8 <= lim {
        lanes[0] = sel_max(lanes[0], grid_point(m0, k0, dm, dk, cf));
        lanes[1] = sel_max(lanes[1], grid_point(m0, k0, dm, dk, cf + 1.0));
        lanes[2] = sel_max(lanes[2], grid_point(m0, k0, dm, dk, cf + 2.0));
        lanes[3] = sel_max(lanes[3], grid_point(m0, k0, dm, dk, cf + 3.0));
        lanes[4] = sel_max(lanes[4], grid_point(m0, k0, dm, dk, cf + 4.0));
        lanes[5] = sel_max(lanes[5], grid_point(m0, k0, dm, dk, cf + 5.0));
        lanes[6] = sel_max(lanes[6], grid_point(m0, k0, dm, dk, cf + 6.0));
        lanes[7] = sel_max(lanes[7], grid_point(m0, k0, dm, dk, cf + 7.0));
        c += 8;
        cf += 8.0;
    }
    let mut best = sel_max(
        sel_max(sel_max(lanes[0], lanes[1]), sel_max(lanes[2], lanes[3])),
        sel_max(sel_max(lanes[4], lanes[5]), sel_max(lanes[6], lanes[7])),
    );
    while c < lim {
        best = sel_max(best, grid_point(m0, k0, dm, dk, cf));
        c += 1;
        cf += 1.0;
    }
    best
}

/// Shared state for the composition sweep.
struct GridScan<'a> {
    mu: &'a [f64],
    kappa: &'a [f64],
    inv_n: f64,
}

impl GridScan<'_> {
    /// Setup for the line with `rem` mass split between the last two
    /// coordinates: values at `t = 0` and per-unit increments.
    #[inline(always)]
    fn line_setup(&self, rem: u32, prefix_mu: f64, prefix_kappa: f64) -> [f64; 4] {
        let k = self.mu.len();
        let (mu_a, mu_b) = (self.mu[k - 2], self.mu[k - 1]);
        let (ka_a, ka_b) = (self.kappa[k - 2], self.kappa[k - 1]);
        let remf = rem as f64;
        let m0 = (prefix_mu + remf * mu_b) * self.inv_n;
        let k0 = (prefix_kappa + remf * ka_b) * self.inv_n;
        let dm = (mu_a - mu_b) * self.inv_n;
        let dk = (ka_a - ka_b) * self.inv_n;
        [m0, k0, dm, dk]
    }

    fn line_max(&self, rem: u32, prefix_mu: f64, prefix_kappa: f64) -> f64 {
        let [m0, k0, dm, dk] = self.line_setup(rem, prefix_mu, prefix_kappa);
        line_max_kernel(rem, m0, k0, dm, dk)
    }

    /// First `t` on the line whose objective equals `target` exactly.
    fn line_find(&self, rem: u32, prefix_mu: f64, prefix_kappa: f64, target: f64) -> Option<u32> {
        let [m0, k0, dm, dk] = self.line_setup(rem, prefix_mu, prefix_kappa);
        (0..=rem).find(|&t| grid_point(m0, k0, dm, dk, t as f64) == target)
    }

    /// Max over all compositions extending the prefix fixed up to `depth`.
    fn subtree_max(&self, depth: usize, k: usize, rem: u32, prefix_mu: f64, prefix_kappa: f64) -> f64 {
        if depth == k - 2 {
            return self.line_max(rem, prefix_mu, prefix_kappa);
        }
        let mut best = f64::NEG_INFINITY;
        for c in 0..=rem {
            let cf = c as f64;
            best = best.max(self.subtree_max(
                depth + 1,
                k,
                rem - c,
                prefix_mu + cf * self.mu[depth],
                prefix_kappa + cf * self.kappa[depth],
            ));
        }
        best
    }

    /// Lexicographically first composition in the subtree whose objective
    /// equals `target`; extends `prefix` in place with the remaining
    /// coordinates.
    #[allow(clippy::too_many_arguments)]
    fn subtree_find(
        &self,
        depth: usize,
        k: usize,
        rem: u32,
        prefix_mu: f64,
        prefix_kappa: f64,
        target: f64,
        prefix: &mut Vec<u32>,
    ) -> Option<()> {
        if depth == k - 2 {
            let t = self.line_find(rem, prefix_mu, prefix_kappa, target)?;
            prefix.push(t);
            prefix.push(rem - t);
            return Some(());
        }
        for c in 0..=rem {
            let cf = c as f64;
            prefix.push(c);
            if self
                .subtree_find(
                    depth + 1,
                    k,
                    rem - c,
                    prefix_mu + cf * self.mu[depth],
                    prefix_kappa + cf * self.kappa[depth],
                    target,
                    prefix,
                )
                .is_some()
            {
                return Some(());
            }
            prefix.pop();
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MomentEntry, MomentSet};

    fn set(entries: &[(&str, f64, f64)]) -> MomentSet {
        MomentSet::build(
            entries
                .iter()
                .map(|&(label, mean, kappa)| MomentEntry::new(label, mean, kappa).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn minimax_two_regime_example() {
        let ms = set(&[("bear", -0.1, 0.41), ("bull", 0.1, 0.41)]);
        let found = minimax_oracle(&ms, &OracleConfig::default()).unwrap();
        assert!((found.value - 0.41).abs() <= 1e-9);
        assert!(found.mu_star.abs() <= 1e-9);
    }

    #[test]
    fn minimax_degenerate_interval() {
        let ms = set(&[("only", 3.0, 13.0)]);
        let found = minimax_oracle(&ms, &OracleConfig::default()).unwrap();
        assert_eq!(found.value, 4.0);
        assert_eq!(found.mu_star, 3.0);
        assert_eq!(found.iterations, 0);
    }

    #[test]
    fn minimax_iteration_bound() {
        let ms = set(&[("a", -10.0, 105.0), ("b", 10.0, 105.0)]);
        let cfg = OracleConfig::default();
        let found = minimax_oracle(&ms, &cfg).unwrap();
        let width = 20.0_f64;
        let cap = ((width / cfg.tol_mu).ln() / 1.5_f64.ln()).ceil() as usize + 1;
        assert!(found.iterations <= cap, "{} > {cap}", found.iterations);
    }

    #[test]
    fn minimax_rejects_negative_variance() {
        let ms = set(&[("bad", 2.0, 1.0)]);
        assert_eq!(
            minimax_oracle(&ms, &OracleConfig::default()),
            Err(OracleError::NegativeVariance {
                label: "bad".into()
            })
        );
    }

    #[test]
    fn grid_two_regime_example_coarse() {
        // n = 2 enumerates (1,0), (1/2,1/2), (0,1); the midpoint wins.
        let inst = QpInstance::new(vec![-0.1, 0.1], vec![0.41, 0.41]).unwrap();
        let cfg = OracleConfig {
            grid_n: 2,
            ..OracleConfig::default()
        };
        let sol = simplex_grid(&inst, &cfg).unwrap();
        assert!((sol.value - 0.41).abs() <= 1e-12);
        assert_eq!(sol.weights.weights(), [0.5, 0.5]);
    }

    #[test]
    fn grid_single_measure() {
        let inst = QpInstance::new(vec![2.0], vec![3.0]).unwrap();
        let sol = simplex_grid(&inst, &OracleConfig::default()).unwrap();
        assert_eq!(sol.value, -1.0);
        assert_eq!(sol.weights.weights(), [1.0]);
    }

    #[test]
    fn grid_refuses_large_k() {
        let inst = QpInstance::new(vec![0.0; 6], vec![1.0; 6]).unwrap();
        assert_eq!(
            simplex_grid(&inst, &OracleConfig::default()),
            Err(OracleError::KTooLargeForGrid { k: 6, max: 5 })
        );
    }

    #[test]
    fn grid_tie_keeps_lexicographically_first() {
        // Constant objective: every grid point ties at 1, so the winner is
        // the lex-first composition (0, n), i.e. all mass on the second
        // coordinate.
        let inst = QpInstance::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let cfg = OracleConfig {
            grid_n: 4,
            ..OracleConfig::default()
        };
        let sol = simplex_grid(&inst, &cfg).unwrap();
        assert_eq!(sol.value, 1.0);
        assert_eq!(sol.weights.weights(), [0.0, 1.0]);
    }

    #[test]
    fn grid_three_way_tie_lexicographic() {
        let inst = QpInstance::new(vec![0.0, 0.0, 0.0], vec![2.0, 2.0, 2.0]).unwrap();
        let cfg = OracleConfig {
            grid_n: 3,
            ..OracleConfig::default()
        };
        let sol = simplex_grid(&inst, &cfg).unwrap();
        assert_eq!(sol.weights.weights(), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn grid_matches_hand_enumeration() {
        // K = 3, n = 3: 10 compositions, checked by hand fold.
        let inst = QpInstance::new(vec![0.0, 1.0, -1.0], vec![0.5, 1.5, 0.25]).unwrap();
        let cfg = OracleConfig {
            grid_n: 3,
            ..OracleConfig::default()
        };
        let sol = simplex_grid(&inst, &cfg).unwrap();

        let n = 3u32;
        let mut best = f64::NEG_INFINITY;
        for c0 in 0..=n {
            for c1 in 0..=(n - c0) {
                let c2 = n - c0 - c1;
                let w = [
                    c0 as f64 / n as f64,
                    c1 as f64 / n as f64,
                    c2 as f64 / n as f64,
                ];
                best = best.max(inst.objective(&w));
            }
        }
        assert!((sol.value - best).abs() <= 1e-15);
    }

    #[test]
    fn invalid_config_rejected() {
        let inst = QpInstance::new(vec![0.0], vec![1.0]).unwrap();
        let cfg = OracleConfig {
            tol_mu: 0.0,
            ..OracleConfig::default()
        };
        assert!(matches!(
            simplex_grid(&inst, &cfg),
            Err(OracleError::InvalidConfig { .. })
        ));
        let ms = set(&[("a", 0.0, 1.0)]);
        assert!(matches!(
            minimax_oracle(&ms, &cfg),
            Err(OracleError::InvalidConfig { .. })
        ));
    }
}
