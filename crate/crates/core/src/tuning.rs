//! The tuning set: zeros of a scalar constraint `g(chi)` (the reactive
//! power as a function of the Lagrange multiplier), and the choice of the
//! multiplier of least magnitude.
//!
//! The constraint is injected by the caller. Tangential zeros (no sign
//! change) are found only if they land exactly on a grid point.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootSearch {
    pub lo: f64,
    pub hi: f64,
    pub grid_n: usize,
    pub tol: f64,
}

impl RootSearch {
    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(Error::InvalidInput(format!(
                "search interval [{}, {}] must be finite with lo < hi",
                self.lo, self.hi
            )));
        }
        if self.grid_n < 2 {
            return Err(Error::InvalidInput(format!("grid_n must be >= 2, got {}", self.grid_n)));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidInput(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }

    fn grid(&self) -> Vec<f64> {
        let n = self.grid_n - 1;
        (0..=n)
            .map(|i| {
                if i == n {
                    self.hi
                } else {
                    self.lo + (self.hi - self.lo) * (i as f64 / n as f64)
                }
            })
            .collect()
    }
}

/// `chi mu omega < k^2`, i.e. a real tuned wavenumber.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Admissibility {
    pub k: f64,
    pub mu_omega: f64,
}

impl Admissibility {
    pub fn admits(&self, chi: f64) -> bool {
        chi * self.mu_omega < self.k * self.k
    }
}

/// Sorted, strictly increasing zeros of the constraint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiSet {
    roots: Vec<f64>,
    bracket_tol: f64,
    rejected: Vec<f64>,
}

impl ChiSet {
    pub fn from_roots(mut roots: Vec<f64>, bracket_tol: f64) -> Result<Self> {
        if roots.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidInput("tuning set contains a non-finite value".into()));
        }
        roots.sort_by(f64::total_cmp);
        roots.dedup();
        Ok(ChiSet {
            roots,
            bracket_tol,
            rejected: Vec::new(),
        })
    }

    pub fn roots(&self) -> &[f64] {
        &self.roots
    }

    /// Roots found on the grid but excluded for violating admissibility.
    pub fn rejected(&self) -> &[f64] {
        &self.rejected
    }

    pub fn bracket_tol(&self) -> f64 {
        self.bracket_tol
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }
}

/// Sign-change zeros of `g` on an evenly spaced grid over `[lo, hi]`, each
/// refined by bisection to a bracket no wider than `tol`.
pub fn find_constraint_roots<G>(
    g: G,
    search: &RootSearch,
    admissible: Option<Admissibility>,
    exec: Execution,
) -> Result<ChiSet>
where
    G: Fn(f64) -> f64 + Sync + Send,
{
    search.validate()?;
    let xs = search.grid();
    let ys = exec.map(&xs, |&x| g(x));
    if let Some(i) = ys.iter().position(|y| !y.is_finite()) {
        return Err(Error::ConstraintEvaluation { chi: xs[i] });
    }

    let mut found = Vec::new();
    for i in 0..xs.len() {
        if ys[i] == 0.0 {
            found.push(xs[i]);
            continue;
        }
        if i + 1 < xs.len() && ys[i + 1] != 0.0 && (ys[i] < 0.0) != (ys[i + 1] < 0.0) {
            found.push(bisect(&g, xs[i], xs[i + 1], ys[i], search.tol)?);
        }
    }

    let (roots, rejected): (Vec<f64>, Vec<f64>) = match admissible {
        Some(adm) => found.into_iter().partition(|&c| adm.admits(c)),
        None => (found, Vec::new()),
    };
    let mut set = ChiSet::from_roots(roots, search.tol)?;
    set.rejected = rejected;
    Ok(set)
}

fn bisect<G: Fn(f64) -> f64>(g: &G, mut lo: f64, mut hi: f64, mut g_lo: f64, tol: f64) -> Result<f64> {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let g_mid = g(mid);
        if !g_mid.is_finite() {
            return Err(Error::ConstraintEvaluation { chi: mid });
        }
        if g_mid == 0.0 {
            return Ok(mid);
        }
        if (g_mid < 0.0) == (g_lo < 0.0) {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The element of least `|chi|`; `+chi` wins an exact tie with `-chi`.
pub fn select_chi0(xi: &ChiSet) -> Result<f64> {
    xi.roots
        .iter()
        .copied()
        .reduce(|best, c| {
            if c.abs() < best.abs() || (c.abs() == best.abs() && c > best) {
                c
            } else {
                best
            }
        })
        .ok_or(Error::NoTunedSolution)
}

/// Piecewise-linear constraint through tabulated `(chi, g)` pairs.
/// Evaluates to NaN outside the tabulated range.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedConstraint {
    points: Vec<(f64, f64)>,
}

impl TabulatedConstraint {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidInput("constraint table needs at least two points".into()));
        }
        if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::InvalidInput("constraint table contains non-finite values".into()));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidInput(
                "constraint table chi values must be strictly increasing".into(),
            ));
        }
        Ok(TabulatedConstraint { points })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.points[0].0, self.points[self.points.len() - 1].0)
    }

    pub fn eval(&self, chi: f64) -> f64 {
        let (lo, hi) = self.domain();
        if !(lo..=hi).contains(&chi) {
            return f64::NAN;
        }
        let i = self.points.partition_point(|p| p.0 <= chi);
        if i == self.points.len() {
            return self.points[i - 1].1;
        }
        let (x0, y0) = self.points[i - 1];
        let (x1, y1) = self.points[i];
        y0 + (y1 - y0) * (chi - x0) / (x1 - x0)
    }
}
