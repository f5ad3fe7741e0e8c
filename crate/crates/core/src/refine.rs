//! Collocation point sets and LOOCV-driven two-point refinement.

use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::{fit, loocv_indicator, Interpolant};

/// Strictly increasing points on `[a, b]` whose first and last entries are
/// the boundary points `a` and `b`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    points: Vec<f64>,
    a: f64,
    b: f64,
}

impl PointSet {
    pub fn new(points: Vec<f64>, a: f64, b: f64) -> Result<Self> {
        if !(a < b) {
            return Err(Error::invalid(format!("empty domain [{a}, {b}]")));
        }
        if points.len() < 2 {
            return Err(Error::invalid("a point set needs both boundary points"));
        }
        if points[0] != a || points[points.len() - 1] != b {
            return Err(Error::invalid(format!(
                "point set must start at {a} and end at {b}"
            )));
        }
        if let Some(w) = points.windows(2).find(|w| !(w[0] < w[1])) {
            return Err(Error::invalid(format!(
                "points not strictly increasing near {} and {}",
                w[0], w[1]
            )));
        }
        Ok(PointSet { points, a, b })
    }

    /// `n` equally spaced points including both endpoints.
    pub fn uniform(a: f64, b: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("uniform grid needs n >= 2"));
        }
        let h = (b - a) / (n - 1) as f64;
        let mut pts: Vec<f64> = (0..n).map(|i| a + i as f64 * h).collect();
        pts[n - 1] = b;
        PointSet::new(pts, a, b)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.points
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.points.iter()
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn interior(&self) -> &[f64] {
        &self.points[1..self.points.len() - 1]
    }

    pub fn boundary(&self) -> [f64; 2] {
        [self.a, self.b]
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.points
    }

    /// Half the smallest distance between two points.
    pub fn separation_distance(&self) -> f64 {
        separation_distance(&self.points).expect("a PointSet has at least two points")
    }
}

impl Index<usize> for PointSet {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.points[i]
    }
}

/// Half the minimum gap of a sorted point list.
pub fn separation_distance(points: &[f64]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::invalid("separation distance needs at least 2 points"));
    }
    Ok(0.5 * points.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    /// Threshold on the LOOCV indicator.
    #[serde(with = "crate::serde_ext::extended_f64")]
    pub tau: f64,
    pub max_iters: usize,
    /// Candidates closer than this to an existing or accepted point are dropped.
    pub min_separation: f64,
    pub max_points: usize,
}

impl RefineConfig {
    /// Defaults for a domain of length `domain_len`.
    pub fn new(tau: f64, domain_len: f64) -> Self {
        RefineConfig {
            tau,
            max_iters: 20,
            min_separation: 1e-10 * domain_len,
            max_points: 1000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::invalid(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.min_separation > 0.0) {
            return Err(Error::invalid("min_separation must be positive"));
        }
        if self.max_iters == 0 || self.max_points == 0 {
            return Err(Error::invalid("max_iters and max_points must be positive"));
        }
        Ok(())
    }
}

/// Inserts `x_k ± q` around every point whose indicator exceeds `tau`, where
/// `q` is the separation distance of the incoming set. Flagged points are
/// visited in ascending order; candidates outside `(a, b)` or within
/// `min_separation` of a kept point are dropped.
pub fn refine_once(ps: &PointSet, e: &[f64], cfg: &RefineConfig) -> Result<(PointSet, usize)> {
    if e.len() != ps.len() {
        return Err(Error::invalid(format!(
            "{} indicator entries for {} points",
            e.len(),
            ps.len()
        )));
    }
    let flagged: Vec<usize> = (0..e.len()).filter(|&k| e[k] > cfg.tau).collect();
    if flagged.is_empty() {
        return Ok((ps.clone(), 0));
    }
    let q = ps.separation_distance();
    let (a, b) = ps.domain();
    let existing = ps.as_slice();
    let near_existing = |c: f64| {
        let i = existing.partition_point(|&x| x < c);
        let below = if i > 0 { c - existing[i - 1] } else { f64::INFINITY };
        let above = if i < existing.len() { existing[i] - c } else { f64::INFINITY };
        below.min(above) < cfg.min_separation
    };

    let mut accepted: Vec<f64> = Vec::new();
    for &k in &flagged {
        for cand in [ps[k] - q, ps[k] + q] {
            if !(cand > a && cand < b) || near_existing(cand) {
                continue;
            }
            if accepted.iter().any(|&y| (y - cand).abs() < cfg.min_separation) {
                continue;
            }
            accepted.push(cand);
        }
    }
    let requested = ps.len() + accepted.len();
    if requested > cfg.max_points {
        return Err(Error::BudgetExhausted {
            requested,
            cap: cfg.max_points,
            flagged,
        });
    }
    let inserted = accepted.len();
    let mut merged = existing.to_vec();
    merged.extend(accepted);
    merged.sort_by(f64::total_cmp);
    Ok((PointSet::new(merged, a, b)?, inserted))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RefineStatus {
    /// Every indicator entry is at most `tau`.
    Converged,
    /// `max_iters` fits were made without meeting the threshold.
    MaxIters,
    /// Flagged points exist but no candidate survived deduplication.
    Stalled,
}

#[derive(Clone, Debug)]
pub struct RefineOutcome {
    pub points: PointSet,
    /// Interpolant fitted on the final set.
    pub interpolant: Interpolant,
    /// Provider values on the final set.
    pub values: Vec<f64>,
    /// Number of fits performed (the iteration counter `i`).
    pub iters: usize,
    pub max_indicator: f64,
    pub status: RefineStatus,
}

/// Repeats fit → indicator → [`refine_once`] until the indicator drops to
/// `tau` or a safety rail trips.
pub fn refine_loop<F>(
    start: &PointSet,
    mut values_provider: F,
    eps0: f64,
    cfg: &RefineConfig,
) -> Result<RefineOutcome>
where
    F: FnMut(&PointSet) -> Result<Vec<f64>>,
{
    cfg.validate()?;
    let mut ps = start.clone();
    let mut iter = 1;
    loop {
        let values = values_provider(&ps).map_err(|e| e.at_iteration(iter))?;
        let interpolant = fit(&ps, &values, eps0).map_err(|e| e.at_iteration(iter))?;
        let e = loocv_indicator(&interpolant).map_err(|e| e.at_iteration(iter))?;
        let max_indicator = e.iter().copied().fold(0.0, f64::max);
        let finish = |status, points: PointSet| RefineOutcome {
            points,
            interpolant,
            values,
            iters: iter,
            max_indicator,
            status,
        };
        if max_indicator <= cfg.tau {
            return Ok(finish(RefineStatus::Converged, ps));
        }
        if iter >= cfg.max_iters {
            return Ok(finish(RefineStatus::MaxIters, ps));
        }
        let (next, inserted) = refine_once(&ps, &e, cfg).map_err(|e| e.at_iteration(iter))?;
        if inserted == 0 {
            return Ok(finish(RefineStatus::Stalled, ps));
        }
        ps = next;
        iter += 1;
    }
}
