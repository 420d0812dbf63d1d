//! Small-lambda convergence diagnostics: Hausdorff proximity between true
//! orbit witnesses and the fast-slow sequences they should degenerate to.

use serde::Serialize;

use crate::linalg::Vec3;

use super::catalog::Catalog;
use super::enumerate::FastSlowOrbitSeq;
use super::shooting::{point_set_hausdorff, ConnectingOrbit};

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow {
    pub lambda: f64,
    pub hausdorff: f64,
    pub eta_lo_gap: f64,
    pub eta_hi_gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub p: usize,
    pub q: usize,
    pub rows: Vec<ConvergenceRow>,
    /// Nonincreasing within 5% slack, final below the proximity bound.
    pub decreasing: bool,
    pub final_hausdorff: f64,
}

/// Compare one fast-slow sequence against matching orbit witnesses across a
/// decreasing list of lambdas. `orbits_per_lambda[i]` holds the verified
/// orbits for `lambdas[i]`; the closest one is used at each level.
pub fn check_convergence(
    catalog: &Catalog,
    seq: &FastSlowOrbitSeq,
    lambdas: &[f64],
    orbits_per_lambda: &[Vec<ConnectingOrbit>],
) -> ConvergenceReport {
    let image = seq.image_points(catalog);
    let (eta_lo, eta_hi) = seq.eta_range();
    let mut rows = Vec::new();
    for (i, &lambda) in lambdas.iter().enumerate() {
        let mut best: Option<(f64, &ConnectingOrbit)> = None;
        for orbit in &orbits_per_lambda[i] {
            if orbit.p != seq.from || orbit.q != seq.to {
                continue;
            }
            let pts: Vec<Vec3> = orbit.witness.samples.iter().map(|(_, p)| p.to_vec3()).collect();
            let d = point_set_hausdorff(&pts, &image);
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, orbit));
            }
        }
        if let Some((d, orbit)) = best {
            let mut olo = f64::INFINITY;
            let mut ohi = f64::NEG_INFINITY;
            for (_, p) in &orbit.witness.samples {
                olo = olo.min(p.eta);
                ohi = ohi.max(p.eta);
            }
            rows.push(ConvergenceRow {
                lambda,
                hausdorff: d,
                eta_lo_gap: (olo - eta_lo).abs(),
                eta_hi_gap: (ohi - eta_hi).abs(),
            });
        }
    }
    let mut decreasing = rows.len() >= 2;
    for w in rows.windows(2) {
        if w[1].hausdorff > w[0].hausdorff * 1.05 + 1e-3 {
            decreasing = false;
        }
    }
    let final_hausdorff = rows.last().map_or(f64::INFINITY, |r| r.hausdorff);
    ConvergenceReport { p: seq.from, q: seq.to, rows, decreasing, final_hausdorff }
}

/// Largest distance from an orbit witness to a branch polyline: the tube
/// check for single-slow-segment sequences.
pub fn max_dist_to_branch(catalog: &Catalog, orbit: &ConnectingOrbit, branch: usize) -> f64 {
    let br = &catalog.manifold.branches[branch];
    let mut worst: f64 = 0.0;
    for (_, p) in &orbit.witness.samples {
        worst = worst.max(br.dist_to(p.to_vec3()));
    }
    worst
}
