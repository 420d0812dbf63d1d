//! End-to-end orchestration: prepare a problem (critical points, slow
//! manifold, level set, assumption gate), build the fast-orbit catalog,
//! count boundaries across lambda with structure-aware seeding, and assemble
//! the three chain complexes the comparison theorems talk about.

use serde::Serialize;

use crate::critical::{check_assumptions, find_crit_f, AssumptionReport, CritPointF};
use crate::field::Problem;
use crate::homology::{
    build_restricted_complex, LevelSetGeometry, Provenance, Z2ChainComplex, Z2Matrix,
};
use crate::linalg::Vec3;
use crate::orbits::{
    build_catalog, count_boundary_from, zero_boundary_counts, Catalog, ConnectingOrbit,
    CountOutcome, FastSlowOrbitSeq, OrbitSeed, Segment, ShootParams,
};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Critical(#[from] crate::critical::CriticalError),
    #[error(transparent)]
    Slow(#[from] crate::slow::SlowError),
    #[error(transparent)]
    Homology(#[from] crate::homology::HomologyError),
    #[error(transparent)]
    Catalog(#[from] crate::orbits::CatalogError),
    #[error(transparent)]
    Enumerate(#[from] crate::orbits::EnumerateError),
    #[error(transparent)]
    Shoot(#[from] crate::orbits::ShootError),
    #[error("assumption gate failed: {0}")]
    AssumptionsFailed(String),
}

/// Prepared problem context shared by every downstream command.
pub struct Workspace {
    pub problem: Problem,
    pub crit: Vec<CritPointF>,
    pub manifold: crate::slow::SlowManifold,
    pub restricted: Z2ChainComplex,
    pub level_set: LevelSetGeometry,
    pub assumptions: AssumptionReport,
}

/// Solve the critical set, fix the confinement bound from it, trace the slow
/// manifold, trace the level set, and run the assumption checker.
pub fn prepare(mut problem: Problem, grid_n: usize) -> Result<Workspace, PipelineError> {
    let crit = find_crit_f(&problem, grid_n)?;
    // provisional trace to find the folds, then fix the confinement bound
    let provisional = crate::slow::trace_slow_manifold(&problem, &crit, 25)?;
    let mut eta_extent: f64 = 0.0;
    for c in &crit {
        eta_extent = eta_extent.max(c.point.eta.abs());
    }
    for f in &provisional.folds {
        eta_extent = eta_extent.max(f.point.eta.abs());
    }
    problem.eta_max = 3.0 + eta_extent;
    let manifold = crate::slow::trace_slow_manifold(&problem, &crit, 25)?;
    let (restricted, level_set) = build_restricted_complex(&problem, 48)?;
    let assumptions = check_assumptions(&problem, &crit, &manifold.branches, &manifold.folds, Some(&level_set));
    Ok(Workspace { problem, crit, manifold, restricted, level_set, assumptions })
}

pub fn require_assumptions(ws: &Workspace) -> Result<(), PipelineError> {
    if ws.assumptions.all_checkable_pass() {
        Ok(())
    } else {
        let failing: Vec<&str> = ws
            .assumptions
            .items
            .iter()
            .filter(|i| i.status == crate::critical::AssumptionStatus::Fail)
            .map(|i| i.label)
            .collect();
        Err(PipelineError::AssumptionsFailed(failing.join(", ")))
    }
}

/// Build the lambda = 0 catalog (handle-slides, cusps, jumps).
pub fn catalog(ws: &Workspace, n_scan: usize) -> Result<Catalog, PipelineError> {
    Ok(build_catalog(&ws.problem, ws.crit.clone(), ws.manifold.clone(), n_scan)?)
}

/// Match each critical point of F to its restricted critical point by
/// position: returns per-crit-id the restricted id.
pub fn restricted_bijection(ws: &Workspace) -> Option<Vec<usize>> {
    let mut out = Vec::with_capacity(ws.crit.len());
    for c in &ws.crit {
        let hit = ws
            .level_set
            .crits
            .iter()
            .find(|r| crate::field::torus_dist(r.x, c.point.x) < 1e-5)?;
        if hit.index + 1 != c.index_f {
            return None;
        }
        out.push(hit.id);
    }
    Some(out)
}

/// Assemble a chain complex over the critical set from mod-2 pair counts.
pub fn complex_from_counts(
    crit: &[CritPointF],
    counts: &[(usize, usize, usize)],
    provenance: Provenance,
) -> Z2ChainComplex {
    let max_deg = crit.iter().map(|c| c.index_f).max().unwrap_or(0);
    let mut generators: Vec<Vec<usize>> = vec![Vec::new(); max_deg + 1];
    for c in crit {
        generators[c.index_f].push(c.id);
    }
    let mut boundary = vec![Z2Matrix::zeros(0, 0)];
    for k in 1..=max_deg {
        let rows = generators[k - 1].len();
        let cols = generators[k].len();
        let mut m = Z2Matrix::zeros(rows, cols);
        for &(p, q, parity) in counts {
            if parity % 2 == 0 {
                continue;
            }
            if crit[p].index_f == k && crit[q].index_f == k - 1 {
                let col = generators[k].iter().position(|&id| id == p).unwrap();
                let row = generators[k - 1].iter().position(|&id| id == q).unwrap();
                m.set(row, col, true);
            }
        }
        boundary.push(m);
    }
    Z2ChainComplex::new(generators, boundary, provenance)
}

/// Seeds for the polisher from the restricted gradient arcs: for an index-2
/// critical point, the two downhill arcs of the restricted flow starting at
/// its position, lifted to (x, zeta(x)).
pub fn seeds_from_restricted(ws: &Workspace, p: &CritPointF) -> Vec<OrbitSeed> {
    let mut seeds = Vec::new();
    let Some(rc_p) = ws
        .level_set
        .crits
        .iter()
        .find(|r| crate::field::torus_dist(r.x, p.point.x) < 1e-5)
    else {
        return seeds;
    };
    if rc_p.index != 1 {
        return seeds;
    }
    let ring: Vec<&crate::homology::RestrictedCrit> = ws
        .level_set
        .crits
        .iter()
        .filter(|c| c.component == rc_p.component)
        .collect();
    let poly = &ws.level_set.components[rc_p.component];
    let pos = ring.iter().position(|c| c.id == rc_p.id).unwrap();
    for dir in [1usize, ring.len() - 1] {
        let target = ring[(pos + dir) % ring.len()];
        // find the q critical point of F sitting at the target position
        let Some(qc) = ws
            .crit
            .iter()
            .find(|c| crate::field::torus_dist(c.point.x, target.x) < 1e-5)
        else {
            continue;
        };
        // walk the polyline from rc_p to target in the chosen direction
        let n = poly.len();
        let nearest = |x: [f64; 2]| -> usize {
            (0..n)
                .min_by(|&i, &j| {
                    crate::field::torus_dist(poly[i], x)
                        .partial_cmp(&crate::field::torus_dist(poly[j], x))
                        .unwrap()
                })
                .unwrap()
        };
        let i0 = nearest(rc_p.x);
        let i1 = nearest(target.x);
        let step: i64 = if dir == 1 { 1 } else { -1 };
        let mut path: Vec<(f64, Vec3)> = Vec::new();
        let mut t = 0.0;
        let mut i = i0 as i64;
        let mut guard = 0;
        loop {
            let idx = ((i % n as i64 + n as i64) % n as i64) as usize;
            let x = poly[idx];
            let zeta = ws.problem.zeta(x).unwrap_or(p.point.eta);
            let d_from_p = crate::field::torus_dist(x, rc_p.x);
            if d_from_p > 1e-4 || path.is_empty() {
                path.push((t, [x[0], x[1], zeta]));
            }
            if idx == i1 {
                break;
            }
            // local restricted speed, floored to keep times finite
            let speed = ws.problem.tangential_df(x).abs().max(2e-2);
            let next = ((i + step) % n as i64 + n as i64) % n as i64;
            let ds = crate::field::torus_dist(poly[next as usize], x);
            t += ds / speed;
            i += step;
            guard += 1;
            if guard > 2 * n {
                break;
            }
        }
        if path.len() < 4 {
            continue;
        }
        // trim the tail short of q, then pull in
        let qv = qc.point.to_vec3();
        let cut = path
            .iter()
            .position(|(_, z)| crate::field::torus_dist3([crate::field::wrap_angle(z[0]), crate::field::wrap_angle(z[1]), z[2]], qv) < 0.03)
            .unwrap_or(path.len() - 1);
        path.truncate(cut + 1);
        append_pull_in_tail(&mut path, qv);
        seeds.push(OrbitSeed { q: qc.id, path });
    }
    seeds
}

/// Seeds from fast-slow sequences: time-parametrize each segment (fast
/// witnesses keep their clock; slow arcs get the slow-equation clock scaled
/// by 1/lambda^2) and chain them.
pub fn seeds_from_sequences(
    ws: &Workspace,
    catalog: &Catalog,
    seqs: &[FastSlowOrbitSeq],
    lambda: f64,
) -> Vec<OrbitSeed> {
    let mut out = Vec::new();
    for seq in seqs {
        let mut path: Vec<(f64, Vec3)> = Vec::new();
        let mut t = 0.0;
        for seg in &seq.segments {
            match seg {
                Segment::Fast { kind } => {
                    let witness = match kind {
                        crate::orbits::FastKind::HandleSlide(i) => &catalog.handle_slides[*i].witness,
                        crate::orbits::FastKind::CuspInto(i) | crate::orbits::FastKind::CuspOut(i) => {
                            &catalog.cusps[*i].witness
                        }
                        crate::orbits::FastKind::FoldJump(i) => &catalog.fold_jumps[*i].witness,
                        crate::orbits::FastKind::InitialJump(i) | crate::orbits::FastKind::FinalJump(i) => {
                            &catalog.crit_jumps[*i].witness
                        }
                    };
                    let t0 = witness.samples.first().map(|s| s.0).unwrap_or(0.0);
                    let mut prev: Option<Vec3> = path.last().map(|(_, z)| *z);
                    for &(tw, pnt) in &witness.samples {
                        let mut z = pnt.to_vec3();
                        if let Some(pv) = prev {
                            for d in 0..2 {
                                let k = ((pv[d] - z[d]) / crate::field::TWO_PI).round();
                                z[d] += k * crate::field::TWO_PI;
                            }
                        }
                        prev = Some(z);
                        path.push((t + (tw - t0), z));
                    }
                    t = path.last().map(|(tt, _)| *tt).unwrap_or(t);
                }
                Segment::Slow { branch, s_from, s_to } => {
                    let br = &catalog.manifold.branches[*branch];
                    let (lo, hi, forward) = if s_from <= s_to {
                        (*s_from, *s_to, true)
                    } else {
                        (*s_to, *s_from, false)
                    };
                    let mut nodes: Vec<Vec3> = br
                        .nodes
                        .iter()
                        .filter(|n| n.s >= lo - 1e-9 && n.s <= hi + 1e-9)
                        .map(|n| n.lifted)
                        .collect();
                    if !forward {
                        nodes.reverse();
                    }
                    let mut prev: Option<Vec3> = path.last().map(|(_, z)| *z);
                    for z in nodes {
                        let mut zz = z;
                        if let Some(pv) = prev {
                            for d in 0..2 {
                                let k = ((pv[d] - zz[d]) / crate::field::TWO_PI).round();
                                zz[d] += k * crate::field::TWO_PI;
                            }
                            let deta = (zz[2] - pv[2]).abs();
                            let mu = ws.problem.mu.eval([zz[0], zz[1]]).abs().max(5e-3);
                            t += deta / (lambda * lambda * mu);
                        }
                        prev = Some(zz);
                        path.push((t, zz));
                    }
                }
            }
        }
        if path.len() < 4 {
            continue;
        }
        let qv = ws.crit[seq.to].point.to_vec3();
        append_pull_in_tail(&mut path, qv);
        out.push(OrbitSeed { q: seq.to, path });
    }
    out
}

/// Seeds from orbits verified at a neighboring lambda.
pub fn seeds_from_orbits(orbits: &[ConnectingOrbit]) -> Vec<OrbitSeed> {
    orbits
        .iter()
        .map(|o| {
            let mut path: Vec<(f64, Vec3)> = Vec::new();
            let mut prev: Option<Vec3> = None;
            for &(t, pnt) in &o.witness.samples {
                let mut z = pnt.to_vec3();
                if let Some(pv) = prev {
                    for d in 0..2 {
                        let k = ((pv[d] - z[d]) / crate::field::TWO_PI).round();
                        z[d] += k * crate::field::TWO_PI;
                    }
                }
                prev = Some(z);
                path.push((t, z));
            }
            OrbitSeed { q: o.q, path }
        })
        .collect()
}

fn append_pull_in_tail(path: &mut Vec<(f64, Vec3)>, q: Vec3) {
    let Some(&(t_end, z_end)) = path.last() else { return };
    let mut qq = q;
    for d in 0..2 {
        let k = ((z_end[d] - q[d]) / crate::field::TWO_PI).round();
        qq[d] = q[d] + k * crate::field::TWO_PI;
    }
    let gap = ((qq[0] - z_end[0]).powi(2) + (qq[1] - z_end[1]).powi(2) + (qq[2] - z_end[2]).powi(2)).sqrt();
    if gap < 1e-4 {
        return;
    }
    let steps = 4;
    for j in 1..=steps {
        let w = j as f64 / steps as f64;
        path.push((
            t_end + 4.0 * w,
            [
                z_end[0] + 0.995 * w * (qq[0] - z_end[0]),
                z_end[1] + 0.995 * w * (qq[1] - z_end[1]),
                z_end[2] + 0.995 * w * (qq[2] - z_end[2]),
            ],
        ));
    }
}

/// Result of counting at one lambda.
#[derive(Clone, Debug, Serialize)]
pub struct LambdaCount {
    pub lambda: f64,
    pub outcomes: Vec<CountOutcome>,
    pub regular: bool,
}

impl LambdaCount {
    pub fn pair_parities(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for oc in &self.outcomes {
            for pc in &oc.pairs {
                out.push((pc.p, pc.q, pc.parity));
            }
        }
        out
    }

    pub fn orbits(&self) -> Vec<ConnectingOrbit> {
        self.outcomes
            .iter()
            .flat_map(|o| o.pairs.iter().flat_map(|p| p.orbits.iter().cloned()))
            .collect()
    }
}

/// Count every adjacent-index pair at one lambda with the given extra seeds.
pub fn count_at_lambda(
    ws: &Workspace,
    lambda: f64,
    extra_seeds: &[(usize, Vec<OrbitSeed>)],
    params: &ShootParams,
) -> Result<LambdaCount, PipelineError> {
    let sources: Vec<usize> = ws
        .crit
        .iter()
        .filter(|c| c.index_f >= 1 && ws.crit.iter().any(|q| q.index_f + 1 == c.index_f))
        .map(|c| c.id)
        .collect();
    let outcomes: Vec<CountOutcome> = sources
        .iter()
        .map(|&p_id| {
            let seeds: Vec<OrbitSeed> = extra_seeds
                .iter()
                .filter(|(p, _)| *p == p_id)
                .flat_map(|(_, s)| s.iter().cloned())
                .collect();
            count_boundary_from(&ws.problem, &ws.crit, lambda, p_id, &seeds, params)
        })
        .collect::<Result<_, _>>()?;
    let regular = outcomes.iter().all(|o| o.flags.is_empty());
    Ok(LambdaCount { lambda, outcomes, regular })
}

/// The lambda complex assembled from verified counts.
pub fn build_complex_lambda(ws: &Workspace, count: &LambdaCount) -> Result<Z2ChainComplex, PipelineError> {
    let complex = complex_from_counts(&ws.crit, &count.pair_parities(), Provenance::Lambda(count.lambda));
    complex.check_square_zero()?;
    Ok(complex)
}

/// The singular complex from the fast-slow enumeration.
pub fn build_complex_zero(
    ws: &Workspace,
    catalog: &Catalog,
) -> Result<(Z2ChainComplex, Vec<(usize, usize, usize, Vec<FastSlowOrbitSeq>)>), PipelineError> {
    let counts = zero_boundary_counts(&ws.problem, catalog)?;
    let totals: Vec<(usize, usize, usize)> = counts.iter().map(|(p, q, c, _)| (*p, *q, *c)).collect();
    let complex = complex_from_counts(&ws.crit, &totals, Provenance::Zero);
    complex.check_square_zero()?;
    Ok((complex, counts))
}

/// Default seeding strategy for a standalone lambda: restricted arcs always,
/// fast-slow sequences when lambda is small.
pub fn default_seeds(
    ws: &Workspace,
    catalog: Option<&Catalog>,
    seqs: Option<&[(usize, usize, usize, Vec<FastSlowOrbitSeq>)]>,
    lambda: f64,
) -> Vec<(usize, Vec<OrbitSeed>)> {
    let mut out: Vec<(usize, Vec<OrbitSeed>)> = Vec::new();
    for p in &ws.crit {
        let mut seeds = seeds_from_restricted(ws, p);
        if lambda <= 0.6 {
            if let (Some(cat), Some(all)) = (catalog, seqs) {
                for (pp, _q, _c, list) in all {
                    if *pp == p.id {
                        seeds.extend(seeds_from_sequences(ws, cat, list, lambda));
                    }
                }
            }
        }
        if !seeds.is_empty() {
            out.push((p.id, seeds));
        }
    }
    out
}

/// Sweep the lambda list (descending homotopy between neighbors): each
/// lambda is counted with seeds from the adjacent lambda's verified orbits
/// plus the structural seeds.
pub fn sweep(
    ws: &Workspace,
    catalog: &Catalog,
    seqs: &[(usize, usize, usize, Vec<FastSlowOrbitSeq>)],
    lambdas: &[f64],
    params: &ShootParams,
) -> Result<Vec<LambdaCount>, PipelineError> {
    let mut sorted: Vec<f64> = lambdas.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut results: Vec<LambdaCount> = Vec::new();
    let mut carried: Vec<(usize, Vec<OrbitSeed>)> = Vec::new();
    for &lambda in &sorted {
        let mut seeds = default_seeds(ws, Some(catalog), Some(seqs), lambda);
        for (p, s) in &carried {
            seeds.push((*p, s.clone()));
        }
        let count = count_at_lambda(ws, lambda, &seeds, params)?;
        carried = count
            .outcomes
            .iter()
            .map(|o| (o.p, seeds_from_orbits(&o.pairs.iter().flat_map(|pc| pc.orbits.iter().cloned()).collect::<Vec<_>>())))
            .collect();
        results.push(count);
    }
    results.sort_by(|a, b| a.lambda.partial_cmp(&b.lambda).unwrap());
    Ok(results)
}

/// Parallel-friendly variant of prepare for tests: reuses default grids.
pub fn prepare_default() -> Result<Workspace, PipelineError> {
    prepare(Problem::default_example(), 64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prepare_passes_assumption_gate() {
        let ws = prepare_default().unwrap();
        assert!(ws.assumptions.all_checkable_pass(), "{:#?}", ws.assumptions.items);
        assert!(ws.problem.eta_max > 4.0 && ws.problem.eta_max < 5.5);
        assert_eq!(ws.crit.len(), 6);
        assert_eq!(ws.manifold.folds.len(), 4);
        assert_eq!(ws.level_set.component_count(), 2);
    }

    #[test]
    fn bijection_with_restricted_critical_set() {
        let ws = prepare_default().unwrap();
        let bij = restricted_bijection(&ws).expect("canonical bijection exists");
        assert_eq!(bij.len(), 6);
        // index shift of one, pointwise
        for (c, &rid) in ws.crit.iter().zip(&bij) {
            let r = &ws.level_set.crits[rid];
            assert_eq!(c.index_f, r.index + 1);
            assert!((c.f_value - r.f_value).abs() < 1e-8);
        }
    }
}
