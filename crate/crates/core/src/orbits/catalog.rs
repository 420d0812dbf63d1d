//! The fast-orbit catalog at lambda = 0: saddle-saddle connections located by
//! a splitting-function scan in eta, cusp orbits attached to folds, fold
//! jumps along the center direction, and the initial/final jumps at critical
//! points. Everything is anchored to branch sites so the sequence enumerator
//! can walk a finite graph.

use rayon::prelude::*;
use serde::Serialize;

use crate::critical::{polish_fast_rest, CritPointF, SlowType};
use crate::field::{torus_dist, Problem};
use crate::flow::{Budget, FlowRun, RestTarget, Terminal, Trajectory};
use crate::linalg::{Vec2, Vec3};
use crate::slow::{reverse_trajectory, FoldPoint, MarkerKind, SlowBranch, SlowManifold};

/// A rest point of the fast flow at some eta, located on a branch.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BranchPoint {
    pub branch: usize,
    pub s: f64,
    pub x: Vec2,
    pub eta: f64,
    pub fast_index: usize,
}

impl BranchPoint {
    pub fn lifted(&self) -> Vec3 {
        [self.x[0], self.x[1], self.eta]
    }
}

/// Slice one branch at a fixed eta: all transversal crossings, polished.
pub fn branch_points_at_eta(problem: &Problem, branch: &SlowBranch, eta: f64) -> Vec<BranchPoint> {
    let mut out = Vec::new();
    for i in 0..branch.nodes.len().saturating_sub(1) {
        let (a, b) = (&branch.nodes[i], &branch.nodes[i + 1]);
        let (ea, eb) = (a.lifted[2] - eta, b.lifted[2] - eta);
        if ea == 0.0 && eb == 0.0 {
            continue;
        }
        if ea.signum() == eb.signum() && ea != 0.0 {
            continue;
        }
        let w = if (eb - ea).abs() > 1e-300 { ea.abs() / (ea - eb).abs() } else { 0.0 };
        let guess = [
            a.lifted[0] + w * (b.lifted[0] - a.lifted[0]),
            a.lifted[1] + w * (b.lifted[1] - a.lifted[1]),
        ];
        let Some(rest) = polish_fast_rest(problem, eta, guess) else { continue };
        if rest.min_abs_eig < 10.0 * problem.tol.degenerate_eig {
            continue; // fold vicinity; folds are handled separately
        }
        let s = a.s + w * (b.s - a.s);
        if out
            .iter()
            .any(|p: &BranchPoint| torus_dist(p.x, rest.x) < 1e-8 && (p.s - s).abs() < 1e-6)
        {
            continue;
        }
        out.push(BranchPoint { branch: branch.id, s, x: rest.x, eta, fast_index: rest.index });
    }
    out
}

/// All branch points at a fixed eta across the manifold.
pub fn rests_at_eta(problem: &Problem, manifold: &SlowManifold, eta: f64) -> Vec<BranchPoint> {
    let mut out = Vec::new();
    for branch in &manifold.branches {
        out.extend(branch_points_at_eta(problem, branch, eta));
    }
    // distinct rests can be hit twice if branches were double-traced;
    // dedupe by position
    let mut unique: Vec<BranchPoint> = Vec::new();
    for bp in out {
        if !unique.iter().any(|u| torus_dist(u.x, bp.x) < 1e-7) {
            unique.push(bp);
        }
    }
    unique.sort_by(|a, b| (a.x[0], a.x[1]).partial_cmp(&(b.x[0], b.x[1])).unwrap());
    unique
}

/// What a separatrix run ended on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SepLanding {
    Rest(usize),
    Fold(usize),
    None,
}

/// Integrate one separatrix branch of a saddle (forward for unstable,
/// backward for stable) and classify the landing among `rests` and `folds`.
/// Also reports the signed passage side and distance for a chosen probe rest.
pub struct SepRun {
    pub landing: SepLanding,
    pub traj: Trajectory,
    pub probe_dist: f64,
    pub probe_side: f64,
}

pub fn separatrix_run(
    problem: &Problem,
    saddle: &BranchPoint,
    dir_sign: f64,
    backward: bool,
    rests: &[BranchPoint],
    folds: &[FoldPoint],
    probe: Option<(Vec2, Vec2)>,
) -> SepRun {
    let h = problem.hess_f_eta(saddle.x, saddle.eta);
    let (eigs, vecs) = crate::linalg::sym2_eig(h);
    // unstable flow direction = most negative Hessian eigenvalue
    let v = if backward { vecs[1] } else { vecs[0] };
    debug_assert!(eigs[0] < 0.0 && eigs[1] > 0.0, "separatrix source must be a saddle");
    let delta = 1e-7;
    let start = [
        saddle.x[0] + dir_sign * delta * v[0],
        saddle.x[1] + dir_sign * delta * v[1],
        saddle.eta,
    ];
    let mut targets: Vec<RestTarget> = Vec::new();
    let mut side_dirs: Vec<Option<Vec3>> = Vec::new();
    for (i, r) in rests.iter().enumerate() {
        if torus_dist(r.x, saddle.x) < 1e-7 {
            continue;
        }
        targets.push(RestTarget { id: i, point: r.lifted(), basin_radius: basin_radius_2d(problem, r) });
        side_dirs.push(None);
    }
    let fold_base = rests.len();
    for f in folds.iter() {
        if (f.point.eta - saddle.eta).abs() > 1e-6 {
            continue;
        }
        targets.push(RestTarget {
            id: fold_base + f.id,
            point: f.point.to_vec3(),
            basin_radius: 0.08,
        });
        side_dirs.push(None);
    }
    let probe_idx = probe.map(|(x, dir)| {
        targets.push(RestTarget { id: usize::MAX, point: [x[0], x[1], saddle.eta], basin_radius: 0.0 });
        side_dirs.push(Some([dir[0], dir[1], 0.0]));
        targets.len() - 1
    });

    let mut run = FlowRun::new(problem, 0.0);
    run.options.backward = backward;
    run.side_dirs = side_dirs;
    let (traj, approaches) = run.integrate(start, Budget::for_fast_flow(), &targets);
    let landing = match traj.terminal {
        Terminal::ConvergedTo(id) if id >= fold_base && id != usize::MAX => SepLanding::Fold(id - fold_base),
        Terminal::ConvergedTo(id) => SepLanding::Rest(id),
        _ => SepLanding::None,
    };
    let (probe_dist, probe_side) = probe_idx
        .map(|i| (approaches[i].dist, approaches[i].side))
        .unwrap_or((f64::INFINITY, 0.0));
    SepRun { landing, traj, probe_dist, probe_side }
}

fn basin_radius_2d(problem: &Problem, r: &BranchPoint) -> f64 {
    let ([l0, l1], _) = crate::linalg::sym2_eig(problem.hess_f_eta(r.x, r.eta));
    (problem.tol.basin_factor * l0.abs().min(l1.abs())).clamp(1e-4, 0.2)
}

/// A saddle-saddle connection of the fast flow at an isolated eta.
#[derive(Clone, Debug, Serialize)]
pub struct HandleSlide {
    pub id: usize,
    pub eta: f64,
    pub from: BranchPoint,
    pub to: BranchPoint,
    pub witness: Trajectory,
    /// |d(side)/d(eta)| at the root: transversality margin.
    pub margin: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CuspDirection {
    IntoFold,
    OutOfFold,
}

/// A fast orbit joining a fold and a regular rest point, approaching the
/// fold polynomially.
#[derive(Clone, Debug, Serialize)]
pub struct CuspOrbit {
    pub id: usize,
    pub fold: usize,
    pub partner: BranchPoint,
    pub direction: CuspDirection,
    pub witness: Trajectory,
    /// Power-law exponent of the approach toward the fold (fit of
    /// distance ~ t^-p); in [0.7, 1.3] for a genuine fold approach.
    pub decay_exponent: f64,
}

/// The jump leaving a fold along its center direction, with landing.
#[derive(Clone, Debug, Serialize)]
pub struct FoldJump {
    pub fold: usize,
    pub landing: BranchPoint,
    pub witness: Trajectory,
}

/// Fast edges at the eta level of a critical point: a jump away from an
/// attractor (sequence start) or into a repeller (sequence end).
#[derive(Clone, Debug, Serialize)]
pub struct CritJump {
    pub crit: usize,
    /// The saddle the jump connects to (landing for initial, source for final).
    pub saddle: BranchPoint,
    pub witness: Trajectory,
    /// true: jump starts at the critical point; false: jump ends there.
    pub outgoing: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("splitting function root at eta = {eta} is tangential (margin {margin:.3e})")]
    TangentialConnection { eta: f64, margin: f64 },
    #[error("decay fit inconclusive for fold {fold} (exponent {exponent:.3})")]
    AmbiguousDecay { fold: usize, exponent: f64 },
    #[error("fold jump from fold {fold} did not land on a rest point")]
    JumpLost { fold: usize },
}

/// Everything the sequence enumerator needs, built once per problem.
#[derive(Clone, Debug, Serialize)]
pub struct Catalog {
    pub crit: Vec<CritPointF>,
    pub manifold: SlowManifold,
    pub handle_slides: Vec<HandleSlide>,
    pub cusps: Vec<CuspOrbit>,
    pub fold_jumps: Vec<FoldJump>,
    pub crit_jumps: Vec<CritJump>,
}

/// Scan for handle-slides. The near-saddle passage window is exponentially
/// narrow in eta, so the scan brackets crossings by robust signatures of
/// each saddle separatrix (landing rest and path length, which both jump at
/// a crossing) and bisects; once the bracket is tight the signed passage
/// side of the target saddle takes over and refines to full tolerance.
pub fn detect_handle_slides(
    problem: &Problem,
    manifold: &SlowManifold,
    crit: &[CritPointF],
    n_scan: usize,
) -> Result<Vec<HandleSlide>, CatalogError> {
    let special: Vec<f64> = crit
        .iter()
        .map(|c| c.point.eta)
        .chain(manifold.folds.iter().map(|f| f.point.eta))
        .collect();
    let lo = -problem.eta_max * 0.98;
    let hi = problem.eta_max * 0.98;

    // signature of one separatrix at one eta
    #[derive(Clone)]
    struct Row {
        src_x: Vec2,
        dir: f64,
        landing: Option<Vec2>,
        length: f64,
    }

    let signature = |eta: f64| -> Vec<Row> {
        let rests = rests_at_eta(problem, manifold, eta);
        let saddles: Vec<BranchPoint> = rests.iter().filter(|r| r.fast_index == 1).copied().collect();
        let mut rows = Vec::new();
        for src in &saddles {
            for dir in [1.0, -1.0] {
                let run = separatrix_run(problem, src, dir, false, &rests, &manifold.folds, None);
                let landing = match run.landing {
                    SepLanding::Rest(i) => Some(rests[i].x),
                    _ => None,
                };
                let length: f64 = run
                    .traj
                    .samples
                    .windows(2)
                    .map(|w| torus_dist(w[0].1.x, w[1].1.x))
                    .sum();
                rows.push(Row { src_x: src.x, dir, landing, length });
            }
        }
        rows
    };

    // scan grid, with extra points hugging the special eta values so that a
    // crossing close to a fold still gets a clean bracket on one side
    let margin = 2e-3;
    let mut etas: Vec<f64> = (0..n_scan)
        .map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n_scan as f64)
        .collect();
    for s in &special {
        etas.push(s - margin);
        etas.push(s + margin);
    }
    etas.retain(|e| *e > lo && *e < hi && special.iter().all(|s| (e - s).abs() > 0.9 * margin));
    etas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let samples: Vec<(f64, Vec<Row>)> = etas
        .par_iter()
        .map(|&eta| (eta, signature(eta)))
        .collect();

    // bracket signature changes on matched rows
    let mut brackets: Vec<(f64, f64, Vec2, f64)> = Vec::new();
    for w in samples.windows(2) {
        let (ea, rows_a) = &w[0];
        let (eb, rows_b) = &w[1];
        // skip windows containing a fold or critical eta: rest set changes
        if special.iter().any(|s| *s > *ea && *s < *eb) {
            continue;
        }
        for ra in rows_a {
            let Some(rb) = rows_b
                .iter()
                .find(|r| r.dir == ra.dir && torus_dist(r.src_x, ra.src_x) < 0.3)
            else {
                continue;
            };
            let landing_changed = match (&ra.landing, &rb.landing) {
                (Some(a), Some(b)) => torus_dist(*a, *b) > 0.3,
                (None, None) => false,
                _ => true,
            };
            let length_jumped = (ra.length - rb.length).abs() > 0.5;
            if landing_changed || length_jumped {
                brackets.push((*ea, *eb, ra.src_x, ra.dir));
            }
        }
    }

    let mut slides: Vec<HandleSlide> = Vec::new();
    for (mut e_lo, mut e_hi, src_seed, dir) in brackets {
        // phase 1: bisect on the robust signature
        let run_at = |eta: f64, src_seed: Vec2| -> Option<(BranchPoint, Vec<BranchPoint>, SepRun)> {
            let rests = rests_at_eta(problem, manifold, eta);
            let src = rests
                .iter()
                .filter(|r| r.fast_index == 1)
                .min_by(|p, q| {
                    torus_dist(p.x, src_seed)
                        .partial_cmp(&torus_dist(q.x, src_seed))
                        .unwrap()
                })
                .copied()?;
            if torus_dist(src.x, src_seed) > 0.4 {
                return None;
            }
            let run = separatrix_run(problem, &src, dir, false, &rests, &manifold.folds, None);
            Some((src, rests, run))
        };
        let sig_of = |rests: &[BranchPoint], run: &SepRun| -> (Option<Vec2>, f64) {
            let landing = match run.landing {
                SepLanding::Rest(i) => Some(rests[i].x),
                _ => None,
            };
            let length: f64 = run
                .traj
                .samples
                .windows(2)
                .map(|w| torus_dist(w[0].1.x, w[1].1.x))
                .sum();
            (landing, length)
        };
        let same_side = |a: &(Option<Vec2>, f64), b: &(Option<Vec2>, f64)| -> bool {
            let landing_same = match (&a.0, &b.0) {
                (Some(x), Some(y)) => torus_dist(*x, *y) < 0.3,
                (None, None) => true,
                _ => false,
            };
            landing_same && (a.1 - b.1).abs() < 0.25
        };
        let Some((_, rests_lo, run_lo)) = run_at(e_lo, src_seed) else { continue };
        let mut sig_lo = sig_of(&rests_lo, &run_lo);
        for _ in 0..80 {
            if e_hi - e_lo < 1e-12 {
                break;
            }
            let mid = 0.5 * (e_lo + e_hi);
            let Some((_, rests_m, run_m)) = run_at(mid, src_seed) else { break };
            let sig_m = sig_of(&rests_m, &run_m);
            if same_side(&sig_m, &sig_lo) {
                e_lo = mid;
                sig_lo = sig_m;
            } else {
                e_hi = mid;
            }
        }
        // identify the target saddle: nearest-passed saddle at the bracket
        let Some((src_mid, rests_mid, run_mid)) = run_at(0.5 * (e_lo + e_hi), src_seed) else {
            continue;
        };
        let mut tgt: Option<BranchPoint> = None;
        let mut best = f64::INFINITY;
        for r in rests_mid.iter().filter(|r| r.fast_index == 1) {
            if torus_dist(r.x, src_mid.x) < 1e-6 {
                continue;
            }
            let mut dmin = f64::INFINITY;
            for (_, pnt) in &run_mid.traj.samples {
                dmin = dmin.min(torus_dist(pnt.x, r.x));
            }
            if dmin < best {
                best = dmin;
                tgt = Some(*r);
            }
        }
        let Some(tgt_seed) = tgt else { continue };
        if best > 0.5 {
            continue; // no saddle involved: not a handle-slide bracket
        }
        // phase 2: refine with the signed passage side where it is defined
        let side_at = |eta: f64| -> Option<(f64, f64, BranchPoint, BranchPoint)> {
            let rests = rests_at_eta(problem, manifold, eta);
            let src = rests
                .iter()
                .filter(|r| r.fast_index == 1)
                .min_by(|p, q| torus_dist(p.x, src_seed).partial_cmp(&torus_dist(q.x, src_seed)).unwrap())
                .copied()?;
            let tgt = rests
                .iter()
                .filter(|r| r.fast_index == 1)
                .min_by(|p, q| torus_dist(p.x, tgt_seed.x).partial_cmp(&torus_dist(q.x, tgt_seed.x)).unwrap())
                .copied()?;
            if torus_dist(src.x, src_seed) > 0.4 || torus_dist(tgt.x, tgt_seed.x) > 0.4 {
                return None;
            }
            let (_, vecs) = crate::linalg::sym2_eig(problem.hess_f_eta(tgt.x, eta));
            let run = separatrix_run(problem, &src, dir, false, &rests, &manifold.folds, Some((tgt.x, vecs[0])));
            if run.probe_dist > 0.45 {
                return None;
            }
            Some((run.probe_side, run.probe_dist, src, tgt))
        };
        if let Some((mut side_lo, _, _, _)) = side_at(e_lo) {
            for _ in 0..80 {
                if e_hi - e_lo < problem.tol.angle_bisect {
                    break;
                }
                let mid = 0.5 * (e_lo + e_hi);
                let Some((side_m, _, _, _)) = side_at(mid) else { break };
                if side_m.signum() == side_lo.signum() {
                    e_lo = mid;
                    side_lo = side_m;
                } else {
                    e_hi = mid;
                }
            }
        }
        let eta_root = 0.5 * (e_lo + e_hi);
        let Some((_, _, src, tgt)) = side_at(eta_root).or_else(|| {
            // the passage is too swept to enter the gate; fall back to the
            // phase-1 attribution
            run_at(eta_root, src_seed).map(|(s, _, _)| (0.0, 0.0, s, tgt_seed))
        }) else {
            continue;
        };
        // connections run downhill; discard spurious pairings
        if problem.f_eta(src.x, eta_root) <= problem.f_eta(tgt.x, eta_root) {
            continue;
        }
        // transversality margin: slope of the passage side, measured at the
        // smallest eta offset where the passage enters the gate
        let mut margin = f64::INFINITY;
        let mut d_eta = 1e-11;
        while d_eta < 1e-4 {
            if let (Some((a, _, _, _)), Some((b, _, _, _))) =
                (side_at(eta_root - d_eta), side_at(eta_root + d_eta))
            {
                margin = ((b - a) / (2.0 * d_eta)).abs();
                break;
            }
            d_eta *= 10.0;
        }
        if margin < 1e-4 {
            return Err(CatalogError::TangentialConnection { eta: eta_root, margin });
        }
        // witness at the root
        let rests = rests_at_eta(problem, manifold, eta_root);
        let run = separatrix_run(problem, &src, dir, false, &rests, &manifold.folds, None);
        if slides.iter().any(|h| {
            (h.eta - eta_root).abs() < 1e-7
                && torus_dist(h.from.x, src.x) < 1e-4
                && torus_dist(h.to.x, tgt.x) < 1e-4
        }) {
            continue;
        }
        slides.push(HandleSlide {
            id: slides.len(),
            eta: eta_root,
            from: src,
            to: tgt,
            witness: run.traj,
            margin,
        });
    }
    slides.sort_by(|a, b| a.eta.partial_cmp(&b.eta).unwrap());
    for (i, s) in slides.iter_mut().enumerate() {
        s.id = i;
    }
    Ok(slides)
}

/// Fit the power-law exponent of the approach of a trajectory tail toward a
/// point: distance ~ C * t^(-p). Returns p.
pub fn decay_exponent(traj: &Trajectory, point: Vec3) -> f64 {
    let mut raw: Vec<(f64, f64)> = Vec::new();
    for &(t, p) in &traj.samples {
        let d = crate::field::torus_dist3(p.to_vec3(), [crate::field::wrap_angle(point[0]), crate::field::wrap_angle(point[1]), point[2]]);
        if d > 3e-4 && d < 2e-2 && t > 1.0 {
            raw.push((t, d));
        }
    }
    // keep the late portion: the approach law only holds past the transient
    let t_max = raw.last().map(|p| p.0).unwrap_or(0.0);
    let pts: Vec<(f64, f64)> = raw
        .iter()
        .filter(|(t, _)| *t > 0.1 * t_max)
        .map(|(t, d)| (t.ln(), d.ln()))
        .collect();
    if pts.len() < 6 {
        return f64::NAN;
    }
    // least squares slope of ln d vs ln t
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-12 {
        return f64::NAN;
    }
    -(n * sxy - sx * sy) / denom
}

/// Re-integrate a separatrix with dense sample storage and a tight stop
/// radius at the fold, for the decay-rate fit.
fn dense_fold_approach(
    problem: &Problem,
    start_traj: &Trajectory,
    backward: bool,
    fold: &FoldPoint,
) -> Trajectory {
    let start = start_traj.samples.first().map(|(_, p)| p.to_vec3()).unwrap();
    let mut run = FlowRun::new(problem, 0.0);
    run.options.backward = backward;
    run.options.sample_spacing = 1e-5;
    run.options.stop_radius = 3e-4;
    let target = RestTarget { id: 0, point: fold.point.to_vec3(), basin_radius: 0.08 };
    let (traj, _) = run.integrate(start, Budget::new(6.0e4, 4_000_000), &[target]);
    traj
}

/// Detect the cusp orbits and the center jump of one fold.
pub fn detect_cusp_orbits(
    problem: &Problem,
    manifold: &SlowManifold,
    fold: &FoldPoint,
) -> Result<(Vec<CuspOrbit>, Option<FoldJump>), CatalogError> {
    let eta = fold.point.eta;
    let rests = rests_at_eta(problem, manifold, eta);
    let mut cusps: Vec<CuspOrbit> = Vec::new();

    // center jump away from the fold (the departing side of the center axis)
    let depart = fold.d.signum();
    let mut jump = None;
    for delta in [1e-3, 3e-3] {
        let start = [
            fold.point.x[0] + depart * delta * fold.center_dir[0],
            fold.point.x[1] + depart * delta * fold.center_dir[1],
            eta,
        ];
        let targets: Vec<RestTarget> = rests
            .iter()
            .enumerate()
            .map(|(i, r)| RestTarget { id: i, point: r.lifted(), basin_radius: basin_radius_2d(problem, r) })
            .collect();
        let run = FlowRun::new(problem, 0.0);
        let (traj, _) = run.integrate(start, Budget::for_fast_flow(), &targets);
        if let Terminal::ConvergedTo(i) = traj.terminal {
            jump = Some(FoldJump { fold: fold.id, landing: rests[i], witness: traj });
            break;
        }
    }
    let jump = jump.ok_or(CatalogError::JumpLost { fold: fold.id })?;

    if fold.lower_index == 0 {
        // orbits into the fold from saddles (index 1), approaching like 1/t
        for saddle in rests.iter().filter(|r| r.fast_index == 1) {
            if problem.f_eta(saddle.x, eta) <= problem.f_eta(fold.point.x, eta) {
                continue;
            }
            for dir in [1.0, -1.0] {
                let run = separatrix_run(problem, saddle, dir, false, &rests, &manifold.folds, None);
                if run.landing == SepLanding::Fold(fold.id) {
                    let dense = dense_fold_approach(problem, &run.traj, false, fold);
                    let p = decay_exponent(&dense, fold.point.to_vec3());
                    if p.is_nan() || !(0.7..=1.3).contains(&p) {
                        return Err(CatalogError::AmbiguousDecay { fold: fold.id, exponent: p });
                    }
                    cusps.push(CuspOrbit {
                        id: 0,
                        fold: fold.id,
                        partner: *saddle,
                        direction: CuspDirection::IntoFold,
                        witness: run.traj,
                        decay_exponent: p,
                    });
                }
            }
        }
    } else {
        // orbits out of the fold into saddles: stable separatrices backward
        for saddle in rests.iter().filter(|r| r.fast_index == 1) {
            if problem.f_eta(saddle.x, eta) >= problem.f_eta(fold.point.x, eta) {
                continue;
            }
            for dir in [1.0, -1.0] {
                let run = separatrix_run(problem, saddle, dir, true, &rests, &manifold.folds, None);
                if run.landing == SepLanding::Fold(fold.id) {
                    let dense = dense_fold_approach(problem, &run.traj, true, fold);
                    let p = decay_exponent(&dense, fold.point.to_vec3());
                    if p.is_nan() || !(0.7..=1.3).contains(&p) {
                        return Err(CatalogError::AmbiguousDecay { fold: fold.id, exponent: p });
                    }
                    cusps.push(CuspOrbit {
                        id: 0,
                        fold: fold.id,
                        partner: *saddle,
                        direction: CuspDirection::OutOfFold,
                        witness: reverse_trajectory(problem, run.traj),
                        decay_exponent: p,
                    });
                }
            }
        }
    }
    Ok((cusps, Some(jump)))
}

/// Initial/final jumps at the critical points: fast orbits between the
/// critical rest and the saddles at its own eta level.
fn detect_crit_jumps(problem: &Problem, manifold: &SlowManifold, crit: &[CritPointF]) -> Vec<CritJump> {
    let mut out = Vec::new();
    for c in crit {
        let eta = c.point.eta;
        let rests = rests_at_eta(problem, manifold, eta);
        let outgoing = c.slow_type == SlowType::Attractor;
        let me = rests
            .iter()
            .find(|r| torus_dist(r.x, c.point.x) < 1e-6)
            .copied();
        let Some(me) = me else { continue };
        match (outgoing, me.fast_index) {
            (true, 2) => {
                // source: find saddles whose stable separatrix climbs back here
                for saddle in rests.iter().filter(|r| r.fast_index == 1) {
                    for dir in [1.0, -1.0] {
                        let run = separatrix_run(problem, saddle, dir, true, &rests, &manifold.folds, None);
                        if let SepLanding::Rest(i) = run.landing {
                            if torus_dist(rests[i].x, me.x) < 1e-6 {
                                out.push(CritJump {
                                    crit: c.id,
                                    saddle: *saddle,
                                    witness: reverse_trajectory(problem, run.traj),
                                    outgoing: true,
                                });
                            }
                        }
                    }
                }
            }
            (true, 1) => {
                // saddle attractor: its own unstable separatrices
                for dir in [1.0, -1.0] {
                    let run = separatrix_run(problem, &me, dir, false, &rests, &manifold.folds, None);
                    if let SepLanding::Rest(i) = run.landing {
                        out.push(CritJump {
                            crit: c.id,
                            saddle: rests[i],
                            witness: run.traj,
                            outgoing: true,
                        });
                    }
                }
            }
            (false, 0) => {
                // sink repeller: saddles whose unstable separatrix lands here
                for saddle in rests.iter().filter(|r| r.fast_index == 1) {
                    for dir in [1.0, -1.0] {
                        let run = separatrix_run(problem, saddle, dir, false, &rests, &manifold.folds, None);
                        if let SepLanding::Rest(i) = run.landing {
                            if torus_dist(rests[i].x, me.x) < 1e-6 {
                                out.push(CritJump {
                                    crit: c.id,
                                    saddle: *saddle,
                                    witness: run.traj,
                                    outgoing: false,
                                });
                            }
                        }
                    }
                }
            }
            _ => {}
        }
    }
    out
}

/// Build the full catalog: handle-slides, cusps, fold jumps, crit jumps, and
/// the branch markers that anchor them for the enumerator.
pub fn build_catalog(
    problem: &Problem,
    crit: Vec<CritPointF>,
    mut manifold: SlowManifold,
    n_scan: usize,
) -> Result<Catalog, CatalogError> {
    let handle_slides = detect_handle_slides(problem, &manifold, &crit, n_scan)?;

    let mut cusps = Vec::new();
    let mut fold_jumps = Vec::new();
    let folds = manifold.folds.clone();
    for fold in &folds {
        let (mut cs, jump) = detect_cusp_orbits(problem, &manifold, fold)?;
        for c in &mut cs {
            c.id = cusps.len();
            cusps.push(c.clone());
        }
        if let Some(j) = jump {
            fold_jumps.push(j);
        }
    }
    let crit_jumps = detect_crit_jumps(problem, &manifold, &crit);

    // anchor markers for every catalog endpoint that is a regular branch point
    let add_marker = |manifold: &mut SlowManifold, bp: &BranchPoint, kind: MarkerKind| {
        let branch = &mut manifold.branches[bp.branch];
        if branch
            .markers
            .iter()
            .any(|m| (m.s - bp.s).abs() < 1e-7 && m.kind == kind)
        {
            return;
        }
        branch.markers.push(crate::slow::Marker { s: bp.s, kind, lifted: bp.lifted() });
    };
    for hs in &handle_slides {
        add_marker(&mut manifold, &hs.from, MarkerKind::HandleSlideEnd(hs.id));
        add_marker(&mut manifold, &hs.to, MarkerKind::HandleSlideEnd(hs.id));
    }
    for (i, c) in cusps.iter().enumerate() {
        add_marker(&mut manifold, &c.partner, MarkerKind::RestStop(i));
    }
    for (i, j) in fold_jumps.iter().enumerate() {
        add_marker(&mut manifold, &j.landing, MarkerKind::RestStop(1000 + i));
    }
    for (i, j) in crit_jumps.iter().enumerate() {
        add_marker(&mut manifold, &j.saddle, MarkerKind::RestStop(2000 + i));
    }
    for branch in &mut manifold.branches {
        branch.markers.sort_by(|a, b| a.s.partial_cmp(&b.s).unwrap());
    }

    Ok(Catalog { crit, manifold, handle_slides, cusps, fold_jumps, crit_jumps })
}

impl Catalog {
    /// Joint distinctness of every special eta value in the catalog.
    pub fn special_eta_values(&self) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> = Vec::new();
        for c in &self.crit {
            out.push((format!("crit:{}", c.id), c.point.eta));
        }
        for f in &self.manifold.folds {
            out.push((format!("fold:{}", f.id), f.point.eta));
        }
        for h in &self.handle_slides {
            out.push((format!("handle-slide:{}", h.id), h.eta));
        }
        out.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        out
    }

    pub fn min_special_eta_gap(&self) -> f64 {
        let vals = self.special_eta_values();
        vals.windows(2)
            .map(|w| w[1].1 - w[0].1)
            .fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rests_match_grid_solver() {
        let p = Problem::default_example();
        let crit = crate::critical::find_crit_f(&p, 48).unwrap();
        let manifold = crate::slow::trace_slow_manifold(&p, &crit, 25).unwrap();
        for eta in [-1.2, -0.8, -0.1, 0.5] {
            let from_branches = rests_at_eta(&p, &manifold, eta);
            let from_grid = crate::critical::fast_rests(&p, eta, 28);
            assert_eq!(from_branches.len(), from_grid.len(), "eta = {eta}");
            for r in &from_grid {
                assert!(
                    from_branches.iter().any(|b| torus_dist(b.x, r.x) < 1e-6),
                    "missing rest {:?} at eta {eta}",
                    r.x
                );
            }
        }
    }

    #[test]
    fn separatrix_lands_downhill() {
        let p = Problem::default_example();
        let crit = crate::critical::find_crit_f(&p, 48).unwrap();
        let manifold = crate::slow::trace_slow_manifold(&p, &crit, 25).unwrap();
        let eta = -0.4;
        let rests = rests_at_eta(&p, &manifold, eta);
        let saddle = rests.iter().find(|r| r.fast_index == 1).expect("a saddle");
        let run = separatrix_run(&p, saddle, 1.0, false, &rests, &manifold.folds, None);
        match run.landing {
            SepLanding::Rest(i) => {
                assert!(rests[i].fast_index < 1 || p.f_eta(rests[i].x, eta) < p.f_eta(saddle.x, eta));
                assert!(run.traj.monotone_violation <= 1e-9);
            }
            other => panic!("unstable separatrix should land on a rest, got {other:?}"),
        }
    }
}
