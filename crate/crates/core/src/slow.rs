//! The slow manifold {grad f + eta grad mu = 0}: pseudo-arclength tracing,
//! fold detection and local quadratic models, crossing markers, and the short
//! fast orbits that cross a fold between canonically paired branch points.

use serde::Serialize;

use crate::critical::CritPointF;
use crate::field::{ExtendedPoint, Problem, TWO_PI};
use crate::flow::{Budget, FlowRun, RestTarget, Trajectory};
use crate::linalg::{dot2, norm2, norm3, normalize3, solve3, sym2_eig, Vec2, Vec3};

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BranchNode {
    /// Lifted coordinates (x continuous along the branch, not wrapped).
    pub lifted: Vec3,
    pub s: f64,
    pub det_hess: f64,
    pub mu: f64,
}

impl BranchNode {
    pub fn point(&self) -> ExtendedPoint {
        ExtendedPoint::new([self.lifted[0], self.lifted[1]], self.lifted[2])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BranchEnd {
    /// Ran past |eta| = eta_max toward a critical point of mu at infinity.
    EtaCutoff(i8),
    /// The branch closed up on itself.
    ClosedLoop,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum MarkerKind {
    /// mu = 0 crossing: a critical point of F (id into the critical set).
    CritF(usize),
    /// Fold (id into the fold table).
    Fold(usize),
    /// Endpoint of a detected saddle-saddle connection (id into that table).
    HandleSlideEnd(usize),
    /// Endpoint of a cusp orbit or jump landing (id into the cusp table).
    RestStop(usize),
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Marker {
    pub s: f64,
    pub kind: MarkerKind,
    pub lifted: Vec3,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BranchSegment {
    pub s_lo: f64,
    pub s_hi: f64,
    pub fast_index: usize,
}

/// One traced component of the slow manifold. Folds are interior points; the
/// fast index is constant on the segments between them.
#[derive(Clone, Debug, Serialize)]
pub struct SlowBranch {
    pub id: usize,
    pub nodes: Vec<BranchNode>,
    pub end_lo: BranchEnd,
    pub end_hi: BranchEnd,
    pub markers: Vec<Marker>,
    pub segments: Vec<BranchSegment>,
}

impl SlowBranch {
    pub fn arc_length(&self) -> f64 {
        self.nodes.last().map_or(0.0, |n| n.s)
    }

    pub fn closed(&self) -> bool {
        self.end_lo == BranchEnd::ClosedLoop
    }

    pub fn fast_index_at(&self, s: f64) -> usize {
        for seg in &self.segments {
            if s >= seg.s_lo - 1e-12 && s <= seg.s_hi + 1e-12 {
                return seg.fast_index;
            }
        }
        self.segments.last().map_or(0, |seg| seg.fast_index)
    }

    /// Interpolated lifted point at arclength s.
    pub fn at(&self, s: f64) -> Vec3 {
        let nodes = &self.nodes;
        if nodes.is_empty() {
            return [0.0; 3];
        }
        let s = s.clamp(nodes[0].s, nodes.last().unwrap().s);
        let i = match nodes.binary_search_by(|n| n.s.partial_cmp(&s).unwrap()) {
            Ok(i) => return nodes[i].lifted,
            Err(i) => i.clamp(1, nodes.len() - 1),
        };
        let (a, b) = (&nodes[i - 1], &nodes[i]);
        let w = if b.s > a.s { (s - a.s) / (b.s - a.s) } else { 0.0 };
        [
            a.lifted[0] + w * (b.lifted[0] - a.lifted[0]),
            a.lifted[1] + w * (b.lifted[1] - a.lifted[1]),
            a.lifted[2] + w * (b.lifted[2] - a.lifted[2]),
        ]
    }

    /// Distance from a lifted point to this branch polyline (toroidal in x).
    pub fn dist_to(&self, z: Vec3) -> f64 {
        let mut best = f64::INFINITY;
        for w in self.nodes.windows(2) {
            best = best.min(segment_dist_toroidal(z, w[0].lifted, w[1].lifted));
        }
        best
    }
}

fn segment_dist_toroidal(z: Vec3, a: Vec3, b: Vec3) -> f64 {
    // shift z to the image nearest to a
    let mut zz = z;
    for d in 0..2 {
        let k = ((a[d] - z[d]) / TWO_PI).round();
        zz[d] = z[d] + k * TWO_PI;
    }
    let ab = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let az = [zz[0] - a[0], zz[1] - a[1], zz[2] - a[2]];
    let denom = crate::linalg::dot3(ab, ab);
    let t = if denom > 1e-300 {
        (crate::linalg::dot3(ab, az) / denom).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = [a[0] + t * ab[0], a[1] + t * ab[1], a[2] + t * ab[2]];
    ((zz[0] - q[0]).powi(2) + (zz[1] - q[1]).powi(2) + (zz[2] - q[2]).powi(2)).sqrt()
}

/// A fold: the frozen-eta Hessian drops rank, the branch turns in eta.
#[derive(Clone, Debug, Serialize)]
pub struct FoldPoint {
    pub id: usize,
    pub point: ExtendedPoint,
    pub branch: usize,
    pub s: f64,
    /// Local model coefficients of the center dynamics
    /// v = c (eta - eta_fold) + d w^2 along the zero-eigenvalue direction w.
    pub c: f64,
    pub d: f64,
    /// Fast index on the lower-index side of the fold.
    pub lower_index: usize,
    /// Unit zero-eigenvalue direction of the Hessian.
    pub center_dir: Vec2,
    /// The transversal (nonzero) Hessian eigenvalue.
    pub trans_eig: f64,
    /// Slope of det Hess along arclength at the fold (simple-zero margin).
    pub det_slope: f64,
    /// +1 when the branch lives on eta >= eta_fold (local minimum of eta),
    /// -1 for a local maximum.
    pub eta_side: i8,
    pub mu: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum SlowError {
    #[error("continuation stalled at ({at:?}); step fell below minimum")]
    ContinuationStall { at: Vec3 },
    #[error("fold at ({at:?}) is degenerate: c = {c:.3e}, d = {d:.3e}")]
    FoldDegenerate { at: Vec3, c: f64, d: f64 },
    #[error("short-orbit shooting failed at fold {fold} with offset {s}")]
    NotFound { fold: usize, s: f64 },
}

/// Branch residual grad f_eta(x) = 0 and its 2x3 Jacobian rows.
fn residual(problem: &Problem, z: Vec3) -> ([f64; 2], [[f64; 3]; 2]) {
    let x = [z[0], z[1]];
    let g = problem.grad_f_eta(x, z[2]);
    let h = problem.hess_f_eta(x, z[2]);
    let gm = problem.mu.grad(x);
    (g, [[h[0], h[1], gm[0]], [h[1], h[2], gm[1]]])
}

/// Unit tangent of the solution curve: cross product of the Jacobian rows.
fn tangent(problem: &Problem, z: Vec3) -> Vec3 {
    let (_, j) = residual(problem, z);
    let t = [
        j[0][1] * j[1][2] - j[0][2] * j[1][1],
        j[0][2] * j[1][0] - j[0][0] * j[1][2],
        j[0][0] * j[1][1] - j[0][1] * j[1][0],
    ];
    normalize3(t)
}

/// Newton-project a nearby guess onto the branch, keeping displacement
/// orthogonal to the current tangent.
fn project_to_branch(problem: &Problem, guess: Vec3, tol: f64) -> Option<Vec3> {
    let mut z = guess;
    for _ in 0..40 {
        let (g, j) = residual(problem, z);
        if norm2(g) < tol {
            return Some(z);
        }
        let t = tangent(problem, z);
        let a = [j[0], j[1], t];
        let dz = solve3(a, [g[0], g[1], 0.0])?;
        if norm3(dz) > 0.5 {
            return None;
        }
        z = [z[0] - dz[0], z[1] - dz[1], z[2] - dz[2]];
    }
    None
}

struct RawBranch {
    nodes: Vec<BranchNode>,
    end_lo: BranchEnd,
    end_hi: BranchEnd,
}

/// Trace one component from a seed point on the branch.
fn trace_component(problem: &Problem, start: Vec3) -> Option<RawBranch> {
    let tol = problem.tol.newton.max(1e-13);
    let h0 = problem.tol.continuation_step;
    let start = project_to_branch(problem, start, tol)?;

    let one_direction = |sign: f64| -> (Vec<Vec3>, BranchEnd) {
        let mut pts = vec![start];
        let mut t_prev = tangent(problem, start);
        t_prev = [sign * t_prev[0], sign * t_prev[1], sign * t_prev[2]];
        let mut h = h0;
        let mut z = start;
        let mut total = 0.0;
        loop {
            let mut t = tangent(problem, z);
            if crate::linalg::dot3(t, t_prev) < 0.0 {
                t = [-t[0], -t[1], -t[2]];
            }
            let pred = [z[0] + h * t[0], z[1] + h * t[1], z[2] + h * t[2]];
            let corrected = {
                let mut w = pred;
                let mut ok = false;
                for _ in 0..12 {
                    let (g, j) = residual(problem, w);
                    if norm2(g) < tol {
                        ok = true;
                        break;
                    }
                    let a = [j[0], j[1], t];
                    match solve3(a, [g[0], g[1], 0.0]) {
                        Some(dz) => {
                            if norm3(dz) > 3.0 * h + 0.1 {
                                break;
                            }
                            w = [w[0] - dz[0], w[1] - dz[1], w[2] - dz[2]];
                        }
                        None => break,
                    }
                }
                ok.then_some(w)
            };
            match corrected {
                Some(w) => {
                    let step = norm3([w[0] - z[0], w[1] - z[1], w[2] - z[2]]);
                    if step < 1e-9 {
                        // corrector landed on the same point; nudge harder
                        h = (h * 2.0).min(0.05);
                        continue;
                    }
                    z = w;
                    total += step;
                    pts.push(z);
                    t_prev = t;
                    if z[2].abs() >= problem.eta_max {
                        return (pts, BranchEnd::EtaCutoff(if z[2] > 0.0 { 1 } else { -1 }));
                    }
                    // closure test against the seed point
                    if total > 6.0 * h0 {
                        let dx = crate::field::torus_dist([z[0], z[1]], [start[0], start[1]]);
                        if dx.hypot(z[2] - start[2]) < 0.75 * h {
                            pts.push(start);
                            return (pts, BranchEnd::ClosedLoop);
                        }
                    }
                    if h < h0 {
                        h = (h * 1.4).min(h0);
                    }
                    if total > 500.0 {
                        // runaway guard; treat like a cutoff
                        return (pts, BranchEnd::EtaCutoff(if z[2] >= 0.0 { 1 } else { -1 }));
                    }
                }
                None => {
                    h *= 0.5;
                    if h < 1e-6 {
                        return (pts, BranchEnd::EtaCutoff(if z[2] >= 0.0 { 1 } else { -1 }));
                    }
                }
            }
        }
    };

    let (fwd, end_hi) = one_direction(1.0);
    if end_hi == BranchEnd::ClosedLoop {
        let nodes = to_nodes(problem, &fwd);
        return Some(RawBranch { nodes, end_lo: BranchEnd::ClosedLoop, end_hi });
    }
    let (bwd, end_lo) = one_direction(-1.0);
    let mut pts: Vec<Vec3> = bwd.into_iter().skip(1).rev().collect();
    pts.extend(fwd);
    let nodes = to_nodes(problem, &pts);
    Some(RawBranch { nodes, end_lo, end_hi })
}

fn to_nodes(problem: &Problem, pts: &[Vec3]) -> Vec<BranchNode> {
    let mut s = 0.0;
    let mut out = Vec::with_capacity(pts.len());
    let mut prev: Option<Vec3> = None;
    for &z in pts {
        if let Some(p) = prev {
            s += norm3([z[0] - p[0], z[1] - p[1], z[2] - p[2]]);
        }
        prev = Some(z);
        out.push(BranchNode {
            lifted: z,
            s,
            det_hess: problem.det_hess_f_eta([z[0], z[1]], z[2]),
            mu: problem.mu.eval([z[0], z[1]]),
        });
    }
    out
}

/// Gradient of det Hess f_eta with respect to (x1, x2, eta).
fn grad_det(problem: &Problem, z: Vec3) -> Vec3 {
    let x = [z[0], z[1]];
    let gx = {
        // combined field f + eta*mu via the analytic third-derivative path
        let g = problem.f.grad_det_hess(x, Some((&problem.mu, z[2])));
        g
    };
    let h = problem.hess_f_eta(x, z[2]);
    let m = problem.mu.hess(x);
    let deta = m[0] * h[2] + h[0] * m[2] - 2.0 * h[1] * m[1];
    [gx[0], gx[1], deta]
}

/// Refine a fold bracket to the solution of {grad f_eta = 0, det Hess = 0}.
fn refine_fold(problem: &Problem, guess: Vec3) -> Option<Vec3> {
    let mut z = guess;
    for _ in 0..60 {
        let (g, j) = residual(problem, z);
        let det = problem.det_hess_f_eta([z[0], z[1]], z[2]);
        let r = [g[0], g[1], det];
        if norm2(g) < 1e-13 && det.abs() < 1e-13 {
            return Some(z);
        }
        let gd = grad_det(problem, z);
        let a = [j[0], j[1], gd];
        let dz = solve3(a, r)?;
        if norm3(dz) > 0.5 {
            return None;
        }
        z = [z[0] - dz[0], z[1] - dz[1], z[2] - dz[2]];
    }
    None
}

/// Full output of the tracer.
#[derive(Clone, Debug, Serialize)]
pub struct SlowManifold {
    pub branches: Vec<SlowBranch>,
    pub folds: Vec<FoldPoint>,
}

/// Trace every component of the slow manifold reachable from the critical
/// points and from grid solves at sampled eta levels, then locate folds and
/// critical-point markers.
pub fn trace_slow_manifold(
    problem: &Problem,
    crit: &[CritPointF],
    eta_samples: usize,
) -> Result<SlowManifold, SlowError> {
    let mut seeds: Vec<Vec3> = crit.iter().map(|c| c.point.to_vec3()).collect();
    let span = problem.eta_max * 0.98;
    for i in 0..eta_samples {
        let eta = -span + 2.0 * span * i as f64 / (eta_samples.max(2) - 1) as f64;
        for rest in crate::critical::fast_rests(problem, eta, 20) {
            seeds.push([rest.x[0], rest.x[1], eta]);
        }
    }

    let mut branches: Vec<SlowBranch> = Vec::new();
    for seed in seeds {
        if branches.iter().any(|b| b.dist_to(seed) < 5e-3) {
            continue;
        }
        let Some(raw) = trace_component(problem, seed) else {
            continue;
        };
        if raw.nodes.len() < 4 {
            continue;
        }
        // duplicate guard: compare a few probes against accepted branches
        let probes = [0.25, 0.5, 0.75].map(|f| raw.nodes[(f * (raw.nodes.len() - 1) as f64) as usize].lifted);
        if branches
            .iter()
            .any(|b| probes.iter().all(|&p| b.dist_to(p) < 1e-4))
        {
            continue;
        }
        branches.push(SlowBranch {
            id: branches.len(),
            nodes: raw.nodes,
            end_lo: raw.end_lo,
            end_hi: raw.end_hi,
            markers: Vec::new(),
            segments: Vec::new(),
        });
    }

    // folds: sign changes of det Hess along each branch
    let mut folds: Vec<FoldPoint> = Vec::new();
    for branch in &mut branches {
        let mut marker_list: Vec<Marker> = Vec::new();
        for i in 0..branch.nodes.len().saturating_sub(1) {
            let (n0, n1) = (branch.nodes[i], branch.nodes[i + 1]);
            if n0.det_hess == 0.0 || n0.det_hess.signum() == n1.det_hess.signum() {
                continue;
            }
            let w = n0.det_hess.abs() / (n0.det_hess.abs() + n1.det_hess.abs());
            let guess = [
                n0.lifted[0] + w * (n1.lifted[0] - n0.lifted[0]),
                n0.lifted[1] + w * (n1.lifted[1] - n0.lifted[1]),
                n0.lifted[2] + w * (n1.lifted[2] - n0.lifted[2]),
            ];
            let Some(zf) = refine_fold(problem, guess) else {
                continue;
            };
            // dedupe folds found from both adjacent intervals
            if folds.iter().any(|f| {
                crate::field::torus_dist3(f.point.to_vec3(), [crate::field::wrap_angle(zf[0]), crate::field::wrap_angle(zf[1]), zf[2]]) < 1e-7
            }) {
                continue;
            }
            let x = [zf[0], zf[1]];
            let (eigs, vecs) = sym2_eig(problem.hess_f_eta(x, zf[2]));
            let (center_dir, trans_eig) = if eigs[0].abs() < eigs[1].abs() {
                (vecs[0], eigs[1])
            } else {
                (vecs[1], eigs[0])
            };
            let lower_index = if trans_eig < 0.0 { 1 } else { 0 };
            let (c, d) = fold_model_coefficients(problem, x, zf[2], center_dir);
            if c.abs() < problem.tol.assumption_margin || d.abs() < problem.tol.assumption_margin {
                return Err(SlowError::FoldDegenerate { at: zf, c, d });
            }
            // slope of det along arclength from the branch tangent
            let t = tangent(problem, zf);
            let gd = grad_det(problem, zf);
            let det_slope = crate::linalg::dot3(gd, t);
            // eta side: sign of eta - eta_fold on the nearby branch
            let probe = if i + 2 < branch.nodes.len() { branch.nodes[i + 2] } else { n1 };
            let eta_side = if probe.lifted[2] >= zf[2] { 1 } else { -1 };
            let s_here = n0.s + w * (n1.s - n0.s);
            let fold = FoldPoint {
                id: folds.len(),
                point: ExtendedPoint::new(x, zf[2]),
                branch: branch.id,
                s: s_here,
                c,
                d,
                lower_index,
                center_dir,
                trans_eig,
                det_slope,
                eta_side,
                mu: problem.mu.eval(x),
            };
            marker_list.push(Marker { s: s_here, kind: MarkerKind::Fold(fold.id), lifted: zf });
            folds.push(fold);
        }

        // critical-point markers: mu sign changes, matched to known ids
        for i in 0..branch.nodes.len().saturating_sub(1) {
            let (n0, n1) = (branch.nodes[i], branch.nodes[i + 1]);
            if n0.mu == 0.0 || n0.mu.signum() == n1.mu.signum() {
                continue;
            }
            let w = n0.mu.abs() / (n0.mu.abs() + n1.mu.abs());
            let z = [
                n0.lifted[0] + w * (n1.lifted[0] - n0.lifted[0]),
                n0.lifted[1] + w * (n1.lifted[1] - n0.lifted[1]),
                n0.lifted[2] + w * (n1.lifted[2] - n0.lifted[2]),
            ];
            let matched = crit.iter().min_by(|a, b| {
                crate::field::torus_dist3(a.point.to_vec3(), [crate::field::wrap_angle(z[0]), crate::field::wrap_angle(z[1]), z[2]])
                    .partial_cmp(&crate::field::torus_dist3(b.point.to_vec3(), [crate::field::wrap_angle(z[0]), crate::field::wrap_angle(z[1]), z[2]]))
                    .unwrap()
            });
            if let Some(c) = matched {
                let d = crate::field::torus_dist3(c.point.to_vec3(), [crate::field::wrap_angle(z[0]), crate::field::wrap_angle(z[1]), z[2]]);
                if d < 0.05 {
                    let s_here = n0.s + w * (n1.s - n0.s);
                    marker_list.push(Marker { s: s_here, kind: MarkerKind::CritF(c.id), lifted: c.point.to_vec3() });
                }
            }
        }

        marker_list.sort_by(|a, b| a.s.partial_cmp(&b.s).unwrap());
        branch.markers = marker_list;
    }

    // fast-index segments between folds
    for branch in &mut branches {
        let mut cuts: Vec<f64> = vec![0.0];
        cuts.extend(
            branch
                .markers
                .iter()
                .filter(|m| matches!(m.kind, MarkerKind::Fold(_)))
                .map(|m| m.s),
        );
        cuts.push(branch.arc_length());
        let mut segments = Vec::new();
        for w in cuts.windows(2) {
            if w[1] - w[0] < 1e-9 {
                continue;
            }
            let mid = branch.at(0.5 * (w[0] + w[1]));
            let (idx, _) = crate::critical::fast_index(problem, [mid[0], mid[1]], mid[2]);
            segments.push(BranchSegment { s_lo: w[0], s_hi: w[1], fast_index: idx });
        }
        branch.segments = segments;
    }

    Ok(SlowManifold { branches, folds })
}

/// Slow-equation velocity at a branch node: eta' = -mu(x).
pub fn slow_velocity(problem: &Problem, node: &BranchNode) -> f64 {
    -problem.mu.eval(node.point().x)
}

/// Fit the local fold model coefficients (c, d) from the flow field in the
/// adapted frame: the center-direction velocity expands as
/// v(w, eta) = c (eta - eta_fold) + d w^2 + ...
pub fn fold_model_coefficients(problem: &Problem, x: Vec2, eta: f64, center: Vec2) -> (f64, f64) {
    let v = |dx: f64, deta: f64| -> f64 {
        let y = [x[0] + dx * center[0], x[1] + dx * center[1]];
        let g = problem.grad_f_eta(y, eta + deta);
        -dot2(g, center)
    };
    let de = 1e-5;
    let c = (v(0.0, de) - v(0.0, -de)) / (2.0 * de);
    let dw = 1e-4;
    let d = (v(dw, 0.0) + v(-dw, 0.0)) / (2.0 * dw * dw);
    (c, d)
}

/// Report the local model of a detected fold and cross-check the branch
/// parabola: the quadratic coefficient of eta along the branch must equal
/// -d/c within the stated tolerance.
pub fn fold_local_model(
    problem: &Problem,
    branch: &SlowBranch,
    fold: &FoldPoint,
) -> Result<(f64, f64, f64), SlowError> {
    let (c, d) = (fold.c, fold.d);
    if c.abs() < problem.tol.assumption_margin || d.abs() < problem.tol.assumption_margin {
        return Err(SlowError::FoldDegenerate { at: fold.point.to_vec3(), c, d });
    }
    // least-squares fit of eta ~ eta_fold + q w^2 against branch nodes
    let zf = branch.at(fold.s);
    let mut num = 0.0;
    let mut den = 0.0;
    for node in &branch.nodes {
        if (node.s - fold.s).abs() > 0.12 {
            continue;
        }
        let rel = [node.lifted[0] - zf[0], node.lifted[1] - zf[1]];
        let w = dot2(rel, fold.center_dir);
        let de = node.lifted[2] - zf[2];
        num += w * w * de;
        den += w * w * w * w;
    }
    let q = if den > 0.0 { num / den } else { 0.0 };
    Ok((c, d, q))
}

/// The two branch points paired by the canonical fold parametrization at
/// parameter s > 0: eta = eta_fold + side * s^2, the higher-index point
/// first. Solved directly from the local frame rather than walking nodes.
pub fn fold_pair_points(
    problem: &Problem,
    fold: &FoldPoint,
    s: f64,
) -> Option<(Vec3, Vec3)> {
    let eta = fold.point.eta + fold.eta_side as f64 * s * s;
    // In the local model 0 = c(eta - eta_p) + d w^2 gives w = +-sqrt(-c/d * de)
    let de = fold.eta_side as f64 * s * s;
    let arg = -fold.c / fold.d * de;
    if arg <= 0.0 {
        return None;
    }
    let w = arg.sqrt();
    let base = fold.point.to_vec3();
    let mk = |sign: f64| -> Option<Vec3> {
        let guess = [
            base[0] + sign * w * fold.center_dir[0],
            base[1] + sign * w * fold.center_dir[1],
            eta,
        ];
        // Newton in x at frozen eta
        let rest = crate::critical::polish_fast_rest(problem, eta, [guess[0], guess[1]])?;
        Some([rest.x[0], rest.x[1], eta])
    };
    let a = mk(1.0)?;
    let b = mk(-1.0)?;
    if crate::field::torus_dist([a[0], a[1]], [b[0], b[1]]) < 1e-10 {
        return None;
    }
    let (ia, _) = crate::critical::fast_index(problem, [a[0], a[1]], eta);
    let (ib, _) = crate::critical::fast_index(problem, [b[0], b[1]], eta);
    if ia == ib {
        return None;
    }
    if ia > ib {
        Some((a, b))
    } else {
        Some((b, a))
    }
}

/// The unique short fast orbit across a fold: from the higher-index paired
/// point to the lower-index one at the same eta.
pub fn short_orbit(problem: &Problem, fold: &FoldPoint, s: f64) -> Result<Trajectory, SlowError> {
    let (hi, lo) = fold_pair_points(problem, fold, s).ok_or(SlowError::NotFound { fold: fold.id, s })?;
    let eta = hi[2];
    let (hi_idx, _) = crate::critical::fast_index(problem, [hi[0], hi[1]], eta);
    let sep_delta = 1e-7;
    let budget = Budget::for_fast_flow();
    let target = RestTarget { id: 0, point: lo, basin_radius: 0.35 * crate::field::torus_dist([hi[0], hi[1]], [lo[0], lo[1]]).max(1e-4) };
    let source = RestTarget { id: 1, point: hi, basin_radius: 0.35 * crate::field::torus_dist([hi[0], hi[1]], [lo[0], lo[1]]).max(1e-4) };

    if hi_idx == 1 {
        // saddle above: follow its unstable separatrix toward the sink below
        let (_, vecs) = sym2_eig(problem.hess_f_eta([hi[0], hi[1]], eta));
        let vu = vecs[0]; // most-negative Hessian eigenvalue = unstable flow direction
        for sign in [1.0, -1.0] {
            let start = [hi[0] + sign * sep_delta * vu[0], hi[1] + sign * sep_delta * vu[1], eta];
            let run = FlowRun::new(problem, 0.0);
            let (traj, _) = run.integrate(start, budget, &[target]);
            if traj.terminal == crate::flow::Terminal::ConvergedTo(0) {
                return Ok(traj);
            }
        }
        Err(SlowError::NotFound { fold: fold.id, s })
    } else {
        // source above a saddle: trace the saddle's stable separatrix backward
        let (_, vecs) = sym2_eig(problem.hess_f_eta([lo[0], lo[1]], eta));
        let vs = vecs[1]; // positive Hessian eigenvalue = stable flow direction
        for sign in [1.0, -1.0] {
            let start = [lo[0] + sign * sep_delta * vs[0], lo[1] + sign * sep_delta * vs[1], eta];
            let mut run = FlowRun::new(problem, 0.0);
            run.options.backward = true;
            let (traj, _) = run.integrate(start, budget, &[source]);
            if traj.terminal == crate::flow::Terminal::ConvergedTo(1) {
                return Ok(reverse_trajectory(problem, traj));
            }
        }
        Err(SlowError::NotFound { fold: fold.id, s })
    }
}

/// Re-orient a backward-integrated trajectory as a forward one.
pub fn reverse_trajectory(problem: &Problem, traj: Trajectory) -> Trajectory {
    let total = traj.time;
    let mut samples: Vec<(f64, ExtendedPoint)> = traj
        .samples
        .iter()
        .rev()
        .map(|&(t, p)| (total - t, p))
        .collect();
    if samples.is_empty() {
        samples.push((0.0, ExtendedPoint::new([0.0, 0.0], 0.0)));
    }
    let f_start = problem.f_value(&samples.first().unwrap().1);
    let f_end = problem.f_value(&samples.last().unwrap().1);
    let end = samples.last().unwrap().1;
    Trajectory {
        lambda: traj.lambda,
        samples,
        terminal: traj.terminal,
        energy_spent: traj.energy_spent,
        f_start,
        f_end,
        end_lifted: end.to_vec3(),
        steps: traj.steps,
        time: traj.time,
        step_failure: traj.step_failure,
        monotone_violation: traj.monotone_violation,
        min_grad_outside_basins: traj.min_grad_outside_basins,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_has_four_folds_with_margins() {
        let p = Problem::default_example();
        let crit = crate::critical::find_crit_f(&p, 48).unwrap();
        let sm = trace_slow_manifold(&p, &crit, 25).unwrap();
        assert_eq!(sm.folds.len(), 4, "folds: {:?}", sm.folds.iter().map(|f| f.point.eta).collect::<Vec<_>>());
        for fold in &sm.folds {
            assert!(fold.mu.abs() > 0.3, "mu at fold {:?}", fold.mu);
            assert!(fold.c.abs() > 0.1 && fold.d.abs() > 0.1);
            assert!(fold.det_slope.abs() > 1e-3);
            // exactly one Hessian eigenvalue near zero
            let ([l0, l1], _) = sym2_eig(p.hess_f_eta(fold.point.x, fold.point.eta));
            let small = l0.abs().min(l1.abs());
            let large = l0.abs().max(l1.abs());
            assert!(small < 1e-9 && large > 0.1);
        }
    }

    #[test]
    fn branch_nodes_satisfy_residual_and_eta_turns_only_at_folds() {
        let p = Problem::default_example();
        let crit = crate::critical::find_crit_f(&p, 48).unwrap();
        let sm = trace_slow_manifold(&p, &crit, 25).unwrap();
        for br in &sm.branches {
            for node in &br.nodes {
                let g = p.grad_f_eta(node.point().x, node.point().eta);
                assert!(norm2(g) < 1e-9);
            }
            // eta extrema among interior nodes must all be fold markers
            for i in 1..br.nodes.len() - 1 {
                let (a, b, c) = (br.nodes[i - 1].lifted[2], br.nodes[i].lifted[2], br.nodes[i + 1].lifted[2]);
                let is_extremum = (b - a) * (c - b) < 0.0;
                if is_extremum {
                    let s = br.nodes[i].s;
                    let near_fold = br
                        .markers
                        .iter()
                        .any(|m| matches!(m.kind, MarkerKind::Fold(_)) && (m.s - s).abs() < 0.05);
                    assert!(near_fold, "eta extremum away from folds at s = {s}");
                }
            }
        }
    }

    #[test]
    fn fold_sides_carry_adjacent_indices() {
        let p = Problem::default_example();
        let crit = crate::critical::find_crit_f(&p, 48).unwrap();
        let sm = trace_slow_manifold(&p, &crit, 25).unwrap();
        for fold in &sm.folds {
            let br = &sm.branches[fold.branch];
            let lo = br.fast_index_at((fold.s - 0.05).max(0.0));
            let hi = br.fast_index_at((fold.s + 0.05).min(br.arc_length()));
            assert_eq!(lo.max(hi), lo.min(hi) + 1, "indices around fold: {lo} {hi}");
            assert_eq!(fold.lower_index, lo.min(hi));
        }
    }

    #[test]
    fn crit_markers_lie_on_branches() {
        let p = Problem::default_example();
        let crit = crate::critical::find_crit_f(&p, 48).unwrap();
        let sm = trace_slow_manifold(&p, &crit, 25).unwrap();
        let mut seen = std::collections::HashSet::new();
        for br in &sm.branches {
            for m in &br.markers {
                if let MarkerKind::CritF(id) = m.kind {
                    seen.insert(id);
                }
            }
        }
        assert_eq!(seen.len(), crit.len(), "every critical point is a branch marker");
    }

    #[test]
    fn slow_velocity_sign_changes_only_at_crit_markers() {
        let p = Problem::default_example();
        let crit = crate::critical::find_crit_f(&p, 48).unwrap();
        let sm = trace_slow_manifold(&p, &crit, 25).unwrap();
        for br in &sm.branches {
            for i in 0..br.nodes.len() - 1 {
                let (a, b) = (&br.nodes[i], &br.nodes[i + 1]);
                if a.mu.signum() != b.mu.signum() && a.mu != 0.0 {
                    let near_crit = br.markers.iter().any(|m| {
                        matches!(m.kind, MarkerKind::CritF(_)) && m.s >= a.s - 1e-9 && m.s <= b.s + 1e-9
                    });
                    assert!(near_crit, "mu sign change away from critical markers");
                }
            }
        }
    }
}
