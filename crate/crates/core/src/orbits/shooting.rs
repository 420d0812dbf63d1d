//! Connecting-orbit counting for the rescaled flow. Crossings of a target's
//! stable manifold are located along the one-parameter shooting family from
//! the source's unstable sphere (sign of the passage side flips exactly at a
//! crossing), then each crossing is polished into a verified orbit by damped
//! Newton on a multiple-shooting system. Seeds from the adiabatic structures
//! (level-set arcs, fast-slow sequences, neighboring-lambda orbits) enter the
//! same polisher, so counts stay available where raw shooting loses precision.

use rayon::prelude::*;
use serde::Serialize;

use crate::critical::CritPointF;
use crate::field::{ExtendedPoint, Problem};
use crate::flow::{Budget, FlowRun, RestTarget, Terminal, Trajectory};
use crate::linalg::{dot3, norm3, normalize3, Sym3, Vec3};

/// Shooting parameters; the defaults satisfy the robustness sweep.
#[derive(Clone, Copy, Debug)]
pub struct ShootParams {
    pub r0: f64,
    pub n_angles: usize,
    /// Attribution gate as a fraction of the smallest pairwise critical
    /// distance.
    pub gate_fraction: f64,
    pub ode_scale: f64,
    pub newton_max_iter: usize,
}

impl Default for ShootParams {
    fn default() -> Self {
        Self { r0: 1e-4, n_angles: 96, gate_fraction: 0.5, ode_scale: 1.0, newton_max_iter: 40 }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ShootError {
    #[error("lambda = {lambda} is not regular for pair ({p}, {q}): {why}")]
    NonRegularLambda { lambda: f64, p: usize, q: usize, why: String },
    #[error("integration budget exceeded while scanning from critical point {p}")]
    BudgetExceeded { p: usize },
}

/// One verified connecting orbit.
#[derive(Clone, Debug, Serialize)]
pub struct ConnectingOrbit {
    pub p: usize,
    pub q: usize,
    pub lambda: f64,
    /// Start-direction angle in the unstable frame of p.
    pub theta: f64,
    /// Multiple-shooting nodes (lifted) and segment durations.
    pub nodes: Vec<Vec3>,
    pub durations: Vec<f64>,
    pub witness: Trajectory,
    /// Angular width over which the near-q passage persists in the scan
    /// (transversality margin; infinity when found by seeding only).
    pub angle_margin: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PairCount {
    pub p: usize,
    pub q: usize,
    pub parity: usize,
    pub orbits: Vec<ConnectingOrbit>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CountOutcome {
    pub p: usize,
    pub lambda: f64,
    pub pairs: Vec<PairCount>,
    pub flags: Vec<String>,
}

/// Initial guess for the orbit polisher.
#[derive(Clone, Debug)]
pub struct OrbitSeed {
    pub q: usize,
    /// Time-stamped polyline from near p to near q (lifted coordinates).
    pub path: Vec<(f64, Vec3)>,
}

/// Unstable frame of a critical point in the lambda metric: directions u with
/// positive linearization eigenvalues, orthonormalized in the weighted inner
/// product and mapped back to plain coordinates.
pub fn unstable_frame(problem: &Problem, c: &CritPointF, lambda: f64) -> Vec<(f64, Vec3)> {
    let h = problem.hess_f_full(&c.point);
    let w = lambda.max(1e-12);
    // symmetrized -D^{1/2} H D^{1/2} with D = diag(1, 1, lambda^2)
    let d = [1.0, 1.0, w];
    let mut b = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            b[i][j] = -d[i] * h[i][j] * d[j];
        }
    }
    let (vals, vecs) = Sym3(b).eig();
    let mut out = Vec::new();
    for k in 0..3 {
        if vals[k] > 0.0 {
            let v = [d[0] * vecs[k][0], d[1] * vecs[k][1], d[2] * vecs[k][2]];
            out.push((vals[k], normalize3(v)));
        }
    }
    // strongest direction last so theta = 0 points along the mildest one
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

/// Co-orientation normal of the stable manifold of q: the left unstable
/// eigenvector of the linearization (orthogonal to the stable subspace).
fn stable_normal(problem: &Problem, q: &CritPointF, lambda: f64) -> Vec3 {
    let h = problem.hess_f_full(&q.point);
    let w = lambda.max(1e-12);
    let d = [1.0, 1.0, w];
    let mut b = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            b[i][j] = -d[i] * h[i][j] * d[j];
        }
    }
    let (vals, vecs) = Sym3(b).eig();
    // largest positive eigenvalue's left eigenvector: D^{-1/2} w
    let mut best = 2usize;
    for k in 0..3 {
        if vals[k] > vals[best] {
            best = k;
        }
    }
    let wv = vecs[best];
    normalize3([wv[0] / d[0], wv[1] / d[1], wv[2] / d[2]])
}

fn crit_targets(problem: &Problem, crit: &[CritPointF]) -> Vec<RestTarget> {
    crit.iter()
        .map(|c| {
            let min_eig = c.hessian_eigs.iter().fold(f64::INFINITY, |a, &e| a.min(e.abs()));
            RestTarget {
                id: c.id,
                point: c.point.to_vec3(),
                basin_radius: (problem.tol.basin_factor * min_eig).clamp(1e-3, 0.2),
            }
        })
        .collect()
}

fn min_pairwise_distance(crit: &[CritPointF]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, a) in crit.iter().enumerate() {
        for b in crit.iter().skip(i + 1) {
            best = best.min(a.point.dist(&b.point));
        }
    }
    best.min(4.0)
}

struct ShotResult {
    terminal: Terminal,
    sides: Vec<f64>,
    dists: Vec<f64>,
    traj: Trajectory,
}

fn shoot(
    problem: &Problem,
    crit: &[CritPointF],
    lambda: f64,
    p: &CritPointF,
    frame: &[(f64, Vec3)],
    theta: f64,
    params: &ShootParams,
) -> ShotResult {
    let (v1, v2) = (frame[0].1, frame[1].1);
    let z0 = [
        p.point.x[0] + params.r0 * (theta.cos() * v1[0] + theta.sin() * v2[0]),
        p.point.x[1] + params.r0 * (theta.cos() * v1[1] + theta.sin() * v2[1]),
        p.point.eta + params.r0 * (theta.cos() * v1[2] + theta.sin() * v2[2]),
    ];
    let mut run = FlowRun::new(problem, lambda);
    run.options.rel_tol *= params.ode_scale;
    run.options.abs_tol *= params.ode_scale;
    let targets = crit_targets(problem, crit);
    run.side_dirs = crit.iter().map(|c| Some(stable_normal(problem, c, lambda))).collect();
    let (traj, approaches) = run.integrate(z0, Budget::for_lambda(lambda), &targets);
    ShotResult {
        terminal: traj.terminal,
        sides: approaches.iter().map(|a| a.side).collect(),
        dists: approaches.iter().map(|a| a.dist).collect(),
        traj,
    }
}

/// Linearization of the flow right-hand side (used by the variational solve).
fn rhs_jacobian(problem: &Problem, z: Vec3, lambda: f64) -> [[f64; 3]; 3] {
    let x = [z[0], z[1]];
    let h = problem.hess_f_eta(x, z[2]);
    let gm = problem.mu.grad(x);
    let l2 = lambda * lambda;
    [
        [-h[0], -h[1], -gm[0]],
        [-h[1], -h[2], -gm[1]],
        [-l2 * gm[0], -l2 * gm[1], 0.0],
    ]
}

/// Integrate state + 3x3 variational matrix for a fixed duration.
fn flow_with_variational(problem: &Problem, lambda: f64, z0: Vec3, tau: f64) -> (Vec3, [[f64; 3]; 3]) {
    // 12-dim state: z, then M columns
    let mut y = [0.0f64; 12];
    y[..3].copy_from_slice(&z0);
    y[3] = 1.0;
    y[7] = 1.0;
    y[11] = 1.0;
    let rhs = |y: &[f64; 12]| -> [f64; 12] {
        let z = [y[0], y[1], y[2]];
        let f = problem.flow_rhs(z, lambda);
        let j = rhs_jacobian(problem, z, lambda);
        let mut out = [0.0; 12];
        out[..3].copy_from_slice(&f);
        for col in 0..3 {
            for row in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += j[row][k] * y[3 + 3 * col + k];
                }
                out[3 + 3 * col + row] = s;
            }
        }
        out
    };
    // embedded DP(5,4) on the augmented system, error controlled on the state
    let mut t = 0.0;
    let mut h = (tau / 16.0).min(0.05).max(1e-8);
    let (rt, at) = (1e-11, 1e-13);
    let a = super::shooting::DP_A;
    let b5 = super::shooting::DP_B5;
    let b4 = super::shooting::DP_B4;
    while t < tau {
        h = h.min(tau - t);
        let mut k = [[0.0f64; 12]; 7];
        k[0] = rhs(&y);
        for stage in 0..6 {
            let mut ys = y;
            for j in 0..=stage {
                let aa = a[stage][j];
                if aa != 0.0 {
                    for d in 0..12 {
                        ys[d] += h * aa * k[j][d];
                    }
                }
            }
            k[stage + 1] = rhs(&ys);
        }
        let mut y5 = y;
        let mut y4 = y;
        for j in 0..7 {
            for d in 0..12 {
                y5[d] += h * b5[j] * k[j][d];
                y4[d] += h * b4[j] * k[j][d];
            }
        }
        let mut err: f64 = 0.0;
        for d in 0..3 {
            let sc = at + rt * y[d].abs().max(y5[d].abs());
            err = err.max(((y5[d] - y4[d]) / sc).abs());
        }
        if err > 1.0 {
            h *= (0.9 * err.powf(-0.2)).max(0.2);
            if h < 1e-13 {
                break;
            }
            continue;
        }
        y = y5;
        t += h;
        h *= if err > 1e-30 { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) } else { 5.0 };
    }
    let z = [y[0], y[1], y[2]];
    let mut m = [[0.0; 3]; 3];
    for col in 0..3 {
        for row in 0..3 {
            m[row][col] = y[3 + 3 * col + row];
        }
    }
    (z, m)
}

pub(crate) const DP_A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
pub(crate) const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
pub(crate) const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// State-only flow over a fixed duration (for line searches).
fn flow_fixed(problem: &Problem, lambda: f64, z0: Vec3, tau: f64) -> Vec3 {
    let mut y = z0;
    let mut t = 0.0;
    let mut h = (tau / 16.0).min(0.05).max(1e-8);
    let (rt, at) = (1e-11, 1e-13);
    let rhs = |z: &Vec3| problem.flow_rhs(*z, lambda);
    while t < tau {
        h = h.min(tau - t);
        let mut k = [[0.0f64; 3]; 7];
        k[0] = rhs(&y);
        for stage in 0..6 {
            let mut ys = y;
            for j in 0..=stage {
                let aa = DP_A[stage][j];
                if aa != 0.0 {
                    for d in 0..3 {
                        ys[d] += h * aa * k[j][d];
                    }
                }
            }
            k[stage + 1] = rhs(&ys);
        }
        let mut y5 = y;
        let mut y4 = y;
        for j in 0..7 {
            for d in 0..3 {
                y5[d] += h * DP_B5[j] * k[j][d];
                y4[d] += h * DP_B4[j] * k[j][d];
            }
        }
        let mut err: f64 = 0.0;
        for d in 0..3 {
            let sc = at + rt * y[d].abs().max(y5[d].abs());
            err = err.max(((y5[d] - y4[d]) / sc).abs());
        }
        if err > 1.0 {
            h *= (0.9 * err.powf(-0.2)).max(0.2);
            if h < 1e-13 {
                break;
            }
            continue;
        }
        y = y5;
        t += h;
        h *= if err > 1e-30 { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) } else { 5.0 };
    }
    y
}

/// Local growth-rate bound used to split guesses into well-conditioned
/// shooting segments.
fn growth_rate(problem: &Problem, z: Vec3, lambda: f64) -> f64 {
    let j = rhs_jacobian(problem, z, lambda);
    let mut fro = 0.0;
    for row in &j {
        for v in row {
            fro += v * v;
        }
    }
    fro.sqrt().max(0.2)
}

/// Split a time-stamped path into multiple-shooting nodes so that each
/// segment accumulates at most `max_exponent` of linear growth.
fn mesh_from_path(
    problem: &Problem,
    lambda: f64,
    path: &[(f64, Vec3)],
    max_exponent: f64,
) -> (Vec<Vec3>, Vec<f64>) {
    let mut nodes = vec![path[0].1];
    let mut durations = Vec::new();
    let mut acc = 0.0;
    let mut t_last = path[0].0;
    for w in path.windows(2) {
        let (t0, z0) = w[0];
        let (t1, _) = w[1];
        let dt = t1 - t0;
        if dt <= 0.0 {
            continue;
        }
        acc += growth_rate(problem, z0, lambda) * dt;
        if acc >= max_exponent {
            nodes.push(w[1].1);
            durations.push(t1 - t_last);
            t_last = t1;
            acc = 0.0;
        }
    }
    let t_end = path.last().unwrap().0;
    if t_end > t_last + 1e-12 || durations.is_empty() {
        nodes.push(path.last().unwrap().1);
        durations.push((t_end - t_last).max(1e-6));
    }
    (nodes, durations)
}

/// Damped-Newton polish of a connecting-orbit guess into a true orbit.
///
/// Unknowns: the start angle on p's unstable circle and the interior
/// multiple-shooting nodes. The end condition kills the component of the
/// final point along q's unstable direction; convergence into q's basin is
/// verified afterwards by direct integration.
pub fn polish_connection(
    problem: &Problem,
    crit: &[CritPointF],
    lambda: f64,
    p: &CritPointF,
    q: &CritPointF,
    seed_path: &[(f64, Vec3)],
    params: &ShootParams,
) -> Option<ConnectingOrbit> {
    if seed_path.len() < 2 {
        return None;
    }
    let frame = unstable_frame(problem, p, lambda);
    if frame.len() < p.index_f {
        return None;
    }
    let p0 = p.point.to_vec3();

    // initial theta from the seed's start displacement
    let rel0 = [
        seed_path[0].1[0] - p0[0],
        seed_path[0].1[1] - p0[1],
        seed_path[0].1[2] - p0[2],
    ];
    let two_dim = p.index_f >= 2;
    let (v1, v2) = (frame[0].1, frame[1.min(frame.len() - 1)].1);
    // v1, v2 are unit but not mutually orthogonal (images of an orthonormal
    // pair under the metric weight); recover the angle through the Gram matrix
    let mut theta = if two_dim {
        let g11 = dot3(v1, v1);
        let g12 = dot3(v1, v2);
        let g22 = dot3(v2, v2);
        let b = [dot3(rel0, v1), dot3(rel0, v2)];
        match crate::linalg::solve2([[g11, g12], [g12, g22]], b) {
            Some([c, s]) => s.atan2(c),
            None => dot3(rel0, v2).atan2(dot3(rel0, v1)),
        }
    } else {
        if dot3(rel0, v1) >= 0.0 {
            0.0
        } else {
            std::f64::consts::PI
        }
    };

    let (mut nodes, durations) = mesh_from_path(problem, lambda, seed_path, 2.5);
    let m = durations.len();
    if m == 0 {
        return None;
    }
    // unknowns: theta, a global log time-scale, interior nodes z_1..z_{m-1}
    let n_unknown = 2 + 3 * (m - 1);

    let z0_of = |theta: f64| -> Vec3 {
        if two_dim {
            [
                p0[0] + params.r0 * (theta.cos() * v1[0] + theta.sin() * v2[0]),
                p0[1] + params.r0 * (theta.cos() * v1[1] + theta.sin() * v2[1]),
                p0[2] + params.r0 * (theta.cos() * v1[2] + theta.sin() * v2[2]),
            ]
        } else {
            let s = theta.cos().signum();
            [p0[0] + s * params.r0 * v1[0], p0[1] + s * params.r0 * v1[1], p0[2] + s * params.r0 * v1[2]]
        }
    };
    nodes[0] = z0_of(theta);

    // target in the same lift as the seed's tail
    let qv = {
        let zl = seed_path.last().unwrap().1;
        let mut qq = q.point.to_vec3();
        for d in 0..2 {
            let k = ((zl[d] - qq[d]) / crate::field::TWO_PI).round();
            qq[d] += k * crate::field::TWO_PI;
        }
        qq
    };
    // anchor direction: the endpoint must approach q along the ray the seed
    // came in on; two conditions orthogonal to it close the system without
    // admitting the sliding family of merely-passing orbits. Measured at the
    // last seed point far enough from q to carry direction information.
    let anchor = {
        let mut dir = [0.0, 0.0, 1.0];
        for (_, zl) in seed_path.iter().rev() {
            let rel = [zl[0] - qv[0], zl[1] - qv[1], zl[2] - qv[2]];
            let n = norm3(rel);
            if n > 1e-4 {
                dir = [rel[0] / n, rel[1] / n, rel[2] / n];
                break;
            }
        }
        dir
    };
    let (w1, w2) = orthonormal_complement(anchor);
    // residual layout: [continuity (3 per interior node); plane; norm]
    let residual_only = |_theta: f64, log_sigma: f64, nodes: &[Vec3]| -> Vec<f64> {
        let sigma = log_sigma.exp();
        let ends: Vec<Vec3> = (0..m)
            .into_par_iter()
            .map(|i| flow_fixed(problem, lambda, nodes[i], sigma * durations[i]))
            .collect();
        let mut r = vec![0.0; n_unknown];
        for i in 0..m - 1 {
            for d in 0..3 {
                r[3 * i + d] = ends[i][d] - nodes[i + 1][d];
            }
        }
        let zl = ends[m - 1];
        let rel = [zl[0] - qv[0], zl[1] - qv[1], zl[2] - qv[2]];
        r[n_unknown - 2] = dot3(rel, w1);
        r[n_unknown - 1] = dot3(rel, w2);
        r
    };
    let residual_and_jac = |theta: f64, log_sigma: f64, nodes: &[Vec3]| -> (Vec<f64>, Vec<Vec<f64>>) {
        let sigma = log_sigma.exp();
        let results: Vec<(Vec3, [[f64; 3]; 3])> = (0..m)
            .into_par_iter()
            .map(|i| flow_with_variational(problem, lambda, nodes[i], sigma * durations[i]))
            .collect();
        let mut r = vec![0.0; n_unknown];
        let mut jac = vec![vec![0.0; n_unknown]; n_unknown];
        let dz0 = if two_dim {
            [
                params.r0 * (-theta.sin() * v1[0] + theta.cos() * v2[0]),
                params.r0 * (-theta.sin() * v1[1] + theta.cos() * v2[1]),
                params.r0 * (-theta.sin() * v1[2] + theta.cos() * v2[2]),
            ]
        } else {
            [0.0, 0.0, 0.0]
        };
        // d(end_i)/d(log sigma) = sigma * tau_i * f(end_i)
        for i in 0..m - 1 {
            let (ze, me) = &results[i];
            let fe = problem.flow_rhs(*ze, lambda);
            for d in 0..3 {
                r[3 * i + d] = ze[d] - nodes[i + 1][d];
            }
            for row in 0..3 {
                if i == 0 {
                    let mut s = 0.0;
                    for k in 0..3 {
                        s += me[row][k] * dz0[k];
                    }
                    jac[3 * i + row][0] = s;
                } else {
                    for k in 0..3 {
                        jac[3 * i + row][2 + 3 * (i - 1) + k] = me[row][k];
                    }
                }
                jac[3 * i + row][1] = sigma * durations[i] * fe[row];
                jac[3 * i + row][2 + 3 * i + row] = -1.0;
            }
        }
        let (zl, ml) = &results[m - 1];
        let fl = problem.flow_rhs(*zl, lambda);
        let rel = [zl[0] - qv[0], zl[1] - qv[1], zl[2] - qv[2]];
        r[n_unknown - 2] = dot3(rel, w1);
        r[n_unknown - 1] = dot3(rel, w2);
        for k in 0..3 {
            let mut s1 = 0.0;
            let mut s2 = 0.0;
            for row in 0..3 {
                s1 += w1[row] * ml[row][k];
                s2 += w2[row] * ml[row][k];
            }
            if m == 1 {
                jac[n_unknown - 2][0] += s1 * dz0[k];
                jac[n_unknown - 1][0] += s2 * dz0[k];
            } else {
                jac[n_unknown - 2][2 + 3 * (m - 2) + k] = s1;
                jac[n_unknown - 1][2 + 3 * (m - 2) + k] = s2;
            }
        }
        jac[n_unknown - 2][1] = sigma * durations[m - 1] * dot3(w1, fl);
        jac[n_unknown - 1][1] = sigma * durations[m - 1] * dot3(w2, fl);
        (r, jac)
    };

    let debug = std::env::var("LMORSE_DEBUG_POLISH").is_ok();
    if std::env::var("LMORSE_DEBUG_POLISH").map_or(false, |v| v == "3") {
        // finite-difference check of the analytic Jacobian
        let (r0v, jac) = residual_and_jac(theta, 0.0, &nodes);
        let h = 1e-7;
        let mut worst = (0.0f64, 0usize, 0usize);
        for col in 0..n_unknown {
            let mut th = theta;
            let mut ls = 0.0;
            let mut nd = nodes.clone();
            match col {
                0 => th += h,
                1 => ls += h,
                _ => nd[1 + (col - 2) / 3][(col - 2) % 3] += h,
            }
            nd[0] = z0_of(th);
            let rp = residual_only(th, ls, &nd);
            for row in 0..n_unknown {
                let fd = (rp[row] - r0v[row]) / h;
                let dev = (fd - jac[row][col]).abs() / (1.0 + jac[row][col].abs());
                if dev > worst.0 {
                    worst = (dev, row, col);
                }
            }
        }
        eprintln!(
            "    FD jac check: worst rel dev {:.3e} at (row {}, col {}) m={m}",
            worst.0, worst.1, worst.2
        );
    }
    let mut log_sigma = 0.0f64;
    let mut best_norm = f64::INFINITY;
    for it in 0..params.newton_max_iter {
        nodes[0] = z0_of(theta);
        let (r, jac) = residual_and_jac(theta, log_sigma, &nodes);
        let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if debug {
            eprintln!("    newton[{it}] m={m} |r|={rn:.3e} theta={theta:.6} sigma={:.3}", log_sigma.exp());
            if it == 0 && std::env::var("LMORSE_DEBUG_POLISH").map_or(false, |v| v == "2") {
                for i in 0..m - 1 {
                    let b = (r[3 * i] * r[3 * i] + r[3 * i + 1] * r[3 * i + 1] + r[3 * i + 2] * r[3 * i + 2]).sqrt();
                    eprintln!("      block {i}: |r|={b:.3e} node={:?} tau={:.3}", nodes[i], durations[i]);
                }
                eprintln!("      plane={:.3e} norm={:.3e} tau_last={:.3}", r[n_unknown - 2], r[n_unknown - 1], durations[m - 1]);
            }
        }
        if rn < 1e-10 {
            best_norm = rn;
            break;
        }
        let Some(du) = dense_solve(jac, r) else { return None };
        if debug {
            let dmax = du.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            eprintln!("      |du|_inf={dmax:.3e} du_theta={:.3e} du_sigma={:.3e}", du[0], du[1]);
        }
        let mut alpha: f64 = 1.0;
        // keep the step sane in the global parameters
        if du[0].abs() > 0.5 {
            alpha = alpha.min(0.5 / du[0].abs());
        }
        if du[1].abs() > 0.5 {
            alpha = alpha.min(0.5 / du[1].abs());
        }
        let mut improved = false;
        for _ in 0..10 {
            let theta_try = theta - alpha * du[0];
            let sigma_try = log_sigma - alpha * du[1];
            let mut nodes_try = nodes.clone();
            for i in 1..m {
                for d in 0..3 {
                    nodes_try[i][d] -= alpha * du[2 + 3 * (i - 1) + d];
                }
            }
            nodes_try[0] = z0_of(theta_try);
            let r_try = residual_only(theta_try, sigma_try, &nodes_try);
            let rn_try = r_try.iter().map(|v| v * v).sum::<f64>().sqrt();
            if debug {
                eprintln!("      try alpha={alpha:.3e}: |r|={rn_try:.3e}");
            }
            if rn_try < rn * (1.0 - 0.25 * alpha) || rn_try < 1e-10 {
                theta = theta_try.rem_euclid(std::f64::consts::TAU);
                log_sigma = sigma_try.clamp(-3.0, 3.0);
                nodes = nodes_try;
                best_norm = rn_try;
                improved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !improved {
            if debug {
                eprintln!("    newton stalled at |r|={best_norm:.3e}");
            }
            return None;
        }
        if best_norm < 1e-10 {
            break;
        }
    }
    if best_norm > 1e-8 {
        if debug {
            eprintln!("    newton out of iterations at |r|={best_norm:.3e}");
        }
        return None;
    }
    let durations: Vec<f64> = durations.iter().map(|d| d * log_sigma.exp()).collect();

    // verify: integrate the last node onward into q's basin
    let targets = crit_targets(problem, crit);
    let run = FlowRun::new(problem, lambda);
    let (z_end, _) = flow_with_variational(problem, lambda, nodes[m - 1], durations[m - 1]);
    let dist_q = crate::field::torus_dist3(
        [crate::field::wrap_angle(z_end[0]), crate::field::wrap_angle(z_end[1]), z_end[2]],
        qv,
    );
    if dist_q > 0.4 {
        if debug {
            eprintln!("    end point {dist_q:.3e} from target");
        }
        return None;
    }
    let (tail, _) = run.integrate(z_end, Budget::for_lambda(lambda), &targets);
    if tail.terminal != Terminal::ConvergedTo(q.id) {
        if debug {
            eprintln!("    tail terminal {:?} (wanted {})", tail.terminal, q.id);
        }
        return None;
    }

    // assemble the witness: chain the segments, then the tail
    let mut witness_samples: Vec<(f64, ExtendedPoint)> = Vec::new();
    let mut t_off = 0.0;
    let mut energy = 0.0;
    let mut monotone = 0.0f64;
    let mut min_grad: f64 = f64::INFINITY;
    for i in 0..m {
        let (seg, _) = run.integrate(nodes[i], Budget::new(durations[i], 2_000_000), &[]);
        energy += seg.energy_spent;
        monotone = monotone.max(seg.monotone_violation);
        min_grad = min_grad.min(seg.min_grad_outside_basins);
        for (t, pnt) in &seg.samples {
            witness_samples.push((t_off + t, *pnt));
        }
        t_off += durations[i];
    }
    energy += tail.energy_spent;
    monotone = monotone.max(tail.monotone_violation);
    for (t, pnt) in &tail.samples {
        witness_samples.push((t_off + t, *pnt));
    }
    let f_start = problem.f_eta([nodes[0][0], nodes[0][1]], nodes[0][2]);
    let witness = Trajectory {
        lambda,
        samples: witness_samples,
        terminal: Terminal::ConvergedTo(q.id),
        energy_spent: energy,
        f_start,
        f_end: tail.f_end,
        end_lifted: tail.end_lifted,
        steps: 0,
        time: t_off + tail.time,
        step_failure: false,
        monotone_violation: monotone,
        min_grad_outside_basins: min_grad,
    };
    Some(ConnectingOrbit {
        p: p.id,
        q: q.id,
        lambda,
        theta: normalize_angle(theta),
        nodes,
        durations,
        witness,
        angle_margin: f64::INFINITY,
    })
}


/// Classify a single start point against the critical targets, recording
/// per-target passage data (the workhorse of the cascade bisection).
fn classify_from(
    problem: &Problem,
    crit: &[CritPointF],
    lambda: f64,
    z0: Vec3,
    params: &ShootParams,
) -> ShotResult {
    let mut run = FlowRun::new(problem, lambda);
    run.options.rel_tol *= params.ode_scale;
    run.options.abs_tol *= params.ode_scale;
    let targets = crit_targets(problem, crit);
    run.side_dirs = crit.iter().map(|c| Some(stable_normal(problem, c, lambda))).collect();
    let (traj, approaches) = run.integrate(z0, Budget::for_lambda(lambda), &targets);
    ShotResult {
        terminal: traj.terminal,
        sides: approaches.iter().map(|a| a.side).collect(),
        dists: approaches.iter().map(|a| a.dist).collect(),
        traj,
    }
}

/// Discrete label distinguishing the two sides of a stable-manifold
/// crossing: the terminal tag plus gated passage-side signs.
fn crossing_label(shot: &ShotResult, q_ids: &[usize], gate: f64) -> (Terminal, Vec<i8>) {
    let signs = q_ids
        .iter()
        .map(|&q| {
            if shot.dists[q] < gate && shot.sides[q] != 0.0 {
                if shot.sides[q] > 0.0 {
                    1
                } else {
                    -1
                }
            } else {
                0
            }
        })
        .collect();
    (shot.terminal, signs)
}

/// Locate a connecting orbit by cascaded bisection with re-anchoring: the
/// bracket [z_a, z_b] must classify to different labels. Each stage bisects
/// the chord to floating precision, then advances the anchor to where the
/// bracket trajectories have separated back to a workable width, recovering
/// fresh precision; the orbit is found when a bisection iterate lands in the
/// target basin. Returns the anchor chain and the final converged run.
#[allow(clippy::too_many_arguments)]
fn cascade_connect(
    problem: &Problem,
    crit: &[CritPointF],
    lambda: f64,
    q_ids: &[usize],
    gate: f64,
    mut z_a: Vec3,
    mut z_b: Vec3,
    params: &ShootParams,
) -> Option<(usize, Vec<Vec3>, Vec<f64>, Trajectory)> {
    let debug = std::env::var("LMORSE_DEBUG_CASCADE").is_ok();
    let mut anchors: Vec<Vec3> = vec![z_a];
    let mut spans: Vec<f64> = Vec::new();
    let mut shot_a = classify_from(problem, crit, lambda, z_a, params);
    let mut shot_b = classify_from(problem, crit, lambda, z_b, params);
    if let Terminal::ConvergedTo(qc) = shot_a.terminal {
        if q_ids.contains(&qc) {
            return Some((qc, anchors, spans, shot_a.traj));
        }
    }
    if crossing_label(&shot_a, q_ids, gate) == crossing_label(&shot_b, q_ids, gate) {
        if debug {
            eprintln!("  cascade: bracket labels equal: {:?}", crossing_label(&shot_a, q_ids, gate));
        }
        return None;
    }
    for _stage in 0..40 {
        if debug {
            eprintln!(
                "  cascade stage {_stage}: labels {:?} vs {:?}, anchor t_sum={:.2}",
                crossing_label(&shot_a, q_ids, gate),
                crossing_label(&shot_b, q_ids, gate),
                spans.iter().sum::<f64>()
            );
        }
        // bisect the chord to floating precision
        let label_a = crossing_label(&shot_a, q_ids, gate);
        for _ in 0..80 {
            let sep = norm3([z_b[0] - z_a[0], z_b[1] - z_a[1], z_b[2] - z_a[2]]);
            let scale = norm3(z_a).max(1.0);
            if sep < 1e-15 * scale {
                break;
            }
            let zm = [
                0.5 * (z_a[0] + z_b[0]),
                0.5 * (z_a[1] + z_b[1]),
                0.5 * (z_a[2] + z_b[2]),
            ];
            let sm = classify_from(problem, crit, lambda, zm, params);
            if let Terminal::ConvergedTo(qc) = sm.terminal {
                if q_ids.contains(&qc) {
                    *anchors.last_mut().unwrap() = zm;
                    spans.push(0.0);
                    return Some((qc, anchors, spans, sm.traj));
                }
            }
            if crossing_label(&sm, q_ids, gate) == label_a {
                z_a = zm;
                shot_a = sm;
            } else {
                z_b = zm;
                shot_b = sm;
            }
        }
        // the bisection refined z_a; the anchor chain must follow it
        *anchors.last_mut().unwrap() = z_a;
        // re-anchor where the two bracket trajectories separate to 1e-6
        let Some((t_split, za_new, zb_new)) = split_point(&shot_a.traj, &shot_b.traj, 1e-6) else {
            if debug {
                eprintln!("  cascade: no split point");
            }
            return None;
        };
        if t_split <= 1e-9 {
            if debug {
                eprintln!("  cascade: stalled (t_split = {t_split:.2e})");
            }
            return None; // no forward progress: tangential or noise-limited
        }
        spans.push(t_split);
        anchors.push(za_new);
        z_a = za_new;
        z_b = zb_new;
        shot_a = classify_from(problem, crit, lambda, z_a, params);
        shot_b = classify_from(problem, crit, lambda, z_b, params);
        // labels can degenerate right at the anchor; give up gracefully
        if crossing_label(&shot_a, q_ids, gate) == crossing_label(&shot_b, q_ids, gate) {
            if debug {
                eprintln!("  cascade: labels collapsed after re-anchor");
            }
            return None;
        }
        if let Terminal::ConvergedTo(qc) = shot_a.terminal {
            if q_ids.contains(&qc) {
                return Some((qc, anchors, spans, shot_a.traj));
            }
        }
    }
    None
}

/// Interpolated state of a trajectory at time t (linear in the samples).
fn state_at(traj: &Trajectory, t: f64) -> Vec3 {
    let samples = &traj.samples;
    if t <= samples[0].0 {
        return lift_sample(samples, 0);
    }
    for i in 0..samples.len() - 1 {
        let (t0, _) = samples[i];
        let (t1, _) = samples[i + 1];
        if t >= t0 && t <= t1 {
            let a = lift_sample(samples, i);
            let b = lift_sample_near(samples, i + 1, a);
            let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
            return [
                a[0] + w * (b[0] - a[0]),
                a[1] + w * (b[1] - a[1]),
                a[2] + w * (b[2] - a[2]),
            ];
        }
    }
    lift_sample(samples, samples.len() - 1)
}

fn lift_sample(samples: &[(f64, crate::field::ExtendedPoint)], i: usize) -> Vec3 {
    samples[i].1.to_vec3()
}

fn lift_sample_near(samples: &[(f64, crate::field::ExtendedPoint)], i: usize, near: Vec3) -> Vec3 {
    let mut z = samples[i].1.to_vec3();
    for d in 0..2 {
        let k = ((near[d] - z[d]) / crate::field::TWO_PI).round();
        z[d] += k * crate::field::TWO_PI;
    }
    z
}

/// Latest time at which two trajectories from nearby starts still agree to
/// `width`, with both interpolated states there.
fn split_point(a: &Trajectory, b: &Trajectory, width: f64) -> Option<(f64, Vec3, Vec3)> {
    let t_end = a.time.min(b.time);
    if t_end <= 0.0 {
        return None;
    }
    let mut best: Option<(f64, Vec3, Vec3)> = None;
    for &(t, _) in &a.samples {
        if t > t_end {
            break;
        }
        let za = state_at(a, t);
        let zb0 = state_at(b, t);
        // compare in the lift of za
        let mut zb = zb0;
        for d in 0..2 {
            let k = ((za[d] - zb[d]) / crate::field::TWO_PI).round();
            zb[d] += k * crate::field::TWO_PI;
        }
        let sep = norm3([zb[0] - za[0], zb[1] - za[1], zb[2] - za[2]]);
        if sep <= width {
            best = Some((t, za, zb));
        } else if best.is_some() {
            break;
        }
    }
    best
}

/// Chain fixed-time runs over the anchor nodes and append the converged tail.
fn assemble_witness(
    problem: &Problem,
    lambda: f64,
    nodes: &[Vec3],
    durations: &[f64],
    tail: Trajectory,
    q_id: usize,
) -> Trajectory {
    let run = FlowRun::new(problem, lambda);
    let mut witness_samples: Vec<(f64, crate::field::ExtendedPoint)> = Vec::new();
    let mut t_off = 0.0;
    let mut energy = 0.0;
    let mut monotone = 0.0f64;
    let mut min_grad: f64 = f64::INFINITY;
    for (i, node) in nodes.iter().enumerate() {
        let tau = durations.get(i).copied().unwrap_or(0.0);
        if tau <= 0.0 {
            continue;
        }
        let (seg, _) = run.integrate(*node, Budget::new(tau, 4_000_000), &[]);
        energy += seg.energy_spent;
        monotone = monotone.max(seg.monotone_violation);
        min_grad = min_grad.min(seg.min_grad_outside_basins);
        for (t, pnt) in &seg.samples {
            witness_samples.push((t_off + t, *pnt));
        }
        t_off += tau;
    }
    energy += tail.energy_spent;
    monotone = monotone.max(tail.monotone_violation);
    min_grad = min_grad.min(tail.min_grad_outside_basins);
    for (t, pnt) in &tail.samples {
        witness_samples.push((t_off + t, *pnt));
    }
    if witness_samples.is_empty() {
        witness_samples.push((0.0, crate::field::ExtendedPoint::new([0.0, 0.0], 0.0)));
    }
    let first = witness_samples.first().unwrap().1;
    let f_start = problem.f_value(&first);
    Trajectory {
        lambda,
        samples: witness_samples,
        terminal: Terminal::ConvergedTo(q_id),
        energy_spent: energy,
        f_start,
        f_end: tail.f_end,
        end_lifted: tail.end_lifted,
        steps: 0,
        time: t_off + tail.time,
        step_failure: false,
        monotone_violation: monotone,
        min_grad_outside_basins: min_grad,
    }
}

fn orthonormal_complement(v: Vec3) -> (Vec3, Vec3) {
    let pick = if v[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let mut w1 = [
        v[1] * pick[2] - v[2] * pick[1],
        v[2] * pick[0] - v[0] * pick[2],
        v[0] * pick[1] - v[1] * pick[0],
    ];
    w1 = normalize3(w1);
    let w2 = [
        v[1] * w1[2] - v[2] * w1[1],
        v[2] * w1[0] - v[0] * w1[2],
        v[0] * w1[1] - v[1] * w1[0],
    ];
    (w1, w2)
}

fn normalize_angle(t: f64) -> f64 {
    t.rem_euclid(std::f64::consts::TAU)
}

fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        perm.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                let v = a[col][k];
                a[row][k] -= f * v;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in col + 1..n {
            s -= a[col][k] * x[k];
        }
        x[col] = s / a[col][col];
    }
    Some(x)
}

/// Count connecting orbits from p to every adjacent-index target at one
/// lambda. `seeds` supplies guesses from the adiabatic structures or from a
/// neighboring lambda; the angle scan contributes its own crossings.
pub fn count_boundary_from(
    problem: &Problem,
    crit: &[CritPointF],
    lambda: f64,
    p_id: usize,
    seeds: &[OrbitSeed],
    params: &ShootParams,
) -> Result<CountOutcome, ShootError> {
    let p = &crit[p_id];
    let q_ids: Vec<usize> = crit
        .iter()
        .filter(|c| c.index_f + 1 == p.index_f)
        .map(|c| c.id)
        .collect();
    let mut flags = Vec::new();
    let mut orbits: Vec<ConnectingOrbit> = Vec::new();

    if p.index_f >= 2 {
        let frame = unstable_frame(problem, p, lambda);
        if frame.len() >= 2 {
            let (v1, v2) = (frame[0].1, frame[1].1);
            let gate = params.gate_fraction * min_pairwise_distance(crit);
            let n = params.n_angles;
            let shots: Vec<ShotResult> = (0..n)
                .into_par_iter()
                .map(|k| {
                    let theta = std::f64::consts::TAU * k as f64 / n as f64;
                    shoot(problem, crit, lambda, p, &frame, theta, params)
                })
                .collect();
            // crossing candidates: terminal flips anywhere (stable-manifold
            // crossings whose near pass may be narrower than the scan), plus
            // gated side flips and already-converged samples per target
            #[derive(Clone, Copy, PartialEq)]
            enum CandKind {
                Terminal,
                Side(usize),
            }
            let mut cands: Vec<(f64, f64, CandKind)> = Vec::new();
            for k in 0..n {
                let (a, b) = (&shots[k], &shots[(k + 1) % n]);
                let ta = std::f64::consts::TAU * k as f64 / n as f64;
                let tb = std::f64::consts::TAU * (k + 1) as f64 / n as f64;
                if a.terminal != b.terminal {
                    cands.push((ta, tb, CandKind::Terminal));
                }
                for &q_id in &q_ids {
                    let side_flip = a.dists[q_id] < gate
                        && b.dists[q_id] < gate
                        && a.sides[q_id] != 0.0
                        && a.sides[q_id].signum() != b.sides[q_id].signum();
                    if side_flip && a.terminal == b.terminal {
                        cands.push((ta, tb, CandKind::Side(q_id)));
                    }
                }
            }
            for (mut ta, mut tb, kind) in cands {
                let eval = |theta: f64| shoot(problem, crit, lambda, p, &frame, theta, params);
                let sa = eval(ta);
                let term_a = sa.terminal;
                let side_sign_a = |s: &ShotResult, q_id: usize| -> f64 {
                    if s.sides[q_id] != 0.0 && s.dists[q_id] < gate {
                        s.sides[q_id].signum()
                    } else {
                        0.0
                    }
                };
                let mut sign_a = match kind {
                    CandKind::Side(q_id) => side_sign_a(&sa, q_id),
                    CandKind::Terminal => 0.0,
                };
                let mut root_shot: Option<ShotResult> = None;
                while tb - ta > problem.tol.angle_bisect {
                    let tm = 0.5 * (ta + tb);
                    let sm = eval(tm);
                    if let Terminal::ConvergedTo(qc) = sm.terminal {
                        if q_ids.contains(&qc) {
                            root_shot = Some(sm);
                            ta = tm;
                            tb = tm;
                            break;
                        }
                    }
                    let same = match kind {
                        CandKind::Side(q_id) => {
                            let sgn = side_sign_a(&sm, q_id);
                            if sgn != 0.0 && sign_a != 0.0 {
                                sgn == sign_a
                            } else {
                                sm.terminal == term_a
                            }
                        }
                        CandKind::Terminal => sm.terminal == term_a,
                    };
                    if same {
                        ta = tm;
                        if let CandKind::Side(q_id) = kind {
                            sign_a = side_sign_a(&sm, q_id);
                        }
                        root_shot = Some(sm);
                    } else {
                        tb = tm;
                    }
                }
                let theta_root = 0.5 * (ta + tb);
                let final_shot = eval(theta_root);
                // attribute the crossing to the most-approached eligible target
                let best_shot = {
                    let better = |x: &ShotResult, y: &ShotResult| -> bool {
                        let dx = q_ids.iter().map(|&q| x.dists[q]).fold(f64::INFINITY, f64::min);
                        let dy = q_ids.iter().map(|&q| y.dists[q]).fold(f64::INFINITY, f64::min);
                        dx < dy
                    };
                    match (&final_shot.terminal, root_shot) {
                        (Terminal::ConvergedTo(qc), _) if q_ids.contains(qc) => final_shot,
                        (_, Some(rs)) => {
                            if matches!(rs.terminal, Terminal::ConvergedTo(q) if q_ids.contains(&q))
                                || better(&rs, &final_shot)
                            {
                                rs
                            } else {
                                final_shot
                            }
                        }
                        (_, None) => final_shot,
                    }
                };
                let q_id = match best_shot.terminal {
                    Terminal::ConvergedTo(qc) if q_ids.contains(&qc) => qc,
                    _ => {
                        let mut best_q = None;
                        let mut best_d = gate;
                        for &q in &q_ids {
                            if best_shot.dists[q] < best_d {
                                best_d = best_shot.dists[q];
                                best_q = Some(q);
                            }
                        }
                        match best_q {
                            Some(q) => q,
                            None => {
                                flags.push(format!(
                                    "crossing at theta = {theta_root:.12} approaches no target within the gate"
                                ));
                                continue;
                            }
                        }
                    }
                };
                // angular margin: scan outward until the passage is lost
                let mut margin = std::f64::consts::TAU / n as f64;
                for widen in 1..=6 {
                    let w = margin * widen as f64;
                    let s1 = eval(theta_root + w);
                    if s1.dists[q_id] > gate {
                        margin = w;
                        break;
                    }
                }
                // a shot that already converges is its own witness
                if best_shot.terminal == Terminal::ConvergedTo(q_id) {
                    let z0 = best_shot.traj.start().to_vec3();
                    let orbit = ConnectingOrbit {
                        p: p.id,
                        q: q_id,
                        lambda,
                        theta: normalize_angle(theta_root),
                        nodes: vec![z0],
                        durations: vec![best_shot.traj.time],
                        witness: best_shot.traj,
                        angle_margin: margin,
                    };
                    push_orbit(&mut orbits, orbit, &mut flags, lambda);
                    continue;
                }
                // otherwise chase the crossing down by cascaded bisection
                let z_of = |theta: f64| -> Vec3 {
                    [
                        p.point.x[0] + params.r0 * (theta.cos() * v1[0] + theta.sin() * v2[0]),
                        p.point.x[1] + params.r0 * (theta.cos() * v1[1] + theta.sin() * v2[1]),
                        p.point.eta + params.r0 * (theta.cos() * v1[2] + theta.sin() * v2[2]),
                    ]
                };
                let width = (std::f64::consts::TAU / n as f64).min(1e-3);
                match cascade_connect(
                    problem,
                    crit,
                    lambda,
                    &q_ids,
                    gate,
                    z_of(theta_root - width),
                    z_of(theta_root + width),
                    params,
                ) {
                    Some((qc, anchors, spans, tail)) => {
                        let witness = assemble_witness(problem, lambda, &anchors, &spans, tail, qc);
                        let orbit = ConnectingOrbit {
                            p: p.id,
                            q: qc,
                            lambda,
                            theta: normalize_angle(theta_root),
                            nodes: anchors,
                            durations: spans,
                            witness,
                            angle_margin: margin,
                        };
                        push_orbit(&mut orbits, orbit, &mut flags, lambda);
                    }
                    None => {
                        // final attempt: damped-Newton polish from the shot
                        let path: Vec<(f64, Vec3)> =
                            truncate_path(&best_shot.traj, crit[q_id].point.to_vec3());
                        if let Some(orbit) =
                            polish_connection(problem, crit, lambda, p, &crit[q_id], &path, params)
                        {
                            let mut orbit = orbit;
                            orbit.angle_margin = margin;
                            push_orbit(&mut orbits, orbit, &mut flags, lambda);
                        } else {
                            flags.push(format!(
                                "crossing at theta = {theta_root:.12} toward {} is unresolved",
                                q_id
                            ));
                        }
                    }
                }
            }
        }
    } else {
        // 1-d unstable manifold: two rays, classified directly
        let frame = unstable_frame(problem, p, lambda);
        if let Some((_, v)) = frame.first() {
            for sign in [1.0, -1.0] {
                let z0 = [
                    p.point.x[0] + sign * params.r0 * v[0],
                    p.point.x[1] + sign * params.r0 * v[1],
                    p.point.eta + sign * params.r0 * v[2],
                ];
                let run = FlowRun::new(problem, lambda);
                let targets = crit_targets(problem, crit);
                let (traj, _) = run.integrate(z0, Budget::for_lambda(lambda), &targets);
                if let Terminal::ConvergedTo(q_id) = traj.terminal {
                    if q_ids.contains(&q_id) {
                        let theta = if sign > 0.0 { 0.0 } else { std::f64::consts::PI };
                        let orbit = ConnectingOrbit {
                            p: p.id,
                            q: q_id,
                            lambda,
                            theta,
                            nodes: vec![z0],
                            durations: vec![traj.time],
                            witness: traj,
                            angle_margin: f64::INFINITY,
                        };
                        push_orbit(&mut orbits, orbit, &mut flags, lambda);
                    }
                }
            }
        }
    }

    // seeded polishing (restricted arcs, fast-slow sequences, continuation)
    for seed in seeds {
        if !q_ids.contains(&seed.q) {
            continue;
        }
        if let Some(orbit) =
            polish_connection(problem, crit, lambda, p, &crit[seed.q], &seed.path, params)
        {
            push_orbit(&mut orbits, orbit, &mut flags, lambda);
        }
    }

    let mut pairs = Vec::new();
    for q_id in q_ids {
        let qorbits: Vec<ConnectingOrbit> = orbits.iter().filter(|o| o.q == q_id).cloned().collect();
        pairs.push(PairCount { p: p_id, q: q_id, parity: qorbits.len() % 2, orbits: qorbits });
    }
    Ok(CountOutcome { p: p_id, lambda, pairs, flags })
}

/// Truncate a scan trajectory at its closest approach to the target, keeping
/// a short synthetic tail for the polisher.
fn truncate_path(traj: &Trajectory, q: Vec3) -> Vec<(f64, Vec3)> {
    let mut best = (f64::INFINITY, 0usize);
    // lift samples continuously for the path
    let mut lifted: Vec<(f64, Vec3)> = Vec::with_capacity(traj.samples.len());
    let mut prev: Option<Vec3> = None;
    for &(t, pt) in &traj.samples {
        let mut z = pt.to_vec3();
        if let Some(pv) = prev {
            for d in 0..2 {
                let k = ((pv[d] - z[d]) / crate::field::TWO_PI).round();
                z[d] += k * crate::field::TWO_PI;
            }
        }
        prev = Some(z);
        lifted.push((t, z));
    }
    for (i, &(_, z)) in lifted.iter().enumerate() {
        let d = crate::field::torus_dist3(
            [crate::field::wrap_angle(z[0]), crate::field::wrap_angle(z[1]), z[2]],
            q,
        );
        if d < best.0 {
            best = (d, i);
        }
    }
    let mut path: Vec<(f64, Vec3)> = lifted[..=best.1].to_vec();
    // synthetic tail: pull the endpoint toward q over a contraction time
    if let Some(&(t_end, z_end)) = path.last() {
        let mut qq = q;
        for d in 0..2 {
            let k = ((z_end[d] - q[d]) / crate::field::TWO_PI).round();
            qq[d] = q[d] + k * crate::field::TWO_PI;
        }
        let gap = norm3([qq[0] - z_end[0], qq[1] - z_end[1], qq[2] - z_end[2]]);
        if gap > 1e-3 {
            let steps = 4;
            for j in 1..=steps {
                let w = j as f64 / steps as f64;
                let zz = [
                    z_end[0] + w * (qq[0] - z_end[0]) * 0.995,
                    z_end[1] + w * (qq[1] - z_end[1]) * 0.995,
                    z_end[2] + w * (qq[2] - z_end[2]) * 0.995,
                ];
                path.push((t_end + 3.0 * w, zz));
            }
        }
    }
    path
}

fn push_orbit(orbits: &mut Vec<ConnectingOrbit>, orbit: ConnectingOrbit, flags: &mut Vec<String>, lambda: f64) {
    // dedupe by angle and by image proximity
    for existing in orbits.iter_mut() {
        if existing.q != orbit.q {
            continue;
        }
        let dtheta = (existing.theta - orbit.theta).abs().min(std::f64::consts::TAU - (existing.theta - orbit.theta).abs());
        if dtheta < 1e-6 || orbit_hausdorff(existing, &orbit) < 5e-3 {
            // same orbit found twice: keep the one with a finite margin
            if existing.angle_margin.is_infinite() && orbit.angle_margin.is_finite() {
                *existing = orbit;
            }
            return;
        }
        if dtheta < 1e-9 {
            flags.push(format!(
                "orbits collide in angle near theta = {:.12} at lambda = {lambda}",
                orbit.theta
            ));
        }
    }
    orbits.push(orbit);
}

/// Symmetric Hausdorff distance between two orbit witnesses.
pub fn orbit_hausdorff(a: &ConnectingOrbit, b: &ConnectingOrbit) -> f64 {
    trajectory_hausdorff(&a.witness, &b.witness)
}

pub fn trajectory_hausdorff(a: &Trajectory, b: &Trajectory) -> f64 {
    let pa: Vec<Vec3> = a.samples.iter().map(|(_, p)| p.to_vec3()).collect();
    let pb: Vec<Vec3> = b.samples.iter().map(|(_, p)| p.to_vec3()).collect();
    point_set_hausdorff(&pa, &pb)
}

pub fn point_set_hausdorff(pa: &[Vec3], pb: &[Vec3]) -> f64 {
    let one_way = |xs: &[Vec3], ys: &[Vec3]| -> f64 {
        let mut worst: f64 = 0.0;
        for &x in xs {
            let mut best = f64::INFINITY;
            for &y in ys {
                best = best.min(crate::field::torus_dist3(
                    [crate::field::wrap_angle(x[0]), crate::field::wrap_angle(x[1]), x[2]],
                    [crate::field::wrap_angle(y[0]), crate::field::wrap_angle(y[1]), y[2]],
                ));
                if best < 1e-12 {
                    break;
                }
            }
            worst = worst.max(best);
        }
        worst
    };
    one_way(pa, pb).max(one_way(pb, pa))
}
