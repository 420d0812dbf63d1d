//! Trajectory integration for the rescaled gradient flow and the frozen-eta
//! fast flow: embedded Dormand-Prince 5(4) steps, escape/basin events, an
//! energy ledger integrated alongside the state, and per-target
//! closest-approach instrumentation used by the orbit counters.

use serde::Serialize;

use crate::field::{ExtendedPoint, Problem};
use crate::linalg::{dot3, norm3, Vec3};

/// Integration budget: wall time in flow time units and accepted-step count.
#[derive(Clone, Copy, Debug)]
pub struct Budget {
    pub max_time: f64,
    pub max_steps: usize,
}

impl Budget {
    pub fn new(max_time: f64, max_steps: usize) -> Self {
        Self { max_time, max_steps }
    }

    /// Budget sized for the lambda-flow: slow drift takes O(1/lambda^2) time.
    pub fn for_lambda(lambda: f64) -> Self {
        let t = if lambda > 0.0 {
            200.0 + 120.0 / (lambda * lambda)
        } else {
            5.0e4
        };
        Self::new(t, 4_000_000)
    }

    pub fn for_fast_flow() -> Self {
        Self::new(2.0e4, 2_000_000)
    }
}

/// A rest point the integrator may converge to.
#[derive(Clone, Copy, Debug)]
pub struct RestTarget {
    pub id: usize,
    pub point: Vec3,
    pub basin_radius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Terminal {
    ConvergedTo(usize),
    EscapePlusEta,
    EscapeMinusEta,
    Undetermined,
}

/// Closest pass of a trajectory by one target.
#[derive(Clone, Copy, Debug)]
pub struct Approach {
    /// Minimum distance attained (chord-resolved, toroidal in x).
    pub dist: f64,
    /// Flow time of the minimum.
    pub t: f64,
    /// Sign of the projection of (point - target) on the reference direction
    /// supplied for the target, at the minimum. Zero if no direction given.
    pub side: f64,
    /// State at the minimum (lifted coordinates).
    pub point: Vec3,
}

impl Default for Approach {
    fn default() -> Self {
        Self { dist: f64::INFINITY, t: 0.0, side: 0.0, point: [0.0; 3] }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub lambda: f64,
    /// Decimated samples (t, point); endpoints always included.
    pub samples: Vec<(f64, ExtendedPoint)>,
    pub terminal: Terminal,
    /// Integral of the squared metric speed along the path.
    pub energy_spent: f64,
    pub f_start: f64,
    pub f_end: f64,
    /// Final state in lifted (unwrapped) coordinates.
    pub end_lifted: [f64; 3],
    pub steps: usize,
    pub time: f64,
    pub step_failure: bool,
    /// Largest single-step increase of F observed (>=0; should stay ~1e-9).
    pub monotone_violation: f64,
    /// Minimum metric gradient norm seen outside every basin ball; a value
    /// collapsing to zero away from the targets flags a misconfigured basin
    /// radius (the flow would be stalling where no rest point is known).
    pub min_grad_outside_basins: f64,
}

impl Trajectory {
    pub fn start(&self) -> ExtendedPoint {
        self.samples.first().expect("nonempty").1
    }

    pub fn end(&self) -> ExtendedPoint {
        self.samples.last().expect("nonempty").1
    }

    /// Energy-identity residual against a target value of F at the limit.
    pub fn energy_residual(&self, f_limit: f64) -> f64 {
        (self.energy_spent - (self.f_start - f_limit)).abs()
    }
}

/// Options controlling one integration run.
#[derive(Clone, Copy, Debug)]
pub struct FlowOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Cap on spatial displacement per accepted step; keeps the stored
    /// polyline usable for Hausdorff and section work.
    pub max_space_step: f64,
    /// Consecutive contracting steps required inside a basin ball.
    pub contraction_steps: usize,
    /// Stop radius once converging (keeps the energy ledger tail negligible).
    pub stop_radius: f64,
    /// Spacing for decimated sample storage.
    pub sample_spacing: f64,
    /// Integrate the time-reversed field instead.
    pub backward: bool,
}

impl FlowOptions {
    pub fn from_problem(p: &Problem) -> Self {
        Self {
            rel_tol: p.tol.ode_rel,
            abs_tol: p.tol.ode_abs,
            max_space_step: 0.05,
            contraction_steps: 20,
            stop_radius: 2.0e-3,
            sample_spacing: 5.0e-3,
            backward: false,
        }
    }
}

// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

type State = [f64; 4]; // x1, x2, eta, energy (lifted coordinates)

pub struct FlowRun<'a> {
    pub problem: &'a Problem,
    pub lambda: f64,
    pub options: FlowOptions,
    /// Optional reference directions for per-target side signs, indexed like
    /// `targets`.
    pub side_dirs: Vec<Option<Vec3>>,
}

impl<'a> FlowRun<'a> {
    pub fn new(problem: &'a Problem, lambda: f64) -> Self {
        Self {
            problem,
            lambda,
            options: FlowOptions::from_problem(problem),
            side_dirs: Vec::new(),
        }
    }

    fn rhs(&self, z: &State) -> State {
        let mut v = self.problem.flow_rhs([z[0], z[1], z[2]], self.lambda);
        if self.options.backward {
            v = [-v[0], -v[1], -v[2]];
        }
        let m = self.problem.mu.eval([z[0], z[1]]);
        let lm = self.lambda * m;
        let e = v[0] * v[0] + v[1] * v[1] + lm * lm;
        [v[0], v[1], v[2], e]
    }

    /// Integrate from `start`, classifying against `targets`. Returns the
    /// trajectory and the per-target approach records.
    pub fn integrate(
        &self,
        start: Vec3,
        budget: Budget,
        targets: &[RestTarget],
    ) -> (Trajectory, Vec<Approach>) {
        let p = self.problem;
        let opt = self.options;
        let mut y: State = [start[0], start[1], start[2], 0.0];
        let mut t = 0.0;
        let mut k1 = self.rhs(&y);
        // an exact equilibrium stays put; classify it against the targets
        if crate::linalg::norm3([k1[0], k1[1], k1[2]]) < 1e-12 {
            let here = ExtendedPoint::new([y[0], y[1]], y[2]);
            let terminal = targets
                .iter()
                .find(|tg| lifted_dist(start, tg.point) < tg.basin_radius)
                .map_or(Terminal::Undetermined, |tg| Terminal::ConvergedTo(tg.id));
            let f0 = p.f_eta([y[0], y[1]], y[2]);
            return (
                Trajectory {
                    lambda: self.lambda,
                    samples: vec![(0.0, here)],
                    terminal,
                    energy_spent: 0.0,
                    f_start: f0,
                    f_end: f0,
                    end_lifted: start,
                    steps: 0,
                    time: 0.0,
                    step_failure: false,
                    monotone_violation: 0.0,
                    min_grad_outside_basins: f64::INFINITY,
                },
                vec![Approach::default(); targets.len()],
            );
        }
        let speed0 = norm3([k1[0], k1[1], k1[2]]);
        let mut h = (0.01 / speed0.max(1e-6)).min(0.1);
        let mut approaches = vec![Approach::default(); targets.len()];
        let f_start = p.f_eta([y[0], y[1]], y[2]);
        let mut samples = vec![(0.0, ExtendedPoint::new([y[0], y[1]], y[2]))];
        let mut last_stored: Vec3 = start;
        let mut terminal = Terminal::Undetermined;
        let mut step_failure = false;
        let mut monotone_violation = 0.0f64;
        let mut min_grad_outside = f64::INFINITY;
        let mut f_prev = f_start;
        let mut steps = 0usize;
        // contraction bookkeeping
        let mut basin_candidate: Option<usize> = None;
        let mut contraction_count = 0usize;
        let mut prev_dist = f64::INFINITY;
        let mut rejects_in_a_row = 0usize;

        self.record_approaches(&y, &y, t, targets, &mut approaches);

        'outer: while t < budget.max_time && steps < budget.max_steps {
            h = h.min(budget.max_time - t).max(1e-14);
            // trial step
            let mut k = [[0.0f64; 4]; 7];
            k[0] = k1;
            for stage in 0..6 {
                let mut ys = y;
                for j in 0..=stage {
                    let a = A[stage][j];
                    if a != 0.0 {
                        for d in 0..4 {
                            ys[d] += h * a * k[j][d];
                        }
                    }
                }
                let _ = C; // stage times unused: autonomous field
                k[stage + 1] = self.rhs(&ys);
            }
            let mut y5 = y;
            let mut y4 = y;
            for j in 0..7 {
                for d in 0..4 {
                    y5[d] += h * B5[j] * k[j][d];
                    y4[d] += h * B4[j] * k[j][d];
                }
            }
            // error norm over the state components (energy excluded)
            let mut err: f64 = 0.0;
            for d in 0..3 {
                let sc = opt.abs_tol + opt.rel_tol * y[d].abs().max(y5[d].abs());
                err = err.max(((y5[d] - y4[d]) / sc).abs());
            }
            let space = ((y5[0] - y[0]).powi(2) + (y5[1] - y[1]).powi(2) + (y5[2] - y[2]).powi(2)).sqrt();
            if err > 1.0 || space > opt.max_space_step {
                let mut scale: f64 = if err > 1.0 {
                    (0.9 * err.powf(-0.2)).max(0.2)
                } else {
                    0.9 * opt.max_space_step / space
                };
                scale = scale.min(0.9);
                h *= scale;
                rejects_in_a_row += 1;
                if h < 1e-13 || rejects_in_a_row > 200 {
                    step_failure = true;
                    break 'outer;
                }
                continue;
            }
            rejects_in_a_row = 0;
            steps += 1;
            let y_old = y;
            y = y5;
            t += h;
            k1 = k[6]; // FSAL
            // adapt
            let grow = if err > 1e-30 { (0.9 * err.powf(-0.2)).min(5.0) } else { 5.0 };
            let mut h_next = h * grow.max(0.2);
            let speed = norm3([k1[0], k1[1], k1[2]]);
            if speed > 1e-14 {
                h_next = h_next.min(opt.max_space_step / speed);
            }
            h = h_next;

            // bookkeeping on the accepted step
            let f_now = p.f_eta([y[0], y[1]], y[2]);
            if !opt.backward {
                monotone_violation = monotone_violation.max(f_now - f_prev);
            }
            f_prev = f_now;
            self.record_approaches(&y_old, &y, t, targets, &mut approaches);

            // escape event: locate the |eta| = eta_max crossing on the chord
            if y[2].abs() >= p.eta_max {
                let target_eta = p.eta_max * y[2].signum();
                let frac = if (y[2] - y_old[2]).abs() > 1e-300 {
                    ((target_eta - y_old[2]) / (y[2] - y_old[2])).clamp(0.0, 1.0)
                } else {
                    1.0
                };
                for d in 0..4 {
                    y[d] = y_old[d] + frac * (y[d] - y_old[d]);
                }
                t = t - h + frac * h;
                terminal = if y[2] > 0.0 {
                    Terminal::EscapePlusEta
                } else {
                    Terminal::EscapeMinusEta
                };
                samples.push((t, ExtendedPoint::new([y[0], y[1]], y[2])));
                break 'outer;
            }

            // basin entry and contraction confirmation
            let mut inside_any = false;
            let mut best: Option<(usize, f64)> = None;
            for (i, tg) in targets.iter().enumerate() {
                let d = lifted_dist([y[0], y[1], y[2]], tg.point);
                if d < tg.basin_radius {
                    inside_any = true;
                    if best.map_or(true, |(_, bd)| d < bd) {
                        best = Some((i, d));
                    }
                }
            }
            if let Some((i, d)) = best {
                if basin_candidate == Some(i) {
                    if d < prev_dist {
                        contraction_count += 1;
                    } else {
                        contraction_count = 0;
                    }
                } else {
                    basin_candidate = Some(i);
                    contraction_count = 0;
                }
                prev_dist = d;
                if contraction_count >= opt.contraction_steps && d <= opt.stop_radius {
                    terminal = Terminal::ConvergedTo(targets[i].id);
                    samples.push((t, ExtendedPoint::new([y[0], y[1]], y[2])));
                    break 'outer;
                }
            } else {
                basin_candidate = None;
                contraction_count = 0;
                prev_dist = f64::INFINITY;
            }
            if !inside_any {
                let g = p.grad_norm_lambda([y[0], y[1], y[2]], self.lambda);
                min_grad_outside = min_grad_outside.min(g);
            }

            let moved = ((y[0] - last_stored[0]).powi(2)
                + (y[1] - last_stored[1]).powi(2)
                + (y[2] - last_stored[2]).powi(2))
            .sqrt();
            if moved >= opt.sample_spacing {
                samples.push((t, ExtendedPoint::new([y[0], y[1]], y[2])));
                last_stored = [y[0], y[1], y[2]];
            }
        }

        if samples.last().map(|s| s.0) != Some(t) {
            samples.push((t, ExtendedPoint::new([y[0], y[1]], y[2])));
        }
        let traj = Trajectory {
            lambda: self.lambda,
            samples,
            terminal,
            energy_spent: y[3],
            f_start,
            f_end: p.f_eta([y[0], y[1]], y[2]),
            end_lifted: [y[0], y[1], y[2]],
            steps,
            time: t,
            step_failure,
            monotone_violation,
            min_grad_outside_basins: min_grad_outside,
        };
        (traj, approaches)
    }

    fn record_approaches(
        &self,
        y_old: &State,
        y_new: &State,
        t: f64,
        targets: &[RestTarget],
        approaches: &mut [Approach],
    ) {
        for (i, tg) in targets.iter().enumerate() {
            let (d, zq) = chord_dist([y_old[0], y_old[1], y_old[2]], [y_new[0], y_new[1], y_new[2]], tg.point);
            if d < approaches[i].dist {
                let side = match self.side_dirs.get(i).copied().flatten() {
                    Some(dir) => {
                        let img = nearest_image(zq, tg.point);
                        let rel = [zq[0] - img[0], zq[1] - img[1], zq[2] - img[2]];
                        dot3(rel, dir)
                    }
                    None => 0.0,
                };
                approaches[i] = Approach { dist: d, t, side, point: zq };
            }
        }
    }
}

/// Distance from a lifted point to the nearest torus image of `target`.
fn lifted_dist(z: Vec3, target: Vec3) -> f64 {
    let img = nearest_image(z, target);
    ((z[0] - img[0]).powi(2) + (z[1] - img[1]).powi(2) + (z[2] - img[2]).powi(2)).sqrt()
}

/// The torus image of `target` nearest to the lifted point `z` (eta passes
/// through unchanged).
fn nearest_image(z: Vec3, target: Vec3) -> Vec3 {
    let mut img = target;
    for d in 0..2 {
        let k = ((z[d] - target[d]) / crate::field::TWO_PI).round();
        img[d] = target[d] + k * crate::field::TWO_PI;
    }
    img
}

/// Minimum distance from the segment [a, b] (lifted coords) to the nearest
/// image of `target`, with the attaining point.
fn chord_dist(a: Vec3, b: Vec3, target: Vec3) -> (f64, Vec3) {
    let img = nearest_image(a, target);
    let ab = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let at = [img[0] - a[0], img[1] - a[1], img[2] - a[2]];
    let denom = dot3(ab, ab);
    let s = if denom > 1e-300 {
        (dot3(ab, at) / denom).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let zq = [a[0] + s * ab[0], a[1] + s * ab[1], a[2] + s * ab[2]];
    (lifted_dist(zq, target), zq)
}

/// Integrate the rescaled flow from `start` with classification targets.
pub fn integrate(
    problem: &Problem,
    lambda: f64,
    start: ExtendedPoint,
    budget: Budget,
    targets: &[RestTarget],
) -> Trajectory {
    FlowRun::new(problem, lambda).integrate(start.to_vec3(), budget, targets).0
}

/// Integrate the fast flow (lambda = 0) at frozen eta from x_start.
pub fn fast_integrate(
    problem: &Problem,
    eta: f64,
    x_start: [f64; 2],
    budget: Budget,
    targets: &[RestTarget],
) -> Trajectory {
    FlowRun::new(problem, 0.0)
        .integrate([x_start[0], x_start[1], eta], budget, targets)
        .0
}

/// Re-derive the terminal tag of a finished trajectory from its endpoint.
pub fn classify_terminal(problem: &Problem, traj: &Trajectory, targets: &[RestTarget]) -> Terminal {
    let end = traj.end_lifted;
    if end[2].abs() >= problem.eta_max - 1e-9 {
        return if end[2] > 0.0 {
            Terminal::EscapePlusEta
        } else {
            Terminal::EscapeMinusEta
        };
    }
    for tg in targets {
        if lifted_dist(end, tg.point) < tg.basin_radius {
            let g = problem.grad_norm_lambda(end, traj.lambda);
            let g_ref = problem.grad_norm_lambda(tg.point, traj.lambda);
            if g < 10.0 * (g_ref + 1e-6) {
                return Terminal::ConvergedTo(tg.id);
            }
        }
    }
    Terminal::Undetermined
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{FieldTerm, Tolerances, TorusField};

    fn sym_problem() -> Problem {
        // f = cos x2, mu = cos x1 + 0.5 cos x2: closed-form critical points.
        let f = TorusField::new(vec![FieldTerm { k: [0, 1], a: 1.0, b: 0.0 }]);
        let mu = TorusField::new(vec![
            FieldTerm { k: [1, 0], a: 1.0, b: 0.0 },
            FieldTerm { k: [0, 1], a: 0.5, b: 0.0 },
        ]);
        Problem::new(f, mu, Tolerances::default(), 4.0)
    }

    #[test]
    fn stationary_at_critical_point() {
        let p = sym_problem();
        let start = ExtendedPoint::new([2.0 * std::f64::consts::FRAC_PI_3, 0.0], 0.0);
        let tg = RestTarget { id: 7, point: start.to_vec3(), basin_radius: 0.05 };
        let traj = integrate(&p, 1.0, start, Budget::new(50.0, 100_000), &[tg]);
        assert!(traj.energy_spent < 1e-12);
        assert!(traj.end().dist(&start) < 1e-10);
    }

    #[test]
    fn descent_is_monotone_and_escapes() {
        let p = sym_problem();
        // generic start, pushed off the critical circle
        let start = ExtendedPoint::new([1.0, 2.0], 0.3);
        let traj = integrate(&p, 1.0, start, Budget::new(500.0, 400_000), &[]);
        assert!(traj.monotone_violation <= 1e-9);
        assert!(matches!(
            traj.terminal,
            Terminal::EscapePlusEta | Terminal::EscapeMinusEta
        ));
        // F strictly decreased overall
        assert!(traj.f_end < traj.f_start);
    }

    #[test]
    fn fast_flow_keeps_eta_exactly() {
        let p = Problem::default_example();
        let traj = fast_integrate(&p, -0.8, [0.4, 5.2], Budget::for_fast_flow(), &[]);
        for (_, pt) in &traj.samples {
            assert_eq!(pt.eta, -0.8);
        }
    }

    #[test]
    fn fast_flow_energy_identity() {
        let p = Problem::default_example();
        let eta = -0.9;
        // run to wherever the flow settles; compare energy with f_eta drop
        let traj = fast_integrate(&p, eta, [2.8, 1.1], Budget::for_fast_flow(), &[]);
        let drop = traj.f_start - traj.f_end;
        assert!(drop > 0.0);
        let resid = (traj.energy_spent - drop).abs();
        assert!(resid < 1e-6, "residual {resid:.2e}");
    }

    #[test]
    fn escape_event_is_located() {
        let p = sym_problem();
        let start = ExtendedPoint::new([0.2, 0.1], 3.0);
        let traj = integrate(&p, 2.0, start, Budget::new(500.0, 400_000), &[]);
        if let Terminal::EscapePlusEta | Terminal::EscapeMinusEta = traj.terminal {
            assert!((traj.end_lifted[2].abs() - p.eta_max).abs() < 1e-6);
        } else {
            panic!("expected escape, got {:?}", traj.terminal);
        }
    }
}
