//! Scalar fields on the flat 2-torus as finite Fourier sums, the assembled
//! Lagrange-multiplier function F(x, eta) = f(x) + eta mu(x), and the
//! rescaled negative-gradient flow field.
//!
//! Every derivative is analytic: a term a cos<k,x> + b sin<k,x> differentiates
//! to a phase-shifted term with an extra factor of the wave-vector components,
//! so gradients, Hessians and third derivatives are exact.

use serde::{Deserialize, Serialize};

use crate::linalg::{dot2, norm2, sym2_mul, Sym2, Vec2, Vec3};

pub const TWO_PI: f64 = std::f64::consts::TAU;

/// Reduce an angle into [0, 2*pi).
pub fn wrap_angle(x: f64) -> f64 {
    let r = x.rem_euclid(TWO_PI);
    if r == TWO_PI {
        0.0
    } else {
        r
    }
}

/// Shortest signed angular difference a - b on the circle, in (-pi, pi].
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let mut d = (a - b).rem_euclid(TWO_PI);
    if d > std::f64::consts::PI {
        d -= TWO_PI;
    }
    d
}

/// Toroidal distance between two points of T^2.
pub fn torus_dist(a: Vec2, b: Vec2) -> f64 {
    angle_diff(a[0], b[0]).hypot(angle_diff(a[1], b[1]))
}

/// Distance on T^2 x R (toroidal in x, Euclidean in eta).
pub fn torus_dist3(a: Vec3, b: Vec3) -> f64 {
    let dx = angle_diff(a[0], b[0]);
    let dy = angle_diff(a[1], b[1]);
    let de = a[2] - b[2];
    (dx * dx + dy * dy + de * de).sqrt()
}

/// One Fourier mode: a*cos<k,x> + b*sin<k,x>.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct FieldTerm {
    pub k: [i32; 2],
    pub a: f64,
    pub b: f64,
}

/// A trigonometric polynomial on T^2 = R^2 / 2*pi*Z^2.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Default)]
#[serde(transparent)]
pub struct TorusField {
    pub terms: Vec<FieldTerm>,
}

impl TorusField {
    pub fn new(terms: Vec<FieldTerm>) -> Self {
        Self { terms }
    }

    /// Convenience: sum of c_i * cos(k_i . x - phase_i) entries.
    pub fn from_shifted_cosines(modes: &[([i32; 2], f64, f64)]) -> Self {
        let terms = modes
            .iter()
            .map(|&(k, c, phase)| FieldTerm {
                k,
                a: c * phase.cos(),
                b: c * phase.sin(),
            })
            .collect();
        Self { terms }
    }

    pub fn eval(&self, x: Vec2) -> f64 {
        let mut s = 0.0;
        for t in &self.terms {
            let ph = t.k[0] as f64 * x[0] + t.k[1] as f64 * x[1];
            s += t.a * ph.cos() + t.b * ph.sin();
        }
        s
    }

    pub fn grad(&self, x: Vec2) -> Vec2 {
        let mut g = [0.0, 0.0];
        for t in &self.terms {
            let (k0, k1) = (t.k[0] as f64, t.k[1] as f64);
            let ph = k0 * x[0] + k1 * x[1];
            // d/dx_i (a cos ph + b sin ph) = k_i (-a sin ph + b cos ph)
            let d = -t.a * ph.sin() + t.b * ph.cos();
            g[0] += k0 * d;
            g[1] += k1 * d;
        }
        g
    }

    pub fn hess(&self, x: Vec2) -> Sym2 {
        let mut h = [0.0, 0.0, 0.0];
        for t in &self.terms {
            let (k0, k1) = (t.k[0] as f64, t.k[1] as f64);
            let ph = k0 * x[0] + k1 * x[1];
            let d2 = -t.a * ph.cos() - t.b * ph.sin();
            h[0] += k0 * k0 * d2;
            h[1] += k0 * k1 * d2;
            h[2] += k1 * k1 * d2;
        }
        h
    }

    /// Third directional derivative D^3 field [v, v, v] at x.
    pub fn third_dir(&self, x: Vec2, v: Vec2) -> f64 {
        let mut s = 0.0;
        for t in &self.terms {
            let (k0, k1) = (t.k[0] as f64, t.k[1] as f64);
            let ph = k0 * x[0] + k1 * x[1];
            let kv = k0 * v[0] + k1 * v[1];
            let d3 = t.a * ph.sin() - t.b * ph.cos();
            s += kv * kv * kv * d3;
        }
        s
    }

    /// Gradient of det Hess at x; needs third partials, all analytic.
    /// Returns d/dx_i of (h11 h22 - h12^2).
    pub fn grad_det_hess(&self, x: Vec2, extra: Option<(&TorusField, f64)>) -> Vec2 {
        // Third partial tensor t[i][j][l] is symmetric; accumulate the three
        // distinct slices we need: d(h11)/dx, d(h12)/dx, d(h22)/dx.
        let acc = |field: &TorusField, w: f64, out: &mut [[f64; 2]; 3]| {
            for t in &field.terms {
                let (k0, k1) = (t.k[0] as f64, t.k[1] as f64);
                let ph = k0 * x[0] + k1 * x[1];
                let d3 = w * (t.a * ph.sin() - t.b * ph.cos());
                // d h11/dx_l = k0 k0 k_l d3 etc.
                out[0][0] += k0 * k0 * k0 * d3;
                out[0][1] += k0 * k0 * k1 * d3;
                out[1][0] += k0 * k1 * k0 * d3;
                out[1][1] += k0 * k1 * k1 * d3;
                out[2][0] += k1 * k1 * k0 * d3;
                out[2][1] += k1 * k1 * k1 * d3;
            }
        };
        let mut dh = [[0.0; 2]; 3];
        acc(self, 1.0, &mut dh);
        let mut h = self.hess(x);
        if let Some((g, w)) = extra {
            acc(g, w, &mut dh);
            let hg = g.hess(x);
            h[0] += w * hg[0];
            h[1] += w * hg[1];
            h[2] += w * hg[2];
        }
        let mut out = [0.0, 0.0];
        for l in 0..2 {
            out[l] = dh[0][l] * h[2] + h[0] * dh[2][l] - 2.0 * h[1] * dh[1][l];
        }
        out
    }
}

/// A point of T^2 x R; x components stored reduced mod 2*pi.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct ExtendedPoint {
    pub x: Vec2,
    pub eta: f64,
}

impl ExtendedPoint {
    pub fn new(x: Vec2, eta: f64) -> Self {
        Self {
            x: [wrap_angle(x[0]), wrap_angle(x[1])],
            eta,
        }
    }

    pub fn to_vec3(self) -> Vec3 {
        [self.x[0], self.x[1], self.eta]
    }

    pub fn from_vec3(z: Vec3) -> Self {
        Self::new([z[0], z[1]], z[2])
    }

    pub fn dist(&self, other: &ExtendedPoint) -> f64 {
        torus_dist3(self.to_vec3(), other.to_vec3())
    }
}

/// Numeric tolerances shared by the solvers. Defaults are sized for f64.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub newton: f64,
    pub dedupe_radius: f64,
    pub degenerate_eig: f64,
    pub ode_rel: f64,
    pub ode_abs: f64,
    pub basin_factor: f64,
    pub energy: f64,
    pub continuation_step: f64,
    pub angle_bisect: f64,
    pub assumption_margin: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            newton: 1e-12,
            dedupe_radius: 1e-6,
            degenerate_eig: 1e-8,
            ode_rel: 1e-10,
            ode_abs: 1e-12,
            basin_factor: 0.1,
            energy: 1e-4,
            continuation_step: 0.01,
            angle_bisect: 1e-10,
            assumption_margin: 1e-6,
        }
    }
}

/// The problem data: the two fields, tolerances, and the confinement bound
/// for |eta|. Connecting orbits stay inside |eta| <= eta_max, so reaching the
/// bound classifies a trajectory as escaping.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Problem {
    pub f: TorusField,
    pub mu: TorusField,
    pub tol: Tolerances,
    pub eta_max: f64,
}

impl Problem {
    pub fn new(f: TorusField, mu: TorusField, tol: Tolerances, eta_max: f64) -> Self {
        Self { f, mu, tol, eta_max }
    }

    /// The worked example used across the docs and the verification suite:
    /// mu has two disjoint zero circles winding in x2, f is a four-mode field
    /// with a cross term so that nothing factors through a single coordinate.
    pub fn default_example() -> Self {
        let f = TorusField::from_shifted_cosines(&[
            ([1, 0], 1.0, 0.4),
            ([0, 1], 0.8, 1.1),
            ([0, 2], 0.3, 0.0),
            ([1, 1], 0.25, 0.9),
        ]);
        let mu = TorusField::new(vec![
            FieldTerm { k: [1, 0], a: 1.0, b: 0.0 },
            FieldTerm { k: [0, 1], a: 0.5, b: 0.0 },
        ]);
        Self::new(f, mu, Tolerances::default(), 6.0)
    }

    pub fn f_value(&self, p: &ExtendedPoint) -> f64 {
        self.f.eval(p.x) + p.eta * self.mu.eval(p.x)
    }

    /// Value of f_eta = f + eta*mu at x.
    pub fn f_eta(&self, x: Vec2, eta: f64) -> f64 {
        self.f.eval(x) + eta * self.mu.eval(x)
    }

    /// Gradient of f_eta at x (the negative of the fast-flow velocity).
    pub fn grad_f_eta(&self, x: Vec2, eta: f64) -> Vec2 {
        let gf = self.f.grad(x);
        let gm = self.mu.grad(x);
        [gf[0] + eta * gm[0], gf[1] + eta * gm[1]]
    }

    pub fn hess_f_eta(&self, x: Vec2, eta: f64) -> Sym2 {
        let hf = self.f.hess(x);
        let hm = self.mu.hess(x);
        [hf[0] + eta * hm[0], hf[1] + eta * hm[1], hf[2] + eta * hm[2]]
    }

    pub fn det_hess_f_eta(&self, x: Vec2, eta: f64) -> f64 {
        let h = self.hess_f_eta(x, eta);
        h[0] * h[2] - h[1] * h[1]
    }

    /// Right-hand side of the rescaled negative-gradient flow:
    /// x' = -(grad f + eta grad mu), eta' = -lambda^2 mu(x).
    /// lambda = 0 freezes eta and leaves the fast system.
    pub fn flow_rhs(&self, z: Vec3, lambda: f64) -> Vec3 {
        let x = [z[0], z[1]];
        let g = self.grad_f_eta(x, z[2]);
        [-g[0], -g[1], -lambda * lambda * self.mu.eval(x)]
    }

    /// Gradient of F in the rescaled metric, as a 3-vector.
    pub fn grad_f_lambda(&self, p: &ExtendedPoint, lambda: f64) -> Vec3 {
        let r = self.flow_rhs(p.to_vec3(), lambda);
        [-r[0], -r[1], -r[2]]
    }

    /// Norm of the metric gradient of F at z; the metric weights the eta
    /// component by 1/lambda^2, so |grad|^2 = |grad_x F|^2 + lambda^2 mu^2.
    pub fn grad_norm_lambda(&self, z: Vec3, lambda: f64) -> f64 {
        let g = self.grad_f_eta([z[0], z[1]], z[2]);
        let m = self.mu.eval([z[0], z[1]]);
        (dot2(g, g) + lambda * lambda * m * m).sqrt()
    }

    /// Full 3x3 Hessian of F at an extended point (unweighted metric).
    pub fn hess_f_full(&self, p: &ExtendedPoint) -> [[f64; 3]; 3] {
        let h = self.hess_f_eta(p.x, p.eta);
        let gm = self.mu.grad(p.x);
        [
            [h[0], h[1], gm[0]],
            [h[1], h[2], gm[1]],
            [gm[0], gm[1], 0.0],
        ]
    }

    /// The multiplier value that makes grad f + zeta grad mu orthogonal to
    /// grad mu: zeta = -<grad mu, grad f> / |grad mu|^2.
    pub fn zeta(&self, x: Vec2) -> Result<f64, FieldError> {
        let gm = self.mu.grad(x);
        let n2 = dot2(gm, gm);
        if n2.sqrt() < self.tol.degenerate_eig {
            return Err(FieldError::NearCriticalMu { x, grad_norm: n2.sqrt() });
        }
        Ok(-dot2(gm, self.f.grad(x)) / n2)
    }

    /// Tangential derivative of f along the mu-level curve through x
    /// (gradient of the restricted function when mu(x) = 0).
    pub fn tangential_df(&self, x: Vec2) -> f64 {
        let gm = self.mu.grad(x);
        let t = [-gm[1], gm[0]];
        let n = norm2(t);
        if n == 0.0 {
            return 0.0;
        }
        dot2(self.f.grad(x), [t[0] / n, t[1] / n])
    }

    /// Hessian quadratic form of f_eta along v.
    pub fn hess_f_eta_quad(&self, x: Vec2, eta: f64, v: Vec2) -> f64 {
        dot2(sym2_mul(self.hess_f_eta(x, eta), v), v)
    }
}

#[derive(Debug, thiserror::Error, Clone)]
pub enum FieldError {
    #[error("grad mu nearly vanishes at ({x:?}); |grad mu| = {grad_norm:.3e}")]
    NearCriticalMu { x: Vec2, grad_norm: f64 },
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cos_x1() -> TorusField {
        TorusField::new(vec![FieldTerm { k: [1, 0], a: 1.0, b: 0.0 }])
    }

    fn cos_x1_half_cos_x2() -> TorusField {
        TorusField::new(vec![
            FieldTerm { k: [1, 0], a: 1.0, b: 0.0 },
            FieldTerm { k: [0, 1], a: 0.5, b: 0.0 },
        ])
    }

    #[test]
    fn eval_basics() {
        assert_eq!(cos_x1().eval([0.0, 0.0]), 1.0);
        let f = cos_x1_half_cos_x2();
        assert!((f.eval([std::f64::consts::PI, 0.0]) + 0.5).abs() < 1e-15);
        // periodicity at the seam
        assert!((cos_x1().eval([TWO_PI, 0.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grad_hess_analytic() {
        let g = cos_x1().grad([std::f64::consts::FRAC_PI_2, 0.0]);
        assert!((g[0] + 1.0).abs() < 1e-15 && g[1] == 0.0);
        let h = cos_x1_half_cos_x2().hess([0.0, 0.0]);
        assert!((h[0] + 1.0).abs() < 1e-15 && h[1] == 0.0 && (h[2] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn grad_matches_finite_differences() {
        let p = Problem::default_example();
        let h = 1e-5;
        let mut worst = 0.0f64;
        for i in 0..10 {
            for j in 0..10 {
                let x = [0.17 + 0.61 * i as f64, 0.43 + 0.59 * j as f64];
                for field in [&p.f, &p.mu] {
                    let g = field.grad(x);
                    for d in 0..2 {
                        let mut xp = x;
                        let mut xm = x;
                        xp[d] += h;
                        xm[d] -= h;
                        let fd = (field.eval(xp) - field.eval(xm)) / (2.0 * h);
                        let scale = g[d].abs().max(1.0);
                        worst = worst.max((g[d] - fd).abs() / scale);
                    }
                }
            }
        }
        assert!(worst <= 1e-6, "worst rel err {worst:.2e}");
    }

    #[test]
    fn third_dir_matches_finite_differences() {
        let p = Problem::default_example();
        let x = [1.3, 2.1];
        let v = [0.6, -0.8];
        let h = 1e-3;
        let quad = |s: f64| {
            let y = [x[0] + s * v[0], x[1] + s * v[1]];
            p.f.eval(y)
        };
        let fd3 = (quad(2.0 * h) - 2.0 * quad(h) + 2.0 * quad(-h) - quad(-2.0 * h)) / (2.0 * h * h * h);
        assert!((p.f.third_dir(x, v) - fd3).abs() < 1e-5);
    }

    #[test]
    fn grad_det_hess_matches_fd() {
        let p = Problem::default_example();
        let eta = -0.7;
        let x = [2.2, 0.9];
        let g = p.f.grad_det_hess(x, Some((&p.mu, eta)));
        let h = 1e-6;
        for d in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[d] += h;
            xm[d] -= h;
            let fd = (p.det_hess_f_eta(xp, eta) - p.det_hess_f_eta(xm, eta)) / (2.0 * h);
            assert!((g[d] - fd).abs() < 1e-7, "component {d}: {} vs {}", g[d], fd);
        }
    }

    #[test]
    fn flow_rhs_vanishes_at_critical_point() {
        // f = cos x2, mu = cos x1 + 0.5 cos x2: (2pi/3, 0, 0) solves the
        // critical-point system, so the flow field is zero for any lambda.
        let f = TorusField::new(vec![FieldTerm { k: [0, 1], a: 1.0, b: 0.0 }]);
        let p = Problem::new(f, cos_x1_half_cos_x2(), Tolerances::default(), 6.0);
        for lambda in [0.0, 1.0, 8.0] {
            let r = p.flow_rhs([2.0 * std::f64::consts::FRAC_PI_3, 0.0, 0.0], lambda);
            // the point is representable only to 1 ulp, and the eta
            // component scales the roundoff by lambda^2
            assert!(r.iter().all(|c| c.abs() < 1e-13), "{r:?}");
        }
    }

    #[test]
    fn flow_rhs_matches_metric_gradient_fd() {
        let p = Problem::default_example();
        let lambda = 1.7;
        let z = [0.8, 2.9, -0.4];
        let r = p.flow_rhs(z, lambda);
        let h = 1e-6;
        let fval = |w: Vec3| p.f_eta([w[0], w[1]], w[2]);
        for d in 0..3 {
            let mut zp = z;
            let mut zm = z;
            zp[d] += h;
            zm[d] -= h;
            let mut fd = (fval(zp) - fval(zm)) / (2.0 * h);
            if d == 2 {
                fd *= lambda * lambda;
            }
            assert!((r[d] + fd).abs() < 1e-8);
        }
    }

    #[test]
    fn zeta_identities() {
        let p = Problem::default_example();
        // f = mu forces zeta = -1
        let q = Problem::new(p.mu.clone(), p.mu.clone(), Tolerances::default(), 6.0);
        assert!((q.zeta([1.0, 2.0]).unwrap() + 1.0).abs() < 1e-12);
        // defining orthogonality at assorted points
        for i in 0..20 {
            let x = [0.3 + 0.31 * i as f64, 1.9 - 0.17 * i as f64];
            let gm = p.mu.grad(x);
            if norm2(gm) < 1e-3 {
                continue;
            }
            let z = p.zeta(x).unwrap();
            let gf = p.f.grad(x);
            let resid = dot2(gm, [gf[0] + z * gm[0], gf[1] + z * gm[1]]);
            assert!(resid.abs() < 1e-10);
        }
    }

    #[test]
    fn field_serialization_schema() {
        let f = cos_x1_half_cos_x2();
        let json = serde_json::to_string(&f).unwrap();
        assert_eq!(json, r#"[{"k":[1,0],"a":1.0,"b":0.0},{"k":[0,1],"a":0.5,"b":0.0}]"#);
        let back: TorusField = serde_json::from_str(&json).unwrap();
        assert_eq!(back, f);
    }
}
