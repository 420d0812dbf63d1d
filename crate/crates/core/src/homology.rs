//! GF(2) chain complexes and their comparisons, plus the geometry of the
//! zero level set of mu: component tracing, restricted critical points, and
//! the boundary operator of the restricted gradient flow on each circle.

use serde::Serialize;

use crate::field::{wrap_angle, Problem, TWO_PI};
use crate::linalg::{dot2, norm2, Vec2};

/// Dense GF(2) matrix; rows are u64-packed bitsets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Z2Matrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<Vec<u64>>,
}

impl Z2Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let words = cols.div_ceil(64);
        Self { rows, cols, data: vec![vec![0u64; words]; rows] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.data[r][c / 64] >> (c % 64) & 1 == 1
    }

    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        if v {
            self.data[r][c / 64] |= 1u64 << (c % 64);
        } else {
            self.data[r][c / 64] &= !(1u64 << (c % 64));
        }
    }

    pub fn mul(&self, other: &Z2Matrix) -> Z2Matrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Z2Matrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                if self.get(r, k) {
                    for w in 0..out.data[r].len() {
                        out.data[r][w] ^= other.data[k][w];
                    }
                }
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|row| row.iter().all(|&w| w == 0))
    }

    /// Gaussian elimination over GF(2) with first-nonzero pivoting.
    /// Returns the rank and a basis of the kernel (as column bit-vectors).
    pub fn reduce(&self) -> (usize, Vec<Vec<bool>>) {
        let mut m = self.data.clone();
        let words = self.cols.div_ceil(64);
        // record column operations on an identity to extract the kernel:
        // we eliminate on the transpose instead, treating columns as vectors.
        // Simpler: column-reduce a copy while mirroring ops into a tracker.
        let mut cols: Vec<Vec<u64>> = (0..self.cols)
            .map(|c| {
                let mut col = vec![0u64; self.rows.div_ceil(64).max(1)];
                for r in 0..self.rows {
                    if self.get(r, c) {
                        col[r / 64] |= 1 << (r % 64);
                    }
                }
                col
            })
            .collect();
        let mut track: Vec<Vec<u64>> = (0..self.cols)
            .map(|c| {
                let mut t = vec![0u64; words.max(1)];
                t[c / 64] |= 1 << (c % 64);
                t
            })
            .collect();
        let _ = &mut m;
        let mut rank = 0usize;
        let mut used = vec![false; self.cols];
        for r in 0..self.rows {
            // first unused column with a nonzero entry in row r
            let pivot = (0..self.cols).find(|&c| !used[c] && cols[c][r / 64] >> (r % 64) & 1 == 1);
            let Some(p) = pivot else { continue };
            used[p] = true;
            rank += 1;
            for c in 0..self.cols {
                if c != p && cols[c][r / 64] >> (r % 64) & 1 == 1 {
                    let (a, b) = if c < p {
                        let (lo, hi) = cols.split_at_mut(p);
                        (&mut lo[c], &hi[0])
                    } else {
                        let (lo, hi) = cols.split_at_mut(c);
                        (&mut hi[0], &lo[p])
                    };
                    for w in 0..a.len() {
                        a[w] ^= b[w];
                    }
                    let (a, b) = if c < p {
                        let (lo, hi) = track.split_at_mut(p);
                        (&mut lo[c], &hi[0])
                    } else {
                        let (lo, hi) = track.split_at_mut(c);
                        (&mut hi[0], &lo[p])
                    };
                    for w in 0..a.len() {
                        a[w] ^= b[w];
                    }
                }
            }
        }
        let mut kernel = Vec::new();
        for c in 0..self.cols {
            if !used[c] && cols[c].iter().all(|&w| w == 0) {
                let v: Vec<bool> = (0..self.cols).map(|i| track[c][i / 64] >> (i % 64) & 1 == 1).collect();
                kernel.push(v);
            }
        }
        (rank, kernel)
    }

    pub fn rank(&self) -> usize {
        self.reduce().0
    }

    /// Rows rendered as 0/1 strings for reports.
    pub fn bit_rows(&self) -> Vec<String> {
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| if self.get(r, c) { '1' } else { '0' }).collect())
            .collect()
    }
}

/// Provenance of a chain complex.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Provenance {
    Lambda(f64),
    Zero,
    Restricted,
}

/// A finitely generated GF(2) chain complex with per-degree generator ids.
#[derive(Clone, Debug, Serialize)]
pub struct Z2ChainComplex {
    /// generators[k] lists the ids contributing to degree k.
    pub generators: Vec<Vec<usize>>,
    /// boundary[k]: matrix of the degree-k boundary, shape
    /// (len generators[k-1]) x (len generators[k]); boundary[0] is empty.
    pub boundary: Vec<Z2Matrix>,
    pub provenance: Provenance,
}

#[derive(Debug, thiserror::Error)]
pub enum HomologyError {
    #[error("boundary fails to square to zero in degree {degree}")]
    BoundarySquare { degree: usize },
    #[error("generator counts differ in degree {degree}: {left} vs {right}")]
    BijectionMismatch { degree: usize, left: usize, right: usize },
    #[error("level-set component failed to close (gap {gap:.3e})")]
    TraceFailure { gap: f64 },
}

impl Z2ChainComplex {
    pub fn new(generators: Vec<Vec<usize>>, boundary: Vec<Z2Matrix>, provenance: Provenance) -> Self {
        Self { generators, boundary, provenance }
    }

    pub fn max_degree(&self) -> usize {
        self.generators.len().saturating_sub(1)
    }

    /// Verify boundary * boundary = 0 in every degree.
    pub fn check_square_zero(&self) -> Result<(), HomologyError> {
        for k in 1..self.boundary.len() {
            if self.boundary[k - 1].cols == 0 || self.boundary[k].cols == 0 {
                continue;
            }
            if k >= 2 {
                let prod = self.boundary[k - 1].mul(&self.boundary[k]);
                if !prod.is_zero() {
                    return Err(HomologyError::BoundarySquare { degree: k });
                }
            }
        }
        Ok(())
    }

    /// GF(2) Betti numbers per degree.
    pub fn betti(&self) -> Vec<usize> {
        let n = self.generators.len();
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let dim = self.generators[k].len();
            let rank_k = if k < self.boundary.len() && dim > 0 {
                self.boundary[k].rank()
            } else {
                0
            };
            let rank_k1 = if k + 1 < self.boundary.len() {
                self.boundary[k + 1].rank()
            } else {
                0
            };
            out.push(dim - rank_k - rank_k1);
        }
        out
    }
}

/// Standalone GF(2) reduction: rank and kernel basis of a dense 0/1 matrix.
pub fn z2_reduce(entries: &[Vec<u8>]) -> (usize, Vec<Vec<bool>>) {
    let rows = entries.len();
    let cols = entries.first().map_or(0, |r| r.len());
    let mut m = Z2Matrix::zeros(rows, cols);
    for (r, row) in entries.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            if v % 2 == 1 {
                m.set(r, c, true);
            }
        }
    }
    m.reduce()
}

/// A restricted critical point on a level-set circle.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RestrictedCrit {
    pub id: usize,
    pub component: usize,
    /// Arclength position along its circle's polyline.
    pub s: f64,
    pub x: Vec2,
    /// Restricted Morse index: 0 at minima of f along the circle, 1 at maxima.
    pub index: usize,
    pub f_value: f64,
    /// |second derivative of f along the curve| (Morse margin).
    pub curvature: f64,
}

/// Traced zero level set of mu with its restricted critical points.
#[derive(Clone, Debug, Serialize)]
pub struct LevelSetGeometry {
    /// Closed polylines, one per component (lifted coordinates).
    pub components: Vec<Vec<Vec2>>,
    pub lengths: Vec<f64>,
    pub crits: Vec<RestrictedCrit>,
    pub min_grad_mu: f64,
    pub min_restricted_second_derivative: f64,
    pub min_restricted_value_gap: f64,
}

impl LevelSetGeometry {
    pub fn component_count(&self) -> usize {
        self.components.len()
    }
}

fn project_to_level(problem: &Problem, mut x: Vec2, tol: f64) -> Option<Vec2> {
    for _ in 0..50 {
        let m = problem.mu.eval(x);
        if m.abs() < tol {
            return Some(x);
        }
        let g = problem.mu.grad(x);
        let n2 = dot2(g, g);
        if n2 < 1e-20 {
            return None;
        }
        x = [x[0] - m * g[0] / n2, x[1] - m * g[1] / n2];
    }
    None
}

/// Trace mu^{-1}(0) by predictor-corrector marching from grid seeds.
/// Components must close up; the trace fails otherwise.
pub fn trace_level_set(problem: &Problem, grid_n: usize) -> Result<LevelSetGeometry, HomologyError> {
    let tol = 1e-12;
    let step = 0.01;
    let mut components: Vec<Vec<Vec2>> = Vec::new();
    let mut min_grad = f64::INFINITY;

    let near_existing = |components: &Vec<Vec<Vec2>>, x: Vec2| -> bool {
        components.iter().any(|poly| {
            poly.iter()
                .any(|&p| crate::field::torus_dist(p, [wrap_angle(x[0]), wrap_angle(x[1])]) < 2.5 * step)
        })
    };

    for i in 0..grid_n {
        for j in 0..grid_n {
            let a = [TWO_PI * i as f64 / grid_n as f64, TWO_PI * j as f64 / grid_n as f64];
            let b = [TWO_PI * (i + 1) as f64 / grid_n as f64, a[1]];
            let (ma, mb) = (problem.mu.eval(a), problem.mu.eval(b));
            if ma == 0.0 || ma.signum() == mb.signum() {
                continue;
            }
            let w = ma.abs() / (ma.abs() + mb.abs());
            let seed = [a[0] + w * (b[0] - a[0]), a[1]];
            let Some(start) = project_to_level(problem, seed, tol) else { continue };
            if near_existing(&components, start) {
                continue;
            }
            // march with consistent orientation until closure
            let mut poly = vec![start];
            let mut x = start;
            let mut total = 0.0;
            let mut closed = false;
            while total < 200.0 {
                let g = problem.mu.grad(x);
                let gn = norm2(g);
                min_grad = min_grad.min(gn);
                let t = [-g[1] / gn, g[0] / gn];
                let pred = [x[0] + step * t[0], x[1] + step * t[1]];
                let Some(next) = project_to_level(problem, pred, tol) else {
                    return Err(HomologyError::TraceFailure { gap: f64::INFINITY });
                };
                total += norm2([next[0] - x[0], next[1] - x[1]]);
                x = next;
                poly.push(x);
                if total > 4.0 * step {
                    let gap = crate::field::torus_dist(
                        [wrap_angle(x[0]), wrap_angle(x[1])],
                        [wrap_angle(start[0]), wrap_angle(start[1])],
                    );
                    if gap < 0.75 * step {
                        closed = true;
                        break;
                    }
                }
            }
            if !closed {
                let gap = crate::field::torus_dist(
                    [wrap_angle(x[0]), wrap_angle(x[1])],
                    [wrap_angle(start[0]), wrap_angle(start[1])],
                );
                return Err(HomologyError::TraceFailure { gap });
            }
            components.push(poly);
        }
    }

    // restricted critical points per component
    let mut crits = Vec::new();
    let mut min_curv = f64::INFINITY;
    for (ci, poly) in components.iter().enumerate() {
        let n = poly.len();
        let svals: Vec<f64> = {
            let mut s = 0.0;
            let mut out = vec![0.0];
            for w in poly.windows(2) {
                s += norm2([w[1][0] - w[0][0], w[1][1] - w[0][1]]);
                out.push(s);
            }
            out
        };
        // oriented tangential derivative at the nodes
        let gvals: Vec<f64> = poly
            .iter()
            .map(|&x| {
                let gm = problem.mu.grad(x);
                let gn = norm2(gm);
                let t = [-gm[1] / gn, gm[0] / gn];
                dot2(problem.f.grad(x), t)
            })
            .collect();
        for i in 0..n - 1 {
            let (ga, gb) = (gvals[i], gvals[i + 1]);
            // a node can sit exactly on a critical point (g = 0): take it as
            // the crossing; otherwise require a sign change to bisect
            let exact = ga == 0.0;
            if !exact && (gb == 0.0 || ga.signum() == gb.signum()) {
                continue;
            }
            // bisect along the curve between nodes i and i+1
            let mut lo = poly[i];
            let mut hi = if exact { poly[i] } else { poly[i + 1] };
            let mut glo = ga;
            for _ in 0..if exact { 0 } else { 60 } {
                let mid = project_to_level(problem, [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0], tol)
                    .unwrap_or([(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0]);
                let gm = problem.mu.grad(mid);
                let gn = norm2(gm);
                let t = [-gm[1] / gn, gm[0] / gn];
                let gmid = dot2(problem.f.grad(mid), t);
                if glo.signum() == gmid.signum() {
                    lo = mid;
                    glo = gmid;
                } else {
                    hi = mid;
                }
            }
            let x = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
            // curvature from a centered difference of g along the curve
            let h = 1e-5;
            let gm = problem.mu.grad(x);
            let gn = norm2(gm);
            let t = [-gm[1] / gn, gm[0] / gn];
            let xp = project_to_level(problem, [x[0] + h * t[0], x[1] + h * t[1]], tol).unwrap_or(x);
            let xm = project_to_level(problem, [x[0] - h * t[0], x[1] - h * t[1]], tol).unwrap_or(x);
            let gp = {
                let gmm = problem.mu.grad(xp);
                let gnn = norm2(gmm);
                dot2(problem.f.grad(xp), [-gmm[1] / gnn, gmm[0] / gnn])
            };
            let gmv = {
                let gmm = problem.mu.grad(xm);
                let gnn = norm2(gmm);
                dot2(problem.f.grad(xm), [-gmm[1] / gnn, gmm[0] / gnn])
            };
            let d2 = (gp - gmv) / (2.0 * h);
            // the closing node repeats the seed; drop re-detections there
            let wrapped = [wrap_angle(x[0]), wrap_angle(x[1])];
            if crits
                .iter()
                .any(|c: &RestrictedCrit| c.component == ci && crate::field::torus_dist(c.x, wrapped) < 1e-5)
            {
                continue;
            }
            min_curv = min_curv.min(d2.abs());
            let index = if d2 < 0.0 { 1 } else { 0 };
            crits.push(RestrictedCrit {
                id: 0,
                component: ci,
                s: svals[i],
                x: [wrap_angle(x[0]), wrap_angle(x[1])],
                index,
                f_value: problem.f.eval(x),
                curvature: d2.abs(),
            });
        }
    }
    // stable ids: sort by (component, s)
    crits.sort_by(|a, b| (a.component, a.s).partial_cmp(&(b.component, b.s)).unwrap());
    for (i, c) in crits.iter_mut().enumerate() {
        c.id = i;
    }
    let mut fvals: Vec<f64> = crits.iter().map(|c| c.f_value).collect();
    fvals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let min_gap = fvals
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);

    let lengths = components
        .iter()
        .map(|poly| {
            poly.windows(2)
                .map(|w| norm2([w[1][0] - w[0][0], w[1][1] - w[0][1]]))
                .sum()
        })
        .collect();

    Ok(LevelSetGeometry {
        components,
        lengths,
        crits,
        min_grad_mu: min_grad,
        min_restricted_second_derivative: min_curv,
        min_restricted_value_gap: min_gap,
    })
}

/// Component count and lengths of the zero level set (the topology oracle).
pub fn level_set_topology(problem: &Problem, grid_n: usize) -> Result<(usize, Vec<f64>), HomologyError> {
    if field_never_vanishes(problem, grid_n) {
        return Ok((0, Vec::new()));
    }
    let geo = trace_level_set(problem, grid_n)?;
    Ok((geo.component_count(), geo.lengths))
}

fn field_never_vanishes(problem: &Problem, grid_n: usize) -> bool {
    let mut min_abs = f64::INFINITY;
    let mut sign_seen = 0.0;
    for i in 0..grid_n {
        for j in 0..grid_n {
            let v = problem
                .mu
                .eval([TWO_PI * i as f64 / grid_n as f64, TWO_PI * j as f64 / grid_n as f64]);
            min_abs = min_abs.min(v.abs());
            if sign_seen == 0.0 {
                sign_seen = v.signum();
            } else if v.signum() != sign_seen {
                return false;
            }
        }
    }
    true
}

/// Build the Morse complex of f restricted to the level set: on each circle
/// the boundary of an index-1 point is the mod-2 sum of its two cyclically
/// adjacent index-0 points.
pub fn build_restricted_complex(
    problem: &Problem,
    grid_n: usize,
) -> Result<(Z2ChainComplex, LevelSetGeometry), HomologyError> {
    let geo = trace_level_set(problem, grid_n)?;
    let gens0: Vec<usize> = geo.crits.iter().filter(|c| c.index == 0).map(|c| c.id).collect();
    let gens1: Vec<usize> = geo.crits.iter().filter(|c| c.index == 1).map(|c| c.id).collect();
    let mut boundary1 = Z2Matrix::zeros(gens0.len(), gens1.len());
    for comp in 0..geo.component_count() {
        let ring: Vec<&RestrictedCrit> = geo.crits.iter().filter(|c| c.component == comp).collect();
        // equal counts and alternation around the circle
        debug_assert_eq!(ring.len() % 2, 0, "a circle carries max/min pairs");
        if ring.len() >= 2 {
            for w in 0..ring.len() {
                let a = ring[w];
                let b = ring[(w + 1) % ring.len()];
                debug_assert_ne!(a.index, b.index, "indices must alternate around a circle");
            }
        }
        for (pos, c) in ring.iter().enumerate() {
            if c.index != 1 {
                continue;
            }
            let col = gens1.iter().position(|&id| id == c.id).unwrap();
            let prev = ring[(pos + ring.len() - 1) % ring.len()];
            let next = ring[(pos + 1) % ring.len()];
            for nb in [prev, next] {
                let row = gens0.iter().position(|&id| id == nb.id).unwrap();
                let cur = boundary1.get(row, col);
                boundary1.set(row, col, !cur);
            }
        }
    }
    let complex = Z2ChainComplex::new(
        vec![gens0, gens1],
        vec![Z2Matrix::zeros(0, 0), boundary1],
        Provenance::Restricted,
    );
    complex.check_square_zero()?;
    Ok((complex, geo))
}

/// Outcome of comparing two complexes under a degree-shifting bijection.
#[derive(Clone, Debug, Serialize)]
pub struct ShiftComparison {
    pub boundaries_equal: bool,
    pub betti_equal: bool,
    pub betti_left: Vec<usize>,
    pub betti_right: Vec<usize>,
    pub mismatches: Vec<String>,
}

/// Compare complex `ca` against `cb` after shifting degrees down by `shift`
/// and relabeling generators by `bijection`, which maps (degree k, position i
/// in ca.generators[k]) to the position in cb.generators[k - shift].
pub fn compare_shifted(
    ca: &Z2ChainComplex,
    cb: &Z2ChainComplex,
    bijection: &[Vec<usize>],
    shift: usize,
) -> Result<ShiftComparison, HomologyError> {
    for k in 0..ca.generators.len() {
        let left = ca.generators[k].len();
        let right = if k >= shift && k - shift < cb.generators.len() {
            cb.generators[k - shift].len()
        } else {
            0
        };
        if left != right {
            return Err(HomologyError::BijectionMismatch { degree: k, left, right });
        }
    }
    let mut mismatches = Vec::new();
    let mut boundaries_equal = true;
    for k in 1..ca.generators.len() {
        let rows = ca.generators[k - 1].len();
        let cols = ca.generators[k].len();
        if cols == 0 {
            continue;
        }
        let kb = k - shift;
        for col in 0..cols {
            for row in 0..rows {
                let left = ca.boundary[k].get(row, col);
                let right = if kb >= 1 && kb < cb.boundary.len() {
                    cb.boundary[kb].get(bijection[k - 1][row], bijection[k][col])
                } else {
                    false
                };
                if left != right {
                    boundaries_equal = false;
                    mismatches.push(format!(
                        "degree {k}: entry ({row},{col}) differs: {left} vs {right}"
                    ));
                }
            }
        }
    }
    let betti_left: Vec<usize> = ca.betti();
    let betti_right: Vec<usize> = cb.betti();
    // compare shifted: b_k(ca) vs b_{k-shift}(cb)
    let mut betti_equal = true;
    for k in 0..betti_left.len() {
        let right = if k >= shift && k - shift < betti_right.len() {
            betti_right[k - shift]
        } else {
            0
        };
        if betti_left[k] != right {
            betti_equal = false;
        }
    }
    Ok(ShiftComparison {
        boundaries_equal,
        betti_equal,
        betti_left,
        betti_right,
        mismatches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduce_basics() {
        let (rank, kernel) = z2_reduce(&[vec![0, 0, 0], vec![0, 0, 0], vec![0, 0, 0]]);
        assert_eq!(rank, 0);
        assert_eq!(kernel.len(), 3);
        let (rank, kernel) = z2_reduce(&[
            vec![1, 0, 0, 0],
            vec![0, 1, 0, 0],
            vec![0, 0, 1, 0],
            vec![0, 0, 0, 1],
        ]);
        assert_eq!(rank, 4);
        assert!(kernel.is_empty());
        let (rank, kernel) = z2_reduce(&[vec![1, 1], vec![1, 1]]);
        assert_eq!(rank, 1);
        assert_eq!(kernel.len(), 1);
        // kernel vector [1,1]
        assert_eq!(kernel[0], vec![true, true]);
    }

    #[test]
    fn kernel_vectors_annihilate() {
        let m = vec![
            vec![1, 0, 1, 1, 0],
            vec![0, 1, 1, 0, 1],
            vec![1, 1, 0, 1, 1],
        ];
        let (rank, kernel) = z2_reduce(&m);
        assert_eq!(rank + kernel.len(), 5);
        for v in &kernel {
            for row in &m {
                let s: u32 = row
                    .iter()
                    .zip(v)
                    .map(|(&a, &b)| (a as u32 & 1) * (b as u32))
                    .sum();
                assert_eq!(s % 2, 0);
            }
        }
    }

    #[test]
    fn level_set_of_default_mu_has_two_circles() {
        let p = Problem::default_example();
        let (count, lengths) = level_set_topology(&p, 48).unwrap();
        assert_eq!(count, 2);
        assert_eq!(lengths.len(), 2);
        for l in lengths {
            assert!(l > TWO_PI, "each circle winds around x2: length {l}");
        }
        // refinement stability
        let (count2, _) = level_set_topology(&p, 96).unwrap();
        assert_eq!(count2, 2);
    }

    #[test]
    fn no_components_when_mu_positive() {
        use crate::field::{FieldTerm, Tolerances, TorusField};
        let f = TorusField::new(vec![FieldTerm { k: [0, 1], a: 1.0, b: 0.0 }]);
        let mu = TorusField::new(vec![
            FieldTerm { k: [0, 0], a: 2.0, b: 0.0 },
            FieldTerm { k: [1, 0], a: 1.0, b: 0.0 },
        ]);
        let p = Problem::new(f, mu, Tolerances::default(), 4.0);
        let (count, _) = level_set_topology(&p, 48).unwrap();
        assert_eq!(count, 0);
    }

    #[test]
    fn restricted_complex_of_default_config() {
        let p = Problem::default_example();
        let (complex, geo) = build_restricted_complex(&p, 48).unwrap();
        // equal numbers of maxima and minima per circle
        for comp in 0..geo.component_count() {
            let n0 = geo.crits.iter().filter(|c| c.component == comp && c.index == 0).count();
            let n1 = geo.crits.iter().filter(|c| c.component == comp && c.index == 1).count();
            assert_eq!(n0, n1);
            assert!(n0 >= 1);
        }
        // total Betti: one connected comp + one loop per circle
        let betti = complex.betti();
        assert_eq!(betti, vec![2, 2]);
        complex.check_square_zero().unwrap();
    }

    #[test]
    fn single_max_min_circle_has_zero_boundary() {
        use crate::field::{FieldTerm, Tolerances, TorusField};
        // mu = cos x1: level set = two vertical circles; f = cos x2 has one
        // max and one min on each.
        let f = TorusField::new(vec![FieldTerm { k: [0, 1], a: 1.0, b: 0.0 }]);
        let mu = TorusField::new(vec![FieldTerm { k: [1, 0], a: 1.0, b: 0.0 }]);
        let p = Problem::new(f, mu, Tolerances::default(), 4.0);
        let (complex, _) = build_restricted_complex(&p, 48).unwrap();
        assert!(complex.boundary[1].is_zero());
        assert_eq!(complex.betti(), vec![2, 2]);
    }

    #[test]
    fn compare_shifted_identity() {
        let gens = vec![vec![0, 1], vec![2, 3]];
        let mut b1 = Z2Matrix::zeros(2, 2);
        b1.set(0, 0, true);
        b1.set(1, 0, true);
        let c = Z2ChainComplex::new(gens, vec![Z2Matrix::zeros(0, 0), b1], Provenance::Restricted);
        let bij = vec![vec![0, 1], vec![0, 1]];
        let cmp = compare_shifted(&c, &c, &bij, 0).unwrap();
        assert!(cmp.boundaries_equal && cmp.betti_equal);
    }
}
