//! Small fixed-size linear algebra used throughout: 2- and 3-vectors,
//! symmetric eigendecompositions, and a pivoted 3x3 solve.

pub type Vec2 = [f64; 2];
pub type Vec3 = [f64; 3];
/// Symmetric 2x2 matrix stored as [a11, a12, a22].
pub type Sym2 = [f64; 3];

pub fn dot2(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub fn norm2(a: Vec2) -> f64 {
    dot2(a, a).sqrt()
}

pub fn dot3(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm3(a: Vec3) -> f64 {
    dot3(a, a).sqrt()
}

pub fn sym2_mul(m: Sym2, v: Vec2) -> Vec2 {
    [m[0] * v[0] + m[1] * v[1], m[1] * v[0] + m[2] * v[1]]
}

pub fn sym2_det(m: Sym2) -> f64 {
    m[0] * m[2] - m[1] * m[1]
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric 2x2.
pub fn sym2_eig(m: Sym2) -> ([f64; 2], [Vec2; 2]) {
    let [a, b, c] = m;
    let tr = a + c;
    let disc = ((a - c) * 0.5).hypot(b);
    let l0 = 0.5 * tr - disc;
    let l1 = 0.5 * tr + disc;
    // Eigenvector for l1 from the better-conditioned row.
    let v1 = if (a - l1).abs() > (c - l1).abs() {
        normalize2([-b, a - l1])
    } else if b.abs() > 1e-300 || (c - l1).abs() > 1e-300 {
        normalize2([c - l1, -b])
    } else {
        [1.0, 0.0]
    };
    let v1 = if v1 == [0.0, 0.0] { [1.0, 0.0] } else { v1 };
    let v0 = [-v1[1], v1[0]];
    ([l0, l1], [v0, v1])
}

fn normalize2(v: Vec2) -> Vec2 {
    let n = norm2(v);
    if n == 0.0 {
        [0.0, 0.0]
    } else {
        [v[0] / n, v[1] / n]
    }
}

pub fn normalize3(v: Vec3) -> Vec3 {
    let n = norm3(v);
    if n == 0.0 {
        [0.0; 3]
    } else {
        [v[0] / n, v[1] / n, v[2] / n]
    }
}

/// Symmetric 3x3 in full storage.
#[derive(Clone, Copy, Debug)]
pub struct Sym3(pub [[f64; 3]; 3]);

impl Sym3 {
    /// Eigenvalues (ascending) with orthonormal eigenvectors, by cyclic
    /// Jacobi rotations. Plenty accurate for well-scaled 3x3 input.
    pub fn eig(&self) -> ([f64; 3], [Vec3; 3]) {
        let mut a = self.0;
        let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        for _ in 0..64 {
            let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
            if off < 1e-30 {
                break;
            }
            for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = 0.5 * (a[q][q] - a[p][p]) / a[p][q];
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let rot = |m: &mut [[f64; 3]; 3], left: bool| {
                    for k in 0..3 {
                        let (mp, mq) = if left {
                            (m[p][k], m[q][k])
                        } else {
                            (m[k][p], m[k][q])
                        };
                        if left {
                            m[p][k] = c * mp - s * mq;
                            m[q][k] = s * mp + c * mq;
                        } else {
                            m[k][p] = c * mp - s * mq;
                            m[k][q] = s * mp + c * mq;
                        }
                    }
                };
                rot(&mut a, true);
                rot(&mut a, false);
                rot(&mut v, false);
            }
        }
        let mut order = [0usize, 1, 2];
        order.sort_by(|&i, &j| a[i][i].partial_cmp(&a[j][j]).unwrap());
        let vals = [a[order[0]][order[0]], a[order[1]][order[1]], a[order[2]][order[2]]];
        let vecs = [
            [v[0][order[0]], v[1][order[0]], v[2][order[0]]],
            [v[0][order[1]], v[1][order[1]], v[2][order[1]]],
            [v[0][order[2]], v[1][order[2]], v[2][order[2]]],
        ];
        (vals, vecs)
    }
}

/// Solve a 3x3 linear system by LU with partial pivoting. Returns None when
/// the pivot collapses (singular within roundoff).
pub fn solve3(a: [[f64; 3]; 3], b: Vec3) -> Option<Vec3> {
    let mut m = a;
    let mut r = b;
    let mut perm = [0usize, 1, 2];
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())
            .unwrap();
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        perm.swap(col, piv);
        let tmp = r[col];
        r[col] = r[piv];
        r[piv] = tmp;
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            r[row] -= f * r[col];
        }
    }
    let mut x = [0.0; 3];
    for col in (0..3).rev() {
        let mut s = r[col];
        for k in col + 1..3 {
            s -= m[col][k] * x[k];
        }
        x[col] = s / m[col][col];
    }
    Some(x)
}

/// Solve a 2x2 system; None when singular.
pub fn solve2(a: [[f64; 2]; 2], b: Vec2) -> Option<Vec2> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det.abs() < 1e-300 {
        return None;
    }
    Some([
        (b[0] * a[1][1] - b[1] * a[0][1]) / det,
        (a[0][0] * b[1] - a[1][0] * b[0]) / det,
    ])
}

/// Smallest singular value of a 2x3 matrix (rows are gradient constraints).
pub fn min_singular_2x3(rows: [[f64; 3]; 2]) -> f64 {
    // sigma_min^2 is the smaller eigenvalue of A A^T (2x2 symmetric).
    let a = dot3(rows[0], rows[0]);
    let b = dot3(rows[0], rows[1]);
    let c = dot3(rows[1], rows[1]);
    let ([l0, _], _) = sym2_eig([a, b, c]);
    l0.max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sym2_eig_diag() {
        let ([l0, l1], [v0, v1]) = sym2_eig([2.0, 0.0, -3.0]);
        assert!((l0 + 3.0).abs() < 1e-14 && (l1 - 2.0).abs() < 1e-14);
        assert!(v0[1].abs() > 0.99 && v1[0].abs() > 0.99);
    }

    #[test]
    fn sym3_eig_reconstructs() {
        let m = Sym3([[2.0, 0.3, -0.1], [0.3, -1.0, 0.5], [-0.1, 0.5, 0.7]]);
        let (vals, vecs) = m.eig();
        assert!(vals[0] <= vals[1] && vals[1] <= vals[2]);
        for k in 0..3 {
            let v = vecs[k];
            let mv = [
                m.0[0][0] * v[0] + m.0[0][1] * v[1] + m.0[0][2] * v[2],
                m.0[1][0] * v[0] + m.0[1][1] * v[1] + m.0[1][2] * v[2],
                m.0[2][0] * v[0] + m.0[2][1] * v[1] + m.0[2][2] * v[2],
            ];
            for i in 0..3 {
                assert!((mv[i] - vals[k] * v[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn solve3_roundtrip() {
        let a = [[1.0, 2.0, -1.0], [0.5, -1.0, 3.0], [2.0, 0.1, 0.2]];
        let x = [0.3, -1.2, 2.5];
        let b = [
            a[0][0] * x[0] + a[0][1] * x[1] + a[0][2] * x[2],
            a[1][0] * x[0] + a[1][1] * x[1] + a[1][2] * x[2],
            a[2][0] * x[0] + a[2][1] * x[1] + a[2][2] * x[2],
        ];
        let y = solve3(a, b).unwrap();
        for i in 0..3 {
            assert!((y[i] - x[i]).abs() < 1e-12);
        }
    }
}
