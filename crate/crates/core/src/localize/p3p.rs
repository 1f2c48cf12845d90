//! Lambda Twist P3P (Persson and Nordberg).

use crate::camera::Extrinsics;
use crate::math::{Mat3, Vec3};
use crate::scalar::Real;

/// Real roots of `x² + b·x + c`, larger-magnitude root first.
fn root2real<T: Real>(b: T, c: T) -> Option<(T, T)> {
    let disc = b * b - T::lit(4.0) * c;
    if disc < T::zero() {
        return None;
    }
    let y = disc.sqrt();
    let r1 = if b < T::zero() {
        (y - b) * T::lit(0.5)
    } else {
        (-b - y) * T::lit(0.5)
    };
    if r1 == T::zero() {
        return Some((T::zero(), T::zero()));
    }
    Some((r1, c / r1))
}

/// One real root of `r³ + b·r² + c·r + d`, chosen where the cubic is steep.
fn cubic_root<T: Real>(b: T, c: T, d: T) -> T {
    let three = T::lit(3.0);
    let two = T::lit(2.0);
    let mut r0;
    if b * b >= three * c {
        let v = (b * b - three * c).sqrt();
        let t1 = (-b - v) / three;
        let k = ((t1 + b) * t1 + c) * t1 + d;
        if k > T::zero() {
            r0 = t1 - (-k / (three * t1 + b)).sqrt();
        } else {
            let t2 = (-b + v) / three;
            let k = ((t2 + b) * t2 + c) * t2 + d;
            r0 = t2 + (-k / (three * t2 + b)).sqrt();
        }
    } else {
        r0 = -b / three;
        if ((three * r0 + two * b) * r0 + c).abs() < T::lit(1e-4) {
            r0 += T::one();
        }
    }
    let limit = T::TINY * T::lit(1e-1);
    for i in 0..50 {
        let fx = ((r0 + b) * r0 + c) * r0 + d;
        if i >= 7 && fx.abs() <= limit {
            break;
        }
        let fpx = (three * r0 + two * b) * r0 + c;
        if fpx == T::zero() {
            break;
        }
        r0 -= fx / fpx;
    }
    r0
}

/// Eigenvectors (as columns) and the two non-zero eigenvalues of a
/// symmetric matrix known to be singular.
fn eig_singular<T: Real>(x: &Mat3<T>) -> Option<(Mat3<T>, T, T)> {
    let m = &x.m;
    let v3 = Vec3::new(
        m[1][0] * m[2][1] - m[2][0] * m[1][1],
        m[2][0] * m[0][1] - m[2][1] * m[0][0],
        m[1][1] * m[0][0] - m[1][0] * m[0][1],
    )
    .try_normalize()?;
    let x01_sq = m[0][1] * m[0][1];
    let b = -m[0][0] - m[1][1] - m[2][2];
    let c = -x01_sq - m[0][2] * m[0][2] - m[1][2] * m[1][2]
        + m[0][0] * (m[1][1] + m[2][2])
        + m[1][1] * m[2][2];
    let (mut e1, mut e2) = root2real(b, c)?;
    if e1.abs() < e2.abs() {
        std::mem::swap(&mut e1, &mut e2);
    }
    let mx0011 = -m[0][0] * m[1][1];
    let prec0 = m[0][1] * m[1][2] - m[0][2] * m[1][1];
    let prec1 = m[0][1] * m[0][2] - m[0][0] * m[1][2];
    let vec = |e: T| {
        let tmp = T::one() / (e * (m[0][0] + m[1][1]) + mx0011 - e * e + x01_sq);
        let a1 = -(e * m[0][2] + prec0) * tmp;
        let a2 = -(e * m[1][2] + prec1) * tmp;
        let rn = T::one() / (a1 * a1 + a2 * a2 + T::one()).sqrt();
        Vec3::new(a1 * rn, a2 * rn, rn)
    };
    Some((Mat3::from_cols(vec(e1), vec(e2), v3), e1, e2))
}

/// Newton refinement of the depth triple against the three distance constraints.
#[allow(clippy::too_many_arguments)]
fn refine_depths<T: Real>(l: [T; 3], a12: T, a13: T, a23: T, b12: T, b13: T, b23: T) -> [T; 3] {
    let residual = |l: &[T; 3]| {
        [
            l[0] * l[0] + l[1] * l[1] + b12 * l[0] * l[1] - a12,
            l[0] * l[0] + l[2] * l[2] + b13 * l[0] * l[2] - a13,
            l[1] * l[1] + l[2] * l[2] + b23 * l[1] * l[2] - a23,
        ]
    };
    let l1n = |r: &[T; 3]| r[0].abs() + r[1].abs() + r[2].abs();
    let two = T::lit(2.0);
    let tol = T::TINY * T::lit(1e-2) * (a12 + a13 + a23);
    let mut l = l;
    let mut r = residual(&l);
    for _ in 0..5 {
        if l1n(&r) < tol {
            break;
        }
        let j = [
            [two * l[0] + b12 * l[1], two * l[1] + b12 * l[0], T::zero()],
            [two * l[0] + b13 * l[2], T::zero(), two * l[2] + b13 * l[0]],
            [T::zero(), two * l[1] + b23 * l[2], two * l[2] + b23 * l[1]],
        ];
        let Some(step) = crate::math::solve_dense(j, r) else {
            break;
        };
        let cand = [l[0] - step[0], l[1] - step[1], l[2] - step[2]];
        let rc = residual(&cand);
        if l1n(&rc) > l1n(&r) {
            break;
        }
        l = cand;
        r = rc;
    }
    l
}

/// Nearest rotation by Gram-Schmidt on the columns.
fn orthonormalize<T: Real>(r: &Mat3<T>) -> Option<Mat3<T>> {
    let c0 = r.col(0).try_normalize()?;
    let c1 = r.col(1);
    let c1 = (c1 - c0 * c0.dot(&c1)).try_normalize()?;
    Some(Mat3::from_cols(c0, c1, c0.cross(&c1)))
}

/// All poses with `λᵢ·yᵢ = R·xᵢ + t`, `λᵢ > 0`, for three world points `x`
/// and their bearing vectors `y` (any length). Returns up to four solutions.
pub fn p3p<T: Real>(x: &[Vec3<T>; 3], y: &[Vec3<T>; 3]) -> Vec<Extrinsics<T>> {
    let mut out = Vec::with_capacity(4);
    let (Some(y1), Some(y2), Some(y3)) = (
        y[0].try_normalize(),
        y[1].try_normalize(),
        y[2].try_normalize(),
    ) else {
        return out;
    };
    let d12 = x[0] - x[1];
    let d13 = x[0] - x[2];
    let d23 = x[1] - x[2];
    let a12 = d12.dot(&d12);
    let a13 = d13.dot(&d13);
    let a23 = d23.dot(&d23);
    let Some(x_inv) = Mat3::from_cols(d12, d13, d12.cross(&d13)).try_inverse() else {
        return out;
    };

    let c12 = y1.dot(&y2);
    let c23 = y2.dot(&y3);
    let c31 = y3.dot(&y1);
    let blob = c12 * c23 * c31 - T::one();
    let s12 = T::one() - c12 * c12;
    let s23 = T::one() - c23 * c23;
    let s31 = T::one() - c31 * c31;
    let two = T::lit(2.0);
    let (b12, b13, b23) = (-two * c12, -two * c31, -two * c23);

    let p3 = a13 * (a23 * s31 - a13 * s23);
    if p3 == T::zero() {
        return out;
    }
    let p2 = two * blob * a23 * a13 + a13 * (two * a12 + a13) * s23 + a23 * (a23 - a12) * s31;
    let p1 = a23 * (a13 - a23) * s12 - a12 * a12 * s23 - two * a12 * (blob * a23 + a13 * s23);
    let p0 = a12 * (a12 * s23 - a23 * s12);
    let g = cubic_root(p2 / p3, p1 / p3, p0 / p3);

    let d0 = Mat3::from_rows(
        Vec3::new(a23 * (T::one() - g), -(a23 * c12), a23 * c31 * g),
        Vec3::new(-(a23 * c12), a23 - a12 + a13 * g, -c23 * (a13 * g - a12)),
        Vec3::new(a23 * c31 * g, -c23 * (a13 * g - a12), g * (a13 - a23) - a12),
    );
    let Some((v, e0, e1)) = eig_singular(&d0) else {
        return out;
    };
    if e0 == T::zero() {
        return out;
    }
    let ratio = (-e1 / e0).max(T::zero()).sqrt();

    let mut depths: Vec<[T; 3]> = Vec::with_capacity(4);
    for s in [ratio, -ratio] {
        let w2 = T::one() / (s * v.m[0][1] - v.m[0][0]);
        let w0 = w2 * (v.m[1][0] - s * v.m[1][1]);
        let w1 = w2 * (v.m[2][0] - s * v.m[2][1]);
        let a = T::one() / ((a13 - a12) * w1 * w1 - a12 * b13 * w1 - a12);
        let b = a * (a13 * b12 * w1 - a12 * b13 * w0 - two * w0 * w1 * (a12 - a13));
        let c = a * ((a13 - a12) * w0 * w0 + a13 * b12 * w0 + a13);
        if !(b.is_finite() && c.is_finite()) {
            continue;
        }
        let Some((tau1, tau2)) = root2real(b, c) else {
            continue;
        };
        for tau in [tau1, tau2] {
            if tau <= T::zero() {
                continue;
            }
            let d = a23 / (tau * (b23 + tau) + T::one());
            if d > T::zero() {
                let l2 = d.sqrt();
                let l3 = tau * l2;
                let l1 = w0 * l2 + w1 * l3;
                if l1 >= T::zero() {
                    depths.push([l1, l2, l3]);
                }
            }
        }
    }

    for l in depths {
        let l = refine_depths(l, a12, a13, a23, b12, b13, b23);
        let r1 = y1 * l[0];
        let yd1 = r1 - y2 * l[1];
        let yd2 = r1 - y3 * l[2];
        let rot = Mat3::from_cols(yd1, yd2, yd1.cross(&yd2)) * x_inv;
        let Some(rot) = orthonormalize(&rot) else {
            continue;
        };
        let t = r1 - rot * x[0];
        if rot.m.iter().flatten().all(|v| v.is_finite())
            && t.x.is_finite()
            && t.y.is_finite()
            && t.z.is_finite()
        {
            out.push(Extrinsics {
                rotation: rot,
                translation: t,
            });
        }
    }
    out
}
