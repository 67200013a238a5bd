//! Small fixed-size tensor algebra over any [`Scalar`].

use super::{AdError, Scalar};

pub type Mat2<S> = [[S; 2]; 2];
pub type Mat3<S> = [[S; 3]; 3];

pub fn identity2<S: Scalar>() -> Mat2<S> {
    [[S::cst(1.0), S::zero()], [S::zero(), S::cst(1.0)]]
}

pub fn identity3<S: Scalar>() -> Mat3<S> {
    let (o, z) = (S::cst(1.0), S::zero());
    [[o, z, z], [z, o, z], [z, z, o]]
}

pub fn trace<S: Scalar, const N: usize>(a: &[[S; N]; N]) -> S {
    (1..N).fold(a[0][0], |acc, i| acc + a[i][i])
}

pub fn transpose<S: Scalar, const N: usize>(a: &[[S; N]; N]) -> [[S; N]; N] {
    let mut t = *a;
    for (i, row) in a.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            t[j][i] = *v;
        }
    }
    t
}

pub fn matmul<S: Scalar, const N: usize>(a: &[[S; N]; N], b: &[[S; N]; N]) -> [[S; N]; N] {
    let mut c = [[S::zero(); N]; N];
    for i in 0..N {
        for j in 0..N {
            let mut acc = a[i][0] * b[0][j];
            for k in 1..N {
                acc = acc + a[i][k] * b[k][j];
            }
            c[i][j] = acc;
        }
    }
    c
}

pub fn matvec<S: Scalar, const N: usize>(a: &[[S; N]; N], v: &[S; N]) -> [S; N] {
    let mut out = [S::zero(); N];
    for (o, row) in out.iter_mut().zip(a) {
        let mut acc = row[0] * v[0];
        for k in 1..N {
            acc = acc + row[k] * v[k];
        }
        *o = acc;
    }
    out
}

/// Full contraction `A : B`.
pub fn ddot<S: Scalar, const N: usize>(a: &[[S; N]; N], b: &[[S; N]; N]) -> S {
    let mut acc = S::zero();
    for i in 0..N {
        for j in 0..N {
            acc = acc + a[i][j] * b[i][j];
        }
    }
    acc
}

pub fn det2<S: Scalar>(a: &Mat2<S>) -> S {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

pub fn det3<S: Scalar>(a: &Mat3<S>) -> S {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

pub fn inv2<S: Scalar>(a: &Mat2<S>) -> Result<Mat2<S>, AdError> {
    let det = det2(a);
    if det.value() == 0.0 {
        return Err(AdError::Domain { primitive: "inv2", value: 0.0 });
    }
    let r = det.recip();
    Ok([[a[1][1] * r, -a[0][1] * r], [-a[1][0] * r, a[0][0] * r]])
}

pub fn inv3<S: Scalar>(a: &Mat3<S>) -> Result<Mat3<S>, AdError> {
    let det = det3(a);
    if det.value() == 0.0 {
        return Err(AdError::Domain { primitive: "inv3", value: 0.0 });
    }
    let r = det.recip();
    let c = |i: usize, j: usize, k: usize, l: usize| a[i][j] * a[k][l] - a[i][l] * a[k][j];
    Ok([
        [c(1, 1, 2, 2) * r, -c(0, 1, 2, 2) * r, c(0, 1, 1, 2) * r],
        [-c(1, 0, 2, 2) * r, c(0, 0, 2, 2) * r, -c(0, 0, 1, 2) * r],
        [c(1, 0, 2, 1) * r, -c(0, 0, 2, 1) * r, c(0, 0, 1, 1) * r],
    ])
}

/// Embed an in-plane tensor into 3x3 with the given out-of-plane diagonal entry.
pub fn embed_plane<S: Scalar>(a: &Mat2<S>, zz: S) -> Mat3<S> {
    let z = S::zero();
    [[a[0][0], a[0][1], z], [a[1][0], a[1][1], z], [z, z, zz]]
}

pub fn in_plane<S: Scalar>(a: &Mat3<S>) -> Mat2<S> {
    [[a[0][0], a[0][1]], [a[1][0], a[1][1]]]
}

pub fn map2<S: Scalar, T: Scalar>(a: &Mat2<S>, f: impl Fn(S) -> T) -> Mat2<T> {
    [[f(a[0][0]), f(a[0][1])], [f(a[1][0]), f(a[1][1])]]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_times_matrix_is_identity() {
        let a: Mat3<f64> = [[2.0, 0.5, 0.1], [0.3, 1.5, -0.2], [0.0, 0.4, 3.0]];
        let p = matmul(&a, &inv3(&a).unwrap());
        for (i, row) in p.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((v - e).abs() < 1e-14);
            }
        }
        let b: Mat2<f64> = [[1.1, 0.2], [-0.3, 0.9]];
        let q = matmul(&b, &inv2(&b).unwrap());
        assert!((q[0][0] - 1.0).abs() < 1e-15 && q[0][1].abs() < 1e-15);
    }

    #[test]
    fn singular_inverse_is_domain_error() {
        let a: Mat2<f64> = [[1.0, 2.0], [2.0, 4.0]];
        assert!(matches!(inv2(&a), Err(AdError::Domain { primitive: "inv2", .. })));
    }

    #[test]
    fn det3_of_embedded_plane_tensor() {
        let a: Mat2<f64> = [[1.1, 0.2], [0.05, 0.95]];
        assert!((det3(&embed_plane(&a, 1.0)) - det2(&a)).abs() < 1e-15);
    }
}
