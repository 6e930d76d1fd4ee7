// Index loops mirror the usual matrix-notation QR updates.
#![allow(clippy::needless_range_loop)]

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::group::element::{GroupElement, Matrix};
use crate::group::GroupSpec;

/// Draw a Haar-distributed element: uniform over enumerable groups, and the
/// invariant (rotation-uniform) law over the orthogonal group.
///
/// Orthogonal sampling is by QR decomposition of a standard-Gaussian matrix
/// with the R-diagonal sign correction, which makes the factorization unique
/// and the resulting Q exactly Haar.
pub fn haar_sample<R: Rng + ?Sized>(spec: &GroupSpec, rng: &mut R) -> GroupElement {
    match spec {
        GroupSpec::Symmetric(n) => {
            let mut slots: Vec<usize> = (0..*n).collect();
            // Fisher-Yates
            for i in (1..*n).rev() {
                let j = rng.random_range(0..=i);
                slots.swap(i, j);
            }
            GroupElement::Permutation(slots)
        }
        GroupSpec::SignFlips(d) => GroupElement::Signs(
            (0..*d)
                .map(|_| if rng.random_bool(0.5) { 1 } else { -1 })
                .collect(),
        ),
        GroupSpec::Orthogonal(d) => GroupElement::Orthonormal(haar_orthogonal(*d, rng)),
        GroupSpec::Product(factors) => {
            GroupElement::Product(factors.iter().map(|f| haar_sample(f, rng)).collect())
        }
        GroupSpec::Explicit(e) => {
            let idx = rng.random_range(0..e.elements.len());
            e.elements[idx].clone()
        }
    }
}

fn haar_orthogonal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Matrix {
    let mut gauss = Matrix::identity(d);
    for i in 0..d {
        for j in 0..d {
            gauss.set(i, j, StandardNormal.sample(rng));
        }
    }
    let (q, r_diag) = householder_qr(&gauss);
    // Sign correction: Q <- Q diag(sign(r_ii)).
    let mut q = q;
    for j in 0..d {
        if r_diag[j] < 0.0 {
            for i in 0..d {
                q.set(i, j, -q.get(i, j));
            }
        }
    }
    q
}

/// Householder QR. Returns (Q, diag(R)).
fn householder_qr(a: &Matrix) -> (Matrix, Vec<f64>) {
    let n = a.n();
    let mut r = a.clone();
    let mut q = Matrix::identity(n);
    for k in 0..n {
        // Householder vector for column k below the diagonal.
        let mut norm2 = 0.0;
        for i in k..n {
            norm2 += r.get(i, k) * r.get(i, k);
        }
        let norm = norm2.sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if r.get(k, k) >= 0.0 { -norm } else { norm };
        let mut v = vec![0.0; n];
        for i in k..n {
            v[i] = r.get(i, k);
        }
        v[k] -= alpha;
        let vtv: f64 = v.iter().map(|x| x * x).sum();
        if vtv == 0.0 {
            continue;
        }
        // r <- H r with H = I - 2 v v' / (v'v)
        for j in k..n {
            let dot: f64 = (k..n).map(|i| v[i] * r.get(i, j)).sum();
            let scale = 2.0 * dot / vtv;
            for i in k..n {
                r.set(i, j, r.get(i, j) - scale * v[i]);
            }
        }
        // q <- q H (accumulates Q = H_0 H_1 ... )
        for i in 0..n {
            let dot: f64 = (k..n).map(|j| q.get(i, j) * v[j]).sum();
            let scale = 2.0 * dot / vtv;
            for j in k..n {
                q.set(i, j, q.get(i, j) - scale * v[j]);
            }
        }
    }
    let r_diag = (0..n).map(|i| r.get(i, i)).collect();
    (q, r_diag)
}
