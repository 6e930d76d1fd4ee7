use crate::error::{Error, Result};
use crate::group::point::Point;

/// Maximum allowed deviation of `Q'Q` from the identity for orthonormal
/// payloads.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// A dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_rows(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n, "matrix data must be n*n");
        Matrix { n, data }
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Matrix { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Matrix::from_rows(n, vec![0.0; n * n]);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let n = self.n;
        let mut out = Matrix::from_rows(n, vec![0.0; n * n]);
        for i in 0..n {
            for j in 0..n {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n);
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    /// `max_ij |Q'Q - I|`, the orthonormality defect.
    pub fn orthonormality_defect(&self) -> f64 {
        let qtq = self.transpose().matmul(self);
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in 0..self.n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((qtq.get(i, j) - target).abs());
            }
        }
        worst
    }
}

/// A concrete group transformation.
///
/// Permutations use the destination convention: the payload `p` maps slot
/// `i` of the input to slot `p[i]` of the output.
#[derive(Debug, Clone, PartialEq)]
pub enum GroupElement {
    Permutation(Vec<usize>),
    Signs(Vec<i8>),
    Orthonormal(Matrix),
    Product(Vec<GroupElement>),
}

impl GroupElement {
    /// A permutation from 1-indexed rank encoding: ranks `r` place the
    /// `r[i]`-th element of the (sorted) representative at output slot `i`.
    pub fn permutation_from_ranks(ranks: &[usize]) -> Result<GroupElement> {
        let n = ranks.len();
        let mut dest = vec![usize::MAX; n];
        for (i, &r) in ranks.iter().enumerate() {
            if r == 0 || r > n || dest[r - 1] != usize::MAX {
                return Err(Error::InvalidParameter(format!(
                    "ranks must be a 1-indexed bijection on 1..={n}"
                )));
            }
            dest[r - 1] = i;
        }
        Ok(GroupElement::Permutation(dest))
    }

    /// An orthonormal element, validated against [`ORTHONORMAL_TOL`].
    pub fn orthonormal(m: Matrix) -> Result<GroupElement> {
        let defect = m.orthonormality_defect();
        if defect > ORTHONORMAL_TOL {
            return Err(Error::InvalidParameter(format!(
                "matrix is not orthonormal: |Q'Q - I| = {defect:e}"
            )));
        }
        Ok(GroupElement::Orthonormal(m))
    }

    /// The 1-indexed rank encoding of a permutation (inverse map of
    /// [`permutation_from_ranks`]).
    pub fn to_ranks(&self) -> Option<Vec<usize>> {
        match self {
            GroupElement::Permutation(p) => {
                let mut ranks = vec![0; p.len()];
                for (src, &dst) in p.iter().enumerate() {
                    ranks[dst] = src + 1;
                }
                Some(ranks)
            }
            _ => None,
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            GroupElement::Permutation(p) => p.len(),
            GroupElement::Signs(s) => s.len(),
            GroupElement::Orthonormal(m) => m.n(),
            GroupElement::Product(parts) => parts.iter().map(|g| g.dimension()).sum(),
        }
    }

    pub fn is_identity(&self) -> bool {
        match self {
            GroupElement::Permutation(p) => p.iter().enumerate().all(|(i, &pi)| pi == i),
            GroupElement::Signs(s) => s.iter().all(|&x| x == 1),
            GroupElement::Orthonormal(m) => {
                let n = m.n();
                (0..n).all(|i| {
                    (0..n).all(|j| {
                        let target = if i == j { 1.0 } else { 0.0 };
                        (m.get(i, j) - target).abs() <= ORTHONORMAL_TOL
                    })
                })
            }
            GroupElement::Product(parts) => parts.iter().all(|g| g.is_identity()),
        }
    }

    /// Group composition `self . other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &GroupElement) -> Result<GroupElement> {
        match (self, other) {
            (GroupElement::Permutation(g), GroupElement::Permutation(h)) => {
                if g.len() != h.len() {
                    return Err(Error::GroupMismatch(format!(
                        "permutations of {} and {} slots",
                        g.len(),
                        h.len()
                    )));
                }
                // act(g.h, y)[g[h[i]]] = y[i]
                Ok(GroupElement::Permutation(
                    h.iter().map(|&hi| g[hi]).collect(),
                ))
            }
            (GroupElement::Signs(a), GroupElement::Signs(b)) => {
                if a.len() != b.len() {
                    return Err(Error::GroupMismatch(format!(
                        "sign vectors of length {} and {}",
                        a.len(),
                        b.len()
                    )));
                }
                Ok(GroupElement::Signs(
                    a.iter().zip(b).map(|(x, y)| x * y).collect(),
                ))
            }
            (GroupElement::Orthonormal(a), GroupElement::Orthonormal(b)) => {
                if a.n() != b.n() {
                    return Err(Error::GroupMismatch(format!(
                        "matrices of size {} and {}",
                        a.n(),
                        b.n()
                    )));
                }
                Ok(GroupElement::Orthonormal(a.matmul(b)))
            }
            (GroupElement::Product(a), GroupElement::Product(b)) => {
                if a.len() != b.len() {
                    return Err(Error::GroupMismatch(format!(
                        "products with {} and {} factors",
                        a.len(),
                        b.len()
                    )));
                }
                let parts = a
                    .iter()
                    .zip(b)
                    .map(|(x, y)| x.compose(y))
                    .collect::<Result<Vec<_>>>()?;
                Ok(GroupElement::Product(parts))
            }
            (g, h) => Err(Error::GroupMismatch(format!(
                "cannot compose {} with {}",
                g.kind(),
                h.kind()
            ))),
        }
    }

    pub fn inverse(&self) -> GroupElement {
        match self {
            GroupElement::Permutation(p) => {
                let mut inv = vec![0; p.len()];
                for (i, &pi) in p.iter().enumerate() {
                    inv[pi] = i;
                }
                GroupElement::Permutation(inv)
            }
            GroupElement::Signs(s) => GroupElement::Signs(s.clone()),
            GroupElement::Orthonormal(m) => GroupElement::Orthonormal(m.transpose()),
            GroupElement::Product(parts) => {
                GroupElement::Product(parts.iter().map(|g| g.inverse()).collect())
            }
        }
    }

    /// Apply the group action to a point.
    pub fn act(&self, y: &Point) -> Result<Point> {
        if self.dimension() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                found: y.len(),
            });
        }
        match self {
            GroupElement::Permutation(p) => Ok(match y {
                Point::Reals(v) => {
                    let mut out = vec![0.0; v.len()];
                    for (i, &x) in v.iter().enumerate() {
                        out[p[i]] = x;
                    }
                    Point::Reals(out)
                }
                Point::Tokens(v) => {
                    let mut out = vec![0; v.len()];
                    for (i, &x) in v.iter().enumerate() {
                        out[p[i]] = x;
                    }
                    Point::Tokens(out)
                }
            }),
            GroupElement::Signs(s) => match y {
                Point::Reals(v) => Ok(Point::Reals(
                    v.iter()
                        .zip(s)
                        // -0.0 is normalized so flipped zeros stay fixed points.
                        .map(|(&x, &sg)| if x == 0.0 { 0.0 } else { f64::from(sg) * x })
                        .collect(),
                )),
                Point::Tokens(_) => Err(Error::GroupMismatch(
                    "sign flips act on real vectors only".into(),
                )),
            },
            GroupElement::Orthonormal(m) => match y {
                Point::Reals(v) => Ok(Point::Reals(m.matvec(v))),
                Point::Tokens(_) => Err(Error::GroupMismatch(
                    "orthonormal matrices act on real vectors only".into(),
                )),
            },
            GroupElement::Product(parts) => {
                let mut offset = 0;
                match y {
                    Point::Reals(v) => {
                        let mut out = Vec::with_capacity(v.len());
                        for g in parts {
                            let d = g.dimension();
                            let block = Point::Reals(v[offset..offset + d].to_vec());
                            match g.act(&block)? {
                                Point::Reals(b) => out.extend(b),
                                Point::Tokens(_) => unreachable!(),
                            }
                            offset += d;
                        }
                        Ok(Point::Reals(out))
                    }
                    Point::Tokens(v) => {
                        let mut out = Vec::with_capacity(v.len());
                        for g in parts {
                            let d = g.dimension();
                            let block = Point::Tokens(v[offset..offset + d].to_vec());
                            match g.act(&block)? {
                                Point::Tokens(b) => out.extend(b),
                                Point::Reals(_) => unreachable!(),
                            }
                            offset += d;
                        }
                        Ok(Point::Tokens(out))
                    }
                }
            }
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            GroupElement::Permutation(_) => "permutation",
            GroupElement::Signs(_) => "signs",
            GroupElement::Orthonormal(_) => "orthonormal",
            GroupElement::Product(_) => "product",
        }
    }
}
