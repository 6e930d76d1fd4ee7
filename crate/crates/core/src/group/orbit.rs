use rand::Rng;

use crate::error::{Error, Result};
use crate::group::element::GroupElement;
use crate::group::point::{Point, PointKey};
use crate::group::stabilizer::sample_stabilizer_element;
use crate::group::{enumerate_group, GroupSpec, DEFAULT_MAX_CARDINALITY};

/// An orbit: its canonical representative and, for finite actions, the
/// enumerated points.
#[derive(Debug, Clone)]
pub struct Orbit {
    pub representative: Point,
    pub points: Option<Vec<Point>>,
}

impl Orbit {
    /// Enumerate the orbit of `y` under an enumerable group.
    pub fn enumerate(y: &Point, spec: &GroupSpec) -> Result<Orbit> {
        let points = enumerate_orbit(y, spec, DEFAULT_MAX_CARDINALITY)?;
        Ok(Orbit {
            representative: orbit_representative(y, spec)?,
            points: Some(points),
        })
    }

    /// Representative only; points stay unenumerated (continuous actions).
    pub fn representative_only(y: &Point, spec: &GroupSpec) -> Result<Orbit> {
        Ok(Orbit {
            representative: orbit_representative(y, spec)?,
            points: None,
        })
    }

    pub fn points(&self) -> Result<&[Point]> {
        self.points.as_deref().ok_or(Error::MissingEnumeration)
    }
}

/// Canonical point on the orbit of `y`.
///
/// Conventions: ascending sort under permutations, componentwise absolute
/// value under sign flips, `|y|_2 * e_1` under the orthogonal group,
/// blockwise under products, lexicographic minimum of the enumerated orbit
/// for explicit groups. Each is a fixed point of itself, so the selector is
/// idempotent.
pub fn orbit_representative(y: &Point, spec: &GroupSpec) -> Result<Point> {
    check_dim(spec, y)?;
    match spec {
        GroupSpec::Symmetric(_) => Ok(match y {
            Point::Tokens(v) => {
                let mut s = v.clone();
                s.sort_unstable();
                Point::Tokens(s)
            }
            Point::Reals(v) => {
                let mut s = v.clone();
                s.sort_by(|a, b| a.partial_cmp(b).expect("non-NaN coordinates"));
                Point::Reals(s)
            }
        }),
        GroupSpec::SignFlips(_) => match y {
            Point::Reals(v) => Ok(Point::Reals(v.iter().map(|x| x.abs()).collect())),
            Point::Tokens(_) => Err(Error::GroupMismatch(
                "sign flips act on real vectors only".into(),
            )),
        },
        GroupSpec::Orthogonal(d) => match y {
            Point::Reals(v) => {
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                let mut rep = vec![0.0; *d];
                rep[0] = norm;
                Ok(Point::Reals(rep))
            }
            Point::Tokens(_) => Err(Error::GroupMismatch(
                "orthonormal matrices act on real vectors only".into(),
            )),
        },
        GroupSpec::Product(factors) => {
            let mut offset = 0;
            let mut blocks: Vec<Point> = Vec::with_capacity(factors.len());
            for f in factors {
                let d = f.dimension();
                let block = slice_point(y, offset, d);
                blocks.push(orbit_representative(&block, f)?);
                offset += d;
            }
            Ok(concat_points(&blocks))
        }
        GroupSpec::Explicit(_) => {
            let pts = enumerate_orbit(y, spec, DEFAULT_MAX_CARDINALITY)?;
            Ok(pts
                .into_iter()
                .min_by(point_order)
                .expect("orbit contains at least y"))
        }
    }
}

/// Distinct points of the orbit of `y` under an enumerable group.
pub fn enumerate_orbit(y: &Point, spec: &GroupSpec, max_cardinality: u128) -> Result<Vec<Point>> {
    let elements = enumerate_group(spec, max_cardinality)?;
    let mut seen: std::collections::HashSet<PointKey> = std::collections::HashSet::new();
    let mut out = Vec::new();
    for g in &elements {
        let z = g.act(y)?;
        if seen.insert(z.key()) {
            out.push(z);
        }
    }
    Ok(out)
}

/// A (possibly randomized) group element carrying the representative `[y]`
/// to `y`. When several elements qualify (ties, zeros), the result is
/// uniform over the qualifying set, which is the coset
/// `witness * Stab([y])`.
pub fn inversion_kernel<R: Rng + ?Sized>(
    y: &Point,
    spec: &GroupSpec,
    rng: &mut R,
) -> Result<GroupElement> {
    check_dim(spec, y)?;
    if !spec.is_enumerable() {
        return Err(Error::NotEnumerable(
            "inversion kernels are only constructed for enumerable groups".into(),
        ));
    }
    match spec {
        GroupSpec::Symmetric(_) => {
            let rep = orbit_representative(y, spec)?;
            let witness = permutation_witness(&rep, y)?;
            let stab = sample_stabilizer_element(spec, &rep, rng)?;
            witness.compose(&stab)
        }
        GroupSpec::SignFlips(_) => {
            let rep = orbit_representative(y, spec)?;
            let witness = match y {
                Point::Reals(v) => GroupElement::Signs(
                    v.iter()
                        .map(|&x| if x < 0.0 { -1i8 } else { 1i8 })
                        .collect(),
                ),
                Point::Tokens(_) => unreachable!("rep() already rejected tokens"),
            };
            let stab = sample_stabilizer_element(spec, &rep, rng)?;
            witness.compose(&stab)
        }
        GroupSpec::Product(factors) => {
            let mut offset = 0;
            let mut parts = Vec::with_capacity(factors.len());
            for f in factors {
                let d = f.dimension();
                let block = slice_point(y, offset, d);
                parts.push(inversion_kernel(&block, f, rng)?);
                offset += d;
            }
            Ok(GroupElement::Product(parts))
        }
        GroupSpec::Explicit(e) => {
            let rep = orbit_representative(y, spec)?;
            let carriers: Vec<&GroupElement> = e
                .elements
                .iter()
                .filter(|g| {
                    g.act(&rep)
                        .map(|z| z.approx_eq(y, crate::REAL_EQ_TOL))
                        .unwrap_or(false)
                })
                .collect();
            if carriers.is_empty() {
                return Err(Error::InvalidParameter(
                    "no element of the explicit group carries [y] to y".into(),
                ));
            }
            let idx = rng.random_range(0..carriers.len());
            Ok(carriers[idx].clone())
        }
        GroupSpec::Orthogonal(_) => unreachable!("rejected above"),
    }
}

/// Deterministic permutation sending `rep` (sorted) to `y`, assigning tied
/// values in slot order.
#[allow(clippy::needless_range_loop)]
fn permutation_witness(rep: &Point, y: &Point) -> Result<GroupElement> {
    let n = y.len();
    let mut dest = vec![usize::MAX; n];
    let mut used = vec![false; n];
    for i in 0..n {
        // Slot i of rep holds the i-th smallest value; send it to the first
        // unused position of y holding that value.
        let v = match (rep, y) {
            (Point::Tokens(r), Point::Tokens(_)) => r[i] as f64,
            (Point::Reals(r), Point::Reals(_)) => r[i],
            _ => return Err(Error::GroupMismatch("mixed point payloads".into())),
        };
        let mut assigned = false;
        for j in 0..n {
            if used[j] {
                continue;
            }
            let w = y.coord(j);
            let matches = match y {
                Point::Tokens(_) => w == v,
                Point::Reals(_) => (w - v).abs() <= crate::REAL_EQ_TOL,
            };
            if matches {
                dest[i] = j;
                used[j] = true;
                assigned = true;
                break;
            }
        }
        if !assigned {
            return Err(Error::InvalidParameter(
                "point is not a rearrangement of its representative".into(),
            ));
        }
    }
    Ok(GroupElement::Permutation(dest))
}

pub(crate) fn check_dim(spec: &GroupSpec, y: &Point) -> Result<()> {
    if spec.dimension() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: spec.dimension(),
            found: y.len(),
        });
    }
    Ok(())
}

pub(crate) fn slice_point(y: &Point, offset: usize, len: usize) -> Point {
    match y {
        Point::Reals(v) => Point::Reals(v[offset..offset + len].to_vec()),
        Point::Tokens(v) => Point::Tokens(v[offset..offset + len].to_vec()),
    }
}

pub(crate) fn concat_points(blocks: &[Point]) -> Point {
    if blocks.iter().all(|b| matches!(b, Point::Tokens(_))) {
        let mut out = Vec::new();
        for b in blocks {
            if let Point::Tokens(v) = b {
                out.extend_from_slice(v);
            }
        }
        Point::Tokens(out)
    } else {
        let mut out = Vec::new();
        for b in blocks {
            match b {
                Point::Reals(v) => out.extend_from_slice(v),
                Point::Tokens(v) => out.extend(v.iter().map(|&t| t as f64)),
            }
        }
        Point::Reals(out)
    }
}

fn point_order(a: &Point, b: &Point) -> std::cmp::Ordering {
    use std::cmp::Ordering;
    match (a, b) {
        (Point::Tokens(x), Point::Tokens(y)) => x.cmp(y),
        (Point::Reals(x), Point::Reals(y)) => {
            for (u, v) in x.iter().zip(y) {
                match u.partial_cmp(v).expect("non-NaN coordinates") {
                    Ordering::Equal => continue,
                    ord => return ord,
                }
            }
            x.len().cmp(&y.len())
        }
        (Point::Tokens(_), Point::Reals(_)) => Ordering::Less,
        (Point::Reals(_), Point::Tokens(_)) => Ordering::Greater,
    }
}
