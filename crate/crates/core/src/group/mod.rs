//! Compact groups, their actions on sample points, and orbit machinery.
//!
//! A [`GroupSpec`] describes one of the supported compact groups together
//! with its action on [`Point`]s:
//!
//! * `Symmetric(n)` — permutations of `n` slots,
//! * `SignFlips(d)` — componentwise sign flips of a real `d`-vector,
//! * `Orthogonal(d)` — `d x d` orthonormal matrices (not enumerable),
//! * `Product(..)` — factor groups acting blockwise on a concatenation,
//! * `Explicit(..)` — a finite element list, e.g. a stabilizer subgroup.
//!
//! The permutation index convention, used everywhere in this crate: a
//! permutation `p` maps slot `i` of the input to slot `p[i]` of the output,
//! i.e. `act(p, y)[p[i]] = y[i]`.

mod element;
mod haar;
mod orbit;
mod point;
mod stabilizer;

pub use element::{GroupElement, Matrix};
pub use haar::haar_sample;
pub use orbit::{enumerate_orbit, inversion_kernel, orbit_representative, Orbit};
pub use point::{Point, PointKey};
pub use stabilizer::{prefix_stabilizer, stabilizer};

use crate::error::{Error, Result};

/// Default cap on [`enumerate_group`] output (8!).
pub const DEFAULT_MAX_CARDINALITY: u128 = 40_320;

/// Cardinality of a group: a finite count or infinite (continuous groups).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cardinality {
    Finite(u128),
    Infinite,
}

impl Cardinality {
    pub fn as_finite(self) -> Option<u128> {
        match self {
            Cardinality::Finite(n) => Some(n),
            Cardinality::Infinite => None,
        }
    }
}

/// A finite group given by an explicit element list acting on `dim` slots.
/// The list is expected to be nonempty, duplicate-free, and closed under
/// composition and inverse (stabilizers are constructed that way).
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitGroup {
    pub elements: Vec<GroupElement>,
    pub dim: usize,
}

/// Description of a compact group and its action.
#[derive(Debug, Clone, PartialEq)]
pub enum GroupSpec {
    /// Permutations of `n` slots.
    Symmetric(usize),
    /// Componentwise sign flips of a `d`-vector.
    SignFlips(usize),
    /// `d x d` orthonormal matrices.
    Orthogonal(usize),
    /// Factor groups acting blockwise on concatenated coordinates.
    Product(Vec<GroupSpec>),
    /// A finite list of elements, e.g. a stabilizer subgroup.
    Explicit(ExplicitGroup),
}

impl GroupSpec {
    /// Blockwise product of symmetric groups, one per batch.
    ///
    /// This is the group under which "within-batch exchangeability" is
    /// invariance: batch boundaries are respected and no element moves an
    /// observation across a boundary.
    pub fn within_batch(batch_sizes: &[usize]) -> Result<GroupSpec> {
        if batch_sizes.is_empty() {
            return Err(Error::InvalidParameter(
                "within_batch requires at least one batch".into(),
            ));
        }
        if batch_sizes.contains(&0) {
            return Err(Error::InvalidParameter("batch sizes must be >= 1".into()));
        }
        Ok(GroupSpec::Product(
            batch_sizes
                .iter()
                .map(|&b| GroupSpec::Symmetric(b))
                .collect(),
        ))
    }

    /// Number of coordinates the group acts on.
    pub fn dimension(&self) -> usize {
        match self {
            GroupSpec::Symmetric(n) => *n,
            GroupSpec::SignFlips(d) | GroupSpec::Orthogonal(d) => *d,
            GroupSpec::Product(factors) => factors.iter().map(|f| f.dimension()).sum(),
            GroupSpec::Explicit(e) => e.dim,
        }
    }

    pub fn cardinality(&self) -> Cardinality {
        match self {
            GroupSpec::Symmetric(n) => Cardinality::Finite(factorial(*n)),
            GroupSpec::SignFlips(d) => {
                Cardinality::Finite(1u128.checked_shl(*d as u32).unwrap_or(u128::MAX))
            }
            GroupSpec::Orthogonal(_) => Cardinality::Infinite,
            GroupSpec::Product(factors) => {
                let mut total: u128 = 1;
                for f in factors {
                    match f.cardinality() {
                        Cardinality::Finite(c) => total = total.saturating_mul(c),
                        Cardinality::Infinite => return Cardinality::Infinite,
                    }
                }
                Cardinality::Finite(total)
            }
            GroupSpec::Explicit(e) => Cardinality::Finite(e.elements.len() as u128),
        }
    }

    pub fn is_enumerable(&self) -> bool {
        match self {
            GroupSpec::Orthogonal(_) => false,
            GroupSpec::Product(factors) => factors.iter().all(|f| f.is_enumerable()),
            _ => true,
        }
    }

    /// The identity element of this group.
    pub fn identity(&self) -> GroupElement {
        match self {
            GroupSpec::Symmetric(n) => GroupElement::Permutation((0..*n).collect()),
            GroupSpec::SignFlips(d) => GroupElement::Signs(vec![1; *d]),
            GroupSpec::Orthogonal(d) => GroupElement::Orthonormal(Matrix::identity(*d)),
            GroupSpec::Product(factors) => {
                GroupElement::Product(factors.iter().map(|f| f.identity()).collect())
            }
            GroupSpec::Explicit(e) => e
                .elements
                .iter()
                .find(|g| g.is_identity())
                .cloned()
                .unwrap_or_else(|| {
                    // A stabilizer always contains the identity; explicit
                    // groups built elsewhere are expected to as well.
                    e.elements[0].clone()
                }),
        }
    }

    fn kind_name(&self) -> String {
        match self {
            GroupSpec::Symmetric(n) => format!("symmetric({n})"),
            GroupSpec::SignFlips(d) => format!("sign_flips({d})"),
            GroupSpec::Orthogonal(d) => format!("orthogonal({d})"),
            GroupSpec::Product(f) => format!("product of {} factors", f.len()),
            GroupSpec::Explicit(e) => format!("explicit({} elements)", e.elements.len()),
        }
    }
}

pub(crate) fn factorial(n: usize) -> u128 {
    (1..=n as u128)
        .try_fold(1u128, |acc, k| acc.checked_mul(k))
        .unwrap_or(u128::MAX)
}

/// Complete, duplicate-free element list of an enumerable group.
///
/// Fails with a capacity error when the cardinality exceeds `max_cardinality`
/// ([`DEFAULT_MAX_CARDINALITY`] is the usual choice).
pub fn enumerate_group(spec: &GroupSpec, max_cardinality: u128) -> Result<Vec<GroupElement>> {
    if !spec.is_enumerable() {
        return Err(Error::NotEnumerable(spec.kind_name()));
    }
    let card = match spec.cardinality() {
        Cardinality::Finite(c) => c,
        Cardinality::Infinite => return Err(Error::NotEnumerable(spec.kind_name())),
    };
    if card > max_cardinality {
        return Err(Error::CapacityExceeded {
            cardinality: card,
            limit: max_cardinality,
        });
    }
    let out = match spec {
        GroupSpec::Symmetric(n) => permutations(*n)
            .into_iter()
            .map(GroupElement::Permutation)
            .collect(),
        GroupSpec::SignFlips(d) => {
            let mut out = Vec::with_capacity(1 << *d);
            for mask in 0u64..(1u64 << *d) {
                let signs = (0..*d)
                    .map(|i| if mask >> i & 1 == 1 { -1i8 } else { 1i8 })
                    .collect();
                out.push(GroupElement::Signs(signs));
            }
            out
        }
        GroupSpec::Orthogonal(_) => unreachable!(),
        GroupSpec::Product(factors) => {
            let mut out = vec![Vec::new()];
            for f in factors {
                let f_elems = enumerate_group(f, max_cardinality)?;
                let mut next = Vec::with_capacity(out.len() * f_elems.len());
                for partial in &out {
                    for g in &f_elems {
                        let mut tuple: Vec<GroupElement> = partial.clone();
                        tuple.push(g.clone());
                        next.push(tuple);
                    }
                }
                out = next;
            }
            out.into_iter().map(GroupElement::Product).collect()
        }
        GroupSpec::Explicit(e) => e.elements.clone(),
    };
    Ok(out)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..n).collect();
    heap_permutations(&mut current, n, &mut out);
    out
}

fn heap_permutations(current: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k <= 1 {
        out.push(current.clone());
        return;
    }
    for i in 0..k {
        heap_permutations(current, k - 1, out);
        if k.is_multiple_of(2) {
            current.swap(i, k - 1);
        } else {
            current.swap(0, k - 1);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn compose_involution_is_identity() {
        let swap = GroupElement::Permutation(vec![1, 0, 2]);
        let id = swap.compose(&swap).unwrap();
        assert!(id.is_identity());
    }

    #[test]
    fn compose_signs_componentwise() {
        let a = GroupElement::Signs(vec![-1, 1]);
        let b = GroupElement::Signs(vec![-1, -1]);
        assert_eq!(a.compose(&b).unwrap(), GroupElement::Signs(vec![1, -1]));
    }

    #[test]
    fn compose_verified_by_action_on_tokens() {
        // Applying h then g to (a, b, c) must agree with applying g.h.
        let g = GroupElement::Permutation(vec![2, 0, 1]);
        let h = GroupElement::Permutation(vec![1, 2, 0]);
        let y = Point::tokens(vec![10, 20, 30]);
        let via_steps = g.act(&h.act(&y).unwrap()).unwrap();
        let via_compose = g.compose(&h).unwrap().act(&y).unwrap();
        assert_eq!(via_steps, via_compose);
        assert!(g.compose(&h).unwrap().is_identity());
    }

    #[test]
    fn action_follows_destination_convention() {
        // p maps slot i of the input to slot p[i] of the output.
        let p = GroupElement::Permutation(vec![2, 0, 1]);
        let y = Point::tokens(vec![1, 2, 3]);
        assert_eq!(p.act(&y).unwrap(), Point::tokens(vec![2, 3, 1]));
    }

    #[test]
    fn action_law_brute_force_s3() {
        let spec = GroupSpec::Symmetric(3);
        let elements = enumerate_group(&spec, 10).unwrap();
        let y = Point::tokens(vec![7, 8, 9]);
        for g in &elements {
            for h in &elements {
                let lhs = g.compose(h).unwrap().act(&y).unwrap();
                let rhs = g.act(&h.act(&y).unwrap()).unwrap();
                assert_eq!(lhs, rhs);
            }
        }
    }

    #[test]
    fn sign_action_flips_components() {
        let g = GroupElement::Signs(vec![-1, 1]);
        let y = Point::reals(vec![3.0, 4.0]);
        assert_eq!(g.act(&y).unwrap(), Point::reals(vec![-3.0, 4.0]));
    }

    #[test]
    fn identity_action_fixes_random_points() {
        let mut r = rng(7);
        for _ in 0..100 {
            let n = r.random_range(1..8);
            let spec = GroupSpec::Symmetric(n);
            let y = Point::Reals((0..n).map(|_| r.random_range(-5.0..5.0)).collect());
            assert_eq!(spec.identity().act(&y).unwrap(), y);
        }
    }

    #[test]
    fn enumerate_counts() {
        assert_eq!(
            enumerate_group(&GroupSpec::Symmetric(3), 100)
                .unwrap()
                .len(),
            6
        );
        assert_eq!(
            enumerate_group(&GroupSpec::SignFlips(3), 100)
                .unwrap()
                .len(),
            8
        );
        let prod = GroupSpec::Product(vec![GroupSpec::Symmetric(2), GroupSpec::Symmetric(2)]);
        assert_eq!(enumerate_group(&prod, 100).unwrap().len(), 4);
    }

    #[test]
    fn enumerate_respects_capacity() {
        let err = enumerate_group(&GroupSpec::Symmetric(9), DEFAULT_MAX_CARDINALITY);
        assert!(matches!(err, Err(crate::Error::CapacityExceeded { .. })));
        let err = enumerate_group(&GroupSpec::Orthogonal(3), 10);
        assert!(matches!(err, Err(crate::Error::NotEnumerable(_))));
    }

    #[test]
    fn haar_symmetric3_uniform_over_elements() {
        let spec = GroupSpec::Symmetric(3);
        let mut r = rng(42);
        let elements = enumerate_group(&spec, 10).unwrap();
        let mut counts = vec![0usize; elements.len()];
        let draws = 60_000;
        for _ in 0..draws {
            let g = haar_sample(&spec, &mut r);
            let idx = elements.iter().position(|e| *e == g).unwrap();
            counts[idx] += 1;
        }
        for &c in &counts {
            let freq = c as f64 / draws as f64;
            assert!((freq - 1.0 / 6.0).abs() < 0.01, "frequency {freq}");
        }
    }

    #[test]
    fn haar_orthogonal_is_orthonormal() {
        let mut r = rng(3);
        for _ in 0..20 {
            let g = haar_sample(&GroupSpec::Orthogonal(4), &mut r);
            match g {
                GroupElement::Orthonormal(q) => {
                    assert!(q.orthonormality_defect() <= 1e-10);
                }
                _ => panic!("expected a matrix"),
            }
        }
    }

    #[test]
    fn haar_sign_flip_balanced() {
        let spec = GroupSpec::SignFlips(1);
        let mut r = rng(11);
        let draws = 10_000;
        let mut plus = 0usize;
        for _ in 0..draws {
            if haar_sample(&spec, &mut r) == GroupElement::Signs(vec![1]) {
                plus += 1;
            }
        }
        let frac = plus as f64 / draws as f64;
        assert!((frac - 0.5).abs() < 0.01, "fraction {frac}");
    }

    #[test]
    fn representative_sorts_tokens() {
        let spec = GroupSpec::Symmetric(4);
        let y = Point::tokens(vec![7, 3, 1, 4]);
        assert_eq!(
            orbit_representative(&y, &spec).unwrap(),
            Point::tokens(vec![1, 3, 4, 7])
        );
    }

    #[test]
    fn representative_abs_for_sign_flips() {
        let spec = GroupSpec::SignFlips(2);
        let y = Point::reals(vec![-3.0, 4.0]);
        assert_eq!(
            orbit_representative(&y, &spec).unwrap(),
            Point::reals(vec![3.0, 4.0])
        );
    }

    #[test]
    fn representative_on_axis_for_orthogonal() {
        let spec = GroupSpec::Orthogonal(2);
        let y = Point::reals(vec![3.0, 4.0]);
        let rep = orbit_representative(&y, &spec).unwrap();
        assert!(rep.approx_eq(&Point::reals(vec![5.0, 0.0]), 1e-12));
    }

    #[test]
    fn inversion_kernel_matches_rank_encoding() {
        // 7314 ranks as 4213 relative to the sorted representative 1347.
        let spec = GroupSpec::Symmetric(4);
        let y = Point::tokens(vec![7, 3, 1, 4]);
        let mut r = rng(0);
        let k = inversion_kernel(&y, &spec, &mut r).unwrap();
        assert_eq!(k.to_ranks().unwrap(), vec![4, 2, 1, 3]);
        let expected = GroupElement::permutation_from_ranks(&[4, 2, 1, 3]).unwrap();
        assert_eq!(k, expected);
        let rep = orbit_representative(&y, &spec).unwrap();
        assert_eq!(k.act(&rep).unwrap(), y);
    }

    #[test]
    fn inversion_kernel_tie_coset_uniform() {
        // gamma([1,1,2]) is uniform on {identity, swap of the first two}.
        let spec = GroupSpec::Symmetric(3);
        let y = Point::tokens(vec![1, 1, 2]);
        let id = GroupElement::Permutation(vec![0, 1, 2]);
        let bac = GroupElement::Permutation(vec![1, 0, 2]);
        let mut r = rng(5);
        let mut saw_id = 0usize;
        let draws = 4000;
        for _ in 0..draws {
            let k = inversion_kernel(&y, &spec, &mut r).unwrap();
            if k == id {
                saw_id += 1;
            } else {
                assert_eq!(k, bac, "kernel outside the qualifying coset");
            }
            assert_eq!(k.act(&orbit_representative(&y, &spec).unwrap()).unwrap(), y);
        }
        let frac = saw_id as f64 / draws as f64;
        assert!((frac - 0.5).abs() < 0.05, "identity fraction {frac}");
    }

    #[test]
    fn inversion_kernel_already_representative() {
        let spec = GroupSpec::SignFlips(2);
        let y = Point::reals(vec![3.0, 4.0]);
        let mut r = rng(2);
        let k = inversion_kernel(&y, &spec, &mut r).unwrap();
        assert_eq!(k, GroupElement::Signs(vec![1, 1]));
    }

    #[test]
    fn stabilizer_of_distinct_prefix_is_trivial() {
        let spec = GroupSpec::Symmetric(4);
        let prefix = Point::tokens(vec![9, 5, 7]);
        let stab = prefix_stabilizer(&spec, &prefix).unwrap();
        match &stab {
            GroupSpec::Explicit(e) => {
                assert_eq!(e.elements.len(), 1);
                assert!(e.elements[0].is_identity());
            }
            _ => panic!("stabilizer must be explicit"),
        }
    }

    #[test]
    fn stabilizer_of_tied_tokens() {
        let spec = GroupSpec::Symmetric(3);
        let y = Point::tokens(vec![1, 1, 2]);
        let stab = stabilizer(&spec, &y).unwrap();
        match &stab {
            GroupSpec::Explicit(e) => assert_eq!(e.elements.len(), 2),
            _ => panic!("stabilizer must be explicit"),
        }
    }

    #[test]
    fn stabilizer_of_zero_coordinate() {
        let spec = GroupSpec::SignFlips(2);
        let y = Point::reals(vec![0.0, 3.0]);
        let stab = stabilizer(&spec, &y).unwrap();
        match &stab {
            GroupSpec::Explicit(e) => {
                assert_eq!(e.elements.len(), 2);
                assert!(e.elements.contains(&GroupElement::Signs(vec![1, 1])));
                assert!(e.elements.contains(&GroupElement::Signs(vec![-1, 1])));
            }
            _ => panic!("stabilizer must be explicit"),
        }
    }

    #[test]
    fn within_batch_group_shapes() {
        let g = GroupSpec::within_batch(&[2, 3]).unwrap();
        assert_eq!(g.cardinality(), Cardinality::Finite(12));
        let trivial = GroupSpec::within_batch(&[1]).unwrap();
        assert_eq!(trivial.cardinality(), Cardinality::Finite(1));
        assert!(GroupSpec::within_batch(&[]).is_err());
    }

    #[test]
    fn within_batch_respects_block_boundaries() {
        let g = GroupSpec::within_batch(&[3, 3]).unwrap();
        let elements = enumerate_group(&g, 100).unwrap();
        assert_eq!(elements.len(), 36);
        let y = Point::tokens(vec![10, 11, 12, 20, 21, 22]);
        for e in &elements {
            let z = e.act(&y).unwrap();
            if let Point::Tokens(v) = z {
                let first: Vec<i64> = v[..3].to_vec();
                let second: Vec<i64> = v[3..].to_vec();
                assert!(
                    first.iter().all(|t| *t < 20),
                    "slot crossed a batch boundary"
                );
                assert!(
                    second.iter().all(|t| *t >= 20),
                    "slot crossed a batch boundary"
                );
            }
        }
    }

    #[test]
    fn explicit_group_round_trip() {
        let spec = GroupSpec::Symmetric(3);
        let y = Point::tokens(vec![1, 1, 2]);
        let stab = stabilizer(&spec, &y).unwrap();
        // A stabilizer is a subgroup: closed under composition and inverse,
        // and contains the identity.
        let elements = enumerate_group(&stab, 100).unwrap();
        assert!(elements.iter().any(|g| g.is_identity()));
        for a in &elements {
            assert!(elements.contains(&a.inverse()));
            for b in &elements {
                assert!(elements.contains(&a.compose(b).unwrap()));
            }
        }
    }
}
