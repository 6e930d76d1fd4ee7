use rand::Rng;

use crate::error::{Error, Result};
use crate::group::element::GroupElement;
use crate::group::orbit::check_dim;
use crate::group::point::Point;
use crate::group::{ExplicitGroup, GroupSpec, DEFAULT_MAX_CARDINALITY};
use crate::REAL_EQ_TOL;

/// One coordinate of a possibly partially-observed point.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Slot {
    Tok(i64),
    Real(f64),
    /// Not yet observed; a stabilizer element may do anything here that is
    /// consistent with fixing the observed coordinates.
    Free,
}

impl Slot {
    fn same_value(self, other: Slot) -> bool {
        match (self, other) {
            (Slot::Tok(a), Slot::Tok(b)) => a == b,
            (Slot::Real(a), Slot::Real(b)) => (a - b).abs() <= REAL_EQ_TOL,
            _ => false,
        }
    }
}

/// The subgroup `{g : act(g, y) = y}` as an explicit element list.
///
/// Membership on real points uses a componentwise tolerance of `1e-12`.
pub fn stabilizer(spec: &GroupSpec, y: &Point) -> Result<GroupSpec> {
    check_dim(spec, y)?;
    let slots = observed_slots(y);
    let elements = stabilizer_slots(spec, &slots)?;
    Ok(GroupSpec::Explicit(ExplicitGroup {
        elements,
        dim: spec.dimension(),
    }))
}

/// The subgroup of elements that fix an observed prefix, leaving the
/// remaining (not yet observed) coordinates unconstrained.
///
/// This is the group `K_n` that governs the conditional distribution of the
/// data given its orbit and the past: for exchangeability with distinct
/// values it collapses to the identity, for within-batch exchangeability it
/// is the symmetric group on the newest batch.
pub fn prefix_stabilizer(spec: &GroupSpec, prefix: &Point) -> Result<GroupSpec> {
    let dim = spec.dimension();
    if prefix.len() > dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: prefix.len(),
        });
    }
    let mut slots = observed_slots(prefix);
    slots.resize(dim, Slot::Free);
    let elements = stabilizer_slots(spec, &slots)?;
    Ok(GroupSpec::Explicit(ExplicitGroup { elements, dim }))
}

fn observed_slots(y: &Point) -> Vec<Slot> {
    match y {
        Point::Tokens(v) => v.iter().map(|&t| Slot::Tok(t)).collect(),
        Point::Reals(v) => v.iter().map(|&x| Slot::Real(x)).collect(),
    }
}

fn stabilizer_slots(spec: &GroupSpec, slots: &[Slot]) -> Result<Vec<GroupElement>> {
    match spec {
        GroupSpec::Symmetric(n) => {
            let classes = tie_classes(slots, *n);
            let count: u128 = classes
                .iter()
                .map(|c| crate::group::factorial(c.len()))
                .product();
            if count > DEFAULT_MAX_CARDINALITY {
                return Err(Error::CapacityExceeded {
                    cardinality: count,
                    limit: DEFAULT_MAX_CARDINALITY,
                });
            }
            let mut out = vec![(0..*n).collect::<Vec<usize>>()];
            for class in &classes {
                if class.len() < 2 {
                    continue;
                }
                let perms = index_permutations(class);
                let mut next = Vec::with_capacity(out.len() * perms.len());
                for base in &out {
                    for assignment in &perms {
                        let mut dest = base.clone();
                        for (a, &slot) in class.iter().enumerate() {
                            dest[slot] = assignment[a];
                        }
                        next.push(dest);
                    }
                }
                out = next;
            }
            Ok(out.into_iter().map(GroupElement::Permutation).collect())
        }
        GroupSpec::SignFlips(d) => {
            let mut flippable = Vec::new();
            for (i, s) in slots.iter().enumerate() {
                match s {
                    Slot::Real(x) if x.abs() <= REAL_EQ_TOL => flippable.push(i),
                    Slot::Free => flippable.push(i),
                    Slot::Real(_) => {}
                    Slot::Tok(_) => {
                        return Err(Error::GroupMismatch(
                            "sign flips act on real vectors only".into(),
                        ))
                    }
                }
            }
            let count = 1u128 << flippable.len().min(127);
            if count > DEFAULT_MAX_CARDINALITY {
                return Err(Error::CapacityExceeded {
                    cardinality: count,
                    limit: DEFAULT_MAX_CARDINALITY,
                });
            }
            let mut out = Vec::with_capacity(1 << flippable.len());
            for mask in 0u64..(1u64 << flippable.len()) {
                let mut signs = vec![1i8; *d];
                for (b, &i) in flippable.iter().enumerate() {
                    if mask >> b & 1 == 1 {
                        signs[i] = -1;
                    }
                }
                out.push(GroupElement::Signs(signs));
            }
            Ok(out)
        }
        GroupSpec::Product(factors) => {
            let mut per_block: Vec<Vec<GroupElement>> = Vec::with_capacity(factors.len());
            let mut offset = 0;
            for f in factors {
                let d = f.dimension();
                per_block.push(stabilizer_slots(f, &slots[offset..offset + d])?);
                offset += d;
            }
            let count: u128 = per_block.iter().map(|b| b.len() as u128).product();
            if count > DEFAULT_MAX_CARDINALITY {
                return Err(Error::CapacityExceeded {
                    cardinality: count,
                    limit: DEFAULT_MAX_CARDINALITY,
                });
            }
            let mut out: Vec<Vec<GroupElement>> = vec![Vec::new()];
            for block in &per_block {
                let mut next = Vec::with_capacity(out.len() * block.len());
                for partial in &out {
                    for g in block {
                        let mut tuple = partial.clone();
                        tuple.push(g.clone());
                        next.push(tuple);
                    }
                }
                out = next;
            }
            Ok(out.into_iter().map(GroupElement::Product).collect())
        }
        GroupSpec::Explicit(e) => Ok(e
            .elements
            .iter()
            .filter(|g| fixes_slots(g, slots))
            .cloned()
            .collect()),
        GroupSpec::Orthogonal(_) => Err(Error::NotEnumerable(
            "stabilizers of the orthogonal group are not enumerable".into(),
        )),
    }
}

/// Uniform draw from the stabilizer of `y` without enumerating it.
pub(crate) fn sample_stabilizer_element<R: Rng + ?Sized>(
    spec: &GroupSpec,
    y: &Point,
    rng: &mut R,
) -> Result<GroupElement> {
    let slots = observed_slots(y);
    sample_stabilizer_slots(spec, &slots, rng)
}

fn sample_stabilizer_slots<R: Rng + ?Sized>(
    spec: &GroupSpec,
    slots: &[Slot],
    rng: &mut R,
) -> Result<GroupElement> {
    match spec {
        GroupSpec::Symmetric(n) => {
            let classes = tie_classes(slots, *n);
            let mut dest: Vec<usize> = (0..*n).collect();
            for class in &classes {
                // Fisher-Yates on each tie class.
                let mut shuffled = class.clone();
                for i in (1..shuffled.len()).rev() {
                    let j = rng.random_range(0..=i);
                    shuffled.swap(i, j);
                }
                for (a, &slot) in class.iter().enumerate() {
                    dest[slot] = shuffled[a];
                }
            }
            Ok(GroupElement::Permutation(dest))
        }
        GroupSpec::SignFlips(d) => {
            let mut signs = vec![1i8; *d];
            for (i, s) in slots.iter().enumerate() {
                let flippable =
                    matches!(s, Slot::Free) || matches!(s, Slot::Real(x) if x.abs() <= REAL_EQ_TOL);
                if flippable && rng.random_bool(0.5) {
                    signs[i] = -1;
                }
            }
            Ok(GroupElement::Signs(signs))
        }
        GroupSpec::Product(factors) => {
            let mut parts = Vec::with_capacity(factors.len());
            let mut offset = 0;
            for f in factors {
                let d = f.dimension();
                parts.push(sample_stabilizer_slots(f, &slots[offset..offset + d], rng)?);
                offset += d;
            }
            Ok(GroupElement::Product(parts))
        }
        GroupSpec::Explicit(e) => {
            let fixing: Vec<&GroupElement> = e
                .elements
                .iter()
                .filter(|g| fixes_slots(g, slots))
                .collect();
            if fixing.is_empty() {
                return Err(Error::InvalidParameter(
                    "empty stabilizer in explicit group".into(),
                ));
            }
            Ok(fixing[rng.random_range(0..fixing.len())].clone())
        }
        GroupSpec::Orthogonal(_) => Err(Error::NotEnumerable(
            "stabilizers of the orthogonal group are not enumerable".into(),
        )),
    }
}

/// Whether `g` is guaranteed to fix every observed slot, for any values the
/// free slots may take.
fn fixes_slots(g: &GroupElement, slots: &[Slot]) -> bool {
    match g {
        GroupElement::Permutation(p) => {
            for (i, &dest) in p.iter().enumerate() {
                match slots[dest] {
                    Slot::Free => {}
                    observed => {
                        if !slots[i].same_value(observed) {
                            return false;
                        }
                    }
                }
            }
            true
        }
        GroupElement::Signs(s) => slots.iter().zip(s).all(|(slot, &sg)| match slot {
            Slot::Free => true,
            Slot::Real(x) => sg == 1 || x.abs() <= REAL_EQ_TOL,
            Slot::Tok(_) => false,
        }),
        GroupElement::Orthonormal(_) => {
            if slots.iter().any(|s| matches!(s, Slot::Free)) {
                // With unobserved coordinates, only the identity certainly
                // fixes the point.
                g.is_identity()
            } else {
                let v: Vec<f64> = slots
                    .iter()
                    .map(|s| match s {
                        Slot::Real(x) => *x,
                        Slot::Tok(t) => *t as f64,
                        Slot::Free => unreachable!(),
                    })
                    .collect();
                match g.act(&Point::Reals(v.clone())) {
                    Ok(Point::Reals(w)) => {
                        v.iter().zip(&w).all(|(a, b)| (a - b).abs() <= REAL_EQ_TOL)
                    }
                    _ => false,
                }
            }
        }
        GroupElement::Product(parts) => {
            let mut offset = 0;
            for part in parts {
                let d = part.dimension();
                if !fixes_slots(part, &slots[offset..offset + d]) {
                    return false;
                }
                offset += d;
            }
            true
        }
    }
}

/// Slot indices grouped by equal observed value; free slots form one class.
fn tie_classes(slots: &[Slot], n: usize) -> Vec<Vec<usize>> {
    let mut classes: Vec<(Slot, Vec<usize>)> = Vec::new();
    for (i, &s) in slots.iter().enumerate().take(n) {
        if let Some((_, members)) = classes.iter_mut().find(|(rep, _)| match (rep, s) {
            (Slot::Free, Slot::Free) => true,
            (rep, s) => rep.same_value(s),
        }) {
            members.push(i);
        } else {
            classes.push((s, vec![i]));
        }
    }
    classes.into_iter().map(|(_, m)| m).collect()
}

/// All permutations of the given index list, as destination assignments.
fn index_permutations(class: &[usize]) -> Vec<Vec<usize>> {
    fn rec(remaining: &mut Vec<usize>, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if remaining.is_empty() {
            out.push(current.clone());
            return;
        }
        for k in 0..remaining.len() {
            let v = remaining.remove(k);
            current.push(v);
            rec(remaining, current, out);
            current.pop();
            remaining.insert(k, v);
        }
    }
    let mut out = Vec::new();
    rec(&mut class.to_vec(), &mut Vec::new(), &mut out);
    out
}
