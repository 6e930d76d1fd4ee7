use std::fmt;

/// An observation: a dense real vector or a sequence of discrete tokens.
#[derive(Debug, Clone, PartialEq)]
pub enum Point {
    Reals(Vec<f64>),
    Tokens(Vec<i64>),
}

impl Point {
    pub fn reals(values: impl Into<Vec<f64>>) -> Self {
        Point::Reals(values.into())
    }

    pub fn tokens(values: impl Into<Vec<i64>>) -> Self {
        Point::Tokens(values.into())
    }

    pub fn len(&self) -> usize {
        match self {
            Point::Reals(v) => v.len(),
            Point::Tokens(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coordinate `i` as a real number (tokens are cast).
    pub fn coord(&self, i: usize) -> f64 {
        match self {
            Point::Reals(v) => v[i],
            Point::Tokens(v) => v[i] as f64,
        }
    }

    /// All coordinates as reals.
    pub fn as_reals(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.coord(i)).collect()
    }

    /// Componentwise comparison within `tol` (exact for tokens).
    pub fn approx_eq(&self, other: &Point, tol: f64) -> bool {
        match (self, other) {
            (Point::Tokens(a), Point::Tokens(b)) => a == b,
            (Point::Reals(a), Point::Reals(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
            }
            _ => false,
        }
    }

    /// Prefix of the first `len` coordinates.
    pub fn prefix(&self, len: usize) -> Point {
        match self {
            Point::Reals(v) => Point::Reals(v[..len].to_vec()),
            Point::Tokens(v) => Point::Tokens(v[..len].to_vec()),
        }
    }

    /// Exact hashable key. Real coordinates are keyed by their bit pattern,
    /// so callers should canonicalize (e.g. via the orbit representative)
    /// before using keys across arithmetic paths.
    pub fn key(&self) -> PointKey {
        match self {
            Point::Reals(v) => PointKey::Reals(v.iter().map(|x| x.to_bits()).collect()),
            Point::Tokens(v) => PointKey::Tokens(v.clone()),
        }
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Point::Reals(v) => {
                write!(f, "(")?;
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, ")")
            }
            Point::Tokens(v) => {
                write!(f, "[")?;
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, "]")
            }
        }
    }
}

/// Hashable identity of a point, used for orbit-keyed caches.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PointKey {
    Reals(Vec<u64>),
    Tokens(Vec<i64>),
}
