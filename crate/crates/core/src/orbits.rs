//! Cyclic-shift orbits on the tuples of `Z_d^N` that contain at least one
//! zero coordinate.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// An `N`-tuple over `Z_d` addressing one computational product-basis
/// vector `|i_1>|i_2>...|i_N>`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    pub fn new(entries: impl Into<Vec<usize>>) -> Self {
        MultiIndex(entries.into())
    }

    pub fn zeros(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entries(&self) -> &[usize] {
        &self.0
    }

    /// Membership in `X_d^N`: some coordinate is zero.
    pub fn has_zero(&self) -> bool {
        self.0.contains(&0)
    }

    pub fn is_valid_for(&self, d: usize, n: usize) -> bool {
        self.0.len() == n && self.0.iter().all(|&i| i < d)
    }

    /// Position of this tuple in the lexicographic enumeration of `Z_d^N`.
    pub fn linear(&self, d: usize) -> usize {
        self.0.iter().fold(0, |acc, &i| acc * d + i)
    }

    pub fn from_linear(mut k: usize, d: usize, n: usize) -> Self {
        let mut entries = vec![0; n];
        for slot in entries.iter_mut().rev() {
            *slot = k % d;
            k /= d;
        }
        MultiIndex(entries)
    }

    /// The sub-tuple on the given parties, in the order given.
    pub fn project(&self, parties: &[usize]) -> MultiIndex {
        MultiIndex(parties.iter().map(|&p| self.0[p]).collect())
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, ")")
    }
}

/// Left rotation `(i_1, i_2, ..., i_N) -> (i_2, ..., i_N, i_1)`.
pub fn cyclic_shift(x: &MultiIndex) -> MultiIndex {
    let mut entries = x.0.clone();
    if !entries.is_empty() {
        entries.rotate_left(1);
    }
    MultiIndex(entries)
}

/// An orbit of the cyclic group `G_N` acting on `X_d^N`.
///
/// `elements[0]` is the representative (lexicographic minimum) and
/// `elements[j] = shift^j(representative)`; this order fixes the phase index
/// `j` of the DFT families built on the orbit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Orbit {
    elements: Vec<MultiIndex>,
}

impl Orbit {
    pub fn representative(&self) -> &MultiIndex {
        &self.elements[0]
    }

    pub fn elements(&self) -> &[MultiIndex] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains(&self, x: &MultiIndex) -> bool {
        self.elements.contains(x)
    }

    /// True for the singleton orbit of the all-zero tuple.
    pub fn is_zero_orbit(&self) -> bool {
        self.elements.len() == 1 && self.elements[0].0.iter().all(|&i| i == 0)
    }
}

/// The orbit of `x`, anchored at its lexicographically smallest element.
pub fn orbit_of(x: &MultiIndex) -> Result<Orbit> {
    if x.is_empty() {
        return Err(Error::Domain("empty tuple".into()));
    }
    if !x.has_zero() {
        return Err(Error::Domain(format!("{x} has no zero coordinate")));
    }
    let mut rotations = Vec::with_capacity(x.len());
    let mut y = x.clone();
    for _ in 0..x.len() {
        rotations.push(y.clone());
        y = cyclic_shift(&y);
    }
    let representative = rotations.iter().min().cloned().expect("nonempty");

    let mut elements = vec![representative.clone()];
    let mut next = cyclic_shift(&representative);
    while next != representative {
        elements.push(next.clone());
        next = cyclic_shift(&next);
    }
    Ok(Orbit { elements })
}

/// Disjoint cover of `X_d^N` by cyclic orbits, sorted by representative.
#[derive(Clone, Debug)]
pub struct OrbitPartition {
    pub d: usize,
    pub n: usize,
    pub orbits: Vec<Orbit>,
}

impl OrbitPartition {
    /// `|X_d^N| = d^N - (d-1)^N`.
    pub fn covered(&self) -> usize {
        self.orbits.iter().map(Orbit::len).sum()
    }

    pub fn find(&self, x: &MultiIndex) -> Option<&Orbit> {
        self.orbits.iter().find(|o| o.contains(x))
    }
}

pub fn partition(d: usize, n: usize) -> Result<OrbitPartition> {
    if d < 2 || n < 2 {
        return Err(Error::Domain(format!(
            "need d >= 2 and N >= 2, got d={d}, N={n}"
        )));
    }
    let total = d
        .checked_pow(n as u32)
        .ok_or_else(|| Error::Domain(format!("d^N overflows for d={d}, N={n}")))?;
    let mut seen = vec![false; total];
    let mut orbits = Vec::new();
    // Lexicographic scan: the first unseen member of an orbit is its minimum.
    for k in 0..total {
        if seen[k] {
            continue;
        }
        let x = MultiIndex::from_linear(k, d, n);
        if !x.has_zero() {
            continue;
        }
        let orbit = orbit_of(&x)?;
        debug_assert_eq!(orbit.representative(), &x);
        for e in orbit.elements() {
            seen[e.linear(d)] = true;
        }
        orbits.push(orbit);
    }
    Ok(OrbitPartition { d, n, orbits })
}

/// `d^N - (d-1)^N`.
pub fn x_size(d: usize, n: usize) -> usize {
    d.pow(n as u32) - (d - 1).pow(n as u32)
}
