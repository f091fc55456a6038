use std::collections::BTreeMap;

use rayon::prelude::*;

use super::MeasurementGroup;
use crate::orbits::MultiIndex;
use crate::states::StateSet;
use crate::tensor::{Complex, HermitianParam, SparseRealMatrix, StateVector, ZERO};
use crate::{Error, Result};

/// Linear conditions on a Hermitian `E` acting on the group's factor, one
/// per ordered pair of distinct states `(psi, phi)`:
/// `<psi| I ⊗ E |phi> = 0`, stored as a real row and an imaginary row over
/// the [`HermitianParam`] coordinates.
#[derive(Clone, Debug)]
pub struct ConstraintSystem {
    pub group: MeasurementGroup,
    /// Dimension of the group's factor, `d^|group|`.
    pub m: usize,
    /// Rows `2k` and `2k + 1` are the real and imaginary parts for `pairs[k]`.
    pub rows: SparseRealMatrix,
    pub pairs: Vec<(usize, usize)>,
}

impl ConstraintSystem {
    /// Number of complex constraints, `|set| (|set| - 1)`.
    pub fn constraint_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn identity_residual(&self) -> f64 {
        let id = HermitianParam::identity(self.m);
        self.rows
            .mul_vec(id.values())
            .into_iter()
            .map(f64::abs)
            .fold(0.0, f64::max)
    }
}

/// Terms of a state keyed by the complement sub-index, each carrying the
/// group sub-index and amplitude.
fn split_terms(
    a: &StateVector,
    group: &[usize],
    rest: &[usize],
    d: usize,
) -> BTreeMap<MultiIndex, Vec<(usize, Complex)>> {
    let mut out: BTreeMap<MultiIndex, Vec<(usize, Complex)>> = BTreeMap::new();
    for (x, &amp) in a.terms() {
        out.entry(x.project(rest))
            .or_default()
            .push((x.project(group).linear(d), amp));
    }
    out
}

fn pair_rows(
    psi: &BTreeMap<MultiIndex, Vec<(usize, Complex)>>,
    phi: &BTreeMap<MultiIndex, Vec<(usize, Complex)>>,
    m: usize,
) -> [Vec<(usize, f64)>; 2] {
    let mut coeff: BTreeMap<(usize, usize), Complex> = BTreeMap::new();
    for (key, left) in psi {
        let Some(right) = phi.get(key) else { continue };
        for &(r, a) in left {
            for &(s, b) in right {
                *coeff.entry((r, s)).or_insert(ZERO) += a.conj() * b;
            }
        }
    }
    let mut re = Vec::new();
    let mut im = Vec::new();
    for ((r, s), c) in coeff {
        if r == s {
            re.push((r, c.re));
            im.push((r, c.im));
        } else if r < s {
            // c (x + iy)
            let k = HermitianParam::offdiag_index(m, r, s);
            re.extend([(k, c.re), (k + 1, -c.im)]);
            im.extend([(k, c.im), (k + 1, c.re)]);
        } else {
            // E[r,s] = conj(E[s,r]) = x - iy
            let k = HermitianParam::offdiag_index(m, s, r);
            re.extend([(k, c.re), (k + 1, c.im)]);
            im.extend([(k, c.im), (k + 1, -c.re)]);
        }
    }
    [re, im]
}

/// Builds the constraint rows for `group` over all ordered pairs of
/// distinct states in `set`.
pub fn assemble_constraints(set: &StateSet, group: &MeasurementGroup) -> Result<ConstraintSystem> {
    if set.is_empty() {
        return Err(Error::Precondition("state set is empty".into()));
    }
    if group.n() != set.n {
        return Err(Error::Shape(format!(
            "group {group} is for {} parties, set has {}",
            group.n(),
            set.n
        )));
    }
    let d = set.d;
    let m = d.pow(group.parties().len() as u32);
    let rest = group.complement();
    let split: Vec<_> = set
        .states()
        .map(|a| split_terms(a, group.parties(), &rest, d))
        .collect();
    let count = split.len();

    let blocks: Vec<Vec<[Vec<(usize, f64)>; 2]>> = (0..count)
        .into_par_iter()
        .map(|i| {
            (0..count)
                .filter(|&j| j != i)
                .map(|j| pair_rows(&split[i], &split[j], m))
                .collect()
        })
        .collect();

    let mut rows = SparseRealMatrix::new(m * m);
    let mut pairs = Vec::with_capacity(count * count.saturating_sub(1));
    for (i, block) in blocks.into_iter().enumerate() {
        let partners = (0..count).filter(|&j| j != i);
        for (j, [re, im]) in partners.zip(block) {
            rows.push_row(re);
            rows.push_row(im);
            pairs.push((i, j));
        }
    }
    Ok(ConstraintSystem {
        group: group.clone(),
        m,
        rows,
        pairs,
    })
}
