//! Schmidt-rank classification across all bipartitions, orthogonal
//! (genuinely) entangled set checks, and local-operator witnesses.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::orbits::MultiIndex;
use crate::states::StateSet;
use crate::tensor::{
    inner_product, numeric_rank, reshape, Bipartition, Complex, StateVector, ZERO,
};
use crate::{Error, Result};

/// Schmidt rank of a state across every unordered bipartition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankProfile {
    ranks: Vec<(Bipartition, usize)>,
}

impl RankProfile {
    pub fn ranks(&self) -> &[(Bipartition, usize)] {
        &self.ranks
    }

    /// Rank across `cut`, in either orientation.
    pub fn get(&self, cut: &Bipartition) -> Option<usize> {
        let flipped = cut.flip();
        self.ranks
            .iter()
            .find(|(c, _)| c == cut || *c == flipped)
            .map(|&(_, r)| r)
    }

    pub fn separable_cuts(&self) -> impl Iterator<Item = &Bipartition> {
        self.ranks.iter().filter(|(_, r)| *r == 1).map(|(c, _)| c)
    }

    pub fn verdict(&self) -> Verdict {
        if self.ranks.iter().all(|&(_, r)| r == 1) {
            Verdict::Product
        } else if self.ranks.iter().all(|&(_, r)| r >= 2) {
            Verdict::GenuinelyEntangled
        } else {
            Verdict::Entangled
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Product,
    Entangled,
    GenuinelyEntangled,
}

pub fn rank_profile(a: &StateVector, tol: f64) -> Result<RankProfile> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let ranks = Bipartition::all(a.n())
        .into_iter()
        .map(|cut| Ok((cut.clone(), numeric_rank(&reshape(a, &cut)?, tol)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(RankProfile { ranks })
}

pub fn classify(a: &StateVector, tol: f64) -> Result<Verdict> {
    Ok(rank_profile(a, tol)?.verdict())
}

/// Outcome of one set-level check, serialized as part of CLI reports.
#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub pass: bool,
    pub worst_residual: f64,
    pub witnesses: Vec<Witness>,
}

/// Evidence attached to a failed (or, for nonlocality, nontrivial) check.
/// States are addressed by their position in the set and by family
/// representative plus row.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    NonOrthogonal {
        states: [usize; 2],
        families: [Vec<usize>; 2],
        overlap: f64,
    },
    ProductState {
        state: usize,
        family: Vec<usize>,
        row: usize,
    },
    NotGenuinelyEntangled {
        state: usize,
        family: Vec<usize>,
        row: usize,
        separable_cuts: Vec<String>,
    },
    NontrivialMeasurement {
        group: Vec<usize>,
        null_dimension: usize,
        /// Real coordinates of a Hermitian operator orthogonal to the
        /// identity that satisfies every orthogonality constraint.
        operator: Vec<f64>,
    },
}

struct Located<'a> {
    state: &'a StateVector,
    family: &'a MultiIndex,
    row: usize,
}

fn locate(set: &StateSet) -> Vec<Located<'_>> {
    set.families
        .iter()
        .flat_map(|f| {
            f.states()
                .iter()
                .enumerate()
                .map(move |(row, state)| Located {
                    state,
                    family: f.representative(),
                    row,
                })
        })
        .collect()
}

/// Pairwise orthogonality plus "no product state".
pub fn verify_oes(set: &StateSet, tol: f64) -> Result<CheckReport> {
    let (mut report, _) = oes_with_profiles(set, tol)?;
    report.check = "oes".into();
    Ok(report)
}

/// [`verify_oes`] plus genuine entanglement of every state.
pub fn verify_oges(set: &StateSet, tol: f64) -> Result<CheckReport> {
    let (mut report, profiles) = oes_with_profiles(set, tol)?;
    report.check = "oges".into();
    for (k, (loc, profile)) in locate(set).iter().zip(&profiles).enumerate() {
        if profile.verdict() == Verdict::Entangled {
            report.pass = false;
            report.witnesses.push(Witness::NotGenuinelyEntangled {
                state: k,
                family: loc.family.0.clone(),
                row: loc.row,
                separable_cuts: profile.separable_cuts().map(ToString::to_string).collect(),
            });
        }
    }
    Ok(report)
}

fn oes_with_profiles(set: &StateSet, tol: f64) -> Result<(CheckReport, Vec<RankProfile>)> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let located = locate(set);
    let overlaps: Vec<Vec<(usize, f64)>> = (0..located.len())
        .into_par_iter()
        .map(|i| {
            (i + 1..located.len())
                .map(|j| {
                    let (a, b) = (located[i].state, located[j].state);
                    Ok((j, inner_product(a, b)?.norm() / (a.norm() * b.norm())))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let profiles = located
        .par_iter()
        .map(|loc| rank_profile(loc.state, tol))
        .collect::<Result<Vec<_>>>()?;

    let mut worst = 0.0f64;
    let mut witnesses = Vec::new();
    for (i, row) in overlaps.iter().enumerate() {
        for &(j, r) in row {
            worst = worst.max(r);
            if r >= tol {
                witnesses.push(Witness::NonOrthogonal {
                    states: [i, j],
                    families: [located[i].family.0.clone(), located[j].family.0.clone()],
                    overlap: r,
                });
            }
        }
    }
    for (k, (loc, profile)) in located.iter().zip(&profiles).enumerate() {
        if profile.verdict() == Verdict::Product {
            witnesses.push(Witness::ProductState {
                state: k,
                family: loc.family.0.clone(),
                row: loc.row,
            });
        }
    }
    let report = CheckReport {
        check: String::new(),
        pass: witnesses.is_empty(),
        worst_residual: worst,
        witnesses,
    };
    Ok((report, profiles))
}

/// A product operator `P_1 ⊗ ... ⊗ P_N` of `d x d` matrices.
#[derive(Clone, Debug)]
pub struct LocalOperator {
    factors: Vec<DMatrix<Complex>>,
}

impl LocalOperator {
    pub fn new(d: usize, factors: Vec<DMatrix<Complex>>) -> Result<Self> {
        if let Some(f) = factors.iter().find(|f| f.shape() != (d, d)) {
            return Err(Error::Shape(format!(
                "local factor is {:?}, expected ({d}, {d})",
                f.shape()
            )));
        }
        Ok(LocalOperator { factors })
    }

    pub fn identity(d: usize, n: usize) -> Self {
        LocalOperator {
            factors: vec![DMatrix::identity(d, d); n],
        }
    }

    pub fn factors(&self) -> &[DMatrix<Complex>] {
        &self.factors
    }
}

/// `(P_1 ⊗ ... ⊗ P_N) |a>`, applied one party at a time on the sparse support.
pub fn apply_local(a: &StateVector, op: &LocalOperator) -> Result<StateVector> {
    let d = a.d();
    if op.factors.len() != a.n() || op.factors.iter().any(|f| f.nrows() != d) {
        return Err(Error::Shape(format!(
            "operator has {} factors for a {}-party state of local dimension {d}",
            op.factors.len(),
            a.n()
        )));
    }
    let mut current: BTreeMap<MultiIndex, Complex> = a.terms().clone();
    for (party, p) in op.factors.iter().enumerate() {
        let mut next: BTreeMap<MultiIndex, Complex> = BTreeMap::new();
        for (idx, amp) in &current {
            let i = idx.0[party];
            for o in 0..d {
                let m = p[(o, i)];
                if m != ZERO {
                    let mut out = idx.clone();
                    out.0[party] = o;
                    *next.entry(out).or_insert(ZERO) += m * amp;
                }
            }
        }
        next.retain(|_, z| *z != ZERO);
        current = next;
    }
    if current.is_empty() {
        return Err(Error::DegenerateOperator);
    }
    StateVector::new(d, a.n(), current)
}

/// Whether `a = c b` for some nonzero scalar `c`, with relative residual at
/// most `tol`.
pub fn equal_up_to_phase(a: &StateVector, b: &StateVector, tol: f64) -> bool {
    let Ok(ba) = inner_product(b, a) else {
        return false;
    };
    let c = ba / b.norm_sqr();
    if c.norm() == 0.0 {
        return false;
    }
    let mut residual = 0.0;
    for (k, x) in a.terms() {
        residual += (x - c * b.amplitude(k)).norm_sqr();
    }
    for (k, y) in b.terms() {
        if !a.terms().contains_key(k) {
            residual += (c * y).norm_sqr();
        }
    }
    residual.sqrt() <= tol * a.norm()
}
