//! Strongest-nonlocality checks.
//!
//! A set is checked one measuring group at a time. For a group `G` the
//! orthogonality-preserving Hermitian operators `E` on `G`'s factor form a
//! linear space containing the identity; the group is trivial when that
//! space is exactly `span{I}`. The numerical oracle computes it directly,
//! while [`deduction`] reproduces the hand proof through two inference rules.

mod constraints;
pub mod deduction;

use std::fmt;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

pub use constraints::{assemble_constraints, ConstraintSystem};
pub use deduction::{
    deduce_fixpoint, lemma_trivial_apply, lemma_zero_apply, DeductionOutcome, DeductionState, Rule,
    RuleApplication,
};

use crate::entanglement::{CheckReport, Witness};
use crate::states::StateSet;
use crate::tensor::HermitianParam;
use crate::{Error, Result};

/// The parties that measure jointly; the remaining parties act as identity.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MeasurementGroup {
    n: usize,
    parties: Vec<usize>,
}

impl MeasurementGroup {
    /// `parties` are 0-based; they must form a nonempty proper subset of
    /// `0..n`.
    pub fn new(n: usize, parties: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut parties: Vec<usize> = parties.into_iter().collect();
        parties.sort_unstable();
        parties.dedup();
        if parties.is_empty() || parties.len() >= n {
            return Err(Error::Domain(format!(
                "measuring group must be a nonempty proper subset of {n} parties"
            )));
        }
        if let Some(&p) = parties.iter().find(|&&p| p >= n) {
            return Err(Error::Domain(format!(
                "party {} out of range 1..={n}",
                p + 1
            )));
        }
        Ok(MeasurementGroup { n, parties })
    }

    /// Every party except `excluded`.
    pub fn all_but(n: usize, excluded: usize) -> Result<Self> {
        Self::new(n, (0..n).filter(|&p| p != excluded))
    }

    /// The `n` groups obtained by leaving out one party each.
    pub fn default_groups(n: usize) -> Result<Vec<Self>> {
        (0..n).map(|i| Self::all_but(n, i)).collect()
    }

    /// All `2^n - 2` nonempty proper subsets, by size then lexicographically.
    pub fn all_proper(n: usize) -> Result<Vec<Self>> {
        let mut groups = (1..(1usize << n) - 1)
            .map(|mask| Self::new(n, (0..n).filter(|p| mask >> p & 1 == 1)))
            .collect::<Result<Vec<_>>>()?;
        groups.sort_by(|a, b| (a.parties.len(), &a.parties).cmp(&(b.parties.len(), &b.parties)));
        Ok(groups)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn parties(&self) -> &[usize] {
        &self.parties
    }

    pub fn complement(&self) -> Vec<usize> {
        (0..self.n).filter(|p| !self.parties.contains(p)).collect()
    }

    /// The single non-measuring party, if there is exactly one.
    pub fn cut_party(&self) -> Option<usize> {
        match self.complement().as_slice() {
            [p] => Some(*p),
            _ => None,
        }
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.parties.iter().map(|p| p + 1).collect()
    }
}

impl fmt::Display for MeasurementGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels: Vec<String> = self.parties.iter().map(|p| (p + 1).to_string()).collect();
        write!(f, "{{{}}}", labels.join(","))
    }
}

impl Serialize for MeasurementGroup {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.one_based().serialize(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum GroupVerdict {
    Trivial,
    /// A unit-norm operator orthogonal to the identity (trace zero) that
    /// preserves every pairwise orthogonality.
    Nontrivial {
        witness: HermitianParam,
    },
}

impl GroupVerdict {
    pub fn is_trivial(&self) -> bool {
        matches!(self, GroupVerdict::Trivial)
    }
}

/// Oracle output for one group, with the numbers behind the verdict.
#[derive(Clone, Debug, Serialize)]
pub struct GroupReport {
    pub group: MeasurementGroup,
    #[serde(flatten)]
    pub verdict: GroupVerdict,
    pub null_dimension: usize,
    pub parameters: usize,
    pub rows: usize,
    pub threshold: f64,
    pub smallest_kept: Option<f64>,
    pub largest_discarded: Option<f64>,
    /// `max |A vec(I)|` over constraint rows.
    pub identity_residual: f64,
}

impl Serialize for HermitianParam {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.values().serialize(s)
    }
}

/// Trivial iff the Hermitian solutions of the orthogonality constraints
/// are multiples of the identity.
pub fn triviality_check(
    set: &StateSet,
    group: &MeasurementGroup,
    tol: f64,
) -> Result<GroupVerdict> {
    Ok(check_group(set, group, tol)?.verdict)
}

/// [`triviality_check`] with diagnostics.
pub fn check_group(set: &StateSet, group: &MeasurementGroup, tol: f64) -> Result<GroupReport> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let system = assemble_constraints(set, group)?;
    let ns = system.rows.nullspace(tol)?;
    if let Some(sv) = ns.borderline() {
        return Err(Error::Indeterminate {
            group: group.to_string(),
            singular_value: sv,
            threshold: ns.threshold,
        });
    }
    if ns.dim() == 0 {
        return Err(Error::Precondition(format!(
            "identity violates the constraints for group {group}: the set is not orthogonal"
        )));
    }
    let verdict = if ns.dim() == 1 {
        GroupVerdict::Trivial
    } else {
        GroupVerdict::Nontrivial {
            witness: traceless_witness(system.m, &ns.basis)?,
        }
    };
    Ok(GroupReport {
        group: group.clone(),
        verdict,
        null_dimension: ns.dim(),
        parameters: system.rows.ncols(),
        rows: system.rows.nrows(),
        threshold: ns.threshold,
        smallest_kept: ns.smallest_kept(),
        largest_discarded: ns.largest_discarded(),
        identity_residual: system.identity_residual(),
    })
}

/// The null-space direction furthest from the identity, projected off it.
fn traceless_witness(m: usize, basis: &[DVector<f64>]) -> Result<HermitianParam> {
    let id = DVector::from_vec(HermitianParam::identity(m).values().to_vec()) / (m as f64).sqrt();
    let best = basis
        .iter()
        .map(|v| v - &id * id.dot(v))
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .expect("null space of dimension at least 2");
    HermitianParam::new(m, (&best / best.norm()).iter().copied().collect())
}

/// Checks every default group (each party left out once), or every
/// nonempty proper subset when `exhaustive`.
pub fn verify_strongest(set: &StateSet, tol: f64, exhaustive: bool) -> Result<CheckReport> {
    let reports = strongest_groups(set, tol, exhaustive)?;
    Ok(summarize(&reports))
}

/// Per-group reports in group order.
pub fn strongest_groups(set: &StateSet, tol: f64, exhaustive: bool) -> Result<Vec<GroupReport>> {
    let groups = if exhaustive {
        MeasurementGroup::all_proper(set.n)?
    } else {
        MeasurementGroup::default_groups(set.n)?
    };
    groups
        .par_iter()
        .map(|g| check_group(set, g, tol))
        .collect()
}

pub fn summarize(reports: &[GroupReport]) -> CheckReport {
    let witnesses: Vec<Witness> = reports
        .iter()
        .filter_map(|r| match &r.verdict {
            GroupVerdict::Trivial => None,
            GroupVerdict::Nontrivial { witness } => Some(Witness::NontrivialMeasurement {
                group: r.group.one_based(),
                null_dimension: r.null_dimension,
                operator: witness.values().to_vec(),
            }),
        })
        .collect();
    CheckReport {
        check: "strongest".into(),
        pass: witnesses.is_empty(),
        worst_residual: reports
            .iter()
            .map(|r| r.identity_residual)
            .fold(0.0, f64::max),
        witnesses,
    }
}
