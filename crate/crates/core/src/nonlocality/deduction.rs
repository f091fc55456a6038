//! Symbolic proof that every orthogonality-preserving `E` is proportional to
//! the identity, by two inference rules over the entries of `E`.
//!
//! The measuring group is everything except one cut party. Each product
//! basis element splits into a head (the cut party's digit) and a tail (the
//! remaining digits, ascending by party), and tails label the rows and
//! columns of `E`.
//!
//! - Zero rule: for two families with disjoint supports and invertible
//!   coefficient matrices, every pair of elements with equal heads forces
//!   the entry at their tails to vanish.
//! - Trivial rule: if some column of a family is nonzero in every row and
//!   its tail is already known to be orthogonal (zero entry) to every other
//!   tail of the family, then entries between equal-head tails vanish and
//!   all diagonal entries on the family's tails are equal.

use std::collections::BTreeSet;

use petgraph::unionfind::UnionFind;
use serde::Serialize;

use super::MeasurementGroup;
use crate::orbits::MultiIndex;
use crate::states::{StateFamily, StateSet};
use crate::{Error, Result};

const COEFF_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Zero,
    Trivial,
}

/// One rule instance and what it contributed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RuleApplication {
    pub rule: Rule,
    pub families: Vec<MultiIndex>,
    pub zeros_added: Vec<(String, String)>,
    pub diagonals_merged: Vec<String>,
}

impl RuleApplication {
    pub fn is_noop(&self) -> bool {
        self.zeros_added.is_empty() && self.diagonals_merged.is_empty()
    }
}

/// Entries of `E` proven zero, diagonal entries proven equal, and the log
/// of rule instances that established them.
#[derive(Clone, Debug)]
pub struct DeductionState {
    d: usize,
    n: usize,
    cut: usize,
    labels: usize,
    zeros: BTreeSet<(usize, usize)>,
    classes: UnionFind<usize>,
    class_count: usize,
    log: Vec<RuleApplication>,
}

impl DeductionState {
    /// Empty knowledge for the group that leaves out party `cut` (0-based).
    pub fn new(d: usize, n: usize, cut: usize) -> Result<Self> {
        if d < 2 || n < 2 || cut >= n {
            return Err(Error::Domain(format!(
                "invalid deduction setting d={d}, N={n}, cut party {}",
                cut + 1
            )));
        }
        let labels = d.pow(n as u32 - 1);
        Ok(DeductionState {
            d,
            n,
            cut,
            labels,
            zeros: BTreeSet::new(),
            classes: UnionFind::new(labels),
            class_count: labels,
            log: Vec::new(),
        })
    }

    pub fn for_group(d: usize, group: &MeasurementGroup) -> Result<Self> {
        let cut = group.cut_party().ok_or_else(|| {
            Error::Precondition(format!("group {group} must leave out exactly one party"))
        })?;
        Self::new(d, group.n(), cut)
    }

    pub fn cut_party(&self) -> usize {
        self.cut
    }

    /// Number of tails, `d^(N-1)`.
    pub fn label_count(&self) -> usize {
        self.labels
    }

    /// Tail digits as a string, e.g. `"011"`.
    pub fn label(&self, tail: usize) -> String {
        let digits = MultiIndex::from_linear(tail, self.d, self.n - 1);
        let parts: Vec<String> = digits.entries().iter().map(ToString::to_string).collect();
        parts.join(if self.d > 10 { "," } else { "" })
    }

    /// `(head, tail)` of a basis element.
    pub fn split(&self, x: &MultiIndex) -> (usize, usize) {
        let rest: Vec<usize> = (0..self.n).filter(|&p| p != self.cut).collect();
        (x.entries()[self.cut], x.project(&rest).linear(self.d))
    }

    pub fn is_zero(&self, r: usize, s: usize) -> bool {
        self.zeros.contains(&(r.min(s), r.max(s)))
    }

    pub fn same_class(&self, r: usize, s: usize) -> bool {
        self.classes.equiv(r, s)
    }

    pub fn zeros(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.zeros.iter().copied()
    }

    pub fn zero_count(&self) -> usize {
        self.zeros.len()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn log(&self) -> &[RuleApplication] {
        &self.log
    }

    /// Diagonal classes with more than one member, each sorted, as labels.
    pub fn diagonal_classes(&self) -> Vec<Vec<String>> {
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for k in 0..self.labels {
            groups.entry(self.classes.find(k)).or_default().push(k);
        }
        let mut out: Vec<Vec<usize>> = groups.into_values().filter(|g| g.len() > 1).collect();
        out.sort();
        out.into_iter()
            .map(|g| g.into_iter().map(|k| self.label(k)).collect())
            .collect()
    }

    /// All off-diagonal entries zero and all diagonal entries equal.
    pub fn is_complete(&self) -> bool {
        self.zeros.len() == self.labels * (self.labels - 1) / 2 && self.class_count == 1
    }

    fn add_zero(&mut self, r: usize, s: usize, added: &mut Vec<(String, String)>) {
        debug_assert_ne!(r, s);
        let key = (r.min(s), r.max(s));
        if self.zeros.insert(key) {
            added.push((self.label(key.0), self.label(key.1)));
        }
    }

    /// Applies the zero rule to two families and logs the instance if it
    /// added anything.
    pub fn apply_zero(&mut self, a: &StateFamily, b: &StateFamily) -> Result<RuleApplication> {
        if a.shares_support_with(b) {
            return Err(Error::Precondition(format!(
                "families {} and {} share a basis element",
                a.representative(),
                b.representative()
            )));
        }
        for f in [a, b] {
            if !f.coeffs().is_square() || !f.coeffs().is_full_rank(COEFF_TOL) {
                return Err(Error::Precondition(format!(
                    "coefficient matrix of family {} is not square and full-rank",
                    f.representative()
                )));
            }
        }
        let left: Vec<(usize, usize)> = a.support().iter().map(|x| self.split(x)).collect();
        let right: Vec<(usize, usize)> = b.support().iter().map(|x| self.split(x)).collect();
        let mut added = Vec::new();
        for &(p, r) in &left {
            for &(q, s) in &right {
                if p == q {
                    self.add_zero(r, s, &mut added);
                }
            }
        }
        let app = RuleApplication {
            rule: Rule::Zero,
            families: vec![a.representative().clone(), b.representative().clone()],
            zeros_added: added,
            diagonals_merged: Vec::new(),
        };
        if !app.is_noop() {
            self.log.push(app.clone());
        }
        Ok(app)
    }

    /// Column whose tail already has zero entries against every other tail
    /// of the family and whose coefficients are all nonzero.
    fn trivial_anchor(&self, fam: &StateFamily, parts: &[(usize, usize)]) -> Option<usize> {
        let c = fam.coeffs();
        if !c.is_square() || c.row_orthogonality_residual() > COEFF_TOL {
            return None;
        }
        let scale = c.0.iter().map(|z| z.norm()).fold(0.0, f64::max);
        (0..c.ncols()).find(|&t| {
            let column_nonzero = (0..c.nrows()).all(|s| c.get(s, t).norm() > COEFF_TOL * scale);
            let (_, rt) = parts[t];
            // Equal tails under different heads are orthogonal through the head.
            let isolated = parts
                .iter()
                .enumerate()
                .all(|(j, &(_, rj))| j == t || rj == rt || self.is_zero(rt, rj));
            column_nonzero && isolated
        })
    }

    /// Applies the trivial rule to a family; returns a no-op application
    /// when no anchor column qualifies. Only effective applications are
    /// logged.
    pub fn apply_trivial(&mut self, fam: &StateFamily) -> RuleApplication {
        let parts: Vec<(usize, usize)> = fam.support().iter().map(|x| self.split(x)).collect();
        let mut app = RuleApplication {
            rule: Rule::Trivial,
            families: vec![fam.representative().clone()],
            zeros_added: Vec::new(),
            diagonals_merged: Vec::new(),
        };
        if self.trivial_anchor(fam, &parts).is_none() {
            return app;
        }
        let mut added = Vec::new();
        for (i, &(pi, ri)) in parts.iter().enumerate() {
            for &(pj, rj) in &parts[i + 1..] {
                if pi == pj {
                    self.add_zero(ri, rj, &mut added);
                }
            }
        }
        let mut merged = false;
        for &(_, r) in &parts[1..] {
            if self.classes.union(parts[0].1, r) {
                self.class_count -= 1;
                merged = true;
            }
        }
        app.zeros_added = added;
        if merged {
            let tails: BTreeSet<usize> = parts.iter().map(|&(_, r)| r).collect();
            app.diagonals_merged = tails.into_iter().map(|r| self.label(r)).collect();
        }
        if !app.is_noop() {
            self.log.push(app.clone());
        }
        app
    }
}

/// Zero rule on `(fam_a, fam_b)`, consuming and returning the state.
pub fn lemma_zero_apply(
    fam_a: &StateFamily,
    fam_b: &StateFamily,
    mut state: DeductionState,
) -> Result<DeductionState> {
    state.apply_zero(fam_a, fam_b)?;
    Ok(state)
}

/// Trivial rule on `fam`. An unmet precondition leaves the knowledge
/// unchanged and records an empty entry in the log.
pub fn lemma_trivial_apply(fam: &StateFamily, mut state: DeductionState) -> DeductionState {
    let app = state.apply_trivial(fam);
    if app.is_noop() {
        state.log.push(app);
    }
    state
}

#[derive(Clone, Debug)]
pub enum DeductionOutcome {
    Proved(DeductionState),
    Stuck(DeductionState),
}

impl DeductionOutcome {
    pub fn is_proved(&self) -> bool {
        matches!(self, DeductionOutcome::Proved(_))
    }

    pub fn state(&self) -> &DeductionState {
        match self {
            DeductionOutcome::Proved(s) | DeductionOutcome::Stuck(s) => s,
        }
    }

    pub fn proof_log(&self) -> ProofLog<'_> {
        let s = self.state();
        ProofLog {
            cut_party: s.cut + 1,
            status: if self.is_proved() { "proved" } else { "stuck" },
            labels: s.labels,
            zeros: s.zeros.len(),
            off_diagonal_total: s.labels * (s.labels - 1) / 2,
            diagonal_classes: s.class_count,
            steps: &s.log,
        }
    }
}

/// Serializable summary plus the ordered rule log.
#[derive(Debug, Serialize)]
pub struct ProofLog<'a> {
    pub cut_party: usize,
    pub status: &'static str,
    pub labels: usize,
    pub zeros: usize,
    pub off_diagonal_total: usize,
    pub diagonal_classes: usize,
    pub steps: &'a [RuleApplication],
}

/// Runs both rules to a fixpoint: each round applies the zero rule to every
/// eligible family pair, then the trivial rule to every family, with
/// families in ascending representative order.
pub fn deduce_fixpoint(set: &StateSet, group: &MeasurementGroup) -> Result<DeductionOutcome> {
    if group.n() != set.n {
        return Err(Error::Shape(format!(
            "group {group} is for {} parties, set has {}",
            group.n(),
            set.n
        )));
    }
    let mut state = DeductionState::for_group(set.d, group)?;
    let mut order: Vec<&StateFamily> = set.families.iter().collect();
    order.sort_by(|a, b| a.representative().cmp(b.representative()));
    let invertible: Vec<bool> = order
        .iter()
        .map(|f| f.coeffs().is_square() && f.coeffs().is_full_rank(COEFF_TOL))
        .collect();

    loop {
        let mut changed = false;
        for i in 0..order.len() {
            for j in i + 1..order.len() {
                if invertible[i] && invertible[j] && !order[i].shares_support_with(order[j]) {
                    changed |= !state.apply_zero(order[i], order[j])?.is_noop();
                }
            }
        }
        for fam in &order {
            changed |= !state.apply_trivial(fam).is_noop();
        }
        if !changed {
            break;
        }
    }
    Ok(if state.is_complete() {
        DeductionOutcome::Proved(state)
    } else {
        DeductionOutcome::Stuck(state)
    })
}
