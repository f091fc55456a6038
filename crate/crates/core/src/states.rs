//! Orthogonal state families built on cyclic orbits and the full sets
//! assembled from them.

use std::f64::consts::TAU;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::orbits::{self, cyclic_shift, MultiIndex, Orbit};
use crate::tensor::{inner_product, numeric_rank, Complex, StateVector, ZERO};
use crate::{Error, Result};

/// Row-orthogonal 4x4 coefficient matrix replacing the DFT on the orbits of
/// `(0,0,i,i)` in the genuinely entangled four-party set.
pub const BTILDE: [[f64; 4]; 4] = [
    [1.0, 1.0, 1.0, 2.0],
    [1.0, -1.0, 2.0, -1.0],
    [5.0, 5.0, -2.0, -4.0],
    [5.0, -5.0, -4.0, 2.0],
];

/// Coefficients of a family: row `s` holds the amplitudes of state `s` on
/// the family's support elements.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientMatrix(pub DMatrix<Complex>);

impl CoefficientMatrix {
    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn get(&self, s: usize, j: usize) -> Complex {
        self.0[(s, j)]
    }

    pub fn is_square(&self) -> bool {
        self.nrows() == self.ncols()
    }

    pub fn all_nonzero(&self) -> bool {
        self.0.iter().all(|z| *z != ZERO)
    }

    /// Largest `|<row_s, row_t>| / (|row_s| |row_t|)` over `s != t`.
    pub fn row_orthogonality_residual(&self) -> f64 {
        let m = &self.0;
        let mut worst = 0.0f64;
        for s in 0..m.nrows() {
            for t in s + 1..m.nrows() {
                let (a, b) = (m.row(s), m.row(t));
                let ip: Complex = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
                worst = worst.max(ip.norm() / (a.norm() * b.norm()));
            }
        }
        worst
    }

    pub fn is_full_rank(&self, tol: f64) -> bool {
        self.is_square() && numeric_rank(&self.0, tol).is_ok_and(|r| r == self.nrows())
    }

    pub fn gram(&self) -> DMatrix<Complex> {
        &self.0 * self.0.adjoint()
    }
}

/// `exp(2 pi i r / k)`, exact when `r / k` is a multiple of a quarter turn.
fn root_of_unity(r: usize, k: usize) -> Complex {
    let r = r % k;
    if (4 * r) % k == 0 {
        match 4 * r / k {
            0 => Complex::new(1.0, 0.0),
            1 => Complex::new(0.0, 1.0),
            2 => Complex::new(-1.0, 0.0),
            _ => Complex::new(0.0, -1.0),
        }
    } else {
        Complex::from_polar(1.0, TAU * r as f64 / k as f64)
    }
}

/// The `k x k` DFT matrix with entries `w_k^{sj}`.
pub fn dft_matrix(k: usize) -> Result<CoefficientMatrix> {
    if k < 1 {
        return Err(Error::Domain("DFT order must be at least 1".into()));
    }
    Ok(CoefficientMatrix(DMatrix::from_fn(k, k, |s, j| {
        root_of_unity(s * j, k)
    })))
}

pub fn btilde_matrix() -> CoefficientMatrix {
    CoefficientMatrix(DMatrix::from_fn(4, 4, |s, j| {
        Complex::new(BTILDE[s][j], 0.0)
    }))
}

/// A group of orthogonal states sharing one support of product-basis
/// elements: `states[s] = sum_j coeffs[s, j] |support[j]>`.
///
/// The support is stored in ascending order; coefficient columns follow it.
#[derive(Clone, Debug, PartialEq)]
pub struct StateFamily {
    representative: MultiIndex,
    support: Vec<MultiIndex>,
    coeffs: CoefficientMatrix,
    states: Vec<StateVector>,
}

impl StateFamily {
    /// `support[j]` labels column `j` of `coeffs`.
    pub fn new(
        d: usize,
        representative: MultiIndex,
        support: Vec<MultiIndex>,
        coeffs: CoefficientMatrix,
    ) -> Result<Self> {
        let n = representative.len();
        if support.is_empty() || coeffs.ncols() != support.len() || coeffs.nrows() == 0 {
            return Err(Error::Shape(format!(
                "coefficient matrix is {}x{} for a support of {}",
                coeffs.nrows(),
                coeffs.ncols(),
                support.len()
            )));
        }
        let mut order: Vec<usize> = (0..support.len()).collect();
        order.sort_by(|&a, &b| support[a].cmp(&support[b]));
        if order.windows(2).any(|w| support[w[0]] == support[w[1]]) {
            return Err(Error::Domain("family support has repeated elements".into()));
        }
        let sorted: Vec<MultiIndex> = order.iter().map(|&j| support[j].clone()).collect();
        let coeffs = CoefficientMatrix(DMatrix::from_fn(coeffs.nrows(), sorted.len(), |s, j| {
            coeffs.get(s, order[j])
        }));
        let states = (0..coeffs.nrows())
            .map(|s| {
                StateVector::new(
                    d,
                    n,
                    sorted
                        .iter()
                        .enumerate()
                        .map(|(j, x)| (x.clone(), coeffs.get(s, j))),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(StateFamily {
            representative,
            support: sorted,
            coeffs,
            states,
        })
    }

    pub fn representative(&self) -> &MultiIndex {
        &self.representative
    }

    pub fn support(&self) -> &[MultiIndex] {
        &self.support
    }

    pub fn coeffs(&self) -> &CoefficientMatrix {
        &self.coeffs
    }

    pub fn states(&self) -> &[StateVector] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn shares_support_with(&self, other: &StateFamily) -> bool {
        // both supports are sorted
        let (mut i, mut j) = (0, 0);
        while i < self.support.len() && j < other.support.len() {
            match self.support[i].cmp(&other.support[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return true,
            }
        }
        false
    }
}

/// The state family attached to an orbit: the DFT family over the orbit in
/// shift order, or for the zero orbit the pair `|0...0> ± |1...1>`.
pub fn family_from_orbit(orbit: &Orbit, d: usize) -> Result<StateFamily> {
    let n = orbit.representative().len();
    if !orbit.representative().is_valid_for(d, n) {
        return Err(Error::Domain(format!(
            "orbit {} is not over Z_{d}",
            orbit.representative()
        )));
    }
    if orbit.is_zero_orbit() {
        let support = vec![MultiIndex::zeros(n), MultiIndex::new(vec![1; n])];
        return StateFamily::new(d, orbit.representative().clone(), support, dft_matrix(2)?);
    }
    StateFamily::new(
        d,
        orbit.representative().clone(),
        orbit.elements().to_vec(),
        dft_matrix(orbit.len())?,
    )
}

/// Names of the shipped constructions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Construction {
    /// The orbit set on `(C^d)^{⊗N}`.
    B,
    /// Four-party variant with the `(0,0,i,i)` families re-weighted.
    Bbar4,
    /// The 18-state set in `(C^3)^{⊗3}`.
    A18,
}

impl Construction {
    pub fn as_str(self) -> &'static str {
        match self {
            Construction::B => "B",
            Construction::Bbar4 => "Bbar4",
            Construction::A18 => "A18",
        }
    }

    pub fn build(self, d: usize, n: usize) -> Result<StateSet> {
        match self {
            Construction::B => build_b(d, n),
            Construction::Bbar4 => build_bbar4(d),
            Construction::A18 => Ok(build_a18()),
        }
    }
}

impl fmt::Display for Construction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Construction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "B" => Ok(Construction::B),
            "Bbar4" => Ok(Construction::Bbar4),
            "A18" => Ok(Construction::A18),
            other => Err(Error::Domain(format!("unknown construction {other:?}"))),
        }
    }
}

/// A set of states in `(C^d)^{⊗N}`, grouped into families.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSet {
    pub label: String,
    pub d: usize,
    pub n: usize,
    pub families: Vec<StateFamily>,
}

impl StateSet {
    pub fn len(&self) -> usize {
        self.families.iter().map(StateFamily::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn states(&self) -> impl Iterator<Item = &StateVector> {
        self.families.iter().flat_map(|f| f.states().iter())
    }

    /// `(family index, state index within family)` for each state in order.
    pub fn origins(&self) -> Vec<(usize, usize)> {
        self.families
            .iter()
            .enumerate()
            .flat_map(|(f, fam)| (0..fam.len()).map(move |s| (f, s)))
            .collect()
    }

    pub fn family(&self, representative: &MultiIndex) -> Option<&StateFamily> {
        self.families
            .iter()
            .find(|f| f.representative() == representative)
    }

    /// Writes the canonical JSON encoding.
    pub fn to_json(&self) -> Result<String> {
        let file = SetFile {
            label: self.label.clone(),
            d: self.d,
            n: self.n,
            families: self
                .families
                .iter()
                .map(|f| FamilyFile {
                    representative: f.representative.0.clone(),
                    states: f
                        .states
                        .iter()
                        .map(|st| StateFile {
                            terms: st
                                .terms()
                                .iter()
                                .map(|(k, a)| TermFile {
                                    index: k.0.clone(),
                                    re: a.re,
                                    im: a.im,
                                })
                                .collect(),
                        })
                        .collect(),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SetFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            location: format!("line {}, column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        file.into_set()
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SetFile {
    label: String,
    d: usize,
    #[serde(rename = "N")]
    n: usize,
    families: Vec<FamilyFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FamilyFile {
    representative: Vec<usize>,
    states: Vec<StateFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateFile {
    terms: Vec<TermFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermFile {
    index: Vec<usize>,
    re: f64,
    im: f64,
}

impl SetFile {
    fn into_set(self) -> Result<StateSet> {
        let parse = |location: String, message: String| Error::Parse { location, message };
        let (d, n) = (self.d, self.n);
        if d < 2 || n < 2 {
            return Err(parse(
                "d/N".into(),
                format!("need d >= 2 and N >= 2, got d={d}, N={n}"),
            ));
        }
        let mut families = Vec::with_capacity(self.families.len());
        for (fi, fam) in self.families.into_iter().enumerate() {
            let floc = format!("families[{fi}]");
            let rep = MultiIndex::new(fam.representative);
            if !rep.is_valid_for(d, n) {
                return Err(parse(
                    format!("{floc}.representative"),
                    format!("{rep} is not in Z_{d}^{n}"),
                ));
            }
            if fam.states.is_empty() {
                return Err(parse(
                    format!("{floc}.states"),
                    "family has no states".into(),
                ));
            }
            let mut rows: Vec<Vec<(MultiIndex, Complex)>> = Vec::new();
            let mut support: Vec<MultiIndex> = Vec::new();
            for (si, st) in fam.states.into_iter().enumerate() {
                let mut row = Vec::new();
                for (ti, t) in st.terms.into_iter().enumerate() {
                    let idx = MultiIndex::new(t.index);
                    if !idx.is_valid_for(d, n) {
                        return Err(parse(
                            format!("{floc}.states[{si}].terms[{ti}].index"),
                            format!("{idx} is not in Z_{d}^{n}"),
                        ));
                    }
                    if row.iter().any(|(k, _)| *k == idx) {
                        return Err(parse(
                            format!("{floc}.states[{si}].terms[{ti}].index"),
                            format!("{idx} repeated"),
                        ));
                    }
                    support.push(idx.clone());
                    row.push((idx, Complex::new(t.re, t.im)));
                }
                if row.is_empty() {
                    return Err(parse(
                        format!("{floc}.states[{si}]"),
                        "state has no terms".into(),
                    ));
                }
                rows.push(row);
            }
            support.sort();
            support.dedup();
            let coeffs = CoefficientMatrix(DMatrix::from_fn(rows.len(), support.len(), |s, j| {
                rows[s]
                    .iter()
                    .find(|(k, _)| *k == support[j])
                    .map_or(ZERO, |(_, a)| *a)
            }));
            let family = StateFamily::new(d, rep, support, coeffs)
                .map_err(|e| parse(floc.clone(), e.to_string()))?;
            families.push(family);
        }
        Ok(StateSet {
            label: self.label,
            d,
            n,
            families,
        })
    }
}

/// One DFT family per orbit of `X_d^N`, the zero orbit carrying the extra
/// GHZ-like pair. Size `d^N - (d-1)^N + 1`.
pub fn build_b(d: usize, n: usize) -> Result<StateSet> {
    if d < 2 || n < 3 {
        return Err(Error::Domain(format!(
            "need d >= 2 and N >= 3, got d={d}, N={n}"
        )));
    }
    let part = orbits::partition(d, n)?;
    let families = part
        .orbits
        .iter()
        .map(|o| family_from_orbit(o, d))
        .collect::<Result<Vec<_>>>()?;
    Ok(StateSet {
        label: Construction::B.to_string(),
        d,
        n,
        families,
    })
}

/// `build_b(d, 4)` with each `(0,0,i,i)` family re-weighted by [`BTILDE`].
pub fn build_bbar4(d: usize) -> Result<StateSet> {
    let mut set = build_b(d, 4)?;
    set.label = Construction::Bbar4.to_string();
    for i in 1..d {
        let rep = MultiIndex::new(vec![0, 0, i, i]);
        let orbit = orbits::orbit_of(&rep)?;
        // BTILDE columns are aligned with this exact element order.
        let expected = [[0, 0, i, i], [0, i, i, 0], [i, i, 0, 0], [i, 0, 0, i]];
        assert_eq!(orbit.representative(), &rep);
        assert!(orbit
            .elements()
            .iter()
            .zip(&expected)
            .all(|(e, x)| e.entries() == x));
        assert_eq!(orbit.len(), 4);
        let family = StateFamily::new(d, rep.clone(), orbit.elements().to_vec(), btilde_matrix())?;
        let slot = set
            .families
            .iter_mut()
            .find(|f| f.representative() == &rep)
            .expect("orbit present in partition");
        *slot = family;
    }
    Ok(set)
}

/// Support elements of the six families of the 18-state set, in the order
/// that carries the phases `1, w_3^s, w_3^{2s}`.
const A18_FAMILIES: [[[usize; 3]; 3]; 6] = [
    [[0, 0, 0], [1, 1, 1], [2, 2, 2]],
    [[0, 0, 2], [0, 2, 0], [2, 0, 0]],
    [[0, 1, 1], [1, 1, 0], [1, 0, 1]],
    [[0, 1, 2], [1, 2, 0], [2, 0, 1]],
    [[1, 0, 2], [0, 2, 1], [2, 1, 0]],
    [[1, 2, 2], [2, 2, 1], [2, 1, 2]],
];

/// Six DFT triples in `(C^3)^{⊗3}`, 18 genuinely entangled states.
pub fn build_a18() -> StateSet {
    let w = dft_matrix(3).expect("order 3");
    let families = A18_FAMILIES
        .iter()
        .map(|elems| {
            let support: Vec<MultiIndex> =
                elems.iter().map(|e| MultiIndex::new(e.to_vec())).collect();
            StateFamily::new(3, support[0].clone(), support, w.clone()).expect("literal table")
        })
        .collect();
    StateSet {
        label: Construction::A18.to_string(),
        d: 3,
        n: 3,
        families,
    }
}

/// Largest normalized overlap `|<a|b>| / (|a| |b|)` over distinct pairs,
/// with the offending pair.
pub fn worst_overlap(set: &StateSet) -> Result<(f64, Option<(usize, usize)>)> {
    let states: Vec<&StateVector> = set.states().collect();
    let mut worst = (0.0, None);
    for i in 0..states.len() {
        for j in i + 1..states.len() {
            let r =
                inner_product(states[i], states[j])?.norm() / (states[i].norm() * states[j].norm());
            if worst.1.is_none() || r > worst.0 {
                worst = (r, Some((i, j)));
            }
        }
    }
    Ok(worst)
}

/// Applies the cyclic shift to every basis index of `a`.
pub fn shift_state(a: &StateVector) -> Result<StateVector> {
    a.map_indices(cyclic_shift)
}
