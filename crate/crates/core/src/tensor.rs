//! Dense and sparse linear-algebra kernel: sparse kets over the product
//! basis, bipartition reshaping, numerical rank, Hermitian parameter
//! vectors, and SVD-based real null spaces.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use nalgebra::{DMatrix, DVector};
use petgraph::unionfind::UnionFind;
use rayon::prelude::*;

use crate::orbits::MultiIndex;
use crate::{Error, Result};

pub type Complex = nalgebra::Complex<f64>;

pub const ZERO: Complex = Complex::new(0.0, 0.0);
pub const ONE: Complex = Complex::new(1.0, 0.0);

/// A ket in `(C^d)^{⊗N}` stored as its nonzero amplitudes over the
/// computational product basis. Kets are not normalized.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    d: usize,
    n: usize,
    terms: BTreeMap<MultiIndex, Complex>,
}

impl StateVector {
    /// Builds a ket from `(index, amplitude)` pairs. Repeated indices are
    /// summed and exact zeros dropped.
    pub fn new(
        d: usize,
        n: usize,
        terms: impl IntoIterator<Item = (MultiIndex, Complex)>,
    ) -> Result<Self> {
        if d < 2 || n < 1 {
            return Err(Error::Domain(format!("invalid dimensions d={d}, N={n}")));
        }
        let mut map: BTreeMap<MultiIndex, Complex> = BTreeMap::new();
        for (idx, amp) in terms {
            if !idx.is_valid_for(d, n) {
                return Err(Error::Shape(format!("index {idx} is not in Z_{d}^{n}")));
            }
            if !amp.re.is_finite() || !amp.im.is_finite() {
                return Err(Error::Domain(format!("non-finite amplitude at {idx}")));
            }
            *map.entry(idx).or_insert(ZERO) += amp;
        }
        map.retain(|_, a| *a != ZERO);
        if map.is_empty() {
            return Err(Error::Domain("state has no nonzero amplitude".into()));
        }
        Ok(StateVector { d, n, terms: map })
    }

    pub fn basis(d: usize, n: usize, index: MultiIndex) -> Result<Self> {
        Self::new(d, n, [(index, ONE)])
    }

    /// `sum_i |i...i>` for `i` in `Z_d`.
    pub fn ghz(d: usize, n: usize) -> Result<Self> {
        Self::new(d, n, (0..d).map(|i| (MultiIndex::new(vec![i; n]), ONE)))
    }

    /// Uniform superposition of single excitations `|10...0> + ... + |0...01>`,
    /// embedded in local dimension `d`.
    pub fn w_state(d: usize, n: usize) -> Result<Self> {
        Self::new(
            d,
            n,
            (0..n).map(|k| {
                let mut v = vec![0; n];
                v[k] = 1;
                (MultiIndex::new(v), ONE)
            }),
        )
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &BTreeMap<MultiIndex, Complex> {
        &self.terms
    }

    pub fn amplitude(&self, index: &MultiIndex) -> Complex {
        self.terms.get(index).copied().unwrap_or(ZERO)
    }

    pub fn support(&self) -> impl Iterator<Item = &MultiIndex> {
        self.terms.keys()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scaled(&self, c: Complex) -> Result<Self> {
        Self::new(
            self.d,
            self.n,
            self.terms.iter().map(|(k, a)| (k.clone(), a * c)),
        )
    }

    /// Relabels every basis index through `f`.
    pub fn map_indices(&self, f: impl Fn(&MultiIndex) -> MultiIndex) -> Result<Self> {
        Self::new(self.d, self.n, self.terms.iter().map(|(k, a)| (f(k), *a)))
    }

    pub fn to_dense(&self) -> DVector<Complex> {
        let mut v = DVector::from_element(self.d.pow(self.n as u32), ZERO);
        for (k, a) in &self.terms {
            v[k.linear(self.d)] = *a;
        }
        v
    }
}

/// `<a|b> = sum conj(a_i) b_i`.
pub fn inner_product(a: &StateVector, b: &StateVector) -> Result<Complex> {
    if a.d != b.d || a.n != b.n {
        return Err(Error::Shape(format!(
            "cannot pair a state in (C^{})^{} with one in (C^{})^{}",
            a.d, a.n, b.d, b.n
        )));
    }
    // Iterate over the shorter support.
    let (small, large, conj_small) = if a.terms.len() <= b.terms.len() {
        (a, b, true)
    } else {
        (b, a, false)
    };
    let mut acc = ZERO;
    for (k, x) in &small.terms {
        if let Some(y) = large.terms.get(k) {
            acc += if conj_small {
                x.conj() * y
            } else {
                y.conj() * x
            };
        }
    }
    Ok(acc)
}

/// A split of the parties `{0..N}` into two nonempty sides.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Bipartition {
    n: usize,
    left: Vec<usize>,
    right: Vec<usize>,
}

impl Bipartition {
    pub fn new(n: usize, left: impl IntoIterator<Item = usize>) -> Result<Self> {
        let left: BTreeSet<usize> = left.into_iter().collect();
        if let Some(&p) = left.iter().find(|&&p| p >= n) {
            return Err(Error::Domain(format!(
                "party {} out of range for N={n}",
                p + 1
            )));
        }
        if left.is_empty() || left.len() == n {
            return Err(Error::Domain(
                "both sides of a bipartition must be nonempty".into(),
            ));
        }
        let right = (0..n).filter(|p| !left.contains(p)).collect();
        Ok(Bipartition {
            n,
            left: left.into_iter().collect(),
            right,
        })
    }

    /// Every unordered bipartition once, with party 0 on the left side.
    pub fn all(n: usize) -> Vec<Bipartition> {
        if n < 2 {
            return Vec::new();
        }
        (0..(1usize << (n - 1)) - 1)
            .map(|mask| {
                let left = std::iter::once(0)
                    .chain((1..n).filter(|p| mask >> (p - 1) & 1 == 1))
                    .collect::<Vec<_>>();
                Bipartition::new(n, left).expect("valid mask")
            })
            .collect()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn left(&self) -> &[usize] {
        &self.left
    }

    pub fn right(&self) -> &[usize] {
        &self.right
    }

    pub fn flip(&self) -> Bipartition {
        Bipartition {
            n: self.n,
            left: self.right.clone(),
            right: self.left.clone(),
        }
    }
}

impl fmt::Display for Bipartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let side = |v: &[usize]| {
            v.iter()
                .map(|p| (p + 1).to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        write!(f, "{}|{}", side(&self.left), side(&self.right))
    }
}

/// Amplitude matrix of `a` across `cut`: rows are left sub-indices, columns
/// right sub-indices, both lexicographic.
pub fn reshape(a: &StateVector, cut: &Bipartition) -> Result<DMatrix<Complex>> {
    if cut.n != a.n {
        return Err(Error::Shape(format!(
            "cut is for N={}, state has N={}",
            cut.n, a.n
        )));
    }
    let rows = a.d.pow(cut.left.len() as u32);
    let cols = a.d.pow(cut.right.len() as u32);
    let mut m = DMatrix::from_element(rows, cols, ZERO);
    for (idx, amp) in &a.terms {
        let r = idx.project(&cut.left).linear(a.d);
        let c = idx.project(&cut.right).linear(a.d);
        m[(r, c)] = *amp;
    }
    Ok(m)
}

/// Number of singular values above `tol * max(1, sigma_max)`.
pub fn numeric_rank(m: &DMatrix<Complex>, tol: f64) -> Result<usize> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::Shape("rank of an empty matrix".into()));
    }
    let sv = m.clone().singular_values();
    let cut = tol * sv.max().max(1.0);
    Ok(sv.iter().filter(|&&s| s > cut).count())
}

/// Real coordinates of an `m x m` Hermitian matrix.
///
/// Layout: the `m` real diagonal entries first, then for each strict-upper
/// entry `(r, s)`, `r < s`, in row-major order, its real and imaginary parts.
/// There are `m^2` coordinates in total.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianParam {
    dim: usize,
    values: Vec<f64>,
}

impl HermitianParam {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != dim * dim {
            return Err(Error::Shape(format!(
                "a {dim}x{dim} Hermitian matrix has {} real parameters, got {}",
                dim * dim,
                values.len()
            )));
        }
        Ok(HermitianParam { dim, values })
    }

    pub fn identity(dim: usize) -> Self {
        let mut values = vec![0.0; dim * dim];
        values[..dim].fill(1.0);
        HermitianParam { dim, values }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Index of the real part of entry `(r, s)` for `r < s`; the imaginary
    /// part follows it.
    pub fn offdiag_index(dim: usize, r: usize, s: usize) -> usize {
        debug_assert!(r < s && s < dim);
        dim + 2 * (r * dim - r * (r + 1) / 2 + (s - r - 1))
    }

    pub fn to_matrix(&self) -> DMatrix<Complex> {
        let m = self.dim;
        let mut e = DMatrix::from_element(m, m, ZERO);
        for r in 0..m {
            e[(r, r)] = Complex::new(self.values[r], 0.0);
            for s in r + 1..m {
                let k = Self::offdiag_index(m, r, s);
                let z = Complex::new(self.values[k], self.values[k + 1]);
                e[(r, s)] = z;
                e[(s, r)] = z.conj();
            }
        }
        e
    }

    /// Reads the diagonal real parts and the strict upper triangle; the lower
    /// triangle is ignored.
    pub fn from_matrix(e: &DMatrix<Complex>) -> Result<Self> {
        if e.nrows() != e.ncols() {
            return Err(Error::Shape(format!(
                "{}x{} matrix is not square",
                e.nrows(),
                e.ncols()
            )));
        }
        let m = e.nrows();
        let mut values = vec![0.0; m * m];
        for r in 0..m {
            values[r] = e[(r, r)].re;
            for s in r + 1..m {
                let k = Self::offdiag_index(m, r, s);
                values[k] = e[(r, s)].re;
                values[k + 1] = e[(r, s)].im;
            }
        }
        Ok(HermitianParam { dim: m, values })
    }
}

/// Row-sparse real matrix.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseRealMatrix {
    ncols: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseRealMatrix {
    pub fn new(ncols: usize) -> Self {
        SparseRealMatrix {
            ncols,
            rows: Vec::new(),
        }
    }

    /// Appends a row; repeated columns are summed and exact zeros dropped.
    pub fn push_row(&mut self, entries: impl IntoIterator<Item = (usize, f64)>) {
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for (c, v) in entries {
            assert!(c < self.ncols, "column {c} out of range {}", self.ncols);
            *acc.entry(c).or_insert(0.0) += v;
        }
        self.rows
            .push(acc.into_iter().filter(|&(_, v)| v != 0.0).collect());
    }

    pub fn from_dense(a: &DMatrix<f64>) -> Self {
        let mut s = SparseRealMatrix::new(a.ncols());
        for r in 0..a.nrows() {
            s.push_row((0..a.ncols()).map(|c| (c, a[(r, c)])));
        }
        s
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.rows.len(), self.ncols);
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                a[(r, c)] = v;
            }
        }
        a
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(c, v)| v * x[c]).sum())
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.rows
            .iter()
            .flatten()
            .map(|(_, v)| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Null space `{x : Ax = 0}` via singular value decomposition.
    ///
    /// Columns are split into connected components of the row/column
    /// incidence graph, and within a component rows sharing a support
    /// pattern are first compressed by QR. Both steps are orthogonal row
    /// transformations or block permutations, so the singular values are
    /// those of `A` itself.
    pub fn nullspace(&self, tol: f64) -> Result<NullSpace> {
        if !(tol > 0.0) {
            return Err(Error::Domain(format!(
                "tolerance must be positive, got {tol}"
            )));
        }
        let ncols = self.ncols;
        let mut uf = UnionFind::<usize>::new(ncols);
        for row in &self.rows {
            for w in row.windows(2) {
                uf.union(w[0].0, w[1].0);
            }
        }
        let labels = uf.into_labeling();
        let mut comp_cols: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for c in 0..ncols {
            comp_cols.entry(labels[c]).or_default().push(c);
        }
        let mut comp_rows: BTreeMap<usize, Vec<&Vec<(usize, f64)>>> = BTreeMap::new();
        for row in self.rows.iter().filter(|r| !r.is_empty()) {
            comp_rows.entry(labels[row[0].0]).or_default().push(row);
        }
        let mut components: Vec<(Vec<usize>, Vec<&Vec<(usize, f64)>>)> = comp_cols
            .into_iter()
            .map(|(label, cols)| (cols, comp_rows.remove(&label).unwrap_or_default()))
            .collect();
        components.sort_by_key(|(cols, _)| cols[0]);

        let decomposed: Vec<(Vec<f64>, DMatrix<f64>)> = components
            .par_iter()
            .map(|(cols, rows)| component_svd(cols, rows))
            .collect();

        let sigma_max = decomposed
            .iter()
            .flat_map(|(s, _)| s.iter().copied())
            .fold(0.0f64, f64::max);
        let threshold = tol * sigma_max;

        let mut basis = Vec::new();
        let mut singular_values = Vec::with_capacity(ncols);
        for ((cols, _), (sv, v_t)) in components.iter().zip(&decomposed) {
            for (k, &s) in sv.iter().enumerate() {
                singular_values.push(s);
                if s <= threshold {
                    let mut x = DVector::zeros(ncols);
                    for (local, &c) in cols.iter().enumerate() {
                        x[c] = v_t[(k, local)];
                    }
                    basis.push(x);
                }
            }
        }
        singular_values.sort_by(|a, b| b.total_cmp(a));
        Ok(NullSpace {
            basis,
            singular_values,
            threshold,
        })
    }
}

/// Singular values and right singular vectors (rows of `V^T`) of one
/// column component, padded with zero singular values up to its width.
fn component_svd(cols: &[usize], rows: &[&Vec<(usize, f64)>]) -> (Vec<f64>, DMatrix<f64>) {
    let width = cols.len();
    let local: BTreeMap<usize, usize> = cols.iter().enumerate().map(|(k, &c)| (c, k)).collect();

    // Group rows by support and QR-compress over-determined groups.
    let mut groups: BTreeMap<Vec<usize>, Vec<Vec<f64>>> = BTreeMap::new();
    for row in rows {
        let pattern: Vec<usize> = row.iter().map(|&(c, _)| local[&c]).collect();
        groups
            .entry(pattern)
            .or_default()
            .push(row.iter().map(|&(_, v)| v).collect());
    }
    let mut stacked: Vec<(Vec<usize>, Vec<f64>)> = Vec::new();
    for (pattern, vals) in groups {
        let p = pattern.len();
        if vals.len() > p {
            let block = DMatrix::from_fn(vals.len(), p, |r, c| vals[r][c]);
            let r = block.qr().r();
            for i in 0..r.nrows() {
                stacked.push((pattern.clone(), r.row(i).iter().copied().collect()));
            }
        } else {
            stacked.extend(vals.into_iter().map(|v| (pattern.clone(), v)));
        }
    }
    let mut dense = DMatrix::zeros(stacked.len().max(width), width);
    for (i, (pattern, vals)) in stacked.iter().enumerate() {
        for (&c, &v) in pattern.iter().zip(vals) {
            dense[(i, c)] = v;
        }
    }
    if dense.nrows() > width {
        dense = dense.qr().r();
    }
    let svd = dense.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    (svd.singular_values.iter().copied().collect(), v_t)
}

/// Result of a null-space computation.
#[derive(Clone, Debug)]
pub struct NullSpace {
    /// Orthonormal basis of the numerical null space.
    pub basis: Vec<DVector<f64>>,
    /// All singular values, descending, padded with zeros to the column count.
    pub singular_values: Vec<f64>,
    /// Singular values at or below this are treated as zero.
    pub threshold: f64,
}

impl NullSpace {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// A singular value within a factor of 10 of the threshold on either
    /// side, if any. Such a value makes the null-space dimension unreliable.
    pub fn borderline(&self) -> Option<f64> {
        if self.threshold <= 0.0 {
            return None;
        }
        self.singular_values
            .iter()
            .copied()
            .find(|&s| s > self.threshold / 10.0 && s <= self.threshold * 10.0)
    }

    /// Smallest singular value above the threshold.
    pub fn smallest_kept(&self) -> Option<f64> {
        self.singular_values
            .iter()
            .copied()
            .filter(|&s| s > self.threshold)
            .last()
    }

    /// Largest singular value at or below the threshold.
    pub fn largest_discarded(&self) -> Option<f64> {
        self.singular_values
            .iter()
            .copied()
            .find(|&s| s <= self.threshold)
    }
}

/// Orthonormal basis of `{x : Ax = 0}` where singular values at or below
/// `tol * sigma_max` count as zero.
pub fn real_nullspace(a: &DMatrix<f64>, tol: f64) -> Result<NullSpace> {
    SparseRealMatrix::from_dense(a).nullspace(tol)
}
