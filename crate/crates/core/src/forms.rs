//! Matrix-valued differential forms sampled pointwise on a [`GridTorus`].
//!
//! A degree-`k` form stores one `n×n` complex matrix per grid point and per
//! strictly increasing axis tuple `J` (encoded as a bitmask). Tuples are
//! ordered lexicographically, so on `T^3` the 2-form components are
//! `dx0∧dx1, dx0∧dx2, dx1∧dx2`. A form whose degree exceeds the grid
//! dimension has no components and is the canonical zero.
//!
//! Storage is point-major: all components of one point are contiguous, which
//! keeps every pointwise kernel (wedge, trace, derivative assembly) a
//! parallel loop over independent chunks.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::torus::GridTorus;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const PAR_MIN_POINTS: usize = 512;

/// Axis-tuple bitmasks of size `k` in lexicographic order of their axis lists.
pub fn axis_masks(dim: usize, k: usize) -> Vec<u32> {
    fn rec(start: usize, dim: usize, k: usize, acc: u32, out: &mut Vec<u32>) {
        if k == 0 {
            out.push(acc);
            return;
        }
        for a in start..dim {
            rec(a + 1, dim, k - 1, acc | (1 << a), out);
        }
    }
    let mut out = Vec::new();
    if k <= dim {
        rec(0, dim, k, 0, &mut out);
    }
    out
}

pub fn mask_axes(mask: u32) -> Vec<usize> {
    (0..32).filter(|a| mask & (1 << a) != 0).collect()
}

/// Position of `mask` among the lexicographically ordered tuples of its size.
pub fn mask_index(dim: usize, mask: u32) -> usize {
    axis_masks(dim, mask.count_ones() as usize)
        .iter()
        .position(|&m| m == mask)
        .expect("mask outside the grid dimension")
}

/// Sign of the shuffle taking `dx_I ∧ dx_J` to `dx_{I∪J}` (disjoint masks).
pub fn shuffle_sign(i: u32, j: u32) -> f64 {
    let mut inversions = 0;
    for a in mask_axes(j) {
        // elements of I above a must hop over dx_a
        inversions += (i >> (a + 1)).count_ones();
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

#[derive(Clone, Debug)]
pub struct MatrixForm {
    torus: Arc<GridTorus>,
    degree: usize,
    rank: usize,
    ncomp: usize,
    data: Vec<Complex64>,
}

impl MatrixForm {
    pub fn zeros(torus: &GridTorus, degree: usize, rank: usize) -> Self {
        Self::zeros_on(Arc::new(torus.clone()), degree, rank)
    }

    pub fn zeros_on(torus: Arc<GridTorus>, degree: usize, rank: usize) -> Self {
        assert!(rank >= 1, "rank must be positive");
        let ncomp = binomial(torus.dim(), degree);
        let len = torus.num_points() * ncomp * rank * rank;
        Self {
            torus,
            degree,
            rank,
            ncomp,
            data: vec![ZERO; len],
        }
    }

    /// Build a form from a sampling function. `f(position, axes, matrix)` fills
    /// the row-major `rank×rank` coefficient of component `axes` at `position`.
    pub fn from_fn<F>(torus: &GridTorus, degree: usize, rank: usize, f: F) -> Self
    where
        F: Fn(&[f64], &[usize], &mut [Complex64]) + Sync,
    {
        Self::from_fn_on(Arc::new(torus.clone()), degree, rank, f)
    }

    pub fn from_fn_on<F>(torus: Arc<GridTorus>, degree: usize, rank: usize, f: F) -> Self
    where
        F: Fn(&[f64], &[usize], &mut [Complex64]) + Sync,
    {
        let mut out = Self::zeros_on(torus, degree, rank);
        let comps: Vec<Vec<usize>> = axis_masks(out.torus.dim(), degree)
            .into_iter()
            .map(mask_axes)
            .collect();
        let nn = rank * rank;
        let chunk = out.ncomp * nn;
        if chunk == 0 {
            return out;
        }
        let torus = out.torus.clone();
        out.data
            .par_chunks_mut(chunk)
            .with_min_len(PAR_MIN_POINTS)
            .enumerate()
            .for_each(|(p, slot)| {
                let pos = torus.position(p);
                for (c, axes) in comps.iter().enumerate() {
                    f(&pos, axes, &mut slot[c * nn..(c + 1) * nn]);
                }
            });
        out
    }

    /// Like `from_fn_on`, but `f(position, coefficients)` fills every
    /// component at a point at once, in `axis_masks` order.
    pub fn from_point_fn_on<F>(torus: Arc<GridTorus>, degree: usize, rank: usize, f: F) -> Self
    where
        F: Fn(&[f64], &mut [Complex64]) + Sync,
    {
        let mut out = Self::zeros_on(torus, degree, rank);
        let chunk = out.ncomp * rank * rank;
        if chunk == 0 {
            return out;
        }
        let torus = out.torus.clone();
        out.data
            .par_chunks_mut(chunk)
            .with_min_len(PAR_MIN_POINTS)
            .enumerate()
            .for_each(|(p, slot)| f(&torus.position(p), slot));
        out
    }

    pub fn scalar_from_fn<F>(torus: &GridTorus, degree: usize, f: F) -> Self
    where
        F: Fn(&[f64], &[usize]) -> Complex64 + Sync,
    {
        Self::from_fn(torus, degree, 1, |x, axes, m| m[0] = f(x, axes))
    }

    /// The constant `rank×rank` matrix field `m` as a 0-form.
    pub fn constant_matrix(torus: &GridTorus, m: &[Complex64]) -> Self {
        let rank = (m.len() as f64).sqrt().round() as usize;
        assert_eq!(rank * rank, m.len(), "matrix must be square");
        Self::from_fn(torus, 0, rank, |_, _, out| out.copy_from_slice(m))
    }

    pub fn identity(torus: &GridTorus, rank: usize) -> Self {
        Self::from_fn(torus, 0, rank, |_, _, out| {
            for i in 0..rank {
                out[i * rank + i] = Complex64::new(1.0, 0.0);
            }
        })
    }

    pub fn torus(&self) -> &GridTorus {
        &self.torus
    }

    pub fn torus_arc(&self) -> &Arc<GridTorus> {
        &self.torus
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn num_components(&self) -> usize {
        self.ncomp
    }

    /// True when the degree exceeds the grid dimension (no storage).
    pub fn is_canonical_zero(&self) -> bool {
        self.ncomp == 0
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// Coefficient matrix of component index `comp` at `point`.
    #[inline]
    pub fn coeff(&self, point: usize, comp: usize) -> &[Complex64] {
        let nn = self.rank * self.rank;
        let base = (point * self.ncomp + comp) * nn;
        &self.data[base..base + nn]
    }

    #[inline]
    pub fn coeff_mut(&mut self, point: usize, comp: usize) -> &mut [Complex64] {
        let nn = self.rank * self.rank;
        let base = (point * self.ncomp + comp) * nn;
        &mut self.data[base..base + nn]
    }

    /// Coefficient for the axis tuple `axes` (any order is accepted; the
    /// value returned is for the sorted tuple).
    pub fn coeff_axes(&self, point: usize, axes: &[usize]) -> &[Complex64] {
        let mask = axes.iter().fold(0u32, |m, &a| m | (1 << a));
        self.coeff(point, mask_index(self.torus.dim(), mask))
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.torus, &other.torus) || *self.torus == *other.torus
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if !self.same_grid(other) {
            return Err(Error::TorusMismatch);
        }
        if self.degree != other.degree {
            return Err(Error::DegreeMismatch {
                expected: self.degree,
                found: other.degree,
            });
        }
        if self.rank != other.rank {
            return Err(Error::RankMismatch(self.rank, other.rank));
        }
        Ok(())
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: Complex64, other: &Self) -> Result<()> {
        self.check_compatible(other)?;
        self.data
            .par_iter_mut()
            .with_min_len(4096)
            .zip(other.data.par_iter())
            .for_each(|(a, b)| *a += c * b);
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(Complex64::new(1.0, 0.0), other)?;
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(Complex64::new(-1.0, 0.0), other)?;
        Ok(out)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        out.data.par_iter_mut().with_min_len(4096).for_each(|a| *a *= c);
        out
    }

    pub fn scale_real(&self, c: f64) -> Self {
        self.scale(Complex64::new(c, 0.0))
    }

    /// Linear combination `Σ c_i f_i` accumulated in the given order.
    pub fn combination(terms: &[(Complex64, &MatrixForm)]) -> Result<Self> {
        let (first_c, first) = terms
            .first()
            .ok_or_else(|| Error::Quadrature("empty linear combination".into()))?;
        let mut out = first.scale(*first_c);
        for (c, f) in &terms[1..] {
            out.axpy(*c, f)?;
        }
        Ok(out)
    }

    /// Exterior derivative with second-order central differences (periodic
    /// wrap) and one-sided second-order stencils at non-periodic boundaries.
    pub fn exterior_derivative(&self) -> Self {
        let torus = self.torus.clone();
        let dim = torus.dim();
        let mut out = Self::zeros_on(torus.clone(), self.degree + 1, self.rank);
        if out.ncomp == 0 || self.ncomp == 0 {
            return out;
        }
        let in_masks = axis_masks(dim, self.degree);
        // per output component: (axis, input component, sign)
        let table: Vec<Vec<(usize, usize, f64)>> = axis_masks(dim, self.degree + 1)
            .into_iter()
            .map(|k| {
                mask_axes(k)
                    .into_iter()
                    .enumerate()
                    .map(|(r, axis)| {
                        let rest = k & !(1 << axis);
                        let ci = in_masks.iter().position(|&m| m == rest).unwrap();
                        (axis, ci, if r % 2 == 0 { 1.0 } else { -1.0 })
                    })
                    .collect()
            })
            .collect();
        let nn = self.rank * self.rank;
        let in_chunk = self.ncomp * nn;
        let out_chunk = out.ncomp * nn;
        let src = &self.data;
        out.data
            .par_chunks_mut(out_chunk)
            .with_min_len(PAR_MIN_POINTS)
            .enumerate()
            .for_each(|(p, slot)| {
                for (co, terms) in table.iter().enumerate() {
                    let dst = &mut slot[co * nn..(co + 1) * nn];
                    for &(axis, ci, sign) in terms {
                        let (pts, ws) = stencil(&torus, p, axis);
                        for (&q, &w) in pts.iter().zip(ws.iter()) {
                            if w == 0.0 {
                                continue;
                            }
                            let w = w * sign;
                            let base = q * in_chunk + ci * nn;
                            for e in 0..nn {
                                dst[e] += src[base + e] * w;
                            }
                        }
                    }
                }
            });
        out
    }

    /// Pointwise antisymmetrised product with matrix multiplication of the
    /// coefficients. A rank-1 operand acts as a scalar.
    pub fn wedge(&self, other: &Self) -> Result<Self> {
        if !self.same_grid(other) {
            return Err(Error::TorusMismatch);
        }
        let (ra, rb) = (self.rank, other.rank);
        let rank = if ra == rb || rb == 1 {
            ra
        } else if ra == 1 {
            rb
        } else {
            return Err(Error::RankMismatch(ra, rb));
        };
        let dim = self.torus.dim();
        let mut out = Self::zeros_on(self.torus.clone(), self.degree + other.degree, rank);
        if out.ncomp == 0 || self.ncomp == 0 || other.ncomp == 0 {
            return Ok(out);
        }
        let out_masks = axis_masks(dim, out.degree);
        let mut table = Vec::new();
        for (ia, &ma) in axis_masks(dim, self.degree).iter().enumerate() {
            for (ib, &mb) in axis_masks(dim, other.degree).iter().enumerate() {
                if ma & mb != 0 {
                    continue;
                }
                let io = out_masks.iter().position(|&m| m == ma | mb).unwrap();
                table.push((ia, ib, io, shuffle_sign(ma, mb)));
            }
        }
        let (nna, nnb, nno) = (ra * ra, rb * rb, rank * rank);
        let (ca, cb) = (self.ncomp * nna, other.ncomp * nnb);
        let (a, b) = (&self.data, &other.data);
        out.data
            .par_chunks_mut(out.ncomp * nno)
            .with_min_len(PAR_MIN_POINTS)
            .enumerate()
            .for_each(|(p, slot)| {
                for &(ia, ib, io, sign) in &table {
                    let ma = &a[p * ca + ia * nna..p * ca + (ia + 1) * nna];
                    let mb = &b[p * cb + ib * nnb..p * cb + (ib + 1) * nnb];
                    let dst = &mut slot[io * nno..(io + 1) * nno];
                    mul_acc(ma, ra, mb, rb, sign, dst);
                }
            });
        Ok(out)
    }

    /// Coefficient-wise matrix trace (a rank-1 form).
    pub fn trace(&self) -> Self {
        let mut out = Self::zeros_on(self.torus.clone(), self.degree, 1);
        if self.ncomp == 0 {
            return out;
        }
        let n = self.rank;
        let nn = n * n;
        let chunk = self.ncomp;
        let src = &self.data;
        out.data
            .par_chunks_mut(chunk)
            .with_min_len(PAR_MIN_POINTS)
            .enumerate()
            .for_each(|(p, slot)| {
                for (c, v) in slot.iter_mut().enumerate() {
                    let base = (p * chunk + c) * nn;
                    *v = (0..n).map(|i| src[base + i * n + i]).sum();
                }
            });
        out
    }

    /// Largest entry modulus over all points, components and matrix entries.
    pub fn norm_inf(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// `norm_inf(self - other)`.
    pub fn distance_inf(&self, other: &Self) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).norm())))
    }

    /// Grid points where some coefficient exceeds `threshold` in modulus.
    pub fn support(&self, threshold: f64) -> SupportMask {
        let chunk = self.ncomp * self.rank * self.rank;
        let mask = if chunk == 0 {
            vec![false; self.torus.num_points()]
        } else {
            self.data
                .chunks(chunk)
                .map(|c| c.iter().any(|z| z.norm() > threshold))
                .collect()
        };
        SupportMask {
            torus: self.torus.clone(),
            mask,
        }
    }

    /// Applies `f` to every coefficient matrix (same rank and degree).
    pub fn map_matrices<F>(&self, f: F) -> Self
    where
        F: Fn(&[Complex64], &mut [Complex64]) + Sync,
    {
        let mut out = Self::zeros_on(self.torus.clone(), self.degree, self.rank);
        let nn = self.rank * self.rank;
        if nn * self.ncomp == 0 {
            return out;
        }
        out.data
            .par_chunks_mut(nn)
            .with_min_len(PAR_MIN_POINTS)
            .zip(self.data.par_chunks(nn))
            .for_each(|(dst, src)| f(src, dst));
        out
    }

    /// Restrict to the grid of `torus` (same dimension) is not supported; forms
    /// are tied to one grid. This returns a copy living on `torus` when the
    /// grids are equal.
    pub fn with_torus(&self, torus: Arc<GridTorus>) -> Result<Self> {
        if *torus != *self.torus {
            return Err(Error::TorusMismatch);
        }
        let mut out = self.clone();
        out.torus = torus;
        Ok(out)
    }
}

/// Derivative stencil along `axis` at `p`: up to three points and weights.
#[inline]
fn stencil(torus: &GridTorus, p: usize, axis: usize) -> ([usize; 3], [f64; 3]) {
    let inv = 1.0 / (2.0 * torus.spacing(axis));
    if torus.is_periodic(axis) {
        let fwd = torus.shifted(p, axis, 1).unwrap();
        let bwd = torus.shifted(p, axis, -1).unwrap();
        return ([fwd, bwd, p], [inv, -inv, 0.0]);
    }
    let n = torus.resolution()[axis];
    let c = torus.coord(p, axis);
    if c == 0 {
        let p1 = torus.shifted(p, axis, 1).unwrap();
        let p2 = torus.shifted(p, axis, 2).unwrap();
        ([p, p1, p2], [-3.0 * inv, 4.0 * inv, -inv])
    } else if c == n - 1 {
        let m1 = torus.shifted(p, axis, -1).unwrap();
        let m2 = torus.shifted(p, axis, -2).unwrap();
        ([p, m1, m2], [3.0 * inv, -4.0 * inv, inv])
    } else {
        let fwd = torus.shifted(p, axis, 1).unwrap();
        let bwd = torus.shifted(p, axis, -1).unwrap();
        ([fwd, bwd, p], [inv, -inv, 0.0])
    }
}

/// Grid points whose derivative stencil along `axis` reads from `p`'s
/// neighbourhood; used for support dilation.
fn stencil_points(torus: &GridTorus, p: usize, axis: usize) -> impl Iterator<Item = usize> {
    let (pts, ws) = stencil(torus, p, axis);
    (0..3).filter(move |&i| ws[i] != 0.0).map(move |i| pts[i])
}

/// `dst += sign * a * b` for row-major square matrices; rank-1 operands scale.
#[inline]
fn mul_acc(a: &[Complex64], ra: usize, b: &[Complex64], rb: usize, sign: f64, dst: &mut [Complex64]) {
    if ra == 1 {
        let s = a[0] * sign;
        for (d, x) in dst.iter_mut().zip(b) {
            *d += s * x;
        }
    } else if rb == 1 {
        let s = b[0] * sign;
        for (d, x) in dst.iter_mut().zip(a) {
            *d += s * x;
        }
    } else {
        let n = ra;
        for i in 0..n {
            for k in 0..n {
                let aik = a[i * n + k] * sign;
                if aik == ZERO {
                    continue;
                }
                for j in 0..n {
                    dst[i * n + j] += aik * b[k * n + j];
                }
            }
        }
    }
}

/// Boolean indicator over the grid points.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportMask {
    torus: Arc<GridTorus>,
    mask: Vec<bool>,
}

impl SupportMask {
    pub fn from_fn<F: Fn(&[f64]) -> bool>(torus: &GridTorus, f: F) -> Self {
        let mask = (0..torus.num_points()).map(|p| f(&torus.position(p))).collect();
        Self {
            torus: Arc::new(torus.clone()),
            mask,
        }
    }

    pub fn empty(torus: &GridTorus) -> Self {
        Self {
            torus: Arc::new(torus.clone()),
            mask: vec![false; torus.num_points()],
        }
    }

    pub fn contains(&self, point: usize) -> bool {
        self.mask[point]
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.mask.iter().zip(&other.mask).all(|(&a, &b)| !a || b)
    }

    pub fn union(&self, other: &Self) -> Self {
        Self {
            torus: self.torus.clone(),
            mask: self.mask.iter().zip(&other.mask).map(|(&a, &b)| a || b).collect(),
        }
    }

    pub fn intersection(&self, other: &Self) -> Self {
        Self {
            torus: self.torus.clone(),
            mask: self.mask.iter().zip(&other.mask).map(|(&a, &b)| a && b).collect(),
        }
    }

    /// Grow by one application of the derivative stencil: a point joins when
    /// any point its stencil reads from is in the mask.
    pub fn dilate(&self) -> Self {
        let t = &self.torus;
        let mask = (0..t.num_points())
            .map(|p| {
                self.mask[p]
                    || (0..t.dim()).any(|axis| stencil_points(t, p, axis).any(|q| self.mask[q]))
            })
            .collect();
        Self {
            torus: self.torus.clone(),
            mask,
        }
    }

    pub fn dilate_by(&self, times: usize) -> Self {
        (0..times).fold(self.clone(), |m, _| m.dilate())
    }

    /// Smallest number of dilations of `outer` containing `self`, searching
    /// up to `max` steps.
    pub fn dilation_needed(&self, outer: &Self, max: usize) -> Option<usize> {
        let mut grown = outer.clone();
        for k in 0..=max {
            if self.is_subset_of(&grown) {
                return Some(k);
            }
            grown = grown.dilate();
        }
        None
    }
}
