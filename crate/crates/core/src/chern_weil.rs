//! Invariant polynomials, Chern forms and the transgression forms built from
//! one- and two-parameter families of connections.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::algebra::{GradedForm, ParamForm};
use crate::connection::{
    linear_path, Connection, ConnectionPath, StraightHomotopy, TwoParamFamily,
};
use crate::error::{Error, Result};
use crate::forms::{MatrixForm, SupportMask};
use crate::quadrature::simpson_weights;
use crate::torus::GridTorus;

/// The polarised `p`-th elementary symmetric function of the eigenvalues of
/// `(i/2π)·X`, so that `P_p(F, …, F)` is the degree-`2p` part of
/// `det(1 + (i/2π)F)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct InvariantPolynomial {
    degree: usize,
    rank: usize,
}

impl InvariantPolynomial {
    pub fn new(degree: usize, rank: usize) -> Result<Self> {
        if degree == 0 || rank == 0 {
            return Err(Error::Polynomial(format!(
                "degree and rank must be positive (got p = {degree}, n = {rank})"
            )));
        }
        Ok(Self { degree, rank })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `(i/2π)^p / p!`.
    pub fn normalization(&self) -> Complex64 {
        let factorial: f64 = (1..=self.degree).map(|k| k as f64).product();
        Complex64::new(0.0, 1.0 / (2.0 * PI)).powu(self.degree as u32) / factorial
    }
}

/// Cycle decomposition of every permutation of `0..p`, as lists of cycles
/// (each starting at its smallest element) together with the sign.
fn permutation_cycles(p: usize) -> Vec<(i64, Vec<Vec<usize>>)> {
    let mut perms = Vec::new();
    let mut current: Vec<usize> = (0..p).collect();
    heap_permutations(p, &mut current, &mut perms);
    perms
        .into_iter()
        .map(|sigma| {
            let mut seen = vec![false; p];
            let mut cycles = Vec::new();
            for start in 0..p {
                if seen[start] {
                    continue;
                }
                let mut cycle = Vec::new();
                let mut i = start;
                while !seen[i] {
                    seen[i] = true;
                    cycle.push(i);
                    i = sigma[i];
                }
                cycles.push(cycle);
            }
            let sign = if (p - cycles.len()).is_multiple_of(2) { 1 } else { -1 };
            (sign, cycles)
        })
        .collect()
}

fn heap_permutations(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if k <= 1 {
        out.push(a.clone());
        return;
    }
    for i in 0..k - 1 {
        heap_permutations(k - 1, a, out);
        if k.is_multiple_of(2) {
            a.swap(i, k - 1);
        } else {
            a.swap(0, k - 1);
        }
    }
    heap_permutations(k - 1, a, out);
}

/// Lexicographically smallest rotation.
fn canonical_rotation(seq: &[usize]) -> Vec<usize> {
    (0..seq.len())
        .map(|r| seq[r..].iter().chain(&seq[..r]).copied().collect::<Vec<_>>())
        .min()
        .unwrap_or_default()
}

/// Evaluate `P(args…)` as `(i/2π)^p/p! · Σ_σ sgn σ Π_cycles tr(Π X_i)`.
///
/// Arguments passed as the same reference are recognised, so repeated
/// cycle traces and monomials are computed once. At most one argument may
/// have odd degree.
pub fn invariant_poly<T: GradedForm>(poly: &InvariantPolynomial, args: &[&T]) -> Result<T> {
    let p = poly.degree;
    if args.len() != p {
        return Err(Error::Polynomial(format!(
            "P_{p} takes {p} arguments, got {}",
            args.len()
        )));
    }
    for a in args {
        if a.rank() != poly.rank {
            return Err(Error::RankMismatch(poly.rank, a.rank()));
        }
    }
    let odd = args.iter().filter(|a| a.degree() % 2 == 1).count();
    if odd > 1 {
        return Err(Error::Polynomial(format!(
            "{odd} odd-degree arguments; at most one is supported"
        )));
    }

    let class: Vec<usize> = (0..p)
        .map(|i| (0..=i).find(|&j| std::ptr::eq(args[j], args[i])).unwrap())
        .collect();

    let mut monomials: BTreeMap<Vec<Vec<usize>>, i64> = BTreeMap::new();
    for (sign, cycles) in permutation_cycles(p) {
        let mut key: Vec<Vec<usize>> = cycles
            .iter()
            .map(|c| canonical_rotation(&c.iter().map(|&i| class[i]).collect::<Vec<_>>()))
            .collect();
        key.sort();
        *monomials.entry(key).or_insert(0) += sign;
    }

    let mut traces: HashMap<Vec<usize>, T> = HashMap::new();
    let mut result: Option<T> = None;
    for (key, coef) in &monomials {
        if *coef == 0 {
            continue;
        }
        let mut term: Option<T> = None;
        for cycle in key {
            if !traces.contains_key(cycle) {
                let mut prod = args[cycle[0]].clone();
                for &c in &cycle[1..] {
                    prod = prod.wedge(args[c])?;
                }
                traces.insert(cycle.clone(), prod.trace());
            }
            let tr = &traces[cycle];
            term = Some(match term {
                None => tr.clone(),
                Some(t) => t.wedge(tr)?,
            });
        }
        let term = term.expect("every permutation has a cycle");
        match &mut result {
            None => result = Some(term.scale(Complex64::new(*coef as f64, 0.0))),
            Some(acc) => acc.axpy(Complex64::new(*coef as f64, 0.0), &term)?,
        }
    }
    Ok(result
        .expect("at least one monomial")
        .scale(poly.normalization()))
}

/// `c_p = P_p(F, …, F)`; the canonical zero when `2p` exceeds the dimension.
pub fn chern_form(c: &Connection, p: usize) -> Result<MatrixForm> {
    let poly = InvariantPolynomial::new(p, c.rank())?;
    if 2 * p > c.torus().dim() {
        return Ok(MatrixForm::zeros_on(c.form().torus_arc().clone(), 2 * p, 1));
    }
    let f = c.curvature();
    let args = vec![&f; p];
    invariant_poly(&poly, &args)
}

fn canonical_zero(torus: &Arc<GridTorus>, degree: usize) -> MatrixForm {
    MatrixForm::zeros_on(torus.clone(), degree, 1)
}

/// `η_p = p ∫_0^1 P_p(dA_t/dt, F_t, …, F_t) dt` by composite Simpson.
pub fn path_transgression(path: &ConnectionPath, p: usize) -> Result<MatrixForm> {
    let poly = InvariantPolynomial::new(p, path.rank())?;
    let torus = path.at(0.0).form().torus_arc().clone();
    let mut acc = canonical_zero(&torus, 2 * p - 1);
    if 2 * p - 1 > torus.dim() {
        return Ok(acc);
    }
    let weights = simpson_weights(path.samples())?;
    for (j, w) in weights.iter().enumerate() {
        let v = path.velocity(j);
        if v.norm_inf() == 0.0 {
            continue;
        }
        let f = path.sample(j).curvature();
        let mut args = vec![&f; p];
        args[0] = &v;
        let term = invariant_poly(&poly, &args)?;
        acc.axpy(Complex64::new(w * p as f64, 0.0), &term)?;
    }
    Ok(acc)
}

/// Curvature of `d + A_t` on `I × X`: `F_t + dt ∧ ∂_tA_t`.
pub fn path_product_curvature(path: &ConnectionPath, t: f64) -> Result<ParamForm> {
    ParamForm::new(1, 2, vec![(0, path.at(t).curvature()), (1, path.velocity_at(t))])
}

/// Curvature of `d + A_{s,t}` on `I² × X`:
/// `F_{s,t} + dt ∧ ∂_tA + ds ∧ ∂_sA` (bit 0 = `t`, bit 1 = `s`).
pub fn family_product_curvature(f: &TwoParamFamily, s: f64, t: f64) -> Result<ParamForm> {
    ParamForm::new(
        2,
        2,
        vec![
            (0, f.at(s, t).curvature()),
            (0b01, f.d_dt(s, t)),
            (0b10, f.d_ds(s, t)),
        ],
    )
}

/// Integration along `I` of forms on `I × X` sampled at Simpson nodes:
/// the `dt`-coefficients are integrated, the rest is dropped.
pub fn fiber_integrate_interval<I>(samples: I) -> Result<MatrixForm>
where
    I: IntoIterator<Item = ParamForm>,
    I::IntoIter: ExactSizeIterator,
{
    let iter = samples.into_iter();
    let weights = simpson_weights(iter.len())?;
    let mut acc: Option<MatrixForm> = None;
    let mut fallback: Option<(Arc<GridTorus>, usize, usize)> = None;
    for (w, form) in weights.iter().zip(iter) {
        if form.params() != 1 {
            return Err(Error::Quadrature("fiber integration over I needs one parameter".into()));
        }
        let degree = form.degree();
        let rank = form.rank();
        if degree == 0 {
            return Err(Error::DegreeMismatch { expected: 1, found: 0 });
        }
        if fallback.is_none() {
            if let Some(part) = form.part(0) {
                fallback = Some((part.torus_arc().clone(), degree - 1, rank));
            }
        }
        let Some(part) = form.into_part(1) else { continue };
        match &mut acc {
            None => acc = Some(part.scale_real(*w)),
            Some(a) => {
                if a.degree() != part.degree() {
                    return Err(Error::DegreeMismatch {
                        expected: a.degree(),
                        found: part.degree(),
                    });
                }
                a.axpy(Complex64::new(*w, 0.0), &part)?
            }
        }
    }
    match acc {
        Some(a) => Ok(a),
        None => fallback
            .map(|(torus, degree, rank)| MatrixForm::zeros_on(torus, degree, rank))
            .ok_or_else(|| Error::Quadrature("no sample carries any component".into())),
    }
}

/// `TP(∇̃)`: fiber integral of `c_p` of the product connection on `I × X`
/// for the convex path between `a0` and `a1`.
pub fn transgression_convex(a0: &Connection, a1: &Connection, p: usize, samples: usize) -> Result<MatrixForm> {
    let path = linear_path(a0, a1, samples)?;
    let poly = InvariantPolynomial::new(p, a0.rank())?;
    let torus = a0.form().torus_arc();
    if 2 * p - 1 > torus.dim() {
        return Ok(canonical_zero(torus, 2 * p - 1));
    }
    let nodes = path.nodes();
    let forms: Vec<ParamForm> = nodes
        .iter()
        .map(|&t| {
            let fbar = path_product_curvature(&path, t)?;
            invariant_poly(&poly, &vec![&fbar; p])
        })
        .collect::<Result<_>>()?;
    let out = fiber_integrate_interval(forms)?;
    if out.degree() != 2 * p - 1 {
        return Ok(canonical_zero(torus, 2 * p - 1));
    }
    Ok(out)
}

/// `∫∫ P_p(F̄, …, F̄)` over `(s,t) ∈ I²`: the `dt∧ds` coefficient of `c_p` of
/// the family viewed as a connection on `I² × X`.
pub fn double_transgression(f: &TwoParamFamily, p: usize) -> Result<MatrixForm> {
    let poly = InvariantPolynomial::new(p, f.rank())?;
    let torus = f.at(0.0, 0.0).form().torus_arc().clone();
    let mut acc = canonical_zero(&torus, 2 * p - 2);
    if p < 2 || 2 * p - 2 > torus.dim() {
        return Ok(acc);
    }
    let (ws, wt) = (simpson_weights(f.s_samples())?, simpson_weights(f.t_samples())?);
    let (sn, tn) = (f.s_nodes(), f.t_nodes());
    for (i, &s) in sn.iter().enumerate() {
        for (j, &t) in tn.iter().enumerate() {
            let fbar = family_product_curvature(f, s, t)?;
            let c = invariant_poly(&poly, &vec![&fbar; p])?;
            if let Some(part) = c.part(0b11) {
                acc.axpy(Complex64::new(ws[i] * wt[j], 0.0), part)?;
            }
        }
    }
    Ok(acc)
}

/// A residual of an exact identity together with the size of its right-hand
/// side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StokesResidual {
    pub residual: f64,
    pub reference_norm: f64,
}

/// `‖d TP(∇̃) − (c_p(A_1) − c_p(A_0))‖∞`.
pub fn transgression_stokes(a0: &Connection, a1: &Connection, p: usize, samples: usize) -> Result<StokesResidual> {
    let tp = transgression_convex(a0, a1, p, samples)?;
    let rhs = chern_form(a1, p)?.sub(&chern_form(a0, p)?)?;
    Ok(StokesResidual {
        residual: tp.exterior_derivative().distance_inf(&rhs)?,
        reference_norm: rhs.norm_inf(),
    })
}

/// `‖d DT − (η_p(s=1) − η_p(s=0))‖∞`; needs `t`-endpoints fixed in `s`.
pub fn double_transgression_stokes(f: &TwoParamFamily, p: usize) -> Result<StokesResidual> {
    if !f.endpoints_fixed() {
        let dev = f.endpoint_deviation();
        if dev > 1e-14 {
            return Err(Error::EndpointsNotFixed(dev));
        }
    }
    let dt = double_transgression(f, p)?;
    let rhs = path_transgression(&f.slice_at(1.0), p)?.sub(&path_transgression(&f.slice_at(0.0), p)?)?;
    Ok(StokesResidual {
        residual: dt.exterior_derivative().distance_inf(&rhs)?,
        reference_norm: rhs.norm_inf(),
    })
}

/// The form `β` with `dβ = TP(∇̃) − η_p`, and how well that holds on the grid.
#[derive(Clone, Debug)]
pub struct BetaWitness {
    pub beta: MatrixForm,
    /// `‖dβ − (TP(∇̃) − η_p)‖∞`.
    pub residual: f64,
    /// `‖TP(∇̃) − η_p‖∞`.
    pub reference_norm: f64,
    /// Larger of the two endpoint flatness residuals.
    pub endpoint_flatness: f64,
}

/// `β` as the double transgression of the straight-line homotopy from `γ`
/// to the convex path between its endpoints.
pub fn beta_form(gamma: &ConnectionPath, p: usize, s_samples: usize, flat_tolerance: f64) -> Result<BetaWitness> {
    let (a0, a1) = gamma.endpoints();
    let endpoint_flatness = a0.flatness_residual().max(a1.flatness_residual());
    if endpoint_flatness > flat_tolerance {
        return Err(Error::NotFlat {
            residual: endpoint_flatness,
            tolerance: flat_tolerance,
        });
    }
    let homotopy = TwoParamFamily::new(
        gamma.torus(),
        gamma.rank(),
        s_samples,
        gamma.samples(),
        Arc::new(StraightHomotopy::new(gamma)?),
    )?
    .require_fixed_endpoints()?;
    let beta = double_transgression(&homotopy, p)?;
    let tp = transgression_convex(&a0, &a1, p, gamma.samples())?;
    let rhs = tp.sub(&path_transgression(gamma, p)?)?;
    Ok(BetaWitness {
        residual: beta.exterior_derivative().distance_inf(&rhs)?,
        reference_norm: rhs.norm_inf(),
        beta,
        endpoint_flatness,
    })
}

/// Support bookkeeping for a connection supported in a box.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompactSupportReport {
    pub mask_points: usize,
    pub chern_support_points: usize,
    pub transgression_support_points: usize,
    /// Dilations of the mask needed to contain `supp c_p`.
    pub chern_dilation: Option<usize>,
    /// Dilations of the mask needed to contain `supp η_p` of the path from `d`.
    pub transgression_dilation: Option<usize>,
    pub chern_contained: bool,
    pub transgression_contained: bool,
}

/// Both `c_p(c)` and the transgression from the trivial connection use one
/// derivative, so their supports must sit inside the mask dilated once.
pub fn compact_support_check(
    c: &Connection,
    mask: &SupportMask,
    p: usize,
    samples: usize,
    threshold: f64,
) -> Result<CompactSupportReport> {
    if !c.form().support(threshold).is_subset_of(mask) {
        return Err(Error::Support("connection coefficients are non-zero outside the mask".into()));
    }
    let cp = chern_form(c, p)?.support(threshold);
    let zero = Connection::zero(c.torus(), c.rank());
    let eta = path_transgression(&linear_path(&zero, c, samples)?, p)?.support(threshold);
    let chern_dilation = cp.dilation_needed(mask, 4);
    let transgression_dilation = eta.dilation_needed(mask, 4);
    Ok(CompactSupportReport {
        mask_points: mask.count(),
        chern_support_points: cp.count(),
        transgression_support_points: eta.count(),
        chern_contained: chern_dilation.is_some_and(|k| k <= 1),
        transgression_contained: transgression_dilation.is_some_and(|k| k <= 1),
        chern_dilation,
        transgression_dilation,
    })
}
