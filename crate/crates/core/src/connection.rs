//! Connections `d + A` on the trivial rank-`n` bundle, their curvature, gauge
//! transformations, and one- and two-parameter families of connections.
//!
//! Families are evaluated lazily through [`PathSource`] / [`FamilySource`]:
//! only the samples a computation touches are ever materialised. A family
//! may supply analytic parameter derivatives; otherwise second-order finite
//! differences at the node spacing are used.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forms::MatrixForm;
use crate::matrix;
use crate::quadrature::simpson_weights;
use crate::torus::{nodes, GridTorus};

#[derive(Clone, Debug)]
pub struct Connection {
    form: MatrixForm,
}

impl Connection {
    pub fn new(form: MatrixForm) -> Result<Self> {
        if form.degree() != 1 {
            return Err(Error::DegreeMismatch {
                expected: 1,
                found: form.degree(),
            });
        }
        Ok(Self { form })
    }

    pub fn zero(torus: &GridTorus, rank: usize) -> Self {
        Self {
            form: MatrixForm::zeros(torus, 1, rank),
        }
    }

    pub fn form(&self) -> &MatrixForm {
        &self.form
    }

    pub fn into_form(self) -> MatrixForm {
        self.form
    }

    pub fn rank(&self) -> usize {
        self.form.rank()
    }

    pub fn torus(&self) -> &GridTorus {
        self.form.torus()
    }

    /// `F = dA + A∧A`.
    pub fn curvature(&self) -> MatrixForm {
        curvature_of(&self.form)
    }

    /// `‖F‖∞`.
    pub fn flatness_residual(&self) -> f64 {
        self.curvature().norm_inf()
    }
}

pub(crate) fn curvature_of(a: &MatrixForm) -> MatrixForm {
    let mut f = a.exterior_derivative();
    let aa = a.wedge(a).expect("a form wedges with itself");
    f.axpy(Complex64::new(1.0, 0.0), &aa)
        .expect("dA and A∧A share shape");
    f
}

/// Covariant derivative of a matrix form `B` of degree `k` along `A`:
/// `dB + A∧B − (−1)^k B∧A`.
pub(crate) fn covariant_derivative(a: &MatrixForm, b: &MatrixForm) -> Result<MatrixForm> {
    let mut out = b.exterior_derivative();
    out.axpy(Complex64::new(1.0, 0.0), &a.wedge(b)?)?;
    let sign = if b.degree().is_multiple_of(2) { -1.0 } else { 1.0 };
    out.axpy(Complex64::new(sign, 0.0), &b.wedge(a)?)?;
    Ok(out)
}

/// A map `X → GL_n(ℂ)` sampled on the grid, optionally with its exact
/// differential. Without one, `dg` is taken by central differences.
#[derive(Clone, Debug)]
pub struct GaugeMap {
    values: MatrixForm,
    derivative: Option<MatrixForm>,
}

impl GaugeMap {
    pub fn sampled(values: MatrixForm) -> Result<Self> {
        if values.degree() != 0 {
            return Err(Error::DegreeMismatch {
                expected: 0,
                found: values.degree(),
            });
        }
        Ok(Self {
            values,
            derivative: None,
        })
    }

    pub fn with_derivative(values: MatrixForm, derivative: MatrixForm) -> Result<Self> {
        if values.degree() != 0 || derivative.degree() != 1 {
            return Err(Error::DegreeMismatch {
                expected: 0,
                found: values.degree(),
            });
        }
        if values.rank() != derivative.rank() {
            return Err(Error::RankMismatch(values.rank(), derivative.rank()));
        }
        Ok(Self {
            values,
            derivative: Some(derivative),
        })
    }

    pub fn values(&self) -> &MatrixForm {
        &self.values
    }

    pub fn differential(&self) -> MatrixForm {
        match &self.derivative {
            Some(d) => d.clone(),
            None => self.values.exterior_derivative(),
        }
    }

    /// Pointwise inverse with the largest condition number seen.
    pub fn inverse(&self) -> Result<(MatrixForm, f64)> {
        let n = self.values.rank();
        let torus = self.values.torus();
        let mut inv = MatrixForm::zeros_on(self.values.torus_arc().clone(), 0, n);
        let mut cond: f64 = 0.0;
        for p in 0..torus.num_points() {
            let g = self.values.coeff(p, 0);
            let (gi, pivot) = matrix::inverse(g, n).ok_or(Error::SingularGauge { point: p, pivot: 0.0 })?;
            if pivot < 1e-12 {
                return Err(Error::SingularGauge { point: p, pivot });
            }
            cond = cond.max(matrix::norm_one_inf(g, n) * matrix::norm_one_inf(&gi, n));
            inv.coeff_mut(p, 0).copy_from_slice(&gi);
        }
        Ok((inv, cond))
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GaugeReport {
    pub max_condition: f64,
}

/// `A ↦ g A g⁻¹ − (dg) g⁻¹`.
pub fn gauge_transform(c: &Connection, g: &GaugeMap) -> Result<(Connection, GaugeReport)> {
    if c.rank() != g.values.rank() {
        return Err(Error::RankMismatch(c.rank(), g.values.rank()));
    }
    if !c.form.same_grid(&g.values) {
        return Err(Error::TorusMismatch);
    }
    let (ginv, cond) = g.inverse()?;
    let gag = g.values.wedge(&c.form)?.wedge(&ginv)?;
    let dg_ginv = g.differential().wedge(&ginv)?;
    let a = gag.sub(&dg_ginv)?;
    Ok((Connection::new(a)?, GaugeReport { max_condition: cond }))
}

/// `−(dg) g⁻¹`, the gauge transform of the trivial connection.
pub fn pure_gauge_connection(g: &GaugeMap) -> Result<(Connection, GaugeReport)> {
    let zero = Connection {
        form: MatrixForm::zeros_on(g.values.torus_arc().clone(), 1, g.values.rank()),
    };
    gauge_transform(&zero, g)
}

/// Lazily evaluated one-parameter family `t ↦ A_t`, `t ∈ [0,1]`.
pub trait PathSource: Send + Sync {
    fn connection(&self, t: f64) -> MatrixForm;

    /// Exact `dA_t/dt` when available.
    fn velocity(&self, _t: f64) -> Option<MatrixForm> {
        None
    }

    /// Whether the family can be evaluated off its original nodes.
    fn resampleable(&self) -> bool {
        true
    }
}

/// Central difference (one-sided second order at the ends of `[0,1]`).
fn param_derivative(f: impl Fn(f64) -> MatrixForm, x: f64, step: f64) -> MatrixForm {
    let eps = 1e-12;
    let inv = 1.0 / (2.0 * step);
    let comb = |terms: &[(f64, f64)]| {
        let forms: Vec<(Complex64, MatrixForm)> = terms
            .iter()
            .map(|&(w, at)| (Complex64::new(w * inv, 0.0), f(at)))
            .collect();
        let refs: Vec<(Complex64, &MatrixForm)> = forms.iter().map(|(c, m)| (*c, m)).collect();
        MatrixForm::combination(&refs).expect("family samples share shape")
    };
    if x - step < -eps {
        comb(&[(-3.0, x), (4.0, x + step), (-1.0, x + 2.0 * step)])
    } else if x + step > 1.0 + eps {
        comb(&[(3.0, x), (-4.0, x - step), (1.0, x - 2.0 * step)])
    } else {
        comb(&[(1.0, x + step), (-1.0, x - step)])
    }
}

/// A path of connections sampled at Simpson nodes `t_j = j/(m−1)`.
#[derive(Clone)]
pub struct ConnectionPath {
    torus: Arc<GridTorus>,
    rank: usize,
    samples: usize,
    source: Arc<dyn PathSource>,
    flat_tolerance: Option<f64>,
}

impl fmt::Debug for ConnectionPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConnectionPath")
            .field("resolution", &self.torus.resolution())
            .field("rank", &self.rank)
            .field("samples", &self.samples)
            .field("flat_tolerance", &self.flat_tolerance)
            .finish()
    }
}

impl ConnectionPath {
    pub fn new(torus: &GridTorus, rank: usize, samples: usize, source: Arc<dyn PathSource>) -> Result<Self> {
        simpson_weights(samples)?;
        let probe = source.connection(0.0);
        if probe.degree() != 1 {
            return Err(Error::DegreeMismatch {
                expected: 1,
                found: probe.degree(),
            });
        }
        if probe.rank() != rank {
            return Err(Error::RankMismatch(probe.rank(), rank));
        }
        if probe.torus() != torus {
            return Err(Error::TorusMismatch);
        }
        Ok(Self {
            torus: probe.torus_arc().clone(),
            rank,
            samples,
            source,
            flat_tolerance: None,
        })
    }

    /// Path through explicitly stored samples (velocity by finite differences
    /// unless `velocities` is given).
    pub fn from_samples(samples: Vec<Connection>, velocities: Option<Vec<MatrixForm>>) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::Quadrature("empty path".into()))?
            .clone();
        for s in &samples {
            if !s.form.same_grid(&first.form) {
                return Err(Error::TorusMismatch);
            }
            if s.rank() != first.rank() {
                return Err(Error::RankMismatch(s.rank(), first.rank()));
            }
        }
        if let Some(v) = &velocities {
            if v.len() != samples.len() {
                return Err(Error::Quadrature("velocity count differs from sample count".into()));
            }
        }
        let m = samples.len();
        let source = StoredSamples {
            samples: samples.into_iter().map(|c| c.form).collect(),
            velocities,
        };
        Self::new(first.torus(), first.rank(), m, Arc::new(source))
    }

    /// Verify every sample is flat to `tolerance` and record the declaration.
    pub fn declare_flat(mut self, tolerance: f64) -> Result<Self> {
        let residual = self.max_flatness_residual();
        if residual > tolerance {
            return Err(Error::NotFlat { residual, tolerance });
        }
        self.flat_tolerance = Some(tolerance);
        Ok(self)
    }

    pub fn max_flatness_residual(&self) -> f64 {
        (0..self.samples)
            .map(|j| self.sample(j).flatness_residual())
            .fold(0.0, f64::max)
    }

    pub fn flat_tolerance(&self) -> Option<f64> {
        self.flat_tolerance
    }

    pub fn torus(&self) -> &GridTorus {
        &self.torus
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn nodes(&self) -> Vec<f64> {
        nodes(self.samples)
    }

    pub fn step(&self) -> f64 {
        1.0 / (self.samples - 1) as f64
    }

    /// The same family sampled with `m` nodes. Stored-sample paths cannot be
    /// resampled.
    pub fn with_samples(&self, m: usize) -> Result<Self> {
        simpson_weights(m)?;
        if !self.source.resampleable() && m != self.samples {
            return Err(Error::Quadrature("stored-sample paths cannot be resampled".into()));
        }
        let mut out = self.clone();
        out.samples = m;
        Ok(out)
    }

    pub fn at(&self, t: f64) -> Connection {
        Connection {
            form: self.source.connection(t),
        }
    }

    pub fn sample(&self, j: usize) -> Connection {
        self.at(j as f64 * self.step())
    }

    pub fn endpoints(&self) -> (Connection, Connection) {
        (self.at(0.0), self.at(1.0))
    }

    /// `dA_t/dt` at node `j`.
    pub fn velocity(&self, j: usize) -> MatrixForm {
        self.velocity_at(j as f64 * self.step())
    }

    pub fn velocity_at(&self, t: f64) -> MatrixForm {
        match self.source.velocity(t) {
            Some(v) => v,
            None => param_derivative(|x| self.source.connection(x), t, self.step()),
        }
    }

    pub fn source(&self) -> &Arc<dyn PathSource> {
        &self.source
    }
}

struct StoredSamples {
    samples: Vec<MatrixForm>,
    velocities: Option<Vec<MatrixForm>>,
}

impl StoredSamples {
    fn index(&self, t: f64) -> usize {
        let m = self.samples.len();
        let x = t * (m - 1) as f64;
        let j = x.round();
        assert!(
            (x - j).abs() < 1e-9 && j >= 0.0 && (j as usize) < m,
            "stored path sampled off its nodes at t = {t}"
        );
        j as usize
    }
}

impl PathSource for StoredSamples {
    fn connection(&self, t: f64) -> MatrixForm {
        self.samples[self.index(t)].clone()
    }

    fn velocity(&self, t: f64) -> Option<MatrixForm> {
        self.velocities.as_ref().map(|v| v[self.index(t)].clone())
    }

    fn resampleable(&self) -> bool {
        false
    }
}

/// `A_t = A_0 + t (A_1 − A_0)` with exact velocity; the endpoints are
/// returned bitwise.
pub struct LinearSource {
    a0: MatrixForm,
    a1: MatrixForm,
    delta: MatrixForm,
}

impl LinearSource {
    pub fn new(a0: &Connection, a1: &Connection) -> Result<Self> {
        let delta = a1.form.sub(&a0.form)?;
        Ok(Self {
            a0: a0.form.clone(),
            a1: a1.form.clone(),
            delta,
        })
    }

    pub fn delta(&self) -> &MatrixForm {
        &self.delta
    }
}

impl PathSource for LinearSource {
    fn connection(&self, t: f64) -> MatrixForm {
        if t == 0.0 {
            return self.a0.clone();
        }
        if t == 1.0 {
            return self.a1.clone();
        }
        let mut a = self.a0.clone();
        a.axpy(Complex64::new(t, 0.0), &self.delta)
            .expect("endpoints share shape");
        a
    }

    fn velocity(&self, _t: f64) -> Option<MatrixForm> {
        Some(self.delta.clone())
    }
}

/// Convex combination `∇_0 + t(∇_1 − ∇_0)`.
pub fn linear_path(a0: &Connection, a1: &Connection, samples: usize) -> Result<ConnectionPath> {
    if !a0.form.same_grid(&a1.form) {
        return Err(Error::TorusMismatch);
    }
    if a0.rank() != a1.rank() {
        return Err(Error::RankMismatch(a0.rank(), a1.rank()));
    }
    ConnectionPath::new(a0.torus(), a0.rank(), samples, Arc::new(LinearSource::new(a0, a1)?))
}

/// Constant path at `a`.
pub fn constant_path(a: &Connection, samples: usize) -> Result<ConnectionPath> {
    linear_path(a, a, samples)
}

/// Path defined by a closure; handy for tests and ad-hoc families.
pub struct FnPath<F, V> {
    pub connection: F,
    pub velocity: Option<V>,
}

impl<F, V> PathSource for FnPath<F, V>
where
    F: Fn(f64) -> MatrixForm + Send + Sync,
    V: Fn(f64) -> MatrixForm + Send + Sync,
{
    fn connection(&self, t: f64) -> MatrixForm {
        (self.connection)(t)
    }

    fn velocity(&self, t: f64) -> Option<MatrixForm> {
        self.velocity.as_ref().map(|v| v(t))
    }
}

/// Lazily evaluated two-parameter family `(s, t) ↦ A_{s,t}`.
pub trait FamilySource: Send + Sync {
    fn connection(&self, s: f64, t: f64) -> MatrixForm;

    fn d_dt(&self, _s: f64, _t: f64) -> Option<MatrixForm> {
        None
    }

    fn d_ds(&self, _s: f64, _t: f64) -> Option<MatrixForm> {
        None
    }

    fn d_ds_dt(&self, _s: f64, _t: f64) -> Option<MatrixForm> {
        None
    }

    /// Sources that ignore `s` may return false to skip redundant sweeps.
    fn depends_on_s(&self) -> bool {
        true
    }
}

#[derive(Clone)]
pub struct TwoParamFamily {
    torus: Arc<GridTorus>,
    rank: usize,
    s_samples: usize,
    t_samples: usize,
    source: Arc<dyn FamilySource>,
    flat_tolerance: Option<f64>,
    endpoints_fixed: bool,
}

impl fmt::Debug for TwoParamFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TwoParamFamily")
            .field("resolution", &self.torus.resolution())
            .field("rank", &self.rank)
            .field("s_samples", &self.s_samples)
            .field("t_samples", &self.t_samples)
            .field("flat_tolerance", &self.flat_tolerance)
            .field("endpoints_fixed", &self.endpoints_fixed)
            .finish()
    }
}

impl TwoParamFamily {
    pub fn new(
        torus: &GridTorus,
        rank: usize,
        s_samples: usize,
        t_samples: usize,
        source: Arc<dyn FamilySource>,
    ) -> Result<Self> {
        simpson_weights(s_samples)?;
        simpson_weights(t_samples)?;
        let probe = source.connection(0.0, 0.0);
        if probe.degree() != 1 {
            return Err(Error::DegreeMismatch {
                expected: 1,
                found: probe.degree(),
            });
        }
        if probe.rank() != rank {
            return Err(Error::RankMismatch(probe.rank(), rank));
        }
        if probe.torus() != torus {
            return Err(Error::TorusMismatch);
        }
        Ok(Self {
            torus: probe.torus_arc().clone(),
            rank,
            s_samples,
            t_samples,
            source,
            flat_tolerance: None,
            endpoints_fixed: false,
        })
    }

    pub fn declare_flat(mut self, tolerance: f64) -> Result<Self> {
        let residual = self.max_flatness_residual();
        if residual > tolerance {
            return Err(Error::NotFlat { residual, tolerance });
        }
        self.flat_tolerance = Some(tolerance);
        Ok(self)
    }

    pub fn max_flatness_residual(&self) -> f64 {
        let sn = if self.source.depends_on_s() { self.s_nodes() } else { vec![0.0] };
        let tn = self.t_nodes();
        let mut worst: f64 = 0.0;
        for &s in &sn {
            for &t in &tn {
                worst = worst.max(self.at(s, t).flatness_residual());
            }
        }
        worst
    }

    /// Largest deviation of `A_{s,0}` and `A_{s,1}` from their `s = 0` values.
    pub fn endpoint_deviation(&self) -> f64 {
        let base0 = self.source.connection(0.0, 0.0);
        let base1 = self.source.connection(0.0, 1.0);
        let mut worst: f64 = 0.0;
        for s in self.s_nodes() {
            let d0 = self.source.connection(s, 0.0).distance_inf(&base0).unwrap_or(f64::INFINITY);
            let d1 = self.source.connection(s, 1.0).distance_inf(&base1).unwrap_or(f64::INFINITY);
            worst = worst.max(d0).max(d1);
        }
        worst
    }

    /// Verify the `t`-endpoints do not move with `s` and record it.
    pub fn require_fixed_endpoints(mut self) -> Result<Self> {
        let dev = self.endpoint_deviation();
        if dev > 1e-14 {
            return Err(Error::EndpointsNotFixed(dev));
        }
        self.endpoints_fixed = true;
        Ok(self)
    }

    pub fn endpoints_fixed(&self) -> bool {
        self.endpoints_fixed
    }

    pub fn flat_tolerance(&self) -> Option<f64> {
        self.flat_tolerance
    }

    pub fn torus(&self) -> &GridTorus {
        &self.torus
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn s_samples(&self) -> usize {
        self.s_samples
    }

    pub fn t_samples(&self) -> usize {
        self.t_samples
    }

    pub fn s_nodes(&self) -> Vec<f64> {
        nodes(self.s_samples)
    }

    pub fn t_nodes(&self) -> Vec<f64> {
        nodes(self.t_samples)
    }

    pub fn with_samples(&self, s_samples: usize, t_samples: usize) -> Result<Self> {
        simpson_weights(s_samples)?;
        simpson_weights(t_samples)?;
        let mut out = self.clone();
        out.s_samples = s_samples;
        out.t_samples = t_samples;
        Ok(out)
    }

    fn ds(&self) -> f64 {
        1.0 / (self.s_samples - 1) as f64
    }

    fn dt(&self) -> f64 {
        1.0 / (self.t_samples - 1) as f64
    }

    pub fn at(&self, s: f64, t: f64) -> Connection {
        Connection {
            form: self.source.connection(s, t),
        }
    }

    pub fn d_dt(&self, s: f64, t: f64) -> MatrixForm {
        self.source
            .d_dt(s, t)
            .unwrap_or_else(|| param_derivative(|x| self.source.connection(s, x), t, self.dt()))
    }

    pub fn d_ds(&self, s: f64, t: f64) -> MatrixForm {
        self.source
            .d_ds(s, t)
            .unwrap_or_else(|| param_derivative(|x| self.source.connection(x, t), s, self.ds()))
    }

    pub fn d_ds_dt(&self, s: f64, t: f64) -> MatrixForm {
        self.source
            .d_ds_dt(s, t)
            .unwrap_or_else(|| param_derivative(|x| self.d_dt(x, t), s, self.ds()))
    }

    /// The path `t ↦ A_{s,t}` at an arbitrary `s`.
    pub fn slice_at(&self, s: f64) -> ConnectionPath {
        let mut path = ConnectionPath {
            torus: self.torus.clone(),
            rank: self.rank,
            samples: self.t_samples,
            source: Arc::new(SliceSource {
                family: self.clone(),
                s,
            }),
            flat_tolerance: None,
        };
        path.flat_tolerance = self.flat_tolerance;
        path
    }

    pub fn source(&self) -> &Arc<dyn FamilySource> {
        &self.source
    }
}

struct SliceSource {
    family: TwoParamFamily,
    s: f64,
}

impl PathSource for SliceSource {
    fn connection(&self, t: f64) -> MatrixForm {
        self.family.source.connection(self.s, t)
    }

    fn velocity(&self, t: f64) -> Option<MatrixForm> {
        Some(self.family.d_dt(self.s, t))
    }
}

/// Restriction to the `i`-th `s` node.
pub fn family_slice(f: &TwoParamFamily, i: usize) -> Result<ConnectionPath> {
    if i >= f.s_samples {
        return Err(Error::Quadrature(format!(
            "slice {i} out of range for {} s-samples",
            f.s_samples
        )));
    }
    Ok(f.slice_at(f.s_nodes()[i]))
}

/// Which connection the `s = 0` edge of the interpolation family sits at.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterpolationBase {
    /// `s[(1−t)A_0 + tA_1]`: the `s = 0` slice is the trivial connection.
    Trivial,
    /// `(1−s)A_0 + s[(1−t)A_0 + tA_1]`: the `s = 0` slice is constant at `A_0`.
    StartPoint,
}

struct Interpolation {
    a0: MatrixForm,
    a1: MatrixForm,
    delta: MatrixForm,
    base: InterpolationBase,
}

impl FamilySource for Interpolation {
    fn connection(&self, s: f64, t: f64) -> MatrixForm {
        match self.base {
            InterpolationBase::Trivial => {
                let mut lin = self.a0.scale_real(1.0 - t);
                lin.axpy(Complex64::new(t, 0.0), &self.a1).unwrap();
                lin.scale_real(s)
            }
            InterpolationBase::StartPoint => {
                let mut a = self.a0.clone();
                a.axpy(Complex64::new(s * t, 0.0), &self.delta).unwrap();
                a
            }
        }
    }

    fn d_dt(&self, s: f64, _t: f64) -> Option<MatrixForm> {
        Some(self.delta.scale_real(s))
    }

    fn d_ds(&self, s: f64, t: f64) -> Option<MatrixForm> {
        Some(match self.base {
            InterpolationBase::Trivial => {
                if s == 0.0 {
                    let mut lin = self.a0.scale_real(1.0 - t);
                    lin.axpy(Complex64::new(t, 0.0), &self.a1).unwrap();
                    lin
                } else {
                    self.connection(1.0, t)
                }
            }
            InterpolationBase::StartPoint => self.delta.scale_real(t),
        })
    }

    fn d_ds_dt(&self, _s: f64, _t: f64) -> Option<MatrixForm> {
        Some(self.delta.clone())
    }
}

/// The interpolation `A_{s,t} = s[(1−t)A_0 + tA_1]` (or its start-point
/// variant).
pub fn two_param_connection(
    a0: &Connection,
    a1: &Connection,
    s_samples: usize,
    t_samples: usize,
    base: InterpolationBase,
) -> Result<TwoParamFamily> {
    if !a0.form.same_grid(&a1.form) {
        return Err(Error::TorusMismatch);
    }
    if a0.rank() != a1.rank() {
        return Err(Error::RankMismatch(a0.rank(), a1.rank()));
    }
    let source = Interpolation {
        a0: a0.form.clone(),
        a1: a1.form.clone(),
        delta: a1.form.sub(&a0.form)?,
        base,
    };
    TwoParamFamily::new(a0.torus(), a0.rank(), s_samples, t_samples, Arc::new(source))
}

/// Family defined by closures.
pub struct FnFamily<F> {
    pub connection: F,
}

impl<F> FamilySource for FnFamily<F>
where
    F: Fn(f64, f64) -> MatrixForm + Send + Sync,
{
    fn connection(&self, s: f64, t: f64) -> MatrixForm {
        (self.connection)(s, t)
    }
}

/// Straight-line homotopy `H(s,t) = (1−s) A_γ(t) + s [A_0 + t(A_1−A_0)]`
/// from a path to the convex path between its endpoints.
pub struct StraightHomotopy {
    path: ConnectionPath,
    linear: LinearSource,
}

impl StraightHomotopy {
    pub fn new(path: &ConnectionPath) -> Result<Self> {
        let (a0, a1) = path.endpoints();
        Ok(Self {
            path: path.clone(),
            linear: LinearSource::new(&a0, &a1)?,
        })
    }
}

impl FamilySource for StraightHomotopy {
    fn connection(&self, s: f64, t: f64) -> MatrixForm {
        let g = self.path.at(t).form;
        if s == 0.0 || t == 0.0 || t == 1.0 {
            return g;
        }
        let lin = self.linear.connection(t);
        if s == 1.0 {
            return lin;
        }
        let mut h = g.scale_real(1.0 - s);
        h.axpy(Complex64::new(s, 0.0), &lin).unwrap();
        h
    }

    fn d_dt(&self, s: f64, t: f64) -> Option<MatrixForm> {
        let mut v = self.path.velocity_at(t).scale_real(1.0 - s);
        v.axpy(Complex64::new(s, 0.0), self.linear.delta()).unwrap();
        Some(v)
    }

    fn d_ds(&self, _s: f64, t: f64) -> Option<MatrixForm> {
        Some(self.linear.connection(t).sub(&self.path.at(t).form).unwrap())
    }

    fn d_ds_dt(&self, _s: f64, t: f64) -> Option<MatrixForm> {
        Some(self.linear.delta().sub(&self.path.velocity_at(t)).unwrap())
    }
}
