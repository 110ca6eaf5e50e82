//! Numerical experiments on flat families: endpoint rigidity of characters,
//! the variational formula for `η_p` along a two-parameter family, and
//! constancy of tertiary classes across homotopies.

use num_complex::Complex64;
use serde::Serialize;

use crate::characters::{cs_character, tertiary_class_field, tertiary_forms, CharacterValue, TertiaryOptions};
use crate::chern_weil::{double_transgression, invariant_poly, path_transgression, InvariantPolynomial};
use crate::connection::{covariant_derivative, two_param_connection, Connection, ConnectionPath, InterpolationBase, TwoParamFamily};
use crate::error::{Error, Result};
use crate::forms::MatrixForm;
use crate::quadrature::{fit_order, simpson_weights, Order};
use crate::torus::Cycle;

/// Grid and sampling data the report was produced from.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VariationInputs {
    pub resolution: Vec<usize>,
    pub rank: usize,
    pub t_samples: usize,
    pub s_samples: usize,
}

/// Outcome of one experiment. Fields that do not apply are omitted.
#[derive(Clone, Debug, Serialize)]
pub struct VariationReport {
    pub kind: String,
    pub p: usize,
    pub inputs: VariationInputs,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub s_nodes: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub cycles: Vec<String>,
    /// `values[i][k]`: the invariant at the `i`-th sample on the `k`-th cycle.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<Vec<CharacterValue>>,
    /// Largest pairwise mod-ℤ distance across samples, per cycle.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub max_distance: Vec<f64>,
    /// Norm of the form certifying the experiment at each sample.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub form_norms: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub fd_steps: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub fd_errors: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<Order>,
    pub tolerance: f64,
    /// Whether `passed` is a claim or only a record.
    pub asserted: bool,
    pub passed: bool,
}

impl VariationReport {
    fn new(kind: &str, p: usize, inputs: VariationInputs, tolerance: f64) -> Self {
        Self {
            kind: kind.to_string(),
            p,
            inputs,
            s_nodes: Vec::new(),
            cycles: Vec::new(),
            values: Vec::new(),
            max_distance: Vec::new(),
            form_norms: Vec::new(),
            fd_steps: Vec::new(),
            fd_errors: Vec::new(),
            order: None,
            tolerance,
            asserted: true,
            passed: false,
        }
    }

    /// Largest entry of `max_distance`.
    pub fn worst_distance(&self) -> f64 {
        self.max_distance.iter().copied().fold(0.0, f64::max)
    }
}

fn family_inputs(f: &TwoParamFamily) -> VariationInputs {
    VariationInputs {
        resolution: f.torus().resolution().to_vec(),
        rank: f.rank(),
        t_samples: f.t_samples(),
        s_samples: f.s_samples(),
    }
}

fn path_inputs(path: &ConnectionPath) -> VariationInputs {
    VariationInputs {
        resolution: path.torus().resolution().to_vec(),
        rank: path.rank(),
        t_samples: path.samples(),
        s_samples: 1,
    }
}

fn spread(column: impl Iterator<Item = CharacterValue> + Clone) -> f64 {
    let vals: Vec<CharacterValue> = column.collect();
    let mut worst: f64 = 0.0;
    for (i, a) in vals.iter().enumerate() {
        for b in &vals[i + 1..] {
            worst = worst.max(a.distance(b));
        }
    }
    worst
}

fn max_distances(values: &[Vec<CharacterValue>], ncycles: usize) -> Vec<f64> {
    (0..ncycles)
        .map(|k| spread(values.iter().map(|row| row[k])))
        .collect()
}

/// `d/ds η_p(γ_s)` by differentiating under the integral:
/// `p ∫_I [P_p(∂_s∂_tA, F^{p−1}) + (p−1) P_p(∂_tA, ∂_sF, F^{p−2})] dt`,
/// with `∂_sF = d(∂_sA) + A∧∂_sA + ∂_sA∧A`.
pub fn variational_integrand_at(f: &TwoParamFamily, p: usize, s: f64) -> Result<MatrixForm> {
    if p < 2 {
        return Err(Error::Polynomial("the variational formula needs p >= 2".into()));
    }
    let poly = InvariantPolynomial::new(p, f.rank())?;
    let torus = f.at(s, 0.0).form().torus_arc().clone();
    let mut acc = MatrixForm::zeros_on(torus.clone(), 2 * p - 1, 1);
    if 2 * p - 1 > torus.dim() {
        return Ok(acc);
    }
    let weights = simpson_weights(f.t_samples())?;
    for (j, t) in f.t_nodes().into_iter().enumerate() {
        let a = f.at(s, t);
        let curv = a.curvature();
        let a_st = f.d_ds_dt(s, t);
        let a_t = f.d_dt(s, t);
        let ds_curv = covariant_derivative(a.form(), &f.d_ds(s, t))?;

        let mut first = vec![&curv; p];
        first[0] = &a_st;
        let mut term = invariant_poly(&poly, &first)?;

        let mut second = vec![&curv; p];
        second[0] = &a_t;
        second[1] = &ds_curv;
        term.axpy(Complex64::new((p - 1) as f64, 0.0), &invariant_poly(&poly, &second)?)?;

        acc.axpy(Complex64::new(weights[j] * p as f64, 0.0), &term)?;
    }
    Ok(acc)
}

/// [`variational_integrand_at`] at the `i`-th `s` node.
pub fn variational_integrand(f: &TwoParamFamily, p: usize, i: usize) -> Result<MatrixForm> {
    let nodes = f.s_nodes();
    let s = *nodes.get(i).ok_or_else(|| {
        Error::Quadrature(format!("s index {i} out of range for {} samples", nodes.len()))
    })?;
    variational_integrand_at(f, p, s)
}

/// Central difference `(η_p(γ_{s+Δs}) − η_p(γ_{s−Δs})) / 2Δs`.
pub fn fd_eta_derivative(f: &TwoParamFamily, p: usize, s: f64, step: f64) -> Result<MatrixForm> {
    let plus = path_transgression(&f.slice_at(s + step), p)?;
    let minus = path_transgression(&f.slice_at(s - step), p)?;
    Ok(plus.sub(&minus)?.scale_real(0.5 / step))
}

/// Compare the variational integrand with central differences of `η_p` at
/// each step size; the error must fall at second order.
pub fn variational_check(f: &TwoParamFamily, p: usize, s: f64, steps: &[f64], min_order: f64) -> Result<VariationReport> {
    let integrand = variational_integrand_at(f, p, s)?;
    let mut report = VariationReport::new("variational", p, family_inputs(f), min_order);
    report.s_nodes = vec![s];
    report.form_norms = vec![integrand.norm_inf()];
    for &h in steps {
        let fd = fd_eta_derivative(f, p, s, h)?;
        report.fd_steps.push(h);
        report.fd_errors.push(fd.distance_inf(&integrand)?);
    }
    let order = fit_order(steps, &report.fd_errors, 1e-13 * (1.0 + integrand.norm_inf()))?;
    report.passed = order.meets(min_order);
    report.order = Some(order);
    Ok(report)
}

/// `ĉ_p` at both endpoints of a flat path, per cycle.
pub fn rigidity_check(
    path: &ConnectionPath,
    p: usize,
    cycles: &[Cycle],
    samples: usize,
    tolerance: f64,
) -> Result<VariationReport> {
    let (a0, a1) = path.endpoints();
    let mut report = VariationReport::new("rigidity", p, path_inputs(path), tolerance);
    report.s_nodes = vec![0.0, 1.0];
    report.cycles = cycles.iter().map(Cycle::label).collect();
    for a in [&a0, &a1] {
        report.values.push(
            cycles
                .iter()
                .map(|z| cs_character(a, p, z, samples))
                .collect::<Result<_>>()?,
        );
    }
    report.max_distance = max_distances(&report.values, cycles.len());
    report.form_norms = vec![path_transgression(path, p)?.norm_inf()];
    report.passed = report.worst_distance() <= tolerance;
    Ok(report)
}

fn require_fixed(f: &TwoParamFamily) -> Result<()> {
    if !f.endpoints_fixed() {
        let dev = f.endpoint_deviation();
        if dev > 1e-14 {
            return Err(Error::EndpointsNotFixed(dev));
        }
    }
    Ok(())
}

/// Tertiary classes of every slice `γ_s`. Asserted for `p ≥ 3`; for `p = 2`
/// the spread is recorded only.
pub fn tertiary_constancy_check(
    f: &TwoParamFamily,
    p: usize,
    cycles: &[Cycle],
    opts: &TertiaryOptions,
    tolerance: f64,
) -> Result<VariationReport> {
    require_fixed(f)?;
    let mut report = VariationReport::new("tertiary_constancy", p, family_inputs(f), tolerance);
    report.s_nodes = f.s_nodes();
    report.cycles = cycles.iter().map(Cycle::label).collect();
    for &s in &report.s_nodes.clone() {
        let evals = tertiary_class_field(&f.slice_at(s), p, cycles, opts)?;
        let eta = evals
            .first()
            .and_then(|e| e.diagnostics.as_ref())
            .map_or(0.0, |d| d.eta_norm);
        report.form_norms.push(eta);
        report.values.push(evals.into_iter().map(|e| e.value).collect());
    }
    report.max_distance = max_distances(&report.values, cycles.len());
    report.asserted = p >= 3;
    report.passed = report.worst_distance() <= tolerance;
    Ok(report)
}

/// `‖dβ_{s_i} − dβ_{s_j}‖∞` across the slices of a flat family.
pub fn dbeta_constancy_check(
    f: &TwoParamFamily,
    p: usize,
    opts: &TertiaryOptions,
    tolerance: f64,
) -> Result<VariationReport> {
    require_fixed(f)?;
    let mut report = VariationReport::new("dbeta_constancy", p, family_inputs(f), tolerance);
    report.s_nodes = f.s_nodes();
    let no_doubling = TertiaryOptions {
        check_doubling: false,
        ..*opts
    };
    let mut dbetas = Vec::new();
    for &s in &report.s_nodes {
        let forms = tertiary_forms(&f.slice_at(s), p, &no_doubling)?;
        let db = forms.beta.beta.exterior_derivative();
        report.form_norms.push(db.norm_inf());
        dbetas.push(db);
    }
    let mut worst: f64 = 0.0;
    for (i, a) in dbetas.iter().enumerate() {
        for b in &dbetas[i + 1..] {
            worst = worst.max(a.distance_inf(b)?);
        }
    }
    report.max_distance = vec![worst];
    report.passed = worst <= tolerance;
    Ok(report)
}

/// The interpolation family under one `s = 0` normalization.
#[derive(Clone, Debug, Serialize)]
pub struct InterpolationOutcome {
    pub base: InterpolationBase,
    pub double_transgression_norm: f64,
    /// `‖d DT − (η_p(s=1) − η_p(s=0))‖∞`; the `t`-endpoints move with `s`,
    /// so this need not vanish.
    pub slice_stokes_defect: f64,
    pub eta_s0_norm: f64,
    pub eta_s1_norm: f64,
}

/// Double transgression of `s[(1−t)A_0 + tA_1]` under both normalizations
/// of its `s = 0` edge. Recorded, never asserted.
pub fn interpolation_normalizations(
    a0: &Connection,
    a1: &Connection,
    p: usize,
    s_samples: usize,
    t_samples: usize,
) -> Result<Vec<InterpolationOutcome>> {
    [InterpolationBase::Trivial, InterpolationBase::StartPoint]
        .into_iter()
        .map(|base| {
            let f = two_param_connection(a0, a1, s_samples, t_samples, base)?;
            let dt = double_transgression(&f, p)?;
            let eta0 = path_transgression(&f.slice_at(0.0), p)?;
            let eta1 = path_transgression(&f.slice_at(1.0), p)?;
            let defect = dt.exterior_derivative().distance_inf(&eta1.sub(&eta0)?)?;
            Ok(InterpolationOutcome {
                base,
                double_transgression_norm: dt.norm_inf(),
                slice_stokes_defect: defect,
                eta_s0_norm: eta0.norm_inf(),
                eta_s1_norm: eta1.norm_inf(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connection::{constant_path, linear_path, FamilySource, FnFamily};
    use crate::forms::tests::random_fourier;
    use crate::torus::GridTorus;
    use std::sync::Arc;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn diag(t: &GridTorus, u: &[f64], v: &[f64]) -> MatrixForm {
        MatrixForm::from_fn(t, 1, 2, |_, axes, m| {
            m[0] = c(0.0, u[axes[0]]);
            m[3] = c(0.0, v[axes[0]]);
        })
    }

    /// Non-flat family `A_{s,t} = B_0 + t B_1 + s³ t B_2 + s t² B_3` with
    /// analytic derivatives.
    struct Cubic {
        b: [MatrixForm; 4],
    }

    impl FamilySource for Cubic {
        fn connection(&self, s: f64, t: f64) -> MatrixForm {
            MatrixForm::combination(&[
                (c(1.0, 0.0), &self.b[0]),
                (c(t, 0.0), &self.b[1]),
                (c(s * s * s * t, 0.0), &self.b[2]),
                (c(s * t * t, 0.0), &self.b[3]),
            ])
            .unwrap()
        }
        fn d_dt(&self, s: f64, t: f64) -> Option<MatrixForm> {
            Some(
                MatrixForm::combination(&[
                    (c(1.0, 0.0), &self.b[1]),
                    (c(s * s * s, 0.0), &self.b[2]),
                    (c(2.0 * s * t, 0.0), &self.b[3]),
                ])
                .unwrap(),
            )
        }
        fn d_ds(&self, s: f64, t: f64) -> Option<MatrixForm> {
            Some(MatrixForm::combination(&[(c(3.0 * s * s * t, 0.0), &self.b[2]), (c(t * t, 0.0), &self.b[3])]).unwrap())
        }
        fn d_ds_dt(&self, s: f64, t: f64) -> Option<MatrixForm> {
            Some(MatrixForm::combination(&[(c(3.0 * s * s, 0.0), &self.b[2]), (c(2.0 * t, 0.0), &self.b[3])]).unwrap())
        }
    }

    fn cubic_family(t: &GridTorus) -> TwoParamFamily {
        let b = std::array::from_fn(|k| random_fourier(t, 1, 2, 300 + k as u64).scale_real(0.5));
        TwoParamFamily::new(t, 2, 5, 9, Arc::new(Cubic { b })).unwrap()
    }

    #[test]
    fn variational_integrand_matches_finite_differences() {
        let t = GridTorus::periodic(3, 6).unwrap();
        let f = cubic_family(&t);
        let r = variational_check(&f, 2, 0.5, &[1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0], 1.9).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.form_norms[0] > 1e-3);
    }

    #[test]
    fn variational_integrand_trivial_cases() {
        let t = GridTorus::periodic(3, 6).unwrap();
        let a = random_fourier(&t, 1, 2, 1);
        let b = random_fourier(&t, 1, 2, 2);
        let f = TwoParamFamily::new(
            &t,
            2,
            5,
            5,
            Arc::new(FnFamily {
                connection: move |_s: f64, tt: f64| a.add(&b.scale_real(tt)).unwrap(),
            }),
        )
        .unwrap();
        assert!(variational_integrand(&f, 2, 2).unwrap().norm_inf() <= 1e-12);

        // flat constant-coefficient abelian family
        let (u, v) = (diag(&t, &[0.2, 0.5, -0.1], &[1.0, 0.0, 0.3]), diag(&t, &[0.7, -0.4, 0.0], &[0.1, 0.2, 0.9]));
        let g = TwoParamFamily::new(
            &t,
            2,
            5,
            5,
            Arc::new(FnFamily {
                connection: move |s: f64, tt: f64| u.scale_real(s * tt).add(&v.scale_real(tt * tt + s)).unwrap(),
            }),
        )
        .unwrap();
        assert!(variational_integrand(&g, 2, 1).unwrap().norm_inf() <= 1e-12);
        assert!(variational_integrand(&g, 1, 1).is_err());
        assert!(variational_integrand(&g, 2, 9).is_err());
    }

    #[test]
    fn rigidity_for_flat_abelian_and_constant_paths() {
        let t = GridTorus::periodic(3, 6).unwrap();
        let cycles = Cycle::all_coordinate(&t, 3).unwrap();
        let a0 = Connection::new(diag(&t, &[0.2, 0.5, -0.1], &[1.0, 0.0, 0.3])).unwrap();
        let a1 = Connection::new(diag(&t, &[0.7, -0.4, 0.0], &[0.1, 0.2, 0.9])).unwrap();
        let r = rigidity_check(&linear_path(&a0, &a1, 5).unwrap(), 2, &cycles, 3, 1e-10).unwrap();
        assert!(r.passed && r.worst_distance() <= 1e-10);
        let r = rigidity_check(&constant_path(&a0, 5).unwrap(), 2, &cycles, 3, 0.0).unwrap();
        assert_eq!(r.worst_distance(), 0.0);
    }

    /// Flat abelian homotopy on T⁴ with fixed endpoints:
    /// `a_k(s,t) = a_k^0 + t δ_k + s t(1−t) w_k`.
    fn abelian_homotopy(t: &GridTorus, samples: usize) -> TwoParamFamily {
        let base = diag(t, &[0.3, -0.2, 0.7, 0.1], &[0.1, 0.4, -0.5, 0.2]);
        let delta = diag(t, &[0.5, 0.0, -0.3, 0.25], &[0.2, -0.6, 0.1, 0.0]);
        let bend = diag(t, &[-0.4, 0.8, 0.15, 0.3], &[0.3, 0.05, -0.7, -0.2]);
        TwoParamFamily::new(
            t,
            2,
            samples,
            samples,
            Arc::new(FnFamily {
                connection: move |s: f64, tt: f64| {
                    let mut a = base.add(&delta.scale_real(tt)).unwrap();
                    if tt != 0.0 && tt != 1.0 {
                        a.axpy(c(s * tt * (1.0 - tt), 0.0), &bend).unwrap();
                    }
                    a
                },
            }),
        )
        .unwrap()
        .require_fixed_endpoints()
        .unwrap()
    }

    #[test]
    fn tertiary_constancy_on_abelian_homotopy() {
        let t = GridTorus::periodic(4, 4).unwrap();
        let f = abelian_homotopy(&t, 5);
        let opts = TertiaryOptions {
            check_doubling: false,
            ..TertiaryOptions::new(5)
        };
        let r2 = tertiary_constancy_check(&f, 2, &Cycle::all_coordinate(&t, 2).unwrap(), &opts, 1e-10).unwrap();
        assert!(!r2.asserted);
        // the p = 2 values move with s here: the bend changes β
        assert!(r2.worst_distance() > 1e-6, "{r2:?}");
        let r3 = tertiary_constancy_check(&f, 3, &Cycle::all_coordinate(&t, 4).unwrap(), &opts, 1e-10).unwrap();
        assert!(r3.asserted && r3.passed);

        let db = dbeta_constancy_check(&f, 2, &opts, 1e-10).unwrap();
        assert!(db.passed, "{db:?}");
    }

    #[test]
    fn interpolation_normalizations_are_both_reported() {
        let t = GridTorus::periodic(3, 6).unwrap();
        let a0 = Connection::new(random_fourier(&t, 1, 2, 11)).unwrap();
        let a1 = Connection::new(random_fourier(&t, 1, 2, 12)).unwrap();
        let out = interpolation_normalizations(&a0, &a1, 2, 5, 5).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].base, InterpolationBase::Trivial);
        assert_eq!(out[0].eta_s0_norm, 0.0);
    }
}
