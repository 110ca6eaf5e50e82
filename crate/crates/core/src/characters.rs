//! ℂ/ℤ-valued evaluation of differential characters on cycles, for trivial
//! bundles over the grid torus.
//!
//! The character of a connection is the reduced integral of its transgression
//! from the trivial connection. The tertiary class of a path of flat
//! connections combines the fiber integral of that character for the
//! convex-combination connection on `I × X` with the lift of `β`.

use num_complex::Complex64;
use serde::{Serialize, Serializer};

use crate::algebra::ParamForm;
use crate::chern_weil::{beta_form, invariant_poly, path_transgression, BetaWitness, InvariantPolynomial};
use crate::connection::{linear_path, Connection, ConnectionPath};
use crate::error::{Error, Result};
use crate::forms::MatrixForm;
use crate::quadrature::{scaled_samples, simpson_weights};
use crate::torus::{integrate, nodes, Cycle};

/// A value in ℂ/ℤ together with the representative it was reduced from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CharacterValue {
    /// Real part in `[0, 1)`.
    pub value: Complex64,
    pub raw: Complex64,
}

impl Serialize for CharacterValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("CharacterValue", 4)?;
        st.serialize_field("re", &self.value.re)?;
        st.serialize_field("im", &self.value.im)?;
        st.serialize_field("raw_re", &self.raw.re)?;
        st.serialize_field("raw_im", &self.raw.im)?;
        st.end()
    }
}

/// Reduce the real part into `[0, 1)`; the imaginary part is untouched.
pub fn reduce_mod_z(z: Complex64) -> CharacterValue {
    let mut re = z.re - z.re.floor();
    if re >= 1.0 {
        // z.re a tiny negative number
        re = 0.0;
    }
    CharacterValue {
        value: Complex64::new(re, z.im),
        raw: z,
    }
}

/// Distance to the nearest integer.
fn circle_offset(x: f64) -> f64 {
    (x - x.round()).abs()
}

impl CharacterValue {
    pub fn zero() -> Self {
        reduce_mod_z(Complex64::new(0.0, 0.0))
    }

    /// `min_k |a − b − k|` over integers `k`.
    pub fn distance(&self, other: &Self) -> f64 {
        let d = self.raw - other.raw;
        circle_offset(d.re).hypot(d.im)
    }

    /// `self − other` in ℂ/ℤ.
    pub fn difference(&self, other: &Self) -> Self {
        reduce_mod_z(self.raw - other.raw)
    }

    /// Distance to `0` in ℂ/ℤ.
    pub fn norm(&self) -> f64 {
        circle_offset(self.raw.re).hypot(self.raw.im)
    }
}

fn check_cycle(z: &Cycle, degree: usize) -> Result<()> {
    if z.dim != degree {
        return Err(Error::DegreeMismatch {
            expected: degree,
            found: z.dim,
        });
    }
    Ok(())
}

/// The transgression form of `A` relative to the trivial connection.
pub fn cs_form(c: &Connection, p: usize, samples: usize) -> Result<MatrixForm> {
    let zero = Connection::zero(c.torus(), c.rank());
    path_transgression(&linear_path(&zero, c, samples)?, p)
}

/// `ĉ_p(E, ∇)(z)`: reduced integral over `z` of the transgression from `d`.
pub fn cs_character(c: &Connection, p: usize, z: &Cycle, samples: usize) -> Result<CharacterValue> {
    check_cycle(z, 2 * p - 1)?;
    if z.dim > c.torus().dim() {
        return Err(Error::InvalidCycle(format!(
            "{}-cycle on a {}-dimensional torus",
            z.dim,
            c.torus().dim()
        )));
    }
    Ok(reduce_mod_z(integrate(&cs_form(c, p, samples)?, z)?))
}

/// Both sides of `ĉ_p(∇_1) − ĉ_p(∇_0) = ∫_z η_p`.
#[derive(Clone, Debug, Serialize)]
pub struct CharacterDifference {
    pub cycle: String,
    pub endpoint_difference: CharacterValue,
    pub transgression: CharacterValue,
    pub distance: f64,
}

pub fn character_difference_check(
    path: &ConnectionPath,
    p: usize,
    z: &Cycle,
    samples: usize,
) -> Result<CharacterDifference> {
    let (a0, a1) = path.endpoints();
    let c0 = cs_character(&a0, p, z, samples)?;
    let c1 = cs_character(&a1, p, z, samples)?;
    let lhs = c1.difference(&c0);
    let rhs = reduce_mod_z(integrate(&path_transgression(path, p)?, z)?);
    Ok(CharacterDifference {
        cycle: z.label(),
        distance: lhs.distance(&rhs),
        endpoint_difference: lhs,
        transgression: rhs,
    })
}

/// Quadrature and tolerance settings for tertiary evaluations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TertiaryOptions {
    /// Samples in the homotopy parameter of `β`.
    pub s_samples: usize,
    /// Samples along the ray `u ↦ u·Ã` from the trivial connection.
    pub u_samples: usize,
    /// Flatness tolerance for every sample of the path.
    pub flat_tolerance: f64,
    /// Recompute with doubled `t`-intervals and record the change.
    pub check_doubling: bool,
}

impl TertiaryOptions {
    pub fn new(s_samples: usize) -> Self {
        Self {
            s_samples,
            u_samples: 5,
            flat_tolerance: 1e-10,
            check_doubling: true,
        }
    }
}

/// The forms whose integrals make up the tertiary class of a path.
#[derive(Clone, Debug)]
pub struct TertiaryForms {
    /// Fiber integral over `I` of the transgression of `∇̃` from `d`.
    pub i1: MatrixForm,
    pub beta: BetaWitness,
    /// `‖η_p(γ)‖∞`: the curvature projection, zero for flat paths.
    pub eta_norm: f64,
    pub flatness: f64,
    pub t_samples: usize,
}

/// `∫_I` of `p ∫_0^1 P_p(Ã, F_u, …, F_u) du` on `I × X`, where `Ã` is the
/// convex combination of the endpoints and `F_u` the curvature of `u·Ã`.
pub fn convex_fiber_transgression(
    a0: &Connection,
    a1: &Connection,
    p: usize,
    t_samples: usize,
    u_samples: usize,
) -> Result<MatrixForm> {
    let path = linear_path(a0, a1, t_samples)?;
    let poly = InvariantPolynomial::new(p, a0.rank())?;
    let torus = a0.form().torus_arc().clone();
    let mut acc = MatrixForm::zeros_on(torus.clone(), 2 * p - 2, 1);
    if 2 * p - 2 > torus.dim() {
        return Ok(acc);
    }
    let (wt, wu) = (simpson_weights(t_samples)?, simpson_weights(u_samples)?);
    let un = nodes(u_samples);
    for (j, t) in path.nodes().into_iter().enumerate() {
        let a = path.at(t).into_form();
        let da = a.exterior_derivative();
        let aa = a.wedge(&a)?;
        let vel = path.velocity_at(t);
        let a_bar = ParamForm::pullback(1, a.clone());
        for (k, &u) in un.iter().enumerate() {
            if u == 0.0 && p > 1 {
                continue;
            }
            let fx = MatrixForm::combination(&[(Complex64::new(u, 0.0), &da), (Complex64::new(u * u, 0.0), &aa)])?;
            let fu = ParamForm::new(1, 2, vec![(0, fx), (1, vel.scale_real(u))])?;
            let mut args = vec![&fu; p];
            args[0] = &a_bar;
            let val = invariant_poly(&poly, &args)?;
            if let Some(part) = val.part(1) {
                acc.axpy(Complex64::new(p as f64 * wt[j] * wu[k], 0.0), part)?;
            }
        }
    }
    Ok(acc)
}

/// Build the forms for the tertiary class of a flat path.
pub fn tertiary_forms(gamma: &ConnectionPath, p: usize, opts: &TertiaryOptions) -> Result<TertiaryForms> {
    if p < 2 {
        return Err(Error::Polynomial("tertiary classes need p >= 2".into()));
    }
    let flatness = gamma.max_flatness_residual();
    if flatness > opts.flat_tolerance {
        return Err(Error::NotFlat {
            residual: flatness,
            tolerance: opts.flat_tolerance,
        });
    }
    let (a0, a1) = gamma.endpoints();
    let i1 = convex_fiber_transgression(&a0, &a1, p, gamma.samples(), opts.u_samples)?;
    let beta = beta_form(gamma, p, opts.s_samples, opts.flat_tolerance)?;
    let eta_norm = path_transgression(gamma, p)?.norm_inf();
    Ok(TertiaryForms {
        i1,
        beta,
        eta_norm,
        flatness,
        t_samples: gamma.samples(),
    })
}

impl TertiaryForms {
    pub fn evaluate(&self, z: &Cycle) -> Result<CharacterValue> {
        check_cycle(z, self.i1.degree())?;
        let i1 = integrate(&self.i1, z)?;
        let i2 = integrate(&self.beta.beta, z)?;
        Ok(reduce_mod_z(i1 - i2))
    }
}

/// Grid and quadrature metadata of an evaluation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvaluationMeta {
    pub resolution: Vec<usize>,
    pub rank: usize,
    pub t_samples: usize,
    pub s_samples: usize,
    pub u_samples: usize,
}

/// Checks recorded alongside a tertiary value.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TertiaryDiagnostics {
    pub eta_norm: f64,
    pub curvature_projection_vanishes: bool,
    pub flatness: f64,
    pub beta_residual: f64,
    /// Mod-ℤ change when the `t` intervals are doubled.
    pub doubling_distance: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CharacterEvaluation {
    pub label: String,
    pub p: usize,
    pub cycle: String,
    pub value: CharacterValue,
    pub meta: EvaluationMeta,
    pub diagnostics: Option<TertiaryDiagnostics>,
}

fn tertiary_meta(gamma: &ConnectionPath, opts: &TertiaryOptions) -> EvaluationMeta {
    EvaluationMeta {
        resolution: gamma.torus().resolution().to_vec(),
        rank: gamma.rank(),
        t_samples: gamma.samples(),
        s_samples: opts.s_samples,
        u_samples: opts.u_samples,
    }
}

/// `CS_p(E, γ)` evaluated on every cycle in `cycles`; the forms are built
/// once (twice with the doubling check).
pub fn tertiary_class_field(
    gamma: &ConnectionPath,
    p: usize,
    cycles: &[Cycle],
    opts: &TertiaryOptions,
) -> Result<Vec<CharacterEvaluation>> {
    let forms = tertiary_forms(gamma, p, opts)?;
    let doubled = if opts.check_doubling {
        let fine = gamma.with_samples(scaled_samples(gamma.samples(), 2))?;
        let fine_opts = TertiaryOptions {
            s_samples: scaled_samples(opts.s_samples, 2),
            ..*opts
        };
        Some(tertiary_forms(&fine, p, &fine_opts)?)
    } else {
        None
    };
    let meta = tertiary_meta(gamma, opts);
    cycles
        .iter()
        .map(|z| {
            let value = forms.evaluate(z)?;
            let doubling_distance = match &doubled {
                Some(d) => Some(d.evaluate(z)?.distance(&value)),
                None => None,
            };
            Ok(CharacterEvaluation {
                label: format!("tertiary CS_{p}"),
                p,
                cycle: z.label(),
                value,
                meta: meta.clone(),
                diagnostics: Some(TertiaryDiagnostics {
                    eta_norm: forms.eta_norm,
                    curvature_projection_vanishes: forms.eta_norm <= opts.flat_tolerance,
                    flatness: forms.flatness,
                    beta_residual: forms.beta.residual,
                    doubling_distance,
                }),
            })
        })
        .collect()
}

/// `CS_p(E, γ)(z)` with its diagnostics.
pub fn tertiary_class(gamma: &ConnectionPath, p: usize, z: &Cycle, opts: &TertiaryOptions) -> Result<CharacterEvaluation> {
    check_cycle(z, 2 * p - 2)?;
    Ok(tertiary_class_field(gamma, p, std::slice::from_ref(z), opts)?.remove(0))
}
