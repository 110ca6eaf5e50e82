//! Orchestration of scenario checks: one result per requested check, optional
//! refinement over the ladder with a fitted order, and the assembled report.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::characters::{character_difference_check, tertiary_class_field, CharacterValue, TertiaryOptions};
use crate::chern_weil::{
    beta_form, chern_form, compact_support_check, double_transgression_stokes, path_transgression,
    transgression_convex, transgression_stokes,
};
use crate::connection::{linear_path, ConnectionPath, TwoParamFamily};
use crate::error::{Error, Result};
use crate::expr::Bump;
use crate::forms::{MatrixForm, SupportMask};
use crate::quadrature::{fit_order, Order};
use crate::rigidity::{
    dbeta_constancy_check, interpolation_normalizations, rigidity_check, tertiary_constancy_check,
    variational_check, variational_integrand,
};
use crate::scenario::{scenario_to_text, CheckSpec, Level, Scenario, Suite};
use crate::torus::Cycle;

pub const WORKERS_ENV: &str = "CCS_WORKERS";

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunOptions {
    /// Worker threads; the rayon default when `None`.
    pub workers: Option<usize>,
    /// Record wall-clock timings. Off by default so reports are reproducible.
    pub include_timings: bool,
}

impl RunOptions {
    /// Options with the worker count taken from `CCS_WORKERS` when set.
    pub fn from_env() -> Self {
        Self {
            workers: std::env::var(WORKERS_ENV).ok().and_then(|v| v.trim().parse().ok()),
            include_timings: false,
        }
    }
}

/// A value on one cycle (and one homotopy sample, where the check has them).
#[derive(Clone, Debug, Serialize)]
pub struct CycleValue {
    pub cycle: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    pub value: CharacterValue,
    /// The value it is compared against, when there is one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<CharacterValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelResult {
    pub resolution: Vec<usize>,
    pub t_samples: usize,
    pub step: f64,
    pub residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_norm: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Passed,
    Failed,
    /// Executed and reported without a claim.
    Recorded,
    Error,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub index: usize,
    pub suite: Suite,
    pub p: usize,
    pub status: Status,
    pub asserted: bool,
    pub passed: bool,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_norm: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<CycleValue>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<LevelResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<Order>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_order: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub details: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub tool: String,
    pub version: String,
    /// SHA-256 of the tool version and the canonical scenario document.
    pub config_hash: String,
    pub scenario: Scenario,
    pub checks: Vec<CheckResult>,
    /// Every asserted check passed.
    pub all_passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
}

/// What one check produces at one resolution.
struct Outcome {
    residual: Option<f64>,
    reference_norm: Option<f64>,
    values: Vec<CycleValue>,
    passed: bool,
    asserted: bool,
    order: Option<Order>,
    details: Option<serde_json::Value>,
}

impl Outcome {
    fn residual(residual: f64, reference_norm: Option<f64>, tolerance: f64) -> Self {
        Self {
            residual: Some(residual),
            reference_norm,
            values: Vec::new(),
            passed: residual <= tolerance,
            asserted: true,
            order: None,
            details: None,
        }
    }
}

fn to_details<T: Serialize>(v: &T) -> Option<serde_json::Value> {
    serde_json::to_value(v).ok()
}

pub fn config_hash(s: &Scenario) -> String {
    let mut h = Sha256::new();
    h.update(env!("CARGO_PKG_VERSION").as_bytes());
    h.update(b"\n");
    h.update(scenario_to_text(s).as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

struct Context<'a> {
    scenario: &'a Scenario,
    level: &'a Level,
    family: TwoParamFamily,
    path: ConnectionPath,
}

impl<'a> Context<'a> {
    fn new(scenario: &'a Scenario, level: &'a Level) -> Result<Self> {
        let family = scenario.family_on(&level.torus, scenario.quadrature.s_samples, level.t_samples)?;
        let path = family.slice_at(scenario.path_s);
        Ok(Self {
            scenario,
            level,
            family,
            path,
        })
    }

    fn tertiary_options(&self) -> TertiaryOptions {
        TertiaryOptions {
            s_samples: self.scenario.quadrature.s_samples,
            u_samples: self.scenario.quadrature.u_samples,
            flat_tolerance: self.scenario.flat_tolerance,
            check_doubling: true,
        }
    }

    fn cycles(&self, check: &CheckSpec) -> Result<Vec<Cycle>> {
        self.scenario.cycles_for(check, &self.level.torus)
    }
}

fn relative(residual: f64, scale: f64) -> f64 {
    residual / scale.max(f64::MIN_POSITIVE)
}

/// `d∘d`, scalar graded commutativity and trace graded cyclicity on the
/// connection and its curvature at `t = 1/2`.
fn exterior_floor(path: &ConnectionPath) -> Result<f64> {
    let a = path.at(0.5);
    let f = a.curvature();
    let a = a.into_form();
    let mut worst: f64 = 0.0;
    for form in [&a, &f] {
        let dd = form.exterior_derivative().exterior_derivative().norm_inf();
        worst = worst.max(relative(dd, form.norm_inf()));
    }
    let (ta, tf) = (a.trace(), f.trace());
    // a∧b = (−1)^{|a||b|} b∧a.
    let pairs: [(&MatrixForm, &MatrixForm, f64); 2] = [(&ta, &tf, 1.0), (&ta, &ta, -1.0)];
    for (x, y, sign) in pairs {
        let lhs = x.wedge(y)?;
        let rhs = y.wedge(x)?.scale_real(sign);
        worst = worst.max(relative(lhs.distance_inf(&rhs)?, x.norm_inf() * y.norm_inf()));
    }
    let lhs = a.wedge(&f)?.trace();
    let rhs = f.wedge(&a)?.trace();
    worst = worst.max(relative(lhs.distance_inf(&rhs)?, a.norm_inf() * f.norm_inf()));
    Ok(worst)
}

fn evaluate(ctx: &Context<'_>, check: &CheckSpec) -> Result<Outcome> {
    let s = ctx.scenario;
    let q = &s.quadrature;
    let p = check.p;
    let tol = check.tolerance;
    let m = ctx.level.t_samples;
    let (a0, a1) = ctx.path.endpoints();
    Ok(match check.suite {
        Suite::Flatness => Outcome::residual(ctx.family.max_flatness_residual(), None, tol),
        Suite::ExteriorFloor => Outcome::residual(exterior_floor(&ctx.path)?, None, tol),
        Suite::ChernClosedness => {
            let c = chern_form(&a1, p)?;
            Outcome::residual(c.exterior_derivative().norm_inf(), Some(c.norm_inf()), tol)
        }
        Suite::EtaVanishing => Outcome::residual(path_transgression(&ctx.path, p)?.norm_inf(), None, tol),
        Suite::TransgressionStokes => {
            let r = transgression_stokes(&a0, &a1, p, m)?;
            Outcome::residual(r.residual, Some(r.reference_norm), tol)
        }
        Suite::FiberConsistency => {
            let tp = transgression_convex(&a0, &a1, p, m)?;
            let eta = path_transgression(&linear_path(&a0, &a1, m)?, p)?;
            Outcome::residual(tp.distance_inf(&eta)?, Some(eta.norm_inf()), tol)
        }
        Suite::BetaWitness => {
            let w = beta_form(&ctx.path, p, q.s_samples, s.flat_tolerance)?;
            let mut out = Outcome::residual(w.residual, Some(w.reference_norm), tol);
            out.details = Some(serde_json::json!({
                "beta_norm": w.beta.norm_inf(),
                "endpoint_flatness": w.endpoint_flatness,
            }));
            out
        }
        Suite::CharacterDifference => {
            let mut values = Vec::new();
            let mut worst: f64 = 0.0;
            for z in ctx.cycles(check)? {
                let d = character_difference_check(&ctx.path, p, &z, q.character_samples)?;
                worst = worst.max(d.distance);
                values.push(CycleValue {
                    cycle: d.cycle,
                    s: None,
                    value: d.endpoint_difference,
                    reference: Some(d.transgression),
                    residual: Some(d.distance),
                });
            }
            Outcome {
                values,
                ..Outcome::residual(worst, None, tol)
            }
        }
        Suite::Rigidity => {
            let cycles = ctx.cycles(check)?;
            let r = rigidity_check(&ctx.path, p, &cycles, q.character_samples, tol)?;
            let values = r
                .values
                .iter()
                .zip(&r.s_nodes)
                .flat_map(|(row, &sv)| {
                    row.iter().zip(&r.cycles).map(move |(v, c)| CycleValue {
                        cycle: c.clone(),
                        s: Some(sv),
                        value: *v,
                        reference: None,
                        residual: None,
                    })
                })
                .collect();
            Outcome {
                values,
                passed: r.passed,
                details: Some(serde_json::json!({ "eta_norm": r.form_norms.first() })),
                ..Outcome::residual(r.worst_distance(), None, tol)
            }
        }
        Suite::Tertiary => {
            let cycles = ctx.cycles(check)?;
            let evals = tertiary_class_field(&ctx.path, p, &cycles, &ctx.tertiary_options())?;
            if let Some(exp) = &check.expected {
                if exp.len() != evals.len() {
                    return Err(Error::Scenario(format!(
                        "{} expected values for {} cycles",
                        exp.len(),
                        evals.len()
                    )));
                }
            }
            let mut worst: f64 = 0.0;
            let mut projection_ok = true;
            let mut values = Vec::new();
            for (k, e) in evals.iter().enumerate() {
                let diag = e.diagnostics.as_ref();
                projection_ok &= diag.is_some_and(|d| d.curvature_projection_vanishes);
                let mut r = diag.and_then(|d| d.doubling_distance).unwrap_or(0.0);
                let reference = check.expected.as_ref().map(|exp| {
                    crate::characters::reduce_mod_z(num_complex::Complex64::new(exp[k][0], exp[k][1]))
                });
                if let Some(rf) = &reference {
                    r = r.max(e.value.distance(rf));
                }
                worst = worst.max(r);
                values.push(CycleValue {
                    cycle: e.cycle.clone(),
                    s: None,
                    value: e.value,
                    reference,
                    residual: Some(r),
                });
            }
            Outcome {
                values,
                passed: worst <= tol && projection_ok,
                details: evals.first().and_then(|e| to_details(&e.diagnostics)),
                ..Outcome::residual(worst, None, tol)
            }
        }
        Suite::Variational => {
            let s0 = check.s.unwrap_or(0.5);
            match &check.steps {
                Some(steps) => {
                    let r = variational_check(&ctx.family, p, s0, steps, check.min_order.unwrap_or(1.9))?;
                    Outcome {
                        residual: r.fd_errors.last().copied(),
                        reference_norm: r.form_norms.first().copied(),
                        values: Vec::new(),
                        passed: r.passed,
                        asserted: true,
                        order: r.order,
                        details: to_details(&r),
                    }
                }
                None => {
                    let norms: Vec<f64> = (0..ctx.family.s_samples())
                        .map(|i| variational_integrand(&ctx.family, p, i).map(|f| f.norm_inf()))
                        .collect::<Result<_>>()?;
                    let worst = norms.iter().copied().fold(0.0, f64::max);
                    Outcome {
                        details: Some(serde_json::json!({ "integrand_norms": norms })),
                        ..Outcome::residual(worst, None, tol)
                    }
                }
            }
        }
        Suite::TertiaryConstancy => {
            let cycles = ctx.cycles(check)?;
            // Sample doubling is the tertiary suite's concern; here only the spread in s matters.
            let opts = TertiaryOptions {
                check_doubling: false,
                ..ctx.tertiary_options()
            };
            let r = tertiary_constancy_check(&ctx.family, p, &cycles, &opts, tol)?;
            let values = r
                .values
                .iter()
                .zip(&r.s_nodes)
                .flat_map(|(row, &sv)| {
                    row.iter().zip(&r.cycles).map(move |(v, c)| CycleValue {
                        cycle: c.clone(),
                        s: Some(sv),
                        value: *v,
                        reference: None,
                        residual: None,
                    })
                })
                .collect();
            Outcome {
                values,
                passed: r.passed,
                asserted: r.asserted,
                details: Some(serde_json::json!({ "max_distance": r.max_distance, "eta_norms": r.form_norms })),
                ..Outcome::residual(r.worst_distance(), None, tol)
            }
        }
        Suite::DbetaConstancy => {
            let r = dbeta_constancy_check(&ctx.family, p, &ctx.tertiary_options(), tol)?;
            Outcome {
                passed: r.passed,
                details: Some(serde_json::json!({ "dbeta_norms": r.form_norms })),
                ..Outcome::residual(r.worst_distance(), None, tol)
            }
        }
        Suite::CompactSupport => {
            let spec = check
                .mask
                .as_ref()
                .ok_or_else(|| Error::Scenario("compact_support needs a mask".into()))?;
            let ball = Bump {
                center: spec.center.clone(),
                radius: spec.radius,
            };
            let mask = SupportMask::from_fn(&ctx.level.torus, |x| ball.contains(x));
            let r = compact_support_check(&a1, &mask, p, m, 0.0)?;
            let worst = r.chern_dilation.max(r.transgression_dilation).map_or(f64::INFINITY, |k| k as f64);
            // Here the tolerance is the allowed dilation of the support, in grid cells.
            Outcome {
                passed: r.chern_contained && r.transgression_contained && worst <= tol,
                details: to_details(&r),
                ..Outcome::residual(worst, None, tol)
            }
        }
        Suite::DoubleTransgressionStokes => {
            let r = double_transgression_stokes(&ctx.family, p)?;
            Outcome::residual(r.residual, Some(r.reference_norm), tol)
        }
        Suite::InterpolationNormalizations => {
            let r = interpolation_normalizations(&a0, &a1, p, q.s_samples, m)?;
            Outcome {
                residual: None,
                reference_norm: None,
                values: Vec::new(),
                passed: true,
                asserted: false,
                order: None,
                details: to_details(&r),
            }
        }
    })
}

fn evaluate_at(s: &Scenario, check: &CheckSpec, level: &Level) -> Result<Outcome> {
    let ctx = Context::new(s, level)?;
    evaluate(&ctx, check)
}

/// Run one check, over `ladder` when given.
fn run_check(s: &Scenario, index: usize, check: &CheckSpec, ladder: Option<&[Level]>) -> Result<CheckResult> {
    let mut result = CheckResult {
        index,
        suite: check.suite,
        p: check.p,
        status: Status::Error,
        asserted: true,
        passed: false,
        tolerance: check.tolerance,
        residual: None,
        reference_norm: None,
        values: Vec::new(),
        levels: Vec::new(),
        order: None,
        min_order: check.min_order,
        details: None,
        error: None,
        seconds: None,
    };
    let outcome = match ladder {
        Some(levels) => {
            let mut outcomes = Vec::with_capacity(levels.len());
            for level in levels {
                let o = evaluate_at(s, check, level)?;
                let residual = o
                    .residual
                    .ok_or_else(|| Error::Scenario(format!("{} has no residual to refine", check.suite.name())))?;
                result.levels.push(LevelResult {
                    resolution: level.torus.resolution().to_vec(),
                    t_samples: level.t_samples,
                    step: level.step,
                    residual,
                    reference_norm: o.reference_norm,
                });
                outcomes.push(o);
            }
            let steps: Vec<f64> = result.levels.iter().map(|l| l.step).collect();
            let errors: Vec<f64> = result.levels.iter().map(|l| l.residual).collect();
            let scale = result
                .levels
                .iter()
                .filter_map(|l| l.reference_norm)
                .fold(1.0, f64::max);
            let order = fit_order(&steps, &errors, 1e-12 * scale)?;
            let mut finest = outcomes.pop().expect("at least three levels");
            finest.passed = match check.min_order {
                Some(q) => order.meets(q),
                None => finest.passed,
            };
            finest.order = Some(order);
            finest
        }
        None => evaluate_at(s, check, &s.base_level()?)?,
    };
    result.asserted = outcome.asserted;
    result.passed = outcome.passed;
    result.status = match (outcome.asserted, outcome.passed) {
        (false, _) => Status::Recorded,
        (true, true) => Status::Passed,
        (true, false) => Status::Failed,
    };
    result.residual = outcome.residual;
    result.reference_norm = outcome.reference_norm;
    result.values = outcome.values;
    result.order = result.order.or(outcome.order);
    result.details = outcome.details;
    Ok(result)
}

/// Run one check with errors and panics turned into an error result.
fn isolated(s: &Scenario, index: usize, check: &CheckSpec, ladder: Option<&[Level]>, timings: bool) -> CheckResult {
    let start = Instant::now();
    let run = catch_unwind(AssertUnwindSafe(|| run_check(s, index, check, ladder)));
    let mut result = match run {
        Ok(Ok(r)) => r,
        Ok(Err(e)) => error_result(index, check, e.to_string()),
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|m| m.to_string()))
                .unwrap_or_else(|| "check panicked".into());
            error_result(index, check, format!("panic: {msg}"))
        }
    };
    if timings {
        result.seconds = Some(start.elapsed().as_secs_f64());
    }
    result
}

fn error_result(index: usize, check: &CheckSpec, message: String) -> CheckResult {
    CheckResult {
        index,
        suite: check.suite,
        p: check.p,
        status: Status::Error,
        asserted: true,
        passed: false,
        tolerance: check.tolerance,
        residual: None,
        reference_norm: None,
        values: Vec::new(),
        levels: Vec::new(),
        order: None,
        min_order: check.min_order,
        details: None,
        error: Some(message),
        seconds: None,
    }
}

fn run_with<F>(s: &Scenario, opts: &RunOptions, plan: F) -> Result<RunReport>
where
    F: Fn(usize, &CheckSpec) -> CheckResult + Sync,
{
    let start = Instant::now();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = opts.workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Scenario(format!("cannot start worker pool: {e}")))?;
    let checks: Vec<CheckResult> = pool.install(|| {
        s.checks
            .par_iter()
            .enumerate()
            .map(|(i, c)| plan(i, c))
            .collect()
    });
    let all_passed = checks.iter().all(|c| !c.asserted || c.passed);
    Ok(RunReport {
        tool: "ccs".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_hash: config_hash(s),
        scenario: s.clone(),
        checks,
        all_passed,
        seconds: opts.include_timings.then(|| start.elapsed().as_secs_f64()),
    })
}

/// Execute every requested check. Checks with a `min_order` run over the
/// scenario's ladder; a failing check does not stop the others.
pub fn run_suite(s: &Scenario, opts: &RunOptions) -> Result<RunReport> {
    let ladder = match &s.ladder {
        Some(_) => Some(s.ladder_levels()?),
        None => None,
    };
    run_with(s, opts, |i, c| {
        let refine = c.min_order.is_some() && c.suite.convergent();
        let levels = if refine {
            match &ladder {
                Some(l) => Some(l.as_slice()),
                None => {
                    return error_result(i, c, "min_order requested but the scenario has no ladder".into());
                }
            }
        } else {
            None
        };
        isolated(s, i, c, levels, opts.include_timings)
    })
}

/// Every check that yields a residual is rerun over `ladder` with a fitted
/// order; the rest run once at the base resolution.
pub fn convergence_study(s: &Scenario, ladder: &[usize], opts: &RunOptions) -> Result<RunReport> {
    if ladder.len() < 3 {
        return Err(Error::TooFewLevels(ladder.len()));
    }
    let mut scenario = s.clone();
    let mut spec = scenario.ladder.clone().unwrap_or(crate::scenario::LadderSpec {
        levels: Vec::new(),
        refine_axes: None,
        scale_t: false,
    });
    spec.levels = ladder.to_vec();
    scenario.ladder = Some(spec);
    scenario.validate()?;
    let levels = scenario.ladder_levels()?;
    run_with(&scenario, opts, |i, c| {
        let refine = c.suite.convergent().then_some(levels.as_slice());
        isolated(&scenario, i, c, refine, opts.include_timings)
    })
}

/// A single check of the scenario, matched by suite name (the first one of
/// that suite, or a default check with exponent `p`).
pub fn compute_quantity(s: &Scenario, suite: Suite, p: Option<usize>, opts: &RunOptions) -> Result<CheckResult> {
    let check = s
        .checks
        .iter()
        .find(|c| c.suite == suite && p.is_none_or(|p| c.p == p))
        .cloned()
        .unwrap_or(CheckSpec {
            suite,
            p: p.unwrap_or(2),
            tolerance: 1e-10,
            cycles: None,
            min_order: None,
            s: None,
            steps: None,
            mask: None,
            expected: None,
        });
    let mut single = s.clone();
    single.checks = vec![check];
    Ok(run_suite(&single, opts)?.checks.remove(0))
}
