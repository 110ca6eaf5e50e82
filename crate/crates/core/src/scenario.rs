//! Declarative scenarios: a grid, a rank, a family of connections given by
//! expressions, quadrature settings, a refinement ladder and a list of checks.
//! Documents are JSON; expressions use the grammar of [`crate::expr`].

use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::connection::{two_param_connection, Connection, FamilySource, InterpolationBase, TwoParamFamily};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::forms::MatrixForm;
use crate::matrix;
use crate::quadrature::simpson_weights;
use crate::torus::{Cycle, GridTorus};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldSpec {
    pub dim: usize,
    pub resolution: Vec<usize>,
    /// Defaults to every axis periodic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periodic: Option<Vec<bool>>,
}

/// Row-major `rank × rank` matrix of expressions.
pub type ExprMatrix = Vec<Vec<Expr>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    /// `A_t` given directly; must not depend on `s`.
    Path { connection: ExprMatrix },
    /// `A_{s,t}` given directly.
    TwoParam { connection: ExprMatrix },
    /// `A = −d(e^X) e^{−X}` for a matrix 0-form generator `X(s, t, x)`.
    PureGauge { generator: ExprMatrix },
    /// The interpolation between two fixed connections.
    Interpolation {
        start: ExprMatrix,
        end: ExprMatrix,
        base: InterpolationBase,
    },
}

fn default_s_samples() -> usize {
    5
}

fn default_u_samples() -> usize {
    5
}

fn default_character_samples() -> usize {
    9
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    pub t_samples: usize,
    #[serde(default = "default_s_samples")]
    pub s_samples: usize,
    #[serde(default = "default_u_samples")]
    pub u_samples: usize,
    /// Samples on the ray from the trivial connection used by `ĉ_p`.
    #[serde(default = "default_character_samples")]
    pub character_samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderSpec {
    pub levels: Vec<usize>,
    /// Axes refined along the ladder; all axes when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refine_axes: Option<Vec<usize>>,
    /// Scale the number of `t` intervals with the resolution (`Δt ∝ h`).
    #[serde(default)]
    pub scale_t: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Flatness,
    ExteriorFloor,
    ChernClosedness,
    EtaVanishing,
    TransgressionStokes,
    FiberConsistency,
    BetaWitness,
    CharacterDifference,
    Rigidity,
    Tertiary,
    Variational,
    TertiaryConstancy,
    DbetaConstancy,
    CompactSupport,
    DoubleTransgressionStokes,
    InterpolationNormalizations,
}

impl Suite {
    pub const ALL: [Suite; 16] = [
        Suite::Flatness,
        Suite::ExteriorFloor,
        Suite::ChernClosedness,
        Suite::EtaVanishing,
        Suite::TransgressionStokes,
        Suite::FiberConsistency,
        Suite::BetaWitness,
        Suite::CharacterDifference,
        Suite::Rigidity,
        Suite::Tertiary,
        Suite::Variational,
        Suite::TertiaryConstancy,
        Suite::DbetaConstancy,
        Suite::CompactSupport,
        Suite::DoubleTransgressionStokes,
        Suite::InterpolationNormalizations,
    ];

    pub fn name(&self) -> String {
        serde_json::to_value(self)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default()
    }

    pub fn from_name(name: &str) -> Option<Self> {
        serde_json::from_value(serde_json::Value::String(name.to_string())).ok()
    }

    /// Degree of the cycles the suite evaluates on, if any.
    pub fn cycle_degree(&self, p: usize) -> Option<usize> {
        match self {
            Suite::CharacterDifference | Suite::Rigidity => Some(2 * p - 1),
            Suite::Tertiary | Suite::TertiaryConstancy => Some(2 * p - 2),
            _ => None,
        }
    }

    /// Whether the check yields one residual that can be tracked over a ladder.
    pub fn convergent(&self) -> bool {
        matches!(
            self,
            Suite::Flatness
                | Suite::ExteriorFloor
                | Suite::ChernClosedness
                | Suite::EtaVanishing
                | Suite::TransgressionStokes
                | Suite::FiberConsistency
                | Suite::BetaWitness
                | Suite::CharacterDifference
                | Suite::Rigidity
                | Suite::DoubleTransgressionStokes
        )
    }
}

/// Ball used as the declared support of a compactly supported connection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskSpec {
    pub center: Vec<f64>,
    pub radius: f64,
}

fn default_p() -> usize {
    2
}

fn default_tolerance() -> f64 {
    1e-10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    pub suite: Suite,
    #[serde(default = "default_p")]
    pub p: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Axis lists of coordinate cycles through the origin; all of the right
    /// degree when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cycles: Option<Vec<Vec<usize>>>,
    /// Run over the ladder and require this order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_order: Option<f64>,
    /// Homotopy parameter of the variational check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    /// Finite-difference steps of the variational check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<MaskSpec>,
    /// Reference values `[re, im]` per cycle, compared mod ℤ.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<Vec<[f64; 2]>>,
}

fn default_flat_tolerance() -> f64 {
    1e-10
}

fn default_path_s() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub manifold: ManifoldSpec,
    pub rank: usize,
    pub family: FamilySpec,
    #[serde(default)]
    pub declared_flat: bool,
    #[serde(default = "default_flat_tolerance")]
    pub flat_tolerance: f64,
    /// The slice `s` used by checks that act on a single path.
    #[serde(default = "default_path_s")]
    pub path_s: f64,
    pub quadrature: QuadratureSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ladder: Option<LadderSpec>,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
}

/// One rung of the refinement ladder.
#[derive(Clone, Debug, PartialEq)]
pub struct Level {
    pub torus: GridTorus,
    pub t_samples: usize,
    /// Representative grid spacing `1/n`.
    pub step: f64,
}

/// Line and column of byte `offset` in `text`, both 1-based.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

/// Byte offset of 1-based `(line, column)`.
fn offset_of(text: &str, line: usize, column: usize) -> usize {
    let mut off = 0;
    for (i, l) in text.split_inclusive('\n').enumerate() {
        if i + 1 == line {
            return off + column.saturating_sub(1).min(l.len());
        }
        off += l.len();
    }
    text.len()
}

/// Map an expression error raised inside a JSON string back to the document.
/// serde_json reports the position just past the closing quote.
fn locate(text: &str, e: &serde_json::Error) -> (usize, usize, String) {
    let msg = e.to_string();
    let base = msg.split(" at line ").next().unwrap_or(&msg).to_string();
    if let Some(rest) = base.split("[offset ").nth(1) {
        let nums: Vec<usize> = rest
            .trim_end_matches(']')
            .split(" of ")
            .filter_map(|n| n.trim().parse().ok())
            .collect();
        if let [k, n] = nums[..] {
            let end = offset_of(text, e.line(), e.column());
            // `end` sits on the closing quote (column is 1-based and points at it).
            let closing = text[..end.min(text.len())].rfind('"');
            if let Some(q) = closing {
                if q >= n {
                    let start = q - n;
                    if text.as_bytes().get(start.wrapping_sub(1)) == Some(&b'"') {
                        let (line, col) = line_col(text, start + k);
                        let message = base.split(" [offset").next().unwrap_or(&base).to_string();
                        return (line, col, message);
                    }
                }
            }
        }
    }
    (e.line(), e.column(), base)
}

/// Parse and validate a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let scenario: Scenario = serde_json::from_str(text).map_err(|e| {
        let (line, column, message) = locate(text, &e);
        Error::Parse { line, column, message }
    })?;
    scenario.validate()?;
    Ok(scenario)
}

/// The canonical document for a scenario; parses back to an equal value.
pub fn scenario_to_text(s: &Scenario) -> String {
    serde_json::to_string_pretty(s).expect("scenario serializes")
}

fn scenario_err(msg: impl Into<String>) -> Error {
    Error::Scenario(msg.into())
}

impl Scenario {
    pub fn torus(&self) -> Result<GridTorus> {
        let periodic = self
            .manifold
            .periodic
            .clone()
            .unwrap_or_else(|| vec![true; self.manifold.dim]);
        GridTorus::new(self.manifold.dim, &self.manifold.resolution, &periodic)
    }

    fn refine_axes(&self) -> Vec<usize> {
        self.ladder
            .as_ref()
            .and_then(|l| l.refine_axes.clone())
            .unwrap_or_else(|| (0..self.manifold.dim).collect())
    }

    /// Rungs of `levels`, refining the scenario's ladder axes.
    pub fn levels_for(&self, levels: &[usize]) -> Result<Vec<Level>> {
        let base = self.torus()?;
        let axes = self.refine_axes();
        let scale_t = self.ladder.as_ref().is_some_and(|l| l.scale_t);
        let first = *levels.first().ok_or(Error::TooFewLevels(0))?;
        levels
            .iter()
            .map(|&n| {
                let t_samples = if scale_t {
                    if n % first != 0 {
                        return Err(scenario_err(format!(
                            "level {n} is not a multiple of {first}; cannot scale t-samples"
                        )));
                    }
                    (self.quadrature.t_samples - 1) * (n / first) + 1
                } else {
                    self.quadrature.t_samples
                };
                Ok(Level {
                    torus: base.refined(&axes, n)?,
                    t_samples,
                    step: 1.0 / n as f64,
                })
            })
            .collect()
    }

    /// The scenario's own ladder.
    pub fn ladder_levels(&self) -> Result<Vec<Level>> {
        let ladder = self
            .ladder
            .as_ref()
            .ok_or_else(|| scenario_err("no refinement ladder declared"))?;
        self.levels_for(&ladder.levels)
    }

    pub fn base_level(&self) -> Result<Level> {
        let torus = self.torus()?;
        let n = *torus.resolution().iter().max().unwrap_or(&1);
        Ok(Level {
            torus,
            t_samples: self.quadrature.t_samples,
            step: 1.0 / n as f64,
        })
    }

    /// The family on `torus` with the given sample counts.
    pub fn family_on(&self, torus: &GridTorus, s_samples: usize, t_samples: usize) -> Result<TwoParamFamily> {
        let torus_arc = Arc::new(torus.clone());
        let flat = |e: &ExprMatrix| e.iter().flatten().cloned().collect::<Vec<_>>();
        let rank = self.rank;
        let family = match &self.family {
            FamilySpec::Path { connection } | FamilySpec::TwoParam { connection } => TwoParamFamily::new(
                torus,
                rank,
                s_samples,
                t_samples,
                Arc::new(ExprFamily {
                    torus: torus_arc,
                    rank,
                    entries: flat(connection),
                }),
            )?,
            FamilySpec::PureGauge { generator } => TwoParamFamily::new(
                torus,
                rank,
                s_samples,
                t_samples,
                Arc::new(GaugeFamily {
                    torus: torus_arc,
                    rank,
                    entries: flat(generator),
                    cache: Mutex::new(Vec::new()),
                }),
            )?,
            FamilySpec::Interpolation { start, end, base } => {
                let a0 = Connection::new(expr_form(&torus_arc, rank, &flat(start), 0.0, 0.0, 0, 0))?;
                let a1 = Connection::new(expr_form(&torus_arc, rank, &flat(end), 0.0, 0.0, 0, 0))?;
                two_param_connection(&a0, &a1, s_samples, t_samples, *base)?
            }
        };
        if self.declared_flat {
            family.declare_flat(self.flat_tolerance)
        } else {
            Ok(family)
        }
    }

    /// The family at the base resolution and quadrature.
    pub fn family(&self) -> Result<TwoParamFamily> {
        self.family_on(&self.torus()?, self.quadrature.s_samples, self.quadrature.t_samples)
    }

    /// Cycles a check evaluates on.
    pub fn cycles_for(&self, check: &CheckSpec, torus: &GridTorus) -> Result<Vec<Cycle>> {
        let Some(k) = check.suite.cycle_degree(check.p) else {
            return Ok(Vec::new());
        };
        match &check.cycles {
            None => {
                if k > torus.dim() {
                    Ok(Vec::new())
                } else {
                    Cycle::all_coordinate(torus, k)
                }
            }
            Some(list) => list
                .iter()
                .map(|axes| {
                    if axes.len() != k {
                        return Err(Error::InvalidCycle(format!(
                            "{} needs {k}-cycles, got axes {axes:?}",
                            check.suite.name()
                        )));
                    }
                    Cycle::coordinate(torus, axes, &vec![0; torus.dim()])
                })
                .collect(),
        }
    }

    fn matrices(&self) -> Vec<(&'static str, &ExprMatrix)> {
        match &self.family {
            FamilySpec::Path { connection } | FamilySpec::TwoParam { connection } => vec![("connection", connection)],
            FamilySpec::PureGauge { generator } => vec![("generator", generator)],
            FamilySpec::Interpolation { start, end, .. } => vec![("start", start), ("end", end)],
        }
    }

    /// Coarsest resolution each axis takes anywhere in the ladder.
    fn coarsest(&self) -> Vec<usize> {
        let mut res = self.manifold.resolution.clone();
        if let Some(l) = &self.ladder {
            if let Some(&min) = l.levels.iter().min() {
                for a in self.refine_axes() {
                    if a < res.len() {
                        res[a] = res[a].min(min);
                    }
                }
            }
        }
        res
    }

    /// Structural checks, the Nyquist limit, and the flatness declaration.
    pub fn validate(&self) -> Result<()> {
        let torus = self.torus()?;
        let dim = self.manifold.dim;
        if self.rank == 0 || self.rank > 8 {
            return Err(scenario_err(format!("rank {} outside 1..=8", self.rank)));
        }
        for m in [
            self.quadrature.t_samples,
            self.quadrature.s_samples,
            self.quadrature.u_samples,
            self.quadrature.character_samples,
        ] {
            simpson_weights(m)?;
        }
        if !(0.0..=1.0).contains(&self.path_s) {
            return Err(scenario_err(format!("path_s = {} outside [0, 1]", self.path_s)));
        }
        if let Some(l) = &self.ladder {
            for a in self.refine_axes() {
                if a >= dim {
                    return Err(scenario_err(format!("refine axis {a} out of range")));
                }
            }
            self.levels_for(&l.levels)?;
        }
        let wanted_degree = match self.family {
            FamilySpec::PureGauge { .. } => 0,
            _ => 1,
        };
        let coarsest = self.coarsest();
        for (name, m) in self.matrices() {
            if m.len() != self.rank || m.iter().any(|row| row.len() != self.rank) {
                return Err(scenario_err(format!("{name} must be a {0}×{0} matrix", self.rank)));
            }
            for (idx, e) in m.iter().flatten().enumerate() {
                let (i, j) = (idx / self.rank, idx % self.rank);
                let at = format!("{name}[{i}][{j}]");
                match e.degree().map_err(|msg| scenario_err(format!("{at}: {msg}")))? {
                    Some(d) if d != wanted_degree => {
                        return Err(scenario_err(format!("{at}: expected a {wanted_degree}-form, found a {d}-form")))
                    }
                    _ => {}
                }
                if let Some(a) = e.axes().find(|&a| a >= dim) {
                    return Err(scenario_err(format!("{at}: axis {a} out of range")));
                }
                match &self.family {
                    FamilySpec::Path { .. } if e.max_s_power() > 0 => {
                        return Err(scenario_err(format!("{at}: a path family cannot depend on s")))
                    }
                    FamilySpec::Interpolation { .. } if e.max_s_power() > 0 || e.max_t_power() > 0 => {
                        return Err(scenario_err(format!("{at}: interpolation endpoints cannot depend on s or t")))
                    }
                    _ => {}
                }
                for b in e.bumps() {
                    if b.center.len() != dim {
                        return Err(scenario_err(format!("{at}: bump centre needs {dim} coordinates")));
                    }
                }
                for w in e.waves() {
                    let k = w.wave_vector();
                    if k.len() != dim {
                        return Err(scenario_err(format!("{at}: wave vector {k:?} needs {dim} entries")));
                    }
                    for (axis, (&ka, &n)) in k.iter().zip(&coarsest).enumerate() {
                        if 2 * ka.unsigned_abs() as usize >= n {
                            return Err(Error::Nyquist {
                                axis,
                                wavenumber: ka,
                                resolution: n,
                            });
                        }
                    }
                }
            }
        }
        for c in &self.checks {
            if c.p == 0 {
                return Err(scenario_err(format!("{}: p must be at least 1", c.suite.name())));
            }
            if c.tolerance.is_nan() || c.tolerance < 0.0 {
                return Err(scenario_err(format!("{}: negative tolerance", c.suite.name())));
            }
            if let Some(cycles) = &c.cycles {
                if c.suite.cycle_degree(c.p).is_some() {
                    for axes in cycles {
                        Cycle::coordinate(&torus, axes, &vec![0; dim])?;
                    }
                }
            }
        }
        if self.declared_flat {
            self.family()?;
        }
        Ok(())
    }
}

/// `∂_s^ds ∂_t^dt` of a matrix of 1-form expressions at `(s, t)`.
fn expr_form(
    torus: &Arc<GridTorus>,
    rank: usize,
    entries: &[Expr],
    s: f64,
    t: f64,
    ds: u32,
    dt: u32,
) -> MatrixForm {
    MatrixForm::from_fn_on(torus.clone(), 1, rank, |x, axes, m| {
        for (slot, e) in m.iter_mut().zip(entries) {
            *slot = e.component(x, axes, s, t, ds, dt);
        }
    })
}

/// `A_{s,t}` read directly off expressions, with exact parameter derivatives.
struct ExprFamily {
    torus: Arc<GridTorus>,
    rank: usize,
    entries: Vec<Expr>,
}

impl FamilySource for ExprFamily {
    fn connection(&self, s: f64, t: f64) -> MatrixForm {
        expr_form(&self.torus, self.rank, &self.entries, s, t, 0, 0)
    }

    fn d_dt(&self, s: f64, t: f64) -> Option<MatrixForm> {
        Some(expr_form(&self.torus, self.rank, &self.entries, s, t, 0, 1))
    }

    fn d_ds(&self, s: f64, t: f64) -> Option<MatrixForm> {
        Some(expr_form(&self.torus, self.rank, &self.entries, s, t, 1, 0))
    }

    fn d_ds_dt(&self, s: f64, t: f64) -> Option<MatrixForm> {
        Some(expr_form(&self.torus, self.rank, &self.entries, s, t, 1, 1))
    }

    fn depends_on_s(&self) -> bool {
        self.entries.iter().any(|e| e.max_s_power() > 0)
    }
}

/// `−d(e^X) e^{−X}` with `d(e^X)` from the exact spatial gradient of `X`.
/// Parameter derivatives fall back to finite differences.
struct GaugeFamily {
    torus: Arc<GridTorus>,
    rank: usize,
    entries: Vec<Expr>,
    /// Recent samples; finite-difference velocities revisit neighbouring nodes.
    cache: Mutex<Vec<((u64, u64), MatrixForm)>>,
}

const GAUGE_CACHE: usize = 16;

impl GaugeFamily {
    fn evaluate(&self, s: f64, t: f64) -> MatrixForm {
        let n = self.rank;
        let nn = n * n;
        let dim = self.torus.dim();
        MatrixForm::from_point_fn_on(self.torus.clone(), 1, n, |x, slot| {
            let gen: Vec<Complex64> = self.entries.iter().map(|e| e.component(x, &[], s, t, 0, 0)).collect();
            let dgens: Vec<Vec<Complex64>> = (0..dim)
                .map(|axis| self.entries.iter().map(|e| e.gradient(x, axis, s, t)).collect())
                .collect();
            let (_, dgs) = matrix::expm_with_derivatives(&gen, &dgens, n);
            let neg: Vec<Complex64> = gen.iter().map(|z| -z).collect();
            let ginv = matrix::expm(&neg, n);
            for (axis, dg) in dgs.iter().enumerate() {
                for (v, out) in matrix::matmul(dg, &ginv, n).into_iter().zip(&mut slot[axis * nn..(axis + 1) * nn]) {
                    *out = -v;
                }
            }
        })
    }
}

impl FamilySource for GaugeFamily {
    fn connection(&self, s: f64, t: f64) -> MatrixForm {
        let s = if self.depends_on_s() { s } else { 0.0 };
        let key = (s.to_bits(), t.to_bits());
        let lock = || self.cache.lock().unwrap_or_else(|e| e.into_inner());
        if let Some((_, form)) = lock().iter().find(|(k, _)| *k == key) {
            return form.clone();
        }
        let form = self.evaluate(s, t);
        let mut cache = lock();
        if cache.len() == GAUGE_CACHE {
            cache.remove(0);
        }
        cache.push((key, form.clone()));
        form
    }

    fn depends_on_s(&self) -> bool {
        self.entries.iter().any(|e| e.max_s_power() > 0)
    }
}
