//! Graded algebra of matrix-valued forms, shared by forms on `X` and by forms
//! on a parameter cube `I^m × X`.
//!
//! A form on `I^m × X` is stored in the split representation
//! `Σ_S dθ_S ∧ α_S`, one `MatrixForm` on `X` per subset `S` of the parameter
//! directions, where `dθ_S` is the wedge of the parameter differentials in
//! increasing bit order (bit 0 = `t`, bit 1 = `s`).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::forms::{shuffle_sign, MatrixForm};

/// Operations the invariant polynomial needs from its arguments.
pub trait GradedForm: Clone + Send + Sync {
    /// Total form degree.
    fn degree(&self) -> usize;
    fn rank(&self) -> usize;
    fn wedge(&self, other: &Self) -> Result<Self>;
    fn trace(&self) -> Self;
    fn scale(&self, c: Complex64) -> Self;
    /// `self += c * other`.
    fn axpy(&mut self, c: Complex64, other: &Self) -> Result<()>;
}

impl GradedForm for MatrixForm {
    fn degree(&self) -> usize {
        MatrixForm::degree(self)
    }

    fn rank(&self) -> usize {
        MatrixForm::rank(self)
    }

    fn wedge(&self, other: &Self) -> Result<Self> {
        MatrixForm::wedge(self, other)
    }

    fn trace(&self) -> Self {
        MatrixForm::trace(self)
    }

    fn scale(&self, c: Complex64) -> Self {
        MatrixForm::scale(self, c)
    }

    fn axpy(&mut self, c: Complex64, other: &Self) -> Result<()> {
        MatrixForm::axpy(self, c, other)
    }
}

/// Homogeneous form on `I^m × X` in split representation.
#[derive(Clone, Debug)]
pub struct ParamForm {
    params: usize,
    degree: usize,
    rank: usize,
    parts: Vec<Option<MatrixForm>>,
}

impl ParamForm {
    /// Build from `(mask, α_mask)` pairs; every part must have X-degree
    /// `degree - |mask|`.
    pub fn new(params: usize, degree: usize, parts: Vec<(u32, MatrixForm)>) -> Result<Self> {
        let mut slots = vec![None; 1 << params];
        let mut rank = None;
        for (mask, form) in parts {
            if mask as usize >= slots.len() {
                return Err(Error::Polynomial(format!("parameter mask {mask:#b} out of range")));
            }
            let want = degree
                .checked_sub(mask.count_ones() as usize)
                .ok_or(Error::DegreeMismatch {
                    expected: degree,
                    found: mask.count_ones() as usize,
                })?;
            if form.degree() != want {
                return Err(Error::DegreeMismatch {
                    expected: want,
                    found: form.degree(),
                });
            }
            match rank {
                None => rank = Some(form.rank()),
                Some(r) if r != form.rank() => return Err(Error::RankMismatch(r, form.rank())),
                _ => {}
            }
            slots[mask as usize] = Some(form);
        }
        Ok(Self {
            params,
            degree,
            rank: rank.unwrap_or(1),
            parts: slots,
        })
    }

    /// A form on `X` pulled back to `I^m × X` (no parameter differentials).
    pub fn pullback(params: usize, form: MatrixForm) -> Self {
        let degree = form.degree();
        Self::new(params, degree, vec![(0, form)]).expect("pullback is always consistent")
    }

    pub fn params(&self) -> usize {
        self.params
    }

    /// The `α_S` coefficient of `dθ_S`, if non-zero.
    pub fn part(&self, mask: u32) -> Option<&MatrixForm> {
        self.parts.get(mask as usize).and_then(|p| p.as_ref())
    }

    pub fn into_part(mut self, mask: u32) -> Option<MatrixForm> {
        self.parts.get_mut(mask as usize).and_then(|p| p.take())
    }
}

impl GradedForm for ParamForm {
    fn degree(&self) -> usize {
        self.degree
    }

    fn rank(&self) -> usize {
        self.rank
    }

    fn wedge(&self, other: &Self) -> Result<Self> {
        if self.params != other.params {
            return Err(Error::Polynomial("parameter spaces differ".into()));
        }
        let mut out: Vec<Option<MatrixForm>> = vec![None; 1 << self.params];
        for (s, a) in self.parts.iter().enumerate() {
            let Some(a) = a else { continue };
            for (t, b) in other.parts.iter().enumerate() {
                let Some(b) = b else { continue };
                let (s, t) = (s as u32, t as u32);
                if s & t != 0 {
                    continue;
                }
                // (dθ_S α)(dθ_T β) = (-1)^{deg α |T|} dθ_S dθ_T α β
                let mut sign = shuffle_sign(s, t);
                if (a.degree() * t.count_ones() as usize) % 2 == 1 {
                    sign = -sign;
                }
                let prod = a.wedge(b)?;
                if prod.is_canonical_zero() {
                    continue;
                }
                let slot = &mut out[(s | t) as usize];
                match slot {
                    Some(acc) => acc.axpy(Complex64::new(sign, 0.0), &prod)?,
                    None => *slot = Some(if sign > 0.0 { prod } else { prod.scale_real(-1.0) }),
                }
            }
        }
        let rank = if self.rank == 1 { other.rank } else { self.rank };
        Ok(Self {
            params: self.params,
            degree: self.degree + other.degree,
            rank,
            parts: out,
        })
    }

    fn trace(&self) -> Self {
        Self {
            params: self.params,
            degree: self.degree,
            rank: 1,
            parts: self
                .parts
                .iter()
                .map(|p| p.as_ref().map(|f| f.trace()))
                .collect(),
        }
    }

    fn scale(&self, c: Complex64) -> Self {
        Self {
            parts: self
                .parts
                .iter()
                .map(|p| p.as_ref().map(|f| f.scale(c)))
                .collect(),
            ..self.clone_shape()
        }
    }

    fn axpy(&mut self, c: Complex64, other: &Self) -> Result<()> {
        if self.params != other.params || self.degree != other.degree {
            return Err(Error::DegreeMismatch {
                expected: self.degree,
                found: other.degree,
            });
        }
        for (mine, theirs) in self.parts.iter_mut().zip(&other.parts) {
            let Some(theirs) = theirs else { continue };
            match mine {
                Some(m) => m.axpy(c, theirs)?,
                None => *mine = Some(theirs.scale(c)),
            }
        }
        Ok(())
    }
}

impl ParamForm {
    fn clone_shape(&self) -> Self {
        Self {
            params: self.params,
            degree: self.degree,
            rank: self.rank,
            parts: Vec::new(),
        }
    }
}
