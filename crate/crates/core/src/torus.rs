//! Periodic rectangular grids modelling the flat unit torus `T^d` (and open
//! boxes when some axes are not periodic), together with coordinate cycles
//! and integration of scalar forms over them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{mask_index, MatrixForm};
use crate::quadrature::simpson_weights;

pub const MIN_RESOLUTION: usize = 4;

/// A uniform grid on `[0,1)^d`. Grid point `j` on axis `i` sits at `j / N_i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridTorus {
    resolution: Vec<usize>,
    periodic: Vec<bool>,
    #[serde(skip)]
    strides: Vec<usize>,
}

impl GridTorus {
    pub fn new(dim: usize, resolution: &[usize], periodic: &[bool]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidGrid("dimension must be at least 1".into()));
        }
        if resolution.len() != dim || periodic.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "dimension {dim} but {} resolutions and {} periodicity flags",
                resolution.len(),
                periodic.len()
            )));
        }
        if dim > 8 {
            return Err(Error::InvalidGrid(format!("dimension {dim} exceeds 8")));
        }
        if let Some((axis, n)) = resolution
            .iter()
            .enumerate()
            .find(|(_, &n)| n < MIN_RESOLUTION)
        {
            return Err(Error::InvalidGrid(format!(
                "resolution {n} on axis {axis} is below the minimum {MIN_RESOLUTION}"
            )));
        }
        let mut strides = vec![1; dim];
        for i in (0..dim.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * resolution[i + 1];
        }
        Ok(Self {
            resolution: resolution.to_vec(),
            periodic: periodic.to_vec(),
            strides,
        })
    }

    /// Fully periodic torus with the same resolution on every axis.
    pub fn periodic(dim: usize, n: usize) -> Result<Self> {
        Self::new(dim, &vec![n; dim], &vec![true; dim])
    }

    pub fn dim(&self) -> usize {
        self.resolution.len()
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn periodic_axes(&self) -> &[bool] {
        &self.periodic
    }

    pub fn is_periodic(&self, axis: usize) -> bool {
        self.periodic[axis]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        1.0 / self.resolution[axis] as f64
    }

    pub fn num_points(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    /// Grid index of `point` along `axis`.
    #[inline]
    pub fn coord(&self, point: usize, axis: usize) -> usize {
        (point / self.strides[axis]) % self.resolution[axis]
    }

    pub fn coords(&self, point: usize) -> Vec<usize> {
        (0..self.dim()).map(|a| self.coord(point, a)).collect()
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .zip(&self.strides)
            .map(|(c, s)| c * s)
            .sum()
    }

    /// Physical position of `point`.
    pub fn position(&self, point: usize) -> Vec<f64> {
        (0..self.dim())
            .map(|a| self.coord(point, a) as f64 * self.spacing(a))
            .collect()
    }

    /// Neighbour index `offset` steps along `axis`, wrapping on periodic axes.
    /// Returns `None` when stepping off a non-periodic axis.
    #[inline]
    pub fn shifted(&self, point: usize, axis: usize, offset: isize) -> Option<usize> {
        let n = self.resolution[axis] as isize;
        let c = self.coord(point, axis) as isize;
        let mut target = c + offset;
        if self.periodic[axis] {
            target = target.rem_euclid(n);
        } else if target < 0 || target >= n {
            return None;
        }
        Some((point as isize + (target - c) * self.strides[axis] as isize) as usize)
    }

    /// Same grid with `n` points on every axis listed in `axes`.
    pub fn refined(&self, axes: &[usize], n: usize) -> Result<Self> {
        let mut res = self.resolution.clone();
        for &a in axes {
            if a >= res.len() {
                return Err(Error::InvalidGrid(format!("axis {a} out of range")));
            }
            res[a] = n;
        }
        Self::new(self.dim(), &res, &self.periodic)
    }

}

/// One oriented coordinate sub-torus: the axes it spans, the grid point fixing
/// the remaining coordinates, and an integer multiplicity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleComponent {
    pub axes: Vec<usize>,
    pub offset: Vec<usize>,
    pub weight: i64,
}

/// An integer combination of coordinate sub-tori of a common dimension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cycle {
    pub dim: usize,
    pub components: Vec<CycleComponent>,
}

impl Cycle {
    /// The sub-torus spanned by `axes` through the grid point `offset`.
    pub fn coordinate(torus: &GridTorus, axes: &[usize], offset: &[usize]) -> Result<Self> {
        let mut sorted = axes.to_vec();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidCycle(format!("repeated axis in {axes:?}")));
        }
        if let Some(&a) = sorted.iter().find(|&&a| a >= torus.dim()) {
            return Err(Error::InvalidCycle(format!(
                "axis {a} out of range for dimension {}",
                torus.dim()
            )));
        }
        if let Some(&a) = sorted.iter().find(|&&a| !torus.is_periodic(a)) {
            return Err(Error::InvalidCycle(format!(
                "axis {a} is not periodic, the sub-torus would have boundary"
            )));
        }
        if offset.len() != torus.dim() {
            return Err(Error::InvalidCycle(format!(
                "offset has {} coordinates, grid has {}",
                offset.len(),
                torus.dim()
            )));
        }
        if let Some((a, &c)) = offset
            .iter()
            .enumerate()
            .find(|(a, &c)| c >= torus.resolution()[*a])
        {
            return Err(Error::InvalidCycle(format!(
                "offset {c} is off the grid on axis {a}"
            )));
        }
        Ok(Self {
            dim: sorted.len(),
            components: vec![CycleComponent {
                axes: sorted,
                offset: offset.to_vec(),
                weight: 1,
            }],
        })
    }

    /// Every coordinate `k`-torus through the origin, in lexicographic axis order.
    pub fn all_coordinate(torus: &GridTorus, k: usize) -> Result<Vec<Self>> {
        let origin = vec![0; torus.dim()];
        crate::forms::axis_masks(torus.dim(), k)
            .into_iter()
            .map(|m| Self::coordinate(torus, &crate::forms::mask_axes(m), &origin))
            .collect()
    }

    pub fn scaled(&self, k: i64) -> Self {
        let mut out = self.clone();
        for c in &mut out.components {
            c.weight *= k;
        }
        out
    }

    pub fn plus(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DegreeMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let mut out = self.clone();
        out.components.extend(other.components.iter().cloned());
        Ok(out)
    }

    /// Boundary of the chain. Coordinate sub-tori of periodic axes are closed,
    /// so every component contributes nothing; the list is always empty.
    pub fn boundary(&self, torus: &GridTorus) -> Vec<CycleComponent> {
        self.components
            .iter()
            .filter(|c| c.axes.iter().any(|&a| !torus.is_periodic(a)))
            .cloned()
            .collect()
    }

    /// Short label such as `z01@0,0,0` or `2*z12@0,0,0`.
    pub fn label(&self) -> String {
        self.components
            .iter()
            .map(|c| {
                let axes: String = c.axes.iter().map(|a| a.to_string()).collect();
                let off: Vec<String> = c.offset.iter().map(|o| o.to_string()).collect();
                let w = if c.weight == 1 {
                    String::new()
                } else {
                    format!("{}*", c.weight)
                };
                format!("{w}z{axes}@{}", off.join(","))
            })
            .collect::<Vec<_>>()
            .join("+")
    }
}

/// `I × X` (optionally `I × I × X`) sampled for composite Simpson quadrature.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridProduct {
    pub base: GridTorus,
    pub fiber_samples: usize,
    pub second_fiber_samples: Option<usize>,
}

impl GridProduct {
    pub fn new(base: GridTorus, fiber_samples: usize, second: Option<usize>) -> Result<Self> {
        simpson_weights(fiber_samples)?;
        if let Some(s) = second {
            simpson_weights(s)?;
        }
        Ok(Self {
            base,
            fiber_samples,
            second_fiber_samples: second,
        })
    }

    pub fn fiber_nodes(&self) -> Vec<f64> {
        nodes(self.fiber_samples)
    }
}

/// Uniform nodes `j/(m-1)` on `[0,1]`.
pub fn nodes(m: usize) -> Vec<f64> {
    (0..m).map(|j| j as f64 / (m - 1) as f64).collect()
}

/// Integral of a scalar `k`-form over a `k`-cycle (periodic trapezoid rule on
/// each coordinate sub-torus).
pub fn integrate(form: &MatrixForm, cycle: &Cycle) -> Result<num_complex::Complex64> {
    if form.rank() != 1 {
        return Err(Error::RankMismatch(form.rank(), 1));
    }
    if form.degree() != cycle.dim {
        return Err(Error::DegreeMismatch {
            expected: cycle.dim,
            found: form.degree(),
        });
    }
    let torus = form.torus();
    let mut total = num_complex::Complex64::new(0.0, 0.0);
    for comp in &cycle.components {
        if comp.offset.len() != torus.dim() || comp.axes.iter().any(|&a| a >= torus.dim()) {
            return Err(Error::InvalidCycle("cycle does not live on the form's grid".into()));
        }
        let mask = comp.axes.iter().fold(0u32, |m, &a| m | (1 << a));
        let ci = mask_index(torus.dim(), mask);
        let mut coords = comp.offset.clone();
        for &a in &comp.axes {
            coords[a] = 0;
        }
        let counts: Vec<usize> = comp.axes.iter().map(|&a| torus.resolution()[a]).collect();
        let total_pts: usize = counts.iter().product();
        let mut sum = num_complex::Complex64::new(0.0, 0.0);
        for _ in 0..total_pts {
            let p = torus.index(&coords);
            sum += form.coeff(p, ci)[0];
            // odometer over the cycle axes, last axis fastest
            for (slot, &a) in comp.axes.iter().enumerate().rev() {
                coords[a] += 1;
                if coords[a] < counts[slot] {
                    break;
                }
                coords[a] = 0;
            }
        }
        let cell: f64 = comp.axes.iter().map(|&a| torus.spacing(a)).product();
        total += sum * cell * comp.weight as f64;
    }
    Ok(total)
}
