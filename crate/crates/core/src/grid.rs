//! Rectangular phase-space grids, finite differences and quadrature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::ClassicalPoint;

/// Cell-centred grid on `[r_min, r_max] × [p_min, p_max]`.
///
/// Node `(i, j)` sits at the centre of cell `i` along `R` and cell `j` along
/// `P`; the flat index is `i * n_p + j`. Integrals use the midpoint rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub r_min: f64,
    pub r_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub n_r: usize,
    pub n_p: usize,
}

pub const MIN_NODES: usize = 8;

impl PhaseGrid {
    pub fn new(r_min: f64, r_max: f64, p_min: f64, p_max: f64, n_r: usize, n_p: usize) -> Result<Self> {
        if n_r < MIN_NODES || n_p < MIN_NODES {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least {MIN_NODES} nodes per axis, got {n_r}×{n_p}"
            )));
        }
        if !(r_max > r_min && p_max > p_min) || ![r_min, r_max, p_min, p_max].iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "empty grid domain [{r_min}, {r_max}] × [{p_min}, {p_max}]"
            )));
        }
        Ok(Self { r_min, r_max, p_min, p_max, n_r, n_p })
    }

    /// Square grid `[-half_width, half_width]²` with `n` nodes per axis.
    pub fn square(half_width: f64, n: usize) -> Result<Self> {
        Self::new(-half_width, half_width, -half_width, half_width, n, n)
    }

    pub fn len(&self) -> usize {
        self.n_r * self.n_p
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dr(&self) -> f64 {
        (self.r_max - self.r_min) / self.n_r as f64
    }

    pub fn dp(&self) -> f64 {
        (self.p_max - self.p_min) / self.n_p as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.dr() * self.dp()
    }

    pub fn r(&self, i: usize) -> f64 {
        self.r_min + (i as f64 + 0.5) * self.dr()
    }

    pub fn p(&self, j: usize) -> f64 {
        self.p_min + (j as f64 + 0.5) * self.dp()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_p + j
    }

    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx / self.n_p, idx % self.n_p)
    }

    pub fn point(&self, idx: usize) -> ClassicalPoint {
        let (i, j) = self.coords(idx);
        ClassicalPoint::new(self.r(i), self.p(j))
    }

    pub fn points(&self) -> Vec<ClassicalPoint> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }

    /// True for nodes in the outermost ring of cells.
    pub fn is_boundary(&self, idx: usize) -> bool {
        let (i, j) = self.coords(idx);
        i == 0 || j == 0 || i + 1 == self.n_r || j + 1 == self.n_p
    }

    /// Same domain with the node count per axis multiplied by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        Self { n_r: self.n_r * factor, n_p: self.n_p * factor, ..*self }
    }

    /// Midpoint-rule integral of a nodal field.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        values.iter().sum::<f64>() * self.cell_area()
    }

    /// `sqrt(∫ v²)` by the midpoint rule.
    pub fn l2_norm(&self, values: &[f64]) -> f64 {
        (values.iter().map(|v| v * v).sum::<f64>() * self.cell_area()).sqrt()
    }

    pub fn check_same(&self, other: &PhaseGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StencilOrder {
    Second,
    #[default]
    Fourth,
}

/// Derivative along a strided line of `n` values with spacing `h`.
fn line_derivative(
    values: &[f64],
    start: usize,
    stride: usize,
    n: usize,
    h: f64,
    order: StencilOrder,
    out: &mut [f64],
) {
    let at = |k: usize| values[start + k * stride];
    for k in 0..n {
        let d = if k == 0 {
            (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
        } else if k + 1 == n {
            (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h)
        } else if order == StencilOrder::Fourth && k >= 2 && k + 2 < n {
            (at(k - 2) - 8.0 * at(k - 1) + 8.0 * at(k + 1) - at(k + 2)) / (12.0 * h)
        } else {
            (at(k + 1) - at(k - 1)) / (2.0 * h)
        };
        out[start + k * stride] = d;
    }
}

/// `∂_R` of a nodal field. Interior nodes use centred differences of the
/// requested order; boundary nodes use one-sided second-order differences.
pub fn derivative_r(grid: &PhaseGrid, values: &[f64], order: StencilOrder) -> Vec<f64> {
    debug_assert_eq!(values.len(), grid.len());
    let mut out = vec![0.0; values.len()];
    for j in 0..grid.n_p {
        line_derivative(values, j, grid.n_p, grid.n_r, grid.dr(), order, &mut out);
    }
    out
}

/// `∂_P` of a nodal field; see [`derivative_r`].
pub fn derivative_p(grid: &PhaseGrid, values: &[f64], order: StencilOrder) -> Vec<f64> {
    debug_assert_eq!(values.len(), grid.len());
    let mut out = vec![0.0; values.len()];
    for i in 0..grid.n_r {
        line_derivative(values, i * grid.n_p, 1, grid.n_p, grid.dp(), order, &mut out);
    }
    out
}

/// Canonical bracket `{H, f} = ∂_R H ∂_P f - ∂_P H ∂_R f` evaluated in the
/// conservative form `∂_P(f ∂_R H) - ∂_R(f ∂_P H)`, given nodal partials of
/// `H`. The form telescopes under summation, so `∫{H, f}` vanishes up to
/// boundary fluxes.
pub fn poisson_bracket(
    grid: &PhaseGrid,
    dh_r: &[f64],
    dh_p: &[f64],
    f: &[f64],
    order: StencilOrder,
) -> Vec<f64> {
    let flux_p: Vec<f64> = f.iter().zip(dh_r).map(|(f, h)| f * h).collect();
    let flux_r: Vec<f64> = f.iter().zip(dh_p).map(|(f, h)| f * h).collect();
    let a = derivative_p(grid, &flux_p, order);
    let b = derivative_r(grid, &flux_r, order);
    a.into_iter().zip(b).map(|(a, b)| a - b).collect()
}

/// Point stencil weights for a first derivative: `(offsets, weights)` in units
/// of the step.
pub fn point_stencil(order: StencilOrder) -> (&'static [f64], &'static [f64]) {
    match order {
        StencilOrder::Second => (&[-1.0, 1.0], &[-0.5, 0.5]),
        StencilOrder::Fourth => (
            &[-2.0, -1.0, 1.0, 2.0],
            &[1.0 / 12.0, -8.0 / 12.0, 8.0 / 12.0, -1.0 / 12.0],
        ),
    }
}
