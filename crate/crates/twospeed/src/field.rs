//! Piecewise fields {f, g} on the characteristic domain D_T, stored as
//! one-sided node arrays for the lower strip (lambda x <= t <= mu x) and
//! the upper region (mu x <= t <= T). Each array carries a ghost band of
//! smooth extension values past the interface so interpolation and
//! differencing never straddle t = mu x; one-sided interface limits are
//! stored explicitly at the crossings (x_i, mu x_i).

use std::sync::Arc;

use crate::error::{Result, TwoSpeedError};
use crate::model::{CharGrid, Side};
use crate::numerics::Grid2;

#[derive(Clone, Debug)]
pub struct PiecewiseField {
    grid: Arc<CharGrid>,
    pub(crate) lower: [Grid2; 2],
    pub(crate) upper: [Grid2; 2],
    /// One-sided limits at the interface crossings, indexed by column.
    pub(crate) iface_lower: [Vec<f64>; 2],
    pub(crate) iface_upper: [Vec<f64>; 2],
}

impl PiecewiseField {
    pub fn filled(grid: Arc<CharGrid>, value: f64) -> Self {
        let n = grid.n() + 1;
        let ni = grid.n_iface() + 1;
        PiecewiseField {
            grid,
            lower: [Grid2::new(n, n, value), Grid2::new(n, n, value)],
            upper: [Grid2::new(n, n, value), Grid2::new(n, n, value)],
            iface_lower: [vec![value; ni], vec![value; ni]],
            iface_upper: [vec![value; ni], vec![value; ni]],
        }
    }

    pub fn zeros(grid: Arc<CharGrid>) -> Self {
        Self::filled(grid, 0.0)
    }

    /// Sample closures on every stored slot (ghost bands included) and at
    /// the interface crossings.
    pub fn from_closures<F, G>(grid: Arc<CharGrid>, f: F, g: G) -> Self
    where
        F: Fn(f64, f64) -> [f64; 2],
        G: Fn(f64, f64) -> [f64; 2],
    {
        let mut out = Self::filled(grid.clone(), f64::NAN);
        let n = grid.n();
        for i in 0..=n {
            let x = grid.x(i);
            let (lo, hi) = grid.lower_band(i);
            for j in lo..=hi {
                let v = f(x, grid.t(j));
                out.lower[0].set(i, j, v[0]);
                out.lower[1].set(i, j, v[1]);
            }
            let (lo, hi) = grid.upper_band(i);
            for j in lo..=hi {
                let v = g(x, grid.t(j));
                out.upper[0].set(i, j, v[0]);
                out.upper[1].set(i, j, v[1]);
            }
        }
        for i in 0..=grid.n_iface() {
            let (x, t) = (grid.x(i), grid.iface_t(i));
            let vf = f(x, t);
            let vg = g(x, t);
            for comp in 0..2 {
                out.iface_lower[comp][i] = vf[comp];
                out.iface_upper[comp][i] = vg[comp];
            }
        }
        out
    }

    pub fn grid_arc(&self) -> &Arc<CharGrid> {
        &self.grid
    }

    #[inline]
    pub fn node(&self, side: Side, i: usize, j: usize) -> [f64; 2] {
        match side {
            Side::Lower => [self.lower[0].at(i, j), self.lower[1].at(i, j)],
            Side::Upper => [self.upper[0].at(i, j), self.upper[1].at(i, j)],
        }
    }

    #[inline]
    pub fn set_node(&mut self, side: Side, i: usize, j: usize, v: [f64; 2]) {
        match side {
            Side::Lower => {
                self.lower[0].set(i, j, v[0]);
                self.lower[1].set(i, j, v[1]);
            }
            Side::Upper => {
                self.upper[0].set(i, j, v[0]);
                self.upper[1].set(i, j, v[1]);
            }
        }
    }

    /// One-sided interface values at crossing column i: (lower, upper).
    pub fn iface(&self, i: usize) -> ([f64; 2], [f64; 2]) {
        (
            [self.iface_lower[0][i], self.iface_lower[1][i]],
            [self.iface_upper[0][i], self.iface_upper[1][i]],
        )
    }

    /// Jump g - f at interface crossing column i.
    pub fn iface_jump(&self, i: usize) -> [f64; 2] {
        let (f, g) = self.iface(i);
        [g[0] - f[0], g[1] - f[1]]
    }

    /// Strict evaluation inside D_T with an explicit side; errors outside.
    pub fn eval(&self, x: f64, t: f64, side: Side) -> Result<[f64; 2]> {
        let g = &self.grid;
        let s = g.speeds();
        let tol = 1e-9 * (1.0 + t.abs() + x.abs());
        let in_dom = x >= -tol
            && x <= g.x(g.n()) + tol
            && t <= g.t_horizon() + tol
            && match side {
                Side::Lower => t >= s.lambda() * x - tol && t <= s.mu() * x + tol,
                Side::Upper => t >= s.mu() * x - tol,
            };
        if !in_dom {
            return Err(TwoSpeedError::Domain(format!(
                "point (x={x}, t={t}) outside the {side:?} region of D_T"
            )));
        }
        Ok([
            self.eval_comp_snapped(side, 0, x, t),
            self.eval_comp_snapped(side, 1, x, t),
        ])
    }

    /// Bilinear interpolation on the requested side. The interpolation cell
    /// is snapped into the side's valid storage band and the weights are
    /// clamped to [0, 1], so any query is deterministic and bounded by the
    /// stored values; in-region queries get plain bilinear interpolation.
    pub(crate) fn eval_comp_snapped(&self, side: Side, comp: usize, x: f64, t: f64) -> f64 {
        let g = &self.grid;
        let n = g.n();
        let (h, ht) = (g.h(), g.ht());
        let xc = x.clamp(0.0, n as f64 * h);
        let tc = t.clamp(0.0, n as f64 * ht);
        let i0 = ((xc / h) as usize).min(n - 1);
        let (lo0, hi0) = match side {
            Side::Lower => g.lower_band(i0),
            Side::Upper => g.upper_band(i0),
        };
        let (lo1, hi1) = match side {
            Side::Lower => g.lower_band(i0 + 1),
            Side::Upper => g.upper_band(i0 + 1),
        };
        let lo = lo0.max(lo1).min(n - 1);
        let hi = hi0.min(hi1).max(lo + 1);
        let j0 = (((tc / ht) as usize).min(n - 1)).clamp(lo, hi - 1);
        let u = ((xc - i0 as f64 * h) / h).clamp(0.0, 1.0);
        let v = ((tc - j0 as f64 * ht) / ht).clamp(0.0, 1.0);
        let arr = match side {
            Side::Lower => &self.lower[comp],
            Side::Upper => &self.upper[comp],
        };
        arr.at(i0, j0) * (1.0 - u) * (1.0 - v)
            + arr.at(i0 + 1, j0) * u * (1.0 - v)
            + arr.at(i0, j0 + 1) * (1.0 - u) * v
            + arr.at(i0 + 1, j0 + 1) * u * v
    }

    /// Largest finite |value| over real-region nodes of both sides.
    pub fn max_abs_interior(&self) -> f64 {
        let g = &self.grid;
        let mut m: f64 = 0.0;
        for i in 0..=g.n() {
            for j in 0..=g.n() {
                if g.lower_real(i, j) {
                    for comp in 0..2 {
                        let v = self.lower[comp].at(i, j);
                        if v.is_finite() {
                            m = m.max(v.abs());
                        }
                    }
                }
                if g.upper_real(i, j) {
                    for comp in 0..2 {
                        let v = self.upper[comp].at(i, j);
                        if v.is_finite() {
                            m = m.max(v.abs());
                        }
                    }
                }
            }
        }
        m
    }

    /// Largest |self - other| over real-region nodes where both are finite.
    pub fn max_abs_diff_interior(&self, other: &PiecewiseField) -> f64 {
        let g = &self.grid;
        let mut m: f64 = 0.0;
        for i in 0..=g.n() {
            for j in 0..=g.n() {
                for comp in 0..2 {
                    if g.lower_real(i, j) {
                        let d = self.lower[comp].at(i, j) - other.lower[comp].at(i, j);
                        if d.is_finite() {
                            m = m.max(d.abs());
                        }
                    }
                    if g.upper_real(i, j) {
                        let d = self.upper[comp].at(i, j) - other.upper[comp].at(i, j);
                        if d.is_finite() {
                            m = m.max(d.abs());
                        }
                    }
                }
            }
        }
        m
    }

    /// Refill every ghost slot by quadratic extrapolation from the nearest
    /// real rows of the same column. Keeps the stored one-sided extensions
    /// smooth to O(h^3), which node-level consumers of the extension
    /// (interpolation, differencing) rely on.
    pub(crate) fn extrapolate_ghosts(&mut self) {
        let grid = self.grid_arc().clone();
        let n = grid.n();
        for side in [Side::Lower, Side::Upper] {
            for i in 0..=n {
                let (lo, hi) = match side {
                    Side::Lower => grid.lower_band(i),
                    Side::Upper => grid.upper_band(i),
                };
                let hi = hi.min(n);
                let real = |j: usize| match side {
                    Side::Lower => grid.lower_real(i, j),
                    Side::Upper => grid.upper_real(i, j),
                };
                let mut j_lo = usize::MAX;
                let mut j_hi = 0usize;
                for j in lo..=hi {
                    if real(j) {
                        j_lo = j_lo.min(j);
                        j_hi = j_hi.max(j);
                    }
                }
                if j_lo == usize::MAX {
                    // no real rows in this column (region edge): extend the
                    // stored band from the previous column
                    if i > 0 {
                        for j in lo..=hi {
                            let v = self.node(side, i - 1, j);
                            self.set_node(side, i, j, v);
                        }
                    }
                    continue;
                }
                let quad = |f0: [f64; 2], f1: [f64; 2], f2: [f64; 2], m: f64| -> [f64; 2] {
                    let (w0, w1, w2) = (
                        (m + 1.0) * (m + 2.0) / 2.0,
                        -m * (m + 2.0),
                        m * (m + 1.0) / 2.0,
                    );
                    [
                        w0 * f0[0] + w1 * f1[0] + w2 * f2[0],
                        w0 * f0[1] + w1 * f1[1] + w2 * f2[1],
                    ]
                };
                for j in lo..=hi {
                    if real(j) {
                        continue;
                    }
                    let v = if j > j_hi {
                        if j_hi >= j_lo + 2 {
                            quad(
                                self.node(side, i, j_hi),
                                self.node(side, i, j_hi - 1),
                                self.node(side, i, j_hi - 2),
                                (j - j_hi) as f64,
                            )
                        } else {
                            self.node(side, i, j_hi)
                        }
                    } else if j_hi >= j_lo + 2 {
                        quad(
                            self.node(side, i, j_lo),
                            self.node(side, i, j_lo + 1),
                            self.node(side, i, j_lo + 2),
                            (j_lo - j) as f64,
                        )
                    } else {
                        self.node(side, i, j_lo)
                    };
                    self.set_node(side, i, j, v);
                }
            }
        }
    }

    /// Field scale: max |value| over real nodes and interface limits.
    pub fn scale(&self) -> f64 {
        let mut m = self.max_abs_interior();
        for comp in 0..2 {
            for v in self.iface_lower[comp].iter().chain(self.iface_upper[comp].iter()) {
                if v.is_finite() {
                    m = m.max(v.abs());
                }
            }
        }
        m
    }
}
