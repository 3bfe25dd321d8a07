//! Solver for the characteristic-transmission Goursat problem
//! L f = F on the lower strip, L g = G on the upper region, with data
//! p on x = 0, (r, s2) on t = lambda x and (q, s1) on t = mu x.
//!
//! The A = B = 0, F = G = 0 problem decouples and is solved in closed form
//! from one-variable functions of t -+ c x. The inhomogeneous part is the
//! characteristic-domain integral operator I evaluated through cumulative
//! cell tables in (p, q) = (t - c x, t + c x) coordinates, and the full
//! problem is the Volterra-like fixed point
//!   {f, g} = hom + Iw({F, G}) + Iw({A f_x + B f, A g_x + B g}),
//! solved by Picard iteration on time windows short enough to contract.
//!
//! Iw denotes the wave-solution normalization diag(1/4lambda^2, 1/4mu^2) of
//! the plain characteristic-coordinate integrals; the area-integral
//! normalization diag(1/2lambda, 1/2mu) is exposed as `integral_op_i`.

use std::sync::Arc;

use crate::chardata::GoursatData;
use crate::error::{Result, TwoSpeedError};
pub use crate::field::PiecewiseField;
use crate::model::{apply_l, CharGrid, CoefficientField, Side, SpeedPair};
use crate::numerics::{
    clip_halfplane, d1_onesided, integrate_bilinear_polygon, CumulativeIntegral, Func1, Grid2,
};

// ---------------------------------------------------------------------------
// Closed-form solution of the decoupled homogeneous problem.
// ---------------------------------------------------------------------------

/// The A = B = 0, F = G = 0 solution, as one-variable functions.
///
/// Component 1 uses the implicit ansatz f1 = a(t - lambda x) + b(t + lambda x),
/// g1 = c(t - lambda x) + d(t + lambda x); the boundary and transmission
/// conditions determine b and e = c - a directly and then d, c, a in turn.
/// Component 2 is d'Alembert from the non-characteristic line t = lambda x in
/// the lower strip and a Goursat parallelogram construction above. The
/// normalization constant `gamma` (default a(0) = 0) shifts a, b, c, d
/// individually but leaves f and g unchanged.
pub struct HomogeneousSolution {
    speeds: SpeedPair,
    t_horizon: f64,
    gamma: f64,
    p: [Func1; 2],
    q: [Func1; 2],
    r: [Func1; 2],
    e_tab: CumulativeIntegral,
    s2_tab: CumulativeIntegral,
    phi0: f64,
    psi0: f64,
}

const N_TAB: usize = 4096;

impl HomogeneousSolution {
    pub fn new(data: &GoursatData, speeds: SpeedPair, gamma: f64) -> Self {
        let (lam, mu) = (speeds.lambda(), speeds.mu());
        let t = data.t_horizon;
        let s1 = data.s1.clone();
        let q1 = data.q[0].clone();
        // e' pulled back from (q - jump, s1) on t = mu x:
        // e'(z) = ((mu+lambda) s1(y) - q1'(y)) / (2 lambda) at y = z/(mu-lambda)
        let z_max = (mu - lam) * t / mu;
        let e_tab = CumulativeIntegral::build(
            0.0,
            z_max,
            N_TAB,
            data.p[0].eval(0.0) - gamma,
            move |z| {
                let y = z / (mu - lam);
                ((mu + lam) * s1.eval(y) - q1.deriv(y)) / (2.0 * lam)
            },
        );
        let s2 = data.s2.clone();
        let s2_tab = CumulativeIntegral::build(0.0, t / lam, N_TAB, 0.0, move |y| s2.eval(y));
        let phi0 = 0.0;
        let psi0 = data.r[1].eval(0.0) - phi0;
        HomogeneousSolution {
            speeds,
            t_horizon: t,
            gamma,
            p: data.p.clone(),
            q: data.q.clone(),
            r: data.r.clone(),
            e_tab,
            s2_tab,
            phi0,
            psi0,
        }
    }

    fn b(&self, eta: f64) -> f64 {
        let lam = self.speeds.lambda();
        self.r[0]
            .eval_clamped(eta / (2.0 * lam), 0.0, self.t_horizon / lam)
            - self.gamma
    }

    fn d(&self, eta: f64) -> f64 {
        let s = self.speeds;
        let q_arg = (eta / (s.lambda() + s.mu())).clamp(0.0, self.t_horizon / s.mu());
        self.q[0].eval(q_arg) - self.e_tab.eval(s.kappa() * eta) + self.b(eta)
    }

    fn c(&self, zeta: f64) -> f64 {
        self.p[0].eval_clamped(zeta, 0.0, self.t_horizon) - self.d(zeta.max(0.0))
    }

    fn a(&self, zeta: f64) -> f64 {
        self.c(zeta) - self.e_tab.eval(zeta)
    }

    pub fn f1(&self, x: f64, t: f64) -> f64 {
        let lam = self.speeds.lambda();
        self.a(t - lam * x) + self.b(t + lam * x)
    }

    pub fn g1(&self, x: f64, t: f64) -> f64 {
        let lam = self.speeds.lambda();
        self.c(t - lam * x) + self.d((t + lam * x).max(0.0))
    }

    // F(y) = (lambda + mu) S2(y) - r2(y) + r2(0), the d'Alembert bracket
    fn dal_bracket(&self, y: f64) -> f64 {
        let s = self.speeds;
        (s.lambda() + s.mu()) * self.s2_tab.eval(y) - self.r[1].eval_clamped(
            y,
            0.0,
            self.t_horizon / s.lambda(),
        ) + self.r[1].eval(0.0)
    }

    fn phi(&self, xi: f64) -> f64 {
        let s = self.speeds;
        let y = (-xi / (s.mu() - s.lambda())).max(0.0);
        self.phi0 - (s.mu() - s.lambda()) / (2.0 * s.mu()) * self.dal_bracket(y)
    }

    fn psi(&self, eta: f64) -> f64 {
        let s = self.speeds;
        let y = (eta / (s.lambda() + s.mu())).max(0.0);
        self.psi0 + (s.lambda() + s.mu()) * self.s2_tab.eval(y)
            - (s.lambda() + s.mu()) / (2.0 * s.mu()) * self.dal_bracket(y)
    }

    pub fn f2(&self, x: f64, t: f64) -> f64 {
        let mu = self.speeds.mu();
        self.phi(t - mu * x) + self.psi(t + mu * x)
    }

    // g2 on t = mu x, from the lower trace plus the prescribed jump
    fn g2_char(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, self.t_horizon / self.speeds.mu());
        self.phi0 + self.psi(2.0 * self.speeds.mu() * x) + self.q[1].eval(x)
    }

    pub fn g2(&self, x: f64, t: f64) -> f64 {
        let mu = self.speeds.mu();
        let xi = t - mu * x;
        self.p[1].eval_clamped(xi, 0.0, self.t_horizon) - self.g2_char(xi / (2.0 * mu))
            + self.g2_char((t + mu * x) / (2.0 * mu))
    }

    pub fn f(&self, x: f64, t: f64) -> [f64; 2] {
        [self.f1(x, t), self.f2(x, t)]
    }

    pub fn g(&self, x: f64, t: f64) -> [f64; 2] {
        [self.g1(x, t), self.g2(x, t)]
    }

    pub fn sample(&self, grid: &Arc<CharGrid>) -> PiecewiseField {
        PiecewiseField::from_closures(grid.clone(), |x, t| self.f(x, t), |x, t| self.g(x, t))
    }
}

/// Exact (up to quadrature of the s-integrals) solution of the homogeneous
/// Goursat problem; rejects incompatible data and data carrying a forcing.
pub fn solve_homogeneous(data: &GoursatData, grid: &Arc<CharGrid>) -> Result<PiecewiseField> {
    data.check_compatibility()?;
    if data.forcing.is_some() {
        return Err(TwoSpeedError::Domain(
            "solve_homogeneous expects F = G = 0; use solve_goursat".into(),
        ));
    }
    Ok(HomogeneousSolution::new(data, grid.speeds(), 0.0).sample(grid))
}

// ---------------------------------------------------------------------------
// Characteristic-coordinate quadrature tables.
// ---------------------------------------------------------------------------

/// Cumulative cell integrals of an integrand H over characteristic
/// coordinates, one table per component.
///
/// Component 1 lives on the lattice p = t - lambda x, q = t + lambda x >= 0;
/// the interface t = mu x is the slanted line q = nu p and cells crossing it
/// are split into one-sided sub-polygons. Component 2 lives on
/// p = t - mu x (offset lattice), q = t + mu x; there the interface is the
/// lattice line p = 0 and the data line t = lambda x is the slanted clip
/// p = -kappa q. Cells outside every queried prefix difference are zeroed.
struct CharTables {
    d: f64,
    n: usize,
    k0: usize,
    cum1: Grid2,
    cum2: Grid2,
}

/// Fraction of a cell below which a clipped sub-polygon is integrated with a
/// one-point rule; matches the 1e-3 h^2 sliver threshold in (p, q) measure.
fn sliver_fraction(lam: f64) -> f64 {
    1e-3 / (lam * lam)
}

fn build_tables<E>(grid: &CharGrid, t_cap: f64, eval: E) -> CharTables
where
    E: Fn(f64, f64, Side, usize) -> f64,
{
    let s = grid.speeds();
    let (lam, mu) = (s.lambda(), s.mu());
    let n = grid.n();
    let d = grid.ht();
    let nu = (mu + lam) / (mu - lam);
    let kap = s.kappa();
    let t_skip = t_cap + 2.5 * d;
    let sliver = sliver_fraction(lam);
    let unit: [[f64; 2]; 4] = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];

    // --- component 1 ---
    let (kp1, kq1) = (n, 2 * n);
    let mut cum1 = Grid2::new(kp1 + 1, kq1 + 1, 0.0);
    let corner1 = |k: usize, l: usize, du: f64, dv: f64, side: Side| -> f64 {
        let p = (k as f64 + du) * d;
        let q = (l as f64 + dv) * d;
        eval((q - p) / (2.0 * lam), (q + p) / 2.0, side, 0)
    };
    for k in 0..kp1 {
        for l in 0..kq1 {
            let cell = if l + 1 <= k || (k as f64 + l as f64 + 1.0) * d / 2.0 > t_skip {
                0.0
            } else {
                // side indicator f = q - nu p, positive below the interface
                let f00 = (l as f64) - nu * k as f64;
                let f10 = (l as f64) - nu * (k as f64 + 1.0);
                let f01 = (l as f64 + 1.0) - nu * k as f64;
                let f11 = (l as f64 + 1.0) - nu * (k as f64 + 1.0);
                let fmin = f00.min(f10).min(f01).min(f11);
                let fmax = f00.max(f10).max(f01).max(f11);
                if fmin >= 0.0 || fmax <= 0.0 {
                    let side = if f00 + f11 > 0.0 { Side::Lower } else { Side::Upper };
                    let v = [
                        corner1(k, l, 0.0, 0.0, side),
                        corner1(k, l, 1.0, 0.0, side),
                        corner1(k, l, 0.0, 1.0, side),
                        corner1(k, l, 1.0, 1.0, side),
                    ];
                    0.25 * (v[0] + v[1] + v[2] + v[3])
                } else {
                    // cut cell: clip against v - nu u + (l - nu k) >= 0
                    let c = l as f64 - nu * k as f64;
                    let mut acc = 0.0;
                    for (sgn, side) in [(1.0, Side::Lower), (-1.0, Side::Upper)] {
                        let poly = clip_halfplane(&unit, -sgn * nu, sgn, sgn * c);
                        if poly.len() >= 3 {
                            let v = [
                                corner1(k, l, 0.0, 0.0, side),
                                corner1(k, l, 1.0, 0.0, side),
                                corner1(k, l, 0.0, 1.0, side),
                                corner1(k, l, 1.0, 1.0, side),
                            ];
                            acc += integrate_bilinear_polygon(&v, &poly, sliver);
                        }
                    }
                    acc
                }
            };
            let v = cum1.at(k, l + 1) + cum1.at(k + 1, l) - cum1.at(k, l) + cell * d * d;
            cum1.set(k + 1, l + 1, v);
        }
    }

    // --- component 2 ---
    let k0 = ((mu / lam - 1.0) * n as f64).ceil() as usize + 1;
    let kp2 = k0 + n + 1;
    let kq2 = ((1.0 + mu / lam) * n as f64).ceil() as usize + 1;
    let mut cum2 = Grid2::new(kp2 + 1, kq2 + 1, 0.0);
    let corner2 = |kk: f64, ll: f64, side: Side| -> f64 {
        let p = kk * d;
        let q = ll * d;
        eval((q - p) / (2.0 * mu), (q + p) / 2.0, side, 1)
    };
    for k in 0..kp2 {
        let kk = k as f64 - k0 as f64; // p = kk * d at the left cell edge
        let side = if kk < -0.5 { Side::Lower } else { Side::Upper };
        for l in 0..kq2 {
            let ll = l as f64;
            let cell = if ll + 1.0 <= kk || (kk + ll + 1.0) * d / 2.0 > t_skip {
                0.0
            } else {
                // domain indicator g = p + kappa q >= 0 (above t = lambda x)
                let g00 = kk + kap * ll;
                let g10 = kk + 1.0 + kap * ll;
                let g01 = kk + kap * (ll + 1.0);
                let g11 = kk + 1.0 + kap * (ll + 1.0);
                let gmin = g00.min(g10).min(g01).min(g11);
                let gmax = g00.max(g10).max(g01).max(g11);
                if gmax <= 0.0 {
                    0.0
                } else {
                    let v = [
                        corner2(kk, ll, side),
                        corner2(kk + 1.0, ll, side),
                        corner2(kk, ll + 1.0, side),
                        corner2(kk + 1.0, ll + 1.0, side),
                    ];
                    if gmin >= 0.0 {
                        0.25 * (v[0] + v[1] + v[2] + v[3])
                    } else {
                        let poly = clip_halfplane(&unit, 1.0, kap, g00);
                        if poly.len() >= 3 {
                            integrate_bilinear_polygon(&v, &poly, sliver)
                        } else {
                            0.0
                        }
                    }
                }
            };
            let v = cum2.at(k, l + 1) + cum2.at(k + 1, l) - cum2.at(k, l) + cell * d * d;
            cum2.set(k + 1, l + 1, v);
        }
    }

    CharTables {
        d,
        n,
        k0,
        cum1,
        cum2,
    }
}

impl CharTables {
    fn cum_interp(grid: &Grid2, a: f64, b: f64) -> f64 {
        let af = a.clamp(0.0, (grid.ni() - 1) as f64);
        let bf = b.clamp(0.0, (grid.nj() - 1) as f64);
        let i0 = (af as usize).min(grid.ni() - 2);
        let j0 = (bf as usize).min(grid.nj() - 2);
        let u = af - i0 as f64;
        let v = bf - j0 as f64;
        grid.at(i0, j0) * (1.0 - u) * (1.0 - v)
            + grid.at(i0 + 1, j0) * u * (1.0 - v)
            + grid.at(i0, j0 + 1) * (1.0 - u) * v
            + grid.at(i0 + 1, j0 + 1) * u * v
    }

    /// Rectangle integral over [0, p0] x [p0, q0] at exact lattice indices.
    fn i1_node(&self, i: usize, j: usize) -> f64 {
        if j <= i {
            return 0.0;
        }
        let (kp, lq) = (j - i, (j + i).min(2 * self.n));
        self.cum1.at(kp, lq) - self.cum1.at(kp, kp)
    }

    /// Rectangle integral over [0, p0] x [p0, q0], interpolated.
    fn i1(&self, p0: f64, q0: f64) -> f64 {
        if p0 <= 0.0 || q0 <= p0 {
            return 0.0;
        }
        let (a, b0, b1) = (p0 / self.d, p0 / self.d, q0 / self.d);
        Self::cum_interp(&self.cum1, a, b1) - Self::cum_interp(&self.cum1, a, b0)
    }

    /// Pentagon/triangle integral: q from max(p0, -p0/kappa) to q0,
    /// p from -kappa q to p0.
    fn i2(&self, p0: f64, q0: f64, kappa: f64) -> f64 {
        let q_low = if p0 >= 0.0 { p0 } else { -p0 / kappa };
        if q_low >= q0 {
            return 0.0;
        }
        let a = p0 / self.d + self.k0 as f64;
        Self::cum_interp(&self.cum2, a, q0 / self.d)
            - Self::cum_interp(&self.cum2, a, q_low / self.d)
    }
}

/// The characteristic-domain integral operator of the Goursat construction,
/// with the area-integral normalization (Jacobian factors 1/2lambda, 1/2mu):
/// component 1 integrates H1 over the backward lambda-parallelogram PQRS,
/// component 2 integrates H2 over the backward mu-pentagon PLMN (a triangle
/// when t <= mu x).
pub fn integral_op_i(h: &PiecewiseField, x: f64, t: f64) -> Result<[f64; 2]> {
    let grid = h.grid_arc();
    let s = grid.speeds();
    let tol = 1e-9 * (1.0 + x.abs() + t.abs());
    if !(x >= -tol && t >= s.lambda() * x - tol && t <= grid.t_horizon() + tol) {
        return Err(TwoSpeedError::Domain(format!(
            "point (x={x}, t={t}) outside D_T"
        )));
    }
    let tables = build_tables(grid, t, |px, pt, side, comp| {
        h.eval_comp_snapped(side, comp, px, pt)
    });
    Ok([
        tables.i1(t - s.lambda() * x, t + s.lambda() * x) / (2.0 * s.lambda()),
        tables.i2(t - s.mu() * x, t + s.mu() * x, s.kappa()) / (2.0 * s.mu()),
    ])
}

// ---------------------------------------------------------------------------
// Picard iteration.
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct SolveOptions {
    /// Continuation window length; None picks it from the contraction
    /// estimate c0 (dT + dT^2) (|A| + |B|) < 1/2.
    pub window: Option<f64>,
    pub max_iter: usize,
    pub max_window_halvings: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            window: None,
            max_iter: 100,
            max_window_halvings: 6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct WindowReport {
    pub t0: f64,
    pub t1: f64,
    /// Successive-iterate max-norm differences d_1, d_2, ...
    pub diffs: Vec<f64>,
}

impl WindowReport {
    /// Contraction ratios d_{k+1}/d_k.
    pub fn ratios(&self) -> Vec<f64> {
        self.diffs
            .windows(2)
            .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
            .collect()
    }

    /// Largest ratio from the second ratio onward (iterations after the
    /// second); 0 when the window converged in fewer steps.
    pub fn rho_tail(&self) -> f64 {
        self.ratios().iter().skip(1).fold(0.0, |m, r| m.max(*r))
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub windows: Vec<WindowReport>,
    pub final_window: f64,
    /// Successive-iterate differences of the whole-domain polish phase that
    /// removes the continuation-window freeze boundaries.
    pub polish_diffs: Vec<f64>,
    pub total_iterations: usize,
}

/// Conservative geometry constant for the windowed contraction estimate.
fn contraction_geometry(s: SpeedPair) -> f64 {
    let (lam, mu) = (s.lambda(), s.mu());
    (1.0 + mu / lam)
        * (1.0 + 0.25 / (lam * lam) + 0.25 / (mu * mu) + 0.5 / lam + 0.5 / mu)
}

fn default_window(s: SpeedPair, coupling: f64, t_total: f64) -> f64 {
    if coupling <= 0.0 {
        return t_total;
    }
    let q = 0.5 / (contraction_geometry(s) * coupling);
    (((1.0 + 4.0 * q).sqrt() - 1.0) / 2.0).min(t_total)
}

/// Per-side x-derivative arrays. Stencils read real-region values only
/// (ghost extensions would pollute the derivative): centered where both
/// neighbours are real, else second-order one-sided, else first-order
/// two-point. The handful of wedge nodes near the origin with no real
/// x-neighbour at all are flood-filled from computed neighbours; they carry
/// an O(h) value over an O(1) node set, which stays below the scheme order.
/// Ghost slots are refilled by smooth extrapolation at the end.
fn build_dx(field: &PiecewiseField) -> PiecewiseField {
    let grid = field.grid_arc();
    let n = grid.n();
    let h = grid.h();
    let mut out = PiecewiseField::zeros(grid.clone());
    for side in [Side::Lower, Side::Upper] {
        let band = |i: usize| match side {
            Side::Lower => grid.lower_band(i),
            Side::Upper => grid.upper_band(i),
        };
        let real = |i: usize, j: usize| match side {
            Side::Lower => grid.lower_real(i, j),
            Side::Upper => grid.upper_real(i, j),
        };
        let mut pending: Vec<(usize, usize)> = Vec::new();
        let mut done = vec![false; (n + 1) * (n + 1)];
        for i in 0..=n {
            let (lo, hi) = band(i);
            for j in lo..=hi.min(n) {
                if !real(i, j) {
                    continue;
                }
                let v = if i >= 1 && i + 1 <= n && real(i - 1, j) && real(i + 1, j) {
                    let vm = field.node(side, i - 1, j);
                    let vp = field.node(side, i + 1, j);
                    [(vp[0] - vm[0]) / (2.0 * h), (vp[1] - vm[1]) / (2.0 * h)]
                } else if i + 2 <= n && real(i + 1, j) && real(i + 2, j) {
                    let v0 = field.node(side, i, j);
                    let v1 = field.node(side, i + 1, j);
                    let v2 = field.node(side, i + 2, j);
                    [
                        d1_onesided(v0[0], v1[0], v2[0], h),
                        d1_onesided(v0[1], v1[1], v2[1], h),
                    ]
                } else if i >= 2 && real(i - 1, j) && real(i - 2, j) {
                    let v0 = field.node(side, i, j);
                    let v1 = field.node(side, i - 1, j);
                    let v2 = field.node(side, i - 2, j);
                    [
                        -d1_onesided(v0[0], v1[0], v2[0], h),
                        -d1_onesided(v0[1], v1[1], v2[1], h),
                    ]
                } else if i + 1 <= n && real(i + 1, j) {
                    let v0 = field.node(side, i, j);
                    let v1 = field.node(side, i + 1, j);
                    [(v1[0] - v0[0]) / h, (v1[1] - v0[1]) / h]
                } else if i >= 1 && real(i - 1, j) {
                    let v0 = field.node(side, i, j);
                    let v1 = field.node(side, i - 1, j);
                    [(v0[0] - v1[0]) / h, (v0[1] - v1[1]) / h]
                } else {
                    pending.push((i, j));
                    continue;
                };
                out.set_node(side, i, j, v);
                done[i * (n + 1) + j] = true;
            }
        }
        for _round in 0..6 {
            if pending.is_empty() {
                break;
            }
            let mut still = Vec::new();
            for (i, j) in pending {
                let mut filled = false;
                let neighbours = [
                    (i + 1, j),
                    (i.wrapping_sub(1), j),
                    (i, j + 1),
                    (i, j.wrapping_sub(1)),
                    (i + 1, j + 1),
                    (i.wrapping_sub(1), j.wrapping_sub(1)),
                ];
                for (ii, jj) in neighbours {
                    if ii <= n && jj <= n && real(ii, jj) && done[ii * (n + 1) + jj] {
                        let v = out.node(side, ii, jj);
                        out.set_node(side, i, j, v);
                        done[i * (n + 1) + j] = true;
                        filled = true;
                        break;
                    }
                }
                if !filled {
                    still.push((i, j));
                }
            }
            pending = still;
        }
    }
    out.extrapolate_ghosts();
    out
}

struct SolverCtx<'a> {
    grid: &'a Arc<CharGrid>,
    coeffs: &'a CoefficientField,
    base: &'a PiecewiseField,
}

impl SolverCtx<'_> {
    /// One Picard sweep: rebuild the coupling tables from `field` and
    /// re-assemble every slot with node time in (t_freeze, t_cap].
    /// Returns the updated field and the max-norm update over the window.
    fn sweep(&self, field: &PiecewiseField, t_freeze: f64, t_cap: f64) -> (PiecewiseField, f64) {
        let dx = build_dx(field);
        self.sweep_with_dx(field, &dx, t_freeze, t_cap)
    }

    fn sweep_with_dx(
        &self,
        field: &PiecewiseField,
        dx: &PiecewiseField,
        t_freeze: f64,
        t_cap: f64,
    ) -> (PiecewiseField, f64) {
        let grid = self.grid;
        let s = grid.speeds();
        let (lam, mu) = (s.lambda(), s.mu());
        let (inv1, inv2) = (0.25 / (lam * lam), 0.25 / (mu * mu));
        let kap = s.kappa();
        let n = grid.n();
        let coeffs = self.coeffs;
        // never read coefficients beyond the causal depth T/lambda
        let x_causal = grid.x(n);
        let tables = build_tables(grid, t_cap, |x, t, side, comp| {
            let x = x.min(x_causal);
            let mut acc = 0.0;
            for k in 0..2 {
                let a = coeffs.a(comp, k, x);
                let b = coeffs.b(comp, k, x);
                if a != 0.0 {
                    acc += a * dx.eval_comp_snapped(side, k, x, t);
                }
                if b != 0.0 {
                    acc += b * field.eval_comp_snapped(side, k, x, t);
                }
            }
            acc
        });

        let eps = 1e-12 * (1.0 + grid.t_horizon());
        let mut out = field.clone();
        let mut diff: f64 = 0.0;
        for i in 0..=n {
            let x = grid.x(i);
            for side in [Side::Lower, Side::Upper] {
                let (lo, hi) = match side {
                    Side::Lower => grid.lower_band(i),
                    Side::Upper => grid.upper_band(i),
                };
                for j in lo..=hi.min(n) {
                    let real = match side {
                        Side::Lower => grid.lower_real(i, j),
                        Side::Upper => grid.upper_real(i, j),
                    };
                    if !real {
                        continue; // ghost slots are extrapolated afterwards
                    }
                    let t = grid.t(j);
                    if t <= t_freeze + eps || t > t_cap + eps {
                        continue;
                    }
                    let corr = [
                        tables.i1_node(i, j) * inv1,
                        tables.i2(t - mu * x, t + mu * x, kap) * inv2,
                    ];
                    let bv = self.base.node(side, i, j);
                    let nv = [bv[0] + corr[0], bv[1] + corr[1]];
                    let ov = field.node(side, i, j);
                    diff = diff.max((nv[0] - ov[0]).abs()).max((nv[1] - ov[1]).abs());
                    out.set_node(side, i, j, nv);
                }
            }
        }
        for ic in 0..=grid.n_iface() {
            let ti = grid.iface_t(ic);
            if ti <= t_freeze + eps || ti > t_cap + eps {
                continue;
            }
            let x = grid.x(ic);
            let corr = [
                tables.i1(ti - lam * x, ti + lam * x) * inv1,
                tables.i2(ti - mu * x, ti + mu * x, kap) * inv2,
            ];
            for comp in 0..2 {
                let nf = self.base.iface_lower[comp][ic] + corr[comp];
                let ng = self.base.iface_upper[comp][ic] + corr[comp];
                diff = diff.max((nf - out.iface_lower[comp][ic]).abs());
                diff = diff.max((ng - out.iface_upper[comp][ic]).abs());
                out.iface_lower[comp][ic] = nf;
                out.iface_upper[comp][ic] = ng;
            }
        }
        out.extrapolate_ghosts();
        (out, diff)
    }
}

/// Assemble hom + Iw({F, G}); this is both the Picard starting iterate and
/// the fixed part of every sweep.
fn assemble_base(
    data: &GoursatData,
    grid: &Arc<CharGrid>,
) -> Result<PiecewiseField> {
    data.check_compatibility()?;
    let hom = HomogeneousSolution::new(data, grid.speeds(), 0.0);
    let mut base = hom.sample(grid);
    if let Some(forcing) = &data.forcing {
        if forcing.grid_arc().n() != grid.n() {
            return Err(TwoSpeedError::Domain(
                "forcing field grid does not match the solve grid".into(),
            ));
        }
        let s = grid.speeds();
        let (lam, mu) = (s.lambda(), s.mu());
        let (inv1, inv2) = (0.25 / (lam * lam), 0.25 / (mu * mu));
        let tables = build_tables(grid, grid.t_horizon(), |x, t, side, comp| {
            forcing.eval_comp_snapped(side, comp, x, t)
        });
        let n = grid.n();
        for i in 0..=n {
            let x = grid.x(i);
            for side in [Side::Lower, Side::Upper] {
                let (lo, hi) = match side {
                    Side::Lower => grid.lower_band(i),
                    Side::Upper => grid.upper_band(i),
                };
                for j in lo..=hi.min(n) {
                    let real = match side {
                        Side::Lower => grid.lower_real(i, j),
                        Side::Upper => grid.upper_real(i, j),
                    };
                    if !real {
                        continue;
                    }
                    let t = grid.t(j);
                    let mut v = base.node(side, i, j);
                    v[0] += tables.i1_node(i, j) * inv1;
                    v[1] += tables.i2(t - mu * x, t + mu * x, s.kappa()) * inv2;
                    base.set_node(side, i, j, v);
                }
            }
        }
        for ic in 0..=grid.n_iface() {
            let (x, ti) = (grid.x(ic), grid.iface_t(ic));
            let corr = [
                tables.i1(ti - lam * x, ti + lam * x) * inv1,
                tables.i2(ti - mu * x, ti + mu * x, s.kappa()) * inv2,
            ];
            for comp in 0..2 {
                base.iface_lower[comp][ic] += corr[comp];
                base.iface_upper[comp][ic] += corr[comp];
            }
        }
        base.extrapolate_ghosts();
    }
    Ok(base)
}

/// Solve the Goursat problem by Picard iteration with stepwise continuation.
pub fn solve_goursat(
    data: &GoursatData,
    coeffs: &CoefficientField,
    grid: &Arc<CharGrid>,
) -> Result<PiecewiseField> {
    solve_goursat_with(data, coeffs, grid, &SolveOptions::default()).map(|(f, _)| f)
}

pub fn solve_goursat_with(
    data: &GoursatData,
    coeffs: &CoefficientField,
    grid: &Arc<CharGrid>,
    opts: &SolveOptions,
) -> Result<(PiecewiseField, SolveReport)> {
    let base = assemble_base(data, grid)?;
    let s = grid.speeds();
    let t_total = grid.t_horizon();
    let (sup_a, sup_b) = coeffs.sup_abs(t_total / s.lambda());
    let coupling = sup_a + sup_b;

    let mut window = opts
        .window
        .unwrap_or_else(|| default_window(s, coupling, t_total))
        .clamp(4.0 * grid.ht(), t_total);
    let ctx = SolverCtx {
        grid,
        coeffs,
        base: &base,
    };

    let mut field = base.clone();
    let mut windows = Vec::new();
    let mut total_iterations = 0;
    let mut halvings = 0;
    let mut t0 = 0.0;
    let eps = 1e-12 * (1.0 + t_total);
    while t0 < t_total - eps {
        let t1 = (t0 + window).min(t_total);
        // iterate two rows past the cap: interpolation near t1 reads one row
        // above, which must be converging too before it freezes next window
        let t_pad = (t1 + 2.0 * grid.ht()).min(t_total);
        let mut diffs = Vec::new();
        let mut converged = false;
        for _ in 0..opts.max_iter {
            let (next, diff) = ctx.sweep(&field, t0, t_pad);
            field = next;
            total_iterations += 1;
            diffs.push(diff);
            if diff < 1e-10 * (1.0 + field.scale()) {
                converged = true;
                break;
            }
        }
        if !converged {
            let ratio = if diffs.len() >= 2 {
                diffs[diffs.len() - 1] / diffs[diffs.len() - 2].max(f64::MIN_POSITIVE)
            } else {
                f64::INFINITY
            };
            if halvings < opts.max_window_halvings && window > 4.0 * grid.ht() {
                halvings += 1;
                window = (window / 2.0).max(4.0 * grid.ht());
                continue;
            }
            return Err(TwoSpeedError::NonConvergence { t0, t1, ratio });
        }
        windows.push(WindowReport { t0, t1, diffs });
        t0 = t1;
    }

    // whole-domain polish: the windowed continuation leaves small freeze
    // artifacts at window boundaries; a few global sweeps from the already
    // nearby iterate converge to the global discrete fixed point
    let mut polish_diffs = Vec::new();
    if windows.len() > 1 {
        let mut converged = false;
        for _ in 0..opts.max_iter {
            let (next, diff) = ctx.sweep(&field, -1.0, t_total);
            field = next;
            total_iterations += 1;
            polish_diffs.push(diff);
            if diff < 1e-10 * (1.0 + field.scale()) {
                converged = true;
                break;
            }
        }
        if !converged {
            let k = polish_diffs.len();
            let ratio = polish_diffs[k - 1] / polish_diffs[k - 2].max(f64::MIN_POSITIVE);
            return Err(TwoSpeedError::NonConvergence {
                t0: 0.0,
                t1: t_total,
                ratio,
            });
        }
    }

    Ok((
        field,
        SolveReport {
            windows,
            final_window: window,
            polish_diffs,
            total_iterations,
        },
    ))
}

/// Max-norm defect of the fixed-point equation at the supplied field:
/// |hom + Iw({F,G}) + Iw({A f_x + B f, ...}) - field| over all stored slots.
pub fn fixed_point_defect(
    field: &PiecewiseField,
    data: &GoursatData,
    coeffs: &CoefficientField,
    grid: &Arc<CharGrid>,
) -> Result<f64> {
    let base = assemble_base(data, grid)?;
    let ctx = SolverCtx {
        grid,
        coeffs,
        base: &base,
    };
    let (_, diff) = ctx.sweep(field, -1.0, grid.t_horizon());
    Ok(diff)
}

/// Max |L{f,g} - {F,G}| over interior nodes of both regions.
pub fn pde_residual(
    field: &PiecewiseField,
    coeffs: &CoefficientField,
    forcing: Option<&PiecewiseField>,
) -> Result<f64> {
    let res = apply_l(field, coeffs)?;
    let grid = field.grid_arc();
    let mut worst: f64 = 0.0;
    for i in 0..=grid.n() {
        for j in 0..=grid.n() {
            for side in [Side::Lower, Side::Upper] {
                let real = match side {
                    Side::Lower => grid.lower_real(i, j),
                    Side::Upper => grid.upper_real(i, j),
                };
                if !real {
                    continue;
                }
                let r = res.node(side, i, j);
                let f = forcing.map(|f| f.node(side, i, j)).unwrap_or([0.0, 0.0]);
                for comp in 0..2 {
                    let v = r[comp] - f[comp];
                    if v.is_finite() {
                        worst = worst.max(v.abs());
                    }
                }
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chardata::{char_data_u, GoursatData};
    use crate::model::CoefficientField;

    fn speeds12() -> SpeedPair {
        SpeedPair::new(1.0, 2.0).unwrap()
    }

    fn grid12(t: f64, h: f64) -> Arc<CharGrid> {
        Arc::new(CharGrid::new(speeds12(), t, h).unwrap())
    }

    #[test]
    fn homogeneous_zero_data_gives_zero() {
        let grid = grid12(2.0, 1.0 / 16.0);
        let f = solve_homogeneous(&GoursatData::zero(2.0), &grid).unwrap();
        assert!(f.scale() < 1e-14);
    }

    #[test]
    fn homogeneous_linear_r1() {
        // r1(x) = x, everything else zero: f1 = g1 = x, component 2 zero
        let mut data = GoursatData::zero(2.0);
        data.r[0] = Func1::Poly(vec![0.0, 1.0]);
        let hom = HomogeneousSolution::new(&data, speeds12(), 0.0);
        for (x, t) in [(0.3, 0.5), (0.9, 1.2), (0.1, 1.9)] {
            assert!((hom.f1(x, t) - x).abs() < 1e-12, "f1 at ({x},{t})");
            assert!((hom.g1(x, t) - x).abs() < 1e-12);
            assert!(hom.f2(x, t).abs() < 1e-12);
            assert!(hom.g2(x, t).abs() < 1e-12);
        }
    }

    #[test]
    fn homogeneous_boundary_p2() {
        // p2(t) = t, everything else zero: g2 = t - mu x, f = 0
        let mut data = GoursatData::zero(2.0);
        data.p[1] = Func1::Poly(vec![0.0, 1.0]);
        let hom = HomogeneousSolution::new(&data, speeds12(), 0.0);
        for (x, t) in [(0.0, 0.7), (0.3, 1.5), (0.8, 1.9)] {
            assert!((hom.g2(x, t) - (t - 2.0 * x)).abs() < 1e-12);
        }
        for (x, t) in [(0.5, 0.8), (1.0, 1.5)] {
            assert!(hom.f1(x, t).abs() < 1e-12);
            assert!(hom.f2(x, t).abs() < 1e-12);
        }
    }

    #[test]
    fn homogeneous_satisfies_all_conditions() {
        // generic smooth data; check p, r, q exactly and s1, s2 by one-sided FD
        let mut data = GoursatData::zero(2.0);
        data.p = [
            Func1::closure(|t| 0.3 * t * t - 0.2 * t + 0.4),
            Func1::closure(|t| (0.9 * t).sin() + 0.15),
        ];
        data.r = [
            Func1::closure(|x| 0.4 + 0.5 * x * x),
            Func1::closure(|x| 0.25 * (1.3 * x).cos()),
        ];
        data.q = [
            Func1::closure(|x| -0.1 * x * x),
            Func1::closure(|x| -0.1 + 0.2 * x),
        ];
        data.s1 = Func1::closure(|x| 0.3 * (x * 0.7).sin());
        data.s2 = Func1::closure(|x| 0.2 - 0.1 * x);
        // force compatibility: p(0) - r(0) = q(0)
        // p1(0)=0.4, r1(0)=0.4, q1(0)=0 ok; p2(0)=0.15, r2(0)=0.25, q2(0)=-0.1 ok
        data.check_compatibility().unwrap();
        let s = speeds12();
        let hom = HomogeneousSolution::new(&data, s, 0.0);

        for x in [0.1, 0.5, 1.3, 1.9] {
            assert!((hom.f1(x, x) - data.r[0].eval(x)).abs() < 1e-10, "r1");
            assert!((hom.f2(x, x) - data.r[1].eval(x)).abs() < 1e-9, "r2");
        }
        for t in [0.0, 0.6, 1.4, 2.0] {
            assert!((hom.g1(0.0, t) - data.p[0].eval(t)).abs() < 1e-10, "p1");
            assert!((hom.g2(0.0, t) - data.p[1].eval(t)).abs() < 1e-9, "p2");
        }
        for x in [0.2, 0.5, 0.9] {
            let t = 2.0 * x;
            assert!(
                (hom.g1(x, t) - hom.f1(x, t) - data.q[0].eval(x)).abs() < 1e-9,
                "q1"
            );
            assert!(
                (hom.g2(x, t) - hom.f2(x, t) - data.q[1].eval(x)).abs() < 1e-9,
                "q2"
            );
        }
        // s2 = f2_t on t = lambda x, one-sided FD upward in t; the s1 check
        // stays below x = T/mu where the interface leaves the domain
        let fd = 1e-5;
        for x in [0.4, 0.8] {
            let t = x;
            let d = d1_onesided(hom.f2(x, t), hom.f2(x, t + fd), hom.f2(x, t + 2.0 * fd), fd);
            assert!((d - data.s2.eval(x)).abs() < 1e-7, "s2 closure");
            let dj = d1_onesided(
                hom.g1(x, 2.0 * x) - hom.f1(x, 2.0 * x),
                hom.g1(x, 2.0 * x + fd) - hom.f1(x, 2.0 * x + fd),
                hom.g1(x, 2.0 * x + 2.0 * fd) - hom.f1(x, 2.0 * x + 2.0 * fd),
                fd,
            );
            assert!((dj - data.s1.eval(x)).abs() < 1e-7, "s1 closure");
        }
    }

    #[test]
    fn homogeneous_normalization_invariance() {
        let mut data = GoursatData::zero(2.0);
        data.p = [Func1::closure(|t| 0.2 * t + 0.1), Func1::Zero];
        data.r = [Func1::Const(0.1), Func1::closure(|x| 0.3 * x)];
        data.q = [Func1::closure(|x| 0.05 * x * x), Func1::Const(-0.3)];
        data.s1 = Func1::Const(0.2);
        data.s2 = Func1::closure(|x| (0.4 * x).cos() - 1.0);
        let h0 = HomogeneousSolution::new(&data, speeds12(), 0.0);
        let h1 = HomogeneousSolution::new(&data, speeds12(), 0.7);
        for (x, t) in [(0.3, 0.4), (0.5, 1.3), (0.0, 1.7), (0.9, 1.85)] {
            assert!((h0.f1(x, t) - h1.f1(x, t)).abs() < 1e-12);
            assert!((h0.g1(x, t) - h1.g1(x, t)).abs() < 1e-12);
        }
    }

    #[test]
    fn integral_op_examples() {
        // frozen from the printed formulas: constant integrands over the
        // lambda-parallelogram and mu-pentagon/triangle
        let grid = Arc::new(CharGrid::new(speeds12(), 4.0, 1.0 / 16.0).unwrap());
        let ones = PiecewiseField::from_closures(grid.clone(), |_, _| [1.0, 1.0], |_, _| [1.0, 1.0]);
        let v = integral_op_i(&ones, 1.0, 3.0).unwrap();
        assert!((v[0] - 2.0).abs() < 1e-9, "PQRS: {}", v[0]);
        assert!((v[1] - 2.0).abs() < 1e-9, "PLMN pentagon: {}", v[1]);
        let w = integral_op_i(&ones, 1.0, 1.5).unwrap();
        assert!((w[1] - 1.0 / 6.0).abs() < 1e-9, "PMN triangle: {}", w[1]);
        // vanishes on x = 0 and on t = lambda x
        let z0 = integral_op_i(&ones, 0.0, 2.3).unwrap();
        let zl = integral_op_i(&ones, 1.2, 1.2).unwrap();
        for v in [z0, zl] {
            assert!(v[0].abs() < 1e-12 && v[1].abs() < 1e-12);
        }
        assert!(integral_op_i(&ones, 1.0, 0.5).is_err());
    }

    #[test]
    fn integral_op_first_component_continuous_across_interface() {
        let grid = grid12(2.0, 1.0 / 32.0);
        let h = PiecewiseField::from_closures(
            grid.clone(),
            |x, t| [0.4 + x * t, x - t],
            |x, t| [(x + t).sin(), 1.0 + x],
        );
        for x in [0.2, 0.4, 0.7] {
            let t = 2.0 * x;
            let below = integral_op_i(&h, x, t - 1e-7).unwrap();
            let above = integral_op_i(&h, x, t + 1e-7).unwrap();
            assert!(
                (below[0] - above[0]).abs() < 1e-6,
                "I1 jump at x={x}: {} vs {}",
                below[0],
                above[0]
            );
        }
    }

    #[test]
    fn solve_reduces_to_homogeneous_without_coupling() {
        let grid = grid12(2.0, 1.0 / 16.0);
        let coeffs = CoefficientField::zero(2.0);
        let mut data = GoursatData::zero(2.0);
        data.r = [Func1::closure(|x| 0.3 * x), Func1::closure(|x| 0.1 * x * x)];
        data.s2 = Func1::Const(0.2);
        let hom = solve_homogeneous(&data, &grid).unwrap();
        let (solved, report) = solve_goursat_with(&data, &coeffs, &grid, &SolveOptions::default())
            .unwrap();
        assert!(hom.max_abs_diff_interior(&solved) < 1e-13);
        assert!(report.total_iterations <= 2);
    }

    #[test]
    fn solve_superposition_is_linear() {
        let grid = grid12(2.0, 1.0 / 16.0);
        let mut coeffs = CoefficientField::zero(2.0);
        coeffs.set_a(0, 1, Func1::Const(0.4));
        coeffs.set_b(1, 0, Func1::Const(0.7));
        let mut d1 = GoursatData::zero(2.0);
        d1.r = [Func1::closure(|x| 0.5 * x), Func1::Zero];
        let mut d2 = GoursatData::zero(2.0);
        d2.p = [Func1::Zero, Func1::closure(|t| 0.3 * t * t)];
        d2.q = [Func1::Zero, Func1::Const(0.0)];
        let mut dsum = GoursatData::zero(2.0);
        dsum.r = d1.r.clone();
        dsum.p = d2.p.clone();

        let f1 = solve_goursat(&d1, &coeffs, &grid).unwrap();
        let f2 = solve_goursat(&d2, &coeffs, &grid).unwrap();
        let fsum = solve_goursat(&dsum, &coeffs, &grid).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..=grid.n() {
            for j in 0..=grid.n() {
                for side in [Side::Lower, Side::Upper] {
                    let real = match side {
                        Side::Lower => grid.lower_real(i, j),
                        Side::Upper => grid.upper_real(i, j),
                    };
                    if !real {
                        continue;
                    }
                    let a = f1.node(side, i, j);
                    let b = f2.node(side, i, j);
                    let c = fsum.node(side, i, j);
                    for comp in 0..2 {
                        worst = worst.max((a[comp] + b[comp] - c[comp]).abs());
                    }
                }
            }
        }
        assert!(worst < 1e-8, "superposition defect {worst}");
    }

    #[test]
    fn solve_reaches_fixed_point() {
        let grid = grid12(2.0, 1.0 / 32.0);
        let mut coeffs = CoefficientField::zero(2.0);
        coeffs.set_b(0, 0, Func1::Const(1.0));
        coeffs.set_a(1, 0, Func1::Const(0.5));
        let data = char_data_u(&coeffs, speeds12(), 2.0).unwrap();
        let field = solve_goursat(&data, &coeffs, &grid).unwrap();
        let defect = fixed_point_defect(&field, &data, &coeffs, &grid).unwrap();
        assert!(
            defect < 1e-8 * (1.0 + field.scale()),
            "fixed point defect {defect}"
        );
    }

    #[test]
    fn picard_ratios_contract_and_shrink_with_window() {
        let grid = grid12(2.0, 1.0 / 32.0);
        let mut coeffs = CoefficientField::zero(2.0);
        coeffs.set_b(0, 0, Func1::Const(1.0));
        coeffs.set_b(1, 1, Func1::Const(0.8));
        coeffs.set_a(0, 1, Func1::Const(0.5));
        let data = char_data_u(&coeffs, speeds12(), 2.0).unwrap();
        let mut rhos = Vec::new();
        for win in [1.0, 0.5, 0.25] {
            let opts = SolveOptions {
                window: Some(win),
                ..Default::default()
            };
            let (_, report) = solve_goursat_with(&data, &coeffs, &grid, &opts).unwrap();
            let rho = report
                .windows
                .iter()
                .map(|w| w.rho_tail())
                .fold(0.0f64, f64::max);
            assert!(rho < 1.0, "window {win}: rho {rho}");
            rhos.push(rho);
        }
        assert!(rhos[0] >= rhos[1] - 1e-9 && rhos[1] >= rhos[2] - 1e-9, "{rhos:?}");
    }

    #[test]
    fn nonconvergence_reports_contraction_ratio() {
        // a coupling far too strong for the iteration budget
        let grid = grid12(2.0, 1.0 / 16.0);
        let mut coeffs = CoefficientField::zero(2.0);
        coeffs.set_b(0, 0, Func1::Const(500.0));
        coeffs.set_b(1, 1, Func1::Const(400.0));
        let data = char_data_u(&coeffs, speeds12(), 2.0).unwrap();
        let opts = SolveOptions {
            window: Some(2.0),
            max_iter: 4,
            max_window_halvings: 0,
        };
        match solve_goursat_with(&data, &coeffs, &grid, &opts) {
            Err(TwoSpeedError::NonConvergence { ratio, .. }) => {
                assert!(ratio > 1.0, "expected a divergent ratio, got {ratio}")
            }
            Err(e) => panic!("wrong error: {e}"),
            Ok(_) => panic!("expected NonConvergence, iteration converged"),
        }
    }

    #[test]
    fn incompatible_data_is_rejected() {
        let grid = grid12(2.0, 1.0 / 16.0);
        let mut data = GoursatData::zero(2.0);
        data.p = [Func1::Const(1.0), Func1::Zero]; // p(0) - r(0) != q(0)
        assert!(matches!(
            solve_homogeneous(&data, &grid),
            Err(TwoSpeedError::IncompatibleData { .. })
        ));
        let coeffs = CoefficientField::zero(2.0);
        assert!(solve_goursat(&data, &coeffs, &grid).is_err());
    }

    #[test]
    fn solved_jump_matches_q_data() {
        let grid = grid12(2.0, 1.0 / 32.0);
        let mut coeffs = CoefficientField::zero(2.0);
        coeffs.set_a(0, 1, Func1::Const(0.5));
        coeffs.set_a(1, 0, Func1::Const(0.3));
        coeffs.set_b(1, 1, Func1::Const(0.4));
        let data = char_data_u(&coeffs, speeds12(), 2.0).unwrap();
        let field = solve_goursat(&data, &coeffs, &grid).unwrap();
        for ic in 0..=grid.n_iface() {
            let x = grid.x(ic);
            let jump = field.iface_jump(ic);
            assert!((jump[0] - data.q[0].eval(x)).abs() < 1e-9, "q1 at x={x}");
            assert!((jump[1] - data.q[1].eval(x)).abs() < 1e-9, "q2 at x={x}");
        }
    }

    #[test]
    fn pde_residual_zero_problem() {
        let grid = grid12(2.0, 1.0 / 16.0);
        let coeffs = CoefficientField::zero(2.0);
        let field = solve_goursat(&GoursatData::zero(2.0), &coeffs, &grid).unwrap();
        assert!(pde_residual(&field, &coeffs, None).unwrap() < 1e-12);
    }

    #[test]
    fn pde_residual_decays_on_solved_fields() {
        // the integral-equation solution does not satisfy the difference
        // equations to O(h^2); its stencil residual decays at first order
        // while the field error itself is second order
        let mut coeffs = CoefficientField::zero(2.0);
        coeffs.set_b(0, 0, Func1::Const(1.0));
        let mut res = Vec::new();
        for level in 0..2 {
            let h = 1.0 / (32 << level) as f64;
            let grid = grid12(2.0, h);
            let data = char_data_u(&coeffs, speeds12(), 2.0).unwrap();
            let field = solve_goursat(&data, &coeffs, &grid).unwrap();
            res.push(pde_residual(&field, &coeffs, None).unwrap());
        }
        assert!(res[1] < 0.7 * res[0], "residual not decaying: {res:?}");
        assert!(res[0] < 1e-3, "residual scale off: {res:?}");
    }
}
