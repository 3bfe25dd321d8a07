//! The forward map (A, B) -> boundary measurement: solve both column
//! problems of the progressing-wave expansion and extract the smooth part of
//! U_x(0, .) together with the analytically known singular weights.

use std::sync::Arc;

use crate::chardata::{char_data_u, char_data_ubar, GoursatData};
use crate::error::{Result, TwoSpeedError};
use crate::field::PiecewiseField;
use crate::goursat::solve_goursat;
use crate::model::{
    gauge_reduce_up_to, CharGrid, CoefficientField, GaugeTransform, Side, SpeedPair,
};
use crate::numerics::{d1_onesided, Func1};

/// Two-way travel bookkeeping: depth x is probed at times 2 lambda x
/// (two fast legs), (lambda + mu) x (one fast, one slow) and 2 mu x
/// (two slow legs).
#[derive(Clone, Copy, Debug)]
pub struct TravelTimes {
    speeds: SpeedPair,
}

impl TravelTimes {
    pub fn new(speeds: SpeedPair) -> Self {
        TravelTimes { speeds }
    }

    pub fn t_fast(&self, x: f64) -> f64 {
        2.0 * self.speeds.lambda() * x
    }

    pub fn t_mixed(&self, x: f64) -> f64 {
        (self.speeds.lambda() + self.speeds.mu()) * x
    }

    pub fn t_slow(&self, x: f64) -> f64 {
        2.0 * self.speeds.mu() * x
    }

    pub fn x_fast(&self, tau: f64) -> f64 {
        tau / (2.0 * self.speeds.lambda())
    }

    pub fn x_mixed(&self, tau: f64) -> f64 {
        tau / (self.speeds.lambda() + self.speeds.mu())
    }

    pub fn x_slow(&self, tau: f64) -> f64 {
        tau / (2.0 * self.speeds.mu())
    }
}

/// Which column of U a solution belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Column {
    /// Boundary impulse delta(t) e1; unit Dirac on t = lambda x.
    U,
    /// Boundary impulse delta(t) e2; unit Dirac on t = mu x.
    Ubar,
}

/// One solved column: the smooth piecewise remainder plus its Goursat data.
/// The singular structure is fixed by the expansion: a unit Dirac along
/// t = lambda x carried by e1 (U) or along t = mu x carried by e2 (Ubar).
#[derive(Clone, Debug)]
pub struct WaveSolution {
    pub column: Column,
    pub data: GoursatData,
    pub field: PiecewiseField,
}

/// Smooth part R(t) of U_x(0, t) on the trace grid, plus the singular
/// weights at t = 0. The delta'-weight is diag(-lambda, -mu); the
/// delta-weight vanishes when diag(A) = 0 and equals diag(-d_i(0)/2) after
/// an automatic gauge reduction.
#[derive(Clone, Debug)]
pub struct BoundaryTrace {
    pub speeds: SpeedPair,
    pub dt: f64,
    /// `r[j][row][col]`, col 0 = u column, col 1 = ubar column.
    pub r: Vec<[[f64; 2]; 2]>,
    pub delta_weight: [f64; 2],
    pub delta_prime_weight: [f64; 2],
    /// Leading rows filled by one-sided extrapolation toward the t = 0
    /// corner, where the stencil footprint leaves the upper region.
    pub corner_rows: usize,
    pub gauge_reduced: bool,
}

impl BoundaryTrace {
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn t(&self, j: usize) -> f64 {
        j as f64 * self.dt
    }

    pub fn t_horizon(&self) -> f64 {
        self.t(self.len() - 1)
    }

    pub fn max_abs(&self) -> f64 {
        let mut m: f64 = 0.0;
        for r in &self.r {
            for row in r {
                for v in row {
                    m = m.max(v.abs());
                }
            }
        }
        m
    }

    /// Entry-wise difference on a shared grid.
    pub fn sub(&self, other: &BoundaryTrace) -> Result<BoundaryTrace> {
        if self.len() != other.len() || (self.dt - other.dt).abs() > 1e-12 * self.dt {
            return Err(TwoSpeedError::Domain(
                "trace difference requires a shared time grid".into(),
            ));
        }
        let r = self
            .r
            .iter()
            .zip(other.r.iter())
            .map(|(a, b)| {
                [
                    [a[0][0] - b[0][0], a[0][1] - b[0][1]],
                    [a[1][0] - b[1][0], a[1][1] - b[1][1]],
                ]
            })
            .collect();
        Ok(BoundaryTrace {
            speeds: self.speeds,
            dt: self.dt,
            r,
            delta_weight: [
                self.delta_weight[0] - other.delta_weight[0],
                self.delta_weight[1] - other.delta_weight[1],
            ],
            delta_prime_weight: [0.0, 0.0],
            corner_rows: self.corner_rows.max(other.corner_rows),
            gauge_reduced: self.gauge_reduced || other.gauge_reduced,
        })
    }

    /// Max-norm of |R - R'| restricted to t <= t_hi.
    pub fn max_abs_diff_until(&self, other: &BoundaryTrace, t_hi: f64) -> f64 {
        let mut m: f64 = 0.0;
        for j in 0..self.len().min(other.len()) {
            if self.t(j) > t_hi + 1e-12 {
                break;
            }
            for row in 0..2 {
                for col in 0..2 {
                    m = m.max((self.r[j][row][col] - other.r[j][row][col]).abs());
                }
            }
        }
        m
    }
}

/// Full forward solve output: both columns and the assembled trace.
#[derive(Clone, Debug)]
pub struct ForwardSolution {
    pub u: WaveSolution,
    pub ubar: WaveSolution,
    pub trace: BoundaryTrace,
    pub gauge: Option<GaugeTransform>,
    pub grid: Arc<CharGrid>,
}

fn worker_threads() -> usize {
    std::env::var("TWOSPEED_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .map(|v| v.max(1))
        .unwrap_or(2)
}

/// Solve both column problems and extract the boundary trace.
///
/// Requires coefficients on [0, T/lambda]. If diag(A) != 0 there, the pair
/// is gauge-reduced first; the returned trace then carries the shifted
/// delta-weight diag(-d_i(0)/2) and the gauge is reported in the solution.
pub fn forward_solve(
    coeffs: &CoefficientField,
    speeds: SpeedPair,
    t_horizon: f64,
    h: f64,
) -> Result<ForwardSolution> {
    let x_causal = t_horizon / speeds.lambda();
    if coeffs.x_max() < x_causal - 1e-9 {
        return Err(TwoSpeedError::Domain(format!(
            "coefficients cover [0, {}] but the solver needs [0, T/lambda] = [0, {}]",
            coeffs.x_max(),
            x_causal
        )));
    }
    let grid = Arc::new(CharGrid::new(speeds, t_horizon, h)?);

    let (effective, gauge, delta_weight) = if coeffs.is_diag_free(x_causal) {
        (coeffs.clone(), None, [0.0, 0.0])
    } else {
        let g = gauge_reduce_up_to(coeffs, x_causal);
        let dw = [
            -0.5 * g.d[0].eval(0.0),
            -0.5 * g.d[1].eval(0.0),
        ];
        (g.reduced.clone(), Some(g), dw)
    };

    let solve_col = |col: Column| -> Result<WaveSolution> {
        let data = match col {
            Column::U => char_data_u(&effective, speeds, t_horizon)?,
            Column::Ubar => char_data_ubar(&effective, speeds, t_horizon)?,
        };
        let field = solve_goursat(&data, &effective, &grid)?;
        Ok(WaveSolution {
            column: col,
            data,
            field,
        })
    };

    let (u, ubar) = if worker_threads() >= 2 {
        std::thread::scope(|scope| {
            let hu = scope.spawn(|| solve_col(Column::U));
            let hub = scope.spawn(|| solve_col(Column::Ubar));
            (hu.join().expect("u solve panicked"), hub.join().expect("ubar solve panicked"))
        })
    } else {
        (solve_col(Column::U), solve_col(Column::Ubar))
    };
    let (u, ubar) = (u?, ubar?);

    let trace = extract_trace(
        &grid,
        &u.field,
        &ubar.field,
        delta_weight,
        gauge.is_some(),
    );
    Ok(ForwardSolution {
        u,
        ubar,
        trace,
        gauge,
        grid,
    })
}

/// Boundary measurement only; see `forward_solve` for the full output.
pub fn forward_response(
    coeffs: &CoefficientField,
    speeds: SpeedPair,
    t_horizon: f64,
    h: f64,
) -> Result<BoundaryTrace> {
    forward_solve(coeffs, speeds, t_horizon, h).map(|s| s.trace)
}

fn extract_trace(
    grid: &Arc<CharGrid>,
    u: &PiecewiseField,
    ubar: &PiecewiseField,
    delta_weight: [f64; 2],
    gauge_reduced: bool,
) -> BoundaryTrace {
    let s = grid.speeds();
    let n = grid.n();
    let h = grid.h();
    let mut r = vec![[[0.0f64; 2]; 2]; n + 1];
    // the one-sided x-stencil needs (0..2, j) inside the closed upper region
    let mut first_valid = n;
    for j in 0..=n {
        if grid.upper_real(2, j) {
            first_valid = j;
            break;
        }
    }
    for j in first_valid..=n {
        for (col, fld) in [u, ubar].into_iter().enumerate() {
            for comp in 0..2 {
                let g0 = fld.node(Side::Upper, 0, j)[comp];
                let g1 = fld.node(Side::Upper, 1, j)[comp];
                let g2 = fld.node(Side::Upper, 2, j)[comp];
                r[j][comp][col] = d1_onesided(g0, g1, g2, h);
            }
        }
    }
    // quadratic extrapolation into the t = 0 corner
    if first_valid > 0 {
        let (j0, j1, j2) = (first_valid, first_valid + 1, first_valid + 2);
        for j in 0..first_valid {
            let t = j as f64;
            let (t0, t1, t2) = (j0 as f64, j1 as f64, j2 as f64);
            let w0 = (t - t1) * (t - t2) / ((t0 - t1) * (t0 - t2));
            let w1 = (t - t0) * (t - t2) / ((t1 - t0) * (t1 - t2));
            let w2 = (t - t0) * (t - t1) / ((t2 - t0) * (t2 - t1));
            for row in 0..2 {
                for col in 0..2 {
                    r[j][row][col] =
                        w0 * r[j0][row][col] + w1 * r[j1][row][col] + w2 * r[j2][row][col];
                }
            }
        }
    }
    BoundaryTrace {
        speeds: s,
        dt: grid.ht(),
        r,
        delta_weight,
        delta_prime_weight: [-s.lambda(), -s.mu()],
        corner_rows: first_valid,
        gauge_reduced,
    }
}

/// Entry-wise A + eps * dA, with derivative evaluators combined the same way.
pub fn perturbed_coefficients(
    base: &CoefficientField,
    perturbation: &CoefficientField,
    epsilon: f64,
) -> CoefficientField {
    let x_max = base.x_max().min(perturbation.x_max());
    let mut out = CoefficientField::zero(x_max);
    for row in 0..2 {
        for col in 0..2 {
            let (ab, ap) = (base.a_entry(row, col).clone(), perturbation.a_entry(row, col).clone());
            let (ab2, ap2) = (ab.clone(), ap.clone());
            out.set_a(
                row,
                col,
                Func1::closure_with_deriv(
                    move |x| ab.eval(x) + epsilon * ap.eval(x),
                    move |x| ab2.deriv(x) + epsilon * ap2.deriv(x),
                ),
            );
            let (bb, bp) = (base.b_entry(row, col).clone(), perturbation.b_entry(row, col).clone());
            out.set_b(
                row,
                col,
                Func1::closure(move |x| bb.eval(x) + epsilon * bp.eval(x)),
            );
        }
    }
    out
}

/// Traces of (A, B) and (A + eps dA, B + eps dB) on the same grid, for
/// Born differencing.
pub fn synthesize_perturbed_pair(
    coeffs: &CoefficientField,
    perturbation: &CoefficientField,
    epsilon: f64,
    speeds: SpeedPair,
    t_horizon: f64,
    h: f64,
) -> Result<(BoundaryTrace, BoundaryTrace)> {
    let base = forward_response(coeffs, speeds, t_horizon, h)?;
    let pert = perturbed_coefficients(coeffs, perturbation, epsilon);
    let perturbed = forward_response(&pert, speeds, t_horizon, h)?;
    Ok((base, perturbed))
}
