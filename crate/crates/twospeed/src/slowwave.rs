//! Slow-wave filter: the convolution kernel l(t) making ubar + l * u vanish
//! ahead of the slow front, found from a second-kind Volterra equation on
//! the line t + lambda x = tau:
//!
//!   L(tau - 2 lambda x) + int_0^{tau - 2 lambda x} L(s) f1(x, tau - lambda x - s) ds
//!     + f1bar(x, tau - lambda x) = 0,
//!
//! marched in sigma = tau - 2 lambda x by product trapezoid from
//! L(0) = -f1bar on the leading characteristic.

use crate::error::{Result, TwoSpeedError};
use crate::field::PiecewiseField;
use crate::model::{Side, SpeedPair};
use crate::numerics::{d1_onesided, CubicSpline};

/// The filter l on [0, tau (mu - lambda) / (mu + lambda)].
#[derive(Clone, Debug)]
pub struct SlowWaveFilter {
    pub speeds: SpeedPair,
    pub tau: f64,
    pub sigma: Vec<f64>,
    pub samples: Vec<f64>,
    spline: CubicSpline,
}

impl SlowWaveFilter {
    pub fn sigma_max(&self) -> f64 {
        *self.sigma.last().unwrap()
    }

    pub fn eval(&self, sigma: f64) -> f64 {
        self.spline.eval(sigma)
    }

    pub fn l0(&self) -> f64 {
        self.samples[0]
    }

    pub fn sup_abs(&self) -> f64 {
        self.samples.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Solve the Volterra equation for the filter from the lower-region smooth
/// parts of the two columns. `u_lower` supplies the kernel f1, `ubar_lower`
/// the forcing f1bar; both must cover the lower region up to t + lambda x = tau.
pub fn solve_filter(
    u_lower: &PiecewiseField,
    ubar_lower: &PiecewiseField,
    tau: f64,
) -> Result<SlowWaveFilter> {
    let grid = u_lower.grid_arc();
    let s = grid.speeds();
    let lam = s.lambda();
    let t_needed = tau * (1.0 + s.kappa()) / 2.0;
    if tau <= 0.0 || t_needed > grid.t_horizon() + 1e-9 || tau / (2.0 * lam) > grid.x(grid.n()) + 1e-9
    {
        return Err(TwoSpeedError::Domain(format!(
            "filter horizon tau = {tau} needs fields up to t = {t_needed}, have T = {}",
            grid.t_horizon()
        )));
    }

    let dsig = 2.0 * lam * grid.h();
    let sig_max = tau * s.kappa();
    let m_full = (sig_max / dsig + 1e-9).floor() as usize;
    let mut sigma: Vec<f64> = (0..=m_full).map(|k| k as f64 * dsig).collect();
    if sig_max - sigma[m_full] > 1e-9 * (1.0 + sig_max) {
        sigma.push(sig_max);
    }

    let kernel = |x: f64, t: f64| u_lower.eval_comp_snapped(Side::Lower, 0, x, t);
    let forcing = |x: f64, t: f64| ubar_lower.eval_comp_snapped(Side::Lower, 0, x, t);

    let mut samples = vec![0.0; sigma.len()];
    samples[0] = -forcing(tau / (2.0 * lam), tau / 2.0);
    for k in 1..sigma.len() {
        let sk = sigma[k];
        let xk = (tau - sk) / (2.0 * lam);
        let tk = (tau + sk) / 2.0;
        // composite trapezoid weights on sigma[0..=k]
        let weight = |j: usize| -> f64 {
            if j == 0 {
                (sigma[1] - sigma[0]) / 2.0
            } else if j == k {
                (sigma[k] - sigma[k - 1]) / 2.0
            } else {
                (sigma[j + 1] - sigma[j - 1]) / 2.0
            }
        };
        let mut rhs = -forcing(xk, tk);
        for (j, &sj) in sigma.iter().enumerate().take(k) {
            rhs -= weight(j) * samples[j] * kernel(xk, tk - sj);
        }
        let diag = 1.0 + weight(k) * kernel(xk, tk - sk);
        if diag.abs() < 1e-8 {
            return Err(TwoSpeedError::Domain(
                "Volterra marching pivot vanished; refine the grid".into(),
            ));
        }
        samples[k] = rhs / diag;
    }

    let spline = if sigma.len() >= 2 {
        CubicSpline::new(sigma.clone(), samples.clone())
    } else {
        CubicSpline::new(vec![0.0, 1.0], vec![samples[0], samples[0]])
    };
    Ok(SlowWaveFilter {
        speeds: s,
        tau,
        sigma,
        samples,
        spline,
    })
}

/// Residual report for the two defining identities of the filtered field
/// v = fbar + l(t - lambda x) e1 + int_0^{t - lambda x} l(s) f(x, t - s) ds
/// on the lower region (restricted to the filter's cone t + lambda x <= tau).
#[derive(Clone, Debug)]
pub struct SupportReport {
    /// max |v1| (the first identity; enforced at collocation points).
    pub res_lone: f64,
    /// max |v2| (the second identity; a genuine check).
    pub res_ltwo: f64,
    /// max |v(x, lambda x)| over both components.
    pub res_v_on_line: f64,
    /// max |v2_t(x, lambda x)| by one-sided differences.
    pub res_v2t_on_line: f64,
    /// max |ubar + l*u| on the strict interior strip lambda x <= t <= mu x - h.
    pub suppression_num: f64,
    /// max |ubar| on the same strip.
    pub suppression_den: f64,
    /// Per-diagonal residuals (sigma, max |v1|, max |v2|).
    pub per_sigma: Vec<(f64, f64, f64)>,
}

impl SupportReport {
    pub fn suppression_factor(&self) -> f64 {
        self.suppression_num / self.suppression_den.max(1e-300)
    }
}

/// Evaluate the filtered field on the lower region and report residuals.
pub fn verify_slow_support(
    filter: &SlowWaveFilter,
    u_lower: &PiecewiseField,
    ubar_lower: &PiecewiseField,
) -> Result<SupportReport> {
    let grid = u_lower.grid_arc().clone();
    if grid.n() != ubar_lower.grid_arc().n() {
        return Err(TwoSpeedError::Domain(
            "filter verification requires both columns on one grid".into(),
        ));
    }
    let s = grid.speeds();
    let (lam, mu) = (s.lambda(), s.mu());
    let (h, ht) = (grid.h(), grid.ht());
    let n = grid.n();
    let tau = filter.tau;

    // v at a lower node, by trapezoid convolution on the t-lattice
    let v_at = |i: usize, j: usize| -> [f64; 2] {
        let m = j - i; // (t - lambda x) / ht
        let mut v = ubar_lower.node(Side::Lower, i, j);
        v[0] += filter.eval(m as f64 * ht);
        if m > 0 {
            for comp in 0..2 {
                let mut acc = 0.0;
                for k in 0..=m {
                    let w = if k == 0 || k == m { 0.5 } else { 1.0 };
                    acc += w * filter.eval(k as f64 * ht)
                        * u_lower.node(Side::Lower, i, j - k)[comp];
                }
                v[comp] += acc * ht;
            }
        }
        v
    };

    let in_cone = |i: usize, j: usize| grid.t(j) + lam * grid.x(i) <= tau + 1e-9;

    let mut res1: f64 = 0.0;
    let mut res2: f64 = 0.0;
    let mut num: f64 = 0.0;
    let mut den: f64 = 0.0;
    let max_diag = (grid.t_horizon() / ht).round() as usize;
    let mut per_diag = vec![(0.0f64, 0.0f64); max_diag + 1];
    for i in 0..=n {
        for j in i..=n {
            if !(grid.lower_real(i, j) && in_cone(i, j)) {
                continue;
            }
            let v = v_at(i, j);
            res1 = res1.max(v[0].abs());
            res2 = res2.max(v[1].abs());
            let m = j - i;
            per_diag[m].0 = per_diag[m].0.max(v[0].abs());
            per_diag[m].1 = per_diag[m].1.max(v[1].abs());
            // strict interior strip: mu x - t >= h
            if mu * grid.x(i) - grid.t(j) >= h - 1e-12 {
                num = num.max(v[0].abs()).max(v[1].abs());
                let ub = ubar_lower.node(Side::Lower, i, j);
                den = den.max(ub[0].abs()).max(ub[1].abs());
            }
        }
    }

    // identities on t = lambda x: v = 0 and v2_t = 0
    let mut on_line: f64 = 0.0;
    let mut v2t: f64 = 0.0;
    for i in 0..=n {
        if !in_cone(i, i) {
            continue;
        }
        let v = v_at(i, i);
        on_line = on_line.max(v[0].abs()).max(v[1].abs());
        if i + 2 <= n && grid.lower_real(i, i + 2) && in_cone(i, i + 2) {
            let d = d1_onesided(v_at(i, i)[1], v_at(i, i + 1)[1], v_at(i, i + 2)[1], ht);
            v2t = v2t.max(d.abs());
        }
    }

    let per_sigma = filter
        .sigma
        .iter()
        .map(|&sg| {
            let m = ((sg / ht).round() as usize).min(max_diag);
            (sg, per_diag[m].0, per_diag[m].1)
        })
        .collect();

    Ok(SupportReport {
        res_lone: res1,
        res_ltwo: res2,
        res_v_on_line: on_line,
        res_v2t_on_line: v2t,
        suppression_num: num,
        suppression_den: den,
        per_sigma,
    })
}
