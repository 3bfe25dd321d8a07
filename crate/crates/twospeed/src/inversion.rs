//! Linearized (Born) inversion of boundary-trace differences about the
//! trivial background, prior-based separation of the mixed channels, and
//! the empirical stability-ratio experiment.
//!
//! About A = 0, B = 0 the linearized data determine
//!   dB11(x)     from D11 at t = 2 lambda x,
//!   dB22(x)     from D22 at t = 2 mu x,
//!   m12 = dB12 - mu/(lambda+mu) dA12'     from D12 at t = (lambda+mu) x,
//!   m21 = dB21 - lambda/(lambda+mu) dA21' from D21 at t = (lambda+mu) x,
//! each on a depth interval set by its round-trip travel time.

use crate::error::{Result, TwoSpeedError};
use crate::forward::{forward_response, BoundaryTrace, TravelTimes};
use crate::model::{ident_tol, mat_max_abs, CoefficientField, SpeedPair};
use crate::numerics::{Func1, Pchip};

/// Prior information needed to separate dB12, dB21, dA12', dA21' from the
/// two mixed channels.
#[derive(Clone, Debug)]
pub enum Prior {
    None,
    /// The off-diagonal entries of dA are known.
    DeltaAKnown { da12: Func1, da21: Func1 },
    /// The off-diagonal entries of dB are known.
    OffDiagDeltaBKnown { db12: Func1, db21: Func1 },
}

/// Channel-wise estimates on the common depth grid x_k = k dx. Channel
/// lengths differ: dB11 reaches x_fast(T), the mixed channels x_mixed(T),
/// dB22 x_slow(T). Separated entries are present only when a prior was
/// supplied.
#[derive(Clone, Debug)]
pub struct PerturbationEstimate {
    pub speeds: SpeedPair,
    pub dx: f64,
    pub db11: Vec<f64>,
    pub db22: Vec<f64>,
    pub m12: Vec<f64>,
    pub m21: Vec<f64>,
    pub db12: Option<Vec<f64>>,
    pub db21: Option<Vec<f64>>,
    pub da12: Option<Vec<f64>>,
    pub da21: Option<Vec<f64>>,
}

impl PerturbationEstimate {
    pub fn x(&self, k: usize) -> f64 {
        k as f64 * self.dx
    }

    fn channel_eval(&self, samples: &[f64], x: f64, name: &str) -> Result<f64> {
        let xf = x / self.dx;
        let k = xf.round() as usize;
        if x < -1e-12 || k >= samples.len() {
            return Err(TwoSpeedError::Domain(format!(
                "depth {x} beyond the validity interval of channel {name}"
            )));
        }
        if (xf - k as f64).abs() < 1e-9 {
            Ok(samples[k])
        } else {
            let k0 = (xf.floor() as usize).min(samples.len() - 2);
            let u = xf - k0 as f64;
            Ok(samples[k0] * (1.0 - u) + samples[k0 + 1] * u)
        }
    }

    pub fn eval_db11(&self, x: f64) -> Result<f64> {
        self.channel_eval(&self.db11, x, "dB11")
    }

    pub fn eval_db22(&self, x: f64) -> Result<f64> {
        self.channel_eval(&self.db22, x, "dB22")
    }

    pub fn eval_m12(&self, x: f64) -> Result<f64> {
        self.channel_eval(&self.m12, x, "m12")
    }

    pub fn eval_m21(&self, x: f64) -> Result<f64> {
        self.channel_eval(&self.m21, x, "m21")
    }

    /// Separated off-diagonal dB; errors when no prior was supplied.
    pub fn separated_db(&self) -> Result<(&[f64], &[f64])> {
        match (&self.db12, &self.db21) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(TwoSpeedError::UnderDetermined),
        }
    }

    /// Separated dA entries; errors when no prior was supplied.
    pub fn separated_da(&self) -> Result<(&[f64], &[f64])> {
        match (&self.da12, &self.da21) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(TwoSpeedError::UnderDetermined),
        }
    }
}

/// Invert a difference trace D(t) channel by channel:
/// dB11(x) = 2 lambda D11(2 lambda x), dB22(x) = 2 mu D22(2 mu x),
/// m12(x) = (lambda+mu) D12((lambda+mu) x), m21 likewise. Off-grid times are
/// resampled with a monotone cubic interpolant.
pub fn born_invert(diff: &BoundaryTrace, prior: &Prior) -> Result<PerturbationEstimate> {
    let s = diff.speeds;
    let (lam, mu) = (s.lambda(), s.mu());
    let tt = TravelTimes::new(s);
    let t_max = diff.t_horizon();
    let dx = diff.dt / (2.0 * lam);

    let times: Vec<f64> = (0..diff.len()).map(|j| diff.t(j)).collect();
    let entry = |row: usize, col: usize| -> Pchip {
        let ys: Vec<f64> = diff.r.iter().map(|r| r[row][col]).collect();
        Pchip::new(times.clone(), ys)
    };
    let d11 = entry(0, 0);
    let d12 = entry(0, 1);
    let d21 = entry(1, 0);
    let d22 = entry(1, 1);

    let sample = |interp: &Pchip, stretch: f64, factor: f64, x_hi: f64| -> Vec<f64> {
        let n = (x_hi / dx + 1e-9).floor() as usize;
        (0..=n)
            .map(|k| factor * interp.eval(stretch * k as f64 * dx))
            .collect()
    };
    let db11 = sample(&d11, 2.0 * lam, 2.0 * lam, tt.x_fast(t_max));
    let db22 = sample(&d22, 2.0 * mu, 2.0 * mu, tt.x_slow(t_max));
    let m12 = sample(&d12, lam + mu, lam + mu, tt.x_mixed(t_max));
    let m21 = sample(&d21, lam + mu, lam + mu, tt.x_mixed(t_max));

    let mut est = PerturbationEstimate {
        speeds: s,
        dx,
        db11,
        db22,
        m12,
        m21,
        db12: None,
        db21: None,
        da12: None,
        da21: None,
    };

    match prior {
        Prior::None => {}
        Prior::DeltaAKnown { da12, da21 } => {
            let wf = mu / (lam + mu);
            let ws = lam / (lam + mu);
            est.db12 = Some(
                est.m12
                    .iter()
                    .enumerate()
                    .map(|(k, m)| m + wf * da12.deriv(k as f64 * dx))
                    .collect(),
            );
            est.db21 = Some(
                est.m21
                    .iter()
                    .enumerate()
                    .map(|(k, m)| m + ws * da21.deriv(k as f64 * dx))
                    .collect(),
            );
        }
        Prior::OffDiagDeltaBKnown { db12, db21 } => {
            // dA' from the known dB, then trapezoid from dA(0) = 0
            let integrate = |known: &Func1, m: &[f64], w: f64| -> Vec<f64> {
                let deriv: Vec<f64> = m
                    .iter()
                    .enumerate()
                    .map(|(k, mv)| w * (known.eval(k as f64 * dx) - mv))
                    .collect();
                let mut out = Vec::with_capacity(deriv.len());
                let mut acc = 0.0;
                out.push(0.0);
                for k in 1..deriv.len() {
                    acc += 0.5 * dx * (deriv[k - 1] + deriv[k]);
                    out.push(acc);
                }
                out
            };
            est.da12 = Some(integrate(db12, &est.m12, (lam + mu) / mu));
            est.da21 = Some(integrate(db21, &est.m21, (lam + mu) / lam));
        }
    }
    Ok(est)
}

/// Symmetry statistic max_t |R12 - R21|; O(h^2) for self-adjoint pairs,
/// O(1) otherwise.
pub fn symmetry_check(trace: &BoundaryTrace) -> f64 {
    trace
        .r
        .iter()
        .map(|r| (r[0][1] - r[1][0]).abs())
        .fold(0.0, f64::max)
}

/// Per-depth report of the empirical stability comparison.
#[derive(Clone, Debug)]
pub struct StabilityReport {
    pub x: Vec<f64>,
    /// |(B - Bt)(x)| + |(A' - At')(x)|.
    pub lhs: Vec<f64>,
    /// max over [0, min(2 mu x, T)] of |U_x(0,.) - Ut_x(0,.)|.
    pub rhs: Vec<f64>,
    /// |((lambda+mu) dB - dA' sqrt(C))(x)|, the Volterra-estimate quantity.
    pub intermediate: Vec<f64>,
    pub ratio_sup: f64,
}

/// Empirical harness for the stability estimate: solves both pairs with
/// horizon T = lambda X and compares the coefficient deviation against the
/// boundary-data deviation over [0, lambda X / mu]. The data window
/// [0, 2 mu x] is clipped at T where it exceeds the computed horizon.
pub fn stability_ratio(
    coeffs: &CoefficientField,
    coeffs_tilde: &CoefficientField,
    speeds: SpeedPair,
    x_total: f64,
    h: f64,
) -> Result<StabilityReport> {
    let (lam, mu) = (speeds.lambda(), speeds.mu());
    check_stability_hypotheses(coeffs, coeffs_tilde, x_total)?;
    let t_horizon = lam * x_total;
    let trace = forward_response(coeffs, speeds, t_horizon, h)?;
    let trace_t = forward_response(coeffs_tilde, speeds, t_horizon, h)?;

    let x_hi = lam * x_total / mu;
    let nx = (x_hi / h + 1e-9).floor() as usize;
    let scale = trace.max_abs().max(trace_t.max_abs());
    let floor = 1e-14 * scale + 1e-300;

    let mut xs = Vec::with_capacity(nx + 1);
    let mut lhs = Vec::with_capacity(nx + 1);
    let mut rhs = Vec::with_capacity(nx + 1);
    let mut mid = Vec::with_capacity(nx + 1);
    let mut ratio_sup: f64 = 0.0;
    for k in 0..=nx {
        let x = k as f64 * h;
        let db = sub_mat(&coeffs.b_mat(x), &coeffs_tilde.b_mat(x));
        let dap = sub_mat(&coeffs.a_prime_mat(x), &coeffs_tilde.a_prime_mat(x));
        let l = mat_max_abs(&db) + mat_max_abs(&dap);
        let r = trace.max_abs_diff_until(&trace_t, (2.0 * mu * x).min(t_horizon));
        let inter = {
            let mut m = [[0.0; 2]; 2];
            let sqrt_c = [lam, mu];
            for row in 0..2 {
                for col in 0..2 {
                    m[row][col] = (lam + mu) * db[row][col] - dap[row][col] * sqrt_c[col];
                }
            }
            mat_max_abs(&m)
        };
        if k > 0 {
            ratio_sup = ratio_sup.max(l / r.max(floor));
        }
        xs.push(x);
        lhs.push(l);
        rhs.push(r);
        mid.push(inter);
    }
    Ok(StabilityReport {
        x: xs,
        lhs,
        rhs,
        intermediate: mid,
        ratio_sup,
    })
}

fn sub_mat(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [
        [a[0][0] - b[0][0], a[0][1] - b[0][1]],
        [a[1][0] - b[1][0], a[1][1] - b[1][1]],
    ]
}

fn check_stability_hypotheses(
    a: &CoefficientField,
    b: &CoefficientField,
    x_total: f64,
) -> Result<()> {
    if !a.is_diag_free(x_total) || !b.is_diag_free(x_total) {
        return Err(TwoSpeedError::Hypothesis(
            "diag(A) and diag(At) must vanish".into(),
        ));
    }
    let scale = {
        let (sa, _) = a.sup_abs(x_total);
        let (sb, _) = b.sup_abs(x_total);
        sa.max(sb)
    };
    let tol = 100.0 * ident_tol(scale);
    let a0 = sub_mat(&a.a_mat(0.0), &b.a_mat(0.0));
    if mat_max_abs(&a0) > tol {
        return Err(TwoSpeedError::Hypothesis("A(0) must equal At(0)".into()));
    }
    let mut same_a = true;
    let mut same_offdiag_b = true;
    for k in 0..=200 {
        let x = x_total * k as f64 / 200.0;
        if mat_max_abs(&sub_mat(&a.a_mat(x), &b.a_mat(x))) > tol {
            same_a = false;
        }
        let dbm = sub_mat(&a.b_mat(x), &b.b_mat(x));
        if dbm[0][1].abs() > tol || dbm[1][0].abs() > tol {
            same_offdiag_b = false;
        }
    }
    if !(same_a || same_offdiag_b) {
        return Err(TwoSpeedError::Hypothesis(
            "either A = At or the off-diagonal entries of B and Bt must agree".into(),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::synthesize_perturbed_pair;

    fn speeds12() -> SpeedPair {
        SpeedPair::new(1.0, 2.0).unwrap()
    }

    fn trace_from_entry(row: usize, col: usize, f: impl Fn(f64) -> f64) -> BoundaryTrace {
        let dt = 1.0 / 64.0;
        let n = 128;
        let mut r = vec![[[0.0; 2]; 2]; n + 1];
        for (j, rj) in r.iter_mut().enumerate() {
            rj[row][col] = f(j as f64 * dt);
        }
        BoundaryTrace {
            speeds: speeds12(),
            dt,
            r,
            delta_weight: [0.0; 2],
            delta_prime_weight: [0.0; 2],
            corner_rows: 0,
            gauge_reduced: false,
        }
    }

    #[test]
    fn zero_difference_gives_zero_estimates() {
        let d = trace_from_entry(0, 0, |_| 0.0);
        let est = born_invert(&d, &Prior::None).unwrap();
        assert!(est.db11.iter().all(|v| *v == 0.0));
        assert!(est.separated_db().is_err());
    }

    #[test]
    fn db11_channel_inverts_printed_formula() {
        // lambda = 1, D11(t) = sin t: dB11(x) = 2 sin 2x
        let d = trace_from_entry(0, 0, f64::sin);
        let est = born_invert(&d, &Prior::None).unwrap();
        for k in [3, 17, 40] {
            let x = est.x(k);
            assert!(
                (est.eval_db11(x).unwrap() - 2.0 * (2.0 * x).sin()).abs() < 1e-6,
                "x = {x}"
            );
        }
        // depth beyond the channel window errors out
        assert!(est.eval_db11(1.5).is_err());
    }

    #[test]
    fn channel_depth_windows_scale_with_speeds() {
        let d = trace_from_entry(1, 1, |t| t);
        let est = born_invert(&d, &Prior::None).unwrap();
        let t_max = 2.0;
        assert!((est.x(est.db11.len() - 1) - t_max / 2.0).abs() < 2.0 * est.dx);
        assert!((est.x(est.db22.len() - 1) - t_max / 4.0).abs() < 2.0 * est.dx);
        assert!((est.x(est.m12.len() - 1) - t_max / 3.0).abs() < 2.0 * est.dx);
    }

    #[test]
    fn separation_with_da_known_leaves_mixed_channel_when_da_zero() {
        let d = trace_from_entry(0, 1, |t| 0.3 * t);
        let prior = Prior::DeltaAKnown {
            da12: Func1::Zero,
            da21: Func1::Zero,
        };
        let est = born_invert(&d, &prior).unwrap();
        let (db12, _) = est.separated_db().unwrap();
        for (a, b) in db12.iter().zip(est.m12.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn born_round_trip_on_diagonal_bump() {
        // base zero, dB = diag(bump, 0); recovery error is O(eps) + O(h^2)
        let base = CoefficientField::zero(2.0);
        let mut pert = CoefficientField::zero(2.0);
        pert.set_b(0, 0, Func1::closure(|x| (-20.0 * (x - 0.4) * (x - 0.4)).exp()));
        let eps = 0.05;
        let (b, p) =
            synthesize_perturbed_pair(&base, &pert, eps, speeds12(), 1.5, 1.0 / 64.0).unwrap();
        let est = born_invert(&p.sub(&b).unwrap(), &Prior::None).unwrap();
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for k in 0..est.db11.len() {
            let x = est.x(k);
            let truth = eps * (-20.0 * (x - 0.4) * (x - 0.4)).exp();
            worst = worst.max((est.db11[k] - truth).abs());
            scale = scale.max(truth.abs());
        }
        assert!(worst / scale < 0.05, "relative error {}", worst / scale);
        // mixed channels stay at the eps^2 / h^2 floor
        let spur = est.m12.iter().chain(est.m21.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(spur < 0.1 * scale, "spurious mixed response {spur}");
    }

    #[test]
    fn depth_mapping_inverts_linearized_formulas_exactly() {
        // build D(t) from the linearization formulas for known smooth
        // (dB, dA') and check channel-by-channel recovery; this is a pure
        // change of variables up to resampling error
        let s = speeds12();
        let (lam, mu) = (s.lambda(), s.mu());
        let db = |x: f64| 0.7 * (1.3 * x).sin();
        let dap = |x: f64| 0.4 * (0.9 * x).cos();
        let dt = 1.0 / 128.0;
        let n = 256;
        let mut r = vec![[[0.0; 2]; 2]; n + 1];
        for (j, rj) in r.iter_mut().enumerate() {
            let tau = j as f64 * dt;
            rj[0][0] = db(tau / (2.0 * lam)) / (2.0 * lam);
            rj[1][1] = db(tau / (2.0 * mu)) / (2.0 * mu);
            let xm = tau / (lam + mu);
            rj[0][1] = db(xm) / (lam + mu) - mu / ((lam + mu) * (lam + mu)) * dap(xm);
            rj[1][0] = db(xm) / (lam + mu) - lam / ((lam + mu) * (lam + mu)) * dap(xm);
        }
        let trace = BoundaryTrace {
            speeds: s,
            dt,
            r,
            delta_weight: [0.0; 2],
            delta_prime_weight: [0.0; 2],
            corner_rows: 0,
            gauge_reduced: false,
        };
        let est = born_invert(&trace, &Prior::None).unwrap();
        let mut worst: f64 = 0.0;
        for k in 0..est.db11.len() {
            worst = worst.max((est.db11[k] - db(est.x(k))).abs());
        }
        for k in 0..est.m12.len() {
            let x = est.x(k);
            worst = worst.max((est.m12[k] - (db(x) - mu / (lam + mu) * dap(x))).abs());
            worst = worst.max((est.m21[k] - (db(x) - lam / (lam + mu) * dap(x))).abs());
        }
        for k in 0..est.db22.len() {
            worst = worst.max((est.db22[k] - db(est.x(k))).abs());
        }
        assert!(worst < 5e-7, "depth mapping error {worst}");
    }

    #[test]
    fn stability_hypothesis_checks() {
        let mut a = CoefficientField::zero(1.0);
        a.set_a(0, 0, Func1::Const(0.3));
        let b = CoefficientField::zero(1.0);
        assert!(matches!(
            stability_ratio(&a, &b, speeds12(), 1.0, 1.0 / 8.0),
            Err(TwoSpeedError::Hypothesis(_))
        ));

        // differing A(0)
        let mut a = CoefficientField::zero(1.0);
        a.set_a(0, 1, Func1::Const(0.3));
        let b = CoefficientField::zero(1.0);
        assert!(matches!(
            stability_ratio(&a, &b, speeds12(), 1.0, 1.0 / 8.0),
            Err(TwoSpeedError::Hypothesis(_))
        ));

        // both A and off-diagonal B differ
        let mut a = CoefficientField::zero(1.0);
        a.set_a(0, 1, Func1::Poly(vec![0.0, 0.4]));
        let mut b = CoefficientField::zero(1.0);
        b.set_b(0, 1, Func1::Const(0.2));
        assert!(matches!(
            stability_ratio(&a, &b, speeds12(), 1.0, 1.0 / 8.0),
            Err(TwoSpeedError::Hypothesis(_))
        ));
    }

    #[test]
    fn intermediate_quantity_uses_column_scaled_sqrt_c() {
        // dB-only family: |(lambda+mu) dB - dA' sqrt(C)| = (lambda+mu) |dB|
        let base = CoefficientField::zero(1.0);
        let mut tilde = CoefficientField::zero(1.0);
        tilde.set_b(0, 0, Func1::Const(0.4));
        let rep = stability_ratio(&base, &tilde, speeds12(), 1.0, 1.0 / 16.0).unwrap();
        for (k, x) in rep.x.iter().enumerate() {
            let expect = 3.0 * 0.4; // (lambda + mu) * |dB|
            assert!(
                (rep.intermediate[k] - expect).abs() < 1e-12,
                "at x = {x}: {} vs {expect}",
                rep.intermediate[k]
            );
            assert!((rep.lhs[k] - 0.4).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_pairs_report_zero_constant() {
        let mut c = CoefficientField::zero(1.0);
        c.set_b(0, 0, Func1::Const(0.5));
        let rep = stability_ratio(&c, &c.clone(), speeds12(), 1.0, 1.0 / 16.0).unwrap();
        assert_eq!(rep.ratio_sup, 0.0);
        assert!(rep.lhs.iter().all(|v| *v == 0.0));
    }
}
