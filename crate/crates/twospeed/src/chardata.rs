//! Boundary/characteristic/transmission data for the two column problems.
//!
//! For diag(A) = 0 the progressing-wave expansion prescribes, per column,
//! the boundary values p on x = 0, Cauchy-type data (r, s2) on t = lambda x,
//! and the jump data (q, s1) on t = mu x. The first-order conditions on the
//! characteristic lines are transport relations; they are closed here for
//! f_2t and (g1bar - f1bar)_t by eliminating the tangential derivative, and
//! the closures are cross-validated numerically after the solve.

use std::sync::Arc;

use crate::error::{Result, TwoSpeedError};
use crate::field::PiecewiseField;
use crate::model::{ident_tol, CoefficientField, SpeedPair};
use crate::numerics::{CumulativeIntegral, Func1};

/// Data of the Goursat problem on D_T:
/// g(0, t) = p(t); f(x, lambda x) = r(x), f_2t(x, lambda x) = s2(x);
/// (g - f)(x, mu x) = q(x), (g1 - f1)_t(x, mu x) = s1(x);
/// L f = F on the lower region, L g = G on the upper region.
#[derive(Clone, Debug)]
pub struct GoursatData {
    pub t_horizon: f64,
    pub p: [Func1; 2],
    pub r: [Func1; 2],
    pub s2: Func1,
    pub q: [Func1; 2],
    pub s1: Func1,
    /// Interior forcing {F, G} sampled on the solve grid; None means zero.
    pub forcing: Option<Arc<PiecewiseField>>,
}

impl GoursatData {
    pub fn new(
        t_horizon: f64,
        p: [Func1; 2],
        r: [Func1; 2],
        s2: Func1,
        q: [Func1; 2],
        s1: Func1,
    ) -> Self {
        GoursatData {
            t_horizon,
            p,
            r,
            s2,
            q,
            s1,
            forcing: None,
        }
    }

    pub fn zero(t_horizon: f64) -> Self {
        Self::new(
            t_horizon,
            Default::default(),
            Default::default(),
            Func1::Zero,
            Default::default(),
            Func1::Zero,
        )
    }

    pub fn with_forcing(mut self, forcing: Arc<PiecewiseField>) -> Self {
        self.forcing = Some(forcing);
        self
    }

    /// Largest component of |p(0) - r(0) - q(0)|.
    pub fn compatibility_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for comp in 0..2 {
            let d = self.p[comp].eval(0.0) - self.r[comp].eval(0.0) - self.q[comp].eval(0.0);
            worst = worst.max(d.abs());
        }
        worst
    }

    pub fn check_compatibility(&self) -> Result<()> {
        let scale = (0..2)
            .map(|c| {
                self.p[c]
                    .eval(0.0)
                    .abs()
                    .max(self.r[c].eval(0.0).abs())
                    .max(self.q[c].eval(0.0).abs())
            })
            .fold(0.0f64, f64::max);
        let tol = 100.0 * ident_tol(scale);
        let defect = self.compatibility_defect();
        if defect > tol {
            return Err(TwoSpeedError::IncompatibleData { defect, tol });
        }
        Ok(())
    }
}

fn require_diag_free(coeffs: &CoefficientField, up_to: f64) -> Result<()> {
    if !coeffs.is_diag_free(up_to) {
        return Err(TwoSpeedError::GaugeViolation {
            max_diag: coeffs.max_diag(up_to),
        });
    }
    Ok(())
}

const N_QUAD: usize = 4096;

/// Data for the u column (boundary impulse on the fast component).
///
/// r1(x) = (1/2 lambda) int b11 + (lambda / 2(mu^2 - lambda^2)) int a12 a21,
/// r2(x) = lambda a21(x) / (lambda^2 - mu^2),
/// q = (0, lambda a21(0) / (mu^2 - lambda^2)),
/// s1(x) = lambda mu a21(0) a12(x) / (mu^2 - lambda^2)^2,
/// and s2 closes the transport relation
/// (lambda^2 + mu^2) f_2t + 2 lambda f_2x + lambda a21 f1 = b21 on t = lambda x
/// using d/dx f2(x, lambda x) = f_2x + lambda f_2t:
/// s2 = (b21 - 2 lambda r2' - lambda a21 r1) / (mu^2 - lambda^2).
pub fn char_data_u(
    coeffs: &CoefficientField,
    speeds: SpeedPair,
    t_horizon: f64,
) -> Result<GoursatData> {
    let (lam, mu) = (speeds.lambda(), speeds.mu());
    let x_hi = t_horizon / lam;
    require_diag_free(coeffs, x_hi)?;
    let gap = mu * mu - lam * lam;

    let b11 = coeffs.b_entry(0, 0).clone();
    let b21 = coeffs.b_entry(1, 0).clone();
    let a12 = coeffs.a_entry(0, 1).clone();
    let a21 = coeffs.a_entry(1, 0).clone();

    let r1 = if b11.is_zero() && (a12.is_zero() || a21.is_zero()) {
        Func1::Zero
    } else {
        let (b11c, a12c, a21c) = (b11.clone(), a12.clone(), a21.clone());
        let cum = Arc::new(CumulativeIntegral::build(0.0, x_hi, N_QUAD, 0.0, move |x| {
            b11c.eval(x) / (2.0 * lam) + lam / (2.0 * gap) * a12c.eval(x) * a21c.eval(x)
        }));
        Func1::AntiDeriv(cum)
    };

    let r2 = if a21.is_zero() {
        Func1::Zero
    } else {
        let (a21c, a21d) = (a21.clone(), a21.clone());
        Func1::closure_with_deriv(
            move |x| lam / (lam * lam - mu * mu) * a21c.eval(x),
            move |x| lam / (lam * lam - mu * mu) * a21d.deriv(x),
        )
    };

    let s2 = {
        let (b21c, a21c, r1c, r2c) = (b21.clone(), a21.clone(), r1.clone(), r2.clone());
        if b21c.is_zero() && a21c.is_zero() {
            Func1::Zero
        } else {
            Func1::closure(move |x| {
                (b21c.eval(x) - 2.0 * lam * r2c.deriv(x) - lam * a21c.eval(x) * r1c.eval(x)) / gap
            })
        }
    };

    let q2 = Func1::Const(lam * a21.eval(0.0) / gap);
    let s1 = {
        let a21_0 = a21.eval(0.0);
        if a21_0 == 0.0 || a12.is_zero() {
            Func1::Zero
        } else {
            let a12c = a12.clone();
            Func1::closure(move |x| lam * mu / (gap * gap) * a21_0 * a12c.eval(x))
        }
    };

    Ok(GoursatData::new(
        t_horizon,
        [Func1::Zero, Func1::Zero],
        [r1, r2],
        s2,
        [Func1::Zero, q2],
        s1,
    ))
}

/// Data for the ubar column (boundary impulse on the slow component).
///
/// r1bar = mu a12(0) / (lambda^2 - mu^2), r2bar = 0,
/// s2bar(x) = lambda mu a12(0) a21(x) / (lambda^2 - mu^2)^2,
/// q1bar(x) = mu a12(x) / (mu^2 - lambda^2),
/// q2bar(x) = (mu / 2(lambda^2 - mu^2)) int a12 a21 + (1/2 mu) int b22,
/// and s1bar closes the transport relation on t = mu x:
/// s1bar = (b12 - 2 mu q1bar' - mu a12 q2bar) / (lambda^2 - mu^2).
pub fn char_data_ubar(
    coeffs: &CoefficientField,
    speeds: SpeedPair,
    t_horizon: f64,
) -> Result<GoursatData> {
    let (lam, mu) = (speeds.lambda(), speeds.mu());
    let x_hi = t_horizon / lam;
    require_diag_free(coeffs, x_hi)?;
    let gap = mu * mu - lam * lam;

    let b12 = coeffs.b_entry(0, 1).clone();
    let b22 = coeffs.b_entry(1, 1).clone();
    let a12 = coeffs.a_entry(0, 1).clone();
    let a21 = coeffs.a_entry(1, 0).clone();

    let a12_0 = a12.eval(0.0);
    let r1 = if a12_0 == 0.0 {
        Func1::Zero
    } else {
        Func1::Const(-mu * a12_0 / gap)
    };

    let s2 = if a12_0 == 0.0 || a21.is_zero() {
        Func1::Zero
    } else {
        let a21c = a21.clone();
        Func1::closure(move |x| lam * mu / (gap * gap) * a12_0 * a21c.eval(x))
    };

    let q1 = if a12.is_zero() {
        Func1::Zero
    } else {
        let (a12c, a12d) = (a12.clone(), a12.clone());
        Func1::closure_with_deriv(
            move |x| mu / gap * a12c.eval(x),
            move |x| mu / gap * a12d.deriv(x),
        )
    };

    let q2 = if b22.is_zero() && (a12.is_zero() || a21.is_zero()) {
        Func1::Zero
    } else {
        let (b22c, a12c, a21c) = (b22.clone(), a12.clone(), a21.clone());
        let cum = Arc::new(CumulativeIntegral::build(0.0, x_hi, N_QUAD, 0.0, move |x| {
            -mu / (2.0 * gap) * a12c.eval(x) * a21c.eval(x) + b22c.eval(x) / (2.0 * mu)
        }));
        Func1::AntiDeriv(cum)
    };

    let s1 = {
        let (b12c, a12c, q1c, q2c) = (b12.clone(), a12.clone(), q1.clone(), q2.clone());
        if b12c.is_zero() && a12c.is_zero() {
            Func1::Zero
        } else {
            Func1::closure(move |x| {
                -(b12c.eval(x) - 2.0 * mu * q1c.deriv(x) - mu * a12c.eval(x) * q2c.eval(x)) / gap
            })
        }
    };

    Ok(GoursatData::new(
        t_horizon,
        [Func1::Zero, Func1::Zero],
        [r1, Func1::Zero],
        s2,
        [q1, q2],
        s1,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn speeds12() -> SpeedPair {
        SpeedPair::new(1.0, 2.0).unwrap()
    }

    #[test]
    fn zero_coefficients_give_zero_data() {
        let coeffs = CoefficientField::zero(2.0);
        for data in [
            char_data_u(&coeffs, speeds12(), 2.0).unwrap(),
            char_data_ubar(&coeffs, speeds12(), 2.0).unwrap(),
        ] {
            for x in [0.0, 0.5, 1.7] {
                assert_eq!(data.r[0].eval(x), 0.0);
                assert_eq!(data.r[1].eval(x), 0.0);
                assert_eq!(data.q[0].eval(x), 0.0);
                assert_eq!(data.q[1].eval(x), 0.0);
                assert_eq!(data.s1.eval(x), 0.0);
                assert_eq!(data.s2.eval(x), 0.0);
            }
            assert_eq!(data.compatibility_defect(), 0.0);
        }
    }

    #[test]
    fn u_column_linear_a21() {
        // a21 = x, a12 = 0, B = 0: r2(x) = x/(1-4) = -x/3 and q2 = 0
        let mut coeffs = CoefficientField::zero(2.0);
        coeffs.set_a(1, 0, Func1::Poly(vec![0.0, 1.0]));
        let data = char_data_u(&coeffs, speeds12(), 2.0).unwrap();
        assert!((data.r[1].eval(0.9) + 0.3).abs() < 1e-14);
        assert_eq!(data.q[1].eval(0.4), 0.0);
        data.check_compatibility().unwrap();
    }

    #[test]
    fn u_column_transport_closure_constant_b21() {
        // A = 0, b21 = 3: s2 = 3/(mu^2 - lambda^2) = 1
        let mut coeffs = CoefficientField::zero(2.0);
        coeffs.set_b(1, 0, Func1::Const(3.0));
        let data = char_data_u(&coeffs, speeds12(), 2.0).unwrap();
        for x in [0.0, 0.3, 1.4] {
            assert!((data.s2.eval(x) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn ubar_column_printed_formulas() {
        // b22 = 2: q2bar(x) = x/2; separately b12 = 3, A = 0: s1bar = -1
        let mut coeffs = CoefficientField::zero(2.0);
        coeffs.set_b(1, 1, Func1::Const(2.0));
        let data = char_data_ubar(&coeffs, speeds12(), 2.0).unwrap();
        assert!((data.q[1].eval(0.8) - 0.4).abs() < 1e-10);

        let mut coeffs = CoefficientField::zero(2.0);
        coeffs.set_b(0, 1, Func1::Const(3.0));
        let data = char_data_ubar(&coeffs, speeds12(), 2.0).unwrap();
        for x in [0.0, 0.6, 1.5] {
            assert!((data.s1.eval(x) + 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn compatibility_holds_for_generic_coefficients() {
        let mut coeffs = CoefficientField::zero(2.5);
        coeffs.set_a(0, 1, Func1::Poly(vec![0.4, 0.2]));
        coeffs.set_a(1, 0, Func1::Poly(vec![-0.3, 0.5, 0.1]));
        coeffs.set_b(0, 0, Func1::Const(0.7));
        coeffs.set_b(1, 0, Func1::Poly(vec![0.2, -0.6]));
        coeffs.set_b(0, 1, Func1::Const(-0.4));
        coeffs.set_b(1, 1, Func1::Poly(vec![0.1, 0.3]));
        let speeds = SpeedPair::new(0.8, 1.7).unwrap();
        char_data_u(&coeffs, speeds, 2.0)
            .unwrap()
            .check_compatibility()
            .unwrap();
        char_data_ubar(&coeffs, speeds, 2.0)
            .unwrap()
            .check_compatibility()
            .unwrap();
    }

    #[test]
    fn diag_a_is_rejected() {
        let mut coeffs = CoefficientField::zero(2.0);
        coeffs.set_a(0, 0, Func1::Const(1.0));
        assert!(matches!(
            char_data_u(&coeffs, speeds12(), 2.0),
            Err(TwoSpeedError::GaugeViolation { .. })
        ));
    }
}
