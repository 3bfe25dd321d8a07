//! CSV emission. Every file starts with a `#` header block carrying the
//! config hash, grid parameters and code version; numbers are printed with
//! 17 significant digits so identical runs produce byte-identical files.

use crate::forward::BoundaryTrace;
use crate::inversion::{PerturbationEstimate, StabilityReport};
use crate::slowwave::{SlowWaveFilter, SupportReport};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Clone, Debug)]
pub struct Header {
    pub config_hash: u64,
    pub lambda: f64,
    pub mu: f64,
    pub t_horizon: f64,
    pub h: f64,
}

impl Header {
    fn block(&self, extra: &[(&str, String)]) -> String {
        let mut s = String::new();
        s.push_str(&format!("# twospeed {CODE_VERSION}\n"));
        s.push_str(&format!("# config_hash = {:016x}\n", self.config_hash));
        s.push_str(&format!(
            "# lambda = {} mu = {} T = {} h = {}\n",
            fmt(self.lambda),
            fmt(self.mu),
            fmt(self.t_horizon),
            fmt(self.h)
        ));
        for (k, v) in extra {
            s.push_str(&format!("# {k} = {v}\n"));
        }
        s
    }
}

/// Data rows of a trace file, header-free (used for byte-identity checks).
pub fn trace_rows(trace: &BoundaryTrace) -> String {
    let mut s = String::from("t,R11,R12,R21,R22\n");
    for j in 0..trace.len() {
        let r = &trace.r[j];
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt(trace.t(j)),
            fmt(r[0][0]),
            fmt(r[0][1]),
            fmt(r[1][0]),
            fmt(r[1][1])
        ));
    }
    s
}

pub fn trace_csv(trace: &BoundaryTrace, header: &Header) -> String {
    let extra = [
        (
            "delta_prime_weight",
            format!(
                "{} {}",
                fmt(trace.delta_prime_weight[0]),
                fmt(trace.delta_prime_weight[1])
            ),
        ),
        (
            "delta_weight",
            format!("{} {}", fmt(trace.delta_weight[0]), fmt(trace.delta_weight[1])),
        ),
        ("gauge_reduced", trace.gauge_reduced.to_string()),
        (
            "corner_extrapolated_rows",
            trace.corner_rows.to_string(),
        ),
    ];
    format!("{}{}", header.block(&extra), trace_rows(trace))
}

pub fn filter_csv(filter: &SlowWaveFilter, report: &SupportReport, header: &Header) -> String {
    let extra = [
        ("tau", fmt(filter.tau)),
        ("l0", fmt(filter.l0())),
        ("sup_l", fmt(filter.sup_abs())),
        (
            "suppression_factor",
            fmt(report.suppression_factor()),
        ),
        ("res_v_on_line", fmt(report.res_v_on_line)),
        ("res_v2t_on_line", fmt(report.res_v2t_on_line)),
    ];
    let mut s = header.block(&extra);
    s.push_str("sigma,l,res_lone,res_ltwo\n");
    for (k, &sg) in filter.sigma.iter().enumerate() {
        let (_, r1, r2) = report.per_sigma[k];
        s.push_str(&format!(
            "{},{},{},{}\n",
            fmt(sg),
            fmt(filter.samples[k]),
            fmt(r1),
            fmt(r2)
        ));
    }
    s
}

pub fn reconstruction_csv(est: &PerturbationEstimate, header: &Header) -> String {
    let mut s = header.block(&[("dx", fmt(est.dx))]);
    s.push_str("x,dB11,dB22,m12,m21,dB12,dB21,dA12,dA21\n");
    let opt = |v: Option<&Vec<f64>>, k: usize| -> String {
        match v {
            Some(vals) if k < vals.len() => fmt(vals[k]),
            _ => String::new(),
        }
    };
    let some = |vals: &[f64], k: usize| -> String {
        if k < vals.len() {
            fmt(vals[k])
        } else {
            String::new()
        }
    };
    for k in 0..est.db11.len() {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            fmt(est.x(k)),
            some(&est.db11, k),
            some(&est.db22, k),
            some(&est.m12, k),
            some(&est.m21, k),
            opt(est.db12.as_ref(), k),
            opt(est.db21.as_ref(), k),
            opt(est.da12.as_ref(), k),
            opt(est.da21.as_ref(), k),
        ));
    }
    s
}

pub fn stability_csv(report: &StabilityReport, header: &Header) -> String {
    let mut s = header.block(&[("ratio_sup", fmt(report.ratio_sup))]);
    s.push_str("x,lhs,rhs,ratio\n");
    for k in 0..report.x.len() {
        let ratio = report.lhs[k] / report.rhs[k].max(1e-300);
        s.push_str(&format!(
            "{},{},{},{}\n",
            fmt(report.x[k]),
            fmt(report.lhs[k]),
            fmt(report.rhs[k]),
            fmt(ratio)
        ));
    }
    s
}

/// Refinement-study table: per level the trace distance to the next-finer
/// level and the observed order.
pub fn convergence_csv(rows: &[(usize, f64, f64, f64)], header: &Header) -> String {
    let mut s = header.block(&[]);
    s.push_str("level,h,trace_diff_to_finer,observed_order\n");
    for (level, h, diff, order) in rows {
        s.push_str(&format!("{level},{},{},{}\n", fmt(*h), fmt(*diff), fmt(*order)));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(fmt(1.0), "1.0000000000000000e0");
        assert_eq!(fmt(-0.125), "-1.2500000000000000e-1");
    }
}
