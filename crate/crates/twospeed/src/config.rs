//! Line-oriented run configuration: dotted keys, one `key = value` per line,
//! `#` comments. No nesting, diff-friendly, byte-hashable.
//!
//! ```text
//! speeds.lambda = 1.0
//! speeds.mu    = 2.0
//! domain.X     = 2.0
//! domain.T     = 2.0
//! grid.h       = 0.03125
//! coeff.a12.poly  = 0.0 0.5
//! coeff.b11.table = 0:0.0 0.5:0.3 1.0:0.1
//! pert.b22.poly   = 1.0
//! experiment.epsilon  = 0.05
//! experiment.epsilons = 0.02 0.04 0.08
//! experiment.tau      = 2.0
//! experiment.prior    = none
//! out.dir = out
//! ```

use std::sync::Arc;

use crate::error::{Result, TwoSpeedError};
use crate::model::{CoefficientField, SpeedPair};
use crate::numerics::{CubicSpline, Func1};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PriorKind {
    None,
    DaKnown,
    OffdiagDbKnown,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub speeds: SpeedPair,
    pub x_domain: f64,
    pub t_horizon: f64,
    pub h: f64,
    pub refine: usize,
    pub coeffs: CoefficientField,
    pub perturbation: Option<CoefficientField>,
    pub epsilon: f64,
    pub epsilons: Vec<f64>,
    pub tau: f64,
    pub prior: PriorKind,
    pub out_dir: Option<String>,
    /// Raw config text, hashed into output headers.
    pub raw: String,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut lambda = None;
        let mut mu = None;
        let mut x_domain = None;
        let mut t_horizon = None;
        let mut h = None;
        let mut refine = 2usize;
        let mut epsilon = 0.05;
        let mut epsilons = vec![0.02, 0.04, 0.08];
        let mut tau = None;
        let mut prior = PriorKind::None;
        let mut out_dir = None;
        let mut coeff_entries: Vec<(usize, String, String, String)> = Vec::new();
        let mut pert_entries: Vec<(usize, String, String, String)> = Vec::new();

        for (idx, raw_line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = match raw_line.find('#') {
                Some(p) => &raw_line[..p],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| TwoSpeedError::Config {
                line: lineno,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            let err = |msg: String| TwoSpeedError::Config { line: lineno, msg };
            let parse_f64 = |v: &str| -> Result<f64> {
                v.parse::<f64>()
                    .map_err(|_| err(format!("`{v}` is not a number")))
            };
            match key {
                "speeds.lambda" => lambda = Some(parse_f64(value)?),
                "speeds.mu" => mu = Some(parse_f64(value)?),
                "domain.X" => x_domain = Some(parse_f64(value)?),
                "domain.T" => t_horizon = Some(parse_f64(value)?),
                "grid.h" => h = Some(parse_f64(value)?),
                "grid.refine" => {
                    refine = value
                        .parse::<usize>()
                        .map_err(|_| err(format!("`{value}` is not a level count")))?
                }
                "experiment.epsilon" => epsilon = parse_f64(value)?,
                "experiment.epsilons" => {
                    epsilons = value
                        .split_whitespace()
                        .map(parse_f64)
                        .collect::<Result<Vec<_>>>()?;
                    if epsilons.is_empty() {
                        return Err(err("experiment.epsilons needs at least one value".into()));
                    }
                }
                "experiment.tau" => tau = Some(parse_f64(value)?),
                "experiment.prior" => {
                    prior = match value {
                        "none" => PriorKind::None,
                        "da_known" => PriorKind::DaKnown,
                        "offdiag_db_known" => PriorKind::OffdiagDbKnown,
                        other => {
                            return Err(err(format!(
                                "unknown prior `{other}` (none | da_known | offdiag_db_known)"
                            )))
                        }
                    }
                }
                "out.dir" => out_dir = Some(value.to_string()),
                _ => {
                    // coeff.<entry>.<form> and pert.<entry>.<form>
                    let parts: Vec<&str> = key.split('.').collect();
                    if parts.len() == 3 && (parts[0] == "coeff" || parts[0] == "pert") {
                        let rec = (
                            lineno,
                            parts[1].to_string(),
                            parts[2].to_string(),
                            value.to_string(),
                        );
                        if parts[0] == "coeff" {
                            coeff_entries.push(rec);
                        } else {
                            pert_entries.push(rec);
                        }
                    } else {
                        return Err(err(format!("unknown key `{key}`")));
                    }
                }
            }
        }

        let need = |opt: Option<f64>, name: &str| -> Result<f64> {
            opt.ok_or_else(|| TwoSpeedError::Config {
                line: 0,
                msg: format!("missing required key `{name}`"),
            })
        };
        let lambda = need(lambda, "speeds.lambda")?;
        let mu = need(mu, "speeds.mu")?;
        let speeds = SpeedPair::new(lambda, mu).map_err(|e| TwoSpeedError::Config {
            line: 0,
            msg: e.to_string(),
        })?;
        let x_domain = need(x_domain, "domain.X")?;
        let t_horizon = need(t_horizon, "domain.T")?;
        let h = need(h, "grid.h")?;
        if h <= 0.0 {
            return Err(TwoSpeedError::Config {
                line: 0,
                msg: "grid.h must be positive".into(),
            });
        }
        if t_horizon > lambda * x_domain + 1e-9 {
            return Err(TwoSpeedError::Config {
                line: 0,
                msg: format!(
                    "domain.T = {t_horizon} exceeds lambda * X = {}; the solver needs \
                     coefficients on [0, T/lambda]",
                    lambda * x_domain
                ),
            });
        }

        let coeffs = build_field(x_domain, &coeff_entries)?;
        let perturbation = if pert_entries.is_empty() {
            None
        } else {
            Some(build_field(x_domain, &pert_entries)?)
        };

        Ok(RunConfig {
            speeds,
            x_domain,
            t_horizon,
            h,
            refine,
            coeffs,
            perturbation,
            epsilon,
            epsilons,
            tau: tau.unwrap_or(t_horizon),
            prior,
            out_dir,
            raw: text.to_string(),
        })
    }

    pub fn hash(&self) -> u64 {
        fnv1a64(self.raw.as_bytes())
    }
}

fn build_field(x_domain: f64, entries: &[(usize, String, String, String)]) -> Result<CoefficientField> {
    let mut field = CoefficientField::zero(x_domain);
    for (lineno, entry, form, value) in entries {
        let err = |msg: String| TwoSpeedError::Config {
            line: *lineno,
            msg,
        };
        let (mat, row, col) = parse_entry(entry).ok_or_else(|| {
            err(format!(
                "unknown coefficient entry `{entry}` (a11..a22, b11..b22)"
            ))
        })?;
        let func = match form.as_str() {
            "poly" => {
                let cs = value
                    .split_whitespace()
                    .map(|v| {
                        v.parse::<f64>()
                            .map_err(|_| err(format!("`{v}` is not a number")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                if cs.is_empty() {
                    return Err(err("polynomial needs at least one coefficient".into()));
                }
                Func1::Poly(cs)
            }
            "table" => {
                let mut xs = Vec::new();
                let mut ys = Vec::new();
                for pair in value.split_whitespace() {
                    let (x, y) = pair
                        .split_once(':')
                        .ok_or_else(|| err(format!("table entry `{pair}` is not `x:value`")))?;
                    xs.push(
                        x.parse::<f64>()
                            .map_err(|_| err(format!("`{x}` is not a number")))?,
                    );
                    ys.push(
                        y.parse::<f64>()
                            .map_err(|_| err(format!("`{y}` is not a number")))?,
                    );
                }
                if xs.len() < 2 {
                    return Err(err("table needs at least two samples".into()));
                }
                if !xs.windows(2).all(|w| w[1] > w[0]) {
                    return Err(err("table abscissae must be strictly increasing".into()));
                }
                Func1::Spline(Arc::new(CubicSpline::new(xs, ys)))
            }
            other => return Err(err(format!("unknown form `{other}` (poly | table)"))),
        };
        if mat == 'a' {
            field.set_a(row, col, func);
        } else {
            field.set_b(row, col, func);
        }
    }
    Ok(field)
}

fn parse_entry(entry: &str) -> Option<(char, usize, usize)> {
    let bytes = entry.as_bytes();
    if bytes.len() != 3 {
        return None;
    }
    let mat = bytes[0] as char;
    if mat != 'a' && mat != 'b' {
        return None;
    }
    let row = (bytes[1] as char).to_digit(10)? as usize;
    let col = (bytes[2] as char).to_digit(10)? as usize;
    if !(1..=2).contains(&row) || !(1..=2).contains(&col) {
        return None;
    }
    Some((mat, row - 1, col - 1))
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for b in bytes {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# basic forward run
speeds.lambda = 1.0
speeds.mu = 2.0
domain.X = 2.0
domain.T = 2.0
grid.h = 0.0625
coeff.a12.poly = 0.0 0.5
coeff.b11.table = 0:0.0 1:0.3 2:0.1
pert.b22.poly = 1.0
experiment.epsilon = 0.05
experiment.tau = 2.0
";

    #[test]
    fn parses_sample_config() {
        let cfg = RunConfig::parse(SAMPLE).unwrap();
        assert_eq!(cfg.speeds.mu(), 2.0);
        assert!((cfg.coeffs.a(0, 1, 1.0) - 0.5).abs() < 1e-14);
        assert!((cfg.coeffs.b(0, 0, 1.0) - 0.3).abs() < 1e-12);
        assert!(cfg.perturbation.is_some());
        assert_eq!(cfg.prior, PriorKind::None);
        assert_eq!(cfg.hash(), fnv1a64(SAMPLE.as_bytes()));
    }

    #[test]
    fn reports_line_numbers_on_errors() {
        let bad = "speeds.lambda = 1.0\nspeeds.mu == 2.0\n";
        match RunConfig::parse(bad) {
            Err(TwoSpeedError::Config { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected config error, got {other:?}"),
        }
        let bad = "speeds.lambda = 1.0\nspeeds.mu = 2.0\ndomain.X = 1.0\ndomain.T = 2.0\ngrid.h = 0.1\n";
        assert!(matches!(
            RunConfig::parse(bad),
            Err(TwoSpeedError::Config { .. })
        ));
    }

    #[test]
    fn rejects_unknown_keys_and_entries() {
        assert!(RunConfig::parse("bogus.key = 1\n").is_err());
        let bad = format!("{SAMPLE}coeff.c13.poly = 1.0\n");
        assert!(RunConfig::parse(&bad).is_err());
    }
}
