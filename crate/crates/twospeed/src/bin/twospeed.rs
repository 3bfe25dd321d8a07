//! Batch front end: forward simulation, slow-wave filtering, Born inversion,
//! stability experiments, refinement studies and the acceptance self-test.
//!
//! Usage: twospeed <command> --config <path> [--out <dir>] [--refine <k>]
//! Commands: forward | slowwave | invert | stability | convergence | selftest
//! Exit codes: 0 success, 1 input error, 2 solver non-convergence.
//! TWOSPEED_THREADS=1 disables the per-column solver parallelism.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use twospeed::acceptance;
use twospeed::config::{PriorKind, RunConfig};
use twospeed::error::TwoSpeedError;
use twospeed::forward::{forward_response, forward_solve, perturbed_coefficients};
use twospeed::inversion::{born_invert, stability_ratio, Prior};
use twospeed::numerics::Func1;
use twospeed::output::{self, Header};
use twospeed::slowwave::{solve_filter, verify_slow_support};

struct Args {
    command: String,
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    refine: Option<usize>,
}

fn usage() -> String {
    "usage: twospeed <forward|slowwave|invert|stability|convergence|selftest> \
     --config <path> [--out <dir>] [--refine <k>]"
        .into()
}

fn parse_args() -> Result<Args, String> {
    let mut argv = std::env::args().skip(1);
    let command = argv.next().ok_or_else(usage)?;
    let mut args = Args {
        command,
        config: None,
        out: None,
        refine: None,
    };
    while let Some(flag) = argv.next() {
        match flag.as_str() {
            "--config" => {
                args.config = Some(PathBuf::from(
                    argv.next().ok_or("--config needs a path")?,
                ))
            }
            "--out" => args.out = Some(PathBuf::from(argv.next().ok_or("--out needs a dir")?)),
            "--refine" => {
                let v = argv.next().ok_or("--refine needs a level count")?;
                args.refine = Some(v.parse().map_err(|_| format!("bad level count `{v}`"))?)
            }
            other => return Err(format!("unknown argument `{other}`\n{}", usage())),
        }
    }
    Ok(args)
}

fn write_file(dir: &Path, name: &str, content: &str) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, content)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn header(cfg: &RunConfig) -> Header {
    Header {
        config_hash: cfg.hash(),
        lambda: cfg.speeds.lambda(),
        mu: cfg.speeds.mu(),
        t_horizon: cfg.t_horizon,
        h: cfg.h,
    }
}

fn require_perturbation(cfg: &RunConfig) -> Result<&twospeed::model::CoefficientField, TwoSpeedError> {
    cfg.perturbation.as_ref().ok_or_else(|| TwoSpeedError::Config {
        line: 0,
        msg: "this command needs at least one pert.* entry".into(),
    })
}

fn run(args: &Args, cfg: &RunConfig, out_dir: &Path) -> Result<(), TwoSpeedError> {
    match args.command.as_str() {
        "forward" => {
            let trace = forward_response(&cfg.coeffs, cfg.speeds, cfg.t_horizon, cfg.h)?;
            write_file(out_dir, "trace.csv", &output::trace_csv(&trace, &header(cfg)))?;
        }
        "slowwave" => {
            let sol = forward_solve(&cfg.coeffs, cfg.speeds, cfg.t_horizon, cfg.h)?;
            let filter = solve_filter(&sol.u.field, &sol.ubar.field, cfg.tau)?;
            let report = verify_slow_support(&filter, &sol.u.field, &sol.ubar.field)?;
            write_file(
                out_dir,
                "filter.csv",
                &output::filter_csv(&filter, &report, &header(cfg)),
            )?;
        }
        "invert" => {
            let pert = require_perturbation(cfg)?;
            let base = forward_response(&cfg.coeffs, cfg.speeds, cfg.t_horizon, cfg.h)?;
            let shifted = perturbed_coefficients(&cfg.coeffs, pert, cfg.epsilon);
            let perturbed = forward_response(&shifted, cfg.speeds, cfg.t_horizon, cfg.h)?;
            let diff = perturbed.sub(&base)?;
            let eps = cfg.epsilon;
            let prior = match cfg.prior {
                PriorKind::None => Prior::None,
                PriorKind::DaKnown => {
                    let scaled = |f: &Func1| {
                        let (v, d) = (f.clone(), f.clone());
                        Func1::closure_with_deriv(
                            move |x| eps * v.eval(x),
                            move |x| eps * d.deriv(x),
                        )
                    };
                    Prior::DeltaAKnown {
                        da12: scaled(pert.a_entry(0, 1)),
                        da21: scaled(pert.a_entry(1, 0)),
                    }
                }
                PriorKind::OffdiagDbKnown => {
                    let scaled = |f: &Func1| {
                        let v = f.clone();
                        Func1::closure(move |x| eps * v.eval(x))
                    };
                    Prior::OffDiagDeltaBKnown {
                        db12: scaled(pert.b_entry(0, 1)),
                        db21: scaled(pert.b_entry(1, 0)),
                    }
                }
            };
            let est = born_invert(&diff, &prior)?;
            write_file(
                out_dir,
                "reconstruction.csv",
                &output::reconstruction_csv(&est, &header(cfg)),
            )?;
        }
        "stability" => {
            let pert = require_perturbation(cfg)?;
            let mut rows = String::new();
            for (k, &eps) in cfg.epsilons.iter().enumerate() {
                let tilde = perturbed_coefficients(&cfg.coeffs, pert, eps);
                let report =
                    stability_ratio(&cfg.coeffs, &tilde, cfg.speeds, cfg.x_domain, cfg.h)?;
                let name = if cfg.epsilons.len() == 1 {
                    "stability.csv".to_string()
                } else {
                    format!("stability_{k}.csv")
                };
                write_file(out_dir, &name, &output::stability_csv(&report, &header(cfg)))?;
                rows.push_str(&format!(
                    "eps = {} ratio_sup = {}\n",
                    output::fmt(eps),
                    output::fmt(report.ratio_sup)
                ));
            }
            print!("{rows}");
        }
        "convergence" => {
            let levels = args.refine.unwrap_or(cfg.refine).max(2);
            let mut traces = Vec::new();
            for level in 0..levels {
                let h = cfg.h / (1 << level) as f64;
                traces.push((h, forward_response(&cfg.coeffs, cfg.speeds, cfg.t_horizon, h)?));
            }
            let mut rows = Vec::new();
            for level in 0..levels - 1 {
                // compare on the shared coarse sample times
                let (hc, coarse) = &traces[level];
                let (_, fine) = &traces[level + 1];
                let stride = 2;
                let mut diff: f64 = 0.0;
                for j in 0..coarse.len() {
                    for row in 0..2 {
                        for col in 0..2 {
                            diff = diff
                                .max((coarse.r[j][row][col] - fine.r[j * stride][row][col]).abs());
                        }
                    }
                }
                rows.push((level, *hc, diff, f64::NAN));
            }
            for k in 0..rows.len().saturating_sub(1) {
                rows[k].3 = (rows[k].2 / rows[k + 1].2).log2();
            }
            write_file(
                out_dir,
                "convergence.csv",
                &output::convergence_csv(&rows, &header(cfg)),
            )?;
        }
        "selftest" => {
            let verdicts = acceptance::run_all();
            let mut all = true;
            for v in &verdicts {
                println!("{}", v.line());
                all &= v.pass;
            }
            if !all {
                return Err(TwoSpeedError::Domain("selftest failed".into()));
            }
        }
        other => {
            return Err(TwoSpeedError::Config {
                line: 0,
                msg: format!("unknown command `{other}`\n{}", usage()),
            })
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = match parse_args() {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("{msg}");
            return ExitCode::from(1);
        }
    };

    let cfg = if args.command == "selftest" && args.config.is_none() {
        None
    } else {
        let path = match &args.config {
            Some(p) => p,
            None => {
                eprintln!("missing --config <path>\n{}", usage());
                return ExitCode::from(1);
            }
        };
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("cannot read {}: {e}", path.display());
                return ExitCode::from(1);
            }
        };
        match RunConfig::parse(&text) {
            Ok(c) => Some(c),
            Err(e) => {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
        }
    };

    // selftest without a config runs the pinned suite directly
    let cfg = cfg.unwrap_or_else(|| {
        RunConfig::parse(
            "speeds.lambda = 1.0\nspeeds.mu = 2.0\ndomain.X = 2.0\ndomain.T = 2.0\ngrid.h = 0.0625\n",
        )
        .expect("builtin config")
    });

    let out_dir = args
        .out
        .clone()
        .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));

    match run(&args, &cfg, &out_dir) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ TwoSpeedError::NonConvergence { .. }) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
    }
}
