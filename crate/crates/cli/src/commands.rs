use std::fs::File;
use std::io::{self, BufWriter, Write};

use serde::Serialize;
use serde_json::json;

use rh_core::exact::{classify_negative, classify_positive, special_solution};
use rh_core::expr::CoefficientFn;
use rh_core::harvest::{
    classify_at_critical, find_critical_k, separation_integral, CriticalPolicy, CriticalSearch, ParticularSolution,
};
use rh_core::ivp::{fmt17, integrate_ivp, HarvestRhs, IvpOptions};
use rh_core::periodic::{floquet_integral, PeriodicProblem};
use rh_core::quad::ImproperPolicy;
use rh_core::Coef64;

use crate::{reproduce, Command, Failure, Flags, Format};

pub const DEFAULT_HORIZON: f64 = 200.0;

pub fn run(command: Command, flags: &Flags) -> Result<(), Failure> {
    match command {
        Command::Solve => solve(flags),
        Command::Classify => classify(flags),
        Command::CriticalK => critical_k(flags),
        Command::SeparationTest => separation_test(flags),
        Command::SpecialSolution => special(flags),
        Command::Periodic => periodic(flags),
        Command::ReproducePaper => reproduce::run(flags),
    }
}

/// `RH_DEFAULT_HORIZON`, else 200.
pub fn default_horizon() -> Result<f64, Failure> {
    match std::env::var("RH_DEFAULT_HORIZON") {
        Ok(v) => positive("RH_DEFAULT_HORIZON", v.trim().parse().map_err(|_| {
            Failure::Usage(format!("RH_DEFAULT_HORIZON must be a number, got {v:?}"))
        })?),
        Err(_) => Ok(DEFAULT_HORIZON),
    }
}

pub fn horizon(flags: &Flags) -> Result<f64, Failure> {
    match flags.horizon {
        Some(h) => positive("--horizon", h),
        None => default_horizon(),
    }
}

pub fn positive(name: &str, v: f64) -> Result<f64, Failure> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Failure::Usage(format!("{name} must be positive, got {v}")))
    }
}

fn finite(name: &str, v: f64) -> Result<f64, Failure> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Failure::Usage(format!("{name} must be finite, got {v}")))
    }
}

pub fn coef(src: &str) -> Result<Coef64, Failure> {
    Ok(CoefficientFn::parse(src).map_err(|e| Failure::Usage(format!("cannot parse {src:?}: {e}")))?.shared())
}

fn required<'a, T>(v: &'a Option<T>, name: &str) -> Result<&'a T, Failure> {
    v.as_ref().ok_or_else(|| Failure::Usage(format!("{name} is required")))
}

fn required_coef(v: &Option<String>, name: &str) -> Result<Coef64, Failure> {
    coef(required(v, name)?)
}

fn optional_coef(v: &Option<String>, default: &str) -> Result<Coef64, Failure> {
    coef(v.as_deref().unwrap_or(default))
}

fn ivp_options(flags: &Flags) -> Result<IvpOptions<f64>, Failure> {
    Ok(match flags.tol {
        Some(t) => {
            let t = positive("--tol", t)?;
            IvpOptions::tolerances(t, t * 1e-2)
        }
        None => IvpOptions::default(),
    })
}

fn improper_policy(flags: &Flags) -> Result<ImproperPolicy<f64>, Failure> {
    let mut policy = ImproperPolicy::default();
    if let Some(t) = flags.tol {
        policy.rel_tol = positive("--tol", t)?;
    }
    Ok(policy)
}

pub fn sink(flags: &Flags) -> Result<Box<dyn Write>, Failure> {
    Ok(match &flags.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit_json<S: Serialize>(flags: &Flags, value: &S) -> Result<(), Failure> {
    let mut w = sink(flags)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn uniform(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| t0 + (t1 - t0) * i as f64 / n as f64).collect()
}

fn solve(flags: &Flags) -> Result<(), Failure> {
    let a = required_coef(&flags.a, "--a")?;
    let gamma = optional_coef(&flags.gamma, "0")?;
    let b = optional_coef(&flags.b, "1")?;
    let k = finite("--k", flags.k.unwrap_or(0.0))?;
    let z0 = finite("--z0", *required(&flags.z0, "--z0")?)?;
    let t_end = match flags.t_end {
        Some(t) => positive("--t-end", t)?,
        None => horizon(flags)?,
    };
    let rhs = HarvestRhs::new(a, gamma, k).with_b(b);
    let tr = integrate_ivp(&rhs, z0, 0.0, t_end, &ivp_options(flags)?)?;
    let mut w = sink(flags)?;
    match flags.format.unwrap_or(Format::Csv) {
        Format::Json => serde_json::to_writer_pretty(&mut w, &tr)?,
        Format::Csv if tr.completed() => {
            let n = flags.samples.unwrap_or(1000).max(1);
            tr.write_csv_sampled(&mut w, &uniform(0.0, t_end, n))?
        }
        Format::Csv => tr.write_csv(&mut w)?,
    }
    w.flush()?;
    if let Some(t) = tr.blowdown_time() {
        return Err(Failure::BlowDown(t));
    }
    if !tr.completed() {
        return Err(Failure::Runtime(format!("integration stopped early at t = {}", tr.t_end())));
    }
    Ok(())
}

fn classify(flags: &Flags) -> Result<(), Failure> {
    let a = required_coef(&flags.a, "--a")?;
    let mut policy = CriticalPolicy::<f64>::default();
    policy.classify.improper = improper_policy(flags)?;
    if let Some(h) = flags.horizon {
        policy.horizon = positive("--horizon", h)?;
    }
    if let Some(p_src) = &flags.p {
        let gamma = required_coef(&flags.gamma, "--gamma")?;
        let k = finite("--k", *required(&flags.k, "--k")?)?;
        let p = ParticularSolution::closed(coef(p_src)?);
        let r = classify_at_critical(a, gamma, k, &p, &policy)?;
        return emit_json(flags, &r);
    }
    let b = optional_coef(&flags.b, "1")?;
    let z0 = finite("--z0", flags.z0.unwrap_or(1.0))?;
    let fate = if z0 > 0.0 {
        classify_positive(a, b, &policy.classify)?
    } else if z0 < 0.0 {
        classify_negative(a, b, z0, &policy.classify)?
    } else {
        return emit_json(flags, &json!({ "kind": "Trivial", "z0": 0.0 }));
    };
    emit_json(flags, &fate)
}

fn critical_k(flags: &Flags) -> Result<(), Failure> {
    let a = required_coef(&flags.a, "--a")?;
    let gamma = required_coef(&flags.gamma, "--gamma")?;
    let k_lo = finite("--k-lo", *required(&flags.k_lo, "--k-lo")?)?;
    let k_hi = finite("--k-hi", *required(&flags.k_hi, "--k-hi")?)?;
    let tol = positive("--tol", flags.tol.unwrap_or(1e-3))?;
    let report = find_critical_k(a, gamma, k_lo, k_hi, tol, horizon(flags)?, &CriticalSearch::default())?;
    eprintln!("{}", report.caveat);
    emit_json(flags, &report)
}

fn separation_test(flags: &Flags) -> Result<(), Failure> {
    let a = required_coef(&flags.a, "--a")?;
    let policy = improper_policy(flags)?;
    if let Some(p_src) = &flags.p {
        let p = ParticularSolution::closed(coef(p_src)?);
        if let (Some(gamma), Some(k)) = (&flags.gamma, flags.k) {
            p.verify(&a, &coef(gamma)?, k)?;
        }
        let v = separation_integral(a, &p, &policy)?;
        return emit_json(flags, &v);
    }
    // without p, test the periodic solution at the turning point
    let gamma = required_coef(&flags.gamma, "--gamma or --p")?;
    let period = positive("--period", *required(&flags.period, "--p or --period")?)?;
    let problem = PeriodicProblem::new(a.clone(), gamma, period)?;
    let tp = problem.turning_point(1e-9, None, &problem.default_scan()?)?;
    let v = separation_integral(a, &tp.solution.particular(), &policy)?;
    emit_json(flags, &json!({ "k_bar": tp.k_bar, "p0": tp.solution.z0, "verdict": v }))
}

fn special(flags: &Flags) -> Result<(), Failure> {
    let a = required_coef(&flags.a, "--a")?;
    let b = optional_coef(&flags.b, "1")?;
    let h = match flags.t_end {
        Some(t) => positive("--t-end", t)?,
        None => horizon(flags)?,
    };
    let sol = special_solution(a, b, h, &improper_policy(flags)?)?;
    let n = flags.samples.unwrap_or(200).max(1);
    match flags.format.unwrap_or(Format::Csv) {
        Format::Json => emit_json(flags, &sol.summary(n)?),
        Format::Csv => {
            eprintln!("z(0) = {}", fmt17(sol.eval(0.0)?));
            let mut w = sink(flags)?;
            writeln!(w, "t,z")?;
            for t in uniform(0.0, h, n) {
                writeln!(w, "{},{}", fmt17(t), fmt17(sol.eval(t)?))?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

fn periodic(flags: &Flags) -> Result<(), Failure> {
    let a = required_coef(&flags.a, "--a")?;
    let gamma = required_coef(&flags.gamma, "--gamma")?;
    let period = positive("--period", *required(&flags.period, "--period")?)?;
    let mut problem = PeriodicProblem::new(a.clone(), gamma, period)?;
    if let Some(t) = flags.tol {
        let t = positive("--tol", t)?;
        problem.ivp = IvpOptions::tolerances(t, t * 1e-1);
    }
    let scan = problem.default_scan()?;
    if let Some(k) = flags.k {
        let fp = problem.fixed_points(finite("--k", k)?, &scan)?;
        let solutions = fp
            .solutions
            .iter()
            .map(|s| Ok(json!({ "z0": s.z0, "residual": s.residual, "near_fold": s.near_fold, "floquet_integral": floquet_integral(&a, s)? })))
            .collect::<Result<Vec<_>, Failure>>()?;
        for w in &fp.warnings {
            eprintln!("warning: {w}");
        }
        return emit_json(flags, &json!({ "k": fp.k, "period": period, "solutions": solutions, "near_fold": fp.near_fold }));
    }
    let k_lo = finite("--k-lo", flags.k_lo.unwrap_or(0.0))?;
    let k_hi = finite("--k-hi", flags.k_hi.unwrap_or(1.5))?;
    let step = positive("--k-step", flags.k_step.unwrap_or(0.05))?;
    if k_lo >= k_hi {
        return Err(Failure::Usage(format!("need --k-lo < --k-hi, got {k_lo} and {k_hi}")));
    }
    let n = ((k_hi - k_lo) / step).round().max(1.0) as usize;
    let d = problem.branch_diagram(&uniform(k_lo, k_hi, n), &scan, 1e-6)?;
    for w in &d.warnings {
        eprintln!("warning: {w}");
    }
    match flags.format.unwrap_or(Format::Csv) {
        Format::Json => emit_json(flags, &d),
        Format::Csv => {
            if let Some((kb, z)) = d.turning_point {
                eprintln!("{}", json!({ "turning_point": { "k_bar": kb, "z0": z } }));
            }
            let mut w = sink(flags)?;
            d.write_csv(&mut w)?;
            w.flush()?;
            Ok(())
        }
    }
}
