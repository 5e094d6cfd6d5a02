use std::io::Write;

use serde::Serialize;

use rh_core::harvest::{
    classify_at_critical, fate_of_initial, find_critical_k, separation_integral, CriticalPolicy, CriticalSearch,
    ParticularSolution,
};
use rh_core::ivp::IvpOptions;

use crate::commands::{coef, horizon, positive, sink};
use crate::{Failure, Flags, Format};

const DECAYING_GAMMA: &str = "1/4 - 2/(t+5)^2";
const DECAYING_P: &str = "1/2 + 2/(t+5)";

pub const ROW_IDS: [&str; 6] = ["kbar-constant", "kbar-decaying", "I", "v0", "p1", "fate"];

#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub id: &'static str,
    pub quantity: &'static str,
    pub expected: String,
    pub computed: String,
    pub delta: Option<f64>,
    pub tol: Option<f64>,
    pub pass: bool,
}

fn numeric(id: &'static str, quantity: &'static str, expected: f64, computed: f64, tol: f64) -> Row {
    let delta = (computed - expected).abs();
    Row {
        id,
        quantity,
        expected: format!("{expected:.10}"),
        computed: format!("{computed:.10}"),
        delta: Some(delta),
        tol: Some(tol),
        pass: delta <= tol,
    }
}

struct Ctx {
    tol: Option<f64>,
    horizon: f64,
    classified: Option<rh_core::harvest::CriticalClassification<f64>>,
}

impl Ctx {
    fn tol(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }

    fn decaying_case(&mut self) -> Result<&rh_core::harvest::CriticalClassification<f64>, Failure> {
        if self.classified.is_none() {
            let p = ParticularSolution::closed(coef(DECAYING_P)?);
            let r = classify_at_critical(coef("1")?, coef(DECAYING_GAMMA)?, 1.0, &p, &CriticalPolicy::default())?;
            self.classified = Some(r);
        }
        Ok(self.classified.as_ref().expect("just set"))
    }
}

fn compute(id: &str, ctx: &mut Ctx) -> Result<Row, Failure> {
    Ok(match id {
        "kbar-constant" => {
            let r = find_critical_k(coef("1")?, coef("1/4")?, 0.1, 4.0, 1e-2, ctx.horizon, &CriticalSearch::default())?;
            numeric("kbar-constant", "critical k, a = 1, gamma = 1/4", 1.0, r.k_bar, ctx.tol(2e-2))
        }
        "kbar-decaying" => {
            let r = find_critical_k(coef("1")?, coef(DECAYING_GAMMA)?, 0.1, 4.0, 1e-2, ctx.horizon, &CriticalSearch::default())?;
            numeric("kbar-decaying", "critical k, gamma = 1/4 - 2/(t+5)^2", 1.0, r.k_bar, ctx.tol(2e-2))
        }
        "I" => {
            let p = ParticularSolution::closed(coef(DECAYING_P)?);
            let v = separation_integral(coef("1")?, &p, &Default::default())?;
            match v.value.filter(|_| v.is_convergent()) {
                Some(i) => numeric("I", "int_0^inf exp(int (a - 2p))", 5.0 / 3.0, i, ctx.tol(1e-6)),
                None => Row {
                    id: "I",
                    quantity: "int_0^inf exp(int (a - 2p))",
                    expected: "5/3".into(),
                    computed: v.kind.as_str().into(),
                    delta: None,
                    tol: None,
                    pass: false,
                },
            }
        }
        "v0" => {
            let tol = ctx.tol(1e-8);
            let v0 = ctx.decaying_case()?.v_at_zero.unwrap_or(f64::NAN);
            numeric("v0", "v(0) of the special solution", -0.6, v0, tol)
        }
        "p1" => {
            let tol = ctx.tol(1e-8);
            let p1 = ctx.decaying_case()?.p1_at_zero.unwrap_or(f64::NAN);
            numeric("p1", "p1(0), second bounded solution", 0.3, p1, tol)
        }
        "fate" => {
            let (a, gamma) = (coef("1")?, coef(DECAYING_GAMMA)?);
            let p = coef(DECAYING_P)?;
            let opts = IvpOptions::default();
            let above = fate_of_initial(a.clone(), gamma.clone(), 1.0, 0.30, 100.0, Some(p.as_ref()), &opts)?;
            let below = fate_of_initial(a, gamma, 1.0, 0.29, 100.0, None, &opts)?;
            let pass = above.label() == "completed" && below.blowdown_time().is_some();
            let gap = above.final_gap().map(|g| format!(", |z - p|(100) = {g:.6}")).unwrap_or_default();
            let t = below.blowdown_time().map(|t| format!(" at t = {t:.4}")).unwrap_or_default();
            Row {
                id: "fate",
                quantity: "fate split at k = 1, z0 = 0.30 vs 0.29",
                expected: "0.30 completes, 0.29 blows down".into(),
                computed: format!("0.30 {}{gap}; 0.29 {}{t}", above.label(), below.label()),
                delta: None,
                tol: None,
                pass,
            }
        }
        other => return Err(Failure::Usage(format!("unknown row {other:?}; known rows: {}", ROW_IDS.join(", ")))),
    })
}

pub fn rows(flags: &Flags) -> Result<Vec<Row>, Failure> {
    let ids: Vec<String> = match &flags.rows {
        Some(list) => list.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
        None => ROW_IDS.iter().map(|s| s.to_string()).collect(),
    };
    if let Some(bad) = ids.iter().find(|id| !ROW_IDS.contains(&id.as_str())) {
        return Err(Failure::Usage(format!("unknown row {bad:?}; known rows: {}", ROW_IDS.join(", "))));
    }
    let mut ctx = Ctx {
        tol: flags.tol.map(|t| positive("--tol", t)).transpose()?,
        horizon: horizon(flags)?,
        classified: None,
    };
    ids.iter().map(|id| compute(id, &mut ctx)).collect()
}

pub fn run(flags: &Flags) -> Result<(), Failure> {
    let rows = rows(flags)?;
    let mut w = sink(flags)?;
    match flags.format {
        Some(Format::Json) => {
            serde_json::to_writer_pretty(&mut w, &rows)?;
            writeln!(w)?;
        }
        _ => {
            writeln!(w, "{:<14} {:<42} {:<34} {:<60} {:>10}  result", "row", "quantity", "expected", "computed", "|delta|")?;
            for r in &rows {
                let delta = r.delta.map(|d| format!("{d:.3e}")).unwrap_or_else(|| "-".into());
                let verdict = if r.pass { "pass" } else { "FAIL" };
                writeln!(w, "{:<14} {:<42} {:<34} {:<60} {:>10}  {verdict}", r.id, r.quantity, r.expected, r.computed, delta)?;
            }
        }
    }
    w.flush()?;
    let failed: Vec<&str> = rows.iter().filter(|r| !r.pass).map(|r| r.id).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Reproduction(format!("rows failed: {}", failed.join(", "))))
    }
}
