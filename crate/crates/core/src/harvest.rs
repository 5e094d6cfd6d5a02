//! The harvested logistic equation `z' = a(t) z - z^2 - k gamma(t)`.
//!
//! If `p` is any solution, `v = z - p` solves the Bernoulli equation
//! `v' = (a - 2p) v - v^2`, so everything about solutions near `p` reduces to
//! the [`exact`](crate::exact) machinery with coefficient `a - 2p` and
//! `b = 1`. In particular solutions above `p` are separated from it iff
//! `I = int_0^inf exp(int_0^t (a - 2p))` diverges.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::coefficient::{constant, Coef, Coefficient};
use crate::error::{Error, Result};
use crate::exact::{
    check_eventually_nonpositive, check_tends_to_zero, exact_solution, j_integral, j_integral_with_kernel,
    special_solution, ClassifyPolicy, ExactSolution, GrowthKernel, HypothesisCheck,
};
use crate::expr::bounds_estimate;
use crate::ivp::{distance_to, fmt17, integrate_ivp, DistanceNorm, HarvestRhs, IvpOptions, Trajectory, TrajectoryStatus};
use crate::quad::{ImproperPolicy, IntegralVerdict, VerdictKind};
use crate::scalar::Real;

/// A known solution `p(t)` of the harvested equation.
#[derive(Clone)]
pub enum ParticularSolution<T: Real> {
    /// Closed form, defined for all `t >= 0`.
    Closed(Coef<T>),
    /// Numerical trajectory; defined up to its last time.
    Numeric(Trajectory<T>),
    /// One period of a periodic orbit, extended periodically.
    Periodic { trajectory: Trajectory<T>, period: T },
}

impl<T: Real> std::fmt::Debug for ParticularSolution<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Closed(c) => write!(f, "Closed({})", c.describe()),
            Self::Numeric(t) => write!(f, "Numeric(t <= {})", t.t_end()),
            Self::Periodic { period, .. } => write!(f, "Periodic(T = {period})"),
        }
    }
}

impl<T: Real> ParticularSolution<T> {
    pub fn closed(f: Coef<T>) -> Self {
        Self::Closed(f)
    }

    pub fn horizon(&self) -> T {
        match self {
            Self::Numeric(tr) => tr.t_end(),
            _ => T::infinity(),
        }
    }

    /// Checks the residual `|p' - (a p - p^2 - k gamma)| <= 1e-6 (1 + p^2)`
    /// (central differences, step `1e-5`) and positivity at sampled times.
    pub fn verify(&self, a: &Coef<T>, gamma: &Coef<T>, k: T) -> Result<()> {
        let h = T::lit(1e-5);
        let end = match self {
            Self::Periodic { period, .. } => *period,
            _ => self.horizon().min(T::lit(200.0)),
        };
        let n = 400;
        let rhs = HarvestRhs::new(a.clone(), gamma.clone(), k);
        let tol = T::tol(1e-6);
        for i in 0..n {
            let t = h + (end - h * T::lit(2.0)) * T::lit(i as f64) / T::lit((n - 1) as f64);
            let p = self.eval(t)?;
            if !(p > T::zero()) {
                return Err(Error::ParticularSolution { t: t.as_f64(), reason: format!("p = {p} is not positive") });
            }
            let dp = (self.eval(t + h)? - self.eval(t - h)?) / (h * T::lit(2.0));
            let residual = (dp - crate::ivp::Rhs::eval(&rhs, t, p)?).abs();
            if residual > tol * (T::one() + p * p) {
                return Err(Error::ParticularSolution {
                    t: t.as_f64(),
                    reason: format!("residual {residual:e} exceeds {}", tol * (T::one() + p * p)),
                });
            }
        }
        Ok(())
    }
}

impl<T: Real> Coefficient<T> for ParticularSolution<T> {
    fn eval(&self, t: T) -> Result<T> {
        match self {
            Self::Closed(f) => f.eval(t),
            Self::Numeric(tr) => tr.dense(t),
            Self::Periodic { trajectory, period } => {
                let s = t - (t / *period).floor() * *period;
                trajectory.dense(s.max(T::zero()).min(*period))
            }
        }
    }

    fn constant_value(&self) -> Option<T> {
        match self {
            Self::Closed(f) => f.constant_value(),
            _ => None,
        }
    }

    fn describe(&self) -> String {
        format!("{self:?}")
    }
}

/// `a(t) - 2 p(t)`.
pub struct ShiftedCoefficient<T: Real> {
    a: Coef<T>,
    p: ParticularSolution<T>,
}

impl<T: Real> Coefficient<T> for ShiftedCoefficient<T> {
    fn eval(&self, t: T) -> Result<T> {
        Ok(self.a.eval(t)? - T::lit(2.0) * self.p.eval(t)?)
    }

    fn constant_value(&self) -> Option<T> {
        Some(self.a.constant_value()? - T::lit(2.0) * self.p.constant_value()?)
    }

    fn describe(&self) -> String {
        format!("({}) - 2 p(t)", self.a.describe())
    }
}

/// Coefficient of the `v = z - p` equation `v' = (a - 2p) v - v^2`.
pub fn shift_by_particular<T: Real>(a: Coef<T>, p: &ParticularSolution<T>) -> Coef<T> {
    Arc::new(ShiftedCoefficient { a, p: p.clone() })
}

/// A solution written as `p + v`.
#[derive(Clone, Debug)]
pub struct ShiftedSolution<T: Real> {
    pub p: ParticularSolution<T>,
    pub v: ExactSolution<T>,
}

impl<T: Real> ShiftedSolution<T> {
    pub fn eval(&self, t: T) -> Result<T> {
        Ok(self.p.eval(t)? + self.v.eval(t)?)
    }

    pub fn samples(&self, end: T, n: usize) -> Result<Vec<(T, T)>> {
        let n = n.max(2);
        (0..n)
            .map(|i| {
                let t = end * T::lit(i as f64) / T::lit((n - 1) as f64);
                Ok((t, self.eval(t)?))
            })
            .collect()
    }
}

impl<T: Real> Coefficient<T> for ShiftedSolution<T> {
    fn eval(&self, t: T) -> Result<T> {
        ShiftedSolution::eval(self, t)
    }
}

fn policy_for<T: Real>(p: &ParticularSolution<T>, policy: &ImproperPolicy<T>) -> ImproperPolicy<T> {
    let h = p.horizon();
    if h.is_finite() && h < policy.t_max {
        // keep at least five doublings inside the trajectory's range
        let t_max = h;
        let t_init = policy.t_init.min(t_max / T::lit(32.0));
        ImproperPolicy { t_init, t_max, ..*policy }
    } else {
        *policy
    }
}

/// `I = int_0^inf exp(int_0^t (a - 2p))`. Divergent means every solution above
/// `p` is separated from it.
pub fn separation_integral<T: Real>(
    a: Coef<T>,
    p: &ParticularSolution<T>,
    policy: &ImproperPolicy<T>,
) -> Result<IntegralVerdict<T>> {
    shifted_integral(shift_by_particular(a, p), p, policy)
}

// With a periodic p the shifted coefficient is assumed to share its period.
fn shifted_integral<T: Real>(
    shifted: Coef<T>,
    p: &ParticularSolution<T>,
    policy: &ImproperPolicy<T>,
) -> Result<IntegralVerdict<T>> {
    match p {
        ParticularSolution::Periodic { trajectory, period } => {
            let kernel = GrowthKernel::periodic(shifted, *period, &trajectory.times)?;
            j_integral_with_kernel(kernel, constant(T::one()), policy)
        }
        _ => j_integral(shifted, constant(T::one()), &policy_for(p, policy)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CriticalCase {
    /// `I = inf`: solutions above `p` are bounded and separated from `p`;
    /// solutions below blow down.
    Case1AllAboveSeparated,
    /// `I < inf` with the decay hypotheses on `a - 2p`: `p1 = p + v` is a
    /// second bounded solution, separated from and tending to `p`.
    Case2ConvergentWithP1,
    /// `I < inf` but the decay hypotheses fail; `p1` is still built and is
    /// separated from `p`, with no convergence claim.
    Case2HypothesesUnmet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalPolicy<T> {
    pub classify: ClassifyPolicy<T>,
    /// Range on which `p1` (or the case-1 witness) is tabulated and checked.
    pub horizon: T,
    pub positivity_samples: usize,
}

impl<T: Real> Default for CriticalPolicy<T> {
    fn default() -> Self {
        Self { classify: ClassifyPolicy::default(), horizon: T::lit(200.0), positivity_samples: 2001 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalClassification<T: Real> {
    pub case: CriticalCase,
    pub i_verdict: IntegralVerdict<T>,
    pub p0: T,
    /// `p(0) - 1/I` from the verdict value.
    pub p1_initial: Option<T>,
    /// `p1(0)` as evaluated from the constructed solution.
    pub p1_at_zero: Option<T>,
    pub v_at_zero: Option<T>,
    pub p1_positive: Option<bool>,
    pub hypotheses: Vec<HypothesisCheck<T>>,
    pub p1_samples: Vec<(T, T)>,
    pub witness_samples: Vec<(T, T)>,
    #[serde(skip)]
    pub p1: Option<ShiftedSolution<T>>,
    /// Case 1: the solution with `z(0) = p(0) + 1`, separated from `p`.
    #[serde(skip)]
    pub witness: Option<ShiftedSolution<T>>,
}

/// Classification at the critical harvesting level, given a bounded positive
/// solution `p` there.
pub fn classify_at_critical<T: Real>(
    a: Coef<T>,
    gamma: Coef<T>,
    k_bar: T,
    p: &ParticularSolution<T>,
    policy: &CriticalPolicy<T>,
) -> Result<CriticalClassification<T>> {
    p.verify(&a, &gamma, k_bar)?;
    let shifted = shift_by_particular(a, p);
    let improper = policy_for(p, &policy.classify.improper);
    let i_verdict = shifted_integral(shifted.clone(), p, &policy.classify.improper)?;
    let p0 = p.eval(T::zero())?;
    let horizon = policy.horizon.min(p.horizon());
    let n_samples = 201;

    match i_verdict.kind {
        VerdictKind::Inconclusive => Err(Error::Inconclusive { horizon: i_verdict.last_horizon().as_f64() }),
        VerdictKind::Divergent => {
            let v = exact_solution(shifted, constant(T::one()), T::one(), horizon)?;
            let witness = ShiftedSolution { p: p.clone(), v };
            Ok(CriticalClassification {
                case: CriticalCase::Case1AllAboveSeparated,
                i_verdict,
                p0,
                p1_initial: None,
                p1_at_zero: None,
                v_at_zero: None,
                p1_positive: None,
                hypotheses: Vec::new(),
                p1_samples: Vec::new(),
                witness_samples: witness.samples(horizon, n_samples)?,
                p1: None,
                witness: Some(witness),
            })
        }
        VerdictKind::Convergent => {
            let i_value = i_verdict.value.expect("convergent verdict has a value");
            let v = special_solution(shifted.clone(), constant(T::one()), horizon, &improper)?;
            let p1 = ShiftedSolution { p: p.clone(), v };
            let v0 = p1.v.eval(T::zero())?;
            let hyp_horizon = policy.classify.hypothesis_horizon.min(p.horizon());
            let thr = policy.classify.hypothesis_threshold;
            let samples = policy.classify.hypothesis_samples;
            let h1 = check_eventually_nonpositive("a - 2p <= 0 for large t", shifted.as_ref(), hyp_horizon, thr, samples)?;
            let h2 = check_tends_to_zero("a - 2p -> 0", shifted.as_ref(), hyp_horizon, thr, samples)?;
            let met = h1.holds && h2.holds;
            let positive = bounds_estimate(&p1, T::zero(), horizon, policy.positivity_samples)?.lower > T::zero();
            Ok(CriticalClassification {
                case: if met { CriticalCase::Case2ConvergentWithP1 } else { CriticalCase::Case2HypothesesUnmet },
                i_verdict,
                p0,
                p1_initial: Some(p0 - i_value.recip()),
                p1_at_zero: Some(p0 + v0),
                v_at_zero: Some(v0),
                p1_positive: Some(positive),
                hypotheses: vec![h1, h2],
                p1_samples: p1.samples(horizon, n_samples)?,
                witness_samples: Vec::new(),
                p1: Some(p1),
                witness: None,
            })
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalReport<T: Real> {
    pub k_bar: T,
    /// `(feasible, infeasible)`.
    pub bracket: (T, T),
    pub horizon: T,
    /// Initial value of the dominating orbit, `sup a + 1`.
    pub z_start: T,
    pub evaluations: usize,
    pub caveat: String,
    /// The dominating orbit at the feasible end of the bracket.
    #[serde(skip)]
    pub witness: Trajectory<T>,
}

#[derive(Debug, Clone, Copy)]
pub struct CriticalSearch<T> {
    pub ivp: IvpOptions<T>,
    pub bounds_samples: usize,
}

impl<T: Real> Default for CriticalSearch<T> {
    fn default() -> Self {
        Self { ivp: IvpOptions::default(), bounds_samples: 2001 }
    }
}

struct Feasibility<'a, T: Real> {
    a: &'a Coef<T>,
    gamma: &'a Coef<T>,
    z_start: T,
    horizon: T,
    ivp: &'a IvpOptions<T>,
    evaluations: usize,
}

impl<T: Real> Feasibility<'_, T> {
    /// Integrates the dominating orbit; feasible iff it stays positive.
    fn run(&mut self, k: T) -> Result<(bool, Trajectory<T>)> {
        self.evaluations += 1;
        let rhs = HarvestRhs::new(self.a.clone(), self.gamma.clone(), k);
        let tr = integrate_ivp(&rhs, self.z_start, T::zero(), self.horizon, self.ivp)?;
        let feasible = tr.completed() && tr.min_value() > T::zero();
        Ok((feasible, tr))
    }
}

/// Bisection for the critical harvesting level on `[k_lo, k_hi]`.
///
/// `k` is feasible when the orbit from `sup a + 1` (which lies above every
/// bounded solution) stays positive on `[0, horizon]`. Near the fold escape
/// is slow, so a finite horizon biases the estimate upward.
pub fn find_critical_k<T: Real>(
    a: Coef<T>,
    gamma: Coef<T>,
    k_lo: T,
    k_hi: T,
    tol_k: T,
    horizon: T,
    search: &CriticalSearch<T>,
) -> Result<CriticalReport<T>> {
    if !(k_lo >= T::zero() && k_lo < k_hi && tol_k > T::zero() && horizon > T::zero()) {
        return Err(Error::invalid(format!(
            "need 0 <= k_lo < k_hi, tol_k > 0, horizon > 0 (got k_lo={k_lo}, k_hi={k_hi}, tol_k={tol_k}, horizon={horizon})"
        )));
    }
    let a_sup = bounds_estimate(a.as_ref(), T::zero(), horizon, search.bounds_samples)?.upper;
    let mut oracle = Feasibility {
        a: &a,
        gamma: &gamma,
        z_start: a_sup.max(T::zero()) + T::one(),
        horizon,
        ivp: &search.ivp,
        evaluations: 0,
    };
    let (ok_lo, mut witness) = oracle.run(k_lo)?;
    if !ok_lo {
        return Err(Error::InvalidBracket(format!("k_lo = {k_lo} is not feasible")));
    }
    let (ok_hi, _) = oracle.run(k_hi)?;
    if ok_hi {
        return Err(Error::InvalidBracket(format!("k_hi = {k_hi} is feasible")));
    }
    let (mut lo, mut hi) = (k_lo, k_hi);
    while hi - lo > tol_k {
        let mid = lo + (hi - lo) / T::lit(2.0);
        let (ok, tr) = oracle.run(mid)?;
        if ok {
            lo = mid;
            witness = tr;
        } else {
            hi = mid;
        }
    }
    // spot-check monotonicity below the final bracket
    for frac in [0.5, 0.9] {
        let k = lo * T::lit(frac);
        if k > k_lo && !oracle.run(k)?.0 {
            return Err(Error::NotMonotone(format!("k = {k} infeasible below feasible k = {lo}")));
        }
    }
    Ok(CriticalReport {
        k_bar: lo + (hi - lo) / T::lit(2.0),
        bracket: (lo, hi),
        horizon,
        z_start: oracle.z_start,
        evaluations: oracle.evaluations,
        caveat: format!(
            "feasibility is judged on [0, {horizon}]; slow escape near the fold biases k_bar upward"
        ),
        witness,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome")]
pub enum Outcome<T> {
    BlowDown { t_est: T },
    Completed { sup: T, inf: T, final_value: T, final_gap: Option<T> },
    StepUnderflow { t: T },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitialFate<T> {
    pub k: T,
    pub z0: T,
    pub horizon: T,
    pub outcome: Outcome<T>,
}

impl<T: Real> InitialFate<T> {
    pub fn label(&self) -> &'static str {
        match self.outcome {
            Outcome::BlowDown { .. } => "blow-down",
            Outcome::Completed { .. } => "completed",
            Outcome::StepUnderflow { .. } => "step-underflow",
        }
    }

    pub fn blowdown_time(&self) -> Option<T> {
        match self.outcome {
            Outcome::BlowDown { t_est } => Some(t_est),
            _ => None,
        }
    }

    pub fn final_gap(&self) -> Option<T> {
        match self.outcome {
            Outcome::Completed { final_gap, .. } => final_gap,
            _ => None,
        }
    }
}

/// Integrates from `z0` and reports how the trajectory ends.
pub fn fate_of_initial<T: Real>(
    a: Coef<T>,
    gamma: Coef<T>,
    k: T,
    z0: T,
    horizon: T,
    reference: Option<&dyn Coefficient<T>>,
    ivp: &IvpOptions<T>,
) -> Result<InitialFate<T>> {
    let rhs = HarvestRhs::new(a, gamma, k);
    let tr = integrate_ivp(&rhs, z0, T::zero(), horizon, ivp)?;
    let outcome = match tr.status {
        TrajectoryStatus::BlowDown { t_est } => Outcome::BlowDown { t_est },
        TrajectoryStatus::StepUnderflow { t } => Outcome::StepUnderflow { t },
        TrajectoryStatus::CompletedHorizon => Outcome::Completed {
            sup: tr.max_value(),
            inf: tr.min_value(),
            final_value: tr.final_value(),
            final_gap: reference.map(|r| distance_to(&tr, r, DistanceNorm::Final)).transpose()?,
        },
    };
    Ok(InitialFate { k, z0, horizon, outcome })
}

/// Fates over a `k x z0` grid, evaluated in parallel.
pub fn fate_sweep<T: Real>(
    a: Coef<T>,
    gamma: Coef<T>,
    ks: &[T],
    z0s: &[T],
    horizon: T,
    ivp: &IvpOptions<T>,
) -> Result<Vec<InitialFate<T>>> {
    let jobs: Vec<(T, T)> = ks.iter().flat_map(|&k| z0s.iter().map(move |&z| (k, z))).collect();
    jobs.par_iter()
        .map(|&(k, z0)| fate_of_initial(a.clone(), gamma.clone(), k, z0, horizon, None, ivp))
        .collect()
}

/// CSV `k,z0,fate,t_blowdown`.
pub fn write_sweep_csv<T: Real, W: Write>(rows: &[InitialFate<T>], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["k", "z0", "fate", "t_blowdown"])?;
    for r in rows {
        out.write_record([
            fmt17(r.k),
            fmt17(r.z0),
            r.label().to_string(),
            r.blowdown_time().map(fmt17).unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::CoefficientFn;

    fn c(src: &str) -> Coef<f64> {
        CoefficientFn::parse(src).unwrap().shared()
    }

    fn eq20_gamma() -> Coef<f64> {
        c("1/4 - 2/(t+5)^2")
    }

    #[test]
    fn shift_examples() {
        let s = shift_by_particular(c("1"), &ParticularSolution::closed(c("1/2")));
        assert_eq!(s.eval(3.0).unwrap(), 0.0);
        assert_eq!(s.constant_value(), Some(0.0));
        let s = shift_by_particular(c("1"), &ParticularSolution::closed(c("1/2 + 2/(t+5)")));
        for t in [0.0, 1.0, 95.0] {
            assert!((s.eval(t).unwrap() + 4.0 / (t + 5.0)).abs() < 1e-15);
        }
        let s = shift_by_particular(c("1"), &ParticularSolution::closed(c("1")));
        assert_eq!(s.eval(0.4).unwrap(), -1.0);
    }

    #[test]
    fn separation_examples() {
        let pol = ImproperPolicy::default();
        let v = separation_integral(c("1"), &ParticularSolution::closed(c("1/2")), &pol).unwrap();
        assert_eq!(v.kind, VerdictKind::Divergent);
        let v = separation_integral(c("1"), &ParticularSolution::closed(c("1/2 + 2/(t+5)")), &pol).unwrap();
        assert_eq!(v.kind, VerdictKind::Convergent);
        assert!((v.value.unwrap() - 5.0 / 3.0).abs() < 1e-8);
        let v = separation_integral(c("1"), &ParticularSolution::closed(c("1")), &pol).unwrap();
        assert!((v.value.unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn verify_rejects_non_solutions() {
        let p = ParticularSolution::closed(c("1/2 + 1/(t+5)"));
        assert!(p.verify(&c("1"), &eq20_gamma(), 1.0).is_err());
        let p = ParticularSolution::closed(c("1/2 + 2/(t+5)"));
        assert!(p.verify(&c("1"), &eq20_gamma(), 1.0).is_ok());
        assert!(p.verify(&c("1"), &eq20_gamma(), 1.1).is_err());
    }

    #[test]
    fn critical_case_one() {
        let p = ParticularSolution::closed(c("1/2"));
        let r = classify_at_critical(c("1"), c("1/4"), 1.0, &p, &CriticalPolicy::default()).unwrap();
        assert_eq!(r.case, CriticalCase::Case1AllAboveSeparated);
        let w = r.witness.unwrap();
        for t in [0.0, 1.0, 10.0, 150.0] {
            assert!((w.eval(t).unwrap() - (0.5 + 1.0 / (t + 1.0))).abs() < 1e-10);
        }
    }

    #[test]
    fn critical_case_two() {
        let p = ParticularSolution::closed(c("1/2 + 2/(t+5)"));
        let r = classify_at_critical(c("1"), eq20_gamma(), 1.0, &p, &CriticalPolicy::default()).unwrap();
        assert_eq!(r.case, CriticalCase::Case2ConvergentWithP1);
        assert!((r.p1_at_zero.unwrap() - 0.3).abs() < 1e-10);
        assert!((r.p1_initial.unwrap() - 0.3).abs() < 1e-8);
        assert_eq!(r.p1_positive, Some(true));
        let p1 = r.p1.unwrap();
        for t in [0.0, 2.0, 50.0, 199.0] {
            assert!((p1.eval(t).unwrap() - (0.5 - 1.0 / (t + 5.0))).abs() < 1e-10);
        }
    }

    #[test]
    fn critical_case_two_hypotheses_unmet() {
        // p = 1 solves z' = z - z^2 at k = 0
        let p = ParticularSolution::closed(c("1"));
        let r = classify_at_critical(c("1"), c("1/4"), 0.0, &p, &CriticalPolicy::default()).unwrap();
        assert_eq!(r.case, CriticalCase::Case2HypothesesUnmet);
        assert!((r.i_verdict.value.unwrap() - 1.0).abs() < 1e-8);
        assert!(r.p1_at_zero.unwrap().abs() < 1e-10);
        assert_eq!(r.p1_positive, Some(false));
    }

    #[test]
    fn critical_rejects_wrong_p() {
        let p = ParticularSolution::closed(c("1/2"));
        assert!(classify_at_critical(c("1"), c("1/4"), 0.9, &p, &CriticalPolicy::default()).is_err());
    }

    #[test]
    fn critical_k_examples() {
        let s = CriticalSearch::default();
        let r = find_critical_k(c("1"), c("1/4"), 0.0, 4.0, 1e-2, 200.0, &s).unwrap();
        assert!((r.k_bar - 1.0).abs() <= 2e-2, "{}", r.k_bar);
        assert!(r.bracket.1 - r.bracket.0 <= 1e-2);
        let r = find_critical_k(c("2"), c("1"), 0.0, 4.0, 1e-2, 200.0, &s).unwrap();
        assert!((r.k_bar - 1.0).abs() <= 2e-2, "{}", r.k_bar);
        let r = find_critical_k(c("1"), eq20_gamma(), 0.0, 4.0, 1e-2, 200.0, &s).unwrap();
        assert!((r.k_bar - 1.0).abs() <= 2e-2, "{}", r.k_bar);
    }

    #[test]
    fn critical_k_invalid_bracket() {
        let s = CriticalSearch::default();
        let r = find_critical_k(c("1"), c("1/4"), 3.0, 4.0, 1e-2, 200.0, &s);
        assert!(matches!(r, Err(Error::InvalidBracket(_))));
        let r = find_critical_k(c("1"), c("1/4"), 0.1, 0.5, 1e-2, 200.0, &s);
        assert!(matches!(r, Err(Error::InvalidBracket(_))));
        assert!(find_critical_k(c("1"), c("1/4"), 2.0, 1.0, 1e-2, 200.0, &s).is_err());
    }

    #[test]
    fn fate_examples() {
        let ivp = IvpOptions::default();
        let p = ParticularSolution::closed(c("1/2 + 2/(t+5)"));
        let f = fate_of_initial(c("1"), eq20_gamma(), 1.0, 0.3, 100.0, Some(&p), &ivp).unwrap();
        // z(0) = 3/10 lies on 1/2 - 1/(t+5), so the gap is 3/(t+5)
        assert!((f.final_gap().unwrap() - 3.0 / 105.0).abs() < 1e-6, "{:?}", f.final_gap());
        let f = fate_of_initial(c("1"), eq20_gamma(), 1.0, 0.29, 100.0, Some(&p), &ivp).unwrap();
        assert!(f.blowdown_time().is_some());
        let f = fate_of_initial(c("1"), c("sin(t)"), 0.0, 1.0, 50.0, None, &ivp).unwrap();
        match f.outcome {
            Outcome::Completed { sup, inf, .. } => assert!((sup - 1.0).abs() < 1e-14 && (inf - 1.0).abs() < 1e-14),
            o => panic!("{o:?}"),
        }
    }

    #[test]
    fn sweep_csv() {
        let rows = fate_sweep(c("1"), c("1/4"), &[0.5, 2.0], &[0.5, 1.0], 20.0, &IvpOptions::default()).unwrap();
        assert_eq!(rows.len(), 4);
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("k,z0,fate,t_blowdown\n"));
        assert_eq!(text.matches("blow-down").count(), 2);
        assert_eq!(text.matches("completed").count(), 2);
    }
}
