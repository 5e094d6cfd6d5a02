//! Explicit adaptive integration of scalar ODEs z' = f(t, z) with
//! blow-down detection.
//!
//! The stepper is the Dormand-Prince 5(4) pair (FSAL, local extrapolation).
//! Accepted steps keep the end slopes and one extra coefficient, so any point
//! of the trajectory is available from the pair's fourth-order continuous
//! extension.

use std::io::Write;

use serde::Serialize;

use crate::coefficient::{constant, Coef, Coefficient};
use crate::error::{Error, Result};
use crate::quad::hermite;
use crate::scalar::Real;

pub trait Rhs<T: Real>: Send + Sync {
    fn eval(&self, t: T, z: T) -> Result<T>;
}

impl<T: Real, F> Rhs<T> for F
where
    F: Fn(T, T) -> Result<T> + Send + Sync,
{
    fn eval(&self, t: T, z: T) -> Result<T> {
        self(t, z)
    }
}

/// Right-hand side `a(t) z - b(t) z^2 - k gamma(t)`.
#[derive(Clone)]
pub struct HarvestRhs<T: Real> {
    pub a: Coef<T>,
    pub gamma: Coef<T>,
    pub k: T,
    pub b: Coef<T>,
}

impl<T: Real> HarvestRhs<T> {
    /// The harvested logistic equation (b = 1).
    pub fn new(a: Coef<T>, gamma: Coef<T>, k: T) -> Self {
        Self { a, gamma, k, b: constant(T::one()) }
    }

    /// The Bernoulli equation `z' = a z - b z^2` (no harvesting).
    pub fn bernoulli(a: Coef<T>, b: Coef<T>) -> Self {
        Self { a, gamma: constant(T::zero()), k: T::zero(), b }
    }

    pub fn with_b(mut self, b: Coef<T>) -> Self {
        self.b = b;
        self
    }
}

impl<T: Real> Rhs<T> for HarvestRhs<T> {
    fn eval(&self, t: T, z: T) -> Result<T> {
        let harvest = if self.k == T::zero() { T::zero() } else { self.k * self.gamma.eval(t)? };
        let v = self.a.eval(t)? * z - self.b.eval(t)? * z * z - harvest;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { t: t.as_f64(), value: v.as_f64() })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status")]
pub enum TrajectoryStatus<T> {
    CompletedHorizon,
    BlowDown { t_est: T },
    StepUnderflow { t: T },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub values: Vec<T>,
    /// f(t_i, z_i) at every node; used for dense output.
    pub slopes: Vec<T>,
    /// Per step, the coefficient of `theta^2 (1 - theta)^2` that lifts the
    /// cubic Hermite interpolant to the fourth-order continuous extension of
    /// the Dormand-Prince pair.
    pub quartic: Vec<T>,
    pub status: TrajectoryStatus<T>,
    pub rejected_steps: usize,
}

impl<T: Real> Trajectory<T> {
    pub fn t_start(&self) -> T {
        self.times[0]
    }

    pub fn t_end(&self) -> T {
        *self.times.last().expect("non-empty trajectory")
    }

    pub fn final_value(&self) -> T {
        *self.values.last().expect("non-empty trajectory")
    }

    pub fn completed(&self) -> bool {
        matches!(self.status, TrajectoryStatus::CompletedHorizon)
    }

    pub fn blowdown_time(&self) -> Option<T> {
        match self.status {
            TrajectoryStatus::BlowDown { t_est } => Some(t_est),
            _ => None,
        }
    }

    pub fn min_value(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max_value(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Dense output at any `t` inside the integrated range.
    pub fn dense(&self, t: T) -> Result<T> {
        let (lo, hi) = (self.t_start(), self.t_end());
        if !(t >= lo && t <= hi) {
            return Err(Error::OutOfDomain { t: t.as_f64(), lo: lo.as_f64(), hi: hi.as_f64() });
        }
        if self.times.len() == 1 {
            return Ok(self.values[0]);
        }
        let i = self.times.partition_point(|&s| s <= t).saturating_sub(1).min(self.times.len() - 2);
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let cubic = hermite(t0, t1, self.values[i], self.values[i + 1], self.slopes[i], self.slopes[i + 1], t);
        let theta = (t - t0) / (t1 - t0);
        let bump = theta * (T::one() - theta);
        Ok(cubic + bump * bump * self.quartic.get(i).copied().unwrap_or_else(T::zero))
    }

    /// CSV with header `t,z`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "z"])?;
        for (t, z) in self.times.iter().zip(&self.values) {
            out.write_record([fmt17(*t), fmt17(*z)])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Same as [`write_csv`](Self::write_csv) but resampled on `samples`.
    pub fn write_csv_sampled<W: Write>(&self, w: W, samples: &[T]) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "z"])?;
        for &t in samples {
            out.write_record([fmt17(t), fmt17(self.dense(t)?)])?;
        }
        out.flush()?;
        Ok(())
    }
}

impl<T: Real> Coefficient<T> for Trajectory<T> {
    fn eval(&self, t: T) -> Result<T> {
        self.dense(t)
    }
    fn describe(&self) -> String {
        format!("trajectory on [{}, {}]", self.t_start(), self.t_end())
    }
}

/// 17 significant digits.
pub fn fmt17<T: Real>(v: T) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct IvpOptions<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    /// Integration stops with `BlowDown` once `z <= -z_big`.
    pub z_big: T,
    pub max_steps: usize,
    pub h_max: Option<T>,
}

impl<T: Real> Default for IvpOptions<T> {
    fn default() -> Self {
        Self {
            rel_tol: T::tol(1e-9),
            abs_tol: T::tol(1e-11),
            z_big: T::lit(1e9),
            max_steps: 2_000_000,
            h_max: None,
        }
    }
}

impl<T: Real> IvpOptions<T> {
    pub fn tolerances(rel_tol: T, abs_tol: T) -> Self {
        Self { rel_tol, abs_tol, ..Self::default() }
    }

    /// Tolerances used for Poincare maps and other tight comparisons.
    pub fn tight() -> Self {
        Self::tolerances(T::tol(1e-12), T::tol(1e-13))
    }
}

// Dormand-Prince 5(4)
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// continuous extension (Hairer's dopri5 dense output)
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];
// fifth-order minus fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Step<T> {
    z_new: T,
    slope_new: T,
    err: T,
    quartic: T,
}

fn dp_step<T: Real, R: Rhs<T> + ?Sized>(rhs: &R, t: T, z: T, k1: T, h: T) -> Result<Step<T>> {
    let mut k = [T::zero(); 7];
    k[0] = k1;
    for s in 1..7 {
        let mut acc = T::zero();
        for (j, kj) in k.iter().enumerate().take(s) {
            acc = acc + T::lit(A[s][j]) * *kj;
        }
        let zs = z + h * acc;
        if !zs.is_finite() {
            return Ok(Step { z_new: zs, slope_new: T::nan(), err: T::infinity(), quartic: T::nan() });
        }
        k[s] = match rhs.eval(t + T::lit(C[s]) * h, zs) {
            Ok(v) => v,
            // overflow inside a trial stage: reject the step
            Err(Error::NonFinite { .. }) => {
                return Ok(Step { z_new: T::nan(), slope_new: T::nan(), err: T::infinity(), quartic: T::nan() })
            }
            Err(e) => return Err(e),
        };
    }
    // row 7 of A holds the fifth-order weights (FSAL)
    let mut z_new = z;
    let mut acc = T::zero();
    for j in 0..6 {
        acc = acc + T::lit(A[6][j]) * k[j];
    }
    z_new = z_new + h * acc;
    let mut err = T::zero();
    let mut quartic = T::zero();
    for j in 0..7 {
        err = err + T::lit(E[j]) * k[j];
        quartic = quartic + T::lit(D[j]) * k[j];
    }
    Ok(Step { z_new, slope_new: k[6], err: (h * err).abs(), quartic: h * quartic })
}

/// Integrates `z' = rhs(t, z)` from `(t0, z0)` to `t1`.
///
/// Each accepted step satisfies `|local error| <= rel_tol |z| + abs_tol`.
/// Integration ends early with `BlowDown` when `z <= -z_big`, or when the
/// step size underflows `1e-14 (1 + |t|)` while `z` is negative and falling.
pub fn integrate_ivp<T: Real, R: Rhs<T> + ?Sized>(
    rhs: &R,
    z0: T,
    t0: T,
    t1: T,
    opts: &IvpOptions<T>,
) -> Result<Trajectory<T>> {
    if !(t0 < t1) {
        return Err(Error::invalid(format!("integration needs t0 < t1, got {t0} and {t1}")));
    }
    if !z0.is_finite() {
        return Err(Error::invalid("initial value must be finite"));
    }
    let rtol = opts.rel_tol.max(T::tol(1e-13));
    let atol = opts.abs_tol.max(T::tol(1e-13) * T::lit(1e-3));
    let h_floor = |t: T| T::tol(1e-14) * (T::one() + t.abs());

    let mut t = t0;
    let mut z = z0;
    let mut k1 = rhs.eval(t, z)?;
    let mut times = vec![t];
    let mut values = vec![z];
    let mut slopes = vec![k1];
    let mut quartic = Vec::new();
    let mut rejected = 0;

    // Hairer's starting step heuristic
    let span = t1 - t0;
    let sc0 = atol + rtol * z.abs();
    let d0 = z.abs() / sc0;
    let d1 = k1.abs() / sc0;
    let mut h = if d0 < T::lit(1e-5) || d1 < T::lit(1e-5) { T::lit(1e-6) } else { T::lit(0.01) * d0 / d1 };
    h = h.min(span);
    if let Some(hm) = opts.h_max {
        h = h.min(hm);
    }

    let mut status = TrajectoryStatus::CompletedHorizon;
    let mut last_rejected = false;
    let mut steps = 0usize;
    while t < t1 {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::MaxSteps { t: t.as_f64(), max_steps: opts.max_steps });
        }
        let mut h_try = h.min(t1 - t);
        if let Some(hm) = opts.h_max {
            h_try = h_try.min(hm);
        }
        let last = h_try >= t1 - t;
        let step = dp_step(rhs, t, z, k1, h_try)?;
        let sc = atol + rtol * z.abs().max(step.z_new.abs());
        let ratio = step.err / sc;
        let ok = ratio <= T::one() && step.z_new.is_finite() && step.slope_new.is_finite();
        let fifth = T::lit(0.2);
        if ok {
            t = if last { t1 } else { t + h_try };
            z = step.z_new;
            k1 = step.slope_new;
            times.push(t);
            values.push(z);
            slopes.push(k1);
            quartic.push(step.quartic);
            if z <= -opts.z_big {
                status = TrajectoryStatus::BlowDown { t_est: t };
                break;
            }
            let mut fac = if ratio == T::zero() { T::lit(5.0) } else { T::lit(0.9) * ratio.powf(-fifth) };
            fac = fac.max(T::lit(0.2)).min(T::lit(5.0));
            if last_rejected {
                fac = fac.min(T::one());
            }
            h = h_try * fac;
            last_rejected = false;
        } else {
            rejected += 1;
            let fac = if ratio.is_finite() { (T::lit(0.9) * ratio.powf(-fifth)).max(T::lit(0.1)) } else { T::lit(0.1) };
            h = h_try * fac.min(T::lit(0.9));
            last_rejected = true;
            if h < h_floor(t) {
                status = if z < T::zero() && k1 < T::zero() {
                    TrajectoryStatus::BlowDown { t_est: t }
                } else {
                    TrajectoryStatus::StepUnderflow { t }
                };
                break;
            }
        }
    }
    Ok(Trajectory { times, values, slopes, quartic, status, rejected_steps: rejected })
}

/// Fixed-step Dormand-Prince (fifth-order solution, no error control).
pub fn integrate_fixed_step<T: Real, R: Rhs<T> + ?Sized>(rhs: &R, z0: T, t0: T, t1: T, steps: usize) -> Result<T> {
    if steps == 0 || !(t0 < t1) {
        return Err(Error::invalid("fixed-step integration needs steps > 0 and t0 < t1"));
    }
    let h = (t1 - t0) / T::lit(steps as f64);
    let mut z = z0;
    let mut k1 = rhs.eval(t0, z)?;
    for i in 0..steps {
        let t = t0 + h * T::lit(i as f64);
        let s = dp_step(rhs, t, z, k1, h)?;
        z = s.z_new;
        k1 = s.slope_new;
    }
    Ok(z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DistanceNorm {
    Sup,
    Final,
}

/// Sup over the trajectory nodes, or final-node gap, of `|z(t_i) - ref(t_i)|`.
pub fn distance_to<T: Real, C: Coefficient<T> + ?Sized>(
    traj: &Trajectory<T>,
    reference: &C,
    norm: DistanceNorm,
) -> Result<T> {
    match norm {
        DistanceNorm::Final => Ok((traj.final_value() - reference.eval(traj.t_end())?).abs()),
        DistanceNorm::Sup => {
            let mut d = T::zero();
            for (&t, &z) in traj.times.iter().zip(&traj.values) {
                d = d.max((z - reference.eval(t)?).abs());
            }
            Ok(d)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficient::{constant, from_fn};

    fn logistic() -> HarvestRhs<f64> {
        HarvestRhs::new(constant(1.0), constant(0.0), 0.0)
    }

    fn closed_logistic(t: f64) -> f64 {
        t.exp() / (1.0 + t.exp())
    }

    #[test]
    fn logistic_matches_closed_form() {
        let tr = integrate_ivp(&logistic(), 0.5, 0.0, 1.0, &IvpOptions::default()).unwrap();
        assert!(tr.completed());
        assert!((tr.final_value() - 0.731_058_578_630_004_9).abs() < 1e-7);
        assert_eq!(tr.t_end(), 1.0);
    }

    #[test]
    fn separated_solution_at_fold() {
        let rhs: HarvestRhs<f64> = HarvestRhs::new(constant(1.0), constant(0.25), 1.0);
        let tr = integrate_ivp(&rhs, 1.5, 0.0, 1.0, &IvpOptions::default()).unwrap();
        assert!((tr.final_value() - 1.0).abs() < 1e-7);
    }

    #[test]
    fn blowdown_past_the_fold_near_pi() {
        let rhs: HarvestRhs<f64> = HarvestRhs::new(constant(1.0), constant(0.25), 2.0);
        let tr = integrate_ivp(&rhs, 0.5, 0.0, 50.0, &IvpOptions::default()).unwrap();
        let t_est = tr.blowdown_time().expect("blow-down");
        assert!((t_est - std::f64::consts::PI).abs() < 1e-3, "{t_est}");
        assert!(tr.final_value() <= -1e9);
    }

    #[test]
    fn dense_output_is_accurate() {
        let tr = integrate_ivp(&logistic(), 0.5, 0.0, 5.0, &IvpOptions::default()).unwrap();
        for i in 0..=500 {
            let t = i as f64 * 0.01;
            assert!((tr.dense(t).unwrap() - closed_logistic(t)).abs() < 1e-8, "t = {t}");
        }
        assert!(tr.dense(5.1).is_err());
        // between nodes the interpolant is as accurate as the nodes themselves
        let node_err = tr.times.iter().zip(&tr.values).map(|(&t, &z)| (z - closed_logistic(t)).abs()).fold(0.0, f64::max);
        let mid_err = tr
            .times
            .windows(2)
            .map(|w| {
                let t = 0.5 * (w[0] + w[1]);
                (tr.dense(t).unwrap() - closed_logistic(t)).abs()
            })
            .fold(0.0, f64::max);
        assert!(mid_err <= 10.0 * node_err.max(1e-12), "{mid_err:e} vs {node_err:e}");
    }

    #[test]
    fn equilibrium_stays_put() {
        let tr = integrate_ivp(&logistic(), 1.0, 0.0, 20.0, &IvpOptions::default()).unwrap();
        assert!(tr.values.iter().all(|&z| (z - 1.0).abs() < 1e-14));
        assert_eq!(distance_to(&tr, &constant(1.0), DistanceNorm::Sup).unwrap(), 0.0);
    }

    #[test]
    fn distance_examples() {
        let rhs = HarvestRhs::new(constant(1.0), constant(0.25), 1.0);
        let tr = integrate_ivp(&rhs, 1.5, 0.0, 50.0, &IvpOptions::default()).unwrap();
        let reference = from_fn("1/2 + 1/(t+1)", |t: f64| 0.5 + 1.0 / (t + 1.0));
        assert!(distance_to(&tr, &reference, DistanceNorm::Sup).unwrap() <= 1e-6);
        assert!(distance_to(&tr, &reference, DistanceNorm::Final).unwrap() <= 1e-6);
    }

    #[test]
    fn invalid_arguments() {
        assert!(integrate_ivp(&logistic(), 0.5, 1.0, 1.0, &IvpOptions::default()).is_err());
        assert!(integrate_ivp(&logistic(), f64::NAN, 0.0, 1.0, &IvpOptions::default()).is_err());
    }

    #[test]
    fn max_steps_reported() {
        let opts = IvpOptions { max_steps: 3, ..IvpOptions::default() };
        let r = integrate_ivp(&logistic(), 0.5, 0.0, 100.0, &opts);
        assert!(matches!(r, Err(Error::MaxSteps { .. })));
    }

    #[test]
    fn fixed_step_order() {
        // error ratio under step halving for a fifth-order method is ~32
        let rhs = logistic();
        let exact = closed_logistic(2.0);
        let e1 = (integrate_fixed_step(&rhs, 0.5, 0.0, 2.0, 10).unwrap() - exact).abs();
        let e2 = (integrate_fixed_step(&rhs, 0.5, 0.0, 2.0, 20).unwrap() - exact).abs();
        assert!(e1 / e2 >= 8.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn csv_output() {
        let tr = integrate_ivp(&logistic(), 0.5, 0.0, 1.0, &IvpOptions::default()).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,z"));
        let first = lines.next().unwrap();
        assert_eq!(first, "0.0000000000000000e0,5.0000000000000000e-1");
        let parsed: f64 = text.lines().last().unwrap().split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(parsed, tr.final_value());
    }

    #[test]
    fn single_precision_integration() {
        let rhs: HarvestRhs<f32> = HarvestRhs::new(constant(1.0f32), constant(0.0f32), 0.0);
        let tr = integrate_ivp(&rhs, 0.5f32, 0.0, 1.0, &IvpOptions::tolerances(1e-6, 1e-7)).unwrap();
        assert!((tr.final_value() - 0.731_058_6f32).abs() < 1e-5);
    }
}
