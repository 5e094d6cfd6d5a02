//! Periodic coefficients: the Poincare map `P(z0) = z(T; z0)`, its fixed
//! points (the `T`-periodic solutions), the branches they form as the
//! harvesting level grows, and the turning point where the branches meet.
//!
//! The flow of a Riccati equation is linear-fractional in `z0`, so
//! `F(z) = P(z) - z` is concave where it is defined and has at most two
//! roots. Roots are located by a grid scan plus bisection; a double root at
//! the fold is found as the maximum of `F` by golden-section search.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::coefficient::{Coef, Coefficient};
use crate::error::{Error, Result};
use crate::expr::bounds_estimate;
use crate::harvest::ParticularSolution;
use crate::ivp::{fmt17, integrate_ivp, HarvestRhs, IvpOptions, Trajectory, TrajectoryStatus};
use crate::quad::integrate;
use crate::scalar::Real;

/// Residual accepted for a fixed point `|P(z0) - z0|`.
pub const FIXED_POINT_TOL: f64 = 1e-9;
const MERGE_TOL: f64 = 1e-7;
const NEAR_FOLD: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum MapValue<T> {
    Value { z: T },
    /// The orbit blew down before one period elapsed.
    Escaped { t_est: T },
}

impl<T: Copy> MapValue<T> {
    pub fn value(&self) -> Option<T> {
        match *self {
            Self::Value { z } => Some(z),
            Self::Escaped { .. } => None,
        }
    }
}

/// The model `z' = a z - z^2 - k gamma` with `T`-periodic coefficients.
#[derive(Clone)]
pub struct PeriodicProblem<T: Real> {
    pub a: Coef<T>,
    pub gamma: Coef<T>,
    pub period: T,
    pub ivp: IvpOptions<T>,
}

impl<T: Real> PeriodicProblem<T> {
    pub fn new(a: Coef<T>, gamma: Coef<T>, period: T) -> Result<Self> {
        if !(period > T::zero() && period.is_finite()) {
            return Err(Error::invalid(format!("period must be positive, got {period}")));
        }
        Ok(Self { a, gamma, period, ivp: IvpOptions::tight() })
    }

    fn rhs(&self, k: T) -> HarvestRhs<T> {
        HarvestRhs::new(self.a.clone(), self.gamma.clone(), k)
    }

    pub fn orbit(&self, k: T, z0: T, periods: usize) -> Result<Trajectory<T>> {
        integrate_ivp(&self.rhs(k), z0, T::zero(), self.period * T::lit(periods.max(1) as f64), &self.ivp)
    }

    pub fn poincare(&self, k: T, z0: T) -> Result<MapValue<T>> {
        let tr = self.orbit(k, z0, 1)?;
        Ok(match tr.status {
            TrajectoryStatus::CompletedHorizon => MapValue::Value { z: tr.final_value() },
            TrajectoryStatus::BlowDown { t_est } => MapValue::Escaped { t_est },
            TrajectoryStatus::StepUnderflow { t } => MapValue::Escaped { t_est: t },
        })
    }

    fn gap(&self, k: T, z0: T) -> Result<Option<T>> {
        Ok(self.poincare(k, z0)?.value().map(|p| p - z0))
    }

    /// Default scan window `[-0.1, sup a + 1]` with 200 points.
    pub fn default_scan(&self) -> Result<Scan<T>> {
        let sup = bounds_estimate(self.a.as_ref(), T::zero(), self.period, 1001)?.upper;
        Ok(Scan { z_min: T::lit(-0.1), z_max: sup.max(T::zero()) + T::one(), n: 200 })
    }
}

pub fn poincare_map<T: Real>(a: Coef<T>, gamma: Coef<T>, k: T, period: T, z0: T) -> Result<MapValue<T>> {
    PeriodicProblem::new(a, gamma, period)?.poincare(k, z0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scan<T> {
    pub z_min: T,
    pub z_max: T,
    pub n: usize,
}

impl<T: Real> Scan<T> {
    fn validate(&self) -> Result<()> {
        if !(self.z_min < self.z_max) || self.n < 3 {
            return Err(Error::invalid(format!(
                "scan needs z_min < z_max and n >= 3 (got [{}, {}], n = {})",
                self.z_min, self.z_max, self.n
            )));
        }
        Ok(())
    }

    fn points(&self) -> Vec<T> {
        let step = (self.z_max - self.z_min) / T::lit((self.n - 1) as f64);
        (0..self.n).map(|i| self.z_min + step * T::lit(i as f64)).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PeriodicSolution<T: Real> {
    pub k: T,
    pub z0: T,
    pub period: T,
    /// `|P(z0) - z0|`.
    pub residual: T,
    /// Part of a pair closer than `1e-4`, or a double root.
    pub near_fold: bool,
    #[serde(skip)]
    pub trajectory: Trajectory<T>,
}

impl<T: Real> PeriodicSolution<T> {
    pub fn particular(&self) -> ParticularSolution<T> {
        ParticularSolution::Periodic { trajectory: self.trajectory.clone(), period: self.period }
    }

    /// `|z(n T) - z0|` after re-integrating over `n` periods.
    pub fn drift(&self, problem: &PeriodicProblem<T>, periods: usize) -> Result<T> {
        let tr = problem.orbit(self.k, self.z0, periods)?;
        if !tr.completed() {
            return Ok(T::infinity());
        }
        Ok((tr.final_value() - self.z0).abs())
    }
}

impl<T: Real> Coefficient<T> for PeriodicSolution<T> {
    fn eval(&self, t: T) -> Result<T> {
        self.particular().eval(t)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FixedPoints<T: Real> {
    pub k: T,
    pub solutions: Vec<PeriodicSolution<T>>,
    pub escaped: usize,
    pub near_fold: bool,
    pub warnings: Vec<String>,
}

fn golden_max<T: Real>(mut f: impl FnMut(T) -> Result<Option<T>>, mut lo: T, mut hi: T) -> Result<(T, T)> {
    let r = T::lit(0.618_033_988_749_894_9);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let ninf = T::neg_infinity();
    let mut f1 = f(x1)?.unwrap_or(ninf);
    let mut f2 = f(x2)?.unwrap_or(ninf);
    let xtol = T::tol(1e-12) * (T::one() + lo.abs().max(hi.abs()));
    while hi - lo > xtol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2)?.unwrap_or(ninf);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1)?.unwrap_or(ninf);
        }
    }
    Ok(if f1 > f2 { (x1, f1) } else { (x2, f2) })
}

/// Peak of `F = P(z) - z`: grid argmax refined by golden-section search.
fn peak_of<T: Real>(problem: &PeriodicProblem<T>, k: T, zs: &[T], fs: &[Option<T>]) -> Result<Option<(T, T)>> {
    let best = fs
        .iter()
        .enumerate()
        .filter_map(|(i, f)| f.map(|v| (i, v)))
        .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap_or(std::cmp::Ordering::Equal));
    let Some((i, _)) = best else { return Ok(None) };
    let lo = zs[i.saturating_sub(1)];
    let hi = zs[(i + 1).min(zs.len() - 1)];
    let (z, f) = golden_max(|z| problem.gap(k, z), lo, hi)?;
    Ok(Some((z, f)))
}

fn bisect_root<T: Real>(problem: &PeriodicProblem<T>, k: T, mut lo: T, mut f_lo: T, mut hi: T) -> Result<T> {
    for _ in 0..200 {
        let mid = lo + (hi - lo) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = problem.gap(k, mid)?.unwrap_or(T::neg_infinity());
        if f_mid == T::zero() {
            return Ok(mid);
        }
        if (f_mid > T::zero()) == (f_lo > T::zero()) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
        if hi - lo <= T::tol(1e-13) * (T::one() + mid.abs()) {
            break;
        }
    }
    Ok(lo + (hi - lo) / T::lit(2.0))
}

impl<T: Real> PeriodicProblem<T> {
    fn solution(&self, k: T, z0: T, near_fold: bool) -> Result<PeriodicSolution<T>> {
        let trajectory = self.orbit(k, z0, 1)?;
        let residual = if trajectory.completed() { (trajectory.final_value() - z0).abs() } else { T::infinity() };
        Ok(PeriodicSolution { k, z0, period: self.period, residual, near_fold, trajectory })
    }

    fn scan_values(&self, k: T, scan: &Scan<T>) -> Result<(Vec<T>, Vec<Option<T>>)> {
        scan.validate()?;
        let zs = scan.points();
        let fs = zs.iter().map(|&z| self.gap(k, z)).collect::<Result<Vec<_>>>()?;
        Ok((zs, fs))
    }

    /// Maximum of `P(z) - z` over the scan window, with its location.
    pub fn peak(&self, k: T, scan: &Scan<T>) -> Result<Option<(T, T)>> {
        let (zs, fs) = self.scan_values(k, scan)?;
        peak_of(self, k, &zs, &fs)
    }

    /// `T`-periodic solutions with initial value in the scan window.
    pub fn fixed_points(&self, k: T, scan: &Scan<T>) -> Result<FixedPoints<T>> {
        let (zs, fs) = self.scan_values(k, scan)?;
        let tol = T::lit(FIXED_POINT_TOL);
        let escaped = fs.iter().filter(|f| f.is_none()).count();
        let mut warnings = Vec::new();
        if escaped > 0 {
            warnings.push(format!("{escaped} of {} scan points escaped within one period and were skipped", zs.len()));
        }
        let mut roots: Vec<(T, bool)> = Vec::new();
        for i in 0..zs.len() {
            let Some(fi) = fs[i] else { continue };
            if fi == T::zero() {
                roots.push((zs[i], false));
                continue;
            }
            if let Some(Some(fj)) = fs.get(i + 1) {
                if *fj != T::zero() && (fi > T::zero()) != (*fj > T::zero()) {
                    roots.push((bisect_root(self, k, zs[i], fi, zs[i + 1])?, false));
                }
            }
        }
        let mut near_fold = false;
        if roots.is_empty() {
            if let Some((z, f)) = peak_of(self, k, &zs, &fs)? {
                if f.abs() <= tol {
                    roots.push((z, true));
                    near_fold = true;
                } else if f > T::zero() {
                    // both roots between two grid points
                    let step = zs[1] - zs[0];
                    let lo = (z - step).max(scan.z_min);
                    let hi = (z + step).min(scan.z_max);
                    for (a, b) in [(lo, z), (z, hi)] {
                        if let (Some(fa), Some(fb)) = (self.gap(k, a)?, self.gap(k, b)?) {
                            if (fa > T::zero()) != (fb > T::zero()) {
                                roots.push((bisect_root(self, k, a, fa, b)?, false));
                            }
                        }
                    }
                }
            }
        }
        roots.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(std::cmp::Ordering::Equal));
        roots.dedup_by(|b, a| (b.0 - a.0).abs() <= T::lit(MERGE_TOL));
        if roots.len() == 2 && (roots[1].0 - roots[0].0).abs() < T::lit(NEAR_FOLD) {
            near_fold = true;
        }
        let mut solutions = Vec::new();
        for (z, fold) in roots {
            let s = self.solution(k, z, fold || near_fold)?;
            if s.residual <= tol {
                solutions.push(s);
            } else {
                warnings.push(format!("candidate z0 = {z} rejected with residual {:e}", s.residual));
            }
        }
        Ok(FixedPoints { k, solutions, escaped, near_fold, warnings })
    }
}

pub fn fixed_points<T: Real>(a: Coef<T>, gamma: Coef<T>, k: T, period: T, scan: Option<Scan<T>>) -> Result<FixedPoints<T>> {
    let problem = PeriodicProblem::new(a, gamma, period)?;
    let scan = match scan {
        Some(s) => s,
        None => problem.default_scan()?,
    };
    problem.fixed_points(k, &scan)
}

#[derive(Debug, Clone, Serialize)]
pub struct TurningPoint<T: Real> {
    pub k_bar: T,
    /// `(with a periodic solution, without)`.
    pub bracket: (T, T),
    /// Peak of `P(z) - z` at the feasible end.
    pub peak: T,
    pub solution: PeriodicSolution<T>,
}

impl<T: Real> PeriodicProblem<T> {
    fn feasible(&self, k: T, scan: &Scan<T>, hint: &mut Option<T>) -> Result<bool> {
        let tol = T::lit(FIXED_POINT_TOL);
        // cheap local search around the previous peak first
        if let Some(z) = *hint {
            let w = (scan.z_max - scan.z_min) / T::lit(scan.n as f64) * T::lit(4.0);
            let (lo, hi) = ((z - w).max(scan.z_min), (z + w).min(scan.z_max));
            let (zp, fp) = golden_max(|z| self.gap(k, z), lo, hi)?;
            let interior = zp - lo > w * T::lit(0.01) && hi - zp > w * T::lit(0.01);
            if interior && fp.is_finite() {
                *hint = Some(zp);
                return Ok(fp >= -tol);
            }
        }
        match self.peak(k, scan)? {
            Some((z, f)) => {
                *hint = Some(z);
                Ok(f >= -tol)
            }
            None => Ok(false),
        }
    }

    /// The critical level beyond which no `T`-periodic solution exists.
    ///
    /// Bisects on existence, starting from `k_lo` and doubling `k_hi` until
    /// infeasible when no bracket is given, and keeps going until the peak of
    /// `P(z) - z` at the feasible end is within the fixed-point tolerance (or
    /// the bracket is below `tol_k` and rounding stops it).
    pub fn turning_point(&self, tol_k: T, bracket: Option<(T, T)>, scan: &Scan<T>) -> Result<TurningPoint<T>> {
        let tol = T::lit(FIXED_POINT_TOL);
        let mut hint = None;
        let (mut lo, mut hi) = match bracket {
            Some(b) => b,
            None => (T::zero(), T::one()),
        };
        if !self.feasible(lo, scan, &mut hint)? {
            return Err(Error::InvalidBracket(format!("no periodic solution at probe k = {lo}")));
        }
        let mut doublings = 0;
        while self.feasible(hi, scan, &mut None)? {
            if bracket.is_some() || doublings > 60 {
                return Err(Error::InvalidBracket(format!("periodic solutions still exist at k = {hi}")));
            }
            lo = hi;
            hi = hi * T::lit(2.0);
            doublings += 1;
        }
        let mut f_lo;
        loop {
            let (z, f) = match hint {
                Some(z) => {
                    let (zp, fp) = golden_max(|z| self.gap(lo, z), z - scan_step(scan) * T::lit(4.0), z + scan_step(scan) * T::lit(4.0))?;
                    (zp, fp)
                }
                None => self.peak(lo, scan)?.ok_or_else(|| Error::invalid("no peak at feasible level"))?,
            };
            hint = Some(z);
            f_lo = f;
            let mid = lo + (hi - lo) / T::lit(2.0);
            let narrow = hi - lo <= tol_k;
            if (narrow && f_lo <= tol) || mid <= lo || mid >= hi {
                break;
            }
            if self.feasible(mid, scan, &mut hint)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let z = hint.expect("peak located");
        let solution = self.solution(lo, z, true)?;
        Ok(TurningPoint { k_bar: lo + (hi - lo) / T::lit(2.0), bracket: (lo, hi), peak: f_lo, solution })
    }
}

fn scan_step<T: Real>(scan: &Scan<T>) -> T {
    (scan.z_max - scan.z_min) / T::lit((scan.n - 1) as f64)
}

pub fn turning_point<T: Real>(a: Coef<T>, gamma: Coef<T>, period: T, tol_k: T) -> Result<TurningPoint<T>> {
    let problem = PeriodicProblem::new(a, gamma, period)?;
    let scan = problem.default_scan()?;
    problem.turning_point(tol_k, None, &scan)
}

/// `int_0^T (a - 2p)`. Zero at the turning point; negative on the upper
/// branch and positive on the lower one.
pub fn floquet_integral<T: Real>(a: &Coef<T>, p: &PeriodicSolution<T>) -> Result<T> {
    let f = |t: T| Ok(a.eval(t)? - T::lit(2.0) * p.trajectory.dense(t)?);
    // split at trajectory nodes so each polynomial piece is integrated exactly
    let nodes = &p.trajectory.times;
    let mut total = T::zero();
    for w in nodes.windows(2) {
        total = total + integrate(f, w[0], w[1], T::tol(1e-12))?.value;
    }
    Ok(total)
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchDiagram<T: Real> {
    pub k: Vec<T>,
    pub lower: Vec<Option<T>>,
    pub upper: Vec<Option<T>>,
    /// `(k_bar, z0)` refined between the last two-solution level and the
    /// first empty one.
    pub turning_point: Option<(T, T)>,
    pub last_two: Option<T>,
    pub first_none: Option<T>,
    pub warnings: Vec<String>,
}

impl<T: Real> BranchDiagram<T> {
    /// CSV `k,lower,upper`, with empty fields where a branch is absent.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["k", "lower", "upper"])?;
        for i in 0..self.k.len() {
            out.write_record([
                fmt17(self.k[i]),
                self.lower[i].map(fmt17).unwrap_or_default(),
                self.upper[i].map(fmt17).unwrap_or_default(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

impl<T: Real> PeriodicProblem<T> {
    pub fn branch_diagram(&self, ks: &[T], scan: &Scan<T>, tol_k: T) -> Result<BranchDiagram<T>> {
        if ks.is_empty() || ks.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("k grid must be non-empty and strictly increasing"));
        }
        let found: Vec<FixedPoints<T>> =
            ks.par_iter().map(|&k| self.fixed_points(k, scan)).collect::<Result<_>>()?;
        let mut lower = Vec::with_capacity(ks.len());
        let mut upper = Vec::with_capacity(ks.len());
        let mut warnings = Vec::new();
        let (mut prev_lo, mut prev_hi): (Option<T>, Option<T>) = (None, None);
        let mut last_two = None;
        let mut first_none = None;
        for fp in &found {
            warnings.extend(fp.warnings.iter().map(|w| format!("k = {}: {w}", fp.k)));
            let zs: Vec<T> = fp.solutions.iter().map(|s| s.z0).collect();
            let (lo, hi) = match zs.len() {
                0 => {
                    if first_none.is_none() {
                        first_none = Some(fp.k);
                    }
                    (None, None)
                }
                1 if fp.near_fold => (Some(zs[0]), Some(zs[0])),
                1 => {
                    let z = zs[0];
                    let d = |p: Option<T>| p.map(|p| (p - z).abs()).unwrap_or(T::infinity());
                    if d(prev_lo) < d(prev_hi) {
                        (Some(z), None)
                    } else {
                        (None, Some(z))
                    }
                }
                n => {
                    if n > 2 {
                        warnings.push(format!("k = {}: {n} periodic solutions, tracking the extreme pair", fp.k));
                    }
                    last_two = Some(fp.k);
                    (Some(zs[0]), Some(zs[n - 1]))
                }
            };
            if first_none.is_some() && (lo.is_some() || hi.is_some()) {
                warnings.push(format!("k = {}: solutions reappear past an empty level", fp.k));
            }
            if prev_lo.is_some() && lo.is_none() && hi.is_some() {
                warnings.push(format!("k = {}: lower branch lost", fp.k));
            }
            prev_lo = lo.or(prev_lo);
            prev_hi = hi.or(prev_hi);
            lower.push(lo);
            upper.push(hi);
        }
        let mut turning = None;
        if let (Some(lo), Some(hi)) = (last_two, first_none) {
            if lo < hi {
                let tp = self.turning_point(tol_k, Some((lo, hi)), scan)?;
                turning = Some((tp.k_bar, tp.solution.z0));
            }
        }
        Ok(BranchDiagram { k: ks.to_vec(), lower, upper, turning_point: turning, last_two, first_none, warnings })
    }
}

pub fn branch_diagram<T: Real>(a: Coef<T>, gamma: Coef<T>, period: T, ks: &[T]) -> Result<BranchDiagram<T>> {
    let problem = PeriodicProblem::new(a, gamma, period)?;
    let scan = problem.default_scan()?;
    problem.branch_diagram(ks, &scan, T::tol(1e-6))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::CoefficientFn;
    use crate::harvest::separation_integral;
    use crate::quad::ImproperPolicy;

    fn c(src: &str) -> Coef<f64> {
        CoefficientFn::parse(src).unwrap().shared()
    }

    fn constant_case() -> PeriodicProblem<f64> {
        PeriodicProblem::new(c("1"), c("1/4"), 1.0).unwrap()
    }

    #[test]
    fn poincare_examples() {
        let e = std::f64::consts::E;
        let z = poincare_map(c("1"), c("0"), 0.0, 1.0, 0.5).unwrap().value().unwrap();
        assert!((z - e / (1.0 + e)).abs() < 1e-11);
        let z = poincare_map(c("1"), c("1/4"), 1.0, 1.0, 0.5).unwrap().value().unwrap();
        assert!((z - 0.5).abs() < 1e-12);
        let z = poincare_map(c("1"), c("0"), 0.0, 1.0, 1.0).unwrap().value().unwrap();
        assert_eq!(z, 1.0);
        assert!(matches!(poincare_map(c("1"), c("0"), 0.0, 1.0, -5.0).unwrap(), MapValue::Escaped { .. }));
        assert!(poincare_map(c("1"), c("0"), 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn fixed_point_examples() {
        let p = constant_case();
        let scan = p.default_scan().unwrap();
        let fp = p.fixed_points(0.75, &scan).unwrap();
        let zs: Vec<f64> = fp.solutions.iter().map(|s| s.z0).collect();
        assert_eq!(zs.len(), 2, "{zs:?}");
        assert!((zs[0] - 0.25).abs() < 1e-8 && (zs[1] - 0.75).abs() < 1e-8, "{zs:?}");
        assert!(fp.solutions.iter().all(|s| s.residual <= FIXED_POINT_TOL));
        let fp = p.fixed_points(1.0, &scan).unwrap();
        assert_eq!(fp.solutions.len(), 1, "{:?}", fp.solutions);
        assert!((fp.solutions[0].z0 - 0.5).abs() < 1e-4);
        assert!(fp.near_fold);
        assert!(p.fixed_points(1.5, &scan).unwrap().solutions.is_empty());
    }

    #[test]
    fn fixed_points_between_grid_points() {
        let p = constant_case();
        // roots 0.5 -+ 0.01 fall inside one cell of a 5-point grid
        let scan = Scan { z_min: 0.0, z_max: 2.0, n: 5 };
        let fp = p.fixed_points(0.9996, &scan).unwrap();
        let zs: Vec<f64> = fp.solutions.iter().map(|s| s.z0).collect();
        assert_eq!(zs.len(), 2, "{zs:?}");
        assert!((zs[0] - 0.49).abs() < 1e-8 && (zs[1] - 0.51).abs() < 1e-8, "{zs:?}");
    }

    #[test]
    fn turning_point_constant_cases() {
        let tp = turning_point(c("1"), c("1/4"), 1.0, 1e-6).unwrap();
        assert!((tp.k_bar - 1.0).abs() < 1e-3, "{tp:?}");
        assert!((tp.solution.z0 - 0.5).abs() < 1e-2);
        assert!(tp.solution.residual <= FIXED_POINT_TOL);
        let tp = turning_point(c("2"), c("1"), 1.0, 1e-6).unwrap();
        assert!((tp.k_bar - 1.0).abs() < 1e-3, "{tp:?}");
    }

    #[test]
    fn turning_point_needs_probe() {
        let p = constant_case();
        let scan = p.default_scan().unwrap();
        assert!(matches!(p.turning_point(1e-6, Some((1.2, 2.0)), &scan), Err(Error::InvalidBracket(_))));
        assert!(matches!(p.turning_point(1e-6, Some((0.2, 0.5)), &scan), Err(Error::InvalidBracket(_))));
    }

    #[test]
    fn floquet_examples() {
        let p = constant_case();
        let scan = p.default_scan().unwrap();
        let fp = p.fixed_points(0.75, &scan).unwrap();
        let a = c("1");
        assert!((floquet_integral(&a, &fp.solutions[1]).unwrap() + 0.5).abs() < 1e-8);
        assert!((floquet_integral(&a, &fp.solutions[0]).unwrap() - 0.5).abs() < 1e-8);
        let tp = p.turning_point(1e-9, None, &scan).unwrap();
        assert!(floquet_integral(&a, &tp.solution).unwrap().abs() < 1e-3);
    }

    #[test]
    fn branch_diagram_constant_case() {
        let ks: Vec<f64> = (1..=30).map(|i| 0.05 * i as f64).collect();
        let d = branch_diagram(c("1"), c("1/4"), 1.0, &ks).unwrap();
        for (i, &k) in ks.iter().enumerate() {
            if k < 1.0 - 1e-9 {
                let r = (1.0 - k).sqrt();
                assert!((d.upper[i].unwrap() - (1.0 + r) / 2.0).abs() < 1e-7, "k = {k}");
                assert!((d.lower[i].unwrap() - (1.0 - r) / 2.0).abs() < 1e-7, "k = {k}");
            } else if k > 1.0 + 1e-9 {
                assert!(d.upper[i].is_none() && d.lower[i].is_none());
            }
        }
        assert!(d.upper.windows(2).all(|w| match (w[0], w[1]) {
            (Some(x), Some(y)) => y < x,
            _ => true,
        }));
        let (kb, z) = d.turning_point.unwrap();
        assert!((kb - 1.0).abs() < 1e-3 && (z - 0.5).abs() < 1e-2);
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("k,lower,upper\n"));
        assert!(text.lines().last().unwrap().ends_with(",,"));
    }

    #[test]
    fn branch_endpoints_at_zero_harvest() {
        let p = constant_case();
        let fp = p.fixed_points(0.0, &p.default_scan().unwrap()).unwrap();
        let zs: Vec<f64> = fp.solutions.iter().map(|s| s.z0).collect();
        assert_eq!(zs.len(), 2, "{zs:?}");
        assert!(zs[0].abs() < 1e-9 && (zs[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn upper_branch_is_stable() {
        let p = PeriodicProblem::new(c("1 + 0.5*sin(2*pi*t)"), c("1/4"), 1.0).unwrap();
        let fp = p.fixed_points(0.5, &p.default_scan().unwrap()).unwrap();
        assert_eq!(fp.solutions.len(), 2);
        let up = &fp.solutions[1];
        assert!(up.drift(&p, 5).unwrap() <= 5.0 * FIXED_POINT_TOL);
        assert!(floquet_integral(&p.a, up).unwrap() < 0.0);
        assert!(floquet_integral(&p.a, &fp.solutions[0]).unwrap() > 0.0);
    }

    #[test]
    fn turning_point_is_separated() {
        let p = PeriodicProblem::new(c("1 + 0.5*sin(2*pi*t)"), c("1/4"), 1.0).unwrap();
        let tp = p.turning_point(1e-9, None, &p.default_scan().unwrap()).unwrap();
        assert!(floquet_integral(&p.a, &tp.solution).unwrap().abs() <= 1e-3);
        let v = separation_integral(p.a.clone(), &tp.solution.particular(), &ImproperPolicy::default()).unwrap();
        assert!(v.is_divergent(), "{v:?}");
    }
}
