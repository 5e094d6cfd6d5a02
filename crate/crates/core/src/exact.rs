//! Closed-form solutions of the Bernoulli equation `z' = a(t) z - b(t) z^2`.
//!
//! With `mu(t) = exp(int_0^t a)` and `c = 1 / z(0)`, every solution is
//!
//! ```text
//! z(t) = mu(t) / g(t),    g(t) = c + int_0^t b(s) mu(s) ds.
//! ```
//!
//! Since `b mu > 0`, `g` is strictly increasing: positive data exist for all
//! time, and negative data blow down exactly when `g` reaches zero. Whether
//! that happens is governed by `J = int_0^inf b mu`.

use std::sync::Arc;

use serde::Serialize;

use crate::coefficient::{constant, Coef, Coefficient};
use crate::error::{Error, Result};
use crate::expr::bounds_estimate;
use crate::quad::{cumulative_with, improper, integrate, integrate_with, CumulativeIntegral, QuadOptions, ImproperPolicy, IntegralVerdict, VerdictKind};
use crate::scalar::Real;

const KERNEL_REL_TOL: f64 = 1e-12;
const ROOT_TOL: f64 = 1e-10;

fn kernel_grid<T: Real>(from: T, horizon: T) -> Vec<T> {
    let (h_min, h_max) = (T::lit(0.25), T::lit(16.0));
    let mut grid = vec![from];
    let mut t = from;
    while t < horizon {
        let h = (t / T::lit(16.0)).max(h_min).min(h_max);
        t = (t + h).min(horizon);
        // avoid a sliver panel at the end
        if horizon - t < h_min * T::lit(0.25) {
            t = horizon;
        }
        grid.push(t);
    }
    grid
}

/// `mu(t) = exp(int_0^t a)` tabulated on a node grid; off-node queries add an
/// adaptive integral from the nearest node below, so accuracy does not depend
/// on the node spacing.
#[derive(Clone)]
pub struct GrowthKernel<T: Real> {
    a: Coef<T>,
    table: CumulativeIntegral<T>,
    constant: Option<T>,
    rel_tol: T,
    /// When set, `a` is periodic and the table covers one period.
    period: Option<T>,
}

impl<T: Real> std::fmt::Debug for GrowthKernel<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GrowthKernel")
            .field("a", &self.a.describe())
            .field("horizon", &self.horizon())
            .field("nodes", &self.table.grid.len())
            .finish()
    }
}

pub fn growth_kernel<T: Real>(a: Coef<T>, horizon: T) -> Result<GrowthKernel<T>> {
    GrowthKernel::new(a, horizon)
}

impl<T: Real> GrowthKernel<T> {
    pub fn new(a: Coef<T>, horizon: T) -> Result<Self> {
        if !(horizon > T::zero()) || !horizon.is_finite() {
            return Err(Error::invalid(format!("kernel horizon must be positive and finite, got {horizon}")));
        }
        let rel_tol = T::tol(KERNEL_REL_TOL);
        let constant = a.constant_value();
        let grid = kernel_grid(T::zero(), horizon);
        let table = match constant {
            Some(c) => CumulativeIntegral {
                values: grid.iter().map(|&t| c * t).collect(),
                slopes: vec![c; grid.len()],
                grid,
            },
            None => cumulative_with(
                |s| a.eval(s),
                T::zero(),
                &grid,
                &QuadOptions { rel_tol, abs_tol: rel_tol, ..QuadOptions::default() },
            )?,
        };
        Ok(Self { a, table, constant, rel_tol, period: None })
    }

    /// Kernel of a `period`-periodic coefficient, tabulated over one period.
    /// `knots` are points where `a` is not smooth (for instance the steps of
    /// a numerical trajectory); panels never straddle them.
    pub fn periodic(a: Coef<T>, period: T, knots: &[T]) -> Result<Self> {
        if !(period > T::zero()) || !period.is_finite() {
            return Err(Error::invalid(format!("period must be positive and finite, got {period}")));
        }
        let rel_tol = T::tol(KERNEL_REL_TOL);
        let mut grid: Vec<T> = (0..=16).map(|i| period * T::lit(i as f64 / 16.0)).collect();
        grid.extend(knots.iter().copied().filter(|&t| t > T::zero() && t < period));
        grid.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
        let min_gap = period * T::tol(1e-12);
        grid.dedup_by(|b, a| *b - *a <= min_gap);
        *grid.last_mut().expect("non-empty grid") = period;
        let table = cumulative_with(
            |s| a.eval(s),
            T::zero(),
            &grid,
            &QuadOptions { rel_tol, abs_tol: rel_tol, ..QuadOptions::default() },
        )?;
        Ok(Self { a, table, constant: None, rel_tol, period: Some(period) })
    }

    pub fn period(&self) -> Option<T> {
        self.period
    }

    /// Appends nodes up to `horizon` (no-op if already covered).
    pub fn extend_to(&mut self, horizon: T) -> Result<()> {
        let last = self.horizon();
        if horizon <= last || self.period.is_some() {
            return Ok(());
        }
        let more = kernel_grid(last, horizon);
        let mut acc = self.table.last();
        for w in more.windows(2) {
            acc = acc
                + match self.constant {
                    Some(c) => c * (w[1] - w[0]),
                    None => integrate_with(|s| self.a.eval(s), w[0], w[1], &self.quad_options())?.value,
                };
            self.table.grid.push(w[1]);
            self.table.values.push(acc);
            self.table.slopes.push(self.constant.map_or_else(|| self.a.eval(w[1]), Ok)?);
        }
        Ok(())
    }

    pub fn a(&self) -> &Coef<T> {
        &self.a
    }

    /// End of the tabulated range; infinite for periodic kernels.
    pub fn horizon(&self) -> T {
        if self.period.is_some() {
            return T::infinity();
        }
        *self.table.grid.last().expect("non-empty grid")
    }

    pub fn nodes(&self) -> &[T] {
        &self.table.grid
    }

    pub fn table(&self) -> &CumulativeIntegral<T> {
        &self.table
    }

    // log mu only needs absolute accuracy: it is the relative error of mu
    fn quad_options(&self) -> QuadOptions<T> {
        QuadOptions { rel_tol: self.rel_tol, abs_tol: self.rel_tol, ..QuadOptions::default() }
    }

    /// Index of the last node `<= t`.
    fn anchor(&self, t: T) -> usize {
        self.table.grid.partition_point(|&g| g <= t).saturating_sub(1)
    }

    /// `int_0^t a`.
    pub fn log_mu(&self, t: T) -> Result<T> {
        if t < T::zero() {
            return Err(Error::OutOfDomain { t: t.as_f64(), lo: 0.0, hi: f64::INFINITY });
        }
        if let Some(c) = self.constant {
            return Ok(c * t);
        }
        if let Some(period) = self.period {
            let n = (t / period).floor();
            let s = (t - n * period).max(T::zero()).min(period);
            return Ok(n * self.table.last() + self.log_mu_tabulated(s)?);
        }
        self.log_mu_tabulated(t)
    }

    fn log_mu_tabulated(&self, t: T) -> Result<T> {
        let i = self.anchor(t);
        let node = self.table.grid[i];
        if t == node {
            return Ok(self.table.values[i]);
        }
        Ok(self.table.values[i] + integrate_with(|s| self.a.eval(s), node, t, &self.quad_options())?.value)
    }

    pub fn mu(&self, t: T) -> Result<T> {
        let v = self.log_mu(t)?.exp();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { t: t.as_f64(), value: v.as_f64() })
        }
    }
}

impl<T: Real> Coefficient<T> for GrowthKernel<T> {
    fn eval(&self, t: T) -> Result<T> {
        self.mu(t)
    }
    fn describe(&self) -> String {
        format!("exp(int_0^t {})", self.a.describe())
    }
}

/// `int_t0^inf b mu`, extending the kernel as the horizons grow.
pub(crate) fn weighted_improper<T: Real>(
    kernel: &mut GrowthKernel<T>,
    b: &Coef<T>,
    t0: T,
    policy: &ImproperPolicy<T>,
) -> Result<IntegralVerdict<T>> {
    // From an offset t0 the integrand barely changes over windows much
    // shorter than t0, so start the doubling at the offset's own scale.
    let mut policy = *policy;
    if t0 > policy.t_init {
        policy.t_init = t0;
        policy.t_max = policy.t_max.max(t0 * T::lit(128.0));
    }
    let policy = &policy;
    improper(
        |s| {
            if s > kernel.horizon() {
                let target = (kernel.horizon() * T::lit(2.0)).max(s);
                kernel.extend_to(target)?;
            }
            Ok(b.eval(s)? * kernel.mu(s)?)
        },
        t0,
        policy,
    )
}

/// `J = int_0^inf b(t) mu(t) dt` for the kernel of `a`.
pub fn j_integral<T: Real>(a: Coef<T>, b: Coef<T>, policy: &ImproperPolicy<T>) -> Result<IntegralVerdict<T>> {
    let mut kernel = GrowthKernel::new(a, policy.t_init)?;
    weighted_improper(&mut kernel, &b, T::zero(), policy)
}

/// `J` for an existing kernel (for instance a periodic one).
pub fn j_integral_with_kernel<T: Real>(
    mut kernel: GrowthKernel<T>,
    b: Coef<T>,
    policy: &ImproperPolicy<T>,
) -> Result<IntegralVerdict<T>> {
    weighted_improper(&mut kernel, &b, T::zero(), policy)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    /// z(0) = 0; the zero solution.
    Trivial,
    /// `g = c + int_0^t b mu`.
    Forward,
    /// `g = -int_t^inf b mu`, the solution starting at `-1/J`.
    Tail,
}

#[derive(Clone)]
pub struct ExactSolution<T: Real> {
    kernel: Arc<GrowthKernel<T>>,
    b: Coef<T>,
    branch: Branch,
    c: Option<T>,
    /// Forward: `int_0^{node} b mu`; Tail: `int_{node}^inf b mu`.
    table: Vec<T>,
    blowdown_time: Option<T>,
    blowdown_undecided: bool,
    horizon: T,
    rel_tol: T,
    tail_policy: ImproperPolicy<T>,
}

impl<T: Real> std::fmt::Debug for ExactSolution<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExactSolution")
            .field("branch", &self.branch)
            .field("c", &self.c)
            .field("blowdown_time", &self.blowdown_time)
            .field("horizon", &self.horizon)
            .finish()
    }
}

/// Solution of `z' = a z - b z^2`, `z(0) = z0`, tabulated up to `horizon`.
pub fn exact_solution<T: Real>(a: Coef<T>, b: Coef<T>, z0: T, horizon: T) -> Result<ExactSolution<T>> {
    let kernel = Arc::new(GrowthKernel::new(a, horizon)?);
    ExactSolution::from_kernel(kernel, b, z0)
}

impl<T: Real> ExactSolution<T> {
    pub fn from_kernel(kernel: Arc<GrowthKernel<T>>, b: Coef<T>, z0: T) -> Result<Self> {
        if !z0.is_finite() {
            return Err(Error::invalid("initial value must be finite"));
        }
        if kernel.period().is_some() {
            return Err(Error::invalid("closed-form solutions need a tabulated (non-periodic) kernel"));
        }
        let horizon = kernel.horizon();
        let rel_tol = T::tol(KERNEL_REL_TOL);
        let mut sol = Self {
            kernel,
            b,
            branch: Branch::Trivial,
            c: None,
            table: Vec::new(),
            blowdown_time: None,
            blowdown_undecided: false,
            horizon,
            rel_tol,
            tail_policy: ImproperPolicy::default(),
        };
        if z0 == T::zero() {
            return Ok(sol);
        }
        let c = z0.recip();
        sol.branch = Branch::Forward;
        sol.c = Some(c);
        let nodes = sol.kernel.nodes().to_vec();
        let mut acc = T::zero();
        sol.table.push(acc);
        for w in nodes.windows(2) {
            acc = acc + sol.weighted(w[0], w[1])?;
            sol.table.push(acc);
        }
        // with b > 0 only negative data can reach g = 0; a b of either sign
        // can also drive positive data to a pole at +inf
        sol.blowdown_time = sol.locate_blowdown(c, &nodes)?;
        sol.blowdown_undecided = c < T::zero() && sol.blowdown_time.is_none();
        Ok(sol)
    }

    /// `int_lo^hi b mu`.
    fn weighted(&self, lo: T, hi: T) -> Result<T> {
        Ok(integrate(|s| Ok(self.b.eval(s)? * self.kernel.mu(s)?), lo, hi, self.rel_tol)?.value)
    }

    /// First node interval on which `g` leaves the sign of `c`, refined by
    /// bisection.
    fn locate_blowdown(&self, c: T, nodes: &[T]) -> Result<Option<T>> {
        let s = c.signum();
        let Some(i) = self.table.iter().position(|&v| s * (c + v) <= T::zero()) else {
            return Ok(None);
        };
        if c + self.table[i] == T::zero() {
            return Ok(Some(nodes[i]));
        }
        let (mut lo, mut hi) = (nodes[i - 1], nodes[i]);
        let base = c + self.table[i - 1];
        let anchor = nodes[i - 1];
        let tol = T::tol(ROOT_TOL);
        while hi - lo > tol {
            let mid = lo + (hi - lo) / T::lit(2.0);
            if mid <= lo || mid >= hi {
                break;
            }
            let g = base + self.weighted(anchor, mid)?;
            if s * g > T::zero() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(Some(lo + (hi - lo) / T::lit(2.0)))
    }

    pub fn branch(&self) -> Branch {
        self.branch
    }

    /// `1 / z(0)`; `-J` on the tail branch; `None` for the zero solution.
    pub fn c(&self) -> Option<T> {
        self.c
    }

    pub fn z0(&self) -> T {
        self.c.map_or(T::zero(), T::recip)
    }

    pub fn is_trivial(&self) -> bool {
        self.branch == Branch::Trivial
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn kernel(&self) -> &GrowthKernel<T> {
        &self.kernel
    }

    /// First zero of `g` on `[0, horizon]`: `z -> -inf` there for negative data,
    /// `z -> +inf` for positive data (possible only where `b < 0`).
    pub fn blowdown_time(&self) -> Option<T> {
        self.blowdown_time
    }

    /// True for negative data whose `g` stays negative up to the horizon:
    /// the horizon alone cannot say whether the solution blows down.
    pub fn blowdown_undecided(&self) -> bool {
        self.blowdown_undecided
    }

    /// `g(t)`, the denominator of the closed form.
    pub fn denominator(&self, t: T) -> Result<T> {
        if t < T::zero() {
            return Err(Error::OutOfDomain { t: t.as_f64(), lo: 0.0, hi: f64::INFINITY });
        }
        let nodes = self.kernel.nodes();
        match self.branch {
            Branch::Trivial => Ok(T::infinity()),
            Branch::Forward => {
                let c = self.c.expect("forward branch has c");
                let i = nodes.partition_point(|&g| g <= t).saturating_sub(1).min(self.table.len() - 1);
                Ok(c + self.table[i] + self.weighted(nodes[i], t)?)
            }
            Branch::Tail => {
                if t >= self.horizon {
                    let mut kernel = (*self.kernel).clone();
                    let v = weighted_improper(&mut kernel, &self.b, t, &self.tail_policy)?;
                    return match v.value {
                        Some(x) if v.is_convergent() => Ok(-x),
                        _ => Err(Error::NotConvergent { verdict: v.kind.as_str() }),
                    };
                }
                let j = nodes.partition_point(|&g| g <= t).min(nodes.len() - 1);
                if nodes[j - 1] == t {
                    return Ok(-self.table[j - 1]);
                }
                Ok(-(self.table[j] + self.weighted(t, nodes[j])?))
            }
        }
    }

    pub fn eval(&self, t: T) -> Result<T> {
        if self.branch == Branch::Trivial {
            return Ok(T::zero());
        }
        if let Some(tb) = self.blowdown_time {
            if t >= tb {
                return Err(Error::PastBlowdown { t: t.as_f64(), blowdown: tb.as_f64() });
            }
        }
        let z = self.kernel.mu(t)? / self.denominator(t)?;
        if z.is_finite() {
            Ok(z)
        } else {
            Err(Error::NonFinite { t: t.as_f64(), value: z.as_f64() })
        }
    }

    /// JSON-friendly summary with `n` uniform samples on `[0, min(horizon, blow-down)]`.
    pub fn summary(&self, n: usize) -> Result<ExactSummary<T>> {
        let end = self.blowdown_time.map_or(self.horizon, |tb| tb * T::lit(0.999)).min(self.horizon);
        let n = n.max(2);
        let mut samples = Vec::with_capacity(n);
        for i in 0..n {
            let t = end * T::lit(i as f64) / T::lit((n - 1) as f64);
            samples.push((t, self.eval(t)?));
        }
        Ok(ExactSummary {
            branch: self.branch,
            c: self.c,
            blowdown_time: self.blowdown_time,
            blowdown_undecided: self.blowdown_undecided,
            horizon: self.horizon,
            samples,
        })
    }
}

impl<T: Real> Coefficient<T> for ExactSolution<T> {
    fn eval(&self, t: T) -> Result<T> {
        ExactSolution::eval(self, t)
    }
    fn describe(&self) -> String {
        format!("exact solution with z(0) = {}", self.z0())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactSummary<T> {
    pub branch: Branch,
    pub c: Option<T>,
    pub blowdown_time: Option<T>,
    pub blowdown_undecided: bool,
    pub horizon: T,
    pub samples: Vec<(T, T)>,
}

pub fn blowdown_time<T: Real>(sol: &ExactSolution<T>) -> Option<T> {
    sol.blowdown_time()
}

/// The negative solution with `g = -int_t^inf b mu`, i.e. `z(0) = -1/J`.
/// Requires a convergent `J`.
pub fn special_solution<T: Real>(
    a: Coef<T>,
    b: Coef<T>,
    horizon: T,
    policy: &ImproperPolicy<T>,
) -> Result<ExactSolution<T>> {
    let mut kernel = GrowthKernel::new(a, horizon)?;
    let j = weighted_improper(&mut kernel, &b, T::zero(), policy)?;
    if !j.is_convergent() {
        return Err(Error::NotConvergent { verdict: j.kind.as_str() });
    }
    // the J loop may have pushed the kernel past `horizon`; tabulate up to
    // the first node at or beyond it
    let all = kernel.nodes();
    let end = all.partition_point(|&g| g < horizon).min(all.len() - 1);
    let nodes = all[..=end].to_vec();
    let last = nodes[end];
    let mut scratch = kernel.clone();
    let tail_end = weighted_improper(&mut scratch, &b, last, policy)?;
    let Some(tail_last) = tail_end.value.filter(|_| tail_end.is_convergent()) else {
        return Err(Error::NotConvergent { verdict: tail_end.kind.as_str() });
    };
    let rel_tol = T::tol(KERNEL_REL_TOL);
    let mut table = vec![T::zero(); nodes.len()];
    table[nodes.len() - 1] = tail_last;
    for i in (0..nodes.len() - 1).rev() {
        let piece = integrate(|s| Ok(b.eval(s)? * kernel.mu(s)?), nodes[i], nodes[i + 1], rel_tol)?.value;
        table[i] = table[i + 1] + piece;
    }
    let j_value = table[0];
    Ok(ExactSolution {
        kernel: Arc::new(kernel),
        b,
        branch: Branch::Tail,
        c: Some(-j_value),
        table,
        blowdown_time: None,
        blowdown_undecided: false,
        horizon: last,
        rel_tol,
        tail_policy: *policy,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum FateKind<T> {
    BlowDownFiniteTime { t: T },
    BoundedSeparatedFromZero,
    TendsToZero,
    /// Exists for all t > 0; no decay claim (decay hypotheses not met).
    GlobalExists,
    GlobalExistsSeparatedFromZero,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisCheck<T> {
    pub name: String,
    pub window: (T, T),
    /// Largest sampled value of the tested quantity on the window.
    pub worst: T,
    pub threshold: T,
    pub holds: bool,
}

/// Samples `[0.9 H, H]`: does `f <= threshold` hold there?
pub fn check_eventually_nonpositive<T: Real, C: Coefficient<T> + ?Sized>(
    name: &str,
    f: &C,
    horizon: T,
    threshold: T,
    samples: usize,
) -> Result<HypothesisCheck<T>> {
    let lo = horizon * T::lit(0.9);
    let b = bounds_estimate(f, lo, horizon, samples)?;
    Ok(HypothesisCheck { name: name.to_string(), window: (lo, horizon), worst: b.upper, threshold, holds: b.upper <= threshold })
}

/// Samples `[0.9 H, H]`: does `|f| <= threshold` hold there?
pub fn check_tends_to_zero<T: Real, C: Coefficient<T> + ?Sized>(
    name: &str,
    f: &C,
    horizon: T,
    threshold: T,
    samples: usize,
) -> Result<HypothesisCheck<T>> {
    let lo = horizon * T::lit(0.9);
    let b = bounds_estimate(f, lo, horizon, samples)?;
    let worst = b.upper.abs().max(b.lower.abs());
    Ok(HypothesisCheck { name: name.to_string(), window: (lo, horizon), worst, threshold, holds: worst <= threshold })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassifyPolicy<T> {
    pub improper: ImproperPolicy<T>,
    /// Asymptotic hypotheses are sampled on `[0.9 H, H]`.
    pub hypothesis_horizon: T,
    pub hypothesis_threshold: T,
    pub hypothesis_samples: usize,
    /// `z0` counts as `-1/J` when within `band_rel (1 + |z0|)`.
    pub band_rel: T,
}

impl<T: Real> Default for ClassifyPolicy<T> {
    fn default() -> Self {
        Self {
            improper: ImproperPolicy::default(),
            hypothesis_horizon: T::lit(1e4),
            hypothesis_threshold: T::lit(1e-3),
            hypothesis_samples: 1001,
            band_rel: T::tol(1e-9),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FateDiagnostics<T> {
    pub j: Option<IntegralVerdict<T>>,
    pub horizon: T,
    /// `-1/J` and the band used to compare `z0` against it.
    pub threshold: Option<(T, T)>,
    pub hypotheses: Vec<HypothesisCheck<T>>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fate<T> {
    pub kind: FateKind<T>,
    pub diagnostics: FateDiagnostics<T>,
}

fn check_b_positive<T: Real>(b: &Coef<T>, policy: &ClassifyPolicy<T>, warnings: &mut Vec<String>) -> Result<()> {
    let bounds = bounds_estimate(b.as_ref(), T::zero(), policy.hypothesis_horizon, 2001)?;
    if !(bounds.lower > T::zero()) {
        warnings.push(format!(
            "b is not bounded below by a positive constant on [0, {}] (sampled min {})",
            policy.hypothesis_horizon, bounds.lower
        ));
    }
    Ok(())
}

/// Fate of every solution with `z(0) > 0`.
pub fn classify_positive<T: Real>(a: Coef<T>, b: Coef<T>, policy: &ClassifyPolicy<T>) -> Result<Fate<T>> {
    let mut warnings = Vec::new();
    check_b_positive(&b, policy, &mut warnings)?;
    let j = j_integral(a.clone(), b, &policy.improper)?;
    let mut hypotheses = Vec::new();
    let kind = match j.kind {
        VerdictKind::Divergent => FateKind::BoundedSeparatedFromZero,
        VerdictKind::Convergent => {
            let h = check_eventually_nonpositive(
                "a <= 0 for large t",
                a.as_ref(),
                policy.hypothesis_horizon,
                policy.hypothesis_threshold,
                policy.hypothesis_samples,
            )?;
            let holds = h.holds;
            hypotheses.push(h);
            if holds {
                FateKind::TendsToZero
            } else {
                warnings.push("J is finite but a is not eventually non-positive; no decay claim".into());
                FateKind::Inconclusive
            }
        }
        VerdictKind::Inconclusive => FateKind::Inconclusive,
    };
    let horizon = j.last_horizon();
    Ok(Fate { kind, diagnostics: FateDiagnostics { j: Some(j), horizon, threshold: None, hypotheses, warnings } })
}

/// Doubles the horizon until the solution from `z0 < 0` is seen to blow down.
fn search_blowdown<T: Real>(a: &Coef<T>, b: &Coef<T>, z0: T, t_max: T) -> Result<Option<T>> {
    let mut kernel = GrowthKernel::new(a.clone(), T::lit(16.0))?;
    loop {
        let sol = ExactSolution::from_kernel(Arc::new(kernel.clone()), b.clone(), z0)?;
        if let Some(t) = sol.blowdown_time() {
            return Ok(Some(t));
        }
        let next = kernel.horizon() * T::lit(2.0);
        if next > t_max {
            return Ok(None);
        }
        kernel.extend_to(next)?;
    }
}

/// Fate of the solution with `z(0) = z0 < 0`.
pub fn classify_negative<T: Real>(a: Coef<T>, b: Coef<T>, z0: T, policy: &ClassifyPolicy<T>) -> Result<Fate<T>> {
    if !(z0 < T::zero()) {
        return Err(Error::invalid(format!("classify_negative needs z0 < 0, got {z0}")));
    }
    let mut warnings = Vec::new();
    check_b_positive(&b, policy, &mut warnings)?;
    let j = j_integral(a.clone(), b.clone(), &policy.improper)?;
    let mut hypotheses = Vec::new();
    let mut threshold = None;
    let t_max = policy.improper.t_max;

    let blowdown = |warnings: &mut Vec<String>| -> Result<FateKind<T>> {
        Ok(match search_blowdown(&a, &b, z0, t_max)? {
            Some(t) => FateKind::BlowDownFiniteTime { t },
            None => {
                warnings.push(format!("no blow-down found up to t = {t_max}"));
                FateKind::Inconclusive
            }
        })
    };

    let kind = match (j.kind, j.value) {
        (VerdictKind::Divergent, _) => blowdown(&mut warnings)?,
        (VerdictKind::Convergent, Some(jv)) => {
            let critical = -jv.recip();
            let band = policy.band_rel * (T::one() + z0.abs());
            threshold = Some((critical, band));
            if (z0 - critical).abs() <= band {
                FateKind::GlobalExistsSeparatedFromZero
            } else if z0 < critical {
                blowdown(&mut warnings)?
            } else {
                let h1 = check_eventually_nonpositive(
                    "a <= 0 for large t",
                    a.as_ref(),
                    policy.hypothesis_horizon,
                    policy.hypothesis_threshold,
                    policy.hypothesis_samples,
                )?;
                let h2 = check_tends_to_zero(
                    "a -> 0",
                    a.as_ref(),
                    policy.hypothesis_horizon,
                    policy.hypothesis_threshold,
                    policy.hypothesis_samples,
                )?;
                let decays = h1.holds && h2.holds;
                hypotheses.push(h1);
                hypotheses.push(h2);
                if decays {
                    FateKind::TendsToZero
                } else {
                    FateKind::GlobalExists
                }
            }
        }
        _ => FateKind::Inconclusive,
    };
    let horizon = j.last_horizon();
    Ok(Fate { kind, diagnostics: FateDiagnostics { j: Some(j), horizon, threshold, hypotheses, warnings } })
}

/// Convenience: the default `b = 1`.
pub fn unit_b<T: Real>() -> Coef<T> {
    constant(T::one())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::CoefficientFn;

    fn c(src: &str) -> Coef<f64> {
        CoefficientFn::parse(src).unwrap().shared()
    }

    #[test]
    fn kernel_examples() {
        let k = GrowthKernel::new(c("1"), 4.0).unwrap();
        assert!((k.mu(2.0).unwrap() - 2f64.exp()).abs() < 1e-12);
        let k = GrowthKernel::new(c("-4/(t+5)"), 20.0).unwrap();
        assert!((k.mu(10.0).unwrap() - 1.0 / 81.0).abs() < 1e-13);
        assert!((k.mu(3.3).unwrap() - 625.0 / 8.3f64.powi(4)).abs() < 1e-13);
        let k = GrowthKernel::new(c("0"), 4.0).unwrap();
        assert_eq!(k.mu(3.7).unwrap(), 1.0);
        assert_eq!(k.mu(0.0).unwrap(), 1.0);
        assert!(k.mu(-1.0).is_err());
    }

    #[test]
    fn kernel_extension_matches_fresh_build() {
        let mut k = GrowthKernel::new(c("sin(t)/(t+1)"), 10.0).unwrap();
        k.extend_to(300.0).unwrap();
        let fresh = GrowthKernel::new(c("sin(t)/(t+1)"), 300.0).unwrap();
        for t in [0.3, 17.0, 123.4, 299.0] {
            assert!((k.log_mu(t).unwrap() - fresh.log_mu(t).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn exact_solution_examples() {
        let s = exact_solution(c("1"), c("1"), 0.5, 4.0).unwrap();
        let e = 1f64.exp();
        assert!((s.eval(1.0).unwrap() - e / (1.0 + e)).abs() < 1e-12);
        assert_eq!(s.blowdown_time(), None);

        let s = exact_solution(c("1"), c("1"), 1.0, 4.0).unwrap();
        for t in [0.0, 0.7, 3.9] {
            assert!((s.eval(t).unwrap() - 1.0).abs() < 1e-12);
        }

        let s = exact_solution(c("1"), c("1"), -1.0, 4.0).unwrap();
        let h = 0.5f64.exp();
        assert!((s.eval(0.5).unwrap() - h / (h - 2.0)).abs() < 1e-10);
    }

    #[test]
    fn pole_with_negative_b() {
        // z' = z^2, z = 1/(1 - t)
        let s = exact_solution(c("0"), c("-1"), 1.0, 4.0).unwrap();
        assert!((s.blowdown_time().unwrap() - 1.0).abs() < 1e-10);
        assert!(!s.blowdown_undecided());
        assert!((s.eval(0.5).unwrap() - 2.0).abs() < 1e-12);
        assert!(s.eval(2.0).is_err());
    }

    #[test]
    fn blowdown_examples() {
        let s = exact_solution(c("1"), c("1"), -1.0, 4.0).unwrap();
        assert!((blowdown_time(&s).unwrap() - 2f64.ln()).abs() < 1e-10);
        assert!(s.eval(1.0).is_err());
        let s = exact_solution(c("-1"), c("1"), -2.0, 8.0).unwrap();
        assert!((blowdown_time(&s).unwrap() - 2f64.ln()).abs() < 1e-10);
        // g(t) = -1 + (1 - e^-t) never vanishes
        let s = exact_solution(c("-1"), c("1"), -0.5, 8.0).unwrap();
        assert_eq!(s.blowdown_time(), None);
        assert!(s.blowdown_undecided());
    }

    #[test]
    fn trivial_solution() {
        let s = exact_solution(c("1"), c("1"), 0.0, 4.0).unwrap();
        assert!(s.is_trivial());
        assert_eq!(s.c(), None);
        assert_eq!(s.eval(2.0).unwrap(), 0.0);
    }

    #[test]
    fn classify_positive_examples() {
        let p = ClassifyPolicy::default();
        assert_eq!(classify_positive(c("1"), c("1"), &p).unwrap().kind, FateKind::BoundedSeparatedFromZero);
        let f = classify_positive(c("-1"), c("1"), &p).unwrap();
        assert_eq!(f.kind, FateKind::TendsToZero);
        assert!((f.diagnostics.j.unwrap().value.unwrap() - 1.0).abs() < 1e-8);
        let f = classify_positive(c("-4/(t+5)"), c("1"), &p).unwrap();
        assert_eq!(f.kind, FateKind::TendsToZero);
        assert!((f.diagnostics.j.unwrap().value.unwrap() - 5.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn classify_positive_flags_bad_b() {
        let f = classify_positive(c("1"), c("sin(t)"), &ClassifyPolicy::default()).unwrap();
        assert!(!f.diagnostics.warnings.is_empty());
    }

    #[test]
    fn classify_positive_sign_changing_a_is_inconclusive() {
        // J = int exp(-t + sin t) converges, but a = -1 + cos t is positive near 2 pi n
        let f = classify_positive(c("-1 + 2*cos(t)"), c("1"), &ClassifyPolicy::default()).unwrap();
        assert_eq!(f.kind, FateKind::Inconclusive);
    }

    #[test]
    fn classify_negative_examples() {
        let p = ClassifyPolicy::default();
        let f = classify_negative(c("-1"), c("1"), -2.0, &p).unwrap();
        match f.kind {
            FateKind::BlowDownFiniteTime { t } => assert!((t - 2f64.ln()).abs() < 1e-9),
            k => panic!("{k:?}"),
        }
        let f = classify_negative(c("-1"), c("1"), -1.0, &p).unwrap();
        assert_eq!(f.kind, FateKind::GlobalExistsSeparatedFromZero);
        let f = classify_negative(c("-4/(t+5)"), c("1"), -0.6, &p).unwrap();
        assert_eq!(f.kind, FateKind::GlobalExistsSeparatedFromZero);
        let f = classify_negative(c("-4/(t+5)"), c("1"), -0.5, &p).unwrap();
        assert_eq!(f.kind, FateKind::TendsToZero);
        // a -> -1, not 0: exists globally, no decay claim
        let f = classify_negative(c("-1"), c("1"), -0.5, &p).unwrap();
        assert_eq!(f.kind, FateKind::GlobalExists);
        // J divergent: every negative solution blows down
        let f = classify_negative(c("1"), c("1"), -1.0, &p).unwrap();
        match f.kind {
            FateKind::BlowDownFiniteTime { t } => assert!((t - 2f64.ln()).abs() < 1e-9),
            k => panic!("{k:?}"),
        }
        assert!(classify_negative(c("1"), c("1"), 0.5, &p).is_err());
    }

    #[test]
    fn special_solution_examples() {
        let p = ImproperPolicy::default();
        let s = special_solution(c("-4/(t+5)"), c("1"), 200.0, &p).unwrap();
        assert!((s.eval(0.0).unwrap() + 0.6).abs() < 1e-10);
        assert!((s.eval(5.0).unwrap() + 0.3).abs() < 1e-10);
        for t in [0.5, 17.0, 150.0, 5000.0] {
            assert!((s.eval(t).unwrap() + 3.0 / (t + 5.0)).abs() < 1e-9 * (1.0 + 3.0 / (t + 5.0)), "t = {t}");
        }
        let s = special_solution(c("-1"), c("1"), 50.0, &p).unwrap();
        for t in [0.0, 1.0, 40.0] {
            assert!((s.eval(t).unwrap() + 1.0).abs() < 1e-10);
        }
        let s = special_solution(c("-2"), c("1"), 50.0, &p).unwrap();
        assert!((s.eval(3.0).unwrap() + 2.0).abs() < 1e-10);
        assert!(special_solution(c("1"), c("1"), 50.0, &p).is_err());
    }

    #[test]
    fn summary_serializes() {
        let s = exact_solution(c("1"), c("1"), -1.0, 4.0).unwrap();
        let sum = s.summary(11).unwrap();
        let json = serde_json::to_value(&sum).unwrap();
        assert!(json["blowdown_time"].as_f64().unwrap() > 0.69);
        assert_eq!(json["samples"].as_array().unwrap().len(), 11);
    }
}
