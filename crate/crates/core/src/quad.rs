//! Adaptive quadrature on finite intervals, cumulative antiderivatives and a
//! horizon-doubling classifier for integrals over `[t0, inf)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;

// Kronrod 15-point abscissae on [-1, 1] (non-negative half), with the
// embedded 7-point Gauss rule on the odd indices.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate<T> {
    pub value: T,
    pub error: T,
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    pub max_segments: usize,
}

impl<T: Real> Default for QuadOptions<T> {
    fn default() -> Self {
        Self { rel_tol: T::tol(1e-10), abs_tol: T::tol(1e-14), max_segments: 4000 }
    }
}

impl<T: Real> QuadOptions<T> {
    pub fn with_rel_tol(rel_tol: T) -> Self {
        Self { rel_tol: rel_tol.max(T::tol(1e-14)), ..Self::default() }
    }
}

/// One 15-point Kronrod evaluation with its 7-point Gauss companion.
/// The error estimate is `|K15 - G7|`.
pub fn gauss_kronrod_15<T, F>(f: &mut F, a: T, b: T) -> Result<Estimate<T>>
where
    T: Real,
    F: FnMut(T) -> Result<T>,
{
    let half = (b - a) / T::lit(2.0);
    let center = a + half;
    let fc = f(center)?;
    let mut kronrod = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for j in 0..7 {
        let dx = half * T::lit(XGK[j]);
        let sum = f(center - dx)? + f(center + dx)?;
        kronrod = kronrod + sum * T::lit(WGK[j]);
        if j % 2 == 1 {
            gauss = gauss + sum * T::lit(WG[j / 2]);
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    Ok(Estimate { value, error })
}

#[derive(Debug, Clone, Copy)]
struct Segment<T> {
    a: T,
    b: T,
    est: Estimate<T>,
}

/// Adaptive integration of `f` over `[t0, t1]` with relative tolerance
/// `rel_tol` (absolute floor `1e-14`).
///
/// The error estimate assumes `f` is smooth on each panel. A kink that falls
/// between a panel's outermost node and its end is invisible to both rules;
/// integrate piecewise across known kinks.
pub fn integrate<T, F>(f: F, t0: T, t1: T, rel_tol: T) -> Result<Estimate<T>>
where
    T: Real,
    F: FnMut(T) -> Result<T>,
{
    integrate_with(f, t0, t1, &QuadOptions::with_rel_tol(rel_tol))
}

pub fn integrate_with<T, F>(mut f: F, t0: T, t1: T, opts: &QuadOptions<T>) -> Result<Estimate<T>>
where
    T: Real,
    F: FnMut(T) -> Result<T>,
{
    if !(t0 <= t1) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::invalid(format!("integration interval [{t0}, {t1}] is not ordered and finite")));
    }
    if t0 == t1 {
        return Ok(Estimate { value: T::zero(), error: T::zero() });
    }
    let rel_tol = opts.rel_tol.max(T::tol(1e-14));
    let abs_tol = opts.abs_tol;
    let first = gauss_kronrod_15(&mut f, t0, t1)?;
    let mut segments = vec![Segment { a: t0, b: t1, est: first }];
    loop {
        let (total, err) = segments
            .iter()
            .fold((T::zero(), T::zero()), |(v, e), s| (v + s.est.value, e + s.est.error));
        if err <= (rel_tol * total.abs()).max(abs_tol) {
            return Ok(Estimate { value: total, error: err });
        }
        // split the worst splittable segment
        let worst = segments
            .iter()
            .enumerate()
            .filter(|(_, s)| {
                let mid = s.a + (s.b - s.a) / T::lit(2.0);
                mid > s.a && mid < s.b && (s.b - s.a) > T::epsilon() * T::lit(16.0) * s.a.abs().max(s.b.abs())
            })
            .max_by(|x, y| x.1.est.error.partial_cmp(&y.1.est.error).unwrap_or(std::cmp::Ordering::Equal))
            .map(|(i, _)| i);
        let worst_any = segments
            .iter()
            .max_by(|x, y| x.est.error.partial_cmp(&y.est.error).unwrap_or(std::cmp::Ordering::Equal))
            .copied()
            .expect("at least one segment");
        let Some(i) = worst.filter(|_| segments.len() < opts.max_segments) else {
            // Round-off floor: if what is left cannot be reduced further and is
            // already tiny relative to the result, accept it.
            if err <= T::epsilon() * T::lit(1e3) * total.abs().max(abs_tol) {
                return Ok(Estimate { value: total, error: err });
            }
            return Err(Error::QuadratureNonConvergence {
                a: worst_any.a.as_f64(),
                b: worst_any.b.as_f64(),
                err: worst_any.est.error.as_f64(),
            });
        };
        let s = segments.swap_remove(i);
        let mid = s.a + (s.b - s.a) / T::lit(2.0);
        let left = gauss_kronrod_15(&mut f, s.a, mid)?;
        let right = gauss_kronrod_15(&mut f, mid, s.b)?;
        segments.push(Segment { a: s.a, b: mid, est: left });
        segments.push(Segment { a: mid, b: s.b, est: right });
    }
}

/// Values of `int_{t0}^{t} f` on a grid, with cubic Hermite interpolation
/// between nodes (node slopes are `f` itself).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CumulativeIntegral<T> {
    pub grid: Vec<T>,
    pub values: Vec<T>,
    pub slopes: Vec<T>,
}

pub fn cumulative<T, F>(f: F, t0: T, grid: &[T], rel_tol: T) -> Result<CumulativeIntegral<T>>
where
    T: Real,
    F: FnMut(T) -> Result<T>,
{
    cumulative_with(f, t0, grid, &QuadOptions::with_rel_tol(rel_tol))
}

pub fn cumulative_with<T, F>(mut f: F, t0: T, grid: &[T], opts: &QuadOptions<T>) -> Result<CumulativeIntegral<T>>
where
    T: Real,
    F: FnMut(T) -> Result<T>,
{
    if grid.first() != Some(&t0) {
        return Err(Error::invalid("cumulative grid must start at t0"));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("cumulative grid must be strictly increasing"));
    }
    let mut values = Vec::with_capacity(grid.len());
    let mut slopes = Vec::with_capacity(grid.len());
    let mut acc = T::zero();
    values.push(acc);
    slopes.push(f(t0)?);
    for w in grid.windows(2) {
        acc = acc + integrate_with(&mut f, w[0], w[1], opts)?.value;
        values.push(acc);
        slopes.push(f(w[1])?);
    }
    Ok(CumulativeIntegral { grid: grid.to_vec(), values, slopes })
}

impl<T: Real> CumulativeIntegral<T> {
    pub fn last(&self) -> T {
        *self.values.last().expect("non-empty grid")
    }

    pub fn eval(&self, t: T) -> Result<T> {
        let (lo, hi) = (self.grid[0], *self.grid.last().expect("non-empty grid"));
        if t < lo || t > hi {
            return Err(Error::OutOfDomain { t: t.as_f64(), lo: lo.as_f64(), hi: hi.as_f64() });
        }
        let i = self.grid.partition_point(|&g| g <= t).saturating_sub(1).min(self.grid.len() - 2);
        if self.grid.len() == 1 {
            return Ok(self.values[0]);
        }
        Ok(hermite(
            self.grid[i],
            self.grid[i + 1],
            self.values[i],
            self.values[i + 1],
            self.slopes[i],
            self.slopes[i + 1],
            t,
        ))
    }
}

/// Cubic Hermite interpolant on `[t0, t1]` through `(y0, d0)` and `(y1, d1)`.
pub(crate) fn hermite<T: Real>(t0: T, t1: T, y0: T, y1: T, d0: T, d1: T, t: T) -> T {
    let h = t1 - t0;
    if h == T::zero() {
        return y0;
    }
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let h00 = two * s3 - three * s2 + T::one();
    let h10 = s3 - two * s2 + s;
    let h01 = -two * s3 + three * s2;
    let h11 = s3 - s2;
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VerdictKind {
    Convergent,
    Divergent,
    Inconclusive,
}

impl VerdictKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VerdictKind::Convergent => "Convergent",
            VerdictKind::Divergent => "Divergent",
            VerdictKind::Inconclusive => "Inconclusive",
        }
    }
}

/// Outcome of [`improper`]. `evidence` holds `(horizon end, partial integral)`
/// for every horizon visited.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegralVerdict<T> {
    pub kind: VerdictKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<T>,
    pub evidence: Vec<(T, T)>,
    pub tail_estimate: T,
}

impl<T: Real> IntegralVerdict<T> {
    pub fn is_convergent(&self) -> bool {
        self.kind == VerdictKind::Convergent
    }

    pub fn is_divergent(&self) -> bool {
        self.kind == VerdictKind::Divergent
    }

    pub fn last_horizon(&self) -> T {
        self.evidence.last().map(|e| e.0).unwrap_or_else(T::zero)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImproperPolicy<T> {
    pub t_init: T,
    pub t_max: T,
    pub rel_tol: T,
    /// Relative increment per doubling above which growth counts as divergence.
    pub divergence_threshold: T,
}

impl<T: Real> Default for ImproperPolicy<T> {
    fn default() -> Self {
        Self {
            t_init: T::lit(16.0),
            t_max: T::lit((1u64 << 20) as f64),
            rel_tol: T::tol(1e-8),
            divergence_threshold: T::lit(1e-6),
        }
    }
}

// Increment ratios at or above this count as non-decaying.
const RATIO_DIVERGENT: f64 = 1.0 - 1e-9;
// Ratios at or below this, and stable, count as geometric decay.
const RATIO_CONVERGENT: f64 = 0.98;
const RATIO_SPREAD: f64 = 0.05;

/// Classifies `int_{t0}^{inf} f`.
///
/// Partial integrals are taken over `[t0, t0 + T]` for `T = t_init, 2 t_init,
/// ...` up to `t_max`. With `d_n` the increment of the n-th doubling:
///
/// * Convergent when `|d_n| <= rel_tol |partial|`, or when at `t_max` the last
///   three increment ratios are stable and below one (geometric tail, which is
///   then added to the value);
/// * Divergent when the partial exceeds `1 / rel_tol` with increments of one
///   sign, or when the last three increment ratios are at least one and the
///   relative increment is above `divergence_threshold`;
/// * Inconclusive otherwise.
pub fn improper<T, F>(mut f: F, t0: T, policy: &ImproperPolicy<T>) -> Result<IntegralVerdict<T>>
where
    T: Real,
    F: FnMut(T) -> Result<T>,
{
    if !(policy.t_init > T::zero() && policy.t_init < policy.t_max) {
        return Err(Error::invalid(format!(
            "improper integral needs 0 < t_init < t_max, got {} and {}",
            policy.t_init, policy.t_max
        )));
    }
    let rel_tol = policy.rel_tol.max(T::tol(1e-14));
    let step_rel = (rel_tol * T::lit(1e-2)).max(T::tol(1e-14));
    let mut h = policy.t_init;
    let mut partial = integrate_with(
        &mut f,
        t0,
        t0 + h,
        &QuadOptions { rel_tol: step_rel, abs_tol: T::min_positive_value(), ..QuadOptions::default() },
    )?
    .value;
    let mut evidence = vec![(t0 + h, partial)];
    let mut incs: Vec<T> = Vec::new();

    let verdict = |kind, value, evidence, tail| IntegralVerdict { kind, value, evidence, tail_estimate: tail };

    loop {
        let next = h * T::lit(2.0);
        if next > policy.t_max {
            break;
        }
        let opts = QuadOptions {
            rel_tol: step_rel,
            abs_tol: (step_rel * partial.abs()).max(T::min_positive_value()),
            ..QuadOptions::default()
        };
        let inc = integrate_with(&mut f, t0 + h, t0 + next, &opts)?.value;
        partial = partial + inc;
        incs.push(inc);
        evidence.push((t0 + next, partial));
        h = next;

        if inc.abs() <= rel_tol * partial.abs() {
            let extra = tail_sum(&evidence, &incs);
            let tail = extra.unwrap_or_else(|| inc.abs());
            let value = partial + extra.unwrap_or_else(T::zero);
            return Ok(verdict(VerdictKind::Convergent, Some(value), evidence, tail.abs()));
        }
        let one_signed = same_sign(&incs);
        if one_signed && partial.abs() > rel_tol.recip() {
            return Ok(verdict(VerdictKind::Divergent, None, evidence, T::infinity()));
        }
        if one_signed && non_decaying(&incs) && (inc / partial).abs() > policy.divergence_threshold {
            return Ok(verdict(VerdictKind::Divergent, None, evidence, T::infinity()));
        }
    }

    if incs.len() >= 4 && same_sign(&incs[incs.len() - 4..]) {
        let r = ratios(&incs[incs.len() - 4..]);
        let lo = r.iter().copied().fold(T::infinity(), T::min);
        let hi = r.iter().copied().fold(T::neg_infinity(), T::max);
        if lo > T::zero() && hi <= T::lit(RATIO_CONVERGENT) && hi - lo <= T::lit(RATIO_SPREAD) {
            let tail = tail_sum(&evidence, &incs).unwrap_or_else(T::zero);
            return Ok(verdict(VerdictKind::Convergent, Some(partial + tail), evidence, tail.abs()));
        }
    }
    let tail = incs.last().map(|d| d.abs()).unwrap_or_else(T::infinity);
    Ok(verdict(VerdictKind::Inconclusive, None, evidence, tail))
}

fn same_sign<T: Real>(incs: &[T]) -> bool {
    !incs.is_empty()
        && (incs.iter().all(|&d| d > T::zero()) || incs.iter().all(|&d| d < T::zero()))
}

fn ratios<T: Real>(incs: &[T]) -> Vec<T> {
    incs.windows(2).map(|w| w[1] / w[0]).collect()
}

fn non_decaying<T: Real>(incs: &[T]) -> bool {
    incs.len() >= 4
        && same_sign(&incs[incs.len() - 4..])
        && ratios(&incs[incs.len() - 4..]).iter().all(|&r| r >= T::lit(RATIO_DIVERGENT))
}

/// Estimated remainder beyond the last horizon.
///
/// The last two increments are fitted to `C x^-q` over the last three
/// horizons `x0 < x1 < x2`, giving the remainder `d / ((x2/x1)^q - 1)`. With
/// horizons that double from zero this is the geometric continuation; falls
/// back to it when the fit has no solution.
fn tail_sum<T: Real>(evidence: &[(T, T)], incs: &[T]) -> Option<T> {
    let n = evidence.len();
    if n >= 3 && incs.len() >= 2 {
        let (x0, x1, x2) = (evidence[n - 3].0, evidence[n - 2].0, evidence[n - 1].0);
        let (d1, d2) = (incs[incs.len() - 2], incs[incs.len() - 1]);
        if x0 > T::zero() && d1 != T::zero() {
            if let Some(q) = algebraic_rate(x0, x1, x2, d2 / d1) {
                let grow = (x2 / x1).powf(q) - T::one();
                if grow > T::zero() {
                    return Some(d2 / grow);
                }
            }
        }
    }
    geometric_tail(incs)
}

// Solves (1 - (x1/x2)^q) / ((x1/x0)^q - 1) = rho for q > 0; the left side
// decreases from ln(x2/x1) / ln(x1/x0) to zero.
fn algebraic_rate<T: Real>(x0: T, x1: T, x2: T, rho: T) -> Option<T> {
    let (a, b) = ((x1 / x2).ln(), (x1 / x0).ln());
    let at = |q: T| (-(a * q).exp_m1()) / (b * q).exp_m1();
    if !(rho > T::zero() && rho < -a / b) {
        return None;
    }
    let mut hi = T::one();
    while at(hi) > rho {
        hi = hi * T::lit(2.0);
        if hi > T::lit(1e6) {
            return None;
        }
    }
    let mut lo = T::zero();
    for _ in 0..200 {
        let mid = (lo + hi) * T::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if at(mid) > rho {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some((lo + hi) * T::lit(0.5))
}

/// Sum of the geometric continuation of the increments, when the last ratio
/// lies in (0, 1).
fn geometric_tail<T: Real>(incs: &[T]) -> Option<T> {
    let n = incs.len();
    if n < 2 || incs[n - 2] == T::zero() {
        return None;
    }
    let r = incs[n - 1] / incs[n - 2];
    (r > T::zero() && r < T::one()).then(|| incs[n - 1] * r / (T::one() - r))
}
