use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rh_core::expr::CoefficientFn;
use rh_core::harvest::separation_integral;
use rh_core::periodic::{floquet_integral, MapValue, PeriodicProblem, FIXED_POINT_TOL};
use rh_core::quad::ImproperPolicy;
use rh_core::Coef;
use std::f64::consts::PI;

fn c(src: &str) -> Coef<f64> {
    CoefficientFn::parse(src).unwrap().shared()
}

fn sinusoidal() -> PeriodicProblem<f64> {
    PeriodicProblem::new(c("1 + 0.5*sin(2*pi*t)"), c("1/4"), 1.0).unwrap()
}

// Fixed-step RK4 return map of z' = (1 + 0.5 sin 2 pi t) z - z^2 - k/4.
fn rk4_return(k: f64, z0: f64) -> f64 {
    let f = |t: f64, z: f64| (1.0 + 0.5 * (2.0 * PI * t).sin()) * z - z * z - 0.25 * k;
    let n = 400;
    let h = 1.0 / n as f64;
    let mut z = z0;
    for i in 0..n {
        let t = i as f64 * h;
        let k1 = f(t, z);
        let k2 = f(t + h / 2.0, z + h / 2.0 * k1);
        let k3 = f(t + h / 2.0, z + h / 2.0 * k2);
        let k4 = f(t + h, z + h * k3);
        z += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    z
}

// Largest P(z) - z over z in [0.1, 1.5]: grid then two local refinements.
fn brute_peak(k: f64) -> f64 {
    let g = |z: f64| rk4_return(k, z) - z;
    let mut best = (0.1, g(0.1));
    for i in 0..=70 {
        let z = 0.1 + 0.02 * i as f64;
        let v = g(z);
        if v > best.1 {
            best = (z, v);
        }
    }
    for width in [0.02, 0.001] {
        let centre = best.0;
        for i in -20..=20 {
            let z = centre + width * i as f64 / 20.0;
            let v = g(z);
            if v > best.1 {
                best = (z, v);
            }
        }
    }
    best.1
}

fn brute_turning_point() -> f64 {
    let mut k = 0.0;
    while brute_peak(k + 0.01) > 0.0 {
        k += 0.01;
    }
    while brute_peak(k + 2.5e-4) > 0.0 {
        k += 2.5e-4;
    }
    k + 1.25e-4
}

#[test]
fn poincare_map_preserves_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut violations = 0;
    let mut compared = 0;
    for _ in 0..40 {
        let eps: f64 = rng.gen_range(0.0..0.8);
        let k: f64 = rng.gen_range(0.0..1.2);
        let p = PeriodicProblem::new(c(&format!("1 + {eps}*sin(2*pi*t)")), c("1/4"), 1.0).unwrap();
        for _ in 0..5 {
            let x: f64 = rng.gen_range(-0.2..2.0);
            let y: f64 = rng.gen_range(-0.2..2.0);
            let (za, zb) = if x < y { (x, y) } else { (y, x) };
            if zb - za < 1e-6 {
                continue;
            }
            if let (MapValue::Value { z: pa }, MapValue::Value { z: pb }) =
                (p.poincare(k, za).unwrap(), p.poincare(k, zb).unwrap())
            {
                compared += 1;
                if pa >= pb {
                    violations += 1;
                }
            }
        }
    }
    assert!(compared > 100, "{compared}");
    assert_eq!(violations, 0);
}

#[test]
fn sinusoidal_turning_point_matches_scan() {
    let p = sinusoidal();
    let tp = p.turning_point(1e-6, None, &p.default_scan().unwrap()).unwrap();
    let oracle = brute_turning_point();
    assert!(tp.k_bar > 0.0 && tp.k_bar < 1.0, "{tp:?}");
    assert!((tp.k_bar - oracle).abs() <= 1e-3, "{} vs {oracle}", tp.k_bar);
}

#[test]
fn sinusoidal_branches_are_ordered_and_merge() {
    let p = sinusoidal();
    let ks: Vec<f64> = (1..=30).map(|i| 0.05 * i as f64).collect();
    let d = p.branch_diagram(&ks, &p.default_scan().unwrap(), 1e-6).unwrap();
    let mut pairs = Vec::new();
    for (i, &k) in ks.iter().enumerate() {
        if let (Some(lo), Some(up)) = (d.lower[i], d.upper[i]) {
            assert!(lo < up, "k = {k}: {lo} >= {up}");
            pairs.push((k, lo, up));
        }
    }
    assert!(pairs.len() >= 10, "{pairs:?}");
    for w in pairs.windows(2) {
        assert!(w[1].2 < w[0].2 && w[1].1 > w[0].1, "{w:?}");
    }
    let first_gap = pairs[0].2 - pairs[0].1;
    let last_gap = pairs.last().map(|q| q.2 - q.1).unwrap();
    assert!(last_gap < 0.5 * first_gap, "{first_gap} {last_gap}");
    let (kb, z) = d.turning_point.unwrap();
    let last = pairs.last().unwrap();
    assert!(kb >= last.0 && kb < last.0 + 0.05 + 1e-9, "{kb}");
    assert!(z > last.1 && z < last.2, "{z} {last:?}");
    assert!(d.first_none.unwrap() > kb);
}

#[test]
fn floquet_signs_along_branches() {
    let p = sinusoidal();
    let scan = p.default_scan().unwrap();
    for k in [0.1, 0.3, 0.5, 0.6] {
        let fp = p.fixed_points(k, &scan).unwrap();
        assert_eq!(fp.solutions.len(), 2, "k = {k}");
        assert!(floquet_integral(&p.a, &fp.solutions[0]).unwrap() > 0.0, "k = {k}");
        assert!(floquet_integral(&p.a, &fp.solutions[1]).unwrap() < 0.0, "k = {k}");
    }
    let tp = p.turning_point(1e-9, None, &scan).unwrap();
    assert!(floquet_integral(&p.a, &tp.solution).unwrap().abs() <= 1e-3);
}

#[test]
fn upper_branch_returns_after_five_periods() {
    let p = sinusoidal();
    let scan = p.default_scan().unwrap();
    for k in [0.0, 0.2, 0.4, 0.6] {
        let fp = p.fixed_points(k, &scan).unwrap();
        let up = fp.solutions.last().unwrap();
        assert!(up.residual <= FIXED_POINT_TOL);
        assert!(up.drift(&p, 5).unwrap() <= 5.0 * FIXED_POINT_TOL, "k = {k}");
    }
}

#[test]
fn turning_solution_is_separated() {
    let p = PeriodicProblem::new(c("2 + cos(2*pi*t)"), c("1 + 0.25*sin(2*pi*t)"), 1.0).unwrap();
    let tp = p.turning_point(1e-9, None, &p.default_scan().unwrap()).unwrap();
    let v = separation_integral(p.a.clone(), &tp.solution.particular(), &ImproperPolicy::default()).unwrap();
    assert!(v.is_divergent(), "{v:?}");
}
