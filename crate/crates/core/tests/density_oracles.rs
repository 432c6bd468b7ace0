use densel_core::density::{
    hellinger_sq, l2_dist, l2_dist_sq, make_stheta, project_bounded, project_bounded_with_shift,
    projection_bound_factor, sample, sup_norm, tail_q, tau_map,
};
use densel_core::{PiecewiseDensity, RngStream, StepFunction};
use proptest::prelude::*;

/// Midpoint rule on `m` equal cells; exact for step functions whose
/// breakpoints lie on the grid `j/m`.
fn midpoint(f: impl Fn(f64) -> f64, m: usize) -> f64 {
    let h = 1.0 / m as f64;
    let mut acc = 0.0;
    for i in 0..m {
        acc += f((i as f64 + 0.5) * h);
    }
    acc * h
}

/// Step density with breakpoints on multiples of 1/1000.
fn thousandth_density(cuts: &[usize], values: &[f64]) -> PiecewiseDensity {
    let mut bp = vec![0.0];
    bp.extend(cuts.iter().map(|&c| c as f64 / 1000.0));
    bp.push(1.0);
    let f = StepFunction::new(bp, values.to_vec()).unwrap();
    let total = f.integral();
    PiecewiseDensity::validate(f.scale(1.0 / total)).unwrap()
}

/// Shift solving `Σ l_j clamp(v_j + g, 0, Γ) = 1` by bisection.
fn bisection_shift(s: &StepFunction, gamma: f64) -> f64 {
    let lengths = s.cell_lengths();
    let mass = |g: f64| -> f64 {
        lengths.iter().zip(s.values()).map(|(l, v)| l * (v + g).clamp(0.0, gamma)).sum()
    };
    let (mut lo, mut hi) = (-s.sup(), gamma - s.inf());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn metrics_match_midpoint_oracle() {
    let s = thousandth_density(&[50, 333, 600, 999], &[9.0, 0.2, 1.3, 0.7, 40.0]);
    let t = thousandth_density(&[120, 500, 501], &[0.1, 2.0, 25.0, 0.9]);
    let m = 1_000_000;
    let d2 = midpoint(|x| (s.eval(x) - t.eval(x)).powi(2), m);
    let h2 = 0.5 * midpoint(|x| (s.eval(x).sqrt() - t.eval(x).sqrt()).powi(2), m);
    let q = midpoint(|x| (s.eval(x) - 3.0).max(0.0).powi(2), m);
    assert!((l2_dist_sq(&s, &t) - d2).abs() < 1e-9 * d2.max(1.0));
    assert!((hellinger_sq(&s, &t) - h2).abs() < 1e-9);
    assert!((tail_q(&s, 3.0) - q).abs() < 1e-9 * q.max(1.0));
}

#[test]
fn hellinger_uniform_block() {
    let h2 = hellinger_sq(&PiecewiseDensity::uniform(), &PiecewiseDensity::block(0.5).unwrap());
    assert!((h2 - (1.0 - std::f64::consts::FRAC_1_SQRT_2)).abs() < 1e-15);
}

#[test]
fn spike_projection_against_bisection() {
    let s = PiecewiseDensity::new(vec![0.0, 0.05, 1.0], vec![10.0, 0.5 / 0.95]).unwrap();
    let oracle = bisection_shift(&s, 3.0);
    let (p, g) = project_bounded_with_shift(&s, 3.0).unwrap();
    assert!((g - oracle).abs() < 1e-12);
    // frozen: 7/19 and 49/19
    assert!((oracle - 0.368_421_052_631_578_9).abs() < 1e-12);
    assert!((l2_dist_sq(&s, &p) - 2.578_947_368_421_052_5).abs() < 1e-12);
    assert!((projection_bound_factor(3.0) * tail_q(&s, 3.0) - 4.083_333_333_333_333).abs() < 1e-12);
}

#[test]
fn projection_shift_against_bisection_on_many_inputs() {
    let cases: [(&[usize], &[f64], f64); 4] = [
        (&[10, 20, 30], &[50.0, 0.0, 7.0, 0.3], 2.5),
        (&[500], &[1.5, 0.5], 3.0),
        (&[1, 998], &[300.0, 0.8, 100.0], 10.0),
        (&[250, 500, 750], &[4.0, 0.0, 0.0, 6.0], 5.0),
    ];
    for (cuts, values, gamma) in cases {
        let s = thousandth_density(cuts, values);
        let (p, g) = project_bounded_with_shift(&s, gamma).unwrap();
        if s.sup() > gamma {
            assert!((g - bisection_shift(&s, gamma)).abs() < 1e-10, "{cuts:?} {gamma}");
        }
        assert!(sup_norm(&p) <= gamma + 1e-12);
        assert!((p.integral() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn stheta_distances_match_closed_forms() {
    // s_θ has mass θ on [0, θ³]; compare against direct piecewise formulas
    for &(a, b) in &[(0.1, 0.2), (0.3, 1.0 / 3.0), (0.01, 0.25)] {
        let (sa, sb) = (make_stheta(a).unwrap(), make_stheta(b).unwrap());
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let (ha, hb) = (lo.powi(-2), hi.powi(-2));
        let (ta, tb) = (1.0 / (lo * lo + lo + 1.0), 1.0 / (hi * hi + hi + 1.0));
        let (x1, x2) = (lo.powi(3), hi.powi(3));
        let d2 = x1 * (ha - hb).powi(2) + (x2 - x1) * (ta - hb).powi(2) + (1.0 - x2) * (ta - tb).powi(2);
        let root = |u: f64, v: f64| (u.sqrt() - v.sqrt()).powi(2);
        let h2 = 0.5 * (x1 * root(ha, hb) + (x2 - x1) * root(ta, hb) + (1.0 - x2) * root(ta, tb));
        assert!((l2_dist_sq(&sa, &sb) - d2).abs() < 1e-12 * d2.max(1.0));
        assert!((hellinger_sq(&sa, &sb) - h2).abs() < 1e-12);
        assert!((sa.integral() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn stheta_l2_blows_up() {
    let far = make_stheta(1.0 / 3.0).unwrap();
    let dists: Vec<f64> = (1..=6).map(|e| l2_dist(&make_stheta(10f64.powi(-e)).unwrap(), &far)).collect();
    assert!(dists.windows(2).all(|w| w[1] > w[0] * 3.0));
    // Hellinger stays bounded by 1
    assert!(hellinger_sq(&make_stheta(1e-6).unwrap(), &far) < 1.0);
}

#[test]
fn sampler_passes_ks() {
    let s = PiecewiseDensity::new(vec![0.0, 0.1, 0.15, 0.7, 1.0], vec![3.0, 0.0, 1.0, 0.5]).unwrap();
    let n = 20_000;
    let x = sample(&s, n, &mut RngStream::new(11, 0));
    let mut obs = x.observations.clone();
    obs.sort_by(f64::total_cmp);
    let mut ks: f64 = 0.0;
    for (i, &o) in obs.iter().enumerate() {
        let f = s.cdf(o);
        ks = ks.max((f - i as f64 / n as f64).abs()).max(((i + 1) as f64 / n as f64 - f).abs());
    }
    // 1% critical value
    assert!(ks < 1.63 / (n as f64).sqrt(), "ks = {ks}");
    // no draw lands in the zero cell
    assert!(obs.iter().all(|&o| !(o > 0.1 && o < 0.15)));
}

#[test]
fn tau_scales_distances() {
    let t = PiecewiseDensity::block(0.25).unwrap();
    let u = PiecewiseDensity::uniform();
    let lam = 0.995;
    let d = l2_dist(&tau_map(&t, lam).unwrap(), &tau_map(&u, lam).unwrap());
    assert!((d - lam * l2_dist(&t, &u)).abs() < 1e-14);
}

fn density_strategy() -> impl Strategy<Value = PiecewiseDensity> {
    prop::collection::vec((1usize..999, 0.0f64..30.0), 0..20).prop_flat_map(|cuts| {
        let mut c: Vec<usize> = cuts.iter().map(|(c, _)| *c).collect();
        c.sort_unstable();
        c.dedup();
        let k = c.len() + 1;
        (Just(c), prop::collection::vec(0.0f64..30.0, k)).prop_filter_map("zero mass", |(c, mut v)| {
            v[0] += 0.01;
            Some(thousandth_density(&c, &v))
        })
    })
}

fn gamma_strategy() -> impl Strategy<Value = f64> {
    prop::sample::select(vec![1.5, 2.5, 3.0, 5.0, 10.0])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn projection_lands_in_set(s in density_strategy(), g in gamma_strategy()) {
        let p = project_bounded(&s, g).unwrap();
        prop_assert!(sup_norm(&p) <= g + 1e-12);
        prop_assert!(p.inf() >= 0.0);
        prop_assert!((p.integral() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn projection_idempotent(s in density_strategy(), g in gamma_strategy()) {
        let p = project_bounded(&s, g).unwrap();
        prop_assert_eq!(project_bounded(&p, g).unwrap(), p);
    }

    #[test]
    fn projection_non_expansive(s in density_strategy(), t in density_strategy(), g in gamma_strategy()) {
        let (ps, pt) = (project_bounded(&s, g).unwrap(), project_bounded(&t, g).unwrap());
        prop_assert!(l2_dist(&ps, &pt) <= l2_dist(&s, &t) * (1.0 + 1e-12) + 1e-13);
    }

    #[test]
    fn projection_ignores_constant_shift(s in density_strategy(), c in -5.0f64..5.0, g in gamma_strategy()) {
        let p = project_bounded(&s, g).unwrap();
        let q = project_bounded(&s.map(|v| v + c), g).unwrap();
        prop_assert!(l2_dist(&p, &q) < 1e-10);
    }

    #[test]
    fn projection_error_bound(s in density_strategy(), g in prop::sample::select(vec![2.5, 3.0, 5.0, 10.0])) {
        let p = project_bounded(&s, g).unwrap();
        let lhs = l2_dist_sq(&s, &p);
        let rhs = projection_bound_factor(g) * tail_q(&s, g);
        prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-15, "{} > {}", lhs, rhs);
    }

    #[test]
    fn tail_q_monotone_convex(s in density_strategy()) {
        let z: Vec<f64> = (0..60).map(|i| i as f64 * 0.5).collect();
        let q: Vec<f64> = z.iter().map(|&z| tail_q(&s, z)).collect();
        for w in q.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
        for w in q.windows(3) {
            prop_assert!(w[0] + w[2] - 2.0 * w[1] >= -1e-9);
        }
    }

    #[test]
    fn hellinger_bounded_by_l1(s in density_strategy(), t in density_strategy()) {
        let h2 = hellinger_sq(&s, &t);
        let l1 = midpoint(|x| (s.eval(x) - t.eval(x)).abs(), 1000);
        prop_assert!((0.0..=1.0).contains(&h2));
        prop_assert!(h2 <= 0.5 * l1 + 1e-12);
    }
}
