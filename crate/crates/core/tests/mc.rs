use heat_content::asymptotics::fit_sqrt_t;
use heat_content::domains::Domain;
use heat_content::mc::{
    estimate_heat_content, estimate_u, estimate_u_and_complement, geometric_ladder, simulate_path, CurveKind,
    SdeConfig,
};
use heat_content::models::{dilate, ModelSpace};
use rand::{Rng, SeedableRng};

fn cfg(n_paths: usize, seed: u64) -> SdeConfig {
    SdeConfig::new(n_paths, seed)
}

#[test]
fn temperatures_obey_the_maximum_principle_and_complement_symmetry() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    for spec in ["interval", "disc", "annulus", "ball", "heis_slab", "heis_halfspace", "grushin_strip", "heis_ball"] {
        let dom = Domain::parse(spec).unwrap();
        for _ in 0..4 {
            let x: Vec<f64> = (0..dom.dim()).map(|_| rng.gen_range(-1.2..1.2)).collect();
            let t = rng.gen_range(1e-4..1e-2);
            let (u, uc) = estimate_u_and_complement(dom.model(), &dom, t, &x, &cfg(500, 3)).unwrap();
            assert!((0.0..=1.0).contains(&u.value), "{spec} {x:?}");
            assert_eq!(u.value + uc.value, 1.0, "{spec} {x:?}");
        }
    }
}

#[test]
fn interior_temperature_localizes() {
    // δ(x) = 0.3 on every domain
    let cases: [(&str, Vec<f64>); 8] = [
        ("interval a=0 b=1", vec![0.3]),
        ("disc R=1", vec![0.7, 0.0]),
        ("annulus R1=0.5 R2=1.5", vec![0.0, 0.8]),
        ("ball R=1", vec![0.0, 0.0, 0.7]),
        ("heis_slab L=2", vec![0.3, 0.5, -0.2]),
        ("heis_halfspace", vec![0.3, 0.0, 0.0]),
        ("grushin_strip a=0 L=1", vec![0.3, 0.1]),
        ("heis_ball R=1", vec![0.7, 0.0, 0.0]),
    ];
    let t = 2.5e-3;
    for (spec, x) in &cases {
        let dom = Domain::parse(spec).unwrap();
        let u = estimate_u(dom.model(), &dom, t, x, &cfg(20_000, 8)).unwrap();
        assert!(1.0 - u.value <= 1e-3, "{spec}: 1 - u = {}", 1.0 - u.value);
    }
}

#[test]
fn halving_the_step_stays_within_noise() {
    // the Heisenberg ball exercises the Lévy-area coupling of the scheme
    let dom = Domain::parse("heis_ball R=1").unwrap();
    let times = [1e-3, 4e-3];
    let coarse = SdeConfig {
        steps_per_t: Some(200),
        ..cfg(100_000, 21)
    };
    let fine = SdeConfig {
        steps_per_t: Some(400),
        ..cfg(100_000, 22)
    };
    let a = estimate_heat_content(dom.model(), &dom, CurveKind::H, None, &times, &coarse).unwrap();
    let b = estimate_heat_content(dom.model(), &dom, CurveKind::H, None, &times, &fine).unwrap();
    for (x, y) in a.estimates.iter().zip(&b.estimates) {
        let s = x.stderr.hypot(y.stderr);
        assert!((x.value - y.value).abs() <= 2.0 * s, "{} vs {} (stderr {s})", x.value, y.value);
    }
}

fn ks_statistic(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn heisenberg_paths_respect_dilations() {
    // δ_{1/√t}(X_t) has the law of X_1 for paths started at the origin
    let h = ModelSpace::heisenberg();
    let n = 4000;
    let c = cfg(n, 77);
    let t = 0.01;
    let small: Vec<Vec<f64>> = (0..n as u64)
        .map(|k| {
            let e = simulate_path(&h, &[0.0; 3], t, &c, k, None).unwrap().endpoint;
            dilate(&h, 1.0 / t.sqrt(), &e).unwrap()
        })
        .collect();
    let unit: Vec<Vec<f64>> = (0..n as u64)
        .map(|k| simulate_path(&h, &[0.0; 3], 1.0, &c, n as u64 + k, None).unwrap().endpoint)
        .collect();
    // two-sample KS critical value at level 10⁻³
    let critical = 1.95 * (2.0 / n as f64).sqrt();
    for axis in 0..3 {
        let d = ks_statistic(small.iter().map(|p| p[axis]).collect(), unit.iter().map(|p| p[axis]).collect());
        assert!(d < critical, "axis {axis}: D = {d}");
    }
    // and X_1 is not distributed like X_{1/4}
    let quarter: Vec<f64> = (0..n as u64)
        .map(|k| simulate_path(&h, &[0.0; 3], 0.25, &c, 2 * n as u64 + k, None).unwrap().endpoint[2])
        .collect();
    assert!(ks_statistic(quarter, unit.iter().map(|p| p[2]).collect()) > critical);
}

#[test]
fn refits_agree_across_seeds_and_null_terms_can_be_dropped() {
    let dom = Domain::parse("disc R=1").unwrap();
    let times = geometric_ladder(2.5e-4, 4e-3, 12).unwrap();
    let pi = std::f64::consts::PI;
    let fits: Vec<_> = [5u64, 6]
        .iter()
        .map(|&s| {
            let c = estimate_heat_content(dom.model(), &dom, CurveKind::H, None, &times, &cfg(100_000, s)).unwrap();
            (
                fit_sqrt_t(&c, &[0.0, 0.5, 1.0, 1.5, 2.0], None, Some(pi)).unwrap(),
                fit_sqrt_t(&c, &[0.0, 0.5, 1.5], None, Some(pi)).unwrap(),
            )
        })
        .collect();
    let (full_a, full_b) = (&fits[0].0, &fits[1].0);
    for i in 1..5 {
        let s = full_a.stderrs[i].hypot(full_b.stderrs[i]);
        assert!((full_a.coefficients[i] - full_b.coefficients[i]).abs() <= 3.0 * s);
    }
    // nested fits of the same data: Var(ĉ_full − ĉ_reduced) = σ²_full − σ²_reduced
    for (full, reduced) in &fits {
        let (c_full, s_full) = full.coefficient(0.5).unwrap();
        let (c_red, s_red) = reduced.coefficient(0.5).unwrap();
        assert!(s_red < s_full);
        let s = (s_full * s_full - s_red * s_red).sqrt();
        assert!((c_full - c_red).abs() <= 3.0 * s, "{c_full} vs {c_red} (stderr {s})");
        assert!((c_red + 2.0 * pi.sqrt()).abs() <= 3.0 * s_red);
    }
}
