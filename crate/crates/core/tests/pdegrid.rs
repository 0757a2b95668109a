use heat_content::domains::Domain;
use heat_content::kernels::interval_heat_content;
use heat_content::mc::{estimate_heat_content, CurveKind, SdeConfig};
use heat_content::pdegrid::{solve_heat, GridSpec};

#[test]
fn interval_content_converges_at_second_order() {
    let dom = Domain::parse("interval a=0 b=1").unwrap();
    let t = 1e-3;
    // walls on cell faces so every refinement sees the same sub-cell geometry
    let errs: Vec<f64> = [500usize, 1000, 2000]
        .iter()
        .map(|&n| {
            let spec = GridSpec {
                lo: vec![-0.5],
                hi: vec![1.5],
                cells: vec![n],
                ..GridSpec::for_domain(&dom, t, 2.0 / n as f64, 2.5e-8).unwrap()
            };
            let sol = solve_heat(dom.model(), &dom, &spec, &[t], None).unwrap();
            (sol.h.estimates[0].value - interval_heat_content(t, 1.0)).abs()
        })
        .collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.5..=4.5).contains(&ratio), "{errs:?}");
    }
}

#[test]
fn grushin_strip_grid_matches_monte_carlo() {
    let dom = Domain::parse("grushin_strip a=0.5 L=1").unwrap();
    let times = [1e-3, 4e-3];
    let solve = |h: f64| {
        let spec = GridSpec::for_domain(&dom, times[1], h, 1e-5).unwrap();
        let sol = solve_heat(dom.model(), &dom, &spec, &times, None).unwrap();
        assert!(sol.state.iter().all(|v| (-1e-14..=1.0 + 1e-14).contains(v)));
        assert!(sol.max_leakage() < 1e-6);
        sol.h.values()
    };
    let (coarse, fine) = (solve(2e-2), solve(1e-2));
    let mc = estimate_heat_content(dom.model(), &dom, CurveKind::H, None, &times, &SdeConfig::new(100_000, 31)).unwrap();
    for i in 0..times.len() {
        // Richardson estimate of the O(h²) error of the fine grid
        let grid_err = (coarse[i] - fine[i]).abs() / 3.0;
        let e = mc.estimates[i];
        assert!(
            (fine[i] - e.value).abs() <= 3.0 * e.stderr + grid_err,
            "t={}: grid {} mc {} ± {} (grid error {grid_err})",
            times[i],
            fine[i],
            e.value,
            e.stderr
        );
    }
}
