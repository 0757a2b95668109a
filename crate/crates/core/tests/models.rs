use heat_content::jets::{ExprField, Field, Jet};
use heat_content::models::{dilate, horizontal_gradient, sublaplacian, ModelSpace};
use heat_content::special::integrate_gl;
use heat_content::Result;
use proptest::prelude::*;

/// `Σ c_k z^α_k` over all monomials of total degree ≤ 2 (coefficients in graded order).
fn quadratic(z: &[Jet], c: &[f64]) -> Result<Jet> {
    let d = z.len();
    let mut acc = z[0].scale(0.0).add_scalar(c[0]);
    let mut k = 1;
    for i in 0..d {
        acc = acc.try_add(&z[i].scale(c[k]))?;
        k += 1;
    }
    for i in 0..d {
        for j in i..d {
            acc = acc.try_add(&z[i].try_mul(&z[j])?.scale(c[k]))?;
            k += 1;
        }
    }
    Ok(acc)
}

fn n_coeffs(d: usize) -> usize {
    1 + d + d * (d + 1) / 2
}

fn models() -> Vec<ModelSpace> {
    vec![ModelSpace::euclid(2).unwrap(), ModelSpace::heisenberg(), ModelSpace::grushin()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn leibniz_rule_holds_pointwise(
        a in prop::collection::vec(-1.0f64..1.0, 10),
        b in prop::collection::vec(-1.0f64..1.0, 10),
        x in prop::collection::vec(-1.5f64..1.5, 3),
    ) {
        for m in models() {
            let d = m.dim();
            let n = n_coeffs(d);
            let z = Jet::coordinates(&x[..d], 2).unwrap();
            let f = quadratic(&z, &a[..n]).unwrap();
            let g = quadratic(&z, &b[..n]).unwrap();
            let lhs = m.sublaplacian_jet(&f.try_mul(&g).unwrap()).unwrap().value();
            let rhs = f.value() * m.sublaplacian_jet(&g).unwrap().value()
                + g.value() * m.sublaplacian_jet(&f).unwrap().value()
                + 2.0 * m.metric_pairing_jet(&f, &g).unwrap().value();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()), "{} {lhs} {rhs}", m.name());
        }
    }

    #[test]
    fn heisenberg_gradient_scales_under_dilation(
        eps in 0.5f64..2.0,
        p in prop::array::uniform3(-1.0f64..1.0),
        c in prop::array::uniform3(-1.0f64..1.0),
    ) {
        let h = ModelSpace::heisenberg();
        let f: Field = ExprField::new("lin", move |z: &[Jet]| {
            Ok(&(&z[0].scale(c[0]) + &z[1].scale(c[1])) + &z[2].scale(c[2]))
        })
        .shared();
        let fe: Field = ExprField::new("lin∘δ", move |z: &[Jet]| {
            Ok(&(&z[0].scale(eps * c[0]) + &z[1].scale(eps * c[1])) + &z[2].scale(eps * eps * c[2]))
        })
        .shared();
        let lhs = horizontal_gradient(&h, &fe, &p).unwrap().norm();
        let rhs = eps * horizontal_gradient(&h, &f, &dilate(&h, eps, &p).unwrap()).unwrap().norm();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs));
    }
}

/// Polynomial bump `q(z)·Π(1 − z_i²)⁴` on `[−1, 1]^d` (C³, vanishing with its gradient
/// on the faces), so `∫ f Δg` is a polynomial integral computed exactly by Gauss–Legendre.
fn bump_field(c: Vec<f64>) -> Field {
    ExprField::new("bump", move |z: &[Jet]| {
        let mut acc = quadratic(z, &c)?;
        for zi in z {
            acc = acc.try_mul(&zi.try_mul(zi)?.scale(-1.0).add_scalar(1.0).powi(4)?)?;
        }
        Ok(acc)
    })
    .shared()
}

fn integrate_box(d: usize, f: &dyn Fn(&[f64]) -> f64) -> f64 {
    let nodes = 16;
    match d {
        2 => integrate_gl(|x| integrate_gl(|y| f(&[x, y]), -1.0, 1.0, nodes, 1), -1.0, 1.0, nodes, 1),
        3 => integrate_gl(
            |x| integrate_gl(|y| integrate_gl(|z| f(&[x, y, z]), -1.0, 1.0, nodes, 1), -1.0, 1.0, nodes, 1),
            -1.0,
            1.0,
            nodes,
            1,
        ),
        _ => unreachable!(),
    }
}

#[test]
fn sublaplacian_is_symmetric_on_compact_fields() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    for m in [ModelSpace::euclid(2).unwrap(), ModelSpace::heisenberg()] {
        let d = m.dim();
        let n = n_coeffs(d);
        for _ in 0..3 {
            let f = bump_field((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let g = bump_field((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let fdg = integrate_box(d, &|x| f.value(x).unwrap() * sublaplacian(&m, &g, x, 1).unwrap());
            let gdf = integrate_box(d, &|x| g.value(x).unwrap() * sublaplacian(&m, &f, x, 1).unwrap());
            assert!((fdg - gdf).abs() <= 1e-10 * (1.0 + fdg.abs()), "{}: {fdg} vs {gdf}", m.name());
        }
    }
}
