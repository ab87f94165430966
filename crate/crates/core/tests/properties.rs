use indefla_core::*;
use num_complex::Complex64;
use proptest::prelude::*;

fn geometry() -> impl Strategy<Value = AnnularGeometry> {
    (0.2f64..2.0, 1.1f64..3.0, 1.1f64..4.0)
        .prop_map(|(r_i, k, l)| AnnularGeometry::new(r_i, r_i * k, r_i * k * l).unwrap())
}

fn complex() -> impl Strategy<Value = Complex64> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| Complex64::new(a, b))
}

/// Geometry together with a support `(a, b)` inside `(r_e, R)`.
fn geometry_with_support() -> impl Strategy<Value = (AnnularGeometry, f64, f64)> {
    (geometry(), 0.0f64..0.8, 0.05f64..1.0).prop_map(|(g, s, w)| {
        let span = g.r_outer() - g.r_e();
        let a = g.r_e() + s * span;
        let b = a + w * (g.r_outer() - a);
        (g, a, b)
    })
}

fn sup_distance(u: &ModeSolution, v: &ModeSolution, r_o: f64) -> (f64, f64) {
    let mut diff: f64 = 0.0;
    let mut size: f64 = 0.0;
    for k in 0..=400 {
        let r = r_o * k as f64 / 400.0;
        let (a, b) = (u.evaluate(r).unwrap(), v.evaluate(r).unwrap());
        diff = diff.max((a - b).norm());
        size = size.max(a.norm()).max(b.norm());
    }
    (diff, size)
}

fn simpson<F: Fn(f64) -> Complex64>(f: F, a: f64, b: f64, n: usize) -> Complex64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * (h / 3.0)
}

proptest! {
    #[test]
    fn weighted_symmetry_and_inverse(g in geometry(), m in -60i64..=60, mu in 0.2f64..4.0) {
        let m = ModeIndex(m);
        let w = [ScaledValue::from_f64(g.r_i()), ScaledValue::from_f64(g.r_e())];
        let d = difference_mode(&g, mu, m);
        for mat in [interior_dtn_mode(&g, m), exterior_dtn_mode(&g, m), d, psi_mode(&g, mu, m)] {
            let (a, b) = (w[0] * mat.entry(0, 1), w[1] * mat.entry(1, 0));
            let scale = a.abs() + b.abs();
            if !scale.is_zero() {
                prop_assert!(((a - b).abs() / scale).to_f64() < 1e-12);
            }
        }
        if let Ok(inv) = invert_difference_mode(&g, mu, m) {
            let p = inv.matmul(&d);
            for i in 0..2 {
                for j in 0..2 {
                    let scale = (inv.entry(i, 0) * d.entry(0, j)).abs() + (inv.entry(i, 1) * d.entry(1, j)).abs();
                    let id = if i == j { ScaledValue::ONE } else { ScaledValue::ZERO };
                    prop_assert!(((p[i][j] - id).abs() / scale).to_f64() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn mode_matrices_depend_on_order_only(g in geometry(), m in 1i64..=60, mu in 0.2f64..4.0) {
        let (p, q) = (theta_mode(&g, mu, ModeIndex(m)), theta_mode(&g, mu, ModeIndex(-m)));
        prop_assert_eq!(p.entries, q.entries);
    }

    #[test]
    fn poisson_maximum_principle(g in geometry(), m in -30i64..=30, pi in complex(), pe in complex()) {
        let tr = TraceModeVector::new(ModeIndex(m), pi, pe);
        let ann = interior_poisson_mode(&g, &tr);
        let (disk, outer) = exterior_poisson_mode(&g, &tr);
        let bound = pi.norm().max(pe.norm()) * (1.0 + 1e-12) + 1e-300;
        for k in 0..=50 {
            let t = k as f64 / 50.0;
            prop_assert!(ann.evaluate(g.r_i() + t * (g.r_e() - g.r_i())).unwrap().norm() <= bound);
            prop_assert!(disk.evaluate(t * g.r_i()).unwrap().norm() <= pi.norm() * (1.0 + 1e-12) + 1e-300);
            prop_assert!(outer.evaluate(g.r_e() + t * (g.r_outer() - g.r_e())).unwrap().norm() <= pe.norm() * (1.0 + 1e-12) + 1e-300);
        }
    }

    #[test]
    fn poisson_linearity(g in geometry(), m in -20i64..=20, a in complex(), b in complex(), alpha in complex()) {
        let m = ModeIndex(m);
        let p1 = interior_poisson_mode(&g, &TraceModeVector::new(m, a, b));
        let p2 = interior_poisson_mode(&g, &TraceModeVector::new(m, b, a));
        let sum = interior_poisson_mode(&g, &TraceModeVector::new(m, a * alpha + b, b * alpha + a));
        for k in 0..=20 {
            let r = g.r_i() + (g.r_e() - g.r_i()) * k as f64 / 20.0;
            let want = p1.evaluate(r).unwrap() * alpha + p2.evaluate(r).unwrap();
            prop_assert!((sum.evaluate(r).unwrap() - want).norm() <= 1e-12 * (1.0 + want.norm()));
        }
    }

    #[test]
    fn verdict_is_scale_invariant(
        (g, a, b) in geometry_with_support(),
        q in 0.0f64..3.0,
        s in 0.3f64..1.5,
        k in 0.1f64..10.0,
    ) {
        let policy = RangePolicy::default();
        let spec = AngularSpectrum::parametric(1.0, q, s);
        let base = range_check(&g, &SourceSpec::new(a, b, spec.clone()), &policy).unwrap();
        let scaled = range_check(&g.scaled(k).unwrap(), &SourceSpec::new(a * k, b * k, spec), &policy).unwrap();
        prop_assert_eq!(base.verdict, scaled.verdict);
        prop_assert!((base.ratio - scaled.ratio).abs() <= 1e-12 * base.ratio.max(1.0));
    }

    #[test]
    fn regularized_linearity(
        (g, a, b) in geometry_with_support(),
        m in -12i64..=12,
        mu in 0.3f64..3.0,
        delta in 0.01f64..1.0,
        h in complex(),
        alpha in complex(),
    ) {
        let c = Contrast::new(mu, delta).unwrap();
        let mi = ModeIndex(m);
        let u = solve_regularized_mode(&g, &c, mi, &SourceSpec::new(a, b, AngularSpectrum::single(m, h))).unwrap();
        let v = solve_regularized_mode(&g, &c, mi, &SourceSpec::new(a, b, AngularSpectrum::single(m, h * alpha))).unwrap();
        for k in 0..=40 {
            let r = g.r_outer() * k as f64 / 40.0;
            let want = u.evaluate(r).unwrap() * alpha;
            prop_assert!((v.evaluate(r).unwrap() - want).norm() <= 1e-10 * (1.0 + want.norm()));
        }
    }

    #[test]
    fn conjugation_symmetry(
        (g, a, b) in geometry_with_support(),
        m in -12i64..=12,
        mu in 0.3f64..3.0,
        delta in 0.01f64..1.0,
        h in -1.0f64..1.0,
    ) {
        let mi = ModeIndex(m);
        let src = SourceSpec::new(a, b, AngularSpectrum::single(m, Complex64::new(h, 0.0)));
        let coefs = [Complex64::new(-mu, delta), Complex64::new(1.0, delta), Complex64::new(-mu, delta)];
        let u = RegularizedModeSystem::assemble_with_coefficients(&g, coefs, mi, &src).solve().unwrap();
        let v = RegularizedModeSystem::assemble_with_coefficients(&g, coefs.map(|c| c.conj()), mi, &src).solve().unwrap();
        let mut size: f64 = 0.0;
        let mut diff: f64 = 0.0;
        for k in 0..=40 {
            let r = g.r_outer() * k as f64 / 40.0;
            let (x, y) = (u.evaluate(r).unwrap(), v.evaluate(r).unwrap());
            size = size.max(x.norm());
            diff = diff.max((x.conj() - y).norm());
        }
        prop_assert!(diff <= 1e-10 * size.max(1e-300));
    }

    #[test]
    fn critical_solution_is_linear(g in geometry(), m in -12i64..=12, h in complex(), alpha in complex()) {
        let (a, b) = (g.critical_radius().max(g.r_e()) * 1.01, g.r_outer());
        prop_assume!(a < b);
        let mi = ModeIndex(m);
        let u = solve_critical_mode(&g, mi, &SourceSpec::new(a, b, AngularSpectrum::single(m, h))).unwrap().solution;
        let v = solve_critical_mode(&g, mi, &SourceSpec::new(a, b, AngularSpectrum::single(m, h * alpha))).unwrap().solution;
        let (diff, size) = sup_distance(&v, &{
            let mut w = u.clone();
            for p in &mut w.pieces {
                p.coef_pos = p.coef_pos * ScaledComplex::new(alpha);
                p.coef_neg = p.coef_neg * ScaledComplex::new(alpha);
                p.coef_log *= alpha;
                p.coef_const *= alpha;
                if let Some(t) = &mut p.source_term {
                    t.h *= alpha;
                }
            }
            w
        }, g.r_outer());
        prop_assert!(diff <= 1e-12 * size.max(1e-300));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Testing the equation against conj(u) r and integrating by parts:
    /// `sum_k c_k int (|u'|^2 + m^2 |u|^2 / r^2) r dr = int_a^b h conj(u) r dr`.
    #[test]
    fn energy_identity(
        (g, a, b) in geometry_with_support(),
        m in -10i64..=10,
        mu in 0.3f64..3.0,
        delta in 0.01f64..1.0,
        h in complex(),
    ) {
        prop_assume!(h.norm() > 1e-3);
        let c = Contrast::new(mu, delta).unwrap();
        let src = SourceSpec::new(a, b, AngularSpectrum::single(m, h));
        let u = solve_regularized_mode(&g, &c, ModeIndex(m), &src).unwrap();
        let coefs = [Complex64::new(-mu, delta), Complex64::new(1.0, delta), Complex64::new(-mu, delta)];
        let lhs: Complex64 = u
            .pieces
            .iter()
            .zip(coefs)
            .map(|(p, ck)| ck * piece_energy(p).gradient)
            .sum();
        let rhs = simpson(|r| h * u.evaluate(r).unwrap().conj() * r, a, b, 4000);
        prop_assert!((lhs - rhs).norm() <= 1e-8 * lhs.norm().max(rhs.norm()), "{lhs} vs {rhs}");
    }

    #[test]
    fn oracle_matches_closed_form(
        (g, a, b) in geometry_with_support(),
        m in -6i64..=6,
        mu in 0.3f64..3.0,
        delta in 0.05f64..1.0,
    ) {
        let c = Contrast::new(mu, delta).unwrap();
        let mi = ModeIndex(m);
        let src = SourceSpec::new(a, b, AngularSpectrum::single(m, Complex64::new(1.0, 0.0)));
        let exact = solve_regularized_mode(&g, &c, mi, &src).unwrap();
        let mut errs = Vec::new();
        let mut size: f64 = 0.0;
        for n in [129, 257] {
            let grid = RadialGrid::new(&g, &src, n).unwrap();
            let fd = fd_transmission_solve(&g, &c, mi, &src, &grid).unwrap();
            let ex = SampledField::from_solution(&exact, &grid).unwrap();
            size = ex.values.iter().map(|v| v.norm()).fold(size, f64::max);
            errs.push(fd.values.iter().zip(&ex.values).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max));
        }
        prop_assert!(errs[1] <= 1e-3 * size, "{errs:?} vs size {size}");
        prop_assert!(errs[1] <= errs[0] / 3.0 || errs[1] <= 1e-12 * size, "{errs:?}");
    }
}

/// Variation of constants with the unscaled fundamental pair, evaluated by
/// quadrature. Valid for moderate `n` only.
fn naive_dirichlet(n: u64, lo: f64, hi: f64, a: f64, b: f64, r: f64) -> f64 {
    let nf = n as f64;
    let (u1, du1, u2, du2): (Box<dyn Fn(f64) -> f64>, Box<dyn Fn(f64) -> f64>, Box<dyn Fn(f64) -> f64>, Box<dyn Fn(f64) -> f64>) =
        if n == 0 {
            (
                Box::new(move |s: f64| (s / lo).ln()),
                Box::new(|s: f64| 1.0 / s),
                Box::new(move |s: f64| (s / hi).ln()),
                Box::new(|s: f64| 1.0 / s),
            )
        } else {
            (
                Box::new(move |s: f64| (s / lo).powf(nf) - (lo / s).powf(nf)),
                Box::new(move |s: f64| nf / s * ((s / lo).powf(nf) + (lo / s).powf(nf))),
                Box::new(move |s: f64| (s / hi).powf(nf) - (hi / s).powf(nf)),
                Box::new(move |s: f64| nf / s * ((s / hi).powf(nf) + (hi / s).powf(nf))),
            )
        };
    let w = r * (u1(r) * du2(r) - du1(r) * u2(r));
    let integ = |f: &dyn Fn(f64) -> f64, x: f64, y: f64| {
        if y <= x {
            return 0.0;
        }
        simpson(|s| Complex64::new(f(s) * s, 0.0), x, y, 2000).re
    };
    let left = integ(&*u1, a.max(lo), b.min(r));
    let right = integ(&*u2, a.max(r), b.min(hi));
    (u2(r) * left + u1(r) * right) / w
}

#[test]
fn dirichlet_solve_matches_variation_of_constants() {
    let g = AnnularGeometry::new(0.7, 1.3, 4.1).unwrap();
    for m in [0, 1, 2, 3, 7] {
        for (a, b) in [(1.3, 4.1), (2.0, 3.0), (1.5, 2.2)] {
            let src = SourceSpec::new(a, b, AngularSpectrum::single(m, Complex64::new(1.0, 0.0)));
            let piece = dirichlet_annulus_solve_mode(&g, ModeIndex(m), &src);
            for k in 1..20 {
                let r = g.r_e() + (g.r_outer() - g.r_e()) * k as f64 / 20.0;
                let want = naive_dirichlet(m as u64, g.r_e(), g.r_outer(), a, b, r);
                let got = piece.evaluate(r).unwrap();
                assert!(
                    (got.re - want).abs() <= 1e-9 * want.abs().max(1e-3) && got.im == 0.0,
                    "m={m} (a,b)=({a},{b}) r={r}: {got} vs {want}"
                );
            }
        }
    }
}
