use proptest::prelude::*;

use klspec::composite::{ClassicalField, ComposingFunction, CompositeModel};
use klspec::gauss::{self, Angular, ChargeFunction, FieldConfiguration, LimitOptions, ProbeFunction};
use klspec::kernels::{self, TestFunction};
use klspec::measures::{etcr_z, Atom, Channel, Density, Extended, SpectralMeasure, Witness};
use klspec::quad::Tolerance;
use klspec::scaling::{self, ScalingOptions, Verdict};

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

fn finite(e: Extended<f64>) -> f64 {
    e.finite().expect("finite total")
}

fn witness() -> Witness<f64> {
    Witness::new(10.0, 2.0)
}

fn atoms_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.1f64..10.0, 0.01f64..5.0), 0..4).prop_map(|mut v| {
        v.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        v.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-6);
        v
    })
}

/// Integrable densities, with the cutoff they need (if any).
fn density_strategy() -> impl Strategy<Value = (Density<f64>, Option<f64>)> {
    prop_oneof![
        Just((Density::Zero, None)),
        (0.01f64..2.0, 0.5f64..5.0, 20.0f64..80.0)
            .prop_map(|(v, th, cut)| (Density::Constant { value: v, threshold: th }, Some(cut))),
        (0.1f64..3.0, -3.0f64..-1.3, 1.0f64..4.0)
            .prop_map(|(c, e, th)| (Density::power_law(c, e, th), None)),
        (0.1f64..3.0, 2.0f64..8.0, 0.1f64..2.0).prop_map(|(c, m, w)| (
            Density::LorentzianResonance { coefficient: c, center: m, width: w, threshold: 0.0 },
            None
        )),
    ]
}

fn measure(atoms: &[(f64, f64)], density: Density<f64>, cutoff: Option<f64>) -> SpectralMeasure<f64> {
    SpectralMeasure::new(
        Channel::Scalar,
        atoms.iter().map(|&(s, w)| Atom::new(s, w)).collect(),
        density,
        cutoff,
        witness(),
    )
    .unwrap()
}

fn measure_strategy() -> impl Strategy<Value = SpectralMeasure<f64>> {
    (atoms_strategy(), density_strategy()).prop_map(|(atoms, (d, cut))| measure(&atoms, d, cut))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decompose_preserves_total(m in measure_strategy(), pick in 0usize..4) {
        let target = m.atoms().get(pick).map_or(1.2345, |a| a.mass2);
        let (z, sigma) = m.decompose(target).unwrap();
        prop_assert!(z >= 0.0);
        let total = finite(m.total_mass(None).unwrap());
        let rest = finite(sigma.total_mass(None).unwrap());
        prop_assert!(close(z + rest, total, 1e-10), "{} + {} vs {}", z, rest, total);
    }

    #[test]
    fn etcr_is_an_algebraic_inverse(sigma in prop_oneof![0.0f64..1.0, 1.0f64..1e3, 1e3f64..1e8]) {
        let z = etcr_z(sigma).unwrap();
        prop_assert!(z > 0.0 && z <= 1.0);
        let back = 1.0 / z - z;
        prop_assert!((back - sigma).abs() <= 1e-12 * sigma.max(1.0), "{} vs {}", back, sigma);
    }

    #[test]
    fn total_mass_additive_and_monotone(
        atoms in atoms_strategy(),
        (d, cut) in density_strategy(),
        l1 in 0.5f64..30.0,
        dl in 0.0f64..30.0,
    ) {
        let whole = measure(&atoms, d.clone(), cut);
        let only_atoms = measure(&atoms, Density::Zero, cut);
        let only_density = measure(&[], d, cut);
        let t = finite(whole.total_mass(None).unwrap());
        let parts = finite(only_atoms.total_mass(None).unwrap()) + finite(only_density.total_mass(None).unwrap());
        prop_assert!(close(t, parts, 1e-10));
        let a = finite(whole.total_mass(Some(l1)).unwrap());
        let b = finite(whole.total_mass(Some(l1 + dl)).unwrap());
        prop_assert!(b >= a - 1e-12 * b.abs());
        prop_assert!(t >= b - 1e-9 * t.abs());
    }

    #[test]
    fn classify_z_independent_of_divergence(atoms in atoms_strategy(), pick in 0usize..4, c in 0.1f64..2.0) {
        let target = atoms.get(pick).map_or(1.2345, |a| a.0);
        let convergent = measure(&atoms, Density::Zero, None);
        let divergent = measure(&atoms, Density::constant(c), None);
        let a = convergent.classify(target, false).unwrap();
        let b = divergent.classify(target, false).unwrap();
        prop_assert_eq!(a.z, b.z);
        prop_assert!(!a.singularity_compatible && b.singularity_compatible);
        prop_assert!(b.forced_z.is_none());
    }
}

fn gaussian_strategy() -> impl Strategy<Value = TestFunction<f64>> {
    (0.0f64..3.0, 0.3f64..2.0, 0.3f64..2.0, -1.0f64..1.0)
        .prop_map(|(a, w0, w, b)| TestFunction::gaussian([a, b, 0.0, 0.0], [w0, w]).unwrap())
}

/// Spatially centred, so the shell integral takes the one-dimensional radial route.
fn centered_strategy() -> impl Strategy<Value = TestFunction<f64>> {
    (0.0f64..3.0, 0.3f64..2.0, 0.3f64..2.0)
        .prop_map(|(a, w0, w)| TestFunction::gaussian([a, 0.0, 0.0, 0.0], [w0, w]).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn smeared_pairing_positive(m in measure_strategy(), f in gaussian_strategy()) {
        let v = kernels::smeared_w(&m, &f, &Tolerance::default()).unwrap();
        prop_assert!(v.value >= 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn smeared_pairing_linear(
        a1 in atoms_strategy(),
        a2 in atoms_strategy(),
        (d, cut) in density_strategy(),
        ca in 0.0f64..3.0,
        cb in 0.0f64..3.0,
        f in centered_strategy(),
    ) {
        // μ₁ carries the density; the sum merges the atoms.
        let cut = cut.map(|c| c.max(10.0));
        let m1 = measure(&a1, d.clone(), cut);
        let m2 = measure(&a2, Density::Zero, cut);
        let mut merged: Vec<(f64, f64)> = a1.iter().map(|&(s, w)| (s, ca * w)).collect();
        for &(s, w) in &a2 {
            match merged.iter_mut().find(|x| x.0 == s) {
                Some(x) => x.1 += cb * w,
                None => merged.push((s, cb * w)),
            }
        }
        let sum = measure(&merged, d.scaled(ca), cut);
        let tol = Tolerance::new(1e-12, 1e-15);
        let w1 = kernels::smeared_w(&m1, &f, &tol).unwrap().value;
        let w2 = kernels::smeared_w(&m2, &f, &tol).unwrap().value;
        let ws = kernels::smeared_w(&sum, &f, &tol).unwrap().value;
        let lin = ca * w1 + cb * w2;
        prop_assert!((ws - lin).abs() <= 1e-10 * lin.abs().max(1e-12), "{} vs {}", ws, lin);
    }

    #[test]
    fn unit_scale_and_massless_law(f in centered_strategy(), lambda in 0.01f64..1.0, m in measure_strategy()) {
        let tol = Tolerance::default();
        prop_assert_eq!(
            kernels::scaled_w(&m, &f, 1.0, &tol).unwrap().value,
            kernels::smeared_w(&m, &f, &tol).unwrap().value
        );
        let massless = SpectralMeasure::free_scalar(0.0).unwrap();
        let w1 = kernels::smeared_w(&massless, &f, &tol).unwrap().value;
        let wl = kernels::scaled_w(&massless, &f, lambda, &tol).unwrap().value;
        prop_assert!(close(wl, w1 / (lambda * lambda), 1e-8));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn scaling_degree_invariant_under_rescaling(m in measure_strategy(), c in 0.01f64..100.0) {
        prop_assume!(!m.atoms().is_empty() || !m.density().is_zero());
        let f = TestFunction::isotropic(1.0, 1.0, 1.0).unwrap();
        let grid = scaling::dyadic_grid::<f64>(8);
        let opts = ScalingOptions { tol: Tolerance::new(1e-11, 1e-300), ..ScalingOptions::default() };
        let a = scaling::estimate_scaling_degree(&m, &f, &grid, &opts).unwrap();
        let b = scaling::estimate_scaling_degree(&m.scaled(c).unwrap(), &f, &grid, &opts).unwrap();
        let (sa, sb) = (a.sd_estimate.unwrap(), b.sd_estimate.unwrap());
        prop_assert!((sa - sb).abs() <= 1e-8, "{} vs {}", sa, sb);
    }

    // λ from 2⁻⁴ to 2⁻¹¹ keeps λ²s small across the generated supports.
    #[test]
    fn finite_mass_is_at_most_free(m in measure_strategy()) {
        prop_assume!(!m.atoms().is_empty() || !m.density().is_zero());
        let f = TestFunction::isotropic(1.0, 1.0, 1.0).unwrap();
        let grid: Vec<f64> = (4..12).map(|k| 2f64.powi(-k)).collect();
        let r = scaling::estimate_scaling_degree(&m, &f, &grid, &ScalingOptions::default()).unwrap();
        prop_assert!(r.sd_estimate.unwrap() <= 2.2, "{:?}", r.sd_estimate);
    }

    // On the unit grid heavy supports are still pre-asymptotic; the fit
    // residual must then withhold a verdict rather than claim more singular.
    #[test]
    fn finite_mass_never_more_singular(m in measure_strategy()) {
        prop_assume!(!m.atoms().is_empty() || !m.density().is_zero());
        let f = TestFunction::isotropic(1.0, 1.0, 1.0).unwrap();
        let r = scaling::estimate_scaling_degree(&m, &f, &scaling::dyadic_grid(8), &ScalingOptions::default()).unwrap();
        prop_assert!(r.verdict != Verdict::StrictlyMoreSingular, "{:?}", r);
    }
}

#[test]
fn denser_grid_moves_estimate_less_than_residual() {
    let m = measure(&[(1.0, 0.7), (4.0, 0.3)], Density::power_law(1.0, -2.0, 2.0), None);
    let f = TestFunction::isotropic(1.0, 1.0, 1.0).unwrap();
    let coarse: Vec<f64> = (0..8).map(|k| 2f64.powi(-k)).collect();
    let fine: Vec<f64> = (0..15).map(|k| 2f64.powf(-0.5 * k as f64)).collect();
    let opts = ScalingOptions::default();
    let a = scaling::estimate_scaling_degree(&m, &f, &coarse, &opts).unwrap();
    let b = scaling::estimate_scaling_degree(&m, &f, &fine, &opts).unwrap();
    let shift = (a.sd_estimate.unwrap() - b.sd_estimate.unwrap()).abs();
    assert!(shift < a.fit_residual.max(b.fit_residual), "shift {shift}, residuals {} {}", a.fit_residual, b.fit_residual);
}

fn tight() -> Tolerance<f64> {
    Tolerance::new(1e-12, 1e-16)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn field_average_linear_in_charge(q1 in -3.0f64..3.0, q2 in -3.0f64..3.0, m in 0.0f64..2.0, r in 0.5f64..20.0, i in 1usize..4) {
        let p = ProbeFunction::new(1.0, 2.0, 0.5, Angular::Dipole { axis: [0.3, -0.5, 0.8] }).unwrap();
        let avg = |q: f64| gauss::average_field(&FieldConfiguration::Yukawa { q, m }, &p, (i, 0), r, &tight()).unwrap();
        let (a, b, s) = (avg(q1), avg(q2), avg(q1 + q2));
        // screened values can sit near the absolute quadrature floor
        let floor = 10.0 * tight().abs * (1.0 + q1.abs() + q2.abs());
        prop_assert!((s - a - b).abs() <= 1e-10 * (a.abs() + b.abs()) + floor, "{} vs {}", s, a + b);
    }

    #[test]
    fn field_average_linear_in_probe(
        u in prop::array::uniform3(-1.0f64..1.0),
        v in prop::array::uniform3(-1.0f64..1.0),
        r in 0.5f64..20.0,
        i in 1usize..4,
    ) {
        let config = FieldConfiguration::Coulomb { q: 1.0 };
        let avg = |axis: [f64; 3]| {
            let p = ProbeFunction::new(1.0, 2.0, 0.5, Angular::Dipole { axis }).unwrap();
            gauss::average_field(&config, &p, (i, 0), r, &tight()).unwrap()
        };
        let w = [u[0] + v[0], u[1] + v[1], u[2] + v[2]];
        let (a, b, s) = (avg(u), avg(v), avg(w));
        prop_assert!((s - a - b).abs() <= 1e-10 * (a.abs() + b.abs()).max(1e-12));
    }

    #[test]
    fn field_average_antisymmetric_and_coordinate_free(
        q in -2.0f64..2.0, m in 0.0f64..1.5, r in 0.5f64..20.0, mu in 0usize..4, nu in 0usize..4,
    ) {
        let p = ProbeFunction::new(1.0, 2.5, 0.5, Angular::Dipole { axis: [0.0, 0.6, 0.8] }).unwrap();
        let config = FieldConfiguration::Yukawa { q, m };
        let a = gauss::average_field(&config, &p, (mu, nu), r, &tight()).unwrap();
        let b = gauss::average_field(&config, &p, (nu, mu), r, &tight()).unwrap();
        prop_assert!((a + b).abs() <= 1e-14);
        let d = gauss::average_field_direct(&config, &p, (mu, nu), r, &tight()).unwrap();
        prop_assert!((a - d).abs() <= 1e-8 * a.abs().max(1e-10), "{} vs {}", a, d);
    }
}

#[test]
fn charge_independent_of_window() {
    let grid: Vec<f64> = (1..=10).map(|k| 2.0 * k as f64).collect();
    let config = FieldConfiguration::Coulomb { q: 1.0 };
    for (c1, c2) in [(1.0, 2.0), (1.0, 3.0), (1.5, 4.0), (0.8, 1.2)] {
        let chi = ChargeFunction::new(c1, c2, 0.5).unwrap();
        let est = gauss::extract_charge(&config, &chi, &grid, &LimitOptions::default()).unwrap();
        assert!((est.charge - 1.0).abs() < 0.01, "[{c1}, {c2}]: {}", est.charge);
    }
}

fn field_strategy() -> impl Strategy<Value = ClassicalField<f64>> {
    prop_oneof![
        (prop::array::uniform4(-2.0f64..2.0), -2.0f64..2.0)
            .prop_map(|(k, amplitude)| ClassicalField::PlaneWave { k, amplitude }),
        (-2.0f64..2.0, prop::array::uniform4(-1.0f64..1.0), prop::array::uniform4(0.3f64..2.0)).prop_map(
            |(amplitude, center, widths)| ClassicalField::GaussianPacket { amplitude, center, widths }
        ),
        Just(ClassicalField::Zero),
    ]
}

fn composing_strategy() -> impl Strategy<Value = ComposingFunction<f64>> {
    prop_oneof![
        (-2.0f64..2.0).prop_map(|a| ComposingFunction::Quadratic { a }),
        prop::collection::vec(-2.0f64..2.0, 4).prop_map(|ys| ComposingFunction::TabulatedSmooth {
            grid: ys.iter().enumerate().map(|(k, &y)| [k as f64 - 1.5, y]).collect(),
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn lagrangian_identities(
        c in field_strategy(),
        a in field_strategy(),
        f in composing_strategy(),
        m_c in 0.0f64..3.0,
        z_c in 0.0f64..2.0,
        x in prop::array::uniform4(-2.0f64..2.0),
        scale in -3.0f64..3.0,
    ) {
        let model = CompositeModel { m_c, m: 1.0, z_c, f: f.clone() };
        let l = model.lagrangian_density(&c, &a, x).unwrap();
        prop_assert_eq!(l.total, l.free + l.interaction);
        prop_assert!(l.interaction >= 0.0);

        let scaled_c = match &c {
            ClassicalField::PlaneWave { k, amplitude } => ClassicalField::PlaneWave { k: *k, amplitude: scale * amplitude },
            ClassicalField::GaussianPacket { amplitude, center, widths } => ClassicalField::GaussianPacket {
                amplitude: scale * amplitude, center: *center, widths: *widths,
            },
            other => other.clone(),
        };
        let scaled = CompositeModel { f: f.scaled(scale).unwrap(), ..model };
        let ls = scaled.lagrangian_density(&scaled_c, &a, x).unwrap();
        let want = scale * scale * l.interaction;
        prop_assert!((ls.interaction - want).abs() <= 1e-12 * want.abs().max(1e-12), "{} vs {}", ls.interaction, want);
    }
}
