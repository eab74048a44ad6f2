use flakelayer::microflake::{flake_phase, hg_phase, sggx_matrix, FlakeKind};
use flakelayer::multiscatter::{eval_full, ThreeLobeParams};
use flakelayer::single::eval_stack_single;
use flakelayer::{
    parse_material, serialize_material, LayerSpec, LayerStack, PhaseKind, Spectrum, SubstrateSpec,
    Vec3,
};
use proptest::prelude::*;

fn unit_dir(z_lo: f64, z_hi: f64) -> impl Strategy<Value = Vec3<f64>> {
    (z_lo..z_hi, 0.0..std::f64::consts::TAU).prop_map(|(c, p)| Vec3::from_spherical(c, p))
}

fn any_dir() -> impl Strategy<Value = Vec3<f64>> {
    prop_oneof![unit_dir(0.05, 1.0), unit_dir(-1.0, -0.05)]
}

fn spectrum() -> impl Strategy<Value = Spectrum<f64>> {
    (0.0..=1.0, 0.0..=1.0, 0.0..=1.0).prop_map(|(r, g, b)| Spectrum::new(r, g, b))
}

fn layer() -> impl Strategy<Value = LayerSpec<f64>> {
    (
        prop_oneof![
            Just(PhaseKind::Fiber),
            Just(PhaseKind::Surface),
            Just(PhaseKind::Hg)
        ],
        spectrum(),
        0.05..1.0,
        spectrum(),
        0.1..8.0,
        unit_dir(-1.0, 1.0),
    )
        .prop_map(|(kind, albedo, r, f0, t, o)| {
            let roughness = if kind == PhaseKind::Hg { 1.8 * r - 0.9 } else { r };
            LayerSpec::new(kind, albedo, roughness, f0, t, o)
        })
}

fn stack() -> impl Strategy<Value = LayerStack<f64>> {
    (prop::collection::vec(layer(), 1..4), any::<bool>())
        .prop_map(|(l, d)| LayerStack::new(l, d, SubstrateSpec::None).unwrap())
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + 1e-300
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn flake_phase_is_reciprocal(
        alpha in 0.05..1.0f64,
        o in unit_dir(-1.0, 1.0),
        fiber in any::<bool>(),
        wi in any_dir(),
        wo in any_dir(),
    ) {
        let kind = if fiber { FlakeKind::Fiber } else { FlakeKind::Surface };
        let s = sggx_matrix(kind, alpha, o).unwrap();
        // fp(wi, wo) sigma(wi) is the symmetric quantity
        let a = flake_phase(&s, wi, wo) * flakelayer::microflake::projected_area(&s, wi);
        let b = flake_phase(&s, wo, wi) * flakelayer::microflake::projected_area(&s, wo);
        prop_assert!(close(a, b, 1e-10), "{a} vs {b}");
    }

    #[test]
    fn hg_depends_only_on_the_angle(g in -0.95..0.95f64, wi in any_dir(), wo in any_dir()) {
        prop_assert!(close(hg_phase(g, -wi.dot(wo)), hg_phase(g, -wo.dot(wi)), 1e-14));
    }

    #[test]
    fn single_scattering_is_reciprocal(s in stack(), wi in any_dir(), wo in any_dir()) {
        let a = eval_stack_single(&s, wi, wo);
        let b = eval_stack_single(&s, wo, wi);
        for (x, y) in a.to_array().into_iter().zip(b.to_array()) {
            prop_assert!(close(x, y, 1e-9), "{x} vs {y}");
        }
    }

    #[test]
    fn single_scattering_is_finite_and_non_negative(s in stack(), wi in any_dir(), wo in any_dir()) {
        let v = eval_stack_single(&s, wi, wo);
        prop_assert!(v.is_finite() && v.is_non_negative(), "{v:?}");
    }

    #[test]
    fn full_is_reciprocal_and_dominates_single(
        s in stack(),
        w1 in 0.0..2.0f64,
        w2 in 0.0..1.0f64,
        tweak in 0.2..3.0f64,
        wi in any_dir(),
        wo in any_dir(),
    ) {
        let modified: Vec<_> = s
            .specs()
            .into_iter()
            .map(|mut l| {
                l.thickness *= tweak;
                l
            })
            .collect();
        let p = ThreeLobeParams::new(&s, modified, w1, w2).unwrap();
        let a = eval_full(&s, &p, wi, wo);
        let b = eval_full(&s, &p, wo, wi);
        let single = eval_stack_single(&s, wi, wo);
        for c in 0..3 {
            let (x, y) = (a.to_array()[c], b.to_array()[c]);
            prop_assert!(close(x, y, 1e-9), "{x} vs {y}");
            prop_assert!(x >= single.to_array()[c]);
        }
    }

    #[test]
    fn splitting_a_layer_changes_nothing(
        l in layer(),
        frac in 0.05..0.95f64,
        wi in unit_dir(0.05, 1.0),
        wo in any_dir(),
    ) {
        let whole = LayerStack::single(l).unwrap();
        let (mut a, mut b) = (l, l);
        a.thickness = l.thickness * frac;
        b.thickness = l.thickness - a.thickness;
        let split = LayerStack::new(vec![a, b], false, SubstrateSpec::None).unwrap();
        let x = eval_stack_single(&whole, wi, wo);
        let y = eval_stack_single(&split, wi, wo);
        for (p, q) in x.to_array().into_iter().zip(y.to_array()) {
            prop_assert!(close(p, q, 1e-9), "{p} vs {q}");
        }
    }

    #[test]
    fn rotation_about_the_normal_is_covariant(
        s in stack(),
        angle in 0.0..std::f64::consts::TAU,
        wi in any_dir(),
        wo in any_dir(),
    ) {
        let (sn, cs) = angle.sin_cos();
        let rot = |v: Vec3<f64>| Vec3::new(cs * v.x - sn * v.y, sn * v.x + cs * v.y, v.z);
        let rotated: Vec<_> = s
            .specs()
            .into_iter()
            .map(|mut l| {
                l.orientation = rot(l.orientation);
                l
            })
            .collect();
        let r = LayerStack::new(rotated, s.include_delta(), SubstrateSpec::None).unwrap();
        let a = eval_stack_single(&s, wi, wo);
        let b = eval_stack_single(&r, rot(wi), rot(wo));
        for (p, q) in a.to_array().into_iter().zip(b.to_array()) {
            prop_assert!(close(p, q, 1e-8), "{p} vs {q}");
        }
    }

    #[test]
    fn materials_round_trip(s in stack()) {
        let text = serialize_material(&s);
        let back = parse_material(&text).unwrap();
        prop_assert_eq!(back, s);
    }
}
