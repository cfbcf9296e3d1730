use anisowave::assembly::{assemble_full, build_window, dropped_apply, Domain, DroppedOperator, PatternBuilder};
use anisowave::basis1d::{build_family, inner, scaled_moment, Member1D};
use anisowave::cli::Config;
use anisowave::compression::CompressionParams;
use anisowave::experiments::mapped_box_distance;
use anisowave::index_geometry::{delta, pair_geometry, sigma_x, sigma_y};
use anisowave::kernels::lift;
use anisowave::manifold::{Chart, PatchGeometry, Preset};
use anisowave::quadrature::{entry, QuadratureSpec};
use anisowave::Kernel;
use proptest::prelude::*;

fn member(j: u32, k: u32, t: u8, scaling: bool) -> Member1D {
    if scaling {
        Member1D::scaling(t)
    } else {
        Member1D::wavelet(j, k % (1 << j), t)
    }
}

fn member_strategy(d: usize, jmax: u32) -> impl Strategy<Value = Member1D> {
    (0..=jmax, any::<u32>(), 0..d as u8, prop::bool::weighted(0.15)).prop_map(|(j, k, t, s)| member(j, k, t, s))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gram_and_moments(d in 1usize..=4, seed in any::<u64>()) {
        let fam = build_family(d, 6).unwrap();
        let mut rng = seed;
        let mut next = || { rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); rng >> 33 };
        for _ in 0..8 {
            let a = member((next() % 7) as u32, next() as u32, (next() % d as u64) as u8, next() % 6 == 0);
            let b = member((next() % 7) as u32, next() as u32, (next() % d as u64) as u8, next() % 6 == 0);
            let g = inner(&fam.member(a), &fam.member(b));
            let want = if a == b { 1.0 } else { 0.0 };
            prop_assert!((g - want).abs() < 1e-12, "{a:?} {b:?} {g}");
            if a.kind == anisowave::basis1d::Kind::Wavelet {
                for m in 0..fam.vanishing_moments as u32 {
                    prop_assert!(scaled_moment(&fam.member(a), m).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn distances_are_symmetric(
        ax in member_strategy(2, 6), ay in member_strategy(2, 6),
        bx in member_strategy(2, 6), by in member_strategy(2, 6),
    ) {
        let a = anisowave::index_geometry::MultiIndex::new(0, ax, ay);
        let b = anisowave::index_geometry::MultiIndex::new(0, bx, by);
        let (ga, gb) = (pair_geometry(&a, &b).unwrap(), pair_geometry(&b, &a).unwrap());
        prop_assert_eq!(ga.delta, gb.delta);
        prop_assert!(ga.delta >= 0.0 && ga.delta <= 2f64.sqrt());
        prop_assert!(ga.delta >= ga.dx.max(ga.dy) - 1e-15);
        prop_assert_eq!(ga.delta, delta(&a, &b).unwrap());
        prop_assert!(sigma_x(&a, &b).unwrap() >= 0.0 && sigma_y(&a, &b).unwrap() >= 0.0);
    }

    #[test]
    fn patterns_are_symmetric_and_match_rules(d in 1usize..=2, r in 0u32..8, i in any::<usize>(), j in any::<usize>()) {
        let fam = build_family(d, 3).unwrap();
        let w = build_window(&fam, 3).unwrap();
        let p = CompressionParams::new(d as u32, -0.5, r);
        let pb = PatternBuilder::new(&w, Domain::UnitSquare, p);
        let pattern = pb.build();
        prop_assert!(pattern.is_symmetric());
        let n = w.dim();
        let (i, j) = (i % n, j % n);
        let rule = anisowave::compression::keep_entry(&w.indices[i], &w.indices[j], &p);
        prop_assert_eq!(pb.stage(i, j), rule.stage);
        prop_assert_eq!(pattern.contains(i, j), rule.kept);
        prop_assert!(pattern.contains(i, i));
    }

    #[test]
    fn kernel_ids_round_trip(v in -1.0f64..=1.0) {
        for k in [Kernel::SingleLayer, Kernel::Log, Kernel::Constant, Kernel::PowerLaw { order_2q: v }] {
            prop_assert_eq!(k.id().parse::<Kernel>().unwrap(), k);
        }
    }

    #[test]
    fn config_parser_never_panics(s in "\\PC{0,200}") {
        let _ = Config::parse(&s);
    }

    #[test]
    fn id_parsers_never_panic(s in "\\PC{0,40}") {
        let _ = s.parse::<Kernel>();
        let _ = s.parse::<Preset>();
        let _ = format!("power_law:{s}").parse::<Kernel>();
    }

    #[test]
    fn config_lines_are_reported(n in 0usize..6) {
        let text = format!("{}nonsense\n", "# c\n".repeat(n));
        prop_assert_eq!(Config::parse(&text).unwrap_err().line, Some(n + 1));
    }

    #[test]
    fn kernel_derivatives_within_bound(
        x in prop::array::uniform2(0.0f64..1.0),
        y in prop::array::uniform2(0.0f64..1.0),
        v in -1.0f64..=1.0,
    ) {
        let dist = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
        prop_assume!(dist > 0.05);
        let h = 1e-4 * dist;
        for k in [Kernel::SingleLayer, Kernel::PowerLaw { order_2q: v }, Kernel::Log] {
            let f = |p: [f64; 2]| k.eval(&lift(p), &lift(y)).unwrap();
            for axis in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[axis] += h;
                xm[axis] -= h;
                let d1 = (f(xp) - f(xm)) / (2.0 * h);
                let d2 = (f(xp) - 2.0 * f(x) + f(xm)) / (h * h);
                let b1 = k.decay_bound([1, 0], [0, 0], dist).unwrap();
                let b2 = k.decay_bound([2, 0], [0, 0], dist).unwrap();
                prop_assert!(d1.abs() <= b1 * (1.0 + 1e-6), "{k} d1 {d1} bound {b1}");
                prop_assert!(d2.abs() <= b2 * (1.0 + 1e-3), "{k} d2 {d2} bound {b2}");
            }
        }
    }

    #[test]
    fn chart_distance_within_lipschitz_band(
        s in prop::array::uniform4(0.0f64..1.0),
        t in prop::array::uniform4(0.0f64..1.0),
    ) {
        let g = PatchGeometry::preset(Preset::CylinderPair);
        let ra = [s[0].min(s[1]), s[0].max(s[1]), s[2].min(s[3]), s[2].max(s[3])];
        let rb = [t[0].min(t[1]), t[0].max(t[1]), t[2].min(t[3]), t[2].max(t[3])];
        let chart = anisowave::quadrature::Rect::new(ra[0], ra[1], ra[2], ra[3])
            .dist(&anisowave::quadrature::Rect::new(rb[0], rb[1], rb[2], rb[3]));
        prop_assume!(chart > 1e-6);
        let surface = mapped_box_distance(&g.charts[0], ra, &g.charts[0], rb);
        let ratio = chart / surface;
        prop_assert!(ratio >= 1.0 / g.lipschitz - 1e-9 && ratio <= g.lipschitz + 1e-9, "{ratio}");
    }
}

#[test]
fn dense_route_matches_direct_entries() {
    let spec = QuadratureSpec::default();
    for d in [1, 2] {
        let fam = build_family(d, 2).unwrap();
        let w = build_window(&fam, 2).unwrap();
        let m = assemble_full(&w, Domain::UnitSquare, Kernel::SingleLayer, -0.5, &spec).unwrap();
        let n = w.dim();
        let top = m.get(0, 0).abs();
        for s in 0..40 {
            let (i, j) = ((s * 7919) % n, (s * 104_729 + 3) % n);
            let e = entry(&fam, Kernel::SingleLayer, &w.indices[i], &w.indices[j], -0.5, &spec).unwrap().value;
            assert!((m.get(i, j) - e).abs() <= 1e-9 * top, "d={d} ({i},{j}) {} vs {e}", m.get(i, j));
        }
        assert!(m.max_asymmetry() <= 1e-12 * top);
    }
}

#[test]
fn entries_are_symmetric() {
    let spec = QuadratureSpec::default();
    let fam = build_family(2, 3).unwrap();
    let w = build_window(&fam, 3).unwrap();
    let n = w.dim();
    let top = entry(&fam, Kernel::SingleLayer, &w.indices[0], &w.indices[0], -0.5, &spec).unwrap().value.abs();
    for s in 0..10 {
        let (i, j) = ((s * 131 + 5) % n, (s * 977 + 11) % n);
        let (a, b) = (&w.indices[i], &w.indices[j]);
        let ab = entry(&fam, Kernel::SingleLayer, a, b, -0.5, &spec).unwrap().value;
        let ba = entry(&fam, Kernel::SingleLayer, b, a, -0.5, &spec).unwrap().value;
        assert!((ab - ba).abs() <= 1e-10 * ab.abs().max(1e-3 * top), "{ab} {ba}");
    }
}

#[test]
fn single_flat_patch_is_bit_identical() {
    let spec = QuadratureSpec::default();
    let fam = build_family(2, 2).unwrap();
    let w = build_window(&fam, 2).unwrap();
    let g = PatchGeometry::preset(Preset::UnitSquare);
    let a = assemble_full(&w, Domain::UnitSquare, Kernel::SingleLayer, -0.5, &spec).unwrap();
    let b = assemble_full(&w, Domain::Surface(&g), Kernel::SingleLayer, -0.5, &spec).unwrap();
    assert!(a.data.iter().zip(&b.data).all(|(x, y)| x.to_bits() == y.to_bits()));
    let p = CompressionParams::new(2, -0.5, 2);
    assert_eq!(
        PatternBuilder::new(&w, Domain::UnitSquare, p).build(),
        PatternBuilder::new(&w, Domain::Surface(&g), p).build()
    );
}

#[test]
fn flat_chart_distance_is_exact() {
    let c = Chart::Flat { origin: [0.0; 3], e1: [1.0, 0.0, 0.0], e2: [0.0, 1.0, 0.0] };
    let d = mapped_box_distance(&c, [0.0, 0.25, 0.0, 0.5], &c, [0.5, 1.0, 0.75, 1.0]);
    assert!((d - 0.25f64.hypot(0.25)).abs() < 1e-10);
}

#[test]
fn matrix_free_dropped_apply_matches_dense() {
    let spec = QuadratureSpec::default();
    let fam = build_family(1, 2).unwrap();
    let w = build_window(&fam, 2).unwrap();
    let m = assemble_full(&w, Domain::UnitSquare, Kernel::SingleLayer, -0.5, &spec).unwrap();
    let p = CompressionParams::new(1, -0.5, 2);
    let v = anisowave::analysis::seeded_vector(w.dim(), 9);
    let free = dropped_apply(&w, Domain::UnitSquare, Kernel::SingleLayer, &p, &spec, &v).unwrap();
    let pattern = PatternBuilder::new(&w, Domain::UnitSquare, p).build();
    let dense = DroppedOperator { pattern: &pattern, source: &m }.apply(&v).unwrap();
    let scale = dense.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    assert!(scale > 0.0);
    for (a, b) in free.iter().zip(&dense) {
        assert!((a - b).abs() <= 1e-9 * scale, "{a} {b}");
    }
}
