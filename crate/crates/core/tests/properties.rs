use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;

use nalab_core::geometry::{cutoff, extract_contour, hausdorff, region_areas, signed_distance_raw, Contour};
use nalab_core::grid::Grid2D;
use nalab_core::harness::{circle_contour, config_hash, StudySetup};
use nalab_core::interface::{radial_evolve, LevelSetState};
use nalab_core::profile::{build_profile, intrinsic_c0, ode_flow, wave_c0};
use nalab_core::{analyze_nonlinearity, AnalysisOptions, BistableModel, PolynomialNonlinearity};

fn cubic(coupling: f64) -> BistableModel {
    analyze_nonlinearity(
        Arc::new(PolynomialNonlinearity::cubic().with_coupling(coupling)),
        AnalysisOptions::default(),
    )
    .unwrap()
}

fn ellipse_contour(c: [f64; 2], a: f64, b: f64, n: usize) -> Contour {
    let pts = (0..n)
        .map(|k| {
            let th = 2.0 * PI * k as f64 / n as f64;
            [c[0] + a * th.cos(), c[1] + b * th.sin()]
        })
        .collect();
    Contour { level: 0.0, loops: vec![pts], open: Vec::new() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn flow_increases_in_data_and_forcing(
        xi in -2.0f64..2.0,
        gap in 1e-3f64..0.5,
        frac in -1.0f64..1.0,
        dfrac in 0.0f64..0.5,
        tau in 0.05f64..4.0,
    ) {
        let m = cubic(-1.0);
        let delta = frac * m.delta0;
        let lo = ode_flow(&m, tau, xi, delta).unwrap();
        let hi = ode_flow(&m, tau, xi + gap, delta).unwrap();
        prop_assert!(hi.y > lo.y);
        prop_assert!(lo.y_xi > 0.0);
        let d2 = (delta + dfrac * m.delta0).min(m.delta0);
        let pushed = ode_flow(&m, tau, xi, d2).unwrap();
        prop_assert!(pushed.y >= lo.y);
    }

    #[test]
    fn flow_stays_in_twice_the_data_bound(
        c0 in 1.0f64..3.0,
        frac in -1.0f64..1.0,
        dfrac in -1.0f64..1.0,
        tau in 0.0f64..6.0,
    ) {
        let m = cubic(-1.0);
        let y = ode_flow(&m, tau, 2.0 * c0 * frac, dfrac * m.delta0).unwrap();
        prop_assert!(y.y.abs() <= 2.0 * c0);
    }

    #[test]
    fn flow_curvature_ratio_vanishes_at_start(xi in -1.5f64..1.5, frac in -1.0f64..1.0) {
        let m = cubic(-1.0);
        let y = ode_flow(&m, 1e-6, xi, frac * m.delta0).unwrap();
        prop_assert!(y.ratio.abs() < 1e-4);
        prop_assert!((y.y_xi - 1.0).abs() < 1e-5);
    }

    #[test]
    fn speed_positive_for_negative_coupling(coupling in -3.0f64..-0.05) {
        let m = cubic(coupling);
        let p = build_profile(&m, None, 2001).unwrap();
        prop_assert!(wave_c0(&m, &p.wave) > 0.0);
        prop_assert!(intrinsic_c0(&m) > 0.0);
        prop_assert!((p.c0() - 3.0 / 2f64.sqrt() * -coupling).abs() < 1e-6 * -coupling);
    }

    #[test]
    fn cutoff_monotone_and_clamped(s in -1.0f64..1.0, ds in 0.0f64..0.2, d0 in 0.01f64..0.3) {
        let a = cutoff(s, d0);
        let b = cutoff(s + ds, d0);
        prop_assert!(b >= a - 1e-15);
        prop_assert!(a.abs() <= 2.0 * d0 + 1e-15);
        if s.abs() <= d0 {
            prop_assert_eq!(a, s);
        }
        prop_assert_eq!(cutoff(-s, d0), -a);
    }

    #[test]
    fn hausdorff_symmetric_and_triangular(
        c in proptest::array::uniform6(0.35f64..0.65),
        r in proptest::array::uniform3(0.05f64..0.3),
    ) {
        let a = circle_contour([c[0], c[1]], r[0], 0.01, 0.0);
        let b = ellipse_contour([c[2], c[3]], r[1], 0.5 * (r[1] + r[2]), 200);
        let e = circle_contour([c[4], c[5]], r[2], 0.01, 0.0);
        let ab = hausdorff(&a, &b, 0.005).unwrap();
        let ba = hausdorff(&b, &a, 0.005).unwrap();
        let ae = hausdorff(&a, &e, 0.005).unwrap();
        let be = hausdorff(&b, &e, 0.005).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
        // sampling at spacing s loses at most s/2 on each term
        prop_assert!(ae <= ab + be + 0.01);
        prop_assert!(hausdorff(&a, &a, 0.005).unwrap() < 1e-12);
    }

    #[test]
    fn shoelace_matches_pixel_count(
        cx in 0.4f64..0.6, cy in 0.4f64..0.6, a in 0.1f64..0.3, b in 0.1f64..0.3,
    ) {
        let g = Grid2D::unit(129).unwrap();
        let vals = g.sample(|x, y| ((x - cx) / a).powi(2) + ((y - cy) / b).powi(2) - 1.0);
        let contour = extract_contour(&g, &vals, 0.0).unwrap();
        let areas = region_areas(&contour, 1.0).unwrap();
        let pixels = vals.iter().enumerate().filter(|(_, v)| **v < 0.0).count() as f64 * g.hx * g.hy;
        let h = g.h_max();
        prop_assert!((areas.area_minus - pixels).abs() <= h * contour.length());
        // chord sag and interpolation bias both scale like h^2 / radius
        prop_assert!((areas.area_minus - PI * a * b).abs() <= 2.0 * h * h * contour.length() / a.min(b));
    }

    #[test]
    fn distance_of_extracted_tanh_contour(
        cx in 0.4f64..0.6, cy in 0.4f64..0.6, r in 0.15f64..0.3, w in 0.02f64..0.08,
    ) {
        let g = Grid2D::unit(101).unwrap();
        let vals = g.sample(|x, y| (((x - cx).hypot(y - cy) - r) / w).tanh());
        let contour = extract_contour(&g, &vals, 0.0).unwrap();
        let d = signed_distance_raw(&contour, &g);
        let h = g.h_max();
        for (k, dk) in d.iter().enumerate() {
            let (x, y) = (g.x(k % g.nx), g.y(k / g.nx));
            let exact = (x - cx).hypot(y - cy) - r;
            if exact.abs() < 0.1 {
                prop_assert!((dk - exact).abs() <= h, "{} vs {}", dk, exact);
            }
        }
    }

    #[test]
    fn forcing_expands_the_minus_phase(r0 in 0.1f64..0.39, c0 in 0.1f64..3.0) {
        // gamma = 1 - 2 pi R^2 > 0 below R = (2 pi)^{-1/2}
        let t_end = 0.3 * r0 * r0;
        let forced = radial_evolve(r0, c0, 1.0, t_end, t_end / 200.0, 0.5).unwrap();
        let free = radial_evolve(r0, 0.0, 1.0, t_end, t_end / 200.0, 0.5).unwrap();
        for (a, b) in forced.r.iter().zip(&free.r).skip(1) {
            prop_assert!(a > b);
        }
    }

    #[test]
    fn reinitialization_keeps_the_zero_set(scale in 0.3f64..4.0, r in 0.15f64..0.35) {
        let g = Grid2D::unit(81).unwrap();
        let phi = g.sample(|x, y| scale * ((x - 0.5).hypot(y - 0.5) - r));
        let mut state = LevelSetState::new(g, phi, 0.0).unwrap();
        let before = state.contour().unwrap();
        state.reinitialize().unwrap();
        let after = state.contour().unwrap();
        prop_assert!(hausdorff(&before, &after, 0.25 * g.h_min()).unwrap() <= 0.1 * g.h_max());
    }

    #[test]
    fn config_hash_tracks_every_field(eta in 0.05f64..0.5, res in 0.1f64..0.5) {
        let mut s = StudySetup::default();
        let base = config_hash(&s).unwrap();
        prop_assert_eq!(&base, &config_hash(&StudySetup::default()).unwrap());
        s.eta = eta;
        s.resolution = res;
        let moved = config_hash(&s).unwrap();
        prop_assert_eq!(moved == base, eta == StudySetup::default().eta && res == StudySetup::default().resolution);
    }
}

#[test]
fn generation_estimates_with_measured_band() {
    let lab = nalab_core::harness::Lab::new(StudySetup::gentle()).unwrap();
    let m = &lab.model;
    let c0 = lab.initial_bound;
    let eta = 0.2;
    let mut bands = Vec::new();
    for eps in [0.04f64, 0.02, 0.01] {
        let tau = eps.ln().abs() / m.mu;
        let shift = eps * m.g_const;
        let y = |xi: f64, d: f64| ode_flow(m, tau, xi, d).unwrap().y;
        // smallest distance from a past which both flows have left the eta-band of a
        let reach = |sign: f64| {
            let ok = |s: f64| {
                let xi = m.a + sign * s;
                [-shift, shift].iter().all(|&d| sign * y(xi, d) >= 1.0 - eta)
            };
            let (mut lo, mut hi) = (0.0, 2.0 * c0 - sign * m.a);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if ok(mid) {
                    hi = mid
                } else {
                    lo = mid
                }
            }
            hi
        };
        let m_star = reach(1.0).max(reach(-1.0)) / eps;
        bands.push(m_star);
        for k in 0..=80 {
            let xi = -2.0 * c0 + 4.0 * c0 * k as f64 / 80.0;
            for d in [-shift, shift] {
                let v = y(xi, d);
                assert!((-1.0 - eta..=1.0 + eta).contains(&v), "eps {eps} xi {xi}: {v}");
                if xi >= m.a + m_star * eps {
                    assert!(v >= 1.0 - eta);
                }
                if xi <= m.a - m_star * eps {
                    assert!(v <= -1.0 + eta);
                }
            }
        }
    }
    let spread = bands.iter().cloned().fold(0.0, f64::max) / bands.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(spread < 3.0, "band constants {bands:?}");
}
