use gendyn::dynamics::{s_of_t, t_of_s, DynamicsParams};
use gendyn::rmt::{
    detection_threshold, mp_mass, mp_quantile, overlap, sbar_of_shat, shat_of_sbar, Region, SpectrumParams,
};
use gendyn::shrinkage::shrink_denoise;
use gendyn::simulator::{make_dataset, make_teacher, InputDesign};
use gendyn::theory::{TheoryConfig, TheoryModel};
use gendyn::transfer::composite_modes_via_q;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn spectrum(aspect: f64, scale: f64) -> SpectrumParams {
    SpectrumParams::with_scale(aspect, scale).unwrap()
}

proptest! {
    #[test]
    fn shat_round_trips_above_threshold(aspect in 0.05f64..=1.0, scale in 0.2f64..3.0, lift in 1.01f64..20.0) {
        let p = spectrum(aspect, scale);
        let sbar = detection_threshold(&p) * lift;
        let shat = shat_of_sbar(sbar, &p);
        prop_assert!(shat > p.upper_edge());
        let back = sbar_of_shat(shat, &p).unwrap();
        prop_assert!((back - sbar).abs() < 1e-8 * sbar, "{} vs {}", back, sbar);
    }

    #[test]
    fn shat_is_monotone_and_clamped(aspect in 0.05f64..=1.0, a in 0.0f64..10.0, b in 0.0f64..10.0) {
        let p = spectrum(aspect, 1.0);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(shat_of_sbar(lo, &p) <= shat_of_sbar(hi, &p) + 1e-12);
        prop_assert!(shat_of_sbar(lo, &p) >= p.upper_edge() - 1e-12);
    }

    #[test]
    fn overlaps_are_bounded_and_increasing(aspect in 0.05f64..=1.0, a in 0.0f64..10.0, b in 0.0f64..10.0) {
        let p = spectrum(aspect, 1.0);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let (ol, oh) = (overlap(lo, &p), overlap(hi, &p));
        for o in [ol, oh] {
            prop_assert!((0.0..=1.0).contains(&o.o_u) && (0.0..=1.0).contains(&o.o_v));
            prop_assert!((o.o - o.o_u * o.o_v).abs() < 1e-15);
        }
        prop_assert!(ol.o <= oh.o + 1e-12);
    }

    #[test]
    fn quantile_inverts_mass(aspect in 0.05f64..=1.0, scale in 0.5f64..2.0, mass in 0.01f64..0.99) {
        let p = spectrum(aspect, scale);
        let f = mp_quantile(&p, mass).unwrap();
        let below = mp_mass(Region::new(p.lower_edge(), f), &p);
        prop_assert!((below - mass).abs() < 1e-6, "{} vs {}", below, mass);
    }

    #[test]
    fn mode_strength_rises_monotonically(
        depth in 3usize..=6,
        shat in 0.3f64..6.0,
        t1 in 0.0f64..50.0,
        dt in 0.0f64..50.0,
    ) {
        let d = DynamicsParams::new(1e-3, 1.0, depth).unwrap();
        let a = s_of_t(t1, shat, &d).unwrap();
        let b = s_of_t(t1 + dt, shat, &d).unwrap();
        prop_assert!(a >= 1e-3 - 1e-15 && b <= shat + 1e-12);
        prop_assert!(b >= a - 1e-9 * shat, "{} then {}", a, b);
    }

    #[test]
    fn time_of_strength_inverts(depth in 3usize..=5, shat in 0.5f64..5.0, frac in 0.01f64..0.99) {
        let d = DynamicsParams::new(1e-3, 1.0, depth).unwrap();
        let s = 1e-3 + frac * (shat - 1e-3);
        let t = t_of_s(s, shat, &d).unwrap();
        let back = s_of_t(t, shat, &d).unwrap();
        prop_assert!((back - s).abs() < 1e-6 * shat, "{} vs {}", back, s);
    }

    #[test]
    fn composite_spectrum_keeps_energy(
        sa in proptest::collection::vec(0.1f64..8.0, 1..3),
        sb in proptest::collection::vec(0.1f64..8.0, 1..3),
        seed in any::<u64>(),
    ) {
        let mut sa = sa;
        let mut sb = sb;
        sa.sort_by(|a, b| b.total_cmp(a));
        sb.sort_by(|a, b| b.total_cmp(a));
        // overlap matrix from two random orthonormal frames in dimension 6
        let mut rng = gendyn::rng::stream_rng(seed, 0);
        let f = gendyn::linalg::random_orthonormal(6, sa.len() + sb.len(), &mut rng);
        let g = gendyn::linalg::random_orthonormal(6, 6, &mut rng);
        let va = f.columns(0, sa.len()).into_owned();
        let vb = (&g * f.columns(sa.len(), sb.len())).into_owned();
        let q = va.transpose() * vb;
        let modes = composite_modes_via_q(&sa, &sb, &q).unwrap();
        let energy: f64 = sa.iter().chain(&sb).map(|s| s * s).sum();
        let got: f64 = modes.values.iter().map(|s| s * s).sum();
        prop_assert!((got - energy).abs() < 1e-9 * energy, "{} vs {}", got, energy);
        prop_assert!(modes.values.windows(2).all(|w| w[0] >= w[1]));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn train_error_never_rises(sbar in 1.0f64..6.0, t in 0.0f64..20.0, dt in 0.0f64..20.0) {
        let cfg = TheoryConfig::new(vec![sbar], 100, 50, DynamicsParams::shallow(1e-3).unwrap()).unwrap();
        let m = TheoryModel::new(&cfg).unwrap();
        let a = m.train_error(t).unwrap();
        let b = m.train_error(t + dt).unwrap();
        prop_assert!(b <= a + 1e-12, "{} then {}", a, b);
        prop_assert!(a <= 1.0 + 1e-12 && b >= 0.0);
    }

    #[test]
    fn shrinkage_never_inflates(seed in any::<u64>(), sbar in 0.5f64..6.0) {
        let teacher = make_teacher(60, 30, &[sbar], 1.0, seed).unwrap();
        let ds = make_dataset(&teacher, 60, InputDesign::Orthonormal, seed).unwrap();
        let p = SpectrumParams::new(0.5).unwrap();
        let r = shrink_denoise(&ds.sigma31, &p, 0.02).unwrap();
        for m in &r.detected {
            prop_assert!(m.shrunk <= m.sbar && m.sbar < m.shat);
        }
        let top = gendyn::linalg::Svd::of(&r.estimate).s.first().copied().unwrap_or(0.0);
        prop_assert!(top <= ds.top_singular_value() + 1e-9);
        if r.detected.is_empty() {
            prop_assert_eq!(r.estimate, DMatrix::zeros(30, 60));
        }
    }

    #[test]
    fn datasets_are_reproducible(seed in any::<u64>()) {
        let teacher = make_teacher(12, 6, &[2.0], 1.0, seed).unwrap();
        let a = make_dataset(&teacher, 24, InputDesign::Oversampled, seed).unwrap();
        let b = make_dataset(&teacher, 24, InputDesign::Oversampled, seed).unwrap();
        prop_assert_eq!(&a.x, &b.x);
        prop_assert_eq!(&a.y, &b.y);
    }
}
