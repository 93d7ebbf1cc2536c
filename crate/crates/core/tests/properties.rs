use mmwave_ag::geometry::Vec3;
use mmwave_ag::metrics::{empirical_cdf, rms_delay_spread, Cir};
use mmwave_ag::raytrace::PathComponent;
use mmwave_ag::scene::{generate_scenario, material_permittivity, MaterialKind, ScenarioKind};
use mmwave_ag::sounder::{
    default_taps, matched_filter, periodic_autocorrelation, pn_sequence, synthesize_tx,
    SounderConfig, Waveform,
};
use num_complex::Complex64;
use proptest::prelude::*;

#[test]
fn scenario_tables_hold_for_many_seeds() {
    for seed in 0..1000u64 {
        for kind in [
            ScenarioKind::Rural,
            ScenarioKind::Suburban,
            ScenarioKind::Urban,
        ] {
            let s = generate_scenario(kind, seed).unwrap();
            let (lo, hi) = kind.height_range().unwrap();
            assert_eq!(
                s.buildings.len(),
                kind.building_count(),
                "{kind} seed {seed}"
            );
            assert!(
                s.buildings.iter().all(|b| (lo..=hi).contains(&b.height)),
                "{kind} seed {seed}"
            );
            let rects: Vec<_> = s
                .buildings
                .iter()
                .map(|b| b.footprint)
                .chain(s.foliage.iter().map(|f| f.footprint))
                .collect();
            for (i, a) in rects.iter().enumerate() {
                for b in &rects[i + 1..] {
                    assert!(!a.overlaps(b, 0.0), "{kind} seed {seed}: {a:?} {b:?}");
                }
            }
        }
    }
}

#[test]
fn over_sea_has_two_conducting_ships() {
    for seed in 0..50 {
        let s = generate_scenario(ScenarioKind::OverSea, seed).unwrap();
        assert!(s.buildings.is_empty());
        assert_eq!(s.ships.len(), 2);
        assert!(s
            .ships
            .iter()
            .all(|b| b.material == MaterialKind::PerfectConductor));
        assert_eq!(s.ground, MaterialKind::SeaWater);
    }
}

fn cir_of(paths: &[(f64, f64, f64)]) -> Cir {
    let paths = paths
        .iter()
        .map(|&(a, th, tau)| PathComponent {
            amplitude: a,
            phase: th,
            delay: tau,
            interactions: Vec::new(),
            frequency: 28e9,
        })
        .collect();
    Cir::new(
        paths,
        28e9,
        Vec3::new(0.0, 0.0, 2.0),
        Vec3::new(100.0, 0.0, 50.0),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scene_generation_is_deterministic(seed in any::<u64>(), k in 0usize..4) {
        let kind = ScenarioKind::STANDARD[k];
        let a = generate_scenario(kind, seed).unwrap();
        let b = generate_scenario(kind, seed).unwrap();
        prop_assert_eq!(a.to_text(), b.to_text());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn permittivity_loss_non_negative(f in 10e9f64..=100e9, k in 0usize..3) {
        let kind = [MaterialKind::Concrete, MaterialKind::DryGround, MaterialKind::SeaWater][k];
        prop_assert!(material_permittivity(kind, f).unwrap().loss() >= 0.0);
    }

    #[test]
    fn cdf_ignores_input_order(mut v in prop::collection::vec(-1e3f64..1e3, 1..60), rot in 0usize..60) {
        let a = empirical_cdf(&v).unwrap();
        let r = rot % v.len();
        v.rotate_left(r);
        v.reverse();
        let b = empirical_cdf(&v).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn cdf_is_monotone(v in prop::collection::vec(-50f64..50.0, 1..80)) {
        let c = empirical_cdf(&v).unwrap();
        prop_assert!(c.values.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(c.probabilities.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(*c.probabilities.last().unwrap(), 1.0);
    }

    #[test]
    fn rms_spread_shift_and_scale(
        paths in prop::collection::vec((1e-3f64..1.0, -3.0f64..3.0, 0.0f64..2e-6), 1..8),
        shift in 0.0f64..1e-5,
        scale in 0.01f64..100.0,
    ) {
        let base = rms_delay_spread(&cir_of(&paths), 25.0).unwrap();
        let shifted: Vec<_> = paths.iter().map(|&(a, th, t)| (a, th, t + shift)).collect();
        let scaled: Vec<_> = paths.iter().map(|&(a, th, t)| (a * scale, th, t)).collect();
        let tol = 1e-9 * base.max(1e-12) + 1e-15;
        prop_assert!((rms_delay_spread(&cir_of(&shifted), 25.0).unwrap() - base).abs() <= tol.max(1e-12 * shift));
        prop_assert!((rms_delay_spread(&cir_of(&scaled), 25.0).unwrap() - base).abs() <= tol);
        prop_assert!(base >= 0.0);
    }

    #[test]
    fn matched_filter_is_linear(
        a in (-2.0f64..2.0, -2.0f64..2.0),
        b in (-2.0f64..2.0, -2.0f64..2.0),
        seed in any::<u64>(),
    ) {
        let seq = pn_sequence(7, default_taps(7).unwrap()).unwrap();
        let n = seq.len() * 3;
        let mut state = seed | 1;
        let mut noise = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let x: Vec<Complex64> = (0..n).map(|_| Complex64::new(noise(), noise())).collect();
        let y: Vec<Complex64> = (0..n).map(|_| Complex64::new(noise(), noise())).collect();
        let (ca, cb) = (Complex64::new(a.0, a.1), Complex64::new(b.0, b.1));
        let wf = |s: Vec<Complex64>| Waveform { samples: s, sample_rate: 1.0, period: None };
        let combined: Vec<Complex64> = x.iter().zip(&y).map(|(p, q)| ca * p + cb * q).collect();
        let rx = matched_filter(&wf(x), &seq).unwrap();
        let ry = matched_filter(&wf(y), &seq).unwrap();
        let rc = matched_filter(&wf(combined), &seq).unwrap();
        for k in 0..seq.len() {
            let want = ca * rx.samples[k] + cb * ry.samples[k];
            prop_assert!((rc.samples[k] - want).norm() < 1e-9);
        }
    }
}

#[test]
fn matched_filter_matches_direct_sum() {
    let seq = pn_sequence(6, default_taps(6).unwrap()).unwrap();
    let n = seq.len();
    let rx: Vec<Complex64> = (0..4 * n)
        .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
        .collect();
    let r = matched_filter(
        &Waveform {
            samples: rx.clone(),
            sample_rate: 1.0,
            period: None,
        },
        &seq,
    )
    .unwrap();
    for k in 0..n {
        let mut acc = Complex64::new(0.0, 0.0);
        for p in 1..4 {
            for m in 0..n {
                acc += rx[p * n + m] * seq.chip(m as i64 - k as i64) as f64;
            }
        }
        acc /= 3.0;
        assert!((r.samples[k] - acc).norm() < 1e-9, "k={k}");
    }
}

#[test]
fn m_sequences_for_all_degrees() {
    for m in 2..=20u32 {
        let seq = pn_sequence(m, default_taps(m).unwrap()).unwrap();
        let n = (1usize << m) - 1;
        assert_eq!(seq.len(), n);
        let minus = seq.chips().iter().filter(|&&c| c == -1).count();
        assert_eq!(minus, 1 << (m - 1), "degree {m}");
        assert_eq!(n - minus, (1 << (m - 1)) - 1);
        if m <= 12 {
            for lag in 0..n as i64 {
                let want = if lag == 0 { n as i64 } else { -1 };
                assert_eq!(
                    periodic_autocorrelation(&seq, lag),
                    want,
                    "degree {m} lag {lag}"
                );
            }
        } else {
            // Ideal two-valued autocorrelation through the correlator itself.
            let tx = synthesize_tx(
                &seq,
                &SounderConfig {
                    periods: 2,
                    ..SounderConfig::default()
                },
            )
            .unwrap();
            let r = matched_filter(&tx, &seq).unwrap();
            for (k, v) in r.samples.iter().enumerate() {
                let want = if k == 0 { n as f64 } else { -1.0 };
                assert!(
                    (v.re - want).abs() < 1e-3 && v.im.abs() < 1e-3,
                    "degree {m} lag {k}: {v}"
                );
            }
        }
    }
}
