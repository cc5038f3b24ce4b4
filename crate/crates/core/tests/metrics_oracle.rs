use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use takeover_core::metrics::{
    tet, tet_rect, tit, tit_rect, tlx_overall, welch_t, Distribution, TtcSample,
};

/// Brute-force exposure: evaluate the piecewise-linear profile at the
/// midpoint of every 1 ms slice and sum rectangles.
fn brute(series: &[TtcSample<f64>], theta: f64) -> (f64, f64) {
    let h = 1e-3;
    let (mut d, mut a) = (0.0, 0.0);
    for w in series.windows(2) {
        let (t0, t1) = (w[0].t, w[1].t);
        let n = ((t1 - t0) / h).round() as usize;
        let hh = (t1 - t0) / n as f64;
        for j in 0..n {
            let x = (j as f64 + 0.5) / n as f64;
            let y = match (w[0].ttc.is_finite(), w[1].ttc.is_finite()) {
                (true, true) => w[0].ttc + x * (w[1].ttc - w[0].ttc),
                (true, false) => if x < 0.5 { w[0].ttc } else { f64::INFINITY },
                (false, true) => if x < 0.5 { f64::INFINITY } else { w[1].ttc },
                (false, false) => f64::INFINITY,
            };
            if y < theta {
                d += hh;
                a += hh * (theta - y);
            }
        }
    }
    (d, a)
}

fn random_profile(rng: &mut ChaCha8Rng) -> Vec<TtcSample<f64>> {
    let n = rng.random_range(20..400);
    let mut y: f64 = rng.random_range(0.0..8.0);
    (0..n)
        .map(|k| {
            y = (y + rng.random_range(-0.3..0.3)).clamp(0.0, 10.0);
            let ttc = if rng.random_bool(0.05) { f64::INFINITY } else { y };
            TtcSample { t: k as f64 * 0.05, ttc }
        })
        .collect()
}

#[test]
fn exposure_matches_brute_force_on_random_profiles() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..100 {
        let s = random_profile(&mut rng);
        let theta = rng.random_range(1.0..5.0);
        let (bd, ba) = brute(&s, theta);
        let d = tet(&s, theta).unwrap();
        let a = tit(&s, theta).unwrap();
        assert!((d - bd).abs() < 1e-2, "case {case}: tet {d} vs {bd}");
        assert!((a - ba).abs() < 1e-2, "case {case}: tit {a} vs {ba}");
        assert!(tet_rect(&s, theta, 0.05).unwrap() >= 0.0);
        assert!(tit_rect(&s, theta, 0.05).unwrap() >= 0.0);
    }
}

#[test]
fn linear_ramp_closed_form() {
    let s: Vec<_> = (0..=80)
        .map(|k| {
            let t = k as f64 * 0.05;
            TtcSample { t, ttc: 5.0 - t }
        })
        .collect();
    assert_eq!(tet(&s, 3.0).unwrap(), 2.0);
    assert_eq!(tit(&s, 3.0).unwrap(), 2.0);
}

#[test]
fn welch_against_reference_values() {
    // reference values from an independent statistics package
    let cases: [(&[f64], &[f64], f64, f64, f64); 3] = [
        (&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 3.0, 4.0, 5.0, 6.0], -1.0, 8.0, 0.34659350708733416),
        (&[1.0, 2.0, 3.0, 4.0, 5.0, 9.0], &[2.0, 3.0, 4.0, 5.0, 6.0], 0.0, 8.039867109634551, 1.0),
        (
            &[0.3, 1.2, 2.2, 0.7],
            &[2.5, 3.1, 1.9, 4.0, 2.8, 3.3],
            -3.636885322518069,
            5.914888386127432,
            0.011149667623615196,
        ),
    ];
    for (a, b, t, df, p) in cases {
        let r = welch_t(a, b).unwrap();
        assert!((r.t - t).abs() < 1e-9, "t {} vs {t}", r.t);
        assert!((r.df - df).abs() < 1e-9, "df {} vs {df}", r.df);
        assert!((r.p - p).abs() < 1e-7, "p {} vs {p}", r.p);
    }
    let same = welch_t(&[3.0, 1.0, 2.0], &[3.0, 1.0, 2.0]).unwrap();
    assert_eq!((same.t, same.p), (0.0, 1.0));
    assert!(welch_t(&[0.0, 0.0], &[10.0, 10.0]).unwrap().p < 0.05);
}

#[test]
fn tlx_and_distribution() {
    assert_eq!(tlx_overall(&[30.0, 40.0, 50.0, 60.0, 70.0, 80.0]).unwrap(), 55.0);
    let d = Distribution::of(&[5.0, 1.0, 3.0]).unwrap();
    assert_eq!((d.min, d.median, d.max, d.mean), (1.0, 3.0, 5.0, 3.0));
}
