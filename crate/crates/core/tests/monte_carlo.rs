//! Monte Carlo runs checked against closed forms and exact enumeration.

use duplex_qkd::adversary::{BasisPolicy, EveStrategy};
use duplex_qkd::bb84::{run_bb84_with, sample_errors, sift, transmit_slots, Bb84Config};
use duplex_qkd::duplex::{run_duplex_session, DuplexConfig, FailurePolicy};
use duplex_qkd::record::UniformDraws;
use duplex_qkd::rng::session_rng;
use duplex_qkd::stats::{
    compare_protocols, pair_error_probability, undetected_probability, SessionReport,
};
use duplex_qkd::ChannelModel;

fn three_sigma(p: f64, n: usize) -> f64 {
    3.0 * (p * (1.0 - p) / n as f64).sqrt()
}

/// pmf of Binomial(m, 1/2)
fn half_binomial(m: usize) -> Vec<f64> {
    let mut c = 1.0f64;
    (0..=m)
        .map(|k| {
            let p = c * 0.5f64.powi(m as i32);
            c = c * (m - k) as f64 / (k + 1) as f64;
            p
        })
        .collect()
}

#[test]
fn pair_failure_frequency_matches_closed_form_on_grid() {
    for (ci, &intercept) in [0.0, 0.25, 0.5, 1.0].iter().enumerate() {
        for (fi, &flip) in [0.0, 0.01, 0.05].iter().enumerate() {
            let cfg = DuplexConfig {
                channel: ChannelModel::new(0.0, flip).unwrap(),
                eve: EveStrategy::intercept_resend(intercept, BasisPolicy::UniformRandom).unwrap(),
                failure_policy: FailurePolicy::Threshold(1.0),
                ..DuplexConfig::new(400)
            };
            let expected = pair_error_probability(&cfg.eve, &cfg.channel);
            let (mut checked, mut failed) = (0usize, 0usize);
            let mut k = 0;
            while checked < 100_000 {
                let mut rng = session_rng(11, (ci * 3 + fi) as u32, k);
                let s = run_duplex_session(&cfg, &mut UniformDraws, &mut rng).unwrap();
                checked += s.verification.checked_pairs;
                failed += s.verification.failures.len();
                k += 1;
            }
            let freq = failed as f64 / checked as f64;
            let tol = three_sigma(expected, checked);
            assert!(
                (freq - expected).abs() <= tol,
                "intercept {intercept} flip {flip}: {freq} vs {expected} (tol {tol})"
            );
        }
    }
}

#[test]
fn undetected_probability_matches_simulation() {
    let p_pair = 0.375;
    let n_pairs = 10;
    let cfg = DuplexConfig {
        eve: EveStrategy::full_uniform(),
        pair_limit: Some(n_pairs),
        ..DuplexConfig::new(100)
    };
    let sessions = 20_000;
    let mut undetected = 0;
    for k in 0..sessions {
        let mut rng = session_rng(12, 0, k as u32);
        let s = run_duplex_session(&cfg, &mut UniformDraws, &mut rng).unwrap();
        assert_eq!(s.verification.checked_pairs, n_pairs);
        undetected += usize::from(s.verification.pass);
    }
    let expected = undetected_probability(n_pairs, p_pair);
    let freq = undetected as f64 / sessions as f64;
    assert!(
        (freq - expected).abs() <= three_sigma(expected, sessions),
        "{freq} vs {expected}"
    );
}

#[test]
fn bb84_sample_survival_is_three_quarters_per_bit() {
    let eve = EveStrategy::full_uniform();
    for n in [1usize, 5, 10] {
        let sessions = 10_000;
        let mut survived = 0;
        for k in 0..sessions {
            let mut rng = session_rng(13, n as u32, k);
            let (records, _) =
                transmit_slots(80, &ChannelModel::IDEAL, &eve, &mut UniformDraws, &mut rng);
            let sifted = sift(&records);
            assert!(sifted.len() >= n);
            let sample = sample_errors(&sifted, n, &mut rng);
            assert_eq!(sample.sampled.len(), n);
            survived += usize::from(sample.errors == 0);
        }
        let expected = 0.75f64.powi(n as i32);
        let freq = survived as f64 / sessions as f64;
        assert!(
            (freq - expected).abs() <= three_sigma(expected, sessions as usize),
            "n={n}: {freq} vs {expected}"
        );
    }
}

#[test]
fn key_yield_matches_exact_expectations() {
    let n = 200;
    let sessions = 10_000;
    let sample_fraction = 0.25;

    // duplex: key = min(S2, S3) with S2, S3 iid Binomial(n/2, 1/2)
    let pmf = half_binomial(n / 2);
    let (mut e_min, mut e_min2) = (0.0, 0.0);
    for (a, pa) in pmf.iter().enumerate() {
        for (b, pb) in pmf.iter().enumerate() {
            let m = a.min(b) as f64;
            e_min += pa * pb * m;
            e_min2 += pa * pb * m * m;
        }
    }
    let sd_min = (e_min2 - e_min * e_min).sqrt();

    // BB84: key = k - ceil(f k) with k ~ Binomial(n, 1/2)
    let pmf = half_binomial(n);
    let (mut e_bb, mut e_bb2) = (0.0, 0.0);
    for (k, pk) in pmf.iter().enumerate() {
        let key = (k - (sample_fraction * k as f64).ceil() as usize) as f64;
        e_bb += pk * key;
        e_bb2 += pk * key * key;
    }
    let sd_bb = (e_bb2 - e_bb * e_bb).sqrt();

    let mut duplex_reports = Vec::new();
    let mut bb84_reports = Vec::new();
    for k in 0..sessions {
        let mut rng = session_rng(14, 0, k);
        let s = run_duplex_session(&DuplexConfig::new(n), &mut UniformDraws, &mut rng).unwrap();
        duplex_reports.push(SessionReport::from_duplex(&s));
        let mut rng = session_rng(14, 1, k);
        let cfg = Bb84Config::new(n, sample_fraction, 0);
        bb84_reports.push(SessionReport::from_bb84(
            &run_bb84_with(&cfg, &mut rng).unwrap(),
        ));
    }
    let table = compare_protocols(&duplex_reports, &bb84_reports).unwrap();
    let duplex = &table.rows[0];
    let bb84 = &table.rows[1];
    let tol = |sd: f64| 3.0 * sd / (sessions as f64).sqrt();
    assert!(
        (duplex.mean_key_bits - e_min).abs() <= tol(sd_min),
        "{} vs {e_min}",
        duplex.mean_key_bits
    );
    assert!(
        (bb84.mean_key_bits - e_bb).abs() <= tol(sd_bb),
        "{} vs {e_bb}",
        bb84.mean_key_bits
    );
    assert_eq!(duplex.bits_sacrificed, 0.0);
    assert!(bb84.bits_sacrificed > 0.0);
    assert_eq!(duplex.detection_rate, 0.0);
    assert!(bb84.key_bits_per_timeslot_unsampled > bb84.key_bits_per_timeslot);
    let rendered = table.to_table().to_delimited(',');
    assert!(rendered.starts_with("protocol,sessions,"));
    assert_eq!(rendered.lines().count(), 3);
}

#[test]
fn aborted_duplex_sessions_report_zero_key_rate() {
    let cfg = DuplexConfig {
        eve: EveStrategy::full_uniform(),
        channel: ChannelModel::new(0.0, 0.5).unwrap(),
        ..DuplexConfig::new(200)
    };
    let reports: Vec<_> = (0..200)
        .map(|k| {
            let mut rng = session_rng(15, 0, k);
            SessionReport::from_duplex(
                &run_duplex_session(&cfg, &mut UniformDraws, &mut rng).unwrap(),
            )
        })
        .collect();
    assert!(reports.iter().all(|r| r.aborted));
    let bb = vec![SessionReport::from_bb84(
        &run_bb84_with(&Bb84Config::new(10, 0.5, 0), &mut session_rng(0, 0, 0)).unwrap(),
    )];
    let table = compare_protocols(&reports, &bb).unwrap();
    assert_eq!(table.rows[0].key_bits_per_timeslot, 0.0);
    assert_eq!(table.rows[0].detection_rate, 1.0);
}
