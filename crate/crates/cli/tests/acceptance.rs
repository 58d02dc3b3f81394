//! Acceptance suite. Prints one PASS/FAIL line per criterion, then fails the
//! test if any criterion failed.
//!
//! `cargo test -p duplex-qkd-cli --test acceptance -- --nocapture`

use std::collections::{BTreeMap, BTreeSet};
use std::process::Command;
use std::time::{Duration, Instant};

use duplex_qkd::adversary::EveStrategy;
use duplex_qkd::bb84::{run_bb84_with, Bb84Config};
use duplex_qkd::duplex::{
    check_triple, extract_key, make_triples_flip, run_duplex_session, DuplexConfig, FailurePolicy,
    PairingVariant,
};
use duplex_qkd::record::{BitTable, UniformDraws};
use duplex_qkd::rng::session_rng;
use duplex_qkd::stats::{eve_information, mutual_information, SessionReport};
use duplex_qkd::{Basis, Bit, ChannelModel, Direction, Timeslot};
use duplex_qkd_cli::commands::{cmd_run, replay_text, to_json};
use duplex_qkd_cli::config::{EveArg, RunConfig, VariantArg};

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures/table1.tsv");

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn worked_example() -> Verdict {
    let start = Instant::now();
    let text = std::fs::read_to_string(FIXTURE).map_err(|e| e.to_string())?;
    let r = replay_text(&text, VariantArg::FlipTriples, FailurePolicy::AbortOnAny)
        .map_err(|e| format!("{e:#}"))?;
    let elapsed = start.elapsed();
    let mut wrong = Vec::new();
    if r.discard != [1, 4, 7, 12, 13, 19, 20] {
        wrong.push(format!("discard {:?}", r.discard));
    }
    if r.set2 != [3, 5, 9, 11, 15, 17] {
        wrong.push(format!("set2 {:?}", r.set2));
    }
    if r.set3 != [2, 6, 8, 10, 14, 16, 18] {
        wrong.push(format!("set3 {:?}", r.set3));
    }
    let triples = [
        (3, 2, 1),
        (6, 5, 0),
        (9, 8, 0),
        (11, 10, 0),
        (15, 14, 1),
        (17, 16, 1),
    ];
    if r.triples != triples {
        wrong.push(format!("triples {:?}", r.triples));
    }
    if !r.failures.is_empty() || !r.pass {
        wrong.push(format!("failures {:?}", r.failures));
    }
    if r.alice_key.first() != Some(&1) || r.bob_key.first() != Some(&1) {
        wrong.push(format!("key {:?} / {:?}", r.alice_key, r.bob_key));
    }
    if elapsed >= Duration::from_secs(1) {
        wrong.push(format!("took {elapsed:?}"));
    }
    let detail = format!("exact match in {:.1} ms", elapsed.as_secs_f64() * 1e3);
    check(
        wrong.is_empty(),
        if wrong.is_empty() {
            detail
        } else {
            wrong.join("; ")
        },
    )
}

fn bb84_intercept_error_rate() -> Verdict {
    let cfg = Bb84Config {
        eve: EveStrategy::full_uniform(),
        ..Bb84Config::new(20_000, 0.25, 0)
    };
    let (mut sifted, mut errors) = (0usize, 0usize);
    let mut k = 0;
    while sifted < 100_000 {
        let mut rng = session_rng(2, 0, k);
        let out = run_bb84_with(&cfg, &mut rng).map_err(|e| e.to_string())?;
        sifted += out.sifted_records.len();
        errors += out.sifted_records.iter().filter(|s| s.is_error()).count();
        k += 1;
    }
    let rate = errors as f64 / sifted as f64;
    check(
        (rate - 0.25).abs() <= 0.01,
        format!("error rate {rate:.4} over {sifted} sifted bits (target 0.25 +/- 0.01)"),
    )
}

fn duplex_detection_power() -> Verdict {
    let full = EveStrategy::full_uniform();
    let cfg = DuplexConfig {
        eve: full,
        failure_policy: FailurePolicy::Threshold(1.0),
        ..DuplexConfig::new(2000)
    };
    let (mut checked, mut failed) = (0usize, 0usize);
    let mut k = 0;
    while checked < 100_000 {
        let mut rng = session_rng(3, 0, k);
        let s = run_duplex_session(&cfg, &mut UniformDraws, &mut rng).map_err(|e| e.to_string())?;
        checked += s.verification.checked_pairs;
        failed += s.verification.failures.len();
        k += 1;
    }
    let pair_rate = failed as f64 / checked as f64;
    let mut ok = (pair_rate - 0.375).abs() <= 0.01;
    let mut parts = vec![format!(
        "pair failure {pair_rate:.4} over {checked} pairs (0.375)"
    )];

    for n in [1usize, 5, 10] {
        let cfg = DuplexConfig {
            eve: full,
            pair_limit: Some(n),
            ..DuplexConfig::new(200)
        };
        let sessions = 10_000u32;
        let mut detected = 0usize;
        for k in 0..sessions {
            let mut rng = session_rng(3, n as u32, k);
            let s =
                run_duplex_session(&cfg, &mut UniformDraws, &mut rng).map_err(|e| e.to_string())?;
            if s.verification.checked_pairs != n {
                return Err(format!(
                    "session {k} checked {} pairs, wanted {n}",
                    s.verification.checked_pairs
                ));
            }
            detected += usize::from(!s.verification.pass);
        }
        let rate = detected as f64 / f64::from(sessions);
        let expected = 1.0 - 0.625f64.powi(n as i32);
        ok &= (rate - expected).abs() <= 0.01;
        parts.push(format!("n={n} detection {rate:.4} ({expected:.4})"));
    }
    check(ok, parts.join(", "))
}

fn noiseless_honesty() -> Verdict {
    let cfg = DuplexConfig::new(200);
    for k in 0..1000 {
        let mut rng = session_rng(4, 0, k);
        let s = run_duplex_session(&cfg, &mut UniformDraws, &mut rng).map_err(|e| e.to_string())?;
        let expected_len = s.partition.set2.len().min(s.partition.set3.len());
        if !s.verification.failures.is_empty() {
            return Err(format!(
                "session {k}: {} failures",
                s.verification.failures.len()
            ));
        }
        if s.alice_key != s.bob_key {
            return Err(format!("session {k}: keys differ"));
        }
        if s.alice_key.len() != expected_len {
            return Err(format!(
                "session {k}: key {} bits, min set size {expected_len}",
                s.alice_key.len()
            ));
        }
    }
    Ok("1000 sessions: no failures, equal keys of length min(|set2|,|set3|)".into())
}

fn leakage_invariants() -> Verdict {
    let (t2, t3) = (Timeslot(1), Timeslot(2));
    let bases = BTreeMap::from([(t2, Basis::X), (t3, Basis::X)]);
    let mut joint = [[0u64; 2]; 2];
    for b2 in Bit::ALL {
        for b3 in Bit::ALL {
            let plan = make_triples_flip(&[(t2, b2)], &[(t3, b3)]);
            let triple = plan.triples[0];
            if triple.flip != b2 ^ b3 {
                return Err(format!("flip {:?} for pair ({b2:?},{b3:?})", triple.flip));
            }
            let table: BitTable = BTreeMap::from([(t2, b2), (t3, b3)]);
            let key = extract_key(&[triple], &table).map_err(|e| e.to_string())?[0];
            joint[key.as_u8() as usize][triple.flip.as_u8() as usize] += 1;
            let info = eve_information(&[triple], &[], &bases);
            let candidates = &info.pairs[0].candidates;
            if candidates.len() != 2 || !candidates.contains(&(b2, b3)) {
                return Err(format!(
                    "candidates {candidates:?} for pair ({b2:?},{b3:?})"
                ));
            }
        }
    }
    let mi = mutual_information(joint);
    check(
        mi == 0.0,
        format!("flip = XOR on all 4 pairs, I(key; flip) = {mi}, 2 candidates each"),
    )
}

fn partition_and_conservation() -> Verdict {
    let mut total = 0;
    for (li, loss) in [0.0, 0.1, 0.5].into_iter().enumerate() {
        for k in 0..3334u32 {
            let variant = if k % 2 == 0 {
                PairingVariant::FlipTriples
            } else {
                PairingVariant::SearchPairs
            };
            let eve = if k % 3 == 0 {
                EveStrategy::absent()
            } else {
                EveStrategy::full_uniform()
            };
            let cfg = DuplexConfig {
                channel: ChannelModel::new(loss, 0.02).map_err(|e| e.to_string())?,
                eve,
                variant,
                failure_policy: FailurePolicy::Threshold(1.0),
                ..DuplexConfig::new(2 + (k as usize % 120))
            };
            let mut rng = session_rng(6, li as u32, k);
            let s =
                run_duplex_session(&cfg, &mut UniformDraws, &mut rng).map_err(|e| e.to_string())?;
            let all = s.transcript.timeslots();
            let set2: BTreeSet<_> = s.partition.set2.iter().copied().collect();
            let set3: BTreeSet<_> = s.partition.set3.iter().copied().collect();
            let disjoint = s.partition.discard.is_disjoint(&set2)
                && s.partition.discard.is_disjoint(&set3)
                && set2.is_disjoint(&set3);
            let union: BTreeSet<_> = s
                .partition
                .discard
                .iter()
                .chain(&set2)
                .chain(&set3)
                .copied()
                .collect();
            let directions = set2
                .iter()
                .all(|t| s.transcript.get(*t).unwrap().direction == Direction::AliceToBob)
                && set3
                    .iter()
                    .all(|t| s.transcript.get(*t).unwrap().direction == Direction::BobToAlice);
            let paired: BTreeSet<_> = s
                .triples
                .iter()
                .flat_map(|t| [t.t_set2, t.t_set3])
                .collect();
            let unpaired: BTreeSet<_> = s.unpaired.iter().copied().collect();
            let kept: BTreeSet<_> = set2.union(&set3).copied().collect();
            let accounted = paired.len() == 2 * s.triples.len()
                && paired.is_disjoint(&unpaired)
                && paired.union(&unpaired).copied().collect::<BTreeSet<_>>() == kept
                && unpaired.len() == s.unpaired.len();
            let report = SessionReport::from_duplex(&s);
            if !(disjoint && union == all && directions && accounted && report.conserves()) {
                return Err(format!("loss {loss}, transcript {k}: disjoint {disjoint}, covers {}, directions {directions}, accounted {accounted}", union == all));
            }
            total += 1;
        }
    }
    Ok(format!(
        "{total} transcripts: partition exact, 2*paired + unpaired = kept"
    ))
}

fn even_parity_blindness() -> Verdict {
    let (t2, t3) = (Timeslot(1), Timeslot(2));
    let mut cases = 0;
    for b2 in Bit::ALL {
        for b3 in Bit::ALL {
            let triple = make_triples_flip(&[(t2, b2)], &[(t3, b3)]).triples[0];
            for e2 in Bit::ALL {
                for e3 in Bit::ALL {
                    let alice: BitTable = BTreeMap::from([(t2, b2 ^ e2), (t3, b3 ^ e3)]);
                    let passed = check_triple(&alice, &triple).map_err(|e| e.to_string())?;
                    let odd = (e2 ^ e3) == Bit::One;
                    if passed == odd {
                        return Err(format!(
                            "pair ({b2:?},{b3:?}) errors ({e2:?},{e3:?}): passed {passed}"
                        ));
                    }
                    cases += 1;
                }
            }
        }
    }
    Ok(format!(
        "{cases} cases: fails exactly on odd-weight error patterns"
    ))
}

fn determinism() -> Verdict {
    let cfg = RunConfig {
        eve: EveArg::InterceptResend,
        intercept_fraction: 0.5,
        flip: 0.01,
        loss: 0.1,
        n_timeslots: 400,
        sessions: 40,
        seed: 8,
        ..RunConfig::default()
    };
    let a =
        to_json(&cmd_run(&cfg, None).map_err(|e| format!("{e:#}"))?).map_err(|e| e.to_string())?;
    let b =
        to_json(&cmd_run(&cfg, None).map_err(|e| format!("{e:#}"))?).map_err(|e| e.to_string())?;
    if a != b {
        return Err("library reports differ".into());
    }
    let run = |jobs: &str| -> Result<Vec<u8>, String> {
        let out = Command::new(env!("CARGO_BIN_EXE_dqkd"))
            .env_remove("DQKD_SEED")
            .args([
                "--jobs",
                jobs,
                "run",
                "--intercept",
                "0.5",
                "--flip",
                "0.01",
                "--loss",
                "0.1",
            ])
            .args([
                "--timeslots",
                "400",
                "--sessions",
                "40",
                "--seed",
                "8",
                "--format",
                "json",
            ])
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(String::from_utf8_lossy(&out.stderr).into_owned());
        }
        Ok(out.stdout)
    };
    let c = run("1")?;
    let d = run("4")?;
    check(
        c == d && c == a.as_bytes(),
        format!(
            "{} byte report identical across two library runs and two binary runs",
            a.len()
        ),
    )
}

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 8] = [
        ("1 worked example reproduction", worked_example),
        ("2 intercept-resend error rate", bb84_intercept_error_rate),
        ("3 duplex detection power", duplex_detection_power),
        ("4 noiseless honesty", noiseless_honesty),
        ("5 leakage invariants", leakage_invariants),
        ("6 partition and conservation", partition_and_conservation),
        ("7 even-parity blindness", even_parity_blindness),
        ("8 determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                println!("FAIL  {name}: {detail}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
