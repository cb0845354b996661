use super::transport::{channel_pair, Tamper};
use super::wire::Frame;
use super::*;
use crate::experiment::{desk_run, DeskRun};
use crate::stats::pearson;

fn setup(signals: usize, per_set: usize, ell: usize) -> DeskRun {
    desk_run(0.0, signals, per_set, 0.85, ell, 11).unwrap()
}

fn records(run: &DeskRun, seed: u64) -> Vec<QuadratureRecord> {
    run.link.sample(run.signals, seed)
}

#[test]
fn sift_examples() {
    let one_based = |v: Vec<usize>| v.into_iter().map(|i| i + 1).collect::<Vec<_>>();
    let (i0, i1) = sift(&[0, 1, 0], &[0, 0, 1], 0).unwrap();
    assert_eq!((one_based(i0), one_based(i1)), (vec![1], vec![2, 3]));
    let (i0, i1) = sift(&[0, 1, 0], &[0, 0, 1], 1).unwrap();
    assert_eq!((one_based(i0), one_based(i1)), (vec![2, 3], vec![1]));
    let (i0, i1) = sift(&[1, 0, 1], &[1, 0, 1], 0).unwrap();
    assert_eq!((i0, i1), (vec![0, 1, 2], vec![]));
    assert!(matches!(
        sift(&[0], &[0, 1], 0),
        Err(ProtocolError::LengthMismatch(_))
    ));
}

#[test]
fn phases_only_move_forward() {
    let mut s = PartyState::new();
    s.advance(Phase::Measure).unwrap();
    s.advance(Phase::Wait).unwrap();
    assert!(s.advance(Phase::Measure).is_err());
    assert_eq!(s.phase(), Phase::Aborted);
    assert!(s.advance(Phase::Done).is_err());
}

#[test]
fn honest_runs_agree_for_both_choices() {
    let mut run = setup(700, 200, 64);
    for t in 0..2u8 {
        run.config.choice = t;
        let out = run_in_process(&run.config, &records(&run, 5 + t as u64), 9);
        assert!(out.is_done(), "{:?} / {:?}", out.alice, out.bob);
        assert!(out.correct());
        let alice = out.alice.as_ref().unwrap();
        assert_eq!(alice.phase, Phase::Done);
        assert_eq!(alice.strings[0].len(), 64);
        assert_ne!(alice.strings[0], alice.strings[1]);
        let tags: Vec<Tag> = out.transcript.entries.iter().map(|(_, f)| f.tag).collect();
        assert_eq!(
            tags,
            [Tag::Bases, Tag::IndexSets, Tag::Syndromes, Tag::HashDesc]
        );
    }
}

#[test]
fn transcripts_are_deterministic() {
    let run = setup(700, 200, 32);
    let recs = records(&run, 3);
    let a = run_in_process(&run.config, &recs, 4).transcript.to_bytes();
    let b = run_in_process(&run.config, &recs, 4).transcript.to_bytes();
    let c = run_in_process(&run.config, &recs, 5).transcript.to_bytes();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn zero_length_refuses_to_start() {
    let run = setup(700, 200, 0);
    let out = run_in_process(&run.config, &records(&run, 1), 1);
    assert!(matches!(out.alice, Err(ProtocolError::InfeasibleRate)));
    assert!(matches!(out.bob, Err(ProtocolError::InfeasibleRate)));
    assert!(out.transcript.entries.is_empty());
}

#[test]
fn short_sets_abort_both_parties() {
    let run = setup(300, 200, 32);
    let out = run_in_process(&run.config, &records(&run, 1), 1);
    assert!(matches!(
        out.alice,
        Err(ProtocolError::AbortShortSets { .. })
    ));
    assert!(matches!(out.bob, Err(ProtocolError::AbortShortSets { .. })));
    assert_eq!(out.transcript.entries.last().unwrap().1.tag, Tag::Abort);
}

#[test]
fn mismatched_codes_abort() {
    let mut run = setup(700, 200, 32);
    run.config.bob_code = Some(Arc::new(LdpcCode::build(200, 0.85, 12).unwrap()));
    let out = run_in_process(&run.config, &records(&run, 1), 1);
    assert!(matches!(out.alice, Err(ProtocolError::CodeMismatch { .. })));
    assert!(matches!(
        out.bob,
        Err(ProtocolError::PeerAborted {
            code: AbortCode::CodeMismatch,
            ..
        })
    ));
}

fn permute_bases(frame: Frame) -> Frame {
    match Message::from_frame(&frame) {
        Ok(Message::Bases(b)) => {
            // Rotate by one position.
            let n = b.len();
            Message::Bases(Bits::from_bools((0..n).map(|i| b.get((i + 1) % n)))).to_frame()
        }
        _ => frame,
    }
}

#[test]
fn permuted_bases_break_bob_only() {
    let run = setup(700, 200, 32);
    let recs = records(&run, 2);
    let (a, b) = channel_pair();
    let out = run_pair(&run.config, &recs, 3, Tamper::new(a, permute_bases), b);
    let alice = out.alice.expect("Alice is unaffected");
    let bob = out.bob.expect("Bob finishes with an invalid string");
    assert_eq!(alice.phase, Phase::Done);
    assert!(bob.string.as_ref() != Some(&alice.strings[bob.choice as usize]));
}

#[test]
fn out_of_order_message_aborts() {
    let run = setup(700, 200, 32);
    let recs = records(&run, 2);
    let (a, b) = channel_pair();
    let to_syndromes = |f: Frame| {
        if f.tag == Tag::Bases {
            Message::Syndromes([
                SyndromeBlock {
                    low: vec![],
                    syndrome: vec![],
                },
                SyndromeBlock {
                    low: vec![],
                    syndrome: vec![],
                },
            ])
            .to_frame()
        } else {
            f
        }
    };
    let out = run_pair(&run.config, &recs, 3, Tamper::new(a, to_syndromes), b);
    assert!(matches!(
        out.bob,
        Err(ProtocolError::UnexpectedMessage { .. })
    ));
    assert!(matches!(
        out.alice,
        Err(ProtocolError::PeerAborted {
            code: AbortCode::Unexpected,
            ..
        })
    ));
}

#[test]
fn ot_delivers_chosen_input() {
    let mut run = setup(700, 200, 48);
    let mut rng = SeededRng::new(8, streams::OT_INPUTS);
    let x = [
        Bits::from_bools((0..48).map(|_| rng.bit())),
        Bits::from_bools((0..48).map(|_| rng.bit())),
    ];
    run.config.ot_inputs = Some(x.clone());
    for t in 0..2u8 {
        run.config.choice = t;
        let out = run_in_process(&run.config, &records(&run, 20 + t as u64), 21);
        let bob = out.bob.unwrap();
        assert_eq!(bob.ot_output.as_ref(), Some(&x[t as usize]));
    }
    // All-zero inputs: the output is s_t ⊕ s̃ = 0.
    let zeros = Bits::zeros(48);
    run.config.ot_inputs = Some([zeros.clone(), zeros.clone()]);
    let out = run_in_process(&run.config, &records(&run, 30), 31);
    assert_eq!(out.bob.unwrap().ot_output, Some(zeros));
}

#[test]
fn tcp_loopback_run() {
    let run = setup(700, 200, 32);
    let out = run_loopback_tcp(&run.config, &records(&run, 40), 41).unwrap();
    assert!(out.correct());
    let in_proc = run_in_process(&run.config, &records(&run, 40), 41);
    assert_eq!(out.transcript, in_proc.transcript);
}

#[test]
fn leaky_bob_fails_to_decode() {
    let mut run = setup(1200, 200, 32);
    run.config.strategy = BobStrategy::LeakyChoice;
    let out = run_in_process(&run.config, &records(&run, 50), 51);
    assert!(out.is_done());
    assert!(!out.correct());
}

#[test]
fn sifted_substrings_follow_the_model() {
    let run = setup(200_000, 200, 32);
    let recs = records(&run, 60);
    let (alice, bob) = split_records(&recs);
    let scheme = run.config.shared.scheme;
    let predicted = run.link.gamma().correlation();
    for t in 0..2u8 {
        let (i0, i1) = sift(&alice.bases, &bob.bases, t).unwrap();
        let (matched, other) = if t == 0 { (i0, i1) } else { (i1, i0) };
        let corr = |idx: &[usize]| {
            let pairs: Vec<(f64, f64)> = idx[..90_000]
                .iter()
                .map(|&i| (discretize(alice.values[i], &scheme) as f64, bob.values[i]))
                .collect();
            pearson(&pairs).unwrap()
        };
        assert!((corr(&matched) - predicted).abs() < 0.01);
        assert!(corr(&other).abs() < 0.02);
    }
}
