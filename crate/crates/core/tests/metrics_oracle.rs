mod common;

use anticipation::data::{ActionInstance, SkeletonFrame, UntrimmedSequence};
use anticipation::eval::{
    anticipation_accuracy, anticipation_tally, frame_accuracy, AnticipationTally, FrameTally, GroundTruth,
    InstanceRule, MetricsReport, PredictionStream,
};
use anticipation::rng::stream_rng;
use common::oracle::{self, Case};

fn to_library(case: &Case) -> (PredictionStream, GroundTruth) {
    let instances = case
        .instances
        .iter()
        .map(|&(s, e, c)| ActionInstance::new(s, e, c).unwrap())
        .collect();
    let seq = UntrimmedSequence::new(vec![SkeletonFrame::zeros(1); case.frames], instances).unwrap();
    let stream = PredictionStream {
        probs: case.probs.clone(),
        actionness: case.q.clone(),
    };
    (stream, GroundTruth::from_sequence(&seq, case.classes).unwrap())
}

fn same(a: f64, b: f64) -> bool {
    (a.is_nan() && b.is_nan()) || (a - b).abs() <= 1e-12
}

#[test]
fn five_tiny_sequences_match_the_oracle() {
    for trial in 0..20u64 {
        let mut rng = stream_rng(trial, 0);
        let classes = 1 + trial as usize % 3;
        let cases: Vec<Case> = (0..5).map(|_| oracle::random_case(&mut rng, classes)).collect();
        let (streams, truths): (Vec<_>, Vec<_>) = cases.iter().map(to_library).unzip();

        for (rule, mean) in [(InstanceRule::LastFrame, false), (InstanceRule::MeanProb, true)] {
            let got = anticipation_accuracy(&streams, &truths, 10, rule).unwrap();
            let want = oracle::anticipation(&cases, 10, mean);
            assert!(got.iter().zip(&want).all(|(a, b)| same(*a, *b)), "trial {trial}: {got:?} vs {want:?}");
        }
        for bg in [true, false] {
            let got = frame_accuracy(&streams, &truths, bg).unwrap();
            assert!(same(got, oracle::frame_accuracy(&cases, bg)), "trial {trial} bg={bg}");
        }

        let mut ant = AnticipationTally { correct: vec![0; 9], instances: 0 };
        let mut frames = FrameTally::new(classes + 1);
        for (s, g) in streams.iter().zip(&truths) {
            ant.merge(&anticipation_tally(s, g, 10, InstanceRule::LastFrame).unwrap());
            frames.add(s, &g.labels).unwrap();
        }
        let report = MetricsReport::from_tallies(10, &ant, &frames);
        assert!(same(report.avg_acc_with_bg, oracle::frame_accuracy(&cases, true)));
        assert!(same(report.avg_acc_without_bg, oracle::frame_accuracy(&cases, false)));
    }
}

#[test]
fn oracle_observation_frame_agrees_with_floor_rule() {
    for s in 1..30 {
        for tau in 1..45 {
            for k in 1..10 {
                assert_eq!(oracle::observed_until(s, s + tau, k, 10), s + tau * k / 10);
            }
        }
    }
}
