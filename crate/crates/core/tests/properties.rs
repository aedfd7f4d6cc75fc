use proptest::prelude::*;
use tractvar_core::inversion::loss;
use tractvar_core::kinematics::{denormalize, normalize, ChannelRange};
use tractvar_core::phones::Subtype;
use tractvar_core::ratings::{consensus, MajorityRule, RatingRecord};
use tractvar_core::stats::bh_adjust;
use tractvar_core::Channel;

fn range(min: f64, span: f64) -> ChannelRange {
    ChannelRange {
        channel: Channel::Tbcl,
        min,
        max: min + span,
    }
}

fn rating() -> impl Strategy<Value = RatingRecord> {
    (1u8..=5, 0usize..4, any::<bool>()).prop_map(|(score, st, flagged)| {
        let subtype = match (score, st) {
            (4 | 5, _) | (2 | 3, 0) => None,
            (_, k) => Some([Subtype::WError, Subtype::LError, Subtype::VowelError][k % 3]),
        };
        let mut r = RatingRecord::new("r", "f", score, subtype);
        if flagged {
            r.flags.insert(tractvar_core::ratings::Flag::JunkAudio);
        }
        r
    })
}

proptest! {
    #[test]
    fn normalize_round_trips(min in -100.0f64..100.0, span in 1e-3f64..100.0, v in -300.0f64..300.0) {
        let r = range(min, span);
        let n = normalize(v, r);
        prop_assert!((denormalize(n, r) - v).abs() <= 1e-12 * (1.0 + v.abs()) * 100.0 / span.max(1.0));
        if (min..=min + span).contains(&v) {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&n));
        }
    }

    #[test]
    fn normalize_is_monotone(min in -50.0f64..50.0, span in 1e-2f64..50.0, a in -100.0f64..100.0, b in -100.0f64..100.0) {
        let r = range(min, span);
        if a < b {
            prop_assert!(normalize(a, r) <= normalize(b, r));
        }
    }

    #[test]
    fn bh_is_bounded_and_order_preserving(p in prop::collection::vec(0.0f64..=1.0, 1..50)) {
        let adj = bh_adjust(&p).unwrap();
        for (a, q) in adj.iter().zip(&p) {
            prop_assert!(*a >= *q && *a <= 1.0);
        }
        for i in 0..p.len() {
            for j in 0..p.len() {
                if p[i] < p[j] {
                    prop_assert!(adj[i] <= adj[j]);
                }
            }
        }
    }

    #[test]
    fn consensus_ignores_rater_order(mut rs in prop::collection::vec(rating(), 1..6), seed in any::<u64>()) {
        let a = consensus(&rs, MajorityRule::Strict).unwrap();
        let k = (seed as usize) % rs.len();
        rs.rotate_left(k);
        rs.reverse();
        let b = consensus(&rs, MajorityRule::Strict).unwrap();
        prop_assert_eq!(a.outcome, b.outcome);
        prop_assert!((a.mean_score - b.mean_score).abs() < 1e-12);
    }

    #[test]
    fn loss_is_bounded(pred in prop::collection::vec(-2.0f64..2.0, 18), truth in prop::collection::vec(-2.0f64..2.0, 18), alpha in 0.0f64..=1.0) {
        let l = loss(&pred, &truth, 9, alpha).unwrap();
        prop_assert!((-1.0..=1.0).contains(&l.mean_r));
        prop_assert!(l.mean_rmse >= 0.0);
        prop_assert!(l.loss >= -1e-12 && l.loss <= 2.0 * alpha + (1.0 - alpha) * l.mean_rmse + 1e-12);
    }
}
