mod common;

use proptest::prelude::*;

proptest! {
    #![proptest_config(common::proptest_config(13))]

    #[test]
    fn equivalence_round_trip(seed in any::<u64>()) {
        holds!(common::equivalence_round_trip(seed));
    }

    #[test]
    fn equivalence_matches_oracle(seed in any::<u64>()) {
        holds!(common::equivalence_matches_oracle(seed));
    }

    #[test]
    fn equivalence_symmetric(seed in any::<u64>()) {
        holds!(common::equivalence_symmetric(seed));
    }

    #[test]
    fn probe_monotone(seed in any::<u64>()) {
        holds!(common::probe_monotone(seed));
    }
}
