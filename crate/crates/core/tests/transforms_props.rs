mod common;

use proptest::prelude::*;

proptest! {
    #![proptest_config(common::proptest_config(11))]

    #[test]
    fn transform_apply_verifies(seed in any::<u64>()) {
        holds!(common::transform_apply_verifies(seed));
    }

    #[test]
    fn transform_conjugates_triple_products(seed in any::<u64>()) {
        holds!(common::transform_conjugates_triple_products(seed));
    }

    #[test]
    fn permutation_keeps_term_multiset(seed in any::<u64>()) {
        holds!(common::permutation_keeps_term_multiset(seed));
    }

    #[test]
    fn compose_matches_sequential(seed in any::<u64>()) {
        holds!(common::compose_matches_sequential(seed));
    }

    #[test]
    fn inverse_round_trips(seed in any::<u64>()) {
        holds!(common::inverse_round_trips(seed));
    }
}
