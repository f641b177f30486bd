mod oracles;

use annoteval_core::matching::match_spans;
use annoteval_core::Span;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn cardinality_and_overlap_match_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let (refs, preds) = oracles::random_instance(&mut rng, 10, 10, 120);
        let got = match_spans(&refs, &preds);
        let (card, overlap) = oracles::best_matching_value(&refs, &preds);
        assert_eq!(
            (got.cardinality, got.total_overlap),
            (card, overlap),
            "{refs:?} {preds:?}"
        );
    }
}

#[test]
fn tie_break_matches_full_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..2000 {
        // Short text so ties are common.
        let (refs, preds) = oracles::random_instance(&mut rng, 5, 5, 20);
        let got: Vec<(usize, usize)> = match_spans(&refs, &preds)
            .pairs
            .iter()
            .map(|&(r, p, _)| (r, p))
            .collect();
        assert_eq!(
            got,
            oracles::brute_force_matching(&refs, &preds),
            "{refs:?} {preds:?}"
        );
    }
}

#[test]
fn worked_tie_example() {
    let refs = [Span::new(0, 5), Span::new(10, 15)];
    let preds = [Some(Span::new(3, 12))];
    assert_eq!(oracles::brute_force_matching(&refs, &preds), vec![(0, 0)]);
    assert_eq!(match_spans(&refs, &preds).pairs, vec![(0, 0, 2)]);
}
