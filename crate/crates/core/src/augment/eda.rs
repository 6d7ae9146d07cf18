use rand::Rng;

use crate::codebook::SynonymTable;
use crate::grid::TokenGrid;

/// Attempts at placing two disjoint squares before giving up.
const SWAP_ATTEMPTS: usize = 100;

/// Replaces each token with probability `prob` by one of its synonyms,
/// chosen uniformly. Returns the number of replaced positions.
pub fn token_eda_sr<R: Rng + ?Sized>(
    grid: &mut TokenGrid,
    synonyms: &SynonymTable,
    prob: f64,
    rng: &mut R,
) -> usize {
    if prob <= 0.0 || synonyms.per_code() == 0 {
        return 0;
    }
    let mut replaced = 0;
    for t in grid.tokens_mut() {
        if rng.random_bool(prob) {
            let list = synonyms.get(*t);
            *t = list[rng.random_range(0..list.len())];
            replaced += 1;
        }
    }
    replaced
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwapOutcome {
    NotApplied,
    Swapped {
        first: (usize, usize),
        second: (usize, usize),
        side: usize,
    },
    /// No disjoint placement was found within the attempt budget.
    Skipped,
}

/// With probability `prob`, swaps two disjoint `L x L` squares, `L` uniform
/// in `[1, side / 2]`.
pub fn token_eda_rs<R: Rng + ?Sized>(grid: &mut TokenGrid, prob: f64, rng: &mut R) -> SwapOutcome {
    let n = grid.side();
    if n < 2 || prob <= 0.0 || !rng.random_bool(prob) {
        return SwapOutcome::NotApplied;
    }
    let side = rng.random_range(1..=n / 2);
    let span = n - side;
    for _ in 0..SWAP_ATTEMPTS {
        let a = (rng.random_range(0..=span), rng.random_range(0..=span));
        let b = (rng.random_range(0..=span), rng.random_range(0..=span));
        let disjoint =
            a.0 + side <= b.0 || b.0 + side <= a.0 || a.1 + side <= b.1 || b.1 + side <= a.1;
        if disjoint {
            swap_regions(grid, a, b, side);
            return SwapOutcome::Swapped {
                first: a,
                second: b,
                side,
            };
        }
    }
    SwapOutcome::Skipped
}

/// Swaps the `side x side` squares with top-left corners `a` and `b`
/// (as `(row, col)`). The squares must not overlap.
pub fn swap_regions(grid: &mut TokenGrid, a: (usize, usize), b: (usize, usize), side: usize) {
    for dr in 0..side {
        for dc in 0..side {
            let va = grid.get(a.0 + dr, a.1 + dc);
            let vb = grid.get(b.0 + dr, b.1 + dc);
            grid.set(a.0 + dr, a.1 + dc, vb);
            grid.set(b.0 + dr, b.1 + dc, va);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::Codebook;
    use crate::rng;

    fn random_grid(side: usize, vocab: u16, seed: u64) -> TokenGrid {
        let mut r = rng::stream(seed, &[]);
        TokenGrid::new(side, (0..side * side).map(|_| r.random_range(0..vocab)).collect())
            .unwrap()
    }

    #[test]
    fn sr_off_is_identity() {
        let cb = Codebook::new(1, (0..10).map(|i| i as f32).collect()).unwrap();
        let syn = cb.build_synonyms(5).unwrap();
        let original = random_grid(32, 10, 1);
        let mut g = original.clone();
        assert_eq!(token_eda_sr(&mut g, &syn, 0.0, &mut rng::stream(0, &[])), 0);
        assert_eq!(g, original);
    }

    #[test]
    fn sr_forced_flips_two_code_vocab() {
        let cb = Codebook::new(1, vec![0.0, 1.0]).unwrap();
        let syn = cb.build_synonyms(5).unwrap();
        let original = random_grid(8, 2, 2);
        let mut g = original.clone();
        assert_eq!(token_eda_sr(&mut g, &syn, 1.0, &mut rng::stream(0, &[])), 64);
        for (a, b) in original.tokens().iter().zip(g.tokens()) {
            assert_eq!(*b, 1 - *a);
        }
    }

    #[test]
    fn sr_replacement_count_is_binomial() {
        let cb = Codebook::new(1, (0..50).map(|i| i as f32).collect()).unwrap();
        let syn = cb.build_synonyms(5).unwrap();
        let mut r = rng::stream(9, &[]);
        let (n, p) = (1024.0, 0.25);
        let sigma = (n * p * (1.0f64 - p)).sqrt();
        let mut total = 0usize;
        for trial in 0..1000 {
            let mut g = random_grid(32, 50, trial);
            let k = token_eda_sr(&mut g, &syn, p, &mut r) as f64;
            assert!((k - n * p).abs() <= 5.0 * sigma, "trial {trial}: {k}");
            total += k as usize;
        }
        let mean = total as f64 / 1000.0;
        assert!((mean - n * p).abs() < 5.0 * sigma / 1000f64.sqrt());
    }

    #[test]
    fn sr_single_code_is_noop() {
        let cb = Codebook::new(2, vec![1.0, 1.0]).unwrap();
        let syn = cb.build_synonyms(5).unwrap();
        let mut g = TokenGrid::filled(4, 0);
        assert_eq!(token_eda_sr(&mut g, &syn, 1.0, &mut rng::stream(0, &[])), 0);
        assert_eq!(g, TokenGrid::filled(4, 0));
    }

    #[test]
    fn forced_swap_hand_trace() {
        let mut g = TokenGrid::new(2, vec![1, 2, 3, 4]).unwrap();
        swap_regions(&mut g, (0, 0), (1, 1), 1);
        assert_eq!(g.tokens(), &[4, 2, 3, 1]);
    }

    #[test]
    fn rs_off_is_identity() {
        let original = random_grid(32, 391, 3);
        let mut g = original.clone();
        assert_eq!(
            token_eda_rs(&mut g, 0.0, &mut rng::stream(0, &[])),
            SwapOutcome::NotApplied
        );
        assert_eq!(g, original);
    }

    #[test]
    fn rs_preserves_multiset() {
        let mut r = rng::stream(4, &[]);
        let mut swapped = 0;
        for trial in 0..500 {
            let original = random_grid(32, 391, 100 + trial);
            let mut g = original.clone();
            if let SwapOutcome::Swapped { first, second, side } = token_eda_rs(&mut g, 1.0, &mut r)
            {
                swapped += 1;
                // the swapped squares hold each other's former contents
                for dr in 0..side {
                    for dc in 0..side {
                        assert_eq!(
                            g.get(first.0 + dr, first.1 + dc),
                            original.get(second.0 + dr, second.1 + dc)
                        );
                    }
                }
            }
            let mut a = original.into_tokens();
            let mut b = g.into_tokens();
            a.sort_unstable();
            b.sort_unstable();
            assert_eq!(a, b);
        }
        assert!(swapped > 400);
    }
}
