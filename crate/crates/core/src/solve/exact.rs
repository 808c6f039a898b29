use crate::error::{Error, Result};
use crate::qubo::{Assignment, Qubo};

/// Largest problem [`solve_exact`] will enumerate.
pub const MAX_EXACT_VARIABLES: usize = 24;

/// Objective values closer than this are treated as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Incremental values are re-synchronised with an exact evaluation this
/// often to bound round-off drift.
const RESYNC_EVERY: u64 = 1 << 16;

/// Global minimiser by exhaustive enumeration.
///
/// States are visited in Gray-code order with O(degree) updates. Ties are
/// broken towards the smallest index `sum_i T_i 2^i`, so between `"10"` and
/// `"01"` the first (variable 0 set) wins and the zero QUBO returns all
/// zeros.
pub fn solve_exact(qubo: &Qubo) -> Result<Assignment> {
    let n = qubo.n();
    if n > MAX_EXACT_VARIABLES {
        return Err(Error::Size {
            n,
            max: MAX_EXACT_VARIABLES,
            what: "exact enumeration",
        });
    }
    let mut bits = vec![false; n];
    let mut value = 0.0;
    let mut index = 0u64;
    let mut best_value = 0.0;
    let mut best_index = 0u64;

    for step in 1..(1u64 << n) {
        let flip = step.trailing_zeros() as usize;
        value += qubo.flip_delta(&bits, flip);
        bits[flip] = !bits[flip];
        index ^= 1 << flip;
        if step % RESYNC_EVERY == 0 {
            value = qubo.objective_unchecked(&bits);
        }
        if value <= best_value + 1e-9 {
            let exact = qubo.objective_unchecked(&bits);
            value = exact;
            if exact < best_value - TIE_TOLERANCE {
                best_value = exact;
                best_index = index;
            } else if (exact - best_value).abs() <= TIE_TOLERANCE && index < best_index {
                best_value = best_value.min(exact);
                best_index = index;
            }
        }
    }
    Ok(Assignment::from_index(best_index, n))
}
