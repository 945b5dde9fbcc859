use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{CoverageInstance, CoverageSolution};
use crate::bitset::Bitset;

/// Lazy greedy. Heap keys are stale upper bounds on marginal gain; the
/// popped candidate is re-scored and taken only if it still beats the next
/// key. Ties go to the lowest candidate position. Stops at `l` picks or
/// when no candidate adds anything.
pub fn greedy(instance: &CoverageInstance, l: usize) -> CoverageSolution {
    let mut heap: BinaryHeap<(usize, Reverse<usize>)> = (0..instance.len())
        .map(|i| (instance.column(i).count(), Reverse(i)))
        .filter(|&(g, _)| g > 0)
        .collect();
    let mut covered = Bitset::new(instance.universe());
    let mut selected = Vec::with_capacity(l);

    while selected.len() < l {
        let Some((_, Reverse(i))) = heap.pop() else {
            break;
        };
        let gain = instance.column(i).difference_count(&covered);
        if gain == 0 {
            continue;
        }
        let key = (gain, Reverse(i));
        match heap.peek() {
            Some(next) if *next > key => heap.push(key),
            _ => {
                covered.union_with(instance.column(i));
                selected.push(i);
            }
        }
    }

    CoverageSolution {
        covered: covered.count(),
        covered_bits: covered,
        selected,
        optimal: false,
        nodes: 0,
    }
}
