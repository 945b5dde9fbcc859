use super::{greedy, CoverageInstance, CoverageSolution};
use crate::bitset::Bitset;

pub const DEFAULT_NODE_LIMIT: u64 = 1_000_000;

struct Search<'a> {
    instance: &'a CoverageInstance,
    order: Vec<usize>,
    l: usize,
    node_limit: u64,
    nodes: u64,
    aborted: bool,
    best: Vec<usize>,
    best_covered: usize,
    chosen: Vec<usize>,
    // covered set at each depth, reused across the search
    levels: Vec<Bitset>,
    gains: Vec<usize>,
}

impl Search<'_> {
    fn bound(&mut self, pos: usize, depth: usize) -> usize {
        let remaining = self.l - depth;
        let covered = &self.levels[depth];
        self.gains.clear();
        for &i in &self.order[pos..] {
            let g = self.instance.column(i).difference_count(covered);
            if g > 0 {
                self.gains.push(g);
            }
        }
        if self.gains.len() > remaining {
            self.gains.select_nth_unstable_by(remaining - 1, |a, b| b.cmp(a));
            self.gains.truncate(remaining);
        }
        self.gains.iter().sum()
    }

    fn dfs(&mut self, pos: usize, covered: usize) {
        if self.aborted {
            return;
        }
        self.nodes += 1;
        if self.nodes > self.node_limit {
            self.aborted = true;
            return;
        }
        if covered > self.best_covered {
            self.best_covered = covered;
            self.best = self.chosen.clone();
        }
        let depth = self.chosen.len();
        if depth == self.l || pos == self.order.len() || self.best_covered == self.instance.universe() {
            return;
        }
        if covered + self.bound(pos, depth) <= self.best_covered {
            return;
        }
        let i = self.order[pos];
        let gain = self.instance.column(i).difference_count(&self.levels[depth]);
        if gain > 0 {
            let (lo, hi) = self.levels.split_at_mut(depth + 1);
            hi[0].clone_from(&lo[depth]);
            hi[0].union_with(self.instance.column(i));
            self.chosen.push(i);
            self.dfs(pos + 1, covered + gain);
            self.chosen.pop();
        }
        self.dfs(pos + 1, covered);
    }
}

/// Branch-and-bound over candidates ordered by column size (descending, then
/// position). The bound at a node adds the `l − |chosen|` largest residual
/// gains among the remaining candidates. Starts from the greedy solution and
/// only replaces it with strictly better ones. When `node_limit` is hit the
/// best solution found so far is returned with `optimal = false`.
pub fn exact(instance: &CoverageInstance, l: usize, node_limit: u64) -> CoverageSolution {
    let warm = greedy(instance, l);
    if l == 0 || warm.covered == instance.universe() {
        return CoverageSolution { optimal: true, ..warm };
    }
    let mut order: Vec<usize> = (0..instance.len())
        .filter(|&i| !instance.column(i).is_empty())
        .collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(instance.column(i).count()), i));

    let mut search = Search {
        instance,
        order,
        l,
        node_limit,
        nodes: 0,
        aborted: false,
        best_covered: warm.covered,
        best: warm.selected.clone(),
        chosen: Vec::with_capacity(l),
        levels: vec![Bitset::new(instance.universe()); l + 1],
        gains: Vec::new(),
    };
    search.dfs(0, 0);
    let optimal = !search.aborted;
    let nodes = search.nodes.min(node_limit);
    if search.best_covered == warm.covered {
        return CoverageSolution { optimal, nodes, ..warm };
    }
    instance.solution(search.best, optimal, nodes)
}

#[cfg(test)]
mod tests {
    use super::super::tests::{instance, random_instance};
    use super::super::{brute_force, BRUTE_FORCE_CAP};
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn beats_greedy_when_greedy_is_fooled() {
        // greedy takes the big middle column and then can only add one of the halves
        let inst = instance(6, &[&[1, 2, 3, 4], &[0, 1, 2], &[3, 4, 5]]);
        let g = greedy(&inst, 2);
        assert_eq!(g.covered, 5);
        let e = exact(&inst, 2, DEFAULT_NODE_LIMIT);
        assert_eq!(e.covered, 6);
        assert!(e.optimal);
        assert_eq!(e.condition_ids(&inst), vec![1, 2]);
    }

    #[test]
    fn zero_budget_is_trivially_optimal() {
        let inst = instance(3, &[&[0]]);
        let e = exact(&inst, 0, DEFAULT_NODE_LIMIT);
        assert!(e.optimal);
        assert_eq!(e.covered, 0);
    }

    #[test]
    fn node_limit_reports_incumbent() {
        let inst = instance(6, &[&[1, 2, 3, 4], &[0, 1, 2], &[3, 4, 5]]);
        let e = exact(&inst, 2, 1);
        assert!(!e.optimal);
        assert_eq!(e.nodes, 1);
        assert_eq!(e.covered, greedy(&inst, 2).covered);
        assert_eq!(e.covered, inst.coverage_of(&e.selected).count());
    }

    #[test]
    fn matches_brute_force_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let inst = random_instance(&mut rng, 200, 18);
            let l = rng.gen_range(0..=4);
            let e = exact(&inst, l, DEFAULT_NODE_LIMIT);
            let b = brute_force(&inst, l, BRUTE_FORCE_CAP).unwrap();
            assert!(e.optimal);
            assert_eq!(e.covered, b.covered);
            assert!(e.selected.len() <= l);
            assert!(e.covered >= greedy(&inst, l).covered);
        }
    }
}
