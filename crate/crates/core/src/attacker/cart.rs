use serde::{Deserialize, Serialize};

use crate::dataset::FeatureSchema;

pub const DEFAULT_MAX_DEPTH: usize = 5;

/// Records go left when the test holds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitTest {
    Le(f64),
    Eq(f64),
}

impl SplitTest {
    fn holds(self, v: f64) -> bool {
        match self {
            SplitTest::Le(t) => v <= t,
            SplitTest::Eq(k) => v == k,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        label: u8,
        counts: [usize; 2],
    },
    Split {
        feature: usize,
        test: SplitTest,
        left: usize,
        right: usize,
    },
}

/// A binary classification tree grown by Gini-impurity CART.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateTree {
    nodes: Vec<Node>,
    max_depth: usize,
}

impl SurrogateTree {
    /// A single leaf predicting `label`.
    pub fn constant(label: u8) -> Self {
        SurrogateTree {
            nodes: vec![Node::Leaf { label, counts: [0, 0] }],
            max_depth: 0,
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    /// Index of the leaf `x` lands in.
    pub fn leaf_of(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    test,
                    left,
                    right,
                } => {
                    i = if test.holds(x[feature]) { left } else { right };
                }
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> u8 {
        match self.nodes[self.leaf_of(x)] {
            Node::Leaf { label, .. } => label,
            Node::Split { .. } => unreachable!(),
        }
    }

    /// Length of the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// `n · gini` for class counts `[c0, c1]` with `n = c0 + c1`.
fn scaled_gini(c: [usize; 2]) -> f64 {
    let n = (c[0] + c[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let (a, b) = (c[0] as f64, c[1] as f64);
    n - (a * a + b * b) / n
}

fn count(labels: &[u8], idx: &[usize]) -> [usize; 2] {
    let ones = idx.iter().filter(|&&i| labels[i] == 1).count();
    [idx.len() - ones, ones]
}

struct Builder<'a> {
    records: &'a [Vec<f64>],
    labels: &'a [u8],
    schema: &'a FeatureSchema,
    max_depth: usize,
    min_leaf: usize,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn best_split(&self, idx: &[usize], parent: [usize; 2]) -> Option<(usize, SplitTest, f64)> {
        let mut best: Option<(usize, SplitTest, f64)> = None;
        let mut consider = |feature: usize, test: SplitTest, impurity: f64| {
            if best.is_none_or(|(_, _, b)| impurity < b - 1e-12) {
                best = Some((feature, test, impurity));
            }
        };
        for (j, feature) in self.schema.features.iter().enumerate() {
            if feature.is_categorical() {
                let mut cats: Vec<f64> = idx.iter().map(|&i| self.records[i][j]).collect();
                cats.sort_by(f64::total_cmp);
                cats.dedup();
                if cats.len() < 2 {
                    continue;
                }
                for k in cats {
                    let mut left = [0usize; 2];
                    for &i in idx {
                        if self.records[i][j] == k {
                            left[self.labels[i] as usize] += 1;
                        }
                    }
                    let right = [parent[0] - left[0], parent[1] - left[1]];
                    if left[0] + left[1] < self.min_leaf || right[0] + right[1] < self.min_leaf {
                        continue;
                    }
                    consider(j, SplitTest::Eq(k), scaled_gini(left) + scaled_gini(right));
                }
            } else {
                let mut order: Vec<usize> = idx.to_vec();
                order.sort_by(|&a, &b| self.records[a][j].total_cmp(&self.records[b][j]));
                let mut left = [0usize; 2];
                for w in 0..order.len() - 1 {
                    left[self.labels[order[w]] as usize] += 1;
                    let (lo, hi) = (self.records[order[w]][j], self.records[order[w + 1]][j]);
                    if lo == hi {
                        continue;
                    }
                    let n_left = w + 1;
                    if n_left < self.min_leaf || order.len() - n_left < self.min_leaf {
                        continue;
                    }
                    let right = [parent[0] - left[0], parent[1] - left[1]];
                    consider(
                        j,
                        SplitTest::Le(lo + (hi - lo) / 2.0),
                        scaled_gini(left) + scaled_gini(right),
                    );
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let counts = count(self.labels, &idx);
        let id = self.nodes.len();
        let label = u8::from(counts[1] > counts[0]);
        self.nodes.push(Node::Leaf { label, counts });
        if depth >= self.max_depth || counts[0] == 0 || counts[1] == 0 || idx.len() < 2 * self.min_leaf {
            return id;
        }
        let Some((feature, test, impurity)) = self.best_split(&idx, counts) else {
            return id;
        };
        if scaled_gini(counts) - impurity <= 1e-12 {
            return id;
        }
        let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| test.holds(self.records[i][feature]));
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            test,
            left,
            right,
        };
        id
    }
}

/// Grows a tree on `(records, labels)` minimizing weighted Gini impurity.
/// Continuous features split at midpoints between sorted distinct values,
/// categorical features on equality with one category. Growth stops at
/// `max_depth`, at pure nodes, when a split would leave fewer than
/// `min_leaf` records on a side, or when no split lowers impurity. Leaves
/// predict the majority label, 0 on ties. No records gives a constant-0 tree.
pub fn train_cart(
    records: &[Vec<f64>],
    labels: &[u8],
    schema: &FeatureSchema,
    max_depth: usize,
    min_leaf: usize,
) -> SurrogateTree {
    assert_eq!(records.len(), labels.len());
    if records.is_empty() {
        return SurrogateTree::constant(0);
    }
    let mut b = Builder {
        records,
        labels,
        schema,
        max_depth,
        min_leaf: min_leaf.max(1),
        nodes: Vec::new(),
    };
    b.grow((0..records.len()).collect(), 0);
    SurrogateTree {
        nodes: b.nodes,
        max_depth,
    }
}
