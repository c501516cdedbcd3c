use crate::scalar::Scalar;

use super::FeatureMatrix;

#[derive(Debug, Clone, PartialEq)]
pub enum Node<T> {
    Leaf { value: T },
    /// Rows with `x[feature] < threshold` go left.
    Split { feature: usize, threshold: T, left: u32, right: u32 },
}

/// Binary regression tree stored as an arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree<T> {
    pub(crate) nodes: Vec<Node<T>>,
    pub(crate) max_depth: usize,
}

impl<T: Scalar> RegressionTree<T> {
    pub fn leaf(value: T, max_depth: usize) -> Self {
        Self { nodes: vec![Node::Leaf { value }], max_depth }
    }

    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    /// Length of the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk<T>(nodes: &[Node<T>], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left as usize).max(walk(nodes, *right as usize)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    #[inline]
    pub fn predict_row(&self, row: &[T]) -> T {
        let mut i = 0usize;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    i = if row[feature] < threshold { left as usize } else { right as usize };
                }
            }
        }
    }
}

/// Feature columns with per-feature row orderings sorted by value, shared by
/// every tree grown on the same rows.
pub(crate) struct Presorted<T> {
    columns: Vec<Vec<T>>,
    order: Vec<Vec<u32>>,
    n: usize,
}

impl<T: Scalar> Presorted<T> {
    pub(crate) fn new(features: &FeatureMatrix<T>) -> Self {
        let n = features.rows();
        let columns: Vec<Vec<T>> = (0..features.width()).map(|j| features.column(j)).collect();
        let order = columns
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..n as u32).collect();
                idx.sort_by(|&a, &b| crate::scalar::total_cmp(col[a as usize], col[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Self { columns, order, n }
    }

    pub(crate) fn rows(&self) -> usize {
        self.n
    }
}

/// Result of growing one tree.
pub(crate) struct Grown<T> {
    pub(crate) tree: RegressionTree<T>,
    /// A node was turned into a leaf only because it sat at the depth limit.
    pub(crate) depth_bound: bool,
}

struct SplitChoice<T> {
    gain: T,
    feature: usize,
    threshold: T,
    n_left: usize,
}

/// Greedy exact-split growth on squared error. `on_leaf` receives each leaf's
/// rows and value.
pub(crate) fn grow<T: Scalar>(
    pre: &Presorted<T>,
    residuals: &[T],
    max_depth: usize,
    min_samples_leaf: usize,
    mut on_leaf: impl FnMut(&[u32], T),
) -> Grown<T> {
    let n = pre.n;
    let n_features = pre.columns.len();
    let msl = min_samples_leaf.max(1);
    let mut order = pre.order.clone();
    let mut scratch: Vec<u32> = vec![0; n];
    let mut goes_left = vec![false; n];
    let mut nodes: Vec<Node<T>> = Vec::new();
    let mut depth_bound = false;

    if n == 0 {
        return Grown { tree: RegressionTree::leaf(T::zero(), max_depth), depth_bound };
    }

    // (node id, lo, hi, depth)
    let mut stack = vec![(0u32, 0usize, n, 0usize)];
    nodes.push(Node::Leaf { value: T::zero() });

    while let Some((id, lo, hi, depth)) = stack.pop() {
        let rows = &order[0][lo..hi];
        let count = hi - lo;
        let (sum, first, constant) = {
            let first = residuals[rows[0] as usize];
            let mut sum = T::zero();
            let mut constant = true;
            for &r in rows {
                let v = residuals[r as usize];
                sum = sum + v;
                constant &= v == first;
            }
            (sum, first, constant)
        };
        let leaf_value = if constant { first } else { sum / T::from_count(count) };
        let splittable = !constant && count >= 2 * msl;
        if !splittable || depth >= max_depth {
            if splittable {
                depth_bound = true;
            }
            nodes[id as usize] = Node::Leaf { value: leaf_value };
            on_leaf(rows, leaf_value);
            continue;
        }

        let mean = sum / T::from_count(count);
        let total_c = rows.iter().fold(T::zero(), |acc, &r| acc + (residuals[r as usize] - mean));
        let base = total_c * total_c / T::from_count(count);
        let mut best: Option<SplitChoice<T>> = None;
        for f in 0..n_features {
            let col = &pre.columns[f];
            let ord = &order[f][lo..hi];
            let mut s_left = T::zero();
            for i in 0..count - 1 {
                let r = ord[i] as usize;
                s_left = s_left + (residuals[r] - mean);
                let n_left = i + 1;
                let n_right = count - n_left;
                if n_left < msl {
                    continue;
                }
                if n_right < msl {
                    break;
                }
                let x = col[r];
                let x_next = col[ord[i + 1] as usize];
                if !(x < x_next) {
                    continue;
                }
                let s_right = total_c - s_left;
                let gain = s_left * s_left / T::from_count(n_left) + s_right * s_right / T::from_count(n_right) - base;
                if best.as_ref().map_or(gain > T::zero(), |b| gain > b.gain) {
                    let mut threshold = (x + x_next) / T::from_count(2);
                    if !(threshold > x) {
                        threshold = x_next;
                    }
                    best = Some(SplitChoice { gain, feature: f, threshold, n_left });
                }
            }
        }

        let Some(choice) = best else {
            nodes[id as usize] = Node::Leaf { value: leaf_value };
            on_leaf(&order[0][lo..hi], leaf_value);
            continue;
        };

        let col = &pre.columns[choice.feature];
        for &r in &order[choice.feature][lo..hi] {
            goes_left[r as usize] = col[r as usize] < choice.threshold;
        }
        for ord in order.iter_mut() {
            let seg = &mut ord[lo..hi];
            let mut l = 0;
            let mut rgt = count;
            for &r in seg.iter() {
                if goes_left[r as usize] {
                    scratch[l] = r;
                    l += 1;
                } else {
                    rgt -= 1;
                    scratch[rgt] = r;
                }
            }
            debug_assert_eq!(l, choice.n_left);
            seg[..l].copy_from_slice(&scratch[..l]);
            // right side was filled back to front
            for (k, slot) in seg[l..].iter_mut().enumerate() {
                *slot = scratch[count - 1 - k];
            }
        }

        let left = nodes.len() as u32;
        nodes.push(Node::Leaf { value: T::zero() });
        let right = nodes.len() as u32;
        nodes.push(Node::Leaf { value: T::zero() });
        nodes[id as usize] = Node::Split { feature: choice.feature, threshold: choice.threshold, left, right };
        let mid = lo + choice.n_left;
        stack.push((right, mid, hi, depth + 1));
        stack.push((left, lo, mid, depth + 1));
    }

    Grown { tree: RegressionTree { nodes, max_depth }, depth_bound }
}

/// Fits one squared-error regression tree to `residuals`.
///
/// Candidate thresholds are midpoints between consecutive distinct values of
/// every feature; the split with the lowest summed child SSE wins, ties going
/// to the lower feature index and then the lower threshold. A node becomes a
/// leaf at the depth limit, below `2 * min_samples_leaf` rows, or when no split
/// lowers the SSE. Leaves predict their mean residual.
pub fn fit_tree<T: Scalar>(
    features: &FeatureMatrix<T>,
    residuals: &[T],
    max_depth: usize,
    min_samples_leaf: usize,
) -> RegressionTree<T> {
    assert_eq!(features.rows(), residuals.len(), "feature and residual counts differ");
    let pre = Presorted::new(features);
    grow(&pre, residuals, max_depth, min_samples_leaf, |_, _| {}).tree
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[&[f64]]) -> FeatureMatrix<f64> {
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        let n = rows.len();
        FeatureMatrix::from_rows(&rows, vec![0.0; n]).unwrap()
    }

    fn train_mae(tree: &RegressionTree<f64>, x: &FeatureMatrix<f64>, y: &[f64]) -> f64 {
        (0..x.rows()).map(|i| (tree.predict_row(x.row(i)) - y[i]).abs()).sum::<f64>() / y.len() as f64
    }

    #[test]
    fn constant_residuals_give_single_leaf() {
        let x = matrix(&[&[0.0, 1.0], &[1.0, 2.0], &[2.0, 0.5], &[3.0, 9.0]]);
        for depth in [0, 1, 5, 30] {
            let t = fit_tree(&x, &[0.1; 4], depth, 1);
            assert_eq!(t.nodes(), &[Node::Leaf { value: 0.1 }]);
        }
    }

    #[test]
    fn separable_binary_feature() {
        let x = matrix(&[&[1.0, 0.0], &[3.0, 1.0], &[7.0, 0.0], &[5.0, 1.0]]);
        let y = [2.0, -1.0, 2.0, -1.0];
        let t = fit_tree(&x, &y, 3, 1);
        assert_eq!(t.nodes().len(), 3);
        assert!(matches!(t.nodes()[0], Node::Split { feature: 1, threshold, .. } if threshold == 0.5));
        let sse: f64 = (0..4).map(|i| (t.predict_row(x.row(i)) - y[i]).powi(2)).sum();
        assert_eq!(sse, 0.0);
    }

    #[test]
    fn staircase_depth_two() {
        // Targets 0,1,2,3 over x = 0..3. Top-split candidates: 0.5 leaves SSE
        // 0 + 2 = 2, 1.5 leaves 0.5 + 0.5 = 1, 2.5 leaves 2 + 0 = 2, so the
        // greedy choice is 1.5 and each side is then split once more.
        let x = matrix(&[&[0.0], &[1.0], &[2.0], &[3.0]]);
        let y = [0.0, 1.0, 2.0, 3.0];
        let t = fit_tree(&x, &y, 2, 1);
        assert!(matches!(t.nodes()[0], Node::Split { feature: 0, threshold, .. } if threshold == 1.5));
        assert_eq!(train_mae(&t, &x, &y), 0.0);
        assert_eq!(t.depth(), 2);
        let shallow = fit_tree(&x, &y, 1, 1);
        assert_eq!(train_mae(&shallow, &x, &y), 0.5);
    }

    #[test]
    fn ties_go_to_lowest_feature() {
        // features 0 and 1 separate the target identically
        let x = matrix(&[&[0.0, 10.0], &[0.0, 10.0], &[1.0, 20.0], &[1.0, 20.0]]);
        let t = fit_tree(&x, &[0.0, 0.0, 1.0, 1.0], 1, 1);
        assert!(matches!(t.nodes()[0], Node::Split { feature: 0, .. }));
    }

    #[test]
    fn respects_min_samples_leaf() {
        let rows: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..12).map(|i| if i == 0 { 100.0 } else { 0.0 }).collect();
        let x = FeatureMatrix::from_rows(&rows, y.clone()).unwrap();
        let t = fit_tree(&x, &y, 10, 5);
        let pre = Presorted::new(&x);
        let mut sizes = Vec::new();
        grow(&pre, &y, 10, 5, |rows, _| sizes.push(rows.len()));
        assert!(sizes.iter().all(|&s| s >= 5), "{sizes:?}");
        assert_eq!(sizes.iter().sum::<usize>(), 12);
        assert!(t.depth() <= 10);
    }

    #[test]
    fn depth_limit_holds() {
        let rows: Vec<Vec<f64>> = (0..64).map(|i| vec![i as f64, (i * 7 % 13) as f64]).collect();
        let y: Vec<f64> = (0..64).map(|i| ((i * 31 % 17) as f64).sin()).collect();
        let x = FeatureMatrix::from_rows(&rows, y.clone()).unwrap();
        for d in 0..6 {
            let t = fit_tree(&x, &y, d, 1);
            assert!(t.depth() <= d);
            for n in t.nodes() {
                if let Node::Split { left, right, .. } = n {
                    assert!((*left as usize) < t.nodes().len() && (*right as usize) < t.nodes().len());
                }
            }
        }
    }

    #[test]
    fn leaf_hook_matches_traversal() {
        let rows: Vec<Vec<f32>> = (0..50).map(|i| vec![(i % 5) as f32, (i / 5) as f32 * 0.5]).collect();
        let y: Vec<f32> = (0..50).map(|i| (i % 5) as f32 * 2.0 - (i / 5) as f32).collect();
        let x = FeatureMatrix::from_rows(&rows, y.clone()).unwrap();
        let pre = Presorted::new(&x);
        let mut assigned = vec![f32::NAN; 50];
        let g = grow(&pre, &y, 4, 2, |rows, v| {
            for &r in rows {
                assigned[r as usize] = v;
            }
        });
        for i in 0..50 {
            assert_eq!(g.tree.predict_row(x.row(i)), assigned[i]);
        }
    }
}
