//! DBSCAN over a scalar feature.
//!
//! In one dimension every epsilon-neighbourhood is a contiguous run of the
//! sorted values, so neighbour counts come from two binary searches and
//! density-connected core points are exactly the runs of consecutive cores
//! whose gaps are at most epsilon. Border points join the cluster of their
//! nearest core point (the lower-valued one on a tie), which makes the result
//! independent of input order.

use crate::exec::Execution;

/// A partition of the input indices into clusters and noise.
///
/// Each cluster is sorted ascending, clusters are ordered by their smallest
/// member index, and `noise` is sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Clustering {
    pub clusters: Vec<Vec<usize>>,
    pub noise: Vec<usize>,
}

pub fn dbscan_1d(values: &[f64], epsilon: f64, min_pts: usize, exec: Execution) -> Clustering {
    let n = values.len();
    if n == 0 {
        return Clustering::default();
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();

    let is_core: Vec<bool> = exec.map_range(n, |pos| {
        let v = sorted[pos];
        let lo = sorted.partition_point(|&x| v - x > epsilon);
        let hi = sorted.partition_point(|&x| x - v <= epsilon);
        hi - lo >= min_pts
    });

    // Label runs of core points (in sorted order) separated by gaps > epsilon.
    let core_positions: Vec<usize> = (0..n).filter(|&p| is_core[p]).collect();
    let mut core_label = vec![usize::MAX; n];
    let mut label = 0usize;
    for (k, &p) in core_positions.iter().enumerate() {
        if k > 0 {
            let prev = core_positions[k - 1];
            if sorted[p] - sorted[prev] > epsilon {
                label += 1;
            }
        }
        core_label[p] = label;
    }
    let n_labels = if core_positions.is_empty() { 0 } else { label + 1 };

    let mut assigned = vec![usize::MAX; n];
    for pos in 0..n {
        if is_core[pos] {
            assigned[pos] = core_label[pos];
            continue;
        }
        let v = sorted[pos];
        // Nearest core on each side.
        let k = core_positions.partition_point(|&p| p < pos);
        let left = k.checked_sub(1).map(|j| core_positions[j]);
        let right = core_positions.get(k).copied();
        let candidate = match (left, right) {
            (Some(l), Some(r)) => {
                if v - sorted[l] <= sorted[r] - v {
                    Some(l)
                } else {
                    Some(r)
                }
            }
            (Some(l), None) => Some(l),
            (None, Some(r)) => Some(r),
            (None, None) => None,
        };
        if let Some(c) = candidate {
            if (v - sorted[c]).abs() <= epsilon {
                assigned[pos] = core_label[c];
            }
        }
    }

    let mut clusters = vec![Vec::new(); n_labels];
    let mut noise = Vec::new();
    for pos in 0..n {
        match assigned[pos] {
            usize::MAX => noise.push(order[pos]),
            l => clusters[l].push(order[pos]),
        }
    }
    for c in &mut clusters {
        c.sort_unstable();
    }
    clusters.sort_by_key(|c| c[0]);
    noise.sort_unstable();
    Clustering { clusters, noise }
}
