use super::{GraphError, TransitionGraph};

pub const MAX_CLOSURE_NODES: usize = 32;

/// Min-plus closure of `Q` with non-target intermediates.
///
/// Entries that can only be reached through a target stay infinite. A
/// disconnected direct graph is an error.
pub fn chain_closure(g: &TransitionGraph) -> Result<TransitionGraph, GraphError> {
    let n = g.len();
    if n > MAX_CLOSURE_NODES {
        return Err(GraphError::TooLarge(n));
    }
    if !g.is_connected() {
        let (from, to) = first_unreachable(g);
        return Err(GraphError::StillInfinite { from, to });
    }
    let mut q = g.q.clone();
    for k in 0..n {
        if g.is_target(k) {
            continue;
        }
        for i in 0..n {
            let qik = q[i][k];
            if !qik.is_finite() {
                continue;
            }
            for j in 0..n {
                let via = qik + q[k][j];
                if via.less_than(q[i][j]) {
                    q[i][j] = via;
                }
            }
        }
    }
    Ok(TransitionGraph {
        q,
        ..g.clone()
    })
}

fn first_unreachable(g: &TransitionGraph) -> (usize, usize) {
    let n = g.len();
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if !seen[j] && (g.direct[i][j] || g.direct[j][i]) {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    (0, seen.iter().position(|s| !s).unwrap_or(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Cost;
    use proptest::prelude::*;

    const INF: f64 = f64::INFINITY;

    #[test]
    fn three_node_line() {
        // nodes 0,1,2 with 2 as target keeps 1 available as an intermediate
        let g = TransitionGraph::from_matrix(
            vec![vec![0.0, 1.0, INF], vec![INF, 0.0, 2.0], vec![INF, INF, 0.0]],
            vec![2],
        );
        let c = chain_closure(&g).unwrap();
        assert_eq!(c.q[0][2], Cost::Finite(3.0));
    }

    #[test]
    fn targets_are_not_intermediates() {
        let g = TransitionGraph::from_matrix(
            vec![vec![0.0, 1.0, INF], vec![INF, 0.0, 2.0], vec![INF, INF, 0.0]],
            vec![1],
        );
        assert_eq!(chain_closure(&g).unwrap().q[0][2], Cost::Infinite);
    }

    #[test]
    fn disconnected_graph_is_reported() {
        let g = TransitionGraph::from_matrix(
            vec![vec![0.0, 1.0, INF], vec![1.0, 0.0, INF], vec![INF, INF, 0.0]],
            vec![0],
        );
        assert!(matches!(
            chain_closure(&g),
            Err(GraphError::StillInfinite { from: 0, to: 2 })
        ));
    }

    fn random_graph() -> impl Strategy<Value = TransitionGraph> {
        (2usize..8).prop_flat_map(|n| {
            (
                proptest::collection::vec(proptest::option::weighted(0.6, 0u32..64), n * n),
                proptest::collection::vec(any::<bool>(), n),
            )
                .prop_map(move |(cells, tflags)| {
                    let mut q = vec![vec![INF; n]; n];
                    for i in 0..n {
                        for j in 0..n {
                            // dyadic costs keep sums exact
                            q[i][j] = match cells[i * n + j] {
                                _ if i == j => 0.0,
                                Some(c) => c as f64 / 8.0,
                                None => INF,
                            };
                        }
                    }
                    // a spanning chain keeps the graph connected
                    for i in 0..n - 1 {
                        if !q[i][i + 1].is_finite() {
                            q[i][i + 1] = 1.0;
                        }
                    }
                    let mut targets: Vec<usize> = (0..n).filter(|&i| tflags[i]).collect();
                    if targets.is_empty() {
                        targets.push(0);
                    }
                    TransitionGraph::from_matrix(q, targets)
                })
        })
    }

    proptest! {
        #[test]
        fn closure_is_idempotent(g in random_graph()) {
            let once = chain_closure(&g).unwrap();
            let twice = chain_closure(&once).unwrap();
            prop_assert_eq!(once.q, twice.q);
        }

        #[test]
        fn closure_satisfies_triangle_inequality(g in random_graph()) {
            let c = chain_closure(&g).unwrap();
            let n = c.len();
            for k in c.non_targets() {
                for i in 0..n {
                    for j in 0..n {
                        let via = c.q[i][k] + c.q[k][j];
                        prop_assert!(!via.less_than(c.q[i][j]));
                    }
                }
            }
        }
    }
}
