use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::model::GraphicalModel;

/// A permutation of the model's variables together with the induced width
/// obtained by eliminating along it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EliminationOrder {
    order: Vec<usize>,
    induced_width: usize,
}

impl EliminationOrder {
    /// Wraps an explicit order, checking it is a permutation of the model's
    /// variables and computing its induced width.
    pub fn from_permutation(model: &GraphicalModel, order: Vec<usize>) -> Result<Self> {
        let n = model.num_variables();
        if order.len() != n {
            return Err(Error::InvalidOrder(format!(
                "expected {n} variables, got {}",
                order.len()
            )));
        }
        let mut seen = vec![false; n];
        for &v in &order {
            if v >= n {
                return Err(Error::InvalidOrder(format!("unknown variable {v}")));
            }
            if std::mem::replace(&mut seen[v], true) {
                return Err(Error::InvalidOrder(format!("variable {v} appears twice")));
            }
        }
        let mut graph = primal_graph(model);
        let mut width = 0;
        for &v in &order {
            width = width.max(eliminate(&mut graph, v));
        }
        Ok(Self {
            order,
            induced_width: width,
        })
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn induced_width(&self) -> usize {
        self.induced_width
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

fn primal_graph(model: &GraphicalModel) -> Vec<BTreeSet<usize>> {
    let mut adj = vec![BTreeSet::new(); model.num_variables()];
    for f in &model.factors {
        let s = f.scope();
        for (i, &a) in s.iter().enumerate() {
            for &b in &s[i + 1..] {
                if a != b && a < adj.len() && b < adj.len() {
                    adj[a].insert(b);
                    adj[b].insert(a);
                }
            }
        }
    }
    adj
}

/// Removes `v`, connecting its neighbours. Returns the neighbour count.
fn eliminate(adj: &mut [BTreeSet<usize>], v: usize) -> usize {
    let nbrs: Vec<usize> = std::mem::take(&mut adj[v]).into_iter().collect();
    for &a in &nbrs {
        adj[a].remove(&v);
    }
    for (i, &a) in nbrs.iter().enumerate() {
        for &b in &nbrs[i + 1..] {
            adj[a].insert(b);
            adj[b].insert(a);
        }
    }
    nbrs.len()
}

fn fill_in(adj: &[BTreeSet<usize>], v: usize) -> usize {
    let nbrs: Vec<usize> = adj[v].iter().copied().collect();
    let mut fill = 0;
    for (i, &a) in nbrs.iter().enumerate() {
        for &b in &nbrs[i + 1..] {
            if !adj[a].contains(&b) {
                fill += 1;
            }
        }
    }
    fill
}

/// Greedy min-fill elimination order; ties go to the lowest variable id.
pub fn min_fill_order(model: &GraphicalModel) -> EliminationOrder {
    let n = model.num_variables();
    let mut adj = primal_graph(model);
    let mut remaining: BTreeSet<usize> = (0..n).collect();
    let mut order = Vec::with_capacity(n);
    let mut width = 0;
    while let Some(&first) = remaining.iter().next() {
        let mut best = first;
        let mut best_fill = usize::MAX;
        for &v in &remaining {
            let fill = fill_in(&adj, v);
            if fill < best_fill {
                best = v;
                best_fill = fill;
                if fill == 0 {
                    break;
                }
            }
        }
        width = width.max(eliminate(&mut adj, best));
        remaining.remove(&best);
        order.push(best);
    }
    EliminationOrder {
        order,
        induced_width: width,
    }
}
