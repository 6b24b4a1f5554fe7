//! Graph substrate: nodes, directed arcs and the incidence operator.
//!
//! Node subsets are passed around as membership masks (`&[bool]` indexed by
//! node). The arc-node incidence matrix is never stored; `∇ᵀμ` and `∇1_B` are
//! evaluated by iterating over arcs.

use std::collections::{HashMap, HashSet, VecDeque};
use std::ops::Deref;

use crate::error::{Error, Result};

/// A finite directed network without self-loops or parallel arcs.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    names: Vec<String>,
    index: HashMap<String, usize>,
    arcs: Vec<(usize, usize)>,
    out_arcs: Vec<Vec<usize>>,
    in_arcs: Vec<Vec<usize>>,
}

impl Network {
    /// Builds a network from node names and `(from, to)` index pairs.
    pub fn new(names: Vec<String>, arcs: Vec<(usize, usize)>) -> Result<Self> {
        let mut index = HashMap::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            if index.insert(name.clone(), i).is_some() {
                return Err(Error::validation(
                    format!("nodes[{i}]"),
                    format!("duplicate node name {name:?}"),
                ));
            }
        }
        let n = names.len();
        let mut seen = HashSet::with_capacity(arcs.len());
        let mut out_arcs = vec![Vec::new(); n];
        let mut in_arcs = vec![Vec::new(); n];
        for (a, &(x, y)) in arcs.iter().enumerate() {
            if x >= n || y >= n {
                return Err(Error::validation(
                    format!("arcs[{a}]"),
                    format!("endpoint index out of range ({x}, {y}) for {n} nodes"),
                ));
            }
            if x == y {
                return Err(Error::validation(
                    format!("arcs[{a}]"),
                    format!("self-loop at node {:?}", names[x]),
                ));
            }
            if !seen.insert((x, y)) {
                return Err(Error::validation(
                    format!("arcs[{a}]"),
                    format!("duplicate arc {:?} -> {:?}", names[x], names[y]),
                ));
            }
            out_arcs[x].push(a);
            in_arcs[y].push(a);
        }
        Ok(Network {
            names,
            index,
            arcs,
            out_arcs,
            in_arcs,
        })
    }

    /// Convenience constructor from string names.
    pub fn from_names(nodes: &[&str], arcs: &[(&str, &str)]) -> Result<Self> {
        let names: Vec<String> = nodes.iter().map(|s| s.to_string()).collect();
        let lookup: HashMap<&str, usize> = nodes.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        let mut pairs = Vec::with_capacity(arcs.len());
        for (a, (x, y)) in arcs.iter().enumerate() {
            let fx = lookup.get(x).copied().ok_or_else(|| {
                Error::validation(format!("arcs[{a}].from"), format!("unknown node {x:?}"))
            })?;
            let fy = lookup.get(y).copied().ok_or_else(|| {
                Error::validation(format!("arcs[{a}].to"), format!("unknown node {y:?}"))
            })?;
            pairs.push((fx, fy));
        }
        Network::new(names, pairs)
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn arcs(&self) -> &[(usize, usize)] {
        &self.arcs
    }

    pub fn arc(&self, a: usize) -> (usize, usize) {
        self.arcs[a]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, z: usize) -> &str {
        &self.names[z]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// Arc indices leaving `z`, in insertion order.
    pub fn out_arcs(&self, z: usize) -> &[usize] {
        &self.out_arcs[z]
    }

    /// Arc indices entering `z`, in insertion order.
    pub fn in_arcs(&self, z: usize) -> &[usize] {
        &self.in_arcs[z]
    }

    pub fn find_arc(&self, x: usize, y: usize) -> Option<usize> {
        self.out_arcs[x]
            .iter()
            .copied()
            .find(|&a| self.arcs[a].1 == y)
    }

    /// `∇ᵀμ`: inflow minus outflow at every node.
    pub fn incidence_apply(&self, mu: &[f64]) -> Result<Vec<f64>> {
        if mu.len() != self.arcs.len() {
            return Err(Error::DimensionMismatch {
                what: "internal flow",
                expected: self.arcs.len(),
                found: mu.len(),
            });
        }
        let mut v = vec![0.0; self.node_count()];
        for (&(x, y), &f) in self.arcs.iter().zip(mu) {
            v[x] -= f;
            v[y] += f;
        }
        Ok(v)
    }

    /// `∇1_B`: for every arc, `1{head ∈ B} - 1{tail ∈ B}`.
    pub fn incidence_of_set(&self, set: &[bool]) -> Vec<i8> {
        self.arcs
            .iter()
            .map(|&(x, y)| set[y] as i8 - set[x] as i8)
            .collect()
    }

    /// Arcs leaving and entering `set`, as `(outward, inward)` arc-index lists.
    pub fn cut_arcs(&self, set: &[bool]) -> (Vec<usize>, Vec<usize>) {
        let mut outward = Vec::new();
        let mut inward = Vec::new();
        for (a, &(x, y)) in self.arcs.iter().enumerate() {
            match (set[x], set[y]) {
                (true, false) => outward.push(a),
                (false, true) => inward.push(a),
                _ => {}
            }
        }
        (outward, inward)
    }

    /// A set is retaining when no arc leaves it.
    pub fn is_retaining(&self, set: &[bool]) -> bool {
        self.arcs.iter().all(|&(x, y)| !set[x] || set[y])
    }

    /// A set is repelling when no arc enters it.
    pub fn is_repelling(&self, set: &[bool]) -> bool {
        self.arcs.iter().all(|&(x, y)| set[x] || !set[y])
    }

    /// Directed hop count from `from` to the nearest node of `targets`.
    pub fn hop_distance(&self, from: usize, targets: &[bool]) -> Option<usize> {
        let mut dist = vec![usize::MAX; self.node_count()];
        let mut queue = VecDeque::new();
        dist[from] = 0;
        queue.push_back(from);
        while let Some(u) = queue.pop_front() {
            if targets[u] {
                return Some(dist[u]);
            }
            for &a in &self.out_arcs[u] {
                let v = self.arcs[a].1;
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        None
    }

    /// Nodes with a directed path (possibly empty) into `targets`.
    pub fn can_reach(&self, targets: &[bool]) -> Vec<bool> {
        let mut seen = targets.to_vec();
        let mut queue: VecDeque<usize> = (0..self.node_count()).filter(|&z| targets[z]).collect();
        while let Some(v) = queue.pop_front() {
            for &a in &self.in_arcs[v] {
                let u = self.arcs[a].0;
                if !seen[u] {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        seen
    }

    /// Nodes reachable from `sources` along directed arcs (including the sources).
    pub fn reachable_from(&self, sources: &[bool]) -> Vec<bool> {
        let mut seen = sources.to_vec();
        let mut queue: VecDeque<usize> = (0..self.node_count()).filter(|&z| sources[z]).collect();
        while let Some(u) = queue.pop_front() {
            for &a in &self.out_arcs[u] {
                let v = self.arcs[a].1;
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    }

    /// The sub-network induced by the nodes in `keep`.
    ///
    /// Returns the network together with the original index of every kept node
    /// and of every kept arc.
    pub fn induced(&self, keep: &[bool]) -> (Network, Vec<usize>, Vec<usize>) {
        let node_map: Vec<usize> = (0..self.node_count()).filter(|&z| keep[z]).collect();
        let mut local = vec![usize::MAX; self.node_count()];
        for (i, &z) in node_map.iter().enumerate() {
            local[z] = i;
        }
        let mut arcs = Vec::new();
        let mut arc_map = Vec::new();
        for (a, &(x, y)) in self.arcs.iter().enumerate() {
            if keep[x] && keep[y] {
                arcs.push((local[x], local[y]));
                arc_map.push(a);
            }
        }
        let names = node_map.iter().map(|&z| self.names[z].clone()).collect();
        let net = Network::new(names, arcs).expect("induced sub-network of a valid network");
        (net, node_map, arc_map)
    }

    /// Same nodes, only the arcs flagged in `keep_arcs`; returns the kept arc indices.
    pub fn with_arcs(&self, keep_arcs: &[bool]) -> (Network, Vec<usize>) {
        let arc_map: Vec<usize> = (0..self.arc_count()).filter(|&a| keep_arcs[a]).collect();
        let arcs = arc_map.iter().map(|&a| self.arcs[a]).collect();
        let net = Network::new(self.names.clone(), arcs).expect("arc subset of a valid network");
        (net, arc_map)
    }

    /// Strongly connected components, as a component id per node plus the
    /// member lists. Components are numbered in the order Kosaraju's second
    /// pass discovers them, which is a topological order of the condensation
    /// (a component only has arcs into components with a larger id).
    pub fn strongly_connected_components(&self) -> (Vec<usize>, Vec<Vec<usize>>) {
        let n = self.node_count();
        let mut visited = vec![false; n];
        let mut order = Vec::with_capacity(n);
        for s in 0..n {
            if visited[s] {
                continue;
            }
            visited[s] = true;
            let mut stack = vec![(s, 0usize)];
            while let Some(&mut (u, ref mut i)) = stack.last_mut() {
                if *i < self.out_arcs[u].len() {
                    let v = self.arcs[self.out_arcs[u][*i]].1;
                    *i += 1;
                    if !visited[v] {
                        visited[v] = true;
                        stack.push((v, 0));
                    }
                } else {
                    order.push(u);
                    stack.pop();
                }
            }
        }
        let mut comp = vec![usize::MAX; n];
        let mut members = Vec::new();
        for &s in order.iter().rev() {
            if comp[s] != usize::MAX {
                continue;
            }
            let id = members.len();
            let mut list = vec![s];
            comp[s] = id;
            let mut stack = vec![s];
            while let Some(v) = stack.pop() {
                for &a in &self.in_arcs[v] {
                    let u = self.arcs[a].0;
                    if comp[u] == usize::MAX {
                        comp[u] = id;
                        list.push(u);
                        stack.push(u);
                    }
                }
            }
            list.sort_unstable();
            members.push(list);
        }
        (comp, members)
    }
}

/// Builds a membership mask over `n` nodes.
pub fn mask(n: usize, members: impl IntoIterator<Item = usize>) -> Vec<bool> {
    let mut m = vec![false; n];
    for z in members {
        m[z] = true;
    }
    m
}

/// Indices set in a membership mask.
pub fn members(set: &[bool]) -> Vec<usize> {
    set.iter()
        .enumerate()
        .filter_map(|(i, &b)| b.then_some(i))
        .collect()
}

/// Exit flow `q`: positive at targets (net inflow), negative at sources.
#[derive(Debug, Clone, PartialEq)]
pub struct ExitFlow(Vec<f64>);

impl ExitFlow {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(
                format!("q[{i}]"),
                "exit flow must be finite",
            ));
        }
        Ok(ExitFlow(values))
    }

    pub fn zeros(n: usize) -> Self {
        ExitFlow(vec![0.0; n])
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// `q(B)`.
    pub fn mass_of(&self, set: &[bool]) -> f64 {
        self.0
            .iter()
            .zip(set)
            .filter_map(|(q, &b)| b.then_some(*q))
            .sum()
    }

    pub fn check_balanced(&self, eps: f64) -> Result<()> {
        let sum = self.sum();
        if sum.abs() > eps {
            return Err(Error::Unbalanced { sum });
        }
        Ok(())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ExitFlow {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Internal flow `μ ∈ ℝ₊^A`.
#[derive(Debug, Clone, PartialEq)]
pub struct InternalFlow(Vec<f64>);

impl InternalFlow {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::validation(
                format!("mu[{i}]"),
                "internal flow must be finite and nonnegative",
            ));
        }
        Ok(InternalFlow(values))
    }

    pub fn zeros(n: usize) -> Self {
        InternalFlow(vec![0.0; n])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for InternalFlow {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn triangle() -> Network {
        Network::from_names(&["a", "b", "c"], &[("a", "b"), ("b", "c"), ("a", "c")]).unwrap()
    }

    #[test]
    fn incidence_single_arc_and_zero() {
        let net = Network::from_names(&["a", "b"], &[("a", "b")]).unwrap();
        assert_eq!(net.incidence_apply(&[1.0]).unwrap(), vec![-1.0, 1.0]);
        assert_eq!(net.incidence_apply(&[0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn incidence_triangle() {
        let v = triangle().incidence_apply(&[2.0, 2.0, 1.0]).unwrap();
        assert_eq!(v, vec![-3.0, 0.0, 3.0]);
    }

    #[test]
    fn incidence_dimension_mismatch() {
        assert!(matches!(
            triangle().incidence_apply(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn cut_arcs_examples() {
        let net = triangle();
        assert_eq!(net.cut_arcs(&[true; 3]), (vec![], vec![]));
        assert_eq!(net.cut_arcs(&[false; 3]), (vec![], vec![]));
        assert_eq!(net.cut_arcs(&[true, true, false]), (vec![1, 2], vec![]));
    }

    #[test]
    fn retaining_examples() {
        let net = Network::from_names(&["a", "b"], &[("a", "b")]).unwrap();
        assert!(net.is_retaining(&[true, true]));
        assert!(!net.is_retaining(&[true, false]));
        assert!(net.is_retaining(&[false, true]));
    }

    #[test]
    fn hop_distance_examples() {
        let chain = Network::from_names(&["a", "b", "c"], &[("a", "b"), ("b", "c")]).unwrap();
        assert_eq!(chain.hop_distance(0, &[true, false, false]), Some(0));
        assert_eq!(chain.hop_distance(0, &[false, false, true]), Some(2));
        let arc = Network::from_names(&["a", "b"], &[("a", "b")]).unwrap();
        assert_eq!(arc.hop_distance(1, &[true, false]), None);
    }

    #[test]
    fn rejects_self_loops_and_parallel_arcs() {
        assert!(Network::from_names(&["a"], &[("a", "a")]).is_err());
        assert!(Network::from_names(&["a", "b"], &[("a", "b"), ("a", "b")]).is_err());
        assert!(Network::new(vec!["a".into()], vec![(0, 3)]).is_err());
        assert!(Network::new(vec!["a".into(), "a".into()], vec![]).is_err());
    }

    #[test]
    fn scc_orders_condensation_topologically() {
        let net = Network::from_names(
            &["a", "b", "c", "d"],
            &[("a", "b"), ("b", "a"), ("b", "c"), ("c", "d"), ("d", "c")],
        )
        .unwrap();
        let (comp, members) = net.strongly_connected_components();
        assert_eq!(members.len(), 2);
        assert_eq!(comp[0], comp[1]);
        assert_eq!(comp[2], comp[3]);
        assert!(comp[0] < comp[2]);
    }

    fn arb_network() -> impl Strategy<Value = (Network, Vec<f64>, Vec<f64>, Vec<bool>)> {
        (2usize..8).prop_flat_map(|n| {
            let pairs: Vec<(usize, usize)> = (0..n)
                .flat_map(|x| (0..n).filter(move |&y| y != x).map(move |y| (x, y)))
                .collect();
            let m = pairs.len();
            (
                proptest::collection::vec(any::<bool>(), m),
                proptest::collection::vec(0u8..6, m),
                proptest::collection::vec(0u8..6, m),
                proptest::collection::vec(any::<bool>(), n),
            )
                .prop_map(move |(keep, f1, f2, set)| {
                    let arcs: Vec<(usize, usize)> = pairs
                        .iter()
                        .zip(&keep)
                        .filter_map(|(p, &k)| k.then_some(*p))
                        .collect();
                    let k = arcs.len();
                    let names = (0..n).map(|i| format!("n{i}")).collect();
                    let net = Network::new(names, arcs).unwrap();
                    let f1 = f1[..k].iter().map(|&v| v as f64).collect();
                    let f2 = f2[..k].iter().map(|&v| v as f64).collect();
                    (net, f1, f2, set)
                })
        })
    }

    proptest! {
        #[test]
        fn incidence_is_linear_and_conserves((net, f1, f2, _set) in arb_network()) {
            let v1 = net.incidence_apply(&f1).unwrap();
            let v2 = net.incidence_apply(&f2).unwrap();
            let sum: Vec<f64> = f1.iter().zip(&f2).map(|(a, b)| a + b).collect();
            let v12 = net.incidence_apply(&sum).unwrap();
            for z in 0..net.node_count() {
                prop_assert_eq!(v12[z], v1[z] + v2[z]);
            }
            prop_assert_eq!(v1.iter().sum::<f64>(), 0.0);
        }

        #[test]
        fn retaining_duality_and_cut_partition((net, _f1, _f2, set) in arb_network()) {
            let complement: Vec<bool> = set.iter().map(|b| !b).collect();
            prop_assert_eq!(net.is_retaining(&set), net.is_repelling(&complement));
            let signs = net.incidence_of_set(&set);
            prop_assert_eq!(net.is_retaining(&set), signs.iter().all(|&s| s >= 0));
            let (out, inw) = net.cut_arcs(&set);
            let crossing = net.arcs().iter().filter(|&&(x, y)| set[x] != set[y]).count();
            prop_assert_eq!(out.len() + inw.len(), crossing);
            prop_assert!(out.iter().all(|a| !inw.contains(a)));
        }
    }
}
