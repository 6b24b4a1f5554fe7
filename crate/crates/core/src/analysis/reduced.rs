use super::check_connections;
use crate::connections::Connection;
use crate::error::{Error, Result};
use crate::network::Network;

/// How `G̃_yy` is reported at the anchor node itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Diagonal {
    /// Only nonempty paths count: `G̃_yy` is the best cycle through `y`
    /// (`-∞` when there is none).
    #[default]
    Strict,
    /// The empty path is allowed, so `G̃_yy(p) >= p`.
    EmptyPath,
}

fn improves(new: f64, old: f64) -> bool {
    if old == f64::NEG_INFINITY {
        return new > old;
    }
    new > old + 1e-12 * old.abs().max(1.0)
}

/// `G̃_xy(p_y)` for every `x`: the supremum over directed paths `x ⇝ y` of the
/// composed connections, `-∞` without a path and `+∞` when cycling along the
/// way keeps paying.
pub fn reduced_connection_map(
    net: &Network,
    g: &[Connection],
    y: usize,
    p_y: f64,
    diagonal: Diagonal,
) -> Result<Vec<f64>> {
    check_connections(net, g)?;
    let n = net.node_count();
    if y >= n {
        return Err(Error::validation(
            "y",
            format!("node index {y} out of range"),
        ));
    }
    let mut v = vec![f64::NEG_INFINITY; n];
    let anchor = |v: &[f64], z: usize| if z == y { p_y } else { v[z] };
    let sweep = |v: &[f64]| {
        let mut next = v.to_vec();
        let mut changed = Vec::new();
        for (a, &(x, z)) in net.arcs().iter().enumerate() {
            let w = anchor(v, z);
            if w == f64::NEG_INFINITY {
                continue;
            }
            let cand = g[a].eval(w);
            if improves(cand, next[x]) {
                next[x] = cand;
            }
        }
        for x in 0..n {
            if improves(next[x], v[x]) {
                changed.push(x);
            }
        }
        (next, changed)
    };
    let mut stationary = false;
    for _ in 0..=n {
        let (next, changed) = sweep(&v);
        v = next;
        if changed.is_empty() {
            stationary = true;
            break;
        }
    }
    if !stationary {
        let (_, changed) = sweep(&v);
        let mut inf = vec![false; n];
        let mut stack = changed;
        for &z in &stack {
            inf[z] = true;
        }
        while let Some(z) = stack.pop() {
            for &a in net.in_arcs(z) {
                let x = net.arc(a).0;
                if !inf[x] {
                    inf[x] = true;
                    stack.push(x);
                }
            }
        }
        for z in 0..n {
            if inf[z] {
                v[z] = f64::INFINITY;
            }
        }
    }
    if diagonal == Diagonal::EmptyPath {
        v[y] = v[y].max(p_y);
    }
    Ok(v)
}

/// `G̃_xy(p_y)` for a single pair.
pub fn reduced_connection(
    net: &Network,
    g: &[Connection],
    x: usize,
    y: usize,
    p_y: f64,
) -> Result<f64> {
    if x >= net.node_count() {
        return Err(Error::validation(
            "x",
            format!("node index {x} out of range"),
        ));
    }
    Ok(reduced_connection_map(net, g, y, p_y, Diagonal::Strict)?[x])
}

/// `G̃_xy` as exact connection functions of `p_y`, for every `x`.
///
/// `None` marks nodes without a path to `y`. The iteration takes pointwise
/// maxima of compositions, so affine inputs with a common slope stay affine
/// and piecewise-linear inputs produce their exact upper envelope. Callers
/// must have excluded profitable loops; otherwise the iteration does not
/// settle and an error is returned.
pub fn reduced_connection_functions(
    net: &Network,
    g: &[Connection],
    y: usize,
) -> Result<Vec<Option<Connection>>> {
    check_connections(net, g)?;
    let n = net.node_count();
    if y >= n {
        return Err(Error::validation(
            "y",
            format!("node index {y} out of range"),
        ));
    }
    let identity = Connection::identity();
    let mut f: Vec<Option<Connection>> = vec![None; n];
    for sweep in 0..=n {
        let mut next = f.clone();
        for (a, &(x, z)) in net.arcs().iter().enumerate() {
            let inner = if z == y {
                Some(&identity)
            } else {
                f[z].as_ref()
            };
            let Some(inner) = inner else { continue };
            let cand = g[a].then_apply_to(inner);
            next[x] = Some(match next[x].take() {
                None => cand,
                Some(cur) => cur.max_with(&cand),
            });
        }
        let settled = next.iter().zip(&f).all(|(a, b)| match (a, b) {
            (None, None) => true,
            (Some(a), Some(b)) => a.approx_eq(b, 1e-12),
            _ => false,
        });
        f = next;
        if settled {
            return Ok(f);
        }
        if sweep == n {
            break;
        }
    }
    Err(Error::NonConvergence {
        stage: "reduced connections",
        iterations: n + 1,
        residual: f64::INFINITY,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn chain() -> (Network, Vec<Connection>) {
        let net = Network::from_names(&["a", "b", "c"], &[("a", "b"), ("b", "c")]).unwrap();
        (net, vec![Connection::cost(1.0), Connection::cost(2.0)])
    }

    #[test]
    fn single_arc_path() {
        let net = Network::from_names(&["x", "y"], &[("x", "y")]).unwrap();
        let g = vec![Connection::cost(3.0)];
        assert_eq!(reduced_connection(&net, &g, 0, 1, 10.0).unwrap(), 7.0);
    }

    #[test]
    fn best_of_two_paths() {
        let net =
            Network::from_names(&["x", "y", "z"], &[("x", "y"), ("x", "z"), ("z", "y")]).unwrap();
        let g = vec![
            Connection::cost(3.0),
            Connection::cost(1.0),
            Connection::cost(1.0),
        ];
        assert_eq!(reduced_connection(&net, &g, 0, 1, 10.0).unwrap(), 8.0);
        let f = reduced_connection_functions(&net, &g, 1).unwrap();
        assert_eq!(f[0], Some(Connection::cost(2.0)));
    }

    #[test]
    fn chain_backward_induction() {
        let (net, g) = chain();
        let v = reduced_connection_map(&net, &g, 2, 10.0, Diagonal::Strict).unwrap();
        assert_eq!(v, vec![7.0, 8.0, f64::NEG_INFINITY]);
        let v = reduced_connection_map(&net, &g, 2, 10.0, Diagonal::EmptyPath).unwrap();
        assert_eq!(v[2], 10.0);
        let v = reduced_connection_map(&net, &g, 0, 10.0, Diagonal::Strict).unwrap();
        assert_eq!(v[2], f64::NEG_INFINITY);
    }

    #[test]
    fn profitable_cycle_gives_plus_infinity() {
        let net =
            Network::from_names(&["a", "b", "y"], &[("a", "b"), ("b", "a"), ("b", "y")]).unwrap();
        let g = vec![
            Connection::cost(-1.0),
            Connection::cost(0.0),
            Connection::cost(1.0),
        ];
        let v = reduced_connection_map(&net, &g, 2, 0.0, Diagonal::Strict).unwrap();
        assert_eq!(v[0], f64::INFINITY);
        assert_eq!(v[1], f64::INFINITY);
        assert!(reduced_connection_functions(&net, &g, 2).is_err());
    }

    #[test]
    fn piecewise_envelope_of_two_routes() {
        let net =
            Network::from_names(&["x", "m", "y"], &[("x", "y"), ("x", "m"), ("m", "y")]).unwrap();
        let g = vec![
            Connection::cost(1.0),
            Connection::affine(2.0, 0.0).unwrap(),
            Connection::cost(2.0),
        ];
        let f = reduced_connection_functions(&net, &g, 2).unwrap();
        let fx = f[0].as_ref().unwrap();
        for p in [-5.0, 0.0, 2.0, 3.0, 10.0] {
            let want = (p - 1.0f64).max(2.0 * (p - 2.0));
            assert!((fx.eval(p) - want).abs() < 1e-12);
            assert_eq!(reduced_connection(&net, &g, 0, 2, p).unwrap(), want);
        }
    }

    proptest! {
        #[test]
        fn monotone_and_dominant(
            keep in proptest::collection::vec(any::<bool>(), 20),
            costs in proptest::collection::vec(1u8..6, 20),
            p1 in -20.0f64..20.0, dp in 0.0f64..10.0,
        ) {
            let n = 5;
            let pairs: Vec<(usize, usize)> = (0..n)
                .flat_map(|x| (0..n).filter(move |&y| y != x).map(move |y| (x, y)))
                .collect();
            let mut arcs = Vec::new();
            let mut g = Vec::new();
            for (i, &p) in pairs.iter().enumerate() {
                if keep[i] {
                    arcs.push(p);
                    g.push(Connection::cost(costs[i] as f64));
                }
            }
            let net = Network::new((0..n).map(|i| i.to_string()).collect(), arcs).unwrap();
            let lo = reduced_connection_map(&net, &g, 0, p1, Diagonal::Strict).unwrap();
            let hi = reduced_connection_map(&net, &g, 0, p1 + dp, Diagonal::Strict).unwrap();
            let f = reduced_connection_functions(&net, &g, 0).unwrap();
            for x in 0..n {
                prop_assert!(lo[x] <= hi[x]);
                match &f[x] {
                    None => prop_assert_eq!(lo[x], f64::NEG_INFINITY),
                    Some(fx) => prop_assert!((fx.eval(p1) - lo[x]).abs() < 1e-9),
                }
            }
            for (a, &(x, y)) in net.arcs().iter().enumerate() {
                if y == 0 {
                    prop_assert!(lo[x] >= g[a].eval(p1));
                }
            }
        }
    }
}
