//! Connection functions and their algebra.
//!
//! Every supported family is continuous, strictly increasing and onto ℝ, and
//! is closed under inversion, composition and pointwise maximum. All three
//! operations are carried out exactly on breakpoint representations, so a
//! composed or enveloped function is again a plain [`Connection`].

use std::fmt;

use crate::error::{Error, Result};

/// Coordinates closer than this (relative) are merged when canonicalizing.
const MERGE_EPS: f64 = 1e-12;

/// A continuous, strictly increasing, surjective map `G: ℝ → ℝ`.
#[derive(Debug, Clone, PartialEq)]
pub enum Connection {
    /// `G(p) = slope * p + intercept`.
    Affine { slope: f64, intercept: f64 },
    /// Linear interpolation between breakpoints, linear extrapolation outside.
    PiecewiseLinear(PiecewiseLinear),
    /// `G(p) = p - n`; the completion arcs of a bipartite problem.
    Penalty { n: f64 },
}

/// Breakpoints `(p, G(p))` with strictly increasing coordinates plus the
/// slopes used beyond the first and last breakpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    points: Vec<(f64, f64)>,
    left_slope: f64,
    right_slope: f64,
}

impl PiecewiseLinear {
    pub fn new(points: Vec<(f64, f64)>, left_slope: f64, right_slope: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::validation(
                "points",
                "at least one breakpoint is required",
            ));
        }
        for (i, &(p, g)) in points.iter().enumerate() {
            if !p.is_finite() || !g.is_finite() {
                return Err(Error::validation(
                    format!("points[{i}]"),
                    "breakpoints must be finite",
                ));
            }
            if i > 0 {
                let (pp, pg) = points[i - 1];
                if p <= pp {
                    return Err(Error::validation(
                        format!("points[{i}]"),
                        "breakpoint prices must be strictly increasing",
                    ));
                }
                if g <= pg {
                    return Err(Error::validation(
                        format!("points[{i}]"),
                        "breakpoint values must be strictly increasing",
                    ));
                }
            }
        }
        for (name, s) in [("left_slope", left_slope), ("right_slope", right_slope)] {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::validation(
                    name,
                    "end slopes must be finite and positive",
                ));
            }
        }
        Ok(PiecewiseLinear {
            points,
            left_slope,
            right_slope,
        })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn left_slope(&self) -> f64 {
        self.left_slope
    }

    pub fn right_slope(&self) -> f64 {
        self.right_slope
    }

    fn affine(slope: f64, intercept: f64) -> Self {
        PiecewiseLinear {
            points: vec![(0.0, intercept)],
            left_slope: slope,
            right_slope: slope,
        }
    }

    pub fn eval(&self, p: f64) -> f64 {
        let pts = &self.points;
        let k = pts.partition_point(|&(x, _)| x <= p);
        if k == 0 {
            let (x0, y0) = pts[0];
            y0 + self.left_slope * (p - x0)
        } else if k == pts.len() {
            let (xn, yn) = pts[k - 1];
            yn + self.right_slope * (p - xn)
        } else {
            let (x0, y0) = pts[k - 1];
            let (x1, y1) = pts[k];
            if p == x0 {
                y0
            } else {
                y0 + (y1 - y0) * ((p - x0) / (x1 - x0))
            }
        }
    }

    /// `G⁻¹(g)` without materializing the inverse.
    pub fn solve_for(&self, g: f64) -> f64 {
        let pts = &self.points;
        let k = pts.partition_point(|&(_, y)| y <= g);
        if k == 0 {
            let (x0, y0) = pts[0];
            x0 + (g - y0) / self.left_slope
        } else if k == pts.len() {
            let (xn, yn) = pts[k - 1];
            xn + (g - yn) / self.right_slope
        } else {
            let (x0, y0) = pts[k - 1];
            let (x1, y1) = pts[k];
            if g == y0 {
                x0
            } else {
                x0 + (x1 - x0) * ((g - y0) / (y1 - y0))
            }
        }
    }

    pub fn inverse(&self) -> Self {
        PiecewiseLinear {
            points: self.points.iter().map(|&(p, g)| (g, p)).collect(),
            left_slope: 1.0 / self.left_slope,
            right_slope: 1.0 / self.right_slope,
        }
    }

    /// `self ∘ inner`.
    fn compose(&self, inner: &PiecewiseLinear) -> PiecewiseLinear {
        let mut xs: Vec<f64> = inner.points.iter().map(|&(p, _)| p).collect();
        xs.extend(self.points.iter().map(|&(p, _)| inner.solve_for(p)));
        let points = sorted_unique(xs)
            .into_iter()
            .map(|x| (x, self.eval(inner.eval(x))))
            .collect();
        PiecewiseLinear {
            points,
            left_slope: self.left_slope * inner.left_slope,
            right_slope: self.right_slope * inner.right_slope,
        }
        .canonical()
    }

    /// Pointwise maximum of two increasing piecewise-linear maps.
    fn max(&self, other: &PiecewiseLinear) -> PiecewiseLinear {
        let diff = |x: f64| self.eval(x) - other.eval(x);
        let mut xs: Vec<f64> = self
            .points
            .iter()
            .chain(&other.points)
            .map(|&(p, _)| p)
            .collect();
        xs = sorted_unique(xs);
        let mut cand = xs.clone();
        for w in xs.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (da, db) = (diff(a), diff(b));
            if (da > 0.0 && db < 0.0) || (da < 0.0 && db > 0.0) {
                cand.push(a + (b - a) * (da / (da - db)));
            }
        }
        let (x0, xn) = (xs[0], xs[xs.len() - 1]);
        let ds_left = self.left_slope - other.left_slope;
        let d0 = diff(x0);
        if ds_left != 0.0 && d0 != 0.0 && d0 / ds_left > 0.0 {
            cand.push(x0 - d0 / ds_left);
        }
        let ds_right = self.right_slope - other.right_slope;
        let dn = diff(xn);
        if ds_right != 0.0 && dn != 0.0 && dn / ds_right < 0.0 {
            cand.push(xn - dn / ds_right);
        }
        let cand = sorted_unique(cand);
        let lo = cand[0];
        let hi = cand[cand.len() - 1];
        let points = cand
            .iter()
            .map(|&x| (x, self.eval(x).max(other.eval(x))))
            .collect();
        let left_slope = if diff(lo) - ds_left >= 0.0 {
            self.left_slope
        } else {
            other.left_slope
        };
        let right_slope = if diff(hi) + ds_right >= 0.0 {
            self.right_slope
        } else {
            other.right_slope
        };
        PiecewiseLinear {
            points,
            left_slope,
            right_slope,
        }
        .canonical()
    }

    /// Merges near-coincident breakpoints and drops collinear ones.
    fn canonical(mut self) -> PiecewiseLinear {
        let mut pts: Vec<(f64, f64)> = Vec::with_capacity(self.points.len());
        for &(x, y) in &self.points {
            match pts.last() {
                Some(&(px, py)) if x - px <= MERGE_EPS * px.abs().max(1.0) || y <= py => {}
                _ => pts.push((x, y)),
            }
        }
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
        for i in 0..pts.len() {
            let (x, y) = pts[i];
            let slope_in = match out.last() {
                Some(&(px, py)) => (y - py) / (x - px),
                None => self.left_slope,
            };
            let slope_out = if i + 1 < pts.len() {
                let (nx, ny) = pts[i + 1];
                (ny - y) / (nx - x)
            } else {
                self.right_slope
            };
            let keep =
                (slope_in - slope_out).abs() > MERGE_EPS * slope_in.abs().max(slope_out.abs());
            if keep || (i + 1 == pts.len() && out.is_empty()) {
                out.push((x, y));
            }
        }
        if out.is_empty() {
            out.push(pts[0]);
        }
        if out.len() == 1
            && (self.left_slope - self.right_slope).abs() <= MERGE_EPS * self.left_slope
        {
            self.right_slope = self.left_slope;
        }
        self.points = out;
        self
    }

    /// Is this a single line (one breakpoint, equal end slopes)?
    fn as_line(&self) -> Option<(f64, f64)> {
        if self.points.len() == 1 && self.left_slope == self.right_slope {
            let (x, y) = self.points[0];
            Some((self.left_slope, y - self.left_slope * x))
        } else {
            None
        }
    }
}

fn sorted_unique(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

impl Connection {
    pub fn affine(slope: f64, intercept: f64) -> Result<Self> {
        if !(slope.is_finite() && slope > 0.0) {
            return Err(Error::validation(
                "slope",
                "slope must be finite and positive",
            ));
        }
        if !intercept.is_finite() {
            return Err(Error::validation("intercept", "intercept must be finite"));
        }
        Ok(Connection::Affine { slope, intercept })
    }

    /// Transferable-utility arc with unit cost `c`: `G(p) = p - c`.
    pub fn cost(c: f64) -> Self {
        Connection::Affine {
            slope: 1.0,
            intercept: -c,
        }
    }

    pub fn identity() -> Self {
        Connection::Affine {
            slope: 1.0,
            intercept: 0.0,
        }
    }

    pub fn penalty(n: f64) -> Result<Self> {
        if !n.is_finite() {
            return Err(Error::validation("n", "penalty must be finite"));
        }
        Ok(Connection::Penalty { n })
    }

    pub fn piecewise(points: Vec<(f64, f64)>, left_slope: f64, right_slope: f64) -> Result<Self> {
        Ok(Connection::PiecewiseLinear(PiecewiseLinear::new(
            points,
            left_slope,
            right_slope,
        )?))
    }

    pub fn eval(&self, p: f64) -> f64 {
        match self {
            Connection::Affine { slope, intercept } => slope * p + intercept,
            Connection::Penalty { n } => p - n,
            Connection::PiecewiseLinear(f) => f.eval(p),
        }
    }

    /// `G⁻¹(g)`.
    pub fn solve_for(&self, g: f64) -> f64 {
        match self {
            Connection::Affine { slope, intercept } => (g - intercept) / slope,
            Connection::Penalty { n } => g + n,
            Connection::PiecewiseLinear(f) => f.solve_for(g),
        }
    }

    pub fn inverse(&self) -> Connection {
        match self {
            Connection::Affine { slope, intercept } => Connection::Affine {
                slope: 1.0 / slope,
                intercept: -intercept / slope,
            },
            Connection::Penalty { n } => Connection::Affine {
                slope: 1.0,
                intercept: *n,
            },
            Connection::PiecewiseLinear(f) => Connection::PiecewiseLinear(f.inverse()),
        }
    }

    /// `(slope, intercept)` for the affine families.
    pub fn as_affine(&self) -> Option<(f64, f64)> {
        match self {
            Connection::Affine { slope, intercept } => Some((*slope, *intercept)),
            Connection::Penalty { n } => Some((1.0, -n)),
            Connection::PiecewiseLinear(_) => None,
        }
    }

    pub fn is_affine(&self) -> bool {
        self.as_affine().is_some()
    }

    /// Transferable utility: an affine map of slope exactly one.
    pub fn is_transferable(&self) -> bool {
        matches!(self.as_affine(), Some((s, _)) if s == 1.0)
    }

    pub fn is_penalty(&self) -> bool {
        matches!(self, Connection::Penalty { .. })
    }

    /// Breakpoint prices (empty for the affine families).
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Connection::PiecewiseLinear(f) => f.points.iter().map(|&(p, _)| p).collect(),
            _ => Vec::new(),
        }
    }

    pub fn to_piecewise(&self) -> PiecewiseLinear {
        match self {
            Connection::PiecewiseLinear(f) => f.clone(),
            other => {
                let (s, b) = other.as_affine().expect("affine family");
                PiecewiseLinear::affine(s, b)
            }
        }
    }

    fn from_piecewise(f: PiecewiseLinear) -> Connection {
        match f.as_line() {
            Some((slope, intercept)) => Connection::Affine { slope, intercept },
            None => Connection::PiecewiseLinear(f),
        }
    }

    /// Exact `self ∘ inner`. Affine chains stay affine.
    pub fn then_apply_to(&self, inner: &Connection) -> Connection {
        match (self.as_affine(), inner.as_affine()) {
            (Some((s1, b1)), Some((s2, b2))) => Connection::Affine {
                slope: s1 * s2,
                intercept: s1 * b2 + b1,
            },
            _ => Connection::from_piecewise(self.to_piecewise().compose(&inner.to_piecewise())),
        }
    }

    /// Exact pointwise maximum (upper envelope).
    pub fn max_with(&self, other: &Connection) -> Connection {
        if let (Some((s1, b1)), Some((s2, b2))) = (self.as_affine(), other.as_affine()) {
            if s1 == s2 {
                return if b1 >= b2 {
                    self.clone()
                } else {
                    other.clone()
                };
            }
        }
        Connection::from_piecewise(self.to_piecewise().max(&other.to_piecewise()))
    }

    /// Semantic equality within a relative tolerance: equal tail slopes and
    /// equal values at every breakpoint of either function.
    pub fn approx_eq(&self, other: &Connection, rel: f64) -> bool {
        let f = self.to_piecewise();
        let g = other.to_piecewise();
        let close = |a: f64, b: f64| (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0);
        close(f.left_slope, g.left_slope)
            && close(f.right_slope, g.right_slope)
            && f.points
                .iter()
                .chain(&g.points)
                .all(|&(p, _)| close(f.eval(p), g.eval(p)))
    }
}

impl fmt::Display for Connection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Connection::Affine { slope, intercept } if *slope == 1.0 => {
                write!(f, "p{:+}", intercept)
            }
            Connection::Affine { slope, intercept } => write!(f, "{slope}p{intercept:+}"),
            Connection::Penalty { n } => write!(f, "p-{n} (penalty)"),
            Connection::PiecewiseLinear(g) => {
                write!(f, "pwl[")?;
                for (i, (p, v)) in g.points.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "({p},{v})")?;
                }
                write!(f, "; {}/{}]", g.left_slope, g.right_slope)
            }
        }
    }
}

/// A chain `G₁ ∘ G₂ ∘ … ∘ Gₖ`, applied right to left.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComposedConnection {
    chain: Vec<Connection>,
}

impl ComposedConnection {
    /// The empty chain, i.e. the identity map.
    pub fn identity() -> Self {
        ComposedConnection { chain: Vec::new() }
    }

    pub fn from_chain(chain: Vec<Connection>) -> Self {
        let mut out = ComposedConnection::identity();
        for g in chain.into_iter().rev() {
            out = ComposedConnection::compose(&g, &out);
        }
        out
    }

    pub fn chain(&self) -> &[Connection] {
        &self.chain
    }

    pub fn eval(&self, p: f64) -> f64 {
        self.chain.iter().rev().fold(p, |v, g| g.eval(v))
    }

    /// `outer ∘ inner`; a chain of affine maps is collapsed into one.
    pub fn compose(outer: &Connection, inner: &ComposedConnection) -> ComposedConnection {
        match inner.chain.as_slice() {
            [] => ComposedConnection {
                chain: vec![outer.clone()],
            },
            [single] if outer.is_affine() && single.is_affine() => ComposedConnection {
                chain: vec![outer.then_apply_to(single)],
            },
            _ => {
                let mut chain = Vec::with_capacity(inner.chain.len() + 1);
                chain.push(outer.clone());
                chain.extend(inner.chain.iter().cloned());
                ComposedConnection { chain }
            }
        }
    }

    /// Collapses the chain into a single exact connection function.
    pub fn collapse(&self) -> Connection {
        self.chain
            .iter()
            .rev()
            .fold(Connection::identity(), |acc, g| g.then_apply_to(&acc))
    }
}

impl From<Connection> for ComposedConnection {
    fn from(g: Connection) -> Self {
        ComposedConnection { chain: vec![g] }
    }
}
