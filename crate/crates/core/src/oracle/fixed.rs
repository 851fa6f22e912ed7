//! Fixed-point expression graphs evaluated twice: with floor truncation on
//! the grid `2^-d`, and exactly over the rationals.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Signed;

use super::exact::{floor_shift, floor_to_grid, poly_exact, pow2, rational};
use super::OracleError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Node {
    Input(usize),
    Const(i128),
    Add(usize, usize),
    Sub(usize, usize),
    /// Product of two grid values, truncated back to the grid.
    MulTrunc(usize, usize),
    /// Product with a public grid constant, truncated back to the grid.
    ScaleTrunc(usize, i128),
    /// Division by `2^bits` with floor.
    Shift(usize, u32),
    /// Raw coefficients, lowest degree first; one floor at the end.
    Poly(usize, Vec<i128>),
}

#[derive(Clone, Debug)]
pub struct Graph {
    pub l: u32,
    pub d: u32,
    nodes: Vec<Node>,
}

/// Grid value, ideal value, and the number of floors on the longest path.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluated {
    pub raw: BigInt,
    pub exact: BigRational,
    pub truncations: usize,
}

impl Evaluated {
    /// `|raw/2^d - exact|` in ulps.
    pub fn error_ulps(&self, d: u32) -> BigRational {
        (rational(&self.raw, d) - &self.exact).abs() * BigRational::from_integer(pow2(d))
    }
}

impl Graph {
    pub fn new(l: u32, d: u32) -> Self {
        Self {
            l,
            d,
            nodes: Vec::new(),
        }
    }

    fn push(&mut self, node: Node) -> usize {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    pub fn input(&mut self, index: usize) -> usize {
        self.push(Node::Input(index))
    }

    pub fn constant(&mut self, raw: i128) -> usize {
        self.push(Node::Const(raw))
    }

    pub fn add(&mut self, a: usize, b: usize) -> usize {
        self.push(Node::Add(a, b))
    }

    pub fn sub(&mut self, a: usize, b: usize) -> usize {
        self.push(Node::Sub(a, b))
    }

    pub fn mul_trunc(&mut self, a: usize, b: usize) -> usize {
        self.push(Node::MulTrunc(a, b))
    }

    pub fn scale_trunc(&mut self, a: usize, c: i128) -> usize {
        self.push(Node::ScaleTrunc(a, c))
    }

    pub fn shift(&mut self, a: usize, bits: u32) -> usize {
        self.push(Node::Shift(a, bits))
    }

    pub fn poly(&mut self, a: usize, coeffs: &[i128]) -> usize {
        self.push(Node::Poly(a, coeffs.to_vec()))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Evaluates every node of `graph` on raw grid inputs and returns the
/// values of `outputs`. Fails when a grid value leaves the signed range of
/// `2^l`.
pub fn fixed_eval(graph: &Graph, inputs: &[i128], outputs: &[usize]) -> Result<Vec<Evaluated>, OracleError> {
    let d = graph.d;
    let limit = pow2(graph.l - 1);
    let mut vals: Vec<Evaluated> = Vec::with_capacity(graph.nodes.len());
    for (i, node) in graph.nodes.iter().enumerate() {
        let get = |k: usize| -> Result<&Evaluated, OracleError> {
            if k < i {
                Ok(&vals[k])
            } else {
                Err(OracleError::BadGraph(format!("node {i} reads node {k}")))
            }
        };
        let leaf = |raw: BigInt| Evaluated {
            exact: rational(&raw, d),
            raw,
            truncations: 0,
        };
        let v = match node {
            Node::Input(k) => {
                let raw = *inputs
                    .get(*k)
                    .ok_or_else(|| OracleError::BadGraph(format!("missing input {k}")))?;
                leaf(BigInt::from(raw))
            }
            Node::Const(c) => leaf(BigInt::from(*c)),
            Node::Add(a, b) | Node::Sub(a, b) => {
                let (a, b) = (get(*a)?, get(*b)?);
                let plus = matches!(node, Node::Add(..));
                Evaluated {
                    raw: if plus { &a.raw + &b.raw } else { &a.raw - &b.raw },
                    exact: if plus { &a.exact + &b.exact } else { &a.exact - &b.exact },
                    truncations: a.truncations.max(b.truncations),
                }
            }
            Node::MulTrunc(a, b) => {
                let (a, b) = (get(*a)?, get(*b)?);
                Evaluated {
                    raw: floor_shift(&(&a.raw * &b.raw), d),
                    exact: &a.exact * &b.exact,
                    truncations: a.truncations.max(b.truncations) + 1,
                }
            }
            Node::ScaleTrunc(a, c) => {
                let a = get(*a)?;
                let c = BigInt::from(*c);
                Evaluated {
                    raw: floor_shift(&(&a.raw * &c), d),
                    exact: &a.exact * rational(&c, d),
                    truncations: a.truncations + 1,
                }
            }
            Node::Shift(a, bits) => {
                let a = get(*a)?;
                Evaluated {
                    raw: floor_shift(&a.raw, *bits),
                    exact: &a.exact / BigRational::from_integer(pow2(*bits)),
                    truncations: a.truncations + 1,
                }
            }
            Node::Poly(a, coeffs) => {
                let a = get(*a)?;
                Evaluated {
                    raw: floor_to_grid(&poly_exact(coeffs, d, &rational(&a.raw, d)), d),
                    exact: poly_exact(coeffs, d, &a.exact),
                    truncations: a.truncations + 1,
                }
            }
        };
        if v.raw.abs() >= limit {
            return Err(OracleError::Overflow { node: i, raw: v.raw.to_string() });
        }
        vals.push(v);
    }
    outputs
        .iter()
        .map(|&o| {
            vals.get(o)
                .cloned()
                .ok_or_else(|| OracleError::BadGraph(format!("no node {o}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::exact::to_f64;

    #[test]
    fn single_mult_trun_is_exact() {
        let mut g = Graph::new(64, 16);
        let (a, b) = (g.input(0), g.input(1));
        let m = g.mul_trunc(a, b);
        let out = fixed_eval(&g, &[98304, 131072], &[m]).unwrap();
        assert_eq!(out[0].raw, BigInt::from(196608));
        assert_eq!(to_f64(&out[0].exact), 3.0);
    }

    #[test]
    fn relu_poly_at_one_within_six_ulps() {
        let mut g = Graph::new(64, 16);
        let x = g.input(0);
        let p = g.poly(x, &[14014, 32768, 15105, 0, -737, 0, 15]);
        let out = fixed_eval(&g, &[65536], &[p]).unwrap();
        assert!(out[0].error_ulps(16) <= BigRational::from_integer(6.into()));
        assert_eq!(to_f64(&out[0].exact), 0.9333038330078125);
    }

    #[test]
    fn chain_error_bounded_by_truncations() {
        let mut g = Graph::new(64, 16);
        let x = g.input(0);
        let mut acc = x;
        for _ in 0..5 {
            acc = g.mul_trunc(acc, x);
        }
        let out = fixed_eval(&g, &[-81_921], &[acc]).unwrap();
        assert_eq!(out[0].truncations, 5);
        // floors compound through the multiplier |x| ≈ 1.25
        let bound: f64 = (0..5).map(|i| 1.25f64.powi(i)).sum();
        assert!(to_f64(&out[0].error_ulps(16)) <= bound);
    }

    #[test]
    fn overflow_reported() {
        let mut g = Graph::new(16, 4);
        let x = g.input(0);
        let m = g.mul_trunc(x, x);
        assert!(matches!(fixed_eval(&g, &[4000], &[m]), Err(OracleError::Overflow { .. })));
    }

    #[test]
    fn forward_reference_rejected() {
        let mut g = Graph::new(16, 4);
        g.push(Node::Add(0, 1));
        g.input(0);
        assert!(fixed_eval(&g, &[1], &[0]).is_err());
    }
}
