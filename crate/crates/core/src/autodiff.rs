//! Forward- and reverse-mode differentiation of scalar computational
//! graphs built from a handful of primitives.
//!
//! Nodes can only refer to nodes created before them, so creation order is
//! a topological order and every graph is acyclic.

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn from_index(i: usize) -> Self {
        Self(i)
    }

    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Op {
    /// The `k`-th input.
    Input(usize),
    Constant(f64),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Neg(NodeId),
    Log(NodeId),
    Exp(NodeId),
    Square(NodeId),
}

/// Local partial derivatives of a node with respect to each operand slot.
fn partials(op: &Op, z: &[f64], own: f64) -> [(Option<NodeId>, f64); 2] {
    match *op {
        Op::Input(_) | Op::Constant(_) => [(None, 0.0), (None, 0.0)],
        Op::Add(a, b) => [(Some(a), 1.0), (Some(b), 1.0)],
        Op::Sub(a, b) => [(Some(a), 1.0), (Some(b), -1.0)],
        Op::Mul(a, b) => [(Some(a), z[b.0]), (Some(b), z[a.0])],
        Op::Neg(a) => [(Some(a), -1.0), (None, 0.0)],
        Op::Log(a) => [(Some(a), 1.0 / z[a.0]), (None, 0.0)],
        Op::Exp(a) => [(Some(a), own), (None, 0.0)],
        Op::Square(a) => [(Some(a), 2.0 * z[a.0]), (None, 0.0)],
    }
}

/// A static graph with one output node.
#[derive(Clone, Debug, Default)]
pub struct TapeGraph {
    nodes: Vec<Op>,
    inputs: usize,
    output: Option<NodeId>,
}

/// Intermediate values `zᵢ` of a forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub values: Vec<f64>,
    pub output: f64,
}

/// Result of a reverse sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub values: Vec<f64>,
    /// `z̄ᵢ = ∂y/∂zᵢ` for every node.
    pub adjoints: Vec<f64>,
    /// Number of increments each node's adjoint received.
    pub contributions: Vec<usize>,
    /// `∂y/∂xₖ` in input order.
    pub gradient: Vec<f64>,
}

impl TapeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn num_inputs(&self) -> usize {
        self.inputs
    }

    pub fn nodes(&self) -> &[Op] {
        &self.nodes
    }

    pub fn output(&self) -> Option<NodeId> {
        self.output
    }

    /// Appends a node. Panics if an operand does not belong to this graph.
    pub fn push(&mut self, op: Op) -> NodeId {
        for a in operands(&op) {
            assert!(a.0 < self.nodes.len(), "operand {a:?} is not an earlier node");
        }
        if let Op::Input(k) = op {
            assert_eq!(k, self.inputs, "inputs must be created in order");
            self.inputs += 1;
        }
        self.nodes.push(op);
        let id = NodeId(self.nodes.len() - 1);
        self.output = Some(id);
        id
    }

    pub fn input(&mut self) -> NodeId {
        self.push(Op::Input(self.inputs))
    }

    pub fn constant(&mut self, v: f64) -> NodeId {
        self.push(Op::Constant(v))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Mul(a, b))
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Neg(a))
    }

    pub fn log(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Log(a))
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Exp(a))
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Square(a))
    }

    /// Selects the output; by default it is the most recent node.
    pub fn set_output(&mut self, id: NodeId) {
        assert!(id.0 < self.nodes.len(), "output {id:?} is not a node");
        self.output = Some(id);
    }

    fn output_id(&self) -> Result<NodeId> {
        self.output.ok_or_else(|| Error::Contract("graph has no nodes".into()))
    }

    /// Forward pass recording every intermediate value. Domain errors such
    /// as the log of a negative number propagate as NaN.
    pub fn eval(&self, inputs: &[f64]) -> Result<Evaluation> {
        if inputs.len() != self.inputs {
            return Err(Error::Shape(format!(
                "graph takes {} inputs, got {}",
                self.inputs,
                inputs.len()
            )));
        }
        let out = self.output_id()?;
        let mut z: Vec<f64> = Vec::with_capacity(self.nodes.len());
        for op in &self.nodes {
            let v = match *op {
                Op::Input(k) => inputs[k],
                Op::Constant(c) => c,
                Op::Add(a, b) => z[a.0] + z[b.0],
                Op::Sub(a, b) => z[a.0] - z[b.0],
                Op::Mul(a, b) => z[a.0] * z[b.0],
                Op::Neg(a) => -z[a.0],
                Op::Log(a) => f64::ln(z[a.0]),
                Op::Exp(a) => f64::exp(z[a.0]),
                Op::Square(a) => z[a.0] * z[a.0],
            };
            z.push(v);
        }
        Ok(Evaluation {
            output: z[out.0],
            values: z,
        })
    }

    /// `∂y/∂x_wrt` by propagating tangents `żᵢ = ∂zᵢ/∂x_wrt` alongside the
    /// forward pass.
    pub fn forward_mode(&self, inputs: &[f64], wrt: usize) -> Result<f64> {
        if wrt >= self.inputs {
            return Err(Error::Config(format!(
                "input index {wrt} out of range for {} inputs",
                self.inputs
            )));
        }
        let ev = self.eval(inputs)?;
        let z = &ev.values;
        let mut dz = vec![0.0; self.nodes.len()];
        for (i, op) in self.nodes.iter().enumerate() {
            dz[i] = match *op {
                Op::Input(k) => {
                    if k == wrt {
                        1.0
                    } else {
                        0.0
                    }
                }
                _ => partials(op, z, z[i])
                    .iter()
                    .filter_map(|&(a, d)| a.map(|a| d * dz[a.0]))
                    .sum(),
            };
        }
        Ok(dz[self.output_id()?.0])
    }

    /// Whole gradient in one backward pass.
    pub fn reverse_mode(&self, inputs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.reverse_sweep(inputs, None)?.gradient)
    }

    /// Backward pass over `order`, which must list every node after all of
    /// its consumers (default: reverse creation order). Each node pulls its
    /// adjoint from its consumers in ascending node order, so any valid
    /// order gives bitwise identical adjoints.
    pub fn reverse_sweep(&self, inputs: &[f64], order: Option<&[NodeId]>) -> Result<Sweep> {
        let ev = self.eval(inputs)?;
        let z = &ev.values;
        let n = self.nodes.len();
        let out = self.output_id()?;

        let mut consumers: Vec<Vec<(usize, f64)>> = vec![vec![]; n];
        for (j, op) in self.nodes.iter().enumerate() {
            for (a, d) in partials(op, z, z[j]) {
                if let Some(a) = a {
                    consumers[a.0].push((j, d));
                }
            }
        }

        let default: Vec<NodeId>;
        let order = match order {
            Some(o) => {
                self.check_reverse_order(o)?;
                o
            }
            None => {
                default = (0..n).rev().map(NodeId).collect();
                &default
            }
        };

        let mut adj = vec![0.0; n];
        let mut contributions = vec![0usize; n];
        for &NodeId(i) in order {
            let mut s = if i == out.0 { 1.0 } else { 0.0 };
            for &(j, d) in &consumers[i] {
                s += adj[j] * d;
                contributions[i] += 1;
            }
            adj[i] = s;
        }

        let mut gradient = vec![0.0; self.inputs];
        for (i, op) in self.nodes.iter().enumerate() {
            if let Op::Input(k) = op {
                gradient[*k] = adj[i];
            }
        }
        Ok(Sweep {
            values: ev.values,
            adjoints: adj,
            contributions,
            gradient,
        })
    }

    fn check_reverse_order(&self, order: &[NodeId]) -> Result<()> {
        let n = self.nodes.len();
        let mut seen = vec![false; n];
        if order.len() != n {
            return Err(Error::Contract(format!("order lists {} of {n} nodes", order.len())));
        }
        for &NodeId(i) in order {
            if i >= n || seen[i] {
                return Err(Error::Contract(format!("node {i} repeated or out of range")));
            }
            seen[i] = true;
        }
        // Every operand must come after the node that consumes it.
        let mut pos = vec![0; n];
        for (p, &NodeId(i)) in order.iter().enumerate() {
            pos[i] = p;
        }
        for (j, op) in self.nodes.iter().enumerate() {
            for a in operands(op) {
                if pos[a.0] < pos[j] {
                    return Err(Error::Contract(format!("node {} visited before its consumer {j}", a.0)));
                }
            }
        }
        Ok(())
    }
}

fn operands(op: &Op) -> Vec<NodeId> {
    match *op {
        Op::Input(_) | Op::Constant(_) => vec![],
        Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) => vec![a, b],
        Op::Neg(a) | Op::Log(a) | Op::Exp(a) | Op::Square(a) => vec![a],
    }
}

/// `f(x₁, x₂) = log(x₁ + x₂) − x₂²`.
pub fn example_graph() -> TapeGraph {
    let mut g = TapeGraph::new();
    let x1 = g.input();
    let x2 = g.input();
    let s = g.add(x1, x2);
    let l = g.log(s);
    let q = g.square(x2);
    g.sub(l, q);
    g
}

/// A random graph on `inputs` inputs with `size` nodes whose values stay
/// finite and moderate at `x`, with every log argument above 0.1.
pub fn random_graph(rng: &mut impl Rng, inputs: usize, size: usize, x: &[f64]) -> TapeGraph {
    loop {
        let mut g = TapeGraph::new();
        for _ in 0..inputs {
            g.input();
        }
        while g.len() < size {
            let n = g.len();
            let a = NodeId(rng.random_range(0..n));
            let b = NodeId(rng.random_range(0..n));
            let op = match rng.random_range(0..9) {
                0 => Op::Constant(rng.random_range(-2.0..2.0)),
                1 => Op::Add(a, b),
                2 => Op::Sub(a, b),
                3 => Op::Mul(a, b),
                4 => Op::Neg(a),
                5 => Op::Log(a),
                6 => Op::Exp(a),
                7 => Op::Square(a),
                _ => Op::Mul(a, a),
            };
            g.push(op);
        }
        let Ok(ev) = g.eval(x) else { continue };
        let sane = ev.values.iter().all(|v| v.is_finite() && v.abs() < 50.0);
        let away_from_log_pole = g.nodes().iter().all(|op| match op {
            Op::Log(a) => ev.values[a.0] > 0.1,
            _ => true,
        });
        if sane && away_from_log_pole {
            return g;
        }
    }
}

/// Central difference `(f(x + h eₖ) − f(x − h eₖ)) / 2h`.
pub fn central_difference(g: &TapeGraph, x: &[f64], k: usize, h: f64) -> Result<f64> {
    let mut up = x.to_vec();
    let mut dn = x.to_vec();
    up[k] += h;
    dn[k] -= h;
    Ok((g.eval(&up)?.output - g.eval(&dn)?.output) / (2.0 * h))
}
