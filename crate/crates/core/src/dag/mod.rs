//! Computation DAGs with sub-computation step labels.
//!
//! Every vertex carries the step `j` in which it is computed (`0` for
//! primary inputs) and the last step whose output set it belongs to. The
//! two differ only for values that pass through a step unchanged, e.g. a
//! single-leaf summation tree.

mod build;
mod eval;
mod text;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::surd::Q;

pub use build::{
    build_direct_conv_dag, build_winograd_dag, direct_vertex_count, winograd_vertex_count,
    BuildOptions, DEFAULT_VERTEX_CAP,
};
pub use eval::WinogradMatrices;
pub use text::{parse_dag, write_dag};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VertexKind {
    Input,
    Internal,
    Output,
}

impl VertexKind {
    pub const ALL: [VertexKind; 3] = [VertexKind::Input, VertexKind::Internal, VertexKind::Output];

    pub fn name(self) -> &'static str {
        match self {
            VertexKind::Input => "input",
            VertexKind::Internal => "internal",
            VertexKind::Output => "output",
        }
    }
}

/// Which Winograd transform a scaled leaf belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Transform {
    /// Input transform `Bᵀ d B`.
    Input,
    /// Kernel transform `G g Gᵀ`.
    Kernel,
    /// Output transform `Aᵀ M A`.
    Output,
}

/// Arithmetic performed by a vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Op {
    Input,
    Mul,
    Add,
    /// Multiply the single predecessor by the transform coefficient
    /// `T[row.0][col.0] · T[row.1][col.1]`.
    Scale {
        transform: Transform,
        row: (u8, u8),
        col: (u8, u8),
    },
    /// Vertex read from a file; no arithmetic attached.
    Opaque,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VertexInfo {
    pub kind: VertexKind,
    pub op: Op,
    pub step: u8,
    pub last_step: u8,
}

/// What a DAG computes, when known.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "lowercase")]
pub enum Origin {
    Generic,
    Direct { reuse: Q },
    Winograd { e: u32, r: u32 },
}

/// Tensor coordinates of a primary input.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Source {
    /// Image element `(n, c, h, w)`.
    Image([u32; 4]),
    /// Weight `(k, c, h, w)`.
    Weight([u32; 4]),
    /// Zero padding outside the image.
    Pad,
}

/// Coordinates of the tensor elements at the DAG boundary.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Labels {
    pub inputs: Vec<(u32, Source)>,
    /// Output vertex and its `(n, k, h, w)` coordinate.
    pub outputs: Vec<(u32, [u32; 4])>,
}

/// Immutable computation DAG, predecessors stored in CSR form.
#[derive(Clone, Debug)]
pub struct Dag {
    info: Vec<VertexInfo>,
    pred_start: Vec<u32>,
    preds: Vec<u32>,
    n_steps: u8,
    origin: Origin,
    labels: Option<Labels>,
    /// Topological order when vertex ids are not already one.
    topo: Option<Vec<u32>>,
}

/// Incrementally builds a [`Dag`]; vertices must be pushed after their
/// predecessors.
pub(crate) struct DagBuilder {
    info: Vec<VertexInfo>,
    pred_start: Vec<u32>,
    preds: Vec<u32>,
}

impl DagBuilder {
    pub(crate) fn with_capacity(vertices: usize, edges: usize) -> Self {
        let mut pred_start = Vec::with_capacity(vertices + 1);
        pred_start.push(0);
        DagBuilder {
            info: Vec::with_capacity(vertices),
            pred_start,
            preds: Vec::with_capacity(edges),
        }
    }

    pub(crate) fn push(&mut self, kind: VertexKind, op: Op, step: u8, preds: &[u32]) -> u32 {
        let id = self.info.len() as u32;
        debug_assert!(preds.iter().all(|&p| p < id));
        self.info.push(VertexInfo {
            kind,
            op,
            step,
            last_step: step,
        });
        self.preds.extend_from_slice(preds);
        self.pred_start.push(self.preds.len() as u32);
        id
    }

    pub(crate) fn set_kind(&mut self, v: u32, kind: VertexKind) {
        self.info[v as usize].kind = kind;
    }

    pub(crate) fn set_last_step(&mut self, v: u32, last: u8) {
        self.info[v as usize].last_step = last;
    }

    pub(crate) fn len(&self) -> usize {
        self.info.len()
    }

    pub(crate) fn finish(self, n_steps: u8, origin: Origin, labels: Option<Labels>) -> Dag {
        Dag {
            info: self.info,
            pred_start: self.pred_start,
            preds: self.preds,
            n_steps,
            origin,
            labels,
            topo: None,
        }
    }
}

impl Dag {
    /// Build a DAG from explicit vertex records and edges, checking
    /// acyclicity and the degree rules of input and output vertices.
    pub fn from_edges(info: Vec<VertexInfo>, edges: &[(u32, u32)], origin: Origin) -> Result<Dag> {
        let n = info.len();
        let mut indeg = vec![0u32; n];
        for &(u, v) in edges {
            if u as usize >= n || v as usize >= n {
                return Err(Error::Geometry(format!(
                    "edge {u}->{v} names a missing vertex"
                )));
            }
            if u == v {
                return Err(Error::Geometry(format!("self loop on vertex {u}")));
            }
            indeg[v as usize] += 1;
        }
        let mut pred_start = Vec::with_capacity(n + 1);
        pred_start.push(0u32);
        for d in &indeg {
            pred_start.push(pred_start.last().unwrap() + d);
        }
        let mut fill = pred_start.clone();
        let mut preds = vec![0u32; edges.len()];
        for &(u, v) in edges {
            preds[fill[v as usize] as usize] = u;
            fill[v as usize] += 1;
        }
        let n_steps = info
            .iter()
            .map(|i| i.last_step.max(i.step))
            .max()
            .unwrap_or(0);
        let mut dag = Dag {
            info,
            pred_start,
            preds,
            n_steps,
            origin,
            labels: None,
            topo: None,
        };
        dag.check_structure()?;
        Ok(dag)
    }

    fn check_structure(&mut self) -> Result<()> {
        let n = self.len();
        let succ = self.successor_counts();
        for v in 0..n as u32 {
            let info = self.info(v);
            let indeg = self.preds(v).len();
            match info.kind {
                VertexKind::Input if indeg != 0 => {
                    return Err(Error::Geometry(format!(
                        "input vertex {v} has predecessors"
                    )));
                }
                VertexKind::Output if succ[v as usize] != 0 => {
                    return Err(Error::Geometry(format!("output vertex {v} has successors")));
                }
                VertexKind::Internal | VertexKind::Output if indeg == 0 => {
                    return Err(Error::Geometry(format!(
                        "computed vertex {v} has no predecessors"
                    )));
                }
                _ => {}
            }
        }
        if (0..n as u32).all(|v| self.preds(v).iter().all(|&p| p < v)) {
            self.topo = None;
            return Ok(());
        }
        // Kahn's algorithm over successor lists
        let (start, list) = self.successor_csr();
        let mut indeg: Vec<u32> = (0..n as u32).map(|v| self.preds(v).len() as u32).collect();
        let mut order: Vec<u32> = (0..n as u32).filter(|&v| indeg[v as usize] == 0).collect();
        let mut head = 0;
        while head < order.len() {
            let u = order[head] as usize;
            head += 1;
            for &w in &list[start[u] as usize..start[u + 1] as usize] {
                indeg[w as usize] -= 1;
                if indeg[w as usize] == 0 {
                    order.push(w);
                }
            }
        }
        if order.len() != n {
            return Err(Error::Geometry("graph contains a cycle".into()));
        }
        self.topo = Some(order);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.info.len()
    }

    pub fn is_empty(&self) -> bool {
        self.info.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.preds.len()
    }

    pub fn info(&self, v: u32) -> &VertexInfo {
        &self.info[v as usize]
    }

    pub fn kind(&self, v: u32) -> VertexKind {
        self.info[v as usize].kind
    }

    pub fn step(&self, v: u32) -> u8 {
        self.info[v as usize].step
    }

    pub fn preds(&self, v: u32) -> &[u32] {
        let v = v as usize;
        &self.preds[self.pred_start[v] as usize..self.pred_start[v + 1] as usize]
    }

    pub fn n_steps(&self) -> u8 {
        self.n_steps
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    pub fn labels(&self) -> Option<&Labels> {
        self.labels.as_ref()
    }

    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.len() as u32).flat_map(move |v| self.preds(v).iter().map(move |&u| (u, v)))
    }

    /// Vertex ids in a topological order.
    pub fn topo_order(&self) -> Vec<u32> {
        match &self.topo {
            Some(order) => order.clone(),
            None => (0..self.len() as u32).collect(),
        }
    }

    pub fn successor_counts(&self) -> Vec<u32> {
        let mut out = vec![0u32; self.len()];
        for &p in &self.preds {
            out[p as usize] += 1;
        }
        out
    }

    /// Successor lists in CSR form: `(start, list)`.
    pub fn successor_csr(&self) -> (Vec<u32>, Vec<u32>) {
        let counts = self.successor_counts();
        let mut start = Vec::with_capacity(self.len() + 1);
        start.push(0u32);
        for c in &counts {
            start.push(start.last().unwrap() + c);
        }
        let mut fill = start.clone();
        let mut list = vec![0u32; self.preds.len()];
        for v in 0..self.len() as u32 {
            for &u in self.preds(v) {
                list[fill[u as usize] as usize] = v;
                fill[u as usize] += 1;
            }
        }
        (start, list)
    }

    pub fn vertices_of(&self, kind: VertexKind) -> impl Iterator<Item = u32> + '_ {
        (0..self.len() as u32).filter(move |&v| self.kind(v) == kind)
    }

    pub fn count_vertices(&self, kinds: &[VertexKind]) -> u64 {
        count_vertices(self, kinds)
    }
}

/// Number of vertices whose kind is in `kinds`.
pub fn count_vertices(dag: &Dag, kinds: &[VertexKind]) -> u64 {
    if kinds.is_empty() {
        return 0;
    }
    dag.info.iter().filter(|i| kinds.contains(&i.kind)).count() as u64
}

/// Vertex sets of one sub-computation.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct StepSets {
    /// Vertices computed in this step (`U_j` without its inputs).
    pub internal: Vec<u32>,
    /// Output set `Õ_j`.
    pub outputs: Vec<u32>,
}

/// Multi-step partition `U_1..U_n` of a DAG.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct StepPartition {
    pub steps: Vec<StepSets>,
}

impl StepPartition {
    pub fn n_steps(&self) -> usize {
        self.steps.len()
    }

    /// `Õ_j` for `1 ≤ j ≤ n`.
    pub fn outputs(&self, j: usize) -> &[u32] {
        &self.steps[j - 1].outputs
    }

    /// Vertices computed in step `j`.
    pub fn internal(&self, j: usize) -> &[u32] {
        &self.steps[j - 1].internal
    }
}

/// A broken multi-step partition clause.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub vertex: u32,
    pub clause: &'static str,
    pub detail: String,
}

impl From<&Violation> for Error {
    fn from(v: &Violation) -> Error {
        Error::Partition {
            vertex: v.vertex,
            clause: format!("{} ({})", v.clause, v.detail),
        }
    }
}

pub const CLAUSE_STEP_RANGE: &str = "step-range";
pub const CLAUSE_INPUT: &str = "input";
pub const CLAUSE_ORDER: &str = "order";
pub const CLAUSE_SINK: &str = "sink";
pub const CLAUSE_FINAL: &str = "final-output";

/// All violations of the multi-step partition rules:
///
/// * primary inputs sit in step 0, computed vertices in `1..=n`;
/// * every predecessor of a step-`j` vertex is either computed in step `j`
///   or is an output vertex of step `j−1` (a primary input when `j = 1`);
/// * an output vertex of a step has no successor inside that step;
/// * DAG outputs are outputs of the last step.
pub fn partition_violations(dag: &Dag) -> Vec<Violation> {
    let n = dag.n_steps;
    let mut out = Vec::new();
    let mut same_step_succ = vec![false; dag.len()];
    for (u, v) in dag.edges() {
        if dag.step(u) == dag.step(v) {
            same_step_succ[u as usize] = true;
        }
    }
    for v in 0..dag.len() as u32 {
        let info = dag.info(v);
        let computed = info.kind != VertexKind::Input;
        if !computed && info.step != 0 {
            out.push(Violation {
                vertex: v,
                clause: CLAUSE_STEP_RANGE,
                detail: format!("primary input labeled step {}", info.step),
            });
        }
        if computed && (info.step == 0 || info.step > n || info.last_step < info.step) {
            out.push(Violation {
                vertex: v,
                clause: CLAUSE_STEP_RANGE,
                detail: format!("step {}..{} outside 1..{n}", info.step, info.last_step),
            });
        }
        if info.kind == VertexKind::Output && info.last_step != n {
            out.push(Violation {
                vertex: v,
                clause: CLAUSE_FINAL,
                detail: format!("DAG output leaves the partition at step {}", info.last_step),
            });
        }
        if info.last_step > info.step && same_step_succ[v as usize] {
            out.push(Violation {
                vertex: v,
                clause: CLAUSE_SINK,
                detail: "pass-through value is also consumed inside its own step".into(),
            });
        }
        for &u in dag.preds(v) {
            let pu = dag.info(u);
            if pu.step > info.step {
                out.push(Violation {
                    vertex: v,
                    clause: CLAUSE_ORDER,
                    detail: format!("reads vertex {u} of later step {}", pu.step),
                });
            } else if pu.step < info.step {
                let j = info.step;
                let is_prev_output = if j == 1 {
                    pu.kind == VertexKind::Input
                } else {
                    pu.kind != VertexKind::Input && pu.step < j && pu.last_step == j - 1
                };
                if !is_prev_output {
                    out.push(Violation {
                        vertex: v,
                        clause: CLAUSE_INPUT,
                        detail: format!(
                            "step-{j} vertex reads vertex {u}, which is not an output of step {}",
                            j - 1
                        ),
                    });
                } else if j > 1 && same_step_succ[u as usize] {
                    out.push(Violation {
                        vertex: u,
                        clause: CLAUSE_SINK,
                        detail: format!(
                            "feeds step {j} but also has a successor inside step {}",
                            pu.step
                        ),
                    });
                }
            }
        }
    }
    out
}

/// Check the multi-step partition rules and return the step sets.
pub fn validate_multi_step_partition(dag: &Dag) -> Result<StepPartition> {
    if let Some(v) = partition_violations(dag).first() {
        return Err(v.into());
    }
    let n = dag.n_steps as usize;
    let mut steps = vec![StepSets::default(); n];
    let mut same_step_succ = vec![false; dag.len()];
    for (u, v) in dag.edges() {
        if dag.step(u) == dag.step(v) {
            same_step_succ[u as usize] = true;
        }
    }
    for v in 0..dag.len() as u32 {
        let info = dag.info(v);
        if info.kind == VertexKind::Input {
            continue;
        }
        steps[info.step as usize - 1].internal.push(v);
        if !same_step_succ[v as usize] {
            for j in info.step..=info.last_step {
                steps[j as usize - 1].outputs.push(v);
            }
        }
    }
    Ok(StepPartition { steps })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vi(kind: VertexKind, step: u8) -> VertexInfo {
        VertexInfo {
            kind,
            op: Op::Opaque,
            step,
            last_step: step,
        }
    }

    #[test]
    fn empty_kind_set_counts_nothing() {
        let dag = Dag::from_edges(
            vec![vi(VertexKind::Input, 0), vi(VertexKind::Output, 1)],
            &[(0, 1)],
            Origin::Generic,
        )
        .unwrap();
        assert_eq!(count_vertices(&dag, &[]), 0);
        assert_eq!(count_vertices(&dag, &VertexKind::ALL), 2);
    }

    #[test]
    fn cycles_are_rejected() {
        let err = Dag::from_edges(
            vec![
                vi(VertexKind::Input, 0),
                vi(VertexKind::Internal, 1),
                vi(VertexKind::Internal, 1),
                vi(VertexKind::Output, 1),
            ],
            &[(0, 1), (2, 1), (1, 2), (2, 3)],
            Origin::Generic,
        );
        assert!(err.is_err());
    }

    #[test]
    fn non_topological_ids_get_an_order() {
        let dag = Dag::from_edges(
            vec![vi(VertexKind::Output, 1), vi(VertexKind::Input, 0)],
            &[(1, 0)],
            Origin::Generic,
        )
        .unwrap();
        assert_eq!(dag.topo_order(), vec![1, 0]);
    }

    #[test]
    fn step_two_reading_primary_input_is_flagged() {
        // in0, in1 -> p (step 1); p, in1 -> out (step 2)
        let dag = Dag::from_edges(
            vec![
                vi(VertexKind::Input, 0),
                vi(VertexKind::Input, 0),
                vi(VertexKind::Internal, 1),
                vi(VertexKind::Output, 2),
            ],
            &[(0, 2), (1, 2), (2, 3), (1, 3)],
            Origin::Generic,
        )
        .unwrap();
        let v = partition_violations(&dag);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].vertex, 3);
        assert_eq!(v[0].clause, CLAUSE_INPUT);
        match validate_multi_step_partition(&dag) {
            Err(Error::Partition { vertex, clause }) => {
                assert_eq!(vertex, 3);
                assert!(clause.starts_with(CLAUSE_INPUT));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn backward_edge_is_flagged() {
        let dag = Dag::from_edges(
            vec![
                vi(VertexKind::Input, 0),
                vi(VertexKind::Internal, 2),
                vi(VertexKind::Output, 1),
            ],
            &[(0, 1), (1, 2)],
            Origin::Generic,
        )
        .unwrap();
        let clauses: Vec<_> = partition_violations(&dag)
            .iter()
            .map(|v| v.clause)
            .collect();
        assert!(clauses.contains(&CLAUSE_ORDER));
    }
}
