//! S-partitions: verification and exact minimum subset count on tiny DAGs.
//!
//! Subsets partition the computed (non-input) vertices; primary inputs may
//! be listed in a subset but need not be. A dominator may contain primary
//! inputs and members of the subset itself.

use std::collections::VecDeque;

use serde::Serialize;

use crate::dag::{Dag, VertexKind};
use crate::error::{Error, Result};
use crate::pebble::game::{solve_pebbling, PebbleLimits};

/// Default limit on computed vertices for [`brute_force_p`].
pub const DEFAULT_PARTITION_CAP: usize = 12;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SPartition {
    pub subsets: Vec<Vec<u32>>,
    /// Dominator of each subset, as emitted by the search; informational,
    /// never trusted by [`verify_s_partition`].
    pub dominators: Vec<Vec<u32>>,
    /// Minimum set of each subset, likewise informational.
    pub minimum_sets: Vec<Vec<u32>>,
}

impl SPartition {
    pub fn from_subsets(subsets: Vec<Vec<u32>>) -> Self {
        SPartition {
            subsets,
            ..Default::default()
        }
    }
}

/// One failed property of a candidate S-partition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Defect {
    /// 1: disjoint cover, 2: dominator size, 3: minimum-set size,
    /// 4: acyclic dependence between subsets.
    pub property: u8,
    pub subset: Option<usize>,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PartitionCheck {
    pub defects: Vec<Defect>,
}

impl PartitionCheck {
    pub fn holds(&self) -> bool {
        self.defects.is_empty()
    }

    pub fn violates(&self, property: u8) -> bool {
        self.defects.iter().any(|d| d.property == property)
    }
}

/// Minimum vertex set meeting every path from a primary input into
/// `members`, by unit-capacity max-flow on the split-vertex graph.
pub fn min_dominator(dag: &Dag, members: &[bool]) -> Vec<u32> {
    let n = dag.len();
    // node 2v = v_in, 2v+1 = v_out, 2n = source, 2n+1 = sink
    let (src, snk) = (2 * n, 2 * n + 1);
    let mut g = FlowGraph::new(2 * n + 2);
    let inf = n as i32 + 1;
    for v in 0..n {
        g.add(2 * v, 2 * v + 1, 1);
        if dag.kind(v as u32) == VertexKind::Input {
            g.add(src, 2 * v, inf);
        }
        if members[v] {
            g.add(2 * v + 1, snk, inf);
        }
        for &u in dag.preds(v as u32) {
            g.add(2 * u as usize + 1, 2 * v, inf);
        }
    }
    g.max_flow(src, snk);
    let reach = g.reachable(src);
    (0..n)
        .filter(|&v| reach[2 * v] && !reach[2 * v + 1])
        .map(|v| v as u32)
        .collect()
}

/// Members with no successor inside the subset.
pub fn minimum_set(dag: &Dag, members: &[bool]) -> Vec<u32> {
    let mut has_inner_succ = vec![false; dag.len()];
    for (u, v) in dag.edges() {
        if members[u as usize] && members[v as usize] {
            has_inner_succ[u as usize] = true;
        }
    }
    (0..dag.len())
        .filter(|&v| members[v] && !has_inner_succ[v])
        .map(|v| v as u32)
        .collect()
}

/// `Θ(D)`: every vertex such that each path from a primary input to it
/// meets `d`. Members of `d` are included.
pub fn generated(dag: &Dag, d: &[bool]) -> Vec<bool> {
    let mut avoid = vec![false; dag.len()];
    for v in dag.topo_order() {
        let vi = v as usize;
        if d[vi] {
            continue;
        }
        avoid[vi] =
            dag.kind(v) == VertexKind::Input || dag.preds(v).iter().any(|&u| avoid[u as usize]);
    }
    avoid.into_iter().map(|a| !a).collect()
}

struct FlowGraph {
    head: Vec<usize>,
    to: Vec<usize>,
    cap: Vec<i32>,
    next: Vec<usize>,
}

impl FlowGraph {
    fn new(n: usize) -> Self {
        FlowGraph {
            head: vec![usize::MAX; n],
            to: Vec::new(),
            cap: Vec::new(),
            next: Vec::new(),
        }
    }

    fn add(&mut self, u: usize, v: usize, c: i32) {
        for (a, b, cc) in [(u, v, c), (v, u, 0)] {
            self.to.push(b);
            self.cap.push(cc);
            self.next.push(self.head[a]);
            self.head[a] = self.to.len() - 1;
        }
    }

    fn max_flow(&mut self, s: usize, t: usize) -> i32 {
        let mut flow = 0;
        loop {
            let mut prev = vec![usize::MAX; self.head.len()];
            let mut seen = vec![false; self.head.len()];
            seen[s] = true;
            let mut q = VecDeque::from([s]);
            while let Some(u) = q.pop_front() {
                let mut e = self.head[u];
                while e != usize::MAX {
                    let v = self.to[e];
                    if self.cap[e] > 0 && !seen[v] {
                        seen[v] = true;
                        prev[v] = e;
                        q.push_back(v);
                    }
                    e = self.next[e];
                }
            }
            if !seen[t] {
                return flow;
            }
            let mut v = t;
            let mut push = i32::MAX;
            while v != s {
                let e = prev[v];
                push = push.min(self.cap[e]);
                v = self.to[e ^ 1];
            }
            let mut v = t;
            while v != s {
                let e = prev[v];
                self.cap[e] -= push;
                self.cap[e ^ 1] += push;
                v = self.to[e ^ 1];
            }
            flow += push;
        }
    }

    fn reachable(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.head.len()];
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            let mut e = self.head[u];
            while e != usize::MAX {
                let v = self.to[e];
                if self.cap[e] > 0 && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
                e = self.next[e];
            }
        }
        seen
    }
}

/// Check Properties 1-4 of an S-partition, re-deriving every dominator and
/// minimum set.
pub fn verify_s_partition(dag: &Dag, partition: &SPartition, s: usize) -> PartitionCheck {
    let n = dag.len();
    let mut defects = Vec::new();
    let mut owner = vec![usize::MAX; n];
    for (i, subset) in partition.subsets.iter().enumerate() {
        if subset.is_empty() {
            defects.push(Defect {
                property: 1,
                subset: Some(i),
                detail: "empty subset".into(),
            });
        }
        for &v in subset {
            if v as usize >= n {
                defects.push(Defect {
                    property: 1,
                    subset: Some(i),
                    detail: format!("vertex {v} does not exist"),
                });
            } else if owner[v as usize] != usize::MAX {
                defects.push(Defect {
                    property: 1,
                    subset: Some(i),
                    detail: format!("vertex {v} also in subset {}", owner[v as usize]),
                });
            } else {
                owner[v as usize] = i;
            }
        }
    }
    for v in 0..n as u32 {
        if dag.kind(v) != VertexKind::Input && owner[v as usize] == usize::MAX {
            defects.push(Defect {
                property: 1,
                subset: None,
                detail: format!("vertex {v} is in no subset"),
            });
        }
    }
    if !defects.is_empty() {
        return PartitionCheck { defects };
    }

    for (i, subset) in partition.subsets.iter().enumerate() {
        let mut members = vec![false; n];
        for &v in subset {
            members[v as usize] = true;
        }
        let dom = min_dominator(dag, &members);
        if dom.len() > s {
            defects.push(Defect {
                property: 2,
                subset: Some(i),
                detail: format!(
                    "smallest dominator has {} vertices {:?}, S = {s}",
                    dom.len(),
                    dom
                ),
            });
        }
        let min = minimum_set(dag, &members);
        if min.len() > s {
            defects.push(Defect {
                property: 3,
                subset: Some(i),
                detail: format!("minimum set has {} vertices {:?}, S = {s}", min.len(), min),
            });
        }
    }

    // quotient graph must be acyclic
    let h = partition.subsets.len();
    let mut adj = vec![Vec::new(); h];
    let mut indeg = vec![0usize; h];
    for (u, v) in dag.edges() {
        let (a, b) = (owner[u as usize], owner[v as usize]);
        if a != usize::MAX && b != usize::MAX && a != b && !adj[a].contains(&b) {
            adj[a].push(b);
            indeg[b] += 1;
        }
    }
    let mut queue: Vec<usize> = (0..h).filter(|&i| indeg[i] == 0).collect();
    let mut done = 0;
    while let Some(i) = queue.pop() {
        done += 1;
        for &j in &adj[i] {
            indeg[j] -= 1;
            if indeg[j] == 0 {
                queue.push(j);
            }
        }
    }
    if done != h {
        let cyclic: Vec<usize> = (0..h).filter(|&i| indeg[i] > 0).collect();
        defects.push(Defect {
            property: 4,
            subset: cyclic.first().copied(),
            detail: format!("subsets {cyclic:?} depend on each other cyclically"),
        });
    }
    PartitionCheck { defects }
}

/// Result of the exhaustive minimum S-partition search.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PResult {
    pub p: usize,
    pub partition: SPartition,
}

/// Exact `P(S)`, the minimum number of subsets over all S-partitions, by
/// breadth-first search over down-closed sets of computed vertices.
pub fn brute_force_p(dag: &Dag, s: usize, cap: usize) -> Result<PResult> {
    let comp: Vec<u32> = (0..dag.len() as u32)
        .filter(|&v| dag.kind(v) != VertexKind::Input)
        .collect();
    let m = comp.len();
    if m > cap || m > 20 {
        return Err(Error::Size {
            what: "computed vertices for S-partition search".into(),
            count: m as u64,
            cap: cap.min(20) as u64,
        });
    }
    if m == 0 {
        return Ok(PResult {
            p: 0,
            partition: SPartition::default(),
        });
    }
    let mut local = vec![usize::MAX; dag.len()];
    for (i, &v) in comp.iter().enumerate() {
        local[v as usize] = i;
    }
    let mut pred_mask = vec![0u32; m];
    for (i, &v) in comp.iter().enumerate() {
        for &u in dag.preds(v) {
            if local[u as usize] != usize::MAX {
                pred_mask[i] |= 1 << local[u as usize];
            }
        }
    }
    let full: u32 = if m == 32 { u32::MAX } else { (1u32 << m) - 1 };
    let size = 1usize << m;
    let members_of = |mask: u32| -> Vec<bool> {
        let mut mem = vec![false; dag.len()];
        for (i, &v) in comp.iter().enumerate() {
            if mask >> i & 1 == 1 {
                mem[v as usize] = true;
            }
        }
        mem
    };
    let mut valid = vec![false; size];
    for mask in 1..size as u32 {
        let inner_succ = (0..m).fold(0u32, |acc, i| {
            if mask >> i & 1 == 1 && pred_mask[i] & mask != 0 {
                acc | (pred_mask[i] & mask)
            } else {
                acc
            }
        });
        if (mask & !inner_succ).count_ones() as usize > s {
            continue;
        }
        valid[mask as usize] = min_dominator(dag, &members_of(mask)).len() <= s;
    }
    let is_down = |mask: u32| (0..m).all(|i| mask >> i & 1 == 0 || pred_mask[i] & !mask == 0);

    let mut dist = vec![u32::MAX; size];
    let mut parent = vec![0u32; size];
    dist[0] = 0;
    let mut q = VecDeque::from([0u32]);
    while let Some(ideal) = q.pop_front() {
        if ideal == full {
            break;
        }
        let rest = full & !ideal;
        let mut t = rest;
        while t != 0 {
            let next = ideal | t;
            if valid[t as usize] && dist[next as usize] == u32::MAX && is_down(next) {
                dist[next as usize] = dist[ideal as usize] + 1;
                parent[next as usize] = ideal;
                q.push_back(next);
            }
            t = (t - 1) & rest;
        }
    }
    if dist[full as usize] == u32::MAX {
        return Err(Error::Infeasible(format!("no {s}-partition exists")));
    }
    let mut chain = Vec::new();
    let mut cur = full;
    while cur != 0 {
        let prev = parent[cur as usize];
        chain.push(cur & !prev);
        cur = prev;
    }
    chain.reverse();
    let mut partition = SPartition::default();
    for t in chain {
        let mem = members_of(t);
        partition.subsets.push(
            (0..m)
                .filter(|&i| t >> i & 1 == 1)
                .map(|i| comp[i])
                .collect(),
        );
        partition.dominators.push(min_dominator(dag, &mem));
        partition.minimum_sets.push(minimum_set(dag, &mem));
    }
    Ok(PResult {
        p: dist[full as usize] as usize,
        partition,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct HongKung {
    pub s: usize,
    pub q_min: u64,
    pub p_2s: usize,
    pub holds: bool,
}

/// Both oracles and the inequality `Q ≥ S·(P(2S) − 1)`.
pub fn check_hong_kung(dag: &Dag, s: usize) -> Result<HongKung> {
    check_hong_kung_with(dag, s, &PebbleLimits::default(), DEFAULT_PARTITION_CAP)
}

pub fn check_hong_kung_with(
    dag: &Dag,
    s: usize,
    limits: &PebbleLimits,
    partition_cap: usize,
) -> Result<HongKung> {
    let q_min = solve_pebbling(dag, s, limits)?.io;
    let p_2s = brute_force_p(dag, 2 * s, partition_cap)?.p;
    let bound = (s as u64) * (p_2s as u64).saturating_sub(1);
    Ok(HongKung {
        s,
        q_min,
        p_2s,
        holds: q_min >= bound,
    })
}
