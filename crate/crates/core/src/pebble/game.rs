//! Exact minimum-I/O red-blue pebbling by shortest-path search.
//!
//! A state is the pair (red set, blue set on non-input vertices); primary
//! inputs carry blue pebbles permanently. Load and Store cost one I/O,
//! Compute is free, and red pebbles are removed only when a slot is needed,
//! which loses nothing because removals are free. States are canonicalized
//! by dropping pebbles on vertices that can no longer contribute to an
//! unstored output. The search is A* with the number of unstored outputs
//! as the (admissible, consistent) heuristic.

use std::cmp::Reverse;
use std::collections::hash_map::Entry;
use std::collections::{BinaryHeap, HashMap};

use serde::Serialize;

use crate::dag::{Dag, VertexKind};
use crate::error::{Error, Result};

/// Default limit on DAG size for exhaustive pebbling.
pub const DEFAULT_PEBBLE_VERTEX_CAP: usize = 25;
/// Default limit on distinct states visited.
pub const DEFAULT_STATE_CAP: usize = 50_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "move", content = "vertex", rename_all = "lowercase")]
pub enum Move {
    Load(u32),
    Store(u32),
    Compute(u32),
    Free(u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PebbleLimits {
    pub vertex_cap: usize,
    pub state_cap: usize,
}

impl Default for PebbleLimits {
    fn default() -> Self {
        PebbleLimits {
            vertex_cap: DEFAULT_PEBBLE_VERTEX_CAP,
            state_cap: DEFAULT_STATE_CAP,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PebbleSolution {
    pub io: u64,
    pub moves: Vec<Move>,
    pub states_visited: usize,
}

/// Bitmask view of a DAG with at most 32 vertices.
pub(crate) struct Masks {
    pub preds: Vec<u32>,
    pub inputs: u32,
    pub outputs: u32,
    /// Ancestors of each vertex, the vertex included.
    pub anc: Vec<u32>,
}

impl Masks {
    pub(crate) fn new(dag: &Dag) -> Masks {
        let n = dag.len();
        assert!(n <= 32, "bitmask view needs at most 32 vertices");
        let mut preds = vec![0u32; n];
        let mut inputs = 0;
        let mut outputs = 0;
        let mut anc = vec![0u32; n];
        for v in dag.topo_order() {
            let vi = v as usize;
            for &u in dag.preds(v) {
                preds[vi] |= 1 << u;
                anc[vi] |= anc[u as usize];
            }
            anc[vi] |= 1 << v;
            match dag.kind(v) {
                VertexKind::Input => inputs |= 1 << v,
                VertexKind::Output => outputs |= 1 << v,
                VertexKind::Internal => {}
            }
        }
        Masks {
            preds,
            inputs,
            outputs,
            anc,
        }
    }

    fn useful(&self, blue: u32) -> u32 {
        let mut pending = self.outputs & !blue;
        let mut m = 0;
        while pending != 0 {
            let o = pending.trailing_zeros() as usize;
            pending &= pending - 1;
            m |= self.anc[o];
        }
        m
    }

    fn canonical(&self, red: u32, blue: u32) -> (u32, u32) {
        let useful = self.useful(blue);
        let blue = blue & (useful | self.outputs) & !self.inputs;
        (red & useful, blue)
    }
}

fn key(red: u32, blue: u32) -> u64 {
    (red as u64) | ((blue as u64) << 32)
}

fn unkey(k: u64) -> (u32, u32) {
    (k as u32, (k >> 32) as u32)
}

fn bits(mut m: u32) -> impl Iterator<Item = u32> {
    std::iter::from_fn(move || {
        if m == 0 {
            None
        } else {
            let b = m.trailing_zeros();
            m &= m - 1;
            Some(b)
        }
    })
}

/// Check that every output can be computed with `s` red pebbles at all.
fn check_feasible(dag: &Dag, masks: &Masks, s: usize) -> Result<()> {
    let needed = masks.useful(0);
    for v in bits(needed & !masks.inputs) {
        let indeg = dag.preds(v).len();
        if indeg + 1 > s {
            return Err(Error::Infeasible(format!(
                "vertex {v} has {indeg} predecessors and needs {} red pebbles, only {s} available",
                indeg + 1
            )));
        }
    }
    Ok(())
}

/// Exact minimum number of Load plus Store moves that leaves a blue pebble
/// on every output, with an optimal move sequence.
pub fn solve_pebbling(dag: &Dag, s: usize, limits: &PebbleLimits) -> Result<PebbleSolution> {
    if dag.len() > limits.vertex_cap.min(32) {
        return Err(Error::Size {
            what: "pebbling DAG vertices".into(),
            count: dag.len() as u64,
            cap: limits.vertex_cap.min(32) as u64,
        });
    }
    let m = Masks::new(dag);
    check_feasible(dag, &m, s)?;

    let start = key(0, 0);
    let mut best: HashMap<u64, (u32, u64, Move)> = HashMap::new();
    best.insert(start, (0, u64::MAX, Move::Free(0)));
    let h = |blue: u32| (m.outputs & !blue).count_ones();
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((h(0), 0u32, start)));

    while let Some(Reverse((_, g, k))) = heap.pop() {
        if best[&k].0 < g {
            continue;
        }
        let (red, blue) = unkey(k);
        if m.outputs & !blue == 0 {
            return Ok(PebbleSolution {
                io: g as u64,
                moves: trace(dag, &best, k),
                states_visited: best.len(),
            });
        }
        let useful = m.useful(blue);
        let full = red.count_ones() as usize >= s;
        let mut next: Vec<(u32, u32, u32, Move)> = Vec::new();
        for v in bits(red & !blue & !m.inputs) {
            next.push((red, blue | 1 << v, 1, Move::Store(v)));
        }
        // placements need a free slot; evict any red the move does not read
        let mut place = |v: u32, keep: u32, cost: u32, mv: Move| {
            if !full {
                next.push((red | 1 << v, blue, cost, mv));
            } else {
                for u in bits(red & !keep) {
                    next.push(((red & !(1 << u)) | 1 << v, blue, cost, mv));
                }
            }
        };
        let candidates = useful & !red;
        for v in bits(candidates & (blue | m.inputs)) {
            place(v, 0, 1, Move::Load(v));
        }
        for v in bits(candidates & !m.inputs) {
            let p = m.preds[v as usize];
            if p & !red == 0 {
                place(v, p, 0, Move::Compute(v));
            }
        }
        for (red2, blue2, cost, mv) in next {
            let (r, b) = m.canonical(red2, blue2);
            let k2 = key(r, b);
            let g2 = g + cost;
            match best.entry(k2) {
                Entry::Occupied(mut e) => {
                    if e.get().0 <= g2 {
                        continue;
                    }
                    e.insert((g2, k, mv));
                }
                Entry::Vacant(e) => {
                    e.insert((g2, k, mv));
                }
            }
            heap.push(Reverse((g2 + h(b), g2, k2)));
        }
        if best.len() > limits.state_cap {
            return Err(Error::Size {
                what: "pebbling states".into(),
                count: best.len() as u64,
                cap: limits.state_cap as u64,
            });
        }
    }
    Err(Error::Infeasible(format!(
        "no complete calculation exists with {s} red pebbles"
    )))
}

fn trace(dag: &Dag, best: &HashMap<u64, (u32, u64, Move)>, mut k: u64) -> Vec<Move> {
    let mut steps = Vec::new();
    loop {
        let (_, parent, mv) = best[&k];
        if parent == u64::MAX {
            break;
        }
        let (red_now, _) = unkey(k);
        let (red_before, _) = unkey(parent);
        let (placed, needed) = match mv {
            Move::Load(v) => (1u32 << v, 0),
            Move::Compute(v) => (
                1u32 << v,
                dag.preds(v).iter().fold(0u32, |m, &p| m | 1 << p),
            ),
            Move::Store(v) => (0, 1u32 << v),
            Move::Free(_) => (0, 0),
        };
        let vanished = red_before & !red_now & !placed;
        steps.push((vanished & !needed, mv, vanished & needed));
        k = parent;
    }
    let mut out = Vec::new();
    for (before, mv, after) in steps.into_iter().rev() {
        out.extend(bits(before).map(Move::Free));
        out.push(mv);
        out.extend(bits(after).map(Move::Free));
    }
    out
}

/// Minimum I/O count of a complete calculation with `s` red pebbles.
pub fn min_io_pebbling(dag: &Dag, s: usize) -> Result<u64> {
    solve_pebbling(dag, s, &PebbleLimits::default()).map(|sol| sol.io)
}

/// Explicit game state used to replay and check move sequences.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PebbleState {
    pub red: Vec<bool>,
    pub blue: Vec<bool>,
    pub computed: Vec<bool>,
    pub io_count: u64,
}

impl PebbleState {
    pub fn initial(dag: &Dag) -> Self {
        let blue: Vec<bool> = (0..dag.len() as u32)
            .map(|v| dag.kind(v) == VertexKind::Input)
            .collect();
        PebbleState {
            red: vec![false; dag.len()],
            computed: blue.clone(),
            blue,
            io_count: 0,
        }
    }

    pub fn reds(&self) -> usize {
        self.red.iter().filter(|&&r| r).count()
    }

    /// Apply one move, enforcing the game rules with `s` red pebbles.
    pub fn apply(&mut self, dag: &Dag, s: usize, mv: Move) -> Result<()> {
        let illegal = |why: String| Err(Error::Infeasible(format!("illegal move {mv:?}: {why}")));
        match mv {
            Move::Load(v) => {
                let v = v as usize;
                if !self.blue[v] {
                    return illegal("no blue pebble".into());
                }
                if !self.red[v] && self.reds() >= s {
                    return illegal("no free red pebble".into());
                }
                self.red[v] = true;
                self.io_count += 1;
            }
            Move::Store(v) => {
                let v = v as usize;
                if !self.red[v] {
                    return illegal("no red pebble".into());
                }
                self.blue[v] = true;
                self.io_count += 1;
            }
            Move::Compute(v) => {
                if dag.kind(v) == VertexKind::Input {
                    return illegal("primary inputs are not computed".into());
                }
                if let Some(p) = dag.preds(v).iter().find(|&&p| !self.red[p as usize]) {
                    return illegal(format!("predecessor {p} not red"));
                }
                let v = v as usize;
                if !self.red[v] && self.reds() >= s {
                    return illegal("no free red pebble".into());
                }
                self.red[v] = true;
                self.computed[v] = true;
            }
            Move::Free(v) => {
                self.red[v as usize] = false;
            }
        }
        Ok(())
    }

    pub fn complete(&self, dag: &Dag) -> bool {
        dag.vertices_of(VertexKind::Output)
            .all(|o| self.blue[o as usize])
    }
}

/// Replay a move sequence from the initial state; returns the I/O count if
/// every move is legal and the calculation is complete.
pub fn replay(dag: &Dag, s: usize, moves: &[Move]) -> Result<u64> {
    let mut st = PebbleState::initial(dag);
    for &mv in moves {
        st.apply(dag, s, mv)?;
    }
    if !st.complete(dag) {
        return Err(Error::Infeasible(
            "move sequence leaves outputs without blue pebbles".into(),
        ));
    }
    Ok(st.io_count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::{Op, Origin, VertexInfo};

    fn dag(kinds: &[VertexKind], edges: &[(u32, u32)]) -> Dag {
        let info = kinds
            .iter()
            .map(|&kind| VertexInfo {
                kind,
                op: if kind == VertexKind::Input {
                    Op::Input
                } else {
                    Op::Opaque
                },
                step: (kind != VertexKind::Input) as u8,
                last_step: (kind != VertexKind::Input) as u8,
            })
            .collect();
        Dag::from_edges(info, edges, Origin::Generic).unwrap()
    }

    use VertexKind::{Input as I, Internal as N, Output as O};

    #[test]
    fn product_needs_two_loads_and_a_store() {
        let d = dag(&[I, I, O], &[(0, 2), (1, 2)]);
        let sol = solve_pebbling(&d, 3, &PebbleLimits::default()).unwrap();
        assert_eq!(sol.io, 3);
        assert_eq!(replay(&d, 3, &sol.moves).unwrap(), 3);
        assert!(matches!(min_io_pebbling(&d, 2), Err(Error::Infeasible(_))));
    }

    #[test]
    fn passthrough_costs_load_and_store() {
        let d = dag(&[I, O], &[(0, 1)]);
        assert_eq!(min_io_pebbling(&d, 2).unwrap(), 2);
        assert!(matches!(min_io_pebbling(&d, 1), Err(Error::Infeasible(_))));
    }

    #[test]
    fn spilling_forces_extra_io() {
        // two independent products feeding a sum: with 3 pebbles one
        // product must be spilled and reloaded
        let d = dag(
            &[I, I, I, I, N, N, O],
            &[(0, 4), (1, 4), (2, 5), (3, 5), (4, 6), (5, 6)],
        );
        let q3 = min_io_pebbling(&d, 3).unwrap();
        let q4 = min_io_pebbling(&d, 4).unwrap();
        assert_eq!(q4, 5);
        assert_eq!(q3, 7);
        let sol = solve_pebbling(&d, 3, &PebbleLimits::default()).unwrap();
        assert_eq!(replay(&d, 3, &sol.moves).unwrap(), sol.io);
    }

    #[test]
    fn illegal_replays_are_rejected() {
        let d = dag(&[I, I, O], &[(0, 2), (1, 2)]);
        assert!(replay(&d, 3, &[Move::Compute(2)]).is_err());
        assert!(replay(&d, 3, &[Move::Load(0), Move::Load(1), Move::Compute(2)]).is_err());
        assert!(replay(&d, 2, &[Move::Load(0), Move::Load(1), Move::Load(2)]).is_err());
    }

    #[test]
    fn vertex_cap_is_enforced() {
        let kinds: Vec<_> = (0..30)
            .map(|i| {
                if i == 0 {
                    I
                } else if i == 29 {
                    O
                } else {
                    N
                }
            })
            .collect();
        let edges: Vec<_> = (0..29).map(|i| (i, i + 1)).collect();
        let d = dag(&kinds, &edges);
        assert!(matches!(min_io_pebbling(&d, 3), Err(Error::Size { .. })));
    }
}
