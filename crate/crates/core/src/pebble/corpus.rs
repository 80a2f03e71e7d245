//! Tiny DAG corpus used by the pebbling and bound soundness checks.
//!
//! The corpus is generated here and stored as adjacency-text fixtures; the
//! embedded copies are what [`load`] returns, and a test keeps the two in
//! sync.

use crate::dag::{
    build_direct_conv_dag, build_winograd_dag, parse_dag, BuildOptions, Dag, Op, Origin,
    VertexInfo, VertexKind,
};
use crate::error::Result;
use crate::model::{ConvShape, WinogradParams};

macro_rules! fixtures {
    ($($name:literal),* $(,)?) => {
        /// `(name, text)` for every bundled fixture.
        pub const FIXTURES: &[(&str, &str)] = &[
            $(($name, include_str!(concat!("../../fixtures/dags/", $name, ".dag"))),)*
        ];
    };
}

fixtures!(
    "passthrough",
    "product",
    "chain4",
    "diamond",
    "sum_tree4",
    "shared_inputs",
    "butterfly4",
    "matvec2",
    "ring8",
    "ring9",
    "dc_1x1_cin2",
    "dc_1x1_cin3",
    "dc_1x1_cin4",
    "dc_1x1_cout2",
    "dc_1x1_cin2_cout2",
    "dc_1x1_cin2_w2",
    "dc_2x1_w3",
    "dc_2x1_w4",
    "dc_2x2",
    "dc_3x1",
    "wa_e1r1_cin1",
    "wa_e1r1_cin2",
    "wa_e1r1_cin3",
    "wa_e1r1_cout2",
    "wa_e1r1_tiles2",
);

fn generic(kinds: &[VertexKind], edges: &[(u32, u32)]) -> Dag {
    let info = kinds
        .iter()
        .map(|&kind| {
            let step = (kind != VertexKind::Input) as u8;
            VertexInfo {
                kind,
                op: if kind == VertexKind::Input {
                    Op::Input
                } else {
                    Op::Opaque
                },
                step,
                last_step: step,
            }
        })
        .collect();
    Dag::from_edges(info, edges, Origin::Generic).expect("corpus DAG is well formed")
}

/// `k` inputs on a cycle, one output per adjacent pair.
fn ring(k: u32) -> Dag {
    let mut kinds = vec![VertexKind::Input; k as usize];
    kinds.extend(std::iter::repeat_n(VertexKind::Output, k as usize));
    let edges: Vec<(u32, u32)> = (0..k)
        .flat_map(|i| [(i, k + i), ((i + 1) % k, k + i)])
        .collect();
    generic(&kinds, &edges)
}

fn direct(w_out: u32, h_out: u32, c_out: u32, c_in: u32, w_ker: u32, h_ker: u32) -> Dag {
    let shape = ConvShape::from_output(w_out, h_out, c_out, c_in, w_ker, h_ker, 1).unwrap();
    let opts = BuildOptions {
        labels: false,
        ..Default::default()
    };
    build_direct_conv_dag(&shape, &opts).unwrap()
}

fn winograd_unit(w_out: u32, c_out: u32, c_in: u32) -> Dag {
    let shape = ConvShape::from_output(w_out, 1, c_out, c_in, 1, 1, 1).unwrap();
    let p = WinogradParams::new(1, 1).unwrap();
    let opts = BuildOptions {
        labels: false,
        ..Default::default()
    };
    build_winograd_dag(&shape, &p, &opts).unwrap()
}

/// Build every corpus DAG from scratch.
pub fn generate() -> Vec<(&'static str, Dag)> {
    use VertexKind::{Input as I, Internal as N, Output as O};
    vec![
        ("passthrough", generic(&[I, O], &[(0, 1)])),
        ("product", generic(&[I, I, O], &[(0, 2), (1, 2)])),
        (
            "chain4",
            generic(&[I, N, N, N, O], &[(0, 1), (1, 2), (2, 3), (3, 4)]),
        ),
        (
            "diamond",
            generic(&[I, N, N, O], &[(0, 1), (0, 2), (1, 3), (2, 3)]),
        ),
        (
            "sum_tree4",
            generic(
                &[I, I, I, I, N, N, O],
                &[(0, 4), (1, 4), (2, 5), (3, 5), (4, 6), (5, 6)],
            ),
        ),
        (
            "shared_inputs",
            generic(&[I, I, O, O], &[(0, 2), (1, 2), (0, 3), (1, 3)]),
        ),
        (
            "butterfly4",
            generic(
                &[I, I, I, I, N, N, N, N, O, O, O, O],
                &[
                    (0, 4),
                    (2, 4),
                    (0, 5),
                    (2, 5),
                    (1, 6),
                    (3, 6),
                    (1, 7),
                    (3, 7),
                    (4, 8),
                    (6, 8),
                    (5, 9),
                    (7, 9),
                    (4, 10),
                    (6, 10),
                    (5, 11),
                    (7, 11),
                ],
            ),
        ),
        (
            "matvec2",
            generic(
                &[I, I, I, I, I, I, N, N, N, N, O, O],
                &[
                    (0, 6),
                    (4, 6),
                    (1, 7),
                    (5, 7),
                    (2, 8),
                    (4, 8),
                    (3, 9),
                    (5, 9),
                    (6, 10),
                    (7, 10),
                    (8, 11),
                    (9, 11),
                ],
            ),
        ),
        ("ring8", ring(8)),
        ("ring9", ring(9)),
        ("dc_1x1_cin2", direct(1, 1, 1, 2, 1, 1)),
        ("dc_1x1_cin3", direct(1, 1, 1, 3, 1, 1)),
        ("dc_1x1_cin4", direct(1, 1, 1, 4, 1, 1)),
        ("dc_1x1_cout2", direct(1, 1, 2, 1, 1, 1)),
        ("dc_1x1_cin2_cout2", direct(1, 1, 2, 2, 1, 1)),
        ("dc_1x1_cin2_w2", direct(2, 1, 1, 2, 1, 1)),
        ("dc_2x1_w3", direct(2, 1, 1, 1, 2, 1)),
        ("dc_2x1_w4", direct(3, 1, 1, 1, 2, 1)),
        ("dc_2x2", direct(1, 1, 1, 1, 2, 2)),
        ("dc_3x1", direct(1, 1, 1, 1, 3, 1)),
        ("wa_e1r1_cin1", winograd_unit(1, 1, 1)),
        ("wa_e1r1_cin2", winograd_unit(1, 1, 2)),
        ("wa_e1r1_cin3", winograd_unit(1, 1, 3)),
        ("wa_e1r1_cout2", winograd_unit(1, 2, 1)),
        ("wa_e1r1_tiles2", winograd_unit(2, 1, 1)),
    ]
}

/// Parse the bundled fixtures.
pub fn load() -> Result<Vec<(&'static str, Dag)>> {
    FIXTURES
        .iter()
        .map(|&(name, text)| Ok((name, parse_dag(text)?)))
        .collect()
}

/// Look up one bundled fixture by name.
pub fn fixture(name: &str) -> Option<Result<Dag>> {
    FIXTURES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| parse_dag(text))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::write_dag;

    #[test]
    fn fixtures_match_generator() {
        let generated = generate();
        let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/dags");
        let regen = std::env::var_os("CONVIO_REGEN_FIXTURES").is_some();
        assert_eq!(generated.len(), FIXTURES.len());
        for ((name, dag), (fname, text)) in generated.iter().zip(FIXTURES) {
            assert_eq!(name, fname);
            let want = write_dag(dag);
            if regen {
                std::fs::write(format!("{dir}/{name}.dag"), &want).unwrap();
            } else {
                assert_eq!(&want, text, "fixture {name} is stale");
            }
        }
    }

    #[test]
    fn corpus_is_tiny() {
        for (name, dag) in load().unwrap() {
            assert!(dag.len() <= 20, "{name} has {} vertices", dag.len());
            let computed = dag.count_vertices(&[VertexKind::Internal, VertexKind::Output]);
            assert!(computed <= 12, "{name} has {computed} computed vertices");
        }
    }
}
