use std::collections::HashMap;

use crate::dag::{Dag, DagBuilder, Labels, Op, Origin, Source, Transform, VertexKind};
use crate::error::{Error, Result};
use crate::model::{reuse_factor, ConvShape, WinogradParams};

pub const DEFAULT_VERTEX_CAP: u64 = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BuildOptions {
    /// Upper limit on the total vertex count, inputs included.
    pub vertex_cap: u64,
    /// Build each kernel transform once per (output channel, input channel)
    /// and reuse it for every tile, instead of once per tile.
    pub share_kernel_transform: bool,
    /// Attach tensor coordinates to inputs and outputs.
    pub labels: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            vertex_cap: DEFAULT_VERTEX_CAP,
            share_kernel_transform: false,
            labels: true,
        }
    }
}

/// Internal plus output vertices of the direct-convolution DAG:
/// `(2·w_ker·h_ker·c_in − 1)·w_out·h_out·c_out·n`.
pub fn direct_vertex_count(shape: &ConvShape) -> u64 {
    let k = shape.kernel_area() * shape.c_in() as u64;
    (2 * k - 1) * shape.outputs()
}

/// Internal plus output vertices of the Winograd DAG with per-tile kernel
/// transforms. Outputs of padded tiles beyond the image are not built.
pub fn winograd_vertex_count(shape: &ConvShape, p: &WinogradParams) -> u64 {
    let a2 = (p.patch() as u64).pow(2);
    let r2 = (p.r as u64).pow(2);
    let c_in = shape.c_in() as u64;
    let (tw, th) = p.tiles(shape);
    let tiles = tw as u64 * th as u64 * shape.c_out() as u64 * shape.batch() as u64;
    let per_tile =
        (2 * a2 - 1) * a2 * c_in + (2 * r2 - 1) * a2 * c_in + a2 * c_in + (c_in - 1) * a2;
    tiles * per_tile + shape.outputs() * (2 * a2 - 1)
}

fn check_cap(what: &str, count: u64, cap: u64) -> Result<()> {
    if count > cap || count > u32::MAX as u64 {
        return Err(Error::Size {
            what: what.into(),
            count,
            cap,
        });
    }
    Ok(())
}

/// Lazily created input vertices keyed by flat tensor index.
struct InputTable {
    ids: Vec<u32>,
}

impl InputTable {
    fn new(len: usize) -> Self {
        InputTable {
            ids: vec![u32::MAX; len],
        }
    }

    fn get(
        &mut self,
        b: &mut DagBuilder,
        labels: &mut Option<Labels>,
        idx: usize,
        src: Source,
    ) -> u32 {
        if self.ids[idx] == u32::MAX {
            let id = b.push(VertexKind::Input, Op::Input, 0, &[]);
            if let Some(l) = labels.as_mut() {
                l.inputs.push((id, src));
            }
            self.ids[idx] = id;
        }
        self.ids[idx]
    }
}

/// Direct convolution as two steps: one product per (input, weight) pair
/// of every sliding window, then one left-deep summation tree per output.
pub fn build_direct_conv_dag(shape: &ConvShape, opts: &BuildOptions) -> Result<Dag> {
    let computed = direct_vertex_count(shape);
    let n = shape.batch() as usize;
    let (c_in, c_out) = (shape.c_in() as usize, shape.c_out() as usize);
    let (w_in, h_in) = (shape.w_in() as usize, shape.h_in() as usize);
    let (w_ker, h_ker) = (shape.w_ker() as usize, shape.h_ker() as usize);
    let image_len = n * c_in * h_in * w_in;
    let weight_len = c_out * c_in * h_ker * w_ker;
    check_cap(
        "direct convolution DAG vertices",
        computed + image_len as u64 + weight_len as u64,
        opts.vertex_cap,
    )?;

    let k = w_ker * h_ker * c_in;
    let mut b = DagBuilder::with_capacity(
        computed as usize + image_len + weight_len,
        (2 * computed) as usize,
    );
    let mut labels = opts.labels.then(Labels::default);
    let mut image = InputTable::new(image_len);
    let mut weight = InputTable::new(weight_len);
    let mu = shape.stride() as usize;
    let single = k == 1;
    let step1_kind = if single {
        VertexKind::Output
    } else {
        VertexKind::Internal
    };

    for ni in 0..n {
        for ko in 0..c_out {
            for oy in 0..shape.h_out() as usize {
                for ox in 0..shape.w_out() as usize {
                    let mut acc = u32::MAX;
                    for c in 0..c_in {
                        for ky in 0..h_ker {
                            for kx in 0..w_ker {
                                let (iy, ix) = (oy * mu + ky, ox * mu + kx);
                                let img_idx = ((ni * c_in + c) * h_in + iy) * w_in + ix;
                                let w_idx = ((ko * c_in + c) * h_ker + ky) * w_ker + kx;
                                let src =
                                    Source::Image([ni as u32, c as u32, iy as u32, ix as u32]);
                                let x = image.get(&mut b, &mut labels, img_idx, src);
                                let src =
                                    Source::Weight([ko as u32, c as u32, ky as u32, kx as u32]);
                                let g = weight.get(&mut b, &mut labels, w_idx, src);
                                let prod = b.push(step1_kind, Op::Mul, 1, &[x, g]);
                                acc = if acc == u32::MAX {
                                    prod
                                } else {
                                    b.push(VertexKind::Internal, Op::Add, 2, &[acc, prod])
                                };
                            }
                        }
                    }
                    b.set_kind(acc, VertexKind::Output);
                    if single {
                        b.set_last_step(acc, 2);
                    }
                    if let Some(l) = labels.as_mut() {
                        l.outputs
                            .push((acc, [ni as u32, ko as u32, oy as u32, ox as u32]));
                    }
                }
            }
        }
    }
    let origin = Origin::Direct {
        reuse: reuse_factor(shape),
    };
    Ok(b.finish(2, origin, labels))
}

/// Left-deep linear-combination tree: one scale vertex per leaf, then a
/// chain of additions. Returns the root.
fn lin_comb(
    b: &mut DagBuilder,
    leaves: &[(u32, (u8, u8), (u8, u8))],
    transform: Transform,
    step: u8,
) -> u32 {
    let mut acc = u32::MAX;
    for &(leaf, row, col) in leaves {
        let s = b.push(
            VertexKind::Internal,
            Op::Scale {
                transform,
                row,
                col,
            },
            step,
            &[leaf],
        );
        acc = if acc == u32::MAX {
            s
        } else {
            b.push(VertexKind::Internal, Op::Add, step, &[acc, s])
        };
    }
    acc
}

/// Winograd `F(e×e, r×r)` as four steps per (tile, output channel):
/// input/kernel transforms, element-wise products, channel summation and
/// the output transform.
pub fn build_winograd_dag(
    shape: &ConvShape,
    p: &WinogradParams,
    opts: &BuildOptions,
) -> Result<Dag> {
    p.check_shape(shape)?;
    if !p.ratio_in_range() {
        log::warn!(
            "Winograd r/e = {}/{} is outside [1/2, 2]; vertex-generation estimates assume it is inside",
            p.r,
            p.e
        );
    }
    let a = p.patch() as usize;
    let (e, r) = (p.e as usize, p.r as usize);
    let n = shape.batch() as usize;
    let (c_in, c_out) = (shape.c_in() as usize, shape.c_out() as usize);
    let (w_in, h_in) = (shape.w_in() as usize, shape.h_in() as usize);
    let (w_out, h_out) = (shape.w_out() as usize, shape.h_out() as usize);
    let (tw, th) = p.tiles(shape);
    let (tw, th) = (tw as usize, th as usize);
    let image_len = n * c_in * h_in * w_in;
    let weight_len = c_out * c_in * r * r;
    let computed = winograd_vertex_count(shape, p);
    check_cap(
        "Winograd DAG vertices",
        computed + image_len as u64 + weight_len as u64 + 1,
        opts.vertex_cap,
    )?;

    let mut b = DagBuilder::with_capacity(
        computed as usize + image_len + weight_len,
        2 * computed as usize,
    );
    let mut labels = opts.labels.then(Labels::default);
    let mut image = InputTable::new(image_len);
    let mut weight = InputTable::new(weight_len);
    let mut pad = u32::MAX;
    let mut shared_kernel: HashMap<(usize, usize), Vec<u32>> = HashMap::new();
    let pos: Vec<(u8, u8)> = (0..a)
        .flat_map(|u| (0..a).map(move |v| (u as u8, v as u8)))
        .collect();

    for ni in 0..n {
        for ty in 0..th {
            for tx in 0..tw {
                for ko in 0..c_out {
                    // step 1 and 2, per input channel
                    let mut lambda: Vec<Vec<u32>> = Vec::with_capacity(c_in);
                    for c in 0..c_in {
                        let mut d = Vec::with_capacity(a * a);
                        for i in 0..a {
                            for j in 0..a {
                                let (iy, ix) = (ty * e + i, tx * e + j);
                                let id = if iy < h_in && ix < w_in {
                                    let idx = ((ni * c_in + c) * h_in + iy) * w_in + ix;
                                    let src =
                                        Source::Image([ni as u32, c as u32, iy as u32, ix as u32]);
                                    image.get(&mut b, &mut labels, idx, src)
                                } else {
                                    if pad == u32::MAX {
                                        pad = b.push(VertexKind::Input, Op::Input, 0, &[]);
                                        if let Some(l) = labels.as_mut() {
                                            l.inputs.push((pad, Source::Pad));
                                        }
                                    }
                                    pad
                                };
                                d.push(id);
                            }
                        }
                        let p_roots: Vec<u32> = pos
                            .iter()
                            .map(|&(u, v)| {
                                let leaves: Vec<_> = pos
                                    .iter()
                                    .map(|&(i, j)| (d[i as usize * a + j as usize], (u, v), (i, j)))
                                    .collect();
                                lin_comb(&mut b, &leaves, Transform::Input, 1)
                            })
                            .collect();

                        let j_roots = match shared_kernel.get(&(ko, c)) {
                            Some(roots) if opts.share_kernel_transform => roots.clone(),
                            _ => {
                                let mut g = Vec::with_capacity(r * r);
                                for i in 0..r {
                                    for j in 0..r {
                                        let idx = ((ko * c_in + c) * r + i) * r + j;
                                        let src = Source::Weight([
                                            ko as u32, c as u32, i as u32, j as u32,
                                        ]);
                                        g.push(weight.get(&mut b, &mut labels, idx, src));
                                    }
                                }
                                let roots: Vec<u32> = pos
                                    .iter()
                                    .map(|&(u, v)| {
                                        let leaves: Vec<_> = (0..r)
                                            .flat_map(|i| (0..r).map(move |j| (i, j)))
                                            .map(|(i, j)| {
                                                (g[i * r + j], (u, v), (i as u8, j as u8))
                                            })
                                            .collect();
                                        lin_comb(&mut b, &leaves, Transform::Kernel, 1)
                                    })
                                    .collect();
                                if opts.share_kernel_transform {
                                    shared_kernel.insert((ko, c), roots.clone());
                                }
                                roots
                            }
                        };

                        let prods: Vec<u32> = (0..a * a)
                            .map(|q| {
                                b.push(VertexKind::Internal, Op::Mul, 2, &[p_roots[q], j_roots[q]])
                            })
                            .collect();
                        lambda.push(prods);
                    }

                    // step 3: sum over channels
                    let m: Vec<u32> = (0..a * a)
                        .map(|q| {
                            let mut acc = lambda[0][q];
                            for lam in lambda.iter().skip(1) {
                                acc = b.push(VertexKind::Internal, Op::Add, 3, &[acc, lam[q]]);
                            }
                            if c_in == 1 {
                                b.set_last_step(acc, 3);
                            }
                            acc
                        })
                        .collect();

                    // step 4: output transform, skipping padded outputs
                    for i in 0..e {
                        for j in 0..e {
                            let (oy, ox) = (ty * e + i, tx * e + j);
                            if oy >= h_out || ox >= w_out {
                                continue;
                            }
                            let leaves: Vec<_> = pos
                                .iter()
                                .map(|&(u, v)| {
                                    (m[u as usize * a + v as usize], (i as u8, j as u8), (u, v))
                                })
                                .collect();
                            let root = lin_comb(&mut b, &leaves, Transform::Output, 4);
                            b.set_kind(root, VertexKind::Output);
                            if let Some(l) = labels.as_mut() {
                                l.outputs
                                    .push((root, [ni as u32, ko as u32, oy as u32, ox as u32]));
                            }
                        }
                    }
                }
            }
        }
    }
    debug_assert!(b.len() as u64 <= computed + image_len as u64 + weight_len as u64 + 1);
    let origin = Origin::Winograd { e: p.e, r: p.r };
    Ok(b.finish(4, origin, labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::{count_vertices, validate_multi_step_partition};

    const COMPUTED: [VertexKind; 2] = [VertexKind::Internal, VertexKind::Output];

    fn dc(wk: u32, c_in: u32, out: u32, c_out: u32) -> Dag {
        let s = ConvShape::from_output(out, out, c_out, c_in, wk, wk, 1).unwrap();
        build_direct_conv_dag(&s, &BuildOptions::default()).unwrap()
    }

    #[test]
    fn direct_single_tap_products_are_outputs() {
        let dag = dc(1, 1, 2, 1);
        assert_eq!(count_vertices(&dag, &[VertexKind::Output]), 4);
        assert_eq!(count_vertices(&dag, &[VertexKind::Internal]), 0);
        assert_eq!(validate_multi_step_partition(&dag).unwrap().n_steps(), 2);
    }

    #[test]
    fn direct_counts() {
        assert_eq!(count_vertices(&dc(3, 2, 2, 1), &COMPUTED), 140);
        let dag = dc(3, 1, 1, 1);
        let prods = (0..dag.len() as u32)
            .filter(|&v| dag.info(v).op == Op::Mul)
            .count();
        let adds = (0..dag.len() as u32)
            .filter(|&v| dag.info(v).op == Op::Add && dag.kind(v) == VertexKind::Internal)
            .count();
        assert_eq!((prods, adds), (9, 7));
        assert_eq!(count_vertices(&dag, &COMPUTED), 17);
    }

    #[test]
    fn winograd_single_tile_count() {
        let s = ConvShape::from_output(2, 2, 1, 1, 3, 3, 1).unwrap();
        let p = WinogradParams::new(2, 3).unwrap();
        let dag = build_winograd_dag(&s, &p, &BuildOptions::default()).unwrap();
        assert_eq!(count_vertices(&dag, &COMPUTED), 908);
        assert_eq!(count_vertices(&dag, &[VertexKind::Output]), 4);
        assert_eq!(validate_multi_step_partition(&dag).unwrap().n_steps(), 4);
    }

    #[test]
    fn winograd_unit_channel_has_no_step3_vertices() {
        let s = ConvShape::from_output(1, 1, 1, 1, 1, 1, 1).unwrap();
        let p = WinogradParams::new(1, 1).unwrap();
        let dag = build_winograd_dag(&s, &p, &BuildOptions::default()).unwrap();
        assert_eq!(
            (0..dag.len() as u32).filter(|&v| dag.step(v) == 3).count(),
            0
        );
        let part = validate_multi_step_partition(&dag).unwrap();
        assert_eq!(part.outputs(2), part.outputs(3));
    }

    #[test]
    fn winograd_rejects_stride() {
        let s = ConvShape::new(9, 9, 1, 1, 3, 3, 2).unwrap();
        let p = WinogradParams::new(2, 3).unwrap();
        assert!(matches!(
            build_winograd_dag(&s, &p, &BuildOptions::default()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn cap_names_the_count() {
        let s = ConvShape::from_output(64, 64, 64, 64, 3, 3, 1).unwrap();
        let opts = BuildOptions::default();
        match build_direct_conv_dag(&s, &opts) {
            Err(Error::Size { count, cap, .. }) => {
                assert!(count > cap);
                assert_eq!(cap, DEFAULT_VERTEX_CAP);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn shared_kernel_transform_builds_fewer_vertices() {
        let s = ConvShape::from_output(4, 4, 1, 1, 3, 3, 1).unwrap();
        let p = WinogradParams::new(2, 3).unwrap();
        let plain = build_winograd_dag(&s, &p, &BuildOptions::default()).unwrap();
        let shared = build_winograd_dag(
            &s,
            &p,
            &BuildOptions {
                share_kernel_transform: true,
                ..Default::default()
            },
        )
        .unwrap();
        let per_tree = 16 * (2 * 9 - 1) as u64;
        assert_eq!(
            count_vertices(&plain, &COMPUTED) - count_vertices(&shared, &COMPUTED),
            3 * per_tree
        );
        validate_multi_step_partition(&shared).unwrap();
    }
}
