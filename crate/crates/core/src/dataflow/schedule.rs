//! Staged schedules for the output-stationary direct and Winograd dataflows.
//!
//! Every output sub-block is owned by one processor (round robin). Its
//! stages walk the input channels: each stage loads the input tile and the
//! weights of one channel, updates the resident partial sums, and the last
//! stage writes the finished outputs back exactly once.

use serde::Serialize;

use super::tile::{dc_input_tile, extents, TileConfig};
use crate::error::{Error, Result};
use crate::model::{Algorithm, ConvShape, HwModel, WinogradParams};

/// One output sub-block of a schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct BlockPlan {
    pub image: u32,
    pub x0: u32,
    pub y0: u32,
    pub z0: u32,
    pub processor: u32,
    /// Output words of this block that lie inside the image.
    pub outputs: u64,
}

/// Transfers and work of one stage.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Stage {
    pub block: usize,
    pub index: u32,
    pub channel: u32,
    pub input_words: u64,
    pub weight_words: u64,
    pub store_words: u64,
    pub flops: u64,
    /// Partial-sum words resident in fast memory during the stage.
    pub resident: u64,
}

impl Stage {
    pub fn loads(&self) -> u64 {
        self.input_words + self.weight_words
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Schedule {
    pub algorithm: Algorithm,
    pub tile: TileConfig,
    pub c_in: u32,
    /// Transformed kernels are loaded once per sub-block and channel instead
    /// of once per `e × e` tile position.
    pub shared_kernel: bool,
    pub blocks: Vec<BlockPlan>,
    #[serde(skip)]
    shape: Option<ConvShape>,
}

impl Schedule {
    /// A schedule with no work.
    pub fn empty(algorithm: Algorithm, tile: TileConfig) -> Self {
        Schedule {
            algorithm,
            tile,
            c_in: 0,
            shared_kernel: false,
            blocks: Vec::new(),
            shape: None,
        }
    }

    pub fn stage_count(&self) -> u64 {
        self.blocks.len() as u64 * self.c_in as u64
    }

    /// Stage `index` of block `block`.
    pub fn stage(&self, block: usize, index: u32) -> Stage {
        let shape = self.shape.as_ref().expect("nonempty schedule has a shape");
        let b = &self.blocks[block];
        let t = &self.tile;
        let last = index + 1 == self.c_in;
        let mut st = Stage {
            block,
            index,
            channel: index,
            store_words: if last { b.outputs } else { 0 },
            resident: t.accumulator_words(&self.algorithm),
            ..Default::default()
        };
        match self.algorithm {
            Algorithm::Direct => {
                let k = shape.kernel_area();
                st.input_words = dc_input_tile(shape, t.x, t.y);
                st.weight_words = k * t.z as u64;
                st.flops = 2 * k * t.volume();
            }
            Algorithm::Winograd(p) => {
                let a2 = (p.patch() as u64).pow(2);
                let r2 = (p.r as u64).pow(2);
                let tiles = (t.x / p.e) as u64 * (t.y / p.e) as u64;
                let z = t.z as u64;
                let kernel_sets = if self.shared_kernel { z } else { tiles * z };
                st.input_words = tiles * a2;
                st.weight_words = kernel_sets * r2;
                let transform_in = tiles * a2 * (2 * a2 - 1);
                let transform_ker = kernel_sets * a2 * (2 * r2 - 1);
                let products = tiles * z * a2;
                let accumulate = if index == 0 { 0 } else { tiles * z * a2 };
                let transform_out = if last { b.outputs * (2 * a2 - 1) } else { 0 };
                st.flops = transform_in + transform_ker + products + accumulate + transform_out;
            }
        }
        st
    }

    /// All stages in block order.
    pub fn stages(&self) -> impl Iterator<Item = Stage> + '_ {
        (0..self.blocks.len()).flat_map(move |b| (0..self.c_in).map(move |i| self.stage(b, i)))
    }

    /// Stages of one block.
    pub fn block_stages(&self, block: usize) -> impl Iterator<Item = Stage> + '_ {
        (0..self.c_in).map(move |i| self.stage(block, i))
    }
}

fn plan(
    shape: &ConvShape,
    alg: Algorithm,
    hw: &HwModel,
    tile: &TileConfig,
    shared: bool,
) -> Result<Schedule> {
    tile.check(shape, &alg)?;
    let (w, h) = extents(shape, &alg);
    let mut blocks = Vec::new();
    let n_p = hw.n_p;
    for image in 0..shape.batch() {
        for z0 in (0..shape.c_out()).step_by(tile.z as usize) {
            for y0 in (0..h).step_by(tile.y as usize) {
                for x0 in (0..w).step_by(tile.x as usize) {
                    let real_w = tile.x.min(shape.w_out().saturating_sub(x0)) as u64;
                    let real_h = tile.y.min(shape.h_out().saturating_sub(y0)) as u64;
                    let processor = (blocks.len() % n_p as usize) as u32;
                    blocks.push(BlockPlan {
                        image,
                        x0,
                        y0,
                        z0,
                        processor,
                        outputs: real_w * real_h * tile.z as u64,
                    });
                }
            }
        }
    }
    let sched = Schedule {
        algorithm: alg,
        tile: *tile,
        c_in: shape.c_in(),
        shared_kernel: shared,
        blocks,
        shape: Some(*shape),
    };
    let resident = tile.accumulator_words(&alg);
    if resident > tile.s_b {
        return Err(Error::Schedule {
            block: 0,
            stage: 0,
            detail: format!("{resident} resident words exceed s_b = {}", tile.s_b),
        });
    }
    Ok(sched)
}

/// Direct-convolution schedule: per `x × y × z` block, one stage per input
/// channel loading an `x′ × y′` input tile and `w_ker·h_ker·z` weights.
pub fn plan_direct_dataflow(
    shape: &ConvShape,
    hw: &HwModel,
    tile: &TileConfig,
) -> Result<Schedule> {
    plan(shape, Algorithm::Direct, hw, tile, false)
}

/// Winograd schedule: per `x × y × z` block, one stage per input channel
/// loading an `(e+r−1)²` patch for each of the `xy/e²` tile positions and
/// `z·r²` weights, either per position or shared across them.
pub fn plan_winograd_dataflow(
    shape: &ConvShape,
    p: &WinogradParams,
    hw: &HwModel,
    tile: &TileConfig,
    shared_kernel: bool,
) -> Result<Schedule> {
    plan(shape, Algorithm::Winograd(*p), hw, tile, shared_kernel)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_stage_loads() {
        let shape = ConvShape::from_output(6, 6, 4, 2, 3, 3, 1).unwrap();
        let hw = HwModel::new(144, 288, 1).unwrap();
        let s = plan_direct_dataflow(&shape, &hw, &TileConfig::new(6, 6, 4, 144)).unwrap();
        assert_eq!(s.stage_count(), 2);
        for st in s.stages() {
            assert_eq!(st.loads(), 100);
        }
        let unit = ConvShape::from_output(1, 1, 1, 1, 1, 1, 1).unwrap();
        let s = plan_direct_dataflow(&unit, &hw, &TileConfig::new(1, 1, 1, 144)).unwrap();
        let st: Vec<_> = s.stages().collect();
        assert_eq!(st.len(), 1);
        assert_eq!(
            (st[0].input_words, st[0].weight_words, st[0].store_words),
            (1, 1, 1)
        );
    }

    #[test]
    fn strided_input_tile() {
        let shape = ConvShape::new(13, 13, 1, 1, 3, 3, 2).unwrap();
        assert_eq!(dc_input_tile(&shape, 4, 1), (2 * 3 + 3) * 3);
    }

    #[test]
    fn winograd_stage_loads() {
        let shape = ConvShape::from_output(2, 2, 1, 2, 3, 3, 1).unwrap();
        let p = WinogradParams::new(2, 3).unwrap();
        let hw = HwModel::new(1024, 2048, 1).unwrap();
        let s = plan_winograd_dataflow(
            &shape,
            &p,
            &hw,
            &TileConfig::winograd(2, 2, 1, 64, 2),
            false,
        )
        .unwrap();
        let st: Vec<_> = s.stages().collect();
        assert_eq!(st.len(), 2);
        assert!(st
            .iter()
            .all(|s| s.input_words == 16 && s.weight_words == 9));
        assert_eq!(st[1].store_words, 4);
    }

    #[test]
    fn capacity_violation_names_the_stage() {
        let shape = ConvShape::from_output(6, 6, 4, 2, 3, 3, 1).unwrap();
        let hw = HwModel::new(144, 288, 1).unwrap();
        let err = plan_direct_dataflow(&shape, &hw, &TileConfig::new(6, 6, 4, 100)).unwrap_err();
        assert!(matches!(
            err,
            Error::Schedule {
                block: 0,
                stage: 0,
                ..
            }
        ));
    }

    #[test]
    fn blocks_round_robin() {
        let shape = ConvShape::from_output(4, 4, 2, 1, 1, 1, 1).unwrap();
        let hw = HwModel::new(64, 128, 3).unwrap();
        let s = plan_direct_dataflow(&shape, &hw, &TileConfig::new(2, 2, 1, 4)).unwrap();
        let procs: Vec<u32> = s.blocks.iter().map(|b| b.processor).collect();
        assert_eq!(procs, vec![0, 1, 2, 0, 1, 2, 0, 1]);
    }
}
