//! Schedule-driven two-level memory simulator.

use rayon::prelude::*;
use serde::Serialize;

use super::schedule::{Schedule, Stage};
use crate::error::{Error, Result};
use crate::model::HwModel;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct SimReport {
    pub loads: u64,
    pub stores: u64,
    pub q_total: u64,
    pub flops: u64,
    pub runtime_proxy: f64,
    pub peak_fast_mem: u64,
    pub blocks: u64,
    pub stages: u64,
}

#[derive(Clone, Copy, Default)]
struct Totals {
    loads: u64,
    stores: u64,
    flops: u64,
    stages: u64,
}

impl Totals {
    fn merge(self, o: Totals) -> Totals {
        Totals {
            loads: self.loads + o.loads,
            stores: self.stores + o.stores,
            flops: self.flops + o.flops,
            stages: self.stages + o.stages,
        }
    }
}

/// Compute term multiplier for a thread count quantized to the warp width:
/// `⌈t/w⌉·w / t`.
pub fn warp_factor(threads: u64, warp_width: u32) -> f64 {
    let w = warp_width.max(1) as u64;
    let t = threads.max(1);
    (t.div_ceil(w) * w) as f64 / t as f64
}

/// `α·flops·warp/n_p + β·q_total`.
pub fn runtime_proxy(flops: u64, q_total: u64, threads: u64, hw: &HwModel) -> f64 {
    hw.alpha * flops as f64 * warp_factor(threads, hw.warp_width) / hw.n_p as f64
        + hw.beta * q_total as f64
}

fn check_stage(st: &Stage, s_b: u64) -> Result<()> {
    if st.resident > s_b {
        return Err(Error::Schedule {
            block: st.block,
            stage: st.index as usize,
            detail: format!("{} resident words exceed s_b = {s_b}", st.resident),
        });
    }
    Ok(())
}

/// Walk every stage and count the words it moves.
pub fn simulate(schedule: &Schedule, hw: &HwModel) -> Result<SimReport> {
    let s_b = schedule.tile.s_b;
    let per_block: Vec<(Totals, u64)> = (0..schedule.blocks.len())
        .into_par_iter()
        .map(|b| {
            let mut t = Totals::default();
            let mut peak = 0;
            for st in schedule.block_stages(b) {
                check_stage(&st, s_b)?;
                t.loads += st.loads();
                t.stores += st.store_words;
                t.flops += st.flops;
                t.stages += 1;
                peak = peak.max(st.resident);
            }
            Ok((t, peak))
        })
        .collect::<Result<_>>()?;
    let totals = per_block
        .iter()
        .fold(Totals::default(), |acc, (t, _)| acc.merge(*t));
    let mut proc_peak = vec![0u64; hw.n_p as usize];
    for (plan, (_, peak)) in schedule.blocks.iter().zip(&per_block) {
        let slot = &mut proc_peak[plan.processor as usize % hw.n_p as usize];
        *slot = (*slot).max(*peak);
    }
    let q_total = totals.loads + totals.stores;
    Ok(SimReport {
        loads: totals.loads,
        stores: totals.stores,
        q_total,
        flops: totals.flops,
        runtime_proxy: runtime_proxy(totals.flops, q_total, schedule.tile.threads(), hw),
        peak_fast_mem: proc_peak.iter().sum(),
        blocks: schedule.blocks.len() as u64,
        stages: totals.stages,
    })
}

/// One CSV-ready row per stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct StageTrace {
    pub stage: u64,
    pub block: usize,
    pub channel: u32,
    pub loads: u64,
    pub stores: u64,
    pub resident: u64,
}

pub fn stage_trace(schedule: &Schedule) -> Vec<StageTrace> {
    schedule
        .stages()
        .enumerate()
        .map(|(i, st)| StageTrace {
            stage: i as u64,
            block: st.block,
            channel: st.channel,
            loads: st.loads(),
            stores: st.store_words,
            resident: st.resident,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataflow::{plan_direct_dataflow, TileConfig};
    use crate::model::{Algorithm, ConvShape};

    #[test]
    fn direct_example_counts() {
        let shape = ConvShape::from_output(6, 6, 4, 2, 3, 3, 1).unwrap();
        let hw = HwModel::new(144, 288, 1).unwrap();
        let s = plan_direct_dataflow(&shape, &hw, &TileConfig::new(6, 6, 4, 144)).unwrap();
        let rep = simulate(&s, &hw).unwrap();
        assert_eq!((rep.loads, rep.stores, rep.q_total), (200, 144, 344));
        assert_eq!(rep.flops, 2 * 9 * 2 * 144);
        assert_eq!(rep.peak_fast_mem, 144);
        let small = plan_direct_dataflow(&shape, &hw, &TileConfig::new(2, 2, 1, 144)).unwrap();
        assert!(simulate(&small, &hw).unwrap().q_total > rep.q_total);
    }

    #[test]
    fn empty_schedule_is_all_zero() {
        let hw = HwModel::new(16, 32, 2).unwrap();
        let s = Schedule::empty(Algorithm::Direct, TileConfig::new(1, 1, 1, 1));
        let rep = simulate(&s, &hw).unwrap();
        assert_eq!(rep, SimReport::default());
        assert!(stage_trace(&s).is_empty());
    }

    #[test]
    fn warp_quantization() {
        assert_eq!(warp_factor(1, 1), 1.0);
        assert_eq!(warp_factor(3, 4), 4.0 / 3.0);
        assert_eq!(warp_factor(8, 4), 1.0);
    }

    #[test]
    fn trace_matches_report() {
        let shape = ConvShape::from_output(4, 4, 2, 3, 3, 3, 1).unwrap();
        let hw = HwModel::new(64, 128, 2).unwrap();
        let s = plan_direct_dataflow(&shape, &hw, &TileConfig::new(2, 2, 2, 8)).unwrap();
        let rep = simulate(&s, &hw).unwrap();
        let tr = stage_trace(&s);
        assert_eq!(tr.len() as u64, rep.stages);
        assert_eq!(
            tr.iter().map(|t| t.loads + t.stores).sum::<u64>(),
            rep.q_total
        );
        assert_eq!(rep.peak_fast_mem, 16);
    }
}
