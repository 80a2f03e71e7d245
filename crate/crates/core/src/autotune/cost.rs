//! Simulator-backed measurements and the learned cost model.

use serde::{Deserialize, Serialize};

use super::gbdt::{BoostParams, Gbdt};
use super::space::ConfigSpace;
use crate::dataflow::{plan_direct_dataflow, plan_winograd_dataflow, simulate, Layout, TileConfig};
use crate::error::{Error, Result};
use crate::model::{Algorithm, ConvShape, HwModel};
use crate::surd::q_to_f64;

/// One measured configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub config: TileConfig,
    /// Runtime proxy; infinite when the configuration cannot be scheduled.
    pub cost: f64,
    pub iteration: u64,
}

/// Plan and simulate one configuration. Winograd kernels are shared across
/// tile positions.
pub fn measure(
    config: &TileConfig,
    shape: &ConvShape,
    hw: &HwModel,
    alg: &Algorithm,
) -> Measurement {
    let sched = match alg {
        Algorithm::Direct => plan_direct_dataflow(shape, hw, config),
        Algorithm::Winograd(p) => plan_winograd_dataflow(shape, p, hw, config, true),
    };
    let cost = sched
        .and_then(|s| simulate(&s, hw))
        .map(|r| r.runtime_proxy)
        .unwrap_or(f64::INFINITY);
    Measurement {
        config: *config,
        cost,
        iteration: 0,
    }
}

pub const FEATURE_NAMES: [&str; 13] = [
    "x", "y", "z", "s_b", "n_xt", "n_yt", "n_zt", "threads", "chw", "cwh", "hwc", "xy_rz", "fill",
];

/// Numeric description of a configuration: raw axes, layout one-hot,
/// `xy/(Rz)` and `xyz/s_b`.
pub fn features(t: &TileConfig, reuse: f64) -> Vec<f64> {
    let (x, y, z) = (t.x as f64, t.y as f64, t.z as f64);
    let mut f = vec![
        x,
        y,
        z,
        t.s_b as f64,
        t.n_xt as f64,
        t.n_yt as f64,
        t.n_zt as f64,
        t.threads() as f64,
    ];
    f.extend(
        Layout::ALL
            .iter()
            .map(|l| if *l == t.layout { 1.0 } else { 0.0 }),
    );
    f.push(x * y / (reuse * z));
    f.push(x * y * z / t.s_b as f64);
    f
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    reuse: f64,
    gbdt: Gbdt,
}

impl CostModel {
    pub fn predict(&self, t: &TileConfig) -> f64 {
        self.gbdt.predict(&features(t, self.reuse))
    }
}

/// Fit a cost model on the finite-cost measurements of `dataset`.
pub fn train(
    space: &ConfigSpace,
    dataset: &[Measurement],
    params: BoostParams,
) -> Result<CostModel> {
    let reuse = q_to_f64(&space.algorithm.reuse(&space.shape));
    let rows: Vec<&Measurement> = dataset.iter().filter(|m| m.cost.is_finite()).collect();
    if rows.len() < 2 {
        return Err(Error::Training(format!(
            "{} finite measurements, need at least 2",
            rows.len()
        )));
    }
    let x: Vec<Vec<f64>> = rows.iter().map(|m| features(&m.config, reuse)).collect();
    let y: Vec<f64> = rows.iter().map(|m| m.cost).collect();
    Ok(CostModel {
        reuse,
        gbdt: Gbdt::fit(&x, &y, params)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_tile_costs_less() {
        let shape = ConvShape::from_output(6, 6, 4, 2, 3, 3, 1).unwrap();
        let hw = HwModel::new(144, 288, 1).unwrap();
        let good = measure(
            &TileConfig::new(6, 6, 4, 144),
            &shape,
            &hw,
            &Algorithm::Direct,
        );
        let bad = measure(
            &TileConfig::new(1, 6, 4, 144),
            &shape,
            &hw,
            &Algorithm::Direct,
        );
        assert!(good.cost < bad.cost);
        let again = measure(
            &TileConfig::new(6, 6, 4, 144),
            &shape,
            &hw,
            &Algorithm::Direct,
        );
        assert_eq!(good, again);
    }

    #[test]
    fn infeasible_config_costs_infinity() {
        let shape = ConvShape::from_output(6, 6, 4, 2, 3, 3, 1).unwrap();
        let hw = HwModel::new(144, 288, 1).unwrap();
        let m = measure(
            &TileConfig::new(6, 6, 4, 16),
            &shape,
            &hw,
            &Algorithm::Direct,
        );
        assert_eq!(m.cost, f64::INFINITY);
        let m = measure(
            &TileConfig::new(4, 6, 4, 144),
            &shape,
            &hw,
            &Algorithm::Direct,
        );
        assert_eq!(m.cost, f64::INFINITY);
    }

    #[test]
    fn training_needs_finite_rows() {
        let shape = ConvShape::from_output(4, 4, 4, 1, 1, 1, 1).unwrap();
        let hw = HwModel::new(64, 128, 1).unwrap();
        let space = ConfigSpace::build(&shape, &hw, Algorithm::Direct).unwrap();
        let t = TileConfig::new(2, 2, 2, 64);
        let inf = Measurement {
            config: t,
            cost: f64::INFINITY,
            iteration: 0,
        };
        assert!(matches!(
            train(&space, &[inf, inf], BoostParams::default()),
            Err(Error::Training(_))
        ));
        let fin = Measurement { cost: 42.0, ..inf };
        let m = train(&space, &[fin, fin, inf], BoostParams::default()).unwrap();
        assert!((m.predict(&t) - 42.0).abs() <= 42.0e-6);
        assert!((m.predict(&TileConfig::new(4, 4, 4, 64)) - 42.0).abs() <= 42.0e-6);
    }
}
