//! Closed-form I/O volumes of the two dataflows.

use serde::Serialize;

use super::tile::{dc_reading, wa_reading, TileConfig};
use crate::model::{Algorithm, ConvShape, HwModel, WinogradParams};
use crate::surd::{q, serialize_q, Surd, Q};

/// I/O volume of one tiling in three forms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct IoVolume {
    /// The estimate with `x′ ≈ μx` (direct) or `x′ ≈ x` and one weight load
    /// per sub-block (Winograd), reading plus stores.
    #[serde(serialize_with = "serialize_q")]
    pub estimate: Q,
    /// Reading with exact input-tile geometry plus stores; what the
    /// simulator counts.
    pub exact: u64,
    pub stores: u64,
    /// `2·|out|·…/√(·) + |out|` when the tile sits on the optimality
    /// condition and fills `s/n_p` exactly.
    pub optimal: Option<Surd>,
}

fn blocks(shape: &ConvShape, tile: &TileConfig) -> Q {
    Q::new(shape.outputs() as i128, tile.volume() as i128)
}

fn budget(hw: &HwModel) -> Q {
    Q::new(hw.s as i128, hw.n_p as i128)
}

/// `2·|out|·w_ker·h_ker·c_in / √(R·s/n_p) + |out|`.
pub fn optimal_dc_io(shape: &ConvShape, hw: &HwModel) -> Surd {
    let out = q(shape.outputs() as i128);
    let num = q(2) * out * q((shape.kernel_area() * shape.c_in() as u64) as i128);
    Surd::sqrt_q(&(shape.reuse_factor() * budget(hw)))
        .recip()
        .scale(num)
        + Surd::rational(out)
}

/// `2·|out|·c_in·r·(e+r−1) / (e·√(s/n_p)) + |out|`.
pub fn optimal_wa_io(shape: &ConvShape, p: &WinogradParams, hw: &HwModel) -> Surd {
    let out = q(shape.outputs() as i128);
    let num = q(2) * out * q((shape.c_in() * p.r * p.patch()) as i128) / q(p.e as i128);
    Surd::sqrt_q(&budget(hw)).recip().scale(num) + Surd::rational(out)
}

pub fn analytic_dc_io(shape: &ConvShape, hw: &HwModel, tile: &TileConfig) -> IoVolume {
    let out = shape.outputs();
    let reuse = shape.reuse_factor();
    let (x, y, z) = (q(tile.x as i128), q(tile.y as i128), q(tile.z as i128));
    let per_block = q((shape.kernel_area() * shape.c_in() as u64) as i128) * (z + x * y / reuse);
    let on_condition = x * y == reuse * z && q(tile.volume() as i128) == budget(hw);
    IoVolume {
        estimate: blocks(shape, tile) * per_block + q(out as i128),
        exact: dc_reading(shape, tile) + out,
        stores: out,
        optimal: on_condition.then(|| optimal_dc_io(shape, hw)),
    }
}

/// Winograd volumes; `exact` follows the schedule with the given kernel
/// sharing, `optimal` uses the `2(e+r−1)²/e²·xyz = s/n_p` memory split.
pub fn analytic_wa_io(
    shape: &ConvShape,
    p: &WinogradParams,
    hw: &HwModel,
    tile: &TileConfig,
    shared_kernel: bool,
) -> IoVolume {
    let out = shape.outputs();
    let c_in = q(shape.c_in() as i128);
    let r2 = q((p.r * p.r) as i128);
    let (x, y, z) = (q(tile.x as i128), q(tile.y as i128), q(tile.z as i128));
    let per_block = x * y * c_in + z * r2 * c_in;
    let on_condition = x * y == r2 * z
        && q(tile.accumulator_words(&Algorithm::Winograd(*p)) as i128) == budget(hw);
    IoVolume {
        estimate: blocks(shape, tile) * per_block + q(out as i128),
        exact: wa_reading(shape, p, tile, shared_kernel) + out,
        stores: out,
        optimal: on_condition.then(|| optimal_wa_io(shape, p, hw)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_optimal_example() {
        let shape = ConvShape::from_output(8, 8, 16, 32, 3, 3, 1).unwrap();
        let hw = HwModel::new(144, 288, 1).unwrap();
        assert_eq!(optimal_dc_io(&shape, &hw), Surd::int(17408));
        let hw2 = HwModel::new(144, 288, 2).unwrap();
        let read1 = optimal_dc_io(&shape, &hw) - Surd::int(1024);
        let read2 = optimal_dc_io(&shape, &hw2) - Surd::int(1024);
        assert_eq!(read2, read1 * Surd::sqrt_q(&q(2)));
    }

    #[test]
    fn whole_image_tile() {
        let shape = ConvShape::from_output(6, 4, 5, 3, 3, 3, 1).unwrap();
        let hw = HwModel::new(1000, 2000, 1).unwrap();
        let v = analytic_dc_io(&shape, &hw, &TileConfig::new(6, 4, 5, 1000));
        let reading = q(9 * 3) * (q(5) + q(24) / q(9));
        assert_eq!(v.estimate, reading + q(120));
        assert_eq!(v.exact, 3 * (8 * 6 + 9 * 5) + 120);
        assert_eq!(v.optimal, None);
    }

    #[test]
    fn direct_on_condition() {
        let shape = ConvShape::from_output(6, 6, 4, 2, 3, 3, 1).unwrap();
        let hw = HwModel::new(144, 288, 1).unwrap();
        let v = analytic_dc_io(&shape, &hw, &TileConfig::new(6, 6, 4, 144));
        assert_eq!(v.optimal, Some(optimal_dc_io(&shape, &hw)));
        assert_eq!(v.exact, 344);
        // x′ ≈ x: reading is 2·144·18/36
        assert_eq!(v.estimate, q(144 + 144));
    }

    #[test]
    fn winograd_example() {
        let shape = ConvShape::from_output(4, 4, 2, 8, 3, 3, 1).unwrap();
        let p = WinogradParams::new(2, 3).unwrap();
        let hw = HwModel::new(512, 1024, 1).unwrap();
        let t = TileConfig::winograd(4, 4, 2, 512, 2);
        let v = analytic_wa_io(&shape, &p, &hw, &t, false);
        assert_eq!(v.estimate, q(304));
        assert_eq!(v.exact, 8 * 4 * (16 + 18) + 32);
        assert_eq!(
            analytic_wa_io(&shape, &p, &hw, &t, true).exact,
            8 * (64 + 18) + 32
        );
        let whole = ConvShape::from_output(4, 4, 3, 5, 3, 3, 1).unwrap();
        let t = TileConfig::winograd(4, 4, 3, 512, 2);
        let v = analytic_wa_io(&whole, &p, &hw, &t, false);
        assert_eq!(v.estimate, q(5 * (16 + 3 * 9) + 48));
    }

    #[test]
    fn winograd_balanced_reading_identity() {
        let p = WinogradParams::new(2, 3).unwrap();
        let hw = HwModel::new(4096, 8192, 1).unwrap();
        for (x, y, z) in [(6u32, 6u32, 4u32), (6, 12, 8), (12, 12, 16), (3, 3, 1)] {
            let shape = ConvShape::from_output(x * 2, y * 2, z * 2, 3, 3, 3, 1).unwrap();
            let t = TileConfig::winograd(x, y, z, 4096, 2);
            let v = analytic_wa_io(&shape, &p, &hw, &t, false);
            let reading = crate::surd::q_to_f64(&(v.estimate - q(shape.outputs() as i128)));
            let want = 2.0 * shape.outputs() as f64 * 3.0 * 3.0 / ((x * y * z) as f64).sqrt();
            assert!((reading - want).abs() <= 1e-9 * want, "{x} {y} {z}");
        }
    }
}
