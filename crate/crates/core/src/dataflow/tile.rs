//! Output sub-block tiles and the choice of a near-optimal one.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Algorithm, ConvShape, HwModel, WinogradParams};
use crate::surd::{q, Q};

/// Memory layout of the input image. Only recorded; it does not change the
/// number of words moved.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Layout {
    Chw,
    Cwh,
    Hwc,
}

impl Layout {
    pub const ALL: [Layout; 3] = [Layout::Chw, Layout::Cwh, Layout::Hwc];

    pub fn name(&self) -> &'static str {
        match self {
            Layout::Chw => "CHW",
            Layout::Cwh => "CWH",
            Layout::Hwc => "HWC",
        }
    }

    pub fn index(&self) -> usize {
        *self as usize
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Layout {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Layout::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Geometry(format!("unknown layout {s:?}")))
    }
}

/// An `x × y × z` output sub-block with its per-block memory share and
/// thread split.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TileConfig {
    pub x: u32,
    pub y: u32,
    pub z: u32,
    pub s_b: u64,
    pub n_xt: u32,
    pub n_yt: u32,
    pub n_zt: u32,
    pub layout: Layout,
    /// Winograd output tile edge; `None` for direct convolution.
    pub e: Option<u32>,
}

impl TileConfig {
    /// Single-threaded CHW tile.
    pub fn new(x: u32, y: u32, z: u32, s_b: u64) -> Self {
        TileConfig {
            x,
            y,
            z,
            s_b,
            n_xt: 1,
            n_yt: 1,
            n_zt: 1,
            layout: Layout::Chw,
            e: None,
        }
    }

    pub fn winograd(x: u32, y: u32, z: u32, s_b: u64, e: u32) -> Self {
        TileConfig {
            e: Some(e),
            ..Self::new(x, y, z, s_b)
        }
    }

    pub fn volume(&self) -> u64 {
        self.x as u64 * self.y as u64 * self.z as u64
    }

    pub fn threads(&self) -> u64 {
        self.n_xt as u64 * self.n_yt as u64 * self.n_zt as u64
    }

    /// Words of fast memory the resident accumulators of one block need.
    pub fn accumulator_words(&self, alg: &Algorithm) -> u64 {
        match alg {
            Algorithm::Direct => self.volume(),
            Algorithm::Winograd(p) => {
                let (a, e) = (p.patch() as u64, p.e as u64);
                2 * a * a * (self.x as u64 / e) * (self.y as u64 / e) * self.z as u64
            }
        }
    }

    /// `|xy − R·z|`.
    pub fn imbalance(&self, reuse: Q) -> Q {
        let d = q(self.x as i128 * self.y as i128) - reuse * q(self.z as i128);
        if d < q(0) {
            -d
        } else {
            d
        }
    }

    /// Structural checks: divisibility of tiles and threads and, for
    /// Winograd, alignment to the output tile edge.
    pub fn check(&self, shape: &ConvShape, alg: &Algorithm) -> Result<()> {
        if self.x == 0 || self.y == 0 || self.z == 0 || self.s_b == 0 {
            return Err(Error::Geometry(format!("empty tile {self}")));
        }
        let (w, h) = extents(shape, alg);
        if w % self.x != 0 || h % self.y != 0 || !shape.c_out().is_multiple_of(self.z) {
            return Err(Error::Geometry(format!(
                "tile {}x{}x{} does not divide output {}x{}x{}",
                self.x,
                self.y,
                self.z,
                w,
                h,
                shape.c_out()
            )));
        }
        if self.n_xt == 0
            || self.n_yt == 0
            || self.n_zt == 0
            || !self.x.is_multiple_of(self.n_xt)
            || !self.y.is_multiple_of(self.n_yt)
            || !self.z.is_multiple_of(self.n_zt)
        {
            return Err(Error::Geometry(format!(
                "threads {}x{}x{} do not divide tile {}x{}x{}",
                self.n_xt, self.n_yt, self.n_zt, self.x, self.y, self.z
            )));
        }
        match alg {
            Algorithm::Direct => {
                if self.e.is_some() {
                    return Err(Error::Geometry(
                        "direct tile carries a Winograd edge".into(),
                    ));
                }
            }
            Algorithm::Winograd(p) => {
                p.check_shape(shape)?;
                if self.e != Some(p.e) {
                    return Err(Error::Geometry(format!(
                        "tile edge {:?} does not match Winograd e={}",
                        self.e, p.e
                    )));
                }
                if !self.x.is_multiple_of(p.e) || !self.y.is_multiple_of(p.e) {
                    return Err(Error::Geometry(format!(
                        "tile {}x{} is not a multiple of e={}",
                        self.x, self.y, p.e
                    )));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for TileConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}x{}x{} s_b={} threads={}x{}x{} {}",
            self.x, self.y, self.z, self.s_b, self.n_xt, self.n_yt, self.n_zt, self.layout
        )?;
        if let Some(e) = self.e {
            write!(f, " e={e}")?;
        }
        Ok(())
    }
}

/// Output extents a tile must divide: the output image for direct
/// convolution, the output padded up to whole `e × e` tiles for Winograd.
pub fn extents(shape: &ConvShape, alg: &Algorithm) -> (u32, u32) {
    match alg {
        Algorithm::Direct => (shape.w_out(), shape.h_out()),
        Algorithm::Winograd(p) => {
            let (tw, th) = p.tiles(shape);
            (tw * p.e, th * p.e)
        }
    }
}

pub fn divisors(n: u32) -> Vec<u32> {
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut d = 1;
    while d * d <= n {
        if n.is_multiple_of(d) {
            small.push(d);
            if d * d != n {
                large.push(n / d);
            }
        }
        d += 1;
    }
    small.extend(large.into_iter().rev());
    small
}

/// Candidate `(x, y)` values along one axis for an algorithm.
pub fn axis_candidates(extent: u32, alg: &Algorithm) -> Vec<u32> {
    let step = match alg {
        Algorithm::Direct => 1,
        Algorithm::Winograd(p) => p.e,
    };
    divisors(extent)
        .into_iter()
        .filter(|d| d % step == 0)
        .collect()
}

/// Input words read by one block stage of direct convolution: one
/// `x′ × y′` tile with `x′ = μ(x − 1) + w_ker`.
pub fn dc_input_tile(shape: &ConvShape, x: u32, y: u32) -> u64 {
    let mu = shape.stride() as u64;
    let xp = mu * (x as u64 - 1) + shape.w_ker() as u64;
    let yp = mu * (y as u64 - 1) + shape.h_ker() as u64;
    xp * yp
}

/// Words read by the direct-convolution schedule with this tile.
pub fn dc_reading(shape: &ConvShape, tile: &TileConfig) -> u64 {
    let blocks = (shape.w_out() / tile.x) as u64
        * (shape.h_out() / tile.y) as u64
        * (shape.c_out() / tile.z) as u64
        * shape.batch() as u64;
    let per_stage = dc_input_tile(shape, tile.x, tile.y) + shape.kernel_area() * tile.z as u64;
    blocks * shape.c_in() as u64 * per_stage
}

/// Words read by the Winograd schedule with this tile.
pub fn wa_reading(
    shape: &ConvShape,
    p: &WinogradParams,
    tile: &TileConfig,
    shared_kernel: bool,
) -> u64 {
    let (w, h) = extents(shape, &Algorithm::Winograd(*p));
    let blocks = (w / tile.x) as u64
        * (h / tile.y) as u64
        * (shape.c_out() / tile.z) as u64
        * shape.batch() as u64;
    let tiles = (tile.x / p.e) as u64 * (tile.y / p.e) as u64;
    let a2 = (p.patch() as u64).pow(2);
    let weights = tile.z as u64 * (p.r as u64).pow(2);
    let per_stage = tiles * a2
        + if shared_kernel {
            weights
        } else {
            tiles * weights
        };
    blocks * shape.c_in() as u64 * per_stage
}

fn select(
    shape: &ConvShape,
    alg: &Algorithm,
    budget: u64,
    reading: impl Fn(&TileConfig) -> u64,
) -> Result<TileConfig> {
    let (w, h) = extents(shape, alg);
    let xs = axis_candidates(w, alg);
    let ys = axis_candidates(h, alg);
    let zs = divisors(shape.c_out());
    let reuse = alg.reuse(shape);
    let e = match alg {
        Algorithm::Direct => None,
        Algorithm::Winograd(p) => Some(p.e),
    };
    let mut best: Option<(u64, Q, TileConfig)> = None;
    for &x in &xs {
        for &y in &ys {
            for &z in &zs {
                let tile = TileConfig {
                    e,
                    ..TileConfig::new(x, y, z, budget)
                };
                if tile.accumulator_words(alg) > budget {
                    continue;
                }
                let key = (reading(&tile), tile.imbalance(reuse));
                let better = match &best {
                    None => true,
                    Some((r, imb, b)) => match key.0.cmp(r).then(key.1.cmp(imb)) {
                        Ordering::Less => true,
                        Ordering::Greater => false,
                        Ordering::Equal => {
                            b.volume()
                                .cmp(&tile.volume())
                                .then((x, y, z).cmp(&(b.x, b.y, b.z)))
                                == Ordering::Less
                        }
                    },
                };
                if better {
                    best = Some((key.0, key.1, tile));
                }
            }
        }
    }
    best.map(|(_, _, t)| t).ok_or_else(|| {
        Error::Infeasible(format!(
            "no tile fits {budget} words per processor: x in {xs:?}, y in {ys:?}, z in {zs:?}"
        ))
    })
}

/// Feasible direct-convolution tile with the least read volume under
/// `xyz ≤ s/n_p`; ties go to the smaller `|xy − Rz|`, then the larger
/// `xyz`, then the lexicographically smaller `(x, y, z)`.
pub fn optimal_tile_dc(shape: &ConvShape, hw: &HwModel) -> Result<TileConfig> {
    select(shape, &Algorithm::Direct, hw.per_processor(), |t| {
        dc_reading(shape, t)
    })
}

/// Feasible Winograd tile with the least read volume under
/// `2(e+r−1)²/e²·xyz ≤ s/n_p`, counting each transformed kernel once per
/// sub-block. Ties are broken as in [`optimal_tile_dc`].
pub fn optimal_tile_wa(shape: &ConvShape, p: &WinogradParams, hw: &HwModel) -> Result<TileConfig> {
    p.check_shape(shape)?;
    select(shape, &Algorithm::Winograd(*p), hw.per_processor(), |t| {
        wa_reading(shape, p, t, true)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn divisors_are_sorted() {
        assert_eq!(divisors(12), vec![1, 2, 3, 4, 6, 12]);
        assert_eq!(divisors(1), vec![1]);
        assert_eq!(divisors(16), vec![1, 2, 4, 8, 16]);
    }

    #[test]
    fn balanced_direct_tile() {
        let shape = ConvShape::from_output(6, 6, 4, 2, 3, 3, 1).unwrap();
        let hw = HwModel::new(144, 288, 1).unwrap();
        let t = optimal_tile_dc(&shape, &hw).unwrap();
        assert_eq!((t.x, t.y, t.z), (6, 6, 4));
        let unit = ConvShape::from_output(1, 1, 1, 1, 1, 1, 1).unwrap();
        let t = optimal_tile_dc(&unit, &hw).unwrap();
        assert_eq!((t.x, t.y, t.z), (1, 1, 1));
    }

    #[test]
    fn winograd_tile_example() {
        let shape = ConvShape::from_output(4, 4, 2, 1, 3, 3, 1).unwrap();
        let p = WinogradParams::new(2, 3).unwrap();
        let hw = HwModel::new(512, 1024, 1).unwrap();
        let t = optimal_tile_wa(&shape, &p, &hw).unwrap();
        assert_eq!((t.x, t.y, t.z, t.e), (4, 4, 2, Some(2)));
        let tiny = ConvShape::from_output(1, 1, 1, 1, 3, 3, 1).unwrap();
        let t = optimal_tile_wa(&tiny, &p, &hw).unwrap();
        assert_eq!((t.x, t.y, t.z), (2, 2, 1));
    }

    #[test]
    fn no_budget_is_infeasible() {
        let shape = ConvShape::from_output(4, 4, 2, 1, 3, 3, 1).unwrap();
        let p = WinogradParams::new(2, 3).unwrap();
        let hw = HwModel::new(16, 1024, 1).unwrap();
        assert!(optimal_tile_wa(&shape, &p, &hw)
            .unwrap_err()
            .is_infeasible());
    }

    #[test]
    fn checks_reject_ragged_tiles() {
        let shape = ConvShape::from_output(6, 6, 4, 2, 3, 3, 1).unwrap();
        assert!(TileConfig::new(4, 6, 4, 999)
            .check(&shape, &Algorithm::Direct)
            .is_err());
        let mut t = TileConfig::new(6, 6, 4, 999);
        t.n_xt = 4;
        assert!(t.check(&shape, &Algorithm::Direct).is_err());
        t.n_xt = 3;
        assert!(t.check(&shape, &Algorithm::Direct).is_ok());
        let p = WinogradParams::new(2, 3).unwrap();
        let alg = Algorithm::Winograd(p);
        assert!(TileConfig::winograd(3, 6, 4, 999, 2)
            .check(&shape, &alg)
            .is_err());
        assert!(TileConfig::winograd(6, 6, 4, 999, 2)
            .check(&shape, &alg)
            .is_ok());
    }

    #[test]
    fn layout_round_trips() {
        for l in Layout::ALL {
            assert_eq!(l.name().parse::<Layout>().unwrap(), l);
        }
    }
}
