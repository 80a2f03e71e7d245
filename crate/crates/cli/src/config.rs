//! Run configuration: a TOML file with `[problem]`, `[hardware]`,
//! `[tuner]` and `[output]` sections, overridden field by field by flags.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use convio::{Algorithm, ConvShape, HwModel, WinogradParams};
use serde::{Deserialize, Serialize};

/// A caller mistake: missing or malformed flags or files.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AlgName {
    Direct,
    Winograd,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct Problem {
    #[arg(long, value_enum)]
    pub alg: Option<AlgName>,
    /// Winograd output tile edge.
    #[arg(long)]
    pub e: Option<u32>,
    #[arg(long)]
    pub cin: Option<u32>,
    /// Output extent as WxHxC.
    #[arg(long)]
    pub out: Option<String>,
    /// Kernel extent as WxH.
    #[arg(long)]
    pub ker: Option<String>,
    #[arg(long)]
    pub stride: Option<u32>,
    #[arg(long)]
    pub batch: Option<u32>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct Hardware {
    /// Fast-memory words.
    #[arg(long)]
    pub s: Option<u64>,
    /// Shared memory of one SM in words [default: 2·s].
    #[arg(long = "s-sm")]
    pub s_sm: Option<u64>,
    /// Active processors.
    #[arg(long)]
    pub np: Option<u32>,
    /// Cost per arithmetic op.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Cost per word moved.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Thread quantization width.
    #[arg(long)]
    pub warp: Option<u32>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct Tuner {
    /// Parallel walks per iteration.
    #[arg(long)]
    pub ns: Option<usize>,
    /// Measurements to spend.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Iterations without improvement before stopping.
    #[arg(long)]
    pub patience: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct Output {
    /// Also write the JSON report here.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// CSV trace (simulate) or tuning history (tune).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Best configuration JSON (tune).
    #[arg(long)]
    pub best: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub problem: Problem,
    pub hardware: Hardware,
    pub tuner: Tuner,
    pub output: Output,
}

macro_rules! overlay {
    ($flags:expr, $file:expr; $($f:ident),*) => {
        $( if $flags.$f.is_some() { $file.$f = $flags.$f.clone(); } )*
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        toml::from_str(text).map_err(|e| usage(format!("bad config: {e}")))
    }

    /// Canonical TOML text.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Apply flag values on top of this configuration.
    pub fn overlay(&mut self, seed: Option<u64>, p: &Problem, h: &Hardware, t: &Tuner, o: &Output) {
        if seed.is_some() {
            self.seed = seed;
        }
        overlay!(p, self.problem; alg, e, cin, out, ker, stride, batch);
        overlay!(h, self.hardware; s, s_sm, np, alpha, beta, warp);
        overlay!(t, self.tuner; ns, budget, patience);
        overlay!(o, self.output; json, csv, best);
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn shape(&self) -> anyhow::Result<ConvShape> {
        let p = &self.problem;
        let out = p
            .out
            .as_deref()
            .ok_or_else(|| usage("missing --out WxHxC"))?;
        let ker = p.ker.as_deref().ok_or_else(|| usage("missing --ker WxH"))?;
        let cin = p.cin.ok_or_else(|| usage("missing --cin"))?;
        let o = parse_dims::<3>(out, "--out")?;
        let k = parse_dims::<2>(ker, "--ker")?;
        let shape =
            ConvShape::from_output(o[0], o[1], o[2], cin, k[0], k[1], p.stride.unwrap_or(1))?;
        Ok(shape.with_batch(p.batch.unwrap_or(1))?)
    }

    pub fn algorithm(&self, shape: &ConvShape) -> anyhow::Result<Algorithm> {
        match self.problem.alg.unwrap_or(AlgName::Direct) {
            AlgName::Direct => Ok(Algorithm::Direct),
            AlgName::Winograd => {
                let e = self.problem.e.ok_or_else(|| usage("winograd needs --e"))?;
                if shape.w_ker() != shape.h_ker() {
                    return Err(usage("winograd needs a square kernel"));
                }
                let p = WinogradParams::new(e, shape.w_ker())?;
                p.check_shape(shape)?;
                Ok(Algorithm::Winograd(p))
            }
        }
    }

    pub fn hw(&self) -> anyhow::Result<HwModel> {
        let h = &self.hardware;
        let s = h.s.ok_or_else(|| usage("missing --s"))?;
        let mut hw = HwModel::new(s, h.s_sm.unwrap_or(2 * s), h.np.unwrap_or(1))?
            .with_warp_width(h.warp.unwrap_or(1))?;
        if h.alpha.is_some() || h.beta.is_some() {
            hw = hw.with_costs(h.alpha.unwrap_or(hw.alpha), h.beta.unwrap_or(hw.beta))?;
        }
        Ok(hw)
    }
}

/// `AxBxC` into `N` positive integers.
pub fn parse_dims<const N: usize>(s: &str, flag: &str) -> anyhow::Result<[u32; N]> {
    let parts: Vec<&str> = s.split(['x', 'X']).collect();
    let bad = || {
        usage(format!(
            "{flag} expects {N} positive integers joined by 'x', got {s:?}"
        ))
    };
    if parts.len() != N {
        return Err(bad());
    }
    let mut out = [0; N];
    for (slot, p) in out.iter_mut().zip(parts) {
        *slot = p.trim().parse().map_err(|_| bad())?;
        if *slot == 0 {
            return Err(bad());
        }
    }
    Ok(out)
}
