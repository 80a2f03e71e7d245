//! Problem geometry, hardware model and the input reuse factor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::surd::Q;

/// Output extent of a valid-padding sliding window along one axis.
pub fn output_dim(dim_in: u32, dim_ker: u32, stride: u32) -> Result<u32> {
    if dim_in == 0 || dim_ker == 0 || stride == 0 {
        return Err(Error::Geometry(format!(
            "dimensions must be positive (input {dim_in}, kernel {dim_ker}, stride {stride})"
        )));
    }
    if dim_ker > dim_in {
        return Err(Error::Geometry(format!(
            "kernel extent {dim_ker} exceeds input extent {dim_in}"
        )));
    }
    Ok((dim_in - dim_ker) / stride + 1)
}

/// `(w_out, h_out)` for valid padding.
pub fn output_shape(
    w_in: u32,
    h_in: u32,
    w_ker: u32,
    h_ker: u32,
    stride: u32,
) -> Result<(u32, u32)> {
    Ok((
        output_dim(w_in, w_ker, stride)?,
        output_dim(h_in, h_ker, stride)?,
    ))
}

/// Geometry of one convolution layer (valid padding).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConvShape {
    w_in: u32,
    h_in: u32,
    c_in: u32,
    w_out: u32,
    h_out: u32,
    c_out: u32,
    w_ker: u32,
    h_ker: u32,
    stride: u32,
    batch: u32,
}

impl ConvShape {
    pub fn new(
        w_in: u32,
        h_in: u32,
        c_in: u32,
        c_out: u32,
        w_ker: u32,
        h_ker: u32,
        stride: u32,
    ) -> Result<Self> {
        let (w_out, h_out) = output_shape(w_in, h_in, w_ker, h_ker, stride)?;
        if c_in == 0 || c_out == 0 {
            return Err(Error::Geometry("channel counts must be positive".into()));
        }
        Ok(ConvShape {
            w_in,
            h_in,
            c_in,
            w_out,
            h_out,
            c_out,
            w_ker,
            h_ker,
            stride,
            batch: 1,
        })
    }

    /// Smallest input image producing the requested output extent.
    pub fn from_output(
        w_out: u32,
        h_out: u32,
        c_out: u32,
        c_in: u32,
        w_ker: u32,
        h_ker: u32,
        stride: u32,
    ) -> Result<Self> {
        if w_out == 0 || h_out == 0 || stride == 0 || w_ker == 0 || h_ker == 0 {
            return Err(Error::Geometry("dimensions must be positive".into()));
        }
        let w_in = (w_out - 1) * stride + w_ker;
        let h_in = (h_out - 1) * stride + h_ker;
        Self::new(w_in, h_in, c_in, c_out, w_ker, h_ker, stride)
    }

    pub fn with_batch(mut self, batch: u32) -> Result<Self> {
        if batch == 0 {
            return Err(Error::Geometry("batch must be positive".into()));
        }
        self.batch = batch;
        Ok(self)
    }

    pub fn w_in(&self) -> u32 {
        self.w_in
    }
    pub fn h_in(&self) -> u32 {
        self.h_in
    }
    pub fn c_in(&self) -> u32 {
        self.c_in
    }
    pub fn w_out(&self) -> u32 {
        self.w_out
    }
    pub fn h_out(&self) -> u32 {
        self.h_out
    }
    pub fn c_out(&self) -> u32 {
        self.c_out
    }
    pub fn w_ker(&self) -> u32 {
        self.w_ker
    }
    pub fn h_ker(&self) -> u32 {
        self.h_ker
    }
    pub fn stride(&self) -> u32 {
        self.stride
    }
    pub fn batch(&self) -> u32 {
        self.batch
    }

    /// `w_ker·h_ker`, the number of taps per channel.
    pub fn kernel_area(&self) -> u64 {
        self.w_ker as u64 * self.h_ker as u64
    }

    /// Output elements of one image.
    pub fn outputs_per_image(&self) -> u64 {
        self.w_out as u64 * self.h_out as u64 * self.c_out as u64
    }

    /// Output elements across the batch.
    pub fn outputs(&self) -> u64 {
        self.outputs_per_image() * self.batch as u64
    }

    /// Multiply-accumulate count of one image.
    pub fn macs_per_image(&self) -> u64 {
        self.outputs_per_image() * self.kernel_area() * self.c_in as u64
    }

    pub fn reuse_factor(&self) -> Q {
        reuse_factor(self)
    }
}

/// `R = w_ker·h_ker/μ²`, the most sliding windows any input element joins.
pub fn reuse_factor(shape: &ConvShape) -> Q {
    let mu = shape.stride as i128;
    Q::new(shape.kernel_area() as i128, mu * mu)
}

/// Parameters of a Winograd `F(e×e, r×r)` computation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WinogradParams {
    pub e: u32,
    pub r: u32,
}

impl WinogradParams {
    pub fn new(e: u32, r: u32) -> Result<Self> {
        if e == 0 || r == 0 {
            return Err(Error::Geometry("Winograd e and r must be positive".into()));
        }
        Ok(WinogradParams { e, r })
    }

    /// Input patch edge `e + r − 1`.
    pub fn patch(&self) -> u32 {
        self.e + self.r - 1
    }

    /// Whether `1/2 ≤ r/e ≤ 2`, the range the vertex-generation estimates assume.
    pub fn ratio_in_range(&self) -> bool {
        2 * self.r >= self.e && self.r <= 2 * self.e
    }

    /// Check compatibility with a shape: square kernel of edge `r`, unit stride.
    pub fn check_shape(&self, shape: &ConvShape) -> Result<()> {
        if shape.stride != 1 {
            return Err(Error::Unsupported(format!(
                "Winograd convolution requires unit stride, got {}",
                shape.stride
            )));
        }
        if shape.w_ker != self.r || shape.h_ker != self.r {
            return Err(Error::Geometry(format!(
                "Winograd r={} does not match kernel {}x{}",
                self.r, shape.w_ker, shape.h_ker
            )));
        }
        Ok(())
    }

    /// Output tiles per image along (w, h), padding up to a multiple of `e`.
    pub fn tiles(&self, shape: &ConvShape) -> (u32, u32) {
        (shape.w_out.div_ceil(self.e), shape.h_out.div_ceil(self.e))
    }
}

/// Two-level memory machine.
///
/// `s` is the fast-memory size in words, `s_sm` the shared memory of one
/// streaming multiprocessor, `n_p` the number of active processors. The
/// runtime proxy charges `alpha` per arithmetic op (spread over `n_p`
/// processors) and `beta` per word moved.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HwModel {
    pub s: u64,
    pub s_sm: u64,
    pub n_p: u32,
    pub alpha: f64,
    pub beta: f64,
    /// SIMD lane group width used to quantize thread counts in the compute
    /// term. `1` disables quantization.
    pub warp_width: u32,
}

impl HwModel {
    pub const DEFAULT_ALPHA: f64 = 1.0;
    pub const DEFAULT_BETA: f64 = 4.0;

    pub fn new(s: u64, s_sm: u64, n_p: u32) -> Result<Self> {
        if s < 3 {
            return Err(Error::Geometry(format!(
                "fast memory must hold at least 3 words, got {s}"
            )));
        }
        if s_sm == 0 || n_p == 0 {
            return Err(Error::Geometry(
                "shared memory size and processor count must be positive".into(),
            ));
        }
        Ok(HwModel {
            s,
            s_sm,
            n_p,
            alpha: Self::DEFAULT_ALPHA,
            beta: Self::DEFAULT_BETA,
            warp_width: 1,
        })
    }

    pub fn with_costs(mut self, alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha >= 0.0 && beta >= 0.0) {
            return Err(Error::Geometry(
                "cost coefficients must be nonnegative".into(),
            ));
        }
        self.alpha = alpha;
        self.beta = beta;
        Ok(self)
    }

    pub fn with_warp_width(mut self, warp_width: u32) -> Result<Self> {
        if warp_width == 0 {
            return Err(Error::Geometry("warp width must be positive".into()));
        }
        self.warp_width = warp_width;
        Ok(self)
    }

    /// Fast memory available to one processor, `⌊s/n_p⌋`.
    pub fn per_processor(&self) -> u64 {
        self.s / self.n_p as u64
    }
}

/// Convolution algorithm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Algorithm {
    Direct,
    Winograd(WinogradParams),
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Direct => "direct",
            Algorithm::Winograd(_) => "winograd",
        }
    }

    /// Reuse factor used by the optimality condition `xy = Rz`.
    pub fn reuse(&self, shape: &ConvShape) -> Q {
        match self {
            Algorithm::Direct => reuse_factor(shape),
            Algorithm::Winograd(p) => Q::from_integer(p.r as i128 * p.r as i128),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surd::{q, q_frac};
    use proptest::prelude::*;

    fn shape(wk: u32, hk: u32, mu: u32) -> ConvShape {
        ConvShape::new(64, 64, 1, 1, wk, hk, mu).unwrap()
    }

    #[test]
    fn reuse_examples() {
        assert_eq!(reuse_factor(&shape(3, 3, 1)), q(9));
        assert_eq!(reuse_factor(&shape(1, 1, 1)), q(1));
        let r = reuse_factor(&shape(11, 11, 4));
        assert_eq!(r, q_frac(121, 16));
        assert_eq!(crate::surd::q_to_f64(&r), 7.5625);
    }

    #[test]
    fn output_shape_examples() {
        assert_eq!(output_shape(8, 8, 3, 3, 1).unwrap(), (6, 6));
        assert_eq!(output_shape(227, 227, 11, 11, 4).unwrap(), (55, 55));
        assert_eq!(output_shape(3, 3, 3, 3, 1).unwrap(), (1, 1));
    }

    #[test]
    fn kernel_larger_than_input_is_rejected() {
        assert!(matches!(
            output_shape(2, 8, 3, 3, 1),
            Err(Error::Geometry(_))
        ));
        assert!(ConvShape::new(8, 8, 0, 1, 3, 3, 1).is_err());
    }

    #[test]
    fn from_output_inverts_geometry() {
        let s = ConvShape::from_output(13, 13, 384, 256, 3, 3, 1).unwrap();
        assert_eq!((s.w_in(), s.h_in()), (15, 15));
        assert_eq!((s.w_out(), s.h_out()), (13, 13));
    }

    #[test]
    fn hw_requires_three_words() {
        assert!(HwModel::new(2, 64, 1).is_err());
        assert!(HwModel::new(3, 64, 1).is_ok());
    }

    #[test]
    fn winograd_ratio_window() {
        assert!(WinogradParams::new(2, 3).unwrap().ratio_in_range());
        assert!(WinogradParams::new(2, 1).unwrap().ratio_in_range());
        assert!(!WinogradParams::new(1, 3).unwrap().ratio_in_range());
    }

    proptest! {
        #[test]
        fn reuse_symmetric_in_kernel_axes(wk in 1u32..12, hk in 1u32..12, mu in 1u32..5) {
            prop_assert_eq!(reuse_factor(&shape(wk, hk, mu)), reuse_factor(&shape(hk, wk, mu)));
            prop_assert_eq!(reuse_factor(&shape(wk, hk, 1)), q((wk * hk) as i128));
        }

        #[test]
        fn output_shape_monotone(w in 12u32..40, k in 1u32..12, mu in 1u32..4) {
            let base = output_dim(w, k, mu).unwrap();
            prop_assert!(output_dim(w + 1, k, mu).unwrap() >= base);
            prop_assert!(output_dim(w, k + 1, mu).unwrap() <= base);
            prop_assert!(output_dim(w, k, mu + 1).unwrap() <= base);
        }
    }
}
