//! Maximum vertex-generation functions `φ_j`, `ψ_j` of direct and Winograd
//! convolution, evaluated exactly.

use serde::Serialize;

use crate::surd::{q, Surd, Q};

/// Per-step vertex-generation bounds of one algorithm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "algorithm", rename_all = "lowercase")]
pub enum PhiPsiProfile {
    Direct {
        reuse: Q,
    },
    Winograd {
        e: u32,
        r: u32,
        /// Use `e²h − 1` for the first term of `φ_4` instead of `(2h − 1)e²`.
        output_step_variant: bool,
    },
}

fn clamp(x: Surd) -> Surd {
    x.max(Surd::zero())
}

fn sqrt_rational(h: &Surd) -> Surd {
    h.sqrt()
        .expect("vertex-generation argument under a square root must be rational")
}

impl PhiPsiProfile {
    pub fn direct(reuse: Q) -> Self {
        PhiPsiProfile::Direct { reuse }
    }

    pub fn winograd(e: u32, r: u32) -> Self {
        PhiPsiProfile::Winograd {
            e,
            r,
            output_step_variant: false,
        }
    }

    pub fn n_steps(&self) -> usize {
        match self {
            PhiPsiProfile::Direct { .. } => 2,
            PhiPsiProfile::Winograd { .. } => 4,
        }
    }

    /// `(φ_j(h), ψ_j(h))` for fast-memory size `s`, both clamped at zero.
    pub fn phi_psi(&self, step: usize, h: &Surd, s: u64) -> (Surd, Surd) {
        assert!(
            step >= 1 && step <= self.n_steps(),
            "step {step} out of range"
        );
        if h.signum() <= 0 {
            return (Surd::zero(), Surd::zero());
        }
        let s = Surd::int(s as i128);
        let (phi, psi) = match *self {
            PhiPsiProfile::Direct { reuse } => match step {
                1 => {
                    let v = s.scale(q(2)) * sqrt_rational(&h.scale(reuse));
                    (v, v)
                }
                _ => (*h - Surd::int(1), Surd::zero()),
            },
            PhiPsiProfile::Winograd {
                e,
                r,
                output_step_variant,
            } => {
                let a = (e + r - 1) as i128;
                let (e, r) = (e as i128, r as i128);
                let a2 = a * a;
                match step {
                    1 => (
                        h.scale(Q::new(6 * a2 * a2, e * r)),
                        h.scale(Q::new(3 * a2, e * r)),
                    ),
                    2 => {
                        let root = sqrt_rational(h);
                        let v = *h * root + (s * root).scale(Q::new(a2, e * e));
                        (v, v)
                    }
                    3 => (
                        *h - Surd::int(1),
                        h.scale(Q::new(1, 2)).min(s.scale(Q::new(a2, e * e))),
                    ),
                    _ => {
                        let first = if output_step_variant {
                            h.scale(q(e * e)) - Surd::int(1)
                        } else {
                            (h.scale(q(2)) - Surd::int(1)).scale(q(e * e))
                        };
                        (first.min(s.scale(q(2 * a2 - 1))), Surd::zero())
                    }
                }
            }
        };
        (clamp(phi), clamp(psi))
    }
}

/// `(φ_j(k), ψ_j(k))` of direct convolution.
pub fn phi_psi_dc(step: usize, k: u64, s: u64, reuse: Q) -> (Surd, Surd) {
    PhiPsiProfile::direct(reuse).phi_psi(step, &Surd::int(k as i128), s)
}

/// `(φ_j(k), ψ_j(k))` of Winograd `F(e×e, r×r)`.
pub fn phi_psi_wa(step: usize, k: u64, s: u64, e: u32, r: u32) -> (Surd, Surd) {
    PhiPsiProfile::winograd(e, r).phi_psi(step, &Surd::int(k as i128), s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surd::q_frac;
    use proptest::prelude::*;

    #[test]
    fn direct_examples() {
        assert_eq!(phi_psi_dc(1, 0, 4, q(1)), (Surd::zero(), Surd::zero()));
        assert_eq!(phi_psi_dc(1, 4, 4, q(1)).0, Surd::int(16));
        assert_eq!(phi_psi_dc(2, 5, 4, q(1)), (Surd::int(4), Surd::zero()));
    }

    #[test]
    fn winograd_examples() {
        assert_eq!(phi_psi_wa(3, 0, 4, 2, 3), (Surd::zero(), Surd::zero()));
        assert_eq!(phi_psi_wa(1, 1, 4, 2, 3), (Surd::int(256), Surd::int(8)));
        assert_eq!(phi_psi_wa(4, 1, 10, 2, 3).0, Surd::int(4));
        let variant = PhiPsiProfile::Winograd {
            e: 2,
            r: 3,
            output_step_variant: true,
        };
        assert_eq!(variant.phi_psi(4, &Surd::int(1), 10).0, Surd::int(3));
        // φ2(4) = 4·2 + 16·s·2/4 with s = 1
        assert_eq!(phi_psi_wa(2, 4, 1, 2, 3).0, Surd::int(16));
        assert_eq!(phi_psi_wa(3, 3, 100, 2, 3).1, Surd::rational(q_frac(3, 2)));
    }

    proptest! {
        #[test]
        fn monotone_in_k(step in 1usize..=4, k in 0u64..200, s in 1u64..300,
                         e in 1u32..5, r in 1u32..5, reuse in 1i128..20) {
            let wa = PhiPsiProfile::winograd(e, r);
            let lo = wa.phi_psi(step, &Surd::int(k as i128), s);
            let hi = wa.phi_psi(step, &Surd::int(k as i128 + 1), s);
            prop_assert!(lo.0 <= hi.0 && lo.1 <= hi.1);
            let dc = PhiPsiProfile::direct(q(reuse));
            let st = 1 + step % 2;
            let lo = dc.phi_psi(st, &Surd::int(k as i128), s);
            let hi = dc.phi_psi(st, &Surd::int(k as i128 + 1), s);
            prop_assert!(lo.0 <= hi.0 && lo.1 <= hi.1);
        }
    }
}
