//! `T(S)`: the most vertices a single subset of an S-partition can hold.

use serde::Serialize;

use super::profile::PhiPsiProfile;
use crate::surd::{q, Surd, Q};

/// Above this budget the simplex is searched locally instead of exhaustively.
pub const EXHAUSTIVE_BUDGET: u64 = 64;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TUpper {
    pub value: Surd,
    /// Budget split `k_1..k_n` attaining the value.
    pub maximizer: Vec<u64>,
    pub exhaustive: bool,
}

/// `Σ φ_j(k_j + ψ_{j−1}(…))` for one budget split, without the leading `S`.
pub fn nested_generation(profile: &PhiPsiProfile, ks: &[u64], s: u64) -> Surd {
    let mut carry = Surd::zero();
    let mut total = Surd::zero();
    for (j, &k) in ks.iter().enumerate() {
        let h = Surd::int(k as i128) + carry;
        let (phi, psi) = profile.phi_psi(j + 1, &h, s);
        total = total + phi;
        carry = psi;
    }
    total
}

struct Exhaustive<'a> {
    profile: &'a PhiPsiProfile,
    s: u64,
    ks: Vec<u64>,
    best: Option<(Surd, Vec<u64>)>,
}

impl Exhaustive<'_> {
    fn walk(&mut self, j: usize, left: u64, carry: Surd, acc: Surd) {
        let n = self.profile.n_steps();
        for k in 0..=left {
            let h = Surd::int(k as i128) + carry;
            let (phi, psi) = self.profile.phi_psi(j + 1, &h, self.s);
            let acc = acc + phi;
            self.ks[j] = k;
            if j + 1 == n {
                if self.best.as_ref().is_none_or(|(b, _)| acc > *b) {
                    self.best = Some((acc, self.ks.clone()));
                }
            } else {
                self.walk(j + 1, left - k, psi, acc);
            }
        }
    }
}

fn local_search(profile: &PhiPsiProfile, s: u64) -> (Surd, Vec<u64>) {
    let n = profile.n_steps();
    let eval = |ks: &[u64]| nested_generation(profile, ks, s);
    let mut starts = Vec::new();
    for j in 0..n {
        let mut ks = vec![0; n];
        ks[j] = s;
        starts.push(ks.clone());
        for i in (0..n).filter(|&i| i != j) {
            let mut nb = ks.clone();
            nb[j] -= 1.min(s);
            nb[i] += 1.min(s);
            starts.push(nb);
        }
    }
    let mut best: Option<(Surd, Vec<u64>)> = None;
    for start in starts {
        let mut cur = start;
        let mut val = eval(&cur);
        loop {
            let mut improved = false;
            let mut step = s.max(1).next_power_of_two();
            while step >= 1 {
                for from in 0..n {
                    for to in 0..n {
                        if from == to || cur[from] < step {
                            continue;
                        }
                        let mut cand = cur.clone();
                        cand[from] -= step;
                        cand[to] += step;
                        let v = eval(&cand);
                        if v > val {
                            cur = cand;
                            val = v;
                            improved = true;
                        }
                    }
                }
                step /= 2;
            }
            if !improved {
                break;
            }
        }
        if best.as_ref().is_none_or(|(b, _)| val > *b) {
            best = Some((val, cur));
        }
    }
    best.expect("at least one start")
}

/// `T(S) = S + max_{Σk_j ≤ S} Σ_j φ_j(k_j + ψ_{j−1}(…))`.
///
/// Exhaustive over the integer simplex when `s ≤ 64`. Larger budgets start
/// from every all-on-one-step corner and its unit neighbours, then hill-climb
/// with unit-to-full-budget transfers. Every φ_j and ψ_j is nondecreasing, so
/// the local search only visits splits that spend the whole budget.
pub fn t_upper_generic(profile: &PhiPsiProfile, s: u64) -> TUpper {
    let n = profile.n_steps();
    if s == 0 {
        return TUpper {
            value: Surd::zero(),
            maximizer: vec![0; n],
            exhaustive: true,
        };
    }
    let exhaustive = s <= EXHAUSTIVE_BUDGET;
    let (best, maximizer) = if exhaustive {
        let mut ex = Exhaustive {
            profile,
            s,
            ks: vec![0; n],
            best: None,
        };
        ex.walk(0, s, Surd::zero(), Surd::zero());
        ex.best.expect("nonempty simplex")
    } else {
        local_search(profile, s)
    };
    TUpper {
        value: Surd::int(s as i128) + best,
        maximizer,
        exhaustive,
    }
}

/// `4s·√(R·s) + s − 1` for direct convolution.
pub fn t_upper_dc(s: u64, reuse: Q) -> Surd {
    assert!(s >= 1, "t_upper_dc needs s >= 1");
    let s_q = q(s as i128);
    Surd::sqrt_q(&(reuse * s_q)).scale(q(4) * s_q) + Surd::rational(s_q - q(1))
}

/// `2a³/(er)·S√S + 6a²/(er)·S` with `a = e + r − 1` for Winograd convolution.
pub fn t_upper_wa(s: u64, e: u32, r: u32) -> Surd {
    assert!(s >= 1, "t_upper_wa needs s >= 1");
    let a = (e + r - 1) as i128;
    let er = (e * r) as i128;
    let s_q = q(s as i128);
    Surd::sqrt_q(&s_q).scale(Q::new(2 * a * a * a, er) * s_q)
        + Surd::rational(Q::new(6 * a * a, er) * s_q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surd::q_frac;
    use proptest::prelude::*;

    #[test]
    fn direct_examples() {
        assert_eq!(t_upper_dc(4, q(1)), Surd::int(35));
        assert_eq!(t_upper_dc(1, q(1)), Surd::int(4));
        assert_eq!(t_upper_dc(144, q(9)), Surd::int(20879));
        let t = t_upper_generic(&PhiPsiProfile::direct(q(1)), 4);
        assert_eq!(t.value, Surd::int(35));
        assert_eq!(t.maximizer, vec![4, 0]);
        // k1 = 1 gives 1 + 2 + (2 − 1)
        assert_eq!(
            t_upper_generic(&PhiPsiProfile::direct(q(1)), 1).value,
            Surd::int(4)
        );
    }

    #[test]
    fn winograd_examples() {
        assert_eq!(t_upper_wa(1, 2, 3), Surd::rational(q_frac(112, 3)));
        assert_eq!(t_upper_wa(4, 1, 1), Surd::int(40));
        assert_eq!(t_upper_wa(64, 2, 3), Surd::rational(q_frac(35840, 3)));
    }

    #[test]
    fn empty_budget() {
        for p in [PhiPsiProfile::direct(q(4)), PhiPsiProfile::winograd(2, 3)] {
            assert_eq!(t_upper_generic(&p, 0).value, Surd::zero());
        }
    }

    #[test]
    fn local_search_matches_exhaustive_near_threshold() {
        for p in [
            PhiPsiProfile::direct(q(1)),
            PhiPsiProfile::direct(q_frac(9, 4)),
            PhiPsiProfile::winograd(2, 3),
            PhiPsiProfile::winograd(1, 1),
        ] {
            for s in [1, 5, 17, 40] {
                let ex = t_upper_generic(&p, s);
                let (v, _) = local_search(&p, s);
                assert_eq!(Surd::int(s as i128) + v, ex.value, "{p:?} s={s}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn generic_is_monotone_in_s(s in 0u64..24, reuse in 1i128..10, e in 1u32..4, r in 1u32..4) {
            let dc = PhiPsiProfile::direct(q(reuse));
            prop_assert!(t_upper_generic(&dc, s).value <= t_upper_generic(&dc, s + 1).value);
            let wa = PhiPsiProfile::winograd(e, r);
            prop_assert!(t_upper_generic(&wa, s).value <= t_upper_generic(&wa, s + 1).value);
        }
    }
}
