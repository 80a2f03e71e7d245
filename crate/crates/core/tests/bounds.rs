use convio::bounds::{
    exact_bound_for_dag, lower_bound_dc, lower_bound_wa, omega_dc, omega_wa, t_upper_dc,
    t_upper_generic, PhiPsiProfile,
};
use convio::dag::{validate_multi_step_partition, Dag, Origin, VertexKind};
use convio::pebble::{corpus, generated, min_io_pebbling, minimum_set};
use convio::surd::{q, q_frac};
use convio::{ConvShape, Surd, WinogradParams};

fn profile_of(dag: &Dag) -> Option<PhiPsiProfile> {
    match dag.origin() {
        Origin::Direct { reuse } => Some(PhiPsiProfile::direct(reuse)),
        Origin::Winograd { e, r } => Some(PhiPsiProfile::winograd(e, r)),
        Origin::Generic => None,
    }
}

fn subsets_up_to(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        f(cur);
        if cur.len() == k {
            return;
        }
        for v in start..n {
            cur.push(v);
            rec(v + 1, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::new(), f);
}

#[test]
fn direct_closed_form_matches_search() {
    for reuse in [1, 4, 9] {
        for s in 1..=64 {
            let t = t_upper_generic(&PhiPsiProfile::direct(q(reuse)), s);
            assert_eq!(t.value, t_upper_dc(s, q(reuse)), "R={reuse} s={s}");
            assert_eq!(t.maximizer, vec![s, 0], "R={reuse} s={s}");
        }
    }
}

#[test]
fn exact_bound_is_below_optimal_pebbling() {
    let mut checked = 0;
    for (name, dag) in corpus::load().unwrap() {
        if matches!(dag.origin(), Origin::Generic) {
            continue;
        }
        for s in 3..=5 {
            let Ok(io) = min_io_pebbling(&dag, s) else {
                continue;
            };
            let bound = exact_bound_for_dag(&dag, s as u64).unwrap();
            assert!(
                bound <= Surd::int(io as i128),
                "{name} s={s}: bound {bound} > {io}"
            );
            checked += 1;
        }
    }
    assert!(checked >= 30);
}

/// Every dominator set `D` of at most four vertices generates no more than
/// `φ_j(k)` vertices computed in step `j` and `ψ_j(k)` vertices of `Õ_j`,
/// where `k = |D ∩ U_j| + |Θ(D) ∩ Õ_{j−1}|` and `S` is the larger of `|D|`
/// and the minimum set of the generated subset. Only vertices computed in
/// step `j` count as generated there.
#[test]
fn vertex_generation_is_bounded_on_tiny_dags() {
    let mut checked = 0usize;
    for (name, dag) in corpus::load().unwrap() {
        let Some(profile) = profile_of(&dag) else {
            continue;
        };
        let parts = validate_multi_step_partition(&dag).unwrap();
        let n = parts.n_steps();
        let len = dag.len();
        let mut step_of = vec![0usize; len];
        for v in 0..len as u32 {
            step_of[v as usize] = dag.step(v) as usize;
        }
        let mut out_sets = vec![vec![false; len]; n + 1];
        for v in 0..len {
            if dag.kind(v as u32) == VertexKind::Input {
                out_sets[0][v] = true;
            }
        }
        for j in 1..=n {
            for &v in parts.outputs(j) {
                out_sets[j][v as usize] = true;
            }
        }
        subsets_up_to(len, 4, &mut |members| {
            if members.is_empty() {
                return;
            }
            let mut d = vec![false; len];
            for &v in members {
                d[v] = true;
            }
            let theta = generated(&dag, &d);
            let u: Vec<bool> = (0..len)
                .map(|v| theta[v] && dag.kind(v as u32) != VertexKind::Input)
                .collect();
            let m = minimum_set(&dag, &u).len();
            let s = members.len().max(m).max(1) as u64;
            for j in 1..=n {
                let k = members.iter().filter(|&&v| step_of[v] == j).count()
                    + (0..len).filter(|&v| theta[v] && out_sets[j - 1][v]).count();
                // pass-through vertices are step inputs, not generated here
                let fresh = |v: usize| theta[v] && !d[v] && step_of[v] == j;
                let body = (0..len).filter(|&v| fresh(v)).count();
                let outs = (0..len).filter(|&v| fresh(v) && out_sets[j][v]).count();
                let (phi, psi) = profile.phi_psi(j, &Surd::int(k as i128), s);
                assert!(
                    Surd::int(body as i128) <= phi,
                    "{name}: D={members:?} step {j} k={k} s={s} generates {body} > φ={phi}"
                );
                if j < n {
                    assert!(
                        Surd::int(outs as i128) <= psi,
                        "{name}: D={members:?} step {j} k={k} s={s} reaches {outs} outputs > ψ={psi}"
                    );
                }
                checked += 1;
            }
        });
    }
    assert!(checked > 1000, "only {checked} checks");
}

#[test]
fn omega_scales_with_memory_and_channels() {
    let shape = ConvShape::from_output(6, 6, 4, 3, 3, 3, 1).unwrap();
    let wide = ConvShape::from_output(6, 6, 8, 6, 3, 3, 1).unwrap();
    let p = WinogradParams::new(2, 3).unwrap();
    for s in [8u64, 50, 512] {
        let root2 = Surd::sqrt_q(&q(2));
        assert_eq!(omega_dc(&shape, s), omega_dc(&shape, 2 * s) * root2);
        assert_eq!(omega_wa(&shape, &p, s), omega_wa(&shape, &p, 2 * s) * root2);
        assert_eq!(omega_dc(&wide, s), omega_dc(&shape, s).scale(q(4)));
        assert_eq!(omega_wa(&wide, &p, s), omega_wa(&shape, &p, s).scale(q(4)));
    }
    let batched = shape.with_batch(3).unwrap();
    assert_eq!(omega_dc(&batched, 64), omega_dc(&shape, 64).scale(q(3)));
    let strided = ConvShape::new(9, 9, 2, 2, 3, 3, 2).unwrap();
    assert_eq!(strided.reuse_factor(), q_frac(9, 4));
}

#[test]
fn reports_cover_both_algorithms() {
    let shape = ConvShape::from_output(13, 13, 384, 256, 3, 3, 1).unwrap();
    let dc = lower_bound_dc(&shape, 1024).unwrap();
    let wa = lower_bound_wa(&shape, &WinogradParams::new(2, 3).unwrap(), 1024).unwrap();
    assert!(dc.q_lower.0.signum() > 0 && wa.q_lower.0.signum() > 0);
    assert_eq!(dc.maximizer, vec![2048, 0]);
    assert_eq!(wa.maximizer.len(), 4);
}
