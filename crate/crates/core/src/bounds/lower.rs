//! I/O lower bounds for direct and Winograd convolution.

use serde::Serialize;

use super::profile::PhiPsiProfile;
use super::tupper::{t_upper_dc, t_upper_generic, t_upper_wa};
use crate::dag::{direct_vertex_count, winograd_vertex_count, Dag, Origin, VertexKind};
use crate::error::{Error, Result};
use crate::model::{ConvShape, WinogradParams};
use crate::surd::{q, Surd, Q};

/// An exact bound value with its floating-point rendering.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Exact(pub Surd);

impl Serialize for Exact {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = ser.serialize_struct("Exact", 2)?;
        st.serialize_field("exact", &self.0.to_string())?;
        st.serialize_field("value", &self.0.to_f64())?;
        st.end()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub algorithm: String,
    pub s: u64,
    /// Internal plus output vertices.
    pub vertices: u64,
    /// Closed-form `T(2S)`.
    pub t_2s: Exact,
    /// `T(2S)` from searching the vertex-generation profile.
    pub t_2s_search: Exact,
    /// Budget split `k_1..k_n` attaining `t_2s_search`.
    pub maximizer: Vec<u64>,
    /// `S·(|V|/T(2S) − 1)`, before clamping.
    pub q_lower_raw: Exact,
    /// `max(q_lower_raw, 0)`.
    pub q_lower: Exact,
    /// Leading-order Ω expression.
    pub omega: Exact,
}

impl BoundReport {
    /// Smallest integer I/O count consistent with the bound.
    pub fn q_lower_ceil(&self) -> u64 {
        let v = self.q_lower.0;
        let f = v.floor();
        (if Surd::int(f) == v { f } else { f + 1 }) as u64
    }
}

/// `S·(|V|/T − 1)` clamped at zero, as `(raw, clamped)`.
pub fn pebbling_bound(vertices: u64, t_2s: Surd, s: u64) -> (Surd, Surd) {
    let ratio = Surd::int(vertices as i128) * t_2s.recip();
    let raw = (ratio - Surd::int(1)).scale(q(s as i128));
    (raw, raw.max(Surd::zero()))
}

fn report(
    algorithm: &str,
    profile: PhiPsiProfile,
    vertices: u64,
    t_2s: Surd,
    omega: Surd,
    s: u64,
) -> BoundReport {
    let search = t_upper_generic(&profile, 2 * s);
    let (raw, clamped) = pebbling_bound(vertices, t_2s, s);
    BoundReport {
        algorithm: algorithm.into(),
        s,
        vertices,
        t_2s: Exact(t_2s),
        t_2s_search: Exact(search.value),
        maximizer: search.maximizer,
        q_lower_raw: Exact(raw),
        q_lower: Exact(clamped),
        omega: Exact(omega),
    }
}

/// `w_ker·h_ker·c_in·|outputs| / (4√(2RS))`.
pub fn omega_dc(shape: &ConvShape, s: u64) -> Surd {
    let num = q((shape.kernel_area() * shape.c_in() as u64 * shape.outputs()) as i128);
    let root = Surd::sqrt_q(&(q(2) * shape.reuse_factor() * q(s as i128)));
    root.recip().scale(num / q(4))
}

/// `|outputs|·c_in·(e + r − 1)·r / (e√S)`.
pub fn omega_wa(shape: &ConvShape, p: &WinogradParams, s: u64) -> Surd {
    let num = (shape.outputs() * shape.c_in() as u64 * p.patch() as u64 * p.r as u64) as i128;
    Surd::sqrt_q(&q(s as i128))
        .recip()
        .scale(Q::new(num, p.e as i128))
}

pub fn lower_bound_dc(shape: &ConvShape, s: u64) -> Result<BoundReport> {
    check_s(s)?;
    let reuse = shape.reuse_factor();
    Ok(report(
        "direct",
        PhiPsiProfile::direct(reuse),
        direct_vertex_count(shape),
        t_upper_dc(2 * s, reuse),
        omega_dc(shape, s),
        s,
    ))
}

pub fn lower_bound_wa(shape: &ConvShape, p: &WinogradParams, s: u64) -> Result<BoundReport> {
    check_s(s)?;
    p.check_shape(shape)?;
    Ok(report(
        "winograd",
        PhiPsiProfile::winograd(p.e, p.r),
        winograd_vertex_count(shape, p),
        t_upper_wa(2 * s, p.e, p.r),
        omega_wa(shape, p, s),
        s,
    ))
}

fn check_s(s: u64) -> Result<()> {
    if s == 0 {
        return Err(Error::Geometry(
            "fast memory size s must be at least 1".into(),
        ));
    }
    Ok(())
}

/// Exact bound `S·(|V|/T(2S) − 1)` for a DAG built by this crate, with `|V|`
/// counted on the DAG itself.
pub fn exact_bound_for_dag(dag: &Dag, s: u64) -> Result<Surd> {
    check_s(s)?;
    let t = match dag.origin() {
        Origin::Direct { reuse } => t_upper_dc(2 * s, reuse),
        Origin::Winograd { e, r } => t_upper_wa(2 * s, e, r),
        Origin::Generic => {
            return Err(Error::Unsupported(
                "no vertex-generation profile for a generic DAG".into(),
            ))
        }
    };
    let v = dag.count_vertices(&[VertexKind::Internal, VertexKind::Output]);
    Ok(pebbling_bound(v, t, s).1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1.0)
    }

    #[test]
    fn direct_omega_examples() {
        let shape = ConvShape::from_output(13, 13, 384, 256, 3, 3, 1).unwrap();
        let rep = lower_bound_dc(&shape, 1024).unwrap();
        assert!(close(
            rep.omega.0.to_f64(),
            149_520_384.0 / (4.0 * 18432f64.sqrt()),
            1e-12
        ));
        assert!(close(rep.omega.0.to_f64(), 275_328.0, 1e-4));
        let unit = ConvShape::from_output(1, 1, 1, 1, 1, 1, 1).unwrap();
        let rep = lower_bound_dc(&unit, 1).unwrap();
        assert_eq!(rep.omega.0, Surd::sqrt_q(&q(2)).scale(Q::new(1, 8)));
    }

    #[test]
    fn winograd_omega_examples() {
        let shape = ConvShape::from_output(13, 13, 384, 256, 3, 3, 1).unwrap();
        let p = WinogradParams::new(2, 3).unwrap();
        let rep = lower_bound_wa(&shape, &p, 1024).unwrap();
        assert_eq!(rep.omega.0, Surd::int(3_115_008));
        let unit = ConvShape::from_output(1, 1, 1, 1, 1, 1, 1).unwrap();
        let p1 = WinogradParams::new(1, 1).unwrap();
        assert_eq!(lower_bound_wa(&unit, &p1, 1).unwrap().omega.0, Surd::int(1));
        let a = omega_wa(&shape, &p, 100);
        let b = omega_wa(&shape, &p, 200);
        assert_eq!(a, b * Surd::sqrt_q(&q(2)));
    }

    #[test]
    fn exact_bound_degenerates_for_huge_memory() {
        let shape = ConvShape::from_output(4, 4, 2, 2, 3, 3, 1).unwrap();
        let rep = lower_bound_dc(&shape, 1 << 20).unwrap();
        assert!(rep.q_lower_raw.0.signum() < 0);
        assert_eq!(rep.q_lower.0, Surd::zero());
        assert_eq!(rep.q_lower_ceil(), 0);
    }

    #[test]
    fn direct_search_agrees_with_closed_form() {
        let shape = ConvShape::from_output(5, 5, 4, 3, 3, 3, 1).unwrap();
        let rep = lower_bound_dc(&shape, 16).unwrap();
        assert_eq!(rep.t_2s, rep.t_2s_search);
        assert_eq!(rep.maximizer, vec![32, 0]);
    }

    #[test]
    fn report_serializes_exact_values() {
        let shape = ConvShape::from_output(2, 2, 1, 1, 1, 1, 1).unwrap();
        let rep = lower_bound_dc(&shape, 1).unwrap();
        let json = serde_json::to_value(&rep).unwrap();
        assert_eq!(json["t_2s"]["exact"], rep.t_2s.0.to_string());
        assert!(json["maximizer"].is_array());
    }

    #[test]
    fn generic_dag_has_no_bound() {
        let dag = crate::pebble::corpus::fixture("product").unwrap().unwrap();
        assert!(exact_bound_for_dag(&dag, 3).is_err());
    }
}
