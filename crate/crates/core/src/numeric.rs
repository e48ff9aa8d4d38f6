//! Small numeric helpers shared across the pipeline.

/// Sum that does not depend on the order of `values`: the slice is sorted
/// (total order) before accumulation, so any permutation of the same
/// multiset yields bit-identical results.
pub fn order_free_sum(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    values.iter().sum()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn l2_norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Decimal rendering with 17 significant digits, which round-trips every
/// finite `f64` exactly.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// SplitMix64 finalizer, used to derive independent sub-seeds.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn ensure_finite(values: &[f64], context: impl FnOnce() -> String) -> crate::Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(crate::Error::NonFinite { context: context() })
    }
}

/// Serde helpers for writing float arrays at 17 significant digits.
pub(crate) mod serde_f64 {
    use serde::ser::SerializeSeq;
    use serde::Serializer;
    use serde_json::value::RawValue;

    use super::format_float;

    fn raw(x: f64) -> Box<RawValue> {
        RawValue::from_string(format_float(x)).expect("finite float renders as a JSON number")
    }

    pub fn vec<S: Serializer>(values: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(values.len()))?;
        for &v in values {
            seq.serialize_element(&raw(v))?;
        }
        seq.end()
    }

    pub fn vec_of_vec<S: Serializer>(rows: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
        struct Row<'a>(&'a [f64]);
        impl serde::Serialize for Row<'_> {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                vec(self.0, s)
            }
        }
        let mut seq = s.serialize_seq(Some(rows.len()))?;
        for r in rows {
            seq.serialize_element(&Row(r))?;
        }
        seq.end()
    }

    pub fn scalar<S: Serializer>(value: &f64, s: S) -> Result<S::Ok, S::Error> {
        serde::Serialize::serialize(&raw(*value), s)
    }
}
