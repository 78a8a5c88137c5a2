//! Serializes non-finite floats as the strings `"inf"`, `"-inf"` and `"nan"`.

use serde::{Deserialize, Deserializer, Serializer};

use crate::scalar::Real;

pub fn serialize<T: Real, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    if v.is_nan() {
        s.serialize_str("nan")
    } else if v.is_infinite() {
        s.serialize_str(if *v > T::zero() { "inf" } else { "-inf" })
    } else {
        v.serialize(s)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Repr {
    Num(f64),
    Text(String),
}

pub fn deserialize<'de, T: Real, D: Deserializer<'de>>(d: D) -> Result<T, D::Error> {
    match Repr::deserialize(d)? {
        Repr::Num(v) => Ok(T::lit(v)),
        Repr::Text(t) => match t.as_str() {
            "inf" => Ok(T::infinity()),
            "-inf" => Ok(T::neg_infinity()),
            "nan" => Ok(T::nan()),
            other => Err(serde::de::Error::custom(format!("unexpected float `{other}`"))),
        },
    }
}
