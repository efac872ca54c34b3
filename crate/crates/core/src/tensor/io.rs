//! JSON tensor files: `{"dims": [..], "kind": "real"|"integer", "data": [..]}`.
//!
//! Integer data is written as exact JSON integers of any size; real data is
//! written with 17 significant digits, enough to recover every `f64` exactly.

use std::path::Path;
use std::str::FromStr;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use serde_json::Number;

use super::DenseTensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarKind {
    Real,
    Integer,
}

/// A tensor of either scalar kind, as stored on disk.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyTensor {
    Real(DenseTensor<f64>),
    Integer(DenseTensor<BigInt>),
}

#[derive(Serialize, Deserialize)]
struct TensorFile {
    dims: Vec<usize>,
    kind: ScalarKind,
    data: Vec<Number>,
}

pub(crate) fn real_number(x: f64) -> Result<Number> {
    if !x.is_finite() {
        return Err(Error::Format(format!("cannot serialize non-finite value {x}")));
    }
    Number::from_str(&format!("{x:.16e}")).map_err(Error::from)
}

impl AnyTensor {
    pub fn kind(&self) -> ScalarKind {
        match self {
            AnyTensor::Real(_) => ScalarKind::Real,
            AnyTensor::Integer(_) => ScalarKind::Integer,
        }
    }

    pub fn dims(&self) -> &[usize] {
        match self {
            AnyTensor::Real(t) => t.dims(),
            AnyTensor::Integer(t) => t.dims(),
        }
    }

    /// The tensor as reals (exact integers are converted).
    pub fn to_real(&self) -> DenseTensor<f64> {
        match self {
            AnyTensor::Real(t) => t.clone(),
            AnyTensor::Integer(t) => super::to_real(t),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let file = match self {
            AnyTensor::Real(t) => TensorFile {
                dims: t.dims().to_vec(),
                kind: ScalarKind::Real,
                data: t.data().iter().map(|&x| real_number(x)).collect::<Result<_>>()?,
            },
            AnyTensor::Integer(t) => TensorFile {
                dims: t.dims().to_vec(),
                kind: ScalarKind::Integer,
                data: t
                    .data()
                    .iter()
                    .map(|x| Number::from_str(&x.to_string()).map_err(Error::from))
                    .collect::<Result<_>>()?,
            },
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: TensorFile = serde_json::from_str(s)?;
        match file.kind {
            ScalarKind::Real => {
                let data = file
                    .data
                    .iter()
                    .map(|x| {
                        x.as_f64()
                            .ok_or_else(|| Error::Format(format!("not a real number: {x}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(AnyTensor::Real(DenseTensor::new(file.dims, data)?))
            }
            ScalarKind::Integer => {
                let data = file
                    .data
                    .iter()
                    .map(|x| {
                        BigInt::from_str(x.as_str())
                            .map_err(|_| Error::Format(format!("not an integer: {x}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(AnyTensor::Integer(DenseTensor::new(file.dims, data)?))
            }
        }
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

impl From<DenseTensor<f64>> for AnyTensor {
    fn from(t: DenseTensor<f64>) -> Self {
        AnyTensor::Real(t)
    }
}

impl From<DenseTensor<BigInt>> for AnyTensor {
    fn from(t: DenseTensor<BigInt>) -> Self {
        AnyTensor::Integer(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn real_file_layout() {
        let t = AnyTensor::Real(DenseTensor::new(vec![2], vec![0.1, -3.0]).unwrap());
        let s = t.to_json().unwrap();
        assert_eq!(
            s,
            r#"{"dims":[2],"kind":"real","data":[1.0000000000000001e-1,-3.0000000000000000e+0]}"#
        );
        assert_eq!(AnyTensor::from_json(&s).unwrap(), t);
    }

    #[test]
    fn big_integers_survive() {
        let big = BigInt::from_str("-123456789012345678901234567890").unwrap();
        let t = AnyTensor::Integer(DenseTensor::new(vec![1, 2], vec![big, BigInt::from(7)]).unwrap());
        let s = t.to_json().unwrap();
        assert!(s.contains("-123456789012345678901234567890"));
        assert_eq!(AnyTensor::from_json(&s).unwrap(), t);
    }

    #[test]
    fn rejects_malformed_files() {
        assert!(AnyTensor::from_json(r#"{"dims":[2],"kind":"real","data":[1.0]}"#).is_err());
        assert!(AnyTensor::from_json(r#"{"dims":[1],"kind":"integer","data":[1.5]}"#).is_err());
        assert!(AnyTensor::from_json(r#"{"dims":[1],"kind":"complex","data":[1]}"#).is_err());
        let nan = AnyTensor::Real(DenseTensor::new(vec![1], vec![f64::NAN]).unwrap());
        assert!(nan.to_json().is_err());
    }

    proptest! {
        #[test]
        fn real_round_trip_is_bit_exact(v in prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 1..20)) {
            let n = v.len();
            let t = AnyTensor::Real(DenseTensor::new(vec![n], v.clone()).unwrap());
            let back = AnyTensor::from_json(&t.to_json().unwrap()).unwrap();
            let AnyTensor::Real(b) = back else { panic!("kind changed") };
            for (x, y) in v.iter().zip(b.data()) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }

        #[test]
        fn integer_round_trip_is_exact(v in prop::collection::vec(any::<i128>(), 1..20)) {
            let n = v.len();
            let t = AnyTensor::Integer(DenseTensor::new(vec![n], v.iter().map(|&x| BigInt::from(x) * BigInt::from(x)).collect()).unwrap());
            let back = AnyTensor::from_json(&t.to_json().unwrap()).unwrap();
            prop_assert_eq!(back, t);
        }
    }
}
