//! JSON file formats for modules and potentials.
//!
//! Scalars are strings such as `"3/2"` or `"7/108*tau^6 - tau"`. Index pairs
//! and exponent tuples are comma-joined integers used as object keys.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::frobenius::{FrobeniusModule, ProductEntry};
use crate::potential::QuantumPotential;
use crate::scalar::Scalar;
use crate::series::QSeries;

/// A comma-joined list of non-negative integers, ordered numerically.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IndexKey(pub Vec<u32>);

impl IndexKey {
    pub fn pair(a: usize, b: usize) -> Self {
        IndexKey(vec![a as u32, b as u32])
    }

    fn as_pair(&self) -> Result<(usize, usize)> {
        match self.0[..] {
            [a, b] => Ok((a as usize, b as usize)),
            _ => Err(Error::Parse {
                location: "key".into(),
                message: format!("expected an index pair, got `{}`", self),
            }),
        }
    }
}

impl fmt::Display for IndexKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(u32::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

impl FromStr for IndexKey {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.split(',')
            .map(|p| p.trim().parse::<u32>().map_err(|_| format!("bad index list `{}`", s)))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(IndexKey)
    }
}

impl Serialize for IndexKey {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for IndexKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Coefficients keyed by q-exponent tuple.
pub type SeriesFile = BTreeMap<IndexKey, Scalar>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModuleFile {
    pub k: u32,
    pub dims: Vec<usize>,
    pub pairing: BTreeMap<IndexKey, Scalar>,
    /// `"j,a"` maps to the terms `[c, value]` of T_j * T_a.
    pub products: BTreeMap<IndexKey, Vec<(usize, Scalar)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub framing: Option<Vec<usize>>,
    #[serde(default = "default_real")]
    pub real: bool,
}

fn default_real() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialFile {
    pub order: u32,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub phi_a: BTreeMap<usize, SeriesFile>,
    /// Both orders of a pair are listed explicitly.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub phi_ab: BTreeMap<IndexKey, SeriesFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight3: Option<SeriesFile>,
}

fn parse_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        location: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("file types serialize");
    s.push('\n');
    s
}

impl ModuleFile {
    pub fn parse(text: &str) -> Result<Self> {
        parse_json(text)
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }

    pub fn to_module(&self) -> Result<FrobeniusModule> {
        let pairing = self
            .pairing
            .iter()
            .map(|(key, v)| Ok((key.as_pair()?, v.clone())))
            .collect::<Result<Vec<_>>>()?;
        let products = self
            .products
            .iter()
            .map(|(key, terms)| Ok((key.as_pair()?, terms.clone())))
            .collect::<Result<Vec<ProductEntry>>>()?;
        let r = self.dims.get(1).copied().unwrap_or(0);
        let framing = self.framing.clone().unwrap_or_else(|| (1..=r).collect());
        FrobeniusModule::from_entries(self.k, self.dims.clone(), &pairing, &products, &framing, self.real)
    }

    /// Nonzero entries of `m` in its own (framed) labelling.
    pub fn from_module(m: &FrobeniusModule) -> Self {
        let n = m.rank();
        let mut pairing = BTreeMap::new();
        for a in 0..n {
            for b in 0..n {
                let v = m.pairing().get(a, b);
                if !v.is_zero() {
                    pairing.insert(IndexKey::pair(a, b), v.clone());
                }
            }
        }
        let mut products = BTreeMap::new();
        for j in 1..=m.r() {
            let l = m.product(j).expect("divisor index");
            for a in 0..n {
                let terms: Vec<(usize, Scalar)> = (0..n)
                    .filter(|&c| !l.get(c, a).is_zero())
                    .map(|c| (c, l.get(c, a).clone()))
                    .collect();
                if !terms.is_empty() {
                    products.insert(IndexKey::pair(j, a), terms);
                }
            }
        }
        ModuleFile {
            k: m.k(),
            dims: m.dims().to_vec(),
            pairing,
            products,
            framing: None,
            real: m.is_real(),
        }
    }
}

fn series_to_file(s: &QSeries) -> SeriesFile {
    s.terms().map(|(m, c)| (IndexKey(m.clone()), c.clone())).collect()
}

fn series_from_file(label: &str, file: &SeriesFile, r: usize, order: u32) -> Result<QSeries> {
    for key in file.keys() {
        if key.0.len() != r {
            return Err(Error::Parse {
                location: label.to_string(),
                message: format!("exponent `{}` has {} entries, expected {}", key, key.0.len(), r),
            });
        }
    }
    Ok(QSeries::from_terms(
        r,
        order,
        file.iter().map(|(k, c)| (k.0.clone(), c.clone())),
    ))
}

impl PotentialFile {
    pub fn parse(text: &str) -> Result<Self> {
        parse_json(text)
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }

    pub fn to_potential(&self, module: &FrobeniusModule) -> Result<QuantumPotential> {
        let r = module.r();
        let phi_a = self
            .phi_a
            .iter()
            .map(|(a, s)| Ok((*a, series_from_file(&format!("phi_a.{}", a), s, r, self.order)?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        let phi_ab = self
            .phi_ab
            .iter()
            .map(|(key, s)| {
                let pair = key.as_pair()?;
                Ok((pair, series_from_file(&format!("phi_ab.{}", key), s, r, self.order)?))
            })
            .collect::<Result<BTreeMap<_, _>>>()?;
        let weight3 = self
            .weight3
            .as_ref()
            .map(|s| series_from_file("weight3", s, r, self.order))
            .transpose()?;
        QuantumPotential::new(module.clone(), self.order, phi_a, phi_ab, weight3)
    }

    pub fn from_potential(phi: &QuantumPotential) -> Self {
        PotentialFile {
            order: phi.order(),
            phi_a: phi.phi_a().iter().map(|(a, s)| (*a, series_to_file(s))).collect(),
            phi_ab: phi
                .phi_ab()
                .iter()
                .map(|(&(a, b), s)| (IndexKey::pair(a, b), series_to_file(s)))
                .collect(),
            weight3: phi.weight3_series().map(series_to_file),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn module_round_trip() {
        for m in [catalog::e1(5), catalog::standard_projective(&[1, 4])] {
            let file = ModuleFile::from_module(&m);
            let text = file.to_json();
            let back = ModuleFile::parse(&text).unwrap();
            assert_eq!(back, file);
            assert_eq!(back.to_json(), text);
            assert_eq!(back.to_module().unwrap(), m);
        }
    }

    #[test]
    fn potential_round_trip() {
        let m = catalog::e1(5);
        let s = QSeries::from_terms(
            1,
            8,
            vec![(vec![1], Scalar::from_int(3)), (vec![2], "7/2*tau^2 - 1".parse().unwrap())],
        );
        let phi = QuantumPotential::weight3(m.clone(), s).unwrap();
        let file = PotentialFile::from_potential(&phi);
        let text = file.to_json();
        assert_eq!(PotentialFile::parse(&text).unwrap(), file);
        assert_eq!(file.to_potential(&m).unwrap(), phi);
    }

    #[test]
    fn parse_errors_carry_location() {
        let err = ModuleFile::parse("{\n  \"k\": 3,\n  \"dims\": [1,1,1,1],\n  \"pairing\": {\"0;3\": \"1\"}\n}").unwrap_err();
        match err {
            Error::Parse { location, message } => {
                assert!(location.starts_with("line 4"), "{}", location);
                assert!(message.contains("0;3"), "{}", message);
            }
            other => panic!("unexpected {:?}", other),
        }
        let err = PotentialFile::parse("{\"order\": 2, \"weight3\": {\"1\": \"x\"}}").unwrap_err();
        assert!(err.is_input_error());
    }

    #[test]
    fn wrong_exponent_length_is_rejected() {
        let file = PotentialFile::parse("{\"order\": 2, \"weight3\": {\"1,0\": \"1\"}}").unwrap();
        assert!(matches!(file.to_potential(&catalog::e1(5)), Err(Error::Parse { .. })));
    }
}
