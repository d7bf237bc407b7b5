//! The MubFile format: JSON with explicit `[re, im]` pairs.
//!
//! Numbers are written by serde_json in shortest round-trip form, so a
//! save/load cycle reproduces every `f64` bit for bit.

use mub_product::{DimensionSignature, Ket, MubSet, ProductBasis, ProductKet};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MubFile {
    pub signature: Vec<usize>,
    pub bases: Vec<NamedBasis>,
    #[serde(default)]
    pub metadata: Metadata,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedBasis {
    pub name: String,
    /// `vectors[i][r]` is factor `r` of vector `i`.
    pub vectors: Vec<Vec<Vec<[f64; 2]>>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    #[serde(default)]
    pub tool_version: String,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub provenance: String,
}

#[derive(Debug, thiserror::Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{file}: at {location}: {message}")]
    Schema {
        file: String,
        location: String,
        message: String,
    },
}

fn schema(file: &str, location: impl Into<String>, message: impl Into<String>) -> FileError {
    FileError::Schema {
        file: file.to_string(),
        location: location.into(),
        message: message.into(),
    }
}

impl MubFile {
    pub fn from_set(set: &MubSet, seed: Option<u64>, tol: f64) -> Self {
        let bases = set
            .names()
            .iter()
            .zip(set.bases())
            .map(|(name, b)| NamedBasis {
                name: name.clone(),
                vectors: b
                    .vectors()
                    .iter()
                    .map(|v| {
                        v.factors()
                            .iter()
                            .map(|f| f.coords().iter().map(|c| [c.re, c.im]).collect())
                            .collect()
                    })
                    .collect(),
            })
            .collect();
        Self {
            signature: set.signature().dims().to_vec(),
            bases,
            metadata: Metadata {
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                seed,
                tolerance: Some(tol),
                provenance: set.provenance.clone(),
            },
        }
    }

    pub fn parse(text: &str, file: &str) -> Result<Self, FileError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            schema(
                file,
                format!("{path} (line {}, column {})", inner.line(), inner.column()),
                inner.to_string(),
            )
        })
    }

    pub fn load(path: &Path) -> Result<Self, FileError> {
        let text = std::fs::read_to_string(path).map_err(|source| FileError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn save(&self, path: &Path) -> Result<(), FileError> {
        let text = serde_json::to_string_pretty(self).expect("plain data serializes");
        std::fs::write(path, text + "\n").map_err(|source| FileError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Structural and norm validation; `normalize` rescales factors instead of rejecting them.
    pub fn to_set(&self, file: &str, normalize: bool) -> Result<MubSet, FileError> {
        let sig = DimensionSignature::new(self.signature.clone())
            .map_err(|e| schema(file, "signature", e.to_string()))?;
        if self.bases.is_empty() {
            return Err(schema(file, "bases", "at least one basis is required"));
        }
        let mut bases = Vec::with_capacity(self.bases.len());
        for (b, nb) in self.bases.iter().enumerate() {
            if nb.vectors.len() != sig.total() {
                return Err(schema(
                    file,
                    format!("bases[{b}].vectors"),
                    format!(
                        "{} vectors, expected {} for signature {sig}",
                        nb.vectors.len(),
                        sig.total()
                    ),
                ));
            }
            let mut vectors = Vec::with_capacity(nb.vectors.len());
            for (i, v) in nb.vectors.iter().enumerate() {
                if v.len() != sig.len() {
                    return Err(schema(
                        file,
                        format!("bases[{b}].vectors[{i}]"),
                        format!("{} factors, expected {}", v.len(), sig.len()),
                    ));
                }
                let mut factors = Vec::with_capacity(v.len());
                for (r, f) in v.iter().enumerate() {
                    let at = format!("bases[{b}].vectors[{i}][{r}]");
                    if f.len() != sig.dims()[r] {
                        return Err(schema(
                            file,
                            at,
                            format!("factor length {}, expected {}", f.len(), sig.dims()[r]),
                        ));
                    }
                    let coords: Vec<C64> = f.iter().map(|&[re, im]| C64::new(re, im)).collect();
                    let ket = if normalize {
                        Ket::normalize(coords)
                    } else {
                        Ket::new(coords)
                    };
                    let ket = ket.map_err(|e| {
                        let hint = if normalize {
                            ""
                        } else {
                            " (pass --normalize to rescale)"
                        };
                        schema(file, at, format!("{e}{hint}"))
                    })?;
                    factors.push(ket);
                }
                vectors.push(ProductKet::new(factors).map_err(|e| {
                    schema(file, format!("bases[{b}].vectors[{i}]"), e.to_string())
                })?);
            }
            bases.push(
                ProductBasis::new(sig.clone(), vectors)
                    .map_err(|e| schema(file, format!("bases[{b}]"), e.to_string()))?,
            );
        }
        let names = self.bases.iter().map(|b| b.name.clone()).collect();
        let tol = self.metadata.tolerance.unwrap_or(mub_product::DEFAULT_TOL);
        MubSet::with_names(bases, names, self.metadata.provenance.clone(), tol)
            .map_err(|e| schema(file, "bases", e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use mub_product::constructions::canonical_qutrit_quadruple;
    use mub_product::equivalence::fingerprint;

    #[test]
    fn round_trip_is_exact() {
        let set = canonical_qutrit_quadruple(2).unwrap();
        let file = MubFile::from_set(&set, Some(4), 1e-9);
        let text = serde_json::to_string(&file).unwrap();
        let back = MubFile::parse(&text, "mem").unwrap();
        assert_eq!(back, file);
        let set2 = back.to_set("mem", false).unwrap();
        assert_eq!(set2.bases(), set.bases());
        assert_eq!(fingerprint(&set2), fingerprint(&set));
    }

    #[test]
    fn schema_errors_name_the_path() {
        let bad = r#"{"signature":[2],"bases":[{"name":"z","vectors":[[[[1,0],[0,"x"]]]]}]}"#;
        let err = MubFile::parse(bad, "mem").unwrap_err().to_string();
        assert!(err.contains("bases[0].vectors[0][0][1]"), "{err}");
        assert!(err.contains("line 1"), "{err}");
    }

    #[test]
    fn norm_violation_respects_normalize_flag() {
        let text = r#"{"signature":[2],"bases":[{"name":"z","vectors":[[[[2,0],[0,0]]],[[[0,0],[1,0]]]]}]}"#;
        let file = MubFile::parse(text, "mem").unwrap();
        let err = file.to_set("mem", false).unwrap_err().to_string();
        assert!(
            err.contains("bases[0].vectors[0][0]") && err.contains("--normalize"),
            "{err}"
        );
        assert!(file.to_set("mem", true).is_ok());
    }
}
